//! Monte Carlo engine for full per-packet protocol episodes and parameter
//! sweeps.
//!
//! Each trial runs the slot loop: the source transmits, the destination
//! combines and attempts decoding, and on failure the relays contend for
//! the next slot until the message is delivered or the slot limit is hit.
//! Every trial derives its randomness from (experiment seed, sweep index,
//! trial index), trials are accumulated in fixed-size batches folded in
//! index order, and results are therefore byte-identical across worker
//! counts.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::contention::{
    eligible_set, run_contention, select_baseline, select_transmitter, ContentionConfig,
    ContentionError, RelayState, SelectionResult, Strategy,
};
use crate::link::{
    decode_success_amc, rcpc_decode_success, AmcPolicy, ChaseAccumulator, LinkError, RcpcSchedule,
    TransmissionMode,
};
use crate::netmodel::{
    mix_seed, place_relays_uniform, BlockFading, ChannelParams, LinkId, NetModelError, NodeId,
    Topology,
};

/// Trials per accumulation batch. Fixed so that summation order does not
/// depend on the rayon worker count.
const BATCH: u64 = 4096;

/// Stream index reserved for contention/selection coin flips, outside the
/// (link, slot) space used by the fading field.
const COIN_STREAM: u64 = u64::MAX;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),
    #[error(transparent)]
    Contention(#[from] ContentionError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    NetModel(#[from] NetModelError),
}

/// What the transmitting node sends: adaptive modes, one fixed mode, or an
/// RCPC incremental-redundancy schedule.
#[derive(Debug, Clone)]
pub enum TransmissionPlan {
    Amc(AmcPolicy),
    SingleMode(TransmissionMode),
    Rcpc(RcpcSchedule),
}

/// Destination decode semantics for the AMC and single-mode plans.
///
/// `Chase` applies the combining rules exactly: the accumulated SNR must
/// meet the governing threshold of the employed modes. `Threshold` is the
/// per-slot abstraction the closed-form analysis uses: the first slot
/// decodes against its mode's own threshold and every retransmission
/// decodes when it survives the discard test. RCPC decoding is always the
/// bits-weighted mean rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeModel {
    #[default]
    Chase,
    Threshold,
}

/// Topology source: explicit coordinates or uniform placement.
#[derive(Debug, Clone)]
pub enum TopologySpec {
    Explicit(Topology),
    UniformRelays { relay_count: usize, d_sd_m: f64 },
}

/// A one-dimensional parameter sweep.
#[derive(Debug, Clone)]
pub enum Sweep {
    /// Common contention probability applied to every relay.
    ContentionProb(Vec<f64>),
    EtaOppDb(Vec<f64>),
    BetaOppDb(Vec<f64>),
    TxPowerAboveNoiseDb(Vec<f64>),
    Strategy(Vec<Strategy>),
}

/// Names used in the `sweep_param` CSV column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    ContentionProb,
    EtaOppDb,
    BetaOppDb,
    TxPowerAboveNoiseDb,
    Strategy,
    None,
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::ContentionProb => "contention_prob",
            SweepParam::EtaOppDb => "eta_opp_db",
            SweepParam::BetaOppDb => "beta_opp_db",
            SweepParam::TxPowerAboveNoiseDb => "tx_power_above_noise_db",
            SweepParam::Strategy => "strategy",
            SweepParam::None => "none",
        }
    }
}

impl Sweep {
    pub fn len(&self) -> usize {
        match self {
            Sweep::ContentionProb(v)
            | Sweep::EtaOppDb(v)
            | Sweep::BetaOppDb(v)
            | Sweep::TxPowerAboveNoiseDb(v) => v.len(),
            Sweep::Strategy(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn param(&self) -> SweepParam {
        match self {
            Sweep::ContentionProb(_) => SweepParam::ContentionProb,
            Sweep::EtaOppDb(_) => SweepParam::EtaOppDb,
            Sweep::BetaOppDb(_) => SweepParam::BetaOppDb,
            Sweep::TxPowerAboveNoiseDb(_) => SweepParam::TxPowerAboveNoiseDb,
            Sweep::Strategy(_) => SweepParam::Strategy,
        }
    }

    pub fn value_label(&self, i: usize) -> String {
        match self {
            Sweep::ContentionProb(v)
            | Sweep::EtaOppDb(v)
            | Sweep::BetaOppDb(v)
            | Sweep::TxPowerAboveNoiseDb(v) => format_sig(v[i], 6),
            Sweep::Strategy(v) => v[i].name().to_string(),
        }
    }
}

/// Full description of one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub topology: TopologySpec,
    pub channel: ChannelParams,
    pub contention: ContentionConfig,
    pub plan: TransmissionPlan,
    pub decode_model: DecodeModel,
    /// Chase discard threshold φ in dB SNR.
    pub discard_threshold_db: f64,
    /// Effective rate of the outer code.
    pub outer_rate: f64,
    /// Information bits per message (AMC/single-mode accounting; RCPC uses
    /// its schedule).
    pub info_bits: f64,
    pub slot_limit: u32,
    pub trials: u64,
    pub seed: u64,
    /// Let relays keep attempting to decode from overheard retransmissions
    /// instead of only the source's first transmission.
    pub relay_overhear: bool,
    pub sweep: Option<Sweep>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.trials == 0 {
            return Err(SimError::InvalidExperiment("trials must be >= 1".into()));
        }
        if self.slot_limit == 0 {
            return Err(SimError::InvalidExperiment("slot_limit must be >= 1".into()));
        }
        self.channel.validate()?;
        self.contention.validate()?;
        match &self.plan {
            TransmissionPlan::Rcpc(s) => {
                s.validate()?;
                if self.slot_limit as usize > s.stages() {
                    return Err(SimError::InvalidExperiment(format!(
                        "slot_limit {} exceeds the {} RCPC stages",
                        self.slot_limit,
                        s.stages()
                    )));
                }
            }
            TransmissionPlan::Amc(p) => {
                if p.modes.is_empty() {
                    return Err(SimError::InvalidExperiment("empty AMC policy".into()));
                }
            }
            TransmissionPlan::SingleMode(_) => {}
        }
        if !(self.outer_rate > 0.0 && self.outer_rate <= 1.0) {
            return Err(SimError::InvalidExperiment(format!(
                "outer rate f = {} outside (0, 1]",
                self.outer_rate
            )));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.is_empty() {
                return Err(SimError::InvalidExperiment("empty sweep".into()));
            }
        }
        Ok(())
    }
}

/// One packet episode.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub slots_used: u32,
    pub transmitters: Vec<SelectionResult>,
    /// Mode id per slot (AMC/single-mode) or RCPC stage.
    pub modes: Vec<usize>,
    pub success: bool,
    pub coded_bits_total: f64,
    pub realized_rate: f64,
    /// Combined SNR at the destination (Chase sum, or bits-weighted mean
    /// for RCPC) for post-hoc auditing.
    pub combined_snr: f64,
    /// The threshold that governed the final decode decision.
    pub governing_threshold: f64,
}

/// Mean throughput with normal-approximation uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
    pub ci95_half_width: f64,
}

/// One row of sweep output.
#[derive(Debug, Clone)]
pub struct SweepPointResult {
    pub param: SweepParam,
    pub value_label: String,
    pub strategy: Strategy,
    pub estimate: ThroughputEstimate,
}

/// A sweep-point view of the experiment with link statistics resolved.
pub struct ResolvedPoint {
    topology: Topology,
    contention: ContentionConfig,
    plan: TransmissionPlan,
    /// Cached decode machinery: AMC/single-mode policy or RCPC schedule.
    policy: Option<AmcPolicy>,
    schedule: Option<RcpcSchedule>,
    decode_model: DecodeModel,
    /// Mean |h|² per link.
    mean_sd: f64,
    mean_sr: Vec<f64>,
    mean_rd: Vec<f64>,
    /// Relay-to-relay mean gains for the overhear option, row = transmitter.
    mean_rr: Vec<Vec<f64>>,
    /// SNR = gain * snr_scale.
    snr_scale: f64,
    phi_linear: f64,
    outer_rate: f64,
    info_bits: f64,
    slot_limit: u32,
    relay_overhear: bool,
}

impl ResolvedPoint {
    /// Resolve the experiment at one sweep point.
    pub fn resolve(config: &ExperimentConfig, sweep_idx: usize) -> Result<Self, SimError> {
        resolve(config, sweep_idx)
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn mean_snr_sd(&self) -> f64 {
        self.mean_sd * self.snr_scale
    }
}

/// Materialize the experiment's topology; uniform placement is seeded from
/// the experiment seed and identical for every sweep point and trial.
pub fn resolve_topology(config: &ExperimentConfig) -> Result<Topology, SimError> {
    match &config.topology {
        TopologySpec::Explicit(t) => {
            Topology::new(t.source, t.destination, t.relays.clone()).map_err(SimError::from)
        }
        TopologySpec::UniformRelays { relay_count, d_sd_m } => {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[config.seed, 0x7090]));
            Ok(place_relays_uniform(&mut rng, *relay_count, *d_sd_m))
        }
    }
}

fn resolve(config: &ExperimentConfig, sweep_idx: usize) -> Result<ResolvedPoint, SimError> {
    let mut channel = config.channel.clone();
    let mut contention = config.contention.clone();
    let mut plan = config.plan.clone();
    if let Some(sweep) = &config.sweep {
        match sweep {
            Sweep::ContentionProb(v) => {
                let p = v[sweep_idx];
                contention.contention_prob = vec![p; contention.contention_prob.len()];
            }
            Sweep::EtaOppDb(v) => {
                contention.eta_opp_linear = 10f64.powf(v[sweep_idx] / 10.0);
            }
            Sweep::BetaOppDb(v) => {
                contention.beta_opp_linear = Some(10f64.powf(v[sweep_idx] / 10.0));
            }
            Sweep::TxPowerAboveNoiseDb(v) => {
                channel.tx_power_above_noise_db = v[sweep_idx];
            }
            Sweep::Strategy(v) => {
                contention.strategy = v[sweep_idx];
            }
        }
    }
    contention.validate()?;
    let topology = resolve_topology(config)?;
    if contention.contention_prob.len() != topology.relay_count() {
        return Err(SimError::InvalidExperiment(format!(
            "{} contention probabilities for {} relays",
            contention.contention_prob.len(),
            topology.relay_count()
        )));
    }
    let d0 = channel.reference_distance_m;
    let mean_sd = channel.average_gain(topology.source_destination_distance())?;
    let mean_sr = topology
        .relays
        .iter()
        .map(|r| channel.average_gain(topology.source.distance(r).max(d0)))
        .collect::<Result<Vec<_>, _>>()?;
    let mean_rd = topology
        .relays
        .iter()
        .map(|r| channel.average_gain(r.distance(&topology.destination).max(d0)))
        .collect::<Result<Vec<_>, _>>()?;
    let mean_rr = if config.relay_overhear {
        topology
            .relays
            .iter()
            .map(|a| {
                topology
                    .relays
                    .iter()
                    // clamp to the reference distance for co-located relays
                    .map(|b| channel.average_gain(a.distance(b).max(d0)))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?
    } else {
        Vec::new()
    };
    let snr_scale = channel.tx_energy_linear() / channel.noise_linear();
    if let TransmissionPlan::Rcpc(s) = &mut plan {
        s.validate()?;
    }
    let policy = match &plan {
        TransmissionPlan::Amc(p) => Some(p.clone()),
        TransmissionPlan::SingleMode(m) => Some(AmcPolicy::single(m.clone())),
        TransmissionPlan::Rcpc(_) => None,
    };
    let schedule = match &plan {
        TransmissionPlan::Rcpc(s) => Some(s.clone()),
        _ => None,
    };
    Ok(ResolvedPoint {
        topology,
        contention,
        plan,
        policy,
        schedule,
        decode_model: config.decode_model,
        mean_sd,
        mean_sr,
        mean_rd,
        mean_rr,
        snr_scale,
        phi_linear: 10f64.powf(config.discard_threshold_db / 10.0),
        outer_rate: config.outer_rate,
        info_bits: config.info_bits,
        slot_limit: config.slot_limit,
        relay_overhear: config.relay_overhear,
    })
}

/// Update relay decode flags from one overheard transmission: decoding is
/// absorbing, and an undecoded relay decodes exactly when its slot SNR
/// meets the threshold of the mode just used.
pub fn relay_decode_update(
    states: &mut [RelayState],
    slot_gains: &[f64],
    snr_scale: f64,
    threshold_linear: f64,
) {
    for (state, &gain) in states.iter_mut().zip(slot_gains) {
        if !state.decoded && gain * snr_scale >= threshold_linear {
            state.decoded = true;
        }
    }
}

/// Run one packet episode.
pub fn simulate_packet(
    field: &BlockFading,
    coin: &mut ChaCha8Rng,
    r: &ResolvedPoint,
) -> TrialRecord {
    let kr = r.topology.relay_count();
    let policy = r.policy.as_ref();
    let schedule = r.schedule.as_ref();
    let mut acc = ChaseAccumulator::new(r.phi_linear, r.slot_limit);
    let mut rcpc_slots: Vec<(f64, f64)> = Vec::new();
    let mut history: Vec<(usize, f64)> = Vec::new();
    let mut transmitters = Vec::new();
    let mut modes = Vec::new();
    let mut states: Vec<RelayState> = (0..kr)
        .map(|relay_id| RelayState {
            relay_id,
            decoded: false,
            gain_to_destination: 0.0,
        })
        .collect();
    let mut transmitter = SelectionResult::Source;
    let mut slot: u32 = 1;
    let mut success;
    let mut governing;
    loop {
        // Transmitter's channel to the destination this slot. A selected
        // relay reuses the gain it measured from the destination's NACK.
        let tx_gain = match transmitter {
            SelectionResult::Source => {
                field
                    .gain(LinkId::new(NodeId::Source, NodeId::Destination), slot, r.mean_sd)
                    .gain
            }
            SelectionResult::Relay(i) => states[i].gain_to_destination,
        };
        let snr = tx_gain * r.snr_scale;
        transmitters.push(transmitter);

        let slot_threshold = if let Some(policy) = policy {
            let mode = policy.mode_for_gain(snr);
            modes.push(mode.mode_id);
            history.push((mode.mode_id, mode.coded_bits(r.info_bits)));
            acc.observe(snr, mode.mode_id).expect("slot limit enforced by loop");
            success = match r.decode_model {
                DecodeModel::Chase => {
                    governing = policy.governing_threshold_linear(&acc.modes_used);
                    decode_success_amc(&acc, policy)
                }
                DecodeModel::Threshold => {
                    governing = if slot == 1 {
                        mode.decode_threshold_linear()
                    } else {
                        r.phi_linear
                    };
                    snr >= governing
                }
            };
            mode.decode_threshold_linear()
        } else {
            let schedule = schedule.expect("RCPC plan");
            let stage = slot as usize;
            modes.push(stage);
            rcpc_slots.push((snr, schedule.incremental_bits(stage)));
            governing = schedule.threshold_linear(stage);
            success = rcpc_decode_success(&rcpc_slots, schedule, stage, r.phi_linear);
            governing
        };

        if success || slot >= r.slot_limit {
            break;
        }

        // Relays decode from the first transmission, or from any overheard
        // transmission when the overhear option is on.
        if slot == 1 || r.relay_overhear {
            let tx_node = match transmitter {
                SelectionResult::Source => NodeId::Source,
                SelectionResult::Relay(i) => NodeId::Relay(i as u16),
            };
            let gains: Vec<f64> = (0..kr)
                .map(|a| match transmitter {
                    SelectionResult::Relay(i) if i == a => f64::NEG_INFINITY,
                    SelectionResult::Relay(i) => {
                        field
                            .gain(LinkId::new(tx_node, NodeId::Relay(a as u16)), slot, r.mean_rr[i][a])
                            .gain
                    }
                    SelectionResult::Source => {
                        field
                            .gain(LinkId::new(tx_node, NodeId::Relay(a as u16)), slot, r.mean_sr[a])
                            .gain
                    }
                })
                .collect();
            relay_decode_update(&mut states, &gains, r.snr_scale, slot_threshold);
        }

        // Next slot: fresh destination gains observed from the NACK, then
        // the selection round.
        slot += 1;
        for (a, state) in states.iter_mut().enumerate() {
            state.gain_to_destination = field
                .gain(
                    LinkId::new(NodeId::Relay(a as u16), NodeId::Destination),
                    slot,
                    r.mean_rd[a],
                )
                .gain;
        }
        transmitter = if r.contention.strategy.uses_contention() {
            let eligible = eligible_set(&states, r.contention.eta_opp_linear);
            let outcome = run_contention(coin, &states, &eligible, &r.contention);
            select_transmitter(coin, &outcome, &r.contention)
        } else {
            select_baseline(&states, &r.topology, r.contention.strategy)
        };
    }

    let (coded_bits_total, realized_rate, combined) = if policy.is_some() {
        let total: f64 = history.iter().map(|(_, b)| b).sum();
        let rate =
            crate::link::realized_rate_amc(&history, success, r.outer_rate, r.info_bits);
        (total, rate, acc.combined_snr)
    } else {
        let schedule = schedule.expect("RCPC plan");
        let total: f64 = rcpc_slots.iter().map(|(_, b)| b).sum();
        let delivered = schedule.info_bits as f64;
        let rate = if success { delivered / total } else { 0.0 };
        let kept_bits: f64 = rcpc_slots
            .iter()
            .filter(|(s, _)| *s >= r.phi_linear)
            .map(|(_, b)| b)
            .sum();
        let weighted: f64 = rcpc_slots
            .iter()
            .filter(|(s, _)| *s >= r.phi_linear)
            .map(|(s, b)| s * b)
            .sum();
        let mean = if kept_bits > 0.0 { weighted / kept_bits } else { 0.0 };
        (total, rate, mean)
    };
    TrialRecord {
        slots_used: slot,
        transmitters,
        modes,
        success,
        coded_bits_total,
        realized_rate,
        combined_snr: combined,
        governing_threshold: governing,
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct BatchStats {
    n: u64,
    sum: f64,
    sum_sq: f64,
    delivered: u64,
    // per-packet normalized extra bits l_i = (P/k) * bits beyond stage 1
    sum_l: f64,
    sum_l_sq: f64,
    sum_dl: f64,
}

impl BatchStats {
    fn fold(mut self, other: BatchStats) -> BatchStats {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.delivered += other.delivered;
        self.sum_l += other.sum_l;
        self.sum_l_sq += other.sum_l_sq;
        self.sum_dl += other.sum_dl;
        self
    }
}

fn estimate_from(stats: BatchStats, plan: &TransmissionPlan) -> ThroughputEstimate {
    let n = stats.n as f64;
    match plan {
        TransmissionPlan::Rcpc(s) => {
            // Hagenauer effective rate on the aggregate, with a delta-method
            // standard error over (delivered fraction, mean extra bits).
            let k = s.info_bits as f64;
            let nm = s.mother_codeword_bits as f64 + s.mother_memory as f64;
            let p = s.puncture_period as f64;
            let d_bar = stats.delivered as f64 / n;
            let l_bar = stats.sum_l / n;
            let mean = (k * d_bar / nm) * (p / (p + l_bar));
            let var_d = (d_bar - d_bar * d_bar).max(0.0);
            let var_l = (stats.sum_l_sq / n - l_bar * l_bar).max(0.0);
            let cov = stats.sum_dl / n - d_bar * l_bar;
            let dd = (k / nm) * p / (p + l_bar);
            let dl = -(k * d_bar / nm) * p / ((p + l_bar) * (p + l_bar));
            let var = (dd * dd * var_d + dl * dl * var_l + 2.0 * dd * dl * cov).max(0.0);
            let stderr = (var / n).sqrt();
            ThroughputEstimate {
                mean,
                stderr,
                trials: stats.n,
                ci95_half_width: 1.96 * stderr,
            }
        }
        _ => {
            let mean = stats.sum / n;
            let var = (stats.sum_sq / n - mean * mean).max(0.0);
            let stderr = (var / n).sqrt() / (1.0 - 1.0 / n).sqrt().max(f64::MIN_POSITIVE);
            ThroughputEstimate {
                mean,
                stderr,
                trials: stats.n,
                ci95_half_width: 1.96 * stderr,
            }
        }
    }
}

fn run_batches(config: &ExperimentConfig, r: &ResolvedPoint, sweep_idx: usize) -> BatchStats {
    let trials = config.trials;
    let batches = trials.div_ceil(BATCH);
    let rcpc = matches!(r.plan, TransmissionPlan::Rcpc(_));
    let per_batch: Vec<BatchStats> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut stats = BatchStats::default();
            let lo = b * BATCH;
            let hi = ((b + 1) * BATCH).min(trials);
            for trial in lo..hi {
                let trial_seed = mix_seed(&[config.seed, sweep_idx as u64, trial]);
                let field = BlockFading::new(trial_seed);
                let mut coin = ChaCha8Rng::seed_from_u64(trial_seed);
                coin.set_stream(COIN_STREAM);
                let rec = simulate_packet(&field, &mut coin, r);
                stats.n += 1;
                stats.sum += rec.realized_rate;
                stats.sum_sq += rec.realized_rate * rec.realized_rate;
                if rcpc {
                    if let TransmissionPlan::Rcpc(s) = &r.plan {
                        let extra = rec.coded_bits_total - s.incremental_bits(1);
                        let l = extra * s.puncture_period as f64 / s.info_bits as f64;
                        let d = if rec.success { 1.0 } else { 0.0 };
                        stats.delivered += rec.success as u64;
                        stats.sum_l += l;
                        stats.sum_l_sq += l * l;
                        stats.sum_dl += d * l;
                    }
                }
            }
            stats
        })
        .collect();
    per_batch
        .into_iter()
        .fold(BatchStats::default(), BatchStats::fold)
}

/// Run the trials of one sweep point (or of the whole experiment when no
/// sweep is configured).
pub fn run_point(config: &ExperimentConfig, sweep_idx: usize) -> Result<SweepPointResult, SimError> {
    config.validate()?;
    let r = resolve(config, sweep_idx)?;
    let stats = run_batches(config, &r, sweep_idx);
    let estimate = estimate_from(stats, &r.plan);
    let (param, value_label) = match &config.sweep {
        Some(s) => (s.param(), s.value_label(sweep_idx)),
        None => (SweepParam::None, String::new()),
    };
    Ok(SweepPointResult {
        param,
        value_label,
        strategy: r.contention.strategy,
        estimate,
    })
}

/// Run the full experiment: every sweep point, or a single point when no
/// sweep is configured.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<SweepPointResult>, SimError> {
    config.validate()?;
    let points = config.sweep.as_ref().map(|s| s.len()).unwrap_or(1);
    (0..points).map(|i| run_point(config, i)).collect()
}

/// Collect individual trial records for a sweep point (post-hoc audits and
/// selection-frequency tests). Single-threaded; intended for moderate
/// trial counts.
pub fn collect_trials(
    config: &ExperimentConfig,
    sweep_idx: usize,
    limit: u64,
) -> Result<Vec<TrialRecord>, SimError> {
    config.validate()?;
    let r = resolve(config, sweep_idx)?;
    let n = config.trials.min(limit);
    let mut out = Vec::with_capacity(n as usize);
    for trial in 0..n {
        let trial_seed = mix_seed(&[config.seed, sweep_idx as u64, trial]);
        let field = BlockFading::new(trial_seed);
        let mut coin = ChaCha8Rng::seed_from_u64(trial_seed);
        coin.set_stream(COIN_STREAM);
        out.push(simulate_packet(&field, &mut coin, &r));
    }
    Ok(out)
}

/// Format with six significant digits, fixed point for moderate exponents
/// and scientific notation otherwise.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        format!("{:.*}", decimals, x)
    } else {
        format!("{:.*e}", sig - 1, x)
    }
}

/// Write sweep results as CSV with the fixed column order
/// `sweep_param,sweep_value,trials,mean_throughput,stderr,ci95,seed,strategy`.
pub fn write_csv<W: Write + ?Sized>(
    w: &mut W,
    results: &[SweepPointResult],
    seed: u64,
) -> io::Result<()> {
    writeln!(
        w,
        "sweep_param,sweep_value,trials,mean_throughput,stderr,ci95,seed,strategy"
    )?;
    for r in results {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.param.name(),
            r.value_label,
            r.estimate.trials,
            format_sig(r.estimate.mean, 6),
            format_sig(r.estimate.stderr, 6),
            format_sig(r.estimate.ci95_half_width, 6),
            seed,
            r.strategy.name(),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contention::WinnerWeighting;
    use crate::netmodel::Position;

    fn channel() -> ChannelParams {
        ChannelParams {
            carrier_frequency_hz: 2.4e9,
            reference_distance_m: 1.0,
            path_loss_exponent: 3.0,
            noise_power_db: -134.0,
            tx_power_above_noise_db: 110.0,
            bandwidth_hz: 9e6,
        }
    }

    fn example41_topology() -> Topology {
        Topology::new(
            Position::new(0.0, 0.0),
            Position::new(100.0, 0.0),
            vec![Position::new(25.0, 10.0), Position::new(75.0, -10.0)],
        )
        .unwrap()
    }

    fn two_mode_policy() -> AmcPolicy {
        AmcPolicy::new(
            vec![
                TransmissionMode::new(1, "BPSK r=1/3", 1.0 / 3.0, 1, 3.0).unwrap(),
                TransmissionMode::new(2, "QPSK r=2/3", 2.0 / 3.0, 2, 9.0).unwrap(),
            ],
            vec![4.0],
        )
        .unwrap()
    }

    fn base_config(strategy: Strategy, p: Vec<f64>) -> ExperimentConfig {
        ExperimentConfig {
            topology: TopologySpec::Explicit(example41_topology()),
            channel: channel(),
            contention: ContentionConfig {
                minislots: 1,
                contention_prob: p,
                eta_opp_linear: 0.0,
                strategy,
                beta_opp_linear: None,
                winner_bias: None,
                weighting: WinnerWeighting::SlotWeighted,
            },
            plan: TransmissionPlan::Amc(two_mode_policy()),
            decode_model: DecodeModel::Chase,
            discard_threshold_db: -6.0,
            outer_rate: 1912.0 / 2044.0,
            info_bits: 1912.0,
            slot_limit: 2,
            trials: 20_000,
            seed: 11,
            relay_overhear: false,
            sweep: None,
        }
    }

    #[test]
    fn certain_first_slot_success_uses_one_slot() {
        let mut config = base_config(Strategy::SourceOnly, vec![0.0, 0.0]);
        // Mode thresholds far below the typical SNR: always decode in slot 1.
        config.plan = TransmissionPlan::Amc(
            AmcPolicy::new(
                vec![
                    TransmissionMode::new(1, "m1", 1.0 / 3.0, 1, -200.0).unwrap(),
                    TransmissionMode::new(2, "m2", 2.0 / 3.0, 2, -190.0).unwrap(),
                ],
                vec![-195.0],
            )
            .unwrap(),
        );
        config.discard_threshold_db = -250.0;
        config.trials = 200;
        let records = collect_trials(&config, 0, 200).unwrap();
        assert!(records.iter().all(|r| r.success && r.slots_used == 1));
    }

    #[test]
    fn source_only_failure_yields_zero_rate() {
        let mut config = base_config(Strategy::SourceOnly, vec![0.0, 0.0]);
        config.plan = TransmissionPlan::SingleMode(
            TransmissionMode::new(1, "hard", 0.5, 4, 200.0).unwrap(),
        );
        config.slot_limit = 1;
        config.trials = 100;
        let records = collect_trials(&config, 0, 100).unwrap();
        assert!(records
            .iter()
            .all(|r| !r.success && r.realized_rate == 0.0 && r.slots_used == 1));
    }

    #[test]
    fn identical_seeds_reproduce_trials() {
        let config = base_config(Strategy::Id, vec![0.4, 0.6]);
        let a = collect_trials(&config, 0, 50).unwrap();
        let b = collect_trials(&config, 0, 50).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.realized_rate, y.realized_rate);
            assert_eq!(x.transmitters, y.transmitters);
        }
    }

    #[test]
    fn relay_decode_update_is_absorbing_and_inclusive() {
        let mut states = vec![
            RelayState {
                relay_id: 0,
                decoded: true,
                gain_to_destination: 0.0,
            },
            RelayState {
                relay_id: 1,
                decoded: false,
                gain_to_destination: 0.0,
            },
        ];
        // Relay 0 stays decoded despite a zero gain; relay 1 decodes exactly
        // at the boundary.
        relay_decode_update(&mut states, &[0.0, 2.0], 1.0, 2.0);
        assert!(states[0].decoded);
        assert!(states[1].decoded);
    }

    #[test]
    fn relay_decode_rates_match_rho() {
        // Mode-1 slot-1 decode rates across 10^6 trials against the
        // closed-form exponential.
        let config = base_config(Strategy::Id, vec![0.5, 0.5]);
        let r = resolve(&config, 0).unwrap();
        let alpha = 10f64.powf(3.0 / 10.0);
        let n = 1_000_000u64;
        let mut decoded = [0u64; 2];
        for trial in 0..n {
            let field = BlockFading::new(mix_seed(&[99, trial]));
            for (a, count) in decoded.iter_mut().enumerate() {
                let g = field
                    .gain(
                        LinkId::new(NodeId::Source, NodeId::Relay(a as u16)),
                        1,
                        r.mean_sr[a],
                    )
                    .gain;
                if g * r.snr_scale >= alpha {
                    *count += 1;
                }
            }
        }
        for (a, count) in decoded.iter().enumerate() {
            let mean_snr = r.mean_sr[a] * r.snr_scale;
            let expect = (-alpha / mean_snr).exp();
            let got = *count as f64 / n as f64;
            assert!((got - expect).abs() < 0.003, "relay {a}: {got} vs {expect}");
        }
    }

    #[test]
    fn sweep_single_value_matches_direct_run() {
        let mut config = base_config(Strategy::Id, vec![0.4, 0.6]);
        config.trials = 5_000;
        let direct = run_point(&config, 0).unwrap();
        config.sweep = Some(Sweep::TxPowerAboveNoiseDb(vec![110.0]));
        let swept = run_sweep(&config).unwrap();
        assert_eq!(swept.len(), 1);
        assert_eq!(swept[0].estimate.mean, direct.estimate.mean);
    }

    #[test]
    fn csv_output_shape_and_determinism() {
        let mut config = base_config(Strategy::Id, vec![0.4, 0.6]);
        config.trials = 2_000;
        config.sweep = Some(Sweep::ContentionProb(vec![0.2, 0.8]));
        let results = run_sweep(&config).unwrap();
        let mut a = Vec::new();
        write_csv(&mut a, &results, config.seed).unwrap();
        let results2 = run_sweep(&config).unwrap();
        let mut b = Vec::new();
        write_csv(&mut b, &results2, config.seed).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "sweep_param,sweep_value,trials,mean_throughput,stderr,ci95,seed,strategy"
        );
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().starts_with("contention_prob,0.200000,2000,"));
    }

    #[test]
    fn chase_success_audit_holds() {
        let config = base_config(Strategy::Id, vec![0.5, 0.5]);
        let records = collect_trials(&config, 0, 5_000).unwrap();
        assert!(records.iter().any(|r| r.success));
        for rec in records.iter().filter(|r| r.success) {
            assert!(
                rec.combined_snr >= rec.governing_threshold,
                "success with combined {} below governing {}",
                rec.combined_snr,
                rec.governing_threshold
            );
        }
    }

    #[test]
    fn slot2_transmitter_frequencies_match_enumeration_oracle() {
        // Single-mode Example-style setup, K = 1: among trials that reach
        // slot 2, the transmitter distribution equals the oracle's
        // selection probabilities (relay decode states are independent of
        // the slot-1 destination draw).
        let mut config = base_config(Strategy::Id, vec![0.6, 0.4]);
        config.plan = TransmissionPlan::SingleMode(
            TransmissionMode::new(1, "16-QAM r=1/2", 0.5, 4, 13.0).unwrap(),
        );
        config.trials = 400_000;
        let records = collect_trials(&config, 0, 400_000).unwrap();
        let r = resolve(&config, 0).unwrap();
        let gamma = 10f64.powf(1.3);
        let rho: Vec<f64> = r
            .mean_sr
            .iter()
            .map(|&m| (-gamma / (m * r.snr_scale)).exp())
            .collect();
        let scenario = crate::analytic::AnalyticScenario {
            g_sd: r.mean_sd * r.snr_scale,
            g_sa: r.mean_sr.iter().map(|&m| m * r.snr_scale).collect(),
            g_ad: r.mean_rd.iter().map(|&m| m * r.snr_scale).collect(),
            alpha: gamma,
            beta: gamma * 2.0,
            phi: gamma / 100.0,
            gamma,
            gamma_swp: gamma,
            f: config.outer_rate,
            minislots: 1,
            contention_prob: config.contention.contention_prob.clone(),
        };
        let exact = scenario.enumerate_selection_probs(&rho).unwrap();
        let reached: Vec<_> = records.iter().filter(|t| t.slots_used == 2).collect();
        let n = reached.len() as f64;
        assert!(n > 100_000.0, "slot 2 reached in only {n} trials");
        let mut counts = [0u64; 3];
        for t in &reached {
            match t.transmitters[1] {
                SelectionResult::Source => counts[2] += 1,
                SelectionResult::Relay(a) => counts[a] += 1,
            }
        }
        for (got, expect) in counts
            .iter()
            .map(|&c| c as f64 / n)
            .zip([exact.q_by_relay[0], exact.q_by_relay[1], exact.q_none])
        {
            let se = (expect * (1.0 - expect) / n).sqrt();
            assert!(
                (got - expect).abs() <= 3.0 * se,
                "frequency {got} vs oracle {expect} (3se = {:.2e})",
                3.0 * se
            );
        }
    }

    #[test]
    fn source_only_threshold_model_matches_closed_form() {
        // With no relays, slot_limit = 2 and the per-slot threshold model,
        // the mean rate converges to (f/2) tau1 + (f/4)(1 - tau1) e^{-phi/g_sd}.
        let mut config = base_config(Strategy::SourceOnly, vec![0.0, 0.0]);
        config.topology = TopologySpec::Explicit(
            Topology::new(Position::new(0.0, 0.0), Position::new(100.0, 0.0), vec![]).unwrap(),
        );
        config.contention.contention_prob = Vec::new();
        config.plan = TransmissionPlan::SingleMode(
            TransmissionMode::new(1, "16-QAM r=1/2", 0.5, 4, 13.0).unwrap(),
        );
        config.decode_model = DecodeModel::Threshold;
        config.outer_rate = 1912.0 / 2050.0;
        config.trials = 1_000_000;
        let result = run_point(&config, 0).unwrap();
        let g_sd = config.channel.mean_snr_linear(100.0).unwrap();
        let tau1 = (-(10f64.powf(1.3)) / g_sd).exp();
        let tau2 = (-(10f64.powf(-0.6)) / g_sd).exp();
        let f = config.outer_rate;
        let expect = f / 2.0 * tau1 + f / 4.0 * (1.0 - tau1) * tau2;
        let tol = 3.0 * result.estimate.stderr;
        assert!(
            (result.estimate.mean - expect).abs() <= tol,
            "sim {} vs closed form {expect} (3se = {tol:.2e})",
            result.estimate.mean
        );
    }

    #[test]
    fn relay_overhear_does_not_hurt_rcpc_throughput() {
        let schedule = RcpcSchedule {
            rates: vec![0.8, 2.0 / 3.0, 4.0 / 7.0, 0.5, 1.0 / 3.0],
            decode_thresholds_db: vec![6.0, 4.0, 2.5, 1.0, -1.5],
            mother_memory: 6,
            puncture_period: 8,
            info_bits: 1912,
            mother_codeword_bits: 5736,
        };
        let mut config = base_config(Strategy::Id, vec![0.3, 0.3]);
        config.channel.tx_power_above_noise_db = 102.05;
        config.plan = TransmissionPlan::Rcpc(schedule);
        config.slot_limit = 5;
        config.trials = 100_000;
        let baseline = run_point(&config, 0).unwrap();
        config.relay_overhear = true;
        let overhear = run_point(&config, 0).unwrap();
        let slack =
            2.0 * (baseline.estimate.stderr.powi(2) + overhear.estimate.stderr.powi(2)).sqrt();
        assert!(
            overhear.estimate.mean >= baseline.estimate.mean - slack,
            "overhear {} vs baseline {}",
            overhear.estimate.mean,
            baseline.estimate.mean
        );
    }

    #[test]
    fn format_sig_cases() {
        assert_eq!(format_sig(0.0, 6), "0");
        assert_eq!(format_sig(0.428821, 6), "0.428821");
        assert_eq!(format_sig(1234.5, 6), "1234.50");
        assert_eq!(format_sig(3.94e-13, 6), "3.94000e-13");
        assert_eq!(format_sig(-0.25, 6), "-0.250000");
    }

    #[test]
    fn validation_rejects_bad_experiments() {
        let mut c = base_config(Strategy::Id, vec![0.4, 0.6]);
        c.trials = 0;
        assert!(c.validate().is_err());
        let mut c = base_config(Strategy::Id, vec![0.4]);
        c.trials = 10;
        assert!(run_point(&c, 0).is_err(), "probability/relay count mismatch");
        let mut c = base_config(Strategy::Id, vec![0.4, 0.6]);
        c.plan = TransmissionPlan::Rcpc(RcpcSchedule {
            rates: vec![0.8, 1.0 / 3.0],
            decode_thresholds_db: vec![5.0, -1.0],
            mother_memory: 6,
            puncture_period: 8,
            info_bits: 1912,
            mother_codeword_bits: 5736,
        });
        c.slot_limit = 5;
        assert!(c.validate().is_err(), "slot limit exceeds RCPC stages");
    }
}
