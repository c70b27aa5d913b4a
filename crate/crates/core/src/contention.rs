//! Minislot contention and relay selection strategies.
//!
//! Under the ID strategies, eligible relays (decoded the message and have a
//! destination channel gain above η_opp) transmit their ID in each of K
//! minislots with per-relay probability p_i. A minislot with exactly one
//! transmitter has a winner; two or more collide and the slot is discarded.
//! ID-CSI-1 appends a flag bit (gain above β_opp) that biases selection
//! toward the flagged winners with probability q.

use rand::Rng;
use thiserror::Error;

use crate::netmodel::Topology;

#[derive(Debug, Error, PartialEq)]
pub enum ContentionError {
    #[error("invalid contention configuration: {0}")]
    InvalidConfig(String),
}

/// Relay selection strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Opportunistic-feedback contention; ACKs carry only the relay ID.
    Id,
    /// ID contention with a one-bit channel quality flag.
    IdCsi1,
    /// Centralized baseline: decoding relay with the best instantaneous
    /// gain to the destination.
    BestGain,
    /// Centralized baseline: decoding relay closest to the destination.
    NearestDecoder,
    /// No relaying; the source always retransmits.
    SourceOnly,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Id => "id",
            Strategy::IdCsi1 => "id_csi_1",
            Strategy::BestGain => "best_gain",
            Strategy::NearestDecoder => "nearest_decoder",
            Strategy::SourceOnly => "source_only",
        }
    }

    pub fn parse(s: &str) -> Option<Strategy> {
        match s {
            "id" => Some(Strategy::Id),
            "id_csi_1" => Some(Strategy::IdCsi1),
            "best_gain" => Some(Strategy::BestGain),
            "nearest_decoder" => Some(Strategy::NearestDecoder),
            "source_only" => Some(Strategy::SourceOnly),
            _ => None,
        }
    }

    pub fn uses_contention(&self) -> bool {
        matches!(self, Strategy::Id | Strategy::IdCsi1)
    }
}

/// How the source picks among winning relays.
///
/// `SlotWeighted` picks a winning minislot uniformly, so a relay that won
/// several minislots is proportionally more likely; this matches the
/// closed-form selection probabilities. `RelayUniform` picks uniformly among
/// distinct winning relays. The two coincide for K = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WinnerWeighting {
    #[default]
    SlotWeighted,
    RelayUniform,
}

/// Contention parameters.
#[derive(Debug, Clone)]
pub struct ContentionConfig {
    /// Number of feedback minislots K.
    pub minislots: usize,
    /// Per-relay contention probability p_i.
    pub contention_prob: Vec<f64>,
    /// Eligibility gain threshold η_opp on the |h|² scale (0 disables it).
    pub eta_opp_linear: f64,
    pub strategy: Strategy,
    /// Flag-bit gain threshold β_opp on the |h|² scale (ID-CSI-1 only).
    pub beta_opp_linear: Option<f64>,
    /// Probability q of picking among flag-1 winners (ID-CSI-1 only).
    pub winner_bias: Option<f64>,
    pub weighting: WinnerWeighting,
}

impl ContentionConfig {
    pub fn validate(&self) -> Result<(), ContentionError> {
        if self.strategy.uses_contention() && self.minislots == 0 {
            return Err(ContentionError::InvalidConfig(
                "minislots must be >= 1 for the ID strategies".into(),
            ));
        }
        for (i, p) in self.contention_prob.iter().enumerate() {
            if !(0.0..=1.0).contains(p) {
                return Err(ContentionError::InvalidConfig(format!(
                    "contention probability p[{i}] = {p} outside [0, 1]"
                )));
            }
        }
        if self.strategy == Strategy::IdCsi1 {
            let q = self.winner_bias.ok_or_else(|| {
                ContentionError::InvalidConfig("ID-CSI-1 requires winner bias q".into())
            })?;
            if !(q > 0.5 && q <= 1.0) {
                return Err(ContentionError::InvalidConfig(format!(
                    "winner bias q = {q} outside (0.5, 1]"
                )));
            }
            let beta = self.beta_opp_linear.ok_or_else(|| {
                ContentionError::InvalidConfig("ID-CSI-1 requires beta_opp".into())
            })?;
            if beta <= self.eta_opp_linear {
                return Err(ContentionError::InvalidConfig(
                    "beta_opp must exceed eta_opp".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Per-relay state entering a contention round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayState {
    pub relay_id: usize,
    pub decoded: bool,
    /// Instantaneous |h_{i,d}|² for the upcoming slot.
    pub gain_to_destination: f64,
}

/// Outcome of one minislot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinislotResult {
    Empty,
    Winner { relay: usize, flag: bool },
    Collision,
}

/// Outcomes of all K minislots of a contention period.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentionOutcome(pub Vec<MinislotResult>);

/// Who transmits in the next slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionResult {
    Source,
    Relay(usize),
}

/// Relays that may contend: decoded the message and have a destination gain
/// strictly above η_opp.
pub fn eligible_set(states: &[RelayState], eta_opp_linear: f64) -> Vec<usize> {
    states
        .iter()
        .filter(|s| s.decoded && s.gain_to_destination > eta_opp_linear)
        .map(|s| s.relay_id)
        .collect()
}

/// Run the K-minislot contention among the eligible relays.
///
/// Flag bits are attached only under ID-CSI-1 and are true when the winner's
/// gain is strictly above β_opp.
pub fn run_contention<R: Rng + ?Sized>(
    rng: &mut R,
    states: &[RelayState],
    eligible: &[usize],
    config: &ContentionConfig,
) -> ContentionOutcome {
    debug_assert!(config.strategy.uses_contention());
    let mut slots = Vec::with_capacity(config.minislots);
    for _ in 0..config.minislots {
        let mut winner = None;
        let mut count = 0usize;
        for &id in eligible {
            let p = config.contention_prob.get(id).copied().unwrap_or(0.0);
            if rng.random::<f64>() < p {
                count += 1;
                winner = Some(id);
            }
        }
        slots.push(match count {
            0 => MinislotResult::Empty,
            1 => {
                let relay = winner.expect("count == 1 implies a winner");
                let flag = match (config.strategy, config.beta_opp_linear) {
                    (Strategy::IdCsi1, Some(beta)) => {
                        let gain = states
                            .iter()
                            .find(|s| s.relay_id == relay)
                            .map(|s| s.gain_to_destination)
                            .unwrap_or(0.0);
                        gain > beta
                    }
                    _ => false,
                };
                MinislotResult::Winner { relay, flag }
            }
            _ => MinislotResult::Collision,
        });
    }
    ContentionOutcome(slots)
}

fn pick_winner<R: Rng + ?Sized>(
    rng: &mut R,
    winners: &[(usize, bool)],
    weighting: WinnerWeighting,
) -> usize {
    match weighting {
        WinnerWeighting::SlotWeighted => winners[rng.random_range(0..winners.len())].0,
        WinnerWeighting::RelayUniform => {
            let mut distinct: Vec<usize> = winners.iter().map(|w| w.0).collect();
            distinct.sort_unstable();
            distinct.dedup();
            distinct[rng.random_range(0..distinct.len())]
        }
    }
}

/// Resolve a contention outcome into the next transmitter.
///
/// ID: with no winning minislots the source transmits; otherwise a winning
/// minislot is chosen per the configured weighting. ID-CSI-1: if both flag
/// partitions are non-empty, the flag-1 partition is used with probability
/// q, otherwise the strategy reduces to ID.
pub fn select_transmitter<R: Rng + ?Sized>(
    rng: &mut R,
    outcome: &ContentionOutcome,
    config: &ContentionConfig,
) -> SelectionResult {
    let winners: Vec<(usize, bool)> = outcome
        .0
        .iter()
        .filter_map(|s| match s {
            MinislotResult::Winner { relay, flag } => Some((*relay, *flag)),
            _ => None,
        })
        .collect();
    if winners.is_empty() {
        return SelectionResult::Source;
    }
    match config.strategy {
        Strategy::IdCsi1 => {
            let flag1: Vec<(usize, bool)> = winners.iter().copied().filter(|w| w.1).collect();
            let flag0: Vec<(usize, bool)> = winners.iter().copied().filter(|w| !w.1).collect();
            let pool = if flag1.is_empty() || flag0.is_empty() {
                &winners
            } else if rng.random::<f64>() < config.winner_bias.unwrap_or(0.75) {
                &flag1
            } else {
                &flag0
            };
            SelectionResult::Relay(pick_winner(rng, pool, config.weighting))
        }
        _ => SelectionResult::Relay(pick_winner(rng, &winners, config.weighting)),
    }
}

/// Baseline selectors that bypass contention.
///
/// `BestGain` picks the decoding relay with the largest instantaneous gain
/// to the destination, `NearestDecoder` the decoding relay closest to the
/// destination; ties break toward the lowest relay id. Both fall back to the
/// source when no relay has decoded.
pub fn select_baseline(
    states: &[RelayState],
    topology: &Topology,
    strategy: Strategy,
) -> SelectionResult {
    match strategy {
        Strategy::SourceOnly => SelectionResult::Source,
        Strategy::BestGain => states
            .iter()
            .filter(|s| s.decoded)
            .max_by(|a, b| {
                a.gain_to_destination
                    .partial_cmp(&b.gain_to_destination)
                    .expect("gains are finite")
                    .then(b.relay_id.cmp(&a.relay_id))
            })
            .map(|s| SelectionResult::Relay(s.relay_id))
            .unwrap_or(SelectionResult::Source),
        Strategy::NearestDecoder => states
            .iter()
            .filter(|s| s.decoded)
            .min_by(|a, b| {
                let da = topology.relays[a.relay_id].distance(&topology.destination);
                let db = topology.relays[b.relay_id].distance(&topology.destination);
                da.partial_cmp(&db)
                    .expect("distances are finite")
                    .then(a.relay_id.cmp(&b.relay_id))
            })
            .map(|s| SelectionResult::Relay(s.relay_id))
            .unwrap_or(SelectionResult::Source),
        Strategy::Id | Strategy::IdCsi1 => {
            unreachable!("contention strategies are resolved by select_transmitter")
        }
    }
}
