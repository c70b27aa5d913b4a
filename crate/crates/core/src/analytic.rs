//! Closed-form selection probabilities and throughput approximations for
//! the two-slot truncated protocol, an exact enumeration oracle, grid
//! optimizers, and the signaling-overhead calculator.
//!
//! All thresholds and `|G|²` values here live on the absolute received
//! power scale: a threshold quoted as x dB SNR enters as `10^(x/10) · N₀`,
//! so every probability is an exponential in `threshold / |G|²`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("instance too large for exact enumeration: {0}")]
    EnumerationTooLarge(String),
    #[error("grid search limited to K_r <= 4 relays, got {0}")]
    TooManyRelays(usize),
    #[error("switching-point grid is empty or extends below alpha")]
    BadSwitchpointGrid,
}

/// Which transmission mode preceded a contention round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmcSlotMode {
    Mode1,
    Mode2,
}

/// Everything the closed forms need, on the absolute power scale.
#[derive(Debug, Clone)]
pub struct AnalyticScenario {
    /// Average received power on the source-destination link.
    pub g_sd: f64,
    /// Average received power source → relay a.
    pub g_sa: Vec<f64>,
    /// Average received power relay a → destination.
    pub g_ad: Vec<f64>,
    /// Mode-1 decode threshold α (absolute power).
    pub alpha: f64,
    /// Mode-2 decode threshold β (absolute power).
    pub beta: f64,
    /// Chase discard threshold φ (absolute power).
    pub phi: f64,
    /// Single-mode decode threshold γ (absolute power).
    pub gamma: f64,
    /// AMC switching point γ_swp (absolute power).
    pub gamma_swp: f64,
    /// Effective rate of the outer code.
    pub f: f64,
    /// Number of contention minislots K.
    pub minislots: usize,
    /// Per-relay contention probabilities.
    pub contention_prob: Vec<f64>,
}

/// Probability that each relay (or no relay) is selected by the source.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionProbs {
    pub q_by_relay: Vec<f64>,
    pub q_none: f64,
}

/// The four per-slot decode probabilities of the two-slot AMC analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeProbs {
    pub p11: f64,
    pub p21: f64,
    pub p12: f64,
    pub p22: f64,
}

fn ex(x: f64) -> f64 {
    (-x).exp()
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

impl AnalyticScenario {
    pub fn relay_count(&self) -> usize {
        self.g_sa.len()
    }

    pub fn validate(&self) -> Result<(), AnalyticError> {
        let err = |m: String| Err(AnalyticError::InvalidScenario(m));
        if self.g_sa.len() != self.g_ad.len() || self.g_sa.len() != self.contention_prob.len() {
            return err("g_sa, g_ad and contention_prob must have equal length".into());
        }
        for (name, v) in [("g_sd", self.g_sd)]
            .into_iter()
            .chain(self.g_sa.iter().map(|&g| ("g_sa", g)))
            .chain(self.g_ad.iter().map(|&g| ("g_ad", g)))
        {
            if v <= 0.0 || v.is_nan() {
                return err(format!("{name} must be > 0"));
            }
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("phi", self.phi),
            ("gamma", self.gamma),
            ("gamma_swp", self.gamma_swp),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return err(format!("{name} must be finite and >= 0"));
            }
        }
        if !(self.f > 0.0 && self.f <= 1.0) {
            return err(format!("f = {} outside (0, 1]", self.f));
        }
        for (i, p) in self.contention_prob.iter().enumerate() {
            if !(0.0..=1.0).contains(p) {
                return err(format!("contention probability p[{i}] = {p} outside [0, 1]"));
            }
        }
        if self.alpha > self.gamma_swp {
            return err(format!(
                "alpha = {} exceeds gamma_swp = {}; p11 would be negative",
                self.alpha, self.gamma_swp
            ));
        }
        if self.phi > self.alpha {
            return err(format!(
                "phi = {} exceeds alpha = {}; outside the admissible range",
                self.phi, self.alpha
            ));
        }
        if self.beta <= self.alpha {
            return err(format!(
                "beta = {} must exceed alpha = {}",
                self.beta, self.alpha
            ));
        }
        Ok(())
    }

    /// ρ_{a,i}: probability that relay `a` decodes a transmission sent with
    /// the given mode.
    pub fn rho(&self, relay: usize, mode: AmcSlotMode) -> f64 {
        let thr = match mode {
            AmcSlotMode::Mode1 => self.alpha,
            AmcSlotMode::Mode2 => self.beta,
        };
        ex(thr / self.g_sa[relay])
    }

    /// ρ_a for the single-mode strategy.
    pub fn rho_single(&self, relay: usize) -> f64 {
        ex(self.gamma / self.g_sa[relay])
    }

    fn rho_vec(&self, mode: AmcSlotMode) -> Vec<f64> {
        (0..self.relay_count()).map(|a| self.rho(a, mode)).collect()
    }

    fn rho_vec_single(&self) -> Vec<f64> {
        (0..self.relay_count()).map(|a| self.rho_single(a)).collect()
    }

    fn win_prob_from_rho(&self, relay: usize, rho: &[f64]) -> f64 {
        let mut u = self.contention_prob[relay] * rho[relay];
        for (c, (&p, &r)) in self.contention_prob.iter().zip(rho).enumerate() {
            if c != relay {
                u *= 1.0 - p * r;
            }
        }
        u
    }

    /// u_{a,i}: probability that relay `a` wins a given minislot after a
    /// slot that used the given mode.
    pub fn win_prob(&self, relay: usize, mode: AmcSlotMode) -> f64 {
        self.win_prob_from_rho(relay, &self.rho_vec(mode))
    }

    fn selection_from_rho(&self, rho: &[f64]) -> SelectionProbs {
        let kr = self.relay_count();
        let k = self.minislots;
        let u: Vec<f64> = (0..kr).map(|a| self.win_prob_from_rho(a, rho)).collect();
        let total: f64 = u.iter().sum();
        let mut q = vec![0.0; kr];
        for a in 0..kr {
            let others = (total - u[a]).max(0.0);
            let mut qa = 0.0;
            for j in 1..=k {
                let mut inner = 0.0;
                for m in 0..=(k - j) {
                    inner += j as f64 / (k - m) as f64
                        * binom(k - j, m)
                        * (1.0 - total).powi(m as i32)
                        * others.powi((k - j - m) as i32);
                }
                qa += binom(k, j) * u[a].powi(j as i32) * inner;
            }
            q[a] = qa;
        }
        let q_none = 1.0 - q.iter().sum::<f64>();
        SelectionProbs {
            q_by_relay: q,
            q_none,
        }
    }

    /// q_{a,i}: probability that relay `a` wins at least one of the K
    /// minislots and is selected, under slot-weighted winner selection.
    pub fn selection_probs(&self, mode: AmcSlotMode) -> SelectionProbs {
        self.selection_from_rho(&self.rho_vec(mode))
    }

    /// q_a for the single-mode strategy.
    pub fn selection_probs_single(&self) -> SelectionProbs {
        self.selection_from_rho(&self.rho_vec_single())
    }

    /// Exact selection probabilities by brute-force enumeration.
    ///
    /// Per minislot, every relay is in one of three states (not decoded,
    /// decoded but silent, decoded and transmitting), enumerated
    /// exhaustively to produce the slot winner distribution; winner vectors
    /// across the K slots are then enumerated with slot-weighted selection.
    /// Decode outcomes are independent per slot, matching the independence
    /// structure of the closed forms this oracle validates. Bounded to
    /// K_r <= 10 and K <= 6.
    pub fn enumerate_selection_probs(&self, rho: &[f64]) -> Result<SelectionProbs, AnalyticError> {
        let kr = self.relay_count();
        let k = self.minislots;
        if kr > 10 || k > 6 {
            return Err(AnalyticError::EnumerationTooLarge(format!(
                "K_r = {kr}, K = {k} (limits: 10, 6)"
            )));
        }
        // Slot winner distribution over 3^kr per-relay states.
        let mut w = vec![0.0; kr];
        let mut w_none = 0.0;
        let states = 3u64.pow(kr as u32);
        for pattern in 0..states {
            let mut p_pat = 1.0;
            let mut tx = Vec::new();
            let mut code = pattern;
            for (a, (&r, &p)) in rho.iter().zip(&self.contention_prob).enumerate() {
                let state = code % 3;
                code /= 3;
                p_pat *= match state {
                    0 => 1.0 - r,
                    1 => r * (1.0 - p),
                    _ => {
                        tx.push(a);
                        r * p
                    }
                };
            }
            if tx.len() == 1 {
                w[tx[0]] += p_pat;
            } else {
                w_none += p_pat;
            }
        }
        // Winner vectors across the K slots, selection weight j / (winner
        // slot count).
        let mut q = vec![0.0; kr];
        let mut q_none = 0.0;
        let outcomes = kr + 1;
        let mut vector = vec![0usize; k];
        loop {
            let mut p_vec = 1.0;
            let mut wins = vec![0usize; kr];
            let mut total_wins = 0usize;
            for &o in &vector {
                if o == kr {
                    p_vec *= w_none;
                } else {
                    p_vec *= w[o];
                    wins[o] += 1;
                    total_wins += 1;
                }
            }
            if p_vec > 0.0 {
                if total_wins == 0 {
                    q_none += p_vec;
                } else {
                    for (a, &count) in wins.iter().enumerate() {
                        if count > 0 {
                            q[a] += p_vec * count as f64 / total_wins as f64;
                        }
                    }
                }
            }
            let mut pos = 0;
            loop {
                if pos == k {
                    break;
                }
                vector[pos] += 1;
                if vector[pos] < outcomes {
                    break;
                }
                vector[pos] = 0;
                pos += 1;
            }
            if pos == k {
                break;
            }
        }
        Ok(SelectionProbs {
            q_by_relay: q,
            q_none,
        })
    }

    /// The mixture of slot-2 transmitter links after a slot-1 transmission
    /// with the given mode: (selection probability, mean received power at
    /// the destination), the last entry being the source fallback.
    fn slot2_links(&self, mode: AmcSlotMode) -> Vec<(f64, f64)> {
        let sel = self.selection_probs(mode);
        let mut links: Vec<(f64, f64)> = sel
            .q_by_relay
            .iter()
            .zip(&self.g_ad)
            .map(|(&q, &g)| (q, g))
            .collect();
        links.push((sel.q_none, self.g_sd));
        links
    }

    /// The four decode probabilities of the two-slot AMC analysis, as
    /// closed-form exponential integrals.
    pub fn decode_probs(&self) -> Result<DecodeProbs, AnalyticError> {
        self.validate()?;
        let p11 = ex(self.alpha / self.g_sd) - ex(self.gamma_swp / self.g_sd);
        let p21 = ex(self.beta / self.g_sd);
        let links1 = self.slot2_links(AmcSlotMode::Mode1);
        let links2 = self.slot2_links(AmcSlotMode::Mode2);
        let p12 = links1
            .iter()
            .map(|&(q, g)| q * (ex(self.phi / g) - ex(self.gamma_swp / g)))
            .sum();
        let p22 = links2
            .iter()
            .map(|&(q, g)| q * ex(self.gamma_swp / g))
            .sum();
        Ok(DecodeProbs { p11, p21, p12, p22 })
    }

    /// τ₁: probability the destination decodes the first single-mode slot.
    pub fn tau1(&self) -> f64 {
        ex(self.gamma / self.g_sd)
    }

    /// τ₂: probability the second single-mode slot is decodable, mixed over
    /// the selected transmitter.
    pub fn tau2(&self) -> f64 {
        let sel = self.selection_probs_single();
        sel.q_by_relay
            .iter()
            .zip(&self.g_ad)
            .map(|(&q, &g)| q * ex(self.phi / g))
            .sum::<f64>()
            + sel.q_none * ex(self.phi / self.g_sd)
    }

    /// Single-mode throughput approximation
    /// `R_app,sm = (f/2)τ₁ + (f/4)(1−τ₁)τ₂`.
    pub fn r_app_sm(&self) -> f64 {
        let tau1 = self.tau1();
        self.f / 2.0 * tau1 + self.f / 4.0 * (1.0 - tau1) * self.tau2()
    }

    /// Two-slot AMC throughput: the six-path decomposition with rate
    /// coefficients {f/3, 2f/3, f/3, f/6, 2f/9, 2f/9}, each path weighted
    /// by its probability under the Chase combining rules (a lone mode
    /// decodes against its own threshold, a mix against the mother code).
    pub fn r_app_amc(&self) -> Result<f64, AnalyticError> {
        self.validate()?;
        let (a, b, g, phi, f, mu0) = (
            self.alpha,
            self.beta,
            self.gamma_swp,
            self.phi,
            self.f,
            self.g_sd,
        );
        // Slot-1 outcomes. Mode 1 is used when X < gamma_swp and decodes
        // when X >= alpha; mode 2 when X >= gamma_swp, decoding at beta.
        let s1 = ex(a / mu0) - ex(g / mu0);
        let s2 = ex(b.max(g) / mu0);
        let mut r = f / 3.0 * s1 + 2.0 * f / 3.0 * s2;

        let links1 = self.slot2_links(AmcSlotMode::Mode1);
        let links2 = self.slot2_links(AmcSlotMode::Mode2);

        // Slot 1 sent with mode 1 and discarded (X < phi): slot 2 decodes
        // alone against its own mode's threshold.
        let f1a = 1.0 - ex(phi / mu0);
        for &(q, mu_t) in &links1 {
            let m1_alone = (ex(a / mu_t) - ex(g / mu_t)).max(0.0);
            let m2_alone = ex(b.max(g) / mu_t);
            r += f1a * q * (f / 6.0 * m1_alone + 2.0 * f / 9.0 * m2_alone);
        }

        // Slot 1 sent with mode 1, kept but failed (phi <= X < alpha).
        let p_f1b = ex(phi / mu0) - ex(a / mu0);
        for &(q, mu_t) in &links1 {
            // Slot-2 mode 2 (Y >= gamma_swp >= alpha): the mixed
            // combination always clears the mother threshold.
            r += 2.0 * f / 9.0 * q * ex(g / mu_t) * p_f1b;
            // Slot-2 mode 1 (Y in [phi, gamma_swp)): needs X + Y >= alpha.
            r += f / 6.0 * q * self.mode1_retry_after_mode1(mu_t);
        }

        // Slot 1 sent with mode 2 and failed (gamma_swp <= X < beta, always
        // kept since gamma_swp >= alpha >= phi). Empty when beta <= gamma_swp.
        if b > g {
            let p_f2 = ex(g / mu0) - ex(b / mu0);
            for &(q, mu_t) in &links2 {
                // Slot-2 mode 1 kept: mixed combination, X alone >= alpha.
                r += 2.0 * f / 9.0 * q * (ex(phi / mu_t) - ex(g / mu_t)) * p_f2;
                // Slot-2 mode 2: still mode-2-only, needs X + Y >= beta.
                r += f / 3.0 * q * self.mode2_retry_after_mode2(mu_t);
            }
        }
        Ok(r)
    }

    /// P(phi <= X < alpha, Y in [max(phi, alpha - X), gamma_swp)) with
    /// X ~ Exp(g_sd), Y ~ Exp(mu_t): a mode-1 retransmission completing a
    /// kept-but-failed mode-1 first slot.
    fn mode1_retry_after_mode1(&self, mu_t: f64) -> f64 {
        let (a, g, phi, mu0) = (self.alpha, self.gamma_swp, self.phi, self.g_sd);
        if a <= phi {
            return 0.0;
        }
        let tail_g = ex(g / mu_t);
        if a <= 2.0 * phi {
            // alpha - X never exceeds phi on [phi, alpha).
            return (ex(phi / mu_t) - tail_g) * (ex(phi / mu0) - ex(a / mu0));
        }
        let split = a - phi;
        let seg1 = exp_conv(mu0, mu_t, a, phi, split) - tail_g * (ex(phi / mu0) - ex(split / mu0));
        let seg2 = (ex(phi / mu_t) - tail_g) * (ex(split / mu0) - ex(a / mu0));
        seg1 + seg2
    }

    /// P(gamma_swp <= X < beta, Y >= max(gamma_swp, beta - X)): a mode-2
    /// retransmission lifting a mode-2-only combination over beta.
    fn mode2_retry_after_mode2(&self, mu_t: f64) -> f64 {
        let (b, g, mu0) = (self.beta, self.gamma_swp, self.g_sd);
        if b <= g {
            return 0.0;
        }
        if b <= 2.0 * g {
            return ex(g / mu_t) * (ex(g / mu0) - ex(b / mu0));
        }
        let split = b - g;
        exp_conv(mu0, mu_t, b, g, split) + ex(g / mu_t) * (ex(split / mu0) - ex(b / mu0))
    }
}

/// `∫_lo^hi (1/mu0) e^(−x/mu0) e^(−(c−x)/mu_t) dx`.
fn exp_conv(mu0: f64, mu_t: f64, c: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let delta = 1.0 / mu0 - 1.0 / mu_t;
    let scale = ex(c / mu_t) / mu0;
    if delta.abs() * (hi - lo) < 1e-12 {
        return scale * (hi - lo) * ex(lo * delta);
    }
    scale * ex(lo * delta) * (-((lo - hi) * delta).exp_m1()) / delta
}

/// Objective for the contention-probability grid search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    SingleMode,
    Amc,
}

/// Exhaustive grid search of the throughput approximation over the
/// contention probability box `[0, 1]^K_r`.
///
/// Ties break toward the lexicographically smallest probability vector.
/// Bounded to K_r <= 4; larger networks go through the simulator.
pub fn optimize_contention(
    scenario: &AnalyticScenario,
    objective: Objective,
    grid_step: f64,
) -> Result<(Vec<f64>, f64), AnalyticError> {
    let kr = scenario.relay_count();
    if kr > 4 {
        return Err(AnalyticError::TooManyRelays(kr));
    }
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(AnalyticError::InvalidScenario(format!(
            "grid step {grid_step} outside (0, 1]"
        )));
    }
    let steps = (1.0 / grid_step).round() as usize;
    let eval = |s: &AnalyticScenario| -> Result<f64, AnalyticError> {
        match objective {
            Objective::SingleMode => Ok(s.r_app_sm()),
            Objective::Amc => s.r_app_amc(),
        }
    };
    let mut work = scenario.clone();
    if kr == 0 {
        return Ok((Vec::new(), eval(&work)?));
    }
    let mut idx = vec![0usize; kr];
    let mut best_p = vec![0.0; kr];
    let mut best = f64::NEG_INFINITY;
    loop {
        for (i, &v) in idx.iter().enumerate() {
            work.contention_prob[i] = v as f64 / steps as f64;
        }
        let value = eval(&work)?;
        if value > best {
            best = value;
            best_p.copy_from_slice(&work.contention_prob);
        }
        // odometer over the grid, most-significant index first so the
        // first maximum seen is the lexicographically smallest
        let mut pos = kr;
        loop {
            if pos == 0 {
                return Ok((best_p, best));
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] <= steps {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Grid argmax of `r_app_amc` over switching-point candidates (absolute
/// power scale, all at or above alpha). Ties break toward the smaller
/// switching point.
pub fn optimize_switchpoint(
    scenario: &AnalyticScenario,
    grid: &[f64],
) -> Result<(f64, f64), AnalyticError> {
    if grid.is_empty() || grid.iter().any(|&g| g < scenario.alpha * (1.0 - 1e-12)) {
        return Err(AnalyticError::BadSwitchpointGrid);
    }
    let mut work = scenario.clone();
    let mut best = f64::NEG_INFINITY;
    let mut best_swp = grid[0];
    for &swp in grid {
        work.gamma_swp = swp.max(scenario.alpha);
        let value = work.r_app_amc()?;
        if value > best {
            best = value;
            best_swp = swp;
        }
    }
    Ok((best_swp, best))
}

/// Inputs to the per-slot signaling overhead arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct OverheadInputs {
    pub d_sd_m: f64,
    pub training_us: f64,
    pub ofdm_symbol_us: f64,
    pub data_symbol_us: f64,
    pub data_guard_us: f64,
    pub minislots: u32,
    /// The LENGTH field of the data frame.
    pub frame_length_bits: u32,
    pub bits_per_data_symbol: u32,
}

/// Interval durations and overhead ratios for one time slot.
#[derive(Debug, Clone, PartialEq)]
pub struct OverheadReport {
    pub propagation_delay_us: f64,
    pub ack_interval_us: f64,
    pub minislot_us: f64,
    pub contention_period_us: f64,
    pub announce_interval_us: f64,
    pub data_symbols: u64,
    pub data_time_us: f64,
    pub guard_total_us: f64,
    /// Overhead within the data interval relative to its data time.
    pub data_interval_overhead_ratio: f64,
    /// Overhead of all four intervals relative to the data time.
    pub total_overhead_ratio: f64,
}

/// Signaling-overhead arithmetic for one time slot, exact in integer tenths
/// of a microsecond until the final ratio division.
pub fn overhead_report(inputs: &OverheadInputs) -> OverheadReport {
    // tenths of a microsecond
    let t = |us: f64| -> u64 { (us * 10.0).round() as u64 };
    let delay = t(inputs.d_sd_m / crate::netmodel::SPEED_OF_LIGHT * 1e6);
    let training = t(inputs.training_us);
    let symbol = t(inputs.ofdm_symbol_us);
    let ack = training + symbol + delay;
    let minislot = ack;
    let contention = inputs.minislots as u64 * minislot;
    let announce = ack;
    let payload_bits = 16 + 8 * inputs.frame_length_bits as u64 + 6;
    let data_symbols = payload_bits.div_ceil(inputs.bits_per_data_symbol as u64);
    let data_time = data_symbols * t(inputs.data_symbol_us);
    let guard_total = data_symbols * t(inputs.data_guard_us);
    let data_overhead = guard_total + training + delay;
    let total_overhead = data_overhead + ack + contention + announce;
    OverheadReport {
        propagation_delay_us: delay as f64 / 10.0,
        ack_interval_us: ack as f64 / 10.0,
        minislot_us: minislot as f64 / 10.0,
        contention_period_us: contention as f64 / 10.0,
        announce_interval_us: announce as f64 / 10.0,
        data_symbols,
        data_time_us: data_time as f64 / 10.0,
        guard_total_us: guard_total as f64 / 10.0,
        data_interval_overhead_ratio: data_overhead as f64 / data_time as f64,
        total_overhead_ratio: total_overhead as f64 / data_time as f64,
    }
}
