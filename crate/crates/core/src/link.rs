//! Transmission modes, SNR-threshold decoding, Chase combining, and the
//! RCPC incremental-redundancy schedule.
//!
//! Decoding is abstracted as a deterministic SNR-threshold test: a packet
//! (or combination of packets) decodes exactly when its combined SNR meets
//! the governing threshold. Maximal-ratio combining of repeated
//! transmissions is modeled as SNR addition, and packets whose slot SNR
//! falls below the discard threshold φ are dropped before combining.

use std::collections::BTreeSet;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinkError {
    #[error("invalid link configuration: {0}")]
    InvalidConfig(String),
    #[error("slot limit of {0} already reached")]
    SlotLimitReached(u32),
    #[error("no packet records")]
    EmptyRecordSet,
}

/// A modulation / code-rate pair with its decode threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionMode {
    pub mode_id: usize,
    pub label: String,
    pub code_rate: f64,
    pub bits_per_symbol: u32,
    /// Minimum combined SNR (dB) for successful decoding of this mode.
    pub decode_threshold_db: f64,
}

impl TransmissionMode {
    pub fn new(
        mode_id: usize,
        label: &str,
        code_rate: f64,
        bits_per_symbol: u32,
        decode_threshold_db: f64,
    ) -> Result<Self, LinkError> {
        if !(code_rate > 0.0 && code_rate < 1.0) {
            return Err(LinkError::InvalidConfig(format!(
                "code rate {code_rate} outside (0, 1)"
            )));
        }
        if bits_per_symbol == 0 {
            return Err(LinkError::InvalidConfig("bits_per_symbol must be >= 1".into()));
        }
        if !decode_threshold_db.is_finite() {
            return Err(LinkError::InvalidConfig("decode threshold must be finite".into()));
        }
        Ok(Self {
            mode_id,
            label: label.to_string(),
            code_rate,
            bits_per_symbol,
            decode_threshold_db,
        })
    }

    pub fn decode_threshold_linear(&self) -> f64 {
        10f64.powf(self.decode_threshold_db / 10.0)
    }

    /// Coded bits transmitted for `info_bits` information bits.
    pub fn coded_bits(&self, info_bits: f64) -> f64 {
        info_bits / self.code_rate
    }
}

/// An ordered set of transmission modes with the switching thresholds
/// between them.
///
/// A policy with a single mode is the single-mode strategy; a two-mode
/// policy has one switching point γ_swp.
#[derive(Debug, Clone, PartialEq)]
pub struct AmcPolicy {
    pub modes: Vec<TransmissionMode>,
    /// Switching thresholds in dB SNR, strictly increasing, one fewer than
    /// the number of modes.
    pub switch_thresholds_db: Vec<f64>,
}

impl AmcPolicy {
    pub fn new(
        modes: Vec<TransmissionMode>,
        switch_thresholds_db: Vec<f64>,
    ) -> Result<Self, LinkError> {
        if modes.is_empty() {
            return Err(LinkError::InvalidConfig("policy needs at least one mode".into()));
        }
        if switch_thresholds_db.len() + 1 != modes.len() {
            return Err(LinkError::InvalidConfig(format!(
                "{} modes need {} switching thresholds, got {}",
                modes.len(),
                modes.len() - 1,
                switch_thresholds_db.len()
            )));
        }
        if switch_thresholds_db.windows(2).any(|w| w[0] >= w[1]) {
            return Err(LinkError::InvalidConfig(
                "switching thresholds must be strictly increasing".into(),
            ));
        }
        if modes
            .windows(2)
            .any(|w| w[0].decode_threshold_db > w[1].decode_threshold_db)
        {
            return Err(LinkError::InvalidConfig(
                "decode thresholds must be nondecreasing with mode index".into(),
            ));
        }
        Ok(Self {
            modes,
            switch_thresholds_db,
        })
    }

    pub fn single(mode: TransmissionMode) -> Self {
        Self {
            modes: vec![mode],
            switch_thresholds_db: Vec::new(),
        }
    }

    /// The mode used for a measured link SNR: the highest mode whose lower
    /// switching threshold is at or below the measurement (the boundary
    /// belongs to the upper mode).
    pub fn mode_for_gain(&self, snr_linear: f64) -> &TransmissionMode {
        let mut idx = 0;
        for (i, thr) in self.switch_thresholds_db.iter().enumerate() {
            if snr_linear >= 10f64.powf(thr / 10.0) {
                idx = i + 1;
            }
        }
        &self.modes[idx]
    }

    /// Governing decode threshold (linear) for a set of employed modes:
    /// a single mode decodes against its own threshold, a mix decodes
    /// against the mother code (the first mode's threshold).
    pub fn governing_threshold_linear(&self, modes_used: &BTreeSet<usize>) -> f64 {
        if modes_used.len() == 1 {
            let id = *modes_used.iter().next().expect("non-empty");
            self.modes
                .iter()
                .find(|m| m.mode_id == id)
                .map(|m| m.decode_threshold_linear())
                .unwrap_or_else(|| self.modes[0].decode_threshold_linear())
        } else {
            self.modes[0].decode_threshold_linear()
        }
    }
}

/// Accumulated combined SNR at a receiver across retransmissions.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaseAccumulator {
    pub combined_snr: f64,
    /// Discard threshold φ in linear SNR; packets below it are dropped.
    pub discard_threshold: f64,
    pub slots_used: u32,
    pub modes_used: BTreeSet<usize>,
    pub slot_limit: u32,
}

impl ChaseAccumulator {
    pub fn new(discard_threshold: f64, slot_limit: u32) -> Self {
        Self {
            combined_snr: 0.0,
            discard_threshold,
            slots_used: 0,
            modes_used: BTreeSet::new(),
            slot_limit,
        }
    }

    /// Fold in one received slot. A slot below the discard threshold is
    /// dropped (the slot still counts toward the limit); otherwise its SNR
    /// adds to the combination and its mode is recorded.
    pub fn observe(&mut self, slot_snr: f64, mode_id: usize) -> Result<(), LinkError> {
        if self.slots_used >= self.slot_limit {
            return Err(LinkError::SlotLimitReached(self.slot_limit));
        }
        self.slots_used += 1;
        if slot_snr >= self.discard_threshold {
            self.combined_snr += slot_snr;
            self.modes_used.insert(mode_id);
        }
        Ok(())
    }
}

/// Whether the combined packet decodes under the policy's governing
/// threshold. With nothing retained the combination cannot decode.
pub fn decode_success_amc(acc: &ChaseAccumulator, policy: &AmcPolicy) -> bool {
    if acc.modes_used.is_empty() {
        return false;
    }
    acc.combined_snr >= policy.governing_threshold_linear(&acc.modes_used)
}

/// A rate-compatible punctured convolutional code schedule.
///
/// `rates` are strictly decreasing; stage j transmits the incremental bits
/// that extend the accumulated codeword from rate `rates[j-1]` to
/// `rates[j]`. Decode thresholds are per-rate configuration inputs,
/// strictly increasing with code rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RcpcSchedule {
    pub rates: Vec<f64>,
    pub decode_thresholds_db: Vec<f64>,
    pub mother_memory: u32,
    pub puncture_period: u32,
    pub info_bits: u32,
    pub mother_codeword_bits: u32,
}

impl RcpcSchedule {
    pub fn validate(&self) -> Result<(), LinkError> {
        if self.rates.is_empty() || self.rates.len() != self.decode_thresholds_db.len() {
            return Err(LinkError::InvalidConfig(
                "rates and decode_thresholds_db must be non-empty and equal length".into(),
            ));
        }
        if self.rates.windows(2).any(|w| w[0] <= w[1]) {
            return Err(LinkError::InvalidConfig("rates must be strictly decreasing".into()));
        }
        // Increasing with code rate means decreasing along the schedule.
        if self
            .decode_thresholds_db
            .windows(2)
            .any(|w| w[0] <= w[1])
        {
            return Err(LinkError::InvalidConfig(
                "decode thresholds must be strictly increasing with code rate".into(),
            ));
        }
        let mother = *self.rates.last().expect("non-empty");
        let kn = self.info_bits as f64 / self.mother_codeword_bits as f64;
        if (mother - kn).abs() > 1e-9 {
            return Err(LinkError::InvalidConfig(format!(
                "mother rate {mother} inconsistent with k/n = {kn}"
            )));
        }
        Ok(())
    }

    pub fn stages(&self) -> usize {
        self.rates.len()
    }

    /// Total coded bits on the air after `stage` transmissions (1-based).
    pub fn cumulative_bits(&self, stage: usize) -> f64 {
        self.info_bits as f64 / self.rates[stage - 1]
    }

    /// Coded bits sent in the `stage`-th transmission (1-based).
    pub fn incremental_bits(&self, stage: usize) -> f64 {
        if stage == 1 {
            self.cumulative_bits(1)
        } else {
            self.cumulative_bits(stage) - self.cumulative_bits(stage - 1)
        }
    }

    pub fn threshold_linear(&self, stage: usize) -> f64 {
        10f64.powf(self.decode_thresholds_db[stage - 1] / 10.0)
    }
}

/// Decode test after `stage` RCPC transmissions.
///
/// The combined observation decodes when the bits-weighted mean SNR over
/// the non-discarded slots meets the rate-R_stage threshold. With every
/// slot discarded there is nothing to decode.
pub fn rcpc_decode_success(
    per_slot: &[(f64, f64)],
    schedule: &RcpcSchedule,
    stage: usize,
    discard_threshold: f64,
) -> bool {
    debug_assert!(stage >= 1 && stage <= schedule.stages());
    debug_assert_eq!(per_slot.len(), stage);
    let mut weighted = 0.0;
    let mut bits = 0.0;
    for &(snr, slot_bits) in per_slot {
        if snr >= discard_threshold {
            weighted += snr * slot_bits;
            bits += slot_bits;
        }
    }
    if bits == 0.0 {
        return false;
    }
    weighted / bits >= schedule.threshold_linear(stage)
}

/// Realized throughput of one AMC/single-mode packet episode: delivered
/// information over transmitted coded bits, zero on failure.
pub fn realized_rate_amc(
    history: &[(usize, f64)],
    success: bool,
    outer_rate: f64,
    info_bits: f64,
) -> f64 {
    if !success {
        return 0.0;
    }
    let total: f64 = history.iter().map(|(_, bits)| bits).sum();
    outer_rate * info_bits / total
}

/// One packet's outcome under the RCPC schedule: whether it was delivered
/// and the coded bits sent at each stage it went through.
#[derive(Debug, Clone, PartialEq)]
pub struct RcpcPacketRecord {
    pub delivered: bool,
    pub stage_bits: Vec<f64>,
}

/// Effective code rate `R_avg = (k/(n+M)) · (P/(P+l_AV))` over a set of
/// packet episodes.
///
/// `l_AV` is the average, per P information bits, of coded bits transmitted
/// beyond the first-stage transmission. Lost packets contribute their full
/// extra transmitted bits to `l_AV` and no information: the numerator k is
/// scaled by the delivered fraction.
pub fn rcpc_effective_rate(
    records: &[RcpcPacketRecord],
    schedule: &RcpcSchedule,
) -> Result<f64, LinkError> {
    if records.is_empty() {
        return Err(LinkError::EmptyRecordSet);
    }
    let k = schedule.info_bits as f64;
    let n = schedule.mother_codeword_bits as f64;
    let m = schedule.mother_memory as f64;
    let p = schedule.puncture_period as f64;
    let mut extra = 0.0;
    let mut delivered = 0usize;
    for r in records {
        extra += r.stage_bits.iter().skip(1).sum::<f64>() * p / k;
        if r.delivered {
            delivered += 1;
        }
    }
    let l_av = extra / records.len() as f64;
    let delivered_frac = delivered as f64 / records.len() as f64;
    Ok((k * delivered_frac / (n + m)) * (p / (p + l_av)))
}
