//! Node geometry, path loss, and Rayleigh block-fading channel sampling.
//!
//! Channel gains follow the convention that `|h|²` includes path loss, so the
//! mean of a fading sample equals the path-loss factor
//! `(λ_c / 4π d₀)² (d/d₀)^−μ` and the average received power on a link is
//! `|G|² = ℰ_x · E(|h|²)`. All randomness is derived from an explicit seed;
//! nothing reads ambient entropy.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, PartialEq)]
pub enum NetModelError {
    #[error("distance {d} m is inside the reference distance {d0} m; the path-loss model is invalid there")]
    InsideReferenceDistance { d: f64, d0: f64 },
    #[error("invalid channel parameter: {0}")]
    InvalidParam(&'static str),
    #[error("relay {index} at ({x}, {y}) is not closer to the destination than the source is")]
    RelayNotCloser { index: usize, x: f64, y: f64 },
    #[error("non-finite coordinate")]
    NonFiniteCoordinate,
}

/// A point in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Euclidean distance to another position in meters.
    pub fn distance(&self, other: &Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Identifies a node in the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeId {
    Source,
    Destination,
    Relay(u16),
}

impl NodeId {
    fn code(self) -> u16 {
        match self {
            NodeId::Source => 0,
            NodeId::Destination => 1,
            NodeId::Relay(i) => 2 + i,
        }
    }
}

/// A directed link between two nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LinkId {
    pub from: NodeId,
    pub to: NodeId,
}

impl LinkId {
    pub fn new(from: NodeId, to: NodeId) -> Self {
        Self { from, to }
    }

    fn code(self) -> u32 {
        ((self.from.code() as u32) << 16) | self.to.code() as u32
    }
}

/// Source, destination, and relay geometry.
///
/// Invariant: every relay is strictly closer to the destination than the
/// source is (`d_{i,d} < d_{s,d}`).
#[derive(Debug, Clone)]
pub struct Topology {
    pub source: Position,
    pub destination: Position,
    pub relays: Vec<Position>,
}

impl Topology {
    pub fn new(
        source: Position,
        destination: Position,
        relays: Vec<Position>,
    ) -> Result<Self, NetModelError> {
        for p in [source, destination].iter().chain(relays.iter()) {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(NetModelError::NonFiniteCoordinate);
            }
        }
        let d_sd = source.distance(&destination);
        for (i, r) in relays.iter().enumerate() {
            if r.distance(&destination) >= d_sd {
                return Err(NetModelError::RelayNotCloser {
                    index: i,
                    x: r.x,
                    y: r.y,
                });
            }
        }
        Ok(Self {
            source,
            destination,
            relays,
        })
    }

    pub fn relay_count(&self) -> usize {
        self.relays.len()
    }

    pub fn source_destination_distance(&self) -> f64 {
        self.source.distance(&self.destination)
    }
}

/// Path-loss and power parameters shared by every link.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    /// Carrier frequency f_c in Hz.
    pub carrier_frequency_hz: f64,
    /// Reference distance d₀ in meters.
    pub reference_distance_m: f64,
    /// Path loss exponent μ.
    pub path_loss_exponent: f64,
    /// Noise power N₀ in dB.
    pub noise_power_db: f64,
    /// Transmit power margin over the noise floor in dB.
    pub tx_power_above_noise_db: f64,
    /// Signaling bandwidth in Hz.
    pub bandwidth_hz: f64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), NetModelError> {
        let checks = [
            (self.carrier_frequency_hz, "carrier_frequency_hz must be > 0"),
            (self.reference_distance_m, "reference_distance_m must be > 0"),
            (self.path_loss_exponent, "path_loss_exponent must be > 0"),
            (self.bandwidth_hz, "bandwidth_hz must be > 0"),
        ];
        for (v, msg) in checks {
            // NaN fails too
            if v <= 0.0 || v.is_nan() {
                return Err(NetModelError::InvalidParam(msg));
            }
        }
        Ok(())
    }

    /// Carrier wavelength λ_c in meters.
    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency_hz
    }

    /// Noise power in linear units.
    pub fn noise_linear(&self) -> f64 {
        10f64.powf(self.noise_power_db / 10.0)
    }

    /// Transmit energy ℰ_x in linear units.
    pub fn tx_energy_linear(&self) -> f64 {
        10f64.powf((self.noise_power_db + self.tx_power_above_noise_db) / 10.0)
    }

    /// Mean channel power E(|h|²) at distance `d`: the path-loss factor
    /// `(λ_c / 4π d₀)² (d/d₀)^−μ`.
    ///
    /// Distances inside the reference distance are rejected rather than
    /// clamped; the model is not defined there.
    pub fn average_gain(&self, d: f64) -> Result<f64, NetModelError> {
        let d0 = self.reference_distance_m;
        if d < d0 {
            return Err(NetModelError::InsideReferenceDistance { d, d0 });
        }
        let near_field = self.wavelength_m() / (4.0 * std::f64::consts::PI * d0);
        Ok(near_field * near_field * (d / d0).powf(-self.path_loss_exponent))
    }

    /// Average received power `|G|² = ℰ_x · E(|h|²)` at distance `d`.
    pub fn average_received_power(&self, d: f64) -> Result<f64, NetModelError> {
        Ok(self.tx_energy_linear() * self.average_gain(d)?)
    }

    /// Mean received SNR (linear) at distance `d`.
    pub fn mean_snr_linear(&self, d: f64) -> Result<f64, NetModelError> {
        Ok(self.average_received_power(d)? / self.noise_linear())
    }
}

/// Received SNR for a given instantaneous channel power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snr {
    pub linear: f64,
    pub db: f64,
}

/// SNR produced by channel power `gain` (|h|², path loss included) under the
/// signal model `SNR = ℰ_x · |h|² / N₀`.
pub fn received_snr(gain: f64, params: &ChannelParams) -> Snr {
    let linear = params.tx_energy_linear() * gain / params.noise_linear();
    Snr {
        linear,
        db: 10.0 * linear.log10(),
    }
}

/// One block-fading draw for a link in a slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingSample {
    /// Channel power |h|², path loss included.
    pub gain: f64,
    pub slot_index: u32,
    pub link: LinkId,
}

/// Draw a channel power from the Rayleigh-amplitude (exponential-power)
/// distribution with the given mean.
pub fn sample_block_fading<R: Rng + ?Sized>(rng: &mut R, mean_gain: f64) -> f64 {
    debug_assert!(mean_gain > 0.0);
    // u in [0, 1); ln_1p keeps precision near u = 0.
    let u: f64 = rng.random();
    -mean_gain * (-u).ln_1p()
}

/// Deterministic block-fading field: the gain for a (link, slot) pair is a
/// pure function of the seed, so samples can be drawn in any order and are
/// independent across links and slots.
#[derive(Debug, Clone, Copy)]
pub struct BlockFading {
    seed: u64,
}

impl BlockFading {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// The fading gain for `link` during `slot`, exponential with mean
    /// `mean_gain`.
    pub fn gain(&self, link: LinkId, slot: u32, mean_gain: f64) -> FadingSample {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((link.code() as u64) << 32) | slot as u64);
        FadingSample {
            gain: sample_block_fading(&mut rng, mean_gain),
            slot_index: slot,
            link,
        }
    }
}

/// Place `k_r` relays uniformly in the strip `[0, d_sd] × [−d_sd/4, d_sd/4]`
/// between the source at the origin and the destination at `(d_sd, 0)`,
/// rejection-sampled so every relay is strictly closer to the destination
/// than `d_sd`.
pub fn place_relays_uniform<R: Rng + ?Sized>(rng: &mut R, k_r: usize, d_sd: f64) -> Topology {
    let source = Position::new(0.0, 0.0);
    let destination = Position::new(d_sd, 0.0);
    let mut relays = Vec::with_capacity(k_r);
    while relays.len() < k_r {
        let x = rng.random::<f64>() * d_sd;
        let y = (rng.random::<f64>() - 0.5) * d_sd / 2.0;
        let p = Position::new(x, y);
        if p.distance(&destination) < d_sd {
            relays.push(p);
        }
    }
    Topology {
        source,
        destination,
        relays,
    }
}

/// splitmix64; used to derive independent stream seeds from an experiment
/// seed and trial coordinates.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut z = 0x9e3779b97f4a7c15u64;
    for &p in parts {
        z ^= p.wrapping_add(0x9e3779b97f4a7c15).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^= z >> 31;
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_params() -> ChannelParams {
        ChannelParams {
            carrier_frequency_hz: 2.4e9,
            reference_distance_m: 1.0,
            path_loss_exponent: 3.0,
            noise_power_db: -134.0,
            tx_power_above_noise_db: 110.0,
            bandwidth_hz: 9e6,
        }
    }

    #[test]
    fn distance_matches_hand_arithmetic() {
        let o = Position::new(0.0, 0.0);
        assert!((o.distance(&Position::new(25.0, 10.0)) - 26.926).abs() < 1e-3);
        assert!(
            (Position::new(25.0, 10.0).distance(&Position::new(100.0, 0.0)) - 75.664).abs() < 1e-3
        );
        assert_eq!(o.distance(&o), 0.0);
    }

    #[test]
    fn average_received_power_reproduces_reference_values() {
        let p = example_params();
        let g_sd = p.average_received_power(100.0).unwrap();
        assert!((g_sd - 3.94e-13).abs() / 3.94e-13 < 5e-3, "g_sd = {g_sd:e}");
        let g_near = p.average_received_power(26.9).unwrap();
        assert!(
            (g_near - 2.02e-11).abs() / 2.02e-11 < 5e-3,
            "g_near = {g_near:e}"
        );
    }

    #[test]
    fn average_gain_at_reference_distance_is_near_field_factor() {
        let p = example_params();
        let expected = (p.wavelength_m() / (4.0 * std::f64::consts::PI)).powi(2);
        assert!((p.average_gain(1.0).unwrap() - expected).abs() < 1e-20);
    }

    #[test]
    fn average_gain_rejects_distances_inside_reference() {
        let p = example_params();
        assert_eq!(
            p.average_gain(0.5),
            Err(NetModelError::InsideReferenceDistance { d: 0.5, d0: 1.0 })
        );
    }

    #[test]
    fn received_snr_definition() {
        let p = example_params();
        assert_eq!(received_snr(0.0, &p).linear, 0.0);
        // gain = N0/Ex gives 0 dB by definition.
        let gain = p.noise_linear() / p.tx_energy_linear();
        let snr = received_snr(gain, &p);
        assert!((snr.linear - 1.0).abs() < 1e-12);
        assert!(snr.db.abs() < 1e-9);
        // With Ex = 1 (tx 134 dB above the -134 dB floor).
        let mut p1 = p.clone();
        p1.tx_power_above_noise_db = 134.0;
        let snr = received_snr(3.94e-13, &p1);
        assert!((snr.linear - 9.90).abs() < 0.01, "snr = {}", snr.linear);
    }

    #[test]
    fn topology_rejects_relay_farther_than_source() {
        let err = Topology::new(
            Position::new(0.0, 0.0),
            Position::new(100.0, 0.0),
            vec![Position::new(-10.0, 0.0)],
        );
        assert!(matches!(err, Err(NetModelError::RelayNotCloser { index: 0, .. })));
    }

    #[test]
    fn fading_is_deterministic_per_link_and_slot() {
        let field = BlockFading::new(7);
        let link = LinkId::new(NodeId::Source, NodeId::Destination);
        let a = field.gain(link, 3, 1.0);
        let b = field.gain(link, 3, 1.0);
        assert_eq!(a, b);
        let other_slot = field.gain(link, 4, 1.0);
        assert_ne!(a.gain, other_slot.gain);
        let other_link = field.gain(LinkId::new(NodeId::Source, NodeId::Relay(0)), 3, 1.0);
        assert_ne!(a.gain, other_link.gain);
    }

    #[test]
    fn fading_mean_and_tail_match_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut above_one = 0u32;
        for _ in 0..n {
            let g = sample_block_fading(&mut rng, 1.0);
            sum += g;
            if g > 1.0 {
                above_one += 1;
            }
        }
        let mean = sum / n as f64;
        assert!((0.997..=1.003).contains(&mean), "mean = {mean}");
        let tail = above_one as f64 / n as f64;
        assert!(
            (tail - (-1f64).exp()).abs() < 0.002,
            "P(gain > 1) = {tail}"
        );
    }

    #[test]
    fn fading_cdf_matches_exponential_at_reference_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 1_000_000;
        let mut counts = [0u32; 3];
        let xs = [0.5, 1.0, 2.0];
        for _ in 0..n {
            let g = sample_block_fading(&mut rng, 1.0);
            for (c, x) in counts.iter_mut().zip(xs) {
                if g <= x {
                    *c += 1;
                }
            }
        }
        for (c, x) in counts.iter().zip(xs) {
            let empirical = *c as f64 / n as f64;
            let exact = 1.0 - (-x).exp();
            assert!(
                (empirical - exact).abs() < 0.003,
                "CDF({x}) = {empirical} vs {exact}"
            );
        }
    }

    #[test]
    fn fading_samples_are_uncorrelated_across_slots_and_links() {
        let field = BlockFading::new(23);
        let link_a = LinkId::new(NodeId::Source, NodeId::Destination);
        let link_b = LinkId::new(NodeId::Source, NodeId::Relay(1));
        let n = 1_000_000u32;
        // (same link, consecutive slots) and (distinct links, same slot)
        for pair in [0, 1] {
            let mut sx = 0.0;
            let mut sy = 0.0;
            let mut sxx = 0.0;
            let mut syy = 0.0;
            let mut sxy = 0.0;
            for i in 0..n {
                let (x, y) = match pair {
                    0 => (
                        field.gain(link_a, 2 * i, 1.0).gain,
                        field.gain(link_a, 2 * i + 1, 1.0).gain,
                    ),
                    _ => (
                        field.gain(link_a, i, 1.0).gain,
                        field.gain(link_b, i, 1.0).gain,
                    ),
                };
                sx += x;
                sy += y;
                sxx += x * x;
                syy += y * y;
                sxy += x * y;
            }
            let nf = n as f64;
            let cov = sxy / nf - (sx / nf) * (sy / nf);
            let vx = sxx / nf - (sx / nf).powi(2);
            let vy = syy / nf - (sy / nf).powi(2);
            let corr = cov / (vx * vy).sqrt();
            assert!(corr.abs() < 0.005, "pair {pair}: corr = {corr}");
        }
    }

    #[test]
    fn uniform_placement_respects_invariant_and_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let topo = place_relays_uniform(&mut rng, 20, 100.0);
        assert_eq!(topo.relay_count(), 20);
        for r in &topo.relays {
            assert!(r.distance(&topo.destination) < 100.0);
            assert!((0.0..=100.0).contains(&r.x));
            assert!((-25.0..=25.0).contains(&r.y));
        }
        let mut rng2 = ChaCha8Rng::seed_from_u64(5);
        let topo2 = place_relays_uniform(&mut rng2, 20, 100.0);
        assert_eq!(topo.relays, topo2.relays);

        let mut rng3 = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(place_relays_uniform(&mut rng3, 0, 100.0).relay_count(), 0);
    }

    #[test]
    fn average_gain_is_strictly_decreasing_in_distance() {
        let p = example_params();
        let mut last = f64::INFINITY;
        for i in 1..200 {
            let g = p.average_gain(i as f64).unwrap();
            assert!(g < last);
            last = g;
        }
    }
}
