//! Empirical selection frequencies from the contention machinery against
//! the exact enumeration oracle.
//!
//! The oracle (like the closed forms it validates) draws relay decode
//! states independently per minislot; the protocol holds them fixed across
//! a contention round. The two coincide for a single minislot or for
//! certain decoding, which is what these tests exercise.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use relaysim_core::analytic::AnalyticScenario;
use relaysim_core::contention::{
    eligible_set, run_contention, select_transmitter, ContentionConfig, RelayState,
    SelectionResult, Strategy, WinnerWeighting,
};

fn scenario(p: Vec<f64>, minislots: usize) -> AnalyticScenario {
    let kr = p.len();
    AnalyticScenario {
        g_sd: 1e-12,
        g_sa: vec![1e-12; kr],
        g_ad: vec![1e-12; kr],
        alpha: 1e-13,
        beta: 2e-13,
        phi: 1e-13,
        gamma: 1e-13,
        gamma_swp: 1e-13,
        f: 0.9,
        minislots,
        contention_prob: p,
    }
}

fn empirical_frequencies(
    rho: &[f64],
    config: &ContentionConfig,
    trials: u64,
    seed: u64,
) -> (Vec<f64>, f64) {
    let kr = rho.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; kr];
    let mut none = 0u64;
    for _ in 0..trials {
        let states: Vec<RelayState> = (0..kr)
            .map(|relay_id| RelayState {
                relay_id,
                decoded: rng.random::<f64>() < rho[relay_id],
                gain_to_destination: 1.0,
            })
            .collect();
        let eligible = eligible_set(&states, 0.0);
        let outcome = run_contention(&mut rng, &states, &eligible, config);
        match select_transmitter(&mut rng, &outcome, config) {
            SelectionResult::Source => none += 1,
            SelectionResult::Relay(r) => counts[r] += 1,
        }
    }
    (
        counts.iter().map(|&c| c as f64 / trials as f64).collect(),
        none as f64 / trials as f64,
    )
}

fn assert_within_three_se(label: &str, empirical: f64, exact: f64, trials: u64) {
    let se = (exact * (1.0 - exact) / trials as f64).sqrt();
    assert!(
        (empirical - exact).abs() <= 3.0 * se + 1e-12,
        "{label}: empirical {empirical} vs exact {exact} (3se = {:.2e})",
        3.0 * se
    );
}

#[test]
fn single_minislot_frequencies_match_oracle() {
    // One minislot: per-round and per-slot decode draws coincide.
    let trials = 1_000_000;
    for (seed, p, rho) in [
        (1u64, vec![0.5, 0.5], vec![0.8, 0.6]),
        (2, vec![0.3, 0.9, 0.4], vec![0.5, 0.95, 0.7]),
        (3, vec![1.0], vec![0.33]),
    ] {
        let s = scenario(p.clone(), 1);
        let config = ContentionConfig {
            minislots: 1,
            contention_prob: p,
            eta_opp_linear: 0.0,
            strategy: Strategy::Id,
            beta_opp_linear: None,
            winner_bias: None,
            weighting: WinnerWeighting::SlotWeighted,
        };
        let exact = s.enumerate_selection_probs(&rho).unwrap();
        let (freq, none) = empirical_frequencies(&rho, &config, trials, seed);
        for (a, (f, e)) in freq.iter().zip(&exact.q_by_relay).enumerate() {
            assert_within_three_se(&format!("relay {a}"), *f, *e, trials);
        }
        assert_within_three_se("none", none, exact.q_none, trials);
    }
}

#[test]
fn multi_minislot_frequencies_match_oracle_with_certain_decoding() {
    // With rho = 1 the shared-per-round and per-slot decode models agree
    // for any number of minislots.
    let trials = 1_000_000;
    for (seed, p, k) in [
        (11u64, vec![0.4, 0.7], 2usize),
        (12, vec![0.25, 0.5, 0.75], 3),
    ] {
        let kr = p.len();
        let rho = vec![1.0; kr];
        let s = scenario(p.clone(), k);
        let config = ContentionConfig {
            minislots: k,
            contention_prob: p,
            eta_opp_linear: 0.0,
            strategy: Strategy::Id,
            beta_opp_linear: None,
            winner_bias: None,
            weighting: WinnerWeighting::SlotWeighted,
        };
        let exact = s.enumerate_selection_probs(&rho).unwrap();
        let (freq, none) = empirical_frequencies(&rho, &config, trials, seed);
        for (a, (f, e)) in freq.iter().zip(&exact.q_by_relay).enumerate() {
            assert_within_three_se(&format!("relay {a} (K={k})"), *f, *e, trials);
        }
        assert_within_three_se("none", none, exact.q_none, trials);
    }
}
