//! Subcommand implementations. All data output goes to the given writer;
//! diagnostics go through [`CliError`].

use std::io::Write;
use std::time::Instant;

use relaysim_core::analytic::{
    optimize_contention, optimize_switchpoint, overhead_report, AmcSlotMode, AnalyticError,
    Objective, SelectionProbs,
};
use relaysim_core::sim::{format_sig, run_sweep, write_csv};

use crate::config::{LoadedConfig, PlanKind};
use crate::CliError;

fn fmt(x: f64) -> String {
    format_sig(x, 6)
}

fn fmt_probs(sel: &SelectionProbs) -> String {
    let mut parts: Vec<String> = sel
        .q_by_relay
        .iter()
        .enumerate()
        .map(|(i, q)| format!("relay{i}:{}", fmt(*q)))
        .collect();
    parts.push(format!("none:{}", fmt(sel.q_none)));
    parts.join(" ")
}

/// Print the closed-form throughput approximation and its component
/// probabilities.
pub fn cmd_approx(cfg: &LoadedConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let scenario = cfg
        .scenario
        .as_ref()
        .ok_or_else(|| CliError::Config("approx needs an amc or single plan".into()))?;
    let w = |e: std::io::Error| CliError::Runtime(e.to_string());
    match cfg.plan_kind {
        PlanKind::Amc => {
            let probs = scenario
                .decode_probs()
                .map_err(|e| CliError::Config(e.to_string()))?;
            let r = scenario
                .r_app_amc()
                .map_err(|e| CliError::Config(e.to_string()))?;
            writeln!(out, "plan = amc").map_err(w)?;
            writeln!(out, "p11 = {}", fmt(probs.p11)).map_err(w)?;
            writeln!(out, "p21 = {}", fmt(probs.p21)).map_err(w)?;
            writeln!(out, "p12 = {}", fmt(probs.p12)).map_err(w)?;
            writeln!(out, "p22 = {}", fmt(probs.p22)).map_err(w)?;
            writeln!(
                out,
                "q_after_mode1 = {}",
                fmt_probs(&scenario.selection_probs(AmcSlotMode::Mode1))
            )
            .map_err(w)?;
            writeln!(
                out,
                "q_after_mode2 = {}",
                fmt_probs(&scenario.selection_probs(AmcSlotMode::Mode2))
            )
            .map_err(w)?;
            writeln!(out, "r_app_amc = {}", fmt(r)).map_err(w)?;
        }
        PlanKind::Single => {
            writeln!(out, "plan = single").map_err(w)?;
            writeln!(out, "tau1 = {}", fmt(scenario.tau1())).map_err(w)?;
            writeln!(out, "tau2 = {}", fmt(scenario.tau2())).map_err(w)?;
            writeln!(out, "q = {}", fmt_probs(&scenario.selection_probs_single())).map_err(w)?;
            writeln!(out, "r_app_sm = {}", fmt(scenario.r_app_sm())).map_err(w)?;
        }
        PlanKind::Rcpc => {
            return Err(CliError::Config(
                "approx needs an amc or single plan; the RCPC strategy is simulation-only".into(),
            ))
        }
    }
    Ok(())
}

/// Run the Monte Carlo experiment and emit CSV.
pub fn cmd_simulate(
    cfg: &LoadedConfig,
    seed: Option<u64>,
    trials: Option<u64>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut experiment = cfg.experiment.clone();
    if let Some(seed) = seed {
        experiment.seed = seed;
    }
    if let Some(trials) = trials {
        experiment.trials = trials;
    }
    let results = run_sweep(&experiment).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_csv(&mut *out, &results, experiment.seed)
        .map_err(|e| CliError::Runtime(e.to_string()))
}

/// Grid-optimize the contention probabilities or the AMC switching point.
pub fn cmd_optimize(
    cfg: &LoadedConfig,
    target: &str,
    grid_step: Option<f64>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let scenario = cfg
        .scenario
        .as_ref()
        .ok_or_else(|| CliError::Config("optimize needs an amc or single plan".into()))?;
    let w = |e: std::io::Error| CliError::Runtime(e.to_string());
    let config_err = |e: AnalyticError| CliError::Config(e.to_string());
    let started = Instant::now();
    match target {
        "contention" => {
            let objective = match cfg.plan_kind {
                PlanKind::Amc => Objective::Amc,
                PlanKind::Single => Objective::SingleMode,
                PlanKind::Rcpc => unreachable!("scenario exists"),
            };
            let step = grid_step.unwrap_or(0.01); // documented default
            let (p, max) = optimize_contention(scenario, objective, step).map_err(config_err)?;
            writeln!(out, "target = contention").map_err(w)?;
            writeln!(
                out,
                "objective = {}",
                if objective == Objective::Amc { "amc" } else { "single" }
            )
            .map_err(w)?;
            writeln!(
                out,
                "argmax_p = {}",
                p.iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(", ")
            )
            .map_err(w)?;
            writeln!(out, "max = {}", fmt(max)).map_err(w)?;
        }
        "switchpoint" => {
            if cfg.plan_kind != PlanKind::Amc {
                return Err(CliError::Config(
                    "optimize --target switchpoint needs an amc plan".into(),
                ));
            }
            let step_db = grid_step.unwrap_or(0.25); // documented default
            let noise_db = cfg.experiment.channel.noise_power_db;
            let alpha_db = 10.0 * scenario.alpha.log10() - noise_db;
            let (lo_db, hi_db) = cfg.swp_grid_db.unwrap_or((alpha_db, alpha_db + 10.0));
            if lo_db < alpha_db - 1e-9 {
                return Err(CliError::Config(format!(
                    "link.swp_grid_lo_db = {lo_db} lies below the mode-1 threshold {alpha_db}"
                )));
            }
            let mut grid = Vec::new();
            let mut db = lo_db;
            while db <= hi_db + 1e-9 {
                grid.push(10f64.powf((db + noise_db) / 10.0));
                db += step_db;
            }
            let (swp, max) = optimize_switchpoint(scenario, &grid).map_err(config_err)?;
            let swp_db = 10.0 * swp.log10() - noise_db;
            writeln!(out, "target = switchpoint").map_err(w)?;
            writeln!(out, "argmax_gamma_swp_db = {}", fmt(swp_db)).map_err(w)?;
            writeln!(out, "max = {}", fmt(max)).map_err(w)?;
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown optimize target `{other}` (expected contention or switchpoint)"
            )))
        }
    }
    writeln!(out, "elapsed_ms = {}", started.elapsed().as_millis()).map_err(w)?;
    Ok(())
}

/// Print the per-slot signaling overhead report.
pub fn cmd_overhead(cfg: &LoadedConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let inputs = cfg
        .overhead
        .as_ref()
        .ok_or_else(|| CliError::Config("overhead needs an [overhead] section".into()))?;
    let r = overhead_report(inputs);
    let w = |e: std::io::Error| CliError::Runtime(e.to_string());
    writeln!(out, "propagation_delay_us = {}", r.propagation_delay_us).map_err(w)?;
    writeln!(out, "ack_interval_us = {}", r.ack_interval_us).map_err(w)?;
    writeln!(out, "minislot_us = {}", r.minislot_us).map_err(w)?;
    writeln!(out, "contention_period_us = {}", r.contention_period_us).map_err(w)?;
    writeln!(out, "announce_interval_us = {}", r.announce_interval_us).map_err(w)?;
    writeln!(out, "data_symbols = {}", r.data_symbols).map_err(w)?;
    writeln!(out, "data_time_us = {}", r.data_time_us).map_err(w)?;
    writeln!(out, "guard_total_us = {}", r.guard_total_us).map_err(w)?;
    writeln!(
        out,
        "data_interval_overhead_pct = {}",
        fmt(r.data_interval_overhead_ratio * 100.0)
    )
    .map_err(w)?;
    writeln!(
        out,
        "total_overhead_pct = {}",
        fmt(r.total_overhead_ratio * 100.0)
    )
    .map_err(w)?;
    Ok(())
}

/// Print exact enumeration selection probabilities next to the closed form.
pub fn cmd_oracle(cfg: &LoadedConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let scenario = cfg
        .scenario
        .as_ref()
        .ok_or_else(|| CliError::Config("oracle needs an amc or single plan".into()))?;
    let w = |e: std::io::Error| CliError::Runtime(e.to_string());
    let config_err = |e: AnalyticError| CliError::Config(e.to_string());
    let kr = scenario.relay_count();
    match cfg.plan_kind {
        PlanKind::Amc => {
            let rho1: Vec<f64> = (0..kr).map(|a| scenario.rho(a, AmcSlotMode::Mode1)).collect();
            let rho2: Vec<f64> = (0..kr).map(|a| scenario.rho(a, AmcSlotMode::Mode2)).collect();
            let e1 = scenario.enumerate_selection_probs(&rho1).map_err(config_err)?;
            let e2 = scenario.enumerate_selection_probs(&rho2).map_err(config_err)?;
            let c1 = scenario.selection_probs(AmcSlotMode::Mode1);
            let c2 = scenario.selection_probs(AmcSlotMode::Mode2);
            writeln!(out, "relay,q_enum_mode1,q_closed_mode1,q_enum_mode2,q_closed_mode2")
                .map_err(w)?;
            for a in 0..kr {
                writeln!(
                    out,
                    "{a},{},{},{},{}",
                    fmt(e1.q_by_relay[a]),
                    fmt(c1.q_by_relay[a]),
                    fmt(e2.q_by_relay[a]),
                    fmt(c2.q_by_relay[a]),
                )
                .map_err(w)?;
            }
            writeln!(
                out,
                "none,{},{},{},{}",
                fmt(e1.q_none),
                fmt(c1.q_none),
                fmt(e2.q_none),
                fmt(c2.q_none)
            )
            .map_err(w)?;
        }
        PlanKind::Single => {
            let rho: Vec<f64> = (0..kr).map(|a| scenario.rho_single(a)).collect();
            let e = scenario.enumerate_selection_probs(&rho).map_err(config_err)?;
            let c = scenario.selection_probs_single();
            writeln!(out, "relay,q_enum,q_closed").map_err(w)?;
            for a in 0..kr {
                writeln!(out, "{a},{},{}", fmt(e.q_by_relay[a]), fmt(c.q_by_relay[a]))
                    .map_err(w)?;
            }
            writeln!(out, "none,{},{}", fmt(e.q_none), fmt(c.q_none)).map_err(w)?;
        }
        PlanKind::Rcpc => {
            return Err(CliError::Config("oracle needs an amc or single plan".into()))
        }
    }
    Ok(())
}
