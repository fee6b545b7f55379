//! Executes a parsed run configuration and writes its output.
//!
//! Every JSON result is wrapped in an envelope with three top-level
//! keys: `config` echoes the run parameters, `result` holds the
//! deterministic payload (byte-identical across runs with the same
//! arguments and seed), and `meta` holds timing and version data that
//! may differ between runs. CSV outputs are bare tables.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use serde_json::{json, Value};

use involution_core::automaton::{
    closure, exhaustive_spanning_counts, monte_carlo_spanning, nucleation_probability,
    sample_nucleation, sample_trial_grid, threshold_sweep, wilson_interval, Z_99,
};
use involution_core::gap::{lambda_k, sandwich_log_bounds, survival_log, survival_log_finite};
use involution_core::partitions::{count_macmahon, count_pk};
use involution_core::quadrature::{
    integral_log_series, integral_main, integral_split, integral_tilde, integral_tilde_split,
    main_closed_form, series_integral_closed_form, split_closed_forms, tilde_closed_form,
    tilde_split_closed_forms,
};
use involution_core::{CoreError, ExponentPair, IntegralResult, ModelParams, Variant};

use crate::config::{
    AutomatonArgs, Command, GapArgs, IntegralArgs, OutputFormat, PartitionsArgs, RunConfig,
    VariantArg, OUTPUT_DIR_VAR,
};
use crate::verify;

enum Payload {
    Json(Value),
    Csv(String),
}

struct RunOutput {
    result: Payload,
    /// Extra entries merged into the `meta` object (e.g. per-group
    /// runtimes of a verification run).
    meta_extra: Option<Value>,
    all_pass: bool,
}

/// Runs one command and writes its output; returns the process exit
/// code: 0 when every check the run requested passed, 1 otherwise.
/// Usage and computation errors surface as `Err` (exit code 2).
pub fn run(config: &RunConfig) -> anyhow::Result<i32> {
    let start = Instant::now();
    let out = match &config.command {
        Command::Integral(args) => integral_command(args, config)?,
        Command::Gap(args) => gap_command(args, config)?,
        Command::Partitions(args) => partitions_command(args, config)?,
        Command::Automaton(args) => automaton_command(args, config)?,
        Command::VerifyAll(_) => verify_command(config)?,
    };
    let bytes = match out.result {
        Payload::Csv(text) => text.into_bytes(),
        Payload::Json(result) => {
            let mut meta = json!({
                "timestamp_unix_ms": SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_millis() as u64)
                    .unwrap_or(0),
                "runtime_ms": start.elapsed().as_millis() as u64,
                "version": env!("CARGO_PKG_VERSION"),
            });
            if let Some(Value::Object(extra)) = out.meta_extra {
                let map = meta.as_object_mut().expect("meta is an object");
                for (key, value) in extra {
                    map.insert(key, value);
                }
            }
            let envelope = json!({
                "config": {
                    "command": config.command.name(),
                    "parameters": config.command.parameters(),
                    "seed": config.seed,
                    "format": format_name(config.format),
                },
                "result": result,
                "meta": meta,
            });
            let mut text = serde_json::to_string_pretty(&envelope)?;
            text.push('\n');
            text.into_bytes()
        }
    };
    write_output(config, &bytes)?;
    Ok(if out.all_pass { 0 } else { 1 })
}

fn format_name(format: OutputFormat) -> &'static str {
    match format {
        OutputFormat::Json => "json",
        OutputFormat::Csv => "csv",
    }
}

fn reject_csv(config: &RunConfig, what: &str) -> anyhow::Result<()> {
    if config.format == OutputFormat::Csv {
        bail!("{what} are json-only; csv is available for sweep tables and partition tables");
    }
    Ok(())
}

fn resolve_output_path(path: &Path) -> PathBuf {
    if path.is_relative() {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_VAR) {
            return PathBuf::from(dir).join(path);
        }
    }
    path.to_path_buf()
}

fn write_output(config: &RunConfig, bytes: &[u8]) -> anyhow::Result<()> {
    match &config.output {
        None => {
            std::io::stdout()
                .write_all(bytes)
                .context("writing to stdout")?;
            Ok(())
        }
        Some(path) => {
            let resolved = resolve_output_path(path);
            if let Some(parent) = resolved.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)
                        .with_context(|| format!("creating {}", parent.display()))?;
                }
            }
            std::fs::write(&resolved, bytes)
                .with_context(|| format!("writing {}", resolved.display()))?;
            eprintln!("wrote {}", resolved.display());
            Ok(())
        }
    }
}

/// JSON body for one quadrature result checked against a closed form.
fn checked_integral(got: &IntegralResult, target: f64, bound: f64) -> (Value, bool) {
    let abs_error = (got.value - target).abs();
    let pass = abs_error <= bound;
    (
        json!({
            "value": got.value,
            "target": target,
            "abs_error": abs_error,
            "error_estimate": got.error_estimate,
            "evaluations": got.evaluations,
            "tolerance": bound,
            "pass": pass,
        }),
        pass,
    )
}

fn integral_command(args: &IntegralArgs, config: &RunConfig) -> anyhow::Result<RunOutput> {
    reject_csv(config, "integral results")?;
    // The quadratures certify their own error estimates; the pass bound
    // here is a sanity gate well above the requested accuracy.
    let bound = (100.0 * args.tol).max(1e-12);
    let mut pass = true;

    if args.tilde {
        let got = integral_tilde(args.tol)?;
        let (body, ok) = checked_integral(&got, tilde_closed_form(), bound);
        pass &= ok;
        let mut result = json!({ "kind": "tilde", "main": body });
        if args.split {
            let split = integral_tilde_split(args.tol)?;
            let (below_target, above_target) = tilde_split_closed_forms();
            let (below, ok_below) = checked_integral(&split.below_peak, below_target, bound);
            let (above, ok_above) = checked_integral(&split.above_peak, above_target, bound);
            pass &= ok_below && ok_above;
            result["split"] = json!({ "below_peak": below, "above_peak": above });
        }
        if args.series {
            bail!("the series route applies to power pairs, not the entropy equation");
        }
        return Ok(RunOutput {
            result: Payload::Json(result),
            meta_extra: None,
            all_pass: pass,
        });
    }

    let Some(a) = args.a else {
        bail!("--a is required (or pass --tilde)");
    };
    let b = match (args.b, args.series) {
        (Some(b), _) => b,
        (None, true) => a + 1.0,
        (None, false) => bail!("--b is required (or pass --tilde)"),
    };
    let pair = ExponentPair::new(a, b)?;
    let got = integral_main(pair, args.tol)?;
    let (body, ok) = checked_integral(&got, main_closed_form(pair), bound);
    pass &= ok;
    let mut result = json!({
        "kind": "power",
        "a": a,
        "b": b,
        "rho": pair.rho(),
        "main": body,
    });
    if args.split {
        let split = integral_split(pair, args.tol)?;
        let (below_target, above_target) = split_closed_forms(pair);
        let (below, ok_below) = checked_integral(&split.below_peak, below_target, bound);
        let (above, ok_above) = checked_integral(&split.above_peak, above_target, bound);
        pass &= ok_below && ok_above;
        result["split"] = json!({ "below_peak": below, "above_peak": above });
    }
    if args.series {
        if (b - (a + 1.0)).abs() > 1e-12 {
            bail!("the series route requires b = a + 1");
        }
        // The peak-strip extrapolation in the series route certifies
        // accuracies down to about 1e-8; finer requests are clamped.
        let series_tol = args.tol.max(1e-8);
        let series_bound = (100.0 * series_tol).max(1e-12);
        let dual = integral_log_series(a, series_tol)?;
        let target = series_integral_closed_form(a);
        let (quad, ok_quad) = checked_integral(&dual.quadrature, target, series_bound);
        let (termwise, ok_term) = checked_integral(&dual.termwise, target, series_bound);
        pass &= ok_quad && ok_term;
        result["series"] = json!({
            "tol": series_tol,
            "quadrature": quad,
            "termwise": termwise,
        });
    }
    Ok(RunOutput {
        result: Payload::Json(result),
        meta_extra: None,
        all_pass: pass,
    })
}

fn gap_command(args: &GapArgs, config: &RunConfig) -> anyhow::Result<RunOutput> {
    reject_csv(config, "gap results")?;
    let est = survival_log(args.k, args.s, args.tol)?;
    let lambda = lambda_k(args.k)?;
    let mut pass = true;
    let mut result = json!({
        "k": args.k,
        "s": args.s,
        "log_prob": est.log_prob,
        "prob": est.log_prob.exp(),
        "conditional_tail": est.conditional_tail,
        "steps": est.steps,
        "lambda": lambda,
        "s_log_prob": -args.s * est.log_prob,
    });
    match sandwich_log_bounds(args.k, args.s) {
        Ok(bounds) => {
            let certified_low = est.log_prob + (-est.conditional_tail).ln_1p();
            let brackets = bounds.log_lower <= est.log_prob && certified_low <= bounds.log_upper;
            pass &= brackets;
            result["sandwich"] = json!({
                "log_lower": bounds.log_lower,
                "log_upper": bounds.log_upper,
                "block_len": bounds.block_len,
                "blocks": bounds.blocks,
                "brackets_estimate": brackets,
            });
        }
        Err(CoreError::NotApplicable { .. }) | Err(CoreError::OutOfDomain { .. }) => {}
        Err(e) => return Err(e.into()),
    }
    if let Some(n) = args.finite {
        let log_prob = survival_log_finite(args.k, args.s, n)?;
        result["finite"] = json!({
            "n": n,
            "log_prob": log_prob,
            "prob": log_prob.exp(),
        });
    }
    Ok(RunOutput {
        result: Payload::Json(result),
        meta_extra: None,
        all_pass: pass,
    })
}

fn partitions_command(args: &PartitionsArgs, config: &RunConfig) -> anyhow::Result<RunOutput> {
    let table = count_pk(args.k, args.n)?;
    if config.format == OutputFormat::Csv {
        if !args.table {
            bail!("csv output needs --table; a single count is json-only");
        }
        let mut text = String::from("n,count\n");
        for (i, count) in table.counts.iter().enumerate() {
            text.push_str(&format!("{i},{count}\n"));
        }
        return Ok(RunOutput {
            result: Payload::Csv(text),
            meta_extra: None,
            all_pass: true,
        });
    }
    let mut pass = true;
    let mut result = json!({
        "k": args.k,
        "n": args.n,
        "count": table.counts[args.n].to_string(),
    });
    if args.table {
        result["table"] = Value::Array(
            table
                .counts
                .iter()
                .map(|c| Value::String(c.to_string()))
                .collect(),
        );
    }
    if args.macmahon {
        let (lhs, rhs) = count_macmahon(args.n);
        let entrywise = lhs.counts == rhs.counts;
        pass &= entrywise;
        result["macmahon"] = json!({
            "no_ones_no_consecutive": lhs.counts[args.n].to_string(),
            "parts_divisible_by_2_or_3": rhs.counts[args.n].to_string(),
            "entrywise_equal": entrywise,
        });
    }
    Ok(RunOutput {
        result: Payload::Json(result),
        meta_extra: None,
        all_pass: pass,
    })
}

fn automaton_command(args: &AutomatonArgs, config: &RunConfig) -> anyhow::Result<RunOutput> {
    let variant = match args.variant {
        VariantArg::Original => Variant::Original,
        VariantArg::Enhanced => Variant::Enhanced,
    };
    let params = ModelParams::new(args.k, args.theta.unwrap_or(args.k), variant)?;

    if args.sweep {
        if args.theta.is_some() {
            bail!("the sweep always runs at the default threshold");
        }
        let trials = args.trials.unwrap_or(1000);
        let variants = [Variant::Original, Variant::Enhanced];
        let rows = threshold_sweep(
            args.k,
            &args.l_list,
            &args.s_list,
            &variants,
            trials,
            config.seed,
        )?;
        if config.format == OutputFormat::Csv {
            let mut text =
                String::from("k,variant,L,s,s_log_L,trials,spanned,estimate,ci_low,ci_high,seed\n");
            for row in &rows {
                text.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{}\n",
                    row.k,
                    row.variant.name(),
                    row.l,
                    row.s,
                    row.s_log_l,
                    row.trials,
                    row.spanned,
                    row.estimate,
                    row.ci_low,
                    row.ci_high,
                    row.seed,
                ));
            }
            return Ok(RunOutput {
                result: Payload::Csv(text),
                meta_extra: None,
                all_pass: true,
            });
        }
        let rows_json: Vec<Value> = rows
            .iter()
            .map(|row| {
                json!({
                    "k": row.k,
                    "variant": row.variant.name(),
                    "L": row.l,
                    "s": row.s,
                    "s_log_L": row.s_log_l,
                    "trials": row.trials,
                    "spanned": row.spanned,
                    "estimate": row.estimate,
                    "ci_low": row.ci_low,
                    "ci_high": row.ci_high,
                    "seed": row.seed,
                })
            })
            .collect();
        return Ok(RunOutput {
            result: Payload::Json(json!({ "rows": rows_json })),
            meta_extra: None,
            all_pass: true,
        });
    }

    reject_csv(config, "single automaton results")?;
    let Some(s) = args.s else {
        bail!("--s is required");
    };

    if args.nucleation {
        if variant != Variant::Original {
            bail!("the corner-seed analysis is defined for the original rule");
        }
        let Some(m) = args.m else {
            bail!("--m is required with --nucleation");
        };
        if args.dump_grid {
            bail!("snapshots come from spanning trials, not corner-seed sampling");
        }
        let probability = nucleation_probability(args.k, m, s)?;
        let mut result = json!({
            "k": args.k,
            "m": m,
            "s": s,
            "probability": probability,
            "log_prob": probability.ln(),
        });
        if let Some(trials) = args.trials {
            let sample = sample_nucleation(args.k, m, s, trials, config.seed)?;
            let (ci_low, ci_high) = wilson_interval(sample.occurrences, sample.trials, Z_99);
            result["sampled"] = json!({
                "occurrences": sample.occurrences,
                "trials": sample.trials,
                "rate": sample.occurrences as f64 / sample.trials as f64,
                "ci_low": ci_low,
                "ci_high": ci_high,
            });
        }
        return Ok(RunOutput {
            result: Payload::Json(result),
            meta_extra: None,
            all_pass: true,
        });
    }

    let Some(l) = args.l else {
        bail!("--L is required");
    };

    if args.exact {
        if args.dump_grid {
            bail!("snapshots come from sampled trials, not exhaustive enumeration");
        }
        let counts = exhaustive_spanning_counts(l, &params)?;
        let cells = counts.len() - 1;
        let mut s_pow = 1.0f64;
        let mut probability = 0.0f64;
        let powers: Vec<f64> = (0..=cells).map(|j| (1.0 - s).powi((cells - j) as i32)).collect();
        for (j, &c) in counts.iter().enumerate() {
            probability += c as f64 * s_pow * powers[j];
            s_pow *= s;
        }
        let result = json!({
            "k": args.k,
            "L": l,
            "s": s,
            "variant": params.variant().name(),
            "theta": params.theta(),
            "cells": cells,
            "probability": probability,
            "counts_by_occupied": counts,
        });
        return Ok(RunOutput {
            result: Payload::Json(result),
            meta_extra: None,
            all_pass: true,
        });
    }

    let trials = args.trials.unwrap_or(100_000);
    let est = monte_carlo_spanning(l, s, trials, config.seed, &params)?;
    let mut result = json!({
        "k": args.k,
        "L": l,
        "s": s,
        "variant": params.variant().name(),
        "theta": params.theta(),
        "trials": est.trials,
        "spanned": est.spanned,
        "estimate": est.estimate,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
    });
    if args.dump_grid {
        let grid = sample_trial_grid(l, s, config.seed, 0)?;
        let closed = closure(&grid, &params)?;
        result["snapshot"] = json!({
            "trial": 0,
            "occupied_rle": grid.occupied_rle(),
            "closed_rle": closed.active_rle(),
            "spanned": closed.fully_active(),
        });
    }
    Ok(RunOutput {
        result: Payload::Json(result),
        meta_extra: None,
        all_pass: true,
    })
}

fn verify_command(config: &RunConfig) -> anyhow::Result<RunOutput> {
    reject_csv(config, "verification reports")?;
    let report = verify::run_all(config.seed);
    for group in &report.groups {
        eprintln!(
            "group {:24} {} ({} checks, {} ms)",
            group.name,
            if group.all_pass() { "PASS" } else { "FAIL" },
            group.checks.len(),
            group.elapsed_ms,
        );
    }
    eprintln!(
        "verification {}: {} checks across {} groups",
        if report.all_pass() { "PASSED" } else { "FAILED" },
        report.total_checks(),
        report.groups.len(),
    );
    Ok(RunOutput {
        all_pass: report.all_pass(),
        meta_extra: Some(report.meta_payload()),
        result: Payload::Json(report.result_payload()),
    })
}
