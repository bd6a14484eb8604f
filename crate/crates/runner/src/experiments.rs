//! The four experiment drivers: single evolution, conservation sweep,
//! integrator comparison, and the inequality sampling campaign.

use std::path::Path;
use std::time::Instant;

use hartree_dm_core::{
    dyson_wave_operator, klein_quotient, lieb_thirring_functional, lt_quotient,
    picard_duhamel_solve, propagate, random_admissible_perturbation,
    reconstruct_from_wave_operator, relative_particle_number, density_of, LedgerOptions,
    LtEnergyKind, MeanFieldMode, PropagatorConfig, TrajectoryRecord,
};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ExperimentKind, ModeConfig, PropagatorSection};
use crate::error::{RunnerError, RunnerResult};
use crate::output::{write_checkpoint, write_ledger_csv, write_plot_files};
use crate::scene::build_scene;

fn core_propagator_config(section: &PropagatorSection) -> PropagatorConfig {
    PropagatorConfig {
        tau: section.tau_time,
        mode: match section.mode {
            ModeConfig::Frozen => MeanFieldMode::Frozen,
            ModeConfig::Midpoint => MeanFieldMode::Midpoint,
        },
        record_stride: section.record_stride,
        picard_tol: section.picard_tol,
        picard_max_iter: section.picard_max_iter,
        quadrature_nodes: section.quadrature_nodes,
        dyson_order: section.dyson_order,
    }
}

fn ledger_options(config: &ExperimentConfig) -> LedgerOptions {
    LedgerOptions {
        full: config.output.full_diagnostics,
        entropy_integral_tol: config.output.entropy_integral_tol,
        cutoffs: config.output.cutoffs_energy.clone(),
    }
}

/// Drift of the conserved functional over a trajectory: relative Hartree
/// energy at zero temperature, relative free energy otherwise.
fn conserved_drift(record: &TrajectoryRecord, zero_temperature: bool) -> Option<(f64, f64)> {
    let pick = |ledger: &hartree_dm_core::DiagnosticLedger| {
        if zero_temperature {
            ledger.relative_hartree
        } else {
            ledger.relative_free_energy
        }
    };
    let first = pick(record.ledgers.first()?)?;
    let worst = record
        .ledgers
        .iter()
        .filter_map(pick)
        .map(|v| (v - first).abs())
        .fold(0.0f64, f64::max);
    Some((first, worst))
}

fn trace_drift(record: &TrajectoryRecord) -> Option<f64> {
    let first = record.ledgers.first()?.relative_particle_number?;
    record
        .ledgers
        .iter()
        .filter_map(|l| l.relative_particle_number)
        .map(|v| (v - first).abs())
        .fold(0.0f64, f64::max)
        .into()
}

fn write_trajectory_artifacts(
    config: &ExperimentConfig,
    out_dir: &Path,
    record: &TrajectoryRecord,
) -> RunnerResult<()> {
    if let Some(name) = &config.output.ledger_csv {
        write_ledger_csv(&out_dir.join(name), &record.times, &record.ledgers)?;
    }
    if let Some(dir) = &config.output.plot_dir {
        write_plot_files(&out_dir.join(dir), &record.times, &record.ledgers)?;
    }
    if let Some(name) = &config.output.checkpoint {
        write_checkpoint(&out_dir.join(name), record.final_snapshot())?;
    }
    Ok(())
}

/// Runs one experiment and returns the summary document. Artifacts are
/// written under `out_dir`.
pub fn execute(
    config: &ExperimentConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> RunnerResult<Value> {
    std::fs::create_dir_all(out_dir)?;
    let started = Instant::now();
    let body = match config.experiment_kind {
        ExperimentKind::Evolve => run_evolve(config, out_dir, seed_override)?,
        ExperimentKind::ConserveSweep => run_conserve_sweep(config, out_dir, seed_override)?,
        ExperimentKind::IntegratorCompare => run_integrator_compare(config, out_dir, seed_override)?,
        ExperimentKind::InequalityCampaign => run_campaign(config, out_dir, seed_override)?,
    };
    let mut summary = json!({
        "status": "ok",
        "config": serde_json::to_value(config)
            .map_err(|e| RunnerError::Numerical(format!("config echo failed: {e}")))?,
        "wall_clock_ms": started.elapsed().as_millis() as u64,
    });
    summary
        .as_object_mut()
        .expect("summary is an object")
        .extend(body.as_object().cloned().unwrap_or_default());
    Ok(summary)
}

fn run_evolve(
    config: &ExperimentConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> RunnerResult<Value> {
    let scene = build_scene(config, seed_override)?;
    let section = config.propagator.as_ref().expect("validated");
    let record = propagate(
        &scene.initial,
        &scene.state,
        &scene.potential,
        &core_propagator_config(section),
        section.t_final_time,
        &ledger_options(config),
    )?;
    write_trajectory_artifacts(config, out_dir, &record)?;
    let drift = conserved_drift(&record, scene.state.is_zero_temperature());
    Ok(json!({
        "experiment": "evolve",
        "integrator": record.integrator,
        "steps": record.steps_taken,
        "snapshots": record.times.len(),
        "final_time": record.final_time(),
        "conserved_initial": drift.map(|d| d.0),
        "conserved_drift": drift.map(|d| d.1),
        "trace_drift": trace_drift(&record),
    }))
}

fn run_conserve_sweep(
    config: &ExperimentConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> RunnerResult<Value> {
    let scene = build_scene(config, seed_override)?;
    let section = config.propagator.as_ref().expect("validated");
    let options = ledger_options(config);
    let zero_t = scene.state.is_zero_temperature();

    let run_at = |tau: f64| -> RunnerResult<(TrajectoryRecord, f64, f64)> {
        let mut core = core_propagator_config(section);
        core.tau = tau;
        let record = propagate(
            &scene.initial,
            &scene.state,
            &scene.potential,
            &core,
            section.t_final_time,
            &options,
        )?;
        let (initial, drift) = conserved_drift(&record, zero_t).ok_or_else(|| {
            RunnerError::Numerical("conserved functional missing from the ledger".into())
        })?;
        Ok((record, initial, drift))
    };

    let (coarse_record, initial, coarse_drift) = run_at(section.tau_time)?;
    let (_, _, fine_drift) = run_at(0.5 * section.tau_time)?;
    write_trajectory_artifacts(config, out_dir, &coarse_record)?;
    let ratio = if fine_drift > 0.0 {
        Some(coarse_drift / fine_drift)
    } else {
        None
    };
    Ok(json!({
        "experiment": "conserve-sweep",
        "conserved_initial": initial,
        "drift_coarse": coarse_drift,
        "drift_fine": fine_drift,
        "drift_ratio": ratio,
        "trace_drift": trace_drift(&coarse_record),
    }))
}

fn run_integrator_compare(
    config: &ExperimentConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> RunnerResult<Value> {
    let scene = build_scene(config, seed_override)?;
    let section = config.propagator.as_ref().expect("validated");
    let options = ledger_options(config);
    let horizon = section.t_final_time;
    if !(horizon > 0.0) {
        return Err(RunnerError::Config(
            "integrator-compare needs a positive t_final_time".into(),
        ));
    }

    // Strang at stride 1 (its potential path feeds the Dyson series).
    let mut core = core_propagator_config(section);
    core.record_stride = 1;
    let strang = propagate(
        &scene.initial,
        &scene.state,
        &scene.potential,
        &core,
        horizon,
        &options,
    )?;
    write_trajectory_artifacts(config, out_dir, &strang)?;

    let picard = picard_duhamel_solve(
        &scene.initial,
        &scene.state,
        &scene.potential,
        horizon,
        section.quadrature_nodes,
        section.picard_tol,
        section.picard_max_iter,
        &options,
    )?;

    let v_path: Vec<_> = strang
        .times
        .iter()
        .cloned()
        .zip(strang.potentials.iter().cloned())
        .collect();
    let wave = dyson_wave_operator(&v_path, horizon, 0.0, section.dyson_order, None)?;
    let dyson_final =
        reconstruct_from_wave_operator(&wave, &scene.state, &scene.initial, horizon)?;

    let strang_final = strang.final_snapshot().as_matrix();
    let picard_final = picard.final_snapshot().as_matrix();
    let d_sp = strang_final.s2_distance(picard_final)?;
    let d_sd = strang_final.s2_distance(dyson_final.as_matrix())?;
    let d_pd = picard_final.s2_distance(dyson_final.as_matrix())?;
    let stats = picard.picard.as_ref().expect("picard record carries stats");
    let contraction: Vec<f64> = stats
        .increments
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
        .collect();
    Ok(json!({
        "experiment": "integrator-compare",
        "s2_strang_picard": d_sp,
        "s2_strang_dyson": d_sd,
        "s2_picard_dyson": d_pd,
        "picard_iterations": stats.iterations,
        "picard_increments": stats.increments,
        "picard_contraction_factors": contraction,
        "dyson_unitarity_defect": wave.unitarity_defect(),
        "dyson_last_term": wave.last_term_magnitude(),
    }))
}

struct SampleResult {
    seed: u64,
    klein: Option<f64>,
    lt: Option<f64>,
    lt_functional: f64,
}

fn worker_count(samples: usize) -> usize {
    let available = std::thread::available_parallelism()
        .map(std::num::NonZeroUsize::get)
        .unwrap_or(1);
    let cap = std::env::var("HDM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or(available);
    cap.min(available).min(samples).max(1)
}

fn run_campaign(
    config: &ExperimentConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> RunnerResult<Value> {
    let scene = build_scene(config, seed_override)?;
    let campaign = config.campaign.as_ref().expect("validated");
    let master_seed = seed_override.unwrap_or(campaign.master_seed);
    let samples = campaign.samples;
    let zero_t = scene.state.is_zero_temperature();
    let kind = if zero_t {
        LtEnergyKind::Kinetic
    } else {
        LtEnergyKind::Entropy
    };

    let evaluate = |seed: u64| -> RunnerResult<SampleResult> {
        let q = random_admissible_perturbation(
            &scene.state,
            config.perturbation.bandwidth_energy,
            config.perturbation.magnitude,
            seed,
        )?;
        let klein = if zero_t {
            None
        } else {
            Some(klein_quotient(&scene.state, &q)?)
        };
        let lt = lt_quotient(&scene.state, &q, kind).ok();
        let lt_functional = lieb_thirring_functional(&density_of(&q), scene.state.density())?;
        // Sanity: the construction must keep the trace at zero.
        let tr = relative_particle_number(&q)?;
        if tr.abs() > 1e-10 {
            return Err(RunnerError::Numerical(format!(
                "sample seed {seed}: trace {tr:.3e} not conserved"
            )));
        }
        Ok(SampleResult {
            seed,
            klein,
            lt,
            lt_functional,
        })
    };

    let seeds: Vec<u64> = (0..samples as u64).map(|i| master_seed + i).collect();
    let workers = worker_count(samples);
    let mut results: Vec<Option<RunnerResult<SampleResult>>> = Vec::new();
    results.resize_with(samples, || None);
    if workers <= 1 {
        for (slot, &seed) in results.iter_mut().zip(&seeds) {
            *slot = Some(evaluate(seed));
        }
    } else {
        let chunk = samples.div_ceil(workers);
        std::thread::scope(|scope| {
            for (chunk_idx, slots) in results.chunks_mut(chunk).enumerate() {
                let seeds = &seeds;
                let evaluate = &evaluate;
                scope.spawn(move || {
                    for (offset, slot) in slots.iter_mut().enumerate() {
                        let seed = seeds[chunk_idx * chunk + offset];
                        *slot = Some(evaluate(seed));
                    }
                });
            }
        });
    }
    let mut rows = Vec::with_capacity(samples);
    for slot in results {
        rows.push(slot.expect("every slot filled")?);
    }

    // Per-sample CSV, merged in seed order.
    if let Some(name) = &config.output.ledger_csv {
        let mut body = String::from("sample,seed,klein_quotient,lt_quotient,lt_functional\n");
        for (i, row) in rows.iter().enumerate() {
            body.push_str(&format!(
                "{},{},{},{},{}\n",
                i,
                row.seed,
                row.klein.map(crate::output::format_float).unwrap_or_default(),
                row.lt.map(crate::output::format_float).unwrap_or_default(),
                crate::output::format_float(row.lt_functional),
            ));
        }
        std::fs::write(out_dir.join(name), body)?;
    }

    let min_of = |values: Vec<f64>| values.into_iter().fold(f64::INFINITY, f64::min);
    let klein_values: Vec<f64> = rows.iter().filter_map(|r| r.klein).collect();
    let lt_values: Vec<f64> = rows.iter().filter_map(|r| r.lt).collect();
    let min_klein = (!klein_values.is_empty()).then(|| min_of(klein_values));
    let min_lt = (!lt_values.is_empty()).then(|| min_of(lt_values));
    let min_lt_functional = min_of(rows.iter().map(|r| r.lt_functional).collect());
    Ok(json!({
        "experiment": "inequality-campaign",
        "samples": samples,
        "master_seed": master_seed,
        "min_klein_quotient": min_klein,
        "min_lt_quotient": min_lt,
        "min_lt_functional": min_lt_functional,
    }))
}
