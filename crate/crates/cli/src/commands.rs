//! The five experiment drivers.

use std::path::PathBuf;

use anyhow::{anyhow, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use tnmpf::estimator::estimate_stream;
use tnmpf::sweep::reference_trajectory;
use tnmpf::{
    aqc, build_ansatz, build_f, cross_validated_error, fit_scaling, mpf_combine, optimize, run_sweep, smart_init,
    state_truncation_error, trotter_circuit, Backend, CoefficientSet, EstimateResult, InterleavePlan, MatrixProductState,
    MpfSetup, OptimizeOptions, ReferenceSpec, ScalingFit, ScalingModel, SweepResult, TestOutcome, TrotterOrder,
    TruncationPolicy,
};

use crate::config::{ConfigErrors, ExperimentConfig, Role};
use crate::output::{num, opt, Table, Writer};
use crate::CliError;

fn check(cfg: &ExperimentConfig, roles: &[Role], extra: Vec<String>) -> Result<(), CliError> {
    let mut errs = match cfg.validate(roles) {
        Ok(()) => Vec::new(),
        Err(ConfigErrors(e)) => e,
    };
    errs.extend(extra);
    if errs.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(ConfigErrors(errs)))
    }
}

/// The reference role only matters once the dense path is unavailable.
fn exact_roles(cfg: &ExperimentConfig, mut roles: Vec<Role>) -> Vec<Role> {
    if !cfg.dense_enabled() {
        roles.push(Role::Reference);
    }
    roles
}

fn setup(cfg: &ExperimentConfig, k_list: &[usize], window: Option<tnmpf::TimedCircuit>) -> Result<MpfSetup> {
    Ok(MpfSetup {
        hamiltonian: cfg.hamiltonian()?,
        initial: cfg.initial()?,
        k_list: k_list.to_vec(),
        order: cfg.trotter_order(),
        reference: cfg.reference_spec(),
        probe_ks: cfg.deep_k.into_iter().collect(),
        window,
    })
}

/// Exact-quality data: dense for small chains, fine-reference MPS otherwise.
fn exact_backend(cfg: &ExperimentConfig) -> Backend {
    if cfg.dense_enabled() {
        Backend::Dense
    } else {
        Backend::Mps { policy: cfg.reference_policy(), reference_dt: cfg.reference.dt }
    }
}

fn k_columns(prefix: &str, ks: &[usize]) -> Vec<String> {
    ks.iter().map(|k| format!("{prefix}{k}")).collect()
}

fn header<'a>(fixed: &[&'a str], extra: &'a [String]) -> Vec<&'a str> {
    fixed.iter().copied().chain(extra.iter().map(String::as_str)).collect()
}

fn memory_entries(n_sites: usize, chi: usize, legs: usize) -> usize {
    legs * n_sites * chi * chi
}

pub fn run_compare(cfg: &ExperimentConfig, out: &PathBuf) -> Result<Vec<PathBuf>, CliError> {
    check(cfg, &exact_roles(cfg, vec![Role::State, Role::Mpo]), Vec::new())?;
    let go = || -> Result<Vec<PathBuf>> {
        let times = cfg.times()?;
        let s = setup(cfg, &cfg.k_list, None)?;
        let exact = run_sweep(&s, &times, &exact_backend(cfg), cfg.ridge)?;
        let mpo = run_sweep(&s, &times, &Backend::Mpo { policy: cfg.mpo_policy() }, cfg.ridge)?;
        let reference = reference_trajectory(&s, &times, &cfg.reference_policy(), cfg.reference.dt)?;
        let capped = reference_trajectory(&s, &times, &cfg.state_policy(), cfg.reference.dt)?;
        let n = cfg.hamiltonian.n_sites;
        let cols = k_columns("c_", &cfg.k_list);
        let mut table = Table::new(
            "compare",
            &header(&["t", "e_kmax", "e_mps", "e_mpo_mpf", "chi_mps", "chi_mpo", "memory_mps", "memory_mpo", "one_norm"], &cols),
        );
        for i in 0..times.len() {
            let (e, m) = (&exact.points[i], &mpo.points[i]);
            let chi_mps = capped[i].max_bond();
            let chi_mpo = m.problem.provenance.max_bond_seen().unwrap_or(1);
            let mut row = vec![
                num(times[i]),
                num(*e.trotter_errors.last().unwrap_or(&0.0)),
                num(state_truncation_error(&capped[i], &reference[i])?),
                num(cross_validated_error(&m.dynamic, &e.problem)?),
                chi_mps.to_string(),
                chi_mpo.to_string(),
                memory_entries(n, chi_mps, 2).to_string(),
                memory_entries(n, chi_mpo, 4).to_string(),
                num(m.dynamic.one_norm),
            ];
            row.extend(m.dynamic.c.iter().map(|&c| num(c)));
            table.push(row);
        }
        let results = json!({
            "exact_path": if cfg.dense_enabled() { "dense" } else { "mps_fine_reference" },
            "memory_units": "complex entries: 2 L chi_mps^2 and 4 L chi_mpo^2",
            "static_coefficients": exact.static_coeffs.c,
        });
        Ok(vec![Writer::new(out, "compare", cfg)?.table(&table, &results)?])
    };
    go().map_err(CliError::Runtime)
}

#[derive(Serialize)]
struct PathOutcome {
    path: &'static str,
    outcome: Option<TestOutcome>,
    /// `t1 +` the last passing window time.
    mpf_last_passing_total: Option<f64>,
}

/// Sweeps for the MPF and Trotter tests: MPO always, dense when allowed.
fn test_sweeps(cfg: &ExperimentConfig, s: &MpfSetup, times: &[f64]) -> Result<Vec<(&'static str, SweepResult)>> {
    let mut runs = vec![("mpo", run_sweep(s, times, &Backend::Mpo { policy: cfg.mpo_policy() }, cfg.ridge)?)];
    if cfg.dense_enabled() {
        runs.push(("dense", run_sweep(s, times, &Backend::Dense, cfg.ridge)?));
    }
    Ok(runs)
}

fn tests_table(name: &str, runs: &[(&'static str, SweepResult)], ks: &[usize], offset: f64) -> Table {
    let mut cols = k_columns("e_k", ks);
    cols.push("e_deep".into());
    cols.extend(k_columns("c_", ks));
    let mut table = Table::new(name, &header(&["path", "t", "e_d", "one_norm", "mpf_pass", "trotter_pass"], &cols));
    for (path, run) in runs {
        let outcome = run.outcome.as_ref();
        for (i, p) in run.points.iter().enumerate() {
            let mut row = vec![
                path.to_string(),
                num(offset + p.t),
                num(p.error_d()),
                num(p.dynamic.one_norm),
                outcome.map(|o| o.mpf_pass[i].to_string()).unwrap_or_default(),
                outcome.map(|o| o.trotter_pass[i].to_string()).unwrap_or_default(),
            ];
            row.extend(p.trotter_errors.iter().map(|&e| num(e)));
            row.push(opt(p.probe_errors.first().copied()));
            row.extend(p.dynamic.c.iter().map(|&c| num(c)));
            table.push(row);
        }
    }
    table
}

fn outcomes(runs: &[(&'static str, SweepResult)], offset: f64) -> Vec<PathOutcome> {
    runs.iter()
        .map(|(path, r)| PathOutcome {
            path,
            mpf_last_passing_total: r.outcome.as_ref().and_then(|o| o.mpf_last_passing).map(|t| t + offset),
            outcome: r.outcome.clone(),
        })
        .collect()
}

fn deep_k_errors(cfg: &ExperimentConfig) -> Vec<String> {
    if cfg.deep_k.is_none() {
        vec!["deep_k: required by this command but not configured".into()]
    } else {
        Vec::new()
    }
}

pub fn run_tests(cfg: &ExperimentConfig, out: &PathBuf) -> Result<Vec<PathBuf>, CliError> {
    check(cfg, &[Role::Mpo], deep_k_errors(cfg))?;
    let go = || -> Result<Vec<PathBuf>> {
        let times = cfg.times()?;
        let s = setup(cfg, &cfg.k_list, None)?;
        let runs = test_sweeps(cfg, &s, &times)?;
        let table = tests_table("tests", &runs, &cfg.k_list, 0.0);
        let results = json!({ "paths": outcomes(&runs, 0.0), "static_coefficients": runs[0].1.static_coeffs.c });
        Ok(vec![Writer::new(out, "tests", cfg)?.table(&table, &results)?])
    };
    go().map_err(CliError::Runtime)
}

/// Per-time single-k estimates, their MPF combination and the reference.
struct ObservableTrack<'a> {
    cfg: &'a ExperimentConfig,
    /// State the Trotter circuits act on.
    start: MatrixProductState,
    ks: Vec<usize>,
    /// Window times `t2`; rows report `offset + t2`.
    times: Vec<f64>,
    offset: f64,
    coeffs: Vec<CoefficientSet>,
}

fn stream_id(ti: usize, ki: usize, oi: usize) -> u64 {
    ((ti as u64) << 32) | ((ki as u64) << 16) | oi as u64
}

fn observable_rows(track: &ObservableTrack, table: &mut Table, reference: &[(f64, MatrixProductState)]) -> Result<()> {
    let cfg = track.cfg;
    let h = cfg.hamiltonian()?;
    let policy = cfg.state_policy();
    let obs = cfg.observables();
    let shots = cfg.shots();
    let shots_label = match shots {
        tnmpf::Shots::Exact => "exact".to_string(),
        tnmpf::Shots::Count(n) => n.to_string(),
    };
    let all_ks: Vec<usize> = track.ks.iter().chain(&cfg.deep_k).copied().collect();
    let r = track.ks.len();
    let rows: Vec<Vec<Vec<String>>> = track
        .times
        .par_iter()
        .enumerate()
        .map(|(ti, &t)| -> Result<Vec<Vec<String>>> {
            let total = track.offset + t;
            let states = all_ks
                .iter()
                .map(|&k| {
                    let mut psi = track.start.clone();
                    psi.apply_circuit(&trotter_circuit(&h, t, k, cfg.trotter_order())?, &policy)?;
                    Ok(psi)
                })
                .collect::<tnmpf::Result<Vec<_>>>()?;
            let mut rows = Vec::new();
            for (oi, o) in obs.iter().enumerate() {
                let est = states
                    .iter()
                    .enumerate()
                    .map(|(ki, psi)| estimate_stream(psi, o, shots, cfg.seed, stream_id(ti, ki, oi)))
                    .collect::<tnmpf::Result<Vec<EstimateResult>>>()?;
                for (k, e) in all_ks.iter().zip(&est) {
                    rows.push(vec![num(total), o.label(), k.to_string(), num(e.value), num(e.std_error), shots_label.clone()]);
                }
                let combined = mpf_combine(&track.coeffs[ti], &est[..r])?;
                rows.push(vec![num(total), o.label(), "MPF".into(), num(combined.value), num(combined.std_error), shots_label.clone()]);
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    // Interleave reference rows by time so the table stays sorted.
    let mut merged: Vec<(f64, usize, Vec<String>)> = Vec::new();
    for (ti, block) in rows.into_iter().enumerate() {
        let t = track.offset + track.times[ti];
        merged.extend(block.into_iter().map(|row| (t, 0, row)));
    }
    for (t, psi) in reference {
        for o in &obs {
            merged.push((*t, 1, vec![num(*t), o.label(), "reference".into(), num(psi.expectation(o)?), num(0.0), "exact".into()]));
        }
    }
    merged.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (_, _, row) in merged {
        table.push(row);
    }
    Ok(())
}

const OBSERVABLE_HEADER: [&str; 6] = ["t", "observable", "k", "value", "std_error", "shots"];

fn no_observables(cfg: &ExperimentConfig) -> Vec<String> {
    if cfg.observables.is_empty() {
        vec!["observables: at least one observable is required by this command".into()]
    } else {
        Vec::new()
    }
}

pub fn run_observables(cfg: &ExperimentConfig, out: &PathBuf) -> Result<Vec<PathBuf>, CliError> {
    let mut roles = vec![Role::State];
    if !cfg.dense_enabled() {
        roles.extend([Role::Mpo, Role::Reference]);
    }
    check(cfg, &roles, no_observables(cfg))?;
    let go = || -> Result<Vec<PathBuf>> {
        let times = cfg.times()?;
        let s = setup(cfg, &cfg.k_list, None)?;
        let backend = if cfg.dense_enabled() { Backend::Dense } else { Backend::Mpo { policy: cfg.mpo_policy() } };
        let sweep = run_sweep(&s, &times, &backend, cfg.ridge)?;
        let reference = reference_trajectory(&s, &times, &cfg.reference_policy(), cfg.reference.dt)?;
        let track = ObservableTrack {
            cfg,
            start: s.initial.clone(),
            ks: cfg.k_list.clone(),
            times: times.clone(),
            offset: 0.0,
            coeffs: sweep.points.iter().map(|p| p.dynamic.clone()).collect(),
        };
        let mut table = Table::new("observables", &OBSERVABLE_HEADER);
        let refs: Vec<(f64, MatrixProductState)> = times.iter().copied().zip(reference).collect();
        observable_rows(&track, &mut table, &refs)?;
        let results = json!({
            "coefficient_path": if cfg.dense_enabled() { "dense" } else { "mpo" },
            "outcome": sweep.outcome,
            "coefficients": track.coeffs,
        });
        Ok(vec![Writer::new(out, "observables", cfg)?.table(&table, &results)?])
    };
    go().map_err(CliError::Runtime)
}

pub fn run_aqc(cfg: &ExperimentConfig, out: &PathBuf) -> Result<Vec<PathBuf>, CliError> {
    let mut extra = deep_k_errors(cfg);
    if !cfg.aqc.enabled {
        extra.push("aqc.enabled: must be true for the aqc command".into());
    }
    check(cfg, &exact_roles(cfg, vec![Role::Mpo, Role::State]), extra)?;
    let a = &cfg.aqc;
    let t1 = a.t1;
    let h = cfg.hamiltonian().map_err(|e| CliError::Runtime(e.into()))?;
    let psi0 = cfg.initial().map_err(|e| CliError::Runtime(e.into()))?;
    let writer = Writer::new(out, "aqc", cfg).map_err(CliError::Runtime)?;
    let mut files = Vec::new();

    // Compile the t1 window.
    let mut start = psi0.clone();
    let mut compile = serde_json::Value::Null;
    if t1 > 0.0 {
        let mut go = || -> Result<(serde_json::Value, MatrixProductState, f64)> {
            let plain = setup(cfg, &cfg.k_list, None)?;
            let target = reference_trajectory(&plain, &[t1], &cfg.reference_policy(), cfg.reference.dt)?.remove(0);
            let ansatz = build_ansatz(&h, a.k_layers)?;
            let theta0 = smart_init(&ansatz, &h, t1)?;
            let opts = OptimizeOptions { max_iters: a.max_iters, ..OptimizeOptions::default() };
            let res = optimize(&ansatz, &theta0, &target, &psi0, &cfg.state_policy(), &opts)?;
            let fidelity = 1.0 - res.final_cost();
            let mut trace = Table::new("aqc_cost_trace", &["iteration", "cost"]);
            for (i, c) in res.cost_trace.iter().enumerate() {
                trace.push(vec![i.to_string(), num(*c)]);
            }
            files.push(writer.table(&trace, &json!({ "stop": res.stop, "fidelity": fidelity }))?);
            let theta = json!({
                "theta": res.theta,
                "hamiltonian_seed": cfg.hamiltonian.seed,
                "t1": t1,
                "k_layers": a.k_layers,
                "fidelity": fidelity,
            });
            files.push(writer.json("aqc_theta", &theta)?);
            let mut compiled = psi0.clone();
            compiled.apply_circuit(&ansatz.circuit(&res.theta, t1)?, &cfg.state_policy())?;
            let summary = json!({
                "fidelity": fidelity,
                "initial_fidelity": 1.0 - res.cost_trace[0],
                "iterations": res.cost_trace.len() - 1,
                "stop": res.stop,
            });
            Ok((summary, compiled, fidelity))
        };
        let (summary, compiled, fidelity) = go().map_err(CliError::Runtime)?;
        if fidelity < a.fidelity_floor {
            return Err(CliError::Runtime(anyhow!(
                "aqc compilation fidelity {fidelity:.6} is below the floor {}",
                a.fidelity_floor
            )));
        }
        compile = summary;
        start = compiled;
    }

    let mut go = || -> Result<()> {
        let ks = if a.suffix_ks.is_empty() { cfg.k_list.clone() } else { a.suffix_ks.clone() };
        let grid = cfg.times()?;
        let window = if t1 > 0.0 { Some(aqc::window_circuit(&h, t1, &cfg.reference_spec())?) } else { None };
        let t2: Vec<f64> = grid.iter().filter(|&&t| if t1 > 0.0 { t > t1 + 1e-12 } else { true }).map(|t| t - t1).collect();
        if t2.is_empty() {
            return Err(anyhow!("t_grid has no time beyond aqc.t1 = {t1}"));
        }
        let s = setup(cfg, &ks, window)?;
        let runs = test_sweeps(cfg, &s, &t2)?;
        let plain = if t1 > 0.0 {
            let p = setup(cfg, &ks, None)?;
            let primary = if cfg.dense_enabled() { Backend::Dense } else { Backend::Mpo { policy: cfg.mpo_policy() } };
            run_sweep(&p, &grid, &primary, cfg.ridge)?.outcome
        } else {
            None
        };
        let table = tests_table("aqc_tests", &runs, &ks, t1);
        let results = json!({
            "t1": t1,
            "compile": compile,
            "paths": outcomes(&runs, t1),
            "plain_outcome": plain,
        });
        files.push(writer.table(&table, &results)?);
        if !cfg.observables.is_empty() {
            let coeff_run = runs.iter().find(|r| r.0 == "dense").unwrap_or(&runs[0]);
            let plain_setup = setup(cfg, &ks, None)?;
            let reference = reference_trajectory(&plain_setup, &grid, &cfg.reference_policy(), cfg.reference.dt)?;
            let track = ObservableTrack {
                cfg,
                start: start.clone(),
                ks: ks.clone(),
                times: t2.clone(),
                offset: t1,
                coeffs: coeff_run.1.points.iter().map(|p| p.dynamic.clone()).collect(),
            };
            let mut table = Table::new("aqc_observables", &OBSERVABLE_HEADER);
            let refs: Vec<(f64, MatrixProductState)> = grid.iter().copied().zip(reference).collect();
            observable_rows(&track, &mut table, &refs)?;
            files.push(writer.table(&table, &json!({ "coefficient_path": coeff_run.0, "t1": t1 }))?);
        }
        Ok(())
    };
    go().map_err(CliError::Runtime)?;
    Ok(files)
}

#[derive(Serialize)]
struct FitEntry {
    sweep: &'static str,
    threshold: f64,
    fit: Option<ScalingFit>,
    error: Option<String>,
}

fn fit_entry(sweep: &'static str, threshold: f64, samples: &[(f64, f64)], model: ScalingModel) -> FitEntry {
    match fit_scaling(samples, model) {
        Ok(fit) => FitEntry { sweep, threshold, fit: Some(fit), error: None },
        Err(e) => FitEntry { sweep, threshold, fit: None, error: Some(e.to_string()) },
    }
}

pub fn run_scaling(cfg: &ExperimentConfig, out: &PathBuf) -> Result<Vec<PathBuf>, CliError> {
    check(cfg, &[Role::Mpo], Vec::new())?;
    let go = || -> Result<Vec<PathBuf>> {
        let sc = &cfg.scaling;
        let s = setup(cfg, &cfg.k_list, None)?;
        let h = &s.hamiltonian;
        let mut table = Table::new("scaling", &["sweep", "threshold", "x", "chi"]);
        let mut fits = Vec::new();

        let state_cap = cfg.truncation.state.and_then(|t| t.max_bond);
        for &lambda in &sc.thresholds {
            let traj = reference_trajectory(&s, &sc.state_times, &TruncationPolicy::for_states(lambda, state_cap), cfg.reference.dt)?;
            let samples: Vec<(f64, f64)> = sc.state_times.iter().zip(&traj).map(|(&t, psi)| (t, psi.max_bond() as f64)).collect();
            for (x, chi) in &samples {
                table.push(vec!["state_vs_t".into(), num(lambda), num(*x), num(*chi)]);
            }
            fits.push(fit_entry("state_vs_t", lambda, &samples, ScalingModel::ExpInT));
        }

        let policy = cfg.mpo_policy();
        let reference_order = TrotterOrder::from_int(cfg.reference.order)?;
        let f_chi = |t: f64, k: usize, k0: usize| -> Result<f64> {
            let reference = ReferenceSpec { order: reference_order, k0 };
            let plan = InterleavePlan::new(reference.circuit(h, t)?, trotter_circuit(h, t, k, cfg.trotter_order())?);
            Ok(build_f(&plan, &policy)?.max_bond() as f64)
        };
        let k0_fixed = cfg.reference.k0_multiplier * sc.f_ks.iter().copied().max().unwrap_or(1);
        let by_k: Vec<(f64, f64)> = sc
            .f_ks
            .par_iter()
            .map(|&k| Ok((k as f64, f_chi(sc.f_time, k, k0_fixed)?)))
            .collect::<Result<_>>()?;
        for (x, chi) in &by_k {
            table.push(vec!["f_vs_k".into(), num(policy.rel_threshold), num(*x), num(*chi)]);
        }
        fits.push(fit_entry("f_vs_k", policy.rel_threshold, &by_k, ScalingModel::PowerInK { t: sc.f_time }));

        let by_t: Vec<(f64, f64)> = sc
            .dt_times
            .par_iter()
            .map(|&t| {
                let k = ((t / sc.fixed_dt).round() as usize).max(1);
                Ok((t, f_chi(t, k, cfg.reference.k0_multiplier * k)?))
            })
            .collect::<Result<_>>()?;
        for (x, chi) in &by_t {
            table.push(vec!["f_vs_t".into(), num(policy.rel_threshold), num(*x), num(*chi)]);
        }
        fits.push(fit_entry("f_vs_t", policy.rel_threshold, &by_t, ScalingModel::ExpInT));

        Ok(vec![Writer::new(out, "scaling", cfg)?.table(&table, &json!({ "fits": fits }))?])
    };
    go().map_err(CliError::Runtime)
}
