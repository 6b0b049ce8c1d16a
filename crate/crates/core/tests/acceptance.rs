//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (no libtest harness) so the report is printed
//! without `--nocapture`. A failing criterion is reported, not panicked on;
//! only infrastructure errors abort. Set `ACCEPTANCE_ONLY=AC1,AC4` to run a
//! subset.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tnmpf::estimator::estimate_stream;
use tnmpf::scaling::linear_fit;
use tnmpf::*;

struct Report {
    id: &'static str,
    pass: bool,
    detail: String,
}

/// Problems gathered from every sweep, re-checked by AC2.
#[derive(Default)]
struct Pool {
    problems: Vec<(String, MpfProblem, CoefficientSet)>,
}

impl Pool {
    fn add_sweep(&mut self, label: &str, sweep: &SweepResult) {
        for p in &sweep.points {
            self.problems.push((format!("{label} t={:.2}", p.t), p.problem.clone(), p.dynamic.clone()));
        }
    }
}

fn neel_setup(h: HamiltonianSpec, k_list: Vec<usize>, probe_ks: Vec<usize>) -> MpfSetup {
    let l = h.n_sites;
    let all: Vec<usize> = k_list.iter().chain(&probe_ks).copied().collect();
    MpfSetup {
        reference: ReferenceSpec::default_for(&all, TrotterOrder::Second),
        initial: MatrixProductState::neel(l).unwrap(),
        hamiltonian: h,
        k_list,
        order: TrotterOrder::Second,
        probe_ks,
        window: None,
    }
}

fn heisenberg(l: usize) -> HamiltonianSpec {
    build_hamiltonian(ModelKind::UniformHeisenberg, l, 0).unwrap()
}

fn disordered(l: usize) -> HamiltonianSpec {
    build_hamiltonian(ModelKind::DisorderedXxz, l, 7).unwrap()
}

fn ac1(pool: &mut Pool) -> Report {
    let setup = neel_setup(heisenberg(8), vec![2, 3], vec![]);
    let times = [0.25, 0.5, 1.0];
    let mpo = run_sweep(&setup, &times, &Backend::Mpo { policy: TruncationPolicy::for_operators(1e-12, None) }, 1e-12).unwrap();
    let dense = run_sweep(&setup, &times, &Backend::Dense, 1e-12).unwrap();
    let mut worst: f64 = 0.0;
    for (a, b) in mpo.points.iter().zip(&dense.points) {
        for (x, y) in a.problem.m.iter().chain(&a.problem.l).zip(b.problem.m.iter().chain(&b.problem.l)) {
            worst = worst.max((x - y).abs());
        }
    }
    pool.add_sweep("AC1 mpo", &mpo);
    pool.add_sweep("AC1 dense", &dense);
    Report { id: "AC1", pass: worst <= 1e-8, detail: format!("max |MPO - dense| over M and L = {worst:.2e} (tol 1e-8)") }
}

fn ac2(pool: &Pool) -> Report {
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_sum: f64 = 0.0;
    let mut worst_label = String::new();
    for (label, p, c) in &pool.problems {
        let e_d = p.cost(&c.c);
        let best = (0..p.rank()).map(|j| trotter_error(p, j)).fold(f64::INFINITY, f64::min);
        if e_d - best > worst_gap {
            worst_gap = e_d - best;
            worst_label = label.clone();
        }
        worst_sum = worst_sum.max((c.c.iter().sum::<f64>() - 1.0).abs());
    }
    Report {
        id: "AC2",
        pass: !pool.problems.is_empty() && worst_gap <= 1e-10 && worst_sum <= 1e-12,
        detail: format!(
            "{} problems; max(E_D - min E_k) = {worst_gap:.2e} at {worst_label}; max |sum c - 1| = {worst_sum:.1e}",
            pool.problems.len()
        ),
    }
}

/// `c_1 + c_2 = 1`, `c_1 / k_1^2 + c_2 / k_2^2 = 0` by Cramer's rule.
fn two_term_oracle(k1: f64, k2: f64) -> [f64; 2] {
    let (a, b) = (k1.powi(-2), k2.powi(-2));
    let det = b - a;
    [b / det, -a / det]
}

fn ac3() -> Report {
    let mut worst: f64 = 0.0;
    for (ks, expect) in [([1usize, 2], [-1.0 / 3.0, 4.0 / 3.0]), ([14, 18], [-49.0 / 32.0, 81.0 / 32.0])] {
        let got = static_coefficients(&ks, 2).unwrap().c;
        let oracle = two_term_oracle(ks[0] as f64, ks[1] as f64);
        for i in 0..2 {
            worst = worst.max((got[i] - expect[i]).abs()).max((oracle[i] - expect[i]).abs());
        }
    }
    Report { id: "AC3", pass: worst <= 1e-12, detail: format!("max deviation from (-1/3, 4/3), (-49/32, 81/32) = {worst:.1e}") }
}

fn ac4() -> Report {
    let ks = vec![2, 4, 8, 16];
    let mut setup = neel_setup(heisenberg(8), ks.clone(), vec![]);
    setup.reference = ReferenceSpec { order: TrotterOrder::Fourth, k0: 256 };
    let sweep = run_sweep(&setup, &[0.5], &Backend::Dense, 1e-12).unwrap();
    let errs = &sweep.points[0].trotter_errors;
    let x: Vec<f64> = ks.iter().map(|&k| (k as f64).ln()).collect();
    let y: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let slope = linear_fit(&x, &y).unwrap().1;
    Report {
        id: "AC4",
        pass: (slope + 4.0).abs() <= 0.3,
        detail: format!("log-log slope of E_k vs k = {slope:.3} (target -4 +/- 0.3); E_k = {errs:?}"),
    }
}

fn ac5(pool: &mut Pool) -> Report {
    let setup = neel_setup(disordered(20), vec![2, 3, 4], vec![6]);
    let times = time_grid(0.1, 8.0, 0.1).unwrap();
    let opts = SweepOptions { ridge: 1e-12, stop_after_failure: true };
    let clock = Instant::now();
    let run = |backend: &Backend, tag: &str| {
        run_sweep_with(&setup, &times, backend, &opts, |p| {
            eprintln!(
                "  AC5 {tag} t={:.1} E_D={:.3e} E_k={:?} E_6={:.3e} [{:.0?}]",
                p.t,
                p.error_d(),
                p.trotter_errors,
                p.probe_errors[0],
                clock.elapsed()
            )
        })
        .unwrap()
    };
    let mps = run(&Backend::Mps { policy: TruncationPolicy::for_states(1e-10, Some(256)), reference_dt: 0.025 }, "mps");
    let mpo = run(&Backend::Mpo { policy: TruncationPolicy::for_operators(1e-8, Some(50)) }, "mpo");
    pool.add_sweep("AC5 mps", &mps);
    pool.add_sweep("AC5 mpo", &mpo);
    let (a, b) = (mps.outcome.clone().unwrap(), mpo.outcome.clone().unwrap());
    let agree = match (a.trotter_crossover, b.trotter_crossover) {
        (Some(x), Some(y)) => (x - y).abs() <= 0.1 + 1e-9,
        _ => false,
    };
    let ordered = |o: &TestOutcome| matches!((o.mpf_cutoff, o.trotter_crossover), (Some(m), Some(t)) if m < t);
    let chi_mpo = mpo.points.iter().map(|p| p.problem.provenance.max_bond_seen().unwrap_or(0)).max().unwrap_or(0);
    Report {
        id: "AC5",
        pass: agree && ordered(&a) && ordered(&b) && chi_mpo <= 50,
        detail: format!(
            "MPS path: trotter crossover {:?}, MPF cutoff {:?}; MPO path (chi <= {chi_mpo}): trotter crossover {:?}, MPF cutoff {:?}; paths agree within 0.1: {agree}",
            a.trotter_crossover.map(r3),
            a.mpf_cutoff.map(r3),
            b.trotter_crossover.map(r3),
            b.mpf_cutoff.map(r3)
        ),
    }
}

fn r3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

fn ac6(pool: &mut Pool) -> Report {
    let setup = neel_setup(heisenberg(12), vec![6, 8], vec![]);
    let times = time_grid(0.1, 4.0, 0.1).unwrap();
    // Exact MPS at L=12 needs chi = 64; the MPO gets half of it.
    let dense = run_sweep(&setup, &times, &Backend::Dense, 1e-12).unwrap();
    let mpo = run_sweep(&setup, &times, &Backend::Mpo { policy: TruncationPolicy::for_operators(1e-12, Some(32)) }, 1e-12).unwrap();
    pool.add_sweep("AC6 dense", &dense);
    pool.add_sweep("AC6 mpo", &mpo);
    let mut violations = Vec::new();
    let mut max_norm: f64 = 0.0;
    for (d, m) in dense.points.iter().zip(&mpo.points) {
        let e = cross_validated_error(&m.dynamic, &d.problem).unwrap();
        if e > d.trotter_errors[1] {
            violations.push(d.t);
        }
        max_norm = max_norm.max(m.dynamic.one_norm);
    }
    Report {
        id: "AC6",
        pass: violations.is_empty() && max_norm < 4.5,
        detail: format!(
            "{} grid times, E_MPO-MPF > E_8 at {violations:?}; max one-norm {max_norm:.3} (< 4.5)",
            times.len()
        ),
    }
}

fn ac7(pool: &mut Pool) -> Report {
    // Well-conditioned exact problems: lambda_min(M) exceeds every epsilon,
    // so each perturbed quadratic stays bounded below.
    let h = heisenberg(8);
    let obs = ObservableSpec::z(3);
    let cases: Vec<(MpfProblem, Vec<f64>, f64)> = [(vec![1, 2], 2.0), (vec![1, 3], 2.0), (vec![1, 2], 3.0), (vec![1, 2, 3], 4.0)]
        .into_iter()
        .map(|(ks, t)| {
            let setup = neel_setup(h.clone(), ks.clone(), vec![]);
            let p = run_sweep(&setup, &[t], &Backend::Dense, 0.0).unwrap().points.remove(0);
            let start = StateVector::from_mps(&setup.initial).unwrap();
            let expect = |c: &TimedCircuit| {
                let mut v = start.clone();
                v.apply_circuit(c).unwrap();
                v.expectation(&obs).unwrap()
            };
            let o: Vec<f64> = ks.iter().map(|&k| expect(&trotter_circuit(&h, t, k, TrotterOrder::Second).unwrap())).collect();
            let star = expect(&setup.reference.circuit(&h, t).unwrap());
            pool.problems.push((format!("AC7 k={ks:?} t={t}"), p.problem.clone(), p.dynamic.clone()));
            (p.problem, o, star)
        })
        .collect();
    let mut trials = 0;
    let (mut coeff_fail, mut obs_fail) = (0, 0);
    let mut max_ratio: f64 = 0.0;
    // Supplementary: the bound the argument actually supports,
    // ||M^-1|| eps (1 + ||c*||) / (1 - ||M^-1|| eps).
    let mut sound_fail = 0;
    for &eps in &[1e-2, 1e-3, 1e-4] {
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (exact, o, star) = &cases[seed as usize % cases.len()];
            let r = exact.rank();
            let mut dm = vec![0.0; r * r];
            for i in 0..r {
                for j in i + 1..r {
                    let v = rng.random_range(-1.0..1.0);
                    dm[i * r + j] = v;
                    dm[j * r + i] = v;
                }
            }
            let dl: Vec<f64> = (0..r).map(|_| rng.random_range(-1.0..1.0)).collect();
            // Scale so the larger of the two perturbation norms is eps.
            let dm_norm = spectral_norm(&dm, r);
            let dl_norm = dl.iter().map(|x| x * x).sum::<f64>().sqrt();
            let s = eps / dm_norm.max(dl_norm);
            let m: Vec<f64> = exact.m.iter().zip(&dm).map(|(a, b)| a + s * b).collect();
            let l: Vec<f64> = exact.l.iter().zip(&dl).map(|(a, b)| a + s * b).collect();
            let perturbed = MpfProblem::new(exact.k_list.clone(), 2, exact.t, m, l, Provenance::Dense).unwrap();
            let chk = lemma_bound_check(exact, &perturbed, o, *star).unwrap();
            trials += 1;
            coeff_fail += usize::from(!chk.applicable || !chk.coefficient_bound_holds());
            obs_fail += usize::from(!chk.applicable || !chk.observable_bound_holds());
            let c_star = dynamic_coefficients(exact, 0.0).unwrap().c;
            let c_norm = c_star.iter().map(|x| x * x).sum::<f64>().sqrt();
            let amp = chk.inv_norm * chk.epsilon;
            sound_fail += usize::from(!(amp < 1.0 && chk.lhs <= amp * (1.0 + c_norm) / (1.0 - amp)));
            max_ratio = max_ratio.max(chk.lhs / chk.rhs).max(chk.obs_lhs / chk.obs_rhs);
        }
    }
    Report {
        id: "AC7",
        pass: coeff_fail == 0 && obs_fail == 0,
        detail: format!(
            "{trials} trials; coefficient bound violated {coeff_fail}x, observable bound {obs_fail}x, max lhs/rhs {max_ratio:.3}; \
             ||M^-1|| eps (1 + ||c*||) / (1 - ||M^-1|| eps) violated {sound_fail}x"
        ),
    }
}

/// Spectral norm of a small symmetric matrix by power iteration on `A^2`.
fn spectral_norm(a: &[f64], r: usize) -> f64 {
    let mut v = vec![1.0; r];
    let mut lam = 0.0;
    for _ in 0..500 {
        let w: Vec<f64> = (0..r).map(|i| (0..r).map(|j| a[i * r + j] * v[j]).sum()).collect();
        let w2: Vec<f64> = (0..r).map(|i| (0..r).map(|j| a[i * r + j] * w[j]).sum()).collect();
        let n = w2.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            return 0.0;
        }
        lam = n.sqrt();
        v = w2.iter().map(|x| x / n).collect();
    }
    lam
}

fn ac8() -> Report {
    let mut worst: f64 = 0.0;
    let exp_samples: Vec<(f64, f64)> = (0..12).map(|i| 0.5 * i as f64).map(|t| (t, 2.5 * (0.8 * t).exp())).collect();
    let fit = fit_scaling(&exp_samples, ScalingModel::ExpInT).unwrap();
    worst = worst.max((fit.rate - 0.8).abs()).max((fit.prefactor - 2.5).abs());
    let (t, g, v1, alpha): (f64, f64, f64, f64) = (4.0, 3.0, 0.02, 4.7);
    let pow_samples: Vec<(f64, f64)> = [8.0f64, 12.0, 16.0, 24.0, 32.0, 48.0, 64.0]
        .iter()
        .map(|&k| (k, g * (v1 * t.powf(alpha) / k.powf(alpha - 1.0)).exp()))
        .collect();
    let fit = fit_scaling(&pow_samples, ScalingModel::PowerInK { t }).unwrap();
    worst = worst
        .max((fit.rate - v1).abs())
        .max((fit.prefactor - g).abs())
        .max((fit.alpha.unwrap() - alpha).abs());
    let synthetic_ok = worst <= 1e-6;

    let h = disordered(20);
    let reference = ReferenceSpec { order: TrotterOrder::Fourth, k0: 40 }.circuit(&h, t).unwrap();
    let policy = TruncationPolicy::for_operators(1e-6, None);
    let samples: Vec<(f64, f64)> = [8usize, 12, 16, 24, 32, 48, 64]
        .iter()
        .map(|&k| {
            let plan = InterleavePlan::new(reference.clone(), trotter_circuit(&h, t, k, TrotterOrder::Second).unwrap());
            let chi = build_f(&plan, &policy).unwrap().max_bond();
            eprintln!("  AC8 k={k} chi={chi}");
            (k as f64, chi as f64)
        })
        .collect();
    let measured = fit_scaling(&samples, ScalingModel::PowerInK { t }).unwrap();
    let slope = measured.loglog_slope;
    let slope_ok = slope.is_some_and(|s| (-6.0..=-2.0).contains(&s));
    let chis: Vec<f64> = samples.iter().map(|s| s.1).collect();
    Report {
        id: "AC8",
        pass: synthetic_ok && slope_ok,
        detail: format!(
            "synthetic max error {worst:.1e}; L=20 t=4 chi(k=8..64) = {chis:?}, loglog slope {slope:.3?} (target [-6, -2]), fitted alpha {:.3?}",
            measured.alpha
        ),
    }
}

fn ac9(pool: &mut Pool) -> Report {
    let mut smart_worst: f64 = 0.0;
    let exact = TruncationPolicy::exact();
    for (l, t1, layers) in [(8usize, 0.5, 2usize), (12, 1.0, 2), (8, 1.0, 3)] {
        let h = disordered(l);
        let ansatz = build_ansatz(&h, layers).unwrap();
        let theta = smart_init(&ansatz, &h, t1).unwrap();
        let psi0 = MatrixProductState::neel(l).unwrap();
        let mut target = psi0.clone();
        target.apply_circuit(&trotter_circuit(&h, t1, layers, TrotterOrder::Second).unwrap(), &exact).unwrap();
        smart_worst = smart_worst.max(aqc::cost(&theta, &ansatz, &target, &psi0, &exact).unwrap());
    }

    let h = disordered(12);
    let t1 = 1.0;
    let psi0 = MatrixProductState::neel(12).unwrap();
    let mut target = psi0.clone();
    target.apply_circuit(&ReferenceSpec { order: TrotterOrder::Fourth, k0: 40 }.circuit(&h, t1).unwrap(), &exact).unwrap();
    let ansatz = build_ansatz(&h, 2).unwrap();
    let theta0 = smart_init(&ansatz, &h, t1).unwrap();
    let opt = optimize(&ansatz, &theta0, &target, &psi0, &exact, &OptimizeOptions::default()).unwrap();
    let fidelity = 1.0 - opt.final_cost();

    let times = time_grid(0.1, 8.0, 0.1).unwrap();
    let opts = SweepOptions { ridge: 1e-12, stop_after_failure: true };
    let plain_setup = neel_setup(h.clone(), vec![2, 3, 4], vec![6]);
    let plain = run_sweep_with(&plain_setup, &times, &Backend::Dense, &opts, |_| {}).unwrap();
    let plain_last = plain.outcome.as_ref().unwrap().mpf_last_passing.unwrap_or(0.0);
    let mut aqc_setup = plain_setup.clone();
    aqc_setup.window = Some(aqc::window_circuit(&h, t1, &aqc_setup.reference).unwrap());
    let t2: Vec<f64> = times.iter().filter(|&&t| t > t1 + 1e-9).map(|t| t - t1).collect();
    let windowed = run_sweep_with(&aqc_setup, &t2, &Backend::Dense, &opts, |_| {}).unwrap();
    let aqc_last = t1 + windowed.outcome.as_ref().unwrap().mpf_last_passing.unwrap_or(0.0);
    pool.add_sweep("AC9 plain", &plain);
    pool.add_sweep("AC9 aqc", &windowed);
    Report {
        id: "AC9",
        pass: smart_worst < 1e-10 && fidelity >= 0.99 && aqc_last + 1e-9 >= plain_last,
        detail: format!(
            "smart-init cost max {smart_worst:.1e}; L=12 t1=1 fidelity {fidelity:.6} ({:?}, {} iters, from {:.6}); MPF-test last passing: plain {plain_last:.1}, AQC window {aqc_last:.1}",
            opt.stop,
            opt.cost_trace.len() - 1,
            1.0 - opt.cost_trace[0]
        ),
    }
}

fn ac10() -> Report {
    let h = heisenberg(8);
    let t = 1.0;
    let obs = ObservableSpec::z(4);
    let ks = [2usize, 3, 4];
    let states: Vec<MatrixProductState> = ks
        .iter()
        .map(|&k| {
            let mut psi = MatrixProductState::neel(8).unwrap();
            psi.apply_circuit(&trotter_circuit(&h, t, k, TrotterOrder::Second).unwrap(), &TruncationPolicy::exact()).unwrap();
            psi
        })
        .collect();
    let exact: Vec<f64> = states.iter().map(|s| s.expectation(&obs).unwrap()).collect();

    let covered = (0..100u64)
        .filter(|&seed| {
            let e = estimate(&states[0], &obs, Shots::Count(10_000), seed).unwrap();
            (e.value - exact[0]).abs() <= 5.0 * e.std_error
        })
        .count();

    let setup = neel_setup(h, ks.to_vec(), vec![]);
    let coeffs = run_sweep(&setup, &[t], &Backend::Dense, 1e-12).unwrap().points.remove(0).dynamic;
    let n = 1000u64;
    let mut values = Vec::new();
    let mut reported = 0.0;
    for seed in 0..n {
        let estimates: Vec<EstimateResult> = states
            .iter()
            .enumerate()
            .map(|(i, s)| estimate_stream(s, &obs, Shots::Count(10_000), seed, i as u64).unwrap())
            .collect();
        let c = mpf_combine(&coeffs, &estimates).unwrap();
        values.push(c.value);
        reported += c.std_error / n as f64;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let empirical = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let rel = (reported - empirical).abs() / empirical;
    Report {
        id: "AC10",
        pass: covered >= 99 && rel <= 0.1,
        detail: format!(
            "5-SE coverage {covered}/100; combined SE reported {reported:.3e} vs resampled {empirical:.3e} (rel diff {rel:.3})"
        ),
    }
}

fn main() {
    let only: Option<Vec<String>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').map(|x| x.trim().to_uppercase()).collect());
    let wanted = |id: &str| only.as_ref().is_none_or(|o| o.iter().any(|x| x == id));
    let mut pool = Pool::default();
    let mut reports = Vec::new();
    let mut run = |id: &'static str, f: &mut dyn FnMut(&mut Pool) -> Report| {
        if !wanted(id) {
            return;
        }
        let start = Instant::now();
        let r = f(&mut pool);
        eprintln!("{} {}: {} [{:.1?}]", r.id, if r.pass { "PASS" } else { "FAIL" }, r.detail, start.elapsed());
        reports.push(r);
    };
    run("AC1", &mut ac1);
    run("AC3", &mut |_| ac3());
    run("AC4", &mut |_| ac4());
    run("AC7", &mut ac7);
    run("AC10", &mut |_| ac10());
    run("AC6", &mut ac6);
    run("AC9", &mut ac9);
    run("AC8", &mut |_| ac8());
    run("AC5", &mut ac5);
    if wanted("AC2") {
        reports.push(ac2(&pool));
    }
    reports.sort_by_key(|r| r.id[2..].parse::<u32>().unwrap_or(0));
    println!("acceptance report");
    for r in &reports {
        println!("{} {}: {}", r.id, if r.pass { "PASS" } else { "FAIL" }, r.detail);
    }
}
