//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test --release -p cqs-core --test acceptance`.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::time::Instant;

use cqs_core::born::{born_grain_experiment, BornGrainConfig};
use cqs_core::control::*;
use cqs_core::fock::{car_deviation, intertwine_check, LevelPairing};
use cqs_core::fourier::{circuit_matrix, factor, functional_gate_count, pow_mod, qft_circuit, qft_matrix, QftCircuitSpec};
use cqs_core::grid::*;
use cqs_core::qec::*;
use cqs_core::rng::{rng_from_seed, sub_rng};
use cqs_core::search::*;
use cqs_core::selection::{association_experiment, AssociationParams, PairPotential, SelectionConfig};
use cqs_core::statevec::{c, C64};
use cqs_core::stats::slope;
use cqs_core::swarm::*;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

struct Report {
    failed: Vec<&'static str>,
}

impl Report {
    fn line(&mut self, name: &'static str, pass: bool, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(name);
        }
    }
}

fn grover(r: &mut Report) {
    let t = Instant::now();
    let oracle = BooleanOracle::from_solutions(10, &[613]);
    let iters = grover_iterations(10, 1);
    let p = success_probability(&grover_state(&oracle, iters), &oracle);
    let secs = t.elapsed().as_secs_f64();
    r.line("grover", iters == 25 && p >= 0.99 && secs < 1.0, format!("t={iters} success={p:.6} time={secs:.3}s"));

    let sols = [3, 200, 511, 1000];
    let oracle = BooleanOracle::from_solutions(10, &sols);
    let iters = grover_iterations(10, 4);
    let p = success_probability(&grover_state(&oracle, iters), &oracle);
    r.line("grover-multi", iters == 12 && p >= 0.99, format!("l=4 t={iters} success={p:.6}"));
}

fn generalized(r: &mut Report) {
    let inst = extra_group_instance(1 << 12, 4, 16, FRAC_PI_2);
    let p = generalized_search(&inst).final_probability();
    let errors: Vec<f64> =
        [10, 12, 14].iter().map(|&k| 1.0 - generalized_search(&extra_group_instance(1 << k, 4, 16, FRAC_PI_2)).final_probability()).collect();
    let monotone = errors.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    // Explicit G against the recursion polynomial, on an instance small enough
    // for a dense eigen-solve of the full 2^k matrix to stay cheap.
    let small = GeneralizedSearchInstance::new(vec![50, 3, 5, 6], vec![0.9, 1.7]).unwrap();
    let mut ev = eigenvalues(&build_generalized_operator(&small));
    let roots = char_poly_roots(&small);
    let root_err = ev
        .drain(..)
        .map(|e| roots.iter().map(|z| (z - e).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let gamma = gamma_ratio(&inst);
    r.line(
        "generalized-search",
        p >= 0.95 && monotone && root_err < 1e-9 && gamma < 0.3,
        format!("p(N=4096)={p:.5} errors(2^10,2^12,2^14)={errors:.3?} root_err={root_err:.2e} gamma_ratio={gamma:.3}"),
    );
}

fn qft(r: &mut Report) {
    let mut worst: f64 = 0.0;
    let mut counts_ok = true;
    for n in 1..=8 {
        let circ = qft_circuit(QftCircuitSpec::exact(n));
        let dev = (circuit_matrix(n, &circ) - qft_matrix(n, 1.0)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        worst = worst.max(dev);
        counts_ok &= functional_gate_count(&circ) == n + n * (n - 1) / 2;
    }
    r.line("qft", worst < 1e-10 && counts_ok, format!("max_dev(n<=8)={worst:.2e} gate_counts_ok={counts_ok}"));
}

fn shor(r: &mut Report) {
    let t = Instant::now();
    let mut detail = String::new();
    let mut pass = true;
    for q in [15u64, 21, 33] {
        let mut ok = 0;
        for seed in 0..50 {
            if let Ok(f) = factor(q, &mut sub_rng(q, seed)) {
                let verified = f.order.is_none_or(|ord| pow_mod(f.base, ord, q) == 1);
                if f.divisor > 1 && f.divisor < q && q % f.divisor == 0 && verified {
                    ok += 1;
                }
            }
        }
        pass &= ok * 100 >= 95 * 50;
        detail.push_str(&format!("q={q}:{ok}/50 "));
    }
    let secs = t.elapsed().as_secs_f64();
    r.line("shor", pass && secs < 10.0, format!("{detail}time={secs:.2}s"));
}

fn control(r: &mut Report) {
    let cnot = synthesize_cnot([0.0, 0.0, 0.0, 1.0], 1e-3).unwrap();
    let det = qft_via_continuous(3, Some(CompensationMode::Deterministic)).unwrap().distance;
    let poisson_good = (0..20u64)
        .filter(|&seed| qft_via_continuous(3, Some(CompensationMode::Poisson { flips_per_stage: 1000.0, seed })).unwrap().distance < 1e-2)
        .count();
    let g = InteractionGraph::yukawa_line(3);
    let (mut xs, mut ys) = (vec![], vec![]);
    for lambda in [10.0, 100.0, 1000.0, 10000.0] {
        let ticks = default_random_ticks(1.0, lambda);
        let mean = (0..40).map(|s| compensate_random(&g, (0, 2), 1.0, lambda, ticks, s).unwrap().residual).sum::<f64>() / 40.0;
        xs.push((ticks as f64).ln());
        ys.push(mean.ln());
    }
    let s = slope(&xs, &ys);
    r.line(
        "control",
        cnot.distance < 5e-3 && det < 1e-6 && poisson_good >= 18 && (s + 0.5).abs() <= 0.15,
        format!("cnot_dist={:.2e} (n={}) qft3_det={det:.2e} poisson={poisson_good}/20 slope={s:.3}", cnot.distance, cnot.repetitions),
    );
}

fn fock(r: &mut Report) {
    let car: f64 = (1..=5).map(car_deviation).fold(0.0, f64::max);
    let mut rng = rng_from_seed(1);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let mut x = || rng.random_range(-1.0..1.0);
        let off = c(x(), x());
        let h = DMatrix::from_row_slice(2, 2, &[c(x(), 0.0), off, off.conj(), c(x(), 0.0)]);
        for q in 0..3 {
            worst = worst.max(intertwine_check(&h, &LevelPairing::nested(3), q).unwrap());
        }
    }
    r.line("fock", car == 0.0 && worst < 1e-10, format!("car_dev(J<=5)={car:e} intertwine_max={worst:.2e}"));
}

fn qec(r: &mut Report) {
    let u = build_recovery().unwrap();
    let mut worst: f64 = 0.0;
    for trial in 0..1000u64 {
        let mut rng = sub_rng(77, trial);
        let (a, b) = (c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)), c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        let code = encode(a / n, b / n).unwrap();
        let j = rng.random_range(0..3);
        let (_, hit) = inject_measurement_error(&code, j, &mut rng).unwrap();
        let (_, fixed) = correction_cycle(&hit, &u, &mut rng).unwrap();
        worst = worst.max((fixed.fidelity() - 1.0).abs());
    }
    let gram = gram_mismatch();
    let (a, b): (C64, C64) = (c(0.6, 0.0), c(0.0, 0.8));
    let cycles = run_cycles(a, b, 100, 0.3, &mut rng_from_seed(8)).unwrap();
    let cyc = (cycles.last().unwrap().fidelity - 1.0).abs();
    r.line("qec", worst < 1e-12 && gram < 1e-12 && cyc < 1e-9, format!("single_error_worst={worst:.2e} gram={gram:.2e} cycles100={cyc:.2e}"));
}

fn dense_propagator(m: usize, dx: f64, v: &[f64], t: f64) -> DMatrix<C64> {
    let s = 1.0 / (m as f64).sqrt();
    let f = DMatrix::from_fn(m, m, |b, a| C64::from_polar(s, -2.0 * PI * ((a * b) % m) as f64 / m as f64));
    let k = wave_numbers(m, dx);
    let kin = f.adjoint() * DMatrix::from_diagonal(&DVector::from_iterator(m, k.iter().map(|k| c(k * k / 2.0, 0.0)))) * &f;
    let h = kin + DMatrix::from_diagonal(&DVector::from_iterator(m, v.iter().map(|&x| c(x, 0.0))));
    let eig = nalgebra::SymmetricEigen::new(h);
    let ph = DVector::from_iterator(m, eig.eigenvalues.iter().map(|&e| C64::from_polar(1.0, -e * t)));
    &eig.eigenvectors * DMatrix::from_diagonal(&ph) * eig.eigenvectors.adjoint()
}

fn grid(r: &mut Report) {
    let (m, dx) = (101, 0.01);
    let lim = explicit_stability_limit(dx, 1.0);
    let u = highest_sine_mode(m, dx).unwrap();
    let bc = Dirichlet { left: 0.0, right: 0.0 };
    let run = |f: f64| heat_explicit(&u, 1.0, f * lim, bc, 500).unwrap();
    let (below, above) = (run(0.99), run(1.01));
    let flags = !run(0.999).unstable && run(1.001).unstable;
    let detected = flags && !below.unstable && above.unstable && max_abs(&above.field) > 10.0 && max_abs(&below.field) < 1.0;

    let (m, dx) = (64, 0.25);
    let psi = gaussian_packet(m, dx, -8.0, 1.0, 0.7, 0.5).unwrap();
    let v: Vec<f64> = psi.xs().iter().map(|x| 0.5 * x * x).collect();
    let exact = dense_propagator(m, dx, &v, 1.0) * DVector::from_vec(psi.values.clone());
    let err = |dt: f64| {
        let out = split_step(&psi, &SplitStepParams::new(1.0, dt, v.clone()), (1.0 / dt).round() as usize).unwrap();
        (DVector::from_vec(out.values) - &exact).norm()
    };
    let ratio = err(0.1) / err(0.05);

    let g = harmonic_ground_state(256, 0.1, -12.8, 1.0, 1.0, 1.0).unwrap();
    let vg: Vec<f64> = g.xs().iter().map(|x| 0.5 * x * x).collect();
    let auto = g.inner(&split_step(&g, &SplitStepParams::new(1.0, 0.01, vg), 1000).unwrap()).norm();

    let kernel_err = [-3.0, -0.2, 0.0, 1.1, 7.5]
        .iter()
        .map(|&x| (free_kernel(x, 0.7, 2.0, 1.0).unwrap().norm_sqr() / (2.0 / (2.0 * PI * 0.7)) - 1.0).abs())
        .fold(0.0, f64::max);
    r.line(
        "grid",
        detected && (ratio / 4.0 - 1.0).abs() <= 0.2 && auto >= 1.0 - 1e-6 && kernel_err < 1e-14,
        format!("instability_detected={detected} trotter_ratio={ratio:.3} autocorr={auto:.9} kernel_rel_err={kernel_err:.1e}"),
    );
}

fn dmc(r: &mut Report) {
    let t = Instant::now();
    let p = DmcParams { mass: 1.0, hbar: 1.0, step: 0.1, p: 0.25, samples: 100_000, steps: 2000, burn_in: 0.5 };
    let res = dmc_run(&Potential::harmonic(1.0, 1.0), &p, Bins { origin: -5.0, width: 0.1, count: 100 }, 7).unwrap();
    let secs = t.elapsed().as_secs_f64();
    r.line("dmc", (res.width - 1.0).abs() < 0.05 && secs < 30.0, format!("width={:.4} (analytic 1) time={secs:.1}s", res.width));
}

fn dds(r: &mut Report) {
    let pot = Potential::harmonic(1.0, 1.0);
    let p = SwarmParams::calibrated(1, 1.0, 1.0, 0.1, DEFAULT_D, 1.0);
    let bins = Bins { origin: -3.0, width: 0.1, count: 60 };
    let mut sw = gaussian_1d(p.clone(), 100_000, 0.0, 0.5f64.sqrt(), 3).unwrap();
    let h0 = histogram(&sw, bins, 0);
    dds_run(&mut sw, &pot, 0.005, 800, 10);
    let drift = l1_distance(&h0, &histogram(&sw, bins, 0), 0.1) / l1_distance(&h0, &[0.0; 60], 0.1);

    let mut rng = rng_from_seed(4);
    let mut exact_momentum = true;
    for _ in 0..10_000 {
        let dir = rng.random_range(-1i8..=1);
        let a = Sample { id: 0, x: [0.0, 0.0], axis: rng.random_range(0..2), dir };
        let b = Sample { id: 1, x: [0.01, 0.0], axis: a.axis, dir: -dir };
        let (a2, b2) = exchange(&a, &b, 0.1, 2, &mut rng).unwrap();
        let sum = |s: &Sample, t: &Sample| [s.velocity(1.0)[0] + t.velocity(1.0)[0], s.velocity(1.0)[1] + t.velocity(1.0)[1]];
        exact_momentum &= sum(&a, &b) == sum(&a2, &b2);
    }

    let sigma0 = 0.5;
    let dt = 0.0025;
    let pf = SwarmParams::calibrated(1, 1.0, 1.0, 0.05, DEFAULT_D, SQRT_2 * sigma0).with_adaptive(true);
    let psi0 = gaussian_packet(1024, 0.02, -10.24, 0.0, sigma0, 0.0).unwrap();
    let psi = split_step(&psi0, &SplitStepParams::new(1.0, dt, vec![0.0; 1024]), 200).unwrap();
    let reference: Vec<f64> = (0..60)
        .map(|i| {
            let lo = 362 + 5 * i;
            let f = |j: usize| psi.values[j].norm_sqr();
            0.02 * (0.5 * f(lo) + (lo + 1..lo + 5).map(f).sum::<f64>() + 0.5 * f(lo + 5)) / 0.1
        })
        .collect();
    let l1: Vec<f64> = [10_000, 100_000, 1_000_000]
        .iter()
        .map(|&n| {
            let mut sw = gaussian_1d(pf.clone(), n, 0.0, sigma0, 5).unwrap();
            dds_run(&mut sw, &Potential::free(), dt, 200, 9);
            l1_distance(&histogram(&sw, bins, 0), &reference, 0.1)
        })
        .collect();
    let trend = l1[0] > l1[1] && l1[1] > l1[2];

    let coarse = Bins { origin: -2.5, width: 0.25, count: 20 };
    let mut sw = gaussian_1d(p.clone(), 1_000_000, 0.0, 0.4, 5).unwrap();
    let a = histogram(&sw, coarse, 0);
    dds_run(&mut sw, &pot, 0.005, 20, 1);
    let b = histogram(&sw, coarse, 0);
    dds_run(&mut sw, &pot, 0.005, 20, 2);
    let cc = histogram(&sw, coarse, 0);
    let resid = swarm_equation_residual(&a, &b, &cc, 0.1, coarse, p.intensity(), p.kappa(), &pot);
    r.line(
        "dds",
        drift < 0.1 && exact_momentum && trend && resid < 0.3,
        format!("drift={drift:.4} exchange_momentum_exact={exact_momentum} l1(1e4,1e5,1e6)={l1:.4?} residual={resid:.3}"),
    );
}

fn bridge(r: &mut Report) {
    let p = SwarmParams::calibrated(1, 1.0, 1.0, 0.1, 0.2, SQRT_2);
    let psi = gaussian_packet(60, 0.1, -2.95, 0.0, 1.0, 0.5).unwrap();
    let sw = swarm_from_wavefunction(&psi, 100_000, p, 4).unwrap();
    let back = wavefunction_from_swarm(&sw, &CellGrid::line(-3.0, 60, 0.1), 30, psi.values[30].arg()).unwrap();
    let l2 = (back.iter().zip(&psi.values).map(|(a, z)| (a - z).norm_sqr()).sum::<f64>() * 0.1).sqrt();

    let mut p2 = SwarmParams::calibrated(2, 1.0, 1.0, 0.2, 0.2, 1.0);
    p2.periodic = Some(PeriodicBox { lo: [0.0, 0.0], hi: [4.0, 4.0] });
    let mut rng = rng_from_seed(3);
    let pos: Vec<[f64; 2]> = (0..200_000).map(|_| [rng.random::<f64>() * 4.0, rng.random::<f64>() * 4.0]).collect();
    let mut sw = Swarm::new(p2.clone(), &pos).unwrap();
    for s in sw.samples.iter_mut() {
        if rng.random::<f64>() < 0.3 / p2.speed {
            s.dir = 1;
        }
    }
    let grid = CellGrid { origin: [0.0, 0.0], cells: [20, 20], grain: 0.2 };
    let g0 = circulation(&sw, &grid, 4, 15, 4, 15).unwrap();
    let mut worst: f64 = 0.0;
    let mut tol: f64 = f64::INFINITY;
    for k in 0..4 {
        dds_run(&mut sw, &Potential::free(), 0.01, 50, k);
        let g = circulation(&sw, &grid, 4, 15, 4, 15).unwrap();
        let sd = grid.grain * p2.speed * (sw.moving_fraction() / 500.0).sqrt() * 44f64.sqrt();
        tol = tol.min(4.0 * SQRT_2 * sd);
        worst = worst.max((g - g0).abs());
    }
    r.line("bridge", l2 < 0.15 && worst < tol, format!("round_trip_l2={l2:.4} circulation_drift={worst:.4} (tol {tol:.4})"));
}

fn selection(r: &mut Report) {
    let pot = PairPotential::morse(1.0, 2.0, 1.0);
    let (mut hits, mut control) = (0, 0);
    for seed in 0..20 {
        let mut cfg = SelectionConfig::new(0.1, seed);
        cfg.max_iterations = 20;
        hits += association_experiment(&AssociationParams::standard(pot), &cfg).unwrap().associated() as usize;
        let c = association_experiment(&AssociationParams::standard(pot.repulsive_only()), &cfg).unwrap();
        control += ((c.mode() - c.r0).abs() <= 0.1 * c.r0) as usize;
    }
    r.line("selection", hits >= 18 && control == 0, format!("associated={hits}/20 control_peaks={control}/20"));
}

fn born(r: &mut Report) {
    let rep = born_grain_experiment(&BornGrainConfig::default(), &mut rng_from_seed(5)).unwrap();
    r.line(
        "born-grain",
        rep.pearson.accept,
        format!("counts={:?} expected={:?} chi2={:.2} threshold={:.2}", rep.counts, rep.expected, rep.pearson.statistic, rep.pearson.threshold),
    );
}

fn main() {
    let mut r = Report { failed: Vec::new() };
    grover(&mut r);
    generalized(&mut r);
    qft(&mut r);
    shor(&mut r);
    control(&mut r);
    fock(&mut r);
    qec(&mut r);
    grid(&mut r);
    dmc(&mut r);
    dds(&mut r);
    bridge(&mut r);
    selection(&mut r);
    born(&mut r);
    if r.failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed {:?}", r.failed);
        std::process::exit(1);
    }
}
