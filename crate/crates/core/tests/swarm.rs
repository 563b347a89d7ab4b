use std::f64::consts::{PI, SQRT_2};

use cqs_core::grid::{gaussian_packet, harmonic_ground_state, split_step, SplitStepParams};
use cqs_core::rng::{rng_from_seed, sub_rng};
use cqs_core::stats::{chi2_quantile, pearson_check, slope};
use cqs_core::swarm::*;
use cqs_core::Error;
use proptest::prelude::*;
use rand::Rng;

fn moving(id: u64, x: f64, axis: u8, dir: i8) -> Sample {
    Sample { id, x: [x, 0.0], axis, dir }
}

#[test]
fn opposite_movers_come_to_rest() {
    let mut rng = rng_from_seed(1);
    let (a, b) = exchange(&moving(0, 0.0, 0, 1), &moving(1, 0.05, 0, -1), 0.1, 1, &mut rng).unwrap();
    assert_eq!((a.dir, b.dir), (0, 0));
    assert_eq!((a.id, b.id), (0, 1));
}

#[test]
fn resting_pair_leaves_opposite() {
    let mut axes = [false; 2];
    for seed in 0..40 {
        let mut rng = sub_rng(2, seed);
        let (a, b) = exchange(&Sample::at_rest(0, [0.0, 0.0]), &Sample::at_rest(1, [0.05, 0.05]), 0.1, 2, &mut rng).unwrap();
        assert!(a.dir != 0 && a.dir == -b.dir && a.axis == b.axis);
        axes[a.axis as usize] = true;
    }
    assert_eq!(axes, [true, true]);
}

#[test]
fn exchange_preconditions() {
    let mut rng = rng_from_seed(3);
    let far = exchange(&Sample::at_rest(0, [0.0, 0.0]), &Sample::at_rest(1, [0.5, 0.0]), 0.1, 1, &mut rng);
    assert!(matches!(far, Err(Error::InvalidExchange(_))));
    let same = exchange(&moving(0, 0.0, 0, 1), &moving(1, 0.0, 0, 1), 0.1, 1, &mut rng);
    assert!(matches!(same, Err(Error::InvalidExchange(_))));
    let mixed = exchange(&moving(0, 0.0, 0, 1), &Sample::at_rest(1, [0.0, 0.0]), 0.1, 1, &mut rng);
    assert!(matches!(mixed, Err(Error::InvalidExchange(_))));
}

fn uniform_periodic(n: usize, len: f64, seed: u64) -> Swarm {
    let mut p = SwarmParams::calibrated(1, 1.0, 1.0, 0.1, DEFAULT_D, 1.0);
    p.periodic = Some(PeriodicBox { lo: [0.0, 0.0], hi: [len, 0.0] });
    let mut rng = rng_from_seed(seed);
    let pos: Vec<[f64; 2]> = (0..n).map(|_| [rng.random::<f64>() * len, 0.0]).collect();
    Swarm::new(p, &pos).unwrap()
}

#[test]
fn free_uniform_swarm_stays_multinomial() {
    let mut sw = uniform_periodic(10_000, 5.0, 4);
    dds_run(&mut sw, &Potential::free(), 0.005, 20, 5);
    let bins = Bins { origin: 0.0, width: 0.1, count: 50 };
    let mut counts = vec![0u64; 50];
    for s in &sw.samples {
        counts[bins.index(s.x[0]).unwrap()] += 1;
    }
    let r = pearson_check(&counts, &vec![1.0 / 50.0; 50], 0.01).unwrap();
    assert!(r.accept, "{r:?}");
}

#[test]
fn harmonic_ground_density_is_stationary() {
    let p = SwarmParams::calibrated(1, 1.0, 1.0, 0.1, DEFAULT_D, 1.0);
    let mut sw = gaussian_1d(p, 100_000, 0.0, 0.5f64.sqrt(), 3).unwrap();
    let bins = Bins { origin: -3.0, width: 0.1, count: 60 };
    let h0 = histogram(&sw, bins, 0);
    let pot = Potential::harmonic(1.0, 1.0);
    for k in 0..4 {
        dds_run(&mut sw, &pot, 0.005, 200, 10 + k);
        let drift = l1_distance(&h0, &histogram(&sw, bins, 0), 0.1) / l1_distance(&h0, &vec![0.0; 60], 0.1);
        assert!(drift < 0.1, "after {} steps: {drift}", 200 * (k + 1));
    }
}

#[test]
fn momentum_changes_by_potential_impulse() {
    let force = 0.8;
    let p = SwarmParams::calibrated(1, 1.0, 1.0, 0.1, DEFAULT_D, 1.0);
    let mut sw = gaussian_1d(p.clone(), 50_000, 0.0, 0.7, 6).unwrap();
    let pot = Potential { kind: PotentialKind::Linear { force: [force, 0.0] }, offset: 0.0 };
    let (dt, steps) = (0.005, 100);
    let before = sw.momentum_quanta()[0];
    let mut cells_total = 0usize;
    for k in 0..steps {
        let mut cells: Vec<(i64, i64)> = sw.samples.iter().map(|s| sw.cell_of(s.x)).collect();
        cells.sort_unstable();
        cells.dedup();
        cells_total += cells.len();
        dds_step(&mut sw, &pot, dt, k as u64);
    }
    let gained = (sw.momentum_quanta()[0] - before) as f64;
    // Each quantum carries m·c with m = M/n; the impulse on the particle is F·t.
    let expect = force * dt * steps as f64 / p.mass * sw.len() as f64 / p.speed;
    // Per cell and step the stochastic rounding adds at most variance 1/4.
    let sd = (cells_total as f64 * 0.25).sqrt();
    assert!((gained - expect).abs() < 5.0 * sd, "gained {gained}, expected {expect} ± {sd}");
    let p_total = sw.total_momentum()[0] - before as f64 * sw.sample_mass() * p.speed;
    assert!((p_total - force * dt * steps as f64).abs() < 5.0 * sd * sw.sample_mass() * p.speed);
}

#[test]
fn free_steps_conserve_momentum_and_ids() {
    let p = SwarmParams::calibrated(2, 1.0, 1.0, 0.2, DEFAULT_D, 1.0);
    let mut sw = Swarm::gaussian(p.clone(), 20_000, [0.0, 0.0], [1.0, 1.0], &mut rng_from_seed(7)).unwrap();
    // Give it a net drift first so conservation is not trivially zero.
    for s in sw.samples.iter_mut().take(3000) {
        s.axis = 1;
        s.dir = 1;
    }
    let q = sw.momentum_quanta();
    let mut prev: Vec<[f64; 2]> = sw.samples.iter().map(|s| s.x).collect();
    for k in 0..30 {
        dds_step(&mut sw, &Potential::free(), 0.002, k);
        assert_eq!(sw.momentum_quanta(), q);
        assert_eq!(sw.len(), 20_000);
        let mut byid = sw.samples.clone();
        byid.sort_by_key(|s| s.id);
        for (i, s) in byid.iter().enumerate() {
            assert_eq!(s.id, i as u64);
            let step = ((s.x[0] - prev[i][0]).powi(2) + (s.x[1] - prev[i][1]).powi(2)).sqrt();
            assert!(step <= p.speed * 0.002 * (1.0 + 1e-12));
            prev[i] = s.x;
        }
    }
}

#[test]
fn density_single_sample() {
    let p = SwarmParams::calibrated(2, 1.0, 1.0, 0.5, DEFAULT_D, 1.0);
    let sw = Swarm::new(p, &[[0.3, 0.7]]).unwrap();
    assert_eq!(sw.density((0, 1)), 4.0);
    assert_eq!(sw.density((0, 0)), 0.0);
    assert_eq!(sw.density((1, 1)), 0.0);
}

#[test]
fn uniform_density_within_poisson() {
    let n = 1_000_000;
    let sw = uniform_periodic(n, 2.0, 8);
    let expect = n as f64 / 20.0;
    for k in 0..20 {
        let count = sw.density((k, 0)) * 0.1;
        assert!((count - expect).abs() < 5.0 * expect.sqrt(), "cell {k}: {count}");
    }
}

#[test]
fn momentum_field_of_uniform_motion() {
    let p = SwarmParams::calibrated(1, 2.0, 1.0, 0.1, DEFAULT_D, 1.0);
    let mut sw = gaussian_1d(p.clone(), 1000, 0.0, 0.3, 9).unwrap();
    sw.samples.iter_mut().for_each(|s| s.dir = 1);
    for k in -3..3 {
        let rho = sw.density((k, 0));
        let j = sw.momentum_field((k, 0));
        assert!((j[0] - rho * sw.sample_mass() * p.speed).abs() < 1e-9 * (1.0 + j[0].abs()));
        assert_eq!(j[1], 0.0);
    }
}

#[test]
fn snapshot_lists_id_position_velocity() {
    let p = SwarmParams::calibrated(1, 1.0, 1.0, 0.1, DEFAULT_D, 1.0);
    let mut sw = Swarm::new(p.clone(), &[[0.5, 0.0], [1.0, 0.0]]).unwrap();
    sw.samples[1].dir = -1;
    let text = sw.snapshot_text();
    let rows: Vec<Vec<f64>> = text.lines().map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect()).collect();
    let expect = [[0.0, 0.5, 0.0], [1.0, 1.0, -p.speed]];
    assert_eq!(rows.len(), 2);
    for (r, e) in rows.iter().zip(expect) {
        assert!(r.iter().zip(e).all(|(a, b)| (a - b).abs() < 1e-11));
    }
}

fn dmc_params(samples: usize, steps: usize) -> DmcParams {
    DmcParams { mass: 1.0, hbar: 1.0, step: 0.1, p: 0.25, samples, steps, burn_in: 0.5 }
}

#[test]
fn dmc_harmonic_width() {
    let bins = Bins { origin: -5.0, width: 0.1, count: 100 };
    let r = dmc_run(&Potential::harmonic(1.0, 1.0), &dmc_params(100_000, 2000), bins, 7).unwrap();
    // The stabilized density follows |Ψ₀| itself, whose width is √(ħ/(Mω)).
    assert!((r.width - 1.0).abs() < 0.05, "{}", r.width);
    assert!(r.mean.abs() < 0.05);
}

#[test]
fn dmc_double_well_symmetric() {
    let pot = Potential { kind: PotentialKind::DoubleWell { depth: 1.0, half_separation: 1.5, stiffness_y: 0.0 }, offset: 0.0 };
    let n = 20_000;
    let bins = Bins { origin: -4.0, width: 0.1, count: 80 };
    let r = dmc_run(&pot, &dmc_params(n, 1000), bins, 11).unwrap();
    let left: f64 = r.density[..40].iter().sum::<f64>() * 0.1;
    let right: f64 = r.density[40..].iter().sum::<f64>() * 0.1;
    let frac = left / (left + right);
    assert!((frac - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt(), "{frac}");
}

#[test]
fn dmc_offset_leaves_profile() {
    let bins = Bins { origin: -4.0, width: 0.2, count: 40 };
    let base = dmc_run(&Potential::harmonic(1.0, 1.0), &dmc_params(20_000, 1000), bins, 12).unwrap();
    let shifted = dmc_run(&Potential::harmonic(1.0, 1.0).with_offset(5.0), &dmc_params(20_000, 1000), bins, 12).unwrap();
    assert!(l1_distance(&base.density, &shifted.density, 0.2) < 0.02);
    assert!((shifted.reference_energy - base.reference_energy - 5.0).abs() < 0.1);
}

#[test]
fn zero_velocity_gives_real_root_density() {
    let p = SwarmParams::calibrated(1, 1.0, 1.0, 0.1, DEFAULT_D, 1.0);
    let sw = gaussian_1d(p, 20_000, 0.0, 0.5, 13).unwrap();
    let grid = CellGrid::line(-1.0, 20, 0.1);
    let psi = wavefunction_from_swarm(&sw, &grid, 10, 0.0).unwrap();
    let m = cell_moments(&sw, &grid);
    for (z, n) in psi.iter().zip(&m.counts) {
        assert_eq!(z.im, 0.0);
        assert!((z.re - (n / (20_000.0 * 0.1)).sqrt()).abs() < 1e-15);
    }
}

#[test]
fn uniform_velocity_gives_linear_phase() {
    let p = SwarmParams::calibrated(1, 2.0, 1.0, 0.1, DEFAULT_D, 1.0);
    let mut sw = gaussian_1d(p.clone(), 20_000, 0.0, 0.5, 14).unwrap();
    sw.samples.iter_mut().for_each(|s| s.dir = 1);
    let grid = CellGrid::line(-1.0, 20, 0.1);
    let psi = wavefunction_from_swarm(&sw, &grid, 10, 0.0).unwrap();
    let k = p.mass * p.speed / p.hbar;
    for (i, z) in psi.iter().enumerate() {
        let expect = k * (i as f64 - 10.0) * 0.1;
        assert!((z.arg() - expect.rem_euclid(2.0 * PI)).rem_euclid(2.0 * PI).min((expect.rem_euclid(2.0 * PI) - z.arg()).rem_euclid(2.0 * PI)) < 1e-9);
    }
    // Statistical version: a fraction v₀/c moves, so the slope is Mv₀/ħ.
    let v0 = 0.4;
    let mut rng = rng_from_seed(15);
    sw.samples.iter_mut().for_each(|s| s.dir = (rng.random::<f64>() < v0 / p.speed) as i8);
    let psi = wavefunction_from_swarm(&sw, &grid, 10, 0.0).unwrap();
    let phases = unwrap(&psi.iter().map(|z| z.arg()).collect::<Vec<_>>());
    let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
    let s = slope(&xs, &phases);
    assert!((s / (p.mass * v0 / p.hbar) - 1.0).abs() < 0.1, "{s}");
}

#[test]
fn empty_contour_cell_is_rejected() {
    let p = SwarmParams::calibrated(1, 1.0, 1.0, 0.1, DEFAULT_D, 1.0);
    let sw = Swarm::new(p, &[[0.05, 0.0], [0.25, 0.0]]).unwrap();
    let grid = CellGrid::line(0.0, 3, 0.1);
    assert!(matches!(wavefunction_from_swarm(&sw, &grid, 0, 0.0), Err(Error::UndefinedPhase(1))));
}

fn unwrap(phases: &[f64]) -> Vec<f64> {
    let mut out = vec![phases[0]];
    for w in phases.windows(2) {
        let d = (w[1] - w[0] + PI).rem_euclid(2.0 * PI) - PI;
        out.push(out.last().unwrap() + d);
    }
    out
}

#[test]
fn ground_state_has_no_mean_flow() {
    let psi = harmonic_ground_state(60, 0.1, -2.95, 1.0, 1.0, 1.0).unwrap();
    let p = SwarmParams::calibrated(1, 1.0, 1.0, 0.1, DEFAULT_D, 1.0);
    let sw = swarm_from_wavefunction(&psi, 100_000, p.clone(), 16).unwrap();
    let m = cell_moments(&sw, &CellGrid::line(-3.0, 60, 0.1));
    let f = p.moving_fraction();
    for (n, v) in m.counts.iter().zip(&m.mean_velocity) {
        if *n >= 100.0 {
            assert!(v[0].abs() < 5.0 * p.speed * (f / n).sqrt(), "{v:?} with {n}");
        }
    }
}

fn round_trip_error(n: usize) -> f64 {
    let p = SwarmParams::calibrated(1, 1.0, 1.0, 0.1, 0.2, SQRT_2);
    let psi = gaussian_packet(60, 0.1, -2.95, 0.0, 1.0, 0.5).unwrap();
    let sw = swarm_from_wavefunction(&psi, n, p, 4).unwrap();
    let back = wavefunction_from_swarm(&sw, &CellGrid::line(-3.0, 60, 0.1), 30, psi.values[30].arg()).unwrap();
    (back.iter().zip(&psi.values).map(|(a, z)| (a - z).norm_sqr()).sum::<f64>() * 0.1).sqrt()
}

#[test]
fn round_trip_converges() {
    let errs: Vec<f64> = [10_000, 100_000, 1_000_000].iter().map(|&n| round_trip_error(n)).collect();
    assert!(errs[1] < 0.15, "{errs:?}");
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn plane_wave_slope_recovered() {
    // The flow ħk₀/M must stay below the limit speed c ≈ 1.22.
    let k0 = 0.8;
    let psi = gaussian_packet(80, 0.1, -3.95, 0.0, 2.0, k0).unwrap();
    let p = SwarmParams::calibrated(1, 1.0, 1.0, 0.1, 0.2, SQRT_2);
    let sw = swarm_from_wavefunction(&psi, 200_000, p, 17).unwrap();
    let back = wavefunction_from_swarm(&sw, &CellGrid::line(-4.0, 80, 0.1), 40, 0.0).unwrap();
    let phases = unwrap(&back[20..60].iter().map(|z| z.arg()).collect::<Vec<_>>());
    let xs: Vec<f64> = (20..60).map(|i| i as f64 * 0.1).collect();
    let s = slope(&xs, &phases);
    assert!((s / k0 - 1.0).abs() < 0.1, "{s}");
}

#[test]
fn closed_contour_circulation_is_stable() {
    let mut p = SwarmParams::calibrated(2, 1.0, 1.0, 0.2, 0.2, 1.0);
    p.periodic = Some(PeriodicBox { lo: [0.0, 0.0], hi: [4.0, 4.0] });
    let mut rng = rng_from_seed(3);
    let pos: Vec<[f64; 2]> = (0..200_000).map(|_| [rng.random::<f64>() * 4.0, rng.random::<f64>() * 4.0]).collect();
    let mut sw = Swarm::new(p.clone(), &pos).unwrap();
    for s in sw.samples.iter_mut() {
        if rng.random::<f64>() < 0.3 / p.speed {
            s.dir = 1;
        }
    }
    let grid = CellGrid { origin: [0.0, 0.0], cells: [20, 20], grain: 0.2 };
    let gamma0 = circulation(&sw, &grid, 4, 15, 4, 15).unwrap();
    for k in 0..4 {
        dds_run(&mut sw, &Potential::free(), 0.01, 50, k);
        let g = circulation(&sw, &grid, 4, 15, 4, 15).unwrap();
        // Noise of the line sum: about 44 boundary cells, each with velocity
        // variance ≤ c²·(moving fraction)/count.
        let per_cell = 200_000.0 / 400.0;
        let sd = grid.grain * p.speed * (sw.moving_fraction() / per_cell).sqrt() * 44f64.sqrt();
        assert!((g - gamma0).abs() < 4.0 * SQRT_2 * sd && g.abs() < 4.0 * sd, "Γ {g} vs {gamma0}, sd {sd}");
    }
}

#[test]
fn free_density_error_shrinks_with_samples() {
    let sigma0 = 0.5;
    let dt = 0.0025;
    let p = SwarmParams::calibrated(1, 1.0, 1.0, 0.05, DEFAULT_D, SQRT_2 * sigma0).with_adaptive(true);
    let psi0 = gaussian_packet(1024, 0.02, -10.24, 0.0, sigma0, 0.0).unwrap();
    let psi = split_step(&psi0, &SplitStepParams::new(1.0, dt, vec![0.0; 1024]), 200).unwrap();
    let exact: Vec<f64> = (0..60)
        .map(|i| {
            let lo = 362 + 5 * i;
            let f = |j: usize| psi.values[j].norm_sqr();
            0.02 * (0.5 * f(lo) + (lo + 1..lo + 5).map(f).sum::<f64>() + 0.5 * f(lo + 5)) / 0.1
        })
        .collect();
    let bins = Bins { origin: -3.0, width: 0.1, count: 60 };
    let errs: Vec<f64> = [10_000, 100_000]
        .iter()
        .map(|&n| {
            let mut sw = gaussian_1d(p.clone(), n, 0.0, sigma0, 5).unwrap();
            dds_run(&mut sw, &Potential::free(), dt, 200, 9);
            l1_distance(&histogram(&sw, bins, 0), &exact, 0.1)
        })
        .collect();
    assert!(errs[1] < errs[0], "{errs:?}");
}

#[test]
fn harmonic_equation_residual() {
    let p = SwarmParams::calibrated(1, 1.0, 1.0, 0.1, DEFAULT_D, 1.0);
    let pot = Potential::harmonic(1.0, 1.0);
    let bins = Bins { origin: -2.5, width: 0.25, count: 20 };
    let mut sw = gaussian_1d(p.clone(), 1_000_000, 0.0, 0.4, 5).unwrap();
    let h0 = histogram(&sw, bins, 0);
    dds_run(&mut sw, &pot, 0.005, 20, 1);
    let h1 = histogram(&sw, bins, 0);
    dds_run(&mut sw, &pot, 0.005, 20, 2);
    let h2 = histogram(&sw, bins, 0);
    let r = swarm_equation_residual(&h0, &h1, &h2, 0.1, bins, p.intensity(), p.kappa(), &pot);
    assert!(r < 0.3, "{r}");
}

#[test]
fn single_particle_cortege_is_dds() {
    let p = SwarmParams::calibrated(1, 1.0, 1.0, 0.1, DEFAULT_D, 1.0);
    let sw = gaussian_1d(p, 5000, 0.0, 0.7, 18).unwrap();
    let pot = Potential::harmonic(1.0, 1.0);
    let mut ens = cortege_build(vec![sw.clone()], &CortegeTarget::Product, 19).unwrap();
    let mut direct = sw;
    for k in 0..5 {
        cortege_dds_step(&mut ens, &Separable(pot), Some(&pot), 0.005, k);
        dds_step(&mut direct, &pot, 0.005, k);
    }
    assert_eq!(ens.swarms[0], direct);
}

#[test]
fn product_corteges_are_independent() {
    let p = SwarmParams::calibrated(1, 1.0, 1.0, 0.1, DEFAULT_D, 1.0);
    let a = gaussian_1d(p.clone(), 20_000, 0.0, 1.0, 20).unwrap();
    let b = gaussian_1d(p, 20_000, 1.0, 0.5, 21).unwrap();
    let ens = cortege_build(vec![a, b], &CortegeTarget::Product, 22).unwrap();
    assert!(ens.is_partition());
    let bins = Bins { origin: -2.0, width: 0.5, count: 8 };
    let t = joint_counts(&ens, bins);
    let total: u64 = t.iter().flatten().sum();
    let rows: Vec<f64> = t.iter().map(|r| r.iter().sum::<u64>() as f64 / total as f64).collect();
    let cols: Vec<f64> = (0..8).map(|j| t.iter().map(|r| r[j]).sum::<u64>() as f64 / total as f64).collect();
    let observed: Vec<u64> = t.iter().flatten().copied().collect();
    let expected: Vec<f64> = rows.iter().flat_map(|r| cols.iter().map(move |c| r * c)).collect();
    // Margins are estimated, so the independence test has (r−1)(c−1) degrees of freedom.
    let r = pearson_check(&observed, &expected, 0.01).unwrap();
    let used = expected.iter().filter(|&&e| e > 0.0).count();
    let dof = used - 1 - 14;
    assert!(r.statistic < chi2_quantile(0.99, dof), "{} with {dof} dof", r.statistic);
}

#[test]
fn diagonal_target_pairs_matching_cells() {
    let p = SwarmParams::calibrated(1, 1.0, 1.0, 0.1, DEFAULT_D, 1.0);
    let a = gaussian_1d(p.clone(), 20_000, 0.0, 1.0, 23).unwrap();
    let mut b = a.clone();
    b.samples.reverse();
    let bins = Bins { origin: -3.0, width: 0.5, count: 12 };
    let weights: Vec<Vec<f64>> = (0..12).map(|i| (0..12).map(|j| (i == j) as u8 as f64).collect()).collect();
    let ens = cortege_build(vec![a, b], &CortegeTarget::Joint { bins, weights: weights.clone() }, 24).unwrap();
    assert!(ens.is_partition());
    let t = joint_counts(&ens, bins);
    let total: u64 = t.iter().flatten().sum();
    let off: u64 = (0..12).flat_map(|i| (0..12).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| t[i][j]).sum();
    assert!((off as f64) < 0.01 * total as f64, "{off}/{total}");

    let mut neg = weights.clone();
    neg[0][1] = -0.5;
    let p1 = SwarmParams::calibrated(1, 1.0, 1.0, 0.1, DEFAULT_D, 1.0);
    let swarms = vec![gaussian_1d(p1.clone(), 100, 0.0, 1.0, 1).unwrap(), gaussian_1d(p1, 100, 0.0, 1.0, 2).unwrap()];
    let r = cortege_build(swarms, &CortegeTarget::Joint { bins, weights: neg }, 25);
    assert!(matches!(r, Err(Error::Unsatisfiable(_))));
}

#[test]
fn cortege_step_keeps_partition_and_momentum() {
    let p = SwarmParams::calibrated(1, 1.0, 1.0, 0.2, DEFAULT_D, 1.0);
    let a = gaussian_1d(p.clone(), 5000, 0.0, 0.5, 26).unwrap();
    let b = gaussian_1d(p, 5000, 0.0, 0.5, 27).unwrap();
    let mut ens = cortege_build(vec![a, b], &CortegeTarget::Product, 28).unwrap();
    let q: Vec<[i64; 2]> = ens.swarms.iter().map(Swarm::momentum_quanta).collect();
    for k in 0..10 {
        cortege_dds_step(&mut ens, &Separable(Potential::free()), None, 0.002, k);
    }
    assert!(ens.is_partition());
    assert_eq!(ens.swarms.iter().map(Swarm::momentum_quanta).collect::<Vec<_>>(), q);
    assert!(ens.swarms.iter().any(|s| s.moving_fraction() > 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exchange_conserves_momentum(seed in any::<u64>(), a_dir in -1i8..=1, axis in 0u8..2) {
        let mut rng = rng_from_seed(seed);
        let a = Sample { id: 0, x: [0.0, 0.0], axis, dir: a_dir };
        let b = Sample { id: 1, x: [0.01, 0.0], axis, dir: -a_dir };
        let (a2, b2) = exchange(&a, &b, 0.1, 2, &mut rng).unwrap();
        let p = |s: &Sample| s.velocity(1.0);
        prop_assert_eq!([p(&a)[0] + p(&b)[0], p(&a)[1] + p(&b)[1]], [p(&a2)[0] + p(&b2)[0], p(&a2)[1] + p(&b2)[1]]);
    }

    #[test]
    fn dds_step_keeps_samples(seed in any::<u64>(), n in 1usize..400) {
        let p = SwarmParams::calibrated(1, 1.0, 1.0, 0.1, DEFAULT_D, 1.0);
        let mut sw = gaussian_1d(p, n, 0.0, 0.5, seed).unwrap();
        dds_step(&mut sw, &Potential::harmonic(1.0, 1.0), 0.005, seed);
        let mut ids: Vec<u64> = sw.samples.iter().map(|s| s.id).collect();
        ids.sort_unstable();
        prop_assert_eq!(ids, (0..n as u64).collect::<Vec<_>>());
        prop_assert!(sw.samples.iter().all(|s| (-1..=1).contains(&s.dir)));
    }

    #[test]
    fn dds_step_deterministic(seed in any::<u64>()) {
        let p = SwarmParams::calibrated(1, 1.0, 1.0, 0.1, DEFAULT_D, 1.0);
        let mut a = gaussian_1d(p, 2000, 0.0, 0.5, seed).unwrap();
        let mut b = a.clone();
        dds_run(&mut a, &Potential::harmonic(1.0, 1.0), 0.005, 3, seed);
        dds_run(&mut b, &Potential::harmonic(1.0, 1.0), 0.005, 3, seed);
        prop_assert_eq!(a, b);
    }
}
