//! Named experiments. Each declares its keys with defaults, runs, and returns
//! artifacts plus one headline metric.

use std::f64::consts::SQRT_2;
use std::fmt::Write;

use cqs_core::born::{born_grain_experiment, BornGrainConfig};
use cqs_core::control::{qft_via_continuous, synthesize_cnot, CompensationMode};
use cqs_core::fock::{car_deviation, intertwine_check, LevelPairing};
use cqs_core::fourier::{circuit_matrix, factor, functional_gate_count, pow_mod, qft_circuit, qft_matrix, QftCircuitSpec};
use cqs_core::grid::{
    explicit_stability_limit, gaussian_packet, harmonic_ground_state, heat_explicit, heat_sweep, highest_sine_mode, max_abs, split_step,
    Dirichlet, SplitStepParams,
};
use cqs_core::qec::{cycles_csv, run_cycles};
use cqs_core::rng::{derive_seed, rng_from_seed, sub_rng};
use cqs_core::search::{grover_closed_form, grover_search, success_probability, extra_group_instance, generalized_search, grover_state, BooleanOracle};
use cqs_core::selection::{association_experiment, AssociationParams, PairPotential, SelectionConfig};
use cqs_core::statevec::c;
use cqs_core::swarm::{
    dds_run, dmc_run, gaussian_1d, histogram, histogram_csv, l1_distance, swarm_from_wavefunction, wavefunction_from_swarm, Bins, CellGrid,
    DmcParams, Potential, SwarmParams,
};
use nalgebra::DMatrix;
use rand::Rng;
use thiserror::Error;

use crate::config::{ConfigError, Params};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] cqs_core::Error),
    #[error("{0}")]
    Invalid(String),
}

pub struct Outcome {
    /// (file name, contents) written under the output directory.
    pub artifacts: Vec<(String, String)>,
    pub metric: &'static str,
    pub value: f64,
    pub pass: bool,
}

pub struct Experiment {
    pub name: &'static str,
    pub keys: &'static [(&'static str, &'static str)],
    pub run: fn(&Params) -> Result<Outcome, RunError>,
}

pub const EXPERIMENTS: &[Experiment] = &[
    Experiment { name: "grover", keys: &[("n", "10"), ("targets", ""), ("min_success", "0.99")], run: grover },
    Experiment {
        name: "grover-general",
        keys: &[("log2_n", "12"), ("l2", "4"), ("l3", "16"), ("d", "1.5707963267948966"), ("min_success", "0.95")],
        run: grover_general,
    },
    Experiment { name: "qft-check", keys: &[("max_qubits", "8"), ("tolerance", "1e-10")], run: qft_check },
    Experiment { name: "shor", keys: &[("q", "15"), ("runs", "50"), ("min_rate", "0.95")], run: shor },
    Experiment {
        name: "control-qft",
        keys: &[("n", "3"), ("mode", "deterministic"), ("flips", "1000"), ("tick", "0.01"), ("tolerance", "auto")],
        run: control_qft,
    },
    Experiment {
        name: "cnot-synth",
        keys: &[("e00", "0"), ("e01", "0"), ("e10", "0"), ("e11", "1"), ("eps", "1e-3"), ("tolerance", "5e-3")],
        run: cnot_synth,
    },
    Experiment { name: "fock-check", keys: &[("max_levels", "5"), ("pairs", "3"), ("trials", "50"), ("tolerance", "1e-10")], run: fock_check },
    Experiment {
        name: "qec-cycle",
        keys: &[
            ("cycles", "100"),
            ("error_probability", "0.3"),
            ("alpha_re", "0.6"),
            ("alpha_im", "0"),
            ("beta_re", "0"),
            ("beta_im", "0.8"),
            ("tolerance", "1e-9"),
        ],
        run: qec_cycle,
    },
    Experiment {
        name: "heat",
        keys: &[("m", "101"), ("dx", "0.01"), ("alpha", "1"), ("dt_factor", "1.01"), ("steps", "500"), ("scheme", "explicit")],
        run: heat,
    },
    Experiment {
        name: "split-step",
        keys: &[
            ("m", "256"),
            ("dx", "0.1"),
            ("dt", "0.01"),
            ("steps", "1000"),
            ("mass", "1"),
            ("omega", "1"),
            ("hbar", "1"),
            ("min_autocorrelation", "0.999999"),
        ],
        run: split_step_exp,
    },
    Experiment {
        name: "dmc",
        keys: &[
            ("samples", "100000"),
            ("steps", "2000"),
            ("step", "0.1"),
            ("p", "0.25"),
            ("burn_in", "0.5"),
            ("mass", "1"),
            ("omega", "1"),
            ("hbar", "1"),
            ("max_rel_error", "0.05"),
        ],
        run: dmc,
    },
    Experiment {
        name: "dds",
        keys: &[
            ("samples", "100000"),
            ("grain", "0.1"),
            ("d", "0.5"),
            ("dt", "0.005"),
            ("steps", "800"),
            ("mass", "1"),
            ("omega", "1"),
            ("max_drift", "0.1"),
        ],
        run: dds,
    },
    Experiment {
        name: "bridge",
        keys: &[("samples", "100000"), ("cells", "60"), ("grain", "0.1"), ("d", "0.2"), ("sigma", "1"), ("k0", "0.5"), ("max_l2", "0.15")],
        run: bridge,
    },
    Experiment {
        name: "selection",
        keys: &[("runs", "20"), ("cell", "0.1"), ("max_iterations", "20"), ("min_rate", "0.9")],
        run: selection,
    },
    Experiment { name: "born-grain", keys: &[("branches", "16,48"), ("jitter", "1e-3"), ("shots", "10000"), ("alpha", "0.01")], run: born_grain },
];

pub fn find(name: &str) -> Option<&'static Experiment> {
    EXPERIMENTS.iter().find(|e| e.name == name)
}

pub fn names() -> Vec<&'static str> {
    EXPERIMENTS.iter().map(|e| e.name).collect()
}

/// Plain decimal for moderate magnitudes, shortest exponent form otherwise.
pub struct F(pub f64);

impl std::fmt::Display for F {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let a = self.0.abs();
        if a == 0.0 || (1e-4..1e6).contains(&a) || !a.is_finite() {
            write!(f, "{}", self.0)
        } else {
            write!(f, "{:e}", self.0)
        }
    }
}

fn invalid(msg: impl Into<String>) -> RunError {
    RunError::Invalid(msg.into())
}

fn csv(name: &str, text: String) -> Vec<(String, String)> {
    vec![(format!("{name}.csv"), text)]
}

fn grover(p: &Params) -> Result<Outcome, RunError> {
    let n: usize = p.get("n")?;
    if n == 0 || n > 20 {
        return Err(invalid("n must lie in 1..=20"));
    }
    let seed = p.seed()?;
    let mut rng = rng_from_seed(seed);
    let mut targets: Vec<usize> = p.list("targets")?;
    if targets.is_empty() {
        targets.push(rng.random_range(0..1usize << n));
    }
    if targets.iter().any(|&t| t >> n != 0) {
        return Err(invalid(format!("targets must be below 2^{n}")));
    }
    let oracle = BooleanOracle::from_solutions(n, &targets);
    let l = oracle.solutions().len();
    let outcome = grover_search(&oracle, &mut rng);
    let mut s = String::from("iteration[1],success_probability[1],closed_form[1]\n");
    for t in 0..=outcome.iterations {
        let sim = success_probability(&grover_state(&oracle, t), &oracle);
        let _ = writeln!(s, "{t},{},{}", F(sim), F(grover_closed_form(n, l, t)));
    }
    let mut artifacts = csv("grover", s);
    artifacts.push(("grover-measurement.txt".into(), format!("measured = {}\nfound = {}\n", outcome.measured, outcome.found.is_some())));
    let min: f64 = p.get("min_success")?;
    Ok(Outcome { artifacts, metric: "success_prob", value: outcome.success_probability, pass: outcome.success_probability >= min })
}

fn grover_general(p: &Params) -> Result<Outcome, RunError> {
    let k: u32 = p.get("log2_n")?;
    if !(4..=40).contains(&k) {
        return Err(invalid("log2_n must lie in 4..=40"));
    }
    let (l2, l3, d): (u64, u64, f64) = (p.get("l2")?, p.get("l3")?, p.get("d")?);
    if l2 == 0 || l2 + l3 >= 1 << k {
        return Err(invalid("need 1 ≤ l2 and l2 + l3 < N"));
    }
    let trace = generalized_search(&extra_group_instance(1 << k, l2, l3, d));
    let mut s = String::from("iteration[1],target_probability[1]\n");
    for (t, q) in trace.probabilities.iter().enumerate() {
        let _ = writeln!(s, "{t},{}", F(*q));
    }
    let value = trace.final_probability();
    let min: f64 = p.get("min_success")?;
    Ok(Outcome { artifacts: csv("grover-general", s), metric: "final_prob", value, pass: value >= min })
}

fn qft_check(p: &Params) -> Result<Outcome, RunError> {
    let max: usize = p.get("max_qubits")?;
    if max == 0 || max > 10 {
        return Err(invalid("max_qubits must lie in 1..=10"));
    }
    let mut s = String::from("qubits[1],max_deviation[1],gate_count[1],expected_gate_count[1]\n");
    let mut worst: f64 = 0.0;
    let mut counts_ok = true;
    for n in 1..=max {
        let circ = qft_circuit(QftCircuitSpec::exact(n));
        let dev = (circuit_matrix(n, &circ) - qft_matrix(n, 1.0)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let (got, want) = (functional_gate_count(&circ), n + n * (n - 1) / 2);
        counts_ok &= got == want;
        worst = worst.max(dev);
        let _ = writeln!(s, "{n},{dev:e},{got},{want}");
    }
    let tol: f64 = p.get("tolerance")?;
    Ok(Outcome { artifacts: csv("qft-check", s), metric: "max_deviation", value: worst, pass: worst < tol && counts_ok })
}

fn shor(p: &Params) -> Result<Outcome, RunError> {
    let (q, runs): (u64, u64) = (p.get("q")?, p.get("runs")?);
    if runs == 0 {
        return Err(invalid("runs must be positive"));
    }
    let seed = p.seed()?;
    let mut s = String::from("run[1],base[1],order[1],divisor[1],attempts[1],verified[1]\n");
    let mut ok = 0;
    for run in 0..runs {
        match factor(q, &mut sub_rng(seed, run)) {
            Ok(f) => {
                let verified = f.divisor > 1 && f.divisor < q && q % f.divisor == 0 && f.order.is_none_or(|r| pow_mod(f.base, r, q) == 1);
                ok += verified as u64;
                let order = f.order.map_or(String::new(), |r| r.to_string());
                let _ = writeln!(s, "{run},{},{order},{},{},{}", f.base, f.divisor, f.attempts, verified as u8);
            }
            Err(e @ cqs_core::Error::InvalidArgument(_)) => return Err(e.into()),
            Err(_) => {
                let _ = writeln!(s, "{run},,,,,0");
            }
        }
    }
    let rate = ok as f64 / runs as f64;
    let min: f64 = p.get("min_rate")?;
    Ok(Outcome { artifacts: csv("shor", s), metric: "success_rate", value: rate, pass: rate >= min })
}

fn control_qft(p: &Params) -> Result<Outcome, RunError> {
    let n: usize = p.get("n")?;
    let mode_name: String = p.get("mode")?;
    let (mode, auto_tol) = match mode_name.as_str() {
        "deterministic" => (Some(CompensationMode::Deterministic), 1e-6),
        "poisson" => (Some(CompensationMode::Poisson { flips_per_stage: p.get("flips")?, seed: p.seed()? }), 1e-2),
        "periodic" => (Some(CompensationMode::Periodic { tick: p.get("tick")? }), 1e-2),
        "none" => (None, f64::INFINITY),
        other => return Err(invalid(format!("mode must be deterministic, poisson, periodic or none; got `{other}`"))),
    };
    let tol_raw: String = p.get("tolerance")?;
    let tol = if tol_raw == "auto" { auto_tol } else { p.get("tolerance")? };
    let run = qft_via_continuous(n, mode)?;
    let mut s = String::from("stage[1],duration[time],pulses[1]\n");
    for (i, st) in run.stages.iter().enumerate() {
        let _ = writeln!(s, "{i},{},{}", F(st.duration()), st.events.len());
    }
    let mut artifacts = csv("control-qft", s);
    artifacts.push(("control-qft-schedule.txt".into(), run.to_text()));
    Ok(Outcome { artifacts, metric: "distance", value: run.distance, pass: run.distance < tol })
}

fn cnot_synth(p: &Params) -> Result<Outcome, RunError> {
    let e = [p.get("e00")?, p.get("e01")?, p.get("e10")?, p.get("e11")?];
    let r = synthesize_cnot(e, p.get("eps")?)?;
    let s = format!("repetitions[1],delta_e[energy],distance[1]\n{},{},{}\n", r.repetitions, F(r.delta_e), F(r.distance));
    let tol: f64 = p.get("tolerance")?;
    Ok(Outcome { artifacts: csv("cnot-synth", s), metric: "distance", value: r.distance, pass: r.distance < tol })
}

fn fock_check(p: &Params) -> Result<Outcome, RunError> {
    let (max, pairs, trials): (usize, usize, u64) = (p.get("max_levels")?, p.get("pairs")?, p.get("trials")?);
    if max == 0 || max > 10 || pairs == 0 || pairs > 5 {
        return Err(invalid("need 1 ≤ max_levels ≤ 10 and 1 ≤ pairs ≤ 5"));
    }
    let seed = p.seed()?;
    let mut s = String::from("check[1],size[1],deviation[1]\n");
    let mut worst: f64 = 0.0;
    for j in 1..=max {
        let d = car_deviation(j);
        worst = worst.max(d);
        let _ = writeln!(s, "car,{j},{d:e}");
    }
    let pairing = LevelPairing::nested(pairs);
    for t in 0..trials {
        let mut rng = sub_rng(seed, t);
        let mut x = || rng.random_range(-1.0..1.0);
        let off = c(x(), x());
        let h = DMatrix::from_row_slice(2, 2, &[c(x(), 0.0), off, off.conj(), c(x(), 0.0)]);
        let d = (0..pairs).map(|q| intertwine_check(&h, &pairing, q)).collect::<Result<Vec<_>, _>>()?.into_iter().fold(0.0, f64::max);
        worst = worst.max(d);
        let _ = writeln!(s, "intertwine,{t},{d:e}");
    }
    let tol: f64 = p.get("tolerance")?;
    Ok(Outcome { artifacts: csv("fock-check", s), metric: "max_deviation", value: worst, pass: worst < tol })
}

fn qec_cycle(p: &Params) -> Result<Outcome, RunError> {
    let a = c(p.get("alpha_re")?, p.get("alpha_im")?);
    let b = c(p.get("beta_re")?, p.get("beta_im")?);
    let records = run_cycles(a, b, p.get("cycles")?, p.get("error_probability")?, &mut rng_from_seed(p.seed()?))?;
    let last = records.last().map_or(1.0, |r| r.fidelity);
    let dev = (last - 1.0).abs();
    let tol: f64 = p.get("tolerance")?;
    Ok(Outcome { artifacts: csv("qec-cycle", cycles_csv(&records)), metric: "fidelity_deviation", value: dev, pass: dev < tol })
}

fn heat(p: &Params) -> Result<Outcome, RunError> {
    let (m, dx, alpha, factor, steps): (usize, f64, f64, f64, usize) = (p.get("m")?, p.get("dx")?, p.get("alpha")?, p.get("dt_factor")?, p.get("steps")?);
    let scheme: String = p.get("scheme")?;
    let u0 = highest_sine_mode(m, dx)?;
    let dt = factor * explicit_stability_limit(dx, alpha);
    let bc = Dirichlet { left: 0.0, right: 0.0 };
    let (field, pass) = match scheme.as_str() {
        "explicit" => {
            let run = heat_explicit(&u0, alpha, dt, bc, steps)?;
            let grew = max_abs(&run.field) > max_abs(&u0);
            (run.field, run.unstable == grew)
        }
        "sweep" => {
            let f = heat_sweep(&u0, alpha, dt, bc, steps)?;
            let ok = max_abs(&f) <= max_abs(&u0);
            (f, ok)
        }
        other => return Err(invalid(format!("scheme must be explicit or sweep; got `{other}`"))),
    };
    let mut s = String::from("x[length],u0[1],u[1]\n");
    for (j, (a, b)) in u0.values.iter().zip(&field.values).enumerate() {
        let _ = writeln!(s, "{},{},{}", F(u0.x(j)), F(*a), F(*b));
    }
    Ok(Outcome { artifacts: csv("heat", s), metric: "amplification", value: max_abs(&field) / max_abs(&u0), pass })
}

fn split_step_exp(p: &Params) -> Result<Outcome, RunError> {
    let (m, dx, dt, steps): (usize, f64, f64, usize) = (p.get("m")?, p.get("dx")?, p.get("dt")?, p.get("steps")?);
    let (mass, omega, hbar): (f64, f64, f64) = (p.get("mass")?, p.get("omega")?, p.get("hbar")?);
    let psi = harmonic_ground_state(m, dx, -(m as f64) * dx / 2.0, mass, omega, hbar)?;
    let v: Vec<f64> = psi.xs().iter().map(|x| 0.5 * mass * omega * omega * x * x).collect();
    let params = SplitStepParams { hbar, ..SplitStepParams::new(mass, dt, v) };
    let out = split_step(&psi, &params, steps)?;
    let auto = psi.inner(&out).norm();
    let mut s = String::from("x[length],re_psi0[length^-1/2],im_psi0[length^-1/2],re_psi[length^-1/2],im_psi[length^-1/2]\n");
    for (j, (a, b)) in psi.values.iter().zip(&out.values).enumerate() {
        let _ = writeln!(s, "{},{},{},{},{}", F(psi.x(j)), F(a.re), F(a.im), F(b.re), F(b.im));
    }
    let min: f64 = p.get("min_autocorrelation")?;
    Ok(Outcome { artifacts: csv("split-step", s), metric: "autocorrelation", value: auto, pass: auto >= min })
}

fn dmc(p: &Params) -> Result<Outcome, RunError> {
    let (mass, omega, hbar): (f64, f64, f64) = (p.get("mass")?, p.get("omega")?, p.get("hbar")?);
    let params = DmcParams {
        mass,
        hbar,
        step: p.get("step")?,
        p: p.get("p")?,
        samples: p.get("samples")?,
        steps: p.get("steps")?,
        burn_in: p.get("burn_in")?,
    };
    let analytic = (hbar / (mass * omega)).sqrt();
    let bins = Bins { origin: -5.0 * analytic, width: 0.1 * analytic, count: 100 };
    let res = dmc_run(&Potential::harmonic(mass, omega), &params, bins, p.seed()?)?;
    let err = (res.width / analytic - 1.0).abs();
    let mut artifacts = csv("dmc", histogram_csv(bins, &[("density[1/length]", &res.density)]));
    let summary = format!("width = {}\nanalytic_width = {analytic}\nreference_energy = {}\n", res.width, res.reference_energy);
    artifacts.push(("dmc-summary.txt".into(), summary));
    let max: f64 = p.get("max_rel_error")?;
    Ok(Outcome { artifacts, metric: "width_rel_error", value: err, pass: err < max })
}

fn dds(p: &Params) -> Result<Outcome, RunError> {
    let (mass, omega): (f64, f64) = (p.get("mass")?, p.get("omega")?);
    let sigma = (1.0 / (2.0 * mass * omega)).sqrt();
    let params = SwarmParams::calibrated(1, mass, 1.0, p.get("grain")?, p.get("d")?, SQRT_2 * sigma);
    let seed = p.seed()?;
    let bins = Bins { origin: -3.0, width: 0.1, count: 60 };
    let mut sw = gaussian_1d(params, p.get("samples")?, 0.0, sigma, derive_seed(seed, 1))?;
    let h0 = histogram(&sw, bins, 0);
    dds_run(&mut sw, &Potential::harmonic(mass, omega), p.get("dt")?, p.get("steps")?, derive_seed(seed, 2));
    let h1 = histogram(&sw, bins, 0);
    let drift = l1_distance(&h0, &h1, bins.width) / l1_distance(&h0, &vec![0.0; bins.count], bins.width);
    let s = histogram_csv(bins, &[("initial_density[1/length]", &h0), ("final_density[1/length]", &h1)]);
    let max: f64 = p.get("max_drift")?;
    Ok(Outcome { artifacts: csv("dds", s), metric: "l1_drift", value: drift, pass: drift < max })
}

fn bridge(p: &Params) -> Result<Outcome, RunError> {
    let (cells, grain): (usize, f64) = (p.get("cells")?, p.get("grain")?);
    if cells < 2 {
        return Err(invalid("cells must be at least 2"));
    }
    let origin = -(cells as f64) * grain / 2.0;
    let sigma: f64 = p.get("sigma")?;
    let params = SwarmParams::calibrated(1, 1.0, 1.0, grain, p.get("d")?, SQRT_2 * sigma);
    let psi = gaussian_packet(cells, grain, origin + grain / 2.0, 0.0, sigma, p.get("k0")?)?;
    let sw = swarm_from_wavefunction(&psi, p.get("samples")?, params, p.seed()?)?;
    let r = cells / 2;
    let back = wavefunction_from_swarm(&sw, &CellGrid::line(origin, cells, grain), r, psi.values[r].arg())?;
    let l2 = (back.iter().zip(&psi.values).map(|(a, z)| (a - z).norm_sqr()).sum::<f64>() * grain).sqrt();
    let mut s = String::from("x[length],re_psi[length^-1/2],im_psi[length^-1/2],re_back[length^-1/2],im_back[length^-1/2]\n");
    for (j, (a, b)) in psi.values.iter().zip(&back).enumerate() {
        let _ = writeln!(s, "{},{},{},{},{}", F(psi.x(j)), F(a.re), F(a.im), F(b.re), F(b.im));
    }
    let max: f64 = p.get("max_l2")?;
    Ok(Outcome { artifacts: csv("bridge", s), metric: "round_trip_l2", value: l2, pass: l2 < max })
}

fn selection(p: &Params) -> Result<Outcome, RunError> {
    let runs: u64 = p.get("runs")?;
    if runs == 0 {
        return Err(invalid("runs must be positive"));
    }
    let seed = p.seed()?;
    let pot = PairPotential::morse(1.0, 2.0, 1.0);
    let mut s = String::from("run[1],attractive[1],growth[1],mode[length],associated[1]\n");
    let mut history = String::new();
    let (mut hits, mut control_peaks) = (0u64, 0u64);
    for run in 0..runs {
        let mut cfg = SelectionConfig::new(p.get("cell")?, derive_seed(seed, run));
        cfg.max_iterations = p.get("max_iterations")?;
        for (attractive, potential) in [(1, pot), (0, pot.repulsive_only())] {
            let res = association_experiment(&AssociationParams::standard(potential), &cfg)?;
            let assoc = res.associated();
            if attractive == 1 {
                hits += assoc as u64;
                if run == 0 {
                    history = res.to_csv();
                }
            } else {
                control_peaks += ((res.mode() - res.r0).abs() <= 0.1 * res.r0) as u64;
            }
            let _ = writeln!(s, "{run},{attractive},{},{},{}", F(res.growth()), F(res.mode()), assoc as u8);
        }
    }
    let rate = hits as f64 / runs as f64;
    let min: f64 = p.get("min_rate")?;
    let mut artifacts = csv("selection", s);
    artifacts.push(("selection-history.csv".into(), history));
    Ok(Outcome { artifacts, metric: "association_rate", value: rate, pass: rate >= min && control_peaks == 0 })
}

fn born_grain(p: &Params) -> Result<Outcome, RunError> {
    let cfg = BornGrainConfig { branches: p.list("branches")?, jitter: p.get("jitter")?, shots: p.get("shots")?, alpha: p.get("alpha")? };
    let rep = born_grain_experiment(&cfg, &mut rng_from_seed(p.seed()?))?;
    let mut s = String::from("branch[1],count[1],expected_probability[1]\n");
    for (i, (n, e)) in rep.counts.iter().zip(&rep.expected).enumerate() {
        let _ = writeln!(s, "{i},{n},{}", F(*e));
    }
    let mut artifacts = csv("born-grain", s);
    let summary = format!("chi2 = {}\nthreshold = {}\ndof = {}\n", rep.pearson.statistic, rep.pearson.threshold, rep.pearson.dof);
    artifacts.push(("born-grain-summary.txt".into(), summary));
    Ok(Outcome { artifacts, metric: "chi2", value: rep.pearson.statistic, pass: rep.pearson.accept })
}
