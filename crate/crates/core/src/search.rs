//! Reflections, oracles, Grover search and the generalized search operator.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{poly_add, poly_mul, poly_roots};
use crate::statevec::{measure, QuantumState, NORM_TOL};

type C = Complex64;

/// Predicate over n-bit inputs, stored as a truth table.
#[derive(Debug, Clone, PartialEq)]
pub struct BooleanOracle {
    arity: usize,
    table: Vec<bool>,
}

impl BooleanOracle {
    pub fn from_fn(arity: usize, f: impl Fn(usize) -> bool) -> Self {
        Self { arity, table: (0..1usize << arity).map(f).collect() }
    }

    pub fn from_solutions(arity: usize, solutions: &[usize]) -> Self {
        Self::from_fn(arity, |x| solutions.contains(&x))
    }

    /// Parses "bits value" lines, e.g. `0101 1`. Blank lines and `#` comments
    /// are skipped; inputs that never appear map to 0.
    pub fn from_truth_table(text: &str) -> Result<Self> {
        let mut arity = None;
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse = |msg: &str| Error::Parse { line: i + 1, msg: msg.to_string() };
            let mut it = line.split_whitespace();
            let bits = it.next().ok_or_else(|| parse("missing bits"))?;
            let value = it.next().ok_or_else(|| parse("missing value"))?;
            if it.next().is_some() {
                return Err(parse("trailing fields"));
            }
            if !bits.chars().all(|ch| ch == '0' || ch == '1') {
                return Err(parse("bits must be 0/1"));
            }
            match arity {
                None => arity = Some(bits.len()),
                Some(a) if a != bits.len() => return Err(parse("inconsistent bit width")),
                _ => {}
            }
            let x = usize::from_str_radix(bits, 2).map_err(|_| parse("bad bits"))?;
            let v = match value {
                "0" => false,
                "1" => true,
                _ => return Err(parse("value must be 0 or 1")),
            };
            entries.push((x, v));
        }
        let arity = arity.ok_or(Error::Parse { line: 0, msg: "empty truth table".into() })?;
        let mut table = vec![false; 1 << arity];
        for (x, v) in entries {
            table[x] = v;
        }
        Ok(Self { arity, table })
    }

    pub fn to_truth_table(&self) -> String {
        self.table
            .iter()
            .enumerate()
            .map(|(x, &v)| format!("{:0w$b} {}\n", x, v as u8, w = self.arity))
            .collect()
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn eval(&self, x: usize) -> bool {
        self.table[x]
    }

    pub fn solutions(&self) -> Vec<usize> {
        (0..self.table.len()).filter(|&x| self.table[x]).collect()
    }
}

/// |a, b⟩ ↦ |a, b ⊕ f(a)⟩ with the answer qubit last.
pub fn oracle_apply(state: &QuantumState, oracle: &BooleanOracle) -> Result<QuantumState> {
    let expected = oracle.arity + 1;
    if state.num_qubits() != expected {
        return Err(Error::RegisterMismatch { expected, got: state.num_qubits() });
    }
    let src = state.amplitudes();
    let mut out = src.to_vec();
    for (j, slot) in out.iter_mut().enumerate() {
        if oracle.eval(j >> 1) {
            *slot = src[j ^ 1];
        }
    }
    QuantumState::from_amplitudes(out)
}

/// I_a b = b − 2⟨a|b⟩a.
pub fn reflect(state: &QuantumState, axis: &QuantumState) -> Result<QuantumState> {
    let n2 = axis.norm_sqr();
    if (n2 - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(n2));
    }
    let proj = axis.inner(state);
    let amps: Vec<C> = state
        .amplitudes()
        .iter()
        .zip(axis.amplitudes())
        .map(|(b, a)| b - a * proj * 2.0)
        .collect();
    QuantumState::from_amplitudes(amps)
}

/// Sign flip on every solution: the phase form of the oracle, I_tar.
pub fn phase_oracle(state: &mut QuantumState, oracle: &BooleanOracle) {
    for (x, a) in state.amplitudes_mut().iter_mut().enumerate() {
        if oracle.eval(x) {
            *a = -*a;
        }
    }
}

/// One Grover iterate G = −I_{φ0} I_tar. Since I_{φ0} b = b − 2⟨φ0|b⟩φ0,
/// −I_{φ0} is inversion about the mean.
pub fn grover_iterate(state: &mut QuantumState, oracle: &BooleanOracle) {
    phase_oracle(state, oracle);
    let amps = state.amplitudes_mut();
    let mean: C = amps.iter().sum::<C>() / amps.len() as f64;
    for a in amps.iter_mut() {
        *a = mean * 2.0 - *a;
    }
}

/// ⌊π / (4 |⟨tar|φ0⟩|)⌋ with |⟨tar|φ0⟩| = √(l/N); zero solutions fall back to ⌊π√N/4⌋.
pub fn grover_iterations(num_qubits: usize, solutions: usize) -> usize {
    let n = (1u64 << num_qubits) as f64;
    let l = solutions.max(1) as f64;
    (std::f64::consts::PI / (4.0 * (l / n).sqrt())).floor() as usize
}

/// sin²((2t+1)θ), θ = arcsin √(l/N).
pub fn grover_closed_form(num_qubits: usize, solutions: usize, t: usize) -> f64 {
    let n = (1u64 << num_qubits) as f64;
    let theta = (solutions as f64 / n).sqrt().asin();
    ((2 * t + 1) as f64 * theta).sin().powi(2)
}

/// State after `t` iterates from φ0.
pub fn grover_state(oracle: &BooleanOracle, t: usize) -> QuantumState {
    let mut s = QuantumState::uniform(oracle.arity);
    for _ in 0..t {
        grover_iterate(&mut s, oracle);
    }
    s
}

pub fn success_probability(state: &QuantumState, oracle: &BooleanOracle) -> f64 {
    oracle.solutions().iter().map(|&x| state.amp(x).norm_sqr()).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroverOutcome {
    pub found: Option<usize>,
    pub measured: usize,
    pub iterations: usize,
    pub success_probability: f64,
    /// Oracle calls including the classical verification.
    pub queries: usize,
}

/// Runs the known-count schedule, measures, and verifies the result with one
/// classical oracle call.
pub fn grover_search<R: Rng + ?Sized>(oracle: &BooleanOracle, rng: &mut R) -> GroverOutcome {
    let l = oracle.solutions().len();
    let t = grover_iterations(oracle.arity, l);
    let state = grover_state(oracle, t);
    let p = success_probability(&state, oracle);
    let measured = measure_all(&state, rng);
    let found = oracle.eval(measured).then_some(measured);
    GroverOutcome { found, measured, iterations: t, success_probability: p, queries: t + 1 }
}

fn measure_all<R: Rng + ?Sized>(state: &QuantumState, rng: &mut R) -> usize {
    let qubits: Vec<usize> = (0..state.num_qubits()).collect();
    let (bits, _) = measure(state, &qubits, rng).expect("normalized state");
    bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)
}

/// Run lengths 1, 2, 4, … not exceeding `cap_factor·√N`.
pub fn doubling_schedule(num_qubits: usize, cap_factor: f64) -> Vec<usize> {
    let limit = cap_factor * ((1u64 << num_qubits) as f64).sqrt();
    let mut out = Vec::new();
    let mut t = 1usize;
    while t as f64 <= limit {
        out.push(t);
        t *= 2;
    }
    out
}

pub const DOUBLING_CAP: f64 = 3.0;

/// Unknown solution count: each stage restarts from φ0, runs its length,
/// measures and verifies. Queries count iterates plus verifications.
pub fn grover_unknown_count<R: Rng + ?Sized>(oracle: &BooleanOracle, cap_factor: f64, rng: &mut R) -> GroverOutcome {
    let mut queries = 0;
    let mut last = 0;
    let mut iterations = 0;
    for t in doubling_schedule(oracle.arity, cap_factor) {
        let state = grover_state(oracle, t);
        queries += t + 1;
        iterations += t;
        last = measure_all(&state, rng);
        if oracle.eval(last) {
            return GroverOutcome {
                found: Some(last),
                measured: last,
                iterations,
                success_probability: success_probability(&state, oracle),
                queries,
            };
        }
    }
    GroverOutcome { found: None, measured: last, iterations, success_probability: 0.0, queries }
}

/// Group sizes l_1..l_m (group 2 holds the targets) and rotation angles
/// d_1..d_{m−2} of the extra groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedSearchInstance {
    pub sizes: Vec<u64>,
    pub angles: Vec<f64>,
}

impl GeneralizedSearchInstance {
    pub fn new(sizes: Vec<u64>, angles: Vec<f64>) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Degenerate("need at least two groups".into()));
        }
        if sizes[1] == 0 {
            return Err(Error::Degenerate("target group l_2 is empty".into()));
        }
        if angles.len() != sizes.len() - 2 {
            return Err(Error::Degenerate(format!(
                "{} groups need {} angles, got {}",
                sizes.len(),
                sizes.len() - 2,
                angles.len()
            )));
        }
        Ok(Self { sizes, angles })
    }

    pub fn m(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> f64 {
        self.sizes.iter().sum::<u64>() as f64
    }

    /// γ = X = √(l_2/N).
    pub fn gamma(&self) -> f64 {
        (self.sizes[1] as f64 / self.total()).sqrt()
    }

    /// x = 2√(l_2/N).
    pub fn x(&self) -> f64 {
        2.0 * self.gamma()
    }

    /// y_j = 2√(l_{j+2}/N).
    pub fn y(&self) -> Vec<f64> {
        let n = self.total();
        self.sizes[2..].iter().map(|&l| 2.0 * (l as f64 / n).sqrt()).collect()
    }

    pub fn v(&self) -> Vec<C> {
        self.angles.iter().map(|&d| C::from_polar(1.0, d)).collect()
    }

    /// Coordinates of 0̃ (the uniform superposition) in e_1..e_m.
    pub fn start(&self) -> DVector<C> {
        let n = self.total();
        DVector::from_iterator(self.m(), self.sizes.iter().map(|&l| C::new((l as f64 / n).sqrt(), 0.0)))
    }

    /// U = diag(1, −1, −v_1, …, −v_{m−2}).
    pub fn u_diag(&self) -> Vec<C> {
        let mut d = vec![C::new(1.0, 0.0), C::new(-1.0, 0.0)];
        d.extend(self.v().into_iter().map(|v| -v));
        d
    }

    /// Index (into `angles`) of the largest d_k; lowest index wins a tie.
    pub fn dominant_angle(&self) -> Option<(usize, bool)> {
        let max = self.angles.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let first = self.angles.iter().position(|&d| d == max)?;
        let tied = self.angles.iter().filter(|&&d| d == max).count() > 1;
        Some((first, tied))
    }
}

/// The first-order operator G_app obtained by multiplying the approximate
/// reflection with U: first row (1, −x, −y_k v_k), second row (x, 1, 0…),
/// row k+2 (y_k, 0…, v_k on the diagonal).
pub fn build_generalized_operator(inst: &GeneralizedSearchInstance) -> DMatrix<C> {
    let m = inst.m();
    let x = inst.x();
    let y = inst.y();
    let v = inst.v();
    let mut g = DMatrix::<C>::zeros(m, m);
    g[(0, 0)] = C::new(1.0, 0.0);
    g[(0, 1)] = C::new(-x, 0.0);
    g[(1, 0)] = C::new(x, 0.0);
    g[(1, 1)] = C::new(1.0, 0.0);
    for k in 0..m - 2 {
        g[(0, k + 2)] = -v[k] * y[k];
        g[(k + 2, 0)] = C::new(y[k], 0.0);
        g[(k + 2, k + 2)] = v[k];
    }
    g
}

/// Exact G = −I_{0̃} U on span(e_1..e_m).
pub fn exact_generalized_operator(inst: &GeneralizedSearchInstance) -> DMatrix<C> {
    let m = inst.m();
    let s = inst.start();
    let refl = DMatrix::<C>::identity(m, m) - (&s * s.adjoint()) * C::new(2.0, 0.0);
    let u = DMatrix::from_diagonal(&DVector::from_vec(inst.u_diag()));
    -(refl * u)
}

/// Coefficients (ascending powers of λ) of det(G_app − λI) built by the
/// recursion p_0 = (1−λ)² + x², p_k = (v_k − λ)p_{k−1} + y_k² v_k (1−λ) Π_{i<k}(v_i − λ).
pub fn char_poly_coeffs(inst: &GeneralizedSearchInstance) -> Vec<C> {
    let one = C::new(1.0, 0.0);
    let x = inst.x();
    let y = inst.y();
    let v = inst.v();
    let one_minus = vec![one, -one];
    let mut p = poly_add(&poly_mul(&one_minus, &one_minus), &[C::new(x * x, 0.0)]);
    let mut prod = vec![one];
    for k in 0..v.len() {
        let factor = vec![v[k], -one];
        let extra = poly_mul(&poly_mul(&one_minus, &prod), &[v[k] * y[k] * y[k]]);
        p = poly_add(&poly_mul(&factor, &p), &extra);
        prod = poly_mul(&prod, &factor);
    }
    p
}

/// p_{m−2}(λ) evaluated directly through the recursion.
pub fn char_poly(inst: &GeneralizedSearchInstance, lambda: C) -> C {
    let one = C::new(1.0, 0.0);
    let x = inst.x();
    let y = inst.y();
    let mut p = (one - lambda) * (one - lambda) + x * x;
    let mut prod = one;
    for (k, v) in inst.v().into_iter().enumerate() {
        p = (v - lambda) * p + v * y[k] * y[k] * (one - lambda) * prod;
        prod *= v - lambda;
    }
    p
}

pub fn eigenvalues(g: &DMatrix<C>) -> Vec<C> {
    Schur::new(g.clone()).eigenvalues().expect("complex Schur form is triangular").iter().copied().collect()
}

pub fn char_poly_roots(inst: &GeneralizedSearchInstance) -> Vec<C> {
    poly_roots(&char_poly_coeffs(inst))
}

/// The two eigenvalues of G_app nearest 1, ordered by increasing argument.
pub fn leading_eigenvalues(inst: &GeneralizedSearchInstance) -> (C, C) {
    let mut ev = eigenvalues(&build_generalized_operator(inst));
    ev.sort_by(|a, b| (a - 1.0).norm().partial_cmp(&(b - 1.0).norm()).unwrap());
    let (a, b) = (ev[0], ev[1]);
    if a.arg() <= b.arg() {
        (a, b)
    } else {
        (b, a)
    }
}

/// Largest deviation of the leading eigenphases from ±x, in units of γ.
pub fn gamma_ratio(inst: &GeneralizedSearchInstance) -> f64 {
    let (lo, hi) = leading_eigenvalues(inst);
    let x = inst.x();
    ((lo.arg() + x).abs()).max((hi.arg() - x).abs()) / inst.gamma()
}

/// Eigenvector of G_app for `lambda`, scaled so its e_1 component equals i.
pub fn eigenvector_scaled(inst: &GeneralizedSearchInstance, lambda: C) -> DVector<C> {
    let g = build_generalized_operator(inst);
    let m = g.nrows();
    let shifted = g - DMatrix::<C>::identity(m, m) * lambda;
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    let vec: DVector<C> = v_t.row(k).adjoint();
    let scale = C::new(0.0, 1.0) / vec[0];
    vec * scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedTrace {
    /// |⟨e_2|state⟩|² after 0..=t iterations.
    pub probabilities: Vec<f64>,
    pub iterations: usize,
    /// Asymptotic hypotheses not comfortably met.
    pub hypothesis_warning: bool,
    /// Several extra groups share the maximal angle.
    pub tie_warning: bool,
}

impl GeneralizedTrace {
    pub fn final_probability(&self) -> f64 {
        *self.probabilities.last().unwrap()
    }
}

/// Iterates the exact G for t = ⌊(π/4)√(N/l_2)⌋ steps from 0̃.
pub fn generalized_search(inst: &GeneralizedSearchInstance) -> GeneralizedTrace {
    let g = exact_generalized_operator(inst);
    let n = inst.total();
    let l2 = inst.sizes[1] as f64;
    let t = (std::f64::consts::FRAC_PI_4 * (n / l2).sqrt()).floor() as usize;
    let mut s = inst.start();
    let mut probabilities = vec![s[1].norm_sqr()];
    for _ in 0..t {
        s = &g * s;
        probabilities.push(s[1].norm_sqr());
    }
    let (hypothesis_warning, tie_warning) = hypothesis_flags(inst);
    GeneralizedTrace { probabilities, iterations: t, hypothesis_warning, tie_warning }
}

/// Soft checks of the asymptotic hypotheses: l_1/N close to 1, the extra
/// weight small against d√(N l_2), and √(l_2/N) small against d.
pub fn hypothesis_flags(inst: &GeneralizedSearchInstance) -> (bool, bool) {
    let n = inst.total();
    let l1 = inst.sizes[0] as f64;
    let l2 = inst.sizes[1] as f64;
    let Some((k, tied)) = inst.dominant_angle() else {
        return (l1 / n < 0.9, false);
    };
    let d = inst.angles[k];
    let extra = n - l1 - l2;
    let warn = l1 / n < 0.9 || d <= 0.0 || extra / (d * (n * l2).sqrt()) > 0.25 || (l2 / n).sqrt() / d > 0.25;
    (warn, tied)
}

/// l_2 targets plus one extra group of l_3 elements at angle d; the rest sit in group 1.
pub fn extra_group_instance(n: u64, l2: u64, l3: u64, d: f64) -> GeneralizedSearchInstance {
    GeneralizedSearchInstance::new(vec![n - l2 - l3, l2, l3], vec![d]).expect("valid sizes")
}
