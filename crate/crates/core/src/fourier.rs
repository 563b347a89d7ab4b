//! Quantum Fourier transform, its circuit, phase estimation and order finding.
//!
//! Sign convention: `qft` sends |a⟩ to (1/√N) Σ_b e^{−2πi ab/N} |b⟩ and
//! `qft_inverse` uses the + sign.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::statevec::{gates, GateOp, QuantumState};

type C = Complex64;

fn fft_in_place(data: &mut [C], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(data.len()) } else { planner.plan_fft_forward(data.len()) };
    fft.process(data);
    let s = 1.0 / (data.len() as f64).sqrt();
    data.iter_mut().for_each(|z| *z *= s);
}

pub fn qft(state: &QuantumState) -> QuantumState {
    let mut amps = state.amplitudes().to_vec();
    fft_in_place(&mut amps, false);
    QuantumState::from_amplitudes(amps).expect("unitary map keeps the norm")
}

pub fn qft_inverse(state: &QuantumState) -> QuantumState {
    let mut amps = state.amplitudes().to_vec();
    fft_in_place(&mut amps, true);
    QuantumState::from_amplitudes(amps).expect("unitary map keeps the norm")
}

/// Dense QFT (sign −1) or QFT⁻¹ (sign +1) matrix on `n` qubits.
pub fn qft_matrix(n: usize, sign: f64) -> DMatrix<C> {
    let dim = 1usize << n;
    let s = 1.0 / (dim as f64).sqrt();
    DMatrix::from_fn(dim, dim, |b, a| C::from_polar(s, sign * 2.0 * PI * ((a * b) % dim) as f64 / dim as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QftCircuitSpec {
    pub num_qubits: usize,
    /// Controlled phases with k − j above the band are dropped.
    pub truncation_band: Option<usize>,
}

impl QftCircuitSpec {
    pub fn exact(num_qubits: usize) -> Self {
        Self { num_qubits, truncation_band: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CircuitGate {
    H(usize),
    /// diag(1, 1, 1, e^{iπ/2^{k−j}}) on qubits (j, k), j < k.
    CPhase { j: usize, k: usize },
    Swap(usize, usize),
}

impl CircuitGate {
    pub fn to_gate_op(self) -> GateOp {
        match self {
            CircuitGate::H(q) => GateOp::h(q),
            CircuitGate::CPhase { j, k } => {
                GateOp::new(vec![j, k], gates::cphase(PI / f64::powi(2.0, (k - j) as i32))).unwrap()
            }
            CircuitGate::Swap(a, b) => GateOp::new(vec![a, b], gates::swap()).unwrap(),
        }
    }

    pub fn is_swap(&self) -> bool {
        matches!(self, CircuitGate::Swap(..))
    }
}

/// Hadamard on qubit j followed by U_{k,j} for every k > j, then a swap stage
/// that undoes the reversed output order. Composes to QFT⁻¹.
pub fn qft_circuit(spec: QftCircuitSpec) -> Vec<CircuitGate> {
    let l = spec.num_qubits;
    let band = spec.truncation_band.unwrap_or(usize::MAX);
    let mut out = Vec::new();
    for j in 0..l {
        out.push(CircuitGate::H(j));
        for k in j + 1..l {
            if k - j <= band {
                out.push(CircuitGate::CPhase { j, k });
            }
        }
    }
    for q in 0..l / 2 {
        out.push(CircuitGate::Swap(q, l - 1 - q));
    }
    out
}

/// Hadamards plus controlled phases, excluding the swap stage.
pub fn functional_gate_count(circuit: &[CircuitGate]) -> usize {
    circuit.iter().filter(|g| !g.is_swap()).count()
}

pub fn apply_circuit(state: &QuantumState, circuit: &[CircuitGate]) -> QuantumState {
    let mut s = state.clone();
    for g in circuit {
        crate::statevec::apply_gate_mut(&mut s, &g.to_gate_op()).expect("circuit targets are valid");
    }
    s
}

pub fn circuit_matrix(num_qubits: usize, circuit: &[CircuitGate]) -> DMatrix<C> {
    let dim = 1usize << num_qubits;
    let mut m = DMatrix::<C>::zeros(dim, dim);
    for a in 0..dim {
        let col = apply_circuit(&QuantumState::basis(num_qubits, a), circuit);
        m.set_column(a, &nalgebra::DVector::from_column_slice(col.amplitudes()));
    }
    m
}

/// Result of the Rev = QFT₂ · U_cond · QFT₂ sandwich on an m-bit register.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseEstimate {
    /// Joint amplitudes, register index major: `joint[c * dim_target + x]`.
    pub joint: Vec<C>,
    pub m_bits: usize,
    pub dim_target: usize,
}

impl PhaseEstimate {
    /// Probability of each register reading c.
    pub fn register_distribution(&self) -> Vec<f64> {
        self.joint
            .chunks(self.dim_target)
            .map(|row| row.iter().map(|z| z.norm_sqr()).sum())
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        sample_index(&self.register_distribution(), rng) as u64
    }

    /// w = c / 2^m for the most probable reading.
    pub fn most_probable(&self) -> (u64, f64) {
        let d = self.register_distribution();
        let (c, p) = d.iter().enumerate().fold((0, -1.0), |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc });
        (c as u64, p)
    }
}

pub fn sample_index<R: Rng + ?Sized>(dist: &[f64], rng: &mut R) -> usize {
    let total: f64 = dist.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    dist.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Runs the phase-revealing sandwich. `power(alpha, v)` must return U^α v.
pub fn phase_estimation<F>(power: F, input: &[C], m_bits: usize) -> PhaseEstimate
where
    F: Fn(u64, &[C]) -> Vec<C>,
{
    let dim_t = input.len();
    let reg = 1usize << m_bits;
    // QFT₂ on |0⟩ gives the uniform register; U_cond applies U^α to row α.
    let s = 1.0 / (reg as f64).sqrt();
    let mut joint = vec![C::new(0.0, 0.0); reg * dim_t];
    for alpha in 0..reg {
        let row = power(alpha as u64, input);
        for (x, z) in row.into_iter().enumerate() {
            joint[alpha * dim_t + x] = z * s;
        }
    }
    // Second QFT₂ on the register, one transform per target index.
    let mut column = vec![C::new(0.0, 0.0); reg];
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(reg);
    for x in 0..dim_t {
        for alpha in 0..reg {
            column[alpha] = joint[alpha * dim_t + x];
        }
        fft.process(&mut column);
        for c in 0..reg {
            joint[c * dim_t + x] = column[c] * s;
        }
    }
    PhaseEstimate { joint, m_bits, dim_target: dim_t }
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn pow_mod(base: u64, mut exp: u64, modulus: u64) -> u64 {
    if modulus == 1 {
        return 0;
    }
    let mut result = 1u128;
    let mut b = base as u128 % modulus as u128;
    let m = modulus as u128;
    while exp > 0 {
        if exp & 1 == 1 {
            result = result * b % m;
        }
        b = b * b % m;
        exp >>= 1;
    }
    result as u64
}

/// |x⟩ ↦ |y x mod q⟩ for x < q, identity for x ≥ q.
pub fn cond_modmul(state: &QuantumState, y: u64, q: u64) -> Result<QuantumState> {
    let amps = modmul_amplitudes(state.amplitudes(), y, q)?;
    QuantumState::from_amplitudes(amps)
}

pub fn modmul_amplitudes(input: &[C], y: u64, q: u64) -> Result<Vec<C>> {
    if gcd(y, q) != 1 {
        return Err(Error::NonUnitaryMap { y, q });
    }
    if q as usize > input.len() {
        return Err(Error::InvalidArgument(format!("modulus {q} does not fit {} states", input.len())));
    }
    let mut out = vec![C::new(0.0, 0.0); input.len()];
    for (x, &a) in input.iter().enumerate() {
        let target = if (x as u64) < q { ((y as u128 * x as u128) % q as u128) as usize } else { x };
        out[target] += a;
    }
    Ok(out)
}

/// y^α via repeated squaring of y, then the permutation above.
pub fn modmul_power(input: &[C], y: u64, q: u64, alpha: u64) -> Vec<C> {
    modmul_amplitudes(input, pow_mod(y, alpha, q), q).expect("powers of a unit stay coprime")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderFindingInstance {
    pub q: u64,
    pub y: u64,
    /// 2^{n−1} ≤ q < 2^n.
    pub n: usize,
}

impl OrderFindingInstance {
    pub fn new(q: u64, y: u64) -> Result<Self> {
        if q < 3 || y <= 1 || y >= q {
            return Err(Error::InvalidArgument(format!("need 1 < y < q, got y={y}, q={q}")));
        }
        if gcd(y, q) != 1 {
            return Err(Error::NonUnitaryMap { y, q });
        }
        let n = 64 - q.leading_zeros() as usize;
        Ok(Self { q, y, n })
    }

    /// Register width m = 2n.
    pub fn m_bits(&self) -> usize {
        2 * self.n
    }
}

/// Best rational approximation j/r of num/den with r ≤ bound, reduced.
pub fn continued_fraction(num: u64, den: u64, bound: u64) -> (u64, u64) {
    assert!(den > 0 && bound > 0);
    if num == 0 {
        return (0, 1);
    }
    let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
    let (mut a_num, mut a_den) = (num, den);
    loop {
        let a = a_num / a_den;
        let p2 = a * p1 + p0;
        let q2 = a * q1 + q0;
        if q2 > bound {
            // Semiconvergent candidate with the largest admissible multiplier.
            let t = (bound - q0) / q1;
            let (ps, qs) = (p0 + t * p1, q0 + t * q1);
            let target = num as f64 / den as f64;
            let err = |p: u64, q: u64| (target - p as f64 / q as f64).abs();
            return if t > 0 && err(ps, qs) < err(p1, q1) { reduce(ps, qs) } else { reduce(p1, q1) };
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let rem = a_num % a_den;
        if rem == 0 {
            return reduce(p1, q1);
        }
        (a_num, a_den) = (a_den, rem);
    }
}

fn reduce(p: u64, q: u64) -> (u64, u64) {
    let g = gcd(p, q).max(1);
    (p / g, q / g)
}

pub fn classical_order(y: u64, q: u64) -> Option<u64> {
    let mut acc = y % q;
    for r in 1..=q {
        if acc == 1 {
            return Some(r);
        }
        acc = acc * y % q;
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderResult {
    pub r: Option<u64>,
    pub samples_used: usize,
}

pub const MAX_PHASE_SAMPLES: usize = 20;

/// Distribution of register readings for order finding with input |1⟩.
pub fn order_finding_estimate(inst: &OrderFindingInstance) -> PhaseEstimate {
    let dim = 1usize << inst.n;
    let mut input = vec![C::new(0.0, 0.0); dim];
    input[1] = C::new(1.0, 0.0);
    phase_estimation(|alpha, v| modmul_power(v, inst.y, inst.q, alpha), &input, inst.m_bits())
}

/// Samples readings, turns each into a denominator by continued fractions,
/// accumulates their lcm and stops once y^r ≡ 1 (mod q). The returned r is
/// reduced to the minimal period.
pub fn order_find<R: Rng + ?Sized>(inst: &OrderFindingInstance, rng: &mut R) -> OrderResult {
    let est = order_finding_estimate(inst);
    let dist = est.register_distribution();
    order_from_distribution(inst, &dist, rng)
}

pub fn order_from_distribution<R: Rng + ?Sized>(inst: &OrderFindingInstance, dist: &[f64], rng: &mut R) -> OrderResult {
    let reg = 1u64 << inst.m_bits();
    let mut acc = 1u64;
    for s in 1..=MAX_PHASE_SAMPLES {
        let c = sample_index(dist, rng) as u64;
        let (_, r) = continued_fraction(c, reg, inst.q);
        acc = lcm(acc, r);
        if acc > inst.q * inst.q {
            acc = r;
        }
        if pow_mod(inst.y, acc, inst.q) == 1 {
            return OrderResult { r: Some(minimize_period(inst.y, inst.q, acc)), samples_used: s };
        }
    }
    OrderResult { r: None, samples_used: MAX_PHASE_SAMPLES }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

fn minimize_period(y: u64, q: u64, mut r: u64) -> u64 {
    let mut p = 2;
    let mut rest = r;
    while p * p <= rest {
        while rest % p == 0 {
            rest /= p;
            while r % p == 0 && pow_mod(y, r / p, q) == 1 {
                r /= p;
            }
        }
        p += 1;
    }
    if rest > 1 && r % rest == 0 && pow_mod(y, r / rest, q) == 1 {
        r /= rest;
    }
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorResult {
    pub divisor: u64,
    pub base: u64,
    /// Period behind the divisor; None when gcd(y, q) was already nontrivial.
    pub order: Option<u64>,
    pub attempts: usize,
}

pub const FACTOR_TRIAL_CAP: usize = 20;

/// Random bases until an even period with y^{r/2} ≢ −1 gives a divisor.
pub fn factor<R: Rng + ?Sized>(q: u64, rng: &mut R) -> Result<FactorResult> {
    if q < 4 {
        return Err(Error::NoFactor(q));
    }
    if q % 2 == 0 {
        return Ok(FactorResult { divisor: 2, base: 2, order: None, attempts: 0 });
    }
    let mut cache: std::collections::HashMap<u64, Vec<f64>> = std::collections::HashMap::new();
    for attempt in 1..=FACTOR_TRIAL_CAP {
        let y = rng.random_range(2..q);
        let g = gcd(y, q);
        if g != 1 {
            return Ok(FactorResult { divisor: g, base: y, order: None, attempts: attempt });
        }
        let inst = OrderFindingInstance::new(q, y)?;
        let dist = cache.entry(y).or_insert_with(|| order_finding_estimate(&inst).register_distribution());
        let Some(r) = order_from_distribution(&inst, dist, rng).r else { continue };
        if r % 2 == 1 {
            continue;
        }
        let h = pow_mod(y, r / 2, q);
        if h == q - 1 {
            continue;
        }
        for cand in [gcd(h + 1, q), gcd((h + q - 1) % q, q)] {
            if cand > 1 && cand < q {
                return Ok(FactorResult { divisor: cand, base: y, order: Some(r), attempts: attempt });
            }
        }
    }
    Err(Error::NoFactor(q))
}

/// Outcome of the discrete coordinate-momentum commutator study.
#[derive(Debug, Clone, PartialEq)]
pub struct CommutatorReport {
    /// Best constant c with [x, p] ≈ c·I (trace fit).
    pub c_fit: C,
    /// ‖[x,p] − c·I‖_F / ‖[x,p]‖_F.
    pub relative_deviation: f64,
    /// ⟨g_j| [x,p] |g_j⟩ / i for normalized Gaussian packets centred at each node.
    pub packet_values: Vec<f64>,
    /// Largest off-diagonal entry of F p F⁻¹.
    pub momentum_offdiag: f64,
}

/// x = diag(0..N−1) and p = (2π/N) F⁻¹ diag(k) F with centred wave numbers k.
pub fn position_momentum(n: usize) -> (DMatrix<C>, DMatrix<C>) {
    let f = dft_unitary(n);
    let x = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, (0..n).map(|j| C::new(j as f64, 0.0))));
    let k = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        (0..n).map(|j| {
            let kj = if j < n.div_ceil(2) { j as f64 } else { j as f64 - n as f64 };
            C::new(2.0 * PI * kj / n as f64, 0.0)
        }),
    ));
    let p = f.adjoint() * k * &f;
    (x, p)
}

fn dft_unitary(n: usize) -> DMatrix<C> {
    let s = 1.0 / (n as f64).sqrt();
    DMatrix::from_fn(n, n, |b, a| C::from_polar(s, -2.0 * PI * ((a * b) % n) as f64 / n as f64))
}

pub fn commutator_report(x: &DMatrix<C>, p: &DMatrix<C>) -> CommutatorReport {
    let n = x.nrows();
    let comm = x * p - p * x;
    let c_fit = comm.trace() / n as f64;
    let dev = (&comm - DMatrix::<C>::identity(n, n) * c_fit).norm();
    let relative_deviation = if comm.norm() > 0.0 { dev / comm.norm() } else { 0.0 };
    let width = (n as f64).sqrt() / 2.0;
    let packet_values = (0..n)
        .map(|j| {
            let g = nalgebra::DVector::from_iterator(
                n,
                (0..n).map(|i| C::new((-((i as f64 - j as f64).powi(2)) / (2.0 * width * width)).exp(), 0.0)),
            );
            let g = &g / C::new(g.norm(), 0.0);
            (g.adjoint() * &comm * &g)[(0, 0)].im
        })
        .collect();
    let f = dft_unitary(n);
    let pm = &f * p * f.adjoint();
    let momentum_offdiag = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| pm[(i, j)].norm())
        .fold(0.0, f64::max);
    CommutatorReport { c_fit, relative_deviation, packet_values, momentum_offdiag }
}

pub fn commutator_experiment(n: usize) -> Result<CommutatorReport> {
    if n < 4 {
        return Err(Error::InvalidArgument("commutator study needs N ≥ 4".into()));
    }
    let (x, p) = position_momentum(n);
    Ok(commutator_report(&x, &p))
}
