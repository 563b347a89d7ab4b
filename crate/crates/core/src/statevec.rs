//! Exact n-qubit state vectors.
//!
//! Basis index `j` stores qubit 0 in its most significant bit, so for three
//! qubits `|100⟩` is index 4. Every module uses this ordering.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const NORM_TOL: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    num_qubits: usize,
    amps: Vec<C64>,
}

impl QuantumState {
    /// `|0…0⟩`.
    pub fn zero(num_qubits: usize) -> Self {
        Self::basis(num_qubits, 0)
    }

    pub fn basis(num_qubits: usize, index: usize) -> Self {
        let dim = 1usize << num_qubits;
        assert!(index < dim, "basis index {index} out of range for {num_qubits} qubits");
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Self { num_qubits, amps }
    }

    /// Uniform superposition `φ0 = W^n |0⟩`.
    pub fn uniform(num_qubits: usize) -> Self {
        let dim = 1usize << num_qubits;
        let a = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Self { num_qubits, amps: vec![a; dim] }
    }

    /// Checked constructor: length must be a power of two and the vector normalized.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let s = Self::from_amplitudes_unnormalized(amps)?;
        let n2 = s.norm_sqr();
        if (n2 - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(n2));
        }
        Ok(s)
    }

    /// Accepts any nonzero vector of power-of-two length and rescales it.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        let mut s = Self::from_amplitudes_unnormalized(amps)?;
        let n = s.norm_sqr().sqrt();
        if n == 0.0 {
            return Err(Error::NotNormalized(0.0));
        }
        s.amps.iter_mut().for_each(|a| *a /= n);
        Ok(s)
    }

    fn from_amplitudes_unnormalized(amps: Vec<C64>) -> Result<Self> {
        let dim = amps.len();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("length {dim} is not a power of two")));
        }
        Ok(Self { num_qubits: dim.trailing_zeros() as usize, amps })
    }

    /// Random state with Gaussian components, normalized.
    pub fn random<R: Rng + ?Sized>(num_qubits: usize, rng: &mut R) -> Self {
        use rand_distr::{Distribution, StandardNormal};
        let dim = 1usize << num_qubits;
        let amps: Vec<C64> = (0..dim)
            .map(|_| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
            .collect();
        Self::normalized(amps).expect("gaussian vector is nonzero")
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn amp(&self, index: usize) -> C64 {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &Self) -> C64 {
        assert_eq!(self.dim(), other.dim());
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// |⟨self|other⟩|, insensitive to global phase.
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.inner(other).norm()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn scale(&mut self, factor: C64) {
        self.amps.iter_mut().for_each(|a| *a *= factor);
    }

    /// Index of the bit that stores `qubit` inside a basis index.
    pub fn bit_of(&self, qubit: usize) -> usize {
        self.num_qubits - 1 - qubit
    }

    /// Dense matrix acting on the full space, for oracle comparisons.
    pub fn as_column(&self) -> DMatrix<C64> {
        DMatrix::from_column_slice(self.dim(), 1, &self.amps)
    }
}

/// A 1-3 qubit unitary applied to an ordered list of targets. The first
/// target is the most significant bit of the gate's local index.
#[derive(Debug, Clone, PartialEq)]
pub struct GateOp {
    pub targets: Vec<usize>,
    pub matrix: DMatrix<C64>,
}

impl GateOp {
    pub fn new(targets: Vec<usize>, matrix: DMatrix<C64>) -> Result<Self> {
        let k = targets.len();
        if !(1..=3).contains(&k) {
            return Err(Error::InvalidGate(format!("{k} targets; expected 1 to 3")));
        }
        let dim = 1usize << k;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::InvalidGate(format!(
                "matrix is {}x{}, expected {dim}x{dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let dev = unitarity_deviation(&matrix);
        if dev > 1e-12 {
            return Err(Error::InvalidGate(format!("matrix not unitary (deviation {dev:e})")));
        }
        Ok(Self { targets, matrix })
    }

    pub fn h(q: usize) -> Self {
        Self::new(vec![q], gates::h()).unwrap()
    }

    pub fn x(q: usize) -> Self {
        Self::new(vec![q], gates::x()).unwrap()
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self::new(vec![control, target], gates::cnot()).unwrap()
    }
}

/// max |U U† − I|.
pub fn unitarity_deviation(m: &DMatrix<C64>) -> f64 {
    let prod = m * m.adjoint();
    let id = DMatrix::<C64>::identity(m.nrows(), m.ncols());
    (prod - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Fixed small gates.
pub mod gates {
    use super::{c, C64};
    use nalgebra::DMatrix;

    fn from_rows(dim: usize, rows: &[C64]) -> DMatrix<C64> {
        DMatrix::from_row_slice(dim, dim, rows)
    }

    pub fn id2() -> DMatrix<C64> {
        DMatrix::identity(2, 2)
    }

    pub fn h() -> DMatrix<C64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        from_rows(2, &[c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)])
    }

    pub fn x() -> DMatrix<C64> {
        from_rows(2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
    }

    pub fn z() -> DMatrix<C64> {
        diag(&[c(1.0, 0.0), c(-1.0, 0.0)])
    }

    pub fn phase(theta: f64) -> DMatrix<C64> {
        diag(&[c(1.0, 0.0), C64::from_polar(1.0, theta)])
    }

    pub fn cnot() -> DMatrix<C64> {
        let o = c(0.0, 0.0);
        let l = c(1.0, 0.0);
        from_rows(4, &[l, o, o, o, o, l, o, o, o, o, o, l, o, o, l, o])
    }

    /// Controlled phase diag(1, 1, 1, e^{iθ}).
    pub fn cphase(theta: f64) -> DMatrix<C64> {
        diag(&[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), C64::from_polar(1.0, theta)])
    }

    pub fn swap() -> DMatrix<C64> {
        let o = c(0.0, 0.0);
        let l = c(1.0, 0.0);
        from_rows(4, &[l, o, o, o, o, o, l, o, o, l, o, o, o, o, o, l])
    }

    pub fn diag(d: &[C64]) -> DMatrix<C64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d))
    }

    /// Kronecker product with `a` acting on the more significant factor.
    pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
        a.kronecker(b)
    }
}

fn check_targets(n: usize, targets: &[usize]) -> Result<()> {
    for (i, &t) in targets.iter().enumerate() {
        if t >= n {
            return Err(Error::InvalidGate(format!("target {t} out of range for {n} qubits")));
        }
        if targets[..i].contains(&t) {
            return Err(Error::InvalidGate(format!("duplicate target {t}")));
        }
    }
    Ok(())
}

/// Applies `gate` on its targets and the identity elsewhere.
pub fn apply_gate(state: &QuantumState, gate: &GateOp) -> Result<QuantumState> {
    let mut out = state.clone();
    apply_gate_mut(&mut out, gate)?;
    Ok(out)
}

pub fn apply_gate_mut(state: &mut QuantumState, gate: &GateOp) -> Result<()> {
    apply_matrix_mut(state, &gate.targets, &gate.matrix)
}

/// Same as [`apply_gate_mut`] without the unitarity requirement on the matrix,
/// for projectors and operator-level oracles.
pub fn apply_matrix_mut(state: &mut QuantumState, targets: &[usize], m: &DMatrix<C64>) -> Result<()> {
    let n = state.num_qubits;
    check_targets(n, targets)?;
    let k = targets.len();
    let local = 1usize << k;
    if m.nrows() != local || m.ncols() != local {
        return Err(Error::InvalidGate("matrix size does not match target count".into()));
    }
    let masks: Vec<usize> = targets.iter().map(|&t| 1usize << (n - 1 - t)).collect();
    let all: usize = masks.iter().sum();
    let offsets: Vec<usize> = (0..local)
        .map(|l| {
            (0..k)
                .filter(|&i| l & (1 << (k - 1 - i)) != 0)
                .map(|i| masks[i])
                .sum()
        })
        .collect();
    let mut buf = vec![C64::new(0.0, 0.0); local];
    for base in 0..state.dim() {
        if base & all != 0 {
            continue;
        }
        for (l, off) in offsets.iter().enumerate() {
            buf[l] = state.amps[base | off];
        }
        for (r, off) in offsets.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (col, b) in buf.iter().enumerate() {
                acc += m[(r, col)] * b;
            }
            state.amps[base | off] = acc;
        }
    }
    Ok(())
}

/// Full 2^n × 2^n matrix of a gate, used by oracles.
pub fn embed(num_qubits: usize, gate: &GateOp) -> DMatrix<C64> {
    let dim = 1usize << num_qubits;
    let mut out = DMatrix::<C64>::zeros(dim, dim);
    for j in 0..dim {
        let col = apply_gate(&QuantumState::basis(num_qubits, j), gate).expect("valid gate");
        out.set_column(j, &nalgebra::DVector::from_column_slice(col.amplitudes()));
    }
    out
}

/// Outcome bits listed in the order of `qubits`.
pub type Outcome = Vec<u8>;

/// Projective computational-basis measurement of `qubits`.
pub fn measure<R: Rng + ?Sized>(
    state: &QuantumState,
    qubits: &[usize],
    rng: &mut R,
) -> Result<(Outcome, QuantumState)> {
    if qubits.is_empty() {
        return Err(Error::InvalidArgument("empty qubit set".into()));
    }
    check_targets(state.num_qubits, qubits).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let dist = outcome_distribution(state, qubits);
    let u: f64 = rng.random::<f64>() * dist.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut chosen = dist.len() - 1;
    for (i, p) in dist.iter().enumerate() {
        acc += p;
        if u < acc && *p > 0.0 {
            chosen = i;
            break;
        }
    }
    // Never land on an empty outcome because of round-off at the top end.
    while dist[chosen] == 0.0 {
        chosen -= 1;
    }
    let bits = index_to_bits(chosen, qubits.len());
    let post = project(state, qubits, &bits)?;
    Ok((bits, post))
}

/// Probability of each joint outcome of `qubits`, indexed with the first
/// listed qubit as the most significant bit.
pub fn outcome_distribution(state: &QuantumState, qubits: &[usize]) -> Vec<f64> {
    let n = state.num_qubits;
    let mut dist = vec![0.0; 1 << qubits.len()];
    for (j, a) in state.amps.iter().enumerate() {
        let mut o = 0usize;
        for &q in qubits {
            o = (o << 1) | ((j >> (n - 1 - q)) & 1);
        }
        dist[o] += a.norm_sqr();
    }
    dist
}

fn index_to_bits(index: usize, width: usize) -> Outcome {
    (0..width).map(|i| ((index >> (width - 1 - i)) & 1) as u8).collect()
}

/// Projects onto the given outcome and renormalizes.
pub fn project(state: &QuantumState, qubits: &[usize], bits: &[u8]) -> Result<QuantumState> {
    let n = state.num_qubits;
    let amps: Vec<C64> = state
        .amps
        .iter()
        .enumerate()
        .map(|(j, a)| {
            let keep = qubits.iter().zip(bits).all(|(&q, &b)| ((j >> (n - 1 - q)) & 1) as u8 == b);
            if keep {
                *a
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    QuantumState::normalized(amps)
}

/// Product state with `a` on the leading qubits.
pub fn tensor(a: &QuantumState, b: &QuantumState) -> QuantumState {
    let mut amps = Vec::with_capacity(a.dim() * b.dim());
    for x in &a.amps {
        for y in &b.amps {
            amps.push(x * y);
        }
    }
    QuantumState { num_qubits: a.num_qubits + b.num_qubits, amps }
}

fn check_weights(w: &[C64]) -> Result<()> {
    let s: f64 = w.iter().map(|z| z.norm_sqr()).sum();
    if (s - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(s));
    }
    Ok(())
}

/// `λ₁|0…0⟩ + λ₂|1…1⟩` on `k` qubits (the qubit case of the GHZ family,
/// whose local dimension is two).
pub fn ghz_state(k: usize, weights: &[C64]) -> Result<QuantumState> {
    if k == 0 || weights.len() != 2 {
        return Err(Error::InvalidArgument("GHZ over qubits takes k ≥ 1 and two weights".into()));
    }
    check_weights(weights)?;
    let mut s = QuantumState::zero(k);
    s.amps[0] = weights[0];
    s.amps[(1 << k) - 1] = weights[1];
    Ok(s)
}

/// `λ₁|10…0⟩ + λ₂|01…0⟩ + … + λ_k|0…01⟩`.
pub fn w_state(k: usize, weights: &[C64]) -> Result<QuantumState> {
    if k == 0 || weights.len() != k {
        return Err(Error::InvalidArgument("W state needs one weight per qubit".into()));
    }
    check_weights(weights)?;
    let mut amps = vec![C64::new(0.0, 0.0); 1 << k];
    for (i, w) in weights.iter().enumerate() {
        amps[1 << (k - 1 - i)] = *w;
    }
    Ok(QuantumState { num_qubits: k, amps })
}

pub fn equal_weights(k: usize) -> Vec<C64> {
    vec![C64::new(1.0 / (k as f64).sqrt(), 0.0); k]
}

/// Reduced density matrix on `keep` (ordered as listed).
pub fn reduced_density(state: &QuantumState, keep: &[usize]) -> Result<DMatrix<C64>> {
    let n = state.num_qubits;
    check_targets(n, keep).map_err(|e| Error::InvalidPartition(e.to_string()))?;
    let rest: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let da = 1usize << keep.len();
    let db = 1usize << rest.len();
    let index = |a: usize, b: usize| -> usize {
        let mut j = 0usize;
        for (i, &q) in keep.iter().enumerate() {
            if a & (1 << (keep.len() - 1 - i)) != 0 {
                j |= 1 << (n - 1 - q);
            }
        }
        for (i, &q) in rest.iter().enumerate() {
            if b & (1 << (rest.len() - 1 - i)) != 0 {
                j |= 1 << (n - 1 - q);
            }
        }
        j
    };
    let mut rho = DMatrix::<C64>::zeros(da, da);
    for b in 0..db {
        for a1 in 0..da {
            let x = state.amps[index(a1, b)];
            if x == C64::new(0.0, 0.0) {
                continue;
            }
            for a2 in 0..da {
                rho[(a1, a2)] += x * state.amps[index(a2, b)].conj();
            }
        }
    }
    Ok(rho)
}

/// Von Neumann entropy −Tr ρ_A ln ρ_A of the subsystem `partition`.
pub fn entanglement_entropy(state: &QuantumState, partition: &[usize]) -> Result<f64> {
    let n = state.num_qubits;
    if partition.is_empty() || partition.len() >= n {
        return Err(Error::InvalidPartition("partition must be non-empty and proper".into()));
    }
    let rho = reduced_density(state, partition)?;
    let eig = SymmetricEigen::new(rho);
    Ok(eig
        .eigenvalues
        .iter()
        .filter(|&&p| p > 1e-15)
        .map(|&p| -p * p.ln())
        .sum())
}

/// Amplitude grain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionParams {
    pub epsilon: f64,
}

impl ReductionParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::InvalidArgument(format!("grain {epsilon} outside [0, 1)")));
        }
        Ok(Self { epsilon })
    }
}

/// Drops every amplitude with modulus below the grain and renormalizes.
pub fn reduce_amplitudes(state: &QuantumState, params: ReductionParams) -> Result<QuantumState> {
    let eps = params.epsilon;
    let amps: Vec<C64> = state
        .amps
        .iter()
        .map(|a| if a.norm() < eps { C64::new(0.0, 0.0) } else { *a })
        .collect();
    if amps.iter().all(|a| a.norm_sqr() == 0.0) {
        return Err(Error::TotalReduction(eps));
    }
    QuantumState::normalized(amps)
}

pub use crate::stats::{pearson_check, PearsonResult};
