//! Fermionic occupation numbers, Slater determinants and the θ-map that
//! embeds qubits into pairs of levels.
//!
//! Levels are 0-based; level s is bit J−1−s of a basis index, so |100⟩ has
//! level 0 occupied. Signs use σ_j = Σ_{s<j} n_s.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::statevec::{c, QuantumState, C64};

const ZERO_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    num_levels: usize,
    amps: Vec<C64>,
}

impl FockState {
    pub fn vacuum(num_levels: usize) -> Self {
        Self::basis(num_levels, &vec![false; num_levels])
    }

    pub fn basis(num_levels: usize, occupations: &[bool]) -> Self {
        assert_eq!(occupations.len(), num_levels);
        let mut amps = vec![c(0.0, 0.0); 1 << num_levels];
        amps[occupation_index(occupations)] = c(1.0, 0.0);
        Self { num_levels, amps }
    }

    /// Parses "101" style occupation strings.
    pub fn from_bits(bits: &str) -> Result<Self> {
        let occ: Vec<bool> = bits
            .chars()
            .map(|ch| match ch {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::InvalidArgument(format!("occupation must be 0/1, got {ch}"))),
            })
            .collect::<Result<_>>()?;
        Ok(Self::basis(occ.len(), &occ))
    }

    pub fn from_amplitudes(num_levels: usize, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != 1 << num_levels {
            return Err(Error::InvalidArgument("amplitude count must be 2^J".into()));
        }
        Ok(Self { num_levels, amps })
    }

    pub fn num_levels(&self) -> usize {
        self.num_levels
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amp(&self, occupations: &[bool]) -> C64 {
        self.amps[occupation_index(occupations)]
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// True when an operator annihilated the state.
    pub fn is_zero(&self) -> bool {
        self.norm() < ZERO_TOL
    }

    pub fn as_vector(&self) -> DVector<C64> {
        DVector::from_column_slice(&self.amps)
    }
}

fn occupation_index(occ: &[bool]) -> usize {
    occ.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

fn occupied(index: usize, level: usize, num_levels: usize) -> bool {
    (index >> (num_levels - 1 - level)) & 1 == 1
}

fn sigma(index: usize, level: usize, num_levels: usize) -> u32 {
    (0..level).filter(|&s| occupied(index, s, num_levels)).count() as u32
}

fn ladder(state: &FockState, level: usize, create: bool) -> FockState {
    let j = state.num_levels;
    assert!(level < j, "level {level} out of range");
    let bit = 1 << (j - 1 - level);
    let mut out = vec![c(0.0, 0.0); state.amps.len()];
    for (idx, &a) in state.amps.iter().enumerate() {
        if a == c(0.0, 0.0) || occupied(idx, level, j) == create {
            continue;
        }
        let sign = if sigma(idx, level, j) % 2 == 0 { 1.0 } else { -1.0 };
        out[idx ^ bit] += a * sign;
    }
    FockState { num_levels: j, amps: out }
}

pub fn annihilate(state: &FockState, level: usize) -> FockState {
    ladder(state, level, false)
}

pub fn create(state: &FockState, level: usize) -> FockState {
    ladder(state, level, true)
}

pub fn annihilation_matrix(num_levels: usize, level: usize) -> DMatrix<C64> {
    let dim = 1 << num_levels;
    let mut m = DMatrix::zeros(dim, dim);
    for idx in 0..dim {
        if occupied(idx, level, num_levels) {
            let sign = if sigma(idx, level, num_levels) % 2 == 0 { 1.0 } else { -1.0 };
            m[(idx ^ (1 << (num_levels - 1 - level)), idx)] = c(sign, 0.0);
        }
    }
    m
}

pub fn creation_matrix(num_levels: usize, level: usize) -> DMatrix<C64> {
    annihilation_matrix(num_levels, level).adjoint()
}

pub fn number_matrix(num_levels: usize, level: usize) -> DMatrix<C64> {
    creation_matrix(num_levels, level) * annihilation_matrix(num_levels, level)
}

pub fn anticommutator(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a * b + b * a
}

/// Largest entry deviation over all three CAR families.
pub fn car_deviation(num_levels: usize) -> f64 {
    let a: Vec<_> = (0..num_levels).map(|j| annihilation_matrix(num_levels, j)).collect();
    let ad: Vec<_> = a.iter().map(|m| m.adjoint()).collect();
    let dim = 1 << num_levels;
    let id = DMatrix::<C64>::identity(dim, dim);
    let zero = DMatrix::<C64>::zeros(dim, dim);
    let mut worst: f64 = 0.0;
    for j in 0..num_levels {
        for k in 0..num_levels {
            let delta = if j == k { &id } else { &zero };
            worst = worst.max(crate::linalg::max_entry_diff(&anticommutator(&a[j], &a[k]), &zero));
            worst = worst.max(crate::linalg::max_entry_diff(&anticommutator(&ad[j], &ad[k]), &zero));
            worst = worst.max(crate::linalg::max_entry_diff(&anticommutator(&a[j], &ad[k]), delta));
        }
    }
    worst
}

/// Antisymmetric wavefunction Ψ(r₁..r_n) = det[f_i(r_j)]/√(n!) on a grid,
/// stored with r₁ as the most significant coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct SlaterState {
    pub grid: usize,
    pub particles: usize,
    pub amps: Vec<C64>,
    /// Set when the functions are linearly dependent (Pauli exclusion).
    pub vanishes: bool,
}

impl SlaterState {
    pub fn amp(&self, coords: &[usize]) -> C64 {
        self.amps[coords.iter().fold(0, |acc, &r| acc * self.grid + r)]
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

pub fn slater_state(functions: &[Vec<C64>], grid: usize) -> Result<SlaterState> {
    let n = functions.len();
    if n == 0 || functions.iter().any(|f| f.len() != grid) {
        return Err(Error::InvalidArgument(format!("need ≥ 1 functions of length {grid}")));
    }
    let total = grid.checked_pow(n as u32).filter(|&t| t <= 1 << 24).ok_or_else(|| Error::InvalidArgument("grid^n too large".into()))?;
    let norm = (1..=n).map(|k| k as f64).product::<f64>().sqrt();
    let mut amps = vec![c(0.0, 0.0); total];
    let mut coords = vec![0usize; n];
    for (idx, slot) in amps.iter_mut().enumerate() {
        let mut rest = idx;
        for p in (0..n).rev() {
            coords[p] = rest % grid;
            rest /= grid;
        }
        let m = DMatrix::from_fn(n, n, |i, j| functions[i][coords[j]]);
        *slot = m.determinant() / norm;
    }
    let vanishes = amps.iter().map(|z| z.norm_sqr()).sum::<f64>() < ZERO_TOL;
    Ok(SlaterState { grid, particles: n, amps, vanishes })
}

/// Lower/upper level pairs; qubit i lives on pair i.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelPairing {
    pub num_levels: usize,
    pub pairs: Vec<(usize, usize)>,
}

impl LevelPairing {
    /// 2k levels, lower half below the Fermi index, pairing j ↔ 2k−1−j.
    pub fn nested(k: usize) -> Self {
        Self { num_levels: 2 * k, pairs: (0..k).map(|j| (j, 2 * k - 1 - j)).collect() }
    }

    pub fn custom(num_levels: usize, pairs: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = vec![false; num_levels];
        for &(lo, up) in &pairs {
            if lo >= up || up >= num_levels {
                return Err(Error::InvalidArgument(format!("pair ({lo}, {up}) must satisfy lower < upper < J")));
            }
            for l in [lo, up] {
                if std::mem::replace(&mut seen[l], true) {
                    return Err(Error::InvalidArgument(format!("level {l} used twice")));
                }
            }
        }
        Ok(Self { num_levels, pairs })
    }

    pub fn num_qubits(&self) -> usize {
        self.pairs.len()
    }

    /// Fock index of the image of qubit basis state `b` (qubit 0 most significant).
    pub fn image_index(&self, b: usize) -> usize {
        let k = self.num_qubits();
        let mut occ = vec![false; self.num_levels];
        for (i, &(lo, up)) in self.pairs.iter().enumerate() {
            if (b >> (k - 1 - i)) & 1 == 0 {
                occ[lo] = true;
            } else {
                occ[up] = true;
            }
        }
        occupation_index(&occ)
    }

    /// Sign of a_lo† a_up inside F: (−1) to the number of occupied levels
    /// strictly between the two, which is fixed for nested pairings.
    pub fn tunneling_sign(&self, qubit: usize) -> Result<f64> {
        let (lo, up) = self.pairs[qubit];
        let k = self.num_qubits();
        let mut sign = None;
        for b in 0..1usize << k {
            if (b >> (k - 1 - qubit)) & 1 == 0 {
                continue;
            }
            let idx = self.image_index(b);
            let between = (lo + 1..up).filter(|&s| occupied(idx, s, self.num_levels)).count();
            let s = if between % 2 == 0 { 1.0 } else { -1.0 };
            match sign {
                None => sign = Some(s),
                Some(prev) if prev != s => {
                    return Err(Error::InvalidArgument(format!("tunneling sign of pair {qubit} varies inside F")));
                }
                _ => {}
            }
        }
        Ok(sign.unwrap_or(1.0))
    }

    /// θ as a 2^J × 2^k isometry.
    pub fn theta_matrix(&self) -> DMatrix<C64> {
        let k = self.num_qubits();
        let mut m = DMatrix::zeros(1 << self.num_levels, 1 << k);
        for b in 0..1usize << k {
            m[(self.image_index(b), b)] = c(1.0, 0.0);
        }
        m
    }
}

pub fn theta_map(state: &QuantumState, pairing: &LevelPairing) -> Result<FockState> {
    if state.num_qubits() != pairing.num_qubits() {
        return Err(Error::RegisterMismatch { expected: pairing.num_qubits(), got: state.num_qubits() });
    }
    let mut amps = vec![c(0.0, 0.0); 1 << pairing.num_levels];
    for (b, &a) in state.amplitudes().iter().enumerate() {
        amps[pairing.image_index(b)] = a;
    }
    Ok(FockState { num_levels: pairing.num_levels, amps })
}

pub const SUBSPACE_TOL: f64 = 1e-10;

pub fn theta_inverse(state: &FockState, pairing: &LevelPairing) -> Result<QuantumState> {
    let k = pairing.num_qubits();
    let amps: Vec<C64> = (0..1usize << k).map(|b| state.amps[pairing.image_index(b)]).collect();
    let inside: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
    let outside = (state.norm().powi(2) - inside).max(0.0).sqrt();
    if outside > SUBSPACE_TOL {
        return Err(Error::OutOfSubspace(outside));
    }
    QuantumState::from_amplitudes(amps)
}

/// α_i n_i + β_ij n_i n_j + (γ_ij a_i† a_j + h.c.).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FockHamiltonian {
    pub alpha: BTreeMap<usize, f64>,
    pub beta: BTreeMap<(usize, usize), f64>,
    pub gamma: BTreeMap<(usize, usize), C64>,
}

pub fn assemble_hamiltonian(h: &FockHamiltonian, num_levels: usize) -> Result<DMatrix<C64>> {
    let dim = 1 << num_levels;
    let check = |l: usize| {
        if l < num_levels {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("level {l} out of range")))
        }
    };
    let n: Vec<_> = (0..num_levels).map(|j| number_matrix(num_levels, j)).collect();
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for (&i, &a) in &h.alpha {
        check(i)?;
        m += &n[i] * c(a, 0.0);
    }
    for (&(i, j), &b) in &h.beta {
        check(i)?;
        check(j)?;
        m += &n[i] * &n[j] * c(b, 0.0);
    }
    for (&(i, j), &g) in &h.gamma {
        check(i)?;
        check(j)?;
        let hop = creation_matrix(num_levels, i) * annihilation_matrix(num_levels, j) * g;
        m += &hop + hop.adjoint();
    }
    Ok(m)
}

/// Fock image of a one-qubit Hermitian H acting on qubit `qubit`:
/// fields h₀₀, h₁₁ on the two levels and tunneling carrying h₀₁.
pub fn lift_one_qubit(h: &DMatrix<C64>, pairing: &LevelPairing, qubit: usize) -> Result<FockHamiltonian> {
    if h.nrows() != 2 || h.ncols() != 2 || crate::linalg::max_entry_diff(h, &h.adjoint()) > 1e-12 {
        return Err(Error::InvalidArgument("one-qubit Hamiltonian must be 2×2 Hermitian".into()));
    }
    let (lo, up) = pairing.pairs[qubit];
    let sign = pairing.tunneling_sign(qubit)?;
    let mut out = FockHamiltonian::default();
    out.alpha.insert(lo, h[(0, 0)].re);
    out.alpha.insert(up, h[(1, 1)].re);
    if h[(0, 1)].norm() > 0.0 {
        out.gamma.insert((lo, up), h[(0, 1)] * sign);
    }
    Ok(out)
}

/// ‖H̃θ − θH‖ for H acting on `qubit` of the paired register.
pub fn intertwine_check(h: &DMatrix<C64>, pairing: &LevelPairing, qubit: usize) -> Result<f64> {
    let lifted = assemble_hamiltonian(&lift_one_qubit(h, pairing, qubit)?, pairing.num_levels)?;
    let theta = pairing.theta_matrix();
    let k = pairing.num_qubits();
    let full = crate::statevec::embed(k, &crate::statevec::GateOp { targets: vec![qubit], matrix: h.clone() });
    Ok((lifted * &theta - theta * full).norm())
}

#[derive(Debug, Clone, PartialEq)]
pub enum QubitGate {
    One { qubit: usize, unitary: DMatrix<C64> },
    /// diag(e^{iφ₀₀}, e^{iφ₀₁}, e^{iφ₁₀}, e^{iφ₁₁}) on (p, q).
    DiagonalPhase { p: usize, q: usize, phases: [f64; 4] },
    Two { p: usize, q: usize, unitary: DMatrix<C64> },
}

/// Hermitian H with e^{−iH} = U for a normal (unitary) matrix.
pub fn unitary_log(u: &DMatrix<C64>) -> DMatrix<C64> {
    let schur = u.clone().schur();
    let (q, t) = schur.unpack();
    let phases = DMatrix::from_diagonal(&DVector::from_iterator(t.nrows(), (0..t.nrows()).map(|i| c(-t[(i, i)].arg(), 0.0))));
    &q * phases * q.adjoint()
}

/// Runs the qubit circuit and its field/tunneling compilation side by side
/// from |0…0⟩ and returns ‖θ(qubit output) − Fock output‖.
pub fn control_equivalence_demo(circuit: &[QubitGate], pairing: &LevelPairing) -> Result<f64> {
    let k = pairing.num_qubits();
    if k > 3 {
        return Err(Error::InvalidArgument("demo supports at most 3 pairs".into()));
    }
    let mut qubits = QuantumState::zero(k);
    let mut fock = theta_map(&qubits, pairing)?.as_vector();
    for gate in circuit {
        let h = match gate {
            QubitGate::One { qubit, unitary } => {
                crate::statevec::apply_matrix_mut(&mut qubits, &[*qubit], unitary)?;
                assemble_hamiltonian(&lift_one_qubit(&unitary_log(unitary), pairing, *qubit)?, pairing.num_levels)?
            }
            QubitGate::DiagonalPhase { p, q, phases } => {
                let d = crate::statevec::gates::diag(&phases.map(|t| C64::from_polar(1.0, t)));
                crate::statevec::apply_matrix_mut(&mut qubits, &[*p, *q], &d)?;
                // Projector on qubit value v of pair i is the number operator of
                // the level that value occupies.
                let level = |i: usize, v: usize| if v == 0 { pairing.pairs[i].0 } else { pairing.pairs[i].1 };
                let mut fh = FockHamiltonian::default();
                for (idx, &phi) in phases.iter().enumerate() {
                    let (lp, lq) = (level(*p, idx >> 1), level(*q, idx & 1));
                    *fh.beta.entry((lp, lq)).or_insert(0.0) -= phi;
                }
                assemble_hamiltonian(&fh, pairing.num_levels)?
            }
            QubitGate::Two { .. } => return Err(Error::UnsupportedModel("non-diagonal two-qubit gate".into())),
        };
        fock = (h * c(0.0, -1.0)).exp() * fock;
    }
    let expected = theta_map(&qubits, pairing)?.as_vector();
    Ok((expected - fock).norm())
}
