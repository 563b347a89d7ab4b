//! Three-qubit code against single computational-basis measurements.
//!
//! Qubits 0..3 carry the code, 3..6 are ancilla. Inside a ket |abc⟩ the
//! letters are coding qubits 0, 1, 2.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{gram_matrix, gram_schmidt, max_entry_diff};
use crate::statevec::{c, gates, measure, QuantumState, C64, NORM_TOL};

pub const CODE_QUBITS: usize = 3;
pub const TOTAL_QUBITS: usize = 6;

/// ĩ with an optional measurement record (coding qubit, outcome).
pub fn logical_basis(i: u8, error: Option<(usize, u8)>) -> DVector<C64> {
    let mut v = DVector::from_fn(8, |x, _| {
        let sign = if i == 1 && x.count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        c(sign / 8f64.sqrt(), 0.0)
    });
    if let Some((j, k)) = error {
        for x in 0..8 {
            if ((x >> (CODE_QUBITS - 1 - j)) & 1) as u8 != k {
                v[x] = c(0.0, 0.0);
            }
        }
        v *= c(2f64.sqrt(), 0.0);
    }
    v
}

/// The seven records: none, then (j, k) for j = 0..3, k = 0..2.
pub fn error_records() -> Vec<Option<(usize, u8)>> {
    std::iter::once(None).chain((0..3).flat_map(|j| (0..2).map(move |k| Some((j, k))))).collect()
}

fn with_ancilla(code: &DVector<C64>, ancilla: &DVector<C64>) -> DVector<C64> {
    DVector::from_fn(64, |idx, _| code[idx >> 3] * ancilla[idx & 7])
}

fn ancilla_zero() -> DVector<C64> {
    let mut v = DVector::zeros(8);
    v[0] = c(1.0, 0.0);
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodeState {
    pub state: QuantumState,
    pub alpha: C64,
    pub beta: C64,
}

impl CodeState {
    /// α·0̃ + β·1̃ with ancilla |000⟩.
    pub fn ideal(&self) -> QuantumState {
        logical_state(self.alpha, self.beta, None)
    }

    /// |⟨ideal|state⟩|, global phase quotiented.
    pub fn fidelity(&self) -> f64 {
        self.ideal().fidelity(&self.state)
    }
}

fn logical_state(alpha: C64, beta: C64, error: Option<(usize, u8)>) -> QuantumState {
    let code = logical_basis(0, error) * alpha + logical_basis(1, error) * beta;
    let v = with_ancilla(&code, &ancilla_zero());
    QuantumState::from_amplitudes(v.as_slice().to_vec()).expect("normalized code word")
}

pub fn encode(alpha: C64, beta: C64) -> Result<CodeState> {
    let n = alpha.norm_sqr() + beta.norm_sqr();
    if (n - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(n));
    }
    Ok(CodeState { state: logical_state(alpha, beta, None), alpha, beta })
}

/// Projective measurement of coding qubit j; returns the outcome.
pub fn inject_measurement_error<R: Rng + ?Sized>(code: &CodeState, j: usize, rng: &mut R) -> Result<(u8, CodeState)> {
    if j >= CODE_QUBITS {
        return Err(Error::InvalidArgument(format!("coding qubit {j} out of range")));
    }
    let (bits, post) = measure(&code.state, &[j], rng)?;
    Ok((bits[0], CodeState { state: post, ..code.clone() }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlipConjugation {
    /// X·measure·X: still a computational-basis record, corrected.
    X,
    /// H·measure·H: a measurement in the ± basis, outside the code's model.
    H,
}

pub fn inject_conjugated_error<R: Rng + ?Sized>(
    code: &CodeState,
    j: usize,
    conj: FlipConjugation,
    rng: &mut R,
) -> Result<(u8, CodeState)> {
    let g = match conj {
        FlipConjugation::X => gates::x(),
        FlipConjugation::H => gates::h(),
    };
    let mut s = code.state.clone();
    crate::statevec::apply_matrix_mut(&mut s, &[j], &g)?;
    let (k, mut post) = inject_measurement_error(&CodeState { state: s, ..code.clone() }, j, rng)?;
    crate::statevec::apply_matrix_mut(&mut post.state, &[j], &g)?;
    Ok((k, post))
}

pub const GRAM_TOL: f64 = 1e-10;

/// Domain ĩ^j_k ⊗ |000⟩ and image ĩ ⊗ 0̃^j_k families, 14 vectors each.
pub fn recovery_families() -> (Vec<DVector<C64>>, Vec<DVector<C64>>) {
    let mut domain = Vec::new();
    let mut image = Vec::new();
    for i in 0..2u8 {
        for rec in error_records() {
            domain.push(with_ancilla(&logical_basis(i, rec), &ancilla_zero()));
            image.push(with_ancilla(&logical_basis(i, None), &logical_basis(0, rec)));
        }
    }
    (domain, image)
}

pub fn gram_mismatch() -> f64 {
    let (d, i) = recovery_families();
    max_entry_diff(&gram_matrix(&d), &gram_matrix(&i))
}

fn complete(basis: &mut Vec<DVector<C64>>, dim: usize) {
    let mut candidates = basis.clone();
    candidates.extend((0..dim).map(|e| {
        let mut v = DVector::zeros(dim);
        v[e] = c(1.0, 0.0);
        v
    }));
    *basis = gram_schmidt(&candidates, 1e-9).0;
}

/// U_rest: the isometry fixed on the 14 vectors, extended to a unitary by
/// Gram–Schmidt over the standard basis in index order.
pub fn build_recovery() -> Result<DMatrix<C64>> {
    let (domain, image) = recovery_families();
    let mismatch = max_entry_diff(&gram_matrix(&domain), &gram_matrix(&image));
    if mismatch > GRAM_TOL {
        return Err(Error::GramMismatch(mismatch));
    }
    // Orthonormalize the domain; carry the same combinations over to the image.
    let dim = 64;
    let v = DMatrix::from_columns(&domain);
    let w = DMatrix::from_columns(&image);
    let pinv = v.clone().pseudo_inverse(1e-10).map_err(|e| Error::Degenerate(e.to_string()))?;
    let map = &w * pinv;
    let (mut dom_basis, _) = gram_schmidt(&domain, 1e-9);
    let mut img_basis: Vec<DVector<C64>> = dom_basis.iter().map(|d| &map * d).collect();
    let rank = dom_basis.len();
    complete(&mut dom_basis, dim);
    complete(&mut img_basis, dim);
    debug_assert_eq!(dom_basis.len(), dim);
    debug_assert!(rank <= dim);
    let u = DMatrix::from_columns(&img_basis) * DMatrix::from_columns(&dom_basis).adjoint();
    Ok(u)
}

/// U_rest, ancilla measurement, ancilla reset.
pub fn correction_cycle<R: Rng + ?Sized>(code: &CodeState, recovery: &DMatrix<C64>, rng: &mut R) -> Result<(Vec<u8>, CodeState)> {
    let v = recovery * code.state.as_column();
    let restored = QuantumState::normalized(v.column(0).iter().copied().collect())?;
    let (bits, mut post) = measure(&restored, &[3, 4, 5], rng)?;
    for (i, &b) in bits.iter().enumerate() {
        if b == 1 {
            crate::statevec::apply_matrix_mut(&mut post, &[3 + i], &gates::x())?;
        }
    }
    Ok((bits, CodeState { state: post, ..code.clone() }))
}

/// Ancilla outcome probabilities right after U_rest.
pub fn ancilla_distribution(code: &CodeState, recovery: &DMatrix<C64>) -> Result<Vec<f64>> {
    let v = recovery * code.state.as_column();
    let s = QuantumState::normalized(v.column(0).iter().copied().collect())?;
    Ok(crate::statevec::outcome_distribution(&s, &[3, 4, 5]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub cycle: usize,
    /// (coding qubit, outcome) when an error struck before this cycle.
    pub error: Option<(usize, u8)>,
    pub fidelity: f64,
}

/// Repeated correction with an independent error chance before each cycle.
pub fn run_cycles<R: Rng + ?Sized>(
    alpha: C64,
    beta: C64,
    cycles: usize,
    error_probability: f64,
    rng: &mut R,
) -> Result<Vec<CycleRecord>> {
    let recovery = build_recovery()?;
    let mut code = encode(alpha, beta)?;
    let mut out = Vec::with_capacity(cycles);
    for cycle in 0..cycles {
        let mut error = None;
        if rng.random::<f64>() < error_probability {
            let j = rng.random_range(0..CODE_QUBITS);
            let (k, post) = inject_measurement_error(&code, j, rng)?;
            code = post;
            error = Some((j, k));
        }
        code = correction_cycle(&code, &recovery, rng)?.1;
        out.push(CycleRecord { cycle, error, fidelity: code.fidelity() });
    }
    Ok(out)
}

pub fn cycles_csv(records: &[CycleRecord]) -> String {
    let mut s = String::from("cycle[1],error_qubit[1],outcome[1],fidelity[1]\n");
    for r in records {
        let (j, k) = match r.error {
            Some((j, k)) => (j.to_string(), k.to_string()),
            None => (String::new(), String::new()),
        };
        s.push_str(&format!("{},{},{},{:.15}\n", r.cycle, j, k, r.fidelity));
    }
    s
}
