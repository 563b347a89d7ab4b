//! Small dense helpers: polynomial roots, Gram-Schmidt, root matching.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

type C = Complex64;

/// Evaluates Σ coeffs[k] z^k.
pub fn poly_eval(coeffs: &[C], z: C) -> C {
    coeffs.iter().rev().fold(C::new(0.0, 0.0), |acc, &a| acc * z + a)
}

pub fn poly_mul(a: &[C], b: &[C]) -> Vec<C> {
    let mut out = vec![C::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn poly_add(a: &[C], b: &[C]) -> Vec<C> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or_default() + b.get(i).copied().unwrap_or_default())
        .collect()
}

fn poly_derivative(coeffs: &[C]) -> Vec<C> {
    coeffs.iter().enumerate().skip(1).map(|(k, a)| a * k as f64).collect()
}

/// All complex roots via Aberth iteration followed by Newton polishing.
pub fn poly_roots(coeffs: &[C]) -> Vec<C> {
    let mut c: Vec<C> = coeffs.to_vec();
    while c.len() > 1 && c.last().is_some_and(|z| z.norm() == 0.0) {
        c.pop();
    }
    let deg = c.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    let lead = c[deg];
    let monic: Vec<C> = c.iter().map(|z| z / lead).collect();
    let d = poly_derivative(&monic);
    // Cauchy bound for the initial circle.
    let radius = 1.0 + monic[..deg].iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut z: Vec<C> = (0..deg)
        .map(|k| C::from_polar(radius * 0.5, 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / deg as f64))
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..deg {
            let p = poly_eval(&monic, z[i]);
            let dp = poly_eval(&d, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let s: C = (0..deg).filter(|&j| j != i).map(|j| C::new(1.0, 0.0) / (z[i] - z[j])).sum();
            let w = ratio / (C::new(1.0, 0.0) - ratio * s);
            z[i] -= w;
            moved = moved.max(w.norm());
        }
        if moved < 1e-15 {
            break;
        }
    }
    for zi in z.iter_mut() {
        for _ in 0..3 {
            let dp = poly_eval(&d, *zi);
            if dp.norm() == 0.0 {
                break;
            }
            *zi -= poly_eval(&monic, *zi) / dp;
        }
    }
    z
}

/// Largest distance after greedily pairing each `a` with its nearest unused `b`.
pub fn match_distance(a: &[C], b: &[C]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    let mut order: Vec<usize> = (0..a.len()).collect();
    // Pair the best-separated points first so near-duplicates do not steal partners.
    order.sort_by(|&i, &j| a[i].re.partial_cmp(&a[j].re).unwrap());
    for i in order {
        let (k, dist) = b
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, z)| (k, (z - a[i]).norm()))
            .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .expect("equal lengths");
        used[k] = true;
        worst = worst.max(dist);
    }
    worst
}

/// Gram-Schmidt over `vectors` in order; dependent vectors (residual norm
/// below `tol`) are skipped. Returns the orthonormal vectors together with
/// the index of the input that produced each.
pub fn gram_schmidt(vectors: &[DVector<C>], tol: f64) -> (Vec<DVector<C>>, Vec<usize>) {
    let mut basis: Vec<DVector<C>> = Vec::new();
    let mut origin = Vec::new();
    for (idx, v) in vectors.iter().enumerate() {
        let mut w = v.clone();
        // Two passes keep orthogonality at machine precision.
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&w);
                w -= b * proj;
            }
        }
        let n = w.norm();
        if n > tol {
            basis.push(w / C::new(n, 0.0));
            origin.push(idx);
        }
    }
    (basis, origin)
}

pub fn gram_matrix(vectors: &[DVector<C>]) -> DMatrix<C> {
    let n = vectors.len();
    DMatrix::from_fn(n, n, |i, j| vectors[i].dotc(&vectors[j]))
}

/// Operator-norm distance bound used for matrix comparisons: max entry modulus.
pub fn max_entry_diff(a: &DMatrix<C>, b: &DMatrix<C>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Spectral norm of a square matrix.
pub fn spectral_norm(a: &DMatrix<C>) -> f64 {
    a.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Distance between two unitaries after removing the best global phase.
pub fn phase_free_distance(a: &DMatrix<C>, b: &DMatrix<C>) -> f64 {
    let tr: C = (a.adjoint() * b).trace();
    let phase = if tr.norm() > 0.0 { tr / tr.norm() } else { C::new(1.0, 0.0) };
    spectral_norm(&(a * phase - b))
}
