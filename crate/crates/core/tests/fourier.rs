use std::f64::consts::PI;

use cqs_core::fourier::*;
use cqs_core::rng::{rng_from_seed, sub_rng};
use cqs_core::statevec::{c, QuantumState, C64};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Textbook O(N²) transform, sign −1 forward.
fn naive_dft(a: &[C64], sign: f64) -> Vec<C64> {
    let n = a.len();
    let s = 1.0 / (n as f64).sqrt();
    (0..n)
        .map(|b| {
            (0..n)
                .map(|x| a[x] * C64::from_polar(s, sign * 2.0 * PI * (x * b) as f64 / n as f64))
                .sum()
        })
        .collect()
}

fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Spectral norm via the largest singular value.
fn op_norm(m: &DMatrix<C64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

#[test]
fn qft_of_zero_is_uniform() {
    let out = qft(&QuantumState::zero(4));
    assert!(out.amplitudes().iter().all(|a| (a - c(0.25, 0.0)).norm() < 1e-15));
}

#[test]
fn one_qubit_qft_is_hadamard() {
    let m = qft_matrix(1, -1.0);
    assert!(max_diff(&m, &cqs_core::statevec::gates::h()) < 1e-15);
    let s = QuantumState::random(1, &mut rng_from_seed(1));
    let via_gate = cqs_core::statevec::apply_gate(&s, &cqs_core::statevec::GateOp::h(0)).unwrap();
    assert!(qft(&s).max_abs_diff(&via_gate) < 1e-15);
}

#[test]
fn qft_matches_naive_sum() {
    let s = QuantumState::random(6, &mut rng_from_seed(2));
    let fast = qft(&s);
    let slow = naive_dft(s.amplitudes(), -1.0);
    assert!(fast.amplitudes().iter().zip(&slow).all(|(a, b)| (a - b).norm() < 1e-12));
    let back = qft_inverse(&fast);
    assert!(back.max_abs_diff(&s) < 1e-12);
}

#[test]
fn three_qubit_circuit_matches_matrix() {
    let circ = qft_circuit(QftCircuitSpec::exact(3));
    assert!(max_diff(&circuit_matrix(3, &circ), &qft_matrix(3, 1.0)) < 1e-12);
}

#[test]
fn circuit_gate_count() {
    for l in 1..9 {
        let circ = qft_circuit(QftCircuitSpec::exact(l));
        assert_eq!(functional_gate_count(&circ), l + l * (l - 1) / 2);
    }
}

#[test]
fn truncation_error_decreases_with_band() {
    let l = 6;
    let exact = qft_matrix(l, 1.0);
    let errs: Vec<f64> = (1..=l)
        .map(|b| {
            let spec = QftCircuitSpec { num_qubits: l, truncation_band: Some(b) };
            op_norm(&(circuit_matrix(l, &qft_circuit(spec)) - &exact))
        })
        .collect();
    for w in errs.windows(2) {
        assert!(w[1] < w[0] || w[1] < 1e-12, "{errs:?}");
    }
    assert!(errs[l - 1] < 1e-12);
}

fn phase_power(phase: f64) -> impl Fn(u64, &[C64]) -> Vec<C64> {
    move |alpha, v| v.iter().map(|z| z * C64::from_polar(1.0, 2.0 * PI * phase * alpha as f64)).collect()
}

#[test]
fn phase_estimation_exact_fraction() {
    let est = phase_estimation(phase_power(3.0 / 8.0), &[c(1.0, 0.0)], 3);
    let dist = est.register_distribution();
    assert!((dist[0b011] - 1.0).abs() < 1e-12);
    assert_eq!(est.most_probable().0, 3);
}

#[test]
fn phase_estimation_mixed_eigenstates() {
    // Diagonal U with eigenphases 1/4 and 5/8 on two basis vectors.
    let phases = [0.25, 0.625];
    let x = [c(0.6, 0.0), c(0.0, 0.8)];
    let power = move |alpha: u64, v: &[C64]| -> Vec<C64> {
        v.iter()
            .zip(phases)
            .map(|(z, w)| z * C64::from_polar(1.0, 2.0 * PI * w * alpha as f64))
            .collect()
    };
    let m = 3;
    let est = phase_estimation(power, &x, m);
    let mut expect = vec![c(0.0, 0.0); (1 << m) * 2];
    for k in 0..2 {
        let reading = (phases[k] * 8.0) as usize;
        expect[reading * 2 + k] = x[k];
    }
    assert!(est.joint.iter().zip(&expect).all(|(a, b)| (a - b).norm() < 1e-10));
}

#[test]
fn phase_estimation_non_representable() {
    let est = phase_estimation(phase_power(1.0 / 3.0), &[c(1.0, 0.0)], 5);
    let (reading, p) = est.most_probable();
    // Nearest 5-bit fraction to 1/3 is 11/32.
    assert_eq!(reading, 11);
    assert!(p >= 4.0 / (PI * PI));
    // Independent enumeration of |Σ_α e^{2πiα(w − c/M)}|²/M².
    let mm = 32.0;
    let direct: f64 = (0..32)
        .map(|a| C64::from_polar(1.0, 2.0 * PI * a as f64 * (1.0 / 3.0 - 11.0 / mm)))
        .sum::<C64>()
        .norm_sqr()
        / (mm * mm);
    assert!((p - direct).abs() < 1e-12);
}

#[test]
fn order_examples() {
    let inst = OrderFindingInstance::new(15, 2).unwrap();
    assert_eq!(inst.m_bits(), 8);
    assert_eq!(classical_order(2, 15), Some(4));
    assert_eq!(order_find(&inst, &mut rng_from_seed(3)).r, Some(4));
    let inst = OrderFindingInstance::new(15, 4).unwrap();
    let r = order_find(&inst, &mut rng_from_seed(4)).r.unwrap();
    assert_eq!(r, 2);
    assert_eq!(gcd(pow_mod(4, r / 2, 15) + 1, 15), 5);
}

#[test]
fn factor_fifteen() {
    for seed in 0..10 {
        let f = factor(15, &mut sub_rng(5, seed)).unwrap();
        assert!(f.divisor == 3 || f.divisor == 5, "{f:?}");
    }
}

#[test]
fn factor_prime_fails() {
    assert!(matches!(factor(13, &mut rng_from_seed(6)), Err(cqs_core::Error::NoFactor(13))));
}

#[test]
fn order_recovery_rate() {
    for q in [15u64, 21, 33] {
        let mut ok = 0;
        for seed in 0..50 {
            let mut rng = sub_rng(q, seed);
            let y = loop {
                let y = rand::Rng::random_range(&mut rng, 2..q);
                if gcd(y, q) == 1 {
                    break y;
                }
            };
            let inst = OrderFindingInstance::new(q, y).unwrap();
            let out = order_find(&inst, &mut rng);
            if let Some(r) = out.r {
                assert_eq!(pow_mod(y, r, q), 1);
                assert!(out.samples_used <= MAX_PHASE_SAMPLES);
                ok += (Some(r) == classical_order(y, q)) as usize;
            }
        }
        assert!(ok >= 48, "q={q}: {ok}/50");
    }
}

#[test]
fn modmul_examples() {
    let s = QuantumState::random(3, &mut rng_from_seed(7));
    assert_eq!(cond_modmul(&s, 1, 5).unwrap(), s);
    let out = cond_modmul(&QuantumState::basis(3, 3), 2, 5).unwrap();
    assert_eq!(out, QuantumState::basis(3, 1));
    let out = cond_modmul(&QuantumState::basis(3, 7), 2, 5).unwrap();
    assert_eq!(out, QuantumState::basis(3, 7));
    assert!(matches!(cond_modmul(&s, 3, 6), Err(cqs_core::Error::NonUnitaryMap { .. })));
}

#[test]
fn modmul_is_permutation() {
    for (y, q) in [(2u64, 15u64), (7, 15), (4, 21), (5, 33)] {
        let dim = 64;
        let mut seen = vec![false; dim];
        for x in 0..dim {
            let mut e = vec![c(0.0, 0.0); dim];
            e[x] = c(1.0, 0.0);
            let out = modmul_amplitudes(&e, y, q).unwrap();
            let t = out.iter().position(|z| z.norm() > 0.5).unwrap();
            assert!(!seen[t]);
            seen[t] = true;
        }
    }
}

/// Exhaustive search over all j/r with r ≤ bound.
fn brute_fraction(num: u64, den: u64, bound: u64) -> (u64, u64) {
    let target = num as f64 / den as f64;
    let mut best = (0, 1);
    let mut err = f64::INFINITY;
    for r in 1..=bound {
        for j in 0..=r {
            let e = (target - j as f64 / r as f64).abs();
            if e < err - 1e-15 {
                err = e;
                best = (j / gcd(j, r).max(1), r / gcd(j, r).max(1));
            }
        }
    }
    best
}

#[test]
fn continued_fraction_examples() {
    assert_eq!(continued_fraction(1, 4, 16), (1, 4));
    assert_eq!(continued_fraction(11, 32, 8), (1, 3));
    assert_eq!(brute_fraction(11, 32, 8), (1, 3));
    assert_eq!(continued_fraction(0, 32, 8), (0, 1));
}

#[test]
fn commutator_report_properties() {
    let rep = commutator_experiment(32).unwrap();
    assert!(rep.momentum_offdiag < 1e-12);
    let n = rep.packet_values.len();
    let interior = &rep.packet_values[n / 4..3 * n / 4];
    let mean = interior.iter().sum::<f64>() / interior.len() as f64;
    let spread = interior.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    let edge = (rep.packet_values[0] - mean).abs().max((rep.packet_values[n - 1] - mean).abs());
    assert!(spread < edge, "interior spread {spread}, edge {edge}");
    // Conjugating both operators by the DFT leaves the constant-fit report unchanged.
    let (x, p) = position_momentum(32);
    let f = qft_matrix(5, -1.0);
    let conj = commutator_report(&(&f * &x * f.adjoint()), &(&f * &p * f.adjoint()));
    assert!((conj.c_fit - rep.c_fit).norm() < 1e-10);
    assert!((conj.relative_deviation - rep.relative_deviation).abs() < 1e-10);
    assert!(commutator_experiment(3).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn qft_is_unitary(n in 1usize..=10) {
        if n <= 7 {
            let m = qft_matrix(n, -1.0);
            prop_assert!(cqs_core::statevec::unitarity_deviation(&m) < 1e-12);
        } else {
            // Norm and inner products survive the fast transform.
            let mut rng = rng_from_seed(n as u64);
            let a = QuantumState::random(n, &mut rng);
            let b = QuantumState::random(n, &mut rng);
            prop_assert!((qft(&a).inner(&qft(&b)) - a.inner(&b)).norm() < 1e-12);
        }
    }

    #[test]
    fn circuit_matches_matrix(n in 1usize..=8) {
        let circ = qft_circuit(QftCircuitSpec::exact(n));
        prop_assert!(max_diff(&circuit_matrix(n, &circ), &qft_matrix(n, 1.0)) < 1e-12);
    }

    #[test]
    fn continued_fraction_reduced(num in 0u64..4096, bound in 1u64..64) {
        let (j, r) = continued_fraction(num, 4096, bound);
        prop_assert_eq!(gcd(j, r), 1);
        prop_assert!(r <= bound);
        let target = num as f64 / 4096.0;
        let (bj, br) = brute_fraction(num, 4096, bound);
        prop_assert!((target - j as f64 / r as f64).abs() <= (target - bj as f64 / br as f64).abs() + 1e-15);
    }
}
