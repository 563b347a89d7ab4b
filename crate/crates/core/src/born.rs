//! Born frequencies from amplitude-grain reduction.
//!
//! Each summand λ_j of a state is split into l_j sub-branches of amplitude
//! λ_j/√l_j. All sub-branches then share one modulus; a slight seeded jitter
//! breaks the tie and a reduction with the grain set to the largest modulus
//! leaves exactly one survivor per shot. Survivor counts per summand are
//! compared with |λ_j|² = l_j/L.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::statevec::{reduce_amplitudes, QuantumState, ReductionParams};
use crate::stats::{pearson_check, PearsonResult};

#[derive(Debug, Clone, PartialEq)]
pub struct BornGrainConfig {
    /// Sub-branch count per summand; Born weights are l_j / Σ l.
    pub branches: Vec<usize>,
    /// Relative jitter applied to every sub-branch amplitude.
    pub jitter: f64,
    pub shots: usize,
    pub alpha: f64,
}

impl Default for BornGrainConfig {
    fn default() -> Self {
        Self { branches: vec![16, 48], jitter: 1e-3, shots: 10_000, alpha: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BornGrainReport {
    pub counts: Vec<u64>,
    pub expected: Vec<f64>,
    pub pearson: PearsonResult,
    /// Every count inside the 3σ multinomial band.
    pub within_3sigma: bool,
}

pub fn born_grain_experiment<R: Rng + ?Sized>(cfg: &BornGrainConfig, rng: &mut R) -> Result<BornGrainReport> {
    if cfg.branches.is_empty() || cfg.branches.contains(&0) {
        return Err(Error::InvalidArgument("every summand needs at least one sub-branch".into()));
    }
    let total: usize = cfg.branches.iter().sum();
    let dim = total.next_power_of_two();
    let expected: Vec<f64> = cfg.branches.iter().map(|&l| l as f64 / total as f64).collect();
    // Owner summand of each sub-branch slot.
    let owner: Vec<usize> = cfg
        .branches
        .iter()
        .enumerate()
        .flat_map(|(j, &l)| std::iter::repeat_n(j, l))
        .collect();
    let mut counts = vec![0u64; cfg.branches.len()];
    for _ in 0..cfg.shots {
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        for (slot, &j) in owner.iter().enumerate() {
            let lam = expected[j].sqrt();
            let noise: f64 = StandardNormal.sample(rng);
            amps[slot] = Complex64::new(lam / (cfg.branches[j] as f64).sqrt() * (1.0 + cfg.jitter * noise), 0.0);
        }
        let state = QuantumState::normalized(amps)?;
        let grain = state.amplitudes().iter().map(|a| a.norm()).fold(0.0, f64::max);
        let reduced = reduce_amplitudes(&state, ReductionParams::new(grain.min(1.0 - 1e-15))?)?;
        let survivor = reduced
            .amplitudes()
            .iter()
            .position(|a| a.norm_sqr() > 0.0)
            .expect("reduction keeps at least one amplitude");
        counts[owner[survivor]] += 1;
    }
    let pearson = pearson_check(&counts, &expected, cfg.alpha)?;
    let n = cfg.shots as f64;
    let within_3sigma = counts
        .iter()
        .zip(&expected)
        .all(|(&k, &p)| (k as f64 - n * p).abs() <= 3.0 * (n * p * (1.0 - p)).sqrt());
    Ok(BornGrainReport { counts, expected, pearson, within_3sigma })
}
