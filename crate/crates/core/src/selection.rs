//! Genetic selection over cortege scenarios: group (initial, final)
//! configurations in the doubled space, keep the dense groups, refill by
//! crossover, repeat.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, sub_rng};

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPair {
    pub id: u64,
    /// One coordinate per particle component (1D desk scale).
    pub ini: Vec<f64>,
    pub fin: Vec<f64>,
    /// Velocities attached to `fin`, carried by the dynamics.
    pub vel: Vec<f64>,
    /// Id of the cortege each component was inherited from.
    pub origin: Vec<u64>,
}

impl ScenarioPair {
    pub fn new(id: u64, positions: Vec<f64>, velocities: Vec<f64>) -> Self {
        let n = positions.len();
        Self { id, ini: positions.clone(), fin: positions, vel: velocities, origin: vec![id; n] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KeepRule {
    /// Top k₁ groups.
    Count(usize),
    /// Largest groups until this share of all scenarios is covered.
    Coverage(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionConfig {
    pub cell: f64,
    pub keep: KeepRule,
    /// Minimum group size n₀.
    pub min_group: usize,
    pub seed: u64,
    pub max_iterations: usize,
}

pub const DEFAULT_COVERAGE: f64 = 0.8;
pub const DEFAULT_MIN_GROUP: usize = 4;
/// Kept sizes are stable once they change by less than this…
pub const STABLE_REL_CHANGE: f64 = 0.01;
/// …over this many consecutive iterations.
pub const STABLE_ITERATIONS: usize = 3;

impl SelectionConfig {
    pub fn new(cell: f64, seed: u64) -> Self {
        Self { cell, keep: KeepRule::Coverage(DEFAULT_COVERAGE), min_group: DEFAULT_MIN_GROUP, seed, max_iterations: 50 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_group < 2 {
            return Err(Error::InvalidArgument("n₀ must be at least 2".into()));
        }
        match self.keep {
            KeepRule::Count(0) => Err(Error::InvalidArgument("k₁ must be at least 1".into())),
            KeepRule::Coverage(c) if !(c > 0.0 && c <= 1.0) => Err(Error::InvalidArgument("coverage must lie in (0, 1]".into())),
            _ if !(self.cell > 0.0) => Err(Error::InvalidArgument("cell size must be positive".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub key: Vec<i64>,
    /// Indices into the scenario slice, ascending.
    pub members: Vec<usize>,
}

pub fn cell_key(p: &ScenarioPair, cell: f64) -> Vec<i64> {
    p.ini.iter().chain(&p.fin).map(|&v| (v / cell).floor() as i64).collect()
}

/// Groups sorted by size, larger first; equal sizes by key.
pub fn group(pairs: &[ScenarioPair], config: &SelectionConfig) -> Vec<Group> {
    let mut map: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, p) in pairs.iter().enumerate() {
        map.entry(cell_key(p, config.cell)).or_default().push(i);
    }
    let mut groups: Vec<Group> = map.into_iter().map(|(key, members)| Group { key, members }).collect();
    groups.sort_by(|a, b| b.members.len().cmp(&a.members.len()).then_with(|| a.key.cmp(&b.key)));
    groups
}

/// Indices of the surviving scenarios under the keep rule.
pub fn survivors(groups: &[Group], total: usize, config: &SelectionConfig) -> Result<Vec<usize>> {
    let eligible = groups.iter().filter(|g| g.members.len() >= config.min_group);
    let mut kept: Vec<usize> = Vec::new();
    match config.keep {
        KeepRule::Count(k) => eligible.take(k).for_each(|g| kept.extend(&g.members)),
        KeepRule::Coverage(share) => {
            for g in eligible {
                if kept.len() as f64 >= share * total as f64 {
                    break;
                }
                kept.extend(&g.members);
            }
        }
    }
    if kept.is_empty() {
        return Err(Error::SelectionCollapse);
    }
    kept.sort_unstable();
    Ok(kept)
}

/// Keeps the selected groups and refills to the original count by crossover:
/// each child component comes from one of two uniformly drawn survivors.
pub fn reject_and_replicate(pairs: &[ScenarioPair], groups: &[Group], config: &SelectionConfig, seed: u64) -> Result<Vec<ScenarioPair>> {
    let kept = survivors(groups, pairs.len(), config)?;
    let mut out: Vec<ScenarioPair> = kept.iter().map(|&i| pairs[i].clone()).collect();
    let mut next_id = pairs.iter().map(|p| p.id).max().map_or(0, |m| m + 1);
    let mut rng = rng_from_seed(seed);
    while out.len() < pairs.len() {
        let a = &pairs[kept[rng.random_range(0..kept.len())]];
        let b = &pairs[kept[rng.random_range(0..kept.len())]];
        let mut child = ScenarioPair { id: next_id, ini: a.ini.clone(), fin: a.fin.clone(), vel: a.vel.clone(), origin: a.origin.clone() };
        for j in 0..a.fin.len() {
            if rng.random::<bool>() {
                child.ini[j] = b.ini[j];
                child.fin[j] = b.fin[j];
                child.vel[j] = b.vel[j];
                child.origin[j] = b.origin[j];
            }
        }
        next_id += 1;
        out.push(child);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionHistory {
    /// Ensemble after each iteration's selection.
    pub ensembles: Vec<Vec<ScenarioPair>>,
    pub kept_sizes: Vec<usize>,
    /// Iteration at which the kept sizes stabilized, if they did.
    pub stabilized_at: Option<usize>,
}

/// Iterates evolve → group → reject/replicate. `step` moves every scenario's
/// `fin`/`vel` forward; before each call `ini` is reset to the current `fin`.
pub fn run_selection<F>(mut step: F, initial: Vec<ScenarioPair>, config: &SelectionConfig) -> Result<SelectionHistory>
where
    F: FnMut(&mut [ScenarioPair], usize),
{
    config.validate()?;
    let mut current = initial;
    let mut history = SelectionHistory { ensembles: Vec::new(), kept_sizes: Vec::new(), stabilized_at: None };
    for it in 0..config.max_iterations {
        for p in current.iter_mut() {
            p.ini.clone_from(&p.fin);
        }
        step(&mut current, it);
        let groups = group(&current, config);
        let kept = survivors(&groups, current.len(), config)?.len();
        current = reject_and_replicate(&current, &groups, config, derive_seed(config.seed, it as u64))?;
        history.kept_sizes.push(kept);
        history.ensembles.push(current.clone());
        if is_stable(&history.kept_sizes) {
            history.stabilized_at = Some(it);
            break;
        }
    }
    Ok(history)
}

fn is_stable(sizes: &[usize]) -> bool {
    sizes.len() > STABLE_ITERATIONS
        && sizes.windows(2).rev().take(STABLE_ITERATIONS).all(|w| {
            (w[1] as f64 - w[0] as f64).abs() <= STABLE_REL_CHANGE * w[0].max(1) as f64
        })
}

/// Pair potential with a minimum at r₀: Morse well D[(1 − e^{−a(r−r₀)})² − 1],
/// or its repulsive part alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairPotential {
    pub depth: f64,
    pub stiffness: f64,
    pub r0: f64,
    pub attractive: bool,
}

impl PairPotential {
    pub fn morse(depth: f64, stiffness: f64, r0: f64) -> Self {
        Self { depth, stiffness, r0, attractive: true }
    }

    pub fn repulsive_only(self) -> Self {
        Self { attractive: false, ..self }
    }

    pub fn value(&self, r: f64) -> f64 {
        let e = (-self.stiffness * (r - self.r0)).exp();
        if self.attractive {
            self.depth * ((1.0 - e).powi(2) - 1.0)
        } else {
            self.depth * e * e
        }
    }

    /// dU/dr.
    pub fn derivative(&self, r: f64) -> f64 {
        let e = (-self.stiffness * (r - self.r0)).exp();
        if self.attractive {
            2.0 * self.depth * self.stiffness * (1.0 - e) * e
        } else {
            -2.0 * self.depth * self.stiffness * e * e
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationParams {
    pub potential: PairPotential,
    pub mass: f64,
    pub corteges: usize,
    /// Initial separations are uniform in [lo·r₀, hi·r₀].
    pub spread: (f64, f64),
    pub dt: f64,
    /// Inner steps per selection iteration.
    pub substeps: usize,
    /// Velocity damping rate standing in for radiative loss.
    pub damping: f64,
    /// Velocity noise per √time.
    pub noise: f64,
    /// Canonical pairs satisfy ||r| − r₀| < tolerance·r₀.
    pub tolerance: f64,
    pub bin_width: f64,
    pub bins: usize,
}

impl AssociationParams {
    pub fn standard(potential: PairPotential) -> Self {
        Self {
            potential,
            mass: 1.0,
            corteges: 2000,
            spread: (0.2, 5.0),
            dt: 0.01,
            substeps: 50,
            damping: 1.0,
            noise: 0.05,
            tolerance: 0.1,
            bin_width: 0.05 * potential.r0,
            bins: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationResult {
    /// Counts of |r₁ − r₂| per bin, one row per iteration (row 0 = initial).
    pub histograms: Vec<Vec<u64>>,
    pub canonical: Vec<f64>,
    pub bin_width: f64,
    pub r0: f64,
}

impl AssociationResult {
    /// Centre of the fullest bin of the final histogram.
    pub fn mode(&self) -> f64 {
        let h = self.histograms.last().expect("at least one histogram");
        let (i, _) = h.iter().enumerate().fold((0, 0), |best, (i, &c)| if c > best.1 { (i, c) } else { best });
        (i as f64 + 0.5) * self.bin_width
    }

    pub fn growth(&self) -> f64 {
        self.canonical.last().copied().unwrap_or(0.0) / self.canonical[0].max(f64::MIN_POSITIVE)
    }

    /// Mode within 10% of r₀ and canonical fraction grown at least threefold.
    pub fn associated(&self) -> bool {
        (self.mode() - self.r0).abs() <= 0.1 * self.r0 && self.growth() >= 3.0
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration[1],canonical_fraction[1]");
        for i in 0..self.histograms[0].len() {
            let _ = write!(s, ",r{:.4}[length]", (i as f64 + 0.5) * self.bin_width);
        }
        s.push('\n');
        for (it, (h, f)) in self.histograms.iter().zip(&self.canonical).enumerate() {
            let _ = write!(s, "{it},{f:.6}");
            for c in h {
                let _ = write!(s, ",{c}");
            }
            s.push('\n');
        }
        s
    }
}

fn separation(p: &ScenarioPair) -> f64 {
    (p.fin[1] - p.fin[0]).abs()
}

fn snapshot(pairs: &[ScenarioPair], params: &AssociationParams) -> (Vec<u64>, f64) {
    let mut h = vec![0u64; params.bins];
    let r0 = params.potential.r0;
    let mut canonical = 0usize;
    for p in pairs {
        let r = separation(p);
        if (r - r0).abs() < params.tolerance * r0 {
            canonical += 1;
        }
        let b = (r / params.bin_width).floor();
        if b >= 0.0 && (b as usize) < params.bins {
            h[b as usize] += 1;
        }
    }
    (h, canonical as f64 / pairs.len() as f64)
}

/// Damped pair dynamics with weak velocity noise, one selection iteration.
fn evolve_pairs(pairs: &mut [ScenarioPair], params: &AssociationParams, seed: u64) {
    let m = params.mass;
    let u = params.potential;
    let decay = (-params.damping * params.dt).exp();
    let kick = params.noise * params.dt.sqrt();
    pairs.par_iter_mut().enumerate().for_each(|(i, p)| {
        let mut rng = sub_rng(seed, i as u64);
        for _ in 0..params.substeps {
            let d = p.fin[1] - p.fin[0];
            let r = d.abs().max(1e-9);
            // Force on particle 1 along +d; particle 0 gets the opposite.
            let f = -u.derivative(r) * d.signum();
            let (z0, z1): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
            p.vel[0] = p.vel[0] * decay - f / m * params.dt + kick * z0;
            p.vel[1] = p.vel[1] * decay + f / m * params.dt + kick * z1;
            p.fin[0] += p.vel[0] * params.dt;
            p.fin[1] += p.vel[1] * params.dt;
        }
    });
}

/// Two-particle 1D corteges with random initial separations, evolved and
/// selected; the canonical fraction and separation histogram are recorded
/// before the first and after every iteration.
pub fn association_experiment(params: &AssociationParams, config: &SelectionConfig) -> Result<AssociationResult> {
    config.validate()?;
    let mut rng = rng_from_seed(config.seed);
    let r0 = params.potential.r0;
    let initial: Vec<ScenarioPair> = (0..params.corteges)
        .map(|i| {
            let r = r0 * rng.random_range(params.spread.0..=params.spread.1);
            ScenarioPair::new(i as u64, vec![-0.5 * r, 0.5 * r], vec![0.0, 0.0])
        })
        .collect();
    let (h0, f0) = snapshot(&initial, params);
    let mut result = AssociationResult { histograms: vec![h0], canonical: vec![f0], bin_width: params.bin_width, r0 };
    let dyn_seed = derive_seed(config.seed, 0xD1);
    let history = run_selection(|pairs, it| evolve_pairs(pairs, params, derive_seed(dyn_seed, it as u64)), initial, config)?;
    for ens in &history.ensembles {
        let (h, f) = snapshot(ens, params);
        result.histograms.push(h);
        result.canonical.push(f);
    }
    Ok(result)
}
