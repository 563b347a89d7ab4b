//! Collective-behaviour simulation: the dynamical diffusion swarm (DDS),
//! static diffusion (DMC), the swarm ↔ wavefunction bridge and cortege
//! ensembles for several particles.
//!
//! A swarm of n samples stands for one particle of mass M. Samples rest or
//! move with the limit speed c along one axis. Each step they exchange
//! velocities inside cells of width δx, receive potential kicks in whole
//! ±c quanta and fly freely. In 1D and 2D the resulting mean field is an
//! isothermal fluid, ∂²ρ/∂t² = I∇²ρ + κ∇·(ρ∇V), with intensity
//! I = f c²/dim for moving fraction f = d/(1+d) and κ = 1/M. Cells carrying
//! a net flow u get u²/c² extra movers so the pressure stays Iρ in the
//! frame of the flow.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::ComplexField;
use crate::rng::{derive_seed, rng_from_seed, sub_rng, SimRng};
use crate::statevec::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub id: u64,
    pub x: [f64; 2],
    /// Axis of motion; meaningless while at rest.
    pub axis: u8,
    /// −1, 0 or +1.
    pub dir: i8,
}

impl Sample {
    pub fn at_rest(id: u64, x: [f64; 2]) -> Self {
        Self { id, x, axis: 0, dir: 0 }
    }

    pub fn moving(&self) -> bool {
        self.dir != 0
    }

    pub fn velocity(&self, c: f64) -> [f64; 2] {
        let mut v = [0.0; 2];
        if self.dir != 0 {
            v[self.axis as usize] = c * self.dir as f64;
        }
        v
    }
}

/// Exchange rule: opposite movers come to rest, a resting pair leaves with
/// opposite velocities along a random axis. Momentum is unchanged exactly.
pub fn exchange<R: Rng + ?Sized>(a: &Sample, b: &Sample, grain: f64, dim: usize, rng: &mut R) -> Result<(Sample, Sample)> {
    let dist2: f64 = (0..dim).map(|k| (a.x[k] - b.x[k]).powi(2)).sum();
    if dist2.sqrt() > grain {
        return Err(Error::InvalidExchange(format!("samples {} and {} are farther apart than δx", a.id, b.id)));
    }
    let (mut a2, mut b2) = (*a, *b);
    if a.dir == 0 && b.dir == 0 {
        let axis = rng.random_range(0..dim) as u8;
        let s = if rng.random::<bool>() { 1 } else { -1 };
        a2.axis = axis;
        b2.axis = axis;
        a2.dir = s;
        b2.dir = -s;
    } else if a.dir != 0 && a.axis == b.axis && a.dir == -b.dir {
        a2.dir = 0;
        b2.dir = 0;
    } else {
        return Err(Error::InvalidExchange("velocities must be opposite or both zero".into()));
    }
    Ok((a2, b2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialKind {
    Free,
    /// ½k|x|².
    Harmonic { stiffness: f64 },
    /// depth·((x² − a²)/a²)² along the first axis, harmonic in the second.
    DoubleWell { depth: f64, half_separation: f64, stiffness_y: f64 },
    /// Constant force field: V = −F·x.
    Linear { force: [f64; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potential {
    pub kind: PotentialKind,
    pub offset: f64,
}

impl Potential {
    pub fn free() -> Self {
        Self { kind: PotentialKind::Free, offset: 0.0 }
    }

    pub fn harmonic(mass: f64, omega: f64) -> Self {
        Self { kind: PotentialKind::Harmonic { stiffness: mass * omega * omega }, offset: 0.0 }
    }

    pub fn with_offset(self, offset: f64) -> Self {
        Self { offset, ..self }
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.offset
            + match self.kind {
                PotentialKind::Free => 0.0,
                PotentialKind::Harmonic { stiffness } => 0.5 * stiffness * (x[0] * x[0] + x[1] * x[1]),
                PotentialKind::DoubleWell { depth, half_separation: a, stiffness_y } => {
                    depth * ((x[0] * x[0] - a * a) / (a * a)).powi(2) + 0.5 * stiffness_y * x[1] * x[1]
                }
                PotentialKind::Linear { force } => -(force[0] * x[0] + force[1] * x[1]),
            }
    }

    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        match self.kind {
            PotentialKind::Free => [0.0, 0.0],
            PotentialKind::Harmonic { stiffness } => [stiffness * x[0], stiffness * x[1]],
            PotentialKind::DoubleWell { depth, half_separation: a, stiffness_y } => {
                let a2 = a * a;
                [depth * 4.0 * x[0] * (x[0] * x[0] - a2) / (a2 * a2), stiffness_y * x[1]]
            }
            PotentialKind::Linear { force } => [-force[0], -force[1]],
        }
    }
}

/// Periodic box [lo, hi) per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicBox {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmParams {
    pub dim: usize,
    /// Particle mass M.
    pub mass: f64,
    pub hbar: f64,
    /// Grain δx (cell width).
    pub grain: f64,
    /// Limit speed c.
    pub speed: f64,
    /// Target moving/resting ratio per cell.
    pub d: f64,
    pub periodic: Option<PeriodicBox>,
    /// Retune d every step from the current spread, with resolution length
    /// ℓ = √2·σ per axis; off means d stays fixed.
    pub adaptive: bool,
}

pub const DEFAULT_D: f64 = 0.5;
pub const MOVING_FRACTION_WARN: f64 = 0.2;
/// Cap on the adaptive moving fraction.
pub const MAX_MOVING_FRACTION: f64 = 0.9;

impl SwarmParams {
    pub fn moving_fraction(&self) -> f64 {
        self.d / (1.0 + self.d)
    }

    /// Pressure intensity per axis (velocity² units).
    pub fn intensity(&self) -> f64 {
        self.moving_fraction() * self.speed * self.speed / self.dim as f64
    }

    pub fn kappa(&self) -> f64 {
        1.0 / self.mass
    }

    /// Limit speed for a target intensity I.
    pub fn speed_for_intensity(intensity: f64, d: f64, dim: usize) -> f64 {
        (intensity * dim as f64 * (1.0 + d) / d).sqrt()
    }

    /// I = ħ²/(2M²ℓ²) for resolution length ℓ.
    pub fn quantum_intensity(hbar: f64, mass: f64, resolution: f64) -> f64 {
        hbar * hbar / (2.0 * mass * mass * resolution * resolution)
    }

    /// Parameters whose mean field reproduces quantum pressure at length ℓ.
    pub fn calibrated(dim: usize, mass: f64, hbar: f64, grain: f64, d: f64, resolution: f64) -> Self {
        let speed = Self::speed_for_intensity(Self::quantum_intensity(hbar, mass, resolution), d, dim);
        Self { dim, mass, hbar, grain, speed, d, periodic: None, adaptive: false }
    }

    pub fn with_adaptive(self, adaptive: bool) -> Self {
        Self { adaptive, ..self }
    }

    /// Grain-dependent coefficients of the 3D formulation, reported only:
    /// I = ħ²/(2m²δx³), κ = ħ/(m·δx) with sample mass m = M/n.
    pub fn grain_intensities(&self, n: usize) -> (f64, f64) {
        let m = self.mass / n as f64;
        (self.hbar * self.hbar / (2.0 * m * m * self.grain.powi(3)), self.hbar / (m * self.grain))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Swarm {
    pub params: SwarmParams,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    /// Largest moving fraction over cells with ≥ 8 samples.
    pub max_moving_fraction: f64,
    pub fraction_warning: bool,
    /// c·Δt is not small against δx.
    pub flight_warning: bool,
    pub exchanges: u64,
    pub quanta: u64,
}

type CellKey = (i64, i64);

impl Swarm {
    pub fn new(params: SwarmParams, positions: &[[f64; 2]]) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidArgument("swarm needs at least one sample".into()));
        }
        if !(1..=2).contains(&params.dim) {
            return Err(Error::InvalidArgument("only 1D and 2D swarms are supported".into()));
        }
        let samples = positions.iter().enumerate().map(|(i, &x)| Sample::at_rest(i as u64, x)).collect();
        Ok(Self { params, samples })
    }

    /// Samples drawn from an independent Gaussian per axis.
    pub fn gaussian<R: Rng + ?Sized>(params: SwarmParams, n: usize, center: [f64; 2], sigma: [f64; 2], rng: &mut R) -> Result<Self> {
        let dim = params.dim;
        let pos: Vec<[f64; 2]> = (0..n)
            .map(|_| {
                let mut x = [0.0; 2];
                for k in 0..dim {
                    let z: f64 = StandardNormal.sample(rng);
                    x[k] = center[k] + sigma[k] * z;
                }
                x
            })
            .collect();
        Self::new(params, &pos)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample mass m = M/n.
    pub fn sample_mass(&self) -> f64 {
        self.params.mass / self.len() as f64
    }

    pub fn cell_of(&self, x: [f64; 2]) -> CellKey {
        let g = self.params.grain;
        let kx = (x[0] / g).floor() as i64;
        let ky = if self.params.dim > 1 { (x[1] / g).floor() as i64 } else { 0 };
        (kx, ky)
    }

    /// Total momentum Σ m v in units of sample mass × c (exact integers).
    pub fn momentum_quanta(&self) -> [i64; 2] {
        let mut p = [0i64; 2];
        for s in &self.samples {
            if s.dir != 0 {
                p[s.axis as usize] += s.dir as i64;
            }
        }
        p
    }

    pub fn total_momentum(&self) -> [f64; 2] {
        let q = self.momentum_quanta();
        let k = self.sample_mass() * self.params.speed;
        [q[0] as f64 * k, q[1] as f64 * k]
    }

    pub fn moving_fraction(&self) -> f64 {
        self.samples.iter().filter(|s| s.moving()).count() as f64 / self.len() as f64
    }

    pub fn mean_position(&self) -> [f64; 2] {
        let n = self.len() as f64;
        let mut m = [0.0; 2];
        for s in &self.samples {
            m[0] += s.x[0];
            m[1] += s.x[1];
        }
        [m[0] / n, m[1] / n]
    }

    /// Mean per-axis variance of positions.
    pub fn spread_variance(&self) -> f64 {
        let n = self.len() as f64;
        let mean = self.mean_position();
        let dim = self.params.dim;
        let total: f64 = self.samples.par_iter().map(|s| (0..dim).map(|k| (s.x[k] - mean[k]).powi(2)).sum::<f64>()).sum();
        total / (n * dim as f64)
    }

    /// Retunes the moving fraction so that I = ħ²/(2M²ℓ²) with ℓ = √2·σ.
    /// The speed c stays fixed, so no momentum is created or lost.
    pub fn recalibrate(&mut self) {
        let p = &self.params;
        let ell = (2.0 * self.spread_variance()).sqrt();
        if ell > 0.0 {
            let f = (SwarmParams::quantum_intensity(p.hbar, p.mass, ell) * p.dim as f64 / (p.speed * p.speed)).min(MAX_MOVING_FRACTION);
            self.params.d = f / (1.0 - f);
        }
    }

    /// Samples per cell volume.
    pub fn density(&self, cell: CellKey) -> f64 {
        let count = self.samples.iter().filter(|s| self.cell_of(s.x) == cell).count();
        count as f64 / self.params.grain.powi(self.params.dim as i32)
    }

    /// Σ m v over the cell, per cell volume.
    pub fn momentum_field(&self, cell: CellKey) -> [f64; 2] {
        let m = self.sample_mass();
        let mut p = [0.0; 2];
        for s in self.samples.iter().filter(|s| self.cell_of(s.x) == cell) {
            let v = s.velocity(self.params.speed);
            p[0] += m * v[0];
            p[1] += m * v[1];
        }
        let vol = self.params.grain.powi(self.params.dim as i32);
        [p[0] / vol, p[1] / vol]
    }

    /// Reorders samples by cell and returns the run boundaries.
    fn sort_into_cells(&mut self) -> Vec<(CellKey, usize, usize)> {
        let keys: Vec<CellKey> = self.samples.iter().map(|s| self.cell_of(s.x)).collect();
        let mut order: Vec<(CellKey, u64, usize)> = keys.iter().zip(&self.samples).enumerate().map(|(i, (&k, s))| (k, s.id, i)).collect();
        order.par_sort_unstable();
        self.samples = order.iter().map(|&(_, _, i)| self.samples[i]).collect();
        let mut runs = Vec::new();
        let mut start = 0;
        for i in 1..=order.len() {
            if i == order.len() || order[i].0 != order[start].0 {
                runs.push((order[start].0, start, i));
                start = i;
            }
        }
        runs
    }

    fn wrap(&self, x: &mut [f64; 2]) {
        if let Some(b) = self.params.periodic {
            for k in 0..self.params.dim {
                let l = b.hi[k] - b.lo[k];
                x[k] = b.lo[k] + (x[k] - b.lo[k]).rem_euclid(l);
            }
        }
    }

    pub fn snapshot_text(&self) -> String {
        let mut s = String::new();
        let c = self.params.speed;
        for smp in &self.samples {
            let v = smp.velocity(c);
            if self.params.dim == 1 {
                let _ = writeln!(s, "{} {:.12e} {:.12e}", smp.id, smp.x[0], v[0]);
            } else {
                let _ = writeln!(s, "{} {:.12e} {:.12e} {:.12e} {:.12e}", smp.id, smp.x[0], smp.x[1], v[0], v[1]);
            }
        }
        s
    }
}

fn cell_seed(seed: u64, key: CellKey) -> u64 {
    derive_seed(derive_seed(seed, key.0 as u64), key.1 as u64)
}

/// Balanced pairs wanted on one axis: movers make up f/dim + u²/c² of the
/// cell, so ⟨v²⟩ − u² = f c²/dim whatever the local flow u = c·E/n.
fn balanced_target(n: usize, excess: i64, f: f64, dim: usize) -> i64 {
    let n = n as f64;
    let e = excess.abs() as f64;
    let movers = n * f / dim as f64 + e * e / n;
    (((movers - e) / 2.0).round() as i64).max(0)
}

/// Thermalizes one cell through exchanges: every opposite pair on an axis
/// comes to rest, then randomly chosen resting pairs leave until each axis
/// carries its target. Only the net excess keeps moving, so the mean free
/// path is one flight.
fn relax_cell(cell: &mut [Sample], dim: usize, d: f64, rng: &mut SimRng) -> u64 {
    let n = cell.len();
    if n < 2 {
        return 0;
    }
    let f = d / (1.0 + d);
    let mut exchanges = 0;
    let mut excess = [0i64; 2];
    for axis in 0..dim {
        let mut plus: Vec<usize> = (0..n).filter(|&i| cell[i].dir == 1 && cell[i].axis as usize == axis).collect();
        let mut minus: Vec<usize> = (0..n).filter(|&i| cell[i].dir == -1 && cell[i].axis as usize == axis).collect();
        excess[axis] = plus.len() as i64 - minus.len() as i64;
        plus.shuffle(rng);
        minus.shuffle(rng);
        for (&i, &j) in plus.iter().zip(&minus) {
            cell[i].dir = 0;
            cell[j].dir = 0;
            exchanges += 1;
        }
    }
    let mut resting: Vec<usize> = (0..n).filter(|&i| cell[i].dir == 0).collect();
    resting.shuffle(rng);
    let mut free = resting.chunks_exact(2);
    'axes: for axis in 0..dim {
        for _ in 0..balanced_target(n, excess[axis], f, dim) {
            let Some(pair) = free.next() else { break 'axes };
            let s: i8 = if rng.random::<bool>() { 1 } else { -1 };
            for (k, &i) in pair.iter().enumerate() {
                cell[i].axis = axis as u8;
                cell[i].dir = if k == 0 { s } else { -s };
            }
            exchanges += 1;
        }
    }
    exchanges
}

/// Kick quanta so that Σ Δv over the cell matches −Σ ∂V·Δt/M in expectation.
fn kick_cell(cell: &mut [Sample], grads: &[[f64; 2]], dim: usize, mass: f64, speed: f64, dt: f64, rng: &mut SimRng) -> u64 {
    let mut quanta = 0;
    for axis in 0..dim {
        let total: f64 = grads.iter().map(|g| -g[axis] * dt / mass).sum::<f64>() / speed;
        if total == 0.0 {
            continue;
        }
        let sign: i8 = if total > 0.0 { 1 } else { -1 };
        let mag = total.abs();
        let mut k = mag.floor() as u64;
        if rng.random::<f64>() < mag - mag.floor() {
            k += 1;
        }
        let mut eligible: Vec<usize> =
            (0..cell.len()).filter(|&i| cell[i].dir == 0 || (cell[i].axis as usize == axis && cell[i].dir == -sign)).collect();
        for _ in 0..k {
            if eligible.is_empty() {
                break;
            }
            let pick = rng.random_range(0..eligible.len());
            let i = eligible[pick];
            if cell[i].dir == 0 {
                cell[i].axis = axis as u8;
                cell[i].dir = sign;
                eligible.swap_remove(pick);
            } else {
                cell[i].dir = 0;
            }
            quanta += 1;
        }
    }
    quanta
}

fn split_runs<'a>(mut rest: &'a mut [Sample], runs: &[(CellKey, usize, usize)]) -> Vec<(CellKey, &'a mut [Sample])> {
    let mut out = Vec::with_capacity(runs.len());
    let mut consumed = 0;
    for &(key, start, end) in runs {
        let (_, tail) = std::mem::take(&mut rest).split_at_mut(start - consumed);
        let (cell, tail) = tail.split_at_mut(end - start);
        out.push((key, cell));
        rest = tail;
        consumed = end;
    }
    out
}

/// One DDS step: exchange, kicks, free flight. A time-dependent potential is
/// refreshed by passing the new one to the next call.
pub fn dds_step(swarm: &mut Swarm, potential: &Potential, dt: f64, seed: u64) -> StepReport {
    if swarm.params.adaptive {
        swarm.recalibrate();
    }
    let p = swarm.params.clone();
    let runs = swarm.sort_into_cells();
    let cells = split_runs(&mut swarm.samples, &runs);
    let per_cell: Vec<(u64, u64, f64, usize)> = cells
        .into_par_iter()
        .map(|(key, cell)| {
            let mut rng = rng_from_seed(cell_seed(seed, key));
            let ex = relax_cell(cell, p.dim, p.d, &mut rng);
            let grads: Vec<[f64; 2]> = cell.iter().map(|s| potential.gradient(s.x)).collect();
            let q = kick_cell(cell, &grads, p.dim, p.mass, p.speed, dt, &mut rng);
            let moving = cell.iter().filter(|s| s.moving()).count() as f64 / cell.len() as f64;
            (ex, q, moving, cell.len())
        })
        .collect();
    let c = p.speed;
    swarm.samples.par_iter_mut().for_each(|s| {
        if s.dir != 0 {
            s.x[s.axis as usize] += s.dir as f64 * c * dt;
        }
    });
    if p.periodic.is_some() {
        let sw = &*swarm;
        let wrapped: Vec<[f64; 2]> = sw.samples.iter().map(|s| {
            let mut x = s.x;
            sw.wrap(&mut x);
            x
        }).collect();
        for (s, x) in swarm.samples.iter_mut().zip(wrapped) {
            s.x = x;
        }
    }
    let max_moving = per_cell.iter().filter(|r| r.3 >= 8).map(|r| r.2).fold(0.0, f64::max);
    StepReport {
        max_moving_fraction: max_moving,
        fraction_warning: max_moving > MOVING_FRACTION_WARN,
        flight_warning: c * dt > 0.1 * p.grain,
        exchanges: per_cell.iter().map(|r| r.0).sum(),
        quanta: per_cell.iter().map(|r| r.1).sum(),
    }
}

/// Runs `steps` DDS steps with sub-seeds derived from `seed`.
pub fn dds_run(swarm: &mut Swarm, potential: &Potential, dt: f64, steps: usize, seed: u64) -> StepReport {
    let mut last = StepReport::default();
    for k in 0..steps {
        let r = dds_step(swarm, potential, dt, derive_seed(seed, k as u64));
        last.max_moving_fraction = last.max_moving_fraction.max(r.max_moving_fraction);
        last.fraction_warning |= r.fraction_warning;
        last.flight_warning |= r.flight_warning;
        last.exchanges += r.exchanges;
        last.quanta += r.quanta;
    }
    last
}

/// Uniform 1D histogram window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bins {
    pub origin: f64,
    pub width: f64,
    pub count: usize,
}

impl Bins {
    pub fn centers(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.origin + (i as f64 + 0.5) * self.width).collect()
    }

    pub fn index(&self, x: f64) -> Option<usize> {
        let k = ((x - self.origin) / self.width).floor();
        (k >= 0.0 && (k as usize) < self.count).then_some(k as usize)
    }
}

/// Probability density per bin along `axis` (normalized by the total count).
pub fn histogram(swarm: &Swarm, bins: Bins, axis: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins.count];
    for s in &swarm.samples {
        if let Some(i) = bins.index(s.x[axis]) {
            h[i] += 1.0;
        }
    }
    let norm = swarm.len() as f64 * bins.width;
    h.iter_mut().for_each(|v| *v /= norm);
    h
}

pub fn l1_distance(a: &[f64], b: &[f64], width: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * width
}

pub fn histogram_csv(bins: Bins, columns: &[(&str, &[f64])]) -> String {
    let mut s = String::from("x[length]");
    for (name, _) in columns {
        let _ = write!(s, ",{name}");
    }
    s.push('\n');
    for (i, x) in bins.centers().iter().enumerate() {
        let _ = write!(s, "{x:.10e}");
        for (_, col) in columns {
            let _ = write!(s, ",{:.10e}", col[i]);
        }
        s.push('\n');
    }
    s
}

/// Residual of the mean-field equation on coarse bins from three snapshots
/// spaced τ apart: ‖ρ̈ − (Iρ'' + κ(ρV')')‖ / ‖Iρ'' + κ(ρV')'‖.
pub fn swarm_equation_residual(
    before: &[f64],
    now: &[f64],
    after: &[f64],
    tau: f64,
    bins: Bins,
    intensity: f64,
    kappa: f64,
    potential: &Potential,
) -> f64 {
    let h = bins.width;
    let xs = bins.centers();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 1..bins.count - 1 {
        let lhs = (after[i] - 2.0 * now[i] + before[i]) / (tau * tau);
        let lap = (now[i + 1] - 2.0 * now[i] + now[i - 1]) / (h * h);
        let flux = |j: usize| now[j] * potential.gradient([xs[j], 0.0])[0];
        let drift = (flux(i + 1) - flux(i - 1)) / (2.0 * h);
        let rhs = intensity * lap + kappa * drift;
        num += (lhs - rhs).powi(2);
        den += rhs * rhs;
    }
    (num / den).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmcParams {
    pub mass: f64,
    pub hbar: f64,
    /// Walk step Δx.
    pub step: f64,
    /// Probability of a step in each direction per time step.
    pub p: f64,
    pub samples: usize,
    pub steps: usize,
    /// Fraction of steps discarded before accumulating the profile.
    pub burn_in: f64,
}

impl DmcParams {
    /// Δτ from D = pΔx²/Δτ = ħ/(2M).
    pub fn dtau(&self) -> f64 {
        self.p * self.step * self.step * 2.0 * self.mass / self.hbar
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmcResult {
    pub bins: Bins,
    pub density: Vec<f64>,
    /// Standard deviation of positions averaged over accumulation steps.
    pub width: f64,
    pub mean: f64,
    pub final_population: usize,
    pub reference_energy: f64,
    /// Σ over steps of ln(N_{k+1}/N_k) before population control.
    pub log_growth: f64,
}

/// Static diffusion in 1D: ±Δx walk plus branching with weight
/// e^{−(V − E_ref)Δτ/ħ}. The stabilized density is ∝ |Ψ₀|.
pub fn dmc_run(potential: &Potential, params: &DmcParams, bins: Bins, seed: u64) -> Result<DmcResult> {
    let dtau = params.dtau();
    let target = params.samples;
    let mut rng = rng_from_seed(seed);
    let mut walkers: Vec<f64> = (0..target).map(|_| (rng.random::<f64>() - 0.5) * 2.0).collect();
    let mut e_ref = walkers.iter().map(|&x| potential.value([x, 0.0])).sum::<f64>() / target as f64;
    let burn = (params.steps as f64 * params.burn_in) as usize;
    let mut hist = vec![0.0; bins.count];
    let mut total_counted = 0.0;
    let (mut s1, mut s2, mut accum) = (0.0, 0.0, 0usize);
    let mut log_growth = 0.0;
    for step in 0..params.steps {
        let step_seed = derive_seed(seed, step as u64 + 1);
        let chunks: Vec<Vec<f64>> = walkers
            .par_chunks(4096)
            .enumerate()
            .map(|(ci, chunk)| {
                let mut r = sub_rng(step_seed, ci as u64);
                let mut out = Vec::with_capacity(chunk.len() + 16);
                for &x0 in chunk {
                    let u: f64 = r.random();
                    let x = if u < params.p {
                        x0 + params.step
                    } else if u < 2.0 * params.p {
                        x0 - params.step
                    } else {
                        x0
                    };
                    let w = (-(potential.value([x, 0.0]) - e_ref) * dtau / params.hbar).exp();
                    let copies = (w + r.random::<f64>()).floor() as usize;
                    out.extend(std::iter::repeat_n(x, copies));
                }
                out
            })
            .collect();
        let before = walkers.len() as f64;
        walkers = chunks.concat();
        if walkers.is_empty() {
            return Err(Error::Extinction(step));
        }
        log_growth += (walkers.len() as f64 / before).ln();
        // Population control: nudge E_ref and keep N within [N/2, 2N].
        let n = walkers.len();
        e_ref -= 0.1 * params.hbar / dtau * (n as f64 / target as f64).ln();
        if n > 2 * target || n < target / 2 {
            walkers.shuffle(&mut rng);
            if n > 2 * target {
                walkers.truncate(target);
            } else {
                let extra: Vec<f64> = (0..target - n).map(|i| walkers[i % n]).collect();
                walkers.extend(extra);
            }
        }
        if step >= burn {
            let n = walkers.len() as f64;
            let mean = walkers.iter().sum::<f64>() / n;
            let var = walkers.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            s1 += mean;
            s2 += var.sqrt();
            accum += 1;
            for &x in &walkers {
                if let Some(i) = bins.index(x) {
                    hist[i] += 1.0;
                }
            }
            total_counted += n;
        }
    }
    hist.iter_mut().for_each(|v| *v /= total_counted * bins.width);
    Ok(DmcResult {
        bins,
        density: hist,
        width: s2 / accum.max(1) as f64,
        mean: s1 / accum.max(1) as f64,
        final_population: walkers.len(),
        reference_energy: e_ref,
        log_growth,
    })
}

/// Bridge constants: φ = k·δx²·∫v̄·dγ and v̄ = a·δx⁻²·∇φ with
/// a = ħδx²/M and k = M/(ħδx²), so k·a = 1 (the uniform-flow round trip is
/// the identity).
pub fn bridge_constants(hbar: f64, mass: f64, grain: f64) -> (f64, f64) {
    let a = hbar * grain * grain / mass;
    (mass / (hbar * grain * grain), a)
}

/// Regular cell grid for the bridge: cells of width `grain` from `origin`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGrid {
    pub origin: [f64; 2],
    pub cells: [usize; 2],
    pub grain: f64,
}

impl CellGrid {
    pub fn line(origin: f64, cells: usize, grain: f64) -> Self {
        Self { origin: [origin, 0.0], cells: [cells, 1], grain }
    }

    pub fn len(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, x: [f64; 2], dim: usize) -> Option<usize> {
        let i = ((x[0] - self.origin[0]) / self.grain).floor();
        let j = if dim > 1 { ((x[1] - self.origin[1]) / self.grain).floor() } else { 0.0 };
        (i >= 0.0 && j >= 0.0 && (i as usize) < self.cells[0] && (j as usize) < self.cells[1])
            .then(|| j as usize * self.cells[0] + i as usize)
    }

    pub fn center(&self, idx: usize) -> [f64; 2] {
        let (i, j) = (idx % self.cells[0], idx / self.cells[0]);
        [self.origin[0] + (i as f64 + 0.5) * self.grain, self.origin[1] + (j as f64 + 0.5) * self.grain]
    }
}

/// Per-cell counts and mean velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMoments {
    pub counts: Vec<f64>,
    pub mean_velocity: Vec<[f64; 2]>,
}

pub fn cell_moments(swarm: &Swarm, grid: &CellGrid) -> CellMoments {
    let mut counts = vec![0.0; grid.len()];
    let mut vsum = vec![[0.0; 2]; grid.len()];
    for s in &swarm.samples {
        if let Some(i) = grid.index(s.x, swarm.params.dim) {
            counts[i] += 1.0;
            let v = s.velocity(swarm.params.speed);
            vsum[i][0] += v[0];
            vsum[i][1] += v[1];
        }
    }
    let mean_velocity = counts.iter().zip(&vsum).map(|(&n, v)| if n > 0.0 { [v[0] / n, v[1] / n] } else { [0.0; 2] }).collect();
    CellMoments { counts, mean_velocity }
}

/// Line integral of v̄ between neighbouring cells (trapezoid over centres).
fn edge_integral(m: &CellMoments, a: usize, b: usize, axis: usize, grain: f64) -> Result<f64> {
    for idx in [a, b] {
        if m.counts[idx] == 0.0 {
            return Err(Error::UndefinedPhase(idx as i64));
        }
    }
    Ok(0.5 * (m.mean_velocity[a][axis] + m.mean_velocity[b][axis]) * grain)
}

/// Ψ on the cell grid: |Ψ| = √ρ, phase integrated from the reference cell
/// along x to the target column, then along y. `reference_phase` fixes the
/// global phase.
pub fn wavefunction_from_swarm(swarm: &Swarm, grid: &CellGrid, reference: usize, reference_phase: f64) -> Result<Vec<C64>> {
    let m = cell_moments(swarm, grid);
    let (k, _) = bridge_constants(swarm.params.hbar, swarm.params.mass, grid.grain);
    let scale = k * grid.grain * grid.grain;
    let nx = grid.cells[0];
    let (ri, rj) = (reference % nx, reference / nx);
    let vol = grid.grain.powi(swarm.params.dim as i32);
    let total = swarm.len() as f64;
    let mut out = vec![C64::new(0.0, 0.0); grid.len()];
    // Phase along the reference row.
    let mut row = vec![0.0; nx];
    for i in (0..ri).rev() {
        let a = rj * nx + i;
        row[i] = row[i + 1] - scale * edge_integral(&m, a, a + 1, 0, grid.grain)?;
    }
    for i in ri + 1..nx {
        let a = rj * nx + i;
        row[i] = row[i - 1] + scale * edge_integral(&m, a - 1, a, 0, grid.grain)?;
    }
    for i in 0..nx {
        let mut col = vec![0.0; grid.cells[1]];
        col[rj] = row[i];
        for j in (0..rj).rev() {
            col[j] = col[j + 1] - scale * edge_integral(&m, j * nx + i, (j + 1) * nx + i, 1, grid.grain)?;
        }
        for j in rj + 1..grid.cells[1] {
            col[j] = col[j - 1] + scale * edge_integral(&m, (j - 1) * nx + i, j * nx + i, 1, grid.grain)?;
        }
        for j in 0..grid.cells[1] {
            let idx = j * nx + i;
            out[idx] = C64::from_polar((m.counts[idx] / (total * vol)).sqrt(), col[j] + reference_phase);
        }
    }
    Ok(out)
}

/// Circulation ∮ v̄·dγ around the rectangle of cells [i0, i1] × [j0, j1].
pub fn circulation(swarm: &Swarm, grid: &CellGrid, i0: usize, i1: usize, j0: usize, j1: usize) -> Result<f64> {
    let m = cell_moments(swarm, grid);
    let nx = grid.cells[0];
    let g = grid.grain;
    let mut total = 0.0;
    for i in i0..i1 {
        total += edge_integral(&m, j0 * nx + i, j0 * nx + i + 1, 0, g)?;
        total -= edge_integral(&m, j1 * nx + i, j1 * nx + i + 1, 0, g)?;
    }
    for j in j0..j1 {
        total += edge_integral(&m, j * nx + i1, (j + 1) * nx + i1, 1, g)?;
        total -= edge_integral(&m, j * nx + i0, (j + 1) * nx + i0, 1, g)?;
    }
    Ok(total)
}

/// Samples placed by |ψ|² on a 1D grid field; velocities carry the local
/// flow u = (ħ/M)∂φ/∂x through biased ±c choices on top of the balanced
/// moving fraction.
pub fn swarm_from_wavefunction(psi: &ComplexField, n: usize, params: SwarmParams, seed: u64) -> Result<Swarm> {
    let weights: Vec<f64> = psi.values.iter().map(|z| z.norm_sqr()).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("wavefunction vanishes".into()));
    }
    let m = psi.len();
    let flow: Vec<f64> = (0..m)
        .map(|j| {
            let (a, b) = (psi.values[j.saturating_sub(1)], psi.values[(j + 1).min(m - 1)]);
            let span = ((j + 1).min(m - 1) - j.saturating_sub(1)) as f64 * psi.dx;
            params.hbar / params.mass * (b * a.conj()).arg() / span
        })
        .collect();
    let dist = rand_distr::weighted::WeightedIndex::new(&weights).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    let f = params.moving_fraction();
    let c = params.speed;
    let mut samples = Vec::with_capacity(n);
    for id in 0..n {
        let j = dist.sample(&mut rng);
        let x = psi.x(j) + (rng.random::<f64>() - 0.5) * psi.dx;
        let u = flow[j];
        // P₊ − P₋ = u/c exactly while |u| ≤ c; the balanced part shrinks first.
        let drift = (u / c).clamp(-1.0, 1.0);
        let p_plus = (0.5 * f + 0.5 * drift).max(drift).min(1.0);
        let p_minus = p_plus - drift;
        let r: f64 = rng.random();
        let dir = if r < p_plus {
            1
        } else if r < p_plus + p_minus {
            -1
        } else {
            0
        };
        samples.push(Sample { id: id as u64, x: [x, 0.0], axis: 0, dir });
    }
    Ok(Swarm { params, samples })
}

/// Several swarms, one per particle, tied into n-tuples of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CortegeEnsemble {
    pub swarms: Vec<Swarm>,
    /// corteges[c][j] = index of the sample of particle j in cortege c.
    pub corteges: Vec<Vec<usize>>,
}

impl CortegeEnsemble {
    pub fn particles(&self) -> usize {
        self.swarms.len()
    }

    /// Every sample of every swarm appears in exactly one cortege.
    pub fn is_partition(&self) -> bool {
        self.swarms.iter().enumerate().all(|(j, s)| {
            let mut seen = vec![false; s.len()];
            self.corteges.iter().all(|c| !std::mem::replace(&mut seen[c[j]], true)) && seen.iter().all(|&b| b)
        })
    }

    pub fn positions(&self, c: usize) -> Vec<[f64; 2]> {
        self.corteges[c].iter().enumerate().map(|(j, &i)| self.swarms[j].samples[i].x).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CortegeTarget {
    /// Independent particles: uniform random tuples.
    Product,
    /// Two particles: joint weight per (cell of particle 0, cell of particle 1)
    /// on the given 1D bins.
    Joint { bins: Bins, weights: Vec<Vec<f64>> },
}

pub fn cortege_build(swarms: Vec<Swarm>, target: &CortegeTarget, seed: u64) -> Result<CortegeEnsemble> {
    let n = swarms.first().map(Swarm::len).ok_or_else(|| Error::InvalidArgument("no swarms".into()))?;
    if swarms.iter().any(|s| s.len() != n) {
        return Err(Error::InvalidArgument("swarms must have equal sizes".into()));
    }
    let mut rng = rng_from_seed(seed);
    match target {
        CortegeTarget::Product => {
            let perms: Vec<Vec<usize>> = swarms
                .iter()
                .map(|_| {
                    let mut p: Vec<usize> = (0..n).collect();
                    p.shuffle(&mut rng);
                    p
                })
                .collect();
            let corteges = (0..n).map(|c| perms.iter().map(|p| p[c]).collect()).collect();
            Ok(CortegeEnsemble { swarms, corteges })
        }
        CortegeTarget::Joint { bins, weights } => {
            if swarms.len() != 2 {
                return Err(Error::InvalidArgument("joint targets are for two particles".into()));
            }
            let k = bins.count;
            if weights.len() != k || weights.iter().any(|r| r.len() != k) {
                return Err(Error::InvalidArgument("weight table must be bins × bins".into()));
            }
            if weights.iter().flatten().any(|&w| w < 0.0 || !w.is_finite()) {
                return Err(Error::Unsatisfiable("negative joint weight".into()));
            }
            // Members of each swarm per bin, shuffled; out-of-window samples last.
            let members = |s: &Swarm, rng: &mut SimRng| {
                let mut by_bin: Vec<Vec<usize>> = vec![Vec::new(); k + 1];
                for (i, smp) in s.samples.iter().enumerate() {
                    by_bin[bins.index(smp.x[0]).unwrap_or(k)].push(i);
                }
                by_bin.iter_mut().for_each(|b| b.shuffle(rng));
                by_bin
            };
            let mut m0 = members(&swarms[0], &mut rng);
            let mut m1 = members(&swarms[1], &mut rng);
            let rows: Vec<f64> = m0[..k].iter().map(|v| v.len() as f64).collect();
            let cols: Vec<f64> = m1[..k].iter().map(|v| v.len() as f64).collect();
            let table = fit_margins(weights, &rows, &cols)?;
            let counts = round_table(&table, &rows, &cols);
            let mut corteges = Vec::with_capacity(n);
            for a in 0..k {
                for b in 0..k {
                    for _ in 0..counts[a][b] {
                        match (m0[a].pop(), m1[b].pop()) {
                            (Some(i), Some(j)) => corteges.push(vec![i, j]),
                            (Some(i), None) => m0[a].push(i),
                            (None, Some(j)) => m1[b].push(j),
                            (None, None) => {}
                        }
                    }
                }
            }
            let mut rest0: Vec<usize> = m0.into_iter().flatten().collect();
            let mut rest1: Vec<usize> = m1.into_iter().flatten().collect();
            rest0.shuffle(&mut rng);
            rest1.shuffle(&mut rng);
            corteges.extend(rest0.into_iter().zip(rest1).map(|(i, j)| vec![i, j]));
            Ok(CortegeEnsemble { swarms, corteges })
        }
    }
}

/// Iterative proportional fitting of the weights to the sample margins.
fn fit_margins(weights: &[Vec<f64>], rows: &[f64], cols: &[f64]) -> Result<Vec<Vec<f64>>> {
    let k = rows.len();
    for a in 0..k {
        if rows[a] > 0.0 && weights[a].iter().all(|&w| w == 0.0) {
            return Err(Error::Unsatisfiable(format!("bin {a} of particle 0 holds samples but has zero weight")));
        }
        if cols[a] > 0.0 && (0..k).all(|r| weights[r][a] == 0.0) {
            return Err(Error::Unsatisfiable(format!("bin {a} of particle 1 holds samples but has zero weight")));
        }
    }
    let mut t: Vec<Vec<f64>> = weights.to_vec();
    for _ in 0..500 {
        for a in 0..k {
            let s: f64 = t[a].iter().sum();
            if s > 0.0 {
                t[a].iter_mut().for_each(|v| *v *= rows[a] / s);
            }
        }
        let mut worst: f64 = 0.0;
        for b in 0..k {
            let s: f64 = (0..k).map(|a| t[a][b]).sum();
            if s > 0.0 {
                for row in t.iter_mut() {
                    row[b] *= cols[b] / s;
                }
            }
            worst = worst.max((s - cols[b]).abs());
        }
        if worst < 1e-9 {
            break;
        }
    }
    Ok(t)
}

/// Integer table close to `t` that respects the row sums where possible.
fn round_table(t: &[Vec<f64>], rows: &[f64], cols: &[f64]) -> Vec<Vec<usize>> {
    let k = rows.len();
    let mut out: Vec<Vec<usize>> = t.iter().map(|r| r.iter().map(|v| v.floor() as usize).collect()).collect();
    let mut col_left: Vec<i64> = (0..k).map(|b| cols[b] as i64 - (0..k).map(|a| out[a][b] as i64).sum::<i64>()).collect();
    for a in 0..k {
        let mut deficit = rows[a] as i64 - out[a].iter().map(|&v| v as i64).sum::<i64>();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&x, &y| (t[a][y] - t[a][y].floor()).total_cmp(&(t[a][x] - t[a][x].floor())));
        for b in order {
            if deficit <= 0 {
                break;
            }
            if col_left[b] > 0 && t[a][b] > 0.0 {
                out[a][b] += 1;
                col_left[b] -= 1;
                deficit -= 1;
            }
        }
    }
    out
}

/// Joint bin counts of a two-particle ensemble.
pub fn joint_counts(ens: &CortegeEnsemble, bins: Bins) -> Vec<Vec<u64>> {
    let mut t = vec![vec![0u64; bins.count]; bins.count];
    for c in 0..ens.corteges.len() {
        let p = ens.positions(c);
        if let (Some(a), Some(b)) = (bins.index(p[0][0]), bins.index(p[1][0])) {
            t[a][b] += 1;
        }
    }
    t
}

/// Potential of the whole configuration; returns (V, ∂V/∂r_j per particle).
pub trait ManyBodyPotential: Sync {
    fn gradient(&self, positions: &[[f64; 2]]) -> Vec<[f64; 2]>;
}

/// Independent one-body potentials.
pub struct Separable(pub Potential);

impl ManyBodyPotential for Separable {
    fn gradient(&self, positions: &[[f64; 2]]) -> Vec<[f64; 2]> {
        positions.iter().map(|&x| self.0.gradient(x)).collect()
    }
}

/// Step of an ensemble. One particle reduces to `dds_step`. Otherwise corteges
/// sharing a cell of configuration space exchange velocities of a uniformly
/// chosen particle index, each particle's samples get the kicks of
/// −∂_jV(r̄) summed over the cell, then everything flies.
pub fn cortege_dds_step(ens: &mut CortegeEnsemble, potential: &dyn ManyBodyPotential, one_body: Option<&Potential>, dt: f64, seed: u64) {
    if ens.particles() == 1 {
        let v = one_body.copied().unwrap_or_else(Potential::free);
        dds_step(&mut ens.swarms[0], &v, dt, seed);
        return;
    }
    let n = ens.particles();
    let mut groups: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for c in 0..ens.corteges.len() {
        let key: Vec<i64> = ens
            .positions(c)
            .iter()
            .enumerate()
            .flat_map(|(j, x)| {
                let key = ens.swarms[j].cell_of(*x);
                [key.0, key.1]
            })
            .collect();
        groups.entry(key).or_default().push(c);
    }
    let mut keys: Vec<&Vec<i64>> = groups.keys().collect();
    keys.sort();
    for (gi, key) in keys.into_iter().enumerate() {
        let members = &groups[key];
        let mut rng = sub_rng(seed, gi as u64);
        // Exchange between corteges along a uniformly chosen particle index.
        let mut order = members.clone();
        order.shuffle(&mut rng);
        for pair in order.chunks_exact(2) {
            let j = rng.random_range(0..n);
            let (ia, ib) = (ens.corteges[pair[0]][j], ens.corteges[pair[1]][j]);
            let sw = &ens.swarms[j];
            let (a, b) = (sw.samples[ia], sw.samples[ib]);
            let movers = members.iter().filter(|&&c| sw.samples[ens.corteges[c][j]].moving()).count() as f64;
            let want_more = movers / (members.len() as f64) < sw.params.moving_fraction();
            let opposite = a.dir != 0 && a.axis == b.axis && a.dir == -b.dir;
            let resting = a.dir == 0 && b.dir == 0;
            if (want_more && resting) || (!want_more && opposite) {
                if let Ok((a2, b2)) = exchange(&a, &b, f64::INFINITY, sw.params.dim, &mut rng) {
                    ens.swarms[j].samples[ia] = a2;
                    ens.swarms[j].samples[ib] = b2;
                }
            }
        }
        // Kicks per particle index, summed over the cell.
        let grads: Vec<Vec<[f64; 2]>> = members.iter().map(|&c| potential.gradient(&ens.positions(c))).collect();
        for j in 0..n {
            let p = ens.swarms[j].params.clone();
            let mut cell: Vec<Sample> = members.iter().map(|&c| ens.swarms[j].samples[ens.corteges[c][j]]).collect();
            let g: Vec<[f64; 2]> = grads.iter().map(|g| g[j]).collect();
            kick_cell(&mut cell, &g, p.dim, p.mass, p.speed, dt, &mut rng);
            for (k, &c) in members.iter().enumerate() {
                let idx = ens.corteges[c][j];
                ens.swarms[j].samples[idx] = cell[k];
            }
        }
    }
    for sw in &mut ens.swarms {
        let c = sw.params.speed;
        for s in &mut sw.samples {
            if s.dir != 0 {
                s.x[s.axis as usize] += s.dir as f64 * c * dt;
            }
        }
    }
}

/// Gaussian swarm helper in 1D.
pub fn gaussian_1d(params: SwarmParams, n: usize, center: f64, sigma: f64, seed: u64) -> Result<Swarm> {
    let mut rng = rng_from_seed(seed);
    Swarm::gaussian(params, n, [center, 0.0], [sigma, 0.0], &mut rng)
}
