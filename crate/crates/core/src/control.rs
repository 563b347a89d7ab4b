//! Computation driven only by one-qubit pulses over an always-on diagonal
//! pairwise interaction.
//!
//! Units: ħ = 1, Yukawa decay constant b = 1. A pair term contributes the
//! phase e^{−i E t} while the pair sits in a basis configuration of energy E.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI};
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::phase_free_distance;
use crate::rng::sub_rng;
use crate::statevec::{c, gates, GateOp, QuantumState, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InteractionForm {
    /// ρ n_j n_k: only |11⟩ carries energy.
    A,
    /// Full diagonal diag(E₁, E₂, E₃, E₄) per pair.
    B,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CouplingLaw {
    Yukawa { rho0: f64, b: f64 },
    /// Energies of |00⟩, |01⟩, |10⟩, |11⟩ per pair (p < q).
    Energies(BTreeMap<(usize, usize), [f64; 4]>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionGraph {
    num_qubits: usize,
    positions: Vec<f64>,
    law: CouplingLaw,
    form: InteractionForm,
}

impl InteractionGraph {
    pub fn yukawa(positions: Vec<f64>, rho0: f64, b: f64) -> Result<Self> {
        let g = Self { num_qubits: positions.len(), positions, law: CouplingLaw::Yukawa { rho0, b }, form: InteractionForm::A };
        g.check_distances()?;
        Ok(g)
    }

    /// Unit-spaced line with ρ₀ = π.
    pub fn yukawa_line(n: usize) -> Self {
        Self::yukawa((0..n).map(|j| j as f64).collect(), PI, 1.0).expect("distinct positions")
    }

    pub fn with_energies(num_qubits: usize, energies: BTreeMap<(usize, usize), [f64; 4]>) -> Result<Self> {
        for &(p, q) in energies.keys() {
            if p >= q || q >= num_qubits {
                return Err(Error::InvalidArgument(format!("pair ({p},{q}) must satisfy p < q < {num_qubits}")));
            }
        }
        let positions = (0..num_qubits).map(|j| j as f64).collect();
        Ok(Self { num_qubits, positions, law: CouplingLaw::Energies(energies), form: InteractionForm::B })
    }

    /// Accepts a 4×4 pair coupling only if it is diagonal.
    pub fn with_pair_matrices(num_qubits: usize, pairs: &[((usize, usize), DMatrix<C64>)]) -> Result<Self> {
        let mut energies = BTreeMap::new();
        for ((p, q), m) in pairs {
            if m.nrows() != 4 || m.ncols() != 4 {
                return Err(Error::UnsupportedModel("pair coupling must be 4×4".into()));
            }
            for i in 0..4 {
                for j in 0..4 {
                    if i != j && m[(i, j)].norm() > 1e-12 {
                        return Err(Error::UnsupportedModel(format!("off-diagonal coupling at ({i},{j})")));
                    }
                }
                if m[(i, i)].im.abs() > 1e-12 {
                    return Err(Error::UnsupportedModel("complex diagonal energy".into()));
                }
            }
            energies.insert((*p, *q), [m[(0, 0)].re, m[(1, 1)].re, m[(2, 2)].re, m[(3, 3)].re]);
        }
        Self::with_energies(num_qubits, energies)
    }

    fn check_distances(&self) -> Result<()> {
        for p in 0..self.num_qubits {
            for q in p + 1..self.num_qubits {
                if (self.positions[p] - self.positions[q]).abs() <= 0.0 {
                    return Err(Error::InvalidArgument(format!("qubits {p} and {q} coincide")));
                }
            }
        }
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn form(&self) -> InteractionForm {
        self.form
    }

    pub fn rho(&self, p: usize, q: usize) -> f64 {
        match &self.law {
            CouplingLaw::Yukawa { rho0, b } => {
                let r = (self.positions[p] - self.positions[q]).abs();
                rho0 * (-b * r).exp() / r
            }
            CouplingLaw::Energies(_) => self.pair_energies(p, q)[3],
        }
    }

    pub fn pair_energies(&self, p: usize, q: usize) -> [f64; 4] {
        let (p, q) = (p.min(q), p.max(q));
        match &self.law {
            CouplingLaw::Yukawa { .. } => [0.0, 0.0, 0.0, self.rho(p, q)],
            CouplingLaw::Energies(m) => m.get(&(p, q)).copied().unwrap_or([0.0; 4]),
        }
    }

    /// E₁ − E₂ − E₃ + E₄ for the pair.
    pub fn delta_e(&self, p: usize, q: usize) -> f64 {
        let e = self.pair_energies(p, q);
        e[0] - e[1] - e[2] + e[3]
    }

    /// Total interaction energy of every basis configuration.
    pub fn basis_energies(&self) -> Vec<f64> {
        let n = self.num_qubits;
        let pairs: Vec<(usize, usize, [f64; 4])> =
            (0..n).flat_map(|p| (p + 1..n).map(move |q| (p, q))).map(|(p, q)| (p, q, self.pair_energies(p, q))).collect();
        (0..1usize << n)
            .map(|b| {
                pairs
                    .iter()
                    .map(|&(p, q, e)| {
                        let bp = (b >> (n - 1 - p)) & 1;
                        let bq = (b >> (n - 1 - q)) & 1;
                        e[2 * bp + bq]
                    })
                    .sum()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseGate {
    X,
    H,
    Z,
    Phase(f64),
}

impl PulseGate {
    pub fn matrix(self) -> DMatrix<C64> {
        match self {
            PulseGate::X => gates::x(),
            PulseGate::H => gates::h(),
            PulseGate::Z => gates::z(),
            PulseGate::Phase(t) => gates::phase(t),
        }
    }

    fn token(self) -> String {
        match self {
            PulseGate::X => "X".into(),
            PulseGate::H => "H".into(),
            PulseGate::Z => "Z".into(),
            PulseGate::Phase(t) => format!("P({t:.17e})"),
        }
    }

    fn parse(tok: &str) -> Option<Self> {
        match tok {
            "X" => Some(PulseGate::X),
            "H" => Some(PulseGate::H),
            "Z" => Some(PulseGate::Z),
            _ => tok.strip_prefix("P(")?.strip_suffix(')')?.parse().ok().map(PulseGate::Phase),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub tick: u64,
    pub qubit: usize,
    pub gate: PulseGate,
}

/// Instantaneous one-qubit pulses on a tick grid; interaction runs throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSchedule {
    pub events: Vec<Pulse>,
    pub tick: f64,
    pub ticks: u64,
}

impl PulseSchedule {
    pub fn new(tick: f64, ticks: u64) -> Self {
        Self { events: Vec::new(), tick, ticks }
    }

    pub fn duration(&self) -> f64 {
        self.tick * self.ticks as f64
    }

    pub fn push(&mut self, tick: u64, qubit: usize, gate: PulseGate) {
        self.events.push(Pulse { tick, qubit, gate });
    }

    /// Stable sort by tick; order within a tick is kept.
    pub fn sort(&mut self) {
        self.events.sort_by_key(|e| e.tick);
    }

    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        if !(self.tick > 0.0) && self.ticks > 0 {
            return Err(Error::InvalidArgument("tick must be positive".into()));
        }
        let mut last = 0;
        for e in &self.events {
            if e.tick < last || e.tick > self.ticks {
                return Err(Error::InvalidArgument(format!("event at tick {} out of order or range", e.tick)));
            }
            if e.qubit >= num_qubits {
                return Err(Error::InvalidArgument(format!("qubit {} out of range", e.qubit)));
            }
            last = e.tick;
        }
        Ok(())
    }

    pub fn not_counts(&self, num_qubits: usize) -> Vec<usize> {
        let mut counts = vec![0; num_qubits];
        for e in &self.events {
            if e.gate == PulseGate::X {
                counts[e.qubit] += 1;
            }
        }
        counts
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("# tick {:.17e}\n# ticks {}\n", self.tick, self.ticks);
        for e in &self.events {
            let _ = writeln!(s, "{:.17e} {} {}", e.tick as f64 * self.tick, e.qubit, e.gate.token());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tick = None;
        let mut ticks = None;
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let perr = |msg: &str| Error::Parse { line: i + 1, msg: msg.into() };
            if let Some(rest) = line.strip_prefix('#') {
                let mut it = rest.split_whitespace();
                match (it.next(), it.next()) {
                    (Some("tick"), Some(v)) => tick = Some(v.parse::<f64>().map_err(|_| perr("bad tick"))?),
                    (Some("ticks"), Some(v)) => ticks = Some(v.parse::<u64>().map_err(|_| perr("bad tick count"))?),
                    _ => {}
                }
                continue;
            }
            let dt = tick.ok_or_else(|| perr("event before tick header"))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(perr("expected: time qubit gate"));
            }
            let t: f64 = f[0].parse().map_err(|_| perr("bad time"))?;
            let qubit: usize = f[1].parse().map_err(|_| perr("bad qubit"))?;
            let gate = PulseGate::parse(f[2]).ok_or_else(|| perr("unknown gate"))?;
            let k = (t / dt).round();
            if (k * dt - t).abs() > 1e-9 * dt.max(t.abs()) {
                return Err(perr("time is not a multiple of the tick"));
            }
            events.push(Pulse { tick: k as u64, qubit, gate });
        }
        let tick = tick.ok_or(Error::Parse { line: 0, msg: "missing tick header".into() })?;
        let ticks = ticks.unwrap_or_else(|| events.iter().map(|e| e.tick).max().unwrap_or(0));
        Ok(Self { events, tick, ticks })
    }
}

fn apply_diagonal_phase(amps: &mut [C64], energies: &[f64], dt: f64) {
    if dt == 0.0 {
        return;
    }
    let kernel = |(a, &e): (&mut C64, &f64)| *a *= C64::from_polar(1.0, -e * dt);
    if amps.len() >= 1 << 12 {
        amps.par_iter_mut().zip(energies.par_iter()).for_each(kernel);
    } else {
        amps.iter_mut().zip(energies.iter()).for_each(kernel);
    }
}

/// Exact evolution: diagonal phases between pulses, pulses applied at their ticks.
pub fn evolve(graph: &InteractionGraph, schedule: &PulseSchedule, initial: &QuantumState) -> Result<QuantumState> {
    if initial.num_qubits() != graph.num_qubits() {
        return Err(Error::RegisterMismatch { expected: graph.num_qubits(), got: initial.num_qubits() });
    }
    schedule.validate(graph.num_qubits())?;
    let energies = graph.basis_energies();
    let mut state = initial.clone();
    let mut now = 0u64;
    for e in &schedule.events {
        apply_diagonal_phase(state.amplitudes_mut(), &energies, (e.tick - now) as f64 * schedule.tick);
        now = e.tick;
        crate::statevec::apply_matrix_mut(&mut state, &[e.qubit], &e.gate.matrix())?;
    }
    apply_diagonal_phase(state.amplitudes_mut(), &energies, (schedule.ticks - now) as f64 * schedule.tick);
    Ok(state)
}

/// Operator of a sequence of schedules, built column by column.
pub fn protocol_operator(graph: &InteractionGraph, stages: &[PulseSchedule]) -> Result<DMatrix<C64>> {
    let n = graph.num_qubits();
    let dim = 1usize << n;
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for a in 0..dim {
        let mut s = QuantumState::basis(n, a);
        for st in stages {
            s = evolve(graph, st, &s)?;
        }
        m.set_column(a, &nalgebra::DVector::from_column_slice(s.amplitudes()));
    }
    Ok(m)
}

/// Phase φ(b) picked up by each basis state under a schedule made only of
/// X and diagonal pulses. Every basis state stays a basis state; the NOTs
/// only move it around, so the phase can be tracked classically.
pub fn phase_accounting(graph: &InteractionGraph, schedule: &PulseSchedule) -> Result<Vec<f64>> {
    schedule.validate(graph.num_qubits())?;
    let n = graph.num_qubits();
    let energies = graph.basis_energies();
    let phases: Vec<f64> = (0..1usize << n)
        .into_par_iter()
        .map(|b0| -> Result<f64> {
            let mut b = b0;
            let mut phi = 0.0;
            let mut now = 0u64;
            for e in &schedule.events {
                phi -= energies[b] * (e.tick - now) as f64 * schedule.tick;
                now = e.tick;
                let bit = 1 << (n - 1 - e.qubit);
                match e.gate {
                    PulseGate::X => b ^= bit,
                    PulseGate::Z => phi += if b & bit != 0 { PI } else { 0.0 },
                    PulseGate::Phase(t) => phi += if b & bit != 0 { t } else { 0.0 },
                    PulseGate::H => return Err(Error::InvalidArgument("phase accounting needs permutation pulses".into())),
                }
            }
            phi -= energies[b] * (schedule.ticks - now) as f64 * schedule.tick;
            if b != b0 {
                return Err(Error::InvalidArgument("schedule does not restore the basis state".into()));
            }
            Ok(phi)
        })
        .collect::<Result<_>>()?;
    Ok(phases)
}

/// φ(b) = constant + Σ linear_p b_p + Σ quadratic_pq b_p b_q.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticPhase {
    pub num_qubits: usize,
    pub constant: f64,
    pub linear: Vec<f64>,
    pub quadratic: BTreeMap<(usize, usize), f64>,
}

impl QuadraticPhase {
    pub fn zero(num_qubits: usize) -> Self {
        Self { num_qubits, constant: 0.0, linear: vec![0.0; num_qubits], quadratic: BTreeMap::new() }
    }

    /// Möbius coefficients from φ on the weight ≤ 2 basis states.
    pub fn from_phases(num_qubits: usize, phases: &[f64]) -> Self {
        let n = num_qubits;
        let e = |p: usize| 1usize << (n - 1 - p);
        let c0 = phases[0];
        let linear: Vec<f64> = (0..n).map(|p| phases[e(p)] - c0).collect();
        let mut quadratic = BTreeMap::new();
        for p in 0..n {
            for q in p + 1..n {
                quadratic.insert((p, q), phases[e(p) | e(q)] - phases[e(p)] - phases[e(q)] + c0);
            }
        }
        Self { num_qubits, constant: c0, linear, quadratic }
    }

    pub fn pair(&self, p: usize, q: usize) -> f64 {
        self.quadratic.get(&(p.min(q), p.max(q))).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, b: usize) -> f64 {
        let n = self.num_qubits;
        let bit = |p: usize| ((b >> (n - 1 - p)) & 1) as f64;
        self.constant
            + (0..n).map(|p| self.linear[p] * bit(p)).sum::<f64>()
            + self.quadratic.iter().map(|(&(p, q), &v)| v * bit(p) * bit(q)).sum::<f64>()
    }

    /// Diagonal unitary e^{iφ}.
    pub fn to_matrix(&self) -> DMatrix<C64> {
        let dim = 1usize << self.num_qubits;
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(dim, (0..dim).map(|b| C64::from_polar(1.0, self.eval(b)))))
    }
}

/// One compensated interaction stage for a separated pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensatedStage {
    pub pair: (usize, usize),
    pub schedule: PulseSchedule,
    /// Net phase before the one-qubit correction pulses.
    pub raw: QuadraticPhase,
    /// Net phase of the full schedule, corrections included.
    pub net: QuadraticPhase,
    /// Quadratic coefficient the stage aimed at.
    pub desired: f64,
    /// Largest deviation of any pair coefficient from the intended one.
    pub residual: f64,
}

impl CompensatedStage {
    fn finish(graph: &InteractionGraph, pair: (usize, usize), mut schedule: PulseSchedule, desired: f64) -> Result<Self> {
        schedule.sort();
        let raw = QuadraticPhase::from_phases(graph.num_qubits(), &phase_accounting(graph, &schedule)?);
        for (p, &v) in raw.linear.iter().enumerate() {
            if v.abs() > 0.0 {
                schedule.push(schedule.ticks, p, PulseGate::Phase(-v));
            }
        }
        let net = QuadraticPhase::from_phases(graph.num_qubits(), &phase_accounting(graph, &schedule)?);
        let residual = net
            .quadratic
            .iter()
            .map(|(&pq, &v)| if pq == pair { (v - desired).abs() } else { v.abs() })
            .fold(0.0, f64::max);
        Ok(Self { pair, schedule, raw, net, desired, residual })
    }
}

fn normalize_pair(graph: &InteractionGraph, pair: (usize, usize)) -> Result<(usize, usize)> {
    let (j, k) = (pair.0.min(pair.1), pair.0.max(pair.1));
    if j == k || k >= graph.num_qubits() {
        return Err(Error::InvalidArgument(format!("bad separated pair ({}, {})", pair.0, pair.1)));
    }
    Ok((j, k))
}

fn others(graph: &InteractionGraph, pair: (usize, usize)) -> Vec<usize> {
    (0..graph.num_qubits()).filter(|&p| p != pair.0 && p != pair.1).collect()
}

fn add_parity_fix(schedule: &mut PulseSchedule, qubit: usize, flips: usize) {
    if flips % 2 == 1 {
        schedule.push(schedule.ticks, qubit, PulseGate::X);
    }
}

/// Native quadratic rate of the pair: φ gains −ΔE·t per unit time on |11⟩.
fn native_rate(graph: &InteractionGraph, pair: (usize, usize)) -> f64 {
    -graph.delta_e(pair.0, pair.1)
}

/// NOTs on every non-separated qubit at discretized Poisson times.
/// Each of `ticks` tick boundaries flips a qubit with probability λ·δt.
pub fn compensate_random(
    graph: &InteractionGraph,
    pair: (usize, usize),
    dt: f64,
    lambda: f64,
    ticks: u64,
    seed: u64,
) -> Result<CompensatedStage> {
    let pair = normalize_pair(graph, pair)?;
    let ticks = ticks.max(1);
    let tick = dt / ticks as f64;
    let p = lambda * tick;
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidArgument(format!("flip probability λ·δt = {p} outside (0, 1]")));
    }
    let mut schedule = PulseSchedule::new(tick, ticks);
    for q in others(graph, pair) {
        let mut rng = sub_rng(seed, q as u64);
        let geo = Geometric::new(p).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut t = 0u64;
        let mut flips = 0;
        loop {
            t = t.saturating_add(geo.sample(&mut rng)).saturating_add(1);
            if t >= ticks {
                break;
            }
            schedule.push(t, q, PulseGate::X);
            flips += 1;
        }
        add_parity_fix(&mut schedule, q, flips);
    }
    CompensatedStage::finish(graph, pair, schedule, native_rate(graph, pair) * dt)
}

/// Tick count giving flip probability 1/2 at rate λ.
pub fn default_random_ticks(dt: f64, lambda: f64) -> u64 {
    (2.0 * lambda * dt).ceil().max(1.0) as u64
}

/// The r-th non-separated qubit flips at every multiple of r·δt.
pub fn compensate_periodic(graph: &InteractionGraph, pair: (usize, usize), dt: f64, tick: f64) -> Result<CompensatedStage> {
    let pair = normalize_pair(graph, pair)?;
    let ticks = (dt / tick).round().max(1.0) as u64;
    let tick = dt / ticks as f64;
    let mut schedule = PulseSchedule::new(tick, ticks);
    for (rank, q) in others(graph, pair).into_iter().enumerate() {
        let period = rank as u64 + 1;
        let mut flips = 0;
        let mut t = period;
        while t < ticks {
            schedule.push(t, q, PulseGate::X);
            flips += 1;
            t += period;
        }
        add_parity_fix(&mut schedule, q, flips);
    }
    CompensatedStage::finish(graph, pair, schedule, native_rate(graph, pair) * dt)
}

/// The r-th non-separated qubit toggles every Δt/2^r. Flip patterns of
/// different ranks are orthogonal square waves, so every unwanted pair
/// coefficient cancels exactly.
pub fn compensate_dyadic(graph: &InteractionGraph, pair: (usize, usize), dt: f64) -> Result<CompensatedStage> {
    let pair = normalize_pair(graph, pair)?;
    let rest = others(graph, pair);
    let ticks = 1u64 << rest.len();
    let mut schedule = PulseSchedule::new(dt / ticks as f64, ticks);
    for (rank, q) in rest.into_iter().enumerate() {
        let period = ticks >> (rank + 1);
        let mut t = period;
        while t < ticks {
            schedule.push(t, q, PulseGate::X);
            t += period;
        }
        schedule.push(ticks, q, PulseGate::X);
    }
    CompensatedStage::finish(graph, pair, schedule, native_rate(graph, pair) * dt)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CompensationMode {
    /// Dyadic NOT pattern; exact.
    Deterministic,
    /// Poisson NOTs with λΔt expected flips per stage; tick chosen so each
    /// tick flips with probability 1/2.
    Poisson { flips_per_stage: f64, seed: u64 },
    Periodic { tick: f64 },
}

/// Stage producing quadratic coefficient `target` on the pair. Negative
/// multiples of the native rate use a NOT on the first qubit around the stage.
pub fn correction_stage(
    graph: &InteractionGraph,
    pair: (usize, usize),
    target: f64,
    mode: CompensationMode,
    stream: u64,
) -> Result<CompensatedStage> {
    let pair = normalize_pair(graph, pair)?;
    let rate = native_rate(graph, pair);
    if rate == 0.0 {
        return Err(Error::Unsynthesizable(format!("pair ({}, {}) has ΔE = 0", pair.0, pair.1)));
    }
    let flip = target / rate < 0.0;
    let dt = (target / rate).abs();
    let base = match mode {
        CompensationMode::Deterministic => compensate_dyadic(graph, pair, dt)?,
        CompensationMode::Poisson { flips_per_stage, seed } => {
            let lambda = flips_per_stage / dt.max(f64::MIN_POSITIVE);
            compensate_random(graph, pair, dt, lambda, default_random_ticks(dt, lambda), crate::rng::derive_seed(seed, stream))?
        }
        CompensationMode::Periodic { tick } => compensate_periodic(graph, pair, dt, tick.min(dt.max(f64::MIN_POSITIVE)))?,
    };
    let mut schedule = base.schedule;
    schedule.events.retain(|e| !matches!(e.gate, PulseGate::Phase(_)));
    if flip {
        schedule.events.insert(0, Pulse { tick: 0, qubit: pair.0, gate: PulseGate::X });
        schedule.push(schedule.ticks, pair.0, PulseGate::X);
    }
    CompensatedStage::finish(graph, pair, schedule, target)
}

/// Realizes Σ c_pq b_p b_q (up to a global phase) stage by stage. After each
/// stage the realized coefficients, known exactly from the schedule, are
/// subtracted from what is still owed; `max_stages` bounds the refinement.
pub fn realize_quadratic(
    graph: &InteractionGraph,
    targets: &BTreeMap<(usize, usize), f64>,
    mode: CompensationMode,
    tol: f64,
    max_stages: usize,
) -> Result<Vec<CompensatedStage>> {
    let mut owed: BTreeMap<(usize, usize), f64> = targets.iter().map(|(&pq, &v)| ((pq.0.min(pq.1), pq.0.max(pq.1)), v)).collect();
    let mut stages = Vec::new();
    while stages.len() < max_stages {
        let Some((&pair, &c)) = owed.iter().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())) else { break };
        if c.abs() <= tol {
            break;
        }
        let stage = correction_stage(graph, pair, c, mode, stages.len() as u64)?;
        for (&pq, &v) in &stage.net.quadratic {
            *owed.entry(pq).or_insert(0.0) -= v;
        }
        stages.push(stage);
    }
    Ok(stages)
}

/// Coupling for the continuous transform: ρ_{jk} = −π / (2^{j−k} (j−k)).
/// With b = 1 this needs spacing ln 2 and ρ₀ = −π ln 2; the sign makes the
/// accumulated phase e^{+iπ/2^{j−k}} of the inverse transform.
pub fn qft_interaction(n: usize) -> InteractionGraph {
    InteractionGraph::yukawa((0..n).map(|j| j as f64 * LN_2).collect(), -PI * LN_2, 1.0).expect("distinct positions")
}

/// Main stage: Hadamard on qubit q at time q, interaction always on.
pub fn qft_main_stage(n: usize) -> PulseSchedule {
    let mut s = PulseSchedule::new(1.0, n.saturating_sub(1) as u64);
    for q in 0..n {
        s.push(q as u64, q, PulseGate::H);
    }
    s
}

/// Defects of the main stage: phase on input bits (A) and on output bits (B).
pub fn qft_defects(graph: &InteractionGraph) -> (QuadraticPhase, QuadraticPhase) {
    let n = graph.num_qubits();
    let mut a = QuadraticPhase::zero(n);
    let mut b = QuadraticPhase::zero(n);
    for k in 0..n {
        for j in k + 1..n {
            let rate = -graph.rho(k, j);
            a.quadratic.insert((k, j), rate * k as f64);
            b.quadratic.insert((k, j), rate * (n - 1 - j) as f64);
        }
    }
    (a, b)
}

/// Output register read in reversed qubit order (a relabeling, not a gate).
pub fn bit_reversal(n: usize) -> DMatrix<C64> {
    let dim = 1usize << n;
    let rev = |x: usize| (0..n).fold(0, |acc, i| acc | (((x >> i) & 1) << (n - 1 - i)));
    DMatrix::from_fn(dim, dim, |r, col| if r == rev(col) { c(1.0, 0.0) } else { c(0.0, 0.0) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousQft {
    pub stages: Vec<PulseSchedule>,
    pub pre: Vec<CompensatedStage>,
    pub post: Vec<CompensatedStage>,
    pub operator: DMatrix<C64>,
    pub distance: f64,
}

impl ContinuousQft {
    pub fn total_time(&self) -> f64 {
        self.stages.iter().map(PulseSchedule::duration).sum()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.stages.iter().enumerate() {
            let _ = writeln!(out, "# stage {i}");
            out.push_str(&s.to_text());
        }
        out
    }
}

pub const QFT_REFINEMENT_STAGES: usize = 12;
pub const QFT_REFINEMENT_TOL: f64 = 1e-9;

/// Continuous-interaction QFT⁻¹. `mode = None` skips the correction stages.
pub fn qft_via_continuous(n: usize, mode: Option<CompensationMode>) -> Result<ContinuousQft> {
    if n == 0 || n > 6 {
        return Err(Error::InvalidArgument(format!("continuous QFT supports 1 ≤ n ≤ 6, got {n}")));
    }
    let graph = qft_interaction(n);
    let (a, b) = qft_defects(&graph);
    let negate = |q: &QuadraticPhase| q.quadratic.iter().map(|(&pq, &v)| (pq, -v)).collect::<BTreeMap<_, _>>();
    let (pre, post) = match mode {
        None => (Vec::new(), Vec::new()),
        Some(m) => {
            let budget = QFT_REFINEMENT_STAGES * n * n;
            let pre = realize_quadratic(&graph, &negate(&a), m, QFT_REFINEMENT_TOL, budget)?;
            let m_post = match m {
                CompensationMode::Poisson { flips_per_stage, seed } => {
                    CompensationMode::Poisson { flips_per_stage, seed: crate::rng::derive_seed(seed, 0xB) }
                }
                other => other,
            };
            let post = realize_quadratic(&graph, &negate(&b), m_post, QFT_REFINEMENT_TOL, budget)?;
            (pre, post)
        }
    };
    let mut stages: Vec<PulseSchedule> = pre.iter().map(|s| s.schedule.clone()).collect();
    stages.push(qft_main_stage(n));
    stages.extend(post.iter().map(|s| s.schedule.clone()));
    let operator = bit_reversal(n) * protocol_operator(&graph, &stages)?;
    let distance = phase_free_distance(&operator, &crate::fourier::qft_matrix(n, 1.0));
    Ok(ContinuousQft { stages, pre, post, operator, distance })
}

/// Distance predicted from the A and B defects alone.
pub fn predicted_defect_distance(n: usize) -> f64 {
    let graph = qft_interaction(n);
    let (a, b) = qft_defects(&graph);
    let rev = bit_reversal(n);
    let target = crate::fourier::qft_matrix(n, 1.0);
    let predicted = &rev * b.to_matrix() * rev.transpose() * &target * a.to_matrix();
    phase_free_distance(&predicted, &target)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnotSynthesis {
    pub repetitions: u64,
    pub delta_e: f64,
    /// One-qubit phase pulses applied after each unit interaction period.
    pub a: DMatrix<C64>,
    pub b: DMatrix<C64>,
    pub operator: DMatrix<C64>,
    pub distance: f64,
}

pub const CNOT_SCAN_CAP: u64 = 1_000_000;

/// U = E·(A⊗B) = diag(1, 1, 1, e^{−iΔE}) with E = e^{−iH} for one time unit;
/// n repetitions with ΔE·n ≈ π(2m+1) give a controlled Z, and Hadamards on
/// the target turn it into CNOT.
pub fn synthesize_cnot(energies: [f64; 4], eps: f64) -> Result<CnotSynthesis> {
    synthesize_cnot_capped(energies, eps, CNOT_SCAN_CAP)
}

pub fn synthesize_cnot_capped(energies: [f64; 4], eps: f64, cap: u64) -> Result<CnotSynthesis> {
    let [e1, e2, e3, e4] = energies;
    let delta_e = e1 - e2 - e3 + e4;
    let two_pi = 2.0 * PI;
    let wrapped = delta_e.rem_euclid(two_pi);
    if delta_e == 0.0 || wrapped.min(two_pi - wrapped) < 1e-12 {
        return Err(Error::Unsynthesizable(format!("ΔE = {delta_e} is a multiple of 2π")));
    }
    let repetitions = (1..=cap)
        .find(|&n| ((delta_e * n as f64).rem_euclid(two_pi) - PI).abs() < eps)
        .ok_or(Error::CapExceeded(cap))?;
    let e = gates::diag(&[C64::from_polar(1.0, -e1), C64::from_polar(1.0, -e2), C64::from_polar(1.0, -e3), C64::from_polar(1.0, -e4)]);
    let a = gates::diag(&[c(1.0, 0.0), C64::from_polar(1.0, e3 - e1)]);
    let b = gates::diag(&[C64::from_polar(1.0, e1), C64::from_polar(1.0, e2)]);
    let u = e * gates::kron(&a, &b);
    let mut un = DMatrix::<C64>::identity(4, 4);
    for _ in 0..repetitions.min(64) {
        un = &u * un;
    }
    if repetitions > 64 {
        // U is diagonal; raise the entries directly to avoid drift.
        un = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            4,
            (0..4).map(|i| C64::from_polar(1.0, u[(i, i)].arg() * repetitions as f64)),
        ));
    }
    let ih = gates::kron(&gates::id2(), &gates::h());
    let operator = &ih * un * &ih;
    let distance = crate::linalg::spectral_norm(&(&operator - gates::cnot()));
    Ok(CnotSynthesis { repetitions, delta_e, a, b, operator, distance })
}

/// Unitary of one compensated pulse on a full register, for dense checks.
pub fn pulse_operator(num_qubits: usize, pulse: &Pulse) -> DMatrix<C64> {
    crate::statevec::embed(num_qubits, &GateOp::new(vec![pulse.qubit], pulse.gate.matrix()).expect("one-qubit unitary"))
}

