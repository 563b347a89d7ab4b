//! Reference grid numerics: finite-difference heat schemes, split-step
//! Schrödinger propagation, the free kernel and the classicality ratio.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

type C = Complex64;

pub trait FieldValue: Copy + std::fmt::Debug + PartialEq {
    fn write(&self, out: &mut String);
    fn parse(fields: &[&str]) -> Option<Self>;
}

impl FieldValue for f64 {
    fn write(&self, out: &mut String) {
        let _ = write!(out, "{self:.17e}");
    }
    fn parse(fields: &[&str]) -> Option<Self> {
        match fields {
            [v] => v.parse().ok(),
            _ => None,
        }
    }
}

impl FieldValue for C {
    fn write(&self, out: &mut String) {
        let _ = write!(out, "{:.17e} {:.17e}", self.re, self.im);
    }
    fn parse(fields: &[&str]) -> Option<Self> {
        match fields {
            [re, im] => Some(C::new(re.parse().ok()?, im.parse().ok()?)),
            _ => None,
        }
    }
}

/// Values on x_j = origin + j·dx.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField<T> {
    pub values: Vec<T>,
    pub dx: f64,
    pub origin: f64,
}

pub type RealField = GridField<f64>;
pub type ComplexField = GridField<C>;

impl<T: FieldValue> GridField<T> {
    pub fn new(values: Vec<T>, dx: f64, origin: f64) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::InvalidArgument(format!("grid needs ≥ 3 nodes, got {}", values.len())));
        }
        if !(dx > 0.0) {
            return Err(Error::InvalidArgument(format!("dx must be positive, got {dx}")));
        }
        Ok(Self { values, dx, origin })
    }

    pub fn from_fn(m: usize, dx: f64, origin: f64, f: impl Fn(f64) -> T) -> Result<Self> {
        Self::new((0..m).map(|j| f(origin + j as f64 * dx)).collect(), dx, origin)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, j: usize) -> f64 {
        self.origin + j as f64 * self.dx
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.x(j)).collect()
    }

    /// "x value" lines; complex values as "x re im".
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (j, v) in self.values.iter().enumerate() {
            let _ = write!(s, "{:.17e} ", self.x(j));
            v.write(&mut s);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let perr = |msg: &str| Error::Parse { line: i + 1, msg: msg.into() };
            let x: f64 = f.first().and_then(|v| v.parse().ok()).ok_or_else(|| perr("bad x"))?;
            values.push(T::parse(&f[1..]).ok_or_else(|| perr("bad value"))?);
            xs.push(x);
        }
        if xs.len() < 3 {
            return Err(Error::Parse { line: 0, msg: "need at least 3 nodes".into() });
        }
        let dx = xs[1] - xs[0];
        for (j, &x) in xs.iter().enumerate() {
            if (x - (xs[0] + j as f64 * dx)).abs() > 1e-9 * dx.abs().max(1.0) {
                return Err(Error::Parse { line: j + 1, msg: "nodes not uniformly spaced".into() });
            }
        }
        Self::new(values, dx, xs[0])
    }
}

impl ComplexField {
    pub fn norm(&self) -> f64 {
        (self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dx).sqrt()
    }

    /// ⟨self|other⟩ with the dx measure.
    pub fn inner(&self, other: &Self) -> C {
        self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum::<C>() * self.dx
    }

    pub fn l2_distance(&self, other: &Self) -> f64 {
        (self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() * self.dx).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dirichlet {
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatRun {
    pub field: RealField,
    /// Δt exceeded Δx²/(2α).
    pub unstable: bool,
}

pub fn explicit_stability_limit(dx: f64, alpha: f64) -> f64 {
    dx * dx / (2.0 * alpha)
}

/// u_{j,k+1} = u_{j,k} + (αΔt/Δx²)(u_{j+1,k} − 2u_{j,k} + u_{j−1,k}).
pub fn heat_explicit(u0: &RealField, alpha: f64, dt: f64, boundary: Dirichlet, steps: usize) -> Result<HeatRun> {
    let r = alpha * dt / (u0.dx * u0.dx);
    let unstable = dt > explicit_stability_limit(u0.dx, alpha);
    let m = u0.len();
    let mut u = u0.values.clone();
    u[0] = boundary.left;
    u[m - 1] = boundary.right;
    let mut next = u.clone();
    for step in 0..steps {
        for j in 1..m - 1 {
            next[j] = u[j] + r * (u[j + 1] - 2.0 * u[j] + u[j - 1]);
        }
        std::mem::swap(&mut u, &mut next);
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(step + 1));
        }
    }
    Ok(HeatRun { field: GridField { values: u, ..*u0 }, unstable })
}

/// Thomas algorithm for sub·x_{j−1} + diag·x_j + sup·x_{j+1} = rhs.
pub fn sweep_solve(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for j in 0..n {
        let a = if j > 0 { sub[j] } else { 0.0 };
        let pivot = diag[j] - if j > 0 { a * c[j - 1] } else { 0.0 };
        if pivot.abs() < 1e-300 || !pivot.is_finite() {
            return Err(Error::SingularPivot(j));
        }
        c[j] = if j + 1 < n { sup[j] / pivot } else { 0.0 };
        d[j] = (rhs[j] - if j > 0 { a * d[j - 1] } else { 0.0 }) / pivot;
    }
    for j in (0..n.saturating_sub(1)).rev() {
        d[j] -= c[j] * d[j + 1];
    }
    Ok(d)
}

/// Implicit layer u_{j+1} + β u_j + u_{j−1} = −(Δx²/(αΔt)) u^old_j with
/// β = −2 − Δx²/(αΔt), solved by the sweep in O(m).
pub fn heat_sweep(u0: &RealField, alpha: f64, dt: f64, boundary: Dirichlet, steps: usize) -> Result<RealField> {
    let m = u0.len();
    let s = u0.dx * u0.dx / (alpha * dt);
    let beta = -2.0 - s;
    let inner = m - 2;
    let sub = vec![1.0; inner];
    let diag = vec![beta; inner];
    let sup = vec![1.0; inner];
    let mut u = u0.values.clone();
    u[0] = boundary.left;
    u[m - 1] = boundary.right;
    let mut rhs = vec![0.0; inner];
    for _ in 0..steps {
        for j in 0..inner {
            rhs[j] = -s * u[j + 1];
        }
        rhs[0] -= boundary.left;
        rhs[inner - 1] -= boundary.right;
        let sol = sweep_solve(&sub, &diag, &sup, &rhs)?;
        u[1..m - 1].copy_from_slice(&sol);
    }
    Ok(GridField { values: u, ..*u0 })
}

/// Ω = β + 2 of the sweep scheme.
pub fn sweep_omega(dx: f64, alpha: f64, dt: f64) -> f64 {
    -dx * dx / (alpha * dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Splitting {
    /// V/2 · T · V/2.
    #[default]
    Strang,
    /// V · T.
    Lie,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitStepParams {
    pub mass: f64,
    pub dt: f64,
    pub potential: Vec<f64>,
    pub hbar: f64,
    pub splitting: Splitting,
}

impl SplitStepParams {
    pub fn new(mass: f64, dt: f64, potential: Vec<f64>) -> Self {
        Self { mass, dt, potential, hbar: 1.0, splitting: Splitting::Strang }
    }
}

/// Angular wave numbers in FFT order for m nodes spaced dx.
pub fn wave_numbers(m: usize, dx: f64) -> Vec<f64> {
    (0..m)
        .map(|j| {
            let kj = if j < m.div_ceil(2) { j as f64 } else { j as f64 - m as f64 };
            2.0 * PI * kj / (m as f64 * dx)
        })
        .collect()
}

pub struct SplitStepper {
    half_v: Vec<C>,
    full_v: Vec<C>,
    kinetic: Vec<C>,
    splitting: Splitting,
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
    ifft: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl SplitStepper {
    pub fn new(m: usize, dx: f64, params: &SplitStepParams) -> Result<Self> {
        if params.potential.len() != m {
            return Err(Error::InvalidArgument("potential length must match the grid".into()));
        }
        if !(params.dt > 0.0) || !(params.mass > 0.0) {
            return Err(Error::InvalidArgument("dt and mass must be positive".into()));
        }
        let h = params.hbar;
        let phase = |v: f64, t: f64| C::from_polar(1.0, -v * t / h);
        let kinetic = wave_numbers(m, dx).into_iter().map(|k| phase(h * h * k * k / (2.0 * params.mass), params.dt)).collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            half_v: params.potential.iter().map(|&v| phase(v, params.dt / 2.0)).collect(),
            full_v: params.potential.iter().map(|&v| phase(v, params.dt)).collect(),
            kinetic,
            splitting: params.splitting,
            fft: planner.plan_fft_forward(m),
            ifft: planner.plan_fft_inverse(m),
        })
    }

    pub fn step(&self, psi: &mut [C]) {
        let m = psi.len() as f64;
        let pot = match self.splitting {
            Splitting::Strang => &self.half_v,
            Splitting::Lie => &self.full_v,
        };
        psi.iter_mut().zip(pot).for_each(|(z, p)| *z *= p);
        self.fft.process(psi);
        psi.iter_mut().zip(&self.kinetic).for_each(|(z, k)| *z *= k / m);
        self.ifft.process(psi);
        if self.splitting == Splitting::Strang {
            psi.iter_mut().zip(&self.half_v).for_each(|(z, p)| *z *= p);
        }
    }
}

pub fn split_step(psi0: &ComplexField, params: &SplitStepParams, steps: usize) -> Result<ComplexField> {
    let stepper = SplitStepper::new(psi0.len(), psi0.dx, params)?;
    let mut psi = psi0.values.clone();
    for _ in 0..steps {
        stepper.step(&mut psi);
    }
    Ok(GridField { values: psi, ..*psi0 })
}

/// |FT ψ|² in FFT order.
pub fn momentum_distribution(psi: &ComplexField) -> Vec<f64> {
    let mut v = psi.values.clone();
    FftPlanner::new().plan_fft_forward(v.len()).process(&mut v);
    v.iter().map(|z| z.norm_sqr()).collect()
}

/// K(x, t) = (2πiħt/m)^{−1/2} e^{imx²/(2ħt)}.
pub fn free_kernel(x: f64, t: f64, m: f64, hbar: f64) -> Result<C> {
    if t == 0.0 {
        return Err(Error::SingularTime);
    }
    let pre = C::new(0.0, 2.0 * PI * hbar * t / m).sqrt().inv();
    Ok(pre * C::from_polar(1.0, m * x * x / (2.0 * hbar * t)))
}

/// ψ(x, t) = ∫ K(x − y, t) ψ(y) dy by the rectangle rule.
pub fn propagate_with_kernel(psi: &ComplexField, t: f64, m: f64, hbar: f64) -> Result<ComplexField> {
    let xs = psi.xs();
    let mut out = vec![C::new(0.0, 0.0); psi.len()];
    for (i, &x) in xs.iter().enumerate() {
        let mut acc = C::new(0.0, 0.0);
        for (j, &y) in xs.iter().enumerate() {
            acc += free_kernel(x - y, t, m, hbar)? * psi.values[j];
        }
        out[i] = acc * psi.dx;
    }
    Ok(GridField { values: out, ..*psi })
}

pub const DEFAULT_CLASSICALITY_THRESHOLD: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classicality {
    pub ratio: f64,
    pub classical: bool,
}

/// |S|/ħ against a threshold standing in for "much greater than".
pub fn classicality(action: f64, hbar: f64, threshold: f64) -> Result<Classicality> {
    if !action.is_finite() {
        return Err(Error::InvalidArgument("action must be finite".into()));
    }
    let ratio = action.abs() / hbar;
    Ok(Classicality { ratio, classical: ratio > threshold })
}

/// Normalized harmonic ground state e^{−mωx²/(2ħ)} on the grid.
pub fn harmonic_ground_state(m_nodes: usize, dx: f64, origin: f64, mass: f64, omega: f64, hbar: f64) -> Result<ComplexField> {
    let mut f = ComplexField::from_fn(m_nodes, dx, origin, |x| C::new((-mass * omega * x * x / (2.0 * hbar)).exp(), 0.0))?;
    let n = f.norm();
    f.values.iter_mut().for_each(|z| *z /= n);
    Ok(f)
}

/// Gaussian packet of width σ₀ centred at x₀ with wave number k₀.
pub fn gaussian_packet(m_nodes: usize, dx: f64, origin: f64, x0: f64, sigma0: f64, k0: f64) -> Result<ComplexField> {
    let mut f = ComplexField::from_fn(m_nodes, dx, origin, |x| {
        C::from_polar((-(x - x0).powi(2) / (4.0 * sigma0 * sigma0)).exp(), k0 * x)
    })?;
    let n = f.norm();
    f.values.iter_mut().for_each(|z| *z /= n);
    Ok(f)
}

/// sin(Nπx/L) with N = m − 2, the fastest mode the grid resolves; it is the
/// first to blow up when the explicit scheme leaves its stability range.
pub fn highest_sine_mode(m: usize, dx: f64) -> Result<RealField> {
    let l = (m - 1) as f64 * dx;
    let n = (m - 2) as f64;
    RealField::from_fn(m, dx, 0.0, |x| (n * PI * x / l).sin())
}

pub fn max_abs(field: &RealField) -> f64 {
    field.values.iter().fold(0.0, |a, v| a.max(v.abs()))
}
