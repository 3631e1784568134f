//! Time integration of the penalized flow in the corotational reduction.
//!
//! The default scheme is Strang splitting `heat(dt/2) o penalty(dt) o heat(dt/2)`
//! with backward-Euler heat substeps and an exact pointwise penalty substep.
//! The penalty coefficient is frozen at the start of each step.

use std::fmt;
use std::str::FromStr;

use crate::error::{GlhfError, Result};
use crate::grid::{CorotationalField, RadialGrid};
use crate::scheme::{chi_dot, kappa_dot, penalty_shape, SchemeParams};
use crate::tridiag::{Tridiagonal, TridiagonalFactor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Strang,
    Imex,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Strang => f.write_str("strang"),
            Scheme::Imex => f.write_str("imex"),
        }
    }
}

impl FromStr for Scheme {
    type Err = GlhfError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "strang" => Ok(Scheme::Strang),
            "imex" => Ok(Scheme::Imex),
            other => Err(GlhfError::InvalidParameter(format!(
                "unknown scheme `{other}` (expected strang or imex)"
            ))),
        }
    }
}

pub const DEFAULT_NEWTON_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub checkpoint_stride: usize,
    /// Tolerance of the cutoff-region penalty solve (`|u|^2 > 1 + sqrt 2`).
    pub newton_tol: f64,
}

impl StepperConfig {
    pub fn new(dt: f64, scheme: Scheme, checkpoint_stride: usize) -> Self {
        StepperConfig {
            dt,
            scheme,
            checkpoint_stride,
            newton_tol: DEFAULT_NEWTON_TOL,
        }
    }

    /// Number of uniform steps covering `[0, horizon]`.
    pub fn step_count(&self, horizon: f64) -> Result<usize> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(GlhfError::InvalidParameter(format!(
                "dt must be a positive finite number, got {}",
                self.dt
            )));
        }
        if self.checkpoint_stride == 0 {
            return Err(GlhfError::InvalidParameter(
                "checkpoint_stride must be >= 1".into(),
            ));
        }
        if !(self.newton_tol > 0.0) {
            return Err(GlhfError::InvalidParameter(format!(
                "newton_tol must be positive, got {}",
                self.newton_tol
            )));
        }
        if horizon == 0.0 {
            return Ok(0);
        }
        if self.dt > horizon {
            return Err(GlhfError::InvalidParameter(format!(
                "dt = {} exceeds the horizon T = {horizon}",
                self.dt
            )));
        }
        let ratio = horizon / self.dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-6 * ratio.max(1.0) {
            return Err(GlhfError::InvalidParameter(format!(
                "T = {horizon} is not an integer multiple of dt = {}",
                self.dt
            )));
        }
        Ok(steps as usize)
    }
}

/// Running time integrals accumulated step by step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Accumulators {
    /// `sum dt int |(u^{m+1} - u^m)/dt|^2`.
    pub kinetic: f64,
    /// `sum dt (log lambda / 4) kappa'(t_m) Lambda(t_m) int chi((|u^m|^2-1)^2)`.
    pub chi_dissipation: f64,
    /// `sum dt Lambda(t_m) int chi((|u^m|^2-1)^2)`.
    pub penalty_integral: f64,
}

/// Immutable run record.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    params: SchemeParams,
    grid: RadialGrid,
    dt: f64,
    stride: usize,
    slices: Vec<CorotationalField>,
    history: Option<Vec<Accumulators>>,
    final_accum: Accumulators,
    max_modulus_sq: Option<f64>,
}

impl Trajectory {
    /// Assembles a trajectory from externally produced slices (synthetic
    /// fields, loaded dumps). Per-checkpoint accumulators are optional.
    pub fn from_slices(
        params: SchemeParams,
        grid: RadialGrid,
        dt: f64,
        stride: usize,
        slices: Vec<CorotationalField>,
        history: Option<Vec<Accumulators>>,
        final_accum: Accumulators,
    ) -> Result<Self> {
        if slices.is_empty() {
            return Err(GlhfError::InvalidParameter(
                "a trajectory needs at least one slice".into(),
            ));
        }
        if params.dim() != grid.dim() {
            return Err(GlhfError::InvalidParameter(format!(
                "scheme dimension {} differs from grid dimension {}",
                params.dim(),
                grid.dim()
            )));
        }
        for (k, s) in slices.iter().enumerate() {
            if s.nodes() != grid.nodes() {
                return Err(GlhfError::InvalidParameter(format!(
                    "slice {k} has {} nodes, grid has {}",
                    s.nodes(),
                    grid.nodes()
                )));
            }
            if k > 0 && !(s.t > slices[k - 1].t) {
                return Err(GlhfError::InvalidParameter(format!(
                    "slice times must increase strictly (slice {k} at t = {})",
                    s.t
                )));
            }
        }
        if let Some(h) = &history {
            if h.len() != slices.len() {
                return Err(GlhfError::InvalidParameter(
                    "accumulator history length differs from slice count".into(),
                ));
            }
        }
        Ok(Trajectory {
            params,
            grid,
            dt,
            stride,
            slices,
            history,
            final_accum,
            max_modulus_sq: None,
        })
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn slices(&self) -> &[CorotationalField] {
        &self.slices
    }

    pub fn times(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.t).collect()
    }

    pub fn initial(&self) -> &CorotationalField {
        &self.slices[0]
    }

    pub fn last(&self) -> &CorotationalField {
        self.slices.last().expect("non-empty by construction")
    }

    /// Accumulator values at each checkpoint; absent for loaded dumps.
    pub fn history(&self) -> Option<&[Accumulators]> {
        self.history.as_deref()
    }

    pub fn final_accumulators(&self) -> Accumulators {
        self.final_accum
    }

    /// Largest `g^2 + zeta^2` seen over every step of the run (not only checkpoints).
    pub fn max_modulus_sq(&self) -> Option<f64> {
        self.max_modulus_sq
    }

    /// Largest spacing between consecutive checkpoints.
    pub fn max_checkpoint_spacing(&self) -> f64 {
        self.slices
            .windows(2)
            .map(|w| w[1].t - w[0].t)
            .fold(0.0, f64::max)
    }
}

fn heat_matrices(grid: &RadialGrid, tau: f64) -> (Tridiagonal, Tridiagonal) {
    let n = grid.cells();
    let a = grid.conductance();
    let b = grid.reaction();
    let m = grid.mass();

    // zeta: unknowns at nodes 0..n-1, natural (reflection) condition at r = 0
    let mut zl = vec![0.0; n];
    let mut zd = vec![0.0; n];
    let mut zu = vec![0.0; n];
    for i in 0..n {
        let left = if i > 0 { a[i - 1] } else { 0.0 };
        zl[i] = -tau * left / m[i];
        zu[i] = -tau * a[i] / m[i];
        zd[i] = 1.0 + tau * (left + a[i]) / m[i];
    }

    // g: unknowns at nodes 1..n-1, g(0) = 0
    let k = n - 1;
    let mut gl = vec![0.0; k];
    let mut gd = vec![0.0; k];
    let mut gu = vec![0.0; k];
    for row in 0..k {
        let i = row + 1;
        gl[row] = -tau * a[i - 1] / m[i];
        gu[row] = -tau * a[i] / m[i];
        gd[row] = 1.0 + tau * (a[i - 1] + a[i] + b[i - 1] + b[i]) / m[i];
    }
    (
        Tridiagonal {
            lower: gl,
            diag: gd,
            upper: gu,
        },
        Tridiagonal {
            lower: zl,
            diag: zd,
            upper: zu,
        },
    )
}

/// Backward-Euler heat solve of length `tau`, factored once.
#[derive(Clone, Debug)]
struct HeatSolver {
    g: TridiagonalFactor,
    zeta: TridiagonalFactor,
    coupling: f64,
}

impl HeatSolver {
    fn new(grid: &RadialGrid, tau: f64) -> Result<Self> {
        let (gm, zm) = heat_matrices(grid, tau);
        let n = grid.cells();
        Ok(HeatSolver {
            g: gm.factor(true)?,
            zeta: zm.factor(true)?,
            coupling: tau * grid.conductance()[n - 1] / grid.mass()[n - 1],
        })
    }

    fn apply(&self, f: &mut CorotationalField, scratch: &mut Vec<f64>) {
        let n = f.g.len() - 1;
        scratch.clear();
        scratch.extend_from_slice(&f.g[1..n]);
        *scratch.last_mut().expect("n >= 16") += self.coupling * f.g[n];
        self.g.solve_in_place(scratch);
        f.g[1..n].copy_from_slice(scratch);

        // zeta is solved for its deviation from the boundary value, which
        // keeps constant profiles fixed without rounding
        let edge = f.zeta[n];
        scratch.clear();
        scratch.extend(f.zeta[..n].iter().map(|z| z - edge));
        self.zeta.solve_in_place(scratch);
        for (z, d) in f.zeta[..n].iter_mut().zip(scratch.iter()) {
            *z = edge + d;
        }
    }
}

/// One backward-Euler heat substep of length `dt_sub`.
pub fn heat_substep(f: &CorotationalField, dt_sub: f64, grid: &RadialGrid) -> Result<CorotationalField> {
    if f.nodes() != grid.nodes() {
        return Err(GlhfError::InvalidParameter(format!(
            "field has {} nodes, grid has {}",
            f.nodes(),
            grid.nodes()
        )));
    }
    if !(dt_sub >= 0.0) {
        return Err(GlhfError::InvalidParameter(format!(
            "substep length must be >= 0, got {dt_sub}"
        )));
    }
    let solver = HeatSolver::new(grid, dt_sub)?;
    let mut out = f.clone();
    solver.apply(&mut out, &mut Vec::new());
    Ok(out)
}

/// `d|u|^2/dt` of the pointwise penalty ODE, `-2 Lambda chi'((y-1)^2) (y-1) y`.
#[inline]
fn modulus_rate(coeff: f64, y: f64) -> f64 {
    -2.0 * coeff * penalty_shape(y) * y
}

/// Closed-form solution of `y' = 2 Lambda y (1 - y)` after time `tau`.
#[inline]
pub fn logistic_modulus(y: f64, coeff: f64, tau: f64) -> f64 {
    let decay = (-2.0 * coeff * tau).exp();
    y / (y + (1.0 - y) * decay)
}

/// `|u|^2` below which the cutoff is inactive: `(y - 1)^2 < 2`.
const LOGISTIC_CEILING: f64 = 1.0 + std::f64::consts::SQRT_2;
/// `|u|^2` at and above which the cutoff slope vanishes.
const FROZEN_FLOOR: f64 = 3.0;

/// Time the penalty ODE needs to bring `|u|^2` from `from` down to `to`,
/// both inside the cutoff region.
fn transit_time(coeff: f64, from: f64, to: f64, tol: f64) -> f64 {
    let f = |y: f64| -1.0 / modulus_rate(coeff, y);
    adaptive_simpson(&f, to, from, tol, 48)
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn step(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if b <= a {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, depth)
}

/// Exact evolution of `|u|^2` under the penalty ODE for time `tau`.
pub fn evolve_modulus(y: f64, coeff: f64, tau: f64, tol: f64) -> Result<f64> {
    let m = y - 1.0;
    if y <= 0.0 || m * m <= 2.0 {
        return Ok(if y <= 0.0 { 0.0 } else { logistic_modulus(y, coeff, tau) });
    }
    if y >= FROZEN_FLOOR {
        return Ok(y);
    }
    let quad_tol = tol * tau.max(f64::MIN_POSITIVE);
    let to_ceiling = transit_time(coeff, y, LOGISTIC_CEILING, quad_tol);
    if to_ceiling <= tau {
        return Ok(logistic_modulus(LOGISTIC_CEILING, coeff, tau - to_ceiling));
    }
    // solve transit_time(y, z) = tau for z in (ceiling, y)
    let (mut lo, mut hi) = (LOGISTIC_CEILING, y);
    let mut z = (y + tau * modulus_rate(coeff, y)).clamp(lo, hi);
    for _ in 0..200 {
        let phi = transit_time(coeff, y, z, quad_tol) - tau;
        if phi.abs() <= tol * tau || hi - lo <= tol * y {
            return Ok(z);
        }
        if phi > 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        // phi'(z) = 1 / rate(z) (rate < 0)
        let newton = z - phi * modulus_rate(coeff, z);
        z = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(GlhfError::Numerical {
        step: 0,
        reason: format!("cutoff-region penalty solve did not converge from |u|^2 = {y}"),
    })
}

fn penalty_in_place(f: &mut CorotationalField, coeff: f64, tau: f64, tol: f64) -> Result<()> {
    let last = f.g.len() - 1;
    for i in 0..last {
        let y = f.modulus_sq(i);
        if y == 0.0 {
            continue;
        }
        let y_out = evolve_modulus(y, coeff, tau, tol)?;
        let scale = (y_out / y).sqrt();
        f.g[i] *= scale;
        f.zeta[i] *= scale;
    }
    Ok(())
}

/// Exact pointwise penalty substep with the coefficient frozen at `f.t`.
/// Directions `(g, zeta)/|(g, zeta)|` are kept; boundary nodes are untouched.
pub fn penalty_substep(
    f: &CorotationalField,
    dt_sub: f64,
    p: &SchemeParams,
    newton_tol: f64,
) -> Result<CorotationalField> {
    let coeff = p.penalty_coefficient(f.t)?;
    let mut out = f.clone();
    penalty_in_place(&mut out, coeff, dt_sub, newton_tol)?;
    Ok(out)
}

/// Reusable stepper holding the factored heat matrices.
#[derive(Clone, Debug)]
pub struct Stepper {
    params: SchemeParams,
    grid: RadialGrid,
    config: StepperConfig,
    half_heat: Option<HeatSolver>,
    scratch: Vec<f64>,
}

impl Stepper {
    pub fn new(params: &SchemeParams, grid: &RadialGrid, config: &StepperConfig) -> Result<Self> {
        if params.dim() != grid.dim() {
            return Err(GlhfError::InvalidParameter(format!(
                "scheme dimension {} differs from grid dimension {}",
                params.dim(),
                grid.dim()
            )));
        }
        let half_heat = match config.scheme {
            Scheme::Strang => Some(HeatSolver::new(grid, 0.5 * config.dt)?),
            Scheme::Imex => None,
        };
        Ok(Stepper {
            params: params.clone(),
            grid: grid.clone(),
            config: config.clone(),
            half_heat,
            scratch: Vec::with_capacity(grid.nodes()),
        })
    }

    /// Advances `f` by one step of length `dt`; the time stamp is left to the caller.
    pub fn advance(&mut self, f: &mut CorotationalField) -> Result<()> {
        let coeff = self.params.penalty_coefficient(f.t)?;
        let dt = self.config.dt;
        match self.config.scheme {
            Scheme::Strang => {
                let heat = self.half_heat.as_ref().expect("strang keeps a heat solver");
                heat.apply(f, &mut self.scratch);
                penalty_in_place(f, coeff, dt, self.config.newton_tol)?;
                heat.apply(f, &mut self.scratch);
            }
            Scheme::Imex => self.imex(f, coeff)?,
        }
        Ok(())
    }

    fn imex(&mut self, f: &mut CorotationalField, coeff: f64) -> Result<()> {
        let dt = self.config.dt;
        let (mut gm, mut zm) = heat_matrices(&self.grid, dt);
        let n = self.grid.cells();
        for row in 0..n - 1 {
            gm.diag[row] += dt * coeff * penalty_shape(f.modulus_sq(row + 1));
        }
        for i in 0..n {
            zm.diag[i] += dt * coeff * penalty_shape(f.modulus_sq(i));
        }
        let coupling = dt * self.grid.conductance()[n - 1] / self.grid.mass()[n - 1];
        let gf = gm.factor(false)?;
        let zf = zm.factor(false)?;
        let s = &mut self.scratch;
        s.clear();
        s.extend_from_slice(&f.g[1..n]);
        s[n - 2] += coupling * f.g[n];
        gf.solve_in_place(s);
        f.g[1..n].copy_from_slice(s);
        // the reaction term breaks the constant-shift invariance, so the
        // shifted right-hand side picks up -tau Lambda shape(y) zeta_n
        let edge = f.zeta[n];
        s.clear();
        for i in 0..n {
            let react = dt * coeff * penalty_shape(f.modulus_sq(i));
            s.push(f.zeta[i] - edge - react * edge);
        }
        zf.solve_in_place(s);
        for (z, d) in f.zeta[..n].iter_mut().zip(s.iter()) {
            *z = edge + d;
        }
        Ok(())
    }
}

/// One full step (`strang` or `imex`) from `f` at `f.t`.
pub fn step(
    f: &CorotationalField,
    cfg: &StepperConfig,
    p: &SchemeParams,
    grid: &RadialGrid,
) -> Result<CorotationalField> {
    let mut stepper = Stepper::new(p, grid, cfg)?;
    let mut out = f.clone();
    stepper.advance(&mut out)?;
    out.t = f.t + cfg.dt;
    Ok(out)
}

/// Integrates from `initial` (at `t = 0`) to the horizon of `p`.
pub fn run(
    p: &SchemeParams,
    grid: &RadialGrid,
    cfg: &StepperConfig,
    initial: &CorotationalField,
) -> Result<Trajectory> {
    if initial.nodes() != grid.nodes() {
        return Err(GlhfError::InvalidParameter(format!(
            "initial datum has {} nodes, grid has {}",
            initial.nodes(),
            grid.nodes()
        )));
    }
    if !initial.is_finite() {
        return Err(GlhfError::InvalidParameter(
            "initial datum has non-finite values".into(),
        ));
    }
    let steps = cfg.step_count(p.horizon())?;
    let mut stepper = Stepper::new(p, grid, cfg)?;
    let dt = cfg.dt;
    let quarter_log = 0.25 * p.log_lambda();

    let mut current = initial.clone();
    current.t = 0.0;
    let mut acc = Accumulators::default();
    let mut slices = vec![current.clone()];
    let mut history = vec![acc];
    let mut max_mod = current.max_modulus_sq();
    let mut previous = current.clone();

    for m in 0..steps {
        let t = current.t;
        let coeff = p.penalty_coefficient(t)?;
        let chi_int = grid.chi_integral(&current);
        acc.chi_dissipation += dt * quarter_log * kappa_dot(t) * coeff * chi_int;
        acc.penalty_integral += dt * coeff * chi_int;

        previous.g.copy_from_slice(&current.g);
        previous.zeta.copy_from_slice(&current.zeta);
        stepper.advance(&mut current).map_err(|e| match e {
            GlhfError::Numerical { reason, .. } => GlhfError::Numerical { step: m, reason },
            GlhfError::Tridiagonal { row, reason } => GlhfError::Numerical {
                step: m,
                reason: format!("tridiagonal solve failed at row {row}: {reason}"),
            },
            other => other,
        })?;
        if !current.is_finite() {
            return Err(GlhfError::Numerical {
                step: m,
                reason: "non-finite field values (dt too large for this scheme?)".into(),
            });
        }
        current.t = if m + 1 == steps {
            p.horizon()
        } else {
            (m + 1) as f64 * dt
        };

        let mass = grid.mass();
        let mut kin = 0.0;
        for i in 0..grid.nodes() {
            let dg = current.g[i] - previous.g[i];
            let dz = current.zeta[i] - previous.zeta[i];
            kin += mass[i] * (dg * dg + dz * dz);
        }
        acc.kinetic += kin / dt;
        max_mod = max_mod.max(current.max_modulus_sq());

        if (m + 1) % cfg.checkpoint_stride == 0 || m + 1 == steps {
            slices.push(current.clone());
            history.push(acc);
        }
    }

    let mut traj = Trajectory::from_slices(
        p.clone(),
        grid.clone(),
        dt,
        cfg.checkpoint_stride,
        slices,
        Some(history),
        acc,
    )?;
    traj.max_modulus_sq = Some(max_mod);
    Ok(traj)
}

/// Cutoff slope at the current modulus, exposed for diagnostics.
pub fn cutoff_slope(y: f64) -> f64 {
    let m = y - 1.0;
    chi_dot(m * m)
}
