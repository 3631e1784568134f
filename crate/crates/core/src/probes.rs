//! Space-time-localized measurements on parabolic cylinders
//! `P_R(z0) = (t0 - R^2, t0 + R^2) x B_R(x0)`, with `x0` at distance `rho0`
//! from the origin.
//!
//! Time integrals use the piecewise-linear interpolant of per-checkpoint
//! spatial integrals; time derivatives are centred differences of
//! checkpoints (one-sided at the ends). Probes refuse to run unless the
//! checkpoint spacing is at most `R_min^2 / 8`.

use crate::diagnostics::trapezoid;
use crate::error::{GlhfError, Result};
use crate::grid::{CorotationalField, RadialGrid};
use crate::solver::Trajectory;

/// Minimum number of checkpoint intervals inside `R^2`.
pub const SLICES_PER_WINDOW: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParabolicCylinder {
    pub t0: f64,
    pub rho0: f64,
    pub radius: f64,
}

impl ParabolicCylinder {
    pub fn new(t0: f64, rho0: f64, radius: f64) -> Result<Self> {
        if !t0.is_finite() || !(rho0 >= 0.0) || !rho0.is_finite() || !(radius > 0.0) || !radius.is_finite() {
            return Err(GlhfError::InvalidParameter(format!(
                "cylinder needs finite t0, rho0 >= 0, R > 0; got t0 = {t0}, rho0 = {rho0}, R = {radius}"
            )));
        }
        Ok(ParabolicCylinder { t0, rho0, radius })
    }

    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        ParabolicCylinder::new(self.t0, self.rho0, radius)
    }

    pub fn is_on_axis(&self) -> bool {
        self.rho0 == 0.0
    }

    fn check_geometry(&self, dim: usize) -> Result<()> {
        if !self.is_on_axis() && dim != 3 {
            return Err(GlhfError::Precondition(format!(
                "off-axis probes (rho0 = {}) need d = 3, got d = {dim}",
                self.rho0
            )));
        }
        Ok(())
    }

    /// `P_R(z0)` compactly inside `Q(T)`: `0 < t0 - R^2`, `t0 + R^2 < T`, `rho0 + R < 1`.
    pub fn check_contained(&self, horizon: f64, dim: usize) -> Result<()> {
        self.check_geometry(dim)?;
        let (t0, r2) = (self.t0, self.radius * self.radius);
        if !(t0 - r2 > 0.0 && t0 + r2 < horizon) {
            return Err(GlhfError::Precondition(format!(
                "P_R(z0) with t0 = {t0}, R = {} is not inside (0, T) x B: \
                 needs 0 < t0 - R^2 and t0 + R^2 < T = {horizon}",
                self.radius
            )));
        }
        if !(self.rho0 + self.radius < 1.0) {
            return Err(GlhfError::Precondition(format!(
                "P_R(z0) leaves the unit ball: rho0 + R = {} >= 1",
                self.rho0 + self.radius
            )));
        }
        Ok(())
    }

    /// Window of the scaled energy: needs `t0 - (2R)^2 > 0` and data up to `t0 - R^2`.
    pub fn check_backward_window(&self, horizon: f64, dim: usize) -> Result<()> {
        self.check_geometry(dim)?;
        let r2 = self.radius * self.radius;
        if !(self.t0 - 4.0 * r2 > 0.0) {
            return Err(GlhfError::Precondition(format!(
                "scaled energy needs t0 - (2R)^2 > 0; t0 = {}, R = {} gives {}",
                self.t0,
                self.radius,
                self.t0 - 4.0 * r2
            )));
        }
        if self.t0 - r2 > horizon {
            return Err(GlhfError::Precondition(format!(
                "scaled-energy window ends at t0 - R^2 = {} past T = {horizon}",
                self.t0 - r2
            )));
        }
        Ok(())
    }

    fn window(&self) -> (f64, f64) {
        let r2 = self.radius * self.radius;
        (self.t0 - r2, self.t0 + r2)
    }
}

/// Nodal energy densities at increasing times; also the entry point for
/// synthetic densities.
#[derive(Clone, Debug, PartialEq)]
pub struct DensitySeries {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl DensitySeries {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>, grid: &RadialGrid) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(GlhfError::InvalidParameter(format!(
                "density series needs one nodal vector per time ({} times, {} vectors)",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(GlhfError::InvalidParameter(
                "density series times must increase strictly".into(),
            ));
        }
        if let Some(k) = values.iter().position(|v| v.len() != grid.nodes()) {
            return Err(GlhfError::InvalidParameter(format!(
                "density vector {k} has {} entries, grid has {} nodes",
                values[k].len(),
                grid.nodes()
            )));
        }
        Ok(DensitySeries { times, values })
    }

    /// `e_lambda` of every checkpoint.
    pub fn from_trajectory(traj: &Trajectory) -> Result<Self> {
        let grid = traj.grid();
        let values = traj
            .slices()
            .iter()
            .map(|s| grid.gl_energy_density(s, traj.params()))
            .collect::<Result<Vec<_>>>()?;
        Ok(DensitySeries {
            times: traj.times(),
            values,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }
}

fn check_stride(times: &[f64], r_min: f64) -> Result<()> {
    let spacing = times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let limit = r_min * r_min / SLICES_PER_WINDOW;
    if spacing > limit * (1.0 + 1e-9) {
        return Err(GlhfError::Precondition(format!(
            "checkpoint spacing {spacing} exceeds R_min^2 / 8 = {limit} (R_min = {r_min}); \
             lower checkpoint_stride"
        )));
    }
    Ok(())
}

/// Exact integral over `[a, b]` of the piecewise-linear interpolant of `(x, y)`.
pub fn window_integral(x: &[f64], y: &[f64], a: f64, b: f64) -> f64 {
    if b <= a || x.is_empty() {
        return 0.0;
    }
    let interp = |t: f64, k: usize| {
        let (x0, x1) = (x[k], x[k + 1]);
        let th = (t - x0) / (x1 - x0);
        y[k] * (1.0 - th) + y[k + 1] * th
    };
    let mut total = 0.0;
    for k in 0..x.len().saturating_sub(1) {
        let lo = x[k].max(a);
        let hi = x[k + 1].min(b);
        if hi > lo {
            total += 0.5 * (hi - lo) * (interp(lo, k) + interp(hi, k));
        }
    }
    total
}

/// Centred checkpoint differences, one-sided at the first and last slice.
fn time_derivatives(slices: &[CorotationalField]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let k_max = slices.len() - 1;
    (0..=k_max)
        .map(|k| {
            let (a, b) = if k == 0 {
                (0, 1)
            } else if k == k_max {
                (k_max - 1, k_max)
            } else {
                (k - 1, k + 1)
            };
            let span = slices[b].t - slices[a].t;
            let dg = slices[a].g.iter().zip(&slices[b].g).map(|(p, q)| (q - p) / span).collect();
            let dz = slices[a]
                .zeta
                .iter()
                .zip(&slices[b].zeta)
                .map(|(p, q)| (q - p) / span)
                .collect();
            (dg, dz)
        })
        .collect()
}

fn need_two_slices(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Err(GlhfError::Precondition(
            "space-time probes need at least two checkpoints".into(),
        ));
    }
    Ok(())
}

/// `(1/R^d) int_{t0-R^2}^{t0+R^2} int_{B_R(x0)} e` for a density series.
pub fn density_of_series(grid: &RadialGrid, series: &DensitySeries, cyl: &ParabolicCylinder) -> Result<f64> {
    need_two_slices(&series.times)?;
    cyl.check_contained(series.horizon(), grid.dim())?;
    check_stride(&series.times, cyl.radius)?;
    let per_slice: Vec<f64> = series
        .values
        .iter()
        .map(|v| grid.offcenter_ball_integral_unchecked(v, cyl.rho0, cyl.radius))
        .collect();
    let (a, b) = cyl.window();
    Ok(window_integral(&series.times, &per_slice, a, b) / cyl.radius.powi(grid.dim() as i32))
}

/// Cylinder-averaged energy `(1/R^d) int_{P_R(z0)} e_lambda`.
pub fn density(traj: &Trajectory, cyl: &ParabolicCylinder) -> Result<f64> {
    density_of_series(traj.grid(), &DensitySeries::from_trajectory(traj)?, cyl)
}

/// `G(t_k) = int_B e(t_k) exp(-|x - x0|^2 / (4 (t0 - t_k)))` for `t_k < t0`, zero otherwise.
fn gaussian_series(grid: &RadialGrid, times: &[f64], values: &[Vec<f64>], t0: f64, rho0: f64) -> Vec<f64> {
    times
        .iter()
        .zip(values)
        .map(|(&t, v)| {
            if t < t0 {
                grid.gaussian_ball_integral(v, rho0, t0 - t)
            } else {
                0.0
            }
        })
        .collect()
}

/// Scaled energy `(1/R^d) int_{t0-4R^2}^{t0-R^2} int_B e exp(|x-x0|^2 / (4(t - t0)))`
/// of a density series.
pub fn scaled_energy_of_series(
    grid: &RadialGrid,
    series: &DensitySeries,
    cyl: &ParabolicCylinder,
) -> Result<f64> {
    need_two_slices(&series.times)?;
    cyl.check_backward_window(series.horizon(), grid.dim())?;
    check_stride(&series.times, cyl.radius)?;
    let g = gaussian_series(grid, &series.times, &series.values, cyl.t0, cyl.rho0);
    Ok(scaled_from_gaussian(&series.times, &g, cyl, grid.dim()))
}

fn scaled_from_gaussian(times: &[f64], g: &[f64], cyl: &ParabolicCylinder, dim: usize) -> f64 {
    let r2 = cyl.radius * cyl.radius;
    window_integral(times, g, cyl.t0 - 4.0 * r2, cyl.t0 - r2) / cyl.radius.powi(dim as i32)
}

/// Scaled energy `E_lambda(R; z0)` with `R = cyl.radius`.
pub fn scaled_energy(traj: &Trajectory, cyl: &ParabolicCylinder) -> Result<f64> {
    scaled_energy_of_series(traj.grid(), &DensitySeries::from_trajectory(traj)?, cyl)
}

/// Per-checkpoint `F(t_k) = int_B |u_t + x.grad u / (2 (t_k - t0))|^2 exp(-|x|^2 / (4 (t0 - t_k)))`
/// for an on-axis centre.
fn self_similarity_series(traj: &Trajectory, t0: f64) -> Vec<f64> {
    let grid = traj.grid();
    let slices = traj.slices();
    let derivs = time_derivatives(slices);
    let mut psi = vec![0.0; grid.nodes()];
    slices
        .iter()
        .zip(&derivs)
        .map(|(s, (dg, dz))| {
            if s.t >= t0 {
                return 0.0;
            }
            let gr = grid.radial_derivative(&s.g);
            let zr = grid.radial_derivative(&s.zeta);
            let c = 1.0 / (2.0 * (s.t - t0));
            for (i, p) in psi.iter_mut().enumerate() {
                let r = grid.r(i);
                let a = dg[i] + c * r * gr[i];
                let b = dz[i] + c * r * zr[i];
                *p = a * a + b * b;
            }
            grid.gaussian_ball_integral(&psi, 0.0, t0 - s.t)
        })
        .collect()
}

/// Composite Simpson intervals for the `R`-integral of the defect.
const DEFECT_PANELS: usize = 64;

fn defect_from_series(times: &[f64], f: &[f64], t0: f64, r1: f64, r2: f64, dim: usize) -> f64 {
    let phi = |r: f64| {
        window_integral(times, f, t0 - 4.0 * r * r, t0 - r * r) / r.powi(dim as i32 - 1)
    };
    let h = (r2 - r1) / DEFECT_PANELS as f64;
    let mut acc = phi(r1) + phi(r2);
    for k in 1..DEFECT_PANELS {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * phi(r1 + k as f64 * h);
    }
    acc * h / 3.0
}

/// Self-similarity defect
/// `int_{R1}^{R2} dR/R^{d-1} int_{t0-4R^2}^{t0-R^2} int_B |u_t + x.grad u/(2(t-t0))|^2 exp(|x|^2/(4(t-t0)))`
/// for an on-axis centre.
pub fn flow_defect(traj: &Trajectory, cyl: &ParabolicCylinder, r1: f64, r2: f64) -> Result<f64> {
    if !(r1 > 0.0 && r1 < r2) {
        return Err(GlhfError::InvalidParameter(format!(
            "flow defect needs 0 < R1 < R2, got R1 = {r1}, R2 = {r2}"
        )));
    }
    if !cyl.is_on_axis() {
        return Err(GlhfError::Precondition(format!(
            "flow defect is only available for on-axis centres (rho0 = {})",
            cyl.rho0
        )));
    }
    need_two_slices(&traj.times())?;
    let horizon = traj.last().t;
    cyl.with_radius(r2)?.check_backward_window(horizon, traj.grid().dim())?;
    cyl.with_radius(r1)?.check_backward_window(horizon, traj.grid().dim())?;
    check_stride(&traj.times(), r1)?;
    let f = self_similarity_series(traj, cyl.t0);
    Ok(defect_from_series(&traj.times(), &f, cyl.t0, r1, r2, traj.grid().dim()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonotonicityReport {
    pub t0: f64,
    pub rho0: f64,
    pub radii: Vec<f64>,
    pub energies: Vec<f64>,
    /// `defects[i][j] = D(R_i, R_j)` for `i < j`; zero elsewhere. `None` off-axis.
    pub defects: Option<Vec<Vec<f64>>>,
    /// Smallest `C_M >= 0` with `E_j + C_M R_j^2/2 >= E_i + D_ij + C_M R_i^2/2` for all `i < j`.
    pub c_m: f64,
    /// Distance `1 - rho0` from the centre to the boundary sphere.
    pub d0: f64,
    /// `(int_{dB} |grad_tau u_0|^2 + int |grad u_0|^2) / d0^{d+2}`, the shape of the
    /// constant in the monotonicity inequality up to a universal factor.
    pub structural_scale: f64,
}

impl MonotonicityReport {
    /// `E(R) + C_M R^2 / 2` along the ladder.
    pub fn corrected_energies(&self) -> Vec<f64> {
        self.radii
            .iter()
            .zip(&self.energies)
            .map(|(r, e)| e + 0.5 * self.c_m * r * r)
            .collect()
    }
}

pub fn monotonicity_ladder(traj: &Trajectory, t0: f64, rho0: f64, ladder: &[f64]) -> Result<MonotonicityReport> {
    if ladder.len() < 2 || ladder.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(GlhfError::InvalidParameter(
            "monotonicity ladder needs at least two strictly increasing radii".into(),
        ));
    }
    need_two_slices(&traj.times())?;
    let grid = traj.grid();
    let dim = grid.dim();
    let horizon = traj.last().t;
    let cyls = ladder
        .iter()
        .map(|&r| ParabolicCylinder::new(t0, rho0, r))
        .collect::<Result<Vec<_>>>()?;
    for c in &cyls {
        c.check_backward_window(horizon, dim)?;
    }
    let times = traj.times();
    check_stride(&times, ladder[0])?;

    let series = DensitySeries::from_trajectory(traj)?;
    let g = gaussian_series(grid, &times, &series.values, t0, rho0);
    let energies: Vec<f64> = cyls.iter().map(|c| scaled_from_gaussian(&times, &g, c, dim)).collect();

    let m = ladder.len();
    let defects = if rho0 == 0.0 {
        let f = self_similarity_series(traj, t0);
        let mut d = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in i + 1..m {
                d[i][j] = defect_from_series(&times, &f, t0, ladder[i], ladder[j], dim);
            }
        }
        Some(d)
    } else {
        None
    };

    let mut c_m: f64 = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            let dij = defects.as_ref().map_or(0.0, |d| d[i][j]);
            let need = 2.0 * (energies[i] + dij - energies[j]) / (ladder[j].powi(2) - ladder[i].powi(2));
            c_m = c_m.max(need);
        }
    }

    let u0 = traj.initial();
    let d0 = 1.0 - rho0;
    let (_, tangential) = grid.boundary_flux_terms(u0);
    let structural_scale =
        (tangential + 2.0 * grid.dirichlet_energy(u0)) / d0.powi(dim as i32 + 2);

    Ok(MonotonicityReport {
        t0,
        rho0,
        radii: ladder.to_vec(),
        energies,
        defects,
        c_m,
        d0,
        structural_scale,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalEnergyReport {
    /// `int_{P_R} |u_t|^2 + max_t int_{B_R} e`.
    pub lhs: f64,
    /// `(1/R^2) int_{P_{2R}} e`.
    pub rhs_core: f64,
    /// `lhs / rhs_core`; `None` when both vanish.
    pub ratio: Option<f64>,
}

fn ratio(lhs: f64, rhs: f64) -> Option<f64> {
    if rhs > 0.0 {
        Some(lhs / rhs)
    } else {
        None
    }
}

struct CylinderData<'a> {
    traj: &'a Trajectory,
    times: Vec<f64>,
    densities: Vec<Vec<f64>>,
}

impl<'a> CylinderData<'a> {
    fn new(traj: &'a Trajectory, cyl: &ParabolicCylinder) -> Result<Self> {
        let times = traj.times();
        need_two_slices(&times)?;
        let horizon = traj.last().t;
        cyl.with_radius(2.0 * cyl.radius)?
            .check_contained(horizon, traj.grid().dim())?;
        check_stride(&times, cyl.radius)?;
        let densities = DensitySeries::from_trajectory(traj)?.values;
        Ok(CylinderData {
            traj,
            times,
            densities,
        })
    }

    fn ball_series(&self, values: &[Vec<f64>], rho0: f64, radius: f64) -> Vec<f64> {
        let grid = self.traj.grid();
        values
            .iter()
            .map(|v| grid.offcenter_ball_integral_unchecked(v, rho0, radius))
            .collect()
    }

    fn energy(&self, cyl: &ParabolicCylinder, radius: f64) -> f64 {
        let s = self.ball_series(&self.densities, cyl.rho0, radius);
        let r2 = radius * radius;
        window_integral(&self.times, &s, cyl.t0 - r2, cyl.t0 + r2)
    }

    /// `int_{P_{2R}} |u - a(t)|^2` with `a(t)` the mean of `u` over `B_{2R}(x0)`.
    fn deviation(&self, cyl: &ParabolicCylinder) -> f64 {
        let grid = self.traj.grid();
        let radius = 2.0 * cyl.radius;
        let ones = vec![1.0; grid.nodes()];
        let vol = grid.offcenter_ball_integral_unchecked(&ones, cyl.rho0, radius);
        let per_slice: Vec<f64> = self
            .traj
            .slices()
            .iter()
            .map(|s| {
                let modsq: Vec<f64> = (0..grid.nodes()).map(|i| s.modulus_sq(i)).collect();
                let total = grid.offcenter_ball_integral_unchecked(&modsq, cyl.rho0, radius);
                let mean_z = grid.offcenter_ball_integral_unchecked(&s.zeta, cyl.rho0, radius) / vol;
                let mean_g = grid.offcenter_axial_moment(&s.g, cyl.rho0, radius) / vol;
                (total - vol * (mean_g * mean_g + mean_z * mean_z)).max(0.0)
            })
            .collect();
        let r2 = radius * radius;
        window_integral(&self.times, &per_slice, cyl.t0 - r2, cyl.t0 + r2)
    }
}

pub fn local_energy_ratio(traj: &Trajectory, cyl: &ParabolicCylinder) -> Result<LocalEnergyReport> {
    let data = CylinderData::new(traj, cyl)?;
    let grid = traj.grid();
    let (a, b) = cyl.window();
    let kinetic: Vec<f64> = time_derivatives(traj.slices())
        .iter()
        .map(|(dg, dz)| {
            let sq: Vec<f64> = dg.iter().zip(dz).map(|(x, y)| x * x + y * y).collect();
            grid.offcenter_ball_integral_unchecked(&sq, cyl.rho0, cyl.radius)
        })
        .collect();
    let kinetic = window_integral(&data.times, &kinetic, a, b);
    let ball = data.ball_series(&data.densities, cyl.rho0, cyl.radius);
    let sup = data
        .times
        .iter()
        .zip(&ball)
        .filter(|(t, _)| **t >= a && **t <= b)
        .map(|(_, v)| *v)
        .fold(0.0, f64::max);
    let lhs = kinetic + sup;
    let rhs_core = data.energy(cyl, 2.0 * cyl.radius) / (cyl.radius * cyl.radius);
    Ok(LocalEnergyReport {
        lhs,
        rhs_core,
        ratio: ratio(lhs, rhs_core),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReversePoincareReport {
    /// `R^{d+2} (1/R^d) int_{P_R} e`.
    pub lhs: f64,
    /// `int_{P_{2R}} |u - a(t)|^2`.
    pub rhs: f64,
    pub ratio: Option<f64>,
}

pub fn reverse_poincare_ratio(traj: &Trajectory, cyl: &ParabolicCylinder) -> Result<ReversePoincareReport> {
    let data = CylinderData::new(traj, cyl)?;
    let lhs = cyl.radius * cyl.radius * data.energy(cyl, cyl.radius);
    let rhs = data.deviation(cyl);
    Ok(ReversePoincareReport {
        lhs,
        rhs,
        ratio: ratio(lhs, rhs),
    })
}

/// `max(0, int_{P_R} e - eps0 int_{P_{2R}} e) R^2 / int_{P_{2R}} |u - a|^2`.
pub fn hybrid_ratio(traj: &Trajectory, cyl: &ParabolicCylinder, eps0: f64) -> Result<f64> {
    if !(eps0 > 0.0 && eps0 < 1.0) {
        return Err(GlhfError::InvalidParameter(format!(
            "eps0 must lie in (0, 1), got {eps0}"
        )));
    }
    let data = CylinderData::new(traj, cyl)?;
    let inner = data.energy(cyl, cyl.radius);
    let outer = data.energy(cyl, 2.0 * cyl.radius);
    let excess = (inner - eps0 * outer).max(0.0);
    if excess == 0.0 {
        return Ok(0.0);
    }
    let dev = data.deviation(cyl);
    if dev <= 0.0 {
        return Err(GlhfError::Degenerate(format!(
            "u is spatially constant on P_2R(z0) (t0 = {}, rho0 = {}, R = {}) yet carries energy",
            cyl.t0, cyl.rho0, cyl.radius
        )));
    }
    Ok(excess * cyl.radius * cyl.radius / dev)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SingularReport {
    pub eps0: f64,
    /// Ladder, strictly decreasing.
    pub radii: Vec<f64>,
    /// Probe centres `(t0, rho0)`.
    pub centers: Vec<(f64, f64)>,
    /// `profiles[c][k]`: density of centre `c` at `radii[k]`.
    pub profiles: Vec<Vec<f64>>,
    pub flagged: Vec<bool>,
    /// Ambient-space box counts `N(R)` per ladder radius.
    pub box_counts: Vec<usize>,
    /// Least-squares slope of `log N` against `log(1/R)`; `None` when nothing is flagged.
    pub slope: Option<f64>,
}

impl SingularReport {
    pub fn flagged_centers(&self) -> Vec<(f64, f64)> {
        self.centers
            .iter()
            .zip(&self.flagged)
            .filter(|(_, f)| **f)
            .map(|(c, _)| *c)
            .collect()
    }

    /// Human-readable slope, `"empty"` when nothing is flagged.
    pub fn slope_label(&self) -> String {
        match self.slope {
            Some(s) => format!("{s}"),
            None => "empty".into(),
        }
    }
}

/// Cover of a flagged set in reduced `(t, rho)` coordinates by parabolic
/// boxes of time extent `R^2` and radial extent `R`, counted in the ambient
/// space: a box starting at `rho > 0` stands for a `(d-1)`-sphere and counts
/// `ceil(2^{d-1} max(1, (rho/R)^{d-1}))` times.
pub fn box_count(points: &[(f64, f64)], radius: f64, dim: usize) -> usize {
    if points.is_empty() {
        return 0;
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    let span = radius * radius;
    let c_d = 2f64.powi(dim as i32 - 1);
    let mut total = 0usize;
    let mut start = 0;
    while start < pts.len() {
        let rho_lo = pts[start].1;
        let mut end = start;
        while end < pts.len() && pts[end].1 < rho_lo + radius {
            end += 1;
        }
        let mut band: Vec<f64> = pts[start..end].iter().map(|p| p.0).collect();
        band.sort_by(f64::total_cmp);
        let mut intervals = 0usize;
        let mut covered_to = f64::NEG_INFINITY;
        for t in band {
            if t >= covered_to {
                intervals += 1;
                covered_to = t + span;
            }
        }
        let mult = if rho_lo > 0.0 {
            (c_d * (rho_lo / radius).powi(dim as i32 - 1).max(1.0)).ceil() as usize
        } else {
            1
        };
        total += intervals * mult;
        start = end;
    }
    total
}

/// Least-squares slope of `log N` against `log(1/R)` over radii with `N > 0`.
pub fn dimension_slope(radii: &[f64], counts: &[usize]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(counts)
        .filter(|(_, n)| **n > 0)
        .map(|(r, n)| ((1.0 / r).ln(), (*n as f64).ln()))
        .collect();
    if pts.is_empty() {
        return None;
    }
    if pts.len() == 1 {
        return Some(0.0);
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Some(0.0);
    }
    Some(sxy / sxx)
}

/// Singular-set scan over a density series.
pub fn singular_scan_series(
    grid: &RadialGrid,
    series: &DensitySeries,
    eps0: f64,
    ladder: &[f64],
    centers: &[(f64, f64)],
) -> Result<SingularReport> {
    if ladder.is_empty() {
        return Err(GlhfError::InvalidParameter("singular scan needs a non-empty R ladder".into()));
    }
    if ladder.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(GlhfError::InvalidParameter(
            "singular-scan ladder must decrease strictly".into(),
        ));
    }
    let r_min = *ladder.last().expect("non-empty");
    if r_min < 4.0 * grid.h() * (1.0 - 1e-12) {
        return Err(GlhfError::Precondition(format!(
            "smallest ladder radius {r_min} is below 4 grid cells ({})",
            4.0 * grid.h()
        )));
    }
    if !(eps0 > 0.0) {
        return Err(GlhfError::InvalidParameter(format!("eps0 must be positive, got {eps0}")));
    }
    need_two_slices(&series.times)?;
    check_stride(&series.times, r_min)?;
    let horizon = series.horizon();
    for &(t0, rho0) in centers {
        for &r in ladder {
            ParabolicCylinder::new(t0, rho0, r)?.check_contained(horizon, grid.dim())?;
        }
    }

    // ball integrals depend only on (rho0, R): compute each series once
    let mut rhos: Vec<f64> = centers.iter().map(|c| c.1).collect();
    rhos.sort_by(f64::total_cmp);
    rhos.dedup();
    let ball: Vec<Vec<Vec<f64>>> = rhos
        .iter()
        .map(|&rho| {
            ladder
                .iter()
                .map(|&r| {
                    series
                        .values
                        .iter()
                        .map(|v| grid.offcenter_ball_integral_unchecked(v, rho, r))
                        .collect()
                })
                .collect()
        })
        .collect();

    let dim = grid.dim() as i32;
    let mut profiles = Vec::with_capacity(centers.len());
    let mut flagged = Vec::with_capacity(centers.len());
    for &(t0, rho0) in centers {
        let ri = rhos.iter().position(|&r| r == rho0).expect("collected above");
        let prof: Vec<f64> = ladder
            .iter()
            .enumerate()
            .map(|(k, &r)| {
                let r2 = r * r;
                window_integral(&series.times, &ball[ri][k], t0 - r2, t0 + r2) / r.powi(dim)
            })
            .collect();
        flagged.push(prof.iter().all(|&v| v >= eps0));
        profiles.push(prof);
    }
    let points: Vec<(f64, f64)> = centers
        .iter()
        .zip(&flagged)
        .filter(|(_, f)| **f)
        .map(|(c, _)| *c)
        .collect();
    let box_counts: Vec<usize> = ladder.iter().map(|&r| box_count(&points, r, grid.dim())).collect();
    let slope = dimension_slope(ladder, &box_counts);
    Ok(SingularReport {
        eps0,
        radii: ladder.to_vec(),
        centers: centers.to_vec(),
        profiles,
        flagged,
        box_counts,
        slope,
    })
}

pub fn singular_scan(
    traj: &Trajectory,
    eps0: f64,
    ladder: &[f64],
    centers: &[(f64, f64)],
) -> Result<SingularReport> {
    singular_scan_series(traj.grid(), &DensitySeries::from_trajectory(traj)?, eps0, ladder, centers)
}

/// A probe as configured: one centre and an increasing ladder of radii.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSpec {
    pub t0: f64,
    pub rho0: f64,
    pub radii: Vec<f64>,
}

impl ProbeSpec {
    pub fn new(t0: f64, rho0: f64, radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(GlhfError::InvalidParameter("probe needs at least one radius".into()));
        }
        if radii.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(GlhfError::InvalidParameter(
                "probe radii must increase strictly".into(),
            ));
        }
        for &r in &radii {
            ParabolicCylinder::new(t0, rho0, r)?;
        }
        Ok(ProbeSpec { t0, rho0, radii })
    }

    /// Checks what every probe row needs: `P_R` containment for all radii and the
    /// checkpoint spacing bound for the smallest one.
    pub fn validate(&self, horizon: f64, dim: usize, checkpoint_spacing: f64) -> Result<()> {
        for &r in &self.radii {
            ParabolicCylinder::new(self.t0, self.rho0, r)?.check_contained(horizon, dim)?;
        }
        let limit = self.radii[0].powi(2) / SLICES_PER_WINDOW;
        if checkpoint_spacing > limit * (1.0 + 1e-9) {
            return Err(GlhfError::Precondition(format!(
                "checkpoint spacing {checkpoint_spacing} exceeds R_min^2 / 8 = {limit} for probe at t0 = {}",
                self.t0
            )));
        }
        Ok(())
    }
}

/// One row of the probe table; inapplicable measurements are NaN.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeRow {
    pub probe_id: usize,
    pub t0: f64,
    pub rho0: f64,
    pub radius: f64,
    pub density: f64,
    pub scaled_energy: f64,
    pub defect_prev: f64,
    pub lei_lhs: f64,
    pub lei_rhs: f64,
    pub rpi_lhs: f64,
    pub rpi_rhs: f64,
    pub hybrid_c: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    pub spec: ProbeSpec,
    pub rows: Vec<ProbeRow>,
}

fn or_nan<T>(r: Result<T>, f: impl FnOnce(T) -> f64) -> Result<f64> {
    match r {
        Ok(v) => Ok(f(v)),
        Err(GlhfError::Precondition(_)) => Ok(f64::NAN),
        Err(e) => Err(e),
    }
}

/// Evaluates every probe quantity of `spec` on `traj`. Quantities whose own
/// geometric preconditions fail (backward window, `P_{2R}` containment,
/// off-axis defects) are reported as NaN; `P_R` containment is mandatory.
pub fn evaluate_probe(traj: &Trajectory, probe_id: usize, spec: &ProbeSpec, eps0: Option<f64>) -> Result<ProbeReport> {
    let dim = traj.grid().dim();
    spec.validate(traj.last().t, dim, traj.max_checkpoint_spacing())?;
    let mut rows = Vec::with_capacity(spec.radii.len());
    for (k, &r) in spec.radii.iter().enumerate() {
        let cyl = ParabolicCylinder::new(spec.t0, spec.rho0, r)?;
        let density = density(traj, &cyl)?;
        let scaled = or_nan(scaled_energy(traj, &cyl), |v| v)?;
        let defect_prev = if k > 0 && cyl.is_on_axis() {
            or_nan(flow_defect(traj, &cyl, spec.radii[k - 1], r), |v| v)?
        } else {
            f64::NAN
        };
        let (lei_lhs, lei_rhs) = match local_energy_ratio(traj, &cyl) {
            Ok(l) => (l.lhs, l.rhs_core),
            Err(GlhfError::Precondition(_)) => (f64::NAN, f64::NAN),
            Err(e) => return Err(e),
        };
        let (rpi_lhs, rpi_rhs) = match reverse_poincare_ratio(traj, &cyl) {
            Ok(l) => (l.lhs, l.rhs),
            Err(GlhfError::Precondition(_)) => (f64::NAN, f64::NAN),
            Err(e) => return Err(e),
        };
        let hybrid_c = match eps0 {
            Some(e) => or_nan(hybrid_ratio(traj, &cyl, e), |v| v)?,
            None => f64::NAN,
        };
        rows.push(ProbeRow {
            probe_id,
            t0: spec.t0,
            rho0: spec.rho0,
            radius: r,
            density,
            scaled_energy: scaled,
            defect_prev,
            lei_lhs,
            lei_rhs,
            rpi_lhs,
            rpi_rhs,
            hybrid_c,
        });
    }
    Ok(ProbeReport { spec: spec.clone(), rows })
}

/// Trapezoid on `(t, value)` pairs, re-exported for callers assembling their own series.
pub fn time_integral(times: &[f64], values: &[f64]) -> f64 {
    trapezoid(times, values)
}
