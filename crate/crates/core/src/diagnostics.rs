//! Whole-ball, whole-interval checks on a completed trajectory.
//!
//! Every check returns measured quantities; thresholds belong to callers.

use crate::error::{GlhfError, Result};
use crate::grid::CorotationalField;
use crate::scheme::SchemeParams;
use crate::solver::Trajectory;

/// Tolerance used to match requested times against checkpoint times.
const TIME_MATCH: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LedgerRow {
    pub t: f64,
    pub e_dir: f64,
    pub e_pen: f64,
    pub e_total: f64,
    /// Accumulator columns are NaN when the trajectory carries no history.
    pub kinetic: f64,
    pub chi_dissipation: f64,
    /// `sup (1 - |u|^2)` over nodes.
    pub constraint_sup: f64,
    pub penalty_integral: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyLedger {
    pub rows: Vec<LedgerRow>,
}

impl EnergyLedger {
    pub fn has_accumulators(&self) -> bool {
        self.rows.iter().all(|r| r.kinetic.is_finite())
    }

    fn row_at(&self, t: f64) -> Result<&LedgerRow> {
        self.rows
            .iter()
            .find(|r| (r.t - t).abs() <= TIME_MATCH * t.abs().max(1.0))
            .ok_or_else(|| GlhfError::InvalidParameter(format!("t = {t} is not a checkpoint time")))
    }

    /// Largest relative increase `(E(t_{k+1}) - E(t_k)) / E(0)` between
    /// consecutive rows; nonpositive when the total energy is nonincreasing.
    pub fn worst_energy_increase(&self) -> f64 {
        let scale = self.rows.first().map_or(0.0, |r| r.e_total);
        let worst = self
            .rows
            .windows(2)
            .map(|w| w[1].e_total - w[0].e_total)
            .fold(f64::NEG_INFINITY, f64::max);
        if !worst.is_finite() {
            return 0.0;
        }
        if scale > 0.0 {
            worst / scale
        } else {
            worst
        }
    }
}

fn constraint_sup(f: &CorotationalField) -> f64 {
    (0..f.nodes())
        .map(|i| 1.0 - f.modulus_sq(i))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn build_ledger(traj: &Trajectory) -> Result<EnergyLedger> {
    let grid = traj.grid();
    let p = traj.params();
    let history = traj.history();
    let mut rows = Vec::with_capacity(traj.slices().len());
    for (k, s) in traj.slices().iter().enumerate() {
        let e_dir = grid.dirichlet_energy(s);
        let e_pen = grid.penalty_energy(s, p)?;
        let (kinetic, chi_dissipation, penalty_integral) = match history {
            Some(h) => (h[k].kinetic, h[k].chi_dissipation, h[k].penalty_integral),
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        rows.push(LedgerRow {
            t: s.t,
            e_dir,
            e_pen,
            e_total: e_dir + e_pen,
            kinetic,
            chi_dissipation,
            constraint_sup: constraint_sup(s),
            penalty_integral,
        });
    }
    Ok(EnergyLedger { rows })
}

/// `kinetic|_{t1}^{t2} + E(t2) + chi_dissipation|_{t1}^{t2} - E(t1)`; zero for
/// the continuum flow.
pub fn check_energy_identity(ledger: &EnergyLedger, t1: f64, t2: f64) -> Result<f64> {
    if t1 > t2 {
        return Err(GlhfError::InvalidParameter(format!(
            "energy identity needs t1 <= t2, got {t1} > {t2}"
        )));
    }
    let (a, b) = (ledger.row_at(t1)?, ledger.row_at(t2)?);
    if !(a.kinetic.is_finite() && b.kinetic.is_finite()) {
        return Err(GlhfError::Precondition(
            "energy identity needs the accumulators of a live run".into(),
        ));
    }
    Ok((b.kinetic - a.kinetic) + b.e_total + (b.chi_dissipation - a.chi_dissipation) - a.e_total)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenaltyBound {
    /// `int_Q Lambda chi((|u|^2-1)^2)`.
    pub penalty: f64,
    /// `4 pi (1 + T^2) E(0)`.
    pub c_derived: f64,
    /// `P log(lambda) / C_derived`; zero when `C_derived` is zero.
    pub margin: f64,
}

/// The energy identity with `kappa' >= 1/(pi (1 + T^2))` forces
/// `P log(lambda) <= 4 pi (1 + T^2) E(0)`.
pub fn penalty_bound_check(ledger: &EnergyLedger, p: &SchemeParams) -> Result<PenaltyBound> {
    let first = ledger
        .rows
        .first()
        .ok_or_else(|| GlhfError::InvalidParameter("empty ledger".into()))?;
    let last = ledger.rows.last().expect("non-empty");
    if !last.penalty_integral.is_finite() {
        return Err(GlhfError::Precondition(
            "penalty bound needs the accumulators of a live run".into(),
        ));
    }
    let t = p.horizon();
    let c_derived = 4.0 * std::f64::consts::PI * (1.0 + t * t) * first.e_total;
    let penalty = last.penalty_integral;
    let margin = if c_derived > 0.0 {
        penalty * p.log_lambda() / c_derived
    } else {
        0.0
    };
    Ok(PenaltyBound {
        penalty,
        c_derived,
        margin,
    })
}

fn require_constant_boundary(traj: &Trajectory, what: &str) -> Result<()> {
    if !traj.initial().has_constant_boundary() {
        return Err(GlhfError::Precondition(format!(
            "{what} requires a datum with constant boundary values (g(1) = 0); \
             this datum has g(1) = {}",
            traj.initial().g.last().copied().unwrap_or(f64::NAN)
        )));
    }
    Ok(())
}

/// Weighted energy `e^{(d-2)t} int e_lambda (|x|^2 + 1)` at every checkpoint.
pub fn weighted_energy_series(traj: &Trajectory) -> Result<Vec<(f64, f64)>> {
    let grid = traj.grid();
    let p = traj.params();
    let d = p.dim() as f64;
    let weight: Vec<f64> = (0..grid.nodes()).map(|i| grid.r(i).powi(2) + 1.0).collect();
    traj.slices()
        .iter()
        .map(|s| {
            let e = grid.gl_energy_density(s, p)?;
            let w: Vec<f64> = e.iter().zip(&weight).map(|(a, b)| a * b).collect();
            Ok((s.t, ((d - 2.0) * s.t).exp() * grid.integrate(&w)))
        })
        .collect()
}

/// `max_t (Q(t) - Q(0)) / Q(0)` for the weighted energy `Q`.
pub fn energy_decay_check(traj: &Trajectory) -> Result<f64> {
    require_constant_boundary(traj, "the weighted energy decay check")?;
    let q = weighted_energy_series(traj)?;
    let q0 = q[0].1;
    let worst = q[1..].iter().map(|(_, v)| v - q0).fold(f64::NEG_INFINITY, f64::max);
    if !worst.is_finite() {
        return Ok(0.0);
    }
    if q0 > 0.0 {
        Ok(worst / q0)
    } else if worst > 0.0 {
        Err(GlhfError::Degenerate(
            "weighted energy grew from zero initial energy".into(),
        ))
    } else {
        Ok(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pokhojaev {
    /// `int_0^T int_{dB} |du/d|x||^2`.
    pub lhs: f64,
    /// `T int_{dB} |grad_tau u_0|^2 + 1/2 int |grad u_0|^2 (|x|^2 + 1)`.
    pub rhs: f64,
}

impl Pokhojaev {
    /// `max(0, lhs/rhs - 1)`; zero when both sides vanish.
    pub fn excess(&self) -> f64 {
        if self.rhs > 0.0 {
            (self.lhs / self.rhs - 1.0).max(0.0)
        } else if self.lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

pub fn pokhojaev_check(traj: &Trajectory) -> Result<Pokhojaev> {
    let grid = traj.grid();
    let times = traj.times();
    let normal: Vec<f64> = traj
        .slices()
        .iter()
        .map(|s| grid.boundary_flux_terms(s).0)
        .collect();
    let lhs = trapezoid(&times, &normal);
    let u0 = traj.initial();
    let (_, tangential) = grid.boundary_flux_terms(u0);
    let dens = grid.gradient_density(u0);
    let weighted: Vec<f64> = dens
        .iter()
        .enumerate()
        .map(|(i, v)| v * (grid.r(i).powi(2) + 1.0))
        .collect();
    let rhs = traj.params().horizon() * tangential + 0.5 * grid.integrate(&weighted);
    Ok(Pokhojaev { lhs, rhs })
}

/// `max_t (int|grad u(t)|^2 - 2 e^{-(d-2)t} int|grad u_0|^2) / int|grad u_0|^2`.
pub fn longtime_decay_check(traj: &Trajectory) -> Result<f64> {
    let d = traj.params().dim();
    if d < 3 {
        return Err(GlhfError::Precondition(format!(
            "long-time decay needs d >= 3, got d = {d}"
        )));
    }
    require_constant_boundary(traj, "the long-time decay check")?;
    let grid = traj.grid();
    let g0 = 2.0 * grid.dirichlet_energy(traj.initial());
    let mut worst = f64::NEG_INFINITY;
    for s in traj.slices() {
        let gt = 2.0 * grid.dirichlet_energy(s);
        worst = worst.max(gt - 2.0 * (-((d - 2) as f64) * s.t).exp() * g0);
    }
    if g0 > 0.0 {
        Ok(worst / g0)
    } else if worst > 0.0 {
        Err(GlhfError::Degenerate(
            "Dirichlet energy grew from a constant datum".into(),
        ))
    } else {
        Ok(0.0)
    }
}

/// Discrete wedge residual `sqrt(sum_k w_k int ((D_t g - L g) zeta - (D_t zeta - L_0 zeta) g)^2)`
/// over interior checkpoints, with centred time differences and dual-cell weights `w_k`.
pub fn wedge_residual(traj: &Trajectory) -> Result<f64> {
    let slices = traj.slices();
    if slices.len() < 3 {
        return Err(GlhfError::Precondition(format!(
            "wedge residual needs at least 3 checkpoints, got {}",
            slices.len()
        )));
    }
    let grid = traj.grid();
    let mut total = 0.0;
    let mut w2 = vec![0.0; grid.nodes()];
    for k in 1..slices.len() - 1 {
        let (prev, cur, next) = (&slices[k - 1], &slices[k], &slices[k + 1]);
        let span = next.t - prev.t;
        let (lg, lz) = grid.apply_operators(cur);
        for i in 0..grid.nodes() {
            let dg = (next.g[i] - prev.g[i]) / span;
            let dz = (next.zeta[i] - prev.zeta[i]) / span;
            let w = (dg - lg[i]) * cur.zeta[i] - (dz - lz[i]) * cur.g[i];
            w2[i] = w * w;
        }
        total += 0.5 * span * grid.integrate(&w2);
    }
    Ok(total.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintViolation {
    /// `sup_Q (1 - |u|^2)` over checkpoints.
    pub sup: f64,
    /// `||1 - |u|^2||_{L^2(Q)}`, trapezoidal in time.
    pub l2: f64,
}

pub fn constraint_violation(traj: &Trajectory) -> ConstraintViolation {
    let grid = traj.grid();
    let mut sup = f64::NEG_INFINITY;
    let mut sq = Vec::with_capacity(traj.slices().len());
    let mut dev = vec![0.0; grid.nodes()];
    for s in traj.slices() {
        sup = sup.max(constraint_sup(s));
        for (i, d) in dev.iter_mut().enumerate() {
            let v = 1.0 - s.modulus_sq(i);
            *d = v * v;
        }
        sq.push(grid.integrate(&dev));
    }
    ConstraintViolation {
        sup,
        l2: trapezoid(&traj.times(), &sq).sqrt(),
    }
}

/// `||u_A - u_B||_{L^2(Q(T))}`, trapezoidal over the shared checkpoints.
pub fn compare_l2(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(GlhfError::InvalidParameter(
            "compare_l2 needs trajectories on the same grid".into(),
        ));
    }
    let (ta, tb) = (a.times(), b.times());
    if ta.len() != tb.len()
        || ta
            .iter()
            .zip(&tb)
            .any(|(x, y)| (x - y).abs() > TIME_MATCH * x.abs().max(1.0))
    {
        return Err(GlhfError::InvalidParameter(
            "compare_l2 needs identical checkpoint times".into(),
        ));
    }
    let grid = a.grid();
    let mut diff = vec![0.0; grid.nodes()];
    let per_slice: Vec<f64> = a
        .slices()
        .iter()
        .zip(b.slices())
        .map(|(sa, sb)| {
            for (i, d) in diff.iter_mut().enumerate() {
                let dg = sa.g[i] - sb.g[i];
                let dz = sa.zeta[i] - sb.zeta[i];
                *d = dg * dg + dz * dz;
            }
            grid.integrate(&diff)
        })
        .collect();
    Ok(trapezoid(&ta, &per_slice).sqrt())
}

/// Trapezoidal rule on an arbitrary increasing abscissa.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}
