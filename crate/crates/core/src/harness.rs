//! Penalty-strength sweeps and their cross-run analytics.
//!
//! Members share grid, `dt`, horizon and datum; only `lambda` varies. They
//! run concurrently and are reported in ladder order. The ladder is a fixed
//! finite list, so every quantity here is a trend, not a limit.

use std::sync::Arc;

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::diagnostics::{
    build_ledger, compare_l2, constraint_violation, penalty_bound_check, wedge_residual,
    ConstraintViolation,
};
use crate::error::{GlhfError, Result};
use crate::probes::{density, ParabolicCylinder};
use crate::solver::Trajectory;

#[derive(Clone, Debug)]
pub struct SweepMember {
    pub lambda: f64,
    pub trajectory: Arc<Trajectory>,
    /// `P(lambda) = int_Q Lambda chi`.
    pub penalty: f64,
    pub penalty_log_lambda: f64,
    pub constraint: ConstraintViolation,
    /// NaN with fewer than three checkpoints.
    pub wedge: f64,
    pub e_final: f64,
    /// `||u_{lambda_{i-1}} - u_{lambda_i}||_{L^2(Q)}`; NaN for the first member.
    pub gap_to_prev: f64,
}

/// Density of one probe radius, maximised over the ladder.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimsupDensity {
    pub probe_id: usize,
    pub cylinder: ParabolicCylinder,
    pub density: f64,
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub dt: f64,
    pub horizon: f64,
    pub members: Vec<SweepMember>,
    /// Least-squares slope of `P` against `1 / log lambda` through the origin.
    pub c_hat: f64,
    /// `4 pi (1 + T^2) E(0)`.
    pub c_derived: f64,
    pub limsup: Vec<LimsupDensity>,
}

impl SweepReport {
    pub fn lambdas(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.lambda).collect()
    }
}

fn member_error(lambda: f64, e: GlhfError) -> GlhfError {
    let numerical = e.is_numerical();
    let reason = format!("sweep member lambda = {lambda}: {e}");
    if numerical {
        GlhfError::Numerical { step: numerical_step(&e), reason }
    } else {
        GlhfError::InvalidParameter(reason)
    }
}

fn numerical_step(e: &GlhfError) -> usize {
    match e {
        GlhfError::Numerical { step, .. } => *step,
        _ => 0,
    }
}

/// Runs every `lambda` of the ladder with the rest of `base` fixed.
pub fn sweep(base: &RunConfig, lambdas: &[f64]) -> Result<SweepReport> {
    if lambdas.len() < 3 {
        return Err(GlhfError::InvalidParameter(format!(
            "a sweep needs at least 3 ladder members, got {}",
            lambdas.len()
        )));
    }
    if lambdas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(GlhfError::InvalidParameter(
            "sweep ladder must increase strictly".into(),
        ));
    }
    let runs: Vec<Result<Trajectory>> = lambdas
        .par_iter()
        .map(|&lambda| base.run_member(lambda))
        .collect();

    let mut trajectories = Vec::with_capacity(runs.len());
    for (&lambda, r) in lambdas.iter().zip(runs) {
        trajectories.push(Arc::new(r.map_err(|e| member_error(lambda, e))?));
    }

    let mut members: Vec<SweepMember> = Vec::with_capacity(lambdas.len());
    let mut c_derived = 0.0;
    for (&lambda, traj) in lambdas.iter().zip(&trajectories) {
        let mut summarize = || -> Result<SweepMember> {
            let ledger = build_ledger(traj)?;
            let bound = penalty_bound_check(&ledger, traj.params())?;
            c_derived = bound.c_derived;
            let wedge = match wedge_residual(traj) {
                Ok(w) => w,
                Err(GlhfError::Precondition(_)) => f64::NAN,
                Err(e) => return Err(e),
            };
            let gap_to_prev = match members.last() {
                Some(prev) => compare_l2(&prev.trajectory, traj)?,
                None => f64::NAN,
            };
            Ok(SweepMember {
                lambda,
                trajectory: Arc::clone(traj),
                penalty: bound.penalty,
                penalty_log_lambda: bound.penalty * traj.params().log_lambda(),
                constraint: constraint_violation(traj),
                wedge,
                e_final: ledger.rows.last().expect("non-empty").e_total,
                gap_to_prev,
            })
        };
        let m = summarize().map_err(|e| member_error(lambda, e))?;
        members.push(m);
    }

    let (num, den) = members.iter().fold((0.0, 0.0), |(n, d), m| {
        let x = 1.0 / m.lambda.ln();
        (n + m.penalty * x, d + x * x)
    });
    let c_hat = num / den;

    let mut limsup = Vec::new();
    for (id, spec) in base.probes.iter().enumerate() {
        for &r in &spec.radii {
            let cylinder = ParabolicCylinder::new(spec.t0, spec.rho0, r)?;
            limsup.push(LimsupDensity {
                probe_id: id,
                cylinder,
                density: limsup_density_of(&members, &cylinder)?,
            });
        }
    }

    Ok(SweepReport {
        dt: base.dt,
        horizon: base.horizon,
        members,
        c_hat,
        c_derived,
        limsup,
    })
}

/// Consecutive `L^2(Q)` gaps along the ladder.
pub fn cauchy_table(report: &SweepReport) -> Vec<f64> {
    report.members.iter().skip(1).map(|m| m.gap_to_prev).collect()
}

fn limsup_density_of(members: &[SweepMember], cyl: &ParabolicCylinder) -> Result<f64> {
    members
        .iter()
        .map(|m| density(&m.trajectory, cyl))
        .try_fold(f64::NEG_INFINITY, |acc, d| Ok(acc.max(d?)))
}

/// Ladder maximum of the cylinder density, standing in for the limsup in `lambda`.
pub fn limsup_density(report: &SweepReport, cyl: &ParabolicCylinder) -> Result<f64> {
    limsup_density_of(&report.members, cyl)
}
