//! CSV tables of ledgers, probes and sweeps. Inapplicable values are `NaN`.

use std::io::Write;
use std::path::Path;

use crate::diagnostics::EnergyLedger;
use crate::error::{GlhfError, Result};
use crate::harness::SweepReport;
use crate::probes::ProbeReport;

pub const LEDGER_HEADER: [&str; 8] = [
    "t",
    "E_dir",
    "E_pen",
    "E_total",
    "kinetic_accum",
    "chi_dissipation_accum",
    "constraint_sup",
    "penalty_integral_accum",
];

pub const PROBE_HEADER: [&str; 12] = [
    "probe_id",
    "t0",
    "rho0",
    "R",
    "density",
    "scaled_energy",
    "defect_prev",
    "lei_lhs",
    "lei_rhs",
    "rpi_lhs",
    "rpi_rhs",
    "hybrid_C",
];

pub const SWEEP_HEADER: [&str; 8] = [
    "lambda",
    "P",
    "P_times_loglambda",
    "constraint_sup",
    "constraint_L2",
    "wedge_residual",
    "E_final",
    "gap_to_prev",
];

fn table<W: Write>(out: W, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(|e| GlhfError::Csv(e.into()))?;
    Ok(())
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

pub fn write_ledger<W: Write>(ledger: &EnergyLedger, out: W) -> Result<()> {
    table(
        out,
        &LEDGER_HEADER,
        ledger.rows.iter().map(|r| {
            [
                r.t,
                r.e_dir,
                r.e_pen,
                r.e_total,
                r.kinetic,
                r.chi_dissipation,
                r.constraint_sup,
                r.penalty_integral,
            ]
            .map(num)
            .to_vec()
        }),
    )
}

pub fn write_probes<W: Write>(reports: &[ProbeReport], out: W) -> Result<()> {
    table(
        out,
        &PROBE_HEADER,
        reports.iter().flat_map(|rep| rep.rows.iter()).map(|r| {
            let mut row = vec![r.probe_id.to_string()];
            row.extend(
                [
                    r.t0,
                    r.rho0,
                    r.radius,
                    r.density,
                    r.scaled_energy,
                    r.defect_prev,
                    r.lei_lhs,
                    r.lei_rhs,
                    r.rpi_lhs,
                    r.rpi_rhs,
                    r.hybrid_c,
                ]
                .map(num),
            );
            row
        }),
    )
}

pub fn write_sweep<W: Write>(report: &SweepReport, out: W) -> Result<()> {
    table(
        out,
        &SWEEP_HEADER,
        report.members.iter().map(|m| {
            [
                m.lambda,
                m.penalty,
                m.penalty_log_lambda,
                m.constraint.sup,
                m.constraint.l2,
                m.wedge,
                m.e_final,
                m.gap_to_prev,
            ]
            .map(num)
            .to_vec()
        }),
    )
}

/// Plain-text companion of the sweep table: shared discretization, fits and
/// ladder-maximum densities.
pub fn write_sweep_summary<W: Write>(report: &SweepReport, mut out: W) -> Result<()> {
    let io = |e| GlhfError::io("sweep summary", e);
    writeln!(out, "members share dt = {:e} and T = {:e}", report.dt, report.horizon).map_err(io)?;
    writeln!(out, "lambda ladder = {:?}", report.lambdas()).map_err(io)?;
    writeln!(out, "C_hat = {:e}", report.c_hat).map_err(io)?;
    writeln!(out, "C_derived = {:e}", report.c_derived).map_err(io)?;
    for l in &report.limsup {
        writeln!(
            out,
            "limsup density probe {} (t0 = {:e}, rho0 = {:e}, R = {:e}) = {:e}",
            l.probe_id, l.cylinder.t0, l.cylinder.rho0, l.cylinder.radius, l.density
        )
        .map_err(io)?;
    }
    Ok(())
}

/// Writes a whole file from an in-memory rendering.
pub fn write_file(path: &Path, render: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    render(&mut buf)?;
    std::fs::write(path, buf).map_err(|e| GlhfError::io(path, e))
}
