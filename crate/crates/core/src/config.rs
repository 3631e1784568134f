//! Run configuration: a flat `key = value` file with `#` comments.
//!
//! Probes are repeated `probe = t0, rho0, R1, R2, ...` lines. Every value is
//! checked against the preconditions of the solver and probes at load time,
//! and failures name the offending line.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{GlhfError, Result};
use crate::grid::{InitialDatum, RadialGrid};
use crate::probes::ProbeSpec;
use crate::scheme::SchemeParams;
use crate::solver::{run, Scheme, StepperConfig, Trajectory, DEFAULT_NEWTON_TOL};

pub const DEFAULT_OUTPUT_DIR: &str = "glhf-out";

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dim: usize,
    /// One value for `run`, a strictly increasing ladder for `sweep`.
    pub lambdas: Vec<f64>,
    pub horizon: f64,
    pub dt: f64,
    pub n_cells: usize,
    pub checkpoint_stride: usize,
    pub scheme: Scheme,
    pub initial: InitialDatum,
    pub probes: Vec<ProbeSpec>,
    pub eps0: Option<f64>,
    pub output_dir: PathBuf,
    pub newton_tol: f64,
}

const KEYS: [&str; 12] = [
    "d",
    "lambda",
    "T",
    "dt",
    "n_cells",
    "checkpoint_stride",
    "scheme",
    "initial",
    "probe",
    "eps0",
    "output_dir",
    "newton_tol",
];

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| GlhfError::io(path, e))?;
        RunConfig::parse(&text, path)
    }

    /// Parses and validates; relative `custom` datum paths resolve against the
    /// directory of `path`.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| GlhfError::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut single: HashMap<&str, (usize, String)> = HashMap::new();
        let mut probe_lines: Vec<(usize, String)> = Vec::new();
        let mut last_line = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            last_line = line_no;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(line_no, format!("expected `key = value`, found `{line}`")))?;
            let (key, value) = (key.trim(), value.trim().to_string());
            let key = KEYS
                .iter()
                .copied()
                .find(|k| *k == key)
                .ok_or_else(|| err(line_no, format!("unknown key `{key}`")))?;
            if key == "probe" {
                probe_lines.push((line_no, value));
            } else if let Some((first, _)) = single.insert(key, (line_no, value)) {
                return Err(err(line_no, format!("duplicate key `{key}` (first set on line {first})")));
            }
        }
        let wrap = |line: usize| move |e: GlhfError| match e {
            GlhfError::Parse { .. } => e,
            other => err(line, other.to_string()),
        };
        let required = |key: &str| {
            single
                .get(key)
                .map(|(l, v)| (*l, v.as_str()))
                .ok_or_else(|| err(last_line.max(1), format!("missing required key `{key}`")))
        };
        fn number<T: std::str::FromStr>(line: usize, key: &str, v: &str, path: &Path) -> Result<T> {
            v.parse::<T>().map_err(|_| GlhfError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("`{key}`: cannot parse `{v}`"),
            })
        }

        let (d_line, v) = required("d")?;
        let dim: usize = number(d_line, "d", v, path)?;
        let (lambda_line, v) = required("lambda")?;
        let lambdas = v
            .split(',')
            .map(|s| number::<f64>(lambda_line, "lambda", s.trim(), path))
            .collect::<Result<Vec<_>>>()?;
        if lambdas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(err(lambda_line, "lambda ladder must increase strictly".into()));
        }
        let (t_line, v) = required("T")?;
        let horizon: f64 = number(t_line, "T", v, path)?;
        let (dt_line, v) = required("dt")?;
        let dt: f64 = number(dt_line, "dt", v, path)?;
        let (n_line, v) = required("n_cells")?;
        let n_cells: usize = number(n_line, "n_cells", v, path)?;
        let (stride_line, checkpoint_stride) = match single.get("checkpoint_stride") {
            Some((l, v)) => (*l, number(*l, "checkpoint_stride", v, path)?),
            None => (0, 1),
        };
        let scheme = match single.get("scheme") {
            Some((l, v)) => v.parse::<Scheme>().map_err(wrap(*l))?,
            None => Scheme::Strang,
        };
        let (init_line, v) = required("initial")?;
        let initial = parse_initial(v, path).map_err(wrap(init_line))?;
        let eps0 = match single.get("eps0") {
            Some((l, v)) => {
                let e: f64 = number(*l, "eps0", v, path)?;
                if !(e > 0.0 && e < 1.0) {
                    return Err(err(*l, format!("eps0 must lie in (0, 1), got {e}")));
                }
                Some(e)
            }
            None => None,
        };
        let output_dir = single
            .get("output_dir")
            .map_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR), |(_, v)| PathBuf::from(v));
        let newton_tol = match single.get("newton_tol") {
            Some((l, v)) => number(*l, "newton_tol", v, path)?,
            None => DEFAULT_NEWTON_TOL,
        };

        for &lambda in &lambdas {
            SchemeParams::new(lambda, horizon, dim).map_err(wrap(lambda_line))?;
        }
        if lambdas.is_empty() {
            return Err(err(lambda_line, "lambda needs at least one value".into()));
        }
        let grid = RadialGrid::new(n_cells, dim).map_err(wrap(n_line))?;
        let stepper = StepperConfig {
            dt,
            scheme,
            checkpoint_stride,
            newton_tol,
        };
        let culprit = if checkpoint_stride == 0 { stride_line } else { dt_line };
        stepper.step_count(horizon).map_err(wrap(culprit))?;

        let spacing = dt * checkpoint_stride as f64;
        let mut probes = Vec::with_capacity(probe_lines.len());
        for (line, v) in probe_lines {
            let nums = v
                .split(',')
                .map(|s| number::<f64>(line, "probe", s.trim(), path))
                .collect::<Result<Vec<_>>>()?;
            if nums.len() < 3 {
                return Err(err(line, "probe needs `t0, rho0, R1[, R2, ...]`".into()));
            }
            let spec = ProbeSpec::new(nums[0], nums[1], nums[2..].to_vec()).map_err(wrap(line))?;
            spec.validate(horizon, dim, spacing).map_err(wrap(line))?;
            probes.push(spec);
        }
        if let InitialDatum::Custom(p) = &initial {
            crate::grid::load_custom_datum(p, &grid).map_err(wrap(init_line))?;
        }

        Ok(RunConfig {
            dim,
            lambdas,
            horizon,
            dt,
            n_cells,
            checkpoint_stride,
            scheme,
            initial,
            probes,
            eps0,
            output_dir,
            newton_tol,
        })
    }

    pub fn stepper(&self) -> StepperConfig {
        StepperConfig {
            dt: self.dt,
            scheme: self.scheme,
            checkpoint_stride: self.checkpoint_stride,
            newton_tol: self.newton_tol,
        }
    }

    pub fn grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.n_cells, self.dim)
    }

    pub fn params(&self, lambda: f64) -> Result<SchemeParams> {
        SchemeParams::new(lambda, self.horizon, self.dim)
    }

    /// Integrates the flow for one penalty strength.
    pub fn run_member(&self, lambda: f64) -> Result<Trajectory> {
        let grid = self.grid()?;
        let initial = self.initial.field(&grid)?;
        run(&self.params(lambda)?, &grid, &self.stepper(), &initial)
    }
}

fn parse_initial(v: &str, config_path: &Path) -> Result<InitialDatum> {
    let mut parts = v.split_whitespace();
    let kind = parts.next().unwrap_or("");
    let rest: Vec<&str> = parts.collect();
    let datum = match (kind, rest.as_slice()) {
        ("equator", []) => InitialDatum::Equator,
        ("constant", []) => InitialDatum::Constant,
        ("bubble", [a]) => {
            let amplitude = a.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                GlhfError::InvalidParameter(format!("bubble amplitude `{a}` is not a finite number"))
            })?;
            InitialDatum::Bubble { amplitude }
        }
        ("custom", [p]) => {
            let p = Path::new(p);
            let resolved = if p.is_relative() {
                config_path.parent().unwrap_or(Path::new("")).join(p)
            } else {
                p.to_path_buf()
            };
            InitialDatum::Custom(resolved)
        }
        _ => {
            return Err(GlhfError::InvalidParameter(format!(
                "initial must be `equator`, `constant`, `bubble <A>` or `custom <path>`, got `{v}`"
            )))
        }
    };
    Ok(datum)
}
