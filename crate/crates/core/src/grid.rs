//! Radial discretization of the unit ball, the corotational field
//! `u(x) = (g(|x|) x/|x|, zeta(|x|))` and the spatial quadratures built on it.
//!
//! The Dirichlet energy is discretized cell by cell:
//!
//! ```text
//! E_h = 1/2 sum_c [ a_c ((g_{c+1}-g_c)^2 + (zeta_{c+1}-zeta_c)^2) + b_c (g_c^2 + g_{c+1}^2) ]
//! a_c = omega r_c^{d-1} / h,   b_c = omega (d-1) h r_c^{d-3} / 2,   r_c = (c + 1/2) h
//! ```
//!
//! i.e. radial derivatives are centred differences at cell midpoints and the
//! `(d-1) g^2 / r^2` term is evaluated at midpoints with `g^2` interpolated
//! linearly. The node masses `m_i` are exactly the weights of
//! [`RadialGrid::ball_integral`], so the stiffness `K = grad E_h` and the lumped
//! mass `M = diag(m)` give a semi-discrete flow `M u' = -K u - M f(u)` whose
//! energy identity holds exactly in the same quadrature the diagnostics use.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{GlhfError, Result};
use crate::scheme::{chi, SchemeParams};

pub const MIN_CELLS: usize = 16;

/// Surface area `2 pi^(d/2) / Gamma(d/2)` of the unit sphere in `R^d`.
pub fn unit_sphere_area(d: usize) -> f64 {
    // Gamma(d/2) by the recurrence Gamma(x + 1) = x Gamma(x)
    let (mut gamma, mut x) = if d % 2 == 0 { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    while x < d as f64 / 2.0 - 1e-12 {
        gamma *= x;
        x += 1.0;
    }
    2.0 * PI.powf(d as f64 / 2.0) / gamma
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid {
    n: usize,
    dim: usize,
    h: f64,
    omega: f64,
    mass: Vec<f64>,
    conductance: Vec<f64>,
    reaction: Vec<f64>,
}

impl RadialGrid {
    pub fn new(n: usize, dim: usize) -> Result<Self> {
        if n < MIN_CELLS {
            return Err(GlhfError::InvalidParameter(format!(
                "grid needs at least {MIN_CELLS} cells, got {n}"
            )));
        }
        if dim < 2 {
            return Err(GlhfError::InvalidParameter(format!(
                "dimension d must be >= 2, got {dim}"
            )));
        }
        let h = 1.0 / n as f64;
        let omega = unit_sphere_area(dim);
        let dm1 = (dim - 1) as i32;
        let mids: Vec<f64> = (0..n).map(|c| (c as f64 + 0.5) * h).collect();
        let conductance: Vec<f64> = mids.iter().map(|r| omega * r.powi(dm1) / h).collect();
        let reaction: Vec<f64> = mids
            .iter()
            .map(|r| omega * (dim - 1) as f64 * h * r.powi(dm1 - 2) / 2.0)
            .collect();
        let mut mass = vec![0.0; n + 1];
        for (c, r) in mids.iter().enumerate() {
            let half = 0.5 * omega * h * r.powi(dm1);
            mass[c] += half;
            mass[c + 1] += half;
        }
        Ok(RadialGrid {
            n,
            dim,
            h,
            omega,
            mass,
            conductance,
            reaction,
        })
    }

    pub fn cells(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> usize {
        self.n + 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `omega_{d-1}`, area of the unit sphere bounding the ball.
    pub fn omega(&self) -> f64 {
        self.omega
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        if i == self.n {
            1.0
        } else {
            i as f64 * self.h
        }
    }

    /// Quadrature weights of [`RadialGrid::ball_integral`] (lumped node masses).
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Per-cell `a_c` of the energy (flux conductance).
    pub fn conductance(&self) -> &[f64] {
        &self.conductance
    }

    /// Per-cell `b_c` of the energy (the `(d-1) g^2 / r^2` term).
    pub fn reaction(&self) -> &[f64] {
        &self.reaction
    }

    /// `omega * int_0^1 F(r) r^(d-1) dr` by the composite midpoint rule, midpoint
    /// values of `F` linearly interpolated.
    pub fn ball_integral(&self, values: &[f64]) -> Result<f64> {
        self.check_len(values)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GlhfError::InvalidParameter(format!(
                "ball integral: non-finite value at node {i}"
            )));
        }
        Ok(self.integrate(values))
    }

    /// Unchecked [`RadialGrid::ball_integral`].
    #[inline]
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.mass.iter().zip(values).map(|(m, v)| m * v).sum()
    }

    fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.nodes() {
            return Err(GlhfError::InvalidParameter(format!(
                "expected {} nodal values, got {}",
                self.nodes(),
                values.len()
            )));
        }
        Ok(())
    }

    /// `1/2 int |grad u|^2` of the discrete energy described in the module docs.
    pub fn dirichlet_energy(&self, f: &CorotationalField) -> f64 {
        let (g, z) = (&f.g, &f.zeta);
        let mut e = 0.0;
        for c in 0..self.n {
            let dg = g[c + 1] - g[c];
            let dz = z[c + 1] - z[c];
            e += self.conductance[c] * (dg * dg + dz * dz)
                + self.reaction[c] * (g[c] * g[c] + g[c + 1] * g[c + 1]);
        }
        0.5 * e
    }

    /// Nodal `|grad u|^2`, normalized so that its ball integral is twice
    /// [`RadialGrid::dirichlet_energy`].
    pub fn gradient_density(&self, f: &CorotationalField) -> Vec<f64> {
        let (g, z) = (&f.g, &f.zeta);
        let mut acc = vec![0.0; self.nodes()];
        for c in 0..self.n {
            let dg = g[c + 1] - g[c];
            let dz = z[c + 1] - z[c];
            let flux = 0.5 * self.conductance[c] * (dg * dg + dz * dz);
            acc[c] += flux + self.reaction[c] * g[c] * g[c];
            acc[c + 1] += flux + self.reaction[c] * g[c + 1] * g[c + 1];
        }
        for (a, m) in acc.iter_mut().zip(&self.mass) {
            *a /= m;
        }
        acc
    }

    /// Ginzburg-Landau energy density `1/2 |grad u|^2 + Lambda(t)/4 chi((|u|^2-1)^2)` at each node.
    pub fn gl_energy_density(&self, f: &CorotationalField, p: &SchemeParams) -> Result<Vec<f64>> {
        let coeff = p.penalty_coefficient(f.t)?;
        let mut e = self.gradient_density(f);
        for (i, ei) in e.iter_mut().enumerate() {
            let m = f.modulus_sq(i) - 1.0;
            *ei = 0.5 * *ei + 0.25 * coeff * chi(m * m);
        }
        Ok(e)
    }

    /// Penalty part `Lambda(t)/4 int chi((|u|^2-1)^2)` of the energy.
    pub fn penalty_energy(&self, f: &CorotationalField, p: &SchemeParams) -> Result<f64> {
        let coeff = p.penalty_coefficient(f.t)?;
        Ok(0.25 * coeff * self.chi_integral(f))
    }

    /// `int chi((|u|^2-1)^2)`.
    pub fn chi_integral(&self, f: &CorotationalField) -> f64 {
        (0..self.nodes())
            .map(|i| {
                let m = f.modulus_sq(i) - 1.0;
                self.mass[i] * chi(m * m)
            })
            .sum()
    }

    /// Nodal radial derivative: centred in the interior, one-sided second
    /// order at `r = 0` and `r = 1`.
    pub fn radial_derivative(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let inv2h = 0.5 / self.h;
        let mut out = vec![0.0; n + 1];
        out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) * inv2h;
        for i in 1..n {
            out[i] = (v[i + 1] - v[i - 1]) * inv2h;
        }
        out[n] = (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) * inv2h;
        out
    }

    /// Boundary terms `(int_{dB} |du/d|x||^2, int_{dB} |grad_tau u|^2)`.
    pub fn boundary_flux_terms(&self, f: &CorotationalField) -> (f64, f64) {
        let n = self.n;
        let inv2h = 0.5 / self.h;
        let one_sided = |v: &[f64]| (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) * inv2h;
        let gr = one_sided(&f.g);
        let zr = one_sided(&f.zeta);
        let normal = self.omega * (gr * gr + zr * zr);
        let tangential = self.omega * (self.dim - 1) as f64 * f.g[n] * f.g[n];
        (normal, tangential)
    }

    /// The discrete radial operators of the flow, `-M^{-1} K` applied to each
    /// component: `(L g, L_0 zeta)` at nodes. Entries at constrained nodes
    /// (`g` at `r = 0`, both at `r = 1`) are zero.
    pub fn apply_operators(&self, f: &CorotationalField) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let a = &self.conductance;
        let b = &self.reaction;
        let (g, z) = (&f.g, &f.zeta);
        let mut lg = vec![0.0; n + 1];
        let mut lz = vec![0.0; n + 1];
        lz[0] = a[0] * (z[1] - z[0]) / self.mass[0];
        for i in 1..n {
            let m = self.mass[i];
            lg[i] = (a[i] * (g[i + 1] - g[i]) - a[i - 1] * (g[i] - g[i - 1])
                - (b[i - 1] + b[i]) * g[i])
                / m;
            lz[i] = (a[i] * (z[i + 1] - z[i]) - a[i - 1] * (z[i] - z[i - 1])) / m;
        }
        (lg, lz)
    }

    /// Integrates `F(r) w(r)` over `[lo, hi]`, splitting cells at `breaks`,
    /// Simpson's rule with `F` linearly interpolated.
    fn weighted_radial_integral(
        &self,
        values: &[f64],
        lo: f64,
        hi: f64,
        breaks: &[f64],
        weight: impl Fn(f64) -> f64,
    ) -> f64 {
        let lo = lo.max(0.0);
        let hi = hi.min(1.0);
        if hi <= lo {
            return 0.0;
        }
        let h = self.h;
        let first = ((lo / h).floor() as usize).min(self.n - 1);
        let last = ((hi / h).ceil() as usize).clamp(first + 1, self.n);
        let mut total = 0.0;
        let mut cuts: Vec<f64> = Vec::with_capacity(4);
        for c in first..last {
            let (r0, r1) = (self.r(c), self.r(c + 1));
            let a = r0.max(lo);
            let bnd = r1.min(hi);
            if bnd <= a {
                continue;
            }
            cuts.clear();
            cuts.push(a);
            cuts.extend(breaks.iter().copied().filter(|&x| x > a && x < bnd));
            cuts.push(bnd);
            cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let fw = |x: f64| {
                let theta = (x - r0) / h;
                (values[c] * (1.0 - theta) + values[c + 1] * theta) * weight(x)
            };
            for w in cuts.windows(2) {
                let mid = 0.5 * (w[0] + w[1]);
                total += (w[1] - w[0]) / 6.0 * (fw(w[0]) + 4.0 * fw(mid) + fw(w[1]));
            }
        }
        total
    }

    fn check_ball(&self, rho0: f64, radius: f64) -> Result<()> {
        if !(radius > 0.0) || !(rho0 >= 0.0) {
            return Err(GlhfError::Precondition(format!(
                "ball needs R > 0 and rho0 >= 0, got R = {radius}, rho0 = {rho0}"
            )));
        }
        if rho0 + radius > 1.0 + 1e-12 {
            return Err(GlhfError::Precondition(format!(
                "ball B_R(x0) with |x0| = {rho0}, R = {radius} leaves the unit ball"
            )));
        }
        if rho0 > 0.0 && self.dim != 3 {
            return Err(GlhfError::Precondition(format!(
                "off-centre balls are only supported for d = 3 (d = {})",
                self.dim
            )));
        }
        Ok(())
    }

    /// `int_{B_R(x0)} F(|x|) dx` with `|x0| = rho0`. Off-centre balls use the
    /// exact spherical-cap fraction and require `d = 3`.
    pub fn offcenter_ball_integral(&self, values: &[f64], rho0: f64, radius: f64) -> Result<f64> {
        self.check_len(values)?;
        self.check_ball(rho0, radius)?;
        Ok(self.offcenter_ball_integral_unchecked(values, rho0, radius))
    }

    pub(crate) fn offcenter_ball_integral_unchecked(
        &self,
        values: &[f64],
        rho0: f64,
        radius: f64,
    ) -> f64 {
        if rho0 == 0.0 {
            let dm1 = (self.dim - 1) as i32;
            let omega = self.omega;
            return self.weighted_radial_integral(values, 0.0, radius, &[radius], |r| {
                omega * r.powi(dm1)
            });
        }
        let lo = (rho0 - radius).abs();
        let breaks = [lo, rho0 + radius];
        let (lo_r, hi_r) = if radius > rho0 {
            (0.0, rho0 + radius)
        } else {
            (rho0 - radius, rho0 + radius)
        };
        self.weighted_radial_integral(values, lo_r, hi_r, &breaks, |r| {
            4.0 * PI * r * r * cap_fraction(r, rho0, radius)
        })
    }

    /// `int_{B_R(x0)} F(|x|) (x/|x| . x0/|x0|) dx`; zero for on-axis balls.
    pub(crate) fn offcenter_axial_moment(&self, values: &[f64], rho0: f64, radius: f64) -> f64 {
        if rho0 == 0.0 {
            return 0.0;
        }
        let lo = (rho0 - radius).abs();
        let breaks = [lo, rho0 + radius];
        self.weighted_radial_integral(values, lo, rho0 + radius, &breaks, |r| {
            let c = ((r * r + rho0 * rho0 - radius * radius) / (2.0 * r * rho0)).clamp(-1.0, 1.0);
            PI * r * r * (1.0 - c * c)
        })
    }

    /// `int_B F(|x|) exp(-|x - x0|^2 / (4 s)) dx` with `|x0| = rho0`, `s > 0`.
    pub(crate) fn gaussian_ball_integral(&self, values: &[f64], rho0: f64, s: f64) -> f64 {
        let h = self.h;
        let mut total = 0.0;
        if rho0 == 0.0 {
            let dm1 = (self.dim - 1) as i32;
            for c in 0..self.n {
                let r = (c as f64 + 0.5) * h;
                let fm = 0.5 * (values[c] + values[c + 1]);
                total += h * fm * self.omega * r.powi(dm1) * (-r * r / (4.0 * s)).exp();
            }
        } else {
            for c in 0..self.n {
                let r = (c as f64 + 0.5) * h;
                let fm = 0.5 * (values[c] + values[c + 1]);
                let a = r * rho0 / (2.0 * s);
                // sphere average of exp(a cos(theta)) times exp(-(r^2+rho0^2)/(4s)),
                // rewritten to avoid overflow
                let sinh_ratio = if a < 1e-8 {
                    (-a).exp()
                } else {
                    -(-2.0 * a).exp_m1() / (2.0 * a)
                };
                let d = r - rho0;
                total += h * fm * 4.0 * PI * r * r * (-d * d / (4.0 * s)).exp() * sinh_ratio;
            }
        }
        total
    }
}

/// Fraction of the sphere `|x| = r` lying inside `B_R(x0)`, `|x0| = rho0 > 0`.
pub fn cap_fraction(r: f64, rho0: f64, radius: f64) -> f64 {
    if r <= 0.0 {
        return if rho0 < radius { 1.0 } else { 0.0 };
    }
    ((radius * radius - (r - rho0) * (r - rho0)) / (4.0 * r * rho0)).clamp(0.0, 1.0)
}

/// One time slice of the reduced flow.
#[derive(Clone, Debug, PartialEq)]
pub struct CorotationalField {
    pub t: f64,
    pub g: Vec<f64>,
    pub zeta: Vec<f64>,
}

impl CorotationalField {
    pub fn new(t: f64, g: Vec<f64>, zeta: Vec<f64>) -> Result<Self> {
        if g.len() != zeta.len() {
            return Err(GlhfError::InvalidParameter(format!(
                "profile lengths differ: g has {}, zeta has {}",
                g.len(),
                zeta.len()
            )));
        }
        if g.len() < MIN_CELLS + 1 {
            return Err(GlhfError::InvalidParameter(format!(
                "profiles need at least {} nodes",
                MIN_CELLS + 1
            )));
        }
        if g[0] != 0.0 {
            return Err(GlhfError::InvalidParameter(format!(
                "g must vanish at r = 0, got {}",
                g[0]
            )));
        }
        Ok(CorotationalField { t, g, zeta })
    }

    #[inline]
    pub fn modulus_sq(&self, i: usize) -> f64 {
        self.g[i] * self.g[i] + self.zeta[i] * self.zeta[i]
    }

    pub fn max_modulus_sq(&self) -> f64 {
        (0..self.g.len()).map(|i| self.modulus_sq(i)).fold(0.0, f64::max)
    }

    pub fn nodes(&self) -> usize {
        self.g.len()
    }

    /// Boundary trace is a constant map exactly when `g(1) = 0`.
    pub fn has_constant_boundary(&self) -> bool {
        self.g.last().map_or(false, |g| g.abs() <= 1e-14)
    }

    pub fn is_finite(&self) -> bool {
        self.g.iter().chain(&self.zeta).all(|v| v.is_finite())
    }
}

/// Built-in and file-backed initial data.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialDatum {
    /// `x/|x|`, with `g(0) = 0` at the origin node.
    Equator,
    /// `g = sin(h0)`, `zeta = cos(h0)`, `h0(r) = A r (1 - r)^2`.
    Bubble { amplitude: f64 },
    /// The north pole `(0, ..., 0, 1)`.
    Constant,
    /// Plain-text `r g zeta` per node.
    Custom(PathBuf),
}

impl InitialDatum {
    pub fn field(&self, grid: &RadialGrid) -> Result<CorotationalField> {
        let nodes = grid.nodes();
        match self {
            InitialDatum::Equator => {
                let mut g = vec![1.0; nodes];
                g[0] = 0.0;
                CorotationalField::new(0.0, g, vec![0.0; nodes])
            }
            InitialDatum::Bubble { amplitude } => {
                if !amplitude.is_finite() {
                    return Err(GlhfError::InvalidParameter(format!(
                        "bubble amplitude must be finite, got {amplitude}"
                    )));
                }
                let angle = |r: f64| amplitude * r * (1.0 - r) * (1.0 - r);
                let g = (0..nodes).map(|i| angle(grid.r(i)).sin()).collect();
                let zeta = (0..nodes).map(|i| angle(grid.r(i)).cos()).collect();
                CorotationalField::new(0.0, g, zeta)
            }
            InitialDatum::Constant => {
                CorotationalField::new(0.0, vec![0.0; nodes], vec![1.0; nodes])
            }
            InitialDatum::Custom(path) => load_custom_datum(path, grid),
        }
    }

    pub fn label(&self) -> String {
        match self {
            InitialDatum::Equator => "equator".into(),
            InitialDatum::Bubble { amplitude } => format!("bubble {amplitude}"),
            InitialDatum::Constant => "constant".into(),
            InitialDatum::Custom(p) => format!("custom {}", p.display()),
        }
    }
}

/// Reads a custom datum: one `r g zeta` line per node, `#` comments allowed.
pub fn load_custom_datum(path: &Path, grid: &RadialGrid) -> Result<CorotationalField> {
    let text = fs::read_to_string(path).map_err(|e| GlhfError::io(path, e))?;
    parse_custom_datum(&text, path, grid)
}

pub fn parse_custom_datum(text: &str, path: &Path, grid: &RadialGrid) -> Result<CorotationalField> {
    let err = |line: usize, message: String| GlhfError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut g = Vec::with_capacity(grid.nodes());
    let mut zeta = Vec::with_capacity(grid.nodes());
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        last_line = line_no;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(err(line_no, format!("expected `r g zeta`, found {} fields", fields.len())));
        }
        let mut nums = [0.0; 3];
        for (k, s) in fields.iter().enumerate() {
            nums[k] = s
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(line_no, format!("cannot parse `{s}` as a finite number")))?;
        }
        let node = g.len();
        if node >= grid.nodes() {
            return Err(err(line_no, format!("more than {} nodes", grid.nodes())));
        }
        let expected = grid.r(node);
        if (nums[0] - expected).abs() > 1e-9 {
            return Err(err(
                line_no,
                format!("r = {} does not match grid node {node} at r = {expected}", nums[0]),
            ));
        }
        if node == 0 && nums[1] != 0.0 {
            return Err(err(line_no, "g must vanish at r = 0".into()));
        }
        g.push(nums[1]);
        zeta.push(nums[2]);
    }
    if g.len() != grid.nodes() {
        return Err(err(
            last_line,
            format!("expected {} nodes, found {}", grid.nodes(), g.len()),
        ));
    }
    CorotationalField::new(0.0, g, zeta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn powers(grid: &RadialGrid, k: i32) -> Vec<f64> {
        (0..grid.nodes()).map(|i| grid.r(i).powi(k)).collect()
    }

    #[test]
    fn sphere_areas() {
        assert!((unit_sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((unit_sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn grid_layout() {
        let g = RadialGrid::new(64, 3).unwrap();
        assert_eq!(g.r(0), 0.0);
        assert_eq!(g.r(64), 1.0);
        assert!(RadialGrid::new(8, 3).is_err());
        assert!(RadialGrid::new(32, 1).is_err());
    }

    #[test]
    fn ball_volumes() {
        let g3 = RadialGrid::new(512, 3).unwrap();
        let ones = vec![1.0; g3.nodes()];
        assert!((g3.ball_integral(&ones).unwrap() - 4.0 * PI / 3.0).abs() < 1e-5);
        let g2 = RadialGrid::new(512, 2).unwrap();
        assert!((g2.ball_integral(&vec![1.0; g2.nodes()]).unwrap() - PI).abs() < 1e-12);
        let r2 = powers(&g3, 2);
        assert!((g3.ball_integral(&r2).unwrap() - 4.0 * PI / 5.0).abs() < 1e-4);
        let mut bad = ones.clone();
        bad[3] = f64::NAN;
        assert!(g3.ball_integral(&bad).is_err());
    }

    #[test]
    fn quadrature_is_second_order() {
        for d in [2usize, 3, 4] {
            for k in 0..4 {
                let exact = unit_sphere_area(d) / (k + d as i32) as f64;
                let err = |n: usize| {
                    let g = RadialGrid::new(n, d).unwrap();
                    (g.ball_integral(&powers(&g, k)).unwrap() - exact).abs()
                };
                let (coarse, fine) = (err(64), err(128));
                if coarse > 1e-13 {
                    assert!(coarse / fine >= 3.5, "d={d} k={k}: {coarse} -> {fine}");
                }
            }
        }
    }

    #[test]
    fn dirichlet_energy_closed_forms() {
        let grid = RadialGrid::new(512, 3).unwrap();
        let c = InitialDatum::Constant.field(&grid).unwrap();
        assert_eq!(grid.dirichlet_energy(&c), 0.0);

        let eq = InitialDatum::Equator.field(&grid).unwrap();
        let e = grid.dirichlet_energy(&eq);
        assert!((e - 4.0 * PI).abs() / (4.0 * PI) < 0.02);
        // refinement moves the equator energy towards 4 pi
        let fine = RadialGrid::new(1024, 3).unwrap();
        let e_fine = fine.dirichlet_energy(&InitialDatum::Equator.field(&fine).unwrap());
        assert!((e_fine - 4.0 * PI).abs() < (e - 4.0 * PI).abs());

        let lin = CorotationalField::new(0.0, vec![0.0; grid.nodes()], powers(&grid, 1)).unwrap();
        assert!((grid.dirichlet_energy(&lin) - 2.0 * PI / 3.0).abs() < 1e-5);
    }

    #[test]
    fn gradient_density_integrates_to_energy() {
        let grid = RadialGrid::new(128, 3).unwrap();
        let f = InitialDatum::Bubble { amplitude: 3.0 }.field(&grid).unwrap();
        let dens = grid.gradient_density(&f);
        let twice = grid.ball_integral(&dens).unwrap();
        assert!((twice - 2.0 * grid.dirichlet_energy(&f)).abs() < 1e-12 * twice);
    }

    #[test]
    fn gl_density_cases() {
        let grid = RadialGrid::new(64, 3).unwrap();
        let p = SchemeParams::new(std::f64::consts::E, 1.0, 3).unwrap();
        let c = InitialDatum::Constant.field(&grid).unwrap();
        assert!(grid.gl_energy_density(&c, &p).unwrap().iter().all(|e| *e == 0.0));
        let half =
            CorotationalField::new(0.0, vec![0.0; grid.nodes()], vec![0.5; grid.nodes()]).unwrap();
        let expected = std::f64::consts::E / 4.0 * 0.5625;
        for e in grid.gl_energy_density(&half, &p).unwrap() {
            assert!((e - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn bubble_sits_on_the_sphere() {
        let grid = RadialGrid::new(257, 3).unwrap();
        let f = InitialDatum::Bubble { amplitude: 3.0 }.field(&grid).unwrap();
        for i in 0..grid.nodes() {
            assert!((f.modulus_sq(i) - 1.0).abs() < 4.0 * f64::EPSILON);
        }
        assert!(f.has_constant_boundary());
        assert!(!InitialDatum::Equator.field(&grid).unwrap().has_constant_boundary());
    }

    #[test]
    fn offcenter_ball_cases() {
        let grid = RadialGrid::new(512, 3).unwrap();
        let ones = vec![1.0; grid.nodes()];
        let centred = grid.offcenter_ball_integral(&ones, 0.0, 0.3).unwrap();
        assert!((centred - 4.0 / 3.0 * PI * 0.027).abs() < 1e-5);
        assert!(grid.offcenter_ball_integral(&ones, 0.5, 1.5).is_err());
        assert!(grid.offcenter_ball_integral(&ones, 0.5, 0.6).is_err());
        let grid4 = RadialGrid::new(64, 4).unwrap();
        assert!(grid4
            .offcenter_ball_integral(&vec![1.0; 65], 0.2, 0.1)
            .is_err());
        assert!(grid4.offcenter_ball_integral(&vec![1.0; 65], 0.0, 0.1).is_ok());
    }

    /// Monte-Carlo oracle for the off-centre ball (10^6 samples, seeded LCG).
    #[test]
    fn offcenter_ball_matches_monte_carlo() {
        let grid = RadialGrid::new(512, 3).unwrap();
        let (rho0, radius) = (0.5, 0.25);
        // F(r) = r^2 exercises the radial dependence inside the cap
        let values = powers(&grid, 2);
        let quad = grid.offcenter_ball_integral(&values, rho0, radius).unwrap();

        let mut state: u64 = 0x2545_f491_4f6c_dd1d;
        let mut uniform = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let samples = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..samples {
            let x = [
                (2.0 * uniform() - 1.0) * radius,
                (2.0 * uniform() - 1.0) * radius,
                (2.0 * uniform() - 1.0) * radius,
            ];
            if x.iter().map(|c| c * c).sum::<f64>() < radius * radius {
                let p = [x[0] + rho0, x[1], x[2]];
                acc += p.iter().map(|c| c * c).sum::<f64>();
            }
        }
        let mc = acc / samples as f64 * (2.0 * radius).powi(3);
        assert!((quad - mc).abs() / mc < 2e-3, "quad {quad} vs mc {mc}");

        let vol = grid.offcenter_ball_integral(&vec![1.0; grid.nodes()], rho0, radius).unwrap();
        assert!((vol - 4.0 / 3.0 * PI * radius.powi(3)).abs() / vol < 1e-4);
    }

    #[test]
    fn centred_ball_is_truncated_ball_integral() {
        let grid = RadialGrid::new(256, 3).unwrap();
        let f = InitialDatum::Bubble { amplitude: 2.0 }.field(&grid).unwrap();
        let dens = grid.gradient_density(&f);
        let cut = 0.5;
        let masked: Vec<f64> = (0..grid.nodes())
            .map(|i| if grid.r(i) <= cut { dens[i] } else { 0.0 })
            .collect();
        let a = grid.offcenter_ball_integral(&dens, 0.0, cut).unwrap();
        let b = grid.ball_integral(&masked).unwrap();
        assert!((a - b).abs() / a < 1e-2);
    }

    #[test]
    fn boundary_terms() {
        let grid = RadialGrid::new(128, 3).unwrap();
        let c = InitialDatum::Constant.field(&grid).unwrap();
        assert_eq!(grid.boundary_flux_terms(&c), (0.0, 0.0));
        let eq = InitialDatum::Equator.field(&grid).unwrap();
        let (normal, tangential) = grid.boundary_flux_terms(&eq);
        assert_eq!(normal, 0.0);
        assert!((tangential - 8.0 * PI).abs() < 1e-12);
        let lin = CorotationalField::new(0.0, powers(&grid, 1), vec![0.0; grid.nodes()]).unwrap();
        assert!((grid.boundary_flux_terms(&lin).0 - 4.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn operators_are_consistent() {
        // zeta = r^2: L_0 zeta = 2 d; g = r: L g = (d-1)/r - (d-1)/r = 0
        let grid = RadialGrid::new(256, 3).unwrap();
        let f = CorotationalField::new(0.0, powers(&grid, 1), powers(&grid, 2)).unwrap();
        let (lg, lz) = grid.apply_operators(&f);
        // the lumped mass makes the truncation error O((h/r)^2) near the origin
        for i in 10..250 {
            let rel = (grid.h() / grid.r(i)).powi(2);
            assert!((lz[i] - 6.0).abs() < 2.0 * rel, "lz[{i}] = {}", lz[i]);
            assert!(lg[i].abs() < 2.0 * rel / grid.r(i), "lg[{i}] = {}", lg[i]);
        }
    }

    #[test]
    fn custom_datum_parsing() {
        let grid = RadialGrid::new(16, 3).unwrap();
        let path = Path::new("datum.txt");
        let mut text = String::from("# r g zeta\n");
        for i in 0..=16 {
            text.push_str(&format!("{} {} 1\n", grid.r(i), 0.0));
        }
        let f = parse_custom_datum(&text, path, &grid).unwrap();
        assert_eq!(f.zeta.len(), 17);

        let broken = text.replace("0.5 0 1", "0.5 zero 1");
        match parse_custom_datum(&broken, path, &grid) {
            Err(GlhfError::Parse { line, .. }) => assert_eq!(line, 10),
            other => panic!("unexpected {other:?}"),
        }
        let short: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            parse_custom_datum(&short, path, &grid),
            Err(GlhfError::Parse { .. })
        ));
        let shuffled = text.replace("0.0625 0 1", "0.07 0 1");
        assert!(parse_custom_datum(&shuffled, path, &grid).is_err());
    }
}
