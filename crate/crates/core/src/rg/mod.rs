//! The exact hierarchical RG map on single-site Boltzmann factors.
//!
//! In rescaled layer variables a unit-ball field is `aψ + ζ_i` with
//! `a = p^{-[φ]}`, `ψ` the parent field and `ζ` the zero-sum sibling Gaussian
//! of covariance `I - 11ᵀ/b`. One step maps
//! `F ↦ (RG F)(ψ) = E Π_i F(aψ + ζ_i)`, normalized so `(RG F)(0) = 1`.
//! Wick ordering is with respect to the full site variance
//! `C = (1 - 1/b)/(1 - a²)`, which makes `:φⁿ:` an eigenvector with
//! eigenvalue `b aⁿ = p^{d - n[φ]}`.

mod block;
mod fixed;
mod mc;
mod poly;

pub use block::{BlockIntegrator, BlockValue, ChildGroup, WINDOW_SIGMAS};
pub use fixed::{
    anomalous_dimension, classify, dimension_from_eigenvalue, find_fixed_point, flow, gaussian_eigen_check,
    linearize, seed_from_poly, tune_at_fixed_point, tune_critical_mu, tune_family, AnomalousDimension, FixedPoint, FixedPointReport,
    FlowStep, Linearization, NewtonOptions, TrajectoryClass, Tuning,
};
pub use mc::{rg_step_mc, McStep};
pub use poly::{poly_fixed_point, rg_step_poly, WickPolynomial};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model parameters of the RG map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RGParams {
    pub p: u32,
    pub d: usize,
    /// Block scale `L = p^l`; one RG step integrates `l` layers.
    pub l: u32,
    pub eps: f64,
}

impl RGParams {
    pub fn new(p: u32, d: usize, eps: f64) -> Result<Self> {
        let r = RGParams { p, d, l: 1, eps };
        r.validate()?;
        Ok(r)
    }

    pub fn with_l(self, l: u32) -> Self {
        RGParams { l, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 || self.d == 0 || self.l == 0 {
            return Err(Error::config("need p >= 2, d >= 1, l >= 1"));
        }
        let phi = self.phi();
        if !(self.eps >= 0.0 && phi > 0.0 && phi < self.d as f64 / 2.0) {
            return Err(Error::config(format!("eps = {} gives [φ] = {phi} outside (0, d/2)", self.eps)));
        }
        Ok(())
    }

    pub fn phi(&self) -> f64 {
        (self.d as f64 - self.eps) / 4.0
    }

    /// Siblings per family, `p^d`.
    pub fn b(&self) -> usize {
        (self.p as usize).pow(self.d as u32)
    }

    /// Field rescaling per layer, `p^{-[φ]}`.
    pub fn a(&self) -> f64 {
        (self.p as f64).powf(-self.phi())
    }

    /// Variance of one `ζ_i`, `1 - 1/b`.
    pub fn v(&self) -> f64 {
        1.0 - 1.0 / self.b() as f64
    }

    /// Site variance summed over all layers: the Wick reference variance.
    pub fn c_self(&self) -> f64 {
        self.v() / (1.0 - self.a().powi(2))
    }

    /// Gaussian eigenvalue of `:φⁿ:` for one `l`-layer step.
    pub fn gaussian_eigenvalue(&self, n: u32) -> f64 {
        (self.p as f64).powf(self.l as f64 * (self.d as f64 - n as f64 * self.phi()))
    }
}

/// Symmetric field grid `φ_i = -Φmax + i h`, `N` odd.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: usize,
    pub phimax: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Grid { n: 513, phimax: 24.0 }
    }
}

impl Grid {
    pub fn new(n: usize, phimax: f64) -> Result<Self> {
        if n < 5 || n % 2 == 0 || !(phimax > 0.0) {
            return Err(Error::config("grid needs an odd number of points >= 5 and Φmax > 0"));
        }
        Ok(Grid { n, phimax })
    }

    pub fn h(&self) -> f64 {
        2.0 * self.phimax / (self.n - 1) as f64
    }

    pub fn mid(&self) -> usize {
        self.n / 2
    }

    pub fn node(&self, i: usize) -> f64 {
        (i as f64 - self.mid() as f64) * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }
}

/// `log F` sampled on a grid, gauge `log F(0) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoltzmannFactor {
    pub grid: Grid,
    pub log_f: Vec<f64>,
}

impl BoltzmannFactor {
    pub fn one(grid: Grid) -> Self {
        BoltzmannFactor {
            grid,
            log_f: vec![0.0; grid.n],
        }
    }

    /// Samples `log F` and shifts it to the gauge.
    pub fn from_log_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let mut b = BoltzmannFactor {
            grid,
            log_f: grid.nodes().into_iter().map(f).collect(),
        };
        b.normalize();
        b
    }

    /// `F = exp(-g :φ⁴: - μ :φ²:)` with Wick ordering at variance `c`.
    pub fn quartic(grid: Grid, g: f64, mu: f64, c: f64) -> Self {
        Self::from_log_fn(grid, |x| -g * wick(4, c, x) - mu * wick(2, c, x))
    }

    pub fn from_wick(grid: Grid, w: &WickPolynomial) -> Self {
        Self::from_log_fn(grid, |x| -w.eval(x))
    }

    pub fn normalize(&mut self) {
        let z = self.log_f[self.grid.mid()];
        self.log_f.iter_mut().for_each(|v| *v -= z);
    }

    pub fn validate(&self) -> Result<()> {
        if self.log_f.len() != self.grid.n {
            return Err(Error::config("log F length does not match the grid"));
        }
        if let Some(i) = self.log_f.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("log F is not finite at node {i}")));
        }
        Ok(())
    }

    /// `max_i |log F(φ_i) - log F(-φ_i)|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.grid.n;
        (0..n / 2)
            .map(|i| (self.log_f[i] - self.log_f[n - 1 - i]).abs())
            .fold(0.0, f64::max)
    }

    /// Averages `log F` with its mirror image.
    pub fn symmetrize(&mut self) {
        let n = self.grid.n;
        for i in 0..n / 2 {
            let m = 0.5 * (self.log_f[i] + self.log_f[n - 1 - i]);
            self.log_f[i] = m;
            self.log_f[n - 1 - i] = m;
        }
    }

    /// Cubic Lagrange interpolation of `log F` off the grid.
    pub fn eval_log(&self, x: f64) -> Result<f64> {
        let g = &self.grid;
        if x.abs() > g.phimax {
            return Err(Error::domain(format!("φ = {x} lies outside the grid [-{0}, {0}]", g.phimax)));
        }
        let t = (x + g.phimax) / g.h();
        let i0 = (t.floor() as isize - 1).clamp(0, g.n as isize - 4) as usize;
        let mut sum = 0.0;
        for j in 0..4 {
            let mut w = 1.0;
            for k in 0..4 {
                if k != j {
                    w *= (t - (i0 + k) as f64) / (j as f64 - k as f64);
                }
            }
            sum += w * self.log_f[i0 + j];
        }
        Ok(sum)
    }

    /// Even unknowns `log F(φ_j)`, `j = 1..=N/2` on the positive side.
    pub fn even_coords(&self) -> Vec<f64> {
        let m = self.grid.mid();
        self.log_f[m + 1..].to_vec()
    }

    pub fn from_even_coords(grid: Grid, x: &[f64]) -> Self {
        let m = grid.mid();
        let mut log_f = vec![0.0; grid.n];
        for (j, v) in x.iter().enumerate() {
            log_f[m + 1 + j] = *v;
            log_f[m - 1 - j] = *v;
        }
        BoltzmannFactor { grid, log_f }
    }

    /// Wick coefficient `c_n` of `V = -log F`:
    /// `E[V :φⁿ:] / (n! cⁿ)` under `N(0, c)`.
    pub fn projection(&self, n: u32, c: f64) -> f64 {
        let g = &self.grid;
        let h = g.h();
        let norm = (2.0 * std::f64::consts::PI * c).sqrt();
        let mut sum = 0.0;
        for (i, lf) in self.log_f.iter().enumerate() {
            let x = g.node(i);
            sum += -lf * wick(n, c, x) * (-x * x / (2.0 * c)).exp();
        }
        let fact: f64 = (1..=n).map(|k| k as f64).product();
        sum * h / norm / (fact * c.powi(n as i32))
    }

    /// `log` of the share of `∫ F dN(0, c)` carried by `|φ| > frac·Φmax`.
    pub fn edge_mass(&self, c: f64, frac: f64) -> f64 {
        let g = &self.grid;
        let w: Vec<(f64, f64)> = self
            .log_f
            .iter()
            .enumerate()
            .map(|(i, lf)| {
                let x = g.node(i);
                (x, lf - x * x / (2.0 * c))
            })
            .collect();
        let max = w.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = w.iter().map(|t| (t.1 - max).exp()).sum();
        let edge: f64 = w
            .iter()
            .filter(|t| t.0.abs() > frac * g.phimax)
            .map(|t| (t.1 - max).exp())
            .sum();
        (edge / total).ln()
    }
}

/// Wick monomial `:xⁿ:_c = c^{n/2} He_n(x/√c)`.
pub fn wick(n: u32, c: f64, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, x);
    if n == 0 {
        return 1.0;
    }
    for k in 1..n {
        let h2 = x * h1 - k as f64 * c * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wick_examples() {
        let c = 0.7;
        let x = 1.3f64;
        assert_relative_eq!(wick(2, c, x), x * x - c);
        assert_relative_eq!(wick(4, c, x), x.powi(4) - 6.0 * c * x * x + 3.0 * c * c, epsilon = 1e-14);
    }

    #[test]
    fn params_and_eigenvalues() {
        let r = RGParams::new(2, 3, 0.1).unwrap();
        assert_eq!(r.b(), 8);
        assert_relative_eq!(r.gaussian_eigenvalue(4), 2f64.powf(0.1), epsilon = 1e-14);
        assert_relative_eq!(r.b() as f64 * r.a().powi(2), r.gaussian_eigenvalue(2), epsilon = 1e-13);
        // site variance decomposes into the ζ variance plus the rescaled parent
        assert_relative_eq!(r.a().powi(2) * r.c_self() + r.v(), r.c_self(), epsilon = 1e-14);
        assert!(RGParams::new(2, 3, 4.0).is_err());
    }

    #[test]
    fn projection_recovers_couplings() {
        let r = RGParams::new(2, 3, 0.1).unwrap();
        let c = r.c_self();
        let f = BoltzmannFactor::quartic(Grid::default(), 0.01, -0.2, c);
        assert_relative_eq!(f.projection(4, c), 0.01, max_relative = 1e-10);
        assert_relative_eq!(f.projection(2, c), -0.2, max_relative = 1e-10);
        assert!(f.projection(6, c).abs() < 1e-12);
    }

    #[test]
    fn interpolation_and_symmetry() {
        let g = Grid::new(101, 5.0).unwrap();
        let f = BoltzmannFactor::from_log_fn(g, |x| -0.3 * x * x + 0.01 * x.powi(4));
        let exact = |x: f64| -0.3 * x * x + 0.01 * x.powi(4);
        for &x in &[0.013, -1.77, 4.99, 2.5] {
            assert!((f.eval_log(x).unwrap() - exact(x)).abs() < 1e-5);
        }
        assert!(f.eval_log(5.1).is_err());
        assert!(f.asymmetry() < 1e-15);
        let e = BoltzmannFactor::from_even_coords(g, &f.even_coords());
        assert_eq!(e, f);
    }
}
