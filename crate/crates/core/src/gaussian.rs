//! The hierarchical Gaussian field: vertex covariances, the exact radial
//! kernel with and without UV cutoff, smeared integrals by shell
//! decomposition, sampling, the fluctuation split, and reflection Gram
//! matrices.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mobius::{self, MobiusWord};
use crate::padic::{PAdicPoint, ProjPoint};
use crate::tree::{BallAddress, BallFunction, BallRelation, Window};

/// Per-layer variance exponent: layer `k` carries variance `p^{-LAYER_EXPONENT k [φ]}`.
pub const LAYER_EXPONENT: f64 = 2.0;

/// Relative tolerance of PSD verdicts against the spectral norm.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub p: u32,
    pub d: usize,
    pub eps: f64,
    /// UV layer: layers below it carry no fluctuation. `None` means no cutoff.
    pub uv: Option<i32>,
    /// Block scale `L = p^l`.
    pub l: u32,
}

impl CovarianceSpec {
    pub fn new(p: u32, d: usize, eps: f64) -> Result<Self> {
        let s = CovarianceSpec {
            p,
            d,
            eps,
            uv: None,
            l: 1,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_uv(self, uv: Option<i32>) -> Self {
        CovarianceSpec { uv, ..self }
    }

    pub fn with_l(self, l: u32) -> Self {
        CovarianceSpec { l, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 || self.d == 0 || self.l == 0 {
            return Err(Error::config("need p >= 2, d >= 1, l >= 1"));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::config("eps must be a nonnegative number"));
        }
        let phi = self.phi();
        if !(phi > 0.0 && phi < self.d as f64 / 2.0) {
            return Err(Error::config(format!(
                "[φ] = {phi} must lie in (0, d/2) for a locally integrable kernel"
            )));
        }
        Ok(())
    }

    /// Field dimension `[φ] = (d - ε)/4`.
    pub fn phi(&self) -> f64 {
        (self.d as f64 - self.eps) / 4.0
    }

    fn pf(&self) -> f64 {
        self.p as f64
    }

    /// `p^{-d}`, the inverse branching number.
    pub fn inv_branching(&self) -> f64 {
        self.pf().powi(-(self.d as i32))
    }

    /// Variance scale of the ζ-field at layer `k`.
    pub fn layer_variance(&self, k: i32) -> f64 {
        self.pf().powf(-LAYER_EXPONENT * k as f64 * self.phi())
    }

    /// Ratio between consecutive layer variances.
    pub fn layer_ratio(&self) -> f64 {
        self.layer_variance(1)
    }

    /// `C(x,x)` with the cutoff at layer 0.
    pub fn c_self(&self) -> f64 {
        (1.0 - self.inv_branching()) / (1.0 - self.layer_ratio())
    }

    /// Amplitude of the power law `C(x,y) = c₀ |x-y|^{-2[φ]}`.
    pub fn c0(&self) -> f64 {
        self.c_self() - self.inv_branching() / self.layer_ratio()
    }

    /// Variance of the field summed over all layers `>= k`.
    pub fn tail_variance(&self, k: i32) -> f64 {
        self.c_self() * self.layer_variance(k)
    }

    /// The radial kernel with this spec's UV cutoff.
    pub fn kernel(&self) -> RadialKernel {
        self.kernel_with_cutoff(self.uv)
    }

    pub fn kernel_with_cutoff(&self, uv: Option<i32>) -> RadialKernel {
        RadialKernel {
            p: self.p,
            d: self.d,
            amp: self.c0(),
            ratio: self.layer_ratio(),
            plateau: uv.map(|r| (r, self.tail_variance(r))),
        }
    }
}

/// A kernel depending only on the distance exponent `j` (`|x-y| = p^j`):
/// `amp · ratio^j` above the plateau layer, constant at and below it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialKernel {
    pub p: u32,
    pub d: usize,
    pub amp: f64,
    pub ratio: f64,
    pub plateau: Option<(i32, f64)>,
}

impl RadialKernel {
    /// Value at distance `p^j`; `None` is distance 0.
    pub fn value(&self, j: Option<i32>) -> Result<f64> {
        match (self.plateau, j) {
            (Some((r, v)), Some(j)) if j <= r => Ok(v),
            (Some((_, v)), None) => Ok(v),
            (_, Some(j)) => Ok(self.amp * self.ratio.powi(j)),
            (None, None) => Err(Error::NonIntegrable(
                "coincident points without a UV cutoff".into(),
            )),
        }
    }

    pub fn squared(&self) -> Self {
        RadialKernel {
            amp: self.amp * self.amp,
            ratio: self.ratio * self.ratio,
            plateau: self.plateau.map(|(r, v)| (r, v * v)),
            ..*self
        }
    }

    /// `∫_{|z| <= p^k} K(|z|) dz`, summed shell by shell: the shell
    /// `|z| = p^j` has measure `p^{jd}(1 - p^{-d})`.
    pub fn ball_potential(&self, k: i32) -> Result<f64> {
        let p = self.p as f64;
        let d = self.d as i32;
        let m = 1.0 - p.powi(-d);
        let growth = p.powi(d) * self.ratio;
        let shells = |lo: i32, hi: i32| -> f64 {
            (lo..=hi).map(|j| m * self.amp * growth.powi(j)).sum::<f64>()
        };
        match self.plateau {
            Some((r, v)) if k <= r => Ok(v * p.powi(k * d)),
            Some((r, v)) => Ok(v * p.powi(r * d) + shells(r + 1, k)),
            None => {
                if growth <= 1.0 {
                    return Err(Error::NonIntegrable(
                        "kernel is not locally integrable without a UV cutoff".into(),
                    ));
                }
                Ok(m * self.amp * growth.powi(k) / (1.0 - 1.0 / growth))
            }
        }
    }

    /// `∫_a ∫_b K(|x-y|) dx dy` for two balls of a window.
    pub fn ball_pair(&self, window: &Window, a: &BallAddress, b: &BallAddress) -> Result<f64> {
        let va = window.ball_volume(a.layer);
        let vb = window.ball_volume(b.layer);
        Ok(match window.relation(a, b)? {
            BallRelation::Equal | BallRelation::Inside => va * self.ball_potential(b.layer)?,
            BallRelation::Contains => vb * self.ball_potential(a.layer)?,
            BallRelation::Disjoint { split } => va * vb * self.value(Some(split))?,
        })
    }

    /// `∫∫ f(x) K(|x-y|) g(y) dx dy`.
    pub fn smeared(&self, window: &Window, f: &BallFunction, g: &BallFunction) -> Result<f64> {
        window.check_disjoint(f)?;
        window.check_disjoint(g)?;
        let mut total = 0.0;
        for (a, ca) in &f.terms {
            for (b, cb) in &g.terms {
                total += ca * cb * self.ball_pair(window, a, b)?;
            }
        }
        Ok(total)
    }
}

/// `E ζ_u ζ_v` for two vertices of a window.
pub fn vertex_covariance(window: &Window, u: &BallAddress, v: &BallAddress, spec: &CovarianceSpec) -> Result<f64> {
    window.relation(u, v)?;
    if u.layer != v.layer || spec.uv.is_some_and(|r| u.layer < r) {
        return Ok(0.0);
    }
    let var = spec.layer_variance(u.layer);
    let n = u.path.len();
    if u == v {
        Ok((1.0 - spec.inv_branching()) * var)
    } else if u.path[..n - 1] == v.path[..n - 1] {
        Ok(-spec.inv_branching() * var)
    } else {
        Ok(0.0)
    }
}

/// `E φ(x) φ(y)` from the closed-form layer sum.
pub fn covariance_exact(x: &PAdicPoint, y: &PAdicPoint, spec: &CovarianceSpec) -> Result<f64> {
    let j = x.sub(y)?.norm().exponent();
    spec.kernel().value(j)
}

/// `∫∫ f(x) C(x,y) g(y) dx dy`.
pub fn covariance_smeared(window: &Window, f: &BallFunction, g: &BallFunction, spec: &CovarianceSpec) -> Result<f64> {
    spec.kernel().smeared(window, f, g)
}

/// Gaussian two-point covariance under a conformal map, as an exact identity
/// between exponents of `p`:
/// `C(x,y) = J_f(x)^{[φ]/d} J_f(y)^{[φ]/d} C(f x, f y)`.
pub fn mobius_covariance_check(f: &MobiusWord, x: &PAdicPoint, y: &PAdicPoint) -> Result<bool> {
    let (ProjPoint::Finite(fx), ProjPoint::Finite(fy)) = (f.apply_finite(x)?, f.apply_finite(y)?) else {
        return Err(Error::Pole("a point is sent to ∞".into()));
    };
    let e = x
        .sub(y)?
        .norm()
        .exponent()
        .ok_or_else(|| Error::domain("coincident points"))? as i64;
    let fe = fx
        .sub(&fy)?
        .norm()
        .exponent()
        .ok_or_else(|| Error::domain("images coincide"))? as i64;
    let jx = f.jacobian_exponent(x)?;
    let jy = f.jacobian_exponent(y)?;
    // c₀ p^{-2[φ]e} = p^{[φ](jx+jy)/d} c₀ p^{-2[φ]fe}, divided through by [φ]/d
    let d = f.d as i64;
    Ok(-2 * d * e == jx + jy - 2 * d * fe)
}

/// A sampled ζ-field on a window. `zeta[k][i]` is the value on ball `i` of
/// layer `k`, for `k < S`; `top` is the field summed over the root and all
/// layers above it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub p: u32,
    pub d: usize,
    pub top_layer: i32,
    pub zeta: Vec<Vec<f64>>,
    pub top: f64,
    pub seed: Option<u64>,
}

impl FieldConfig {
    /// `φ` on every unit ball.
    pub fn leaf_field(&self) -> Vec<f64> {
        let b = (self.p as usize).pow(self.d as u32);
        let n = self.zeta.first().map_or(1, Vec::len);
        (0..n)
            .map(|i| {
                let mut idx = i;
                let mut sum = self.top;
                for layer in &self.zeta {
                    sum += layer[idx];
                    idx /= b;
                }
                sum
            })
            .collect()
    }

    /// Rows `(layer, path, ζ)`; the root row carries `top`.
    pub fn rows(&self, window: &Window) -> Vec<(i32, String, f64)> {
        let path_text = |a: &BallAddress| {
            a.path.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
        };
        let mut rows = Vec::new();
        for (k, layer) in self.zeta.iter().enumerate() {
            for (i, z) in layer.iter().enumerate() {
                let a = window.ball_at(k as i32, i);
                rows.push((k as i32, path_text(&a), *z));
            }
        }
        rows.push((self.top_layer, String::new(), self.top));
        rows
    }
}

/// Draws the ζ-field family by family: i.i.d. normals of the layer variance
/// minus their family mean.
pub fn sample_field<R: Rng + ?Sized>(window: &Window, spec: &CovarianceSpec, rng: &mut R) -> FieldConfig {
    let b = window.branching();
    let s = window.top;
    let mut zeta = Vec::with_capacity(s as usize);
    for k in 0..s {
        let n = window.layer_size(k);
        let mut layer = vec![0.0; n];
        if !spec.uv.is_some_and(|r| k < r) {
            let sigma = spec.layer_variance(k).sqrt();
            for family in layer.chunks_mut(b) {
                for z in family.iter_mut() {
                    *z = sigma * rng.sample::<f64, _>(StandardNormal);
                }
                let mean = family.iter().sum::<f64>() / b as f64;
                family.iter_mut().for_each(|z| *z -= mean);
            }
        }
        zeta.push(layer);
    }
    let top_var = spec.tail_variance(spec.uv.map_or(s, |r| r.max(s)));
    let top = top_var.sqrt() * rng.sample::<f64, _>(StandardNormal);
    FieldConfig {
        p: window.p,
        d: window.d,
        top_layer: s,
        zeta,
        top,
        seed: None,
    }
}

/// Spectral summary of a symmetric matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PsdReport {
    pub min_eigenvalue: f64,
    pub norm: f64,
    pub psd: bool,
}

fn psd_report(m: &DMatrix<f64>) -> PsdReport {
    let eig = m.clone().symmetric_eigen().eigenvalues;
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let norm = eig.iter().map(|e| e.abs()).fold(0.0, f64::max);
    PsdReport {
        min_eigenvalue: min,
        norm,
        psd: min >= -PSD_TOL * norm,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GammaReport {
    pub spectrum: PsdReport,
    /// `max |C_r - Γ - C_{r+l}|` over unit-ball pairs.
    pub split_error: f64,
}

/// The fluctuation covariance `Γ = C_r - C_{r+l}` on unit balls, assembled
/// from the ζ-layers `r..r+l` of the window.
pub fn gamma_psd_check(window: &Window, spec: &CovarianceSpec) -> Result<GammaReport> {
    let r = spec.uv.unwrap_or(0);
    let l = spec.l as i32;
    let n = window.leaf_count();
    let c0 = spec.kernel_with_cutoff(Some(r));
    let c1 = spec.kernel_with_cutoff(Some(r + l));
    let leaves: Vec<BallAddress> = (0..n).map(|i| window.ball_at(0, i)).collect();
    let ancestor = |a: &BallAddress, k: i32| BallAddress {
        layer: k,
        path: a.path[..(window.top - k) as usize].to_vec(),
    };
    let mut gamma = DMatrix::zeros(n, n);
    let mut split_error: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            let mut g = 0.0;
            for k in r.max(0)..(r + l).min(window.top + 1) {
                g += vertex_covariance(window, &ancestor(&leaves[i], k), &ancestor(&leaves[j], k), spec)?;
            }
            let dist = match window.relation(&leaves[i], &leaves[j])? {
                BallRelation::Disjoint { split } => Some(split),
                _ => None,
            };
            let split = c0.value(dist)? - c1.value(dist)?;
            split_error = split_error.max((split - g).abs());
            gamma[(i, j)] = g;
            gamma[(j, i)] = g;
        }
    }
    Ok(GammaReport {
        spectrum: psd_report(&gamma),
        split_error,
    })
}

/// Half-space sign of a ball: the common sign of its points, or 0 when its
/// first-coordinate projection contains 0.
pub fn ball_sign(window: &Window, b: &BallAddress) -> Result<i8> {
    let c = window.center(b)?;
    let first: Vec<u32> = b.path.iter().map(|&a| a % window.p).collect();
    if first.iter().all(|&a| a == 0) {
        return Ok(0);
    }
    mobius::sign(&c)
}

/// The mirror image of a ball under `θ`.
pub fn reflect_ball(window: &Window, b: &BallAddress) -> Result<BallAddress> {
    let c = window.center(b)?;
    window.ball_of(&mobius::reflect(&c), b.layer)
}

pub fn reflect_function(window: &Window, f: &BallFunction) -> Result<BallFunction> {
    Ok(BallFunction::new(
        f.terms
            .iter()
            .map(|(b, c)| Ok((reflect_ball(window, b)?, *c)))
            .collect::<Result<_>>()?,
    ))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OsGram {
    pub testfns: Vec<BallFunction>,
    pub uv: Option<i32>,
    pub matrix: Vec<Vec<f64>>,
    pub spectrum: PsdReport,
}

impl OsGram {
    /// `λ_min / ‖M‖`.
    pub fn relative_min(&self) -> f64 {
        if self.spectrum.norm == 0.0 {
            0.0
        } else {
            self.spectrum.min_eigenvalue / self.spectrum.norm
        }
    }
}

/// `M_ij = ∫∫ f_i(θx) C(x,y) f_j(y) dx dy` for test functions supported on the
/// positive half-space, with the kernel cut off at `spec.uv`.
pub fn os_gram(window: &Window, testfns: &[BallFunction], spec: &CovarianceSpec) -> Result<OsGram> {
    if window.p % 2 == 0 {
        return Err(Error::Unsupported("reflection positivity needs odd p".into()));
    }
    for f in testfns {
        window.check_disjoint(f)?;
        for (b, _) in &f.terms {
            if ball_sign(window, b)? != 1 {
                return Err(Error::domain(format!("ball {b} is not inside the positive half-space")));
            }
        }
    }
    let kernel = spec.kernel();
    let reflected: Vec<BallFunction> = testfns
        .iter()
        .map(|f| reflect_function(window, f))
        .collect::<Result<_>>()?;
    let n = testfns.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = kernel.smeared(window, &reflected[i], &testfns[j])?;
        }
    }
    // M is symmetric in exact arithmetic; symmetrize the rounding
    let m = (&m + m.transpose()) * 0.5;
    Ok(OsGram {
        testfns: testfns.to_vec(),
        uv: spec.uv,
        matrix: m.row_iter().map(|r| r.iter().cloned().collect()).collect(),
        spectrum: psd_report(&m),
    })
}

/// Random positive-side test function: up to `max_terms` disjoint balls of
/// layers `0..S-1` with coefficients in `[-1, 1]`.
pub fn random_positive_testfn<R: Rng + ?Sized>(window: &Window, max_terms: usize, rng: &mut R) -> BallFunction {
    let mut terms: Vec<(BallAddress, f64)> = Vec::new();
    let count = rng.random_range(1..=max_terms.max(1));
    let mut attempts = 0;
    while terms.len() < count && attempts < 50 * count {
        attempts += 1;
        let k = rng.random_range(0..window.top);
        let b = window.ball_at(k, rng.random_range(0..window.layer_size(k)));
        if ball_sign(window, &b).ok() != Some(1) {
            continue;
        }
        let disjoint = terms.iter().all(|(a, _)| {
            matches!(window.relation(a, &b), Ok(BallRelation::Disjoint { .. }))
        });
        if disjoint {
            terms.push((b, rng.random_range(-1.0..=1.0)));
        }
    }
    BallFunction::new(terms)
}

/// Randomized search for a test-function collection whose Gram matrix under
/// the cutoff kernel has a negative eigenvalue. Returns the most negative
/// `λ_min/‖M‖` collection found.
pub fn search_os_witness<R: Rng + ?Sized>(
    window: &Window,
    spec: &CovarianceSpec,
    trials: usize,
    collection_size: usize,
    rng: &mut R,
) -> Result<OsGram> {
    let mut best: Option<OsGram> = None;
    for _ in 0..trials {
        let fns: Vec<BallFunction> = (0..collection_size)
            .map(|_| random_positive_testfn(window, 3, rng))
            .filter(|f| !f.terms.is_empty())
            .collect();
        if fns.is_empty() {
            continue;
        }
        let g = os_gram(window, &fns, spec)?;
        if best.as_ref().is_none_or(|b| g.relative_min() < b.relative_min()) {
            best = Some(g);
        }
    }
    best.ok_or_else(|| Error::domain("no positive-side balls in this window"))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct WickVariance {
    pub value: f64,
    /// Set when `4[φ] >= d`: the value diverges as the cutoff is removed.
    pub divergent: bool,
}

/// `Var ∫ :φ_r²: f = 2 ∫∫ C_r(x,y)² f(x) f(y) dx dy`.
pub fn wick_square_smeared_variance(
    window: &Window,
    f: &BallFunction,
    r: i32,
    spec: &CovarianceSpec,
) -> Result<WickVariance> {
    let k2 = spec.kernel_with_cutoff(Some(r)).squared();
    Ok(WickVariance {
        value: 2.0 * k2.smeared(window, f, f)?,
        divergent: 4.0 * spec.phi() >= spec.d as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(p: u32, d: usize, eps: f64) -> CovarianceSpec {
        CovarianceSpec::new(p, d, eps).unwrap()
    }

    #[test]
    fn c0_is_one_at_eps_zero() {
        // (1 - 1/8)/(1 - 2^{-3/2}) - 2^{-3/2} reduces to 1
        let s = spec(2, 3, 0.0);
        assert_relative_eq!(s.c0(), 1.0, epsilon = 1e-14);
        let q = 2f64.powf(-1.5);
        assert_relative_eq!(s.c_self(), (7.0 / 8.0) / (1.0 - q), epsilon = 1e-14);
    }

    #[test]
    fn invalid_specs() {
        assert!(CovarianceSpec::new(2, 3, 3.0).is_err());
        assert!(CovarianceSpec::new(1, 3, 0.1).is_err());
        assert!(CovarianceSpec::new(2, 3, -0.1).is_err());
    }

    #[test]
    fn vertex_covariance_cases() {
        let w = Window::new(2, 3, 2).unwrap();
        let s = spec(2, 3, 0.1);
        let u = w.ball_at(0, 0);
        assert_eq!(vertex_covariance(&w, &u, &w.ball_at(1, 0), &s).unwrap(), 0.0);
        let s0 = spec(2, 3, 0.0);
        assert_relative_eq!(vertex_covariance(&w, &u, &u, &s0).unwrap(), 7.0 / 8.0);
        let siblings: f64 = (0..8)
            .map(|j| vertex_covariance(&w, &u, &w.ball_at(0, j), &s).unwrap())
            .sum();
        assert!(siblings.abs() < 1e-15);
        // cousins are uncorrelated
        assert_eq!(vertex_covariance(&w, &u, &w.ball_at(0, 8), &s).unwrap(), 0.0);
    }

    /// Sum of vertex covariances along the two rays, with the layers above
    /// the window closed by the geometric tail.
    fn ray_sum(w: &Window, s: &CovarianceSpec, i: usize, j: usize) -> f64 {
        let (a, b) = (w.ball_at(0, i), w.ball_at(0, j));
        let mut c = s.tail_variance(w.top);
        for k in s.uv.unwrap_or(0).max(0)..w.top {
            let up = |x: &BallAddress| BallAddress {
                layer: k,
                path: x.path[..(w.top - k) as usize].to_vec(),
            };
            c += vertex_covariance(w, &up(&a), &up(&b), s).unwrap();
        }
        c
    }

    #[test]
    fn exact_covariance_matches_layer_sum() {
        for &(p, d, eps) in &[(2u32, 3usize, 0.1), (3, 1, 0.0), (5, 2, 0.3)] {
            let w = Window::new(p, d, 3).unwrap();
            let s = spec(p, d, eps).with_uv(Some(0));
            for (i, j) in [(0, 0), (0, 1), (0, w.branching()), (1, w.leaf_count() - 1)] {
                let x = w.leaf_point(i);
                let y = w.leaf_point(j);
                assert_relative_eq!(
                    covariance_exact(&x, &y, &s).unwrap(),
                    ray_sum(&w, &s, i, j),
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn power_law_and_plateau() {
        let s = spec(2, 3, 0.1);
        let k = s.kernel();
        for j in -5..6 {
            let v = k.value(Some(j)).unwrap() * 2f64.powf(2.0 * s.phi() * j as f64);
            assert_relative_eq!(v, s.c0(), max_relative = 1e-13);
        }
        assert!(matches!(k.value(None), Err(Error::NonIntegrable(_))));
        let kc = s.kernel_with_cutoff(Some(1));
        let plateau = kc.value(None).unwrap();
        assert_eq!(kc.value(Some(-3)).unwrap(), plateau);
        assert_eq!(kc.value(Some(1)).unwrap(), plateau);
        assert_relative_eq!(kc.value(Some(2)).unwrap(), k.value(Some(2)).unwrap());
        assert_relative_eq!(
            s.kernel_with_cutoff(Some(0)).value(None).unwrap(),
            s.c_self(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn smeared_against_leaf_sums() {
        // with the cutoff at layer 0 the kernel is constant on unit balls, so
        // smeared integrals are finite double sums over leaves
        let w = Window::new(3, 1, 3).unwrap();
        let s = spec(3, 1, 0.05).with_uv(Some(0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let leaf_of = |b: &BallAddress| -> Vec<usize> {
            let n = w.branching().pow(b.layer as u32);
            let first = w.index_of(b) * n;
            (first..first + n).collect()
        };
        let k = s.kernel();
        for _ in 0..20 {
            let f = crate::gaussian::random_positive_testfn(&w, 3, &mut rng);
            let g = crate::gaussian::random_positive_testfn(&w, 3, &mut rng);
            let mut brute = 0.0;
            for (a, ca) in &f.terms {
                for (b, cb) in &g.terms {
                    for i in leaf_of(a) {
                        for j in leaf_of(b) {
                            let dist = match w.relation(&w.ball_at(0, i), &w.ball_at(0, j)).unwrap() {
                                BallRelation::Disjoint { split } => Some(split),
                                _ => None,
                            };
                            brute += ca * cb * k.value(dist).unwrap();
                        }
                    }
                }
            }
            let exact = covariance_smeared(&w, &f, &g, &s).unwrap();
            assert_relative_eq!(exact, brute, max_relative = 1e-12, epsilon = 1e-12);
            let sym = covariance_smeared(&w, &g, &f, &s).unwrap();
            assert_relative_eq!(exact, sym, max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn smeared_disjoint_unit_balls() {
        let w = Window::new(2, 3, 2).unwrap();
        let s = spec(2, 3, 0.1);
        let f = BallFunction::indicator(w.ball_at(0, 0));
        let g = BallFunction::indicator(w.ball_at(0, 1));
        assert_relative_eq!(
            covariance_smeared(&w, &f, &g, &s).unwrap(),
            s.c0() * 2f64.powf(-2.0 * s.phi()),
            max_relative = 1e-14
        );
        let sc = s.with_uv(Some(0));
        assert_relative_eq!(covariance_smeared(&w, &f, &f, &sc).unwrap(), sc.c_self(), max_relative = 1e-14);
    }

    #[test]
    fn cutoff_below_support_is_invisible() {
        // layers below the finest ball of f integrate to zero family by
        // family, so any cutoff at or below it gives the uncut value
        let w = Window::new(2, 3, 3).unwrap();
        let s = spec(2, 3, 0.1);
        let f = BallFunction::new(vec![(w.ball_at(1, 3), 1.0), (w.ball_at(2, 5), -0.5)]);
        let exact = covariance_smeared(&w, &f, &f, &s).unwrap();
        for r in -15..=1 {
            let v = covariance_smeared(&w, &f, &f, &s.with_uv(Some(r))).unwrap();
            assert_relative_eq!(v, exact, max_relative = 1e-12);
        }
        let coarse = covariance_smeared(&w, &f, &f, &s.with_uv(Some(2))).unwrap();
        assert!((coarse - exact).abs() > 1e-3 * exact);
    }

    #[test]
    fn scale_covariance_of_gram() {
        // dilating supports by p (ball (k, path) -> (k-1, [0] ++ path)) scales
        // the Gram matrix by p^{2[φ]-2d}
        let w = Window::new(3, 2, 3).unwrap();
        let s = spec(3, 2, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let fns: Vec<BallFunction> = (0..6).map(|_| random_positive_testfn(&w, 3, &mut rng)).collect();
        let dilate = |f: &BallFunction| {
            BallFunction::new(
                f.terms
                    .iter()
                    .map(|(b, c)| {
                        let mut path = vec![0];
                        path.extend(&b.path);
                        (BallAddress { layer: b.layer - 1, path }, *c)
                    })
                    .collect(),
            )
        };
        // the dilated ball is the image of the original ball's points
        let b = &fns[0].terms[0].0;
        let moved = w.ball_of(&w.center(b).unwrap().shift(1), b.layer - 1).unwrap();
        assert_eq!(moved, dilate(&BallFunction::indicator(b.clone())).terms[0].0);
        let factor = 3f64.powf(2.0 * s.phi() - 4.0);
        for f in &fns {
            for g in &fns {
                let m = covariance_smeared(&w, f, g, &s).unwrap();
                let md = covariance_smeared(&w, &dilate(f), &dilate(g), &s).unwrap();
                assert_relative_eq!(md, factor * m, max_relative = 1e-12, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn sampled_variances_match() {
        let w = Window::new(3, 1, 3).unwrap();
        let s = spec(3, 1, 0.1).with_uv(Some(0));
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let (mut z2, mut phi00, mut phi01, mut phi0far) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let cfg = sample_field(&w, &s, &mut rng);
            for fam in cfg.zeta[1].chunks(3) {
                assert!(fam.iter().sum::<f64>().abs() < 1e-12);
            }
            z2 += cfg.zeta[1][4].powi(2);
            let phi = cfg.leaf_field();
            phi00 += phi[0] * phi[0];
            phi01 += phi[0] * phi[1];
            phi0far += phi[0] * phi[26];
        }
        let checks = [
            (z2, (2.0 / 3.0) * s.layer_variance(1)),
            (phi00, s.c_self()),
            (phi01, s.kernel().value(Some(1)).unwrap()),
            (phi0far, s.kernel().value(Some(3)).unwrap()),
        ];
        for (sum, expected) in checks {
            let mean = sum / n as f64;
            // a product of Gaussians has variance at most 2 C(x,x)^2 + ...; use C_self^2 * 2
            let se = (2.0 * s.c_self().powi(2) / n as f64).sqrt();
            assert!((mean - expected).abs() < 4.0 * se, "{mean} vs {expected}");
        }
    }

    #[test]
    fn gamma_split_is_psd() {
        let w = Window::new(2, 2, 3).unwrap();
        for l in 1..=2 {
            let s = spec(2, 2, 0.1).with_uv(Some(0)).with_l(l);
            let rep = gamma_psd_check(&w, &s).unwrap();
            assert!(rep.spectrum.psd, "{rep:?}");
            assert!(rep.split_error < 1e-13);
        }
    }

    #[test]
    fn mobius_covariance_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut ok = 0;
        for _ in 0..300 {
            let f = mobius::random_word(3, 2, 5, 1, &mut rng);
            let x = crate::padic::random_point(3, 2, 2, 24, &mut rng);
            let y = crate::padic::random_point(3, 2, 2, 24, &mut rng);
            match mobius_covariance_check(&f, &x, &y) {
                Ok(v) => {
                    assert!(v, "{f} {x} {y}");
                    ok += 1;
                }
                Err(Error::Pole(_)) | Err(Error::Domain(_)) => {}
                Err(e) => panic!("{e}"),
            }
        }
        assert!(ok > 200);
    }

    #[test]
    fn os_gram_non_cutoff_is_psd() {
        let w = Window::new(3, 2, 3).unwrap();
        let s = spec(3, 2, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fns: Vec<_> = (0..24).map(|_| random_positive_testfn(&w, 3, &mut rng)).collect();
        let g = os_gram(&w, &fns, &s).unwrap();
        assert!(g.spectrum.psd, "{:?}", g.spectrum);
        assert!(g.matrix[0][0] >= 0.0);
        let single = os_gram(&w, &fns[..1], &s).unwrap();
        assert!(single.matrix[0][0] >= 0.0);
    }

    #[test]
    fn os_gram_rejects_bad_supports() {
        let w = Window::new(3, 1, 2).unwrap();
        let s = spec(3, 1, 0.1);
        // ball 0 at layer 1 contains x_1 = 0
        let f = BallFunction::indicator(w.ball_at(1, 0));
        assert!(matches!(os_gram(&w, &[f], &s), Err(Error::Domain(_))));
        let neg = BallFunction::indicator(w.ball_at(0, 2));
        assert!(matches!(os_gram(&w, &[neg], &s), Err(Error::Domain(_))));
        let w2 = Window::new(2, 1, 2).unwrap();
        let s2 = spec(2, 1, 0.1);
        assert!(os_gram(&w2, &[], &s2).is_err());
    }

    #[test]
    fn ball_sign_agrees_with_points() {
        let w = Window::new(5, 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 0..2 {
            for i in 0..w.layer_size(k) {
                let b = w.ball_at(k, i);
                let sb = ball_sign(&w, &b).unwrap();
                if sb == 0 {
                    continue;
                }
                for _ in 0..5 {
                    let off = crate::padic::random_point(5, 2, k, 10, &mut rng);
                    let x = w.center(&b).unwrap().add(&off).unwrap();
                    assert_eq!(mobius::sign(&x).unwrap(), sb);
                }
                let rb = reflect_ball(&w, &b).unwrap();
                assert_eq!(ball_sign(&w, &rb).unwrap(), -sb);
            }
        }
    }

    #[test]
    fn wick_square_variance() {
        let w = Window::new(2, 3, 2).unwrap();
        let s = spec(2, 3, 0.1);
        let zero = BallFunction::new(vec![]);
        assert_eq!(wick_square_smeared_variance(&w, &zero, 0, &s).unwrap().value, 0.0);
        let f = BallFunction::indicator(w.ball_at(1, 2));
        let mut last = 0.0;
        for r in (-12..=0).rev() {
            let v = wick_square_smeared_variance(&w, &f, r, &s).unwrap();
            assert!(!v.divergent);
            assert!(v.value > last);
            last = v.value;
        }
        // unit ball with cutoff 0: φ is constant there, Var(φ² - C) = 2 C²
        let u = BallFunction::indicator(w.ball_at(0, 0));
        let exact = wick_square_smeared_variance(&w, &u, 0, &s).unwrap().value;
        assert_relative_eq!(exact, 2.0 * s.c_self().powi(2), max_relative = 1e-13);
        let sc = s.with_uv(Some(0));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 50_000;
        let vals: Vec<f64> = (0..n)
            .map(|_| {
                let phi = sample_field(&w, &sc, &mut rng).leaf_field()[0];
                phi * phi - sc.c_self()
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // fourth central moment of φ² - C is 60 C⁴, so the sample variance has spread √(56/n) C²
        let se = (56.0f64).sqrt() * sc.c_self().powi(2) / (n as f64).sqrt();
        assert!((var - exact).abs() < 3.0 * se, "{var} vs {exact}");
    }
}
