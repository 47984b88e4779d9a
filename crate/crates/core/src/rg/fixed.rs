//! Fixed points, linearization, scaling dimensions and critical tuning.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{poly_fixed_point, wick, BlockIntegrator, BoltzmannFactor, Grid, RGParams};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-9,
            max_iter: 40,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FixedPoint {
    pub factor: BoltzmannFactor,
    /// `‖RG F - F‖∞` at the returned factor.
    pub residual: f64,
    pub iterations: usize,
    /// Residual after every Newton iteration.
    pub history: Vec<f64>,
    pub mu: f64,
    pub g: f64,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Newton iteration on `G(F) = RG F - F` in the even, gauge-fixed
/// coordinates, with the analytic Jacobian and a backtracking line search.
pub fn find_fixed_point(bi: &BlockIntegrator, init: &BoltzmannFactor, opts: NewtonOptions) -> Result<FixedPoint> {
    let grid = bi.grid();
    let c = bi.params().c_self();
    let mut x = init.even_coords();
    let mut history = Vec::new();
    for it in 0..opts.max_iter {
        let f = BoltzmannFactor::from_even_coords(grid, &x);
        let (rf, jac) = bi.step_with_jacobian(&f)?;
        let gvec: Vec<f64> = rf.even_coords().iter().zip(&x).map(|(a, b)| a - b).collect();
        let res = sup(&gvec);
        history.push(res);
        if res <= opts.tol {
            return Ok(FixedPoint {
                mu: f.projection(2, c),
                g: f.projection(4, c),
                factor: f,
                residual: res,
                iterations: it,
                history,
            });
        }
        let m = x.len();
        let a = jac - DMatrix::identity(m, m);
        let rhs = -DVector::from_vec(gvec);
        let delta = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numeric("singular Newton system".into()))?;
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(x, d)| x + step * d).collect();
            let ft = BoltzmannFactor::from_even_coords(grid, &trial);
            let ok = bi.step(&ft).ok().map(|r| {
                let g: Vec<f64> = r.even_coords().iter().zip(&trial).map(|(a, b)| a - b).collect();
                sup(&g)
            });
            if matches!(ok, Some(r) if r < res) || step < 1.0 / 64.0 {
                x = trial;
                break;
            }
            step *= 0.5;
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        detail: format!("fixed point residual history {history:?}"),
    })
}

/// Starting point for [`find_fixed_point`]: the second-order polynomial
/// fixed point sampled on the grid.
pub fn seed_from_poly(params: &RGParams, grid: Grid) -> Result<BoltzmannFactor> {
    let w = poly_fixed_point(params)?;
    Ok(BoltzmannFactor::from_wick(grid, &w))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Linearization {
    /// Eigenvalues sorted by decreasing modulus.
    pub eigenvalues: Vec<Complex64>,
    /// Real eigenvectors (positive-side `log F` perturbations) of the leading
    /// real eigenvalues, in order.
    pub eigenvectors: Vec<Vec<f64>>,
    /// `σ_max / σ_min` of the Jacobian.
    pub condition: f64,
    pub warnings: Vec<String>,
}

/// Spectrum of the gauge-fixed, even Jacobian of the RG step at `f`.
pub fn linearize(bi: &BlockIntegrator, f: &BoltzmannFactor, vectors: usize) -> Result<Linearization> {
    let (_, jac) = bi.step_with_jacobian(f)?;
    let mut eig: Vec<Complex64> = jac.complex_eigenvalues().iter().cloned().collect();
    eig.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    let sv = jac.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = smax / smin;
    let mut warnings = Vec::new();
    if !(condition < 1e12) {
        warnings.push(format!("Jacobian is ill-conditioned (condition estimate {condition:.3e})"));
    }
    let m = jac.nrows();
    let mut eigenvectors = Vec::new();
    for lam in eig.iter().filter(|l| l.im.abs() < 1e-10 * l.norm().max(1e-300)).take(vectors) {
        // inverse iteration with a slightly shifted eigenvalue
        let shift = lam.re * (1.0 + 1e-10) + 1e-14;
        let lu = (jac.clone() - DMatrix::identity(m, m) * shift).lu();
        let mut v = DVector::from_element(m, 1.0 / (m as f64).sqrt());
        for _ in 0..8 {
            let Some(w) = lu.solve(&v) else { break };
            let n = w.norm();
            if !(n.is_finite() && n > 0.0) {
                break;
            }
            v = w / n;
        }
        eigenvectors.push(v.iter().cloned().collect());
    }
    Ok(Linearization {
        eigenvalues: eig,
        eigenvectors,
        condition,
        warnings,
    })
}

/// `Δ = d - ln λ / (l ln p)` from `λ = L^{d - Δ}`.
pub fn dimension_from_eigenvalue(lambda: f64, params: &RGParams) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::domain(format!("eigenvalue {lambda} is not positive")));
    }
    Ok(params.d as f64 - lambda.ln() / (params.l as f64 * (params.p as f64).ln()))
}

/// Eigenvalue of the step at `F ≡ 1` along `:φⁿ:` by central differences of
/// the `:ψⁿ:` projection.
pub fn gaussian_eigen_check(bi: &BlockIntegrator, n: u32) -> Result<f64> {
    if n < 2 || n % 2 == 1 {
        return Err(Error::config("n must be even and at least 2"));
    }
    let grid = bi.grid();
    let c = bi.params().c_self();
    // keep δ·:φⁿ: of unit size in the bulk; the O(δ²) error of the central
    // difference grows like the n!-sized cubic cumulant
    let nfact: f64 = (1..=n).map(|k| k as f64).product();
    let delta = 1e-5 / (c.powf(n as f64 / 2.0) * nfact);
    let proj = |s: f64| -> Result<f64> {
        let f = BoltzmannFactor::from_log_fn(grid, |x| -s * wick(n, c, x));
        Ok(bi.step(&f)?.projection(n, c))
    };
    Ok((proj(delta)? - proj(-delta)?) / (2.0 * delta))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnomalousDimension {
    pub eps: f64,
    pub lambda2: f64,
    pub phi2: f64,
    pub eta2: f64,
    pub fixed_point: FixedPoint,
    pub linearization: Linearization,
}

/// `η₂ = [φ²] - 2[φ]` from the leading eigenvalue at the fixed point.
pub fn anomalous_dimension(bi: &BlockIntegrator, opts: NewtonOptions) -> Result<AnomalousDimension> {
    let params = *bi.params();
    let seed = seed_from_poly(&params, bi.grid())?;
    let fp = find_fixed_point(bi, &seed, opts)?;
    let lin = linearize(bi, &fp.factor, 2)?;
    let lead = lin.eigenvalues[0];
    if lead.im.abs() > 1e-8 * lead.norm() {
        return Err(Error::Numeric(format!("leading eigenvalue {lead} is not real")));
    }
    let phi2 = dimension_from_eigenvalue(lead.re, &params)?;
    Ok(AnomalousDimension {
        eps: params.eps,
        lambda2: lead.re,
        phi2,
        eta2: phi2 - 2.0 * params.phi(),
        fixed_point: fp,
        linearization: lin,
    })
}

/// Fixed-point dump: parameters, grid, `log F`, leading eigenvalues and
/// the dimensions they imply.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub params: RGParams,
    pub grid: Grid,
    pub gauge: String,
    pub log_f: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub mu: f64,
    pub g: f64,
    pub eigenvalues: Vec<[f64; 2]>,
    pub dimensions: Vec<Option<f64>>,
}

impl FixedPointReport {
    pub fn new(params: RGParams, fp: &FixedPoint, lin: &Linearization, count: usize) -> Self {
        let eig: Vec<Complex64> = lin.eigenvalues.iter().take(count).cloned().collect();
        FixedPointReport {
            params,
            grid: fp.factor.grid,
            gauge: "log F(0) = 0; the constant mode is removed from the spectrum".into(),
            log_f: fp.factor.log_f.clone(),
            residual: fp.residual,
            iterations: fp.iterations,
            mu: fp.mu,
            g: fp.g,
            eigenvalues: eig.iter().map(|z| [z.re, z.im]).collect(),
            dimensions: eig
                .iter()
                .map(|z| {
                    (z.im.abs() < 1e-10 * z.norm())
                        .then(|| dimension_from_eigenvalue(z.re, &params).ok())
                        .flatten()
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowStep {
    pub step: usize,
    pub c2: f64,
    pub c4: f64,
    /// `‖log F_step - log F_{step-1}‖∞`; 0 for the initial factor.
    pub residual: f64,
    /// `log` of the share of the Gaussian-weighted mass near the grid edge.
    pub edge_mass: f64,
}

/// Iterates the RG step, recording projections and diagnostics. Stops early
/// (returning what it has) if a step fails numerically.
pub fn flow(bi: &BlockIntegrator, f0: &BoltzmannFactor, steps: usize) -> (Vec<FlowStep>, Vec<BoltzmannFactor>, Option<Error>) {
    let c = bi.params().c_self();
    let record = |k: usize, f: &BoltzmannFactor, prev: Option<&BoltzmannFactor>| FlowStep {
        step: k,
        c2: f.projection(2, c),
        c4: f.projection(4, c),
        residual: prev.map_or(0.0, |p| {
            f.log_f
                .iter()
                .zip(&p.log_f)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        }),
        edge_mass: f.edge_mass(c, EDGE_FRACTION),
    };
    let mut traj = vec![record(0, f0, None)];
    let mut factors = vec![f0.clone()];
    for k in 1..=steps {
        match bi.step(factors.last().expect("nonempty")) {
            Ok(f) => {
                traj.push(record(k, &f, factors.last()));
                factors.push(f);
            }
            Err(e) => return (traj, factors, Some(e)),
        }
    }
    (traj, factors, None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrajectoryClass {
    /// `c₂ → +∞`.
    Massive,
    /// `c₂ → -∞`.
    Unstable,
    /// Neither within the horizon and no drift: sits on the fixed point.
    Critical,
}

/// Log share of the weight beyond `EDGE_FRACTION·Φmax` above which the
/// field is taken to be running off to the broken phase.
const EDGE_ESCAPE: f64 = -20.0;
const EDGE_FRACTION: f64 = 0.8;

/// Runs the flow from `f0` until `|c₂| > 1`, mass escapes to the grid edge,
/// a numeric failure, or the horizon. Classifies by the sign of `c₂`
/// (escape counts as unstable), or of its last increment when the horizon
/// is reached first.
pub fn classify(bi: &BlockIntegrator, f0: &BoltzmannFactor, horizon: usize) -> TrajectoryClass {
    let c = bi.params().c_self();
    let sign = |x: f64| {
        if x > 0.0 {
            TrajectoryClass::Massive
        } else if x < 0.0 {
            TrajectoryClass::Unstable
        } else {
            TrajectoryClass::Critical
        }
    };
    let mut f = f0.clone();
    let mut c2 = f.projection(2, c);
    let mut prev = c2;
    for _ in 0..=horizon {
        if f.edge_mass(c, EDGE_FRACTION) > EDGE_ESCAPE {
            return TrajectoryClass::Unstable;
        }
        if c2.abs() > 1.0 {
            return sign(c2);
        }
        match bi.step(&f) {
            Ok(next) => f = next,
            Err(_) => return sign(c2),
        }
        prev = c2;
        c2 = f.projection(2, c);
    }
    sign(c2 - prev)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Tuning {
    pub mu_c: f64,
    /// Final bracket width.
    pub width: f64,
    pub bisections: usize,
}

/// Bisection on a one-parameter family: `family(t)` must be unstable at `lo`
/// and massive at `hi`.
pub fn tune_family(
    bi: &BlockIntegrator,
    family: impl Fn(f64) -> BoltzmannFactor,
    lo: f64,
    hi: f64,
    horizon: usize,
    tol: f64,
) -> Result<Tuning> {
    let (mut lo, mut hi) = (lo, hi);
    let cl = classify(bi, &family(lo), horizon);
    let ch = classify(bi, &family(hi), horizon);
    if cl != TrajectoryClass::Unstable || ch != TrajectoryClass::Massive {
        return Err(Error::Bracket(format!(
            "family classifies as {cl:?} at {lo} and {ch:?} at {hi}"
        )));
    }
    let mut bisections = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        bisections += 1;
        match classify(bi, &family(mid), horizon) {
            TrajectoryClass::Massive => hi = mid,
            TrajectoryClass::Unstable => lo = mid,
            TrajectoryClass::Critical => {
                return Ok(Tuning {
                    mu_c: mid,
                    width: 0.0,
                    bisections,
                })
            }
        }
    }
    Ok(Tuning {
        mu_c: 0.5 * (lo + hi),
        width: hi - lo,
        bisections,
    })
}

/// Critical mass for `F = exp(-g :φ⁴: - μ :φ²:)` within `[lo, hi]`.
pub fn tune_critical_mu(bi: &BlockIntegrator, g: f64, lo: f64, hi: f64, horizon: usize, tol: f64) -> Result<Tuning> {
    let grid = bi.grid();
    let c = bi.params().c_self();
    tune_family(bi, |mu| BoltzmannFactor::quartic(grid, g, mu, c), lo, hi, horizon, tol)
}

/// Critical mass along `F*·exp(-δ :φ²:)`: `μ* + δ_c`. Away from the pure
/// quartic line this is the self-consistent tuning at `g = g*`.
pub fn tune_at_fixed_point(bi: &BlockIntegrator, fp: &FixedPoint, horizon: usize, tol: f64) -> Result<Tuning> {
    let c = bi.params().c_self();
    let base = &fp.factor;
    let family = |delta: f64| {
        let mut f = base.clone();
        for (lf, x) in f.log_f.iter_mut().zip(base.grid.nodes()) {
            *lf -= delta * wick(2, c, x);
        }
        f.normalize();
        f
    };
    let t = tune_family(bi, family, -0.05, 0.05, horizon, tol)?;
    Ok(Tuning {
        mu_c: fp.mu + t.mu_c,
        ..t
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dimension_dictionary() {
        let r = RGParams::new(2, 3, 0.1).unwrap();
        assert_relative_eq!(dimension_from_eigenvalue(1.0, &r).unwrap(), 3.0);
        let l2 = r.gaussian_eigenvalue(2);
        assert_relative_eq!(dimension_from_eigenvalue(l2, &r).unwrap(), 2.0 * r.phi(), epsilon = 1e-13);
        assert!(dimension_from_eigenvalue(0.0, &r).is_err());
        let r2 = r.with_l(2);
        assert_relative_eq!(
            dimension_from_eigenvalue(r2.gaussian_eigenvalue(4), &r2).unwrap(),
            4.0 * r.phi(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn gaussian_eigenvalues() {
        for eps in [0.0, 0.1] {
            let r = RGParams::new(2, 3, eps).unwrap();
            let bi = BlockIntegrator::new(r, Grid::default()).unwrap();
            for n in [2, 4, 6] {
                let lam = gaussian_eigen_check(&bi, n).unwrap();
                assert_relative_eq!(lam, r.gaussian_eigenvalue(n), max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn eps_zero_fixed_point_is_trivial() {
        let r = RGParams::new(2, 3, 0.0).unwrap();
        let bi = BlockIntegrator::new(r, Grid::default()).unwrap();
        let fp = find_fixed_point(&bi, &BoltzmannFactor::one(Grid::default()), NewtonOptions::default()).unwrap();
        assert_eq!(fp.iterations, 0);
        assert!(sup(&fp.factor.log_f) < 1e-10);
    }

    fn fixed_point(eps: f64) -> (BlockIntegrator, FixedPoint) {
        let r = RGParams::new(2, 3, eps).unwrap();
        let bi = BlockIntegrator::new(r, Grid::default()).unwrap();
        let seed = seed_from_poly(&r, bi.grid()).unwrap();
        let fp = find_fixed_point(&bi, &seed, NewtonOptions::default()).unwrap();
        (bi, fp)
    }

    #[test]
    fn nontrivial_fixed_point() {
        let mut gs = Vec::new();
        for eps in [0.05, 0.1, 0.2] {
            let (bi, fp) = fixed_point(eps);
            assert!(fp.residual <= 1e-9);
            assert!(fp.g > 0.0);
            assert!(fp.factor.asymmetry() == 0.0);
            let again = bi.step(&fp.factor).unwrap();
            assert!(sup(&again.even_coords().iter().zip(fp.factor.even_coords()).map(|(a, b)| a - b).collect::<Vec<_>>()) <= 1e-9);
            // suppressed away from the origin
            let g = bi.grid();
            for (i, lf) in fp.factor.log_f.iter().enumerate() {
                if g.node(i).abs() > 3.0 {
                    assert!(*lf <= 0.0, "log F*({}) = {lf}", g.node(i));
                }
            }
            gs.push(fp.g / eps);
        }
        // g* = O(ε): g*/ε varies slowly
        for w in gs.windows(2) {
            assert!((w[1] / w[0] - 1.0).abs() < 0.3, "{gs:?}");
        }
    }

    #[test]
    fn spectra() {
        let r = RGParams::new(2, 3, 0.1).unwrap();
        let bi = BlockIntegrator::new(r, Grid::default()).unwrap();
        let lin = linearize(&bi, &BoltzmannFactor::one(bi.grid()), 0).unwrap();
        for n in [2, 4, 6] {
            let want = r.gaussian_eigenvalue(n);
            let best = lin.eigenvalues.iter().map(|z| (z.re - want).abs() / want + z.im.abs()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-4, "n={n}: {best}");
        }
        let (bi, fp) = fixed_point(0.1);
        let lin = linearize(&bi, &fp.factor, 1).unwrap();
        let relevant = lin.eigenvalues.iter().filter(|z| z.norm() > 1.0).count();
        assert_eq!(relevant, 1);
        assert!(lin.eigenvalues[..4].iter().all(|z| z.im == 0.0));
        // the leading eigenvector is a φ²-like even deformation
        let v = &lin.eigenvectors[0];
        assert_eq!(v.len(), bi.grid().mid());
    }

    #[test]
    fn semigroup() {
        let r = RGParams::new(2, 3, 0.1).unwrap();
        let grid = Grid::default();
        let f = BoltzmannFactor::quartic(grid, 0.01, 0.02, r.c_self());
        let one = BlockIntegrator::new(r, grid).unwrap();
        let two = BlockIntegrator::new(r.with_l(2), grid).unwrap();
        let a = one.step(&one.step(&f).unwrap()).unwrap();
        let b = two.step(&f).unwrap();
        let mid = grid.mid();
        for i in mid..mid + 150 {
            assert!((a.log_f[i] - b.log_f[i]).abs() < 1e-6);
        }
        assert_relative_eq!(
            dimension_from_eigenvalue(gaussian_eigen_check(&two, 4).unwrap(), two.params()).unwrap(),
            4.0 * r.phi(),
            epsilon = 1e-4
        );
    }

    #[test]
    fn tuning_is_self_consistent() {
        let (bi, fp) = fixed_point(0.1);
        let t = tune_at_fixed_point(&bi, &fp, 40, 1e-12).unwrap();
        assert!((t.mu_c - fp.mu).abs() < 1e-6, "{t:?} vs {}", fp.mu);
        let q = tune_critical_mu(&bi, fp.g, -0.05, 0.05, 40, 1e-12).unwrap();
        // flipping is monotone along the quartic line
        let c = bi.params().c_self();
        let classes: Vec<_> = [-0.01, -0.001, q.mu_c - 1e-6, q.mu_c + 1e-6, 0.001, 0.01]
            .iter()
            .map(|m| classify(&bi, &BoltzmannFactor::quartic(bi.grid(), fp.g, *m, c), 40))
            .collect();
        let first_massive = classes.iter().position(|c| *c == TrajectoryClass::Massive).unwrap();
        assert!(classes[..first_massive].iter().all(|c| *c == TrajectoryClass::Unstable));
        assert!(classes[first_massive..].iter().all(|c| *c == TrajectoryClass::Massive));
    }

    #[test]
    fn tuning_on_the_gaussian_line() {
        let r = RGParams::new(2, 3, 0.1).unwrap();
        let bi = BlockIntegrator::new(r, Grid::default()).unwrap();
        let t = tune_critical_mu(&bi, 0.0, -0.25, 0.5, 30, 1e-12).unwrap();
        assert!(t.mu_c.abs() < 1e-11, "{t:?}");
        assert!(tune_critical_mu(&bi, 0.0, 0.1, 0.5, 30, 1e-12).is_err());
    }
}
