//! Exact finite-window correlations of the interacting hierarchical measure
//! by dynamic programming over the tree.
//!
//! In rescaled layer variables a ball `B` at layer `k` carries
//! `ψ_B = p^{k[φ]} Ψ_B`, where `Ψ_B` is the ζ-field summed over the layers
//! `>= k` above `B` plus the top field. Children satisfy
//! `ψ_c = a ψ_B + ξ_c` with ξ the zero-sum sibling Gaussian, so a vertex
//! table is `T_B(ψ) = E Π_c T_c(aψ + ξ_c)` with leaves carrying their
//! Boltzmann factors, and the root field is integrated against `N(0, C)`.
//! Moments carry, along the paths of marked leaves, the conditional moment
//! `T_B^{(m)} / T_B` of the insertions below `B`.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::padic::{distance, PAdicPoint};
use crate::rg::{wick, BlockIntegrator, BoltzmannFactor, ChildGroup, Grid, RGParams};
use crate::tree::Window;

/// Couplings of `exp(-g :φ⁴: - μ :φ²:)` on every unit ball, Wick-ordered at
/// the cutoff self-covariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionSpec {
    pub g: f64,
    pub mu: f64,
    /// A uniform leaf factor used instead of `(g, μ)` (e.g. an RG image).
    pub leaf: Option<BoltzmannFactor>,
    /// Per-leaf `(g, μ)` overrides by leaf index.
    pub local: BTreeMap<usize, (f64, f64)>,
}

impl InteractionSpec {
    pub fn uniform(g: f64, mu: f64) -> Self {
        InteractionSpec {
            g,
            mu,
            leaf: None,
            local: BTreeMap::new(),
        }
    }

    pub fn gaussian() -> Self {
        Self::uniform(0.0, 0.0)
    }

    pub fn from_factor(f: BoltzmannFactor) -> Self {
        InteractionSpec {
            leaf: Some(f),
            ..Self::gaussian()
        }
    }

    pub fn with_local(mut self, leaf: usize, g: f64, mu: f64) -> Self {
        self.local.insert(leaf, (g, mu));
        self
    }

    pub fn validate(&self, window: &Window) -> Result<()> {
        let couplings = std::iter::once((self.g, self.mu)).chain(self.local.values().copied());
        for (g, mu) in couplings {
            if !(g >= 0.0 && g.is_finite() && mu.is_finite()) {
                return Err(Error::config(format!("couplings need g >= 0 and finite μ, got ({g}, {mu})")));
            }
        }
        if let Some(&leaf) = self.local.keys().next_back() {
            if leaf >= window.leaf_count() {
                return Err(Error::config(format!("leaf index {leaf} outside the window")));
            }
        }
        if let Some(f) = &self.leaf {
            f.validate()?;
        }
        Ok(())
    }
}

struct Table {
    /// `log T` normalized to 0 at ψ = 0.
    log_t: Vec<f64>,
    /// `log T(0)` before normalization.
    scale: f64,
}

/// Vertex tables of one window and interaction.
pub struct Correlator {
    window: Window,
    bi: BlockIntegrator,
    c: f64,
    tables: Vec<Table>,
    /// Table id of every vertex, by layer and index within the layer.
    ids: Vec<Vec<usize>>,
}

impl Correlator {
    pub fn new(window: Window, params: RGParams, grid: Grid, spec: &InteractionSpec) -> Result<Self> {
        if params.p != window.p || params.d != window.d {
            return Err(Error::config("window and RG parameters disagree on p or d"));
        }
        if params.l != 1 {
            return Err(Error::Unsupported("correlators are built one layer at a time (l = 1)".into()));
        }
        spec.validate(&window)?;
        let bi = BlockIntegrator::new(params, grid)?;
        let c = params.c_self();
        let b = window.branching();
        let mut tables = Vec::new();

        let leaf_table = |g: f64, mu: f64| {
            let log_t: Vec<f64> = grid.nodes().iter().map(|&x| -g * wick(4, c, x) - mu * wick(2, c, x)).collect();
            let scale = log_t[grid.mid()];
            Table {
                log_t: log_t.iter().map(|v| v - scale).collect(),
                scale,
            }
        };
        let uniform = match &spec.leaf {
            Some(f) => {
                if f.grid != grid {
                    return Err(Error::config("leaf factor lives on a different grid"));
                }
                let scale = f.log_f[grid.mid()];
                Table {
                    log_t: f.log_f.iter().map(|v| v - scale).collect(),
                    scale,
                }
            }
            None => leaf_table(spec.g, spec.mu),
        };
        tables.push(uniform);
        let mut leaf_ids: HashMap<(u64, u64), usize> = HashMap::new();
        let mut ids = vec![vec![0usize; window.leaf_count()]];
        for (&leaf, &(g, mu)) in &spec.local {
            let key = (g.to_bits(), mu.to_bits());
            let id = *leaf_ids.entry(key).or_insert_with(|| {
                tables.push(leaf_table(g, mu));
                tables.len() - 1
            });
            ids[0][leaf] = id;
        }

        let mut interned: HashMap<Vec<usize>, usize> = HashMap::new();
        for k in 1..=window.top {
            let below = &ids[(k - 1) as usize];
            let mut layer = Vec::with_capacity(window.layer_size(k));
            for parent in 0..window.layer_size(k) {
                let mut key = below[parent * b..(parent + 1) * b].to_vec();
                key.sort_unstable();
                let id = match interned.get(&key) {
                    Some(&id) => id,
                    None => {
                        let t = Self::build(&bi, &tables, &key)?;
                        tables.push(t);
                        interned.insert(key, tables.len() - 1);
                        tables.len() - 1
                    }
                };
                layer.push(id);
            }
            ids.push(layer);
        }
        Ok(Correlator {
            window,
            bi,
            c,
            tables,
            ids,
        })
    }

    fn groups<'a>(tables: &'a [Table], children: &[usize]) -> Vec<ChildGroup<'a>> {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for &c in children {
            *counts.entry(c).or_default() += 1;
        }
        counts
            .into_iter()
            .map(|(id, count)| ChildGroup {
                log_t: &tables[id].log_t,
                count,
                ratio: None,
            })
            .collect()
    }

    fn build(bi: &BlockIntegrator, tables: &[Table], children: &[usize]) -> Result<Table> {
        let grid = bi.grid();
        let groups = Self::groups(tables, children);
        let mid = grid.mid();
        let half: Vec<f64> = (mid..grid.n)
            .into_par_iter()
            .map(|i| bi.block_general(&groups, i).map(|v| v.log_w))
            .collect::<Result<_>>()?;
        let scale: f64 = half[0] + children.iter().map(|&c| tables[c].scale).sum::<f64>();
        let mut log_t = vec![0.0; grid.n];
        for (j, v) in half.iter().enumerate() {
            log_t[mid + j] = v - half[0];
            log_t[mid - j] = v - half[0];
        }
        Ok(Table { log_t, scale })
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn params(&self) -> &RGParams {
        self.bi.params()
    }

    pub fn grid(&self) -> Grid {
        self.bi.grid()
    }

    /// Number of distinct vertex tables (a uniform spec needs one per layer).
    pub fn table_count(&self) -> usize {
        self.tables.len()
    }

    fn root(&self) -> &Table {
        &self.tables[self.ids[self.window.top as usize][0]]
    }

    /// `log ∫ T(ψ) r(ψ) N(0, C)(dψ)` and the same without `r`.
    fn root_average(&self, r: Option<&[f64]>) -> (f64, f64) {
        let grid = self.grid();
        let t = &self.root().log_t;
        let lw: Vec<f64> = grid
            .nodes()
            .iter()
            .zip(t)
            .map(|(x, lt)| lt - x * x / (2.0 * self.c))
            .collect();
        let max = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = lw.iter().map(|v| (v - max).exp()).collect();
        let z: f64 = w.iter().sum();
        let log_z = max + (z * grid.h() / (2.0 * std::f64::consts::PI * self.c).sqrt()).ln();
        let m = r.map_or(1.0, |r| w.iter().zip(r).map(|(w, r)| w * r).sum::<f64>() / z);
        (log_z, m)
    }

    /// `log Z` for the unnormalized leaf factors.
    pub fn log_partition(&self) -> f64 {
        self.root().scale + self.root_average(None).0
    }

    /// `⟨φ(x₁) ⋯ φ(x_n)⟩` for points of the window.
    pub fn moment(&self, points: &[PAdicPoint]) -> Result<f64> {
        if points.is_empty() {
            return Ok(1.0);
        }
        let grid = self.grid();
        let b = self.window.branching();
        let nodes = grid.nodes();
        let mut marked: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let mut multiplicity: BTreeMap<usize, i32> = BTreeMap::new();
        for x in points {
            *multiplicity.entry(self.window.leaf_index(x)?).or_default() += 1;
        }
        for (leaf, m) in multiplicity {
            marked.insert(leaf, nodes.iter().map(|x| x.powi(m)).collect());
        }
        for k in 1..=self.window.top {
            let below = &self.ids[(k - 1) as usize];
            let mut parents: BTreeMap<usize, Vec<(usize, Vec<f64>)>> = BTreeMap::new();
            for (child, r) in marked {
                parents.entry(child / b).or_default().push((child, r));
            }
            let mut next = BTreeMap::new();
            for (parent, kids) in parents {
                let unmarked: Vec<usize> = (parent * b..(parent + 1) * b)
                    .filter(|c| kids.iter().all(|(m, _)| m != c))
                    .map(|c| below[c])
                    .collect();
                let mut groups = Self::groups(&self.tables, &unmarked);
                for (child, r) in &kids {
                    groups.push(ChildGroup {
                        log_t: &self.tables[below[*child]].log_t,
                        count: 1,
                        ratio: Some(r),
                    });
                }
                let ratio: Vec<f64> = (0..grid.n)
                    .into_par_iter()
                    .map(|i| {
                        self.bi
                            .block_general(&groups, i)
                            .map(|v| v.ratio.expect("marked block"))
                    })
                    .collect::<Result<_>>()?;
                next.insert(parent, ratio);
            }
            marked = next;
        }
        let r = marked.remove(&0).expect("root carries the insertions");
        Ok(self.root_average(Some(&r)).1)
    }

    pub fn two_point(&self, x: &PAdicPoint, y: &PAdicPoint) -> Result<f64> {
        self.moment(&[x.clone(), y.clone()])
    }

    pub fn four_point(&self, xs: [&PAdicPoint; 4]) -> Result<f64> {
        self.moment(&xs.map(|x| x.clone()))
    }
}

/// `log Z` of the window.
pub fn partition_function(window: Window, params: RGParams, grid: Grid, spec: &InteractionSpec) -> Result<f64> {
    Ok(Correlator::new(window, params, grid, spec)?.log_partition())
}

/// Leaf points at distance `p^j` from leaf 0, `1 <= j <= S`.
pub fn pair_at_distance(window: &Window, j: i32) -> Result<(PAdicPoint, PAdicPoint)> {
    if j < 1 || j > window.top {
        return Err(Error::domain(format!("distance p^{j} outside 1..=S")));
    }
    let b = window.branching();
    Ok((window.leaf_point(0), window.leaf_point(b.pow((j - 1) as u32))))
}

/// Least-squares line `y = α + βx` with the standard error of β.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let beta = sxy / sxx;
    let alpha = my - beta * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - alpha - beta * a).powi(2)).sum();
    let stderr = if x.len() > 2 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    (alpha, beta, stderr)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExponentFit {
    /// Distance exponents `j` (`|x - y| = p^j`) used in the fit.
    pub distances: Vec<i32>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub stderr: f64,
    pub expected: f64,
    pub relative_deviation: f64,
    pub excluded: String,
}

/// Log-log slope of the two-point function over `p^1 .. p^{S-1}`.
pub fn critical_exponent_fit(corr: &Correlator) -> Result<ExponentFit> {
    let w = corr.window();
    if w.top < 4 {
        return Err(Error::domain(format!(
            "need at least 3 distances p^1..p^(S-1), window has S = {}",
            w.top
        )));
    }
    let lnp = (w.p as f64).ln();
    let distances: Vec<i32> = (1..w.top).collect();
    let values: Vec<f64> = distances
        .iter()
        .map(|&j| {
            let (x, y) = pair_at_distance(w, j)?;
            corr.two_point(&x, &y)
        })
        .collect::<Result<_>>()?;
    if let Some(v) = values.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::Numeric(format!("two-point value {v} is not positive")));
    }
    let xs: Vec<f64> = distances.iter().map(|&j| j as f64 * lnp).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let (_, slope, stderr) = fit_line(&xs, &ys);
    let expected = -2.0 * corr.params().phi();
    Ok(ExponentFit {
        distances,
        values,
        slope,
        stderr,
        expected,
        relative_deviation: (slope - expected).abs() / expected.abs(),
        excluded: format!("distances p^0 (UV plateau) and p^{} (outer shell)", w.top),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OpeRow {
    pub distance: i32,
    pub two_point: f64,
    pub four_point: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OpeReport {
    pub rows: Vec<OpeRow>,
    pub spectator_two_point: f64,
    /// `c` in `⟨φ(x)φ(y)⟩ ≈ c |x-y|^{-2[φ]}`, averaged over the rows.
    pub leading_coefficient: f64,
    /// Largest relative deviation of a row's coefficient from the average.
    pub leading_spread: f64,
    /// Log-log slope of the residual against `|x - y|`.
    pub residual_exponent: f64,
    pub residual_stderr: f64,
}

/// Subtracts the identity channel `c |x-y|^{-2[φ]} ⟨φ(z₁)φ(z₂)⟩` from the
/// four-point function as `y → x` and fits the power of what remains.
pub fn ope_leading_check(
    corr: &Correlator,
    x: &PAdicPoint,
    ys: &[PAdicPoint],
    z1: &PAdicPoint,
    z2: &PAdicPoint,
) -> Result<OpeReport> {
    let w = corr.window();
    if ys.len() < 2 {
        return Err(Error::domain("need at least two separations"));
    }
    let exp_of = |a: &PAdicPoint, b: &PAdicPoint| -> Result<i32> {
        distance(a, b)?
            .exponent()
            .ok_or_else(|| Error::domain("coincident points"))
    };
    let seps: Vec<i32> = ys.iter().map(|y| exp_of(x, y)).collect::<Result<_>>()?;
    let max_sep = *seps.iter().max().expect("nonempty");
    for z in [z1, z2] {
        if exp_of(x, z)? < max_sep + 2 {
            return Err(Error::domain(format!(
                "spectators must sit at distance >= p^{} from x",
                max_sep + 2
            )));
        }
    }
    let phi = corr.params().phi();
    let p = w.p as f64;
    let g_z = corr.two_point(z1, z2)?;
    let mut rows = Vec::new();
    let mut coeffs = Vec::new();
    for (y, &j) in ys.iter().zip(&seps) {
        let g2 = corr.two_point(x, y)?;
        let g4 = corr.four_point([x, y, z1, z2])?;
        coeffs.push(g2 * p.powf(2.0 * phi * j as f64));
        rows.push(OpeRow {
            distance: j,
            two_point: g2,
            four_point: g4,
            residual: 0.0,
        });
    }
    let c = coeffs.iter().sum::<f64>() / coeffs.len() as f64;
    let spread = coeffs.iter().map(|v| (v / c - 1.0).abs()).fold(0.0, f64::max);
    for r in rows.iter_mut() {
        r.residual = r.four_point - c * p.powf(-2.0 * phi * r.distance as f64) * g_z;
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.distance as f64 * p.ln()).collect();
    let ys_log: Vec<f64> = rows.iter().map(|r| r.residual.abs().ln()).collect();
    let (_, slope, stderr) = fit_line(&xs, &ys_log);
    Ok(OpeReport {
        rows,
        spectator_two_point: g_z,
        leading_coefficient: c,
        leading_spread: spread,
        residual_exponent: slope,
        residual_stderr: stderr,
    })
}

/// Standard OPE configuration: `x` at leaf 0, `y` at distances
/// `p^1 .. p^{S-2}`, spectators at distance `p^S` from `x` (and from each
/// other at `p^{S-1}`).
pub fn ope_default_points(window: &Window) -> Result<(PAdicPoint, Vec<PAdicPoint>, PAdicPoint, PAdicPoint)> {
    if window.top < 4 {
        return Err(Error::domain("the OPE check needs S >= 4 for two separations"));
    }
    let b = window.branching();
    let s = window.top as u32;
    let ys = (1..window.top - 1)
        .map(|j| window.leaf_point(b.pow((j - 1) as u32)))
        .collect();
    let z1 = window.leaf_point(b.pow(s - 1));
    let z2 = window.leaf_point(b.pow(s - 1) + b.pow(s - 2));
    Ok((window.leaf_point(0), ys, z1, z2))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub x: String,
    pub y: String,
    /// `log_p` of the distance from the probe pair to the corridor; `None`
    /// when a probe lies in the corridor.
    pub corridor_distance: Option<i32>,
    pub base: f64,
    pub perturbed: f64,
    pub relative_change: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub corridor: Vec<usize>,
    pub dg: f64,
    pub dmu: f64,
    pub rows: Vec<RobustnessRow>,
    /// Relative change decreases strictly along the rows outside the corridor.
    pub monotone: bool,
}

/// Recomputes two-point functions with couplings shifted by `(δg, δμ)` on
/// the corridor leaves only.
pub fn robustness_experiment(
    window: Window,
    params: RGParams,
    grid: Grid,
    spec: &InteractionSpec,
    corridor: &[usize],
    dg: f64,
    dmu: f64,
    probes: &[(PAdicPoint, PAdicPoint)],
) -> Result<RobustnessReport> {
    let base = Correlator::new(window, params, grid, spec)?;
    let mut perturbed_spec = spec.clone();
    for &leaf in corridor {
        let (g, mu) = spec.local.get(&leaf).copied().unwrap_or((spec.g, spec.mu));
        perturbed_spec.local.insert(leaf, (g + dg, mu + dmu));
    }
    if spec.leaf.is_some() && !corridor.is_empty() {
        return Err(Error::Unsupported("corridor couplings on top of a tabulated leaf factor".into()));
    }
    let perturbed = Correlator::new(window, params, grid, &perturbed_spec)?;
    let corridor_points: Vec<PAdicPoint> = corridor.iter().map(|&l| window.leaf_point(l)).collect();
    let mut rows = Vec::new();
    for (x, y) in probes {
        let mut dist: Option<i32> = None;
        let mut inside = false;
        for c in &corridor_points {
            for q in [x, y] {
                if window.leaf_index(q)? == window.leaf_index(c)? {
                    inside = true;
                } else {
                    let e = distance(q, c)?.exponent().expect("distinct leaves");
                    dist = Some(dist.map_or(e, |d| d.min(e)));
                }
            }
        }
        let g0 = base.two_point(x, y)?;
        let g1 = perturbed.two_point(x, y)?;
        rows.push(RobustnessRow {
            x: x.compact(),
            y: y.compact(),
            corridor_distance: if inside { None } else { dist },
            base: g0,
            perturbed: g1,
            relative_change: ((g1 - g0) / g0).abs(),
        });
    }
    let outside: Vec<&RobustnessRow> = rows.iter().filter(|r| r.corridor_distance.is_some()).collect();
    let monotone = outside
        .windows(2)
        .all(|w| w[1].corridor_distance <= w[0].corridor_distance || w[1].relative_change < w[0].relative_change);
    Ok(RobustnessReport {
        corridor: corridor.to_vec(),
        dg,
        dmu,
        rows,
        monotone,
    })
}

/// Probe pairs at separation `p` whose distance to leaf 0 runs over
/// `p^0` (inside) and `p^2 .. p^S`.
pub fn default_probes(window: &Window) -> Vec<(PAdicPoint, PAdicPoint)> {
    let b = window.branching();
    let mut probes = vec![(window.leaf_point(0), window.leaf_point(1))];
    for j in 2..=window.top {
        let base = b.pow((j - 1) as u32);
        probes.push((window.leaf_point(base), window.leaf_point(base + 1)));
    }
    probes
}

/// One row of the correlation CSV.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub x: String,
    pub y: String,
    pub distance: f64,
    pub value: f64,
    pub stderr: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{covariance_exact, CovarianceSpec};
    use approx::assert_relative_eq;

    fn setup(s: i32, spec: &InteractionSpec) -> Correlator {
        let w = Window::new(2, 3, s).unwrap();
        Correlator::new(w, RGParams::new(2, 3, 0.1).unwrap(), Grid::default(), spec).unwrap()
    }

    #[test]
    fn gaussian_reduction() {
        let corr = setup(3, &InteractionSpec::gaussian());
        assert!(corr.log_partition().abs() < 1e-10);
        assert_eq!(corr.table_count(), 4);
        let cs = CovarianceSpec::new(2, 3, 0.1).unwrap().with_uv(Some(0));
        let w = *corr.window();
        for (i, j) in [(0usize, 1usize), (0, 8), (3, 100), (5, 5), (7, 511)] {
            let (x, y) = (w.leaf_point(i), w.leaf_point(j));
            let got = corr.two_point(&x, &y).unwrap();
            let want = covariance_exact(&x, &y, &cs).unwrap_or(cs.c_self());
            assert!((got - want).abs() < 1e-8, "({i},{j}): {got} vs {want}");
            assert_eq!(got, corr.two_point(&y, &x).unwrap());
        }
        // Isserlis
        let pts: Vec<PAdicPoint> = [0usize, 3, 64, 300].iter().map(|&i| w.leaf_point(i)).collect();
        let g = |a: usize, b: usize| corr.two_point(&pts[a], &pts[b]).unwrap();
        let want = g(0, 1) * g(2, 3) + g(0, 2) * g(1, 3) + g(0, 3) * g(1, 2);
        let got = corr.four_point([&pts[0], &pts[1], &pts[2], &pts[3]]).unwrap();
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    }

    #[test]
    fn gaussian_power_law() {
        let corr = setup(4, &InteractionSpec::gaussian());
        let fit = critical_exponent_fit(&corr).unwrap();
        assert!((fit.slope - fit.expected).abs() < 1e-8, "{fit:?}");
        assert!(critical_exponent_fit(&setup(3, &InteractionSpec::gaussian())).is_err());
    }

    #[test]
    fn interacting_symmetries() {
        let spec = InteractionSpec::uniform(0.05, 0.1);
        let corr = setup(2, &spec);
        let w = *corr.window();
        let (x, y) = (w.leaf_point(3), w.leaf_point(17));
        let v = corr.two_point(&x, &y).unwrap();
        // every pair at the same distance gives the same value
        for (i, j) in [(0usize, 8usize), (9, 63), (40, 1)] {
            let u = corr.two_point(&w.leaf_point(i), &w.leaf_point(j)).unwrap();
            assert!((u - v).abs() < 1e-12 * v.abs(), "{u} vs {v}");
        }
        let pts: Vec<PAdicPoint> = [0usize, 3, 20, 50].iter().map(|&i| w.leaf_point(i)).collect();
        let a = corr.four_point([&pts[0], &pts[1], &pts[2], &pts[3]]).unwrap();
        let b = corr.four_point([&pts[2], &pts[0], &pts[3], &pts[1]]).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn relabeling_siblings_leaves_z_unchanged() {
        let base = InteractionSpec::uniform(0.05, 0.1);
        let a = setup(2, &base.clone().with_local(3, 0.2, -0.1).with_local(12, 0.0, 0.3));
        let b = setup(2, &base.clone().with_local(5, 0.2, -0.1).with_local(60, 0.0, 0.3));
        assert_relative_eq!(a.log_partition(), b.log_partition(), max_relative = 1e-13);
        let c = setup(2, &base.with_local(3, 0.2, -0.1).with_local(4, 0.0, 0.3));
        assert!((c.log_partition() - a.log_partition()).abs() > 1e-6);
    }

    #[test]
    fn mass_steepens_the_decay() {
        let fit = critical_exponent_fit(&setup(4, &InteractionSpec::uniform(0.01, 0.5))).unwrap();
        assert!(fit.slope < fit.expected - 0.5, "{fit:?}");
    }

    #[test]
    fn gaussian_ope() {
        let corr = setup(4, &InteractionSpec::gaussian());
        let (x, ys, z1, z2) = ope_default_points(corr.window()).unwrap();
        let r = ope_leading_check(&corr, &x, &ys, &z1, &z2).unwrap();
        let c0 = CovarianceSpec::new(2, 3, 0.1).unwrap().c0();
        assert!((r.leading_coefficient - c0).abs() < 1e-8 && r.leading_spread < 1e-8);
        // the Wick-square channel: residual 2 C(x,z1) C(x,z2) is flat in |x - y|
        assert!(r.residual_exponent.abs() < 1e-8, "{r:?}");
        assert!(ope_leading_check(&corr, &x, &ys, &ys[1], &z2).is_err());
    }

    #[test]
    fn corridor_effect() {
        let w = Window::new(2, 3, 3).unwrap();
        let params = RGParams::new(2, 3, 0.1).unwrap();
        let spec = InteractionSpec::uniform(0.01, 0.0);
        let probes = default_probes(&w);
        let none = robustness_experiment(w, params, Grid::default(), &spec, &[], 0.5, 0.2, &probes).unwrap();
        assert!(none.rows.iter().all(|r| r.relative_change == 0.0));
        let r = robustness_experiment(w, params, Grid::default(), &spec, &[0], 0.5, 0.2, &probes).unwrap();
        assert_eq!(r.rows[0].corridor_distance, None);
        assert!(r.rows[0].relative_change > 0.1, "{r:?}");
        assert!(r.monotone && r.rows[1].relative_change > r.rows[2].relative_change);
    }

    #[test]
    fn rg_consistency() {
        let params = RGParams::new(2, 3, 0.1).unwrap();
        let grid = Grid::default();
        let f0 = BoltzmannFactor::quartic(grid, 0.03, 0.05, params.c_self());
        let f1 = BlockIntegrator::new(params, grid).unwrap().step(&f0).unwrap();
        let a2 = params.a().powi(2);
        for s in [2, 3] {
            let fine = Correlator::new(Window::new(2, 3, s).unwrap(), params, grid, &InteractionSpec::from_factor(f0.clone())).unwrap();
            let coarse = Correlator::new(Window::new(2, 3, s - 1).unwrap(), params, grid, &InteractionSpec::from_factor(f1.clone())).unwrap();
            for j in 2..=s {
                let (x, y) = pair_at_distance(fine.window(), j).unwrap();
                let lhs = fine.two_point(&x, &y).unwrap();
                let rhs = a2 * coarse.two_point(&x.shift(1), &y.shift(1)).unwrap();
                assert!((lhs - rhs).abs() < 1e-5 * lhs.abs(), "S={s} j={j}: {lhs} vs {rhs}");
            }
        }
    }
}
