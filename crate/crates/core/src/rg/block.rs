//! Block integral by the Fourier representation of the zero-sum constraint.
//!
//! The zero-sum sibling law is the i.i.d. `N(0,1)` law conditioned on
//! `Σ ξ_i = 0`, so
//! `E Π F(a' + ζ_i) = (2π)^{-1} ∫ dt H(t)^b / p_Σ(0)` with
//! `H(t) = ∫ F(a' + ξ) φ(ξ) e^{-sξ} e^{itξ} dξ` and `p_Σ(0) = (2πb)^{-1/2}`.
//! The tilt `s` is free because `Σ ξ_i = 0`; it is chosen to centre the
//! single-site measure, which keeps `H^b` concentrated near `t = 0`. The ξ
//! integral is a sum over the grid nodes themselves. Only where the tilted
//! site measure is narrower than the grid resolves is `log F` interpolated
//! (cubic) onto a finer sub-grid.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::{BoltzmannFactor, Grid, RGParams};
use crate::error::{Error, Result};

/// Half-width of the single-site window in units of the ξ standard deviation.
pub const WINDOW_SIGMAS: f64 = 8.5;
/// `|H(t)|^b` below `e^{-LOG_CUT}` ends the t-integral.
const LOG_CUT: f64 = 36.0;
/// Consecutive samples that must lie below the cut.
const CUT_RUN: usize = 3;
/// Site measures with standard deviation below this many sample spacings
/// are refined.
const MIN_SIGMA_SPACINGS: f64 = 1.25;
/// With children sampled at different spacings, each site measure must span
/// this many of its own spacings so its aliases stay below the cut up to
/// the coarsest Nyquist frequency.
const ALIAS_SPACINGS: f64 = 2.7;
const MAX_REFINE: usize = 64;
/// Phasor recurrences are re-seeded from `sin_cos` this often.
const RESYNC: usize = 32;
/// Samples whose tilted probability is below `e^{-TRIM}` of the peak are dropped.
const TRIM: f64 = 50.0;

pub struct BlockIntegrator {
    params: RGParams,
    grid: Grid,
    dt: f64,
}

/// Children of one family sharing a table, for [`BlockIntegrator::block_general`].
pub struct ChildGroup<'a> {
    pub log_t: &'a [f64],
    pub count: usize,
    /// Insertion ratio carried by the (single) child of a marked group.
    pub ratio: Option<&'a [f64]>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockValue {
    pub log_w: f64,
    pub ratio: Option<f64>,
}

struct Site {
    log_w: f64,
    /// First node of the window and `∂ log W / ∂ log F_m` across it.
    jac: Option<(usize, Vec<f64>)>,
}

/// Samples of the single-site window: offsets `ξ_j = ξ_0 + j hs` and
/// `log F` there, with the coarse nodes each sample depends on.
struct Samples {
    hs: f64,
    xi: Vec<f64>,
    log_f: Vec<f64>,
    /// `(first coarse node, weights)` of the cubic interpolation, or `None`
    /// when the samples are the grid nodes.
    interp: Option<Vec<(usize, [f64; 4])>>,
}

/// Centred site measure: log normalization, probabilities, variance.
struct Tilted {
    log_z: f64,
    p: Vec<f64>,
    var: f64,
}

fn tilt(xi: &[f64], log_f: &[f64]) -> Tilted {
    tilt_multi(&[(xi, log_f, 1.0)]).0.pop().expect("one table")
}

/// Common tilt `s` for several site tables `(ξ, log F, multiplicity)`,
/// chosen so the multiplicity-weighted tilted means sum to zero. The flag is
/// false when no tilt centres the sum within the sampled range.
fn tilt_multi(tables: &[(&[f64], &[f64], f64)]) -> (Vec<Tilted>, bool) {
    let w: Vec<Vec<f64>> = tables
        .iter()
        .map(|(xi, lf, _)| xi.iter().zip(lf.iter()).map(|(x, lf)| lf - 0.5 * x * x).collect())
        .collect();
    let one = |w: &[f64], xi: &[f64], s: f64| {
        let lw: Vec<f64> = w.iter().zip(xi).map(|(w, x)| w - s * x).collect();
        let max = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let p: Vec<f64> = lw.iter().map(|v| (v - max).exp()).collect();
        let z: f64 = p.iter().sum();
        let mean = p.iter().zip(xi).map(|(p, x)| p * x).sum::<f64>() / z;
        let var = p.iter().zip(xi).map(|(p, x)| p * x * x).sum::<f64>() / z - mean * mean;
        let tl = Tilted {
            log_z: max + z.ln(),
            p: p.into_iter().map(|v| v / z).collect(),
            var: var.max(1e-300),
        };
        (tl, mean)
    };
    let moments = |s: f64| {
        let parts: Vec<(Tilted, f64)> = w.iter().zip(tables).map(|(w, t)| one(w, t.0, s)).collect();
        let mean: f64 = parts.iter().zip(tables).map(|(p, t)| t.2 * p.1).sum();
        let var: f64 = parts.iter().zip(tables).map(|(p, t)| t.2 * p.0.var).sum();
        (parts.into_iter().map(|p| p.0).collect::<Vec<_>>(), mean, var)
    };
    let mut s = 0.0;
    let (mut above, mut below): (Option<f64>, Option<f64>) = (None, None);
    let mut state = moments(s);
    let centred = |mean: f64, var: f64| mean.abs() <= 1e-10 * var.sqrt();
    let mut reach = 1.0;
    for _ in 0..200 {
        let (_, mean, var) = &state;
        let (mean, var) = (*mean, *var);
        if centred(mean, var) {
            break;
        }
        // the tilted mean decreases in s
        if mean > 0.0 {
            above = Some(s);
        } else {
            below = Some(s);
        }
        // far from the root the cap doubles so large tilts are reached quickly
        let cap = 4.0 / var.sqrt() * reach;
        let step = mean / var;
        reach = if step.abs() > cap { reach * 2.0 } else { 1.0 };
        let mut next = s + step.clamp(-cap, cap);
        if let (Some(l), Some(u)) = (above, below) {
            if !(next > l.min(u) && next < l.max(u)) {
                next = 0.5 * (l + u);
            }
        }
        s = next;
        state = moments(s);
    }
    let ok = centred(state.1, state.2);
    (state.0, ok)
}

/// Index range where at least one tilted measure exceeds `e^{-TRIM}` of its peak.
fn support(ps: &[&[f64]]) -> (usize, usize) {
    let (mut lo, mut hi) = (usize::MAX, 0);
    for p in ps {
        let cut = p.iter().cloned().fold(0.0, f64::max) * (-TRIM).exp();
        if let Some(first) = p.iter().position(|v| *v >= cut) {
            let last = p.iter().rposition(|v| *v >= cut).expect("found");
            lo = lo.min(first);
            hi = hi.max(last);
        }
    }
    (lo, hi)
}

/// `Σ_j c_j e^{i k dt ξ_j}` for `k = 0..count`, by phasor recurrence.
struct Phasors {
    step: Vec<Complex64>,
    cur: Vec<Complex64>,
    xi0: Vec<f64>,
    dt: f64,
    k: usize,
}

impl Phasors {
    fn new(xi: &[f64], dt: f64) -> Self {
        Phasors {
            step: xi.iter().map(|x| Complex64::from_polar(1.0, dt * x)).collect(),
            cur: vec![Complex64::new(1.0, 0.0); xi.len()],
            xi0: xi.to_vec(),
            dt,
            k: 0,
        }
    }

    fn advance(&mut self) {
        self.k += 1;
        if self.k % RESYNC == 0 {
            let t = self.k as f64 * self.dt;
            for (c, x) in self.cur.iter_mut().zip(&self.xi0) {
                *c = Complex64::from_polar(1.0, t * x);
            }
        } else {
            for (c, s) in self.cur.iter_mut().zip(&self.step) {
                *c *= s;
            }
        }
    }
}

/// Cubic Lagrange weights at fractional grid coordinate `t`.
fn lagrange4(n: usize, t: f64) -> (usize, [f64; 4]) {
    let i0 = (t.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let mut w = [1.0; 4];
    for (j, wj) in w.iter_mut().enumerate() {
        for k in 0..4 {
            if k != j {
                *wj *= (t - (i0 + k) as f64) / (j as f64 - k as f64);
            }
        }
    }
    (i0, w)
}

impl BlockIntegrator {
    pub fn new(params: RGParams, grid: Grid) -> Result<Self> {
        params.validate()?;
        let a = params.a();
        if a * grid.phimax + WINDOW_SIGMAS > grid.phimax {
            return Err(Error::domain(format!(
                "grid too narrow: need Φmax >= {:.3} so every block window fits",
                WINDOW_SIGMAS / (1.0 - a)
            )));
        }
        let h = grid.h();
        if h > 0.25 {
            return Err(Error::config(format!("grid spacing {h} too coarse; need h <= 0.25")));
        }
        let b = params.b() as f64;
        // the tilted sum of b sites lives in [-bR, bR]; keep its periodic
        // images out of the origin
        let dt = 2.0 * std::f64::consts::PI / (2.0 * b * WINDOW_SIGMAS + 8.0);
        Ok(BlockIntegrator { params, grid, dt })
    }

    /// t-spacing for samples in `xi`: the tilted sum of b sites stays inside
    /// `b max|ξ|`, which the periodic images must clear.
    fn step_for(&self, xi: &[f64], hs: f64) -> f64 {
        let r = xi[0].abs().max(xi[xi.len() - 1].abs());
        let b = self.params.b() as f64;
        (2.0 * std::f64::consts::PI / (2.0 * b * r + 8.0 * hs)).max(self.dt)
    }

    pub fn params(&self) -> &RGParams {
        &self.params
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    fn check(&self, f: &BoltzmannFactor) -> Result<()> {
        f.validate()?;
        if f.grid != self.grid {
            return Err(Error::config("Boltzmann factor lives on a different grid"));
        }
        let scale = 1.0 + f.log_f.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if f.asymmetry() > 1e-9 * scale {
            return Err(Error::domain("Boltzmann factor is not even"));
        }
        Ok(())
    }

    fn samples(&self, log_f: &[f64], a1: f64, lo: usize, hi: usize, refine: usize) -> Samples {
        let g = &self.grid;
        if refine == 1 {
            return Samples {
                hs: g.h(),
                xi: (lo..=hi).map(|m| g.node(m) - a1).collect(),
                log_f: log_f[lo..=hi].to_vec(),
                interp: None,
            };
        }
        let count = (hi - lo) * refine + 1;
        let mut xi = Vec::with_capacity(count);
        let mut lf = Vec::with_capacity(count);
        let mut interp = Vec::with_capacity(count);
        for j in 0..count {
            let t = lo as f64 + j as f64 / refine as f64;
            let (i0, w) = lagrange4(g.n, t);
            xi.push(g.node(lo) + j as f64 * g.h() / refine as f64 - a1);
            lf.push((0..4).map(|q| w[q] * log_f[i0 + q]).sum());
            interp.push((i0, w));
        }
        Samples {
            hs: g.h() / refine as f64,
            xi,
            log_f: lf,
            interp: Some(interp),
        }
    }

    fn site(&self, log_f: &[f64], i: usize, want_jac: bool) -> Result<Site> {
        let g = &self.grid;
        let h = g.h();
        let b = self.params.b();
        let bf = b as f64;
        let a1 = self.params.a() * g.node(i);
        let lo = (((a1 - WINDOW_SIGMAS + g.phimax) / h).ceil().max(0.0)) as usize;
        let hi = (((a1 + WINDOW_SIGMAS + g.phimax) / h).floor() as usize).min(g.n - 1);

        let mut smp = self.samples(log_f, a1, lo, hi, 1);
        let mut tl = tilt(&smp.xi, &smp.log_f);
        let sd = tl.var.sqrt();
        if sd < MIN_SIGMA_SPACINGS * h {
            let refine = ((MIN_SIGMA_SPACINGS * h / sd).ceil() as usize).clamp(2, MAX_REFINE);
            smp = self.samples(log_f, a1, lo, hi, refine);
            tl = tilt(&smp.xi, &smp.log_f);
        }
        let Tilted { log_z, p, var } = tl;
        let (s0, s1) = support(&[&p]);
        let (xi, p) = (&smp.xi[s0..=s1], &p[s0..=s1]);
        let dt = self.step_for(xi, smp.hs);

        // the sample sum is the aliased transform, periodic in 2π/hs
        let kmax = ((std::f64::consts::PI / smp.hs) / dt).floor() as usize;
        let t_gauss = (2.0 * LOG_CUT / (bf * var)).sqrt();
        let mut hk: Vec<Complex64> = Vec::with_capacity(64);
        let mut integral = 0.0;
        let mut run = 0;
        let mut ph = Phasors::new(xi, dt);
        for k in 0..=kmax {
            if k > 0 {
                ph.advance();
            }
            let t = k as f64 * dt;
            let hval: Complex64 = p.iter().zip(&ph.cur).map(|(pm, e)| e * *pm).sum();
            integral += if k == 0 { 0.5 } else { 1.0 } * hval.powu(b as u32).re;
            hk.push(hval);
            run = if hval.norm().ln() * bf < -LOG_CUT { run + 1 } else { 0 };
            if t >= t_gauss && run >= CUT_RUN {
                break;
            }
        }
        let integral = integral * dt / std::f64::consts::PI;
        if !(integral > 0.0 && integral.is_finite()) {
            return Err(Error::Numeric(format!(
                "block integral at ψ = {} evaluated to {integral}",
                g.node(i)
            )));
        }
        let log_site = log_z + smp.hs.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        let log_w = bf * log_site + integral.ln() + 0.5 * (2.0 * std::f64::consts::PI * bf).ln();

        let jac = want_jac.then(|| {
            let hb1: Vec<Complex64> = hk.iter().map(|h| h.powu(b as u32 - 1)).collect();
            let mut q = vec![0.0; p.len()];
            let mut ph = Phasors::new(xi, dt);
            for (kk, hv) in hb1.iter().enumerate() {
                if kk > 0 {
                    ph.advance();
                }
                let wk = if kk == 0 { 0.5 } else { 1.0 };
                for (qj, e) in q.iter_mut().zip(&ph.cur) {
                    *qj += wk * (e * hv).re;
                }
            }
            let scale = dt / std::f64::consts::PI / integral;
            let d: Vec<f64> = p.iter().zip(&q).map(|(pj, qj)| bf * pj * qj * scale).collect();
            match &smp.interp {
                None => (lo + s0, d),
                Some(interp) => {
                    let interp = &interp[s0..=s1];
                    let first = interp.iter().map(|w| w.0).min().expect("nonempty");
                    let last = interp.iter().map(|w| w.0 + 3).max().expect("nonempty");
                    let mut dc = vec![0.0; last - first + 1];
                    for (dj, (i0, w)) in d.iter().zip(interp) {
                        for q in 0..4 {
                            dc[i0 + q - first] += dj * w[q];
                        }
                    }
                    (first, dc)
                }
            }
        });
        Ok(Site { log_w, jac })
    }

    /// `log E Π_c T_c(aψ_i + ζ_c)` for a family whose children fall into
    /// groups of identical tables, and, if any child carries an insertion
    /// ratio `R_c = T_c^{(m)}/T_c`, the conditional moment
    /// `E[Π_marked R_c Π_c T_c] / E[Π_c T_c]`.
    pub fn block_general(&self, groups: &[ChildGroup], i: usize) -> Result<BlockValue> {
        let g = &self.grid;
        let h = g.h();
        let b = self.params.b();
        if groups.iter().map(|c| c.count).sum::<usize>() != b {
            return Err(Error::config(format!("child groups must account for all {b} children")));
        }
        if groups.iter().any(|c| c.ratio.is_some() && c.count != 1) {
            return Err(Error::config("a marked child must form its own group"));
        }
        for c in groups {
            if c.log_t.len() != g.n || c.ratio.is_some_and(|r| r.len() != g.n) {
                return Err(Error::config("child table lives on a different grid"));
            }
        }
        let a1 = self.params.a() * g.node(i);
        let lo = (((a1 - WINDOW_SIGMAS + g.phimax) / h).ceil().max(0.0)) as usize;
        let hi = (((a1 + WINDOW_SIGMAS + g.phimax) / h).floor() as usize).min(g.n - 1);

        struct Part {
            hs: f64,
            xi: Vec<f64>,
            lf: Vec<f64>,
            rt: Option<Vec<f64>>,
        }
        let sample = |c: &ChildGroup, refine: usize, lo: usize, hi: usize| {
            let smp = self.samples(c.log_t, a1, lo, hi, refine);
            Part {
                hs: smp.hs,
                xi: smp.xi,
                lf: smp.log_f,
                rt: c.ratio.map(|r| self.samples(r, a1, lo, hi, refine).log_f),
            }
        };
        let tilt_all = |parts: &[Part]| {
            let tables: Vec<(&[f64], &[f64], f64)> = parts
                .iter()
                .zip(groups)
                .map(|(q, c)| (q.xi.as_slice(), q.lf.as_slice(), c.count as f64))
                .collect();
            tilt_multi(&tables)
        };
        // samples on per-child ranges, refined where a tilted measure is
        // narrower than the grid resolves
        let build = |ranges: &[(usize, usize)]| {
            let parts: Vec<Part> = groups.iter().zip(ranges).map(|(c, &(l, u))| sample(c, 1, l, u)).collect();
            let (tl, centred) = tilt_all(&parts);
            if tl.iter().all(|t| t.var.sqrt() >= MIN_SIGMA_SPACINGS * h) {
                return (parts, tl, centred);
            }
            let parts: Vec<Part> = groups
                .iter()
                .zip(&tl)
                .zip(ranges)
                .map(|((c, t), &(l, u))| {
                    let r = ((ALIAS_SPACINGS * h / t.var.sqrt()).ceil() as usize).clamp(1, MAX_REFINE);
                    sample(c, r, l, u)
                })
                .collect();
            let (tl, centred) = tilt_all(&parts);
            (parts, tl, centred)
        };
        let (mut parts, mut tl, centred) = build(&vec![(lo, hi); groups.len()]);
        if !centred {
            // unequal children far out: the centring tilt moves some of them
            // beyond the window. Locate each child on the whole grid, then
            // widen its range around that until the refined tilt is centred
            // inside every range.
            let full: Vec<Part> = groups.iter().map(|c| sample(c, 1, 0, g.n - 1)).collect();
            let located: Vec<(usize, usize)> = tilt_all(&full).0.iter().map(|t| support(&[&t.p])).collect();
            let mut pad = 8;
            loop {
                let ranges: Vec<(usize, usize)> = located
                    .iter()
                    .map(|&(s0, s1)| (s0.saturating_sub(pad), (s1 + pad).min(g.n - 1)))
                    .collect();
                let (p2, t2, ok) = build(&ranges);
                let inside = t2.iter().zip(&ranges).all(|(t, &(l, u))| {
                    let (s0, s1) = support(&[&t.p]);
                    (s0 > 0 || l == 0) && (s1 + 1 < t.p.len() || u == g.n - 1)
                });
                let whole = ranges.iter().all(|&r| r == (0, g.n - 1));
                (parts, tl) = (p2, t2);
                if (ok && inside) || whole {
                    break;
                }
                pad *= 4;
            }
        }
        let total_var: f64 = tl.iter().zip(groups).map(|(t, c)| c.count as f64 * t.var).sum();
        let marked = groups.iter().any(|c| c.ratio.is_some());
        // each child on its own support
        let spans: Vec<(usize, usize)> = tl.iter().map(|t| support(&[&t.p])).collect();
        let extent = parts
            .iter()
            .zip(&spans)
            .map(|(q, &(s0, s1))| q.xi[s0].abs().max(q.xi[s1].abs()))
            .fold(0.0, f64::max);
        let hs_max = parts.iter().map(|q| q.hs).fold(0.0, f64::max);
        let hs_min = parts.iter().map(|q| q.hs).fold(f64::INFINITY, f64::min);
        let dt = self.step_for(&[extent], hs_min);

        let kmax = ((std::f64::consts::PI / hs_max) / dt).floor() as usize;
        let t_gauss = (2.0 * LOG_CUT / total_var).sqrt();
        let (mut den, mut num) = (0.0, 0.0);
        let mut run = 0;
        let mut phs: Vec<Phasors> = parts
            .iter()
            .zip(&spans)
            .map(|(q, &(s0, s1))| Phasors::new(&q.xi[s0..=s1], dt))
            .collect();
        for k in 0..=kmax {
            if k > 0 {
                phs.iter_mut().for_each(Phasors::advance);
            }
            let t = k as f64 * dt;
            let wk = if k == 0 { 0.5 } else { 1.0 };
            let mut prod = Complex64::new(1.0, 0.0);
            let mut prod_r = Complex64::new(1.0, 0.0);
            for (((tc, q), (c, ph)), &(s0, s1)) in tl.iter().zip(&parts).zip(groups.iter().zip(&phs)).zip(&spans) {
                let pc = &tc.p[s0..=s1];
                let hval: Complex64 = pc.iter().zip(&ph.cur).map(|(pm, e)| e * *pm).sum();
                let hp = hval.powu(c.count as u32);
                prod *= hp;
                prod_r *= match &q.rt {
                    Some(r) => pc.iter().zip(&r[s0..=s1]).zip(&ph.cur).map(|((pm, rm), e)| e * (pm * rm)).sum(),
                    None => hp,
                };
            }
            den += wk * prod.re;
            if marked {
                num += wk * prod_r.re;
            }
            run = if prod.norm().ln() < -LOG_CUT { run + 1 } else { 0 };
            if t >= t_gauss && run >= CUT_RUN {
                break;
            }
        }
        let scale = dt / std::f64::consts::PI;
        let den = den * scale;
        if !(den > 0.0 && den.is_finite()) {
            return Err(Error::Numeric(format!(
                "block integral at ψ = {} evaluated to {den}",
                g.node(i)
            )));
        }
        let bf = b as f64;
        let log_sites: f64 = tl
            .iter()
            .zip(&parts)
            .zip(groups)
            .map(|((t, q), c)| c.count as f64 * (t.log_z + q.hs.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()))
            .sum();
        Ok(BlockValue {
            log_w: log_sites + den.ln() + 0.5 * (2.0 * std::f64::consts::PI * bf).ln(),
            ratio: marked.then(|| num * scale / den),
        })
    }

    fn step_once(&self, f: &BoltzmannFactor, want_jac: bool) -> Result<(BoltzmannFactor, Option<DMatrix<f64>>)> {
        self.check(f)?;
        let g = self.grid;
        let mid = g.mid();
        let sites: Vec<Site> = (mid..g.n)
            .into_par_iter()
            .map(|i| self.site(&f.log_f, i, want_jac))
            .collect::<Result<_>>()?;
        let mut log_f = vec![0.0; g.n];
        let w0 = sites[0].log_w;
        for (j, s) in sites.iter().enumerate() {
            log_f[mid + j] = s.log_w - w0;
            log_f[mid - j] = s.log_w - w0;
        }
        let out = BoltzmannFactor { grid: g, log_f };
        let jac = want_jac.then(|| {
            let m = mid;
            let dense = |s: &Site| {
                let mut row = vec![0.0; g.n];
                if let Some((lo, d)) = &s.jac {
                    row[*lo..*lo + d.len()].copy_from_slice(d);
                }
                row
            };
            let r0 = dense(&sites[0]);
            let mut jm = DMatrix::zeros(m, m);
            for i in 1..=m {
                let ri = dense(&sites[i]);
                for j in 1..=m {
                    jm[(i - 1, j - 1)] = ri[m + j] + ri[m - j] - r0[m + j] - r0[m - j];
                }
            }
            jm
        });
        Ok((out, jac))
    }

    /// One RG step: `l` single-layer block integrations.
    pub fn step(&self, f: &BoltzmannFactor) -> Result<BoltzmannFactor> {
        let mut cur = f.clone();
        for _ in 0..self.params.l {
            cur = self.step_once(&cur, false)?.0;
        }
        Ok(cur)
    }

    /// The step and its Jacobian in the even, gauge-fixed coordinates
    /// [`BoltzmannFactor::even_coords`].
    pub fn step_with_jacobian(&self, f: &BoltzmannFactor) -> Result<(BoltzmannFactor, DMatrix<f64>)> {
        let m = self.grid.mid();
        let mut cur = f.clone();
        let mut jac = DMatrix::identity(m, m);
        for _ in 0..self.params.l {
            let (next, j) = self.step_once(&cur, true)?;
            jac = j.expect("requested") * jac;
            cur = next;
        }
        Ok((cur, jac))
    }

    /// Unnormalized `log E Π F(aψ + ζ_i)` at one grid node, for diagnostics and
    /// oracle comparisons.
    pub fn log_block_value(&self, f: &BoltzmannFactor, i: usize) -> Result<f64> {
        self.check(f)?;
        Ok(self.site(&f.log_f, i, false)?.log_w)
    }
}
