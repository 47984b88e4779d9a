//! Metropolis sampling of the finite-window measure over the ζ-field, as an
//! independent oracle for the correlator.
//!
//! Moves stay on the zero-sum manifold: a family move adds δ to one sibling
//! and subtracts it from another, a top move shifts the field above the
//! root. On the zero-sum hyperplane the family Gaussian has density
//! `exp(-|ζ|²/2σ_k²)`, so both proposals are symmetric and the acceptance is
//! the plain Metropolis ratio of family Gaussians, top Gaussian and leaf
//! Boltzmann factors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlator::InteractionSpec;
use crate::error::{Error, Result};
use crate::gaussian::{CovarianceSpec, FieldConfig};
use crate::padic::{distance, PAdicPoint};
use crate::rg::{wick, RGParams};
use crate::tree::Window;

/// Burn-in sweeps between step-size adjustments.
const TUNE_EVERY: u64 = 50;
const TARGET_ACCEPTANCE: f64 = 0.45;
/// Sokal window: sum the autocorrelation up to `M >= C τ(M)`.
const SOKAL_C: f64 = 5.0;
pub const RHAT_WARN: f64 = 1.1;

/// The target density of a window and interaction.
pub struct Target {
    window: Window,
    layer_var: Vec<f64>,
    top_var: f64,
    c: f64,
    couplings: Vec<(f64, f64)>,
}

/// A single Metropolis proposal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Move {
    /// `ζ_from += δ`, `ζ_to -= δ` for two siblings of `layer`.
    Transfer { layer: usize, from: usize, to: usize, delta: f64 },
    Top { delta: f64 },
}

#[derive(Clone, Debug)]
pub struct ChainState {
    pub field: FieldConfig,
    /// Cached leaf field.
    pub phi: Vec<f64>,
    pub log_density: f64,
    pub stream: u64,
    pub sweep: u64,
    /// Proposal half-widths per layer, then the top move.
    pub steps: Vec<f64>,
}

impl Target {
    pub fn new(window: Window, params: RGParams, spec: &InteractionSpec) -> Result<Self> {
        if params.p != window.p || params.d != window.d {
            return Err(Error::config("window and model parameters disagree on p or d"));
        }
        if spec.leaf.is_some() {
            return Err(Error::Unsupported("the sampler takes polynomial couplings only".into()));
        }
        spec.validate(&window)?;
        let cov = CovarianceSpec::new(params.p, params.d, params.eps)?;
        let mut couplings = vec![(spec.g, spec.mu); window.leaf_count()];
        for (&leaf, &gm) in &spec.local {
            couplings[leaf] = gm;
        }
        Ok(Target {
            window,
            layer_var: (0..window.top).map(|k| cov.layer_variance(k)).collect(),
            top_var: cov.tail_variance(window.top),
            c: cov.c_self(),
            couplings,
        })
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    fn leaf_log(&self, leaf: usize, x: f64) -> f64 {
        let (g, mu) = self.couplings[leaf];
        -g * wick(4, self.c, x) - mu * wick(2, self.c, x)
    }

    fn leaves_under(&self, layer: usize, index: usize) -> std::ops::Range<usize> {
        let n = self.window.branching().pow(layer as u32);
        index * n..(index + 1) * n
    }

    pub fn log_density(&self, field: &FieldConfig) -> f64 {
        let gauss: f64 = field
            .zeta
            .iter()
            .zip(&self.layer_var)
            .map(|(layer, v)| -layer.iter().map(|z| z * z).sum::<f64>() / (2.0 * v))
            .sum::<f64>()
            - field.top * field.top / (2.0 * self.top_var);
        let leaves: f64 = field
            .leaf_field()
            .iter()
            .enumerate()
            .map(|(i, x)| self.leaf_log(i, *x))
            .sum();
        gauss + leaves
    }

    /// Chain started from the zero field.
    pub fn initial_state(&self, stream: u64) -> ChainState {
        let field = FieldConfig {
            p: self.window.p,
            d: self.window.d,
            top_layer: self.window.top,
            zeta: (0..self.window.top).map(|k| vec![0.0; self.window.layer_size(k)]).collect(),
            top: 0.0,
            seed: None,
        };
        let mut steps: Vec<f64> = self.layer_var.iter().map(|v| 2.0 * v.sqrt()).collect();
        steps.push(self.top_var.sqrt());
        ChainState {
            phi: field.leaf_field(),
            log_density: self.log_density(&field),
            field,
            stream,
            sweep: 0,
            steps,
        }
    }

    /// Change of the log density under `mv`.
    pub fn log_ratio(&self, state: &ChainState, mv: &Move) -> f64 {
        match *mv {
            Move::Transfer { layer, from, to, delta } => {
                let z = &state.field.zeta[layer];
                let (zf, zt) = (z[from], z[to]);
                let gauss = -((zf + delta).powi(2) - zf * zf + (zt - delta).powi(2) - zt * zt) / (2.0 * self.layer_var[layer]);
                let mut leaves = 0.0;
                for (ball, sign) in [(from, 1.0), (to, -1.0)] {
                    for i in self.leaves_under(layer, ball) {
                        let x = state.phi[i];
                        leaves += self.leaf_log(i, x + sign * delta) - self.leaf_log(i, x);
                    }
                }
                gauss + leaves
            }
            Move::Top { delta } => {
                let t = state.field.top;
                let gauss = -((t + delta).powi(2) - t * t) / (2.0 * self.top_var);
                let leaves: f64 = state
                    .phi
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| self.leaf_log(i, x + delta) - self.leaf_log(i, x))
                    .sum();
                gauss + leaves
            }
        }
    }

    pub fn apply(&self, state: &mut ChainState, mv: &Move, log_ratio: f64) {
        match *mv {
            Move::Transfer { layer, from, to, delta } => {
                state.field.zeta[layer][from] += delta;
                state.field.zeta[layer][to] -= delta;
                for i in self.leaves_under(layer, from) {
                    state.phi[i] += delta;
                }
                for i in self.leaves_under(layer, to) {
                    state.phi[i] -= delta;
                }
            }
            Move::Top { delta } => {
                state.field.top += delta;
                state.phi.iter_mut().for_each(|x| *x += delta);
            }
        }
        state.log_density += log_ratio;
    }

    fn try_move<R: Rng>(&self, state: &mut ChainState, mv: Move, rng: &mut R) -> bool {
        let lr = self.log_ratio(state, &mv);
        if lr >= 0.0 || rng.random::<f64>() < lr.exp() {
            self.apply(state, &mv, lr);
            true
        } else {
            false
        }
    }
}

/// One pass: `b` pairwise transfers in every sibling family of every layer,
/// then one top move. Returns accepted moves per layer and for the top.
pub fn metropolis_sweep<R: Rng>(target: &Target, state: &mut ChainState, rng: &mut R) -> Vec<(u32, u32)> {
    let b = target.window.branching();
    let layers = target.window.top as usize;
    let mut stats = vec![(0u32, 0u32); layers + 1];
    for layer in 0..layers {
        let families = target.window.layer_size(layer as i32) / b;
        let step = state.steps[layer];
        for fam in 0..families {
            for _ in 0..b {
                let i = rng.random_range(0..b);
                let j = (i + rng.random_range(1..b)) % b;
                let delta = step * (2.0 * rng.random::<f64>() - 1.0);
                let mv = Move::Transfer {
                    layer,
                    from: fam * b + i,
                    to: fam * b + j,
                    delta,
                };
                stats[layer].1 += 1;
                if target.try_move(state, mv, rng) {
                    stats[layer].0 += 1;
                }
            }
        }
    }
    let delta = state.steps[layers] * (2.0 * rng.random::<f64>() - 1.0);
    stats[layers].1 += 1;
    if target.try_move(state, Move::Top { delta }, rng) {
        stats[layers].0 += 1;
    }
    state.sweep += 1;
    stats
}

/// Integrated autocorrelation time with Sokal's automatic window.
pub fn integrated_autocorrelation(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return 0.5;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0 = dev.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return 0.5;
    }
    let mut tau = 0.5;
    for t in 1..n / 2 {
        let ct = dev[..n - t].iter().zip(&dev[t..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
        tau += ct / c0;
        if t as f64 >= SOKAL_C * tau {
            break;
        }
    }
    tau.max(0.5)
}

/// Split-R̂ over chains of equal length.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let half = chains.iter().map(Vec::len).min().unwrap_or(0) / 2;
    if half < 2 {
        return f64::NAN;
    }
    let parts: Vec<&[f64]> = chains.iter().flat_map(|c| [&c[..half], &c[half..2 * half]]).collect();
    let m = parts.len() as f64;
    let n = half as f64;
    let means: Vec<f64> = parts.iter().map(|p| p.iter().sum::<f64>() / n).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = n / (m - 1.0) * means.iter().map(|v| (v - grand).powi(2)).sum::<f64>();
    let w = parts
        .iter()
        .zip(&means)
        .map(|(p, mu)| p.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    if w == 0.0 {
        return 1.0;
    }
    (((n - 1.0) / n * w + b / n) / w).sqrt()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleConfig {
    pub chains: usize,
    pub sweeps: u64,
    pub burn_in: u64,
    pub seed: u64,
    /// Average `φ(x')φ(y')` over every leaf pair at the requested distance
    /// (uniform couplings only, where all such pairs are equivalent).
    #[serde(default)]
    pub orbit: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairEstimate {
    pub x: String,
    pub y: String,
    pub distance: f64,
    pub value: f64,
    pub stderr: f64,
    /// Per-chain integrated autocorrelation times.
    pub tau: Vec<f64>,
    pub per_chain: Vec<f64>,
    pub r_hat: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub chain: u64,
    /// Production acceptance rate per layer, then of the top move.
    pub acceptance: Vec<f64>,
    pub steps: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleReport {
    pub estimates: Vec<PairEstimate>,
    pub chains: Vec<ChainDiagnostics>,
    pub warnings: Vec<String>,
}

/// What is recorded for one requested pair after each sweep.
#[derive(Clone, Copy, Debug)]
pub enum Observable {
    Pair(usize, usize),
    /// Mean of `φ(i)φ(partner(i))` over all leaves, the partner differing
    /// from `i` in path digit `j - 1` only (distance `p^j`, `j >= 1`).
    Orbit(u32),
    /// `φ(i)²` averaged over the leaves.
    Square,
}

impl Observable {
    fn measure(&self, phi: &[f64], b: usize) -> f64 {
        match *self {
            Observable::Pair(i, j) => phi[i] * phi[j],
            Observable::Square => phi.iter().map(|x| x * x).sum::<f64>() / phi.len() as f64,
            Observable::Orbit(j) => {
                let stride = b.pow(j - 1);
                let total: f64 = phi
                    .iter()
                    .enumerate()
                    .map(|(i, x)| {
                        let digit = (i / stride) % b;
                        let partner = i + ((digit + 1) % b) * stride - digit * stride;
                        x * phi[partner]
                    })
                    .sum();
                total / phi.len() as f64
            }
        }
    }
}

/// Runs one chain: tunes step sizes during burn-in, then records every
/// observable after each sweep.
pub fn run_chain(target: &Target, cfg: &SampleConfig, chain: u64, pairs: &[Observable]) -> (ChainDiagnostics, Vec<Vec<f64>>) {
    let b = target.window.branching();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(chain);
    let mut state = target.initial_state(chain);
    let layers = state.steps.len();
    let mut window_stats = vec![(0u32, 0u32); layers];
    for s in 0..cfg.burn_in {
        for (acc, st) in window_stats.iter_mut().zip(metropolis_sweep(target, &mut state, &mut rng)) {
            acc.0 += st.0;
            acc.1 += st.1;
        }
        if (s + 1) % TUNE_EVERY == 0 {
            for (step, (a, n)) in state.steps.iter_mut().zip(&window_stats) {
                let rate = *a as f64 / (*n).max(1) as f64;
                *step *= (2.0 * (rate - TARGET_ACCEPTANCE)).exp();
            }
            window_stats = vec![(0, 0); layers];
        }
    }
    let mut totals = vec![(0u64, 0u64); layers];
    let mut series = vec![Vec::with_capacity(cfg.sweeps as usize); pairs.len()];
    for _ in 0..cfg.sweeps {
        for (acc, st) in totals.iter_mut().zip(metropolis_sweep(target, &mut state, &mut rng)) {
            acc.0 += st.0 as u64;
            acc.1 += st.1 as u64;
        }
        for (s, o) in series.iter_mut().zip(pairs) {
            s.push(o.measure(&state.phi, b));
        }
    }
    let diag = ChainDiagnostics {
        chain,
        acceptance: totals.iter().map(|(a, n)| *a as f64 / (*n).max(1) as f64).collect(),
        steps: state.steps.clone(),
    };
    (diag, series)
}

/// Independent chains on derived streams of one seed, merged in chain order.
pub fn run_chains(
    window: Window,
    params: RGParams,
    spec: &InteractionSpec,
    cfg: &SampleConfig,
    pairs: &[(PAdicPoint, PAdicPoint)],
) -> Result<SampleReport> {
    if cfg.chains < 2 {
        return Err(Error::config("need at least 2 chains for R-hat"));
    }
    if cfg.sweeps < 4 {
        return Err(Error::config("need at least 4 production sweeps"));
    }
    let target = Target::new(window, params, spec)?;
    if cfg.orbit && !spec.local.is_empty() {
        return Err(Error::config("orbit averaging needs uniform couplings"));
    }
    let idx: Vec<Observable> = pairs
        .iter()
        .map(|(x, y)| {
            let (i, j) = (window.leaf_index(x)?, window.leaf_index(y)?);
            Ok(if !cfg.orbit {
                Observable::Pair(i, j)
            } else if i == j {
                Observable::Square
            } else {
                let e = distance(x, y)?.exponent().expect("distinct leaves");
                Observable::Orbit(e as u32)
            })
        })
        .collect::<Result<_>>()?;
    let runs: Vec<(ChainDiagnostics, Vec<Vec<f64>>)> = (0..cfg.chains as u64)
        .into_par_iter()
        .map(|c| run_chain(&target, cfg, c, &idx))
        .collect();
    let mut warnings = Vec::new();
    let mut estimates = Vec::new();
    for (k, (x, y)) in pairs.iter().enumerate() {
        let per: Vec<&Vec<f64>> = runs.iter().map(|r| &r.1[k]).collect();
        let n = cfg.sweeps as f64;
        let means: Vec<f64> = per.iter().map(|s| s.iter().sum::<f64>() / n).collect();
        let taus: Vec<f64> = per.iter().map(|s| integrated_autocorrelation(s)).collect();
        let var_sum: f64 = per
            .iter()
            .zip(&means)
            .zip(&taus)
            .map(|((s, m), t)| {
                let var = s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
                2.0 * t * var / n
            })
            .sum();
        let c = cfg.chains as f64;
        let r_hat = split_rhat(&per.iter().map(|s| s.to_vec()).collect::<Vec<_>>());
        if r_hat > RHAT_WARN {
            warnings.push(format!("R-hat {r_hat:.3} > {RHAT_WARN} for pair ({x}, {y})"));
        }
        estimates.push(PairEstimate {
            x: x.compact(),
            y: y.compact(),
            distance: distance(x, y)?.to_f64(window.p),
            value: means.iter().sum::<f64>() / c,
            stderr: var_sum.sqrt() / c,
            tau: taus,
            per_chain: means,
            r_hat,
        });
    }
    Ok(SampleReport {
        estimates,
        chains: runs.into_iter().map(|r| r.0).collect(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::vertex_covariance;

    fn target(p: u32, d: usize, s: i32, spec: &InteractionSpec) -> Target {
        Target::new(Window::new(p, d, s).unwrap(), RGParams::new(p, d, 0.1).unwrap(), spec).unwrap()
    }

    #[test]
    fn zero_sum_and_cached_density_stay_exact() {
        let t = target(2, 2, 2, &InteractionSpec::uniform(0.1, -0.05));
        let mut st = t.initial_state(0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            metropolis_sweep(&t, &mut st, &mut rng);
        }
        for family in st.field.zeta.iter().flat_map(|l| l.chunks(4)) {
            assert!(family.iter().sum::<f64>().abs() < 1e-12);
        }
        let fresh = st.field.leaf_field();
        for (a, b) in fresh.iter().zip(&st.phi) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!((t.log_density(&st.field) - st.log_density).abs() < 1e-8);
    }

    /// Transfers on the 2-leaf window p = 2, d = 1, S = 1, with ζ = (z, -z)
    /// discretized on a lattice that the proposal maps into itself.
    #[test]
    fn detailed_balance_on_two_leaf_toy() {
        let t = target(2, 1, 1, &InteractionSpec::uniform(0.3, -0.2));
        let (h, m, nz) = (0.1, 5i64, 61i64);
        let state_at = |z: f64| {
            let mut st = t.initial_state(0);
            let mv = Move::Transfer { layer: 0, from: 0, to: 1, delta: z };
            let lr = t.log_ratio(&st, &mv);
            t.apply(&mut st, &mv, lr);
            st
        };
        let zs: Vec<f64> = (-(nz / 2)..=nz / 2).map(|k| k as f64 * h).collect();
        let states: Vec<ChainState> = zs.iter().map(|&z| state_at(z)).collect();
        let pi: Vec<f64> = states.iter().map(|s| s.log_density.exp()).collect();
        let n = zs.len();
        let mut pm = vec![vec![0.0; n]; n];
        for a in 0..n {
            // ordered pairs (0,1) and (1,0) with δ ∈ {-m..m}h
            for (from, to) in [(0usize, 1usize), (1, 0)] {
                for k in -m..=m {
                    let delta = k as f64 * h;
                    let shift = if from == 0 { k } else { -k };
                    let bidx = a as i64 + shift;
                    if !(0..n as i64).contains(&bidx) || k == 0 {
                        continue;
                    }
                    let mv = Move::Transfer { layer: 0, from, to, delta };
                    let acc = t.log_ratio(&states[a], &mv).exp().min(1.0);
                    pm[a][bidx as usize] += acc / (2.0 * (2 * m + 1) as f64);
                }
            }
            pm[a][a] = 1.0 - pm[a].iter().sum::<f64>();
        }
        for a in 0..n {
            for b in 0..n {
                let (l, r) = (pi[a] * pm[a][b], pi[b] * pm[b][a]);
                assert!((l - r).abs() <= 1e-12 * (l + r).max(1e-300), "{a} {b}: {l} vs {r}");
            }
        }
        let total: f64 = pi.iter().sum();
        for b in 0..n {
            let flow: f64 = (0..n).map(|a| pi[a] * pm[a][b]).sum();
            assert!((flow - pi[b]).abs() < 1e-12 * total);
        }
    }

    #[test]
    fn gaussian_zeta_covariances() {
        let w = Window::new(2, 1, 3).unwrap();
        let t = target(2, 1, 3, &InteractionSpec::gaussian());
        let cfg = SampleConfig { chains: 1, sweeps: 40_000, burn_in: 1000, seed: 11, orbit: false };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut st = t.initial_state(0);
        for _ in 0..cfg.burn_in {
            metropolis_sweep(&t, &mut st, &mut rng);
        }
        let cov = CovarianceSpec::new(2, 1, 0.1).unwrap();
        let probes = [(0usize, 0usize, 0usize), (0, 0, 1), (1, 0, 0), (1, 0, 1), (2, 0, 0)];
        let mut series = vec![Vec::new(); probes.len()];
        for _ in 0..cfg.sweeps {
            metropolis_sweep(&t, &mut st, &mut rng);
            for (s, &(k, i, j)) in series.iter_mut().zip(&probes) {
                s.push(st.field.zeta[k][i] * st.field.zeta[k][j]);
            }
        }
        for (s, &(k, i, j)) in series.iter().zip(&probes) {
            let n = s.len() as f64;
            let mean = s.iter().sum::<f64>() / n;
            let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let se = (2.0 * integrated_autocorrelation(s) * var / n).sqrt();
            let want = vertex_covariance(&w, &w.ball_at(k as i32, i), &w.ball_at(k as i32, j), &cov).unwrap();
            assert!((mean - want).abs() < 3.0 * se, "layer {k} ({i},{j}): {mean} ± {se} vs {want}");
        }
    }

    #[test]
    fn seeded_runs_repeat_and_tuning_hits_the_band() {
        let w = Window::new(2, 2, 2).unwrap();
        let params = RGParams::new(2, 2, 0.1).unwrap();
        let spec = InteractionSpec::uniform(0.05, 0.0);
        let cfg = SampleConfig { chains: 2, sweeps: 500, burn_in: 500, seed: 5, orbit: false };
        let pairs = [(w.leaf_point(0), w.leaf_point(5))];
        let a = run_chains(w, params, &spec, &cfg, &pairs).unwrap();
        let b = run_chains(w, params, &spec, &cfg, &pairs).unwrap();
        assert_eq!(a.estimates[0].value.to_bits(), b.estimates[0].value.to_bits());
        for c in &a.chains {
            for r in &c.acceptance {
                assert!(*r > 0.1 && *r < 0.9, "{:?}", c.acceptance);
            }
        }
        assert!(run_chains(w, params, &spec, &SampleConfig { chains: 1, ..cfg }, &pairs).is_err());
    }

    #[test]
    fn autocorrelation_of_ar1() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho: f64 = 0.8;
        let mut x = 0.0;
        let xs: Vec<f64> = (0..200_000)
            .map(|_| {
                x = rho * x + (1.0 - rho * rho).sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal);
                x
            })
            .collect();
        let tau = integrated_autocorrelation(&xs);
        let want = 0.5 * (1.0 + rho) / (1.0 - rho);
        assert!((tau / want - 1.0).abs() < 0.1, "{tau} vs {want}");
        let chains: Vec<Vec<f64>> = xs.chunks(50_000).map(|c| c.to_vec()).collect();
        assert!(split_rhat(&chains) < 1.01);
    }
}
