use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use hrg_core::agm::{agm_iterations, elliptic_z, AgmVector};
use hrg_core::conformal::conformal_checks;
use hrg_core::correlator::{
    critical_exponent_fit, default_probes, ope_default_points, ope_leading_check, pair_at_distance,
    robustness_experiment, CorrelationRow, Correlator, InteractionSpec,
};
use hrg_core::gaussian::{os_gram, search_os_witness, CovarianceSpec, OsGram};
use hrg_core::mobius::MobiusWord;
use hrg_core::padic::{distance, PAdicPoint, DEFAULT_PRECISION};
use hrg_core::rg::{
    anomalous_dimension, find_fixed_point, flow as rg_flow, linearize, poly_fixed_point, rg_step_mc, seed_from_poly,
    tune_critical_mu, BlockIntegrator, BoltzmannFactor, FixedPointReport, FlowStep, NewtonOptions,
};
use hrg_core::sampler::{run_chains, SampleConfig};
use hrg_core::tree::{BallFunction, Window};

use crate::config::{Backend, RunConfig};
use crate::output::{open, write_csv, write_json, Header};
use crate::CliError;

type Res = Result<(), CliError>;

fn integrator(cfg: &RunConfig) -> Result<BlockIntegrator, CliError> {
    Ok(BlockIntegrator::new(cfg.params()?, cfg.grid()?)?)
}

fn sink(cfg: &RunConfig) -> Result<Box<dyn std::io::Write>, CliError> {
    Ok(open(cfg.output.as_deref())?)
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Rep {
    Grid,
    Poly,
}

#[derive(Args, Debug, Serialize)]
pub struct FixpointArgs {
    #[arg(long, value_enum, default_value = "grid")]
    pub rep: Rep,
    /// Newton tolerance on ‖RG F - F‖∞.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 40)]
    pub max_iter: usize,
    /// Eigenvalues reported.
    #[arg(long, default_value_t = 4)]
    pub eigenvalues: usize,
}

#[derive(Serialize)]
struct GridFixpoint {
    #[serde(flatten)]
    report: FixedPointReport,
    newton_history: Vec<f64>,
    jacobian_condition: f64,
    warnings: Vec<String>,
}

pub fn fixpoint(cfg: &RunConfig, header: &Header, a: &FixpointArgs) -> Res {
    let params = cfg.params()?;
    match a.rep {
        Rep::Poly => {
            let w = poly_fixed_point(&params)?;
            let result = serde_json::json!({ "rep": "poly", "mu": w.mu(), "g": w.g(), "polynomial": w });
            write_json(&mut *sink(cfg)?, header, &result)?;
        }
        Rep::Grid => {
            let bi = integrator(cfg)?;
            let opts = NewtonOptions {
                tol: a.tol,
                max_iter: a.max_iter,
            };
            let fp = find_fixed_point(&bi, &seed_from_poly(&params, bi.grid())?, opts)?;
            let lin = linearize(&bi, &fp.factor, 0)?;
            let result = GridFixpoint {
                report: FixedPointReport::new(params, &fp, &lin, a.eigenvalues),
                newton_history: fp.history.clone(),
                jacobian_condition: lin.condition,
                warnings: lin.warnings.clone(),
            };
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            write_json(&mut *sink(cfg)?, header, &result)?;
        }
    }
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct ExponentsArgs {
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Serialize)]
struct ExponentRow {
    eps: f64,
    phi: f64,
    lambda2: f64,
    phi2: f64,
    eta2: f64,
    /// `η₂ / (ε/3)`; empty at ε = 0.
    ratio: Option<f64>,
}

pub fn exponents(cfg: &RunConfig, header: &Header, a: &ExponentsArgs) -> Res {
    let bi = integrator(cfg)?;
    let opts = NewtonOptions {
        tol: a.tol,
        ..NewtonOptions::default()
    };
    let an = anomalous_dimension(&bi, opts)?;
    let row = ExponentRow {
        eps: an.eps,
        phi: bi.params().phi(),
        lambda2: an.lambda2,
        phi2: an.phi2,
        eta2: an.eta2,
        ratio: (an.eps > 0.0).then(|| an.eta2 / (an.eps / 3.0)),
    };
    let trailer: Vec<String> = an.linearization.warnings.iter().map(|w| format!("warning: {w}")).collect();
    write_csv(&mut *sink(cfg)?, header, &[row], &trailer)?;
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct TuneArgs {
    /// Steps before a trajectory not yet run off counts by its drift.
    #[arg(long, default_value_t = 30)]
    pub horizon: usize,
    #[arg(long, default_value_t = -0.05, allow_negative_numbers = true)]
    pub lo: f64,
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    pub hi: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Use the polynomial fixed-point coupling g* instead of --g.
    #[arg(long)]
    pub g_star: bool,
}

pub fn tune(cfg: &RunConfig, header: &Header, a: &TuneArgs) -> Res {
    let bi = integrator(cfg)?;
    let g = if a.g_star { poly_fixed_point(bi.params())?.g() } else { cfg.g };
    let t = tune_critical_mu(&bi, g, a.lo, a.hi, a.horizon, a.tol)?;
    let result = serde_json::json!({ "g": g, "mu_c": t.mu_c, "width": t.width, "bisections": t.bisections });
    write_json(&mut *sink(cfg)?, header, &result)?;
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct FlowArgs {
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
}

pub fn flow(cfg: &RunConfig, header: &Header, a: &FlowArgs) -> Res {
    let params = cfg.params()?;
    let grid = cfg.grid()?;
    let c = params.c_self();
    let f0 = BoltzmannFactor::quartic(grid, cfg.g, cfg.mu, c);
    let (rows, failure) = match cfg.backend {
        Backend::Fourier => {
            let (rows, _, err) = rg_flow(&BlockIntegrator::new(params, grid)?, &f0, a.steps);
            (rows, err)
        }
        Backend::Mc => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let record = |step, f: &BoltzmannFactor, prev: Option<&BoltzmannFactor>| FlowStep {
                step,
                c2: f.projection(2, c),
                c4: f.projection(4, c),
                residual: prev.map_or(0.0, |p| {
                    f.log_f.iter().zip(&p.log_f).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
                }),
                edge_mass: f.edge_mass(c, 0.8),
            };
            let mut rows = vec![record(0, &f0, None)];
            let mut f = f0;
            let mut err = None;
            for k in 1..=a.steps {
                match rg_step_mc(&f, &params, cfg.mc_samples, &mut rng) {
                    Ok(next) => {
                        rows.push(record(k, &next.factor, Some(&f)));
                        f = next.factor;
                    }
                    Err(e) => {
                        err = Some(e);
                        break;
                    }
                }
            }
            (rows, err)
        }
    };
    let trailer: Vec<String> = failure.iter().map(|e| format!("stopped: {e}")).collect();
    write_csv(&mut *sink(cfg)?, header, &rows, &trailer)?;
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

#[derive(Deserialize)]
struct CouplingRow {
    layer: i32,
    index: usize,
    g: f64,
    mu: f64,
}

fn interaction(cfg: &RunConfig, window: &Window) -> Result<InteractionSpec, CliError> {
    let mut spec = InteractionSpec::uniform(cfg.g, cfg.mu);
    if let Some(path) = &cfg.couplings {
        let mut rd = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        for (n, row) in rd.deserialize::<CouplingRow>().enumerate() {
            let row = row.map_err(|e| CliError::Input(format!("{} row {}: {e}", path.display(), n + 1)))?;
            if row.layer < 0 || row.layer > window.top || row.index >= window.layer_size(row.layer) {
                return Err(CliError::Input(format!(
                    "{} row {}: no ball ({}, {}) in the window",
                    path.display(),
                    n + 1,
                    row.layer,
                    row.index
                )));
            }
            let ball = window.ball_at(row.layer, row.index);
            for leaf in 0..window.leaf_count() {
                if window.ball_of(&window.leaf_point(leaf), row.layer)? == ball {
                    spec.local.insert(leaf, (row.g, row.mu));
                }
            }
        }
    }
    spec.validate(window)?;
    Ok(spec)
}

/// `leaf:N`, or a point in compact coordinates.
fn parse_point(s: &str, window: &Window) -> Result<PAdicPoint, CliError> {
    let s = s.trim();
    let x = match s.strip_prefix("leaf:") {
        Some(n) => {
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| CliError::Input(format!("bad leaf index in {s:?}")))?;
            if n >= window.leaf_count() {
                return Err(CliError::Input(format!("leaf {n} outside the window")));
            }
            window.leaf_point(n)
        }
        None => PAdicPoint::parse(s, window.p, DEFAULT_PRECISION)?,
    };
    if x.dim() != window.d || !window.contains(&x) {
        return Err(CliError::Input(format!("point {s:?} is not in the window")));
    }
    Ok(x)
}

#[derive(Deserialize)]
struct PairRow {
    x: String,
    y: String,
}

/// Pairs from a CSV with `x,y` columns, or `(leaf 0, leaf 0)` followed by
/// one pair at each distance `p^1 .. p^S`.
fn load_pairs(path: Option<&Path>, window: &Window) -> Result<Vec<(PAdicPoint, PAdicPoint)>, CliError> {
    let Some(path) = path else {
        let mut pairs = vec![(window.leaf_point(0), window.leaf_point(0))];
        for j in 1..=window.top {
            pairs.push(pair_at_distance(window, j)?);
        }
        return Ok(pairs);
    };
    let mut rd = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    rd.deserialize::<PairRow>()
        .enumerate()
        .map(|(n, row)| {
            let row = row.map_err(|e| CliError::Input(format!("{} row {}: {e}", path.display(), n + 1)))?;
            Ok((parse_point(&row.x, window)?, parse_point(&row.y, window)?))
        })
        .collect()
}

fn pair_distance(x: &PAdicPoint, y: &PAdicPoint) -> Result<f64, CliError> {
    Ok(distance(x, y)?.to_f64(x.prime()))
}

#[derive(Args, Debug, Serialize)]
pub struct CorrelateArgs {
    /// CSV with columns x,y; points are `leaf:N` or compact coordinates.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Report the log-log slope over p^1..p^(S-1) instead of the table.
    #[arg(long, conflicts_with_all = ["ope", "corridor"])]
    pub fit: bool,
    /// Report the identity-channel subtraction of the four-point function.
    #[arg(long, conflicts_with = "corridor")]
    pub ope: bool,
    /// Leaves whose couplings are shifted by (--dg, --dmu); reports the
    /// relative change of probe two-point functions.
    #[arg(long, value_delimiter = ',')]
    pub corridor: Vec<usize>,
    #[arg(long, default_value_t = 0.2, allow_negative_numbers = true)]
    pub dg: f64,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub dmu: f64,
}

pub fn correlate(cfg: &RunConfig, header: &Header, a: &CorrelateArgs) -> Res {
    let window = cfg.window()?;
    let (params, grid) = (cfg.params()?, cfg.grid()?);
    let spec = interaction(cfg, &window)?;
    if !a.corridor.is_empty() {
        let probes = match &a.pairs {
            Some(p) => load_pairs(Some(p), &window)?,
            None => default_probes(&window),
        };
        let report = robustness_experiment(window, params, grid, &spec, &a.corridor, a.dg, a.dmu, &probes)?;
        write_json(&mut *sink(cfg)?, header, &report)?;
        if !report.monotone {
            return Err(CliError::Check("relative change is not monotone in the corridor distance".into()));
        }
        return Ok(());
    }
    let corr = Correlator::new(window, params, grid, &spec)?;
    if a.fit {
        let fit = critical_exponent_fit(&corr)?;
        write_json(&mut *sink(cfg)?, header, &fit)?;
    } else if a.ope {
        let (x, ys, z1, z2) = ope_default_points(&window)?;
        let report = ope_leading_check(&corr, &x, &ys, &z1, &z2)?;
        write_json(&mut *sink(cfg)?, header, &report)?;
    } else {
        let rows = load_pairs(a.pairs.as_deref(), &window)?
            .iter()
            .map(|(x, y)| {
                Ok(CorrelationRow {
                    x: x.compact(),
                    y: y.compact(),
                    distance: pair_distance(x, y)?,
                    value: corr.two_point(x, y)?,
                    stderr: None,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let trailer = vec![format!("log Z = {:.17e}", corr.log_partition())];
        write_csv(&mut *sink(cfg)?, header, &rows, &trailer)?;
    }
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct SampleArgs {
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    #[arg(long, default_value_t = 20_000)]
    pub sweeps: u64,
    /// Tuning sweeps before production; defaults to a tenth of --sweeps.
    #[arg(long)]
    pub burn_in: Option<u64>,
    /// Average over all leaf pairs at each requested distance.
    #[arg(long)]
    pub orbit: bool,
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Per-chain acceptance, step sizes, autocorrelation times and R-hat.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

#[derive(Serialize)]
struct SampleRow {
    x: String,
    y: String,
    distance: f64,
    value: f64,
    stderr: f64,
    r_hat: f64,
    tau_max: f64,
}

pub fn sample(cfg: &RunConfig, header: &Header, a: &SampleArgs) -> Res {
    let window = cfg.window()?;
    let spec = interaction(cfg, &window)?;
    let pairs = load_pairs(a.pairs.as_deref(), &window)?;
    let sc = SampleConfig {
        chains: a.chains,
        sweeps: a.sweeps,
        burn_in: a.burn_in.unwrap_or(a.sweeps / 10),
        seed: cfg.seed,
        orbit: a.orbit,
    };
    let report = run_chains(window, cfg.params()?, &spec, &sc, &pairs)?;
    let rows: Vec<SampleRow> = report
        .estimates
        .iter()
        .map(|e| SampleRow {
            x: e.x.clone(),
            y: e.y.clone(),
            distance: e.distance,
            value: e.value,
            stderr: e.stderr,
            r_hat: e.r_hat,
            tau_max: e.tau.iter().cloned().fold(0.0, f64::max),
        })
        .collect();
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let trailer: Vec<String> = report.warnings.iter().map(|w| format!("warning: {w}")).collect();
    write_csv(&mut *sink(cfg)?, header, &rows, &trailer)?;
    if let Some(path) = &a.diagnostics {
        write_json(&mut *open(Some(path))?, header, &report)?;
    }
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct ConformalArgs {
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Fixed Möbius word, e.g. "T(1,2);J;S(1);N", over the configured p and d.
    #[arg(long)]
    pub word: Option<String>,
}

#[derive(Serialize)]
struct TallyRow {
    identity: String,
    passed: usize,
    trials: usize,
    skipped: usize,
    summary: String,
}

pub fn conformal_check(cfg: &RunConfig, header: &Header, a: &ConformalArgs) -> Res {
    let word = a.word.as_deref().map(|w| MobiusWord::parse(w, cfg.p, cfg.d)).transpose()?;
    let tallies = conformal_checks(a.trials, cfg.seed, word.as_ref())?;
    let rows: Vec<TallyRow> = tallies
        .iter()
        .map(|t| TallyRow {
            identity: t.identity.clone(),
            passed: t.passed,
            trials: t.trials,
            skipped: t.skipped,
            summary: format!("{}/{} {}", t.passed, t.trials, if t.all_pass() { "pass" } else { "FAIL" }),
        })
        .collect();
    write_csv(&mut *sink(cfg)?, header, &rows, &[])?;
    let failed: Vec<&str> = tallies.iter().filter(|t| !t.all_pass()).map(|t| t.identity.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(format!("identities failed: {}", failed.join(", "))))
    }
}

/// Stored Gram test: the window, kernel and test functions, with the
/// spectrum found when it was saved.
#[derive(Serialize, Deserialize)]
pub struct OsFixture {
    pub window: Window,
    pub eps: f64,
    pub l: u32,
    pub uv: Option<i32>,
    pub testfns: Vec<BallFunction>,
    pub min_eigenvalue: f64,
    pub norm: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct OsArgs {
    /// UV cutoff layer r: the kernel is constant below distance p^r.
    #[arg(long, allow_negative_numbers = true)]
    pub cutoff: Option<i32>,
    /// Random test-function collections tried.
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Test functions per collection.
    #[arg(long, default_value_t = 20)]
    pub size: usize,
    /// Re-evaluate a stored fixture instead of searching.
    #[arg(long, conflicts_with = "save_fixture")]
    pub fixture: Option<PathBuf>,
    /// Store the most negative collection found.
    #[arg(long)]
    pub save_fixture: Option<PathBuf>,
}

/// Non-cutoff Gram matrices must be PSD to this relative tolerance.
const PSD_TOL: f64 = 1e-10;
/// A cutoff witness needs `λ_min ≤ -WITNESS·‖M‖`.
const WITNESS: f64 = 1e-6;

#[derive(Serialize)]
struct OsResult {
    uv: Option<i32>,
    collection_size: usize,
    eigenvalues: Vec<f64>,
    min_eigenvalue: f64,
    norm: f64,
    relative_min: f64,
    expected: &'static str,
    verdict: &'static str,
}

fn eigenvalues(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    let mat = nalgebra::DMatrix::from_fn(n, n, |i, j| m[i][j]);
    let mut e: Vec<f64> = mat.symmetric_eigen().eigenvalues.iter().cloned().collect();
    e.sort_by(f64::total_cmp);
    e
}

pub fn os_check(cfg: &RunConfig, header: &Header, a: &OsArgs) -> Res {
    let (gram, uv): (OsGram, Option<i32>) = match &a.fixture {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let fx: OsFixture =
                serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let spec = CovarianceSpec::new(fx.window.p, fx.window.d, fx.eps)?.with_l(fx.l).with_uv(fx.uv);
            (os_gram(&fx.window, &fx.testfns, &spec)?, fx.uv)
        }
        None => {
            if cfg.p % 2 == 0 {
                return Err(CliError::Input("the reflection needs odd p (pass --p 3 or larger)".into()));
            }
            let window = cfg.window()?;
            let spec = CovarianceSpec::new(cfg.p, cfg.d, cfg.eps)?.with_l(cfg.l).with_uv(a.cutoff);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let gram = search_os_witness(&window, &spec, a.trials, a.size, &mut rng)?;
            if let Some(path) = &a.save_fixture {
                let fx = OsFixture {
                    window,
                    eps: cfg.eps,
                    l: cfg.l,
                    uv: a.cutoff,
                    testfns: gram.testfns.clone(),
                    min_eigenvalue: gram.spectrum.min_eigenvalue,
                    norm: gram.spectrum.norm,
                };
                let mut f = open(Some(path))?;
                serde_json::to_writer_pretty(&mut f, &fx).map_err(std::io::Error::from)?;
                writeln!(f)?;
                f.flush()?;
            }
            (gram, a.cutoff)
        }
    };
    let rel = gram.relative_min();
    let (expected, ok) = match uv {
        None => ("positive semidefinite", rel >= -PSD_TOL),
        Some(_) => ("a negative eigenvalue", rel <= -WITNESS),
    };
    let result = OsResult {
        uv,
        collection_size: gram.testfns.len(),
        eigenvalues: eigenvalues(&gram.matrix),
        min_eigenvalue: gram.spectrum.min_eigenvalue,
        norm: gram.spectrum.norm,
        relative_min: rel,
        expected,
        verdict: if ok { "pass" } else { "fail" },
    };
    write_json(&mut *sink(cfg)?, header, &result)?;
    if ok {
        Ok(())
    } else {
        Err(CliError::Check(format!("expected {expected}, λ_min/‖M‖ = {rel:.3e}")))
    }
}

#[derive(Args, Debug, Serialize)]
pub struct AgmArgs {
    pub a: f64,
    pub b: f64,
    /// Stop once |a - b| is at most this.
    #[arg(long, default_value_t = 1e-15)]
    pub tol: f64,
}

#[derive(Serialize)]
struct AgmRow {
    step: usize,
    a: f64,
    b: f64,
    gap: f64,
    z: f64,
    /// `|Z(Vₙ) - Z(V₀)|`.
    drift: f64,
}

/// Invariance of `Z` along the orbit.
const AGM_INVARIANCE: f64 = 1e-10;
/// Agreement of `Z` with `π / (2 AGM)`.
const AGM_CLOSED_FORM: f64 = 1e-8;

pub fn agm(cfg: &RunConfig, header: &Header, a: &AgmArgs) -> Res {
    let v = AgmVector::new(a.a, a.b)?;
    let (limit, table) = agm_iterations(v, a.tol);
    let z0 = elliptic_z(v)?;
    let rows: Vec<AgmRow> = table
        .iter()
        .map(|it| {
            let z = elliptic_z(AgmVector::new(it.a, it.b)?)?;
            Ok(AgmRow {
                step: it.step,
                a: it.a,
                b: it.b,
                gap: it.gap,
                z,
                drift: (z - z0).abs(),
            })
        })
        .collect::<hrg_core::Result<_>>()?;
    let closed = std::f64::consts::FRAC_PI_2 / limit;
    let drift = rows.iter().map(|r| r.drift).fold(0.0, f64::max);
    let trailer = vec![
        format!("agm = {limit:.17e}"),
        format!("pi/(2 agm) = {closed:.17e}"),
        format!("|Z - pi/(2 agm)| = {:.3e}", (z0 - closed).abs()),
        format!("max drift = {drift:.3e}"),
    ];
    write_csv(&mut *sink(cfg)?, header, &rows, &trailer)?;
    if drift > AGM_INVARIANCE {
        return Err(CliError::Check(format!("Z drifts by {drift:.3e} along the orbit")));
    }
    if (z0 - closed).abs() > AGM_CLOSED_FORM {
        return Err(CliError::Check(format!("Z differs from pi/(2 agm) by {:.3e}", (z0 - closed).abs())));
    }
    Ok(())
}
