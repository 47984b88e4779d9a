//! Monte Carlo backend for the block integral: averages over explicit
//! zero-sum sibling vectors, with `F` interpolated off the grid.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{BoltzmannFactor, RGParams};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct McStep {
    pub factor: BoltzmannFactor,
    /// Standard error of `log (RG F)(ψ_i)` (including the error of the
    /// normalization at 0).
    pub stderr: Vec<f64>,
}

/// One single-layer RG step by Monte Carlo with `samples` sibling vectors
/// shared across grid points.
pub fn rg_step_mc<R: Rng + ?Sized>(
    f: &BoltzmannFactor,
    params: &RGParams,
    samples: usize,
    rng: &mut R,
) -> Result<McStep> {
    if params.l != 1 {
        return Err(Error::Unsupported("the Monte Carlo backend integrates one layer".into()));
    }
    if samples < 2 {
        return Err(Error::config("need at least two samples"));
    }
    let b = params.b();
    let zetas: Vec<Vec<f64>> = (0..samples)
        .map(|_| {
            let mut z: Vec<f64> = (0..b).map(|_| rng.sample(StandardNormal)).collect();
            let mean = z.iter().sum::<f64>() / b as f64;
            z.iter_mut().for_each(|v| *v -= mean);
            z
        })
        .collect();
    let g = f.grid;
    let mid = g.mid();
    let a = params.a();
    let log_sums = |i: usize| -> Result<Vec<f64>> {
        let a1 = a * g.node(i);
        zetas
            .iter()
            .map(|z| z.iter().map(|zi| f.eval_log(a1 + zi)).sum::<Result<f64>>())
            .collect()
    };
    let s0 = log_sums(mid)?;
    let m0 = s0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let x0: Vec<f64> = s0.iter().map(|s| (s - m0).exp()).collect();
    let mean0 = x0.iter().sum::<f64>() / samples as f64;
    let n = samples as f64;
    let results: Vec<(f64, f64)> = (mid..g.n)
        .into_par_iter()
        .map(|i| {
            let s = log_sums(i)?;
            let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let x: Vec<f64> = s.iter().map(|v| (v - m).exp()).collect();
            let mean = x.iter().sum::<f64>() / n;
            let log_ratio = (m + mean.ln()) - (m0 + mean0.ln());
            let d: Vec<f64> = x.iter().zip(&x0).map(|(x, y)| x / mean - y / mean0).collect();
            let dm = d.iter().sum::<f64>() / n;
            let var = d.iter().map(|v| (v - dm).powi(2)).sum::<f64>() / (n - 1.0);
            Ok((log_ratio, (var / n).sqrt()))
        })
        .collect::<Result<_>>()?;
    let mut log_f = vec![0.0; g.n];
    let mut stderr = vec![0.0; g.n];
    for (j, (v, e)) in results.into_iter().enumerate() {
        log_f[mid + j] = v;
        log_f[mid - j] = v;
        stderr[mid + j] = e;
        stderr[mid - j] = e;
    }
    Ok(McStep {
        factor: BoltzmannFactor { grid: g, log_f },
        stderr,
    })
}
