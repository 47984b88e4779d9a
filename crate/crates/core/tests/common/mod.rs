//! Brute-force oracle for a single block: a tensor trapezoid rule against
//! the standard normal over the top field and `b - 1` orthonormal coordinates
//! of the zero-sum sibling vector.

#![allow(dead_code)]

use hrg_core::rg::{wick, RGParams};
use rayon::prelude::*;

const MAX_B: usize = 8;

pub struct Brute {
    pub log_z: f64,
    /// `⟨Π_{i ∈ obs} φ_i⟩` for every requested leaf multiset.
    pub moments: Vec<f64>,
}

/// Helmert basis of `{Σ z = 0}` in `R^b`.
fn helmert(b: usize) -> Vec<Vec<f64>> {
    (1..b)
        .map(|k| {
            let norm = ((k * (k + 1)) as f64).sqrt();
            (0..b)
                .map(|i| match i.cmp(&k) {
                    std::cmp::Ordering::Less => 1.0 / norm,
                    std::cmp::Ordering::Equal => -(k as f64) / norm,
                    std::cmp::Ordering::Greater => 0.0,
                })
                .collect()
        })
        .collect()
}

/// Trapezoid nodes on `[-l, l]` with `E f(X) ≈ Σ w f(x)`, `X ~ N(0, 1)`.
/// Converges geometrically in `1/h` for entire, rapidly decaying integrands.
pub fn normal_trapezoid(n: usize, l: f64) -> (Vec<f64>, Vec<f64>) {
    let h = 2.0 * l / (n - 1) as f64;
    let x: Vec<f64> = (0..n).map(|k| -l + k as f64 * h).collect();
    let w = x
        .iter()
        .map(|x| h * (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt())
        .collect();
    (x, w)
}

/// `(g, μ)` per leaf of the `S = 1` window, leaf factors
/// `exp(-g :φ⁴: - μ :φ²:)` Wick-ordered at the self-covariance.
pub fn single_block(params: &RGParams, couplings: &[(f64, f64)], obs: &[Vec<usize>], nodes: usize, half_width: f64) -> Brute {
    let b = params.b();
    assert_eq!(couplings.len(), b);
    assert!(b <= MAX_B);
    let c = params.c_self();
    let a = params.a();
    let (x, w) = normal_trapezoid(nodes, half_width);
    let basis = helmert(b);
    let log_f = |i: usize, phi: f64| -couplings[i].0 * wick(4, c, phi) - couplings[i].1 * wick(2, c, phi);
    let lw: Vec<f64> = w.iter().map(|v| v.ln()).collect();
    let dims = b - 1;
    let inner = nodes.pow(dims as u32);
    // per top node: running (shift, Σ e^{t - shift}, Σ e^{t - shift} Π φ)
    let per_top: Vec<(f64, Vec<f64>)> = (0..nodes)
        .into_par_iter()
        .map(|q0| {
            let psi = c.sqrt() * x[q0];
            let mut max = f64::NEG_INFINITY;
            let mut sums = vec![0.0; obs.len() + 1];
            let mut phi = [0.0f64; MAX_B];
            let mut digits = [0usize; MAX_B];
            for _ in 0..inner {
                let mut t = lw[q0];
                phi[..b].fill(a * psi);
                for (k, v) in basis.iter().enumerate() {
                    let q = digits[k];
                    t += lw[q];
                    for i in 0..b {
                        phi[i] += x[q] * v[i];
                    }
                }
                for k in 0..dims {
                    digits[k] += 1;
                    if digits[k] < nodes {
                        break;
                    }
                    digits[k] = 0;
                }
                t += (0..b).map(|i| log_f(i, phi[i])).sum::<f64>();
                if t > max {
                    let r = (max - t).exp();
                    sums.iter_mut().for_each(|s| *s *= r);
                    max = t;
                }
                let e = (t - max).exp();
                sums[0] += e;
                for (k, o) in obs.iter().enumerate() {
                    sums[k + 1] += e * o.iter().map(|&i| phi[i]).product::<f64>();
                }
            }
            (max, sums)
        })
        .collect();
    let max = per_top.iter().map(|(m, _)| *m).fold(f64::NEG_INFINITY, f64::max);
    let mut sums = vec![0.0; obs.len() + 1];
    for (m, s) in &per_top {
        let scale = (m - max).exp();
        for (acc, v) in sums.iter_mut().zip(s) {
            *acc += scale * v;
        }
    }
    Brute {
        log_z: max + sums[0].ln(),
        moments: sums[1..].iter().map(|s| s / sums[0]).collect(),
    }
}
