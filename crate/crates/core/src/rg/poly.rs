//! Second-order expansion of the RG map on Wick polynomials.
//!
//! With `V = Σ c_n :φⁿ:` and `log E e^{-ΣV} = -E ΣV + ½ Var ΣV + …`,
//! `V' = b Σ c_n aⁿ :ψⁿ:
//!      - ½ Σ_{n,m} c_n c_m Σ_{k≥1} C(n,k) C(m,k) k! S_k a^{n+m-2k} :ψ^{n-k}: :ψ^{m-k}:`
//! where `S_k = Σ_{i,j} E[ζ_i ζ_j]^k = b v^k + b(b-1)(-1/b)^k`, and Wick
//! products are re-expanded with
//! `:ψ^A: :ψ^B: = Σ_q C(A,q) C(B,q) q! c^q :ψ^{A+B-2q}:`.

use serde::{Deserialize, Serialize};

use super::{wick, RGParams};
use crate::error::{Error, Result};

/// `V(φ) = Σ_n coeffs[n] :φⁿ:` with Wick ordering at variance `c`; constant
/// terms are dropped. `coeffs[2]` is μ and `coeffs[4]` is g.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WickPolynomial {
    pub c: f64,
    pub coeffs: Vec<f64>,
}

impl WickPolynomial {
    pub fn zero(c: f64, order: usize) -> Self {
        WickPolynomial {
            c,
            coeffs: vec![0.0; order + 1],
        }
    }

    pub fn quartic(c: f64, mu: f64, g: f64, order: usize) -> Self {
        let mut w = Self::zero(c, order.max(4));
        w.coeffs[2] = mu;
        w.coeffs[4] = g;
        w
    }

    pub fn order(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn mu(&self) -> f64 {
        self.coeffs.get(2).copied().unwrap_or(0.0)
    }

    pub fn g(&self) -> f64 {
        self.coeffs.get(4).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(n, c)| if *c == 0.0 { 0.0 } else { c * wick(n as u32, self.c, x) })
            .sum()
    }
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// One RG step of a Wick polynomial to second order in its coefficients,
/// truncated at `order`.
pub fn rg_step_poly(w: &WickPolynomial, params: &RGParams, order: usize) -> Result<WickPolynomial> {
    if order < 4 {
        return Err(Error::config("truncation order must be at least 4"));
    }
    if w.coeffs.iter().skip(order + 1).any(|c| *c != 0.0) {
        return Err(Error::domain(format!(
            "polynomial has terms above the truncation order {order}"
        )));
    }
    let mut cur = w.clone();
    cur.coeffs.resize(order + 1, 0.0);
    for _ in 0..params.l {
        cur = step_once(&cur, params, order);
    }
    Ok(cur)
}

fn step_once(w: &WickPolynomial, params: &RGParams, order: usize) -> WickPolynomial {
    let b = params.b() as f64;
    let a = params.a();
    let v = params.v();
    let c = w.c;
    let s_k = |k: usize| b * v.powi(k as i32) + b * (b - 1.0) * (-1.0 / b).powi(k as i32);
    let mut out = vec![0.0; order + 1];
    for n in 1..=order {
        out[n] += b * w.coeffs[n] * a.powi(n as i32);
    }
    for n in 1..=order {
        for m in 1..=order {
            let cnm = w.coeffs[n] * w.coeffs[m];
            if cnm == 0.0 {
                continue;
            }
            for k in 1..=n.min(m) {
                let pre = 0.5 * cnm * binom(n, k) * binom(m, k) * factorial(k) * s_k(k) * a.powi((n + m - 2 * k) as i32);
                let (ea, eb) = (n - k, m - k);
                for q in 0..=ea.min(eb) {
                    let deg = ea + eb - 2 * q;
                    if deg == 0 || deg > order {
                        continue;
                    }
                    out[deg] -= pre * binom(ea, q) * binom(eb, q) * factorial(q) * c.powi(q as i32);
                }
            }
        }
    }
    WickPolynomial { c, coeffs: out }
}

/// Fixed point of the second-order map restricted to `(μ, g)` (order 4),
/// by Newton iteration from the quartic-only solution
/// `g* = (b a⁴ - 1)/(36 (b-1) a⁴)`.
pub fn poly_fixed_point(params: &RGParams) -> Result<WickPolynomial> {
    let c = params.c_self();
    let single = RGParams { l: 1, ..*params };
    let b = single.b() as f64;
    let a4 = single.a().powi(4);
    let g0 = (b * a4 - 1.0) / (36.0 * (b - 1.0) * a4);
    let resid = |mu: f64, g: f64| -> Result<(f64, f64)> {
        let w = rg_step_poly(&WickPolynomial::quartic(c, mu, g, 4), &single, 4)?;
        Ok((w.mu() - mu, w.g() - g))
    };
    let (mut mu, mut g) = (0.0, g0);
    for _ in 0..100 {
        let (r1, r2) = resid(mu, g)?;
        if r1.abs().max(r2.abs()) < 1e-15 {
            return Ok(WickPolynomial::quartic(c, mu, g, 4));
        }
        let h = 1e-7 * (1.0 + g.abs());
        let (a1, a2) = resid(mu + h, g)?;
        let (b1, b2) = resid(mu, g + h)?;
        let j = [[(a1 - r1) / h, (b1 - r1) / h], [(a2 - r2) / h, (b2 - r2) / h]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 {
            return Err(Error::Numeric("singular Jacobian in the polynomial fixed point".into()));
        }
        mu -= (j[1][1] * r1 - j[0][1] * r2) / det;
        g -= (-j[1][0] * r1 + j[0][0] * r2) / det;
    }
    Err(Error::NoConvergence {
        iterations: 100,
        detail: "polynomial fixed point".into(),
    })
}
