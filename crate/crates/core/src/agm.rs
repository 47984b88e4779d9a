//! Gauss's arithmetic-geometric mean as a renormalization map.
//!
//! `Z(a, b) = ∫₀^{π/2} (a² cos²θ + b² sin²θ)^{-1/2} dθ` is invariant under
//! `(a, b) ↦ ((a+b)/2, √(ab))`, whose orbit collapses quadratically onto the
//! line of fixed points `a = b`, where `Z = π/(2a)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Absolute tolerance of the quadrature for `Z`.
pub const Z_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgmVector {
    pub a: f64,
    pub b: f64,
}

impl AgmVector {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::domain(format!("AGM needs a, b > 0, got ({a}, {b})")));
        }
        Ok(AgmVector { a, b })
    }

    pub fn gap(&self) -> f64 {
        (self.a - self.b).abs()
    }
}

pub fn elliptic_z(v: AgmVector) -> Result<f64> {
    let (a2, b2) = (v.a * v.a, v.b * v.b);
    quadrature::integrate(
        |t| {
            let (s, c) = t.sin_cos();
            (a2 * c * c + b2 * s * s).sqrt().recip()
        },
        0.0,
        std::f64::consts::FRAC_PI_2,
        Z_TOL,
    )
}

pub fn rg_agm(v: AgmVector) -> AgmVector {
    AgmVector {
        a: 0.5 * (v.a + v.b),
        b: (v.a * v.b).sqrt(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AgmIteration {
    pub step: usize,
    pub a: f64,
    pub b: f64,
    pub gap: f64,
}

/// Iterates [`rg_agm`] until `|a - b| <= tol` or the gap reaches rounding
/// level, returning the limit and the orbit.
pub fn agm_iterations(v: AgmVector, tol: f64) -> (f64, Vec<AgmIteration>) {
    let mut cur = v;
    let mut table = vec![AgmIteration {
        step: 0,
        a: cur.a,
        b: cur.b,
        gap: cur.gap(),
    }];
    while cur.gap() > tol && cur.gap() > 4.0 * f64::EPSILON * cur.a.max(cur.b) {
        cur = rg_agm(cur);
        table.push(AgmIteration {
            step: table.len(),
            a: cur.a,
            b: cur.b,
            gap: cur.gap(),
        });
    }
    (0.5 * (cur.a + cur.b), table)
}

pub fn agm_limit(v: AgmVector, tol: f64) -> f64 {
    agm_iterations(v, tol).0
}
