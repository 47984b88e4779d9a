//! Gauss-Hermite rules and adaptive Gauss-Kronrod integration.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Nodes and weights for `E f(X)`, `X ~ N(0, 1)`, exact for polynomials of
/// degree `< 2n`. Built from the eigen-decomposition of the Jacobi matrix of
/// the probabilists' Hermite polynomials.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let jac = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// 15-point Kronrod estimate and its embedded 7-point Gauss estimate.
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, g * h)
}

/// Most subintervals [`integrate`] will create.
const MAX_INTERVALS: usize = 2000;

/// Globally adaptive G7K15 quadrature of `f` over `[a, b]`: the interval with
/// the largest error estimate is bisected until the total estimate drops
/// below `max(tol, 1e-15 |I|)`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let eval = |lo: f64, hi: f64| -> Result<(f64, f64, f64, f64)> {
        let (k, g) = gk15(&f, lo, hi);
        if !k.is_finite() {
            return Err(Error::Numeric(format!("non-finite integrand on [{lo}, {hi}]")));
        }
        Ok((lo, hi, k, (k - g).abs()))
    };
    let mut parts = vec![eval(a, b)?];
    loop {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= tol.max(1e-15 * total.abs()) {
            return Ok(total);
        }
        if parts.len() >= MAX_INTERVALS {
            return Err(Error::NoConvergence {
                iterations: parts.len(),
                detail: format!("quadrature error estimate {err:e} above {tol:e}"),
            });
        }
        let (worst, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(total);
        }
        parts.push(eval(lo, mid)?);
        parts.push(eval(mid, hi)?);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hermite_moments() {
        let (x, w) = gauss_hermite(12);
        let moment = |k: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum::<f64>();
        assert_relative_eq!(moment(0), 1.0, epsilon = 1e-13);
        assert!(moment(1).abs() < 1e-13);
        assert_relative_eq!(moment(2), 1.0, epsilon = 1e-12);
        assert_relative_eq!(moment(4), 3.0, epsilon = 1e-12);
        assert_relative_eq!(moment(8), 105.0, epsilon = 1e-9);
        assert_relative_eq!(moment(22), 13749310575.0, max_relative = 1e-9);
    }

    #[test]
    fn kronrod_integrals() {
        let v = integrate(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-13).unwrap();
        assert_relative_eq!(v, 2.0, epsilon = 1e-12);
        let v = integrate(|x: f64| 1.0 / (1.0 + x * x), -50.0, 50.0, 1e-12).unwrap();
        assert_relative_eq!(v, 2.0 * 50f64.atan(), epsilon = 1e-11);
        assert!(integrate(|_| f64::NAN, 0.0, 1.0, 1e-8).is_err());
    }
}
