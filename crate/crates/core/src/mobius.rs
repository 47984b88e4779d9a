//! Global conformal maps of `Q_p^d ∪ {∞}` as words in generators, the
//! absolute cross-ratio, and the reflection used for half-space positivity.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::padic::{random_point, Norm, PAdicPoint, PAdicScalar, ProjPoint, DEFAULT_PRECISION};
use crate::tree::{path_overlap_delta, Window};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Generator {
    Translate(PAdicPoint),
    /// `x -> p^m x`.
    Scale(i32),
    /// `J(x) = |x|^2 x`, exchanging 0 and ∞.
    Invert,
    /// `x -> -x` on every coordinate.
    Negate,
    /// `(x_1..x_d) -> (x_{π(1)}..x_{π(d)})`.
    Permute(Vec<usize>),
}

/// Generators applied left to right.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MobiusWord {
    pub p: u32,
    pub d: usize,
    pub gens: Vec<Generator>,
}

fn invert_point(x: &PAdicPoint) -> ProjPoint {
    match x.valuation() {
        None => ProjPoint::Infinity,
        // |x|^2 = p^{-2v} as a rational scalar
        Some(v) => ProjPoint::Finite(x.shift(-2 * v)),
    }
}

impl MobiusWord {
    pub fn new(p: u32, d: usize, gens: Vec<Generator>) -> Result<Self> {
        let w = MobiusWord { p, d, gens };
        w.validate()?;
        Ok(w)
    }

    pub fn identity(p: u32, d: usize) -> Self {
        MobiusWord {
            p,
            d,
            gens: Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        for g in &self.gens {
            match g {
                Generator::Translate(a) if a.prime() != self.p || a.dim() != self.d => {
                    return Err(Error::config("translation vector has wrong p or d"));
                }
                Generator::Permute(pi) => {
                    let mut seen = vec![false; self.d];
                    if pi.len() != self.d {
                        return Err(Error::config("permutation has wrong length"));
                    }
                    for &i in pi {
                        if i >= self.d || std::mem::replace(&mut seen[i], true) {
                            return Err(Error::config(format!("{pi:?} is not a permutation")));
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// `f ∘ g` in the sense "apply `g`, then `self`".
    pub fn after(&self, g: &MobiusWord) -> MobiusWord {
        let mut gens = g.gens.clone();
        gens.extend(self.gens.iter().cloned());
        MobiusWord {
            p: self.p,
            d: self.d,
            gens,
        }
    }

    fn zero(&self) -> PAdicPoint {
        PAdicPoint::zero(self.p, self.d, DEFAULT_PRECISION)
    }

    fn apply_gen(&self, g: &Generator, x: &ProjPoint) -> Result<ProjPoint> {
        let out = match (g, x) {
            (Generator::Invert, ProjPoint::Infinity) => ProjPoint::Finite(self.zero()),
            (Generator::Invert, ProjPoint::Finite(x)) => invert_point(x),
            (_, ProjPoint::Infinity) => ProjPoint::Infinity,
            (Generator::Translate(a), ProjPoint::Finite(x)) => ProjPoint::Finite(x.add(a)?),
            (Generator::Scale(m), ProjPoint::Finite(x)) => ProjPoint::Finite(x.shift(*m)),
            (Generator::Negate, ProjPoint::Finite(x)) => ProjPoint::Finite(x.neg()),
            (Generator::Permute(pi), ProjPoint::Finite(x)) => {
                ProjPoint::Finite(x.with_coords(pi.iter().map(|&i| x.coord(i).clone()).collect())?)
            }
        };
        if let ProjPoint::Finite(y) = &out {
            if let Some(v) = y.valuation() {
                if y.precision() <= v {
                    return Err(Error::Precision(format!(
                        "no significant digits left after {g:?}; enlarge the precision window"
                    )));
                }
            }
        }
        Ok(out)
    }

    pub fn apply(&self, x: &ProjPoint) -> Result<ProjPoint> {
        let mut y = x.clone();
        for g in &self.gens {
            y = self.apply_gen(g, &y)?;
        }
        Ok(y)
    }

    pub fn apply_finite(&self, x: &PAdicPoint) -> Result<ProjPoint> {
        self.apply(&ProjPoint::Finite(x.clone()))
    }

    /// Radon-Nikodym factor of the word at `x`, as an exponent of `p`.
    ///
    /// The trajectory of `x` must avoid 0 before every inversion and must not
    /// pass through ∞.
    pub fn jacobian_exponent(&self, x: &PAdicPoint) -> Result<i64> {
        let d = self.d as i64;
        let mut y = x.clone();
        let mut total = 0i64;
        for g in &self.gens {
            total += match g {
                Generator::Scale(m) => -(*m as i64) * d,
                Generator::Invert => match y.norm() {
                    Norm::Zero => {
                        return Err(Error::Pole(format!("inversion at 0 along the trajectory of {x}")))
                    }
                    Norm::Pow(e) => -2 * d * e as i64,
                },
                _ => 0,
            };
            y = match self.apply_gen(g, &ProjPoint::Finite(y))? {
                ProjPoint::Finite(z) => z,
                ProjPoint::Infinity => {
                    return Err(Error::Pole(format!("{x} is sent to ∞")));
                }
            };
        }
        Ok(total)
    }

    pub fn jacobian_factor(&self, x: &PAdicPoint) -> Result<f64> {
        Ok((self.p as f64).powi(self.jacobian_exponent(x)? as i32))
    }

    /// Parses `T(a);S(-1);J;N;P(1,0)`. Translation vectors use the scalar
    /// syntax of [`PAdicScalar::parse`], comma-separated per coordinate.
    pub fn parse(s: &str, p: u32, d: usize) -> Result<Self> {
        let mut gens = Vec::new();
        for tok in s.split(';').map(str::trim).filter(|t| !t.is_empty()) {
            let arg = |t: &str| -> Result<String> {
                t[1..]
                    .trim()
                    .strip_prefix('(')
                    .and_then(|a| a.strip_suffix(')'))
                    .map(str::to_owned)
                    .ok_or_else(|| Error::Parse(format!("expected an argument in {t:?}")))
            };
            let g = match tok.chars().next() {
                Some('T') => Generator::Translate(PAdicPoint::parse(&arg(tok)?, p, DEFAULT_PRECISION)?),
                Some('S') => Generator::Scale(
                    arg(tok)?
                        .trim()
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad scale in {tok:?}")))?,
                ),
                Some('J') if tok == "J" => Generator::Invert,
                Some('N') if tok == "N" => Generator::Negate,
                Some('P') => Generator::Permute(
                    arg(tok)?
                        .split(',')
                        .map(|i| {
                            i.trim()
                                .parse()
                                .map_err(|_| Error::Parse(format!("bad index in {tok:?}")))
                        })
                        .collect::<Result<_>>()?,
                ),
                _ => return Err(Error::Parse(format!("unknown generator {tok:?}"))),
            };
            gens.push(g);
        }
        Self::new(p, d, gens)
    }
}

impl fmt::Display for MobiusWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, g) in self.gens.iter().enumerate() {
            if i > 0 {
                write!(f, ";")?;
            }
            match g {
                Generator::Translate(a) => {
                    write!(f, "T(")?;
                    for (j, c) in a.coords().iter().enumerate() {
                        if j > 0 {
                            write!(f, ",")?;
                        }
                        write!(f, "{c}")?;
                    }
                    write!(f, ")")?;
                }
                Generator::Scale(m) => write!(f, "S({m})")?,
                Generator::Invert => write!(f, "J")?,
                Generator::Negate => write!(f, "N")?,
                Generator::Permute(pi) => {
                    let parts: Vec<String> = pi.iter().map(|i| i.to_string()).collect();
                    write!(f, "P({})", parts.join(","))?;
                }
            }
        }
        Ok(())
    }
}

/// Random word of the given length; translations are drawn from the ball of
/// radius `p^radius_exp`.
pub fn random_word<R: Rng + ?Sized>(p: u32, d: usize, len: usize, radius_exp: i32, rng: &mut R) -> MobiusWord {
    let gens = (0..len)
        .map(|_| match rng.random_range(0..5) {
            0 => Generator::Translate(random_point(p, d, radius_exp, 12, rng)),
            1 => Generator::Scale(rng.random_range(-2..=2)),
            2 => Generator::Invert,
            3 => Generator::Negate,
            _ => {
                let mut pi: Vec<usize> = (0..d).collect();
                pi.shuffle(rng);
                Generator::Permute(pi)
            }
        })
        .collect();
    MobiusWord { p, d, gens }
}

fn dist_exp(a: &PAdicPoint, b: &PAdicPoint) -> Result<i32> {
    a.sub(b)?
        .norm()
        .exponent()
        .ok_or_else(|| Error::Precision("points agree to every carried digit".into()))
}

/// Exponent `e` with `CR(x1,x2,x3,x4) = |x1-x3||x2-x4| / (|x1-x4||x2-x3|) = p^e`.
/// Factors containing ∞ are dropped.
pub fn cross_ratio(x1: &ProjPoint, x2: &ProjPoint, x3: &ProjPoint, x4: &ProjPoint) -> Result<i32> {
    let pts = [x1, x2, x3, x4];
    if pts.iter().filter(|x| x.is_infinity()).count() > 1 {
        return Err(Error::domain("coincident points in cross-ratio"));
    }
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            if let (ProjPoint::Finite(a), ProjPoint::Finite(b)) = (a, b) {
                dist_exp(a, b)?;
            }
        }
    }
    let factor = |a: &ProjPoint, b: &ProjPoint| -> Result<i32> {
        match (a, b) {
            (ProjPoint::Finite(a), ProjPoint::Finite(b)) => dist_exp(a, b),
            _ => Ok(0),
        }
    };
    Ok(factor(x1, x3)? + factor(x2, x4)? - factor(x1, x4)? - factor(x2, x3)?)
}

/// `CR = p^{-δ}` for a quadruple inside the window.
pub fn check_mmd(x1: &ProjPoint, x2: &ProjPoint, x3: &ProjPoint, x4: &ProjPoint, window: &Window) -> Result<bool> {
    for x in [x1, x2, x3, x4] {
        if let ProjPoint::Finite(x) = x {
            if !window.contains(x) {
                return Err(Error::domain(format!("{x} lies outside the window")));
            }
        }
    }
    let cr = cross_ratio(x1, x2, x3, x4)?;
    let delta = path_overlap_delta(x1, x2, x3, x4)?;
    Ok(cr as i64 == -delta)
}

/// `|J(x) - J(y)| = |x - y| |x|^{-1} |y|^{-1}`, compared as exponents.
pub fn check_inversion_identity(x: &PAdicPoint, y: &PAdicPoint) -> Result<bool> {
    let (Some(ex), Some(ey)) = (x.norm().exponent(), y.norm().exponent()) else {
        return Err(Error::domain("inversion identity needs nonzero points"));
    };
    let exy = dist_exp(x, y)?;
    let (ProjPoint::Finite(jx), ProjPoint::Finite(jy)) = (invert_point(x), invert_point(y)) else {
        unreachable!("nonzero points invert to finite points");
    };
    Ok(dist_exp(&jx, &jy)? == exy - ex - ey)
}

/// `θ(x_1, .., x_d) = (-x_1, x_2, .., x_d)`.
pub fn reflect(x: &PAdicPoint) -> PAdicPoint {
    let mut coords = x.coords().to_vec();
    coords[0] = coords[0].neg();
    PAdicPoint::new(coords).expect("same shape")
}

/// Half-space sign from the leading digit of the first coordinate: `+1` for
/// digits `1..=(p-1)/2`, `-1` for the others, `0` on `x_1 = 0`.
pub fn sign(x: &PAdicPoint) -> Result<i8> {
    sign_of_scalar(x.coord(0))
}

pub fn sign_of_scalar(x1: &PAdicScalar) -> Result<i8> {
    let p = x1.prime();
    if p % 2 == 0 {
        return Err(Error::Unsupported(
            "the half-space sign is only defined for odd p".into(),
        ));
    }
    Ok(match x1.digits().first() {
        None => 0,
        Some(&a) if a <= (p - 1) / 2 => 1,
        Some(_) => -1,
    })
}
