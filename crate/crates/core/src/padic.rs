//! Finite-precision arithmetic on `Q_p` and `Q_p^d`.
//!
//! A scalar is stored as a valuation plus the digits that are known, i.e. all
//! digits below its absolute precision. Norms and distances are exact integer
//! powers of `p`; nothing geometric ever goes through floating point.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

/// Default number of significant digits carried by a scalar.
pub const DEFAULT_PRECISION: usize = 32;

/// A p-adic norm: either zero or `p^e`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Norm {
    Zero,
    Pow(i32),
}

impl Norm {
    pub fn exponent(self) -> Option<i32> {
        match self {
            Norm::Zero => None,
            Norm::Pow(e) => Some(e),
        }
    }

    pub fn to_f64(self, p: u32) -> f64 {
        match self {
            Norm::Zero => 0.0,
            Norm::Pow(e) => (p as f64).powi(e),
        }
    }
}

/// An element of `Q_p` known to a finite absolute precision.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PAdicScalar {
    p: u32,
    /// Digits at valuations `< prec` are known.
    prec: i32,
    /// Valuation of the leading digit, `None` for zero.
    val: Option<i32>,
    /// `digits[i]` is the digit at valuation `val + i`.
    digits: Vec<u32>,
}

fn check_prime(p: u32) -> Result<()> {
    if p < 2 {
        return Err(Error::config(format!("p must be >= 2, got {p}")));
    }
    Ok(())
}

impl PAdicScalar {
    pub fn zero(p: u32, prec: i32) -> Self {
        PAdicScalar {
            p,
            prec,
            val: None,
            digits: Vec::new(),
        }
    }

    /// Builds `p^val * (digits[0] + digits[1] p + ...)`; leading zeros are stripped.
    pub fn from_digits(p: u32, val: i32, digits: Vec<u32>) -> Result<Self> {
        check_prime(p)?;
        if let Some(&bad) = digits.iter().find(|&&a| a >= p) {
            return Err(Error::config(format!("digit {bad} out of range for p = {p}")));
        }
        let prec = val + digits.len() as i32;
        Ok(Self::normalized(p, val, prec, digits))
    }

    fn normalized(p: u32, lo: i32, prec: i32, mut digits: Vec<u32>) -> Self {
        let lead = digits.iter().position(|&a| a != 0);
        match lead {
            None => Self::zero(p, prec),
            Some(k) => {
                digits.drain(..k);
                PAdicScalar {
                    p,
                    prec,
                    val: Some(lo + k as i32),
                    digits,
                }
            }
        }
    }

    /// The integer `n` carried to `width` significant digits.
    pub fn from_i64(p: u32, n: i64, width: usize) -> Result<Self> {
        check_prime(p)?;
        if n == 0 {
            return Ok(Self::zero(p, width as i32));
        }
        let mut m = n.unsigned_abs();
        let mut val = 0;
        while m % p as u64 == 0 {
            m /= p as u64;
            val += 1;
        }
        let mut digits = Vec::with_capacity(width);
        for _ in 0..width {
            digits.push((m % p as u64) as u32);
            m /= p as u64;
        }
        let x = Self::from_digits(p, val, digits)?;
        Ok(if n < 0 { x.neg() } else { x })
    }

    /// `num / p^den_pow` to `width` significant digits.
    pub fn from_ratio(p: u32, num: i64, den_pow: u32, width: usize) -> Result<Self> {
        Ok(Self::from_i64(p, num, width)?.shift(-(den_pow as i32)))
    }

    pub fn prime(&self) -> u32 {
        self.p
    }

    pub fn precision(&self) -> i32 {
        self.prec
    }

    pub fn valuation(&self) -> Option<i32> {
        self.val
    }

    /// Number of significant digits carried (0 for zero).
    pub fn width(&self) -> usize {
        self.digits.len()
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    pub fn is_zero(&self) -> bool {
        self.val.is_none()
    }

    /// Digit at valuation `v`; errors if `v` is beyond the known precision.
    pub fn digit_at(&self, v: i32) -> Result<u32> {
        if v >= self.prec {
            return Err(Error::Precision(format!(
                "digit at valuation {v} requested, known below {}",
                self.prec
            )));
        }
        Ok(match self.val {
            Some(val) if v >= val => self.digits[(v - val) as usize],
            _ => 0,
        })
    }

    fn low(&self) -> i32 {
        self.val.unwrap_or(self.prec)
    }

    pub fn norm(&self) -> Norm {
        match self.val {
            None => Norm::Zero,
            Some(v) => Norm::Pow(-v),
        }
    }

    fn same_prime(&self, other: &Self) -> Result<()> {
        if self.p != other.p {
            return Err(Error::config(format!(
                "incompatible primes {} and {}",
                self.p, other.p
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_prime(other)?;
        let p = self.p;
        let prec = self.prec.min(other.prec);
        let lo = self.low().min(other.low());
        if lo >= prec {
            return Ok(Self::zero(p, prec));
        }
        let mut digits = Vec::with_capacity((prec - lo) as usize);
        let mut carry = 0u32;
        for v in lo..prec {
            let s = self.digit_at(v)? + other.digit_at(v)? + carry;
            digits.push(s % p);
            carry = s / p;
        }
        Ok(Self::normalized(p, lo, prec, digits))
    }

    pub fn neg(&self) -> Self {
        let Some(val) = self.val else {
            return self.clone();
        };
        let p = self.p;
        let digits = self
            .digits
            .iter()
            .enumerate()
            .map(|(i, &a)| if i == 0 { p - a } else { p - 1 - a })
            .collect();
        PAdicScalar {
            p,
            prec: self.prec,
            val: Some(val),
            digits,
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    /// Multiplication by `p^m`.
    pub fn shift(&self, m: i32) -> Self {
        PAdicScalar {
            p: self.p,
            prec: self.prec + m,
            val: self.val.map(|v| v + m),
            digits: self.digits.clone(),
        }
    }

    /// Truncated product; the result carries `min(width)` significant digits.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_prime(other)?;
        let p = self.p as u64;
        match (self.val, other.val) {
            (Some(vx), Some(vy)) => {
                let w = self.digits.len().min(other.digits.len());
                let mut digits = Vec::with_capacity(w);
                let mut carry = 0u64;
                for k in 0..w {
                    let mut s = carry;
                    for i in 0..=k {
                        s += self.digits[i] as u64 * other.digits[k - i] as u64;
                    }
                    digits.push((s % p) as u32);
                    carry = s / p;
                }
                let val = vx + vy;
                Ok(Self::normalized(self.p, val, val + w as i32, digits))
            }
            (None, Some(vy)) => Ok(Self::zero(self.p, self.prec + vy)),
            (Some(vx), None) => Ok(Self::zero(self.p, other.prec + vx)),
            (None, None) => Ok(Self::zero(self.p, self.prec.min(other.prec))),
        }
    }

    /// Parses either the canonical form `p^v * (a b c ...)`, an integer, or
    /// `n/p^k` written as `n/D` with `D` a power of `p`.
    pub fn parse(s: &str, p: u32, width: usize) -> Result<Self> {
        check_prime(p)?;
        let s = s.trim();
        if let Some((head, tail)) = s.split_once('*') {
            let (base, exp) = head
                .trim()
                .split_once('^')
                .ok_or_else(|| Error::Parse(format!("expected p^v in {s:?}")))?;
            let base: u32 = base
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad prime in {s:?}")))?;
            if base != p {
                return Err(Error::config(format!("scalar written for p = {base}, expected {p}")));
            }
            let val: i32 = exp
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad valuation in {s:?}")))?;
            let body = tail
                .trim()
                .strip_prefix('(')
                .and_then(|b| b.strip_suffix(')'))
                .ok_or_else(|| Error::Parse(format!("expected digit list in {s:?}")))?;
            let digits = body
                .split_whitespace()
                .map(|t| {
                    t.parse::<u32>()
                        .map_err(|_| Error::Parse(format!("bad digit {t:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            return Self::from_digits(p, val, digits);
        }
        if s == "0" {
            return Ok(Self::zero(p, width as i32));
        }
        let (num, den) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s, "1"),
        };
        let num: i64 = num
            .parse()
            .map_err(|_| Error::Parse(format!("bad integer {num:?}")))?;
        let mut den: u64 = den
            .parse()
            .map_err(|_| Error::Parse(format!("bad denominator {den:?}")))?;
        let mut k = 0;
        while den > 1 && den % p as u64 == 0 {
            den /= p as u64;
            k += 1;
        }
        if den != 1 {
            return Err(Error::Parse(format!("denominator of {s:?} is not a power of {p}")));
        }
        Self::from_ratio(p, num, k, width)
    }
}

impl PAdicScalar {
    /// `n` or `n/p^k` when the expansion terminates within the known digits
    /// (every window point does); the canonical form otherwise. Both parse.
    pub fn compact(&self) -> String {
        let Some(v) = self.val else {
            return "0".into();
        };
        let used = self.digits.iter().rposition(|&a| a != 0).map_or(0, |i| i + 1);
        let fits = used < self.digits.len() || self.prec > v + used as i32;
        let mut n: i64 = 0;
        let mut ok = fits;
        for &a in self.digits[..used].iter().rev() {
            match n.checked_mul(self.p as i64).and_then(|m| m.checked_add(a as i64)) {
                Some(m) => n = m,
                None => ok = false,
            }
        }
        let scale = (self.p as i64).checked_pow(v.unsigned_abs());
        match (ok, scale) {
            (true, Some(s)) if v < 0 => format!("{n}/{s}"),
            (true, Some(s)) => match n.checked_mul(s) {
                Some(m) => m.to_string(),
                None => self.to_string(),
            },
            _ => self.to_string(),
        }
    }
}

impl fmt::Display for PAdicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.val {
            None => write!(f, "0"),
            Some(v) => {
                write!(f, "{}^{} * (", self.p, v)?;
                for (i, a) in self.digits.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Uniform scalar on the ball `|x| <= p^radius_exp`, with `width` digits.
pub fn random_scalar<R: Rng + ?Sized>(p: u32, radius_exp: i32, width: usize, rng: &mut R) -> PAdicScalar {
    let digits = (0..width).map(|_| rng.random_range(0..p)).collect();
    PAdicScalar::normalized(p, -radius_exp, -radius_exp + width as i32, digits)
}

/// A point of `Q_p^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PAdicPoint {
    coords: Vec<PAdicScalar>,
}

impl PAdicPoint {
    pub fn new(coords: Vec<PAdicScalar>) -> Result<Self> {
        let first = coords
            .first()
            .ok_or_else(|| Error::config("a point needs at least one coordinate"))?;
        if coords.iter().any(|c| c.p != first.p) {
            return Err(Error::config("coordinates use different primes"));
        }
        Ok(PAdicPoint { coords })
    }

    pub fn zero(p: u32, d: usize, width: usize) -> Self {
        PAdicPoint {
            coords: vec![PAdicScalar::zero(p, width as i32); d],
        }
    }

    pub fn from_i64s(p: u32, xs: &[i64], width: usize) -> Result<Self> {
        Self::new(
            xs.iter()
                .map(|&x| PAdicScalar::from_i64(p, x, width))
                .collect::<Result<_>>()?,
        )
    }

    /// Point whose coordinates are `num_i / p^den_pow`.
    pub fn from_ratios(p: u32, nums: &[i64], den_pow: u32, width: usize) -> Result<Self> {
        Self::new(
            nums.iter()
                .map(|&x| PAdicScalar::from_ratio(p, x, den_pow, width))
                .collect::<Result<_>>()?,
        )
    }

    pub fn prime(&self) -> u32 {
        self.coords[0].p
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[PAdicScalar] {
        &self.coords
    }

    pub fn coord(&self, i: usize) -> &PAdicScalar {
        &self.coords[i]
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(PAdicScalar::is_zero)
    }

    /// Smallest absolute precision over the coordinates.
    pub fn precision(&self) -> i32 {
        self.coords.iter().map(|c| c.prec).min().unwrap_or(i32::MAX)
    }

    /// `max_i |x_i|`.
    pub fn norm(&self) -> Norm {
        self.coords.iter().map(PAdicScalar::norm).max().unwrap_or(Norm::Zero)
    }

    /// Minimum coordinate valuation, `None` for the zero point.
    pub fn valuation(&self) -> Option<i32> {
        self.norm().exponent().map(|e| -e)
    }

    fn compatible(&self, other: &Self) -> Result<()> {
        if self.prime() != other.prime() {
            return Err(Error::config(format!(
                "incompatible primes {} and {}",
                self.prime(),
                other.prime()
            )));
        }
        if self.dim() != other.dim() {
            return Err(Error::config(format!(
                "dimension mismatch {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.compatible(other)?;
        Ok(PAdicPoint {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a.add(b))
                .collect::<Result<_>>()?,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        PAdicPoint {
            coords: self.coords.iter().map(PAdicScalar::neg).collect(),
        }
    }

    /// Multiplication of every coordinate by `p^m`.
    pub fn shift(&self, m: i32) -> Self {
        PAdicPoint {
            coords: self.coords.iter().map(|c| c.shift(m)).collect(),
        }
    }

    /// Scalar times point.
    pub fn scale(&self, s: &PAdicScalar) -> Result<Self> {
        Ok(PAdicPoint {
            coords: self.coords.iter().map(|c| s.mul(c)).collect::<Result<_>>()?,
        })
    }

    pub fn with_coords(&self, coords: Vec<PAdicScalar>) -> Result<Self> {
        let q = Self::new(coords)?;
        self.compatible(&q)?;
        Ok(q)
    }

    /// Parses `a,b,...` where each coordinate uses [`PAdicScalar::parse`] syntax.
    pub fn parse(s: &str, p: u32, width: usize) -> Result<Self> {
        Self::new(
            s.split(',')
                .map(|c| PAdicScalar::parse(c, p, width))
                .collect::<Result<_>>()?,
        )
    }
}

impl PAdicPoint {
    /// Coordinates in [`PAdicScalar::compact`] form, comma separated.
    pub fn compact(&self) -> String {
        self.coords.iter().map(PAdicScalar::compact).collect::<Vec<_>>().join(",")
    }
}

impl fmt::Display for PAdicPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coords.len() == 1 {
            return write!(f, "{}", self.coords[0]);
        }
        write!(f, "[")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

/// A point of `Q_p^d ∪ {∞}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ProjPoint {
    Finite(PAdicPoint),
    Infinity,
}

impl ProjPoint {
    pub fn finite(&self) -> Option<&PAdicPoint> {
        match self {
            ProjPoint::Finite(x) => Some(x),
            ProjPoint::Infinity => None,
        }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, ProjPoint::Infinity)
    }
}

impl From<PAdicPoint> for ProjPoint {
    fn from(x: PAdicPoint) -> Self {
        ProjPoint::Finite(x)
    }
}

impl fmt::Display for ProjPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProjPoint::Finite(x) => write!(f, "{x}"),
            ProjPoint::Infinity => write!(f, "inf"),
        }
    }
}

/// `|x - y|`.
pub fn distance(x: &PAdicPoint, y: &PAdicPoint) -> Result<Norm> {
    Ok(x.sub(y)?.norm())
}

/// Uniform point on the ball of radius `p^radius_exp` around 0: i.i.d. digits.
pub fn random_point<R: Rng + ?Sized>(
    p: u32,
    d: usize,
    radius_exp: i32,
    width: usize,
    rng: &mut R,
) -> PAdicPoint {
    PAdicPoint {
        coords: (0..d)
            .map(|_| random_scalar(p, radius_exp, width, rng))
            .collect(),
    }
}
