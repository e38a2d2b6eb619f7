//! Numeric back-ends shared by the exact and floating code paths.
//!
//! Most algorithms are written once against [`Scalar`] and instantiated with
//! `f64` (search, sampling) or [`BigRational`] (certificate validation).

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::Value;

use crate::error::{Error, Result};

pub trait Scalar:
    Clone
    + PartialOrd
    + fmt::Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    /// True for exact arithmetic; tolerances are ignored in that case.
    const EXACT: bool;

    fn from_ratio(num: i64, den: i64) -> Self;

    /// Exact conversion from a float (floats are dyadic rationals).
    fn from_f64(x: f64) -> Self;

    fn to_f64(&self) -> f64;

    fn abs_val(&self) -> Self;

    /// `|self| <= tol` for floats, `self == 0` for exact types.
    fn is_negligible(&self, tol: f64) -> bool;

    fn to_json(&self) -> Value;

    fn from_json(v: &Value) -> Result<Self>;

    fn from_dyadic(d: Dyadic) -> Self {
        Self::from_ratio(d.numerator(), 1i64 << d.exponent())
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn from_f64(x: f64) -> Self {
        x
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn abs_val(&self) -> Self {
        self.abs()
    }

    fn is_negligible(&self, tol: f64) -> bool {
        self.abs() <= tol
    }

    fn to_json(&self) -> Value {
        serde_json::Number::from_f64(*self)
            .map(Value::Number)
            .unwrap_or(Value::Null)
    }

    fn from_json(v: &Value) -> Result<Self> {
        match v {
            Value::Number(n) => n
                .as_f64()
                .ok_or_else(|| Error::Parse(format!("bad number {n}"))),
            Value::String(s) => parse_rational(s).map(|r| Scalar::to_f64(&r)),
            other => Err(Error::Parse(format!("expected a number, got {other}"))),
        }
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("finite float")
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn abs_val(&self) -> Self {
        self.abs()
    }

    fn is_negligible(&self, _tol: f64) -> bool {
        self.is_zero()
    }

    fn to_json(&self) -> Value {
        Value::String(format_rational(self))
    }

    fn from_json(v: &Value) -> Result<Self> {
        match v {
            Value::String(s) => parse_rational(s),
            Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Ok(BigRational::from_integer(BigInt::from(i)))
                } else {
                    let x = n
                        .as_f64()
                        .ok_or_else(|| Error::Parse(format!("bad number {n}")))?;
                    Ok(<BigRational as Scalar>::from_f64(x))
                }
            }
            other => Err(Error::Parse(format!("expected a rational, got {other}"))),
        }
    }
}

/// `p/q` in lowest terms; the denominator is always written.
pub fn format_rational(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `p/q`, integers and plain decimals (`0.1`, `-2.5e-3`) exactly.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(p, q));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let num: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| bad())?
    };
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut r = BigRational::from_integer(num);
    if scale >= 0 {
        r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if neg { -r } else { r })
}

/// Exact dyadic rational `numerator / 2^exponent`, kept in lowest terms.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Dyadic {
    num: i64,
    exp: u32,
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { num: 0, exp: 0 };

    pub fn new(num: i64, exp: u32) -> Self {
        let mut d = Dyadic { num, exp };
        d.reduce();
        d
    }

    fn reduce(&mut self) {
        if self.num == 0 {
            self.exp = 0;
            return;
        }
        let tz = self.num.trailing_zeros().min(self.exp);
        self.num >>= tz;
        self.exp -= tz;
    }

    pub fn numerator(&self) -> i64 {
        self.num
    }

    pub fn exponent(&self) -> u32 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn signum(&self) -> i64 {
        self.num.signum()
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / (2f64).powi(self.exp as i32)
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(BigInt::from(self.num), BigInt::one() << self.exp as usize)
    }

    pub fn abs(&self) -> Self {
        Dyadic { num: self.num.abs(), exp: self.exp }
    }
}

impl Add for Dyadic {
    type Output = Dyadic;

    fn add(self, rhs: Dyadic) -> Dyadic {
        let exp = self.exp.max(rhs.exp);
        let a = (self.num as i128) << (exp - self.exp);
        let b = (rhs.num as i128) << (exp - rhs.exp);
        let s = a + b;
        let i64_sum = i64::try_from(s).expect("dyadic overflow");
        Dyadic::new(i64_sum, exp)
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;

    fn neg(self) -> Dyadic {
        Dyadic { num: -self.num, exp: self.exp }
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;

    fn sub(self, rhs: Dyadic) -> Dyadic {
        self + (-rhs)
    }
}

impl Mul for Dyadic {
    type Output = Dyadic;

    fn mul(self, rhs: Dyadic) -> Dyadic {
        let num = self.num.checked_mul(rhs.num).expect("dyadic overflow");
        Dyadic::new(num, self.exp + rhs.exp)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let exp = self.exp.max(other.exp);
        let a = (self.num as i128) << (exp - self.exp);
        let b = (other.num as i128) << (exp - other.exp);
        a.cmp(&b)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, 1u64 << self.exp)
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Rounds `x` to the nearest multiple of `2^-bits`.
pub fn snap_dyadic(x: f64, bits: u32) -> BigRational {
    let scale = (1u64 << bits) as f64;
    let n = (x * scale).round() as i64;
    BigRational::new(BigInt::from(n), BigInt::one() << bits as usize)
}
