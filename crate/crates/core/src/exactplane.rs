//! Exact rational plane geometry and the lattice utilities behind the torus
//! oracle.
//!
//! Every geometric decision in the crate compares squared Euclidean norms,
//! cross products or L¹ norms as exact rationals. Floating point shows up in
//! [`FloatMatrix`], in reports, and in filters that are widened past their
//! rounding error and backed by an exact check.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Arbitrary precision rational. `BigRational` keeps its denominator positive
/// and the fraction in lowest terms, so equality is structural.
pub type Rational = BigRational;

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parses `"n"`, `"n/d"` or a decimal `"1.25"`. A leading ASCII `-` or U+2212
/// minus is accepted.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let t = s.trim();
    let t = t.replace('\u{2212}', "-");
    let bad = || Error::Parse(format!("invalid rational {s:?}"));
    if t.is_empty() {
        return Err(bad());
    }
    if let Some((int_part, frac)) = t.split_once('.') {
        // exact decimal
        let neg = int_part.starts_with('-');
        let body = int_part.strip_prefix('-').unwrap_or(int_part);
        let ok = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
        if (body.is_empty() && frac.is_empty()) || !ok(body) || !ok(frac) || frac.len() > 4096 {
            return Err(bad());
        }
        let digits: BigInt = format!("0{body}{frac}").parse().map_err(|_| bad())?;
        let q = Rational::new(digits, num_traits::pow(BigInt::from(10), frac.len()));
        return Ok(if neg { -q } else { q });
    }
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t.as_str(), "1"),
    };
    let digits_ok = |p: &str, signed: bool| {
        let body = if signed {
            p.strip_prefix('-').unwrap_or(p)
        } else {
            p
        };
        !body.is_empty() && body.bytes().all(|b| b.is_ascii_digit())
    };
    if !digits_ok(num, true) || !digits_ok(den, false) {
        return Err(bad());
    }
    let n: BigInt = num.parse().map_err(|_| bad())?;
    let d: BigInt = den.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(Rational::new(n, d))
}

/// Canonical text form: `"n"` for integers, `"n/d"` otherwise.
pub fn format_rational(q: &Rational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        // huge numerator and denominator: scale both down before dividing
        let shift = q.numer().bits().max(q.denom().bits()).saturating_sub(1000);
        let n = (q.numer() >> shift).to_f64().unwrap_or(f64::NAN);
        let d = (q.denom() >> shift).to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Exact rational approximation of a finite double (doubles are dyadic).
pub fn from_f64(x: f64) -> Result<Rational> {
    Rational::from_float(x).ok_or_else(|| Error::InvalidArgument(format!("non-finite value {x}")))
}

pub(crate) mod rational_str {
    use super::*;

    pub fn serialize<S: Serializer>(q: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

/// Planar vector with exact rational coordinates.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExactVector {
    pub x: Rational,
    pub y: Rational,
}

impl ExactVector {
    pub fn new(x: Rational, y: Rational) -> Self {
        Self { x, y }
    }

    pub fn from_ints(x: i64, y: i64) -> Self {
        Self::new(int(x), int(y))
    }

    pub fn zero() -> Self {
        Self::new(Rational::zero(), Rational::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.x.is_zero() && self.y.is_zero()
    }

    pub fn cross(&self, other: &Self) -> Rational {
        &self.x * &other.y - &self.y * &other.x
    }

    pub fn dot(&self, other: &Self) -> Rational {
        &self.x * &other.x + &self.y * &other.y
    }

    pub fn norm_sq(&self) -> Rational {
        self.dot(self)
    }

    pub fn l1_norm(&self) -> Rational {
        self.x.abs() + self.y.abs()
    }

    pub fn scale(&self, k: &Rational) -> Self {
        Self::new(&self.x * k, &self.y * k)
    }

    /// Counterclockwise quarter turn.
    pub fn rot90(&self) -> Self {
        Self::new(-self.y.clone(), self.x.clone())
    }

    pub fn to_f64(&self) -> [f64; 2] {
        [to_f64(&self.x), to_f64(&self.y)]
    }

    pub fn length(&self) -> f64 {
        to_f64(&self.norm_sq()).sqrt()
    }

    /// True when the vector points into the half-plane `y > 0`, or along the
    /// positive x-axis. Exactly one of `v`, `-v` is canonical for `v != 0`.
    pub fn is_canonical_half(&self) -> bool {
        self.y.is_positive() || (self.y.is_zero() && self.x.is_positive())
    }

    pub fn to_strings(&self) -> [String; 2] {
        [format_rational(&self.x), format_rational(&self.y)]
    }

    pub fn from_strs(x: &str, y: &str) -> Result<Self> {
        Ok(Self::new(parse_rational(x)?, parse_rational(y)?))
    }
}

impl fmt::Debug for ExactVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", format_rational(&self.x), format_rational(&self.y))
    }
}

impl fmt::Display for ExactVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Serialize for ExactVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_strings().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ExactVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [x, y] = <[String; 2]>::deserialize(d)?;
        ExactVector::from_strs(&x, &y).map_err(serde::de::Error::custom)
    }
}

impl Add for &ExactVector {
    type Output = ExactVector;
    fn add(self, o: &ExactVector) -> ExactVector {
        ExactVector::new(&self.x + &o.x, &self.y + &o.y)
    }
}

impl Sub for &ExactVector {
    type Output = ExactVector;
    fn sub(self, o: &ExactVector) -> ExactVector {
        ExactVector::new(&self.x - &o.x, &self.y - &o.y)
    }
}

impl Neg for &ExactVector {
    type Output = ExactVector;
    fn neg(self) -> ExactVector {
        ExactVector::new(-&self.x, -&self.y)
    }
}

/// Linear action of a 2×2 matrix on a vector type.
pub trait LinearAction<V> {
    fn apply(&self, v: &V) -> V;
}

/// 2×2 matrix `[[a, b], [c, d]]` with rational entries.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct ExactMatrix {
    #[serde(with = "rational_str")]
    pub a: Rational,
    #[serde(with = "rational_str")]
    pub b: Rational,
    #[serde(with = "rational_str")]
    pub c: Rational,
    #[serde(with = "rational_str")]
    pub d: Rational,
}

impl ExactMatrix {
    pub fn new(a: Rational, b: Rational, c: Rational, d: Rational) -> Self {
        Self { a, b, c, d }
    }

    pub fn from_ints(a: i64, b: i64, c: i64, d: i64) -> Self {
        Self::new(int(a), int(b), int(c), int(d))
    }

    pub fn identity() -> Self {
        Self::from_ints(1, 0, 0, 1)
    }

    pub fn diag(x: Rational, y: Rational) -> Self {
        Self::new(x, Rational::zero(), Rational::zero(), y)
    }

    /// Horizontal shear `[[1, k], [0, 1]]`.
    pub fn shear(k: Rational) -> Self {
        Self::new(Rational::one(), k, Rational::zero(), Rational::one())
    }

    pub fn det(&self) -> Rational {
        &self.a * &self.d - &self.b * &self.c
    }

    pub fn is_sl2(&self) -> bool {
        self.det().is_one()
    }

    pub fn is_integral(&self) -> bool {
        [&self.a, &self.b, &self.c, &self.d].iter().all(|q| q.is_integer())
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self::new(
            &self.a * &o.a + &self.b * &o.c,
            &self.a * &o.b + &self.b * &o.d,
            &self.c * &o.a + &self.d * &o.c,
            &self.c * &o.b + &self.d * &o.d,
        )
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        if det.is_zero() {
            return Err(Error::SingularMatrix);
        }
        Ok(Self::new(
            &self.d / &det,
            -&self.b / &det,
            -&self.c / &det,
            &self.a / &det,
        ))
    }

    pub fn to_float(&self) -> FloatMatrix {
        FloatMatrix {
            a: to_f64(&self.a),
            b: to_f64(&self.b),
            c: to_f64(&self.c),
            d: to_f64(&self.d),
        }
    }
}

impl LinearAction<ExactVector> for ExactMatrix {
    fn apply(&self, v: &ExactVector) -> ExactVector {
        ExactVector::new(&self.a * &v.x + &self.b * &v.y, &self.c * &v.x + &self.d * &v.y)
    }
}

/// 2×2 matrix with finite double entries.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct FloatMatrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl FloatMatrix {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        if [a, b, c, d].iter().all(|x| x.is_finite()) {
            Ok(Self { a, b, c, d })
        } else {
            Err(Error::InvalidArgument("matrix entries must be finite".into()))
        }
    }

    pub fn identity() -> Self {
        Self { a: 1.0, b: 0.0, c: 0.0, d: 1.0 }
    }

    /// Counterclockwise rotation by `theta`.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self { a: c, b: -s, c: s, d: c }
    }

    /// `diag(r, 1/r)`.
    pub fn geodesic(r: f64) -> Self {
        Self { a: r, b: 0.0, c: 0.0, d: 1.0 / r }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    pub fn apply_exact(&self, v: &ExactVector) -> [f64; 2] {
        self.apply(&v.to_f64())
    }

    /// Spectral norm.
    pub fn operator_norm(&self) -> f64 {
        let s = self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d;
        let det = self.det();
        ((s + (s * s - 4.0 * det * det).max(0.0).sqrt()) / 2.0).sqrt()
    }
}

impl LinearAction<[f64; 2]> for FloatMatrix {
    fn apply(&self, v: &[f64; 2]) -> [f64; 2] {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }
}

/// Standard linear action, exact when both operands are exact.
pub fn apply_matrix<M: LinearAction<V>, V>(m: &M, v: &V) -> V {
    m.apply(v)
}

pub fn gcd(a: i64, b: i64) -> i64 {
    a.gcd(&b)
}

/// Euler's totient, computed by trial-division factorisation.
pub fn euler_phi(n: u64) -> u64 {
    assert!(n >= 1, "euler_phi is defined for n >= 1");
    let mut m = n;
    let mut result = n;
    let mut p = 2u64;
    while p * p <= m {
        if m.is_multiple_of(p) {
            while m.is_multiple_of(p) {
                m /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if m > 1 {
        result -= result / m;
    }
    result
}

/// Rational bounds `lo <= √q <= hi` with `hi - lo <= 2^(1-bits)`, for `q >= 0`.
pub fn sqrt_bounds(q: &Rational, bits: u32) -> (Rational, Rational) {
    assert!(!q.is_negative(), "square root of a negative rational");
    let scale = BigInt::one() << (2 * bits as usize);
    let scaled = q * Rational::from_integer(scale);
    let lo = scaled.floor().to_integer().sqrt();
    let hi_int = scaled.ceil().to_integer();
    let mut hi = hi_int.sqrt();
    if &hi * &hi < hi_int {
        hi += 1;
    }
    let den = BigInt::one() << bits as usize;
    (Rational::new(lo, den.clone()), Rational::new(hi, den))
}

/// All primitive integer vectors with `p² + q² <= radius²`.
pub fn primitive_points_in_disc(radius: &Rational) -> Vec<(i64, i64)> {
    primitive_points_in_disc_sq(&(radius * radius))
}

/// Primitive integer vectors with `p² + q² <= radius_sq`, sorted.
pub fn primitive_points_in_disc_sq(radius_sq: &Rational) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    if !radius_sq.is_positive() {
        return out;
    }
    let bound = radius_sq.floor().to_integer();
    let bound = bound.to_i64().expect("radius too large for integer enumeration");
    let reach = (bound as f64).sqrt() as i64 + 1;
    for p in -reach..=reach {
        for q in -reach..=reach {
            let n2 = p * p + q * q;
            if n2 == 0 || n2 > bound {
                continue;
            }
            if gcd(p.abs(), q.abs()) == 1 {
                out.push((p, q));
            }
        }
    }
    out
}
