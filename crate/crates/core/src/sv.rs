//! Siegel-Veech transforms, the rotational average `A_R`, the sector
//! sandwich and the thick/thin classification of a surface.

use std::f64::consts::PI;

use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactplane::{from_f64, to_f64, ExactVector, FloatMatrix, LinearAction, Rational};
use crate::geodesic::{
    detect_cylinder, enumerate_sq, second_shortest_nonhomologous, shortest, Cylinder, CylinderResult, Nonhomologous,
    SaddleConnection,
};
use crate::surface::TranslationSurface;

/// Angular half-width of the rational rays bracketing a sector boundary.
pub const RAY_GAP: f64 = 1e-9;

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum TestFunction {
    /// Closed disc `|v| <= r`.
    Disc {
        #[serde(with = "crate::exactplane::rational_str")]
        r: Rational,
    },
    /// Half-open annulus `r1 < |v| <= r2`.
    Annulus {
        #[serde(with = "crate::exactplane::rational_str")]
        r1: Rational,
        #[serde(with = "crate::exactplane::rational_str")]
        r2: Rational,
    },
    /// `|v| <= r` with direction within `half_angle` of `theta`. Directions
    /// within `RAY_GAP` of a boundary ray are reported as ambiguous.
    Sector {
        #[serde(with = "crate::exactplane::rational_str")]
        r: Rational,
        theta: f64,
        half_angle: f64,
    },
    /// `h(x, y) = f(x) g(y)`; as a single-variable function its transform is
    /// the product of transforms.
    Product { f: Box<TestFunction>, g: Box<TestFunction> },
}

/// Outcome of one membership test.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Membership {
    In,
    Out,
    Ambiguous,
}

impl Membership {
    fn and(self, o: Membership) -> Membership {
        match (self, o) {
            (Membership::Out, _) | (_, Membership::Out) => Membership::Out,
            (Membership::In, Membership::In) => Membership::In,
            _ => Membership::Ambiguous,
        }
    }

    fn or(self, o: Membership) -> Membership {
        match (self, o) {
            (Membership::In, _) | (_, Membership::In) => Membership::In,
            (Membership::Out, Membership::Out) => Membership::Out,
            _ => Membership::Ambiguous,
        }
    }

    fn from_bool(b: bool) -> Membership {
        if b {
            Membership::In
        } else {
            Membership::Out
        }
    }
}

fn unit(angle: f64) -> ExactVector {
    let (s, c) = angle.sin_cos();
    ExactVector::new(from_f64(c).expect("finite"), from_f64(s).expect("finite"))
}

/// Whether `v` lies in the closed half-plane counterclockwise of the ray at
/// `angle`, decided against two rational rays `RAY_GAP` either side of it.
fn left_of_ray(angle: f64, v: &ExactVector) -> Membership {
    let a = unit(angle - RAY_GAP).cross(v);
    let b = unit(angle + RAY_GAP).cross(v);
    match (a.is_positive(), b.is_positive(), a.is_negative(), b.is_negative()) {
        (true, true, _, _) => Membership::In,
        (_, _, true, true) => Membership::Out,
        _ => Membership::Ambiguous,
    }
}

fn left_of_ray_f(angle: f64, w: [f64; 2], delta: f64) -> Membership {
    let (s, c) = angle.sin_cos();
    let cr = c * w[1] - s * w[0];
    let len = w[0].hypot(w[1]);
    if cr > delta * len {
        Membership::In
    } else if cr < -delta * len {
        Membership::Out
    } else {
        Membership::Ambiguous
    }
}

impl TestFunction {
    pub fn disc(r: Rational) -> Self {
        TestFunction::Disc { r }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: TestFunction = serde_json::from_str(text)?;
        f.validate()?;
        Ok(f)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("test functions serialize")
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        match self {
            TestFunction::Disc { r } if r.is_negative() => bad("negative radius"),
            TestFunction::Annulus { r1, r2 } if r1.is_negative() || r2 < r1 => bad("annulus needs 0 <= r1 <= r2"),
            TestFunction::Sector { r, theta, half_angle } => {
                if r.is_negative() || !theta.is_finite() || !half_angle.is_finite() || *half_angle < 0.0 {
                    bad("sector needs r >= 0 and a finite nonnegative half angle")
                } else {
                    Ok(())
                }
            }
            TestFunction::Product { f, g } => {
                f.validate()?;
                g.validate()
            }
            _ => Ok(()),
        }
    }

    /// Radius of a disc holding the support.
    pub fn support_radius(&self) -> Rational {
        match self {
            TestFunction::Disc { r } | TestFunction::Sector { r, .. } => r.clone(),
            TestFunction::Annulus { r2, .. } => r2.clone(),
            TestFunction::Product { f, g } => f.support_radius().max(g.support_radius()),
        }
    }

    pub fn is_radial(&self) -> bool {
        matches!(self, TestFunction::Disc { .. } | TestFunction::Annulus { .. })
    }

    /// Membership of `v / √scale_sq`, decided exactly except near sector rays.
    pub fn contains(&self, v: &ExactVector, scale_sq: &Rational) -> Membership {
        let n = v.norm_sq();
        match self {
            TestFunction::Disc { r } => Membership::from_bool(n <= r * r * scale_sq),
            TestFunction::Annulus { r1, r2 } => Membership::from_bool(r1 * r1 * scale_sq < n && n <= r2 * r2 * scale_sq),
            TestFunction::Sector { r, theta, half_angle } => {
                if n > r * r * scale_sq {
                    return Membership::Out;
                }
                if v.is_zero() || *half_angle >= PI {
                    return Membership::In;
                }
                let start = left_of_ray(theta - half_angle, v);
                let end = left_of_ray(theta + half_angle, v);
                let not_end = match end {
                    Membership::In => Membership::Out,
                    Membership::Out => Membership::In,
                    m => m,
                };
                if 2.0 * half_angle <= PI {
                    start.and(not_end)
                } else {
                    start.or(not_end)
                }
            }
            TestFunction::Product { .. } => Membership::Out,
        }
    }

    /// Membership of a floating point vector, ambiguous within relative
    /// margin `delta` of the boundary.
    pub fn contains_f(&self, w: [f64; 2], delta: f64) -> Membership {
        let n = w[0] * w[0] + w[1] * w[1];
        let cmp = |rsq: f64| {
            if n < rsq * (1.0 - delta) {
                Membership::In
            } else if n > rsq * (1.0 + delta) {
                Membership::Out
            } else {
                Membership::Ambiguous
            }
        };
        match self {
            TestFunction::Disc { r } => cmp(to_f64(r).powi(2)),
            TestFunction::Annulus { r1, r2 } => {
                let outer = cmp(to_f64(r2).powi(2));
                let inner = match cmp(to_f64(r1).powi(2)) {
                    Membership::In => Membership::Out,
                    Membership::Out => Membership::In,
                    m => m,
                };
                outer.and(inner)
            }
            TestFunction::Sector { r, theta, half_angle } => {
                let radial = cmp(to_f64(r).powi(2));
                if *half_angle >= PI {
                    return radial;
                }
                let start = left_of_ray_f(theta - half_angle, w, delta);
                let not_end = match left_of_ray_f(theta + half_angle, w, delta) {
                    Membership::In => Membership::Out,
                    Membership::Out => Membership::In,
                    m => m,
                };
                let angular = if 2.0 * half_angle <= PI { start.and(not_end) } else { start.or(not_end) };
                radial.and(angular)
            }
            TestFunction::Product { .. } => Membership::Out,
        }
    }
}

/// Value of a transform of an indicator: exact count plus the number of
/// holonomy vectors whose membership could not be decided.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub struct TransformValue {
    pub count: u64,
    pub ambiguous: u64,
}

impl TransformValue {
    pub fn value(&self) -> f64 {
        self.count as f64
    }
}

/// Holonomies with `|v|² <= support² · scale_sq`.
fn holonomies_for(s: &TranslationSurface, f: &TestFunction, scale_sq: &Rational, budget: usize) -> Result<Vec<ExactVector>> {
    let r = f.support_radius();
    if r.is_zero() {
        return Ok(Vec::new());
    }
    Ok(enumerate_sq(s, &(&r * &r * scale_sq), budget)?.holonomies())
}

fn count_in(hs: &[ExactVector], f: &TestFunction, scale_sq: &Rational) -> TransformValue {
    let mut out = TransformValue { count: 0, ambiguous: 0 };
    for v in hs {
        match f.contains(v, scale_sq) {
            Membership::In => out.count += 1,
            Membership::Ambiguous => out.ambiguous += 1,
            Membership::Out => {}
        }
    }
    out
}

/// `f̂(s) = Σ_{v ∈ Λ} f(v)`.
pub fn transform(s: &TranslationSurface, f: &TestFunction, budget: usize) -> Result<TransformValue> {
    transform_scaled(s, f, &Rational::one(), budget)
}

/// Transform on `s` rescaled by `1/√scale_sq`, computed without leaving ℚ.
pub fn transform_scaled(
    s: &TranslationSurface,
    f: &TestFunction,
    scale_sq: &Rational,
    budget: usize,
) -> Result<TransformValue> {
    if let TestFunction::Product { f, g } = f {
        let a = transform_scaled(s, f, scale_sq, budget)?;
        let b = transform_scaled(s, g, scale_sq, budget)?;
        return Ok(TransformValue { count: a.count * b.count, ambiguous: a.ambiguous + b.ambiguous });
    }
    let hs = holonomies_for(s, f, scale_sq, budget)?;
    Ok(count_in(&hs, f, scale_sq))
}

/// `Σ_{v₁, v₂ ∈ Λ} f(v₁) g(v₂)`, summed over pairs.
pub fn pair_transform(s: &TranslationSurface, f: &TestFunction, g: &TestFunction, budget: usize) -> Result<TransformValue> {
    let one = Rational::one();
    let members = |h: &TestFunction| -> Result<Vec<Membership>> {
        let hs = holonomies_for(s, h, &one, budget)?;
        Ok(hs.iter().map(|v| h.contains(v, &one)).collect())
    };
    let (mf, mg) = (members(f)?, members(g)?);
    let mut out = TransformValue { count: 0, ambiguous: 0 };
    for a in &mf {
        for b in &mg {
            match a.and(*b) {
                Membership::In => out.count += 1,
                Membership::Ambiguous => out.ambiguous += 1,
                Membership::Out => {}
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize)]
pub struct RotationalAverage {
    pub value: f64,
    pub ambiguous: u64,
    pub total: u64,
    pub quadrature_n: usize,
}

/// Options for floating point membership during `A_R`.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct AverageOptions {
    /// Relative margin around boundaries.
    pub delta: f64,
    /// Largest tolerated fraction of ambiguous memberships.
    pub tolerance: f64,
    pub budget: usize,
}

impl Default for AverageOptions {
    fn default() -> Self {
        AverageOptions { delta: 1e-10, tolerance: 0.01, budget: crate::geodesic::DEFAULT_BUDGET }
    }
}

/// `(1/2π) ∫ f̂(a_R r_θ s) dθ` by the trapezoidal rule on `quadrature_n`
/// equally spaced angles.
pub fn rotational_average_ar(
    s: &TranslationSurface,
    f: &TestFunction,
    r: f64,
    quadrature_n: usize,
    opts: &AverageOptions,
) -> Result<RotationalAverage> {
    if quadrature_n < 8 {
        return Err(Error::InvalidArgument("quadrature_n must be at least 8".into()));
    }
    if !(r >= 1.0 && r.is_finite()) {
        return Err(Error::InvalidArgument("R must be a finite real >= 1".into()));
    }
    if r == 1.0 && f.is_radial() {
        let t = transform(s, f, opts.budget)?;
        return Ok(RotationalAverage { value: t.value(), ambiguous: t.ambiguous, total: 0, quadrature_n });
    }
    if matches!(f, TestFunction::Product { .. }) {
        return Err(Error::InvalidArgument("A_R takes a single-variable test function".into()));
    }
    // |a_R r_θ v| >= |v| / R
    let reach = from_f64(r)? * f.support_radius();
    let hs = enumerate_sq(s, &(&reach * &reach), opts.budget)?.holonomies();
    let per_angle: Vec<(u64, u64)> = (0..quadrature_n)
        .into_par_iter()
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / quadrature_n as f64;
            let m = FloatMatrix::geodesic(r).mul(&FloatMatrix::rotation(theta));
            let mut inside = 0;
            let mut amb = 0;
            for v in &hs {
                match f.contains_f(m.apply(&v.to_f64()), opts.delta) {
                    Membership::In => inside += 1,
                    Membership::Ambiguous => amb += 1,
                    Membership::Out => {}
                }
            }
            (inside, amb)
        })
        .collect();
    let inside: u64 = per_angle.iter().map(|p| p.0).sum();
    let ambiguous: u64 = per_angle.iter().map(|p| p.1).sum();
    let total = (hs.len() * quadrature_n) as u64;
    if total > 0 && ambiguous as f64 > opts.tolerance * total as f64 {
        return Err(Error::AmbiguousMembership { ambiguous: ambiguous as usize, total: total as usize, tolerance: opts.tolerance });
    }
    Ok(RotationalAverage { value: inside as f64 / quadrature_n as f64, ambiguous, total, quadrature_n })
}

#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct Sandwich {
    pub lower: f64,
    pub scaled_count: f64,
    pub upper: f64,
    /// Half-angle of the pulled-back triangles, `atan(tan θ / R²)`.
    pub theta_r: f64,
    /// `N(s, R)`.
    pub count: u64,
    /// Memberships left undecided; the arc functions are continuous and the
    /// count is exact, so this stays zero.
    pub ambiguous: u64,
    pub margin: f64,
}

/// Arc measure, over `π`, of the circle of radius `rho` inside the triangle
/// with apex at the origin, half-angle `alpha` about the y-axis and top edge
/// at height `top`.
fn arc_fraction(rho: f64, alpha: f64, top: f64) -> f64 {
    if rho <= top {
        return alpha / PI;
    }
    (alpha - (top / rho).acos()).max(0.0) / PI
}

/// `A_R` of the inscribed and circumscribed triangles of the sector of
/// half-angle `θ` about the y-axis, around `(θ_R/π) N(s, R)`.
///
/// The triangles are pulled back by `a_R`; the fraction of rotations taking a
/// vector of length ρ into such a triangle is a closed-form arc measure, so no
/// quadrature is involved.
pub fn sector_sandwich(s: &TranslationSurface, r: &Rational, theta: f64, budget: usize) -> Result<Sandwich> {
    if !(theta > 0.0 && theta <= PI / 8.0) {
        return Err(Error::InvalidArgument("theta must lie in (0, π/8]".into()));
    }
    let rf = to_f64(r);
    if rf < 2.0 {
        return Err(Error::InvalidArgument("R must be at least 2".into()));
    }
    let alpha = (theta.tan() / (rf * rf)).atan();
    // the outer triangle reaches R / cos α
    let reach_sq = r * r * from_f64((1.0 + 1e-9) / alpha.cos().powi(2))?;
    let hs = enumerate_sq(s, &reach_sq, budget)?.holonomies();
    let r_sq = r * r;
    let mut lower = 0.0;
    let mut upper = 0.0;
    let mut count = 0u64;
    for v in &hs {
        let n = v.norm_sq();
        let rho = to_f64(&n).sqrt();
        if n <= r_sq {
            count += 1;
            lower += arc_fraction(rho, alpha, rf * theta.cos());
            upper += alpha / PI;
        } else {
            upper += arc_fraction(rho, alpha, rf);
        }
    }
    let scaled_count = alpha / PI * count as f64;
    let margin = 1e-9 * (count as f64 + 1.0);
    if lower > scaled_count + margin || scaled_count > upper + margin {
        return Err(Error::MarginViolation(format!("{lower} <= {scaled_count} <= {upper} fails")));
    }
    Ok(Sandwich { lower, scaled_count, upper, theta_r: alpha, count, ambiguous: 0, margin })
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub enum Class {
    H1,
    H2,
    Omega0,
    Omega1,
    Omega2,
    Unknown,
}

#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct ClassLabel {
    pub class: Class,
    /// Shortest connection holonomy.
    pub gamma: ExactVector,
    /// Length of the second shortest nonhomologous connection, when computed.
    pub epsilon: Option<f64>,
    pub cylinder: Option<Cylinder>,
}

#[derive(Clone, PartialEq, Debug)]
pub struct ClassifyOptions {
    /// Leaf length cap for cylinder detection.
    pub max_trace: Rational,
    pub budget: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { max_trace: Rational::from_integer(1000.into()), budget: crate::geodesic::DEFAULT_BUDGET }
    }
}

/// `|a| + |b| < e` from squared lengths.
fn sum_below(a: &Rational, b: &Rational, e: &Rational) -> bool {
    let rest = e - a - b;
    rest.is_positive() && Rational::from_integer(4.into()) * a * b < &rest * &rest
}

/// A closed geodesic shorter than `ε₀`: a closed connection, two distinct
/// connections with the same endpoints, or a thin cylinder core. Distinct
/// geodesics with common endpoints are never homotopic on a flat surface, so
/// the second kind is a nontrivial loop.
fn has_short_loop(s: &TranslationSurface, short: &[SaddleConnection], eps0_sq: &Rational, opts: &ClassifyOptions) -> bool {
    if short.iter().any(|c| c.start == c.end) {
        return true;
    }
    for (i, a) in short.iter().enumerate() {
        for b in &short[i + 1..] {
            if a.start == b.start && a.end == b.end && sum_below(&a.len_sq(), &b.len_sq(), eps0_sq) {
                return true;
            }
        }
    }
    short.iter().any(|c| match detect_cylinder(s, c, &opts.max_trace) {
        CylinderResult::Cylinder(cyl) => &cyl.width_sq < eps0_sq,
        _ => false,
    })
}

/// Whether `a <= b^p` for `a, b > 0` and rational `p`.
fn le_power(a: &Rational, b: &Rational, p: &Rational) -> bool {
    let (num, den) = (p.numer().to_u32(), p.denom().to_u32());
    match (num, den) {
        (Some(n), Some(d)) if d <= 64 && n <= 64 => num_traits::pow(a.clone(), d as usize) <= num_traits::pow(b.clone(), n as usize),
        _ => to_f64(a).ln() <= to_f64(p) * to_f64(b).ln(),
    }
}

/// Places `s` in the thick part, the no-short-loop part or one of the three
/// short-loop pieces, with witnesses.
pub fn classify(s: &TranslationSurface, eps0: &Rational, p: &Rational, opts: &ClassifyOptions) -> Result<ClassLabel> {
    let n = s.signature().dim_relative_homology;
    if !eps0.is_positive() {
        return Err(Error::InvalidArgument("eps0 must be positive".into()));
    }
    if !p.is_positive() || p * Rational::from_integer(n.into()) >= Rational::one() {
        return Err(Error::InvalidArgument(format!("p must lie in (0, 1/{n})")));
    }
    let gamma = shortest(s, opts.budget)?;
    let label = |class, epsilon, cylinder| ClassLabel { class, gamma: gamma.holonomy.clone(), epsilon, cylinder };
    let eps0_sq = eps0 * eps0;
    if gamma.len_sq() >= eps0_sq {
        return Ok(label(Class::H1, None, None));
    }
    let short: Vec<SaddleConnection> =
        enumerate_sq(s, &eps0_sq, opts.budget)?.connections.into_iter().filter(|c| c.len_sq() < eps0_sq).collect();
    if !has_short_loop(s, &short, &eps0_sq, opts) {
        return Ok(label(Class::H2, None, None));
    }
    let second = second_shortest_nonhomologous(s, Nonhomologous::default(), opts.budget)?;
    let epsilon = Some(second.length());
    // ε <= |γ|^p  iff  ε² <= (|γ|²)^p
    if le_power(&second.len_sq(), &gamma.len_sq(), p) {
        return Ok(label(Class::Omega0, epsilon, None));
    }
    Ok(match detect_cylinder(s, &gamma, &opts.max_trace) {
        CylinderResult::Cylinder(c) => label(Class::Omega2, epsilon, Some(c)),
        CylinderResult::NotOnBoundary => label(Class::Omega1, epsilon, None),
        CylinderResult::Unknown => label(Class::Unknown, epsilon, None),
    })
}
