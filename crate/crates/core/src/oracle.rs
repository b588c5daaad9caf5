//! Closed-form holonomy sets and Siegel-Veech measures for flat tori and
//! slit tori.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exactplane::{
    euler_phi, gcd, sqrt_bounds, ExactMatrix, ExactVector, FloatMatrix, LinearAction, Rational,
};

/// Torus `g ℤ²` with `det g = 1`.
#[derive(Clone, PartialEq, Debug)]
pub struct TorusPoint {
    pub g: ExactMatrix,
}

impl TorusPoint {
    pub fn new(g: ExactMatrix) -> Result<Self> {
        if !g.is_sl2() {
            return Err(Error::InvalidArgument("torus matrix must have determinant 1".into()));
        }
        Ok(TorusPoint { g })
    }
}

/// Slit torus `[g, v]` with `v ∉ g ℤ²`.
#[derive(Clone, PartialEq, Debug)]
pub struct SlitTorusPoint {
    pub g: ExactMatrix,
    pub v: ExactVector,
}

impl SlitTorusPoint {
    pub fn new(g: ExactMatrix, v: ExactVector) -> Result<Self> {
        if !g.is_sl2() {
            return Err(Error::InvalidArgument("torus matrix must have determinant 1".into()));
        }
        let q = g.inverse()?.apply(&v);
        if q.x.is_integer() && q.y.is_integer() {
            return Err(Error::InvalidArgument("slit vector lies in the lattice".into()));
        }
        Ok(SlitTorusPoint { g, v })
    }

    /// Lattice coordinates of `v` reduced into `[0, 1)²`.
    fn lattice_v(&self) -> ExactVector {
        let q = self.g.inverse().expect("det 1").apply(&self.v);
        ExactVector::new(&q.x - q.x.floor(), &q.y - q.y.floor())
    }
}

/// Integer box `|a_x|, |a_y| <= k` containing every `a` with `|g a| <= radius`.
fn lattice_reach(g: &ExactMatrix, radius: &Rational) -> i64 {
    let h = g.inverse().expect("det 1");
    let frob = &h.a * &h.a + &h.b * &h.b + &h.c * &h.c + &h.d * &h.d;
    let (_, hi) = sqrt_bounds(&(frob * radius * radius), 8);
    hi.ceil().to_integer().to_i64().expect("radius too large") + 1
}

/// `{ g w : w primitive, |g w| <= radius }`.
pub fn torus_holonomy(t: &TorusPoint, radius: &Rational) -> BTreeSet<ExactVector> {
    let k = lattice_reach(&t.g, radius);
    let r_sq = radius * radius;
    let mut out = BTreeSet::new();
    for p in -k..=k {
        for q in -k..=k {
            if gcd(p, q) != 1 {
                continue;
            }
            let v = t.g.apply(&ExactVector::from_ints(p, q));
            if v.norm_sq() <= r_sq {
                out.insert(v);
            }
        }
    }
    out
}

/// Number of primitive vectors of the lattice spanned by the columns of `g`
/// inside the closed disc of radius `r`.
pub fn torus_count_f(g: &FloatMatrix, r: f64) -> u64 {
    let mut total = 0u64;
    scan_primitive(g, r, |_| total += 1);
    total
}

/// The primitive vectors counted by [`torus_count_f`].
pub fn torus_vectors_f(g: &FloatMatrix, r: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    scan_primitive(g, r, |w| out.push(w));
    out
}

/// Row-by-row scan over a reduced basis: row `n` is the chord of the disc
/// along `m b1 + n b2`.
fn scan_primitive(g: &FloatMatrix, r: f64, mut visit: impl FnMut([f64; 2])) {
    let (b1, b2) = gauss_reduce([g.a, g.c], [g.b, g.d]);
    let n1 = b1[0] * b1[0] + b1[1] * b1[1];
    let dot = b1[0] * b2[0] + b1[1] * b2[1];
    let n2 = b2[0] * b2[0] + b2[1] * b2[1];
    let area = (b1[0] * b2[1] - b1[1] * b2[0]).abs();
    let r_sq = r * r;
    let rows = (r * n1.sqrt() / area).floor() as i64;
    for n in -rows..=rows {
        // n1 m² + 2 dot n m + n2 n² <= r²
        let nf = n as f64;
        let disc = dot * dot * nf * nf - n1 * (n2 * nf * nf - r_sq);
        if disc < 0.0 {
            continue;
        }
        let s = disc.sqrt();
        let lo = ((-dot * nf - s) / n1).ceil() as i64;
        let hi = ((-dot * nf + s) / n1).floor() as i64;
        for m in lo..=hi {
            if gcd(m, n) == 1 {
                let mf = m as f64;
                visit([mf * b1[0] + nf * b2[0], mf * b1[1] + nf * b2[1]]);
            }
        }
    }
}

/// Lagrange-Gauss reduction of a planar basis.
fn gauss_reduce(mut u: [f64; 2], mut v: [f64; 2]) -> ([f64; 2], [f64; 2]) {
    let n = |w: [f64; 2]| w[0] * w[0] + w[1] * w[1];
    if n(u) > n(v) {
        std::mem::swap(&mut u, &mut v);
    }
    for _ in 0..200 {
        let mu = ((u[0] * v[0] + u[1] * v[1]) / n(u)).round();
        v = [v[0] - mu * u[0], v[1] - mu * u[1]];
        if n(v) >= n(u) {
            break;
        }
        std::mem::swap(&mut u, &mut v);
    }
    (u, v)
}

/// Whether `z0 + t a` meets `c + ℤ²` for some `t ∈ (0, 1)`, with `c` given
/// relative to `z0` (so the condition is `t a - c ∈ ℤ²`).
fn meets_class(a: &ExactVector, c: &ExactVector) -> bool {
    let (main, main_c, other, other_c) = if !a.x.is_zero() {
        (&a.x, &c.x, &a.y, &c.y)
    } else {
        if !c.x.is_integer() {
            return false;
        }
        (&a.y, &c.y, &a.x, &c.x)
    };
    // t = (main_c + k) / main for integers k, with 0 < t < 1
    let (lo, hi) = if main.is_positive() {
        (-main_c, main - main_c)
    } else {
        (main - main_c, -main_c)
    };
    let mut k: num_bigint::BigInt = lo.floor().to_integer() + 1;
    let end = hi.ceil().to_integer();
    while k < end {
        let t = (main_c + Rational::from_integer(k.clone())) / main;
        if (&t * other - other_c).is_integer() {
            return true;
        }
        k += 1;
    }
    false
}

#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct SlitHolonomy {
    pub holonomies: BTreeSet<ExactVector>,
    /// Formula vectors dropped because every straight representative runs
    /// through a marked point.
    pub corrections: BTreeSet<ExactVector>,
}

/// `g ℤ²_prim ∪ (±v + g ℤ²)` inside the disc of `radius`, minus vectors whose
/// segments all pass through a marked point.
pub fn slit_torus_holonomy(t: &SlitTorusPoint, radius: &Rational) -> SlitHolonomy {
    let q = t.lattice_v();
    let zero = ExactVector::zero();
    let neg_q = ExactVector::new(-&q.x, -&q.y);
    let k = lattice_reach(&t.g, radius) + 2;
    let r_sq = radius * radius;
    let mut holonomies = BTreeSet::new();
    let mut corrections = BTreeSet::new();
    let mut consider = |a: ExactVector, keep: bool| {
        let v = t.g.apply(&a);
        if v.norm_sq() <= r_sq {
            if keep {
                holonomies.insert(v);
            } else {
                corrections.insert(v);
            }
        }
    };
    for m in -k..=k {
        for n in -k..=k {
            let w = ExactVector::from_ints(m, n);
            if gcd(m, n) == 1 {
                let keep = !meets_class(&w, &q) || !meets_class(&w, &neg_q);
                consider(w.clone(), keep);
            }
            for (shift, start_other) in [(&q, &q), (&neg_q, &neg_q)] {
                // from one marked point to the other: both classes block
                let a = &w + shift;
                let keep = !meets_class(&a, &zero) && !meets_class(&a, start_other);
                consider(a, keep);
            }
        }
    }
    SlitHolonomy { holonomies, corrections }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub struct NuAtom {
    pub n: i64,
    /// Weight is `weight_phi / ζ(2)`.
    pub weight_phi: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub struct EtaAtom {
    pub n: i64,
    pub weight: u64,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct SiegelVeechMeasureTorus {
    pub normalizer: &'static str,
    pub nu_atoms: Vec<NuAtom>,
    pub eta_atoms: Vec<EtaAtom>,
}

impl SiegelVeechMeasureTorus {
    pub fn nu(&self, n: i64) -> Option<u64> {
        self.nu_atoms.iter().find(|a| a.n == n).map(|a| a.weight_phi)
    }

    /// Weight of `ν` at `n` with `ζ(2)` expanded.
    pub fn nu_f64(&self, n: i64) -> Option<f64> {
        self.nu(n).map(|w| w as f64 * siegel_constant_torus())
    }
}

/// `ν = Σ_{0 < |n| <= max_n} φ(|n|)/ζ(2) δ_n` and `η = δ₁ + δ₋₁`.
pub fn sv_measure_torus(max_n: u64) -> SiegelVeechMeasureTorus {
    let mut nu_atoms = Vec::new();
    for m in (1..=max_n as i64).rev() {
        nu_atoms.push(NuAtom { n: -m, weight_phi: euler_phi(m as u64) });
    }
    for m in 1..=max_n as i64 {
        nu_atoms.push(NuAtom { n: m, weight_phi: euler_phi(m as u64) });
    }
    SiegelVeechMeasureTorus {
        normalizer: "zeta(2)",
        nu_atoms,
        eta_atoms: vec![EtaAtom { n: -1, weight: 1 }, EtaAtom { n: 1, weight: 1 }],
    }
}

/// `1/ζ(2) = 6/π²`.
pub fn siegel_constant_torus() -> f64 {
    6.0 / (PI * PI)
}

/// Histogram of `det(v₁, v₂)` over ordered pairs of primitive vectors with
/// `|vᵢ| <= b`.
pub fn det_histogram(b: i64) -> BTreeMap<i64, u64> {
    let pts = crate::exactplane::primitive_points_in_disc(&Rational::from_integer(b.into()));
    let mut hist = BTreeMap::new();
    for &(a, c) in &pts {
        for &(x, y) in &pts {
            *hist.entry(a * y - c * x).or_insert(0) += 1;
        }
    }
    hist
}

/// `n · freq(n) / freq(1)`, which tracks `φ(n)` as `b` grows: pairs with
/// `det = n` lie in a region whose area scales like `1/n`, so the raw
/// frequency carries an extra factor `1/n`.
pub fn det_phi_ratio(hist: &BTreeMap<i64, u64>, n: i64) -> f64 {
    let f = |k: i64| *hist.get(&k).unwrap_or(&0) as f64;
    n as f64 * f(n) / f(1)
}

/// `φ(|n|)` for `n ≠ 0`.
pub fn phi(n: i64) -> u64 {
    euler_phi(n.unsigned_abs().max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactplane::{int, primitive_points_in_disc, rat};
    use crate::geodesic::{enumerate, DEFAULT_BUDGET};
    use crate::surface::models::{matrix_torus, slit_torus};
    use proptest::prelude::*;

    fn v(x: Rational, y: Rational) -> ExactVector {
        ExactVector::new(x, y)
    }

    #[test]
    fn identity_radius_one() {
        let t = TorusPoint::new(ExactMatrix::identity()).unwrap();
        let h = torus_holonomy(&t, &int(1));
        let want: BTreeSet<_> = [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().map(|&(x, y)| ExactVector::from_ints(x, y)).collect();
        assert_eq!(h, want);
    }

    #[test]
    fn shear_matches_image_filter() {
        let g = ExactMatrix::from_ints(1, 1, 0, 1);
        let t = TorusPoint::new(g.clone()).unwrap();
        for r in [1, 3, 5] {
            let mut want = BTreeSet::new();
            for p in -20..=20i64 {
                for q in -20..=20i64 {
                    let w = g.apply(&ExactVector::from_ints(p, q));
                    if gcd(p, q) == 1 && w.norm_sq() <= int(r * r) {
                        want.insert(w);
                    }
                }
            }
            assert_eq!(torus_holonomy(&t, &int(r)), want);
        }
    }

    #[test]
    fn torus_agrees_with_enumeration() {
        for g in [ExactMatrix::identity(), ExactMatrix::from_ints(2, 1, 1, 1), ExactMatrix::new(rat(1, 2), rat(1, 3), int(0), int(2))] {
            let s = matrix_torus(&g).unwrap();
            let t = TorusPoint::new(g).unwrap();
            for r in [2, 5, 10] {
                let e: BTreeSet<_> = enumerate(&s, &int(r), DEFAULT_BUDGET).unwrap().holonomies().into_iter().collect();
                assert_eq!(torus_holonomy(&t, &int(r)), e);
            }
        }
    }

    #[test]
    fn float_count_matches_exact() {
        let g = ExactMatrix::new(rat(3, 2), rat(5, 7), rat(1, 3), rat(52, 63));
        let t = TorusPoint::new(g.clone()).unwrap();
        for r in [1, 4, 9, 13] {
            // the disc boundary is avoided by using radius r + 1/1000
            let rr = int(r) + rat(1, 1000);
            let exact = torus_holonomy(&t, &rr).len() as u64;
            assert_eq!(torus_count_f(&g.to_float(), r as f64 + 0.001), exact);
        }
        assert_eq!(torus_count_f(&FloatMatrix::identity(), 10.0), primitive_points_in_disc(&int(10)).len() as u64);
    }

    #[test]
    fn slit_formula_example() {
        let t = SlitTorusPoint::new(ExactMatrix::identity(), v(rat(1, 3), rat(1, 5))).unwrap();
        let h = slit_torus_holonomy(&t, &int(1));
        for w in [v(rat(1, 3), rat(1, 5)), v(rat(-2, 3), rat(1, 5)), v(rat(-1, 3), rat(-1, 5)), ExactVector::from_ints(0, 1)] {
            assert!(h.holonomies.contains(&w), "{w}");
        }
        assert_eq!(h.holonomies.iter().filter(|w| w.x.is_integer() && w.y.is_integer()).count(), 4);
        assert!(h.corrections.is_empty());
    }

    #[test]
    fn degenerate_slit_is_flagged() {
        let t = SlitTorusPoint::new(ExactMatrix::identity(), v(rat(1, 2), int(0))).unwrap();
        let h = slit_torus_holonomy(&t, &int(2));
        assert!(h.corrections.contains(&ExactVector::from_ints(1, 0)));
        assert!(!h.holonomies.contains(&ExactVector::from_ints(1, 0)));
        assert!(SlitTorusPoint::new(ExactMatrix::identity(), ExactVector::from_ints(1, 0)).is_err());
    }

    #[test]
    fn slit_agrees_with_enumeration() {
        let cases = [
            (ExactMatrix::identity(), v(rat(1, 3), rat(1, 5))),
            (ExactMatrix::identity(), v(rat(1, 2), rat(1, 2))),
            (ExactMatrix::from_ints(1, 1, 0, 1), v(rat(2, 5), rat(1, 7))),
            (ExactMatrix::new(int(2), int(0), int(0), rat(1, 2)), v(rat(1, 4), rat(1, 4))),
        ];
        for (g, sv) in cases {
            let s = slit_torus(&g, &sv).unwrap();
            let t = SlitTorusPoint::new(g, sv).unwrap();
            let e: BTreeSet<_> = enumerate(&s, &int(2), DEFAULT_BUDGET).unwrap().holonomies().into_iter().collect();
            assert_eq!(slit_torus_holonomy(&t, &int(2)).holonomies, e);
        }
        // the diagonal through the centre is blocked in both directions
        let t = SlitTorusPoint::new(ExactMatrix::identity(), v(rat(1, 2), rat(1, 2))).unwrap();
        assert!(slit_torus_holonomy(&t, &int(2)).corrections.contains(&ExactVector::from_ints(1, 1)));
    }

    #[test]
    fn measure_atoms() {
        let m = sv_measure_torus(100);
        assert_eq!(m.nu(1), Some(1));
        assert_eq!(m.nu(-6), Some(2));
        assert_eq!(m.nu(0), None);
        for n in 1..=100 {
            assert_eq!(m.nu(n), m.nu(-n));
        }
        assert_eq!(m.eta_atoms, vec![EtaAtom { n: -1, weight: 1 }, EtaAtom { n: 1, weight: 1 }]);
        let json = serde_json::to_value(&m).unwrap();
        assert_eq!(json["normalizer"], "zeta(2)");
    }

    #[test]
    fn siegel_constant_from_partial_sums() {
        let k = 1_000_000u64;
        let partial: f64 = (1..=k).map(|n| 1.0 / (n as f64 * n as f64)).sum();
        // tail Σ_{n>k} 1/n² lies in (1/(k+1), 1/k)
        let lo = partial + 1.0 / (k as f64 + 1.0);
        let hi = partial + 1.0 / k as f64;
        let c = siegel_constant_torus();
        assert!(1.0 / hi <= c + 1e-15 && c <= 1.0 / lo + 1e-15);
        for r in [20i64, 40, 80] {
            let n = primitive_points_in_disc(&int(r)).len() as f64;
            assert!((n / (PI * (r * r) as f64) - c).abs() < 0.02);
        }
    }

    #[test]
    fn determinant_spectrum() {
        let h = det_histogram(30);
        assert!(h.values().sum::<u64>() > 0);
        let p = det_histogram(6);
        let pts = primitive_points_in_disc(&int(6));
        assert_eq!(p[&0], 2 * pts.len() as u64);
        for n in [2, 3] {
            let ratio = det_phi_ratio(&h, n);
            let want = phi(n) as f64;
            assert!((ratio - want).abs() <= 0.1 * want, "n={n}: {ratio}");
        }
    }

    #[test]
    fn collinear_primitive_pairs_are_opposite_or_equal() {
        let pts = primitive_points_in_disc(&int(8));
        for &(a, b) in &pts {
            for &(c, d) in &pts {
                if a * d - b * c == 0 {
                    assert!((a, b) == (c, d) || (a, b) == (-c, -d));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn segment_test_matches_scan(ax in -6i64..7, ay in -6i64..7, cx in 0i64..12, cy in 0i64..12) {
            prop_assume!(ax != 0 || ay != 0);
            let a = ExactVector::from_ints(ax, ay);
            let c = v(rat(cx, 12), rat(cy, 12));
            // every crossing time has denominator dividing 12·|a_i|, hence 720
            let mut hit = false;
            for j in 1..720 {
                let t = rat(j, 720);
                let p = &a.scale(&t) - &c;
                if p.x.is_integer() && p.y.is_integer() {
                    hit = true;
                }
            }
            prop_assert_eq!(meets_class(&a, &c), hit);
        }

        #[test]
        fn phi_symmetry(n in 1i64..500) {
            prop_assert_eq!(phi(n), phi(-n));
        }
    }
}
