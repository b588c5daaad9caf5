//! Paths along L¹ Delaunay edges that shadow a saddle connection.
//!
//! The triangles crossed by the connection are developed into the plane one
//! after another. The walk keeps a current vertex `z` and repeatedly looks at
//! the last triangle of the chain that still has `z` as a vertex, moving to
//! another vertex of that triangle according to which side of its
//! circumscribing diamond `z` lies on.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::delaunay::{planar_delaunay, verify, DelaunayTriangulation, PlanarDelaunay};
use crate::error::{Error, Result};
use crate::exactplane::{from_f64, rat, sqrt_bounds, to_f64, ExactVector, LinearAction, Rational};
use crate::geodesic::{end_corner, replay, trace_crossings, SaddleConnection};
use crate::surface::{Slot, TranslationSurface};

const START_BITS: u32 = 32;
const MAX_BITS: u32 = 256;

#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct ChewPath {
    /// Directed edges: a slot traversed in its own direction.
    pub edges: Vec<Slot>,
    /// Edge holonomies in the surface's coordinates.
    pub holonomies: Vec<ExactVector>,
    /// Holonomy of the shadowed connection.
    pub target: ExactVector,
    /// Upper bound on `(Σ|eᵢ|)²`.
    #[serde(with = "crate::exactplane::rational_str")]
    pub total_length_sq_bound: Rational,
    pub ratio_upper_bound: f64,
}

impl ChewPath {
    fn new(edges: Vec<Slot>, holonomies: Vec<ExactVector>, target: ExactVector) -> Self {
        let hi = match float_length_bounds(&holonomies) {
            Some((_, hi)) => hi,
            None => length_bounds(&holonomies, 64).1,
        };
        let total_length_sq_bound = &hi * &hi;
        let ratio_upper_bound = (to_f64(&total_length_sq_bound) / to_f64(&target.norm_sq())).sqrt();
        ChewPath { edges, holonomies, target, total_length_sq_bound, ratio_upper_bound }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.holonomies.iter().map(|h| h.length()).sum()
    }

    pub fn ratio(&self) -> f64 {
        self.length() / self.target.length()
    }

    /// Sum of edge holonomies, equal to the target for every constructed path.
    pub fn holonomy(&self) -> ExactVector {
        self.holonomies.iter().fold(ExactVector::zero(), |acc, h| &acc + h)
    }

    /// Decides `(Σ|eᵢ|)² <= k_sq·|target|²`.
    pub fn length_within(&self, k_sq: &Rational) -> Result<bool> {
        let bound = k_sq * self.target.norm_sq();
        let sq: Vec<Rational> = self.holonomies.iter().map(|h| h.norm_sq()).collect();
        match sq.as_slice() {
            [a] => return Ok(a <= &bound),
            [a, b] => {
                // (|a| + |b|)² <= c  iff  2|a||b| <= c - a² - b²
                let rest = &bound - a - b;
                return Ok(!rest.is_negative() && rat(4, 1) * a * b <= &rest * &rest);
            }
            _ => {}
        }
        if let Some((lo, hi)) = float_length_bounds(&self.holonomies) {
            if &hi * &hi <= bound {
                return Ok(true);
            }
            if &lo * &lo > bound {
                return Ok(false);
            }
        }
        let mut bits = START_BITS;
        while bits <= MAX_BITS {
            let (lo, hi) = length_bounds(&self.holonomies, bits);
            if &hi * &hi <= bound {
                return Ok(true);
            }
            if &lo * &lo > bound {
                return Ok(false);
            }
            bits *= 2;
        }
        Err(Error::IntervalUndecided)
    }

    /// Decides the √10 bound.
    pub fn within_sqrt10(&self) -> Result<bool> {
        self.length_within(&rat(10, 1))
    }
}

fn length_bounds(hs: &[ExactVector], bits: u32) -> (Rational, Rational) {
    let mut lo = Rational::zero();
    let mut hi = Rational::zero();
    for h in hs {
        let (l, u) = sqrt_bounds(&h.norm_sq(), bits);
        lo += l;
        hi += u;
    }
    (lo, hi)
}

/// Bounds on `Σ|hᵢ|` from correctly rounded double arithmetic, widened by
/// the accumulated rounding error. `None` outside the normal double range.
fn float_length_bounds(hs: &[ExactVector]) -> Option<(Rational, Rational)> {
    let mut sum = 0.0f64;
    for h in hs {
        let sq = to_f64(&h.norm_sq());
        if !(sq.is_normal() && sq < 1e300) {
            return None;
        }
        sum += sq.sqrt();
    }
    let slack = (hs.len() as f64 + 4.0) * f64::EPSILON;
    let lo = from_f64(sum * (1.0 - slack)).ok()?;
    let hi = from_f64(sum * (1.0 + slack)).ok()?;
    Some((lo, hi))
}

/// Rotation by `k` quarter turns.
fn quarter_turn(v: &ExactVector, k: usize) -> ExactVector {
    (0..k).fold(v.clone(), |acc, _| acc.rot90())
}

/// Quarter turns bringing `v` into `x > 0, |y| <= x`.
fn normalising_turns(v: &ExactVector) -> usize {
    (0..4)
        .find(|&k| {
            let w = quarter_turn(v, k);
            w.x.is_positive() && w.y.abs() <= w.x
        })
        .expect("some quarter turn normalises a nonzero vector")
}

struct Developed {
    tri: usize,
    /// Corner positions, corner `k` at the start of edge `k`.
    pts: [ExactVector; 3],
    /// Center of the circumscribing diamond.
    center: ExactVector,
}

/// Develops the triangles crossed by a connection, start vertex at the origin.
fn develop(t: &DelaunayTriangulation, start: Slot, crossings: &[Slot], turns: usize) -> Vec<Developed> {
    let w = &t.working;
    let place = |tri: usize, offset: &ExactVector| {
        let corners = &w.triangles()[tri];
        Developed {
            tri,
            pts: [0, 1, 2].map(|k| quarter_turn(&(offset + &corners.corner(k)), turns)),
            center: quarter_turn(&(offset + &t.certificates[tri].center), turns),
        }
    };
    let mut offset = -&w.triangles()[start.tri].corner(start.edge);
    let mut chain = vec![place(start.tri, &offset)];
    for &cs in crossings {
        let here = &w.triangles()[cs.tri];
        let p = w.partner(cs);
        let there = &w.triangles()[p.tri];
        // the far end of the crossed edge is the start of the partner edge
        offset = &(&offset + &here.corner(cs.edge + 1)) - &there.corner(p.edge);
        chain.push(place(p.tri, &offset));
    }
    chain
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum DiamondSide {
    UpperLeft,
    UpperRight,
    LowerLeft,
    LowerRight,
}

fn side_of(center: &ExactVector, p: &ExactVector) -> Result<DiamondSide> {
    let dx = &p.x - &center.x;
    let dy = &p.y - &center.y;
    if dx.is_zero() || dy.is_zero() {
        return Err(Error::Degenerate("vertex at a corner of its diamond".into()));
    }
    Ok(match (dy.is_positive(), dx.is_positive()) {
        (true, false) => DiamondSide::UpperLeft,
        (true, true) => DiamondSide::UpperRight,
        (false, false) => DiamondSide::LowerLeft,
        (false, true) => DiamondSide::LowerRight,
    })
}

/// Runs the vertex walk on a developed chain. Returns each step as
/// `(chain index, from corner, to corner)`.
///
/// When `z` is not the target, the last triangle holding it is `z, b, a` in
/// counterclockwise order, with `a → b` the next edge crossed: `a` lies above
/// the connection and `b` below. Above the connection, `z` on an upper side of
/// the diamond moves clockwise to `a`, and on the lower left side hops across
/// to `b`; below it is the mirror image.
fn walk(chain: &[Developed], target: &ExactVector) -> Result<Vec<(usize, usize, usize)>> {
    let find = |j: usize, z: &ExactVector| chain[j].pts.iter().position(|p| p == z);
    let mut z = ExactVector::zero();
    let mut j = 0usize;
    let mut steps = Vec::new();
    let cap = 3 * chain.len() + 3;
    while &z != target {
        if steps.len() > cap {
            return Err(Error::ChewCase("walk makes no progress".into()));
        }
        j = (j..chain.len()).rev().find(|&k| find(k, &z).is_some()).expect("current vertex is in the chain");
        let tri = &chain[j].pts;
        let from = find(j, &z).expect("vertex found above");
        let to = if let Some(k) = find(j, target) {
            k
        } else {
            let side = side_of(&chain[j].center, &z)?;
            let above = !target.cross(&z).is_negative();
            match (above, side) {
                (true, DiamondSide::UpperLeft | DiamondSide::UpperRight) => (from + 2) % 3,
                (true, DiamondSide::LowerLeft) => (from + 1) % 3,
                (false, DiamondSide::LowerLeft | DiamondSide::LowerRight) => (from + 1) % 3,
                (false, DiamondSide::UpperLeft) => (from + 2) % 3,
                (_, s) => return Err(Error::ChewCase(format!("case 4: current vertex on the {s:?} side"))),
            }
        };
        steps.push((j, from, to));
        z = tri[to].clone();
    }
    Ok(steps)
}

/// Directed slot from corner `from` to corner `to` of triangle `tri`.
fn directed(s: &TranslationSurface, tri: usize, from: usize, to: usize) -> Slot {
    if (from + 1) % 3 == to {
        Slot::new(tri, from)
    } else {
        s.partner(Slot::new(tri, to))
    }
}

fn chew_unchecked(t: &DelaunayTriangulation, beta: &SaddleConnection) -> Result<ChewPath> {
    let r = replay(&t.surface, beta.start_corner, &beta.crossings)?;
    if r.holonomy != beta.holonomy {
        return Err(Error::ConnectionMismatch("connection was not enumerated on this triangulation".into()));
    }
    let (edges, holonomies) = walk_edges(t, beta.start_corner, &beta.crossings, &beta.holonomy)?;
    let path = ChewPath::new(edges, holonomies, beta.holonomy.clone());
    if path.holonomy() != beta.holonomy {
        return Err(Error::ChewCase("path holonomy differs from the connection".into()));
    }
    Ok(path)
}

/// Edges and holonomies of the walk along a traced segment.
fn walk_edges(
    t: &DelaunayTriangulation,
    start: Slot,
    crossings: &[Slot],
    holonomy: &ExactVector,
) -> Result<(Vec<Slot>, Vec<ExactVector>)> {
    let s = &t.surface;
    let target_w = t.frame.apply(holonomy);
    let turns = normalising_turns(&target_w);
    let chain = develop(t, start, crossings, turns);
    let target = quarter_turn(&target_w, turns);
    let steps = walk(&chain, &target)?;
    let edges: Vec<Slot> = steps.iter().map(|&(j, a, b)| directed(s, chain[j].tri, a, b)).collect();
    let holonomies = edges.iter().map(|&e| s.edge(e).clone()).collect();
    Ok((edges, holonomies))
}

/// Chew path of a connection enumerated on `t.surface`.
pub fn chew_path(t: &DelaunayTriangulation, beta: &SaddleConnection) -> Result<ChewPath> {
    verify(t)?;
    chew_unchecked(t, beta)
}

/// A planar triangulation prepared for repeated path queries.
pub struct PlanarChew {
    pub delaunay: PlanarDelaunay,
    points: Vec<ExactVector>,
    /// The points over a common denominator, when that fits in machine words.
    scaled: Option<Vec<(i128, i128)>>,
}

fn scale_points(points: &[ExactVector]) -> Option<Vec<(i128, i128)>> {
    let one = BigInt::from(1);
    let den = points.iter().fold(one, |d, p| d.lcm(p.x.denom()).lcm(p.y.denom()));
    let limit = BigInt::from(1i64 << 40);
    let word = |r: &Rational| {
        let n = r.numer() * (&den / r.denom());
        (n.abs() < limit).then(|| n.to_i128()).flatten()
    };
    points.iter().map(|p| Some((word(&p.x)?, word(&p.y)?))).collect()
}

impl PlanarChew {
    pub fn new(points: &[ExactVector], max_flips: usize) -> Result<Self> {
        let delaunay = planar_delaunay(points, max_flips)?;
        Ok(PlanarChew { delaunay, points: points.to_vec(), scaled: scale_points(points) })
    }

    /// Points other than `a` on the segment from `a` to `b`, nearest first.
    fn stops(&self, a: usize, b: usize) -> Vec<usize> {
        let n = self.points.len();
        if let Some(q) = &self.scaled {
            let (vx, vy) = (q[b].0 - q[a].0, q[b].1 - q[a].1);
            let len = vx * vx + vy * vy;
            let mut stops: Vec<(i128, usize)> = (0..n)
                .filter_map(|k| {
                    let (wx, wy) = (q[k].0 - q[a].0, q[k].1 - q[a].1);
                    let dot = wx * vx + wy * vy;
                    (k != a && vx * wy == vy * wx && dot > 0 && dot <= len).then_some((dot, k))
                })
                .collect();
            stops.sort();
            return stops.into_iter().map(|(_, k)| k).collect();
        }
        let pa = &self.points[a];
        let v = &self.points[b] - pa;
        let mut stops: Vec<(Rational, usize)> = (0..n)
            .filter_map(|k| {
                let w = &self.points[k] - pa;
                if k == a || !v.cross(&w).is_zero() {
                    return None;
                }
                let t = w.dot(&v) / v.norm_sq();
                (t.is_positive() && t <= rat(1, 1)).then_some((t, k))
            })
            .collect();
        stops.sort();
        stops.into_iter().map(|(_, k)| k).collect()
    }

    /// Path from point `a` to point `b`. A segment through other points is
    /// split there and the pieces are joined.
    pub fn path(&self, a: usize, b: usize) -> Result<ChewPath> {
        let n = self.points.len();
        if a >= n || b >= n {
            return Err(Error::IndexOutOfRange(format!("point {} of {n}", a.max(b))));
        }
        if a == b {
            return Err(Error::InvalidArgument("endpoints coincide".into()));
        }
        let dt = &self.delaunay.triangulation;
        let s = &dt.surface;
        let mut edges = Vec::new();
        let mut holonomies = Vec::new();
        let mut from = a;
        for to in self.stops(a, b) {
            let piece = &self.points[to] - &self.points[from];
            let (corner, crossings) = trace_crossings(s, self.delaunay.vertex_of_point[from], &piece)?;
            if s.vertex(end_corner(s, corner, &crossings)) != self.delaunay.vertex_of_point[to] {
                return Err(Error::ConnectionMismatch(format!("segment from point {from} misses point {to}")));
            }
            let (e, h) = walk_edges(dt, corner, &crossings, &piece)?;
            edges.extend(e);
            holonomies.extend(h);
            from = to;
        }
        let v = &self.points[b] - &self.points[a];
        let path = ChewPath::new(edges, holonomies, v);
        if path.holonomy() != path.target {
            return Err(Error::ChewCase("path holonomy differs from the segment".into()));
        }
        Ok(path)
    }
}

/// Chew path between points `a` and `b` of a planar point set.
pub fn planar_chew(points: &[ExactVector], a: usize, b: usize) -> Result<ChewPath> {
    PlanarChew::new(points, crate::delaunay::DEFAULT_MAX_FLIPS)?.path(a, b)
}

/// Number of path edges parallel to `gamma`.
pub fn follows_parallel_count(p: &ChewPath, gamma: &SaddleConnection) -> usize {
    p.holonomies.iter().filter(|h| h.cross(&gamma.holonomy).is_zero()).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delaunay::{delaunay_l1, DEFAULT_MAX_FLIPS};
    use crate::exactplane::{int, ExactMatrix};
    use crate::geodesic::{detect_cylinder, enumerate, shortest, CylinderResult, DEFAULT_BUDGET};
    use crate::surface::models::{lattice_torus, slit_torus, square_torus};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn v(x: i64, y: i64) -> ExactVector {
        ExactVector::from_ints(x, y)
    }

    fn connections(t: &DelaunayTriangulation, r: i64) -> Vec<SaddleConnection> {
        enumerate(&t.surface, &int(r), DEFAULT_BUDGET).unwrap().connections
    }

    #[test]
    fn delaunay_edge_is_its_own_path() {
        let t = delaunay_l1(&square_torus(), DEFAULT_MAX_FLIPS).unwrap();
        for b in connections(&t, 1) {
            let p = chew_path(&t, &b).unwrap();
            assert_eq!(p.holonomies, vec![b.holonomy.clone()]);
            assert!(p.length_within(&int(1)).unwrap());
        }
    }

    #[test]
    fn square_torus_two_one() {
        let t = delaunay_l1(&square_torus(), DEFAULT_MAX_FLIPS).unwrap();
        let b = connections(&t, 3).into_iter().find(|c| c.holonomy == v(2, 1)).unwrap();
        let p = chew_path(&t, &b).unwrap();
        assert_eq!(p.holonomy(), v(2, 1));
        let mut hs = p.holonomies.clone();
        hs.sort();
        assert_eq!(hs, vec![v(1, 0), v(1, 1)]);
        assert!((p.length() - (1.0 + 2f64.sqrt())).abs() < 1e-12);
        assert!(p.within_sqrt10().unwrap());
    }

    #[test]
    fn sheared_tori_stay_within_sqrt10() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 100 {
            let b1 = ExactVector::new(rat(rng.gen_range(5..15), 10), rat(rng.gen_range(-5..5), 10));
            let b2 = ExactVector::new(rat(rng.gen_range(-9..9), 10), rat(rng.gen_range(6..15), 10));
            let s = lattice_torus(&b1, &b2).unwrap();
            let t = delaunay_l1(&s, DEFAULT_MAX_FLIPS).unwrap();
            for b in connections(&t, 5).into_iter().step_by(7).take(10) {
                let p = chew_path(&t, &b).unwrap();
                assert_eq!(p.holonomy(), b.holonomy);
                assert!(p.within_sqrt10().unwrap(), "ratio {} for {:?}", p.ratio(), b.holonomy);
                checked += 1;
            }
        }
    }

    #[test]
    fn slit_torus_paths() {
        let s = slit_torus(&ExactMatrix::from_ints(2, 1, 1, 1), &ExactVector::new(rat(1, 3), rat(2, 7))).unwrap();
        let t = delaunay_l1(&s, DEFAULT_MAX_FLIPS).unwrap();
        let all = connections(&t, 3);
        assert!(!all.is_empty());
        for b in all {
            let p = chew_path(&t, &b).unwrap();
            assert_eq!(p.holonomy(), b.holonomy);
            assert!(p.within_sqrt10().unwrap());
        }
    }

    #[test]
    fn rejects_foreign_connection() {
        let t = delaunay_l1(&square_torus(), DEFAULT_MAX_FLIPS).unwrap();
        let mut b = connections(&t, 3).into_iter().find(|c| c.holonomy == v(2, 1)).unwrap();
        b.holonomy = v(1, 2);
        assert_eq!(chew_path(&t, &b).unwrap_err().code(), "CONNECTION_MISMATCH");
    }

    #[test]
    fn planar_two_points() {
        let p = planar_chew(&[v(0, 0), v(3, 1)], 0, 1).unwrap();
        assert_eq!(p.holonomies, vec![v(3, 1)]);
        assert!(p.length_within(&int(1)).unwrap());
    }

    #[test]
    fn planar_unit_square_diagonal() {
        let pts = [v(0, 0), v(1, 0), v(0, 1), v(1, 1)];
        let p = planar_chew(&pts, 0, 3).unwrap();
        assert_eq!(p.holonomy(), v(1, 1));
        assert!(p.length() <= 2.0 + 1e-12);
        assert!(p.length_within(&int(2)).unwrap());
    }

    #[test]
    fn planar_collinear_points_split() {
        let pts = [v(0, 0), v(1, 1), v(2, 2), v(0, 3), v(3, 0)];
        let p = planar_chew(&pts, 0, 2).unwrap();
        assert_eq!(p.holonomy(), v(2, 2));
        assert!(p.within_sqrt10().unwrap());
    }

    #[test]
    fn parallel_count_direct() {
        let s = square_torus();
        let g = shortest(&s, DEFAULT_BUDGET).unwrap();
        let k = 4;
        let hs = vec![g.holonomy.clone(); k];
        let target = g.holonomy.scale(&int(k as i64));
        let p = ChewPath::new(vec![g.start_corner; k], hs, target);
        assert_eq!(follows_parallel_count(&p, &g), k);
        let q = ChewPath::new(vec![g.start_corner], vec![g.holonomy.rot90()], g.holonomy.rot90());
        assert_eq!(follows_parallel_count(&q, &g), 0);
    }

    #[test]
    fn many_parallel_edges_mean_a_crossed_cylinder() {
        // thin tori: the shortest curve bounds a long cylinder
        for (w, h) in [(1, 4), (1, 6), (1, 9)] {
            let s = lattice_torus(&ExactVector::new(rat(w, h), int(0)), &ExactVector::new(rat(1, 3), int(h))).unwrap();
            let t = delaunay_l1(&s, DEFAULT_MAX_FLIPS).unwrap();
            let g = shortest(&t.surface, DEFAULT_BUDGET).unwrap();
            let m = t.surface.num_triangles();
            let mut triggered = false;
            for b in connections(&t, 2 * h) {
                let p = chew_path(&t, &b).unwrap();
                assert!(p.within_sqrt10().unwrap());
                if follows_parallel_count(&p, &g) > 2 * m + 1 {
                    triggered = true;
                    match detect_cylinder(&t.surface, &g, &int(1000)) {
                        CylinderResult::Cylinder(c) => assert!(c.height_sq.is_positive()),
                        other => panic!("expected a cylinder, got {other:?}"),
                    }
                }
            }
            assert!(triggered);
        }
    }

    #[test]
    fn sqrt_bounds_bracket() {
        for (n, d) in [(2, 1), (10, 3), (1, 7), (49, 4), (0, 1)] {
            let q = rat(n, d);
            let (lo, hi) = sqrt_bounds(&q, 40);
            assert!(&lo * &lo <= q && q <= &hi * &hi);
            assert!(&hi - &lo <= rat(1, 1 << 39));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn planar_ratio_within_sqrt10(raw in proptest::collection::btree_set((0i64..30, 0i64..30), 2..9)) {
            let pts: Vec<ExactVector> = raw.iter().map(|&(x, y)| ExactVector::new(rat(x, 2), rat(y, 3))).collect();
            let Ok(pc) = PlanarChew::new(&pts, DEFAULT_MAX_FLIPS) else { return Ok(()) };
            for a in 0..pts.len() {
                for b in 0..pts.len() {
                    if a != b {
                        let p = pc.path(a, b).unwrap();
                        prop_assert_eq!(p.holonomy(), &pts[b] - &pts[a]);
                        prop_assert!(p.within_sqrt10().unwrap());
                    }
                }
            }
        }
    }
}
