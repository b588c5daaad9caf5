//! Saddle connections: enumeration by wedge propagation, counting, shortest
//! and second-shortest nonhomologous connections, cylinder detection.

use std::cmp::Ordering;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exactplane::{format_rational, ExactVector, Rational};
use crate::surface::{Slot, TranslationSurface};

/// Default cap on wedge-propagation states.
pub const DEFAULT_BUDGET: usize = 4_000_000;

#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct SaddleConnection {
    pub holonomy: ExactVector,
    pub start: usize,
    pub end: usize,
    /// Corner at the start whose half-open sector holds the direction.
    pub start_corner: Slot,
    pub end_corner: Slot,
    /// Slots crossed, each given in the triangle being left.
    pub crossings: Vec<Slot>,
    /// Canonical representative in `H₁(X, Σ; ℤ)` over the edge basis.
    pub homology_class: Vec<i64>,
}

impl SaddleConnection {
    pub fn len_sq(&self) -> Rational {
        self.holonomy.norm_sq()
    }

    pub fn length(&self) -> f64 {
        self.holonomy.length()
    }

    fn sort_key_cmp(&self, other: &Self) -> Ordering {
        self.len_sq()
            .cmp(&other.len_sq())
            .then_with(|| self.holonomy.x.cmp(&other.holonomy.x))
            .then_with(|| self.holonomy.y.cmp(&other.holonomy.y))
            .then_with(|| self.start.cmp(&other.start))
            .then_with(|| self.end.cmp(&other.end))
            .then_with(|| self.crossings.cmp(&other.crossings))
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct HolonomySet {
    /// Squared search radius; every connection has `|v|² <= radius_sq`.
    #[serde(with = "crate::exactplane::rational_str")]
    pub radius_sq: Rational,
    pub connections: Vec<SaddleConnection>,
    /// Wedge states explored.
    pub states: usize,
}

impl HolonomySet {
    pub fn len(&self) -> usize {
        self.connections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.connections.is_empty()
    }

    pub fn holonomies(&self) -> Vec<ExactVector> {
        self.connections.iter().map(|c| c.holonomy.clone()).collect()
    }

    /// CSV with header `x_num,x_den,y_num,y_den,len_sq_num,len_sq_den,start,end`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_num,x_den,y_num,y_den,len_sq_num,len_sq_den,start,end\n");
        for c in &self.connections {
            let l = c.len_sq();
            let v = &c.holonomy;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                v.x.numer(),
                v.x.denom(),
                v.y.numer(),
                v.y.denom(),
                l.numer(),
                l.denom(),
                c.start,
                c.end
            );
        }
        out
    }
}

/// Integer Hermite reduction modulo the triangle boundary relations.
#[derive(Clone, Debug)]
pub struct HomologyReducer {
    /// Echelon rows with positive pivots: (pivot column, row).
    rows: Vec<(usize, Vec<i128>)>,
    num_edges: usize,
    relations: Vec<Vec<i64>>,
}

impl HomologyReducer {
    pub fn new(s: &TranslationSurface) -> Self {
        let e = s.num_edges();
        let relations: Vec<Vec<i64>> = (0..s.num_triangles())
            .map(|t| {
                let mut r = vec![0i64; e];
                for k in 0..3 {
                    let (idx, sign) = s.edge_index(Slot::new(t, k));
                    r[idx] += sign;
                }
                r
            })
            .collect();
        let mut m: Vec<Vec<i128>> =
            relations.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
        let mut rows = Vec::new();
        let mut top = 0;
        for col in 0..e {
            loop {
                let mut best: Option<usize> = None;
                for r in top..m.len() {
                    if m[r][col] != 0 && best.is_none_or(|b| m[r][col].abs() < m[b][col].abs()) {
                        best = Some(r);
                    }
                }
                let Some(b) = best else { break };
                m.swap(top, b);
                let mut done = true;
                for r in top + 1..m.len() {
                    if m[r][col] != 0 {
                        let q = Integer::div_floor(&m[r][col], &m[top][col]);
                        for c in col..e {
                            let v = m[top][c];
                            m[r][c] -= q * v;
                        }
                        if m[r][col] != 0 {
                            done = false;
                        }
                    }
                }
                if done {
                    if m[top][col] < 0 {
                        for c in col..e {
                            m[top][c] = -m[top][c];
                        }
                    }
                    rows.push((col, m[top].clone()));
                    top += 1;
                    break;
                }
            }
        }
        Self { rows, num_edges: e, relations }
    }

    /// Canonical coset representative: each pivot entry reduced into `[0, pivot)`.
    pub fn reduce(&self, v: &[i64]) -> Vec<i64> {
        let mut w: Vec<i128> = v.iter().map(|&x| x as i128).collect();
        for (col, row) in &self.rows {
            let q = Integer::div_floor(&w[*col], &row[*col]);
            if q != 0 {
                for c in *col..self.num_edges {
                    w[c] -= q * row[c];
                }
            }
        }
        w.into_iter().map(|x| x as i64).collect()
    }

    pub fn negate(&self, class: &[i64]) -> Vec<i64> {
        let n: Vec<i64> = class.iter().map(|x| -x).collect();
        self.reduce(&n)
    }

    /// Whether `a` and `b` are linearly independent in `H₁(X, Σ; ℚ)`.
    pub fn independent(&self, a: &[i64], b: &[i64]) -> bool {
        let base = rational_rank(&self.relations, &[]);
        rational_rank(&self.relations, &[a, b]) == base + 2
    }

    /// Whether `a` is nonzero in `H₁(X, Σ; ℚ)`.
    pub fn nonzero(&self, a: &[i64]) -> bool {
        rational_rank(&self.relations, &[a]) > rational_rank(&self.relations, &[])
    }

    pub fn rank(&self) -> usize {
        self.num_edges - self.rows.len()
    }
}

fn rational_rank(rows: &[Vec<i64>], extra: &[&[i64]]) -> usize {
    let mut m: Vec<Vec<Rational>> = rows
        .iter()
        .map(|r| r.as_slice())
        .chain(extra.iter().copied())
        .map(|r| r.iter().map(|&x| Rational::from_integer(BigInt::from(x))).collect())
        .collect();
    let cols = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..m.len()).find(|&r| !m[r][c].is_zero()) else { continue };
        m.swap(rank, p);
        for r in 0..m.len() {
            if r != rank && !m[r][c].is_zero() {
                let f = &m[r][c] / &m[rank][c];
                for k in c..cols {
                    let v = &m[rank][k] * &f;
                    m[r][k] -= v;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Result of replaying a corner plus crossing sequence.
pub(crate) struct Replay {
    pub holonomy: ExactVector,
    pub raw_class: Vec<i64>,
    pub end_corner: Slot,
}

/// Develops the path given by a start corner and crossings, returning its
/// holonomy, an edge path class and the end corner.
pub(crate) fn replay(s: &TranslationSurface, start: Slot, crossings: &[Slot]) -> Result<Replay> {
    let mut class = vec![0i64; s.num_edges()];
    let mut add = |slot: Slot| {
        let (idx, sign) = s.edge_index(slot);
        class[idx] += sign;
    };
    add(start);
    if crossings.is_empty() {
        return Ok(Replay { holonomy: s.edge(start).clone(), raw_class: class, end_corner: s.partner(start) });
    }
    if crossings[0] != start.next() {
        return Err(Error::ConnectionMismatch(format!("first crossing {} does not face corner {start}", crossings[0])));
    }
    let tri = &s.triangles()[start.tri];
    let mut offset = -&tri.corner(start.edge);
    let mut cur = start.tri;
    for (k, &cs) in crossings.iter().enumerate() {
        if cs.tri != cur {
            return Err(Error::ConnectionMismatch(format!("crossing {cs} is not in triangle {cur}")));
        }
        let here = &s.triangles()[cur];
        let end_pt = &offset + &here.corner(cs.edge + 1);
        let p = s.partner(cs);
        let there = &s.triangles()[p.tri];
        offset = &end_pt - &there.corner(p.edge);
        cur = p.tri;
        let a_to_c = Slot::new(p.tri, (p.edge + 1) % 3);
        match crossings.get(k + 1) {
            Some(&next) if next == a_to_c => {}
            Some(&next) if next == Slot::new(p.tri, (p.edge + 2) % 3) => add(a_to_c),
            Some(&next) => {
                return Err(Error::ConnectionMismatch(format!("crossing {next} does not leave triangle {}", p.tri)))
            }
            None => {
                add(a_to_c);
                let c = Slot::new(p.tri, (p.edge + 2) % 3);
                let holonomy = &offset + &there.corner(c.edge);
                return Ok(Replay { holonomy, raw_class: class, end_corner: c });
            }
        }
    }
    unreachable!("loop returns on the last crossing")
}

/// Builds a full connection record from a corner and crossings.
pub fn connection_from_path(
    s: &TranslationSurface,
    reducer: &HomologyReducer,
    start_corner: Slot,
    crossings: Vec<Slot>,
) -> Result<SaddleConnection> {
    let r = replay(s, start_corner, &crossings)?;
    Ok(SaddleConnection {
        holonomy: r.holonomy,
        start: s.vertex(start_corner),
        end: s.vertex(r.end_corner),
        start_corner,
        end_corner: r.end_corner,
        crossings,
        homology_class: reducer.reduce(&r.raw_class),
    })
}

/// The same segment traversed backwards.
pub fn reverse_connection(
    s: &TranslationSurface,
    reducer: &HomologyReducer,
    c: &SaddleConnection,
) -> Result<SaddleConnection> {
    let crossings: Vec<Slot> = c.crossings.iter().rev().map(|&x| s.partner(x)).collect();
    connection_from_path(s, reducer, c.end_corner, crossings)
}

/// Follows the straight segment of holonomy `v` from singularity `start` and
/// returns it as a connection. Fails when the segment meets a singularity
/// before its end, or ends at a regular point.
pub fn trace_connection(
    s: &TranslationSurface,
    reducer: &HomologyReducer,
    start: usize,
    v: &ExactVector,
) -> Result<SaddleConnection> {
    if v.is_zero() {
        return Err(Error::InvalidArgument("zero holonomy".into()));
    }
    let corner = start_corner(s, start, v)?;
    trace_from_corner(s, reducer, corner, v)
}

fn start_corner(s: &TranslationSurface, start: usize, v: &ExactVector) -> Result<Slot> {
    let sing = s
        .singularities()
        .get(start)
        .ok_or_else(|| Error::IndexOutOfRange(format!("singularity {start}")))?;
    sing
        .corners
        .iter()
        .copied()
        .find(|&c| {
            let lo = s.edge(c);
            let hi = -s.edge(c.prev());
            let a = lo.cross(v);
            (a.is_positive() || (a.is_zero() && lo.dot(v).is_positive())) && v.cross(&hi).is_positive()
        })
        .ok_or_else(|| Error::ConnectionMismatch(format!("no corner at {start} holds direction {v}")))
}

/// As [`trace_connection`], leaving from a given corner whose half-open
/// sector must hold the direction of `v`.
pub fn trace_from_corner(
    s: &TranslationSurface,
    reducer: &HomologyReducer,
    corner: Slot,
    v: &ExactVector,
) -> Result<SaddleConnection> {
    let crossings = crossings_from_corner(s, corner, v)?;
    connection_from_path(s, reducer, corner, crossings)
}

/// Start corner and crossed slots of the segment of holonomy `v` from
/// singularity `start`, without the homology bookkeeping.
pub fn trace_crossings(s: &TranslationSurface, start: usize, v: &ExactVector) -> Result<(Slot, Vec<Slot>)> {
    if v.is_zero() {
        return Err(Error::InvalidArgument("zero holonomy".into()));
    }
    let corner = start_corner(s, start, v)?;
    Ok((corner, crossings_from_corner(s, corner, v)?))
}

/// Corner at which a segment with crossings `crossings` from `corner` ends.
pub fn end_corner(s: &TranslationSurface, corner: Slot, crossings: &[Slot]) -> Slot {
    match crossings.last() {
        None => s.partner(corner),
        Some(&c) => {
            let p = s.partner(c);
            Slot::new(p.tri, (p.edge + 2) % 3)
        }
    }
}

fn crossings_from_corner(s: &TranslationSurface, corner: Slot, v: &ExactVector) -> Result<Vec<Slot>> {
    let lost = || Error::ConnectionMismatch(format!("segment {v} from corner {corner} is not a saddle connection"));
    let e = s.edge(corner);
    if e.cross(v).is_zero() {
        return if e.norm_sq() == v.norm_sq() { Ok(Vec::new()) } else { Err(lost()) };
    }
    let tri = &s.triangles()[corner.tri];
    let mut a = e.clone();
    let mut b = -&tri.edges[(corner.edge + 2) % 3];
    let mut cross = corner.next();
    let mut crossings = Vec::new();
    loop {
        if !(&b - &a).cross(&(v - &a)).is_negative() {
            return Err(lost());
        }
        crossings.push(cross);
        let p = s.partner(cross);
        let c = &a + s.edge(Slot::new(p.tri, (p.edge + 1) % 3));
        let side = v.cross(&c);
        if side.is_zero() {
            return if &c == v { Ok(crossings) } else { Err(lost()) };
        }
        if side.is_positive() {
            b = c;
            cross = Slot::new(p.tri, (p.edge + 1) % 3);
        } else {
            a = c;
            cross = Slot::new(p.tri, (p.edge + 2) % 3);
        }
    }
}

/// Directions strictly after `lo` (or from `lo` when inclusive) and strictly
/// before `hi`, spanning less than a half turn.
#[derive(Clone, Debug)]
struct Wedge {
    lo: ExactVector,
    lo_incl: bool,
    hi: ExactVector,
}

impl Wedge {
    fn contains(&self, d: &ExactVector) -> bool {
        let c = self.lo.cross(d);
        let after_lo = c.is_positive() || (self.lo_incl && c.is_zero() && self.lo.dot(d).is_positive());
        after_lo && d.cross(&self.hi).is_positive()
    }

    /// Open sector `(lo, hi)` intersected with the canonical half-plane.
    fn canonical(lo: &ExactVector, hi: &ExactVector) -> Option<Self> {
        let x_axis = ExactVector::from_ints(1, 0);
        let neg_x = ExactVector::from_ints(-1, 0);
        if lo.is_canonical_half() {
            let hi = if hi.is_canonical_half() && lo.cross(hi).is_positive() { hi.clone() } else { neg_x };
            Some(Wedge { lo: lo.clone(), lo_incl: false, hi })
        } else if hi.is_canonical_half() && hi.y.is_positive() {
            Some(Wedge { lo: x_axis, lo_incl: true, hi: hi.clone() })
        } else {
            None
        }
    }
}

struct State {
    cross: Slot,
    a: ExactVector,
    b: ExactVector,
    wedge: Wedge,
    parent: usize,
}

fn ray_hit(a: &ExactVector, b: &ExactVector, d: &ExactVector) -> ExactVector {
    let ab = b - a;
    let t = a.cross(d) / d.cross(&ab);
    a + &ab.scale(&t)
}

fn seg_dist_sq(p: &ExactVector, q: &ExactVector) -> Rational {
    let pq = q - p;
    if !p.dot(&pq).is_negative() {
        return p.norm_sq();
    }
    if !q.dot(&pq).is_positive() {
        return q.norm_sq();
    }
    let c = p.cross(q);
    &c * &c / pq.norm_sq()
}

/// Squared distance from the origin to the part of segment `ab` seen through the wedge.
fn clipped_dist_sq(a: &ExactVector, b: &ExactVector, w: &Wedge) -> Rational {
    let p = if a.cross(&w.lo).is_positive() { ray_hit(a, b, &w.lo) } else { a.clone() };
    let q = if w.hi.cross(b).is_positive() { ray_hit(a, b, &w.hi) } else { b.clone() };
    seg_dist_sq(&p, &q)
}

/// Connections starting at one corner, as (crossings, holonomy). Only the
/// canonical half of directions unless `full`.
fn search_corner(
    s: &TranslationSurface,
    corner: Slot,
    radius_sq: &Rational,
    budget: usize,
    full: bool,
) -> (Vec<(Vec<Slot>, ExactVector)>, usize) {
    let mut found = Vec::new();
    let tri = &s.triangles()[corner.tri];
    let e = &tri.edges[corner.edge];
    if (full || e.is_canonical_half()) && &e.norm_sq() <= radius_sq {
        found.push((Vec::new(), e.clone()));
    }
    let a = e.clone();
    let b = -&tri.edges[(corner.edge + 2) % 3];
    let w0 = if full { Some(Wedge { lo: a.clone(), lo_incl: false, hi: b.clone() }) } else { Wedge::canonical(&a, &b) };
    let Some(w0) = w0 else { return (found, 0) };

    let mut arena: Vec<(usize, Slot)> = Vec::new();
    let path = |arena: &Vec<(usize, Slot)>, mut idx: usize| {
        let mut out = Vec::new();
        while idx != usize::MAX {
            out.push(arena[idx].1);
            idx = arena[idx].0;
        }
        out.reverse();
        out
    };
    let mut stack = Vec::new();
    if &clipped_dist_sq(&a, &b, &w0) <= radius_sq {
        stack.push(State { cross: corner.next(), a, b, wedge: w0, parent: usize::MAX });
    }
    let mut states = 0usize;
    while let Some(st) = stack.pop() {
        states += 1;
        if states > budget {
            return (found, states);
        }
        arena.push((st.parent, st.cross));
        let me = arena.len() - 1;
        let p = s.partner(st.cross);
        let c = &st.a + s.edge(Slot::new(p.tri, (p.edge + 1) % 3));
        let via_ac = Slot::new(p.tri, (p.edge + 1) % 3);
        let via_cb = Slot::new(p.tri, (p.edge + 2) % 3);
        let push = |a: ExactVector, b: ExactVector, wedge: Wedge, cross: Slot, stack: &mut Vec<State>| {
            if &clipped_dist_sq(&a, &b, &wedge) <= radius_sq {
                stack.push(State { cross, a, b, wedge, parent: me });
            }
        };
        if st.wedge.contains(&c) {
            if &c.norm_sq() <= radius_sq {
                found.push((path(&arena, me), c.clone()));
            }
            let w1 = Wedge { lo: st.wedge.lo.clone(), lo_incl: st.wedge.lo_incl, hi: c.clone() };
            let w2 = Wedge { lo: c.clone(), lo_incl: false, hi: st.wedge.hi.clone() };
            push(c.clone(), st.b.clone(), w2, via_cb, &mut stack);
            push(st.a.clone(), c, w1, via_ac, &mut stack);
        } else if !c.cross(&st.wedge.hi).is_positive() {
            push(st.a, c, st.wedge, via_ac, &mut stack);
        } else {
            push(c, st.b, st.wedge, via_cb, &mut stack);
        }
    }
    (found, states)
}

/// All saddle connections with `|v|² <= radius_sq`, both orientations.
pub fn enumerate_sq(s: &TranslationSurface, radius_sq: &Rational, budget: usize) -> Result<HolonomySet> {
    if !radius_sq.is_positive() {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    let corners: Vec<Slot> = (0..s.num_triangles()).flat_map(|t| (0..3).map(move |e| Slot::new(t, e))).collect();
    let per_corner: Vec<(Slot, Vec<(Vec<Slot>, ExactVector)>, usize)> = corners
        .par_iter()
        .map(|&c| {
            let (f, n) = search_corner(s, c, radius_sq, budget, false);
            (c, f, n)
        })
        .collect();
    let states: usize = per_corner.iter().map(|x| x.2).sum();
    if states > budget {
        return Err(Error::ResourceLimit { states, limit: budget, radius_sq: format_rational(radius_sq) });
    }
    let reducer = HomologyReducer::new(s);
    let mut connections = Vec::new();
    for (corner, paths, _) in per_corner {
        for (crossings, _) in paths {
            let fwd = connection_from_path(s, &reducer, corner, crossings)?;
            let back = reverse_connection(s, &reducer, &fwd)?;
            connections.push(fwd);
            connections.push(back);
        }
    }
    connections.sort_by(|a, b| a.sort_key_cmp(b));
    Ok(HolonomySet { radius_sq: radius_sq.clone(), connections, states })
}

/// A connection leaving a singularity, without homology data.
#[derive(Clone, Debug)]
pub struct Departure {
    /// Corner whose half-open sector holds the direction.
    pub corner: Slot,
    /// Corner at the far end whose sector holds the reversed direction.
    pub end_corner: Slot,
    pub holonomy: ExactVector,
}

/// Every connection leaving `corner` inside its sector with `|v|² <= radius_sq`.
pub fn departures(s: &TranslationSurface, corner: Slot, radius_sq: &Rational, budget: usize) -> Result<Vec<Departure>> {
    let (found, states) = search_corner(s, corner, radius_sq, budget, true);
    if states > budget {
        return Err(Error::ResourceLimit { states, limit: budget, radius_sq: format_rational(radius_sq) });
    }
    Ok(found
        .into_iter()
        .map(|(crossings, holonomy)| {
            let end_corner = match crossings.last() {
                None => s.partner(corner),
                Some(&x) => {
                    let p = s.partner(x);
                    Slot::new(p.tri, (p.edge + 2) % 3)
                }
            };
            Departure { corner, end_corner, holonomy }
        })
        .collect())
}

pub fn enumerate(s: &TranslationSurface, radius: &Rational, budget: usize) -> Result<HolonomySet> {
    enumerate_sq(s, &(radius * radius), budget)
}

/// `N(ω, R)`.
pub fn count(s: &TranslationSurface, radius: &Rational, budget: usize) -> Result<usize> {
    Ok(enumerate(s, radius, budget)?.len())
}

fn lex_min(cs: impl Iterator<Item = SaddleConnection>) -> Option<SaddleConnection> {
    cs.min_by(|a, b| {
        a.len_sq()
            .cmp(&b.len_sq())
            .then_with(|| a.holonomy.x.cmp(&b.holonomy.x))
            .then_with(|| a.holonomy.y.cmp(&b.holonomy.y))
            .then_with(|| a.sort_key_cmp(b))
    })
}

/// A connection of minimal length, ties broken by `(|v|², x, y)`.
///
/// Every triangulation edge is a saddle connection, so searching up to the
/// shortest edge suffices.
pub fn shortest(s: &TranslationSurface, budget: usize) -> Result<SaddleConnection> {
    let set = enumerate_sq(s, &s.min_edge_len_sq(), budget)?;
    Ok(lex_min(set.connections.into_iter()).expect("shortest edge is itself a connection"))
}

/// How "nonhomologous" is read.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum Nonhomologous {
    /// Class differs from `±[γ]`.
    #[default]
    NotPlusMinus,
    /// Class is not a rational multiple of `[γ]`.
    NotProportional,
}

/// Shortest connection not homologous to `shortest(s)` in the chosen sense.
pub fn second_shortest_nonhomologous(
    s: &TranslationSurface,
    mode: Nonhomologous,
    budget: usize,
) -> Result<SaddleConnection> {
    let gamma = shortest(s, budget)?;
    let reducer = HomologyReducer::new(s);
    let plus = gamma.homology_class.clone();
    let minus = reducer.negate(&plus);
    let accept = |class: &[i64]| match mode {
        Nonhomologous::NotPlusMinus => class != plus.as_slice() && class != minus.as_slice(),
        Nonhomologous::NotProportional => reducer.independent(&plus, class),
    };
    // some edge qualifies because the edges span a rank >= 2 lattice
    let mut bound: Option<Rational> = None;
    for t in 0..s.num_triangles() {
        for e in 0..3 {
            let slot = Slot::new(t, e);
            let (idx, sign) = s.edge_index(slot);
            let mut raw = vec![0i64; s.num_edges()];
            raw[idx] = sign;
            if accept(&reducer.reduce(&raw)) {
                let l = s.edge(slot).norm_sq();
                if bound.as_ref().is_none_or(|b| &l < b) {
                    bound = Some(l);
                }
            }
        }
    }
    let bound = bound.ok_or_else(|| Error::Degenerate("no edge outside the class of the shortest connection".into()))?;
    let set = enumerate_sq(s, &bound, budget)?;
    lex_min(set.connections.into_iter().filter(|c| accept(&c.homology_class)))
        .ok_or_else(|| Error::Degenerate("nonhomologous edge not found by enumeration".into()))
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct Cylinder {
    pub side: Side,
    /// Holonomy of the core curve.
    pub period: ExactVector,
    #[serde(with = "crate::exactplane::rational_str")]
    pub width_sq: Rational,
    #[serde(with = "crate::exactplane::rational_str")]
    pub height_sq: Rational,
    /// Slots crossed by one core curve.
    pub crossed: Vec<Slot>,
}

impl Cylinder {
    pub fn width(&self) -> f64 {
        crate::exactplane::to_f64(&self.width_sq).sqrt()
    }

    pub fn height(&self) -> f64 {
        crate::exactplane::to_f64(&self.height_sq).sqrt()
    }

    /// Squared modulus height/width.
    pub fn modulus_sq(&self) -> Rational {
        &self.height_sq / &self.width_sq
    }
}

#[derive(Clone, PartialEq, Debug, Serialize)]
pub enum CylinderResult {
    Cylinder(Cylinder),
    NotOnBoundary,
    Unknown,
}

/// Traces the leaf infinitesimally to one side of `γ` until it closes up.
fn trace_side(s: &TranslationSurface, gamma: &SaddleConnection, side: Side, max_trace: &Rational) -> Option<Cylinder> {
    let u = &gamma.holonomy;
    let on_far_side = |p: &ExactVector| -> bool {
        let c = u.cross(p);
        match side {
            Side::Left => c.is_positive(),
            Side::Right => !c.is_negative(),
        }
    };
    let (corner, entry) = match side {
        Side::Left => (gamma.start_corner, gamma.start_corner.prev()),
        Side::Right => {
            let c = if s.edge(gamma.start_corner).cross(u).is_zero() {
                s.prev_corner_ccw(gamma.start_corner)
            } else {
                gamma.start_corner
            };
            (c, c)
        }
    };
    let limit = max_trace * max_trace * u.norm_sq();
    let tris = s.triangles();
    let start_offset = -&tris[corner.tri].corner(corner.edge);
    let mut offset = start_offset.clone();
    let mut cur = entry;
    let mut best: Option<Rational> = None;
    let mut crossed = Vec::new();
    loop {
        let tri = &tris[cur.tri];
        let pts: Vec<ExactVector> = (0..3).map(|k| &offset + &tri.corner(k)).collect();
        for p in &pts {
            let d = u.dot(p);
            if d.is_positive() && &d * &d > limit {
                return None;
            }
            let c = u.cross(p);
            let h = match side {
                Side::Left if c.is_positive() => Some(c),
                Side::Right if c.is_negative() => Some(-c),
                _ => None,
            };
            if let Some(h) = h {
                if best.as_ref().is_none_or(|b| &h < b) {
                    best = Some(h);
                }
            }
        }
        let i0 = cur.edge;
        let i1 = (cur.edge + 1) % 3;
        let apex = (cur.edge + 2) % 3;
        // the entry edge runs from corner i0 to i1 and separates the two sides
        let apex_far = on_far_side(&pts[apex]);
        let exit_edge = if apex_far == on_far_side(&pts[i0]) { i1 } else { apex };
        let exit = Slot::new(cur.tri, exit_edge);
        crossed.push(exit);
        let end_pt = &offset + &tri.corner(exit_edge + 1);
        let p = s.partner(exit);
        offset = &end_pt - &tris[p.tri].corner(p.edge);
        cur = p;
        if cur == entry {
            let w = &offset - &start_offset;
            if u.cross(&w).is_zero() {
                let h = best?;
                let un = u.norm_sq();
                return Some(Cylinder {
                    side,
                    width_sq: w.norm_sq(),
                    height_sq: &h * &h / un,
                    period: w,
                    crossed,
                });
            }
        }
    }
}

/// A maximal cylinder with `γ` on its boundary, looked for first on the left
/// of `γ` and then on the right.
pub fn detect_cylinder(s: &TranslationSurface, gamma: &SaddleConnection, max_trace: &Rational) -> CylinderResult {
    for side in [Side::Left, Side::Right] {
        if let Some(c) = trace_side(s, gamma, side, max_trace) {
            return CylinderResult::Cylinder(c);
        }
    }
    CylinderResult::Unknown
}
