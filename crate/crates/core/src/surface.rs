//! Translation surfaces as triangulations glued by translations.
//!
//! A surface is a list of triangles, each given by three edge vectors in
//! counterclockwise order, and an involution on edge slots pairing edges that
//! carry opposite vectors. Corner `i` of a triangle is the start of edge `i`,
//! so the developed vertices of a triangle are `0`, `e0`, `e0 + e1`.
//!
//! [`RawSurface`] is the unchecked, serialisable form. [`TranslationSurface`]
//! can only be obtained through validation, so every value of that type
//! satisfies the invariants.

use std::fmt;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactplane::{int, ExactMatrix, ExactVector, LinearAction, Rational};

/// An edge slot: triangle index plus edge index in `0..3`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Slot {
    pub tri: usize,
    pub edge: usize,
}

impl Slot {
    pub fn new(tri: usize, edge: usize) -> Self {
        Self { tri, edge }
    }

    pub fn next(self) -> Self {
        Self::new(self.tri, (self.edge + 1) % 3)
    }

    pub fn prev(self) -> Self {
        Self::new(self.tri, (self.edge + 2) % 3)
    }
}

impl From<[usize; 2]> for Slot {
    fn from(a: [usize; 2]) -> Self {
        Slot::new(a[0], a[1])
    }
}

impl From<Slot> for [usize; 2] {
    fn from(s: Slot) -> Self {
        [s.tri, s.edge]
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.tri, self.edge)
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Triangle {
    pub edges: [ExactVector; 3],
}

impl Triangle {
    pub fn new(e0: ExactVector, e1: ExactVector, e2: ExactVector) -> Self {
        Self { edges: [e0, e1, e2] }
    }

    /// Twice the signed area.
    pub fn double_area(&self) -> Rational {
        self.edges[0].cross(&self.edges[1])
    }

    /// Developed position of corner `i` when corner 0 sits at the origin.
    pub fn corner(&self, i: usize) -> ExactVector {
        match i % 3 {
            0 => ExactVector::zero(),
            1 => self.edges[0].clone(),
            _ => &self.edges[0] + &self.edges[1],
        }
    }
}

/// Unchecked surface description; the JSON surface file format.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct RawSurface {
    pub triangles: Vec<Triangle>,
    pub gluings: Vec<[Slot; 2]>,
}

impl RawSurface {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Sorted gluings with the smaller slot first in each pair.
    pub fn canonicalize(&mut self) {
        for pair in &mut self.gluings {
            if pair[1] < pair[0] {
                pair.swap(0, 1);
            }
        }
        self.gluings.sort();
    }

    pub fn to_json(&self) -> String {
        let mut c = self.clone();
        c.canonicalize();
        serde_json::to_string(&c).expect("surface serialisation cannot fail")
    }
}

/// Zero orders, genus and dimension of relative homology.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct StratumSignature {
    /// Zero orders in nonincreasing order; marked points appear as 0.
    pub zero_orders: Vec<u32>,
    pub genus: u32,
    /// `2g + |Σ| - 1`.
    pub dim_relative_homology: u32,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct Singularity {
    pub id: usize,
    /// Cone angle divided by 2π.
    pub angle_multiple: u32,
    /// Corners at this point, in counterclockwise order.
    pub corners: Vec<Slot>,
}

impl Singularity {
    pub fn order(&self) -> u32 {
        self.angle_multiple - 1
    }
}

/// A validated translation surface.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TranslationSurface {
    triangles: Vec<Triangle>,
    partner: Vec<[Slot; 3]>,
    vertex: Vec<[usize; 3]>,
    singularities: Vec<Singularity>,
    signature: StratumSignature,
    edge_index: Vec<[(usize, i64); 3]>,
    num_edges: usize,
}

/// Checks every invariant of a translation surface and returns its stratum
/// signature.
pub fn validate(raw: &RawSurface) -> Result<StratumSignature> {
    TranslationSurface::from_raw(raw).map(|s| s.signature)
}

impl TranslationSurface {
    pub fn from_raw(raw: &RawSurface) -> Result<Self> {
        let n = raw.triangles.len();
        if n == 0 {
            return Err(Error::IndexOutOfRange("surface has no triangles".into()));
        }
        let mut partner: Vec<[Option<Slot>; 3]> = vec![[None; 3]; n];
        for pair in &raw.gluings {
            for s in pair {
                if s.tri >= n || s.edge >= 3 {
                    return Err(Error::IndexOutOfRange(format!("slot {s} with {n} triangles")));
                }
            }
        }
        for (t, tri) in raw.triangles.iter().enumerate() {
            let sum = &(&tri.edges[0] + &tri.edges[1]) + &tri.edges[2];
            if !sum.is_zero() {
                return Err(Error::EdgeSum { triangle: t });
            }
            if !tri.double_area().is_positive() {
                return Err(Error::NonPositiveArea { triangle: t });
            }
        }
        for &[a, b] in &raw.gluings {
            if a == b {
                return Err(Error::GluingNotInvolutive { slot: a });
            }
            for (s, o) in [(a, b), (b, a)] {
                if partner[s.tri][s.edge].is_some() {
                    return Err(Error::GluingNotInvolutive { slot: s });
                }
                partner[s.tri][s.edge] = Some(o);
            }
        }
        let mut full = Vec::with_capacity(n);
        for (t, row) in partner.iter().enumerate() {
            let mut out = [Slot::new(0, 0); 3];
            for e in 0..3 {
                out[e] = row[e].ok_or(Error::GluingNotInvolutive { slot: Slot::new(t, e) })?;
            }
            full.push(out);
        }
        for &[a, b] in &raw.gluings {
            let va = &raw.triangles[a.tri].edges[a.edge];
            let vb = &raw.triangles[b.tri].edges[b.edge];
            if !(va + vb).is_zero() {
                return Err(Error::GluingNotOpposite { a, b });
            }
        }
        Self::assemble(raw.triangles.clone(), full)
    }

    fn assemble(triangles: Vec<Triangle>, partner: Vec<[Slot; 3]>) -> Result<Self> {
        let n = triangles.len();
        // connectivity
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(t) = stack.pop() {
            for p in &partner[t] {
                if !seen[p.tri] {
                    seen[p.tri] = true;
                    stack.push(p.tri);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidArgument("surface is not connected".into()));
        }

        // Walk corners counterclockwise around each vertex. Corner (t, i) is
        // followed by the corner across edge i-1.
        let mut vertex = vec![[usize::MAX; 3]; n];
        let mut singularities = Vec::new();
        for t in 0..n {
            for i in 0..3 {
                if vertex[t][i] != usize::MAX {
                    continue;
                }
                let id = singularities.len();
                let start = Slot::new(t, i);
                let mut corners = Vec::new();
                let mut winding = 0u32;
                let mut c = start;
                loop {
                    if vertex[c.tri][c.edge] != usize::MAX {
                        return Err(Error::ConeAngle { vertex: id });
                    }
                    vertex[c.tri][c.edge] = id;
                    corners.push(c);
                    let tri = &triangles[c.tri];
                    let out_dir = &tri.edges[c.edge];
                    let in_dir = -&tri.edges[(c.edge + 2) % 3];
                    if crosses_positive_axis(out_dir, &in_dir) {
                        winding += 1;
                    }
                    let next = partner[c.tri][(c.edge + 2) % 3];
                    c = next;
                    if c == start {
                        break;
                    }
                }
                if winding == 0 {
                    return Err(Error::ConeAngle { vertex: id });
                }
                singularities.push(Singularity { id, angle_multiple: winding, corners });
            }
        }

        let v = singularities.len() as i64;
        let f = n as i64;
        if (3 * f) % 2 != 0 {
            return Err(Error::GluingNotInvolutive { slot: Slot::new(0, 0) });
        }
        let e = 3 * f / 2;
        let chi = v - e + f;
        if chi > 2 || (2 - chi) % 2 != 0 {
            return Err(Error::ConeAngle { vertex: 0 });
        }
        let genus = ((2 - chi) / 2) as u32;
        let order_sum: i64 = singularities.iter().map(|s| s.order() as i64).sum();
        if order_sum != 2 * genus as i64 - 2 {
            return Err(Error::ConeAngle { vertex: 0 });
        }
        let mut zero_orders: Vec<u32> = singularities.iter().map(|s| s.order()).collect();
        zero_orders.sort_unstable_by(|a, b| b.cmp(a));
        let signature = StratumSignature {
            zero_orders,
            genus,
            dim_relative_homology: 2 * genus + singularities.len() as u32 - 1,
        };

        let mut edge_index = vec![[(0usize, 0i64); 3]; n];
        let mut num_edges = 0;
        for t in 0..n {
            for i in 0..3 {
                let s = Slot::new(t, i);
                let p = partner[t][i];
                if s < p {
                    edge_index[t][i] = (num_edges, 1);
                    edge_index[p.tri][p.edge] = (num_edges, -1);
                    num_edges += 1;
                }
            }
        }

        Ok(Self { triangles, partner, vertex, singularities, signature, edge_index, num_edges })
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn edge(&self, s: Slot) -> &ExactVector {
        &self.triangles[s.tri].edges[s.edge]
    }

    pub fn partner(&self, s: Slot) -> Slot {
        self.partner[s.tri][s.edge]
    }

    /// Singularity id at corner `c` (the start of edge `c`).
    pub fn vertex(&self, c: Slot) -> usize {
        self.vertex[c.tri][c.edge]
    }

    pub fn singularities(&self) -> &[Singularity] {
        &self.singularities
    }

    pub fn signature(&self) -> &StratumSignature {
        &self.signature
    }

    /// Basis index and sign of the oriented edge in slot `s`.
    pub fn edge_index(&self, s: Slot) -> (usize, i64) {
        self.edge_index[s.tri][s.edge]
    }

    /// Corner following `c` counterclockwise around its vertex.
    pub fn next_corner_ccw(&self, c: Slot) -> Slot {
        self.partner(c.prev())
    }

    /// Corner preceding `c` counterclockwise around its vertex.
    pub fn prev_corner_ccw(&self, c: Slot) -> Slot {
        self.partner(c).next()
    }

    /// Exact area.
    pub fn area(&self) -> Rational {
        let twice: Rational = self.triangles.iter().map(|t| t.double_area()).sum();
        twice / int(2)
    }

    pub fn min_edge_len_sq(&self) -> Rational {
        self.triangles
            .iter()
            .flat_map(|t| t.edges.iter())
            .map(|e| e.norm_sq())
            .min()
            .expect("surface has edges")
    }

    pub fn max_edge_len_sq(&self) -> Rational {
        self.triangles
            .iter()
            .flat_map(|t| t.edges.iter())
            .map(|e| e.norm_sq())
            .max()
            .expect("surface has edges")
    }

    pub fn to_raw(&self) -> RawSurface {
        let mut gluings = Vec::new();
        for t in 0..self.triangles.len() {
            for e in 0..3 {
                let s = Slot::new(t, e);
                let p = self.partner(s);
                if s < p {
                    gluings.push([s, p]);
                }
            }
        }
        RawSurface { triangles: self.triangles.clone(), gluings }
    }

    pub fn to_json(&self) -> String {
        self.to_raw().to_json()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_raw(&RawSurface::from_json(text)?)
    }

    /// Rebuilds a surface from triangles and a full partner table.
    pub(crate) fn from_parts(triangles: Vec<Triangle>, partner: Vec<[Slot; 3]>) -> Result<Self> {
        let mut gluings = Vec::new();
        for (t, row) in partner.iter().enumerate() {
            for (e, p) in row.iter().enumerate() {
                let s = Slot::new(t, e);
                if s < *p {
                    gluings.push([s, *p]);
                } else if s == *p {
                    return Err(Error::GluingNotInvolutive { slot: s });
                }
            }
        }
        Self::from_raw(&RawSurface { triangles, gluings })
    }
}

/// Whether the counterclockwise turn from `u` to `w` (less than a half turn)
/// passes the direction `(1, 0)`, counting the endpoint `w` but not `u`.
fn crosses_positive_axis(u: &ExactVector, w: &ExactVector) -> bool {
    u.y.is_negative() && !w.y.is_negative()
}

/// Exact area of a valid surface.
pub fn area(s: &TranslationSurface) -> Rational {
    s.area()
}

/// Image of `s` under `m`. Gluing combinatorics are unchanged when
/// `det m > 0`; an orientation-reversing `m` also reverses every triangle's
/// edge order so the result stays counterclockwise.
pub fn apply_surface(m: &ExactMatrix, s: &TranslationSurface) -> Result<TranslationSurface> {
    let det = m.det();
    if det.is_zero() {
        return Err(Error::SingularMatrix);
    }
    if det.is_positive() {
        let triangles = s
            .triangles
            .iter()
            .map(|t| Triangle { edges: [m.apply(&t.edges[0]), m.apply(&t.edges[1]), m.apply(&t.edges[2])] })
            .collect();
        return TranslationSurface::from_parts(triangles, s.partner.clone());
    }
    // new edge k is the reverse of old edge 2 - k
    let triangles = s
        .triangles
        .iter()
        .map(|t| Triangle {
            edges: [-&m.apply(&t.edges[2]), -&m.apply(&t.edges[1]), -&m.apply(&t.edges[0])],
        })
        .collect();
    let partner = s
        .partner
        .iter()
        .map(|row| {
            let mut out = [Slot::new(0, 0); 3];
            for k in 0..3 {
                let p = row[2 - k];
                out[k] = Slot::new(p.tri, 2 - p.edge);
            }
            out
        })
        .collect();
    TranslationSurface::from_parts(triangles, partner)
}

/// Closed polygons glued along sides; ear-clipped into a [`TranslationSurface`].
#[derive(Clone, Debug)]
pub struct PolygonGluing {
    /// Side vectors of each polygon in counterclockwise order.
    pub polygons: Vec<Vec<ExactVector>>,
    /// Pairs of `(polygon, side)` glued by translation.
    pub gluings: Vec<[(usize, usize); 2]>,
}

#[derive(Clone, Copy, Debug)]
enum SideLabel {
    Original(usize, usize),
    Diagonal(Slot),
}

impl PolygonGluing {
    pub fn triangulate(&self) -> Result<TranslationSurface> {
        let mut triangles: Vec<Triangle> = Vec::new();
        let mut side_slot: Vec<Vec<Option<Slot>>> =
            self.polygons.iter().map(|p| vec![None; p.len()]).collect();
        let mut inner: Vec<[Slot; 2]> = Vec::new();

        for (pi, sides) in self.polygons.iter().enumerate() {
            if sides.len() < 3 {
                return Err(Error::Degenerate(format!("polygon {pi} has fewer than 3 sides")));
            }
            let mut pos = vec![ExactVector::zero()];
            for s in &sides[..sides.len() - 1] {
                let last = pos.last().unwrap().clone();
                pos.push(&last + s);
            }
            let closing = &(pos.last().unwrap() + sides.last().unwrap());
            if !closing.is_zero() {
                return Err(Error::EdgeSum { triangle: pi });
            }
            let mut ring: Vec<(usize, SideLabel)> =
                (0..sides.len()).map(|k| (k, SideLabel::Original(pi, k))).collect();
            while ring.len() > 3 {
                let m = ring.len();
                let ear = (0..m).find(|&k| {
                    let a = &pos[ring[(k + m - 1) % m].0];
                    let b = &pos[ring[k].0];
                    let c = &pos[ring[(k + 1) % m].0];
                    if !(b - a).cross(&(c - b)).is_positive() {
                        return false;
                    }
                    ring.iter().all(|(v, _)| {
                        let p = &pos[*v];
                        p == a || p == b || p == c || !in_closed_triangle(p, a, b, c)
                    })
                });
                let k = ear.ok_or_else(|| Error::Degenerate(format!("polygon {pi} has no ear")))?;
                let (ia, la) = ring[(k + m - 1) % m];
                let (ib, lb) = ring[k];
                let (ic, _) = ring[(k + 1) % m];
                let t = triangles.len();
                triangles.push(Triangle::new(&pos[ib] - &pos[ia], &pos[ic] - &pos[ib], &pos[ia] - &pos[ic]));
                for (e, label) in [(0, la), (1, lb)] {
                    record(label, Slot::new(t, e), &mut side_slot, &mut inner);
                }
                ring[(k + m - 1) % m] = (ia, SideLabel::Diagonal(Slot::new(t, 2)));
                ring.remove(k);
            }
            let t = triangles.len();
            let (ia, la) = ring[0];
            let (ib, lb) = ring[1];
            let (ic, lc) = ring[2];
            let tri = Triangle::new(&pos[ib] - &pos[ia], &pos[ic] - &pos[ib], &pos[ia] - &pos[ic]);
            if !tri.double_area().is_positive() {
                return Err(Error::Degenerate(format!("polygon {pi} is not counterclockwise")));
            }
            triangles.push(tri);
            for (e, label) in [(0, la), (1, lb), (2, lc)] {
                record(label, Slot::new(t, e), &mut side_slot, &mut inner);
            }
        }

        let mut gluings = inner;
        for &[(p1, s1), (p2, s2)] in &self.gluings {
            let get = |p: usize, s: usize| -> Result<Slot> {
                side_slot
                    .get(p)
                    .and_then(|v| v.get(s).copied().flatten())
                    .ok_or_else(|| Error::IndexOutOfRange(format!("polygon side ({p},{s})")))
            };
            gluings.push([get(p1, s1)?, get(p2, s2)?]);
        }
        TranslationSurface::from_raw(&RawSurface { triangles, gluings })
    }
}

fn record(label: SideLabel, slot: Slot, side_slot: &mut [Vec<Option<Slot>>], inner: &mut Vec<[Slot; 2]>) {
    match label {
        SideLabel::Original(p, s) => side_slot[p][s] = Some(slot),
        SideLabel::Diagonal(other) => inner.push([other, slot]),
    }
}

fn in_closed_triangle(p: &ExactVector, a: &ExactVector, b: &ExactVector, c: &ExactVector) -> bool {
    let d1 = (b - a).cross(&(p - a));
    let d2 = (c - b).cross(&(p - b));
    let d3 = (a - c).cross(&(p - c));
    !d1.is_negative() && !d2.is_negative() && !d3.is_negative()
}

/// Ready-made surfaces used throughout tests, examples and the samplers.
pub mod models {
    use super::*;
    use crate::exactplane::rat;

    /// Torus `R² / (b1 ℤ + b2 ℤ)` with one marked point, cut along `b1 + b2`.
    pub fn lattice_torus(b1: &ExactVector, b2: &ExactVector) -> Result<TranslationSurface> {
        let (b1, b2) = if b1.cross(b2).is_positive() { (b1.clone(), b2.clone()) } else { (b2.clone(), b1.clone()) };
        let d = &b1 + &b2;
        let raw = RawSurface {
            triangles: vec![
                Triangle::new(b1.clone(), b2.clone(), -&d),
                Triangle::new(-&b1, -&b2, d),
            ],
            gluings: vec![
                [Slot::new(0, 0), Slot::new(1, 0)],
                [Slot::new(0, 1), Slot::new(1, 1)],
                [Slot::new(0, 2), Slot::new(1, 2)],
            ],
        };
        TranslationSurface::from_raw(&raw)
    }

    /// Unit square torus with one marked point.
    pub fn square_torus() -> TranslationSurface {
        lattice_torus(&ExactVector::from_ints(1, 0), &ExactVector::from_ints(0, 1)).expect("square torus is valid")
    }

    /// Torus `g ℤ²` for `det g > 0`.
    pub fn matrix_torus(g: &ExactMatrix) -> Result<TranslationSurface> {
        apply_surface(g, &square_torus())
    }

    fn fan_square(q: &ExactVector) -> Result<Vec<Triangle>> {
        let zero = rat(0, 1);
        let one = rat(1, 1);
        if !(q.x > zero && q.x < one && q.y > zero && q.y < one) {
            return Err(Error::InvalidArgument(format!(
                "marked point {q} must lie strictly inside the unit square in lattice coordinates"
            )));
        }
        let corners = [
            ExactVector::from_ints(0, 0),
            ExactVector::from_ints(1, 0),
            ExactVector::from_ints(1, 1),
            ExactVector::from_ints(0, 1),
        ];
        Ok((0..4)
            .map(|k| {
                let a = &corners[k];
                let b = &corners[(k + 1) % 4];
                Triangle::new(b - a, q - b, a - q)
            })
            .collect())
    }

    fn sheet_gluings(offset: usize) -> Vec<[Slot; 2]> {
        let s = |t: usize, e: usize| Slot::new(offset + t, e);
        vec![[s(0, 0), s(2, 0)], [s(1, 0), s(3, 0)], [s(0, 1), s(1, 2)], [s(1, 1), s(2, 2)], [s(2, 1), s(3, 2)]]
    }

    /// Lattice coordinates of `v` reduced into `[0, 1)²`.
    fn reduce(g: &ExactMatrix, v: &ExactVector) -> Result<ExactVector> {
        let w = g.inverse()?.apply(v);
        let frac = |q: &Rational| q - q.floor();
        Ok(ExactVector::new(frac(&w.x), frac(&w.y)))
    }

    /// Torus `g ℤ²` with a second marked point at `v` (stratum H(0,0)).
    pub fn two_point_torus(g: &ExactMatrix, v: &ExactVector) -> Result<TranslationSurface> {
        let q = reduce(g, v)?;
        let tris = fan_square(&q)?;
        let mut gluings = sheet_gluings(0);
        gluings.push([Slot::new(3, 1), Slot::new(0, 2)]);
        let raw = RawSurface { triangles: tris, gluings };
        apply_surface(g, &TranslationSurface::from_raw(&raw)?)
    }

    /// Two copies of the torus `g ℤ²` glued crosswise along a slit from the
    /// origin to `v` (stratum H(1,1)). The slit is taken inside the unit
    /// lattice cell, which fixes the cover representative.
    pub fn slit_torus(g: &ExactMatrix, v: &ExactVector) -> Result<TranslationSurface> {
        let q = reduce(g, v)?;
        let mut tris = fan_square(&q)?;
        tris.extend(fan_square(&q)?);
        let mut gluings = sheet_gluings(0);
        gluings.extend(sheet_gluings(4));
        gluings.push([Slot::new(3, 1), Slot::new(4, 2)]);
        gluings.push([Slot::new(7, 1), Slot::new(0, 2)]);
        let raw = RawSurface { triangles: tris, gluings };
        apply_surface(g, &TranslationSurface::from_raw(&raw)?)
    }

    /// Rational octagon with sides (1,0), (1,1), (0,1), (-1,1), ... and
    /// opposite sides identified; one cone point of angle 6π (stratum H(2)).
    pub fn octagon() -> TranslationSurface {
        let dirs = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];
        let sides: Vec<ExactVector> = dirs.iter().map(|&(x, y)| ExactVector::from_ints(x, y)).collect();
        PolygonGluing {
            polygons: vec![sides],
            gluings: (0..4).map(|k| [(0, k), (0, k + 4)]).collect(),
        }
        .triangulate()
        .expect("octagon is valid")
    }
}
