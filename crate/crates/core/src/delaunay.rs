//! L¹ Delaunay triangulations by edge flips, with exact circumscribing
//! diamonds.
//!
//! Flips run in a working frame `M = [[1, α], [-α, 1]]` with `α = 1/7919`, a
//! scaled rotation. It breaks the many slope ±1 ties that lattice surfaces
//! produce; Euclidean length ratios and the shortest connection are unchanged
//! by it. Certificates are reported in the working frame.
//!
//! L¹ flips can stall with some edge still failing its diamond test. The
//! triangulation is then rebuilt by gift-wrapping: starting from the
//! L¹-shortest connection, each edge gets as apex the first vertex taken in by
//! the growing family of diamonds through its endpoints.

use std::collections::{HashMap, HashSet, VecDeque};

use num_traits::{Signed, Zero};
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::geodesic::{departures, Departure};
use crate::exactplane::{format_rational, rat, to_f64, ExactMatrix, ExactVector, Rational};
use crate::surface::{apply_surface, RawSurface, Slot, Triangle, TranslationSurface};

pub const DEFAULT_MAX_FLIPS: usize = 200_000;

/// Working frame for all diamond predicates.
pub fn working_frame() -> ExactMatrix {
    let a = rat(1, 7919);
    ExactMatrix::new(rat(1, 1), a.clone(), -a, rat(1, 1))
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct DiamondCertificate {
    pub center: ExactVector,
    #[serde(with = "crate::exactplane::rational_str")]
    pub radius_l1: Rational,
}

impl DiamondCertificate {
    pub fn l1_dist(&self, p: &ExactVector) -> Rational {
        (p - &self.center).l1_norm()
    }

    pub fn strictly_contains(&self, p: &ExactVector) -> bool {
        self.l1_dist(p) < self.radius_l1
    }

    pub fn on_boundary(&self, p: &ExactVector) -> bool {
        self.l1_dist(p) == self.radius_l1
    }
}

/// Coordinates in which the L¹ norm becomes the maximum norm.
fn uv(p: &ExactVector) -> (Rational, Rational) {
    (&p.x + &p.y, &p.y - &p.x)
}

fn from_uv(u: &Rational, v: &Rational) -> ExactVector {
    let two = rat(2, 1);
    ExactVector::new((u - v) / &two, (u + v) / &two)
}

/// The diamond through three points, `None` when no diamond passes through
/// all of them.
fn circumscribe(p1: &ExactVector, p2: &ExactVector, p3: &ExactVector) -> Result<Option<DiamondCertificate>> {
    if (p2 - p1).cross(&(p3 - p1)).is_zero() {
        return Err(Error::Collinear);
    }
    let pts = [uv(p1), uv(p2), uv(p3)];
    let us: Vec<&Rational> = pts.iter().map(|p| &p.0).collect();
    let vs: Vec<&Rational> = pts.iter().map(|p| &p.1).collect();
    // in (u, v) the diamond is an axis-parallel square; its side is the
    // larger extent of the bounding box
    let square = |a: &[&Rational], b: &[&Rational]| -> Result<Option<(Rational, Rational, Rational)>> {
        let amin = *a.iter().min().unwrap();
        let amax = *a.iter().max().unwrap();
        let bmin = *b.iter().min().unwrap();
        let bmax = *b.iter().max().unwrap();
        let side = amax - amin;
        let at_min = a.iter().filter(|x| **x == amin).count();
        let at_max = a.iter().filter(|x| **x == amax).count();
        if at_min > 1 || at_max > 1 {
            return Err(Error::Degenerate("circumscribing diamond is not unique".into()));
        }
        let mid = (0..3).find(|&k| a[k] != amin && a[k] != amax).expect("three distinct extents");
        let low = if b[mid] == bmin {
            bmin.clone()
        } else if b[mid] == bmax {
            bmax - &side
        } else {
            return Ok(None);
        };
        let two = rat(2, 1);
        Ok(Some(((amin + amax) / &two, &low + &side / &two, side)))
    };
    let umin = *us.iter().min().unwrap();
    let umax = *us.iter().max().unwrap();
    let vmin = *vs.iter().min().unwrap();
    let vmax = *vs.iter().max().unwrap();
    let wu = umax - umin;
    let wv = vmax - vmin;
    let (cu, cv, side) = match wu.cmp(&wv) {
        std::cmp::Ordering::Equal => {
            let on = pts.iter().all(|(u, v)| u == umin || u == umax || v == vmin || v == vmax);
            if !on {
                return Ok(None);
            }
            let two = rat(2, 1);
            ((umin + umax) / &two, (vmin + vmax) / &two, wu)
        }
        std::cmp::Ordering::Greater => match square(&us, &vs)? {
            Some(x) => x,
            None => return Ok(None),
        },
        std::cmp::Ordering::Less => match square(&vs, &us)? {
            Some((cv, cu, side)) => (cu, cv, side),
            None => return Ok(None),
        },
    };
    Ok(Some(DiamondCertificate { center: from_uv(&cu, &cv), radius_l1: side / rat(2, 1) }))
}

/// The L¹ circle through three points.
///
/// Rotating by 45° turns diamonds into axis-parallel squares, and a square
/// through three points has the larger bounding-box extent as its side. The
/// point that is interior in the wide direction fixes the square in the
/// other one. Errors when no such diamond exists or it is not unique.
pub fn diamond_of(p1: &ExactVector, p2: &ExactVector, p3: &ExactVector) -> Result<DiamondCertificate> {
    circumscribe(p1, p2, p3)?.ok_or_else(|| Error::Degenerate("no diamond passes through the three points".into()))
}

/// True iff `q` is not strictly inside the diamond of triangle `p`.
pub fn is_locally_delaunay(p: &[ExactVector; 3], q: &ExactVector) -> Result<bool> {
    Ok(!diamond_of(&p[0], &p[1], &p[2])?.strictly_contains(q))
}

#[derive(Clone, Debug, Serialize)]
pub struct DelaunayTriangulation {
    /// The triangulation in the original coordinates.
    #[serde(skip)]
    pub surface: TranslationSurface,
    /// The same triangulation in the working frame.
    #[serde(skip)]
    pub working: TranslationSurface,
    pub frame: ExactMatrix,
    /// One diamond per triangle, in the working frame with the triangle's
    /// corner 0 at the origin.
    pub certificates: Vec<DiamondCertificate>,
    pub flip_count: usize,
}

impl DelaunayTriangulation {
    pub fn to_json(&self) -> serde_json::Value {
        let surface: serde_json::Value =
            serde_json::from_str(&self.surface.to_json()).expect("surface JSON is well formed");
        let certs: Vec<serde_json::Value> = self
            .certificates
            .iter()
            .enumerate()
            .map(|(t, c)| {
                json!({
                    "triangle": t,
                    "center": c.center.to_strings(),
                    "radius_l1": format_rational(&c.radius_l1),
                })
            })
            .collect();
        let f = &self.frame;
        json!({
            "triangles": surface["triangles"],
            "gluings": surface["gluings"],
            "certificates": certs,
            "frame": [format_rational(&f.a), format_rational(&f.b), format_rational(&f.c), format_rational(&f.d)],
            "flip_count": self.flip_count,
        })
    }
}

#[derive(PartialEq, Eq, Debug)]
enum EdgeState {
    Delaunay,
    Flip,
}

struct Mesh {
    tris: Vec<[ExactVector; 3]>,
    partner: Vec<[Slot; 3]>,
    /// Vertex of the input surface at each corner.
    labels: Vec<[usize; 3]>,
}

impl Mesh {
    fn partner(&self, s: Slot) -> Slot {
        self.partner[s.tri][s.edge]
    }

    fn edge(&self, s: Slot) -> &ExactVector {
        &self.tris[s.tri][s.edge]
    }

    /// Developed quad `P, Q, R, S` of the edge `s = P→Q`: `R` is the apex on
    /// the left, `S` the apex across.
    fn quad(&self, s: Slot) -> [ExactVector; 4] {
        let p = ExactVector::zero();
        let q = self.edge(s).clone();
        let r = &q + self.edge(s.next());
        let o = self.partner(s);
        let sv = self.edge(o.next()).clone();
        [p, q, r, sv]
    }

    fn state(&self, s: Slot) -> Result<EdgeState> {
        let o = self.partner(s);
        if o.tri == s.tri {
            return Ok(EdgeState::Delaunay);
        }
        let [p, q, r, sv] = self.quad(s);
        if !strictly_convex(&p, &sv, &q, &r) {
            return Ok(EdgeState::Delaunay);
        }
        let d1 = circumscribe(&p, &q, &r)?;
        let d2 = circumscribe(&q, &p, &sv)?;
        let current = empty(&d1, &sv) && empty(&d2, &r);
        let flipped = empty(&circumscribe(&p, &sv, &r)?, &q) && empty(&circumscribe(&sv, &q, &r)?, &p);
        let shorter = (&sv - &r).norm_sq() < q.norm_sq();
        if !current {
            return Ok(if flipped || shorter { EdgeState::Flip } else { EdgeState::Delaunay });
        }
        let cocircular = d1.as_ref().is_some_and(|d| d.on_boundary(&sv)) || d2.as_ref().is_some_and(|d| d.on_boundary(&r));
        Ok(if cocircular && flipped && shorter { EdgeState::Flip } else { EdgeState::Delaunay })
    }

    /// Replaces the diagonal `P→Q` by `S→R`. Returns the four outer slots.
    fn flip(&mut self, s: Slot) -> [Slot; 4] {
        let o = self.partner(s);
        let (t, u) = (s.tri, o.tri);
        let (i, j) = (s.edge, o.edge);
        let ps = self.tris[u][(j + 1) % 3].clone();
        let sq = self.tris[u][(j + 2) % 3].clone();
        let qr = self.tris[t][(i + 1) % 3].clone();
        let rp = self.tris[t][(i + 2) % 3].clone();
        let rs = &rp + &ps;
        let sr = -&rs;
        let lp = self.labels[t][i];
        let lq = self.labels[t][(i + 1) % 3];
        let lr = self.labels[t][(i + 2) % 3];
        let ls = self.labels[u][(j + 2) % 3];
        self.labels[t] = [lp, ls, lr];
        self.labels[u] = [ls, lq, lr];
        // old outer slot -> new slot
        let map = [
            (Slot::new(u, (j + 1) % 3), Slot::new(t, 0)),
            (Slot::new(t, (i + 2) % 3), Slot::new(t, 2)),
            (Slot::new(u, (j + 2) % 3), Slot::new(u, 0)),
            (Slot::new(t, (i + 1) % 3), Slot::new(u, 1)),
        ];
        let old: Vec<Slot> = map.iter().map(|(a, _)| self.partner(*a)).collect();
        let remap = |x: Slot| map.iter().find(|(a, _)| *a == x).map_or(x, |(_, b)| *b);
        self.tris[t] = [ps, sr, rp];
        self.tris[u] = [sq, qr, rs];
        self.partner[t][1] = Slot::new(u, 2);
        self.partner[u][2] = Slot::new(t, 1);
        for (k, (_, new)) in map.iter().enumerate() {
            let other = remap(old[k]);
            self.partner[new.tri][new.edge] = other;
            self.partner[other.tri][other.edge] = *new;
        }
        [map[0].1, map[1].1, map[2].1, map[3].1]
    }

    fn fingerprint(&self) -> Vec<ExactVector> {
        let mut v: Vec<ExactVector> = Vec::new();
        for (t, row) in self.tris.iter().enumerate() {
            for (e, vec) in row.iter().enumerate() {
                if Slot::new(t, e) < self.partner[t][e] {
                    v.push(if vec.is_canonical_half() { vec.clone() } else { -vec });
                }
            }
        }
        v.sort();
        v
    }
}

fn edge_hash(v: &ExactVector) -> u64 {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    if v.is_canonical_half() { v.hash(&mut h) } else { (-v).hash(&mut h) }
    h.finish()
}

fn empty(d: &Option<DiamondCertificate>, p: &ExactVector) -> bool {
    d.as_ref().is_some_and(|d| !d.strictly_contains(p))
}

fn strictly_convex(p: &ExactVector, s: &ExactVector, q: &ExactVector, r: &ExactVector) -> bool {
    let ring = [p, s, q, r];
    (0..4).all(|k| {
        let a = ring[k];
        let b = ring[(k + 1) % 4];
        let c = ring[(k + 2) % 4];
        (b - a).cross(&(c - b)).is_positive()
    })
}

impl Mesh {
    fn corners(&self, t: usize) -> [ExactVector; 3] {
        let e = &self.tris[t];
        [ExactVector::zero(), e[0].clone(), &e[0] + &e[1]]
    }

    /// A slot whose far apex lies strictly inside the diamond of its own
    /// triangle, or whose triangle has no diamond.
    fn first_uncertified(&self) -> Result<Option<Slot>> {
        let diamonds = (0..self.tris.len())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                circumscribe(&a, &b, &c)
            })
            .collect::<Result<Vec<_>>>()?;
        for (t, d) in diamonds.iter().enumerate() {
            let here = self.corners(t);
            for k in 0..3 {
                let o = self.partner(Slot::new(t, k));
                let there = self.corners(o.tri);
                let apex = &here[(k + 1) % 3] + &(&there[(o.edge + 2) % 3] - &there[o.edge]);
                if !empty(d, &apex) {
                    return Ok(Some(Slot::new(t, k)));
                }
            }
        }
        Ok(None)
    }

    fn surface(&self) -> Result<TranslationSurface> {
        TranslationSurface::from_parts(
            self.tris.iter().map(|e| Triangle { edges: e.clone() }).collect(),
            self.partner.clone(),
        )
    }

    fn of(w: &TranslationSurface) -> Mesh {
        let n = w.num_triangles();
        Mesh {
            tris: w.triangles().iter().map(|t| t.edges.clone()).collect(),
            partner: (0..n).map(|t| [0, 1, 2].map(|e| w.partner(Slot::new(t, e)))).collect(),
            labels: (0..n).map(|t| [0, 1, 2].map(|e| w.vertex(Slot::new(t, e)))).collect(),
        }
    }
}

/// Flips non-Delaunay edges until every edge is locally L¹ Delaunay.
pub fn delaunay_l1(s: &TranslationSurface, max_flips: usize) -> Result<DelaunayTriangulation> {
    delaunay_tracked(s, max_flips).map(|(t, _)| t)
}

/// As [`delaunay_l1`], also returning for each vertex of the input the
/// matching vertex of the result.
fn delaunay_tracked(s: &TranslationSurface, max_flips: usize) -> Result<(DelaunayTriangulation, Vec<usize>)> {
    let frame = working_frame();
    let w = apply_surface(&frame, s)?;
    let mut mesh = Mesh::of(&w);
    let mut queue: VecDeque<Slot> = VecDeque::new();
    for t in 0..mesh.tris.len() {
        for e in 0..3 {
            let sl = Slot::new(t, e);
            if sl < mesh.partner(sl) {
                queue.push_back(sl);
            }
        }
    }
    // order-free hash of the edge vectors, updated per flip
    let mut print = mesh.fingerprint().iter().fold(0u64, |acc, v| acc.wrapping_add(edge_hash(v)));
    let mut seen: HashSet<u64> = HashSet::from([print]);
    let mut flips = 0usize;
    while let Some(sl) = queue.pop_front() {
        if mesh.state(sl)? == EdgeState::Flip {
            let before = edge_hash(mesh.edge(sl));
            let outer = mesh.flip(sl);
            print = print.wrapping_sub(before).wrapping_add(edge_hash(&mesh.tris[sl.tri][1]));
            flips += 1;
            if flips > max_flips {
                return Err(Error::FlipLimit(max_flips));
            }
            if !seen.insert(print) {
                return Err(Error::FlipCycle(flips));
            }
            queue.extend(outer);
        }
    }
    if mesh.first_uncertified()?.is_some() {
        // flips can stall in L¹; rebuild from empty diamonds instead
        let stalled = mesh.surface()?;
        mesh = gift_wrap(&stalled, &mesh.labels, crate::geodesic::DEFAULT_BUDGET)?;
        if let Some(sl) = mesh.first_uncertified()? {
            return Err(Error::NotDelaunay(sl));
        }
    }
    let working = mesh.surface()?;
    let surface = apply_surface(&frame.inverse()?, &working)?;
    let certificates = working
        .triangles()
        .iter()
        .map(|t| diamond_of(&t.corner(0), &t.corner(1), &t.corner(2)))
        .collect::<Result<Vec<_>>>()?;
    let mut vertex_map = vec![usize::MAX; s.singularities().len()];
    for (t, row) in mesh.labels.iter().enumerate() {
        for (k, &old) in row.iter().enumerate() {
            vertex_map[old] = working.vertex(Slot::new(t, k));
        }
    }
    Ok((DelaunayTriangulation { surface, working, frame, certificates, flip_count: flips }, vertex_map))
}

/// Verifies the local Delaunay property across every edge of the working
/// triangulation.
pub fn verify(t: &DelaunayTriangulation) -> Result<()> {
    let w = &t.working;
    match Mesh::of(w).first_uncertified()? {
        Some(sl) => Err(Error::NotDelaunay(sl)),
        None => Ok(()),
    }
}

/// Triangulates a planar point set by a lexicographic sweep. Returns
/// counterclockwise index triples.
pub fn sweep_triangulation(pts: &[ExactVector]) -> Result<Vec<[usize; 3]>> {
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&a, &b| (&pts[a].x, &pts[a].y).cmp(&(&pts[b].x, &pts[b].y)));
    for w in order.windows(2) {
        if pts[w[0]] == pts[w[1]] {
            return Err(Error::Degenerate(format!("points {} and {} coincide", w[0], w[1])));
        }
    }
    if pts.len() < 3 {
        return Err(Error::Collinear);
    }
    let o = &pts[order[0]];
    let d = &pts[order[1]] - o;
    let k = (2..order.len()).find(|&k| !d.cross(&(&pts[order[k]] - o)).is_zero()).ok_or(Error::Collinear)?;
    let apex = order[k];
    let left = d.cross(&(&pts[apex] - o)).is_positive();
    let mut tris = Vec::new();
    for w in order[..k].windows(2) {
        tris.push(if left { [w[0], w[1], apex] } else { [w[1], w[0], apex] });
    }
    let mut hull: Vec<usize> = order[..k].to_vec();
    if !left {
        hull.reverse();
    }
    hull.push(apex);
    for &q in &order[k + 1..] {
        let n = hull.len();
        let visible = |i: usize| {
            let a = &pts[hull[i]];
            let b = &pts[hull[(i + 1) % n]];
            (b - a).cross(&(&pts[q] - a)).is_negative()
        };
        let start = (0..n).find(|&i| visible(i) && !visible((i + n - 1) % n)).expect("new point sees the hull");
        hull.rotate_left(start);
        let mut end = 0;
        while end < n && {
            let a = &pts[hull[end]];
            let b = &pts[hull[(end + 1) % n]];
            (b - a).cross(&(&pts[q] - a)).is_negative()
        } {
            tris.push([hull[(end + 1) % n], hull[end], q]);
            end += 1;
        }
        // vertices hull[1..end] leave the hull
        hull.drain(1..end);
        hull.insert(1, q);
    }
    Ok(tris)
}

/// A planar point set realised as marked points on a large flat torus.
#[derive(Clone, Debug)]
pub struct PlanarDelaunay {
    pub triangulation: DelaunayTriangulation,
    /// Singularity id of each input point.
    pub vertex_of_point: Vec<usize>,
    /// Translation applied to the points before wrapping.
    pub offset: ExactVector,
    pub side: Rational,
}

impl PlanarDelaunay {
    pub fn point_of_vertex(&self, v: usize) -> Option<usize> {
        self.vertex_of_point.iter().position(|&x| x == v)
    }
}

/// Marked-point torus of side `side` holding `pts + offset` in its interior.
pub fn wrap_points(pts: &[ExactVector], side: &Rational, offset: &ExactVector) -> Result<(TranslationSurface, Vec<usize>)> {
    let mut all: Vec<ExactVector> = pts.iter().map(|p| p + offset).collect();
    for p in &all {
        if !(p.x.is_positive() && p.y.is_positive() && &p.x < side && &p.y < side) {
            return Err(Error::InvalidArgument(format!("point {p} is not inside the torus cell")));
        }
    }
    let n = all.len();
    let zero = Rational::zero();
    all.push(ExactVector::new(zero.clone(), zero.clone()));
    all.push(ExactVector::new(side.clone(), zero.clone()));
    all.push(ExactVector::new(side.clone(), side.clone()));
    all.push(ExactVector::new(zero, side.clone()));
    let (c00, cl0, cll, c0l) = (n, n + 1, n + 2, n + 3);
    let tris = sweep_triangulation(&all)?;
    let mut slot_of: HashMap<(usize, usize), Slot> = HashMap::new();
    let mut triangles = Vec::new();
    let mut corner_point = Vec::new();
    for (t, &[a, b, c]) in tris.iter().enumerate() {
        triangles.push(Triangle::new(&all[b] - &all[a], &all[c] - &all[b], &all[a] - &all[c]));
        corner_point.push([a, b, c]);
        slot_of.insert((a, b), Slot::new(t, 0));
        slot_of.insert((b, c), Slot::new(t, 1));
        slot_of.insert((c, a), Slot::new(t, 2));
    }
    let mut gluings = Vec::new();
    for (&(a, b), &sl) in &slot_of {
        if let Some(&o) = slot_of.get(&(b, a)) {
            if sl < o {
                gluings.push([sl, o]);
            }
        }
    }
    let side_pair = |x: (usize, usize), y: (usize, usize)| -> Result<[Slot; 2]> {
        match (slot_of.get(&x), slot_of.get(&y)) {
            (Some(&a), Some(&b)) => Ok([a, b]),
            _ => Err(Error::Degenerate("torus cell side is not a single edge".into())),
        }
    };
    gluings.push(side_pair((c00, cl0), (cll, c0l))?);
    gluings.push(side_pair((cl0, cll), (c0l, c00))?);
    let s = TranslationSurface::from_raw(&RawSurface { triangles, gluings })?;
    let mut vertex_of_point = vec![usize::MAX; n];
    for (t, cp) in corner_point.iter().enumerate() {
        for (k, &p) in cp.iter().enumerate() {
            if p < n {
                vertex_of_point[p] = s.vertex(Slot::new(t, k));
            }
        }
    }
    Ok((s, vertex_of_point))
}

/// L¹ Delaunay triangulation of a planar point set, wrapped in a flat torus
/// four times wider than the point set.
pub fn planar_delaunay(pts: &[ExactVector], max_flips: usize) -> Result<PlanarDelaunay> {
    if pts.is_empty() {
        return Err(Error::InvalidArgument("empty point set".into()));
    }
    let min_x = pts.iter().map(|p| &p.x).min().unwrap();
    let max_x = pts.iter().map(|p| &p.x).max().unwrap();
    let min_y = pts.iter().map(|p| &p.y).min().unwrap();
    let max_y = pts.iter().map(|p| &p.y).max().unwrap();
    let span = std::cmp::max(max_x - min_x, max_y - min_y);
    let span = if span.is_zero() { rat(1, 1) } else { span };
    let side = &span * rat(4, 1);
    let half = &side / rat(2, 1);
    let two = rat(2, 1);
    let offset = ExactVector::new(&half - (min_x + max_x) / &two, &half - (min_y + max_y) / &two);
    let (s, before) = wrap_points(pts, &side, &offset)?;
    let (triangulation, vertex_map) = delaunay_tracked(&s, max_flips)?;
    let vertex_of_point = before.iter().map(|&v| vertex_map[v]).collect();
    Ok(PlanarDelaunay { triangulation, vertex_of_point, offset, side })
}

/// A time along the family of diamonds through `0` and `q`, oriented so the
/// part left of `0→q` grows. `Always` and `Never` are the two ends.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum Pencil {
    Always,
    At(i8, Rational),
    Never,
}

impl Pencil {
    fn reversed(self) -> Pencil {
        match self {
            Pencil::Always => Pencil::Never,
            Pencil::Never => Pencil::Always,
            Pencil::At(k, x) => Pencil::At(-k, -x),
        }
    }
}

// In (u, v) with q = (a, b), 0 <= b <= a, the family runs through the squares
// [0,s]×[b-s,b] for s from ∞ down to a (branch -1, keyed by -s), then
// [0,a]×[v0,v0+a] for v0 from b-a up to 0 (branch 0), then [a-s,a]×[0,s]
// for s from a up (branch 1, keyed by s). The part above the line grows.

fn pencil_at(a: &Rational, b: &Rational, k: i8, x: Rational) -> Pencil {
    // the junctions between branches have two names
    if k == -1 && x == -a {
        return Pencil::At(0, b - a);
    }
    if k == 1 && &x == a {
        return Pencil::At(0, Rational::zero());
    }
    Pencil::At(k, x)
}

/// Last time a point above the line is not strictly inside.
fn enter_above(a: &Rational, b: &Rational, u: &Rational, v: &Rational) -> Pencil {
    let zero = Rational::zero();
    if u > &zero && v < b {
        return Pencil::Always;
    }
    if u > &zero && u < a {
        return if v < a { pencil_at(a, b, 0, v - a) } else { pencil_at(a, b, 1, v.clone()) };
    }
    if u <= &zero && v > &zero {
        return pencil_at(a, b, 1, std::cmp::max(a - u, v.clone()));
    }
    Pencil::Never
}

/// First time a point below the line is not strictly inside.
fn leave_below(a: &Rational, b: &Rational, u: &Rational, v: &Rational) -> Pencil {
    let zero = Rational::zero();
    if v > &zero && u < a {
        return Pencil::Never;
    }
    if u > &zero && u < a {
        return if v >= &(b - a) { pencil_at(a, b, 0, v.clone()) } else { pencil_at(a, b, -1, v - b) };
    }
    if u >= a && v < b {
        return pencil_at(a, b, -1, -std::cmp::max(u.clone(), b - v));
    }
    Pencil::Always
}

/// When the growing diamond through `0` and `q` takes in `x`, a point left
/// of `0→q`. Errors when `q` runs along a diamond side.
fn pencil_time(q: &ExactVector, x: &ExactVector) -> Result<Pencil> {
    let (mut qu, mut qv) = uv(q);
    let (mut xu, mut xv) = uv(x);
    let mut mirrored = false;
    if qv.abs() > qu.abs() {
        std::mem::swap(&mut qu, &mut qv);
        std::mem::swap(&mut xu, &mut xv);
        mirrored = !mirrored;
    }
    if qu.is_negative() {
        qu = -qu;
        xu = -xu;
        mirrored = !mirrored;
    }
    if qv.is_negative() {
        qv = -qv;
        xv = -xv;
        mirrored = !mirrored;
    }
    if qv.is_zero() {
        return Err(Error::Degenerate(format!("edge {q} is parallel to a diamond side")));
    }
    Ok(if mirrored { leave_below(&qu, &qv, &xu, &xv).reversed() } else { enter_above(&qu, &qv, &xu, &xv) })
}

fn in_sector(s: &TranslationSurface, c: Slot, d: &ExactVector) -> bool {
    let lo = s.edge(c);
    let hi = -s.edge(c.prev());
    let a = lo.cross(d);
    (a.is_positive() || (a.is_zero() && lo.dot(d).is_positive())) && d.cross(&hi).is_positive()
}

fn reverse(d: &Departure) -> Departure {
    Departure { corner: d.end_corner, end_corner: d.corner, holonomy: -&d.holonomy }
}

/// Open set of directions strictly between `lo` and `hi`, less than a half
/// turn apart, with `lo` itself when `lo_incl`.
#[derive(Clone)]
struct Wedge {
    lo: ExactVector,
    lo_incl: bool,
    hi: ExactVector,
}

impl Wedge {
    fn contains(&self, d: &ExactVector) -> bool {
        let c = self.lo.cross(d);
        (c.is_positive() || (self.lo_incl && c.is_zero() && self.lo.dot(d).is_positive())) && d.cross(&self.hi).is_positive()
    }
}

type F2 = [f64; 2];

fn cross_f(a: F2, b: F2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// The part of segment `ab` seen through the wedge `(lo, hi)`, in floating
/// point. An end whose intersection is ill-conditioned stays unclipped, which
/// only lengthens the segment.
fn clip_f(lo: F2, hi: F2, a: F2, b: F2) -> (F2, F2) {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let hit = |d: F2, end: F2| {
        let den = cross_f(d, ab);
        if den.abs() <= 1e-6 * d[0].hypot(d[1]) * ab[0].hypot(ab[1]) {
            return end;
        }
        let t = cross_f(a, d) / den;
        if (0.0..=1.0).contains(&t) {
            [a[0] + t * ab[0], a[1] + t * ab[1]]
        } else {
            end
        }
    };
    let p = if cross_f(a, lo) > 0.0 { hit(lo, a) } else { a };
    let q = if cross_f(hi, b) > 0.0 { hit(hi, b) } else { b };
    (p, q)
}

/// L¹ distance from `c` to segment `pq`. The distance is convex and piecewise
/// linear along the segment, so its minimum sits at an end or where a
/// coordinate changes sign.
fn l1_dist_f(c: F2, p: F2, q: F2) -> f64 {
    let l1 = |v: F2| v[0].abs() + v[1].abs();
    let p = [p[0] - c[0], p[1] - c[1]];
    let pq = [q[0] - c[0] - p[0], q[1] - c[1] - p[1]];
    let mut best = l1(p).min(l1([p[0] + pq[0], p[1] + pq[1]]));
    for k in 0..2 {
        if pq[k] != 0.0 {
            let t = -p[k] / pq[k];
            if (0.0..=1.0).contains(&t) {
                best = best.min(l1([p[0] + t * pq[0], p[1] + t * pq[1]]));
            }
        }
    }
    best
}

fn dist_f(p: F2, q: F2) -> f64 {
    let pq = [q[0] - p[0], q[1] - p[1]];
    let len_sq = pq[0] * pq[0] + pq[1] * pq[1];
    let t = if len_sq > 0.0 { (-(p[0] * pq[0] + p[1] * pq[1]) / len_sq).clamp(0.0, 1.0) } else { 0.0 };
    (p[0] + t * pq[0]).hypot(p[1] + t * pq[1])
}

struct Search {
    cross: Slot,
    a: ExactVector,
    b: ExactVector,
    wedge: Wedge,
}

/// Best apex found so far: its time, the tied departures, and the diamond
/// they lie on.
type Best = Option<(Pencil, Vec<Departure>, DiamondCertificate)>;

struct Apexes<'a> {
    s: &'a TranslationSurface,
    budget: usize,
}

impl Apexes<'_> {
    /// The third corner of the Delaunay triangle left of the Delaunay edge
    /// `e`, as a departure from the start of `e`.
    fn apex(&self, e: &Departure) -> Result<Departure> {
        let s = self.s;
        let h = &e.holonomy;
        let back = -h;
        let mut wedges = Vec::new();
        let mut c = e.corner;
        loop {
            let lo = s.edge(c).clone();
            let hi = -s.edge(c.prev());
            let last = in_sector(s, c, &back);
            let (lo, lo_incl) = if c == e.corner { (h.clone(), false) } else { (lo, true) };
            wedges.push((c, Wedge { lo, lo_incl, hi: if last { back.clone() } else { hi } }));
            if last {
                break;
            }
            c = s.next_corner_ccw(c);
            if wedges.len() > 3 * s.num_triangles() {
                return Err(Error::Degenerate("no half turn around a vertex".into()));
            }
        }
        let mut reach = h.norm_sq() * rat(4, 1);
        for _ in 0..40 {
            let mut best: Best = None;
            for (corner, w) in &wedges {
                self.explore(*corner, w, h, &reach, &mut best)?;
            }
            if let Some((_, _, d)) = &best {
                // branches cut by the reach may still meet the diamond
                let r = &d.radius_l1;
                let zero = Rational::zero();
                let tips = [(r.clone(), zero.clone()), (-r, zero.clone()), (zero.clone(), r.clone()), (zero, -r)]
                    .map(|(x, y)| &d.center + &ExactVector::new(x, y));
                if tips.iter().any(|t| t.norm_sq() > reach) {
                    for (corner, w) in &wedges {
                        self.explore(*corner, w, h, &reach, &mut best)?;
                    }
                }
            }
            if let Some((_, tied, _)) = best {
                return Ok(pick_fan(h, tied.iter().collect()).clone());
            }
            reach *= rat(4, 1);
        }
        Err(Error::Degenerate("no apex within reach".into()))
    }

    fn offer(&self, h: &ExactVector, d: Departure, best: &mut Best) -> Result<()> {
        let t = pencil_time(h, &d.holonomy)?;
        match t {
            Pencil::Never => Ok(()),
            Pencil::Always => Err(Error::Degenerate("edge has a vertex inside every diamond".into())),
            _ => {
                match best {
                    Some((bt, tied, _)) if *bt == t => tied.push(d),
                    Some((bt, _, _)) if *bt < t => {}
                    _ => {
                        let dia = circumscribe(&ExactVector::zero(), h, &d.holonomy)?
                            .ok_or_else(|| Error::Degenerate("apex without a diamond".into()))?;
                        *best = Some((t, vec![d], dia));
                    }
                }
                Ok(())
            }
        }
    }

    /// Depth-first search through the corner's wedge, pruned by the best
    /// diamond so far, or by `reach` until one is known.
    fn explore(&self, corner: Slot, w0: &Wedge, h: &ExactVector, reach: &Rational, best: &mut Best) -> Result<()> {
        let s = self.s;
        // pruning only has to be conservative, so it runs in floating point
        // with a margin far above the rounding error
        let reach_f = to_f64(reach).sqrt();
        let keep = |a: &ExactVector, b: &ExactVector, w: &Wedge, best: &Best| {
            let (a, b) = (a.to_f64(), b.to_f64());
            let (p, q) = clip_f(w.lo.to_f64(), w.hi.to_f64(), a, b);
            let size = a[0].abs() + a[1].abs() + b[0].abs() + b[1].abs();
            match best {
                Some((_, _, d)) => {
                    let (c, r) = (d.center.to_f64(), to_f64(&d.radius_l1));
                    let margin = 1e-7 * (size + c[0].abs() + c[1].abs() + r);
                    let far = l1_dist_f(c, p, q) > r + margin;
                    !far
                }
                None => {
                    let far = dist_f(p, q) > reach_f + 1e-7 * (size + reach_f);
                    !far
                }
            }
        };
        let a = s.edge(corner).clone();
        let b = -s.edge(corner.prev());
        if w0.contains(&a) {
            let d = Departure { corner, end_corner: s.partner(corner), holonomy: a.clone() };
            self.offer(h, d, best)?;
        }
        let mut stack = Vec::new();
        if keep(&a, &b, w0, best) {
            stack.push(Search { cross: corner.next(), a, b, wedge: w0.clone() });
        }
        let mut states = 0usize;
        while let Some(st) = stack.pop() {
            if !keep(&st.a, &st.b, &st.wedge, best) {
                continue;
            }
            states += 1;
            if states > self.budget {
                return Err(Error::ResourceLimit { states, limit: self.budget, radius_sq: format_rational(reach) });
            }
            let p = s.partner(st.cross);
            let c = &st.a + s.edge(Slot::new(p.tri, (p.edge + 1) % 3));
            let via_ac = Slot::new(p.tri, (p.edge + 1) % 3);
            let via_cb = Slot::new(p.tri, (p.edge + 2) % 3);
            if st.wedge.contains(&c) {
                let d = Departure { corner, end_corner: Slot::new(p.tri, (p.edge + 2) % 3), holonomy: c.clone() };
                self.offer(h, d, best)?;
                let w1 = Wedge { lo: st.wedge.lo.clone(), lo_incl: st.wedge.lo_incl, hi: c.clone() };
                let w2 = Wedge { lo: c.clone(), lo_incl: false, hi: st.wedge.hi.clone() };
                if keep(&c, &st.b, &w2, best) {
                    stack.push(Search { cross: via_cb, a: c.clone(), b: st.b.clone(), wedge: w2 });
                }
                if keep(&st.a, &c, &w1, best) {
                    stack.push(Search { cross: via_ac, a: st.a, b: c, wedge: w1 });
                }
            } else if !c.cross(&st.wedge.hi).is_positive() {
                if keep(&st.a, &c, &st.wedge, best) {
                    stack.push(Search { cross: via_ac, a: st.a, b: c, wedge: st.wedge });
                }
            } else if keep(&c, &st.b, &st.wedge, best) {
                stack.push(Search { cross: via_cb, a: c, b: st.b, wedge: st.wedge });
            }
        }
        Ok(())
    }
}

/// Among apexes on one diamond, the choice that fans the face out of its
/// lowest vertex, so every edge of the face agrees on the dissection.
fn pick_fan<'d>(h: &ExactVector, mut tied: Vec<&'d Departure>) -> &'d Departure {
    if tied.len() == 1 {
        return tied[0];
    }
    tied.sort_by(|a, b| {
        let c = a.holonomy.cross(&b.holonomy);
        if c.is_positive() {
            std::cmp::Ordering::Less
        } else if c.is_negative() {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    });
    let zero = ExactVector::zero();
    let low = |v: &ExactVector| (v.y.clone(), v.x.clone());
    let mut lowest = (low(&zero), 0usize);
    if low(h) < lowest.0 {
        lowest = (low(h), 1);
    }
    for (i, d) in tied.iter().enumerate() {
        if low(&d.holonomy) < lowest.0 {
            lowest = (low(&d.holonomy), i + 2);
        }
    }
    match lowest.1 {
        0 => tied[0],
        1 => tied[tied.len() - 1],
        i => tied[i - 2],
    }
}

/// Builds the Delaunay triangulation outward from the L¹-shortest
/// connection, which always bounds an empty diamond. `labels` names the
/// vertex at each corner of `s`.
fn gift_wrap(s: &TranslationSurface, labels: &[[usize; 3]], budget: usize) -> Result<Mesh> {
    let apexes = Apexes { s, budget };
    // the L¹-shortest connection is at most √2 times the shortest edge
    let reach = s.min_edge_len_sq() * rat(2, 1);
    let mut first: Option<Departure> = None;
    for t in 0..s.num_triangles() {
        for k in 0..3 {
            for d in departures(s, Slot::new(t, k), &reach, budget)? {
                if first.as_ref().is_none_or(|f| d.holonomy.l1_norm() < f.holonomy.l1_norm()) {
                    first = Some(d);
                }
            }
        }
    }
    let first = first.ok_or_else(|| Error::Degenerate("no connection found".into()))?;
    let mut tris: Vec<[ExactVector; 3]> = Vec::new();
    let mut dirs: Vec<[Departure; 3]> = Vec::new();
    let mut index: HashMap<(Slot, ExactVector), Slot> = HashMap::new();
    let mut queue = VecDeque::from([reverse(&first), first]);
    while let Some(e) = queue.pop_front() {
        if index.contains_key(&(e.corner, e.holonomy.clone())) {
            continue;
        }
        if tris.len() >= s.num_triangles() {
            return Err(Error::Degenerate("Delaunay triangles overlap".into()));
        }
        let x = apexes.apex(&e)?;
        let qx = &x.holonomy - &e.holonomy;
        let mut at_q = e.end_corner;
        for _ in 0..3 * s.num_triangles() {
            if in_sector(s, at_q, &qx) {
                break;
            }
            at_q = s.prev_corner_ccw(at_q);
        }
        let xq = -&qx;
        let mut at_x = x.end_corner;
        for _ in 0..3 * s.num_triangles() {
            if in_sector(s, at_x, &xq) {
                break;
            }
            at_x = s.next_corner_ccw(at_x);
        }
        if !in_sector(s, at_q, &qx) || !in_sector(s, at_x, &xq) {
            return Err(Error::Degenerate("Delaunay triangle does not close up".into()));
        }
        let edges = [
            e.clone(),
            Departure { corner: at_q, end_corner: at_x, holonomy: qx.clone() },
            reverse(&x),
        ];
        let t = tris.len();
        for (k, d) in edges.iter().enumerate() {
            if index.insert((d.corner, d.holonomy.clone()), Slot::new(t, k)).is_some() {
                return Err(Error::Degenerate("Delaunay triangles overlap".into()));
            }
            let r = reverse(d);
            if !index.contains_key(&(r.corner, r.holonomy.clone())) {
                queue.push_back(r);
            }
        }
        tris.push([e.holonomy.clone(), qx, -&x.holonomy]);
        dirs.push(edges);
    }
    let mut partner = Vec::with_capacity(tris.len());
    let mut out_labels = Vec::with_capacity(tris.len());
    for row in &dirs {
        let mut p = [Slot::new(0, 0); 3];
        let mut l = [0usize; 3];
        for (k, d) in row.iter().enumerate() {
            p[k] = *index
                .get(&(d.end_corner, -&d.holonomy))
                .ok_or_else(|| Error::Degenerate("Delaunay edge without a partner".into()))?;
            l[k] = labels[d.corner.tri][d.corner.edge];
        }
        partner.push(p);
        out_labels.push(l);
    }
    Ok(Mesh { tris, partner, labels: out_labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactplane::{int, LinearAction};
    use crate::geodesic::{shortest, DEFAULT_BUDGET};
    use crate::surface::models::*;
    use proptest::prelude::*;

    fn v(x: i64, y: i64) -> ExactVector {
        ExactVector::from_ints(x, y)
    }

    #[test]
    fn diamond_examples() {
        let d = diamond_of(&v(0, 0), &v(2, 0), &v(1, 1)).unwrap();
        assert_eq!(d.center, v(1, 0));
        assert_eq!(d.radius_l1, int(1));
        let d = diamond_of(&v(0, 0), &v(2, 0), &v(1, -1)).unwrap();
        assert_eq!(d.center, v(1, 0));
        assert_eq!(d.radius_l1, int(1));
        assert_eq!(diamond_of(&v(0, 0), &v(1, 0), &v(2, 0)).unwrap_err(), Error::Collinear);
    }

    #[test]
    fn local_delaunay_examples() {
        // unit square split by a diagonal: fourth corner lies on the diamond
        let tri = [v(0, 0), v(1, 0), v(1, 1)];
        assert!(is_locally_delaunay(&tri, &v(0, 1)).unwrap());
        let d = diamond_of(&tri[0], &tri[1], &tri[2]).unwrap();
        assert!(d.on_boundary(&v(0, 1)));
        assert!(!is_locally_delaunay(&tri, &d.center).unwrap());
        assert!(is_locally_delaunay(&tri, &v(-3, 4)).unwrap());
    }

    #[test]
    fn square_torus_needs_no_flips() {
        let t = delaunay_l1(&square_torus(), DEFAULT_MAX_FLIPS).unwrap();
        assert_eq!(t.flip_count, 0);
        verify(&t).unwrap();
    }

    #[test]
    fn skew_torus_flips_to_short_edges() {
        let s = apply_surface(&ExactMatrix::from_ints(1, 3, 0, 1), &square_torus()).unwrap();
        let t = delaunay_l1(&s, DEFAULT_MAX_FLIPS).unwrap();
        assert!(t.flip_count > 0);
        let has = |w: &ExactVector| t.surface.triangles().iter().any(|tr| tr.edges.iter().any(|e| e == w || &-e == w));
        assert!(has(&v(1, 0)));
        assert_eq!(t.surface.signature(), s.signature());
        assert_eq!(t.surface.area(), s.area());
    }

    #[test]
    fn shortest_connection_is_an_edge() {
        let surfaces = vec![
            octagon(),
            slit_torus(&ExactMatrix::from_ints(2, 5, 1, 3), &ExactVector::new(rat(2, 7), rat(3, 11))).unwrap(),
            apply_surface(&ExactMatrix::from_ints(1, 4, 0, 1), &octagon()).unwrap(),
        ];
        for s in surfaces {
            let g = shortest(&s, DEFAULT_BUDGET).unwrap();
            let t = delaunay_l1(&s, DEFAULT_MAX_FLIPS).unwrap();
            let hit = t
                .surface
                .triangles()
                .iter()
                .any(|tr| tr.edges.iter().any(|e| *e == g.holonomy || *e == -&g.holonomy));
            assert!(hit);
        }
    }

    #[test]
    fn sweep_triangulates_convex_hull() {
        let pts = vec![v(0, 0), v(3, 0), v(0, 3), v(1, 1), v(2, 2), v(3, 3), v(0, 1)];
        let tris = sweep_triangulation(&pts).unwrap();
        let area2: Rational = tris.iter().map(|t| (&pts[t[1]] - &pts[t[0]]).cross(&(&pts[t[2]] - &pts[t[0]]))).sum();
        assert_eq!(area2, int(18));
        assert!(tris.iter().all(|t| (&pts[t[1]] - &pts[t[0]]).cross(&(&pts[t[2]] - &pts[t[0]])).is_positive()));
    }

    /// Triangles of the periodic triangulation that develop onto input points.
    fn planar_triangles(pd: &PlanarDelaunay, pts: &[ExactVector]) -> HashSet<[usize; 3]> {
        let w = &pd.triangulation.surface;
        let mut out = HashSet::new();
        for (t, tri) in w.triangles().iter().enumerate() {
            let ids: Vec<Option<usize>> = (0..3).map(|k| pd.point_of_vertex(w.vertex(Slot::new(t, k)))).collect();
            if let [Some(a), Some(b), Some(c)] = ids[..] {
                if &pts[b] - &pts[a] == tri.edges[0] && &pts[c] - &pts[b] == tri.edges[1] {
                    let mut k = [a, b, c];
                    k.sort();
                    out.insert(k);
                }
            }
        }
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn planar_agrees_with_brute_force(raw in proptest::collection::btree_set((0i64..40, 0i64..40), 4..12)) {
            let pts: Vec<ExactVector> = raw.iter().map(|&(x, y)| ExactVector::new(rat(x, 3), rat(y, 5))).collect();
            let frame = working_frame();
            let fp: Vec<ExactVector> = pts.iter().map(|p| frame.apply(p)).collect();
            let Ok(pd) = planar_delaunay(&pts, DEFAULT_MAX_FLIPS) else { return Ok(()) };
            verify(&pd.triangulation).unwrap();
            let got = planar_triangles(&pd, &pts);
            let n = pts.len();
            let quarter = &pd.side / rat(4, 1);
            for a in 0..n {
                for b in a + 1..n {
                    for c in b + 1..n {
                        let Ok(d) = diamond_of(&fp[a], &fp[b], &fp[c]) else { continue };
                        let empty = (0..n).all(|k| k == a || k == b || k == c || !d.strictly_contains(&fp[k]));
                        let key = [a, b, c];
                        if got.contains(&key) {
                            prop_assert!(empty, "triangle {:?} has a point inside its diamond", key);
                        } else if empty && d.radius_l1 < quarter {
                            // small empty diamonds are unaffected by the periodic copies
                            let boundary = (0..n).filter(|&k| d.on_boundary(&fp[k])).count();
                            prop_assert!(boundary > 3, "missing empty triangle {:?}", key);
                        }
                    }
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 512, max_global_rejects: 100_000, ..ProptestConfig::default() })]
        #[test]
        fn pencil_orders_like_diamonds(
            q in (-40i64..=40, -40i64..=40),
            r in (-40i64..=40, -40i64..=40),
            x in (-40i64..=40, -40i64..=40),
        ) {
            let q = v(q.0, q.1);
            let r = v(r.0, r.1);
            let x = v(x.0, x.1);
            prop_assume!(q.cross(&r).is_positive() && q.cross(&x).is_positive());
            let pts = [ExactVector::zero(), q.clone(), r.clone(), x.clone()];
            for i in 0..4 {
                for j in i + 1..4 {
                    let (u, w) = uv(&(&pts[j] - &pts[i]));
                    prop_assume!(!u.is_zero() && !w.is_zero());
                }
            }
            let Ok(Some(d)) = circumscribe(&ExactVector::zero(), &q, &r) else { return Ok(()) };
            let tr = pencil_time(&q, &r).unwrap();
            prop_assert!(matches!(tr, Pencil::At(..)));
            prop_assert_eq!(d.strictly_contains(&x), pencil_time(&q, &x).unwrap() < tr);
        }
    }

    fn edge_set(m: &Mesh) -> Vec<ExactVector> {
        m.fingerprint()
    }

    #[test]
    fn gift_wrap_agrees_with_flips() {
        let g = ExactMatrix::new(rat(3, 2), rat(2, 7), rat(1, 5), rat(52, 70));
        let surfaces = vec![
            matrix_torus(&g).unwrap(),
            apply_surface(&g, &octagon()).unwrap(),
            slit_torus(&ExactMatrix::identity(), &ExactVector::new(rat(3, 10), rat(1, 7))).unwrap(),
        ];
        for s in surfaces {
            let w = apply_surface(&working_frame(), &s).unwrap();
            let (dt, _) = delaunay_tracked(&s, DEFAULT_MAX_FLIPS).unwrap();
            let flipped = Mesh::of(&dt.working);
            let labels: Vec<[usize; 3]> =
                (0..w.num_triangles()).map(|t| [0, 1, 2].map(|e| w.vertex(Slot::new(t, e)))).collect();
            let wrapped = gift_wrap(&w, &labels, DEFAULT_BUDGET).unwrap();
            assert!(wrapped.first_uncertified().unwrap().is_none());
            assert_eq!(edge_set(&wrapped), edge_set(&flipped));
        }
    }

    #[test]
    fn random_planar_sets_certify() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(4);
        for _ in 0..12 {
            let n = rng.gen_range(3..=40);
            let mut seen = std::collections::BTreeSet::new();
            while seen.len() < n {
                seen.insert((rng.gen_range(0..=400i64), rng.gen_range(0..=400i64)));
            }
            let pts: Vec<ExactVector> = seen.into_iter().map(|(x, y)| ExactVector::new(rat(x, 4), rat(y, 4))).collect();
            let pd = planar_delaunay(&pts, DEFAULT_MAX_FLIPS).unwrap();
            verify(&pd.triangulation).unwrap();
        }
    }

    #[test]
    fn planar_set_with_far_apex_certifies() {
        // the wrap leaves long thin faces whose diamonds reach past the first search radius
        let raw = [
            (13, 357), (29, 389), (35, 125), (43, 107), (43, 222), (47, 384), (48, 34), (53, 84), (77, 317),
            (99, 261), (102, 386), (124, 319), (131, 150), (180, 18), (205, 35), (248, 348), (271, 95), (297, 74),
            (303, 222), (334, 131), (336, 348), (361, 64), (362, 141), (373, 13), (377, 71), (398, 151),
        ];
        let pts: Vec<ExactVector> = raw.iter().map(|&(x, y)| ExactVector::new(rat(x, 4), rat(y, 4))).collect();
        let p = planar_delaunay(&pts, DEFAULT_MAX_FLIPS).unwrap();
        verify(&p.triangulation).unwrap();
    }

    #[test]
    fn planar_flags_duplicates() {
        let pts = vec![v(0, 0), v(1, 0), v(0, 0)];
        assert_eq!(planar_delaunay(&pts, 100).unwrap_err().code(), "DEGENERATE");
    }
}
