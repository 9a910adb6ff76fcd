//! Floer chain data for transverse pairs of immersed multicurves.
//!
//! Generators are the pairwise crossings of the two curves, found on the
//! folded chart and deduplicated under the quotient. The differential counts
//! immersed bigons over F2: candidate disks are enumerated by walking
//! bounded-length path pairs between two generators along the curves, and a
//! candidate is accepted exactly when its boundary develops through deck
//! elements into an embedded, positively oriented planar polygon with convex
//! corners and no corner lift inside or on it. A transverse self-crossing of
//! one curve may be designated as a cochain vertex; triangles through it
//! deform the differential the same way.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::charvar::{Component, Multicurve};
use crate::exactgeom::{
    canonical_dir, deck_between, fold_polyline, normalize, rat_i, segment_intersections, Deck,
    LiftPolyline, PillowPoint, PlanePoint, Rat, Shear, ShearDirection,
};

/// Position on a multicurve: component index, lift segment, parameter in
/// [0, 1]. Canonical form keeps t in [0, 1) except at the free end of an
/// open arc, so each curve point has one representative.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Loc {
    pub component: usize,
    pub segment: usize,
    pub t: Rat,
}

/// A transverse crossing of the two input curves.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Generator {
    pub point: PillowPoint,
    pub loc1: Loc,
    pub loc2: Loc,
}

/// A transverse self-crossing of one multicurve; loc_a < loc_b.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelfIntersection {
    pub point: PillowPoint,
    pub loc_a: Loc,
    pub loc_b: Loc,
}

/// Developed boundary polygon of an accepted disk.
#[derive(Clone, Debug)]
pub struct DiskWitness {
    pub boundary: Vec<PlanePoint>,
}

/// A self-crossing usable as a cochain vertex, with the curve it lies on.
#[derive(Clone, Debug, PartialEq)]
pub struct CochainSite {
    pub on_first: bool,
    pub site: SelfIntersection,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum FloerError {
    #[error("non-transverse configuration at ({at}): {what}; perturb one curve with a small shear")]
    NotTransverse { at: String, what: String },
    #[error("disk search budget exceeded: a disk side needs length {needed} over budget {budget}")]
    BudgetExceeded { budget: String, needed: String },
    #[error("cochain index {index} out of range: the pair has {available} self-intersections")]
    CochainIndex { index: usize, available: usize },
    #[error("differential does not square to zero at column {column}")]
    NotSquareZero { column: usize },
}

/// Default per-side path budget, in chart widths.
pub fn default_budget() -> Rat {
    rat_i(4)
}

// ---------------------------------------------------------------------------
// Intersection.

/// One folded chart piece with its source location on a multicurve.
struct SoupSeg {
    a: PlanePoint,
    b: PlanePoint,
    comp: usize,
    seg: usize,
    t0: Rat,
    t1: Rat,
}

impl SoupSeg {
    fn src(&self, t: &Rat) -> Rat {
        &self.t0 + t * (&self.t1 - &self.t0)
    }
}

fn soup(curve: &Multicurve) -> Vec<SoupSeg> {
    let mut out = Vec::new();
    for (ci, c) in curve.components.iter().enumerate() {
        for piece in fold_polyline(&c.lift) {
            out.push(SoupSeg {
                a: piece.a,
                b: piece.b,
                comp: ci,
                seg: piece.seg,
                t0: piece.t0,
                t1: piece.t1,
            });
        }
    }
    out
}

fn lift_point(lift: &LiftPolyline, seg: usize, t: &Rat) -> PlanePoint {
    let (a, b) = lift.segment(seg);
    a.add(&b.sub(&a).scale(t))
}

/// Canonical representative of a curve position.
fn canon_loc(lift: &LiftPolyline, comp: usize, seg: usize, t: Rat) -> Loc {
    if t.is_one() {
        if seg + 1 < lift.segment_count() {
            return Loc { component: comp, segment: seg + 1, t: rat_i(0) };
        }
        if lift.closed {
            return Loc { component: comp, segment: 0, t: rat_i(0) };
        }
    }
    Loc { component: comp, segment: seg, t }
}

/// The one or two canonical germ directions of the curve at a position.
/// Interior positions yield the incoming and outgoing rays; a free arc end
/// yields a single ray.
fn germ_rays(curve: &Multicurve, loc: &Loc) -> Vec<PlanePoint> {
    let lift = &curve.components[loc.component].lift;
    let here = lift_point(lift, loc.segment, &loc.t);
    let (a, b) = lift.segment(loc.segment);
    let dir = b.sub(&a);
    let mut rays = Vec::new();
    if !loc.t.is_one() {
        rays.push(canonical_dir(&here, &dir));
    }
    if loc.t.is_zero() {
        let prev = if loc.segment > 0 {
            Some(loc.segment - 1)
        } else if lift.closed {
            Some(lift.segment_count() - 1)
        } else {
            None
        };
        if let Some(p) = prev {
            let (pa, pb) = lift.segment(p);
            rays.push(canonical_dir(&pb, &pa.sub(&pb)));
        }
    } else {
        rays.push(canonical_dir(&here, &dir.neg()));
    }
    rays
}

fn rat_str(r: &Rat) -> String {
    if r.is_integer() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn point_str(p: &PillowPoint) -> String {
    format!("{}, {}", rat_str(&p.gamma), rat_str(&p.theta))
}

fn loc_str(which: &str, loc: &Loc) -> String {
    format!("{} component {} segment {}", which, loc.component, loc.segment)
}

/// Counterclockwise order on nonzero directions, starting from +gamma.
fn angle_cmp(a: &PlanePoint, b: &PlanePoint) -> std::cmp::Ordering {
    fn class(d: &PlanePoint) -> u8 {
        let g = if d.gamma.is_positive() {
            1
        } else if d.gamma.is_negative() {
            -1
        } else {
            0
        };
        let t = if d.theta.is_positive() {
            1
        } else if d.theta.is_negative() {
            -1
        } else {
            0
        };
        match (g, t) {
            (1, 0) => 0,
            (1, 1) => 1,
            (0, 1) => 2,
            (-1, 1) => 3,
            (-1, 0) => 4,
            (-1, -1) => 5,
            (0, -1) => 6,
            (1, -1) => 7,
            _ => unreachable!("zero direction"),
        }
    }
    class(a).cmp(&class(b)).then_with(|| {
        let c = a.cross(b);
        if c.is_positive() {
            std::cmp::Ordering::Less
        } else if c.is_negative() {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    })
}

/// Decide whether two germs (two rays each) cross transversally.
fn rays_cross(r1: &[PlanePoint], r2: &[PlanePoint]) -> Result<(), String> {
    for a in r1 {
        for b in r2 {
            if a.cross(b).is_zero() {
                return Err("tangent directions are parallel".into());
            }
        }
    }
    let mut labeled: Vec<(&PlanePoint, u8)> =
        r1.iter().map(|d| (d, 0u8)).chain(r2.iter().map(|d| (d, 1u8))).collect();
    labeled.sort_by(|x, y| angle_cmp(x.0, y.0));
    let alternating = (0..labeled.len()).all(|i| labeled[i].1 != labeled[(i + 1) % labeled.len()].1);
    if alternating {
        Ok(())
    } else {
        Err("the branches touch without crossing".into())
    }
}

/// All transverse crossings of the two curves, sorted by normalized
/// coordinates. Any coincidence that is not a clean transversal crossing of
/// one branch of each curve is an error.
pub fn intersect(l1: &Multicurve, l2: &Multicurve) -> Result<Vec<Generator>, FloerError> {
    let s1 = soup(l1);
    let s2 = soup(l2);
    let mut clusters: BTreeMap<PillowPoint, (BTreeSet<Loc>, BTreeSet<Loc>)> = BTreeMap::new();
    for p in &s1 {
        for q in &s2 {
            for rec in segment_intersections(&p.a, &p.b, &q.a, &q.b) {
                let key = normalize(&rec.point);
                let entry = clusters.entry(key).or_default();
                entry.0.insert(canon_loc(&l1.components[p.comp].lift, p.comp, p.seg, p.src(&rec.t)));
                entry.1.insert(canon_loc(&l2.components[q.comp].lift, q.comp, q.seg, q.src(&rec.u)));
            }
        }
    }
    // Boundary chart points carry several representatives; contacts there
    // only show up through coinciding piece endpoints.
    for (segs, side) in [(&s1, 0usize), (&s2, 1usize)] {
        for p in segs.iter() {
            let curve = if side == 0 { l1 } else { l2 };
            for (pt, t) in [(&p.a, p.t0.clone()), (&p.b, p.t1.clone())] {
                let key = normalize(pt);
                let entry = clusters.entry(key).or_default();
                let loc = canon_loc(&curve.components[p.comp].lift, p.comp, p.seg, t);
                if side == 0 {
                    entry.0.insert(loc);
                } else {
                    entry.1.insert(loc);
                }
            }
        }
    }
    let mut out = Vec::new();
    for (key, (ps1, ps2)) in &clusters {
        if ps1.is_empty() || ps2.is_empty() {
            continue;
        }
        if key.corner().is_some() {
            return Err(FloerError::NotTransverse {
                at: point_str(key),
                what: "both curves meet a pillowcase corner".into(),
            });
        }
        if ps1.len() > 1 || ps2.len() > 1 {
            let which = if ps1.len() > 1 { "first" } else { "second" };
            return Err(FloerError::NotTransverse {
                at: point_str(key),
                what: format!("the {which} curve passes through the crossing more than once"),
            });
        }
        let loc1 = ps1.iter().next().unwrap().clone();
        let loc2 = ps2.iter().next().unwrap().clone();
        let r1 = germ_rays(l1, &loc1);
        let r2 = germ_rays(l2, &loc2);
        if r1.len() < 2 || r2.len() < 2 {
            return Err(FloerError::NotTransverse {
                at: point_str(key),
                what: "an arc endpoint lies on the other curve".into(),
            });
        }
        if let Err(why) = rays_cross(&r1, &r2) {
            return Err(FloerError::NotTransverse {
                at: point_str(key),
                what: format!(
                    "{} ({} meets {})",
                    why,
                    loc_str("first curve", &loc1),
                    loc_str("second curve", &loc2)
                ),
            });
        }
        out.push(Generator { point: key.clone(), loc1, loc2 });
    }
    Ok(out)
}

/// All transverse self-crossings of one multicurve, sorted. Positions that
/// merely share a corner endpoint are not crossings and are skipped.
pub fn self_intersections(l: &Multicurve) -> Result<Vec<SelfIntersection>, FloerError> {
    let segs = soup(l);
    let mut clusters: BTreeMap<PillowPoint, BTreeSet<Loc>> = BTreeMap::new();
    for (i, p) in segs.iter().enumerate() {
        for q in segs.iter().skip(i + 1) {
            for rec in segment_intersections(&p.a, &p.b, &q.a, &q.b) {
                let key = normalize(&rec.point);
                let entry = clusters.entry(key).or_default();
                entry.insert(canon_loc(&l.components[p.comp].lift, p.comp, p.seg, p.src(&rec.t)));
                entry.insert(canon_loc(&l.components[q.comp].lift, q.comp, q.seg, q.src(&rec.u)));
            }
        }
    }
    for p in &segs {
        for (pt, t) in [(&p.a, p.t0.clone()), (&p.b, p.t1.clone())] {
            clusters
                .entry(normalize(pt))
                .or_default()
                .insert(canon_loc(&l.components[p.comp].lift, p.comp, p.seg, t));
        }
    }
    let mut out = Vec::new();
    for (key, poss) in &clusters {
        if poss.len() < 2 || key.corner().is_some() {
            continue;
        }
        if poss.len() > 2 {
            return Err(FloerError::NotTransverse {
                at: point_str(key),
                what: "more than two branches meet".into(),
            });
        }
        let mut it = poss.iter();
        let loc_a = it.next().unwrap().clone();
        let loc_b = it.next().unwrap().clone();
        let ra = germ_rays(l, &loc_a);
        let rb = germ_rays(l, &loc_b);
        if ra.len() < 2 || rb.len() < 2 {
            return Err(FloerError::NotTransverse {
                at: point_str(key),
                what: "an arc endpoint lies on the curve".into(),
            });
        }
        if let Err(why) = rays_cross(&ra, &rb) {
            return Err(FloerError::NotTransverse {
                at: point_str(key),
                what: format!(
                    "{} ({} meets {})",
                    why,
                    loc_str("branch", &loc_a),
                    loc_str("branch", &loc_b)
                ),
            });
        }
        out.push(SelfIntersection { point: key.clone(), loc_a, loc_b });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Path enumeration.

/// A developed walk along one component between two curve positions.
struct SidePath {
    verts: Vec<PlanePoint>,
    len: Rat,
}

fn linf(a: &PlanePoint, b: &PlanePoint) -> Rat {
    let dg = (&a.gamma - &b.gamma).abs();
    let dt = (&a.theta - &b.theta).abs();
    if dg > dt {
        dg
    } else {
        dt
    }
}

/// Forward walks from `from` to every occurrence of `to` with developed
/// length at most `cap`. Once the walk state repeats (identity frame back at
/// the start segment) any further hit would revisit a vertex, so the
/// enumeration stops there.
fn walk_paths(lift: &LiftPolyline, from: &Loc, to: &Loc, cap: &Rat) -> Vec<SidePath> {
    let nseg = lift.segment_count();
    let wrap = if lift.closed {
        Some(lift.monodromy.clone().unwrap_or_else(Deck::identity))
    } else {
        None
    };
    let mut out = Vec::new();
    let start = lift_point(lift, from.segment, &from.t);
    let mut verts = vec![start];
    let mut len = rat_i(0);
    let mut frame = Deck::identity();
    let mut s = from.segment;
    let mut t_enter = from.t.clone();
    let mut first = true;
    for _ in 0..100_000usize {
        let lap_done = !first && s == from.segment && frame.is_identity();
        if s == to.segment && to.t >= t_enter && !(first && to.t == from.t) {
            let p = frame.apply(&lift_point(lift, s, &to.t));
            let last = verts.last().unwrap();
            let hit_len = &len + linf(last, &p);
            if hit_len > *cap {
                break;
            }
            let mut pv = verts.clone();
            if &p != pv.last().unwrap() {
                pv.push(p);
            }
            if pv.len() >= 2 {
                out.push(SidePath { verts: pv, len: hit_len });
            }
        }
        if lap_done {
            break;
        }
        let (_, b) = lift.segment(s);
        let end = frame.apply(&b);
        let last = verts.last().unwrap().clone();
        len = &len + linf(&last, &end);
        if len > *cap {
            break;
        }
        if end != last {
            verts.push(end);
        }
        first = false;
        t_enter = rat_i(0);
        s += 1;
        if s == nseg {
            match &wrap {
                None => break,
                Some(m) => {
                    s = 0;
                    frame = frame.compose(m);
                }
            }
        }
    }
    out
}

/// Traversal-reversed lift, with the map from original locations.
fn reverse_lift(lift: &LiftPolyline) -> LiftPolyline {
    let n = lift.vertices.len();
    if !lift.closed {
        let mut verts = lift.vertices.clone();
        verts.reverse();
        LiftPolyline { vertices: verts, closed: false, monodromy: None }
    } else if let Some(m) = &lift.monodromy {
        let inv = m.inverse();
        let mut verts = vec![lift.vertices[0].clone()];
        for j in 1..n {
            verts.push(inv.apply(&lift.vertices[n - 1 - j]));
        }
        // verts[n-1] = inv(v0), matching monodromy inv.
        LiftPolyline { vertices: verts, closed: true, monodromy: Some(inv) }
    } else {
        let mut verts = vec![lift.vertices[0].clone()];
        for j in 1..n {
            verts.push(lift.vertices[n - j].clone());
        }
        LiftPolyline { vertices: verts, closed: true, monodromy: None }
    }
}

fn reverse_loc(lift: &LiftPolyline, rlift: &LiftPolyline, loc: &Loc) -> Loc {
    let j = lift.segment_count() - 1 - loc.segment;
    canon_loc(rlift, loc.component, j, rat_i(1) - &loc.t)
}

/// Walks along one component from one position to another, both directions.
fn side_paths(lift: &LiftPolyline, from: &Loc, to: &Loc, cap: &Rat) -> Vec<SidePath> {
    let mut out = walk_paths(lift, from, to, cap);
    let rlift = reverse_lift(lift);
    let rfrom = reverse_loc(lift, &rlift, from);
    let rto = reverse_loc(lift, &rlift, to);
    out.extend(walk_paths(&rlift, &rfrom, &rto, cap));
    out
}

// ---------------------------------------------------------------------------
// Disk tests.

fn dedup_cycle(poly: &mut Vec<PlanePoint>) {
    poly.dedup();
    while poly.len() >= 2 && poly.first() == poly.last() {
        poly.pop();
    }
}

/// Twice the signed area.
fn area2(poly: &[PlanePoint]) -> Rat {
    let mut acc = rat_i(0);
    for i in 0..poly.len() {
        let a = &poly[i];
        let b = &poly[(i + 1) % poly.len()];
        acc = acc + a.cross(b);
    }
    acc
}

fn polygon_simple(poly: &[PlanePoint]) -> bool {
    let m = poly.len();
    for i in 0..m {
        let a1 = &poly[i];
        let a2 = &poly[(i + 1) % m];
        for j in i + 1..m {
            let b1 = &poly[j];
            let b2 = &poly[(j + 1) % m];
            let hits = segment_intersections(a1, a2, b1, b2);
            if j == i + 1 || (i == 0 && j == m - 1) {
                let shared = if j == i + 1 { b1 } else { a1 };
                if hits.iter().any(|h| &h.point != shared) {
                    return false;
                }
            } else if !hits.is_empty() {
                return false;
            }
        }
    }
    true
}

fn point_on_segment(p: &PlanePoint, a: &PlanePoint, b: &PlanePoint) -> bool {
    let d = b.sub(a);
    let r = p.sub(a);
    if !d.cross(&r).is_zero() {
        return false;
    }
    let t = d.dot(&r);
    !t.is_negative() && t <= d.dot(&d)
}

fn point_inside(p: &PlanePoint, poly: &[PlanePoint]) -> bool {
    let mut inside = false;
    for i in 0..poly.len() {
        let a = &poly[i];
        let b = &poly[(i + 1) % poly.len()];
        if (a.gamma <= p.gamma) != (b.gamma <= p.gamma) {
            let t = (&p.gamma - &a.gamma) / (&b.gamma - &a.gamma);
            let yc = &a.theta + t * (&b.theta - &a.theta);
            if yc > p.theta {
                inside = !inside;
            }
        }
    }
    inside
}

/// No corner lift strictly inside or on the polygon.
fn lattice_free(poly: &[PlanePoint]) -> bool {
    let mut glo = poly[0].gamma.clone();
    let mut ghi = glo.clone();
    let mut tlo = poly[0].theta.clone();
    let mut thi = tlo.clone();
    for v in poly {
        if v.gamma < glo {
            glo = v.gamma.clone();
        }
        if v.gamma > ghi {
            ghi = v.gamma.clone();
        }
        if v.theta < tlo {
            tlo = v.theta.clone();
        }
        if v.theta > thi {
            thi = v.theta.clone();
        }
    }
    let mut g = glo.ceil();
    while g <= ghi.floor() {
        let mut t = tlo.ceil();
        while t <= thi.floor() {
            let p = PlanePoint::new(g.clone(), t.clone());
            for i in 0..poly.len() {
                if point_on_segment(&p, &poly[i], &poly[(i + 1) % poly.len()]) {
                    return false;
                }
            }
            if point_inside(&p, poly) {
                return false;
            }
            t += rat_i(1);
        }
        g += rat_i(1);
    }
    true
}

fn convex_at(poly: &[PlanePoint], i: usize) -> bool {
    let m = poly.len();
    let prev = &poly[(i + m - 1) % m];
    let here = &poly[i];
    let next = &poly[(i + 1) % m];
    here.sub(prev).cross(&next.sub(here)).is_positive()
}

/// Glue developed sides end to start with deck elements and close up.
/// Returns the closed polygon and the developed junction corners, or None
/// when the boundary does not close.
fn assemble(sides: &[&SidePath]) -> Option<(Vec<PlanePoint>, Vec<PlanePoint>)> {
    let mut poly = sides[0].verts.clone();
    let mut junctions = vec![poly[0].clone()];
    for side in &sides[1..] {
        let end = poly.last().unwrap().clone();
        let d = deck_between(&side.verts[0], &end)?;
        junctions.push(end);
        for v in &side.verts[1..] {
            poly.push(d.apply(v));
        }
    }
    if poly.last() != Some(&poly[0]) {
        return None;
    }
    poly.pop();
    dedup_cycle(&mut poly);
    if poly.len() < 3 {
        return None;
    }
    Some((poly, junctions))
}

/// Accept a closed candidate: positively oriented, embedded, convex at the
/// listed junctions, and clear of corner lifts.
fn accept_disk(poly: &[PlanePoint], junctions: &[PlanePoint]) -> bool {
    if !area2(poly).is_positive() {
        return false;
    }
    if !polygon_simple(poly) {
        return false;
    }
    for j in junctions {
        match poly.iter().position(|v| v == j) {
            Some(i) => {
                if !convex_at(poly, i) {
                    return false;
                }
            }
            None => return false,
        }
    }
    lattice_free(poly)
}

fn check_budget(sides: &[&SidePath], budget: &Rat) -> Result<(), FloerError> {
    for s in sides {
        if s.len > *budget {
            return Err(FloerError::BudgetExceeded {
                budget: rat_str(budget),
                needed: rat_str(&s.len),
            });
        }
    }
    Ok(())
}

/// Immersed bigons from x to y: side 1 runs along the first curve, side 2
/// along the second, and the positively oriented boundary traverses side 1
/// from x to y. Disks whose sides close up just beyond the budget raise the
/// budget error; the search does not look past twice the budget.
pub fn bigons(
    l1: &Multicurve,
    l2: &Multicurve,
    x: &Generator,
    y: &Generator,
    budget: &Rat,
) -> Result<Vec<DiskWitness>, FloerError> {
    if x == y
        || x.loc1.component != y.loc1.component
        || x.loc2.component != y.loc2.component
    {
        return Ok(Vec::new());
    }
    let cap = rat_i(2) * budget;
    let p1s = side_paths(&l1.components[x.loc1.component].lift, &x.loc1, &y.loc1, &cap);
    let p2s = side_paths(&l2.components[x.loc2.component].lift, &x.loc2, &y.loc2, &cap);
    let mut out = Vec::new();
    for p1 in &p1s {
        for p2 in &p2s {
            let mut rev = p2.verts.clone();
            rev.reverse();
            let back = SidePath { verts: rev, len: p2.len.clone() };
            let Some((poly, junctions)) = assemble(&[p1, &back]) else { continue };
            if !accept_disk(&poly, &junctions) {
                continue;
            }
            check_budget(&[p1, p2], budget)?;
            out.push(DiskWitness { boundary: poly });
        }
    }
    Ok(out)
}

pub fn count_bigons(
    l1: &Multicurve,
    l2: &Multicurve,
    x: &Generator,
    y: &Generator,
    budget: &Rat,
) -> Result<usize, FloerError> {
    bigons(l1, l2, x, y, budget).map(|w| w.len())
}

/// Immersed triangles with corners x, y and the cochain vertex b: one side
/// on the curve not carrying b (from x to y), two sides on the carrying
/// curve (y to b, then b to x through the other branch).
pub fn triangles_with_cochain(
    l1: &Multicurve,
    l2: &Multicurve,
    b: &CochainSite,
    x: &Generator,
    y: &Generator,
    budget: &Rat,
) -> Result<Vec<DiskWitness>, FloerError> {
    if x == y {
        return Ok(Vec::new());
    }
    let (lo, ls) = if b.on_first { (l2, l1) } else { (l1, l2) };
    let (xo, yo) = if b.on_first { (&x.loc2, &y.loc2) } else { (&x.loc1, &y.loc1) };
    let (xs, ys) = if b.on_first { (&x.loc1, &y.loc1) } else { (&x.loc2, &y.loc2) };
    if xo.component != yo.component {
        return Ok(Vec::new());
    }
    let cap = rat_i(2) * budget;
    let pos = side_paths(&lo.components[xo.component].lift, xo, yo, &cap);
    let mut out = Vec::new();
    for (bin, bout) in [(&b.site.loc_a, &b.site.loc_b), (&b.site.loc_b, &b.site.loc_a)] {
        if ys.component != bin.component || xs.component != bout.component {
            continue;
        }
        let pas = side_paths(&ls.components[ys.component].lift, ys, bin, &cap);
        let pbs = side_paths(&ls.components[bout.component].lift, bout, xs, &cap);
        for po in &pos {
            for pa in &pas {
                for pb in &pbs {
                    let Some((poly, junctions)) = assemble(&[po, pa, pb]) else { continue };
                    if !accept_disk(&poly, &junctions) {
                        continue;
                    }
                    check_budget(&[po, pa, pb], budget)?;
                    out.push(DiskWitness { boundary: poly });
                }
            }
        }
    }
    Ok(out)
}

pub fn count_triangles_with_cochain(
    l1: &Multicurve,
    l2: &Multicurve,
    b: &CochainSite,
    x: &Generator,
    y: &Generator,
    budget: &Rat,
) -> Result<usize, FloerError> {
    triangles_with_cochain(l1, l2, b, x, y, budget).map(|w| w.len())
}

// ---------------------------------------------------------------------------
// Chain data.

/// Generators with the F2 differential and the raw disk counts behind it.
#[derive(Clone, Debug)]
pub struct ChainData {
    pub generators: Vec<Generator>,
    /// bigon_counts[i][j]: accepted bigons from generator i to generator j.
    pub bigon_counts: Vec<Vec<usize>>,
    /// Triangle counts through the cochain vertex, when one was designated.
    pub triangle_counts: Option<Vec<Vec<usize>>>,
    /// Bigon parity, deformed by triangle parity when a cochain is present.
    pub differential: Vec<Vec<u8>>,
}

fn rank_f2(mut m: Vec<Vec<u8>>) -> usize {
    let rows = m.len();
    if rows == 0 {
        return 0;
    }
    let cols = m[0].len();
    let mut rank = 0;
    let mut row = 0;
    for col in 0..cols {
        let Some(p) = (row..rows).find(|&r| m[r][col] == 1) else { continue };
        m.swap(row, p);
        for r in 0..rows {
            if r != row && m[r][col] == 1 {
                for c in 0..cols {
                    m[r][c] ^= m[row][c];
                }
            }
        }
        rank += 1;
        row += 1;
        if row == rows {
            break;
        }
    }
    rank
}

impl ChainData {
    /// Number of nonzero differential entries.
    pub fn differential_entries(&self) -> usize {
        self.differential.iter().flatten().filter(|&&e| e == 1).count()
    }

    pub fn rank_f2(&self) -> usize {
        rank_f2(self.differential.clone())
    }

    /// Rank of the homology over F2, after checking d squares to zero.
    pub fn homology_rank(&self) -> Result<usize, FloerError> {
        let n = self.generators.len();
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0u8;
                for k in 0..n {
                    acc ^= self.differential[i][k] & self.differential[k][j];
                }
                if acc != 0 {
                    return Err(FloerError::NotSquareZero { column: j });
                }
            }
        }
        Ok(n - 2 * self.rank_f2())
    }
}

pub fn homology_rank(c: &ChainData) -> Result<usize, FloerError> {
    c.homology_rank()
}

pub fn chain_data(l1: &Multicurve, l2: &Multicurve, budget: &Rat) -> Result<ChainData, FloerError> {
    let generators = intersect(l1, l2)?;
    let n = generators.len();
    let mut bigon_counts = vec![vec![0usize; n]; n];
    let mut differential = vec![vec![0u8; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let c = count_bigons(l1, l2, &generators[i], &generators[j], budget)?;
            bigon_counts[i][j] = c;
            differential[i][j] = (c % 2) as u8;
        }
    }
    Ok(ChainData { generators, bigon_counts, triangle_counts: None, differential })
}

/// The designatable self-crossings of the pair: all of the first curve's,
/// then all of the second's, each sorted.
pub fn cochain_sites(l1: &Multicurve, l2: &Multicurve) -> Result<Vec<CochainSite>, FloerError> {
    let mut out = Vec::new();
    for site in self_intersections(l1)? {
        out.push(CochainSite { on_first: true, site });
    }
    for site in self_intersections(l2)? {
        out.push(CochainSite { on_first: false, site });
    }
    Ok(out)
}

/// Chain data with the differential deformed by triangles through the
/// indexed self-crossing.
pub fn chain_data_with_cochain(
    l1: &Multicurve,
    l2: &Multicurve,
    index: usize,
    budget: &Rat,
) -> Result<(ChainData, CochainSite), FloerError> {
    let sites = cochain_sites(l1, l2)?;
    let site = sites
        .get(index)
        .cloned()
        .ok_or(FloerError::CochainIndex { index, available: sites.len() })?;
    let mut cd = chain_data(l1, l2, budget)?;
    let n = cd.generators.len();
    let mut tri = vec![vec![0usize; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let c = count_triangles_with_cochain(
                l1,
                l2,
                &site,
                &cd.generators[i],
                &cd.generators[j],
                budget,
            )?;
            tri[i][j] = c;
            cd.differential[i][j] ^= (c % 2) as u8;
        }
    }
    cd.triangle_counts = Some(tri);
    Ok((cd, site))
}

// ---------------------------------------------------------------------------
// Transversality-restoring shears.

fn sheared_multicurve(l: &Multicurve, s: &Shear) -> Multicurve {
    Multicurve {
        components: l
            .components
            .iter()
            .map(|c| Component {
                kind: c.kind,
                lift: s.apply(&c.lift),
                tags: c.tags.clone(),
                endpoint_corners: c.endpoint_corners.clone(),
            })
            .collect(),
    }
}

/// Chain data with a deterministic auto-shear pass: if the pair is not
/// transverse, tent shears of shrinking amount are applied to the first
/// curve until it is. Returns the shear that was needed, if any.
pub fn chain_data_auto(
    l1: &Multicurve,
    l2: &Multicurve,
    cochain: Option<usize>,
    budget: &Rat,
) -> Result<(ChainData, Option<Shear>), FloerError> {
    let run = |c1: &Multicurve| -> Result<ChainData, FloerError> {
        match cochain {
            None => chain_data(c1, l2, budget),
            Some(ix) => chain_data_with_cochain(c1, l2, ix, budget).map(|(cd, _)| cd),
        }
    };
    let first = match run(l1) {
        Ok(cd) => return Ok((cd, None)),
        Err(e @ FloerError::NotTransverse { .. }) => e,
        Err(e) => return Err(e),
    };
    for k in 12..=40u32 {
        let amount = Rat::new(1.into(), num_bigint::BigInt::from(2).pow(k));
        for dir in [ShearDirection::Theta, ShearDirection::Gamma] {
            for sgn in [1i64, -1] {
                let shear = Shear::tent(dir, rat_i(sgn) * &amount);
                match run(&sheared_multicurve(l1, &shear)) {
                    Ok(cd) => return Ok((cd, Some(shear))),
                    Err(FloerError::NotTransverse { .. }) => continue,
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Err(first)
}
