//! Curves on the pillowcase.
//!
//! Evaluates a tangle expression into a multicurve: each rational tangle
//! contributes a straight arc, the modifying operations act through the
//! mapping-class action on the plane, and a sum of two curves is assembled
//! fiberwise over gamma. The theta-fibers of a sum are generically points
//! (the "arc part" of the result) except over finitely many edge crossings,
//! where a whole circle appears; those circle fibers are reported separately
//! and can be resolved into honest curve segments by [`resolve_circles`].

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::exactgeom::{
    apply_psl2z, deck_between, fold_polyline, normalize, rat, rat_i, Corner, Deck, LiftPolyline,
    PillowPoint, PlanePoint, Rat, RationalAngle, Shear, ShearDirection,
};
use crate::tangle::TangleExpr;

/// Provenance markers carried by multicurve components.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Tag {
    /// Arc of binary dihedral representations (ends at corners).
    BinaryDihedral,
    /// Closed arc-part component of a sum.
    HCircle,
    /// Component containing at least one circle-resolution bridge.
    ResolvedArc,
    /// Parallel push-off of a closed component under the earring modification.
    EarringCopy,
    /// Figure-eight closure of an arc under the earring modification.
    FigureEight,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ComponentKind {
    Arc,
    Circle,
}

/// One immersed curve, stored as a lift.
#[derive(Clone, Debug)]
pub struct Component {
    pub kind: ComponentKind,
    pub lift: LiftPolyline,
    pub tags: BTreeSet<Tag>,
    /// For arcs: the corners the endpoints sit on. For figure-eight
    /// components: the two corners the curve wraps.
    pub endpoint_corners: Vec<Corner>,
}

#[derive(Clone, Debug, Default)]
pub struct Multicurve {
    pub components: Vec<Component>,
}

/// Which end of a component's polyline.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum WhichEnd {
    Start,
    End,
}

/// Side of the arc part approaching a circle fiber: Plus carries unreduced
/// theta-sum in (0, pi), Minus in (pi, 2 pi).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ASide {
    Plus,
    Minus,
}

/// An arc-part endpoint landing on a circle fiber.
#[derive(Clone, Debug)]
pub struct AttachedEnd {
    pub component: usize,
    pub end: WhichEnd,
    /// Lands on the singular point at theta_min (else theta_max).
    pub at_min: bool,
    /// None exactly when the fiber is a corner circle and this end hits the
    /// degenerate side.
    pub side: Option<ASide>,
}

/// A circle fiber of a sum, sitting over a single edge point gamma0.
#[derive(Clone, Debug)]
pub struct CircleFiber {
    /// 0 or 1 in pi-units: which pillowcase edge carries the fiber.
    pub gamma0: Rat,
    /// Edge-crossing angle of the first summand.
    pub theta1: RationalAngle,
    /// Edge-crossing angle of the second summand.
    pub theta2: RationalAngle,
    pub theta_min: RationalAngle,
    pub theta_max: RationalAngle,
    /// True when theta1 = theta2 or theta1 + theta2 = pi, i.e. the circle
    /// reaches a corner and the transverse-circle picture degenerates.
    pub corner_circle: bool,
    pub attached: Vec<AttachedEnd>,
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    /// Resolve circle fibers of sums into curve segments.
    pub resolve: bool,
    /// Gamma-distance from the edge at which resolution bridges start.
    pub eps: Rat,
    /// Offset of the parallel copies in the earring modification.
    pub earring_eps: Rat,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { resolve: true, eps: rat(1, 50), earring_eps: rat(1, 100) }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("summand has a vertical segment at gamma = {gamma}; shear it first")]
    VerticalSegment { gamma: Rat },
    #[error("summand touches a pillowcase edge without crossing it; shear it first")]
    EdgeTangency,
    #[error("summand reverses gamma-direction away from the pillowcase edges; shear it first")]
    InteriorReversal,
    #[error("summand passes through a pillowcase corner; shear it first")]
    CornerThrough,
    #[error("summand arc does not end at corners and cannot be summed")]
    ArcEndNotCorner,
    #[error("earring-modified curves cannot be summed")]
    EarringInSum,
    #[error("earring modification requires arcs with both endpoints at corners")]
    EarringNeedsCorners,
    #[error("sum has {count} unresolved circle fibers; enable resolution or resolve explicitly")]
    UnresolvedCircles { count: usize },
    #[error(
        "corner circle over gamma = {gamma0} pi (theta1 = {theta1} pi, theta2 = {theta2} pi); \
         shear a summand first, e.g. with remove_corner_circles"
    )]
    CornerCircle { gamma0: Rat, theta1: Rat, theta2: Rat },
    #[error("{0}")]
    InvalidParameter(String),
}

/// Evaluate a tangle expression into a multicurve.
pub fn eval(e: &TangleExpr, opts: &EvalOptions) -> Result<Multicurve, EvalError> {
    match e {
        TangleExpr::Rational(p, q) => Ok(rational_curve(*p, *q)),
        TangleExpr::Rotate(inner) => Ok(transform(&eval(inner, opts)?, [[0, -1], [1, 0]])),
        TangleExpr::Twist(inner, n) => Ok(transform(&eval(inner, opts)?, [[1, 0], [*n, 1]])),
        TangleExpr::Mirror(inner) | TangleExpr::Hat(inner) => {
            Ok(transform(&eval(inner, opts)?, [[1, 0], [0, -1]]))
        }
        TangleExpr::Sheared(inner, shear) => {
            let mc = eval(inner, opts)?;
            Ok(Multicurve {
                components: mc
                    .components
                    .iter()
                    .map(|c| Component { lift: shear.apply(&c.lift), ..c.clone() })
                    .collect(),
            })
        }
        TangleExpr::Earring(inner) => earring(&eval(inner, opts)?, &opts.earring_eps),
        TangleExpr::Sum(a, b) => {
            let la = eval(a, opts)?;
            let lb = eval(b, opts)?;
            let (a_part, fibers) = sum_curves(&la, &lb)?;
            if fibers.is_empty() {
                Ok(a_part)
            } else if !opts.resolve {
                Err(EvalError::UnresolvedCircles { count: fibers.len() })
            } else {
                resolve_circles(&a_part, &fibers, &opts.eps)
            }
        }
    }
}

/// The arc of a rational tangle: the straight lift (0,0)-(q,p).
fn rational_curve(p: i64, q: i64) -> Multicurve {
    let a = PlanePoint::from_ints(0, 1, 0, 1);
    let b = PlanePoint::from_ints(q, 1, p, 1);
    let mut tags = BTreeSet::new();
    tags.insert(Tag::BinaryDihedral);
    let corners = vec![
        normalize(&a).corner().expect("corner lift"),
        normalize(&b).corner().expect("corner lift"),
    ];
    Multicurve {
        components: vec![Component {
            kind: ComponentKind::Arc,
            lift: LiftPolyline::open(vec![a, b]),
            tags,
            endpoint_corners: corners,
        }],
    }
}

fn map_corner(m: [[i64; 2]; 2], c: Corner) -> Corner {
    let (g, t) = c.coords();
    let p = PlanePoint::new(
        rat_i(m[0][0]) * &g + rat_i(m[0][1]) * &t,
        rat_i(m[1][0]) * &g + rat_i(m[1][1]) * &t,
    );
    normalize(&p).corner().expect("corners map to corners")
}

/// Apply an integral mapping-class matrix to every component.
fn transform(mc: &Multicurve, m: [[i64; 2]; 2]) -> Multicurve {
    Multicurve {
        components: mc
            .components
            .iter()
            .map(|c| Component {
                kind: c.kind,
                lift: apply_psl2z(m, &c.lift),
                tags: c.tags.clone(),
                endpoint_corners: c.endpoint_corners.iter().map(|&cc| map_corner(m, cc)).collect(),
            })
            .collect(),
    }
}

fn theta_mod2(r: &Rat) -> Rat {
    let two = rat_i(2);
    r - (r / &two).floor() * two
}

/// Fold an unreduced theta value onto the edge interval [0, 1].
fn edge_fold(r: &Rat) -> Rat {
    let v = theta_mod2(r);
    if v > rat_i(1) {
        rat_i(2) - v
    } else {
        v
    }
}

fn nearest_int(r: &Rat) -> BigInt {
    (r + rat(1, 2)).floor().to_integer()
}

// ---------------------------------------------------------------------------
// Fiberwise sum.

/// Geometric end of a gamma-monotone branch: Lo at gamma = 0, Hi at gamma = 1.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum BEnd {
    Lo,
    Hi,
}

impl BEnd {
    fn flip(self) -> BEnd {
        match self {
            BEnd::Lo => BEnd::Hi,
            BEnd::Hi => BEnd::Lo,
        }
    }

    fn of_gamma(g: &Rat) -> BEnd {
        if g.is_zero() {
            BEnd::Lo
        } else {
            debug_assert!(g.is_one());
            BEnd::Hi
        }
    }
}

/// A maximal gamma-monotone run of a summand, as a graph over [0, 1].
/// Points ascend in gamma; theta is a continuous unfolding of the chart
/// value, so it agrees with the standardized coordinate mod 2.
struct FBranch {
    pts: Vec<PlanePoint>,
}

enum FEvent {
    /// Transversal edge crossing joining two branch ends; t is the folded
    /// crossing angle in (0, 1).
    Crossing { t: Rat, ends: [(usize, BEnd); 2] },
    /// Arc endpoint at a corner.
    Corner,
}

struct Factor {
    branches: Vec<FBranch>,
    events: Vec<FEvent>,
    at_end: BTreeMap<(usize, BEnd), usize>,
}

impl Factor {
    /// The branch end the curve continues into past an edge event; corners
    /// are fixed points.
    fn sigma(&self, be: (usize, BEnd)) -> (usize, BEnd) {
        match &self.events[self.at_end[&be]] {
            FEvent::Corner => be,
            FEvent::Crossing { ends, .. } => {
                if ends[0] == be {
                    ends[1]
                } else {
                    ends[0]
                }
            }
        }
    }

    fn is_crossing(&self, be: (usize, BEnd)) -> Option<usize> {
        let ev = self.at_end[&be];
        match self.events[ev] {
            FEvent::Crossing { .. } => Some(ev),
            FEvent::Corner => None,
        }
    }
}

fn build_factor(mc: &Multicurve) -> Result<Factor, EvalError> {
    let mut f = Factor { branches: vec![], events: vec![], at_end: BTreeMap::new() };
    for comp in &mc.components {
        if comp.tags.contains(&Tag::EarringCopy) || comp.tags.contains(&Tag::FigureEight) {
            return Err(EvalError::EarringInSum);
        }
        factor_component(&mut f, &comp.lift)?;
    }
    Ok(f)
}

fn factor_component(f: &mut Factor, lift: &LiftPolyline) -> Result<(), EvalError> {
    let mut segs = fold_polyline(lift);
    for s in &segs {
        if s.a.gamma == s.b.gamma {
            return Err(EvalError::VerticalSegment { gamma: s.a.gamma.clone() });
        }
    }
    let dir = |a: &PlanePoint, b: &PlanePoint| if b.gamma > a.gamma { 1i8 } else { -1 };

    if lift.closed {
        let n = segs.len();
        let flip = (0..n).find(|&i| {
            let prev = &segs[(i + n - 1) % n];
            dir(&prev.a, &prev.b) != dir(&segs[i].a, &segs[i].b)
        });
        let Some(flip) = flip else {
            // A closed chart traversal cannot be gamma-monotone throughout.
            return Err(EvalError::InteriorReversal);
        };
        segs.rotate_left(flip);
    }

    // Maximal monotone runs, as half-open seg-index ranges.
    let mut runs: Vec<(usize, usize)> = vec![];
    let mut start = 0usize;
    for i in 1..segs.len() {
        if dir(&segs[i].a, &segs[i].b) != dir(&segs[start].a, &segs[start].b) {
            runs.push((start, i));
            start = i;
        }
    }
    runs.push((start, segs.len()));

    let base = f.branches.len();

    // Edge events between consecutive runs (cyclically for closed curves).
    // Classifying these first rejects every curve that is not a union of
    // edge-to-edge monotone branches.
    let pairs = if lift.closed { runs.len() } else { runs.len() - 1 };
    for k in 0..pairs {
        let k2 = (k + 1) % runs.len();
        let pin = &segs[runs[k].1 - 1].b;
        let pout = &segs[runs[k2].0].a;
        if pin == pout {
            return Err(if pin.gamma.is_zero() || pin.gamma.is_one() {
                EvalError::EdgeTangency
            } else {
                EvalError::InteriorReversal
            });
        }
        assert_eq!(pin.gamma, pout.gamma, "direction flips happen on one chart line");
        let t = edge_fold(&pin.theta);
        if t.is_zero() || t.is_one() {
            return Err(EvalError::CornerThrough);
        }
        let end = BEnd::of_gamma(&pin.gamma);
        let ends = [(base + k, end), (base + k2, end)];
        let ev = f.events.len();
        f.events.push(FEvent::Crossing { t, ends });
        f.at_end.insert(ends[0], ev);
        f.at_end.insert(ends[1], ev);
    }

    if !lift.closed {
        for (run, pt) in [(0usize, &segs[0].a), (runs.len() - 1, &segs[segs.len() - 1].b)] {
            if !(pt.gamma.is_integer() && pt.theta.is_integer()) {
                return Err(EvalError::ArcEndNotCorner);
            }
            let ev = f.events.len();
            f.events.push(FEvent::Corner);
            f.at_end.insert((base + run, BEnd::of_gamma(&pt.gamma)), ev);
        }
    }

    for &(lo, hi) in &runs {
        let d = dir(&segs[lo].a, &segs[lo].b);
        // Unfold theta continuously across interior theta-folds: consecutive
        // chart points of one run agree in gamma and differ in theta by 0 or
        // an even translate.
        let mut pts = vec![segs[lo].a.clone()];
        let mut off = Rat::zero();
        for i in lo..hi {
            if i > lo {
                debug_assert_eq!(segs[i - 1].b.gamma, segs[i].a.gamma);
                off = &off + &segs[i - 1].b.theta - &segs[i].a.theta;
            }
            pts.push(PlanePoint::new(segs[i].b.gamma.clone(), &segs[i].b.theta + &off));
        }
        if d < 0 {
            pts.reverse();
        }
        assert!(pts.first().unwrap().gamma.is_zero() && pts.last().unwrap().gamma.is_one());
        f.branches.push(FBranch { pts });
    }
    Ok(())
}

/// Piecewise-linear graph evaluation along ascending gamma queries.
struct PlWalk<'a> {
    pts: &'a [PlanePoint],
    k: usize,
}

impl<'a> PlWalk<'a> {
    fn new(pts: &'a [PlanePoint]) -> Self {
        PlWalk { pts, k: 0 }
    }

    fn at(&mut self, g: &Rat) -> Rat {
        while self.k + 2 < self.pts.len() && self.pts[self.k + 1].gamma <= *g {
            self.k += 1;
        }
        let a = &self.pts[self.k];
        let b = &self.pts[self.k + 1];
        if a.gamma == *g {
            return a.theta.clone();
        }
        &a.theta + (&b.theta - &a.theta) * (g - &a.gamma) / (&b.gamma - &a.gamma)
    }
}

/// One component of the fiber product of two branches: the graph of
/// theta1(gamma) + theta2(gamma) over [0, 1].
struct Piece {
    pts: Vec<PlanePoint>,
    b1: usize,
    b2: usize,
}

fn product_piece(a: &FBranch, b: &FBranch, b1: usize, b2: usize) -> Piece {
    let mut gammas: BTreeSet<&Rat> = BTreeSet::new();
    gammas.extend(a.pts.iter().map(|p| &p.gamma));
    gammas.extend(b.pts.iter().map(|p| &p.gamma));
    let mut wa = PlWalk::new(&a.pts);
    let mut wb = PlWalk::new(&b.pts);
    let pts = gammas
        .into_iter()
        .map(|g| PlanePoint::new(g.clone(), wa.at(g) + wb.at(g)))
        .collect();
    Piece { pts, b1, b2 }
}

#[derive(Clone, PartialEq, Debug)]
enum EndLink {
    /// Corner x corner: an endpoint of the arc part.
    Terminal,
    /// Corner x crossing (either way): the arc part continues into another
    /// piece across the edge.
    Glue(usize, BEnd),
    /// Crossing x crossing: the piece end lands on a circle fiber.
    Germ { fiber: usize, v: Rat },
}

struct FiberBuild {
    edge: BEnd,
    t1: Rat,
    t2: Rat,
    /// (piece, end, unreduced theta-sum mod 2) plus the attachment filled in
    /// during assembly.
    germs: Vec<(usize, BEnd, Rat)>,
    attached: Vec<AttachedEnd>,
}

/// Fiberwise sum of two multicurves. Returns the arc part together with the
/// circle fibers; arc-part components that end on a fiber are open arcs whose
/// loose ends are referenced by the fiber's `attached` list.
pub fn sum_curves(l1: &Multicurve, l2: &Multicurve) -> Result<(Multicurve, Vec<CircleFiber>), EvalError> {
    let f1 = build_factor(l1)?;
    let f2 = build_factor(l2)?;

    let mut pieces: Vec<Piece> = vec![];
    let mut piece_idx: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (i, a) in f1.branches.iter().enumerate() {
        for (j, b) in f2.branches.iter().enumerate() {
            piece_idx.insert((i, j), pieces.len());
            pieces.push(product_piece(a, b, i, j));
        }
    }

    let mut fibers: Vec<FiberBuild> = vec![];
    let mut fiber_idx: BTreeMap<(BEnd, usize, usize), usize> = BTreeMap::new();
    let mut links: Vec<[EndLink; 2]> = Vec::with_capacity(pieces.len());
    for p in &pieces {
        let mut pair = [EndLink::Terminal, EndLink::Terminal];
        for (slot, end) in [(0usize, BEnd::Lo), (1, BEnd::Hi)] {
            let e1 = (p.b1, end);
            let e2 = (p.b2, end);
            pair[slot] = match (f1.is_crossing(e1), f2.is_crossing(e2)) {
                (Some(c1), Some(c2)) => {
                    let fiber = *fiber_idx.entry((end, c1, c2)).or_insert_with(|| {
                        let t = |f: &Factor, ev: usize| match &f.events[ev] {
                            FEvent::Crossing { t, .. } => t.clone(),
                            FEvent::Corner => unreachable!(),
                        };
                        fibers.push(FiberBuild {
                            edge: end,
                            t1: t(&f1, c1),
                            t2: t(&f2, c2),
                            germs: vec![],
                            attached: vec![],
                        });
                        fibers.len() - 1
                    });
                    let endpoint = match end {
                        BEnd::Lo => p.pts.first().unwrap(),
                        BEnd::Hi => p.pts.last().unwrap(),
                    };
                    let v = theta_mod2(&endpoint.theta);
                    fibers[fiber].germs.push((piece_idx[&(p.b1, p.b2)], end, v.clone()));
                    EndLink::Germ { fiber, v }
                }
                (None, None) => EndLink::Terminal,
                _ => {
                    let (s1, _) = f1.sigma(e1);
                    let (s2, _) = f2.sigma(e2);
                    EndLink::Glue(piece_idx[&(s1, s2)], end)
                }
            };
        }
        links.push(pair);
    }

    // Assemble pieces into components by developing across the glue links.
    let end_pt = |p: &Piece, e: BEnd| match e {
        BEnd::Lo => p.pts.first().unwrap().clone(),
        BEnd::Hi => p.pts.last().unwrap().clone(),
    };
    let slot = |e: BEnd| match e {
        BEnd::Lo => 0usize,
        BEnd::Hi => 1,
    };

    let mut starts: Vec<(usize, BEnd)> = vec![];
    for want_terminal in [true, false] {
        for (i, l) in links.iter().enumerate() {
            for e in [BEnd::Lo, BEnd::Hi] {
                let is_term = l[slot(e)] == EndLink::Terminal;
                let is_germ = matches!(l[slot(e)], EndLink::Germ { .. });
                if (want_terminal && is_term) || (!want_terminal && is_germ) {
                    starts.push((i, e));
                }
            }
        }
    }
    starts.extend((0..pieces.len()).map(|i| (i, BEnd::Lo)));

    let mut visited = vec![false; pieces.len()];
    let mut components: Vec<Component> = vec![];
    for (p0, e0) in starts {
        if visited[p0] {
            continue;
        }
        let comp_idx = components.len();
        let mut frame = Deck::identity();
        let mut verts: Vec<PlanePoint> = vec![];
        let mut corners: Vec<Corner> = vec![];
        let (mut p, mut entry) = (p0, e0);
        // Record what the walk starts on.
        match &links[p0][slot(e0)] {
            EndLink::Terminal => {
                corners.push(normalize(&end_pt(&pieces[p0], e0)).corner().expect("corner end"));
            }
            EndLink::Germ { fiber, v } => {
                attach_germ(&mut fibers[*fiber], comp_idx, WhichEnd::Start, v);
            }
            EndLink::Glue(..) => {}
        }
        let (closed, monodromy) = loop {
            visited[p] = true;
            let iter: Box<dyn Iterator<Item = &PlanePoint>> = match entry {
                BEnd::Lo => Box::new(pieces[p].pts.iter()),
                BEnd::Hi => Box::new(pieces[p].pts.iter().rev()),
            };
            for pt in iter {
                let w = frame.apply(pt);
                if verts.last() != Some(&w) {
                    verts.push(w);
                }
            }
            let exit = entry.flip();
            match links[p][slot(exit)].clone() {
                EndLink::Terminal => {
                    corners.push(normalize(verts.last().unwrap()).corner().expect("corner end"));
                    break (false, None);
                }
                EndLink::Germ { fiber, v } => {
                    attach_germ(&mut fibers[fiber], comp_idx, WhichEnd::End, &v);
                    break (false, None);
                }
                EndLink::Glue(p2, e2) => {
                    let stored = end_pt(&pieces[p2], e2);
                    let d = deck_between(&stored, verts.last().unwrap())
                        .expect("glued germs are deck equivalent");
                    if (p2, e2) == (p0, e0) {
                        if d.is_identity() {
                            verts.pop();
                            break (true, None);
                        }
                        break (true, Some(d));
                    }
                    frame = d;
                    p = p2;
                    entry = e2;
                }
            }
        };
        let lift = if closed {
            match monodromy {
                None => LiftPolyline::closed_loop(verts),
                Some(m) => LiftPolyline::closed_with_monodromy(verts, m),
            }
        } else {
            LiftPolyline::open(verts)
        };
        let mut tags = BTreeSet::new();
        if closed {
            tags.insert(Tag::HCircle);
        } else if !corners.is_empty() {
            tags.insert(Tag::BinaryDihedral);
        }
        components.push(Component {
            kind: if closed { ComponentKind::Circle } else { ComponentKind::Arc },
            lift,
            tags,
            endpoint_corners: corners,
        });
    }

    let circles = fibers
        .into_iter()
        .map(|fb| {
            assert_eq!(fb.attached.len(), 4, "a circle fiber meets four arc-part germs");
            let d = (&fb.t1 - &fb.t2).abs();
            let s = &fb.t1 + &fb.t2;
            let smax = if s <= rat_i(1) { s.clone() } else { rat_i(2) - &s };
            CircleFiber {
                gamma0: match fb.edge {
                    BEnd::Lo => rat_i(0),
                    BEnd::Hi => rat_i(1),
                },
                corner_circle: d.is_zero() || smax.is_one(),
                theta1: RationalAngle(fb.t1),
                theta2: RationalAngle(fb.t2),
                theta_min: RationalAngle(d),
                theta_max: RationalAngle(smax),
                attached: fb.attached,
            }
        })
        .collect();

    Ok((Multicurve { components }, circles))
}

fn attach_germ(fb: &mut FiberBuild, component: usize, end: WhichEnd, v: &Rat) {
    let tmin = (&fb.t1 - &fb.t2).abs();
    let side = if v > &rat_i(0) && v < &rat_i(1) {
        Some(ASide::Plus)
    } else if v > &rat_i(1) && v < &rat_i(2) {
        Some(ASide::Minus)
    } else {
        None
    };
    fb.attached.push(AttachedEnd { component, end, at_min: edge_fold(v) == tmin, side });
}

// ---------------------------------------------------------------------------
// Circle resolution.

/// Metadata for a strand end that used to sit on a circle fiber: the edge
/// line it approached, the theta of the removed edge vertex, and the approach
/// side, all in the strand's own (stored) coordinates.
#[derive(Clone, Debug)]
struct EndMeta {
    g0: Rat,
    u: Rat,
    sigma: i8,
}

struct Strand {
    verts: Vec<PlanePoint>,
    tags: BTreeSet<Tag>,
    meta: [Option<EndMeta>; 2],
    bridge: [Option<(usize, usize)>; 2],
}

fn meta_world(m: &EndMeta, f: &Deck) -> EndMeta {
    let p = f.apply(&PlanePoint::new(m.g0.clone(), m.u.clone()));
    EndMeta { g0: p.gamma, u: p.theta, sigma: if f.neg { -m.sigma } else { m.sigma } }
}

/// Deck transformation placing a strand (given by the stored metadata of its
/// former fiber end) across the edge from a strand end already developed to
/// world coordinates, with the short unfolding of the fiber's theta span.
fn bridge_deck(aw: &EndMeta, bs: &EndMeta) -> Deck {
    if bs.sigma == aw.sigma {
        let cg = (&aw.g0 + &bs.g0) / rat_i(2);
        let ct = nearest_int(&((&aw.u + &bs.u) / rat_i(2)));
        Deck::negation_about(&PlanePoint::new(cg, Rat::from_integer(ct)))
    } else {
        let tg = (&aw.g0 - &bs.g0).to_integer();
        let tt = nearest_int(&((&aw.u - &bs.u) / rat_i(2))) * 2;
        Deck::translation(tg, tt)
    }
}

/// Replace every circle fiber by a pair of transverse bridges joining the
/// four arc-part germs at gamma-distance eps from the edge.
pub fn resolve_circles(
    a_part: &Multicurve,
    circles: &[CircleFiber],
    eps: &Rat,
) -> Result<Multicurve, EvalError> {
    if !(eps > &rat_i(0) && eps < &rat(1, 2)) {
        return Err(EvalError::InvalidParameter(format!(
            "resolution scale must lie in (0, 1/2), got {eps}"
        )));
    }
    for c in circles {
        if c.corner_circle {
            return Err(EvalError::CornerCircle {
                gamma0: c.gamma0.clone(),
                theta1: c.theta1.0.clone(),
                theta2: c.theta2.0.clone(),
            });
        }
    }
    if circles.is_empty() {
        return Ok(a_part.clone());
    }

    let mut components: Vec<Component> = vec![];
    let mut strands: Vec<Strand> = vec![];
    let mut strand_of: Vec<Option<usize>> = vec![];
    for comp in &a_part.components {
        if comp.lift.closed {
            strand_of.push(None);
            components.push(comp.clone());
        } else {
            strand_of.push(Some(strands.len()));
            strands.push(Strand {
                verts: comp.lift.vertices.clone(),
                tags: comp.tags.clone(),
                meta: [None, None],
                bridge: [None, None],
            });
        }
    }

    for fiber in circles {
        let mut slots: [Option<(usize, usize)>; 4] = [None; 4];
        for a in &fiber.attached {
            let s = strand_of[a.component].expect("fiber germs sit on open arcs");
            let end = match a.end {
                WhichEnd::Start => 0usize,
                WhichEnd::End => 1,
            };
            let meta = trim_end(&mut strands[s].verts, end, eps);
            strands[s].meta[end] = Some(meta);
            let k = match (a.at_min, a.side.expect("internal fibers have two-sided germs")) {
                (true, ASide::Plus) => 0,
                (true, ASide::Minus) => 1,
                (false, ASide::Plus) => 2,
                (false, ASide::Minus) => 3,
            };
            assert!(slots[k].is_none(), "one germ per fiber slot");
            slots[k] = Some((s, end));
        }
        // Plus at theta_min joins Minus at theta_max and vice versa; both
        // bridges cross the edge inside the circle's theta span.
        for (x, y) in [(0usize, 3usize), (1, 2)] {
            let a = slots[x].expect("complete fiber");
            let b = slots[y].expect("complete fiber");
            strands[a.0].bridge[a.1] = Some(b);
            strands[b.0].bridge[b.1] = Some(a);
        }
    }

    // Re-develop along bridges.
    let mut starts: Vec<(usize, usize)> = vec![];
    for (i, s) in strands.iter().enumerate() {
        for e in 0..2 {
            if s.bridge[e].is_none() {
                starts.push((i, e));
            }
        }
    }
    starts.extend((0..strands.len()).map(|i| (i, 0usize)));

    let mut visited = vec![false; strands.len()];
    for (s0, e0) in starts {
        if visited[s0] {
            continue;
        }
        let mut frame = Deck::identity();
        let mut verts: Vec<PlanePoint> = vec![];
        let mut tags: BTreeSet<Tag> = BTreeSet::new();
        let mut bridged = false;
        let (mut s, mut entry) = (s0, e0);
        let (closed, monodromy) = loop {
            visited[s] = true;
            tags.extend(strands[s].tags.iter().copied());
            let iter: Box<dyn Iterator<Item = &PlanePoint>> = match entry {
                0 => Box::new(strands[s].verts.iter()),
                _ => Box::new(strands[s].verts.iter().rev()),
            };
            verts.extend(iter.map(|p| frame.apply(p)));
            let exit = 1 - entry;
            match strands[s].bridge[exit] {
                None => break (false, None),
                Some((s2, e2)) => {
                    bridged = true;
                    let aw = meta_world(strands[s].meta[exit].as_ref().unwrap(), &frame);
                    let d = bridge_deck(&aw, strands[s2].meta[e2].as_ref().unwrap());
                    if (s2, e2) == (s0, e0) {
                        if d.is_identity() {
                            break (true, None);
                        }
                        verts.push(d.apply(&verts[0]));
                        break (true, Some(d));
                    }
                    frame = d;
                    s = s2;
                    entry = e2;
                }
            }
        };
        if bridged {
            tags.insert(Tag::ResolvedArc);
        }
        let (lift, corners) = if closed {
            let lift = match monodromy {
                None => LiftPolyline::closed_loop(verts),
                Some(m) => LiftPolyline::closed_with_monodromy(verts, m),
            };
            (lift, vec![])
        } else {
            let corners = [verts.first().unwrap(), verts.last().unwrap()]
                .iter()
                .filter_map(|v| normalize(v).corner())
                .collect();
            (LiftPolyline::open(verts), corners)
        };
        components.push(Component {
            kind: if closed { ComponentKind::Circle } else { ComponentKind::Arc },
            lift,
            tags,
            endpoint_corners: corners,
        });
    }
    Ok(Multicurve { components })
}

/// Cut a strand back to gamma-distance eps from the edge vertex at the given
/// end, returning the metadata of the removed approach.
fn trim_end(verts: &mut Vec<PlanePoint>, end: usize, eps: &Rat) -> EndMeta {
    if end == 1 {
        verts.reverse();
        let m = trim_end(verts, 0, eps);
        verts.reverse();
        return m;
    }
    let g0 = verts[0].gamma.clone();
    let u = verts[0].theta.clone();
    assert!(g0.is_integer(), "fiber germs end on an edge line");
    let k = (1..verts.len())
        .find(|&i| (&verts[i].gamma - &g0).abs() >= *eps)
        .expect("strand extends past the resolution scale");
    let a = &verts[k - 1];
    let b = &verts[k];
    let sigma = if b.gamma > g0 { 1i8 } else { -1 };
    let target = &g0 + rat_i(sigma as i64) * eps;
    let t = (&target - &a.gamma) / (&b.gamma - &a.gamma);
    let cut = PlanePoint::new(target, &a.theta + (&b.theta - &a.theta) * &t);
    let mut rest: Vec<PlanePoint> = verts.split_off(k);
    if rest.first() != Some(&cut) {
        rest.insert(0, cut);
    }
    *verts = rest;
    EndMeta { g0, u, sigma }
}

// ---------------------------------------------------------------------------
// Earring modification.

/// Perpendicular of L1-norm eps to a segment direction.
fn l1_normal(d: &PlanePoint, eps: &Rat) -> PlanePoint {
    let l1 = d.gamma.abs() + d.theta.abs();
    PlanePoint::new(-&d.theta * eps / &l1, &d.gamma * eps / &l1)
}

/// Vertex of the offset polyline at v: intersection of the two adjacent
/// offset lines (miter joint).
fn offset_joint(v: &PlanePoint, d_prev: &PlanePoint, d_next: &PlanePoint, eps: &Rat) -> PlanePoint {
    let np = l1_normal(d_prev, eps);
    let nn = l1_normal(d_next, eps);
    let cr = d_prev.cross(d_next);
    if cr.is_zero() {
        debug_assert!(d_prev.dot(d_next) > rat_i(0), "offset of a backtracking joint");
        return v.add(&nn);
    }
    let rhs = nn.sub(&np);
    let t = rhs.cross(d_next) / cr;
    v.add(&np).add(&d_prev.scale(&t))
}

fn offset_open_pts(vs: &[PlanePoint], eps: &Rat) -> Vec<PlanePoint> {
    let n = vs.len();
    let dirs: Vec<PlanePoint> = (0..n - 1).map(|i| vs[i + 1].sub(&vs[i])).collect();
    let mut out = Vec::with_capacity(n);
    out.push(vs[0].add(&l1_normal(&dirs[0], eps)));
    for i in 1..n - 1 {
        out.push(offset_joint(&vs[i], &dirs[i - 1], &dirs[i], eps));
    }
    out.push(vs[n - 1].add(&l1_normal(&dirs[n - 2], eps)));
    out
}

fn offset_closed(lift: &LiftPolyline, eps: &Rat) -> LiftPolyline {
    let vs = &lift.vertices;
    let n = vs.len();
    match &lift.monodromy {
        None => {
            let dirs: Vec<PlanePoint> = (0..n).map(|i| vs[(i + 1) % n].sub(&vs[i])).collect();
            let out = (0..n)
                .map(|i| offset_joint(&vs[i], &dirs[(i + n - 1) % n], &dirs[i], eps))
                .collect();
            LiftPolyline::closed_loop(out)
        }
        Some(m) => {
            let dirs: Vec<PlanePoint> = (0..n - 1).map(|i| vs[i + 1].sub(&vs[i])).collect();
            let prev0 = m.inverse().apply_dir(&dirs[n - 2]);
            let mut out = Vec::with_capacity(n);
            out.push(offset_joint(&vs[0], &prev0, &dirs[0], eps));
            for i in 1..n - 1 {
                out.push(offset_joint(&vs[i], &dirs[i - 1], &dirs[i], eps));
            }
            let first = out[0].clone();
            out.push(m.apply(&first));
            LiftPolyline::closed_with_monodromy(out, m.clone())
        }
    }
}

/// Close an arc into a figure eight: two parallel push-offs that swap sides
/// once in the interior and wrap around the endpoint corners.
fn figure_eight(lift: &LiftPolyline, eps: &Rat) -> LiftPolyline {
    let vs = &lift.vertices;
    let n = vs.len();
    let dirs: Vec<PlanePoint> = (0..n - 1).map(|i| vs[i + 1].sub(&vs[i])).collect();
    let lens: Vec<Rat> = dirs.iter().map(|d| d.gamma.abs() + d.theta.abs()).collect();
    let mut cum = vec![Rat::zero()];
    for l in &lens {
        cum.push(cum.last().unwrap() + l);
    }
    let total = cum[n - 1].clone();

    // Swap window: the central quarter of the breakpoint-free length gap
    // containing the point at 3/8 of the total length, so both chord ends lie
    // on one straight stretch of the arc.
    let x = &total * rat(3, 8);
    let k = (0..n - 1).find(|&i| cum[i] <= x && x < cum[i + 1]).expect("interior point");
    let (lo, hi) = (&cum[k], &cum[k + 1]);
    let lam1 = lo + (hi - lo) * rat(3, 8);
    let lam2 = lo + (hi - lo) * rat(5, 8);
    let at = |lam: &Rat| vs[k].add(&dirs[k].scale(&((lam - lo) / &lens[k])));
    let nk = l1_normal(&dirs[k], eps);

    let vp = offset_open_pts(vs, eps);
    let vm = offset_open_pts(vs, &-eps.clone());

    // Forward leg: plus side, diagonal chord, minus side.
    let mut w: Vec<PlanePoint> = vp[..=k].to_vec();
    w.push(at(&lam1).add(&nk));
    w.push(at(&lam2).sub(&nk));
    w.extend(vm[k + 1..].iter().cloned());
    // Return leg, reflected through the far corner: minus side back to plus.
    let c1 = vs[n - 1].clone();
    let neg = Deck::negation_about(&c1);
    let mut back: Vec<PlanePoint> = vm[..=k].to_vec();
    back.push(at(&lam1).sub(&nk));
    back.push(at(&lam2).add(&nk));
    back.extend(vp[k + 1..].iter().cloned());
    debug_assert_eq!(neg.apply(back.last().unwrap()), *w.last().unwrap());
    w.extend(back.iter().rev().skip(1).map(|p| neg.apply(p)));

    let span = vs[n - 1].sub(&vs[0]);
    let m = Deck::translation(span.gamma.to_integer() * 2, span.theta.to_integer() * 2);
    debug_assert_eq!(m.apply(&w[0]), *w.last().unwrap());
    LiftPolyline::closed_with_monodromy(w, m)
}

/// The earring modification: circles become two parallel copies, arcs become
/// figure eights wrapping their endpoint corners.
pub fn earring(l: &Multicurve, eps: &Rat) -> Result<Multicurve, EvalError> {
    if eps <= &rat_i(0) {
        return Err(EvalError::InvalidParameter(format!(
            "earring offset must be positive, got {eps}"
        )));
    }
    let mut components = vec![];
    for comp in &l.components {
        if comp.lift.closed {
            for signed in [eps.clone(), -eps.clone()] {
                let mut tags = comp.tags.clone();
                tags.insert(Tag::EarringCopy);
                components.push(Component {
                    kind: ComponentKind::Circle,
                    lift: offset_closed(&comp.lift, &signed),
                    tags,
                    endpoint_corners: vec![],
                });
            }
        } else {
            if !comp.lift.ends_at_corners() {
                return Err(EvalError::EarringNeedsCorners);
            }
            let mut tags = comp.tags.clone();
            tags.insert(Tag::FigureEight);
            components.push(Component {
                kind: ComponentKind::Circle,
                lift: figure_eight(&comp.lift, eps),
                tags,
                endpoint_corners: comp.endpoint_corners.clone(),
            });
        }
    }
    Ok(Multicurve { components })
}

// ---------------------------------------------------------------------------
// Corner-circle removal.

/// Shear the first curve by a small deterministic amount so that its edge
/// crossings avoid the corner-circle loci {theta2, pi - theta2} of the second
/// curve. Returns the sheared curve and the shears applied (empty if the sum
/// was already free of corner circles).
pub fn remove_corner_circles(
    l1: &Multicurve,
    l2: &Multicurve,
) -> Result<(Multicurve, Vec<Shear>), EvalError> {
    let (_, fibers) = sum_curves(l1, l2)?;
    if fibers.iter().all(|f| !f.corner_circle) {
        return Ok((l1.clone(), vec![]));
    }
    let f2 = build_factor(l2)?;
    let mut avoid: BTreeSet<Rat> = BTreeSet::new();
    for ev in &f2.events {
        if let FEvent::Crossing { t, .. } = ev {
            avoid.insert(t.clone());
            avoid.insert(rat_i(1) - t);
        }
    }
    // A theta-shear alone fixes the edges pointwise, so it cannot move a
    // crossing angle; but it tilts any near-horizontal approach so that the
    // gamma-shear that follows does.
    for k in 6..=40u32 {
        let t = rat(1, 1i64 << k);
        let st = Shear::tent(ShearDirection::Theta, t.clone());
        let sg = Shear::tent(ShearDirection::Gamma, t);
        let cand = Multicurve {
            components: l1
                .components
                .iter()
                .map(|c| Component { lift: sg.apply(&st.apply(&c.lift)), ..c.clone() })
                .collect(),
        };
        let Ok(fc) = build_factor(&cand) else { continue };
        let clear = fc.events.iter().all(|ev| match ev {
            FEvent::Crossing { t, .. } => !avoid.contains(t),
            FEvent::Corner => true,
        });
        if !clear {
            continue;
        }
        if let Ok((_, fibs)) = sum_curves(&cand, l2) {
            if fibs.iter().all(|f| !f.corner_circle) {
                return Ok((cand, vec![st, sg]));
            }
        }
    }
    unreachable!("the shear search clears corner circles after finitely many halvings")
}

// ---------------------------------------------------------------------------
// Comparison helpers.

impl Multicurve {
    /// Canonical multiset of folded chart segments per component, invariant
    /// under deck choices and traversal direction. Two multicurves with equal
    /// signatures have the same quotient image with multiplicity.
    pub fn signature(&self) -> Vec<Vec<(PillowPoint, PillowPoint)>> {
        let mut sig: Vec<Vec<(PillowPoint, PillowPoint)>> = self
            .components
            .iter()
            .map(|c| {
                let mut segs: Vec<(PillowPoint, PillowPoint)> = fold_polyline(&c.lift)
                    .iter()
                    .map(|s| {
                        let a = normalize(&s.a);
                        let b = normalize(&s.b);
                        if a <= b {
                            (a, b)
                        } else {
                            (b, a)
                        }
                    })
                    .collect();
                segs.sort();
                segs
            })
            .collect();
        sig.sort();
        sig
    }
}
