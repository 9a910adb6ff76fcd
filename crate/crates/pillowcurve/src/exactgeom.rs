//! Exact planar and pillowcase geometry.
//!
//! Points live in the (gamma, theta) plane with both coordinates rational
//! multiples of pi, stored in pi-units as arbitrary-precision rationals. The
//! pillowcase is the quotient by the deck group Gamma generated by even
//! integer translations together with total negation; [`normalize`] folds a
//! plane point into the canonical chart gamma in [0,1], theta in [0,2), with
//! the residual edge fold (e, theta) ~ (e, 2 - theta) applied so edge points
//! carry theta in [0,1].

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Exact scalar: a rational number of pi-units.
pub type Rat = BigRational;

/// Rational from an integer pair. Panics on zero denominator.
pub fn rat(num: i64, den: i64) -> Rat {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Rational from an integer.
pub fn rat_i(num: i64) -> Rat {
    BigRational::from_integer(BigInt::from(num))
}

/// An angle that is a rational multiple of pi, in pi-units.
///
/// Thin wrapper so angle-valued quantities are not confused with bare
/// rationals in signatures. Arithmetic is delegated to the inner value.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RationalAngle(pub Rat);

impl RationalAngle {
    pub fn new(num: i64, den: i64) -> Self {
        RationalAngle(rat(num, den))
    }

    /// Value in radians, for floating-point consumers.
    pub fn to_f64_radians(&self) -> f64 {
        rat_to_f64(&self.0) * std::f64::consts::PI
    }
}

impl fmt::Debug for RationalAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*pi", self.0)
    }
}

/// Rational to nearest f64. Exact for the denominators seen in practice.
pub fn rat_to_f64(r: &Rat) -> f64 {
    // Guard against BigInt -> f64 overflow by reducing through division.
    let num = r.numer();
    let den = r.denom();
    match (num.to_string().parse::<f64>(), den.to_string().parse::<f64>()) {
        (Ok(n), Ok(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            let (q, rem) = num.div_rem(den);
            let qf: f64 = q.to_string().parse().unwrap_or(0.0);
            let rf: f64 = rem.to_string().parse().unwrap_or(0.0);
            let df: f64 = den.to_string().parse().unwrap_or(1.0);
            qf + rf / df
        }
    }
}

/// A point of the (gamma, theta) plane, in pi-units.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PlanePoint {
    pub gamma: Rat,
    pub theta: Rat,
}

impl PlanePoint {
    pub fn new(gamma: Rat, theta: Rat) -> Self {
        PlanePoint { gamma, theta }
    }

    pub fn from_ints(gn: i64, gd: i64, tn: i64, td: i64) -> Self {
        PlanePoint::new(rat(gn, gd), rat(tn, td))
    }

    pub fn sub(&self, o: &PlanePoint) -> PlanePoint {
        PlanePoint::new(&self.gamma - &o.gamma, &self.theta - &o.theta)
    }

    pub fn add(&self, o: &PlanePoint) -> PlanePoint {
        PlanePoint::new(&self.gamma + &o.gamma, &self.theta + &o.theta)
    }

    pub fn scale(&self, s: &Rat) -> PlanePoint {
        PlanePoint::new(&self.gamma * s, &self.theta * s)
    }

    pub fn neg(&self) -> PlanePoint {
        PlanePoint::new(-self.gamma.clone(), -self.theta.clone())
    }

    /// 2x2 determinant of the pair (self, o) as plane vectors.
    pub fn cross(&self, o: &PlanePoint) -> Rat {
        &self.gamma * &o.theta - &self.theta * &o.gamma
    }

    pub fn dot(&self, o: &PlanePoint) -> Rat {
        &self.gamma * &o.gamma + &self.theta * &o.theta
    }

    pub fn is_zero(&self) -> bool {
        self.gamma.is_zero() && self.theta.is_zero()
    }

    /// Both coordinates in 2Z, i.e. the point is a deck translation vector.
    pub fn is_even_lattice(&self) -> bool {
        is_even_int(&self.gamma) && is_even_int(&self.theta)
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (rat_to_f64(&self.gamma), rat_to_f64(&self.theta))
    }
}

impl fmt::Debug for PlanePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.gamma, self.theta)
    }
}

fn is_even_int(r: &Rat) -> bool {
    r.is_integer() && r.numer().is_even()
}

/// A point of the canonical pillowcase chart.
///
/// Invariants: gamma in [0,1]; theta in [0,2), and theta in [0,1] when gamma
/// is 0 or 1 (the edge fold has been applied). Two plane points map to the
/// same `PillowPoint` exactly when they differ by a deck transformation.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PillowPoint {
    pub gamma: Rat,
    pub theta: Rat,
}

impl fmt::Debug for PillowPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.gamma, self.theta)
    }
}

/// The four cone points of the pillowcase.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum Corner {
    /// (0, 0)
    Origin,
    /// (0, 1): gamma = 0, theta = pi
    ThetaPi,
    /// (1, 0): gamma = pi, theta = 0
    GammaPi,
    /// (1, 1)
    Both,
}

impl Corner {
    pub fn coords(self) -> (Rat, Rat) {
        match self {
            Corner::Origin => (rat_i(0), rat_i(0)),
            Corner::ThetaPi => (rat_i(0), rat_i(1)),
            Corner::GammaPi => (rat_i(1), rat_i(0)),
            Corner::Both => (rat_i(1), rat_i(1)),
        }
    }

    pub const ALL: [Corner; 4] = [Corner::Origin, Corner::ThetaPi, Corner::GammaPi, Corner::Both];
}

impl PillowPoint {
    /// Which boundary edge of the chart the point lies on, if any.
    /// 0 for gamma = 0, 1 for gamma = 1.
    pub fn edge(&self) -> Option<u8> {
        if self.gamma.is_zero() {
            Some(0)
        } else if self.gamma.is_one() {
            Some(1)
        } else {
            None
        }
    }

    pub fn corner(&self) -> Option<Corner> {
        for c in Corner::ALL {
            let (g, t) = c.coords();
            if self.gamma == g && self.theta == t {
                return Some(c);
            }
        }
        None
    }

    pub fn to_plane(&self) -> PlanePoint {
        PlanePoint::new(self.gamma.clone(), self.theta.clone())
    }
}

/// Reduce r into [0, 2).
fn mod2(r: &Rat) -> Rat {
    let two = rat_i(2);
    let q = (r / &two).floor();
    r - q * two
}

/// Fold a plane point into the canonical pillowcase chart.
///
/// Corner preimages are exactly the integer lattice points (in pi-units).
pub fn normalize(p: &PlanePoint) -> PillowPoint {
    let one = rat_i(1);
    let two = rat_i(2);
    let mut g = mod2(&p.gamma);
    let mut t = mod2(&p.theta);
    if g > one {
        // Negate and re-reduce; this is the deck element -id + (2k, 2m).
        g = &two - &g;
        if !t.is_zero() {
            t = &two - &t;
        }
    }
    if (g.is_zero() || g.is_one()) && t > one {
        // Residual fold along the chart edge.
        t = &two - &t;
    }
    PillowPoint { gamma: g, theta: t }
}

/// An element of the deck group: p -> sign * p + (tg, tt), with tg, tt even.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Deck {
    pub neg: bool,
    pub tg: BigInt,
    pub tt: BigInt,
}

impl Deck {
    pub fn identity() -> Self {
        Deck { neg: false, tg: BigInt::zero(), tt: BigInt::zero() }
    }

    /// Translation by (tg, tt). Panics unless both are even.
    pub fn translation(tg: BigInt, tt: BigInt) -> Self {
        assert!(tg.is_even() && tt.is_even(), "deck translations are even");
        Deck { neg: false, tg, tt }
    }

    /// Negation about v: p -> 2v - p. Requires v integral with 2v even,
    /// i.e. v an arbitrary integer lattice point (a corner lift).
    pub fn negation_about(v: &PlanePoint) -> Self {
        assert!(v.gamma.is_integer() && v.theta.is_integer(), "negation centre must be a corner lift");
        Deck {
            neg: true,
            tg: v.gamma.numer() * 2,
            tt: v.theta.numer() * 2,
        }
    }

    pub fn is_identity(&self) -> bool {
        !self.neg && self.tg.is_zero() && self.tt.is_zero()
    }

    pub fn apply(&self, p: &PlanePoint) -> PlanePoint {
        let s = if self.neg { -1 } else { 1 };
        PlanePoint::new(
            Rat::from_integer(self.tg.clone()) + rat_i(s) * &p.gamma,
            Rat::from_integer(self.tt.clone()) + rat_i(s) * &p.theta,
        )
    }

    /// Apply to a direction vector: translations act trivially.
    pub fn apply_dir(&self, d: &PlanePoint) -> PlanePoint {
        if self.neg {
            d.neg()
        } else {
            d.clone()
        }
    }

    /// self o other (apply `other` first).
    pub fn compose(&self, other: &Deck) -> Deck {
        let s = if self.neg { -1 } else { 1 };
        Deck {
            neg: self.neg != other.neg,
            tg: &self.tg + s * &other.tg,
            tt: &self.tt + s * &other.tt,
        }
    }

    pub fn inverse(&self) -> Deck {
        if self.neg {
            self.clone()
        } else {
            Deck { neg: false, tg: -self.tg.clone(), tt: -self.tt.clone() }
        }
    }
}

/// Deck element carrying `from` to `to`, if one exists.
pub fn deck_between(from: &PlanePoint, to: &PlanePoint) -> Option<Deck> {
    let d = to.sub(from);
    if d.is_even_lattice() {
        return Some(Deck {
            neg: false,
            tg: d.gamma.numer().clone(),
            tt: d.theta.numer().clone(),
        });
    }
    let s = to.add(from);
    if s.is_even_lattice() {
        return Some(Deck {
            neg: true,
            tg: s.gamma.numer().clone(),
            tt: s.theta.numer().clone(),
        });
    }
    None
}

/// A PL curve in the plane, understood up to the deck action.
///
/// `closed: false` is an immersed arc. `closed: true` is an immersed circle: the curve
/// continues from the last vertex back to the first. When the last vertex is
/// a deck image of the first the joint has zero length in the quotient and
/// the monodromy of the traversal is that deck element; otherwise an
/// ordinary closing segment from last to first is implied. The two cases are
/// distinguished by the explicit `monodromy` field, which constructors set.
#[derive(Clone, PartialEq, Debug)]
pub struct LiftPolyline {
    pub vertices: Vec<PlanePoint>,
    pub closed: bool,
    /// For closed curves whose stored endpoints are identified by a
    /// nontrivial deck element rather than a closing segment.
    pub monodromy: Option<Deck>,
}

impl LiftPolyline {
    pub fn open(vertices: Vec<PlanePoint>) -> Self {
        LiftPolyline { vertices, closed: false, monodromy: None }
    }

    pub fn closed_loop(vertices: Vec<PlanePoint>) -> Self {
        LiftPolyline { vertices, closed: true, monodromy: None }
    }

    pub fn closed_with_monodromy(vertices: Vec<PlanePoint>, monodromy: Deck) -> Self {
        LiftPolyline { vertices, closed: true, monodromy: Some(monodromy) }
    }

    /// Number of segments traversed, including the closing one.
    pub fn segment_count(&self) -> usize {
        let n = self.vertices.len();
        if !self.closed {
            n - 1
        } else if self.monodromy.is_some() {
            // Closing joint has zero length; last stored vertex is the deck
            // image of the first.
            n - 1
        } else {
            n
        }
    }

    /// Endpoints of segment i. For the closing segment of a plain closed
    /// curve this is (last, first).
    pub fn segment(&self, i: usize) -> (PlanePoint, PlanePoint) {
        let n = self.vertices.len();
        if i + 1 < n {
            (self.vertices[i].clone(), self.vertices[i + 1].clone())
        } else {
            assert!(self.closed && self.monodromy.is_none() && i + 1 == n);
            (self.vertices[n - 1].clone(), self.vertices[0].clone())
        }
    }

    /// Structural checks: enough vertices, consecutive vertices distinct,
    /// no immediate backtracking, closed monodromy consistent with the
    /// stored endpoints.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.vertices.len();
        if n < 2 {
            return Err("polyline needs at least two vertices".into());
        }
        for i in 0..n - 1 {
            if self.vertices[i] == self.vertices[i + 1] {
                return Err(format!("repeated vertex at index {i}"));
            }
        }
        let dirs: Vec<PlanePoint> = (0..self.segment_count())
            .map(|i| {
                let (a, b) = self.segment(i);
                b.sub(&a)
            })
            .collect();
        let pairs = if self.closed && self.monodromy.is_none() { dirs.len() } else { dirs.len() - 1 };
        for i in 0..pairs {
            let a = &dirs[i];
            let b = &dirs[(i + 1) % dirs.len()];
            if a.cross(b).is_zero() && a.dot(b).is_negative() {
                return Err(format!("backtracking at vertex after segment {i}"));
            }
        }
        if self.closed {
            if self.vertices[0] == self.vertices[n - 1] && self.monodromy.is_none() {
                return Err("closed curve must not repeat the initial vertex".into());
            }
            if let Some(m) = &self.monodromy {
                if m.apply(&self.vertices[0]) != self.vertices[n - 1] {
                    return Err("monodromy does not match stored endpoints".into());
                }
            }
        }
        Ok(())
    }

    /// True if both endpoints of an open polyline are corner lifts.
    pub fn ends_at_corners(&self) -> bool {
        !self.closed
            && [&self.vertices[0], &self.vertices[self.vertices.len() - 1]]
                .iter()
                .all(|v| v.gamma.is_integer() && v.theta.is_integer())
    }

    /// Slope numerator/denominator totals of the underlying lift; the arc
    /// from (0,0) to (q,p) has slope p/q.
    pub fn span(&self) -> PlanePoint {
        self.vertices[self.vertices.len() - 1].sub(&self.vertices[0])
    }

    pub fn map_vertices(&self, f: impl Fn(&PlanePoint) -> PlanePoint) -> LiftPolyline {
        LiftPolyline {
            vertices: self.vertices.iter().map(&f).collect(),
            closed: self.closed,
            monodromy: self.monodromy.clone(),
        }
    }
}

/// Apply an integer unimodular matrix [[a, b], [c, d]] to every vertex:
/// gamma' = a*gamma + b*theta, theta' = c*gamma + d*theta.
///
/// Determinant must be +-1 so the map descends to the pillowcase.
pub fn apply_psl2z(m: [[i64; 2]; 2], curve: &LiftPolyline) -> LiftPolyline {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    assert!(det == 1 || det == -1, "matrix must be unimodular");
    let mm = |p: &PlanePoint| {
        PlanePoint::new(
            rat_i(m[0][0]) * &p.gamma + rat_i(m[0][1]) * &p.theta,
            rat_i(m[1][0]) * &p.gamma + rat_i(m[1][1]) * &p.theta,
        )
    };
    let mut out = curve.map_vertices(mm);
    // Conjugate the monodromy: linear maps commute with negation and send
    // even translations to even translations.
    if let Some(d) = &curve.monodromy {
        let tg = m[0][0] * d.tg.clone() + m[0][1] * d.tt.clone();
        let tt = m[1][0] * d.tg.clone() + m[1][1] * d.tt.clone();
        out.monodromy = Some(Deck { neg: d.neg, tg, tt });
    }
    out
}

/// Direction of a shear: displace theta as a function of gamma, or gamma as
/// a function of theta.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ShearDirection {
    Theta,
    Gamma,
}

/// Odd, 2-periodic PL bump profile, given by breakpoints on [0, 1].
///
/// Breakpoints are (abscissa, value) pairs with 0 = x_0 < ... < x_k = 1 and
/// value 0 at both ends; the extension to the line is f(-x) = -f(x),
/// f(x + 2) = f(x). Vanishing at integers makes the displacement fix every
/// corner and descend to the quotient.
#[derive(Clone, PartialEq, Debug)]
pub struct ShearProfile {
    pub breakpoints: Vec<(Rat, Rat)>,
}

impl ShearProfile {
    /// The tent profile: 0 at 0, 1 at 1/2, 0 at 1.
    pub fn tent() -> Self {
        ShearProfile {
            breakpoints: vec![(rat_i(0), rat_i(0)), (rat(1, 2), rat_i(1)), (rat_i(1), rat_i(0))],
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let bp = &self.breakpoints;
        if bp.len() < 2 {
            return Err("profile needs at least two breakpoints".into());
        }
        if !(bp[0].0.is_zero() && bp[bp.len() - 1].0.is_one()) {
            return Err("profile must span [0, 1]".into());
        }
        if !(bp[0].1.is_zero() && bp[bp.len() - 1].1.is_zero()) {
            return Err("profile must vanish at 0 and 1".into());
        }
        for w in bp.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err("profile abscissae must strictly increase".into());
            }
        }
        Ok(())
    }

    /// Evaluate the extended profile at any rational abscissa.
    pub fn eval(&self, x: &Rat) -> Rat {
        let y = mod2(x);
        let one = rat_i(1);
        let (pos, xx) = if y <= one { (true, y) } else { (false, rat_i(2) - y) };
        let mut val = rat_i(0);
        for w in self.breakpoints.windows(2) {
            let (x0, y0) = &w[0];
            let (x1, y1) = &w[1];
            if xx >= *x0 && xx <= *x1 {
                let t = (&xx - x0) / (x1 - x0);
                val = y0 + t * (y1 - y0);
                break;
            }
        }
        if pos {
            val
        } else {
            -val
        }
    }

    /// Abscissae where the extended profile can kink inside (lo, hi):
    /// all points congruent to +-x_i mod 2.
    fn kinks_between(&self, lo: &Rat, hi: &Rat) -> Vec<Rat> {
        let two = rat_i(2);
        let mut out: Vec<Rat> = Vec::new();
        for (x, _) in &self.breakpoints {
            for base in [x.clone(), -x.clone()] {
                // Smallest base + 2k strictly above lo.
                let k = ((lo - &base) / &two).floor();
                let mut v = &base + (&k) * &two;
                while &v <= lo {
                    v = &v + &two;
                }
                while &v < hi {
                    out.push(v.clone());
                    v = &v + &two;
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

/// A shear of the plane commuting with the deck action.
#[derive(Clone, PartialEq, Debug)]
pub struct Shear {
    pub direction: ShearDirection,
    pub amount: Rat,
    pub profile: ShearProfile,
}

impl Shear {
    pub fn tent(direction: ShearDirection, amount: Rat) -> Self {
        Shear { direction, amount, profile: ShearProfile::tent() }
    }

    /// Image of a single point: the driven coordinate moves by
    /// -2 * amount * profile(driving coordinate).
    pub fn apply_point(&self, p: &PlanePoint) -> PlanePoint {
        let two = rat_i(2);
        match self.direction {
            ShearDirection::Theta => {
                let d = &two * &self.amount * self.profile.eval(&p.gamma);
                PlanePoint::new(p.gamma.clone(), &p.theta - d)
            }
            ShearDirection::Gamma => {
                let d = &two * &self.amount * self.profile.eval(&p.theta);
                PlanePoint::new(&p.gamma - d, p.theta.clone())
            }
        }
    }

    /// Shear a polyline, first inserting vertices wherever a segment crosses
    /// a kink abscissa of the profile so the image stays PL-exact.
    pub fn apply(&self, curve: &LiftPolyline) -> LiftPolyline {
        let driving = |p: &PlanePoint| match self.direction {
            ShearDirection::Theta => p.gamma.clone(),
            ShearDirection::Gamma => p.theta.clone(),
        };
        let mut verts: Vec<PlanePoint> = Vec::new();
        let nseg = curve.segment_count();
        for i in 0..nseg {
            let (a, b) = curve.segment(i);
            if i == 0 || verts.last() != Some(&a) {
                verts.push(a.clone());
            }
            let (xa, xb) = (driving(&a), driving(&b));
            let (lo, hi) = if xa <= xb { (xa.clone(), xb.clone()) } else { (xb.clone(), xa.clone()) };
            if lo < hi {
                let mut kinks = self.profile.kinks_between(&lo, &hi);
                if xa > xb {
                    kinks.reverse();
                }
                let d = b.sub(&a);
                let span = &xb - &xa;
                for k in kinks {
                    let t = (&k - &xa) / &span;
                    verts.push(a.add(&d.scale(&t)));
                }
            }
            // Closing segment of a plain closed loop: do not re-add the
            // initial vertex.
            if !(curve.closed && curve.monodromy.is_none() && i == nseg - 1) {
                verts.push(b.clone());
            }
        }
        let mut out = LiftPolyline {
            vertices: verts.iter().map(|p| self.apply_point(p)).collect(),
            closed: curve.closed,
            monodromy: curve.monodromy.clone(),
        };
        // The displacement vanishes on corner lifts and is deck-equivariant,
        // so the monodromy is unchanged. Collinear inserted vertices are
        // harmless but repeated ones are not; dedup defensively.
        out.vertices.dedup();
        out
    }
}

/// One proper or degenerate meeting point of two segments.
#[derive(Clone, Debug, PartialEq)]
pub struct SegIntersection {
    pub point: PlanePoint,
    /// Parameters along the two segments, each in [0, 1].
    pub t: Rat,
    pub u: Rat,
    /// True only for an interior-interior crossing of non-parallel segments.
    pub transverse: bool,
}

/// All meeting points of the closed segments [a1, a2] and [b1, b2].
///
/// Non-parallel segments yield at most one point, transverse exactly when it
/// is interior to both. Collinear overlapping segments yield the endpoint(s)
/// of the shared subsegment, never marked transverse. Parallel disjoint
/// segments yield nothing.
pub fn segment_intersections(
    a1: &PlanePoint,
    a2: &PlanePoint,
    b1: &PlanePoint,
    b2: &PlanePoint,
) -> Vec<SegIntersection> {
    let d1 = a2.sub(a1);
    let d2 = b2.sub(b1);
    let r = b1.sub(a1);
    let denom = d1.cross(&d2);
    let zero = rat_i(0);
    let one = rat_i(1);
    if !denom.is_zero() {
        let t = r.cross(&d2) / &denom;
        let u = r.cross(&d1) / &denom;
        if t >= zero && t <= one && u >= zero && u <= one {
            let transverse = t > zero && t < one && u > zero && u < one;
            return vec![SegIntersection { point: a1.add(&d1.scale(&t)), t, u, transverse }];
        }
        return vec![];
    }
    if !r.cross(&d1).is_zero() {
        return vec![]; // parallel, distinct lines
    }
    // Collinear: parametrise b's endpoints along a.
    let len2 = d1.dot(&d1);
    if len2.is_zero() {
        return vec![]; // degenerate segment; callers never pass these
    }
    let tb1 = r.dot(&d1) / &len2;
    let tb2 = b2.sub(a1).dot(&d1) / &len2;
    let (blo, bhi) = if tb1 <= tb2 { (tb1, tb2) } else { (tb2, tb1) };
    let lo = if blo > zero { blo } else { zero.clone() };
    let hi = if bhi < one { bhi } else { one.clone() };
    if lo > hi {
        return vec![];
    }
    let param_u = |t: &Rat| -> Rat {
        // Invert b1 + u * d2 = a1 + t * d1 along the common line.
        let len2b = d2.dot(&d2);
        a1.add(&d1.scale(t)).sub(b1).dot(&d2) / len2b
    };
    let mut out = vec![SegIntersection {
        point: a1.add(&d1.scale(&lo)),
        t: lo.clone(),
        u: param_u(&lo),
        transverse: false,
    }];
    if hi > lo {
        out.push(SegIntersection {
            point: a1.add(&d1.scale(&hi)),
            t: hi.clone(),
            u: param_u(&hi),
            transverse: false,
        });
    }
    out
}

/// A maximal subsegment of a folded curve lying in one chart cell.
///
/// `a`, `b` are chart coordinates (gamma in [0,1], theta in [0,2]); `deck`
/// maps the original lift piece onto them. `seg` indexes the source segment
/// of the lift, with `t0`, `t1` its parameter range there; t0 > t1 never
/// occurs, and pieces of one segment appear in traversal order.
#[derive(Clone, Debug)]
pub struct ChartSeg {
    pub a: PlanePoint,
    pub b: PlanePoint,
    pub deck: Deck,
    pub seg: usize,
    pub t0: Rat,
    pub t1: Rat,
}

impl ChartSeg {
    pub fn dir(&self) -> PlanePoint {
        self.b.sub(&self.a)
    }

    /// Chart point at piece parameter s in [0, 1].
    pub fn at(&self, s: &Rat) -> PlanePoint {
        self.a.add(&self.dir().scale(s))
    }

    /// Source-segment parameter for piece parameter s.
    pub fn src_t(&self, s: &Rat) -> Rat {
        &self.t0 + s * (&self.t1 - &self.t0)
    }
}

/// Fold a lift into chart pieces.
///
/// Each lift segment is split where gamma crosses an integer or theta
/// crosses an even integer; every resulting piece lies in a single cell
/// [k, k+1] x [2m, 2m+2] and is carried to the chart by one deck element
/// (gamma reflections pick up the negation). Pieces are returned in
/// traversal order.
pub fn fold_polyline(curve: &LiftPolyline) -> Vec<ChartSeg> {
    let mut out = Vec::new();
    for i in 0..curve.segment_count() {
        let (a, b) = curve.segment(i);
        let d = b.sub(&a);
        // Split parameters: integer gamma and even-integer theta crossings.
        let mut ts: Vec<Rat> = vec![rat_i(0), rat_i(1)];
        if !d.gamma.is_zero() {
            push_lattice_crossings(&mut ts, &a.gamma, &d.gamma, 1);
        }
        if !d.theta.is_zero() {
            push_lattice_crossings(&mut ts, &a.theta, &d.theta, 2);
        }
        ts.sort();
        ts.dedup();
        for w in ts.windows(2) {
            let (t0, t1) = (&w[0], &w[1]);
            let pa = a.add(&d.scale(t0));
            let pb = a.add(&d.scale(t1));
            let mid = a.add(&d.scale(&((t0 + t1) / rat_i(2))));
            let deck = cell_deck(&mid);
            out.push(ChartSeg {
                a: deck.apply(&pa),
                b: deck.apply(&pb),
                deck,
                seg: i,
                t0: t0.clone(),
                t1: t1.clone(),
            });
        }
    }
    out
}

/// Parameters in (0,1) where a + t*d crosses a multiple of `step`.
fn push_lattice_crossings(ts: &mut Vec<Rat>, a: &Rat, d: &Rat, step: i64) {
    let step = rat_i(step);
    let zero = rat_i(0);
    let one = rat_i(1);
    let b = a + d;
    let (lo, hi) = if a < &b { (a.clone(), b) } else { (b, a.clone()) };
    let mut k = (&lo / &step).ceil();
    loop {
        let v = &k * &step;
        if v >= hi {
            break;
        }
        if v > lo {
            let t = (&v - a) / d;
            if t > zero && t < one {
                ts.push(t);
            }
        }
        k += rat_i(1);
    }
}

/// Deck element folding the cell containing `p` (a cell-interior point, or
/// at worst on a cell boundary with a consistent choice) onto the chart.
fn cell_deck(p: &PlanePoint) -> Deck {
    let k = p.gamma.floor();
    let kint = k.numer().clone();
    let m = (&p.theta / rat_i(2)).floor();
    let mint = m.numer().clone();
    if kint.is_even() {
        Deck { neg: false, tg: -kint, tt: BigInt::from(-2) * mint }
    } else {
        Deck { neg: true, tg: kint + 1, tt: BigInt::from(2) * (mint + 1) }
    }
}

/// Direction transport from a chart representative to the canonical one.
///
/// Given a chart point and a direction there, returns the direction at the
/// canonical representative `normalize(chart)`. The sign is the negation
/// part of the deck element relating the two; at a non-corner point it is
/// determined, and corners are rejected by callers before this matters.
pub fn canonical_dir(chart: &PlanePoint, dir: &PlanePoint) -> PlanePoint {
    let canon = normalize(chart).to_plane();
    let diff_even = canon.sub(chart).is_even_lattice();
    if diff_even {
        dir.clone()
    } else {
        debug_assert!(canon.add(chart).is_even_lattice());
        dir.neg()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp(gn: i64, gd: i64, tn: i64, td: i64) -> PlanePoint {
        PlanePoint::from_ints(gn, gd, tn, td)
    }

    #[test]
    fn normalize_edge_fold() {
        let q = normalize(&pp(0, 1, 3, 2));
        assert_eq!(q.gamma, rat_i(0));
        assert_eq!(q.theta, rat(1, 2));
    }

    #[test]
    fn normalize_gamma_reflection() {
        let q = normalize(&pp(3, 2, 3, 4));
        assert_eq!(q.gamma, rat(1, 2));
        assert_eq!(q.theta, rat(5, 4));
    }

    #[test]
    fn normalize_idempotent_and_deck_invariant() {
        let pts = [pp(7, 3, -11, 5), pp(-1, 2, 9, 4), pp(0, 1, 0, 1), pp(5, 1, 3, 7)];
        for p in &pts {
            let n1 = normalize(p);
            let n2 = normalize(&n1.to_plane());
            assert_eq!(n1, n2);
            for deck in [
                Deck::translation(BigInt::from(2), BigInt::from(-4)),
                Deck { neg: true, tg: BigInt::from(6), tt: BigInt::from(2) },
            ] {
                assert_eq!(normalize(&deck.apply(p)), n1);
            }
        }
    }

    #[test]
    fn corner_lifts_are_integer_lattice() {
        for (g, t) in [(0i64, 0i64), (1, 0), (0, 1), (1, 1), (2, 3), (-5, 4)] {
            let n = normalize(&pp(g, 1, t, 1));
            assert!(n.corner().is_some(), "({g},{t}) should fold to a corner");
        }
        assert!(normalize(&pp(1, 2, 0, 1)).corner().is_none());
    }

    #[test]
    fn deck_compose_inverse() {
        let a = Deck { neg: true, tg: BigInt::from(4), tt: BigInt::from(-2) };
        let b = Deck::translation(BigInt::from(2), BigInt::from(6));
        let p = pp(5, 7, -3, 11);
        let ab = a.compose(&b);
        assert_eq!(ab.apply(&p), a.apply(&b.apply(&p)));
        assert!(a.compose(&a.inverse()).is_identity());
        assert!(b.inverse().compose(&b).is_identity());
    }

    #[test]
    fn deck_between_finds_relation() {
        let p = pp(1, 3, 5, 7);
        let g = Deck { neg: true, tg: BigInt::from(2), tt: BigInt::from(4) };
        let q = g.apply(&p);
        let found = deck_between(&p, &q).unwrap();
        assert_eq!(found.apply(&p), q);
        assert!(deck_between(&p, &pp(1, 2, 0, 1)).is_none());
    }

    #[test]
    fn psl2z_examples() {
        let seg = LiftPolyline::open(vec![pp(1, 2, 1, 4), pp(1, 1, 1, 1)]);
        let t = apply_psl2z([[1, 0], [1, 1]], &seg);
        assert_eq!(t.vertices[0], pp(1, 2, 3, 4));

        let seg2 = LiftPolyline::open(vec![pp(1, 3, 1, 5), pp(0, 1, 0, 1)]);
        let sw = apply_psl2z([[0, 1], [1, 0]], &seg2);
        assert_eq!(sw.vertices[0], pp(1, 5, 1, 3));

        let arc = LiftPolyline::open(vec![pp(0, 1, 0, 1), pp(2, 1, 1, 1)]);
        let m = apply_psl2z([[1, 0], [0, -1]], &arc);
        assert_eq!(m.vertices[1], pp(2, 1, -1, 1));
    }

    #[test]
    #[should_panic(expected = "unimodular")]
    fn psl2z_rejects_non_unimodular() {
        let seg = LiftPolyline::open(vec![pp(0, 1, 0, 1), pp(1, 1, 1, 1)]);
        apply_psl2z([[2, 0], [0, 1]], &seg);
    }

    #[test]
    fn tent_shear_example() {
        let s = Shear::tent(ShearDirection::Theta, rat(1, 100));
        let img = s.apply_point(&pp(1, 2, 1, 4));
        assert_eq!(img, pp(1, 2, 23, 100));
    }

    #[test]
    fn shear_profile_odd_periodic() {
        let p = ShearProfile::tent();
        assert_eq!(p.eval(&rat(1, 4)), rat(1, 2));
        assert_eq!(p.eval(&rat(-1, 4)), rat(-1, 2));
        assert_eq!(p.eval(&rat(9, 4)), rat(1, 2));
        assert_eq!(p.eval(&rat(7, 4)), rat(-1, 2));
        assert_eq!(p.eval(&rat_i(1)), rat_i(0));
        assert_eq!(p.eval(&rat_i(-3)), rat_i(0));
    }

    #[test]
    fn shear_inserts_kink_vertices() {
        // A segment crossing gamma = 1/2 must gain a vertex there.
        let arc = LiftPolyline::open(vec![pp(0, 1, 0, 1), pp(1, 1, 0, 1)]);
        let s = Shear::tent(ShearDirection::Theta, rat(1, 100));
        let out = s.apply(&arc);
        assert_eq!(out.vertices.len(), 3);
        assert_eq!(out.vertices[1], pp(1, 2, -1, 50));
        // Corner images are fixed.
        assert_eq!(out.vertices[0], pp(0, 1, 0, 1));
        assert_eq!(out.vertices[2], pp(1, 1, 0, 1));
    }

    #[test]
    fn shear_fixes_corner_lifts() {
        let s = Shear::tent(ShearDirection::Gamma, rat(3, 7));
        for (g, t) in [(0, 0), (1, 0), (0, 1), (3, -2)] {
            let p = pp(g, 1, t, 1);
            assert_eq!(s.apply_point(&p), p);
        }
    }

    #[test]
    fn segment_crossing_transverse() {
        let hits = segment_intersections(&pp(0, 1, 0, 1), &pp(1, 1, 1, 1), &pp(0, 1, 1, 1), &pp(1, 1, 0, 1));
        assert_eq!(hits.len(), 1);
        assert!(hits[0].transverse);
        assert_eq!(hits[0].point, pp(1, 2, 1, 2));
        assert_eq!(hits[0].t, rat(1, 2));
    }

    #[test]
    fn segment_touch_at_endpoint_not_transverse() {
        let hits = segment_intersections(&pp(0, 1, 0, 1), &pp(1, 1, 1, 1), &pp(1, 1, 1, 1), &pp(2, 1, 0, 1));
        assert_eq!(hits.len(), 1);
        assert!(!hits[0].transverse);
        assert_eq!(hits[0].point, pp(1, 1, 1, 1));
    }

    #[test]
    fn segment_collinear_overlap() {
        let hits = segment_intersections(&pp(0, 1, 0, 1), &pp(2, 1, 0, 1), &pp(1, 1, 0, 1), &pp(3, 1, 0, 1));
        assert_eq!(hits.len(), 2);
        assert!(hits.iter().all(|h| !h.transverse));
        assert_eq!(hits[0].point, pp(1, 1, 0, 1));
        assert_eq!(hits[1].point, pp(2, 1, 0, 1));
    }

    #[test]
    fn segment_parallel_disjoint() {
        let hits = segment_intersections(&pp(0, 1, 0, 1), &pp(1, 1, 0, 1), &pp(0, 1, 1, 1), &pp(1, 1, 1, 1));
        assert!(hits.is_empty());
    }

    #[test]
    fn fold_splits_at_cell_walls() {
        // Lift of the 1/3 tangle arc: (0,0) to (3,1); splits at gamma = 1, 2.
        let arc = LiftPolyline::open(vec![pp(0, 1, 0, 1), pp(3, 1, 1, 1)]);
        let pieces = fold_polyline(&arc);
        assert_eq!(pieces.len(), 3);
        for cs in &pieces {
            let zero = rat_i(0);
            let one = rat_i(1);
            let two = rat_i(2);
            for p in [&cs.a, &cs.b] {
                assert!(p.gamma >= zero && p.gamma <= one);
                assert!(p.theta >= zero && p.theta <= two);
            }
            // Chart piece really is the deck image of the lift piece.
            let (a, b) = arc.segment(cs.seg);
            let d = b.sub(&a);
            assert_eq!(cs.deck.apply(&a.add(&d.scale(&cs.t0))), cs.a);
            assert_eq!(cs.deck.apply(&a.add(&d.scale(&cs.t1))), cs.b);
        }
        // Middle piece is gamma-reflected: slope is preserved by folding.
        let d0 = pieces[0].dir();
        let d1 = pieces[1].dir();
        assert!(d0.cross(&d1).is_zero());
        // Consecutive pieces share their seam point in the quotient.
        for w in pieces.windows(2) {
            assert_eq!(normalize(&w[0].b), normalize(&w[1].a));
        }
    }

    #[test]
    fn fold_handles_theta_wrap_and_reflection() {
        let arc = LiftPolyline::open(vec![pp(0, 1, 0, 1), pp(1, 1, 3, 1)]);
        let pieces = fold_polyline(&arc);
        assert_eq!(pieces.len(), 2);
        assert_eq!(pieces[1].a.theta, rat_i(0));
        assert_eq!(pieces[1].b.theta, rat_i(1));
        let deck_moves: Vec<_> = pieces.iter().map(|c| c.deck.neg).collect();
        assert_eq!(deck_moves, vec![false, false]);
    }

    #[test]
    fn canonical_dir_flips_on_reflected_reps() {
        // Chart rep at theta above 1 on an edge: canonical rep is folded.
        let chart = pp(1, 1, 3, 2);
        let dir = pp(1, 1, 1, 1);
        let out = canonical_dir(&chart, &dir);
        assert_eq!(out, pp(-1, 1, -1, 1));
        // Interior points transport trivially.
        let chart2 = pp(1, 2, 1, 2);
        assert_eq!(canonical_dir(&chart2, &dir), dir);
    }

    #[test]
    fn polyline_validation() {
        assert!(LiftPolyline::open(vec![pp(0, 1, 0, 1), pp(2, 1, 1, 1)]).validate().is_ok());
        assert!(LiftPolyline::open(vec![pp(0, 1, 0, 1), pp(2, 1, 1, 1)]).ends_at_corners());
        assert!(!LiftPolyline::open(vec![pp(0, 1, 0, 1), pp(1, 2, 1, 2)]).ends_at_corners());
        let back = LiftPolyline::open(vec![pp(0, 1, 0, 1), pp(2, 1, 0, 1), pp(1, 1, 0, 1)]);
        assert!(back.validate().is_err());
        let loop_ok = LiftPolyline::closed_loop(vec![
            pp(1, 4, 1, 4),
            pp(3, 4, 1, 4),
            pp(3, 4, 3, 4),
            pp(1, 4, 3, 4),
        ]);
        assert!(loop_ok.validate().is_ok());
        assert_eq!(loop_ok.segment_count(), 4);
    }

    #[test]
    fn monodromy_closed_polyline() {
        // Figure-eight style closure: end is the negation image of the start.
        let g = Deck::negation_about(&pp(2, 1, 1, 1));
        let start = pp(1, 4, 1, 8);
        let end = g.apply(&start);
        let curve = LiftPolyline::closed_with_monodromy(vec![start.clone(), pp(2, 1, 1, 2), end.clone()], g);
        assert!(curve.validate().is_ok());
        assert_eq!(curve.segment_count(), 2);
    }
}
