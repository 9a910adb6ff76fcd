//! Arborescent tangle expressions.
//!
//! A tangle expression is a tree built from rational tangles `Q(p/q)` by
//! sum, rotation, twisting, mirroring, the hat involution, the earring
//! modification, and perturbing shears. The module owns the text grammar
//! (parser and printer) and the pillowcase slope, a fraction attached to
//! every earring-free expression that predicts the asymptotic direction of
//! the evaluated curve through the corners.

use std::fmt;

use num_integer::Integer;

use crate::exactgeom::{rat, Rat, Shear, ShearDirection};

/// Errors from parsing or from slope computation.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TangleError {
    /// Malformed input text; `pos` is a byte offset into the source.
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    /// The earring modification has no pillowcase slope.
    #[error("slope is undefined for earring-modified tangles")]
    EarringSlope,
    /// Both summands vertical: the slopes cannot be added.
    #[error("slope is undefined for a sum of two vertical tangles")]
    VerticalSum,
}

fn perr<T>(pos: usize, msg: impl Into<String>) -> Result<T, TangleError> {
    Err(TangleError::Parse {
        pos,
        msg: msg.into(),
    })
}

/// Tangle expression tree.
///
/// `Rational(p, q)` is kept in lowest terms with `q >= 0`; the vertical
/// tangle `Q(inf)` is stored as `Rational(1, 0)`. `0/0` is rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum TangleExpr {
    Rational(i64, i64),
    Sum(Box<TangleExpr>, Box<TangleExpr>),
    Rotate(Box<TangleExpr>),
    Twist(Box<TangleExpr>, i64),
    Mirror(Box<TangleExpr>),
    Hat(Box<TangleExpr>),
    Earring(Box<TangleExpr>),
    Sheared(Box<TangleExpr>, Shear),
}

impl TangleExpr {
    /// Normalized rational tangle; rejects `0/0`.
    pub fn rational(p: i64, q: i64) -> Result<Self, TangleError> {
        if p == 0 && q == 0 {
            return perr(0, "0/0 is not a tangle");
        }
        let g = p.gcd(&q);
        let (mut p, mut q) = (p / g, q / g);
        if q < 0 {
            p = -p;
            q = -q;
        }
        if q == 0 {
            p = 1;
        }
        Ok(TangleExpr::Rational(p, q))
    }

    pub fn sum(l: TangleExpr, r: TangleExpr) -> Self {
        TangleExpr::Sum(Box::new(l), Box::new(r))
    }

    pub fn rot(e: TangleExpr) -> Self {
        TangleExpr::Rotate(Box::new(e))
    }

    pub fn twist(e: TangleExpr, n: i64) -> Self {
        TangleExpr::Twist(Box::new(e), n)
    }

    pub fn mirror(e: TangleExpr) -> Self {
        TangleExpr::Mirror(Box::new(e))
    }

    pub fn hat(e: TangleExpr) -> Self {
        TangleExpr::Hat(Box::new(e))
    }

    pub fn earring(e: TangleExpr) -> Self {
        TangleExpr::Earring(Box::new(e))
    }

    pub fn sheared(e: TangleExpr, s: Shear) -> Self {
        TangleExpr::Sheared(Box::new(e), s)
    }

    /// True if any node in the tree is an earring modification.
    pub fn has_earring(&self) -> bool {
        match self {
            TangleExpr::Rational(..) => false,
            TangleExpr::Earring(_) => true,
            TangleExpr::Sum(l, r) => l.has_earring() || r.has_earring(),
            TangleExpr::Rotate(e)
            | TangleExpr::Twist(e, _)
            | TangleExpr::Mirror(e)
            | TangleExpr::Hat(e)
            | TangleExpr::Sheared(e, _) => e.has_earring(),
        }
    }
}

/// Pillowcase slope: a rational number or the vertical slope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Slope {
    Finite(Rat),
    Infinite,
}

impl Slope {
    pub fn finite(p: i64, q: i64) -> Self {
        Slope::Finite(rat(p, q))
    }

    pub fn as_finite(&self) -> Option<&Rat> {
        match self {
            Slope::Finite(r) => Some(r),
            Slope::Infinite => None,
        }
    }
}

impl fmt::Display for Slope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slope::Finite(r) => write!(f, "{r}"),
            Slope::Infinite => write!(f, "inf"),
        }
    }
}

/// Pillowcase slope of an expression, computed recursively.
///
/// Sum adds slopes (a vertical summand keeps the sum vertical), rotation
/// sends s to -1/s, an n-fold twist adds n, and mirror and hat both negate.
/// Shears do not move the arc endpoints that determine the slope, so a
/// sheared expression inherits the slope of its interior.
pub fn slope(e: &TangleExpr) -> Result<Slope, TangleError> {
    match e {
        TangleExpr::Rational(p, q) => {
            if *q == 0 {
                Ok(Slope::Infinite)
            } else {
                Ok(Slope::finite(*p, *q))
            }
        }
        TangleExpr::Sum(l, r) => match (slope(l)?, slope(r)?) {
            (Slope::Infinite, Slope::Infinite) => Err(TangleError::VerticalSum),
            (Slope::Infinite, _) | (_, Slope::Infinite) => Ok(Slope::Infinite),
            (Slope::Finite(a), Slope::Finite(b)) => Ok(Slope::Finite(a + b)),
        },
        TangleExpr::Rotate(inner) => match slope(inner)? {
            Slope::Infinite => Ok(Slope::finite(0, 1)),
            Slope::Finite(s) => {
                if s == rat(0, 1) {
                    Ok(Slope::Infinite)
                } else {
                    Ok(Slope::Finite(-s.recip()))
                }
            }
        },
        TangleExpr::Twist(inner, n) => match slope(inner)? {
            Slope::Infinite => Ok(Slope::Infinite),
            Slope::Finite(s) => Ok(Slope::Finite(s + rat(*n, 1))),
        },
        TangleExpr::Mirror(inner) | TangleExpr::Hat(inner) => match slope(inner)? {
            Slope::Infinite => Ok(Slope::Infinite),
            Slope::Finite(s) => Ok(Slope::Finite(-s)),
        },
        TangleExpr::Sheared(inner, _) => slope(inner),
        TangleExpr::Earring(_) => Err(TangleError::EarringSlope),
    }
}

/// Parse an expression in the text grammar.
///
/// Grammar: `Q(p/q)` (integer shorthand `Q(p)`, vertical `Q(inf)`),
/// `E + E` (left-associative), `rot(E)`, `twist(E, n)`, `mirror(E)`,
/// `hat(E)`, `earring(E)`, `shear(E, theta|gamma, t)` with rational `t`,
/// and `(E)` for grouping. Whitespace is ignored everywhere.
pub fn parse(text: &str) -> Result<TangleExpr, TangleError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return perr(p.pos, "unexpected trailing input");
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, b: u8) -> Result<(), TangleError> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            perr(self.pos, format!("expected '{}'", b as char))
        }
    }

    fn ident(&mut self) -> (usize, String) {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphabetic() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        (start, String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn integer(&mut self) -> Result<i64, TangleError> {
        self.skip_ws();
        let start = self.pos;
        let neg = if self.src.get(self.pos) == Some(&b'-') {
            self.pos += 1;
            true
        } else {
            false
        };
        let digits = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits {
            return perr(start, "expected an integer");
        }
        let s = std::str::from_utf8(&self.src[digits..self.pos]).unwrap();
        let v: i64 = s
            .parse()
            .map_err(|_| TangleError::Parse {
                pos: start,
                msg: "integer out of range".into(),
            })?;
        Ok(if neg { -v } else { v })
    }

    /// `p`, `p/q`, or `inf`.
    fn rational_body(&mut self) -> Result<(i64, i64), TangleError> {
        if self.peek().map(|b| b.is_ascii_alphabetic()) == Some(true) {
            let (pos, word) = self.ident();
            return if word == "inf" {
                Ok((1, 0))
            } else {
                perr(pos, format!("expected a rational or 'inf', found '{word}'"))
            };
        }
        let p = self.integer()?;
        if self.peek() == Some(b'/') {
            self.pos += 1;
            let q = self.integer()?;
            Ok((p, q))
        } else {
            Ok((p, 1))
        }
    }

    fn expr(&mut self) -> Result<TangleExpr, TangleError> {
        let mut acc = self.atom()?;
        while self.peek() == Some(b'+') {
            self.pos += 1;
            let rhs = self.atom()?;
            acc = TangleExpr::sum(acc, rhs);
        }
        Ok(acc)
    }

    fn atom(&mut self) -> Result<TangleExpr, TangleError> {
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let e = self.expr()?;
            self.expect(b')')?;
            return Ok(e);
        }
        let (start, name) = self.ident();
        match name.as_str() {
            "Q" => {
                self.expect(b'(')?;
                let body_pos = self.pos;
                let (p, q) = self.rational_body()?;
                self.expect(b')')?;
                TangleExpr::rational(p, q).map_err(|_| TangleError::Parse {
                    pos: body_pos,
                    msg: "0/0 is not a tangle".into(),
                })
            }
            "rot" => {
                self.expect(b'(')?;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(TangleExpr::rot(e))
            }
            "twist" => {
                self.expect(b'(')?;
                let e = self.expr()?;
                self.expect(b',')?;
                let n = self.integer()?;
                self.expect(b')')?;
                Ok(TangleExpr::twist(e, n))
            }
            "mirror" => {
                self.expect(b'(')?;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(TangleExpr::mirror(e))
            }
            "hat" => {
                self.expect(b'(')?;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(TangleExpr::hat(e))
            }
            "earring" => {
                self.expect(b'(')?;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(TangleExpr::earring(e))
            }
            "shear" => {
                self.expect(b'(')?;
                let e = self.expr()?;
                self.expect(b',')?;
                let (dpos, dir) = self.ident();
                let direction = match dir.as_str() {
                    "theta" => ShearDirection::Theta,
                    "gamma" => ShearDirection::Gamma,
                    other => {
                        return perr(dpos, format!("expected 'theta' or 'gamma', found '{other}'"))
                    }
                };
                self.expect(b',')?;
                let tpos = self.pos;
                let (tp, tq) = self.rational_body()?;
                if tq == 0 {
                    return perr(tpos, "shear amount must be finite");
                }
                self.expect(b')')?;
                Ok(TangleExpr::sheared(e, Shear::tent(direction, rat(tp, tq))))
            }
            "" => perr(start, "expected an expression"),
            other => perr(start, format!("unknown operation '{other}'")),
        }
    }
}

impl fmt::Display for TangleExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TangleExpr::Rational(p, q) => match q {
                0 => write!(f, "Q(inf)"),
                1 => write!(f, "Q({p})"),
                _ => write!(f, "Q({p}/{q})"),
            },
            TangleExpr::Sum(l, r) => {
                write!(f, "{l} + ")?;
                // A bare right-nested sum would re-parse left-associated.
                if matches!(**r, TangleExpr::Sum(..)) {
                    write!(f, "({r})")
                } else {
                    write!(f, "{r}")
                }
            }
            TangleExpr::Rotate(e) => write!(f, "rot({e})"),
            TangleExpr::Twist(e, n) => write!(f, "twist({e}, {n})"),
            TangleExpr::Mirror(e) => write!(f, "mirror({e})"),
            TangleExpr::Hat(e) => write!(f, "hat({e})"),
            TangleExpr::Earring(e) => write!(f, "earring({e})"),
            TangleExpr::Sheared(e, s) => {
                let dir = match s.direction {
                    ShearDirection::Theta => "theta",
                    ShearDirection::Gamma => "gamma",
                };
                let amt = &s.amount;
                if amt.is_integer() {
                    write!(f, "shear({e}, {dir}, {})", amt.numer())
                } else {
                    write!(f, "shear({e}, {dir}, {}/{})", amt.numer(), amt.denom())
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn q(p: i64, d: i64) -> TangleExpr {
        TangleExpr::rational(p, d).unwrap()
    }

    #[test]
    fn parse_sum_of_rationals() {
        let e = parse("Q(1/2)+Q(-1/3)").unwrap();
        assert_eq!(e, TangleExpr::sum(q(1, 2), q(-1, 3)));
    }

    #[test]
    fn parse_nested_ops() {
        let e = parse("earring(hat(Q(-1/2)))").unwrap();
        assert_eq!(e, TangleExpr::earring(TangleExpr::hat(q(-1, 2))));
    }

    #[test]
    fn parse_rejects_zero_over_zero() {
        let err = parse("Q(0/0)").unwrap_err();
        assert!(matches!(err, TangleError::Parse { pos: 2, .. }), "{err:?}");
    }

    #[test]
    fn parse_is_whitespace_insensitive() {
        let a = parse("twist( Q( 1 / 2 ) ,  -3 ) + shear(Q(0), theta, 1/50)").unwrap();
        let b = parse("twist(Q(1/2),-3)+shear(Q(0),theta,1/50)").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parse_sum_is_left_associative() {
        let e = parse("Q(1)+Q(2)+Q(3)").unwrap();
        assert_eq!(e, TangleExpr::sum(TangleExpr::sum(q(1, 1), q(2, 1)), q(3, 1)));
    }

    #[test]
    fn parse_infinity_and_integer_shorthand() {
        assert_eq!(parse("Q(inf)").unwrap(), TangleExpr::Rational(1, 0));
        assert_eq!(parse("Q(0)").unwrap(), TangleExpr::Rational(0, 1));
        assert_eq!(parse("Q(-4)").unwrap(), TangleExpr::Rational(-4, 1));
    }

    #[test]
    fn rational_is_normalized() {
        assert_eq!(q(2, 4), TangleExpr::Rational(1, 2));
        assert_eq!(q(1, -2), TangleExpr::Rational(-1, 2));
        assert_eq!(q(-3, -6), TangleExpr::Rational(1, 2));
        assert_eq!(q(5, 0), TangleExpr::Rational(1, 0));
        assert_eq!(q(-5, 0), TangleExpr::Rational(1, 0));
    }

    #[test]
    fn parse_reports_positions() {
        match parse("Q(1/2) + blob(Q(1))").unwrap_err() {
            TangleError::Parse { pos, .. } => assert_eq!(pos, 9),
            other => panic!("{other:?}"),
        }
        match parse("Q(1/2))").unwrap_err() {
            TangleError::Parse { pos, .. } => assert_eq!(pos, 6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn slope_of_rational_and_twist() {
        assert_eq!(slope(&q(1, 2)).unwrap(), Slope::finite(1, 2));
        assert_eq!(
            slope(&TangleExpr::twist(q(1, 2), 3)).unwrap(),
            Slope::finite(7, 2)
        );
    }

    #[test]
    fn slope_of_sum_adds() {
        let e = parse("Q(1/3)+Q(1/5)").unwrap();
        assert_eq!(slope(&e).unwrap(), Slope::finite(8, 15));
    }

    #[test]
    fn slope_of_vertical_cases() {
        assert_eq!(slope(&parse("Q(inf)").unwrap()).unwrap(), Slope::Infinite);
        assert_eq!(
            slope(&parse("rot(Q(0))").unwrap()).unwrap(),
            Slope::Infinite
        );
        assert_eq!(
            slope(&parse("rot(Q(inf))").unwrap()).unwrap(),
            Slope::finite(0, 1)
        );
        assert_eq!(
            slope(&parse("Q(inf)+Q(1/2)").unwrap()).unwrap(),
            Slope::Infinite
        );
        assert_eq!(
            slope(&parse("twist(Q(inf), 5)").unwrap()).unwrap(),
            Slope::Infinite
        );
        assert_eq!(
            slope(&parse("Q(inf)+Q(inf)").unwrap()),
            Err(TangleError::VerticalSum)
        );
    }

    #[test]
    fn slope_rejects_earring() {
        assert_eq!(
            slope(&parse("earring(Q(0))").unwrap()),
            Err(TangleError::EarringSlope)
        );
    }

    #[test]
    fn slope_passes_through_shear() {
        let e = parse("shear(Q(1/2), theta, 1/100)").unwrap();
        assert_eq!(slope(&e).unwrap(), Slope::finite(1, 2));
    }

    fn random_expr(rng: &mut StdRng, depth: usize, allow_earring: bool) -> TangleExpr {
        if depth == 0 || rng.gen_bool(0.3) {
            let p = rng.gen_range(-9i64..=9);
            let d = rng.gen_range(-9i64..=9);
            return TangleExpr::rational(p, d).unwrap_or_else(|_| q(1, 1));
        }
        match rng.gen_range(0..if allow_earring { 7 } else { 6 }) {
            0 => TangleExpr::sum(
                random_expr(rng, depth - 1, allow_earring),
                random_expr(rng, depth - 1, allow_earring),
            ),
            1 => TangleExpr::rot(random_expr(rng, depth - 1, allow_earring)),
            2 => TangleExpr::twist(
                random_expr(rng, depth - 1, allow_earring),
                rng.gen_range(-5..=5),
            ),
            3 => TangleExpr::mirror(random_expr(rng, depth - 1, allow_earring)),
            4 => TangleExpr::hat(random_expr(rng, depth - 1, allow_earring)),
            5 => TangleExpr::sheared(
                random_expr(rng, depth - 1, allow_earring),
                Shear::tent(
                    if rng.gen_bool(0.5) {
                        ShearDirection::Theta
                    } else {
                        ShearDirection::Gamma
                    },
                    rat(rng.gen_range(1..50), 100),
                ),
            ),
            _ => TangleExpr::earring(random_expr(rng, depth - 1, allow_earring)),
        }
    }

    #[test]
    fn slope_double_rotation_is_identity() {
        let mut rng = StdRng::seed_from_u64(41);
        let mut checked = 0;
        for _ in 0..200 {
            let e = random_expr(&mut rng, 4, false);
            let Ok(s) = slope(&e) else { continue };
            let rr = TangleExpr::rot(TangleExpr::rot(e));
            assert_eq!(slope(&rr).unwrap(), s);
            checked += 1;
        }
        assert!(checked > 100);
    }

    #[test]
    fn slope_mirror_and_twist_laws() {
        let mut rng = StdRng::seed_from_u64(43);
        let mut checked = 0;
        for _ in 0..200 {
            let e = random_expr(&mut rng, 4, false);
            let Ok(s) = slope(&e) else { continue };
            let m = slope(&TangleExpr::mirror(e.clone())).unwrap();
            match (&s, &m) {
                (Slope::Finite(a), Slope::Finite(b)) => assert_eq!(*b, -a.clone()),
                (Slope::Infinite, Slope::Infinite) => {}
                other => panic!("mirror changed verticality: {other:?}"),
            }
            let n = rng.gen_range(-7i64..=7);
            let t = slope(&TangleExpr::twist(e, n)).unwrap();
            match (&s, &t) {
                (Slope::Finite(a), Slope::Finite(b)) => assert_eq!(*b, a + rat(n, 1)),
                (Slope::Infinite, Slope::Infinite) => {}
                other => panic!("twist changed verticality: {other:?}"),
            }
            checked += 1;
        }
        assert!(checked > 100);
    }

    #[test]
    fn print_parse_round_trip() {
        let mut rng = StdRng::seed_from_u64(47);
        for _ in 0..300 {
            let e = random_expr(&mut rng, 5, true);
            let text = e.to_string();
            let back = parse(&text).unwrap_or_else(|err| panic!("{text}: {err}"));
            assert_eq!(back, e, "{text}");
        }
        // Right-nested sums force grouping parentheses.
        let e = TangleExpr::sum(q(1, 2), TangleExpr::sum(q(1, 3), q(1, 5)));
        assert_eq!(e.to_string(), "Q(1/2) + (Q(1/3) + Q(1/5))");
        assert_eq!(parse(&e.to_string()).unwrap(), e);
    }
}
