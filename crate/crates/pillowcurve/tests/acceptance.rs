//! Acceptance suite: one test per advertised guarantee, each printing a
//! single pass line with its runtime and asserting the stated tolerance and
//! time bound.

use std::time::{Duration, Instant};

use num_traits::{Signed, ToPrimitive};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use pillowcurve::charvar::{
    eval, remove_corner_circles, sum_curves, Component, ComponentKind, EvalOptions, Multicurve,
};
use pillowcurve::exactgeom::{rat, rat_i, LiftPolyline, PlanePoint, Rat};
use pillowcurve::floer::{
    chain_data, chain_data_auto, chain_data_with_cochain, count_bigons, default_budget, intersect,
    self_intersections, Generator,
};
use pillowcurve::oracle::{
    corner_hessian, fiber_endpoint_data, phi_t_closed, phi_t_quaternion, s_sign, spherical_theta3,
    C3Point,
};
use pillowcurve::tangle::{parse, slope, Slope, TangleExpr};

const PI: f64 = std::f64::consts::PI;

fn ev(src: &str) -> Multicurve {
    eval(&parse(src).unwrap(), &EvalOptions::default()).unwrap()
}

fn rat_f64(r: &Rat) -> f64 {
    r.numer().to_f64().unwrap() / r.denom().to_f64().unwrap()
}

fn done(name: &str, started: Instant, bound: Duration) {
    let elapsed = started.elapsed();
    println!("{name}: pass in {elapsed:.2?}");
    assert!(elapsed < bound, "{name} took {elapsed:?}, bound {bound:?}");
}

#[test]
fn c1_slope_algebra_on_random_rationals() {
    let t0 = Instant::now();
    let mut rng = StdRng::seed_from_u64(101);
    let mut checked = 0;
    while checked < 50 {
        let p = rng.gen_range(-20i64..=20);
        let q = rng.gen_range(1i64..=20);
        if num_integer::gcd(p, q) != 1 {
            continue;
        }
        checked += 1;
        let s = rat(p, q);
        let base = TangleExpr::rational(p, q).unwrap();
        assert_eq!(slope(&base).unwrap(), Slope::Finite(s.clone()));

        let n = rng.gen_range(-7i64..=7);
        let twisted = TangleExpr::Twist(Box::new(base.clone()), n);
        assert_eq!(slope(&twisted).unwrap(), Slope::Finite(&s + rat_i(n)));

        let rotated = TangleExpr::Rotate(Box::new(base.clone()));
        let expect = if p == 0 {
            Slope::Infinite
        } else {
            Slope::Finite(-s.recip())
        };
        assert_eq!(slope(&rotated).unwrap(), expect);

        let mirrored = TangleExpr::Mirror(Box::new(base));
        assert_eq!(slope(&mirrored).unwrap(), Slope::Finite(-&s));
    }
    done("slope algebra", t0, Duration::from_secs(1));
}

#[test]
fn c2_sum_fibers_match_the_spherical_law() {
    let t0 = Instant::now();
    let l1 = ev("Q(1/2)");
    let l2 = ev("Q(-1/3)");
    let (_, fibers) = sum_curves(&l1, &l2).unwrap();
    assert_eq!(fibers.len(), 1);
    let f = &fibers[0];
    assert!(!f.corner_circle);
    assert_eq!(f.gamma0, rat_i(1));
    assert_eq!(f.theta_min.0, rat(1, 6));
    assert_eq!(f.theta_max.0, rat(5, 6));
    let z2 = rat_f64(&f.theta1.0) * PI;
    let z3 = rat_f64(&f.theta2.0) * PI;
    for (psi, expect) in [(0.0, &f.theta_min.0), (PI, &f.theta_max.0)] {
        let got = spherical_theta3(z2, z3, psi);
        assert!((got - rat_f64(expect) * PI).abs() < 1e-9);
    }

    let l3 = ev("Q(1/2)");
    let (_, fibers) = sum_curves(&l1, &l3).unwrap();
    assert!(fibers.iter().any(|f| f.corner_circle));
    let (l1s, shears) = remove_corner_circles(&l1, &l3).unwrap();
    assert!(!shears.is_empty());
    let (_, cleared) = sum_curves(&l1s, &l3).unwrap();
    assert!(cleared.iter().all(|f| !f.corner_circle));
    done("tangle-sum fibers", t0, Duration::from_secs(1));
}

#[test]
fn c3_resolution_counts_are_eps_stable() {
    let t0 = Instant::now();
    let (_, fibers) = sum_curves(&ev("Q(1/3)"), &ev("Q(1/5)")).unwrap();
    assert_eq!(fibers.len(), 4);

    let ast = parse("Q(1/3) + Q(1/5)").unwrap();
    let mut shapes = vec![];
    for eps in [rat(1, 50), rat(1, 100), rat(1, 200)] {
        let opts = EvalOptions { eps, ..EvalOptions::default() };
        let m = eval(&ast, &opts).unwrap();
        let selfx = self_intersections(&m).unwrap().len();
        shapes.push((m.components.len(), selfx));
    }
    assert_eq!(shapes[0], shapes[1]);
    assert_eq!(shapes[1], shapes[2]);
    done("resolution stability", t0, Duration::from_secs(2));
}

#[test]
fn c4_unlink_chain_data_and_cochain_deformation() {
    let t0 = Instant::now();
    let l1 = ev("shear(Q(0), theta, 1/50)");
    let l2 = ev("earring(Q(0))");
    let cd = chain_data(&l1, &l2, &default_budget()).unwrap();
    assert_eq!(cd.generators.len(), 2);
    assert_eq!(cd.differential_entries(), 0);
    assert_eq!(cd.homology_rank().unwrap(), 2);

    let (cdc, _) = chain_data_with_cochain(&l1, &l2, 0, &default_budget()).unwrap();
    let triangles: usize = cdc.triangle_counts.as_ref().unwrap().iter().flatten().sum();
    assert_eq!(triangles, 1);
    assert_eq!(cdc.homology_rank().unwrap(), 0);
    done("unlink golden values", t0, Duration::from_secs(2));
}

#[test]
fn c5_pretzel_chain_data_with_auto_shear() {
    let t0 = Instant::now();
    let l1 = ev("earring(hat(Q(-1/2)))");
    let l2 = ev("Q(1/3) + Q(1/5)");
    let (cd, _) = chain_data_auto(&l1, &l2, None, &default_budget()).unwrap();
    assert_eq!(cd.generators.len(), 9);
    let pairs: Vec<(usize, usize)> = (0..9)
        .flat_map(|i| (0..9).map(move |j| (i, j)))
        .filter(|&(i, j)| cd.bigon_counts[i][j] % 2 == 1)
        .collect();
    assert_eq!(pairs.len(), 2);
    let mut touched: Vec<usize> = pairs.iter().flat_map(|&(i, j)| [i, j]).collect();
    touched.sort();
    touched.dedup();
    assert_eq!(touched.len(), 4, "bigon vertices must be pairwise distinct");
    assert_eq!(cd.homology_rank().unwrap(), 5);
    done("pretzel golden values", t0, Duration::from_secs(30));
}

#[test]
fn c6_trace_formulas_agree_at_random_points() {
    let t0 = Instant::now();
    let mut rng = StdRng::seed_from_u64(606);
    let tau = 2.0 * PI;
    let mut route_max = 0f64;
    let mut product_max = 0f64;
    for _ in 0..100_000 {
        let pt = C3Point::new(
            rng.gen::<f64>() * tau,
            rng.gen::<f64>() * tau,
            rng.gen::<f64>() * tau,
            rng.gen::<f64>() * tau,
            rng.gen::<f64>() * 0.3,
        );
        route_max = route_max.max((phi_t_quaternion(&pt) - phi_t_closed(&pt)).abs());
        let p0 = C3Point { t: 0.0, ..pt };
        let product = p0.gamma.sin() * p0.alpha.cos();
        product_max = product_max.max((phi_t_closed(&p0) - product).abs());
    }
    assert!(route_max < 1e-10, "route residual {route_max:e}");
    assert!(product_max < 1e-12, "product residual {product_max:e}");
    done("trace formula agreement", t0, Duration::from_secs(10));
}

#[test]
fn c7_endpoint_signs_are_antisymmetric() {
    let t0 = Instant::now();
    let mut rng = StdRng::seed_from_u64(707);
    for _ in 0..1000 {
        let th1 = rng.gen::<f64>() * (PI - 2e-3) + 1e-3;
        let th2 = rng.gen::<f64>() * (PI - 2e-3) + 1e-3;
        let ((b0, t0v), (b1, t1v)) = fiber_endpoint_data(th1, th2);
        let s0 = s_sign(t0v, b0);
        let s1 = s_sign(t1v, b1);
        assert!((s0 + s1).abs() < 1e-10, "s0 {s0} s1 {s1}");
    }
    done("endpoint sign antisymmetry", t0, Duration::from_secs(1));
}

#[test]
fn c8_corner_hessian_shape() {
    let t0 = Instant::now();
    let t = 0.1f64;
    let h = corner_hessian(t);
    assert!(h.nonsingular);
    let signature: i32 = h.eigenvalues.iter().map(|&l| if l > 0.0 { 1 } else { -1 }).sum();
    assert_eq!(signature, 0);
    let expected = -2.0 * t.cos() * t.sin();
    assert!((h.matrix[(0, 1)] - expected).abs() < 1e-6);
    done("corner Hessian", t0, Duration::from_secs(1));
}

// ---------------------------------------------------------------------------
// Independent face oracle for bigon counting.
//
// The reference counts bigons by enumerating boundary paths and testing the
// developed polygon. The oracle here knows nothing of that: it builds the
// planar subdivision induced by the two curves, enumerates its bounded faces
// from half-edge rotation orders, and declares a face a bigon exactly when
// its boundary changes curve membership twice. On configurations whose
// curves are gamma-monotone open arcs every bigon is such a face, so the two
// counts must agree pair by pair.

mod faces {
    use super::*;
    use std::collections::BTreeMap;

    #[derive(Clone)]
    struct HalfEdge {
        from: usize,
        to: usize,
        curve: u8,
        twin: usize,
        next: usize,
    }

    fn angle_class(d: &PlanePoint) -> u8 {
        let g = if d.gamma.is_positive() {
            2
        } else if d.gamma.is_negative() {
            0
        } else {
            1
        };
        let t = if d.theta.is_positive() {
            2
        } else if d.theta.is_negative() {
            0
        } else {
            1
        };
        match (g, t) {
            (2, 1) => 0,
            (2, 2) => 1,
            (1, 2) => 2,
            (0, 2) => 3,
            (0, 1) => 4,
            (0, 0) => 5,
            (1, 0) => 6,
            (2, 0) => 7,
            _ => unreachable!(),
        }
    }

    fn ccw_cmp(a: &PlanePoint, b: &PlanePoint) -> std::cmp::Ordering {
        angle_class(a).cmp(&angle_class(b)).then_with(|| {
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

    /// Directed bigon faces of the arrangement of two curves, as
    /// (x, y) corner points: boundary runs along curve 0 from x to y with
    /// the face on its left.
    pub fn bigon_faces(l1: &Multicurve, l2: &Multicurve) -> Vec<(PlanePoint, PlanePoint)> {
        // Segment soup with curve ids.
        let mut segs: Vec<(PlanePoint, PlanePoint, u8)> = vec![];
        for (id, curve) in [(0u8, l1), (1u8, l2)] {
            for c in &curve.components {
                for i in 0..c.lift.segment_count() {
                    let (a, b) = c.lift.segment(i);
                    segs.push((a, b, id));
                }
            }
        }
        // Split every segment at every crossing.
        let mut pieces: Vec<(PlanePoint, PlanePoint, u8)> = vec![];
        for (i, s) in segs.iter().enumerate() {
            let mut cuts: Vec<Rat> = vec![rat_i(0), rat_i(1)];
            for (j, o) in segs.iter().enumerate() {
                if i == j {
                    continue;
                }
                for hit in pillowcurve::exactgeom::segment_intersections(&s.0, &s.1, &o.0, &o.1) {
                    cuts.push(hit.t);
                }
            }
            cuts.sort();
            cuts.dedup();
            let d = s.1.sub(&s.0);
            for w in cuts.windows(2) {
                let a = s.0.add(&d.scale(&w[0]));
                let b = s.0.add(&d.scale(&w[1]));
                if a != b {
                    pieces.push((a, b, s.2));
                }
            }
        }
        // Vertex table and half edges.
        let mut vid: BTreeMap<String, usize> = BTreeMap::new();
        let mut coords: Vec<PlanePoint> = vec![];
        let mut intern = |p: &PlanePoint| -> usize {
            let key = format!("{:?}|{:?}", p.gamma, p.theta);
            *vid.entry(key).or_insert_with(|| {
                coords.push(p.clone());
                coords.len() - 1
            })
        };
        let mut edges: Vec<HalfEdge> = vec![];
        for (a, b, curve) in &pieces {
            let u = intern(a);
            let v = intern(b);
            let e1 = edges.len();
            let e2 = e1 + 1;
            edges.push(HalfEdge { from: u, to: v, curve: *curve, twin: e2, next: usize::MAX });
            edges.push(HalfEdge { from: v, to: u, curve: *curve, twin: e1, next: usize::MAX });
        }
        // Rotation order of outgoing edges at each vertex.
        let mut outgoing: Vec<Vec<usize>> = vec![vec![]; coords.len()];
        for (i, e) in edges.iter().enumerate() {
            outgoing[e.from].push(i);
        }
        for (v, out) in outgoing.iter_mut().enumerate() {
            out.sort_by(|&a, &b| {
                let da = coords[edges[a].to].sub(&coords[v]);
                let db = coords[edges[b].to].sub(&coords[v]);
                ccw_cmp(&da, &db)
            });
        }
        // next(e): one step clockwise from twin(e) in the rotation at the
        // head of e, which traces faces with their interior on the left.
        for i in 0..edges.len() {
            let at = edges[i].to;
            let ring = &outgoing[at];
            let pos = ring.iter().position(|&e| e == edges[i].twin).unwrap();
            edges[i].next = ring[(pos + ring.len() - 1) % ring.len()];
        }
        // Trace faces, keep bounded ones, read off membership transitions.
        let mut seen = vec![false; edges.len()];
        let mut out = vec![];
        for start in 0..edges.len() {
            if seen[start] {
                continue;
            }
            let mut cycle = vec![];
            let mut e = start;
            loop {
                seen[e] = true;
                cycle.push(e);
                e = edges[e].next;
                if e == start {
                    break;
                }
            }
            let mut area2 = rat_i(0);
            for &e in &cycle {
                area2 = area2 + coords[edges[e].from].cross(&coords[edges[e].to]);
            }
            if !area2.is_positive() {
                continue;
            }
            let m = cycle.len();
            let mut transitions = vec![];
            for k in 0..m {
                if edges[cycle[k]].curve != edges[cycle[(k + 1) % m]].curve {
                    transitions.push(k);
                }
            }
            if transitions.len() != 2 {
                continue;
            }
            let corner = |k: usize| coords[edges[cycle[k]].to].clone();
            let (i, j) = (transitions[0], transitions[1]);
            // x: boundary switches onto curve 0 there.
            let (x, y) = if edges[cycle[(i + 1) % m]].curve == 0 {
                (corner(i), corner(j))
            } else {
                (corner(j), corner(i))
            };
            out.push((x, y));
        }
        out
    }
}

/// Random gamma-monotone open arc with at most 6 segments, on a 1/64 grid
/// inside the chart cell gamma in (0,1), theta in (1,2).
fn monotone_arc(rng: &mut StdRng) -> Multicurve {
    loop {
        let nseg = rng.gen_range(1usize..=6);
        let mut xs: Vec<i64> = vec![8, 56];
        while xs.len() < nseg + 1 {
            let x = rng.gen_range(9i64..56);
            if !xs.contains(&x) {
                xs.push(x);
            }
        }
        xs.sort();
        let ys: Vec<i64> = (0..=nseg).map(|_| rng.gen_range(74i64..=118)).collect();
        let vertices: Vec<PlanePoint> = xs
            .iter()
            .zip(&ys)
            .map(|(&x, &y)| PlanePoint::new(rat(x, 64), rat(y, 64)))
            .collect();
        let lift = LiftPolyline::open(vertices);
        if lift.validate().is_ok() {
            return Multicurve {
                components: vec![Component {
                    kind: ComponentKind::Arc,
                    lift,
                    tags: Default::default(),
                    endpoint_corners: vec![],
                }],
            };
        }
    }
}

#[test]
fn c9_bigon_counts_match_face_oracle() {
    let t0 = Instant::now();
    let mut rng = StdRng::seed_from_u64(909);
    let budget = default_budget();
    let mut accepted = 0;
    let mut attempts = 0;
    let mut bigons_seen = 0usize;
    while accepted < 200 {
        attempts += 1;
        assert!(attempts < 4000, "config generation stalled");
        let l1 = monotone_arc(&mut rng);
        let l2 = monotone_arc(&mut rng);
        let gens: Vec<Generator> = match intersect(&l1, &l2) {
            Ok(g) if g.len() >= 2 => g,
            _ => continue,
        };
        accepted += 1;
        let faces = faces::bigon_faces(&l1, &l2);
        for x in &gens {
            for y in &gens {
                if x == y {
                    continue;
                }
                let walked = count_bigons(&l1, &l2, x, y, &budget).unwrap();
                let oracle = faces
                    .iter()
                    .filter(|(fx, fy)| {
                        fx.gamma == x.point.gamma
                            && fx.theta == x.point.theta
                            && fy.gamma == y.point.gamma
                            && fy.theta == y.point.theta
                    })
                    .count();
                assert_eq!(
                    walked % 2,
                    oracle % 2,
                    "parity mismatch at {:?} -> {:?} (walked {walked}, faces {oracle})",
                    x.point,
                    y.point
                );
                bigons_seen += walked;
            }
        }
    }
    assert!(bigons_seen > 0, "the sample never produced a bigon");
    done("bigon face oracle", t0, Duration::from_secs(30));
}
