//! Floating-point SU(2) cross-checks for the exact engine.
//!
//! Everything here works with unit quaternions in radians and plain f64.
//! The module provides two independent evaluations of the perturbed trace
//! function on the 4-torus parameter space (a direct quaternion-word
//! computation and a trigonometric closed form), pillowcase coordinates of
//! gauge-fixed representation data, the sign function controlling how circle
//! fibers resolve, spherical-triangle fiber endpoints, a grid sampler for
//! the cut locus, and the finite-difference corner Hessian. None of this
//! feeds the exact computations; it exists to catch transcription errors in
//! them and is surfaced through tests and the `oracle` CLI subcommands.

use nalgebra::Matrix4;
use thiserror::Error;

pub const TAU: f64 = std::f64::consts::TAU;
pub const PI: f64 = std::f64::consts::PI;

/// Default tolerance for traceless/coequatorial/relation preconditions.
pub const GEOM_TOL: f64 = 1e-9;
/// Two evaluation routes of the trace function must agree this closely.
pub const ROUTE_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("quaternion is not traceless (|w| = {0:.3e})")]
    NotTraceless(f64),
    #[error("inputs are not coequatorial (residual {0:.3e})")]
    NotCoequatorial(f64),
    #[error("pillowcase relation violated (residual {0:.3e})")]
    RelationViolated(f64),
    #[error("trace function routes disagree: quaternion {quat:.15e} vs closed form {closed:.15e}")]
    RouteMismatch { quat: f64, closed: f64 },
}

/// A quaternion w + x i + y j + z k.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }
    }

    pub const fn one() -> Self {
        Quat::new(1.0, 0.0, 0.0, 0.0)
    }

    pub const I: Quat = Quat::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quat = Quat::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quat = Quat::new(0.0, 0.0, 0.0, 1.0);

    /// Pure quaternion from a 3-vector.
    pub fn pure(v: [f64; 3]) -> Self {
        Quat::new(0.0, v[0], v[1], v[2])
    }

    pub fn vec(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn mul(&self, o: &Quat) -> Quat {
        Quat::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }

    pub fn conj(&self) -> Quat {
        Quat::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn scale(&self, s: f64) -> Quat {
        Quat::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    pub fn sub(&self, o: &Quat) -> Quat {
        Quat::new(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalize(&self) -> Quat {
        self.scale(1.0 / self.norm())
    }

    /// Imaginary part, as a pure quaternion.
    pub fn im(&self) -> Quat {
        Quat::new(0.0, self.x, self.y, self.z)
    }

    /// exp of a pure quaternion: cos|v| + sinc|v| v.
    pub fn exp_pure(v: &Quat) -> Quat {
        debug_assert!(v.w.abs() < 1e-14);
        let n = v.norm();
        let s = sinc(n);
        Quat::new(n.cos(), s * v.x, s * v.y, s * v.z)
    }

    pub fn is_traceless(&self, tol: f64) -> bool {
        self.w.abs() <= tol
    }
}

/// sin(x)/x with a series branch near zero to avoid cancellation.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

fn clamp1(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// The circle through i and j: e^{u k} i = cos u i + sin u j.
pub fn equator_point(u: f64) -> Quat {
    Quat::new(0.0, u.cos(), u.sin(), 0.0)
}

/// The holonomy direction with polar angle alpha from k and azimuth beta:
/// sin a cos b i + sin a sin b j + cos a k.
pub fn gamma_bar(alpha: f64, beta: f64) -> Quat {
    Quat::new(0.0, alpha.sin() * beta.cos(), alpha.sin() * beta.sin(), alpha.cos())
}

/// Relative angle of y about the x -> z orientation, in [0, 2pi).
///
/// All three must be traceless and lie on one great circle. The orientation
/// is fixed so that z sits at angle in (0, pi) from x; when z is parallel to
/// x the orientation falls back to the plane of x and y, which reduces the
/// output to the unsigned angle in [0, pi].
pub fn rel_angle(x: &Quat, y: &Quat, z: &Quat) -> Result<f64, OracleError> {
    for q in [x, y, z] {
        if !q.is_traceless(GEOM_TOL) {
            return Err(OracleError::NotTraceless(q.w.abs()));
        }
    }
    let xv = x.normalize().vec();
    let yv = y.normalize().vec();
    let zv = z.normalize().vec();
    let mut axis = cross(xv, zv);
    if norm3(axis) < 1e-9 {
        axis = cross(xv, yv);
        if norm3(axis) < 1e-9 {
            // Everything on one line through the origin: angle is 0 or pi.
            return Ok(clamp1(dot(xv, yv)).acos());
        }
    }
    let n = norm3(axis);
    let axis = [axis[0] / n, axis[1] / n, axis[2] / n];
    let resid = dot(yv, axis).abs();
    if resid > GEOM_TOL {
        return Err(OracleError::NotCoequatorial(resid));
    }
    let s = dot(cross(xv, yv), axis);
    let c = dot(xv, yv);
    let mut ang = s.atan2(c);
    if ang < 0.0 {
        ang += TAU;
    }
    Ok(ang)
}

/// Pillowcase coordinates of boundary data (a, b, c, d).
///
/// Inputs must be traceless and satisfy a·conj(c) = b·conj(d) within
/// tolerance. Returns (gamma, theta) in radians with gamma = angle(a, b) in
/// [0, pi] and theta the relative angle of c about the a -> b orientation.
pub fn pillowcase_coords(a: &Quat, b: &Quat, c: &Quat, d: &Quat) -> Result<(f64, f64), OracleError> {
    for q in [a, b, c, d] {
        if !q.is_traceless(GEOM_TOL) {
            return Err(OracleError::NotTraceless(q.w.abs()));
        }
    }
    let lhs = a.mul(&c.conj());
    let rhs = b.mul(&d.conj());
    let resid = lhs.sub(&rhs).norm();
    if resid > GEOM_TOL {
        return Err(OracleError::RelationViolated(resid));
    }
    let an = a.normalize();
    let bn = b.normalize();
    let gamma = clamp1(dot(an.vec(), bn.vec())).acos();
    let theta = rel_angle(a, c, b)?;
    Ok((gamma, theta))
}

/// A point of the 4-torus parameter space together with the perturbation
/// strength t. Angles in radians.
#[derive(Clone, Copy, Debug)]
pub struct C3Point {
    pub gamma: f64,
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub t: f64,
}

impl C3Point {
    pub fn new(gamma: f64, theta: f64, alpha: f64, beta: f64, t: f64) -> Self {
        C3Point { gamma, theta, alpha, beta, t }
    }

    /// The representation data (a, b, c, x) of the point: a = i,
    /// b = e^{gamma k} i, c = e^{theta k} i, x the (alpha, beta) direction.
    pub fn reps(&self) -> (Quat, Quat, Quat, Quat) {
        (
            Quat::I,
            equator_point(self.gamma),
            equator_point(self.theta),
            gamma_bar(self.alpha, self.beta),
        )
    }
}

/// Trace function by direct quaternion arithmetic.
///
/// The perturbation holonomy is p = exp(t Im(a c^-1 x)); the boundary word
/// then evaluates to x p a^-1 p^-1 b, whose real part is the halved trace.
pub fn phi_t_quaternion(pt: &C3Point) -> f64 {
    let (a, b, c, x) = pt.reps();
    let lam = a.mul(&c.conj()).mul(&x);
    let p = Quat::exp_pure(&lam.im().scale(pt.t));
    x.mul(&p).mul(&a.conj()).mul(&p.conj()).mul(&b).w
}

/// Trace function by the trigonometric closed form cos(g) F + sin(g) G.
///
/// Derived by contracting the boundary word against the rotation that p
/// induces on i. The G term here fixes two slips in the usual printed form
/// (cos(2n) where cos^2 n appears, and the quadratic correction term); the
/// random-point agreement test against [`phi_t_quaternion`] pins it down.
pub fn phi_t_closed(pt: &C3Point) -> f64 {
    let (g, th, al, be, t) = (pt.gamma, pt.theta, pt.alpha, pt.beta, pt.t);
    let (sa, ca) = al.sin_cos();
    let (sth, cth) = th.sin_cos();
    let (sb, cb) = be.sin_cos();
    let n = t * (1.0 - ca * ca * sth * sth).sqrt();
    let cn = n.cos();
    let sc = sinc(n);
    let stb = (th - be).sin();
    let ctb = (be - th).cos();
    let f = 2.0 * cn * sc * t * (sa * sa * sb * stb - ca * ca * cth)
        + 2.0 * sc * sc * t * t * sa * sa * cb * ca * sth * ctb;
    let gg = ca * (2.0 * n).cos() - 2.0 * cn * sc * t * sa * sa * cb * stb
        + 2.0 * sc * sc * t * t * ca * sa * sa * ctb * sth * sb;
    g.cos() * f + g.sin() * gg
}

/// Both routes; errors loudly if they disagree beyond tolerance.
pub fn phi_t(pt: &C3Point) -> Result<f64, OracleError> {
    let quat = phi_t_quaternion(pt);
    let closed = phi_t_closed(pt);
    if (quat - closed).abs() > ROUTE_TOL {
        return Err(OracleError::RouteMismatch { quat, closed });
    }
    Ok(closed)
}

/// The sign function on the cut locus: sin(beta) sin(theta - beta).
pub fn s_sign(theta: f64, beta: f64) -> f64 {
    beta.sin() * (theta - beta).sin()
}

/// Fiber endpoint angle by the spherical law of cosines:
/// arccos(cos z2 cos z3 + sin z2 sin z3 cos psi), in [0, pi].
pub fn spherical_theta3(z2: f64, z3: f64, psi: f64) -> f64 {
    clamp1(z2.cos() * z3.cos() + z2.sin() * z3.sin() * psi.cos()).acos()
}

/// Parameter data (beta, theta) of the two coplanar fiber endpoints over a
/// matched pair with interior angles theta1, theta2.
///
/// At psi = 0 the third holonomy sits at theta1 - theta2 from the base; at
/// psi = pi it sits at theta1 + theta2. Feeding these to [`s_sign`] gives
/// exactly opposite values, which is how the two circle smoothings pair up.
pub fn fiber_endpoint_data(theta1: f64, theta2: f64) -> ((f64, f64), (f64, f64)) {
    ((theta1, theta1 - theta2), (theta1, theta1 + theta2))
}

/// One near-zero sample of the trace function.
#[derive(Clone, Copy, Debug)]
pub struct VarietySample {
    pub gamma: f64,
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub phi_abs: f64,
}

/// Scan a uniform grid of the 4-torus and keep points where |phi_t| < tol.
///
/// With tol at the default 1e-8 only structurally exact zeros survive on a
/// uniform grid; this is meant for qualitative inspection and the t = 0
/// product-form check, not for root finding.
pub fn sample_variety(t: f64, grid_size: usize, tol: f64) -> Vec<VarietySample> {
    assert!(grid_size >= 16, "grid too coarse to be meaningful");
    let step = TAU / grid_size as f64;
    let mut out = Vec::new();
    for ig in 0..grid_size {
        let gamma = ig as f64 * step;
        for it in 0..grid_size {
            let theta = it as f64 * step;
            for ia in 0..grid_size {
                let alpha = ia as f64 * step;
                for ib in 0..grid_size {
                    let beta = ib as f64 * step;
                    let phi = phi_t_closed(&C3Point::new(gamma, theta, alpha, beta, t));
                    if phi.abs() < tol {
                        out.push(VarietySample { gamma, theta, alpha, beta, phi_abs: phi.abs() });
                    }
                }
            }
        }
    }
    out
}

/// Which boundary faces of a slice square a zero component touches.
///
/// The slice fixes (theta, beta) and scans (gamma, alpha) near
/// (gamma0, pi/2). Faces: `HPlus`/`HMinus` are the alpha faces on the
/// cos(alpha) > 0 / < 0 sides, `APlus`/`AMinus` the gamma faces above/below
/// gamma0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum SliceFace {
    HPlus,
    HMinus,
    APlus,
    AMinus,
}

#[derive(Clone, Debug)]
pub struct SliceReport {
    /// Sorted face sets, one per zero component that reaches the boundary.
    pub components: Vec<Vec<SliceFace>>,
    pub s_value: f64,
}

/// Connectivity of the zero set of phi_t on a (gamma, alpha) slice square.
///
/// Marks grid cells whose corner values change sign and joins them by
/// 8-adjacency; reports, per component, the set of square faces it touches.
pub fn slice_connectivity(
    t: f64,
    gamma0: f64,
    theta: f64,
    beta: f64,
    half_width: f64,
    grid: usize,
) -> SliceReport {
    assert!(grid >= 8);
    let n = grid;
    let step = 2.0 * half_width / n as f64;
    // Corner values on the (n+1)^2 lattice.
    let mut vals = vec![0.0f64; (n + 1) * (n + 1)];
    for ig in 0..=n {
        let gamma = gamma0 - half_width + ig as f64 * step;
        for ia in 0..=n {
            let alpha = PI / 2.0 - half_width + ia as f64 * step;
            vals[ig * (n + 1) + ia] = phi_t_closed(&C3Point::new(gamma, theta, alpha, beta, t));
        }
    }
    let val = |ig: usize, ia: usize| vals[ig * (n + 1) + ia];
    let mut marked = vec![false; n * n];
    for ig in 0..n {
        for ia in 0..n {
            let c = [val(ig, ia), val(ig + 1, ia), val(ig, ia + 1), val(ig + 1, ia + 1)];
            let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            marked[ig * n + ia] = lo <= 0.0 && hi >= 0.0;
        }
    }
    // Flood-fill marked cells with 8-adjacency.
    let mut comp = vec![usize::MAX; n * n];
    let mut ncomp = 0;
    for start in 0..n * n {
        if !marked[start] || comp[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        comp[start] = ncomp;
        while let Some(cell) = stack.pop() {
            let (ig, ia) = (cell / n, cell % n);
            for dg in -1isize..=1 {
                for da in -1isize..=1 {
                    if dg == 0 && da == 0 {
                        continue;
                    }
                    let (jg, ja) = (ig as isize + dg, ia as isize + da);
                    if jg < 0 || ja < 0 || jg >= n as isize || ja >= n as isize {
                        continue;
                    }
                    let idx = jg as usize * n + ja as usize;
                    if marked[idx] && comp[idx] == usize::MAX {
                        comp[idx] = ncomp;
                        stack.push(idx);
                    }
                }
            }
        }
        ncomp += 1;
    }
    let mut faces: Vec<std::collections::BTreeSet<SliceFace>> = vec![Default::default(); ncomp];
    for ig in 0..n {
        for ia in 0..n {
            let c = comp[ig * n + ia];
            if c == usize::MAX {
                continue;
            }
            // alpha-min face has cos(alpha) > 0: HPlus.
            if ia == 0 {
                faces[c].insert(SliceFace::HPlus);
            }
            if ia == n - 1 {
                faces[c].insert(SliceFace::HMinus);
            }
            if ig == 0 {
                faces[c].insert(SliceFace::AMinus);
            }
            if ig == n - 1 {
                faces[c].insert(SliceFace::APlus);
            }
        }
    }
    let mut components: Vec<Vec<SliceFace>> = faces
        .into_iter()
        .filter(|f| !f.is_empty())
        .map(|f| f.into_iter().collect())
        .collect();
    components.sort();
    SliceReport { components, s_value: s_sign(theta, beta) }
}

/// Finite-difference Hessian of phi_t at the corner point (0, 0, pi/2, 0).
#[derive(Clone, Debug)]
pub struct CornerHessian {
    pub matrix: Matrix4<f64>,
    pub eigenvalues: [f64; 4],
    pub nonsingular: bool,
    /// Number of positive minus number of negative eigenvalues.
    pub signature: i32,
}

/// Default finite-difference step. Central differences at h = 1e-3 with one
/// Richardson step leave truncation ~h^4 and roundoff ~1e-16/h^2, both well
/// under the 1e-6 comparisons applied to the result.
pub const HESSIAN_STEP: f64 = 1e-3;

pub fn corner_hessian(t: f64) -> CornerHessian {
    corner_hessian_with_step(t, HESSIAN_STEP)
}

pub fn corner_hessian_with_step(t: f64, h: f64) -> CornerHessian {
    let base = [0.0, 0.0, PI / 2.0, 0.0];
    let f = |x: [f64; 4]| phi_t_closed(&C3Point::new(x[0], x[1], x[2], x[3], t));
    let hess_at = |h: f64| -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                let mut xpp = base;
                let mut xpm = base;
                let mut xmp = base;
                let mut xmm = base;
                if i == j {
                    xpp[i] += h;
                    xmm[i] -= h;
                    let v = (f(xpp) - 2.0 * f(base) + f(xmm)) / (h * h);
                    m[(i, i)] = v;
                } else {
                    xpp[i] += h;
                    xpp[j] += h;
                    xpm[i] += h;
                    xpm[j] -= h;
                    xmp[i] -= h;
                    xmp[j] += h;
                    xmm[i] -= h;
                    xmm[j] -= h;
                    m[(i, j)] = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * h * h);
                }
            }
        }
        m
    };
    // Richardson: error is O(h^2), so (4 A(h/2) - A(h)) / 3 cancels it.
    let a1 = hess_at(h);
    let a2 = hess_at(h / 2.0);
    let mut m = (a2 * 4.0 - a1) / 3.0;
    // Symmetrize away residual FD noise.
    m = (m + m.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(m);
    let mut eigenvalues = [0.0; 4];
    for (k, v) in eig.eigenvalues.iter().enumerate() {
        eigenvalues[k] = *v;
    }
    let scale = eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let near_zero = 1e-6 * scale.max(1.0);
    let nonsingular = eigenvalues.iter().all(|v| v.abs() > near_zero);
    let signature = eigenvalues.iter().map(|v| if *v > 0.0 { 1 } else { -1 }).sum();
    CornerHessian { matrix: m, eigenvalues, nonsingular, signature }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_unit(rng: &mut StdRng) -> Quat {
        loop {
            let q = Quat::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let n = q.norm();
            if n > 0.1 {
                return q.scale(1.0 / n);
            }
        }
    }

    #[test]
    fn quat_algebra_basics() {
        let i = Quat::I;
        let j = Quat::J;
        let k = Quat::K;
        assert_eq!(i.mul(&j), k);
        assert_eq!(j.mul(&k), i);
        assert_eq!(k.mul(&i), j);
        assert_eq!(i.mul(&i), Quat::new(-1.0, 0.0, 0.0, 0.0));
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..100 {
            let a = random_unit(&mut rng);
            let b = random_unit(&mut rng);
            let c = random_unit(&mut rng);
            let lhs = a.mul(&b).mul(&c);
            let rhs = a.mul(&b.mul(&c));
            assert!(lhs.sub(&rhs).norm() < 1e-14);
            assert!((a.mul(&b).norm() - 1.0).abs() < 1e-12);
            assert!(a.mul(&a.conj()).sub(&Quat::one()).norm() < 1e-12);
        }
    }

    #[test]
    fn exp_pure_matches_axis_angle() {
        let v = Quat::pure([0.3, -0.4, 0.5]);
        let e = Quat::exp_pure(&v);
        let n = v.norm();
        assert!((e.w - n.cos()).abs() < 1e-14);
        assert!((e.norm() - 1.0).abs() < 1e-13);
        // Tiny argument uses the series branch.
        let tiny = Quat::pure([1e-6, 0.0, 0.0]);
        let et = Quat::exp_pure(&tiny);
        assert!((et.x - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn rel_angle_examples() {
        let x = Quat::I;
        let y = equator_point(3.0 * PI / 2.0);
        let z = equator_point(PI / 4.0);
        let a = rel_angle(&x, &y, &z).unwrap();
        assert!((a - 3.0 * PI / 2.0).abs() < 1e-12);

        let a0 = rel_angle(&x, &x, &z).unwrap();
        assert!(a0.abs() < 1e-12);
    }

    #[test]
    fn rel_angle_conjugation_invariant() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..200 {
            let u1 = rng.gen_range(0.0..TAU);
            let u2 = rng.gen_range(0.0..TAU);
            let u3 = rng.gen_range(0.05..PI - 0.05);
            let x = equator_point(u1);
            let y = equator_point(u1 + u2);
            let z = equator_point(u1 + u3);
            let base = rel_angle(&x, &y, &z).unwrap();
            let g = random_unit(&mut rng);
            let cj = |q: &Quat| g.mul(q).mul(&g.conj());
            let conj = rel_angle(&cj(&x), &cj(&y), &cj(&z)).unwrap();
            let mut diff = (base - conj).abs();
            diff = diff.min((diff - TAU).abs());
            assert!(diff < 1e-10, "u2={u2} base={base} conj={conj}");
        }
    }

    #[test]
    fn rel_angle_rejects_off_circle() {
        let x = Quat::I;
        let y = gamma_bar(0.7, 0.3); // k-component nonzero
        let z = equator_point(PI / 3.0);
        assert!(matches!(rel_angle(&x, &y, &z), Err(OracleError::NotCoequatorial(_))));
    }

    #[test]
    fn pillowcase_coords_standard_model() {
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..200 {
            let g0 = rng.gen_range(0.05..PI - 0.05);
            let t0 = rng.gen_range(0.0..TAU);
            let a = Quat::I;
            let b = equator_point(g0);
            let c = equator_point(t0);
            let d = equator_point(g0 + t0);
            let (g, t) = pillowcase_coords(&a, &b, &c, &d).unwrap();
            assert!((g - g0).abs() < 1e-12);
            let mut dt = (t - t0).abs();
            dt = dt.min((dt - TAU).abs());
            assert!(dt < 1e-12);

            // Conjugation invariance.
            let q = random_unit(&mut rng);
            let cj = |v: &Quat| q.mul(v).mul(&q.conj());
            let (g2, t2) = pillowcase_coords(&cj(&a), &cj(&b), &cj(&c), &cj(&d)).unwrap();
            assert!((g - g2).abs() < 1e-9);
            let mut dt2 = (t - t2).abs();
            dt2 = dt2.min((dt2 - TAU).abs());
            assert!(dt2 < 1e-9);
        }
    }

    #[test]
    fn pillowcase_coords_rejects_relation_violation() {
        let a = Quat::I;
        let b = equator_point(0.9);
        let c = equator_point(1.7);
        let d = equator_point(0.4); // should be 2.6
        assert!(matches!(
            pillowcase_coords(&a, &b, &c, &d),
            Err(OracleError::RelationViolated(_))
        ));
    }

    #[test]
    fn phi_zero_is_product_form() {
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..1000 {
            let p = C3Point::new(
                rng.gen_range(0.0..TAU),
                rng.gen_range(0.0..TAU),
                rng.gen_range(0.0..TAU),
                rng.gen_range(0.0..TAU),
                0.0,
            );
            let expected = p.gamma.sin() * p.alpha.cos();
            assert!((phi_t_quaternion(&p) - expected).abs() < 1e-12);
            assert!((phi_t_closed(&p) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn phi_spot_value() {
        // (gamma, theta, alpha, beta) = (0, pi/2, pi/2, pi/4): sin(2t)/2.
        for t in [0.02, 0.1, 0.25] {
            let p = C3Point::new(0.0, PI / 2.0, PI / 2.0, PI / 4.0, t);
            let expected = (2.0 * t).sin() / 2.0;
            assert!((phi_t(&p).unwrap() - expected).abs() < 1e-12);
        }
        let p = C3Point::new(0.0, PI / 2.0, PI / 2.0, PI / 4.0, 0.1);
        assert!((phi_t(&p).unwrap() - 0.09933).abs() < 5e-6);
    }

    #[test]
    fn phi_routes_agree_randomly() {
        let mut rng = StdRng::seed_from_u64(19);
        let mut max = 0.0f64;
        for _ in 0..2000 {
            let p = C3Point::new(
                rng.gen_range(0.0..TAU),
                rng.gen_range(0.0..TAU),
                rng.gen_range(0.0..TAU),
                rng.gen_range(0.0..TAU),
                rng.gen_range(0.0..0.3),
            );
            let d = (phi_t_quaternion(&p) - phi_t_closed(&p)).abs();
            max = max.max(d);
        }
        assert!(max < ROUTE_TOL, "max route deviation {max:.3e}");
    }

    #[test]
    fn phi_involution_invariant() {
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..500 {
            let p = C3Point::new(
                rng.gen_range(0.0..TAU),
                rng.gen_range(0.0..TAU),
                rng.gen_range(0.0..TAU),
                rng.gen_range(0.0..TAU),
                rng.gen_range(0.0..0.3),
            );
            let q = C3Point::new(-p.gamma, -p.theta, p.alpha + PI, PI - p.beta, p.t);
            assert!((phi_t_closed(&p) - phi_t_closed(&q)).abs() < 1e-12);
            assert!((phi_t_quaternion(&p) - phi_t_quaternion(&q)).abs() < 1e-12);
        }
    }

    #[test]
    fn s_sign_examples() {
        assert!((s_sign(PI / 2.0, PI / 4.0) - 0.5).abs() < 1e-15);
        for k in 0..20 {
            let theta = k as f64 * 0.3;
            assert_eq!(s_sign(theta, 0.0), 0.0);
        }
    }

    #[test]
    fn fiber_endpoints_have_opposite_sign() {
        let mut rng = StdRng::seed_from_u64(29);
        for _ in 0..1000 {
            let t1 = rng.gen_range(1e-3..PI - 1e-3);
            let t2 = rng.gen_range(1e-3..PI - 1e-3);
            let ((b0, th0), (bp, thp)) = fiber_endpoint_data(t1, t2);
            let s0 = s_sign(th0, b0);
            let sp = s_sign(thp, bp);
            assert!((s0 + sp).abs() < 1e-10, "t1={t1} t2={t2} s0={s0} sp={sp}");
        }
    }

    #[test]
    fn spherical_theta3_values() {
        assert!((spherical_theta3(PI / 3.0, PI / 5.0, 0.0) - 2.0 * PI / 15.0).abs() < 1e-12);
        assert!((spherical_theta3(PI / 3.0, PI / 5.0, PI) - 8.0 * PI / 15.0).abs() < 1e-12);
        assert!((spherical_theta3(PI / 2.0, PI / 2.0, PI / 2.0) - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn spherical_theta3_monotone_in_psi() {
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..100 {
            let z2 = rng.gen_range(0.0..PI);
            let z3 = rng.gen_range(0.0..PI);
            let mut prev = spherical_theta3(z2, z3, 0.0);
            for k in 1..=40 {
                let psi = PI * k as f64 / 40.0;
                let cur = spherical_theta3(z2, z3, psi);
                assert!(cur + 1e-12 >= prev);
                prev = cur;
            }
        }
    }

    #[test]
    fn variety_sample_product_condition_at_t0() {
        let tol = 1e-8;
        let pts = sample_variety(0.0, 16, tol);
        assert!(!pts.is_empty());
        for p in &pts {
            assert!((p.gamma.sin() * p.alpha.cos()).abs() < 10.0 * tol);
        }
    }

    #[test]
    fn slice_patterns_follow_sign() {
        // s > 0 at (pi/2, pi/4): branches pair HPlus with AMinus.
        let rep = slice_connectivity(0.05, 0.0, PI / 2.0, PI / 4.0, 0.3, 64);
        assert!(rep.s_value > 0.0);
        assert_eq!(rep.components.len(), 2);
        assert!(rep.components.contains(&vec![SliceFace::HPlus, SliceFace::AMinus]));
        assert!(rep.components.contains(&vec![SliceFace::HMinus, SliceFace::APlus]));

        // s < 0 at (pi/2, 3pi/4): pairing swaps.
        let rep = slice_connectivity(0.05, 0.0, PI / 2.0, 3.0 * PI / 4.0, 0.3, 64);
        assert!(rep.s_value < 0.0);
        assert_eq!(rep.components.len(), 2);
        assert!(rep.components.contains(&vec![SliceFace::HPlus, SliceFace::APlus]));
        assert!(rep.components.contains(&vec![SliceFace::HMinus, SliceFace::AMinus]));

        // s = 0 at beta = 0: a cone, one component touching all faces.
        let rep = slice_connectivity(0.05, 0.0, PI / 2.0, 0.0, 0.3, 64);
        assert_eq!(rep.s_value, 0.0);
        assert_eq!(rep.components.len(), 1);
        assert_eq!(rep.components[0].len(), 4);
    }

    #[test]
    fn corner_hessian_structure() {
        let t = 0.1;
        let h = corner_hessian(t);
        let expect = -2.0 * t.cos() * t.sin();
        assert!((h.matrix[(0, 1)] - expect).abs() < 1e-6, "got {}", h.matrix[(0, 1)]);
        assert!(h.nonsingular);
        assert_eq!(h.signature, 0);
        // The matrix degenerates as t -> 0.
        let small = corner_hessian(0.01);
        let min_big = h.eigenvalues.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
        let min_small = small.eigenvalues.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
        assert!(min_small < min_big);
    }
}
