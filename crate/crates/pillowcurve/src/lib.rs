//! Exact piecewise-linear multicurves in the pillowcase.
//!
//! The pillowcase is the quotient of the (gamma, theta) plane by the group
//! generated by translations by 2*pi in each coordinate and the simultaneous
//! negation (gamma, theta) -> (-gamma, -theta). It has four cone points
//! ("corners") and is the natural home of traceless SU(2) character varieties
//! of 2-stranded tangles. This crate evaluates arborescent tangle expressions
//! into exact PL immersed multicurves there, performs the perturbation
//! surgeries that make pairs of such curves transverse (circle resolution,
//! corner-circle removal by shearing, the earring modification), and computes
//! Lagrangian Floer chain data: intersection generators, bigon differentials
//! over F2, and homology ranks.
//!
//! All curve data is exact: coordinates are rational multiples of pi,
//! represented by arbitrary-precision rationals. Floating point appears only
//! in the [`oracle`] module, which cross-checks the exact combinatorics
//! against a quaternion model of the underlying representation varieties.
//!
//! Angle convention: every coordinate in this crate is measured in units of
//! pi, so the fundamental domain is gamma in [0,1], theta in [0,2).

pub mod charvar;
pub mod exactgeom;
pub mod floer;
pub mod oracle;
pub mod tangle;
