//! Command line front end: tangle evaluation, curve files, Floer reports,
//! numeric oracle checks, SVG and CSV output.
//!
//! Exit codes: 0 success, 1 usage or input errors, 2 transversality
//! failures, 3 path budget exceeded, 4 oracle tolerance failures.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use pillowcurve::charvar::{
    eval, sum_curves, Component, ComponentKind, EvalOptions, Multicurve, Tag,
};
use pillowcurve::exactgeom::{
    fold_polyline, normalize, rat, rat_i, Corner, Deck, LiftPolyline, PlanePoint, Rat, Shear,
    ShearDirection,
};
use pillowcurve::floer::{
    self, bigons, chain_data_auto, default_budget, triangles_with_cochain, CochainSite,
    FloerError,
};
use pillowcurve::oracle::{
    corner_hessian, equator_point, phi_t_closed, phi_t_quaternion, pillowcase_coords,
    sample_variety, spherical_theta3, C3Point, Quat,
};
use pillowcurve::tangle::{parse, TangleExpr};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_TRANSVERSALITY: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_TOLERANCE: i32 = 4;

// ---------------------------------------------------------------------------
// Curve files.

pub const CURVE_FILE_VERSION: u32 = 1;

/// On-disk form of a multicurve. Coordinates are rationals in pi-units,
/// stored as [num_gamma, den_gamma, num_theta, den_theta] in lowest terms
/// with positive denominators.
#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct CurveFile {
    pub version: u32,
    pub components: Vec<CurveFileComponent>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct CurveFileComponent {
    pub kind: String,
    pub tags: Vec<String>,
    pub lift: Vec<[i64; 4]>,
    /// Deck element closing the lift, for curves whose stored vertices end
    /// on a translate of the start: theta -> sign*theta + (tg, tt).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monodromy: Option<CurveFileDeck>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct CurveFileDeck {
    pub neg: bool,
    pub tg: i64,
    pub tt: i64,
}

fn tag_name(t: Tag) -> &'static str {
    match t {
        Tag::BinaryDihedral => "binary-dihedral",
        Tag::HCircle => "h-circle",
        Tag::ResolvedArc => "resolved-arc",
        Tag::EarringCopy => "earring-copy",
        Tag::FigureEight => "figure-eight",
    }
}

fn tag_from_name(s: &str) -> Result<Tag, String> {
    Ok(match s {
        "binary-dihedral" => Tag::BinaryDihedral,
        "h-circle" => Tag::HCircle,
        "resolved-arc" => Tag::ResolvedArc,
        "earring-copy" => Tag::EarringCopy,
        "figure-eight" => Tag::FigureEight,
        other => return Err(format!("unknown tag {other:?}")),
    })
}

fn rat_to_pair(r: &Rat) -> Result<(i64, i64), String> {
    match (r.numer().to_i64(), r.denom().to_i64()) {
        (Some(n), Some(d)) => Ok((n, d)),
        _ => Err(format!("coordinate {r} does not fit the file format")),
    }
}

fn pair_to_rat(n: i64, d: i64) -> Result<Rat, String> {
    if d <= 0 {
        return Err(format!("denominator must be positive, got {n}/{d}"));
    }
    let r = rat(n, d);
    if r.numer().to_i64() != Some(n) || r.denom().to_i64() != Some(d) {
        return Err(format!("{n}/{d} is not in lowest terms"));
    }
    Ok(r)
}

pub fn to_curve_file(m: &Multicurve) -> Result<CurveFile, String> {
    let mut components = Vec::new();
    for c in &m.components {
        let mut lift = Vec::new();
        for v in &c.lift.vertices {
            let (gn, gd) = rat_to_pair(&v.gamma)?;
            let (tn, td) = rat_to_pair(&v.theta)?;
            lift.push([gn, gd, tn, td]);
        }
        let monodromy = match &c.lift.monodromy {
            None => None,
            Some(d) => Some(CurveFileDeck {
                neg: d.neg,
                tg: d.tg.to_i64().ok_or("monodromy does not fit the file format")?,
                tt: d.tt.to_i64().ok_or("monodromy does not fit the file format")?,
            }),
        };
        components.push(CurveFileComponent {
            kind: match c.kind {
                ComponentKind::Arc => "arc".into(),
                ComponentKind::Circle => "circle".into(),
            },
            tags: c.tags.iter().map(|&t| tag_name(t).into()).collect(),
            lift,
            monodromy,
        });
    }
    Ok(CurveFile { version: CURVE_FILE_VERSION, components })
}

/// Endpoint corner data is derived, not stored: arc endpoints give their
/// corners directly; a figure-eight wraps the corner its first vertex was
/// pushed off from and that corner's image under half the monodromy
/// translation.
fn derive_corners(kind: ComponentKind, tags: &BTreeSet<Tag>, lift: &LiftPolyline) -> Vec<Corner> {
    match kind {
        ComponentKind::Arc => [lift.vertices.first(), lift.vertices.last()]
            .iter()
            .flatten()
            .filter_map(|v| normalize(v).corner())
            .collect(),
        ComponentKind::Circle => {
            let Some(m) = &lift.monodromy else { return vec![] };
            if !tags.contains(&Tag::FigureEight) || m.neg {
                return vec![];
            }
            let v0 = &lift.vertices[0];
            let near = PlanePoint::new(v0.gamma.round(), v0.theta.round());
            let far = near.add(&PlanePoint::new(
                Rat::new(m.tg.clone(), 2.into()),
                Rat::new(m.tt.clone(), 2.into()),
            ));
            [near, far].iter().filter_map(|p| normalize(p).corner()).collect()
        }
    }
}

pub fn from_curve_file(f: &CurveFile) -> Result<Multicurve, String> {
    if f.version != CURVE_FILE_VERSION {
        return Err(format!("unsupported file version {}", f.version));
    }
    let mut components = Vec::new();
    for (i, c) in f.components.iter().enumerate() {
        let ctx = |e: String| format!("component {i}: {e}");
        let kind = match c.kind.as_str() {
            "arc" => ComponentKind::Arc,
            "circle" => ComponentKind::Circle,
            other => return Err(ctx(format!("unknown kind {other:?}"))),
        };
        let mut tags = BTreeSet::new();
        for t in &c.tags {
            tags.insert(tag_from_name(t).map_err(ctx)?);
        }
        let mut vertices = Vec::new();
        for &[gn, gd, tn, td] in &c.lift {
            vertices.push(PlanePoint::new(
                pair_to_rat(gn, gd).map_err(ctx)?,
                pair_to_rat(tn, td).map_err(ctx)?,
            ));
        }
        let monodromy = match &c.monodromy {
            None => None,
            Some(d) => {
                if kind == ComponentKind::Arc {
                    return Err(ctx("arcs cannot carry a monodromy".into()));
                }
                if d.tg % 2 != 0 || d.tt % 2 != 0 {
                    return Err(ctx("monodromy translation must be even".into()));
                }
                Some(Deck { neg: d.neg, tg: BigInt::from(d.tg), tt: BigInt::from(d.tt) })
            }
        };
        let lift = LiftPolyline { vertices, closed: kind == ComponentKind::Circle, monodromy };
        lift.validate().map_err(ctx)?;
        let endpoint_corners = derive_corners(kind, &tags, &lift);
        components.push(Component { kind, lift, tags, endpoint_corners });
    }
    Ok(Multicurve { components })
}

// ---------------------------------------------------------------------------
// SVG rendering.

const SVG_SCALE: f64 = 360.0;
const SVG_MARGIN: f64 = 40.0;

fn svg_xy(p: &pillowcurve::exactgeom::PillowPoint) -> (f64, f64) {
    let g = rat_f64(&p.gamma);
    let t = rat_f64(&p.theta);
    (SVG_MARGIN + g * SVG_SCALE, SVG_MARGIN + (2.0 - t) * SVG_SCALE)
}

fn rat_f64(r: &Rat) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

fn component_color(tags: &BTreeSet<Tag>) -> &'static str {
    for (tag, color) in [
        (Tag::FigureEight, "#ff7f0e"),
        (Tag::EarringCopy, "#9467bd"),
        (Tag::ResolvedArc, "#d62728"),
        (Tag::HCircle, "#2ca02c"),
        (Tag::BinaryDihedral, "#1f77b4"),
    ] {
        if tags.contains(&tag) {
            return color;
        }
    }
    "#222222"
}

/// Deterministic SVG of the fundamental domain: chart border, corner marks
/// on both identified edges, folded curve segments colored by tag.
pub fn render_svg(m: &Multicurve) -> String {
    let w = 2.0 * SVG_MARGIN + SVG_SCALE;
    let h = 2.0 * SVG_MARGIN + 2.0 * SVG_SCALE;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" \
         viewBox=\"0 0 {w:.0} {h:.0}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n");
    out.push_str(&format!(
        "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" \
         stroke=\"#888888\" stroke-width=\"1\"/>\n",
        SVG_MARGIN,
        SVG_MARGIN,
        SVG_SCALE,
        2.0 * SVG_SCALE
    ));
    for gt in [(0, 0), (1, 0), (0, 1), (1, 1), (0, 2), (1, 2)] {
        let x = SVG_MARGIN + gt.0 as f64 * SVG_SCALE;
        let y = SVG_MARGIN + (2 - gt.1) as f64 * SVG_SCALE;
        out.push_str(&format!(
            "<path d=\"M {} {} l 6 6 l -6 6 l -6 -6 z\" fill=\"#000000\"/>\n",
            fmt_f(x),
            fmt_f(y - 6.0)
        ));
    }
    for c in &m.components {
        let color = component_color(&c.tags);
        for piece in fold_polyline(&c.lift) {
            let (x1, y1) = svg_xy(&normalize(&piece.a));
            let (x2, y2) = svg_xy(&normalize(&piece.b));
            out.push_str(&format!(
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" \
                 stroke-width=\"2\" stroke-linecap=\"round\"/>\n",
                fmt_f(x1),
                fmt_f(y1),
                fmt_f(x2),
                fmt_f(y2),
                color
            ));
        }
    }
    out.push_str("</svg>\n");
    out
}

fn fmt_f(x: f64) -> String {
    format!("{x:.3}")
}

// ---------------------------------------------------------------------------
// Command definitions.

#[derive(Parser, Debug)]
#[command(
    name = "pillowcurve",
    about = "Exact immersed multicurves in the pillowcase and their Floer chain data",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Evaluate a tangle expression to a curve file.
    Eval {
        /// Tangle expression, e.g. "Q(1/2) + Q(-1/3)" or "earring(hat(Q(-1/2)))".
        expr: String,
        /// Write the curve file here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also render the fundamental domain to this SVG file.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Keep sum circle fibers instead of resolving them.
        #[arg(long)]
        no_resolve: bool,
        /// Edge clearance of resolution bridges, in pi-units (default 1/50).
        #[arg(long, allow_hyphen_values = true)]
        eps: Option<String>,
        /// Offset of earring parallel copies, in pi-units (default 1/100).
        #[arg(long, allow_hyphen_values = true)]
        earring_eps: Option<String>,
    },
    /// Floer chain data of two curve files.
    Floer {
        file1: PathBuf,
        file2: PathBuf,
        /// Deform the differential by triangles through the indexed
        /// self-intersection (first curve's sites, then the second's).
        #[arg(long)]
        cochain: Option<usize>,
        /// Print the boundary polygon of every counted disk.
        #[arg(long)]
        witness: bool,
        /// Per-side path budget in pi-units (default 4; PILLOWCURVE_BUDGET
        /// overrides the default, this flag overrides both).
        #[arg(long, allow_hyphen_values = true)]
        budget: Option<String>,
    },
    /// Floating-point checks of the representation-variety model.
    Oracle {
        #[command(subcommand)]
        sub: OracleCmd,
    },
    /// Near-zero point cloud of the perturbed trace function, as CSV.
    Plot {
        /// Perturbation strength.
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        /// Grid subdivisions per angle.
        #[arg(long, default_value_t = 16)]
        grid: usize,
        /// Keep samples with |phi_t| below this.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Write CSV here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum OracleCmd {
    /// Compare the quaternion and closed-form trace functions at random points.
    C3 {
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        #[arg(long, default_value_t = 20000)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Finite-difference Hessian of the trace function at the corner.
    Hessian {
        #[arg(long)]
        t: f64,
    },
    /// Fiber endpoint angles of a tangle sum with the given edge angles.
    Fiber {
        /// First summand's edge-crossing angle, in pi-units (p/q).
        #[arg(long, allow_hyphen_values = true)]
        z2: String,
        /// Second summand's edge-crossing angle, in pi-units (p/q).
        #[arg(long, allow_hyphen_values = true)]
        z3: String,
    },
    /// Round-trip pillowcase coordinates through boundary holonomy data.
    Coords {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 11)]
        seed: u64,
    },
}

// ---------------------------------------------------------------------------
// Shared helpers.

fn parse_rat(s: &str) -> Result<Rat, String> {
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s.trim(), "1"),
    };
    let n: i64 = n.parse().map_err(|_| format!("bad fraction {s:?}"))?;
    let d: i64 = d.parse().map_err(|_| format!("bad fraction {s:?}"))?;
    if d == 0 {
        return Err(format!("zero denominator in {s:?}"));
    }
    Ok(rat(n, d))
}

fn rat_str(r: &Rat) -> String {
    if r.is_integer() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

struct Failure {
    code: i32,
    message: String,
}

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    fail(EXIT_USAGE, e.to_string())
}

fn floer_failure(e: FloerError) -> Failure {
    let code = match &e {
        FloerError::NotTransverse { .. } => EXIT_TRANSVERSALITY,
        FloerError::BudgetExceeded { .. } => EXIT_BUDGET,
        FloerError::CochainIndex { .. } => EXIT_USAGE,
        FloerError::NotSquareZero { .. } => EXIT_TRANSVERSALITY,
    };
    fail(code, e.to_string())
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, data: &str) -> Result<(), Failure> {
    std::fs::write(path, data).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_curves(path: &Path) -> Result<Multicurve, Failure> {
    let text = read_file(path)?;
    let file: CurveFile = serde_json::from_str(&text)
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    from_curve_file(&file).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Multiplicative xorshift generator; good enough for oracle sampling and
/// fully deterministic across platforms.
struct Rng(u64);

impl Rng {
    fn new(seed: u64) -> Self {
        Rng(seed.wrapping_mul(2685821657736338717).wrapping_add(1442695040888963407))
    }

    fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(2685821657736338717)
    }

    fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn angle(&mut self) -> f64 {
        self.unit() * std::f64::consts::TAU
    }
}

// ---------------------------------------------------------------------------
// eval.

/// Total count of circle fibers over all sum nodes of the expression.
fn count_fibers(e: &TangleExpr, opts: &EvalOptions) -> usize {
    match e {
        TangleExpr::Sum(a, b) => {
            let inner = count_fibers(a, opts) + count_fibers(b, opts);
            match (eval(a, opts), eval(b, opts)) {
                (Ok(la), Ok(lb)) => match sum_curves(&la, &lb) {
                    Ok((_, fibers)) => inner + fibers.len(),
                    Err(_) => inner,
                },
                _ => inner,
            }
        }
        TangleExpr::Rational(..) => 0,
        TangleExpr::Rotate(a)
        | TangleExpr::Twist(a, _)
        | TangleExpr::Mirror(a)
        | TangleExpr::Hat(a)
        | TangleExpr::Earring(a)
        | TangleExpr::Sheared(a, _) => count_fibers(a, opts),
    }
}

fn cmd_eval(
    expr: &str,
    output: Option<&Path>,
    svg: Option<&Path>,
    no_resolve: bool,
    eps: Option<&str>,
    earring_eps: Option<&str>,
) -> Result<(), Failure> {
    let ast = parse(expr).map_err(usage)?;
    let mut opts = EvalOptions::default();
    opts.resolve = !no_resolve;
    if let Some(s) = eps {
        opts.eps = parse_rat(s).map_err(usage)?;
    }
    if let Some(s) = earring_eps {
        opts.earring_eps = parse_rat(s).map_err(usage)?;
    }
    let curve = eval(&ast, &opts).map_err(usage)?;
    let file = to_curve_file(&curve).map_err(usage)?;
    let json = serde_json::to_string_pretty(&file).map_err(usage)? + "\n";

    let arcs = curve.components.iter().filter(|c| c.kind == ComponentKind::Arc).count();
    let circles = curve.components.len() - arcs;
    let mut report = format!(
        "components: {} ({arcs} arcs, {circles} circles)",
        curve.components.len()
    );
    let sites = count_fibers(&ast, &opts);
    if sites > 0 {
        report.push_str(&format!("\nresolution sites: {sites}"));
    }

    match output {
        Some(path) => {
            write_file(path, &json)?;
            println!("{report}");
        }
        None => {
            print!("{json}");
            eprintln!("{report}");
        }
    }
    if let Some(path) = svg {
        write_file(path, &render_svg(&curve))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// floer.

fn resolve_budget(flag: Option<&str>) -> Result<Rat, Failure> {
    if let Some(s) = flag {
        return parse_rat(s).map_err(usage);
    }
    if let Ok(s) = std::env::var("PILLOWCURVE_BUDGET") {
        return parse_rat(&s)
            .map_err(|e| usage(format!("PILLOWCURVE_BUDGET: {e}")));
    }
    Ok(default_budget())
}

fn apply_shear(m: &Multicurve, s: &Shear) -> Multicurve {
    Multicurve {
        components: m
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

fn witness_line(kind: &str, i: usize, j: usize, boundary: &[PlanePoint]) -> String {
    let verts: Vec<String> = boundary
        .iter()
        .map(|v| format!("({}, {})", rat_str(&v.gamma), rat_str(&v.theta)))
        .collect();
    format!("{kind} g{i} -> g{j}: {}", verts.join(" "))
}

fn cmd_floer(
    file1: &Path,
    file2: &Path,
    cochain: Option<usize>,
    witness: bool,
    budget_flag: Option<&str>,
) -> Result<(), Failure> {
    let l1 = load_curves(file1)?;
    let l2 = load_curves(file2)?;
    let budget = resolve_budget(budget_flag)?;
    let (cd, shear) = chain_data_auto(&l1, &l2, cochain, &budget).map_err(floer_failure)?;
    if let Some(s) = &shear {
        let dir = match s.direction {
            ShearDirection::Theta => "theta",
            ShearDirection::Gamma => "gamma",
        };
        println!("note: applied a {dir} tent shear of size {} to the first curve", rat_str(&s.amount));
    }
    let rank = cd.homology_rank().map_err(floer_failure)?;
    println!(
        "generators: {}, differentials: {}, rank: {}",
        cd.generators.len(),
        cd.differential_entries(),
        rank
    );
    if witness {
        let l1s = shear.as_ref().map(|s| apply_shear(&l1, s)).unwrap_or(l1);
        for (i, g) in cd.generators.iter().enumerate() {
            println!("g{i}: ({}, {})", rat_str(&g.point.gamma), rat_str(&g.point.theta));
        }
        let site = match cochain {
            None => None,
            Some(ix) => {
                let sites = floer::cochain_sites(&l1s, &l2).map_err(floer_failure)?;
                Some(sites.into_iter().nth(ix).expect("index checked above"))
            }
        };
        for i in 0..cd.generators.len() {
            for j in 0..cd.generators.len() {
                if cd.bigon_counts[i][j] > 0 {
                    let disks = bigons(&l1s, &l2, &cd.generators[i], &cd.generators[j], &budget)
                        .map_err(floer_failure)?;
                    for d in &disks {
                        println!("{}", witness_line("bigon", i, j, &d.boundary));
                    }
                }
                if let (Some(tc), Some(site)) = (&cd.triangle_counts, &site) {
                    if tc[i][j] > 0 {
                        let disks = triangle_witnesses(
                            &l1s,
                            &l2,
                            site,
                            &cd.generators[i],
                            &cd.generators[j],
                            &budget,
                        )?;
                        for d in disks {
                            println!("{}", witness_line("triangle", i, j, &d));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

fn triangle_witnesses(
    l1: &Multicurve,
    l2: &Multicurve,
    site: &CochainSite,
    x: &floer::Generator,
    y: &floer::Generator,
    budget: &Rat,
) -> Result<Vec<Vec<PlanePoint>>, Failure> {
    Ok(triangles_with_cochain(l1, l2, site, x, y, budget)
        .map_err(floer_failure)?
        .into_iter()
        .map(|w| w.boundary)
        .collect())
}

// ---------------------------------------------------------------------------
// oracle.

fn cmd_oracle_c3(t: f64, samples: usize, seed: u64) -> Result<(), Failure> {
    let mut rng = Rng::new(seed);
    let mut route_max = 0f64;
    let mut product_max = 0f64;
    for _ in 0..samples {
        let pt = C3Point::new(rng.angle(), rng.angle(), rng.angle(), rng.angle(), t);
        let q = phi_t_quaternion(&pt);
        let c = phi_t_closed(&pt);
        route_max = route_max.max((q - c).abs());
        if t == 0.0 {
            product_max = product_max.max((c - pt.gamma.sin() * pt.alpha.cos()).abs());
        }
    }
    println!("route residual max: {route_max:.3e} over {samples} samples");
    let mut ok = route_max < 1e-10;
    if t == 0.0 {
        println!("product-form residual max: {product_max:.3e}");
        ok = ok && product_max < 1e-12;
    }
    if ok {
        println!("pass");
        Ok(())
    } else {
        Err(fail(EXIT_TOLERANCE, "residual above tolerance"))
    }
}

fn cmd_oracle_hessian(t: f64) -> Result<(), Failure> {
    let h = corner_hessian(t);
    let signature: i32 = h
        .eigenvalues
        .iter()
        .map(|&l| if l > 0.0 { 1 } else { -1 })
        .sum();
    let entry = h.matrix[(0, 1)];
    let expected = -2.0 * t.cos() * t.sin();
    println!("gamma-theta entry: {entry:.8} (closed form {expected:.8})");
    if !h.nonsingular {
        return Err(fail(EXIT_TOLERANCE, "singular Hessian"));
    }
    println!("nonsingular, signature {signature}");
    if (entry - expected).abs() > 1e-6 {
        return Err(fail(EXIT_TOLERANCE, "mixed entry disagrees with the closed form"));
    }
    Ok(())
}

fn cmd_oracle_fiber(z2: &str, z3: &str) -> Result<(), Failure> {
    let a = parse_rat(z2).map_err(usage)?.abs();
    let b = parse_rat(z3).map_err(usage)?.abs();
    let one = rat_i(1);
    if a.is_zero() || a >= one || b.is_zero() || b >= one {
        return Err(usage("edge angles must lie strictly between 0 and 1 (pi-units)"));
    }
    let lo = (&a - &b).abs();
    let hi_raw = &a + &b;
    let hi = if hi_raw > one { rat_i(2) - &hi_raw } else { hi_raw };
    println!("endpoints: {}, {} (pi units)", rat_str(&lo), rat_str(&hi));
    let pi = std::f64::consts::PI;
    let mut resid = 0f64;
    for (psi, expect) in [(0.0, &lo), (pi, &hi)] {
        let got = spherical_theta3(rat_f64(&a) * pi, rat_f64(&b) * pi, psi) / pi;
        resid = resid.max((got - rat_f64(expect)).abs());
    }
    println!("spherical-law residual max: {resid:.3e}");
    if resid < 1e-9 {
        println!("pass");
        Ok(())
    } else {
        Err(fail(EXIT_TOLERANCE, "endpoints disagree with the spherical law"))
    }
}

fn cmd_oracle_coords(samples: usize, seed: u64) -> Result<(), Failure> {
    let mut rng = Rng::new(seed);
    let mut max_resid = 0f64;
    let tau = std::f64::consts::TAU;
    for _ in 0..samples {
        let gamma = 0.05 + rng.unit() * (std::f64::consts::PI - 0.1);
        let theta = rng.angle();
        let a = Quat::I;
        let b = equator_point(gamma);
        let c = equator_point(theta);
        let d = c.mul(&a.conj()).mul(&b);
        let (g, th) = pillowcase_coords(&a, &b, &c, &d)
            .map_err(|e| fail(EXIT_TOLERANCE, e.to_string()))?;
        let dth = (th - theta).rem_euclid(tau);
        let dth = dth.min(tau - dth);
        max_resid = max_resid.max((g - gamma).abs()).max(dth);
    }
    println!("coordinate round-trip residual max: {max_resid:.3e} over {samples} samples");
    if max_resid < 1e-9 {
        println!("pass");
        Ok(())
    } else {
        Err(fail(EXIT_TOLERANCE, "coordinate round-trip above tolerance"))
    }
}

// ---------------------------------------------------------------------------
// plot.

fn cmd_plot(t: f64, grid: usize, tol: f64, output: Option<&Path>) -> Result<(), Failure> {
    let samples = sample_variety(t, grid, tol);
    let mut csv = String::from("gamma,theta,alpha,beta,phi_abs\n");
    for s in &samples {
        csv.push_str(&format!(
            "{:.12},{:.12},{:.12},{:.12},{:.3e}\n",
            s.gamma, s.theta, s.alpha, s.beta, s.phi_abs
        ));
    }
    match output {
        Some(path) => {
            write_file(path, &csv)?;
            println!("samples: {}", samples.len());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Entry point.

pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.cmd {
        Cmd::Eval { expr, output, svg, no_resolve, eps, earring_eps } => cmd_eval(
            expr,
            output.as_deref(),
            svg.as_deref(),
            *no_resolve,
            eps.as_deref(),
            earring_eps.as_deref(),
        ),
        Cmd::Floer { file1, file2, cochain, witness, budget } => {
            cmd_floer(file1, file2, *cochain, *witness, budget.as_deref())
        }
        Cmd::Oracle { sub } => match sub {
            OracleCmd::C3 { t, samples, seed } => cmd_oracle_c3(*t, *samples, *seed),
            OracleCmd::Hessian { t } => cmd_oracle_hessian(*t),
            OracleCmd::Fiber { z2, z3 } => cmd_oracle_fiber(z2, z3),
            OracleCmd::Coords { samples, seed } => cmd_oracle_coords(*samples, *seed),
        },
        Cmd::Plot { t, grid, tol, output } => cmd_plot(*t, *grid, *tol, output.as_deref()),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
