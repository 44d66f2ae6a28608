//! Command-line driver: analyze boundary functions, evolve foliations in the
//! radius, evaluate the assembled candidate, synthesize and certify
//! optimizers, run the verification suite, and export pictures.
//!
//! Exit codes: 0 success, 2 condition failure, 3 input error,
//! 4 verification failure, 5 iteration cap reached.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use bellman_core::boundary::{BoundaryConfig, BoundaryFunction};
use bellman_core::evolution::{evolve, EvolutionTrace};
use bellman_core::foliation::{solve, Element, LinRegion, Solved};
use bellman_core::optimizers::{curve_csv, delivery_curve, verify_optimizer, Synthesizer};
use bellman_core::oracle::{compare, dump_csv, grid_minimal_concave, GridDomain, OracleError};
use bellman_core::verify::{property_suite, span_of};

const EXIT_CONDITION: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_VERIFY: u8 = 4;
const EXIT_CAP: u8 = 5;

#[derive(Parser)]
#[command(name = "bellman", about = "Bellman functions on BMO via extremal foliations")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Boundary-function JSON document.
    #[arg(long)]
    config: PathBuf,
    /// Radius ε (target radius for `evolve`).
    #[arg(long)]
    eps: Option<f64>,
    /// Output directory for artifacts (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parallel stages.
    #[arg(long)]
    jobs: Option<usize>,
    /// Compute the minimal Bellman function (infimum) instead of the maximal.
    #[arg(long)]
    minimize: bool,
}

#[derive(Args)]
struct PointArgs {
    /// CSV file of evaluation points, one `x1,x2` pair per line.
    #[arg(long)]
    points: Option<PathBuf>,
    /// Number of random in-strip points when no file is given.
    #[arg(long, default_value_t = 50)]
    n_points: usize,
    /// Seed for the random points.
    #[arg(long, default_value_t = 17)]
    seed: u64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Report roots of f''' and the admissibility conditions.
    Analyze(Common),
    /// Evolve the foliation up to the target radius; write the trace.
    Evolve(Common),
    /// Evaluate B and its gradient at points; write a CSV.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        points: PointArgs,
    },
    /// Synthesize and certify optimizers at points.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        points: PointArgs,
    },
    /// Run the verification suite: properties, optimizers, grid oracle.
    Verify(Common),
    /// Export the foliation picture (SVG) and CSV artifacts.
    Export(Common),
}

/// An error carrying the process exit code.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

fn fail(code: u8, err: anyhow::Error) -> Failure {
    Failure { code, err }
}

type CmdResult = std::result::Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Cmd::Analyze(c) => cmd_analyze(c),
        Cmd::Evolve(c) => cmd_evolve(c),
        Cmd::Eval { common, points } => cmd_eval(common, points),
        Cmd::Optimize { common, points } => cmd_optimize(common, points),
        Cmd::Verify(c) => cmd_verify(c),
        Cmd::Export(c) => cmd_export(c),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

// ---------------------------------------------------------------------------
// shared setup
// ---------------------------------------------------------------------------

/// Load and build the boundary function; `--minimize` flips its sign so that
/// the maximal construction computes the negated infimum.
fn setup(c: &Common) -> std::result::Result<(BoundaryFunction, f64), Failure> {
    if let Some(j) = c.jobs {
        // ignore failure: the global pool may already be initialized
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let text = std::fs::read_to_string(&c.config)
        .with_context(|| format!("reading {}", c.config.display()))
        .map_err(|e| fail(EXIT_INPUT, e))?;
    let bf = BoundaryConfig::from_json(&text)
        .and_then(|cfg| cfg.build())
        .with_context(|| format!("parsing {}", c.config.display()))
        .map_err(|e| fail(EXIT_INPUT, e))?;
    let bf = if c.minimize {
        bf.affine_normalize(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0)
            .map_err(|e| fail(EXIT_INPUT, anyhow!(e)))?
            .0
    } else {
        bf
    };
    let sign = if c.minimize { -1.0 } else { 1.0 };
    Ok((bf, sign))
}

fn need_eps(c: &Common, bf: &BoundaryFunction) -> std::result::Result<f64, Failure> {
    let eps = c
        .eps
        .ok_or_else(|| fail(EXIT_INPUT, anyhow!("--eps is required for this command")))?;
    if !(eps > 0.0) {
        return Err(fail(EXIT_INPUT, anyhow!("--eps must be positive")));
    }
    if eps >= bf.eps_inf {
        return Err(fail(
            EXIT_CONDITION,
            anyhow!("eps = {eps} is not below the admissible bound {}", bf.eps_inf),
        ));
    }
    Ok(eps)
}

fn out_dir(c: &Common) -> std::result::Result<PathBuf, Failure> {
    let dir = c.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(|e| fail(EXIT_INPUT, e))?;
    Ok(dir)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> std::result::Result<(), Failure> {
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(|e| fail(EXIT_INPUT, e))
}

fn run_evolve(bf: &BoundaryFunction, eps: f64) -> std::result::Result<EvolutionTrace, Failure> {
    evolve(bf, eps).map_err(|e| fail(EXIT_VERIFY, anyhow!("evolution failed: {e}")))
}

fn run_solve(
    bf: &BoundaryFunction,
    trace: &EvolutionTrace,
    eps: f64,
) -> std::result::Result<Solved, Failure> {
    solve(bf, trace.final_picture(), eps)
        .map_err(|e| fail(EXIT_VERIFY, anyhow!("assembly failed: {e}")))
}

/// Points from `--points` or deterministic random in-strip samples.
fn gather_points(
    p: &PointArgs,
    s: &Solved,
) -> std::result::Result<Vec<(f64, f64)>, Failure> {
    if let Some(path) = &p.points {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(|e| fail(EXIT_INPUT, e))?;
        let mut out = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("x1") {
                continue;
            }
            let mut it = line.split(',');
            let parse = |s: Option<&str>| -> Option<f64> { s?.trim().parse().ok() };
            match (parse(it.next()), parse(it.next())) {
                (Some(a), Some(b)) => out.push((a, b)),
                _ => {
                    return Err(fail(
                        EXIT_INPUT,
                        anyhow!("{}:{}: expected `x1,x2`", path.display(), k + 1),
                    ))
                }
            }
        }
        Ok(out)
    } else {
        let (lo, hi) = span_of(s);
        let eps = s.eps;
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        Ok((0..p.n_points)
            .map(|_| {
                let x1 = rng.gen_range(lo..hi);
                let x2 = x1 * x1 + rng.gen_range(0.0..1.0) * eps * eps;
                (x1, x2)
            })
            .collect())
    }
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

fn cmd_analyze(c: &Common) -> CmdResult {
    let (bf, _) = setup(c)?;
    let eps_check = c.eps.unwrap_or(bf.eps_inf);
    let report = bf.check_conditions(eps_check);
    let roots: Vec<_> = bf
        .roots
        .ordered()
        .into_iter()
        .map(|(kind, loc)| {
            // JSON has no infinities; encode extended reals as strings
            let ext = |x: f64| -> serde_json::Value {
                if x == f64::INFINITY {
                    "inf".into()
                } else if x == f64::NEG_INFINITY {
                    "-inf".into()
                } else {
                    x.into()
                }
            };
            serde_json::json!({
                "kind": format!("{kind:?}").to_lowercase(),
                "lo": ext(loc.lo),
                "hi": ext(loc.hi),
            })
        })
        .collect();
    let doc = serde_json::json!({
        "eps_inf": bf.eps_inf,
        "eps_checked": eps_check,
        "roots": roots,
        "conditions": report,
        "pass": report.pass(),
    });
    println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
    if let Some(dir) = &c.out {
        std::fs::create_dir_all(dir).map_err(|e| fail(EXIT_INPUT, anyhow!(e)))?;
        write_file(dir, "analysis.json", &serde_json::to_string_pretty(&doc).unwrap())?;
    }
    Ok(if report.pass() { 0 } else { EXIT_CONDITION })
}

fn cmd_evolve(c: &Common) -> CmdResult {
    let (bf, _) = setup(c)?;
    let eps = need_eps(c, &bf)?;
    let trace = run_evolve(&bf, eps)?;
    let dir = out_dir(c)?;
    write_file(&dir, "criticals.csv", &trace.criticals_csv())?;
    write_file(
        &dir,
        "trace.json",
        &serde_json::to_string_pretty(&trace.to_json()).expect("serializable"),
    )?;
    for cp in &trace.criticals {
        println!(
            "critical eps = {:.16e} essential = {} [{}]",
            cp.eps,
            cp.essential,
            cp.events.join("; ")
        );
    }
    println!(
        "evolved to eps = {:.16e} through {} critical points ({} segments)",
        eps,
        trace.criticals.len(),
        trace.segments.len()
    );
    Ok(if trace.capped { EXIT_CAP } else { 0 })
}

fn cmd_eval(c: &Common, p: &PointArgs) -> CmdResult {
    let (bf, sign) = setup(c)?;
    let eps = need_eps(c, &bf)?;
    let trace = run_evolve(&bf, eps)?;
    if trace.capped {
        return Err(fail(EXIT_CAP, anyhow!("evolution hit the event cap")));
    }
    let s = run_solve(&bf, &trace, eps)?;
    let points = gather_points(p, &s)?;
    let rows: Vec<String> = points
        .par_iter()
        .map(|&(x1, x2)| match s.eval(&bf, x1, x2) {
            Ok(e) => format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                x1,
                x2,
                sign * e.value,
                sign * e.d1,
                sign * e.d2
            ),
            Err(err) => format!("{:.16e},{:.16e},,,# {err}", x1, x2),
        })
        .collect();
    let mut csv = String::from("x1,x2,B,dB_dx1,dB_dx2\n");
    for r in &rows {
        csv.push_str(r);
        csv.push('\n');
    }
    let dir = out_dir(c)?;
    write_file(&dir, "eval.csv", &csv)?;
    print!("{csv}");
    let bad = rows.iter().filter(|r| r.contains('#')).count();
    Ok(if bad == 0 { 0 } else { EXIT_VERIFY })
}

fn cmd_optimize(c: &Common, p: &PointArgs) -> CmdResult {
    let (bf, sign) = setup(c)?;
    let eps = need_eps(c, &bf)?;
    let trace = run_evolve(&bf, eps)?;
    if trace.capped {
        return Err(fail(EXIT_CAP, anyhow!("evolution hit the event cap")));
    }
    let s = run_solve(&bf, &trace, eps)?;
    let syn = Synthesizer::new(&bf, &s);
    let points = gather_points(p, &s)?;
    let dir = out_dir(c)?;

    let mut report = String::from("index,x1,x2,B,d_mean,d_mean_sq,d_f_avg,norm_sq_excess,pass\n");
    let mut all_pass = true;
    for (k, &(x1, x2)) in points.iter().enumerate() {
        let ev = s
            .eval(&bf, x1, x2)
            .map_err(|e| fail(EXIT_VERIFY, anyhow!("point ({x1}, {x2}): {e}")))?;
        let phi = syn
            .optimizer_at(x1, x2)
            .map_err(|e| fail(EXIT_VERIFY, anyhow!("point ({x1}, {x2}): {e}")))?;
        let rep = verify_optimizer(&bf, &phi, x1, x2, ev.value, eps)
            .map_err(|e| fail(EXIT_VERIFY, anyhow!("point ({x1}, {x2}): {e}")))?;
        all_pass &= rep.pass;
        let doc = serde_json::json!({
            "point": { "x1": x1, "x2": x2, "B": sign * ev.value },
            "pieces": phi.pieces,
            "provenance": phi.provenance,
            "report": rep,
        });
        write_file(
            &dir,
            &format!("optimizer_{k:04}.json"),
            &serde_json::to_string_pretty(&doc).expect("serializable"),
        )?;
        let curve = delivery_curve(&bf, &phi, 256)
            .map_err(|e| fail(EXIT_VERIFY, anyhow!("point ({x1}, {x2}): {e}")))?;
        write_file(&dir, &format!("delivery_{k:04}.csv"), &curve_csv(&curve))?;
        writeln!(
            report,
            "{k},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            x1,
            x2,
            sign * ev.value,
            rep.d_mean,
            rep.d_mean_sq,
            rep.d_f_avg,
            rep.norm_sq_excess,
            rep.pass
        )
        .expect("string write");
    }
    write_file(&dir, "report.csv", &report)?;
    print!("{report}");
    Ok(if all_pass { 0 } else { EXIT_VERIFY })
}

fn cmd_verify(c: &Common) -> CmdResult {
    let (bf, _) = setup(c)?;
    let eps = need_eps(c, &bf)?;
    let conditions = bf.check_conditions(eps);
    if !conditions.pass() {
        for m in &conditions.messages {
            eprintln!("condition: {m}");
        }
        return Err(fail(EXIT_CONDITION, anyhow!("admissibility conditions failed")));
    }
    let trace = run_evolve(&bf, eps)?;
    if trace.capped {
        return Err(fail(EXIT_CAP, anyhow!("evolution hit the event cap")));
    }
    let s = run_solve(&bf, &trace, eps)?;

    fn check(ok: &mut bool, name: &str, value: f64, tol: f64) {
        let pass = value <= tol;
        *ok &= pass;
        println!(
            "{} {name}: {value:.3e} (tol {tol:.1e})",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    let mut ok = true;

    let rep = property_suite(&bf, &s);
    check(&mut ok, "boundary condition", rep.boundary_dev, 1e-10);
    check(&mut ok, "midpoint concavity", rep.concavity_dev, 1e-9);
    check(&mut ok, "interface gradients", rep.grad_dev, 1e-6);
    check(&mut ok, "hessian degeneracy", rep.ma_dev, 1e-6);
    if !rep.admissibility.is_empty() {
        ok = false;
        for m in &rep.admissibility {
            println!("FAIL admissibility: {m}");
        }
    } else {
        println!("PASS admissibility");
    }

    // optimizer identities at deterministic sample points
    let syn = Synthesizer::new(&bf, &s);
    let (lo, hi) = span_of(&s);
    let mut rng = ChaCha8Rng::seed_from_u64(20260823);
    let mut worst = 0.0_f64;
    let mut opt_ok = true;
    for _ in 0..20 {
        let x1 = rng.gen_range(lo..hi);
        let x2 = x1 * x1 + rng.gen_range(0.0..1.0) * eps * eps;
        let res = s
            .eval(&bf, x1, x2)
            .ok()
            .and_then(|e| syn.optimizer_at(x1, x2).ok().map(|phi| (e, phi)))
            .and_then(|(e, phi)| verify_optimizer(&bf, &phi, x1, x2, e.value, eps).ok());
        match res {
            Some(r) => {
                opt_ok &= r.pass;
                worst = worst.max(r.d_mean).max(r.d_mean_sq).max(r.d_f_avg);
            }
            None => opt_ok = false,
        }
    }
    ok &= opt_ok;
    println!(
        "{} optimizer identities: worst deviation {worst:.3e}",
        if opt_ok { "PASS" } else { "FAIL" }
    );

    // independent grid oracle on a window around the figures
    let (span_lo, span_hi) = (lo + 0.5, hi - 0.5);
    let center = 0.5 * (span_lo + span_hi);
    let r = (0.5 * (span_hi - span_lo)).min(4.0 + 2.0 * eps);
    let grid = GridDomain { center, r, n1: 161, n2: 24, eps };
    let reference = |x1: f64, x2: f64| s.eval(&bf, x1, x2).ok().map(|e| e.value);
    let v = grid_minimal_concave(&bf, grid, &reference, 800).map_err(|e| match e {
        OracleError::NoConvergence { .. } => fail(EXIT_CAP, anyhow!(e)),
        other => fail(EXIT_VERIFY, anyhow!(other)),
    })?;
    let stats = compare(&v, &reference);
    check(&mut ok, "grid oracle deviation", stats.max_rel, 2e-2);
    if let Some(dir) = &c.out {
        std::fs::create_dir_all(dir).map_err(|e| fail(EXIT_INPUT, anyhow!(e)))?;
        write_file(dir, "oracle.csv", &dump_csv(&v, &reference))?;
        write_file(
            dir,
            "verify.json",
            &serde_json::to_string_pretty(&serde_json::json!({
                "suite": rep,
                "oracle": stats,
            }))
            .expect("serializable"),
        )?;
    }
    Ok(if ok { 0 } else { EXIT_VERIFY })
}

fn cmd_export(c: &Common) -> CmdResult {
    let (bf, _) = setup(c)?;
    let eps = need_eps(c, &bf)?;
    let trace = run_evolve(&bf, eps)?;
    if trace.capped {
        return Err(fail(EXIT_CAP, anyhow!("evolution hit the event cap")));
    }
    let s = run_solve(&bf, &trace, eps)?;
    let dir = out_dir(c)?;
    write_file(&dir, "criticals.csv", &trace.criticals_csv())?;
    write_file(
        &dir,
        "graph.json",
        &serde_json::to_string_pretty(&s.export_graph(&bf)).expect("serializable"),
    )?;
    for (i, el) in s.elements.iter().enumerate() {
        if let Element::Chordal { dom, .. } = el {
            write_file(&dir, &format!("chords_{i:02}.csv"), &dom.to_csv())?;
        }
    }
    write_file(&dir, "foliation.svg", &render_svg(&bf, &s))?;
    println!("wrote {}", dir.join("foliation.svg").display());
    Ok(0)
}

// ---------------------------------------------------------------------------
// SVG rendering
// ---------------------------------------------------------------------------

struct View {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
    w: f64,
    h: f64,
    margin: f64,
}

impl View {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let sx = self.margin + (x - self.x_lo) / (self.x_hi - self.x_lo) * self.w;
        let sy = self.margin + self.h - (y - self.y_lo) / (self.y_hi - self.y_lo) * self.h;
        (sx, sy)
    }

    fn polyline(&self, pts: &[(f64, f64)], style: &str) -> String {
        let mut d = String::new();
        for (k, &(x, y)) in pts.iter().enumerate() {
            let (sx, sy) = self.map(x, y);
            let _ = write!(d, "{}{sx:.3},{sy:.3}", if k == 0 { "" } else { " " });
        }
        format!("<polyline fill=\"none\" {style} points=\"{d}\"/>\n")
    }

    fn polygon(&self, pts: &[(f64, f64)], style: &str) -> String {
        let mut d = String::new();
        for (k, &(x, y)) in pts.iter().enumerate() {
            let (sx, sy) = self.map(x, y);
            let _ = write!(d, "{}{sx:.3},{sy:.3}", if k == 0 { "" } else { " " });
        }
        format!("<polygon {style} points=\"{d}\"/>\n")
    }
}

/// Sample a straight segment at `n` points (extremal polyline).
fn segment(a: (f64, f64), b: (f64, f64), n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            let t = k as f64 / (n - 1) as f64;
            (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))
        })
        .collect()
}

fn upper(x: f64, eps: f64) -> f64 {
    x * x + eps * eps
}

/// Lower-boundary path from `a` to `b`: the parabola, short-circuited by
/// chords over the `gaps`.
fn floor_path(a: f64, b: f64, gaps: &[(f64, f64)], n: usize) -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    let mut x = a;
    let push_arc = |pts: &mut Vec<(f64, f64)>, from: f64, to: f64| {
        for k in 0..n {
            let t = from + (to - from) * k as f64 / (n - 1) as f64;
            pts.push((t, t * t));
        }
    };
    for &(glo, ghi) in gaps {
        if ghi <= a || glo >= b {
            continue;
        }
        push_arc(&mut pts, x, glo.max(a));
        pts.push((ghi.min(b), ghi.min(b) * ghi.min(b)));
        x = ghi.min(b);
    }
    push_arc(&mut pts, x, b);
    pts
}

fn render_svg(bf: &BoundaryFunction, s: &Solved) -> String {
    let eps = s.eps;
    let (lo, hi) = span_of(s);
    let y_lo = if lo <= 0.0 && hi >= 0.0 { 0.0 } else { (lo * lo).min(hi * hi) };
    let y_hi = (lo * lo).max(hi * hi) + eps * eps;
    let view = View {
        x_lo: lo,
        x_hi: hi,
        y_lo,
        y_hi: y_hi + 0.04 * (y_hi - y_lo),
        w: 920.0,
        h: 560.0,
        margin: 40.0,
    };
    let mut svg = String::from(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"1000\" height=\"640\" \
         viewBox=\"0 0 1000 640\">\n<rect width=\"1000\" height=\"640\" fill=\"white\"/>\n",
    );

    // linearity-domain fills first (background layer)
    for el in &s.elements {
        if let Element::Linear { region, .. } = el {
            let pts = region_polygon(region, eps, lo, hi);
            if pts.len() >= 3 {
                let color = match region {
                    LinRegion::Angle { .. } => "#f6d58c",
                    LinRegion::CrownR { .. } | LinRegion::CrownL { .. } => "#bcd9a0",
                    LinRegion::CrownBoth { .. } => "#a0c8d9",
                    LinRegion::MulticupTop { .. } => "#dab8d9",
                    LinRegion::UnderHull { .. } => "#e0c8a8",
                };
                svg.push_str(&view.polygon(
                    &pts,
                    &format!("fill=\"{color}\" fill-opacity=\"0.75\" stroke=\"none\""),
                ));
            }
        }
    }

    // extremal polylines: 16 per family, 64 sample points each
    let style = "stroke=\"#607080\" stroke-width=\"0.7\"";
    for el in &s.elements {
        match el {
            Element::Band { slope, u_lo, u_hi } => {
                let (a, b) = (u_lo.max(lo - eps), u_hi.min(hi + eps));
                if !(b > a) {
                    continue;
                }
                for k in 0..16 {
                    let u = a + (b - a) * k as f64 / 15.0;
                    let pts = match slope.side {
                        bellman_core::forces::Side::Right => {
                            segment((u - eps, upper(u - eps, eps)), (u, u * u), 64)
                        }
                        bellman_core::forces::Side::Left => {
                            segment((u, u * u), (u + eps, upper(u + eps, eps)), 64)
                        }
                    };
                    svg.push_str(&view.polyline(&pts, style));
                }
            }
            Element::Chordal { dom, l_lo, l_hi, .. } => {
                for k in 0..16 {
                    let l = l_lo + (l_hi - l_lo) * k as f64 / 15.0;
                    if let Ok((a, b)) = dom.chord_at(bf, l.max(dom.min_l().max(1e-9))) {
                        svg.push_str(&view.polyline(
                            &segment((a, a * a), (b, b * b), 64),
                            style,
                        ));
                    }
                }
            }
            Element::Linear { .. } => {}
        }
    }

    // the two parabolas (domain boundary) on top
    let n = 257;
    let para: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let x = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            (x, x * x)
        })
        .collect();
    let para_up: Vec<(f64, f64)> = para.iter().map(|&(x, _)| (x, upper(x, eps))).collect();
    svg.push_str(&view.polyline(&para, "stroke=\"black\" stroke-width=\"1.5\""));
    svg.push_str(&view.polyline(&para_up, "stroke=\"black\" stroke-width=\"1.5\""));

    svg.push_str("</svg>\n");
    svg
}

/// Polygon outline of a linearity region, clipped to `[lo, hi]`.
fn region_polygon(region: &LinRegion, eps: f64, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let arc = |from: f64, to: f64, up: bool| -> Vec<(f64, f64)> {
        (0..33)
            .map(|k| {
                let x = from + (to - from) * k as f64 / 32.0;
                (x, if up { upper(x, eps) } else { x * x })
            })
            .collect()
    };
    match region {
        LinRegion::Angle { w } => {
            vec![
                (w - eps, upper(w - eps, eps)),
                (*w, w * w),
                (w + eps, upper(w + eps, eps)),
            ]
        }
        LinRegion::CrownR { a0, b0 } => {
            let mut pts = vec![(*a0, a0 * a0)];
            pts.push((a0 - eps, upper(a0 - eps, eps)));
            pts.extend(arc(a0 - eps, b0 - eps, true));
            pts.push((*b0, b0 * b0));
            pts
        }
        LinRegion::CrownL { a0, b0 } => {
            let mut pts = vec![(*a0, a0 * a0)];
            pts.push((*b0, b0 * b0));
            pts.push((b0 + eps, upper(b0 + eps, eps)));
            let mut top = arc(a0 + eps, b0 + eps, true);
            top.reverse();
            pts.extend(top);
            pts
        }
        LinRegion::CrownBoth { a0, b0 } => {
            let mut pts = vec![(*a0, a0 * a0)];
            pts.push((a0 - eps, upper(a0 - eps, eps)));
            pts.extend(arc(a0 - eps, b0 + eps, true));
            pts.push((*b0, b0 * b0));
            pts
        }
        LinRegion::MulticupTop { a_l, a_r, gaps } => {
            let al = a_l.max(lo);
            let ar = a_r.min(hi);
            let mut pts = floor_path(al, ar, gaps, 33);
            if a_r.is_finite() {
                pts.push((a_r - eps, upper(a_r - eps, eps)));
                let mut top = arc((a_l + eps).max(lo), a_r - eps, true);
                top.reverse();
                pts.extend(top);
            } else {
                let mut top = arc((a_l + eps).max(lo), ar, true);
                top.reverse();
                pts.extend(top);
            }
            if a_l.is_finite() {
                pts.push((a_l + eps, upper(a_l + eps, eps)));
            }
            pts
        }
        LinRegion::UnderHull { hull, gaps } => {
            let mut pts = floor_path(hull.0, hull.1, gaps, 33);
            pts.push((hull.1, hull.1 * hull.1));
            pts.push((hull.0, hull.0 * hull.0));
            pts
        }
    }
}
