//! End-to-end acceptance checks. Each test prints a single PASS/FAIL line
//! with its runtime; the tests serialize on a global lock so the reported
//! times are not distorted by parallel siblings.

mod common;

use std::sync::Mutex;
use std::time::Instant;

use bellman_core::foliation::{Element, SolvedNode};
use bellman_core::forces::{Force, ForceSource};
use bellman_core::optimizers::{verify_optimizer, Synthesizer};
use bellman_core::oracle::{compare, grid_minimal_concave, GridDomain};
use bellman_core::verify::{property_suite, span_of};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static GATE: Mutex<()> = Mutex::new(());

/// Run `body` under the gate, then print one PASS/FAIL line and assert.
fn criterion(name: &str, budget_s: f64, body: impl FnOnce() -> Result<String, String>) {
    let _gate = GATE.lock().unwrap_or_else(|e| e.into_inner());
    let t0 = Instant::now();
    let outcome = body();
    let dt = t0.elapsed().as_secs_f64();
    let in_budget = dt <= budget_s;
    match (&outcome, in_budget) {
        (Ok(detail), true) => {
            println!("PASS {name} [{dt:.2}s <= {budget_s}s] {detail}");
        }
        (Ok(detail), false) => {
            println!("FAIL {name} [{dt:.2}s > {budget_s}s] over budget; {detail}");
            panic!("{name}: over budget ({dt:.2}s > {budget_s}s)");
        }
        (Err(why), _) => {
            println!("FAIL {name} [{dt:.2}s / {budget_s}s] {why}");
            panic!("{name}: {why}");
        }
    }
}

fn close(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol
}

#[test]
fn c1_single_band_closed_form() {
    criterion("c1_single_band_closed_form", 5.0, || {
        let bf = common::load("exp");
        let mut worst = 0.0_f64;
        for &eps in &[0.3, 0.5, 0.9] {
            let (trace, s) = common::candidate(&bf, eps);
            if !trace.essential_criticals().is_empty() {
                return Err(format!("unexpected critical points at eps={eps}"));
            }
            if s.elements.len() != 1 || !matches!(s.elements[0], Element::Band { .. }) {
                return Err(format!(
                    "expected a single tangent band at eps={eps}, got {} elements",
                    s.elements.len()
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
            for _ in 0..100 {
                let x1: f64 = rng.gen_range(-3.0..3.0);
                let x2 = x1 * x1 + rng.gen_range(0.0..1.0) * eps * eps;
                let u = x1 - eps + (x1 * x1 + eps * eps - x2).sqrt();
                let exact = u.exp() * (1.0 + (x1 - u) / (1.0 - eps));
                let got = s.eval(&bf, x1, x2).map_err(|e| e.to_string())?.value;
                let rel = (got - exact).abs() / (1.0 + exact.abs());
                worst = worst.max(rel);
                if rel > 1e-10 {
                    return Err(format!(
                        "closed-form mismatch at eps={eps}, ({x1}, {x2}): rel {rel:e}"
                    ));
                }
            }
        }
        Ok(format!("100 points x 3 radii vs closed form, worst rel {worst:.2e}"))
    });
}

/// Evolve `name` to `target` and match the essential critical radii.
fn check_criticals(name: &str, target: f64, expected: &[f64]) -> Result<String, String> {
    let bf = common::load(name);
    let trace = bellman_core::evolution::evolve(&bf, target).map_err(|e| e.to_string())?;
    let got: Vec<f64> = trace.essential_criticals().iter().map(|c| c.eps).collect();
    if got.len() != expected.len() {
        return Err(format!("expected {} criticals, got {got:?}", expected.len()));
    }
    let mut worst = 0.0_f64;
    for (g, w) in got.iter().zip(expected) {
        worst = worst.max((g - w).abs());
        if !close(*g, *w, 1e-6) {
            return Err(format!("critical {g} vs expected {w} (all: {got:?})"));
        }
    }
    Ok(format!("criticals {got:?}, worst dev {worst:.2e}"))
}

#[test]
fn c2_sextic_plus_criticals() {
    criterion("c2_sextic_plus_criticals", 60.0, || {
        let e1 = 35.0_f64.sqrt() / 9.0;
        let e2 = 0.5_f64.sqrt();
        check_criticals("sextic_plus_c0", 1.0, &[e1, e2])
    });
}

#[test]
fn c3_sextic_minus_criticals() {
    criterion("c3_sextic_minus_criticals", 90.0, || {
        let e1 = (15.0_f64 / 8.0).sqrt();
        let e2 = (15.0_f64 / 2.0).sqrt();
        check_criticals("sextic_minus_c0", 3.0, &[e1, e2])
    });
}

#[test]
fn c4_quintic_criticals() {
    criterion("c4_quintic_criticals", 60.0, || {
        let e1 = (1225.0_f64 / 1614.0).sqrt();
        check_criticals("quintic", 1.2, &[e1, 1.0])
    });
}

#[test]
fn c5_angle_positions() {
    criterion("c5_angle_positions", 10.0, || {
        // symmetric case: the angle stays at the origin at every radius
        let bf = common::load("abs_cubed");
        for &eps in &[0.2, 0.5, 1.0] {
            let (_, s) = common::candidate(&bf, eps);
            let w = s
                .nodes
                .iter()
                .find_map(|n| match n {
                    SolvedNode::Angle { w, .. } => Some(*w),
                    _ => None,
                })
                .ok_or_else(|| format!("no angle node at eps={eps}"))?;
            if w.abs() > 1e-8 {
                return Err(format!("symmetric angle drifted to {w:e} at eps={eps}"));
            }
        }
        // asymmetric case: the angle position has a closed form and escapes
        // to infinity as eps -> 2
        let bf = common::load("escaping_angle");
        let mut seen = Vec::new();
        for &eps in &[0.5, 1.5, 1.9] {
            let (_, s) = common::candidate(&bf, eps);
            let w = s
                .nodes
                .iter()
                .find_map(|n| match n {
                    SolvedNode::Angle { w, .. } => Some(*w),
                    _ => None,
                })
                .ok_or_else(|| format!("no angle node at eps={eps}"))?;
            let exact = eps / (eps - 1.0) * (2.0 / ((2.0 - eps) * (1.0 + eps))).ln();
            if !close(w, exact, 1e-6) {
                return Err(format!("angle at eps={eps}: {w} vs closed form {exact}"));
            }
            seen.push(w);
        }
        // beyond eps = 2 the two infinite forces never balance
        let eps = 2.1;
        let fr = Force::right(ForceSource::Infinity, eps);
        let fl = Force::left(ForceSource::Infinity, eps);
        let balance = |u: f64| -> Result<f64, String> {
            Ok(fr.eval(&bf, u).map_err(|e| e.to_string())?
                + fl.eval(&bf, u).map_err(|e| e.to_string())?)
        };
        let mut prev = balance(-40.0)?;
        for k in 1..=800 {
            let u = -40.0 + k as f64 * 0.1;
            let b = balance(u)?;
            if b == 0.0 || (b > 0.0) != (prev > 0.0) {
                return Err(format!("balance changes sign near u={u} at eps={eps}"));
            }
            prev = b;
        }
        Ok(format!("angles {seen:?}; no balance root on [-40, 40] at eps=2.1"))
    });
}

#[test]
fn c6_property_suite_on_examples() {
    criterion("c6_property_suite_on_examples", 300.0, || {
        let mut worst = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
        for &(name, eps) in common::EXAMPLES {
            let bf = common::load(name);
            let (_, s) = common::candidate(&bf, eps);
            let rep = property_suite(&bf, &s);
            if !rep.pass() {
                return Err(format!(
                    "{name} at eps={eps}: boundary {:.2e}, concavity {:.2e}, \
                     gradient {:.2e}, curvature {:.2e}, notes {:?}",
                    rep.boundary_dev, rep.concavity_dev, rep.grad_dev, rep.ma_dev,
                    rep.admissibility
                ));
            }
            worst = (
                worst.0.max(rep.boundary_dev),
                worst.1.max(rep.concavity_dev),
                worst.2.max(rep.grad_dev),
                worst.3.max(rep.ma_dev),
            );
        }
        Ok(format!(
            "10 examples; worst boundary {:.2e}, concavity {:.2e}, gradient {:.2e}, \
             curvature {:.2e}",
            worst.0, worst.1, worst.2, worst.3
        ))
    });
}

#[test]
fn c7_optimizers_on_examples() {
    criterion("c7_optimizers_on_examples", 180.0, || {
        for &(name, eps) in common::EXAMPLES {
            let bf = common::load(name);
            let (_, s) = common::candidate(&bf, eps);
            let syn = Synthesizer::new(&bf, &s);
            let (lo, hi) = span_of(&s);
            let mut rng = ChaCha8Rng::seed_from_u64(0xC7);
            let points: Vec<(f64, f64)> = (0..200)
                .map(|_| {
                    let x1 = rng.gen_range(lo..hi);
                    (x1, x1 * x1 + rng.gen_range(0.0..1.0) * eps * eps)
                })
                .collect();
            let bad: Vec<String> = points
                .iter()
                .filter_map(|&(x1, x2)| {
                    let b = match s.eval(&bf, x1, x2) {
                        Ok(e) => e.value,
                        Err(e) => return Some(format!("eval ({x1}, {x2}): {e}")),
                    };
                    let phi = match syn.optimizer_at(x1, x2) {
                        Ok(phi) => phi,
                        Err(e) => return Some(format!("synth ({x1}, {x2}): {e}")),
                    };
                    match verify_optimizer(&bf, &phi, x1, x2, b, eps) {
                        Ok(rep) if rep.pass => None,
                        Ok(rep) => Some(format!("identities at ({x1}, {x2}): {rep:?}")),
                        Err(e) => Some(format!("verify ({x1}, {x2}): {e}")),
                    }
                })
                .collect();
            if !bad.is_empty() {
                return Err(format!("{name}: {} of 200 failed; first: {}", bad.len(), bad[0]));
            }
        }
        Ok("200 points per example, all identities hold".into())
    });
}

#[test]
fn c8_grid_oracle() {
    criterion("c8_grid_oracle", 600.0, || {
        // exact linear-in-coordinates case: the iteration reproduces x2
        let bf = common::load("quadratic");
        let grid = GridDomain { center: 0.0, r: 2.0, n1: 80, n2: 12, eps: 0.5 };
        let v = grid_minimal_concave(&bf, grid, &|_, x2| Some(x2), 400)
            .map_err(|e| e.to_string())?;
        let stats = compare(&v, &|_, x2| Some(x2));
        if stats.max_abs > 1e-10 {
            return Err(format!("quadratic grid off by {:.2e}", stats.max_abs));
        }
        let quad_abs = stats.max_abs;

        // smooth single-band example against the analytic candidate
        let bf = common::load("exp");
        let (_, s) = common::candidate(&bf, 0.5);
        let reference = move |x1: f64, x2: f64| s.eval(&bf, x1, x2).ok().map(|e| e.value);
        let grid = GridDomain { center: -1.0, r: 3.0, n1: 200, n2: 40, eps: 0.5 };
        let v = grid_minimal_concave(&common::load("exp"), grid, &reference, 800)
            .map_err(|e| e.to_string())?;
        let exp_stats = compare(&v, &reference);
        if exp_stats.max_rel > 5e-3 {
            return Err(format!("exp grid rel dev {:.2e} at {:?}", exp_stats.max_rel, exp_stats.at));
        }

        // grid error drops at least linearly when the mesh is halved
        let coarse = GridDomain { center: -1.0, r: 2.0, n1: 60, n2: 12, eps: 0.5 };
        let fine = GridDomain { center: -1.0, r: 2.0, n1: 119, n2: 23, eps: 0.5 };
        let vc = grid_minimal_concave(&common::load("exp"), coarse, &reference, 800)
            .map_err(|e| e.to_string())?;
        let vf = grid_minimal_concave(&common::load("exp"), fine, &reference, 800)
            .map_err(|e| e.to_string())?;
        let (sc, sf) = (compare(&vc, &reference), compare(&vf, &reference));
        let ratio = sc.max_abs / sf.max_abs;
        if ratio < 1.8 {
            return Err(format!(
                "refinement ratio {ratio:.2} (coarse {:.2e}, fine {:.2e})",
                sc.max_abs, sf.max_abs
            ));
        }

        // structured example with a cup and two angles
        let bf = common::load("sextic_plus_c0");
        let (_, s) = common::candidate(&bf, 0.3);
        let reference = move |x1: f64, x2: f64| s.eval(&bf, x1, x2).ok().map(|e| e.value);
        let grid = GridDomain { center: 0.0, r: 3.0, n1: 300, n2: 50, eps: 0.3 };
        let v = grid_minimal_concave(&common::load("sextic_plus_c0"), grid, &reference, 800)
            .map_err(|e| e.to_string())?;
        let sx_stats = compare(&v, &reference);
        if sx_stats.max_rel > 1e-2 {
            return Err(format!(
                "sextic grid rel dev {:.2e} at {:?}",
                sx_stats.max_rel, sx_stats.at
            ));
        }

        Ok(format!(
            "quadratic abs {quad_abs:.2e}; exp rel {:.2e}; refinement ratio {ratio:.2}; \
             sextic rel {:.2e}",
            exp_stats.max_rel, sx_stats.max_rel
        ))
    });
}
