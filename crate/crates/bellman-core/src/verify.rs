//! Property checks for an assembled candidate: boundary agreement, local
//! concavity, gradient continuity across element interfaces, and the
//! degenerate-Hessian (Monge–Ampère) identity inside elements.
//!
//! All sampling is deterministic (Weyl sequences), so repeated runs give
//! byte-identical reports.

use crate::boundary::BoundaryFunction;
use crate::foliation::Solved;
use serde::Serialize;

/// Aggregated maximal relative deviations of the property suite.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    /// max |B(x₁, x₁²) − f(x₁)| / (1 + |f|) on the lower parabola.
    pub boundary_dev: f64,
    /// max midpoint concavity violation over in-strip segments, relative.
    pub concavity_dev: f64,
    /// max gradient jump across detected element interfaces, relative.
    pub grad_dev: f64,
    /// max |B₁₁B₂₂ − B₁₂²| / (1 + |B₁₁B₂₂| + B₁₂²) inside elements.
    pub ma_dev: f64,
    /// Structural admissibility violations reported by the foliation.
    pub admissibility: Vec<String>,
}

impl SuiteReport {
    /// Default thresholds for a healthy candidate.
    pub fn pass(&self) -> bool {
        self.boundary_dev <= 1e-10
            && self.concavity_dev <= 1e-9
            && self.grad_dev <= 1e-6
            && self.ma_dev <= 1e-6
            && self.admissibility.is_empty()
    }
}

/// A horizontal sampling window covering all figures plus a tangent margin.
pub fn span_of(s: &Solved) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..s.nodes.len() {
        let (a, b) = s.node_span(i);
        if a.is_finite() {
            lo = lo.min(a);
        }
        if b.is_finite() {
            hi = hi.max(b);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        let c = if lo.is_finite() {
            lo
        } else if hi.is_finite() {
            hi
        } else {
            0.0
        };
        lo = c - 1.0;
        hi = c + 1.0;
    }
    let m = 2.0 * s.eps + 2.0;
    (lo - m, hi + m)
}

/// Fractional part of `k`-th term of a Weyl sequence with irrational step.
fn weyl(k: usize, alpha: f64) -> f64 {
    (k as f64 * alpha).fract()
}

/// Is the straight segment between two strip points entirely inside the
/// strip? (Above the lower parabola is automatic by convexity.)
fn segment_in_strip(y1: f64, y2: f64, z1: f64, z2: f64, eps: f64) -> bool {
    let q = |t: f64| -> f64 {
        let x1 = y1 + t * (z1 - y1);
        let x2 = y2 + t * (z2 - y2);
        x2 - x1 * x1 - eps * eps
    };
    let tol = 1e-12 * (1.0 + eps * eps);
    if q(0.0) > tol || q(1.0) > tol {
        return false;
    }
    let a = -(z1 - y1) * (z1 - y1);
    if a.abs() < 1e-300 {
        return true;
    }
    let b = (z2 - y2) - 2.0 * y1 * (z1 - y1);
    let tc = -b / (2.0 * a);
    !(tc > 0.0 && tc < 1.0 && q(tc) > tol)
}

/// Max relative deviation of the candidate from `f` on the lower parabola.
pub fn boundary_deviation(bf: &BoundaryFunction, s: &Solved, n: usize) -> f64 {
    let (lo, hi) = span_of(s);
    let mut worst = 0.0_f64;
    for k in 0..n {
        let x1 = lo + (hi - lo) * k as f64 / (n - 1) as f64;
        let fv = bf.f(x1);
        let dev = match s.eval(bf, x1, x1 * x1) {
            Ok(e) => (e.value - fv).abs() / (1.0 + fv.abs()),
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(dev);
    }
    worst
}

/// Max relative midpoint concavity violation over `n` random in-strip
/// segments.
pub fn concavity_deviation(bf: &BoundaryFunction, s: &Solved, n: usize) -> f64 {
    let (lo, hi) = span_of(s);
    let eps = s.eps;
    let mut worst = 0.0_f64;
    let mut accepted = 0usize;
    let mut k = 0usize;
    while accepted < n && k < 8 * n {
        k += 1;
        let p1 = lo + (hi - lo) * weyl(k, 0.754_877_666_246_692_9);
        let t1 = weyl(k, 0.569_840_290_998_053_3);
        let d = (2.0 * weyl(k, 0.364_499_230_312_44) - 1.0) * 2.0 * eps;
        let q1 = p1 + d;
        if q1 < lo || q1 > hi {
            continue;
        }
        let t2 = weyl(k, 0.873_580_464_736_29);
        let (p2, q2) = (p1 * p1 + t1 * eps * eps, q1 * q1 + t2 * eps * eps);
        if !segment_in_strip(p1, p2, q1, q2, eps) {
            continue;
        }
        let (ep, eq) = match (s.eval(bf, p1, p2), s.eval(bf, q1, q2)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => continue,
        };
        let (m1, m2) = (0.5 * (p1 + q1), 0.5 * (p2 + q2));
        let em = match s.eval(bf, m1, m2) {
            Ok(e) => e,
            Err(_) => continue,
        };
        accepted += 1;
        let viol =
            (0.5 * (ep.value + eq.value) - em.value) / (1.0 + ep.value.abs() + eq.value.abs());
        worst = worst.max(viol);
    }
    worst
}

/// Max relative gradient jump across element interfaces.
///
/// Scans `n_scan` abscissas along three horizontal level curves
/// `x₂ = x₁² + τ·ε²`, detects element changes between neighbours, bisects
/// each interface down to `1e-9` and compares the analytic gradients on the
/// two sides.
pub fn gradient_deviation(bf: &BoundaryFunction, s: &Solved, n_scan: usize) -> f64 {
    let (lo, hi) = span_of(s);
    let eps = s.eps;
    let mut worst = 0.0_f64;
    for &tau in &[0.18_f64, 0.5, 0.82] {
        let at = |x1: f64| s.eval(bf, x1, x1 * x1 + tau * eps * eps);
        let mut prev: Option<(f64, usize)> = None;
        for k in 0..n_scan {
            let x1 = lo + (hi - lo) * k as f64 / (n_scan - 1) as f64;
            let e = match at(x1) {
                Ok(e) => e,
                Err(_) => {
                    prev = None;
                    continue;
                }
            };
            if let Some((xp, elp)) = prev {
                if elp != e.element {
                    // bisect the interface between xp and x1
                    let (mut a, mut b) = (xp, x1);
                    for _ in 0..60 {
                        let m = 0.5 * (a + b);
                        match at(m) {
                            Ok(em) if em.element == elp => a = m,
                            _ => b = m,
                        }
                        if b - a < 1e-9 * (1.0 + a.abs()) {
                            break;
                        }
                    }
                    let d = 1e-7 * (1.0 + a.abs());
                    if let (Ok(l), Ok(r)) = (at(a - d), at(b + d)) {
                        let s1 = (l.d1 - r.d1).abs() / (1.0 + l.d1.abs() + r.d1.abs());
                        let s2 = (l.d2 - r.d2).abs() / (1.0 + l.d2.abs() + r.d2.abs());
                        worst = worst.max(s1).max(s2);
                    }
                }
            }
            prev = Some((x1, e.element));
        }
    }
    worst
}

/// Max relative Monge–Ampère residual `|B₁₁B₂₂ − B₁₂²|` inside elements.
///
/// The Hessian is assembled from first differences of the analytic gradient;
/// points whose difference stencil straddles an interface are skipped.
pub fn monge_ampere_deviation(bf: &BoundaryFunction, s: &Solved, n: usize) -> f64 {
    let (lo, hi) = span_of(s);
    let eps = s.eps;
    let mut worst = 0.0_f64;
    let mut accepted = 0usize;
    let mut k = 0usize;
    while accepted < n && k < 8 * n {
        k += 1;
        let x1 = lo + (hi - lo) * weyl(k, 0.754_877_666_246_692_9);
        let tau = 0.25 + 0.5 * weyl(k, 0.569_840_290_998_053_3);
        let x2 = x1 * x1 + tau * eps * eps;
        let h = 1e-6 * (1.0 + x1.abs());
        let v = 1e-6 * (1.0 + x2.abs()).min(0.1 * eps * eps);
        let evs: Option<Vec<_>> = [
            (x1, x2),
            (x1 + h, x2),
            (x1 - h, x2),
            (x1, x2 + v),
            (x1, x2 - v),
        ]
        .iter()
        .map(|&(a, b)| s.eval(bf, a, b).ok())
        .collect();
        let evs = match evs {
            Some(e) => e,
            None => continue,
        };
        if evs.iter().any(|e| e.element != evs[0].element) {
            continue;
        }
        accepted += 1;
        let b11 = (evs[1].d1 - evs[2].d1) / (2.0 * h);
        let b22 = (evs[3].d2 - evs[4].d2) / (2.0 * v);
        let b12a = (evs[1].d2 - evs[2].d2) / (2.0 * h);
        let b12b = (evs[3].d1 - evs[4].d1) / (2.0 * v);
        let b12 = 0.5 * (b12a + b12b);
        let det = b11 * b22 - b12 * b12;
        let rel = det.abs() / (1.0 + (b11 * b22).abs() + b12 * b12);
        worst = worst.max(rel);
    }
    worst
}

/// Run the full suite with the default sample sizes.
pub fn property_suite(bf: &BoundaryFunction, s: &Solved) -> SuiteReport {
    SuiteReport {
        boundary_dev: boundary_deviation(bf, s, 200),
        concavity_dev: concavity_deviation(bf, s, 1000),
        grad_dev: gradient_deviation(bf, s, 1200),
        ma_dev: monge_ampere_deviation(bf, s, 300),
        admissibility: s.check_admissible(bf),
    }
}
