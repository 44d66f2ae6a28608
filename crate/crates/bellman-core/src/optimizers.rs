//! Explicit boundary test functions attaining the candidate value.
//!
//! For a point `x` in the strip and a solved foliation, we synthesize a
//! piecewise constant/logarithmic function `φ` on `[0, 1]` with
//! `⟨φ⟩ = x₁`, `⟨φ²⟩ = x₂`, `‖φ‖ ≤ ε`, and `⟨f(φ)⟩` equal to the candidate
//! value at `x`. The synthesis follows the chain of figures feeding the one
//! containing `x`: every tangent band contributes a logarithmic piece running
//! along the free boundary, every chord a pair of constants, and the crowned
//! figures convex decompositions into their extreme points.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boundary::BoundaryFunction;
use crate::candidates::{tangent_u_left, tangent_u_right};
use crate::foliation::{interfaces, Crown, Element, IFace, LinRegion, Solved, SolvedNode};
use crate::forces::Side;
use crate::numerics::golden_max_2d;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("synthesis failed in {figure}: {detail}")]
    SynthesisFailure { figure: String, detail: String },
    #[error("point ({x1}, {x2}) is not covered by the foliation")]
    NotCovered { x1: f64, x2: f64 },
    #[error("integral failure: {0}")]
    Integral(String),
}

/// One piece of a test function on a subinterval of `[0, 1]`.
///
/// A `Log` piece is `φ(τ) = sign·scale·ln|τ − tau0| + offset`; the singular
/// point `tau0` lies outside the open interval (at or before `lo`, or at or
/// after `hi`), so the piece is monotone and integrable.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Piece {
    Const { lo: f64, hi: f64, value: f64 },
    Log { lo: f64, hi: f64, sign: f64, scale: f64, tau0: f64, offset: f64 },
}

fn xlnx(y: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else {
        y * y.ln()
    }
}
fn xln2x(y: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else {
        y * y.ln() * y.ln()
    }
}

impl Piece {
    pub fn lo(&self) -> f64 {
        match self {
            Piece::Const { lo, .. } | Piece::Log { lo, .. } => *lo,
        }
    }
    pub fn hi(&self) -> f64 {
        match self {
            Piece::Const { hi, .. } | Piece::Log { hi, .. } => *hi,
        }
    }

    pub fn eval(&self, tau: f64) -> f64 {
        match self {
            Piece::Const { value, .. } => *value,
            Piece::Log { sign, scale, tau0, offset, .. } => {
                sign * scale * (tau - tau0).abs().max(f64::MIN_POSITIVE).ln() + offset
            }
        }
    }

    /// `(∫1, ∫φ, ∫φ²)` over `[p, q] ∩ [lo, hi]` in closed form.
    pub fn moments(&self, p: f64, q: f64) -> (f64, f64, f64) {
        let (lo, hi) = (self.lo(), self.hi());
        let a = p.max(lo);
        let b = q.min(hi);
        if b <= a {
            return (0.0, 0.0, 0.0);
        }
        match self {
            Piece::Const { value, .. } => {
                let len = b - a;
                (len, value * len, value * value * len)
            }
            Piece::Log { sign, scale, tau0, offset, .. } => {
                let (s, k, c) = (*sign, *scale, *offset);
                let (ya, yb) = ((a - tau0).abs(), (b - tau0).abs());
                let (ymin, ymax) = if ya < yb { (ya, yb) } else { (yb, ya) };
                let i1 = |y: f64| s * k * (xlnx(y) - y) + c * y;
                let i2 = |y: f64| {
                    k * k * (xln2x(y) - 2.0 * xlnx(y) + 2.0 * y)
                        + 2.0 * s * k * c * (xlnx(y) - y)
                        + c * c * y
                };
                (b - a, i1(ymax) - i1(ymin), i2(ymax) - i2(ymin))
            }
        }
    }

    /// `∫ f(φ(τ)) dτ` over `[p, q] ∩ [lo, hi]` via a weighted boundary
    /// integral (exact change of variable on log pieces).
    pub fn f_integral(
        &self,
        bf: &BoundaryFunction,
        p: f64,
        q: f64,
    ) -> Result<f64, OptimizerError> {
        let (lo, hi) = (self.lo(), self.hi());
        let a = p.max(lo);
        let b = q.min(hi);
        if b <= a {
            return Ok(0.0);
        }
        match self {
            Piece::Const { value, .. } => Ok(bf.f(*value) * (b - a)),
            Piece::Log { sign, scale, tau0, offset, .. } => {
                let (s, k, c) = (*sign, *scale, *offset);
                let (ya, yb) = ((a - tau0).abs(), (b - tau0).abs());
                let (ymin, ymax) = if ya < yb { (ya, yb) } else { (yb, ya) };
                let phi_of_y = |y: f64| -> f64 {
                    if y <= 0.0 {
                        -s * f64::INFINITY
                    } else {
                        s * k * y.ln() + c
                    }
                };
                let sigma = 1.0 / (s * k);
                let v = bf
                    .weighted_deriv_integral(0, sigma, c, phi_of_y(ymin), phi_of_y(ymax))
                    .map_err(|e| OptimizerError::Integral(e.to_string()))?;
                Ok(sigma * v)
            }
        }
    }
}

/// A synthesized test function on `[0, 1]`.
#[derive(Debug, Clone, Serialize)]
pub struct Optimizer {
    pub pieces: Vec<Piece>,
    /// Human-readable synthesis path (outermost figure first).
    pub provenance: Vec<String>,
}

impl Optimizer {
    pub fn constant(v: f64) -> Self {
        Optimizer {
            pieces: vec![Piece::Const { lo: 0.0, hi: 1.0, value: v }],
            provenance: vec!["constant".into()],
        }
    }

    pub fn eval(&self, tau: f64) -> f64 {
        for p in &self.pieces {
            if tau < p.hi() || std::ptr::eq(p, self.pieces.last().unwrap()) {
                if tau >= p.lo() || std::ptr::eq(p, self.pieces.first().unwrap()) {
                    return p.eval(tau);
                }
            }
        }
        self.pieces.last().map(|p| p.eval(tau)).unwrap_or(0.0)
    }

    /// `(∫1, ∫φ, ∫φ²)` over `[p, q]`.
    pub fn moments(&self, p: f64, q: f64) -> (f64, f64, f64) {
        let mut acc = (0.0, 0.0, 0.0);
        for piece in &self.pieces {
            let m = piece.moments(p, q);
            acc = (acc.0 + m.0, acc.1 + m.1, acc.2 + m.2);
        }
        acc
    }

    pub fn mean(&self) -> f64 {
        let (m0, m1, _) = self.moments(0.0, 1.0);
        m1 / m0
    }
    pub fn mean_sq(&self) -> f64 {
        let (m0, _, m2) = self.moments(0.0, 1.0);
        m2 / m0
    }

    pub fn f_average(&self, bf: &BoundaryFunction) -> Result<f64, OptimizerError> {
        let mut acc = 0.0;
        for piece in &self.pieces {
            acc += piece.f_integral(bf, 0.0, 1.0)?;
        }
        Ok(acc)
    }

    /// Variance of `φ` over `[p, q]`.
    fn variance(&self, p: f64, q: f64) -> f64 {
        let (m0, m1, m2) = self.moments(p, q);
        if m0 <= 1e-14 {
            return 0.0;
        }
        let mean = m1 / m0;
        (m2 / m0 - mean * mean).max(0.0)
    }

    /// Supremum over subintervals of the variance (the squared norm),
    /// by a grid over piece boundaries plus local golden refinement.
    pub fn bmo_norm_sq(&self) -> f64 {
        let mut cands: Vec<f64> = Vec::new();
        for piece in &self.pieces {
            let (lo, hi) = (piece.lo(), piece.hi());
            cands.push(lo);
            cands.push(hi);
            if let Piece::Log { tau0, .. } = piece {
                // geometric spread toward the singular end
                let (near, far) = if (tau0 - lo).abs() < (tau0 - hi).abs() {
                    (lo, hi)
                } else {
                    (hi, lo)
                };
                let mut d = (far - near).abs();
                for _ in 0..10 {
                    d *= 0.5;
                    cands.push(near + (far - near).signum() * d);
                }
            } else {
                for j in 1..4 {
                    cands.push(lo + (hi - lo) * j as f64 / 4.0);
                }
            }
        }
        cands.push(0.0);
        cands.push(1.0);
        cands.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cands.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

        let mut best = (0.0_f64, 0.0_f64, 1.0_f64);
        for i in 0..cands.len() {
            for j in (i + 1)..cands.len() {
                let v = self.variance(cands[i], cands[j]);
                if v > best.0 {
                    best = (v, cands[i], cands[j]);
                }
            }
        }
        // local refinement around the best grid pair
        let (_, bp, bq) = best;
        let idx = |t: f64| cands.partition_point(|&c| c < t - 1e-15);
        let (ip, iq) = (idx(bp), idx(bq));
        let p_lo = if ip > 0 { cands[ip - 1] } else { 0.0 };
        let p_hi = cands.get(ip + 1).copied().unwrap_or(1.0).min(bq);
        let q_lo = if iq > 0 { cands[iq - 1] } else { 0.0 }.max(bp);
        let q_hi = cands.get(iq + 1).copied().unwrap_or(1.0);
        let scale = self
            .pieces
            .iter()
            .flat_map(|p| [p.eval(p.lo() + 1e-9), p.eval(p.hi() - 1e-9)])
            .fold(1.0_f64, |m, v| if v.is_finite() { m.max(v.abs()) } else { m });
        let tol = 1e-9 / (1.0 + scale);
        let (_, _, refined) =
            golden_max_2d(|p, q| if q > p { self.variance(p, q) } else { 0.0 }, p_lo, p_hi, q_lo, q_hi, tol);
        best.0.max(refined)
    }

    pub fn bmo_norm(&self) -> f64 {
        self.bmo_norm_sq().sqrt()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({ "pieces": self.pieces }))
            .expect("serializable")
    }

    /// CSV samples `(τ, φ(τ))`.
    pub fn to_csv(&self, n: usize) -> String {
        let mut out = String::from("tau,phi\n");
        for i in 0..=n {
            let t = i as f64 / n as f64;
            out.push_str(&format!("{:.16e},{:.16e}\n", t, self.eval(t)));
        }
        out
    }
}

/// Verification report for a synthesized test function.
#[derive(Debug, Clone, Serialize)]
pub struct OptimizerReport {
    pub d_mean: f64,
    pub d_mean_sq: f64,
    pub d_f_avg: f64,
    pub norm_sq_excess: f64,
    pub pass: bool,
}

/// Check the defining identities of `phi` at `(x1, x2)` against the value
/// `bval`.
pub fn verify_optimizer(
    bf: &BoundaryFunction,
    phi: &Optimizer,
    x1: f64,
    x2: f64,
    bval: f64,
    eps: f64,
) -> Result<OptimizerReport, OptimizerError> {
    let d_mean = (phi.mean() - x1).abs();
    let d_mean_sq = (phi.mean_sq() - x2).abs();
    let d_f_avg = (phi.f_average(bf)? - bval).abs();
    let norm_sq_excess = phi.bmo_norm_sq() - eps * eps;
    let pass = d_mean <= 1e-9
        && d_mean_sq <= 1e-9
        && d_f_avg <= 1e-7 * (1.0 + bval.abs())
        && norm_sq_excess <= 1e-8 * eps * eps;
    Ok(OptimizerReport { d_mean, d_mean_sq, d_f_avg, norm_sq_excess, pass })
}

/// One sample of the curve traced by the running averages of `(φ, φ²)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurveSample {
    pub tau: f64,
    pub g1: f64,
    pub g2: f64,
    pub f_avg: f64,
}

/// Sample the running-average curve `γ(τ) = ⟨(φ, φ²)⟩ over [0, τ]` together
/// with the running average of `f(φ)`.
pub fn delivery_curve(
    bf: &BoundaryFunction,
    phi: &Optimizer,
    n: usize,
) -> Result<Vec<CurveSample>, OptimizerError> {
    let mut out = Vec::with_capacity(n);
    for i in 1..=n {
        let t = i as f64 / n as f64;
        let (m0, m1, m2) = phi.moments(0.0, t);
        let mut fint = 0.0;
        for piece in &phi.pieces {
            fint += piece.f_integral(bf, 0.0, t)?;
        }
        if m0 > 1e-13 {
            out.push(CurveSample { tau: t, g1: m1 / m0, g2: m2 / m0, f_avg: fint / m0 });
        }
    }
    Ok(out)
}

pub fn curve_csv(samples: &[CurveSample]) -> String {
    let mut out = String::from("tau,g1,g2,f_avg\n");
    for s in samples {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e}\n",
            s.tau, s.g1, s.g2, s.f_avg
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// synthesis
// ---------------------------------------------------------------------------

/// Map pieces on `[0, 1]` affinely into `[lo, hi]`.
fn rescale_into(pieces: &[Piece], lo: f64, hi: f64) -> Vec<Piece> {
    let w = hi - lo;
    pieces
        .iter()
        .map(|p| match *p {
            Piece::Const { lo: a, hi: b, value } => {
                Piece::Const { lo: lo + w * a, hi: lo + w * b, value }
            }
            Piece::Log { lo: a, hi: b, sign, scale, tau0, offset } => Piece::Log {
                lo: lo + w * a,
                hi: lo + w * b,
                sign,
                scale,
                tau0: lo + w * tau0,
                // φ of the new variable: |τ' − tau0'| = w·|τ − tau0|, so the
                // offset compensates by −s·k·ln w
                offset: offset - sign * scale * w.ln(),
            },
        })
        .collect()
}

/// Reverse pieces on `[0, 1]`: `τ → 1 − τ`.
fn reversed(pieces: &[Piece]) -> Vec<Piece> {
    let mut out: Vec<Piece> = pieces
        .iter()
        .map(|p| match *p {
            Piece::Const { lo, hi, value } => Piece::Const { lo: 1.0 - hi, hi: 1.0 - lo, value },
            Piece::Log { lo, hi, sign, scale, tau0, offset } => Piece::Log {
                lo: 1.0 - hi,
                hi: 1.0 - lo,
                sign,
                scale,
                tau0: 1.0 - tau0,
                offset,
            },
        })
        .collect();
    out.reverse();
    out
}

/// Barycentric coordinates of `x` in the triangle `(a, b, c)`.
fn barycentric(
    x: (f64, f64),
    a: (f64, f64),
    b: (f64, f64),
    c: (f64, f64),
) -> Option<(f64, f64, f64)> {
    let det = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
    if det.abs() < 1e-300 {
        return None;
    }
    let wb = ((x.0 - a.0) * (c.1 - a.1) - (x.1 - a.1) * (c.0 - a.0)) / det;
    let wc = ((b.0 - a.0) * (x.1 - a.1) - (b.1 - a.1) * (x.0 - a.0)) / det;
    Some((1.0 - wb - wc, wb, wc))
}

fn clamp_weights(w: (f64, f64, f64), tol: f64) -> Option<(f64, f64, f64)> {
    if w.0 < -tol || w.1 < -tol || w.2 < -tol {
        return None;
    }
    let c = (w.0.max(0.0), w.1.max(0.0), w.2.max(0.0));
    let s = c.0 + c.1 + c.2;
    Some((c.0 / s, c.1 / s, c.2 / s))
}

/// Upper-parabola point of parameter `u` on the given side: the contact
/// point of the tangent through `(u, u²)`.
fn top_point(u: f64, eps: f64, side: Side) -> (f64, f64) {
    let t = match side {
        Side::Right => u - eps,
        Side::Left => u + eps,
    };
    (t, t * t + eps * eps)
}

/// Synthesizer of test functions for a solved foliation.
pub struct Synthesizer<'a> {
    pub bf: &'a BoundaryFunction,
    pub solved: &'a Solved,
}

impl<'a> Synthesizer<'a> {
    pub fn new(bf: &'a BoundaryFunction, solved: &'a Solved) -> Self {
        Synthesizer { bf, solved }
    }

    fn eps(&self) -> f64 {
        self.solved.eps
    }

    fn fail<T>(&self, figure: &str, detail: String) -> Result<T, OptimizerError> {
        Err(OptimizerError::SynthesisFailure { figure: figure.into(), detail })
    }

    /// The node emitting the right-going band that feeds node `i` from the
    /// left (`None` means the band comes from `-∞`).
    fn emitter_left_of(&self, i: usize) -> Option<usize> {
        if i == 0 {
            return None;
        }
        let j = i - 1;
        let (_, right) = interfaces(&self.solved.picture.nodes[j]);
        (right == IFace::EmitR).then_some(j)
    }

    fn emitter_right_of(&self, i: usize) -> Option<usize> {
        let j = i + 1;
        if j >= self.solved.picture.nodes.len() {
            return None;
        }
        let (left, _) = interfaces(&self.solved.picture.nodes[j]);
        (left == IFace::EmitL).then_some(j)
    }

    /// Find the node emitting the right band whose inner parameter is
    /// `u_lo` (`Ok(None)` for a band from `-∞`).
    fn right_band_source(&self, u_lo: f64) -> Result<Option<usize>, OptimizerError> {
        if !u_lo.is_finite() {
            return Ok(None);
        }
        for j in 0..self.solved.nodes.len() {
            let (_, right) = interfaces(&self.solved.picture.nodes[j]);
            if right != IFace::EmitR {
                continue;
            }
            if let Some(em) = self.solved.emission_right(self.bf, j) {
                if (em.pos - u_lo).abs() <= 1e-6 * (1.0 + u_lo.abs()) {
                    return Ok(Some(j));
                }
            }
        }
        self.fail("band", format!("no emitter found for right band at u = {u_lo}"))
    }

    fn left_band_source(&self, u_hi: f64) -> Result<Option<usize>, OptimizerError> {
        if !u_hi.is_finite() {
            return Ok(None);
        }
        for j in 0..self.solved.nodes.len() {
            let (left, _) = interfaces(&self.solved.picture.nodes[j]);
            if left != IFace::EmitL {
                continue;
            }
            if let Some(em) = self.solved.emission_left(self.bf, j) {
                if (em.pos - u_hi).abs() <= 1e-6 * (1.0 + u_hi.abs()) {
                    return Ok(Some(j));
                }
            }
        }
        self.fail("band", format!("no emitter found for left band at u = {u_hi}"))
    }

    /// Test function for the upper-parabola point `(u1−ε, (u1−ε)²+ε²)` fed
    /// by the right-going chain emitted from `src` (or from `-∞`).
    fn chain_right(&self, src: Option<usize>, u1: f64) -> Result<Vec<Piece>, OptimizerError> {
        let eps = self.eps();
        match src {
            None => Ok(vec![Piece::Log {
                lo: 0.0,
                hi: 1.0,
                sign: 1.0,
                scale: eps,
                tau0: 0.0,
                offset: u1,
            }]),
            Some(j) => {
                let em = self.solved.emission_right(self.bf, j).ok_or_else(|| {
                    OptimizerError::SynthesisFailure {
                        figure: "chain".into(),
                        detail: format!("node {j} does not emit rightward"),
                    }
                })?;
                let u0 = em.pos;
                let psi0 = self.node_out_right(j)?;
                if u1 <= u0 + 1e-13 * (1.0 + u0.abs()) {
                    return Ok(psi0);
                }
                let lambda = ((u0 - u1) / eps).exp();
                let mut pieces = rescale_into(&psi0, 0.0, lambda);
                pieces.push(Piece::Log {
                    lo: lambda,
                    hi: 1.0,
                    sign: 1.0,
                    scale: eps,
                    tau0: 0.0,
                    offset: u1,
                });
                Ok(pieces)
            }
        }
    }

    /// Mirror of [`chain_right`]: point `(u1+ε, (u1+ε)²+ε²)` fed from the
    /// left-going chain emitted from `src` (or from `+∞`).
    fn chain_left(&self, src: Option<usize>, u1: f64) -> Result<Vec<Piece>, OptimizerError> {
        let eps = self.eps();
        match src {
            None => Ok(vec![Piece::Log {
                lo: 0.0,
                hi: 1.0,
                sign: -1.0,
                scale: eps,
                tau0: 0.0,
                offset: u1,
            }]),
            Some(j) => {
                let em = self.solved.emission_left(self.bf, j).ok_or_else(|| {
                    OptimizerError::SynthesisFailure {
                        figure: "chain".into(),
                        detail: format!("node {j} does not emit leftward"),
                    }
                })?;
                let u0 = em.pos;
                let psi0 = self.node_out_left(j)?;
                if u1 >= u0 - 1e-13 * (1.0 + u0.abs()) {
                    return Ok(psi0);
                }
                let lambda = ((u1 - u0) / eps).exp();
                let mut pieces = rescale_into(&psi0, 0.0, lambda);
                pieces.push(Piece::Log {
                    lo: lambda,
                    hi: 1.0,
                    sign: -1.0,
                    scale: eps,
                    tau0: 0.0,
                    offset: u1,
                });
                Ok(pieces)
            }
        }
    }

    /// Test function at the point where the right-going band leaves node `j`
    /// (its outgoing node on the free boundary).
    fn node_out_right(&self, j: usize) -> Result<Vec<Piece>, OptimizerError> {
        let eps = self.eps();
        match (&self.solved.nodes[j], self.solved.picture.nodes[j].crown) {
            (SolvedNode::Chordal { a_top, b_top, .. }, Crown::Full) => Ok(vec![
                Piece::Const { lo: 0.0, hi: 0.5, value: *a_top },
                Piece::Const { lo: 0.5, hi: 1.0, value: *b_top },
            ]),
            (SolvedNode::Chordal { a_top, b_top, .. }, Crown::TrolleybusR) => {
                let x_out = top_point(*b_top, eps, Side::Right);
                self.trolleybus_r(j, *a_top, *b_top, x_out)
            }
            (SolvedNode::Multicup { arcs, .. }, _) => {
                let ar = arcs.last().unwrap().1;
                let x_out = top_point(ar, eps, Side::Right);
                self.multicup(arcs, x_out)
            }
            (sn, crown) => self.fail(
                "chain",
                format!("node {j} ({sn:?}, {crown:?}) cannot feed a right-going band"),
            ),
        }
    }

    fn node_out_left(&self, j: usize) -> Result<Vec<Piece>, OptimizerError> {
        let eps = self.eps();
        match (&self.solved.nodes[j], self.solved.picture.nodes[j].crown) {
            (SolvedNode::Chordal { a_top, b_top, .. }, Crown::Full) => Ok(vec![
                Piece::Const { lo: 0.0, hi: 0.5, value: *b_top },
                Piece::Const { lo: 0.5, hi: 1.0, value: *a_top },
            ]),
            (SolvedNode::Chordal { a_top, b_top, .. }, Crown::TrolleybusL) => {
                let x_out = top_point(*a_top, eps, Side::Left);
                self.trolleybus_l(j, *a_top, *b_top, x_out)
            }
            (SolvedNode::Multicup { arcs, .. }, _) => {
                let al = arcs.first().unwrap().0;
                let x_out = top_point(al, eps, Side::Left);
                // non-increasing orientation, ending at the left arc end
                Ok(reversed(&self.multicup(arcs, x_out)?))
            }
            (sn, crown) => self.fail(
                "chain",
                format!("node {j} ({sn:?}, {crown:?}) cannot feed a left-going band"),
            ),
        }
    }

    /// Convex decomposition in a right trolleybus over the chord `[a0, b0]`
    /// of node `j`: incoming chain weight, then the two chord endpoints.
    fn trolleybus_r(
        &self,
        j: usize,
        a0: f64,
        b0: f64,
        x: (f64, f64),
    ) -> Result<Vec<Piece>, OptimizerError> {
        let eps = self.eps();
        let p_in = top_point(a0, eps, Side::Right);
        let w = barycentric(x, p_in, (a0, a0 * a0), (b0, b0 * b0))
            .and_then(|w| clamp_weights(w, 1e-9))
            .ok_or_else(|| OptimizerError::SynthesisFailure {
                figure: "trolleybus_r".into(),
                detail: format!("point {x:?} outside triangle over [{a0}, {b0}]"),
            })?;
        let psi = self.chain_right(self.emitter_left_of(j), a0)?;
        let mut pieces = rescale_into(&psi, 0.0, w.0);
        if w.1 > 0.0 {
            pieces.push(Piece::Const { lo: w.0, hi: w.0 + w.1, value: a0 });
        }
        if w.2 > 0.0 {
            pieces.push(Piece::Const { lo: w.0 + w.1, hi: 1.0, value: b0 });
        }
        Ok(pieces)
    }

    fn trolleybus_l(
        &self,
        j: usize,
        a0: f64,
        b0: f64,
        x: (f64, f64),
    ) -> Result<Vec<Piece>, OptimizerError> {
        let eps = self.eps();
        let p_in = top_point(b0, eps, Side::Left);
        let w = barycentric(x, p_in, (b0, b0 * b0), (a0, a0 * a0))
            .and_then(|w| clamp_weights(w, 1e-9))
            .ok_or_else(|| OptimizerError::SynthesisFailure {
                figure: "trolleybus_l".into(),
                detail: format!("point {x:?} outside triangle over [{a0}, {b0}]"),
            })?;
        let psi = self.chain_left(self.emitter_right_of(j), b0)?;
        let mut pieces = rescale_into(&psi, 0.0, w.0);
        if w.1 > 0.0 {
            pieces.push(Piece::Const { lo: w.0, hi: w.0 + w.1, value: b0 });
        }
        if w.2 > 0.0 {
            pieces.push(Piece::Const { lo: w.0 + w.1, hi: 1.0, value: a0 });
        }
        Ok(pieces)
    }

    /// Angle at `w` (node `j`): three-point decomposition between the two
    /// incoming chains and the vertex.
    fn angle(&self, j: usize, w: f64, x: (f64, f64)) -> Result<Vec<Piece>, OptimizerError> {
        let eps = self.eps();
        let p1 = top_point(w, eps, Side::Right);
        let p2 = top_point(w, eps, Side::Left);
        let al = barycentric(x, p1, (w, w * w), p2)
            .and_then(|a| clamp_weights(a, 1e-9))
            .ok_or_else(|| OptimizerError::SynthesisFailure {
                figure: "angle".into(),
                detail: format!("point {x:?} outside angle cone at w = {w}"),
            })?;
        let mut pieces = Vec::new();
        if al.0 > 0.0 {
            let psi1 = self.chain_right(self.emitter_left_of(j), w)?;
            pieces.extend(rescale_into(&psi1, 0.0, al.0));
        }
        if al.1 > 0.0 {
            pieces.push(Piece::Const { lo: al.0, hi: al.0 + al.1, value: w });
        }
        if al.2 > 0.0 {
            let psi2 = self.chain_left(self.emitter_right_of(j), w)?;
            pieces.extend(rescale_into(&reversed(&psi2), al.0 + al.1, 1.0));
        }
        Ok(pieces)
    }

    /// Birdie over the chord `[a0, b0]` of node `j`: four-point
    /// decomposition between both incoming chains and the chord endpoints.
    fn birdie(
        &self,
        j: usize,
        a0: f64,
        b0: f64,
        x: (f64, f64),
    ) -> Result<Vec<Piece>, OptimizerError> {
        let eps = self.eps();
        let pr = top_point(a0, eps, Side::Right);
        let pl = top_point(b0, eps, Side::Left);
        let u1 = (a0, a0 * a0);
        let u2 = (b0, b0 * b0);
        // weights (β₀..β₃) on (pr, u1, u2, pl): the first three are affine
        // functions of β₃ after scaling by the triangle determinant
        let n_at = |b3: f64| -> Option<(f64, f64, f64)> {
            let y = (x.0 - b3 * pl.0, x.1 - b3 * pl.1);
            let det = (u1.0 - pr.0) * (u2.1 - pr.1) - (u1.1 - pr.1) * (u2.0 - pr.0);
            if det.abs() < 1e-300 {
                return None;
            }
            let s = 1.0 - b3;
            let a = (pr.0 * s, pr.1 * s);
            let wb = ((y.0 - a.0) * (u2.1 - pr.1) - (y.1 - a.1) * (u2.0 - pr.0)) / det;
            let wc = ((u1.0 - pr.0) * (y.1 - a.1) - (u1.1 - pr.1) * (y.0 - a.0)) / det;
            Some((s - wb - wc, wb, wc))
        };
        let feasible = |b3: f64| -> bool {
            n_at(b3)
                .map(|(w0, w1, w2)| w0 >= -1e-11 && w1 >= -1e-11 && w2 >= -1e-11)
                .unwrap_or(false)
        };
        // the feasible set in β₃ is an interval inside [0, 1): locate it
        let mut lo_f = None;
        let n = 400;
        for i in 0..=n {
            let b3 = i as f64 / n as f64 * (1.0 - 1e-9);
            if feasible(b3) {
                lo_f = Some(b3);
                break;
            }
        }
        let lo_f = match lo_f {
            Some(v) => v,
            None => {
                return self.fail(
                    "birdie",
                    format!("no feasible decomposition for {x:?} over [{a0}, {b0}]"),
                )
            }
        };
        let mut hi_f = lo_f;
        while hi_f < 1.0 - 1e-9 && feasible(hi_f + 1.0 / n as f64) {
            hi_f += 1.0 / n as f64;
        }
        let b3 = 0.5 * (lo_f + hi_f);
        let (w0, w1, w2) = n_at(b3).unwrap();
        let (w0, w1, w2) = (w0.max(0.0), w1.max(0.0), w2.max(0.0));
        let s = w0 + w1 + w2 + b3;
        let (w0, w1, w2, b3) = (w0 / s, w1 / s, w2 / s, b3 / s);

        let mut pieces = Vec::new();
        let mut at = 0.0;
        if w0 > 0.0 {
            let psi1 = self.chain_right(self.emitter_left_of(j), a0)?;
            pieces.extend(rescale_into(&psi1, at, at + w0));
            at += w0;
        }
        if w1 > 0.0 {
            pieces.push(Piece::Const { lo: at, hi: at + w1, value: a0 });
            at += w1;
        }
        if w2 > 0.0 {
            pieces.push(Piece::Const { lo: at, hi: at + w2, value: b0 });
            at += w2;
        }
        if b3 > 0.0 {
            let psi2 = self.chain_left(self.emitter_right_of(j), b0)?;
            pieces.extend(rescale_into(&reversed(&psi2), at, 1.0));
        }
        Ok(pieces)
    }

    /// Lower boundary of a multicup at abscissa `t`: the parabola on arcs,
    /// the straight chord over the gaps between consecutive arcs.
    fn multicup_floor(arcs: &[(f64, f64)], t: f64) -> f64 {
        for w in arcs.windows(2) {
            let (g_lo, g_hi) = (w[0].1, w[1].0);
            if t > g_lo && t < g_hi {
                return g_lo * g_lo + (t - g_lo) * (g_lo + g_hi);
            }
        }
        t * t
    }

    /// Multicup separating-line construction: a supporting line of the hull
    /// of the free-boundary region and the outer arc ends, through `x`;
    /// the two crossings with the fixed boundary give a four-block
    /// decomposition of `x`.
    fn multicup(&self, arcs: &[(f64, f64)], x: (f64, f64)) -> Result<Vec<Piece>, OptimizerError> {
        let eps = self.eps();
        let (x1, x2) = x;
        if x2 <= x1 * x1 + 1e-12 * (1.0 + x1 * x1) {
            return Ok(vec![Piece::Const { lo: 0.0, hi: 1.0, value: x1 }]);
        }
        let al = arcs.first().unwrap().0;
        let ar = arcs.last().unwrap().1;

        // candidate supporting lines through x: tangents to the shifted
        // parabola, then lines through the finite outer arc ends
        let mut ks: Vec<f64> = Vec::new();
        let disc = x1 * x1 - x2 + eps * eps;
        if disc >= 0.0 {
            ks.push(2.0 * x1 - 2.0 * disc.sqrt());
            ks.push(2.0 * x1 + 2.0 * disc.sqrt());
        }
        for e in [al, ar] {
            if e.is_finite() && (x1 - e).abs() > 1e-12 {
                ks.push((x2 - e * e) / (x1 - e));
            }
        }
        let tol = 1e-9 * (1.0 + x1 * x1 + eps * eps);
        let admissible = |k: f64| -> bool {
            let b = x2 - k * x1;
            // shifted parabola above the line
            if eps * eps - b - k * k / 4.0 < -tol {
                return false;
            }
            for e in [al, ar] {
                if e.is_finite() && e * e - k * e - b < -tol {
                    return false;
                }
            }
            true
        };

        for &k in &ks {
            if !admissible(k) {
                continue;
            }
            let b = x2 - k * x1;
            let g = |t: f64| Self::multicup_floor(arcs, t) - (k * t + b);
            // parabola-line roots bracket all crossings of the floor
            let rad = (k * k + 4.0 * b).max(0.0).sqrt();
            let (t_lo, t_hi) = ((k - rad) / 2.0, (k + rad) / 2.0);
            let find = |from: f64, to: f64| -> Option<f64> {
                // scan for the sign change of g nearest to x₁
                let n = 600;
                let mut prev = from;
                let mut pv = g(prev);
                for i in 1..=n {
                    let t = from + (to - from) * i as f64 / n as f64;
                    let v = g(t);
                    if pv <= 0.0 && v >= 0.0 || pv >= 0.0 && v <= 0.0 {
                        let r = crate::numerics::brent_root(&g, prev.min(t), prev.max(t), 1e-13)
                            .unwrap_or(0.5 * (prev + t));
                        return Some(r);
                    }
                    prev = t;
                    pv = v;
                }
                None
            };
            let y1 = match find(x1, t_lo - 1e-9 * (1.0 + t_lo.abs())) {
                Some(v) => v,
                None => t_lo,
            };
            let z1 = match find(x1, t_hi + 1e-9 * (1.0 + t_hi.abs())) {
                Some(v) => v,
                None => t_hi,
            };
            if z1 - y1 < 1e-12 {
                return Ok(vec![Piece::Const { lo: 0.0, hi: 1.0, value: x1 }]);
            }
            // resolve each crossing into one or two fixed-boundary points
            let resolve = |t: f64| -> (f64, f64, f64) {
                for w in arcs.windows(2) {
                    let (g_lo, g_hi) = (w[0].1, w[1].0);
                    if t > g_lo + 1e-12 && t < g_hi - 1e-12 {
                        return (g_lo, g_hi, (g_hi - t) / (g_hi - g_lo));
                    }
                }
                (t, t, 1.0)
            };
            let (a1, a2, alpha_y) = resolve(y1);
            let (a3, a4, alpha_z) = resolve(z1);
            // split so the left pair (averaging to y) carries weight
            // (z₁ − x₁)/(z₁ − y₁)
            let total = z1 - y1;
            let w_left = (z1 - x1) / total;
            let cut1 = w_left * alpha_y;
            let cut2 = w_left;
            let cut3 = w_left + (1.0 - w_left) * alpha_z;
            let mut pieces = Vec::new();
            let mut push = |lo: f64, hi: f64, v: f64| {
                if hi - lo > 1e-15 {
                    pieces.push(Piece::Const { lo, hi, value: v });
                }
            };
            push(0.0, cut1, a1);
            push(cut1, cut2, a2);
            push(cut2, cut3, a3);
            push(cut3, 1.0, a4);
            return Ok(pieces);
        }
        self.fail("multicup", format!("no admissible separating line through {x:?}"))
    }

    /// Closed multicup: three fixed-boundary points, the hull ends plus one
    /// interior contact chosen on the arcs.
    fn closed_multicup(
        &self,
        arcs: &[(f64, f64)],
        hull: (f64, f64),
        x: (f64, f64),
    ) -> Result<Vec<Piece>, OptimizerError> {
        let (hl, hr) = hull;
        let a = (hl, hl * hl);
        let c = (hr, hr * hr);
        let score = |t: f64| -> f64 {
            match barycentric(x, a, (t, t * t), c) {
                Some((w0, w1, w2)) => w0.min(w1).min(w2),
                None => f64::NEG_INFINITY,
            }
        };
        let mut best = (f64::NEG_INFINITY, hl);
        for &(lo, hi) in arcs {
            let (lo, hi) = (lo.max(hl), hi.min(hr));
            if hi < lo {
                continue;
            }
            let n = 128;
            for i in 0..=n {
                let t = lo + (hi - lo) * i as f64 / n as f64;
                let s = score(t);
                if s > best.0 {
                    best = (s, t);
                }
            }
        }
        if best.0 < -1e-9 {
            return self.fail(
                "closed_multicup",
                format!("no three-point decomposition for {x:?}"),
            );
        }
        let t = best.1;
        let (w0, w1, w2) = clamp_weights(barycentric(x, a, (t, t * t), c).unwrap(), 1e-7)
            .ok_or_else(|| OptimizerError::SynthesisFailure {
                figure: "closed_multicup".into(),
                detail: format!("weights degenerate at t = {t}"),
            })?;
        let mut pieces = Vec::new();
        let mut at = 0.0;
        for (w, v) in [(w0, hl), (w1, t), (w2, hr)] {
            if w > 0.0 {
                pieces.push(Piece::Const { lo: at, hi: at + w, value: v });
                at += w;
            }
        }
        Ok(pieces)
    }

    /// Synthesize a test function for the point `(x1, x2)`.
    pub fn optimizer_at(&self, x1: f64, x2: f64) -> Result<Optimizer, OptimizerError> {
        let eps = self.eps();
        let tol = 1e-12 * (1.0 + x1 * x1);
        if x2 <= x1 * x1 + tol {
            return Ok(Optimizer::constant(x1));
        }
        let idx = self
            .solved
            .locate(self.bf, x1, x2)
            .ok_or(OptimizerError::NotCovered { x1, x2 })?;
        let (pieces, prov) = match &self.solved.elements[idx] {
            Element::Band { slope, u_lo, u_hi } => match slope.side {
                Side::Right => {
                    let u = tangent_u_right(x1, x2, eps).clamp(*u_lo, *u_hi);
                    let src = self.right_band_source(*u_lo)?;
                    let lambda = ((u - x1) / eps).clamp(0.0, 1.0);
                    let psi = self.chain_right(src, u)?;
                    let mut pieces = rescale_into(&psi, 0.0, lambda);
                    if lambda < 1.0 {
                        pieces.push(Piece::Const { lo: lambda, hi: 1.0, value: u });
                    }
                    (pieces, format!("band_right(u={u})"))
                }
                Side::Left => {
                    let u = tangent_u_left(x1, x2, eps).clamp(*u_lo, *u_hi);
                    let src = self.left_band_source(*u_hi)?;
                    let lambda = ((x1 - u) / eps).clamp(0.0, 1.0);
                    let psi = self.chain_left(src, u)?;
                    let mut pieces = rescale_into(&psi, 0.0, lambda);
                    if lambda < 1.0 {
                        pieces.push(Piece::Const { lo: lambda, hi: 1.0, value: u });
                    }
                    (pieces, format!("band_left(u={u})"))
                }
            },
            Element::Chordal { dom, .. } => {
                let (a, b) = match dom.locate(self.bf, x1, x2) {
                    Some((_, a, b)) => (a, b),
                    None => dom.chord_at(self.bf, dom.min_l()).map_err(|e| {
                        OptimizerError::SynthesisFailure {
                            figure: "chordal".into(),
                            detail: e.to_string(),
                        }
                    })?,
                };
                if b - a < 1e-12 {
                    (vec![Piece::Const { lo: 0.0, hi: 1.0, value: x1 }], "chordal(point)".into())
                } else {
                    let t = ((x1 - a) / (b - a)).clamp(0.0, 1.0);
                    let mut pieces = Vec::new();
                    if t > 0.0 {
                        pieces.push(Piece::Const { lo: 0.0, hi: t, value: b });
                    }
                    if t < 1.0 {
                        pieces.push(Piece::Const { lo: t, hi: 1.0, value: a });
                    }
                    (pieces, format!("chordal([{a}, {b}])"))
                }
            }
            Element::Linear { node, region, .. } => match region {
                LinRegion::Angle { w } => (self.angle(*node, *w, (x1, x2))?, format!("angle({w})")),
                LinRegion::CrownR { a0, b0 } => (
                    self.trolleybus_r(*node, *a0, *b0, (x1, x2))?,
                    format!("trolleybus_r([{a0}, {b0}])"),
                ),
                LinRegion::CrownL { a0, b0 } => (
                    self.trolleybus_l(*node, *a0, *b0, (x1, x2))?,
                    format!("trolleybus_l([{a0}, {b0}])"),
                ),
                LinRegion::CrownBoth { a0, b0 } => {
                    (self.birdie(*node, *a0, *b0, (x1, x2))?, format!("birdie([{a0}, {b0}])"))
                }
                LinRegion::MulticupTop { .. } => {
                    let arcs = match &self.solved.nodes[*node] {
                        SolvedNode::Multicup { arcs, .. } => arcs.clone(),
                        _ => {
                            return self.fail("multicup", format!("node {node} is not a multicup"))
                        }
                    };
                    (self.multicup(&arcs, (x1, x2))?, "multicup".into())
                }
                LinRegion::UnderHull { hull, .. } => {
                    let arcs = match &self.solved.nodes[*node] {
                        SolvedNode::Chordal { under: Some(u), .. } => u.arcs.clone(),
                        _ => {
                            return self
                                .fail("closed_multicup", format!("node {node} has no hull data"))
                        }
                    };
                    (self.closed_multicup(&arcs, *hull, (x1, x2))?, "closed_multicup".into())
                }
            },
        };
        Ok(Optimizer { pieces, provenance: vec![prov] })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{BoundaryFunction, PieceSpec};
    use crate::evolution::evolve;
    use crate::foliation::{simple_picture, solve};
    use crate::numerics::quad_adaptive;
    use crate::term::Term;
    use rand::Rng;
    use rand::SeedableRng;

    fn single(terms: Vec<Term>, eps_inf: f64) -> BoundaryFunction {
        BoundaryFunction::new(
            vec![PieceSpec { lo: f64::NEG_INFINITY, hi: f64::INFINITY, terms }],
            eps_inf,
            None,
        )
        .unwrap()
    }

    fn exp_bf() -> BoundaryFunction {
        single(vec![Term::Exp { a: 1.0, b: 1.0 }], 0.99)
    }

    #[test]
    fn log_piece_moments_match_quadrature() {
        for piece in [
            Piece::Log { lo: 0.2, hi: 0.9, sign: 1.0, scale: 0.5, tau0: 0.1, offset: 1.3 },
            Piece::Log { lo: 0.2, hi: 0.9, sign: -1.0, scale: 0.5, tau0: 0.95, offset: -0.4 },
            Piece::Log { lo: 0.0, hi: 1.0, sign: 1.0, scale: 0.3, tau0: 0.0, offset: 0.0 },
        ] {
            let (p, q) = (piece.lo() + 0.01, piece.hi() - 0.01);
            let (m0, m1, m2) = piece.moments(p, q);
            let n1 = quad_adaptive(&|t| piece.eval(t), p, q, 1e-12);
            let n2 = quad_adaptive(&|t| piece.eval(t).powi(2), p, q, 1e-12);
            assert!((m0 - (q - p)).abs() < 1e-12);
            assert!((m1 - n1).abs() < 1e-9, "m1 {m1} vs {n1} for {piece:?}");
            assert!((m2 - n2).abs() < 1e-9, "m2 {m2} vs {n2} for {piece:?}");
        }
    }

    #[test]
    fn log_piece_f_integral_matches_quadrature() {
        let bf = exp_bf();
        for piece in [
            Piece::Log { lo: 0.2, hi: 0.9, sign: 1.0, scale: 0.5, tau0: 0.1, offset: 0.3 },
            Piece::Log { lo: 0.2, hi: 0.9, sign: -1.0, scale: 0.5, tau0: 0.95, offset: -0.4 },
        ] {
            let v = piece.f_integral(&bf, piece.lo(), piece.hi()).unwrap();
            let n = quad_adaptive(&|t| bf.f(piece.eval(t)), piece.lo(), piece.hi(), 1e-12);
            assert!((v - n).abs() < 1e-8, "{v} vs {n} for {piece:?}");
        }
    }

    #[test]
    fn bmo_norm_examples() {
        // two-valued step ±h has norm h
        let h = 0.7;
        let step = Optimizer {
            pieces: vec![
                Piece::Const { lo: 0.0, hi: 0.5, value: -h },
                Piece::Const { lo: 0.5, hi: 1.0, value: h },
            ],
            provenance: vec![],
        };
        assert!((step.bmo_norm() - h).abs() < 1e-9);

        // ε·log τ has norm exactly ε
        let eps = 0.4;
        let log = Optimizer {
            pieces: vec![Piece::Log { lo: 0.0, hi: 1.0, sign: 1.0, scale: eps, tau0: 0.0, offset: 0.0 }],
            provenance: vec![],
        };
        assert!((log.bmo_norm_sq() - eps * eps).abs() < 1e-9);

        assert!(Optimizer::constant(3.0).bmo_norm() < 1e-9);
    }

    #[test]
    fn exponential_band_optimizers_verify() {
        let bf = exp_bf();
        let eps = 0.5;
        let s = solve(&bf, &simple_picture(&bf, eps), eps).unwrap();
        let syn = Synthesizer::new(&bf, &s);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            let x1: f64 = rng.gen_range(-2.0..1.5);
            let x2 = x1 * x1 + rng.gen_range(0.0..1.0) * eps * eps;
            let phi = syn.optimizer_at(x1, x2).unwrap();
            let bval = s.eval(&bf, x1, x2).unwrap().value;
            let rep = verify_optimizer(&bf, &phi, x1, x2, bval, eps).unwrap();
            assert!(
                rep.pass,
                "x=({x1},{x2}): {rep:?} prov {:?}",
                phi.provenance
            );
        }
    }

    #[test]
    fn upper_parabola_exponential_is_pure_log() {
        let bf = exp_bf();
        let eps = 0.5;
        let s = solve(&bf, &simple_picture(&bf, eps), eps).unwrap();
        let syn = Synthesizer::new(&bf, &s);
        let x1 = 0.3;
        let x2 = x1 * x1 + eps * eps;
        let phi = syn.optimizer_at(x1, x2).unwrap();
        assert_eq!(phi.pieces.len(), 1);
        assert!(matches!(phi.pieces[0], Piece::Log { .. }));
        // the running-average curve traces the free boundary
        let curve = delivery_curve(&bf, &phi, 20).unwrap();
        for c in &curve {
            assert!((c.g2 - (c.g1 * c.g1 + eps * eps)).abs() < 1e-9);
        }
    }

    fn verify_random_points(bf: &BoundaryFunction, eps: f64, n: usize, span: (f64, f64), seed: u64) {
        let s = solve(bf, &simple_picture(bf, eps), eps).unwrap();
        verify_random_points_solved(bf, &s, eps, n, span, seed);
    }

    fn verify_random_points_solved(
        bf: &BoundaryFunction,
        s: &Solved,
        eps: f64,
        n: usize,
        span: (f64, f64),
        seed: u64,
    ) {
        let syn = Synthesizer::new(bf, s);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..n {
            let x1: f64 = rng.gen_range(span.0..span.1);
            let x2 = x1 * x1 + rng.gen_range(0.0..1.0) * eps * eps;
            let phi = syn.optimizer_at(x1, x2).unwrap();
            let bval = s.eval(bf, x1, x2).unwrap().value;
            let rep = verify_optimizer(bf, &phi, x1, x2, bval, eps).unwrap();
            assert!(
                rep.pass,
                "eps={eps} x=({x1},{x2}): {rep:?} prov {:?}",
                phi.provenance
            );
        }
    }

    #[test]
    fn quartic_cup_and_angle_optimizers_verify() {
        // vertex-shifted quartic with an angle at 0.3
        let bf = single(
            vec![Term::Poly(vec![
                0.3f64.powi(4) / 24.0,
                -0.3f64.powi(3) / 6.0,
                0.3 * 0.3 / 4.0,
                -0.3 / 6.0,
                1.0 / 24.0,
            ])],
            1e6,
        );
        verify_random_points(&bf, 0.7, 40, (-2.0, 2.5), 11);

        // concave quartic: a single cup
        let bf2 = single(vec![Term::Poly(vec![0.0, 0.0, 0.0, 0.0, -1.0 / 24.0])], 1e6);
        verify_random_points(&bf2, 0.6, 40, (-2.0, 2.0), 13);
    }

    #[test]
    fn quintic_trolleybus_optimizers_verify() {
        let bf = single(vec![Term::Poly(vec![0.0, 0.0, 0.0, 0.0, 5.0, 1.0])], 1e6);
        // between the two critical radii the picture is a left trolleybus
        let tr = evolve(&bf, 0.95).unwrap();
        let seg = tr
            .segments
            .iter()
            .find(|s| s.eps_lo <= 0.9 && s.eps_hi >= 0.9)
            .unwrap();
        let s = solve(&bf, &seg.picture, 0.9).unwrap();
        verify_random_points_solved(&bf, &s, 0.9, 40, (-4.0, 2.0), 17);
    }

    #[test]
    fn sextic_birdie_optimizers_verify() {
        let bf = single(
            vec![Term::Poly(vec![0.0, 0.0, 0.0, 0.0, -1.0 / 8.0, 0.0, 1.0 / 120.0])],
            1e6,
        );
        let tr = evolve(&bf, 0.69).unwrap();
        let seg = tr.segments.last().unwrap();
        let s = solve(&bf, &seg.picture, 0.69).unwrap();
        verify_random_points_solved(&bf, &s, 0.69, 30, (-3.0, 3.0), 19);
    }

    #[test]
    fn neg_sextic_multicup_optimizers_verify() {
        let bf = single(
            vec![Term::Poly(vec![0.0, 0.0, 0.0, 0.0, 1.0 / 8.0, 0.0, -1.0 / 120.0])],
            1e6,
        );
        // open multicup below the fill radius, closed above
        let tr = evolve(&bf, 3.0).unwrap();
        for eps in [2.0, 2.9] {
            let seg = tr
                .segments
                .iter()
                .find(|s| s.eps_lo <= eps && s.eps_hi >= eps)
                .unwrap();
            let s = solve(&bf, &seg.picture, eps).unwrap();
            verify_random_points_solved(&bf, &s, eps, 30, (-4.0, 4.0), 23);
        }
    }

    #[test]
    fn step_rearrangement_preserves_identities() {
        let bf = single(vec![Term::Poly(vec![0.0, 0.0, 0.0, 0.0, -1.0 / 24.0])], 1e6);
        let eps = 0.6;
        let s = solve(&bf, &simple_picture(&bf, eps), eps).unwrap();
        let syn = Synthesizer::new(&bf, &s);
        let phi = syn.optimizer_at(0.2, 0.2 * 0.2 + 0.5 * eps * eps).unwrap();
        assert!(phi.pieces.iter().all(|p| matches!(p, Piece::Const { .. })));
        // sort the constant pieces by value; identities and norm survive
        let mut vals: Vec<(f64, f64)> = phi
            .pieces
            .iter()
            .map(|p| match p {
                Piece::Const { lo, hi, value } => (*value, hi - lo),
                _ => unreachable!(),
            })
            .collect();
        vals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut at = 0.0;
        let sorted = Optimizer {
            pieces: vals
                .iter()
                .map(|&(v, w)| {
                    let p = Piece::Const { lo: at, hi: at + w, value: v };
                    at += w;
                    p
                })
                .collect(),
            provenance: vec![],
        };
        assert!((sorted.mean() - phi.mean()).abs() < 1e-12);
        assert!((sorted.mean_sq() - phi.mean_sq()).abs() < 1e-12);
        assert!(
            (sorted.f_average(&bf).unwrap() - phi.f_average(&bf).unwrap()).abs() < 1e-10
        );
        assert!(sorted.bmo_norm_sq() <= phi.bmo_norm_sq() + 1e-12);
    }

    #[test]
    fn truncated_log_fails_verification() {
        let bf = exp_bf();
        let eps = 0.5;
        let s = solve(&bf, &simple_picture(&bf, eps), eps).unwrap();
        let syn = Synthesizer::new(&bf, &s);
        let (x1, x2) = (0.1, 0.1 * 0.1 + eps * eps);
        let mut phi = syn.optimizer_at(x1, x2).unwrap();
        // deliberately clip the singular end of the log piece
        if let Some(Piece::Log { lo, .. }) = phi.pieces.first_mut() {
            *lo = 0.2;
        }
        phi.pieces.insert(0, Piece::Const { lo: 0.0, hi: 0.2, value: 0.0 });
        let bval = s.eval(&bf, x1, x2).unwrap().value;
        let rep = verify_optimizer(&bf, &phi, x1, x2, bval, eps).unwrap();
        assert!(!rep.pass);
    }
}
