//! Piecewise closed-form boundary functions with exact derivatives up to
//! order three, sign analysis of `f'''` (essential roots), regularity and
//! summability checking, and exponentially weighted integrals of the
//! derivatives.

use crate::numerics::brent_root;
use crate::term::Term;
use serde::{Deserialize, Serialize};

/// Errors produced by boundary-function construction and integration.
#[derive(Debug, Clone, thiserror::Error)]
pub enum BoundaryError {
    /// The computed sign pattern of `f'''` cannot be interleaved into an
    /// alternating root structure; the input violates the regularity
    /// assumptions.
    #[error("sign pattern of f''' does not alternate: {0}")]
    NonAlternatingSigns(String),
    /// A weighted integral diverges (summability radius exceeded).
    #[error("weighted integral over [{lo}, {hi}] diverges for sigma={sigma}")]
    Divergent { lo: f64, hi: f64, sigma: f64 },
    /// Affine normalization with a zero scaling factor.
    #[error("degenerate affine transform: {0}")]
    DegenerateTransform(String),
    /// Malformed piece layout / failed smoothness checks.
    #[error("invalid boundary function: {0}")]
    InvalidInput(String),
}

/// A single piece: the closed-form terms valid on `[lo, hi]` (extended reals).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PieceSpec {
    pub lo: f64,
    pub hi: f64,
    pub terms: Vec<Term>,
}

impl PieceSpec {
    fn eval_deriv(&self, order: usize, t: f64) -> f64 {
        self.terms.iter().map(|term| term.deriv_n(order).eval(t)).sum()
    }
}

/// Where a root of `f'''` lives: a point (`lo == hi`), a closed interval, or
/// a ray (`lo = -inf` or `hi = +inf`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootLoc {
    pub lo: f64,
    pub hi: f64,
}

impl RootLoc {
    pub fn point(x: f64) -> Self {
        RootLoc { lo: x, hi: x }
    }
    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }
    /// A representative finite abscissa inside the root.
    pub fn anchor(&self) -> f64 {
        if self.lo.is_finite() && self.hi.is_finite() {
            0.5 * (self.lo + self.hi)
        } else if self.lo.is_finite() {
            self.lo
        } else {
            self.hi
        }
    }
}

/// Kind of an essential root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RootKind {
    /// `f'''` changes `+ → −` (hosts cups / multicups).
    C,
    /// `f'''` changes `− → +` (attracts angles).
    V,
}

/// The alternating essential-root structure of `f'''`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RootStructure {
    pub c: Vec<RootLoc>,
    pub v: Vec<RootLoc>,
}

impl RootStructure {
    /// All roots merged in increasing order with their kinds.
    pub fn ordered(&self) -> Vec<(RootKind, RootLoc)> {
        let mut all: Vec<(RootKind, RootLoc)> = self
            .c
            .iter()
            .map(|&r| (RootKind::C, r))
            .chain(self.v.iter().map(|&r| (RootKind::V, r)))
            .collect();
        all.sort_by(|a, b| key(&a.1).partial_cmp(&key(&b.1)).unwrap());
        return all;

        fn key(r: &RootLoc) -> f64 {
            if r.lo.is_finite() {
                r.lo
            } else if r.hi.is_finite() {
                r.hi - 1e300
            } else {
                r.hi // ±inf
            }
        }
    }

    /// Finite roots only, ordered.
    pub fn ordered_finite(&self) -> Vec<(RootKind, RootLoc)> {
        self.ordered()
            .into_iter()
            .filter(|(_, r)| r.lo.is_finite() || r.hi.is_finite())
            .collect()
    }
}

/// A boundary function: pieces, summability radius, root structure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryFunction {
    pub pieces: Vec<PieceSpec>,
    pub eps_inf: f64,
    pub roots: RootStructure,
}

/// Result of `check_conditions`.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionsReport {
    pub n_roots: usize,
    pub weighted_variation: Option<f64>,
    pub regularity_ok: bool,
    pub summability_ok: bool,
    pub decay_ok: bool,
    pub messages: Vec<String>,
}

impl ConditionsReport {
    pub fn pass(&self) -> bool {
        self.regularity_ok && self.summability_ok && self.decay_ok
    }
}

/// Record of an affine normalization, sufficient to map Bellman values of
/// the transformed function back to the original.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AffineTransform {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl AffineTransform {
    /// Map a point of the transformed problem to the point of the original
    /// problem at which the original Bellman function must be read.
    pub fn map_point(&self, x1: f64, x2: f64) -> (f64, f64) {
        (
            self.alpha * x1 + self.beta,
            self.alpha * self.alpha * x2 + 2.0 * self.alpha * self.beta * x1 + self.beta * self.beta,
        )
    }
    /// Radius of the original problem corresponding to radius `eps` of the
    /// transformed problem.
    pub fn map_eps(&self, eps: f64) -> f64 {
        self.alpha.abs() * eps
    }
    /// Combine the original Bellman value at the mapped point into the
    /// transformed Bellman value at `(x1, x2)`.
    pub fn combine_value(&self, x1: f64, x2: f64, original_value: f64) -> f64 {
        self.a * original_value + self.b * x2 + self.c * x1 + self.d
    }
}

impl BoundaryFunction {
    /// Build from pieces, validating the partition and global C² smoothness,
    /// then locate roots (or accept an override).
    pub fn new(
        pieces: Vec<PieceSpec>,
        eps_inf: f64,
        roots_override: Option<RootStructure>,
    ) -> Result<Self, BoundaryError> {
        if pieces.is_empty() {
            return Err(BoundaryError::InvalidInput("no pieces".into()));
        }
        if !(eps_inf > 0.0) {
            return Err(BoundaryError::InvalidInput("eps_inf must be positive".into()));
        }
        if pieces[0].lo != f64::NEG_INFINITY {
            return Err(BoundaryError::InvalidInput("first piece must start at -inf".into()));
        }
        if pieces.last().unwrap().hi != f64::INFINITY {
            return Err(BoundaryError::InvalidInput("last piece must end at +inf".into()));
        }
        for w in pieces.windows(2) {
            if w[0].hi != w[1].lo {
                return Err(BoundaryError::InvalidInput(format!(
                    "pieces do not partition the line at {} vs {}",
                    w[0].hi, w[1].lo
                )));
            }
            let t0 = w[0].hi;
            for order in 0..=2 {
                let left = w[0].eval_deriv(order, t0);
                let right = w[1].eval_deriv(order, t0);
                let scale = 1.0 + w[0].eval_deriv(0, t0).abs();
                if (left - right).abs() > 1e-12 * scale {
                    return Err(BoundaryError::InvalidInput(format!(
                        "derivative {order} jumps at t={t0}: {left} vs {right}"
                    )));
                }
            }
        }
        let mut bf = BoundaryFunction { pieces, eps_inf, roots: RootStructure::default() };
        bf.roots = match roots_override {
            Some(r) => r,
            None => bf.find_roots()?,
        };
        Ok(bf)
    }

    fn piece_index(&self, t: f64) -> usize {
        // pieces partition the line; pick the piece with lo <= t < hi,
        // the last piece being inclusive on the right
        let mut lo = 0usize;
        let mut hi = self.pieces.len() - 1;
        while lo < hi {
            let mid = (lo + hi) / 2;
            if t < self.pieces[mid].hi {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    }

    /// `(f, f', f'', f''')` at finite `t`; `f'''` is the one-sided density
    /// of the piece containing `t` (right-continuous at junctions).
    pub fn eval_derivs(&self, t: f64) -> (f64, f64, f64, f64) {
        let p = &self.pieces[self.piece_index(t)];
        (
            p.eval_deriv(0, t),
            p.eval_deriv(1, t),
            p.eval_deriv(2, t),
            p.eval_deriv(3, t),
        )
    }

    /// `f(t)`.
    pub fn f(&self, t: f64) -> f64 {
        self.pieces[self.piece_index(t)].eval_deriv(0, t)
    }
    /// `f'(t)`.
    pub fn f1(&self, t: f64) -> f64 {
        self.pieces[self.piece_index(t)].eval_deriv(1, t)
    }
    /// `f''(t)`.
    pub fn f2(&self, t: f64) -> f64 {
        self.pieces[self.piece_index(t)].eval_deriv(2, t)
    }
    /// `f'''(t)` (one-sided at junctions).
    pub fn f3(&self, t: f64) -> f64 {
        self.pieces[self.piece_index(t)].eval_deriv(3, t)
    }

    /// Average of `f'` over `[a, b]` — exactly `(f(b)-f(a))/(b-a)`.
    pub fn avg_f1(&self, a: f64, b: f64) -> f64 {
        (self.f(b) - self.f(a)) / (b - a)
    }
    /// Average of `f''` over `[a, b]`.
    pub fn avg_f2(&self, a: f64, b: f64) -> f64 {
        (self.f1(b) - self.f1(a)) / (b - a)
    }

    /// Asymptotic sign of `f'''` of `piece` toward `dir = ±1` infinity.
    fn asymptotic_sign(&self, piece: &PieceSpec, dir: f64) -> f64 {
        // dominant: exponentials with b·dir > 0 (largest b·dir wins), then
        // polynomial leading term, then decaying exponentials, then zero.
        let d3: Vec<Term> = piece.terms.iter().map(|t| t.deriv_n(3)).collect();
        let mut best_exp: Option<(f64, f64)> = None; // (b*dir, coefficient sum)
        for t in &d3 {
            if let Term::Exp { a, b } = t {
                if *a != 0.0 && b * dir > 0.0 {
                    match &mut best_exp {
                        Some((growth, coeff)) => {
                            if (b * dir - *growth).abs() < 1e-14 {
                                *coeff += a;
                            } else if b * dir > *growth {
                                best_exp = Some((b * dir, *a));
                            }
                        }
                        None => best_exp = Some((b * dir, *a)),
                    }
                }
            }
        }
        if let Some((_, coeff)) = best_exp {
            if coeff != 0.0 {
                return coeff.signum();
            }
        }
        let mut lead: Option<(usize, f64)> = None;
        for t in &d3 {
            if let Term::Poly(c) = t {
                if let Some(deg) = c.iter().rposition(|&x| x != 0.0) {
                    match &mut lead {
                        Some((d, s)) => {
                            if deg > *d {
                                lead = Some((deg, c[deg]));
                            } else if deg == *d {
                                *s += c[deg];
                            }
                        }
                        None => lead = Some((deg, c[deg])),
                    }
                }
            }
        }
        if let Some((deg, s)) = lead {
            if s != 0.0 {
                return s.signum() * if dir < 0.0 && deg % 2 == 1 { -1.0 } else { 1.0 };
            }
        }
        for t in &d3 {
            if let Term::Exp { a, b } = t {
                if *a != 0.0 && b * dir <= 0.0 {
                    return a.signum() * if *b == 0.0 { 1.0 } else { a.signum() * a.signum() };
                }
            }
        }
        0.0
    }

    /// Locate the essential roots of `f'''` by exact sign analysis per piece
    /// (sampling + bisection for the crossings).
    pub fn find_roots(&self) -> Result<RootStructure, BoundaryError> {
        // Each entry: (lo, hi, sign) with sign in {-1, 0, +1}; consecutive,
        // covering the real line.
        let mut segments: Vec<(f64, f64, f64)> = Vec::new();
        let finite_span: Vec<f64> = self
            .pieces
            .iter()
            .flat_map(|p| [p.lo, p.hi])
            .filter(|x| x.is_finite())
            .collect();
        let base = finite_span.iter().fold(1.0f64, |m, &x| m.max(x.abs()));
        let reach = 8.0 * (1.0 + base); // how far to scan into infinite pieces

        for piece in &self.pieces {
            let d3_zero = piece.terms.iter().all(|t| t.deriv_n(3).is_zero());
            if d3_zero {
                segments.push((piece.lo, piece.hi, 0.0));
                continue;
            }
            let scan_lo = if piece.lo.is_finite() {
                piece.lo
            } else if piece.hi.is_finite() {
                piece.hi - reach
            } else {
                -reach
            };
            let scan_hi = if piece.hi.is_finite() {
                piece.hi
            } else if piece.lo.is_finite() {
                piece.lo + reach
            } else {
                reach
            };
            let n = 4096usize;
            let g = |t: f64| piece.eval_deriv(3, t);
            // crossings inside the scan window
            let mut cuts: Vec<f64> = Vec::new();
            let mut prev_t = scan_lo;
            let mut prev_v = g(scan_lo);
            for i in 1..=n {
                let t = scan_lo + (scan_hi - scan_lo) * i as f64 / n as f64;
                let v = g(t);
                if v == 0.0 {
                    // hard zero on the grid: an exact crossing (tangencies are
                    // harmless — equal-sign neighbors get merged later)
                    cuts.push(t);
                } else if prev_v != 0.0 && prev_v.signum() != v.signum() {
                    let r = brent_root(g, prev_t, t, 1e-14 * (1.0 + t.abs()))
                        .map_err(|e| BoundaryError::InvalidInput(e.to_string()))?;
                    cuts.push(r);
                }
                prev_t = t;
                prev_v = v;
            }
            // build sign segments for this piece
            let mut bounds = vec![piece.lo];
            bounds.extend(cuts.iter().copied());
            bounds.push(piece.hi);
            for w in bounds.windows(2) {
                let (lo, hi) = (w[0], w[1]);
                let sign = if lo.is_finite() && hi.is_finite() {
                    g(0.5 * (lo + hi)).signum()
                } else if !lo.is_finite() {
                    let s = self.asymptotic_sign(piece, -1.0);
                    if s == 0.0 { g(hi.min(scan_lo + 1.0) - 1.0).signum() } else { s }
                } else {
                    let s = self.asymptotic_sign(piece, 1.0);
                    if s == 0.0 { g(lo.max(scan_hi - 1.0) + 1.0).signum() } else { s }
                };
                segments.push((lo, hi, sign));
            }
        }
        // merge equal-sign neighbors
        let mut merged: Vec<(f64, f64, f64)> = Vec::new();
        for seg in segments {
            if seg.0 == seg.1 {
                continue;
            }
            match merged.last_mut() {
                Some(last) if last.2 == seg.2 => last.1 = seg.1,
                _ => merged.push(seg),
            }
        }
        // degenerate: f''' identically zero
        if merged.len() == 1 && merged[0].2 == 0.0 {
            return Ok(RootStructure::default());
        }
        // classify roots
        let mut ordered: Vec<(RootKind, RootLoc)> = Vec::new();
        // leading sign convention at -inf
        let first_sign_idx = merged.iter().position(|s| s.2 != 0.0);
        let first_sign = first_sign_idx.map(|i| merged[i].2).unwrap_or(0.0);
        let last_sign_idx = merged.iter().rposition(|s| s.2 != 0.0);
        let last_sign = last_sign_idx.map(|i| merged[i].2).unwrap_or(0.0);

        // leading zero ray
        if let Some(i) = first_sign_idx {
            if i > 0 {
                // zero segments before the first signed one form a ray
                let hi = merged[i - 1].1;
                if merged[i].2 < 0.0 {
                    ordered.push((RootKind::C, RootLoc { lo: f64::NEG_INFINITY, hi }));
                } else {
                    ordered.push((RootKind::V, RootLoc { lo: f64::NEG_INFINITY, hi }));
                }
            } else if first_sign < 0.0 {
                ordered.push((RootKind::C, RootLoc::point(f64::NEG_INFINITY)));
            }
        }
        // interior crossings
        let signed: Vec<&(f64, f64, f64)> = merged.iter().filter(|s| s.2 != 0.0).collect();
        let zero_between = |a_hi: f64, b_lo: f64| -> Option<RootLoc> {
            if a_hi < b_lo {
                Some(RootLoc { lo: a_hi, hi: b_lo })
            } else {
                None
            }
        };
        for w in signed.windows(2) {
            let (a, b) = (w[0], w[1]);
            if a.2 == b.2 {
                continue; // separated by a zero patch but no sign change: not essential
            }
            let loc = zero_between(a.1, b.0).unwrap_or(RootLoc::point(a.1));
            let kind = if a.2 > 0.0 { RootKind::C } else { RootKind::V };
            ordered.push((kind, loc));
        }
        // trailing zero ray / +inf convention
        if let Some(i) = last_sign_idx {
            if i + 1 < merged.len() {
                let lo = merged[i + 1].0;
                if merged[i].2 > 0.0 {
                    ordered.push((RootKind::C, RootLoc { lo, hi: f64::INFINITY }));
                } else {
                    ordered.push((RootKind::V, RootLoc { lo, hi: f64::INFINITY }));
                }
            } else if last_sign > 0.0 {
                ordered.push((RootKind::C, RootLoc::point(f64::INFINITY)));
            }
        }
        // alternation check
        for w in ordered.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(BoundaryError::NonAlternatingSigns(format!(
                    "consecutive roots of the same kind near {:?} and {:?}",
                    w[0].1, w[1].1
                )));
            }
        }
        if let Some(first) = ordered.first() {
            if first.0 == RootKind::V && first.1.lo.is_finite() && first_sign > 0.0 {
                return Err(BoundaryError::NonAlternatingSigns(
                    "positive sign to the left of a v-root".into(),
                ));
            }
        }
        let mut rs = RootStructure::default();
        for (kind, loc) in ordered {
            match kind {
                RootKind::C => rs.c.push(loc),
                RootKind::V => rs.v.push(loc),
            }
        }
        Ok(rs)
    }

    /// `∫_p^q f^{(order)}(t) · e^{σ(t − u_ref)} dt`, exact per piece.
    ///
    /// `order` ranges over 0..=3. Infinite endpoints are allowed; divergence
    /// is detected from the closed-form limits.
    pub fn weighted_deriv_integral(
        &self,
        order: usize,
        sigma: f64,
        u_ref: f64,
        p: f64,
        q: f64,
    ) -> Result<f64, BoundaryError> {
        if p == q {
            return Ok(0.0);
        }
        if p > q {
            // oriented integral
            return self.weighted_deriv_integral(order, sigma, u_ref, q, p).map(|v| -v);
        }
        let mut total = 0.0;
        for piece in &self.pieces {
            let lo = piece.lo.max(p);
            let hi = piece.hi.min(q);
            if lo >= hi {
                continue;
            }
            for term in &piece.terms {
                let dt = term.deriv_n(order);
                if dt.is_zero() {
                    continue;
                }
                total += dt
                    .weighted_integral(sigma, u_ref, lo, hi)
                    .ok_or(BoundaryError::Divergent { lo, hi, sigma })?;
            }
        }
        Ok(total)
    }

    /// `∫_p^q e^{sign·t/eps} f'''(t) dt` (the Stieltjes integral against
    /// `df''`; `f'''` has no atoms by the enforced C² smoothness).
    pub fn weighted_stieltjes(
        &self,
        p: f64,
        q: f64,
        eps: f64,
        sign: f64,
    ) -> Result<f64, BoundaryError> {
        self.weighted_deriv_integral(3, sign / eps, 0.0, p, q)
    }

    /// Verify the regularity and summability conditions at radius `eps_inf`.
    pub fn check_conditions(&self, eps_inf: f64) -> ConditionsReport {
        let mut messages = Vec::new();
        let roots = self.roots.ordered();
        let regularity_ok = match self.find_roots() {
            Ok(_) => true,
            Err(e) => {
                messages.push(format!("root analysis failed: {e}"));
                false
            }
        };
        // weighted variation of df'': split the line at 0 and integrate
        // |f'''| piecewise by sign stretch
        let mut variation: Option<f64> = Some(0.0);
        let mut cut_points: Vec<f64> = vec![0.0];
        for (_, loc) in &roots {
            for x in [loc.lo, loc.hi] {
                if x.is_finite() {
                    cut_points.push(x);
                }
            }
        }
        for p in &self.pieces {
            for x in [p.lo, p.hi] {
                if x.is_finite() {
                    cut_points.push(x);
                }
            }
        }
        cut_points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cut_points.dedup();
        let mut stretch_bounds = vec![f64::NEG_INFINITY];
        stretch_bounds.extend(cut_points.iter().copied());
        stretch_bounds.push(f64::INFINITY);
        for w in stretch_bounds.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if lo >= hi {
                continue;
            }
            let mid = if lo.is_finite() && hi.is_finite() {
                0.5 * (lo + hi)
            } else if lo.is_finite() {
                lo + 1.0
            } else if hi.is_finite() {
                hi - 1.0
            } else {
                0.0
            };
            let sgn = self.f3(mid).signum();
            if sgn == 0.0 {
                continue;
            }
            // weight e^{-|t|/eps_inf}: sigma = -1/eps_inf for t>0, +1/eps_inf for t<0
            let sigma = if mid >= 0.0 { -1.0 / eps_inf } else { 1.0 / eps_inf };
            match self.weighted_deriv_integral(3, sigma, 0.0, lo, hi) {
                Ok(v) => {
                    if let Some(total) = &mut variation {
                        *total += sgn * v;
                    }
                }
                Err(_) => {
                    variation = None;
                }
            }
        }
        let summability_ok = variation.is_some();
        if !summability_ok {
            messages.push(format!("weighted variation diverges at eps_inf={eps_inf}"));
        }
        // decay of f^{(r)}(u) e^{-|u|/eps_inf}
        let big = 40.0 * eps_inf.max(1.0) + 40.0;
        let mut decay_ok = true;
        if summability_ok {
            for r in 0..=3usize {
                for side in [-1.0, 1.0] {
                    let sample = |u: f64| -> f64 {
                        let v = match r {
                            0 => self.f(u),
                            1 => self.f1(u),
                            2 => self.f2(u),
                            _ => self.f3(u),
                        };
                        v.abs() * (-u.abs() / eps_inf).exp()
                    };
                    let d1 = sample(side * big);
                    let d2 = sample(side * 2.0 * big);
                    // the damped tail must shrink (or already be negligible)
                    if !d1.is_finite() || !d2.is_finite() || d2 > 0.9999 * d1 + 1e-9 {
                        decay_ok = false;
                        messages.push(format!(
                            "f^({r})(u)e^(-|u|/eps_inf) does not decay on side {side}: {d1} then {d2}"
                        ));
                    }
                }
            }
        } else {
            decay_ok = false;
        }
        ConditionsReport {
            n_roots: roots.len(),
            weighted_variation: variation,
            regularity_ok,
            summability_ok,
            decay_ok,
            messages,
        }
    }

    /// Build `a·f(αt+β) + b·t² + c·t + d` together with the transform record.
    pub fn affine_normalize(
        &self,
        a: f64,
        b: f64,
        c: f64,
        d: f64,
        alpha: f64,
        beta: f64,
    ) -> Result<(BoundaryFunction, AffineTransform), BoundaryError> {
        if a == 0.0 {
            return Err(BoundaryError::DegenerateTransform("a = 0".into()));
        }
        if alpha == 0.0 {
            return Err(BoundaryError::DegenerateTransform("alpha = 0".into()));
        }
        let mut pieces: Vec<PieceSpec> = self
            .pieces
            .iter()
            .map(|p| {
                let (lo, hi) = {
                    let e0 = (p.lo - beta) / alpha;
                    let e1 = (p.hi - beta) / alpha;
                    (e0.min(e1), e0.max(e1))
                };
                let mut terms: Vec<Term> = p
                    .terms
                    .iter()
                    .map(|t| t.substitute_affine(alpha, beta).scale(a))
                    .collect();
                terms.push(Term::Poly(vec![d, c, b]));
                PieceSpec { lo, hi, terms }
            })
            .collect();
        if alpha < 0.0 {
            pieces.reverse();
        }
        let bf = BoundaryFunction::new(pieces, self.eps_inf / alpha.abs(), None)?;
        Ok((bf, AffineTransform { a, b, c, d, alpha, beta }))
    }
}

// ---------------------------------------------------------------------------
// JSON configuration format
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
enum ExtReal {
    Num(f64),
    Word(String),
}

impl ExtReal {
    fn value(&self) -> Result<f64, BoundaryError> {
        match self {
            ExtReal::Num(x) => Ok(*x),
            ExtReal::Word(w) => match w.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(BoundaryError::InvalidInput(format!("bad extended real: {other}"))),
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
struct ExpTermCfg {
    a: f64,
    b: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
struct TrigTermCfg {
    a: f64,
    b: f64,
    c: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
struct PieceCfg {
    lo: ExtReal,
    hi: ExtReal,
    #[serde(default)]
    poly: Vec<f64>,
    #[serde(default)]
    exp: Vec<ExpTermCfg>,
    #[serde(default)]
    trig: Vec<TrigTermCfg>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
struct RootCfg {
    kind: String,
    lo: ExtReal,
    hi: ExtReal,
}

/// On-disk boundary-function document.
#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct BoundaryConfig {
    pieces: Vec<PieceCfg>,
    pub eps_inf: f64,
    #[serde(default)]
    roots_override: Option<Vec<RootCfg>>,
}

impl BoundaryConfig {
    /// Parse a JSON document.
    pub fn from_json(text: &str) -> Result<Self, BoundaryError> {
        serde_json::from_str(text).map_err(|e| BoundaryError::InvalidInput(e.to_string()))
    }

    /// Construct the validated boundary function.
    pub fn build(&self) -> Result<BoundaryFunction, BoundaryError> {
        let mut pieces = Vec::new();
        for p in &self.pieces {
            let mut terms = Vec::new();
            if !p.poly.is_empty() {
                terms.push(Term::Poly(p.poly.clone()));
            }
            for e in &p.exp {
                terms.push(Term::Exp { a: e.a, b: e.b });
            }
            for t in &p.trig {
                terms.push(Term::Trig { a: t.a, b: t.b, c: t.c });
            }
            if terms.is_empty() {
                terms.push(Term::Poly(vec![]));
            }
            pieces.push(PieceSpec { lo: p.lo.value()?, hi: p.hi.value()?, terms });
        }
        let roots = match &self.roots_override {
            Some(list) => {
                let mut rs = RootStructure::default();
                for r in list {
                    let loc = RootLoc { lo: r.lo.value()?, hi: r.hi.value()? };
                    match r.kind.as_str() {
                        "c" => rs.c.push(loc),
                        "v" => rs.v.push(loc),
                        k => {
                            return Err(BoundaryError::InvalidInput(format!("bad root kind {k}")))
                        }
                    }
                }
                Some(rs)
            }
            None => None,
        };
        BoundaryFunction::new(pieces, self.eps_inf, roots)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(terms: Vec<Term>, eps_inf: f64) -> BoundaryFunction {
        BoundaryFunction::new(
            vec![PieceSpec { lo: f64::NEG_INFINITY, hi: f64::INFINITY, terms }],
            eps_inf,
            None,
        )
        .unwrap()
    }

    pub(crate) fn bf_exp() -> BoundaryFunction {
        single(vec![Term::Exp { a: 1.0, b: 1.0 }], 0.99)
    }

    pub(crate) fn bf_sextic_pos() -> BoundaryFunction {
        // f''' = t^3 - 3t  →  f = t^6/120 - t^4/8
        single(vec![Term::Poly(vec![0.0, 0.0, 0.0, 0.0, -0.125, 0.0, 1.0 / 120.0])], 1e6)
    }

    pub(crate) fn bf_solid_cubic() -> BoundaryFunction {
        BoundaryFunction::new(
            vec![
                PieceSpec {
                    lo: f64::NEG_INFINITY,
                    hi: -1.0,
                    terms: vec![Term::Poly(vec![1.0, 3.0, 3.0, 1.0])],
                },
                PieceSpec { lo: -1.0, hi: 1.0, terms: vec![Term::Poly(vec![])] },
                PieceSpec {
                    lo: 1.0,
                    hi: f64::INFINITY,
                    terms: vec![Term::Poly(vec![1.0, -3.0, 3.0, -1.0])],
                },
            ],
            1e6,
            None,
        )
        .unwrap()
    }

    #[test]
    fn exp_identity_at_zero() {
        let bf = bf_exp();
        let (f, f1, f2, f3) = bf.eval_derivs(0.0);
        for v in [f, f1, f2, f3] {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sextic_third_derivative() {
        let bf = bf_sextic_pos();
        let (_, _, _, f3) = bf.eval_derivs(2.0);
        assert!((f3 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn solid_cubic_flat_inside() {
        let bf = bf_solid_cubic();
        let (f, f1, f2, f3) = bf.eval_derivs(0.5);
        assert_eq!((f, f1, f2, f3), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn sextic_roots() {
        let bf = bf_sextic_pos();
        let r = &bf.roots;
        // c: -inf point, 0, +inf point; v: ±sqrt3
        assert_eq!(r.c.len(), 3);
        assert_eq!(r.v.len(), 2);
        assert!(r.c[0].lo == f64::NEG_INFINITY);
        assert!((r.c[1].lo - 0.0).abs() < 1e-10);
        assert!(r.c[2].hi == f64::INFINITY);
        assert!((r.v[0].lo + 3f64.sqrt()).abs() < 1e-10);
        assert!((r.v[1].lo - 3f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn exp_roots_only_infinite_c() {
        let bf = bf_exp();
        assert_eq!(bf.roots.c.len(), 1);
        assert!(bf.roots.c[0].lo == f64::INFINITY);
        assert!(bf.roots.v.is_empty());
    }

    #[test]
    fn solid_cubic_interval_root() {
        let bf = bf_solid_cubic();
        assert_eq!(bf.roots.c.len(), 1);
        assert_eq!(bf.roots.v.len(), 0);
        let loc = bf.roots.c[0];
        assert!((loc.lo + 1.0).abs() < 1e-12 && (loc.hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conditions_exp() {
        let bf = bf_exp();
        assert!(bf.check_conditions(0.99).pass());
        assert!(!bf.check_conditions(1.5).pass());
    }

    #[test]
    fn conditions_polynomial_any_radius() {
        let bf = bf_sextic_pos();
        assert!(bf.check_conditions(5.0).pass());
    }

    #[test]
    fn weighted_integral_exp_closed_form() {
        // ∫_u^∞ e^{-t/ε} e^t dt · 1 = ε e^{u(1-1/ε)}/(1-ε)
        let bf = bf_exp();
        let (eps, u) = (0.5, -0.3);
        let got = bf.weighted_stieltjes(u, f64::INFINITY, eps, -1.0).unwrap();
        let want = eps * (u * (1.0 - 1.0 / eps)).exp() / (1.0 - eps);
        assert!((got - want).abs() < 1e-12 * (1.0 + want.abs()));
    }

    #[test]
    fn weighted_integral_additive() {
        let bf = bf_sextic_pos();
        let (eps, p, q, r) = (0.4, -1.0, 0.7, 2.3);
        let a = bf.weighted_stieltjes(p, q, eps, 1.0).unwrap();
        let b = bf.weighted_stieltjes(q, r, eps, 1.0).unwrap();
        let c = bf.weighted_stieltjes(p, r, eps, 1.0).unwrap();
        assert!((a + b - c).abs() <= 1e-11 * (1.0 + c.abs()));
    }

    #[test]
    fn sextic_left_infinity_force_closed_form() {
        // e^{u/ε}∫_u^∞ e^{-t/ε}(t³-3t+c)dt = ε[(u³-3u+c)+3ε(u²-1)+6ε²u+6ε³]
        let bf = bf_sextic_pos(); // c = 0
        for &(u, eps) in &[(0.0, 0.5), (1.3, 0.25), (-2.0, 0.8)] {
            let got = bf.weighted_deriv_integral(3, -1.0 / eps, u, u, f64::INFINITY).unwrap();
            let want = eps
                * ((u.powi(3) - 3.0 * u)
                    + 3.0 * eps * (u * u - 1.0)
                    + 6.0 * eps * eps * u
                    + 6.0 * eps.powi(3));
            assert!((got - want).abs() < 1e-10 * (1.0 + want.abs()), "{got} vs {want}");
        }
    }

    #[test]
    fn affine_roundtrip_structure() {
        let bf = bf_sextic_pos();
        let (tbf, tr) = bf.affine_normalize(2.0, 0.5, -1.0, 3.0, -1.5, 0.25).unwrap();
        // pointwise identity of the boundary values
        for &t in &[-2.0, -0.3, 0.0, 1.7] {
            let want = 2.0 * bf.f(tr.alpha * t + tr.beta) + 0.5 * t * t - t + 3.0;
            assert!((tbf.f(t) - want).abs() < 1e-10 * (1.0 + want.abs()));
        }
        // identity transform changes nothing
        let (ibf, _) = bf.affine_normalize(1.0, 0.0, 0.0, 0.0, 1.0, 0.0).unwrap();
        for &t in &[-1.0, 0.0, 2.0] {
            assert_eq!(ibf.f(t), bf.f(t));
        }
    }

    #[test]
    fn degenerate_transform_rejected() {
        let bf = bf_exp();
        assert!(matches!(
            bf.affine_normalize(0.0, 0.0, 0.0, 0.0, 1.0, 0.0),
            Err(BoundaryError::DegenerateTransform(_))
        ));
        assert!(matches!(
            bf.affine_normalize(1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
            Err(BoundaryError::DegenerateTransform(_))
        ));
    }

    #[test]
    fn json_config_parses() {
        let doc = r#"{
            "pieces": [
                {"lo": "-inf", "hi": 0.0, "poly": [0.0, 0.0, 0.0, -0.16666666666666666]},
                {"lo": 0.0, "hi": "inf", "poly": [1.0, -1.0, 0.5], "exp": [{"a": -1.0, "b": -1.0}]}
            ],
            "eps_inf": 10.0
        }"#;
        let cfg = BoundaryConfig::from_json(doc).unwrap();
        let bf = cfg.build().unwrap();
        // escaping-angle example: C² at 0, f''' = -1 then e^{-t}
        assert!(bf.f(0.0).abs() < 1e-14);
        assert!((bf.f3(-1.0) + 1.0).abs() < 1e-14);
        assert!((bf.f3(1.0) - (-1.0f64).exp()).abs() < 1e-14);
        assert_eq!(bf.roots.v.len(), 1);
        assert!(bf.roots.v[0].lo.abs() < 1e-9);
    }

    #[test]
    fn c2_violation_rejected() {
        let r = BoundaryFunction::new(
            vec![
                PieceSpec {
                    lo: f64::NEG_INFINITY,
                    hi: 0.0,
                    terms: vec![Term::Poly(vec![0.0, 1.0])],
                },
                PieceSpec {
                    lo: 0.0,
                    hi: f64::INFINITY,
                    terms: vec![Term::Poly(vec![0.0, 2.0])],
                },
            ],
            1.0,
            None,
        );
        assert!(matches!(r, Err(BoundaryError::InvalidInput(_))));
    }
}
