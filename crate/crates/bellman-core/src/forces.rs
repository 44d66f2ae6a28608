//! Force functions: the exponentially weighted functionals of `f'''` that
//! govern where tangent bands stay admissible, where angles sit, and how
//! composite figures are balanced.
//!
//! A right force propagates rightward from its origin (a chord endpoint or
//! `-∞`), a left force leftward. On a tangent band with slope function `m`
//! the force equals `ε·m''`.

use crate::boundary::{BoundaryError, BoundaryFunction};
use crate::chords::differentials;
use crate::numerics::{brent_root, scan_first_sign_change};
use serde::{Deserialize, Serialize};

/// Errors from force evaluation and root isolation.
#[derive(Debug, Clone, thiserror::Error)]
pub enum ForceError {
    #[error("boundary integral failed: {0}")]
    Boundary(#[from] BoundaryError),
    #[error("no balance root in [{lo}, {hi}]: S(lo)={slo}, S(hi)={shi}")]
    NoBalanceRoot { lo: f64, hi: f64, slo: f64, shi: f64 },
    #[error("force evaluated on the wrong side of its origin: u={u}, origin={origin}")]
    WrongSide { u: f64, origin: f64 },
}

/// Propagation direction of a force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Right,
    Left,
}

/// Where a force originates.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum ForceSource {
    /// From `-∞` (right force) or `+∞` (left force): pure integral term.
    Infinity,
    /// From the endpoint of the chord `[a0, b0]` of a chordal domain or a
    /// multicup hull; the differential term is computed from the chord.
    Chord { a0: f64, b0: f64 },
    /// Explicit differential coefficient `d` emitted at `origin` (used for
    /// hulls with ray arcs, where the averaged second derivative is the
    /// constant value of `f''` on the ray).
    Seeded { origin: f64, d: f64 },
}

impl ForceSource {
    /// The finite abscissa the force is emitted from, if any.
    pub fn origin(&self, side: Side) -> Option<f64> {
        match self {
            ForceSource::Infinity => None,
            ForceSource::Chord { a0, b0 } => Some(match side {
                Side::Right => *b0,
                Side::Left => *a0,
            }),
            ForceSource::Seeded { origin, .. } => Some(*origin),
        }
    }

    fn d_term(&self, bf: &BoundaryFunction, side: Side) -> f64 {
        match self {
            ForceSource::Infinity => 0.0,
            ForceSource::Chord { a0, b0 } => {
                let (dl, dr) = differentials(bf, *a0, *b0);
                match side {
                    Side::Right => dr,
                    Side::Left => -dl,
                }
            }
            ForceSource::Seeded { d, .. } => *d,
        }
    }
}

/// A force: side, source, radius.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Force {
    pub side: Side,
    pub source: ForceSource,
    pub eps: f64,
}

impl Force {
    pub fn right(source: ForceSource, eps: f64) -> Self {
        Force { side: Side::Right, source, eps }
    }
    pub fn left(source: ForceSource, eps: f64) -> Self {
        Force { side: Side::Left, source, eps }
    }

    /// Evaluate the force at `u`.
    ///
    /// Right force from origin `b0`:
    /// `D·e^{(b0-u)/ε} + ∫_{b0}^{u} e^{(t-u)/ε} f'''(t) dt`, `u ≥ b0`.
    /// Left force from origin `a0`:
    /// `D·e^{(u-a0)/ε} + ∫_{u}^{a0} e^{(u-t)/ε} f'''(t) dt`, `u ≤ a0`,
    /// where the emitted differential coefficient `D` is `D_R` on the right
    /// and `-D_L` on the left.
    pub fn eval(&self, bf: &BoundaryFunction, u: f64) -> Result<f64, ForceError> {
        let eps = self.eps;
        let d = self.source.d_term(bf, self.side);
        match self.side {
            Side::Right => {
                let b0 = self.source.origin(self.side).unwrap_or(f64::NEG_INFINITY);
                if u < b0 - 1e-12 * (1.0 + b0.abs()) {
                    return Err(ForceError::WrongSide { u, origin: b0 });
                }
                let exp_term =
                    if b0.is_finite() { d * ((b0 - u) / eps).exp() } else { 0.0 };
                let integral = bf.weighted_deriv_integral(3, 1.0 / eps, u, b0.max(f64::NEG_INFINITY), u)?;
                Ok(exp_term + integral)
            }
            Side::Left => {
                let a0 = self.source.origin(self.side).unwrap_or(f64::INFINITY);
                if u > a0 + 1e-12 * (1.0 + a0.abs()) {
                    return Err(ForceError::WrongSide { u, origin: a0 });
                }
                let exp_term =
                    if a0.is_finite() { d * ((u - a0) / eps).exp() } else { 0.0 };
                let integral = bf.weighted_deriv_integral(3, -1.0 / eps, u, u, a0)?;
                Ok(exp_term + integral)
            }
        }
    }
}

/// Uniform scan spacing near the roots: `min(ε, smallest root gap)/16`.
pub fn scan_spacing(bf: &BoundaryFunction, eps: f64) -> f64 {
    let mut gap = f64::INFINITY;
    let roots = bf.roots.ordered_finite();
    let mut anchors: Vec<f64> = Vec::new();
    for (_, loc) in &roots {
        if loc.lo.is_finite() {
            anchors.push(loc.lo);
        }
        if loc.hi.is_finite() {
            anchors.push(loc.hi);
        }
    }
    anchors.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for w in anchors.windows(2) {
        if w[1] - w[0] > 1e-12 {
            gap = gap.min(w[1] - w[0]);
        }
    }
    (eps.min(gap) / 16.0).max(1e-6)
}

/// Right tail endpoint: the supremum `t` such that the right force stays
/// negative on `(from, t)`. Returns `+∞` when the force never turns
/// non-negative, and `from` itself when it is non-negative immediately.
pub fn tail_right(bf: &BoundaryFunction, force: &Force, from: f64) -> Result<f64, ForceError> {
    debug_assert_eq!(force.side, Side::Right);
    let h = scan_spacing(bf, force.eps);
    let v0 = force.eval(bf, from + 1e-12 * (1.0 + from.abs()))?;
    if v0 >= 0.0 {
        return Ok(from);
    }
    let far = scan_limit(bf, force.eps);
    let mut u = from;
    while u < far {
        let nu = u + h;
        let v = force.eval(bf, nu)?;
        if v >= 0.0 {
            if v == 0.0 {
                return Ok(nu);
            }
            let r = brent_root(|x| force.eval(bf, x).unwrap_or(f64::NAN), u, nu, 1e-12)
                .unwrap_or(nu);
            return Ok(r);
        }
        u = nu;
    }
    Ok(f64::INFINITY)
}

/// Left tail endpoint: the infimum `t` such that the left force stays
/// positive on `(t, from)`. Returns `-∞` when it never turns non-positive.
pub fn tail_left(bf: &BoundaryFunction, force: &Force, from: f64) -> Result<f64, ForceError> {
    debug_assert_eq!(force.side, Side::Left);
    let h = scan_spacing(bf, force.eps);
    let v0 = force.eval(bf, from - 1e-12 * (1.0 + from.abs()))?;
    if v0 <= 0.0 {
        return Ok(from);
    }
    let far = -scan_limit(bf, force.eps);
    let mut u = from;
    while u > far {
        let nu = u - h;
        let v = force.eval(bf, nu)?;
        if v <= 0.0 {
            if v == 0.0 {
                return Ok(nu);
            }
            let r = brent_root(|x| force.eval(bf, x).unwrap_or(f64::NAN), nu, u, 1e-12)
                .unwrap_or(nu);
            return Ok(r);
        }
        u = nu;
    }
    Ok(f64::NEG_INFINITY)
}

/// How far out a scan may go before the asymptotic sign of the force is
/// settled by the decaying memory of its origin.
fn scan_limit(bf: &BoundaryFunction, eps: f64) -> f64 {
    let mut extent = 1.0f64;
    for (_, loc) in bf.roots.ordered_finite() {
        for x in [loc.lo, loc.hi] {
            if x.is_finite() {
                extent = extent.max(x.abs());
            }
        }
    }
    for p in &bf.pieces {
        for x in [p.lo, p.hi] {
            if x.is_finite() {
                extent = extent.max(x.abs());
            }
        }
    }
    extent + 200.0 * eps + 10.0
}

/// Root of the balance `F_R(u) + F_L(u) = 0` on `[lo, hi]`.
///
/// The sum is strictly increasing on the intersection of the tails, so the
/// root is unique when it exists.
pub fn balance_root(
    bf: &BoundaryFunction,
    right: &Force,
    left: &Force,
    lo: f64,
    hi: f64,
) -> Result<f64, ForceError> {
    debug_assert_eq!(right.side, Side::Right);
    debug_assert_eq!(left.side, Side::Left);
    let s = |u: f64| -> f64 {
        match (right.eval(bf, u), left.eval(bf, u)) {
            (Ok(r), Ok(l)) => r + l,
            _ => f64::NAN,
        }
    };
    let slo = s(lo);
    let shi = s(hi);
    if slo == 0.0 {
        return Ok(lo);
    }
    if shi == 0.0 {
        return Ok(hi);
    }
    if slo.is_nan() || shi.is_nan() || slo.signum() == shi.signum() {
        // refine by scanning: the sum may dip through zero away from the ends
        if let Some((p, q)) = scan_first_sign_change(s, lo, hi, 512) {
            return brent_root(s, p, q, 1e-12 * (1.0 + hi.abs()))
                .map_err(|_| ForceError::NoBalanceRoot { lo, hi, slo, shi });
        }
        return Err(ForceError::NoBalanceRoot { lo, hi, slo, shi });
    }
    brent_root(s, lo, hi, 1e-12 * (1.0 + hi.abs()))
        .map_err(|_| ForceError::NoBalanceRoot { lo, hi, slo, shi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{BoundaryFunction, PieceSpec};
    use crate::term::Term;

    fn bf_quintic() -> BoundaryFunction {
        // f = t^5 + 5 t^4, f''' = 60t² + 120t
        BoundaryFunction::new(
            vec![PieceSpec {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
                terms: vec![Term::Poly(vec![0.0, 0.0, 0.0, 0.0, 5.0, 1.0])],
            }],
            1e6,
            None,
        )
        .unwrap()
    }

    fn bf_abs_cubed() -> BoundaryFunction {
        BoundaryFunction::new(
            vec![
                PieceSpec {
                    lo: f64::NEG_INFINITY,
                    hi: 0.0,
                    terms: vec![Term::Poly(vec![0.0, 0.0, 0.0, -1.0])],
                },
                PieceSpec {
                    lo: 0.0,
                    hi: f64::INFINITY,
                    terms: vec![Term::Poly(vec![0.0, 0.0, 0.0, 1.0])],
                },
            ],
            1e6,
            None,
        )
        .unwrap()
    }

    fn bf_escaping() -> BoundaryFunction {
        // f = -t³/6 for t < 0;  f = -e^{-t} + t²/2 - t + 1 for t ≥ 0
        BoundaryFunction::new(
            vec![
                PieceSpec {
                    lo: f64::NEG_INFINITY,
                    hi: 0.0,
                    terms: vec![Term::Poly(vec![0.0, 0.0, 0.0, -1.0 / 6.0])],
                },
                PieceSpec {
                    lo: 0.0,
                    hi: f64::INFINITY,
                    terms: vec![
                        Term::Poly(vec![1.0, -1.0, 0.5]),
                        Term::Exp { a: -1.0, b: -1.0 },
                    ],
                },
            ],
            20.0,
            None,
        )
        .unwrap()
    }

    #[test]
    fn quintic_left_infinity_force_closed_form() {
        // F_L(u; +∞; ε) = 60ε·[u² + (2ε+2)u + 2ε² + 2ε]
        let bf = bf_quintic();
        for &(u, eps) in &[(-2.0, 0.7), (0.0, 1.3), (-1.0, 0.2)] {
            let force = Force::left(ForceSource::Infinity, eps);
            let got = force.eval(&bf, u).unwrap();
            let want = 60.0 * eps * (u * u + (2.0 * eps + 2.0) * u + 2.0 * eps * eps + 2.0 * eps);
            assert!((got - want).abs() < 1e-9 * (1.0 + want.abs()), "{got} vs {want}");
        }
    }

    #[test]
    fn quintic_force_root_at_unit_radius() {
        // at u = -2 the closed form reduces to 120ε²(ε-1): negative below
        // radius 1, zero at 1, positive above
        let bf = bf_quintic();
        for (eps, sgn) in [(0.8, -1.0), (1.0, 0.0), (1.25, 1.0)] {
            let v = Force::left(ForceSource::Infinity, eps).eval(&bf, -2.0).unwrap();
            if sgn == 0.0 {
                assert!(v.abs() < 1e-8);
            } else {
                assert!(v.signum() == sgn, "eps={eps}: {v}");
            }
        }
    }

    #[test]
    fn abs_cubed_right_force_closed_form() {
        // F_R(u; -∞; ε) = 6ε(1 - 2e^{-u/ε}) for u ≥ 0
        let bf = bf_abs_cubed();
        let eps = 0.6;
        let force = Force::right(ForceSource::Infinity, eps);
        for &u in &[0.0, 0.3, 2.0] {
            let got = force.eval(&bf, u).unwrap();
            let want = 6.0 * eps * (1.0 - 2.0 * (-u / eps).exp());
            assert!((got - want).abs() < 1e-10 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn abs_cubed_balance_root_is_zero() {
        let bf = bf_abs_cubed();
        for &eps in &[0.3, 1.0, 2.5] {
            let right = Force::right(ForceSource::Infinity, eps);
            let left = Force::left(ForceSource::Infinity, eps);
            let w = balance_root(&bf, &right, &left, -3.0 * eps, 3.0 * eps).unwrap();
            assert!(w.abs() < 1e-10, "eps={eps}: w={w}");
        }
    }

    #[test]
    fn escaping_angle_balance_closed_form() {
        // w(ε) = ε/(1-ε)·ln((2-ε)(1+ε)/2) for ε ∈ (0, 2), ε ≠ 1
        let bf = bf_escaping();
        for &eps in &[0.5, 1.5] {
            let right = Force::right(ForceSource::Infinity, eps);
            let left = Force::left(ForceSource::Infinity, eps);
            let w = balance_root(&bf, &right, &left, 0.0, 30.0).unwrap();
            let want = eps / (1.0 - eps) * ((2.0 - eps) * (1.0 + eps) / 2.0).ln();
            assert!((w - want).abs() < 1e-9, "eps={eps}: {w} vs {want}");
        }
    }

    #[test]
    fn escaping_angle_no_balance_beyond_two() {
        // for ε > 2 the right force is negative everywhere: the angle escapes
        let bf = bf_escaping();
        let eps = 2.5;
        let right = Force::right(ForceSource::Infinity, eps);
        let left = Force::left(ForceSource::Infinity, eps);
        assert!(matches!(
            balance_root(&bf, &right, &left, 0.0, 200.0),
            Err(ForceError::NoBalanceRoot { .. })
        ));
        // and indeed F_R < 0 at a sample of points
        for &u in &[0.0, 5.0, 50.0] {
            assert!(right.eval(&bf, u).unwrap() < 0.0);
        }
    }

    #[test]
    fn chord_force_equals_differential_at_origin() {
        // F_R(b0; a0, b0; ε) = D_R(a0, b0) and F_L(a0; a0, b0; ε) = -D_L
        let bf = bf_quintic();
        let (a0, b0, eps) = (-2.7, -1.4, 0.5);
        let (dl, dr) = crate::chords::differentials(&bf, a0, b0);
        let fr = Force::right(ForceSource::Chord { a0, b0 }, eps).eval(&bf, b0).unwrap();
        let fl = Force::left(ForceSource::Chord { a0, b0 }, eps).eval(&bf, a0).unwrap();
        assert!((fr - dr).abs() < 1e-12 * (1.0 + dr.abs()));
        assert!((fl + dl).abs() < 1e-12 * (1.0 + dl.abs()));
    }

    #[test]
    fn force_satisfies_transport_ode() {
        // away from the origin: ε·F' = ε·f''' - F
        let bf = bf_escaping();
        let eps = 0.7;
        let force = Force::right(ForceSource::Chord { a0: -1.0, b0: -0.5 }, eps);
        for &u in &[0.2, 1.1, 3.0] {
            let h = 1e-6;
            let fp = (force.eval(&bf, u + h).unwrap() - force.eval(&bf, u - h).unwrap()) / (2.0 * h);
            let want = bf.f3(u) - force.eval(&bf, u).unwrap() / eps;
            assert!((fp - want).abs() < 1e-6 * (1.0 + want.abs()), "u={u}: {fp} vs {want}");
        }
    }

    #[test]
    fn wrong_side_rejected() {
        let bf = bf_quintic();
        let force = Force::right(ForceSource::Chord { a0: -2.0, b0: -1.0 }, 0.4);
        assert!(matches!(force.eval(&bf, -1.5), Err(ForceError::WrongSide { .. })));
    }

    #[test]
    fn tails_bracket_the_balance_root() {
        let bf = bf_abs_cubed();
        let eps = 0.8;
        let right = Force::right(ForceSource::Infinity, eps);
        let left = Force::left(ForceSource::Infinity, eps);
        // F_R < 0 until ε·ln2, F_L > 0 until -ε·ln2
        let tr = tail_right(&bf, &right, -4.0 * eps).unwrap();
        let tl = tail_left(&bf, &left, 4.0 * eps).unwrap();
        let expect = eps * 2f64.ln();
        assert!((tr - expect).abs() < 1e-9, "tail right {tr} vs {expect}");
        assert!((tl + expect).abs() < 1e-9, "tail left {tl} vs {}", -expect);
        assert!(tl < 0.0 && 0.0 < tr);
    }

    #[test]
    fn tail_infinite_when_force_stays_negative() {
        let bf = bf_escaping();
        let eps = 2.5; // beyond the escape radius
        let right = Force::right(ForceSource::Infinity, eps);
        let tr = tail_right(&bf, &right, 0.0).unwrap();
        assert!(tr.is_infinite() && tr > 0.0);
    }
}
