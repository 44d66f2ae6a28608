//! Slope functions and tangent bands, plus the pointwise evaluation of the
//! candidate surface on bands and linearity domains.
//!
//! A right tangent band is foliated by tangents to the lower parabola that
//! touch the free boundary at `u - ε` with parameter `u`; the candidate is
//! linear along each tangent with slope `m(u)` governed by
//! `ε·m' + m = f'` (right) or `-ε·m' + m = f'` (left).

use crate::boundary::{BoundaryError, BoundaryFunction};
use crate::forces::Side;
use serde::{Deserialize, Serialize};

/// Errors from slope evaluation.
#[derive(Debug, Clone, thiserror::Error)]
pub enum SlopeError {
    #[error("boundary integral failed: {0}")]
    Boundary(#[from] BoundaryError),
    #[error("slope evaluated on the wrong side of its anchor: u={u}, anchor={anchor}")]
    WrongSide { u: f64, anchor: f64 },
    #[error("point ({x1}, {x2}) lies outside the parabolic strip of radius {eps}")]
    OutsideStrip { x1: f64, x2: f64, eps: f64 },
}

/// Tangency parameter of the right tangent through `(x1, x2)`:
/// `u = x1 + ε - sqrt(x1² + ε² - x2)`.
pub fn tangent_u_right(x1: f64, x2: f64, eps: f64) -> f64 {
    x1 + eps - (x1 * x1 + eps * eps - x2).max(0.0).sqrt()
}

/// Tangency parameter of the left tangent through `(x1, x2)`:
/// `u = x1 - ε + sqrt(x1² + ε² - x2)`.
pub fn tangent_u_left(x1: f64, x2: f64, eps: f64) -> f64 {
    x1 - eps + (x1 * x1 + eps * eps - x2).max(0.0).sqrt()
}

/// Is `(x1, x2)` inside the parabolic strip of radius `eps` (with slack)?
pub fn in_strip(x1: f64, x2: f64, eps: f64, slack: f64) -> bool {
    x2 >= x1 * x1 - slack && x2 <= x1 * x1 + eps * eps + slack
}

/// A slope function on a tangent band.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Slope {
    pub side: Side,
    /// `(u_anchor, m_anchor)`; `None` anchors the band at `∓∞` (right bands
    /// at `-∞`, left bands at `+∞`).
    pub anchor: Option<(f64, f64)>,
    pub eps: f64,
}

impl Slope {
    pub fn right_from_infinity(eps: f64) -> Self {
        Slope { side: Side::Right, anchor: None, eps }
    }
    pub fn left_from_infinity(eps: f64) -> Self {
        Slope { side: Side::Left, anchor: None, eps }
    }
    pub fn right_anchored(u: f64, m: f64, eps: f64) -> Self {
        Slope { side: Side::Right, anchor: Some((u, m)), eps }
    }
    pub fn left_anchored(u: f64, m: f64, eps: f64) -> Self {
        Slope { side: Side::Left, anchor: Some((u, m)), eps }
    }

    /// `m(u)`.
    ///
    /// Right anchored at `(u₁, m₁)`:
    /// `m(u) = e^{(u₁-u)/ε}·m₁ + ε⁻¹∫_{u₁}^{u} f'(t) e^{(t-u)/ε} dt`;
    /// left anchored at `(u₂, m₂)`:
    /// `m(u) = e^{(u-u₂)/ε}·m₂ + ε⁻¹∫_{u}^{u₂} f'(t) e^{(u-t)/ε} dt`;
    /// infinite anchors drop the homogeneous term.
    pub fn m(&self, bf: &BoundaryFunction, u: f64) -> Result<f64, SlopeError> {
        let eps = self.eps;
        match self.side {
            Side::Right => {
                let (u1, hom) = match self.anchor {
                    Some((ua, ma)) => {
                        if u < ua - 1e-12 * (1.0 + ua.abs()) {
                            return Err(SlopeError::WrongSide { u, anchor: ua });
                        }
                        (ua, ma * ((ua - u) / eps).exp())
                    }
                    None => (f64::NEG_INFINITY, 0.0),
                };
                let integral = bf.weighted_deriv_integral(1, 1.0 / eps, u, u1, u)?;
                Ok(hom + integral / eps)
            }
            Side::Left => {
                let (u2, hom) = match self.anchor {
                    Some((ua, ma)) => {
                        if u > ua + 1e-12 * (1.0 + ua.abs()) {
                            return Err(SlopeError::WrongSide { u, anchor: ua });
                        }
                        (ua, ma * ((u - ua) / eps).exp())
                    }
                    None => (f64::INFINITY, 0.0),
                };
                let integral = bf.weighted_deriv_integral(1, -1.0 / eps, u, u, u2)?;
                Ok(hom + integral / eps)
            }
        }
    }

    /// `m'(u)`: `(f' - m)/ε` on right bands, `(m - f')/ε` on left bands.
    pub fn m1(&self, bf: &BoundaryFunction, u: f64) -> Result<f64, SlopeError> {
        let m = self.m(bf, u)?;
        Ok(match self.side {
            Side::Right => (bf.f1(u) - m) / self.eps,
            Side::Left => (m - bf.f1(u)) / self.eps,
        })
    }

    /// `m''(u)` — equals the force over `ε` on the band.
    pub fn m2(&self, bf: &BoundaryFunction, u: f64) -> Result<f64, SlopeError> {
        let m1 = self.m1(bf, u)?;
        Ok(match self.side {
            Side::Right => (bf.f2(u) - m1) / self.eps,
            Side::Left => (m1 - bf.f2(u)) / self.eps,
        })
    }
}

/// Candidate value and gradient on a band at `(x1, x2)`.
///
/// Returns `(u, B, ∂₁B, ∂₂B)` where `u` is the tangency parameter used.
pub fn band_value(
    bf: &BoundaryFunction,
    slope: &Slope,
    x1: f64,
    x2: f64,
) -> Result<(f64, f64, f64, f64), SlopeError> {
    let eps = slope.eps;
    if !in_strip(x1, x2, eps, 1e-9 * (1.0 + x1 * x1 + eps * eps)) {
        return Err(SlopeError::OutsideStrip { x1, x2, eps });
    }
    let u = match slope.side {
        Side::Right => tangent_u_right(x1, x2, eps),
        Side::Left => tangent_u_left(x1, x2, eps),
    };
    let m = slope.m(bf, u)?;
    let m1 = slope.m1(bf, u)?;
    let b = m * (x1 - u) + bf.f(u);
    let d1 = match slope.side {
        Side::Right => m - (u - eps) * m1,
        Side::Left => m - (u + eps) * m1,
    };
    Ok((u, b, d1, 0.5 * m1))
}

/// Linearity-domain coefficients of an angle at `w`, given the slopes of
/// the incoming right and left bands at `w`:
/// `β₂ = (m_L(w) - m_R(w))/(4ε)`, `β₁ = f'(w) - 2β₂w`,
/// `β₀ = f(w) - w·f'(w) + β₂w²`.
pub fn angle_coeffs(
    bf: &BoundaryFunction,
    w: f64,
    m_r: f64,
    m_l: f64,
    eps: f64,
) -> (f64, f64, f64) {
    let b2 = (m_l - m_r) / (4.0 * eps);
    let b1 = bf.f1(w) - 2.0 * b2 * w;
    let b0 = bf.f(w) - w * bf.f1(w) + b2 * w * w;
    (b2, b1, b0)
}

/// Linearity coefficients of a degenerate (momentary) angle whose two band
/// slopes coincide to first order: `β₂ = f''(w)/2`.
pub fn degenerate_angle_coeffs(bf: &BoundaryFunction, w: f64) -> (f64, f64, f64) {
    let b2 = 0.5 * bf.f2(w);
    let b1 = bf.f1(w) - 2.0 * b2 * w;
    let b0 = bf.f(w) - w * bf.f1(w) + b2 * w * w;
    (b2, b1, b0)
}

/// Slope seed on the crown chord `[a0, b0]` for an outgoing or incoming
/// right band: `m_R = f'(·) - ε·<f''>`.
pub fn seed_right(bf: &BoundaryFunction, at: f64, a0: f64, b0: f64, eps: f64) -> f64 {
    bf.f1(at) - eps * bf.avg_f2(a0, b0)
}

/// Slope seed for a left band: `m_L = f'(·) + ε·<f''>`.
pub fn seed_left(bf: &BoundaryFunction, at: f64, a0: f64, b0: f64, eps: f64) -> f64 {
    bf.f1(at) + eps * bf.avg_f2(a0, b0)
}

/// Slope transmitted to both bands by a chordal domain with top chord
/// `[a0, b0]`: `(f'(a0) + f'(b0))/2`.
pub fn seed_chord(bf: &BoundaryFunction, a0: f64, b0: f64) -> f64 {
    0.5 * (bf.f1(a0) + bf.f1(b0))
}

/// Value of the linear function `β₂x₂ + β₁x₁ + β₀` and its gradient.
pub fn linear_value(coeffs: (f64, f64, f64), x1: f64, x2: f64) -> (f64, f64, f64) {
    let (b2, b1, b0) = coeffs;
    (b2 * x2 + b1 * x1 + b0, b1, b2)
}
