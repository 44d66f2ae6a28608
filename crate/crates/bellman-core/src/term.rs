//! Closed-form basis terms: polynomials, exponentials `a·e^{bt}`, and
//! trigonometric terms `a·cos(bt+c)`.
//!
//! The basis is closed under differentiation, affine substitution
//! `t ↦ αt+β`, and — crucially — admits closed-form antiderivatives against
//! an exponential weight `e^{σ(t−u)}`. The weight is always evaluated
//! relative to a reference abscissa `u` so that the quantities the rest of
//! the crate needs (slope functions, forces) never form `e^{t/ε}` for large
//! `|t|` directly.

/// One closed-form basis term.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Term {
    /// `Σ coeffs[j]·t^j`, coefficients in increasing degree.
    Poly(Vec<f64>),
    /// `a·e^{bt}`.
    Exp { a: f64, b: f64 },
    /// `a·cos(bt + c)`.
    Trig { a: f64, b: f64, c: f64 },
}

impl Term {
    /// Evaluate the term at `t`.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Term::Poly(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * t + ck),
            Term::Exp { a, b } => a * (b * t).exp(),
            Term::Trig { a, b, c } => a * (b * t + c).cos(),
        }
    }

    /// Derivative as a new term (the basis is closed under d/dt).
    pub fn deriv(&self) -> Term {
        match self {
            Term::Poly(c) => {
                if c.len() <= 1 {
                    Term::Poly(vec![])
                } else {
                    Term::Poly(c.iter().enumerate().skip(1).map(|(j, &ck)| j as f64 * ck).collect())
                }
            }
            Term::Exp { a, b } => Term::Exp { a: a * b, b: *b },
            // d/dt a·cos(bt+c) = a·b·cos(bt+c+π/2)
            Term::Trig { a, b, c } => Term::Trig {
                a: a * b,
                b: *b,
                c: c + std::f64::consts::FRAC_PI_2,
            },
        }
    }

    /// `k`-th derivative.
    pub fn deriv_n(&self, k: usize) -> Term {
        let mut t = self.clone();
        for _ in 0..k {
            t = t.deriv();
        }
        t
    }

    /// Is the term identically zero?
    pub fn is_zero(&self) -> bool {
        match self {
            Term::Poly(c) => c.iter().all(|&x| x == 0.0),
            Term::Exp { a, .. } => *a == 0.0,
            Term::Trig { a, .. } => *a == 0.0,
        }
    }

    /// Substitute `t ↦ αt + β`, returning the composed term.
    pub fn substitute_affine(&self, alpha: f64, beta: f64) -> Term {
        match self {
            Term::Poly(c) => {
                // expand Σ c_j (αt+β)^j by repeated multiplication
                let mut out = vec![0.0; c.len().max(1)];
                let mut pow = vec![1.0]; // (αt+β)^0
                for (j, &cj) in c.iter().enumerate() {
                    if j > 0 {
                        // pow *= (αt + β)
                        let mut next = vec![0.0; pow.len() + 1];
                        for (i, &p) in pow.iter().enumerate() {
                            next[i] += beta * p;
                            next[i + 1] += alpha * p;
                        }
                        pow = next;
                    }
                    for (i, &p) in pow.iter().enumerate() {
                        if out.len() <= i {
                            out.resize(i + 1, 0.0);
                        }
                        out[i] += cj * p;
                    }
                }
                Term::Poly(out)
            }
            Term::Exp { a, b } => Term::Exp { a: a * (b * beta).exp(), b: b * alpha },
            Term::Trig { a, b, c } => Term::Trig { a: *a, b: b * alpha, c: b * beta + c },
        }
    }

    /// Scale the term by `s`.
    pub fn scale(&self, s: f64) -> Term {
        match self {
            Term::Poly(c) => Term::Poly(c.iter().map(|&x| s * x).collect()),
            Term::Exp { a, b } => Term::Exp { a: s * a, b: *b },
            Term::Trig { a, b, c } => Term::Trig { a: s * a, b: *b, c: *c },
        }
    }

    /// Antiderivative of `term(t)·e^{σ(t−u)}` evaluated at `t` (finite).
    ///
    /// `σ` must be nonzero. The result is exact up to rounding.
    fn weighted_antideriv_at(&self, sigma: f64, u: f64, t: f64) -> f64 {
        let w = (sigma * (t - u)).exp();
        match self {
            Term::Poly(c) => {
                // ∫ t^n e^{σ(t-u)} dt = e^{σ(t-u)} Σ_{j=0}^n (-1)^j n!/(n-j)! t^{n-j}/σ^{j+1}
                let mut total = 0.0;
                for (n, &cn) in c.iter().enumerate() {
                    if cn == 0.0 {
                        continue;
                    }
                    let mut fac = 1.0; // n!/(n-j)!
                    let mut s = 0.0;
                    for j in 0..=n {
                        s += if j % 2 == 0 { 1.0 } else { -1.0 } * fac * t.powi((n - j) as i32)
                            / sigma.powi(j as i32 + 1);
                        fac *= (n - j) as f64;
                    }
                    total += cn * s;
                }
                total * w
            }
            Term::Exp { a, b } => {
                let s = b + sigma;
                // exponent of the integrand: b·t + σ(t−u) = s·t − σ·u
                if s.abs() < 1e-13 * (b.abs() + sigma.abs()) {
                    // integrand is the constant a·e^{−σu+...}: antiderivative a·e^{bt+σ(t−u)}·t
                    a * (b * t + sigma * (t - u)).exp() * t
                } else {
                    a * (b * t + sigma * (t - u)).exp() / s
                }
            }
            Term::Trig { a, b, c } => {
                let phase = b * t + c;
                a * w * (sigma * phase.cos() + b * phase.sin()) / (sigma * sigma + b * b)
            }
        }
    }

    /// Limit of the weighted antiderivative as `t → ±∞` (`dir = ±1`).
    /// Returns `None` if the integral diverges in that direction.
    fn weighted_antideriv_limit(&self, sigma: f64, dir: f64) -> Option<f64> {
        match self {
            Term::Poly(c) => {
                if c.iter().all(|&x| x == 0.0) || sigma * dir < 0.0 {
                    Some(0.0)
                } else {
                    None
                }
            }
            Term::Exp { a, b } => {
                if *a == 0.0 || (b + sigma) * dir < 0.0 {
                    Some(0.0)
                } else {
                    None
                }
            }
            Term::Trig { a, .. } => {
                if *a == 0.0 || sigma * dir < 0.0 {
                    Some(0.0)
                } else {
                    None
                }
            }
        }
    }

    /// `∫_p^q term(t)·e^{σ(t−u)} dt` with `p ≤ q` possibly infinite.
    ///
    /// Returns `None` on divergence.
    pub fn weighted_integral(&self, sigma: f64, u: f64, p: f64, q: f64) -> Option<f64> {
        debug_assert!(sigma != 0.0);
        let hi = if q.is_finite() {
            self.weighted_antideriv_at(sigma, u, q)
        } else {
            self.weighted_antideriv_limit(sigma, 1.0)?
        };
        let lo = if p.is_finite() {
            self.weighted_antideriv_at(sigma, u, p)
        } else {
            self.weighted_antideriv_limit(sigma, -1.0)?
        };
        Some(hi - lo)
    }

    /// Plain antiderivative `∫ term` evaluated at finite `t` (constant-free).
    pub fn antideriv_at(&self, t: f64) -> f64 {
        match self {
            Term::Poly(c) => {
                let mut s = 0.0;
                for (n, &cn) in c.iter().enumerate() {
                    s += cn * t.powi(n as i32 + 1) / (n as f64 + 1.0);
                }
                s
            }
            Term::Exp { a, b } => {
                if *b == 0.0 {
                    a * t
                } else {
                    a * (b * t).exp() / b
                }
            }
            Term::Trig { a, b, c } => {
                if *b == 0.0 {
                    a * c.cos() * t
                } else {
                    a * (b * t + c).sin() / b
                }
            }
        }
    }
}
