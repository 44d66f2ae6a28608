//! Chordal domains: one-parameter families of chords `[a(l), b(l)]` with
//! `b - a = l`, along which the candidate surface is linear. The family is
//! governed by the cup equation and grown by a predictor–corrector
//! continuation in the chord length `l`.

use crate::boundary::BoundaryFunction;
use crate::numerics::{brent_root, scan_first_sign_change};
use serde::{Deserialize, Serialize};

/// Residual tolerance for the cup equation (scaled by the local magnitude).
pub const TOL_CUP: f64 = 1e-11;

/// Errors from chordal-domain construction.
#[derive(Debug, Clone, thiserror::Error)]
pub enum ChordError {
    #[error("seed chord [{a}, {b}] does not satisfy the cup equation: residual {residual}")]
    SeedResidual { a: f64, b: f64, residual: f64 },
    #[error("corrector failed to converge near l = {l}")]
    CorrectorDiverged { l: f64 },
    #[error("chord family became degenerate at l = {l}: D_L + D_R = {dsum}")]
    Degenerate { l: f64, dsum: f64 },
    #[error("requested length {l} below the birth length {l0}")]
    BelowBirth { l: f64, l0: f64 },
}

/// How a chordal domain is born.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum ChordSeed {
    /// Degenerate chord at a point root of `f'''` (a cup).
    Point(f64),
    /// An explicit starting chord satisfying the cup equation (used for
    /// growth above the convex hull of a closed multicup).
    Chord { a: f64, b: f64 },
}

/// Cup-equation residual `f'(a) + f'(b) - 2·(f(b) - f(a))/(b - a)`.
pub fn cup_residual(bf: &BoundaryFunction, a: f64, b: f64) -> f64 {
    bf.f1(a) + bf.f1(b) - 2.0 * bf.avg_f1(a, b)
}

/// The differentials `D_L = f''(a) - <f''>` and `D_R = f''(b) - <f''>` over
/// the chord `[a, b]`, with `<f''> = (f'(b) - f'(a))/(b - a)`.
pub fn differentials(bf: &BoundaryFunction, a: f64, b: f64) -> (f64, f64) {
    let avg = bf.avg_f2(a, b);
    (bf.f2(a) - avg, bf.f2(b) - avg)
}

/// Linear-in-`x1` coefficients of the candidate on the chord `[a, b]`:
/// `B(x1, x2) = β₂·x2 + β₁·x1 + β₀` interpolating `(a, a², f(a))` and
/// `(b, b², f(b))` with slope `β₁ + (a+b)β₂ = <f'>` along the chord.
pub fn chord_coeffs(bf: &BoundaryFunction, a: f64, b: f64) -> (f64, f64, f64) {
    let (fa, fb) = (bf.f(a), bf.f(b));
    let (da, db) = (bf.f1(a), bf.f1(b));
    let l = b - a;
    let b2 = (db - da) / (2.0 * l);
    let b1 = (fb - fa) / l - (a + b) * b2;
    let b0 = (b * fa - a * fb) / l + a * b * b2;
    (b2, b1, b0)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct ChordRow {
    l: f64,
    a: f64,
    b: f64,
}

/// A grown chordal domain: the continuation table plus its seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChordalDomain {
    pub seed: ChordSeed,
    rows: Vec<ChordRow>,
}

impl ChordalDomain {
    /// Grow a chordal domain from `seed` up to chord length `l_target`.
    pub fn grow(
        bf: &BoundaryFunction,
        seed: ChordSeed,
        l_target: f64,
        local_gap: f64,
    ) -> Result<Self, ChordError> {
        let mut rows = Vec::new();
        let (mut l, mut a, mut b) = match seed {
            ChordSeed::Point(c) => {
                let l0 = 1e-4 * local_gap.max(1e-8);
                let m = correct_center(bf, c, l0)?;
                (l0, m - 0.5 * l0, m + 0.5 * l0)
            }
            ChordSeed::Chord { a, b } => {
                let res = cup_residual(bf, a, b);
                let scale = 1.0 + bf.f1(a).abs() + bf.f1(b).abs();
                if res.abs() > 1e-8 * scale {
                    return Err(ChordError::SeedResidual { a, b, residual: res });
                }
                (b - a, a, b)
            }
        };
        rows.push(ChordRow { l, a, b });
        while l < l_target {
            let (dl_cap, da, db) = step_direction_or_birth(bf, l, a, b)?;
            let dl = dl_cap.min(l_target - l);
            // predictor
            let (mut na, mut nb) = (a + da * dl, b + db * dl);
            let nl = l + dl;
            // corrector: shift the chord keeping its length
            let m = correct_center(bf, 0.5 * (na + nb), nl)?;
            na = m - 0.5 * nl;
            nb = m + 0.5 * nl;
            l = nl;
            a = na;
            b = nb;
            rows.push(ChordRow { l, a, b });
        }
        Ok(ChordalDomain { seed, rows })
    }

    /// Extend the table up to `l_target` (no-op if already long enough).
    pub fn extend_to(&mut self, bf: &BoundaryFunction, l_target: f64) -> Result<(), ChordError> {
        let last = *self.rows.last().unwrap();
        let (mut l, mut a, mut b) = (last.l, last.a, last.b);
        while l < l_target {
            let (dl_cap, da, db) = step_direction_or_birth(bf, l, a, b)?;
            let dl = dl_cap.min(l_target - l);
            let nl = l + dl;
            let m = correct_center(bf, 0.5 * (a + da * dl + b + db * dl), nl)?;
            l = nl;
            a = m - 0.5 * nl;
            b = m + 0.5 * nl;
            self.rows.push(ChordRow { l, a, b });
        }
        Ok(())
    }

    /// Smallest tabulated chord length.
    pub fn min_l(&self) -> f64 {
        self.rows[0].l
    }
    /// Largest tabulated chord length.
    pub fn max_l(&self) -> f64 {
        self.rows.last().unwrap().l
    }

    /// The chord `[a, b]` of length `l`, re-corrected to the cup equation.
    pub fn chord_at(&self, bf: &BoundaryFunction, l: f64) -> Result<(f64, f64), ChordError> {
        if l < self.rows[0].l {
            // between birth and the first row: fall back to the seed point
            if let ChordSeed::Point(c) = self.seed {
                if l <= 0.0 {
                    return Ok((c, c));
                }
                let m = correct_center(bf, c, l)?;
                return Ok((m - 0.5 * l, m + 0.5 * l));
            }
            return Err(ChordError::BelowBirth { l, l0: self.rows[0].l });
        }
        let idx = self
            .rows
            .partition_point(|r| r.l < l)
            .min(self.rows.len() - 1)
            .max(1);
        let (r0, r1) = (self.rows[idx - 1], self.rows[idx]);
        let t = if r1.l > r0.l { (l - r0.l) / (r1.l - r0.l) } else { 0.0 };
        let guess_m = 0.5 * ((r0.a + (r1.a - r0.a) * t) + (r0.b + (r1.b - r0.b) * t));
        let m = correct_center(bf, guess_m, l)?;
        Ok((m - 0.5 * l, m + 0.5 * l))
    }

    /// Left endpoint as a function of `l`.
    pub fn a_at(&self, bf: &BoundaryFunction, l: f64) -> Result<f64, ChordError> {
        Ok(self.chord_at(bf, l)?.0)
    }
    /// Right endpoint as a function of `l`.
    pub fn b_at(&self, bf: &BoundaryFunction, l: f64) -> Result<f64, ChordError> {
        Ok(self.chord_at(bf, l)?.1)
    }

    /// Locate the chord passing through the interior point `(x1, x2)`:
    /// the root of `(a+b)·x1 - a·b - x2` in `l`. Returns `(l, a, b)`.
    pub fn locate(&self, bf: &BoundaryFunction, x1: f64, x2: f64) -> Option<(f64, f64, f64)> {
        let g = |l: f64| -> f64 {
            match self.chord_at(bf, l) {
                Ok((a, b)) => (a + b) * x1 - a * b - x2,
                Err(_) => f64::NAN,
            }
        };
        let (lo, hi) = (self.min_l(), self.max_l());
        // endpoint chords: a point exactly on the top or bottom chord gives
        // a boundary zero that a sign scan can miss
        let etol = 1e-9 * (1.0 + x1 * x1 + x2.abs());
        for l in [hi, lo] {
            let v = g(l);
            if v.is_finite() && v.abs() <= etol {
                let (a, b) = self.chord_at(bf, l).ok()?;
                return Some((l, a, b));
            }
        }
        let bracket = scan_first_sign_change(g, lo, hi, 64)?;
        let l = brent_root(g, bracket.0, bracket.1, 1e-12 * (1.0 + hi)).ok()?;
        let (a, b) = self.chord_at(bf, l).ok()?;
        Some((l, a, b))
    }

    /// CSV dump of the continuation table (`l,a,b` per row).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("l,a,b\n");
        for r in &self.rows {
            out.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", r.l, r.a, r.b));
        }
        out
    }
}

/// Like [`step_direction`], but tolerates a seed chord on which both
/// differentials vanish (e.g. the convex-hull chord of a flat stretch):
/// there the family leaves the seed symmetrically at leading order.
fn step_direction_or_birth(
    bf: &BoundaryFunction,
    l: f64,
    a: f64,
    b: f64,
) -> Result<(f64, f64, f64), ChordError> {
    match step_direction(bf, l, a, b) {
        Ok(v) => Ok(v),
        Err(ChordError::Degenerate { dsum, .. }) if dsum.abs() < 1e-10 => {
            Ok((1e-5 * (1.0 + l), -0.5, 0.5))
        }
        Err(e) => Err(e),
    }
}

/// Continuation step: returns `(dl, da/dl, db/dl)` from the differentials.
fn step_direction(
    bf: &BoundaryFunction,
    l: f64,
    a: f64,
    b: f64,
) -> Result<(f64, f64, f64), ChordError> {
    let (dl_, dr_) = differentials(bf, a, b);
    let dsum = dl_ + dr_;
    let scale = 1.0 + bf.f2(a).abs() + bf.f2(b).abs();
    if dsum.abs() < 1e-14 * scale {
        return Err(ChordError::Degenerate { l, dsum });
    }
    let da = -dr_ / dsum;
    let db = dl_ / dsum;
    // the chord must grow outward; a sign reversal means the domain cannot
    // be continued past this length
    if da > 1e-9 || db < -1e-9 {
        return Err(ChordError::Degenerate { l, dsum });
    }
    // step so that |Δa| + |Δb| ≈ 1e-3·(1 + l); note |da| + |db| ≥ 1
    let speed = da.abs() + db.abs();
    Ok((1e-3 * (1.0 + l) / speed, da, db))
}

/// Newton correction of the chord center `m` at fixed length `l`, solving
/// the cup equation for the chord `[m - l/2, m + l/2]`.
fn correct_center(bf: &BoundaryFunction, m0: f64, l: f64) -> Result<f64, ChordError> {
    let h = 0.5 * l;
    let phi = |m: f64| cup_residual(bf, m - h, m + h);
    let mut m = m0;
    for _ in 0..60 {
        let r = phi(m);
        let scale = 1.0 + bf.f1(m - h).abs() + bf.f1(m + h).abs();
        if r.abs() <= TOL_CUP * scale {
            return Ok(m);
        }
        let (dl_, dr_) = differentials(bf, m - h, m + h);
        let dphi = dl_ + dr_;
        if dphi.abs() < 1e-300 {
            break;
        }
        let step = r / dphi;
        // damp wild steps to stay within a chord length of the guess
        let cap = l.max(1e-6);
        m -= step.clamp(-cap, cap);
        if (m - m0).abs() > 10.0 * l + 1.0 {
            break;
        }
    }
    // fallback: bracketed search around the guess
    for width in [0.25 * l, l, 4.0 * l] {
        if let Some((p, q)) = scan_first_sign_change(phi, m0 - width, m0 + width, 256) {
            if let Ok(root) = brent_root(phi, p, q, 1e-14 * (1.0 + m0.abs())) {
                return Ok(root);
            }
        }
    }
    Err(ChordError::CorrectorDiverged { l })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{BoundaryFunction, PieceSpec};
    use crate::term::Term;

    fn bf_sextic_neg() -> BoundaryFunction {
        // f''' = -t³ + 3t  →  f = -t^6/120 + t^4/8; point c-roots at ±√3
        BoundaryFunction::new(
            vec![PieceSpec {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
                terms: vec![Term::Poly(vec![0.0, 0.0, 0.0, 0.0, 0.125, 0.0, -1.0 / 120.0])],
            }],
            1e6,
            None,
        )
        .unwrap()
    }

    fn bf_solid_cubic() -> BoundaryFunction {
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
    fn residual_and_differentials_symmetric_sextic() {
        let bf = bf_sextic_neg();
        let c = 3f64.sqrt();
        // symmetric chords around ±√3 by oddness of f''' are not exact; but
        // the corrected cup chord around √3 must satisfy the equation
        let dom = ChordalDomain::grow(&bf, ChordSeed::Point(c), 0.8, 2.0 * c).unwrap();
        let (a, b) = dom.chord_at(&bf, 0.5).unwrap();
        let scale = 1.0 + bf.f1(a).abs() + bf.f1(b).abs();
        assert!(cup_residual(&bf, a, b).abs() <= 10.0 * TOL_CUP * scale);
        assert!((b - a - 0.5).abs() < 1e-12);
        assert!(a < c && c < b);
    }

    #[test]
    fn sextic_cup_center_closed_form() {
        // for f''' = -t³ + 3t the cup chord of half-length h around √3 has
        // center w with w² = 3·(1 - h²/5): expand Φ(w-h, w+h) in odd powers
        let bf = bf_sextic_neg();
        let c = 3f64.sqrt();
        let dom = ChordalDomain::grow(&bf, ChordSeed::Point(c), 1.2, 2.0 * c).unwrap();
        for &l in &[0.2, 0.7, 1.2] {
            let (a, b) = dom.chord_at(&bf, l).unwrap();
            let h = 0.5 * l;
            let w_pred = (3.0 * (1.0 - h * h / 5.0)).sqrt();
            assert!(
                (0.5 * (a + b) - w_pred).abs() < 1e-9,
                "l={l}: center {} vs {w_pred}",
                0.5 * (a + b)
            );
        }
    }

    #[test]
    fn growth_is_monotone() {
        let bf = bf_sextic_neg();
        let dom = ChordalDomain::grow(&bf, ChordSeed::Point(3f64.sqrt()), 1.0, 3.4).unwrap();
        let mut prev: Option<(f64, f64)> = None;
        for &l in &[0.05, 0.2, 0.5, 0.9] {
            let (a, b) = dom.chord_at(&bf, l).unwrap();
            if let Some((pa, pb)) = prev {
                assert!(a < pa, "a must decrease");
                assert!(b > pb, "b must increase");
            }
            prev = Some((a, b));
        }
    }

    #[test]
    fn chord_coeffs_interpolate_endpoints() {
        let bf = bf_sextic_neg();
        let dom = ChordalDomain::grow(&bf, ChordSeed::Point(3f64.sqrt()), 0.9, 3.4).unwrap();
        let (a, b) = dom.chord_at(&bf, 0.9).unwrap();
        let (b2, b1, b0) = chord_coeffs(&bf, a, b);
        let at = |t: f64| b2 * t * t + b1 * t + b0;
        assert!((at(a) - bf.f(a)).abs() < 1e-11);
        assert!((at(b) - bf.f(b)).abs() < 1e-11);
        // slope along the lower parabola direction equals <f'>
        let slope = b1 + (a + b) * b2;
        assert!((slope - bf.avg_f1(a, b)).abs() < 1e-11);
    }

    #[test]
    fn locate_recovers_chord() {
        let bf = bf_sextic_neg();
        let dom = ChordalDomain::grow(&bf, ChordSeed::Point(3f64.sqrt()), 1.4, 3.4).unwrap();
        let (a, b) = dom.chord_at(&bf, 1.0).unwrap();
        // midpoint of the chord in the plane
        let x1 = 0.5 * (a + b);
        let x2 = (a + b) * x1 - a * b;
        let (l, la, lb) = dom.locate(&bf, x1, x2).unwrap();
        assert!((l - 1.0).abs() < 1e-9);
        assert!((la - a).abs() < 1e-9 && (lb - b).abs() < 1e-9);
    }

    #[test]
    fn hull_seed_growth_solid_cubic() {
        // the flat hull chord [-1, 1] satisfies the cup equation exactly;
        // growth beyond it must produce strictly nested chords
        let bf = bf_solid_cubic();
        let dom =
            ChordalDomain::grow(&bf, ChordSeed::Chord { a: -1.0, b: 1.0 }, 3.0, 2.0).unwrap();
        let (a, b) = dom.chord_at(&bf, 2.5).unwrap();
        assert!(a < -1.0 && b > 1.0);
        let scale = 1.0 + bf.f1(a).abs() + bf.f1(b).abs();
        assert!(cup_residual(&bf, a, b).abs() <= 10.0 * TOL_CUP * scale);
        // symmetry of the example
        assert!((a + b).abs() < 1e-9);
    }

    #[test]
    fn bad_seed_rejected() {
        let bf = bf_sextic_neg();
        let r = ChordalDomain::grow(&bf, ChordSeed::Chord { a: 0.5, b: 2.0 }, 2.5, 1.0);
        assert!(matches!(r, Err(ChordError::SeedResidual { .. })));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let bf = bf_sextic_neg();
        let dom = ChordalDomain::grow(&bf, ChordSeed::Point(3f64.sqrt()), 0.3, 3.4).unwrap();
        let csv = dom.to_csv();
        assert!(csv.starts_with("l,a,b\n"));
        assert!(csv.lines().count() > 10);
    }
}
