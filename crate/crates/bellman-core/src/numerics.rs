//! Scalar numerical kernels: bracketed root finding (Brent), golden-section
//! minimization, and adaptive Gauss–Kronrod quadrature.
//!
//! These are deliberately small, allocation-free routines; everything above
//! them in the crate assumes they are cheap enough to call inside inner loops.

/// Errors from the scalar solvers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    /// The supplied bracket does not straddle a sign change.
    #[error("bracket [{a}, {b}] is invalid: f(a)={fa}, f(b)={fb}")]
    BracketInvalid { a: f64, b: f64, fa: f64, fb: f64 },
    /// The iteration limit was reached before the tolerance was met.
    #[error("iteration limit reached, last estimate {last_x}")]
    IterationLimit { last_x: f64 },
}

/// Brent's method on a sign-changing bracket `[a, b]`.
///
/// Converges to a root of `f` with absolute tolerance `tol` on the abscissa
/// (machine-level on well-conditioned roots). `f(a)` and `f(b)` must have
/// opposite signs (zero endpoint values are accepted as roots).
pub fn brent_root<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64, NumericsError> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(NumericsError::BracketInvalid { a, b, fa, fb });
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut mflag = true;
    for _ in 0..200 {
        if fb == 0.0 || (b - a).abs() < tol {
            return Ok(b);
        }
        let mut s = if fa != fc && fb != fc {
            // inverse quadratic interpolation
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            // secant
            b - fb * (b - a) / (fb - fa)
        };
        let lo = (3.0 * a + b) / 4.0;
        let cond = !((lo.min(b) < s && s < lo.max(b))
            && (!mflag || (s - b).abs() < (b - c).abs() / 2.0)
            && (mflag || (s - b).abs() < d.abs() / 2.0));
        if cond {
            s = 0.5 * (a + b);
            mflag = true;
        } else {
            mflag = false;
        }
        let fs = f(s);
        d = c - b;
        c = b;
        fc = fb;
        if fa.signum() != fs.signum() {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Ok(b)
}

/// Scan `[lo, hi]` with `n` uniform cells and return the first cell with a
/// sign change of `f` (or a hard zero), as a bracket.
pub fn scan_first_sign_change<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    n: usize,
) -> Option<(f64, f64)> {
    let mut prev_x = lo;
    let mut prev_f = f(lo);
    for i in 1..=n {
        let x = lo + (hi - lo) * (i as f64) / (n as f64);
        let fx = f(x);
        if prev_f == 0.0 {
            return Some((prev_x, x));
        }
        if prev_f.signum() != fx.signum() {
            return Some((prev_x, x));
        }
        prev_x = x;
        prev_f = fx;
    }
    None
}

/// Golden-section minimization of a unimodal `f` on `[a, b]`.
///
/// Returns the abscissa of the minimum to absolute tolerance `tol`.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (a, b);
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Maximize `f` over the rectangle `[a0,b0]×[a1,b1]` by alternating 1-D
/// golden-section sweeps (coordinate ascent). Good enough for the smooth,
/// locally unimodal oscillation functionals it is used on.
pub fn golden_max_2d<F: Fn(f64, f64) -> f64>(
    f: F,
    a0: f64,
    b0: f64,
    a1: f64,
    b1: f64,
    tol: f64,
) -> (f64, f64, f64) {
    let mut x = 0.5 * (a0 + b0);
    let mut y = 0.5 * (a1 + b1);
    for _ in 0..40 {
        let nx = golden_min(|t| -f(t, y), a0, b0, tol);
        let ny = golden_min(|t| -f(nx, t), a1, b1, tol);
        if (nx - x).abs() < tol && (ny - y).abs() < tol {
            x = nx;
            y = ny;
            break;
        }
        x = nx;
        y = ny;
    }
    (x, y, f(x, y))
}

// Gauss–Kronrod 7-15 nodes/weights on [-1, 1] (symmetric; positive half listed).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.000_000_000_000_000_0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let fp = f(c + h * XGK[i]);
        let fm = f(c - h * XGK[i]);
        kronrod += WGK[i] * (fp + fm);
        if i % 2 == 1 {
            // odd Kronrod nodes coincide with the Gauss-7 nodes
            gauss += WG[i / 2] * (fp + fm);
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod (7–15) quadrature of `f` over the finite interval
/// `[a, b]` to absolute tolerance `tol` (with a relative floor).
pub fn quad_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let mut stack = vec![(a, b)];
    let mut total = 0.0;
    let mut budget = 4000;
    while let Some((lo, hi)) = stack.pop() {
        let (val, err) = gk15(f, lo, hi);
        let local_tol = tol * ((hi - lo) / (b - a)).abs().max(1e-300) + 1e-16 * val.abs();
        if err <= local_tol || (hi - lo).abs() < 1e-14 * (b - a).abs() || budget == 0 {
            total += val;
        } else {
            budget -= 1;
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid));
            stack.push((mid, hi));
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cubic_root() {
        let r = brent_root(|x| x * x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.powf(1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn brent_rejects_bad_bracket() {
        assert!(matches!(
            brent_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12),
            Err(NumericsError::BracketInvalid { .. })
        ));
    }

    #[test]
    fn golden_min_parabola() {
        let x = golden_min(|t| (t - 0.3) * (t - 0.3), -1.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn quad_exact_on_polynomial() {
        let v = quad_adaptive(&|t: f64| t * t * t - t, 0.0, 2.0, 1e-13);
        assert!((v - (4.0 - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn quad_oscillatory() {
        let v = quad_adaptive(&|t: f64| (10.0 * t).sin(), 0.0, 1.0, 1e-12);
        let exact = (1.0 - (10.0f64).cos()) / 10.0;
        assert!((v - exact).abs() < 1e-10);
    }

    #[test]
    fn scan_finds_first_change() {
        let b = scan_first_sign_change(|x| (x - 0.25) * (x - 0.75), 0.0, 1.0, 64).unwrap();
        assert!(b.0 <= 0.25 && 0.25 <= b.1 && b.1 < 0.75);
    }
}
