//! Independent grid construction of the minimal locally concave majorant.
//!
//! The strip is discretized into columns (in `x₁`) and rows (in `x₂` between
//! the two parabolas). Starting from the boundary data on the bottom row, the
//! value at each node is repeatedly improved by the best convex combination
//! along grid chords that stay inside the strip, until a fixed point. The
//! result cross-validates the assembled candidate without sharing any of its
//! machinery.

use serde::Serialize;
use thiserror::Error;

use crate::boundary::BoundaryFunction;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("no convergence after {sweeps} sweeps (last update {last_update:e})")]
    NoConvergence { sweeps: usize, last_update: f64 },
    #[error("grid too small: {0}")]
    BadGrid(String),
}

/// Discretization of the strip: columns `x₁ ∈ [center - r, center + r]`, and
/// per column `n2` rows from the lower parabola to the upper one.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridDomain {
    pub center: f64,
    pub r: f64,
    pub n1: usize,
    pub n2: usize,
    pub eps: f64,
}

impl GridDomain {
    pub fn x1(&self, i: usize) -> f64 {
        self.center - self.r + 2.0 * self.r * i as f64 / (self.n1 - 1) as f64
    }
    pub fn x2(&self, i: usize, j: usize) -> f64 {
        let x1 = self.x1(i);
        x1 * x1 + self.eps * self.eps * j as f64 / (self.n2 - 1) as f64
    }
    pub fn h1(&self) -> f64 {
        2.0 * self.r / (self.n1 - 1) as f64
    }
}

/// Grid values, column-major: `v[i * n2 + j]`, row 0 on the lower parabola.
#[derive(Debug, Clone)]
pub struct GridValues {
    pub domain: GridDomain,
    pub v: Vec<f64>,
    pub sweeps: usize,
}

impl GridValues {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.v[i * self.domain.n2 + j]
    }
}

/// Does the segment from `(y1, y2)` to `(z1, z2)` stay below the upper
/// parabola `x₂ = x₁² + ε²`? The violation is a concave quadratic along the
/// segment, so it suffices to check its interior maximum and the endpoints.
fn segment_inside(y1: f64, y2: f64, z1: f64, z2: f64, eps: f64, tol: f64) -> bool {
    let q = |t: f64| -> f64 {
        let x1 = y1 + t * (z1 - y1);
        let x2 = y2 + t * (z2 - y2);
        x2 - x1 * x1 - eps * eps
    };
    if q(0.0) > tol || q(1.0) > tol {
        return false;
    }
    let a = -(z1 - y1) * (z1 - y1);
    if a.abs() < 1e-300 {
        return true;
    }
    // q(t) = a t² + b t + c with the critical point at -b/(2a)
    let b = (z2 - y2) - 2.0 * y1 * (z1 - y1);
    let tc = -b / (2.0 * a);
    if tc > 0.0 && tc < 1.0 && q(tc) > tol {
        return false;
    }
    true
}

/// Interpolated value at height `x2` within column `i` (linear in `x₂`);
/// `None` outside the column's range or next to an unset node.
fn column_interp(grid: &GridDomain, v: &[f64], i: usize, x2: f64) -> Option<f64> {
    let lo = grid.x2(i, 0);
    let hi = grid.x2(i, grid.n2 - 1);
    let tol = 1e-12 * (1.0 + hi.abs());
    if x2 < lo - tol || x2 > hi + tol {
        return None;
    }
    let s = ((x2 - lo) / (hi - lo) * (grid.n2 - 1) as f64).clamp(0.0, (grid.n2 - 1) as f64);
    let j0 = (s.floor() as usize).min(grid.n2 - 2);
    let t = s - j0 as f64;
    let (va, vb) = (v[i * grid.n2 + j0], v[i * grid.n2 + j0 + 1]);
    if !va.is_finite() || !vb.is_finite() {
        return None;
    }
    Some(va + t * (vb - va))
}

/// Compute the minimal locally concave majorant of the boundary data on the
/// grid by chord value-iteration.
///
/// `pin` supplies values for the two edge columns (truncation): when it
/// returns `None`, the edge is pinned to `f(x₁)` extended constantly in `x₂`.
pub fn grid_minimal_concave(
    bf: &BoundaryFunction,
    grid: GridDomain,
    pin: &(dyn Fn(f64, f64) -> Option<f64> + Sync),
    max_sweeps: usize,
) -> Result<GridValues, OracleError> {
    let (n1, n2) = (grid.n1, grid.n2);
    if n1 < 4 || n2 < 2 {
        return Err(OracleError::BadGrid(format!("{n1}x{n2}")));
    }
    let eps = grid.eps;
    let mut max_f = 0.0_f64;
    let mut v = vec![f64::NEG_INFINITY; n1 * n2];
    for i in 0..n1 {
        let x1 = grid.x1(i);
        let fb = bf.f(x1);
        max_f = max_f.max(fb.abs());
        v[i * n2] = fb;
        if i == 0 || i == n1 - 1 {
            for j in 0..n2 {
                v[i * n2 + j] = pin(x1, grid.x2(i, j)).unwrap_or(fb);
            }
        }
    }
    let tol_grid = 1e-9 * (1.0 + max_f);
    let tol_mem = 1e-12 * (1.0 + eps * eps);
    // chords inside the strip span at most 2ε horizontally
    let wmax = ((2.0 * eps / grid.h1()).ceil() as usize + 2).min(n1 / 2);
    // ladder of chord windows: converge cheaply on short chords first, then
    // widen until the full admissible span is covered
    let mut window = 4.min(wmax);

    // updates are applied in place (values only ever increase toward the
    // fixed point), alternating the sweep direction so information crosses
    // the whole grid in a single sweep
    let x1s: Vec<f64> = (0..n1).map(|i| grid.x1(i)).collect();
    let mut sweeps = 0;
    loop {
        let w = window;
        let mut update = 0.0_f64;
        let columns: Box<dyn Iterator<Item = usize>> = if sweeps % 2 == 0 {
            Box::new(1..n1 - 1)
        } else {
            Box::new((1..n1 - 1).rev())
        };
        for i in columns {
            let x1 = x1s[i];
            let bottom = v[i * n2];
            for j in (1..n2).rev() {
                let x2 = grid.x2(i, j);
                let mut best = v[i * n2 + j];
                // vertical interpolation against the bottom row and any
                // higher node of the same column
                for jz in (j + 1)..n2 {
                    let zv = v[i * n2 + jz];
                    if !zv.is_finite() {
                        continue;
                    }
                    let (y2, z2) = (grid.x2(i, 0), grid.x2(i, jz));
                    let t = (x2 - y2) / (z2 - y2);
                    let cand = (1.0 - t) * bottom + t * zv;
                    if cand > best {
                        best = cand;
                    }
                }
                // chords: a node y in a column to the left, the partner z
                // interpolated in a column to the right
                let dl_max = w.min(i);
                for dl in 1..=dl_max {
                    let iy = i - dl;
                    let y1 = x1s[iy];
                    for jy in 0..n2 {
                        let vy = v[iy * n2 + jy];
                        if !vy.is_finite() {
                            continue;
                        }
                        let y2 = grid.x2(iy, jy);
                        let dr_max = w.min(n1 - 1 - i);
                        for dr in 1..=dr_max {
                            if (dl + dr) as f64 * grid.h1() > 2.0 * eps + grid.h1() {
                                break;
                            }
                            let iz = i + dr;
                            let z1 = x1s[iz];
                            // z on the ray from y through x
                            let t = (x1 - y1) / (z1 - y1);
                            let z2 = y2 + (x2 - y2) / t;
                            let vz = match column_interp(&grid, &v, iz, z2) {
                                Some(val) => val,
                                None => continue,
                            };
                            let cand = (1.0 - t) * vy + t * vz;
                            if cand <= best {
                                continue;
                            }
                            if segment_inside(y1, y2, z1, z2, eps, tol_mem) {
                                best = cand;
                            }
                        }
                    }
                }
                let old = v[i * n2 + j];
                if best > old {
                    let d = if old.is_finite() { best - old } else { f64::INFINITY };
                    if d > update {
                        update = d;
                    }
                    v[i * n2 + j] = best;
                }
            }
        }
        sweeps += 1;
        if update < tol_grid {
            if window < wmax {
                window = (2 * window).min(wmax);
                continue;
            }
            return Ok(GridValues { domain: grid, v, sweeps });
        }
        if sweeps >= max_sweeps {
            return Err(OracleError::NoConvergence { sweeps, last_update: update });
        }
    }
}

/// Deviation statistics between grid values and a reference, over interior
/// nodes at least two cells from the truncation edges.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CompareStats {
    pub max_abs: f64,
    pub max_rel: f64,
    pub at: (f64, f64),
}

pub fn compare(
    v: &GridValues,
    reference: &(dyn Fn(f64, f64) -> Option<f64> + Sync),
) -> CompareStats {
    let g = v.domain;
    let mut stats = CompareStats { max_abs: 0.0, max_rel: 0.0, at: (0.0, 0.0) };
    for i in 2..g.n1 - 2 {
        for j in 0..g.n2 {
            let (x1, x2) = (g.x1(i), g.x2(i, j));
            let b = match reference(x1, x2) {
                Some(b) => b,
                None => continue,
            };
            let val = v.at(i, j);
            if !val.is_finite() {
                continue;
            }
            let abs = (val - b).abs();
            let rel = abs / (1.0 + b.abs());
            if abs > stats.max_abs {
                stats.max_abs = abs;
                stats.at = (x1, x2);
            }
            if rel > stats.max_rel {
                stats.max_rel = rel;
            }
        }
    }
    stats
}

/// CSV dump `(x1, x2, V, B, diff)`; missing reference values are blank.
pub fn dump_csv(v: &GridValues, reference: &dyn Fn(f64, f64) -> Option<f64>) -> String {
    let g = v.domain;
    let mut out = String::from("x1,x2,V,B,diff\n");
    for i in 0..g.n1 {
        for j in 0..g.n2 {
            let (x1, x2) = (g.x1(i), g.x2(i, j));
            let val = v.at(i, j);
            match reference(x1, x2) {
                Some(b) => out.push_str(&format!(
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                    x1,
                    x2,
                    val,
                    b,
                    val - b
                )),
                None => out.push_str(&format!("{:.16e},{:.16e},{:.16e},,\n", x1, x2, val)),
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{BoundaryFunction, PieceSpec};
    use crate::foliation::{simple_picture, solve};
    use crate::term::Term;

    fn single(terms: Vec<Term>, eps_inf: f64) -> BoundaryFunction {
        BoundaryFunction::new(
            vec![PieceSpec { lo: f64::NEG_INFINITY, hi: f64::INFINITY, terms }],
            eps_inf,
            None,
        )
        .unwrap()
    }

    #[test]
    fn quadratic_gives_x2() {
        let bf = single(vec![Term::Poly(vec![0.0, 0.0, 1.0])], 1e6);
        let grid = GridDomain { center: 0.0, r: 2.0, n1: 60, n2: 10, eps: 0.5 };
        let v = grid_minimal_concave(&bf, grid, &|x1, x2| {
            let _ = x1;
            Some(x2)
        }, 400)
        .unwrap();
        let stats = compare(&v, &|_, x2| Some(x2));
        assert!(stats.max_abs <= 1e-8, "{stats:?}");
    }

    #[test]
    fn linear_gives_x1() {
        let bf = single(vec![Term::Poly(vec![0.0, 1.0])], 1e6);
        let grid = GridDomain { center: 0.0, r: 2.0, n1: 60, n2: 10, eps: 0.5 };
        let v = grid_minimal_concave(&bf, grid, &|x1, _| Some(x1), 400).unwrap();
        let stats = compare(&v, &|x1, _| Some(x1));
        assert!(stats.max_abs <= 1e-8, "{stats:?}");
    }

    #[test]
    fn exponential_matches_closed_form() {
        let bf = single(vec![Term::Exp { a: 1.0, b: 1.0 }], 0.99);
        let eps = 0.5;
        let s = solve(&bf, &simple_picture(&bf, eps), eps).unwrap();
        let reference = |x1: f64, x2: f64| s.eval(&bf, x1, x2).ok().map(|e| e.value);
        let grid = GridDomain { center: 0.0, r: 2.5, n1: 90, n2: 16, eps };
        let v = grid_minimal_concave(&bf, grid, &reference, 400).unwrap();
        let stats = compare(&v, &reference);
        assert!(stats.max_rel <= 2e-2, "{stats:?}");
        // the grid value never exceeds the concave candidate by more than
        // the interpolation slack
        let mut worst = f64::NEG_INFINITY;
        for i in 0..grid.n1 {
            for j in 0..grid.n2 {
                if let Some(b) = reference(grid.x1(i), grid.x2(i, j)) {
                    worst = worst.max(v.at(i, j) - b);
                }
            }
        }
        assert!(worst <= 1e-6, "majorant violated by {worst:e}");
    }

    #[test]
    fn refinement_improves() {
        let bf = single(vec![Term::Exp { a: 1.0, b: 1.0 }], 0.99);
        let eps = 0.5;
        let s = solve(&bf, &simple_picture(&bf, eps), eps).unwrap();
        let reference = |x1: f64, x2: f64| s.eval(&bf, x1, x2).ok().map(|e| e.value);
        let coarse = GridDomain { center: 0.0, r: 2.0, n1: 40, n2: 8, eps };
        let fine = GridDomain { center: 0.0, r: 2.0, n1: 79, n2: 15, eps };
        let vc = grid_minimal_concave(&bf, coarse, &reference, 400).unwrap();
        let vf = grid_minimal_concave(&bf, fine, &reference, 400).unwrap();
        let sc = compare(&vc, &reference);
        let sf = compare(&vf, &reference);
        assert!(
            sc.max_abs / sf.max_abs >= 1.8,
            "coarse {:?} fine {:?}",
            sc,
            sf
        );
    }
}
