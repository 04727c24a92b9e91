//! Newton search for exceptional points.
//!
//! An EP of the oscillator pair is a double root of the secular function:
//! `D(ω) = 0` and `D'(ω) = 0` simultaneously. Both couplings are kept real,
//! so the unknowns are `(Re ω, Im ω, f, g)` and the residual map is
//!
//! ```text
//! F(Re ω, Im ω, f, g) = (Re D, Im D, Re D', Im D') / s
//! ```
//!
//! with `s` the largest coefficient magnitude of the secular polynomial at
//! the seed. The `ω` columns of the Jacobian are analytic (Cauchy–Riemann on
//! `D'` and `D''`); the `f` and `g` columns are central differences.

use thiserror::Error;

use crate::constants::{
    EP_DEDUP_RADIUS, EP_FD_STEP, EP_MAX_HALVINGS, EP_MAX_ITER, EP_RESIDUAL_TOL,
};
use crate::linalg::{self, Mat4, C64, I};
use crate::model::{self, ModelError, OscillatorParams};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpSeed {
    pub omega: C64,
    pub f: f64,
    pub g: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExceptionalPoint {
    pub omega_ep: C64,
    pub f_ep: f64,
    pub g_ep: f64,
    /// Final scaled residual `|F|`.
    pub residual: f64,
    pub iterations: usize,
    /// `Im ω < 0`: a decaying resonance.
    pub physical: bool,
}

impl ExceptionalPoint {
    fn distance(&self, other: &ExceptionalPoint) -> f64 {
        ((self.omega_ep - other.omega_ep).norm_sqr()
            + (self.f_ep - other.f_ep).powi(2)
            + (self.g_ep - other.g_ep).powi(2))
        .sqrt()
    }

    /// Parameters with `f` and `g` set to the EP values.
    pub fn apply(&self, params: &OscillatorParams) -> OscillatorParams {
        params.with_coupling(self.f_ep, self.g_ep)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EpError {
    #[error(transparent)]
    Params(#[from] ModelError),
    #[error("seed is not finite")]
    NonFiniteSeed,
    #[error("no convergence after {iterations} iterations (residual {:.3e})", last.residual)]
    NoConvergence {
        iterations: usize,
        last: ExceptionalPoint,
    },
}

#[derive(Clone, Copy, Debug)]
pub struct EpSolverOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub max_halvings: usize,
}

impl Default for EpSolverOptions {
    fn default() -> Self {
        EpSolverOptions {
            max_iter: EP_MAX_ITER,
            tol: EP_RESIDUAL_TOL,
            max_halvings: EP_MAX_HALVINGS,
        }
    }
}

type Point = [f64; 4];

const MAX_STEP_FRACTION: f64 = 0.1;

struct Residual<'a> {
    params: &'a OscillatorParams,
    scale: f64,
}

impl Residual<'_> {
    fn dets(&self, x: &Point) -> (C64, C64) {
        let omega = C64::new(x[0], x[1]);
        let p = model::char_poly(self.params, x[2], x[3]);
        let d1 = linalg::poly_derivative(&p);
        (linalg::poly_eval(&p, omega), linalg::poly_eval(&d1, omega))
    }

    fn eval(&self, x: &Point) -> Point {
        let (d, dd) = self.dets(x);
        [d.re, d.im, dd.re, dd.im].map(|v| v / self.scale)
    }

    fn jacobian(&self, x: &Point) -> [[f64; 4]; 4] {
        let omega = C64::new(x[0], x[1]);
        let (f, g) = (x[2], x[3]);
        let d1 = model::det_derivative(self.params, f, g, omega) / self.scale;
        let d2 = model::det_second_derivative(self.params, f, g, omega) / self.scale;
        let col_re = [d1.re, d1.im, d2.re, d2.im];
        let (id1, id2) = (I * d1, I * d2);
        let col_im = [id1.re, id1.im, id2.re, id2.im];
        let fd = |idx: usize| {
            let h = EP_FD_STEP * x[idx].abs().max(1.0);
            let (mut xp, mut xm) = (*x, *x);
            xp[idx] += h;
            xm[idx] -= h;
            let (fp, fm) = (self.eval(&xp), self.eval(&xm));
            [0, 1, 2, 3].map(|k| (fp[k] - fm[k]) / (2.0 * h))
        };
        let col_f = fd(2);
        let col_g = fd(3);
        let mut j = [[0.0; 4]; 4];
        for r in 0..4 {
            j[r] = [col_re[r], col_im[r], col_f[r], col_g[r]];
        }
        j
    }
}

fn norm4(v: &Point) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves `J δ = -F`, falling back to a Levenberg–Marquardt step when `J`
/// is singular (e.g. on a continuous family of EPs).
fn newton_step(j: &[[f64; 4]; 4], rhs: &Point) -> Option<Point> {
    let jm = Mat4::from_real(*j);
    let b = rhs.map(|v| C64::new(-v, 0.0));
    if let Ok(x) = jm.solve(&b) {
        let step = x.map(|c| c.re);
        if step.iter().all(|v| v.is_finite()) && jm.invert().is_ok() {
            return Some(step);
        }
    }
    let mut jtj = [[0.0; 4]; 4];
    let mut jtf = [0.0; 4];
    for a in 0..4 {
        for b in 0..4 {
            jtj[a][b] = (0..4).map(|r| j[r][a] * j[r][b]).sum();
        }
        jtf[a] = -(0..4).map(|r| j[r][a] * rhs[r]).sum::<f64>();
    }
    let mu = 1e-10 * (0..4).map(|a| jtj[a][a]).sum::<f64>().max(f64::MIN_POSITIVE);
    for (a, row) in jtj.iter_mut().enumerate() {
        row[a] += mu;
    }
    Mat4::from_real(jtj)
        .solve(&jtf.map(|v| C64::new(v, 0.0)))
        .ok()
        .map(|x| x.map(|c| c.re))
        .filter(|s| s.iter().all(|v| v.is_finite()))
}

pub fn find_ep(params: &OscillatorParams, seed: EpSeed) -> Result<ExceptionalPoint, EpError> {
    find_ep_with(params, seed, &EpSolverOptions::default())
}

pub fn find_ep_with(
    params: &OscillatorParams,
    seed: EpSeed,
    opts: &EpSolverOptions,
) -> Result<ExceptionalPoint, EpError> {
    params.validate()?;
    if !(seed.omega.is_finite() && seed.f.is_finite() && seed.g.is_finite()) {
        return Err(EpError::NonFiniteSeed);
    }
    let scale = coefficient_scale(params, seed.f, seed.g);
    let res = Residual { params, scale };
    let mut x: Point = [seed.omega.re, seed.omega.im, seed.f, seed.g];
    let mut fx = res.eval(&x);
    let mut r = norm4(&fx);

    let finish = |x: &Point, iterations: usize| {
        let omega = C64::new(x[0], x[1]);
        let final_scale = coefficient_scale(params, x[2], x[3]);
        let (d, dd) = Residual {
            params,
            scale: final_scale,
        }
        .dets(x);
        ExceptionalPoint {
            omega_ep: omega,
            f_ep: x[2],
            g_ep: x[3],
            residual: (d.norm_sqr() + dd.norm_sqr()).sqrt() / final_scale,
            iterations,
            physical: omega.im < 0.0,
        }
    };

    let mut polish = 0;
    for it in 0..opts.max_iter {
        if r < opts.tol {
            // A couple of extra steps push the solution to the rounding floor.
            polish += 1;
            if polish > 2 {
                return Ok(finish(&x, it));
            }
        }
        let j = res.jacobian(&x);
        let Some(step) = newton_step(&j, &fx) else {
            break;
        };
        // Trust-region cap: near a family of EPs the Jacobian is nearly
        // singular and the raw step overshoots along the family.
        let cap = MAX_STEP_FRACTION * (1.0 + norm4(&x));
        let mut t = (cap / norm4(&step)).min(1.0);
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let cand: Point = [0, 1, 2, 3].map(|k| x[k] + t * step[k]);
            let fc = res.eval(&cand);
            let rc = norm4(&fc);
            if rc.is_finite() && rc < r {
                x = cand;
                fx = fc;
                r = rc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let last = finish(&x, opts.max_iter);
    if last.residual < opts.tol {
        return Ok(last);
    }
    Err(EpError::NoConvergence {
        iterations: opts.max_iter,
        last,
    })
}

fn coefficient_scale(params: &OscillatorParams, f: f64, g: f64) -> f64 {
    model::char_poly(params, f, g)
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}

/// Grid search for EP seeds over `f_range x g_range`, refined with
/// [`find_ep`]. At each grid node the closest pair of secular roots seeds
/// Newton when it is closer than `2 sqrt(|ω|max h)` (`h` the larger grid
/// spacing); an isolated EP splits its roots as the square root of the
/// parameter distance, so this catches every EP inside a grid cell.
/// Converged points outside the ranges are dropped, and duplicates within
/// `1e-6` in `(ω, f, g)` are merged.
pub fn scan_seeds(
    params: &OscillatorParams,
    f_range: (f64, f64),
    g_range: (f64, f64),
    grid_n: usize,
) -> Result<Vec<ExceptionalPoint>, EpError> {
    params.validate()?;
    let grid_n = grid_n.max(2);
    let axis = |(lo, hi): (f64, f64), i: usize| lo + (hi - lo) * i as f64 / (grid_n - 1) as f64;
    let h = ((f_range.1 - f_range.0).abs()).max((g_range.1 - g_range.0).abs()) / (grid_n - 1) as f64;
    let inside = |ep: &ExceptionalPoint| {
        let eps = 1e-12;
        ep.f_ep >= f_range.0.min(f_range.1) - eps
            && ep.f_ep <= f_range.0.max(f_range.1) + eps
            && ep.g_ep >= g_range.0.min(g_range.1) - eps
            && ep.g_ep <= g_range.0.max(g_range.1) + eps
    };

    let mut found: Vec<ExceptionalPoint> = Vec::new();
    for i in 0..grid_n {
        for j in 0..grid_n {
            let (f, g) = (axis(f_range, i), axis(g_range, j));
            let roots = model::eigenfrequencies(params, f, g);
            let wmax = roots.iter().map(|r| r.norm()).fold(0.0, f64::max);
            let threshold = 2.0 * (wmax.max(1.0) * h).sqrt();
            for a in 0..4 {
                for b in (a + 1)..4 {
                    if (roots[a] - roots[b]).norm() >= threshold {
                        continue;
                    }
                    let seed = EpSeed {
                        omega: (roots[a] + roots[b]) * 0.5,
                        f,
                        g,
                    };
                    if let Ok(ep) = find_ep(params, seed) {
                        if inside(&ep) && !found.iter().any(|o| o.distance(&ep) < EP_DEDUP_RADIUS) {
                            found.push(ep);
                        }
                    }
                }
            }
        }
    }
    Ok(found)
}

/// Preferred EP among several: decaying (`Im ω < 0`) with `Re ω > 0`,
/// then smallest `|f|`.
pub fn select_physical(eps: &[ExceptionalPoint]) -> Option<ExceptionalPoint> {
    let rank = |ep: &ExceptionalPoint| -> u8 {
        match (ep.omega_ep.im < 0.0, ep.omega_ep.re > 0.0) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        }
    };
    eps.iter()
        .copied()
        .min_by(|a, b| rank(a).cmp(&rank(b)).then(a.f_ep.abs().total_cmp(&b.f_ep.abs())))
}

/// Smallest distance between two of the four secular roots at the EP,
/// together with the pair's mean.
pub fn coalescing_pair(params: &OscillatorParams, ep: &ExceptionalPoint) -> (f64, C64) {
    let roots = model::eigenfrequencies(params, ep.f_ep, ep.g_ep);
    let mut best = (f64::INFINITY, roots[0]);
    for a in 0..4 {
        for b in (a + 1)..4 {
            let d = (roots[a] - roots[b]).norm();
            if d < best.0 {
                best = (d, (roots[a] + roots[b]) * 0.5);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> OscillatorParams {
        OscillatorParams::new(2.8, 3.0, 0.0, 0.0, 0.1, 0.02)
    }

    fn reference_seed() -> EpSeed {
        EpSeed {
            omega: C64::new(2.9, -0.05),
            f: 0.0,
            g: 0.08,
        }
    }

    #[test]
    fn finds_the_two_oscillator_ep() {
        let ep = find_ep(&reference(), reference_seed()).unwrap();
        assert!((ep.omega_ep - C64::new(2.9, -0.1)).norm() < 5e-3, "{ep:?}");
        assert!((ep.f_ep - 0.02).abs() < 5e-3);
        assert!((ep.g_ep - 0.1).abs() < 5e-3);
        assert!(ep.physical);
        assert!(ep.residual < EP_RESIDUAL_TOL);
        let d = model::secular_det(&reference(), ep.f_ep, ep.g_ep, ep.omega_ep);
        assert!(d.norm() < 1e-10 * coefficient_scale(&reference(), ep.f_ep, ep.g_ep));
    }

    #[test]
    fn symmetric_oscillators_land_on_the_analytic_family() {
        // ω1 = ω2: the antisymmetric mode alone is critically damped when
        // 4g² = ω0² + 2f, where it sits at ω = -2ig.
        let p = OscillatorParams::new(1.0, 1.0, 0.0, 0.0, 0.5, 0.0);
        let seed = EpSeed {
            omega: C64::new(0.0, -1.05),
            f: 0.1,
            g: 0.52,
        };
        let ep = find_ep(&p, seed).unwrap();
        assert!((4.0 * ep.g_ep * ep.g_ep - 1.0 - 2.0 * ep.f_ep).abs() < 1e-8, "{ep:?}");
        assert!((ep.omega_ep - C64::new(0.0, -2.0 * ep.g_ep)).norm() < 1e-6);
    }

    #[test]
    fn non_convergence_reports_last_iterate() {
        let opts = EpSolverOptions {
            max_iter: 1,
            ..Default::default()
        };
        match find_ep_with(&reference(), reference_seed(), &opts) {
            Err(EpError::NoConvergence { last, .. }) => assert!(last.residual.is_finite()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_non_finite_seed() {
        let seed = EpSeed {
            omega: C64::new(f64::NAN, 0.0),
            ..reference_seed()
        };
        assert_eq!(find_ep(&reference(), seed), Err(EpError::NonFiniteSeed));
    }

    #[test]
    fn scan_contains_the_ep() {
        let eps = scan_seeds(&reference(), (0.0, 0.1), (0.0, 0.2), 20).unwrap();
        let best = select_physical(&eps).unwrap();
        assert!((best.omega_ep - C64::new(2.9, -0.1)).norm() < 5e-3, "{eps:?}");
        assert!((best.f_ep - 0.02).abs() < 5e-3);
    }

    #[test]
    fn scan_of_empty_region() {
        let eps = scan_seeds(&reference(), (0.5, 0.6), (0.5, 0.6), 6).unwrap();
        assert!(eps.is_empty(), "{eps:?}");
    }

    #[test]
    fn scan_of_symmetric_pair_follows_the_family() {
        let p = OscillatorParams::new(1.0, 1.0, 0.0, 0.0, 0.5, 0.0);
        let eps = scan_seeds(&p, (0.0, 0.3), (0.45, 0.7), 8).unwrap();
        assert!(!eps.is_empty());
        for ep in &eps {
            assert!((4.0 * ep.g_ep * ep.g_ep - 1.0 - 2.0 * ep.f_ep).abs() < 1e-7, "{ep:?}");
        }
    }

    #[test]
    fn selection_prefers_decaying_positive_branch() {
        let mk = |re: f64, im: f64, f: f64| ExceptionalPoint {
            omega_ep: C64::new(re, im),
            f_ep: f,
            g_ep: 0.1,
            residual: 0.0,
            iterations: 0,
            physical: im < 0.0,
        };
        let list = [mk(-2.9, -0.1, 0.02), mk(2.9, 0.1, 0.0), mk(2.9, -0.1, 0.5), mk(2.9, -0.1, 0.02)];
        assert_eq!(select_physical(&list).unwrap(), list[3]);
    }
}
