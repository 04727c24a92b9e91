//! Pole-decomposed Green's function and T-matrix of the effective model.
//!
//! For simple eigenvalues `λ1 != λ2` of `h(f)`,
//!
//! ```text
//! G(E) = r1 / (E - λ1) + r2 / (E - λ2),   r_i = (h - λ_j) / (λ_i - λ_j)
//! ```
//!
//! At an EP the residues blow up and are replaced by the exact double-pole form
//!
//! ```text
//! G(E) = I / (E - ω) + n / (E - ω)²,   n = h - ω I,  n² = 0
//! ```
//!
//! The T-matrix is `T = v + v G v`; its pole terms are `v r_i v / (E - λ_i)`,
//! or `v v / (E - ω)` and `v n v / (E - ω)²` at the EP.

use thiserror::Error;

use crate::constants::{POLE_HIT_DISTANCE, POLE_SWITCH_SEPARATION, TOUCHES_ZERO_RATIO};
use crate::linalg::{self, Mat2, C64};
use crate::reduction::EffectiveModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScatteringError {
    #[error("energy {e} is within {distance:.3e} of a pole")]
    AtPole { e: C64, distance: f64 },
    #[error("invalid energy grid: {0}")]
    InvalidGrid(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PoleDecomposition {
    /// Eigenvalues ordered by real part, with their spectral projectors.
    TwoSimplePoles { lambda: [C64; 2], residues: [Mat2; 2] },
    /// Coalesced pair: identity residue plus nilpotent second-order residue.
    EpDoublePole { omega_ep: C64, n: Mat2 },
}

impl PoleDecomposition {
    pub fn poles(&self) -> [C64; 2] {
        match *self {
            PoleDecomposition::TwoSimplePoles { lambda, .. } => lambda,
            PoleDecomposition::EpDoublePole { omega_ep, .. } => [omega_ep, omega_ep],
        }
    }

    pub fn pole_distance(&self, e: C64) -> f64 {
        let [a, b] = self.poles();
        (e - a).norm().min((e - b).norm())
    }

    /// `G(E)` assembled from the decomposition.
    pub fn greens(&self, e: C64) -> Mat2 {
        match *self {
            PoleDecomposition::TwoSimplePoles { lambda, residues } => {
                residues[0] * (1.0 / (e - lambda[0])) + residues[1] * (1.0 / (e - lambda[1]))
            }
            PoleDecomposition::EpDoublePole { omega_ep, n } => {
                let d = 1.0 / (e - omega_ep);
                Mat2::identity() * d + n * (d * d)
            }
        }
    }
}

pub fn greens_decomposition(model: &EffectiveModel, f: C64) -> PoleDecomposition {
    let h = model.h_at(f);
    let eig = linalg::eigen_2x2(&h);
    let mut lambda = [eig.lambda1, eig.lambda2];
    lambda.sort_by(|a, b| a.re.total_cmp(&b.re));
    if (lambda[0] - lambda[1]).norm() <= POLE_SWITCH_SEPARATION {
        return double_pole_form(model, f);
    }
    let id = Mat2::identity();
    let r1 = (h - id * lambda[1]) * (1.0 / (lambda[0] - lambda[1]));
    let r2 = (h - id * lambda[0]) * (1.0 / (lambda[1] - lambda[0]));
    PoleDecomposition::TwoSimplePoles {
        lambda,
        residues: [r1, r2],
    }
}

/// The EP form `(ω, n = h - ω I)` with `ω = tr h / 2`, whatever the pole
/// separation. Exact only where `n² = 0`; elsewhere its error in `G` is of
/// order `n² / (E - ω)³`.
pub fn double_pole_form(model: &EffectiveModel, f: C64) -> PoleDecomposition {
    let h = model.h_at(f);
    let omega_ep = h.trace() * 0.5;
    PoleDecomposition::EpDoublePole {
        omega_ep,
        n: h - Mat2::identity() * omega_ep,
    }
}

/// `T(E)` split into its two pole terms and the constant background `v`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoleTerms {
    /// First pole, or the first-order term at the EP.
    pub pole1: Mat2,
    /// Second pole, or the second-order term at the EP.
    pub pole2: Mat2,
    pub background: Mat2,
}

impl PoleTerms {
    pub fn total(&self) -> Mat2 {
        self.pole1 + self.pole2 + self.background
    }
}

pub fn pole_terms(model: &EffectiveModel, f: C64, e: C64) -> Result<PoleTerms, ScatteringError> {
    let dec = greens_decomposition(model, f);
    pole_terms_of(model, &dec, e)
}

fn pole_terms_of(
    model: &EffectiveModel,
    dec: &PoleDecomposition,
    e: C64,
) -> Result<PoleTerms, ScatteringError> {
    let distance = dec.pole_distance(e);
    if !(distance > POLE_HIT_DISTANCE) {
        return Err(ScatteringError::AtPole { e, distance });
    }
    let v = model.v;
    let (pole1, pole2) = match *dec {
        PoleDecomposition::TwoSimplePoles { lambda, residues } => (
            v * residues[0] * v * (1.0 / (e - lambda[0])),
            v * residues[1] * v * (1.0 / (e - lambda[1])),
        ),
        PoleDecomposition::EpDoublePole { omega_ep, n } => {
            let d = 1.0 / (e - omega_ep);
            (v * v * d, v * n * v * (d * d))
        }
    };
    Ok(PoleTerms {
        pole1,
        pole2,
        background: v,
    })
}

/// `v + v G(E) v`.
pub fn t_matrix(model: &EffectiveModel, f: C64, e: C64) -> Result<Mat2, ScatteringError> {
    pole_terms(model, f, e).map(|t| t.total())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanOptions {
    /// Add the constant `v` to `T` in `t11_sq` and `t22_sq`.
    pub include_background: bool,
    /// Real factor applied to `T` (cross sections scale with its square).
    pub scale: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            include_background: false,
            scale: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossSectionSample {
    pub e: f64,
    pub t11_sq: f64,
    pub t22_sq: f64,
    pub pole1_22_sq: f64,
    pub pole2_22_sq: f64,
    /// `2 Re[T2_22 conj(T1_22)]`.
    pub interference_22: f64,
    pub background_included: bool,
    /// False when `e` fell on a pole; the numeric fields are then NaN.
    pub valid: bool,
}

pub fn cross_section_scan(
    model: &EffectiveModel,
    f: C64,
    e_min: f64,
    e_max: f64,
    n_points: usize,
    opts: ScanOptions,
) -> Result<Vec<CrossSectionSample>, ScatteringError> {
    if !(e_min < e_max) || !e_min.is_finite() || !e_max.is_finite() {
        return Err(ScatteringError::InvalidGrid(format!(
            "need finite e_min < e_max, got [{e_min}, {e_max}]"
        )));
    }
    if n_points < 2 {
        return Err(ScatteringError::InvalidGrid(format!("n_points = {n_points} < 2")));
    }
    let dec = greens_decomposition(model, f);
    let s = opts.scale;
    let samples = (0..n_points)
        .map(|i| {
            let e = e_min + (e_max - e_min) * i as f64 / (n_points - 1) as f64;
            match pole_terms_of(model, &dec, C64::new(e, 0.0)) {
                Ok(t) => {
                    let mut tm = t.pole1 + t.pole2;
                    if opts.include_background {
                        tm = tm + t.background;
                    }
                    let (p1, p2) = (t.pole1[(1, 1)] * s, t.pole2[(1, 1)] * s);
                    CrossSectionSample {
                        e,
                        t11_sq: (tm[(0, 0)] * s).norm_sqr(),
                        t22_sq: (tm[(1, 1)] * s).norm_sqr(),
                        pole1_22_sq: p1.norm_sqr(),
                        pole2_22_sq: p2.norm_sqr(),
                        interference_22: 2.0 * (p2 * p1.conj()).re,
                        background_included: opts.include_background,
                        valid: true,
                    }
                }
                Err(_) => CrossSectionSample {
                    e,
                    t11_sq: f64::NAN,
                    t22_sq: f64::NAN,
                    pole1_22_sq: f64::NAN,
                    pole2_22_sq: f64::NAN,
                    interference_22: f64::NAN,
                    background_included: opts.include_background,
                    valid: false,
                },
            }
        })
        .collect();
    Ok(samples)
}

pub const SCAN_CSV_HEADER: &str = "e,t11_sq,t22_sq,pole1_22_sq,pole2_22_sq,interference_22,valid";

pub fn scan_to_csv(samples: &[CrossSectionSample]) -> String {
    let mut out = String::from(SCAN_CSV_HEADER);
    out.push('\n');
    for s in samples {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
            s.e,
            s.t11_sq,
            s.t22_sq,
            s.pole1_22_sq,
            s.pole2_22_sq,
            s.interference_22,
            u8::from(s.valid)
        ));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Minimum {
    pub e: f64,
    pub value: f64,
    pub touches_zero: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Extrema {
    /// `(E, value)` of each interior maximum, in grid order.
    pub peaks: Vec<(f64, f64)>,
    pub minima: Vec<Minimum>,
}

impl Extrema {
    pub fn largest_peak(&self) -> f64 {
        self.peaks.iter().map(|p| p.1).fold(0.0, f64::max)
    }
}

/// Vertex of the parabola through three points.
fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let a = (d2 - d1) / (x[2] - x[0]);
    if a == 0.0 || !a.is_finite() {
        return (x[1], y[1]);
    }
    let b = d1 - a * (x[0] + x[1]);
    let xv = (-b / (2.0 * a)).clamp(x[0], x[2]);
    let yv = y[1] + (xv - x[1]) * (d1 + a * (xv - x[0]));
    (xv, yv)
}

/// Interior local extrema of `ys` over `xs`, refined parabolically.
/// Non-finite samples break the sequence and are skipped.
pub fn find_extrema_xy(xs: &[f64], ys: &[f64]) -> Extrema {
    let mut ex = Extrema::default();
    let mut raw_min = Vec::new();
    for i in 1..ys.len().saturating_sub(1) {
        let (a, b, c) = (ys[i - 1], ys[i], ys[i + 1]);
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            continue;
        }
        let px = [xs[i - 1], xs[i], xs[i + 1]];
        if b > a && b >= c {
            ex.peaks.push(parabola_vertex(px, [a, b, c]));
        } else if b < a && b <= c {
            raw_min.push(parabola_vertex(px, [a, b, c]));
        }
    }
    let top = ex.largest_peak();
    ex.minima = raw_min
        .into_iter()
        .map(|(e, value)| Minimum {
            e,
            value,
            touches_zero: value < TOUCHES_ZERO_RATIO * top,
        })
        .collect();
    ex
}

/// Extrema of `|T22|²` over a scan.
pub fn find_extrema(samples: &[CrossSectionSample]) -> Extrema {
    let xs: Vec<f64> = samples.iter().map(|s| s.e).collect();
    let ys: Vec<f64> = samples
        .iter()
        .map(|s| if s.valid { s.t22_sq } else { f64::NAN })
        .collect();
    find_extrema_xy(&xs, &ys)
}
