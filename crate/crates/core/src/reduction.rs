//! Effective two-level model near an EP.
//!
//! The physical pair of eigenfrequencies (`Re ω > 0`) of `M(f_ref)` spans a
//! two-dimensional invariant subspace. With biorthonormal right vectors `R`
//! (4x2) and left vectors `L` (2x4) the effective model is
//!
//! ```text
//! h(f) = h0 + f v,   h0 = i L M0 R,   v = i L M1 R
//! ```
//!
//! The factor `i` maps eigenvalues `λ` of `M` to `ω = iλ`, so `h(f_ref)`
//! reproduces the physical pair exactly and nearby couplings to first order.
//! At `f_ref = 0` and `g > 0` the projected `h0` is diagonal up to rounding.

use std::fmt;

use thiserror::Error;

use crate::constants::{NILPOTENT_TOL, TRAJECTORY_EP_DISTANCE};
use crate::linalg::{self, LinalgError, Mat2, C64, I, ZERO};
use crate::model::{self, ModelError, OscillatorParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReductionError {
    #[error(transparent)]
    Params(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(
        "physical pair at f_ref = {f_ref} is separated by only {separation:.3e}; \
         choose an f_ref farther from the EP"
    )]
    IllConditioned { f_ref: f64, separation: f64 },
    #[error("discriminant vanishes identically: every coupling is degenerate")]
    DegenerateFamily,
    #[error("h(f) - ω I is not nilpotent (|n²|/|n|² = {ratio:.3e})")]
    NotAnEp { ratio: f64 },
}

/// Diagonal-similarity convention for the off-diagonal couplings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Gauge {
    /// `v12 = v21 = sqrt(v12 v21)` (principal branch).
    SymmetricDelta,
    /// Left as delivered by the biorthogonal projection.
    AsProjected,
}

impl Gauge {
    pub fn as_str(self) -> &'static str {
        match self {
            Gauge::SymmetricDelta => "symmetric-delta",
            Gauge::AsProjected => "as-projected",
        }
    }
}

impl fmt::Display for Gauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveModel {
    pub h0: Mat2,
    pub v: Mat2,
    pub f_ref: f64,
    pub gauge: Gauge,
}

impl EffectiveModel {
    /// `h0 + f v`; `f` may be complex so the model can sit exactly on its EP.
    pub fn h_at(&self, f: C64) -> Mat2 {
        self.h0 + self.v * f
    }

    pub fn eigenvalues(&self, f: C64) -> [C64; 2] {
        let e = linalg::eigen_2x2(&self.h_at(f));
        let mut pair = [e.lambda1, e.lambda2];
        pair.sort_by(|a, b| a.re.total_cmp(&b.re));
        pair
    }

    /// Applies `S^{-1} (.) S` with `S = diag(1, s)` to both matrices.
    fn similarity(&self, s: C64, gauge: Gauge) -> EffectiveModel {
        let t = |m: &Mat2| {
            let mut out = *m;
            out[(0, 1)] = m[(0, 1)] * s;
            out[(1, 0)] = m[(1, 0)] / s;
            out
        };
        EffectiveModel {
            h0: t(&self.h0),
            v: t(&self.v),
            f_ref: self.f_ref,
            gauge,
        }
    }

    /// The same model in the symmetric-delta gauge. Leaves the model
    /// unchanged (apart from the tag) when an off-diagonal coupling vanishes.
    pub fn symmetrized(&self) -> EffectiveModel {
        let (v12, v21) = (self.v[(0, 1)], self.v[(1, 0)]);
        if v12 == ZERO || v21 == ZERO {
            return EffectiveModel {
                gauge: Gauge::SymmetricDelta,
                ..*self
            };
        }
        let s = (v12 * v21).sqrt() / v12;
        self.similarity(s, Gauge::SymmetricDelta)
    }
}

/// Projects `M0` and `M1` onto the physical eigenpair of `M(f_ref)` at the
/// stored `g`.
pub fn reduce_to_two_level(
    params: &OscillatorParams,
    f_ref: f64,
    gauge: Gauge,
) -> Result<EffectiveModel, ReductionError> {
    let sm = model::build_system_matrices(params)?;
    let es = linalg::eig_4x4(&sm.at(f_ref))?;
    let mut idx: Vec<usize> = (0..4).collect();
    let omega = |k: usize| I * es.values[k];
    idx.sort_by(|&a, &b| omega(b).re.total_cmp(&omega(a).re));
    let mut pair = [idx[0], idx[1]];
    pair.sort_by(|&a, &b| omega(a).re.total_cmp(&omega(b).re));

    let separation = (es.values[pair[0]] - es.values[pair[1]]).norm();
    if !(separation > crate::constants::ILL_CONDITIONED_SEPARATION) {
        return Err(ReductionError::IllConditioned { f_ref, separation });
    }

    let project = |m: &linalg::Mat4| {
        let mut out = Mat2::zeros();
        for (a, &ka) in pair.iter().enumerate() {
            let mr: Vec<[C64; 4]> = pair.iter().map(|&kb| m.mul_vec(&es.right_vector(kb))).collect();
            for b in 0..2 {
                out[(a, b)] = I * linalg::dot(&es.left_vector(ka), &mr[b]);
            }
        }
        out
    };
    let projected = EffectiveModel {
        h0: project(&sm.m0),
        v: project(&sm.m1),
        f_ref,
        gauge: Gauge::AsProjected,
    };
    Ok(match gauge {
        Gauge::AsProjected => projected,
        Gauge::SymmetricDelta => projected.symmetrized(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EpKind {
    /// Defective coalescence (Jordan block).
    Exceptional,
    /// Degeneracy with vanishing off-diagonal couplings: `h` is a multiple
    /// of the identity there.
    Diabolic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveEp {
    pub f_ep: C64,
    pub omega_ep: C64,
    pub kind: EpKind,
}

/// Coefficients `(A, B, C)` of the eigenvalue discriminant
/// `(tr h)² - 4 det h = A f² + B f + C`.
fn discriminant_coefficients(m: &EffectiveModel) -> (C64, C64, C64) {
    let (h, v) = (&m.h0, &m.v);
    let a = h[(0, 0)] - h[(1, 1)];
    let b = v[(0, 0)] - v[(1, 1)];
    let qa = b * b + v[(0, 1)] * v[(1, 0)] * 4.0;
    let qb = a * b * 2.0 + (h[(0, 1)] * v[(1, 0)] + v[(0, 1)] * h[(1, 0)]) * 4.0;
    let qc = a * a + h[(0, 1)] * h[(1, 0)] * 4.0;
    (qa, qb, qc)
}

/// Couplings where the two eigenvalues of `h0 + f v` coincide.
pub fn ep_of_effective(model: &EffectiveModel) -> Result<Vec<EffectiveEp>, ReductionError> {
    let (qa, qb, qc) = discriminant_coefficients(model);
    let scale = model.h0.norm().max(model.v.norm()).max(f64::MIN_POSITIVE);
    let tiny = 1e-14 * scale * scale;
    let roots: Vec<C64> = if qa.norm() > tiny {
        linalg::poly_roots(&[qa, qb, qc])?
    } else if qb.norm() > tiny {
        vec![-qc / qb]
    } else if qc.norm() > tiny {
        Vec::new()
    } else {
        return Err(ReductionError::DegenerateFamily);
    };

    let mut out: Vec<EffectiveEp> = Vec::new();
    for f_ep in roots {
        let h = model.h_at(f_ep);
        let omega_ep = h.trace() * 0.5;
        let off = h[(0, 1)].norm().max(h[(1, 0)].norm());
        let kind = if off < 1e-10 * scale.max(1.0) {
            EpKind::Diabolic
        } else {
            EpKind::Exceptional
        };
        let duplicate = out
            .iter()
            .any(|o| (o.f_ep - f_ep).norm() < 1e-6 * f_ep.norm().max(1.0));
        if !(kind == EpKind::Diabolic && duplicate) {
            out.push(EffectiveEp { f_ep, omega_ep, kind });
        }
    }
    Ok(out)
}

/// Closed-form EP couplings for a diagonal `h0 = diag(Ω1, Ω2)`:
/// `f = -i(Ω1 - Ω2) / (i(ε1 - ε2) ± 2 sqrt(δ1 δ2))`. `None` when `h0` has
/// off-diagonal entries above `1e-10 |h0|`.
pub fn ep_closed_form(model: &EffectiveModel) -> Option<[C64; 2]> {
    let (h, v) = (&model.h0, &model.v);
    if h[(0, 1)].norm().max(h[(1, 0)].norm()) > 1e-10 * h.norm() {
        return None;
    }
    let num = -I * (h[(0, 0)] - h[(1, 1)]);
    let de = I * (v[(0, 0)] - v[(1, 1)]);
    let root = (v[(0, 1)] * v[(1, 0)]).sqrt() * 2.0;
    Some([num / (de + root), num / (de - root)])
}

/// Mean eigenvalue and nilpotent part `n = h(f_ep) - ω_EP I`.
pub fn nilpotent_at_ep(model: &EffectiveModel, f_ep: C64) -> Result<(C64, Mat2), ReductionError> {
    let h = model.h_at(f_ep);
    let omega_ep = h.trace() * 0.5;
    let n = h - Mat2::identity() * omega_ep;
    let nn = n.norm();
    if nn == 0.0 {
        return Ok((omega_ep, n));
    }
    let ratio = (n * n).norm() / (nn * nn);
    if ratio.is_finite() && ratio < NILPOTENT_TOL {
        Ok((omega_ep, n))
    } else {
        Err(ReductionError::NotAnEp { ratio })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceKind {
    Full4x4,
    Reduced2x2,
}

impl SourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Full4x4 => "full-4x4",
            SourceKind::Reduced2x2 => "reduced-2x2",
        }
    }
}

/// What a trajectory is computed from. The full problem uses the `g`
/// stored in the parameters.
#[derive(Clone, Copy, Debug)]
pub enum TrajectorySource<'a> {
    Full(&'a OscillatorParams),
    Reduced(&'a EffectiveModel),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub f_values: Vec<f64>,
    pub branch_a: Vec<C64>,
    pub branch_b: Vec<C64>,
    /// Points where the branches are closer than the tracking threshold.
    pub near_ep: Vec<bool>,
    pub source: SourceKind,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.f_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f_values.is_empty()
    }

    /// Smallest inter-branch distance and the grid index where it occurs.
    pub fn closest_approach(&self) -> (usize, f64) {
        self.branch_a
            .iter()
            .zip(&self.branch_b)
            .map(|(a, b)| (a - b).norm())
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, d)| if d < best.1 { (i, d) } else { best })
    }
}

/// Eigenfrequency branches over a uniform grid in `f`, tracked by nearest
/// neighbour. Where the branches are closer than `1e-3` the prediction
/// switches to quadratic extrapolation from the three previous points.
pub fn eigen_trajectory(
    source: TrajectorySource<'_>,
    f_min: f64,
    f_max: f64,
    n_points: usize,
) -> Result<Trajectory, ReductionError> {
    let (raw_at, kind): (Box<dyn Fn(f64) -> [C64; 2]>, SourceKind) = match source {
        TrajectorySource::Full(p) => {
            p.validate()?;
            (
                Box::new(move |f| model::physical_pair(p, f, p.g)),
                SourceKind::Full4x4,
            )
        }
        TrajectorySource::Reduced(m) => (
            Box::new(move |f| m.eigenvalues(C64::new(f, 0.0))),
            SourceKind::Reduced2x2,
        ),
    };
    let n = if f_min == f_max { 1 } else { n_points.max(2) };
    let f_values: Vec<f64> = (0..n)
        .map(|i| {
            if n == 1 {
                f_min
            } else {
                f_min + (f_max - f_min) * i as f64 / (n - 1) as f64
            }
        })
        .collect();
    let raw: Vec<[C64; 2]> = f_values.iter().map(|&f| raw_at(f)).collect();
    let (branch_a, branch_b, near_ep) = track(&raw);
    Ok(Trajectory {
        f_values,
        branch_a,
        branch_b,
        near_ep,
        source: kind,
    })
}

type Tracked = (Vec<C64>, Vec<C64>, Vec<bool>);

fn track(raw: &[[C64; 2]]) -> Tracked {
    let mut a: Vec<C64> = Vec::with_capacity(raw.len());
    let mut b: Vec<C64> = Vec::with_capacity(raw.len());
    let mut near = Vec::with_capacity(raw.len());
    for (i, pair) in raw.iter().enumerate() {
        if i == 0 {
            a.push(pair[0]);
            b.push(pair[1]);
        } else {
            let close = near[i - 1];
            let predict = |y: &[C64]| {
                if close && i >= 3 {
                    y[i - 1] * 3.0 - y[i - 2] * 3.0 + y[i - 3]
                } else {
                    y[i - 1]
                }
            };
            let (pa, pb) = (predict(&a), predict(&b));
            let keep = (pair[0] - pa).norm() + (pair[1] - pb).norm();
            let swap = (pair[1] - pa).norm() + (pair[0] - pb).norm();
            if swap < keep {
                a.push(pair[1]);
                b.push(pair[0]);
            } else {
                a.push(pair[0]);
                b.push(pair[1]);
            }
        }
        near.push((a[i] - b[i]).norm() < TRAJECTORY_EP_DISTANCE);
    }
    (a, b, near)
}

pub const TRAJECTORY_CSV_HEADER: &str = "f,re_omega_a,im_omega_a,re_omega_b,im_omega_b,source";

/// Rows of all trajectories under a single header.
pub fn trajectories_to_csv(trajectories: &[Trajectory]) -> String {
    let mut out = String::from(TRAJECTORY_CSV_HEADER);
    out.push('\n');
    for t in trajectories {
        for i in 0..t.len() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
                t.f_values[i],
                t.branch_a[i].re,
                t.branch_a[i].im,
                t.branch_b[i].re,
                t.branch_b[i].im,
                t.source.as_str()
            ));
        }
    }
    out
}
