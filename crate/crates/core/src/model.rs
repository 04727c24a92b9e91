//! Driven two-oscillator system.
//!
//! State `(p1, p2, q1, q2)` evolves as `d/dt x = M x + (c1, c2, 0, 0) e^{iωt}`
//! with
//!
//! ```text
//!     | -2g-2k1   2g       -f-ω1²   f      |
//! M = |  2g      -2g-2k2    f      -f-ω2²  |  = M0 + f M1
//!     |  1        0         0       0      |
//!     |  0        1         0       0      |
//! ```
//!
//! Complex eigenfrequencies follow the `e^{-iωt}` convention: an eigenvalue
//! `λ` of `M` corresponds to `ω = iλ`, so damped modes sit in the lower half
//! plane. The secular function is `D(ω) = det(-iω I - M)`; since
//! `(-i)^4 = 1` its polynomial in `ω` is monic. Its roots are the mirror
//! images `-ω̄` of the roots of `det(iω I - M)`, so physical content is
//! unchanged; only the half plane in which resonances are reported differs.
//!
//! The stationary response to the real drive frequency keeps the `e^{iωt}`
//! form of the equations of motion: `x = (iω - M)^{-1} c`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, Mat4, C64, I, ONE, ZERO};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("parameter file: {0}")]
    Schema(String),
    #[error("drive frequency is on an undamped resonance (iω - M is singular)")]
    Singular,
}

/// Physical inputs of the two driven oscillators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "ParamsFile", into = "ParamsFile")]
pub struct OscillatorParams {
    pub omega1: f64,
    pub omega2: f64,
    pub k1: f64,
    pub k2: f64,
    /// Damping of the coupling.
    pub g: f64,
    /// Coupling spring constant.
    pub f: f64,
    pub c1: C64,
    pub c2: C64,
}

/// Flat on-disk layout of [`OscillatorParams`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    omega1: f64,
    omega2: f64,
    k1: f64,
    k2: f64,
    g: f64,
    f: f64,
    c1_re: f64,
    c1_im: f64,
    c2_re: f64,
    c2_im: f64,
}

impl From<ParamsFile> for OscillatorParams {
    fn from(p: ParamsFile) -> Self {
        OscillatorParams {
            omega1: p.omega1,
            omega2: p.omega2,
            k1: p.k1,
            k2: p.k2,
            g: p.g,
            f: p.f,
            c1: C64::new(p.c1_re, p.c1_im),
            c2: C64::new(p.c2_re, p.c2_im),
        }
    }
}

impl From<OscillatorParams> for ParamsFile {
    fn from(p: OscillatorParams) -> Self {
        ParamsFile {
            omega1: p.omega1,
            omega2: p.omega2,
            k1: p.k1,
            k2: p.k2,
            g: p.g,
            f: p.f,
            c1_re: p.c1.re,
            c1_im: p.c1.im,
            c2_re: p.c2.re,
            c2_im: p.c2.im,
        }
    }
}

impl OscillatorParams {
    /// Undriven oscillators with the given frequencies and damping.
    pub fn new(omega1: f64, omega2: f64, k1: f64, k2: f64, g: f64, f: f64) -> Self {
        OscillatorParams {
            omega1,
            omega2,
            k1,
            k2,
            g,
            f,
            c1: ZERO,
            c2: ZERO,
        }
    }

    pub fn with_drive(mut self, c1: C64, c2: C64) -> Self {
        self.c1 = c1;
        self.c2 = c2;
        self
    }

    pub fn with_coupling(mut self, f: f64, g: f64) -> Self {
        self.f = f;
        self.g = g;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let reals = [
            ("omega1", self.omega1),
            ("omega2", self.omega2),
            ("k1", self.k1),
            ("k2", self.k2),
            ("g", self.g),
            ("f", self.f),
            ("c1_re", self.c1.re),
            ("c1_im", self.c1.im),
            ("c2_re", self.c2.re),
            ("c2_im", self.c2.im),
        ];
        if let Some((name, _)) = reals.iter().find(|(_, x)| !x.is_finite()) {
            return Err(ModelError::InvalidParams(format!("{name} is not finite")));
        }
        if self.omega1 <= 0.0 || self.omega2 <= 0.0 {
            return Err(ModelError::InvalidParams(
                "omega1 and omega2 must be positive".into(),
            ));
        }
        if self.k1 < 0.0 || self.k2 < 0.0 || self.g < 0.0 {
            return Err(ModelError::InvalidParams(
                "k1, k2 and g must be non-negative".into(),
            ));
        }
        if self.k1 >= self.omega1 || self.k2 >= self.omega2 {
            return Err(ModelError::InvalidParams(
                "k_j must be below omega_j (overdamped oscillator)".into(),
            ));
        }
        Ok(())
    }

    /// Parses the flat JSON parameter object and validates it.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let params: OscillatorParams =
            serde_json::from_str(text).map_err(|e| ModelError::Schema(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemMatrices {
    pub m0: Mat4,
    pub m1: Mat4,
}

impl SystemMatrices {
    /// `M0 + f M1`.
    pub fn at(&self, f: f64) -> Mat4 {
        self.m0 + self.m1 * f
    }

    pub fn at_complex(&self, f: C64) -> Mat4 {
        self.m0 + self.m1 * f
    }
}

fn matrices_unchecked(p: &OscillatorParams, g: f64) -> SystemMatrices {
    let (w1s, w2s) = (p.omega1 * p.omega1, p.omega2 * p.omega2);
    let m0 = Mat4::from_real([
        [-2.0 * g - 2.0 * p.k1, 2.0 * g, -w1s, 0.0],
        [2.0 * g, -2.0 * g - 2.0 * p.k2, 0.0, -w2s],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
    ]);
    let m1 = Mat4::from_real([
        [0.0, 0.0, -1.0, 1.0],
        [0.0, 0.0, 1.0, -1.0],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
    ]);
    SystemMatrices { m0, m1 }
}

pub fn build_system_matrices(params: &OscillatorParams) -> Result<SystemMatrices, ModelError> {
    params.validate()?;
    Ok(matrices_unchecked(params, params.g))
}

/// `M(f)` with `f` and `g` overriding the stored values. The EP search
/// moves `g` freely, so only the frequencies and `k_j` are taken from
/// `params`.
pub fn system_matrix(params: &OscillatorParams, f: f64, g: f64) -> Mat4 {
    matrices_unchecked(params, g).at(f)
}

/// `D(ω) = det(-iω I - M(f, g))` by direct LU.
pub fn secular_det(params: &OscillatorParams, f: f64, g: f64, omega: C64) -> C64 {
    let m = system_matrix(params, f, g);
    (Mat4::identity() * (-I * omega) - m).det()
}

/// Coefficients of `D(ω)` in descending powers of `ω`; monic.
pub fn char_poly(params: &OscillatorParams, f: f64, g: f64) -> [C64; 5] {
    let m = system_matrix(params, f, g);
    let in_lambda = linalg::char_poly(&m);
    // D(ω) = p(λ = -iω): the coefficient of ω^{4-k} picks up (-i)^{4-k}.
    let mut out = [ZERO; 5];
    let mut factor = ONE;
    for k in (0..5).rev() {
        out[k] = in_lambda[k] * factor;
        factor *= -I;
    }
    out
}

/// `dD/dω` from the differentiated coefficients.
pub fn det_derivative(params: &OscillatorParams, f: f64, g: f64, omega: C64) -> C64 {
    let p = char_poly(params, f, g);
    linalg::poly_eval(&linalg::poly_derivative(&p), omega)
}

pub fn det_second_derivative(params: &OscillatorParams, f: f64, g: f64, omega: C64) -> C64 {
    let p = char_poly(params, f, g);
    let d1 = linalg::poly_derivative(&p);
    linalg::poly_eval(&linalg::poly_derivative(&d1), omega)
}

/// The four complex eigenfrequencies `ω = iλ` at `(f, g)`.
pub fn eigenfrequencies(params: &OscillatorParams, f: f64, g: f64) -> [C64; 4] {
    let roots = linalg::poly_roots(&char_poly(params, f, g)).expect("monic quartic");
    [roots[0], roots[1], roots[2], roots[3]]
}

/// The two eigenfrequencies with positive real part, ordered by real part.
/// The other two are their reflections `-ω̄`.
pub fn physical_pair(params: &OscillatorParams, f: f64, g: f64) -> [C64; 2] {
    let mut all = eigenfrequencies(params, f, g);
    all.sort_by(|a, b| b.re.total_cmp(&a.re));
    let mut pair = [all[0], all[1]];
    pair.sort_by(|a, b| a.re.total_cmp(&b.re));
    pair
}

/// Momenta and coordinates of both particles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateVector {
    pub p1: C64,
    pub p2: C64,
    pub q1: C64,
    pub q2: C64,
}

impl StateVector {
    pub const ZERO: StateVector = StateVector {
        p1: ZERO,
        p2: ZERO,
        q1: ZERO,
        q2: ZERO,
    };

    pub fn from_array(x: [C64; 4]) -> Self {
        StateVector {
            p1: x[0],
            p2: x[1],
            q1: x[2],
            q2: x[3],
        }
    }

    pub fn to_array(self) -> [C64; 4] {
        [self.p1, self.p2, self.q1, self.q2]
    }

    pub fn norm(&self) -> f64 {
        linalg::vec_norm(&self.to_array())
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

/// Amplitude of the stationary response `(iω - M)^{-1} (c1, c2, 0, 0)`.
pub fn stationary_solution(
    params: &OscillatorParams,
    omega_drive: f64,
) -> Result<StateVector, ModelError> {
    let m = build_system_matrices(params)?.at(params.f);
    let a = Mat4::identity() * (I * omega_drive) - m;
    let inv = a.invert().map_err(|_| ModelError::Singular)?;
    let x = inv.mul_vec(&[params.c1, params.c2, ZERO, ZERO]);
    Ok(StateVector::from_array(x))
}
