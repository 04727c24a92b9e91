//! Direct RK4 integration of `dx/dt = M x + (c1, c2, 0, 0) e^{iωt}`.
//!
//! Used as an independent check of the analytic stationary response.

use std::f64::consts::PI;

use thiserror::Error;

use crate::constants::{SETTLE_EFOLDS, STABILITY_GUARD};
use crate::linalg::{Mat4, C64, ZERO};
use crate::model::{self, ModelError, OscillatorParams, StateVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimeDomainError {
    #[error(transparent)]
    Params(#[from] ModelError),
    #[error("dt = {dt} violates the stability guard dt |M|inf < {guard} (dt must be below {limit:.3e})")]
    StepSize { dt: f64, limit: f64, guard: f64 },
    #[error("system is not damped: an eigenfrequency has Im ω = {max_im:.3e} >= 0")]
    NotDecaying { max_im: f64 },
    #[error("invalid time span: {0}")]
    InvalidTime(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegrationResult {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub omega_drive: f64,
}

impl IntegrationResult {
    pub fn last(&self) -> StateVector {
        *self.states.last().expect("at least the initial state")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,re_p1,im_p1,re_p2,im_p2,re_q1,im_q1,re_q2,im_q2\n");
        for (t, s) in self.times.iter().zip(&self.states) {
            out.push_str(&format!("{t:.16e}"));
            for z in s.to_array() {
                out.push_str(&format!(",{:.16e},{:.16e}", z.re, z.im));
            }
            out.push('\n');
        }
        out
    }
}

struct Rk4 {
    m: Mat4,
    drive: [C64; 4],
    omega: f64,
}

impl Rk4 {
    fn new(params: &OscillatorParams, omega: f64, dt: f64) -> Result<Self, TimeDomainError> {
        let m = model::build_system_matrices(params)?.at(params.f);
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(TimeDomainError::InvalidTime(format!("dt = {dt}")));
        }
        let limit = STABILITY_GUARD / m.norm_inf();
        if !(dt < limit) {
            return Err(TimeDomainError::StepSize {
                dt,
                limit,
                guard: STABILITY_GUARD,
            });
        }
        Ok(Rk4 {
            m,
            drive: [params.c1, params.c2, ZERO, ZERO],
            omega,
        })
    }

    fn rhs(&self, t: f64, x: &[C64; 4]) -> [C64; 4] {
        let phase = C64::from_polar(1.0, self.omega * t);
        let mx = self.m.mul_vec(x);
        [0, 1, 2, 3].map(|k| mx[k] + self.drive[k] * phase)
    }

    fn step(&self, t: f64, x: &[C64; 4], h: f64) -> [C64; 4] {
        let add = |a: &[C64; 4], b: &[C64; 4], s: f64| [0, 1, 2, 3].map(|k| a[k] + b[k] * s);
        let k1 = self.rhs(t, x);
        let k2 = self.rhs(t + 0.5 * h, &add(x, &k1, 0.5 * h));
        let k3 = self.rhs(t + 0.5 * h, &add(x, &k2, 0.5 * h));
        let k4 = self.rhs(t + h, &add(x, &k3, h));
        [0, 1, 2, 3].map(|k| x[k] + (k1[k] + (k2[k] + k3[k]) * 2.0 + k4[k]) * (h / 6.0))
    }
}

/// Number of equal steps of size at most `dt` covering `span`.
fn step_count(span: f64, dt: f64) -> usize {
    ((span / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Classical RK4 from `t = 0` to `t_end`. The step is shrunk slightly, if
/// needed, so that `t_end` is hit exactly.
pub fn integrate(
    params: &OscillatorParams,
    omega_drive: f64,
    t_end: f64,
    dt: f64,
    initial: StateVector,
) -> Result<IntegrationResult, TimeDomainError> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(TimeDomainError::InvalidTime(format!("t_end = {t_end}")));
    }
    let rk = Rk4::new(params, omega_drive, dt)?;
    let n = step_count(t_end, dt);
    let h = t_end / n as f64;
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut x = initial.to_array();
    times.push(0.0);
    states.push(initial);
    for i in 0..n {
        x = rk.step(i as f64 * h, &x, h);
        times.push((i + 1) as f64 * h);
        states.push(StateVector::from_array(x));
    }
    Ok(IntegrationResult {
        times,
        states,
        omega_drive,
    })
}

/// Smallest `|Im ω|` over all eigenfrequencies at the stored `f` and `g`:
/// the amplitude decay rate of the slowest transient.
pub fn slowest_decay_rate(params: &OscillatorParams) -> Result<f64, TimeDomainError> {
    params.validate()?;
    let max_im = model::eigenfrequencies(params, params.f, params.g)
        .iter()
        .map(|w| w.im)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(max_im < 0.0) {
        return Err(TimeDomainError::NotDecaying { max_im });
    }
    Ok(-max_im)
}

/// `40` e-folding times of the slowest transient.
pub fn default_settle_time(params: &OscillatorParams) -> Result<f64, TimeDomainError> {
    Ok(SETTLE_EFOLDS / slowest_decay_rate(params)?)
}

/// Integrates from rest to `t_settle`, then returns the largest relative
/// deviation from the analytic stationary state over one drive period.
/// With zero drive the absolute norm of the state is returned instead.
pub fn stationary_residual(
    params: &OscillatorParams,
    omega_drive: f64,
    t_settle: f64,
    dt: f64,
) -> Result<f64, TimeDomainError> {
    stationary_residual_from(params, omega_drive, t_settle, dt, StateVector::ZERO)
}

pub fn stationary_residual_from(
    params: &OscillatorParams,
    omega_drive: f64,
    t_settle: f64,
    dt: f64,
    initial: StateVector,
) -> Result<f64, TimeDomainError> {
    slowest_decay_rate(params)?;
    if !(t_settle > 0.0) || !t_settle.is_finite() {
        return Err(TimeDomainError::InvalidTime(format!("t_settle = {t_settle}")));
    }
    if !(omega_drive > 0.0) || !omega_drive.is_finite() {
        return Err(TimeDomainError::InvalidTime(format!(
            "drive frequency {omega_drive} gives no finite period"
        )));
    }
    let rk = Rk4::new(params, omega_drive, dt)?;
    let amplitude = model::stationary_solution(params, omega_drive)?.to_array();
    let reference = StateVector::from_array(amplitude).norm();

    let period = 2.0 * PI / omega_drive;
    let n_settle = step_count(t_settle, dt);
    let h_settle = t_settle / n_settle as f64;
    let mut x = initial.to_array();
    for i in 0..n_settle {
        x = rk.step(i as f64 * h_settle, &x, h_settle);
    }

    let n_period = step_count(period, dt);
    let h = period / n_period as f64;
    let mut worst: f64 = 0.0;
    for i in 0..=n_period {
        let t = t_settle + i as f64 * h;
        if i > 0 {
            x = rk.step(t - h, &x, h);
        }
        let phase = C64::from_polar(1.0, omega_drive * t);
        let diff: Vec<C64> = (0..4).map(|k| x[k] - amplitude[k] * phase).collect();
        worst = worst.max(crate::linalg::vec_norm(&diff));
    }
    Ok(if reference > 0.0 { worst / reference } else { worst })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> OscillatorParams {
        OscillatorParams::new(2.8, 3.0, 0.0, 0.0, 0.1, 0.02).with_drive(C64::new(1.0, 0.0), ZERO)
    }

    #[test]
    fn no_drive_no_motion() {
        let p = OscillatorParams::new(2.8, 3.0, 0.0, 0.0, 0.1, 0.02);
        let r = integrate(&p, 2.7, 5.0, 1e-3, StateVector::ZERO).unwrap();
        assert!(r.states.iter().all(|s| s.norm() == 0.0));
        assert_eq!(r.times.len(), r.states.len());
        assert!(r.times.windows(2).all(|w| w[1] > w[0]));
        assert!((r.times.last().unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn free_oscillator_circles() {
        let p = OscillatorParams::new(2.0, 3.0, 0.0, 0.0, 0.0, 0.0);
        let w = 2.0;
        // q1 = e^{iwt}: p1 = iw q1.
        let init = StateVector {
            p1: C64::new(0.0, w),
            p2: ZERO,
            q1: C64::new(1.0, 0.0),
            q2: ZERO,
        };
        let r = integrate(&p, 1.0, 10.0, 1e-3, init).unwrap();
        for s in &r.states {
            assert!((s.q1.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn damped_free_motion_decays() {
        let p = OscillatorParams::new(2.8, 3.0, 0.05, 0.02, 0.1, 0.02);
        let kappa = 2.0 * slowest_decay_rate(&p).unwrap();
        let init = StateVector {
            p1: C64::new(0.3, -0.2),
            p2: C64::new(0.1, 0.4),
            q1: C64::new(0.5, 0.1),
            q2: C64::new(-0.2, 0.3),
        };
        let t_end = 200.0;
        let r = integrate(&p, 1.0, t_end, 2e-3, init).unwrap();
        // Modal expansion bounds the transient by the eigenvector condition
        // number times the slowest exponential.
        let m = model::build_system_matrices(&p).unwrap().at(p.f);
        let es = crate::linalg::eig_4x4(&m).unwrap();
        let cond = es.right.norm() * es.left.norm();
        for (t, s) in r.times.iter().zip(&r.states).step_by(1000) {
            assert!(s.norm() <= cond * init.norm() * (-kappa * t / 2.0).exp(), "t = {t}");
        }
        assert!(r.last().norm() < init.norm() * (-kappa * t_end / 2.0).exp() * cond);
    }

    #[test]
    fn step_size_guard() {
        let err = integrate(&reference(), 2.7, 1.0, 0.05, StateVector::ZERO).unwrap_err();
        assert!(matches!(err, TimeDomainError::StepSize { .. }), "{err:?}");
    }

    #[test]
    fn undamped_system_is_rejected() {
        let p = OscillatorParams::new(2.8, 3.0, 0.0, 0.0, 0.0, 0.0).with_drive(C64::new(1.0, 0.0), ZERO);
        assert!(matches!(
            stationary_residual(&p, 2.7, 10.0, 1e-3),
            Err(TimeDomainError::NotDecaying { .. })
        ));
    }

    #[test]
    fn zero_drive_returns_absolute_norm() {
        let p = OscillatorParams::new(2.8, 3.0, 0.0, 0.0, 0.1, 0.02);
        let r = stationary_residual(&p, 2.7, 50.0, 1e-3).unwrap();
        assert!(r < 1e-12);
    }

    #[test]
    fn csv_dump() {
        let r = integrate(&reference(), 2.7, 0.01, 1e-3, StateVector::ZERO).unwrap();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,re_p1,im_p1,re_p2,im_p2,re_q1,im_q1,re_q2,im_q2");
        assert_eq!(lines.len(), r.times.len() + 1);
        assert_eq!(lines[1].split(',').count(), 9);
    }
}
