//! Tolerances and grid defaults, collected in one place.
//!
//! | constant | value | used by |
//! |---|---|---|
//! | `ILL_CONDITIONED_SEPARATION` | 1e-6 | eigenvalue pair flagged near-defective (relative to ‖m‖) |
//! | `EP_RESIDUAL_TOL` | 1e-10 | Newton residual on (D, D′), relative to max char-poly coefficient |
//! | `EP_MAX_ITER` | 100 | Newton iterations before giving up |
//! | `EP_MAX_HALVINGS` | 20 | step halvings per Newton iteration |
//! | `EP_FD_STEP` | 1e-7 | relative central-difference step in f and g |
//! | `EP_DEDUP_RADIUS` | 1e-6 | two EPs closer than this in (ω, f, g) are the same |
//! | `DEFAULT_F_REF` | 0.0 | coupling at which the two-level projection is built |
//! | `POLE_SWITCH_SEPARATION` | 1e-6 | below this pole distance G uses the double-pole form |
//! | `NILPOTENT_TOL` | 1e-8 | ‖N²‖ / ‖N‖² bound certifying an EP |
//! | `POLE_HIT_DISTANCE` | 1e-12 | T is not evaluated closer than this to a pole |
//! | `TOUCHES_ZERO_RATIO` | 1e-9 | refined minimum / largest peak counted as a zero |
//! | `TRAJECTORY_EP_DISTANCE` | 1e-3 | inter-branch distance where tracking switches to extrapolation |
//! | `DEFAULT_ENERGY_POINTS` | 2001 | energy grid size |
//! | `DEFAULT_TRAJECTORY_POINTS` | 401 | coupling grid size |
//! | `STABILITY_GUARD` | 0.1 | maximum dt·‖M‖∞ for the RK4 integrator |
//! | `SETTLE_EFOLDS` | 40 | transient e-folding times before comparing with the stationary state |
//! | `STATIONARY_THRESHOLD` | 1e-4 | `verify-stationary` fails above this residual |

pub const ILL_CONDITIONED_SEPARATION: f64 = 1e-6;

pub const EP_RESIDUAL_TOL: f64 = 1e-10;
pub const EP_MAX_ITER: usize = 100;
pub const EP_MAX_HALVINGS: usize = 20;
pub const EP_FD_STEP: f64 = 1e-7;
pub const EP_DEDUP_RADIUS: f64 = 1e-6;

pub const DEFAULT_F_REF: f64 = 0.0;

pub const POLE_SWITCH_SEPARATION: f64 = 1e-6;
pub const NILPOTENT_TOL: f64 = 1e-8;
pub const POLE_HIT_DISTANCE: f64 = 1e-12;
pub const TOUCHES_ZERO_RATIO: f64 = 1e-9;

pub const TRAJECTORY_EP_DISTANCE: f64 = 1e-3;

pub const DEFAULT_ENERGY_POINTS: usize = 2001;
pub const DEFAULT_TRAJECTORY_POINTS: usize = 401;

pub const STABILITY_GUARD: f64 = 0.1;
pub const SETTLE_EFOLDS: f64 = 40.0;
pub const STATIONARY_THRESHOLD: f64 = 1e-4;
