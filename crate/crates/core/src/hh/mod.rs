//! Hodgkin-Huxley membrane model.
//!
//! Potentials are in mV, time in ms, currents in μA/cm², conductances in
//! mS/cm². The resting potential convention puts rest near −75 mV.

mod integrate;
mod pulse;
mod spikes;

pub use integrate::{simulate, simulate_on, SolverOptions, Trajectory};
pub use pulse::{SquarePulse, MAX_AMPLITUDE};
pub use spikes::{count_spikes, find_threshold};

use thiserror::Error;

/// Number of points on the standard output grid.
pub const GRID_LEN: usize = 500;
/// End of the simulated window in ms.
pub const T_END: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HhError {
    #[error("non-finite membrane potential {0}")]
    NonFiniteInput(f64),
    #[error("invalid pulse: {0}")]
    InvalidPulse(String),
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error("integration failed at t = {t} ms: {reason}")]
    IntegrationFailure { t: f64, reason: String },
    #[error("threshold bracket [{lo}, {hi}] invalid: {reason}")]
    Bracket { lo: f64, hi: f64, reason: String },
}

/// Membrane parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HhParams {
    pub c_m: f64,
    pub v_na: f64,
    pub v_k: f64,
    pub v_l: f64,
    pub g_na: f64,
    pub g_k: f64,
    pub g_l: f64,
}

impl Default for HhParams {
    fn default() -> Self {
        Self {
            c_m: 1.0,
            v_na: 40.0,
            v_k: -87.0,
            v_l: -64.387,
            g_na: 120.0,
            g_k: 36.0,
            g_l: 0.3,
        }
    }
}

impl HhParams {
    pub fn validate(&self) -> Result<(), HhError> {
        let positive = [self.c_m, self.g_na, self.g_k, self.g_l];
        if positive.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(HhError::InvalidOptions(
                "capacitance and conductances must be positive".into(),
            ))
        }
    }
}

/// Membrane potential and the three gating variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HhState {
    pub v: f64,
    pub m: f64,
    pub h: f64,
    pub n: f64,
}

impl Default for HhState {
    fn default() -> Self {
        Self {
            v: -75.0,
            m: 0.05,
            h: 0.595,
            n: 0.317,
        }
    }
}

impl HhState {
    pub fn to_array(self) -> [f64; 4] {
        [self.v, self.m, self.h, self.n]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            v: a[0],
            m: a[1],
            h: a[2],
            n: a[3],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

/// Opening and closing rates of the three gates, in 1/ms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSet {
    pub alpha_m: f64,
    pub beta_m: f64,
    pub alpha_h: f64,
    pub beta_h: f64,
    pub alpha_n: f64,
    pub beta_n: f64,
}

/// Below this distance from a removable singularity the series form is used.
const SINGULAR_GUARD: f64 = 1e-7;

/// `x / (exp(x/10) - 1)`, which tends to 10 as x → 0.
fn x_over_expm1(x: f64) -> f64 {
    if x.abs() < SINGULAR_GUARD {
        // 10 · (1 − x/20 + x²/1200)
        10.0 - x / 2.0 + x * x / 120.0
    } else {
        x / (x / 10.0).exp_m1()
    }
}

/// Evaluates the six gating rates at potential `v`.
pub fn rates(v: f64) -> Result<RateSet, HhError> {
    if !v.is_finite() {
        return Err(HhError::NonFiniteInput(v));
    }
    Ok(rates_unchecked(v))
}

#[inline]
pub(crate) fn rates_unchecked(v: f64) -> RateSet {
    RateSet {
        alpha_m: 0.1 * x_over_expm1(-v - 50.0),
        beta_m: 4.0 * ((-v - 75.0) / 18.0).exp(),
        alpha_h: 0.07 * ((-v - 75.0) / 20.0).exp(),
        beta_h: 1.0 / (((-v - 45.0) / 10.0).exp() + 1.0),
        alpha_n: 0.01 * x_over_expm1(-v - 65.0),
        beta_n: 0.125 * ((-v - 75.0) / 80.0).exp(),
    }
}

/// Time derivatives of `(V, m, h, n)` under a constant applied current.
pub fn hh_rhs(state: &HhState, i_app: f64, params: &HhParams) -> HhState {
    HhState::from_array(rhs_array(&state.to_array(), i_app, params))
}

#[inline]
pub(crate) fn rhs_array(y: &[f64; 4], i_app: f64, p: &HhParams) -> [f64; 4] {
    let [v, m, h, n] = *y;
    let r = rates_unchecked(v);
    let i_na = p.g_na * m * m * m * h * (v - p.v_na);
    let n2 = n * n;
    let i_k = p.g_k * n2 * n2 * (v - p.v_k);
    let i_l = p.g_l * (v - p.v_l);
    [
        (i_app - (i_na + i_k + i_l)) / p.c_m,
        r.alpha_m * (1.0 - m) - r.beta_m * m,
        r.alpha_h * (1.0 - h) - r.beta_h * h,
        r.alpha_n * (1.0 - n) - r.beta_n * n,
    ]
}

/// The standard 500-point grid over [0, 100] ms.
pub fn standard_grid() -> Vec<f64> {
    uniform_grid(GRID_LEN, T_END)
}

pub fn uniform_grid(len: usize, t_end: f64) -> Vec<f64> {
    match len {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => {
            let last = (len - 1) as f64;
            (0..len)
                .map(|i| if i == len - 1 { t_end } else { t_end * i as f64 / last })
                .collect()
        }
    }
}
