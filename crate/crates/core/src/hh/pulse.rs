use super::{HhError, T_END};

/// Largest amplitude accepted for a pulse, in μA/cm².
pub const MAX_AMPLITUDE: f64 = 10.0;

/// A single square current pulse `amplitude · 1[t_start ≤ t < t_end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquarePulse {
    pub t_start: f64,
    pub t_end: f64,
    pub amplitude: f64,
}

impl SquarePulse {
    pub fn new(t_start: f64, t_end: f64, amplitude: f64) -> Result<Self, HhError> {
        let p = Self {
            t_start,
            t_end,
            amplitude,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), HhError> {
        let Self {
            t_start,
            t_end,
            amplitude,
        } = *self;
        if !(t_start.is_finite() && t_end.is_finite() && amplitude.is_finite()) {
            return Err(HhError::InvalidPulse("non-finite field".into()));
        }
        if !(0.0 <= t_start && t_start <= t_end && t_end <= T_END) {
            return Err(HhError::InvalidPulse(format!(
                "need 0 <= t_start <= t_end <= {T_END}, got [{t_start}, {t_end}]"
            )));
        }
        if !(0.0..=MAX_AMPLITUDE).contains(&amplitude) {
            return Err(HhError::InvalidPulse(format!(
                "amplitude {amplitude} outside [0, {MAX_AMPLITUDE}]"
            )));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Applied current at time `t` (half-open support).
    pub fn current_at(&self, t: f64) -> f64 {
        if self.t_start <= t && t < self.t_end {
            self.amplitude
        } else {
            0.0
        }
    }

    pub fn shifted(&self, dt: f64) -> Result<Self, HhError> {
        Self::new(self.t_start + dt, self.t_end + dt, self.amplitude)
    }
}
