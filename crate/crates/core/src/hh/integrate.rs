//! Adaptive Dormand–Prince 5(4) integration of the membrane equations.
//!
//! Each pulse splits the window into at most three pieces with constant
//! applied current. The integrator is restarted at every piece boundary so a
//! jump in the current never falls inside an accepted step. Output is sampled
//! on an arbitrary non-decreasing grid through the method's fourth-order
//! continuous extension.

use super::{rhs_array, HhError, HhParams, HhState, SquarePulse, T_END};

// Butcher tableau (the system is autonomous, so the nodes c_i are not needed).
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// Error weights: fifth-order minus embedded fourth-order solution.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Keep `(m, h, n)` alongside the potential.
    pub record_gating: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-6,
            atol: 1e-8,
            max_steps: 1_000_000,
            record_gating: false,
        }
    }
}

impl SolverOptions {
    pub fn with_gating(mut self) -> Self {
        self.record_gating = true;
        self
    }
}

/// Potential (and optionally gating variables) sampled on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: Vec<f64>,
    pub v: Vec<f64>,
    pub gating: Option<Vec<[f64; 3]>>,
}

struct Sampler<'a> {
    grid: &'a [f64],
    next: usize,
    v: Vec<f64>,
    gating: Option<Vec<[f64; 3]>>,
}

impl Sampler<'_> {
    fn record(&mut self, y: &[f64; 4]) {
        self.v[self.next] = y[0];
        if let Some(g) = self.gating.as_mut() {
            g[self.next] = [y[1], y[2], y[3]];
        }
        self.next += 1;
    }

    fn done(&self) -> bool {
        self.next >= self.grid.len()
    }
}

fn scaled_norm(v: &[f64; 4], a: &[f64; 4], b: &[f64; 4], opts: &SolverOptions) -> f64 {
    let mut acc = 0.0;
    for i in 0..4 {
        let sk = opts.atol + opts.rtol * a[i].abs().max(b[i].abs());
        let r = v[i] / sk;
        acc += r * r;
    }
    (acc / 4.0).sqrt()
}

fn initial_step(y0: &[f64; 4], f0: &[f64; 4], i_app: f64, p: &HhParams, opts: &SolverOptions, span: f64) -> f64 {
    let zero = [0.0; 4];
    let d0 = scaled_norm(y0, y0, &zero, opts);
    let d1 = scaled_norm(f0, y0, &zero, opts);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let mut y1 = [0.0; 4];
    for i in 0..4 {
        y1[i] = y0[i] + h0 * f0[i];
    }
    let f1 = rhs_array(&y1, i_app, p);
    let mut df = [0.0; 4];
    for i in 0..4 {
        df[i] = f1[i] - f0[i];
    }
    let d2 = scaled_norm(&df, y0, &zero, opts) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Integrates one piece `[a, b]` with constant current, sampling grid points
/// in `(a, b]`. Returns the state at `b`.
fn integrate_piece(
    a: f64,
    b: f64,
    i_app: f64,
    y_start: [f64; 4],
    p: &HhParams,
    opts: &SolverOptions,
    out: &mut Sampler<'_>,
    steps: &mut usize,
) -> Result<[f64; 4], HhError> {
    let mut t = a;
    let mut y = y_start;
    let mut k1 = rhs_array(&y, i_app, p);
    let mut h = initial_step(&y, &k1, i_app, p, opts, b - a);
    let mut rejected_last = false;

    while t < b {
        *steps += 1;
        if *steps > opts.max_steps {
            return Err(HhError::IntegrationFailure {
                t,
                reason: format!("exceeded {} steps", opts.max_steps),
            });
        }
        let last = t + h >= b;
        if last {
            h = b - t;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(HhError::IntegrationFailure {
                t,
                reason: format!("step size underflow (h = {h:e})"),
            });
        }

        let mut ys = [0.0; 4];
        for i in 0..4 {
            ys[i] = y[i] + h * A21 * k1[i];
        }
        let k2 = rhs_array(&ys, i_app, p);
        for i in 0..4 {
            ys[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        let k3 = rhs_array(&ys, i_app, p);
        for i in 0..4 {
            ys[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        let k4 = rhs_array(&ys, i_app, p);
        for i in 0..4 {
            ys[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        let k5 = rhs_array(&ys, i_app, p);
        for i in 0..4 {
            ys[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let k6 = rhs_array(&ys, i_app, p);
        let mut y_new = [0.0; 4];
        for i in 0..4 {
            y_new[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        let k7 = rhs_array(&y_new, i_app, p);

        let mut err = [0.0; 4];
        for i in 0..4 {
            err[i] = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let err_norm = scaled_norm(&err, &y, &y_new, opts);
        if !err_norm.is_finite() {
            h *= 0.1;
            rejected_last = true;
            continue;
        }

        if err_norm <= 1.0 {
            let t_new = if last { b } else { t + h };
            if !out.done() && out.grid[out.next] <= t_new {
                let mut rc = [[0.0; 4]; 5];
                for i in 0..4 {
                    let dy = y_new[i] - y[i];
                    let bspl = h * k1[i] - dy;
                    rc[0][i] = y[i];
                    rc[1][i] = dy;
                    rc[2][i] = bspl;
                    rc[3][i] = dy - h * k7[i] - bspl;
                    rc[4][i] = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                            + D7 * k7[i]);
                }
                while !out.done() && out.grid[out.next] <= t_new {
                    let s = ((out.grid[out.next] - t) / h).clamp(0.0, 1.0);
                    let s1 = 1.0 - s;
                    let mut yi = [0.0; 4];
                    for i in 0..4 {
                        yi[i] = rc[0][i]
                            + s * (rc[1][i] + s1 * (rc[2][i] + s * (rc[3][i] + s1 * rc[4][i])));
                    }
                    if s == 1.0 {
                        yi = y_new;
                    }
                    out.record(&yi);
                }
            }
            t = t_new;
            y = y_new;
            k1 = k7;
            let mut fac = 0.9 * err_norm.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 10.0);
            if rejected_last {
                fac = fac.min(1.0);
            }
            h *= fac;
            rejected_last = false;
        } else {
            let fac = (0.9 * err_norm.powf(-0.2)).max(0.2);
            h *= fac;
            rejected_last = true;
        }
    }
    Ok(y)
}

/// Integrates the membrane equations under `pulse` and samples the solution
/// on `grid`, which must be non-decreasing and lie within `[0, 100]` ms.
pub fn simulate(
    pulse: &SquarePulse,
    params: &HhParams,
    init: &HhState,
    grid: &[f64],
    opts: &SolverOptions,
) -> Result<Trajectory, HhError> {
    pulse.validate()?;
    params.validate()?;
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(HhError::InvalidOptions("rtol and atol must be positive".into()));
    }
    if !init.is_finite() {
        return Err(HhError::InvalidOptions("non-finite initial state".into()));
    }
    if grid.iter().any(|t| !(0.0..=T_END).contains(t)) || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(HhError::InvalidOptions(format!(
            "grid must be non-decreasing within [0, {T_END}]"
        )));
    }

    let mut out = Sampler {
        grid,
        next: 0,
        v: vec![0.0; grid.len()],
        gating: opts.record_gating.then(|| vec![[0.0; 3]; grid.len()]),
    };
    let mut y = init.to_array();
    while !out.done() && out.grid[out.next] <= 0.0 {
        out.record(&y);
    }

    let pieces = [
        (0.0, pulse.t_start, 0.0),
        (pulse.t_start, pulse.t_end, pulse.amplitude),
        (pulse.t_end, T_END, 0.0),
    ];
    let mut steps = 0usize;
    for &(a, b, i_app) in &pieces {
        if b > a {
            y = integrate_piece(a, b, i_app, y, params, opts, &mut out, &mut steps)?;
        }
    }
    while !out.done() {
        out.record(&y);
    }

    Ok(Trajectory {
        grid: grid.to_vec(),
        v: out.v,
        gating: out.gating,
    })
}

/// Default parameters, initial state and solver options on the 500-point grid.
pub fn simulate_on(pulse: &SquarePulse, grid: &[f64]) -> Result<Trajectory, HhError> {
    simulate(
        pulse,
        &HhParams::default(),
        &HhState::default(),
        grid,
        &SolverOptions::default(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hh::{count_spikes, standard_grid};

    fn pulse(a: f64, b: f64, amp: f64) -> SquarePulse {
        SquarePulse::new(a, b, amp).unwrap()
    }

    #[test]
    fn rest_stays_near_initial_potential() {
        let tr = simulate_on(&pulse(0.0, 100.0, 0.0), &standard_grid()).unwrap();
        let v0 = tr.v[0];
        assert_eq!(v0, -75.0);
        let drift = tr.v.iter().map(|v| (v - v0).abs()).fold(0.0, f64::max);
        assert!(drift < 3.0, "drift {drift}");
    }

    #[test]
    fn strong_sustained_pulse_spikes_repeatedly() {
        let tr = simulate_on(&pulse(0.0, 100.0, 10.0), &standard_grid()).unwrap();
        assert!(count_spikes(&tr.v) >= 3);
    }

    #[test]
    fn grid_can_be_arbitrary() {
        let grid = [0.0, 0.0, 12.5, 50.0, 50.0, 99.0, 100.0];
        let tr = simulate_on(&pulse(10.0, 60.0, 4.0), &grid).unwrap();
        assert_eq!(tr.v.len(), grid.len());
        assert_eq!(tr.v[0], tr.v[1]);
        assert_eq!(tr.v[3], tr.v[4]);
    }

    #[test]
    fn gating_is_recorded_on_request() {
        let opts = SolverOptions::default().with_gating();
        let tr = simulate(
            &pulse(5.0, 30.0, 8.0),
            &HhParams::default(),
            &HhState::default(),
            &standard_grid(),
            &opts,
        )
        .unwrap();
        let g = tr.gating.unwrap();
        assert_eq!(g[0], [0.05, 0.595, 0.317]);
        assert!(g.iter().flatten().all(|x| (-1e-6..=1.0 + 1e-6).contains(x)));
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let g = standard_grid();
        let p = pulse(0.0, 10.0, 1.0);
        let bad = SolverOptions {
            rtol: 0.0,
            ..SolverOptions::default()
        };
        assert!(simulate(&p, &HhParams::default(), &HhState::default(), &g, &bad).is_err());
        assert!(simulate_on(&p, &[0.0, 120.0]).is_err());
        assert!(simulate_on(&p, &[5.0, 1.0]).is_err());
    }

    #[test]
    fn step_budget_exhaustion_reports_time() {
        let opts = SolverOptions {
            max_steps: 10,
            ..SolverOptions::default()
        };
        let err = simulate(
            &pulse(0.0, 100.0, 10.0),
            &HhParams::default(),
            &HhState::default(),
            &standard_grid(),
            &opts,
        )
        .unwrap_err();
        assert!(matches!(err, HhError::IntegrationFailure { t, .. } if t > 0.0 && t < 100.0));
    }
}
