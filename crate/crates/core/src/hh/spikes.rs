use super::{simulate_on, standard_grid, HhError, SquarePulse};

/// Counts grid local maxima (`V[i] > V[i-1]` and `V[i] >= V[i+1]`) above 0 mV.
pub fn count_spikes(v: &[f64]) -> usize {
    v.windows(3)
        .filter(|w| w[1] > 0.0 && w[1] > w[0] && w[1] >= w[2])
        .count()
}

fn spikes_for(duration: f64, amplitude: f64, grid: &[f64]) -> Result<usize, HhError> {
    let pulse = SquarePulse::new(0.0, duration, amplitude)?;
    Ok(count_spikes(&simulate_on(&pulse, grid)?.v))
}

/// Bisects the smallest amplitude of a pulse on `[0, duration]` that elicits
/// at least one spike. Returns the bracket midpoint once `hi - lo < tol`.
pub fn find_threshold(duration: f64, lo: f64, hi: f64, tol: f64) -> Result<f64, HhError> {
    let bracket = |reason: &str| HhError::Bracket {
        lo,
        hi,
        reason: reason.to_string(),
    };
    if !(tol > 0.0) || !(lo < hi) {
        return Err(bracket("need lo < hi and tol > 0"));
    }
    let grid = standard_grid();
    if spikes_for(duration, lo, &grid)? != 0 {
        return Err(bracket("lower amplitude already spikes"));
    }
    if spikes_for(duration, hi, &grid)? == 0 {
        return Err(bracket("upper amplitude does not spike"));
    }
    let (mut a, mut b) = (lo, hi);
    while b - a >= tol {
        let mid = 0.5 * (a + b);
        if spikes_for(duration, mid, &grid)? >= 1 {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_trace_has_no_spikes() {
        assert_eq!(count_spikes(&[-75.0; 500]), 0);
        assert_eq!(count_spikes(&[]), 0);
    }

    #[test]
    fn plateau_peak_counts_once() {
        // V[i] > V[i-1] and V[i] >= V[i+1]: the first sample of a plateau counts.
        let v = [-70.0, 10.0, 20.0, 20.0, 5.0, -60.0, 30.0, -50.0];
        assert_eq!(count_spikes(&v), 2);
        let sub = [-70.0, -10.0, -70.0];
        assert_eq!(count_spikes(&sub), 0);
    }

    #[test]
    fn subthreshold_pulse_is_silent() {
        assert_eq!(spikes_for(100.0, 1.0, &standard_grid()).unwrap(), 0);
    }

    #[test]
    fn bracket_errors() {
        assert!(matches!(
            find_threshold(100.0, 5.0, 10.0, 0.01),
            Err(HhError::Bracket { .. })
        ));
        assert!(matches!(
            find_threshold(100.0, 0.0, 1.0, 0.01),
            Err(HhError::Bracket { .. })
        ));
        assert!(find_threshold(100.0, 3.0, 1.0, 0.01).is_err());
    }

    #[test]
    fn coarse_bisection_lands_near_rheobase() {
        let thr = find_threshold(100.0, 0.0, 10.0, 1.0).unwrap();
        assert!((thr - 2.21).abs() <= 1.0, "{thr}");
    }
}
