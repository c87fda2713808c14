//! Multi-level orthogonal DWT with half-sample symmetric extension.
//!
//! A level maps a signal of length `N` to approximation and detail bands of
//! length `⌊(N + L − 1)/2⌋` each, `L` the filter length:
//! `cA[o] = Σ_j dec_lo[j]·x̃[2o+1−j]`, where `x̃` mirrors `x` about its
//! end samples (`x̃[−1] = x[0]`, `x̃[N] = x[N−1]`). Synthesis evaluates the
//! matching upsample-and-filter sum on `0..N`.

use super::{SpectralError, WaveletFilter};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletPyramid {
    /// approximation band after the last level
    pub approx: Vec<f64>,
    /// `details[0]` is the finest level
    pub details: Vec<Vec<f64>>,
    /// input length of each level, `lengths[0]` = signal length
    pub lengths: Vec<usize>,
}

impl WaveletPyramid {
    pub fn levels(&self) -> usize {
        self.details.len()
    }
}

fn band_len(n: usize, filter_len: usize) -> usize {
    (n + filter_len - 1) / 2
}

/// `[n, len_1, …, len_k]`, where `len_k` is the coarse band length.
pub fn level_lengths(n: usize, filter_len: usize, levels: usize) -> Result<Vec<usize>, SpectralError> {
    if levels == 0 {
        return Err(SpectralError::ZeroLevels);
    }
    let mut lens = vec![n];
    for _ in 0..levels {
        lens.push(band_len(*lens.last().unwrap(), filter_len));
    }
    let coarse = *lens.last().unwrap();
    if n == 0 || coarse < filter_len {
        return Err(SpectralError::TooManyLevels {
            n,
            levels,
            coarse,
            filter_len,
        });
    }
    Ok(lens)
}

/// Length ζ of the coarse approximation band.
pub fn coarse_len(n: usize, filter: &WaveletFilter, levels: usize) -> Result<usize, SpectralError> {
    Ok(*level_lengths(n, filter.len(), levels)?.last().unwrap())
}

#[inline]
fn mirror(i: isize, n: usize) -> usize {
    let p = 2 * n as isize;
    let r = i.rem_euclid(p) as usize;
    if r < n {
        r
    } else {
        2 * n - 1 - r
    }
}

/// One analysis level.
pub fn dwt_step(x: &[f64], f: &WaveletFilter) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let l = f.len();
    let m = band_len(n, l);
    let mut ca = vec![0.0; m];
    let mut cd = vec![0.0; m];
    for o in 0..m {
        let (mut a, mut d) = (0.0, 0.0);
        for j in 0..l {
            let v = x[mirror(2 * o as isize + 1 - j as isize, n)];
            a += f.dec_lo[j] * v;
            d += f.dec_hi[j] * v;
        }
        ca[o] = a;
        cd[o] = d;
    }
    (ca, cd)
}

/// One synthesis level producing `n` samples.
pub fn idwt_step(ca: &[f64], cd: &[f64], f: &WaveletFilter, n: usize) -> Vec<f64> {
    let l = f.len();
    let mut out = vec![0.0; n];
    for (p, y) in out.iter_mut().enumerate() {
        // taps j = 2o + 1 − p with 0 ≤ j < l
        let o_lo = p.saturating_sub(1).div_ceil(2);
        let o_hi = ((p + l) / 2).min(ca.len());
        let mut acc = 0.0;
        for o in o_lo..o_hi {
            let j = 2 * o + 1 - p;
            acc += f.dec_lo[j] * ca[o] + f.dec_hi[j] * cd[o];
        }
        *y = acc;
    }
    out
}

pub fn dwt(x: &[f64], f: &WaveletFilter, levels: usize) -> Result<WaveletPyramid, SpectralError> {
    let lengths = level_lengths(x.len(), f.len(), levels)?;
    let mut approx = x.to_vec();
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        let (a, d) = dwt_step(&approx, f);
        approx = a;
        details.push(d);
    }
    Ok(WaveletPyramid {
        approx,
        details,
        lengths: lengths[..levels].to_vec(),
    })
}

pub fn idwt(p: &WaveletPyramid, f: &WaveletFilter) -> Result<Vec<f64>, SpectralError> {
    let k = p.details.len();
    if k == 0 || p.lengths.len() != k {
        return Err(SpectralError::ZeroLevels);
    }
    let mut a = p.approx.clone();
    for level in (0..k).rev() {
        let n = p.lengths[level];
        let m = band_len(n, f.len());
        if a.len() != m || p.details[level].len() != m {
            return Err(SpectralError::Length {
                expected: m,
                found: if a.len() != m { a.len() } else { p.details[level].len() },
            });
        }
        a = idwt_step(&a, &p.details[level], f, n);
    }
    Ok(a)
}

/// Dense coarse-band analysis and synthesis matrices for a fixed
/// `(n, filter, levels)`.
#[derive(Debug, Clone)]
pub struct WaveletPlan {
    pub n: usize,
    pub order: usize,
    pub levels: usize,
    pub zeta: usize,
    /// `ζ×n`, row-major: `approx = analysis · x`
    pub analysis: Vec<f64>,
    /// `n×ζ`, row-major: `idwt(approx, 0) = synthesis · approx`
    pub synthesis: Vec<f64>,
}

impl WaveletPlan {
    pub fn new(n: usize, order: usize, levels: usize) -> Result<Self, SpectralError> {
        let f = WaveletFilter::daubechies(order)?;
        let lengths = level_lengths(n, f.len(), levels)?;
        let zeta = lengths[levels];
        let mut analysis = vec![0.0; zeta * n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let p = dwt(&e, &f, levels)?;
            for z in 0..zeta {
                analysis[z * n + j] = p.approx[z];
            }
            e[j] = 0.0;
        }
        let mut synthesis = vec![0.0; n * zeta];
        let mut pyr = WaveletPyramid {
            approx: vec![0.0; zeta],
            details: (1..=levels).map(|l| vec![0.0; lengths[l]]).collect(),
            lengths: lengths[..levels].to_vec(),
        };
        for z in 0..zeta {
            pyr.approx[z] = 1.0;
            let col = idwt(&pyr, &f)?;
            for t in 0..n {
                synthesis[t * zeta + z] = col[t];
            }
            pyr.approx[z] = 0.0;
        }
        Ok(Self {
            n,
            order,
            levels,
            zeta,
            analysis,
            synthesis,
        })
    }

    /// Shared plan from a process-wide cache.
    pub fn cached(n: usize, order: usize, levels: usize) -> Result<Arc<Self>, SpectralError> {
        type Cache = Mutex<HashMap<(usize, usize, usize), Arc<WaveletPlan>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(p) = cache.lock().unwrap_or_else(|e| e.into_inner()).get(&(n, order, levels)) {
            return Ok(p.clone());
        }
        let plan = Arc::new(Self::new(n, order, levels)?);
        cache
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert((n, order, levels), plan.clone());
        Ok(plan)
    }
}
