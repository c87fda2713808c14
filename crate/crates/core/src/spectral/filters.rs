//! Daubechies scaling filters.
//!
//! Each table holds the synthesis lowpass `h` (length `2·n_w`) with
//! `Σh = √2` and `Σh² = 1`; the other three filters derive from it.

use super::SpectralError;
use std::f64::consts::FRAC_1_SQRT_2;

/// Orders with embedded coefficient tables.
pub const SUPPORTED_ORDERS: [usize; 7] = [1, 2, 4, 6, 8, 16, 24];

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFilter {
    pub order: usize,
    /// synthesis lowpass
    pub h: Vec<f64>,
    /// synthesis highpass, `g[k] = (-1)^k h[L-1-k]`
    pub g: Vec<f64>,
    pub dec_lo: Vec<f64>,
    pub dec_hi: Vec<f64>,
}

impl WaveletFilter {
    /// Daubechies filter with `order` vanishing moments (`db{order}`).
    pub fn daubechies(order: usize) -> Result<Self, SpectralError> {
        let h: &[f64] = match order {
            1 => &DB1,
            2 => &DB2,
            4 => &DB4,
            6 => &DB6,
            8 => &DB8,
            16 => &DB16,
            24 => &DB24,
            _ => return Err(SpectralError::UnsupportedOrder(order)),
        };
        let f = Self::from_lowpass(order, h.to_vec());
        f.validate()?;
        Ok(f)
    }

    fn from_lowpass(order: usize, h: Vec<f64>) -> Self {
        let l = h.len();
        let sign = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
        let g = (0..l).map(|k| sign(k) * h[l - 1 - k]).collect();
        let dec_lo = h.iter().rev().copied().collect();
        let dec_hi = (0..l).map(|k| -sign(k) * h[k]).collect();
        Self {
            order,
            h,
            g,
            dec_lo,
            dec_hi,
        }
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    /// Orthonormality, unit DC gain, even-shift orthogonality and vanishing
    /// moments of the highpass (normalized by `Σ|g_i|·i^p`).
    pub fn validate(&self) -> Result<(), SpectralError> {
        let fail = |what: String| Err(SpectralError::InvalidFilter { order: self.order, what });
        let l = self.h.len();
        if l != 2 * self.order {
            return fail(format!("length {l}"));
        }
        let energy: f64 = self.h.iter().map(|x| x * x).sum();
        if (energy - 1.0).abs() > 1e-12 {
            return fail(format!("Σh² = {energy}"));
        }
        let dc: f64 = self.h.iter().sum();
        if (dc - std::f64::consts::SQRT_2).abs() > 1e-12 {
            return fail(format!("Σh = {dc}"));
        }
        for shift in (2..l).step_by(2) {
            let c: f64 = (0..l - shift).map(|i| self.h[i] * self.h[i + shift]).sum();
            if c.abs() > 1e-12 {
                return fail(format!("shift-{shift} autocorrelation {c}"));
            }
        }
        for p in 0..self.order {
            let (mut s, mut scale) = (0.0, 0.0);
            for (i, gi) in self.g.iter().enumerate() {
                let ip = (i as f64).powi(p as i32);
                s += gi * ip;
                scale += gi.abs() * ip;
            }
            if s.abs() > 1e-10 * scale {
                return fail(format!("moment {p} = {s}"));
            }
        }
        Ok(())
    }
}

#[rustfmt::skip]
const DB1: [f64; 2] = [FRAC_1_SQRT_2, FRAC_1_SQRT_2];

#[rustfmt::skip]
const DB2: [f64; 4] = [
    0.48296291314453416,
    0.8365163037378079,
    0.2241438680420134,
    -0.12940952255126037,
];

#[rustfmt::skip]
const DB4: [f64; 8] = [
    0.2303778133088965,
    0.7148465705529157,
    0.6308807679298589,
    -0.027983769416859854,
    -0.18703481171909309,
    0.030841381835560764,
    0.0328830116668852,
    -0.010597401785069032,
];

#[rustfmt::skip]
const DB6: [f64; 12] = [
    0.11154074335010947,
    0.49462389039845306,
    0.7511339080210954,
    0.31525035170919763,
    -0.22626469396543983,
    -0.12976686756726194,
    0.09750160558732304,
    0.027522865530305727,
    -0.03158203931748603,
    0.0005538422011614961,
    0.004777257510945511,
    -0.0010773010853084796,
];

#[rustfmt::skip]
const DB8: [f64; 16] = [
    0.05441584224310401,
    0.31287159091429995,
    0.6756307362972898,
    0.5853546836542067,
    -0.015829105256349306,
    -0.2840155429615469,
    0.0004724845739132828,
    0.12874742662047847,
    -0.017369301001807547,
    -0.044088253930794755,
    0.013981027917398282,
    0.008746094047405777,
    -0.004870352993451574,
    -0.00039174037337694705,
    0.0006754494064505693,
    -0.00011747678412476953,
];

#[rustfmt::skip]
const DB16: [f64; 32] = [
    0.003189220925347738,
    0.034907714323673344,
    0.16506428348885313,
    0.4303127228460038,
    0.637356332083789,
    0.4402902568863569,
    -0.08975108940248964,
    -0.3270633105279177,
    -0.027918208133028276,
    0.2111906939471043,
    0.027340263752716042,
    -0.1323883055638104,
    -0.006239722752474872,
    0.07592423604427631,
    -0.007588974368857738,
    -0.03688839769173014,
    0.01029765964095597,
    0.013993768859828731,
    -0.006990014563413916,
    -0.00364427962149839,
    0.003128023381206269,
    0.00040789698084971285,
    -0.0009410217493595676,
    0.00011424152003872239,
    0.00017478724522533817,
    -6.103596621410936e-05,
    -1.3945668988208893e-05,
    1.1336608661276258e-05,
    -1.0435713423116066e-06,
    -7.363656785451205e-07,
    2.3087840868575457e-07,
    -2.109339630100743e-08,
];

#[rustfmt::skip]
const DB24: [f64; 48] = [
    0.00019143580094755136,
    0.0030820817149054946,
    0.02248233994971641,
    0.0972622358336252,
    0.2729089160677263,
    0.504371040839925,
    0.574939221095542,
    0.2809855532337119,
    -0.18727140688515623,
    -0.31794307899936275,
    0.004776613684344728,
    0.23923738878031087,
    0.04252872964148383,
    -0.1711753513703469,
    -0.038777173577920016,
    0.12101630346922423,
    0.020980113709144814,
    -0.08216165420800167,
    -0.004578436241819222,
    0.05130162003998088,
    -0.004944709428125628,
    -0.02821310709490189,
    0.007661721881646586,
    0.013049970871085736,
    -0.006291435370018188,
    -0.004746568786323114,
    0.0037360461782825235,
    0.0011537649368394815,
    -0.0016964568189748244,
    -4.41618485614152e-05,
    0.000586127059318311,
    -0.00011812332379695547,
    -0.0001460079817762617,
    6.559388639305635e-05,
    2.1832414604665582e-05,
    -2.0228882926126976e-05,
    1.3411577508091147e-08,
    3.901100338597703e-06,
    -8.980253143938407e-07,
    -4.032507756879972e-07,
    2.1663396532785745e-07,
    -5.0576454197925e-10,
    -2.2557403881760862e-08,
    5.157776789672e-09,
    4.748375824256231e-10,
    -4.0246586445843797e-10,
    6.99180115763823e-11,
    -4.34278250380371e-12,
];
