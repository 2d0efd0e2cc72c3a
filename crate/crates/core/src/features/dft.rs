//! Low-order DFT magnitudes, normalized by the window's overall energy.
//!
//! Human motion lives in the low frequencies, so only coefficients up to
//! order 5 are kept. Normalizing by √(Σx²) makes the coefficients
//! independent of signal scale. Windows are 32 or 256 samples (0.64 s and
//! 5.12 s at 50 Hz); with only 6 coefficients a direct summation beats an
//! FFT, so no transform library is involved.

use super::FeatureError;

/// Supported window lengths in samples.
pub const DFT_WINDOW_LENS: [usize; 2] = [32, 256];

/// Highest retained coefficient order.
pub const DFT_MAX_ORDER: usize = 5;

/// Precomputed twiddle factors for one window length.
#[derive(Debug, Clone)]
pub struct DftTable {
    pub len: usize,
    /// `cos[k][n]`, `sin[k][n]` for k = 0..=DFT_MAX_ORDER, n = 0..len.
    cos: Vec<Vec<f64>>,
    sin: Vec<Vec<f64>>,
}

impl DftTable {
    pub fn new(len: usize) -> Result<DftTable, FeatureError> {
        if !DFT_WINDOW_LENS.contains(&len) {
            return Err(FeatureError::UnsupportedDftLength { len });
        }
        let mut cos = Vec::with_capacity(DFT_MAX_ORDER + 1);
        let mut sin = Vec::with_capacity(DFT_MAX_ORDER + 1);
        for k in 0..=DFT_MAX_ORDER {
            let mut ck = Vec::with_capacity(len);
            let mut sk = Vec::with_capacity(len);
            for n in 0..len {
                let angle = -2.0 * std::f64::consts::PI * (k * n) as f64 / len as f64;
                ck.push(angle.cos());
                sk.push(angle.sin());
            }
            cos.push(ck);
            sin.push(sk);
        }
        Ok(DftTable { len, cos, sin })
    }

    /// Normalized magnitudes |X_k| / √(Σx²) for k = 0..=5. A zero-energy
    /// window maps to all zeros.
    pub fn normalized_magnitudes(&self, window: &[f64]) -> [f64; DFT_MAX_ORDER + 1] {
        assert_eq!(window.len(), self.len, "window length mismatch");
        let energy: f64 = window.iter().map(|x| x * x).sum();
        let mut out = [0.0; DFT_MAX_ORDER + 1];
        if energy == 0.0 {
            return out;
        }
        let norm = energy.sqrt();
        for k in 0..=DFT_MAX_ORDER {
            let mut re = 0.0;
            let mut im = 0.0;
            for (n, &x) in window.iter().enumerate() {
                re += x * self.cos[k][n];
                im += x * self.sin[k][n];
            }
            out[k] = re.hypot(im) / norm;
        }
        out
    }
}

/// Normalized DFT magnitudes of orders 0..=5 for a 32- or 256-sample window.
pub fn dft_features(window: &[f64]) -> Result<[f64; DFT_MAX_ORDER + 1], FeatureError> {
    let table = DftTable::new(window.len())?;
    Ok(table.normalized_magnitudes(window))
}
