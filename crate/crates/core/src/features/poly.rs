//! Least-squares projection onto a discrete orthonormal polynomial basis.
//!
//! The basis spans degrees 0..=3 over a window's sample indices; its
//! coefficients are the least-squares estimators of the window's mean,
//! slope, curvature and third-order trend, and the residual measures how
//! much signal the cubic fit leaves unexplained.

use super::FeatureError;

/// Orthonormal polynomial basis over `len` equally spaced samples.
#[derive(Debug, Clone)]
pub struct GramBasis {
    pub len: usize,
    pub max_degree: usize,
    /// `max_degree + 1` rows of length `len`, mutually orthonormal under the
    /// standard dot product.
    pub rows: Vec<Vec<f64>>,
}

impl GramBasis {
    /// Builds the basis by Gram-Schmidt on centered monomials. Two
    /// orthogonalization passes keep cross-products below 1e-14 even for the
    /// longest windows.
    pub fn new(len: usize, max_degree: usize) -> Result<GramBasis, FeatureError> {
        if len < max_degree + 1 {
            return Err(FeatureError::WindowTooShort {
                len,
                required: max_degree + 1,
            });
        }
        let center = (len as f64 - 1.0) / 2.0;
        let scale = if len > 1 { (len as f64 - 1.0) / 2.0 } else { 1.0 };
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(max_degree + 1);
        for degree in 0..=max_degree {
            let mut v: Vec<f64> = (0..len)
                .map(|i| ((i as f64 - center) / scale).powi(degree as i32))
                .collect();
            for _ in 0..2 {
                for b in &rows {
                    let proj = dot(&v, b);
                    for (vi, bi) in v.iter_mut().zip(b) {
                        *vi -= proj * bi;
                    }
                }
            }
            let norm = dot(&v, &v).sqrt();
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            rows.push(v);
        }
        Ok(GramBasis { len, max_degree, rows })
    }

    /// Projects a window onto the basis: coefficients plus the RMS residual
    /// of the reconstruction.
    pub fn project(&self, window: &[f64]) -> (Vec<f64>, f64) {
        assert_eq!(window.len(), self.len, "window length mismatch");
        let coeffs: Vec<f64> = self.rows.iter().map(|b| dot(b, window)).collect();
        let mut residual_sq = 0.0;
        for i in 0..self.len {
            let mut recon = 0.0;
            for (c, b) in coeffs.iter().zip(&self.rows) {
                recon += c * b[i];
            }
            let d = window[i] - recon;
            residual_sq += d * d;
        }
        let residual = (residual_sq / self.len as f64).sqrt();
        (coeffs, residual)
    }
}

/// Least-squares polynomial coefficients of a window and the RMS residual of
/// the reconstruction, under an orthonormal discrete polynomial basis of
/// degrees 0..=`max_degree`.
pub fn gram_poly_features(window: &[f64], max_degree: usize) -> Result<(Vec<f64>, f64), FeatureError> {
    let basis = GramBasis::new(window.len(), max_degree)?;
    Ok(basis.project(window))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
