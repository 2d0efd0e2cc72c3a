//! Sliding-window feature extraction over the four derived channels.
//!
//! Every feature is computed on a causal window ending at the current frame,
//! so the catalog can run online at 50 Hz. Window grids:
//!
//! * energy / min / max over 0.1 s, 0.5 s, 1.0 s and 2.0 s,
//! * orthogonal-polynomial coefficients (degrees 0..=3) and the fit residual
//!   over 0.5 s, 1.0 s and 2.0 s,
//! * normalized DFT magnitudes (orders 0..=5) over 0.64 s and 5.12 s.
//!
//! That is 39 features per channel, 156 in total, in a fixed canonical order
//! (channel-major, then kind, then window).

pub mod dft;
pub mod poly;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::ChannelSeries;
use crate::SAMPLE_RATE_HZ;

pub use dft::{dft_features, DftTable, DFT_MAX_ORDER, DFT_WINDOW_LENS};
pub use poly::{gram_poly_features, GramBasis};

/// Largest window in samples; frames with less history are warm-up.
pub const WARMUP_SAMPLES: usize = 256;

/// Window grids in seconds.
pub const STAT_WINDOWS_S: [f64; 4] = [0.1, 0.5, 1.0, 2.0];
pub const POLY_WINDOWS_S: [f64; 3] = [0.5, 1.0, 2.0];
pub const DFT_WINDOWS_S: [f64; 2] = [0.64, 5.12];

/// Polynomial fit degree.
pub const POLY_MAX_DEGREE: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("empty window")]
    EmptyWindow,
    #[error("window of {len} samples is shorter than the {required} required")]
    WindowTooShort { len: usize, required: usize },
    #[error("unsupported DFT window length {len} (expected 32 or 256)")]
    UnsupportedDftLength { len: usize },
}

/// The four derived channels, in catalog order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    AccXyMag,
    AccZ,
    GyroXyMag,
    GyroZ,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::AccXyMag, Channel::AccZ, Channel::GyroXyMag, Channel::GyroZ];

    pub fn index(&self) -> usize {
        match self {
            Channel::AccXyMag => 0,
            Channel::AccZ => 1,
            Channel::GyroXyMag => 2,
            Channel::GyroZ => 3,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Channel::AccXyMag => "acc_xy_mag",
            Channel::AccZ => "acc_z",
            Channel::GyroXyMag => "gyro_xy_mag",
            Channel::GyroZ => "gyro_z",
        }
    }
}

/// Feature family plus its parameter (polynomial degree / DFT order).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "order")]
pub enum FeatureKind {
    Energy,
    Min,
    Max,
    PolyCoeff(usize),
    PolyResidual,
    DftMag(usize),
}

impl FeatureKind {
    fn label(&self) -> String {
        match self {
            FeatureKind::Energy => "energy".into(),
            FeatureKind::Min => "min".into(),
            FeatureKind::Max => "max".into(),
            FeatureKind::PolyCoeff(d) => format!("poly{d}"),
            FeatureKind::PolyResidual => "poly_res".into(),
            FeatureKind::DftMag(k) => format!("dft{k}"),
        }
    }
}

/// One feature: a kind evaluated on one channel over one window length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub channel: Channel,
    pub kind: FeatureKind,
    pub window_s: f64,
}

impl FeatureSpec {
    /// Window length in samples at the nominal rate.
    pub fn window_samples(&self) -> usize {
        (self.window_s * SAMPLE_RATE_HZ).round() as usize
    }

    /// Stable human-readable name, used for CSV headers and reports.
    pub fn name(&self) -> String {
        format!("{}:{}:{}s", self.channel.as_str(), self.kind.label(), self.window_s)
    }
}

/// Ordered specification of every extracted feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCatalog {
    pub specs: Vec<FeatureSpec>,
}

impl FeatureCatalog {
    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.specs.iter().map(|s| s.name()).collect()
    }
}

/// Builds the canonical catalog: for each channel, energy/min/max over the
/// statistics windows, polynomial coefficients and residual over the
/// polynomial windows, DFT magnitudes over the DFT windows.
pub fn feature_catalog() -> FeatureCatalog {
    let mut specs = Vec::with_capacity(156);
    for channel in Channel::ALL {
        for kind in [FeatureKind::Energy, FeatureKind::Min, FeatureKind::Max] {
            for window_s in STAT_WINDOWS_S {
                specs.push(FeatureSpec { channel, kind, window_s });
            }
        }
        for degree in 0..=POLY_MAX_DEGREE {
            for window_s in POLY_WINDOWS_S {
                specs.push(FeatureSpec {
                    channel,
                    kind: FeatureKind::PolyCoeff(degree),
                    window_s,
                });
            }
        }
        for window_s in POLY_WINDOWS_S {
            specs.push(FeatureSpec {
                channel,
                kind: FeatureKind::PolyResidual,
                window_s,
            });
        }
        for order in 0..=DFT_MAX_ORDER {
            for window_s in DFT_WINDOWS_S {
                specs.push(FeatureSpec {
                    channel,
                    kind: FeatureKind::DftMag(order),
                    window_s,
                });
            }
        }
    }
    FeatureCatalog { specs }
}

/// Energy (mean power), minimum and maximum of a window.
///
/// Energy is (1/N)·Σx² so values stay comparable across window sizes.
pub fn stat_features(window: &[f64]) -> Result<(f64, f64, f64), FeatureError> {
    if window.is_empty() {
        return Err(FeatureError::EmptyWindow);
    }
    let energy = window.iter().map(|x| x * x).sum::<f64>() / window.len() as f64;
    let mut min = window[0];
    let mut max = window[0];
    for &x in &window[1..] {
        if x < min {
            min = x;
        }
        if x > max {
            max = x;
        }
    }
    Ok((energy, min, max))
}

/// One evaluated feature vector, aligned with the catalog order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub frame_index: usize,
    /// False while the largest window does not fit yet; such frames must not
    /// reach the detector.
    pub valid: bool,
}

/// Catalog plus the precomputed per-window tables needed to evaluate it.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    catalog: FeatureCatalog,
    gram: Vec<(usize, GramBasis)>,
    dft: Vec<(usize, DftTable)>,
}

impl FeatureExtractor {
    pub fn new(catalog: FeatureCatalog) -> FeatureExtractor {
        let mut gram_lens: Vec<usize> = Vec::new();
        let mut dft_lens: Vec<usize> = Vec::new();
        for spec in &catalog.specs {
            let n = spec.window_samples();
            match spec.kind {
                FeatureKind::PolyCoeff(_) | FeatureKind::PolyResidual => {
                    if !gram_lens.contains(&n) {
                        gram_lens.push(n);
                    }
                }
                FeatureKind::DftMag(_) => {
                    if !dft_lens.contains(&n) {
                        dft_lens.push(n);
                    }
                }
                _ => {}
            }
        }
        let gram = gram_lens
            .into_iter()
            .map(|n| (n, GramBasis::new(n, POLY_MAX_DEGREE).expect("catalog window long enough")))
            .collect();
        let dft = dft_lens
            .into_iter()
            .map(|n| (n, DftTable::new(n).expect("catalog uses supported DFT lengths")))
            .collect();
        FeatureExtractor { catalog, gram, dft }
    }

    pub fn canonical() -> FeatureExtractor {
        FeatureExtractor::new(feature_catalog())
    }

    pub fn catalog(&self) -> &FeatureCatalog {
        &self.catalog
    }

    /// Evaluates every catalog feature on the causal window ending at
    /// `frame_index` (inclusive). Features whose window does not fit yet are
    /// 0 and the vector is flagged invalid until the largest window fits.
    pub fn extract(&self, series: &ChannelSeries, frame_index: usize) -> FeatureVector {
        assert!(frame_index < series.len(), "frame index out of range");
        let available = frame_index + 1;
        let valid = available >= WARMUP_SAMPLES;

        // per-channel scratch of the last WARMUP_SAMPLES values
        let keep = available.min(WARMUP_SAMPLES);
        let first = frame_index + 1 - keep;
        let mut scratch: [Vec<f64>; 4] = [
            Vec::with_capacity(keep),
            Vec::with_capacity(keep),
            Vec::with_capacity(keep),
            Vec::with_capacity(keep),
        ];
        for frame in &series.frames[first..=frame_index] {
            for (ch, buf) in scratch.iter_mut().enumerate() {
                buf.push(frame.get(ch));
            }
        }

        // cache (channel, window) → poly projection so the four coefficient
        // specs and the residual share one solve
        let mut poly_cache: Vec<((usize, usize), (Vec<f64>, f64))> = Vec::new();
        let mut dft_cache: Vec<((usize, usize), [f64; DFT_MAX_ORDER + 1])> = Vec::new();

        let mut values = Vec::with_capacity(self.catalog.len());
        for spec in &self.catalog.specs {
            let n = spec.window_samples();
            if n > available {
                values.push(0.0);
                continue;
            }
            let buf = &scratch[spec.channel.index()];
            let window = &buf[buf.len() - n..];
            let value = match spec.kind {
                FeatureKind::Energy => window.iter().map(|x| x * x).sum::<f64>() / n as f64,
                FeatureKind::Min => window.iter().cloned().fold(f64::INFINITY, f64::min),
                FeatureKind::Max => window.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                FeatureKind::PolyCoeff(degree) => {
                    let key = (spec.channel.index(), n);
                    let entry = match poly_cache.iter().find(|(k, _)| *k == key) {
                        Some((_, v)) => v.clone(),
                        None => {
                            let basis = &self.gram.iter().find(|(l, _)| *l == n).expect("basis cached").1;
                            let v = basis.project(window);
                            poly_cache.push((key, v.clone()));
                            v
                        }
                    };
                    entry.0[degree]
                }
                FeatureKind::PolyResidual => {
                    let key = (spec.channel.index(), n);
                    let entry = match poly_cache.iter().find(|(k, _)| *k == key) {
                        Some((_, v)) => v.clone(),
                        None => {
                            let basis = &self.gram.iter().find(|(l, _)| *l == n).expect("basis cached").1;
                            let v = basis.project(window);
                            poly_cache.push((key, v.clone()));
                            v
                        }
                    };
                    entry.1
                }
                FeatureKind::DftMag(order) => {
                    let key = (spec.channel.index(), n);
                    let mags = match dft_cache.iter().find(|(k, _)| *k == key) {
                        Some((_, v)) => *v,
                        None => {
                            let table = &self.dft.iter().find(|(l, _)| *l == n).expect("table cached").1;
                            let v = table.normalized_magnitudes(window);
                            dft_cache.push((key, v));
                            v
                        }
                    };
                    mags[order]
                }
            };
            values.push(value);
        }
        FeatureVector {
            values,
            frame_index,
            valid,
        }
    }

    /// Feature vectors for every frame of a series.
    pub fn extract_all(&self, series: &ChannelSeries) -> Vec<FeatureVector> {
        (0..series.len()).map(|i| self.extract(series, i)).collect()
    }
}

/// Evaluates the catalog at one frame. Convenience wrapper; batch callers
/// should build a [`FeatureExtractor`] once and reuse it.
pub fn extract_features(series: &ChannelSeries, frame_index: usize, catalog: &FeatureCatalog) -> FeatureVector {
    FeatureExtractor::new(catalog.clone()).extract(series, frame_index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::ChannelFrame;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn series_from_channels(cols: [Vec<f64>; 4]) -> ChannelSeries {
        let n = cols[0].len();
        let frames = (0..n)
            .map(|i| ChannelFrame {
                acc_xy_mag: cols[0][i],
                acc_z: cols[1][i],
                gyro_xy_mag: cols[2][i],
                gyro_z: cols[3][i],
            })
            .collect();
        ChannelSeries {
            rate: SAMPLE_RATE_HZ,
            frames,
            times: (0..n).map(|i| i as f64 / SAMPLE_RATE_HZ).collect(),
        }
    }

    fn random_series(n: usize, seed: u64) -> ChannelSeries {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let mut col = || (0..n).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>();
        series_from_channels([col(), col(), col(), col()])
    }

    #[test]
    fn catalog_has_156_features_in_canonical_order() {
        let catalog = feature_catalog();
        assert_eq!(catalog.len(), 156);
        assert_eq!(
            catalog.specs[0],
            FeatureSpec {
                channel: Channel::AccXyMag,
                kind: FeatureKind::Energy,
                window_s: 0.1
            }
        );
        // per-channel block: 12 stats + 12 coefficients + 3 residuals + 12 DFT
        assert_eq!(catalog.specs.iter().filter(|s| s.channel == Channel::AccXyMag).count(), 39);
        // deterministic across invocations
        assert_eq!(feature_catalog(), catalog);
    }

    #[test]
    fn catalog_names_are_unique() {
        let names = feature_catalog().names();
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
    }

    #[test]
    fn stat_features_examples() {
        assert_eq!(stat_features(&[1.0, 1.0, 1.0, 1.0]).unwrap(), (1.0, 1.0, 1.0));
        assert_eq!(stat_features(&[0.0, 0.0, 0.0]).unwrap(), (0.0, 0.0, 0.0));
        // (9 + 16) / 2
        assert_eq!(stat_features(&[3.0, -4.0]).unwrap(), (12.5, -4.0, 3.0));
        assert_eq!(stat_features(&[]), Err(FeatureError::EmptyWindow));
    }

    #[test]
    fn energy_is_scale_covariant() {
        let window = [0.5, -1.5, 2.5, 0.1];
        let (e1, _, _) = stat_features(&window).unwrap();
        let scaled: Vec<f64> = window.iter().map(|x| 3.0 * x).collect();
        let (e9, _, _) = stat_features(&scaled).unwrap();
        assert!((e9 - 9.0 * e1).abs() < 1e-9);
    }

    #[test]
    fn warmup_frames_are_invalid() {
        let series = random_series(300, 41);
        let extractor = FeatureExtractor::canonical();
        let v = extractor.extract(&series, 10);
        assert!(!v.valid);
        assert_eq!(v.values.len(), 156);
        let v = extractor.extract(&series, 254);
        assert!(!v.valid);
        let v = extractor.extract(&series, 255);
        assert!(v.valid);
        assert!(v.values.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn zero_series_gives_zero_features() {
        let series = series_from_channels([vec![0.0; 300], vec![0.0; 300], vec![0.0; 300], vec![0.0; 300]]);
        let extractor = FeatureExtractor::canonical();
        let v = extractor.extract(&series, 299);
        assert!(v.valid);
        assert!(v.values.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn extraction_is_causal() {
        let extractor = FeatureExtractor::canonical();
        let series = random_series(400, 42);
        let at = 300;
        let before = extractor.extract(&series, at);

        let mut mutated = series.clone();
        for frame in mutated.frames.iter_mut().skip(at + 1) {
            frame.acc_xy_mag += 100.0;
            frame.acc_z -= 50.0;
            frame.gyro_xy_mag *= 3.0;
            frame.gyro_z = -frame.gyro_z + 7.0;
        }
        let after = extractor.extract(&mutated, at);
        assert_eq!(before.values, after.values);
    }

    #[test]
    fn extract_matches_free_functions() {
        let extractor = FeatureExtractor::canonical();
        let series = random_series(300, 43);
        let frame = 280;
        let v = extractor.extract(&series, frame);
        for (spec, &value) in extractor.catalog().specs.iter().zip(&v.values) {
            let n = spec.window_samples();
            let col = series.channel(spec.channel.index());
            let window = &col[frame + 1 - n..=frame];
            let expect = match spec.kind {
                FeatureKind::Energy => stat_features(window).unwrap().0,
                FeatureKind::Min => stat_features(window).unwrap().1,
                FeatureKind::Max => stat_features(window).unwrap().2,
                FeatureKind::PolyCoeff(d) => gram_poly_features(window, POLY_MAX_DEGREE).unwrap().0[d],
                FeatureKind::PolyResidual => gram_poly_features(window, POLY_MAX_DEGREE).unwrap().1,
                FeatureKind::DftMag(k) => dft_features(window).unwrap()[k],
            };
            assert!(
                (value - expect).abs() < 1e-12,
                "{}: {value} vs {expect}",
                spec.name()
            );
        }
    }

    #[test]
    fn convenience_wrapper_agrees_with_extractor() {
        let series = random_series(300, 44);
        let catalog = feature_catalog();
        let a = extract_features(&series, 270, &catalog);
        let b = FeatureExtractor::canonical().extract(&series, 270);
        assert_eq!(a, b);
    }
}
