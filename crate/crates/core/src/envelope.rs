//! Sub-band sonority envelope.
//!
//! A clip is cut into Hamming-windowed frames, each frame's power spectrum is
//! pooled into seven trapezoidal bands, every band is normalized to its
//! per-utterance maximum and log-compressed, the bands are combined with a
//! weight vector and the result is low-pass smoothed without phase shift.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::filter::{filtfilt_symmetric, Biquad};

pub const NUM_BANDS: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub window_s: f64,
    pub hop_s: f64,
    pub energy_threshold_db: f64,
    pub smoothing_cutoff_hz: f64,
    pub band_edges_hz: Vec<f64>,
    pub transition_width_hz: f64,
    pub log_floor: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window_s: 0.020,
            hop_s: 0.010,
            energy_threshold_db: -30.0,
            smoothing_cutoff_hz: 7.0,
            band_edges_hz: vec![60.0, 370.0, 800.0, 1400.0, 2250.0, 3450.0, 5130.0, 7500.0],
            transition_width_hz: 50.0,
            log_floor: 1e-6,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let edges = &self.band_edges_hz;
        if edges.len() != NUM_BANDS + 1 {
            return Err(Error::validation(format!(
                "band_edges_hz needs {} values, found {}",
                NUM_BANDS + 1,
                edges.len()
            )));
        }
        if edges.iter().any(|e| !e.is_finite() || *e < 0.0)
            || edges.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::validation(
                "band_edges_hz must be strictly ascending and non-negative",
            ));
        }
        if !(self.hop_s > 0.0 && self.hop_s <= self.window_s) {
            return Err(Error::validation("need 0 < hop_s <= window_s"));
        }
        if !(self.smoothing_cutoff_hz > 0.0 && self.smoothing_cutoff_hz < 0.5 / self.hop_s) {
            return Err(Error::validation(
                "smoothing_cutoff_hz must be positive and below half the frame rate",
            ));
        }
        if !(self.transition_width_hz >= 0.0 && self.transition_width_hz.is_finite()) {
            return Err(Error::validation(
                "transition_width_hz must be non-negative",
            ));
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return Err(Error::validation("log_floor must be positive"));
        }
        if !self.energy_threshold_db.is_finite() {
            return Err(Error::validation("energy_threshold_db must be finite"));
        }
        Ok(())
    }

    /// Reads TOML or JSON depending on the file extension (`.json` → JSON, else TOML).
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"))
        {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| Error::Toml(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Toml(e.to_string()))
    }

    fn window_samples(&self, sample_rate: u32) -> usize {
        (self.window_s * sample_rate as f64).round() as usize
    }

    fn hop_samples(&self, sample_rate: u32) -> usize {
        ((self.hop_s * sample_rate as f64).round() as usize).max(1)
    }

    /// Band `band`'s trapezoid gain at `freq_hz`. Adjacent bands sum to 1 across a shared edge.
    pub fn band_gain(&self, band: usize, freq_hz: f64) -> f64 {
        let lo = self.band_edges_hz[band];
        let hi = self.band_edges_hz[band + 1];
        let half = 0.5 * self.transition_width_hz;
        if half == 0.0 {
            return if freq_hz >= lo && freq_hz < hi {
                1.0
            } else {
                0.0
            };
        }
        let rise = ((freq_hz - (lo - half)) / (2.0 * half)).clamp(0.0, 1.0);
        let fall = (((hi + half) - freq_hz) / (2.0 * half)).clamp(0.0, 1.0);
        rise.min(fall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(pub [f64; NUM_BANDS]);

impl WeightVector {
    pub fn scaled(&self, c: f64) -> Self {
        WeightVector(self.0.map(|w| w * c))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|w| w.is_finite())
    }
}

/// Hamming-windowed frames stored contiguously.
#[derive(Debug, Clone)]
pub struct Frames {
    data: Vec<f64>,
    frame_len: usize,
    hop: usize,
    count: usize,
    sample_rate: u32,
}

impl Frames {
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Effective hop in seconds after rounding to whole samples.
    pub fn hop_s(&self) -> f64 {
        self.hop as f64 / self.sample_rate as f64
    }

    pub fn frame_rate_hz(&self) -> f64 {
        self.sample_rate as f64 / self.hop as f64
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.frame_len..(i + 1) * self.frame_len]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.frame_len)
    }
}

/// Symmetric Hamming window of length `n`.
pub fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

pub fn frame_signal(clip: &AudioClip, config: &PipelineConfig) -> Result<Frames> {
    config.validate()?;
    let sr = clip.sample_rate();
    let w = config.window_samples(sr);
    let h = config.hop_samples(sr);
    if w == 0 {
        return Err(Error::validation("window shorter than one sample"));
    }
    let n = clip.len();
    if n < w {
        return Err(Error::validation(format!(
            "clip of {n} samples is shorter than one {w}-sample window"
        )));
    }
    let count = (n - w) / h + 1;
    let win = hamming(w);
    let samples = clip.samples();
    let mut data = Vec::with_capacity(count * w);
    for f in 0..count {
        let start = f * h;
        data.extend(
            samples[start..start + w]
                .iter()
                .zip(&win)
                .map(|(s, g)| s * g),
        );
    }
    Ok(Frames {
        data,
        frame_len: w,
        hop: h,
        count,
        sample_rate: sr,
    })
}

/// Raw (linear) trapezoid-weighted band energies, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RawBandEnergies {
    pub values: Vec<[f64; NUM_BANDS]>,
    pub frame_rate_hz: f64,
}

/// Per-bin gains for every band over the one-sided spectrum of an `nfft`-point DFT.
fn band_gain_table(
    config: &PipelineConfig,
    nfft: usize,
    sample_rate: u32,
) -> Vec<[f64; NUM_BANDS]> {
    let bin_hz = sample_rate as f64 / nfft as f64;
    (0..=nfft / 2)
        .map(|k| {
            let f = k as f64 * bin_hz;
            std::array::from_fn(|b| config.band_gain(b, f))
        })
        .collect()
}

pub fn band_energies(frames: &Frames, config: &PipelineConfig) -> RawBandEnergies {
    let nfft = frames.frame_len.next_power_of_two();
    let gains = band_gain_table(config, nfft, frames.sample_rate);
    let fft: Arc<dyn rustfft::Fft<f64>> = FftPlanner::new().plan_fft_forward(nfft);
    let mut buf = vec![Complex::new(0.0, 0.0); nfft];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut values = Vec::with_capacity(frames.len());
    for frame in frames.iter() {
        for (dst, &s) in buf.iter_mut().zip(frame) {
            *dst = Complex::new(s, 0.0);
        }
        for dst in &mut buf[frame.len()..] {
            *dst = Complex::new(0.0, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        let mut row = [0.0; NUM_BANDS];
        for (bin, g) in buf.iter().zip(&gains) {
            let p = bin.norm_sqr();
            for (acc, gain) in row.iter_mut().zip(g) {
                *acc += gain * p;
            }
        }
        values.push(row);
    }
    RawBandEnergies {
        values,
        frame_rate_hz: frames.frame_rate_hz(),
    }
}

/// Per-frame normalized log band energies.
#[derive(Debug, Clone, PartialEq)]
pub struct BandEnergyMatrix {
    pub values: Vec<[f64; NUM_BANDS]>,
    pub frame_rate_hz: f64,
}

impl BandEnergyMatrix {
    pub fn frames(&self) -> usize {
        self.values.len()
    }

    pub fn band(&self, b: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[b]).collect()
    }
}

pub fn normalize_and_log(raw: &RawBandEnergies, config: &PipelineConfig) -> BandEnergyMatrix {
    let mut max = [0.0f64; NUM_BANDS];
    for row in &raw.values {
        for (m, &v) in max.iter_mut().zip(row) {
            *m = m.max(v);
        }
    }
    let values = raw
        .values
        .iter()
        .map(|row| {
            std::array::from_fn(|b| {
                let v = if max[b] > 0.0 {
                    row[b] / max[b]
                } else {
                    row[b]
                };
                v.max(config.log_floor).ln()
            })
        })
        .collect();
    BandEnergyMatrix {
        values,
        frame_rate_hz: raw.frame_rate_hz,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeechMask {
    pub flags: Vec<bool>,
}

impl SpeechMask {
    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn speech_frames(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}

/// Flags frames whose energy is within `threshold_db` of the loudest frame (inclusive).
pub fn speech_mask_from_energies(energies: &[f64], threshold_db: f64) -> SpeechMask {
    let max = energies.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return SpeechMask {
            flags: vec![false; energies.len()],
        };
    }
    // relative slack so an energy ratio of exactly 10^(threshold/10) counts as speech
    let min_ratio = 10f64.powf(threshold_db / 10.0) * (1.0 - 1e-12);
    SpeechMask {
        flags: energies
            .iter()
            .map(|&e| e > 0.0 && e / max >= min_ratio)
            .collect(),
    }
}

pub fn speech_mask(frames: &Frames, config: &PipelineConfig) -> SpeechMask {
    let energies: Vec<f64> = frames
        .iter()
        .map(|f| f.iter().map(|s| s * s).sum())
        .collect();
    speech_mask_from_energies(&energies, config.energy_threshold_db)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SonorityEnvelope {
    pub values: Vec<f64>,
    pub frame_rate_hz: f64,
}

impl SonorityEnvelope {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn weighted_envelope(matrix: &BandEnergyMatrix, weights: &WeightVector) -> SonorityEnvelope {
    SonorityEnvelope {
        values: matrix
            .values
            .iter()
            .map(|row| row.iter().zip(&weights.0).map(|(e, w)| e * w).sum())
            .collect(),
        frame_rate_hz: matrix.frame_rate_hz,
    }
}

pub fn smoothing_filter(config: &PipelineConfig, frame_rate_hz: f64) -> Biquad {
    Biquad::butterworth_lowpass(config.smoothing_cutoff_hz, frame_rate_hz)
}

pub fn smooth(envelope: &SonorityEnvelope, config: &PipelineConfig) -> SonorityEnvelope {
    let filter = smoothing_filter(config, envelope.frame_rate_hz);
    SonorityEnvelope {
        values: filtfilt_symmetric(&filter, &envelope.values),
        frame_rate_hz: envelope.frame_rate_hz,
    }
}

/// Everything about a clip that does not depend on the weights.
///
/// Smoothing is linear, so the smoothed envelope for any weight vector is the
/// same weighted sum of the individually smoothed band contours.
#[derive(Debug, Clone)]
pub struct BandAnalysis {
    pub matrix: BandEnergyMatrix,
    pub smoothed_bands: [Vec<f64>; NUM_BANDS],
    pub mask: SpeechMask,
    pub hop_s: f64,
    pub duration_s: f64,
}

impl BandAnalysis {
    pub fn new(clip: &AudioClip, config: &PipelineConfig) -> Result<Self> {
        let frames = frame_signal(clip, config)?;
        let matrix = normalize_and_log(&band_energies(&frames, config), config);
        let filter = smoothing_filter(config, matrix.frame_rate_hz);
        let smoothed_bands = std::array::from_fn(|b| filtfilt_symmetric(&filter, &matrix.band(b)));
        Ok(Self {
            mask: speech_mask(&frames, config),
            matrix,
            smoothed_bands,
            hop_s: frames.hop_s(),
            duration_s: clip.duration_s(),
        })
    }

    pub fn frames(&self) -> usize {
        self.matrix.frames()
    }

    /// Smoothed envelope for `weights`, written into `out`.
    pub fn envelope_into(&self, weights: &WeightVector, out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.frames(), 0.0);
        for (band, &w) in self.smoothed_bands.iter().zip(&weights.0) {
            if w == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(band) {
                *o += w * v;
            }
        }
    }

    pub fn envelope(&self, weights: &WeightVector) -> SonorityEnvelope {
        let mut values = Vec::new();
        self.envelope_into(weights, &mut values);
        SonorityEnvelope {
            values,
            frame_rate_hz: self.matrix.frame_rate_hz,
        }
    }
}

/// Intermediate products of one end-to-end envelope computation.
#[derive(Debug, Clone)]
pub struct EnvelopeTrace {
    pub matrix: BandEnergyMatrix,
    pub raw: SonorityEnvelope,
    pub smoothed: SonorityEnvelope,
    pub mask: SpeechMask,
    pub hop_s: f64,
}

pub fn compute_envelope_trace(
    clip: &AudioClip,
    weights: &WeightVector,
    config: &PipelineConfig,
) -> Result<EnvelopeTrace> {
    let frames = frame_signal(clip, config)?;
    let matrix = normalize_and_log(&band_energies(&frames, config), config);
    let raw = weighted_envelope(&matrix, weights);
    let smoothed = smooth(&raw, config);
    Ok(EnvelopeTrace {
        mask: speech_mask(&frames, config),
        hop_s: frames.hop_s(),
        matrix,
        raw,
        smoothed,
    })
}

/// Frames, band energies, normalization, weighting and smoothing in sequence.
pub fn compute_envelope(
    clip: &AudioClip,
    weights: &WeightVector,
    config: &PipelineConfig,
) -> Result<(SonorityEnvelope, SpeechMask)> {
    let t = compute_envelope_trace(clip, weights, config)?;
    Ok((t.smoothed, t.mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(samples: Vec<f64>, sr: u32) -> AudioClip {
        AudioClip::new(samples, sr).unwrap()
    }

    fn sine(freq: f64, sr: u32, n: usize, amp: f64) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / sr as f64).sin())
            .collect()
    }

    #[test]
    fn one_second_gives_99_frames() {
        let f = frame_signal(&clip(vec![0.0; 16000], 16000), &PipelineConfig::default()).unwrap();
        assert_eq!(f.len(), 99);
        assert_eq!(f.frame_len(), 320);
        assert_eq!(f.hop_s(), 0.01);
    }

    #[test]
    fn single_window_and_too_short() {
        let cfg = PipelineConfig::default();
        assert_eq!(
            frame_signal(&clip(vec![0.0; 320], 16000), &cfg)
                .unwrap()
                .len(),
            1
        );
        assert!(matches!(
            frame_signal(&clip(vec![0.0; 319], 16000), &cfg),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn constant_signal_frames_equal_window() {
        let f = frame_signal(&clip(vec![1.0; 800], 16000), &PipelineConfig::default()).unwrap();
        let w = hamming(320);
        for frame in f.iter() {
            assert_eq!(frame, &w[..]);
        }
    }

    #[test]
    fn silence_has_zero_band_energy() {
        let cfg = PipelineConfig::default();
        let f = frame_signal(&clip(vec![0.0; 4000], 16000), &cfg).unwrap();
        let e = band_energies(&f, &cfg);
        assert!(e.values.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn trapezoid_edges() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.band_gain(1, 800.0), 0.5);
        assert_eq!(cfg.band_gain(2, 800.0), 0.5);
        assert_eq!(cfg.band_gain(2, 775.0), 0.0);
        assert_eq!(cfg.band_gain(2, 825.0), 1.0);
        assert_eq!(cfg.band_gain(2, 1000.0), 1.0);
        assert_eq!(cfg.band_gain(2, 1425.0), 0.0);
        for f in (700..900).map(|f| f as f64) {
            let s = cfg.band_gain(1, f) + cfg.band_gain(2, f);
            assert!((s - 1.0).abs() < 1e-12, "{f}: {s}");
        }
    }

    /// Oracle: a direct O(N^2) DFT power spectrum, weighted by independently
    /// written trapezoids.
    fn oracle_band_shares(frame: &[f64], sr: f64, nfft: usize, edges: &[f64]) -> Vec<f64> {
        let tri = |f: f64, lo: f64, hi: f64| -> f64 {
            if f <= lo - 25.0 || f >= hi + 25.0 {
                0.0
            } else if f < lo + 25.0 {
                (f - lo + 25.0) / 50.0
            } else if f > hi - 25.0 {
                (hi + 25.0 - f) / 50.0
            } else {
                1.0
            }
        };
        let mut bands = vec![0.0; edges.len() - 1];
        for k in 0..=nfft / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, &x) in frame.iter().enumerate() {
                let ph = -2.0 * PI * (k * n) as f64 / nfft as f64;
                re += x * ph.cos();
                im += x * ph.sin();
            }
            let f = k as f64 * sr / nfft as f64;
            for (b, acc) in bands.iter_mut().enumerate() {
                *acc += tri(f, edges[b], edges[b + 1]) * (re * re + im * im);
            }
        }
        let total: f64 = bands.iter().sum();
        bands.iter().map(|b| b / total).collect()
    }

    #[test]
    fn khz_tone_lands_in_band_three() {
        let cfg = PipelineConfig::default();
        let f = frame_signal(&clip(sine(1000.0, 16000, 640, 1.0), 16000), &cfg).unwrap();
        let e = band_energies(&f, &cfg);
        let oracle = oracle_band_shares(f.frame(0), 16000.0, 512, &cfg.band_edges_hz);
        let total: f64 = e.values[0].iter().sum();
        for (got, want) in e.values[0].iter().zip(&oracle) {
            assert!((got / total - want).abs() < 1e-9);
        }
        assert!(e.values[0][2] / total >= 0.99);
        assert!(oracle[2] >= 0.99);
    }

    #[test]
    fn edge_tone_splits_evenly() {
        // 12.8 kHz: 256-sample window, 50 Hz bins, so 800 Hz is a bin centre
        let cfg = PipelineConfig::default();
        let f = frame_signal(&clip(sine(800.0, 12800, 1024, 1.0), 12800), &cfg).unwrap();
        assert_eq!(f.frame_len(), 256);
        let e = band_energies(&f, &cfg);
        let row = e.values[1];
        let rel = (row[1] - row[2]).abs() / (row[1] + row[2]);
        assert!(rel < 0.01, "{row:?}");
    }

    #[test]
    fn bands_above_nyquist_are_empty() {
        let cfg = PipelineConfig::default();
        // 8 kHz: Nyquist 4 kHz, band 7 (5130-7500) sees nothing
        let f = frame_signal(&clip(sine(440.0, 8000, 2000, 0.5), 8000), &cfg).unwrap();
        let m = normalize_and_log(&band_energies(&f, &cfg), &cfg);
        assert!(m.values.iter().all(|r| r[6] == cfg.log_floor.ln()));
    }

    #[test]
    fn normalize_examples() {
        let cfg = PipelineConfig::default();
        let raw = RawBandEnergies {
            values: vec![
                [0.5, 0.0, 2.0, 1.0, 1.0, 1.0, 1.0],
                [1.0, 0.0, 4.0, 1.0, 1.0, 1.0, 1.0],
            ],
            frame_rate_hz: 100.0,
        };
        let m = normalize_and_log(&raw, &cfg);
        assert_eq!(m.values[0][0], 0.5f64.ln());
        assert_eq!(m.values[1][0], 0.0);
        assert_eq!(m.values[0][1], 1e-6f64.ln());
        assert_eq!(m.values[1][2], 0.0);
    }

    #[test]
    fn speech_mask_cases() {
        let cfg = PipelineConfig::default();
        let f = frame_signal(&clip(vec![0.3; 4000], 16000), &cfg).unwrap();
        assert!(speech_mask(&f, &cfg).flags.iter().all(|&x| x));
        let f = frame_signal(&clip(vec![0.0; 4000], 16000), &cfg).unwrap();
        assert_eq!(speech_mask(&f, &cfg).speech_frames(), 0);
        let m = speech_mask_from_energies(&[1.0, 1e-3, 0.999e-3, 0.0], -30.0);
        assert_eq!(m.flags, vec![true, true, false, false]);
    }

    #[test]
    fn weighted_sum_examples() {
        let m = BandEnergyMatrix {
            values: vec![
                [-2.0; NUM_BANDS],
                [-1.0, -2.0, -3.0, -4.0, -5.0, -6.0, -7.0],
            ],
            frame_rate_hz: 100.0,
        };
        assert_eq!(
            weighted_envelope(&m, &WeightVector([0.0; 7])).values,
            vec![0.0, 0.0]
        );
        assert_eq!(
            weighted_envelope(&m, &WeightVector([1.0; 7])).values[0],
            -14.0
        );
        let mut onehot = [0.0; 7];
        onehot[3] = 1.0;
        assert_eq!(
            weighted_envelope(&m, &WeightVector(onehot)).values,
            m.band(3)
        );
    }

    #[test]
    fn smoothing_keeps_dc_and_bump_centre() {
        let cfg = PipelineConfig::default();
        let env = SonorityEnvelope {
            values: vec![-4.2; 80],
            frame_rate_hz: 100.0,
        };
        for v in smooth(&env, &cfg).values {
            assert!((v + 4.2).abs() < 1e-3 * 4.2);
        }
        let bump: Vec<f64> = (0..101)
            .map(|i| (-((i as f64 - 50.0) / 5.0).powi(2) / 2.0).exp())
            .collect();
        let out = smooth(
            &SonorityEnvelope {
                values: bump,
                frame_rate_hz: 100.0,
            },
            &cfg,
        );
        let argmax = out
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, 50);
        assert_eq!(
            smooth(
                &SonorityEnvelope {
                    values: vec![3.0],
                    frame_rate_hz: 100.0
                },
                &cfg
            )
            .values,
            vec![3.0]
        );
    }

    #[test]
    fn cached_and_direct_envelopes_agree() {
        let cfg = PipelineConfig::default();
        let mut s = sine(300.0, 16000, 8000, 0.4);
        for (i, v) in s.iter_mut().enumerate() {
            *v *= 0.5 + 0.5 * (2.0 * PI * 3.0 * i as f64 / 16000.0).sin();
        }
        let c = clip(s, 16000);
        let w = WeightVector([1.0, -0.5, 2.0, 0.3, 0.0, -1.2, 4.0]);
        let (direct, mask) = compute_envelope(&c, &w, &cfg).unwrap();
        let a = BandAnalysis::new(&c, &cfg).unwrap();
        let cached = a.envelope(&w);
        assert_eq!(mask, a.mask);
        for (x, y) in direct.values.iter().zip(&cached.values) {
            assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn silence_gives_floor_envelope_and_empty_mask() {
        let cfg = PipelineConfig::default();
        let (env, mask) =
            compute_envelope(&clip(vec![0.0; 8000], 16000), &WeightVector([1.0; 7]), &cfg).unwrap();
        let floor = 7.0 * cfg.log_floor.ln();
        assert!(env.values.iter().all(|v| (v - floor).abs() < 1e-9));
        assert_eq!(mask.speech_frames(), 0);
    }

    #[test]
    fn config_validation() {
        let mut c = PipelineConfig::default();
        assert!(c.validate().is_ok());
        c.band_edges_hz.swap(2, 3);
        assert!(c.validate().is_err());
        let c = PipelineConfig {
            hop_s: 0.03,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = PipelineConfig {
            smoothing_cutoff_hz: 60.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_toml_round_trip() {
        let c = PipelineConfig::default();
        let text = c.to_toml().unwrap();
        let back: PipelineConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert!(text.contains("band_edges_hz"));
    }
}
