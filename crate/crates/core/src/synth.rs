//! Synthetic utterances with exactly known syllable nuclei.
//!
//! Each syllable is a harmonic tone under a raised-cosine amplitude envelope,
//! with harmonics restricted to a chosen set of bands. Gaps between syllables
//! are silent or, with some probability, carry band-limited fricative noise
//! in the two highest bands. A white noise floor runs under everything.

use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::{AudioClip, Corpus, UtteranceRecord, VowelSegment};
use crate::envelope::{PipelineConfig, WeightVector, NUM_BANDS};
use crate::error::{Error, Result};

/// Peak amplitude of the loudest possible vowel.
const PEAK_AMPLITUDE: f64 = 0.9;
/// Per-syllable loudness is drawn from this fraction range of the peak.
const SYLLABLE_GAIN_RANGE: (f64, f64) = (0.5, 1.0);
/// Relative f0 jitter per syllable.
const F0_JITTER: f64 = 0.05;
/// Fricative level relative to the vowel peak, in dB.
const FRICATIVE_DB: f64 = -10.0;
/// Harmonics must sit this far inside a band edge.
const HARMONIC_EDGE_MARGIN_HZ: f64 = 50.0;
/// Vowel segment is the central fraction of each syllable.
const VOWEL_FRACTION: f64 = 0.6;
/// Fricative noise occupies these 1-based bands.
const FRICATIVE_BANDS: [usize; 2] = [6, 7];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_syllables: usize,
    pub syllable_dur_s: f64,
    pub gap_dur_s: f64,
    pub f0_hz: f64,
    /// 1-based band numbers that receive harmonic energy.
    pub formant_bands: Vec<usize>,
    pub fricative_prob: f64,
    pub noise_db: f64,
    pub sample_rate: u32,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_syllables: 5,
            syllable_dur_s: 0.18,
            gap_dur_s: 0.08,
            f0_hz: 120.0,
            formant_bands: vec![1, 2, 3],
            fricative_prob: 0.3,
            noise_db: -40.0,
            sample_rate: 16000,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.syllable_dur_s > 0.0 && self.gap_dur_s > 0.0) {
            return Err(Error::validation(
                "syllable and gap durations must be positive",
            ));
        }
        if self.f0_hz.is_nan() || self.f0_hz <= 0.0 {
            return Err(Error::validation("f0_hz must be positive"));
        }
        if !(0.0..=1.0).contains(&self.fricative_prob) {
            return Err(Error::validation("fricative_prob must be in [0, 1]"));
        }
        if self.sample_rate < 8000 {
            return Err(Error::validation("sample_rate must be at least 8000 Hz"));
        }
        if self.formant_bands.is_empty()
            || self.formant_bands.iter().any(|&b| b == 0 || b > NUM_BANDS)
        {
            return Err(Error::validation(format!(
                "formant_bands must be a non-empty subset of 1..={NUM_BANDS}"
            )));
        }
        if !self.noise_db.is_finite() {
            return Err(Error::validation("noise_db must be finite"));
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        self.n_syllables as f64 * self.syllable_dur_s
            + (self.n_syllables + 1) as f64 * self.gap_dur_s
    }

    /// Weight 1 on the formant bands, 0 elsewhere.
    pub fn oracle_weights(&self) -> WeightVector {
        let mut w = [0.0; NUM_BANDS];
        for &b in &self.formant_bands {
            w[b - 1] = 1.0;
        }
        WeightVector(w)
    }

    /// Harmonic frequencies lying well inside the formant bands.
    pub fn harmonics(&self, f0: f64) -> Vec<f64> {
        let edges = PipelineConfig::default().band_edges_hz;
        let nyquist = self.sample_rate as f64 / 2.0;
        (1..)
            .map(|k| k as f64 * f0)
            .take_while(|&f| f < nyquist)
            .filter(|&f| {
                self.formant_bands.iter().any(|&b| {
                    f >= edges[b - 1] + HARMONIC_EDGE_MARGIN_HZ
                        && f <= edges[b] - HARMONIC_EDGE_MARGIN_HZ
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SynthUtterance {
    pub record: UtteranceRecord,
    /// Time of each syllable's amplitude maximum.
    pub nucleus_times_s: Vec<f64>,
}

impl SynthUtterance {
    pub fn clip(&self) -> &AudioClip {
        &self.record.audio
    }
}

fn harmonic_amplitudes(n: usize) -> Vec<f64> {
    (0..n).map(|k| 1.0 / ((k + 1) as f64).sqrt()).collect()
}

/// RMS of the harmonic sum once scaled to unit peak bound.
fn tone_rms(amps: &[f64]) -> f64 {
    let sum: f64 = amps.iter().sum();
    if sum > 0.0 {
        amps.iter().map(|a| a * a / 2.0).sum::<f64>().sqrt() / sum
    } else {
        0.0
    }
}

fn raised_cosine(i: usize, len: usize) -> f64 {
    0.5 * (1.0 - (2.0 * PI * (i as f64 + 0.5) / len as f64).cos())
}

/// White Gaussian noise restricted to `[lo_hz, hi_hz]` by spectral masking, unit RMS.
fn band_noise(
    rng: &mut ChaCha8Rng,
    len: usize,
    sample_rate: f64,
    lo_hz: f64,
    hi_hz: f64,
) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = (0..len)
        .map(|_| Complex::new(StandardNormal.sample(rng), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let f = k.min(len - k) as f64 * sample_rate / len as f64;
        if f < lo_hz || f > hi_hz {
            *v = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let out: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
    if rms > 0.0 {
        out.iter().map(|v| v / rms).collect()
    } else {
        out
    }
}

pub fn gen_utterance(spec: &SynthSpec, id: &str) -> Result<SynthUtterance> {
    spec.validate()?;
    let sr = spec.sample_rate as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total = (spec.duration_s() * sr).round() as usize;
    let syl_len = (spec.syllable_dur_s * sr).round() as usize;
    let gap_len = (spec.gap_dur_s * sr).round() as usize;
    let mut x = vec![0.0; total];
    let mut nuclei = Vec::with_capacity(spec.n_syllables);
    let mut segments = Vec::with_capacity(spec.n_syllables);

    let edges = PipelineConfig::default().band_edges_hz;
    let fric_lo = edges[FRICATIVE_BANDS[0] - 1];
    let fric_hi = edges[FRICATIVE_BANDS[1]].min(sr / 2.0);
    let fricative_gap = |rng: &mut ChaCha8Rng, x: &mut [f64], start: usize, vowel_rms: f64| {
        if rng.random::<f64>() < spec.fricative_prob && gap_len > 0 {
            let noise = band_noise(rng, gap_len, sr, fric_lo, fric_hi);
            let level = vowel_rms * 10f64.powf(FRICATIVE_DB / 20.0);
            for (i, n) in noise.iter().enumerate() {
                if let Some(s) = x.get_mut(start + i) {
                    *s += level * raised_cosine(i, gap_len) * n;
                }
            }
        }
    };

    let mut pos = 0usize;
    for _ in 0..spec.n_syllables {
        let f0 = spec.f0_hz * (1.0 + F0_JITTER * (2.0 * rng.random::<f64>() - 1.0));
        let gain = rng.random_range(SYLLABLE_GAIN_RANGE.0..=SYLLABLE_GAIN_RANGE.1);
        let harmonics = spec.harmonics(f0);
        let amps = harmonic_amplitudes(harmonics.len());
        let amp_sum: f64 = amps.iter().sum();
        let phases: Vec<f64> = harmonics
            .iter()
            .map(|_| 2.0 * PI * rng.random::<f64>())
            .collect();
        fricative_gap(&mut rng, &mut x, pos, PEAK_AMPLITUDE * tone_rms(&amps));
        pos += gap_len;
        let peak = PEAK_AMPLITUDE * gain;
        for i in 0..syl_len {
            let t = i as f64 / sr;
            let tone: f64 = harmonics
                .iter()
                .zip(&amps)
                .zip(&phases)
                .map(|((f, a), ph)| a * (2.0 * PI * f * t + ph).sin())
                .sum();
            if let Some(s) = x.get_mut(pos + i) {
                *s += peak * raised_cosine(i, syl_len) * tone / amp_sum.max(f64::MIN_POSITIVE);
            }
        }
        let start_s = pos as f64 / sr;
        let dur = syl_len as f64 / sr;
        nuclei.push(start_s + 0.5 * dur);
        let margin = 0.5 * (1.0 - VOWEL_FRACTION) * dur;
        segments.push(VowelSegment {
            start_s: start_s + margin,
            end_s: start_s + dur - margin,
        });
        pos += syl_len;
    }
    // trailing gap uses the nominal vowel level
    let nominal = harmonic_amplitudes(spec.harmonics(spec.f0_hz).len());
    fricative_gap(&mut rng, &mut x, pos, PEAK_AMPLITUDE * tone_rms(&nominal));

    let noise_sd = PEAK_AMPLITUDE * 10f64.powf(spec.noise_db / 20.0);
    for s in x.iter_mut() {
        let n: f64 = StandardNormal.sample(&mut rng);
        *s = (*s + noise_sd * n).clamp(-1.0, 1.0);
    }

    let duration = total as f64 / sr;
    let segments = segments.into_iter().map(|s| s.padded(duration)).collect();
    let clip = AudioClip::new(x, spec.sample_rate)?;
    Ok(SynthUtterance {
        record: UtteranceRecord::new(id, clip, segments),
        nucleus_times_s: nuclei,
    })
}

/// Template spec plus the range from which each utterance's syllable count is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthCorpusSpec {
    #[serde(flatten)]
    pub utterance: SynthSpec,
    pub min_syllables: usize,
    pub max_syllables: usize,
}

impl Default for SynthCorpusSpec {
    fn default() -> Self {
        Self {
            utterance: SynthSpec::default(),
            min_syllables: 4,
            max_syllables: 20,
        }
    }
}

impl SynthCorpusSpec {
    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn utterance_id(index: usize) -> String {
    format!("synth_{index:04}")
}

/// Per-utterance syllable counts and seeds are drawn from one master stream.
pub fn gen_corpus(spec: &SynthCorpusSpec, n_utterances: usize, seed: u64) -> Result<Corpus> {
    if n_utterances == 0 {
        return Err(Error::validation("n_utterances must be at least 1"));
    }
    if spec.min_syllables > spec.max_syllables {
        return Err(Error::validation("min_syllables exceeds max_syllables"));
    }
    spec.utterance.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let specs: Vec<SynthSpec> = (0..n_utterances)
        .map(|_| SynthSpec {
            n_syllables: master.random_range(spec.min_syllables..=spec.max_syllables),
            seed: master.next_u64(),
            ..spec.utterance.clone()
        })
        .collect();
    let utterances = specs
        .par_iter()
        .enumerate()
        .map(|(i, s)| gen_utterance(s, &utterance_id(i)).map(|u| u.record))
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus::new(utterances))
}
