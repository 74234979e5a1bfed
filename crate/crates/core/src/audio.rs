//! Audio loading, phonetic annotations and corpus manifests.
//!
//! Audio is 16-bit PCM mono RIFF/WAVE. Annotations are TIMIT-style `.PHN`
//! files (`start_sample end_sample label` per line). A JSON manifest binds
//! audio files to annotations (or to explicit nucleus segments) and names
//! the label set that counts as vowels.

use std::collections::BTreeSet;
use std::fs;
use std::io::{Read, Seek};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum length of a ground-truth vowel segment, in seconds.
pub const MIN_VOWEL_SEGMENT_S: f64 = 0.050;

/// Mono audio with amplitudes in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::validation("sample rate must be positive"));
        }
        if let Some((i, v)) = samples
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || v.abs() > 1.0)
        {
            return Err(Error::validation(format!(
                "sample {i} = {v} is outside [-1, 1]"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

fn map_hound(err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) => Error::Format {
            field: "riff",
            message: e.to_string(),
        },
        hound::Error::FormatError(msg) => Error::Format {
            field: "header",
            message: msg.to_string(),
        },
        hound::Error::TooWide => Error::Format {
            field: "bits_per_sample",
            message: "sample width too large".into(),
        },
        hound::Error::UnfinishedSample => Error::Format {
            field: "data",
            message: "data chunk ends inside a sample".into(),
        },
        hound::Error::Unsupported => Error::Format {
            field: "audio_format",
            message: "unsupported WAVE encoding".into(),
        },
        hound::Error::InvalidSampleFormat => Error::Format {
            field: "sample_format",
            message: "sample format does not match header".into(),
        },
    }
}

/// Decodes a 16-bit PCM mono WAVE stream.
pub fn read_wav_from<R: Read>(reader: R) -> Result<AudioClip> {
    let mut wav = hound::WavReader::new(reader).map_err(map_hound)?;
    let spec = wav.spec();
    if spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::Format {
            field: "audio_format",
            message: "only integer PCM is supported".into(),
        });
    }
    if spec.bits_per_sample != 16 {
        return Err(Error::Format {
            field: "bits_per_sample",
            message: format!("expected 16, found {}", spec.bits_per_sample),
        });
    }
    if spec.channels != 1 {
        return Err(Error::Format {
            field: "channels",
            message: format!("expected mono, found {} channels", spec.channels),
        });
    }
    if spec.sample_rate == 0 {
        return Err(Error::Format {
            field: "sample_rate",
            message: "sample rate is zero".into(),
        });
    }
    let samples = wav
        .samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(map_hound)?;
    AudioClip::new(samples, spec.sample_rate)
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_wav_from(std::io::BufReader::new(file))
}

/// Encodes a clip as 16-bit PCM, rounding `x * 32768` and saturating at the i16 range.
pub fn write_wav_to<W: std::io::Write + Seek>(clip: &AudioClip, writer: W) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::new(writer, spec).map_err(map_hound)?;
    for &s in &clip.samples {
        let q = (s * 32768.0)
            .round()
            .clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        w.write_sample(q).map_err(map_hound)?;
    }
    w.finalize().map_err(map_hound)
}

pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_wav_to(clip, std::io::BufWriter::new(file))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhoneSegment {
    pub start_s: f64,
    pub end_s: f64,
    pub label: String,
}

/// Parses `.PHN` text. Sample offsets are converted to seconds.
pub fn parse_phonetic_annotation_str(text: &str, sample_rate: u32) -> Result<Vec<PhoneSegment>> {
    if sample_rate == 0 {
        return Err(Error::validation("sample rate must be positive"));
    }
    let sr = sample_rate as f64;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let mut fields = line.split_whitespace();
        let Some(first) = fields.next() else {
            continue;
        };
        let parse_bound = |s: Option<&str>, what: &str| -> Result<u64> {
            let s = s.ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("missing {what}"),
            })?;
            s.parse::<u64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("{what} '{s}' is not a non-negative integer"),
            })
        };
        let start = parse_bound(Some(first), "start sample")?;
        let end = parse_bound(fields.next(), "end sample")?;
        let label: Vec<&str> = fields.collect();
        if label.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "missing label".into(),
            });
        }
        if start >= end {
            return Err(Error::validation(format!(
                "line {line_no}: start sample {start} is not before end sample {end}"
            )));
        }
        out.push(PhoneSegment {
            start_s: start as f64 / sr,
            end_s: end as f64 / sr,
            label: label.join(" "),
        });
    }
    Ok(out)
}

pub fn parse_phonetic_annotation(
    path: impl AsRef<Path>,
    sample_rate: u32,
) -> Result<Vec<PhoneSegment>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_phonetic_annotation_str(&text, sample_rate)
}

/// Ground-truth region in which a detected nucleus counts as correct.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VowelSegment {
    pub start_s: f64,
    pub end_s: f64,
}

impl VowelSegment {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start_s + self.end_s)
    }

    pub fn len_s(&self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start_s && t <= self.end_s
    }

    /// Widens a short segment symmetrically to [`MIN_VOWEL_SEGMENT_S`], then
    /// clamps to `[0, duration_s]`. Clamping does not shift the window.
    pub fn padded(self, duration_s: f64) -> Self {
        let (mut start, mut end) = (self.start_s, self.end_s);
        if end - start < MIN_VOWEL_SEGMENT_S {
            let mid = self.midpoint();
            start = mid - 0.5 * MIN_VOWEL_SEGMENT_S;
            end = mid + 0.5 * MIN_VOWEL_SEGMENT_S;
        }
        VowelSegment {
            start_s: start.max(0.0),
            end_s: end.min(duration_s),
        }
    }
}

/// Selects vowel phones and pads each to the minimum segment length.
pub fn derive_vowel_nuclei(
    segments: &[PhoneSegment],
    vowel_labels: &BTreeSet<String>,
    utterance_duration_s: f64,
) -> Vec<VowelSegment> {
    segments
        .iter()
        .filter(|s| vowel_labels.contains(&s.label))
        .map(|s| {
            VowelSegment {
                start_s: s.start_s,
                end_s: s.end_s,
            }
            .padded(utterance_duration_s)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct UtteranceRecord {
    pub id: String,
    pub audio: AudioClip,
    pub vowel_segments: Vec<VowelSegment>,
    pub syllable_count: usize,
}

impl UtteranceRecord {
    pub fn new(id: impl Into<String>, audio: AudioClip, vowel_segments: Vec<VowelSegment>) -> Self {
        let syllable_count = vowel_segments.len();
        Self {
            id: id.into(),
            audio,
            vowel_segments,
            syllable_count,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub utterances: Vec<UtteranceRecord>,
}

impl Corpus {
    pub fn new(utterances: Vec<UtteranceRecord>) -> Self {
        Self { utterances }
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn ensure_non_empty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::validation("corpus has no utterances"))
        } else {
            Ok(())
        }
    }

    /// First `n` utterances after a seeded shuffle.
    pub fn subsample(&self, n: usize, seed: u64) -> Result<Corpus> {
        if n == 0 || n > self.len() {
            return Err(Error::validation(format!(
                "train size {n} must be in 1..={}",
                self.len()
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Ok(Corpus::new(
            order[..n]
                .iter()
                .map(|&i| self.utterances[i].clone())
                .collect(),
        ))
    }

    /// Splits into the first `n` utterances and the rest.
    pub fn split_at(&self, n: usize) -> (Corpus, Corpus) {
        let n = n.min(self.len());
        (
            Corpus::new(self.utterances[..n].to_vec()),
            Corpus::new(self.utterances[n..].to_vec()),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub wav: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phn: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nuclei: Option<Vec<[f64; 2]>>,
}

/// On-disk corpus manifest. Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub vowel_labels: Vec<String>,
    pub utterances: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn load_entry(
    entry: &ManifestEntry,
    base: &Path,
    vowels: &BTreeSet<String>,
) -> Result<UtteranceRecord> {
    let audio = read_wav(resolve(base, &entry.wav))?;
    let duration = audio.duration_s();
    let segments = match (&entry.nuclei, &entry.phn) {
        (Some(nuclei), _) => {
            for [s, e] in nuclei {
                if !(s.is_finite() && e.is_finite() && *s >= 0.0 && s < e) {
                    return Err(Error::validation(format!(
                        "nucleus segment [{s}, {e}] is invalid"
                    )));
                }
            }
            nuclei
                .iter()
                .map(|&[s, e]| {
                    VowelSegment {
                        start_s: s,
                        end_s: e,
                    }
                    .padded(duration)
                })
                .collect()
        }
        (None, Some(phn)) => {
            let phones = parse_phonetic_annotation(resolve(base, phn), audio.sample_rate())?;
            derive_vowel_nuclei(&phones, vowels, duration)
        }
        (None, None) => {
            return Err(Error::validation(
                "entry has neither an annotation file nor explicit nuclei",
            ))
        }
    };
    Ok(UtteranceRecord::new(entry.id.clone(), audio, segments))
}

/// Loads every manifest entry. Utterances are decoded in parallel; order follows the manifest.
pub fn load_corpus(manifest_path: impl AsRef<Path>) -> Result<Corpus> {
    let manifest_path = manifest_path.as_ref();
    let manifest = Manifest::read(manifest_path)?;
    if manifest.utterances.is_empty() {
        return Err(Error::validation(format!(
            "manifest {} lists zero utterances",
            manifest_path.display()
        )));
    }
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let vowels: BTreeSet<String> = manifest.vowel_labels.iter().cloned().collect();
    let utterances = manifest
        .utterances
        .par_iter()
        .map(|e| load_entry(e, base, &vowels).map_err(|err| err.in_utterance(&e.id)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus::new(utterances))
}

/// Writes one WAV per utterance plus a manifest carrying explicit nucleus segments.
pub fn write_corpus(
    corpus: &Corpus,
    dir: impl AsRef<Path>,
    manifest_name: &str,
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(corpus.len());
    for utt in &corpus.utterances {
        let wav_name = PathBuf::from(format!("{}.wav", utt.id));
        write_wav(&utt.audio, dir.join(&wav_name))?;
        entries.push(ManifestEntry {
            id: utt.id.clone(),
            wav: wav_name,
            phn: None,
            nuclei: Some(
                utt.vowel_segments
                    .iter()
                    .map(|s| [s.start_s, s.end_s])
                    .collect(),
            ),
        });
    }
    let manifest = Manifest {
        vowel_labels: Vec::new(),
        utterances: entries,
    };
    let path = dir.join(manifest_name);
    manifest.write(&path)?;
    Ok(path)
}
