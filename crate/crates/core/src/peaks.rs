//! Local maxima, prominence and thresholded nucleus picking.

use serde::{Deserialize, Serialize};

use crate::envelope::SpeechMask;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub frame_index: usize,
    pub time_s: f64,
    pub value: f64,
    pub prominence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub nuclei: Vec<Peak>,
    pub count: usize,
    pub speech_rate_sps: f64,
}

impl DetectionResult {
    pub fn times(&self) -> Vec<f64> {
        self.nuclei.iter().map(|p| p.time_s).collect()
    }

    pub fn frame_indices(&self) -> Vec<usize> {
        self.nuclei.iter().map(|p| p.frame_index).collect()
    }
}

/// Indices that rise above the left neighbour and fall to the right.
///
/// A flat top counts once, at its centre (left of centre for even runs).
/// The first and last samples are never peaks.
pub fn find_local_maxima(x: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    if x.len() < 3 {
        return out;
    }
    let mut i = 1;
    while i < x.len() - 1 {
        if x[i] > x[i - 1] {
            let mut j = i;
            while j + 1 < x.len() && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < x.len() && x[j + 1] < x[i] {
                out.push(i + (j - i) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

fn range_min(x: &[f64]) -> f64 {
    x.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Prominence of every candidate in `peaks` (ascending indices).
///
/// The left valley is the minimum between a peak and the previous candidate
/// (or the start), the right valley likewise towards the next candidate (or
/// the end). Prominence is the smaller of the two drops.
pub fn prominences(x: &[f64], peaks: &[usize]) -> Vec<f64> {
    if peaks.is_empty() {
        return Vec::new();
    }
    // valleys[k] = minimum between boundary k and k+1, boundaries being start, peaks..., end
    let mut valleys = Vec::with_capacity(peaks.len() + 1);
    valleys.push(range_min(&x[..=peaks[0]]));
    for w in peaks.windows(2) {
        valleys.push(range_min(&x[w[0]..=w[1]]));
    }
    valleys.push(range_min(&x[peaks[peaks.len() - 1]..]));
    peaks
        .iter()
        .enumerate()
        .map(|(k, &p)| x[p] - valleys[k].max(valleys[k + 1]))
        .collect()
}

/// Prominence of a single candidate.
pub fn prominence(x: &[f64], peak_index: usize, all_peaks: &[usize]) -> f64 {
    let pos = all_peaks
        .iter()
        .position(|&p| p == peak_index)
        .expect("peak_index must be one of all_peaks");
    let left_bound = if pos == 0 { 0 } else { all_peaks[pos - 1] };
    let right_bound = all_peaks.get(pos + 1).copied().unwrap_or(x.len() - 1);
    let left = range_min(&x[left_bound..=peak_index]);
    let right = range_min(&x[peak_index..=right_bound]);
    x[peak_index] - left.max(right)
}

/// Candidates on speech frames whose prominence reaches `threshold`.
///
/// `hop_s` maps frame indices to time and `duration_s` is the whole
/// utterance length used for the speech rate.
pub fn detect_syllables(
    envelope: &[f64],
    mask: &SpeechMask,
    threshold: f64,
    hop_s: f64,
    duration_s: f64,
) -> DetectionResult {
    debug_assert_eq!(envelope.len(), mask.len());
    let candidates = find_local_maxima(envelope);
    let proms = prominences(envelope, &candidates);
    let nuclei: Vec<Peak> = candidates
        .iter()
        .zip(proms)
        .filter(|&(&i, p)| mask.flags[i] && p >= threshold)
        .map(|(&i, p)| Peak {
            frame_index: i,
            time_s: i as f64 * hop_s,
            value: envelope[i],
            prominence: p,
        })
        .collect();
    let count = nuclei.len();
    DetectionResult {
        nuclei,
        count,
        speech_rate_sps: if duration_s > 0.0 {
            count as f64 / duration_s
        } else {
            0.0
        },
    }
}

/// Number of detections only; avoids allocating peak records.
pub fn count_syllables(envelope: &[f64], mask: &SpeechMask, threshold: f64) -> usize {
    let candidates = find_local_maxima(envelope);
    prominences(envelope, &candidates)
        .into_iter()
        .zip(&candidates)
        .filter(|&(p, &i)| mask.flags[i] && p >= threshold)
        .count()
}
