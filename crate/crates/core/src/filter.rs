//! Second-order IIR sections and zero-phase forward-backward filtering.

use std::f64::consts::{PI, SQRT_2};

/// Normalized biquad, `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Second-order Butterworth low-pass via the bilinear transform with prewarping.
    pub fn butterworth_lowpass(cutoff_hz: f64, sample_rate_hz: f64) -> Self {
        let k = (PI * cutoff_hz / sample_rate_hz).tan();
        let k2 = k * k;
        let norm = 1.0 / (1.0 + SQRT_2 * k + k2);
        let b0 = k2 * norm;
        Biquad {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k2 - 1.0) * norm, (1.0 - SQRT_2 * k + k2) * norm],
        }
    }

    pub const ORDER: usize = 2;

    pub fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / (1.0 + self.a[0] + self.a[1])
    }

    /// Transposed direct-form II state for a unit-step steady state.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        [g - self.b[0], self.b[2] - self.a[1] * g]
    }

    /// Filters in place starting from `state`.
    fn run(&self, x: &mut [f64], mut state: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        for v in x.iter_mut() {
            let xin = *v;
            let y = b0 * xin + state[0];
            state[0] = b1 * xin - a1 * y + state[1];
            state[1] = b2 * xin - a2 * y;
            *v = y;
        }
    }

    /// Runs with the initial state scaled to the first input sample, so a
    /// constant input produces a constant output.
    pub fn filter_steady(&self, x: &mut [f64]) {
        if let Some(&first) = x.first() {
            let zi = self.step_state();
            self.run(x, [zi[0] * first, zi[1] * first]);
        }
    }
}

/// Zero-phase filtering: forward pass, then backward pass over the reversed
/// output. The input is extended at both ends by odd reflection of
/// `3 * ORDER` samples (fewer for very short inputs).
pub fn filtfilt(filter: &Biquad, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return x.to_vec();
    }
    let pad = (3 * Biquad::ORDER).min(n - 1);
    let (first, last) = (x[0], x[n - 1]);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

    filter.filter_steady(&mut ext);
    ext.reverse();
    filter.filter_steady(&mut ext);
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

/// Mean of [`filtfilt`] run on `x` and on `x` reversed (then re-reversed).
///
/// Same magnitude response as `filtfilt`, but the start-up transients of the
/// two directions cancel, so an even-symmetric input gives an exactly
/// even-symmetric output.
pub fn filtfilt_symmetric(filter: &Biquad, x: &[f64]) -> Vec<f64> {
    let fwd = filtfilt(filter, x);
    let mut rev: Vec<f64> = x.iter().rev().copied().collect();
    rev = filtfilt(filter, &rev);
    fwd.iter()
        .zip(rev.iter().rev())
        .map(|(a, b)| 0.5 * (a + b))
        .collect()
}
