//! Band-limited sample-rate conversion with a Hann-windowed sinc kernel.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;

use super::AudioBuffer;
use crate::error::{Error, Result};

const ZERO_CROSSINGS: f64 = 24.0;
const ROLLOFF: f64 = 0.95;
const MAX_TABLE_PHASES: u64 = 4096;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn kernel(x: f64, cutoff: f64, half_width: f64) -> f64 {
    if Float::abs(x) >= half_width {
        return 0.0;
    }
    let arg = PI * cutoff * x;
    let sinc = if Float::abs(arg) < 1e-12 { 1.0 } else { Float::sin(arg) / arg };
    let window = 0.5 * (1.0 + Float::cos(PI * x / half_width));
    cutoff * sinc * window
}

/// Resamples to `target_rate`. Output length is `round(len * target / source)`.
pub fn resample(audio: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer> {
    if target_rate == 0 {
        return Err(Error::NonPositiveRate);
    }
    let source_rate = audio.sample_rate();
    if source_rate == target_rate {
        return Ok(audio.clone());
    }
    let g = gcd(source_rate as u64, target_rate as u64);
    let (up, down) = (target_rate as u64 / g, source_rate as u64 / g);
    let len = audio.len() as u64;
    let out_len = ((len as u128 * target_rate as u128 + source_rate as u128 / 2) / source_rate as u128) as usize;

    let scale = (target_rate as f64 / source_rate as f64).min(1.0);
    let cutoff = ROLLOFF * scale;
    let half_width = ZERO_CROSSINGS / scale;
    let taps = Float::ceil(half_width) as i64;
    let x = audio.samples();

    let weights_for = |frac: f64| -> Vec<f64> {
        let mut w: Vec<f64> = (-taps + 1..=taps).map(|k| kernel(frac - k as f64, cutoff, half_width)).collect();
        let sum: f64 = w.iter().sum();
        if sum != 0.0 {
            w.iter_mut().for_each(|v| *v /= sum);
        }
        w
    };
    let table: Option<Vec<Vec<f64>>> =
        (up <= MAX_TABLE_PHASES).then(|| (0..up).map(|p| weights_for(p as f64 / up as f64)).collect());

    let mut out = Vec::with_capacity(out_len);
    for n in 0..out_len as u64 {
        let pos = n * down;
        let base = (pos / up) as i64;
        let phase = pos % up;
        let owned;
        let w: &[f64] = match &table {
            Some(t) => &t[phase as usize],
            None => {
                owned = weights_for(phase as f64 / up as f64);
                &owned
            }
        };
        let mut acc = 0.0;
        for (i, wk) in w.iter().enumerate() {
            let idx = base - taps + 1 + i as i64;
            if idx >= 0 && (idx as usize) < x.len() {
                acc += wk * x[idx as usize] as f64;
            }
        }
        out.push(acc as f32);
    }
    AudioBuffer::new(out, target_rate)
}
