use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;

/// In-place iterative radix-2 complex FFT of a fixed power-of-two size.
#[derive(Debug, Clone)]
pub(crate) struct Fft {
    n: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
    rev: Vec<usize>,
}

impl Fft {
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two() && n >= 2, "fft size must be a power of two");
        let bits = n.trailing_zeros();
        let rev = (0..n).map(|i| i.reverse_bits() >> (usize::BITS - bits)).collect();
        let half = n / 2;
        let cos = (0..half).map(|k| Float::cos(-2.0 * PI * k as f64 / n as f64)).collect();
        let sin = (0..half).map(|k| Float::sin(-2.0 * PI * k as f64 / n as f64)).collect();
        Fft { n, cos, sin, rev }
    }

    pub fn forward(&self, re: &mut [f64], im: &mut [f64]) {
        let n = self.n;
        debug_assert!(re.len() == n && im.len() == n);
        for i in 0..n {
            let j = self.rev[i];
            if j > i {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let step = n / size;
            for start in (0..n).step_by(size) {
                for k in 0..half {
                    let (wr, wi) = (self.cos[k * step], self.sin[k * step]);
                    let a = start + k;
                    let b = a + half;
                    let tr = re[b] * wr - im[b] * wi;
                    let ti = re[b] * wi + im[b] * wr;
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
            }
            size *= 2;
        }
    }

    /// Magnitudes of bins `0..=n/2` of a real frame.
    pub fn magnitudes(&self, frame: &[f64], re: &mut Vec<f64>, im: &mut Vec<f64>, out: &mut [f64]) {
        re.clear();
        re.extend_from_slice(frame);
        im.clear();
        im.resize(self.n, 0.0);
        self.forward(re, im);
        for (k, o) in out.iter_mut().enumerate().take(self.n / 2 + 1) {
            *o = Float::sqrt(re[k] * re[k] + im[k] * im[k]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn matches_naive_dft() {
        let n = 16;
        let x: Vec<f64> = (0..n).map(|i| ((i * 7 % 5) as f64) - 1.3 * i as f64).collect();
        let fft = Fft::new(n);
        let (mut re, mut im) = (x.clone(), vec![0.0; n]);
        fft.forward(&mut re, &mut im);
        for k in 0..n {
            let (mut sr, mut si) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let ang = -2.0 * PI * (k * t) as f64 / n as f64;
                sr += v * ang.cos();
                si += v * ang.sin();
            }
            assert!((sr - re[k]).abs() < 1e-9 && (si - im[k]).abs() < 1e-9);
        }
    }
}
