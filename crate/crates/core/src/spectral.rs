//! Discrete Fourier transform pair.
//!
//! Forward transform is unscaled, the inverse carries the `1/N` factor:
//!
//! ```text
//! X[k] = sum_n x[n] exp(-j 2 pi k n / N)
//! x[n] = (1/N) sum_k X[k] exp(+j 2 pi k n / N)
//! ```
//!
//! Power-of-two lengths go through an iterative radix-2 FFT; any other
//! length falls back to direct summation.

use std::f64::consts::PI;
use std::ops::Deref;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Frequency-domain bins of one transform, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    bins: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(bins: Vec<Complex64>) -> Result<Self> {
        if bins.is_empty() {
            return Err(Error::invalid("spectrum must have at least one bin"));
        }
        ensure_finite(&bins, "spectrum")?;
        Ok(Self { bins })
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn into_bins(self) -> Vec<Complex64> {
        self.bins
    }
}

impl Deref for Spectrum {
    type Target = [Complex64];

    fn deref(&self) -> &[Complex64] {
        &self.bins
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => -1.0,
            Direction::Inverse => 1.0,
        }
    }
}

/// Forward DFT of `x`, which must have exactly `n` samples.
pub fn dft(x: &[Complex64], n: usize) -> Result<Spectrum> {
    if n == 0 {
        return Err(Error::invalid("transform length must be positive"));
    }
    if x.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: x.len(),
        });
    }
    ensure_finite(x, "dft input")?;
    Spectrum::new(transform(x, Direction::Forward))
}

/// Inverse DFT, scaled by `1/N`.
pub fn idft(spectrum: &Spectrum) -> Vec<Complex64> {
    let n = spectrum.len();
    let scale = 1.0 / n as f64;
    let mut out = transform(spectrum.bins(), Direction::Inverse);
    for v in &mut out {
        *v *= scale;
    }
    out
}

fn transform(x: &[Complex64], dir: Direction) -> Vec<Complex64> {
    if x.len().is_power_of_two() {
        let mut buf = x.to_vec();
        radix2_in_place(&mut buf, dir);
        buf
    } else {
        direct(x, dir)
    }
}

/// O(N^2) summation; the reduction `k*n mod N` keeps twiddle arguments small.
fn direct(x: &[Complex64], dir: Direction) -> Vec<Complex64> {
    let n = x.len();
    let twiddles = twiddle_table(n, dir);
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(i, &xi)| xi * twiddles[(k * i) % n])
                .sum()
        })
        .collect()
}

fn twiddle_table(n: usize, dir: Direction) -> Vec<Complex64> {
    let step = dir.sign() * 2.0 * PI / n as f64;
    (0..n)
        .map(|k| Complex64::from_polar(1.0, step * k as f64))
        .collect()
}

fn radix2_in_place(buf: &mut [Complex64], dir: Direction) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if i < j {
            buf.swap(i, j);
        }
    }

    let twiddles = twiddle_table(n, dir);
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = twiddles[k * stride];
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

pub(crate) fn ensure_finite(x: &[Complex64], what: &'static str) -> Result<()> {
    if x.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
