//! Transmitter side: bits to constellation points, OFDM symbols with cyclic
//! prefix, and zero-guarded frames.

use std::f64::consts::FRAC_1_SQRT_2;
use std::ops::Range;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spectral::{ensure_finite, idft, Spectrum};

/// Per-axis Gray levels for 16-QAM, indexed by the two axis bits `b0 b1`:
/// `00 -> -3`, `01 -> -1`, `11 -> +1`, `10 -> +3`, before the `1/sqrt(10)` scaling.
pub const QAM16_AXIS_LEVELS: [f64; 4] = [-3.0, -1.0, 3.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Constellation {
    /// Gray-mapped QPSK: bit 0 selects the sign of I, bit 1 the sign of Q,
    /// `0 -> +`, `1 -> -`. So `00` maps to `(1 + j)/sqrt(2)`.
    #[default]
    Qpsk,
    /// Gray-mapped 16-QAM: bits 0..2 drive I, bits 2..4 drive Q through
    /// [`QAM16_AXIS_LEVELS`], scaled by `1/sqrt(10)`.
    Qam16,
}

impl Constellation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Constellation::Qpsk => 2,
            Constellation::Qam16 => 4,
        }
    }
}

/// OFDM numerology for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfdmParams {
    /// IDFT size N; also the lag between a CP sample and its source.
    pub n_subcarriers: usize,
    /// Cyclic prefix length N_G in samples.
    pub cp_len: usize,
    pub constellation: Constellation,
    /// Symbols per frame (M).
    pub symbols_per_frame: usize,
}

impl Default for OfdmParams {
    fn default() -> Self {
        Self {
            n_subcarriers: 128,
            cp_len: 32,
            constellation: Constellation::Qpsk,
            symbols_per_frame: 4,
        }
    }
}

impl OfdmParams {
    pub fn with_cp_len(mut self, cp_len: usize) -> Self {
        self.cp_len = cp_len;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subcarriers < 2 {
            return Err(Error::invalid("n_subcarriers must be at least 2"));
        }
        if self.cp_len == 0 || self.cp_len >= self.n_subcarriers {
            return Err(Error::invalid(format!(
                "cp_len must satisfy 0 < cp_len < n_subcarriers ({}), got {}",
                self.n_subcarriers, self.cp_len
            )));
        }
        if self.symbols_per_frame == 0 {
            return Err(Error::invalid("symbols_per_frame must be at least 1"));
        }
        Ok(())
    }

    /// Samples per CP-extended symbol, `N + N_G`.
    pub fn symbol_len(&self) -> usize {
        self.n_subcarriers + self.cp_len
    }

    pub fn frame_len(&self) -> usize {
        self.symbols_per_frame * self.symbol_len() + 2 * self.n_subcarriers
    }
}

/// Multi-branch complex sample buffer.
///
/// `sample_origin` is the index the receiver treats as the start of the first
/// OFDM symbol (its CP). `payload` marks the non-guard region of the frame as
/// transmitted and is what signal power is measured over.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    branches: Vec<Vec<Complex64>>,
    sample_origin: usize,
    payload: Range<usize>,
}

impl SampleStream {
    /// Stream whose payload is the whole buffer.
    pub fn new(branches: Vec<Vec<Complex64>>, sample_origin: usize) -> Result<Self> {
        let len = branches.first().map_or(0, Vec::len);
        Self::with_payload(branches, sample_origin, 0..len)
    }

    pub fn with_payload(
        branches: Vec<Vec<Complex64>>,
        sample_origin: usize,
        payload: Range<usize>,
    ) -> Result<Self> {
        let Some(first) = branches.first() else {
            return Err(Error::invalid("stream needs at least one branch"));
        };
        let len = first.len();
        if let Some(bad) = branches.iter().find(|b| b.len() != len) {
            return Err(Error::LengthMismatch {
                expected: len,
                actual: bad.len(),
            });
        }
        for b in &branches {
            ensure_finite(b, "sample stream")?;
        }
        if sample_origin > len {
            return Err(Error::OutOfBounds(format!(
                "sample_origin {sample_origin} beyond buffer length {len}"
            )));
        }
        if payload.start > payload.end || payload.end > len {
            return Err(Error::OutOfBounds(format!(
                "payload {payload:?} outside buffer length {len}"
            )));
        }
        Ok(Self {
            branches,
            sample_origin,
            payload,
        })
    }

    pub fn branches(&self) -> &[Vec<Complex64>] {
        &self.branches
    }

    pub fn branch(&self, l: usize) -> &[Complex64] {
        &self.branches[l]
    }

    pub fn num_branches(&self) -> usize {
        self.branches.len()
    }

    /// Samples per branch.
    pub fn len(&self) -> usize {
        self.branches[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_origin(&self) -> usize {
        self.sample_origin
    }

    pub fn payload(&self) -> Range<usize> {
        self.payload.clone()
    }

    /// Mean `|y|^2` over the payload of every branch.
    pub fn payload_power(&self) -> f64 {
        let count = self.payload.len() * self.branches.len();
        if count == 0 {
            return 0.0;
        }
        let total: f64 = self
            .branches
            .iter()
            .map(|b| {
                b[self.payload.clone()]
                    .iter()
                    .map(|v| v.norm_sqr())
                    .sum::<f64>()
            })
            .sum();
        total / count as f64
    }

    /// Copies branch 0 onto `l` receive branches.
    pub fn replicate(mut self, l: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::invalid("rx_branches must be at least 1"));
        }
        let first = self.branches.swap_remove(0);
        self.branches = vec![first; l];
        Ok(self)
    }

    pub(crate) fn map_branches(
        mut self,
        mut f: impl FnMut(usize, Vec<Complex64>) -> Vec<Complex64>,
    ) -> Self {
        self.branches = std::mem::take(&mut self.branches)
            .into_iter()
            .enumerate()
            .map(|(l, b)| f(l, b))
            .collect();
        self
    }

    pub(crate) fn set_origin(&mut self, origin: usize) {
        self.sample_origin = origin;
    }
}

/// Gray-maps `bits` onto unit-average-power constellation points.
pub fn map_bits(bits: &[bool], constellation: Constellation) -> Result<Vec<Complex64>> {
    let bps = constellation.bits_per_symbol();
    if !bits.len().is_multiple_of(bps) {
        return Err(Error::invalid(format!(
            "bit count {} not divisible by {bps}",
            bits.len()
        )));
    }
    let points = bits
        .chunks_exact(bps)
        .map(|chunk| match constellation {
            Constellation::Qpsk => {
                let axis = |b: bool| if b { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
                Complex64::new(axis(chunk[0]), axis(chunk[1]))
            }
            Constellation::Qam16 => {
                let level =
                    |hi: bool, lo: bool| QAM16_AXIS_LEVELS[(hi as usize) << 1 | lo as usize];
                Complex64::new(level(chunk[0], chunk[1]), level(chunk[2], chunk[3])) / 10f64.sqrt()
            }
        })
        .collect();
    Ok(points)
}

/// Time-domain OFDM symbol (no CP) carrying `data` on all N subcarriers.
pub fn ofdm_symbol(data: &Spectrum, params: &OfdmParams) -> Result<Vec<Complex64>> {
    if data.len() != params.n_subcarriers {
        return Err(Error::LengthMismatch {
            expected: params.n_subcarriers,
            actual: data.len(),
        });
    }
    Ok(idft(data))
}

/// Prepends the last `cp_len` samples of `symbol`.
pub fn add_cp(symbol: &[Complex64], cp_len: usize) -> Result<Vec<Complex64>> {
    let n = symbol.len();
    if cp_len == 0 || cp_len > n {
        return Err(Error::invalid(format!(
            "cp_len must satisfy 0 < cp_len <= {n}, got {cp_len}"
        )));
    }
    let mut out = Vec::with_capacity(n + cp_len);
    out.extend_from_slice(&symbol[n - cp_len..]);
    out.extend_from_slice(symbol);
    Ok(out)
}

/// Builds `M` CP-extended symbols of random data, with `N` zero samples of
/// guard on either side. `sample_origin` is the first CP sample of symbol 0.
///
/// Each symbol is scaled by `sqrt(N)` so the per-sample power of the payload
/// equals the mean constellation power (1).
///
/// Frame layout for the defaults (N=128, N_G=32, M=4):
///
/// ```text
/// | 128 zeros | CP+sym 0 | CP+sym 1 | CP+sym 2 | CP+sym 3 | 128 zeros |
///             ^ origin = 128                             ^ 128 + 4*160
/// ```
pub fn build_frame(params: &OfdmParams, seed: u64) -> Result<SampleStream> {
    params.validate()?;
    let n = params.n_subcarriers;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits_per_symbol = n * params.constellation.bits_per_symbol();
    let scale = (n as f64).sqrt();

    let mut samples = vec![Complex64::new(0.0, 0.0); n];
    samples.reserve(params.frame_len() - n);
    for _ in 0..params.symbols_per_frame {
        let bits: Vec<bool> = (0..bits_per_symbol).map(|_| rng.random()).collect();
        let data = Spectrum::new(map_bits(&bits, params.constellation)?)?;
        let symbol: Vec<Complex64> = ofdm_symbol(&data, params)?
            .into_iter()
            .map(|v| v * scale)
            .collect();
        samples.extend(add_cp(&symbol, params.cp_len)?);
    }
    let payload_end = samples.len();
    samples.resize(params.frame_len(), Complex64::new(0.0, 0.0));

    SampleStream::with_payload(vec![samples], n, n..payload_end)
}
