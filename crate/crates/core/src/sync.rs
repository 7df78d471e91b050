//! CP-based symbol time offset estimators.
//!
//! Both estimators slide a pair of `N_G`-sample blocks, `N` samples apart,
//! across candidate offsets `d` relative to the nominal symbol start `n`:
//!
//! ```text
//! CBM:      | sum_l sum_i y_l[n+i] conj(y_l[n+N+i]) |          -> arg max
//! DBM mag:  sum_l sum_i ( |y_l[n+i]| - |y_l[n+N+i]| )^2        -> arg min
//! DBM lit:  sum_l sum_i | y_l[n+i] - conj(y_l[n+N+i]) |^2      -> arg min
//! ```
//!
//! with `i` running over `d ..= d + N_G - 1`. Sums additionally run over
//! `symbols_averaged` consecutive symbol periods of `N + N_G` samples.
//!
//! The literal DBM form does not vanish at the true offset for complex
//! samples (it equals `4 sum Im(y)^2` there), so it is kept for comparison
//! only; the magnitude form is the default difference estimator.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::txgen::{OfdmParams, SampleStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Cbm,
    DbmMagnitude,
    DbmLiteral,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Cbm, Method::DbmMagnitude, Method::DbmLiteral];

    pub fn name(self) -> &'static str {
        match self {
            Method::Cbm => "cbm",
            Method::DbmMagnitude => "dbm-mag",
            Method::DbmLiteral => "dbm-lit",
        }
    }

    fn maximizes(self) -> bool {
        matches!(self, Method::Cbm)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown method '{s}' (expected cbm, dbm-mag or dbm-lit)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimatorConfig {
    pub method: Method,
    /// N: lag between a sample and its CP copy.
    pub fft_len: usize,
    /// N_G: block length.
    pub cp_len: usize,
    pub search_min: isize,
    pub search_max: isize,
    /// Nominal symbol start `n` within the buffer.
    pub base_index: usize,
    pub symbols_averaged: usize,
}

impl EstimatorConfig {
    /// Default search of `±2 N_G` around the stream's origin (kept below
    /// `N` in magnitude), averaging all frame symbols, clamped so that
    /// every window stays inside the buffer.
    pub fn for_stream(method: Method, params: &OfdmParams, stream: &SampleStream) -> Self {
        let n = params.n_subcarriers;
        let span = (2 * params.cp_len).min(n - 1) as isize;
        let mut cfg = Self {
            method,
            fft_len: n,
            cp_len: params.cp_len,
            search_min: -span,
            search_max: span,
            base_index: stream.sample_origin(),
            symbols_averaged: params.symbols_per_frame,
        };
        cfg.search_min = cfg.search_min.max(-(cfg.base_index as isize)).min(0);
        cfg.search_max = cfg.search_max.min(cfg.max_offset_for(stream.len())).max(0);
        cfg
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    fn period(&self) -> usize {
        self.fft_len + self.cp_len
    }

    /// Largest offset whose last window sample still fits in `len` samples.
    fn max_offset_for(&self, len: usize) -> isize {
        let span = (self.symbols_averaged.max(1) - 1) * self.period() + self.fft_len + self.cp_len;
        len as isize - self.base_index as isize - span as isize
    }

    pub fn num_candidates(&self) -> usize {
        (self.search_max - self.search_min + 1) as usize
    }

    pub fn validate(&self, stream: &SampleStream) -> Result<()> {
        if self.cp_len == 0 || self.cp_len > self.fft_len {
            return Err(Error::invalid(format!(
                "cp_len must satisfy 0 < cp_len <= fft_len ({}), got {}",
                self.fft_len, self.cp_len
            )));
        }
        if self.symbols_averaged == 0 {
            return Err(Error::invalid("symbols_averaged must be at least 1"));
        }
        if self.search_min > 0 || self.search_max < 0 {
            return Err(Error::invalid(format!(
                "search range [{}, {}] must contain 0",
                self.search_min, self.search_max
            )));
        }
        if (self.base_index as isize) + self.search_min < 0 {
            return Err(Error::OutOfBounds(format!(
                "window starts at {} before the buffer",
                self.base_index as isize + self.search_min
            )));
        }
        if self.search_max > self.max_offset_for(stream.len()) {
            return Err(Error::OutOfBounds(format!(
                "offset {} needs more than the {} available samples",
                self.search_max,
                stream.len()
            )));
        }
        Ok(())
    }

    fn check_delta(&self, delta: isize) -> Result<()> {
        if delta < self.search_min || delta > self.search_max {
            return Err(Error::invalid(format!(
                "offset {delta} outside search range [{}, {}]",
                self.search_min, self.search_max
            )));
        }
        Ok(())
    }
}

/// Metric value per candidate offset plus the selected estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTrace {
    pub method: Method,
    pub offsets: Vec<isize>,
    pub values: Vec<f64>,
    pub argopt: isize,
    pub opt_value: f64,
}

impl MetricTrace {
    pub fn value_at(&self, offset: isize) -> Option<f64> {
        let first = *self.offsets.first()?;
        self.values
            .get(usize::try_from(offset - first).ok()?)
            .copied()
    }
}

/// Correlation metric at one candidate offset, summed directly.
pub fn cbm_metric(stream: &SampleStream, cfg: &EstimatorConfig, delta: isize) -> Result<f64> {
    cfg.validate(stream)?;
    cfg.check_delta(delta)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for_each_pair(stream, cfg, delta, |a, b| acc += a * b.conj());
    Ok(acc.norm())
}

/// Difference metric at one candidate offset. `cfg.method` picks the
/// magnitude or literal form; a CBM config is rejected.
pub fn dbm_metric(stream: &SampleStream, cfg: &EstimatorConfig, delta: isize) -> Result<f64> {
    cfg.validate(stream)?;
    cfg.check_delta(delta)?;
    let term = match cfg.method {
        Method::DbmMagnitude => dbm_magnitude_term,
        Method::DbmLiteral => dbm_literal_term,
        Method::Cbm => return Err(Error::invalid("dbm_metric needs a DBM method")),
    };
    let mut acc = 0.0;
    for_each_pair(stream, cfg, delta, |a, b| acc += term(a, b));
    Ok(acc)
}

fn for_each_pair(
    stream: &SampleStream,
    cfg: &EstimatorConfig,
    delta: isize,
    mut f: impl FnMut(Complex64, Complex64),
) {
    let start = (cfg.base_index as isize + delta) as usize;
    for y in stream.branches() {
        for k in 0..cfg.symbols_averaged {
            let s = start + k * cfg.period();
            for i in s..s + cfg.cp_len {
                f(y[i], y[i + cfg.fft_len]);
            }
        }
    }
}

fn dbm_magnitude_term(a: Complex64, b: Complex64) -> f64 {
    let d = a.norm() - b.norm();
    d * d
}

fn dbm_literal_term(a: Complex64, b: Complex64) -> f64 {
    (a - b.conj()).norm_sqr()
}

/// Evaluates the configured metric at every offset in
/// `[search_min, search_max]` and picks the optimum.
///
/// The per-lag products are accumulated once over branches and symbols into a
/// single lag sequence; each candidate then sums its `N_G`-sample window of
/// that sequence. Ties go to the smallest `|offset|`, then the smaller offset.
pub fn estimate_sto(stream: &SampleStream, cfg: &EstimatorConfig) -> Result<MetricTrace> {
    cfg.validate(stream)?;
    let span = cfg.num_candidates() + cfg.cp_len - 1;
    let first = (cfg.base_index as isize + cfg.search_min) as usize;

    let values: Vec<f64> = match cfg.method {
        Method::Cbm => {
            let lags = lag_sequence(stream, cfg, first, span, |a, b| a * b.conj());
            windows(&lags, cfg.cp_len, Complex64::new(0.0, 0.0))
                .map(|s| s.norm())
                .collect()
        }
        Method::DbmMagnitude => {
            let lags = lag_sequence(stream, cfg, first, span, dbm_magnitude_term);
            windows(&lags, cfg.cp_len, 0.0).collect()
        }
        Method::DbmLiteral => {
            let lags = lag_sequence(stream, cfg, first, span, dbm_literal_term);
            windows(&lags, cfg.cp_len, 0.0).collect()
        }
    };
    let offsets: Vec<isize> = (cfg.search_min..=cfg.search_max).collect();

    let mut order: Vec<usize> = (0..offsets.len()).collect();
    order.sort_by_key(|&i| (offsets[i].unsigned_abs(), offsets[i]));
    let mut best = order[0];
    for &i in &order[1..] {
        let better = if cfg.method.maximizes() {
            values[i] > values[best]
        } else {
            values[i] < values[best]
        };
        if better {
            best = i;
        }
    }

    Ok(MetricTrace {
        method: cfg.method,
        argopt: offsets[best],
        opt_value: values[best],
        offsets,
        values,
    })
}

fn lag_sequence<T>(
    stream: &SampleStream,
    cfg: &EstimatorConfig,
    first: usize,
    span: usize,
    term: impl Fn(Complex64, Complex64) -> T,
) -> Vec<T>
where
    T: Copy + Default + std::ops::AddAssign,
{
    let mut lags = vec![T::default(); span];
    for y in stream.branches() {
        for k in 0..cfg.symbols_averaged {
            let s = first + k * cfg.period();
            for (m, acc) in lags.iter_mut().enumerate() {
                *acc += term(y[s + m], y[s + m + cfg.fft_len]);
            }
        }
    }
    lags
}

fn windows<T>(lags: &[T], len: usize, zero: T) -> impl Iterator<Item = T> + '_
where
    T: Copy + std::ops::Add<Output = T>,
{
    lags.windows(len)
        .map(move |w| w.iter().fold(zero, |acc, &v| acc + v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_cfo, apply_sto};
    use crate::txgen::build_frame;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn noiseless(params: &OfdmParams, delta: isize, seed: u64) -> SampleStream {
        apply_sto(build_frame(params, seed).unwrap(), delta).unwrap()
    }

    fn random_stream(
        rng: &mut ChaCha8Rng,
        len: usize,
        branches: usize,
        origin: usize,
    ) -> SampleStream {
        let b = (0..branches)
            .map(|_| {
                (0..len)
                    .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect()
            })
            .collect();
        SampleStream::new(b, origin).unwrap()
    }

    fn small_cfg(method: Method) -> EstimatorConfig {
        EstimatorConfig {
            method,
            fft_len: 16,
            cp_len: 4,
            search_min: -6,
            search_max: 6,
            base_index: 10,
            symbols_averaged: 2,
        }
    }

    #[test]
    fn default_search_range() {
        let params = OfdmParams::default();
        let s = noiseless(&params, 0, 1);
        let cfg = EstimatorConfig::for_stream(Method::Cbm, &params, &s);
        assert_eq!((cfg.search_min, cfg.search_max), (-64, 64));
        assert_eq!(cfg.base_index, 128);
        assert_eq!(cfg.symbols_averaged, 4);
        assert_eq!(cfg.num_candidates(), 129);
    }

    #[test]
    fn default_range_is_clamped_near_edges() {
        let params = OfdmParams::default();
        let s = SampleStream::new(vec![vec![c(1.0, 0.0); params.frame_len()]], 20).unwrap();
        let cfg = EstimatorConfig::for_stream(Method::Cbm, &params, &s);
        assert_eq!(cfg.search_min, -20);
        assert!(cfg.validate(&s).is_ok());
    }

    #[test]
    fn recovers_true_offset_without_noise() {
        let params = OfdmParams::default();
        for delta in [3, -3, 2, -2, 0, 17, -40] {
            let s = noiseless(&params, delta, 99);
            for method in [Method::Cbm, Method::DbmMagnitude] {
                let cfg = EstimatorConfig::for_stream(method, &params, &s);
                let trace = estimate_sto(&s, &cfg).unwrap();
                assert_eq!(trace.argopt, delta, "{method} delta={delta}");
            }
        }
    }

    #[test]
    fn cbm_peak_is_cp_energy() {
        let params = OfdmParams::default();
        let s = noiseless(&params, 3, 4);
        let cfg = EstimatorConfig::for_stream(Method::Cbm, &params, &s);
        let start = s.sample_origin() + 3;
        let energy: f64 = (0..params.symbols_per_frame)
            .flat_map(|k| {
                let b = start + k * params.symbol_len();
                s.branch(0)[b..b + params.cp_len].to_vec()
            })
            .map(|v| v.norm_sqr())
            .sum();
        let value = cbm_metric(&s, &cfg, 3).unwrap();
        assert!((value - energy).abs() <= 1e-12 * energy);

        let dbm = dbm_metric(&s, &cfg.with_method(Method::DbmMagnitude), 3).unwrap();
        assert_eq!(dbm, 0.0);
    }

    #[test]
    fn literal_dbm_at_true_offset_is_imaginary_energy() {
        let params = OfdmParams::default();
        let s = noiseless(&params, -2, 4);
        let cfg = EstimatorConfig::for_stream(Method::DbmLiteral, &params, &s);
        let start = s.sample_origin() - 2;
        let expected: f64 = (0..params.symbols_per_frame)
            .flat_map(|k| {
                let b = start + k * params.symbol_len();
                s.branch(0)[b..b + params.cp_len].to_vec()
            })
            .map(|v| 4.0 * v.im * v.im)
            .sum();
        let got = dbm_metric(&s, &cfg, -2).unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected);
        assert!(got > 0.0);
    }

    #[test]
    fn trace_matches_per_candidate_metrics() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let s = random_stream(&mut rng, 80, 2, 10);
        for method in Method::ALL {
            let cfg = small_cfg(method);
            let trace = estimate_sto(&s, &cfg).unwrap();
            assert_eq!(trace.values.len(), 13);
            for (&d, &v) in trace.offsets.iter().zip(&trace.values) {
                let direct = match method {
                    Method::Cbm => cbm_metric(&s, &cfg, d).unwrap(),
                    _ => dbm_metric(&s, &cfg, d).unwrap(),
                };
                assert!(
                    (v - direct).abs() <= 1e-12 * direct.max(1.0),
                    "{method} d={d}"
                );
            }
        }
    }

    #[test]
    fn trace_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_stream(&mut rng, 80, 1, 10);
        for method in Method::ALL {
            let t = estimate_sto(&s, &small_cfg(method)).unwrap();
            assert!(t.offsets.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(t.value_at(t.argopt), Some(t.opt_value));
            assert!(t.values.iter().all(|v| v.is_finite() && *v >= 0.0));
            let extreme = if method == Method::Cbm {
                t.values.iter().cloned().fold(f64::MIN, f64::max)
            } else {
                t.values.iter().cloned().fold(f64::MAX, f64::min)
            };
            assert_eq!(t.opt_value, extreme);
        }
    }

    #[test]
    fn ties_prefer_small_magnitude_then_negative() {
        // constant stream: every candidate scores the same
        let s = SampleStream::new(vec![vec![c(1.0, 1.0); 80]], 10).unwrap();
        for method in Method::ALL {
            assert_eq!(estimate_sto(&s, &small_cfg(method)).unwrap().argopt, 0);
        }

        // equal correlation peaks at -3 and +3
        let mut y = vec![c(0.0, 0.0); 80];
        for i in 0..4 {
            for base in [10 - 3, 10 + 3] {
                y[base + i] = c(1.0, 0.0);
                y[base + i + 16] = c(1.0, 0.0);
            }
        }
        let s = SampleStream::new(vec![y], 10).unwrap();
        let mut cfg = small_cfg(Method::Cbm);
        cfg.symbols_averaged = 1;
        let t = estimate_sto(&s, &cfg).unwrap();
        assert_eq!(t.value_at(-3), t.value_at(3));
        assert_eq!(t.argopt, -3);
    }

    #[test]
    fn scale_equivariance() {
        let params = OfdmParams::default();
        let s = noiseless(&params, 5, 31);
        let s = crate::channel::add_awgn(s, 5.0, 1).unwrap();
        let k = c(0.3, -1.7);
        let scaled = SampleStream::new(
            vec![s.branch(0).iter().map(|v| v * k).collect()],
            s.sample_origin(),
        )
        .unwrap();
        for method in [Method::Cbm, Method::DbmMagnitude] {
            let cfg = EstimatorConfig::for_stream(method, &params, &s);
            let a = estimate_sto(&s, &cfg).unwrap();
            let b = estimate_sto(&scaled, &cfg).unwrap();
            assert_eq!(a.argopt, b.argopt);
            let max = a.values.iter().cloned().fold(0.0, f64::max);
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x * k.norm_sqr() - y).abs() <= 1e-12 * max * k.norm_sqr());
            }
        }
    }

    #[test]
    fn cfo_leaves_cbm_and_dbm_magnitude_decisions() {
        let params = OfdmParams::default();
        let s = crate::channel::add_awgn(noiseless(&params, -3, 12), 4.0, 12).unwrap();
        let rotated = apply_cfo(s.clone(), 0.37, params.n_subcarriers).unwrap();
        for method in [Method::Cbm, Method::DbmMagnitude] {
            let cfg = EstimatorConfig::for_stream(method, &params, &s);
            let a = estimate_sto(&s, &cfg).unwrap();
            let b = estimate_sto(&rotated, &cfg).unwrap();
            assert_eq!(a.argopt, b.argopt);
        }
    }

    #[test]
    fn errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_stream(&mut rng, 80, 1, 10);
        let cfg = small_cfg(Method::Cbm);
        assert!(cbm_metric(&s, &cfg, 7).is_err());
        assert!(dbm_metric(&s, &cfg, 0).is_err());

        let mut wide = cfg;
        wide.search_min = -11;
        assert!(matches!(
            estimate_sto(&s, &wide),
            Err(Error::OutOfBounds(_))
        ));

        let mut long = cfg;
        long.symbols_averaged = 4;
        assert!(matches!(
            estimate_sto(&s, &long),
            Err(Error::OutOfBounds(_))
        ));

        let mut off = cfg;
        off.search_min = 1;
        assert!(estimate_sto(&s, &off).is_err());
    }

    #[test]
    fn method_names_roundtrip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("mle".parse::<Method>().is_err());
    }
}
