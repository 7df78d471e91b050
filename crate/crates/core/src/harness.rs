//! Experiment harness: the reference scenario grid, seeded single trials,
//! Monte Carlo hit-rate statistics and the channel frequency response.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{
    add_awgn, apply_cfo, apply_cir, apply_sto, random_cir, CfoParams, ChannelScenario, CirFixture,
};
use crate::error::{Error, Result};
use crate::spectral::dft;
use crate::sync::{estimate_sto, EstimatorConfig, Method, MetricTrace};
use crate::txgen::{build_frame, OfdmParams};

/// True offsets cycled through by every reference scenario.
pub const GRID_STO_VALUES: [isize; 4] = [3, -3, 2, -2];
pub const GRID_SNR_DB: [f64; 2] = [10.0, 2.0];
pub const GRID_CP_LENS: [usize; 2] = [32, 16];

/// Taps drawn per trial in [`ChannelMode::RayleighRandom`].
pub const RANDOM_CIR_TAPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelMode {
    Awgn,
    /// AWGN after convolution with [`CirFixture::TAPS`].
    RayleighFixture,
    /// AWGN after convolution with fresh unnormalized Rayleigh taps per trial.
    RayleighRandom,
}

impl ChannelMode {
    pub fn name(self) -> &'static str {
        match self {
            ChannelMode::Awgn => "awgn",
            ChannelMode::RayleighFixture => "rayleigh-fixture",
            ChannelMode::RayleighRandom => "rayleigh-random",
        }
    }
}

impl fmt::Display for ChannelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            ChannelMode::Awgn,
            ChannelMode::RayleighFixture,
            ChannelMode::RayleighRandom,
        ]
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| {
            Error::invalid(format!(
                "unknown channel '{s}' (expected awgn, rayleigh-fixture or rayleigh-random)"
            ))
        })
    }
}

/// One cell of an experiment grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: String,
    pub ofdm: OfdmParams,
    pub snr_db: f64,
    pub channel: ChannelMode,
    pub cfo: Option<CfoParams>,
    pub rx_branches: usize,
    pub methods: Vec<Method>,
    pub sto_values: Vec<isize>,
}

impl Scenario {
    pub fn new(ofdm: OfdmParams, snr_db: f64, channel: ChannelMode) -> Self {
        Self {
            label: format!("snr{snr_db}_cp{}_{channel}", ofdm.cp_len),
            ofdm,
            snr_db,
            channel,
            cfo: None,
            rx_branches: 1,
            methods: Method::ALL.to_vec(),
            sto_values: GRID_STO_VALUES.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ofdm.validate()?;
        if self.methods.is_empty() {
            return Err(Error::invalid("scenario needs at least one method"));
        }
        if self.sto_values.is_empty() {
            return Err(Error::invalid("scenario needs at least one sto value"));
        }
        let reach = (2 * self.ofdm.cp_len).min(self.ofdm.n_subcarriers - 1);
        if let Some(bad) = self.sto_values.iter().find(|d| d.unsigned_abs() > reach) {
            return Err(Error::invalid(format!(
                "sto {bad} outside the search range ±{reach} for cp {}",
                self.ofdm.cp_len
            )));
        }
        ChannelScenario {
            snr_db: self.snr_db,
            cir_taps: Vec::new(),
            sto: 0,
            cfo: self.cfo,
            rx_branches: self.rx_branches,
        }
        .validate(self.ofdm.n_subcarriers)
    }

    /// Concrete impairments for one trial. Random taps come from the `cir`
    /// sub-seed of `trial_seed`.
    pub fn channel_for(&self, true_sto: isize, trial_seed: u64) -> Result<ChannelScenario> {
        let cir_taps = match self.channel {
            ChannelMode::Awgn => Vec::new(),
            ChannelMode::RayleighFixture => CirFixture::taps(),
            ChannelMode::RayleighRandom => {
                random_cir(RANDOM_CIR_TAPS, derive_seed(trial_seed, "cir", 0), false)?
            }
        };
        Ok(ChannelScenario {
            snr_db: self.snr_db,
            cir_taps,
            sto: true_sto,
            cfo: self.cfo,
            rx_branches: self.rx_branches,
        })
    }
}

/// `{10, 2} dB × CP {32, 16} × {AWGN, fixture CIR}` with N = 128, QPSK, 4 symbols.
pub fn reference_grid() -> Vec<Scenario> {
    let mut out = Vec::with_capacity(8);
    for channel in [ChannelMode::Awgn, ChannelMode::RayleighFixture] {
        for snr in GRID_SNR_DB {
            for cp in GRID_CP_LENS {
                out.push(Scenario::new(
                    OfdmParams::default().with_cp_len(cp),
                    snr,
                    channel,
                ));
            }
        }
    }
    out
}

/// Stable seed splitting: FNV-1a over `master` (little endian), the UTF-8
/// bytes of `label` and `index` (little endian), finished with the
/// SplitMix64 mixer. Frozen; changing it changes every CSV output.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = FNV_OFFSET;
    let bytes = master
        .to_le_bytes()
        .into_iter()
        .chain(label.bytes())
        .chain(index.to_le_bytes());
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    let mut z = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub true_sto: isize,
    pub seed: u64,
    pub estimates: BTreeMap<Method, isize>,
    pub traces: BTreeMap<Method, MetricTrace>,
}

/// `build_frame -> apply_cir -> apply_cfo -> apply_sto -> add_awgn -> estimate_sto`.
///
/// Sub-seeds: frame data from `derive_seed(seed, "frame", 0)`, noise from
/// `derive_seed(seed, "noise", 0)`, random taps from `derive_seed(seed, "cir", 0)`.
pub fn run_trial(scenario: &Scenario, true_sto: isize, seed: u64) -> Result<TrialResult> {
    scenario.validate()?;
    let params = &scenario.ofdm;
    let channel = scenario.channel_for(true_sto, seed)?;
    channel.validate(params.n_subcarriers)?;

    let mut stream =
        build_frame(params, derive_seed(seed, "frame", 0))?.replicate(channel.rx_branches)?;
    if !channel.cir_taps.is_empty() {
        stream = apply_cir(stream, &channel.cir_taps)?;
    }
    if let Some(cfo) = channel.cfo {
        stream = apply_cfo(stream, cfo.epsilon, params.n_subcarriers)?;
    }
    stream = apply_sto(stream, true_sto)?;
    stream = add_awgn(stream, channel.snr_db, derive_seed(seed, "noise", 0))?;

    let mut estimates = BTreeMap::new();
    let mut traces = BTreeMap::new();
    for &method in &scenario.methods {
        let cfg = EstimatorConfig::for_stream(method, params, &stream);
        let trace = estimate_sto(&stream, &cfg)?;
        estimates.insert(method, trace.argopt);
        traces.insert(method, trace);
    }
    Ok(TrialResult {
        true_sto,
        seed,
        estimates,
        traces,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodStats {
    pub method: Method,
    pub exact_hit_rate: f64,
    pub within_1_rate: f64,
    pub mean_abs_error: f64,
    pub mse: f64,
    /// Trial count per signed error `estimate - true_sto`.
    pub histogram: BTreeMap<isize, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioStats {
    pub label: String,
    pub snr_db: f64,
    pub cp_len: usize,
    pub channel: ChannelMode,
    pub n_trials: usize,
    pub methods: Vec<MethodStats>,
}

impl ScenarioStats {
    /// Aggregates with integer counts only, so the result does not depend on
    /// trial order.
    pub fn from_trials(scenario: &Scenario, trials: &[TrialResult]) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::invalid("no trials to aggregate"));
        }
        let n = trials.len();
        let methods = scenario
            .methods
            .iter()
            .map(|&method| {
                let mut histogram = BTreeMap::new();
                for t in trials {
                    let est = t.estimates.get(&method).ok_or_else(|| {
                        Error::invalid(format!("trial {} lacks method {method}", t.seed))
                    })?;
                    *histogram.entry(est - t.true_sto).or_insert(0usize) += 1;
                }
                let count = |pred: fn(isize) -> bool| -> usize {
                    histogram
                        .iter()
                        .filter(|(e, _)| pred(**e))
                        .map(|(_, c)| c)
                        .sum()
                };
                let abs_sum: u128 = histogram
                    .iter()
                    .map(|(e, c)| e.unsigned_abs() as u128 * *c as u128)
                    .sum();
                let sq_sum: u128 = histogram
                    .iter()
                    .map(|(e, c)| (e.unsigned_abs() as u128).pow(2) * *c as u128)
                    .sum();
                Ok(MethodStats {
                    method,
                    exact_hit_rate: count(|e| e == 0) as f64 / n as f64,
                    within_1_rate: count(|e| e.abs() <= 1) as f64 / n as f64,
                    mean_abs_error: abs_sum as f64 / n as f64,
                    mse: sq_sum as f64 / n as f64,
                    histogram,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            label: scenario.label.clone(),
            snr_db: scenario.snr_db,
            cp_len: scenario.ofdm.cp_len,
            channel: scenario.channel,
            n_trials: n,
            methods,
        })
    }

    pub fn method(&self, method: Method) -> Option<&MethodStats> {
        self.methods.iter().find(|m| m.method == method)
    }
}

/// Runs `n_trials` trials in parallel. Trial `t` uses true offset
/// `sto_values[t % len]` and seed `derive_seed(master_seed, label, t)`.
pub fn run_monte_carlo(
    scenario: &Scenario,
    n_trials: usize,
    master_seed: u64,
) -> Result<ScenarioStats> {
    scenario.validate()?;
    if n_trials == 0 {
        return Err(Error::invalid("n_trials must be at least 1"));
    }
    let trials = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let seed = derive_seed(master_seed, &scenario.label, t as u64);
            let sto = scenario.sto_values[t % scenario.sto_values.len()];
            let mut result = run_trial(scenario, sto, seed)?;
            result.traces.clear();
            Ok(result)
        })
        .collect::<Result<Vec<_>>>()?;
    ScenarioStats::from_trials(scenario, &trials)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponsePoint {
    pub bin: usize,
    /// `bin / n_points`, cycles per sample.
    pub normalized_freq: f64,
    pub value: Complex64,
    pub magnitude_db: f64,
    /// In `(-pi, pi]`.
    pub phase_rad: f64,
}

/// Zero-padded DFT of `taps` on `n_points` bins.
pub fn freq_response(taps: &[Complex64], n_points: usize) -> Result<Vec<ResponsePoint>> {
    if taps.is_empty() {
        return Err(Error::invalid("need at least one tap"));
    }
    if n_points < taps.len() {
        return Err(Error::invalid(format!(
            "n_points ({n_points}) must be at least the number of taps ({})",
            taps.len()
        )));
    }
    let mut padded = taps.to_vec();
    padded.resize(n_points, Complex64::new(0.0, 0.0));
    let spectrum = dft(&padded, n_points)?;
    Ok(spectrum
        .iter()
        .enumerate()
        .map(|(bin, &value)| {
            let mut phase = value.arg();
            if phase <= -PI {
                phase += 2.0 * PI;
            }
            ResponsePoint {
                bin,
                normalized_freq: bin as f64 / n_points as f64,
                value,
                magnitude_db: 20.0 * value.norm().log10(),
                phase_rad: phase,
            }
        })
        .collect())
}
