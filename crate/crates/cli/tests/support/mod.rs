//! Independent reference computations for the acceptance suite.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::io::Write;

use cpsto_core::sync::{EstimatorConfig, Method};
use cpsto_core::{Complex64, SampleStream};

/// Textbook O(N^2) DFT; the twiddle table is indexed by `k*n mod N`.
pub fn direct_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    let table: Vec<Complex64> = (0..n)
        .map(|m| {
            let theta = -2.0 * PI * m as f64 / n as f64;
            Complex64::new(theta.cos(), theta.sin())
        })
        .collect();
    (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, xi) in x.iter().enumerate() {
                acc += xi * table[(k * i) % n];
            }
            acc
        })
        .collect()
}

/// Per-candidate triple sum over branches, symbols and window samples.
pub fn brute_force_metric(stream: &SampleStream, cfg: &EstimatorConfig, delta: isize) -> f64 {
    let period = cfg.fft_len + cfg.cp_len;
    let mut corr = Complex64::new(0.0, 0.0);
    let mut diff = 0.0;
    for l in 0..stream.num_branches() {
        let y = stream.branch(l);
        for k in 0..cfg.symbols_averaged {
            for i in 0..cfg.cp_len {
                let p = (cfg.base_index as isize + delta) as usize + k * period + i;
                let (a, b) = (y[p], y[p + cfg.fft_len]);
                match cfg.method {
                    Method::Cbm => corr += a * b.conj(),
                    Method::DbmMagnitude => diff += (a.norm() - b.norm()).powi(2),
                    Method::DbmLiteral => diff += (a - b.conj()).norm_sqr(),
                }
            }
        }
    }
    if cfg.method == Method::Cbm {
        corr.norm()
    } else {
        diff
    }
}

/// `||a - b|| / ||b||` over complex vectors.
pub fn rel_err_c(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

/// `max|a - b| / max|b|` over a metric trace.
pub fn rel_err_trace(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let worst = a
        .iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}

/// Prints one result line straight to stderr so it shows even when the
/// harness captures test output.
pub fn report(id: &str, name: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(
        std::io::stderr(),
        "acceptance {id} [{status}] {name}: {detail}"
    );
}
