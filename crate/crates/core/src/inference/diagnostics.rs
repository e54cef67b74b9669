//! Posterior summaries: WAIC, highest-posterior-density intervals and
//! effective sample size.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::InferenceError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waic {
    pub waic: f64,
    pub lppd: f64,
    pub p_waic: f64,
}

/// WAIC from per-draw, per-observation log densities (`log_dens[draw][obs]`).
///
/// The variance term divides by the number of draws, so repeating every draw
/// leaves the criterion unchanged.
pub fn waic(log_dens: &[Vec<f64>]) -> Result<Waic, InferenceError> {
    let s = log_dens.len();
    if s < 2 {
        return Err(InferenceError::Diagnostics(format!(
            "waic needs at least 2 draws, got {s}"
        )));
    }
    let n_obs = log_dens[0].len();
    if log_dens.iter().any(|d| d.len() != n_obs) {
        return Err(InferenceError::Diagnostics(
            "draws disagree on the number of observations".into(),
        ));
    }
    let mut lppd = 0.0;
    let mut p_waic = 0.0;
    let mut column = vec![0.0; s];
    for i in 0..n_obs {
        for (c, d) in column.iter_mut().zip(log_dens) {
            *c = d[i];
        }
        if column.iter().any(|v| !v.is_finite()) {
            return Err(InferenceError::Diagnostics(format!(
                "non-finite log density for observation {i}"
            )));
        }
        let max = column.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = column.iter().map(|v| (v - max).exp()).sum();
        lppd += max + (sum_exp / s as f64).ln();
        let mean = column.iter().sum::<f64>() / s as f64;
        p_waic += column.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / s as f64;
    }
    Ok(Waic {
        waic: -2.0 * (lppd - p_waic),
        lppd,
        p_waic,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hpd {
    pub lo: f64,
    pub hi: f64,
    /// The interval does not contain the sample median, a sign of
    /// multimodality.
    pub excludes_median: bool,
}

pub const MIN_HPD_SAMPLES: usize = 20;

/// Shortest interval spanning `⌈level·n⌉` consecutive sorted samples.
pub fn hpd(samples: &[f64], level: f64) -> Result<Hpd, InferenceError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(InferenceError::Diagnostics(format!(
            "hpd level must lie in (0, 1), got {level}"
        )));
    }
    let n = samples.len();
    if n < MIN_HPD_SAMPLES {
        return Err(InferenceError::Diagnostics(format!(
            "hpd needs at least {MIN_HPD_SAMPLES} samples, got {n}"
        )));
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let m = ((level * n as f64).ceil() as usize).clamp(1, n);
    let mut best = 0;
    for i in 1..=(n - m) {
        if x[i + m - 1] - x[i] < x[best + m - 1] - x[best] {
            best = i;
        }
    }
    let (lo, hi) = (x[best], x[best + m - 1]);
    let median = if n % 2 == 1 {
        x[n / 2]
    } else {
        0.5 * (x[n / 2 - 1] + x[n / 2])
    };
    Ok(Hpd {
        lo,
        hi,
        excludes_median: median < lo || median > hi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ess {
    /// `n / τ` without truncation; exceeds `n` for antithetic chains.
    pub ess: f64,
    /// `min(ess, n)`.
    pub capped: f64,
    pub super_efficient: bool,
}

pub const MIN_ESS_DRAWS: usize = 50;

/// Effective sample size with Geyer's initial monotone positive sequence.
///
/// Autocovariances are computed by FFT. The integrated autocorrelation time
/// is floored at `1 / log10(n)` so the estimate stays finite for perfectly
/// antithetic traces. A constant trace has ESS `n`.
pub fn ess(trace: &[f64]) -> Result<Ess, InferenceError> {
    let n = trace.len();
    if n < MIN_ESS_DRAWS {
        return Err(InferenceError::Diagnostics(format!(
            "ess needs at least {MIN_ESS_DRAWS} draws, got {n}"
        )));
    }
    if trace.iter().any(|v| !v.is_finite()) {
        return Err(InferenceError::Diagnostics("non-finite value in trace".into()));
    }
    let acov = autocovariance(trace);
    let nf = n as f64;
    if acov[0] <= 0.0 || acov[0] < 1e-300 {
        return Ok(Ess {
            ess: nf,
            capped: nf,
            super_efficient: false,
        });
    }
    let rho = |k: usize| if k < n { acov[k] / acov[0] } else { 0.0 };
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k < n {
        let gamma = rho(2 * k) + rho(2 * k + 1);
        if gamma <= 0.0 {
            break;
        }
        let gamma = gamma.min(prev);
        sum += gamma;
        prev = gamma;
        k += 1;
    }
    let tau = (-1.0 + 2.0 * sum).max(1.0 / nf.log10());
    let e = nf / tau;
    Ok(Ess {
        ess: e,
        capped: e.min(nf),
        super_efficient: e > nf,
    })
}

/// Biased (divide-by-n) autocovariance at every lag.
fn autocovariance(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .map(|v| Complex::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    buf[..n]
        .iter()
        .map(|c| c.re / (size as f64 * n as f64))
        .collect()
}
