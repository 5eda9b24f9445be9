//! Monte Carlo checks of the closed-form statistics behind the combiner.
//!
//! With `H_jk` the frequency response from worker `j` to antenna `k` at one
//! subcarrier, the combiner output splits into
//!
//! * interference `κ_j = (1/K) Σ_k Σ_{m≠j} H*_mk H_jk`, mean 0 and variance
//!   `(M − 1)σ_H⁴/K`;
//! * first DAC distortion `δ_1j = κ_j/(1 − η)`, variance `(M − 1)σ_H⁴/((1 − η)²K)`;
//! * second DAC distortion `δ_2j = (1/((1 − η)K)) Σ_k |H_jk|²`, mean
//!   `σ_H²/(1 − η)`.
//!
//! Trials draw from per-trial substreams and are reduced in trial order, so
//! reports do not depend on the execution mode.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelProfile, ChannelRealization};
use crate::fft::Dft;
use crate::ofdm::{Modem, OfdmWord};
use crate::par::{self, Exec};
use crate::quantizer;
use crate::quantizer::design_gaussian_quantizer;
use crate::rng::{Stream, Streams};
use crate::{Error, Result};

pub const MIN_TRIALS: usize = 1_000;
pub const VARIANCE_TOLERANCE: f64 = 0.05;
pub const MEAN_TOLERANCE: f64 = 0.02;
/// Zero-mean quantities pass when `|mean|` is within this many standard errors.
pub const ZERO_MEAN_STANDARD_ERRORS: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub quantity: String,
    pub samples: usize,
    pub empirical_mean_re: f64,
    pub empirical_mean_im: f64,
    /// `E|X − E X|²`, unbiased.
    pub empirical_variance: f64,
    pub predicted_mean: f64,
    pub predicted_variance: f64,
    pub mean_tolerance: f64,
    pub variance_tolerance: f64,
    pub mean_ok: bool,
    pub variance_ok: bool,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl StatReport {
    /// Compares complex samples against a predicted mean and variance.
    ///
    /// A zero predicted mean is checked in standard errors; otherwise the
    /// mean tolerance is relative.
    pub fn from_samples(quantity: &str, samples: &[Complex64], predicted_mean: f64, predicted_variance: f64) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<Complex64>() / n as f64;
        let var =
            if n > 1 { samples.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() / (n - 1) as f64 } else { f64::NAN };
        let mean_ok = if predicted_mean == 0.0 {
            mean.norm() <= ZERO_MEAN_STANDARD_ERRORS * (var / n as f64).sqrt()
        } else {
            (mean - predicted_mean).norm() <= MEAN_TOLERANCE * predicted_mean.abs()
        };
        let variance_ok = if predicted_variance == 0.0 {
            var == 0.0
        } else {
            (var - predicted_variance).abs() <= VARIANCE_TOLERANCE * predicted_variance
        };
        Self {
            quantity: quantity.into(),
            samples: n,
            empirical_mean_re: mean.re,
            empirical_mean_im: mean.im,
            empirical_variance: var,
            predicted_mean,
            predicted_variance,
            mean_tolerance: MEAN_TOLERANCE,
            variance_tolerance: VARIANCE_TOLERANCE,
            mean_ok,
            variance_ok,
            pass: mean_ok && variance_ok,
            note: None,
        }
    }

    pub fn variance_rel_error(&self) -> f64 {
        (self.empirical_variance - self.predicted_variance).abs() / self.predicted_variance
    }

    pub fn mean_rel_error(&self) -> f64 {
        (Complex64::new(self.empirical_mean_re, self.empirical_mean_im) - self.predicted_mean).norm()
            / self.predicted_mean.abs()
    }
}

/// Predicted interference variance `(M − 1)σ_H⁴/K`.
pub fn interference_variance(workers: usize, antennas: usize, sigma_h_sq: f64) -> f64 {
    (workers as f64 - 1.0) * sigma_h_sq * sigma_h_sq / antennas as f64
}

/// Draws `H_mk[i]` at one subcarrier for all links, indexed `[k][m]`.
fn subcarrier_gains(realization: &ChannelRealization, dft: &Dft, i: usize) -> Vec<Vec<Complex64>> {
    (0..realization.antennas())
        .map(|k| {
            (0..realization.workers())
                .map(|m| {
                    (0..realization.taps())
                        .map(|l| realization.gain(m, k, l) * dft.twiddle(i * realization.delay(m, k, l)))
                        .sum()
                })
                .collect()
        })
        .collect()
}

struct TrialGains {
    /// `(1/K) Σ_k Σ_{m≠0} H*_mk H_0k`
    cross: Complex64,
    /// `(1/K) Σ_k |H_0k|²`
    own: f64,
}

fn check_setup(
    workers: usize,
    antennas: usize,
    subcarriers: usize,
    trials: usize,
    profile: &ChannelProfile,
) -> Result<()> {
    if workers == 0 || antennas == 0 || subcarriers == 0 {
        return Err(Error::invalid("M, K and N must be positive"));
    }
    if trials < MIN_TRIALS {
        return Err(Error::invalid(format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    profile.validate(subcarriers)
}

/// One independent channel draw per trial, evaluated for worker 0 at a
/// uniformly chosen subcarrier.
fn sample_gains(
    workers: usize,
    antennas: usize,
    profile: &ChannelProfile,
    subcarriers: usize,
    trials: usize,
    streams: &Streams,
    tag: u64,
    exec: Exec,
) -> Vec<TrialGains> {
    let dft = Dft::new(subcarriers);
    par::map_range(exec, trials, |trial| {
        use rand::Rng;
        let mut rng = streams.rng(Stream::Analysis, &[tag, trial as u64]);
        let realization = channel::draw_realization(profile, workers, antennas, &mut rng);
        let i = rng.random_range(0..subcarriers);
        let h = subcarrier_gains(&realization, &dft, i);
        let mut cross = Complex64::new(0.0, 0.0);
        let mut own = 0.0;
        for hk in &h {
            own += hk[0].norm_sqr();
            for hm in &hk[1..] {
                cross += hm.conj() * hk[0];
            }
        }
        let inv_k = 1.0 / antennas as f64;
        TrialGains { cross: cross * inv_k, own: own * inv_k }
    })
}

/// Samples `κ_0` and compares it with mean 0 and variance `(M − 1)σ_H⁴/K`.
pub fn interference_statistics(
    workers: usize,
    antennas: usize,
    profile: &ChannelProfile,
    subcarriers: usize,
    trials: usize,
    streams: &Streams,
    exec: Exec,
) -> Result<StatReport> {
    check_setup(workers, antennas, subcarriers, trials, profile)?;
    let kappa: Vec<Complex64> = sample_gains(workers, antennas, profile, subcarriers, trials, streams, 1, exec)
        .into_iter()
        .map(|g| g.cross)
        .collect();
    let predicted = interference_variance(workers, antennas, profile.sigma_h_sq());
    Ok(StatReport::from_samples("kappa", &kappa, 0.0, predicted))
}

/// Samples `δ_1` and `δ_2` for worker 0 with DAC distortion factor `eta`.
///
/// The δ_2 report predicts the exact variance `σ_H⁴/((1 − η)²K)`, since
/// `|H|²` is exponential with variance `σ_H⁴`. The expression with
/// `E|H|⁴ = 2σ_H⁴` in place of the variance is recorded in the note.
pub fn distortion_statistics(
    workers: usize,
    antennas: usize,
    eta: f64,
    profile: &ChannelProfile,
    subcarriers: usize,
    trials: usize,
    streams: &Streams,
    exec: Exec,
) -> Result<(StatReport, StatReport)> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::invalid(format!("eta must be in [0, 1), got {eta}")));
    }
    check_setup(workers, antennas, subcarriers, trials, profile)?;
    let gains = sample_gains(workers, antennas, profile, subcarriers, trials, streams, 2, exec);
    let scale = 1.0 / (1.0 - eta);
    let d1: Vec<Complex64> = gains.iter().map(|g| g.cross * scale).collect();
    let d2: Vec<Complex64> = gains.iter().map(|g| Complex64::new(g.own * scale, 0.0)).collect();
    let s2 = profile.sigma_h_sq();
    let k = antennas as f64;
    let first =
        StatReport::from_samples("delta1", &d1, 0.0, interference_variance(workers, antennas, s2) * scale * scale);
    let mut second = StatReport::from_samples("delta2", &d2, s2 * scale, s2 * s2 * scale * scale / k);
    second.note = Some(format!("E|H|^4 / ((1-eta)^2 K) = {:.6e}", 2.0 * s2 * s2 * scale * scale / k));
    Ok((first, second))
}

/// Per-bin variance of AWGN after CP removal and the forward DFT, compared
/// with `N·σ_z²`. The noise comes out of the channel model with all-zero
/// transmit words. `pass` requires every bin within tolerance.
pub fn noise_dft_statistics(
    subcarriers: usize,
    cyclic_prefix: usize,
    noise_variance: f64,
    words: usize,
    streams: &Streams,
    exec: Exec,
) -> Result<StatReport> {
    if !(noise_variance > 0.0) {
        return Err(Error::invalid("noise variance must be positive"));
    }
    if words < MIN_TRIALS {
        return Err(Error::invalid(format!("need at least {MIN_TRIALS} words, got {words}")));
    }
    let modem = Modem::new(subcarriers, cyclic_prefix)?;
    let silent = OfdmWord {
        samples: vec![Complex64::new(0.0, 0.0); subcarriers + cyclic_prefix],
        n: subcarriers,
        n_cp: cyclic_prefix,
    };
    let profile = ChannelProfile::flat(noise_variance);
    let realization = channel::draw_realization(&profile, 1, 1, &mut streams.rng(Stream::Analysis, &[3]));
    let bins = par::map_range(exec, words, |w| -> Result<Vec<Complex64>> {
        let rx =
            channel::transmit(std::slice::from_ref(&silent), &realization, noise_variance, Exec::Sequential, |_| {
                streams.rng(Stream::Analysis, &[4, w as u64])
            })?;
        modem.demodulate(modem.remove_cp(&rx[0])?)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let predicted = subcarriers as f64 * noise_variance;
    let n = words as f64;
    let mut worst: f64 = 0.0;
    let mut var_sum = 0.0;
    for i in 0..subcarriers {
        let mean = bins.iter().map(|b| b[i]).sum::<Complex64>() / n;
        let var = bins.iter().map(|b| (b[i] - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
        worst = worst.max((var - predicted).abs() / predicted);
        var_sum += var;
    }
    let pooled: Vec<Complex64> = bins.into_iter().flatten().collect();
    let mut report = StatReport::from_samples("noise_dft", &pooled, 0.0, predicted);
    report.empirical_variance = var_sum / subcarriers as f64;
    report.variance_ok = worst <= VARIANCE_TOLERANCE;
    report.pass = report.mean_ok && report.variance_ok;
    report.note = Some(format!("worst per-bin relative deviation {worst:.4}"));
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentMoments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub histogram: Vec<HistBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianityReport {
    pub samples: usize,
    pub real: ComponentMoments,
    pub imag: ComponentMoments,
    /// Both components have `|skewness| < 0.2` and `|excess kurtosis| < 0.5`.
    pub gaussian: bool,
}

pub const GAUSSIANITY_MIN_SAMPLES: usize = 10_000;
const MAX_ABS_SKEWNESS: f64 = 0.2;
const MAX_ABS_EXCESS_KURTOSIS: f64 = 0.5;

fn moments(x: &[f64], bins: usize) -> ComponentMoments {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in x {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    ComponentMoments {
        mean,
        variance: m2,
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
        histogram: counts
            .into_iter()
            .enumerate()
            .map(|(b, count)| HistBin {
                bin_left: lo + b as f64 * width,
                bin_right: lo + (b + 1) as f64 * width,
                count,
            })
            .collect(),
    }
}

fn looks_gaussian(c: &ComponentMoments) -> bool {
    c.skewness.abs() < MAX_ABS_SKEWNESS && c.excess_kurtosis.abs() < MAX_ABS_EXCESS_KURTOSIS
}

/// Moments and histograms of the real and imaginary parts of time samples.
/// Degenerate (constant) input yields NaN moments and is never Gaussian.
pub fn gaussianity_report(samples: &[Complex64], bins: usize) -> Result<GaussianityReport> {
    if samples.len() < GAUSSIANITY_MIN_SAMPLES {
        return Err(Error::invalid(format!("need at least {GAUSSIANITY_MIN_SAMPLES} samples, got {}", samples.len())));
    }
    if bins == 0 {
        return Err(Error::invalid("histogram needs at least one bin"));
    }
    let re: Vec<f64> = samples.iter().map(|c| c.re).collect();
    let im: Vec<f64> = samples.iter().map(|c| c.im).collect();
    let real = moments(&re, bins);
    let imag = moments(&im, bins);
    let gaussian = looks_gaussian(&real) && looks_gaussian(&imag);
    Ok(GaussianityReport { samples: samples.len(), real, imag, gaussian })
}

/// `bin_left,bin_right,count` table.
pub fn histogram_csv(bins: &[HistBin]) -> String {
    let mut out = String::from("bin_left,bin_right,count\n");
    for b in bins {
        let _ = writeln!(out, "{},{},{}", b.bin_left, b.bin_right, b.count);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub antennas: usize,
    pub samples_per_antenna: usize,
    /// `|ρ_kk'|` for every antenna pair, row-major `K × K`.
    pub matrix: Vec<f64>,
    pub max_off_diagonal: f64,
    pub mean_off_diagonal: f64,
    /// Mean over antennas of `|Σ q[n] q*[n − τ]| / Σ |q|²` for τ = 0, 1, ….
    pub autocorrelation: Vec<f64>,
    pub eta: f64,
}

/// Correlation across antennas of the ADC distortion `q_k = R_k − (1 − η)Y_k`.
///
/// Workers send OFDM words of i.i.d. unit-power symbols; each word crosses a
/// fresh channel draw and every antenna block is quantized at its own RMS.
/// Words are drawn until every antenna has at least `samples` samples.
#[allow(clippy::too_many_arguments)]
pub fn adc_distortion_correlation(
    workers: usize,
    antennas: usize,
    adc_bits: u32,
    profile: &ChannelProfile,
    subcarriers: usize,
    cyclic_prefix: usize,
    samples: usize,
    max_lag: usize,
    streams: &Streams,
    exec: Exec,
) -> Result<CorrelationSummary> {
    if workers == 0 || antennas == 0 || samples == 0 {
        return Err(Error::invalid("M, K and the sample count must be positive"));
    }
    profile.validate(cyclic_prefix)?;
    let spec = design_gaussian_quantizer(adc_bits)?;
    let gain = 1.0 - spec.eta();
    let modem = Modem::new(subcarriers, cyclic_prefix)?;
    let words = samples.div_ceil(subcarriers);

    // q_k for each word, [word][k][n]
    let per_word = par::map_range(exec, words, |w| -> Result<Vec<Vec<Complex64>>> {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = streams.rng(Stream::Analysis, &[5, w as u64]);
        let tx = (0..workers)
            .map(|_| {
                let symbols: Vec<Complex64> = (0..subcarriers)
                    .map(|_| {
                        let a: f64 = StandardNormal.sample(&mut rng);
                        let b: f64 = StandardNormal.sample(&mut rng);
                        Complex64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
                    })
                    .collect();
                modem.modulate(&symbols)
            })
            .collect::<Result<Vec<_>>>()?;
        let realization = channel::draw_realization(profile, workers, antennas, &mut rng);
        let rx = channel::transmit(&tx, &realization, profile.noise_variance, Exec::Sequential, |k| {
            streams.rng(Stream::Analysis, &[6, w as u64, k as u64])
        })?;
        rx.iter()
            .map(|r| {
                let y = modem.remove_cp(r)?.to_vec();
                let mut q = y.clone();
                quantizer::quantize_block(&spec, &mut q);
                Ok(q.iter().zip(&y).map(|(a, b)| a - gain * b).collect())
            })
            .collect()
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut cross = vec![Complex64::new(0.0, 0.0); antennas * antennas];
    let mut power = vec![0.0; antennas];
    let mut auto = vec![Complex64::new(0.0, 0.0); antennas * (max_lag + 1)];
    for word in &per_word {
        for a in 0..antennas {
            power[a] += word[a].iter().map(|v| v.norm_sqr()).sum::<f64>();
            for b in a + 1..antennas {
                cross[a * antennas + b] += word[a].iter().zip(&word[b]).map(|(x, y)| x * y.conj()).sum::<Complex64>();
            }
            for lag in 0..=max_lag.min(subcarriers - 1) {
                let q = &word[a];
                auto[a * (max_lag + 1) + lag] += q[lag..].iter().zip(q).map(|(x, y)| x * y.conj()).sum::<Complex64>();
            }
        }
    }
    let mut matrix = vec![0.0; antennas * antennas];
    let (mut max, mut sum, mut pairs) = (0.0f64, 0.0, 0usize);
    for a in 0..antennas {
        matrix[a * antennas + a] = 1.0;
        for b in a + 1..antennas {
            let rho = cross[a * antennas + b].norm() / (power[a] * power[b]).sqrt();
            matrix[a * antennas + b] = rho;
            matrix[b * antennas + a] = rho;
            max = max.max(rho);
            sum += rho;
            pairs += 1;
        }
    }
    let autocorrelation = (0..=max_lag)
        .map(|lag| {
            (0..antennas).map(|a| auto[a * (max_lag + 1) + lag].norm() / power[a]).sum::<f64>() / antennas as f64
        })
        .collect();
    Ok(CorrelationSummary {
        antennas,
        samples_per_antenna: words * subcarriers,
        matrix,
        max_off_diagonal: max,
        mean_off_diagonal: if pairs > 0 { sum / pairs as f64 } else { 0.0 },
        autocorrelation,
        eta: spec.eta(),
    })
}
