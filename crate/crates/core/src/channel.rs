//! Multipath Rayleigh fading between every (worker, antenna) pair.
//!
//! Each link is a tapped delay line `h[n] = Σ_l h_l·δ[n − τ_l]` whose gains are
//! drawn i.i.d. `CN(0, σ²_{h,l})` once per OFDM word. Received antenna streams
//! are the superposition of all workers' delayed words plus AWGN.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::fft::Dft;
use crate::ofdm::OfdmWord;
use crate::par::{self, Exec};
use crate::rng::{Stream, Streams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayModel {
    /// `delays` apply to every (worker, antenna) link.
    #[default]
    Fixed,
    /// Per link, tap 0 stays at zero delay and the remaining taps are drawn
    /// as distinct sorted integers in `1..=max(delays)`.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fading {
    /// Tap gains drawn `CN(0, σ²_{h,l})`.
    #[default]
    Rayleigh,
    /// Deterministic real tap gains `σ_{h,l}`; for calibration runs.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelProfile {
    /// Tap delays in samples, strictly increasing.
    pub delays: Vec<usize>,
    /// Per-tap gain variances σ²_{h,l}.
    pub tap_variances: Vec<f64>,
    /// AWGN variance per complex time sample.
    pub noise_variance: f64,
    #[serde(default)]
    pub delay_model: DelayModel,
    #[serde(default)]
    pub fading: Fading,
}

impl ChannelProfile {
    /// Three equal-power taps at 0, 500 and 1000 samples with σ_z² = 8·10⁻⁴.
    pub fn uniform_three_tap() -> Self {
        Self {
            delays: vec![0, 500, 1000],
            tap_variances: vec![1.0 / 3.0; 3],
            noise_variance: 8e-4,
            delay_model: DelayModel::Fixed,
            fading: Fading::Rayleigh,
        }
    }

    /// A single unit-variance tap with no delay.
    pub fn flat(noise_variance: f64) -> Self {
        Self {
            delays: vec![0],
            tap_variances: vec![1.0],
            noise_variance,
            delay_model: DelayModel::Fixed,
            fading: Fading::Rayleigh,
        }
    }

    pub fn taps(&self) -> usize {
        self.tap_variances.len()
    }

    pub fn max_delay(&self) -> usize {
        self.delays.iter().copied().max().unwrap_or(0)
    }

    /// σ_H² = Σ_l σ²_{h,l}, the variance of every subcarrier gain.
    pub fn sigma_h_sq(&self) -> f64 {
        self.tap_variances.iter().sum()
    }

    pub fn validate(&self, n_cp: usize) -> Result<()> {
        if self.tap_variances.is_empty() {
            return Err(Error::config("channel needs at least one tap"));
        }
        if self.delays.len() != self.tap_variances.len() {
            return Err(Error::config(format!("{} delays for {} taps", self.delays.len(), self.tap_variances.len())));
        }
        if !self.delays.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::config("tap delays must be strictly increasing"));
        }
        if self.max_delay() > n_cp {
            return Err(Error::config(format!("delay spread {} exceeds cyclic prefix {n_cp}", self.max_delay())));
        }
        if self.delay_model == DelayModel::Uniform && self.taps() > self.max_delay() + 1 {
            return Err(Error::config("uniform delays need max delay ≥ taps − 1"));
        }
        if !self.tap_variances.iter().all(|&v| v > 0.0 && v.is_finite()) {
            return Err(Error::config("tap variances must be positive"));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::config("noise variance must be non-negative"));
        }
        Ok(())
    }
}

/// Taps from every worker to one receive antenna, indexed `[m * L + l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AntennaChannel {
    pub gains: Vec<Complex64>,
    pub delays: Vec<usize>,
}

/// One channel draw, constant over a single OFDM word.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    workers: usize,
    taps: usize,
    antennas: Vec<AntennaChannel>,
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let a: f64 = StandardNormal.sample(rng);
    let b: f64 = StandardNormal.sample(rng);
    Complex64::new(a, b) * (variance / 2.0).sqrt()
}

fn link_delays<R: Rng + ?Sized>(profile: &ChannelProfile, rng: &mut R, out: &mut Vec<usize>) {
    match profile.delay_model {
        DelayModel::Fixed => out.extend_from_slice(&profile.delays),
        DelayModel::Uniform => {
            let max = profile.max_delay();
            let mut d = vec![0usize];
            let pick = Uniform::new_inclusive(1, max).expect("validated max delay");
            while d.len() < profile.taps() {
                let x = pick.sample(rng);
                if !d.contains(&x) {
                    d.push(x);
                }
            }
            d.sort_unstable();
            out.extend(d);
        }
    }
}

/// Draws the taps from `workers` transmitters to a single antenna.
pub fn draw_antenna<R: Rng + ?Sized>(profile: &ChannelProfile, workers: usize, rng: &mut R) -> AntennaChannel {
    let taps = profile.taps();
    let mut gains = Vec::with_capacity(workers * taps);
    let mut delays = Vec::with_capacity(workers * taps);
    for _ in 0..workers {
        link_delays(profile, rng, &mut delays);
        match profile.fading {
            Fading::Rayleigh => gains.extend(profile.tap_variances.iter().map(|&v| complex_normal(rng, v))),
            Fading::Fixed => gains.extend(profile.tap_variances.iter().map(|&v| Complex64::new(v.sqrt(), 0.0))),
        }
    }
    AntennaChannel { gains, delays }
}

/// Draws a full realization from one generator, antenna by antenna.
pub fn draw_realization<R: Rng + ?Sized>(
    profile: &ChannelProfile,
    workers: usize,
    antennas: usize,
    rng: &mut R,
) -> ChannelRealization {
    ChannelRealization {
        workers,
        taps: profile.taps(),
        antennas: (0..antennas).map(|_| draw_antenna(profile, workers, rng)).collect(),
    }
}

/// Draws a realization where antenna `k` uses the channel stream at
/// `keys ++ [k]`, so antenna `k` sees the same taps whatever the total `K`.
pub fn draw_realization_keyed(
    profile: &ChannelProfile,
    workers: usize,
    antennas: usize,
    streams: &Streams,
    keys: &[u64],
    exec: Exec,
) -> ChannelRealization {
    let antennas = par::map_range(exec, antennas, |k| {
        let mut key = keys.to_vec();
        key.push(k as u64);
        draw_antenna(profile, workers, &mut streams.rng(Stream::Channel, &key))
    });
    ChannelRealization { workers, taps: profile.taps(), antennas }
}

impl ChannelRealization {
    /// Builds a realization from explicit per-antenna taps.
    pub fn from_antennas(workers: usize, taps: usize, antennas: Vec<AntennaChannel>) -> Result<Self> {
        for a in &antennas {
            if a.gains.len() != workers * taps || a.delays.len() != workers * taps {
                return Err(Error::invalid("antenna tap table has the wrong size"));
            }
        }
        Ok(Self { workers, taps, antennas })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn antennas(&self) -> usize {
        self.antennas.len()
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    pub fn antenna(&self, k: usize) -> &AntennaChannel {
        &self.antennas[k]
    }

    pub fn gain(&self, m: usize, k: usize, l: usize) -> Complex64 {
        self.antennas[k].gains[m * self.taps + l]
    }

    pub fn delay(&self, m: usize, k: usize, l: usize) -> usize {
        self.antennas[k].delays[m * self.taps + l]
    }

    pub fn max_delay(&self) -> usize {
        self.antennas.iter().flat_map(|a| a.delays.iter().copied()).max().unwrap_or(0)
    }

    /// `H_mk[i] = Σ_l h_mkl·e^{−j2πiτ_mkl/N}` for i in 0..N.
    pub fn freq_response(&self, m: usize, k: usize, n: usize) -> Vec<Complex64> {
        self.freq_response_with(&Dft::new(n), m, k)
    }

    /// [`Self::freq_response`] reusing the twiddle table of an existing plan.
    pub fn freq_response_with(&self, dft: &Dft, m: usize, k: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); dft.len()];
        self.accumulate_response(dft, m, k, &mut out);
        out
    }

    fn accumulate_response(&self, dft: &Dft, m: usize, k: usize, out: &mut [Complex64]) {
        let n = dft.len();
        for l in 0..self.taps {
            let h = self.gain(m, k, l);
            let tau = self.delay(m, k, l) % n;
            for (i, o) in out.iter_mut().enumerate() {
                *o += h * dft.twiddle(i * tau);
            }
        }
    }
}

/// One antenna's received block: delayed, faded copies of every word plus noise.
pub fn receive_antenna<R: Rng + ?Sized>(
    words: &[OfdmWord],
    antenna: &AntennaChannel,
    taps: usize,
    noise_variance: f64,
    rng: &mut R,
) -> Vec<Complex64> {
    let len = words.first().map_or(0, |w| w.samples.len());
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for (m, word) in words.iter().enumerate() {
        for l in 0..taps {
            let h = antenna.gains[m * taps + l];
            let tau = antenna.delays[m * taps + l];
            if tau >= len {
                continue;
            }
            for (o, &x) in out[tau..].iter_mut().zip(&word.samples[..len - tau]) {
                *o += h * x;
            }
        }
    }
    if noise_variance > 0.0 {
        for o in out.iter_mut() {
            *o += complex_normal(rng, noise_variance);
        }
    }
    out
}

/// Passes every worker's word through the channel to all antennas.
///
/// `noise_rng(k)` supplies antenna `k`'s noise generator. Samples before the
/// start of a word read as zero.
pub fn transmit<R, F>(
    words: &[OfdmWord],
    realization: &ChannelRealization,
    noise_variance: f64,
    exec: Exec,
    noise_rng: F,
) -> Result<Vec<Vec<Complex64>>>
where
    R: Rng,
    F: Fn(usize) -> R + Sync + Send,
{
    let first = words.first().ok_or_else(|| Error::invalid("no words to transmit"))?;
    if words.len() != realization.workers() {
        return Err(Error::invalid(format!("{} words for {} workers", words.len(), realization.workers())));
    }
    if words.iter().any(|w| w.n != first.n || w.n_cp != first.n_cp || w.samples.len() != first.n + first.n_cp) {
        return Err(Error::invalid("all words must share N and N_cp"));
    }
    if realization.max_delay() > first.n_cp {
        return Err(Error::config(format!(
            "channel delay {} exceeds cyclic prefix {}",
            realization.max_delay(),
            first.n_cp
        )));
    }
    Ok(par::map_range(exec, realization.antennas(), |k| {
        receive_antenna(words, realization.antenna(k), realization.taps(), noise_variance, &mut noise_rng(k))
    }))
}
