//! MMSE (Lloyd-Max) scalar quantizers for Gaussian sources and the complex
//! element-wise quantization used to model low-resolution DACs and ADCs.
//!
//! A [`QuantizerSpec`] is designed once at unit variance. At run time it is
//! rescaled to the per-component RMS of the block being converted, so the
//! distortion factor η depends only on the bit width.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::{Error, Result};

pub const MIN_BITS: u32 = 1;
pub const MAX_BITS: u32 = 8;

const LEVEL_TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 100_000;

/// A `2^bits`-level quantizer for a zero-mean, unit-variance Gaussian.
///
/// `boundaries` has `2^bits + 1` entries with infinite end points; region `i`
/// is the half-open interval `[boundaries[i], boundaries[i + 1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct QuantizerSpec {
    bits: u32,
    boundaries: Vec<f64>,
    levels: Vec<f64>,
    eta: f64,
}

/// JSON form: only the finite thresholds are stored.
#[derive(Serialize, Deserialize)]
struct SpecRepr {
    bits: u32,
    thresholds: Vec<f64>,
    levels: Vec<f64>,
    eta: f64,
}

impl From<QuantizerSpec> for SpecRepr {
    fn from(s: QuantizerSpec) -> Self {
        let n = s.boundaries.len();
        SpecRepr { bits: s.bits, thresholds: s.boundaries[1..n - 1].to_vec(), levels: s.levels, eta: s.eta }
    }
}

impl TryFrom<SpecRepr> for QuantizerSpec {
    type Error = Error;

    fn try_from(r: SpecRepr) -> Result<Self> {
        let beta = 1usize
            .checked_shl(r.bits)
            .filter(|_| (MIN_BITS..=MAX_BITS).contains(&r.bits))
            .ok_or_else(|| Error::invalid(format!("bits {} out of range", r.bits)))?;
        if r.levels.len() != beta || r.thresholds.len() != beta - 1 {
            return Err(Error::invalid("level/threshold count does not match bits"));
        }
        let mut boundaries = Vec::with_capacity(beta + 1);
        boundaries.push(f64::NEG_INFINITY);
        boundaries.extend_from_slice(&r.thresholds);
        boundaries.push(f64::INFINITY);
        let ordered = boundaries.windows(2).all(|w| w[0] < w[1])
            && r.levels.windows(2).all(|w| w[0] < w[1])
            && r.levels.iter().enumerate().all(|(i, &a)| boundaries[i] <= a && a < boundaries[i + 1]);
        if !ordered || !(0.0..1.0).contains(&r.eta) {
            return Err(Error::invalid("quantizer spec violates ordering invariants"));
        }
        Ok(QuantizerSpec { bits: r.bits, boundaries, levels: r.levels, eta: r.eta })
    }
}

fn pdf(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }
}

/// x·φ(x), zero at ±∞.
fn x_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        x * pdf(x)
    }
}

/// Upper tail probability P(X > x).
fn tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// P(lo < X < hi), evaluated on whichever side avoids cancellation.
fn mass(lo: f64, hi: f64) -> f64 {
    if lo >= 0.0 {
        tail(lo) - tail(hi)
    } else if hi <= 0.0 {
        tail(-hi) - tail(-lo)
    } else {
        1.0 - tail(hi) - tail(-lo)
    }
}

/// E[X | lo < X < hi] for a unit Gaussian.
fn truncated_mean(lo: f64, hi: f64) -> f64 {
    (pdf(lo) - pdf(hi)) / mass(lo, hi)
}

/// Designs the Lloyd-Max quantizer for a zero-mean unit-variance Gaussian by
/// alternating the midpoint and centroid conditions until no level moves by
/// more than 1e-10.
pub fn design_gaussian_quantizer(bits: u32) -> Result<QuantizerSpec> {
    if !(MIN_BITS..=MAX_BITS).contains(&bits) {
        return Err(Error::invalid(format!("bits must be in {MIN_BITS}..={MAX_BITS}, got {bits}")));
    }
    let beta = 1usize << bits;
    let normal = Normal::standard();
    let mut levels: Vec<f64> = (0..beta).map(|i| normal.inverse_cdf((i as f64 + 0.5) / beta as f64)).collect();
    let mut boundaries = vec![0.0; beta + 1];
    boundaries[0] = f64::NEG_INFINITY;
    boundaries[beta] = f64::INFINITY;

    let mut movement = f64::INFINITY;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        for i in 1..beta {
            boundaries[i] = 0.5 * (levels[i - 1] + levels[i]);
        }
        movement = 0.0;
        for (i, level) in levels.iter_mut().enumerate() {
            let next = truncated_mean(boundaries[i], boundaries[i + 1]);
            movement = f64::max(movement, (next - *level).abs());
            *level = next;
        }
        if movement < LEVEL_TOLERANCE {
            break;
        }
    }
    if movement >= LEVEL_TOLERANCE {
        return Err(Error::NotConverged { iterations, movement });
    }
    // Final midpoint pass so condition A holds exactly for the returned levels.
    for i in 1..beta {
        boundaries[i] = 0.5 * (levels[i - 1] + levels[i]);
    }

    // ∫(x − a)²φ over each region, from the closed-form truncated moments.
    let eta = (0..beta)
        .map(|i| {
            let (lo, hi, a) = (boundaries[i], boundaries[i + 1], levels[i]);
            let p = mass(lo, hi);
            let m1 = pdf(lo) - pdf(hi);
            let m2 = p + x_pdf(lo) - x_pdf(hi);
            m2 - 2.0 * a * m1 + a * a * p
        })
        .sum();

    Ok(QuantizerSpec { bits, boundaries, levels, eta })
}

impl QuantizerSpec {
    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// β + 1 region boundaries, including the infinite end points.
    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// β reconstruction levels at unit scale.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Distortion factor η = 1/SQNR for a unit Gaussian input.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Region index of `z` (unit scale); ties go to the upper region.
    pub fn region(&self, z: f64) -> usize {
        let n = self.boundaries.len();
        self.boundaries[1..n - 1].partition_point(|&t| t <= z)
    }

    /// Quantizes a real value at unit scale.
    #[inline]
    pub fn quantize_unit(&self, z: f64) -> f64 {
        self.levels[self.region(z)]
    }

    #[inline]
    fn quantize_scaled(&self, scale: f64, x: Complex64) -> Complex64 {
        Complex64::new(scale * self.quantize_unit(x.re / scale), scale * self.quantize_unit(x.im / scale))
    }

    /// Bussgang gain `1 − η` and distortion variance `η(1 − η)σ²`.
    pub fn bussgang_params(&self, sigma: f64) -> Result<(f64, f64)> {
        bussgang_from_eta(self.eta, sigma)
    }
}

/// Complex quantization `Q(x) = σ·Q(xᴿ/σ) + jσ·Q(xᴵ/σ)`.
pub fn quantize_complex(spec: &QuantizerSpec, scale: f64, x: Complex64) -> Result<Complex64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid(format!("scale must be positive and finite, got {scale}")));
    }
    if !(x.re.is_finite() && x.im.is_finite()) {
        return Err(Error::NonFinite(format!("quantizer input {x}")));
    }
    Ok(spec.quantize_scaled(scale, x))
}

/// Per-component RMS `sqrt(E|x|²/2)` of a block.
pub fn component_rms(samples: &[Complex64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let power: f64 = samples.iter().map(|x| x.norm_sqr()).sum();
    (power / (2.0 * samples.len() as f64)).sqrt()
}

/// Quantizes a block in place with the spec scaled to the block's
/// per-component RMS. Returns the scale used, or `None` (block untouched)
/// when the block has zero power.
pub fn quantize_block(spec: &QuantizerSpec, block: &mut [Complex64]) -> Option<f64> {
    let scale = component_rms(block);
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    for x in block.iter_mut() {
        *x = spec.quantize_scaled(scale, *x);
    }
    Some(scale)
}

/// Empirical `E|Q(X) − X|² / E|X|²` with the spec matched to the samples' RMS.
pub fn measure_distortion_factor(spec: &QuantizerSpec, samples: &[Complex64]) -> Result<f64> {
    measure_distortion_factor_with_scale(spec, component_rms(samples), samples)
}

/// Empirical distortion factor at an explicit quantizer scale.
pub fn measure_distortion_factor_with_scale(spec: &QuantizerSpec, scale: f64, samples: &[Complex64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::invalid("at least two samples are required"));
    }
    if samples.iter().any(|x| !(x.re.is_finite() && x.im.is_finite())) {
        return Err(Error::NonFinite("distortion measurement input".into()));
    }
    let (err, power) = samples
        .iter()
        .fold((0.0, 0.0), |(e, p), &x| (e + (spec.quantize_scaled(scale, x) - x).norm_sqr(), p + x.norm_sqr()));
    if power == 0.0 {
        return Err(Error::invalid("SQNR is undefined for an all-zero block"));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid(format!("scale must be positive and finite, got {scale}")));
    }
    Ok(err / power)
}

/// Bussgang linearization for a given distortion factor.
pub fn bussgang_from_eta(eta: f64, sigma: f64) -> Result<(f64, f64)> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::invalid(format!("eta must be in [0, 1), got {eta}")));
    }
    Ok((1.0 - eta, eta * (1.0 - eta) * sigma * sigma))
}

/// A DAC or ADC: either ideal or a designed Gaussian quantizer.
#[derive(Debug, Clone, PartialEq)]
pub enum Converter {
    Ideal,
    Quantized(QuantizerSpec),
}

impl Converter {
    pub fn from_bits(bits: Option<u32>) -> Result<Self> {
        match bits {
            None => Ok(Converter::Ideal),
            Some(b) => Ok(Converter::Quantized(design_gaussian_quantizer(b)?)),
        }
    }

    /// Design-time distortion factor (0 for an ideal converter).
    pub fn eta(&self) -> f64 {
        match self {
            Converter::Ideal => 0.0,
            Converter::Quantized(spec) => spec.eta(),
        }
    }

    pub fn spec(&self) -> Option<&QuantizerSpec> {
        match self {
            Converter::Ideal => None,
            Converter::Quantized(spec) => Some(spec),
        }
    }

    /// Converts a block in place; ideal converters and zero blocks pass through.
    pub fn apply(&self, block: &mut [Complex64]) {
        if let Converter::Quantized(spec) = self {
            quantize_block(spec, block);
        }
    }
}
