//! Parameter-server receive chain.
//!
//! After optional per-antenna ADC quantization and OFDM demodulation, the
//! antennas are aligned with the conjugate of the summed channel gains,
//! `y[i] = (1/K) Σ_k c_k·(Σ_m H_mk[i])*·r_k[i]`, where the per-antenna weight
//! `c_k = 1/((1 − η)(1 − η_k))` undoes the Bussgang gains of the DAC (η) and
//! of antenna `k`'s ADC (η_k). With many antennas the signal part of `y[i]`
//! tends to `σ_H²·Σ_m g_m[i]`, from which the mean gradient is read off.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::fft::Dft;
use crate::ofdm;
use crate::par::{self, Exec};
use crate::quantizer::{self, Converter};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Which converters are finite-resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioKind {
    InfiniteResolution,
    DacOnly { dac_bits: u32 },
    AdcOnly { adc_bits: u32 },
    Joint { dac_bits: u32, adc_bits: u32 },
}

impl ScenarioKind {
    pub fn from_bits(dac_bits: Option<u32>, adc_bits: Option<u32>) -> Self {
        match (dac_bits, adc_bits) {
            (None, None) => ScenarioKind::InfiniteResolution,
            (Some(dac_bits), None) => ScenarioKind::DacOnly { dac_bits },
            (None, Some(adc_bits)) => ScenarioKind::AdcOnly { adc_bits },
            (Some(dac_bits), Some(adc_bits)) => ScenarioKind::Joint { dac_bits, adc_bits },
        }
    }

    pub fn dac_bits(self) -> Option<u32> {
        match self {
            ScenarioKind::DacOnly { dac_bits } | ScenarioKind::Joint { dac_bits, .. } => Some(dac_bits),
            _ => None,
        }
    }

    pub fn adc_bits(self) -> Option<u32> {
        match self {
            ScenarioKind::AdcOnly { adc_bits } | ScenarioKind::Joint { adc_bits, .. } => Some(adc_bits),
            _ => None,
        }
    }

    /// Short tag used in file names: `ir`, `dac1`, `adc2`, `joint1-1`.
    pub fn tag(self) -> String {
        match self {
            ScenarioKind::InfiniteResolution => "ir".into(),
            ScenarioKind::DacOnly { dac_bits } => format!("dac{dac_bits}"),
            ScenarioKind::AdcOnly { adc_bits } => format!("adc{adc_bits}"),
            ScenarioKind::Joint { dac_bits, adc_bits } => format!("joint{dac_bits}-{adc_bits}"),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::InfiniteResolution => "infinite_resolution",
            ScenarioKind::DacOnly { .. } => "dac_only",
            ScenarioKind::AdcOnly { .. } => "adc_only",
            ScenarioKind::Joint { .. } => "joint",
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    /// Accepts `ir`, `dac:B`, `adc:B`, `joint:B:B`, or the JSON object form.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            return Ok(serde_json::from_str(s)?);
        }
        let bits =
            |v: &str| v.parse::<u32>().map_err(|_| Error::invalid(format!("bad bit count {v:?} in scenario {s:?}")));
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["ir" | "infinite_resolution"] => Ok(ScenarioKind::InfiniteResolution),
            ["dac" | "dac_only", b] => Ok(ScenarioKind::DacOnly { dac_bits: bits(b)? }),
            ["adc" | "adc_only", b] => Ok(ScenarioKind::AdcOnly { adc_bits: bits(b)? }),
            ["joint", d, a] => Ok(ScenarioKind::Joint { dac_bits: bits(d)?, adc_bits: bits(a)? }),
            _ => Err(Error::invalid(format!("unrecognized scenario {s:?}"))),
        }
    }
}

/// `H_mk[i]` for every worker/antenna pair of one word, stored `[k][m][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqResponses {
    workers: usize,
    antennas: usize,
    n: usize,
    data: Vec<Complex64>,
}

impl FreqResponses {
    pub fn from_realization(realization: &ChannelRealization, dft: &Dft, exec: Exec) -> Self {
        let (workers, antennas, n) = (realization.workers(), realization.antennas(), dft.len());
        let rows = par::map_range(exec, antennas * workers, |idx| {
            realization.freq_response_with(dft, idx % workers, idx / workers)
        });
        Self { workers, antennas, n, data: rows.concat() }
    }

    /// Builds from explicit responses indexed `[k][m]`.
    pub fn from_nested(h: Vec<Vec<Vec<Complex64>>>) -> Result<Self> {
        let antennas = h.len();
        let workers = h.first().map_or(0, Vec::len);
        let n = h.first().and_then(|r| r.first()).map_or(0, Vec::len);
        if antennas == 0 || workers == 0 || n == 0 {
            return Err(Error::invalid("empty frequency response table"));
        }
        if h.iter().any(|r| r.len() != workers || r.iter().any(|v| v.len() != n)) {
            return Err(Error::invalid("ragged frequency response table"));
        }
        Ok(Self { workers, antennas, n, data: h.into_iter().flatten().flatten().collect() })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, m: usize, k: usize) -> &[Complex64] {
        let start = (k * self.workers + m) * self.n;
        &self.data[start..start + self.n]
    }

    /// `Σ_m H_mk[i]` for antenna `k`.
    pub fn summed(&self, k: usize) -> Vec<Complex64> {
        let mut acc = vec![ZERO; self.n];
        for m in 0..self.workers {
            for (a, h) in acc.iter_mut().zip(self.get(m, k)) {
                *a += h;
            }
        }
        acc
    }
}

/// Output of a combiner for one OFDM word.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedSubcarriers {
    pub y: Vec<Complex64>,
    pub eta: f64,
    pub eta_k: Vec<f64>,
}

/// Quantizes every antenna block with the spec scaled to that block's RMS.
///
/// Returns the quantized blocks and the distortion factor measured on each
/// block (zero for an ideal converter).
pub fn adc_quantize(
    received: &[Vec<Complex64>],
    converter: &Converter,
    exec: Exec,
) -> Result<(Vec<Vec<Complex64>>, Vec<f64>)> {
    if received.is_empty() || received.iter().any(Vec::is_empty) {
        return Err(Error::invalid("empty received block"));
    }
    let Some(spec) = converter.spec() else {
        return Ok((received.to_vec(), vec![0.0; received.len()]));
    };
    let out = par::map_slice(exec, received, |block| -> Result<(Vec<Complex64>, f64)> {
        let eta = quantizer::measure_distortion_factor(spec, block)?;
        let mut q = block.clone();
        quantizer::quantize_block(spec, &mut q);
        Ok((q, eta))
    });
    let (blocks, etas) = out.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    Ok((blocks, etas))
}

fn check_eta(eta: f64, what: &str) -> Result<()> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::invalid(format!("{what} must be in [0, 1), got {eta}")));
    }
    Ok(())
}

fn combine(r: &[Vec<Complex64>], h: &FreqResponses, eta: f64, eta_k: &[f64]) -> Result<CombinedSubcarriers> {
    check_eta(eta, "eta")?;
    for &e in eta_k {
        check_eta(e, "eta_k")?;
    }
    let k_count = h.antennas();
    if r.len() != k_count || eta_k.len() != k_count {
        return Err(Error::invalid(format!(
            "{} antenna blocks and {} eta_k for {k_count} antennas",
            r.len(),
            eta_k.len()
        )));
    }
    if r.iter().any(|v| v.len() != h.n()) {
        return Err(Error::invalid("subcarrier count mismatch"));
    }
    let mut y = vec![ZERO; h.n()];
    for (k, rk) in r.iter().enumerate() {
        let weight = 1.0 / ((1.0 - eta) * (1.0 - eta_k[k]));
        for ((acc, s), x) in y.iter_mut().zip(h.summed(k)).zip(rk) {
            *acc += weight * s.conj() * x;
        }
    }
    let inv_k = 1.0 / k_count as f64;
    y.iter_mut().for_each(|v| *v *= inv_k);
    Ok(CombinedSubcarriers { y, eta, eta_k: eta_k.to_vec() })
}

/// Combiner for finite-resolution DACs only.
pub fn combine_dac(r: &[Vec<Complex64>], h: &FreqResponses, eta: f64) -> Result<CombinedSubcarriers> {
    combine(r, h, eta, &vec![0.0; h.antennas()])
}

/// Combiner for finite-resolution ADCs only, with per-antenna gain compensation.
pub fn combine_adc(r: &[Vec<Complex64>], h: &FreqResponses, eta_k: &[f64]) -> Result<CombinedSubcarriers> {
    combine(r, h, 0.0, eta_k)
}

/// Combiner for finite-resolution DACs and ADCs.
pub fn combine_joint(r: &[Vec<Complex64>], h: &FreqResponses, eta: f64, eta_k: &[f64]) -> Result<CombinedSubcarriers> {
    combine(r, h, eta, eta_k)
}

/// Reads the mean-gradient estimate `Re y[i]/(Mσ_H²)` (first half) and
/// `Im y[i]/(Mσ_H²)` (second half) out of the combined words of one iteration.
pub fn recover_gradient(words: &[CombinedSubcarriers], workers: usize, sigma_h_sq: f64, d: usize) -> Result<Vec<f64>> {
    if !(sigma_h_sq > 0.0) || workers == 0 || d == 0 {
        return Err(Error::invalid("recovery needs σ_H² > 0, M ≥ 1 and d ≥ 1"));
    }
    let n = words.first().map_or(0, |w| w.y.len());
    if n == 0 || words.iter().any(|w| w.y.len() != n) || words.len() != ofdm::words_for(d, n) {
        return Err(Error::invalid(format!(
            "{} combined words of {n} subcarriers cannot carry {d} parameters",
            words.len()
        )));
    }
    let s = d.div_ceil(2);
    let scale = 1.0 / (workers as f64 * sigma_h_sq);
    let symbols: Vec<Complex64> = words.iter().flat_map(|w| w.y.iter()).take(s).map(|v| v * scale).collect();
    ofdm::unpack_gradient(&symbols, d)
}

/// Per-word state retained for the five-term decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Instrumentation {
    /// Frequency-domain symbols `g_m[i]` per worker.
    pub symbols: Vec<Vec<Complex64>>,
    /// `Q_m[i]`, the DFT of the DAC distortion body `Ḡ^Q_m − (1 − η)Ḡ_m`,
    /// per worker; `None` without a finite-resolution DAC.
    pub dac_distortion: Option<Vec<Vec<Complex64>>>,
    /// Demodulated antenna outputs `r_k[i]` fed to the combiner.
    pub received: Vec<Vec<Complex64>>,
}

/// The additive components of the combiner output.
#[derive(Debug, Clone, PartialEq)]
pub struct FiveTerms {
    pub signal: Vec<Complex64>,
    pub interference: Vec<Complex64>,
    pub distortion: Vec<Complex64>,
    pub second_distortion: Vec<Complex64>,
    pub noise: Vec<Complex64>,
}

impl FiveTerms {
    pub fn total(&self) -> Vec<Complex64> {
        (0..self.signal.len())
            .map(|i| {
                self.signal[i] + self.interference[i] + self.distortion[i] + self.second_distortion[i] + self.noise[i]
            })
            .collect()
    }
}

/// Splits the combiner output into signal, inter-worker interference, the two
/// DAC distortion terms and the effective noise.
///
/// The noise term is defined through the residual
/// `P_k = r_k − (1 − η_k)[(1 − η)Σ_m H_mk g_m + Σ_m H_mk Q_m]`, which carries
/// channel noise and any ADC distortion, so the five terms sum to the
/// combiner output exactly.
pub fn decompose_terms(
    instrumentation: Option<&Instrumentation>,
    h: &FreqResponses,
    eta: f64,
    eta_k: &[f64],
) -> Result<FiveTerms> {
    let inst = instrumentation.ok_or(Error::MissingInstrumentation)?;
    check_eta(eta, "eta")?;
    let (m_count, k_count, n) = (h.workers(), h.antennas(), h.n());
    if inst.symbols.len() != m_count || inst.received.len() != k_count || eta_k.len() != k_count {
        return Err(Error::invalid("instrumentation does not match the channel dimensions"));
    }
    let zeros = vec![vec![ZERO; n]; m_count];
    let q = inst.dac_distortion.as_ref().unwrap_or(&zeros);
    if q.len() != m_count {
        return Err(Error::invalid("DAC distortion table does not match M"));
    }

    let mut t = FiveTerms {
        signal: vec![ZERO; n],
        interference: vec![ZERO; n],
        distortion: vec![ZERO; n],
        second_distortion: vec![ZERO; n],
        noise: vec![ZERO; n],
    };
    let dac = 1.0 / (1.0 - eta);
    for k in 0..k_count {
        check_eta(eta_k[k], "eta_k")?;
        let adc = 1.0 - eta_k[k];
        for i in 0..n {
            let mut sum_h = ZERO;
            let mut sum_hg = ZERO;
            let mut sum_hq = ZERO;
            let mut own_g = ZERO;
            let mut own_q = ZERO;
            for m in 0..m_count {
                let hm = h.get(m, k)[i];
                let p = hm.norm_sqr();
                sum_h += hm;
                sum_hg += hm * inst.symbols[m][i];
                sum_hq += hm * q[m][i];
                own_g += p * inst.symbols[m][i];
                own_q += p * q[m][i];
            }
            let residual = inst.received[k][i] - adc * ((1.0 - eta) * sum_hg + sum_hq);
            t.signal[i] += own_g;
            t.interference[i] += sum_h.conj() * sum_hg - own_g;
            t.distortion[i] += dac * (sum_h.conj() * sum_hq - own_q);
            t.second_distortion[i] += dac * own_q;
            t.noise[i] += dac / adc * sum_h.conj() * residual;
        }
    }
    let inv_k = 1.0 / k_count as f64;
    for v in [&mut t.signal, &mut t.interference, &mut t.distortion, &mut t.second_distortion, &mut t.noise] {
        v.iter_mut().for_each(|x| *x *= inv_k);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_realization, ChannelProfile};
    use crate::quantizer::design_gaussian_quantizer;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn cn(rng: &mut ChaCha8Rng) -> Complex64 {
        Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)) * std::f64::consts::FRAC_1_SQRT_2
    }

    fn random_h(m: usize, k: usize, n: usize, rng: &mut ChaCha8Rng) -> FreqResponses {
        let nested = (0..k).map(|_| (0..m).map(|_| (0..n).map(|_| cn(rng)).collect()).collect()).collect();
        FreqResponses::from_nested(nested).unwrap()
    }

    fn random_blocks(count: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<Complex64>> {
        (0..count).map(|_| (0..n).map(|_| cn(rng)).collect()).collect()
    }

    #[test]
    fn scenario_parsing() {
        for (text, want) in [
            ("ir", ScenarioKind::InfiniteResolution),
            ("dac:1", ScenarioKind::DacOnly { dac_bits: 1 }),
            ("adc_only:3", ScenarioKind::AdcOnly { adc_bits: 3 }),
            ("joint:1:2", ScenarioKind::Joint { dac_bits: 1, adc_bits: 2 }),
            (r#"{"kind":"dac_only","dac_bits":2}"#, ScenarioKind::DacOnly { dac_bits: 2 }),
        ] {
            assert_eq!(text.parse::<ScenarioKind>().unwrap(), want);
        }
        assert!("dac".parse::<ScenarioKind>().is_err());
        assert!("joint:1:x".parse::<ScenarioKind>().is_err());
        assert_eq!(ScenarioKind::Joint { dac_bits: 1, adc_bits: 2 }.tag(), "joint1-2");
    }

    #[test]
    fn single_link_combiner_returns_power_weighted_symbols() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_h(1, 1, 8, &mut rng);
        let g: Vec<Complex64> = (0..8).map(|_| cn(&mut rng)).collect();
        let r = vec![g.iter().zip(h.get(0, 0)).map(|(a, b)| a * b).collect::<Vec<_>>()];
        let y = combine_dac(&r, &h, 0.0).unwrap();
        for i in 0..8 {
            let want = h.get(0, 0)[i].norm_sqr() * g[i];
            assert!((y.y[i] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn adc_gain_cancels_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_h(1, 1, 8, &mut rng);
        let g: Vec<Complex64> = (0..8).map(|_| cn(&mut rng)).collect();
        let eta_k = 0.3634;
        let r = vec![g.iter().zip(h.get(0, 0)).map(|(a, b)| (1.0 - eta_k) * a * b).collect::<Vec<_>>()];
        let y = combine_adc(&r, &h, &[eta_k]).unwrap();
        for i in 0..8 {
            let want = h.get(0, 0)[i].norm_sqr() * g[i];
            assert!((y.y[i] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn combiner_degenerations_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (m, k, n) = (3, 4, 16);
        let h = random_h(m, k, n, &mut rng);
        let r = random_blocks(k, n, &mut rng);
        let eta_k: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..0.4)).collect();
        assert_eq!(combine_joint(&r, &h, 0.0, &eta_k).unwrap().y, combine_adc(&r, &h, &eta_k).unwrap().y);
        assert_eq!(combine_joint(&r, &h, 0.25, &[0.0; 4]).unwrap().y, combine_dac(&r, &h, 0.25).unwrap().y);
        assert_eq!(combine_dac(&r, &h, 0.0).unwrap().y, combine_adc(&r, &h, &[0.0; 4]).unwrap().y);
    }

    #[test]
    fn combiner_rejects_bad_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = random_h(2, 2, 4, &mut rng);
        let r = random_blocks(2, 4, &mut rng);
        assert!(combine_dac(&r, &h, 1.0).is_err());
        assert!(combine_adc(&r, &h, &[0.1]).is_err());
        assert!(combine_dac(&r[..1], &h, 0.1).is_err());
    }

    #[test]
    fn recovery_round_trip_and_errors() {
        let n = 4;
        let g = vec![1.0, -2.0, 3.0, 0.5, 7.0, -1.0, 2.0];
        let symbols = ofdm::pack_gradient(&g).unwrap();
        // M = 2 workers, σ_H² = 0.5: y carries M σ_H² times the mean.
        let words: Vec<CombinedSubcarriers> = ofdm::segment(&symbols, n)
            .unwrap()
            .into_iter()
            .map(|s| CombinedSubcarriers { y: s.values.iter().map(|v| v * 1.0).collect(), eta: 0.0, eta_k: vec![] })
            .collect();
        let back = recover_gradient(&words, 2, 0.5, g.len()).unwrap();
        for (a, b) in back.iter().zip(&g) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(recover_gradient(&words, 2, 0.0, g.len()).is_err());
        assert!(recover_gradient(&words[..0], 2, 0.5, g.len()).is_err());
        assert!(recover_gradient(&words, 2, 0.5, 20).is_err());
    }

    #[test]
    fn adc_passthrough_and_measured_eta() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let blocks = random_blocks(3, 20_000, &mut rng);
        let (out, etas) = adc_quantize(&blocks, &Converter::Ideal, Exec::Sequential).unwrap();
        assert_eq!(out, blocks);
        assert_eq!(etas, vec![0.0; 3]);

        let two = Converter::Quantized(design_gaussian_quantizer(2).unwrap());
        let (out, etas) = adc_quantize(&blocks, &two, Exec::Parallel).unwrap();
        assert_eq!(out.len(), 3);
        for e in etas {
            assert!((e - 0.1175).abs() < 0.01, "{e}");
        }
        assert!(adc_quantize(&[vec![ZERO; 8]], &two, Exec::Sequential).is_err());
        assert!(adc_quantize(&[], &two, Exec::Sequential).is_err());
    }

    fn random_instrumented(
        m: usize,
        k: usize,
        n: usize,
        with_q: bool,
        rng: &mut ChaCha8Rng,
    ) -> (FreqResponses, Instrumentation) {
        let h = random_h(m, k, n, rng);
        let symbols = random_blocks(m, n, rng);
        let received = random_blocks(k, n, rng);
        let dac_distortion = with_q.then(|| random_blocks(m, n, rng));
        (h, Instrumentation { symbols, dac_distortion, received })
    }

    #[test]
    fn five_terms_sum_to_combiner_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (h, inst) = random_instrumented(3, 4, 16, true, &mut rng);
        let eta = 0.3634;
        let eta_k = [0.1175, 0.2, 0.0, 0.3634];
        let terms = decompose_terms(Some(&inst), &h, eta, &eta_k).unwrap();
        let y = combine_joint(&inst.received, &h, eta, &eta_k).unwrap().y;
        let scale = y.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in terms.total().iter().zip(&y) {
            assert!((a - b).norm() / scale < 1e-9);
        }
    }

    #[test]
    fn five_terms_match_direct_double_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (m, k, n) = (3, 2, 4);
        let (h, inst) = random_instrumented(m, k, n, true, &mut rng);
        let eta = 0.2;
        let terms = decompose_terms(Some(&inst), &h, eta, &[0.0, 0.0]).unwrap();
        let q = inst.dac_distortion.as_ref().unwrap();
        for i in 0..n {
            let (mut interf, mut dist) = (ZERO, ZERO);
            for kk in 0..k {
                for a in 0..m {
                    for b in 0..m {
                        if a != b {
                            let c = h.get(a, kk)[i].conj() * h.get(b, kk)[i];
                            interf += c * inst.symbols[b][i];
                            dist += c * q[b][i];
                        }
                    }
                }
            }
            assert!((terms.interference[i] - interf / k as f64).norm() < 1e-12);
            assert!((terms.distortion[i] - dist / ((1.0 - eta) * k as f64)).norm() < 1e-12);
        }
    }

    #[test]
    fn infinite_resolution_has_no_distortion_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (h, inst) = random_instrumented(3, 4, 16, false, &mut rng);
        let terms = decompose_terms(Some(&inst), &h, 0.0, &[0.0; 4]).unwrap();
        assert!(terms.distortion.iter().all(|v| *v == ZERO));
        assert!(terms.second_distortion.iter().all(|v| *v == ZERO));
        assert!(matches!(decompose_terms(None, &h, 0.0, &[0.0; 4]), Err(Error::MissingInstrumentation)));
    }

    #[test]
    fn freq_responses_match_realization() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let profile = ChannelProfile { noise_variance: 0.0, ..ChannelProfile::uniform_three_tap() };
        let real = draw_realization(&profile, 3, 2, &mut rng);
        let dft = Dft::new(1024);
        let h = FreqResponses::from_realization(&real, &dft, Exec::Parallel);
        assert_eq!(h.get(2, 1), real.freq_response(2, 1, 1024).as_slice());
        let summed = h.summed(1);
        let direct: Complex64 = (0..3).map(|m| h.get(m, 1)[10]).sum();
        assert!((summed[10] - direct).norm() < 1e-15);
    }
}
