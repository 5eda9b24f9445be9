//! Mapping between real gradient vectors and time-domain OFDM words.
//!
//! A length-`d` gradient is packed into `s = ⌈d/2⌉` complex symbols (first
//! half on the real axis, second half on the imaginary axis), split across
//! `⌈s/N⌉` words of `N` subcarriers, transformed by an IDFT and prefixed with
//! the last `N_cp` samples of the body.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fft::Dft;
use crate::{Error, Result};

/// `[g₁ + j·g_{s+1}, …, g_s + j·g_{2s}]`, with `g_{2s} = 0` for odd `d`.
pub fn pack_gradient(g: &[f64]) -> Result<Vec<Complex64>> {
    if g.is_empty() {
        return Err(Error::invalid("cannot pack an empty gradient"));
    }
    let s = g.len().div_ceil(2);
    Ok((0..s).map(|n| Complex64::new(g[n], g.get(s + n).copied().unwrap_or(0.0))).collect())
}

/// Left inverse of [`pack_gradient`]; the padding slot of an odd `d` is dropped.
pub fn unpack_gradient(y: &[Complex64], d: usize) -> Result<Vec<f64>> {
    if d == 0 || y.len() != d.div_ceil(2) {
        return Err(Error::invalid(format!("{} symbols cannot hold a gradient of length {d}", y.len())));
    }
    let s = y.len();
    Ok((0..d).map(|i| if i < s { y[i].re } else { y[i - s].im }).collect())
}

/// One OFDM word's worth of subcarrier symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientSegment {
    /// `N` symbols; entries past `populated` are zero.
    pub values: Vec<Complex64>,
    pub populated: usize,
    pub word_index: usize,
    pub total_words: usize,
}

/// Splits `symbols` into `⌈s/N⌉` zero-padded segments of length `n`.
pub fn segment(symbols: &[Complex64], n: usize) -> Result<Vec<GradientSegment>> {
    if n == 0 {
        return Err(Error::invalid("subcarrier count must be positive"));
    }
    let total_words = symbols.len().div_ceil(n);
    Ok(symbols
        .chunks(n)
        .enumerate()
        .map(|(word_index, chunk)| {
            let mut values = chunk.to_vec();
            values.resize(n, Complex64::new(0.0, 0.0));
            GradientSegment { values, populated: chunk.len(), word_index, total_words }
        })
        .collect())
}

/// Number of OFDM words needed for a gradient of length `d`.
pub fn words_for(d: usize, n: usize) -> usize {
    d.div_ceil(2).div_ceil(n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfdmWord {
    pub samples: Vec<Complex64>,
    pub n: usize,
    pub n_cp: usize,
}

impl OfdmWord {
    pub fn body(&self) -> &[Complex64] {
        &self.samples[self.n_cp..]
    }

    pub fn body_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples[self.n_cp..]
    }

    /// The prefix equals the tail of the body.
    pub fn has_cyclic_prefix(&self) -> bool {
        self.samples.len() == self.n + self.n_cp
            && self.n_cp <= self.n
            && self.samples[..self.n_cp] == self.samples[self.n..]
    }
}

/// OFDM modulator/demodulator for a fixed `N` and `N_cp`.
#[derive(Debug, Clone)]
pub struct Modem {
    dft: Dft,
    n_cp: usize,
}

impl Modem {
    pub fn new(n: usize, n_cp: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("subcarrier count must be positive"));
        }
        if n_cp > n {
            return Err(Error::invalid(format!("cyclic prefix {n_cp} longer than word body {n}")));
        }
        Ok(Self { dft: Dft::new(n), n_cp })
    }

    pub fn n(&self) -> usize {
        self.dft.len()
    }

    pub fn n_cp(&self) -> usize {
        self.n_cp
    }

    pub fn dft(&self) -> &Dft {
        &self.dft
    }

    /// IDFT of the segment followed by cyclic prefix insertion.
    pub fn modulate(&self, values: &[Complex64]) -> Result<OfdmWord> {
        let n = self.n();
        if values.len() != n {
            return Err(Error::invalid(format!("segment has {} symbols, expected {n}", values.len())));
        }
        let mut body = values.to_vec();
        self.dft.inverse(&mut body);
        let mut samples = Vec::with_capacity(n + self.n_cp);
        samples.extend_from_slice(&body[n - self.n_cp..]);
        samples.extend_from_slice(&body);
        Ok(OfdmWord { samples, n, n_cp: self.n_cp })
    }

    /// Forward DFT of a word body, returned as a new vector.
    pub fn demodulate(&self, body: &[Complex64]) -> Result<Vec<Complex64>> {
        if body.len() != self.n() {
            return Err(Error::invalid(format!("body has {} samples, expected {}", body.len(), self.n())));
        }
        let mut out = body.to_vec();
        self.dft.forward(&mut out);
        Ok(out)
    }

    /// Drops the prefix of a received block of `N + N_cp` samples.
    pub fn remove_cp<'a>(&self, received: &'a [Complex64]) -> Result<&'a [Complex64]> {
        if received.len() != self.n() + self.n_cp {
            return Err(Error::invalid(format!(
                "received block has {} samples, expected {}",
                received.len(),
                self.n() + self.n_cp
            )));
        }
        Ok(&received[self.n_cp..])
    }
}

pub fn modulate(segment: &GradientSegment, n_cp: usize) -> Result<OfdmWord> {
    Modem::new(segment.values.len(), n_cp)?.modulate(&segment.values)
}

pub fn demodulate(body: &[Complex64]) -> Result<Vec<Complex64>> {
    Modem::new(body.len(), 0)?.demodulate(body)
}

pub fn remove_cp(word: &OfdmWord) -> Vec<Complex64> {
    word.body().to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn pack_examples() {
        assert_eq!(pack_gradient(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![c(1.0, 3.0), c(2.0, 4.0)]);
        assert_eq!(pack_gradient(&[1.0, 2.0, 3.0]).unwrap(), vec![c(1.0, 3.0), c(2.0, 0.0)]);
        assert_eq!(pack_gradient(&[5.0]).unwrap(), vec![c(5.0, 0.0)]);
        assert!(pack_gradient(&[]).is_err());
    }

    #[test]
    fn unpack_examples() {
        assert_eq!(unpack_gradient(&[c(1.0, 3.0), c(2.0, 4.0)], 4).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(unpack_gradient(&[c(1.0, 3.0), c(2.0, 9.0)], 3).unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(unpack_gradient(&[c(1.0, 3.0)], 3).is_err());
        assert!(unpack_gradient(&[], 0).is_err());
    }

    #[test]
    fn pack_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let d = rng.random_range(1..=64);
            let g: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
            assert_eq!(unpack_gradient(&pack_gradient(&g).unwrap(), d).unwrap(), g);
        }
    }

    #[test]
    fn segmentation() {
        let x: Vec<Complex64> = (1..=5).map(|i| c(i as f64, 0.0)).collect();
        let segs = segment(&x, 4).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[1].values, vec![c(5.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(segs[1].populated, 1);
        assert_eq!(segs[1].total_words, 2);

        assert_eq!(segment(&vec![c(1.0, 0.0); 3925], 1024).unwrap().len(), 4);
        assert_eq!(words_for(7850, 1024), 4);

        let same = segment(&x, 5).unwrap();
        assert_eq!(same.len(), 1);
        assert_eq!(same[0].values, x);
        assert!(segment(&x, 0).is_err());
    }

    #[test]
    fn delta_modulates_to_constant() {
        let n = 8;
        let mut values = vec![c(0.0, 0.0); n];
        values[0] = c(n as f64, 0.0);
        let seg = GradientSegment { values, populated: 1, word_index: 0, total_words: 1 };
        let word = modulate(&seg, 0).unwrap();
        assert!(word.samples.iter().all(|v| (v - c(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn cyclic_prefix_layout() {
        // Body [g1..g4] with N_cp = 2 → [g3, g4, g1, g2, g3, g4].
        let modem = Modem::new(4, 2).unwrap();
        let body = vec![c(1.0, 0.5), c(2.0, 0.0), c(3.0, -1.0), c(4.0, 2.0)];
        let mut spectrum = body.clone();
        modem.dft().forward(&mut spectrum);
        let word = modem.modulate(&spectrum).unwrap();
        let expect = [body[2], body[3], body[0], body[1], body[2], body[3]];
        for (a, b) in word.samples.iter().zip(&expect) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(word.has_cyclic_prefix());
        assert_eq!(remove_cp(&word).len(), 4);
        for (a, b) in remove_cp(&word).iter().zip(&body) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn modulate_demodulate_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 64;
        let x: Vec<Complex64> = (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let modem = Modem::new(n, 16).unwrap();
        let word = modem.modulate(&x).unwrap();
        assert!(word.has_cyclic_prefix());
        let back = modem.demodulate(modem.remove_cp(&word.samples).unwrap()).unwrap();
        let scale = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).norm() / scale < 1e-12);
        }
    }

    #[test]
    fn remove_cp_without_prefix_is_identity() {
        let modem = Modem::new(4, 0).unwrap();
        let x = vec![c(1.0, 2.0), c(3.0, 4.0), c(5.0, 6.0), c(7.0, 8.0)];
        let word = modem.modulate(&x).unwrap();
        assert_eq!(remove_cp(&word), word.samples);
    }

    #[test]
    fn demodulate_properties() {
        let n = 32;
        let ones = vec![c(1.0, 0.0); n];
        let out = demodulate(&ones).unwrap();
        assert!((out[0] - c(n as f64, 0.0)).norm() < 1e-12);
        assert!(out[1..].iter().all(|v| v.norm() < 1e-12));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut draw = || -> Vec<Complex64> {
            (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
        };
        let (x, y) = (draw(), draw());
        let (a, b) = (c(0.3, -2.0), c(1.5, 0.25));
        let mixed: Vec<Complex64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let (fx, fy, fm) = (demodulate(&x).unwrap(), demodulate(&y).unwrap(), demodulate(&mixed).unwrap());
        for i in 0..n {
            assert!((fm[i] - (a * fx[i] + b * fy[i])).norm() < 1e-12);
        }
        let time: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let freq: f64 = fx.iter().map(|v| v.norm_sqr()).sum();
        assert!((freq - n as f64 * time).abs() / freq < 1e-9);
    }

    #[test]
    fn modem_rejects_bad_shapes() {
        assert!(Modem::new(0, 0).is_err());
        assert!(Modem::new(4, 5).is_err());
        let modem = Modem::new(4, 2).unwrap();
        assert!(modem.modulate(&[c(0.0, 0.0); 3]).is_err());
        assert!(modem.remove_cp(&[c(0.0, 0.0); 5]).is_err());
    }
}
