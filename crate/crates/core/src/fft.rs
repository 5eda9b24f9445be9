//! DFT with the conventions `X[u] = Σ x[n]·e^{−j2πnu/N}` (forward, unscaled)
//! and `x[n] = (1/N)·Σ X[u]·e^{j2πnu/N}` (inverse).
//!
//! Power-of-two sizes use an iterative radix-2 FFT; other sizes fall back to
//! the direct O(N²) sum. Both read the same twiddle table.

use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct Dft {
    n: usize,
    /// `e^{−j2πq/N}` for q in 0..N.
    twiddles: Vec<Complex64>,
    bitrev: Option<Vec<usize>>,
}

impl Dft {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "DFT size must be positive");
        let twiddles =
            (0..n).map(|q| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * q as f64 / n as f64)).collect();
        let bitrev = n.is_power_of_two().then(|| {
            let bits = n.trailing_zeros();
            (0..n).map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) }).collect()
        });
        Self { n, twiddles, bitrev }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `e^{−j2πq/N}`, with `q` taken modulo N.
    #[inline]
    pub fn twiddle(&self, q: usize) -> Complex64 {
        self.twiddles[q % self.n]
    }

    /// In-place forward DFT.
    pub fn forward(&self, x: &mut [Complex64]) {
        assert_eq!(x.len(), self.n, "DFT input length mismatch");
        match &self.bitrev {
            Some(rev) => self.radix2(x, rev),
            None => {
                let out = self.direct(x);
                x.copy_from_slice(&out);
            }
        }
    }

    /// In-place inverse DFT, including the 1/N factor.
    pub fn inverse(&self, x: &mut [Complex64]) {
        x.iter_mut().for_each(|v| *v = v.conj());
        self.forward(x);
        let scale = 1.0 / self.n as f64;
        x.iter_mut().for_each(|v| *v = v.conj() * scale);
    }

    /// Forward DFT by the direct sum, regardless of size.
    pub fn direct(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        (0..n).map(|u| x.iter().enumerate().map(|(t, &v)| v * self.twiddles[(t * u) % n]).sum()).collect()
    }

    fn radix2(&self, x: &mut [Complex64], rev: &[usize]) {
        let n = self.n;
        for i in 0..n {
            let j = rev[i];
            if i < j {
                x.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            for start in (0..n).step_by(len) {
                for j in 0..half {
                    let w = self.twiddles[j * step];
                    let a = x[start + j];
                    let b = x[start + j + half] * w;
                    x[start + j] = a + b;
                    x[start + j + half] = a - b;
                }
            }
            len <<= 1;
        }
    }
}
