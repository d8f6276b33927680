//! Reader-side processing: cancel the direct path, fold the linear
//! convolution onto a circular one, transform, and form the energy statistic.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::params::SystemParams;
use crate::waveform::{FrameOrigin, SymbolFrame};

/// `z(n) = y(n+Q) - y(n+N+Q)`, `n = 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct CancelledBlock {
    pub z: Vec<Complex64>,
}

/// The cancelled block with its `K`-sample tail added onto its head.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldedBlock {
    pub zvec: Vec<Complex64>,
}

/// Unnormalized DFT of a folded block.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBlock {
    pub ztilde: Vec<Complex64>,
}

/// Subtracts the Phase-4 samples from the Phase-2 samples. The direct path
/// is identical in both windows because of the cyclic prefix.
pub fn cancel_interference(y: &SymbolFrame, params: &SystemParams) -> CancelledBlock {
    debug_assert_eq!(y.origin, FrameOrigin::ReaderRx);
    debug_assert_eq!(y.len(), params.frame_len());
    let (q, n) = (params.q, params.effective_len);
    let z = (0..=params.t)
        .map(|i| y.samples[i + q] - y.samples[i + n + q])
        .collect();
    CancelledBlock { z }
}

/// Folds `T+1` samples down to `R+1`: entries `0..K` pick up `z(R+1+i)`,
/// entries `K..=R` pass through. When `K > R+1` the tail wraps more than
/// once; every sample lands on index `n mod (R+1)`.
pub fn fold(zb: &CancelledBlock, params: &SystemParams) -> FoldedBlock {
    let len = params.r + 1;
    assert_eq!(zb.z.len(), params.t + 1, "cancelled block must be T+1 long");
    let mut zvec = zb.z[..len].to_vec();
    for (n, tail) in zb.z.iter().enumerate().skip(len) {
        zvec[n % len] += tail;
    }
    FoldedBlock { zvec }
}

/// Planned forward transform `v~_p = sum_q exp(-j 2 pi p q / n) v_q` of a
/// fixed length. Any length works, primes included. Immutable once built.
#[derive(Clone)]
pub struct Dft {
    plan: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Dft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dft").field("len", &self.len()).finish()
    }
}

impl Dft {
    pub fn new(len: usize) -> Self {
        Self {
            plan: FftPlanner::new().plan_fft_forward(len),
        }
    }

    pub fn len(&self) -> usize {
        self.plan.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.len(), "DFT input length mismatch");
        let mut out = v.to_vec();
        self.plan.process(&mut out);
        out
    }

    pub fn transform(&self, block: &FoldedBlock) -> SpectralBlock {
        SpectralBlock {
            ztilde: self.forward(&block.zvec),
        }
    }
}

/// One-shot unnormalized forward DFT.
pub fn dft(v: &[Complex64]) -> Vec<Complex64> {
    Dft::new(v.len()).forward(v)
}

/// `Gamma_t`: mean of `|z~|^2` over consecutive, non-overlapping groups of
/// `window` bins starting at bin 0. Leftover bins are dropped.
pub fn test_statistics(ztilde: &SpectralBlock, window: usize) -> Vec<f64> {
    assert!(
        window >= 1 && window <= ztilde.ztilde.len(),
        "window {window} out of range"
    );
    ztilde
        .ztilde
        .chunks_exact(window)
        .map(|group| group.iter().map(|z| z.norm_sqr()).sum::<f64>() / window as f64)
        .collect()
}

/// First column of the circulant channel matrix: `[f_0, .., f_K, 0, ..]`.
/// Taps beyond `len` wrap around.
pub fn circulant_first_column(f: &[Complex64], len: usize) -> Vec<Complex64> {
    let mut col = vec![Complex64::new(0.0, 0.0); len];
    for (k, &fk) in f.iter().enumerate() {
        col[k % len] += fk;
    }
    col
}

/// First row of the same matrix: `[f_0, 0, .., 0, f_K, .., f_1]`.
pub fn circulant_first_row(f: &[Complex64], len: usize) -> Vec<Complex64> {
    let mut row = vec![Complex64::new(0.0, 0.0); len];
    for (k, &fk) in f.iter().enumerate() {
        row[(len - k % len) % len] += fk;
    }
    row
}

/// Dense circulant matrix with the given first column, row-major.
pub fn circulant_matrix(first_column: &[Complex64]) -> Vec<Vec<Complex64>> {
    let n = first_column.len();
    (0..n)
        .map(|p| (0..n).map(|q| first_column[(p + n - q) % n]).collect())
        .collect()
}

/// Per-bin variances of the folded noise sum to `4 Nw K + 2 Nw (R+1-K)`.
pub fn folded_noise_power(params: &SystemParams) -> f64 {
    let nw = params.noise_power;
    let (k, r) = (params.k as f64, params.r as f64);
    4.0 * nw * k + 2.0 * nw * (r + 1.0 - k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channels, ChannelSet};
    use crate::params::{derive_params, ParamConfig};
    use crate::rng::{complex_gaussian_vec, stream};
    use crate::waveform::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn params() -> SystemParams {
        derive_params(&ParamConfig::default()).unwrap()
    }

    fn noiseless_rx(p: &SystemParams, bit: u8, seed: u64) -> (SymbolFrame, SymbolFrame, ChannelSet) {
        let mut rng = stream(seed, 0);
        let s = gen_source_symbol(p, &mut rng);
        let ch = draw_channels(p, &mut rng);
        let x = tag_input(&s, &ch.g);
        let y = synth_reader_rx_noiseless(&s, &x, &tag_gate(p, bit), &ch, p);
        (x, y, ch)
    }

    fn direct_dft(v: &[Complex64]) -> Vec<Complex64> {
        let n = v.len();
        (0..n)
            .map(|p| {
                v.iter()
                    .enumerate()
                    .map(|(q, &x)| {
                        let ang = -2.0 * std::f64::consts::PI * ((p * q) % n) as f64 / n as f64;
                        x * Complex64::from_polar(1.0, ang)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn cancellation_nulls_direct_path() {
        let p = params();
        for seed in 0..10 {
            let (_, y, _) = noiseless_rx(&p, 0, seed);
            let z = cancel_interference(&y, &p);
            assert_eq!(z.z.len(), p.t + 1);
            assert_eq!(z.z.len(), p.cp_len - p.q);
            assert!(z.z.iter().all(|v| *v == c(0.0, 0.0)));
        }
    }

    #[test]
    fn cancellation_leaves_backscatter() {
        let p = params();
        let (x, y, ch) = noiseless_rx(&p, 1, 3);
        let z = cancel_interference(&y, &p);
        for n in 0..=p.t {
            let abs = n + p.q;
            let expect: Complex64 = ch
                .f
                .iter()
                .enumerate()
                .filter(|&(k, _)| abs >= k && (p.q..p.cp_len - p.k).contains(&(abs - k)))
                .map(|(k, fk)| p.eta * fk * x.samples[abs - k])
                .sum();
            assert!((z.z[n] - expect).norm() <= 1e-9 * expect.norm().max(1.0), "n = {n}");
        }
    }

    #[test]
    fn fold_with_no_tail_is_identity() {
        let p = derive_params(&ParamConfig {
            k: 0,
            ..ParamConfig::default()
        })
        .unwrap();
        assert_eq!(p.t, p.r);
        let z = complex_gaussian_vec(&mut stream(1, 0), p.t + 1, 1.0);
        let folded = fold(&CancelledBlock { z: z.clone() }, &p);
        assert_eq!(folded.zvec, z);
    }

    #[test]
    fn fold_adds_tail_onto_head() {
        let p = params();
        let z: Vec<Complex64> = (0..=p.t).map(|i| c(i as f64, 0.0)).collect();
        let f = fold(&CancelledBlock { z }, &p);
        assert_eq!(f.zvec.len(), p.r + 1);
        for i in 0..p.k {
            assert_eq!(f.zvec[i], c((i + i + p.r + 1) as f64, 0.0));
        }
        for i in p.k..=p.r {
            assert_eq!(f.zvec[i], c(i as f64, 0.0));
        }
    }

    #[test]
    fn dft_of_impulse_and_constant() {
        for n in [1usize, 7, 240, 241] {
            let mut delta = vec![c(0.0, 0.0); n];
            delta[0] = c(1.0, 0.0);
            for v in dft(&delta) {
                assert!((v - c(1.0, 0.0)).norm() < 1e-12);
            }
            let ones = vec![c(1.0, 0.0); n];
            let out = dft(&ones);
            assert!((out[0] - c(n as f64, 0.0)).norm() < 1e-9);
            assert!(out[1..].iter().all(|v| v.norm() < 1e-9));
        }
    }

    #[test]
    fn dft_matches_direct_sum() {
        for n in [5usize, 16, 239, 240] {
            let v = complex_gaussian_vec(&mut stream(n as u64, 0), n, 1.0);
            let fast = dft(&v);
            let slow = direct_dft(&v);
            let err: f64 = fast.iter().zip(&slow).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            let norm: f64 = slow.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            assert!(err <= 1e-10 * norm, "n = {n}: {err}");
        }
    }

    #[test]
    fn parseval() {
        for n in [13usize, 240] {
            let v = complex_gaussian_vec(&mut stream(99, n as u64), n, 2.0);
            let e_time: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            let e_freq: f64 = dft(&v).iter().map(|z| z.norm_sqr()).sum();
            assert!((e_freq - n as f64 * e_time).abs() <= 1e-9 * e_freq);
        }
    }

    #[test]
    fn statistics_grouping() {
        let zeros = SpectralBlock { ztilde: vec![c(0.0, 0.0); 240] };
        assert_eq!(test_statistics(&zeros, 8), vec![0.0; 30]);

        let constant = SpectralBlock {
            ztilde: (0..240).map(|i| Complex64::from_polar(3.0, i as f64)).collect(),
        };
        for g in test_statistics(&constant, 7) {
            assert!((g - 9.0).abs() < 1e-12);
        }
        assert_eq!(test_statistics(&constant, 7).len(), 240 / 7);

        let v = complex_gaussian_vec(&mut stream(4, 4), 240, 5.0);
        let block = SpectralBlock { ztilde: v.clone() };
        let got = test_statistics(&block, 16);
        for (t, g) in got.iter().enumerate() {
            let mut acc = 0.0;
            for z in &v[t * 16..(t + 1) * 16] {
                acc += z.re * z.re + z.im * z.im;
            }
            let expect = acc / 16.0;
            assert!((g - expect).abs() <= 1e-12 * expect);
        }
    }

    #[test]
    fn fold_wraps_long_tails() {
        // K longer than the folded block
        let p = derive_params(&ParamConfig {
            cp_len: 13,
            effective_len: 13,
            l: 6,
            m: 0,
            k: 6,
            window: 1,
            ..ParamConfig::default()
        })
        .unwrap();
        assert_eq!((p.t, p.r), (6, 0));
        let z: Vec<Complex64> = (0..=p.t).map(|i| c(1.0 + i as f64, 0.0)).collect();
        let f = fold(&CancelledBlock { z }, &p);
        assert_eq!(f.zvec, vec![c(28.0, 0.0)]);

        let p = derive_params(&ParamConfig {
            cp_len: 16,
            effective_len: 16,
            l: 6,
            m: 0,
            k: 6,
            window: 1,
            ..ParamConfig::default()
        })
        .unwrap();
        assert_eq!((p.t, p.r), (9, 3));
        let z: Vec<Complex64> = (0..=p.t).map(|i| c(i as f64, 0.0)).collect();
        let f = fold(&CancelledBlock { z }, &p);
        // index n lands on n mod 4
        assert_eq!(f.zvec, vec![c(0.0 + 4.0 + 8.0, 0.0), c(1.0 + 5.0 + 9.0, 0.0), c(2.0 + 6.0, 0.0), c(3.0 + 7.0, 0.0)]);
    }

    #[test]
    fn row_and_column_generators() {
        let f = vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)];
        assert_eq!(circulant_first_column(&f, 5), vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(circulant_first_row(&f, 5), vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(3.0, 0.0), c(2.0, 0.0)]);
        let m = circulant_matrix(&circulant_first_column(&f, 5));
        assert_eq!(m[0], circulant_first_row(&f, 5));
        assert_eq!(m.iter().map(|row| row[0]).collect::<Vec<_>>(), circulant_first_column(&f, 5));
    }

    #[test]
    fn noise_power_identity() {
        let p = params();
        assert_eq!(folded_noise_power(&p), 2.0 * (p.t + 1) as f64 * p.noise_power);
        assert_eq!(folded_noise_power(&p), 496.0);
    }

    #[test]
    fn dft_is_shareable() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<Dft>();
    }
}
