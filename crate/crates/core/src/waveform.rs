//! Source symbol, tag gating and the reader's received samples.
//!
//! Sample indices are local to one symbol period: `[0, C)` is the cyclic
//! prefix and `[C, C+N)` the effective part. Everything before index 0 is
//! zero; the detection windows start at `Q`, past every channel's memory.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::ChannelSet;
use crate::params::SystemParams;
use crate::rng::{complex_gaussian, complex_gaussian_vec};

/// Where in the chain a frame was observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameOrigin {
    /// `s(n)`, emitted by the RF source.
    Source,
    /// `x(n)`, arriving at the tag antenna.
    TagInput,
    /// `y(n)`, received by the reader.
    ReaderRx,
}

/// One symbol period of complex baseband samples, `C + N` long.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub samples: Vec<Complex64>,
    pub origin: FrameOrigin,
}

impl SymbolFrame {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// The tag's reflection switch over one symbol period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateSequence {
    pub gate: Vec<u8>,
    pub bit: u8,
}

impl GateSequence {
    pub fn ones(&self) -> usize {
        self.gate.iter().filter(|&&g| g == 1).count()
    }
}

/// Draws one OFDM symbol: the effective part is i.i.d. CN(0, Ps) and the
/// first `C` samples copy the last `C`.
///
/// The stream consumption does not depend on `Ps`, so the same stream at two
/// SNRs yields scaled copies of one waveform.
pub fn gen_source_symbol<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> SymbolFrame {
    let (c, n) = (params.cp_len, params.effective_len);
    let body = complex_gaussian_vec(rng, n, params.source_power);
    let mut samples = Vec::with_capacity(c + n);
    samples.extend_from_slice(&body[n - c..]);
    samples.extend_from_slice(&body);
    SymbolFrame {
        samples,
        origin: FrameOrigin::Source,
    }
}

/// Gate for one tag bit: `bit` on `[Q, C-K-1]`, zero elsewhere.
pub fn tag_gate(params: &SystemParams, bit: u8) -> GateSequence {
    assert!(bit <= 1, "tag bit must be 0 or 1, got {bit}");
    let mut gate = vec![0u8; params.frame_len()];
    gate[params.q..params.cp_len - params.k].fill(bit);
    GateSequence { gate, bit }
}

/// `out(n) = sum_k taps[k] * input(n - k)`, zero pre-history, same length as
/// `input`. Terms are always accumulated in tap order so equal input windows
/// produce bit-identical outputs.
pub fn causal_filter(taps: &[Complex64], input: &[Complex64]) -> Vec<Complex64> {
    (0..input.len())
        .map(|n| {
            let start = (n + 1).saturating_sub(taps.len());
            taps.iter()
                .zip(input[start..=n].iter().rev())
                .fold(Complex64::new(0.0, 0.0), |acc, (&tap, &x)| acc + tap * x)
        })
        .collect()
}

/// `x(n) = sum_m g_m s(n - m)`.
pub fn tag_input(source: &SymbolFrame, g: &[Complex64]) -> SymbolFrame {
    debug_assert_eq!(source.origin, FrameOrigin::Source);
    SymbolFrame {
        samples: causal_filter(g, &source.samples),
        origin: FrameOrigin::TagInput,
    }
}

/// Noise-free reader signal: direct path plus the gated backscatter path.
pub fn synth_reader_rx_noiseless(
    source: &SymbolFrame,
    x: &SymbolFrame,
    gate: &GateSequence,
    ch: &ChannelSet,
    params: &SystemParams,
) -> SymbolFrame {
    debug_assert_eq!(source.len(), params.frame_len());
    debug_assert_eq!(x.len(), source.len());
    debug_assert_eq!(gate.gate.len(), source.len());

    let mut samples = causal_filter(&ch.h, &source.samples);

    // The reflected signal vanishes outside the gate, so its filtered copy
    // is confined to [first, last + K].
    let first = gate.gate.iter().position(|&b| b == 1);
    let last = gate.gate.iter().rposition(|&b| b == 1);
    if let (Some(first), Some(last)) = (first, last) {
        let end = (last + ch.f.len() - 1).min(samples.len() - 1);
        let reflected: Vec<Complex64> = x.samples[first..=end]
            .iter()
            .zip(&gate.gate[first..=end])
            .map(|(&xn, &b)| xn * f64::from(b))
            .collect();
        for (y, b) in samples[first..=end]
            .iter_mut()
            .zip(causal_filter(&ch.f, &reflected))
        {
            *y += params.eta * b;
        }
    }
    SymbolFrame {
        samples,
        origin: FrameOrigin::ReaderRx,
    }
}

/// Adds i.i.d. CN(0, Nw) samples to every entry.
pub fn add_noise<R: Rng + ?Sized>(frame: &mut SymbolFrame, noise_power: f64, rng: &mut R) {
    for y in &mut frame.samples {
        *y += complex_gaussian(rng, noise_power);
    }
}

/// `y(n) = sum_l h_l s(n-l) + eta sum_k f_k B(n-k) x(n-k) + w(n)`.
pub fn synth_reader_rx<R: Rng + ?Sized>(
    source: &SymbolFrame,
    x: &SymbolFrame,
    gate: &GateSequence,
    ch: &ChannelSet,
    params: &SystemParams,
    rng: &mut R,
) -> SymbolFrame {
    let mut y = synth_reader_rx_noiseless(source, x, gate, ch, params);
    add_noise(&mut y, params.noise_power, rng);
    y
}

/// What a legacy OFDM receiver keeps after stripping the CP.
pub fn legacy_window(y: &SymbolFrame, params: &SystemParams) -> Vec<Complex64> {
    debug_assert_eq!(y.origin, FrameOrigin::ReaderRx);
    y.samples[params.cp_len..params.frame_len()].to_vec()
}
