//! Monte Carlo BER estimation.
//!
//! Trial `i` of a run draws everything it needs (bit, source symbol, noise
//! and, when redrawing, channels) from [`rng::stream`]`(seed, i)`. Error
//! counts are summed, so results do not depend on how rayon splits the work.
//! Every sweep point reuses the same trial streams, which makes points of one
//! sweep directly comparable.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::channel::ChannelSet;
use crate::detector::{analytic_ber, compute_scales, detect, threshold, ThresholdKind};
use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::reader::{cancel_interference, fold, test_statistics, Dft};
use crate::rng::{self, CHANNEL_STREAM};
use crate::waveform::{gen_source_symbol, synth_reader_rx, tag_gate, tag_input};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelMode {
    /// One channel draw for the whole run; the analytic BER applies to it.
    FixedRealization,
    /// Fresh channels, scales and threshold every trial.
    RedrawPerTrial,
}

impl ChannelMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ChannelMode::FixedRealization => "fixed",
            ChannelMode::RedrawPerTrial => "redraw",
        }
    }
}

impl fmt::Display for ChannelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for ChannelMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "fixed" => Ok(ChannelMode::FixedRealization),
            "redraw" => Ok(ChannelMode::RedrawPerTrial),
            other => Err(format!("unknown channel mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub true_bit: u8,
    pub decided_bit: u8,
    pub gamma: f64,
    pub threshold_used: f64,
}

impl TrialOutcome {
    pub fn is_error(&self) -> bool {
        self.true_bit != self.decided_bit
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerRecord {
    pub snr_db: f64,
    pub w: usize,
    pub threshold_kind: ThresholdKind,
    pub channel_mode: ChannelMode,
    pub trials: u64,
    pub empirical_ber: f64,
    pub stderr: f64,
    /// Only meaningful for a fixed channel realization.
    pub analytic_ber: Option<f64>,
}

/// Binomial standard error of a BER estimate.
pub fn binomial_stderr(ber: f64, trials: u64) -> f64 {
    (ber * (1.0 - ber) / trials as f64).sqrt()
}

/// Error count over a number of trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ErrorTally {
    pub errors: u64,
    pub trials: u64,
}

impl ErrorTally {
    pub fn ber(&self) -> f64 {
        self.errors as f64 / self.trials as f64
    }

    pub fn stderr(&self) -> f64 {
        binomial_stderr(self.ber(), self.trials)
    }
}

/// Reader pipeline for one parameter set, with its DFT plan built once.
#[derive(Debug, Clone)]
pub struct TrialRunner {
    params: SystemParams,
    dft: Dft,
}

impl TrialRunner {
    pub fn new(params: &SystemParams) -> Self {
        Self {
            params: *params,
            dft: Dft::new(params.r + 1),
        }
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    /// Statistic of the first `W`-bin group for one transmitted symbol.
    pub fn gamma<R: Rng + ?Sized>(&self, ch: &ChannelSet, bit: u8, rng: &mut R) -> f64 {
        let p = &self.params;
        let source = gen_source_symbol(p, rng);
        let x = tag_input(&source, &ch.g);
        let gate = tag_gate(p, bit);
        let y = synth_reader_rx(&source, &x, &gate, ch, p, rng);
        let folded = fold(&cancel_interference(&y, p), p);
        let spectrum = self.dft.transform(&folded);
        test_statistics(&spectrum, p.window)[0]
    }

    pub fn run_trial<R: Rng + ?Sized>(
        &self,
        ch: &ChannelSet,
        bit: u8,
        threshold: f64,
        rng: &mut R,
    ) -> TrialOutcome {
        let gamma = self.gamma(ch, bit, rng);
        TrialOutcome {
            true_bit: bit,
            decided_bit: detect(gamma, threshold),
            gamma,
            threshold_used: threshold,
        }
    }
}

/// Runs one symbol through source, tag, channel and reader, then decides.
pub fn run_trial<R: Rng + ?Sized>(
    params: &SystemParams,
    ch: &ChannelSet,
    bit: u8,
    threshold: f64,
    rng: &mut R,
) -> Result<TrialOutcome> {
    if !ch.matches(params) {
        return Err(Error::invalid("channels", "tap counts do not match L, M, K"));
    }
    if bit > 1 {
        return Err(Error::invalid("bit", format!("tag bit must be 0 or 1, got {bit}")));
    }
    Ok(TrialRunner::new(params).run_trial(ch, bit, threshold, rng))
}

/// How each trial obtains the threshold it compares against.
enum ThresholdSource {
    Rule(ThresholdKind),
    Fixed(f64),
}

fn fixed_channels(params: &SystemParams) -> ChannelSet {
    ChannelSet::draw(params, &mut rng::stream(params.seed, CHANNEL_STREAM))
}

fn count_errors(
    params: &SystemParams,
    rule: &ThresholdSource,
    mode: ChannelMode,
) -> Result<ErrorTally> {
    let runner = TrialRunner::new(params);
    let fixed = match mode {
        ChannelMode::FixedRealization => {
            let ch = fixed_channels(params);
            let t = match rule {
                ThresholdSource::Rule(kind) => {
                    threshold(*kind, &compute_scales(params, &ch), params.window)?
                }
                ThresholdSource::Fixed(t) => *t,
            };
            Some((ch, t))
        }
        ChannelMode::RedrawPerTrial => None,
    };

    let errors = (0..params.trials)
        .into_par_iter()
        .map(|i| -> Result<u64> {
            let mut rng = rng::stream(params.seed, i);
            let bit = u8::from(rng.random::<bool>());
            let outcome = match &fixed {
                Some((ch, t)) => runner.run_trial(ch, bit, *t, &mut rng),
                None => {
                    let ch = ChannelSet::draw(params, &mut rng);
                    let t = match rule {
                        ThresholdSource::Rule(kind) => {
                            threshold(*kind, &compute_scales(params, &ch), params.window)?
                        }
                        ThresholdSource::Fixed(t) => *t,
                    };
                    runner.run_trial(&ch, bit, t, &mut rng)
                }
            };
            Ok(u64::from(outcome.is_error()))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;

    Ok(ErrorTally {
        errors,
        trials: params.trials,
    })
}

/// BER at `snr_db` (which overrides `params.source_power`).
pub fn estimate_ber(
    params: &SystemParams,
    kind: ThresholdKind,
    mode: ChannelMode,
    snr_db: f64,
) -> Result<BerRecord> {
    let params = params.with_snr_db(snr_db)?;
    let tally = count_errors(&params, &ThresholdSource::Rule(kind), mode)?;
    let analytic = match mode {
        ChannelMode::FixedRealization => {
            let scales = compute_scales(&params, &fixed_channels(&params));
            let t = threshold(kind, &scales, params.window)?;
            Some(analytic_ber(t, &scales, params.window))
        }
        ChannelMode::RedrawPerTrial => None,
    };
    Ok(BerRecord {
        snr_db,
        w: params.window,
        threshold_kind: kind,
        channel_mode: mode,
        trials: tally.trials,
        empirical_ber: tally.ber(),
        stderr: tally.stderr(),
        analytic_ber: analytic,
    })
}

/// Error count with an externally chosen threshold instead of a derived one.
pub fn estimate_ber_at_threshold(
    params: &SystemParams,
    threshold: f64,
    mode: ChannelMode,
    snr_db: f64,
) -> Result<ErrorTally> {
    let params = params.with_snr_db(snr_db)?;
    count_errors(&params, &ThresholdSource::Fixed(threshold), mode)
}

/// The swept parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    SnrDb(Vec<f64>),
    Window(Vec<usize>),
}

impl SweepAxis {
    pub fn len(&self) -> usize {
        match self {
            SweepAxis::SnrDb(v) => v.len(),
            SweepAxis::Window(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One record per axis point and threshold kind, axis-major. SNR sweeps use
/// `params.window`; window sweeps use the SNR implied by `params`.
pub fn sweep(
    params: &SystemParams,
    axis: &SweepAxis,
    kinds: &[ThresholdKind],
    mode: ChannelMode,
) -> Result<Vec<BerRecord>> {
    if axis.is_empty() || kinds.is_empty() {
        return Err(Error::EmptyAxis);
    }
    let points: Vec<(f64, SystemParams)> = match axis {
        SweepAxis::SnrDb(snrs) => snrs.iter().map(|&s| (s, *params)).collect(),
        SweepAxis::Window(ws) => ws
            .iter()
            .map(|&w| Ok((params.snr_db(), params.with_window(w)?)))
            .collect::<Result<_>>()?,
    };
    let mut records = Vec::with_capacity(points.len() * kinds.len());
    for (snr, p) in &points {
        for &kind in kinds {
            records.push(estimate_ber(p, kind, mode, *snr)?);
        }
    }
    Ok(records)
}
