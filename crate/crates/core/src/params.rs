//! System configuration and the derived window lengths.
//!
//! One OFDM symbol period spans `C + N` samples. The tag reflects only on
//! `[Q, C-K-1]`, the reader cancels over `T+1 = C-Q` samples and folds them
//! down to `R+1 = C-Q-K` samples before the DFT.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Defaults used when a field is not configured.
pub mod defaults {
    pub const CP_LEN: usize = 256;
    pub const EFFECTIVE_LEN: usize = 1024;
    pub const TAPS_ORDER: usize = 8;
    pub const ETA: f64 = 0.5;
    pub const NOISE_POWER: f64 = 1.0;
    pub const SNR_DB: f64 = 20.0;
    pub const WINDOW: usize = 8;
    pub const TRIALS: u64 = 100_000;
    pub const SEED: u64 = 1;
}

/// Underived scalar configuration, as read from a file or flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamConfig {
    pub cp_len: usize,
    pub effective_len: usize,
    pub l: usize,
    pub m: usize,
    pub k: usize,
    pub source_power: f64,
    pub noise_power: f64,
    pub eta: Complex64,
    pub window: usize,
    pub trials: u64,
    pub seed: u64,
}

impl Default for ParamConfig {
    fn default() -> Self {
        use defaults::*;
        Self {
            cp_len: CP_LEN,
            effective_len: EFFECTIVE_LEN,
            l: TAPS_ORDER,
            m: TAPS_ORDER,
            k: TAPS_ORDER,
            source_power: NOISE_POWER * 10f64.powf(SNR_DB / 10.0),
            noise_power: NOISE_POWER,
            eta: Complex64::new(ETA, 0.0),
            window: WINDOW,
            trials: TRIALS,
            seed: SEED,
        }
    }
}

/// Validated configuration together with the derived lengths `Q`, `T`, `R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// CP length `C`.
    pub cp_len: usize,
    /// Effective OFDM part `N`.
    pub effective_len: usize,
    /// Source-to-reader channel order.
    pub l: usize,
    /// Source-to-tag channel order.
    pub m: usize,
    /// Tag-to-reader channel order.
    pub k: usize,
    /// `max{L, M, K}`.
    pub q: usize,
    /// `C - Q - 1`; the cancelled block has `T + 1` samples.
    pub t: usize,
    /// `C - Q - K - 1`; the folded block has `R + 1` samples.
    pub r: usize,
    pub source_power: f64,
    pub noise_power: f64,
    pub eta: Complex64,
    /// Number of DFT bins averaged per decision.
    pub window: usize,
    pub trials: u64,
    pub seed: u64,
}

/// Validates `raw` and fills in the derived lengths.
pub fn derive_params(raw: &ParamConfig) -> Result<SystemParams> {
    let q = raw.l.max(raw.m).max(raw.k);
    let c = raw.cp_len;
    if c < q + raw.k + 1 {
        return Err(Error::invalid(
            "C",
            format!(
                "C = {c} leaves R = C - Q - K - 1 < 0 (Q = {q}, K = {})",
                raw.k
            ),
        ));
    }
    let t = c - q - 1;
    let r = c - q - raw.k - 1;
    debug_assert_eq!(t - r, raw.k);

    if raw.effective_len < c {
        return Err(Error::invalid(
            "N",
            format!("N = {} must be >= C = {c}", raw.effective_len),
        ));
    }
    if raw.window == 0 || raw.window > r + 1 {
        return Err(Error::invalid(
            "W",
            format!("W = {} must lie in [1, R+1 = {}]", raw.window, r + 1),
        ));
    }
    if !(raw.source_power.is_finite() && raw.source_power > 0.0) {
        return Err(Error::invalid(
            "Ps",
            format!("source power must be positive, got {}", raw.source_power),
        ));
    }
    if !(raw.noise_power.is_finite() && raw.noise_power > 0.0) {
        return Err(Error::invalid(
            "Nw",
            format!("noise power must be positive, got {}", raw.noise_power),
        ));
    }
    if !(raw.eta.re.is_finite() && raw.eta.im.is_finite()) {
        return Err(Error::invalid("eta", "attenuation must be finite"));
    }
    if raw.trials == 0 {
        return Err(Error::invalid("trials", "need at least one trial"));
    }

    Ok(SystemParams {
        cp_len: c,
        effective_len: raw.effective_len,
        l: raw.l,
        m: raw.m,
        k: raw.k,
        q,
        t,
        r,
        source_power: raw.source_power,
        noise_power: raw.noise_power,
        eta: raw.eta,
        window: raw.window,
        trials: raw.trials,
        seed: raw.seed,
    })
}

impl SystemParams {
    pub fn config(&self) -> ParamConfig {
        ParamConfig {
            cp_len: self.cp_len,
            effective_len: self.effective_len,
            l: self.l,
            m: self.m,
            k: self.k,
            source_power: self.source_power,
            noise_power: self.noise_power,
            eta: self.eta,
            window: self.window,
            trials: self.trials,
            seed: self.seed,
        }
    }

    /// Samples in one symbol period, `C + N`.
    pub fn frame_len(&self) -> usize {
        self.cp_len + self.effective_len
    }

    /// `10 log10(Ps / Nw)`.
    pub fn snr_db(&self) -> f64 {
        10.0 * (self.source_power / self.noise_power).log10()
    }

    /// Same parameters with `Ps` set so that `Ps / Nw` equals `snr_db`.
    pub fn with_snr_db(&self, snr_db: f64) -> Result<Self> {
        derive_params(&ParamConfig {
            source_power: self.noise_power * 10f64.powf(snr_db / 10.0),
            ..self.config()
        })
    }

    pub fn with_window(&self, window: usize) -> Result<Self> {
        derive_params(&ParamConfig {
            window,
            ..self.config()
        })
    }
}
