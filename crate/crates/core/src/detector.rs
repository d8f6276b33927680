//! Energy detection of the tag bit.
//!
//! Under the CLT model the statistic is `N(V, V^2/W)` for bit 0 and
//! `N(U+V, (U+V)^2/W)` for bit 1. Two thresholds are offered: the ML
//! threshold where the two densities cross, and the equiprobable threshold
//! where both conditional error probabilities agree.

use std::fmt;
use std::str::FromStr;

use statrs::function::erf::erfc;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::params::SystemParams;

/// Coefficients of the exponential Q-function approximation
/// `Q(x) ~ exp(-b x - a x^2) / 2`.
pub const Q_APPROX_A: f64 = 0.416;
pub const Q_APPROX_B: f64 = 0.717;

/// `max |qfunc_approx(x) - qfunc(x)|` over `x` in `[0, 5]` on a `1e-3` grid
/// (attained near `x = 0.393`), rounded up in the 4th digit.
pub const Q_APPROX_MAX_ERROR: f64 = 6.586e-3;

/// Means of the statistic: `V` under bit 0, `U + V` under bit 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionScales {
    /// Energy lift contributed by the backscatter path.
    pub u: f64,
    /// Noise floor.
    pub v: f64,
}

impl DetectionScales {
    pub fn new(u: f64, v: f64) -> Self {
        debug_assert!(v > 0.0 && u >= 0.0);
        Self { u, v }
    }

    fn nondegenerate(&self) -> Result<()> {
        if self.u > 0.0 && self.u.is_finite() {
            Ok(())
        } else {
            Err(Error::DegenerateScales { u: self.u })
        }
    }
}

/// Per-sample variance of `x(n)` times `R + 1`: `(R+1) Ps sum|g|^2`.
pub fn tag_signal_power(params: &SystemParams, ch: &ChannelSet) -> f64 {
    (params.r + 1) as f64 * params.source_power * energy(&ch.g)
}

/// `2 (T+1) Nw`.
pub fn noise_bin_power(params: &SystemParams) -> f64 {
    2.0 * (params.t + 1) as f64 * params.noise_power
}

fn energy(taps: &[num_complex::Complex64]) -> f64 {
    taps.iter().map(|t| t.norm_sqr()).sum()
}

/// `U = |eta|^2 Px Pf`, `V = Pw`.
pub fn compute_scales(params: &SystemParams, ch: &ChannelSet) -> DetectionScales {
    let u = params.eta.norm_sqr() * tag_signal_power(params, ch) * energy(&ch.f);
    DetectionScales::new(u, noise_bin_power(params))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ThresholdKind {
    Optimal,
    Equiprobable,
}

impl ThresholdKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ThresholdKind::Optimal => "optimal",
            ThresholdKind::Equiprobable => "equiprobable",
        }
    }
}

impl fmt::Display for ThresholdKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for ThresholdKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "optimal" => Ok(ThresholdKind::Optimal),
            "equiprobable" => Ok(ThresholdKind::Equiprobable),
            other => Err(format!("unknown threshold kind '{other}'")),
        }
    }
}

/// Gaussian tail probability, `Q(x) = erfc(x / sqrt 2) / 2`.
pub fn qfunc(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// One-sided approximation `exp(-b x - a x^2) / 2`, valid for `x >= 0`.
pub fn qfunc_approx(x: f64) -> Result<f64> {
    if x < 0.0 || x.is_nan() {
        return Err(Error::Domain(x));
    }
    Ok(0.5 * (-Q_APPROX_B * x - Q_APPROX_A * x * x).exp())
}

/// Standardized distances of `threshold` from the two hypothesis means:
/// `((T-V)/sigma0, (U+V-T)/sigma1)`.
fn standardized(threshold: f64, scales: &DetectionScales, window: usize) -> (f64, f64) {
    let sqrt_w = (window as f64).sqrt();
    let DetectionScales { u, v } = *scales;
    (
        (threshold - v) * sqrt_w / v,
        (u + v - threshold) * sqrt_w / (u + v),
    )
}

/// `(p0, p1)`: false alarm `Pr(decide 1 | bit 0)` and miss
/// `Pr(decide 0 | bit 1)` under the Gaussian model.
pub fn error_probabilities(threshold: f64, scales: &DetectionScales, window: usize) -> (f64, f64) {
    let (x0, x1) = standardized(threshold, scales, window);
    (qfunc(x0), qfunc(x1))
}

/// [`error_probabilities`] evaluated with [`qfunc_approx`]. Needs
/// `V <= threshold <= U + V`.
pub fn error_probabilities_approx(
    threshold: f64,
    scales: &DetectionScales,
    window: usize,
) -> Result<(f64, f64)> {
    let (x0, x1) = standardized(threshold, scales, window);
    Ok((qfunc_approx(x0)?, qfunc_approx(x1)?))
}

/// Bit error rate with equiprobable bits: `(p0 + p1) / 2`.
pub fn analytic_ber(threshold: f64, scales: &DetectionScales, window: usize) -> f64 {
    let (p0, p1) = error_probabilities(threshold, scales, window);
    (0.5 * (p0 + p1)).clamp(0.0, 1.0)
}

/// Strict comparison; a tie decides 0.
pub fn detect(gamma: f64, threshold: f64) -> u8 {
    u8::from(gamma > threshold)
}

/// `(T-V)^2/V^2 - (T-U-V)^2/(U+V)^2 - (2/W) ln((U+V)/V)`.
///
/// This is `2/W` times the log-likelihood ratio `ln p1(T) - ln p0(T)` of the
/// two Gaussian densities, so its zero is where they cross.
pub fn pdf_equality_residual(threshold: f64, scales: &DetectionScales, window: usize) -> f64 {
    let DetectionScales { u, v } = *scales;
    let a = (threshold - v) / v;
    let b = (threshold - u - v) / (u + v);
    a * a - b * b - 2.0 / window as f64 * (u / v).ln_1p()
}

/// Log densities of the two hypotheses at `threshold`.
pub fn log_pdfs(threshold: f64, scales: &DetectionScales, window: usize) -> (f64, f64) {
    let w = window as f64;
    let DetectionScales { u, v } = *scales;
    let log_norm = |mean: f64, t: f64| {
        let sd = mean / w.sqrt();
        let z = (t - mean) / sd;
        -0.5 * z * z - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
    };
    (log_norm(v, threshold), log_norm(u + v, threshold))
}

/// ML threshold together with the bookkeeping around it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalThreshold {
    /// Positive root of the density-crossing quadratic.
    pub threshold: f64,
    /// Same crossing located by bisection on the log-likelihood ratio.
    pub bisection: f64,
    /// The closed form with `V^2 (U+V)^2` missing from the second radicand
    /// term, as it is commonly printed.
    pub printed_form: f64,
    /// `printed_form - threshold`.
    pub printed_discrepancy: f64,
}

/// Where `N(V, V^2/W)` and `N(U+V, (U+V)^2/W)` have equal density.
///
/// Clearing denominators gives
/// `(U+2V) T^2 - 2V(U+V) T - V^2 (U+V)^2 ln(1+U/V) (2/W) / U = 0`, whose
/// positive root is returned. It always exceeds `V`; it stays below `U + V`
/// exactly when `(U/V)^2 > (2/W) ln(1 + U/V)`.
pub fn optimal_threshold(scales: &DetectionScales, window: usize) -> Result<f64> {
    scales.nondegenerate()?;
    let DetectionScales { u, v } = *scales;
    let w = window as f64;
    let log_ratio = (u / v).ln_1p();
    let radicand = 1.0 + (2.0 + 4.0 * v / u) * log_ratio / w;
    Ok(v * (u + v) * (1.0 + radicand.sqrt()) / (u + 2.0 * v))
}

pub fn optimal_threshold_report(scales: &DetectionScales, window: usize) -> Result<OptimalThreshold> {
    let threshold = optimal_threshold(scales, window)?;
    let DetectionScales { u, v } = *scales;
    let w = window as f64;

    // the residual is negative at V and grows without bound above U + V
    let mut hi = u + v;
    while pdf_equality_residual(hi, scales, window) <= 0.0 {
        hi *= 2.0;
    }
    let bisection = bisect(v, hi, |t| pdf_equality_residual(t, scales, window));

    let printed_form = (v * (u + v)
        + (v * v * (u + v) * (u + v) + (2.0 + 4.0 * v / u) * (u / v).ln_1p() / w).sqrt())
        / (u + 2.0 * v);

    Ok(OptimalThreshold {
        threshold,
        bisection,
        printed_form,
        printed_discrepancy: printed_form - threshold,
    })
}

/// Equiprobable-error threshold and its cross-checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquiprobableThreshold {
    /// Positive root of `c0 T^2 + c1 T + c2 = 0`.
    pub threshold: f64,
    /// `[c0, c1, c2]`.
    pub coefficients: [f64; 3],
    /// Root of `p0(T) = p1(T)` found by bisection with the exact Q-function.
    pub reference: f64,
}

/// Quadratic coefficients obtained by substituting the Q-function
/// approximation into `p0 = p1`.
pub fn equiprobable_coefficients(scales: &DetectionScales, window: usize) -> [f64; 3] {
    let DetectionScales { u, v } = *scales;
    let (a, b) = (Q_APPROX_A, Q_APPROX_B);
    let sqrt_w = (window as f64).sqrt();
    [
        a * sqrt_w * (u * u + 2.0 * u * v) / (v * (u + v)),
        b * (u + 2.0 * v) - 2.0 * a * sqrt_w * u,
        -2.0 * b * v * (u + v),
    ]
}

pub fn equiprobable_threshold(scales: &DetectionScales, window: usize) -> Result<f64> {
    scales.nondegenerate()?;
    let [c0, c1, c2] = equiprobable_coefficients(scales, window);
    let discriminant = c1 * c1 - 4.0 * c0 * c2;
    if discriminant.is_nan() || discriminant < 0.0 {
        return Err(Error::NoRealRoot { discriminant });
    }
    let root = discriminant.sqrt();
    // c0 > 0 > c2, so the roots have opposite signs; pick the cancellation-free
    // expression for the positive one.
    Ok(if c1 <= 0.0 {
        (-c1 + root) / (2.0 * c0)
    } else {
        2.0 * c2 / (-c1 - root)
    })
}

pub fn equiprobable_threshold_report(
    scales: &DetectionScales,
    window: usize,
) -> Result<EquiprobableThreshold> {
    let threshold = equiprobable_threshold(scales, window)?;
    let DetectionScales { u, v } = *scales;
    // p0 - p1 is decreasing: +ve at V, -ve at U + V
    let reference = bisect(v, u + v, |t| {
        let (p0, p1) = error_probabilities(t, scales, window);
        p1 - p0
    });
    Ok(EquiprobableThreshold {
        threshold,
        coefficients: equiprobable_coefficients(scales, window),
        reference,
    })
}

pub fn threshold(kind: ThresholdKind, scales: &DetectionScales, window: usize) -> Result<f64> {
    match kind {
        ThresholdKind::Optimal => optimal_threshold(scales, window),
        ThresholdKind::Equiprobable => equiprobable_threshold(scales, window),
    }
}

/// Root of an increasing `f` on `[lo, hi]`, refined until the bracket stops
/// shrinking.
fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{derive_params, ParamConfig};
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn unit() -> Vec<Complex64> {
        vec![Complex64::new(1.0, 0.0)]
    }

    /// Composite Simpson of the standard normal density on `[0, x]`.
    fn q_by_quadrature(x: f64) -> f64 {
        let n = 20_000;
        let h = x / n as f64;
        let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut acc = phi(0.0) + phi(x);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * phi(i as f64 * h);
        }
        0.5 - acc * h / 3.0
    }

    #[test]
    fn scales_for_defaults() {
        let p = derive_params(&ParamConfig::default()).unwrap();
        let ch = ChannelSet { h: unit(), g: unit(), f: unit() };
        assert_eq!(compute_scales(&p, &ch).v, 496.0);

        let p = derive_params(&ParamConfig {
            source_power: 4.0,
            ..ParamConfig::default()
        })
        .unwrap();
        assert_eq!(p.r, 239);
        let s = compute_scales(&p, &ch);
        assert!((s.u - 240.0).abs() < 1e-9);

        let p0 = derive_params(&ParamConfig {
            eta: Complex64::new(0.0, 0.0),
            ..ParamConfig::default()
        })
        .unwrap();
        assert_eq!(compute_scales(&p0, &ch).u, 0.0);
    }

    #[test]
    fn complex_eta_uses_magnitude() {
        let p = derive_params(&ParamConfig {
            source_power: 1.0,
            eta: Complex64::new(0.3, 0.4),
            ..ParamConfig::default()
        })
        .unwrap();
        let ch = ChannelSet { h: unit(), g: unit(), f: unit() };
        assert!((compute_scales(&p, &ch).u - 240.0 * 0.25).abs() < 1e-12);
    }

    #[test]
    fn qfunc_values() {
        assert_eq!(qfunc(0.0), 0.5);
        for x in [0.1, 0.7, 1.5, 3.0, 6.0] {
            assert!((qfunc(x) + qfunc(-x) - 1.0).abs() < 1e-15);
        }
        let oracle = q_by_quadrature(1.2816);
        assert!((oracle - 0.1).abs() < 1e-4);
        assert!((qfunc(1.2816) - oracle).abs() < 1e-10);
        for x in [0.5, 2.0, 4.0] {
            assert!((qfunc(x) - q_by_quadrature(x)).abs() < 1e-10);
        }
    }

    #[test]
    fn qfunc_monotone() {
        let mut prev = 1.0;
        for i in -600..=600 {
            let q = qfunc(i as f64 / 100.0);
            assert!(q <= prev);
            prev = q;
        }
    }

    #[test]
    fn approx_values() {
        assert_eq!(qfunc_approx(0.0).unwrap(), 0.5);
        // exp(-1.133) / 2
        assert!((qfunc_approx(1.0).unwrap() - 0.161_032_8).abs() < 1e-6);
        assert!(matches!(qfunc_approx(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn approx_error_bound_is_frozen() {
        let worst = (0..=5000)
            .map(|i| {
                let x = i as f64 * 1e-3;
                (qfunc_approx(x).unwrap() - qfunc(x)).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst <= Q_APPROX_MAX_ERROR, "{worst}");
        assert!(worst > 6.585e-3, "{worst}");
    }

    #[test]
    fn optimal_threshold_reference_case() {
        let s = DetectionScales::new(496.0, 496.0);
        let rep = optimal_threshold_report(&s, 8).unwrap();
        assert!(rep.threshold > 496.0 && rep.threshold < 992.0);
        assert!((rep.threshold - rep.bisection).abs() <= 1e-9 * rep.threshold);
        assert!(pdf_equality_residual(rep.threshold, &s, 8).abs() <= 1e-9);
        let (l0, l1) = log_pdfs(rep.threshold, &s, 8);
        assert!((l0 - l1).abs() <= 1e-9);
        assert!(rep.printed_discrepancy.abs() > 1.0);
    }

    #[test]
    fn degenerate_scales() {
        let s = DetectionScales::new(0.0, 496.0);
        assert!(matches!(optimal_threshold(&s, 8), Err(Error::DegenerateScales { .. })));
        assert!(matches!(equiprobable_threshold(&s, 8), Err(Error::DegenerateScales { .. })));
        // tiny but positive still yields a root above V
        let s = DetectionScales::new(1e-9, 496.0);
        assert!(optimal_threshold(&s, 8).unwrap() > 496.0);
    }

    #[test]
    fn equiprobable_reference_case() {
        let s = DetectionScales::new(496.0, 496.0);
        let [c0, c1, c2] = equiprobable_coefficients(&s, 8);
        let sqrt8 = 8f64.sqrt();
        assert!((c0 - 0.416 * sqrt8 * 1.5).abs() < 1e-12);
        assert!((c1 - (0.717 * 1488.0 - 2.0 * 0.416 * sqrt8 * 496.0)).abs() < 1e-9);
        assert!((c2 + 2.0 * 0.717 * 496.0 * 992.0).abs() < 1e-6);
        let rep = equiprobable_threshold_report(&s, 8).unwrap();
        let (p0, p1) = error_probabilities_approx(rep.threshold, &s, 8).unwrap();
        assert!((p0 - p1).abs() <= 1e-9);
        let (p0, p1) = error_probabilities(rep.reference, &s, 8);
        assert!((p0 - p1).abs() <= 1e-12);
        // p0 = p1 under either Q reduces to equal standardized distances
        assert!((rep.threshold - 2.0 * 496.0 * 992.0 / 1488.0).abs() < 1e-9);
    }

    #[test]
    fn detect_tie_goes_to_zero() {
        let t = 700.0;
        assert_eq!(detect(t - 1e-9, t), 0);
        assert_eq!(detect(t + 1e-9, t), 1);
        assert_eq!(detect(t, t), 0);
    }

    #[test]
    fn ber_limits_and_hand_value() {
        let s = DetectionScales::new(496.0, 496.0);
        assert!((analytic_ber(1e12, &s, 8) - 0.5).abs() < 1e-12);
        let expect = 0.75 - qfunc(-8f64.sqrt() / 2.0) / 2.0;
        assert!((analytic_ber(496.0, &s, 8) - expect).abs() < 1e-12);
        assert!((analytic_ber(496.0, &s, 8) - 0.2887).abs() < 1e-3);
    }

    #[test]
    fn optimal_beats_sampled_thresholds() {
        let s = DetectionScales::new(1500.0, 496.0);
        for w in [1, 4, 8, 16] {
            let t = optimal_threshold(&s, w).unwrap();
            let best = analytic_ber(t, &s, w);
            for i in 0..=2000 {
                let other = s.v + (s.u) * i as f64 / 2000.0;
                assert!(best <= analytic_ber(other, &s, w) + 1e-15);
            }
        }
    }

    #[test]
    fn kind_round_trip() {
        for k in [ThresholdKind::Optimal, ThresholdKind::Equiprobable] {
            assert_eq!(k.as_str().parse::<ThresholdKind>().unwrap(), k);
        }
        assert!("both".parse::<ThresholdKind>().is_err());
    }

    proptest! {
        #[test]
        fn thresholds_bracketed(ratio in 1.5f64..2000.0, v in 1.0f64..5000.0, w in 1usize..64) {
            let s = DetectionScales::new(ratio * v, v);
            let opt = optimal_threshold_report(&s, w).unwrap();
            prop_assert!(opt.threshold > v && opt.threshold < s.u + v);
            prop_assert!((opt.threshold - opt.bisection).abs() <= 1e-9 * opt.threshold);
            let equ = equiprobable_threshold_report(&s, w).unwrap();
            prop_assert!(equ.threshold > v && equ.threshold < s.u + v);
            let [c0, _, c2] = equ.coefficients;
            prop_assert!(c0 > 0.0 && c2 < 0.0);
        }

        #[test]
        fn optimal_above_noise_floor_always(u in 1e-6f64..1e6, v in 1e-3f64..1e4, w in 1usize..256) {
            let s = DetectionScales::new(u, v);
            let t = optimal_threshold(&s, w).unwrap();
            prop_assert!(t > v);
            prop_assert!(pdf_equality_residual(t, &s, w).abs() <= 1e-9 * (1.0 + (t / v).powi(2)));
        }

        #[test]
        fn ber_monotone(u in 10.0f64..1e4, du in 0.0f64..1e4, v in 10.0f64..1e3, w in 1usize..40) {
            let s = DetectionScales::new(u, v);
            let t = optimal_threshold(&s, w).unwrap();
            let ber = analytic_ber(t, &s, w);
            let s2 = DetectionScales::new(u + du, v);
            let t2 = optimal_threshold(&s2, w).unwrap();
            prop_assert!(analytic_ber(t2, &s2, w) <= ber + 1e-15);
            let t3 = optimal_threshold(&s, w + 1).unwrap();
            prop_assert!(analytic_ber(t3, &s, w + 1) <= ber + 1e-15);
        }
    }
}
