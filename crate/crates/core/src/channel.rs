use num_complex::Complex64;
use rand::Rng;

use crate::params::SystemParams;
use crate::rng::complex_gaussian_vec;

/// One realization of the three multipath channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Source to reader, `L + 1` taps.
    pub h: Vec<Complex64>,
    /// Source to tag, `M + 1` taps.
    pub g: Vec<Complex64>,
    /// Tag to reader, `K + 1` taps.
    pub f: Vec<Complex64>,
}

impl ChannelSet {
    /// Every tap i.i.d. CN(0, 1).
    pub fn draw<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> Self {
        Self {
            h: complex_gaussian_vec(rng, params.l + 1, 1.0),
            g: complex_gaussian_vec(rng, params.m + 1, 1.0),
            f: complex_gaussian_vec(rng, params.k + 1, 1.0),
        }
    }

    pub fn matches(&self, params: &SystemParams) -> bool {
        self.h.len() == params.l + 1 && self.g.len() == params.m + 1 && self.f.len() == params.k + 1
    }
}

pub fn draw_channels<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> ChannelSet {
    ChannelSet::draw(params, rng)
}
