//! Seeded Rayleigh-fading channel realizations.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{CVec, ChannelSet};

/// Distances in metres, the path-loss exponent, and a reference gain
/// applied on top of the `d^(−ple)` law.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    pub d_sr: Vec<f64>,
    pub d_rd: Vec<f64>,
    pub ple: f64,
    pub ref_gain_db: f64,
}

impl Geometry {
    pub fn uniform(k: usize, d_sr: f64, d_rd: f64, ple: f64, ref_gain_db: f64) -> Self {
        Self { d_sr: vec![d_sr; k], d_rd: vec![d_rd; k], ple, ref_gain_db }
    }

    pub fn k(&self) -> usize {
        self.d_sr.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_sr.is_empty() || self.d_sr.len() != self.d_rd.len() {
            return Err(Error::InvalidInput("geometry needs one source and one destination distance per pair".into()));
        }
        if !(self.ple > 2.0 && self.ple.is_finite()) {
            return Err(Error::InvalidInput(format!("path-loss exponent must exceed 2, got {}", self.ple)));
        }
        if !self.ref_gain_db.is_finite() {
            return Err(Error::InvalidInput("reference gain must be finite".into()));
        }
        for &d in self.d_sr.iter().chain(&self.d_rd) {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::InvalidInput(format!("distances must be positive, got {d}")));
            }
        }
        Ok(())
    }

    /// Mean per-entry power of a link of length `d`.
    pub fn link_gain(&self, d: f64) -> Result<f64> {
        Ok(10f64.powf(self.ref_gain_db / 10.0) * pathloss(d, self.ple)?)
    }
}

/// `d^(−ple)` with unit reference at 1 m.
pub fn pathloss(d: f64, ple: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::InvalidInput(format!("distance must be positive, got {d}")));
    }
    Ok(d.powf(-ple))
}

/// Independent stream for one link of one trial.
pub fn link_rng(seed: u64, trial: u64, link: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(link);
    rng
}

/// I.i.d. circularly-symmetric complex Gaussian entries with the given variance.
pub fn sample_channel<R: Rng + ?Sized>(rng: &mut R, n: usize, variance: f64) -> CVec {
    let sd = (variance / 2.0).sqrt();
    CVec::from_iterator(
        n,
        (0..n).map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(sd * re, sd * im)
        }),
    )
}

/// Draws every uplink and downlink vector for one trial and orders pairs by uplink gain.
pub fn generate(seed: u64, trial: u64, geometry: &Geometry, n: usize) -> Result<ChannelSet> {
    geometry.validate()?;
    if n == 0 {
        return Err(Error::InvalidInput("antenna count must be at least 1".into()));
    }
    let k = geometry.k();
    let mut h = Vec::with_capacity(k);
    let mut g = Vec::with_capacity(k);
    for i in 0..k {
        let vh = geometry.link_gain(geometry.d_sr[i])?;
        let vg = geometry.link_gain(geometry.d_rd[i])?;
        h.push(sample_channel(&mut link_rng(seed, trial, 2 * i as u64), n, vh));
        g.push(sample_channel(&mut link_rng(seed, trial, 2 * i as u64 + 1), n, vg));
    }
    ChannelSet::new(h, g)
}
