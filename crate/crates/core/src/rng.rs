//! Replayable randomness for episodes.
//!
//! Each episode owns one ChaCha8 stream per [`Purpose`], keyed by the base
//! seed and the episode index. Every period consumes a fixed number of
//! uniforms from each stream (one for period-level purposes, M for
//! per-resource ones), so the draw for a given (period, resource, purpose)
//! always sits at the same stream position no matter what the policy did
//! earlier. Policies never touch an RNG directly; they read the uniforms in
//! [`PeriodDraws`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Arrival,
    Proposal,
    Downdate,
    Assortment,
    Customer,
    Coupler,
}

impl Purpose {
    pub const ALL: [Purpose; 6] = [
        Purpose::Arrival,
        Purpose::Proposal,
        Purpose::Downdate,
        Purpose::Assortment,
        Purpose::Customer,
        Purpose::Coupler,
    ];
}

/// Uniforms in `[0,1)` for one period. An event of probability `q` fires
/// when its uniform is `< q`.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodDraws {
    pub arrival: f64,
    pub customer: f64,
    pub proposal: Vec<f64>,
    pub downdate: Vec<f64>,
    pub assortment: Vec<f64>,
    pub coupler: Vec<f64>,
}

impl PeriodDraws {
    /// Fresh draws from an arbitrary generator, for use outside episodes.
    pub fn from_rng<R: Rng>(rng: &mut R, m: usize) -> Self {
        let vec = |rng: &mut R| (0..m).map(|_| rng.random::<f64>()).collect();
        Self {
            arrival: rng.random(),
            customer: rng.random(),
            proposal: vec(rng),
            downdate: vec(rng),
            assortment: vec(rng),
            coupler: vec(rng),
        }
    }
}

pub struct EpisodeStreams {
    streams: Vec<ChaCha8Rng>,
    m: usize,
}

impl EpisodeStreams {
    pub fn new(base_seed: u64, episode: u64, m: usize) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&base_seed.to_le_bytes());
        key[8..16].copy_from_slice(&episode.to_le_bytes());
        let streams = Purpose::ALL
            .iter()
            .enumerate()
            .map(|(k, _)| {
                let mut rng = ChaCha8Rng::from_seed(key);
                rng.set_stream(k as u64);
                rng
            })
            .collect();
        Self { streams, m }
    }

    fn stream(&mut self, purpose: Purpose) -> &mut ChaCha8Rng {
        let k = Purpose::ALL.iter().position(|&p| p == purpose).unwrap();
        &mut self.streams[k]
    }

    fn resources(&mut self, purpose: Purpose) -> Vec<f64> {
        let m = self.m;
        let rng = self.stream(purpose);
        (0..m).map(|_| rng.random::<f64>()).collect()
    }

    /// Draws for the next period. Call exactly once per period, in order.
    pub fn next_period(&mut self) -> PeriodDraws {
        PeriodDraws {
            arrival: self.stream(Purpose::Arrival).random(),
            customer: self.stream(Purpose::Customer).random(),
            proposal: self.resources(Purpose::Proposal),
            downdate: self.resources(Purpose::Downdate),
            assortment: self.resources(Purpose::Assortment),
            coupler: self.resources(Purpose::Coupler),
        }
    }
}
