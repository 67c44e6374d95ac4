//! Versioned JSON checkpoint of a [`Posterior`].
//!
//! Schema (version 1):
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "filter": { particles, ess_threshold_fraction, mh_steps, mh_step_scale, target_acceptance },
//!   "step_count": u64,
//!   "step_scale": f64,            // adapted MH proposal scale
//!   "resample_count": u64,
//!   "rng": { "seed": [u8; 32], "stream": "u64", "word_pos": "u128" },
//!   "particles": [ { "coord": [x1, x2, x3, x4], "log_weight": f64 }, ... ],
//!   "history": [ { "axis": [b1, b2, b3], "counts": { "counts": [n0, n1] } }, ... ]
//! }
//! ```

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FilterConfig, HistoryEntry, Particle, Posterior};
use crate::error::{Result, TomoError};
use crate::qubit::{MeasurementConfig, SphereCoord};

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RngState {
    seed: [u8; 32],
    stream: String,
    word_pos: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ParticleRecord {
    coord: [f64; 4],
    log_weight: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PosteriorSnapshot {
    format_version: u32,
    filter: FilterConfig,
    step_count: u64,
    step_scale: f64,
    resample_count: u64,
    rng: RngState,
    particles: Vec<ParticleRecord>,
    history: Vec<HistoryEntry>,
}

impl PosteriorSnapshot {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let snap: Self = serde_json::from_str(text)?;
        if snap.format_version != SNAPSHOT_VERSION {
            return Err(TomoError::Snapshot(format!(
                "unsupported format version {} (expected {SNAPSHOT_VERSION})",
                snap.format_version
            )));
        }
        Ok(snap)
    }
}

impl Posterior {
    pub fn snapshot(&self) -> PosteriorSnapshot {
        PosteriorSnapshot {
            format_version: SNAPSHOT_VERSION,
            filter: self.config.clone(),
            step_count: self.step_count,
            step_scale: self.step_scale,
            resample_count: self.resample_count,
            rng: RngState {
                seed: self.rng.get_seed(),
                stream: self.rng.get_stream().to_string(),
                word_pos: self.rng.get_word_pos().to_string(),
            },
            particles: self
                .particles
                .iter()
                .map(|p| ParticleRecord {
                    coord: p.coord.coords(),
                    log_weight: p.log_weight,
                })
                .collect(),
            history: self.history.values().cloned().collect(),
        }
    }

    pub fn restore(snap: &PosteriorSnapshot) -> Result<Self> {
        snap.filter.validate()?;
        if snap.particles.len() != snap.filter.particles {
            return Err(TomoError::Snapshot(
                "particle count does not match filter config".into(),
            ));
        }
        let particles = snap
            .particles
            .iter()
            .map(|r| Ok(Particle::at(SphereCoord::new(r.coord)?, r.log_weight)))
            .collect::<Result<Vec<_>>>()?;
        let mut history = BTreeMap::new();
        let mut total = 0;
        for e in &snap.history {
            let cfg = MeasurementConfig::from_axis(e.axis)?;
            total += e.counts.total();
            history.insert(cfg.key(), e.clone());
        }
        if total != snap.step_count {
            return Err(TomoError::Snapshot(
                "history totals do not match step count".into(),
            ));
        }
        let parse = |s: &str| {
            s.parse::<u128>()
                .map_err(|e| TomoError::Snapshot(format!("rng state: {e}")))
        };
        let mut rng = ChaCha8Rng::from_seed(snap.rng.seed);
        rng.set_stream(parse(&snap.rng.stream)? as u64);
        rng.set_word_pos(parse(&snap.rng.word_pos)?);
        Ok(Self {
            particles,
            history,
            step_count: snap.step_count,
            rng,
            config: snap.filter.clone(),
            step_scale: snap.step_scale,
            resample_count: snap.resample_count,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::{NoiseModel, OutcomeCounts};
    use crate::priors::PriorKind;

    #[test]
    fn restored_posterior_continues_identically() {
        let cfg = FilterConfig {
            particles: 200,
            ..FilterConfig::default()
        };
        let mut post = Posterior::init(PriorKind::BuresHaar, cfg, 17).unwrap();
        let noise = NoiseModel::ideal();
        let x = MeasurementConfig::from_axis([1.0, 0.0, 0.0]).unwrap();
        let z = MeasurementConfig::from_axis([0.0, 0.0, 1.0]).unwrap();
        post.update(&x, &OutcomeCounts::binary(8, 1), &noise)
            .unwrap();

        let text = post.snapshot().to_json().unwrap();
        let mut back = Posterior::restore(&PosteriorSnapshot::from_json(&text).unwrap()).unwrap();

        post.update(&z, &OutcomeCounts::binary(9, 0), &noise)
            .unwrap();
        back.update(&z, &OutcomeCounts::binary(9, 0), &noise)
            .unwrap();
        post.resample_move(&noise).unwrap();
        back.resample_move(&noise).unwrap();
        assert_eq!(post.particles(), back.particles());
        assert_eq!(post.step_count(), back.step_count());
    }

    #[test]
    fn rejects_other_versions() {
        let cfg = FilterConfig {
            particles: 4,
            ..FilterConfig::default()
        };
        let post = Posterior::init(PriorKind::BuresHaar, cfg, 1).unwrap();
        let text = post
            .snapshot()
            .to_json()
            .unwrap()
            .replace("\"format_version\": 1", "\"format_version\": 99");
        assert!(PosteriorSnapshot::from_json(&text).is_err());
    }
}
