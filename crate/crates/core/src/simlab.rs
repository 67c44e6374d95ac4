//! Simulated measurement apparatus with a hidden true state.
//!
//! Outcomes are drawn from the per-event categorical distribution of the
//! noise model; under independent Poisson source and dark-count processes
//! this is exactly the distribution of which detector fires next, so no
//! event timing is simulated. The pilot run is the exception: it counts
//! Poisson events over fixed windows, as the hardware counters do.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::likelihood::{outcome_probs, NoiseModel, OutcomeCounts};
use crate::qubit::{MeasurementConfig, QubitState};

/// One logged block: `step` is the 1-based block index, `n` the number of
/// measurements completed after the block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub step: u64,
    pub n: u64,
    pub axis_1: f64,
    pub axis_2: f64,
    pub axis_3: f64,
    pub theta_q: Option<f64>,
    pub theta_h: Option<f64>,
    pub k: u64,
    pub count_0: u64,
    pub count_1: u64,
}

impl EventRecord {
    pub fn config(&self) -> Result<MeasurementConfig> {
        let angles = self.theta_q.zip(self.theta_h);
        MeasurementConfig::from_logged([self.axis_1, self.axis_2, self.axis_3], angles)
    }

    pub fn counts(&self) -> OutcomeCounts {
        OutcomeCounts::binary(self.count_0, self.count_1)
    }
}

/// Field order of the event log, one CSV record per block.
pub const EVENT_LOG_HEADER: [&str; 10] = [
    "step", "n", "axis_1", "axis_2", "axis_3", "theta_q", "theta_h", "k", "count_0", "count_1",
];

pub fn write_event_log<W: Write>(records: &[EventRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(EVENT_LOG_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_event_log<R: BufRead>(input: R) -> Result<Vec<EventRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(EVENT_LOG_HEADER.iter().copied()) {
        return Err(TomoError::Config(format!(
            "unexpected event log header: {header:?}"
        )));
    }
    rdr.deserialize()
        .map(|r| r.map_err(TomoError::from))
        .collect()
}

/// A ratio estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

/// Noise ratios from a pilot run. Because only `eta_g * lambda_s` is
/// identifiable, the source rate is expressed relative to the most efficient
/// channel, whose efficiency is taken as 1.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PilotEstimate {
    /// `lambda_d^g / lambda_s` per detector.
    pub dark_to_source: Vec<Estimate>,
    /// `eta_0 / eta_1`.
    pub efficiency_ratio: Estimate,
    pub efficiencies: Vec<f64>,
}

impl PilotEstimate {
    /// Noise model built from the point estimates, with `lambda_s = 1`.
    pub fn noise_model(&self) -> Result<NoiseModel> {
        NoiseModel::combined(
            1.0,
            self.dark_to_source.iter().map(|e| e.value).collect(),
            self.efficiencies.clone(),
        )
    }
}

pub struct Apparatus {
    true_state: QubitState,
    noise: NoiseModel,
    rng: ChaCha8Rng,
    log: Vec<EventRecord>,
    measured: u64,
}

impl Apparatus {
    pub fn new(true_state: QubitState, noise: NoiseModel, seed: u64) -> Result<Self> {
        noise.validate()?;
        Ok(Self {
            true_state,
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
            log: Vec::new(),
            measured: 0,
        })
    }

    pub fn true_state(&self) -> &QubitState {
        &self.true_state
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn event_log(&self) -> &[EventRecord] {
        &self.log
    }

    pub fn measured(&self) -> u64 {
        self.measured
    }

    /// `k` independent outcomes of `config` on the hidden state.
    pub fn draw_block(&mut self, config: &MeasurementConfig, k: u64) -> Result<OutcomeCounts> {
        if k == 0 {
            return Err(TomoError::InvalidCount("block size must be >= 1".into()));
        }
        let probs = outcome_probs(&self.true_state, &config.povm(), &self.noise)?;
        let mut counts = [0u64; 2];
        for _ in 0..k {
            let u: f64 = self.rng.random();
            counts[usize::from(u >= probs[0])] += 1;
        }
        self.measured += k;
        let b = config.axis();
        let angles = config.waveplate_angles();
        self.log.push(EventRecord {
            step: self.log.len() as u64 + 1,
            n: self.measured,
            axis_1: b[0],
            axis_2: b[1],
            axis_3: b[2],
            theta_q: angles.map(|a| a.0),
            theta_h: angles.map(|a| a.1),
            k,
            count_0: counts[0],
            count_1: counts[1],
        });
        Ok(OutcomeCounts::binary(counts[0], counts[1]))
    }

    /// Pilot calibration from `dark_windows` one-second windows with the
    /// source blocked and `bright_windows` windows on a balanced state
    /// (Born weights 1/2, 1/2).
    ///
    /// Relative standard error of each ratio is about `1 / sqrt(N)` where `N`
    /// is the smaller of the counts entering it; for a 1% target on a dark
    /// ratio, collect ~10^4 dark clicks per detector.
    pub fn pilot_estimate(
        &mut self,
        dark_windows: u64,
        bright_windows: u64,
    ) -> Result<PilotEstimate> {
        if dark_windows == 0 || bright_windows == 0 {
            return Err(TomoError::EstimationFailed(
                "pilot needs at least one window of each kind".into(),
            ));
        }
        let n = self.noise.dark_rates.len();
        let (td, tb) = (dark_windows as f64, bright_windows as f64);
        let ls = self.noise.source_rate;
        let mut dark = Vec::with_capacity(n);
        let mut signal = Vec::with_capacity(n);
        for g in 0..n {
            let ld = if self.noise.dark_counts {
                self.noise.dark_rates[g]
            } else {
                0.0
            };
            let eta = if self.noise.efficiency {
                self.noise.efficiencies[g]
            } else {
                1.0
            };
            let d = poisson(&mut self.rng, ld * td)?;
            let b = poisson(&mut self.rng, (0.5 * eta * ls + ld) * tb)?;
            if b == 0.0 {
                return Err(TomoError::EstimationFailed(format!(
                    "no counts on detector {g} in the bright run"
                )));
            }
            let rate = d / td;
            let rate_var = d.max(1.0) / (td * td);
            // eta_g lambda_s = 2 (bright rate - dark rate)
            let e = 2.0 * (b / tb - rate);
            let e_var = 4.0 * (b / (tb * tb) + rate_var);
            if e.is_nan() || e <= 0.0 {
                return Err(TomoError::EstimationFailed(format!(
                    "detector {g} shows no signal above dark counts"
                )));
            }
            dark.push((rate, rate_var));
            signal.push((e, e_var));
        }
        let (e_ref, e_ref_var) = signal
            .iter()
            .copied()
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .ok_or_else(|| TomoError::EstimationFailed("no channels".into()))?;
        let dark_to_source = dark
            .iter()
            .map(|&(r, rv)| {
                let value = r / e_ref;
                let std_err = (rv / (e_ref * e_ref) + r * r * e_ref_var / e_ref.powi(4)).sqrt();
                Estimate { value, std_err }
            })
            .collect();
        let efficiencies: Vec<f64> = signal.iter().map(|(e, _)| e / e_ref).collect();
        let ratio = if n >= 2 {
            let (e0, v0) = signal[0];
            let (e1, v1) = signal[1];
            let q = e0 / e1;
            Estimate {
                value: q,
                std_err: q * (v0 / (e0 * e0) + v1 / (e1 * e1)).sqrt(),
            }
        } else {
            Estimate {
                value: 1.0,
                std_err: 0.0,
            }
        };
        Ok(PilotEstimate {
            dark_to_source,
            efficiency_ratio: ratio,
            efficiencies,
        })
    }
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> Result<f64> {
    if mean == 0.0 {
        return Ok(0.0);
    }
    let dist = Poisson::new(mean)
        .map_err(|e| TomoError::EstimationFailed(format!("Poisson mean {mean}: {e}")))?;
    Ok(dist.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z() -> MeasurementConfig {
        MeasurementConfig::from_axis([0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn eigenstate_gives_certain_outcome() {
        let mut app = Apparatus::new(
            QubitState::new(0.0, 0.0, 1.0).unwrap(),
            NoiseModel::ideal(),
            1,
        )
        .unwrap();
        assert_eq!(
            app.draw_block(&z(), 100).unwrap(),
            OutcomeCounts::binary(100, 0)
        );
        assert!(app.draw_block(&z(), 0).is_err());
    }

    #[test]
    fn unbiased_axis_is_fair() {
        let mut app = Apparatus::new(
            QubitState::new(1.0, 0.0, 0.0).unwrap(),
            NoiseModel::ideal(),
            2,
        )
        .unwrap();
        let n = 100_000;
        let c = app.draw_block(&z(), n).unwrap();
        let f = c.counts()[0] as f64 / n as f64;
        let sigma = (0.25 / n as f64).sqrt();
        assert!((f - 0.5).abs() < 5.0 * sigma, "{f}");
    }

    #[test]
    fn dark_count_frequency_matches_model() {
        // Born weights (0.9, 0.1) on z: s3 = 0.8
        let noise = NoiseModel::with_dark_counts(1000.0, vec![5.0, 15.0]).unwrap();
        let mut app = Apparatus::new(QubitState::new(0.0, 0.0, 0.8).unwrap(), noise, 3).unwrap();
        let n = 100_000;
        let c = app.draw_block(&z(), n).unwrap();
        let p = 905.0 / 1020.0;
        let f = c.counts()[0] as f64 / n as f64;
        assert!(
            (f - p).abs() < 5.0 * (p * (1.0 - p) / n as f64).sqrt(),
            "{f} vs {p}"
        );
    }

    #[test]
    fn seeded_streams_repeat() {
        let draw = |seed| {
            let mut app = Apparatus::new(
                QubitState::new(0.3, 0.3, 0.3).unwrap(),
                NoiseModel::ideal(),
                seed,
            )
            .unwrap();
            (0..20)
                .map(|_| app.draw_block(&z(), 7).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
        assert_ne!(draw(5), draw(6));
    }

    #[test]
    fn pilot_recovers_known_ratios() {
        let noise = NoiseModel::combined(1000.0, vec![10.0, 10.0], vec![0.8, 1.0]).unwrap();
        let mut app = Apparatus::new(QubitState::maximally_mixed(), noise, 4).unwrap();
        let est = app.pilot_estimate(200, 200).unwrap();
        for d in &est.dark_to_source {
            assert!((d.value - 0.01).abs() < 3.0 * d.std_err, "{d:?}");
        }
        let r = est.efficiency_ratio;
        assert!((r.value - 0.8).abs() < 3.0 * r.std_err, "{r:?}");
        let model = est.noise_model().unwrap();
        assert!((model.efficiencies[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pilot_zero_dark_and_equal_efficiency() {
        let noise = NoiseModel::with_efficiencies(vec![0.9, 0.9]).unwrap();
        let mut app = Apparatus::new(QubitState::maximally_mixed(), noise, 5).unwrap();
        let est = app.pilot_estimate(100, 100).unwrap();
        for d in &est.dark_to_source {
            assert_eq!(d.value, 0.0);
        }
        let r = est.efficiency_ratio;
        assert!((r.value - 1.0).abs() < 3.0 * r.std_err.max(1e-3), "{r:?}");
    }

    #[test]
    fn pilot_without_signal_fails() {
        let noise = NoiseModel::with_dark_counts(1e-9, vec![0.0, 0.0]).unwrap();
        let mut app = Apparatus::new(QubitState::maximally_mixed(), noise, 5).unwrap();
        assert!(matches!(
            app.pilot_estimate(1, 1),
            Err(TomoError::EstimationFailed(_))
        ));
    }

    #[test]
    fn event_log_round_trip() {
        let mut app = Apparatus::new(
            QubitState::new(0.1, 0.2, 0.3).unwrap(),
            NoiseModel::ideal(),
            9,
        )
        .unwrap();
        app.draw_block(&z(), 3).unwrap();
        let wp = crate::waveplate::realize_with_waveplates([1.0, 0.0, 0.0]).unwrap();
        app.draw_block(&wp, 2).unwrap();
        let mut buf = Vec::new();
        write_event_log(app.event_log(), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "step,n,axis_1,axis_2,axis_3,theta_q,theta_h,k,count_0,count_1\n1,3,0.0,0.0,1.0,,,3,"
        ));
        let back = read_event_log(&buf[..]).unwrap();
        assert_eq!(back, app.event_log());
    }
}
