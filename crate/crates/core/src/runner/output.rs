//! Result files. Floats use Rust's shortest round-trip decimal form, which
//! is locale-independent and parses back to the identical `f64`.
//!
//! Layout of an experiment directory:
//!
//! ```text
//! summary.json
//! average.csv                   n,runs,infid_to_mean,infid_to_true,infid_to_true_sem
//! trajectories/run_000.csv      n,axis_1,axis_2,axis_3,theta_q,theta_h,k,count_0,count_1,infid_to_mean,infid_to_true,ess
//! events/run_000.csv            step,n,axis_1,axis_2,axis_3,theta_q,theta_h,k,count_0,count_1
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use super::{
    AveragePoint, ExperimentResult, PowerLawFit, RunConfig, RunFailure, RunRecord, RunSeeds,
};
use crate::error::{Result, TomoError};
use crate::simlab::write_event_log;

pub const SUMMARY_FORMAT_VERSION: u32 = 1;

pub const TRAJECTORY_HEADER: [&str; 12] = [
    "n",
    "axis_1",
    "axis_2",
    "axis_3",
    "theta_q",
    "theta_h",
    "k",
    "count_0",
    "count_1",
    "infid_to_mean",
    "infid_to_true",
    "ess",
];

pub const AVERAGE_HEADER: [&str; 5] = [
    "n",
    "runs",
    "infid_to_mean",
    "infid_to_true",
    "infid_to_true_sem",
];

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn write_trajectory_csv<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for r in records {
        let axis = r.config.as_ref().map(|c| c.axis());
        let angles = r.config.as_ref().and_then(|c| c.waveplate_angles());
        w.write_record([
            r.n.to_string(),
            opt(axis.map(|a| a[0])),
            opt(axis.map(|a| a[1])),
            opt(axis.map(|a| a[2])),
            opt(angles.map(|a| a.0)),
            opt(angles.map(|a| a.1)),
            r.k.to_string(),
            r.counts[0].to_string(),
            r.counts[1].to_string(),
            num(r.infid_to_mean),
            opt(r.infid_to_true),
            num(r.ess),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_average_csv<W: Write>(points: &[AveragePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AVERAGE_HEADER)?;
    for p in points {
        w.write_record([
            p.n.to_string(),
            p.runs.to_string(),
            num(p.infid_to_mean),
            num(p.infid_to_true),
            num(p.infid_to_true_sem),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `(n, column)` pairs from a CSV with an `n` column. Empty cells are
/// skipped.
pub fn read_curve_csv<R: Read>(input: R, column: &str) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| TomoError::Config(format!("curve CSV has no `{name}` column")))
    };
    let (ni, yi) = (find("n")?, find(column)?);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let (n, y) = (&row[ni], &row[yi]);
        if n.is_empty() || y.is_empty() {
            continue;
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| TomoError::Config(format!("bad number `{s}`: {e}")))
        };
        out.push((parse(n)?, parse(y)?));
    }
    Ok(out)
}

#[derive(Serialize)]
struct RunSummary<'a> {
    index: usize,
    seeds: RunSeeds,
    truth: [f64; 3],
    resamples: u64,
    blocks: usize,
    final_n: u64,
    final_infid_to_mean: Option<f64>,
    final_infid_to_true: Option<f64>,
    failure: Option<&'a RunFailure>,
}

#[derive(Serialize)]
struct Summary<'a> {
    format_version: u32,
    package: &'static str,
    package_version: &'static str,
    config: &'a RunConfig,
    master_seed: u64,
    fit_window: (f64, f64),
    fit_to_true: Option<&'a PowerLawFit>,
    fit_to_mean: Option<&'a PowerLawFit>,
    fit_note: Option<&'a str>,
    final_average: Option<&'a AveragePoint>,
    runs: Vec<RunSummary<'a>>,
}

pub fn write_summary_json<W: Write>(res: &ExperimentResult, mut out: W) -> Result<()> {
    let summary = Summary {
        format_version: SUMMARY_FORMAT_VERSION,
        package: env!("CARGO_PKG_NAME"),
        package_version: env!("CARGO_PKG_VERSION"),
        config: &res.config,
        master_seed: res.config.master_seed,
        fit_window: res.fit_window,
        fit_to_true: res.fit_to_true.as_ref(),
        fit_to_mean: res.fit_to_mean.as_ref(),
        fit_note: res.fit_note.as_deref(),
        final_average: res.average.last(),
        runs: res
            .runs
            .iter()
            .map(|r| {
                let last = r.records.last();
                RunSummary {
                    index: r.index,
                    seeds: r.seeds,
                    truth: r.truth.stokes(),
                    resamples: r.resamples,
                    blocks: r.events.len(),
                    final_n: last.map_or(0, |l| l.n),
                    final_infid_to_mean: last.map(|l| l.infid_to_mean),
                    final_infid_to_true: last.and_then(|l| l.infid_to_true),
                    failure: r.failure.as_ref(),
                }
            })
            .collect(),
    };
    serde_json::to_writer_pretty(&mut out, &summary)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes every output file for `res` under `dir`.
pub fn write_experiment(res: &ExperimentResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_summary_json(res, create(&dir.join("summary.json"))?)?;
    write_average_csv(&res.average, create(&dir.join("average.csv"))?)?;
    if res.config.output.trajectories {
        fs::create_dir_all(dir.join("trajectories"))?;
        for r in &res.runs {
            write_trajectory_csv(
                &r.records,
                create(&dir.join(format!("trajectories/run_{:03}.csv", r.index)))?,
            )?;
        }
    }
    if res.config.output.event_logs {
        fs::create_dir_all(dir.join("events"))?;
        for r in &res.runs {
            write_event_log(
                &r.events,
                create(&dir.join(format!("events/run_{:03}.csv", r.index)))?,
            )?;
        }
    }
    Ok(())
}
