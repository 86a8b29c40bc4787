//! CSV schemas.
//!
//! Per-seed file (`seed-<s>.csv`):
//! `seed,epoch,frames,episodes,avg_score,peak_score,total_size,buffer_sizes`
//! where `frames` is the cumulative step count at the end of the epoch and
//! `buffer_sizes` joins the per-action entry counts with `;`.
//!
//! Aggregate file (`aggregate.csv`):
//! `epoch,seeds,frames_mean,episodes_mean,avg_score_mean,avg_score_se,peak_score_mean,peak_score_se,total_size_mean,total_size_se`.
//! Standard errors are the sample standard deviation over `sqrt(seeds)` and
//! are left empty when only one seed reached that epoch.
//!
//! Reals are written in positional notation with 17 significant digits, which
//! round-trips every `f64` exactly.

use std::io::Write;

use crate::error::{Error, Result};

use super::experiment::EpochRecord;

pub const SEED_HEADER: [&str; 8] = [
    "seed",
    "epoch",
    "frames",
    "episodes",
    "avg_score",
    "peak_score",
    "total_size",
    "buffer_sizes",
];

pub const AGGREGATE_HEADER: [&str; 10] = [
    "epoch",
    "seeds",
    "frames_mean",
    "episodes_mean",
    "avg_score_mean",
    "avg_score_se",
    "peak_score_mean",
    "peak_score_se",
    "total_size_mean",
    "total_size_se",
];

pub fn format_real(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    // Rust's exponent formatting rounds correctly; shift its point into place.
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent formatting");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let point = exp + 1;
    let body = if point <= 0 {
        format!("0.{}{digits}", "0".repeat(point.unsigned_abs() as usize))
    } else if point as usize >= digits.len() {
        format!("{digits}{}", "0".repeat(point as usize - digits.len()))
    } else {
        let (int, frac) = digits.split_at(point as usize);
        format!("{int}.{frac}")
    };
    format!("{sign}{body}")
}

fn csv_error(path: &str, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

pub(crate) fn write_seed_csv<W: Write>(out: W, path: &str, records: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SEED_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for r in records {
        let sizes: Vec<String> = r.buffer_sizes.iter().map(usize::to_string).collect();
        w.write_record([
            r.seed.to_string(),
            r.epoch.to_string(),
            r.frames.to_string(),
            r.episodes.to_string(),
            format_real(r.avg_score),
            format_real(r.peak_score),
            r.total_size.to_string(),
            sizes.join(";"),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Mean and standard error of one metric across seeds at one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: Option<f64>,
}

fn mean_se(values: &[f64]) -> MeanSe {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let se = (values.len() > 1).then(|| {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        var.sqrt() / n.sqrt()
    });
    MeanSe { mean, se }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub epoch: usize,
    pub seeds: usize,
    pub frames: MeanSe,
    pub episodes: MeanSe,
    pub avg_score: MeanSe,
    pub peak_score: MeanSe,
    pub total_size: MeanSe,
}

/// One row per epoch index reached by at least one seed.
pub(crate) fn aggregate(per_seed: &[Vec<EpochRecord>]) -> Vec<AggregateRow> {
    let epochs = per_seed.iter().map(Vec::len).max().unwrap_or(0);
    (0..epochs)
        .map(|epoch| {
            let rows: Vec<&EpochRecord> = per_seed.iter().filter_map(|r| r.get(epoch)).collect();
            let col = |f: fn(&EpochRecord) -> f64| {
                mean_se(&rows.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            AggregateRow {
                epoch,
                seeds: rows.len(),
                frames: col(|r| r.frames as f64),
                episodes: col(|r| r.episodes as f64),
                avg_score: col(|r| r.avg_score),
                peak_score: col(|r| r.peak_score),
                total_size: col(|r| r.total_size as f64),
            }
        })
        .collect()
}

pub(crate) fn write_aggregate_csv<W: Write>(
    out: W,
    path: &str,
    rows: &[AggregateRow],
) -> Result<()> {
    let se = |m: &MeanSe| m.se.map(format_real).unwrap_or_default();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record([
            r.epoch.to_string(),
            r.seeds.to_string(),
            format_real(r.frames.mean),
            format_real(r.episodes.mean),
            format_real(r.avg_score.mean),
            se(&r.avg_score),
            format_real(r.peak_score.mean),
            se(&r.peak_score),
            format_real(r.total_size.mean),
            se(&r.total_size),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
