//! CSV, JSON lines and SVG files written after a batch.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::complexity::compare_complexity;
use crate::experiment::{median, ResultRow, RunOutcome};
use crate::spec::{ExperimentSpec, Mode};
use crate::svg::{Chart, Series};

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TRACES_FILE: &str = "traces.csv";
pub const SOLUTIONS_FILE: &str = "solutions.jsonl";
pub const COMPLEXITY_FILE: &str = "complexity.json";
pub const PLOT_FILE: &str = "plot.svg";

/// Writes rows with the header
/// `method,seed,sweep,variable,harvested_w,sr_bps_hz,iters,seconds,status`.
pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        bail!("no rows to write");
    }
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

#[derive(Debug, Serialize)]
struct SummaryRow<'a> {
    method: &'a str,
    variable: &'a str,
    sweep: f64,
    runs: usize,
    succeeded: usize,
    mean_harvested_w: f64,
    median_harvested_w: f64,
    mean_sr_bps_hz: f64,
    mean_iters: f64,
    mean_seconds: f64,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

type GroupKey = (usize, String, u64);

/// Successful outcomes grouped by (method position, variable, sweep value).
fn groups<'a>(spec: &ExperimentSpec, outcomes: &'a [RunOutcome]) -> BTreeMap<GroupKey, Vec<&'a RunOutcome>> {
    let mut out: BTreeMap<GroupKey, Vec<&RunOutcome>> = BTreeMap::new();
    for o in outcomes {
        let m = spec
            .methods
            .iter()
            .position(|&m| m == o.row.method)
            .unwrap_or(usize::MAX);
        out.entry((m, o.row.variable.clone(), o.row.sweep.to_bits()))
            .or_default()
            .push(o);
    }
    out
}

pub fn write_summary(spec: &ExperimentSpec, outcomes: &[RunOutcome], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut rows: Vec<_> = groups(spec, outcomes).into_iter().collect();
    rows.sort_by(|a, b| {
        (a.0 .0, &a.0 .1)
            .cmp(&(b.0 .0, &b.0 .1))
            .then(f64::from_bits(a.0 .2).total_cmp(&f64::from_bits(b.0 .2)))
    });
    for ((_, variable, bits), members) in &rows {
        let ok: Vec<_> = members.iter().filter(|o| o.row.succeeded()).collect();
        let col = |f: &dyn Fn(&ResultRow) -> f64| ok.iter().map(|o| f(&o.row)).collect::<Vec<_>>();
        w.serialize(SummaryRow {
            method: members[0].row.method.as_str(),
            variable,
            sweep: f64::from_bits(*bits),
            runs: members.len(),
            succeeded: ok.len(),
            mean_harvested_w: mean(&col(&|r| r.harvested_w)),
            median_harvested_w: median(&mut col(&|r| r.harvested_w)).unwrap_or(f64::NAN),
            mean_sr_bps_hz: mean(&col(&|r| r.sr_bps_hz)),
            mean_iters: mean(&col(&|r| r.iters as f64)),
            mean_seconds: mean(&col(&|r| r.seconds)),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_traces(outcomes: &[RunOutcome], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "method,seed,sweep,variable,iteration,value")?;
    for o in outcomes {
        for (k, v) in o.trace.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{k},{v:?}",
                o.row.method, o.row.seed, o.row.sweep, o.row.variable
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Stored solution for later re-evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub method: String,
    pub seed: u64,
    pub sweep: f64,
    pub variable: String,
    pub antennas: usize,
    pub elements: usize,
    pub harvested_w: f64,
    pub sr_bps_hz: f64,
    /// `[re, im]` pairs.
    pub w: Vec<[f64; 2]>,
    pub u: Vec<[f64; 2]>,
}

pub fn write_solutions(outcomes: &[RunOutcome], path: &Path) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    for o in outcomes {
        let pairs = |v: &swipt_core::CVector| v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>();
        let rec = SolutionRecord {
            method: o.row.method.to_string(),
            seed: o.row.seed,
            sweep: o.row.sweep,
            variable: o.row.variable.clone(),
            antennas: o.antennas,
            elements: o.elements,
            harvested_w: o.row.harvested_w,
            sr_bps_hz: o.row.sr_bps_hz,
            w: pairs(&o.w),
            u: pairs(&o.u),
        };
        serde_json::to_writer(&mut f, &rec)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

/// Mean harvested power against the sweep value, or the mean objective trace
/// per iteration in convergence mode.
pub fn plot(spec: &ExperimentSpec, outcomes: &[RunOutcome]) -> Chart {
    let grouped = groups(spec, outcomes);
    let mut series: BTreeMap<(usize, String, u64), Series> = BTreeMap::new();
    let label = |o: &RunOutcome| {
        if spec.antennas.is_empty() {
            o.row.method.to_string()
        } else {
            format!("{} M={}", o.row.method, o.antennas)
        }
    };
    for ((m, variable, bits), members) in &grouped {
        let ok: Vec<_> = members.iter().filter(|o| o.row.succeeded()).collect();
        if ok.is_empty() {
            continue;
        }
        if spec.mode == Mode::Convergence {
            let len = ok.iter().map(|o| o.trace.len()).max().unwrap_or(0);
            let points = (0..len)
                .map(|k| {
                    let vals: Vec<f64> = ok.iter().map(|o| o.trace[k.min(o.trace.len() - 1)]).collect();
                    (k as f64, mean(&vals))
                })
                .collect();
            let s = Series {
                label: format!("{}, N={}", label(ok[0]), f64::from_bits(*bits)),
                points,
            };
            series.insert((*m, variable.clone(), *bits), s);
        } else {
            let y = mean(&ok.iter().map(|o| o.row.harvested_w).collect::<Vec<_>>());
            series
                .entry((*m, variable.clone(), 0))
                .or_insert_with(|| Series {
                    label: label(ok[0]),
                    points: Vec::new(),
                })
                .points
                .push((f64::from_bits(*bits), y));
        }
    }
    for s in series.values_mut() {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let (title, x_label, y_label) = match spec.mode {
        Mode::Convergence => ("Convergence", "outer iteration", "mean objective (W)"),
        Mode::SweepSr => (
            "Harvested power vs secrecy rate",
            "minimum secrecy rate (bps/Hz)",
            "mean harvested power (W)",
        ),
        Mode::SweepN => (
            "Harvested power vs IRS size",
            "reflecting elements N",
            "mean harvested power (W)",
        ),
        Mode::Single => (
            "Harvested power",
            "minimum secrecy rate (bps/Hz)",
            "mean harvested power (W)",
        ),
    };
    Chart {
        title: title.into(),
        x_label: x_label.into(),
        y_label: y_label.into(),
        series: series.into_values().collect(),
    }
}

/// Writes every output file for a finished batch into `dir`.
pub fn write_all(spec: &ExperimentSpec, outcomes: &[RunOutcome], dir: &Path, dump_solutions: bool) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let rows: Vec<ResultRow> = outcomes.iter().map(|o| o.row.clone()).collect();
    emit_csv(&rows, &dir.join(RESULTS_FILE))?;
    write_summary(spec, outcomes, &dir.join(SUMMARY_FILE))?;
    if spec.mode == Mode::Convergence {
        write_traces(outcomes, &dir.join(TRACES_FILE))?;
    }
    if dump_solutions {
        write_solutions(outcomes, &dir.join(SOLUTIONS_FILE))?;
    }
    let summary = compare_complexity(outcomes);
    if summary.warning.is_none() {
        fs::write(
            dir.join(COMPLEXITY_FILE),
            serde_json::to_string_pretty(&summary)? + "\n",
        )?;
    }
    fs::write(dir.join(PLOT_FILE), plot(spec, outcomes).render())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::Method;

    fn row(seed: u64, h: f64) -> ResultRow {
        ResultRow {
            method: Method::Sca,
            seed,
            sweep: 0.1 + 0.2,
            variable: "r0".into(),
            harvested_w: h,
            sr_bps_hz: 1.0 / 3.0,
            iters: 7,
            seconds: 1e-7,
            status: "converged".into(),
        }
    }

    #[test]
    fn one_row_two_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        emit_csv(&[row(1, 2.5e-5)], &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.ends_with('\n'));
        assert_eq!(
            text.lines().next().unwrap(),
            "method,seed,sweep,variable,harvested_w,sr_bps_hz,iters,seconds,status"
        );
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let rows: Vec<_> = (0..20)
            .map(|k| row(k, (k as f64 + 0.1).sqrt() * 1.234567890123e-5))
            .collect();
        emit_csv(&rows, &p).unwrap();
        let back = read_csv(&p).unwrap();
        assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.harvested_w.to_bits(), b.harvested_w.to_bits());
            assert_eq!(a.sweep.to_bits(), b.sweep.to_bits());
            assert_eq!(a, b);
        }
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.lines().all(|l| l.split(',').count() == 9));
    }

    #[test]
    fn empty_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_csv(&[], &dir.path().join("x.csv")).is_err());
    }
}
