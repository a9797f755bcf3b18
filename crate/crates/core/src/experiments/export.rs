//! CSV exports consumed by the plotting scripts.

use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::SummaryTable;
use crate::error::{Error, Result};

pub const CSV_FILES: [&str; 5] = [
    "choices.csv",
    "levels.csv",
    "payoffs.csv",
    "convergence.csv",
    "histogram.csv",
];

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let to_err = |e: csv::Error| {
        let msg = e.to_string();
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => Error::invalid(msg),
        }
    };
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    w.write_record(header).map_err(to_err)?;
    for row in rows {
        w.write_record(&row).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn num(v: f64) -> String {
    // shortest round-trip decimal; never locale-dependent
    format!("{v}")
}

/// Writes the five CSV tables into `out_dir` and returns their paths.
pub fn export_csv(summary: &SummaryTable, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let path = |name: &str| out_dir.join(name);

    let choices = summary
        .choices
        .iter()
        .map(|c| {
            vec![
                c.session.to_string(),
                c.period.to_string(),
                c.agent.to_string(),
                c.label.clone(),
                num(c.choice),
                num(c.normalized),
            ]
        })
        .collect();
    write_csv(
        &path("choices.csv"),
        &[
            "session",
            "period",
            "agent",
            "label",
            "choice",
            "normalized",
        ],
        choices,
    )?;

    let series =
        |pick: fn(&crate::analysis::GroupSummary) -> &Vec<crate::analysis::PeriodValue>| {
            summary
                .groups
                .values()
                .flat_map(|g| {
                    pick(g)
                        .iter()
                        .map(|v| vec![g.label.clone(), v.period.to_string(), num(v.value)])
                })
                .collect::<Vec<_>>()
        };
    write_csv(
        &path("levels.csv"),
        &["label", "period", "mean_level"],
        series(|g| &g.levels),
    )?;
    write_csv(
        &path("payoffs.csv"),
        &["label", "period", "mean_payoff"],
        series(|g| &g.payoffs),
    )?;

    let convergence = summary
        .groups
        .values()
        .flat_map(|g| {
            g.convergence.iter().zip(&g.ratios).map(|(c, r)| {
                vec![
                    g.label.clone(),
                    c.period.to_string(),
                    num(c.value),
                    num(r.value),
                ]
            })
        })
        .collect();
    write_csv(
        &path("convergence.csv"),
        &["label", "period", "rate", "ratio"],
        convergence,
    )?;

    let histogram = summary
        .groups
        .values()
        .flat_map(|g| {
            g.histogram
                .iter()
                .map(|b| vec![g.label.clone(), num(b.lo), num(b.hi), b.count.to_string()])
        })
        .collect();
    write_csv(
        &path("histogram.csv"),
        &["label", "bin_lo", "bin_hi", "count"],
        histogram,
    )?;

    Ok(CSV_FILES.iter().map(|n| path(n)).collect())
}
