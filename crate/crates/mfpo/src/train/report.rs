//! Plot-data export: the trajectory as CSV plus plotter-agnostic JSON series
//! for the reward and loss curves.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::train::TrajectoryLog;

#[derive(Debug, Clone)]
pub struct ReportPaths {
    pub trajectory_csv: PathBuf,
    pub rewards_json: PathBuf,
    pub losses_json: PathBuf,
}

#[derive(Serialize)]
struct SeriesFile<'a> {
    name: &'a str,
    columns: Vec<&'a str>,
    rows: Vec<SeriesRow<'a>>,
}

#[derive(Serialize)]
struct SeriesRow<'a> {
    phase: &'a str,
    epoch: usize,
    step: usize,
    values: Vec<f64>,
}

/// Write `trajectory.csv`, `rewards.json`, and `losses.json` under `dir`.
/// Each series file carries one row per logged step.
pub fn write_report(log: &TrajectoryLog, dir: impl AsRef<Path>) -> Result<ReportPaths> {
    if log.is_empty() {
        return Err(Error::param("log", "empty trajectory"));
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;

    let trajectory_csv = dir.join("trajectory.csv");
    fs::write(&trajectory_csv, log.to_csv())?;

    let rewards = SeriesFile {
        name: "rewards",
        columns: vec![
            "chosen_text_reward",
            "rejected_text_reward",
            "chosen_image_reward",
            "rejected_image_reward",
        ],
        rows: log
            .rows
            .iter()
            .map(|r| SeriesRow {
                phase: &r.phase,
                epoch: r.epoch,
                step: r.step,
                values: vec![
                    r.chosen_text_reward,
                    r.rejected_text_reward,
                    r.chosen_image_reward,
                    r.rejected_image_reward,
                ],
            })
            .collect(),
    };
    let rewards_json = dir.join("rewards.json");
    fs::write(&rewards_json, serde_json::to_string_pretty(&rewards)?)?;

    let losses = SeriesFile {
        name: "losses",
        columns: vec!["l_text", "l_image", "l_margin", "l_total"],
        rows: log
            .rows
            .iter()
            .map(|r| SeriesRow {
                phase: &r.phase,
                epoch: r.epoch,
                step: r.step,
                values: vec![r.l_text, r.l_image, r.l_margin, r.l_total],
            })
            .collect(),
    };
    let losses_json = dir.join("losses.json");
    fs::write(&losses_json, serde_json::to_string_pretty(&losses)?)?;

    Ok(ReportPaths {
        trajectory_csv,
        rewards_json,
        losses_json,
    })
}
