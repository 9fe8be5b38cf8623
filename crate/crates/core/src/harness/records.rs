use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{GroupDraw, RewardBreakdown, VehicleSnapshot};
use crate::error::{Error, Result};
use crate::traffic::{CollisionEvent, Route, VehicleId};

pub const RECORD_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub id: VehicleId,
    pub route: Route,
    pub entry_time: f64,
    pub exit_time: Option<f64>,
    /// Route length for exited vehicles, otherwise the distance covered.
    pub distance: f64,
}

impl VehicleRecord {
    pub fn travel_time(&self) -> Option<f64> {
        self.exit_time.map(|t| t - self.entry_time)
    }

    pub fn mean_speed(&self) -> Option<f64> {
        self.travel_time().filter(|&t| t > 0.0).map(|t| self.distance / t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Time after the step.
    pub time: f64,
    pub reward: RewardBreakdown,
    pub vehicles: Vec<VehicleSnapshot>,
}

/// Everything needed to recompute metrics for one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub schema: u32,
    pub seed: u64,
    pub draw: GroupDraw,
    /// Head vehicle of each group, [north, west].
    pub leads: [Option<VehicleId>; 2],
    pub vehicles: Vec<VehicleRecord>,
    pub steps: Vec<StepRecord>,
    pub crashes: Vec<CollisionEvent>,
    pub truncated: bool,
}

impl EpisodeRecord {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward.total).sum()
    }
}

/// One JSON object per line.
pub fn write_records(path: impl AsRef<Path>, records: &[EpisodeRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<EpisodeRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EpisodeRecord = serde_json::from_str(&line).map_err(|e| Error::Record {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if rec.schema != RECORD_SCHEMA {
            return Err(Error::Record {
                line: i + 1,
                reason: format!("schema {} (expected {RECORD_SCHEMA})", rec.schema),
            });
        }
        out.push(rec);
    }
    Ok(out)
}
