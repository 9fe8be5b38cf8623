use serde::{Deserialize, Serialize};

use super::records::EpisodeRecord;
use crate::error::{Error, Result};
use crate::traffic::{Route, RouteNetwork};

/// Speeds below this count as a stop inside an entrance zone.
pub const STOP_SPEED: f64 = 0.2;
/// Relative drop in lead-vehicle zone speed that counts as metering.
pub const METERING_SLOWDOWN: f64 = 0.10;
/// Relative travel-time increase the other entrance may absorb.
pub const THROUGHPUT_TOLERANCE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub mean_travel_time: f64,
    pub mean_speed: f64,
    pub trials: usize,
    /// Exited vehicles the means are taken over.
    pub vehicles: usize,
    pub baseline_mean_travel_time: f64,
    /// Positive when faster than the baseline.
    pub percent_time_saved: f64,
    pub crashes: usize,
}

pub fn percent_time_saved(baseline_mean: f64, mean: f64) -> f64 {
    100.0 * (baseline_mean - mean) / baseline_mean
}

/// Per-vehicle travel times and mean speeds of every exited vehicle.
pub fn vehicle_metrics(records: &[EpisodeRecord]) -> (Vec<f64>, Vec<f64>) {
    let mut times = Vec::new();
    let mut speeds = Vec::new();
    for v in records.iter().flat_map(|r| &r.vehicles) {
        if let (Some(t), Some(s)) = (v.travel_time(), v.mean_speed()) {
            times.push(t);
            speeds.push(s);
        }
    }
    (times, speeds)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn mean_travel_time(records: &[EpisodeRecord]) -> Result<f64> {
    let (times, _) = vehicle_metrics(records);
    if times.is_empty() {
        return Err(Error::Empty("no exited vehicles"));
    }
    Ok(mean(&times))
}

pub fn compute_metrics(records: &[EpisodeRecord], baseline_records: &[EpisodeRecord]) -> Result<MetricsSummary> {
    if records.is_empty() {
        return Err(Error::Empty("records"));
    }
    if baseline_records.is_empty() {
        return Err(Error::Empty("baseline records"));
    }
    let (times, speeds) = vehicle_metrics(records);
    if times.is_empty() {
        return Err(Error::Empty("no exited vehicles"));
    }
    let baseline = mean_travel_time(baseline_records)?;
    let t = mean(&times);
    Ok(MetricsSummary {
        mean_travel_time: t,
        mean_speed: mean(&speeds),
        trials: records.len(),
        vehicles: times.len(),
        baseline_mean_travel_time: baseline,
        percent_time_saved: percent_time_saved(baseline, t),
        crashes: records.iter().map(|r| r.crashes.len()).sum(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistogramMetric {
    TravelTime,
    MeanSpeed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub metric: HistogramMetric,
    /// `k + 1` strictly increasing edges for `k` bins.
    pub edges: Vec<f64>,
    pub frequencies: Vec<f64>,
}

impl HistogramSpec {
    pub fn new(metric: HistogramMetric, edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) || edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::config("histogram edges must be finite and strictly increasing"));
        }
        let bins = edges.len() - 1;
        Ok(Self {
            metric,
            edges,
            frequencies: vec![0.0; bins],
        })
    }

    /// `bins` equal-width bins over `[lo, hi]`.
    pub fn uniform(metric: HistogramMetric, lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::config("histogram needs at least one bin"));
        }
        let edges = (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect();
        Self::new(metric, edges)
    }

    /// Bin of `x`: bins are half-open `[e_i, e_{i+1})` except the last, which
    /// is closed. Values outside the edges go to the first or last bin.
    pub fn bin_of(&self, x: f64) -> usize {
        let bins = self.frequencies.len();
        let i = self.edges.partition_point(|&e| e <= x);
        i.saturating_sub(1).min(bins - 1)
    }
}

/// Relative frequencies of a per-vehicle metric over exited vehicles.
pub fn histogram_values(values: &[f64], spec: &HistogramSpec) -> Result<HistogramSpec> {
    if values.is_empty() {
        return Err(Error::Empty("histogram values"));
    }
    let mut counts = vec![0usize; spec.frequencies.len()];
    for &x in values {
        counts[spec.bin_of(x)] += 1;
    }
    let n = values.len() as f64;
    Ok(HistogramSpec {
        metric: spec.metric,
        edges: spec.edges.clone(),
        frequencies: counts.iter().map(|&c| c as f64 / n).collect(),
    })
}

pub fn histogram(records: &[EpisodeRecord], spec: &HistogramSpec) -> Result<HistogramSpec> {
    let (times, speeds) = vehicle_metrics(records);
    let values = match spec.metric {
        HistogramMetric::TravelTime => times,
        HistogramMetric::MeanSpeed => speeds,
    };
    histogram_values(&values, spec)
}

/// What happens inside one entrance zone.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EntranceStats {
    /// Mean speed over all (vehicle, step) samples inside the zone.
    pub zone_speed: f64,
    /// The same restricted to the group's head vehicle.
    pub lead_zone_speed: f64,
    /// Vehicles that were below the stop speed in the zone at least once.
    pub yield_count: usize,
    pub mean_travel_time: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeteringSignature {
    /// [north, west]
    pub entrances: [EntranceStats; 2],
}

/// Entrance-zone speeds and stops per route, plus route travel times.
pub fn metering_signature(records: &[EpisodeRecord], net: &RouteNetwork) -> MeteringSignature {
    let mut entrances = [EntranceStats::default(); 2];
    for route in Route::ALL {
        let g = net.route(route);
        let r = route.index();
        let (mut sum, mut n, mut lead_sum, mut lead_n, mut yields) = (0.0, 0usize, 0.0, 0usize, 0usize);
        let (mut tt, mut tt_n) = (0.0, 0usize);
        for rec in records {
            let lead = rec.leads[r];
            let mut stopped = std::collections::BTreeSet::new();
            for s in &rec.steps {
                for v in s.vehicles.iter().filter(|v| v.route == route && g.in_entrance_zone(v.pos)) {
                    sum += v.speed;
                    n += 1;
                    if Some(v.id) == lead {
                        lead_sum += v.speed;
                        lead_n += 1;
                    }
                    if v.speed < STOP_SPEED {
                        stopped.insert(v.id);
                    }
                }
            }
            yields += stopped.len();
            for v in rec.vehicles.iter().filter(|v| v.route == route) {
                if let Some(t) = v.travel_time() {
                    tt += t;
                    tt_n += 1;
                }
            }
        }
        let avg = |s: f64, k: usize| if k == 0 { 0.0 } else { s / k as f64 };
        entrances[r] = EntranceStats {
            zone_speed: avg(sum, n),
            lead_zone_speed: avg(lead_sum, lead_n),
            yield_count: yields,
            mean_travel_time: avg(tt, tt_n),
            samples: n,
        };
    }
    MeteringSignature { entrances }
}

/// The metering entrance, if exactly one entrance's head vehicle crosses its
/// zone at least [`METERING_SLOWDOWN`] slower than under the baseline while
/// the other entrance's travel time grows by at most
/// [`THROUGHPUT_TOLERANCE`].
pub fn metering_entrance(policy: &MeteringSignature, baseline: &MeteringSignature) -> Option<Route> {
    let slowed: Vec<Route> = Route::ALL
        .into_iter()
        .filter(|r| {
            let (p, b) = (policy.entrances[r.index()], baseline.entrances[r.index()]);
            b.lead_zone_speed > 0.0 && p.lead_zone_speed <= (1.0 - METERING_SLOWDOWN) * b.lead_zone_speed
        })
        .collect();
    match slowed.as_slice() {
        [r] => {
            let o = r.other().index();
            let (p, b) = (policy.entrances[o], baseline.entrances[o]);
            (p.mean_travel_time <= (1.0 + THROUGHPUT_TOLERANCE) * b.mean_travel_time).then_some(*r)
        }
        _ => None,
    }
}
