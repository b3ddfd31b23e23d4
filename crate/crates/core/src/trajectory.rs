//! Recorded vehicle trajectories and the NGSIM-style column format they come in.
//!
//! Rows carry 18 columns (Vehicle_ID, Frame_ID, Total_Frames, Global_Time in ms,
//! Local_X, Local_Y, Global_X, Global_Y, v_Length, v_Width, v_Class, v_Vel,
//! v_Acc, Lane_ID, Preceding, Following, Space_Headway, Time_Headway), either
//! whitespace- or comma-separated. Distances are feet and are converted to
//! metres on read. `Local_Y` marks the front bumper; samples store the vehicle
//! centre, so `y = Local_Y - length / 2`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FEET_TO_METRES: f64 = 0.3048;

/// Sampling period of every track after parsing, in seconds.
pub const SAMPLE_PERIOD: f64 = 0.1;

const COLUMNS: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One timestamped kinematic measurement of one vehicle, in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub vehicle_id: VehicleId,
    /// Seconds.
    pub timestamp: f64,
    /// Lateral position of the vehicle centre, metres.
    pub x: f64,
    /// Longitudinal position of the vehicle centre, metres.
    pub y: f64,
    pub lane_id: u16,
    pub speed: f64,
    pub acceleration: f64,
    pub length: f64,
    pub width: f64,
}

impl TrajectorySample {
    /// Index of this sample on the 10 Hz grid.
    pub fn tick(&self) -> i64 {
        time_to_tick(self.timestamp)
    }

    pub fn front(&self) -> f64 {
        self.y + self.length / 2.0
    }

    pub fn rear(&self) -> f64 {
        self.y - self.length / 2.0
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let finite = [
            self.timestamp,
            self.x,
            self.y,
            self.speed,
            self.acceleration,
            self.length,
            self.width,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err("non-finite value".into());
        }
        if self.speed < 0.0 {
            return Err(format!("negative speed {}", self.speed));
        }
        if self.length <= 0.0 {
            return Err(format!("non-positive length {}", self.length));
        }
        if self.width <= 0.0 {
            return Err(format!("non-positive width {}", self.width));
        }
        Ok(())
    }

    /// Linear interpolation between `self` and `next` at time `t`. Lane and
    /// dimensions are taken from `self`.
    pub fn lerp(&self, next: &TrajectorySample, t: f64) -> TrajectorySample {
        let span = next.timestamp - self.timestamp;
        let w = if span > 0.0 {
            (t - self.timestamp) / span
        } else {
            0.0
        };
        let mix = |a: f64, b: f64| a + (b - a) * w;
        TrajectorySample {
            timestamp: t,
            x: mix(self.x, next.x),
            y: mix(self.y, next.y),
            speed: mix(self.speed, next.speed),
            acceleration: mix(self.acceleration, next.acceleration),
            ..*self
        }
    }
}

pub fn time_to_tick(t: f64) -> i64 {
    (t / SAMPLE_PERIOD).round() as i64
}

pub fn tick_to_time(tick: i64) -> f64 {
    tick as f64 / 10.0
}

/// All samples of a single vehicle, strictly ascending in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleTrack {
    vehicle_id: VehicleId,
    samples: Vec<TrajectorySample>,
}

impl VehicleTrack {
    pub fn new(vehicle_id: VehicleId, samples: Vec<TrajectorySample>) -> Result<Self> {
        let track_err = |message: String| Error::Track {
            vehicle: vehicle_id.0,
            message,
        };
        if let Some(s) = samples.iter().find(|s| s.vehicle_id != vehicle_id) {
            return Err(track_err(format!(
                "foreign sample from vehicle {}",
                s.vehicle_id
            )));
        }
        if let Some(w) = samples
            .windows(2)
            .find(|w| w[1].timestamp <= w[0].timestamp)
        {
            return Err(track_err(format!(
                "timestamps not strictly increasing at {}",
                w[1].timestamp
            )));
        }
        Ok(Self {
            vehicle_id,
            samples,
        })
    }

    pub fn vehicle_id(&self) -> VehicleId {
        self.vehicle_id
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first_tick(&self) -> Option<i64> {
        self.samples.first().map(TrajectorySample::tick)
    }

    pub fn last_tick(&self) -> Option<i64> {
        self.samples.last().map(TrajectorySample::tick)
    }

    /// Exact grid sample at `tick`, if recorded.
    pub fn at_tick(&self, tick: i64) -> Option<&TrajectorySample> {
        self.samples
            .binary_search_by_key(&tick, TrajectorySample::tick)
            .ok()
            .map(|i| &self.samples[i])
    }

    /// Sample at `tick`, interpolated from the neighbouring samples when the
    /// grid point itself is missing. `None` outside the track's time span.
    pub fn sample_at(&self, tick: i64) -> Option<TrajectorySample> {
        match self
            .samples
            .binary_search_by_key(&tick, TrajectorySample::tick)
        {
            Ok(i) => Some(self.samples[i]),
            Err(0) => None,
            Err(i) if i == self.samples.len() => None,
            Err(i) => Some(self.samples[i - 1].lerp(&self.samples[i], tick_to_time(tick))),
        }
    }

    fn is_on_grid(&self) -> bool {
        self.samples.iter().all(|s| {
            let scaled = s.timestamp / SAMPLE_PERIOD;
            (scaled - scaled.round()).abs() < 1e-6
        }) && self.samples.windows(2).all(|w| w[1].tick() > w[0].tick())
    }

    /// Resamples onto the 0.1 s grid by linear interpolation when the track was
    /// recorded at another rate. Tracks already on the grid are returned as is,
    /// gaps included.
    pub fn into_grid(self) -> VehicleTrack {
        if self.is_on_grid() || self.samples.len() < 2 {
            return self;
        }
        let first = (self.samples[0].timestamp / SAMPLE_PERIOD - 1e-9).ceil() as i64;
        let last =
            (self.samples[self.samples.len() - 1].timestamp / SAMPLE_PERIOD + 1e-9).floor() as i64;
        let mut out = Vec::with_capacity((last - first + 1).max(0) as usize);
        let mut j = 0;
        for tick in first..=last {
            let t = tick_to_time(tick);
            while j + 1 < self.samples.len() && self.samples[j + 1].timestamp <= t {
                j += 1;
            }
            let s = &self.samples[j];
            let resampled = match self.samples.get(j + 1) {
                Some(next) if s.timestamp < t => s.lerp(next, t),
                _ => TrajectorySample { timestamp: t, ..*s },
            };
            out.push(resampled);
        }
        VehicleTrack {
            vehicle_id: self.vehicle_id,
            samples: out,
        }
    }
}

/// Column separator of an input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DatasetFormat {
    /// Whitespace-separated, as in the original NGSIM text releases.
    #[default]
    NgsimText,
    /// Comma-separated; a leading header row is skipped.
    NgsimCsv,
}

impl DatasetFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DatasetFormat::NgsimCsv,
            _ => DatasetFormat::NgsimText,
        }
    }
}

pub fn parse_trajectory_file(path: &Path, format: DatasetFormat) -> Result<Vec<VehicleTrack>> {
    let file = File::open(path)?;
    parse_trajectories(BufReader::new(file), format)
}

/// Parses rows into one track per vehicle, sorted by vehicle id. Rows may come
/// in any order. A repeated timestamp for the same vehicle keeps the first row.
pub fn parse_trajectories<R: BufRead>(
    reader: R,
    format: DatasetFormat,
) -> Result<Vec<VehicleTrack>> {
    let mut by_vehicle: BTreeMap<VehicleId, Vec<TrajectorySample>> = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = match format {
            DatasetFormat::NgsimText => trimmed.split_whitespace().collect(),
            DatasetFormat::NgsimCsv => trimmed.split(',').map(str::trim).collect(),
        };
        if format == DatasetFormat::NgsimCsv
            && line_no == 1
            && fields.first().is_some_and(|f| f.parse::<f64>().is_err())
        {
            continue;
        }
        let sample = parse_row(&fields).map_err(|m| Error::row(line_no, m))?;
        by_vehicle
            .entry(sample.vehicle_id)
            .or_default()
            .push(sample);
    }

    by_vehicle
        .into_iter()
        .map(|(id, mut samples)| {
            samples.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
            samples.dedup_by(|b, a| a.timestamp == b.timestamp);
            VehicleTrack::new(id, samples).map(VehicleTrack::into_grid)
        })
        .collect()
}

pub fn parse_trajectory_str(input: &str, format: DatasetFormat) -> Result<Vec<VehicleTrack>> {
    parse_trajectories(input.as_bytes(), format)
}

fn parse_row(fields: &[&str]) -> std::result::Result<TrajectorySample, String> {
    if fields.len() != COLUMNS {
        return Err(format!(
            "expected {COLUMNS} columns, found {}",
            fields.len()
        ));
    }
    let num = |i: usize, name: &str| -> std::result::Result<f64, String> {
        fields[i]
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("bad {name} value {:?}", fields[i]))
    };
    let vehicle = fields[0]
        .parse::<u32>()
        .map_err(|_| format!("bad Vehicle_ID {:?}", fields[0]))?;
    let global_time_ms = num(3, "Global_Time")?;
    let length = num(8, "v_Length")? * FEET_TO_METRES;
    let lane = num(13, "Lane_ID")?;
    if lane < 0.0 || lane > u16::MAX as f64 || lane.fract() != 0.0 {
        return Err(format!("bad Lane_ID {:?}", fields[13]));
    }
    let sample = TrajectorySample {
        vehicle_id: VehicleId(vehicle),
        timestamp: global_time_ms / 1000.0,
        x: num(4, "Local_X")? * FEET_TO_METRES,
        y: num(5, "Local_Y")? * FEET_TO_METRES - length / 2.0,
        lane_id: lane as u16,
        speed: num(11, "v_Vel")? * FEET_TO_METRES,
        acceleration: num(12, "v_Acc")? * FEET_TO_METRES,
        length,
        width: num(9, "v_Width")? * FEET_TO_METRES,
    };
    sample.validate()?;
    Ok(sample)
}

/// Writes tracks in the whitespace-separated layout accepted by
/// [`parse_trajectories`]. Columns this crate does not model are filled with
/// zeros (v_Class is written as 2, passenger car).
pub fn write_trajectories<W: Write>(mut out: W, tracks: &[VehicleTrack]) -> Result<()> {
    for track in tracks {
        let total = track.len();
        for s in track.samples() {
            let ms = (s.timestamp * 1000.0).round() as i64;
            writeln!(
                out,
                "{} {} {} {} {} {} 0 0 {} {} 2 {} {} {} 0 0 0 0",
                s.vehicle_id,
                s.tick(),
                total,
                ms,
                s.x / FEET_TO_METRES,
                (s.y + s.length / 2.0) / FEET_TO_METRES,
                s.length / FEET_TO_METRES,
                s.width / FEET_TO_METRES,
                s.speed / FEET_TO_METRES,
                s.acceleration / FEET_TO_METRES,
                s.lane_id,
            )?;
        }
    }
    Ok(())
}
