//! Lane-change detection and extraction of fixed-length scenario windows.
//!
//! A window holds 70 samples of the lane-changing vehicle (M): 40 before the
//! first sample in the new lane and 30 from it onward, i.e. 4.0 s before
//! through 2.9 s after the event on the 10 Hz grid. The preceding (P) and
//! following (F) vehicles of the target lane are chosen at the event instant
//! and tracked through the whole window.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{TrajectorySample, VehicleId, VehicleTrack};

pub const WINDOW_LEN: usize = 70;
/// Position of the event sample inside a window.
pub const EVENT_OFFSET: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneChangeEvent {
    pub vehicle_id: VehicleId,
    /// Index into the track of the first sample in the new lane.
    pub event_index: usize,
    pub from_lane: u16,
    pub to_lane: u16,
    pub event_time: f64,
}

impl LaneChangeEvent {
    pub fn event_tick(&self) -> i64 {
        crate::trajectory::time_to_tick(self.event_time)
    }

    fn window_ticks(&self) -> std::ops::RangeInclusive<i64> {
        let e = self.event_tick();
        e - EVENT_OFFSET as i64..=e + (WINDOW_LEN - EVENT_OFFSET) as i64 - 1
    }
}

/// A neighbour's samples aligned with the merging vehicle's window. Entries
/// are `None` where the neighbour is not on the road.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborTrack {
    pub vehicle_id: VehicleId,
    pub samples: Vec<Option<TrajectorySample>>,
}

impl NeighborTrack {
    pub fn at(&self, index: usize) -> Option<&TrajectorySample> {
        self.samples.get(index).and_then(Option::as_ref)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioWindow {
    pub event: LaneChangeEvent,
    pub m_samples: Vec<TrajectorySample>,
    pub preceding: Option<NeighborTrack>,
    pub following: Option<NeighborTrack>,
}

impl ScenarioWindow {
    pub fn event_sample(&self) -> &TrajectorySample {
        &self.m_samples[EVENT_OFFSET]
    }

    pub fn preceding_at(&self, index: usize) -> Option<&TrajectorySample> {
        self.preceding.as_ref().and_then(|n| n.at(index))
    }

    pub fn following_at(&self, index: usize) -> Option<&TrajectorySample> {
        self.following.as_ref().and_then(|n| n.at(index))
    }

    /// Checks the structural invariants of a window read from outside.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.m_samples.len() != WINDOW_LEN {
            return Err(format!(
                "expected {WINDOW_LEN} merging-vehicle samples, found {}",
                self.m_samples.len()
            ));
        }
        if self.event.from_lane == self.event.to_lane {
            return Err("event does not change lane".into());
        }
        let first = self.m_samples[0].tick();
        for (i, s) in self.m_samples.iter().enumerate() {
            if s.tick() != first + i as i64 {
                return Err(format!("sample {i} is off the 0.1 s grid"));
            }
            if s.vehicle_id != self.event.vehicle_id {
                return Err(format!("sample {i} belongs to vehicle {}", s.vehicle_id));
            }
            if !(s.speed >= 0.0 && s.length > 0.0 && s.width > 0.0)
                || ![s.x, s.y, s.acceleration, s.timestamp]
                    .iter()
                    .all(|v| v.is_finite())
            {
                return Err(format!("sample {i} has invalid kinematics"));
            }
        }
        if self.event_sample().tick() != self.event.event_tick() {
            return Err("event sample is not at the expected offset".into());
        }
        for (name, n) in [
            ("preceding", &self.preceding),
            ("following", &self.following),
        ] {
            if let Some(n) = n {
                if n.samples.len() != WINDOW_LEN {
                    return Err(format!("{name} track has {} entries", n.samples.len()));
                }
                for (i, s) in n.samples.iter().enumerate() {
                    if let Some(s) = s {
                        if s.tick() != first + i as i64 || !(s.length > 0.0) {
                            return Err(format!("{name} sample {i} is misaligned or invalid"));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    InsufficientHistory,
    InsufficientFuture,
    MissingSamples,
    Aborted,
}

impl SkipReason {
    pub fn code(&self) -> &'static str {
        match self {
            SkipReason::InsufficientHistory => "insufficient_history",
            SkipReason::InsufficientFuture => "insufficient_future",
            SkipReason::MissingSamples => "missing_samples",
            SkipReason::Aborted => "aborted",
        }
    }
}

/// One event per adjacent pair of samples whose lane ids differ.
pub fn detect_lane_changes(track: &VehicleTrack) -> Vec<LaneChangeEvent> {
    track
        .samples()
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0].lane_id != w[1].lane_id)
        .map(|(i, w)| LaneChangeEvent {
            vehicle_id: track.vehicle_id(),
            event_index: i + 1,
            from_lane: w[0].lane_id,
            to_lane: w[1].lane_id,
            event_time: w[1].timestamp,
        })
        .collect()
}

/// Cuts the 70-sample window around `event`. Neighbours are left empty.
pub fn extract_window(
    track: &VehicleTrack,
    event: &LaneChangeEvent,
) -> std::result::Result<ScenarioWindow, SkipReason> {
    let ticks = event.window_ticks();
    let (Some(first), Some(last)) = (track.first_tick(), track.last_tick()) else {
        return Err(SkipReason::InsufficientHistory);
    };
    if first > *ticks.start() {
        return Err(SkipReason::InsufficientHistory);
    }
    if last < *ticks.end() {
        return Err(SkipReason::InsufficientFuture);
    }
    let m_samples = ticks
        .map(|t| track.at_tick(t).copied())
        .collect::<Option<Vec<_>>>()
        .ok_or(SkipReason::MissingSamples)?;
    Ok(ScenarioWindow {
        event: *event,
        m_samples,
        preceding: None,
        following: None,
    })
}

/// Fills P and F from the vehicles occupying the target lane at the event
/// instant: P is the nearest one ahead of M, F the nearest one behind.
pub fn assign_neighbors(all_tracks: &[VehicleTrack], mut window: ScenarioWindow) -> ScenarioWindow {
    let event_tick = window.event.event_tick();
    let m_y = window.event_sample().y;
    let target = window.event.to_lane;

    let mut ahead: Option<(f64, &VehicleTrack)> = None;
    let mut behind: Option<(f64, &VehicleTrack)> = None;
    for track in all_tracks {
        if track.vehicle_id() == window.event.vehicle_id {
            continue;
        }
        match (track.first_tick(), track.last_tick()) {
            (Some(a), Some(b)) if a <= event_tick && event_tick <= b => {}
            _ => continue,
        }
        let Some(s) = track.sample_at(event_tick) else {
            continue;
        };
        if s.lane_id != target {
            continue;
        }
        if s.y > m_y && ahead.is_none_or(|(y, _)| s.y < y) {
            ahead = Some((s.y, track));
        } else if s.y < m_y && behind.is_none_or(|(y, _)| s.y > y) {
            behind = Some((s.y, track));
        }
    }

    let first_tick = window.m_samples[0].tick();
    let align = |track: &VehicleTrack| NeighborTrack {
        vehicle_id: track.vehicle_id(),
        samples: (0..WINDOW_LEN as i64)
            .map(|i| track.sample_at(first_tick + i))
            .collect(),
    };
    window.preceding = ahead.map(|(_, t)| align(t));
    window.following = behind.map(|(_, t)| align(t));
    window
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExtractOptions {
    /// Drop windows in which the vehicle returns to its original lane.
    pub skip_aborted: bool,
}

#[derive(Debug, Default)]
pub struct ExtractReport {
    pub windows: Vec<ScenarioWindow>,
    pub events: usize,
    pub skipped: HashMap<SkipReason, usize>,
}

/// Runs detection, windowing and neighbour assignment over every track.
pub fn extract_windows(tracks: &[VehicleTrack], options: ExtractOptions) -> ExtractReport {
    let mut report = ExtractReport::default();
    for track in tracks {
        let events = detect_lane_changes(track);
        report.events += events.len();
        for event in &events {
            let window = match extract_window(track, event) {
                Ok(w) => w,
                Err(reason) => {
                    *report.skipped.entry(reason).or_default() += 1;
                    continue;
                }
            };
            if options.skip_aborted && is_aborted(event, &events) {
                *report.skipped.entry(SkipReason::Aborted).or_default() += 1;
                continue;
            }
            report.windows.push(assign_neighbors(tracks, window));
        }
    }
    report
}

fn is_aborted(event: &LaneChangeEvent, events: &[LaneChangeEvent]) -> bool {
    let span = event.window_ticks();
    events.iter().any(|other| {
        other.event_tick() > event.event_tick()
            && span.contains(&other.event_tick())
            && other.to_lane == event.from_lane
    })
}

/// Writes one JSON object per line.
pub fn write_windows<W: Write>(mut out: W, windows: &[ScenarioWindow]) -> Result<()> {
    for w in windows {
        serde_json::to_writer(&mut out, w).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn parse_window_record(line: &str) -> std::result::Result<ScenarioWindow, String> {
    let window: ScenarioWindow = serde_json::from_str(line).map_err(|e| e.to_string())?;
    window.validate()?;
    Ok(window)
}

pub fn read_windows<R: BufRead>(reader: R) -> Result<Vec<ScenarioWindow>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_window_record(&line).map_err(|m| Error::row(idx + 1, m))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::tick_to_time;

    fn sample(id: u32, tick: i64, lane: u16, y: f64) -> TrajectorySample {
        TrajectorySample {
            vehicle_id: VehicleId(id),
            timestamp: tick_to_time(tick),
            x: 0.0,
            y,
            lane_id: lane,
            speed: 20.0,
            acceleration: 0.0,
            length: 4.0,
            width: 2.0,
        }
    }

    fn track_with_lanes(lanes: &[u16]) -> VehicleTrack {
        let samples = lanes
            .iter()
            .enumerate()
            .map(|(i, &l)| sample(1, i as i64, l, i as f64))
            .collect();
        VehicleTrack::new(VehicleId(1), samples).unwrap()
    }

    /// Track on lane 1 over `[from, to]` ticks, switching to lane 2 at `change`.
    fn changing_track(id: u32, from: i64, to: i64, change: i64) -> VehicleTrack {
        let samples = (from..=to)
            .map(|t| sample(id, t, if t < change { 1 } else { 2 }, t as f64 * 2.0))
            .collect();
        VehicleTrack::new(VehicleId(id), samples).unwrap()
    }

    fn lane_track(id: u32, lane: u16, from: i64, to: i64, offset: f64) -> VehicleTrack {
        let samples = (from..=to)
            .map(|t| sample(id, t, lane, t as f64 * 2.0 + offset))
            .collect();
        VehicleTrack::new(VehicleId(id), samples).unwrap()
    }

    #[test]
    fn single_transition() {
        let events = detect_lane_changes(&track_with_lanes(&[2, 2, 2, 3, 3]));
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].event_index, 3);
        assert_eq!((events[0].from_lane, events[0].to_lane), (2, 3));
    }

    #[test]
    fn no_transition() {
        assert!(detect_lane_changes(&track_with_lanes(&[4, 4, 4])).is_empty());
    }

    #[test]
    fn every_transition_counts() {
        let events = detect_lane_changes(&track_with_lanes(&[3, 4, 3]));
        let idx: Vec<usize> = events.iter().map(|e| e.event_index).collect();
        assert_eq!(idx, vec![1, 2]);
    }

    #[test]
    fn window_spans_four_seconds_before_to_three_after() {
        // covers [90, 110] s, change at 100 s
        let track = changing_track(1, 900, 1100, 1000);
        let events = detect_lane_changes(&track);
        let w = extract_window(&track, &events[0]).unwrap();
        assert_eq!(w.m_samples.len(), 70);
        assert!((w.m_samples[0].timestamp - 96.0).abs() < 1e-9);
        assert!((w.m_samples[69].timestamp - 102.9).abs() < 1e-9);
        assert!((w.event_sample().timestamp - 100.0).abs() < 1e-9);
        w.validate().unwrap();
    }

    #[test]
    fn early_event_lacks_history() {
        let track = changing_track(1, 0, 200, 20);
        let events = detect_lane_changes(&track);
        assert_eq!(
            extract_window(&track, &events[0]),
            Err(SkipReason::InsufficientHistory)
        );
    }

    #[test]
    fn late_event_lacks_future() {
        let track = changing_track(1, 0, 200, 200);
        let events = detect_lane_changes(&track);
        assert_eq!(
            extract_window(&track, &events[0]),
            Err(SkipReason::InsufficientFuture)
        );
    }

    #[test]
    fn gap_inside_span_is_skipped() {
        let samples = (900..=1100)
            .filter(|&t| t != 980)
            .map(|t| sample(1, t, if t < 1000 { 1 } else { 2 }, t as f64))
            .collect();
        let track = VehicleTrack::new(VehicleId(1), samples).unwrap();
        let events = detect_lane_changes(&track);
        assert_eq!(
            extract_window(&track, &events[0]),
            Err(SkipReason::MissingSamples)
        );
    }

    fn window_with_neighbours(others: Vec<VehicleTrack>) -> ScenarioWindow {
        let m = changing_track(1, 900, 1100, 1000);
        let events = detect_lane_changes(&m);
        let w = extract_window(&m, &events[0]).unwrap();
        let mut all = vec![m];
        all.extend(others);
        assign_neighbors(&all, w)
    }

    #[test]
    fn nearest_ahead_and_behind() {
        let w = window_with_neighbours(vec![
            lane_track(2, 2, 900, 1100, 30.0),
            lane_track(3, 2, 900, 1100, -20.0),
        ]);
        assert_eq!(w.preceding.as_ref().unwrap().vehicle_id, VehicleId(2));
        assert_eq!(w.following.as_ref().unwrap().vehicle_id, VehicleId(3));
        let e = EVENT_OFFSET;
        assert!(w.following_at(e).unwrap().y < w.m_samples[e].y);
        assert!(w.m_samples[e].y < w.preceding_at(e).unwrap().y);
    }

    #[test]
    fn empty_target_lane() {
        let w = window_with_neighbours(vec![lane_track(2, 1, 900, 1100, 30.0)]);
        assert!(w.preceding.is_none());
        assert!(w.following.is_none());
    }

    #[test]
    fn preceding_is_the_closest_ahead() {
        let w = window_with_neighbours(vec![
            lane_track(2, 2, 900, 1100, 25.0),
            lane_track(3, 2, 900, 1100, 10.0),
        ]);
        assert_eq!(w.preceding.as_ref().unwrap().vehicle_id, VehicleId(3));
        assert!(w.following.is_none());
    }

    #[test]
    fn neighbour_leaving_early_is_partially_present() {
        let w = window_with_neighbours(vec![lane_track(2, 2, 990, 1010, 30.0)]);
        let p = w.preceding.unwrap();
        assert_eq!(p.samples.len(), WINDOW_LEN);
        assert!(p.samples[0].is_none());
        assert!(p.samples[EVENT_OFFSET].is_some());
        assert!(p.samples[69].is_none());
    }

    #[test]
    fn neighbour_gaps_are_interpolated() {
        let samples = (900..=1100)
            .filter(|t| t % 3 != 0)
            .map(|t| sample(2, t, 2, t as f64 * 2.0 + 30.0))
            .collect();
        let p = VehicleTrack::new(VehicleId(2), samples).unwrap();
        let w = window_with_neighbours(vec![p]);
        let p = w.preceding.unwrap();
        assert!(p.samples.iter().all(Option::is_some));
        for s in p.samples.iter().flatten() {
            assert!((s.y - (s.tick() as f64 * 2.0 + 30.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn aborted_merge_filter() {
        let samples = (900..=1100)
            .map(|t| {
                sample(
                    1,
                    t,
                    if (1000..1020).contains(&t) { 2 } else { 1 },
                    t as f64,
                )
            })
            .collect();
        let track = VehicleTrack::new(VehicleId(1), samples).unwrap();
        let tracks = vec![track];
        let kept = extract_windows(&tracks, ExtractOptions::default());
        assert_eq!(kept.windows.len(), 2);
        let filtered = extract_windows(&tracks, ExtractOptions { skip_aborted: true });
        assert_eq!(filtered.windows.len(), 1);
        assert_eq!(filtered.skipped[&SkipReason::Aborted], 1);
    }

    #[test]
    fn window_records_round_trip() {
        let w = window_with_neighbours(vec![lane_track(2, 2, 900, 1100, 30.0)]);
        let mut buf = Vec::new();
        write_windows(&mut buf, std::slice::from_ref(&w)).unwrap();
        let back = read_windows(buf.as_slice()).unwrap();
        assert_eq!(back, vec![w]);
    }

    #[test]
    fn truncated_window_record_is_rejected() {
        let w = window_with_neighbours(vec![]);
        let mut value = serde_json::to_value(&w).unwrap();
        value["m_samples"].as_array_mut().unwrap().pop();
        let err = parse_window_record(&value.to_string()).unwrap_err();
        assert!(err.contains("70"), "{err}");
    }
}
