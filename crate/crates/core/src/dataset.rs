//! CSV file of labeled samples. One header row naming every column, then one
//! row per sample:
//!
//! `window,index,vehicle_id,<13 feature columns>,recommendation,accel_label,heading_label,flagged`
//!
//! Booleans are written as `0`/`1`.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::features::{FEATURE_COUNT, FEATURE_NAMES};
use crate::label::LabeledSample;
use crate::trajectory::VehicleId;

const LEADING: [&str; 3] = ["window", "index", "vehicle_id"];
const TRAILING: [&str; 4] = ["recommendation", "accel_label", "heading_label", "flagged"];

pub fn header() -> Vec<&'static str> {
    LEADING
        .iter()
        .chain(FEATURE_NAMES.iter())
        .chain(TRAILING.iter())
        .copied()
        .collect()
}

pub fn write_dataset<W: Write>(out: W, samples: &[LabeledSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header())?;
    for s in samples {
        let mut row: Vec<String> = Vec::with_capacity(header().len());
        row.push(s.window.to_string());
        row.push(s.index.to_string());
        row.push(s.vehicle_id.to_string());
        row.extend(s.features.iter().map(f64::to_string));
        row.push(u8::from(s.recommendation).to_string());
        row.push(s.accel_label.to_string());
        row.push(s.heading_label.to_string());
        row.push(u8::from(s.flagged).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(input: R) -> Result<Vec<LabeledSample>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let expected = header();
    let found = reader.headers()?.clone();
    if found.iter().ne(expected.iter().copied()) {
        return Err(Error::row(1, "unexpected dataset header"));
    }
    let mut out = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record?;
        if record.len() != expected.len() {
            return Err(Error::row(
                line,
                format!("expected {} fields", expected.len()),
            ));
        }
        let field = |i: usize| &record[i];
        let int = |i: usize| -> Result<u64> {
            field(i)
                .parse::<u64>()
                .map_err(|_| Error::row(line, format!("bad {} {:?}", expected[i], field(i))))
        };
        let real = |i: usize| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::row(line, format!("bad {} {:?}", expected[i], field(i))))
        };
        let flag = |i: usize| -> Result<bool> {
            match field(i) {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::row(line, format!("bad {} {other:?}", expected[i]))),
            }
        };
        let mut features = [0.0; FEATURE_COUNT];
        for (k, slot) in features.iter_mut().enumerate() {
            *slot = real(3 + k)?;
        }
        let base = 3 + FEATURE_COUNT;
        let heading = real(base + 2)?;
        if !(0.0..360.0).contains(&heading) {
            return Err(Error::row(
                line,
                format!("heading {heading} outside [0, 360)"),
            ));
        }
        let vehicle =
            u32::try_from(int(2)?).map_err(|_| Error::row(line, "vehicle id out of range"))?;
        out.push(LabeledSample {
            window: int(0)? as usize,
            index: int(1)? as usize,
            vehicle_id: VehicleId(vehicle),
            features,
            recommendation: flag(base)?,
            accel_label: real(base + 1)?,
            heading_label: heading,
            flagged: flag(base + 3)?,
        });
    }
    Ok(out)
}
