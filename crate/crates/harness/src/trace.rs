//! Trace files: a metadata record, then one `rud_update` frame per line.

use std::io::{BufRead, Write};

use lanemerge_orchestrator::protocol::{decode_message, encode_frame, Message, PROTOCOL_VERSION};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::scenario::{ScenarioTrace, TraceMeta};

pub const META_TYPE: &str = "trace_meta";

#[derive(Serialize, Deserialize)]
struct MetaRecord {
    #[serde(rename = "type")]
    kind: String,
    version: u32,
    payload: TraceMeta,
}

pub fn write_trace<W: Write>(trace: &ScenarioTrace, mut out: W) -> Result<()> {
    let meta = MetaRecord {
        kind: META_TYPE.to_string(),
        version: PROTOCOL_VERSION,
        payload: trace.meta.clone(),
    };
    serde_json::to_writer(&mut out, &meta).map_err(std::io::Error::other)?;
    out.write_all(b"\n")?;
    for m in &trace.messages {
        out.write_all(&encode_frame(&Message::RudUpdate(m.clone())))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace<R: BufRead>(input: R) -> Result<ScenarioTrace> {
    let err = |line: usize, message: String| HarnessError::Trace { line, message };
    let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
    let meta = loop {
        let Some((n, line)) = lines.next() else {
            return Err(err(1, "missing metadata record".into()));
        };
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: MetaRecord = serde_json::from_str(&line).map_err(|e| err(n, e.to_string()))?;
        if record.kind != META_TYPE {
            return Err(err(
                n,
                format!("expected a {META_TYPE} record, found {:?}", record.kind),
            ));
        }
        if record.version != PROTOCOL_VERSION {
            return Err(err(n, format!("unsupported version {}", record.version)));
        }
        record
            .payload
            .subscription
            .validate()
            .map_err(|e| err(n, e.to_string()))?;
        break record.payload;
    };
    let mut messages = Vec::new();
    for (n, line) in lines {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        match decode_message(line.as_bytes()).map_err(|e| err(n, e.to_string()))? {
            Message::RudUpdate(r) => {
                if messages.last().is_some_and(
                    |p: &lanemerge_orchestrator::protocol::RoadUserDescription| {
                        r.timestamp < p.timestamp
                    },
                ) {
                    return Err(err(n, "updates are not in timestamp order".into()));
                }
                messages.push(r);
            }
            other => return Err(err(n, format!("unexpected {} message", other.kind()))),
        }
    }
    Ok(ScenarioTrace { meta, messages })
}
