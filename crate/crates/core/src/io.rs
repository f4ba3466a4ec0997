//! JSON-lines wire format for instances and event streams.
//!
//! The first line is a header carrying facilities and the facility metric,
//! every following line is an arrival or a departure:
//!
//! ```text
//! {"type":"header","facilities":[{"id":0,"cost":4.0}],"fdist":[[0]]}
//! {"type":"arrive","client":"c1","dist":[3]}
//! {"type":"arrive","client":"c2","nearest":0}
//! {"type":"depart","client":"c1"}
//! ```

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Number;

use crate::error::ModelError;
use crate::model::{FacilityId, Instance};

/// Where an arriving client sits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    /// Explicit distance to every facility.
    Distances(Vec<u64>),
    /// Collocated with a facility (tree and snapped streams).
    At(FacilityId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Arrive { client: String, location: Location },
    Depart { client: String },
}

impl Event {
    pub fn client(&self) -> &str {
        match self {
            Event::Arrive { client, .. } | Event::Depart { client } => client,
        }
    }

    pub fn is_arrival(&self) -> bool {
        matches!(self, Event::Arrive { .. })
    }
}

/// Facility part of an instance as it appears on the wire.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub costs: Vec<f64>,
    pub fdist: Vec<Vec<u64>>,
}

/// A validated sequence of events.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventStream {
    events: Vec<Event>,
}

impl EventStream {
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn arrivals(&self) -> usize {
        self.events.iter().filter(|e| e.is_arrival()).count()
    }

    pub fn has_departures(&self) -> bool {
        self.events.iter().any(|e| !e.is_arrival())
    }

    /// Problem size `n = |F| + number of arrivals`.
    pub fn n(&self, instance: &Instance) -> usize {
        instance.num_facilities() + self.arrivals()
    }

    /// Distance vector for an arrival, resolving collocated locations.
    pub fn distances(instance: &Instance, location: &Location) -> Result<Vec<u64>, ModelError> {
        match location {
            Location::Distances(d) => Ok(d.clone()),
            Location::At(i) => instance.facility_distances().get(*i).cloned().ok_or(ModelError::UnknownFacility(*i)),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct FacilitySpec {
    id: usize,
    cost: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Record {
    Header {
        facilities: Vec<FacilitySpec>,
        fdist: Vec<Vec<Number>>,
    },
    Arrive {
        client: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dist: Option<Vec<Number>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        nearest: Option<usize>,
    },
    Depart {
        client: String,
    },
}

fn to_distance(n: &Number, line: usize) -> Result<u64, ModelError> {
    if let Some(v) = n.as_u64() {
        return Ok(v);
    }
    match n.as_f64() {
        Some(f) if f >= 0.0 && f.fract() == 0.0 && f <= u64::MAX as f64 => Ok(f as u64),
        _ => Err(ModelError::NonIntegerDistance { line }),
    }
}

fn to_distances(v: &[Number], line: usize) -> Result<Vec<u64>, ModelError> {
    v.iter().map(|n| to_distance(n, line)).collect()
}

/// Reads a header line followed by events. Blank lines are skipped. Only the
/// syntax is checked here; see [`load_instance`] for semantic validation.
pub fn read_stream<R: BufRead>(reader: R) -> Result<(Header, Vec<Event>), ModelError> {
    let mut header = None;
    let mut events = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line.map_err(|e| ModelError::Malformed { line: line_no, msg: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record =
            serde_json::from_str(&line).map_err(|e| ModelError::Malformed { line: line_no, msg: e.to_string() })?;
        match rec {
            Record::Header { facilities, fdist } => {
                if header.is_some() {
                    return Err(ModelError::Malformed { line: line_no, msg: "second header".into() });
                }
                let mut costs = Vec::with_capacity(facilities.len());
                for (k, f) in facilities.iter().enumerate() {
                    if f.id != k {
                        return Err(ModelError::FacilityId { expected: k, found: f.id });
                    }
                    costs.push(f.cost);
                }
                let fdist = fdist.iter().map(|row| to_distances(row, line_no)).collect::<Result<_, _>>()?;
                header = Some(Header { costs, fdist });
            }
            Record::Arrive { client, dist, nearest } => {
                if header.is_none() {
                    return Err(ModelError::Malformed { line: line_no, msg: "event before header".into() });
                }
                let location = match (dist, nearest) {
                    (Some(d), None) => Location::Distances(to_distances(&d, line_no)?),
                    (None, Some(i)) => Location::At(i),
                    _ => {
                        return Err(ModelError::Malformed {
                            line: line_no,
                            msg: "arrival needs exactly one of dist or nearest".into(),
                        })
                    }
                };
                events.push(Event::Arrive { client, location });
            }
            Record::Depart { client } => {
                if header.is_none() {
                    return Err(ModelError::Malformed { line: line_no, msg: "event before header".into() });
                }
                events.push(Event::Depart { client });
            }
        }
    }
    let header = header.ok_or(ModelError::Malformed { line: 0, msg: "missing header".into() })?;
    Ok((header, events))
}

/// Validates a header and its events. The returned instance holds only the
/// facilities; clients are registered by the algorithms as they arrive.
pub fn load_instance(header: Header, events: Vec<Event>) -> Result<(Instance, EventStream), ModelError> {
    let instance = Instance::new(header.costs, header.fdist)?;
    let nf = instance.num_facilities();
    let mut active = HashSet::new();
    for e in &events {
        match e {
            Event::Arrive { client, location } => {
                match location {
                    Location::Distances(d) if d.len() != nf => {
                        return Err(ModelError::DistanceLength { expected: nf, got: d.len() })
                    }
                    Location::At(i) if *i >= nf => return Err(ModelError::UnknownFacility(*i)),
                    _ => {}
                }
                if !active.insert(client.as_str()) {
                    return Err(ModelError::DuplicateClient(client.clone()));
                }
            }
            Event::Depart { client } => {
                if !active.remove(client.as_str()) {
                    return Err(ModelError::UnknownClient(client.clone()));
                }
            }
        }
    }
    Ok((instance, EventStream { events }))
}

/// Reads and validates in one step.
pub fn parse<R: BufRead>(reader: R) -> Result<(Instance, EventStream), ModelError> {
    let (header, events) = read_stream(reader)?;
    load_instance(header, events)
}

pub fn write_stream<W: Write>(mut w: W, header: &Header, events: &[Event]) -> std::io::Result<()> {
    let head = Record::Header {
        facilities: header.costs.iter().enumerate().map(|(id, &cost)| FacilitySpec { id, cost }).collect(),
        fdist: header.fdist.iter().map(|r| r.iter().map(|&d| Number::from(d)).collect()).collect(),
    };
    serde_json::to_writer(&mut w, &head)?;
    writeln!(w)?;
    for e in events {
        let rec = match e {
            Event::Arrive { client, location: Location::Distances(d) } => Record::Arrive {
                client: client.clone(),
                dist: Some(d.iter().map(|&x| Number::from(x)).collect()),
                nearest: None,
            },
            Event::Arrive { client, location: Location::At(i) } => {
                Record::Arrive { client: client.clone(), dist: None, nearest: Some(*i) }
            }
            Event::Depart { client } => Record::Depart { client: client.clone() },
        };
        serde_json::to_writer(&mut w, &rec)?;
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const INST_A: &str = r#"{"type":"header","facilities":[{"id":0,"cost":4.0},{"id":1,"cost":4.0}],"fdist":[[0,10],[10,0]]}
{"type":"arrive","client":"c1","dist":[0,10]}
{"type":"arrive","client":"c2","dist":[1,9]}
{"type":"arrive","client":"c3","dist":[9,1]}
{"type":"arrive","client":"c4","dist":[10,0]}
"#;

    #[test]
    fn loads_two_facility_line() {
        let (inst, stream) = parse(INST_A.as_bytes()).unwrap();
        assert_eq!(inst.num_facilities(), 2);
        assert_eq!(inst.diameter(), 10);
        assert_eq!(stream.arrivals(), 4);
        assert_eq!(stream.n(&inst), 6);
    }

    fn err(text: &str) -> ModelError {
        parse(text.as_bytes()).unwrap_err()
    }

    #[test]
    fn rejects_bad_input() {
        let h = r#"{"type":"header","facilities":[{"id":0,"cost":1.0},{"id":1,"cost":1.0}],"fdist":[[0,2],[2,0]]}"#;
        assert!(matches!(
            err(r#"{"type":"header","facilities":[{"id":0,"cost":1.0},{"id":1,"cost":1.0}],"fdist":[[0,2],[3,0]]}"#),
            ModelError::Asymmetric { .. }
        ));
        assert!(matches!(
            err(r#"{"type":"header","facilities":[{"id":0,"cost":1.0}],"fdist":[[1]]}"#),
            ModelError::NonzeroDiagonal(0)
        ));
        assert!(matches!(
            err(&format!("{h}\n{{\"type\":\"arrive\",\"client\":\"a\",\"dist\":[1.5,2]}}")),
            ModelError::NonIntegerDistance { line: 2 }
        ));
        assert!(matches!(
            err(&format!("{h}\n{{\"type\":\"arrive\",\"client\":\"a\",\"dist\":[1]}}")),
            ModelError::DistanceLength { expected: 2, got: 1 }
        ));
        assert!(matches!(
            err(&format!("{h}\n{{\"type\":\"depart\",\"client\":\"zz\"}}")),
            ModelError::UnknownClient(_)
        ));
        assert!(matches!(
            err(&format!(
                "{h}\n{{\"type\":\"arrive\",\"client\":\"a\",\"nearest\":0}}\n{{\"type\":\"arrive\",\"client\":\"a\",\"nearest\":1}}"
            )),
            ModelError::DuplicateClient(_)
        ));
        assert!(matches!(err("{not json"), ModelError::Malformed { line: 1, .. }));
        assert!(matches!(err(""), ModelError::Malformed { .. }));
    }

    #[test]
    fn depart_then_rearrive_is_allowed() {
        let text = r#"{"type":"header","facilities":[{"id":0,"cost":1.0}],"fdist":[[0]]}
{"type":"arrive","client":"a","nearest":0}
{"type":"depart","client":"a"}
{"type":"arrive","client":"a","nearest":0}"#;
        let (_, s) = parse(text.as_bytes()).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.has_departures());
    }

    #[test]
    fn write_read_round_trip() {
        let (header, events) = read_stream(INST_A.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_stream(&mut buf, &header, &events).unwrap();
        let (h2, e2) = read_stream(buf.as_slice()).unwrap();
        assert_eq!(header, h2);
        assert_eq!(events, e2);
    }
}
