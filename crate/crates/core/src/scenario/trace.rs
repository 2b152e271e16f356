use std::fmt;

use serde::{Serialize, Serializer};
use serde_json::Value;

use crate::promise::Time;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Partition {
    Public,
    Private,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Script,
    Engine,
}

/// A record address: partition plus its sequence number there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordRef {
    pub partition: Partition,
    pub seq: u64,
}

impl fmt::Display for RecordRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.partition {
            Partition::Public => "pub",
            Partition::Private => "priv",
        };
        write!(f, "{p}/{}", self.seq)
    }
}

impl Serialize for RecordRef {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub time: Time,
    /// Dense from 0 within the record's partition.
    pub seq: u64,
    pub partition: Partition,
    pub origin: Origin,
    pub cause: Option<RecordRef>,
    pub kind: &'static str,
    pub payload: Value,
    /// Index of the scripted action this record stands for.
    pub script_index: Option<usize>,
}

impl Record {
    pub fn reference(&self) -> RecordRef {
        RecordRef {
            partition: self.partition,
            seq: self.seq,
        }
    }
}

#[derive(Serialize)]
struct Line<'a> {
    time: Time,
    seq: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    partition: Option<&'static str>,
    origin: Origin,
    #[serde(skip_serializing_if = "Option::is_none")]
    cause: Option<RecordRef>,
    kind: &'static str,
    payload: &'a Value,
}

/// Records in emission order. Within each partition this is the
/// `(time, seq)` order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    records: Vec<Record>,
    next_public: u64,
    next_private: u64,
}

impl Trace {
    pub fn new() -> Trace {
        Trace::default()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        time: Time,
        partition: Partition,
        origin: Origin,
        cause: Option<RecordRef>,
        kind: &'static str,
        payload: Value,
        script_index: Option<usize>,
    ) -> RecordRef {
        let counter = match partition {
            Partition::Public => &mut self.next_public,
            Partition::Private => &mut self.next_private,
        };
        let seq = *counter;
        *counter += 1;
        self.records.push(Record {
            time,
            seq,
            partition,
            origin,
            cause,
            kind,
            payload,
            script_index,
        });
        RecordRef { partition, seq }
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn public(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| r.partition == Partition::Public)
    }

    pub fn private(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| r.partition == Partition::Private)
    }

    pub fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a Record> + 'a {
        self.records.iter().filter(move |r| r.kind == kind)
    }

    pub fn get(&self, r: RecordRef) -> Option<&Record> {
        self.records.iter().find(|x| x.reference() == r)
    }

    /// Emission index of a record, for ordering references across
    /// partitions.
    pub fn position(&self, r: RecordRef) -> Option<usize> {
        self.records.iter().position(|x| x.reference() == r)
    }

    pub fn error_count(&self) -> usize {
        self.of_kind("error").count()
    }

    /// One JSON object per line: `time, seq, origin, cause, kind, payload`.
    pub fn export_public(&self) -> String {
        self.export(self.public(), false)
    }

    /// Both partitions, interleaved in emission order, each line tagged
    /// with its partition.
    pub fn export_full(&self) -> String {
        self.export(self.records.iter(), true)
    }

    fn export<'a>(&'a self, records: impl Iterator<Item = &'a Record>, tag: bool) -> String {
        let mut out = String::new();
        for r in records {
            let line = Line {
                time: r.time,
                seq: r.seq,
                partition: tag.then_some(match r.partition {
                    Partition::Public => "public",
                    Partition::Private => "private",
                }),
                origin: r.origin,
                cause: r.cause,
                kind: r.kind,
                payload: &r.payload,
            };
            out.push_str(&serde_json::to_string(&line).expect("trace records serialize"));
            out.push('\n');
        }
        out
    }
}
