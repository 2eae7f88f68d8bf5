use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sites::{csv_error, AntennaRegistry};
use crate::error::{validation, Error, Result};

/// One call-detail record as it appears in `cdr.csv`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CdrEvent {
    pub timestamp: i64,
    pub user_id: String,
    pub antenna_id: String,
}

/// A record resolved against a registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Visit {
    pub timestamp: i64,
    pub antenna: usize,
}

/// One user's visits in ascending time order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub user_id: String,
    pub visits: Vec<Visit>,
}

impl Trajectory {
    /// Consecutive visit pairs.
    pub fn pairs(&self) -> impl Iterator<Item = (Visit, Visit)> + '_ {
        self.visits.windows(2).map(|w| (w[0], w[1]))
    }
}

/// Half-open `[start, end)` interval of Unix seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StudyWindow {
    pub start: i64,
    pub end: i64,
}

impl StudyWindow {
    pub fn new(start: i64, end: i64) -> Result<Self> {
        if end <= start {
            return Err(validation!("study window {start}:{end} is empty"));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, t: i64) -> bool {
        (self.start..self.end).contains(&t)
    }
}

#[derive(Debug, Clone, Default)]
pub struct EventOptions<'a> {
    pub window: Option<StudyWindow>,
    /// Original antenna id to surviving id, from co-location merging.
    pub remap: Option<&'a BTreeMap<String, String>>,
}

/// Trajectories grouped by user (ascending user id) plus drop counters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    pub trajectories: Vec<Trajectory>,
    pub n_events: usize,
    pub dropped_unknown_antenna: usize,
    pub dropped_outside_window: usize,
}

impl EventLog {
    pub fn user(&self, id: &str) -> Option<&Trajectory> {
        self.trajectories
            .binary_search_by(|t| t.user_id.as_str().cmp(id))
            .ok()
            .map(|k| &self.trajectories[k])
    }
}

/// Groups records by user and sorts each group by timestamp; equal
/// timestamps keep input order.
pub fn events_from_records<I>(records: I, reg: &AntennaRegistry, opts: &EventOptions<'_>) -> EventLog
where
    I: IntoIterator<Item = CdrEvent>,
{
    let mut by_user: BTreeMap<String, Vec<Visit>> = BTreeMap::new();
    let mut log = EventLog::default();
    for ev in records {
        if let Some(w) = opts.window {
            if !w.contains(ev.timestamp) {
                log.dropped_outside_window += 1;
                continue;
            }
        }
        let id = match opts.remap.and_then(|m| m.get(&ev.antenna_id)) {
            Some(mapped) => mapped.as_str(),
            None => ev.antenna_id.as_str(),
        };
        let Some(antenna) = reg.index_of(id) else {
            log.dropped_unknown_antenna += 1;
            continue;
        };
        log.n_events += 1;
        by_user.entry(ev.user_id).or_default().push(Visit {
            timestamp: ev.timestamp,
            antenna,
        });
    }
    log.trajectories = by_user
        .into_iter()
        .map(|(user_id, mut visits)| {
            visits.sort_by_key(|v| v.timestamp);
            Trajectory { user_id, visits }
        })
        .collect();
    log
}

pub fn load_events(path: impl AsRef<Path>, reg: &AntennaRegistry) -> Result<EventLog> {
    load_events_with(path, reg, &EventOptions::default())
}

/// Reads `timestamp,user_id,antenna_id` rows (integer Unix seconds).
pub fn load_events_with(
    path: impl AsRef<Path>,
    reg: &AntennaRegistry,
    opts: &EventOptions<'_>,
) -> Result<EventLog> {
    let records = read_cdr(path)?;
    Ok(events_from_records(records, reg, opts))
}

pub fn read_cdr(path: impl AsRef<Path>) -> Result<Vec<CdrEvent>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let expected = ["timestamp", "user_id", "antenna_id"];
    if headers.iter().take(3).ne(expected) {
        return Err(Error::parse(path, 1, "expected header timestamp,user_id,antenna_id"));
    }
    let mut out = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(path, e)),
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |k: usize| record.get(k).unwrap_or("");
        let timestamp = field(0)
            .trim()
            .parse::<i64>()
            .map_err(|_| Error::parse(path, line, format!("unparseable timestamp {:?}", field(0))))?;
        out.push(CdrEvent {
            timestamp,
            user_id: field(1).to_owned(),
            antenna_id: field(2).to_owned(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::sites::AntennaSite;
    use std::io::Write;

    fn registry() -> AntennaRegistry {
        AntennaRegistry::with_padded_bounds(vec![
            AntennaSite::new("A", -5.0, 7.0),
            AntennaSite::new("B", -4.9, 7.0),
        ])
        .unwrap()
    }

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn sorts_out_of_order_events() {
        let f = write("timestamp,user_id,antenna_id\n30,u,A\n10,u,B\n20,u,A\n");
        let log = load_events(f.path(), &registry()).unwrap();
        let ts: Vec<i64> = log.trajectories[0].visits.iter().map(|v| v.timestamp).collect();
        assert_eq!(ts, vec![10, 20, 30]);
    }

    #[test]
    fn drops_unknown_antennas() {
        let f = write("timestamp,user_id,antenna_id\n10,u,A\n20,u,Z\n");
        let log = load_events(f.path(), &registry()).unwrap();
        assert_eq!(log.dropped_unknown_antenna, 1);
        assert_eq!(log.n_events, 1);
    }

    #[test]
    fn ties_keep_input_order() {
        let f = write("timestamp,user_id,antenna_id\n10,u,B\n10,u,A\n");
        let log = load_events(f.path(), &registry()).unwrap();
        let ants: Vec<usize> = log.trajectories[0].visits.iter().map(|v| v.antenna).collect();
        assert_eq!(ants, vec![1, 0]);
    }

    #[test]
    fn bad_timestamp_is_a_parse_error_with_line() {
        let f = write("timestamp,user_id,antenna_id\n10,u,A\nnoon,u,B\n");
        match load_events(f.path(), &registry()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn window_and_remap() {
        let remap: BTreeMap<String, String> = [("OLD".to_owned(), "A".to_owned())].into();
        let opts = EventOptions {
            window: Some(StudyWindow::new(0, 100).unwrap()),
            remap: Some(&remap),
        };
        let recs = vec![
            CdrEvent { timestamp: 5, user_id: "u".into(), antenna_id: "OLD".into() },
            CdrEvent { timestamp: 500, user_id: "u".into(), antenna_id: "A".into() },
        ];
        let log = events_from_records(recs, &registry(), &opts);
        assert_eq!(log.dropped_outside_window, 1);
        assert_eq!(log.trajectories[0].visits[0].antenna, 0);
    }
}
