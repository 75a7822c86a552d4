//! Trace files: schema-mapped ingestion and the canonical CSV format.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use edgecoop_core::traces::{sort_events, TraceEvent};

use crate::error::{Error, Result};

pub const SERVER_COLUMN: &str = "server_id";
pub const TIME_COLUMN: &str = "arrival_time_s";
pub const DEMAND_COLUMN: &str = "cpu_gigacycles";
pub const SIZE_COLUMN: &str = "size_mb";

/// Maps trace columns onto event fields and trace units onto simulator units.
///
/// Written as `key=value` pairs separated by commas, for example
/// `time=timestamp,time_scale=1e-6,rebase=true,demand=cpu_request,server=machine_id,server_modulo=3`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaMap {
    pub server: String,
    pub time: String,
    pub demand: String,
    /// Payload column; rows without it get sizes drawn at run time.
    pub size: String,
    /// Seconds per trace time unit.
    pub time_scale: f64,
    /// Seconds added after scaling.
    pub time_offset: f64,
    /// Shift times so the earliest event arrives at zero.
    pub rebase: bool,
    /// Gigacycles per trace demand unit. Defaults to 1 for the canonical
    /// column and to 99 otherwise, so normalized units in [0, 1] land in
    /// [1, 100] gigacycles together with the default offset.
    pub demand_scale: Option<f64>,
    /// Gigacycles added after scaling; 0 for the canonical column, else 1.
    pub demand_offset: Option<f64>,
    /// Fold raw server ids onto `0..n`.
    pub server_modulo: Option<usize>,
}

impl Default for SchemaMap {
    fn default() -> Self {
        Self {
            server: SERVER_COLUMN.into(),
            time: TIME_COLUMN.into(),
            demand: DEMAND_COLUMN.into(),
            size: SIZE_COLUMN.into(),
            time_scale: 1.0,
            time_offset: 0.0,
            rebase: false,
            demand_scale: None,
            demand_offset: None,
            server_modulo: None,
        }
    }
}

impl SchemaMap {
    /// Effective `(scale, offset)` applied to raw demand values.
    pub fn demand_transform(&self) -> (f64, f64) {
        let canonical = self.demand == DEMAND_COLUMN;
        let scale = self.demand_scale.unwrap_or(if canonical { 1.0 } else { 99.0 });
        let offset = self.demand_offset.unwrap_or(if canonical { 0.0 } else { 1.0 });
        (scale, offset)
    }
}

impl FromStr for SchemaMap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut map = SchemaMap::default();
        for pair in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Error::Schema(format!("`{pair}` is not key=value")))?;
            let (key, value) = (key.trim(), value.trim());
            let number = |v: &str| v.parse::<f64>().map_err(|_| Error::Schema(format!("{key} expects a number, got `{v}`")));
            match key {
                "server" => map.server = value.into(),
                "time" => map.time = value.into(),
                "demand" => map.demand = value.into(),
                "size" => map.size = value.into(),
                "time_scale" => map.time_scale = number(value)?,
                "time_offset" => map.time_offset = number(value)?,
                "rebase" => {
                    map.rebase = value.parse().map_err(|_| Error::Schema(format!("rebase expects true or false, got `{value}`")))?
                }
                "demand_scale" => map.demand_scale = Some(number(value)?),
                "demand_offset" => map.demand_offset = Some(number(value)?),
                "server_modulo" => {
                    let n: usize = value.parse().map_err(|_| Error::Schema(format!("server_modulo expects a positive integer, got `{value}`")))?;
                    if n == 0 {
                        return Err(Error::Schema("server_modulo must be positive".into()));
                    }
                    map.server_modulo = Some(n);
                }
                other => return Err(Error::Schema(format!("unknown key `{other}`"))),
            }
        }
        if !(map.time_scale > 0.0) {
            return Err(Error::Schema("time_scale must be positive".into()));
        }
        Ok(map)
    }
}

/// Events in time order plus the number of rows that arrived out of order
/// within their server's stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTrace {
    pub events: Vec<TraceEvent>,
    pub reordered: usize,
}

pub fn parse_trace<R: Read>(reader: R, schema: &SchemaMap) -> Result<ParsedTrace> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::BadRow { row: 0, msg: e.to_string() })?.clone();
    if headers.iter().all(str::is_empty) {
        return Ok(ParsedTrace { events: Vec::new(), reordered: 0 });
    }
    let column = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn(name.into()));
    let server_col = column(&schema.server)?;
    let time_col = column(&schema.time)?;
    let demand_col = column(&schema.demand)?;
    let size_col = headers.iter().position(|h| h == schema.size);
    let (demand_scale, demand_offset) = schema.demand_transform();

    let mut events = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::BadRow { row, msg: e.to_string() })?;
        let field = |col: usize, name: &str| {
            record.get(col).ok_or_else(|| Error::BadRow { row, msg: format!("no value for `{name}`") })
        };
        let number = |col: usize, name: &str| -> Result<f64> {
            let raw = field(col, name)?;
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::BadRow { row, msg: format!("`{name}` is not a finite number: `{raw}`") })
        };
        let raw_server = field(server_col, &schema.server)?;
        let mut server: usize = raw_server
            .parse()
            .map_err(|_| Error::BadRow { row, msg: format!("`{}` is not a server index: `{raw_server}`", schema.server) })?;
        if let Some(n) = schema.server_modulo {
            server %= n;
        }
        let arrival_time = number(time_col, &schema.time)? * schema.time_scale + schema.time_offset;
        let compute_demand = number(demand_col, &schema.demand)? * demand_scale + demand_offset;
        if !(compute_demand > 0.0) {
            return Err(Error::BadRow { row, msg: format!("compute demand {compute_demand} is not positive") });
        }
        let payload_size = match size_col.and_then(|c| record.get(c)).filter(|v| !v.is_empty()) {
            None => None,
            Some(_) => {
                let v = number(size_col.expect("checked"), &schema.size)?;
                if !(v > 0.0) {
                    return Err(Error::BadRow { row, msg: format!("size {v} is not positive") });
                }
                Some(v)
            }
        };
        events.push(TraceEvent { server_id: server, arrival_time, compute_demand, payload_size });
    }

    if schema.rebase {
        let origin = events.iter().map(|e| e.arrival_time).fold(f64::INFINITY, f64::min);
        events.iter_mut().for_each(|e| e.arrival_time -= origin);
    }
    if let Some(e) = events.iter().position(|e| e.arrival_time < 0.0) {
        return Err(Error::BadRow { row: e + 1, msg: "arrival time is negative after rescaling".into() });
    }

    let mut last: Vec<f64> = Vec::new();
    let mut reordered = 0;
    for e in &events {
        if last.len() <= e.server_id {
            last.resize(e.server_id + 1, f64::NEG_INFINITY);
        }
        if e.arrival_time < last[e.server_id] {
            reordered += 1;
        } else {
            last[e.server_id] = e.arrival_time;
        }
    }
    if reordered > 0 {
        log::warn!("trace had {reordered} out-of-order rows; sorted by arrival time");
    }
    sort_events(&mut events);
    Ok(ParsedTrace { events, reordered })
}

pub fn read_trace(path: &Path, schema: &SchemaMap) -> Result<ParsedTrace> {
    let file = std::fs::File::open(path).map_err(Error::io(path))?;
    parse_trace(std::io::BufReader::new(file), schema).map_err(|e| match e {
        Error::BadRow { row, msg } => Error::Parse { path: path.into(), msg: format!("row {row}: {msg}") },
        other => other,
    })
}

/// Canonical CSV. Floats use the shortest representation that parses back
/// to the same value, so a write-read cycle is lossless. The size column is
/// left out when no event carries a size.
pub fn write_canonical<W: Write>(mut out: W, events: &[TraceEvent]) -> std::io::Result<()> {
    let sized = events.iter().any(|e| e.payload_size.is_some());
    let mut buf = String::new();
    buf.push_str(SERVER_COLUMN);
    buf.push(',');
    buf.push_str(TIME_COLUMN);
    buf.push(',');
    buf.push_str(DEMAND_COLUMN);
    if sized {
        buf.push(',');
        buf.push_str(SIZE_COLUMN);
    }
    buf.push('\n');
    for e in events {
        let _ = write!(buf, "{},{},{}", e.server_id, e.arrival_time, e.compute_demand);
        if sized {
            buf.push(',');
            if let Some(s) = e.payload_size {
                let _ = write!(buf, "{s}");
            }
        }
        buf.push('\n');
    }
    out.write_all(buf.as_bytes())
}

pub fn write_trace(path: &Path, events: &[TraceEvent]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(Error::io(path))?;
    let mut w = std::io::BufWriter::new(file);
    write_canonical(&mut w, events).map_err(Error::io(path))?;
    w.flush().map_err(Error::io(path))
}
