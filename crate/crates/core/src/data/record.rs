use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{NaiveDateTime, TimeDelta};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

const ACCEPTED_FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d %H:%M",
];

/// One hourly market observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketRecord {
    pub timestamp: NaiveDateTime,
    /// Currency per MWh.
    pub price: f64,
    /// MW.
    pub load: f64,
    pub temperature: f64,
}

pub fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let s = raw.trim().trim_end_matches('Z');
    ACCEPTED_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

pub fn format_timestamp(ts: NaiveDateTime) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

pub fn one_hour() -> TimeDelta {
    TimeDelta::hours(1)
}

/// Reads and validates the canonical `timestamp,price,load,temperature`
/// CSV. Rows are sorted by timestamp; duplicates and non-hourly gaps are
/// rejected together with every unparsable row.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<MarketRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, &path.display().to_string())
}

pub fn read_csv<R: Read>(reader: R, source: &str) -> Result<Vec<MarketRecord>> {
    let ingest = |problems: Vec<String>| Error::Ingest {
        path: source.to_string(),
        problems,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| ingest(vec![format!("unreadable header: {e}")]))?
        .clone();
    let mut cols = [0usize; 4];
    let mut missing = Vec::new();
    for (slot, name) in cols
        .iter_mut()
        .zip(["timestamp", "price", "load", "temperature"])
    {
        match headers.iter().position(|h| h.eq_ignore_ascii_case(name)) {
            Some(i) => *slot = i,
            None => missing.push(format!("missing column `{name}`")),
        }
    }
    if !missing.is_empty() {
        return Err(ingest(missing));
    }

    let mut records = Vec::new();
    let mut problems = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        // header is line 1
        let line = i + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                problems.push(format!("line {line}: {e}"));
                continue;
            }
        };
        let field = |c: usize| row.get(c).unwrap_or("");
        let Some(timestamp) = parse_timestamp(field(cols[0])) else {
            problems.push(format!("line {line}: bad timestamp `{}`", field(cols[0])));
            continue;
        };
        let mut nums = [0.0; 3];
        let mut ok = true;
        for (k, name) in ["price", "load", "temperature"].iter().enumerate() {
            match field(cols[k + 1]).parse::<f64>() {
                Ok(v) if v.is_finite() => nums[k] = v,
                _ => {
                    problems.push(format!("line {line}: bad {name} `{}`", field(cols[k + 1])));
                    ok = false;
                }
            }
        }
        if ok {
            records.push(MarketRecord {
                timestamp,
                price: nums[0],
                load: nums[1],
                temperature: nums[2],
            });
        }
    }

    records.sort_by_key(|r| r.timestamp);
    for pair in records.windows(2) {
        let (a, b) = (pair[0].timestamp, pair[1].timestamp);
        if a == b {
            problems.push(format!("duplicate timestamp {}", format_timestamp(a)));
        } else if b - a != one_hour() {
            problems.push(format!(
                "non-hourly gap between {} and {}",
                format_timestamp(a),
                format_timestamp(b)
            ));
        }
    }
    if !problems.is_empty() {
        return Err(ingest(problems));
    }
    Ok(records)
}

pub fn write_csv<W: Write>(writer: W, records: &[MarketRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let wrap = |e: csv::Error| Error::Parse {
        what: "csv output".into(),
        message: e.to_string(),
    };
    w.write_record(["timestamp", "price", "load", "temperature"])
        .map_err(wrap)?;
    for r in records {
        w.write_record([
            format_timestamp(r.timestamp),
            r.price.to_string(),
            r.load.to_string(),
            r.temperature.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("csv output", e))?;
    Ok(())
}

pub fn save_csv(path: impl AsRef<Path>, records: &[MarketRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(std::io::BufWriter::new(file), records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<MarketRecord>> {
        read_csv(text.as_bytes(), "inline")
    }

    #[test]
    fn reads_well_formed_rows_in_order() {
        let recs = parse(
            "timestamp,price,load,temperature\n\
             2019-01-01T02:00:00,3,30,1\n\
             2019-01-01T00:00:00,1,10,1\n\
             2019-01-01T01:00:00,2,20,1\n",
        )
        .unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(
            recs.iter().map(|r| r.price).collect::<Vec<_>>(),
            vec![1.0, 2.0, 3.0]
        );
    }

    #[test]
    fn duplicate_timestamp_is_named() {
        let err = parse(
            "timestamp,price,load,temperature\n\
             2019-01-01T00:00:00,1,10,1\n\
             2019-01-01T00:00:00,2,20,1\n",
        )
        .unwrap_err();
        assert!(
            err.to_string()
                .contains("duplicate timestamp 2019-01-01T00:00:00"),
            "{err}"
        );
    }

    #[test]
    fn gap_and_bad_rows_are_all_reported() {
        let err = parse(
            "timestamp,price,load,temperature\n\
             2019-01-01T00:00:00,1,10,1\n\
             2019-01-01T03:00:00,2,20,1\n\
             garbage,2,20,1\n\
             2019-01-01T04:00:00,x,20,1\n",
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 4: bad timestamp"), "{msg}");
        assert!(msg.contains("line 5: bad price"), "{msg}");
        assert!(msg.contains("non-hourly gap"), "{msg}");
    }

    #[test]
    fn missing_column_is_reported() {
        let err = parse("timestamp,price,load\n2019-01-01T00:00:00,1,10\n").unwrap_err();
        assert!(err.to_string().contains("missing column `temperature`"));
    }

    #[test]
    fn two_day_file_spans_24_hours_at_index_24() {
        let start = parse_timestamp("2019-03-01T00:00:00").unwrap();
        let mut text = String::from("timestamp,price,load,temperature\n");
        for h in 0..48 {
            let ts = start + TimeDelta::hours(h);
            text.push_str(&format!("{},{},100,20\n", format_timestamp(ts), h));
        }
        let recs = parse(&text).unwrap();
        assert_eq!(recs.len(), 48);
        assert_eq!(recs[24].timestamp - recs[0].timestamp, TimeDelta::hours(24));
    }

    #[test]
    fn write_then_read_is_lossless() {
        let start = parse_timestamp("2020-02-28T22:00").unwrap();
        let recs: Vec<_> = (0..5)
            .map(|h| MarketRecord {
                timestamp: start + TimeDelta::hours(h),
                price: 0.1 * h as f64 + 1e-13,
                load: 1234.5678,
                temperature: -3.25,
            })
            .collect();
        let mut buf = Vec::new();
        write_csv(&mut buf, &recs).unwrap();
        assert_eq!(parse(std::str::from_utf8(&buf).unwrap()).unwrap(), recs);
    }
}
