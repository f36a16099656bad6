//! Sampled scalar diagnostics and their CSV form.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{PensError, Result};

/// Parameters a series was sampled with; downstream functionals check them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub d: usize,
    pub m: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub meta: SeriesMeta,
    times: Vec<f64>,
    channels: BTreeMap<String, Vec<f64>>,
}

impl TimeSeries {
    pub fn new(meta: SeriesMeta) -> Self {
        Self { meta, times: Vec::new(), channels: BTreeMap::new() }
    }

    /// Builds a series from columns; every channel must match `times` in
    /// length and `times` must be strictly increasing.
    pub fn from_columns(
        meta: SeriesMeta,
        times: Vec<f64>,
        channels: BTreeMap<String, Vec<f64>>,
    ) -> Result<Self> {
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(PensError::InvalidSeries("times must be finite and strictly increasing".into()));
        }
        for (name, col) in &channels {
            if col.len() != times.len() {
                return Err(PensError::InvalidSeries(format!(
                    "channel {name} has {} samples, expected {}",
                    col.len(),
                    times.len()
                )));
            }
        }
        Ok(Self { meta, times, channels })
    }

    /// Appends one sample. The first push fixes the channel set.
    pub fn push(&mut self, t: f64, values: BTreeMap<String, f64>) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(PensError::InvalidSeries(format!(
                    "sample time {t} does not follow {last}"
                )));
            }
            if values.len() != self.channels.len()
                || values.keys().any(|k| !self.channels.contains_key(k))
            {
                return Err(PensError::InvalidSeries("channel set changed between samples".into()));
            }
        }
        for (name, value) in values {
            self.channels.entry(name).or_default().push(value);
        }
        self.times.push(t);
        Ok(())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn has_channel(&self, name: &str) -> bool {
        self.channels.contains_key(name)
    }

    pub fn channel(&self, name: &str) -> Result<&[f64]> {
        self.channels
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| PensError::MissingChannel(name.to_string()))
    }

    pub fn channel_names(&self) -> impl Iterator<Item = &str> {
        self.channels.keys().map(String::as_str)
    }

    /// Keeps only the listed channels (unknown names are an error).
    pub fn select(&self, names: &[String]) -> Result<TimeSeries> {
        let mut channels = BTreeMap::new();
        for name in names {
            channels.insert(name.clone(), self.channel(name)?.to_vec());
        }
        Ok(Self { meta: self.meta, times: self.times.clone(), channels })
    }

    /// Writes `t` followed by the channels in name order, one row per sample,
    /// with shortest round-trip float formatting.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let mut header = String::from("t");
        for name in self.channels.keys() {
            header.push(',');
            header.push_str(name);
        }
        writeln!(out, "{header}")?;
        let mut buf = ryu::Buffer::new();
        for (i, &t) in self.times.iter().enumerate() {
            let mut row = String::from(buf.format(t));
            for col in self.channels.values() {
                row.push(',');
                row.push_str(buf.format(col[i]));
            }
            writeln!(out, "{row}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = Vec::new();
        self.write_csv(&mut out).expect("writing to a Vec cannot fail");
        String::from_utf8(out).expect("csv output is ASCII")
    }

    /// Reads a series written by [`write_csv`](Self::write_csv). The CSV does
    /// not carry `meta`, so the caller supplies it.
    pub fn read_csv(input: impl BufRead, meta: SeriesMeta) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| PensError::Csv { line: 1, message: "empty file".into() })??;
        let names: Vec<&str> = header.trim().split(',').collect();
        if names.first() != Some(&"t") {
            return Err(PensError::Csv { line: 1, message: "first column must be t".into() });
        }
        let mut times = Vec::new();
        let mut cols = vec![Vec::new(); names.len() - 1];
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != names.len() {
                return Err(PensError::Csv {
                    line: lineno,
                    message: format!("expected {} fields, found {}", names.len(), fields.len()),
                });
            }
            let mut parsed = fields.iter().map(|f| {
                f.parse::<f64>().map_err(|_| PensError::Csv {
                    line: lineno,
                    message: format!("not a number: {f}"),
                })
            });
            times.push(parsed.next().unwrap()?);
            for col in cols.iter_mut() {
                col.push(parsed.next().unwrap()?);
            }
        }
        let channels = names[1..].iter().map(|n| n.to_string()).zip(cols).collect();
        Self::from_columns(meta, times, channels)
    }

    /// Drops every sample with `t < start`.
    pub fn truncate_before(&mut self, start: f64) {
        let k = self.times.partition_point(|&t| t < start);
        self.times.drain(..k);
        for col in self.channels.values_mut() {
            col.drain(..k);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> SeriesMeta {
        SeriesMeta { d: 2, m: 2.5, s: 1.25 }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut ts = TimeSeries::new(meta());
        for (i, t) in [0.0, 0.1, 0.30000000000000004].into_iter().enumerate() {
            let mut v = BTreeMap::new();
            v.insert("l2_v".into(), 1.0 / (i as f64 + 3.0));
            v.insert("E".into(), 1e-300 * i as f64);
            ts.push(t, v).unwrap();
        }
        let csv = ts.to_csv_string();
        assert!(csv.starts_with("t,E,l2_v\n"));
        let back = TimeSeries::read_csv(csv.as_bytes(), meta()).unwrap();
        assert_eq!(back, ts);
    }

    #[test]
    fn push_rejects_bad_samples() {
        let mut ts = TimeSeries::new(meta());
        let one = |k: &str| BTreeMap::from([(k.to_string(), 1.0)]);
        ts.push(1.0, one("a")).unwrap();
        assert!(ts.push(1.0, one("a")).is_err());
        assert!(ts.push(2.0, one("b")).is_err());
        assert!(matches!(ts.channel("b"), Err(PensError::MissingChannel(_))));
    }

    #[test]
    fn read_reports_line_numbers() {
        let err = TimeSeries::read_csv("t,a\n0,1\n1,x\n".as_bytes(), meta()).unwrap_err();
        assert!(matches!(err, PensError::Csv { line: 3, .. }), "{err}");
    }
}
