use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Empty,
}

impl Cell {
    /// Shortest round-trip decimal for floats; `.` separator always.
    pub fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:?}"),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Float(v) => Some(*v),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// What summary.json aggregates: `metrics` per distinct `group_by` tuple,
/// over the rows whose `filter` column equals the given value (if any).
#[derive(Debug, Clone, PartialEq)]
pub struct SummarySpec {
    pub group_by: Vec<&'static str>,
    pub metrics: Vec<&'static str>,
    pub filter: Option<(&'static str, Cell)>,
}

/// One experiment's output. Columns always start with `seed,scenario_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: SummarySpec,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), HarnessError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let io = |e: csv::Error| HarnessError::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(io)?;
        }
        w.flush().map_err(|e| HarnessError::Io(e.to_string()))
    }

    pub fn summarize(&self) -> Result<Vec<SummaryGroup>, HarnessError> {
        let idx = |name: &str| {
            self.column(name)
                .ok_or_else(|| HarnessError::Invariant(format!("summary column {name} missing")))
        };
        let group_idx = self
            .summary
            .group_by
            .iter()
            .map(|g| idx(g))
            .collect::<Result<Vec<_>, _>>()?;
        let metric_idx = self
            .summary
            .metrics
            .iter()
            .map(|m| idx(m))
            .collect::<Result<Vec<_>, _>>()?;
        let filter = match &self.summary.filter {
            Some((col, v)) => Some((idx(col)?, v.render())),
            None => None,
        };
        // Groups keep first-appearance order, which is deterministic.
        let mut order: Vec<Vec<String>> = Vec::new();
        let mut values: BTreeMap<Vec<String>, Vec<Vec<f64>>> = BTreeMap::new();
        for row in &self.rows {
            if let Some((c, v)) = &filter {
                if row[*c].render() != *v {
                    continue;
                }
            }
            let key: Vec<String> = group_idx.iter().map(|&i| row[i].render()).collect();
            let entry = values.entry(key.clone()).or_insert_with(|| {
                order.push(key);
                vec![Vec::new(); metric_idx.len()]
            });
            for (slot, &i) in entry.iter_mut().zip(&metric_idx) {
                if let Some(v) = row[i].as_f64() {
                    slot.push(v);
                }
            }
        }
        Ok(order
            .into_iter()
            .map(|key| {
                let cols = &values[&key];
                SummaryGroup {
                    group: self
                        .summary
                        .group_by
                        .iter()
                        .zip(&key)
                        .map(|(g, v)| (g.to_string(), v.clone()))
                        .collect(),
                    metrics: self
                        .summary
                        .metrics
                        .iter()
                        .zip(cols)
                        .map(|(m, vals)| (m.to_string(), Aggregate::of(vals)))
                        .collect(),
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryGroup {
    pub group: BTreeMap<String, String>,
    pub metrics: BTreeMap<String, Aggregate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub count: usize,
    pub mean: Option<f64>,
    pub p50: Option<f64>,
    pub p90: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl Aggregate {
    /// Percentiles interpolate linearly between order statistics at rank
    /// p (n - 1).
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                count: 0,
                mean: None,
                p50: None,
                p90: None,
                min: None,
                max: None,
            };
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let pct = |p: f64| {
            let rank = p * (n - 1) as f64;
            let lo = rank.floor() as usize;
            let hi = rank.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (rank - lo as f64)
        };
        Self {
            count: n,
            mean: Some(values.iter().sum::<f64>() / n as f64),
            p50: Some(pct(0.5)),
            p90: Some(pct(0.9)),
            min: Some(v[0]),
            max: Some(v[n - 1]),
        }
    }
}
