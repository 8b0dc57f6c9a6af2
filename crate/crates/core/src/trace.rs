//! Solver trajectories and their CSV export.

use std::collections::VecDeque;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vector;

/// Formats a value with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), fmt17)
}

fn parse_field(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("bad number {s:?}: {e}")))
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    let v = parse_field(s)?;
    Ok(if v.is_nan() { None } else { Some(v) })
}

/// One row of a trajectory: the state at iterate `r` and the step taken from it.
///
/// The step fields are `None` on the terminal record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    pub objective: f64,
    pub residual: f64,
    pub step_norm: Option<f64>,
    pub err_norm: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    /// Most recent iterates `(r, x^r)`, at most `iterate_capacity` of them.
    pub iterates: VecDeque<(usize, Vector)>,
    pub iterate_capacity: usize,
    pub final_point: Vector,
    pub termination: Termination,
    /// Iterations where `F(x^{r+1}) > F(x^r)` beyond rounding.
    pub increase_events: Vec<usize>,
}

pub const TRACE_HEADER: [&str; 6] = ["r", "F", "psi", "step_norm", "err_norm", "alpha"];

impl IterationTrace {
    pub fn new(iterate_capacity: usize, x0: &Vector) -> Self {
        Self {
            records: Vec::new(),
            iterates: VecDeque::new(),
            iterate_capacity,
            final_point: x0.clone(),
            termination: Termination::MaxIterations,
            increase_events: Vec::new(),
        }
    }

    pub fn store_iterate(&mut self, r: usize, x: &Vector) {
        if self.iterate_capacity == 0 {
            return;
        }
        if self.iterates.len() == self.iterate_capacity {
            self.iterates.pop_front();
        }
        self.iterates.push_back((r, x.clone()));
    }

    pub fn push(&mut self, rec: IterationRecord) {
        if let Some(prev) = self.records.last() {
            let slack = 1e-12 * (1.0 + prev.objective.abs());
            if rec.objective > prev.objective + slack {
                self.increase_events.push(prev.index);
            }
        }
        self.records.push(rec);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of steps taken (records minus the terminal one).
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    pub fn final_objective(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.objective)
    }

    pub fn final_residual(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.residual)
    }

    /// Stored iterate for record `r`, if still in the ring.
    pub fn iterate(&self, r: usize) -> Option<&Vector> {
        self.iterates.iter().find(|(i, _)| *i == r).map(|(_, x)| x)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(TRACE_HEADER)?;
        for rec in &self.records {
            out.write_record([
                rec.index.to_string(),
                fmt17(rec.objective),
                fmt17(rec.residual),
                fmt_opt(rec.step_norm),
                fmt_opt(rec.err_norm),
                fmt_opt(rec.alpha),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Writes stored iterates as `r,x0,x1,...`.
    pub fn write_iterates_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let n = self.final_point.len();
        let header: Vec<String> = std::iter::once("r".to_string())
            .chain((0..n).map(|i| format!("x{i}")))
            .collect();
        out.write_record(&header)?;
        for (r, x) in &self.iterates {
            let row: Vec<String> = std::iter::once(r.to_string())
                .chain(x.iter().map(|&v| fmt17(v)))
                .collect();
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Scalar rows of a trace CSV. Accepts both the iteration layout
/// (`r,F,psi,step_norm,err_norm,alpha`) and the BCD cycle layout
/// (`s,F,psi,cycle_step_norm,err_norm,err_bound_rhs`).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub cycle_layout: bool,
    pub records: Vec<IterationRecord>,
    /// Last column of the cycle layout.
    pub err_bound_rhs: Vec<Option<f64>>,
}

pub fn read_trace_csv<R: Read>(r: R) -> Result<TraceTable> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    let cycle_layout = match names.as_slice() {
        ["r", "F", "psi", "step_norm", "err_norm", "alpha"] => false,
        ["s", "F", "psi", "cycle_step_norm", "err_norm", "err_bound_rhs"] => true,
        other => return Err(Error::Parse(format!("unrecognised trace header {other:?}"))),
    };
    let mut records = Vec::new();
    let mut rhs = Vec::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() != 6 {
            return Err(Error::Parse(format!("expected 6 fields, got {}", row.len())));
        }
        let index = row[0]
            .trim()
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("bad index {:?}: {e}", &row[0])))?;
        let last = parse_opt(&row[5])?;
        records.push(IterationRecord {
            index,
            objective: parse_field(&row[1])?,
            residual: parse_field(&row[2])?,
            step_norm: parse_opt(&row[3])?,
            err_norm: parse_opt(&row[4])?,
            alpha: if cycle_layout { None } else { last },
        });
        rhs.push(if cycle_layout { last } else { None });
    }
    Ok(TraceTable {
        cycle_layout,
        records,
        err_bound_rhs: rhs,
    })
}

/// Reads an iterates CSV written by [`IterationTrace::write_iterates_csv`].
pub fn read_iterates_csv<R: Read>(r: R) -> Result<Vec<(usize, Vector)>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let mut it = row.iter();
        let idx = it
            .next()
            .ok_or_else(|| Error::Parse("empty row".into()))?
            .trim()
            .parse::<usize>()
            .map_err(|e| Error::Parse(e.to_string()))?;
        let xs = it.map(parse_field).collect::<Result<Vec<_>>>()?;
        out.push((idx, Vector::from_vec(xs)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> IterationTrace {
        let mut t = IterationTrace::new(2, &Vector::zeros(2));
        for r in 0..3 {
            t.store_iterate(r, &Vector::from_element(2, r as f64));
            t.push(IterationRecord {
                index: r,
                objective: 1.0 / (r as f64 + 1.0),
                residual: 0.1,
                step_norm: (r < 2).then_some(0.5),
                err_norm: (r < 2).then_some(0.0),
                alpha: (r < 2).then_some(0.25),
            });
        }
        t
    }

    #[test]
    fn ring_keeps_latest() {
        let t = sample();
        assert_eq!(t.iterates.len(), 2);
        assert!(t.iterate(0).is_none());
        assert_eq!(t.iterate(2).unwrap()[0], 2.0);
        assert_eq!(t.iterations(), 2);
    }

    #[test]
    fn csv_layout_and_reparse() {
        let t = sample();
        let s = t.to_csv_string().unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next().unwrap(), "r,F,psi,step_norm,err_norm,alpha");
        assert_eq!(
            lines.next().unwrap(),
            "0,1.0000000000000000e0,1.0000000000000001e-1,5.0000000000000000e-1,0.0000000000000000e0,2.5000000000000000e-1"
        );
        assert!(s.lines().last().unwrap().ends_with("NaN,NaN,NaN"));
        let back = read_trace_csv(s.as_bytes()).unwrap();
        assert!(!back.cycle_layout);
        assert_eq!(back.records, t.records);
    }

    #[test]
    fn increase_events_recorded() {
        let mut t = IterationTrace::new(0, &Vector::zeros(1));
        for (i, f) in [1.0, 0.5, 0.7].into_iter().enumerate() {
            t.push(IterationRecord {
                index: i,
                objective: f,
                residual: 0.0,
                step_norm: None,
                err_norm: None,
                alpha: None,
            });
        }
        assert_eq!(t.increase_events, vec![1]);
    }

    #[test]
    fn iterates_round_trip() {
        let t = sample();
        let mut buf = Vec::new();
        t.write_iterates_csv(&mut buf).unwrap();
        let back = read_iterates_csv(buf.as_slice()).unwrap();
        assert_eq!(back, t.iterates.iter().cloned().collect::<Vec<_>>());
    }

    #[test]
    fn rejects_unknown_header() {
        assert!(read_trace_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
