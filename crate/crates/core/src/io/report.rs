//! CSV reports.
//!
//! Distances use the header `base,target,method,value`; evaluations use
//! `target,true_acc,pred_acc,abs_err`. Floats are written in Rust's
//! shortest round-trip form so a re-read value is bit-identical.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub base: String,
    pub target: String,
    pub method: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub target: String,
    pub true_acc: f64,
    pub pred_acc: f64,
    pub abs_err: f64,
}

fn write_rows<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(input: R) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<Vec<T>, _>>()?)
}

/// Header-only output when `rows` is empty.
pub fn write_distance_csv<W: Write>(out: W, rows: &[DistanceRow]) -> Result<()> {
    if rows.is_empty() {
        let mut out = out;
        out.write_all(b"base,target,method,value\n")?;
        return Ok(());
    }
    write_rows(out, rows)
}

pub fn read_distance_csv<R: Read>(input: R) -> Result<Vec<DistanceRow>> {
    read_rows(input)
}

pub fn write_evaluation_csv<W: Write>(out: W, rows: &[EvaluationRow]) -> Result<()> {
    if rows.is_empty() {
        let mut out = out;
        out.write_all(b"target,true_acc,pred_acc,abs_err\n")?;
        return Ok(());
    }
    write_rows(out, rows)
}

pub fn read_evaluation_csv<R: Read>(input: R) -> Result<Vec<EvaluationRow>> {
    read_rows(input)
}
