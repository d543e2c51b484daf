use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::solver::CycleRecord;

/// One CSV row per major cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub run_id: usize,
    pub t: usize,
    pub oracle_calls: usize,
    pub dist_sq: f64,
    pub err: f64,
    pub stored_policies: usize,
    pub minor_cycles: usize,
    pub drop_step: bool,
    pub wall_time_ms: f64,
}

impl TraceRow {
    pub fn from_cycle(run_id: usize, c: &CycleRecord, record_timing: bool) -> Self {
        Self {
            run_id,
            t: c.t,
            oracle_calls: c.oracle_calls,
            dist_sq: c.dist_sq,
            err: c.err,
            stored_policies: c.stored_policies,
            minor_cycles: c.minor_cycles,
            drop_step: c.drop_step,
            wall_time_ms: if record_timing { c.wall_time.as_secs_f64() * 1e3 } else { 0.0 },
        }
    }
}

/// Side-by-side row for the solver comparison. Cells are empty once a
/// solver has stopped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedRow {
    pub run_id: usize,
    pub t: usize,
    pub cg_dist_sq: Option<f64>,
    pub cg_err: Option<f64>,
    pub cg_stored_policies: Option<usize>,
    pub mnp_dist_sq: Option<f64>,
    pub mnp_err: Option<f64>,
    pub mnp_stored_policies: Option<usize>,
    pub mnp_minor_cycles: Option<usize>,
    pub mnp_drop_step: Option<bool>,
}

pub fn write_trace_csv<W: Write, R: Serialize>(out: W, rows: &[R]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_trace_csv<Rd: Read>(input: Rd) -> Result<Vec<TraceRow>, HarnessError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<Vec<TraceRow>, _>>()?)
}
