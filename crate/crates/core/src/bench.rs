//! Work and wall-time measurements for DC-DA over a size sweep.

use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::dcda::{dc_da, DcDaError, DcDaResult};
use crate::gen::{generate_random, GenError, GenParams};
use crate::io::IoError;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub students: usize,
    pub edges: usize,
    pub proposals: usize,
    pub cursor_steps: usize,
    pub iterations: usize,
    pub solved: bool,
    #[serde(serialize_with = "as_millis")]
    pub wall: Duration,
}

fn as_millis<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64() * 1e3)
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    DcDa(#[from] DcDaError),
    #[error("work bound broken: {proposals} proposals on {edges} edges")]
    WorkBound { edges: usize, proposals: usize },
}

/// Runs DC-DA once per parameter set and checks that the proposal count
/// never exceeds the number of edges.
pub fn bench_dcda(sweep: &[GenParams], seed: u64) -> Result<Vec<BenchRow>, BenchError> {
    sweep
        .iter()
        .map(|params| {
            let inst = generate_random(params, seed)?.to_instance()?;
            let started = Instant::now();
            let result = dc_da(&inst)?;
            let wall = started.elapsed();
            let report = result.report();
            if report.proposals > inst.num_edges() || report.cursor_steps > inst.num_edges() {
                return Err(BenchError::WorkBound {
                    edges: inst.num_edges(),
                    proposals: report.proposals,
                });
            }
            Ok(BenchRow {
                students: inst.num_students(),
                edges: inst.num_edges(),
                proposals: report.proposals,
                cursor_steps: report.cursor_steps,
                iterations: report.iterations,
                solved: matches!(result, DcDaResult::Solution { .. }),
                wall,
            })
        })
        .collect()
}

/// Parameter sets whose student count doubles from `start` up to at most
/// `max_edges / list_length` students, keeping the density fixed.
pub fn doubling_sweep(base: &GenParams, start: usize, max_edges: usize) -> Vec<GenParams> {
    let mut out = Vec::new();
    let mut n = start.max(1);
    while n * base.list_length.min(base.n_institutions).max(1) <= max_edges {
        out.push(GenParams {
            n_students: n,
            n_institutions: (base.n_institutions * n / start.max(1)).max(1),
            ..base.clone()
        });
        n *= 2;
    }
    out
}
