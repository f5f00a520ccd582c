//! Per-round convergence records and their CSV form.

use std::io::Write;

use crate::error::Result;

pub const CSV_HEADER: &str = "algo,round,diffusions,scans,l1_error,bound";

/// One benchmark observation: the state of one algorithm after one round.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub algo: String,
    /// 1-based round index.
    pub round: usize,
    /// Cumulative entry updates (pull solvers) or elementary diffusions
    /// (push solvers) since the start of the run.
    pub diffusions: u64,
    /// Cumulative scheduler scans; `None` for solvers without a scheduler.
    pub scans: Option<u64>,
    /// L1 distance to the reference vector, when one was supplied.
    pub l1_error: Option<f64>,
    /// Certified residual bound; only diffusion runs report one.
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    pub rows: Vec<TraceRow>,
}

impl ConvergenceTrace {
    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub fn append(&mut self, mut other: ConvergenceTrace) {
        self.rows.append(&mut other.rows);
    }

    /// Rows of a single algorithm, in order.
    pub fn rows_for<'a>(&'a self, algo: &'a str) -> impl Iterator<Item = &'a TraceRow> {
        self.rows.iter().filter(move |r| r.algo == algo)
    }

    /// Checks the structural trace invariants: per algorithm, round indices
    /// strictly increase and diffusion counts never decrease; rows carrying
    /// both an error and a bound satisfy `error <= bound + 1e-9`.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let mut algos: Vec<&str> = self.rows.iter().map(|r| r.algo.as_str()).collect();
        algos.dedup();
        algos.sort_unstable();
        algos.dedup();
        for algo in algos {
            let mut last: Option<(usize, u64)> = None;
            for row in self.rows_for(algo) {
                if let Some((round, diff)) = last {
                    if row.round <= round {
                        return Err(format!("{algo}: round {} after round {round}", row.round));
                    }
                    if row.diffusions < diff {
                        return Err(format!(
                            "{algo}: diffusion count dropped from {diff} to {}",
                            row.diffusions
                        ));
                    }
                }
                if let (Some(err), Some(bound)) = (row.l1_error, row.bound) {
                    if err > bound + 1e-9 {
                        return Err(format!(
                            "{algo} round {}: error {err} exceeds bound {bound}",
                            row.round
                        ));
                    }
                }
                last = Some((row.round, row.diffusions));
            }
        }
        Ok(())
    }

    /// Writes the trace as CSV. Reals carry 9 significant digits; fields
    /// that do not apply are left empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for row in &self.rows {
            let scans = row.scans.map(|s| s.to_string()).unwrap_or_default();
            let err = row.l1_error.map(format_real).unwrap_or_default();
            let bound = row.bound.map(format_real).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{}",
                row.algo, row.round, row.diffusions, scans, err, bound
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

fn format_real(v: f64) -> String {
    format!("{v:.8e}")
}
