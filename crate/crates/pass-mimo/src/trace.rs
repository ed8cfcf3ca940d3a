//! Per-iteration convergence records for the iterative solvers.
//!
//! Every run produces a [`ConvergenceTrace`]: a small named-column table with
//! one row per outer iteration (row 0 describes the initial point). The
//! column set differs per algorithm — the fractional-programming precoder
//! logs its weighted sum-rate, the zero-forcing sweep logs the interference
//! trace it minimizes, the uplink sweep logs the achievable sum-rate — so the
//! trace stores its column names alongside the rows and serializes itself to
//! CSV unchanged.

use std::io::Write;

use crate::error::Result;

/// Named-column table of per-iteration solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    /// Column names, in CSV order.
    pub columns: Vec<&'static str>,
    /// One row per iteration; each row has one value per column.
    pub rows: Vec<Vec<f64>>,
}

impl ConvergenceTrace {
    /// Creates an empty trace with the given column names.
    pub fn new(columns: Vec<&'static str>) -> Self {
        ConvergenceTrace {
            columns,
            rows: Vec::new(),
        }
    }

    /// Appends one iteration row. Panics if the arity does not match the
    /// column set — that is a programming error, not a runtime condition.
    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "trace row arity must match its columns"
        );
        self.rows.push(row);
    }

    /// Number of recorded iterations.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// True when nothing has been recorded yet.
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Returns the values of the named column, if present.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// Value in the last row of the named column, if any rows exist.
    pub fn last(&self, name: &str) -> Option<f64> {
        let idx = self.columns.iter().position(|c| *c == name)?;
        self.rows.last().map(|r| r[idx])
    }

    /// Writes the trace as CSV (header + rows). Floats are written in
    /// shortest round-trip form, so reading the file back reproduces the
    /// exact binary values.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(sink);
        writer.write_record(&self.columns)?;
        for row in &self.rows {
            writer.write_record(row.iter().map(|v| v.to_string()))?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Renders the CSV into a `String` (convenience for tests and examples).
    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_lookup_and_length() {
        let mut t = ConvergenceTrace::new(vec!["iter", "objective_nats", "wall_ms"]);
        assert!(t.is_empty());
        t.push(vec![0.0, 1.5, 0.1]);
        t.push(vec![1.0, 2.5, 0.2]);
        assert_eq!(t.len(), 2);
        assert_eq!(t.column("objective_nats"), Some(vec![1.5, 2.5]));
        assert_eq!(t.column("missing"), None);
        assert_eq!(t.last("wall_ms"), Some(0.2));
    }

    #[test]
    fn csv_round_trips_exact_floats() {
        let mut t = ConvergenceTrace::new(vec!["iter", "objective_nats"]);
        let awkward = 0.1 + 0.2; // not representable as a short decimal
        t.push(vec![0.0, awkward]);
        let csv_text = t.to_csv_string().unwrap();
        let mut lines = csv_text.lines();
        assert_eq!(lines.next(), Some("iter,objective_nats"));
        let data = lines.next().unwrap();
        let parsed: f64 = data.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(parsed.to_bits(), awkward.to_bits(), "CSV must round-trip bits");
    }

    #[test]
    #[should_panic(expected = "arity")]
    fn arity_mismatch_panics() {
        let mut t = ConvergenceTrace::new(vec!["iter", "x"]);
        t.push(vec![0.0]);
    }
}
