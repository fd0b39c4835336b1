//! Time-stamped bound values at the initial belief.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub const TRACE_COLUMNS: [&str; 7] = [
    "time_s",
    "lower_b0",
    "upper_b0",
    "num_alpha",
    "num_points",
    "trials",
    "updates",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time_s: f64,
    pub lower_b0: f64,
    pub upper_b0: f64,
    pub num_alpha: usize,
    pub num_points: usize,
    pub trials: usize,
    pub updates: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
}

impl SolveTrace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = TRACE_COLUMNS.join(",");
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.time_s, r.lower_b0, r.upper_b0, r.num_alpha, r.num_points, r.trials, r.updates
            );
        }
        out
    }

    /// Whether the lower column never decreases and the upper column never
    /// increases, up to `tol`.
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.records.windows(2).all(|w| {
            w[1].lower_b0 >= w[0].lower_b0 - tol
                && w[1].upper_b0 <= w[0].upper_b0 + tol
                && w[1].time_s >= w[0].time_s
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: f64, lo: f64, hi: f64) -> TraceRecord {
        TraceRecord {
            time_s: t,
            lower_b0: lo,
            upper_b0: hi,
            num_alpha: 1,
            num_points: 0,
            trials: 0,
            updates: 0,
        }
    }

    #[test]
    fn csv_has_the_documented_columns() {
        let trace = SolveTrace {
            records: vec![rec(0.0, -1.0, 2.0)],
        };
        let csv = trace.to_csv();
        assert!(csv.starts_with("time_s,lower_b0,upper_b0,num_alpha,num_points,trials,updates\n"));
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn monotonicity_check() {
        let good = SolveTrace {
            records: vec![rec(0.0, -1.0, 2.0), rec(1.0, -0.5, 1.0)],
        };
        let bad = SolveTrace {
            records: vec![rec(0.0, -1.0, 2.0), rec(1.0, -1.5, 1.0)],
        };
        assert!(good.is_monotone(0.0));
        assert!(!bad.is_monotone(0.0));
    }
}
