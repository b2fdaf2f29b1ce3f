//! CNOT and depth traces along loops and across sweeps.

use serde::{Deserialize, Serialize};

use crate::avqds::TrajectoryRecord;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourcePoint {
    pub rho: f64,
    pub cnot: usize,
    pub depth: usize,
    pub n_theta: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub period: f64,
    pub delta: f64,
    pub interaction: f64,
    pub l2_cut: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceTrace {
    pub meta: RunMeta,
    pub points: Vec<ResourcePoint>,
}

impl ResourceTrace {
    pub fn max_cnot(&self) -> usize {
        self.points.iter().map(|p| p.cnot).max().unwrap_or(0)
    }

    pub fn max_depth(&self) -> usize {
        self.points.iter().map(|p| p.depth).max().unwrap_or(0)
    }

    pub fn initial(&self) -> Option<&ResourcePoint> {
        self.points.first()
    }

    pub fn last(&self) -> Option<&ResourcePoint> {
        self.points.last()
    }
}

/// Copies the per-step metrics, rejecting traces whose counts ever shrink.
pub fn trace_from_trajectory(traj: &TrajectoryRecord, meta: RunMeta) -> Result<ResourceTrace> {
    let points: Vec<ResourcePoint> = traj
        .steps
        .iter()
        .map(|r| ResourcePoint {
            rho: r.rho,
            cnot: r.cnot,
            depth: r.depth,
            n_theta: r.n_theta,
        })
        .collect();
    for (k, w) in points.windows(2).enumerate() {
        if w[1].cnot < w[0].cnot || w[1].depth < w[0].depth || w[1].n_theta < w[0].n_theta {
            return Err(Error::Internal(format!(
                "resource counts decreased at step {}",
                k + 1
            )));
        }
    }
    Ok(ResourceTrace { meta, points })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub period: f64,
    pub max_cnot: usize,
    pub max_depth: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub max_cnot: usize,
    pub max_depth: usize,
    /// Mean maximum CNOT count for `δ < 0` over that for `δ > 0`.
    pub nontrivial_ratio: Option<f64>,
}

pub fn sweep_summary(traces: &[ResourceTrace]) -> SweepSummary {
    let rows: Vec<SweepRow> = traces
        .iter()
        .map(|t| SweepRow {
            delta: t.meta.delta,
            period: t.meta.period,
            max_cnot: t.max_cnot(),
            max_depth: t.max_depth(),
        })
        .collect();
    let mean = |pick: &dyn Fn(f64) -> bool| {
        let sel: Vec<f64> = rows
            .iter()
            .filter(|r| pick(r.delta))
            .map(|r| r.max_cnot as f64)
            .collect();
        (!sel.is_empty()).then(|| sel.iter().sum::<f64>() / sel.len() as f64)
    };
    let nontrivial_ratio = match (mean(&|d| d < 0.0), mean(&|d| d > 0.0)) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    };
    SweepSummary {
        max_cnot: rows.iter().map(|r| r.max_cnot).max().unwrap_or(0),
        max_depth: rows.iter().map(|r| r.max_depth).max().unwrap_or(0),
        rows,
        nontrivial_ratio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::avqds::StepRecord;

    fn meta(delta: f64) -> RunMeta {
        RunMeta {
            period: 20.0,
            delta,
            interaction: 0.0,
            l2_cut: 1e-4,
        }
    }

    fn record(step: usize, cnot: usize, depth: usize) -> StepRecord {
        StepRecord {
            step,
            s: step as f64,
            t: step as f64,
            rho: 0.1 * step as f64,
            energy: 0.0,
            l2: 0.0,
            n_theta: cnot / 2,
            cnot,
            depth,
            phi_g1: 0.0,
            phi_g2: 0.0,
            infid_f: None,
            infid_ft: None,
        }
    }

    #[test]
    fn empty_run_gives_empty_trace() {
        let t = trace_from_trajectory(&TrajectoryRecord::default(), meta(-0.3)).unwrap();
        assert!(t.points.is_empty());
        assert_eq!(t.max_cnot(), 0);
    }

    #[test]
    fn shrinking_counts_rejected() {
        let traj = TrajectoryRecord {
            steps: vec![record(0, 8, 2), record(1, 6, 2)],
            ..TrajectoryRecord::default()
        };
        assert!(matches!(
            trace_from_trajectory(&traj, meta(0.3)),
            Err(Error::Internal(_))
        ));
    }

    #[test]
    fn summary_ratio() {
        let mk = |d: f64, c: usize| ResourceTrace {
            meta: meta(d),
            points: vec![ResourcePoint {
                rho: 0.0,
                cnot: c,
                depth: c / 4,
                n_theta: c / 2,
            }],
        };
        let s = sweep_summary(&[mk(-0.5, 400), mk(-0.3, 200), mk(0.5, 100)]);
        assert_eq!(s.max_cnot, 400);
        assert_eq!(s.max_depth, 100);
        assert_eq!(s.nontrivial_ratio, Some(3.0));
        assert_eq!(sweep_summary(&[mk(0.5, 10)]).nontrivial_ratio, None);
    }
}
