//! Time grids with attached states, the unit of all analysis.

use crate::error::{Error, Result};
use crate::quadratic::State;

/// One accepted step: the time and the state reached.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub u: State,
}

/// Descriptive metadata attached to a trajectory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryMeta {
    /// Method label, e.g. "kahan", "kahan-cdc", "dopri5".
    pub method: String,
    /// Record spacing (interval length for CDC runs).
    pub dt: f64,
    /// Correction count S, when produced by deferred correction.
    pub corrections: Option<usize>,
    /// Nodes per interval n, when produced by deferred correction.
    pub nodes: Option<usize>,
}

/// A sequence of records with strictly increasing, finite times.
#[derive(Clone, Debug)]
pub struct Trajectory {
    records: Vec<StepRecord>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn new(meta: TrajectoryMeta) -> Self {
        Self {
            records: Vec::new(),
            meta,
        }
    }

    pub fn with_capacity(meta: TrajectoryMeta, capacity: usize) -> Self {
        Self {
            records: Vec::with_capacity(capacity),
            meta,
        }
    }

    /// Appends a record, enforcing finite values and monotone time.
    pub fn push(&mut self, record: StepRecord) -> Result<()> {
        if !record.t.is_finite() {
            return Err(Error::NonFinite {
                context: "trajectory time",
            });
        }
        if !record.u.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite {
                context: "trajectory state",
            });
        }
        if let Some(last) = self.records.last() {
            if record.t <= last.t {
                return Err(Error::Config(format!(
                    "trajectory times must increase strictly: {} after {}",
                    record.t, last.t
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.t)
    }

    pub fn states(&self) -> impl Iterator<Item = &State> + '_ {
        self.records.iter().map(|r| &r.u)
    }

    pub fn first(&self) -> Option<&StepRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&StepRecord> {
        self.records.last()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadratic::state;

    #[test]
    fn push_enforces_monotone_time() {
        let mut traj = Trajectory::new(TrajectoryMeta::default());
        traj.push(StepRecord {
            t: 0.0,
            u: state(&[1.0]),
        })
        .unwrap();
        traj.push(StepRecord {
            t: 1.0,
            u: state(&[2.0]),
        })
        .unwrap();
        assert!(traj
            .push(StepRecord {
                t: 1.0,
                u: state(&[3.0]),
            })
            .is_err());
        assert_eq!(traj.len(), 2);
    }

    #[test]
    fn push_rejects_non_finite() {
        let mut traj = Trajectory::new(TrajectoryMeta::default());
        assert!(traj
            .push(StepRecord {
                t: f64::NAN,
                u: state(&[1.0]),
            })
            .is_err());
        assert!(traj
            .push(StepRecord {
                t: 0.0,
                u: state(&[f64::INFINITY]),
            })
            .is_err());
        assert!(traj.is_empty());
    }
}
