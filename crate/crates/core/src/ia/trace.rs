use std::fmt::Write as _;

use crate::conic::Status;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Feasibility,
    Refinement,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Feasibility => "feasibility",
            Phase::Refinement => "refinement",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub phase: Phase,
    /// `η` in the feasibility phase, `r` afterwards.
    pub objective: f64,
    /// Minimum e2e rate of the point after slack removal.
    pub exact_rate: f64,
    pub status: Status,
    pub tangency: f64,
    pub millis: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn push(&mut self, rec: IterationRecord) {
        self.records.push(rec);
    }

    pub fn phase_len(&self, phase: Phase) -> usize {
        self.records.iter().filter(|r| r.phase == phase).count()
    }

    pub fn refinement_objectives(&self) -> Vec<f64> {
        self.records.iter().filter(|r| r.phase == Phase::Refinement).map(|r| r.objective).collect()
    }

    /// Largest decrease between consecutive refinement objectives (0 if monotone).
    pub fn max_refinement_drop(&self) -> f64 {
        self.refinement_objectives().windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,phase,objective,solver_status,tangency_residual,millis\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{:.12e},{:?},{:.3e},{:.3}",
                r.iteration,
                r.phase.as_str(),
                r.objective,
                r.status,
                r.tangency,
                r.millis
            );
        }
        s
    }
}
