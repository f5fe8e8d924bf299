use serde::Serialize;

use super::spec::{EquationSpec, Metric};
use crate::energy::{energy_a, linear_energy, nlw_energy, EnergyA, EnergyBreakdown};
use crate::error::Result;
use crate::lattice::WaveState;

/// Diagnostics recorded at one time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub energy: EnergyBreakdown,
    pub a: EnergyA,
    pub sup_u: f64,
    pub sup_ut: f64,
    pub seam_tail: f64,
}

impl Sample {
    /// Energy is the conserved one for power nonlinearities with the identity
    /// metric, otherwise the linear energy.
    pub fn of(state: &WaveState, spec: &EquationSpec, k: u8) -> Result<Self> {
        let energy = match (spec.nonlinearity.power(), &spec.metric) {
            (Some((mu, p)), Metric::Identity) => nlw_energy(state, mu, p)?,
            _ => linear_energy(state),
        };
        Ok(Self {
            t: state.t,
            energy,
            a: energy_a(state, k)?,
            sup_u: state.u.sup_norm(),
            sup_ut: state.ut.sup_norm(),
            seam_tail: state.u.seam_tail_fraction(),
        })
    }

    /// `sup|u| + sup|u_t|`, the continuation quantity.
    pub fn continuation(&self) -> f64 {
        self.sup_u + self.sup_ut
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BlowUpRecord {
    /// Last time reached with norms below the threshold.
    pub t: f64,
    pub sup_u: f64,
    pub sup_ut: f64,
    /// Smallest step tried on the failing step.
    pub last_dt: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    BlowUp(BlowUpRecord),
    /// Stopped early by a caller-supplied predicate.
    Stopped,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// States at the sample times, when requested.
    pub states: Vec<WaveState>,
    pub outcome: Outcome,
    pub final_state: WaveState,
    pub steps: usize,
    pub spec_hash: String,
}

impl Trajectory {
    pub fn blew_up(&self) -> bool {
        matches!(self.outcome, Outcome::BlowUp(_))
    }

    pub fn blowup(&self) -> Option<BlowUpRecord> {
        match self.outcome {
            Outcome::BlowUp(r) => Some(r),
            _ => None,
        }
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectories hold the initial sample")
    }

    /// `max |E(t) - E(0)|` over the samples.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.samples[0].energy.total;
        self.samples
            .iter()
            .map(|s| (s.energy.total - e0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_a(&self) -> f64 {
        self.samples.iter().map(|s| s.a.value).fold(0.0, f64::max)
    }

    pub fn is_time_ordered(&self) -> bool {
        self.samples.windows(2).all(|w| w[0].t < w[1].t)
    }
}
