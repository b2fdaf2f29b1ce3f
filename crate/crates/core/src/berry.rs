//! Cyclic twist protocol, interferometric readout and Berry-phase assembly.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::avqds::{evolve, DynConfig, TrajectoryRecord};
use crate::avqite::{avqite_run, ItConfig, ItReport};
use crate::error::{check_qubits, Error, Result};
use crate::model::{
    ground_prep_reference, hamiltonian_pool, qubit_excitation_pool, ModelParams, TwistFamily,
};
use crate::pauli::{inner, StateVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Half {
    Forward,
    Backward,
}

impl Half {
    /// Sign of the physical time step.
    pub fn sign(self) -> f64 {
        match self {
            Half::Forward => 1.0,
            Half::Backward => -1.0,
        }
    }
}

/// Forward-then-backward loop of duration `T`.
///
/// Positions along the loop are given by the elapsed protocol time `s ∈ [0, T]`.
/// The physical time is `t = s` in the first half and `t = T − s` in the second,
/// while the twist `ρ = 2πs/T` grows monotonically from 0 to 2π.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopSchedule {
    period: f64,
}

impl LoopSchedule {
    pub fn new(period: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "loop period must be positive, got {period}"
            )));
        }
        Ok(Self { period })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn half_period(&self) -> f64 {
        0.5 * self.period
    }

    /// Half-cycle that the step starting at `s` belongs to.
    pub fn half(&self, s: f64) -> Half {
        if s < self.half_period() {
            Half::Forward
        } else {
            Half::Backward
        }
    }

    pub fn rho(&self, s: f64) -> f64 {
        TAU * s / self.period
    }

    pub fn time(&self, s: f64) -> f64 {
        if s <= self.half_period() {
            s
        } else {
            self.period - s
        }
    }

    /// Twist at physical time `t` within the given half-cycle.
    pub fn rho_at(&self, t: f64, half: Half) -> f64 {
        match half {
            Half::Forward => TAU * t / self.period,
            Half::Backward => TAU * (self.period - t) / self.period,
        }
    }
}

/// Reduces to (−π, π] via `φ − 2π·round(φ/2π)` with ties rounded away from zero.
pub fn principal_value(phi: f64) -> f64 {
    let r = phi - TAU * (phi / TAU).round();
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

/// Simulated Hadamard-test readout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Overlap {
    /// Probability of the ancilla reading 0.
    pub p0: f64,
    pub phi_qc: f64,
    /// `|⟨initial|final⟩|`.
    pub modulus: f64,
}

impl Overlap {
    pub fn is_adiabatic(&self) -> bool {
        self.modulus >= NONADIABATIC_MODULUS
    }
}

/// Overlap modulus below which the loop is flagged as nonadiabatic.
pub const NONADIABATIC_MODULUS: f64 = 0.5;

pub fn hadamard_overlap(initial: &StateVector, fin: &StateVector) -> Result<Overlap> {
    check_qubits(initial.n_qubits(), fin.n_qubits())?;
    let z = inner(initial.amplitudes(), fin.amplitudes());
    let phi = if z.norm() > 0.0 { principal_value(z.arg()) } else { 0.0 };
    Ok(Overlap {
        p0: (0.5 * (1.0 + z.re)).clamp(0.0, 1.0),
        phi_qc: phi,
        modulus: z.norm(),
    })
}

pub fn make_loop_schedule(period: f64, cfg: &DynConfig) -> Result<LoopSchedule> {
    cfg.validate()?;
    LoopSchedule::new(period)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    GroundPrepUnconverged { steps: usize },
    GroundPrepSaturated,
    GrowthSaturated,
    Nonadiabatic { modulus: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct BerryResult {
    pub params: ModelParams,
    pub period: f64,
    pub phi_qc: f64,
    pub p0: f64,
    pub overlap_modulus: f64,
    pub phi_g: f64,
    pub phi_g1: f64,
    pub phi_g2: f64,
    pub phi_b: f64,
    pub phi_b_principal: f64,
    pub ground_prep: ItReport,
    pub rejected_steps: usize,
    pub warnings: Vec<Warning>,
    #[serde(skip)]
    pub trajectory: TrajectoryRecord,
    #[serde(skip)]
    pub initial: StateVector,
    #[serde(skip)]
    pub final_state: StateVector,
}

impl BerryResult {
    /// Nonadiabatic loop or unconverged ground-state preparation.
    pub fn is_flagged(&self) -> bool {
        self.warnings.iter().any(|w| {
            matches!(
                w,
                Warning::Nonadiabatic { .. } | Warning::GroundPrepUnconverged { .. }
            )
        })
    }
}

/// Ground-state preparation at `ρ = 0`, the variational loop and the
/// interferometric readout.
pub fn run_berry(
    params: &ModelParams,
    period: f64,
    cfg_it: &ItConfig,
    cfg_dyn: &DynConfig,
) -> Result<BerryResult> {
    params.validate()?;
    let schedule = make_loop_schedule(period, cfg_dyn)?;
    let family = TwistFamily::new(params)?;
    let it_pool = qubit_excitation_pool(params.n_qubits())?;
    let dyn_pool = hamiltonian_pool(params)?;
    let (ansatz, ground_prep) = avqite_run(
        &family.at(0.0),
        &ground_prep_reference(params)?,
        cfg_it,
        &it_pool,
    )?;
    let initial = ansatz.evaluate();
    let ev = evolve(ansatz, &family, &schedule, cfg_dyn, &dyn_pool)?;
    let final_state = ev.ansatz.evaluate();
    let overlap = hadamard_overlap(&initial, &final_state)?;
    let phi_g = ev.phases.phi_g();
    let phi_b = overlap.phi_qc + phi_g;

    let mut warnings = Vec::new();
    if !ground_prep.converged {
        warnings.push(Warning::GroundPrepUnconverged {
            steps: ground_prep.steps,
        });
    }
    if ground_prep.saturated {
        warnings.push(Warning::GroundPrepSaturated);
    }
    if ev.saturated {
        warnings.push(Warning::GrowthSaturated);
    }
    if !overlap.is_adiabatic() {
        warnings.push(Warning::Nonadiabatic {
            modulus: overlap.modulus,
        });
    }
    Ok(BerryResult {
        params: *params,
        period,
        phi_qc: overlap.phi_qc,
        p0: overlap.p0,
        overlap_modulus: overlap.modulus,
        phi_g,
        phi_g1: ev.phases.phi_g1,
        phi_g2: ev.phases.phi_g2,
        phi_b,
        phi_b_principal: principal_value(phi_b),
        ground_prep,
        rejected_steps: ev.rejected_steps,
        warnings,
        trajectory: ev.trajectory,
        initial,
        final_state,
    })
}

/// Half-cycle split of the global phase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub phi_g1_forward: f64,
    pub phi_g1_backward: f64,
    pub phi_g2_forward: f64,
    pub phi_g2_backward: f64,
    pub phi_g1: f64,
    pub phi_g2: f64,
    /// Share of the units appended during the loop that arrived in the second half.
    pub backward_growth_fraction: f64,
}

pub fn symmetry_report(traj: &TrajectoryRecord) -> Result<SymmetryReport> {
    let last = traj
        .steps
        .last()
        .ok_or_else(|| Error::InvalidParameter("empty trajectory".into()))?;
    let half_period = 0.5 * last.s;
    let mid = traj
        .steps
        .iter()
        .find(|r| r.s == half_period)
        .ok_or_else(|| Error::Internal("no record at the half-cycle boundary".into()))?;
    let (mut fwd, mut bwd) = (0usize, 0usize);
    for g in &traj.growth {
        match g.half {
            Half::Forward => fwd += g.generators.len(),
            Half::Backward => bwd += g.generators.len(),
        }
    }
    Ok(SymmetryReport {
        phi_g1_forward: mid.phi_g1,
        phi_g1_backward: last.phi_g1 - mid.phi_g1,
        phi_g2_forward: mid.phi_g2,
        phi_g2_backward: last.phi_g2 - mid.phi_g2,
        phi_g1: last.phi_g1,
        phi_g2: last.phi_g2,
        backward_growth_fraction: if fwd + bwd == 0 {
            0.0
        } else {
            bwd as f64 / (fwd + bwd) as f64
        },
    })
}
