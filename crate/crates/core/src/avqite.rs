//! Adaptive variational imaginary-time evolution for ground-state preparation.

use serde::{Deserialize, Serialize};

use crate::ansatz::{Ansatz, SolvedFlow, UnitOrigin, DEFAULT_LAMBDA};
use crate::error::{Error, Result};
use crate::model::OperatorPool;
use crate::pauli::{PauliSum, StateVector};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ItConfig {
    pub dtau: f64,
    pub l2_cut_it: f64,
    pub max_steps: usize,
    /// Stop once the energy variance, or the energy drop per unit of
    /// imaginary time, falls below this.
    pub energy_tol: f64,
    pub lambda_reg: f64,
}

impl Default for ItConfig {
    fn default() -> Self {
        Self {
            dtau: 0.02,
            l2_cut_it: 1e-2,
            max_steps: 5000,
            energy_tol: 1e-8,
            lambda_reg: DEFAULT_LAMBDA,
        }
    }
}

impl ItConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dtau", self.dtau),
            ("l2_cut_it", self.l2_cut_it),
            ("energy_tol", self.energy_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.lambda_reg >= 0.0 && self.lambda_reg.is_finite()) {
            return Err(Error::InvalidParameter("lambda_reg must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Variance,
    Stalled,
    MaxSteps,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItReport {
    pub energy: f64,
    pub variance: f64,
    pub steps: usize,
    pub stop: StopReason,
    /// False only when `max_steps` ran out.
    pub converged: bool,
    /// Growth stopped because no pool element lowered the distance.
    pub saturated: bool,
    pub n_theta: usize,
    pub cnot: usize,
    pub depth: usize,
    /// Energy before every step and at the end.
    pub energies: Vec<f64>,
    /// Filled in by callers holding a reference ground state.
    pub infidelity: Option<f64>,
}

/// Index of the smallest score; earlier entries win ties.
pub(crate) fn argmin(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.map_or(true, |b| s < scores[b]) {
            best = Some(i);
        }
    }
    best
}

pub fn avqite_run(
    h: &PauliSum,
    reference: &StateVector,
    cfg: &ItConfig,
    pool: &OperatorPool,
) -> Result<(Ansatz, ItReport)> {
    cfg.validate()?;
    if !h.is_hermitian(1e-10) {
        return Err(Error::NonHermitian(h.max_imag()));
    }
    let hc = h.compile();
    let mut a = Ansatz::new(reference.clone());
    let mut energies = Vec::new();
    let mut saturated = false;
    let mut steps = 0;
    let (mut energy, mut variance, stop);
    loop {
        let mut tangent = a.tangent(&hc)?;
        energy = tangent.energy;
        variance = tangent.var_h;
        if variance < cfg.energy_tol {
            stop = StopReason::Variance;
            energies.push(energy);
            break;
        }
        if energies
            .last()
            .is_some_and(|&prev| (prev - energy).abs() < cfg.energy_tol * cfg.dtau)
        {
            stop = StopReason::Stalled;
            energies.push(energy);
            break;
        }
        energies.push(energy);
        if steps == cfg.max_steps {
            stop = StopReason::MaxSteps;
            break;
        }
        let mut flow = SolvedFlow::imaginary_time(&tangent.imaginary_time(), cfg.lambda_reg)?;
        while flow.distance > cfg.l2_cut_it && !saturated {
            let scores = flow.screen(&tangent, &pool.elements);
            match argmin(&scores) {
                Some(best) if scores[best] < flow.distance - 1e-14 => {
                    a.push(pool.elements[best], 0.0, UnitOrigin::GroundPrep)?;
                    tangent = a.tangent(&hc)?;
                    flow = SolvedFlow::imaginary_time(&tangent.imaginary_time(), cfg.lambda_reg)?;
                }
                _ => saturated = true,
            }
        }
        let thetas = a.thetas() + &flow.theta_dot * cfg.dtau;
        a.set_thetas(&thetas)?;
        steps += 1;
    }
    let (cnot, depth) = a.resource_metrics();
    let report = ItReport {
        energy,
        variance,
        steps,
        stop,
        converged: stop != StopReason::MaxSteps,
        saturated,
        n_theta: a.len(),
        cnot,
        depth,
        energies,
        infidelity: None,
    };
    Ok((a, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PoolKind;
    use crate::pauli::{PauliString, C64};

    #[test]
    fn argmin_prefers_first() {
        assert_eq!(argmin(&[3.0, 1.0, 1.0]), Some(1));
        assert_eq!(argmin(&[]), None);
    }

    #[test]
    fn single_qubit_relaxes_to_ground_state() {
        // H = −Z + 0.3X from |1⟩, pool {Y}.
        let h = PauliSum::from_terms(
            1,
            [
                (C64::new(-1.0, 0.0), "Z".parse::<PauliString>().unwrap()),
                (C64::new(0.3, 0.0), "X".parse().unwrap()),
            ],
        )
        .unwrap();
        let pool = OperatorPool {
            kind: PoolKind::QubitExcitation,
            elements: vec!["Y".parse().unwrap()],
        };
        let (a, rep) = avqite_run(
            &h,
            &StateVector::basis(1, 1).unwrap(),
            &ItConfig::default(),
            &pool,
        )
        .unwrap();
        assert!(rep.converged);
        assert!((rep.energy + (1.0f64 + 0.09).sqrt()).abs() < 1e-8);
        assert_eq!(a.len(), 1);
        for w in rep.energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
    }

    #[test]
    fn invalid_config() {
        let cfg = ItConfig {
            dtau: 0.0,
            ..ItConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
