//! Adaptive variational real-time evolution around the twist loop.

use serde::{Deserialize, Serialize};

use crate::ansatz::{Ansatz, SolvedFlow, Tangent, UnitOrigin, DEFAULT_LAMBDA};
use crate::berry::{Half, LoopSchedule};
use crate::error::{Error, Result};
use crate::model::{OperatorPool, TwistFamily};
use crate::pauli::{CompiledSum, PauliString, StateVector};

/// Sign in front of `Im Σ⟨Ψ|∂_μΨ⟩θ̇_μ` in the global-phase equation.
///
/// Projecting `i∂_t(e^{iφ}|Ψ⟩) = H e^{iφ}|Ψ⟩` onto `⟨Ψ|` gives
/// `φ̇ = −⟨H⟩ − Im⟨Ψ|Ψ̇⟩`.
pub const GEOMETRIC_PHASE_SIGN: f64 = -1.0;

/// Default weight of the phase-velocity penalty in the θ̇ solve.
pub const DEFAULT_PHASE_WEIGHT: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DynConfig {
    pub l2_cut: f64,
    pub dtheta_max: f64,
    /// Cap on the first step; defaults to `dt_max`.
    pub dt_init: Option<f64>,
    /// Defaults to `T/200`.
    pub dt_max: Option<f64>,
    /// Constant step size, bypassing the `dtheta_max` rule.
    pub fixed_dt: Option<f64>,
    pub lambda_reg: f64,
    /// Weight of the global-phase-velocity penalty in the θ̇ solve.
    pub phase_weight: f64,
    pub keep_snapshots: bool,
}

impl Default for DynConfig {
    fn default() -> Self {
        Self {
            l2_cut: 1e-4,
            dtheta_max: 0.01,
            dt_init: None,
            dt_max: None,
            fixed_dt: None,
            lambda_reg: DEFAULT_LAMBDA,
            phase_weight: DEFAULT_PHASE_WEIGHT,
            keep_snapshots: true,
        }
    }
}

impl DynConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("l2_cut", self.l2_cut)?;
        positive("dtheta_max", self.dtheta_max)?;
        for (name, v) in [
            ("dt_init", self.dt_init),
            ("dt_max", self.dt_max),
            ("fixed_dt", self.fixed_dt),
        ] {
            if let Some(v) = v {
                positive(name, v)?;
            }
        }
        if !(self.lambda_reg >= 0.0 && self.lambda_reg.is_finite()) {
            return Err(Error::InvalidParameter("lambda_reg must be non-negative".into()));
        }
        Ok(())
    }

    pub fn dt_max_for(&self, period: f64) -> f64 {
        self.dt_max.unwrap_or(period / 200.0)
    }

    pub fn solve(&self) -> FlowSolve {
        FlowSolve {
            lambda: self.lambda_reg,
            gauge: self.phase_weight,
        }
    }
}

/// Regularization used for every real-time solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowSolve {
    pub lambda: f64,
    pub gauge: f64,
}

impl FlowSolve {
    pub fn flow(&self, tangent: &Tangent) -> Result<SolvedFlow> {
        SolvedFlow::real_time_gauged(&tangent.real_time(), self.lambda, self.gauge)
    }
}

/// Global phase split into its dynamical and geometric parts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseAccumulator {
    pub phi_g1: f64,
    pub phi_g2: f64,
}

impl PhaseAccumulator {
    pub fn phi_g(&self) -> f64 {
        self.phi_g1 + self.phi_g2
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// Elapsed protocol time.
    pub s: f64,
    pub t: f64,
    pub rho: f64,
    pub energy: f64,
    pub l2: f64,
    pub n_theta: usize,
    pub cnot: usize,
    pub depth: usize,
    pub phi_g1: f64,
    pub phi_g2: f64,
    pub infid_f: Option<f64>,
    pub infid_ft: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthEvent {
    pub step: usize,
    pub s: f64,
    pub half: Half,
    pub generators: Vec<PauliString>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryRecord {
    pub steps: Vec<StepRecord>,
    /// One state per step record when snapshots are kept.
    pub snapshots: Vec<StateVector>,
    pub growth: Vec<GrowthEvent>,
}

/// Result of [`evolve`].
#[derive(Clone, Debug)]
pub struct Evolution {
    pub ansatz: Ansatz,
    pub phases: PhaseAccumulator,
    pub trajectory: TrajectoryRecord,
    pub saturated: bool,
    /// Steps retried with a shorter `δt`.
    pub rejected_steps: usize,
}

/// `H(ρ)` assembled from pre-compiled parts.
#[derive(Clone, Debug)]
pub struct CompiledFamily {
    parts: [CompiledSum; 3],
}

impl CompiledFamily {
    pub fn new(family: &TwistFamily) -> Self {
        let [a, b, c] = family.parts();
        Self {
            parts: [a.compile(), b.compile(), c.compile()],
        }
    }

    pub fn at(&self, rho: f64) -> CompiledSum {
        CompiledSum::combination(&[
            (1.0, &self.parts[0]),
            (rho.cos(), &self.parts[1]),
            (rho.sin(), &self.parts[2]),
        ])
        .expect("parts share a register")
    }
}

/// θ̇ and phase integrands at one RK4 node.
#[derive(Clone, Debug)]
pub struct Stage {
    pub theta_dot: nalgebra::DVector<f64>,
    pub energy: f64,
    /// `Σ Im⟨Ψ|∂_μΨ⟩θ̇_μ`.
    pub connection_rate: f64,
}

impl Stage {
    fn from_flow(tangent: &Tangent, flow: &SolvedFlow) -> Self {
        let rate = tangent
            .overlaps
            .iter()
            .zip(flow.theta_dot.iter())
            .map(|(a, td)| a.im * td)
            .sum();
        Self {
            theta_dot: flow.theta_dot.clone(),
            energy: tangent.energy,
            connection_rate: rate,
        }
    }

    pub fn evaluate(a: &Ansatz, h: &CompiledSum, solve: FlowSolve) -> Result<Self> {
        let tangent = a.tangent(h)?;
        let flow = solve.flow(&tangent)?;
        Ok(Self::from_flow(&tangent, &flow))
    }
}

/// `δt = min(dt_max, dtheta_max / max|θ̇|)`, or `dt_max` when θ̇ vanishes.
pub fn adaptive_dt(theta_dot: &nalgebra::DVector<f64>, dtheta_max: f64, dt_max: f64) -> f64 {
    let peak = theta_dot.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak > 0.0 {
        dt_max.min(dtheta_max / peak)
    } else {
        dt_max
    }
}

/// Classical RK4 over θ with the phases integrated on the same nodes.
///
/// `dt` is a signed physical time step. `k1`, when given, must be the stage at
/// `(t, θ)`.
pub fn rk4_step<F>(
    a: &Ansatz,
    ham_at: F,
    t: f64,
    dt: f64,
    acc: PhaseAccumulator,
    solve: FlowSolve,
    k1: Option<Stage>,
) -> Result<(Ansatz, PhaseAccumulator)>
where
    F: Fn(f64) -> CompiledSum,
{
    rk4(a, ham_at, t, dt, acc, solve, k1).map(|(a, acc, _)| (a, acc))
}

/// As [`rk4_step`], also returning the largest `|θ̇_μ|` over all four stages.
fn rk4<F>(
    a: &Ansatz,
    ham_at: F,
    t: f64,
    dt: f64,
    acc: PhaseAccumulator,
    solve: FlowSolve,
    k1: Option<Stage>,
) -> Result<(Ansatz, PhaseAccumulator, f64)>
where
    F: Fn(f64) -> CompiledSum,
{
    let theta0 = a.thetas();
    let k1 = match k1 {
        Some(k) => k,
        None => Stage::evaluate(a, &ham_at(t), solve)?,
    };
    let h_mid = ham_at(t + 0.5 * dt);
    let k2 = Stage::evaluate(&a.with_thetas(&(&theta0 + &k1.theta_dot * (0.5 * dt)))?, &h_mid, solve)?;
    let k3 = Stage::evaluate(&a.with_thetas(&(&theta0 + &k2.theta_dot * (0.5 * dt)))?, &h_mid, solve)?;
    let k4 = Stage::evaluate(&a.with_thetas(&(&theta0 + &k3.theta_dot * dt))?, &ham_at(t + dt), solve)?;
    let w = dt / 6.0;
    let theta = &theta0
        + (&k1.theta_dot + &k2.theta_dot * 2.0 + &k3.theta_dot * 2.0 + &k4.theta_dot) * w;
    if theta.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("theta"));
    }
    let ks = [&k1, &k2, &k3, &k4];
    let avg = |f: &dyn Fn(&Stage) -> f64| {
        w * (f(ks[0]) + 2.0 * f(ks[1]) + 2.0 * f(ks[2]) + f(ks[3]))
    };
    let next = PhaseAccumulator {
        phi_g1: acc.phi_g1 - avg(&|k| k.energy),
        phi_g2: acc.phi_g2 + GEOMETRIC_PHASE_SIGN * avg(&|k| k.connection_rate),
    };
    let peak = ks
        .iter()
        .flat_map(|k| k.theta_dot.iter())
        .fold(0.0f64, |m, x| m.max(x.abs()));
    Ok((a.with_thetas(&theta)?, next, peak))
}

/// Smallest drop in L², relative to `l2_cut`, that justifies appending a unit.
pub const MIN_GROWTH_GAIN: f64 = 1e-2;

/// TETRIS growth at fixed Hamiltonian. Returns the generators appended in each
/// iteration and whether growth stalled above the cutoff.
pub fn screen_and_grow(
    a: &mut Ansatz,
    h: &CompiledSum,
    cfg: &DynConfig,
    pool: &OperatorPool,
) -> Result<(Vec<Vec<PauliString>>, bool)> {
    let mut tangent = a.tangent(h)?;
    let mut flow = cfg.solve().flow(&tangent)?;
    let (iterations, saturated) = grow(a, h, cfg, pool, &mut tangent, &mut flow)?;
    Ok((iterations, saturated))
}

fn grow(
    a: &mut Ansatz,
    h: &CompiledSum,
    cfg: &DynConfig,
    pool: &OperatorPool,
    tangent: &mut Tangent,
    flow: &mut SolvedFlow,
) -> Result<(Vec<Vec<PauliString>>, bool)> {
    let full = if a.n_qubits() == 64 {
        u64::MAX
    } else {
        (1u64 << a.n_qubits()) - 1
    };
    let mut iterations = Vec::new();
    while flow.distance > cfg.l2_cut {
        let scores = flow.screen(tangent, &pool.elements);
        let mut ranked: Vec<usize> = (0..scores.len()).collect();
        ranked.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]).then(i.cmp(&j)));
        let gain = (MIN_GROWTH_GAIN * cfg.l2_cut).max(1e-12);
        let useful = |i: usize| scores[i] < flow.distance - gain;
        if ranked.first().map_or(true, |&i| !useful(i)) {
            return Ok((iterations, true));
        }
        let mut covered = 0u64;
        let mut chosen = Vec::new();
        for &i in &ranked {
            let p = pool.elements[i];
            if useful(i) && p.support() & covered == 0 {
                covered |= p.support();
                chosen.push(p);
                if covered == full {
                    break;
                }
            }
        }
        for p in &chosen {
            a.push(*p, 0.0, UnitOrigin::Dynamics)?;
        }
        iterations.push(chosen);
        *tangent = a.tangent(h)?;
        *flow = cfg.solve().flow(&tangent)?;
    }
    Ok((iterations, false))
}

/// A step is retried with a shorter `δt` when any RK4 stage moves some angle by
/// more than this multiple of `dtheta_max`.
pub const STAGE_SLACK: f64 = 2.0;

/// With a fixed step, a step is retried shorter only when some RK4 stage would
/// move an angle by more than this.
pub const FIXED_STEP_MAX_ANGLE: f64 = 0.3;

/// Runs the forward-then-backward loop starting from `a` at `ρ = 0`.
pub fn evolve(
    a: Ansatz,
    family: &TwistFamily,
    schedule: &LoopSchedule,
    cfg: &DynConfig,
    pool: &OperatorPool,
) -> Result<Evolution> {
    cfg.validate()?;
    let compiled = CompiledFamily::new(family);
    let period = schedule.period();
    let half_period = schedule.half_period();
    let dt_cap = cfg.dt_max_for(period);
    let mut a = a;
    let mut acc = PhaseAccumulator::default();
    let mut traj = TrajectoryRecord::default();
    let mut saturated = false;
    let mut s = 0.0f64;
    let mut step = 0usize;
    let mut rejected = 0usize;
    loop {
        let done = s >= period;
        let h = compiled.at(schedule.rho(s));
        let mut tangent = a.tangent(&h)?;
        let mut flow = cfg.solve().flow(&tangent)?;
        if !done {
            let (iterations, stalled) = grow(&mut a, &h, cfg, pool, &mut tangent, &mut flow)?;
            saturated |= stalled;
            let generators: Vec<PauliString> = iterations.into_iter().flatten().collect();
            if !generators.is_empty() {
                traj.growth.push(GrowthEvent {
                    step,
                    s,
                    half: schedule.half(s),
                    generators,
                });
            }
        }
        let (cnot, depth) = a.resource_metrics();
        traj.steps.push(StepRecord {
            step,
            s,
            t: schedule.time(s),
            rho: schedule.rho(s),
            energy: tangent.energy,
            l2: flow.distance,
            n_theta: a.len(),
            cnot,
            depth,
            phi_g1: acc.phi_g1,
            phi_g2: acc.phi_g2,
            infid_f: None,
            infid_ft: None,
        });
        if cfg.keep_snapshots {
            traj.snapshots.push(StateVector::from_amplitudes(tangent.psi.clone())?);
        }
        if done {
            break;
        }

        let half = schedule.half(s);
        let sign = half.sign();
        let k1 = Stage::from_flow(&tangent, &flow);
        let mut ds = match cfg.fixed_dt {
            Some(dt) => dt,
            None => adaptive_dt(&k1.theta_dot, cfg.dtheta_max, dt_cap),
        };
        if step == 0 {
            if let Some(dt0) = cfg.dt_init {
                ds = ds.min(dt0);
            }
        }
        let boundary = if half == Half::Forward { half_period } else { period };
        let mut landing = ds >= boundary - s - 1e-12 * period;
        if landing {
            ds = boundary - s;
        }
        let t = schedule.time(s);
        let ham_at = |tt: f64| compiled.at(schedule.rho_at(tt, half));
        let (next, next_acc) = loop {
            let (next, next_acc, peak) =
                rk4(&a, ham_at, t, sign * ds, acc, cfg.solve(), Some(k1.clone()))?;
            let (limit, retry) = match cfg.fixed_dt {
                Some(_) => (FIXED_STEP_MAX_ANGLE, FIXED_STEP_MAX_ANGLE),
                None => (STAGE_SLACK * cfg.dtheta_max, cfg.dtheta_max),
            };
            if peak * ds <= limit {
                break (next, next_acc);
            }
            ds = retry / peak;
            landing = false;
            rejected += 1;
        };
        a = next;
        acc = next_acc;
        s = if landing { boundary } else { s + ds };
        step += 1;
    }
    let t_end = traj.steps.last().map_or(0.0, |r| r.t);
    if t_end.abs() > 1e-9 {
        return Err(Error::Internal(format!("loop ended at t = {t_end}")));
    }
    Ok(Evolution {
        ansatz: a,
        phases: acc,
        trajectory: traj,
        saturated,
        rejected_steps: rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{PauliSum, C64};
    use nalgebra::DVector;

    #[test]
    fn dt_rule() {
        let td = DVector::from_vec(vec![0.1, -0.05]);
        assert!((adaptive_dt(&td, 0.01, 1.0) - 0.1).abs() < 1e-15);
        assert_eq!(adaptive_dt(&DVector::zeros(2), 0.01, 0.5), 0.5);
        let huge = DVector::from_vec(vec![1e6]);
        assert!((adaptive_dt(&huge, 0.01, 1.0) - 1e-8).abs() < 1e-20);
    }

    #[test]
    fn stationary_state_accumulates_dynamical_phase() {
        let h = PauliSum::from_terms(
            2,
            [
                (C64::new(0.8, 0.0), "ZZ".parse().unwrap()),
                (C64::new(-0.3, 0.0), "ZI".parse().unwrap()),
            ],
        )
        .unwrap();
        let mut a = Ansatz::new(StateVector::basis(2, 1).unwrap());
        a.push("ZI".parse().unwrap(), 0.2, UnitOrigin::Dynamics).unwrap();
        let hc = h.compile();
        let e = 0.8 * -1.0 + -0.3 * -1.0;
        let mut acc = PhaseAccumulator::default();
        let mut t = 0.0;
        for _ in 0..10 {
            let (next, next_acc) = rk4_step(&a, |_| hc.clone(), t, 0.1, acc, DynConfig::default().solve(), None).unwrap();
            assert_eq!(next.thetas(), a.thetas());
            a = next;
            acc = next_acc;
            t += 0.1;
        }
        assert!((acc.phi_g1 + e * 1.0).abs() < 1e-9);
        assert!(acc.phi_g2.abs() < 1e-10);
    }

    #[test]
    fn growth_is_skipped_below_cutoff() {
        let h = PauliSum::from_terms(1, [(C64::new(1.0, 0.0), "Z".parse().unwrap())]).unwrap();
        let mut a = Ansatz::new(StateVector::basis(1, 0).unwrap());
        let pool = OperatorPool {
            kind: crate::model::PoolKind::Hamiltonian,
            elements: vec!["X".parse().unwrap()],
        };
        let (it, sat) = screen_and_grow(&mut a, &h.compile(), &DynConfig::default(), &pool).unwrap();
        assert!(it.is_empty() && !sat && a.is_empty());
    }
}
