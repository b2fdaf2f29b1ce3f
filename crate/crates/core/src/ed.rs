//! Dense exact-diagonalization oracle.
//!
//! Matrices are assembled from Kronecker products of single-qubit matrices and
//! never touch the statevector kernels used by the variational engine.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::avqds::TrajectoryRecord;
use crate::berry::{principal_value, LoopSchedule};
use crate::error::{check_qubits, Error, Result};
use crate::model::{ModelParams, TwistFamily};
use crate::pauli::{PauliString, PauliSum, StateVector, C64};

/// Largest register the dense backend accepts.
pub const DENSE_QUBIT_CAP: usize = 12;

/// Ground states closer than this to the first excited level count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// Default grid for the Wilson loop.
pub const DEFAULT_WILSON_GRID: usize = 256;

/// Default step of the exact propagator.
pub const DEFAULT_ED_DT: f64 = 1e-2;

const MIN_LINK_OVERLAP: f64 = 1e-6;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn letter_matrix(c: char) -> [[C64; 2]; 2] {
    let o = zero();
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match c {
        'X' => [[o, one], [one, o]],
        'Y' => [[o, -i], [i, o]],
        'Z' => [[one, o], [o, -one]],
        _ => [[one, o], [o, one]],
    }
}

/// `P_{n-1} ⊗ … ⊗ P_0`, so qubit `q` is bit `q` of the row index.
pub fn string_matrix(p: &PauliString) -> DMatrix<C64> {
    let mut m = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
    for q in 0..p.n_qubits() {
        let l = letter_matrix(p.letter(q));
        let d = m.nrows();
        let mut next = DMatrix::from_element(2 * d, 2 * d, zero());
        for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            if l[r][c] != zero() {
                next.view_mut((r * d, c * d), (d, d))
                    .copy_from(&(&m * l[r][c]));
            }
        }
        m = next;
    }
    m
}

pub fn dense_matrix(h: &PauliSum) -> Result<DMatrix<C64>> {
    let n = h.n_qubits();
    if n > DENSE_QUBIT_CAP {
        return Err(Error::CapExceeded {
            cap: DENSE_QUBIT_CAP,
            n_qubits: n,
        });
    }
    let dim = 1usize << n;
    let mut m = DMatrix::<C64>::identity(dim, dim) * h.identity_offset();
    for (c, p) in h.terms() {
        m += string_matrix(p) * *c;
    }
    Ok(m)
}

/// Connected components of the union of the matrices' sparsity patterns.
fn blocks_of(mats: &[&DMatrix<C64>]) -> Vec<Vec<usize>> {
    let dim = mats[0].nrows();
    let mut parent: Vec<usize> = (0..dim).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for m in mats {
        for c in 0..dim {
            for r in 0..dim {
                if m[(r, c)].norm() > 1e-14 {
                    let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; dim];
    for i in 0..dim {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(i);
    }
    groups
}

fn sub_matrix(m: &DMatrix<C64>, idx: &[usize]) -> DMatrix<C64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
}

/// Largest-magnitude amplitude made real and positive.
fn fix_gauge(v: &mut [C64]) {
    let mut best = 0;
    for (i, a) in v.iter().enumerate() {
        if a.norm() > v[best].norm() + 1e-12 {
            best = i;
        }
    }
    let n = v[best].norm();
    if n > 0.0 {
        let ph = v[best].conj() / n;
        v.iter_mut().for_each(|a| *a *= ph);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdReport {
    pub ground_energy: f64,
    /// `E₁ − E₀` over the full Fock space.
    pub gap: f64,
    pub ground_state: StateVector,
    /// Full spectrum, ascending.
    pub spectrum: Vec<f64>,
    pub degenerate: bool,
}

/// A Hermitian matrix split into its invariant blocks.
#[derive(Clone, Debug)]
struct Blocked {
    n_qubits: usize,
    blocks: Vec<Vec<usize>>,
}

impl Blocked {
    fn report(&self, m: &DMatrix<C64>) -> Result<EdReport> {
        let mut spectrum = Vec::with_capacity(m.nrows());
        let mut best: Option<(f64, usize, DVector<C64>)> = None;
        for (b, idx) in self.blocks.iter().enumerate() {
            let eig = sub_matrix(m, idx).symmetric_eigen();
            let (k, &e0) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .expect("non-empty block");
            if !e0.is_finite() {
                return Err(Error::Numeric("eigenvalues"));
            }
            spectrum.extend(eig.eigenvalues.iter().copied());
            if best.as_ref().map_or(true, |(e, _, _)| e0 < *e) {
                best = Some((e0, b, eig.eigenvectors.column(k).into_owned()));
            }
        }
        spectrum.sort_by(f64::total_cmp);
        let (e0, b, vec) = best.expect("at least one block");
        let mut amps = vec![zero(); m.nrows()];
        for (k, &i) in self.blocks[b].iter().enumerate() {
            amps[i] = vec[k];
        }
        fix_gauge(&mut amps);
        let ground_state = StateVector::from_amplitudes(amps)?.normalized()?;
        let gap = spectrum.get(1).map_or(f64::INFINITY, |e1| e1 - e0).max(0.0);
        Ok(EdReport {
            ground_energy: e0,
            gap,
            ground_state,
            spectrum,
            degenerate: gap <= DEGENERACY_TOL,
        })
    }
}

pub fn ground_state(h: &PauliSum) -> Result<EdReport> {
    let m = dense_matrix(h)?;
    Blocked {
        n_qubits: h.n_qubits(),
        blocks: blocks_of(&[&m]),
    }
    .report(&m)
}

/// Dense `H(ρ) = A + cos ρ·B + sin ρ·C` with its invariant blocks.
#[derive(Clone, Debug)]
pub struct DenseFamily {
    parts: [DMatrix<C64>; 3],
    blocked: Blocked,
}

impl DenseFamily {
    pub fn new(family: &TwistFamily) -> Result<Self> {
        let [a, b, c] = family.parts();
        let parts = [dense_matrix(a)?, dense_matrix(b)?, dense_matrix(c)?];
        let blocks = blocks_of(&[&parts[0], &parts[1], &parts[2]]);
        Ok(Self {
            parts,
            blocked: Blocked {
                n_qubits: family.n_qubits(),
                blocks,
            },
        })
    }

    /// Twist-independent family `H(ρ) = H`.
    pub fn constant(h: &PauliSum) -> Result<Self> {
        let m = dense_matrix(h)?;
        let dim = m.nrows();
        let blocks = blocks_of(&[&m]);
        Ok(Self {
            parts: [m, DMatrix::zeros(dim, dim), DMatrix::zeros(dim, dim)],
            blocked: Blocked {
                n_qubits: h.n_qubits(),
                blocks,
            },
        })
    }

    pub fn from_params(params: &ModelParams) -> Result<Self> {
        Self::new(&TwistFamily::new(params)?)
    }

    pub fn n_qubits(&self) -> usize {
        self.blocked.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.parts[0].nrows()
    }

    pub fn matrix(&self, rho: f64) -> DMatrix<C64> {
        &self.parts[0] + &self.parts[1] * C64::new(rho.cos(), 0.0)
            + &self.parts[2] * C64::new(rho.sin(), 0.0)
    }

    pub fn ground_state(&self, rho: f64) -> Result<EdReport> {
        self.blocked.report(&self.matrix(rho))
    }

    /// Restriction of the family to the blocks touched by `s`.
    fn restrict(&self, s: &StateVector) -> Subspace {
        let amps = s.amplitudes();
        let mut idx: Vec<usize> = self
            .blocked
            .blocks
            .iter()
            .filter(|b| b.iter().any(|&i| amps[i].norm() > 0.0))
            .flatten()
            .copied()
            .collect();
        idx.sort_unstable();
        let parts = [
            sub_matrix(&self.parts[0], &idx),
            sub_matrix(&self.parts[1], &idx),
            sub_matrix(&self.parts[2], &idx),
        ];
        Subspace { idx, parts }
    }
}

struct Subspace {
    idx: Vec<usize>,
    parts: [DMatrix<C64>; 3],
}

impl Subspace {
    fn matrix(&self, rho: f64) -> DMatrix<C64> {
        &self.parts[0] + &self.parts[1] * C64::new(rho.cos(), 0.0)
            + &self.parts[2] * C64::new(rho.sin(), 0.0)
    }

    fn gather(&self, s: &StateVector) -> DVector<C64> {
        DVector::from_iterator(self.idx.len(), self.idx.iter().map(|&i| s.amplitudes()[i]))
    }

    fn scatter(&self, v: &DVector<C64>, n_qubits: usize) -> StateVector {
        let mut amps = vec![zero(); 1 << n_qubits];
        for (k, &i) in self.idx.iter().enumerate() {
            amps[i] = v[k];
        }
        StateVector::from_amplitudes(amps).expect("power-of-two length")
    }
}

fn one_norm(m: &DMatrix<C64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(-i·h·X)·v` by a Taylor series, substepping when `‖hX‖` is large.
fn expm_apply(x: &DMatrix<C64>, h: f64, v: &DVector<C64>) -> DVector<C64> {
    let scale = (h.abs() * one_norm(x)).max(1e-300);
    let substeps = (scale / 0.5).ceil().max(1.0) as usize;
    let hs = h / substeps as f64;
    let factor = C64::new(0.0, -hs);
    let mut out = v.clone();
    for _ in 0..substeps {
        let mut term = out.clone();
        let mut sum = out.clone();
        for k in 1..60 {
            term = x * term * (factor / k as f64);
            sum += &term;
            if term.norm() <= 1e-17 * sum.norm() {
                break;
            }
        }
        out = sum;
    }
    out
}

const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // √3/6
const CF4_HEAVY: f64 = 0.25 + GAUSS_OFFSET;
const CF4_LIGHT: f64 = 0.25 - GAUSS_OFFSET;

/// One fourth-order commutator-free Magnus step over `[s, s + h]` of the
/// protocol time, where `dψ/ds = −i·sign·H(ρ(s))ψ`.
fn cf4_step(
    sub: &Subspace,
    sched: &LoopSchedule,
    s: f64,
    h: f64,
    sign: f64,
    v: &DVector<C64>,
) -> DVector<C64> {
    let h1 = sub.matrix(sched.rho(s + (0.5 - GAUSS_OFFSET) * h));
    let h2 = sub.matrix(sched.rho(s + (0.5 + GAUSS_OFFSET) * h));
    let first = &h1 * C64::new(CF4_HEAVY, 0.0) + &h2 * C64::new(CF4_LIGHT, 0.0);
    let second = &h1 * C64::new(CF4_LIGHT, 0.0) + &h2 * C64::new(CF4_HEAVY, 0.0);
    let mid = expm_apply(&first, sign * h, v);
    expm_apply(&second, sign * h, &mid)
}

/// Exactly propagated loop.
#[derive(Clone, Debug)]
pub struct EdTrajectory {
    /// Protocol times at which states were captured.
    pub checkpoints: Vec<f64>,
    pub states: Vec<StateVector>,
    pub final_state: StateVector,
    /// `−∫⟨H⟩dt` over the first half-cycle.
    pub phi_g1_forward: f64,
    /// Same over the second half-cycle, where `dt < 0`.
    pub phi_g1_backward: f64,
    pub max_norm_drift: f64,
}

/// Propagates `initial` around the loop with steps of at most `dt`, recording
/// the state at every requested protocol time in `[0, T]`.
pub fn ed_propagate(
    initial: &StateVector,
    family: &DenseFamily,
    schedule: &LoopSchedule,
    dt: f64,
    checkpoints: &[f64],
) -> Result<EdTrajectory> {
    check_qubits(family.n_qubits(), initial.n_qubits())?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let period = schedule.period();
    let mut order: Vec<usize> = (0..checkpoints.len()).collect();
    for &c in checkpoints {
        if !(0.0..=period).contains(&c) {
            return Err(Error::InvalidParameter(format!(
                "checkpoint {c} outside the loop [0, {period}]"
            )));
        }
    }
    order.sort_by(|&a, &b| checkpoints[a].total_cmp(&checkpoints[b]));
    let mut captured: Vec<Option<StateVector>> = vec![None; checkpoints.len()];
    let mut next = 0;

    let sub = family.restrict(initial);
    let nq = family.n_qubits();
    let mut v = sub.gather(initial);
    let norm0 = v.norm();
    let energy = |v: &DVector<C64>, s: f64| (v.adjoint() * sub.matrix(schedule.rho(s)) * v)[(0, 0)].re;

    let half = schedule.half_period();
    let n_half = (half / dt).ceil().max(1.0) as usize;
    let h = half / n_half as f64;
    let mut integrals = [0.0f64; 2];
    let mut max_drift: f64 = 0.0;
    for (k, sign) in [(0usize, 1.0f64), (1, -1.0)] {
        let start = k as f64 * half;
        let mut e_prev = energy(&v, start);
        for j in 0..n_half {
            let s0 = start + j as f64 * h;
            let s1 = if j + 1 == n_half {
                start + half
            } else {
                start + (j + 1) as f64 * h
            };
            while next < order.len() && checkpoints[order[next]] < s1 {
                let c = checkpoints[order[next]];
                let state = if c > s0 {
                    cf4_step(&sub, schedule, s0, c - s0, sign, &v)
                } else {
                    v.clone()
                };
                captured[order[next]] = Some(sub.scatter(&state, nq));
                next += 1;
            }
            v = cf4_step(&sub, schedule, s0, s1 - s0, sign, &v);
            let e = energy(&v, s1);
            integrals[k] -= sign * 0.5 * (e_prev + e) * (s1 - s0);
            e_prev = e;
            max_drift = max_drift.max((v.norm() - norm0).abs());
        }
    }
    if v.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(Error::Numeric("propagated state"));
    }
    let final_state = sub.scatter(&v, nq);
    while next < order.len() {
        captured[order[next]] = Some(final_state.clone());
        next += 1;
    }
    Ok(EdTrajectory {
        checkpoints: checkpoints.to_vec(),
        states: captured.into_iter().map(|s| s.expect("all captured")).collect(),
        final_state,
        phi_g1_forward: integrals[0],
        phi_g1_backward: integrals[1],
        max_norm_drift: max_drift,
    })
}

/// `−Im ln Π⟨G_j|G_{j+1}⟩` around a closed chain of states, the last link
/// returning to the first state. Principal value.
pub fn wilson_loop_phase(states: &[StateVector]) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::InvalidParameter("empty Wilson loop".into()));
    }
    let mut prod = C64::new(1.0, 0.0);
    for j in 0..states.len() {
        let link = states[j].inner(&states[(j + 1) % states.len()])?;
        if link.norm() < MIN_LINK_OVERLAP {
            return Err(Error::GridTooCoarse {
                index: j,
                overlap: link.norm(),
            });
        }
        prod *= link / link.norm();
    }
    Ok(principal_value(-prod.arg()))
}

pub fn wilson_loop_berry(params: &ModelParams, n_grid: usize) -> Result<f64> {
    if n_grid < 16 {
        return Err(Error::InvalidParameter(format!(
            "Wilson loop needs at least 16 grid points, got {n_grid}"
        )));
    }
    let family = DenseFamily::from_params(params)?;
    let states = (0..n_grid)
        .map(|j| {
            family
                .ground_state(TAU * j as f64 / n_grid as f64)
                .map(|r| r.ground_state)
        })
        .collect::<Result<Vec<_>>>()?;
    wilson_loop_phase(&states)
}

/// Lowest eigenpair within the blocks occupied by `like`, gauge fixed.
pub struct SectorSolver {
    sub: Subspace,
    n_qubits: usize,
}

impl SectorSolver {
    pub fn new(family: &DenseFamily, like: &StateVector) -> Result<Self> {
        check_qubits(family.n_qubits(), like.n_qubits())?;
        Ok(Self {
            sub: family.restrict(like),
            n_qubits: family.n_qubits(),
        })
    }

    pub fn ground_state(&self, rho: f64) -> Result<(f64, StateVector)> {
        let eig = self.sub.matrix(rho).symmetric_eigen();
        let (k, &e0) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .ok_or(Error::Numeric("empty sector"))?;
        let mut state = self.sub.scatter(&eig.eigenvectors.column(k).into_owned(), self.n_qubits);
        fix_gauge(state.amplitudes_mut());
        Ok((e0, state.normalized()?))
    }
}

/// Infidelity maxima of a variational loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopInfidelity {
    /// Against the instantaneous ground state.
    pub max_infid_f: f64,
    /// Against the exactly propagated state.
    pub max_infid_ft: f64,
}

/// Fills the infidelity slots of every step record. The exact loop starts from
/// the dense ground state at `ρ = 0`.
pub fn infidelities(
    traj: &mut TrajectoryRecord,
    family: &DenseFamily,
    schedule: &LoopSchedule,
    dt: f64,
) -> Result<LoopInfidelity> {
    if traj.snapshots.len() != traj.steps.len() || traj.steps.is_empty() {
        return Err(Error::InvalidParameter(
            "trajectory carries no statevector snapshots".into(),
        ));
    }
    let sector = SectorSolver::new(family, &traj.snapshots[0])?;
    let (_, g0) = sector.ground_state(0.0)?;
    let checkpoints: Vec<f64> = traj.steps.iter().map(|r| r.s).collect();
    let exact = ed_propagate(&g0, family, schedule, dt, &checkpoints)?;
    let mut out = LoopInfidelity {
        max_infid_f: 0.0,
        max_infid_ft: 0.0,
    };
    for ((rec, snap), ex) in traj.steps.iter_mut().zip(&traj.snapshots).zip(&exact.states) {
        let (_, g) = sector.ground_state(rec.rho)?;
        let f = snap.infidelity(&g)?;
        let ft = snap.infidelity(ex)?;
        rec.infid_f = Some(f);
        rec.infid_ft = Some(ft);
        out.max_infid_f = out.max_infid_f.max(f);
        out.max_infid_ft = out.max_infid_ft.max(ft);
    }
    Ok(out)
}

/// Exact loop from the ground state at `ρ = 0`, with `1 − f` against the
/// instantaneous ground state at `n_points + 1` evenly spaced protocol times.
#[derive(Clone, Debug)]
pub struct ExactLoop {
    pub trajectory: EdTrajectory,
    pub infid_f: Vec<f64>,
    pub max_infid_f: f64,
    pub initial: StateVector,
}

pub fn exact_loop(
    params: &ModelParams,
    schedule: &LoopSchedule,
    dt: f64,
    n_points: usize,
) -> Result<ExactLoop> {
    let family = DenseFamily::from_params(params)?;
    let initial = family.ground_state(0.0)?.ground_state;
    let sector = SectorSolver::new(&family, &initial)?;
    let n = n_points.max(1);
    let checkpoints: Vec<f64> = (0..=n)
        .map(|k| schedule.period() * k as f64 / n as f64)
        .collect();
    let trajectory = ed_propagate(&initial, &family, schedule, dt, &checkpoints)?;
    let infid_f = checkpoints
        .iter()
        .zip(&trajectory.states)
        .map(|(&s, st)| Ok(st.infidelity(&sector.ground_state(schedule.rho(s))?.1)?))
        .collect::<Result<Vec<f64>>>()?;
    let max_infid_f = infid_f.iter().copied().fold(0.0, f64::max);
    Ok(ExactLoop {
        trajectory,
        infid_f,
        max_infid_f,
        initial,
    })
}

/// `1 − |⟨a|b⟩|²`.
pub fn infidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    a.infidelity(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_sshh;
    use std::f64::consts::PI;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn single_qubit_matrices() {
        let z = PauliSum::from_terms(1, [(C64::new(1.0, 0.0), ps("Z"))]).unwrap();
        let m = dense_matrix(&z).unwrap();
        assert_eq!(m[(0, 0)], C64::new(1.0, 0.0));
        assert_eq!(m[(1, 1)], C64::new(-1.0, 0.0));
        // Qubit 0 is the low bit: X on qubit 0 of two maps |00⟩ to |01⟩ = index 1.
        let x0 = string_matrix(&ps("XI"));
        assert_eq!(x0[(1, 0)], C64::new(1.0, 0.0));
        let y = string_matrix(&ps("Y"));
        assert_eq!(y[(1, 0)], C64::new(0.0, 1.0));
    }

    #[test]
    fn cap_enforced() {
        let h = PauliSum::zero(13);
        assert!(matches!(
            dense_matrix(&h),
            Err(Error::CapExceeded { cap: 12, n_qubits: 13 })
        ));
    }

    #[test]
    fn free_chain_ground_energy_and_gap() {
        let p = ModelParams::four_site(-0.5, 0.0);
        let r = ground_state(&build_sshh(&p, 0.0).unwrap()).unwrap();
        assert!((r.ground_energy + 6.0).abs() < 1e-10);
        assert!((r.gap - 1.0).abs() < 1e-10);
        assert!(!r.degenerate);
        let spec = &r.spectrum;
        for (a, b) in spec.iter().zip(spec.iter().rev()) {
            assert!((a + b).abs() < 1e-10);
        }
    }

    #[test]
    fn family_blocks_match_full_diagonalization() {
        let p = ModelParams::four_site(-0.6, 10.0);
        let fam = DenseFamily::from_params(&p).unwrap();
        let rho = 1.234;
        let blocked = fam.ground_state(rho).unwrap();
        let full = fam.matrix(rho).symmetric_eigen();
        let mut ev: Vec<f64> = full.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip(&blocked.spectrum) {
            assert!((a - b).abs() < 1e-9);
        }
        let direct = ground_state(&build_sshh(&p, rho).unwrap()).unwrap();
        assert!(blocked.ground_state.infidelity(&direct.ground_state).unwrap() < 1e-12);
    }

    #[test]
    fn gauge_is_fixed() {
        let p = ModelParams::four_site(0.3, 0.0);
        let r = DenseFamily::from_params(&p).unwrap().ground_state(0.7).unwrap();
        let amps = r.ground_state.amplitudes();
        let max = amps.iter().map(|a| a.norm()).fold(0.0, f64::max);
        let big = amps.iter().find(|a| a.norm() >= max - 1e-12).unwrap();
        assert!(big.im.abs() < 1e-14 && big.re > 0.0);
    }

    #[test]
    fn eigenstate_picks_up_dynamical_phase() {
        let p = ModelParams::four_site(-0.5, 0.0);
        let h = build_sshh(&p, 0.0).unwrap();
        let fam = DenseFamily::constant(&h).unwrap();
        let sched = LoopSchedule::new(2.0).unwrap();
        let r = fam.ground_state(0.0).unwrap();
        let traj = ed_propagate(&r.ground_state, &fam, &sched, 1e-3, &[0.7, 1.0]).unwrap();
        assert!(traj.max_norm_drift < 1e-10);
        for (t, s) in [(0.7, &traj.states[0]), (1.0, &traj.states[1])] {
            let expect = r
                .ground_state
                .clone()
                .scaled(C64::from_polar(1.0, -r.ground_energy * t));
            assert!(s.distance(&expect).unwrap() < 1e-9);
        }
        assert!(traj.final_state.distance(&r.ground_state).unwrap() < 1e-9);
        assert!((traj.phi_g1_forward - 6.0).abs() < 1e-9);
        assert!((traj.phi_g1_forward + traj.phi_g1_backward).abs() < 1e-9);
    }

    #[test]
    fn free_wilson_loop() {
        let pi = wilson_loop_berry(&ModelParams::four_site(-0.5, 0.0), 64).unwrap();
        assert!((pi - PI).abs() < 1e-6);
        let zero = wilson_loop_berry(&ModelParams::four_site(0.5, 0.0), 64).unwrap();
        assert!(zero.abs() < 1e-6);
        assert!(wilson_loop_berry(&ModelParams::four_site(0.5, 0.0), 8).is_err());
    }
}
