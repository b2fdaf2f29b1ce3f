//! Pseudo-Trotter ansatz `Π_μ exp(-iθ_μ A_μ)|Ψ₀⟩` and the McLachlan linear systems
//! built from its tangent vectors.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{check_qubits, Error, Result};
use crate::pauli::{
    apply_pauli_into, inner, inner_re, norm_sqr, rotate_in_place, rotate_rows, CompiledSum, PauliString,
    PauliSum, StateVector, C64,
};

/// Default Tikhonov shift for the `Mθ̇ = V` solve.
pub const DEFAULT_LAMBDA: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitOrigin {
    GroundPrep,
    Dynamics,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub generator: PauliString,
    pub theta: f64,
    pub origin: UnitOrigin,
}

#[derive(Clone, Debug)]
pub struct Ansatz {
    reference: StateVector,
    units: Vec<Unit>,
    layer_of: Vec<usize>,
    // Per qubit: number of layers already occupied on it.
    frontier: Vec<usize>,
}

impl Ansatz {
    pub fn new(reference: StateVector) -> Self {
        let n = reference.n_qubits();
        Self {
            reference,
            units: Vec::new(),
            layer_of: Vec::new(),
            frontier: vec![0; n],
        }
    }

    pub fn reference(&self) -> &StateVector {
        &self.reference
    }

    pub fn n_qubits(&self) -> usize {
        self.reference.n_qubits()
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn thetas(&self) -> DVector<f64> {
        DVector::from_iterator(self.units.len(), self.units.iter().map(|u| u.theta))
    }

    pub fn set_thetas(&mut self, thetas: &DVector<f64>) -> Result<()> {
        if thetas.len() != self.units.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} angles, got {}",
                self.units.len(),
                thetas.len()
            )));
        }
        for (u, &t) in self.units.iter_mut().zip(thetas.iter()) {
            u.theta = t;
        }
        Ok(())
    }

    pub fn with_thetas(&self, thetas: &DVector<f64>) -> Result<Self> {
        let mut a = self.clone();
        a.set_thetas(thetas)?;
        Ok(a)
    }

    /// Appends `exp(-iθA)` as the last factor and schedules it in the earliest
    /// layer after every earlier unit it overlaps.
    pub fn push(&mut self, generator: PauliString, theta: f64, origin: UnitOrigin) -> Result<()> {
        check_qubits(self.n_qubits(), generator.n_qubits())?;
        if generator.is_identity() {
            return Err(Error::InvalidGenerator);
        }
        let support = generator.support();
        let qubits = (0..self.n_qubits()).filter(|q| support >> q & 1 == 1);
        let layer = qubits.clone().map(|q| self.frontier[q]).max().unwrap_or(0);
        for q in qubits {
            self.frontier[q] = layer + 1;
        }
        self.layer_of.push(layer);
        self.units.push(Unit {
            generator,
            theta,
            origin,
        });
        Ok(())
    }

    /// Zero-based layer index of every unit.
    pub fn layer_of(&self) -> &[usize] {
        &self.layer_of
    }

    pub fn depth(&self) -> usize {
        self.frontier.iter().copied().max().unwrap_or(0)
    }

    pub fn cnot_count(&self) -> usize {
        self.units.iter().map(|u| u.generator.cnot_cost()).sum()
    }

    /// `(cnot_count, depth)`.
    pub fn resource_metrics(&self) -> (usize, usize) {
        (self.cnot_count(), self.depth())
    }

    /// Applies unit 1 first.
    pub fn evaluate(&self) -> StateVector {
        let mut amps = self.reference.amplitudes().to_vec();
        for u in &self.units {
            rotate_in_place(&mut amps, u.theta, &u.generator);
        }
        StateVector::from_amplitudes(amps).expect("power-of-two length")
    }

    pub fn derivative_states(&self) -> Vec<StateVector> {
        let (_, derivs) = self.sweep();
        derivs
            .chunks(self.reference.dim().max(1))
            .take(self.units.len())
            .map(|d| StateVector::from_amplitudes(d.to_vec()).expect("power-of-two length"))
            .collect()
    }

    /// State and all `∂_μ|Ψ⟩` in one forward pass: each derivative vector is
    /// seeded as `-iA_μ|Ψ_μ⟩` and then carried through the remaining units.
    /// Derivatives are returned back to back, one block of `dim` per unit.
    fn sweep(&self) -> (Vec<C64>, Vec<C64>) {
        let dim = self.reference.dim();
        let n = self.units.len();
        let mut psi = self.reference.amplitudes().to_vec();
        // Row-major while sweeping: amplitude i of derivative k at rows[i * n + k].
        let mut rows = vec![C64::new(0.0, 0.0); dim * n];
        let mut d = vec![C64::new(0.0, 0.0); dim];
        let minus_i = C64::new(0.0, -1.0);
        for (k, u) in self.units.iter().enumerate() {
            rotate_in_place(&mut psi, u.theta, &u.generator);
            rotate_rows(&mut rows, n, k, u.theta, &u.generator);
            apply_pauli_into(&u.generator, &psi, &mut d);
            for (i, x) in d.iter().enumerate() {
                rows[i * n + k] = minus_i * x;
            }
        }
        let mut cols = vec![C64::new(0.0, 0.0); dim * n];
        for i in 0..dim {
            for k in 0..n {
                cols[k * dim + i] = rows[i * n + k];
            }
        }
        (psi, cols)
    }

    /// Everything the McLachlan systems need at the current angles.
    pub fn tangent(&self, h: &CompiledSum) -> Result<Tangent> {
        check_qubits(self.n_qubits(), h.n_qubits())?;
        let (psi, derivs) = self.sweep();
        let mut h_psi = vec![C64::new(0.0, 0.0); psi.len()];
        h.apply_into(&psi, &mut h_psi);
        let energy = inner(&psi, &h_psi).re;
        let var_h = (norm_sqr(&h_psi) - energy * energy).max(0.0);
        let dim = psi.len();
        let overlaps = derivs.chunks(dim).map(|d| inner(&psi, d)).collect();
        Ok(Tangent {
            psi,
            derivs,
            h_psi,
            energy,
            var_h,
            overlaps,
        })
    }
}

/// Variational state, its parameter derivatives and `H|Ψ⟩`.
#[derive(Clone, Debug)]
pub struct Tangent {
    pub psi: Vec<C64>,
    derivs: Vec<C64>,
    pub h_psi: Vec<C64>,
    pub energy: f64,
    pub var_h: f64,
    /// `⟨Ψ|∂_μΨ⟩`, purely imaginary up to round-off.
    pub overlaps: Vec<C64>,
}

impl Tangent {
    pub fn len(&self) -> usize {
        self.overlaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.overlaps.is_empty()
    }

    /// `∂_μ|Ψ⟩`.
    pub fn deriv(&self, mu: usize) -> &[C64] {
        let dim = self.psi.len();
        &self.derivs[mu * dim..(mu + 1) * dim]
    }

    /// `Re[⟨∂_μΨ|∂_νΨ⟩ + ⟨∂_μΨ|Ψ⟩⟨∂_νΨ|Ψ⟩]`, i.e. half the real-time `M`.
    fn gram(&self) -> DMatrix<f64> {
        let n = self.len();
        // Re⟨a|b⟩ is the real dot product of the interleaved (re, im) vectors.
        let r = DMatrix::from_iterator(
            2 * self.psi.len(),
            n,
            self.derivs.iter().flat_map(|z| [z.re, z.im]),
        );
        let mut g = r.transpose() * &r;
        for mu in 0..n {
            let am = self.overlaps[mu].conj();
            for nu in 0..n {
                g[(mu, nu)] += (am * self.overlaps[nu].conj()).re;
            }
        }
        g.fill_lower_triangle_with_upper_triangle();
        g
    }

    /// `⟨∂_μΨ|H|Ψ⟩`.
    fn h_couplings(&self) -> Vec<C64> {
        (0..self.len()).map(|mu| inner(self.deriv(mu), &self.h_psi)).collect()
    }

    /// Real-time equations of motion.
    pub fn real_time(&self) -> EomSystem {
        let m = self.gram() * 2.0;
        let hc = self.h_couplings();
        let v = DVector::from_iterator(
            self.len(),
            hc.iter()
                .zip(&self.overlaps)
                .map(|(c, a)| 2.0 * (c + a * self.energy).im),
        );
        EomSystem {
            m,
            v,
            var_h: self.var_h,
            energy: self.energy,
            connection: DVector::from_iterator(self.len(), self.overlaps.iter().map(|a| a.im)),
        }
    }

    /// Imaginary-time equations of motion.
    pub fn imaginary_time(&self) -> ItSystem {
        let m = self.gram();
        let hc = self.h_couplings();
        let v = DVector::from_iterator(
            self.len(),
            hc.iter()
                .zip(&self.overlaps)
                .map(|(c, a)| -c.re + self.energy * a.conj().re),
        );
        ItSystem {
            m,
            v,
            var_h: self.var_h,
            energy: self.energy,
        }
    }
}

/// `M θ̇ = V` with the quantities entering `L²`.
#[derive(Clone, Debug)]
pub struct EomSystem {
    pub m: DMatrix<f64>,
    pub v: DVector<f64>,
    pub var_h: f64,
    pub energy: f64,
    /// `Im⟨Ψ|∂_μΨ⟩`, the integrand weights of the geometric phase.
    pub connection: DVector<f64>,
}

/// Imaginary-time counterpart of [`EomSystem`].
#[derive(Clone, Debug)]
pub struct ItSystem {
    pub m: DMatrix<f64>,
    pub v: DVector<f64>,
    pub var_h: f64,
    pub energy: f64,
}

pub fn assemble_eom(a: &Ansatz, h: &PauliSum) -> Result<EomSystem> {
    Ok(a.tangent(&h.compile())?.real_time())
}

pub fn it_eom(a: &Ansatz, h: &PauliSum) -> Result<ItSystem> {
    Ok(a.tangent(&h.compile())?.imaginary_time())
}

/// Cholesky factor of `M + λI`; falls back to an eigen-decomposition when `M`
/// is not numerically positive semidefinite.
pub struct RegularizedSolver {
    chol: Option<Cholesky<f64, Dyn>>,
    pinv: Option<DMatrix<f64>>,
}

impl RegularizedSolver {
    pub fn new(m: &DMatrix<f64>, lambda: f64) -> Result<Self> {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("M matrix"));
        }
        let n = m.nrows();
        let shifted = m + DMatrix::<f64>::identity(n, n) * lambda;
        if let Some(chol) = Cholesky::new(shifted.clone()) {
            return Ok(Self {
                chol: Some(chol),
                pinv: None,
            });
        }
        let eig = shifted.symmetric_eigen();
        let floor = lambda.max(1e-14);
        let inv = DVector::from_iterator(
            n,
            eig.eigenvalues
                .iter()
                .map(|&e| if e > floor { 1.0 / e } else { 1.0 / floor }),
        );
        let q = &eig.eigenvectors;
        let pinv = q * DMatrix::from_diagonal(&inv) * q.transpose();
        Ok(Self {
            chol: None,
            pinv: Some(pinv),
        })
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match (&self.chol, &self.pinv) {
            (Some(c), _) => c.solve(rhs),
            (None, Some(p)) => p * rhs,
            _ => unreachable!("solver always holds one factorization"),
        }
    }
}

/// Tikhonov-regularized `θ̇ = (M + λI)⁻¹V`.
pub fn solve_theta_dot(e: &EomSystem, lambda: f64) -> Result<DVector<f64>> {
    solve_regularized(&e.m, &e.v, lambda)
}

pub fn solve_regularized(m: &DMatrix<f64>, v: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("V vector"));
    }
    let x = RegularizedSolver::new(m, lambda)?.solve(v);
    if x.iter().any(|t| !t.is_finite()) {
        return Err(Error::Numeric("theta_dot"));
    }
    Ok(x)
}

/// `L² = 2 var − V·θ̇`, clamped at zero.
pub fn mclachlan_distance(e: &EomSystem, theta_dot: &DVector<f64>) -> f64 {
    (2.0 * e.var_h - e.v.dot(theta_dot)).max(0.0)
}

/// `θ̇ᵀMθ̇ − 2V·θ̇ + 2 var`, valid for any `θ̇`.
pub fn mclachlan_quadratic_form(e: &EomSystem, theta_dot: &DVector<f64>) -> f64 {
    (theta_dot.transpose() * &e.m * theta_dot)[(0, 0)] - 2.0 * e.v.dot(theta_dot) + 2.0 * e.var_h
}

/// `var − v·θ̇`, clamped at zero.
pub fn it_distance(e: &ItSystem, theta_dot: &DVector<f64>) -> f64 {
    (e.var_h - e.v.dot(theta_dot)).max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flow {
    RealTime,
    ImaginaryTime,
}

/// A solved McLachlan system ready to score candidate generators.
pub struct SolvedFlow {
    pub flow: Flow,
    pub theta_dot: DVector<f64>,
    /// Quadratic-form distance at `theta_dot`. Regularization and gauge terms
    /// are subtracted so they do not pose as missing directions.
    pub distance: f64,
    lambda: f64,
    solver: RegularizedSolver,
    // Scale of the Gram block: 2 for real time, 1 for imaginary time.
    scale: f64,
    base: f64,
    projected: f64,
    theta_dot_sq: f64,
    // Weight κ of the κ(c·θ̇)² phase penalty and the connection c.
    gauge: f64,
    connection: DVector<f64>,
    phase_rate: f64,
}

/// Weight that turns the projected real-time metric into the full one.
pub const PARALLEL_TRANSPORT_WEIGHT: f64 = 2.0;

impl SolvedFlow {
    /// Tikhonov-regularized real-time flow.
    pub fn real_time(e: &EomSystem, lambda: f64) -> Result<Self> {
        Self::real_time_gauged(e, lambda, 0.0)
    }

    /// Among (near-)degenerate solutions, prefers those with no global-phase
    /// velocity `Σ Im⟨Ψ|∂_μΨ⟩θ̇_μ`, by minimizing `L² + λ|θ̇|² + κ(c·θ̇)²`.
    /// With `κ = 2` the solve matrix is the unprojected metric.
    pub fn parallel_transport(e: &EomSystem, lambda: f64) -> Result<Self> {
        Self::real_time_gauged(e, lambda, PARALLEL_TRANSPORT_WEIGHT)
    }

    pub fn real_time_gauged(e: &EomSystem, lambda: f64, gauge: f64) -> Result<Self> {
        let mut m = e.m.clone();
        if gauge != 0.0 {
            m.ger(gauge, &e.connection, &e.connection, 1.0);
        }
        let solver = RegularizedSolver::new(&m, lambda)?;
        let theta_dot = solver.solve(&e.v);
        if theta_dot.iter().any(|t| !t.is_finite()) {
            return Err(Error::Numeric("theta_dot"));
        }
        Ok(Self::finish(
            Flow::RealTime,
            theta_dot,
            &e.v,
            2.0 * e.var_h,
            lambda,
            solver,
            2.0,
            gauge,
            e.connection.clone(),
        ))
    }

    pub fn imaginary_time(e: &ItSystem, lambda: f64) -> Result<Self> {
        let solver = RegularizedSolver::new(&e.m, lambda)?;
        let theta_dot = solver.solve(&e.v);
        if theta_dot.iter().any(|t| !t.is_finite()) {
            return Err(Error::Numeric("theta_dot"));
        }
        let n = theta_dot.len();
        Ok(Self::finish(
            Flow::ImaginaryTime,
            theta_dot,
            &e.v,
            e.var_h,
            lambda,
            solver,
            1.0,
            0.0,
            DVector::zeros(n),
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        flow: Flow,
        theta_dot: DVector<f64>,
        rhs: &DVector<f64>,
        base: f64,
        lambda: f64,
        solver: RegularizedSolver,
        scale: f64,
        gauge: f64,
        connection: DVector<f64>,
    ) -> Self {
        let projected = rhs.dot(&theta_dot);
        let theta_dot_sq = theta_dot.norm_squared();
        let phase_rate = connection.dot(&theta_dot);
        Self {
            flow,
            distance: (base - projected - lambda * theta_dot_sq - gauge * phase_rate * phase_rate)
                .max(0.0),
            theta_dot,
            lambda,
            solver,
            scale,
            base,
            projected,
            theta_dot_sq,
            gauge,
            connection,
            phase_rate,
        }
    }

    /// Distance after appending `exp(-iθA)` with θ = 0, for every candidate.
    ///
    /// The extended system is the current one bordered by one row and column,
    /// so each score only needs the existing factorization (Schur complement).
    pub fn screen(&self, tangent: &Tangent, pool: &[PauliString]) -> Vec<f64> {
        let n = tangent.len();
        let dim = tangent.psi.len();
        let mut d_new = vec![C64::new(0.0, 0.0); dim];
        let minus_i = C64::new(0.0, -1.0);
        pool.iter()
            .map(|p| {
                apply_pauli_into(p, &tangent.psi, &mut d_new);
                d_new.iter_mut().for_each(|x| *x *= minus_i);
                let a_new = inner(&tangent.psi, &d_new);
                let conj_new = a_new.conj();
                let c_new = a_new.im;
                let border = DVector::from_iterator(
                    n,
                    (0..n).map(|mu| {
                        self.scale
                            * (inner_re(tangent.deriv(mu), &d_new)
                                + (tangent.overlaps[mu].conj() * conj_new).re)
                            + self.gauge * self.connection[mu] * c_new
                    }),
                );
                let corner = self.scale * (norm_sqr(&d_new) + (conj_new * conj_new).re)
                    + self.lambda
                    + self.gauge * c_new * c_new;
                let coupling = inner(&d_new, &tangent.h_psi);
                let rhs_new = match self.flow {
                    Flow::RealTime => 2.0 * (coupling + a_new * tangent.energy).im,
                    Flow::ImaginaryTime => -coupling.re + tangent.energy * conj_new.re,
                };
                let (schur, num, y) = if n == 0 {
                    (corner, rhs_new, DVector::zeros(0))
                } else {
                    let y = self.solver.solve(&border);
                    (corner - border.dot(&y), rhs_new - border.dot(&self.theta_dot), y)
                };
                if schur <= 1e-14 {
                    return self.distance;
                }
                let x_new = num / schur;
                // θ̇ of the extended system is (θ̇ − y·x_new, x_new).
                let sq = self.theta_dot_sq - 2.0 * x_new * self.theta_dot.dot(&y)
                    + x_new * x_new * (y.norm_squared() + 1.0);
                let rate = self.phase_rate - x_new * self.connection.dot(&y) + c_new * x_new;
                (self.base
                    - self.projected
                    - num * x_new
                    - self.lambda * sq
                    - self.gauge * rate * rate)
                    .max(0.0)
            })
            .collect()
    }
}
