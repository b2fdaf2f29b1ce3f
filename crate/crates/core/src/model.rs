//! Dimerized Hubbard chain with a spin-selective twist, encoded with Jordan–Wigner.
//!
//! Register layout: spin-up modes of sites `0..N` sit on qubits `0..N`, spin-down
//! modes on qubits `N..2N`. The Jordan–Wigner string runs over lower qubit indices.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{PauliString, PauliSum, StateVector, C64};

/// Twist used to read off the Hamiltonian's string content. At ρ = 0 the
/// imaginary boundary strings vanish, so a generic angle is needed.
pub const POOL_PROBE_TWIST: f64 = PI / 7.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_sites: usize,
    pub hopping: f64,
    pub delta: f64,
    pub interaction: f64,
}

impl ModelParams {
    pub fn new(n_sites: usize, hopping: f64, delta: f64, interaction: f64) -> Result<Self> {
        let p = Self {
            n_sites,
            hopping,
            delta,
            interaction,
        };
        p.validate()?;
        Ok(p)
    }

    /// Four-site chain with unit hopping.
    pub fn four_site(delta: f64, interaction: f64) -> Self {
        Self {
            n_sites: 4,
            hopping: 1.0,
            delta,
            interaction,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 || self.n_sites % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "site count must be even and at least 2, got {}",
                self.n_sites
            )));
        }
        if 2 * self.n_sites > 64 {
            return Err(Error::InvalidParameter("too many sites".into()));
        }
        if !(self.hopping > 0.0 && self.hopping.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "hopping must be positive, got {}",
                self.hopping
            )));
        }
        if !(-1.0..=1.0).contains(&self.delta) {
            return Err(Error::InvalidParameter(format!(
                "dimerization must lie in [-1, 1], got {}",
                self.delta
            )));
        }
        if !self.interaction.is_finite() {
            return Err(Error::InvalidParameter("interaction must be finite".into()));
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        2 * self.n_sites
    }

    /// Amplitude of the bond from site `j` to `j + 1` (mod N), `j` counted from zero:
    /// `t(1 + (-1)^j δ)`. The wrap-around bond `N-1 → 0` is the strong one for δ < 0.
    pub fn bond_hopping(&self, j: usize) -> f64 {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        self.hopping * (1.0 + sign * self.delta)
    }

    pub fn up_qubit(&self, site: usize) -> usize {
        site
    }

    pub fn down_qubit(&self, site: usize) -> usize {
        self.n_sites + site
    }
}

fn single(n: usize, q: usize, letter: char) -> PauliString {
    PauliString::from_sparse(n, &[(q, letter)]).expect("qubit in range")
}

/// Jordan–Wigner image of the annihilator (`creation = false`) or creator of mode `q`.
pub fn ladder(n_qubits: usize, q: usize, creation: bool) -> PauliSum {
    let mut z = 0u64;
    for k in 0..q {
        z |= 1 << k;
    }
    let string = PauliString::new(n_qubits, 0, z).expect("in range");
    let half = C64::new(0.5, 0.0);
    // |0⟩⟨1| = (X + iY)/2 lowers the occupation bit.
    let iy = C64::new(0.0, if creation { -0.5 } else { 0.5 });
    let local = PauliSum::from_terms(
        n_qubits,
        [(half, single(n_qubits, q, 'X')), (iy, single(n_qubits, q, 'Y'))],
    )
    .expect("same register");
    let jw = PauliSum::from_terms(n_qubits, [(C64::new(1.0, 0.0), string)]).expect("same register");
    jw.mul(&local).expect("same register")
}

/// `τ c†_a c_b + h.c.`
pub fn hopping_term(n_qubits: usize, a: usize, b: usize, tau: C64) -> PauliSum {
    let forward = ladder(n_qubits, a, true)
        .mul(&ladder(n_qubits, b, false))
        .expect("same register")
        .scaled(tau);
    let backward = ladder(n_qubits, b, true)
        .mul(&ladder(n_qubits, a, false))
        .expect("same register")
        .scaled(tau.conj());
    forward.add(&backward).expect("same register")
}

pub fn number_operator(n_qubits: usize, q: usize) -> PauliSum {
    PauliSum::from_terms(
        n_qubits,
        [
            (C64::new(0.5, 0.0), PauliString::identity(n_qubits)),
            (C64::new(-0.5, 0.0), single(n_qubits, q, 'Z')),
        ],
    )
    .expect("same register")
}

pub fn total_number(n_qubits: usize) -> PauliSum {
    (0..n_qubits).fold(PauliSum::zero(n_qubits), |acc, q| {
        acc.add(&number_operator(n_qubits, q)).expect("same register")
    })
}

/// Qubit Hamiltonian at twist `rho`.
///
/// Bond `j` carries `t_j c†_{j+1,σ} c_{j,σ} + h.c.`; on the wrap-around bond the
/// spin-up term is `t_{N-1} e^{iρ} c†_0 c_{N-1}`. The on-site part
/// `U n↑n↓ − (U/2)(n↑ + n↓)` becomes `(U/4)(Z_j Z_{j+N} − 1)`.
pub fn build_sshh(params: &ModelParams, rho: f64) -> Result<PauliSum> {
    params.validate()?;
    let n = params.n_sites;
    let nq = params.n_qubits();
    let mut h = PauliSum::zero(nq);
    for j in 0..n {
        let next = (j + 1) % n;
        let t = params.bond_hopping(j);
        let twist = if next == 0 {
            C64::from_polar(1.0, rho)
        } else {
            C64::new(1.0, 0.0)
        };
        h = h.add(&hopping_term(
            nq,
            params.up_qubit(next),
            params.up_qubit(j),
            twist * t,
        ))?;
        h = h.add(&hopping_term(
            nq,
            params.down_qubit(next),
            params.down_qubit(j),
            C64::new(t, 0.0),
        ))?;
    }
    if params.interaction != 0.0 {
        let quarter = C64::new(params.interaction / 4.0, 0.0);
        let mut terms = Vec::with_capacity(2 * n);
        for j in 0..n {
            let zz = PauliString::from_sparse(
                nq,
                &[(params.up_qubit(j), 'Z'), (params.down_qubit(j), 'Z')],
            )?;
            terms.push((quarter, zz));
            terms.push((-quarter, PauliString::identity(nq)));
        }
        h = h.add(&PauliSum::from_terms(nq, terms)?)?;
    }
    // Hermitian by construction; fold away round-off in the imaginary parts.
    Ok(h.real_part())
}

/// `H(ρ) = A + cos ρ·B + sin ρ·C`, exact for a single twisted bond.
#[derive(Clone, Debug)]
pub struct TwistFamily {
    base: PauliSum,
    cos_part: PauliSum,
    sin_part: PauliSum,
}

impl TwistFamily {
    pub fn new(params: &ModelParams) -> Result<Self> {
        let h0 = build_sshh(params, 0.0)?;
        let h_half = build_sshh(params, PI / 2.0)?;
        let h_pi = build_sshh(params, PI)?;
        let half = C64::new(0.5, 0.0);
        let base = h0.add(&h_pi)?.scaled(half);
        let cos_part = h0.add(&h_pi.scaled(C64::new(-1.0, 0.0)))?.scaled(half);
        let sin_part = h_half.add(&base.scaled(C64::new(-1.0, 0.0)))?;
        Ok(Self {
            base,
            cos_part,
            sin_part,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.base.n_qubits()
    }

    pub fn at(&self, rho: f64) -> PauliSum {
        self.combine(1.0, rho.cos(), rho.sin())
    }

    /// `a·A + b·B + c·C`.
    pub fn combine(&self, a: f64, b: f64, c: f64) -> PauliSum {
        let nq = self.n_qubits();
        let id = PauliString::identity(nq);
        let parts = [(a, &self.base), (b, &self.cos_part), (c, &self.sin_part)];
        let terms = parts.iter().flat_map(|&(w, s)| {
            s.terms()
                .iter()
                .map(move |&(coef, p)| (coef * w, p))
                .chain(std::iter::once((s.identity_offset() * w, id)))
        });
        PauliSum::from_terms(nq, terms).expect("same register")
    }

    pub fn parts(&self) -> [&PauliSum; 3] {
        [&self.base, &self.cos_part, &self.sin_part]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolKind {
    Hamiltonian,
    QubitExcitation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorPool {
    pub kind: PoolKind,
    pub elements: Vec<PauliString>,
}

impl OperatorPool {
    fn sorted(kind: PoolKind, mut elements: Vec<PauliString>) -> Self {
        elements.sort_by_key(|p| p.pool_key());
        elements.dedup();
        Self { kind, elements }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn n_qubits(&self) -> Option<usize> {
        self.elements.first().map(|p| p.n_qubits())
    }
}

/// Every distinct non-identity string of the Hamiltonian at a generic twist.
pub fn hamiltonian_pool(params: &ModelParams) -> Result<OperatorPool> {
    let h = build_sshh(params, POOL_PROBE_TWIST)?;
    Ok(OperatorPool::sorted(
        PoolKind::Hamiltonian,
        h.strings().copied().collect(),
    ))
}

/// Two- and four-qubit strings over {X, Y} with an odd number of Y letters.
pub fn qubit_excitation_pool(n_qubits: usize) -> Result<OperatorPool> {
    if n_qubits < 2 {
        return Err(Error::InvalidParameter(format!(
            "excitation pool needs at least 2 qubits, got {n_qubits}"
        )));
    }
    if n_qubits > 64 {
        return Err(Error::InvalidParameter("too many qubits".into()));
    }
    let mut out = Vec::new();
    let mut push = |qubits: &[usize]| {
        let k = qubits.len();
        for ys in 0u32..(1 << k) {
            if ys.count_ones() % 2 == 0 {
                continue;
            }
            let letters: Vec<(usize, char)> = qubits
                .iter()
                .enumerate()
                .map(|(slot, &q)| (q, if ys >> slot & 1 == 1 { 'Y' } else { 'X' }))
                .collect();
            out.push(PauliString::from_sparse(n_qubits, &letters).expect("in range"));
        }
    };
    for i in 0..n_qubits {
        for j in i + 1..n_qubits {
            push(&[i, j]);
        }
    }
    for i in 0..n_qubits {
        for j in i + 1..n_qubits {
            for k in j + 1..n_qubits {
                for l in k + 1..n_qubits {
                    push(&[i, j, k, l]);
                }
            }
        }
    }
    Ok(OperatorPool::sorted(PoolKind::QubitExcitation, out))
}

/// Product state with the first N/2 orbitals of each spin block occupied.
pub fn reference_state(params: &ModelParams) -> Result<StateVector> {
    block_reference(params, 0)
}

/// Starting point for ground-state preparation.
///
/// For δ > 0 the block of [`reference_state`] sits on a strong dimer and, at
/// U = 0, is orthogonal to the ground state. Translating it by one site gives
/// the same placement relative to the dimerization as for −δ.
pub fn ground_prep_reference(params: &ModelParams) -> Result<StateVector> {
    block_reference(params, usize::from(params.delta > 0.0))
}

fn block_reference(params: &ModelParams, first_site: usize) -> Result<StateVector> {
    params.validate()?;
    let n = params.n_sites;
    let mut index = 0usize;
    for k in 0..n / 2 {
        let site = (first_site + k) % n;
        index |= 1 << params.up_qubit(site);
        index |= 1 << params.down_qubit(site);
    }
    StateVector::basis(params.n_qubits(), index)
}
