//! Pauli strings in symplectic bitmask form, Pauli sums, and dense statevectors.
//!
//! A string on `n` qubits is a pair of masks `(x, z)`; the letter on qubit `q`
//! is I/X/Z/Y for bits `(0,0)/(1,0)/(0,1)/(1,1)`. With `Y = iXZ` every string
//! equals `i^{|x&z|} X^x Z^z`, which makes products and actions on basis states
//! closed-form bit arithmetic.
//!
//! Basis convention: qubit `q` is bit `q` of the amplitude index, and a set bit
//! means the qubit is in `|1⟩`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_qubits, Error, Result};

pub type C64 = Complex64;

/// Coefficients below this magnitude are dropped when terms are merged.
pub const DROP_TOL: f64 = 1e-12;

/// Largest register a dense statevector may hold.
pub const MAX_STATE_QUBITS: usize = 30;

const ONE: C64 = C64::new(1.0, 0.0);
const ZERO: C64 = C64::new(0.0, 0.0);

#[inline]
pub(crate) fn i_pow(k: u32) -> C64 {
    match k & 3 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

#[inline]
fn parity(v: u64) -> bool {
    v.count_ones() & 1 == 1
}

#[inline]
fn low_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PauliString {
    n_qubits: u32,
    x_mask: u64,
    z_mask: u64,
}

impl PauliString {
    pub fn new(n_qubits: usize, x_mask: u64, z_mask: u64) -> Result<Self> {
        if n_qubits > 64 {
            return Err(Error::InvalidParameter(format!(
                "Pauli strings support at most 64 qubits, got {n_qubits}"
            )));
        }
        let m = low_mask(n_qubits);
        if x_mask & !m != 0 || z_mask & !m != 0 {
            return Err(Error::InvalidParameter(format!(
                "mask bits beyond qubit {n_qubits}"
            )));
        }
        Ok(Self {
            n_qubits: n_qubits as u32,
            x_mask,
            z_mask,
        })
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self {
            n_qubits: n_qubits as u32,
            x_mask: 0,
            z_mask: 0,
        }
    }

    /// String with the given letters on the listed qubits and identity elsewhere.
    pub fn from_sparse(n_qubits: usize, letters: &[(usize, char)]) -> Result<Self> {
        let (mut x, mut z) = (0u64, 0u64);
        for &(q, c) in letters {
            if q >= n_qubits {
                return Err(Error::InvalidParameter(format!(
                    "qubit {q} out of range for {n_qubits} qubits"
                )));
            }
            let (bx, bz) = letter_bits(c)?;
            x |= (bx as u64) << q;
            z |= (bz as u64) << q;
        }
        Self::new(n_qubits, x, z)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits as usize
    }

    pub fn x_mask(&self) -> u64 {
        self.x_mask
    }

    pub fn z_mask(&self) -> u64 {
        self.z_mask
    }

    pub fn is_identity(&self) -> bool {
        self.x_mask == 0 && self.z_mask == 0
    }

    /// Qubits acted on non-trivially.
    pub fn support(&self) -> u64 {
        self.x_mask | self.z_mask
    }

    pub fn weight(&self) -> usize {
        self.support().count_ones() as usize
    }

    /// CNOTs needed to implement `exp(-iθP)` with all-to-all connectivity: `2(p-1)`.
    pub fn cnot_cost(&self) -> usize {
        match self.weight() {
            0 | 1 => 0,
            w => 2 * (w - 1),
        }
    }

    pub fn letter(&self, q: usize) -> char {
        match ((self.x_mask >> q) & 1, (self.z_mask >> q) & 1) {
            (0, 0) => 'I',
            (1, 0) => 'X',
            (0, 1) => 'Z',
            _ => 'Y',
        }
    }

    /// Key used for deterministic pool ordering.
    pub fn pool_key(&self) -> (usize, u64, u64) {
        (self.weight(), self.x_mask, self.z_mask)
    }

    /// `i^{|x&z|}`: the phase relating this string to `X^x Z^z`.
    #[inline]
    fn y_phase(&self) -> C64 {
        i_pow((self.x_mask & self.z_mask).count_ones())
    }
}

fn letter_bits(c: char) -> Result<(bool, bool)> {
    match c.to_ascii_uppercase() {
        'I' => Ok((false, false)),
        'X' => Ok((true, false)),
        'Z' => Ok((false, true)),
        'Y' => Ok((true, true)),
        other => Err(Error::InvalidParameter(format!("unknown Pauli letter {other:?}"))),
    }
}

/// Qubit 0 is printed first.
impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n_qubits() {
            write!(f, "{}", self.letter(q))?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        let (mut x, mut z) = (0u64, 0u64);
        for (q, &c) in letters.iter().enumerate() {
            let (bx, bz) = letter_bits(c)?;
            if q < 64 {
                x |= (bx as u64) << q;
                z |= (bz as u64) << q;
            }
        }
        Self::new(letters.len(), x, z)
    }
}

/// `a·b = phase·product` with `phase ∈ {±1, ±i}`.
pub fn pauli_mul(a: &PauliString, b: &PauliString) -> Result<(C64, PauliString)> {
    check_qubits(a.n_qubits(), b.n_qubits())?;
    let x = a.x_mask ^ b.x_mask;
    let z = a.z_mask ^ b.z_mask;
    // i^{|xa za|} X^xa Z^za · i^{|xb zb|} X^xb Z^zb, moving Z^za past X^xb,
    // then absorbing i^{-|x z|} to return to letter form.
    let k = (a.x_mask & a.z_mask).count_ones()
        + (b.x_mask & b.z_mask).count_ones()
        + 3 * (x & z).count_ones()
        + 2 * (a.z_mask & b.x_mask).count_ones();
    Ok((
        i_pow(k),
        PauliString {
            n_qubits: a.n_qubits,
            x_mask: x,
            z_mask: z,
        },
    ))
}

pub fn commutes(a: &PauliString, b: &PauliString) -> Result<bool> {
    check_qubits(a.n_qubits(), b.n_qubits())?;
    Ok(!parity((a.x_mask & b.z_mask) ^ (a.z_mask & b.x_mask)))
}

/// Complex linear combination of distinct Pauli strings plus an identity offset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<(C64, PauliString)>,
    identity_offset: C64,
}

impl PauliSum {
    pub fn zero(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            terms: Vec::new(),
            identity_offset: ZERO,
        }
    }

    /// Merges duplicate strings, routes the identity into the offset and drops
    /// coefficients below [`DROP_TOL`]. Terms come out sorted by string.
    pub fn from_terms<I>(n_qubits: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (C64, PauliString)>,
    {
        let mut acc: BTreeMap<PauliString, C64> = BTreeMap::new();
        let mut offset = ZERO;
        for (c, p) in terms {
            check_qubits(n_qubits, p.n_qubits())?;
            if p.is_identity() {
                offset += c;
            } else {
                *acc.entry(p).or_insert(ZERO) += c;
            }
        }
        Ok(Self::from_map(n_qubits, acc, offset))
    }

    fn from_map(n_qubits: usize, acc: BTreeMap<PauliString, C64>, offset: C64) -> Self {
        let terms = acc
            .into_iter()
            .filter(|(_, c)| c.norm() >= DROP_TOL)
            .map(|(p, c)| (c, p))
            .collect();
        let identity_offset = if offset.norm() >= DROP_TOL { offset } else { ZERO };
        Self {
            n_qubits,
            terms,
            identity_offset,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(C64, PauliString)] {
        &self.terms
    }

    pub fn identity_offset(&self) -> C64 {
        self.identity_offset
    }

    pub fn strings(&self) -> impl Iterator<Item = &PauliString> + '_ {
        self.terms.iter().map(|(_, p)| p)
    }

    pub fn coefficient(&self, p: &PauliString) -> C64 {
        if p.is_identity() {
            return self.identity_offset;
        }
        self.terms
            .binary_search_by(|(_, q)| q.cmp(p))
            .map(|i| self.terms[i].0)
            .unwrap_or(ZERO)
    }

    /// Largest imaginary part over all coefficients, offset included.
    pub fn max_imag(&self) -> f64 {
        self.terms
            .iter()
            .map(|(c, _)| c.im.abs())
            .fold(self.identity_offset.im.abs(), f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_imag() <= tol
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self::from_terms(
            self.n_qubits,
            self.terms
                .iter()
                .map(|&(c, p)| (c * s, p))
                .chain(std::iter::once((
                    self.identity_offset * s,
                    PauliString::identity(self.n_qubits),
                ))),
        )
        .expect("same register")
    }

    pub fn add(&self, other: &PauliSum) -> Result<Self> {
        check_qubits(self.n_qubits, other.n_qubits)?;
        let id = PauliString::identity(self.n_qubits);
        Self::from_terms(
            self.n_qubits,
            self.terms
                .iter()
                .chain(other.terms.iter())
                .copied()
                .chain([(self.identity_offset, id), (other.identity_offset, id)]),
        )
    }

    /// Operator product, merged term by term through [`pauli_mul`].
    pub fn mul(&self, other: &PauliSum) -> Result<Self> {
        check_qubits(self.n_qubits, other.n_qubits)?;
        let id = PauliString::identity(self.n_qubits);
        let lhs: Vec<(C64, PauliString)> = self
            .terms
            .iter()
            .copied()
            .chain(std::iter::once((self.identity_offset, id)))
            .collect();
        let rhs: Vec<(C64, PauliString)> = other
            .terms
            .iter()
            .copied()
            .chain(std::iter::once((other.identity_offset, id)))
            .collect();
        let mut acc: BTreeMap<PauliString, C64> = BTreeMap::new();
        let mut offset = ZERO;
        for (ca, a) in &lhs {
            for (cb, b) in &rhs {
                let (ph, p) = pauli_mul(a, b)?;
                let c = ca * cb * ph;
                if p.is_identity() {
                    offset += c;
                } else {
                    *acc.entry(p).or_insert(ZERO) += c;
                }
            }
        }
        Ok(Self::from_map(self.n_qubits, acc, offset))
    }

    /// Term-wise Hermitian part: imaginary coefficients are discarded.
    pub fn real_part(&self) -> Self {
        Self::from_terms(
            self.n_qubits,
            self.terms
                .iter()
                .map(|&(c, p)| (C64::new(c.re, 0.0), p))
                .chain(std::iter::once((
                    C64::new(self.identity_offset.re, 0.0),
                    PauliString::identity(self.n_qubits),
                ))),
        )
        .expect("same register")
    }

    /// Groups terms by X-mask so that `H|ψ⟩` costs one pass per group.
    pub fn compile(&self) -> CompiledSum {
        let dim = 1usize << self.n_qubits;
        let mut by_x: BTreeMap<u64, Vec<C64>> = BTreeMap::new();
        for &(c, p) in &self.terms {
            let diag = by_x.entry(p.x_mask).or_insert_with(|| vec![ZERO; dim]);
            let base = c * p.y_phase();
            for (i, d) in diag.iter_mut().enumerate() {
                if parity(i as u64 & p.z_mask) {
                    *d -= base;
                } else {
                    *d += base;
                }
            }
        }
        if self.identity_offset != ZERO {
            let diag = by_x.entry(0).or_insert_with(|| vec![ZERO; dim]);
            for d in diag.iter_mut() {
                *d += self.identity_offset;
            }
        }
        CompiledSum {
            n_qubits: self.n_qubits,
            groups: by_x.into_iter().collect(),
        }
    }

    pub fn apply(&self, s: &StateVector) -> Result<StateVector> {
        check_qubits(self.n_qubits, s.n_qubits())?;
        Ok(self.compile().apply(s))
    }
}

/// A Pauli sum rewritten as `Σ_x D_x X^x`, with `D_x` diagonal.
#[derive(Clone, Debug)]
pub struct CompiledSum {
    n_qubits: usize,
    groups: Vec<(u64, Vec<C64>)>,
}

impl CompiledSum {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// `out = H·input`.
    pub fn apply_into(&self, input: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|o| *o = ZERO);
        for (x, diag) in &self.groups {
            let x = *x as usize;
            for (i, (&a, &d)) in input.iter().zip(diag.iter()).enumerate() {
                out[i ^ x] += d * a;
            }
        }
    }

    /// `Σ w_k·H_k` over sums compiled on the same register.
    pub fn combination(parts: &[(f64, &CompiledSum)]) -> Result<CompiledSum> {
        let n_qubits = parts.first().map_or(0, |(_, p)| p.n_qubits);
        let mut by_x: BTreeMap<u64, Vec<C64>> = BTreeMap::new();
        for (w, part) in parts {
            check_qubits(n_qubits, part.n_qubits)?;
            for (x, diag) in &part.groups {
                let acc = by_x
                    .entry(*x)
                    .or_insert_with(|| vec![ZERO; diag.len()]);
                for (a, d) in acc.iter_mut().zip(diag) {
                    *a += d * *w;
                }
            }
        }
        Ok(CompiledSum {
            n_qubits,
            groups: by_x.into_iter().collect(),
        })
    }

    pub fn apply(&self, s: &StateVector) -> StateVector {
        let mut out = vec![ZERO; s.amplitudes.len()];
        self.apply_into(&s.amplitudes, &mut out);
        StateVector {
            n_qubits: s.n_qubits,
            amplitudes: out,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        if n_qubits > MAX_STATE_QUBITS {
            return Err(Error::CapExceeded {
                cap: MAX_STATE_QUBITS,
                n_qubits,
            });
        }
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::InvalidParameter(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[index] = ONE;
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Takes ownership of raw amplitudes; the length must be a power of two.
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        let dim = amplitudes.len();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "amplitude count {dim} is not a power of two"
            )));
        }
        Ok(Self {
            n_qubits: dim.trailing_zeros() as usize,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_qubits(self.n_qubits, other.n_qubits)?;
        Ok(inner(&self.amplitudes, &other.amplitudes))
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.amplitudes).sqrt()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Numeric("statevector normalization"));
        }
        self.amplitudes.iter_mut().for_each(|a| *a /= n);
        Ok(self)
    }

    pub fn scaled(mut self, s: C64) -> Self {
        self.amplitudes.iter_mut().for_each(|a| *a *= s);
        self
    }

    /// `‖self − other‖`.
    pub fn distance(&self, other: &StateVector) -> Result<f64> {
        check_qubits(self.n_qubits, other.n_qubits)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// `1 − |⟨self|other⟩|²` for normalized inputs.
    pub fn infidelity(&self, other: &StateVector) -> Result<f64> {
        Ok((1.0 - self.inner(other)?.norm_sqr()).max(0.0))
    }
}

/// `Σ conj(a_i) b_i`, summed in index order.
#[inline]
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    C64::new(re, im)
}

/// `Re Σ conj(a_i) b_i`.
#[inline]
pub fn inner_re(a: &[C64], b: &[C64]) -> f64 {
    let mut re = 0.0;
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
    }
    re
}

#[inline]
pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// `out = P·input`.
pub fn apply_pauli_into(p: &PauliString, input: &[C64], out: &mut [C64]) {
    let base = p.y_phase();
    let x = p.x_mask as usize;
    let z = p.z_mask;
    for (i, &a) in input.iter().enumerate() {
        let v = base * a;
        out[i ^ x] = if parity(i as u64 & z) { -v } else { v };
    }
}

pub fn apply_pauli(p: &PauliString, s: &StateVector) -> Result<StateVector> {
    check_qubits(p.n_qubits(), s.n_qubits())?;
    let mut out = vec![ZERO; s.dim()];
    apply_pauli_into(p, &s.amplitudes, &mut out);
    Ok(StateVector {
        n_qubits: s.n_qubits,
        amplitudes: out,
    })
}

/// In-place `ψ ← exp(-iθP)ψ = cos θ ψ − i sin θ Pψ`. The caller guarantees `P ≠ I`.
pub fn rotate_in_place(amps: &mut [C64], theta: f64, p: &PauliString) {
    let (s, c) = theta.sin_cos();
    // -i sinθ · i^{|x&z|}
    let m = C64::new(0.0, -s) * p.y_phase();
    let x = p.x_mask as usize;
    let z = p.z_mask;
    if x == 0 {
        let plus = C64::new(c, 0.0) + m;
        let minus = C64::new(c, 0.0) - m;
        for (i, a) in amps.iter_mut().enumerate() {
            *a *= if parity(i as u64 & z) { minus } else { plus };
        }
        return;
    }
    // Visit each pair (i, i^x) once, from the member with the top bit of x clear.
    let hi = 1usize << (63 - (x as u64).leading_zeros());
    for i in 0..amps.len() {
        if i & hi != 0 {
            continue;
        }
        let j = i ^ x;
        let a = amps[i];
        let b = amps[j];
        // (Pψ)[i] = sign(j)·b, (Pψ)[j] = sign(i)·a, with the common phase in m.
        let pb = if parity(j as u64 & z) { -b } else { b };
        let pa = if parity(i as u64 & z) { -a } else { a };
        amps[i] = a * c + m * pb;
        amps[j] = b * c + m * pa;
    }
}

/// [`rotate_in_place`] applied to many states at once. Amplitude `i` of state
/// `k` lives at `rows[i * stride + k]`; only states `0..width` are touched.
pub fn rotate_rows(rows: &mut [C64], stride: usize, width: usize, theta: f64, p: &PauliString) {
    if width == 0 {
        return;
    }
    let (s, c) = theta.sin_cos();
    let m = C64::new(0.0, -s) * p.y_phase();
    let x = p.x_mask as usize;
    let z = p.z_mask;
    let dim = rows.len() / stride;
    if x == 0 {
        let plus = C64::new(c, 0.0) + m;
        let minus = C64::new(c, 0.0) - m;
        for i in 0..dim {
            let f = if parity(i as u64 & z) { minus } else { plus };
            rows[i * stride..i * stride + width].iter_mut().for_each(|a| *a *= f);
        }
        return;
    }
    let hi = 1usize << (63 - (x as u64).leading_zeros());
    for i in 0..dim {
        if i & hi != 0 {
            continue;
        }
        let j = i ^ x;
        let mi = if parity(j as u64 & z) { -m } else { m };
        let mj = if parity(i as u64 & z) { -m } else { m };
        // i < j because j has the top bit of x set.
        let (lo, hi_part) = rows.split_at_mut(j * stride);
        let ri = &mut lo[i * stride..i * stride + width];
        let rj = &mut hi_part[..width];
        for (a, b) in ri.iter_mut().zip(rj.iter_mut()) {
            let (va, vb) = (*a, *b);
            *a = va * c + mi * vb;
            *b = vb * c + mj * va;
        }
    }
}

pub fn apply_rotation(theta: f64, p: &PauliString, s: &StateVector) -> Result<StateVector> {
    check_qubits(p.n_qubits(), s.n_qubits())?;
    if p.is_identity() {
        return Err(Error::InvalidGenerator);
    }
    let mut out = s.clone();
    rotate_in_place(&mut out.amplitudes, theta, p);
    Ok(out)
}

pub fn expectation(h: &PauliSum, s: &StateVector) -> Result<C64> {
    check_qubits(h.n_qubits(), s.n_qubits())?;
    let mut tmp = vec![ZERO; s.dim()];
    let mut total = h.identity_offset() * norm_sqr(&s.amplitudes);
    for &(c, p) in h.terms() {
        apply_pauli_into(&p, &s.amplitudes, &mut tmp);
        total += c * inner(&s.amplitudes, &tmp);
    }
    Ok(total)
}

/// `⟨H²⟩ − ⟨H⟩²` with `H²` built symbolically; clamped at zero.
pub fn variance(h: &PauliSum, s: &StateVector) -> Result<f64> {
    check_qubits(h.n_qubits(), s.n_qubits())?;
    let imag = h.max_imag();
    if imag > 1e-10 {
        return Err(Error::NonHermitian(imag));
    }
    let h2 = h.mul(h)?;
    let e = expectation(h, s)?.re;
    let e2 = expectation(&h2, s)?.re;
    Ok((e2 - e * e).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn approx(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn batched_rotation_matches_single() {
        let dim = 8;
        let states: Vec<Vec<C64>> = (0..3)
            .map(|k| {
                (0..dim)
                    .map(|i| C64::new((i * 3 + k) as f64 * 0.1, (k as f64 - i as f64) * 0.05))
                    .collect()
            })
            .collect();
        for gen in ["XYZ", "ZIZ", "IYX"] {
            let p = ps(gen);
            let stride = 4;
            let mut rows = vec![C64::new(9.0, 9.0); dim * stride];
            for (k, st) in states.iter().enumerate() {
                for i in 0..dim {
                    rows[i * stride + k] = st[i];
                }
            }
            rotate_rows(&mut rows, stride, 3, 0.37, &p);
            for (k, st) in states.iter().enumerate() {
                let mut one = st.clone();
                rotate_in_place(&mut one, 0.37, &p);
                for i in 0..dim {
                    assert!(approx(rows[i * stride + k], one[i]));
                }
            }
            assert!((0..dim).all(|i| rows[i * stride + 3] == C64::new(9.0, 9.0)));
        }
    }

    #[test]
    fn single_qubit_table() {
        let (ph, p) = pauli_mul(&ps("XI"), &ps("YI")).unwrap();
        assert!(approx(ph, C64::new(0.0, 1.0)));
        assert_eq!(p, ps("ZI"));
        let (ph, p) = pauli_mul(&ps("YX"), &ps("YX")).unwrap();
        assert!(approx(ph, ONE));
        assert!(p.is_identity());
    }

    #[test]
    fn mul_two_qubit_example() {
        // (Z⊗X)(X⊗X) = ZX ⊗ I = iY ⊗ I
        let (ph, p) = pauli_mul(&ps("ZX"), &ps("XX")).unwrap();
        assert!(approx(ph, C64::new(0.0, 1.0)));
        assert_eq!(p, ps("YI"));
    }

    #[test]
    fn mismatched_registers_are_rejected() {
        assert!(matches!(
            pauli_mul(&ps("X"), &ps("XX")),
            Err(Error::Dimension { .. })
        ));
        assert!(commutes(&ps("X"), &ps("XX")).is_err());
    }

    #[test]
    fn commutation_examples() {
        assert!(commutes(&ps("XI"), &ps("IZ")).unwrap());
        assert!(!commutes(&ps("X"), &ps("Z")).unwrap());
        assert!(commutes(&ps("XX"), &ps("YY")).unwrap());
    }

    #[test]
    fn pauli_action_on_zero() {
        let zero = StateVector::basis(1, 0).unwrap();
        let z = apply_pauli(&ps("Z"), &zero).unwrap();
        assert!(approx(z.amplitudes()[0], ONE));
        let x = apply_pauli(&ps("X"), &zero).unwrap();
        assert!(approx(x.amplitudes()[1], ONE));
        let y = apply_pauli(&ps("Y"), &zero).unwrap();
        assert!(approx(y.amplitudes()[1], C64::new(0.0, 1.0)));
        assert!(approx(y.amplitudes()[0], ZERO));
    }

    #[test]
    fn rotation_closed_forms() {
        let zero = StateVector::basis(1, 0).unwrap();
        let same = apply_rotation(0.0, &ps("X"), &zero).unwrap();
        assert_eq!(same, zero);
        let r = apply_rotation(std::f64::consts::FRAC_PI_2, &ps("X"), &zero).unwrap();
        assert!(approx(r.amplitudes()[1], C64::new(0.0, -1.0)));
        assert!(r.amplitudes()[0].norm() < 1e-15);
        assert!(matches!(
            apply_rotation(0.1, &ps("I"), &zero),
            Err(Error::InvalidGenerator)
        ));
    }

    #[test]
    fn zz_rotation_on_bell_state() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = StateVector::from_amplitudes(vec![
            C64::new(h, 0.0),
            ZERO,
            ZERO,
            C64::new(h, 0.0),
        ])
        .unwrap();
        let r = apply_rotation(0.3, &ps("ZZ"), &bell).unwrap();
        let ph = C64::from_polar(1.0, -0.3);
        for (a, b) in r.amplitudes().iter().zip(bell.amplitudes()) {
            assert!(approx(*a, ph * b));
        }
    }

    #[test]
    fn expectation_and_variance_basics() {
        let zero = StateVector::basis(1, 0).unwrap();
        let z = PauliSum::from_terms(1, [(ONE, ps("Z"))]).unwrap();
        let x = PauliSum::from_terms(1, [(ONE, ps("X"))]).unwrap();
        assert!(approx(expectation(&z, &zero).unwrap(), ONE));
        assert!(approx(expectation(&x, &zero).unwrap(), ZERO));
        assert!(variance(&z, &zero).unwrap().abs() < 1e-14);
        assert!((variance(&x, &zero).unwrap() - 1.0).abs() < 1e-14);
        let bad = PauliSum::from_terms(1, [(C64::new(0.0, 1.0), ps("X"))]).unwrap();
        assert!(matches!(variance(&bad, &zero), Err(Error::NonHermitian(_))));
    }

    #[test]
    fn weights_and_cnot_costs() {
        assert_eq!(ps("XZZY").cnot_cost(), 6);
        assert_eq!(ps("IIYI").cnot_cost(), 0);
        assert_eq!(ps("IIII").weight(), 0);
        assert_eq!(ps("IIII").cnot_cost(), 0);
    }

    #[test]
    fn sum_merges_and_drops() {
        let s = PauliSum::from_terms(
            2,
            [
                (ONE, ps("XX")),
                (C64::new(-1.0, 0.0), ps("XX")),
                (C64::new(2.0, 0.0), ps("ZI")),
                (C64::new(0.5, 0.0), ps("II")),
                (C64::new(1e-14, 0.0), ps("YY")),
            ],
        )
        .unwrap();
        assert_eq!(s.terms().len(), 1);
        assert!(approx(s.identity_offset(), C64::new(0.5, 0.0)));
        assert!(approx(s.coefficient(&ps("ZI")), C64::new(2.0, 0.0)));
    }

    #[test]
    fn string_parse_round_trip() {
        let p = ps("XIZY");
        assert_eq!(p.to_string(), "XIZY");
        assert_eq!(p.x_mask(), 0b1001);
        assert_eq!(p.z_mask(), 0b1100);
        assert!("XQ".parse::<PauliString>().is_err());
    }
}
