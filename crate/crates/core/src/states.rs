//! Bell-diagonal states of `n` qudit pairs.
//!
//! A state is a probability vector over Z_D^{2n}, indexed by
//! `x = (i_1..i_n, j_1..j_n)` with the first component most significant.
//! Entry `x` is the weight of the Bell vector
//! `|Ψ_{i,j}⟩ = D^{-1/2} Σ_k ω^{k i} |k⟩|k − j⟩` (tensored over pairs).

use crate::error::{invalid, precondition, Error, Result};
use crate::modlinalg::ModVector;
use crate::ring::{gcd_d, Modulus};
use crate::symplectic::SymplecticElement;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Largest number of entries a state vector may have.
pub const STATE_SIZE_CAP: u128 = 1 << 24;

/// Default tolerance for the partial-transpose eigenvalue test.
pub const DEFAULT_NPPT_TOLERANCE: f64 = 1e-9;

const NEGATIVE_CLAMP: f64 = 1e-15;
const NORMALIZATION_TOLERANCE: f64 = 1e-9;

fn state_len(modulus: Modulus, pairs: usize) -> Result<usize> {
    let needed = (modulus.get() as u128).saturating_pow(2 * pairs as u32);
    if needed > STATE_SIZE_CAP {
        return Err(Error::ResourceCap {
            what: "state vector",
            needed,
            cap: STATE_SIZE_CAP,
        });
    }
    Ok(needed as usize)
}

/// `ω^k` with `ω = e^{2πi/D}`.
pub fn root_of_unity(modulus: Modulus, k: u64) -> Complex64 {
    let angle = 2.0 * PI * (k % modulus.get()) as f64 / modulus.get() as f64;
    Complex64::from_polar(1.0, angle)
}

/// A Bell-diagonal state of `n` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateJson", into = "StateJson")]
pub struct BellDiagonalState {
    modulus: Modulus,
    pairs: usize,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct StateJson {
    #[serde(rename = "D")]
    d: u64,
    n: usize,
    p: Vec<f64>,
}

impl TryFrom<StateJson> for BellDiagonalState {
    type Error = Error;

    fn try_from(j: StateJson) -> Result<Self> {
        BellDiagonalState::new(Modulus::new(j.d)?, j.n, j.p)
    }
}

impl From<BellDiagonalState> for StateJson {
    fn from(s: BellDiagonalState) -> Self {
        StateJson {
            d: s.modulus.get(),
            n: s.pairs,
            p: s.probs,
        }
    }
}

impl BellDiagonalState {
    /// Validates a user-supplied probability vector.
    ///
    /// Entries above `-1e-15` are accepted and clamped at zero; the total
    /// must be within `1e-9` of one and is then renormalized exactly.
    pub fn new(modulus: Modulus, pairs: usize, probs: Vec<f64>) -> Result<Self> {
        if pairs == 0 {
            return Err(invalid("a state needs at least one pair"));
        }
        let len = state_len(modulus, pairs)?;
        if probs.len() != len {
            return Err(invalid(format!(
                "expected {len} probabilities for D={modulus}, n={pairs}, got {}",
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < -NEGATIVE_CLAMP) {
            return Err(invalid(format!("{p} is not a probability")));
        }
        let total: f64 = probs.iter().map(|p| p.max(0.0)).sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(invalid(format!("probabilities sum to {total}, not 1")));
        }
        Self::from_weights(modulus, pairs, probs)
    }

    /// Clamps and rescales nonnegative weights into a state.
    pub(crate) fn from_weights(modulus: Modulus, pairs: usize, mut probs: Vec<f64>) -> Result<Self> {
        let mut total = 0.0;
        for p in probs.iter_mut() {
            if *p < 0.0 {
                if *p < -1e-12 {
                    return Err(Error::Numerical(format!("negative weight {p}")));
                }
                *p = 0.0;
            }
            total += *p;
        }
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Numerical(format!("weights sum to {total}")));
        }
        for p in probs.iter_mut() {
            *p /= total;
        }
        Ok(BellDiagonalState { modulus, pairs, probs })
    }

    pub fn point_mass(modulus: Modulus, pairs: usize, index: usize) -> Result<Self> {
        let len = state_len(modulus, pairs)?;
        if index >= len {
            return Err(invalid(format!("index {index} out of range")));
        }
        let mut probs = vec![0.0; len];
        probs[index] = 1.0;
        Ok(BellDiagonalState { modulus, pairs, probs })
    }

    pub fn uniform(modulus: Modulus, pairs: usize) -> Result<Self> {
        let len = state_len(modulus, pairs)?;
        Ok(BellDiagonalState {
            modulus,
            pairs,
            probs: vec![1.0 / len as f64; len],
        })
    }

    /// `F` on the reference Bell state, `(1 − F)/(D² − 1)` elsewhere.
    pub fn isotropic(modulus: Modulus, fidelity: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fidelity) {
            return Err(invalid(format!("fidelity {fidelity} outside [0, 1]")));
        }
        let d2 = (modulus.get() * modulus.get()) as usize;
        let rest = (1.0 - fidelity) / (d2 - 1) as f64;
        let mut probs = vec![rest; d2];
        probs[0] = fidelity;
        Ok(BellDiagonalState {
            modulus,
            pairs: 1,
            probs,
        })
    }

    /// Uniform over the divisor class `{x ∈ Z_D^{2n} : gcd(x) = d}`.
    pub fn heterotropic_invariant(d: u64, modulus: Modulus, pairs: usize) -> Result<Self> {
        if d == 0 || !modulus.get().is_multiple_of(d) {
            return Err(invalid(format!("{d} does not divide {modulus}")));
        }
        let classes = class_table(modulus, pairs)?;
        let weights = classes.iter().map(|&c| if c == d { 1.0 } else { 0.0 }).collect();
        Self::from_weights(modulus, pairs, weights)
    }

    /// Weight `1/d²` on each `x ∈ Z_D²` with `d·x = 0`.
    pub fn fixed_state(d: u64, modulus: Modulus) -> Result<Self> {
        if d == 0 || !modulus.get().is_multiple_of(d) {
            return Err(invalid(format!("{d} does not divide {modulus}")));
        }
        let big_d = modulus.get();
        let step = big_d / d;
        let weights = (0..big_d * big_d)
            .map(|idx| {
                let (i, j) = (idx / big_d, idx % big_d);
                if i % step == 0 && j % step == 0 {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        Self::from_weights(modulus, 1, weights)
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    /// Number of qudit pairs `n`.
    pub fn pairs(&self) -> usize {
        self.pairs
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, x: &ModVector) -> f64 {
        self.probs[x.to_index()]
    }

    /// Weight on the all-zero index: the joint fidelity for `n ≥ 2`.
    pub fn fidelity(&self) -> f64 {
        self.probs[0]
    }

    /// `p̃_x̃ = Σ_x ω^{x̃·x} p_x`, one axis at a time.
    pub fn fourier(&self) -> FourierVector {
        let values = self.probs.iter().map(|&p| Complex64::new(p, 0.0)).collect();
        FourierVector {
            modulus: self.modulus,
            pairs: self.pairs,
            values: dft_axes(self.modulus, 2 * self.pairs, values, false),
        }
    }

    /// `p'_{Mx} = p_x`.
    pub fn apply_permutation(&self, m: &SymplecticElement) -> Result<Self> {
        if m.n() != self.pairs || m.modulus() != self.modulus {
            return Err(precondition("permutation and state have different shapes"));
        }
        let perm = m.index_permutation();
        let mut probs = vec![0.0; self.probs.len()];
        for (x, &p) in self.probs.iter().enumerate() {
            probs[perm[x]] = p;
        }
        Ok(BellDiagonalState {
            modulus: self.modulus,
            pairs: self.pairs,
            probs,
        })
    }

    /// Total probability in each divisor class of Z_D^{2n}.
    pub fn class_masses(&self) -> BTreeMap<u64, f64> {
        let classes = class_table(self.modulus, self.pairs).expect("state size already checked");
        let mut out = BTreeMap::new();
        for (c, p) in classes.iter().zip(&self.probs) {
            *out.entry(*c).or_insert(0.0) += p;
        }
        out
    }

    /// Averages the probabilities within each divisor class.
    pub fn twirl_symplectic(&self) -> Self {
        let classes = class_table(self.modulus, self.pairs).expect("state size already checked");
        let mut mass: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
        for (c, p) in classes.iter().zip(&self.probs) {
            let e = mass.entry(*c).or_insert((0.0, 0));
            e.0 += p;
            e.1 += 1;
        }
        let probs = classes
            .iter()
            .map(|c| {
                let (m, k) = mass[c];
                m / k as f64
            })
            .collect();
        BellDiagonalState {
            modulus: self.modulus,
            pairs: self.pairs,
            probs,
        }
    }

    /// Joint state of `self` on the first pairs and `other` on the rest.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        if self.modulus != other.modulus {
            return Err(invalid("tensor factors have different D"));
        }
        let pairs = self.pairs + other.pairs;
        let len = state_len(self.modulus, pairs)?;
        let d = self.modulus.get() as usize;
        let (ha, hb) = (d.pow(self.pairs as u32), d.pow(other.pairs as u32));
        let mut probs = vec![0.0; len];
        for (a, &pa) in self.probs.iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            let (ia, ja) = (a / ha, a % ha);
            for (b, &pb) in other.probs.iter().enumerate() {
                let (ib, jb) = (b / hb, b % hb);
                let idx = ((ia * hb + ib) * ha + ja) * hb + jb;
                probs[idx] = pa * pb;
            }
        }
        Ok(BellDiagonalState {
            modulus: self.modulus,
            pairs,
            probs,
        })
    }

    /// `self^{⊗k}`.
    pub fn tensor_power(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(invalid("tensor power needs k >= 1"));
        }
        let mut out = self.clone();
        for _ in 1..k {
            out = out.tensor(self)?;
        }
        Ok(out)
    }

    /// Reduced state on the listed pairs (0-based, kept in the given order).
    pub fn marginal(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(invalid("marginal needs at least one pair"));
        }
        if keep.iter().any(|&k| k >= self.pairs) {
            return Err(invalid("pair index out of range"));
        }
        let mut sorted = keep.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != keep.len() {
            return Err(invalid("pair listed twice"));
        }
        let n = self.pairs;
        let d = self.modulus.get() as usize;
        let mut probs = vec![0.0; d.pow(2 * keep.len() as u32)];
        let mut digits = vec![0usize; 2 * n];
        for (x, &p) in self.probs.iter().enumerate() {
            let mut rest = x;
            for slot in digits.iter_mut().rev() {
                *slot = rest % d;
                rest /= d;
            }
            let idx = keep
                .iter()
                .map(|&k| digits[k])
                .chain(keep.iter().map(|&k| digits[n + k]))
                .fold(0, |acc, v| acc * d + v);
            probs[idx] += p;
        }
        Self::from_weights(self.modulus, keep.len(), probs)
    }

    /// `Σ_x p_x |Ψ_x⟩⟨Ψ_x|` in the basis `|a⟩|b⟩ ↦ a·D + b` (one pair only).
    pub fn to_density_matrix(&self) -> Result<DensityMatrix> {
        if self.pairs != 1 {
            return Err(precondition("density matrices are only built for one pair"));
        }
        let d = self.modulus.get() as usize;
        if d > 64 {
            return Err(precondition("density matrices are limited to D <= 64"));
        }
        let mut rho = DMatrix::<Complex64>::zeros(d * d, d * d);
        for (x, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let (i, j) = (x / d, x % d);
            let w = p / d as f64;
            for k in 0..d {
                let row = k * d + (k + d - j) % d;
                for kp in 0..d {
                    let col = kp * d + (kp + d - j) % d;
                    let phase = root_of_unity(self.modulus, (((k + d - kp) % d) * i) as u64);
                    rho[(row, col)] += phase * w;
                }
            }
        }
        Ok(DensityMatrix {
            modulus: self.modulus,
            matrix: rho,
        })
    }

    /// Whether the partial transpose has an eigenvalue below `-tol` (one pair only).
    pub fn is_nppt(&self, tol: f64) -> Result<bool> {
        Ok(self.to_density_matrix()?.min_partial_transpose_eigenvalue()? < -tol)
    }
}

/// `gcd(x)` for every index of Z_D^{2n}.
pub(crate) fn class_table(modulus: Modulus, pairs: usize) -> Result<Vec<u64>> {
    let len = state_len(modulus, pairs)?;
    let mut out = Vec::with_capacity(len);
    let mut x = ModVector::zeros(modulus, 2 * pairs);
    for idx in 0..len {
        if idx > 0 {
            x = ModVector::from_index(modulus, 2 * pairs, idx);
        }
        out.push(gcd_d(x.entries(), modulus));
    }
    Ok(out)
}

/// Discrete Fourier transform along each of `axes` base-`D` digits.
fn dft_axes(modulus: Modulus, axes: usize, mut values: Vec<Complex64>, inverse: bool) -> Vec<Complex64> {
    let d = modulus.get() as usize;
    let roots: Vec<Complex64> = (0..d as u64)
        .map(|k| {
            let w = root_of_unity(modulus, k);
            if inverse {
                w.conj()
            } else {
                w
            }
        })
        .collect();
    let len = values.len();
    let mut line = vec![Complex64::new(0.0, 0.0); d];
    for axis in 0..axes {
        let stride = d.pow((axes - 1 - axis) as u32);
        for base in 0..len {
            // visit each line once, from the index whose digit on this axis is 0
            if !(base / stride).is_multiple_of(d) {
                continue;
            }
            for (t, slot) in line.iter_mut().enumerate() {
                *slot = values[base + t * stride];
            }
            for kt in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for (t, v) in line.iter().enumerate() {
                    acc += roots[(kt * t) % d] * v;
                }
                values[base + kt * stride] = acc;
            }
        }
    }
    if inverse {
        let scale = 1.0 / len as f64;
        for v in values.iter_mut() {
            *v *= scale;
        }
    }
    values
}

/// Fourier transform of a Bell-diagonal probability vector.
///
/// The values are complex in general: `p̃_{-x̃}` is the conjugate of `p̃_x̃`,
/// so only sums over sets closed under negation (such as subspaces) are real.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierVector {
    modulus: Modulus,
    pairs: usize,
    values: Vec<Complex64>,
}

impl FourierVector {
    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn pairs(&self) -> usize {
        self.pairs
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, x: &ModVector) -> Complex64 {
        self.values[x.to_index()]
    }

    /// Inverts the transform, failing if the result is not a real probability vector.
    pub fn inverse(&self) -> Result<BellDiagonalState> {
        let values = dft_axes(self.modulus, 2 * self.pairs, self.values.clone(), true);
        let mut probs = Vec::with_capacity(values.len());
        for v in values {
            if v.im.abs() > 1e-12 {
                return Err(Error::Numerical(format!("imaginary residue {}", v.im)));
            }
            probs.push(v.re);
        }
        BellDiagonalState::new(self.modulus, self.pairs, probs)
    }
}

/// A one-pair density matrix on C^D ⊗ C^D.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    modulus: Modulus,
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(modulus: Modulus, matrix: DMatrix<Complex64>) -> Result<Self> {
        let d2 = (modulus.get() * modulus.get()) as usize;
        if matrix.nrows() != d2 || matrix.ncols() != d2 {
            return Err(invalid(format!("expected a {d2}×{d2} matrix")));
        }
        let herm = (&matrix - matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let trace = matrix.trace();
        if herm > 1e-12 || (trace.re - 1.0).abs() > 1e-12 || trace.im.abs() > 1e-12 {
            return Err(precondition("density matrix must be Hermitian with unit trace"));
        }
        Ok(DensityMatrix { modulus, matrix })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Transposes the second subsystem: `(a,b),(a',b') ↦ (a,b'),(a',b)`.
    pub fn partial_transpose(&self) -> DMatrix<Complex64> {
        let d = self.modulus.get() as usize;
        DMatrix::from_fn(d * d, d * d, |r, c| {
            let (a, b) = (r / d, r % d);
            let (ap, bp) = (c / d, c % d);
            self.matrix[(a * d + bp, ap * d + b)]
        })
    }

    pub fn min_partial_transpose_eigenvalue(&self) -> Result<f64> {
        let pt = self.partial_transpose();
        let eig = pt
            .try_symmetric_eigen(1e-14, 10_000)
            .ok_or_else(|| Error::Numerical("Hermitian eigensolver did not converge".into()))?;
        Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
    }

    /// Diagonal of the matrix in the Bell basis.
    pub fn bell_diagonal(&self) -> Result<BellDiagonalState> {
        let d = self.modulus.get() as usize;
        let norm = 1.0 / (d as f64).sqrt();
        let mut probs = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let mut ket = nalgebra::DVector::<Complex64>::zeros(d * d);
                for k in 0..d {
                    ket[k * d + (k + d - j) % d] = root_of_unity(self.modulus, (k * i) as u64) * norm;
                }
                let val = (ket.adjoint() * &self.matrix * &ket)[(0, 0)];
                probs.push(val.re);
            }
        }
        BellDiagonalState::new(self.modulus, 1, probs)
    }
}
