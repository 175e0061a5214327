//! The symplectic group P_S(D, n) acting on Z_D^{2n}, and translations.
//!
//! Vectors are columns `x = (i_1..i_n, j_1..j_n)` and an element acts as
//! `x ↦ Mx`. Composition `p ∘ q` corresponds to the matrix product `P·Q`.

mod completion;
mod generators;

pub use completion::{complete_canonical_set, enumerate, random_element, Enumeration, DEFAULT_GROUP_CAP};
pub use generators::{decompose_to_generators, generators, to_basic_word, word_product, Generator};

use crate::error::{invalid, precondition, Result};
use crate::modlinalg::{ModMatrix, ModVector};
use crate::ring::{gcd_d, totient, Modulus};
use std::fmt;

/// `Ω = [[0, I], [−I, 0]]` with `n×n` blocks.
pub fn omega(n: usize, modulus: Modulus) -> ModMatrix {
    ModMatrix::from_fn(modulus, 2 * n, 2 * n, |r, c| {
        if c == r + n {
            1
        } else if r == c + n {
            -1
        } else {
            0
        }
    })
}

/// Symplectic form `xᵗΩy = Σ_k x_{i_k} y_{j_k} − x_{j_k} y_{i_k}`.
pub fn symplectic_product(x: &ModVector, y: &ModVector) -> u64 {
    let m = x.modulus();
    let n = x.len() / 2;
    (0..n).fold(0, |acc, k| {
        let plus = m.mul(x.get(k), y.get(n + k));
        let minus = m.mul(x.get(n + k), y.get(k));
        m.add(acc, m.sub(plus, minus))
    })
}

/// `Ωx`, computed without building `Ω`.
pub fn omega_apply(x: &ModVector) -> ModVector {
    let m = x.modulus();
    let n = x.len() / 2;
    ModVector::new(
        m,
        (0..2 * n).map(|r| if r < n { x.get(r + n) } else { m.neg(x.get(r - n)) }),
    )
}

/// Whether `MᵗΩM = Ω`.
pub fn is_symplectic(m: &ModMatrix, n: usize) -> Result<bool> {
    if m.rows() != 2 * n || m.cols() != 2 * n {
        return Err(invalid(format!(
            "expected a {0}×{0} matrix, got {1}×{2}",
            2 * n,
            m.rows(),
            m.cols()
        )));
    }
    let cols = m.column_vectors();
    for a in 0..2 * n {
        for b in a..2 * n {
            // (MᵗΩM)_{ab} = col_aᵗ Ω col_b
            let expected = if a < n && b == a + n { 1 } else { 0 };
            if symplectic_product(&cols[a], &cols[b]) != expected {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// `|P_S(D,n)| = D^{n²} ∏_{k=1}^{n} φ_{2k}(D)`.
pub fn group_order(modulus: Modulus, n: usize) -> Result<u64> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let d = modulus.get();
    let exp = u32::try_from(n * n).map_err(|_| crate::error::Error::Overflow("group order"))?;
    let mut order = d.checked_pow(exp).ok_or(crate::error::Error::Overflow("group order"))?;
    for k in 1..=n {
        let phi = totient(2 * k as u32, d)?;
        order = order
            .checked_mul(phi)
            .ok_or(crate::error::Error::Overflow("group order"))?;
    }
    Ok(order)
}

/// Whether some element of P_S maps `y` to `x`: exactly when `gcd(x) = gcd(y)`.
pub fn orbit_gcd_check(x: &ModVector, y: &ModVector) -> Result<bool> {
    if x.len() != y.len() || x.modulus() != y.modulus() || !x.len().is_multiple_of(2) {
        return Err(invalid("vectors must share a modulus and an even length"));
    }
    Ok(gcd_d(x.entries(), x.modulus()) == gcd_d(y.entries(), y.modulus()))
}

/// An element of P_S(D, n), stored as its matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymplecticElement {
    n: usize,
    matrix: ModMatrix,
}

impl SymplecticElement {
    pub fn new(matrix: ModMatrix, n: usize) -> Result<Self> {
        if !is_symplectic(&matrix, n)? {
            return Err(precondition("matrix does not satisfy MᵗΩM = Ω"));
        }
        Ok(SymplecticElement { n, matrix })
    }

    pub(crate) fn new_unchecked(matrix: ModMatrix, n: usize) -> Self {
        debug_assert!(is_symplectic(&matrix, n).unwrap_or(false));
        SymplecticElement { n, matrix }
    }

    pub fn identity(modulus: Modulus, n: usize) -> Self {
        SymplecticElement {
            n,
            matrix: ModMatrix::identity(modulus, 2 * n),
        }
    }

    /// Builds the element whose columns are `u_1..u_n, v_1..v_n`.
    pub fn from_columns(us: &[ModVector], vs: &[ModVector]) -> Result<Self> {
        let n = us.len();
        let Some(first) = us.first() else {
            return Err(invalid("need at least one column pair"));
        };
        let cols: Vec<ModVector> = us.iter().chain(vs).cloned().collect();
        let matrix = ModMatrix::from_columns(first.modulus(), 2 * n, &cols)?;
        Self::new(matrix, n)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn modulus(&self) -> Modulus {
        self.matrix.modulus()
    }

    pub fn matrix(&self) -> &ModMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ModMatrix {
        self.matrix
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &SymplecticElement) -> SymplecticElement {
        SymplecticElement {
            n: self.n,
            matrix: self.matrix.mul(&other.matrix),
        }
    }

    /// `M⁻¹ = ΩᵗMᵗΩ`.
    pub fn inverse(&self) -> SymplecticElement {
        let om = omega(self.n, self.modulus());
        SymplecticElement {
            n: self.n,
            matrix: om.transpose().mul(&self.matrix.transpose()).mul(&om),
        }
    }

    pub fn apply(&self, x: &ModVector) -> ModVector {
        self.matrix.mul_vec(x)
    }

    /// The induced permutation of flat indices of Z_D^{2n}: entry `k` is the
    /// index of `M·x` where `x` has index `k`.
    pub fn index_permutation(&self) -> Vec<usize> {
        let m = self.modulus();
        let len = 2 * self.n;
        let size = (m.get() as usize).pow(len as u32);
        let d = m.get() as usize;
        let mut x = vec![0u64; len];
        let mut y = vec![0u64; len];
        let mut out = Vec::with_capacity(size);
        for _ in 0..size {
            self.matrix.mul_slice_into(&x, &mut y);
            out.push(y.iter().fold(0usize, |acc, &v| acc * d + v as usize));
            // increment x in index order
            for slot in x.iter_mut().rev() {
                *slot += 1;
                if *slot == m.get() {
                    *slot = 0;
                } else {
                    break;
                }
            }
        }
        out
    }
}

impl fmt::Display for SymplecticElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.matrix.fmt(f)
    }
}

/// A translation `x ↦ x + a` of Z_D^{2n}.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Translation {
    pub a: ModVector,
}

impl Translation {
    pub fn new(a: ModVector) -> Self {
        Translation { a }
    }

    pub fn apply(&self, x: &ModVector) -> ModVector {
        x.add(&self.a)
    }

    pub fn compose(&self, other: &Translation) -> Translation {
        Translation::new(self.a.add(&other.a))
    }

    pub fn inverse(&self) -> Translation {
        Translation::new(self.a.scale(self.a.modulus().get() - 1))
    }
}
