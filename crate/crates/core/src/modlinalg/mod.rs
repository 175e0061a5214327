//! Linear algebra over the module Z_D^n.
//!
//! Z_D is not a field for composite `D`, so elimination uses the two-operation
//! pair reduction in [`pair_reduce`] instead of division, and rank is defined
//! through the gcd of minors rather than pivot counts.

mod elimination;
mod subspace;

pub use elimination::{
    decompose, extend_to_basis, is_linearly_independent, pair_reduce, rank, Decomposition,
    PairOp,
};
pub use subspace::{span_of_generators, Subspace, DEFAULT_ENUMERATION_CAP};

use crate::error::{invalid, Result};
use crate::ring::{gcd_d, Modulus};
use serde::{Deserialize, Serialize};
use std::fmt;

/// A tuple of residues in Z_D.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModVector {
    modulus: Modulus,
    entries: Vec<u64>,
}

impl ModVector {
    /// Builds a vector, reducing every entry into `[0, D)`.
    pub fn new(modulus: Modulus, entries: impl IntoIterator<Item = u64>) -> Self {
        let entries = entries.into_iter().map(|x| modulus.reduce(x)).collect();
        ModVector { modulus, entries }
    }

    pub fn from_signed(modulus: Modulus, entries: &[i64]) -> Self {
        ModVector {
            modulus,
            entries: entries.iter().map(|&x| modulus.reduce_signed(x)).collect(),
        }
    }

    pub fn zeros(modulus: Modulus, len: usize) -> Self {
        ModVector {
            modulus,
            entries: vec![0; len],
        }
    }

    /// The standard basis vector `e_k`.
    pub fn unit(modulus: Modulus, len: usize, k: usize) -> Self {
        let mut v = Self::zeros(modulus, len);
        v.entries[k] = 1;
        v
    }

    /// Decodes a flat index; the first component is the most significant digit.
    pub fn from_index(modulus: Modulus, len: usize, mut index: usize) -> Self {
        let d = modulus.get() as usize;
        let mut entries = vec![0u64; len];
        for slot in entries.iter_mut().rev() {
            *slot = (index % d) as u64;
            index /= d;
        }
        ModVector { modulus, entries }
    }

    pub fn to_index(&self) -> usize {
        let d = self.modulus.get() as usize;
        self.entries.iter().fold(0, |acc, &x| acc * d + x as usize)
    }

    #[inline]
    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    #[inline]
    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize) -> u64 {
        self.entries[i]
    }

    pub fn set(&mut self, i: usize, value: u64) {
        self.entries[i] = self.modulus.reduce(value);
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&x| x == 0)
    }

    /// Greatest divisor `d | D` with `(D/d)·v = 0`.
    pub fn gcd(&self) -> u64 {
        gcd_d(&self.entries, self.modulus)
    }

    pub fn dot(&self, other: &ModVector) -> u64 {
        debug_assert_eq!(self.len(), other.len());
        let m = self.modulus;
        self.entries
            .iter()
            .zip(&other.entries)
            .fold(0, |acc, (&a, &b)| m.add(acc, m.mul(a, b)))
    }

    pub fn add(&self, other: &ModVector) -> ModVector {
        let m = self.modulus;
        ModVector {
            modulus: m,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| m.add(a, b))
                .collect(),
        }
    }

    pub fn sub(&self, other: &ModVector) -> ModVector {
        self.add(&other.scale(self.modulus.neg(1)))
    }

    pub fn scale(&self, c: u64) -> ModVector {
        let m = self.modulus;
        let c = m.reduce(c);
        ModVector {
            modulus: m,
            entries: self.entries.iter().map(|&a| m.mul(a, c)).collect(),
        }
    }

    /// `self += c·other`.
    pub fn add_scaled(&mut self, other: &ModVector, c: u64) {
        let m = self.modulus;
        let c = m.reduce(c);
        for (a, &b) in self.entries.iter_mut().zip(&other.entries) {
            *a = m.add(*a, m.mul(b, c));
        }
    }

    pub fn concat(&self, other: &ModVector) -> ModVector {
        let mut entries = self.entries.clone();
        entries.extend_from_slice(&other.entries);
        ModVector {
            modulus: self.modulus,
            entries,
        }
    }
}

impl fmt::Display for ModVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, x) in self.entries.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

/// Iterates over all of Z_D^len in index order.
#[derive(Debug, Clone)]
pub struct AllVectors {
    modulus: Modulus,
    len: usize,
    next: usize,
    total: usize,
}

impl AllVectors {
    pub fn new(modulus: Modulus, len: usize) -> Self {
        let total = (modulus.get() as usize).pow(len as u32);
        AllVectors {
            modulus,
            len,
            next: 0,
            total,
        }
    }
}

impl Iterator for AllVectors {
    type Item = ModVector;

    fn next(&mut self) -> Option<ModVector> {
        if self.next >= self.total {
            return None;
        }
        let v = ModVector::from_index(self.modulus, self.len, self.next);
        self.next += 1;
        Some(v)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.total - self.next;
        (left, Some(left))
    }
}

impl ExactSizeIterator for AllVectors {}

/// A dense `rows × cols` matrix over Z_D, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModMatrix {
    modulus: Modulus,
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl ModMatrix {
    pub fn zeros(modulus: Modulus, rows: usize, cols: usize) -> Self {
        ModMatrix {
            modulus,
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(modulus: Modulus, n: usize) -> Self {
        let mut m = Self::zeros(modulus, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    pub fn from_fn(
        modulus: Modulus,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> i64,
    ) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(modulus.reduce_signed(f(i, j)));
            }
        }
        ModMatrix {
            modulus,
            rows,
            cols,
            data,
        }
    }

    /// Stacks vectors as rows; `cols` is needed for the empty case.
    pub fn from_rows(modulus: Modulus, cols: usize, rows: &[ModVector]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols || r.modulus() != modulus {
                return Err(invalid(format!(
                    "row {r} does not live in Z_{modulus}^{cols}"
                )));
            }
            data.extend_from_slice(r.entries());
        }
        Ok(ModMatrix {
            modulus,
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Stacks vectors as columns.
    pub fn from_columns(modulus: Modulus, rows: usize, cols: &[ModVector]) -> Result<Self> {
        Ok(Self::from_rows(modulus, rows, cols)?.transpose())
    }

    #[inline]
    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: u64) {
        self.data[i * self.cols + j] = self.modulus.reduce(value);
    }

    pub fn row(&self, i: usize) -> ModVector {
        ModVector {
            modulus: self.modulus,
            entries: self.data[i * self.cols..(i + 1) * self.cols].to_vec(),
        }
    }

    pub fn column(&self, j: usize) -> ModVector {
        ModVector {
            modulus: self.modulus,
            entries: (0..self.rows).map(|i| self.get(i, j)).collect(),
        }
    }

    pub fn row_vectors(&self) -> Vec<ModVector> {
        (0..self.rows).map(|i| self.row(i)).collect()
    }

    pub fn column_vectors(&self) -> Vec<ModVector> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn transpose(&self) -> ModMatrix {
        let mut t = ModMatrix::zeros(self.modulus, self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    pub fn neg(&self) -> ModMatrix {
        let m = self.modulus;
        ModMatrix {
            data: self.data.iter().map(|&x| m.neg(x)).collect(),
            ..self.clone()
        }
    }

    pub fn mul(&self, other: &ModMatrix) -> ModMatrix {
        assert_eq!(self.cols, other.rows, "matrix shapes do not compose");
        let m = self.modulus;
        let big_d = m.get();
        let mut out = ModMatrix::zeros(m, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let idx = i * other.cols + j;
                    out.data[idx] = (out.data[idx] + a * other.get(k, j)) % big_d;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &ModVector) -> ModVector {
        assert_eq!(self.cols, v.len(), "matrix and vector shapes differ");
        let big_d = self.modulus.get();
        let entries = (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v.entries())
                    .fold(0, |acc, (&a, &b)| (acc + a * b) % big_d)
            })
            .collect();
        ModVector {
            modulus: self.modulus,
            entries,
        }
    }

    /// Applies the matrix to raw residues; used on hot paths that avoid allocation.
    pub(crate) fn mul_slice_into(&self, v: &[u64], out: &mut [u64]) {
        let big_d = self.modulus.get();
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = self.data[i * self.cols..(i + 1) * self.cols]
                .iter()
                .zip(v)
                .fold(0, |acc, (&a, &b)| (acc + a * b) % big_d);
        }
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_identity(&self) -> bool {
        self.is_square() && *self == ModMatrix::identity(self.modulus, self.rows)
    }

    /// Inverse of a square matrix, if it exists.
    pub fn inverse(&self) -> Option<ModMatrix> {
        if !self.is_square() {
            return None;
        }
        let dec = decompose(self);
        let n = self.rows;
        let mut c_inv = ModMatrix::zeros(self.modulus, n, n);
        for i in 0..n {
            c_inv.set(i, i, self.modulus.inverse(dec.c.get(i, i))?);
        }
        // M = A⁻¹ C B⁻¹  =>  M⁻¹ = B C⁻¹ A
        Some(dec.b.mul(&c_inv).mul(&dec.a))
    }

    // Elementary operations used by elimination.

    pub(crate) fn row_add(&mut self, target: usize, source: usize, c: u64) {
        let m = self.modulus;
        let c = m.reduce(c);
        if c == 0 {
            return;
        }
        for j in 0..self.cols {
            let v = m.add(self.get(target, j), m.mul(c, self.get(source, j)));
            self.data[target * self.cols + j] = v;
        }
    }

    pub(crate) fn col_add(&mut self, target: usize, source: usize, c: u64) {
        let m = self.modulus;
        let c = m.reduce(c);
        if c == 0 {
            return;
        }
        for i in 0..self.rows {
            let v = m.add(self.get(i, target), m.mul(c, self.get(i, source)));
            self.data[i * self.cols + target] = v;
        }
    }

    pub(crate) fn row_swap(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub(crate) fn col_swap(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    pub(crate) fn row_scale(&mut self, i: usize, c: u64) {
        let m = self.modulus;
        for j in 0..self.cols {
            let v = m.mul(self.get(i, j), c);
            self.data[i * self.cols + j] = v;
        }
    }

    pub(crate) fn col_scale(&mut self, j: usize, c: u64) {
        let m = self.modulus;
        for i in 0..self.rows {
            let v = m.mul(self.get(i, j), c);
            self.data[i * self.cols + j] = v;
        }
    }
}

impl fmt::Display for ModMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            writeln!(f, "{}", self.row(i))?;
        }
        Ok(())
    }
}
