use super::elimination::{decompose, rank_of_diagonal};
use super::{is_linearly_independent, AllVectors, ModMatrix, ModVector};
use crate::error::{invalid, precondition, Error, Result};
use crate::ring::Modulus;
use std::collections::HashSet;

/// Default bound on the number of vectors a span enumeration may produce.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 24;

fn span_size(modulus: Modulus, dim: usize) -> u128 {
    (modulus.get() as u128).saturating_pow(dim as u32)
}

fn check_cap(needed: u128, cap: u128) -> Result<()> {
    if needed > cap {
        return Err(Error::ResourceCap {
            what: "span enumeration",
            needed,
            cap,
        });
    }
    Ok(())
}

/// `Lin(basis)` for a linearly independent basis.
#[derive(Debug, Clone)]
pub struct Subspace {
    modulus: Modulus,
    ambient: usize,
    basis: Vec<ModVector>,
    // A·basis·B = C with unit diagonal; cached for coordinate solves
    a: ModMatrix,
    b: ModMatrix,
    diag_inv: Vec<u64>,
}

impl PartialEq for Subspace {
    fn eq(&self, other: &Self) -> bool {
        self.same_span(other)
    }
}

impl Subspace {
    pub fn new(modulus: Modulus, ambient: usize, basis: Vec<ModVector>) -> Result<Self> {
        if let Some(v) = basis.iter().find(|v| v.len() != ambient || v.modulus() != modulus) {
            return Err(invalid(format!(
                "basis vector {v} does not live in Z_{modulus}^{ambient}"
            )));
        }
        if basis.len() > ambient {
            return Err(precondition("more basis vectors than the ambient dimension"));
        }
        let mat = ModMatrix::from_rows(modulus, ambient, &basis)?;
        let dec = decompose(&mat);
        let diag = dec.diagonal();
        if rank_of_diagonal(&diag, modulus) != basis.len() {
            return Err(precondition("subspace basis is not linearly independent"));
        }
        let diag_inv = diag
            .iter()
            .map(|&c| modulus.inverse(c).expect("independent rows give a unit diagonal"))
            .collect();
        Ok(Subspace {
            modulus,
            ambient,
            basis,
            a: dec.a,
            b: dec.b,
            diag_inv,
        })
    }

    pub fn zero(modulus: Modulus, ambient: usize) -> Self {
        Subspace::new(modulus, ambient, Vec::new()).expect("empty basis is independent")
    }

    pub fn full(modulus: Modulus, ambient: usize) -> Self {
        let basis = (0..ambient).map(|k| ModVector::unit(modulus, ambient, k)).collect();
        Subspace::new(modulus, ambient, basis).expect("unit vectors are independent")
    }

    /// Returns `Lin(generators)` if that set is a subspace, `None` otherwise.
    ///
    /// For composite `D` a span need not be free (e.g. `Lin{(0,2)}` mod 4).
    /// It is free of rank `r` exactly when it holds `D^r` elements, where `r`
    /// is the rank of the generator matrix.
    pub fn from_generators(
        modulus: Modulus,
        ambient: usize,
        generators: &[ModVector],
    ) -> Result<Option<Self>> {
        if generators.is_empty() {
            return Ok(Some(Subspace::zero(modulus, ambient)));
        }
        let mat = ModMatrix::from_rows(modulus, ambient, generators)?;
        let diag = decompose(&mat).diagonal();
        let r = rank_of_diagonal(&diag, modulus);
        let size: u128 = diag
            .iter()
            .map(|&c| (modulus.get() / modulus.ideal_generator(c)) as u128)
            .product();
        if size != span_size(modulus, r) {
            return Ok(None);
        }
        let mut basis: Vec<ModVector> = Vec::with_capacity(r);
        let try_add = |v: &ModVector, basis: &mut Vec<ModVector>| -> Result<()> {
            if basis.len() < r {
                basis.push(v.clone());
                if !is_linearly_independent(basis)? {
                    basis.pop();
                }
            }
            Ok(())
        };
        for g in generators {
            try_add(g, &mut basis)?;
        }
        if basis.len() < r {
            // generators like (2,0),(0,3) mod 6 span a free module without
            // containing a basis of it; greedy over the whole span succeeds
            for v in span_of_generators(generators, DEFAULT_ENUMERATION_CAP)? {
                try_add(&v, &mut basis)?;
            }
        }
        Subspace::new(modulus, ambient, basis).map(Some)
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[ModVector] {
        &self.basis
    }

    /// Number of elements, `D^dim`.
    pub fn cardinality(&self) -> u128 {
        span_size(self.modulus, self.dim())
    }

    /// The unique coefficients `c` with `Σ c_i basis_i = v`, if `v` is in the span.
    pub fn coordinates(&self, v: &ModVector) -> Option<Vec<u64>> {
        if v.len() != self.ambient {
            return None;
        }
        let m = self.modulus;
        let k = self.dim();
        // c·basis = v  <=>  (c·A⁻¹)·C = v·B
        let vb: Vec<u64> = (0..self.ambient)
            .map(|j| (0..self.ambient).fold(0, |acc, i| m.add(acc, m.mul(v.get(i), self.b.get(i, j)))))
            .collect();
        if vb[k..].iter().any(|&x| x != 0) {
            return None;
        }
        let w: Vec<u64> = (0..k).map(|j| m.mul(vb[j], self.diag_inv[j])).collect();
        Some(
            (0..k)
                .map(|j| (0..k).fold(0, |acc, i| m.add(acc, m.mul(w[i], self.a.get(i, j)))))
                .collect(),
        )
    }

    pub fn contains(&self, v: &ModVector) -> bool {
        self.coordinates(v).is_some()
    }

    pub fn same_span(&self, other: &Subspace) -> bool {
        self.modulus == other.modulus
            && self.ambient == other.ambient
            && self.dim() == other.dim()
            && other.basis.iter().all(|v| self.contains(v))
    }

    /// Linear combination of the basis with the given coefficients.
    pub fn combine(&self, coefficients: &[u64]) -> ModVector {
        let mut acc = ModVector::zeros(self.modulus, self.ambient);
        for (c, v) in coefficients.iter().zip(&self.basis) {
            acc.add_scaled(v, *c);
        }
        acc
    }

    /// All elements of the span, with the default cap.
    pub fn span(&self) -> Result<SpanIter<'_>> {
        self.span_with_cap(DEFAULT_ENUMERATION_CAP)
    }

    /// All elements of the span, each exactly once, in coefficient index order.
    pub fn span_with_cap(&self, cap: u128) -> Result<SpanIter<'_>> {
        check_cap(self.cardinality(), cap)?;
        Ok(SpanIter {
            space: self,
            coefficients: AllVectors::new(self.modulus, self.dim()),
        })
    }

    /// `{x : x·v = 0 for all v in self}`.
    pub fn orthogonal_complement(&self) -> Subspace {
        // basis·x = 0  <=>  C·B⁻¹x = 0  <=>  x ∈ Lin(columns k.. of B)
        let basis = (self.dim()..self.ambient).map(|j| self.b.column(j)).collect();
        Subspace::new(self.modulus, self.ambient, basis)
            .expect("columns of an invertible matrix are independent")
    }
}

/// Iterator over the elements of a [`Subspace`].
#[derive(Debug, Clone)]
pub struct SpanIter<'a> {
    space: &'a Subspace,
    coefficients: AllVectors,
}

impl Iterator for SpanIter<'_> {
    type Item = ModVector;

    fn next(&mut self) -> Option<ModVector> {
        let c = self.coefficients.next()?;
        Some(self.space.combine(c.entries()))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        self.coefficients.size_hint()
    }
}

impl ExactSizeIterator for SpanIter<'_> {}

/// Distinct elements of `Lin(generators)` for an arbitrary generating list,
/// in first-seen coefficient order.
///
/// The cap bounds the `D^k` coefficient tuples visited.
pub fn span_of_generators(generators: &[ModVector], cap: u128) -> Result<Vec<ModVector>> {
    let Some(first) = generators.first() else {
        return Err(invalid("span of an empty generator list has no ambient space"));
    };
    let modulus = first.modulus();
    let len = first.len();
    if generators.iter().any(|g| g.len() != len || g.modulus() != modulus) {
        return Err(invalid("generators of different shapes"));
    }
    check_cap(span_size(modulus, generators.len()), cap)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for coef in AllVectors::new(modulus, generators.len()) {
        let mut acc = ModVector::zeros(modulus, len);
        for (c, g) in coef.entries().iter().zip(generators) {
            acc.add_scaled(g, *c);
        }
        if seen.insert(acc.clone()) {
            out.push(acc);
        }
    }
    Ok(out)
}
