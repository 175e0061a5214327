use std::fmt;

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, ToPrimitive};

use super::STEP_ENUMERATION_CAP;
use crate::error::{invalid, Error, Result};
use crate::modlinalg::{decompose, AllVectors, ModMatrix, ModVector, Subspace};
use crate::ring::{gcd, Modulus};

/// `χ(x) = Σ_s λ_s x^s`, where `λ_s` counts the elements of `V_M` with
/// exactly `s` nonzero pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChiPolynomial {
    modulus: Modulus,
    n: usize,
    m: usize,
    coeffs: Vec<u64>,
}

impl ChiPolynomial {
    /// Checks `λ_0 = 1` and `Σ λ_s = D^{n−m}`.
    pub fn new(modulus: Modulus, n: usize, m: usize, coeffs: Vec<u64>) -> Result<Self> {
        if m == 0 || m >= n {
            return Err(invalid(format!("need 1 <= m < n, got n={n}, m={m}")));
        }
        if coeffs.len() != n + 1 {
            return Err(invalid(format!("expected {} coefficients, got {}", n + 1, coeffs.len())));
        }
        if coeffs[0] != 1 {
            return Err(invalid(format!("constant coefficient is {}, not 1", coeffs[0])));
        }
        let total: u128 = coeffs.iter().map(|&c| c as u128).sum();
        let expected = (modulus.get() as u128).pow((n - m) as u32);
        if total != expected {
            return Err(invalid(format!("coefficients sum to {total}, expected D^(n-m) = {expected}")));
        }
        Ok(ChiPolynomial { modulus, n, m, coeffs })
    }

    /// `χ` of the identity permutation: `(1 + (D−1)x)^{n−m}`.
    pub fn identity(modulus: Modulus, n: usize, m: usize) -> Result<Self> {
        if m == 0 || m >= n {
            return Err(invalid(format!("need 1 <= m < n, got n={n}, m={m}")));
        }
        let k = n - m;
        let d1 = modulus.get() - 1;
        let mut coeffs = vec![0u64; n + 1];
        let mut binom = 1u64;
        for (s, c) in coeffs.iter_mut().enumerate().take(k + 1) {
            *c = binom * d1.pow(s as u32);
            binom = binom * (k - s) as u64 / (s + 1) as u64;
        }
        Self::new(modulus, n, m, coeffs)
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn eval<T: Num + Clone + FromPrimitive>(&self, x: T) -> T {
        self.coeffs.iter().rev().fold(T::zero(), |acc, &c| {
            acc * x.clone() + T::from_u64(c).expect("coefficient fits")
        })
    }

    pub fn derivative<T: Num + Clone + FromPrimitive>(&self, x: T) -> T {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(T::zero(), |acc, (s, &c)| {
                acc * x.clone() + T::from_u64(c * s as u64).expect("coefficient fits")
            })
    }
}

impl fmt::Display for ChiPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (s, &c) in self.coeffs.iter().enumerate() {
            if c == 0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match s {
                0 => write!(f, "{c}")?,
                1 if c == 1 => write!(f, "x")?,
                1 => write!(f, "{c}x")?,
                _ if c == 1 => write!(f, "x^{s}")?,
                _ => write!(f, "{c}x^{s}")?,
            }
        }
        Ok(())
    }
}

/// Counts, for each `s`, the coefficient tuples whose combination of the
/// basis has exactly `s` nonzero pairs.
pub(crate) fn block_counts(basis: &[ModVector], modulus: Modulus, n: usize) -> Result<Vec<u64>> {
    let needed = (modulus.get() as u128).saturating_pow(basis.len() as u32);
    if needed > STEP_ENUMERATION_CAP {
        return Err(Error::ResourceCap {
            what: "V_M enumeration",
            needed,
            cap: STEP_ENUMERATION_CAP,
        });
    }
    let mut counts = vec![0u64; n + 1];
    let mut x = vec![0u64; 2 * n];
    for c in AllVectors::new(modulus, basis.len()) {
        x.iter_mut().for_each(|e| *e = 0);
        for (&ci, b) in c.entries().iter().zip(basis) {
            if ci != 0 {
                for (e, &be) in x.iter_mut().zip(b.entries()) {
                    *e = modulus.add(*e, modulus.mul(ci, be));
                }
            }
        }
        let nonzero = (0..n).filter(|&r| x[r] != 0 || x[n + r] != 0).count();
        counts[nonzero] += 1;
    }
    Ok(counts)
}

/// `χ` of a step's `V_M`, by enumerating the subspace.
pub fn chi_from_vm(vm: &Subspace) -> Result<ChiPolynomial> {
    let (n, m) = vm_shape(vm)?;
    let counts = block_counts(vm.basis(), vm.modulus(), n)?;
    ChiPolynomial::new(vm.modulus(), n, m, counts)
}

fn vm_shape(vm: &Subspace) -> Result<(usize, usize)> {
    let ambient = vm.ambient();
    if !ambient.is_multiple_of(2) || vm.dim() == 0 || vm.dim() >= ambient / 2 {
        return Err(invalid(format!(
            "V_M of dimension {} in Z_D^{ambient} does not describe a step",
            vm.dim()
        )));
    }
    Ok((ambient / 2, ambient / 2 - vm.dim()))
}

/// `χ` from the per-pair sets `V_r`, without enumerating `V_M`.
///
/// `V_r` is spanned by the two columns of the basis matrix belonging to pair
/// `r`. A coefficient tuple zeroes pair `r` exactly when it is orthogonal to
/// `V_r`, so inclusion-exclusion over pair sets gives every `λ_s`. Returns
/// `None` when some `V_r` is not a free submodule.
pub fn chi_fast(vm: &Subspace) -> Result<Option<ChiPolynomial>> {
    let (n, m) = vm_shape(vm)?;
    if n > 20 {
        return Err(Error::ResourceCap {
            what: "pair subsets",
            needed: 1u128 << n,
            cap: 1 << 20,
        });
    }
    let modulus = vm.modulus();
    let k = vm.dim();
    let basis = ModMatrix::from_rows(modulus, 2 * n, vm.basis())?;
    let pair_columns = |r: usize| [basis.column(r), basis.column(n + r)];
    for r in 0..n {
        if Subspace::from_generators(modulus, k, &pair_columns(r))?.is_none() {
            return Ok(None);
        }
    }
    let d = modulus.get() as u128;
    let total = d.pow(k as u32);
    // zeroed[T] = #{c : every pair in T is zero} = D^k / |Σ_{r∈T} V_r|
    let mut lambda = vec![0i128; n + 1];
    for set in 0u32..(1 << n) {
        let cols: Vec<ModVector> = (0..n)
            .filter(|r| set >> r & 1 == 1)
            .flat_map(pair_columns)
            .collect();
        let zeroed = total / span_size(modulus, k, &cols)?;
        let t = set.count_ones() as usize;
        // Möbius inversion: exact[Z] = Σ_{T ⊇ Z} (−1)^{|T|−|Z|} zeroed[T]
        for z in 0..=t {
            let ways = binomial(t, z) as i128;
            let sign = if (t - z).is_multiple_of(2) { 1 } else { -1 };
            lambda[n - z] += sign * ways * zeroed as i128;
        }
    }
    let coeffs = lambda
        .into_iter()
        .map(|l| u64::try_from(l).map_err(|_| Error::Numerical(format!("negative count {l}"))))
        .collect::<Result<Vec<_>>>()?;
    ChiPolynomial::new(modulus, n, m, coeffs).map(Some)
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Number of elements spanned by `cols` in `Z_D^k`.
fn span_size(modulus: Modulus, k: usize, cols: &[ModVector]) -> Result<u128> {
    if cols.is_empty() {
        return Ok(1);
    }
    let m = ModMatrix::from_columns(modulus, k, cols)?;
    let d = modulus.get();
    Ok(decompose(&m)
        .diagonal()
        .into_iter()
        .map(|c| (d / gcd(c, d)) as u128)
        .product())
}

/// Joint fidelity and success probability of a twirled isotropic input.
pub fn twirl_recursion(f: f64, chi: &ChiPolynomial) -> Result<(f64, f64)> {
    if !(f > 0.0 && f <= 1.0) {
        return Err(invalid(format!("fidelity {f} outside (0, 1]")));
    }
    Ok(twirl_recursion_in(f, chi))
}

/// [`twirl_recursion`] over any field-like number type, without validation.
///
/// `F' = D^{n−m} Fⁿ χ(c₁)/χ(c₂)` and `P = D^{m−n} χ(c₂)` with
/// `c₁ = (1−F)/(F(D²−1))` and `c₂ = (D²F−1)/(D²−1)`.
pub fn twirl_recursion_in<T: Num + Clone + FromPrimitive>(f: T, chi: &ChiPolynomial) -> (T, T) {
    let d = T::from_u64(chi.modulus.get()).expect("D fits");
    let d2m1 = d.clone() * d.clone() - T::one();
    let c1 = (T::one() - f.clone()) / (f.clone() * d2m1.clone());
    let c2 = (d.clone() * d.clone() * f.clone() - T::one()) / d2m1;
    let scale = pow(d, chi.n - chi.m);
    let chi2 = chi.eval(c2);
    let fidelity = scale.clone() * pow(f, chi.n) * chi.eval(c1) / chi2.clone();
    (fidelity, chi2 / scale)
}

fn pow<T: Num + Clone>(x: T, k: usize) -> T {
    (0..k).fold(T::one(), |acc, _| acc * x.clone())
}

/// Slope `F₁` at `F = 1/D`, success probability `P₀` there, and `η`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerformanceReport {
    pub f1: f64,
    pub p0: f64,
    pub eta: f64,
}

/// Exact `F₁` and `P₀` for an `m = 1` polynomial.
pub fn performance_exact(chi: &ChiPolynomial) -> Result<(Ratio<i128>, Ratio<i128>)> {
    if chi.m != 1 {
        return Err(invalid(format!("performance needs m = 1, got m = {}", chi.m)));
    }
    let d = chi.modulus.get() as i128;
    let x0 = Ratio::new(1, d + 1);
    let value = chi.eval(x0);
    let slope = chi.derivative(x0);
    let f1 = Ratio::from_integer(chi.n as i128) - Ratio::new(2 * d, d * d - 1) * slope / value;
    let p0 = value / Ratio::from_integer(d).pow(chi.n as i32 - 1);
    Ok((f1, p0))
}

/// `η = exp((ln P₀ − ln n)/ln F₁)`; needs `F₁ > 1`.
pub fn performance(chi: &ChiPolynomial) -> Result<PerformanceReport> {
    let (f1, p0) = performance_exact(chi)?;
    let to_f64 = |r: Ratio<i128>| r.to_f64().expect("small rational");
    let (f1, p0) = (to_f64(f1), to_f64(p0));
    if f1 <= 1.0 {
        return Err(Error::ProtocolMeaningless(f1));
    }
    let eta = ((p0.ln() - (chi.n as f64).ln()) / f1.ln()).exp();
    Ok(PerformanceReport { f1, p0, eta })
}
