use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use super::chi::{block_counts, chi_from_vm, twirl_recursion, ChiPolynomial};
use super::{measure_step, ProtocolStep};
use crate::error::{invalid, Error, Result};
use crate::modlinalg::{AllVectors, ModVector};
use crate::ring::Modulus;
use crate::states::BellDiagonalState;
use crate::symplectic::{symplectic_product, word_product, Generator, SymplecticElement};

/// Largest number of candidate tuples [`search_vm`] will visit.
pub const SEARCH_CAP: u128 = 1 << 28;

/// Twirling-assisted protocols keeping one pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Builtin {
    /// Two pairs, `χ = 1 + (D−1)x²`.
    N2,
    /// Three pairs, `χ = 1 + (D²−1)x³`; odd `D` only.
    N3Odd,
    /// Three pairs, `χ = 1 + (D−1)x² + (D²−D)x³`.
    N3Even,
    /// Four pairs, `χ = 1 + 4(D−1)x³ + (D³−4D+3)x⁴`.
    N4,
}

impl Builtin {
    pub const ALL: [Builtin; 4] = [Builtin::N2, Builtin::N3Odd, Builtin::N3Even, Builtin::N4];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::N2 => "n2",
            Builtin::N3Odd => "n3-odd",
            Builtin::N3Even => "n3-even",
            Builtin::N4 => "n4",
        }
    }

    pub fn n(self) -> usize {
        match self {
            Builtin::N2 => 2,
            Builtin::N3Odd | Builtin::N3Even => 3,
            Builtin::N4 => 4,
        }
    }

    /// Whether the protocol exists for this `D`.
    pub fn exists_for(self, modulus: Modulus) -> bool {
        self != Builtin::N3Odd || modulus.get() % 2 == 1
    }

    /// The polynomial this protocol is built to realize.
    pub fn target_chi(self, modulus: Modulus) -> Result<ChiPolynomial> {
        let d = modulus.get();
        let coeffs = match self {
            Builtin::N2 => vec![1, 0, d - 1],
            Builtin::N3Odd => vec![1, 0, 0, d * d - 1],
            Builtin::N3Even => vec![1, 0, d - 1, d * d - d],
            Builtin::N4 => vec![1, 0, 0, 4 * (d - 1), d * d * d + 3 - 4 * d],
        };
        ChiPolynomial::new(modulus, self.n(), 1, coeffs)
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Builtin::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| invalid(format!("unknown protocol '{s}'")))
    }
}

type Cache = Mutex<HashMap<(Builtin, u64), ProtocolStep>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// The step realizing a builtin protocol for `D`, built once and cached.
pub fn builtin_protocol(builtin: Builtin, modulus: Modulus) -> Result<ProtocolStep> {
    let key = (builtin, modulus.get());
    if let Some(step) = cache().lock().expect("cache lock").get(&key) {
        return Ok(step.clone());
    }
    let step = build(builtin, modulus)?;
    cache().lock().expect("cache lock").insert(key, step.clone());
    Ok(step)
}

fn build(builtin: Builtin, modulus: Modulus) -> Result<ProtocolStep> {
    let target = builtin.target_chi(modulus)?;
    let n = builtin.n();
    let basis = match builtin {
        Builtin::N2 => search_vm(modulus, 2, 1, &target)?,
        Builtin::N3Odd => n3_odd_basis(modulus)?,
        Builtin::N3Even => Some(vec![
            ModVector::from_signed(modulus, &[1, 1, 1, 0, 0, 0]),
            ModVector::from_signed(modulus, &[0, 0, 0, 1, -1, 0]),
        ]),
        Builtin::N4 => Some(vec![
            ModVector::from_signed(modulus, &[1, 0, 0, 1, 0, 1, 0, 0]),
            ModVector::from_signed(modulus, &[0, 1, 0, 0, 1, 0, 1, 0]),
            ModVector::from_signed(modulus, &[1, 1, -1, 0, 0, 0, 0, 1]),
        ]),
    };
    let basis = basis.ok_or_else(|| Error::Nonexistence(format!("no V_M realizes {target} for D={modulus}")))?;
    let step = ProtocolStep::from_vm_basis(modulus, n, 1, basis)?;
    let chi = chi_from_vm(&step.vm())?;
    if chi != target {
        return Err(Error::Nonexistence(format!(
            "{builtin} basis gives {chi} instead of {target} for D={modulus}"
        )));
    }
    Ok(step)
}

/// Three pairs with every nonzero element of `V_M` nonzero on all pairs.
///
/// Write the pair-`r` components of the two basis vectors as a 2×2 block
/// `B_r`. All pairs stay nonzero iff every `det B_r` is a unit, and the two
/// vectors are orthogonal iff `Σ det B_r = 0`. Three units cannot sum to
/// zero when `D` is even. Otherwise a change of basis makes `B_1 = I` and
/// the remaining blocks are searched in index order.
fn n3_odd_basis(modulus: Modulus) -> Result<Option<Vec<ModVector>>> {
    if modulus.get().is_multiple_of(2) {
        return Err(Error::Nonexistence(format!(
            "three units never sum to zero mod {modulus}, so n3-odd does not exist"
        )));
    }
    Ok(n3_block_search(modulus))
}

fn det(modulus: Modulus, b: &[u64]) -> u64 {
    modulus.sub(modulus.mul(b[0], b[3]), modulus.mul(b[1], b[2]))
}

/// Exhaustive normalized block search; `None` when no blocks qualify.
pub(crate) fn n3_block_search(modulus: Modulus) -> Option<Vec<ModVector>> {
    for b2 in AllVectors::new(modulus, 4) {
        let d2 = det(modulus, b2.entries());
        if !modulus.is_unit(d2) {
            continue;
        }
        let needed = modulus.neg(modulus.add(1, d2));
        if !modulus.is_unit(needed) {
            continue;
        }
        let Some(b3) = AllVectors::new(modulus, 4).find(|b| det(modulus, b.entries()) == needed) else {
            continue;
        };
        let (b2, b3) = (b2.entries(), b3.entries());
        return Some(vec![
            ModVector::new(modulus, [1, b2[0], b3[0], 0, b2[1], b3[1]]),
            ModVector::new(modulus, [0, b2[2], b3[2], 1, b2[3], b3[3]]),
        ]);
    }
    None
}

/// First basis of `n − m` vectors, in index order, whose span is a valid
/// `V_M` with the given polynomial.
///
/// Candidates are strictly increasing tuples of pairwise orthogonal vectors
/// of `Z_D^{2n}`; the polynomial check also rejects dependent tuples, since
/// those give `λ_0 > 1`.
pub fn search_vm(modulus: Modulus, n: usize, m: usize, target: &ChiPolynomial) -> Result<Option<Vec<ModVector>>> {
    if m == 0 || m >= n {
        return Err(invalid(format!("need 1 <= m < n, got n={n}, m={m}")));
    }
    if target.n() != n || target.m() != m || target.modulus() != modulus {
        return Err(invalid("target polynomial has a different shape"));
    }
    let k = n - m;
    let space = (modulus.get() as u128).checked_pow(2 * n as u32);
    let needed = space.and_then(|s| s.checked_pow(k as u32)).unwrap_or(u128::MAX);
    if needed > SEARCH_CAP {
        return Err(Error::ResourceCap {
            what: "V_M search",
            needed,
            cap: SEARCH_CAP,
        });
    }
    let space = space.expect("checked above") as usize;
    let mut chosen: Vec<ModVector> = Vec::with_capacity(k);
    let mut next = vec![1usize; k + 1];
    loop {
        let depth = chosen.len();
        if depth == k {
            if block_counts(&chosen, modulus, n)? == target.coeffs() {
                return Ok(Some(chosen));
            }
            chosen.pop();
            continue;
        }
        let start = next[depth];
        let found = (start..space).find_map(|idx| {
            let v = ModVector::from_index(modulus, 2 * n, idx);
            chosen
                .iter()
                .all(|u| symplectic_product(u, &v) == 0)
                .then_some((idx, v))
        });
        match found {
            Some((idx, v)) => {
                next[depth] = idx + 1;
                next[depth + 1] = idx + 1;
                chosen.push(v);
            }
            None if depth == 0 => return Ok(None),
            None => {
                chosen.pop();
            }
        }
    }
}

/// The four-to-two permutation `p_⊕¹³ ∘ p_⊕²⁴ ∘ p_д¹⁴ ∘ p_д²³`.
pub fn n4m2_element(modulus: Modulus) -> Result<SymplecticElement> {
    let word = [
        Generator::Oplus(1, 3),
        Generator::Oplus(2, 4),
        Generator::DoublePlus(1, 4),
        Generator::DoublePlus(2, 3),
    ];
    SymplecticElement::new(word_product(&word, modulus, 4)?, 4)
}

/// One round of the four-to-two protocol on a four-pair state.
pub fn n4m2_step(s: &BellDiagonalState) -> Result<(BellDiagonalState, f64)> {
    if s.pairs() != 4 {
        return Err(invalid(format!("the four-to-two protocol needs 4 pairs, got {}", s.pairs())));
    }
    let step = ProtocolStep::from_element(n4m2_element(s.modulus())?, 2)?;
    measure_step(s, &step)
}

/// Closed form for the fidelity of one kept pair after the four-to-two round
/// on four qubit pairs with isotropic fidelity `F`, and its success probability.
///
/// `F' = (F⁴/P)(1 + 4c₁² + 4c₁³ + 7c₁⁴)` with `c₁ = (1−F)/(3F)`.
pub fn n4m2_individual_fidelity(f: f64) -> Result<(f64, f64)> {
    let modulus = Modulus::new(2)?;
    let chi = ChiPolynomial::new(modulus, 4, 2, vec![1, 0, 0, 0, 3])?;
    let (_, p) = twirl_recursion(f, &chi)?;
    let c1 = (1.0 - f) / (3.0 * f);
    let poly = 1.0 + c1 * c1 * (4.0 + c1 * (4.0 + 7.0 * c1));
    Ok((f.powi(4) * poly / p, p))
}
