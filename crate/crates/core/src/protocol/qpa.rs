use num_traits::Num;

use super::MIN_PROBABILITY;
use crate::error::{invalid, Error, Result};
use crate::states::BellDiagonalState;

/// One round of the generalized privacy-amplification protocol on two
/// copies of a single-pair state.
///
/// `p'_{ij} ∝ Σ_k p_{i+k, −i−j−k} p_{k, j−k}`; the normalization is the
/// success probability.
pub fn qpa_step(s: &BellDiagonalState) -> Result<(BellDiagonalState, f64)> {
    if s.pairs() != 1 {
        return Err(invalid(format!("QPA acts on single-pair states, got {} pairs", s.pairs())));
    }
    let d = s.modulus().get() as usize;
    let (weights, p) = qpa_step_in(s.probs(), d);
    if p < MIN_PROBABILITY {
        return Err(Error::MeasurementImpossible(p));
    }
    Ok((BellDiagonalState::from_weights(s.modulus(), 1, weights)?, p))
}

/// Unnormalized QPA weights over any number type, and their sum.
///
/// `p` is indexed as `p[a·D + b]`.
pub fn qpa_step_in<T: Num + Clone>(p: &[T], d: usize) -> (Vec<T>, T) {
    assert_eq!(p.len(), d * d, "expected a single-pair distribution");
    let at = |a: usize, b: usize| p[(a % d) * d + b % d].clone();
    let mut out = Vec::with_capacity(d * d);
    let mut total = T::zero();
    for i in 0..d {
        for j in 0..d {
            let mut acc = T::zero();
            for k in 0..d {
                // −i−j−k and j−k, kept nonnegative before reduction
                let b1 = 3 * d - i - j - k;
                acc = acc + at(i + k, b1) * at(k, d + j - k);
            }
            total = total + acc.clone();
            out.push(acc);
        }
    }
    (out, total)
}
