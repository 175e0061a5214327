use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::MIN_PROBABILITY;
use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::ring::Modulus;
use crate::states::BellDiagonalState;
use crate::symplectic::{enumerate, SymplecticElement};

type Candidates = Arc<Vec<(SymplecticElement, Vec<usize>)>>;

/// All of `P_S(D, 1)` in enumeration order, with their index permutations.
pub fn greedy_candidates(modulus: Modulus) -> Result<Candidates> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Candidates>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(c) = cache.lock().expect("cache lock").get(&modulus.get()) {
        return Ok(c.clone());
    }
    let list: Candidates = Arc::new(
        enumerate(modulus, 1)?
            .map(|g| {
                let perm = g.index_permutation();
                (g, perm)
            })
            .collect(),
    );
    cache.lock().expect("cache lock").insert(modulus.get(), list.clone());
    Ok(list)
}

/// The two-to-one round with `p_⊕¹²` on the product of two single-pair states.
///
/// `p'_{a,b} ∝ Σ_k p_{a−k, b} q_{k, b}`, normalized by
/// `P = Σ_b (Σ_i p_{i,b})(Σ_i q_{i,b})`.
pub fn pair_step(p: &BellDiagonalState, q: &BellDiagonalState) -> Result<(BellDiagonalState, f64)> {
    if p.pairs() != 1 || q.pairs() != 1 || p.modulus() != q.modulus() {
        return Err(invalid("pair_step needs two single-pair states with the same D"));
    }
    let d = p.modulus().get() as usize;
    let (pp, qq) = (p.probs(), q.probs());
    let mut weights = vec![0.0; d * d];
    for a in 0..d {
        for b in 0..d {
            weights[a * d + b] = (0..d).map(|k| pp[((a + d - k) % d) * d + b] * qq[k * d + b]).sum();
        }
    }
    let total: f64 = weights.iter().sum();
    if total < MIN_PROBABILITY {
        return Err(Error::MeasurementImpossible(total));
    }
    Ok((BellDiagonalState::from_weights(p.modulus(), 1, weights)?, total))
}

/// Output fidelity of [`pair_step`] on two copies of `p`, or `None` when the
/// round cannot succeed.
fn copy_fidelity(p: &[f64], d: usize) -> Option<f64> {
    let numerator: f64 = (0..d).map(|k| p[((d - k) % d) * d] * p[k * d]).sum();
    let total: f64 = (0..d)
        .map(|b| {
            let column: f64 = (0..d).map(|i| p[i * d + b]).sum();
            column * column
        })
        .sum();
    (total >= MIN_PROBABILITY).then(|| numerator / total)
}

/// Applies every element of `P_S(D, 1)` to both pairs, runs the fixed
/// two-to-one round, and keeps the best output fidelity.
///
/// Ties go to the element that comes first in enumeration order.
pub fn greedy_step(s: &BellDiagonalState) -> Result<(BellDiagonalState, f64, SymplecticElement)> {
    greedy_step_with(Execution::default(), s)
}

/// [`greedy_step`] with an explicit execution mode.
pub fn greedy_step_with(
    exec: Execution,
    s: &BellDiagonalState,
) -> Result<(BellDiagonalState, f64, SymplecticElement)> {
    if s.pairs() != 1 {
        return Err(invalid(format!("greedy search acts on single-pair states, got {} pairs", s.pairs())));
    }
    let d = s.modulus().get() as usize;
    let candidates = greedy_candidates(s.modulus())?;
    let probs = s.probs();
    let permuted = |perm: &[usize]| {
        let mut out = vec![0.0; probs.len()];
        for (idx, &target) in perm.iter().enumerate() {
            out[target] = probs[idx];
        }
        out
    };
    let scores = exec.map_slice(&candidates, |(_, perm)| copy_fidelity(&permuted(perm), d));
    let mut best: Option<(usize, f64)> = None;
    for (i, score) in scores.into_iter().enumerate() {
        if let Some(f) = score {
            if best.is_none_or(|(_, b)| f > b) {
                best = Some((i, f));
            }
        }
    }
    let (i, _) = best.ok_or(Error::MeasurementImpossible(0.0))?;
    let (g, perm) = &candidates[i];
    let state = BellDiagonalState::from_weights(s.modulus(), 1, permuted(perm))?;
    let (out, p) = pair_step(&state, &state)?;
    Ok((out, p, g.clone()))
}
