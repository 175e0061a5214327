//! One round of a permutation-based distillation protocol and its analysis.
//!
//! A round applies a symplectic permutation `M` to `n` pairs, measures the
//! last `n − m` pairs in the computational basis and keeps the first `m` when
//! every measured pair agrees. The outcome depends on `M` only through
//! `V_M`, the span of the last `n − m` rows of `M`.

mod builtin;
mod chi;
mod greedy;
mod policy;
mod qpa;

pub use builtin::{
    builtin_protocol, n4m2_element, n4m2_individual_fidelity, n4m2_step, search_vm, Builtin,
};
pub use chi::{
    chi_fast, chi_from_vm, performance, performance_exact, twirl_recursion, twirl_recursion_in,
    ChiPolynomial, PerformanceReport,
};
pub use greedy::{greedy_candidates, greedy_step, greedy_step_with, pair_step};
pub use policy::{distillable, yield_trace, DistillCriteria, Policy, YieldRecord, YieldTrace};
pub use qpa::{qpa_step, qpa_step_in};

use crate::error::{invalid, precondition, Error, Result};
use crate::exec::Execution;
use crate::modlinalg::{ModMatrix, ModVector, Subspace};
use crate::ring::Modulus;
use crate::states::BellDiagonalState;
use crate::symplectic::{complete_canonical_set, omega_apply, SymplecticElement};

/// Smallest success probability treated as a possible outcome.
pub const MIN_PROBABILITY: f64 = 1e-15;

/// Largest `D^{n−m}` (and `D^{n+m}`) sum a step may need.
pub const STEP_ENUMERATION_CAP: u128 = 1 << 24;

/// One distillation round on `n` pairs keeping `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolStep {
    n: usize,
    m: usize,
    vm_basis: Vec<ModVector>,
    element: SymplecticElement,
}

impl ProtocolStep {
    /// Builds a step from a basis of `V_M`, completing it to a full permutation.
    ///
    /// The basis vectors must be independent and pairwise orthogonal under
    /// the symplectic form.
    pub fn from_vm_basis(modulus: Modulus, n: usize, m: usize, basis: Vec<ModVector>) -> Result<Self> {
        if m == 0 || m >= n {
            return Err(invalid(format!("need 1 <= m < n, got n={n}, m={m}")));
        }
        if basis.len() != n - m {
            return Err(invalid(format!("V_M needs {} basis vectors, got {}", n - m, basis.len())));
        }
        // columns n+1..n+(n−m) of Mᵗ are the basis; complete Mᵗ, then move
        // those column pairs to positions m+1..n
        let completed = complete_canonical_set(&[], &basis, n, modulus, None)
            .map_err(|e| match e {
                Error::Precondition(msg) => precondition(format!("invalid V_M basis: {msg}")),
                other => other,
            })?;
        let cols = completed.matrix().column_vectors();
        let k = n - m;
        let reorder = |block: &[ModVector]| -> Vec<ModVector> {
            block[k..].iter().chain(&block[..k]).cloned().collect()
        };
        let mut new_cols = reorder(&cols[..n]);
        new_cols.extend(reorder(&cols[n..]));
        let transposed = ModMatrix::from_columns(modulus, 2 * n, &new_cols)?;
        let element = SymplecticElement::new(transposed.transpose(), n)?;
        Ok(ProtocolStep {
            n,
            m,
            vm_basis: basis,
            element,
        })
    }

    /// Uses a full permutation; `V_M` is spanned by its last `n − m` rows.
    pub fn from_element(element: SymplecticElement, m: usize) -> Result<Self> {
        let n = element.n();
        if m == 0 || m >= n {
            return Err(invalid(format!("need 1 <= m < n, got n={n}, m={m}")));
        }
        let vm_basis = (n + m..2 * n).map(|r| element.matrix().row(r)).collect();
        Ok(ProtocolStep {
            n,
            m,
            vm_basis,
            element,
        })
    }

    pub fn modulus(&self) -> Modulus {
        self.element.modulus()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn vm_basis(&self) -> &[ModVector] {
        &self.vm_basis
    }

    pub fn element(&self) -> &SymplecticElement {
        &self.element
    }

    pub fn vm(&self) -> Subspace {
        Subspace::new(self.modulus(), 2 * self.n, self.vm_basis.clone())
            .expect("rows of a symplectic matrix are independent")
    }

    fn check_state(&self, s: &BellDiagonalState) -> Result<()> {
        if s.pairs() != self.n || s.modulus() != self.modulus() {
            return Err(invalid(format!(
                "step acts on {} pairs with D={}, state has {} pairs with D={}",
                self.n,
                self.modulus(),
                s.pairs(),
                s.modulus()
            )));
        }
        let needed = (self.modulus().get() as u128).saturating_pow((self.n + self.m) as u32);
        if needed > STEP_ENUMERATION_CAP {
            return Err(Error::ResourceCap {
                what: "measurement sum",
                needed,
                cap: STEP_ENUMERATION_CAP,
            });
        }
        Ok(())
    }
}

/// Which formula [`joint_fidelity`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FidelityMode {
    /// `F = (1/P) Σ_{x∈V_M} p_{Ωx}` with `P = Σ_{x∈V_M⊥} p_x`.
    Direct,
    /// The same quantity through the Fourier transform of `p`.
    Fourier,
}

/// State of the kept pairs after a successful round, and the success probability.
pub fn measure_step(s: &BellDiagonalState, step: &ProtocolStep) -> Result<(BellDiagonalState, f64)> {
    measure_step_with(Execution::default(), s, step)
}

/// [`measure_step`] with an explicit execution mode.
///
/// `p'_x = (1/P) Σ_{k ∈ Z_D^{n−m}} p_{M⁻¹(x̄ + k̂)}`, where `x̄` pads `x` with
/// zeros on the measured pairs and `k̂` places `k` on their `i` components.
pub fn measure_step_with(
    exec: Execution,
    s: &BellDiagonalState,
    step: &ProtocolStep,
) -> Result<(BellDiagonalState, f64)> {
    step.check_state(s)?;
    let (n, m) = (step.n, step.m);
    let modulus = step.modulus();
    let d = modulus.get();
    let inv = step.element.inverse().into_matrix();
    // columns of M⁻¹ for the kept coordinates and for the measured i's
    let kept_cols: Vec<ModVector> = (0..m).chain(n..n + m).map(|c| inv.column(c)).collect();
    let measured_cols: Vec<ModVector> = (m..n).map(|c| inv.column(c)).collect();
    let probs = s.probs();
    let out_len = (d as usize).pow(2 * m as u32);
    let weights = exec.map_range(out_len, |xi| {
        let x = ModVector::from_index(modulus, 2 * m, xi);
        let mut y = ModVector::zeros(modulus, 2 * n);
        for (c, col) in x.entries().iter().zip(&kept_cols) {
            y.add_scaled(col, *c);
        }
        // walk k through Z_D^{n−m} like an odometer; adding a column D times
        // returns y to where it was, so each digit change is one addition
        let mut digits = vec![0u64; n - m];
        let mut acc = 0.0;
        loop {
            acc += probs[y.to_index()];
            let mut pos = n - m;
            loop {
                if pos == 0 {
                    return acc;
                }
                pos -= 1;
                y.add_scaled(&measured_cols[pos], 1);
                digits[pos] += 1;
                if digits[pos] < d {
                    break;
                }
                digits[pos] = 0;
            }
        }
    });
    let p: f64 = weights.iter().sum();
    if p < MIN_PROBABILITY {
        return Err(Error::MeasurementImpossible(p));
    }
    Ok((BellDiagonalState::from_weights(modulus, m, weights)?, p))
}

/// Success probability `P = Σ_{x ∈ V_M⊥} p_x`.
pub fn success_probability(s: &BellDiagonalState, step: &ProtocolStep) -> Result<f64> {
    step.check_state(s)?;
    let perp = step.vm().orthogonal_complement();
    Ok(perp.span_with_cap(STEP_ENUMERATION_CAP)?.map(|x| s.prob(&x)).sum())
}

/// Joint fidelity of the kept pairs after a successful round.
pub fn joint_fidelity(s: &BellDiagonalState, step: &ProtocolStep, mode: FidelityMode) -> Result<f64> {
    step.check_state(s)?;
    let vm = step.vm();
    let numerator: f64 = vm
        .span_with_cap(STEP_ENUMERATION_CAP)?
        .map(|x| s.prob(&omega_apply(&x)))
        .sum();
    let p = match mode {
        FidelityMode::Direct => success_probability(s, step)?,
        FidelityMode::Fourier => {
            let f = s.fourier();
            let total: num_complex::Complex64 = vm.span_with_cap(STEP_ENUMERATION_CAP)?.map(|x| f.get(&x)).sum();
            if total.im.abs() > 1e-9 {
                return Err(Error::Numerical(format!("subspace Fourier sum has imaginary part {}", total.im)));
            }
            total.re / vm.cardinality() as f64
        }
    };
    if p < MIN_PROBABILITY {
        return Err(Error::MeasurementImpossible(p));
    }
    Ok(numerator / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modlinalg::AllVectors;
    use crate::symplectic::{random_element, Generator};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m(d: u64) -> Modulus {
        Modulus::new(d).unwrap()
    }

    fn random_state(rng: &mut impl Rng, d: u64, pairs: usize) -> BellDiagonalState {
        let len = (d as usize).pow(2 * pairs as u32);
        let w: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
        BellDiagonalState::from_weights(m(d), pairs, w).unwrap()
    }

    /// Applies `M` to the labels, then keeps outcomes whose measured pairs
    /// have `j = 0` and traces out their `i`.
    fn simulate(s: &BellDiagonalState, el: &SymplecticElement, keep: usize) -> (Vec<f64>, f64) {
        let t = s.apply_permutation(el).unwrap();
        let (n, d) = (s.pairs(), s.modulus().get() as usize);
        let mut out = vec![0.0; d.pow(2 * keep as u32)];
        for z in AllVectors::new(s.modulus(), 2 * n) {
            if (n + keep..2 * n).any(|r| z.get(r) != 0) {
                continue;
            }
            let idx = (0..keep).chain(n..n + keep).fold(0, |acc, r| acc * d + z.get(r) as usize);
            out[idx] += t.prob(&z);
        }
        let p: f64 = out.iter().sum();
        (out.into_iter().map(|w| w / p).collect(), p)
    }

    #[test]
    fn completion_puts_the_basis_in_the_last_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for (d, n, mm) in [(2u64, 2usize, 1usize), (3, 3, 1), (4, 4, 2), (6, 3, 2)] {
            let el = random_element(m(d), n, &mut rng);
            let basis: Vec<ModVector> = (n + mm..2 * n).map(|r| el.matrix().row(r)).collect();
            let step = ProtocolStep::from_vm_basis(m(d), n, mm, basis.clone()).unwrap();
            let rows: Vec<ModVector> = (n + mm..2 * n).map(|r| step.element().matrix().row(r)).collect();
            assert_eq!(rows, basis);
        }
    }

    #[test]
    fn invalid_vm_is_rejected() {
        let d = m(3);
        // (1,0,0,0) and (0,0,1,0) have symplectic product 1
        let basis = vec![ModVector::new(d, [1, 0, 0, 0, 0, 0]), ModVector::new(d, [0, 0, 0, 1, 0, 0])];
        assert!(matches!(ProtocolStep::from_vm_basis(d, 3, 1, basis), Err(Error::Precondition(_))));
        assert!(ProtocolStep::from_vm_basis(d, 2, 2, vec![]).is_err());
    }

    #[test]
    fn measure_step_matches_label_simulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for (d, n, keep) in [(2u64, 2usize, 1usize), (3, 2, 1), (4, 2, 1), (2, 3, 1), (3, 3, 2), (2, 4, 2), (6, 2, 1)] {
            for _ in 0..5 {
                let s = random_state(&mut rng, d, n);
                let el = random_element(m(d), n, &mut rng);
                let step = ProtocolStep::from_element(el.clone(), keep).unwrap();
                let (out, p) = measure_step(&s, &step).unwrap();
                let (expected, q) = simulate(&s, &el, keep);
                assert!((p - q).abs() < 1e-12);
                assert!((p - success_probability(&s, &step).unwrap()).abs() < 1e-12);
                for (a, b) in out.probs().iter().zip(&expected) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn statistics_do_not_depend_on_the_completion() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for (d, n, keep) in [(3u64, 3usize, 1usize), (4, 3, 2), (5, 2, 1)] {
            let el = random_element(m(d), n, &mut rng);
            let a = ProtocolStep::from_element(el, keep).unwrap();
            let b = ProtocolStep::from_vm_basis(m(d), n, keep, a.vm_basis().to_vec()).unwrap();
            assert_ne!(a.element(), b.element());
            let s = random_state(&mut rng, d, n);
            let (sa, pa) = measure_step(&s, &a).unwrap();
            let (sb, pb) = measure_step(&s, &b).unwrap();
            assert!((pa - pb).abs() < 1e-12);
            assert!((sa.fidelity() - sb.fidelity()).abs() < 1e-12);
            // the kept pairs may be relabeled, so compare spectra
            let sorted = |st: &BellDiagonalState| {
                let mut v = st.probs().to_vec();
                v.sort_by(f64::total_cmp);
                v
            };
            assert!(sorted(&sa).iter().zip(sorted(&sb)).all(|(x, y)| (x - y).abs() < 1e-12));
        }
    }

    #[test]
    fn sequential_and_parallel_agree_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let s = random_state(&mut rng, 3, 3);
        let step = ProtocolStep::from_element(random_element(m(3), 3, &mut rng), 1).unwrap();
        let a = measure_step_with(Execution::Sequential, &s, &step).unwrap();
        let b = measure_step_with(Execution::Parallel, &s, &step).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fixed_states_are_fixed_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for (d, div) in [(4u64, 2u64), (6, 2), (6, 3), (4, 4), (3, 1)] {
            let fixed = BellDiagonalState::fixed_state(div, m(d)).unwrap();
            for (n, keep) in [(2usize, 1usize), (3, 1), (3, 2)] {
                let s = fixed.tensor_power(n).unwrap();
                let expected = fixed.tensor_power(keep).unwrap();
                let step = ProtocolStep::from_element(random_element(m(d), n, &mut rng), keep).unwrap();
                let (out, _) = measure_step(&s, &step).unwrap();
                assert!(out.probs().iter().zip(expected.probs()).all(|(x, y)| (x - y).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn identity_step_probability() {
        for d in [2u64, 3, 5] {
            for (n, keep) in [(2usize, 1usize), (3, 1), (4, 2)] {
                let f = 0.75;
                let s = BellDiagonalState::isotropic(m(d), f).unwrap().tensor_power(n).unwrap();
                let step = ProtocolStep::from_element(SymplecticElement::identity(m(d), n), keep).unwrap();
                let (_, p) = measure_step(&s, &step).unwrap();
                // each measured pair passes when its j label is 0
                let df = d as f64;
                let expected = ((1.0 + df * f) / (df + 1.0)).powi((n - keep) as i32);
                assert!((p - expected).abs() < 1e-12);
            }
        }
        let s = BellDiagonalState::isotropic(m(2), 0.75).unwrap().tensor_power(2).unwrap();
        let step = ProtocolStep::from_element(SymplecticElement::identity(m(2), 2), 1).unwrap();
        assert!((measure_step(&s, &step).unwrap().1 - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn n2_protocol_worked_example() {
        let d = m(2);
        let step = ProtocolStep::from_element(Generator::Oplus(1, 2).element(d, 2).unwrap(), 1).unwrap();
        let s = BellDiagonalState::isotropic(d, 0.75).unwrap().tensor_power(2).unwrap();
        let (out, p) = measure_step(&s, &step).unwrap();
        let twirled = out.twirl_symplectic();
        assert!((twirled.fidelity() - 0.788_461_538_461_538_5).abs() < 1e-12);
        assert!((p - 13.0 / 18.0).abs() < 1e-12);
    }

    #[test]
    fn direct_and_fourier_fidelity_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        for _ in 0..100 {
            let d = rng.random_range(2..=3);
            let n = rng.random_range(2..=3);
            let keep = rng.random_range(1..n);
            let s = random_state(&mut rng, d, n);
            let step = ProtocolStep::from_element(random_element(m(d), n, &mut rng), keep).unwrap();
            let a = joint_fidelity(&s, &step, FidelityMode::Direct).unwrap();
            let b = joint_fidelity(&s, &step, FidelityMode::Fourier).unwrap();
            assert!((a - b).abs() < 1e-12);
            let (out, _) = measure_step(&s, &step).unwrap();
            assert!((a - out.fidelity()).abs() < 1e-12);
        }
    }

    #[test]
    fn trivial_fidelities() {
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        for d in [2u64, 3] {
            for (n, keep) in [(2usize, 1usize), (3, 2)] {
                let step = ProtocolStep::from_element(random_element(m(d), n, &mut rng), keep).unwrap();
                let perfect = BellDiagonalState::point_mass(m(d), n, 0).unwrap();
                assert!((joint_fidelity(&perfect, &step, FidelityMode::Direct).unwrap() - 1.0).abs() < 1e-15);
                let noise = BellDiagonalState::uniform(m(d), n).unwrap();
                let f = joint_fidelity(&noise, &step, FidelityMode::Fourier).unwrap();
                assert!((f - (d as f64).powi(-2 * keep as i32)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn impossible_measurement_is_reported() {
        // weight only on x with j_2 = 1 fails the identity step's check on pair 2
        let d = m(2);
        let s = BellDiagonalState::point_mass(d, 2, ModVector::new(d, [0, 0, 0, 1]).to_index()).unwrap();
        let step = ProtocolStep::from_element(SymplecticElement::identity(d, 2), 1).unwrap();
        assert!(matches!(measure_step(&s, &step), Err(Error::MeasurementImpossible(_))));
    }
}
