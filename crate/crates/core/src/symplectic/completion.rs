use super::{group_order, omega_apply, symplectic_product, SymplecticElement};
use crate::error::{invalid, precondition, Error, Result};
use crate::modlinalg::{extend_to_basis, is_linearly_independent, AllVectors, ModMatrix, ModVector, Subspace};
use crate::ring::{gcd_d, Modulus};
use rand::{Rng, RngCore};

/// Default bound on the number of group elements [`enumerate`] may produce.
pub const DEFAULT_GROUP_CAP: u64 = 10_000_000;

/// The next vector to add to a partial canonical set `u_1..u_r, v_1..v_s`
/// (with `s ≤ r`), as an affine family of candidates.
#[derive(Debug, Clone)]
enum Step {
    /// `u_{r+1} = Σ a_i u_{s+i} + Σ b_i w_i` with `gcd(b) = 1`.
    NewU { fixed: Vec<ModVector>, ws: Vec<ModVector> },
    /// `v_{s+1} = w + Σ c_i u_{s+i}` with `w` already normalized.
    NewV { w: ModVector, tail: Vec<ModVector> },
}

impl Step {
    fn plan(modulus: Modulus, n: usize, us: &[ModVector], vs: &[ModVector]) -> Option<Step> {
        let (r, s) = (us.len(), vs.len());
        if r == n && s == n {
            return None;
        }
        let skip = if r == n { Some(s) } else { None };
        let gens: Vec<ModVector> = us
            .iter()
            .enumerate()
            .filter(|&(k, _)| Some(k) != skip)
            .map(|(_, u)| u)
            .chain(vs)
            .map(omega_apply)
            .collect();
        let v = Subspace::new(modulus, 2 * n, gens).expect("canonical sets are independent");
        let perp = v.orthogonal_complement();
        let fixed: Vec<ModVector> = us[s..].to_vec();
        let coords: Vec<ModVector> = fixed
            .iter()
            .map(|u| ModVector::new(modulus, perp.coordinates(u).expect("u_{s+i} lies in V⊥")))
            .collect();
        let ws: Vec<ModVector> = extend_to_basis(&coords, modulus, perp.dim())
            .expect("coordinates of an independent set are independent")
            .iter()
            .map(|c| perp.combine(c.entries()))
            .collect();
        if r < n {
            debug_assert_eq!(ws.len(), 2 * (n - r));
            Some(Step::NewU { fixed, ws })
        } else {
            debug_assert_eq!(ws.len(), 1);
            let w = &ws[0];
            let sigma = symplectic_product(&us[s], w);
            let sigma_inv = modulus.inverse(sigma).expect("u_{s+1}ᵗΩw is a unit");
            Some(Step::NewV {
                w: w.scale(sigma_inv),
                tail: fixed,
            })
        }
    }

    fn coefficient_len(&self) -> usize {
        match self {
            Step::NewU { fixed, ws } => fixed.len() + ws.len(),
            Step::NewV { tail, .. } => tail.len(),
        }
    }

    fn candidate(&self, coefficients: &[u64]) -> Option<ModVector> {
        match self {
            Step::NewU { fixed, ws } => {
                let (a, b) = coefficients.split_at(fixed.len());
                let modulus = ws[0].modulus();
                if gcd_d(b, modulus) != 1 {
                    return None;
                }
                let mut out = ModVector::zeros(modulus, ws[0].len());
                for (c, x) in a.iter().zip(fixed).chain(b.iter().zip(ws)) {
                    out.add_scaled(x, *c);
                }
                Some(out)
            }
            Step::NewV { w, tail } => {
                let mut out = w.clone();
                for (c, x) in coefficients.iter().zip(tail) {
                    out.add_scaled(x, *c);
                }
                Some(out)
            }
        }
    }

    fn sample(&self, rng: &mut dyn RngCore, modulus: Modulus) -> ModVector {
        let d = modulus.get();
        let len = self.coefficient_len();
        loop {
            let c: Vec<u64> = (0..len).map(|_| rng.random_range(0..d)).collect();
            if let Some(v) = self.candidate(&c) {
                return v;
            }
        }
    }

    fn push(&self, us: &mut Vec<ModVector>, vs: &mut Vec<ModVector>, x: ModVector) {
        match self {
            Step::NewU { .. } => us.push(x),
            Step::NewV { .. } => vs.push(x),
        }
    }
}

/// Checks lengths, the canonical relations and joint independence, and
/// returns the inputs with roles exchanged if there are more `v`s than `u`s.
fn normalize(
    us: &[ModVector],
    vs: &[ModVector],
    n: usize,
    modulus: Modulus,
) -> Result<(Vec<ModVector>, Vec<ModVector>, bool)> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if us.len() > n || vs.len() > n {
        return Err(invalid("more than n vectors of one kind"));
    }
    if let Some(x) = us.iter().chain(vs).find(|x| x.len() != 2 * n || x.modulus() != modulus) {
        return Err(invalid(format!("{x} is not in Z_{modulus}^{}", 2 * n)));
    }
    for (a, x) in us.iter().enumerate() {
        for y in &us[a..] {
            if symplectic_product(x, y) != 0 {
                return Err(precondition("u_iᵗΩu_j must vanish"));
            }
        }
        for (b, y) in vs.iter().enumerate() {
            if symplectic_product(x, y) != u64::from(a == b) {
                return Err(precondition("u_iᵗΩv_j must equal δ_ij"));
            }
        }
    }
    for (a, x) in vs.iter().enumerate() {
        for y in &vs[a..] {
            if symplectic_product(x, y) != 0 {
                return Err(precondition("v_iᵗΩv_j must vanish"));
            }
        }
    }
    let all: Vec<ModVector> = us.iter().chain(vs).cloned().collect();
    if !is_linearly_independent(&all)? {
        return Err(precondition("input vectors are not linearly independent"));
    }
    if vs.len() > us.len() {
        // (u, v) ↦ (v, −u) preserves the canonical relations
        let neg = modulus.get() - 1;
        Ok((vs.to_vec(), us.iter().map(|u| u.scale(neg)).collect(), true))
    } else {
        Ok((us.to_vec(), vs.to_vec(), false))
    }
}

fn assemble(us: &[ModVector], vs: &[ModVector], swapped: bool, modulus: Modulus) -> SymplecticElement {
    let n = us.len();
    let cols: Vec<ModVector> = if swapped {
        let neg = modulus.get() - 1;
        vs.iter().map(|v| v.scale(neg)).chain(us.iter().cloned()).collect()
    } else {
        us.iter().chain(vs).cloned().collect()
    };
    let matrix = ModMatrix::from_columns(modulus, 2 * n, &cols).expect("shapes checked");
    SymplecticElement::new_unchecked(matrix, n)
}

/// Completes `u_1..u_r`, `v_1..v_s` to an element of P_S(D, n) whose first
/// columns are the `u`s and whose columns `n+1..` start with the `v`s.
///
/// Every free choice is the first admissible coefficient tuple in index
/// order, or uniform when `rng` is given.
pub fn complete_canonical_set(
    us: &[ModVector],
    vs: &[ModVector],
    n: usize,
    modulus: Modulus,
    mut rng: Option<&mut dyn RngCore>,
) -> Result<SymplecticElement> {
    let (mut us, mut vs, swapped) = normalize(us, vs, n, modulus)?;
    while let Some(step) = Step::plan(modulus, n, &us, &vs) {
        let x = match rng.as_deref_mut() {
            Some(rng) => step.sample(rng, modulus),
            None => AllVectors::new(modulus, step.coefficient_len())
                .find_map(|c| step.candidate(c.entries()))
                .expect("at least one admissible choice exists"),
        };
        step.push(&mut us, &mut vs, x);
    }
    Ok(assemble(&us, &vs, swapped, modulus))
}

/// A uniformly distributed element of P_S(D, n).
pub fn random_element<R: RngCore>(modulus: Modulus, n: usize, rng: &mut R) -> SymplecticElement {
    complete_canonical_set(&[], &[], n, modulus, Some(rng)).expect("empty input is always completable")
}

#[derive(Debug, Clone)]
struct Frame {
    us: Vec<ModVector>,
    vs: Vec<ModVector>,
    step: Step,
    choices: AllVectors,
}

/// Depth-first enumeration of every completion of a canonical set.
#[derive(Debug, Clone)]
pub struct Enumeration {
    modulus: Modulus,
    n: usize,
    swapped: bool,
    stack: Vec<Frame>,
    done: Option<SymplecticElement>,
}

impl Enumeration {
    /// All completions of `u_1..u_r`, `v_1..v_s`, each exactly once.
    pub fn completions(us: &[ModVector], vs: &[ModVector], n: usize, modulus: Modulus) -> Result<Self> {
        let (us, vs, swapped) = normalize(us, vs, n, modulus)?;
        let mut e = Enumeration {
            modulus,
            n,
            swapped,
            stack: Vec::new(),
            done: None,
        };
        match Step::plan(modulus, n, &us, &vs) {
            Some(step) => e.push_frame(us, vs, step),
            None => e.done = Some(assemble(&us, &vs, swapped, modulus)),
        }
        Ok(e)
    }

    fn push_frame(&mut self, us: Vec<ModVector>, vs: Vec<ModVector>, step: Step) {
        let choices = AllVectors::new(self.modulus, step.coefficient_len());
        self.stack.push(Frame { us, vs, step, choices });
    }
}

impl Iterator for Enumeration {
    type Item = SymplecticElement;

    fn next(&mut self) -> Option<SymplecticElement> {
        if let Some(el) = self.done.take() {
            return Some(el);
        }
        loop {
            let top = self.stack.last_mut()?;
            let Some(c) = top.choices.next() else {
                self.stack.pop();
                continue;
            };
            let Some(x) = top.step.candidate(c.entries()) else {
                continue;
            };
            let (mut us, mut vs) = (top.us.clone(), top.vs.clone());
            top.step.push(&mut us, &mut vs, x);
            match Step::plan(self.modulus, self.n, &us, &vs) {
                Some(step) => self.push_frame(us, vs, step),
                None => return Some(assemble(&us, &vs, self.swapped, self.modulus)),
            }
        }
    }
}

/// Every element of P_S(D, n), refusing groups above [`DEFAULT_GROUP_CAP`].
pub fn enumerate(modulus: Modulus, n: usize) -> Result<Enumeration> {
    enumerate_with_cap(modulus, n, DEFAULT_GROUP_CAP)
}

pub fn enumerate_with_cap(modulus: Modulus, n: usize, cap: u64) -> Result<Enumeration> {
    let order = group_order(modulus, n)?;
    if order > cap {
        return Err(Error::ResourceCap {
            what: "group enumeration",
            needed: order as u128,
            cap: cap as u128,
        });
    }
    Enumeration::completions(&[], &[], n, modulus)
}

#[cfg(test)]
mod tests {
    use super::super::is_symplectic;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::{HashMap, HashSet};

    fn m(d: u64) -> Modulus {
        Modulus::new(d).unwrap()
    }

    fn distinct_count(it: impl Iterator<Item = SymplecticElement>) -> (usize, usize) {
        let mut total = 0;
        let mut set = HashSet::new();
        for el in it {
            assert!(is_symplectic(el.matrix(), el.n()).unwrap());
            set.insert(el.into_matrix());
            total += 1;
        }
        (total, set.len())
    }

    #[test]
    fn completes_a_unit_vector() {
        let e1 = ModVector::unit(m(5), 2, 0);
        let el = complete_canonical_set(std::slice::from_ref(&e1), &[], 1, m(5), None).unwrap();
        assert!(is_symplectic(el.matrix(), 1).unwrap());
        assert_eq!(el.matrix().column(0), e1);
    }

    #[test]
    fn completion_respects_given_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for d in [2u64, 3, 4, 6, 9] {
            for n in 1..=3 {
                let full = random_element(m(d), n, &mut rng);
                let cols = full.matrix().column_vectors();
                for r in 0..=n {
                    for s in 0..=n {
                        let (us, vs) = (&cols[..r], &cols[n..n + s]);
                        for el in [
                            complete_canonical_set(us, vs, n, m(d), None).unwrap(),
                            complete_canonical_set(us, vs, n, m(d), Some(&mut rng)).unwrap(),
                        ] {
                            let got = el.matrix().column_vectors();
                            assert_eq!(&got[..r], us);
                            assert_eq!(&got[n..n + s], vs);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let d = m(4);
        let u = ModVector::new(d, [1, 0]);
        let v = ModVector::new(d, [0, 2]);
        assert!(matches!(
            complete_canonical_set(std::slice::from_ref(&u), &[v], 1, d, None),
            Err(Error::Precondition(_))
        ));
        assert!(complete_canonical_set(&[ModVector::new(d, [2, 0])], &[], 1, d, None).is_err());
        assert!(complete_canonical_set(&[u.clone(), u], &[], 1, d, None).is_err());
    }

    #[test]
    fn counts_match_group_order() {
        for d in 2..=6 {
            let (total, distinct) = distinct_count(enumerate(m(d), 1).unwrap());
            assert_eq!(total as u64, group_order(m(d), 1).unwrap());
            assert_eq!(distinct, total);
        }
        let (total, distinct) = distinct_count(enumerate(m(2), 2).unwrap());
        assert_eq!((total, distinct), (720, 720));
        assert_eq!(enumerate(m(3), 1).unwrap().count(), 24);
        assert_eq!(enumerate(m(5), 1).unwrap().count(), 120);
    }

    #[test]
    fn large_enumerations() {
        let (total, distinct) = distinct_count(enumerate(m(3), 2).unwrap());
        assert_eq!((total, distinct), (51_840, 51_840));
        let (total, distinct) = distinct_count(enumerate(m(4), 2).unwrap());
        assert_eq!(total as u64, group_order(m(4), 2).unwrap());
        assert_eq!(distinct, total);
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(enumerate(m(2), 4), Err(Error::ResourceCap { .. })));
        assert!(enumerate_with_cap(m(2), 2, 719).is_err());
    }

    #[test]
    fn v_step_branch_count() {
        for d in [4u64, 6, 9] {
            for u in AllVectors::new(m(d), 2).filter(|u| gcd_d(u.entries(), m(d)) == 1) {
                let count = Enumeration::completions(&[u], &[], 1, m(d)).unwrap().count();
                assert_eq!(count as u64, d);
            }
        }
        // given v only: the v step is the same count by symmetry
        let v = ModVector::new(m(4), [2, 1]);
        assert_eq!(Enumeration::completions(&[], &[v], 1, m(4)).unwrap().count(), 4);
    }

    #[test]
    fn closure_under_products_and_inverses() {
        let all: Vec<SymplecticElement> = enumerate(m(2), 2).unwrap().collect();
        let set: HashSet<ModMatrix> = all.iter().map(|e| e.matrix().clone()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let a = &all[rng.random_range(0..all.len())];
            let b = &all[rng.random_range(0..all.len())];
            assert!(set.contains(a.compose(b).matrix()));
            assert!(set.contains(a.inverse().matrix()));
        }
    }

    #[test]
    fn random_elements_are_uniform() {
        // chi-square against the 24 elements of P_S(3, 1)
        let all: Vec<ModMatrix> = enumerate(m(3), 1).unwrap().map(|e| e.into_matrix()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let samples = 24_000;
        let mut counts: HashMap<ModMatrix, u64> = HashMap::new();
        for _ in 0..samples {
            *counts.entry(random_element(m(3), 1, &mut rng).into_matrix()).or_default() += 1;
        }
        assert_eq!(counts.len(), 24);
        let expected = samples as f64 / 24.0;
        let chi2: f64 = all
            .iter()
            .map(|g| (counts[g] as f64 - expected).powi(2) / expected)
            .sum();
        // 23 degrees of freedom; the 0.999 quantile is about 49.7
        assert!(chi2 < 49.7, "chi2 = {chi2}");
    }

    #[test]
    fn deterministic_completion_is_reproducible() {
        let a = complete_canonical_set(&[], &[], 3, m(6), None).unwrap();
        let b = complete_canonical_set(&[], &[], 3, m(6), None).unwrap();
        assert_eq!(a, b);
        let first = complete_canonical_set(&[], &[], 2, m(4), None).unwrap();
        assert_eq!(Some(first), enumerate(m(4), 2).unwrap().next());
    }
}
