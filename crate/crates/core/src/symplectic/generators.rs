use super::SymplecticElement;
use crate::error::{invalid, Result};
use crate::modlinalg::ModMatrix;
use crate::ring::Modulus;

/// Generators of P_S(D, n) and a few derived elements. Pairs are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Generator {
    /// `j_k += i_k`
    Plus(usize),
    /// `(i_k, j_k) ↦ (j_k, −i_k)`
    Exchange(usize),
    /// `i_k += i_l`, `j_l −= j_k`
    Oplus(usize, usize),
    /// `j_k += i_l`, `j_l += i_k`
    DoublePlus(usize, usize),
    /// Exchanges pair `l` with pair `m`.
    Swap(usize, usize),
}

impl Generator {
    fn check(self, n: usize) -> Result<()> {
        let in_range = |k: usize| (1..=n).contains(&k);
        let ok = match self {
            Generator::Plus(k) | Generator::Exchange(k) => in_range(k),
            Generator::Oplus(k, l) | Generator::DoublePlus(k, l) | Generator::Swap(k, l) => {
                in_range(k) && in_range(l) && k != l
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("{self:?} is not defined for n = {n}")))
        }
    }

    /// The matrix of this element on Z_D^{2n}.
    pub fn matrix(self, modulus: Modulus, n: usize) -> Result<ModMatrix> {
        self.check(n)?;
        let mut mat = ModMatrix::identity(modulus, 2 * n);
        let (i, j) = (|k: usize| k - 1, |k: usize| n + k - 1);
        let minus_one = modulus.get() - 1;
        match self {
            Generator::Plus(k) => mat.set(j(k), i(k), 1),
            Generator::Exchange(k) => {
                mat.set(i(k), i(k), 0);
                mat.set(j(k), j(k), 0);
                mat.set(i(k), j(k), 1);
                mat.set(j(k), i(k), minus_one);
            }
            Generator::Oplus(k, l) => {
                mat.set(i(k), i(l), 1);
                mat.set(j(l), j(k), minus_one);
            }
            Generator::DoublePlus(k, l) => {
                mat.set(j(k), i(l), 1);
                mat.set(j(l), i(k), 1);
            }
            Generator::Swap(l, m) => {
                mat.row_swap(i(l), i(m));
                mat.row_swap(j(l), j(m));
            }
        }
        Ok(mat)
    }

    pub fn element(self, modulus: Modulus, n: usize) -> Result<SymplecticElement> {
        Ok(SymplecticElement::new_unchecked(self.matrix(modulus, n)?, n))
    }

    /// Smallest `t ≥ 1` with `g^t = 1`.
    pub fn order(self, modulus: Modulus) -> u64 {
        match self {
            Generator::Plus(_) | Generator::Oplus(..) | Generator::DoublePlus(..) => modulus.get(),
            Generator::Exchange(_) => {
                if modulus.get() == 2 {
                    2
                } else {
                    4
                }
            }
            Generator::Swap(..) => 2,
        }
    }

    fn is_basic(self) -> bool {
        match self {
            Generator::Plus(k) | Generator::Exchange(k) => k == 1,
            Generator::Oplus(k, l) => k == 1 && l == 2,
            Generator::Swap(l, m) => l < m,
            Generator::DoublePlus(..) => false,
        }
    }
}

/// The generating set `{p₊¹, p_ex¹, p_⊕¹² (n ≥ 2), p_swap^{lm} (l < m)}`.
pub fn generators(n: usize) -> Vec<Generator> {
    let mut out = vec![Generator::Plus(1), Generator::Exchange(1)];
    if n >= 2 {
        out.push(Generator::Oplus(1, 2));
    }
    for l in 1..=n {
        for m in l + 1..=n {
            out.push(Generator::Swap(l, m));
        }
    }
    out
}

/// `g_1 · g_2 ⋯ g_t` (the last factor acts first).
pub fn word_product(word: &[Generator], modulus: Modulus, n: usize) -> Result<ModMatrix> {
    let mut acc = ModMatrix::identity(modulus, 2 * n);
    for g in word {
        acc = acc.mul(&g.matrix(modulus, n)?);
    }
    Ok(acc)
}

fn swap(a: usize, b: usize) -> Option<Generator> {
    match a.cmp(&b) {
        std::cmp::Ordering::Less => Some(Generator::Swap(a, b)),
        std::cmp::Ordering::Greater => Some(Generator::Swap(b, a)),
        std::cmp::Ordering::Equal => None,
    }
}

/// Rewrites a derived generator as a word in the basic set.
fn basic_word(g: Generator, modulus: Modulus) -> Vec<Generator> {
    if g.is_basic() {
        return vec![g];
    }
    match g {
        Generator::Plus(k) => {
            let s = swap(1, k).expect("k != 1 here");
            vec![s, Generator::Plus(1), s]
        }
        Generator::Exchange(k) => {
            let s = swap(1, k).expect("k != 1 here");
            vec![s, Generator::Exchange(1), s]
        }
        Generator::Oplus(k, l) => {
            // S = swap(1,k)·swap(2,l') maps pair 1 to k and pair 2 to l
            let l_prime = if l == 1 { k } else { l };
            let s1 = swap(1, k);
            let s2 = swap(2, l_prime);
            let mut word: Vec<Generator> = [s1, s2].into_iter().flatten().collect();
            word.push(Generator::Oplus(1, 2));
            word.extend([s2, s1].into_iter().flatten());
            word
        }
        Generator::DoublePlus(k, l) => {
            // (p_⊕^{kl} p₊^l p₊^k)⁻¹ p₊^k p_⊕^{kl}
            let d = modulus.get() as usize;
            let mut w = Vec::new();
            w.extend(std::iter::repeat_n(Generator::Plus(k), d - 1));
            w.extend(std::iter::repeat_n(Generator::Plus(l), d - 1));
            w.extend(std::iter::repeat_n(Generator::Oplus(k, l), d - 1));
            w.push(Generator::Plus(k));
            w.push(Generator::Oplus(k, l));
            w.into_iter().flat_map(|h| basic_word(h, modulus)).collect()
        }
        Generator::Swap(l, m) => vec![Generator::Swap(m, l)],
    }
}

/// Rewrites any word over [`Generator`] in terms of the basic generating set.
pub fn to_basic_word(word: &[Generator], modulus: Modulus) -> Vec<Generator> {
    word.iter().flat_map(|&g| basic_word(g, modulus)).collect()
}

struct Reducer {
    modulus: Modulus,
    n: usize,
    x: ModMatrix,
    applied: Vec<Generator>,
}

impl Reducer {
    /// `X ← g^c · X`, recording basic generators.
    fn left(&mut self, g: Generator, c: u64) {
        let c = c % g.order(self.modulus);
        if c == 0 {
            return;
        }
        let mat = g.matrix(self.modulus, self.n).expect("generator in range");
        for _ in 0..c {
            self.x = mat.mul(&self.x);
        }
        let word = basic_word(g, self.modulus);
        for _ in 0..c {
            self.applied.extend_from_slice(&word);
        }
    }

    fn i(&self, k: usize, col: usize) -> u64 {
        self.x.get(k - 1, col)
    }

    fn j(&self, k: usize, col: usize) -> u64 {
        self.x.get(self.n + k - 1, col)
    }

    /// `j_k += c·i_k`
    fn plus(&mut self, k: usize, c: u64) {
        self.left(Generator::Plus(k), self.modulus.reduce(c));
    }

    /// `i_k += c·j_k`, as `E⁻¹ P^{−c} E`.
    fn plus_transposed(&mut self, k: usize, c: u64) {
        let c = self.modulus.reduce(c);
        if c == 0 {
            return;
        }
        self.left(Generator::Exchange(k), 1);
        self.left(Generator::Plus(k), self.modulus.neg(c));
        self.left(Generator::Exchange(k), 3);
    }

    /// Clears one component of pair `k` in column `col` by Euclid; returns
    /// with `j_k = 0` when `want_j_zero`, else `i_k = 0`.
    fn reduce_pair(&mut self, k: usize, col: usize, want_j_zero: bool) {
        loop {
            let (a, b) = (self.i(k, col), self.j(k, col));
            if a == 0 || b == 0 {
                break;
            }
            if b >= a {
                self.plus(k, self.modulus.neg(b / a));
            } else {
                self.plus_transposed(k, self.modulus.neg(a / b));
            }
        }
        let (a, b) = (self.i(k, col), self.j(k, col));
        if want_j_zero && b != 0 {
            // (0, b) ↦ (b, 0)
            self.left(Generator::Exchange(k), 1);
        } else if !want_j_zero && a != 0 {
            // (a, 0) ↦ (0, −a)
            self.left(Generator::Exchange(k), 1);
        }
    }

    /// Brings column `p` (the `u_p` column) to `e_{i_p}`.
    fn reduce_u(&mut self, p: usize) {
        let col = p - 1;
        for k in p..=self.n {
            self.reduce_pair(k, col, true);
        }
        for l in p + 1..=self.n {
            loop {
                let (a, b) = (self.i(p, col), self.i(l, col));
                if b == 0 {
                    break;
                }
                if a == 0 {
                    self.left(Generator::Swap(p.min(l), p.max(l)), 1);
                    continue;
                }
                if b >= a {
                    self.left(Generator::Oplus(l, p), self.modulus.neg(b / a));
                } else {
                    self.left(Generator::Oplus(p, l), self.modulus.neg(a / b));
                }
            }
        }
        let g = self.i(p, col);
        let m = self.modulus;
        if g != 1 {
            let g_inv = m.inverse(g).expect("first column of a symplectic matrix is unimodular");
            let one_minus_g = m.sub(1, g);
            self.plus(p, m.mul(g_inv, one_minus_g));
            self.plus_transposed(p, 1);
            self.plus(p, m.neg(one_minus_g));
        }
        debug_assert_eq!(self.x.column(col), crate::modlinalg::ModVector::unit(m, 2 * self.n, col));
    }

    /// Brings column `n + p` (the `v_p` column) to `e_{j_p}` keeping `u_p`.
    fn reduce_v(&mut self, p: usize) {
        let col = self.n + p - 1;
        for l in p + 1..=self.n {
            self.reduce_pair(l, col, false);
            let h = self.j(l, col);
            // j_l −= h·j_p with j_p = 1
            self.left(Generator::Oplus(p, l), h);
        }
        let a = self.i(p, col);
        self.plus_transposed(p, self.modulus.neg(a));
        debug_assert_eq!(self.x.column(col), crate::modlinalg::ModVector::unit(self.modulus, 2 * self.n, col));
    }
}

/// A word `g_1 ⋯ g_t` over the basic generating set whose product is `M`.
///
/// Left multiplication by generators reduces `M` column pair by column pair
/// to the identity; the word is the inverse of that reduction.
pub fn decompose_to_generators(m: &SymplecticElement) -> Vec<Generator> {
    let modulus = m.modulus();
    let n = m.n();
    let mut r = Reducer {
        modulus,
        n,
        x: m.matrix().clone(),
        applied: Vec::new(),
    };
    for p in 1..=n {
        r.reduce_u(p);
        r.reduce_v(p);
    }
    debug_assert!(r.x.is_identity());
    // X = G_t ⋯ G_1 M = 1  =>  M = G_1⁻¹ ⋯ G_t⁻¹
    let mut word: Vec<(Generator, u64)> = Vec::new();
    for g in r.applied {
        let inv = g.order(modulus) - 1;
        match word.last_mut() {
            Some((last, count)) if *last == g => {
                *count = (*count + inv) % g.order(modulus);
                if *count == 0 {
                    word.pop();
                }
            }
            _ => word.push((g, inv)),
        }
    }
    word.into_iter()
        .flat_map(|(g, c)| std::iter::repeat_n(g, c as usize))
        .collect()
}
