use super::{ModMatrix, ModVector};
use crate::error::{invalid, precondition, Result};
use crate::ring::{prime_support, Modulus};

/// One of the two elementary pair operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairOp {
    /// `(x, y) -> (x, x + y)`
    AddFirstToSecond,
    /// `(x, y) -> (x + y, y)`
    AddSecondToFirst,
}

impl PairOp {
    pub fn apply(self, (x, y): (u64, u64), modulus: Modulus) -> (u64, u64) {
        match self {
            PairOp::AddFirstToSecond => (x, modulus.add(x, y)),
            PairOp::AddSecondToFirst => (modulus.add(x, y), y),
        }
    }
}

/// Drives the first component of `(x, y)` to zero using only the two pair
/// operations, with residues ordered `0 < 1 < ... < D-1`.
///
/// While both entries are nonzero, the larger-or-equal second entry is pushed
/// below the first by repeated `(x, x+y)`, or the first below the second by
/// repeated `(x+y, y)`. If the second entry hits zero, one `(x, x+y)` followed
/// by `D-1` applications of `(x+y, y)` moves the value across.
pub fn pair_reduce(x: u64, y: u64, modulus: Modulus) -> (Vec<PairOp>, (u64, u64)) {
    let (mut x, mut y) = (modulus.reduce(x), modulus.reduce(y));
    let mut ops = Vec::new();
    let mut push = |op: PairOp, pair: &mut (u64, u64)| {
        ops.push(op);
        *pair = op.apply(*pair, modulus);
    };
    let mut pair = (x, y);
    while x != 0 && y != 0 {
        if x <= y {
            while pair.1 >= pair.0 && pair.1 != 0 {
                push(PairOp::AddFirstToSecond, &mut pair);
            }
        } else {
            while pair.0 >= pair.1 && pair.0 != 0 {
                push(PairOp::AddSecondToFirst, &mut pair);
            }
        }
        (x, y) = pair;
    }
    if x != 0 {
        push(PairOp::AddFirstToSecond, &mut pair);
        for _ in 0..modulus.get() - 1 {
            push(PairOp::AddSecondToFirst, &mut pair);
        }
    }
    (ops, pair)
}

/// `C = A·M·B` with `A`, `B` invertible and `C` zero off its leading diagonal.
///
/// Inverses of `A` and `B` are tracked alongside.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub a: ModMatrix,
    pub c: ModMatrix,
    pub b: ModMatrix,
    pub a_inv: ModMatrix,
    pub b_inv: ModMatrix,
}

impl Decomposition {
    /// Leading diagonal of `C`.
    pub fn diagonal(&self) -> Vec<u64> {
        (0..self.c.rows().min(self.c.cols()))
            .map(|i| self.c.get(i, i))
            .collect()
    }
}

struct Eliminator {
    d: Decomposition,
}

impl Eliminator {
    fn m(&self) -> Modulus {
        self.d.c.modulus()
    }

    // row_t += c·row_s on C; A follows, A⁻¹ gets col_s -= c·col_t.
    fn row_add(&mut self, t: usize, s: usize, c: u64) {
        let m = self.m();
        self.d.c.row_add(t, s, c);
        self.d.a.row_add(t, s, c);
        self.d.a_inv.col_add(s, t, m.neg(m.reduce(c)));
    }

    fn col_add(&mut self, t: usize, s: usize, c: u64) {
        let m = self.m();
        self.d.c.col_add(t, s, c);
        self.d.b.col_add(t, s, c);
        self.d.b_inv.row_add(s, t, m.neg(m.reduce(c)));
    }

    fn row_swap(&mut self, i: usize, j: usize) {
        self.d.c.row_swap(i, j);
        self.d.a.row_swap(i, j);
        self.d.a_inv.col_swap(i, j);
    }

    fn col_swap(&mut self, i: usize, j: usize) {
        self.d.c.col_swap(i, j);
        self.d.b.col_swap(i, j);
        self.d.b_inv.row_swap(i, j);
    }

    fn row_scale(&mut self, i: usize, u: u64, u_inv: u64) {
        self.d.c.row_scale(i, u);
        self.d.a.row_scale(i, u);
        self.d.a_inv.col_scale(i, u_inv);
    }

    /// Scales the pivot row by a unit so the pivot equals `gcd(pivot, D)`.
    fn normalize_pivot(&mut self, k: usize) {
        let m = self.m();
        let a = self.d.c.get(k, k);
        let g = m.ideal_generator(a);
        if a == g {
            return;
        }
        let u = (1..m.get())
            .find(|&t| m.is_unit(t) && m.mul(a, t) == g)
            .expect("every residue is a unit multiple of its ideal generator");
        let u_inv = m.inverse(u).expect("u is a unit");
        self.row_scale(k, u, u_inv);
    }

    /// Clears `C[i][k]` against the pivot at `(k, k)` with row operations.
    fn clear_below(&mut self, i: usize, k: usize) {
        let m = self.m();
        let x = self.d.c.get(i, k);
        let g = self.d.c.get(k, k);
        if x == 0 {
            return;
        }
        if g != 0 && x.is_multiple_of(g) {
            self.row_add(i, k, m.neg(x / g));
            return;
        }
        let (ops, _) = pair_reduce(x, g, m);
        for (op, count) in run_lengths(&ops) {
            match op {
                PairOp::AddFirstToSecond => self.row_add(k, i, count),
                PairOp::AddSecondToFirst => self.row_add(i, k, count),
            }
        }
        debug_assert_eq!(self.d.c.get(i, k), 0);
        self.normalize_pivot(k);
    }

    /// Clears `C[k][j]` against the pivot at `(k, k)` with column operations.
    fn clear_right(&mut self, j: usize, k: usize) {
        let m = self.m();
        let x = self.d.c.get(k, j);
        let g = self.d.c.get(k, k);
        if x == 0 {
            return;
        }
        if g != 0 && x.is_multiple_of(g) {
            self.col_add(j, k, m.neg(x / g));
            return;
        }
        let (ops, _) = pair_reduce(x, g, m);
        for (op, count) in run_lengths(&ops) {
            match op {
                PairOp::AddFirstToSecond => self.col_add(k, j, count),
                PairOp::AddSecondToFirst => self.col_add(j, k, count),
            }
        }
        debug_assert_eq!(self.d.c.get(k, j), 0);
        // the pivot ideal only grows; rescale the row to keep it canonical
        self.normalize_pivot(k);
    }

    fn pivot_position(&self, k: usize) -> Option<(usize, usize)> {
        let m = self.m();
        let c = &self.d.c;
        let mut best: Option<(u64, usize, usize)> = None;
        for i in k..c.rows() {
            for j in k..c.cols() {
                let x = c.get(i, j);
                if x == 0 {
                    continue;
                }
                let g = m.ideal_generator(x);
                if best.is_none_or(|(bg, _, _)| g < bg) {
                    best = Some((g, i, j));
                }
            }
        }
        best.map(|(_, i, j)| (i, j))
    }

    fn run(mut self) -> Decomposition {
        let (p, q) = (self.d.c.rows(), self.d.c.cols());
        for k in 0..p.min(q) {
            loop {
                let Some((i, j)) = self.pivot_position(k) else {
                    return self.d;
                };
                self.row_swap(k, i);
                self.col_swap(k, j);
                self.normalize_pivot(k);
                for i in k + 1..p {
                    self.clear_below(i, k);
                }
                for j in k + 1..q {
                    self.clear_right(j, k);
                }
                let clean = (k + 1..p).all(|i| self.d.c.get(i, k) == 0)
                    && (k + 1..q).all(|j| self.d.c.get(k, j) == 0);
                if clean {
                    break;
                }
            }
        }
        self.d
    }
}

fn run_lengths(ops: &[PairOp]) -> Vec<(PairOp, u64)> {
    let mut out: Vec<(PairOp, u64)> = Vec::new();
    for &op in ops {
        match out.last_mut() {
            Some((last, n)) if *last == op => *n += 1,
            _ => out.push((op, 1)),
        }
    }
    out
}

/// Diagonalizes `M` by invertible row and column operations.
pub fn decompose(m: &ModMatrix) -> Decomposition {
    let modulus = m.modulus();
    let (p, q) = (m.rows(), m.cols());
    Eliminator {
        d: Decomposition {
            a: ModMatrix::identity(modulus, p),
            c: m.clone(),
            b: ModMatrix::identity(modulus, q),
            a_inv: ModMatrix::identity(modulus, p),
            b_inv: ModMatrix::identity(modulus, q),
        },
    }
    .run()
}

/// Largest `r` such that the `r×r` minors have gcd 1 (0 if none).
///
/// Minor ideals are invariant under the elimination, and for the diagonal
/// form the `r`-minors have gcd 1 exactly when, for every prime `p | D`, at
/// least `r` diagonal entries are not divisible by `p`.
pub fn rank(m: &ModMatrix) -> usize {
    let diag = decompose(m).diagonal();
    rank_of_diagonal(&diag, m.modulus())
}

pub(crate) fn rank_of_diagonal(diag: &[u64], modulus: Modulus) -> usize {
    prime_support(modulus.get())
        .into_iter()
        .map(|p| diag.iter().filter(|&&c| c % p != 0).count())
        .min()
        .unwrap_or(0)
}

/// Whether the given vectors are linearly independent over Z_D.
pub fn is_linearly_independent(rows: &[ModVector]) -> Result<bool> {
    let Some(first) = rows.first() else {
        return Ok(true);
    };
    let mat = ModMatrix::from_rows(first.modulus(), first.len(), rows)?;
    Ok(rank(&mat) == rows.len())
}

/// Vectors completing an independent set `S` to a basis of Z_D^n.
pub fn extend_to_basis(s: &[ModVector], modulus: Modulus, n: usize) -> Result<Vec<ModVector>> {
    if s.len() > n {
        return Err(invalid(format!("{} vectors cannot be independent in Z_D^{n}", s.len())));
    }
    if s.is_empty() {
        return Ok((0..n).map(|k| ModVector::unit(modulus, n, k)).collect());
    }
    let mat = ModMatrix::from_rows(modulus, n, s)?;
    let dec = decompose(&mat);
    if rank_of_diagonal(&dec.diagonal(), modulus) != s.len() {
        return Err(precondition("set to extend is not linearly independent"));
    }
    // [M; M'] = diag(A⁻¹, 1)·diag(C, 1)·B⁻¹, so M' is the tail of B⁻¹.
    Ok((s.len()..n).map(|i| dec.b_inv.row(i)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modlinalg::AllVectors;
    use crate::ring::gcd_d;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m(d: u64) -> Modulus {
        Modulus::new(d).unwrap()
    }

    fn random_matrix(rng: &mut impl Rng, d: u64, p: usize, q: usize) -> ModMatrix {
        ModMatrix::from_fn(m(d), p, q, |_, _| rng.random_range(0..d) as i64)
    }

    fn det(mat: &[Vec<i64>]) -> i64 {
        let n = mat.len();
        if n == 0 {
            return 1;
        }
        (0..n)
            .map(|j| {
                let minor: Vec<Vec<i64>> = mat[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|&(c, _)| c != j).map(|(_, &x)| x).collect())
                    .collect();
                let sign = if j % 2 == 0 { 1 } else { -1 };
                sign * mat[0][j] * det(&minor)
            })
            .sum()
    }

    fn subsets(n: usize, r: usize) -> Vec<Vec<usize>> {
        if r == 0 {
            return vec![vec![]];
        }
        if n < r {
            return vec![];
        }
        let mut out = subsets(n - 1, r);
        for mut s in subsets(n - 1, r - 1) {
            s.push(n - 1);
            out.push(s);
        }
        out
    }

    /// Rank straight from the definition: gcd of all r×r minors.
    fn rank_by_minors(mat: &ModMatrix) -> usize {
        let d = mat.modulus();
        let mut best = 0;
        for r in 1..=mat.rows().min(mat.cols()) {
            let mut minors = Vec::new();
            for rows in subsets(mat.rows(), r) {
                for cols in subsets(mat.cols(), r) {
                    let sub: Vec<Vec<i64>> = rows
                        .iter()
                        .map(|&i| cols.iter().map(|&j| mat.get(i, j) as i64).collect())
                        .collect();
                    minors.push(d.reduce_signed(det(&sub)));
                }
            }
            if gcd_d(&minors, d) == 1 {
                best = r;
            }
        }
        best
    }

    fn independent_by_search(rows: &[ModVector]) -> bool {
        let d = rows[0].modulus();
        AllVectors::new(d, rows.len()).skip(1).all(|coef| {
            let mut acc = ModVector::zeros(d, rows[0].len());
            for (c, r) in coef.entries().iter().zip(rows) {
                acc.add_scaled(r, *c);
            }
            !acc.is_zero()
        })
    }

    fn replay(ops: &[PairOp], x: u64, y: u64, d: Modulus) -> (u64, u64) {
        ops.iter().fold((x, y), |pair, op| op.apply(pair, d))
    }

    fn assert_diagonal(c: &ModMatrix) {
        for i in 0..c.rows() {
            for j in 0..c.cols() {
                if i != j {
                    assert_eq!(c.get(i, j), 0, "C not diagonal:\n{c}");
                }
            }
        }
    }

    fn check_decomposition(mat: &ModMatrix) {
        let dec = decompose(mat);
        assert_eq!(dec.a.mul(mat).mul(&dec.b), dec.c);
        assert!(dec.a.mul(&dec.a_inv).is_identity());
        assert!(dec.b.mul(&dec.b_inv).is_identity());
        assert_eq!(rank(&dec.a), mat.rows());
        assert_eq!(rank(&dec.b), mat.cols());
        assert_diagonal(&dec.c);
    }

    #[test]
    fn pair_reduce_examples() {
        let (ops, pair) = pair_reduce(0, 5, m(7));
        assert!(ops.is_empty());
        assert_eq!(pair, (0, 5));

        let (ops, pair) = pair_reduce(2, 0, m(4));
        let mut expected = vec![PairOp::AddFirstToSecond];
        expected.extend([PairOp::AddSecondToFirst; 3]);
        assert_eq!(ops, expected);
        assert_eq!(pair, (0, 2));
        assert_eq!(replay(&ops, 2, 0, m(4)), (0, 2));

        let (ops, pair) = pair_reduce(3, 5, m(7));
        assert_eq!(pair.0, 0);
        assert_eq!(replay(&ops, 3, 5, m(7)), pair);
    }

    #[test]
    fn pair_reduce_exhaustive() {
        for d in 2..=12 {
            for x in 0..d {
                for y in 0..d {
                    let (ops, pair) = pair_reduce(x, y, m(d));
                    assert_eq!(pair.0, 0);
                    assert_eq!(replay(&ops, x, y, m(d)), pair);
                    assert_eq!(m(d).ideal_generator(pair.1), crate::ring::gcd(crate::ring::gcd(x, y), d));
                }
            }
        }
    }

    #[test]
    fn decompose_examples() {
        for d in 2..=6 {
            let id = ModMatrix::identity(m(d), 3);
            let dec = decompose(&id);
            assert_eq!(dec.a.mul(&id).mul(&dec.b), dec.c);
            assert_diagonal(&dec.c);
        }
        let mat = ModMatrix::from_fn(m(4), 2, 2, |i, j| [[2, 0], [0, 1]][i][j]);
        check_decomposition(&mat);
        let mut diag = decompose(&mat).diagonal();
        diag.sort();
        assert_eq!(diag, vec![1, 2]);
    }

    #[test]
    fn decompose_random_rectangular() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            check_decomposition(&random_matrix(&mut rng, 6, 3, 5));
            check_decomposition(&random_matrix(&mut rng, 12, 4, 3));
        }
    }

    #[test]
    fn rank_examples() {
        for d in 2..=6 {
            assert_eq!(rank(&ModMatrix::identity(m(d), 4)), 4);
        }
        assert_eq!(rank(&ModMatrix::from_fn(m(4), 1, 1, |_, _| 2)), 0);
        // diag(2,3) mod 6 has rank 1 although no diagonal entry is a unit
        let mat = ModMatrix::from_fn(m(6), 2, 2, |i, j| [[2, 0], [0, 3]][i][j]);
        assert_eq!(rank(&mat), 1);
        assert_eq!(rank_by_minors(&mat), 1);
    }

    #[test]
    fn rank_matches_minor_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..400 {
            let d = rng.random_range(2..=12);
            let p = rng.random_range(1..=3);
            let q = rng.random_range(1..=4);
            let mat = random_matrix(&mut rng, d, p, q);
            assert_eq!(rank(&mat), rank_by_minors(&mat), "D={d}\n{mat}");
        }
        for _ in 0..100 {
            let mat = random_matrix(&mut rng, 6, 2, 4);
            assert_eq!(rank(&mat), rank_by_minors(&mat));
        }
    }

    #[test]
    fn rank_is_invariant_under_elementary_operations() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let d = rng.random_range(2..=6);
            let mut mat = random_matrix(&mut rng, d, 3, 3);
            let r = rank(&mat);
            for _ in 0..5 {
                let (a, b) = (rng.random_range(0..3), rng.random_range(0..3));
                if a == b {
                    continue;
                }
                let c = rng.random_range(0..d);
                if rng.random_bool(0.5) {
                    mat.row_add(a, b, c);
                } else {
                    mat.col_add(a, b, c);
                }
            }
            assert_eq!(rank(&mat), r);
        }
    }

    /// Standard Gaussian elimination over a prime field.
    fn field_rank(mat: &ModMatrix) -> usize {
        let d = mat.modulus();
        let mut rows: Vec<Vec<u64>> = (0..mat.rows()).map(|i| mat.row(i).entries().to_vec()).collect();
        let mut r = 0;
        for col in 0..mat.cols() {
            let Some(piv) = (r..rows.len()).find(|&i| rows[i][col] != 0) else {
                continue;
            };
            rows.swap(r, piv);
            let inv = d.inverse(rows[r][col]).unwrap();
            for i in 0..rows.len() {
                if i != r && rows[i][col] != 0 {
                    let f = d.mul(rows[i][col], inv);
                    for j in 0..mat.cols() {
                        rows[i][j] = d.sub(rows[i][j], d.mul(f, rows[r][j]));
                    }
                }
            }
            r += 1;
        }
        r
    }

    #[test]
    fn prime_modulus_agrees_with_field_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let d = [2u64, 3, 5, 7][rng.random_range(0..4)];
            let p = rng.random_range(1..=4);
            let q = rng.random_range(1..=4);
            let mat = random_matrix(&mut rng, d, p, q);
            assert_eq!(rank(&mat), field_rank(&mat));
        }
    }

    #[test]
    fn independence_examples() {
        let d = m(5);
        assert!(is_linearly_independent(&[ModVector::new(d, [1, 0]), ModVector::new(d, [0, 1])]).unwrap());
        assert!(!is_linearly_independent(&[ModVector::new(m(4), [0, 2])]).unwrap());
        assert!(is_linearly_independent(&[]).unwrap());
    }

    #[test]
    fn independence_matches_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..300 {
            let k = rng.random_range(1..=3);
            let rows: Vec<ModVector> = (0..k)
                .map(|_| ModVector::new(m(6), (0..3).map(|_| rng.random_range(0..6))))
                .collect();
            assert_eq!(is_linearly_independent(&rows).unwrap(), independent_by_search(&rows));
        }
    }

    #[test]
    fn extension_examples() {
        let d = m(4);
        let full = extend_to_basis(&[], d, 3).unwrap();
        assert_eq!(full.len(), 3);
        assert!(is_linearly_independent(&full).unwrap());

        let s = vec![ModVector::unit(d, 3, 0)];
        let mut all = s.clone();
        all.extend(extend_to_basis(&s, d, 3).unwrap());
        assert_eq!(all.len(), 3);
        assert!(is_linearly_independent(&all).unwrap());

        let s = vec![ModVector::new(d, [2, 1])];
        let ext = extend_to_basis(&s, d, 2).unwrap();
        assert_eq!(ext.len(), 1);
        assert!(is_linearly_independent(&[s[0].clone(), ext[0].clone()]).unwrap());

        assert!(extend_to_basis(&[ModVector::new(d, [0, 2])], d, 2).is_err());
    }

    proptest! {
        #[test]
        fn extension_yields_a_basis(d in 2u64..=8, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 4;
            let k = rng.random_range(0..=n);
            let s: Vec<ModVector> = (0..k)
                .map(|_| ModVector::new(m(d), (0..n).map(|_| rng.random_range(0..d))))
                .collect();
            if is_linearly_independent(&s).unwrap() {
                let mut all = s.clone();
                all.extend(extend_to_basis(&s, m(d), n).unwrap());
                prop_assert_eq!(all.len(), n);
                prop_assert!(is_linearly_independent(&all).unwrap());
            }
        }

        #[test]
        fn inverse_round_trips(d in 2u64..=10, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mat = random_matrix(&mut rng, d, 3, 3);
            match mat.inverse() {
                Some(inv) => prop_assert!(mat.mul(&inv).is_identity() && inv.mul(&mat).is_identity()),
                None => prop_assert!(rank(&mat) < 3),
            }
        }
    }
}
