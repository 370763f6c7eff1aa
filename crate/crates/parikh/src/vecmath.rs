//! Exact integer vector and matrix algebra.
//!
//! All operations are exact: determinants and solves go through arbitrary
//! precision integers internally and convert back to 64-bit entries, failing
//! loudly on overflow instead of wrapping. No floating point.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::{Error, Result};

/// An integer vector indexed by the letters of one alphabet.
///
/// Entries may be negative only in contexts that explicitly allow it
/// (negated grammars, internal constructions).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LetterVec {
    entries: Vec<i64>,
}

impl std::fmt::Debug for LetterVec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self.entries)
    }
}

impl LetterVec {
    pub fn zeros(dim: usize) -> Self {
        LetterVec { entries: vec![0; dim] }
    }

    pub fn from_vec(entries: Vec<i64>) -> Self {
        LetterVec { entries }
    }

    /// Unit vector with a single 1 at `i`.
    pub fn unit(dim: usize, i: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.entries[i] = 1;
        v
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entry(&self, i: usize) -> i64 {
        self.entries[i]
    }

    pub fn set(&mut self, i: usize, v: i64) {
        self.entries[i] = v;
    }

    pub fn entries(&self) -> &[i64] {
        &self.entries
    }

    /// `|v|`: sum of absolute entries.
    pub fn l1(&self) -> i64 {
        self.entries
            .iter()
            .map(|&x| (x as i128).abs())
            .sum::<i128>()
            .try_into()
            .expect("l1 norm overflow")
    }

    /// `||v||`: maximum absolute entry.
    pub fn linf(&self) -> i64 {
        self.entries.iter().map(|&x| x.abs()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&x| x == 0)
    }

    pub fn is_nonneg(&self) -> bool {
        self.entries.iter().all(|&x| x >= 0)
    }

    /// Pointwise `self <= other`.
    pub fn leq(&self, other: &LetterVec) -> bool {
        self.entries
            .iter()
            .zip(&other.entries)
            .all(|(&a, &b)| a <= b)
    }

    pub fn add(&self, other: &LetterVec) -> LetterVec {
        debug_assert_eq!(self.dim(), other.dim());
        LetterVec {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| a.checked_add(b).expect("vector add overflow"))
                .collect(),
        }
    }

    pub fn sub(&self, other: &LetterVec) -> LetterVec {
        debug_assert_eq!(self.dim(), other.dim());
        LetterVec {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| a.checked_sub(b).expect("vector sub overflow"))
                .collect(),
        }
    }

    pub fn scale(&self, k: i64) -> LetterVec {
        LetterVec {
            entries: self
                .entries
                .iter()
                .map(|&a| a.checked_mul(k).expect("vector scale overflow"))
                .collect(),
        }
    }

    pub fn neg(&self) -> LetterVec {
        self.scale(-1)
    }
}

/// Column-major integer matrix over one alphabet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    cols: Vec<LetterVec>,
    rows: usize,
}

impl IntMatrix {
    pub fn from_columns(cols: Vec<LetterVec>) -> Result<Self> {
        let rows = cols.first().map(|c| c.dim()).unwrap_or(0);
        if cols.iter().any(|c| c.dim() != rows) {
            return Err(Error::DimensionMismatch(
                "matrix columns have differing dimensions".into(),
            ));
        }
        Ok(IntMatrix { cols, rows })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols.len()
    }

    pub fn column(&self, i: usize) -> &LetterVec {
        &self.cols[i]
    }

    pub fn columns(&self) -> &[LetterVec] {
        &self.cols
    }

    pub fn entry(&self, row: usize, col: usize) -> i64 {
        self.cols[col].entry(row)
    }

    /// Matrix-vector product `M v`.
    pub fn mul_vec(&self, v: &LetterVec) -> LetterVec {
        assert_eq!(v.dim(), self.cols.len());
        let mut out = vec![0i128; self.rows];
        for (j, col) in self.cols.iter().enumerate() {
            let x = v.entry(j) as i128;
            for i in 0..self.rows {
                out[i] += col.entry(i) as i128 * x;
            }
        }
        LetterVec::from_vec(
            out.into_iter()
                .map(|x| i64::try_from(x).expect("matrix product overflow"))
                .collect(),
        )
    }

    /// Exact determinant via big-integer Bareiss elimination.
    pub fn determinant(&self) -> Result<i64> {
        if !self.is_square() {
            return Err(Error::NonSquare {
                rows: self.rows,
                cols: self.cols.len(),
            });
        }
        let d = big_determinant(&self.to_big());
        d.to_i64().ok_or_else(|| Error::Overflow("determinant".into()))
    }

    fn to_big(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows)
            .map(|i| {
                (0..self.cols.len())
                    .map(|j| BigInt::from(self.entry(i, j)))
                    .collect()
            })
            .collect()
    }
}

/// Bareiss fraction-free determinant of a square big-integer matrix.
fn big_determinant(m: &[Vec<BigInt>]) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::from(1);
    }
    let mut a: Vec<Vec<BigInt>> = m.to_vec();
    let mut sign = 1i64;
    let mut prev = BigInt::from(1);
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                a[i][j] = num / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    a[n - 1][n - 1].clone() * sign
}

/// Solves `M w = det(M) v` exactly for integer `w` (Cramer columns).
///
/// The solution always exists: replacing column `i` of `M` by `v` and taking
/// the determinant yields `w_i`.
pub fn det_solve(m: &IntMatrix, v: &LetterVec) -> Result<LetterVec> {
    if !m.is_square() {
        return Err(Error::NonSquare {
            rows: m.rows(),
            cols: m.ncols(),
        });
    }
    if v.dim() != m.rows() {
        return Err(Error::DimensionMismatch("det_solve vector".into()));
    }
    let det = big_determinant(&m.to_big());
    if det.is_zero() {
        return Err(Error::Degenerate);
    }
    let n = m.rows();
    let mut w = Vec::with_capacity(n);
    for i in 0..n {
        let mut big = m.to_big();
        for (row, cell) in big.iter_mut().enumerate() {
            cell[i] = BigInt::from(v.entry(row));
        }
        let wi = big_determinant(&big);
        w.push(wi.to_i64().ok_or_else(|| Error::Overflow("det_solve".into()))?);
    }
    let w = LetterVec::from_vec(w);
    debug_assert_eq!(
        m.mul_vec(&w),
        v.scale(det.to_i64().ok_or_else(|| Error::Overflow("det_solve".into()))?)
    );
    Ok(w)
}

/// Integer coefficients of a linear dependency, indexed like the input list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DependencyCoeffs {
    pub coeffs: Vec<i64>,
}

impl DependencyCoeffs {
    /// Checks `sum coeffs[i] * vs[i] == 0` exactly.
    pub fn verify(&self, vs: &[LetterVec]) -> bool {
        if vs.is_empty() {
            return false;
        }
        let dim = vs[0].dim();
        let mut acc = vec![0i128; dim];
        for (c, v) in self.coeffs.iter().zip(vs) {
            for i in 0..dim {
                acc[i] += *c as i128 * v.entry(i) as i128;
            }
        }
        self.coeffs.iter().any(|&c| c > 0) && acc.iter().all(|&x| x == 0)
    }
}

/// Rational Gaussian elimination rank of a set of vectors.
pub fn rank(vs: &[LetterVec]) -> usize {
    let mut basis: Vec<Vec<BigRational>> = Vec::new();
    for v in vs {
        if let Some(resid) = reduce_against(&basis, v) {
            basis.push(resid);
        }
    }
    basis.len()
}

/// Reduces `v` against the running row basis; returns the residual if it is
/// nonzero (i.e. `v` is independent of the basis so far).
fn reduce_against(basis: &[Vec<BigRational>], v: &LetterVec) -> Option<Vec<BigRational>> {
    let mut r: Vec<BigRational> = v
        .entries()
        .iter()
        .map(|&x| BigRational::from(BigInt::from(x)))
        .collect();
    for b in basis {
        let pivot = b.iter().position(|x| !x.is_zero()).unwrap();
        if !r[pivot].is_zero() {
            let factor = &r[pivot] / &b[pivot];
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri -= &factor * bi;
            }
        }
    }
    if r.iter().all(|x| x.is_zero()) {
        None
    } else {
        Some(r)
    }
}

/// Finds an integer dependency `sum a_v v = 0` with at least one positive
/// coefficient, or `None` if the vectors are linearly independent.
///
/// All inputs must satisfy `||v|| <= bound`. The returned coefficients stay
/// within `d! * bound^d * |subset|` where `d` is the dimension; the minimal
/// dependent subset is grown greedily in input order, and the whole vector of
/// coefficients is sign-flipped if needed so that a positive entry exists.
pub fn integer_dependency(vs: &[LetterVec], bound: i64) -> Result<Option<DependencyCoeffs>> {
    if vs.is_empty() {
        return Ok(None);
    }
    let dim = vs[0].dim();
    if vs.iter().any(|v| v.dim() != dim) {
        return Err(Error::DimensionMismatch("integer_dependency input".into()));
    }
    if vs.iter().any(|v| v.linf() > bound) {
        return Err(Error::InvalidInput(format!(
            "integer_dependency: some ||v|| exceeds the stated bound {bound}"
        )));
    }

    // Grow an independent prefix; the first vector that reduces to zero closes
    // a minimal dependent subset.
    let mut basis: Vec<Vec<BigRational>> = Vec::new();
    let mut basis_idx: Vec<usize> = Vec::new();
    for (k, v) in vs.iter().enumerate() {
        match reduce_against(&basis, v) {
            Some(resid) => {
                basis.push(resid);
                basis_idx.push(k);
            }
            None => {
                let (subset, betas) = minimal_dependent_subset(vs, &basis_idx, k);
                let coeffs = dependency_from_subset(vs, &subset, &betas, dim)?;
                let dep = normalize_sign(coeffs, vs.len());
                debug_assert!(dep.verify(vs));
                debug_assert!(dependency_within_bound(&dep, dim, bound, subset.len()));
                return Ok(Some(dep));
            }
        }
    }
    Ok(None)
}

fn dependency_within_bound(dep: &DependencyCoeffs, dim: usize, bound: i64, subset: usize) -> bool {
    let mut limit: i128 = 1;
    for i in 1..=dim {
        limit = limit.saturating_mul(i as i128);
    }
    for _ in 0..dim {
        limit = limit.saturating_mul(bound.max(1) as i128);
    }
    limit = limit.saturating_mul(subset as i128);
    dep.coeffs.iter().all(|&c| (c as i128).abs() <= limit)
}

/// Solves for rational coefficients expressing `vs[dep_idx]` over the current
/// independent set, returning the participating indices (including `dep_idx`)
/// and the rational dependency with `beta[dep_idx] = -1`.
fn minimal_dependent_subset(
    vs: &[LetterVec],
    basis_idx: &[usize],
    dep_idx: usize,
) -> (Vec<usize>, Vec<BigRational>) {
    // Solve sum_j x_j * vs[basis_idx[j]] = vs[dep_idx] by rational elimination
    // on the (dim x |basis|) system.
    let dim = vs[0].dim();
    let k = basis_idx.len();
    let mut aug: Vec<Vec<BigRational>> = (0..dim)
        .map(|row| {
            let mut r: Vec<BigRational> = basis_idx
                .iter()
                .map(|&j| BigRational::from(BigInt::from(vs[j].entry(row))))
                .collect();
            r.push(BigRational::from(BigInt::from(vs[dep_idx].entry(row))));
            r
        })
        .collect();

    let mut pivot_of_col: Vec<Option<usize>> = vec![None; k];
    let mut row = 0;
    for col in 0..k {
        if let Some(p) = (row..dim).find(|&r| !aug[r][col].is_zero()) {
            aug.swap(row, p);
            let inv = aug[row][col].clone();
            for x in aug[row].iter_mut() {
                *x /= &inv;
            }
            for r in 0..dim {
                if r != row && !aug[r][col].is_zero() {
                    let f = aug[r][col].clone();
                    for c in 0..=k {
                        let delta = &f * &aug[row][c];
                        aug[r][c] -= delta;
                    }
                }
            }
            pivot_of_col[col] = Some(row);
            row += 1;
        }
    }

    let mut subset = Vec::new();
    let mut betas = Vec::new();
    for (col, pivot) in pivot_of_col.iter().enumerate() {
        if let Some(p) = pivot {
            let x = aug[*p][k].clone();
            if !x.is_zero() {
                subset.push(basis_idx[col]);
                betas.push(x);
            }
        }
    }
    subset.push(dep_idx);
    betas.push(-BigRational::from(BigInt::from(1)));
    (subset, betas)
}

/// Builds integer coefficients per the determinant construction: drop the
/// vector with the largest rational coefficient, complete the rest to a
/// non-degenerate square matrix with unit vectors, and solve exactly.
fn dependency_from_subset(
    vs: &[LetterVec],
    subset: &[usize],
    betas: &[BigRational],
    dim: usize,
) -> Result<Vec<i64>> {
    let u_pos = (0..subset.len())
        .max_by(|&a, &b| betas[a].abs().cmp(&betas[b].abs()))
        .unwrap();
    let u_idx = subset[u_pos];

    let mut cols: Vec<LetterVec> = Vec::new();
    let mut col_source: Vec<usize> = Vec::new();
    for (pos, &idx) in subset.iter().enumerate() {
        if pos != u_pos {
            cols.push(vs[idx].clone());
            col_source.push(idx);
        }
    }
    // Fill with unit vectors, keeping the matrix non-degenerate.
    for e in 0..dim {
        if cols.len() == dim {
            break;
        }
        let candidate = LetterVec::unit(dim, e);
        let mut trial = cols.clone();
        trial.push(candidate.clone());
        if rank(&trial) == trial.len() {
            cols.push(candidate);
        }
    }
    if cols.len() != dim {
        return Err(Error::Degenerate);
    }
    let m = IntMatrix::from_columns(cols)?;
    let det = m.determinant()?;
    let w = det_solve(&m, &vs[u_idx])?;

    let mut coeffs = vec![0i64; vs.len()];
    coeffs[u_idx] = det.checked_neg().ok_or_else(|| Error::Overflow("dependency".into()))?;
    for (j, &src) in col_source.iter().enumerate() {
        coeffs[src] = coeffs[src]
            .checked_add(w.entry(j))
            .ok_or_else(|| Error::Overflow("dependency".into()))?;
    }
    // Unit fill-in columns never participate: the dropped vector lies in the
    // span of the kept subset, so its representation there is unique.
    for j in col_source.len()..dim {
        debug_assert_eq!(w.entry(j), 0);
    }
    Ok(coeffs)
}

fn normalize_sign(coeffs: Vec<i64>, _n: usize) -> DependencyCoeffs {
    let has_pos = coeffs.iter().any(|&c| c > 0);
    let coeffs = if has_pos {
        coeffs
    } else {
        coeffs.into_iter().map(|c| -c).collect()
    };
    DependencyCoeffs { coeffs }
}

/// Solves `sum a_i cols[i] = b` over nonnegative integers.
///
/// Linearly independent columns get an exact rational solve followed by an
/// integrality and nonnegativity check. Dependent columns fall back to a
/// bounded exhaustive search and require a caller-supplied coefficient cap.
pub fn solve_nonneg(
    cols: &[LetterVec],
    b: &LetterVec,
    cap: Option<u64>,
) -> Result<Option<Vec<u64>>> {
    if cols.is_empty() {
        return Err(Error::InvalidInput("solve_nonneg: no columns".into()));
    }
    let dim = b.dim();
    if cols.iter().any(|c| c.dim() != dim) {
        return Err(Error::DimensionMismatch("solve_nonneg columns".into()));
    }
    if rank(cols) == cols.len() {
        return Ok(solve_independent(cols, b));
    }
    let cap = cap.ok_or(Error::MissingCap)?;
    Ok(search_bounded(cols, b, cap))
}

/// Exact rational solve for independent columns.
fn solve_independent(cols: &[LetterVec], b: &LetterVec) -> Option<Vec<u64>> {
    let dim = b.dim();
    let k = cols.len();
    let mut aug: Vec<Vec<BigRational>> = (0..dim)
        .map(|row| {
            let mut r: Vec<BigRational> = cols
                .iter()
                .map(|c| BigRational::from(BigInt::from(c.entry(row))))
                .collect();
            r.push(BigRational::from(BigInt::from(b.entry(row))));
            r
        })
        .collect();

    let mut row = 0;
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    for col in 0..k {
        if let Some(p) = (row..dim).find(|&r| !aug[r][col].is_zero()) {
            aug.swap(row, p);
            let inv = aug[row][col].clone();
            for x in aug[row].iter_mut() {
                *x /= &inv;
            }
            for r in 0..dim {
                if r != row && !aug[r][col].is_zero() {
                    let f = aug[r][col].clone();
                    for c in 0..=k {
                        let delta = &f * &aug[row][c];
                        aug[r][c] -= delta;
                    }
                }
            }
            pivots.push((row, col));
            row += 1;
        }
    }
    // Independent columns: every column has a pivot.
    if pivots.len() != k {
        return None;
    }
    // Rows below the pivots must have vanished for the system to be solvable.
    for r in row..dim {
        if !aug[r][k].is_zero() {
            return None;
        }
    }
    let mut alpha = vec![0u64; k];
    for &(r, c) in &pivots {
        let x = &aug[r][k];
        if x.is_negative() || !x.is_integer() {
            return None;
        }
        alpha[c] = x.to_integer().to_u64()?;
    }
    Some(alpha)
}

fn search_bounded(cols: &[LetterVec], b: &LetterVec, cap: u64) -> Option<Vec<u64>> {
    let mut alpha = vec![0u64; cols.len()];
    fn rec(
        cols: &[LetterVec],
        b: &LetterVec,
        cap: u64,
        i: usize,
        acc: &LetterVec,
        alpha: &mut Vec<u64>,
    ) -> bool {
        if i == cols.len() {
            return acc == b;
        }
        // Monotone prune only applies while every remaining column is
        // nonnegative.
        let rest_nonneg = cols[i..].iter().all(|c| c.is_nonneg());
        for a in 0..=cap {
            let cur = acc.add(&cols[i].scale(a as i64));
            if rest_nonneg && !cur.leq(b) {
                break;
            }
            alpha[i] = a;
            if rec(cols, b, cap, i + 1, &cur, alpha) {
                return true;
            }
        }
        false
    }
    if rec(cols, b, cap, 0, &LetterVec::zeros(b.dim()), &mut alpha) {
        Some(alpha)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv(v: &[i64]) -> LetterVec {
        LetterVec::from_vec(v.to_vec())
    }

    #[test]
    fn determinant_identity() {
        let m = IntMatrix::from_columns(vec![lv(&[1, 0]), lv(&[0, 1])]).unwrap();
        assert_eq!(m.determinant().unwrap(), 1);
    }

    #[test]
    fn determinant_hand_cofactor() {
        // columns (2,1),(1,2): 2*2 - 1*1 = 3 by cofactor expansion.
        let m = IntMatrix::from_columns(vec![lv(&[2, 1]), lv(&[1, 2])]).unwrap();
        assert_eq!(m.determinant().unwrap(), 3);
    }

    #[test]
    fn determinant_collinear() {
        let m = IntMatrix::from_columns(vec![lv(&[1, 1]), lv(&[2, 2])]).unwrap();
        assert_eq!(m.determinant().unwrap(), 0);
    }

    #[test]
    fn determinant_non_square() {
        let m = IntMatrix::from_columns(vec![lv(&[1, 0])]).unwrap();
        assert!(matches!(m.determinant(), Err(Error::NonSquare { .. })));
    }

    #[test]
    fn det_solve_identity() {
        let m = IntMatrix::from_columns(vec![lv(&[1, 0]), lv(&[0, 1])]).unwrap();
        let w = det_solve(&m, &lv(&[3, 5])).unwrap();
        assert_eq!(w, lv(&[3, 5]));
    }

    #[test]
    fn det_solve_scaled() {
        // det = 4, 4*(1,1) = (4,4), so w = (2,2).
        let m = IntMatrix::from_columns(vec![lv(&[2, 0]), lv(&[0, 2])]).unwrap();
        let w = det_solve(&m, &lv(&[1, 1])).unwrap();
        assert_eq!(w, lv(&[2, 2]));
    }

    #[test]
    fn det_solve_skewed() {
        // det = 3, M*(2,-1) = (3,0).
        let m = IntMatrix::from_columns(vec![lv(&[2, 1]), lv(&[1, 2])]).unwrap();
        let w = det_solve(&m, &lv(&[1, 0])).unwrap();
        assert_eq!(w, lv(&[2, -1]));
    }

    #[test]
    fn det_solve_degenerate() {
        let m = IntMatrix::from_columns(vec![lv(&[1, 1]), lv(&[2, 2])]).unwrap();
        assert!(matches!(det_solve(&m, &lv(&[1, 0])), Err(Error::Degenerate)));
    }

    #[test]
    fn dependency_collinear_pair() {
        let vs = vec![lv(&[1, 1]), lv(&[2, 2])];
        let dep = integer_dependency(&vs, 2).unwrap().unwrap();
        assert!(dep.verify(&vs));
        // 2*(1,1) - 1*(2,2) = 0 up to overall sign.
        assert_eq!(dep.coeffs[0].abs(), 2);
        assert_eq!(dep.coeffs[1].abs(), 1);
    }

    #[test]
    fn dependency_triangle() {
        // Brute-force small-coefficient search confirms (1,0)+(0,1)-(1,1)=0
        // is the unique minimal dependency up to sign.
        let vs = vec![lv(&[1, 0]), lv(&[0, 1]), lv(&[1, 1])];
        let dep = integer_dependency(&vs, 1).unwrap().unwrap();
        assert!(dep.verify(&vs));
        let c = &dep.coeffs;
        assert_eq!(c[0], c[1]);
        assert_eq!(c[2], -c[0]);
        assert_eq!(c[0].abs(), 1);
    }

    #[test]
    fn dependency_independent() {
        let vs = vec![lv(&[1, 0]), lv(&[0, 1])];
        assert!(integer_dependency(&vs, 1).unwrap().is_none());
    }

    #[test]
    fn solve_nonneg_unit_basis() {
        let cols = vec![lv(&[1, 0]), lv(&[0, 1])];
        let sol = solve_nonneg(&cols, &lv(&[3, 5]), None).unwrap().unwrap();
        assert_eq!(sol, vec![3, 5]);
    }

    #[test]
    fn solve_nonneg_parity_fails() {
        let cols = vec![lv(&[2, 0]), lv(&[0, 2])];
        assert!(solve_nonneg(&cols, &lv(&[3, 0]), None).unwrap().is_none());
    }

    #[test]
    fn solve_nonneg_exhaustive() {
        // Exhaustive search over alpha <= 5 confirms (2,1).
        let cols = vec![lv(&[1, 1]), lv(&[2, 0])];
        let sol = solve_nonneg(&cols, &lv(&[4, 2]), None).unwrap().unwrap();
        assert_eq!(sol, vec![2, 1]);
    }

    #[test]
    fn solve_nonneg_dependent_needs_cap() {
        let cols = vec![lv(&[1, 0]), lv(&[2, 0])];
        assert!(matches!(
            solve_nonneg(&cols, &lv(&[3, 0]), None),
            Err(Error::MissingCap)
        ));
        let sol = solve_nonneg(&cols, &lv(&[3, 0]), Some(5)).unwrap().unwrap();
        assert_eq!(
            sol[0] as i64 * 1 + sol[1] as i64 * 2,
            3,
            "recomposition must hit the target"
        );
    }
}
