//! Small dense least-squares kernels.
//!
//! The regression designs here have a few hundred columns but many repeated
//! rows, so the solvers work on compressed row sets: identical design rows
//! are merged with weight `sqrt(n)` and their mean response. Column-major
//! storage keeps the Householder sweeps cache friendly.

use std::collections::HashMap;

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nrows + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.nrows + i] = v;
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Householder QR computed column by column in the given order. A column
/// whose remaining norm falls to `tol` times its original norm is declared
/// collinear with the columns before it and skipped, so later columns are
/// the ones dropped.
#[derive(Debug, Clone)]
pub struct HouseholderQr {
    nrows: usize,
    /// Reflector vectors `v` (length `nrows - i`) with `H = I - 2 v v'`.
    reflectors: Vec<Vec<f64>>,
    /// Upper-triangular factor restricted to kept columns, column-major by kept index.
    r: Vec<Vec<f64>>,
    kept: Vec<usize>,
    dropped: Vec<usize>,
}

impl HouseholderQr {
    pub fn new(a: &DenseMatrix, tol: f64) -> Self {
        let m = a.nrows();
        let mut work = a.clone();
        let mut reflectors: Vec<Vec<f64>> = Vec::new();
        let mut r = Vec::new();
        let mut kept = Vec::new();
        let mut dropped = Vec::new();
        for j in 0..a.ncols() {
            let original = norm(a.col(j));
            let rank = reflectors.len();
            let col = work.col_mut(j);
            let tail = norm(&col[rank..]);
            if original == 0.0 || tail <= tol * original || rank == m {
                dropped.push(j);
                continue;
            }
            let alpha = if col[rank] > 0.0 { -tail } else { tail };
            let mut v: Vec<f64> = col[rank..].to_vec();
            v[0] -= alpha;
            let vn = norm(&v);
            for x in &mut v {
                *x /= vn;
            }
            let mut rcol = col[..rank].to_vec();
            rcol.push(alpha);
            r.push(rcol);
            // apply to remaining columns
            for jj in j + 1..a.ncols() {
                let c = &mut work.col_mut(jj)[rank..];
                let s = 2.0 * dot(&v, c);
                for (ci, vi) in c.iter_mut().zip(&v) {
                    *ci -= s * vi;
                }
            }
            reflectors.push(v);
            kept.push(j);
        }
        Self {
            nrows: m,
            reflectors,
            r,
            kept,
            dropped,
        }
    }

    pub fn rank(&self) -> usize {
        self.kept.len()
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    /// `b <- Q' b`
    pub fn apply_qt(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.nrows);
        for (i, v) in self.reflectors.iter().enumerate() {
            let c = &mut b[i..];
            let s = 2.0 * dot(v, c);
            for (ci, vi) in c.iter_mut().zip(v) {
                *ci -= s * vi;
            }
        }
    }

    /// `b <- Q b`
    pub fn apply_q(&self, b: &mut [f64]) {
        for (i, v) in self.reflectors.iter().enumerate().rev() {
            let c = &mut b[i..];
            let s = 2.0 * dot(v, c);
            for (ci, vi) in c.iter_mut().zip(v) {
                *ci -= s * vi;
            }
        }
    }

    /// Orthogonal projection of `b` onto the span of the kept columns.
    pub fn project(&self, b: &mut [f64]) {
        self.apply_qt(b);
        for x in &mut b[self.rank()..] {
            *x = 0.0;
        }
        self.apply_q(b);
    }

    /// Least-squares coefficients for the kept columns (in kept order) and
    /// the residual sum of squares.
    pub fn solve(&self, b: &[f64]) -> (Vec<f64>, f64) {
        let mut qtb = b.to_vec();
        self.apply_qt(&mut qtb);
        let n = self.rank();
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = qtb[i];
            for (j, xj) in x.iter().enumerate().skip(i + 1) {
                s -= self.r[j][i] * xj;
            }
            x[i] = s / self.r[i][i];
        }
        let rss = qtb[n..].iter().map(|v| v * v).sum();
        (x, rss)
    }
}

/// Least-squares solution over all columns; dropped columns are `None`.
#[derive(Debug, Clone)]
pub struct LsSolution {
    pub coef: Vec<Option<f64>>,
    pub dropped: Vec<usize>,
    pub rss: f64,
}

pub fn lstsq(a: &DenseMatrix, b: &[f64], tol: f64) -> LsSolution {
    let qr = HouseholderQr::new(a, tol);
    let (x, rss) = qr.solve(b);
    let mut coef = vec![None; a.ncols()];
    for (xi, &j) in x.iter().zip(qr.kept()) {
        coef[j] = Some(*xi);
    }
    LsSolution {
        coef,
        dropped: qr.dropped().to_vec(),
        rss,
    }
}

/// Sparse row: sorted `(column, value)` pairs.
pub type SparseRow = Vec<(usize, f64)>;

/// Rows with identical keys merged. `weights[g] = sqrt(count)`, `ybar[g]` is
/// the group mean response and `within_ss` the response variation lost by
/// merging (add it to any residual sum of squares).
#[derive(Debug, Clone)]
pub struct Compressed<K> {
    pub keys: Vec<K>,
    pub counts: Vec<usize>,
    pub ybar: Vec<f64>,
    pub within_ss: f64,
}

impl<K> Compressed<K> {
    pub fn weights(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| (c as f64).sqrt()).collect()
    }
}

/// Group rows by key, preserving first-appearance order.
pub fn compress<K, I>(rows: I) -> Compressed<K>
where
    K: std::hash::Hash + Eq + Clone,
    I: IntoIterator<Item = (K, f64)>,
{
    let mut index: HashMap<K, usize> = HashMap::new();
    let mut keys = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut mean: Vec<f64> = Vec::new();
    let mut m2: Vec<f64> = Vec::new();
    for (k, y) in rows {
        let g = *index.entry(k.clone()).or_insert_with(|| {
            keys.push(k);
            counts.push(0);
            mean.push(0.0);
            m2.push(0.0);
            counts.len() - 1
        });
        counts[g] += 1;
        let d = y - mean[g];
        mean[g] += d / counts[g] as f64;
        m2[g] += d * (y - mean[g]);
    }
    Compressed {
        keys,
        counts,
        ybar: mean,
        within_ss: m2.iter().sum(),
    }
}

/// Weighted dense matrix from sparse rows: row `g` scaled by `w[g]`.
pub fn weighted_dense(rows: &[SparseRow], w: &[f64], ncols: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(rows.len(), ncols);
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            m.set(i, j, v * w[i]);
        }
    }
    m
}

/// Symmetric positive semi-definite matrix in packed row-major form.
#[derive(Debug, Clone)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Adds `v` to (i, j) and, off the diagonal, to (j, i).
    pub fn add_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
        if i != j {
            self.data[j * self.n + i] += v;
        }
    }

    fn restricted(&self, idx: &[usize]) -> Vec<Vec<f64>> {
        idx.iter()
            .map(|&i| idx.iter().map(|&j| self.get(i, j)).collect())
            .collect()
    }
}

/// Cholesky factorization that skips any pivot whose Schur complement falls
/// below `tol` times the original diagonal; skipped columns are treated as
/// collinear with the ones before them.
#[derive(Debug, Clone)]
pub struct CholeskyDrop {
    l: Vec<Vec<f64>>,
    kept: Vec<usize>,
    dropped: Vec<usize>,
}

impl CholeskyDrop {
    pub fn new(a: &SymMatrix, tol: f64) -> Self {
        let mut l: Vec<Vec<f64>> = Vec::new();
        let mut kept = Vec::new();
        let mut dropped = Vec::new();
        for j in 0..a.n() {
            let diag = a.get(j, j);
            let mut lj = vec![0.0; kept.len()];
            for p in 0..kept.len() {
                let mut s = a.get(j, kept[p]);
                for q in 0..p {
                    s -= lj[q] * l[p][q];
                }
                lj[p] = s / l[p][p];
            }
            let schur = diag - lj.iter().map(|x| x * x).sum::<f64>();
            if diag <= 0.0 || schur <= tol * diag {
                dropped.push(j);
                continue;
            }
            lj.push(schur.sqrt());
            l.push(lj);
            kept.push(j);
        }
        Self { l, kept, dropped }
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    /// Solve the kept subsystem; `b` is indexed by original column.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.kept.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = b[self.kept[i]];
            for q in 0..i {
                s -= self.l[i][q] * y[q];
            }
            y[i] = s / self.l[i][i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for p in i + 1..n {
                s -= self.l[p][i] * y[p];
            }
            y[i] = s / self.l[i][i];
        }
        y
    }
}

fn matvec(a: &[Vec<f64>], x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(a) {
        *o = dot(row, x);
    }
}

/// Jacobi-preconditioned conjugate gradient on the submatrix `idx` of `a`.
/// Returns the solution and whether the relative residual reached `tol`.
pub fn pcg(a: &SymMatrix, b: &[f64], idx: &[usize], tol: f64, max_iter: usize) -> (Vec<f64>, bool) {
    let m = a.restricted(idx);
    let rhs: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
    let n = idx.len();
    let dinv: Vec<f64> = (0..n).map(|i| 1.0 / m[i][i]).collect();
    let mut x = vec![0.0; n];
    let mut r = rhs.clone();
    let bnorm = norm(&rhs).max(f64::MIN_POSITIVE);
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for _ in 0..max_iter {
        if norm(&r) <= tol * bnorm {
            return (x, true);
        }
        matvec(&m, &p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let ok = norm(&r) <= tol * bnorm;
    (x, ok)
}
