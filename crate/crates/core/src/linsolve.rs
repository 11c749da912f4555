//! Compressed-row matrices and symmetric positive definite solvers.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinsolveError {
    #[error("non-positive pivot {value:e} at row {row}")]
    NotPositiveDefinite { row: usize, value: f64 },
    #[error("Jacobi preconditioner needs a positive diagonal (row {row} has {value:e})")]
    BadDiagonal { row: usize, value: f64 },
    #[error("dimension mismatch: matrix is {rows}x{cols}, vector has {len}")]
    Dimension { rows: usize, cols: usize, len: usize },
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries in the order they were supplied and drops
    /// entries that end up exactly zero.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_offsets = vec![0; nrows + 1];
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        let mut iter = triplets.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            assert!(r < nrows && c < ncols, "entry ({r}, {c}) outside {nrows}x{ncols}");
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if (r2, c2) != (r, c) {
                    break;
                }
                v += v2;
                iter.next();
            }
            if v != 0.0 {
                rows.push(r);
                col_indices.push(c);
                values.push(v);
            }
        }
        for &r in &rows {
            row_offsets[r + 1] += 1;
        }
        for i in 0..nrows {
            row_offsets[i + 1] += row_offsets[i];
        }
        CsrMatrix { nrows, ncols, row_offsets, col_indices, values }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[r.clone()].binary_search(&j) {
            Ok(pos) => self.values[r.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        for (i, yi) in y.iter_mut().enumerate() {
            let r = self.row_offsets[i]..self.row_offsets[i + 1];
            *yi = self.col_indices[r.clone()].iter().zip(&self.values[r]).map(|(&j, v)| v * x[j]).sum();
        }
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.mul_vec(y))
    }

    /// Exact (bitwise) symmetry.
    pub fn is_symmetric(&self) -> bool {
        self.nrows == self.ncols && self.triplets().all(|(i, j, v)| self.get(j, i) == v)
    }

    /// `alpha A + beta B` for matrices of equal shape.
    pub fn linear_combination(alpha: f64, a: &CsrMatrix, beta: f64, b: &CsrMatrix) -> CsrMatrix {
        assert_eq!((a.nrows, a.ncols), (b.nrows, b.ncols));
        let trips = a
            .triplets()
            .map(|(i, j, v)| (i, j, alpha * v))
            .chain(b.triplets().map(|(i, j, v)| (i, j, beta * v)))
            .collect();
        CsrMatrix::from_triplets(a.nrows, a.ncols, trips)
    }

    /// Rows `rows` and columns `cols` of `self`, renumbered densely.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut trips = Vec::new();
        for (ri, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                if col_map[c] != usize::MAX {
                    trips.push((ri, col_map[c], v));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), trips)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            d[i][j] = v;
        }
        d
    }
}

/// One rank-one term `weight (e_a - e_b)(e_a - e_b)^T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpTerm {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// `regular + Σ weight (e_a - e_b)(e_a - e_b)^T` with every index in at
/// most one jump term.
#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedMatrix {
    pub regular: CsrMatrix,
    pub jumps: Vec<JumpTerm>,
}

impl PenalizedMatrix {
    pub fn dim(&self) -> usize {
        self.regular.nrows
    }

    pub fn assemble(&self) -> CsrMatrix {
        let mut trips: Vec<(usize, usize, f64)> = self.regular.triplets().collect();
        for j in &self.jumps {
            trips.extend([(j.a, j.a, j.weight), (j.b, j.b, j.weight), (j.a, j.b, -j.weight), (j.b, j.a, -j.weight)]);
        }
        CsrMatrix::from_triplets(self.regular.nrows, self.regular.ncols, trips)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.regular.mul_vec(x);
        for j in &self.jumps {
            let d = j.weight * (x[j.a] - x[j.b]);
            y[j.a] += d;
            y[j.b] -= d;
        }
        y
    }

    /// `alpha M + beta self`.
    pub fn shifted(&self, alpha: f64, m: &CsrMatrix, beta: f64) -> PenalizedMatrix {
        PenalizedMatrix {
            regular: CsrMatrix::linear_combination(alpha, m, beta, &self.regular),
            jumps: self.jumps.iter().map(|j| JumpTerm { weight: beta * j.weight, ..*j }).collect(),
        }
    }

    /// Principal block on `keep`. Jump terms must not straddle `keep` and
    /// its complement.
    pub fn restrict(&self, keep: &[usize]) -> PenalizedMatrix {
        let mut map = vec![usize::MAX; self.regular.nrows];
        for (k, &i) in keep.iter().enumerate() {
            map[i] = k;
        }
        let jumps = self
            .jumps
            .iter()
            .filter_map(|j| match (map[j.a], map[j.b]) {
                (usize::MAX, usize::MAX) => None,
                (a, b) => {
                    assert!(a != usize::MAX && b != usize::MAX, "jump term ({}, {}) straddles the block", j.a, j.b);
                    Some(JumpTerm { a, b, weight: j.weight })
                }
            })
            .collect();
        PenalizedMatrix { regular: self.regular.submatrix(keep, keep), jumps }
    }
}

/// Change of variables `x = T y` pairing the two ends of every jump term:
/// `x_a = y_a + y_b`, `x_b = y_a - y_b`, other components unchanged.
///
/// In `y` the penalty becomes the diagonal `4 weight` on the `y_b` rows.
/// With very large weights this matters: the original coordinates store
/// `x_a` and `x_b` separately, their rounding errors enter the residual
/// multiplied by the weight, and the attainable relative residual stalls
/// far above useful tolerances.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBasis {
    pairs: Vec<(usize, usize)>,
    n: usize,
}

impl PairBasis {
    pub fn new(n: usize, jumps: &[JumpTerm]) -> Self {
        PairBasis { pairs: jumps.iter().map(|j| (j.a, j.b)).collect(), n }
    }

    /// `T^T A T` plus the transformed jump terms.
    pub fn transform_matrix(&self, a: &PenalizedMatrix) -> CsrMatrix {
        // each row of T has one or two entries
        let mut t_rows: Vec<[(usize, f64); 2]> = (0..self.n).map(|i| [(i, 1.0), (usize::MAX, 0.0)]).collect();
        for &(p, q) in &self.pairs {
            t_rows[p] = [(p, 1.0), (q, 1.0)];
            t_rows[q] = [(p, 1.0), (q, -1.0)];
        }
        let mut trips = Vec::new();
        for (i, j, v) in a.regular.triplets() {
            for &(k, si) in t_rows[i].iter().filter(|e| e.0 != usize::MAX) {
                for &(l, sj) in t_rows[j].iter().filter(|e| e.0 != usize::MAX) {
                    trips.push((k, l, si * sj * v));
                }
            }
        }
        for j in &a.jumps {
            trips.push((j.b, j.b, 4.0 * j.weight));
        }
        let m = CsrMatrix::from_triplets(self.n, self.n, trips);
        // symmetrize so the assembled operator is exactly symmetric
        let mt: Vec<(usize, usize, f64)> = m.triplets().map(|(i, j, v)| (i, j, 0.5 * (v + m.get(j, i)))).collect();
        CsrMatrix::from_triplets(self.n, self.n, mt)
    }

    /// `T^T b`.
    pub fn transform_rhs(&self, b: &[f64]) -> Vec<f64> {
        let mut out = b.to_vec();
        for &(p, q) in &self.pairs {
            out[p] = b[p] + b[q];
            out[q] = b[p] - b[q];
        }
        out
    }

    /// `T^{-1} x`.
    pub fn coordinates(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        for &(p, q) in &self.pairs {
            out[p] = 0.5 * (x[p] + x[q]);
            out[q] = 0.5 * (x[p] - x[q]);
        }
        out
    }

    /// `T y`.
    pub fn values(&self, y: &[f64]) -> Vec<f64> {
        let mut out = y.to_vec();
        for &(p, q) in &self.pairs {
            out[p] = y[p] + y[q];
            out[q] = y[p] - y[q];
        }
        out
    }
}

/// A penalized SPD system prepared once and solved for many right-hand
/// sides. CG runs in the [`PairBasis`] coordinates; the reported relative
/// residual is `‖T^T (b - A x)‖ / ‖T^T b‖`.
#[derive(Debug)]
pub struct PenalizedSolver {
    basis: PairBasis,
    matrix: CsrMatrix,
    precond: Preconditioner,
    settings: SolverSettings,
}

impl PenalizedSolver {
    pub fn new(a: &PenalizedMatrix, settings: SolverSettings) -> Result<Self, LinsolveError> {
        let basis = PairBasis::new(a.dim(), &a.jumps);
        let matrix = basis.transform_matrix(a);
        let precond = Preconditioner::build(settings.preconditioner, &matrix)?;
        Ok(PenalizedSolver { basis, matrix, precond, settings })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Solves `A x = b` starting from the guess already in `x`.
    pub fn solve(&self, b: &[f64], x: &mut [f64]) -> Result<SolveReport, LinsolveError> {
        let n = self.dim();
        if b.len() != n || x.len() != n {
            return Err(LinsolveError::Dimension { rows: n, cols: n, len: b.len().min(x.len()) });
        }
        let rhs = self.basis.transform_rhs(b);
        let mut y = self.basis.coordinates(x);
        let max_it = self.settings.max_iterations.unwrap_or(10 * n.max(1));
        let report = pcg(&self.matrix, &rhs, &mut y, &self.precond, self.settings.tolerance, max_it)?;
        x.copy_from_slice(&self.basis.values(&y));
        Ok(report)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PreconditionerKind {
    None,
    #[default]
    Jacobi,
    /// Exact sparse Cholesky factor of the matrix; CG then converges in one
    /// or two iterations and only polishes the residual.
    Cholesky,
}

impl std::str::FromStr for PreconditionerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "jacobi" => Ok(Self::Jacobi),
            "cholesky" => Ok(Self::Cholesky),
            other => Err(format!("unknown preconditioner '{other}' (none, jacobi, cholesky)")),
        }
    }
}

impl std::fmt::Display for PreconditionerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Jacobi => "jacobi",
            Self::Cholesky => "cholesky",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub tolerance: f64,
    /// `None` means ten times the number of unknowns.
    pub max_iterations: Option<usize>,
    pub preconditioner: PreconditionerKind,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { tolerance: 1e-10, max_iterations: None, preconditioner: PreconditionerKind::Jacobi }
    }
}

/// Sparse `L L^T` factorization of an SPD matrix.
pub struct SparseCholesky {
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
    n: usize,
}

impl std::fmt::Debug for SparseCholesky {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseCholesky").field("n", &self.n).finish()
    }
}

impl SparseCholesky {
    pub fn new(a: &CsrMatrix) -> Result<Self, LinsolveError> {
        let n = a.nrows();
        // Symmetric, so the CSR lower triangle is the CSC upper triangle.
        let trips: Vec<Triplet<usize, usize, f64>> =
            a.triplets().filter(|&(i, j, _)| i >= j).map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips)
            .map_err(|e| LinsolveError::Factorization(format!("{e:?}")))?;
        let llt = mat
            .sp_cholesky(faer::Side::Lower)
            .map_err(|e| LinsolveError::Factorization(format!("{e:?}")))?;
        Ok(SparseCholesky { llt, n })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = faer::Col::<f64>::from_fn(self.n, |i| b[i]);
        let x = self.llt.solve(&rhs);
        (0..self.n).map(|i| x[i]).collect()
    }
}

/// A preconditioner bound to one matrix.
#[derive(Debug)]
pub enum Preconditioner {
    Identity,
    Jacobi(Vec<f64>),
    Cholesky(SparseCholesky),
}

impl Preconditioner {
    pub fn build(kind: PreconditionerKind, a: &CsrMatrix) -> Result<Self, LinsolveError> {
        match kind {
            PreconditionerKind::None => Ok(Preconditioner::Identity),
            PreconditionerKind::Jacobi => {
                let d = a.diagonal();
                if let Some((row, &value)) = d.iter().enumerate().find(|(_, &v)| v <= 0.0 || !v.is_finite()) {
                    return Err(LinsolveError::BadDiagonal { row, value });
                }
                Ok(Preconditioner::Jacobi(d.iter().map(|v| 1.0 / v).collect()))
            }
            PreconditionerKind::Cholesky => Ok(Preconditioner::Cholesky(SparseCholesky::new(a)?)),
        }
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Preconditioner::Identity => z.copy_from_slice(r),
            Preconditioner::Jacobi(inv) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * di;
                }
            }
            Preconditioner::Cholesky(f) => z.copy_from_slice(&f.solve(r)),
        }
    }
}

/// Preconditioned conjugate gradients from the initial guess in `x`.
///
/// Convergence is declared on the true residual `‖b - A x‖ / ‖b‖`; when the
/// recursively updated residual says "done" but the true one disagrees, the
/// iteration restarts from the true residual.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    precond: &Preconditioner,
    tolerance: f64,
    max_iterations: usize,
) -> Result<SolveReport, LinsolveError> {
    let n = a.nrows();
    if b.len() != n || x.len() != n || a.ncols() != n {
        return Err(LinsolveError::Dimension { rows: n, cols: a.ncols(), len: b.len() });
    }
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveReport { iterations: 0, relative_residual: 0.0, converged: true });
    }
    let mut ax = vec![0.0; n];
    let true_residual = |x: &[f64], ax: &mut Vec<f64>| -> Vec<f64> {
        a.mul_vec_into(x, ax);
        b.iter().zip(ax.iter()).map(|(bi, ai)| bi - ai).collect()
    };
    let mut r = true_residual(x, &mut ax);
    let mut rel = norm(&r) / bnorm;
    if rel <= tolerance {
        return Ok(SolveReport { iterations: 0, relative_residual: rel, converged: true });
    }
    let mut z = vec![0.0; n];
    let mut ap = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    while iterations < max_iterations {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(LinsolveError::NotPositiveDefinite { row: iterations, value: pap });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        iterations += 1;
        rel = norm(&r) / bnorm;
        if rel <= tolerance {
            r = true_residual(x, &mut ax);
            rel = norm(&r) / bnorm;
            if rel <= tolerance {
                return Ok(SolveReport { iterations, relative_residual: rel, converged: true });
            }
            precond.apply(&r, &mut z);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        precond.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let r = true_residual(x, &mut ax);
    let rel = norm(&r) / bnorm;
    Ok(SolveReport { iterations, relative_residual: rel, converged: rel <= tolerance })
}

/// CG from a zero initial guess.
pub fn cg_solve(
    a: &CsrMatrix,
    b: &[f64],
    tolerance: f64,
    max_iterations: usize,
    preconditioner: PreconditionerKind,
) -> Result<(Vec<f64>, SolveReport), LinsolveError> {
    let precond = Preconditioner::build(preconditioner, a)?;
    let mut x = vec![0.0; a.nrows()];
    let report = pcg(a, b, &mut x, &precond, tolerance, max_iterations)?;
    Ok((x, report))
}

/// Dense Cholesky solve (row-major input). Intended for small systems and
/// test oracles.
pub fn dense_cholesky(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>, LinsolveError> {
    let n = a.len();
    if b.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(LinsolveError::Dimension { rows: n, cols: a.first().map_or(0, Vec::len), len: b.len() });
    }
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(LinsolveError::NotPositiveDefinite { row: j, value: d });
        }
        let djj = d.sqrt();
        l[j][j] = djj;
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / djj;
        }
    }
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i][k] * y[k];
        }
        y[i] /= l[i][i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k][i] * y[k];
        }
        y[i] /= l[i][i];
    }
    Ok(y)
}
