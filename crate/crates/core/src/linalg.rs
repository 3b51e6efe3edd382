//! Compressed sparse row storage, composable linear operators, and Krylov
//! solvers (preconditioned CG for SPD systems, MINRES for symmetric
//! indefinite ones).

use serde::Deserialize;

use crate::error::{Error, Result};

/// Compressed sparse row matrix with strictly increasing column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Build from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let coords: Vec<(usize, usize)> = triplets.iter().map(|&(i, j, _)| (i, j)).collect();
        let (mut m, slots) = Self::pattern(n_rows, n_cols, &coords)?;
        for (&slot, &(_, _, v)) in slots.iter().zip(triplets) {
            m.values[slot] += v;
        }
        Ok(m)
    }

    /// Build an all-zero matrix with the sparsity pattern covering `coords`,
    /// together with the value slot of each input coordinate. Scattering
    /// element contributions through the slot map avoids re-sorting on every
    /// reassembly.
    pub fn pattern(
        n_rows: usize,
        n_cols: usize,
        coords: &[(usize, usize)],
    ) -> Result<(Self, Vec<usize>)> {
        if let Some(&(i, j)) = coords.iter().find(|&&(i, j)| i >= n_rows || j >= n_cols) {
            return Err(Error::InvalidInput(format!(
                "entry ({i}, {j}) outside a {n_rows}x{n_cols} matrix"
            )));
        }
        let mut order: Vec<usize> = (0..coords.len()).collect();
        order.sort_unstable_by_key(|&k| coords[k]);

        let mut row_offsets = vec![0usize; n_rows + 1];
        let mut col_indices = Vec::new();
        let mut slots = vec![0usize; coords.len()];
        let mut last: Option<(usize, usize)> = None;
        for &k in &order {
            let c = coords[k];
            if last != Some(c) {
                col_indices.push(c.1);
                row_offsets[c.0 + 1] += 1;
                last = Some(c);
            }
            slots[k] = col_indices.len() - 1;
        }
        for i in 0..n_rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        let nnz = col_indices.len();
        Ok((
            Self {
                n_rows,
                n_cols,
                row_offsets,
                col_indices,
                values: vec![0.0; nnz],
            },
            slots,
        ))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self {
            n_rows: d.len(),
            n_cols: d.len(),
            row_offsets: (0..=d.len()).collect(),
            col_indices: (0..d.len()).collect(),
            values: d.to_vec(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Iterate over `(col, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    /// `A + diag(d)`
    pub fn with_added_diagonal(&self, d: &[f64]) -> Result<Self> {
        if d.len() != self.n_rows || self.n_rows != self.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows,
                found: d.len(),
            });
        }
        self.linear_combination(1.0, &Self::from_diagonal(d), 1.0)
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                found: x.len(),
            });
        }
        let mut y = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x` without dimension checks.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            *yi = acc;
        }
    }

    /// `a * self + b * other` over the union of both patterns.
    pub fn linear_combination(&self, a: f64, other: &SparseMatrix, b: f64) -> Result<SparseMatrix> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows,
                found: other.n_rows,
            });
        }
        if self.row_offsets == other.row_offsets && self.col_indices == other.col_indices {
            let mut out = self.clone();
            for (v, w) in out.values.iter_mut().zip(&other.values) {
                *v = a * *v + b * w;
            }
            return Ok(out);
        }
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n_rows {
            triplets.extend(self.row(i).map(|(j, v)| (i, j, a * v)));
            triplets.extend(other.row(i).map(|(j, v)| (i, j, b * v)));
        }
        SparseMatrix::from_triplets(self.n_rows, self.n_cols, &triplets)
    }

    pub fn scaled(&self, a: f64) -> SparseMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= a);
        out
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += a * x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Anything that can act on a vector.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// `y = A x`. Fallible because some operators wrap an inner solve.
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()>;

    /// Diagonal (or an SPD approximation of it) for Jacobi preconditioning.
    fn diagonal(&self) -> Option<Vec<f64>> {
        None
    }

    /// The operator as an explicit matrix, when it is one.
    fn as_matrix(&self) -> Option<&SparseMatrix> {
        None
    }
}

impl LinearOperator for SparseMatrix {
    fn dim(&self) -> usize {
        self.n_rows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.n_cols || y.len() != self.n_rows {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                found: x.len(),
            });
        }
        self.spmv_into(x, y);
        Ok(())
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        Some(SparseMatrix::diagonal(self))
    }

    fn as_matrix(&self) -> Option<&SparseMatrix> {
        Some(self)
    }
}

/// `sum_k c_k A_k`
pub struct Combination<'a> {
    terms: Vec<(f64, &'a dyn LinearOperator)>,
}

impl<'a> Combination<'a> {
    pub fn new(terms: Vec<(f64, &'a dyn LinearOperator)>) -> Result<Self> {
        let Some(&(_, first)) = terms.first() else {
            return Err(Error::InvalidInput("empty operator combination".into()));
        };
        let n = first.dim();
        if let Some(&(_, bad)) = terms.iter().find(|(_, t)| t.dim() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.dim(),
            });
        }
        Ok(Self { terms })
    }
}

impl LinearOperator for Combination<'_> {
    fn dim(&self) -> usize {
        self.terms[0].1.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        y.iter_mut().for_each(|v| *v = 0.0);
        let mut tmp = vec![0.0; y.len()];
        for &(c, op) in &self.terms {
            op.apply(x, &mut tmp)?;
            axpy(c, &tmp, y);
        }
        Ok(())
    }

    /// Sum of the diagonals of the terms that expose one. Terms without a
    /// diagonal are skipped, which still yields an SPD preconditioner as long
    /// as one explicit SPD term is present.
    fn diagonal(&self) -> Option<Vec<f64>> {
        let mut acc: Option<Vec<f64>> = None;
        for &(c, op) in &self.terms {
            if let Some(d) = op.diagonal() {
                let a = acc.get_or_insert_with(|| vec![0.0; d.len()]);
                axpy(c, &d, a);
            }
        }
        acc.filter(|d| d.iter().all(|&v| v > 0.0))
    }
}

/// Applies `A^{-1}` for an SPD sparse matrix by running CG.
pub struct InverseOperator<'a> {
    matrix: &'a SparseMatrix,
    config: SolverConfig,
    preconditioner: PreparedPreconditioner,
}

impl<'a> InverseOperator<'a> {
    pub fn new(matrix: &'a SparseMatrix, config: SolverConfig) -> Self {
        let preconditioner = PreparedPreconditioner::for_matrix(matrix, config.preconditioner);
        Self {
            matrix,
            config,
            preconditioner,
        }
    }
}

impl LinearOperator for InverseOperator<'_> {
    fn dim(&self) -> usize {
        self.matrix.n_rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let sol = pcg_solve(self.matrix, x, &self.config, None, &self.preconditioner)?;
        y.copy_from_slice(&sol.x);
        Ok(())
    }
}

/// `B^T A B` for a symmetric sparse `B` (so `B A B`).
pub struct Sandwich<'a> {
    outer: &'a SparseMatrix,
    inner: &'a dyn LinearOperator,
}

impl<'a> Sandwich<'a> {
    pub fn new(outer: &'a SparseMatrix, inner: &'a dyn LinearOperator) -> Self {
        Self { outer, inner }
    }
}

impl LinearOperator for Sandwich<'_> {
    fn dim(&self) -> usize {
        self.outer.n_rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let bx = self.outer.spmv(x)?;
        let mut abx = vec![0.0; bx.len()];
        self.inner.apply(&bx, &mut abx)?;
        self.outer.apply(&abx, y)
    }
}

/// `A + c u v^T`
pub struct RankOneUpdate<'a> {
    base: &'a dyn LinearOperator,
    coeff: f64,
    u: &'a [f64],
    v: &'a [f64],
}

impl<'a> RankOneUpdate<'a> {
    pub fn new(
        base: &'a dyn LinearOperator,
        coeff: f64,
        u: &'a [f64],
        v: &'a [f64],
    ) -> Result<Self> {
        for len in [u.len(), v.len()] {
            if len != base.dim() {
                return Err(Error::DimensionMismatch {
                    expected: base.dim(),
                    found: len,
                });
            }
        }
        Ok(Self { base, coeff, u, v })
    }
}

impl LinearOperator for RankOneUpdate<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.base.apply(x, y)?;
        axpy(self.coeff * dot(self.v, x), self.u, y);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    None,
    Jacobi,
    /// Zero fill-in incomplete Cholesky; falls back to Jacobi when the
    /// operator has no explicit matrix or the factorization breaks down.
    #[default]
    IncompleteCholesky,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub rel_tolerance: f64,
    pub max_iterations: usize,
    pub preconditioner: Preconditioner,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rel_tolerance: 1e-10,
            max_iterations: 10_000,
            preconditioner: Preconditioner::IncompleteCholesky,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tolerance > 0.0) {
            return Err(Error::InvalidInput("rel_tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn with_tolerance(mut self, rel_tolerance: f64) -> Self {
        self.rel_tolerance = rel_tolerance;
        self
    }
}

/// Zero fill-in incomplete Cholesky factor `L` with `A ~ L L^T`, stored as
/// the CSR lower triangle (diagonal last in each row).
#[derive(Debug, Clone)]
pub struct IncompleteCholesky {
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl IncompleteCholesky {
    /// Factor the lower triangle of a symmetric matrix on its own pattern.
    /// Fails if a pivot is not positive.
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        if a.n_rows != a.n_cols {
            return Err(Error::DimensionMismatch {
                expected: a.n_rows,
                found: a.n_cols,
            });
        }
        let n = a.n_rows;
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for i in 0..n {
            let mut has_diagonal = false;
            for k in a.row_offsets[i]..a.row_offsets[i + 1] {
                let j = a.col_indices[k];
                if j <= i {
                    col_indices.push(j);
                    values.push(a.values[k]);
                    has_diagonal |= j == i;
                }
            }
            if !has_diagonal {
                return Err(Error::InvalidState(format!(
                    "incomplete Cholesky: row {i} has no diagonal entry"
                )));
            }
            row_offsets.push(col_indices.len());
        }

        for i in 0..n {
            let (start, end) = (row_offsets[i], row_offsets[i + 1]);
            for k in start..end - 1 {
                let j = col_indices[k];
                // Sparse dot of rows i and j over columns < j.
                let (mut a_k, mut b_k) = (start, row_offsets[j]);
                let b_end = row_offsets[j + 1] - 1;
                let mut sum = 0.0;
                while a_k < k && b_k < b_end {
                    match col_indices[a_k].cmp(&col_indices[b_k]) {
                        std::cmp::Ordering::Less => a_k += 1,
                        std::cmp::Ordering::Greater => b_k += 1,
                        std::cmp::Ordering::Equal => {
                            sum += values[a_k] * values[b_k];
                            a_k += 1;
                            b_k += 1;
                        }
                    }
                }
                values[k] = (values[k] - sum) / values[b_end];
            }
            let pivot = values[end - 1] - values[start..end - 1].iter().map(|v| v * v).sum::<f64>();
            if !(pivot > 0.0) {
                return Err(Error::InvalidState(format!(
                    "incomplete Cholesky: non-positive pivot {pivot:.3e} in row {i}"
                )));
            }
            values[end - 1] = pivot.sqrt();
        }
        Ok(Self {
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.row_offsets.len() - 1
    }

    /// `z = (L L^T)^{-1} r`
    pub fn solve(&self, r: &[f64], z: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let (start, end) = (self.row_offsets[i], self.row_offsets[i + 1]);
            let mut acc = r[i];
            for k in start..end - 1 {
                acc -= self.values[k] * z[self.col_indices[k]];
            }
            z[i] = acc / self.values[end - 1];
        }
        for i in (0..n).rev() {
            let (start, end) = (self.row_offsets[i], self.row_offsets[i + 1]);
            z[i] /= self.values[end - 1];
            let zi = z[i];
            for k in start..end - 1 {
                z[self.col_indices[k]] -= self.values[k] * zi;
            }
        }
    }
}

/// A preconditioner ready to apply inside CG.
#[derive(Debug, Clone)]
pub enum PreparedPreconditioner {
    Identity,
    /// Inverse diagonal.
    Jacobi(Vec<f64>),
    IncompleteCholesky(IncompleteCholesky),
}

impl PreparedPreconditioner {
    /// Build the requested kind for `op`, degrading from incomplete Cholesky
    /// to Jacobi to the identity when the operator does not support it.
    pub fn for_operator(op: &dyn LinearOperator, kind: Preconditioner) -> Self {
        match (kind, op.as_matrix()) {
            (Preconditioner::IncompleteCholesky, Some(m)) => Self::for_matrix(m, kind),
            (Preconditioner::None, _) => Self::Identity,
            _ => op.diagonal().map_or(Self::Identity, Self::jacobi),
        }
    }

    /// Build the requested kind from an explicit SPD matrix, which may be an
    /// approximation of the operator being solved.
    pub fn for_matrix(m: &SparseMatrix, kind: Preconditioner) -> Self {
        match kind {
            Preconditioner::None => Self::Identity,
            Preconditioner::Jacobi => Self::jacobi(m.diagonal()),
            Preconditioner::IncompleteCholesky => match IncompleteCholesky::new(m) {
                Ok(ic) => Self::IncompleteCholesky(ic),
                Err(_) => Self::jacobi(m.diagonal()),
            },
        }
    }

    fn jacobi(d: Vec<f64>) -> Self {
        if d.iter().all(|&v| v > 0.0) {
            Self::Jacobi(d.iter().map(|v| 1.0 / v).collect())
        } else {
            Self::Identity
        }
    }

    fn dim(&self) -> Option<usize> {
        match self {
            Self::Identity => None,
            Self::Jacobi(d) => Some(d.len()),
            Self::IncompleteCholesky(ic) => Some(ic.dim()),
        }
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Self::Identity => z.copy_from_slice(r),
            Self::Jacobi(inv) => z
                .iter_mut()
                .zip(r.iter().zip(inv))
                .for_each(|(zi, (ri, di))| *zi = ri * di),
            Self::IncompleteCholesky(ic) => ic.solve(r, z),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual `||b - A x|| / ||b||`.
    pub residual: f64,
}

fn true_residual(op: &dyn LinearOperator, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let mut r = vec![0.0; b.len()];
    op.apply(x, &mut r)?;
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    Ok(r)
}

/// Preconditioned conjugate gradients for an SPD operator.
///
/// Converged when `||b - A x||_2 <= rel_tolerance * ||b||_2`, checked on the
/// true residual; a drifted recursive residual triggers a restart from the
/// current iterate.
pub fn cg_solve(
    op: &dyn LinearOperator,
    b: &[f64],
    config: &SolverConfig,
    x0: Option<&[f64]>,
) -> Result<Solution> {
    let preconditioner = PreparedPreconditioner::for_operator(op, config.preconditioner);
    pcg_solve(op, b, config, x0, &preconditioner)
}

/// [`cg_solve`] with a caller-supplied preconditioner; `config.preconditioner`
/// is ignored.
pub fn pcg_solve(
    op: &dyn LinearOperator,
    b: &[f64],
    config: &SolverConfig,
    x0: Option<&[f64]>,
    preconditioner: &PreparedPreconditioner,
) -> Result<Solution> {
    config.validate()?;
    let n = op.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok(Solution {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let target = config.rel_tolerance * b_norm;

    if preconditioner.dim().is_some_and(|d| d != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: preconditioner.dim().unwrap_or(0),
        });
    }
    let precondition = |r: &[f64], z: &mut [f64]| preconditioner.apply(r, z);

    let mut x = match x0 {
        Some(x0) if x0.len() == n => x0.to_vec(),
        Some(x0) => {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: x0.len(),
            })
        }
        None => vec![0.0; n],
    };

    let mut iterations = 0;
    let mut z = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut r = true_residual(op, b, &x)?;
    loop {
        let mut r_norm = norm2(&r);
        if r_norm <= target {
            return Ok(Solution {
                x,
                iterations,
                residual: r_norm / b_norm,
            });
        }
        if iterations >= config.max_iterations {
            return Err(Error::NotConverged {
                solver: "CG",
                iterations,
                residual: r_norm / b_norm,
                target: config.rel_tolerance,
            });
        }
        precondition(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while iterations < config.max_iterations {
            op.apply(&p, &mut ap)?;
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::InvalidState(format!(
                    "CG encountered non-positive curvature {pap:.3e}; operator not SPD"
                )));
            }
            let step = rz / pap;
            axpy(step, &p, &mut x);
            axpy(-step, &ap, &mut r);
            iterations += 1;
            r_norm = norm2(&r);
            if r_norm <= target {
                break;
            }
            precondition(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
        }
        r = true_residual(op, b, &x)?;
    }
}

/// MINRES for symmetric (possibly indefinite) operators, unpreconditioned.
pub fn minres_solve(op: &dyn LinearOperator, b: &[f64], config: &SolverConfig) -> Result<Solution> {
    config.validate()?;
    let n = op.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok(Solution {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let target = config.rel_tolerance * b_norm;
    let mut x = vec![0.0; n];
    let mut iterations = 0;

    // Restart loop guards against recursive-residual drift.
    loop {
        let r0 = true_residual(op, b, &x)?;
        let beta1 = norm2(&r0);
        if beta1 <= target {
            return Ok(Solution {
                x,
                iterations,
                residual: beta1 / b_norm,
            });
        }
        if iterations >= config.max_iterations {
            return Err(Error::NotConverged {
                solver: "MINRES",
                iterations,
                residual: beta1 / b_norm,
                target: config.rel_tolerance,
            });
        }

        let mut r1 = r0.clone();
        let mut r2 = r0;
        let mut y = vec![0.0; n];
        let mut v = vec![0.0; n];
        let mut w = vec![0.0; n];
        let mut w1;
        let mut w2 = vec![0.0; n];
        let (mut beta, mut oldb) = (beta1, 0.0);
        let (mut dbar, mut epsln) = (0.0, 0.0);
        let mut phibar = beta1;
        let (mut cs, mut sn) = (-1.0, 0.0);
        let mut local = 0;
        while iterations < config.max_iterations {
            local += 1;
            iterations += 1;
            let s = 1.0 / beta;
            v.iter_mut().zip(&r2).for_each(|(vi, ri)| *vi = s * ri);
            op.apply(&v, &mut y)?;
            if local >= 2 {
                axpy(-beta / oldb, &r1, &mut y);
            }
            let alfa = dot(&v, &y);
            axpy(-alfa / beta, &r2, &mut y);
            std::mem::swap(&mut r1, &mut r2);
            r2.copy_from_slice(&y);
            oldb = beta;
            beta = norm2(&r2);

            let oldeps = epsln;
            let delta = cs * dbar + sn * alfa;
            let gbar = sn * dbar - cs * alfa;
            epsln = sn * beta;
            dbar = -cs * beta;
            let gamma = (gbar * gbar + beta * beta).sqrt().max(f64::EPSILON);
            cs = gbar / gamma;
            sn = beta / gamma;
            let phi = cs * phibar;
            phibar *= sn;

            w1 = std::mem::take(&mut w2);
            w2 = w.clone();
            for k in 0..n {
                w[k] = (v[k] - oldeps * w1[k] - delta * w2[k]) / gamma;
            }
            axpy(phi, &w, &mut x);

            if phibar.abs() <= target || beta == 0.0 {
                break;
            }
        }
    }
}
