//! Sparse symmetric matrices with a fixed pattern and the solvers used by
//! the time stepper: an envelope (profile) Cholesky factorization under a
//! reverse Cuthill-McKee ordering, and Jacobi-preconditioned conjugate
//! gradients.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Compressed sparse row matrix. Column indices are sorted within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the given (row-wise) sparsity pattern.
    pub fn from_pattern(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut cols in rows {
            cols.sort_unstable();
            cols.dedup();
            col_idx.extend(cols);
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        Self { n, row_ptr, col_idx, values }
    }

    pub fn from_dense(a: &[Vec<f64>]) -> Self {
        let rows = a
            .iter()
            .map(|r| (0..r.len()).filter(|&j| r[j] != 0.0).collect())
            .collect();
        let mut m = Self::from_pattern(rows);
        for i in 0..m.n {
            for p in m.row_ptr[i]..m.row_ptr[i + 1] {
                m.values[p] = a[i][m.col_idx[p]];
            }
        }
        m
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn zeros_like(&self) -> Self {
        Self { values: vec![0.0; self.values.len()], ..self.clone() }
    }

    /// Storage position of entry `(i, j)`, if it is in the pattern.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        row.binary_search(&j).ok().map(|p| p + self.row_ptr[i])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |p| (self.col_idx[p], self.values[p]))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut s = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[p] * x[self.col_idx[p]];
            }
            *yi = s;
        }
    }

    /// `self += alpha * other`; both must share the same pattern.
    pub fn add_scaled(&mut self, alpha: f64, other: &CsrMatrix) {
        debug_assert_eq!(self.col_idx, other.col_idx);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    /// Imposes `x[dof] = value` on the system `self · x = rhs` while keeping
    /// it symmetric: prescribed columns move to the right-hand side and
    /// prescribed rows become identity rows.
    pub fn apply_dirichlet(&mut self, rhs: &mut [f64], dofs: &[usize], values: &[f64]) {
        let mut prescribed: Vec<Option<f64>> = vec![None; self.n];
        for (&d, &v) in dofs.iter().zip(values) {
            prescribed[d] = Some(v);
        }
        for i in 0..self.n {
            let fixed_row = prescribed[i];
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p];
                if fixed_row.is_some() {
                    self.values[p] = if i == j { 1.0 } else { 0.0 };
                } else if let Some(v) = prescribed[j] {
                    rhs[i] -= self.values[p] * v;
                    self.values[p] = 0.0;
                }
            }
            if let Some(v) = fixed_row {
                rhs[i] = v;
            }
        }
    }
}

/// Reverse Cuthill-McKee ordering of the matrix graph; `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n;
    let degree: Vec<usize> = (0..n).map(|i| a.row_ptr[i + 1] - a.row_ptr[i]).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_levels = |start: usize, mark: &mut Vec<bool>| -> (usize, usize) {
        // returns (last node reached, eccentricity)
        let mut depth = vec![usize::MAX; n];
        let mut q = VecDeque::from([start]);
        depth[start] = 0;
        mark[start] = true;
        let mut last = start;
        while let Some(v) = q.pop_front() {
            last = v;
            for &w in &a.col_idx[a.row_ptr[v]..a.row_ptr[v + 1]] {
                if depth[w] == usize::MAX {
                    depth[w] = depth[v] + 1;
                    q.push_back(w);
                }
            }
        }
        (last, depth[last])
    };

    while order.len() < n {
        let seed = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| degree[i])
            .expect("unvisited node");
        // pseudo-peripheral start node
        let mut scratch = vec![false; n];
        let (mut start, mut ecc) = (seed, 0);
        for _ in 0..4 {
            let (far, e) = bfs_levels(start, &mut scratch);
            if e <= ecc && start != seed {
                break;
            }
            ecc = e;
            start = far;
        }
        let mut q = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = q.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = a.col_idx[a.row_ptr[v]..a.row_ptr[v + 1]]
                .iter()
                .copied()
                .filter(|&w| !visited[w])
                .collect();
            nbrs.sort_by_key(|&w| (degree[w], w));
            for w in nbrs {
                visited[w] = true;
                q.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Profile of the permuted lower triangle, computed once per pattern.
#[derive(Debug, Clone)]
pub struct EnvelopeSymbolic {
    perm: Vec<usize>,
    iperm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
}

impl EnvelopeSymbolic {
    pub fn new(pattern: &CsrMatrix) -> Self {
        let perm = reverse_cuthill_mckee(pattern);
        let n = pattern.n;
        let mut iperm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for old in 0..n {
            let i = iperm[old];
            for &c in &pattern.col_idx[pattern.row_ptr[old]..pattern.row_ptr[old + 1]] {
                let j = iperm[c];
                if j < i {
                    first[i] = first[i].min(j);
                }
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i] + 1));
        }
        Self { perm, iperm, first, start }
    }

    pub fn envelope_size(&self) -> usize {
        *self.start.last().unwrap_or(&0)
    }
}

/// `L Lᵀ` factorization stored row-wise over the envelope.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(sym: &EnvelopeSymbolic, a: &CsrMatrix) -> Result<Self, String> {
        let mut f = Self { data: Vec::new() };
        f.refactor(sym, a)?;
        Ok(f)
    }

    pub fn refactor(&mut self, sym: &EnvelopeSymbolic, a: &CsrMatrix) -> Result<(), String> {
        let n = a.n;
        self.data.clear();
        self.data.resize(sym.envelope_size(), 0.0);
        for old in 0..n {
            let i = sym.iperm[old];
            for p in a.row_ptr[old]..a.row_ptr[old + 1] {
                let j = sym.iperm[a.col_idx[p]];
                if j <= i {
                    if j < sym.first[i] {
                        return Err("matrix entry outside the symbolic envelope".into());
                    }
                    self.data[sym.start[i] + j - sym.first[i]] += a.values[p];
                }
            }
        }
        for i in 0..n {
            let fi = sym.first[i];
            let si = sym.start[i];
            for j in fi..i {
                let fj = sym.first[j];
                let sj = sym.start[j];
                let k0 = fi.max(fj);
                let mut s = self.data[si + j - fi];
                if k0 < j {
                    let (head, tail) = self.data.split_at(si);
                    let li = &tail[k0 - fi..j - fi];
                    let lj = &head[sj + k0 - fj..sj + j - fj];
                    s -= dot(li, lj);
                }
                let ljj = self.data[sj + j - fj];
                self.data[si + j - fi] = s / ljj;
            }
            let row = &self.data[si..si + i - fi];
            let d = self.data[si + i - fi] - dot(row, row);
            if !(d > 0.0) || !d.is_finite() {
                return Err(format!("matrix not positive definite at pivot {i} (value {d:e})"));
            }
            self.data[si + i - fi] = d.sqrt();
        }
        Ok(())
    }

    pub fn solve(&self, sym: &EnvelopeSymbolic, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut y: Vec<f64> = sym.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = sym.first[i];
            let si = sym.start[i];
            let row = &self.data[si..si + i - fi];
            let s = y[i] - dot(row, &y[fi..i]);
            y[i] = s / self.data[si + i - fi];
        }
        for i in (0..n).rev() {
            let fi = sym.first[i];
            let si = sym.start[i];
            y[i] /= self.data[si + i - fi];
            let yi = y[i];
            for (k, l) in (fi..i).zip(&self.data[si..si + i - fi]) {
                y[k] -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in sym.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradients. Returns the solution and the
/// number of iterations.
pub fn cg_jacobi(
    a: &CsrMatrix,
    b: &[f64],
    x0: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize), String> {
    let n = a.n;
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut x = x0.to_vec();
    let mut r = a.mul_vec(&x);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let bnorm = dot(b, b).sqrt().max(f64::MIN_POSITIVE);
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        if dot(&r, &r).sqrt() <= rel_tol * bnorm {
            return Ok((x, it));
        }
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(format!("CG breakdown (pᵀAp = {pap:e})"));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = dot(&r, &r).sqrt() / bnorm;
    if res <= rel_tol {
        Ok((x, max_iter))
    } else {
        Err(format!("CG did not converge in {max_iter} iterations (relative residual {res:e})"))
    }
}

/// Linear solver settings for the symmetric positive definite step systems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinearSolver {
    Direct,
    Cg { rel_tol: f64, max_iter: usize },
}

impl Default for LinearSolver {
    fn default() -> Self {
        LinearSolver::Direct
    }
}

/// A solver bound to one sparsity pattern, reusing its symbolic analysis.
#[derive(Debug, Clone)]
pub struct SpdSolver {
    kind: LinearSolver,
    symbolic: Option<EnvelopeSymbolic>,
    factor: Option<EnvelopeCholesky>,
}

impl SpdSolver {
    pub fn new(kind: LinearSolver, pattern: &CsrMatrix) -> Self {
        let symbolic = matches!(kind, LinearSolver::Direct).then(|| EnvelopeSymbolic::new(pattern));
        Self { kind, symbolic, factor: None }
    }

    pub fn solve(&mut self, a: &CsrMatrix, b: &[f64], guess: &[f64]) -> Result<Vec<f64>, String> {
        let x = match self.kind {
            LinearSolver::Direct => {
                let sym = self.symbolic.as_ref().expect("direct solver has a symbolic analysis");
                match self.factor.as_mut() {
                    Some(f) => f.refactor(sym, a)?,
                    None => self.factor = Some(EnvelopeCholesky::factor(sym, a)?),
                }
                self.factor.as_ref().expect("factor present").solve(sym, b)
            }
            LinearSolver::Cg { rel_tol, max_iter } => cg_jacobi(a, b, guess, rel_tol, max_iter)?.0,
        };
        if x.iter().all(|v| v.is_finite()) {
            Ok(x)
        } else {
            Err("linear solve produced non-finite values".into())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// 1D Laplacian plus identity on a path graph, scrambled by `shuffle`.
    fn spd_matrix(n: usize, shuffle: &[usize]) -> CsrMatrix {
        let mut dense = vec![vec![0.0; n]; n];
        for k in 0..n {
            let i = shuffle[k];
            dense[i][i] += 3.0;
            if k + 1 < n {
                let j = shuffle[k + 1];
                dense[i][j] -= 1.0;
                dense[j][i] -= 1.0;
            }
        }
        CsrMatrix::from_dense(&dense)
    }

    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        // Gaussian elimination with partial pivoting, test oracle
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, &bi)| {
            let mut r = r.clone();
            r.push(bi);
            r
        }).collect();
        for c in 0..n {
            let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
            m.swap(c, p);
            for r in c + 1..n {
                let f = m[r][c] / m[c][c];
                for k in c..=n {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
            x[r] = (m[r][n] - s) / m[r][r];
        }
        x
    }

    #[test]
    fn rcm_is_a_permutation_with_small_profile() {
        let n = 40;
        let shuffle: Vec<usize> = (0..n).map(|k| (k * 17) % n).collect();
        let a = spd_matrix(n, &shuffle);
        let perm = reverse_cuthill_mckee(&a);
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        // a path graph reorders to bandwidth one
        assert_eq!(EnvelopeSymbolic::new(&a).envelope_size(), 2 * n - 1);
    }

    #[test]
    fn dirichlet_keeps_symmetry_and_solution() {
        let n = 6;
        let a = spd_matrix(n, &(0..n).collect::<Vec<_>>());
        let x_true = vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.5];
        let b = a.mul_vec(&x_true);
        let mut m = a.clone();
        let mut rhs = b.clone();
        m.apply_dirichlet(&mut rhs, &[0, 4], &[1.0, 0.0]);
        let d = m.to_dense();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(d[i][j], d[j][i]);
            }
        }
        let x = dense_solve(&d, &rhs);
        for i in 0..n {
            assert!((x[i] - x_true[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        let sym = EnvelopeSymbolic::new(&a);
        assert!(EnvelopeCholesky::factor(&sym, &a).is_err());
    }

    proptest! {
        #[test]
        fn direct_and_cg_match_dense_oracle(
            n in 2usize..30,
            seed in 0u64..1000,
            extra in proptest::collection::vec((0usize..30, 0usize..30, 0.0f64..1.0), 0..20),
        ) {
            let shuffle: Vec<usize> = (0..n).map(|k| ((k as u64 * 7 + seed) % n as u64) as usize).collect();
            let mut seen = vec![false; n];
            let shuffle: Vec<usize> = shuffle.into_iter().filter(|&i| !std::mem::replace(&mut seen[i], true)).collect();
            let shuffle: Vec<usize> = shuffle.into_iter().chain((0..n).filter(|&i| !seen[i])).collect();
            let mut dense = spd_matrix(n, &shuffle).to_dense();
            for (i, j, v) in extra {
                let (i, j) = (i % n, j % n);
                if i != j {
                    // diagonally dominant update keeps it SPD
                    dense[i][j] += 0.1 * v;
                    dense[j][i] += 0.1 * v;
                    dense[i][i] += 0.1 * v;
                    dense[j][j] += 0.1 * v;
                }
            }
            let a = CsrMatrix::from_dense(&dense);
            let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let oracle = dense_solve(&dense, &b);
            let mut direct = SpdSolver::new(LinearSolver::Direct, &a);
            let x = direct.solve(&a, &b, &vec![0.0; n]).unwrap();
            let mut cg = SpdSolver::new(LinearSolver::Cg { rel_tol: 1e-13, max_iter: 500 }, &a);
            let y = cg.solve(&a, &b, &vec![0.0; n]).unwrap();
            for i in 0..n {
                prop_assert!((x[i] - oracle[i]).abs() < 1e-10);
                prop_assert!((y[i] - oracle[i]).abs() < 1e-9);
            }
        }
    }
}
