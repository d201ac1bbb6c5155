//! Compressed sparse row matrices and a direct sparse LU with threshold
//! partial pivoting for the nonsymmetric systems of the correction schemes.
//!
//! The factorization is left-looking (Gilbert-Peierls): one sparse
//! triangular solve per column with a DFS symbolic phase, so the cost is
//! proportional to the arithmetic actually performed. Columns are
//! pre-ordered by a BFS-separator nested dissection of the symmetrized
//! pattern, which keeps fill low on the planar meshes this crate produces.

use crate::error::{Error, Result};

const ABSENT: u32 = u32::MAX;

/// Relative magnitude a diagonal entry needs to be accepted as pivot.
const PIVOT_THRESHOLD: f64 = 0.1;

/// Name of the fill-reducing ordering, echoed into run metadata.
pub const ORDERING: &str = "bfs-nested-dissection";

/// Sparse matrix in CSR with strictly increasing column indices per row.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        mut t: Vec<(u32, u32, f64)>,
    ) -> SparseMatrix {
        t.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last = None;
        for &(r, c, v) in &t {
            debug_assert!((r as usize) < n_rows && (c as usize) < n_cols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r as usize + 1] = col_idx.len();
                last = Some((r, c));
            }
        }
        // forward-fill empty rows
        for r in 1..=n_rows {
            if row_ptr[r] < row_ptr[r - 1] {
                row_ptr[r] = row_ptr[r - 1];
            }
        }
        SparseMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&(c as u32)) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        let mut y = vec![0.0; self.n_rows];
        for r in 0..self.n_rows {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k] as usize];
            }
            y[r] = s;
        }
        y
    }

    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_rows);
        let mut y = vec![0.0; self.n_cols];
        for r in 0..self.n_rows {
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[k] as usize] += self.values[k] * xr;
            }
        }
        y
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_idx {
            counts[c as usize + 1] += 1;
        }
        for c in 0..self.n_cols {
            counts[c + 1] += counts[c];
        }
        let row_ptr = counts.clone();
        let mut col_idx = vec![0u32; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        let mut next = counts;
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k] as usize;
                let dst = next[c];
                next[c] += 1;
                col_idx[dst] = r as u32;
                values[dst] = self.values[k];
            }
        }
        SparseMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// `self + alpha * other`; patterns need not match.
    pub fn add_scaled(&self, other: &SparseMatrix, alpha: f64) -> SparseMatrix {
        assert_eq!((self.n_rows, self.n_cols), (other.n_rows, other.n_cols));
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                t.push((r as u32, self.col_idx[k], self.values[k]));
            }
            for k in other.row_ptr[r]..other.row_ptr[r + 1] {
                t.push((r as u32, other.col_idx[k], alpha * other.values[k]));
            }
        }
        SparseMatrix::from_triplets(self.n_rows, self.n_cols, t)
    }

    /// Keeps rows/columns whose map entry is not `u32::MAX`, renumbering by
    /// the map values.
    pub fn restrict(
        &self,
        row_map: &[u32],
        n_new_rows: usize,
        col_map: &[u32],
        n_new_cols: usize,
    ) -> SparseMatrix {
        let mut t = Vec::new();
        for r in 0..self.n_rows {
            let nr = row_map[r];
            if nr == ABSENT {
                continue;
            }
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let nc = col_map[self.col_idx[k] as usize];
                if nc != ABSENT {
                    t.push((nr, nc, self.values[k]));
                }
            }
        }
        SparseMatrix::from_triplets(n_new_rows, n_new_cols, t)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols]; self.n_rows];
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                d[r][self.col_idx[k] as usize] = self.values[k];
            }
        }
        d
    }
}

/// Sparse LU factors `P A Q = L U` with row pivoting `P` and fill-reducing
/// column order `Q`. Immutable once built; concurrent solves are safe.
pub struct Factorization {
    n: usize,
    // L strictly below the diagonal (unit diagonal implicit), CSC, rows in
    // pivot order
    l_colptr: Vec<usize>,
    l_rows: Vec<u32>,
    l_vals: Vec<f64>,
    // U strictly above the diagonal, CSC, rows in pivot order
    u_colptr: Vec<usize>,
    u_rows: Vec<u32>,
    u_vals: Vec<f64>,
    u_diag: Vec<f64>,
    /// pivot position -> original row
    p: Vec<u32>,
    /// pivot position -> original column
    q: Vec<u32>,
    // the input matrix, kept for residual checks in debug builds
    a: SparseMatrix,
    a_max: f64,
    ordering: &'static str,
}

/// Nested dissection by BFS level-set separators on an undirected graph in
/// CSR-like adjacency form. Separators are ordered last.
fn dissection_order(n: usize, adj_ptr: &[usize], adj_idx: &[u32]) -> Vec<u32> {
    const LEAF: usize = 32;
    let mut order = Vec::with_capacity(n);
    let mut member = vec![0u32; n];
    let mut level = vec![0u32; n];
    let mut queue: Vec<u32> = Vec::with_capacity(n);
    let mut stamp = 0u32;
    // explicit work stack; separators are emitted after both halves
    enum Task {
        Split(Vec<u32>),
        Emit(Vec<u32>),
    }
    let mut tasks: Vec<Task> = vec![Task::Split((0..n as u32).collect())];
    while let Some(task) = tasks.pop() {
        let nodes = match task {
            Task::Emit(sep) => {
                order.extend_from_slice(&sep);
                continue;
            }
            Task::Split(nodes) => nodes,
        };
        if nodes.is_empty() {
            continue;
        }
        if nodes.len() <= LEAF {
            order.extend_from_slice(&nodes);
            continue;
        }
        stamp += 1;
        for &v in &nodes {
            member[v as usize] = stamp;
        }
        // connected component of nodes[0], twice for a pseudo-peripheral root
        let bfs = |root: u32, level: &mut [u32], queue: &mut Vec<u32>, member: &[u32]| {
            queue.clear();
            queue.push(root);
            level[root as usize] = 1;
            let mut head = 0;
            while head < queue.len() {
                let v = queue[head] as usize;
                head += 1;
                for k in adj_ptr[v]..adj_ptr[v + 1] {
                    let w = adj_idx[k] as usize;
                    if member[w] == stamp && level[w] == 0 {
                        level[w] = level[v] + 1;
                        queue.push(w as u32);
                    }
                }
            }
        };
        for &v in &nodes {
            level[v as usize] = 0;
        }
        bfs(nodes[0], &mut level, &mut queue, &member);
        if queue.len() < nodes.len() {
            // disconnected: split off the found component, requeue the rest
            let comp: Vec<u32> = queue.clone();
            let rest: Vec<u32> = nodes
                .iter()
                .copied()
                .filter(|&v| level[v as usize] == 0)
                .collect();
            tasks.push(Task::Split(rest));
            tasks.push(Task::Split(comp));
            continue;
        }
        let root = *queue.last().unwrap();
        for &v in &nodes {
            level[v as usize] = 0;
        }
        bfs(root, &mut level, &mut queue, &member);
        let height = level[*queue.last().unwrap() as usize];
        if height <= 2 {
            order.extend_from_slice(&nodes);
            continue;
        }
        // separator: the level where the cumulative count crosses half
        let mut counts = vec![0usize; height as usize + 1];
        for &v in &nodes {
            counts[level[v as usize] as usize] += 1;
        }
        let mut cum = 0;
        let mut mid = 1;
        for l in 1..=height as usize {
            cum += counts[l];
            if cum * 2 >= nodes.len() {
                mid = l as u32;
                break;
            }
        }
        if mid == 1 {
            mid = 2.min(height - 1).max(1);
        }
        if mid >= height {
            mid = height - 1;
        }
        let mut a_side = Vec::new();
        let mut b_side = Vec::new();
        let mut sep = Vec::new();
        for &v in &nodes {
            let l = level[v as usize];
            if l < mid {
                a_side.push(v);
            } else if l > mid {
                b_side.push(v);
            } else {
                sep.push(v);
            }
        }
        tasks.push(Task::Emit(sep));
        tasks.push(Task::Split(b_side));
        tasks.push(Task::Split(a_side));
    }
    debug_assert_eq!(order.len(), n);
    order
}

fn symmetrized_adjacency(a: &SparseMatrix) -> (Vec<usize>, Vec<u32>) {
    let n = a.n_rows;
    let mut deg = vec![0usize; n];
    for r in 0..n {
        for k in a.row_ptr[r]..a.row_ptr[r + 1] {
            let c = a.col_idx[k] as usize;
            if c != r {
                deg[r] += 1;
                deg[c] += 1;
            }
        }
    }
    let mut ptr = vec![0usize; n + 1];
    for v in 0..n {
        ptr[v + 1] = ptr[v] + deg[v];
    }
    let mut idx = vec![0u32; ptr[n]];
    let mut next = ptr.clone();
    for r in 0..n {
        for k in a.row_ptr[r]..a.row_ptr[r + 1] {
            let c = a.col_idx[k] as usize;
            if c != r {
                idx[next[r]] = c as u32;
                next[r] += 1;
                idx[next[c]] = r as u32;
                next[c] += 1;
            }
        }
    }
    // duplicates (from A having both (r,c) and (c,r)) are harmless for BFS
    (ptr, idx)
}

/// Factorizes a square, structurally nonsingular sparse matrix.
pub fn factorize(a: &SparseMatrix) -> Result<Factorization> {
    if a.n_rows != a.n_cols {
        return Err(Error::SizeMismatch(format!(
            "cannot factorize {}x{} matrix",
            a.n_rows, a.n_cols
        )));
    }
    let n = a.n_rows;
    let (adj_ptr, adj_idx) = symmetrized_adjacency(a);
    let q = dissection_order(n, &adj_ptr, &adj_idx);

    // CSC of A = CSR of A^T
    let at = a.transpose();

    let mut l_colptr = vec![0usize; n + 1];
    let mut l_rows: Vec<u32> = Vec::with_capacity(16 * n);
    let mut l_vals: Vec<f64> = Vec::with_capacity(16 * n);
    let mut u_colptr = vec![0usize; n + 1];
    let mut u_rows: Vec<u32> = Vec::with_capacity(16 * n);
    let mut u_vals: Vec<f64> = Vec::with_capacity(16 * n);
    let mut u_diag = vec![0.0; n];
    let mut pinv = vec![ABSENT; n];
    let mut p = vec![ABSENT; n];

    let mut x = vec![0.0f64; n];
    let mut mark = vec![0u32; n];
    let mut pattern: Vec<u32> = Vec::with_capacity(n);
    let mut dfs_stack: Vec<(u32, usize)> = Vec::with_capacity(64);

    for k in 0..n {
        let col = q[k] as usize;
        let stamp = k as u32 + 1;
        pattern.clear();

        // symbolic: reach of the column pattern through the L graph,
        // collected in postorder (children before parents)
        for kk in at.row_ptr[col]..at.row_ptr[col + 1] {
            let seed = at.col_idx[kk];
            if mark[seed as usize] == stamp {
                continue;
            }
            dfs_stack.push((seed, 0));
            mark[seed as usize] = stamp;
            while let Some(&(node, child)) = dfs_stack.last() {
                let piv = pinv[node as usize];
                if piv == ABSENT {
                    pattern.push(node);
                    dfs_stack.pop();
                    continue;
                }
                let start = l_colptr[piv as usize];
                let end = l_colptr[piv as usize + 1];
                let mut c = child;
                let mut descended = false;
                while start + c < end {
                    let next = l_rows[start + c];
                    c += 1;
                    if mark[next as usize] != stamp {
                        mark[next as usize] = stamp;
                        dfs_stack.last_mut().unwrap().1 = c;
                        dfs_stack.push((next, 0));
                        descended = true;
                        break;
                    }
                }
                if !descended {
                    pattern.push(node);
                    dfs_stack.pop();
                }
            }
        }

        // numeric: scatter the column, then eliminate in topological order
        for kk in at.row_ptr[col]..at.row_ptr[col + 1] {
            x[at.col_idx[kk] as usize] = at.values[kk];
        }
        for idx in (0..pattern.len()).rev() {
            let node = pattern[idx] as usize;
            let piv = pinv[node];
            if piv == ABSENT {
                continue;
            }
            let xj = x[node];
            if xj != 0.0 {
                for kk in l_colptr[piv as usize]..l_colptr[piv as usize + 1] {
                    x[l_rows[kk] as usize] -= l_vals[kk] * xj;
                }
            }
        }

        // pivot selection with a threshold preference for the diagonal
        let mut max_abs = 0.0f64;
        let mut max_row = ABSENT;
        for &r in &pattern {
            if pinv[r as usize] == ABSENT {
                let v = x[r as usize].abs();
                if v > max_abs {
                    max_abs = v;
                    max_row = r;
                }
            }
        }
        if max_row == ABSENT || max_abs == 0.0 {
            for &r in &pattern {
                x[r as usize] = 0.0;
            }
            return Err(Error::Singular {
                pivot: k,
                detail: "no nonzero pivot candidate".into(),
            });
        }
        let mut pivot_row = max_row;
        if pinv[col] == ABSENT && x[col].abs() >= PIVOT_THRESHOLD * max_abs && x[col] != 0.0 {
            pivot_row = col as u32;
        }
        let pivot_val = x[pivot_row as usize];
        pinv[pivot_row as usize] = k as u32;
        p[k] = pivot_row;
        u_diag[k] = pivot_val;

        for &r in &pattern {
            let ri = r as usize;
            let xv = x[ri];
            x[ri] = 0.0;
            let piv = pinv[ri];
            if r == pivot_row {
                continue;
            }
            if piv != ABSENT && piv < k as u32 {
                if xv != 0.0 {
                    u_rows.push(piv);
                    u_vals.push(xv);
                }
            } else if piv == ABSENT && xv != 0.0 {
                l_rows.push(r); // original index; relabeled below
                l_vals.push(xv / pivot_val);
            }
        }
        l_colptr[k + 1] = l_rows.len();
        u_colptr[k + 1] = u_rows.len();
    }

    // relabel L rows from original indices to pivot positions
    for r in l_rows.iter_mut() {
        *r = pinv[*r as usize];
    }

    Ok(Factorization {
        n,
        l_colptr,
        l_rows,
        l_vals,
        u_colptr,
        u_rows,
        u_vals,
        u_diag,
        p,
        q,
        a_max: a.max_abs(),
        a: a.clone(),
        ordering: ORDERING,
    })
}

impl Factorization {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn fill_nnz(&self) -> usize {
        self.l_vals.len() + self.u_vals.len() + self.n
    }

    pub fn ordering(&self) -> &'static str {
        self.ordering
    }

    fn check_residual(&self, x: &[f64], rhs: &[f64], transposed: bool) {
        let ax = if transposed {
            self.a.matvec_transpose(x)
        } else {
            self.a.matvec(x)
        };
        let r2: f64 = ax
            .iter()
            .zip(rhs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let x2: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let b2: f64 = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        debug_assert!(
            r2 <= 1e-10 * (self.a_max * x2 + b2),
            "solve residual {r2:.3e} exceeds bound {:.3e}",
            1e-10 * (self.a_max * x2 + b2)
        );
    }

    /// Solves `A x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::SizeMismatch(format!(
                "rhs length {} for system of size {}",
                rhs.len(),
                self.n
            )));
        }
        let mut y = vec![0.0; self.n];
        for k in 0..self.n {
            y[k] = rhs[self.p[k] as usize];
        }
        for k in 0..self.n {
            let yk = y[k];
            if yk != 0.0 {
                for kk in self.l_colptr[k]..self.l_colptr[k + 1] {
                    y[self.l_rows[kk] as usize] -= self.l_vals[kk] * yk;
                }
            }
        }
        for k in (0..self.n).rev() {
            y[k] /= self.u_diag[k];
            let yk = y[k];
            if yk != 0.0 {
                for kk in self.u_colptr[k]..self.u_colptr[k + 1] {
                    y[self.u_rows[kk] as usize] -= self.u_vals[kk] * yk;
                }
            }
        }
        let mut out = vec![0.0; self.n];
        for k in 0..self.n {
            out[self.q[k] as usize] = y[k];
        }
        self.check_residual(&out, rhs, false);
        Ok(out)
    }

    /// Solves `A^T x = rhs` with the same factors.
    pub fn solve_transpose(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::SizeMismatch(format!(
                "rhs length {} for system of size {}",
                rhs.len(),
                self.n
            )));
        }
        // A^T = Q U^T L^T P with the factors above
        let mut z = vec![0.0; self.n];
        for k in 0..self.n {
            let mut s = rhs[self.q[k] as usize];
            for kk in self.u_colptr[k]..self.u_colptr[k + 1] {
                s -= self.u_vals[kk] * z[self.u_rows[kk] as usize];
            }
            z[k] = s / self.u_diag[k];
        }
        for k in (0..self.n).rev() {
            let mut s = z[k];
            for kk in self.l_colptr[k]..self.l_colptr[k + 1] {
                s -= self.l_vals[kk] * z[self.l_rows[kk] as usize];
            }
            z[k] = s;
        }
        let mut out = vec![0.0; self.n];
        for k in 0..self.n {
            out[self.p[k] as usize] = z[k];
        }
        self.check_residual(&out, rhs, true);
        Ok(out)
    }
}
