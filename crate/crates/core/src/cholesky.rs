//! Sparse Cholesky factorization `P A Pᵀ = L Lᵀ` for symmetric
//! positive-definite matrices.
//!
//! The fill-reducing permutation comes from a level-structure nested
//! dissection of the adjacency graph. The numeric phase is the up-looking
//! algorithm driven by the elimination tree: row `k` of `L` is obtained by a
//! sparse triangular solve whose pattern is the reach of `A[0..k, k]` in the
//! tree.

use crate::error::{Error, Result};
use crate::sparse::{norm_inf, CsrMatrix};

/// Parts at or below this size are ordered as they come.
const DISSECTION_LEAF: usize = 48;

#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    /// new index -> original index
    perm: Vec<usize>,
    /// Column-compressed `L`, diagonal stored first in each column.
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let perm = nested_dissection(a);
        Self::factor_with_ordering(a, perm)
    }

    pub fn factor_with_ordering(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || perm.len() != n {
            return Err(Error::InvalidInput("Cholesky needs a square matrix and a full permutation".into()));
        }
        let mut pinv = vec![usize::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            pinv[old] = new;
        }

        // Upper triangle of C = P A Pᵀ, column by column.
        let mut c_ptr = Vec::with_capacity(n + 1);
        let mut c_idx = Vec::with_capacity(a.nnz() / 2 + n);
        let mut c_val = Vec::with_capacity(a.nnz() / 2 + n);
        c_ptr.push(0);
        for k in 0..n {
            for (j, v) in a.row(perm[k]) {
                let i = pinv[j];
                if i <= k {
                    c_idx.push(i);
                    c_val.push(v);
                }
            }
            c_ptr.push(c_idx.len());
        }

        let parent = elimination_tree(n, &c_ptr, &c_idx);

        // Symbolic pass: column counts of L from the row reaches.
        let mut counts = vec![1usize; n];
        let mut stack = vec![0usize; n];
        let mut mark = vec![usize::MAX; n];
        for k in 0..n {
            let top = ereach(k, &c_ptr, &c_idx, &parent, &mut stack, &mut mark);
            for &i in &stack[top..] {
                counts[i] += 1;
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        col_ptr.push(0);
        for k in 0..n {
            col_ptr.push(col_ptr[k] + counts[k]);
        }
        let nnz = col_ptr[n];
        let mut row_idx = vec![0usize; nnz];
        let mut values = vec![0.0f64; nnz];
        let mut next: Vec<usize> = col_ptr[..n].to_vec();

        let mut x = vec![0.0f64; n];
        mark.iter_mut().for_each(|m| *m = usize::MAX);
        for k in 0..n {
            let top = ereach(k, &c_ptr, &c_idx, &parent, &mut stack, &mut mark);
            for p in c_ptr[k]..c_ptr[k + 1] {
                x[c_idx[p]] += c_val[p];
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &stack[top..] {
                let lki = x[i] / values[col_ptr[i]];
                x[i] = 0.0;
                for p in col_ptr[i] + 1..next[i] {
                    x[row_idx[p]] -= values[p] * lki;
                }
                d -= lki * lki;
                let p = next[i];
                next[i] += 1;
                row_idx[p] = k;
                values[p] = lki;
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: perm[k], value: d });
            }
            let p = next[k];
            next[k] += 1;
            row_idx[p] = k;
            values[p] = d.sqrt();
        }

        Ok(Self { n, perm, col_ptr, row_idx, values })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn factor_nnz(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        // L y = b
        for j in 0..self.n {
            let start = self.col_ptr[j];
            y[j] /= self.values[start];
            let yj = y[j];
            for p in start + 1..self.col_ptr[j + 1] {
                y[self.row_idx[p]] -= self.values[p] * yj;
            }
        }
        // Lᵀ x = y
        for j in (0..self.n).rev() {
            let start = self.col_ptr[j];
            let mut s = y[j];
            for p in start + 1..self.col_ptr[j + 1] {
                s -= self.values[p] * y[self.row_idx[p]];
            }
            y[j] = s / self.values[start];
        }
        let mut x = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// Solve followed by up to `steps` rounds of iterative refinement against `a`.
    pub fn solve_refined(&self, a: &CsrMatrix, b: &[f64], steps: usize) -> Vec<f64> {
        let mut x = self.solve(b);
        let mut best = residual_inf(a, &x, b);
        for _ in 0..steps {
            if best == 0.0 {
                break;
            }
            let r: Vec<f64> = a.mul_vec(&x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
            let dx = self.solve(&r);
            let cand: Vec<f64> = x.iter().zip(&dx).map(|(xi, di)| xi + di).collect();
            let res = residual_inf(a, &cand, b);
            if res < best {
                x = cand;
                best = res;
            } else {
                break;
            }
        }
        x
    }
}

pub fn residual_inf(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    norm_inf(&ax.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>())
}

fn elimination_tree(n: usize, c_ptr: &[usize], c_idx: &[usize]) -> Vec<usize> {
    let mut parent = vec![usize::MAX; n];
    let mut ancestor = vec![usize::MAX; n];
    for k in 0..n {
        for &row in &c_idx[c_ptr[k]..c_ptr[k + 1]] {
            let mut i = row;
            while i != usize::MAX && i < k {
                let inext = ancestor[i];
                ancestor[i] = k;
                if inext == usize::MAX {
                    parent[i] = k;
                }
                i = inext;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of `L` (excluding the diagonal), written to
/// `stack[top..]` in topological order. `mark` must not hold `k` on entry.
fn ereach(
    k: usize,
    c_ptr: &[usize],
    c_idx: &[usize],
    parent: &[usize],
    stack: &mut [usize],
    mark: &mut [usize],
) -> usize {
    let n = parent.len();
    let mut top = n;
    mark[k] = k;
    for &row in &c_idx[c_ptr[k]..c_ptr[k + 1]] {
        let mut i = row;
        if i > k {
            continue;
        }
        let mut len = 0;
        while mark[i] != k {
            stack[len] = i;
            len += 1;
            mark[i] = k;
            i = parent[i];
        }
        while len > 0 {
            len -= 1;
            top -= 1;
            stack[top] = stack[len];
        }
    }
    top
}

/// Level-structure nested dissection on the graph of `a`. Returns the
/// permutation as new -> original.
pub fn nested_dissection(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let mut order = Vec::with_capacity(n);
    let mut label = vec![0usize; n];
    let mut next_label = 1usize;
    let mut level = vec![usize::MAX; n];
    let mut queue = Vec::with_capacity(n);

    // Work list of parts, each a node list sharing one label. Parts are
    // processed depth-first; separators are appended after both halves, so
    // they are pushed as "emit" tasks beneath the halves.
    enum Task {
        Split(Vec<usize>),
        Emit(Vec<usize>),
    }
    let mut tasks = vec![Task::Split((0..n).collect())];
    while let Some(task) = tasks.pop() {
        let part = match task {
            Task::Emit(nodes) => {
                order.extend(nodes);
                continue;
            }
            Task::Split(nodes) => nodes,
        };
        if part.len() <= DISSECTION_LEAF {
            order.extend(part);
            continue;
        }
        let lab = next_label;
        next_label += 1;
        for &v in &part {
            label[v] = lab;
        }

        // Connected components first.
        let mut components: Vec<Vec<usize>> = Vec::new();
        for &v in &part {
            if level[v] == usize::MAX {
                let comp = bfs(a, v, lab, &label, &mut level, &mut queue);
                components.push(comp.iter().map(|&(u, _)| u).collect());
            }
        }
        for &v in &part {
            level[v] = usize::MAX;
        }
        if components.len() > 1 {
            for comp in components.into_iter().rev() {
                tasks.push(Task::Split(comp));
            }
            continue;
        }

        // Pseudo-peripheral root.
        let mut root = part[0];
        let mut depth = 0;
        for _ in 0..4 {
            let visited = bfs(a, root, lab, &label, &mut level, &mut queue);
            let (far, far_level) = *visited.last().unwrap();
            for &(u, _) in &visited {
                level[u] = usize::MAX;
            }
            if far_level <= depth {
                break;
            }
            depth = far_level;
            root = far;
        }
        let visited = bfs(a, root, lab, &label, &mut level, &mut queue);
        let nlevels = visited.last().unwrap().1 + 1;
        if nlevels < 3 {
            for &(u, _) in &visited {
                level[u] = usize::MAX;
            }
            order.extend(part);
            continue;
        }
        let half = visited.len() / 2;
        let sep_level = visited[half].1.clamp(1, nlevels - 2);
        let mut low = Vec::new();
        let mut sep = Vec::new();
        let mut high = Vec::new();
        for &(u, l) in &visited {
            match l.cmp(&sep_level) {
                std::cmp::Ordering::Less => low.push(u),
                std::cmp::Ordering::Equal => sep.push(u),
                std::cmp::Ordering::Greater => high.push(u),
            }
            level[u] = usize::MAX;
        }
        tasks.push(Task::Emit(sep));
        tasks.push(Task::Split(high));
        tasks.push(Task::Split(low));
    }
    debug_assert_eq!(order.len(), n);
    order
}

/// Breadth-first search restricted to nodes carrying `lab`; returns the
/// visited nodes with their level. Leaves `level` set for visited nodes.
fn bfs(
    a: &CsrMatrix,
    root: usize,
    lab: usize,
    label: &[usize],
    level: &mut [usize],
    queue: &mut Vec<usize>,
) -> Vec<(usize, usize)> {
    queue.clear();
    queue.push(root);
    level[root] = 0;
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head];
        head += 1;
        for (u, _) in a.row(v) {
            if label[u] == lab && level[u] == usize::MAX {
                level[u] = level[v] + 1;
                queue.push(u);
            }
        }
    }
    queue.iter().map(|&u| (u, level[u])).collect()
}
