//! Sparse linear solvers for the implicit steppers and the Poisson problem.
//!
//! The assembled operators are nonsymmetric, so we provide a left-looking sparse LU
//! with threshold partial pivoting (bandwidth-reducing column order) and restarted
//! GMRES preconditioned by ILU(0).

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::sparse::SparseOperator;

/// Which solver to use for `A x = b`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum LinearSolverKind {
    /// Sparse LU, factored once and reused.
    #[default]
    Direct,
    /// Restarted GMRES with ILU(0); `tol` is relative to `‖b‖`.
    Iterative { tol: f64, max_iter: usize },
}

impl LinearSolverKind {
    pub fn iterative() -> Self {
        LinearSolverKind::Iterative {
            tol: 1e-10,
            max_iter: 2000,
        }
    }
}

/// Reverse Cuthill–McKee order of the symmetrized pattern of `a`.
///
/// The last `keep_last` indices are excluded from the search and appended at the end,
/// which keeps dense border rows out of the profile.
pub fn rcm_order(a: &SparseOperator, keep_last: usize) -> Vec<usize> {
    let n = a.nrows();
    let m = n - keep_last.min(n);
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m];
    for r in 0..m {
        for (c, _) in a.row(r) {
            if c < m && c != r {
                adj[r].push(c);
                adj[c].push(r);
            }
        }
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }
    let deg: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; m];
    let mut order = Vec::with_capacity(n);

    let bfs_levels = |start: usize, visited: &[bool]| -> (usize, usize) {
        // returns (last node reached, eccentricity)
        let mut dist = vec![usize::MAX; m];
        let mut q = VecDeque::from([start]);
        dist[start] = 0;
        let mut last = start;
        while let Some(u) = q.pop_front() {
            last = u;
            for &v in &adj[u] {
                if dist[v] == usize::MAX && !visited[v] {
                    dist[v] = dist[u] + 1;
                    q.push_back(v);
                }
            }
        }
        (last, dist[last])
    };

    for seed in 0..m {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start node
        let mut start = seed;
        let mut ecc = 0;
        for _ in 0..4 {
            let (far, e) = bfs_levels(start, &visited);
            if e <= ecc {
                break;
            }
            ecc = e;
            start = far;
        }
        let mut q = VecDeque::from([start]);
        visited[start] = true;
        let mut nbrs = Vec::new();
        while let Some(u) = q.pop_front() {
            order.push(u);
            nbrs.clear();
            nbrs.extend(adj[u].iter().copied().filter(|&v| !visited[v]));
            nbrs.sort_by_key(|&v| (deg[v], v));
            for &v in &nbrs {
                visited[v] = true;
                q.push_back(v);
            }
        }
    }
    order.reverse();
    order.extend(m..n);
    order
}

/// Sparse LU factorization `P A Q = L U`.
#[derive(Clone, Debug)]
pub struct SparseLu {
    n: usize,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    up: Vec<usize>,
    ui: Vec<usize>,
    ux: Vec<f64>,
    pinv: Vec<usize>,
    q: Vec<usize>,
}

/// Relative size a diagonal candidate needs to be preferred over the largest entry.
const PIVOT_THRESHOLD: f64 = 0.1;

impl SparseLu {
    /// Factors `a` with a reverse Cuthill–McKee column order.
    pub fn factor(a: &SparseOperator) -> Result<Self> {
        Self::factor_with_order(a, rcm_order(a, 0))
    }

    /// Factors `a` with the given column order `q`.
    pub fn factor_with_order(a: &SparseOperator, q: Vec<usize>) -> Result<Self> {
        let n = a.check_square(a.nrows()).map(|_| a.nrows())?;
        if q.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: q.len(),
            });
        }
        // columns of A as rows of Aᵀ
        let at = a.transpose();
        let (ap, ai, ax) = (at.row_ptr(), at.col_idx(), at.values());

        let nnz_guess = 4 * a.nnz() + n;
        let mut lp = Vec::with_capacity(n + 1);
        let mut li: Vec<usize> = Vec::with_capacity(nnz_guess);
        let mut lx: Vec<f64> = Vec::with_capacity(nnz_guess);
        let mut up = Vec::with_capacity(n + 1);
        let mut ui = Vec::with_capacity(nnz_guess);
        let mut ux = Vec::with_capacity(nnz_guess);
        const NONE: usize = usize::MAX;
        let mut pinv = vec![NONE; n];
        let mut x = vec![0.0; n];
        let mut xi = vec![0usize; n];
        let mut stack = vec![0usize; n];
        let mut pstack = vec![0usize; n];
        let mut mark = vec![false; n];

        for k in 0..n {
            lp.push(li.len());
            up.push(ui.len());
            let col = q[k];

            // symbolic: rows reachable from the pattern of A(:,col) through L
            let mut top = n;
            for p in ap[col]..ap[col + 1] {
                let j0 = ai[p];
                if mark[j0] {
                    continue;
                }
                let mut head = 0usize;
                stack[0] = j0;
                loop {
                    let j = stack[head];
                    let jl = pinv[j];
                    if !mark[j] {
                        mark[j] = true;
                        pstack[head] = if jl == NONE { 0 } else { lp[jl] + 1 };
                    }
                    let end = if jl == NONE { 0 } else { lp[jl + 1] };
                    let mut done = true;
                    let mut pp = pstack[head];
                    while pp < end {
                        let i = li[pp];
                        pp += 1;
                        if !mark[i] {
                            pstack[head] = pp;
                            head += 1;
                            stack[head] = i;
                            done = false;
                            break;
                        }
                    }
                    if done {
                        pstack[head] = end;
                        top -= 1;
                        xi[top] = j;
                        if head == 0 {
                            break;
                        }
                        head -= 1;
                    }
                }
            }
            for &i in &xi[top..n] {
                mark[i] = false;
            }

            // numeric: x = L \ A(:,col)
            for p in ap[col]..ap[col + 1] {
                x[ai[p]] = ax[p];
            }
            for px in top..n {
                let j = xi[px];
                let jl = pinv[j];
                if jl == NONE {
                    continue;
                }
                let xj = x[j];
                if xj == 0.0 {
                    continue;
                }
                for p in lp[jl] + 1..lp[jl + 1] {
                    x[li[p]] -= lx[p] * xj;
                }
            }

            // pivot choice
            let mut ipiv = NONE;
            let mut amax = -1.0f64;
            for &i in &xi[top..n] {
                if pinv[i] == NONE {
                    let t = x[i].abs();
                    if t > amax {
                        amax = t;
                        ipiv = i;
                    }
                } else {
                    ui.push(pinv[i]);
                    ux.push(x[i]);
                }
            }
            if ipiv == NONE || !(amax > 0.0) || !amax.is_finite() {
                return Err(Error::SingularSystem);
            }
            if pinv[col] == NONE && x[col].abs() >= PIVOT_THRESHOLD * amax {
                ipiv = col;
            }
            let pivot = x[ipiv];
            ui.push(k);
            ux.push(pivot);
            pinv[ipiv] = k;
            li.push(ipiv);
            lx.push(1.0);
            for &i in &xi[top..n] {
                if pinv[i] == NONE && x[i] != 0.0 {
                    li.push(i);
                    lx.push(x[i] / pivot);
                }
                x[i] = 0.0;
            }
        }
        lp.push(li.len());
        up.push(ui.len());
        for r in li.iter_mut() {
            *r = pinv[*r];
        }
        Ok(Self {
            n,
            lp,
            li,
            lx,
            up,
            ui,
            ux,
            pinv,
            q,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Nonzeros in `L` plus `U`.
    pub fn fill(&self) -> usize {
        self.li.len() + self.ui.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[self.pinv[i]] = b[i];
        }
        for j in 0..n {
            let yj = y[j];
            if yj != 0.0 {
                for p in self.lp[j] + 1..self.lp[j + 1] {
                    y[self.li[p]] -= self.lx[p] * yj;
                }
            }
        }
        for j in (0..n).rev() {
            let last = self.up[j + 1] - 1;
            y[j] /= self.ux[last];
            let yj = y[j];
            if yj != 0.0 {
                for p in self.up[j]..last {
                    y[self.ui[p]] -= self.ux[p] * yj;
                }
            }
        }
        let mut x = vec![0.0; n];
        for k in 0..n {
            x[self.q[k]] = y[k];
        }
        x
    }
}

/// Incomplete LU with the sparsity pattern of `A` (plus the diagonal).
#[derive(Clone, Debug)]
pub struct Ilu0 {
    lu: SparseOperator,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &SparseOperator) -> Result<Self> {
        let n = a.nrows();
        a.check_square(n)?;
        // ensure every diagonal is stored
        let rows: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|r| {
                let mut row: Vec<_> = a.row(r).collect();
                if !row.iter().any(|&(c, _)| c == r) {
                    row.push((r, 0.0));
                }
                row.sort_unstable_by_key(|e| e.0);
                row
            })
            .collect();
        let rp: Vec<usize> = std::iter::once(0)
            .chain(rows.iter().scan(0, |s, r| {
                *s += r.len();
                Some(*s)
            }))
            .collect();
        let ci: Vec<usize> = rows.iter().flatten().map(|e| e.0).collect();
        let mut v: Vec<f64> = rows.iter().flatten().map(|e| e.1).collect();
        let diag: Vec<usize> = (0..n)
            .map(|r| rp[r] + ci[rp[r]..rp[r + 1]].binary_search(&r).unwrap())
            .collect();

        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            for p in rp[i]..rp[i + 1] {
                pos[ci[p]] = p;
            }
            for p in rp[i]..diag[i] {
                let k = ci[p];
                let dkk = v[diag[k]];
                if dkk == 0.0 {
                    return Err(Error::SolverFailure(format!(
                        "ILU(0) zero pivot at row {k}"
                    )));
                }
                v[p] /= dkk;
                let lik = v[p];
                for q in diag[k] + 1..rp[k + 1] {
                    let j = ci[q];
                    let t = pos[j];
                    if t != usize::MAX {
                        v[t] -= lik * v[q];
                    }
                }
            }
            for p in rp[i]..rp[i + 1] {
                pos[ci[p]] = usize::MAX;
            }
            if v[diag[i]] == 0.0 || !v[diag[i]].is_finite() {
                return Err(Error::SolverFailure(format!(
                    "ILU(0) zero pivot at row {i}"
                )));
            }
        }
        let lu = SparseOperator::from_csr_unchecked(n, rp, ci, v);
        Ok(Self { lu, diag })
    }

    /// Applies `(LU)⁻¹` in place.
    pub fn apply(&self, x: &mut [f64]) {
        let (rp, ci, v) = (self.lu.row_ptr(), self.lu.col_idx(), self.lu.values());
        let n = x.len();
        for i in 0..n {
            let mut s = x[i];
            for p in rp[i]..self.diag[i] {
                s -= v[p] * x[ci[p]];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for p in self.diag[i] + 1..rp[i + 1] {
                s -= v[p] * x[ci[p]];
            }
            x[i] = s / v[self.diag[i]];
        }
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Outcome of an iterative solve.
#[derive(Clone, Copy, Debug)]
pub struct GmresStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

const RESTART: usize = 50;

/// Right-preconditioned restarted GMRES. `x` holds the initial guess on entry.
pub fn gmres(
    a: &SparseOperator,
    prec: Option<&Ilu0>,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<GmresStats> {
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(GmresStats {
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let m = RESTART.min(n.max(1));
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut h = vec![vec![0.0; m]; m + 1];
    let (mut cs, mut sn, mut g) = (vec![0.0; m], vec![0.0; m], vec![0.0; m + 1]);
    let mut iters = 0;
    loop {
        a.matvec_into(x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let beta = norm2(&r);
        let rel = beta / bnorm;
        if rel <= tol {
            return Ok(GmresStats {
                iterations: iters,
                rel_residual: rel,
            });
        }
        if iters >= max_iter {
            return Err(Error::SolverFailure(format!(
                "GMRES did not converge in {max_iter} iterations (residual {rel:.3e})"
            )));
        }
        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            z.copy_from_slice(&basis[k]);
            if let Some(p) = prec {
                p.apply(&mut z);
            }
            a.matvec_into(&z, &mut w);
            for (j, vj) in basis.iter().enumerate() {
                let hij = dot(&w, vj);
                h[j][k] = hij;
                for i in 0..n {
                    w[i] -= hij * vj[i];
                }
            }
            let hn = norm2(&w);
            h[k + 1][k] = hn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iters += 1;
            k_used = k + 1;
            if g[k + 1].abs() / bnorm <= tol * 0.5 || hn == 0.0 || iters >= max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        // back substitution and update x += M⁻¹ V y
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        z.iter_mut().for_each(|v| *v = 0.0);
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                z[i] += yj * basis[j][i];
            }
        }
        if let Some(p) = prec {
            p.apply(&mut z);
        }
        for i in 0..n {
            x[i] += z[i];
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SolverFailure(
                "GMRES produced non-finite values".into(),
            ));
        }
    }
}

/// A prepared solver for a fixed matrix.
#[derive(Clone, Debug)]
pub enum LinearSolver {
    Direct {
        a: SparseOperator,
        lu: SparseLu,
    },
    Iterative {
        a: SparseOperator,
        ilu: Option<Ilu0>,
        tol: f64,
        max_iter: usize,
    },
}

impl LinearSolver {
    pub fn new(a: &SparseOperator, kind: LinearSolverKind) -> Result<Self> {
        a.check_square(a.nrows())?;
        Ok(match kind {
            LinearSolverKind::Direct => LinearSolver::Direct {
                a: a.clone(),
                lu: SparseLu::factor(a)?,
            },
            LinearSolverKind::Iterative { tol, max_iter } => LinearSolver::Iterative {
                a: a.clone(),
                // fall back to unpreconditioned GMRES if ILU(0) breaks down
                ilu: Ilu0::new(a).ok(),
                tol,
                max_iter,
            },
        })
    }

    /// Direct solver with a caller-chosen column order.
    pub fn direct_with_order(a: &SparseOperator, order: Vec<usize>) -> Result<Self> {
        Ok(LinearSolver::Direct {
            a: a.clone(),
            lu: SparseLu::factor_with_order(a, order)?,
        })
    }

    pub fn matrix(&self) -> &SparseOperator {
        match self {
            LinearSolver::Direct { a, .. } | LinearSolver::Iterative { a, .. } => a,
        }
    }

    /// Solves `A x = b`; `guess` warm-starts the iterative solver.
    pub fn solve(&self, b: &[f64], guess: Option<&[f64]>) -> Result<Vec<f64>> {
        let n = self.matrix().nrows();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        match self {
            LinearSolver::Direct { a, lu } => {
                let mut x = lu.solve(b);
                // one round of iterative refinement
                let ax = a.apply(&x);
                let r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
                let dx = lu.solve(&r);
                for (xi, d) in x.iter_mut().zip(&dx) {
                    *xi += d;
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::SolverFailure(
                        "LU solve produced non-finite values".into(),
                    ));
                }
                Ok(x)
            }
            LinearSolver::Iterative {
                a,
                ilu,
                tol,
                max_iter,
            } => {
                let mut x = match guess {
                    Some(g) => g.to_vec(),
                    None => vec![0.0; n],
                };
                gmres(a, ilu.as_ref(), b, &mut x, *tol, *max_iter)?;
                Ok(x)
            }
        }
    }
}
