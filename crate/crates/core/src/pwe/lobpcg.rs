//! Block preconditioned conjugate-gradient eigensolver for the lowest
//! eigenpairs of a real symmetric positive semi-definite matrix.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct LobpcgOptions {
    /// Columns that must converge.
    pub wanted: usize,
    /// Extra columns that speed up convergence of the last wanted ones.
    pub guard: usize,
    /// Absolute residual tolerance, scaled by the largest diagonal entry.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for LobpcgOptions {
    fn default() -> Self {
        Self {
            wanted: 6,
            guard: 4,
            tol: 1e-8,
            max_iter: 2000,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LobpcgResult {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    pub iterations: usize,
    /// Largest scaled residual over the wanted pairs.
    pub residual: f64,
    pub converged: bool,
}

/// Orthonormalize the columns of `s` (and apply the same map to `as_`),
/// dropping numerically dependent directions.
fn orthonormalize(s: &DMatrix<f64>, as_: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let gram = s.transpose() * s;
    let gram = (&gram + gram.transpose()) * 0.5;
    let eig = gram.symmetric_eigen();
    let top = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > 1e-13 * top)
        .collect();
    let mut c = DMatrix::zeros(s.ncols(), keep.len());
    for (col, &i) in keep.iter().enumerate() {
        let scale = 1.0 / eig.eigenvalues[i].sqrt();
        c.set_column(col, &(eig.eigenvectors.column(i) * scale));
    }
    (s * &c, as_ * &c, c)
}

/// Lowest `opts.wanted` eigenpairs of the operator `apply` acting on
/// column blocks of dimension `n`. `diag` is the operator diagonal, used as a
/// Jacobi preconditioner.
pub fn lobpcg<F>(n: usize, apply: F, diag: &DVector<f64>, opts: LobpcgOptions) -> LobpcgResult
where
    F: Fn(&DMatrix<f64>) -> DMatrix<f64>,
{
    let m = (opts.wanted + opts.guard).min(n);
    let wanted = opts.wanted.min(m);
    let scale = diag.iter().cloned().fold(0.0f64, f64::max).max(1e-300);
    let floor = 1e-3 * scale;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let x0 = DMatrix::from_fn(n, m, |_, _| rng.random::<f64>() - 0.5);
    let ax0 = apply(&x0);
    let (mut x, mut ax, _) = orthonormalize(&x0, &ax0);
    let mut lambda = vec![0.0; m];
    let mut p: Option<(DMatrix<f64>, DMatrix<f64>)> = None;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    // initial Rayleigh-Ritz
    {
        let red = x.transpose() * &ax;
        let red = (&red + red.transpose()) * 0.5;
        let eig = red.symmetric_eigen();
        let order = sorted(&eig.eigenvalues);
        let y = DMatrix::from_fn(x.ncols(), m.min(x.ncols()), |r, c| eig.eigenvectors[(r, order[c])]);
        x = &x * &y;
        ax = &ax * &y;
        for (c, &o) in order.iter().take(x.ncols()).enumerate() {
            lambda[c] = eig.eigenvalues[o];
        }
    }

    for it in 0..opts.max_iter {
        iterations = it + 1;
        if it > 0 && it % 25 == 0 {
            ax = apply(&x);
        }
        let mut r = ax.clone();
        for c in 0..x.ncols() {
            let col = x.column(c) * lambda[c];
            let mut rc = r.column_mut(c);
            rc -= col;
        }
        residual = (0..wanted).map(|c| r.column(c).norm() / scale).fold(0.0, f64::max);
        if residual < opts.tol {
            converged = true;
            break;
        }
        let mut w = r;
        for c in 0..w.ncols() {
            for i in 0..n {
                let d = (diag[i] - lambda[c]).abs().max(floor);
                w[(i, c)] /= d;
            }
        }
        let xtw = x.transpose() * &w;
        w -= &x * xtw;
        normalize_columns(&mut w, None);
        let aw = apply(&w);
        if let Some((pm, apm)) = p.as_mut() {
            normalize_columns(pm, Some(apm));
        }

        let k = x.ncols();
        let (s, as_) = match &p {
            Some((pm, apm)) => (concat(&[&x, &w, pm]), concat(&[&ax, &aw, apm])),
            None => (concat(&[&x, &w]), concat(&[&ax, &aw])),
        };
        // two passes recover the accuracy lost by squaring in the Gram matrix
        let (q1, aq1, c1) = orthonormalize(&s, &as_);
        let (q, aq, c2) = orthonormalize(&q1, &aq1);
        let c0 = c1 * c2;
        let red = q.transpose() * &aq;
        let red = (&red + red.transpose()) * 0.5;
        let eig = red.symmetric_eigen();
        let order = sorted(&eig.eigenvalues);
        let keep = k.min(q.ncols());
        let y = DMatrix::from_fn(q.ncols(), keep, |r, c| eig.eigenvectors[(r, order[c])]);
        let x_new = &q * &y;
        let ax_new = &aq * &y;
        // search direction: the part of the update outside the old X block
        let coef = &c0 * &y;
        let tail = coef.rows(k, coef.nrows() - k).into_owned();
        let s_tail = s.columns(k, s.ncols() - k).into_owned();
        let as_tail = as_.columns(k, as_.ncols() - k).into_owned();
        p = Some((&s_tail * &tail, &as_tail * &tail));
        x = x_new;
        ax = ax_new;
        for (c, &o) in order.iter().take(keep).enumerate() {
            lambda[c] = eig.eigenvalues[o];
        }
    }

    let values = lambda[..wanted].to_vec();
    LobpcgResult {
        values,
        vectors: x.columns(0, wanted).into_owned(),
        iterations,
        residual,
        converged,
    }
}

fn normalize_columns(m: &mut DMatrix<f64>, paired: Option<&mut DMatrix<f64>>) {
    let norms: Vec<f64> = m.column_iter().map(|c| c.norm()).collect();
    for (c, &nrm) in norms.iter().enumerate() {
        if nrm > 0.0 {
            m.column_mut(c).scale_mut(1.0 / nrm);
        }
    }
    if let Some(p) = paired {
        for (c, &nrm) in norms.iter().enumerate() {
            if nrm > 0.0 {
                p.column_mut(c).scale_mut(1.0 / nrm);
            }
        }
    }
}

fn sorted(v: &DVector<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap_or(std::cmp::Ordering::Equal));
    idx
}

fn concat(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks[0].nrows();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.columns_mut(at, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    out
}
