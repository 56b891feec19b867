//! Krylov solvers on plain vectors: restarted right-preconditioned GMRES and a
//! Lanczos iteration for the lowest eigenvalue of an operator that is
//! self-adjoint in a weighted inner product.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (p, q) in y.iter_mut().zip(x) {
        *p += a * q;
    }
}

/// Outcome of a GMRES solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmresInfo {
    pub iterations: usize,
    /// `|b - A x| / |b|` from the Arnoldi recurrence.
    pub rel_residual: f64,
}

/// Solves `A x = b` by GMRES(`restart`) with right preconditioner `M`
/// (`x = M y`, `A M y = b`), starting from `x = 0`.
pub fn gmres(
    apply: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    precond: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<(Vec<f64>, GmresInfo)> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, GmresInfo { iterations: 0, rel_residual: 0.0 }));
    }
    let mut total = 0;
    let mut rel;
    while total < max_iter {
        let ax = apply(&x)?;
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= tol {
            break;
        }
        let m = restart.min(max_iter - total);
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|c| c / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut gvec = vec![0.0; m + 1];
        gvec[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let z = precond(&v[k]);
            let mut w = apply(&z)?;
            for (j, vj) in v.iter().enumerate() {
                h[j][k] = dot(&w, vj);
                axpy(&mut w, -h[j][k], vj);
            }
            // second pass against loss of orthogonality
            for (j, vj) in v.iter().enumerate() {
                let c = dot(&w, vj);
                h[j][k] += c;
                axpy(&mut w, -c, vj);
            }
            h[k + 1][k] = norm(&w);
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            if d == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            gvec[k + 1] = -sn[k] * gvec[k];
            gvec[k] *= cs[k];
            k_used = k + 1;
            total += 1;
            rel = gvec[k + 1].abs() / bnorm;
            let wn = norm(&w);
            if rel <= tol || wn == 0.0 {
                break;
            }
            v.push(w.iter().map(|c| c / wn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = gvec[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut dy = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            axpy(&mut dy, *yj, &v[j]);
        }
        let dx = precond(&dy);
        axpy(&mut x, 1.0, &dx);
        if rel <= tol || k_used == 0 {
            break;
        }
    }
    let ax = apply(&x)?;
    let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let true_rel = norm(&r) / bnorm;
    if !true_rel.is_finite() {
        return Err(Error::Solver { what: "GMRES", residual: true_rel });
    }
    Ok((x, GmresInfo { iterations: total, rel_residual: true_rel }))
}

/// Lowest eigenpair of `B = W^{-1} K`, where `K` and `W` are symmetric and `W`
/// is positive definite, by Lanczos with full reorthogonalization in the
/// `W` inner product. `apply_b(x)` returns `(B x, K x)`; `apply_w(x)` returns `W x`.
pub fn lanczos_lowest(
    apply_b: &mut dyn FnMut(&[f64]) -> Result<(Vec<f64>, Vec<f64>)>,
    apply_w: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    start: &[f64],
    steps: usize,
    tol: f64,
) -> Result<(f64, Vec<f64>)> {
    let n = start.len();
    let w0 = apply_w(start);
    let s = dot(start, &w0).sqrt();
    if !(s > 0.0) {
        return Err(Error::Eigen("Lanczos start vector is zero".into()));
    }
    let mut q: Vec<Vec<f64>> = vec![start.iter().map(|c| c / s).collect()];
    let mut wq: Vec<Vec<f64>> = vec![w0.iter().map(|c| c / s).collect()];
    let (mut alpha, mut beta): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    let mut last = f64::NAN;
    let mut result: Option<(f64, Vec<f64>)> = None;
    for k in 0..steps.min(n) {
        let (mut r, kq) = apply_b(&q[k])?;
        let a = dot(&q[k], &kq);
        alpha.push(a);
        axpy(&mut r, -a, &q[k]);
        if k > 0 {
            axpy(&mut r, -beta[k - 1], &q[k - 1]);
        }
        for _ in 0..2 {
            for j in 0..=k {
                let c = dot(&r, &wq[j]);
                axpy(&mut r, -c, &q[j]);
            }
        }
        let wr = apply_w(&r);
        let b = dot(&r, &wr).max(0.0).sqrt();
        // Ritz values of the current tridiagonal matrix
        let m = k + 1;
        let mut t = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (imin, &lmin) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty spectrum");
        let resid = b * eig.eigenvectors[(m - 1, imin)].abs();
        let converged = resid <= tol * lmin.abs().max(1.0) || (lmin - last).abs() <= tol * lmin.abs().max(1e-300);
        if converged || b <= 1e-14 * a.abs().max(1.0) || k + 1 == steps.min(n) {
            let mut vec = vec![0.0; n];
            for (j, qj) in q.iter().enumerate() {
                axpy(&mut vec, eig.eigenvectors[(j, imin)], qj);
            }
            result = Some((lmin, vec));
            if converged || b <= 1e-14 * a.abs().max(1.0) {
                break;
            }
        }
        last = lmin;
        beta.push(b);
        q.push(r.iter().map(|c| c / b).collect());
        wq.push(wr.iter().map(|c| c / b).collect());
    }
    result.ok_or_else(|| Error::Eigen("Lanczos produced no Ritz pair".into()))
}
