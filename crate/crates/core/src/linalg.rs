//! Dense linear-algebra kernels: restarted GMRES over matrix-shaped vectors
//! and a Schur-based Sylvester solver used as its preconditioner.

use crate::{CMatrix, Error, Result, C64};

#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    pub restart: usize,
    pub max_iter: usize,
    /// Relative residual `|b - A x| / |b|` at which to stop.
    pub tol: f64,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions {
            restart: 60,
            max_iter: 2000,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GmresReport {
    pub iterations: usize,
    pub residual: f64,
}

fn dotc(a: &CMatrix, b: &CMatrix) -> C64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| x.conj() * y)
        .sum()
}

fn axpy(alpha: C64, x: &CMatrix, y: &mut CMatrix) {
    for (yv, xv) in y.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *yv += alpha * xv;
    }
}

/// Right-preconditioned restarted GMRES for `A x = b`.
///
/// Vectors are matrices of arbitrary shape with the Frobenius inner product.
/// `precond` applies an approximation of `A^-1`. Returns the last iterate
/// with `Error::NonConvergence` if the tolerance is not met.
pub fn gmres<A, P>(
    mut apply: A,
    mut precond: P,
    b: &CMatrix,
    x0: Option<&CMatrix>,
    opts: GmresOptions,
) -> Result<(CMatrix, GmresReport)>
where
    A: FnMut(&CMatrix) -> CMatrix,
    P: FnMut(&CMatrix) -> CMatrix,
{
    let bnorm = b.norm();
    let mut x = match x0 {
        Some(x) => x.clone(),
        None => CMatrix::zeros(b.nrows(), b.ncols()),
    };
    if bnorm == 0.0 {
        return Ok((CMatrix::zeros(b.nrows(), b.ncols()), GmresReport { iterations: 0, residual: 0.0 }));
    }
    let m = opts.restart.max(1);
    let mut total = 0usize;
    let mut rel;
    loop {
        let r = b - apply(&x);
        let beta = r.norm();
        rel = beta / bnorm;
        if rel <= opts.tol || total >= opts.max_iter {
            break;
        }
        let mut basis: Vec<CMatrix> = Vec::with_capacity(m + 1);
        let mut zs: Vec<CMatrix> = Vec::with_capacity(m);
        basis.push(r / C64::new(beta, 0.0));
        let mut h = vec![vec![C64::new(0.0, 0.0); m]; m + 1];
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![C64::new(0.0, 0.0); m];
        let mut g = vec![C64::new(0.0, 0.0); m + 1];
        g[0] = C64::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..m {
            let z = precond(&basis[k]);
            let mut w = apply(&z);
            zs.push(z);
            for i in 0..=k {
                let hik = dotc(&basis[i], &w);
                h[i][k] = hik;
                axpy(-hik, &basis[i], &mut w);
            }
            // One reorthogonalization pass keeps the basis clean for long cycles.
            for i in 0..=k {
                let c = dotc(&basis[i], &w);
                h[i][k] += c;
                axpy(-c, &basis[i], &mut w);
            }
            let wn = w.norm();
            h[k + 1][k] = C64::new(wn, 0.0);
            for i in 0..k {
                let t = h[i][k];
                let u = h[i + 1][k];
                h[i][k] = cs[i] * t + sn[i] * u;
                h[i + 1][k] = -sn[i].conj() * t + cs[i] * u;
            }
            let a = h[k][k];
            let bb = h[k + 1][k];
            let denom = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = C64::new(0.0, 0.0);
            } else {
                cs[k] = a.norm() / denom;
                let phase = if a.norm() == 0.0 { C64::new(1.0, 0.0) } else { a / a.norm() };
                sn[k] = phase * bb.conj() / denom;
            }
            h[k][k] = cs[k] * a + sn[k] * bb;
            h[k + 1][k] = C64::new(0.0, 0.0);
            g[k + 1] = -sn[k].conj() * g[k];
            g[k] = cs[k] * g[k];
            total += 1;
            k_used = k + 1;
            rel = g[k + 1].norm() / bnorm;
            if rel <= opts.tol || total >= opts.max_iter || wn == 0.0 {
                break;
            }
            basis.push(w / C64::new(wn, 0.0));
        }
        let mut y = vec![C64::new(0.0, 0.0); k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in i + 1..k_used {
                acc -= h[i][j] * y[j];
            }
            y[i] = acc / h[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            axpy(*yi, &zs[i], &mut x);
        }
        if total >= opts.max_iter {
            let r = b - apply(&x);
            rel = r.norm() / bnorm;
            break;
        }
    }
    let report = GmresReport { iterations: total, residual: rel };
    if rel <= opts.tol {
        Ok((x, report))
    } else {
        log::warn!("gmres stopped at relative residual {rel:.3e} after {total} iterations");
        Err(Error::NonConvergence {
            what: "gmres".into(),
            residual: rel,
        })
    }
}

/// Solves `-i (K X - X K^dag) = R` for a fixed square `K` through the
/// complex Schur form `K = Q T Q^dag`.
///
/// Pairs of eigenvalues with `lambda_i - conj(lambda_j)` close to zero (the
/// undamped vacuum sector) get a unit damping instead, so the solve stays
/// bounded; the result is then only an approximate inverse, which is all a
/// preconditioner needs.
#[derive(Debug, Clone)]
pub struct SchurSylvester {
    q: CMatrix,
    t: CMatrix,
}

impl SchurSylvester {
    pub fn new(k: &CMatrix) -> Self {
        let (q, t) = k.clone().schur().unpack();
        SchurSylvester { q, t }
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        (0..self.t.nrows()).map(|i| self.t[(i, i)]).collect()
    }

    pub fn solve(&self, r: &CMatrix) -> CMatrix {
        let n = self.t.nrows();
        let i_unit = C64::new(0.0, 1.0);
        let c = self.q.adjoint() * r * &self.q * i_unit;
        let mut y = CMatrix::zeros(n, n);
        let t = &self.t;
        let mut rhs = vec![C64::new(0.0, 0.0); n];
        for j in (0..n).rev() {
            for i in 0..n {
                rhs[i] = c[(i, j)];
            }
            for k in j + 1..n {
                let w = t[(j, k)].conj();
                if w != C64::new(0.0, 0.0) {
                    let yk = &y.as_slice()[k * n..(k + 1) * n];
                    for (ri, yv) in rhs.iter_mut().zip(yk) {
                        *ri += w * yv;
                    }
                }
            }
            let shift = t[(j, j)].conj();
            // Upper-triangular solve (T - shift I) y_j = rhs, column oriented.
            for i in (0..n).rev() {
                let mut d = t[(i, i)] - shift;
                if d.norm() < 1e-10 {
                    d = C64::new(0.0, -1.0);
                }
                let yi = rhs[i] / d;
                y[(i, j)] = yi;
                for p in 0..i {
                    rhs[p] -= t[(p, i)] * yi;
                }
            }
        }
        &self.q * y * self.q.adjoint()
    }
}

/// Eigenvalues of a general complex matrix.
pub fn eigenvalues_general(m: &CMatrix) -> Vec<C64> {
    let t = m.clone().schur().unpack().1;
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order; columns of the returned matrix are the eigenvectors.
pub fn hermitian_eigen_desc(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = CMatrix::from_fn(m.nrows(), order.len(), |i, c| eig.eigenvectors[(i, order[c])]);
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo_random(n: usize, m: usize, seed: u64) -> CMatrix {
        let mut s = seed.wrapping_add(0x9e3779b97f4a7c15);
        let mut next = || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        CMatrix::from_fn(n, m, |_, _| C64::new(next(), next()))
    }

    #[test]
    fn gmres_solves_dense_system() {
        let n = 30;
        let a = pseudo_random(n, n, 1) + CMatrix::identity(n, n) * C64::new(4.0, 1.0);
        let b = pseudo_random(n, 1, 2);
        let (x, rep) = gmres(|v| &a * v, |v| v.clone(), &b, None, GmresOptions { restart: 10, ..Default::default() }).unwrap();
        assert!((&a * &x - &b).norm() / b.norm() < 1e-11);
        assert!(rep.iterations > 0);
    }

    #[test]
    fn exact_preconditioner_converges_in_one_step() {
        let n = 12;
        let a = pseudo_random(n, n, 3) + CMatrix::identity(n, n) * C64::new(3.0, 0.0);
        let inv = a.clone().try_inverse().unwrap();
        let b = pseudo_random(n, 1, 4);
        let (_, rep) = gmres(|v| &a * v, |v| &inv * v, &b, None, GmresOptions::default()).unwrap();
        assert!(rep.iterations <= 2);
    }

    #[test]
    fn sylvester_inverts_coherent_part() {
        let n = 9;
        let h = pseudo_random(n, n, 5);
        let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
        let k = h - CMatrix::identity(n, n) * C64::new(0.0, 0.7);
        let x = pseudo_random(n, n, 6);
        let i_unit = C64::new(0.0, 1.0);
        let r = (&k * &x - &x * k.adjoint()) * (-i_unit);
        let solver = SchurSylvester::new(&k);
        assert!((solver.solve(&r) - x).norm() < 1e-10);
    }

    #[test]
    fn hermitian_eigen_sorted() {
        let m = pseudo_random(6, 6, 8);
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let (vals, vecs) = hermitian_eigen_desc(&h);
        for w in vals.windows(2) {
            assert!(w[0] >= w[1]);
        }
        let recon = &vecs * CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(6, vals.iter().map(|&v| C64::new(v, 0.0)))) * vecs.adjoint();
        assert!((recon - h).norm() < 1e-10);
    }
}
