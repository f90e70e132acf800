//! Restarted GMRES with right preconditioning.

use crate::torus::ordered_dot;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOutcome {
    pub iterations: usize,
    /// Final `‖b − Ax‖ / ‖b‖`.
    pub relative_residual: f64,
    pub converged: bool,
}

fn norm(v: &[f64]) -> f64 {
    ordered_dot(v, v).sqrt()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

/// Solves `A x = b` starting from `x`, iterating on `A M⁻¹`.
///
/// `apply_a(v, out)` and `apply_m_inv(v, out)` overwrite `out`.
pub fn gmres<A, M>(
    mut apply_a: A,
    mut apply_m_inv: M,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    restart: usize,
    max_iters: usize,
) -> GmresOutcome
where
    A: FnMut(&[f64], &mut [f64]),
    M: FnMut(&[f64], &mut [f64]),
{
    let len = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return GmresOutcome { iterations: 0, relative_residual: 0.0, converged: true };
    }
    let restart = restart.max(1);
    let mut total = 0;
    let mut r = vec![0.0; len];
    let mut tmp = vec![0.0; len];
    let mut z = vec![0.0; len];
    loop {
        apply_a(x, &mut tmp);
        r.iter_mut().zip(b.iter().zip(&tmp)).for_each(|(ri, (bi, ti))| *ri = bi - ti);
        let beta = norm(&r);
        let rel = beta / bnorm;
        if rel <= tol || total >= max_iters {
            return GmresOutcome { iterations: total, relative_residual: rel, converged: rel <= tol };
        }
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(restart + 1);
        v.push(r.iter().map(|ri| ri / beta).collect());
        // h is stored column-wise: h[j] has j+2 entries
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(restart);
        let mut cs: Vec<f64> = Vec::with_capacity(restart);
        let mut sn: Vec<f64> = Vec::with_capacity(restart);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k = 0;
        while k < restart && total < max_iters {
            apply_m_inv(&v[k], &mut z);
            let mut w = vec![0.0; len];
            apply_a(&z, &mut w);
            let mut col = vec![0.0; k + 2];
            for (i, vi) in v.iter().enumerate() {
                let hij = ordered_dot(&w, vi);
                col[i] = hij;
                axpy(-hij, vi, &mut w);
            }
            // one reorthogonalization pass keeps the basis orthogonal in long cycles
            for (i, vi) in v.iter().enumerate() {
                let corr = ordered_dot(&w, vi);
                col[i] += corr;
                axpy(-corr, vi, &mut w);
            }
            let wn = norm(&w);
            col[k + 1] = wn;
            for i in 0..k {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let denom = col[k].hypot(col[k + 1]);
            let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (col[k] / denom, col[k + 1] / denom) };
            col[k] = denom;
            col[k + 1] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;
            cs.push(c);
            sn.push(s);
            h.push(col);
            k += 1;
            total += 1;
            if g[k].abs() / bnorm <= tol || wn == 0.0 {
                break;
            }
            w.iter_mut().for_each(|wi| *wi /= wn);
            v.push(w);
        }
        // back substitution for the k×k triangular system
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in (i + 1)..k {
                s -= h[j][i] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut update = vec![0.0; len];
        for (j, yj) in y.iter().enumerate() {
            axpy(*yj, &v[j], &mut update);
        }
        apply_m_inv(&update, &mut z);
        axpy(1.0, &z, x);
    }
}
