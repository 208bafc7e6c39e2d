//! Dense vector helpers and the two Krylov solvers used by the solvers:
//! preconditioned CG for the SPD stiffness operator and preconditioned MINRES
//! for the (possibly indefinite) energy Hessian.

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovInfo {
    pub iterations: usize,
    /// Final (preconditioned-norm for MINRES, Euclidean for CG) residual
    /// relative to `‖b‖`.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Preconditioned conjugate gradients for `A x = b` from `x = 0`, with a
/// diagonal preconditioner given by its inverse entries.
pub fn pcg<A>(
    apply: A,
    inv_diag: &[f64],
    b: &[f64],
    rtol: f64,
    max_iters: usize,
) -> (Vec<f64>, KrylovInfo)
where
    A: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return (
            x,
            KrylovInfo {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
            },
        );
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(a, m)| a * m).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = 1.0;
    for k in 0..max_iters {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return (
                x,
                KrylovInfo {
                    iterations: k,
                    relative_residual: rel,
                    converged: false,
                },
            );
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        rel = norm(&r) / bnorm;
        if rel <= rtol {
            return (
                x,
                KrylovInfo {
                    iterations: k + 1,
                    relative_residual: rel,
                    converged: true,
                },
            );
        }
        for ((zi, ri), m) in z.iter_mut().zip(&r).zip(inv_diag) {
            *zi = ri * m;
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    (
        x,
        KrylovInfo {
            iterations: max_iters,
            relative_residual: rel,
            converged: false,
        },
    )
}

/// Preconditioned MINRES (Paige–Saunders) for symmetric, possibly
/// indefinite `A x = b` from `x = 0`. The preconditioner is diagonal and
/// positive, passed as its inverse entries. Convergence is judged on the
/// preconditioned residual estimate relative to its initial value.
pub fn minres<A>(
    apply: A,
    inv_diag: &[f64],
    b: &[f64],
    rtol: f64,
    max_iters: usize,
) -> (Vec<f64>, KrylovInfo)
where
    A: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let precond = |r: &[f64]| -> Vec<f64> { r.iter().zip(inv_diag).map(|(a, m)| a * m).collect() };

    let mut r1 = b.to_vec();
    let mut y = precond(&r1);
    let beta1 = dot(&r1, &y);
    if !(beta1 > 0.0) {
        return (
            x,
            KrylovInfo {
                iterations: 0,
                relative_residual: 0.0,
                converged: beta1 == 0.0,
            },
        );
    }
    let beta1 = beta1.sqrt();
    let mut r2 = r1.clone();
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut av = vec![0.0; n];
    let mut rel = 1.0;

    for k in 0..max_iters {
        let s = 1.0 / beta;
        for (vi, yi) in v.iter_mut().zip(&y) {
            *vi = s * yi;
        }
        apply(&v, &mut av);
        let mut yk = av.clone();
        if k > 0 {
            axpy(-beta / oldb, &r1, &mut yk);
        }
        let alfa = dot(&v, &yk);
        axpy(-alfa / beta, &r2, &mut yk);
        r1 = std::mem::replace(&mut r2, yk);
        y = precond(&r2);
        oldb = beta;
        let b2 = dot(&r2, &y);
        if b2 < 0.0 {
            // preconditioner lost positivity; should not happen for a positive diagonal
            break;
        }
        beta = b2.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::MIN_POSITIVE);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let denom = 1.0 / gamma;
        let w1 = std::mem::replace(&mut w2, w.clone());
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) * denom;
        }
        axpy(phi, &w, &mut x);

        rel = phibar / beta1;
        if rel <= rtol || beta == 0.0 {
            return (
                x,
                KrylovInfo {
                    iterations: k + 1,
                    relative_residual: rel,
                    converged: true,
                },
            );
        }
    }
    (
        x,
        KrylovInfo {
            iterations: max_iters,
            relative_residual: rel,
            converged: false,
        },
    )
}
