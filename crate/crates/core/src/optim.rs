//! Unconstrained minimizers used by the likelihood fits: Nelder–Mead simplex
//! (derivative-free) and BFGS with a backtracking line search, plus
//! finite-difference helpers.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_iter: usize,
    /// Stop when the spread of simplex values falls below `f_tol * (1 + |f_best|)`.
    pub f_tol: f64,
    /// ... and every vertex is within `x_tol` (max-norm) of the best one.
    pub x_tol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            f_tol: 1e-12,
            x_tol: 1e-8,
        }
    }
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Nelder–Mead with the standard reflection/expansion/contraction/shrink
/// coefficients (1, 2, 1/2, 1/2). Non-finite objective values count as +∞.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], step: &[f64], opts: SimplexOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(step.len(), n);
    let mut eval = |x: &[f64]| finite_or_inf(f(x));

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += step[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = values[0];
        let worst = values[n];
        let spread = if worst.is_finite() { worst - best } else { f64::INFINITY };
        let size = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= opts.f_tol * (1.0 + best.abs()) && size <= opts.x_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(-0.5);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(0.5);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // shrink toward the best vertex
        for i in 1..=n {
            let v: Vec<f64> = simplex[0]
                .iter()
                .zip(&simplex[i])
                .map(|(b, x)| b + 0.5 * (x - b))
                .collect();
            values[i] = eval(&v);
            simplex[i] = v;
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap();
    Minimum {
        x: simplex[best].clone(),
        f: values[best],
        iterations,
        converged,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuasiNewtonOptions {
    pub max_iter: usize,
    /// Converged when the gradient's Euclidean norm drops below this.
    pub grad_tol: f64,
}

impl Default for QuasiNewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            grad_tol: 1e-6,
        }
    }
}

/// BFGS on the inverse Hessian with Armijo backtracking.
pub fn bfgs<F, G>(mut f: F, mut grad: G, x0: &[f64], opts: QuasiNewtonOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Vec<f64>,
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = finite_or_inf(f(x.as_slice()));
    let mut g = DVector::from_vec(grad(x.as_slice()));
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut iterations = 0;
    let mut converged = g.norm() < opts.grad_tol;

    while !converged && iterations < opts.max_iter && fx.is_finite() {
        iterations += 1;
        let mut dir = -(&h * &g);
        let mut slope = g.dot(&dir);
        if !(slope < 0.0) {
            h = DMatrix::identity(n, n);
            dir = -g.clone();
            slope = -g.norm_squared();
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + t * &dir;
            let ft = finite_or_inf(f(trial.as_slice()));
            if ft <= fx + 1e-4 * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            if h != DMatrix::identity(n, n) {
                h = DMatrix::identity(n, n);
                continue;
            }
            break;
        };
        let g_new = DVector::from_vec(grad(x_new.as_slice()));
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H+ = H + (1 + ρ yᵀHy) ρ ssᵀ − ρ (H y sᵀ + s yᵀ H)
            h += (1.0 + rho * yhy) * rho * (&s * s.transpose())
                - rho * (&hy * s.transpose() + &s * hy.transpose());
        }
        let improvement = fx - f_new;
        x = x_new;
        fx = f_new;
        g = g_new;
        converged = g.norm() < opts.grad_tol;
        if !converged && improvement.abs() <= 1e-16 * (1.0 + fx.abs()) && s.amax() < 1e-14 {
            break;
        }
    }
    Minimum {
        x: x.as_slice().to_vec(),
        f: fx,
        iterations,
        converged,
    }
}

/// Central-difference gradient with absolute step `h`.
pub fn central_gradient<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Hessian from function values with absolute step `h`.
pub fn central_hessian<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> DMatrix<f64> {
    let n = x.len();
    let f0 = f(x);
    let mut p = x.to_vec();
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        p[i] = x[i] + h;
        let up = f(&p);
        p[i] = x[i] - h;
        let down = f(&p);
        p[i] = x[i];
        hess[(i, i)] = (up - 2.0 * f0 + down) / (h * h);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| {
                p[i] = x[i] + si * h;
                p[j] = x[j] + sj * h;
                let v = f(&p);
                p[i] = x[i];
                p[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

/// Inverse of a symmetric matrix via Cholesky; `None` unless positive definite.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.cholesky().map(|c| c.inverse())
}
