//! Restarted, diagonally preconditioned primal-dual hybrid gradient for the
//! deterministic equivalent, with a certified stopping rule.

use crate::error::{Error, Result};
use crate::geometry::project_dual_cone;
use crate::numerics::{dot, spectral_norm, DenseVector};

use super::extensive::ExtensiveForm;

#[derive(Debug, Clone, Copy)]
pub struct PdhgOptions {
    pub max_iter: usize,
    /// Target for |primal − dual| + primal infeasibility, relative to
    /// 1 + |value|.
    pub tol: f64,
}

impl Default for PdhgOptions {
    fn default() -> Self {
        PdhgOptions {
            max_iter: 400_000,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct PdhgSolution {
    pub x: DenseVector,
    pub y: DenseVector,
    pub primal: f64,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Certificate {
    primal: f64,
    dual: f64,
    err: f64,
}

fn infeasibility(ef: &ExtensiveForm, kx: &[f64]) -> f64 {
    let mut sq = 0.0;
    for rb in &ef.row_blocks {
        let v: Vec<f64> = rb.rows.clone().map(|i| kx[i] - ef.r[i]).collect();
        let d = rb.cone.distance(&v).expect("row block matches its cone");
        sq += d * d;
    }
    sq.sqrt()
}

fn certificate(ef: &ExtensiveForm, x: &[f64], y: &[f64]) -> Certificate {
    let primal = ef.objective(x);
    let kx = ef.k.matvec(x);
    let infeas = infeasibility(ef, &kx);
    let kty = ef.k.matvec_t(y);
    let mut dual = dot(y, &ef.r);
    for b in &ef.blocks {
        let q: Vec<f64> = kty[b.cols.clone()].iter().map(|v| -v).collect();
        dual += b.conjugate_min(&q);
    }
    Certificate {
        primal,
        dual,
        err: (primal - dual).abs() + infeas,
    }
}

struct Steps {
    tau: Vec<f64>,
    sigma: Vec<f64>,
}

fn steps(ef: &ExtensiveForm) -> Steps {
    let (rows, cols) = (ef.k.rows(), ef.k.cols());
    let mut col_sum = vec![0.0; cols];
    let mut row_sum = vec![0.0; rows];
    for i in 0..rows {
        for j in 0..cols {
            let a = ef.k.get(i, j).abs();
            col_sum[j] += a;
            row_sum[i] += a;
        }
    }
    let tau = ef
        .blocks
        .iter()
        .map(|b| {
            let s = b.cols.clone().map(|j| col_sum[j]).fold(0.0, f64::max);
            if s > 0.0 {
                0.95 / s
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let sigma = ef
        .row_blocks
        .iter()
        .map(|rb| {
            let s = rb.rows.clone().map(|i| row_sum[i]).fold(0.0, f64::max);
            if s > 0.0 {
                0.95 / s
            } else {
                1.0
            }
        })
        .collect();
    Steps { tau, sigma }
}

fn initial_point(ef: &ExtensiveForm) -> Vec<f64> {
    let mut x = vec![0.0; ef.cols()];
    for b in &ef.blocks {
        x[b.cols.clone()].copy_from_slice(&b.start());
    }
    x
}

const CHECK_EVERY: usize = 64;

pub(crate) fn solve(ef: &ExtensiveForm, opts: PdhgOptions) -> Result<PdhgSolution> {
    let st = steps(ef);
    let m = ef.k.rows();
    let mut x = initial_point(ef);
    let mut y = vec![0.0; m];
    let mut x_new = x.clone();
    let mut y_new = y.clone();
    let mut avg_x = x.clone();
    let mut avg_y = y.clone();
    let mut avg_count = 0.0;
    let mut omega: f64 = 1.0;

    let mut restart_x = x.clone();
    let mut restart_y = y.clone();
    let mut restart_err = certificate(ef, &x, &y).err;
    let mut last_candidate_err = f64::INFINITY;
    let mut since_restart = 0usize;
    let mut trace = Vec::new();

    for it in 1..=opts.max_iter {
        let kty = ef.k.matvec_t(&y);
        for (b, tau) in ef.blocks.iter().zip(&st.tau) {
            let q: Vec<f64> = kty[b.cols.clone()].iter().map(|v| -v).collect();
            let step = if tau.is_finite() { tau / omega } else { *tau };
            let cols = b.cols.clone();
            let mut out = vec![0.0; cols.len()];
            b.prox(&x[cols.clone()], &q, step, &mut out);
            x_new[cols].copy_from_slice(&out);
        }
        let extrap: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| 2.0 * a - b).collect();
        let kxe = ef.k.matvec(&extrap);
        for (rb, sigma) in ef.row_blocks.iter().zip(&st.sigma) {
            let s = sigma * omega;
            let trial: Vec<f64> = rb.rows.clone().map(|i| y[i] + s * (ef.r[i] - kxe[i])).collect();
            let p = project_dual_cone(&rb.cone, &trial)?;
            y_new[rb.rows.clone()].copy_from_slice(&p);
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut y, &mut y_new);

        avg_count += 1.0;
        let frac = 1.0 / avg_count;
        for (a, v) in avg_x.iter_mut().zip(&x) {
            *a += frac * (v - *a);
        }
        for (a, v) in avg_y.iter_mut().zip(&y) {
            *a += frac * (v - *a);
        }
        since_restart += 1;

        if it % CHECK_EVERY != 0 && it != opts.max_iter {
            continue;
        }
        let cur = certificate(ef, &x, &y);
        let avg = certificate(ef, &avg_x, &avg_y);
        let (cand, use_avg) = if avg.err < cur.err { (avg, true) } else { (cur, false) };
        trace.push(cand.err);
        let scale = 1.0 + cand.primal.abs().max(cand.dual.abs());
        if cand.err <= opts.tol * scale {
            let (cx, cy) = if use_avg { (avg_x, avg_y) } else { (x, y) };
            return Ok(PdhgSolution {
                x: DenseVector::from(cx),
                y: DenseVector::from(cy),
                primal: cand.primal,
                residual: cand.err,
                iterations: it,
            });
        }

        let restart = cand.err <= 0.2 * restart_err
            || (cand.err <= 0.8 * restart_err && cand.err > last_candidate_err)
            || since_restart as f64 >= 0.36 * it as f64;
        last_candidate_err = cand.err;
        if restart {
            if use_avg {
                x.copy_from_slice(&avg_x);
                y.copy_from_slice(&avg_y);
            }
            let dx = x.iter().zip(&restart_x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let dy = y.iter().zip(&restart_y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if dx > 1e-12 && dy > 1e-12 {
                omega = (0.5 * (dy / dx).ln() + 0.5 * omega.ln()).exp().clamp(1e-6, 1e6);
            }
            restart_x.copy_from_slice(&x);
            restart_y.copy_from_slice(&y);
            restart_err = cand.err;
            last_candidate_err = f64::INFINITY;
            avg_x.copy_from_slice(&x);
            avg_y.copy_from_slice(&y);
            avg_count = 0.0;
            since_restart = 0;
        }
    }

    let residual = trace.last().copied().unwrap_or(f64::INFINITY);
    let stride = (trace.len() / 200).max(1);
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual,
        trace: trace.into_iter().step_by(stride).collect(),
    })
}

/// Smallest conic-constraint violation over 𝒳, by accelerated projected
/// gradient on `½ dist(Kx − r, 𝒦)²`.
pub(crate) fn min_infeasibility(ef: &ExtensiveForm, max_iter: usize) -> Result<f64> {
    if ef.k.rows() == 0 {
        return Ok(0.0);
    }
    let lip = spectral_norm(&ef.k)?.powi(2);
    if lip == 0.0 {
        return Ok(infeasibility(ef, &vec![0.0; ef.k.rows()]));
    }
    let project = |z: &[f64]| {
        let mut out = vec![0.0; z.len()];
        for b in &ef.blocks {
            out[b.cols.clone()].copy_from_slice(&b.project(&z[b.cols.clone()]));
        }
        out
    };
    let residual = |x: &[f64]| -> Result<Vec<f64>> {
        let kx = ef.k.matvec(x);
        let mut res = vec![0.0; kx.len()];
        for rb in &ef.row_blocks {
            let v: Vec<f64> = rb.rows.clone().map(|i| kx[i] - ef.r[i]).collect();
            let p = rb.cone.project(&v)?;
            for (k, i) in rb.rows.clone().enumerate() {
                res[i] = v[k] - p[k];
            }
        }
        Ok(res)
    };
    let mut x = initial_point(ef);
    let mut z = x.clone();
    let mut t = 1.0f64;
    let mut best = f64::INFINITY;
    for _ in 0..max_iter {
        let res = residual(&z)?;
        let grad = ef.k.matvec_t(&res);
        let step: Vec<f64> = z.iter().zip(grad.iter()).map(|(a, g)| a - g / lip).collect();
        let x_next = project(&step);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = x_next
            .iter()
            .zip(&x)
            .map(|(a, b)| a + (t - 1.0) / t_next * (a - b))
            .collect();
        x = x_next;
        t = t_next;
        let d = crate::numerics::norm2(&residual(&x)?);
        best = best.min(d);
        if best <= 1e-12 {
            break;
        }
    }
    Ok(best)
}
