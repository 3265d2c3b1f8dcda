use super::{ConvergedReason, Orthogonalization, SolveCtx, SolveReport};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2};

pub(crate) type PcFn<'a> = dyn Fn(&[f64], &mut [f64]) -> Result<()> + 'a;

fn project(ctx: &SolveCtx, v: &mut [f64]) {
    if let Some(ns) = ctx.ns {
        ns.project(v);
    }
}

fn precondition(ctx: &SolveCtx, pc: &PcFn, r: &[f64], z: &mut [f64]) -> Result<()> {
    pc(r, z)?;
    project(ctx, z);
    Ok(())
}

/// `r = b - A x`
fn residual(ctx: &SolveCtx, b: &[f64], x: &[f64], r: &mut [f64]) -> Result<()> {
    ctx.a.apply(x, r)?;
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    Ok(())
}

fn check_nan(v: f64, iteration: usize) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::DivergedNaN { iteration })
    }
}

struct Tracker {
    history: Vec<f64>,
    tol: f64,
    atol: f64,
}

impl Tracker {
    fn start(ctx: &SolveCtx, r0: f64) -> Result<Tracker> {
        check_nan(r0, 0)?;
        ctx.monitor(0, r0);
        Ok(Tracker { history: vec![r0], tol: ctx.tolerance(r0), atol: ctx.ksp.atol })
    }

    fn record(&mut self, ctx: &SolveCtx, it: usize, norm: f64) -> Result<()> {
        check_nan(norm, it)?;
        ctx.monitor(it, norm);
        self.history.push(norm);
        Ok(())
    }

    fn done(&self, norm: f64) -> bool {
        norm <= self.tol
    }

    fn finish(self, converged: bool, iterations: usize) -> SolveReport {
        let norm = *self.history.last().expect("history starts with r0");
        let reason = if !converged {
            ConvergedReason::DivergedMaxIts
        } else if norm <= self.atol {
            ConvergedReason::AbsoluteTolerance
        } else {
            ConvergedReason::RelativeTolerance
        };
        SolveReport {
            converged,
            reason,
            iterations,
            residual_norm: norm,
            true_residual_norm: None,
            history: self.history,
        }
    }
}

pub(crate) fn preonly(ctx: &SolveCtx, b: &[f64], x: &mut [f64]) -> Result<SolveReport> {
    precondition(ctx, &|r, z| ctx.ksp.pc.apply(r, z), b, x)?;
    Ok(SolveReport {
        converged: true,
        reason: ConvergedReason::Iterations,
        iterations: 1,
        residual_norm: f64::NAN,
        true_residual_norm: None,
        history: Vec::new(),
    })
}

pub(crate) fn richardson(ctx: &SolveCtx, b: &[f64], x: &mut [f64]) -> Result<SolveReport> {
    let n = b.len();
    let pc = |r: &[f64], z: &mut [f64]| ctx.ksp.pc.apply(r, z);
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    residual(ctx, b, x, &mut r)?;
    precondition(ctx, &pc, &r, &mut z)?;
    let mut track = Tracker::start(ctx, norm2(&z))?;
    let mut it = 0;
    while !track.done(track.history[it]) {
        if it == ctx.ksp.max_it {
            return Ok(track.finish(false, it));
        }
        axpy(ctx.ksp.richardson_scale, &z, x);
        it += 1;
        residual(ctx, b, x, &mut r)?;
        precondition(ctx, &pc, &r, &mut z)?;
        track.record(ctx, it, norm2(&z))?;
    }
    Ok(track.finish(true, it))
}

pub(crate) fn cg(ctx: &SolveCtx, b: &[f64], x: &mut [f64]) -> Result<SolveReport> {
    let n = b.len();
    let pc = |r: &[f64], z: &mut [f64]| ctx.ksp.pc.apply(r, z);
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut ap = vec![0.0; n];
    residual(ctx, b, x, &mut r)?;
    precondition(ctx, &pc, &r, &mut z)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut track = Tracker::start(ctx, norm2(&z))?;
    let mut it = 0;
    loop {
        if track.done(track.history[it]) {
            return Ok(track.finish(true, it));
        }
        if it == ctx.ksp.max_it {
            return Ok(track.finish(false, it));
        }
        if rz < 0.0 {
            return Err(Error::IndefiniteOperator { iteration: it });
        }
        ctx.a.apply(&p, &mut ap)?;
        let pap = dot(&p, &ap);
        check_nan(pap, it)?;
        if pap <= 0.0 {
            return Err(Error::IndefiniteOperator { iteration: it });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        precondition(ctx, &pc, &r, &mut z)?;
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
        it += 1;
        track.record(ctx, it, norm2(&z))?;
    }
}

pub(crate) fn gmres(ctx: &SolveCtx, b: &[f64], x: &mut [f64], right: bool, flexible: bool) -> Result<SolveReport> {
    let pc = |r: &[f64], z: &mut [f64]| ctx.ksp.pc.apply(r, z);
    gmres_with(ctx, &pc, b, x, right, flexible)
}

/// Restarted GMRES. `right` selects right preconditioning; `flexible` keeps
/// the preconditioned directions so the preconditioner may vary.
pub(crate) fn gmres_with(
    ctx: &SolveCtx,
    pc: &PcFn,
    b: &[f64],
    x: &mut [f64],
    right: bool,
    flexible: bool,
) -> Result<SolveReport> {
    let n = b.len();
    let m = ctx.ksp.restart.max(1);
    let mut r = vec![0.0; n];
    let mut t = vec![0.0; n];

    // Left: preconditioned residual. Right: true residual.
    let start_residual = |x: &[f64], r: &mut [f64], t: &mut [f64]| -> Result<()> {
        if right {
            residual(ctx, b, x, r)
        } else {
            residual(ctx, b, x, t)?;
            precondition(ctx, pc, t, r)
        }
    };

    start_residual(x, &mut r, &mut t)?;
    let mut beta = norm2(&r);
    let mut track = Tracker::start(ctx, beta)?;
    if track.done(beta) {
        return Ok(track.finish(true, 0));
    }
    let mut it = 0;
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut zs: Vec<Vec<f64>> = Vec::new();
    // Hessenberg stored by column, already rotated to upper triangular.
    let mut h: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];

    loop {
        v.clear();
        zs.clear();
        h.clear();
        g.iter_mut().for_each(|gi| *gi = 0.0);
        g[0] = beta;
        v.push(r.iter().map(|ri| ri / beta).collect());
        let mut k = 0;
        let mut converged = false;
        let mut exhausted = false;
        while k < m {
            if it == ctx.ksp.max_it {
                exhausted = true;
                break;
            }
            let mut w = vec![0.0; n];
            if right {
                let mut z = vec![0.0; n];
                precondition(ctx, pc, &v[k], &mut z)?;
                ctx.a.apply(&z, &mut w)?;
                if flexible {
                    zs.push(z);
                }
            } else {
                ctx.a.apply(&v[k], &mut t)?;
                precondition(ctx, pc, &t, &mut w)?;
            }
            let mut col = vec![0.0; k + 2];
            match ctx.ksp.orthogonalization {
                Orthogonalization::Classical => {
                    for (i, vi) in v.iter().enumerate() {
                        col[i] = dot(&w, vi);
                    }
                    for (i, vi) in v.iter().enumerate() {
                        axpy(-col[i], vi, &mut w);
                    }
                }
                Orthogonalization::Modified => {
                    for (i, vi) in v.iter().enumerate() {
                        col[i] = dot(&w, vi);
                        axpy(-col[i], vi, &mut w);
                    }
                }
            }
            let hnext = norm2(&w);
            check_nan(hnext, it)?;
            col[k + 1] = hnext;
            for i in 0..k {
                let (a, b2) = (col[i], col[i + 1]);
                col[i] = cs[i] * a + sn[i] * b2;
                col[i + 1] = -sn[i] * a + cs[i] * b2;
            }
            let (a, b2) = (col[k], col[k + 1]);
            let rho = a.hypot(b2);
            if rho == 0.0 {
                return Err(Error::Breakdown { iteration: it });
            }
            cs[k] = a / rho;
            sn[k] = b2 / rho;
            col[k] = rho;
            col[k + 1] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            h.push(col);
            k += 1;
            it += 1;
            let res = g[k].abs();
            track.record(ctx, it, res)?;
            let happy = hnext <= 1e-14 * rho.max(f64::MIN_POSITIVE);
            if track.done(res) || happy {
                converged = true;
                break;
            }
            v.push(w.iter().map(|wi| wi / hnext).collect());
        }

        if k > 0 {
            // back substitution R y = g
            let mut y = vec![0.0; k];
            for i in (0..k).rev() {
                let mut s = g[i];
                for j in i + 1..k {
                    s -= h[j][i] * y[j];
                }
                let d = h[i][i];
                if d == 0.0 {
                    return Err(Error::Breakdown { iteration: it });
                }
                y[i] = s / d;
            }
            if flexible {
                for (zj, yj) in zs.iter().zip(&y) {
                    axpy(*yj, zj, x);
                }
            } else {
                let mut u = vec![0.0; n];
                for (vj, yj) in v.iter().zip(&y) {
                    axpy(*yj, vj, &mut u);
                }
                if right {
                    let mut z = vec![0.0; n];
                    precondition(ctx, pc, &u, &mut z)?;
                    axpy(1.0, &z, x);
                } else {
                    axpy(1.0, &u, x);
                }
            }
        }
        if converged {
            return Ok(track.finish(true, it));
        }
        if exhausted {
            return Ok(track.finish(false, it));
        }
        start_residual(x, &mut r, &mut t)?;
        beta = norm2(&r);
        check_nan(beta, it)?;
        if track.done(beta) {
            *track.history.last_mut().expect("nonempty") = beta;
            return Ok(track.finish(true, it));
        }
    }
}
