//! Mehrotra predictor-corrector interior-point method.

use std::borrow::Cow;
use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use super::kkt::{inf_norm, residuals};
use super::matrix::RowMatrix;
use super::newton::{Factor, Structure};
use super::program::{dot, ConvexProgram};
use super::{SolveReport, SolveStatus};

const STATIC_REG: f64 = 1e-10;
const STEP_FRACTION: f64 = 0.99;
/// Normalized certificate threshold for infeasibility and unboundedness.
const CERT_TOL: f64 = 1e-9;
/// Iterates must have grown at least this far before a certificate is trusted.
const CERT_MIN_NORM: f64 = 1e6;

struct Presolved<'a> {
    prog: Cow<'a, ConvexProgram>,
    ineq_map: Vec<Option<usize>>,
    eq_map: Vec<Option<usize>>,
}

fn row_hash(cols: &[usize], vals: &[f64], rhs: f64) -> u64 {
    let mut h = DefaultHasher::new();
    cols.hash(&mut h);
    for v in vals {
        v.to_bits().hash(&mut h);
    }
    rhs.to_bits().hash(&mut h);
    h.finish()
}

/// Keeps the first of each group of identical rows and drops zero rows.
/// Returns the kept row indices, or `None` if a zero row is infeasible.
fn dedup_rows(a: &RowMatrix, b: &[f64], zero_ok: impl Fn(f64) -> bool) -> Option<(Vec<usize>, Vec<Option<usize>>)> {
    let mut keep = Vec::new();
    let mut map = Vec::with_capacity(b.len());
    let mut seen: HashMap<u64, Vec<usize>> = HashMap::new();
    for i in 0..b.len() {
        let (cols, vals) = a.row_parts(i);
        if cols.is_empty() {
            if !zero_ok(b[i]) {
                return None;
            }
            map.push(None);
            continue;
        }
        let bucket = seen.entry(row_hash(cols, vals, b[i])).or_default();
        let dup = bucket.iter().any(|&o| {
            let (oc, ov) = a.row_parts(o);
            oc == cols && ov == vals && b[o].to_bits() == b[i].to_bits()
        });
        if dup {
            map.push(None);
        } else {
            bucket.push(i);
            map.push(Some(keep.len()));
            keep.push(i);
        }
    }
    Some((keep, map))
}

/// Drops zero rows and exact duplicates. Returns `None` when a zero row is
/// itself infeasible.
fn presolve(p: &ConvexProgram) -> Option<Presolved<'_>> {
    let (ineq_keep, ineq_map) = dedup_rows(&p.a_ineq, &p.b_ineq, |b| b >= 0.0)?;
    let (eq_keep, eq_map) = dedup_rows(&p.a_eq, &p.b_eq, |b| b == 0.0)?;
    let prog = if ineq_keep.len() == p.num_ineq() && eq_keep.len() == p.num_eq() {
        Cow::Borrowed(p)
    } else {
        Cow::Owned(ConvexProgram {
            q: p.q.clone(),
            c: p.c.clone(),
            a_ineq: p.a_ineq.select_rows(&ineq_keep),
            b_ineq: ineq_keep.iter().map(|&i| p.b_ineq[i]).collect(),
            a_eq: p.a_eq.select_rows(&eq_keep),
            b_eq: eq_keep.iter().map(|&i| p.b_eq[i]).collect(),
        })
    };
    Some(Presolved {
        prog,
        ineq_map,
        eq_map,
    })
}

struct Iterate {
    x: Vec<f64>,
    s: Vec<f64>,
    lambda: Vec<f64>,
    nu: Vec<f64>,
}

fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, d)| **d < 0.0)
        .map(|(a, d)| -a / d)
        .fold(f64::INFINITY, f64::min)
}

fn factor_with_retry<'a>(
    st: &'a Structure,
    prog: &'a ConvexProgram,
    w: &[f64],
) -> Option<Factor<'a>> {
    let mut reg = STATIC_REG;
    for _ in 0..4 {
        if let Ok(f) = Factor::new(st, prog, w, reg, reg) {
            return Some(f);
        }
        reg *= 100.0;
    }
    None
}

struct Outcome {
    status: SolveStatus,
    it: Iterate,
    iterations: usize,
}

fn run(p: &ConvexProgram, tol: f64, max_iter: usize) -> Outcome {
    let m = p.num_vars();
    let np = p.num_ineq();
    let nq = p.num_eq();
    let st = Structure::analyze(p);

    // initial point from the W = I system
    let ones = vec![1.0; np];
    let Some(f0) = factor_with_retry(&st, p, &ones) else {
        return Outcome {
            status: SolveStatus::NumericalFailure,
            it: Iterate {
                x: vec![0.0; m],
                s: vec![1.0; np],
                lambda: vec![1.0; np],
                nu: vec![0.0; nq],
            },
            iterations: 0,
        };
    };
    let rhs_x: Vec<f64> = {
        let gh = p.a_ineq.tr_mul_vec(&p.b_ineq);
        p.c.iter().zip(&gh).map(|(c, g)| -c + g).collect()
    };
    let (x0, nu0) = f0.solve(&rhs_x, &p.b_eq);
    drop(f0);
    let gx0 = p.a_ineq.mul_vec(&x0);
    let mut s: Vec<f64> = p.b_ineq.iter().zip(&gx0).map(|(h, g)| h - g).collect();
    let mut lambda: Vec<f64> = s.iter().map(|v| -v).collect();
    if np > 0 {
        let ap = -s.iter().copied().fold(f64::INFINITY, f64::min);
        if ap >= 0.0 {
            s.iter_mut().for_each(|v| *v += 1.0 + ap);
        }
        let ad = -lambda.iter().copied().fold(f64::INFINITY, f64::min);
        if ad >= 0.0 {
            lambda.iter_mut().for_each(|v| *v += 1.0 + ad);
        }
    }
    let mut it = Iterate {
        x: x0,
        s,
        lambda,
        nu: nu0,
    };

    let mut best: Option<(f64, Iterate)> = None;
    let mut stalls = 0;
    for iter in 0..max_iter {
        let res = residuals(p, &it.x, &it.lambda, &it.nu);
        let worst = res.stationarity.max(res.primal).max(res.complementarity);
        let f = p.objective(&it.x);
        if !worst.is_finite() || !f.is_finite() {
            let it = best.map(|(_, b)| b).unwrap_or(it);
            return Outcome {
                status: SolveStatus::NumericalFailure,
                it,
                iterations: iter,
            };
        }
        if res.converged(f, tol) {
            return Outcome {
                status: SolveStatus::Optimal,
                it,
                iterations: iter,
            };
        }
        if iter >= 3 {
            if let Some(status) = certificate(p, &it) {
                return Outcome {
                    status,
                    it,
                    iterations: iter,
                };
            }
        }

        // residuals of the slack form
        let mut r_d = p.q.mul_vec(&it.x);
        let gtl = p.a_ineq.tr_mul_vec(&it.lambda);
        let atn = p.a_eq.tr_mul_vec(&it.nu);
        for i in 0..m {
            r_d[i] += p.c[i] + gtl[i] + atn[i];
        }
        let ax = p.a_eq.mul_vec(&it.x);
        let r_e: Vec<f64> = ax.iter().zip(&p.b_eq).map(|(a, b)| a - b).collect();
        let gx = p.a_ineq.mul_vec(&it.x);
        let r_i: Vec<f64> = (0..np).map(|i| gx[i] + it.s[i] - p.b_ineq[i]).collect();
        let mu = if np > 0 { dot(&it.s, &it.lambda) / np as f64 } else { 0.0 };

        let w: Vec<f64> = it.lambda.iter().zip(&it.s).map(|(l, s)| l / s).collect();
        let Some(fac) = factor_with_retry(&st, p, &w) else {
            let it = best.map(|(_, b)| b).unwrap_or(it);
            return Outcome {
                status: SolveStatus::NumericalFailure,
                it,
                iterations: iter,
            };
        };

        let direction = |r_c: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
            // dλ = S⁻¹(Λ r_i − r_c) + W G dx
            let u: Vec<f64> = (0..np)
                .map(|i| (it.lambda[i] * r_i[i] - r_c[i]) / it.s[i])
                .collect();
            let gtu = p.a_ineq.tr_mul_vec(&u);
            let rx: Vec<f64> = (0..m).map(|i| -r_d[i] - gtu[i]).collect();
            let re: Vec<f64> = r_e.iter().map(|v| -v).collect();
            let (dx, dnu) = fac.solve(&rx, &re);
            let gdx = p.a_ineq.mul_vec(&dx);
            let dl: Vec<f64> = (0..np).map(|i| u[i] + w[i] * gdx[i]).collect();
            let ds: Vec<f64> = (0..np).map(|i| -r_i[i] - gdx[i]).collect();
            (dx, ds, dl, dnu)
        };

        // predictor
        let rc_aff: Vec<f64> = (0..np).map(|i| it.s[i] * it.lambda[i]).collect();
        let (_, ds_a, dl_a, _) = direction(&rc_aff);
        let alpha_aff = 1f64.min(max_step(&it.s, &ds_a)).min(max_step(&it.lambda, &dl_a));
        let sigma = if np > 0 && mu > 0.0 {
            let mu_aff = (0..np)
                .map(|i| (it.s[i] + alpha_aff * ds_a[i]) * (it.lambda[i] + alpha_aff * dl_a[i]))
                .sum::<f64>()
                / np as f64;
            (mu_aff / mu).clamp(0.0, 1.0).powi(3)
        } else {
            0.0
        };

        // corrector
        let rc: Vec<f64> = (0..np)
            .map(|i| it.s[i] * it.lambda[i] + ds_a[i] * dl_a[i] - sigma * mu)
            .collect();
        let (dx, ds, dl, dnu) = direction(&rc);
        if dx.iter().chain(&ds).chain(&dl).chain(&dnu).any(|v| !v.is_finite()) {
            let it = best.map(|(_, b)| b).unwrap_or(it);
            return Outcome {
                status: SolveStatus::NumericalFailure,
                it,
                iterations: iter,
            };
        }
        let alpha_max = max_step(&it.s, &ds).min(max_step(&it.lambda, &dl));
        let alpha = 1f64.min(STEP_FRACTION * alpha_max);

        if best.as_ref().map_or(true, |(b, _)| worst < *b) {
            best = Some((
                worst,
                Iterate {
                    x: it.x.clone(),
                    s: it.s.clone(),
                    lambda: it.lambda.clone(),
                    nu: it.nu.clone(),
                },
            ));
        }
        if alpha < 1e-12 {
            stalls += 1;
            if stalls >= 5 {
                let it = best.map(|(_, b)| b).unwrap_or(it);
                return Outcome {
                    status: SolveStatus::NumericalFailure,
                    it,
                    iterations: iter,
                };
            }
        } else {
            stalls = 0;
        }

        for i in 0..m {
            it.x[i] += alpha * dx[i];
        }
        for i in 0..np {
            it.s[i] += alpha * ds[i];
            it.lambda[i] += alpha * dl[i];
        }
        for i in 0..nq {
            it.nu[i] += alpha * dnu[i];
        }
    }

    // final check on the last iterate before giving up
    let res = residuals(p, &it.x, &it.lambda, &it.nu);
    let worst = res.stationarity.max(res.primal).max(res.complementarity);
    if res.converged(p.objective(&it.x), tol) {
        return Outcome {
            status: SolveStatus::Optimal,
            it,
            iterations: max_iter,
        };
    }
    let it = match best {
        Some((b, bit)) if b < worst => bit,
        _ => it,
    };
    Outcome {
        status: SolveStatus::MaxIterations,
        it,
        iterations: max_iter,
    }
}

/// Looks for a Farkas certificate of primal infeasibility in the (diverging)
/// dual iterate, or a recession direction of unboundedness in the primal one.
fn certificate(p: &ConvexProgram, it: &Iterate) -> Option<SolveStatus> {
    let dual_norm = inf_norm(&it.lambda).max(inf_norm(&it.nu));
    if dual_norm > CERT_MIN_NORM {
        let l: Vec<f64> = it.lambda.iter().map(|v| v / dual_norm).collect();
        let n: Vec<f64> = it.nu.iter().map(|v| v / dual_norm).collect();
        let mut g = p.a_ineq.tr_mul_vec(&l);
        for (a, b) in g.iter_mut().zip(p.a_eq.tr_mul_vec(&n)) {
            *a += b;
        }
        let value = dot(&p.b_ineq, &l) + dot(&p.b_eq, &n);
        if inf_norm(&g) <= CERT_TOL && value < -CERT_TOL.sqrt() {
            return Some(SolveStatus::PrimalInfeasible);
        }
    }
    let x_norm = inf_norm(&it.x);
    if x_norm > CERT_MIN_NORM {
        let d: Vec<f64> = it.x.iter().map(|v| v / x_norm).collect();
        let qd = inf_norm(&p.q.mul_vec(&d));
        let ad = inf_norm(&p.a_eq.mul_vec(&d));
        let gd = p.a_ineq.mul_vec(&d).into_iter().fold(0.0f64, f64::max);
        if qd <= CERT_TOL && ad <= CERT_TOL && gd <= CERT_TOL && dot(&p.c, &d) < -CERT_TOL.sqrt() {
            return Some(SolveStatus::DualUnbounded);
        }
    }
    None
}

pub(crate) fn solve_impl(program: &ConvexProgram, tol: f64, max_iter: usize) -> SolveReport {
    let m = program.num_vars();
    let Some(pre) = presolve(program) else {
        return SolveReport::failed(program, SolveStatus::PrimalInfeasible, 0);
    };
    let out = run(&pre.prog, tol, max_iter);

    let lambda: Vec<f64> = pre
        .ineq_map
        .iter()
        .map(|r| r.map_or(0.0, |k| out.it.lambda[k]))
        .collect();
    let nu: Vec<f64> = pre
        .eq_map
        .iter()
        .map(|r| r.map_or(0.0, |k| out.it.nu[k]))
        .collect();
    debug_assert_eq!(out.it.x.len(), m);
    let res = residuals(program, &out.it.x, &lambda, &nu);
    let mut status = out.status;
    let objective = program.objective(&out.it.x);
    if status == SolveStatus::Optimal && !res.converged(objective, tol) {
        status = SolveStatus::NumericalFailure;
    }
    SolveReport {
        status,
        objective,
        x: out.it.x,
        lambda,
        nu,
        primal_residual: res.primal,
        dual_residual: res.stationarity.max(res.dual_sign),
        complementarity_gap: res.complementarity,
        iterations: out.iterations,
    }
}
