//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Criterion 12 needs the MNIST files (see
//! `CONVRELAX_MNIST_DIR`) and is skipped without them.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use convrelax::baseline;
use convrelax::certify::{self, DEFAULT_CONE_TOL};
use convrelax::mnistreg::{self, ExperimentConfig};
use convrelax::model::{sample_planted, Dataset};
use convrelax::qpsolve::{check_kkt, solve_default, ConvexProgram, SolveReport, SolveStatus};
use convrelax::relax::{self, FitResult, RelaxConfig, RelaxationInstance};
use convrelax::rng::{mix, rng_from, standard_normal_vec};
use convrelax::sweep::{self, GridSpec, Method};
use rand::Rng;

const KKT_TOL: f64 = 1e-8;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

/// KKT residuals of every optimal solve made by the suite.
#[derive(Default)]
struct KktLedger {
    checked: usize,
    failed: usize,
    worst: f64,
}

impl KktLedger {
    fn record(&mut self, program: &ConvexProgram, report: &SolveReport) {
        if report.status != SolveStatus::Optimal {
            return;
        }
        let k = check_kkt(program, report, KKT_TOL).expect("consistent shapes");
        self.checked += 1;
        self.failed += (!k.pass) as usize;
        self.worst = self.worst.max(k.stationarity).max(k.feasibility).max(k.complementarity);
    }

    fn record_fit(&mut self, data: &Dataset, fit: &FitResult) {
        let inst = relax::build(data, 0.0, &fit.r_used).expect("valid instance");
        self.record(&inst.program, &fit.report);
    }
}

fn recovered(w: &[f64], w_star: &[f64]) -> bool {
    relax::assess(w, w_star, relax::DEFAULT_TAU).unwrap().success
}

fn rate_line(hits: usize, total: usize) -> String {
    format!("{hits}/{total} = {:.3}", hits as f64 / total as f64)
}

fn half_probability(kkt: &mut KktLedger) -> Verdict {
    let trials = 300u64;
    let mut hits = 0;
    for t in 0..trials {
        let (m, data) = sample_planted(400, 20, 1, mix(&[101, t])).unwrap();
        let fit = relax::fit(&data, 0.0, mix(&[102, t])).unwrap();
        kkt.record_fit(&data, &fit);
        hits += (fit.is_optimal() && recovered(&fit.w_hat, &m.w_star)) as usize;
    }
    let rate = hits as f64 / trials as f64;
    let msg = format!("recovery rate {} (required [0.42, 0.58])", rate_line(hits, trials as usize));
    if (0.42..=0.58).contains(&rate) {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

fn amplification() -> Verdict {
    let reps = 150u64;
    let mut hits = 0;
    let mut single = 0;
    for t in 0..reps {
        let (m, data) = sample_planted(400, 20, 1, mix(&[201, t])).unwrap();
        let out = relax::fit_amplified(&data, 6, mix(&[202, t]), &RelaxConfig::default(), Some(&m.w_star));
        if let Ok(out) = out {
            hits += (out.success == Some(true)) as usize;
            let bound = relax::DEFAULT_TAU * (1.0 + norm(&m.w_star));
            let first = &out.trials[0];
            single += (first.status == SolveStatus::Optimal && first.l2_error.is_some_and(|e| e <= bound)) as usize;
        }
    }
    let rate = hits as f64 / reps as f64;
    let msg = format!(
        "amplified success {} with 6 trials (required >= 0.92); first trial alone {}",
        rate_line(hits, reps as usize),
        rate_line(single, reps as usize)
    );
    if rate >= 0.92 {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn one_dimensional_law(kkt: &mut KktLedger) -> Verdict {
    let data = Dataset::new(2, 1, 1, vec![1.0, -1.0], vec![1.0, 0.0]).unwrap();
    let mut hits = 0;
    let mut exceptions = 0;
    for seed in 0..1000u64 {
        let fit = relax::fit(&data, 0.0, seed).unwrap();
        kkt.record_fit(&data, &fit);
        let rec = fit.is_optimal() && (fit.w_hat[0] - 1.0).abs() <= 1e-6;
        exceptions += (rec != (fit.r_used[0] < 0.0)) as usize;
        hits += rec as usize;
    }
    let rate = hits as f64 / 1000.0;
    let msg = format!("rate {} (required [0.46, 0.54]), sign exceptions {exceptions}", rate_line(hits, 1000));
    if (0.46..=0.54).contains(&rate) && exceptions == 0 {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

fn naive_degeneracy() -> Verdict {
    let mut ok = 0;
    let total = 50u64;
    let mut worst = 0.0f64;
    for s in 0..total {
        let k = 1 + (s % 3) as usize;
        let d = k * (2 + (s % 4) as usize);
        let (m, data) = sample_planted(20 + s as usize, d, k, mix(&[401, s])).unwrap();
        let inst: RelaxationInstance = relax::build_naive(&data);
        let zero = inst.point(&vec![0.0; data.filter_len()], &block_slacks_for_zero(&data), &data.y);
        let z_star: Vec<f64> = (0..data.n)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .map(|(i, j)| common::dot(data.block(i, j), &m.w_star).max(0.0))
            .collect();
        let truth = inst.point(&m.w_star, &z_star, &data.y);
        let mut pass = true;
        for x in [&zero, &truth] {
            let v = inst.max_violation(x);
            let f = inst.objective(x).abs();
            worst = worst.max(v).max(f);
            pass &= v <= 1e-9 && f <= 1e-9;
        }
        ok += pass as usize;
    }
    let msg = format!("{ok}/{total} instances with both points feasible at objective 0 (worst {worst:.1e})");
    if ok == total as usize {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

/// `z_i1 = y_i`, other blocks 0: the slack point paired with `w = 0`.
fn block_slacks_for_zero(data: &Dataset) -> Vec<f64> {
    (0..data.n)
        .flat_map(|i| (0..data.k).map(move |j| if j == 0 { data.y[i] } else { 0.0 }))
        .collect()
}

fn certificate_agreement(kkt: &mut KktLedger) -> Verdict {
    let mut agree = 0;
    let mut degenerate_only = true;
    let mut notes = Vec::new();
    for s in 0..100u64 {
        let k = if s < 50 { 1 } else { 2 };
        let (m, data) = sample_planted(150, 8, k, mix(&[501, s])).unwrap();
        let fit = relax::fit(&data, 0.0, mix(&[502, s])).unwrap();
        kkt.record_fit(&data, &fit);
        let cert = certify::certify_perturbation(&data, &m.w_star, &fit.r_used, DEFAULT_CONE_TOL).unwrap();
        let rec = fit.is_optimal() && recovered(&fit.w_hat, &m.w_star);
        if cert.exists == rec {
            agree += 1;
        } else {
            degenerate_only &= cert.boundary_degenerate;
            notes.push(format!("seed {s} (k={k}, phase-1 {:.1e})", cert.elastic));
        }
    }
    let msg = format!("{agree}/100 agree (required >= 98); disagreements: {notes:?}");
    if agree >= 98 && degenerate_only {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

fn singleton_count() -> Verdict {
    let n = 8000usize;
    let mut pass = true;
    let mut parts = Vec::new();
    for k in [1usize, 2, 3] {
        let (m, data) = sample_planted(n, 4 * k, k, mix(&[601, k as u64])).unwrap();
        let sets = certify::active_sets(&data.x, data.d, k, &m.w_star).unwrap();
        let frac = certify::r1_singleton_fraction(&sets);
        let p = 1.0 / (1u64 << k) as f64;
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        let ok = (frac - p).abs() <= 3.0 * sd;
        pass &= ok;
        let per_block: Vec<String> = (0..k)
            .map(|j| {
                let c = sets.r.iter().filter(|ri| ri.as_slice() == [j]).count();
                format!("{:.4}", c as f64 / n as f64)
            })
            .collect();
        parts.push(format!(
            "k={k}: |R_i|=1 fraction {frac:.4} vs 1/2^k = {p:.4} +/- {:.4} [{}]; R_i={{j}} per block [{}]",
            3.0 * sd,
            if ok { "ok" } else { "out" },
            per_block.join(", ")
        ));
    }
    let msg = parts.join("; ");
    if pass {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

fn strong_duality() -> Verdict {
    let mut done = 0;
    let mut worst = 0.0f64;
    let mut bad = 0;
    let mut unbounded = 0;
    let mut s = 0u64;
    while done < 100 {
        s += 1;
        let k = 1 + (s % 3) as usize;
        let d = 3 * k;
        let (_, data) = sample_planted(20 * d, d, k, mix(&[701, s])).unwrap();
        let r = relax::perturbation(mix(&[702, s]), data.filter_len());
        let out = certify::dual_solve(&data, &r, 1e-9).unwrap();
        if out.primal_status != SolveStatus::Optimal {
            unbounded += 1;
            continue;
        }
        done += 1;
        match (out.status, out.gap) {
            (SolveStatus::Optimal, Some(g)) => {
                worst = worst.max(g.abs());
                bad += (g.abs() > 1e-6) as usize;
            }
            _ => bad += 1,
        }
    }
    let msg = format!("100 bounded instances, worst gap {worst:.2e}, {bad} above 1e-6 ({unbounded} unbounded draws skipped)");
    if bad == 0 {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

fn solver_correctness(kkt: &mut KktLedger) -> Verdict {
    let mut compared = 0;
    let mut mismatches = 0;
    let mut worst = 0.0f64;
    let mut seed = 0u64;
    while compared < 220 {
        seed += 1;
        let mut rng = rng_from(mix(&[801, seed]));
        let m = rng.random_range(1..=3usize);
        let p = rng.random_range(m..=6usize);
        let a: Vec<Vec<f64>> = (0..p).map(|_| standard_normal_vec(&mut rng, m)).collect();
        let b: Vec<f64> = (0..p).map(|_| rng.random_range(0.1..2.0)).collect();
        let c = standard_normal_vec(&mut rng, m);
        let neg_c: Vec<f64> = c.iter().map(|v| -v).collect();
        if !common::in_cone(&a, &neg_c) {
            continue;
        }
        let Some((value, _)) = common::lp_vertex_min(&c, &a, &b) else { continue };
        let prog = ConvexProgram::from_dense(None, &c, &a, &b, &[], &[]).unwrap();
        let rep = solve_default(&prog).unwrap();
        kkt.record(&prog, &rep);
        compared += 1;
        if rep.status != SolveStatus::Optimal {
            mismatches += 1;
            continue;
        }
        let e = (rep.objective - value).abs();
        worst = worst.max(e);
        mismatches += (e > 1e-7) as usize;
    }
    // finite-beta relaxations (quadratic programs) as well
    for s in 0..40u64 {
        let k = 1 + (s % 2) as usize;
        let (_, data) = sample_planted(60, 4 * k, k, mix(&[802, s])).unwrap();
        let r = relax::perturbation(mix(&[803, s]), data.filter_len());
        let inst = relax::build(&data, 0.01, &r).unwrap();
        let rep = relax::solve_instance(&inst, &RelaxConfig::default()).unwrap();
        kkt.record(&inst.program, &rep);
    }
    let msg = format!(
        "{compared} small LPs vs vertex enumeration: {mismatches} mismatches, worst {worst:.1e}; \
         KKT on {} optimal reports: {} above 1e-8, worst {:.1e}",
        kkt.checked, kkt.failed, kkt.worst
    );
    if mismatches == 0 && kkt.failed == 0 && compared >= 200 {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

fn gradient_validity() -> Verdict {
    let configs = [(6usize, 1usize), (8, 2), (9, 3), (12, 4), (20, 5)];
    let h = 1e-6;
    let mut worst = 0.0f64;
    for t in 0..100u64 {
        let (d, k) = configs[t as usize % configs.len()];
        let (_, data) = sample_planted(25, d, k, mix(&[901, t])).unwrap();
        let mut rng = rng_from(mix(&[902, t]));
        let w = loop {
            let w = standard_normal_vec(&mut rng, data.filter_len());
            let kink_free = (0..data.n).all(|i| {
                (0..k).all(|j| {
                    let blk = data.block(i, j);
                    common::dot(blk, &w).abs() > 10.0 * h * norm(blk)
                })
            });
            if kink_free {
                break w;
            }
        };
        worst = worst.max(baseline::fd_check(&data, &w, h).unwrap());
    }
    let msg = format!("worst relative error {worst:.2e} over 100 points (required <= 1e-5)");
    if worst <= 1e-5 {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

fn pseudoinverse() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for d in [5usize, 20, 50] {
        let mut ok = 0;
        let mut short = 0;
        for s in 0..100u64 {
            let (m, data) = sample_planted(3 * d, d, 1, mix(&[1001, d as u64, s])).unwrap();
            short += (data.y.iter().filter(|&&v| v > 0.0).count() < d) as usize;
            if let Ok(w) = relax::pseudoinverse_recovery(&data) {
                ok += (relax::assess(&w, &m.w_star, 1.0).unwrap().l2_error <= 1e-8) as usize;
            }
        }
        pass &= ok >= 99;
        parts.push(format!("d={d}: {ok}/100 ({short} draws with |S| < d)"));
    }
    let msg = format!("{} (required >= 99 each)", parts.join(", "));
    if pass {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

fn phase_shape() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for d in [10usize, 20, 40] {
        let mut spec = GridSpec::default_for(1);
        spec.methods = vec![Method::Relaxation];
        spec.d_values = vec![d];
        spec.n_values = vec![d / 2, 20 * d];
        spec.trials = 100;
        spec.master_seed = 1101;
        let cells = sweep::run_grid(&spec).unwrap();
        let low = cells.iter().find(|c| c.n == d / 2).unwrap().success_rate;
        let high = cells.iter().find(|c| c.n == 20 * d).unwrap().success_rate;
        pass &= low <= 0.1 && high >= 0.4;
        parts.push(format!("d={d}: n={} rate {low:.2}, n={} rate {high:.2}", d / 2, 20 * d));
    }
    let msg = format!("{} (required <= 0.1 and >= 0.4)", parts.join("; "));
    if pass {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

fn mnist_direction() -> Verdict {
    let Some(dir) = mnistreg::data_dir_from_env() else {
        return Verdict::Skip(format!("set {} to a directory with the MNIST IDX files", mnistreg::DATA_DIR_ENV));
    };
    let files = match mnistreg::load_dir(&dir) {
        Ok(f) => f,
        Err(e) => return Verdict::Fail(format!("loading {}: {e}", dir.display())),
    };
    let cfg = ExperimentConfig::default();
    match mnistreg::run_experiment(&files.train_images, &files.test_images, &cfg) {
        Ok(r) => {
            let msg = format!(
                "test RMSE raw {:.3} (lambda {}), learned filter {:.3} (lambda {}) on {} images",
                r.raw_rmse, r.raw_lambda, r.filter_rmse, r.filter_lambda, r.n_test
            );
            if r.filter_rmse <= r.raw_rmse {
                Verdict::Pass(msg)
            } else {
                Verdict::Fail(msg)
            }
        }
        Err(e) => Verdict::Fail(format!("experiment failed: {e}")),
    }
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags such as `--nocapture`; a name filter
    // that excludes this target selects nothing
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !filters.is_empty() && !filters.iter().any(|f| "acceptance".contains(f.as_str())) {
        return ExitCode::SUCCESS;
    }
    let mut kkt = KktLedger::default();
    let mut failed = 0;
    let mut report = |id: u32, name: &str, f: &mut dyn FnMut() -> Verdict| {
        let t = Instant::now();
        let v = f();
        let secs = t.elapsed().as_secs_f64();
        let (tag, msg) = match v {
            Verdict::Pass(m) => ("PASS", m),
            Verdict::Fail(m) => {
                failed += 1;
                ("FAIL", m)
            }
            Verdict::Skip(m) => ("SKIP", m),
        };
        println!("criterion {id:>2} {tag} [{name}] {msg} ({secs:.1}s)");
    };
    report(1, "single-perturbation recovery near 1/2", &mut || half_probability(&mut kkt));
    report(2, "amplified recovery", &mut amplification);
    report(3, "exact d=1 law", &mut || one_dimensional_law(&mut kkt));
    report(4, "naive relaxation degeneracy", &mut naive_degeneracy);
    report(5, "certificate vs LP recovery", &mut || certificate_agreement(&mut kkt));
    report(6, "singleton count", &mut singleton_count);
    report(7, "strong duality", &mut strong_duality);
    report(8, "solver correctness", &mut || solver_correctness(&mut kkt));
    report(9, "gradient validity", &mut gradient_validity);
    report(10, "pseudoinverse recovery", &mut pseudoinverse);
    report(11, "phase-transition shape", &mut phase_shape);
    report(12, "MNIST direction", &mut mnist_direction);
    println!("acceptance: {failed} criteria failed");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
