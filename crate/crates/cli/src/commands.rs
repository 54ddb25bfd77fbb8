use gwlab::hausdorff::{c_xi_pairing, cover_runs, median_cost_per_w, min_cover_cost};
use gwlab::identity::{battery, sizebias_law_enumerate, McConfig, ENUMERATION_MAX_OFFSPRING};
use gwlab::sampler::{GwSampler, Purpose, RngStream, SubtreeDepth};
use gwlab::spine::{
    bound_check, default_bound_grid, density_ratios, sample_traces, sample_x1, thin_ray_identity, BoundConstants,
    ThinRayConfig,
};
use gwlab::stats::{Comparison, Estimate};
use gwlab::tail::{doubling_diagnostic, empirical_tail, linspace, EmpiricalTail, TailModel};
use gwlab::{Family, Gauge, OffspringDistribution};
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::output::{Cell, Report, Table};
use crate::CliError;

type Res = Result<Report, CliError>;

fn core(e: gwlab::Error) -> CliError {
    CliError::Failure(e.to_string())
}

fn supercritical(d: &OffspringDistribution) -> Result<(), CliError> {
    if d.is_supercritical() {
        Ok(())
    } else {
        Err(CliError::Failure(format!(
            "offspring mean {} <= 1: this command needs a supercritical law",
            d.mean()
        )))
    }
}

/// The analytic tail when one exists, otherwise an empirical one.
fn tail_for(d: &OffspringDistribution, cfg: &ExperimentConfig) -> Result<TailModel, CliError> {
    match TailModel::analytic(d) {
        Ok(t) => Ok(t),
        Err(_) => Ok(empirical(d, cfg)?.into()),
    }
}

fn empirical(d: &OffspringDistribution, cfg: &ExperimentConfig) -> Result<EmpiricalTail, CliError> {
    empirical_tail(d, cfg.tail_depth, cfg.tail_reps, cfg.seed, cfg.cap).map_err(core)
}

fn est(e: Estimate) -> serde_json::Value {
    json!({ "mean": e.mean, "stderr": e.stderr, "n": e.n })
}

pub fn tail(d: &OffspringDistribution, cfg: &ExperimentConfig) -> Res {
    supercritical(d)?;
    let tail = empirical_tail(d, cfg.depth, cfg.reps, cfg.seed, cfg.cap).map_err(core)?;
    let model = TailModel::from(tail.clone());
    let mut report = Report {
        w_truncation_depth: Some(cfg.depth),
        ..Default::default()
    };

    let x_max = match cfg.x_max {
        Some(x) => x,
        None => tail.inverse(100f64.ln()).map_err(core)?.value.max(1.0),
    };
    let analytic = TailModel::analytic(d).ok();
    let mut t = Table::new("tail", &["x", "survival", "F", "Finv_at_logx", "survival_analytic"]);
    let mut sup_dev: Option<f64> = None;
    for x in linspace(0.0, x_max, cfg.x_points) {
        let finv = if x >= 1.0 {
            Some(model.inv(x.ln()).map_err(core)?)
        } else {
            None
        };
        let exact = analytic.as_ref().map(|a| a.survival(x));
        if let Some(s) = exact {
            sup_dev = Some(sup_dev.unwrap_or(0.0).max((s - model.survival(x)).abs()));
        }
        t.push(vec![
            x.into(),
            model.survival(x).into(),
            model.f(x).into(),
            finv.into(),
            exact.into(),
        ]);
    }
    report.tables.push(t);

    let g = Gauge::hawkes(d.mean(), model.clone()).map_err(core)?;
    let mut gt = Table::new("gauge", &["r", "g"]);
    let (lo, hi) = (-(cfg.depth.max(3) as f64), -2.0);
    for u in linspace(lo, hi, cfg.r_points) {
        let r = u.exp();
        gt.push(vec![r.into(), g.eval(r).map_err(core)?.into()]);
    }
    report.tables.push(gt);

    let dbl = doubling_diagnostic(&model, &linspace(1.0, 20.0, cfg.x_points)).map_err(core)?;
    let mut dt = Table::new("doubling", &["x", "finv_x", "finv_2x", "ratio", "saturated"]);
    for r in &dbl.rows {
        dt.push(vec![
            r.x.into(),
            r.finv_x.into(),
            r.finv_2x.into(),
            r.ratio.into(),
            r.saturated.into(),
        ]);
    }
    report.tables.push(dt);

    let alive = tail.samples().iter().filter(|&&w| w > 0.0).count();
    let s0 = Estimate::proportion(alive, tail.len());
    let s0_check = Comparison::new(s0, Estimate::exact(1.0 - d.q()));
    if !s0_check.within(3.0) {
        report.warnings.push(format!(
            "S(0) = {} differs from 1 - q = {} by {:.2} standard errors",
            s0.mean,
            1.0 - d.q(),
            s0_check.z
        ));
    }
    let w_mean = Estimate::from_samples(tail.samples().iter().copied());
    let w_check = Comparison::new(w_mean, Estimate::exact(1.0));
    if !w_check.within(3.0) {
        report.warnings.push(format!(
            "mean of W = {} is {:.2} standard errors from 1",
            w_mean.mean, w_check.z
        ));
    }
    report.summary = json!({
        "samples": tail.len(),
        "max_sample": tail.max(),
        "survival_at_0": est(s0),
        "one_minus_q": 1.0 - d.q(),
        "survival_at_0_z": s0_check.z,
        "w_mean": est(w_mean),
        "sup_abs_deviation_from_analytic": sup_dev,
        "doubling_sup_ratio": dbl.sup_ratio,
        "doubling_argmax": dbl.argmax,
        "doubling_exponent": dbl.exponent,
    });
    Ok(report)
}

pub fn spine(d: &OffspringDistribution, cfg: &ExperimentConfig) -> Res {
    supercritical(d)?;
    let tail = tail_for(d, cfg)?;
    let g = Gauge::hawkes(d.mean(), tail.clone()).map_err(core)?;
    let traces = sample_traces(
        d,
        cfg.depth,
        SubtreeDepth::Common(cfg.subtree_depth),
        cfg.reps,
        cfg.seed,
        cfg.cap,
    )
    .map_err(core)?;
    let r = density_ratios(&traces, &g, None).map_err(core)?;
    let mut report = Report {
        w_truncation_depth: tail.depth(),
        ..Default::default()
    };

    let mut wt = Table::new("window_max", &["replica", "window_max"]);
    for (i, v) in r.window_max.iter().enumerate() {
        wt.push(vec![i.into(), (*v).into()]);
    }
    report.tables.push(wt);
    let mut dt = Table::new("dyadic", &["lo", "hi", "median_max"]);
    for w in &r.dyadic {
        dt.push(vec![w.lo.into(), w.hi.into(), w.median_max.into()]);
    }
    report.tables.push(dt);
    let first = &traces[0];
    let ratios = first.ratios(&g);
    let mut tt = Table::new("trace", &["n", "Y", "X", "tail_bound", "R"]);
    for n in 1..=first.depth() {
        let rn = if n >= 2 { ratios[n - 2] } else { None };
        tt.push(vec![
            n.into(),
            first.y(n).into(),
            first.x(n).into(),
            first.tail_bound(n).into(),
            rn.into(),
        ]);
    }
    report.tables.push(tt);

    let reps = r.window_max.len() as f64;
    let above_one = r.window_max.iter().filter(|&&v| v >= 1.0).count() as f64 / reps;
    let a_hat = doubling_diagnostic(&tail, &linspace(1.0, 20.0, 96))
        .map_err(core)?
        .exponent;
    let upper = 6f64.powf(a_hat) * d.mean() * 2.0;
    let below_upper = r.window_max.iter().filter(|&&v| v <= upper).count() as f64 / reps;
    if cfg.depth >= 64 && above_one < 0.95 {
        report.warnings.push(format!(
            "windowed max >= 1 in only {:.1}% of replicas",
            100.0 * above_one
        ));
    }
    if below_upper < 0.95 {
        report.warnings.push(format!(
            "windowed max <= 6^a m * 2 = {upper:.4} in only {:.1}% of replicas",
            100.0 * below_upper
        ));
    }
    report.summary = json!({
        "kappa_hat": r.kappa_hat,
        "window": { "lo": r.window.lo, "hi": r.window.hi },
        "window_max_mean": r.mean,
        "window_max_quantiles": { "p05": r.quantiles[0], "p25": r.quantiles[1], "p50": r.quantiles[2], "p75": r.quantiles[3], "p95": r.quantiles[4] },
        "skipped_generations": r.skipped,
        "fraction_window_max_at_least_1": above_one,
        "doubling_exponent": a_hat,
        "upper_level": upper,
        "fraction_window_max_below_upper": below_upper,
        "y_bar": first.y_bar().0,
        "tail": if tail.is_empirical() { "empirical" } else { "analytic" },
    });
    Ok(report)
}

pub fn verify(d: &OffspringDistribution, cfg: &ExperimentConfig) -> Res {
    supercritical(d)?;
    let mc = McConfig {
        reps: cfg.reps,
        seed: cfg.seed,
        cap: cfg.cap,
    };
    let entries = battery(d, cfg.extra, mc).map_err(core)?;
    let mut report = Report::default();
    let mut t = Table::new(
        "battery",
        &[
            "name",
            "identity",
            "lhs",
            "lhs_stderr",
            "rhs",
            "rhs_stderr",
            "z",
            "pass",
        ],
    );
    for e in &entries {
        let r = &e.result;
        t.push(vec![
            e.name.clone().into(),
            e.identity.clone().into(),
            r.lhs.mean.into(),
            r.lhs.stderr.into(),
            r.rhs.mean.into(),
            r.rhs.stderr.into(),
            e.z.into(),
            e.pass.into(),
        ]);
        if e.z > 5.0 {
            report
                .failures
                .push(format!("{} ({}): z = {:.2} > 5", e.name, e.identity, e.z));
        } else if !e.pass {
            report
                .warnings
                .push(format!("{} ({}): z = {:.2} > 3", e.name, e.identity, e.z));
        }
    }
    report.tables.push(t);

    let mut enumeration = Vec::new();
    let small = matches!(d.family(), Family::Finite { pmf } if pmf.len() <= ENUMERATION_MAX_OFFSPRING + 1);
    if small {
        let mut et = Table::new("enumeration", &["n", "levels", "gw", "reweighted", "spine"]);
        for n in [1, 2] {
            let r = sizebias_law_enumerate(d, n).map_err(core)?;
            for e in &r.trees {
                et.push(vec![
                    n.into(),
                    format!("{:?}", e.tree.levels()).into(),
                    e.gw.into(),
                    e.reweighted.into(),
                    e.spine.into(),
                ]);
            }
            if !r.tv_is_zero {
                report
                    .failures
                    .push(format!("size-bias enumeration at n = {n}: TV = {} != 0", r.tv));
            }
            enumeration.push(json!({ "n": n, "shapes": r.trees.len(), "tv": r.tv, "tv_is_zero": r.tv_is_zero }));
        }
        report.tables.push(et);
    }
    let max_z = entries.iter().map(|e| e.z).fold(0.0, f64::max);
    report.summary = json!({
        "entries": entries.len(),
        "passed": entries.iter().filter(|e| e.pass).count(),
        "max_z": max_z,
        "extra_depth": cfg.extra,
        "enumeration": if small { json!(enumeration) } else { json!("skipped: needs finite support of size at most 5") },
    });
    Ok(report)
}

pub fn cover(d: &OffspringDistribution, cfg: &ExperimentConfig) -> Res {
    supercritical(d)?;
    let tail = tail_for(d, cfg)?;
    let g = Gauge::hawkes(d.mean(), tail.clone()).map_err(core)?;
    let runs = cover_runs(d, &g, cfg.depth, cfg.min_gen, cfg.reps, cfg.seed, cfg.cap).map_err(core)?;
    let mut report = Report {
        w_truncation_depth: tail.depth(),
        ..Default::default()
    };

    // the first tree of the run, solved again for its antichain
    let s = GwSampler::new(d).map_err(core)?.with_cap(cfg.cap);
    let tree0 = s
        .sample_gw(cfg.depth, &mut RngStream::replica(cfg.seed, Purpose::Covers, 0).rng())
        .map_err(core)?;
    let sol = min_cover_cost(&tree0, &g, cfg.min_gen).map_err(core)?;
    if let Err(msg) = sol.verify(&tree0, &g) {
        report
            .failures
            .push(format!("cover of tree 0 fails verification: {msg}"));
    }
    if sol.cost != runs[0].cost {
        report.failures.push("cover of tree 0 is not reproducible".into());
    }
    let mut ct = Table::new("antichain", &["word", "generation", "ball_cost"]);
    for (u, c) in sol.antichain.iter().zip(&sol.ball_costs) {
        ct.push(vec![u.to_string().into(), u.len().into(), (*c).into()]);
    }
    report.tables.push(ct);
    let mut rt = Table::new("runs", &["replica", "cost", "w"]);
    for (i, r) in runs.iter().enumerate() {
        rt.push(vec![i.into(), r.cost.into(), r.w.into()]);
    }
    report.tables.push(rt);

    let mut ratios = Vec::with_capacity(cfg.spine_seeds);
    for k in 0..cfg.spine_seeds {
        let traces = sample_traces(
            d,
            cfg.spine_depth,
            SubtreeDepth::Common(cfg.subtree_depth),
            cfg.spine_reps,
            cfg.seed.wrapping_add(k as u64),
            cfg.cap,
        )
        .map_err(core)?;
        ratios.push(density_ratios(&traces, &g, None).map_err(core)?);
    }
    let pairing = c_xi_pairing(&ratios, &runs, tail.depth());
    let pairing = match pairing {
        Ok(p) => serde_json::to_value(&p).expect("pairing serialises"),
        Err(e) => {
            report.warnings.push(format!("pairing unavailable: {e}"));
            json!(null)
        }
    };
    let costs = Estimate::from_samples(runs.iter().map(|r| r.cost));
    report.summary = json!({
        "min_gen": cfg.min_gen,
        "tree0": { "cost": sol.cost, "balls": sol.antichain.len(), "min_generation_used": sol.min_generation_used, "max_generation_used": sol.max_generation_used },
        "cost": est(costs),
        "median_cost_per_w": median_cost_per_w(&runs),
        "dead_trees": runs.iter().filter(|r| r.w == 0.0).count(),
        "pairing": pairing,
        "tail": if tail.is_empirical() { "empirical" } else { "analytic" },
        "note": "dead-at-depth subtrees cost 0; alive-at-depth is the proxy for the boundary",
    });
    Ok(report)
}

pub fn bounds(d: &OffspringDistribution, cfg: &ExperimentConfig) -> Res {
    supercritical(d)?;
    let tail = empirical_tail(d, cfg.depth, cfg.tail_reps, cfg.seed, cfg.cap).map_err(core)?;
    let x1 = sample_x1(d, cfg.depth, cfg.reps, cfg.seed, cfg.cap).map_err(core)?;
    let constants = BoundConstants::oracle(d).map_err(core)?;
    let grid = match cfg.x_max {
        Some(x) => linspace(0.0, x, cfg.x_points),
        None if cfg.x_points == 20 => default_bound_grid(&tail).map_err(core)?,
        None => linspace(0.0, tail.inverse(100f64.ln()).map_err(core)?.value, cfg.x_points),
    };
    let r = bound_check(d, &tail, &x1, cfg.depth, constants, &grid, 3.0).map_err(core)?;
    let mut report = Report {
        w_truncation_depth: Some(cfg.depth),
        ..Default::default()
    };
    let mut t = Table::new(
        "bounds",
        &[
            "x",
            "p_x1",
            "p_x1_stderr",
            "lower_bound",
            "lower_holds",
            "p_x1_mx",
            "p_x1_mx_stderr",
            "tail_mass",
            "tail_mass_stderr",
            "equality_z",
            "upper_bound",
            "upper_holds",
        ],
    );
    for row in &r.rows {
        t.push(vec![
            row.x.into(),
            row.p_x1.mean.into(),
            row.p_x1.stderr.into(),
            row.ok_bound.mean.into(),
            row.ok_holds.into(),
            row.p_x1_mx.mean.into(),
            row.p_x1_mx.stderr.into(),
            row.tail_mass.mean.into(),
            row.tail_mass.stderr.into(),
            row.equality_z.into(),
            row.rough_bound.mean.into(),
            row.rough_holds.into(),
        ]);
        if !row.ok_holds {
            report.warnings.push(format!("lower bound fails at x = {}", row.x));
        }
        if !row.equality_holds {
            report.warnings.push(format!(
                "P(X_1 > m x) != E[W; W > x] at x = {} (z = {:.2})",
                row.x, row.equality_z
            ));
        }
        if !row.rough_holds {
            report.warnings.push(format!("upper bound fails at x = {}", row.x));
        }
    }
    report.tables.push(t);
    report.summary = json!({
        "c0": r.constants.c0,
        "c1": r.constants.c1,
        "x1_samples": r.x1_samples,
        "w_samples": r.w_samples,
        "lower_bound_holds": r.ok_bound_holds,
        "equality_holds": r.equality_holds,
        "upper_bound_holds": r.rough_bound_holds,
    });
    Ok(report)
}

pub fn thin(d: &OffspringDistribution, cfg: &ExperimentConfig) -> Res {
    supercritical(d)?;
    let tail = tail_for(d, cfg)?;
    let tc = ThinRayConfig {
        n0: cfg.n0,
        depth: cfg.depth,
        extra: cfg.extra,
        reps: cfg.reps,
        seed: cfg.seed,
        cap: cfg.cap,
    };
    let r = thin_ray_identity(d, &tail, tc).map_err(core)?;
    let mut report = Report {
        w_truncation_depth: tail.depth(),
        ..Default::default()
    };
    let mut t = Table::new(
        "levels",
        &["n", "threshold", "p_below", "p_below_stderr", "bound", "holds"],
    );
    for (i, l) in r.levels.iter().enumerate() {
        let thr = r.thresholds.get(i).copied();
        t.push(vec![
            l.n.into(),
            thr.into(),
            l.p_below.mean.into(),
            l.p_below.stderr.into(),
            l.bound.into(),
            l.holds.into(),
        ]);
        if !l.holds {
            report.warnings.push(format!("per-level bound fails at n = {}", l.n));
        }
    }
    report.tables.push(t);
    let z = r.comparison.z;
    if z > 5.0 {
        report.failures.push(format!("thin-ray identity: z = {z:.2} > 5"));
    } else if z > 3.0 {
        report.warnings.push(format!("thin-ray identity: z = {z:.2} > 3"));
    }
    if r.vacuous {
        report
            .warnings
            .push("a threshold is 0: the counted set is empty and both sides vanish; raise --n0".into());
    }
    report.summary = json!({
        "n0": cfg.n0,
        "horizon": r.horizon,
        "lhs": est(r.lhs),
        "rhs": est(r.rhs),
        "z": z,
        "vacuous": r.vacuous,
        "gauge_at_n": r.gauge_at_n,
        "finv_ln_n": r.finv_ln_n,
        "thresholds": r.thresholds,
    });
    Ok(report)
}

pub fn sample(d: &OffspringDistribution, cfg: &ExperimentConfig) -> Res {
    let s = GwSampler::new(d).map_err(core)?.with_cap(cfg.cap);
    let mut report = Report::default();
    let mut batch = Vec::new();
    let mut sizes = Vec::with_capacity(cfg.reps);
    for i in 0..cfg.reps {
        let t = s
            .sample_gw(
                cfg.depth,
                &mut RngStream::replica(cfg.seed, Purpose::Trees, i as u64).rng(),
            )
            .map_err(core)?;
        sizes.push(t.z_count(cfg.depth).map_err(core)?);
        match cfg.format {
            crate::config::Format::Json => t.write_jsonl(&mut batch).map_err(core)?,
            crate::config::Format::Csv => {
                let mut buf = Vec::new();
                t.write_csv(&mut buf).map_err(core)?;
                report
                    .raw
                    .push((format!("tree_{i}.csv"), String::from_utf8(buf).expect("utf-8")));
            }
        }
    }
    if !batch.is_empty() {
        report
            .raw
            .push(("trees.jsonl".into(), String::from_utf8(batch).expect("utf-8")));
    }
    if !d.is_supercritical() {
        report.warnings.push(format!(
            "offspring mean {} <= 1: the law is not supercritical",
            d.mean()
        ));
    }
    let mut zt = Table::new("sizes", &["replica", "z_depth"]);
    for (i, z) in sizes.iter().enumerate() {
        zt.push(vec![i.into(), Cell::Int(*z as u64)]);
    }
    report.tables.push(zt);
    report.summary = json!({
        "trees": cfg.reps,
        "extinct_by_depth": sizes.iter().filter(|&&z| z == 0).count(),
        "mean_z_depth": sizes.iter().map(|&z| z as f64).sum::<f64>() / cfg.reps as f64,
    });
    Ok(report)
}
