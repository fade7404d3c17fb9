//! Command-line front end: `run`, `baseline`, `audit`, `sweep`.
//!
//! Commands are plain functions over file paths so integration tests can call
//! them directly; the binary in `main.rs` only parses flags and maps results
//! to exit codes. Multi-seed runs and sweeps execute on a small worker pool;
//! every worker owns one `(config, seed)` run end to end.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use crate::analysis::{
    self, summarize, BaselineKind, RunSummary,
};
use crate::baselines::{
    compute_alpha_adversarial, compute_alpha_stochastic, empirical_distribution,
    policy_round_outcomes, solve_lp, unconstrained_optimal_policy, LpSolution, LpStatus,
};
use crate::dual::{make_rates, make_rates_closed_form, RateSchedule};
use crate::engine::{run_framework, run_second_price, Trace};
use crate::env::InputModel;
use crate::model::Policy;
use crate::primal::Exp3SixBank;
use crate::{Error, Result};

pub use config::{load_experiment, Algorithm, EnvKind, Experiment};

/// Offline baseline of an experiment's environment.
#[derive(Debug, Clone)]
pub struct BaselineInfo {
    pub kind: BaselineKind,
    pub lp: LpSolution,
    /// Margin used by the bound audits: stochastic margin for table
    /// environments, worst-round margin for scripts.
    pub alpha: f64,
    /// Policy attaining the margin.
    pub safe_policy: Policy,
    /// Stochastic margin of the empirical distribution (scripted runs only).
    pub alpha_stochastic_empirical: Option<f64>,
}

/// Computes the LP baseline and feasibility margins for the experiment's
/// environment.
pub fn compute_baseline(exp: &Experiment) -> Result<BaselineInfo> {
    compute_baseline_for_model(&exp.model, exp.run_config.budget / exp.run_config.horizon as f64, exp.run_config.omega)
}

pub fn compute_baseline_for_model(
    model: &InputModel,
    rho: f64,
    omega: f64,
) -> Result<BaselineInfo> {
    match model.table() {
        Some(table) => {
            let lp = solve_lp(table, &model.valuations, &model.bids, rho, omega, model.mechanism)?;
            let a = compute_alpha_stochastic(
                table,
                &model.valuations,
                &model.bids,
                rho,
                omega,
                model.mechanism,
            )?;
            Ok(BaselineInfo {
                kind: BaselineKind::StochasticOpt,
                lp,
                alpha: a.alpha,
                safe_policy: a.policy,
                alpha_stochastic_empirical: None,
            })
        }
        None => {
            let script = model.script().expect("model is scripted");
            let gamma_bar = empirical_distribution(script, &model.valuations)?;
            let lp = solve_lp(
                &gamma_bar,
                &model.valuations,
                &model.bids,
                rho,
                omega,
                model.mechanism,
            )?;
            let adv = compute_alpha_adversarial(
                script,
                &model.valuations,
                &model.bids,
                rho,
                omega,
                model.mechanism,
            )?;
            let stoc = compute_alpha_stochastic(
                &gamma_bar,
                &model.valuations,
                &model.bids,
                rho,
                omega,
                model.mechanism,
            )?;
            Ok(BaselineInfo {
                kind: BaselineKind::AdversarialCompetitive,
                lp,
                alpha: adv.alpha,
                safe_policy: adv.policy,
                alpha_stochastic_empirical: Some(stoc.alpha),
            })
        }
    }
}

/// Rate schedule matching the experiment's algorithm.
pub fn rates_for(exp: &Experiment) -> RateSchedule {
    match exp.algorithm {
        Algorithm::FrameworkExp3six => {
            make_rates(&exp.run_config, exp.model.bids.len(), exp.model.valuations.len())
        }
        Algorithm::SecondPriceClosedForm => make_rates_closed_form(&exp.run_config),
    }
}

/// Runs one seed of the experiment.
pub fn execute_seed(exp: &Experiment, seed: u64) -> Result<Trace> {
    match exp.algorithm {
        Algorithm::FrameworkExp3six => {
            let mut bank = Exp3SixBank::new(
                exp.model.valuations.len(),
                exp.model.bids.len(),
                exp.run_config.horizon,
            );
            run_framework(&exp.model, &mut bank, &exp.run_config, seed)
        }
        Algorithm::SecondPriceClosedForm => run_second_price(&exp.model, &exp.run_config, seed),
    }
}

fn parallel_map<T, R, F>(items: Vec<T>, jobs: usize, f: F) -> Vec<R>
where
    T: Send + Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let jobs = jobs.max(1).min(items.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                results.lock().expect("worker poisoned the result buffer")[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .expect("worker poisoned the result buffer")
        .into_iter()
        .map(|r| r.expect("every task ran"))
        .collect()
}

#[derive(Debug, Serialize)]
struct SummaryFile<'a> {
    config_hash: &'a str,
    seed: u64,
    algorithm: String,
    baseline: &'static str,
    alpha: f64,
    #[serde(flatten)]
    summary: &'a RunSummary,
}

#[derive(Debug, Serialize)]
struct AggRecord {
    seed: u64,
    regret: f64,
    roi_violation: f64,
    spend: f64,
    total_reward: f64,
    tau: usize,
    mu_max: f64,
    budget_ok: bool,
}

#[derive(Debug, Serialize)]
struct AggregateFile<'a> {
    config_hash: &'a str,
    algorithm: String,
    runs: usize,
    opt_value: f64,
    alpha: f64,
    budget_ok_all: bool,
    regret_mean: f64,
    regret_std: f64,
    roi_violation_mean: f64,
    roi_violation_std: f64,
    records: Vec<AggRecord>,
}

/// Result of `cmd_run`, for exit-code mapping.
#[derive(Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub budget_ok_all: bool,
    pub summaries: Vec<(u64, RunSummary)>,
}

/// Executes one trace + summary per seed and an aggregate record.
/// The exit contract: failure of the hard budget invariant on any seed makes
/// the command report `budget_ok_all = false` (nonzero process exit).
pub fn cmd_run(
    config_path: &Path,
    out_override: Option<&Path>,
    seed_override: Option<u64>,
    jobs: usize,
) -> Result<RunOutcome> {
    let mut exp = load_experiment(config_path)?;
    if let Some(out) = out_override {
        exp.out_dir = out.to_path_buf();
    }
    if let Some(seed) = seed_override {
        exp.seeds = vec![seed];
    }
    let baseline = compute_baseline(&exp)?;
    let rates = rates_for(&exp);
    std::fs::create_dir_all(&exp.out_dir)?;

    let seeds = exp.seeds.clone();
    let runs: Vec<Result<(u64, RunSummary)>> = parallel_map(seeds, jobs, |&seed| {
        let trace = execute_seed(&exp, seed)?;
        let summary = summarize(
            &trace,
            baseline.lp.value,
            baseline.kind,
            baseline.alpha,
            &exp.run_config,
            &rates,
        );
        let csv = output::trace_to_csv(&trace, &exp.config_hash);
        output::atomic_write(&exp.out_dir.join(format!("trace_{seed}.csv")), csv.as_bytes())?;
        let file = SummaryFile {
            config_hash: &exp.config_hash,
            seed,
            algorithm: exp.algorithm.to_string(),
            baseline: match baseline.kind {
                BaselineKind::StochasticOpt => "stochastic-opt",
                BaselineKind::AdversarialCompetitive => "adversarial-competitive",
            },
            alpha: baseline.alpha,
            summary: &summary,
        };
        let toml_text = toml::to_string(&file)
            .map_err(|e| Error::ConfigParse(format!("summary serialization: {e}")))?;
        output::atomic_write(
            &exp.out_dir.join(format!("summary_{seed}.toml")),
            toml_text.as_bytes(),
        )?;
        Ok((seed, summary))
    });

    let mut summaries = Vec::new();
    let mut records = Vec::new();
    let mut budget_ok_all = true;
    for run in runs {
        let (seed, summary) = run?;
        budget_ok_all &= summary.budget_ok;
        records.push(AggRecord {
            seed,
            regret: summary.regret,
            roi_violation: summary.roi_violation,
            spend: summary.spend,
            total_reward: summary.total_reward,
            tau: summary.tau,
            mu_max: summary.mu_max,
            budget_ok: summary.budget_ok,
        });
        summaries.push((seed, summary));
    }
    let (regret_mean, regret_std) =
        output::mean_std(&records.iter().map(|r| r.regret).collect::<Vec<_>>());
    let (roi_mean, roi_std) =
        output::mean_std(&records.iter().map(|r| r.roi_violation).collect::<Vec<_>>());
    let aggregate = AggregateFile {
        config_hash: &exp.config_hash,
        algorithm: exp.algorithm.to_string(),
        runs: records.len(),
        opt_value: baseline.lp.value,
        alpha: baseline.alpha,
        budget_ok_all,
        regret_mean,
        regret_std,
        roi_violation_mean: roi_mean,
        roi_violation_std: roi_std,
        records,
    };
    let text = toml::to_string(&aggregate)
        .map_err(|e| Error::ConfigParse(format!("aggregate serialization: {e}")))?;
    output::atomic_write(&exp.out_dir.join("aggregate.toml"), text.as_bytes())?;
    println!(
        "run: {} seeds, opt={:.6}, alpha={:.6}, regret mean {:.4} (sd {:.4}), roi violation mean {:.4}, budget_ok={}",
        aggregate.runs, baseline.lp.value, baseline.alpha, regret_mean, regret_std, roi_mean, budget_ok_all
    );
    Ok(RunOutcome { out_dir: exp.out_dir.clone(), budget_ok_all, summaries })
}

#[derive(Debug, Serialize)]
struct KSafeCertFile {
    safe_bid_index: usize,
    block_len: usize,
    alpha_target: f64,
    alpha_block: f64,
}

#[derive(Debug, Serialize)]
struct BaselineFile {
    config_hash: String,
    baseline: &'static str,
    opt_value: f64,
    status: &'static str,
    budget_dual: f64,
    roi_dual: f64,
    alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha_adversarial: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha_stochastic_empirical: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_safe: Option<KSafeCertFile>,
    policy: Vec<Vec<f64>>,
}

/// Computes and writes the LP baseline and feasibility margins.
pub fn cmd_baseline(config_path: &Path, out_override: Option<&Path>) -> Result<BaselineInfo> {
    let mut exp = load_experiment(config_path)?;
    if let Some(out) = out_override {
        exp.out_dir = out.to_path_buf();
    }
    let baseline = compute_baseline(&exp)?;
    let file = BaselineFile {
        config_hash: exp.config_hash.clone(),
        baseline: match baseline.kind {
            BaselineKind::StochasticOpt => "stochastic-opt",
            BaselineKind::AdversarialCompetitive => "adversarial-competitive",
        },
        opt_value: baseline.lp.value,
        status: match baseline.lp.status {
            LpStatus::Optimal => "optimal",
            LpStatus::OnlyVoidFeasible => "only-void-feasible",
        },
        budget_dual: baseline.lp.duals.0,
        roi_dual: baseline.lp.duals.1,
        alpha: baseline.alpha,
        alpha_adversarial: match baseline.kind {
            BaselineKind::AdversarialCompetitive => Some(baseline.alpha),
            BaselineKind::StochasticOpt => None,
        },
        alpha_stochastic_empirical: baseline.alpha_stochastic_empirical,
        k_safe: exp.k_safe_certificate.as_ref().map(|c| KSafeCertFile {
            safe_bid_index: c.safe_bid_index,
            block_len: c.block_len,
            alpha_target: c.alpha_target,
            alpha_block: c.alpha_block,
        }),
        policy: baseline.lp.policy.rows().to_vec(),
    };
    let text = toml::to_string(&file)
        .map_err(|e| Error::ConfigParse(format!("baseline serialization: {e}")))?;
    std::fs::create_dir_all(&exp.out_dir)?;
    output::atomic_write(&exp.out_dir.join("baseline.toml"), text.as_bytes())?;
    println!(
        "baseline: opt={:.6} ({}), alpha={:.6}{}",
        baseline.lp.value,
        file.status,
        baseline.alpha,
        baseline
            .alpha_stochastic_empirical
            .map(|a| format!(", alpha_stochastic(empirical)={a:.6}"))
            .unwrap_or_default()
    );
    if let Some(s) = &baseline.alpha_stochastic_empirical {
        debug_assert!(baseline.alpha <= s + 1e-9);
    }
    Ok(baseline)
}

/// One audit check: `hard` checks gate the exit code, soft checks are
/// informational (probabilistic predicates).
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub hard: bool,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
struct AuditFile {
    config_hash: String,
    trace: String,
    hard_ok: bool,
    checks: Vec<CheckRecord>,
}

#[derive(Debug)]
pub struct AuditOutcome {
    pub hard_ok: bool,
    pub checks: Vec<CheckRecord>,
}

fn check(
    checks: &mut Vec<CheckRecord>,
    name: &str,
    hard: bool,
    pass: bool,
    detail: String,
) {
    println!("{} {} {}: {}", if pass { "PASS" } else { "FAIL" }, if hard { "hard" } else { "soft" }, name, detail);
    checks.push(CheckRecord { name: name.to_string(), hard, pass, detail });
}

fn skip(checks: &mut Vec<CheckRecord>, name: &str, detail: String) {
    println!("SKIP      {name}: {detail}");
    checks.push(CheckRecord { name: name.to_string(), hard: false, pass: true, detail: format!("skipped: {detail}") });
}

/// Runs the audit battery over a recorded trace.
pub fn cmd_audit(
    trace_path: &Path,
    config_path: &Path,
    out_override: Option<&Path>,
) -> Result<AuditOutcome> {
    let mut exp = load_experiment(config_path)?;
    if let Some(out) = out_override {
        exp.out_dir = out.to_path_buf();
    }
    let text = std::fs::read_to_string(trace_path)?;
    let (trace, trace_hash) = output::trace_from_csv(&text)?;
    if trace_hash != exp.config_hash {
        return Err(Error::HashMismatch { trace: trace_hash, config: exp.config_hash.clone() });
    }
    if trace.horizon() != exp.run_config.horizon {
        return Err(Error::DimensionMismatch(format!(
            "trace has {} rounds, config horizon is {}",
            trace.horizon(),
            exp.run_config.horizon
        )));
    }

    let rho = exp.run_config.budget / exp.run_config.horizon as f64;
    let rates = rates_for(&exp);
    let mut checks = Vec::new();

    // Record identities: stored gaps match (f, c, rho), budget is monotone.
    let mut identity_ok = true;
    let mut detail = String::from("g = c - rho, h = c - f, monotone budget");
    let mut prev_budget = exp.run_config.budget;
    for r in &trace.records {
        let ok = (r.budget_gap - (r.cost - rho)).abs() <= 1e-9
            && (r.roi_gap - (r.cost - r.reward)).abs() <= 1e-9
            && r.budget_remaining <= prev_budget + 1e-12
            && (0.0..=1.0).contains(&r.cost)
            && r.reward <= 1.0;
        if !ok {
            identity_ok = false;
            detail = format!("round {} breaks a stored-field identity", r.t);
            break;
        }
        prev_budget = r.budget_remaining;
    }
    check(&mut checks, "trace-identities", true, identity_ok, detail);

    // Hard budget.
    let spend = trace.spend();
    let budget_ok = trace.final_budget() >= 0.0 && spend <= exp.run_config.budget + 1e-9;
    check(
        &mut checks,
        "hard-budget",
        true,
        budget_ok,
        format!("spend {:.6} <= budget {:.6}", spend, exp.run_config.budget),
    );

    // Dual replay.
    let replay = analysis::dual_replay_consistent(&trace, &rates, rho);
    check(&mut checks, "dual-replay", true, replay, "recomputed (lambda, mu) match the records".into());

    // mu growth.
    let (lambdas, mus) = analysis::multiplier_series(&trace);
    let hs: Vec<f64> = trace.records.iter().map(|r| r.roi_gap).collect();
    match analysis::mu_growth_check(&mus, &hs, rates.eta_r, 1e-9) {
        Ok(()) => check(&mut checks, "mu-growth", true, true, "all pairs satisfy the growth identity".into()),
        Err(v) => check(
            &mut checks,
            "mu-growth",
            true,
            false,
            format!("violated on [{}, {}]: mu={} < required {}", v.t1, v.t2, v.lhs, v.rhs),
        ),
    }

    // Dual lower bound on weighted budget gaps.
    if exp.audit.budget_gap_bound {
        let (lhs, rhs, ok) = analysis::budget_gap_lower_bound(&trace, &rates, rho);
        check(
            &mut checks,
            "budget-gap-lower-bound",
            true,
            ok,
            format!("sum lambda*g = {lhs:.4} >= {rhs:.4}"),
        );
    }

    // Margin-dependent checks need the baseline.
    let baseline = compute_baseline(&exp)?;
    let alpha = baseline.alpha;

    if exp.audit.mu_bound {
        if alpha > 0.0 {
            let bound = 2.0 / alpha;
            let ok = trace.mu_max() <= bound;
            check(
                &mut checks,
                "mu-bound",
                false,
                ok,
                format!("mu_max {:.6} vs 2/alpha {:.6}", trace.mu_max(), bound),
            );
        } else {
            skip(&mut checks, "mu-bound", "alpha = 0; bound undefined".into());
        }
    }

    // Interval regret (framework) or closed-form optimality (second price).
    match exp.algorithm {
        Algorithm::FrameworkExp3six => {
            if exp.audit.interval_regret {
                let losses = analysis::counterfactual_losses(
                    &trace,
                    &exp.model.bids,
                    exp.model.mechanism,
                    exp.run_config.omega,
                    rho,
                );
                let ep_scale = (exp.model.valuations.len() as f64).sqrt() * rates.e_p;
                if trace.horizon() <= 5000 {
                    let report = analysis::interval_regret_audit(&losses, ep_scale)?;
                    check(
                        &mut checks,
                        "interval-regret",
                        false,
                        !report.violated,
                        format!(
                            "max interval regret {:.4} on [{}, {}] vs bound {:.4} (worst margin {:.4})",
                            report.max_regret,
                            report.window.0,
                            report.window.1,
                            report.bound_at_window,
                            report.worst_bound_margin
                        ),
                    );
                } else {
                    let mut rng = <rand_chacha::ChaCha12Rng as rand::SeedableRng>::seed_from_u64(13);
                    let report =
                        analysis::interval_regret_audit_sampled(&losses, ep_scale, 20_000, &mut rng);
                    check(
                        &mut checks,
                        "interval-regret-sampled",
                        false,
                        !report.violated,
                        format!(
                            "20000 sampled windows, max regret {:.4}, worst margin {:.4}",
                            report.max_regret, report.worst_bound_margin
                        ),
                    );
                }
            }
        }
        Algorithm::SecondPriceClosedForm => {
            if (exp.run_config.omega - 1.0).abs() < 1e-12 {
                let report = analysis::second_price_optimality(&trace, exp.run_config.omega);
                check(
                    &mut checks,
                    "second-price-optimality",
                    true,
                    report.ok,
                    format!("worst interval margin {:.3e}", report.worst_margin),
                );
            } else {
                skip(
                    &mut checks,
                    "second-price-optimality",
                    "closed-form bid targets omega = 1; other weights skip the optimality claim".into(),
                );
            }
        }
    }

    // Safe-policy and optimal-policy interval predicates on the realized rounds.
    if exp.audit.policy_predicates && alpha > 0.0 {
        let realized_pairs: Vec<(f64, f64)> =
            trace.records.iter().map(|r| (r.valuation, r.competing_bid)).collect();
        let realized = InputModel::scripted(
            exp.model.mechanism,
            exp.model.valuations.clone(),
            exp.model.bids.clone(),
            &realized_pairs,
        )?;
        if trace.horizon() <= 5000 {
            let outs = policy_round_outcomes(&realized, &baseline.safe_policy, exp.run_config.omega)?;
            let gaps: Vec<(f64, f64)> =
                outs.iter().map(|o| (o.budget_gap(rho), o.roi_gap())).collect();
            let report = analysis::check_delta_safe(&lambdas, &mus, &gaps, alpha, exp.run_config.delta);
            check(
                &mut checks,
                "delta-safe",
                false,
                report.ok,
                match report.worst {
                    None => "margin policy is delta-safe on every interval".into(),
                    Some((t1, t2, lhs, rhs)) => {
                        format!("violated on [{t1}, {t2}]: lhs {lhs:.4} > rhs {rhs:.4}")
                    }
                },
            );
        } else {
            skip(&mut checks, "delta-safe", format!("T = {} > 5000", trace.horizon()));
        }

        let (q, candidate) = match baseline.kind {
            BaselineKind::StochasticOpt => (1.0, baseline.lp.policy.clone()),
            BaselineKind::AdversarialCompetitive => {
                let script = realized.script().expect("scripted by construction");
                let unconstrained = unconstrained_optimal_policy(
                    script,
                    &exp.model.valuations,
                    &exp.model.bids,
                    exp.run_config.omega,
                    exp.model.mechanism,
                );
                let mixed = baseline
                    .safe_policy
                    .mix(&unconstrained, alpha / (1.0 + alpha))?;
                (alpha / (1.0 + alpha), mixed)
            }
        };
        let outs = policy_round_outcomes(&realized, &candidate, exp.run_config.omega)?;
        let rewards: Vec<f64> = outs.iter().map(|o| o.reward).collect();
        let gaps: Vec<(f64, f64)> = outs.iter().map(|o| (o.budget_gap(rho), o.roi_gap())).collect();
        let report = analysis::check_optimal_policy(
            &lambdas,
            &mus,
            &rewards,
            &gaps,
            q,
            baseline.lp.value,
            exp.run_config.delta,
            alpha,
        );
        check(
            &mut checks,
            "optimal-policy",
            false,
            report.ok,
            format!("reward condition {}, prefix penalties {}", report.reward_ok, report.penalty_ok),
        );
    } else if exp.audit.policy_predicates {
        skip(&mut checks, "delta-safe", "alpha = 0".into());
        skip(&mut checks, "optimal-policy", "alpha = 0".into());
    }

    let hard_ok = checks.iter().all(|c| !c.hard || c.pass);
    let file = AuditFile {
        config_hash: exp.config_hash.clone(),
        trace: trace_path.display().to_string(),
        hard_ok,
        checks: checks.clone(),
    };
    let text = toml::to_string(&file)
        .map_err(|e| Error::ConfigParse(format!("audit serialization: {e}")))?;
    std::fs::create_dir_all(&exp.out_dir)?;
    let stem = trace_path.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
    output::atomic_write(&exp.out_dir.join(format!("audit_{stem}.toml")), text.as_bytes())?;
    Ok(AuditOutcome { hard_ok, checks })
}

#[derive(Debug, Serialize)]
struct SweepRecord {
    horizon: usize,
    seed: u64,
    regret: f64,
    roi_violation: f64,
    roi_violation_per_round: f64,
    spend: f64,
    total_reward: f64,
    tau: usize,
    mu_max: f64,
    budget_ok: bool,
}

#[derive(Debug, Serialize)]
struct SweepFile<'a> {
    config_hash: &'a str,
    algorithm: String,
    horizons: Vec<usize>,
    budget_ok_all: bool,
    records: Vec<SweepRecord>,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub budget_ok_all: bool,
    pub records: usize,
}

/// Horizon-scaling study: reruns the experiment at each swept horizon with
/// the per-round budget held fixed.
pub fn cmd_sweep(config_path: &Path, out_override: Option<&Path>, jobs: usize) -> Result<SweepOutcome> {
    let mut exp = load_experiment(config_path)?;
    if let Some(out) = out_override {
        exp.out_dir = out.to_path_buf();
    }
    let horizons = exp
        .sweep_horizons
        .clone()
        .ok_or_else(|| Error::InvalidConfig("sweep: config has no [sweep] section".into()))?;
    let rho = exp.run_config.budget / exp.run_config.horizon as f64;

    // Build one experiment per horizon.
    let mut variants: Vec<Experiment> = Vec::new();
    for &t in &horizons {
        let mut v = exp.clone();
        v.run_config = crate::model::RunConfig::new(
            t,
            rho * t as f64,
            exp.run_config.delta,
            exp.run_config.roi_target,
            exp.run_config.omega,
        )?;
        match exp.env_kind {
            EnvKind::Stochastic => {}
            EnvKind::Generator => {
                let generator = exp.generator.as_ref().expect("generator env retains its section");
                let (model, cert) = config::build_generator_model(
                    generator,
                    t,
                    rho,
                    exp.run_config.omega,
                    exp.model.mechanism,
                    &exp.model.bids,
                )?;
                v.model = model;
                v.k_safe_certificate = cert;
            }
            EnvKind::Scripted => {
                return Err(Error::InvalidConfig(
                    "sweep: fixed script files cannot be rescaled; use a stochastic or generator env"
                        .into(),
                ));
            }
        }
        variants.push(v);
    }

    let mut tasks: Vec<(usize, u64)> = Vec::new();
    for (vi, _) in variants.iter().enumerate() {
        for &seed in &exp.seeds {
            tasks.push((vi, seed));
        }
    }
    let results: Vec<Result<SweepRecord>> = parallel_map(tasks, jobs, |&(vi, seed)| {
        let v = &variants[vi];
        let baseline = compute_baseline(v)?;
        let rates = rates_for(v);
        let trace = execute_seed(v, seed)?;
        let summary = summarize(&trace, baseline.lp.value, baseline.kind, baseline.alpha, &v.run_config, &rates);
        Ok(SweepRecord {
            horizon: v.run_config.horizon,
            seed,
            regret: summary.regret,
            roi_violation: summary.roi_violation,
            roi_violation_per_round: summary.roi_violation / v.run_config.horizon as f64,
            spend: summary.spend,
            total_reward: summary.total_reward,
            tau: summary.tau,
            mu_max: summary.mu_max,
            budget_ok: summary.budget_ok,
        })
    });

    let mut records = Vec::new();
    let mut budget_ok_all = true;
    for r in results {
        let rec = r?;
        budget_ok_all &= rec.budget_ok;
        records.push(rec);
    }
    let n_records = records.len();
    let file = SweepFile {
        config_hash: &exp.config_hash,
        algorithm: exp.algorithm.to_string(),
        horizons,
        budget_ok_all,
        records,
    };
    let text = toml::to_string(&file)
        .map_err(|e| Error::ConfigParse(format!("sweep serialization: {e}")))?;
    std::fs::create_dir_all(&exp.out_dir)?;
    output::atomic_write(&exp.out_dir.join("sweep.toml"), text.as_bytes())?;
    println!("sweep: {n_records} runs, budget_ok={budget_ok_all}");
    Ok(SweepOutcome { budget_ok_all, records: n_records })
}
