//! Per-trial pipelines behind each subcommand and the parallel runner.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use fairdiv_core::allocators::{
    adversarial_instance, largest_pair, round_robin, rr_envy_bound, welfare_max, PickOrder,
};
use fairdiv_core::btl::{btl_fair_divide, write_comparisons, ComparisonData};
use fairdiv_core::discrepancy::{
    multicolor_bound, online_envy_allocate, online_envy_bound, vector_balance_bound,
    write_step_log, BalancerParams, BalancerState, ColorTree, OnlineParams, StepRecord,
};
use fairdiv_core::lp_round::lp_pipeline;
use fairdiv_core::noise::{apply_noise, mhr_pipeline, AdversarialScheme, Distribution, NoiseModel};
use fairdiv_core::rng::{self, Stream};
use fairdiv_core::statcheck::{
    association_gap, conditional_mean_gap, strict_condition, variance, DiscreteRv,
};
use fairdiv_core::{
    envy_report, is_balanced, oracle, FairDivError, NoisyInstance, ValuationMatrix, ENVY_TOL,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::acceptance;
use crate::config::{support_bounds, ExperimentConfig, NoiseKind, Subcommand};
use crate::report::{RunReport, TrialRow};

/// Tolerance for the exact inequalities checked on every trial.
pub const EXACT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: FairDivError,
    },
    #[error("FAIRDIV_THREADS: {0}")]
    Threads(String),
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Side output kept for trial 0 when a log path is configured.
#[derive(Debug, Clone)]
pub enum SideLog {
    Steps(Vec<StepRecord>),
    Comparisons(Vec<ComparisonData>),
    Truth(ValuationMatrix),
}

#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub row: TrialRow,
    pub log: Option<SideLog>,
}

/// Extra report columns per subcommand, after the six base columns.
pub fn extra_columns(sub: Subcommand) -> Vec<&'static str> {
    match sub {
        Subcommand::Rr | Subcommand::Welfare | Subcommand::VerifyAll => vec![],
        Subcommand::RrLowerbound => vec!["pair_envy"],
        Subcommand::Lp => vec!["alpha"],
        Subcommand::OnlineEnvy => vec!["discrepancy", "discrepancy_bound"],
        Subcommand::Balance => vec!["bound_ratio"],
        Subcommand::Multicolor => vec!["identity_residual"],
        Subcommand::Btl => vec!["max_error", "retries", "sparse_warning"],
        Subcommand::Mhr => vec!["eps_max", "beta_log", "beta_harmonic", "noise_event"],
        Subcommand::VerifyStatcheck => vec!["strict", "conditioning_valid"],
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// `n x m` matrix of independent draws from `dist`, tagged with the
/// support as its declared range.
pub fn sample_matrix(
    n: usize,
    m: usize,
    dist: &Distribution,
    rng: &mut Stream,
) -> Result<ValuationMatrix, FairDivError> {
    let values = (0..n * m)
        .map(|_| dist.sample(rng))
        .collect::<Result<Vec<_>, _>>()?;
    let v = ValuationMatrix::new(n, m, values)?;
    match support_bounds(dist) {
        Some((lo, hi)) => v.with_range(lo, hi),
        None => Ok(v),
    }
}

/// Bounded noise of the configured kind. `Shift` draws one shift per agent
/// from `[0, 1]` before the cell noise.
pub fn bounded_noise(
    truth: &ValuationMatrix,
    eps: f64,
    kind: NoiseKind,
    rng: &mut Stream,
) -> Result<NoisyInstance, FairDivError> {
    let scheme = match kind {
        NoiseKind::Shift => {
            AdversarialScheme::PerAgentShift((0..truth.n()).map(|_| rng.random::<f64>()).collect())
        }
        NoiseKind::Box => AdversarialScheme::UniformInBox,
        NoiseKind::Worst => AdversarialScheme::WorstAgainstRr,
    };
    apply_noise(truth, &NoiseModel::BoundedAdversarial { eps, scheme }, rng)
}

fn pick_order(cfg: &ExperimentConfig) -> Result<PickOrder, FairDivError> {
    match &cfg.order {
        Some(o) => PickOrder::new(o.clone()),
        None => Ok(PickOrder::identity(cfg.n)),
    }
}

pub(crate) fn trial_rr(
    cfg: &ExperimentConfig,
    row: &mut TrialRow,
    rng: &mut Stream,
) -> Result<ValuationMatrix, FairDivError> {
    let truth = sample_matrix(cfg.n, cfg.m, &cfg.truth, rng)?;
    let inst = bounded_noise(&truth, cfg.eps, cfg.noise, rng)?;
    let alloc = round_robin(&inst.estimates, &pick_order(cfg)?)?;
    row.max_envy_true = envy_report(&truth, &alloc)?.max_envy;
    row.max_envy_observed = envy_report(&inst.estimates, &alloc)?.max_envy;
    row.bound_value = rr_envy_bound(cfg.n, cfg.m, cfg.eps, truth.bound_b());
    row.bound_satisfied = row.max_envy_true <= row.bound_value;
    if !row.bound_satisfied {
        row.violations.push(format!(
            "true envy {} exceeds the Round-Robin bound {}",
            row.max_envy_true, row.bound_value
        ));
    }
    if !is_balanced(&alloc, cfg.m, cfg.n)? {
        row.violations
            .push("Round-Robin allocation is not balanced".into());
    }
    Ok(truth)
}

pub(crate) fn trial_rr_lowerbound(
    cfg: &ExperimentConfig,
    row: &mut TrialRow,
    rng: &mut Stream,
) -> Result<ValuationMatrix, FairDivError> {
    let estimates = ValuationMatrix::constant(cfg.n, cfg.m, 0.5)?.with_range(0.0, 1.0)?;
    let order = match &cfg.order {
        Some(o) => PickOrder::new(o.clone())?,
        None => {
            let mut o: Vec<usize> = (0..cfg.n).collect();
            o.shuffle(rng);
            PickOrder::new(o)?
        }
    };
    let alloc = round_robin(&estimates, &order)?;
    let (p, q) = largest_pair(&alloc)?;
    let truth = adversarial_instance(cfg.n, cfg.m, cfg.eps, &alloc)?;
    let report = envy_report(&truth, &alloc)?;
    row.max_envy_true = report.max_envy;
    row.max_envy_observed = envy_report(&estimates, &alloc)?.max_envy;
    row.bound_value = 2.0 * cfg.eps * cfg.m as f64 / cfg.n as f64;
    let pair = report.envy(q, p);
    row.bound_satisfied = pair >= row.bound_value - EXACT_TOL;
    row.extras = vec![pair];
    if !row.bound_satisfied {
        row.violations.push(format!(
            "agent {q} envies agent {p} by {pair}, below the lower bound {}",
            row.bound_value
        ));
    }
    Ok(truth)
}

pub(crate) fn trial_welfare(
    cfg: &ExperimentConfig,
    row: &mut TrialRow,
    rng: &mut Stream,
) -> Result<ValuationMatrix, FairDivError> {
    let truth = sample_matrix(cfg.n, cfg.m, &cfg.truth, rng)?;
    let inst = apply_noise(&truth, &NoiseModel::AdditiveIid(cfg.dist.clone()), rng)?;
    let alloc = welfare_max(&inst.estimates, rng)?;
    let report = envy_report(&truth, &alloc)?;
    row.max_envy_true = report.max_envy;
    row.max_envy_observed = envy_report(&inst.estimates, &alloc)?.max_envy;
    row.bound_value = 0.0;
    row.bound_satisfied = report.is_envy_free;
    Ok(truth)
}

pub(crate) fn trial_lp(
    cfg: &ExperimentConfig,
    row: &mut TrialRow,
    rng: &mut Stream,
) -> Result<ValuationMatrix, FairDivError> {
    let truth = sample_matrix(cfg.n, cfg.m, &cfg.truth, rng)?;
    let inst = bounded_noise(&truth, cfg.eps, cfg.noise, rng)?;
    let out = lp_pipeline(&inst, rng)?;
    row.max_envy_true = out.true_max_envy;
    row.max_envy_observed = out.observed_max_envy;
    row.bound_value = 0.0;
    row.bound_satisfied = out.envy_free;
    row.extras = vec![out.alpha.unwrap_or(f64::NAN)];
    Ok(truth)
}

/// Truth and noisy vectors for the online subcommands: column `j` of each
/// matrix is the `j`-th arriving vector.
fn vector_stream(cfg: &ExperimentConfig, rng: &mut Stream) -> Result<NoisyInstance, FairDivError> {
    let truth = sample_matrix(cfg.n, cfg.m, &cfg.truth, rng)?;
    bounded_noise(&truth, cfg.eps, cfg.noise, rng)
}

pub(crate) fn trial_online_envy(
    cfg: &ExperimentConfig,
    row: &mut TrialRow,
    rng: &mut Stream,
) -> Result<Vec<StepRecord>, FairDivError> {
    let inst = vector_stream(cfg, rng)?;
    let noisy: Vec<Vec<f64>> = (0..cfg.m).map(|j| inst.estimates.column(j)).collect();
    let params = OnlineParams {
        eps: cfg.eps,
        delta: cfg.delta,
        c: cfg.c,
    };
    let out = online_envy_allocate(cfg.n, &noisy, |j| inst.truth.column(j), params, rng)?;
    row.max_envy_true = out.max_envy;
    row.max_envy_observed = out.scaled_max_envy;
    row.bound_value = online_envy_bound(cfg.n, cfg.m, cfg.eps, cfg.delta, cfg.c);
    row.bound_satisfied = out.max_envy <= row.bound_value;
    row.fail_events = out.fail_events;
    row.extras = vec![
        out.discrepancy,
        multicolor_bound(cfg.n, cfg.m, cfg.n, cfg.eps, cfg.delta, cfg.c),
    ];
    if out.scaled_max_envy > out.discrepancy + EXACT_TOL {
        row.violations.push(format!(
            "scaled envy {} exceeds the colour discrepancy {}",
            out.scaled_max_envy, out.discrepancy
        ));
    }
    Ok(out.step_log)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

pub(crate) fn trial_balance(
    cfg: &ExperimentConfig,
    row: &mut TrialRow,
    rng: &mut Stream,
) -> Result<Vec<StepRecord>, FairDivError> {
    let inst = vector_stream(cfg, rng)?;
    let params = BalancerParams {
        n: cfg.n,
        m: cfg.m,
        p: 0.5,
        eps: cfg.eps,
        delta: cfg.delta,
        c: cfg.c,
    };
    let mut state = BalancerState::new(params)?;
    let mut noisy_sum = vec![0.0; cfg.n];
    let (mut worst, mut worst_noisy, mut worst_ratio) = (0.0f64, 0.0f64, 0.0f64);
    let mut all_ok = true;
    for j in 0..cfg.m {
        let noisy = inst.estimates.column(j);
        let sign = state.step(&noisy, rng)?;
        state.reveal(&inst.truth.column(j))?;
        for (s, x) in noisy_sum.iter_mut().zip(&noisy) {
            *s += sign * x;
        }
        let norm = inf_norm(state.w());
        let bound = vector_balance_bound(cfg.n, cfg.m, cfg.eps, cfg.delta, cfg.c, j + 1);
        all_ok &= norm <= bound;
        worst = worst.max(norm);
        worst_noisy = worst_noisy.max(inf_norm(&noisy_sum));
        worst_ratio = worst_ratio.max(norm / bound);
    }
    row.max_envy_true = worst;
    row.max_envy_observed = worst_noisy;
    row.bound_value = vector_balance_bound(cfg.n, cfg.m, cfg.eps, cfg.delta, cfg.c, cfg.m);
    row.bound_satisfied = all_ok;
    row.fail_events = state.log().iter().filter(|r| r.fail_flag).count();
    row.extras = vec![worst_ratio];
    Ok(state.log().to_vec())
}

fn colour_discrepancy(sums: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for a in 0..sums.len() {
        for b in a + 1..sums.len() {
            for (x, y) in sums[a].iter().zip(&sums[b]) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    worst
}

pub(crate) fn trial_multicolor(
    cfg: &ExperimentConfig,
    row: &mut TrialRow,
    rng: &mut Stream,
) -> Result<Vec<StepRecord>, FairDivError> {
    let inst = vector_stream(cfg, rng)?;
    let mut tree = ColorTree::build(cfg.colors, cfg.n, cfg.m, cfg.eps, cfg.delta, cfg.c)?;
    let mut noisy_sums = vec![vec![0.0; cfg.n]; cfg.colors];
    for j in 0..cfg.m {
        let noisy = inst.estimates.column(j);
        let colour = tree.assign_color(&noisy, rng)?;
        tree.reveal(&inst.truth.column(j))?;
        for (s, x) in noisy_sums[colour].iter_mut().zip(&noisy) {
            *s += x;
        }
    }
    let residual = tree.tree_identity_residual();
    row.max_envy_true = tree.discrepancy();
    row.max_envy_observed = colour_discrepancy(&noisy_sums);
    row.bound_value = multicolor_bound(cfg.n, cfg.m, cfg.colors, cfg.eps, cfg.delta, cfg.c);
    row.bound_satisfied = row.max_envy_true <= row.bound_value;
    row.fail_events = tree.fail_events();
    row.extras = vec![residual];
    if residual > EXACT_TOL {
        row.violations
            .push(format!("tree identity residual {residual:e}"));
    }
    Ok(tree.step_log().to_vec())
}

pub(crate) fn trial_btl(
    cfg: &ExperimentConfig,
    row: &mut TrialRow,
    rng: &mut Stream,
) -> Result<Vec<ComparisonData>, FairDivError> {
    let truth = sample_matrix(cfg.n, cfg.m, &cfg.truth, rng)?;
    let out = btl_fair_divide(&truth, cfg.p, cfg.k, rng)?;
    let d = &out.diagnostics;
    row.max_envy_true = d.true_max_envy;
    row.max_envy_observed = envy_report(&out.estimates, &out.allocation)?.max_envy;
    row.bound_value = rr_envy_bound(cfg.n, cfg.m, d.max_error, truth.bound_b());
    row.bound_satisfied = row.max_envy_true <= row.bound_value + ENVY_TOL;
    row.extras = vec![d.max_error, d.retries as f64, indicator(d.sparse_warning)];
    if !row.bound_satisfied {
        row.violations.push(format!(
            "true envy {} exceeds the Round-Robin bound {} at the measured error",
            row.max_envy_true, row.bound_value
        ));
    }
    Ok(out.comparisons)
}

pub(crate) fn trial_mhr(
    cfg: &ExperimentConfig,
    row: &mut TrialRow,
    rng: &mut Stream,
) -> Result<ValuationMatrix, FairDivError> {
    let truth = sample_matrix(cfg.n, cfg.m, &cfg.truth, rng)?;
    let r = mhr_pipeline(&truth, &cfg.dist, rng)?;
    row.max_envy_true = r.true_max_envy;
    row.max_envy_observed = r.observed_max_envy;
    row.bound_value = r.bound_value;
    row.bound_satisfied = r.true_max_envy <= r.bound_value;
    row.fail_events = usize::from(!r.noise_event());
    row.extras = vec![
        r.eps_max,
        r.beta_log,
        r.beta_harmonic,
        indicator(r.noise_event()),
    ];
    Ok(truth)
}

/// Nondecreasing table of length `k`; each step is zero with probability
/// one half, otherwise uniform in `[0.01, 1)`.
fn monotone_table(k: usize, rng: &mut Stream) -> Vec<f64> {
    let mut acc = 0.0;
    (0..k)
        .map(|_| {
            if rng.random::<bool>() {
                acc += rng.random_range(0.01..1.0);
            }
            acc
        })
        .collect()
}

/// Random variable on `k` strictly increasing points with weights bounded
/// away from zero.
fn random_rv(k: usize, rng: &mut Stream) -> DiscreteRv {
    let mut acc = rng.random_range(-1.0..0.0);
    let support: Vec<f64> = (0..k)
        .map(|_| {
            acc += rng.random_range(0.01..1.0);
            acc
        })
        .collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let tail: f64 = weights[1..].iter().sum();
    weights[0] = 1.0 - tail;
    DiscreteRv::new(support, weights).expect("construction satisfies the invariants")
}

#[derive(Debug, Clone)]
pub struct AssociationCase {
    pub x: DiscreteRv,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

pub fn random_association_case(rng: &mut Stream) -> AssociationCase {
    let k = rng.random_range(1..=6);
    AssociationCase {
        x: random_rv(k, rng),
        f: monotone_table(k, rng),
        g: monotone_table(k, rng),
    }
}

/// Checks the association inequality and its strictness condition; returns
/// the gap and a description of each failure.
pub fn check_association(case: &AssociationCase) -> Result<(f64, bool, Vec<String>), FairDivError> {
    let gap = association_gap(&case.x, &case.f, &case.g)?;
    let strict = strict_condition(&case.x, &case.f, &case.g)?;
    let mut failures = Vec::new();
    if gap < 0.0 {
        failures.push(format!("association gap {gap} is negative"));
    }
    let both_vary = variance(&case.x, &case.f)? > 0.0 && variance(&case.x, &case.g)? > 0.0;
    if strict != both_vary || (gap > 1e-12) != strict {
        failures.push(format!(
            "gap {gap} disagrees with the strictness condition {strict}"
        ));
    }
    let naive = oracle::naive_association_gap(case.x.weights(), &case.f, &case.g);
    if (gap - naive).abs() > 1e-9 {
        failures.push(format!("gap {gap} differs from the direct formula {naive}"));
    }
    Ok((gap, strict, failures))
}

#[derive(Debug, Clone)]
pub struct ConditionalCase {
    pub d: DiscreteRv,
    pub dp: DiscreteRv,
    pub n: usize,
}

pub fn random_conditional_case(rng: &mut Stream) -> ConditionalCase {
    let kd = rng.random_range(1..=3);
    let kp = rng.random_range(1..=3);
    ConditionalCase {
        d: random_rv(kd, rng),
        dp: random_rv(kp, rng),
        n: rng.random_range(2..=3),
    }
}

/// Outcome of a conditional-mean check: `None` when the conditioning event
/// has probability zero.
pub fn check_conditional(
    case: &ConditionalCase,
) -> Result<Option<(f64, Vec<String>)>, FairDivError> {
    let (win, lose) = match conditional_mean_gap(&case.d, &case.dp, case.n) {
        Ok(v) => v,
        Err(FairDivError::ZeroProbability(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let mut failures = Vec::new();
    if case.dp.variance() > 0.0 && win < lose - 1e-12 {
        failures.push(format!("winning mean {win} below losing mean {lose}"));
    }
    if case.d.variance() > 0.0 && win - lose <= 1e-12 {
        failures.push(format!(
            "winning mean {win} not strictly above losing mean {lose}"
        ));
    }
    match oracle::conditional_means_via_cdf(
        case.d.support(),
        case.d.weights(),
        case.dp.support(),
        case.dp.weights(),
        case.n,
    ) {
        Some((ow, ol)) if (win - ow).abs() <= 1e-9 && (lose - ol).abs() <= 1e-9 => {}
        other => failures.push(format!(
            "enumeration ({win}, {lose}) disagrees with the CDF oracle {other:?}"
        )),
    }
    Ok(Some((win - lose, failures)))
}

fn trial_statcheck(row: &mut TrialRow, rng: &mut Stream) -> Result<(), FairDivError> {
    let (gap, strict, mut failures) = check_association(&random_association_case(rng))?;
    let cond = check_conditional(&random_conditional_case(rng))?;
    row.max_envy_true = gap;
    row.max_envy_observed = cond.as_ref().map_or(f64::NAN, |c| c.0);
    row.bound_value = 0.0;
    if let Some((_, f)) = &cond {
        failures.extend(f.iter().cloned());
    }
    row.bound_satisfied = failures.is_empty();
    row.fail_events = failures.len();
    row.extras = vec![indicator(strict), indicator(cond.is_some())];
    row.violations = failures;
    Ok(())
}

/// Runs one trial of a per-trial subcommand on its own stream.
pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialOutput, FairDivError> {
    let mut rng = rng::stream(cfg.seed, trial as u64, cfg.subcommand.tag());
    let start = cfg.timings.then(Instant::now);
    let mut row = TrialRow::new(trial);
    let keep = trial == 0 && cfg.log.is_some();
    let log = match cfg.subcommand {
        Subcommand::Rr => Some(SideLog::Truth(trial_rr(cfg, &mut row, &mut rng)?)),
        Subcommand::RrLowerbound => Some(SideLog::Truth(trial_rr_lowerbound(
            cfg, &mut row, &mut rng,
        )?)),
        Subcommand::Welfare => Some(SideLog::Truth(trial_welfare(cfg, &mut row, &mut rng)?)),
        Subcommand::Lp => Some(SideLog::Truth(trial_lp(cfg, &mut row, &mut rng)?)),
        Subcommand::Mhr => Some(SideLog::Truth(trial_mhr(cfg, &mut row, &mut rng)?)),
        Subcommand::OnlineEnvy => Some(SideLog::Steps(trial_online_envy(cfg, &mut row, &mut rng)?)),
        Subcommand::Balance => Some(SideLog::Steps(trial_balance(cfg, &mut row, &mut rng)?)),
        Subcommand::Multicolor => Some(SideLog::Steps(trial_multicolor(cfg, &mut row, &mut rng)?)),
        Subcommand::Btl => Some(SideLog::Comparisons(trial_btl(cfg, &mut row, &mut rng)?)),
        Subcommand::VerifyStatcheck => {
            trial_statcheck(&mut row, &mut rng)?;
            None
        }
        Subcommand::VerifyAll => {
            return Err(FairDivError::InvalidParameter(
                "verify-all has no per-trial pipeline".into(),
            ));
        }
    };
    row.time_ms = start.map(|s| s.elapsed().as_secs_f64() * 1e3);
    Ok(TrialOutput {
        row,
        log: if keep { log } else { None },
    })
}

/// Parallelism cap from `FAIRDIV_THREADS`, if set.
pub fn thread_cap() -> Result<Option<usize>, ExperimentError> {
    match std::env::var("FAIRDIV_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(k) if k > 0 => Ok(Some(k)),
            _ => Err(ExperimentError::Threads(format!(
                "expected a positive integer, got `{v}`"
            ))),
        },
    }
}

/// Runs `f` on a pool capped by `FAIRDIV_THREADS`, or on the global pool.
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T, ExperimentError> {
    match thread_cap()? {
        None => Ok(f()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| ExperimentError::Threads(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs all trials in parallel and collects rows in trial order.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<Vec<TrialOutput>, ExperimentError> {
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, t).map_err(|source| ExperimentError::Trial { trial: t, source }))
        .collect()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_side_log(path: &Path, log: &SideLog) -> Result<(), ExperimentError> {
    let file = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let res = match log {
        SideLog::Steps(records) => write_step_log(records, file),
        SideLog::Comparisons(data) => write_comparisons(data, file),
        SideLog::Truth(v) => v.write_csv(file),
    };
    res.map_err(|source| ExperimentError::Trial { trial: 0, source })
}

/// Executes the configured subcommand and returns its report. The side
/// log, if configured, is written here; the report itself is left to the
/// caller.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport, ExperimentError> {
    let rows = match cfg.subcommand {
        Subcommand::VerifyAll => with_thread_cap(|| acceptance::verify_all_rows(cfg.seed))??,
        _ => {
            let outputs = with_thread_cap(|| run_trials(cfg))??;
            if let (Some(path), Some(log)) =
                (&cfg.log, outputs.first().and_then(|o| o.log.as_ref()))
            {
                write_side_log(path, log)?;
            }
            outputs.into_iter().map(|o| o.row).collect()
        }
    };
    Ok(RunReport::new(
        cfg.clone(),
        extra_columns(cfg.subcommand),
        rows,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(sub: Subcommand, n: usize, m: usize) -> ExperimentConfig {
        ExperimentConfig::with_size(sub, 11, n, m)
    }

    #[test]
    fn rr_at_zero_eps_meets_bound() {
        let c = ExperimentConfig {
            eps: 0.0,
            ..cfg(Subcommand::Rr, 3, 10)
        };
        let report = run_experiment(&c).unwrap();
        let row = &report.rows[0];
        assert!(row.bound_satisfied);
        assert!(row.max_envy_true <= 1.0);
        assert_eq!(row.bound_value, 1.0);
        assert!(report.passed());
    }

    #[test]
    fn every_per_trial_subcommand_runs() {
        for sub in Subcommand::ALL {
            if sub == Subcommand::VerifyAll {
                continue;
            }
            let c = ExperimentConfig {
                trials: 3,
                ..cfg(sub, 3, 12)
            };
            let report = run_experiment(&c).unwrap_or_else(|e| panic!("{sub}: {e}"));
            assert_eq!(report.rows.len(), 3, "{sub}");
            assert!(
                report.passed(),
                "{sub}: {:?}",
                report.violations().collect::<Vec<_>>()
            );
            for (t, r) in report.rows.iter().enumerate() {
                assert_eq!(r.trial, t);
                assert_eq!(r.extras.len(), report.extra_columns.len(), "{sub}");
            }
        }
    }

    #[test]
    fn trials_are_independent_of_scheduling() {
        let c = ExperimentConfig {
            trials: 6,
            ..cfg(Subcommand::Lp, 3, 9)
        };
        let all = run_experiment(&c).unwrap();
        for t in [0, 4] {
            let alone = run_trial(&c, t).unwrap().row;
            assert_eq!(alone, all.rows[t]);
        }
    }

    #[test]
    fn lowerbound_rows_meet_target() {
        let c = ExperimentConfig {
            trials: 5,
            eps: 0.25,
            ..cfg(Subcommand::RrLowerbound, 3, 10)
        };
        let report = run_experiment(&c).unwrap();
        for r in &report.rows {
            assert!(r.extras[0] >= r.bound_value - EXACT_TOL);
        }
    }

    #[test]
    fn pipeline_errors_carry_trial_id() {
        let c = ExperimentConfig {
            eps: 0.0,
            ..cfg(Subcommand::RrLowerbound, 3, 10)
        };
        let err = run_experiment(&c).unwrap_err();
        assert!(err.to_string().starts_with("trial 0:"), "{err}");
    }

    #[test]
    fn side_log_written_for_trial_zero() {
        let dir = std::env::temp_dir().join(format!("fairdiv-log-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("steps.csv");
        let c = ExperimentConfig {
            trials: 2,
            log: Some(path.clone()),
            ..cfg(Subcommand::Balance, 2, 15)
        };
        run_experiment(&c).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,node_id,sign,dot_product,c_t,fail_flag,w_inf_norm\n"));
        assert_eq!(text.lines().count(), 16);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
