//! The replication engine: one experiment = many seeded replications,
//! each splitting its data, fitting propensity models on the training
//! rows, building weights per scheme, and scoring balance and effects.
//!
//! Replication r derives all of its randomness from
//! `mix_seed(base_seed, r)`; the replication loop itself is a pure
//! order-preserving map, so reports are identical whether it runs on
//! the thread pool or sequentially.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::balance::{arm_ecdfs, evaluate_balance, FeatureBalance};
use crate::data::{DatasetBundle, PropensityFit, Scheme, Standardizer, WeightVector};
use crate::effects::{
    estimate_weighted_mean_diff, estimate_weighted_regression, EffectEstimate, EstimatorKind,
    OutcomeConfig,
};
use crate::error::{Error, Result};
use crate::harness::config::{
    DatasetSpec, EvalSplit, ExperimentConfig, ReplicationMode, SCHEMA_VERSION,
};
use crate::ingest::{load_ihdp, load_jobs};
use crate::outcome::{KernelRidgeConfig, RidgeConfig};
use crate::par::Execution;
use crate::propensity::{fit_cbps, fit_logistic, predict_propensity, CbpsConfig, LogisticConfig};
use crate::rng::{mix_seed, stream_rng, uniform_open, STREAM_SPLIT};
use crate::synth::{
    bias_preset, generate_linear, generate_nonlinear, generate_roles, nonlinear_preset,
    RoleGenConfig,
};
use crate::weights::{cv_of_weights, weights_for_scheme};

/// The label used for baseline (all-ones) diagnostics rows.
pub const UNWEIGHTED_LABEL: &str = "unweighted";

/// Everything measured for one scheme within one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeResult {
    pub scheme: Scheme,
    pub estimator: EstimatorKind,
    pub ate_hat: f64,
    pub epsilon_ate: Option<f64>,
    pub pehe: Option<f64>,
    /// Coefficient of variation of the balance-split weights.
    pub weight_cv: f64,
    /// Per-feature diagnostics on the balance split.
    pub balance: Vec<FeatureBalance>,
}

/// One replication's complete log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub schemes: Vec<SchemeResult>,
    /// Unit-weight diagnostics on the balance split.
    pub unweighted_balance: Vec<FeatureBalance>,
}

/// Across-replication summary for one scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeAggregate {
    pub scheme: Scheme,
    pub estimator: EstimatorKind,
    pub ate_mean: f64,
    pub ate_std: f64,
    pub epsilon_ate_mean: Option<f64>,
    pub epsilon_ate_std: Option<f64>,
    pub pehe_mean: Option<f64>,
    pub pehe_std: Option<f64>,
    pub weight_cv_mean: f64,
    pub weight_cv_std: f64,
}

/// Across-replication balance summary for one (scheme, feature) cell;
/// the interval is the percentile band of the per-replication values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceAggregate {
    /// Scheme name, or the baseline label for unit weights.
    pub scheme: String,
    pub feature: String,
    pub smd_mean: f64,
    pub smd_lower: f64,
    pub smd_upper: f64,
    pub ks_mean: f64,
    pub ks_lower: f64,
    pub ks_upper: f64,
}

/// Build and version facts pinned into every report. No timestamps:
/// rerunning a config must reproduce the bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub schema_version: u32,
    pub config_sha256: String,
    pub crate_version: String,
    pub base_seed: u64,
    pub dataset: String,
    pub replications: usize,
    /// The full effective configuration, one canonical line per entry.
    pub config: Vec<String>,
}

/// The experiment report: provenance, the per-replication logs, and
/// aggregates recomputable from those logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub provenance: Provenance,
    pub aggregates: Vec<SchemeAggregate>,
    pub balance: Vec<BalanceAggregate>,
    pub replications: Vec<ReplicationRecord>,
}

/// One point of a first-replication distribution trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcdfRow {
    pub feature: String,
    pub scheme: String,
    /// "treated" or "control".
    pub group: String,
    pub value: f64,
    pub cumulative: f64,
}

/// A report plus the bulky first-replication traces kept out of the
/// JSON and emitted as their own CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub report: RunReport,
    pub ecdf: Vec<EcdfRow>,
}

/// Base data resolved once before the replication loop.
enum Source {
    /// Synthetic data regenerated per replication from its own seed.
    Generate,
    /// One shared table, re-split per replication.
    Shared(Box<DatasetBundle>),
    /// Pre-loaded per-replication tables (benchmark realizations).
    PerReplication(Vec<DatasetBundle>),
}

/// Builds the synthetic dataset a config describes, from one seed.
pub fn synthesize(config: &ExperimentConfig, seed: u64) -> Result<DatasetBundle> {
    match &config.dataset {
        DatasetSpec::Linear { preset } => {
            let mut g = bias_preset(preset, seed)?;
            g.n = config.n;
            generate_linear(&g)
        }
        DatasetSpec::Nonlinear { preset } => {
            let mut g = nonlinear_preset(preset, seed)?;
            g.n = config.n;
            generate_nonlinear(&g)
        }
        DatasetSpec::Roles => generate_roles(&RoleGenConfig {
            n: config.n,
            n_instrumental: config.roles.instrumental,
            n_confounding: config.roles.confounding,
            n_adjustment: config.roles.adjustment,
            instrumental_scale: config.roles.instrumental_scale,
            confounding_scale: config.roles.confounding_scale,
            adjustment_scale: config.roles.adjustment_scale,
            seed,
            ..RoleGenConfig::default()
        }),
        DatasetSpec::Ihdp | DatasetSpec::Jobs => unreachable!("real data is preloaded"),
    }
}

fn prepare_source(config: &ExperimentConfig) -> Result<Source> {
    match &config.dataset {
        DatasetSpec::Ihdp => {
            let path = config.data_path.as_ref().expect("validated");
            let mut realizations = Vec::with_capacity(config.replications);
            for r in 0..config.replications {
                realizations.push(load_ihdp(path, r + 1, false)?.bundle);
            }
            Ok(Source::PerReplication(realizations))
        }
        DatasetSpec::Jobs => {
            let path = config.data_path.as_ref().expect("validated");
            Ok(Source::Shared(Box::new(load_jobs(path, false)?.bundle)))
        }
        _ => match config.replication_mode {
            ReplicationMode::Regenerate => Ok(Source::Generate),
            ReplicationMode::Resplit => Ok(Source::Shared(Box::new(synthesize(
                config,
                config.base_seed,
            )?))),
        },
    }
}

/// Deterministic train/test partition: Fisher-Yates on the replication
/// seed's split stream, then ascending order within each side.
fn split_indices(n: usize, ratio: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = stream_rng(seed, STREAM_SPLIT);
    for i in (1..n).rev() {
        // uniform_open never returns 1.0, so j <= i.
        let j = (uniform_open(&mut rng) * (i + 1) as f64) as usize;
        order.swap(i, j);
    }
    let mut n_train = (n as f64 * ratio).round() as usize;
    n_train = n_train.clamp(1, n - 1);
    let mut train: Vec<usize> = order[..n_train].to_vec();
    let mut test: Vec<usize> = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Probabilities re-evaluated on other rows, wrapped as a fit so the
/// scheme-to-weights mapping applies unchanged.
fn fit_on_rows(fit: &PropensityFit, covariates: &DMatrix<f64>) -> Result<PropensityFit> {
    Ok(PropensityFit {
        coefficients: fit.coefficients.clone(),
        probabilities: predict_propensity(fit, covariates)?,
        estimator: fit.estimator,
        probability_floor: fit.probability_floor,
    })
}

struct ReplicationOutput {
    record: ReplicationRecord,
    ecdf: Vec<EcdfRow>,
}

fn run_replication(
    config: &ExperimentConfig,
    source: &Source,
    r: usize,
    want_ecdf: bool,
) -> Result<ReplicationOutput> {
    let seed = mix_seed(config.base_seed, r as u64);
    let bundle = match source {
        Source::Generate => synthesize(config, seed)?,
        Source::Shared(b) => (**b).clone(),
        Source::PerReplication(list) => list
            .get(r)
            .cloned()
            .ok_or_else(|| Error::MissingRealization(format!("replication {r}")))?,
    };
    let mut bundle = bundle.validate()?;

    let n = bundle.n_samples();
    let (train, test) = split_indices(n, config.split_ratio, seed);
    if config.standardize {
        let plan = Standardizer::fit(&bundle.covariates, &train)?;
        bundle.covariates = plan.transform(&bundle.covariates)?;
    }
    let train_bundle = bundle.subset(&train)?.validate()?;

    let logistic_config = LogisticConfig {
        probability_floor: config.probability_floor,
        ..LogisticConfig::default()
    };
    let logistic = fit_logistic(
        &train_bundle.covariates,
        &train_bundle.treatment,
        &logistic_config,
    )?;
    let cbps = if config.schemes.contains(&Scheme::Cbps) {
        Some(fit_cbps(
            &train_bundle.covariates,
            &train_bundle.treatment,
            &CbpsConfig::default(),
        )?)
    } else {
        None
    };

    let rows_for = |split: EvalSplit| -> Vec<usize> {
        match split {
            EvalSplit::Train => train.clone(),
            EvalSplit::Test => test.clone(),
            EvalSplit::Full => (0..n).collect(),
        }
    };

    // The balance split and its fits; train reuses the training fits.
    let balance_rows = rows_for(config.balance_eval);
    let balance_bundle = bundle.subset(&balance_rows)?;
    let balance_logistic = if config.balance_eval == EvalSplit::Train {
        logistic.clone()
    } else {
        fit_on_rows(&logistic, &balance_bundle.covariates)?
    };
    let balance_cbps = match (&cbps, config.balance_eval) {
        (Some(f), EvalSplit::Train) => Some(f.clone()),
        (Some(f), _) => Some(fit_on_rows(f, &balance_bundle.covariates)?),
        (None, _) => None,
    };

    let effect_rows = rows_for(config.effect_eval);
    let effect_bundle = bundle.subset(&effect_rows)?;
    let effect_logistic = if config.effect_eval == EvalSplit::Train {
        logistic.clone()
    } else {
        fit_on_rows(&logistic, &effect_bundle.covariates)?
    };
    let effect_cbps = match (&cbps, config.effect_eval) {
        (Some(f), EvalSplit::Train) => Some(f.clone()),
        (Some(f), _) => Some(fit_on_rows(f, &effect_bundle.covariates)?),
        (None, _) => None,
    };

    let outcome_config = OutcomeConfig {
        ridge: RidgeConfig {
            lambda: config.ridge_lambda,
        },
        kernel: KernelRidgeConfig {
            lambda: config.kernel_lambda,
            gamma: config.kernel_gamma,
            median_heuristic: config.kernel_median_heuristic,
        },
    };

    let mut results = Vec::with_capacity(config.schemes.len());
    let mut ecdf = Vec::new();
    for &scheme in &config.schemes {
        let tag = |e: Error| e.in_replication(r, Some(scheme.as_str()));

        let balance_weights = weights_for_scheme(
            scheme,
            &balance_logistic,
            balance_cbps.as_ref(),
            &balance_bundle.treatment,
        )
        .map_err(tag)?;
        let weight_cv = cv_of_weights(&balance_weights).map_err(tag)?;
        let balance = evaluate_balance(
            &balance_bundle.covariates,
            &balance_bundle.treatment,
            &balance_weights,
            &balance_bundle.feature_names,
        )
        .map_err(tag)?;

        let effect_weights = weights_for_scheme(
            scheme,
            &effect_logistic,
            effect_cbps.as_ref(),
            &effect_bundle.treatment,
        )
        .map_err(tag)?;
        let estimator = config.estimator_for(scheme);
        let mut effect: EffectEstimate = match estimator {
            EstimatorKind::WeightedRegression => estimate_weighted_regression(
                &effect_bundle,
                &effect_weights,
                &outcome_config,
                config.linearity,
            )
            .map_err(tag)?,
            EstimatorKind::WeightedMeanDiff => {
                estimate_weighted_mean_diff(&effect_bundle, &effect_weights).map_err(tag)?
            }
        };
        // External ground-truth constant for data without counterfactuals.
        if effect.epsilon_ate.is_none() {
            if let Some(truth) = config.jobs_true_ate {
                if matches!(config.dataset, DatasetSpec::Jobs) {
                    effect.epsilon_ate = Some((truth - effect.ate_hat).abs());
                }
            }
        }

        if want_ecdf {
            for (j, feature) in balance_bundle.feature_names.iter().enumerate() {
                let (treated, control) = arm_ecdfs(
                    &balance_bundle.covariates,
                    &balance_bundle.treatment,
                    &balance_weights,
                    j,
                )
                .map_err(tag)?;
                for (value, cumulative) in treated.points {
                    ecdf.push(EcdfRow {
                        feature: feature.clone(),
                        scheme: scheme.to_string(),
                        group: "treated".into(),
                        value,
                        cumulative,
                    });
                }
                for (value, cumulative) in control.points {
                    ecdf.push(EcdfRow {
                        feature: feature.clone(),
                        scheme: scheme.to_string(),
                        group: "control".into(),
                        value,
                        cumulative,
                    });
                }
            }
        }

        results.push(SchemeResult {
            scheme,
            estimator,
            ate_hat: effect.ate_hat,
            epsilon_ate: effect.epsilon_ate,
            pehe: effect.pehe,
            weight_cv,
            balance,
        });
    }

    let unit = WeightVector::new(vec![1.0; balance_bundle.n_samples()], Scheme::Unit);
    let unweighted_balance = evaluate_balance(
        &balance_bundle.covariates,
        &balance_bundle.treatment,
        &unit,
        &balance_bundle.feature_names,
    )
    .map_err(|e| e.in_replication(r, None))?;
    if want_ecdf {
        for (j, feature) in balance_bundle.feature_names.iter().enumerate() {
            let (treated, control) = arm_ecdfs(
                &balance_bundle.covariates,
                &balance_bundle.treatment,
                &unit,
                j,
            )
            .map_err(|e| e.in_replication(r, None))?;
            for (value, cumulative) in treated.points {
                ecdf.push(EcdfRow {
                    feature: feature.clone(),
                    scheme: UNWEIGHTED_LABEL.into(),
                    group: "treated".into(),
                    value,
                    cumulative,
                });
            }
            for (value, cumulative) in control.points {
                ecdf.push(EcdfRow {
                    feature: feature.clone(),
                    scheme: UNWEIGHTED_LABEL.into(),
                    group: "control".into(),
                    value,
                    cumulative,
                });
            }
        }
    }

    Ok(ReplicationOutput {
        record: ReplicationRecord {
            replication: r,
            n_train: train.len(),
            n_test: test.len(),
            schemes: results,
            unweighted_balance,
        },
        ecdf,
    })
}

/// Population mean and standard deviation; a single value has spread 0.
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aggregates an optional metric: present only when every replication
/// produced it.
pub(crate) fn mean_std_optional(values: &[Option<f64>]) -> (Option<f64>, Option<f64>) {
    let collected: Option<Vec<f64>> = values.iter().copied().collect();
    match collected {
        Some(v) if !v.is_empty() => {
            let (m, s) = mean_std(&v);
            (Some(m), Some(s))
        }
        _ => (None, None),
    }
}

/// Percentile interval of per-replication values; collapses to the
/// point for a single replication.
fn interval(values: &[f64]) -> Result<(f64, f64, f64)> {
    if values.len() < 2 {
        return Ok((values[0], values[0], values[0]));
    }
    crate::balance::replication_ci(values, 0.95)
}

pub(crate) fn aggregate_schemes(
    config: &ExperimentConfig,
    records: &[ReplicationRecord],
) -> Result<Vec<SchemeAggregate>> {
    let mut out = Vec::with_capacity(config.schemes.len());
    for (idx, &scheme) in config.schemes.iter().enumerate() {
        let per_rep: Vec<&SchemeResult> = records.iter().map(|rec| &rec.schemes[idx]).collect();
        let ate: Vec<f64> = per_rep.iter().map(|s| s.ate_hat).collect();
        let cv: Vec<f64> = per_rep.iter().map(|s| s.weight_cv).collect();
        let eps: Vec<Option<f64>> = per_rep.iter().map(|s| s.epsilon_ate).collect();
        let pehe: Vec<Option<f64>> = per_rep.iter().map(|s| s.pehe).collect();
        let (ate_mean, ate_std) = mean_std(&ate);
        let (cv_mean, cv_std) = mean_std(&cv);
        let (eps_mean, eps_std) = mean_std_optional(&eps);
        let (pehe_mean, pehe_std) = mean_std_optional(&pehe);
        out.push(SchemeAggregate {
            scheme,
            estimator: config.estimator_for(scheme),
            ate_mean,
            ate_std,
            epsilon_ate_mean: eps_mean,
            epsilon_ate_std: eps_std,
            pehe_mean,
            pehe_std,
            weight_cv_mean: cv_mean,
            weight_cv_std: cv_std,
        });
    }
    Ok(out)
}

pub(crate) fn aggregate_balance(
    config: &ExperimentConfig,
    records: &[ReplicationRecord],
) -> Result<Vec<BalanceAggregate>> {
    let features: Vec<String> = records[0]
        .unweighted_balance
        .iter()
        .map(|b| b.feature.clone())
        .collect();
    let mut out = Vec::new();
    let mut push_rows = |scheme_label: String, cells: Vec<Vec<(f64, f64)>>| -> Result<()> {
        // cells[j] holds per-replication (smd, ks) for feature j.
        for (j, feature) in features.iter().enumerate() {
            let smd: Vec<f64> = cells[j].iter().map(|c| c.0).collect();
            let ks: Vec<f64> = cells[j].iter().map(|c| c.1).collect();
            let (smd_lower, smd_mean, smd_upper) = interval(&smd)?;
            let (ks_lower, ks_mean, ks_upper) = interval(&ks)?;
            out.push(BalanceAggregate {
                scheme: scheme_label.clone(),
                feature: feature.clone(),
                smd_mean,
                smd_lower,
                smd_upper,
                ks_mean,
                ks_lower,
                ks_upper,
            });
        }
        Ok(())
    };

    for (idx, &scheme) in config.schemes.iter().enumerate() {
        let cells: Vec<Vec<(f64, f64)>> = (0..features.len())
            .map(|j| {
                records
                    .iter()
                    .map(|rec| {
                        let b = &rec.schemes[idx].balance[j];
                        (b.smd, b.ks)
                    })
                    .collect()
            })
            .collect();
        push_rows(scheme.to_string(), cells)?;
    }
    let cells: Vec<Vec<(f64, f64)>> = (0..features.len())
        .map(|j| {
            records
                .iter()
                .map(|rec| {
                    let b = &rec.unweighted_balance[j];
                    (b.smd, b.ks)
                })
                .collect()
        })
        .collect();
    push_rows(UNWEIGHTED_LABEL.to_string(), cells)?;
    Ok(out)
}

/// Runs the full experiment. The execution mode changes scheduling
/// only; outputs are bit-identical either way.
pub fn run_experiment(config: &ExperimentConfig, execution: Execution) -> Result<ExperimentOutput> {
    config.validate()?;
    let source = prepare_source(config)?;

    let outputs: Vec<Result<ReplicationOutput>> = execution.map_indexed(config.replications, |r| {
        run_replication(config, &source, r, r == 0)
    });
    let mut records = Vec::with_capacity(outputs.len());
    let mut ecdf = Vec::new();
    for output in outputs {
        let output = output?;
        if output.record.replication == 0 {
            ecdf = output.ecdf;
        }
        records.push(output.record);
    }

    let aggregates = aggregate_schemes(config, &records)?;
    let balance = aggregate_balance(config, &records)?;
    let provenance = Provenance {
        schema_version: SCHEMA_VERSION,
        config_sha256: config.sha256(),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        base_seed: config.base_seed,
        dataset: config.dataset.canonical(),
        replications: config.replications,
        config: config
            .canonical_string()
            .lines()
            .map(|l| l.to_string())
            .collect(),
    };
    let report = RunReport {
        provenance,
        aggregates,
        balance,
        replications: records,
    };
    // Self-check: the stored aggregates must be recomputable from the
    // logs before the report ever leaves this function.
    crate::harness::report::audit_report(&report)?;
    Ok(ExperimentOutput { report, ecdf })
}
