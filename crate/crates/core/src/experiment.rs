//! Desk-scale CORAL ablation: the same S→H_S run with and without the
//! CORAL term, over several seeds.
//!
//! Steps: generate a labeled SDR source set and a labeled simulated-HDR
//! target set from disjoint references; hold out one cross-validation fold
//! of the target; train both arms per seed; report the final inter-domain
//! covariance distance and held-out SROCC/PLCC. Each seed also checks that
//! a `β = 0, λ = 0` run matches a source-only run bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::display::Domain;
use crate::eval::{predict, report_scores, split_folds, EvalConfig, Split, Subset};
use crate::nn::ModelConfig;
use crate::rng::derive_seed;
use crate::synth::{build_manifest, BuildOptions, DistortionType};
use crate::train::data::prepare;
use crate::train::{init_params, train_prepared, DaMode, TrainConfig};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub runs: usize,
    pub source_refs: usize,
    pub target_refs: usize,
    pub size: (usize, usize),
    pub dtypes: Vec<DistortionType>,
    pub levels: u32,
    /// Template for both arms; `da_mode`, `beta`, `lambda_auto` and `seed` are
    /// set per arm. The CORAL arm uses `train.lambda`, which must be positive.
    pub train: TrainConfig,
    pub eval_patches: usize,
    pub folds: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            runs: 3,
            source_refs: 24,
            target_refs: 25,
            size: (64, 64),
            dtypes: DistortionType::ALL.to_vec(),
            levels: 5,
            train: TrainConfig {
                epochs: 30,
                batch_images: 8,
                patches_per_image: 16,
                eval_patches_per_image: 64,
                lr_initial: 3e-3,
                lr_final: 1e-4,
                lambda: 0.01,
                lambda_auto: false,
                model: ModelConfig::preset("desk").expect("built-in preset"),
                ..TrainConfig::default()
            },
            eval_patches: 256,
            folds: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    /// CORAL off (`λ = 0`).
    NoCoral,
    /// CORAL on with the template's fixed `λ`.
    Coral,
}

impl Arm {
    pub fn name(self) -> &'static str {
        match self {
            Arm::NoCoral => "lambda=0",
            Arm::Coral => "lambda>0",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmResult {
    pub arm: Arm,
    pub run: usize,
    pub seed: u64,
    pub final_lambda: f64,
    pub cov_distance: f64,
    pub srocc: f64,
    pub plcc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub results: Vec<ArmResult>,
    /// Per run: `β = 0, λ = 0` parameters equal the source-only parameters bitwise.
    pub source_only_equivalent: Vec<bool>,
    pub test_records: usize,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

impl ExperimentReport {
    fn arm_values(&self, arm: Arm, f: impl Fn(&ArmResult) -> f64) -> Vec<f64> {
        self.results.iter().filter(|r| r.arm == arm).map(f).collect()
    }

    pub fn median_cov_distance(&self, arm: Arm) -> f64 {
        median(self.arm_values(arm, |r| r.cov_distance))
    }

    pub fn median_srocc(&self, arm: Arm) -> f64 {
        median(self.arm_values(arm, |r| r.srocc))
    }

    pub fn median_plcc(&self, arm: Arm) -> f64 {
        median(self.arm_values(arm, |r| r.plcc))
    }

    /// Distance ratio `λ>0 / λ=0` of the medians.
    pub fn distance_ratio(&self) -> f64 {
        self.median_cov_distance(Arm::Coral) / self.median_cov_distance(Arm::NoCoral)
    }

    /// Comparison table as CSV: one row per run and arm, then the medians.
    pub fn to_table(&self) -> String {
        let mut out = String::from("arm,run,seed,final_lambda,cov_distance,srocc,plcc\n");
        for r in &self.results {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.arm.name(),
                r.run,
                r.seed,
                r.final_lambda,
                r.cov_distance,
                r.srocc,
                r.plcc
            );
        }
        for arm in [Arm::NoCoral, Arm::Coral] {
            let _ = writeln!(
                out,
                "{},median,,,{},{},{}",
                arm.name(),
                self.median_cov_distance(arm),
                self.median_srocc(arm),
                self.median_plcc(arm)
            );
        }
        let eq: Vec<&str> = self
            .source_only_equivalent
            .iter()
            .map(|&b| if b { "identical" } else { "different" })
            .collect();
        let _ = writeln!(out, "# beta=0 lambda=0 vs source-only: {}", eq.join(" "));
        let _ = writeln!(out, "# held-out target records: {}", self.test_records);
        out
    }
}

fn params_bits_equal(a: &crate::QualityNetParams, b: &crate::QualityNetParams) -> bool {
    let (ta, tb) = (a.tensors(), b.tensors());
    ta.len() == tb.len()
        && ta.iter().zip(&tb).all(|((na, va), (nb, vb))| {
            na == nb && va.len() == vb.len() && va.iter().zip(*vb).all(|(x, y)| x.to_bits() == y.to_bits())
        })
}

/// Runs the ablation, writing generated data under `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentReport> {
    if config.runs == 0 {
        return Err(Error::Config("experiment needs at least one run".into()));
    }
    if config.train.lambda.is_nan() || config.train.lambda <= 0.0 {
        return Err(Error::Config("experiment needs lambda > 0 for the CORAL arm".into()));
    }
    let mut source_opts = BuildOptions::new(config.source_refs, Domain::Sdr, derive_seed(config.seed, &[1]));
    source_opts.size = config.size;
    source_opts.dtypes = config.dtypes.clone();
    source_opts.levels = config.levels;
    let mut target_opts = BuildOptions::new(config.target_refs, Domain::Hdr, derive_seed(config.seed, &[2]));
    target_opts.size = config.size;
    target_opts.dtypes = config.dtypes.clone();
    target_opts.levels = config.levels;

    let source = build_manifest(&source_opts, &out_dir.join("source"))?.manifest;
    let target = build_manifest(&target_opts, &out_dir.join("target"))?.manifest;
    let fold = &split_folds(&target, config.folds, (0.6, 0.2, 0.2), config.seed, None)?[0];
    let target_train = fold.subset(&target, Split::Train);
    let target_test = fold.subset(&target, Split::Test);

    let pre = config.train.preprocess();
    let source_pairs = prepare(&source, &pre)?;
    let target_pairs = prepare(&target_train, &pre)?;
    let test_labels: Vec<f64> = target_test
        .records
        .iter()
        .map(|r| r.label.ok_or_else(|| Error::Data("held-out record without label".into())))
        .collect::<Result<_>>()?;
    let test_domains: Vec<Domain> = target_test.records.iter().map(|r| r.domain).collect();

    let mut results = Vec::new();
    let mut equivalent = Vec::new();
    for run in 0..config.runs {
        let seed = derive_seed(config.seed, &[3, run as u64]);
        let base = TrainConfig {
            seed,
            da_mode: DaMode::SToHs,
            beta: 1.0,
            ..config.train.clone()
        };
        for arm in [Arm::NoCoral, Arm::Coral] {
            let cfg = match arm {
                Arm::NoCoral => TrainConfig {
                    lambda: 0.0,
                    lambda_auto: false,
                    ..base.clone()
                },
                Arm::Coral => TrainConfig {
                    lambda_auto: false,
                    ..base.clone()
                },
            };
            let outcome = train_prepared(&cfg, &source_pairs, &target_pairs, init_params(&cfg)?)?;
            let eval_cfg = EvalConfig {
                patches_per_image: config.eval_patches,
                preprocess: pre,
                seed,
            };
            let pred = predict(&outcome.params, &target_test, &eval_cfg)?;
            let report = report_scores(&pred, &test_labels, &test_domains, Some(0))?;
            let full = report
                .iter()
                .find(|r| r.subset == Subset::Full)
                .expect("full subset is always reported");
            let last = outcome.history.last().expect("at least one epoch");
            log::info!(
                "run {run} {}: distance {:.4e}, SROCC {:.4}",
                arm.name(),
                last.cov_distance,
                full.srocc
            );
            results.push(ArmResult {
                arm,
                run,
                seed,
                final_lambda: last.lambda,
                cov_distance: last.cov_distance,
                srocc: full.srocc,
                plcc: full.plcc,
            });
        }

        let silent = TrainConfig {
            beta: 0.0,
            lambda: 0.0,
            lambda_auto: false,
            ..base.clone()
        };
        let with_target = train_prepared(&silent, &source_pairs, &target_pairs, init_params(&silent)?)?;
        let source_only = TrainConfig {
            da_mode: DaMode::None,
            ..silent.clone()
        };
        let alone = train_prepared(&source_only, &source_pairs, &[], init_params(&source_only)?)?;
        equivalent.push(params_bits_equal(&with_target.params, &alone.params));
    }
    Ok(ExperimentReport {
        results,
        source_only_equivalent: equivalent,
        test_records: target_test.len(),
    })
}
