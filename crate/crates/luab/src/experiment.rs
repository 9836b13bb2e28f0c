//! Train-and-evaluate runs for the comparison arms.

use abkit_core::exec::Exec;
use abkit_core::rng::derive_seed;
use serde::{Deserialize, Serialize};

use crate::error::LuabError;
use crate::eval::{evaluate_robustness, RobustnessReport};
use crate::net::{ArchSpec, ConvSpec, HeadInput};
use crate::pool::Pooling;
use crate::scene::{generate_dataset, LabelMode, SceneConfig, SceneSample};
use crate::train::{train, EpochStats, Supervision, TrainConfig, Trained};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// Byproduct point supervision.
    Luab,
    /// Uniform random points in place of byproducts.
    Rand,
    /// Classification only.
    Baseline,
    /// Byproduct supervision plus point-guided pooling during training.
    Attpool,
}

impl Arm {
    pub fn name(self) -> &'static str {
        match self {
            Arm::Luab => "luab",
            Arm::Rand => "rand",
            Arm::Baseline => "baseline",
            Arm::Attpool => "attpool",
        }
    }
}

impl std::str::FromStr for Arm {
    type Err = LuabError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "luab" => Ok(Arm::Luab),
            "rand" => Ok(Arm::Rand),
            "baseline" => Ok(Arm::Baseline),
            "attpool" => Ok(Arm::Attpool),
            other => Err(LuabError::InvalidConfig(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scene: SceneConfig,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub convs: Vec<ConvSpec>,
    pub head_input: HeadInput,
    pub coord_channels: bool,
    pub attention_bandwidth: f64,
    /// Shared by all arms; the arm overrides supervision (and lambda for the
    /// baseline).
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scene: SceneConfig::default(),
            train_size: 20_000,
            val_size: 1_000,
            test_size: 2_000,
            convs: ArchSpec::desk(8, LabelMode::Single).convs,
            head_input: HeadInput::Pooled,
            coord_channels: true,
            attention_bandwidth: 0.15,
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn arch(&self, arm: Arm) -> ArchSpec {
        ArchSpec {
            image_size: self.scene.image_size,
            in_channels: 3,
            convs: self.convs.clone(),
            classes: self.scene.classes,
            label_mode: self.scene.label_mode,
            pooling: match arm {
                Arm::Attpool => Pooling::Attentive { bandwidth: self.attention_bandwidth },
                _ => Pooling::GlobalAverage,
            },
            head_input: self.head_input,
            coord_channels: self.coord_channels,
        }
    }

    pub fn train_config(&self, arm: Arm, seed: u64) -> TrainConfig {
        let mut cfg = TrainConfig { seed, ..self.train.clone() };
        match arm {
            Arm::Luab | Arm::Attpool => cfg.supervision = Supervision::Byproduct,
            Arm::Rand => cfg.supervision = Supervision::RandomPoint,
            Arm::Baseline => {
                cfg.supervision = Supervision::None;
                cfg.lambda = 0.0;
            }
        }
        cfg
    }
}

/// Train, validation and both test splits for one seed.
#[derive(Debug, Clone)]
pub struct Datasets {
    pub train: Vec<SceneSample>,
    pub val: Vec<SceneSample>,
    pub test_corr: Vec<SceneSample>,
    pub test_decorr: Vec<SceneSample>,
}

impl Datasets {
    /// The correlated test split uses the strongest pairing (`rho = 1`, same
    /// co-occurrence as training); the de-correlated one makes background
    /// and partner classes independent of the class.
    pub fn generate(cfg: &ExperimentConfig, seed: u64, exec: Exec) -> Result<Datasets, LuabError> {
        let s = &cfg.scene;
        let corr = match s.label_mode {
            LabelMode::Single => s.with_rho(1.0),
            LabelMode::Multi => s.clone(),
        };
        Ok(Datasets {
            train: generate_dataset(s, cfg.train_size, derive_seed(seed, "train"), exec)?,
            val: generate_dataset(s, cfg.val_size, derive_seed(seed, "val"), exec)?,
            test_corr: generate_dataset(&corr, cfg.test_size, derive_seed(seed, "test-corr"), exec)?,
            test_decorr: generate_dataset(&s.decorrelated(), cfg.test_size, derive_seed(seed, "test-decorr"), exec)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub arm: Arm,
    pub seed: u64,
    pub report: RobustnessReport,
    pub curves: Vec<EpochStats>,
}

/// Trains one arm on prepared data and evaluates it.
pub fn run_arm_on(
    cfg: &ExperimentConfig,
    data: &Datasets,
    arm: Arm,
    seed: u64,
    exec: Exec,
) -> Result<(ArmResult, Trained), LuabError> {
    let trained = train(&cfg.arch(arm), &data.train, &data.val, &cfg.train_config(arm, seed), exec)?;
    let report = evaluate_robustness(&trained.network, &data.test_corr, &data.test_decorr, exec)?;
    Ok((ArmResult { arm, seed, report, curves: trained.curves.clone() }, trained))
}

/// Generates the data for `seed`, then trains and evaluates one arm.
pub fn run_arm(cfg: &ExperimentConfig, arm: Arm, seed: u64, exec: Exec) -> Result<ArmResult, LuabError> {
    let data = Datasets::generate(cfg, seed, exec)?;
    Ok(run_arm_on(cfg, &data, arm, seed, exec)?.0)
}
