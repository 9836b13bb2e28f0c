//! Learning with annotation byproducts at desk scale.
//!
//! A classifier is trained jointly with a point-regression head supervised by
//! simulated annotator clicks, on synthetic scenes whose background is
//! spuriously correlated with the class. Evaluation measures how much the
//! classifier leans on the background (or on co-occurring objects).

pub mod error;
pub mod eval;
pub mod experiment;
pub mod gradcheck;
pub mod loss;
pub mod net;
pub mod pool;
pub mod scene;
pub mod train;

pub use error::LuabError;
pub use eval::{evaluate_robustness, v_metrics, RobustnessReport};
pub use experiment::{run_arm, Arm, ArmResult, Datasets, ExperimentConfig};
pub use loss::{luab_loss, smooth_l1, Label, LossParts, RegressionLoss};
pub use net::{ArchSpec, ConvSpec, HeadInput, Network};
pub use pool::{attentive_pool_forward, Pooling};
pub use scene::{generate_dataset, generate_scene, LabelMode, SceneConfig, SceneLayout, SceneSample};
pub use train::{train, EpochStats, Supervision, TrainConfig, Trained};
