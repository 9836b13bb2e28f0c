//! Central finite-difference check of the analytic gradient of the full
//! objective with respect to every network parameter.

use abkit_core::rng::stream_rng;
use abkit_core::ProxyPoint;
use rand::Rng;

use crate::error::LuabError;
use crate::loss::{luab_loss, Label, RegressionLoss};
use crate::net::{ArchSpec, ConvSpec, HeadInput, Network};
use crate::pool::Pooling;
use crate::scene::LabelMode;

/// One objective instance: a network, an input and its supervision.
#[derive(Debug, Clone)]
pub struct Instance {
    pub network: Network,
    pub image: Vec<f32>,
    pub label: Label,
    pub targets: Vec<Option<[f64; 2]>>,
    pub lambda: f64,
    pub regression: RegressionLoss,
    pub attend: Option<ProxyPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    pub worst_param: usize,
    pub params: usize,
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

impl Instance {
    pub fn loss(&self, params: Option<&[f64]>) -> Result<f64, LuabError> {
        let net;
        let net_ref = match params {
            Some(p) => {
                net = Network::from_params(self.network.arch().clone(), p.to_vec())?;
                &net
            }
            None => &self.network,
        };
        let fw = net_ref.forward(&self.image, self.attend)?;
        Ok(luab_loss(&fw.scores, &fw.points, &self.label, &self.targets, self.lambda, self.regression)?.total)
    }

    pub fn analytic_gradient(&self) -> Result<Vec<f64>, LuabError> {
        let fw = self.network.forward(&self.image, self.attend)?;
        let parts = luab_loss(&fw.scores, &fw.points, &self.label, &self.targets, self.lambda, self.regression)?;
        let mut grad = vec![0.0; self.network.param_count()];
        self.network.backward(&fw, &parts.d_scores, &parts.d_points, &mut grad);
        Ok(grad)
    }

    /// Compares every parameter's analytic derivative with
    /// `(L(p + h) - L(p - h)) / 2h`.
    pub fn check(&self, step: f64, floor: f64) -> Result<GradCheck, LuabError> {
        let analytic = self.analytic_gradient()?;
        let mut params = self.network.params.clone();
        let mut worst = (0.0, 0);
        for i in 0..params.len() {
            let orig = params[i];
            params[i] = orig + step;
            let up = self.loss(Some(&params))?;
            params[i] = orig - step;
            let down = self.loss(Some(&params))?;
            params[i] = orig;
            let numeric = (up - down) / (2.0 * step);
            let err = relative_error(analytic[i], numeric, floor);
            if err > worst.0 {
                worst = (err, i);
            }
        }
        Ok(GradCheck { max_relative_error: worst.0, worst_param: worst.1, params: params.len() })
    }
}

/// A small random network, input and supervision drawn from `seed`.
///
/// Covers both label modes, both pooling kinds, both head inputs and both
/// regression losses.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = stream_rng(seed, 0);
    let multi = rng.random::<bool>();
    let attentive = !multi && rng.random::<bool>();
    let classes = rng.random_range(3..5);
    let arch = ArchSpec {
        image_size: rng.random_range(5..9),
        in_channels: 3,
        convs: vec![
            ConvSpec { out_channels: rng.random_range(2..4), stride: 2 },
            ConvSpec { out_channels: rng.random_range(2..4), stride: 1 },
        ],
        classes,
        label_mode: if multi { LabelMode::Multi } else { LabelMode::Single },
        pooling: if attentive {
            Pooling::Attentive { bandwidth: rng.random_range(0.1..0.6) }
        } else {
            Pooling::GlobalAverage
        },
        head_input: if rng.random::<bool>() { HeadInput::Pooled } else { HeadInput::Flatten },
        coord_channels: rng.random::<bool>(),
    };
    let heads = arch.heads();
    let mut network = Network::init(arch, &mut rng).unwrap();
    // Larger regression weights so that head's gradients are not negligible.
    for p in network.params.iter_mut() {
        *p += rng.random_range(-0.3..0.3);
    }
    let len = network.input_len();
    let image = (0..len).map(|_| rng.random::<f32>()).collect();
    let label = if multi {
        let mut t: Vec<bool> = (0..classes).map(|_| rng.random()).collect();
        t[0] = true;
        Label::Multi(t)
    } else {
        Label::Single(rng.random_range(0..classes))
    };
    let targets = (0..heads)
        .map(|_| rng.random::<f64>().lt(&0.8).then(|| [rng.random(), rng.random()]))
        .collect::<Vec<_>>();
    let regression = if rng.random::<f64>() < 0.7 {
        RegressionLoss::SmoothL1 { beta: rng.random_range(0.05..1.0) }
    } else {
        RegressionLoss::Mse
    };
    Instance {
        network,
        image,
        label,
        targets,
        lambda: rng.random_range(0.5..20.0),
        regression,
        attend: attentive.then(|| ProxyPoint { x: rng.random(), y: rng.random() }),
    }
}
