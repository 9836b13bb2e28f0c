//! Image-agnostic click baselines: clicks drawn from a Gaussian around the
//! image centre, from `sigma = 0` (always the centre) to `sigma = inf`
//! (uniform over the image).

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::geometry::ImageBoxes;
use crate::proxy::ProxyPoint;
use crate::rng::stream_rng;

use super::AnalysisError;

/// Click spread in units of `min(width, height)`, or uniform.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "SigmaRepr", into = "SigmaRepr")]
pub enum Sigma {
    Finite(f64),
    Uniform,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SigmaRepr {
    Num(f64),
    Text(String),
}

impl TryFrom<SigmaRepr> for Sigma {
    type Error = String;
    fn try_from(r: SigmaRepr) -> Result<Self, String> {
        match r {
            SigmaRepr::Num(v) if v >= 0.0 => Ok(Sigma::Finite(v)),
            SigmaRepr::Num(v) => Err(format!("negative sigma {v}")),
            SigmaRepr::Text(s) => s.parse(),
        }
    }
}

impl From<Sigma> for SigmaRepr {
    fn from(s: Sigma) -> Self {
        match s {
            Sigma::Finite(v) => SigmaRepr::Num(v),
            Sigma::Uniform => SigmaRepr::Text("inf".into()),
        }
    }
}

impl FromStr for Sigma {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if matches!(s, "inf" | "infinity" | "uniform") {
            return Ok(Sigma::Uniform);
        }
        let v: f64 = s.parse().map_err(|_| format!("bad sigma `{s}`"))?;
        if v.is_infinite() && v > 0.0 {
            Ok(Sigma::Uniform)
        } else if v >= 0.0 {
            Ok(Sigma::Finite(v))
        } else {
            Err(format!("negative sigma `{s}`"))
        }
    }
}

impl fmt::Display for Sigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sigma::Finite(v) => write!(f, "{v}"),
            Sigma::Uniform => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Ascending; `Uniform` may only come last.
    pub sigmas: Vec<Sigma>,
    pub samples_per_image: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            sigmas: [0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 1.0]
                .into_iter()
                .map(Sigma::Finite)
                .chain([Sigma::Uniform])
                .collect(),
            samples_per_image: 1000,
            seed: 0,
        }
    }
}

impl SweepConfig {
    fn validate(&self) -> Result<(), AnalysisError> {
        if self.samples_per_image == 0 {
            return Err(AnalysisError::InvalidConfig("samples_per_image must be > 0".into()));
        }
        let sorted = self.sigmas.windows(2).all(|w| match (w[0], w[1]) {
            (Sigma::Finite(a), Sigma::Finite(b)) => a <= b,
            (Sigma::Finite(_), Sigma::Uniform) => true,
            (Sigma::Uniform, _) => false,
        });
        if !sorted {
            return Err(AnalysisError::InvalidConfig("sigmas must be ascending".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub sigma: Sigma,
    pub accuracy: f64,
}

/// Monte Carlo accuracy of image-agnostic clicks for each sigma.
///
/// Clicks are clamped to the image. Each image is weighted equally; image
/// `i` at sigma index `k` draws from its own stream, so the result is the
/// same under any `exec`. `sigma = 0` is evaluated exactly.
pub fn gaussian_click_sweep(
    images: &[ImageBoxes],
    cfg: &SweepConfig,
    exec: Exec,
) -> Result<Vec<SweepPoint>, AnalysisError> {
    if images.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    cfg.validate()?;
    let n_sigmas = cfg.sigmas.len() as u64;
    let per_image: Vec<Vec<f64>> = exec.map_range(images.len(), |i| {
        let img = &images[i];
        cfg.sigmas
            .iter()
            .enumerate()
            .map(|(k, &sigma)| {
                image_accuracy(img, sigma, cfg, i as u64 * n_sigmas + k as u64)
            })
            .collect()
    });
    Ok(cfg
        .sigmas
        .iter()
        .enumerate()
        .map(|(k, &sigma)| SweepPoint {
            sigma,
            accuracy: per_image.iter().map(|v| v[k]).sum::<f64>() / images.len() as f64,
        })
        .collect())
}

fn image_accuracy(img: &ImageBoxes, sigma: Sigma, cfg: &SweepConfig, stream: u64) -> f64 {
    let center = ProxyPoint { x: 0.5, y: 0.5 };
    let s = match sigma {
        Sigma::Finite(s) if s == 0.0 => return if img.contains(center) { 1.0 } else { 0.0 },
        s => s,
    };
    let mut rng = stream_rng(cfg.seed, stream);
    let short = img.width.min(img.height);
    let mut hits = 0usize;
    for _ in 0..cfg.samples_per_image {
        let p = match s {
            Sigma::Uniform => ProxyPoint {
                x: rng.random::<f64>(),
                y: rng.random::<f64>(),
            },
            Sigma::Finite(s) => {
                let zx: f64 = rng.sample(StandardNormal);
                let zy: f64 = rng.sample(StandardNormal);
                ProxyPoint::clamped(
                    0.5 + s * short / img.width * zx,
                    0.5 + s * short / img.height * zy,
                )
            }
        };
        if img.contains(p) {
            hits += 1;
        }
    }
    hits as f64 / cfg.samples_per_image as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;

    fn cfg(sigmas: &[Sigma], n: usize) -> SweepConfig {
        SweepConfig {
            sigmas: sigmas.to_vec(),
            samples_per_image: n,
            seed: 11,
        }
    }

    #[test]
    fn full_image_box_is_always_hit() {
        let imgs = vec![ImageBoxes::square("a", vec![BBox::full()])];
        let c = cfg(&[Sigma::Finite(0.0), Sigma::Finite(0.3), Sigma::Finite(5.0), Sigma::Uniform], 500);
        for p in gaussian_click_sweep(&imgs, &c, Exec::Sequential).unwrap() {
            assert_eq!(p.accuracy, 1.0);
        }
    }

    #[test]
    fn unsorted_sigmas_rejected() {
        let imgs = vec![ImageBoxes::square("a", vec![BBox::full()])];
        let c = cfg(&[Sigma::Uniform, Sigma::Finite(0.0)], 5);
        assert!(matches!(
            gaussian_click_sweep(&imgs, &c, Exec::Sequential),
            Err(AnalysisError::InvalidConfig(_))
        ));
    }

    #[test]
    fn schedule_independent() {
        let imgs: Vec<_> = (0..20)
            .map(|i| {
                let h = 0.05 + 0.02 * i as f64;
                ImageBoxes::square(format!("{i}"), vec![BBox::new(0.5 - h, 0.4, 0.5 + h, 0.7).unwrap()])
            })
            .collect();
        let c = cfg(&[Sigma::Finite(0.0), Sigma::Finite(0.2), Sigma::Uniform], 200);
        assert_eq!(
            gaussian_click_sweep(&imgs, &c, Exec::Sequential).unwrap(),
            gaussian_click_sweep(&imgs, &c, Exec::Parallel).unwrap()
        );
    }

    #[test]
    fn sigma_parsing() {
        assert_eq!("inf".parse::<Sigma>().unwrap(), Sigma::Uniform);
        assert_eq!("0.25".parse::<Sigma>().unwrap(), Sigma::Finite(0.25));
        assert!("-1".parse::<Sigma>().is_err());
        let json = serde_json::to_string(&vec![Sigma::Finite(0.5), Sigma::Uniform]).unwrap();
        assert_eq!(json, r#"[0.5,"inf"]"#);
        let back: Vec<Sigma> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vec![Sigma::Finite(0.5), Sigma::Uniform]);
    }
}
