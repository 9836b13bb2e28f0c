//! A small convolutional network `f` with a classification head `g` on pooled
//! features and a point-regression head `h` on the flattened feature map.
//!
//! Parameters live in one flat vector so optimizers and gradient checks can
//! treat every weight uniformly. Backpropagation is written out by hand.

use abkit_core::ProxyPoint;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::LuabError;
use crate::loss::sigmoid;
use crate::pool::{attentive_weights, pool_backward, pool_with_weights, uniform_weights, Pooling};
use crate::scene::LabelMode;

/// A 3x3 convolution with padding 1 followed by SiLU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub stride: usize,
}

/// What the regression head reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HeadInput {
    /// The whole feature map, flattened.
    Flatten,
    /// The globally averaged feature vector, as seen by the classifier.
    #[default]
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub image_size: usize,
    pub in_channels: usize,
    pub convs: Vec<ConvSpec>,
    pub classes: usize,
    pub label_mode: LabelMode,
    pub pooling: Pooling,
    pub head_input: HeadInput,
    /// Append normalized x and y coordinate planes to the input.
    pub coord_channels: bool,
}

impl ArchSpec {
    pub fn desk(classes: usize, label_mode: LabelMode) -> ArchSpec {
        ArchSpec {
            image_size: 32,
            in_channels: 3,
            convs: vec![
                ConvSpec { out_channels: 12, stride: 2 },
                ConvSpec { out_channels: 24, stride: 2 },
                ConvSpec { out_channels: 24, stride: 1 },
            ],
            classes,
            label_mode,
            pooling: Pooling::GlobalAverage,
            head_input: HeadInput::Pooled,
            coord_channels: true,
        }
    }

    /// Number of 2-D regression heads.
    pub fn heads(&self) -> usize {
        match self.label_mode {
            LabelMode::Single => 1,
            LabelMode::Multi => self.classes,
        }
    }

    pub fn validate(&self) -> Result<(), LuabError> {
        if self.convs.is_empty() || self.classes < 2 || self.image_size == 0 || self.in_channels == 0 {
            return Err(LuabError::InvalidConfig("empty architecture".into()));
        }
        if self.convs.iter().any(|c| c.out_channels == 0 || c.stride == 0) {
            return Err(LuabError::InvalidConfig("zero channels or stride".into()));
        }
        if let Pooling::Attentive { bandwidth } = self.pooling {
            if !(bandwidth > 0.0) {
                return Err(LuabError::NonPositiveBandwidth(bandwidth));
            }
            if self.label_mode == LabelMode::Multi {
                return Err(LuabError::InvalidConfig(
                    "attentive pooling needs a single point per image".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ConvGeom {
    cin: usize,
    hin: usize,
    cout: usize,
    hout: usize,
    stride: usize,
    w: usize,
    b: usize,
}

impl ConvGeom {
    fn k(&self) -> usize {
        self.cin * 9
    }
    fn p(&self) -> usize {
        self.hout * self.hout
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    convs: Vec<ConvGeom>,
    feat_c: usize,
    feat_h: usize,
    cls_w: usize,
    cls_b: usize,
    reg_w: usize,
    reg_b: usize,
    reg_d: usize,
    total: usize,
}

impl Layout {
    fn new(arch: &ArchSpec) -> Layout {
        let mut off = 0;
        let mut cin = arch.in_channels + if arch.coord_channels { 2 } else { 0 };
        let mut h = arch.image_size;
        let mut convs = Vec::new();
        for c in &arch.convs {
            let hout = (h - 1) / c.stride + 1;
            let w = off;
            off += c.out_channels * cin * 9;
            let b = off;
            off += c.out_channels;
            convs.push(ConvGeom { cin, hin: h, cout: c.out_channels, hout, stride: c.stride, w, b });
            cin = c.out_channels;
            h = hout;
        }
        let cls_w = off;
        off += arch.classes * cin;
        let cls_b = off;
        off += arch.classes;
        let reg_d = match arch.head_input {
            HeadInput::Flatten => cin * h * h,
            HeadInput::Pooled => cin,
        };
        let reg_w = off;
        off += 2 * arch.heads() * reg_d;
        let reg_b = off;
        off += 2 * arch.heads();
        Layout { convs, feat_c: cin, feat_h: h, cls_w, cls_b, reg_w, reg_b, reg_d, total: off }
    }

    fn feat_len(&self) -> usize {
        self.feat_c * self.feat_h * self.feat_h
    }
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Forward {
    cols: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    pool_weights: Vec<f64>,
    pooled: Vec<f64>,
    reg_in: Vec<f64>,
    pub scores: Vec<f64>,
    /// Squashed regression outputs, `2 * heads` values in `(0, 1)`.
    pub points: Vec<f64>,
}

impl Forward {
    pub fn point(&self, head: usize) -> ProxyPoint {
        ProxyPoint { x: self.points[2 * head], y: self.points[2 * head + 1] }
    }
}

fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

fn im2col(input: &[f64], g: &ConvGeom, cols: &mut [f64]) {
    let (p, hin, ho) = (g.p(), g.hin as isize, g.hout);
    for ci in 0..g.cin {
        let plane = &input[ci * g.hin * g.hin..(ci + 1) * g.hin * g.hin];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[((ci * 3 + ky) * 3 + kx) * p..][..p];
                for oy in 0..ho {
                    let iy = (oy * g.stride + ky) as isize - 1;
                    for ox in 0..ho {
                        let ix = (ox * g.stride + kx) as isize - 1;
                        row[oy * ho + ox] = if iy >= 0 && iy < hin && ix >= 0 && ix < hin {
                            plane[(iy * hin + ix) as usize]
                        } else {
                            0.0
                        };
                    }
                }
            }
        }
    }
}

fn col2im(dcols: &[f64], g: &ConvGeom, dinput: &mut [f64]) {
    let (p, hin, ho) = (g.p(), g.hin as isize, g.hout);
    dinput.fill(0.0);
    for ci in 0..g.cin {
        let plane = &mut dinput[ci * g.hin * g.hin..(ci + 1) * g.hin * g.hin];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &dcols[((ci * 3 + ky) * 3 + kx) * p..][..p];
                for oy in 0..ho {
                    let iy = (oy * g.stride + ky) as isize - 1;
                    if iy < 0 || iy >= hin {
                        continue;
                    }
                    for ox in 0..ho {
                        let ix = (ox * g.stride + kx) as isize - 1;
                        if ix >= 0 && ix < hin {
                            plane[(iy * hin + ix) as usize] += row[oy * ho + ox];
                        }
                    }
                }
            }
        }
    }
}

/// `c = beta * c + a * b` for row-major `c` (`m x n`, row stride given) and
/// strided `a` (`m x k`) and `b` (`k x n`).
fn gemm(
    (m, k, n): (usize, usize, usize),
    (a, rsa, csa): (&[f64], usize, usize),
    (b, rsb, csb): (&[f64], usize, usize),
    beta: f64,
    (c, rsc): (&mut [f64], usize),
) {
    assert!(a.len() > (m - 1) * rsa + (k - 1) * csa);
    assert!(b.len() > (k - 1) * rsb + (n - 1) * csb);
    assert!(c.len() > (m - 1) * rsc + (n - 1));
    // SAFETY: the asserts above keep every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            1,
        );
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    arch: ArchSpec,
    layout: Layout,
    pub params: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    arch: ArchSpec,
    params: Vec<f64>,
}

impl Serialize for Network {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        NetworkFile { arch: self.arch.clone(), params: self.params.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Network {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let f = NetworkFile::deserialize(d)?;
        Network::from_params(f.arch, f.params).map_err(serde::de::Error::custom)
    }
}

impl Network {
    /// He-initialized convolutions and classifier; the regression head starts
    /// near zero so initial points sit near the image centre.
    pub fn init<R: Rng>(arch: ArchSpec, rng: &mut R) -> Result<Network, LuabError> {
        arch.validate()?;
        let layout = Layout::new(&arch);
        let mut params = vec![0.0; layout.total];
        for g in &layout.convs {
            let std = (2.0 / g.k() as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("finite");
            for w in &mut params[g.w..g.b] {
                *w = normal.sample(rng);
            }
        }
        let normal = Normal::new(0.0, (1.0 / layout.feat_c as f64).sqrt()).expect("finite");
        for w in &mut params[layout.cls_w..layout.cls_b] {
            *w = normal.sample(rng);
        }
        let normal = Normal::new(0.0, 0.1 / (layout.reg_d as f64).sqrt()).expect("finite");
        for w in &mut params[layout.reg_w..layout.reg_b] {
            *w = normal.sample(rng);
        }
        Ok(Network { arch, layout, params })
    }

    pub fn from_params(arch: ArchSpec, params: Vec<f64>) -> Result<Network, LuabError> {
        arch.validate()?;
        let layout = Layout::new(&arch);
        if params.len() != layout.total {
            return Err(LuabError::ShapeMismatch(format!(
                "{} parameters for an architecture with {}",
                params.len(),
                layout.total
            )));
        }
        Ok(Network { arch, layout, params })
    }

    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    pub fn param_count(&self) -> usize {
        self.layout.total
    }

    pub fn input_len(&self) -> usize {
        self.arch.in_channels * self.arch.image_size * self.arch.image_size
    }

    /// Forward pass. `point` steers attentive pooling during training; it is
    /// ignored for global-average pooling.
    pub fn forward(&self, image: &[f32], point: Option<ProxyPoint>) -> Result<Forward, LuabError> {
        if image.len() != self.input_len() {
            return Err(LuabError::ShapeMismatch(format!(
                "image of {} values, expected {}",
                image.len(),
                self.input_len()
            )));
        }
        let p = &self.params;
        let l = &self.layout;
        let mut cols = Vec::with_capacity(l.convs.len());
        let mut pre = Vec::with_capacity(l.convs.len());
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(l.convs.len());
        // Inputs are centred on zero.
        let mut input: Vec<f64> = image.iter().map(|&v| v as f64 - 0.5).collect();
        if self.arch.coord_channels {
            let n = self.arch.image_size;
            for axis in 0..2 {
                for y in 0..n {
                    for x in 0..n {
                        let v = if axis == 0 { x } else { y };
                        input.push((v as f64 + 0.5) / n as f64 - 0.5);
                    }
                }
            }
        }
        for (i, g) in l.convs.iter().enumerate() {
            let (k, np) = (g.k(), g.p());
            let mut c = vec![0.0; k * np];
            im2col(if i == 0 { &input } else { &acts[i - 1] }, g, &mut c);
            let mut z = vec![0.0; g.cout * np];
            for co in 0..g.cout {
                z[co * np..(co + 1) * np].fill(p[g.b + co]);
            }
            // z += W (cout x k) * cols (k x np)
            gemm(
                (g.cout, k, np),
                (&p[g.w..g.b], k, 1),
                (&c, np, 1),
                1.0,
                (&mut z, np),
            );
            acts.push(z.iter().map(|&v| silu(v)).collect());
            pre.push(z);
            cols.push(c);
        }

        let feat = acts.last().expect("at least one conv");
        let (c, h) = (l.feat_c, l.feat_h);
        let pool_weights = match (self.arch.pooling, point) {
            (Pooling::Attentive { bandwidth }, Some(pt)) => attentive_weights(h, h, pt, bandwidth)?,
            _ => uniform_weights(h, h),
        };
        let pooled = pool_with_weights(feat, c, &pool_weights);
        let scores = (0..self.arch.classes)
            .map(|k| {
                p[l.cls_b + k]
                    + p[l.cls_w + k * c..l.cls_w + (k + 1) * c]
                        .iter()
                        .zip(&pooled)
                        .map(|(w, x)| w * x)
                        .sum::<f64>()
            })
            .collect();
        let reg_in = match self.arch.head_input {
            HeadInput::Flatten => feat.clone(),
            HeadInput::Pooled => pool_with_weights(feat, c, &uniform_weights(h, h)),
        };
        let d = l.reg_d;
        let points = (0..2 * self.arch.heads())
            .map(|j| {
                let z = p[l.reg_b + j]
                    + p[l.reg_w + j * d..l.reg_w + (j + 1) * d]
                        .iter()
                        .zip(&reg_in)
                        .map(|(w, x)| w * x)
                        .sum::<f64>();
                sigmoid(z)
            })
            .collect();
        Ok(Forward { cols, pre, pool_weights, pooled, reg_in, scores, points })
    }

    /// Adds the gradient of the loss with respect to every parameter to
    /// `grad`, given its gradients with respect to the scores and the
    /// squashed points.
    pub fn backward(&self, fw: &Forward, d_scores: &[f64], d_points: &[f64], grad: &mut [f64]) {
        let p = &self.params;
        let l = &self.layout;
        let (c, d) = (l.feat_c, l.reg_d);
        let mut d_feat = vec![0.0; l.feat_len()];

        let mut d_pooled = vec![0.0; c];
        for (k, &ds) in d_scores.iter().enumerate() {
            if ds == 0.0 {
                continue;
            }
            grad[l.cls_b + k] += ds;
            for ch in 0..c {
                grad[l.cls_w + k * c + ch] += ds * fw.pooled[ch];
                d_pooled[ch] += ds * p[l.cls_w + k * c + ch];
            }
        }
        pool_backward(&d_pooled, &fw.pool_weights, &mut d_feat);

        let mut d_reg_in = vec![0.0; d];
        for (j, &dp) in d_points.iter().enumerate() {
            if dp == 0.0 {
                continue;
            }
            let s = fw.points[j];
            let dz = dp * s * (1.0 - s);
            grad[l.reg_b + j] += dz;
            let w = &p[l.reg_w + j * d..l.reg_w + (j + 1) * d];
            let gw = &mut grad[l.reg_w + j * d..l.reg_w + (j + 1) * d];
            for i in 0..d {
                gw[i] += dz * fw.reg_in[i];
                d_reg_in[i] += dz * w[i];
            }
        }
        match self.arch.head_input {
            HeadInput::Flatten => d_feat.iter_mut().zip(&d_reg_in).for_each(|(a, b)| *a += b),
            HeadInput::Pooled => {
                pool_backward(&d_reg_in, &uniform_weights(l.feat_h, l.feat_h), &mut d_feat)
            }
        }

        let mut d_act = d_feat;
        for (i, g) in l.convs.iter().enumerate().rev() {
            let (k, np) = (g.k(), g.p());
            let d_pre: Vec<f64> = d_act
                .iter()
                .zip(&fw.pre[i])
                .map(|(&da, &z)| da * silu_grad(z))
                .collect();
            for co in 0..g.cout {
                grad[g.b + co] += d_pre[co * np..(co + 1) * np].iter().sum::<f64>();
            }
            // dW += dZ (cout x np) * cols^T (np x k)
            gemm(
                (g.cout, np, k),
                (&d_pre, np, 1),
                (&fw.cols[i], 1, np),
                1.0,
                (&mut grad[g.w..g.b], k),
            );
            if i > 0 {
                // dcols = W^T (k x cout) * dZ (cout x np)
                let mut dcols = vec![0.0; k * np];
                gemm((k, g.cout, np), (&p[g.w..g.b], 1, k), (&d_pre, np, 1), 0.0, (&mut dcols, np));
                let mut d_in = vec![0.0; g.cin * g.hin * g.hin];
                col2im(&dcols, g, &mut d_in);
                d_act = d_in;
            } else {
                break;
            }
        }
    }

    /// Class scores and points at inference (no attention point).
    pub fn predict(&self, image: &[f32]) -> Result<(Vec<f64>, Vec<f64>), LuabError> {
        let fw = self.forward(image, None)?;
        Ok((fw.scores, fw.points))
    }
}
