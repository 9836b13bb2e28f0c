//! Synthetic scenes with a spurious background cue.
//!
//! Each class has a shape and a paired background kind. With probability
//! `rho` a single-label scene is drawn on its class-paired background,
//! otherwise on one of the other kinds chosen uniformly; `rho = 1/K` makes
//! background and class independent. Multi-label scenes hold two or three
//! shapes, where the second shape is the first one's partner class with
//! probability `co_occurrence`.
//!
//! Scenes keep their drawing parameters so any object can be erased by
//! re-rendering without it: the background and pixel noise stay identical.

use abkit_core::exec::Exec;
use abkit_core::rng::{derive_seed, stream_rng};
use abkit_core::{BBox, ProxyPoint};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::LuabError;
use crate::loss::Label;

pub const SHAPES: [&str; 8] = [
    "disk", "square", "triangle", "plus", "ring", "diamond", "cross", "frame",
];

/// Non-class shapes scattered as clutter.
pub const CLUTTER: [&str; 4] = ["bar", "half-disk", "ell", "dot-pair"];

/// Background base colours; foreground objects are always lighter.
const PALETTE: [[f32; 3]; 8] = [
    [0.50, 0.10, 0.10],
    [0.10, 0.40, 0.12],
    [0.10, 0.15, 0.50],
    [0.50, 0.45, 0.08],
    [0.40, 0.12, 0.45],
    [0.08, 0.42, 0.45],
    [0.55, 0.30, 0.05],
    [0.30, 0.30, 0.30],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    #[default]
    Single,
    Multi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SceneLayout {
    /// Object centres concentrated around the image centre.
    CenterBiased,
    #[default]
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub image_size: usize,
    pub classes: usize,
    pub rho: f64,
    pub layout: SceneLayout,
    pub label_mode: LabelMode,
    /// Probability that a multi-label scene pairs its first class with its
    /// partner (`c ^ 1`).
    pub co_occurrence: f64,
    /// Probability of a third object in multi-label scenes.
    pub third_object: f64,
    /// Object radius range in pixels.
    pub min_radius: f64,
    pub max_radius: f64,
    /// Annotator click spread as a fraction of the object radius.
    pub click_spread: f64,
    /// Probability that a simulated click lands anywhere in the image.
    pub click_miss: f64,
    /// Probability that an object present in a multi-label scene gets no
    /// byproduct point (the annotator skipped it).
    pub skip_rate: f64,
    pub pixel_noise: f64,
    /// Number of clutter shapes per scene.
    pub clutter: usize,
    /// Background kinds also differ in colour, not only in texture.
    pub colour_cue: bool,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            image_size: 32,
            classes: 8,
            rho: 0.95,
            layout: SceneLayout::Uniform,
            label_mode: LabelMode::Single,
            co_occurrence: 0.9,
            third_object: 0.4,
            min_radius: 4.0,
            max_radius: 7.0,
            click_spread: 0.25,
            click_miss: 0.1,
            skip_rate: 0.1,
            pixel_noise: 0.03,
            clutter: 1,
            colour_cue: false,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), LuabError> {
        let bad = |m: &str| Err(LuabError::InvalidConfig(m.into()));
        if !(0.0..=1.0).contains(&self.rho) {
            return bad("rho must lie in [0, 1]");
        }
        if self.classes < 2 || self.classes > SHAPES.len() {
            return bad("classes must be between 2 and 8");
        }
        if self.label_mode == LabelMode::Multi && self.classes < 4 {
            return bad("multi-label scenes need at least 4 classes");
        }
        if !(self.min_radius >= 1.5 && self.max_radius >= self.min_radius) {
            return bad("radius range is empty or too small");
        }
        if 2.0 * self.max_radius + 2.0 > self.image_size as f64 {
            return bad("objects do not fit in the image");
        }
        for (name, p) in [
            ("co_occurrence", self.co_occurrence),
            ("third_object", self.third_object),
            ("click_miss", self.click_miss),
            ("skip_rate", self.skip_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(LuabError::InvalidConfig(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    /// The same distribution with background independent of the class.
    pub fn decorrelated(&self) -> SceneConfig {
        SceneConfig {
            rho: 1.0 / self.classes as f64,
            co_occurrence: 0.0,
            ..self.clone()
        }
    }

    pub fn with_rho(&self, rho: f64) -> SceneConfig {
        SceneConfig { rho, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub class: usize,
    /// Centre in pixels.
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub colour: [f32; 3],
    /// Coverage-weighted centroid, normalized.
    pub centroid: ProxyPoint,
    /// Pixel-tight bounding box, normalized.
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSample {
    pub size: usize,
    /// `3 x size x size`, channel-major, values in `[0, 1]`.
    pub image: Vec<f32>,
    pub label: Label,
    pub objects: Vec<SceneObject>,
    /// Non-class shapes; their `class` indexes past the class shapes.
    pub clutter: Vec<SceneObject>,
    pub bg_kind: usize,
    pub bg_colour: [f32; 3],
    pub bg_phase: [f64; 2],
    /// Background is the one paired with the (first) class.
    pub correlated: bool,
    pub noise_seed: u64,
    pub noise: f64,
    /// Simulated annotator points, one per regression head.
    pub byproduct: Vec<Option<[f64; 2]>>,
    /// Uniform random points in the same slots as `byproduct`.
    pub random_point: Vec<Option<[f64; 2]>>,
}

impl SceneSample {
    pub fn gt_point(&self) -> ProxyPoint {
        self.objects[0].centroid
    }

    pub fn gt_box(&self) -> BBox {
        self.objects[0].bbox
    }

    pub fn classes_present(&self) -> Vec<usize> {
        self.objects.iter().map(|o| o.class).collect()
    }

    /// The scene re-rendered without the object of class `class`.
    pub fn erase(&self, class: usize) -> Vec<f32> {
        render(self, Some(class))
    }
}

/// Does the unit-scale shape `class` cover local point `(u, v)` in `[-1, 1]^2`?
fn covers(class: usize, u: f64, v: f64) -> bool {
    let (au, av) = (u.abs(), v.abs());
    let r = (u * u + v * v).sqrt();
    match class {
        0 => r <= 1.0,
        1 => au.max(av) <= 0.8,
        2 => (-0.85..=0.85).contains(&v) && au <= (v + 0.85) / 1.7 * 0.95,
        3 => (au <= 0.3 && av <= 0.95) || (av <= 0.3 && au <= 0.95),
        4 => (0.55..=1.0).contains(&r),
        5 => au + av <= 1.0,
        6 => ((u - v).abs() <= 0.4 || (u + v).abs() <= 0.4) && au.max(av) <= 0.85,
        7 => (0.55..=0.9).contains(&au.max(av)),
        // clutter shapes, never a class
        8 => av <= 0.3 && au <= 0.95,
        9 => r <= 1.0 && v >= -0.1,
        10 => au <= 0.95 && av <= 0.95 && (u <= -0.4 || v >= 0.4),
        _ => (u + 0.5).powi(2) + v * v <= 0.2 || (u - 0.5).powi(2) + v * v <= 0.2,
    }
}

/// Fraction of pixel `(px, py)` covered by the object, from 3x3 supersampling.
fn coverage(o: &SceneObject, px: usize, py: usize) -> f32 {
    let mut hits = 0;
    for sy in 0..3 {
        for sx in 0..3 {
            let x = px as f64 + (sx as f64 + 0.5) / 3.0;
            let y = py as f64 + (sy as f64 + 0.5) / 3.0;
            if covers(o.class, (x - o.cx) / o.radius, (y - o.cy) / o.radius) {
                hits += 1;
            }
        }
    }
    hits as f32 / 9.0
}

fn background(kind: usize, colour: [f32; 3], phase: [f64; 2], size: usize, x: usize, y: usize) -> [f32; 3] {
    let (fx, fy) = (x as f64 + phase[0], y as f64 + phase[1]);
    let t = match kind % 8 {
        0 => ((fy / 2.0).floor() as i64).rem_euclid(2) as f64,
        1 => ((fx / 2.0).floor() as i64).rem_euclid(2) as f64,
        2 => (((fx + fy) / 3.0).floor() as i64).rem_euclid(2) as f64,
        3 => (((fx / 4.0).floor() + (fy / 4.0).floor()) as i64).rem_euclid(2) as f64,
        4 => {
            let dx = fx.rem_euclid(6.0) - 3.0;
            let dy = fy.rem_euclid(6.0) - 3.0;
            if dx * dx + dy * dy <= 2.5 { 1.0 } else { 0.0 }
        }
        5 => (((fx - fy) / 3.0).floor() as i64).rem_euclid(2) as f64,
        6 => x as f64 / (size - 1) as f64,
        _ => {
            let c = size as f64 / 2.0;
            let d = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2)).sqrt() + phase[0];
            ((d / 2.5).floor() as i64).rem_euclid(2) as f64
        }
    } as f32;
    colour.map(|c| c * (1.0 - 0.45 * t))
}

fn render(sample: &SceneSample, skip: Option<usize>) -> Vec<f32> {
    let s = sample.size;
    let plane = s * s;
    let mut img = vec![0f32; 3 * plane];
    for y in 0..s {
        for x in 0..s {
            let bg = background(sample.bg_kind, sample.bg_colour, sample.bg_phase, s, x, y);
            for c in 0..3 {
                img[c * plane + y * s + x] = bg[c];
            }
        }
    }
    let drawn = sample.clutter.iter().chain(sample.objects.iter().filter(|o| Some(o.class) != skip));
    for o in drawn {
        let (x0, x1) = pixel_span(o.cx, o.radius, s);
        let (y0, y1) = pixel_span(o.cy, o.radius, s);
        for y in y0..y1 {
            for x in x0..x1 {
                let a = coverage(o, x, y);
                if a > 0.0 {
                    for c in 0..3 {
                        let p = &mut img[c * plane + y * s + x];
                        *p = *p * (1.0 - a) + o.colour[c] * a;
                    }
                }
            }
        }
    }
    if sample.noise > 0.0 {
        let mut rng = stream_rng(sample.noise_seed, 0);
        let normal = Normal::new(0.0, sample.noise).expect("noise is finite");
        for p in img.iter_mut() {
            *p = (*p as f64 + normal.sample(&mut rng)).clamp(0.0, 1.0) as f32;
        }
    }
    img
}

fn pixel_span(c: f64, r: f64, size: usize) -> (usize, usize) {
    let lo = (c - r - 1.0).floor().max(0.0) as usize;
    let hi = ((c + r + 1.0).ceil() as usize).min(size);
    (lo, hi)
}

/// Centroid and tight box of the rendered object, both normalized.
fn measure(o: &SceneObject, size: usize) -> (ProxyPoint, BBox) {
    let (x0, x1) = pixel_span(o.cx, o.radius, size);
    let (y0, y1) = pixel_span(o.cy, o.radius, size);
    let (mut m, mut mx, mut my) = (0.0, 0.0, 0.0);
    let (mut bx0, mut by0, mut bx1, mut by1) = (usize::MAX, usize::MAX, 0, 0);
    for y in y0..y1 {
        for x in x0..x1 {
            let a = coverage(o, x, y) as f64;
            if a > 0.0 {
                m += a;
                mx += a * (x as f64 + 0.5);
                my += a * (y as f64 + 0.5);
                bx0 = bx0.min(x);
                by0 = by0.min(y);
                bx1 = bx1.max(x + 1);
                by1 = by1.max(y + 1);
            }
        }
    }
    let s = size as f64;
    let centroid = ProxyPoint::clamped(mx / m / s, my / m / s);
    let bbox = BBox::new(bx0 as f64 / s, by0 as f64 / s, bx1 as f64 / s, by1 as f64 / s)
        .expect("rendered objects cover at least one pixel");
    (centroid, bbox)
}

fn pick_colour<R: Rng>(rng: &mut R) -> [f32; 3] {
    [rng.random_range(0.6..=1.0), rng.random_range(0.6..=1.0), rng.random_range(0.6..=1.0)]
}

fn place<R: Rng>(rng: &mut R, cfg: &SceneConfig, radius: f64) -> (f64, f64) {
    let s = cfg.image_size as f64;
    let (lo, hi) = (radius + 0.5, s - radius - 0.5);
    match cfg.layout {
        SceneLayout::Uniform => (rng.random_range(lo..=hi), rng.random_range(lo..=hi)),
        SceneLayout::CenterBiased => {
            let normal = Normal::new(s / 2.0, s / 10.0).expect("finite");
            (
                normal.sample(rng).clamp(lo, hi),
                normal.sample(rng).clamp(lo, hi),
            )
        }
    }
}

fn separated(a: (f64, f64, f64), b: (f64, f64, f64)) -> bool {
    let gap = a.2 + b.2 + 1.0;
    (a.0 - b.0).abs() >= gap || (a.1 - b.1).abs() >= gap
}

fn simulated_click<R: Rng>(rng: &mut R, cfg: &SceneConfig, o: &SceneObject) -> [f64; 2] {
    if rng.random::<f64>() < cfg.click_miss {
        return [rng.random(), rng.random()];
    }
    let sd = cfg.click_spread * o.radius / cfg.image_size as f64;
    let normal = Normal::new(0.0, sd).expect("finite spread");
    [
        (o.centroid.x + normal.sample(rng)).clamp(0.0, 1.0),
        (o.centroid.y + normal.sample(rng)).clamp(0.0, 1.0),
    ]
}

/// Draws one scene.
pub fn generate_scene<R: Rng>(rng: &mut R, cfg: &SceneConfig) -> SceneSample {
    let k = cfg.classes;
    let first = rng.random_range(0..k);
    let mut classes = vec![first];
    if cfg.label_mode == LabelMode::Multi {
        let partner = first ^ 1;
        let second = if partner < k && rng.random::<f64>() < cfg.co_occurrence {
            partner
        } else {
            other_class(rng, k, &classes)
        };
        classes.push(second);
        if rng.random::<f64>() < cfg.third_object {
            let third = other_class(rng, k, &classes);
            classes.push(third);
        }
    }

    let correlated = rng.random::<f64>() < cfg.rho;
    let bg_kind = match cfg.label_mode {
        LabelMode::Single if correlated => first,
        LabelMode::Single => (first + rng.random_range(1..k)) % k,
        LabelMode::Multi => rng.random_range(0..k),
    };
    let correlated = bg_kind == first;
    let bg_phase = [rng.random_range(0.0..8.0), rng.random_range(0.0..8.0)];
    let bg_colour = if cfg.colour_cue {
        PALETTE[bg_kind % 8]
    } else {
        [0; 3].map(|_| rng.random_range(0.05..=0.5))
    };

    let mut placed: Vec<(f64, f64, f64)> = Vec::new();
    let shapes = classes.iter().copied().chain(
        (0..cfg.clutter).map(|_| SHAPES.len() + rng.random_range(0..CLUTTER.len())),
    );
    let mut objects = Vec::new();
    let mut clutter = Vec::new();
    for class in shapes.collect::<Vec<_>>() {
        let mut radius = rng.random_range(cfg.min_radius..=cfg.max_radius);
        let mut spot = place(rng, cfg, radius);
        let mut tries = 0;
        while !placed.iter().all(|&p| separated(p, (spot.0, spot.1, radius))) {
            tries += 1;
            if tries % 50 == 0 {
                radius = (radius * 0.9).max(cfg.min_radius * 0.5);
            }
            spot = place(rng, cfg, radius);
        }
        placed.push((spot.0, spot.1, radius));
        let mut o = SceneObject {
            class,
            cx: spot.0,
            cy: spot.1,
            radius,
            colour: pick_colour(rng),
            centroid: ProxyPoint { x: 0.0, y: 0.0 },
            bbox: BBox::full(),
        };
        (o.centroid, o.bbox) = measure(&o, cfg.image_size);
        if class < SHAPES.len() {
            objects.push(o);
        } else {
            clutter.push(o);
        }
    }

    let heads = match cfg.label_mode {
        LabelMode::Single => 1,
        LabelMode::Multi => k,
    };
    let mut byproduct = vec![None; heads];
    let mut random_point = vec![None; heads];
    for o in &objects {
        let slot = if heads == 1 { 0 } else { o.class };
        let click = simulated_click(rng, cfg, o);
        let skipped = heads > 1 && rng.random::<f64>() < cfg.skip_rate;
        let uniform = [rng.random(), rng.random()];
        if !skipped {
            byproduct[slot] = Some(click);
            random_point[slot] = Some(uniform);
        }
    }

    let label = match cfg.label_mode {
        LabelMode::Single => Label::Single(first),
        LabelMode::Multi => {
            let mut t = vec![false; k];
            classes.iter().for_each(|&c| t[c] = true);
            Label::Multi(t)
        }
    };
    let mut sample = SceneSample {
        size: cfg.image_size,
        image: Vec::new(),
        label,
        objects,
        clutter,
        bg_kind,
        bg_colour,
        bg_phase,
        correlated,
        noise_seed: rng.random(),
        noise: cfg.pixel_noise,
        byproduct,
        random_point,
    };
    sample.image = render(&sample, None);
    sample
}

fn other_class<R: Rng>(rng: &mut R, k: usize, taken: &[usize]) -> usize {
    loop {
        let c = rng.random_range(0..k);
        if !taken.contains(&c) {
            return c;
        }
    }
}

/// `n` scenes; scene `i` is drawn from its own stream so the result does not
/// depend on the execution strategy.
pub fn generate_dataset(
    cfg: &SceneConfig,
    n: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<SceneSample>, LuabError> {
    cfg.validate()?;
    let seed = derive_seed(seed, "scenes");
    Ok(exec.map_range(n, |i| generate_scene(&mut stream_rng(seed, i as u64), cfg)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SceneConfig {
        SceneConfig::default()
    }

    #[test]
    fn rho_one_always_pairs_background() {
        let c = cfg().with_rho(1.0);
        let data = generate_dataset(&c, 300, 1, Exec::Sequential).unwrap();
        assert!(data.iter().all(|s| s.correlated && Label::Single(s.bg_kind) == s.label));
    }

    #[test]
    fn gt_point_lies_in_gt_box() {
        let mut c = cfg();
        c.label_mode = LabelMode::Multi;
        for s in generate_dataset(&c, 200, 2, Exec::Sequential).unwrap() {
            for o in &s.objects {
                assert!(o.bbox.contains(o.centroid));
            }
        }
    }

    #[test]
    fn multi_label_objects_are_distinct_classes() {
        let mut c = cfg();
        c.label_mode = LabelMode::Multi;
        for s in generate_dataset(&c, 200, 3, Exec::Sequential).unwrap() {
            let mut cls = s.classes_present();
            let n = cls.len();
            cls.sort();
            cls.dedup();
            assert_eq!(cls.len(), n);
            assert!(n >= 2);
            let Label::Multi(t) = &s.label else { panic!() };
            assert_eq!(t.iter().filter(|&&b| b).count(), n);
        }
    }

    #[test]
    fn erasing_restores_the_background() {
        let mut c = cfg();
        c.label_mode = LabelMode::Multi;
        let s = &generate_dataset(&c, 1, 4, Exec::Sequential).unwrap()[0];
        let a = s.objects[0].class;
        let b = s.objects[1].class;
        let without_a = s.erase(a);
        let without_both = {
            let mut t = s.clone();
            t.objects.retain(|o| o.class != a && o.class != b);
            render(&t, None)
        };
        // Pixels of object b are the only difference between the two images.
        let plane = s.size * s.size;
        let bb = s.objects[1].bbox;
        for y in 0..s.size {
            for x in 0..s.size {
                let inside = bb.contains_xy((x as f64 + 0.5) / s.size as f64, (y as f64 + 0.5) / s.size as f64);
                if !inside {
                    for ch in 0..3 {
                        let i = ch * plane + y * s.size + x;
                        assert_eq!(without_a[i], without_both[i]);
                    }
                }
            }
        }
        assert_ne!(without_a, s.image);
    }

    #[test]
    fn pixels_in_unit_range() {
        for s in generate_dataset(&cfg(), 50, 5, Exec::Sequential).unwrap() {
            assert!(s.image.iter().all(|p| (0.0..=1.0).contains(p)));
            assert_eq!(s.image.len(), 3 * 32 * 32);
        }
    }

    #[test]
    fn execution_strategy_does_not_change_data() {
        let a = generate_dataset(&cfg(), 40, 6, Exec::Sequential).unwrap();
        let b = generate_dataset(&cfg(), 40, 6, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_rho_rejected() {
        assert!(cfg().with_rho(1.2).validate().is_err());
    }
}
