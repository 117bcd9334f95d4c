use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Aspect range (height / width, or its inverse) used for slender objects.
pub const SLENDER_ASPECT: [f64; 2] = [3.5, 6.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSpec {
    pub image_width: u32,
    pub image_height: u32,
    pub num_gts_range: [usize; 2],
    /// Side length `sqrt(w * h)`, drawn log-uniformly.
    pub size_range: [f64; 2],
    /// Height / width, drawn log-uniformly.
    pub aspect_range: [f64; 2],
    pub num_classes: usize,
    /// Probability that a ground truth gets an aspect beyond 3:1.
    pub slender_fraction: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            image_width: 256,
            image_height: 256,
            num_gts_range: [1, 4],
            size_range: [24.0, 128.0],
            aspect_range: [0.5, 2.0],
            num_classes: 3,
            slender_fraction: 0.2,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.image_width == 0 || self.image_height == 0 {
            return Err(Error::config("scene.image_width", "image size must be positive"));
        }
        let [lo, hi] = self.num_gts_range;
        if lo > hi {
            return Err(Error::config(
                "scene.num_gts_range",
                format!("min {lo} exceeds max {hi}"),
            ));
        }
        let [smin, smax] = self.size_range;
        if !(smin > 0.0 && smin <= smax && smax.is_finite()) {
            return Err(Error::config("scene.size_range", "need 0 < min <= max"));
        }
        let fit = f64::from(self.image_width.min(self.image_height));
        if smin > fit {
            return Err(Error::config(
                "scene.size_range",
                format!(
                    "minimum size {smin} does not fit a {}x{} image",
                    self.image_width, self.image_height
                ),
            ));
        }
        let [amin, amax] = self.aspect_range;
        if !(amin > 0.0 && amin <= amax && amax.is_finite()) {
            return Err(Error::config("scene.aspect_range", "need 0 < min <= max"));
        }
        if self.num_classes == 0 {
            return Err(Error::config("scene.num_classes", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.slender_fraction) {
            return Err(Error::config("scene.slender_fraction", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    #[serde(rename = "box")]
    pub bbox: BBox,
    #[serde(rename = "class")]
    pub class_id: usize,
}

pub fn generate_scene(spec: &SceneSpec) -> Result<Vec<GroundTruth>> {
    generate_scene_stream(spec, 0)
}

/// `count` independent scenes; scene `i` comes from RNG stream `i`.
pub fn generate_scenes(spec: &SceneSpec, count: usize) -> Result<Vec<Vec<GroundTruth>>> {
    (0..count as u64).map(|i| generate_scene_stream(spec, i)).collect()
}

fn log_uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        return lo;
    }
    rng.gen_range(lo.ln()..hi.ln()).exp()
}

fn generate_scene_stream(spec: &SceneSpec, stream: u64) -> Result<Vec<GroundTruth>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);

    let (iw, ih) = (f64::from(spec.image_width), f64::from(spec.image_height));
    let count = rng.gen_range(spec.num_gts_range[0]..=spec.num_gts_range[1]);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let side = log_uniform(&mut rng, spec.size_range);
        let slender = rng.gen_bool(spec.slender_fraction);
        let aspect = if slender {
            let a = log_uniform(&mut rng, SLENDER_ASPECT);
            if rng.gen_bool(0.5) {
                a
            } else {
                1.0 / a
            }
        } else {
            log_uniform(&mut rng, spec.aspect_range)
        };
        let mut w = side / aspect.sqrt();
        let mut h = side * aspect.sqrt();
        // shrink uniformly until the box fits, keeping its aspect
        let shrink = (iw / w).min(ih / h).min(1.0);
        w *= shrink;
        h *= shrink;
        let x1 = if iw > w { rng.gen_range(0.0..iw - w) } else { 0.0 };
        let y1 = if ih > h { rng.gen_range(0.0..ih - h) } else { 0.0 };
        let bbox = BBox::new(x1, y1, (x1 + w).min(iw), (y1 + h).min(ih))?;
        let class_id = rng.gen_range(0..spec.num_classes);
        out.push(GroundTruth { bbox, class_id });
    }
    Ok(out)
}

/// Hex SHA-256 of the scenes' JSON form. Equal scenes give equal hashes.
pub fn scene_hash(scenes: &[Vec<GroundTruth>]) -> String {
    let bytes = serde_json::to_vec(scenes).expect("ground truths always serialize");
    hex::encode(Sha256::digest(&bytes))
}
