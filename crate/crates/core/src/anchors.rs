//! Per-level anchor grids in a feature-pyramid layout.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnchorConfig {
    pub strides: Vec<u32>,
    /// Anchor side is `scale * stride`.
    pub scale: f64,
    /// Height / width aspect ratios, one anchor per ratio per location.
    pub ratios: Vec<f64>,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        Self {
            strides: vec![8, 16, 32, 64, 128],
            scale: 8.0,
            ratios: vec![1.0],
        }
    }
}

impl AnchorConfig {
    pub fn with_strides(strides: &[u32]) -> Self {
        Self {
            strides: strides.to_vec(),
            ..Self::default()
        }
    }

    pub fn anchors_per_location(&self) -> usize {
        self.ratios.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.strides.is_empty() {
            return Err(Error::config("anchors.strides", "must not be empty"));
        }
        if self.strides[0] == 0 || self.strides.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config(
                "anchors.strides",
                "must be positive and strictly increasing",
            ));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::config("anchors.scale", "must be positive"));
        }
        if self.ratios.is_empty() || self.ratios.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::config("anchors.ratios", "must be non-empty and positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorLevel {
    pub stride: u32,
    pub grid_width: usize,
    pub grid_height: usize,
    /// Global indices of this level's anchors.
    pub range: Range<usize>,
}

/// Anchors of every level, stored flat and level-ordered.
///
/// Within a level the index runs over rows, then columns, then ratios:
/// `start + (row * grid_width + col) * num_ratios + ratio`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    levels: Vec<AnchorLevel>,
    boxes: Vec<BBox>,
    centers: Vec<Point>,
    num_ratios: usize,
}

impl AnchorSet {
    pub fn levels(&self) -> &[AnchorLevel] {
        &self.levels
    }

    pub fn boxes(&self) -> &[BBox] {
        &self.boxes
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn num_ratios(&self) -> usize {
        self.num_ratios
    }

    /// Global index of the anchor at `(level, col, row, ratio)`.
    pub fn flat_index(&self, level: usize, col: usize, row: usize, ratio: usize) -> Option<usize> {
        let lvl = self.levels.get(level)?;
        if col >= lvl.grid_width || row >= lvl.grid_height || ratio >= self.num_ratios {
            return None;
        }
        Some(lvl.range.start + (row * lvl.grid_width + col) * self.num_ratios + ratio)
    }

    /// Inverse of [`AnchorSet::flat_index`]: `(level, col, row, ratio)`.
    pub fn locate(&self, index: usize) -> Option<(usize, usize, usize, usize)> {
        let level = self.levels.iter().position(|l| l.range.contains(&index))?;
        let lvl = &self.levels[level];
        let local = index - lvl.range.start;
        let ratio = local % self.num_ratios;
        let cell = local / self.num_ratios;
        Some((level, cell % lvl.grid_width, cell / lvl.grid_width, ratio))
    }

    /// Builds a set from explicit per-level boxes. Used for hand-made scenes.
    pub fn from_level_boxes(levels: Vec<(u32, Vec<BBox>)>) -> Result<Self> {
        let mut out = AnchorSet {
            levels: Vec::with_capacity(levels.len()),
            boxes: Vec::new(),
            centers: Vec::new(),
            num_ratios: 1,
        };
        for (stride, boxes) in levels {
            if boxes.is_empty() {
                return Err(Error::arg("levels", "every level needs at least one anchor"));
            }
            let start = out.boxes.len();
            out.levels.push(AnchorLevel {
                stride,
                grid_width: boxes.len(),
                grid_height: 1,
                range: start..start + boxes.len(),
            });
            out.centers.extend(boxes.iter().map(BBox::center));
            out.boxes.extend(boxes);
        }
        Ok(out)
    }
}

pub fn generate_anchors(config: &AnchorConfig, image_width: u32, image_height: u32) -> Result<AnchorSet> {
    config.validate()?;
    if image_width == 0 || image_height == 0 {
        return Err(Error::arg(
            "image",
            format!("image size must be positive, got {image_width}x{image_height}"),
        ));
    }

    let num_ratios = config.anchors_per_location();
    let mut levels = Vec::with_capacity(config.strides.len());
    let mut boxes = Vec::new();
    let mut centers = Vec::new();
    for &stride in &config.strides {
        let gw = image_width.div_ceil(stride) as usize;
        let gh = image_height.div_ceil(stride) as usize;
        let s = f64::from(stride);
        let side = config.scale * s;
        let start = boxes.len();
        for row in 0..gh {
            for col in 0..gw {
                let cx = (col as f64 + 0.5) * s;
                let cy = (row as f64 + 0.5) * s;
                for &r in &config.ratios {
                    let root = r.sqrt();
                    boxes.push(BBox::from_center(cx, cy, side / root, side * root)?);
                    centers.push(Point::new(cx, cy));
                }
            }
        }
        levels.push(AnchorLevel {
            stride,
            grid_width: gw,
            grid_height: gh,
            range: start..boxes.len(),
        });
    }

    Ok(AnchorSet {
        levels,
        boxes,
        centers,
        num_ratios,
    })
}
