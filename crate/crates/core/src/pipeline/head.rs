use super::encoder::GridConfig;
use crate::error::{Error, Result};
use crate::random::{seeded, uniform_tensor};
use crate::tensor::sigmoid;
use crate::Tensor;

/// Class logit followed by seven box regressors.
pub const HEAD_OUTPUTS: usize = 8;

/// `(x, y, z, l, w, h, yaw)` in the ego frame.
pub type BoundingBox = [f64; 7];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub score: f64,
    pub class_id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectConfig {
    pub score_threshold: f64,
    pub nms_iou: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self { score_threshold: 0.25, nms_iou: 0.15 }
    }
}

/// Per-cell `1×1` head: `C×8` weights plus bias.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadWeights {
    pub w: Tensor,
    pub bias: Tensor,
}

impl HeadWeights {
    pub fn init(channels: usize, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let s = 1.0 / (channels as f64).sqrt();
        Self {
            w: uniform_tensor(&[channels, HEAD_OUTPUTS], -s, s, &mut rng),
            bias: uniform_tensor(&[HEAD_OUTPUTS], -0.1, 0.1, &mut rng),
        }
    }

    pub fn channels(&self) -> usize {
        self.w.shape()[0]
    }

    pub fn validate(&self) -> Result<()> {
        if self.w.rank() != 2 || self.w.shape()[1] != HEAD_OUTPUTS || self.bias.shape() != [HEAD_OUTPUTS] {
            return Err(Error::Validation(format!(
                "head expects C×{HEAD_OUTPUTS} weights and {HEAD_OUTPUTS} biases, got {:?} and {:?}",
                self.w.shape(),
                self.bias.shape()
            )));
        }
        Ok(())
    }
}

const LOG_SIZE_CLAMP: f64 = 20.0;

/// Runs the head on every cell of a `1×H×W×C` map and keeps cells whose
/// score clears the threshold. Offsets 1..2 are in cell units from the cell
/// center, 3 is absolute z, 4..6 are log sizes, 7 is yaw.
pub fn decode_head(
    features: &Tensor,
    head: &HeadWeights,
    grid: &GridConfig,
    score_threshold: f64,
) -> Result<Vec<Detection>> {
    head.validate()?;
    let (h, w, c) = (grid.height(), grid.width(), head.channels());
    if features.shape() != [1, h, w, c] {
        return Err(Error::dim("decode_head", features.shape(), &[1, h, w, c]));
    }
    let mut out = Vec::new();
    let mut o = [0.0; HEAD_OUTPUTS];
    for (cell, f) in features.data().chunks_exact(c).enumerate() {
        o.copy_from_slice(head.bias.data());
        for (k, &fv) in f.iter().enumerate() {
            for (ov, wv) in o.iter_mut().zip(head.w.outer(k)) {
                *ov += fv * wv;
            }
        }
        let score = sigmoid(o[0]);
        if score <= score_threshold {
            continue;
        }
        let (cx, cy) = grid.cell_center(cell / w, cell % w);
        let size = |v: f64| v.clamp(-LOG_SIZE_CLAMP, LOG_SIZE_CLAMP).exp();
        out.push(Detection {
            bbox: [
                cx + o[1] * grid.cell,
                cy + o[2] * grid.cell,
                o[3],
                size(o[4]),
                size(o[5]),
                size(o[6]),
                o[7],
            ],
            score,
            class_id: 0,
        });
    }
    Ok(out)
}

fn corners(b: &BoundingBox) -> [(f64, f64); 4] {
    let (s, c) = b[6].sin_cos();
    let (hl, hw) = (b[3] / 2.0, b[4] / 2.0);
    [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)].map(|(u, v)| (b[0] + c * u - s * v, b[1] + s * u + c * v))
}

fn polygon_area(p: &[(f64, f64)]) -> f64 {
    let n = p.len();
    0.5 * (0..n).map(|i| p[i].0 * p[(i + 1) % n].1 - p[(i + 1) % n].0 * p[i].1).sum::<f64>().abs()
}

/// Clips `subject` against the convex counter-clockwise polygon `clip`.
fn clip_convex(subject: &[(f64, f64)], clip: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = subject.to_vec();
    for i in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let side = |p: (f64, f64)| (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let (p, q) = (input[j], input[(j + 1) % input.len()]);
            let (sp, sq) = (side(p), side(q));
            if sp >= 0.0 {
                out.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                let t = sp / (sp - sq);
                out.push((p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)));
            }
        }
    }
    out
}

/// Intersection over union of the boxes' ground-plane footprints.
pub fn bev_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (pa, pb) = (corners(a), corners(b));
    let inter = polygon_area(&clip_convex(&pa, &pb));
    let union = a[3] * a[4] + b[3] * b[4] - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Greedy suppression in descending score order; ties keep the earlier
/// candidate.
pub fn nms(mut candidates: Vec<Detection>, iou_threshold: f64) -> Vec<Detection> {
    candidates.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut kept: Vec<Detection> = Vec::new();
    for d in candidates {
        if kept.iter().all(|k| bev_iou(&k.bbox, &d.bbox) <= iou_threshold) {
            kept.push(d);
        }
    }
    kept
}
