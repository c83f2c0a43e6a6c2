use rayon::prelude::*;

use super::encoder::{init_embedding, pillar_encode_toy, GridConfig, STATS};
use super::geometry::{transform_points, PointCloud, Pose};
use super::head::{decode_head, nms, DetectConfig, Detection, HeadWeights, HEAD_OUTPUTS};
use crate::error::{Error, Result};
use crate::fusion::{comamba_fusion_forward_with, Branches, FusionWeights};
use crate::Tensor;

/// Everything the pipeline needs besides the point clouds. The same toy
/// encoder embedding serves every agent.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorWeights {
    pub grid: GridConfig,
    pub embed: Tensor,
    pub fusion: FusionWeights,
    pub head: HeadWeights,
    pub config: DetectConfig,
    pub branches: Branches,
}

/// Occupancy logit bias: empty cells score `sigmoid(−4) ≈ 0.018`.
const EMPTY_LOGIT: f64 = -4.0;
/// Logit margin gained by a cell occupied in at least one agent.
const OCCUPIED_MARGIN: f64 = 8.0;
const CAR_SIZE: [f64; 3] = [4.5, 1.8, 1.6];
const CAR_Z: f64 = 0.8;

impl DetectorWeights {
    /// Seeded random weights throughout.
    pub fn init(grid: GridConfig, state_size: usize, seed: u64) -> Result<Self> {
        grid.validate()?;
        Ok(Self {
            grid,
            embed: init_embedding(grid.channels, seed),
            fusion: FusionWeights::init(grid.channels, state_size, seed.wrapping_add(1))?,
            head: HeadWeights::init(grid.channels, seed.wrapping_add(2)),
            config: DetectConfig::default(),
            branches: Branches::Sequential,
        })
    }

    /// Hand-set weights that turn the pipeline into an occupancy detector.
    ///
    /// The embedding writes `(+count, −count)` into channels 0 and 1, so after
    /// layer norm every occupied cell carries `(+s, −s, 0, …)` with
    /// `s = √(C/2)` and empty cells stay zero. The fusion skip path carries
    /// that pattern to the pooling stage unchanged; `context_gain` scales the
    /// seeded CSS2D branch that is added on top. Any nonzero gain lets the
    /// branch light up empty cells after the pooling layer norm, so only 0
    /// keeps the detector a pure occupancy test. Pooling is
    /// the identity projection followed by max + mean over agents, and the
    /// head reads channel 0 minus channel 1, so a cell seen by more agents
    /// scores higher. Boxes are car-sized and centered on the cell.
    pub fn occupancy(grid: GridConfig, state_size: usize, seed: u64, context_gain: f64) -> Result<Self> {
        grid.validate()?;
        let c = grid.channels;
        if c < 2 {
            return Err(Error::Domain("occupancy weights need at least 2 channels".into()));
        }
        let mut embed = Tensor::zeros(&[STATS, c]);
        embed.set(&[0, 0], 1.0);
        embed.set(&[0, 1], -1.0);

        let mut fusion = FusionWeights::init(c, state_size, seed)?;
        fusion.ln_in_gamma = Tensor::filled(&[c], 1.0);
        fusion.ln_in_beta = Tensor::zeros(&[c]);
        fusion.proj_out = fusion.proj_out.scale(context_gain);
        fusion.proj_out_bias = Tensor::zeros(&[c]);
        fusion.ln_mid_beta = Tensor::zeros(&[c]);
        fusion.gpm_gamma = Tensor::filled(&[c], 1.0);
        fusion.gpm_beta = Tensor::zeros(&[c]);
        fusion.gpm_w = Tensor::from_fn(&[c, c], |i| if i / c == i % c { 1.0 } else { 0.0 });
        fusion.gpm_bias = Tensor::zeros(&[c]);

        let s = (c as f64 / 2.0).sqrt();
        let mut head = HeadWeights { w: Tensor::zeros(&[c, HEAD_OUTPUTS]), bias: Tensor::zeros(&[HEAD_OUTPUTS]) };
        head.w.set(&[0, 0], OCCUPIED_MARGIN / (2.0 * s));
        head.w.set(&[1, 0], -OCCUPIED_MARGIN / (2.0 * s));
        head.bias.data_mut().copy_from_slice(&[
            EMPTY_LOGIT,
            0.0,
            0.0,
            CAR_Z,
            CAR_SIZE[0].ln(),
            CAR_SIZE[1].ln(),
            CAR_SIZE[2].ln(),
            0.0,
        ]);
        Ok(Self {
            grid,
            embed,
            fusion,
            head,
            config: DetectConfig::default(),
            branches: Branches::Sequential,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.fusion.validate()?;
        self.head.validate()?;
        let c = self.grid.channels;
        if self.embed.shape() != [STATS, c] || self.fusion.channels() != c || self.head.channels() != c {
            return Err(Error::Validation(format!(
                "detector weights disagree on channel count: grid {c}, embed {:?}, fusion {}, head {}",
                self.embed.shape(),
                self.fusion.channels(),
                self.head.channels()
            )));
        }
        Ok(())
    }
}

/// Fused `1×H×W×C` map for the ego cloud and the received clouds, each given
/// with its pose into the ego frame.
pub fn fused_features(p_ego: &PointCloud, p_cavs: &[(PointCloud, Pose)], w: &DetectorWeights) -> Result<Tensor> {
    w.validate()?;
    let ego = pillar_encode_toy(p_ego, &w.grid, &w.embed)?;
    let cavs: Vec<Tensor> = p_cavs
        .par_iter()
        .map(|(p, pose)| pillar_encode_toy(&transform_points(p, pose), &w.grid, &w.embed))
        .collect::<Result<_>>()?;
    let stacked = if cavs.is_empty() {
        None
    } else {
        let mut shape = ego.shape().to_vec();
        shape[0] = cavs.len();
        let mut data = Vec::with_capacity(cavs.len() * ego.numel());
        for t in &cavs {
            data.extend_from_slice(t.data());
        }
        drop(cavs);
        Some(Tensor::new(&shape, data)?)
    };
    comamba_fusion_forward_with(&ego, stacked.as_ref(), &w.fusion, w.branches)
}

/// Full cooperative pipeline: project, encode, fuse, score, suppress.
/// Detections come back in descending score order.
pub fn detect(p_ego: &PointCloud, p_cavs: &[(PointCloud, Pose)], w: &DetectorWeights) -> Result<Vec<Detection>> {
    let fused = fused_features(p_ego, p_cavs, w)?;
    let candidates = decode_head(&fused, &w.head, &w.grid, w.config.score_threshold)?;
    Ok(nms(candidates, w.config.nms_iou))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::sigmoid;
    use rand::Rng;

    fn grid() -> GridConfig {
        GridConfig { x_range: (-8.0, 8.0), y_range: (-4.0, 4.0), cell: 0.8, channels: 8 }
    }

    fn cluster(cx: f64, cy: f64, n: usize, spread: f64, seed: u64) -> Vec<[f64; 4]> {
        let mut rng = crate::random::seeded(seed);
        (0..n)
            .map(|_| {
                [
                    cx + rng.gen_range(-spread..spread),
                    cy + rng.gen_range(-spread..spread),
                    rng.gen_range(0.0..1.5),
                    rng.gen(),
                ]
            })
            .collect()
    }

    #[test]
    fn no_points_no_detections() {
        let w = DetectorWeights::init(grid(), 4, 1).unwrap();
        let mut w_high = w.clone();
        w_high.config.score_threshold = 0.99;
        assert!(detect(&PointCloud::empty(), &[], &w_high).unwrap().is_empty());
        let occ = DetectorWeights::occupancy(grid(), 4, 1, 0.0).unwrap();
        assert!(occ.config.score_threshold > sigmoid(EMPTY_LOGIT));
        let empty_cav = (PointCloud::empty(), Pose::translation([1.0, 0.0, 0.0]));
        assert!(detect(&PointCloud::empty(), &[empty_cav], &occ).unwrap().is_empty());
    }

    #[test]
    fn single_cluster_single_detection() {
        let g = grid();
        let w = DetectorWeights::occupancy(g, 4, 3, 0.0).unwrap();
        let (row, col) = (2, 13);
        let (cx, cy) = g.cell_center(row, col);
        let ego = PointCloud::new(cluster(cx, cy, 40, 0.35, 5)).unwrap();
        let dets = detect(&ego, &[], &w).unwrap();
        assert_eq!(dets.len(), 1);
        assert_eq!(g.cell_of(dets[0].bbox[0], dets[0].bbox[1]), Some((row, col)));
        assert!(dets[0].score > 0.95);
    }

    #[test]
    fn cav_cluster_is_projected() {
        let g = grid();
        let w = DetectorWeights::occupancy(g, 4, 3, 0.0).unwrap();
        let (cx, cy) = g.cell_center(6, 3);
        // CAV sits at (5, 1) facing +y; its local frame sees the cluster elsewhere
        let pose = Pose::from_yaw_translation(std::f64::consts::FRAC_PI_2, [5.0, 1.0, 0.0]);
        let local = crate::pipeline::transform_points(&PointCloud::new(cluster(cx, cy, 30, 0.3, 8)).unwrap(), &pose.inverse());
        let dets = detect(&PointCloud::empty(), &[(local, pose)], &w).unwrap();
        assert_eq!(dets.len(), 1);
        assert_eq!(g.cell_of(dets[0].bbox[0], dets[0].bbox[1]), Some((6, 3)));
    }

    #[test]
    fn shared_evidence_scores_higher() {
        let g = grid();
        let w = DetectorWeights::occupancy(g, 4, 3, 0.0).unwrap();
        let (cx, cy) = g.cell_center(1, 1);
        let seen = PointCloud::new(cluster(cx, cy, 20, 0.3, 1)).unwrap();
        let one = detect(&seen, &[(PointCloud::empty(), Pose::identity())], &w).unwrap();
        let both = detect(&seen, &[(seen.clone(), Pose::identity())], &w).unwrap();
        assert!(both[0].score > one[0].score);
    }

    #[test]
    fn deterministic() {
        let g = grid();
        let w = DetectorWeights::occupancy(g, 4, 3, 0.3).unwrap();
        let ego = PointCloud::new(cluster(1.0, 1.0, 200, 3.0, 2)).unwrap();
        let cav = (PointCloud::new(cluster(-2.0, 0.0, 200, 3.0, 4)).unwrap(), Pose::from_yaw_translation(0.2, [1.0, 0.5, 0.0]));
        let a = detect(&ego, std::slice::from_ref(&cav), &w).unwrap();
        let mut wp = w.clone();
        wp.branches = Branches::Parallel;
        let b = detect(&ego, &[cav], &wp).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b);
    }

    #[test]
    fn channel_mismatch_rejected() {
        let mut w = DetectorWeights::init(grid(), 4, 1).unwrap();
        w.embed = init_embedding(5, 1);
        assert!(detect(&PointCloud::empty(), &[], &w).is_err());
    }
}
