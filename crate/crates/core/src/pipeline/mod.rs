//! Point clouds to detections: projection into the ego frame, a toy pillar
//! encoder, cooperative fusion, a per-cell detection head with rotated BEV
//! suppression, and the two training losses.

mod detect;
mod encoder;
mod geometry;
mod head;
mod loss;
mod scene;

pub use detect::{detect, fused_features, DetectorWeights};
pub use encoder::{init_embedding, pillar_encode_toy, pillar_statistics, GridConfig, STATS};
pub use geometry::{transform_points, PointCloud, Pose};
pub use head::{bev_iou, decode_head, nms, BoundingBox, DetectConfig, Detection, HeadWeights, HEAD_OUTPUTS};
pub use loss::{focal_loss, smooth_l1, FOCAL_ALPHA, FOCAL_GAMMA, SMOOTH_L1_BETA};
pub use scene::{load_scene, parse_scene, Scene, SceneAgent};
