use crate::error::{Error, Result};

/// LiDAR returns `(x, y, z, intensity)` in meters. May be empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<[f64; 4]>,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 4]>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::Validation(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self { points })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 4]] {
        &self.points
    }

    pub fn into_points(self) -> Vec<[f64; 4]> {
        self.points
    }
}

const RIGID_TOL: f64 = 1e-9;

/// Homogeneous rigid transform mapping an agent's frame into the ego frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    m: [[f64; 4]; 4],
}

impl Pose {
    pub fn new(m: [[f64; 4]; 4]) -> Result<Self> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Validation("pose has non-finite entries".into()));
        }
        if m[3] != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::Validation(format!("pose last row must be [0,0,0,1], got {:?}", m[3])));
        }
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| m[k][i] * m[k][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > RIGID_TOL {
                    return Err(Error::Validation(format!(
                        "pose rotation is not orthonormal: (RᵀR)[{i}][{j}] = {dot}"
                    )));
                }
            }
        }
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        if det <= 0.0 {
            return Err(Error::Validation(format!("pose rotation has det {det}, expected +1")));
        }
        Ok(Self { m })
    }

    /// Sixteen values, row-major.
    pub fn from_row_major(v: &[f64]) -> Result<Self> {
        if v.len() != 16 {
            return Err(Error::Validation(format!("pose needs 16 values, got {}", v.len())));
        }
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row.copy_from_slice(&v[4 * i..4 * i + 4]);
        }
        Self::new(m)
    }

    pub fn identity() -> Self {
        Self::translation([0.0; 3])
    }

    pub fn translation(t: [f64; 3]) -> Self {
        Self::from_yaw_translation(0.0, t)
    }

    /// Rotation about +z by `yaw` radians followed by translation `t`.
    pub fn from_yaw_translation(yaw: f64, t: [f64; 3]) -> Self {
        let (s, c) = yaw.sin_cos();
        Self {
            m: [
                [c, -s, 0.0, t[0]],
                [s, c, 0.0, t[1]],
                [0.0, 0.0, 1.0, t[2]],
                [0.0, 0.0, 0.0, 1.0],
            ],
        }
    }

    pub fn matrix(&self) -> &[[f64; 4]; 4] {
        &self.m
    }

    pub fn row_major(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for (i, row) in self.m.iter().enumerate() {
            out[4 * i..4 * i + 4].copy_from_slice(row);
        }
        out
    }

    /// `[Rᵀ, −Rᵀt]`
    pub fn inverse(&self) -> Self {
        let m = &self.m;
        let mut inv = [[0.0; 4]; 4];
        for i in 0..3 {
            for j in 0..3 {
                inv[i][j] = m[j][i];
            }
            inv[i][3] = -(0..3).map(|k| m[k][i] * m[k][3]).sum::<f64>();
        }
        inv[3][3] = 1.0;
        Self { m: inv }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Pose) -> Self {
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = (0..4).map(|k| self.m[i][k] * other.m[k][j]).sum();
            }
        }
        Self { m: out }
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let m = &self.m;
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = m[i][0] * p[0] + m[i][1] * p[1] + m[i][2] * p[2] + m[i][3];
        }
        out
    }

    pub fn is_identity(&self) -> bool {
        self.m == Self::identity().m
    }
}

/// Maps every point through the pose; intensity is carried unchanged.
pub fn transform_points(p: &PointCloud, pose: &Pose) -> PointCloud {
    PointCloud {
        points: p
            .points
            .iter()
            .map(|&[x, y, z, i]| {
                let [x, y, z] = pose.apply([x, y, z]);
                [x, y, z, i]
            })
            .collect(),
    }
}
