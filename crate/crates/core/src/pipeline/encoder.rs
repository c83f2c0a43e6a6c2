use super::geometry::PointCloud;
use crate::error::{Error, Result};
use crate::random::{seeded, uniform_tensor};
use crate::Tensor;

/// Per-cell statistics fed to the embedding: point count, mean z, mean
/// intensity, mean x/y offset from the cell center.
pub const STATS: usize = 5;

/// Bird's-eye-view raster over the driving plane. Rows follow `y`, columns
/// follow `x`; both ranges are half-open.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub cell: f64,
    pub channels: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { x_range: (-140.0, 140.0), y_range: (-40.0, 40.0), cell: 0.8, channels: 64 }
    }
}

fn cells_along(span: f64, cell: f64) -> usize {
    let n = span / cell;
    let r = n.round();
    // 280 / 0.8 is not exactly 350 in binary
    if (n - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        n.ceil() as usize
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        let (x0, x1) = self.x_range;
        let (y0, y1) = self.y_range;
        if ![x0, x1, y0, y1, self.cell].iter().all(|v| v.is_finite()) {
            return Err(Error::Validation("grid bounds must be finite".into()));
        }
        if x1 <= x0 || y1 <= y0 {
            return Err(Error::Validation(format!("empty grid range x={:?} y={:?}", self.x_range, self.y_range)));
        }
        if self.cell <= 0.0 {
            return Err(Error::Validation(format!("cell size must be positive, got {}", self.cell)));
        }
        if self.channels == 0 {
            return Err(Error::Validation("grid needs at least one channel".into()));
        }
        Ok(())
    }

    pub fn height(&self) -> usize {
        cells_along(self.y_range.1 - self.y_range.0, self.cell)
    }

    pub fn width(&self) -> usize {
        cells_along(self.x_range.1 - self.x_range.0, self.cell)
    }

    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (x0, x1) = self.x_range;
        let (y0, y1) = self.y_range;
        if !(x0..x1).contains(&x) || !(y0..y1).contains(&y) {
            return None;
        }
        let col = (((x - x0) / self.cell).floor() as usize).min(self.width() - 1);
        let row = (((y - y0) / self.cell).floor() as usize).min(self.height() - 1);
        Some((row, col))
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.x_range.0 + (col as f64 + 0.5) * self.cell,
            self.y_range.0 + (row as f64 + 0.5) * self.cell,
        )
    }

    pub fn in_range_count(&self, p: &PointCloud) -> usize {
        p.points().iter().filter(|q| self.cell_of(q[0], q[1]).is_some()).count()
    }
}

/// `STATS×C` embedding, seeded.
pub fn init_embedding(channels: usize, seed: u64) -> Tensor {
    uniform_tensor(&[STATS, channels], -1.0, 1.0, &mut seeded(seed))
}

/// Raw per-cell statistics, `H×W×STATS`. Empty cells are all zero.
pub fn pillar_statistics(p: &PointCloud, g: &GridConfig) -> Result<Tensor> {
    g.validate()?;
    let (h, w) = (g.height(), g.width());
    let mut acc = vec![[0.0f64; STATS]; h * w];
    for &[x, y, z, intensity] in p.points() {
        let Some((row, col)) = g.cell_of(x, y) else { continue };
        let (cx, cy) = g.cell_center(row, col);
        let a = &mut acc[row * w + col];
        a[0] += 1.0;
        a[1] += z;
        a[2] += intensity;
        a[3] += x - cx;
        a[4] += y - cy;
    }
    let mut out = Tensor::zeros(&[h, w, STATS]);
    for (dst, a) in out.data_mut().chunks_exact_mut(STATS).zip(&acc) {
        if a[0] > 0.0 {
            dst[0] = a[0];
            for k in 1..STATS {
                dst[k] = a[k] / a[0];
            }
        }
    }
    Ok(out)
}

/// Bins points into pillars and embeds each cell's statistics linearly
/// (`stats · w_embed`, no bias). Out-of-range points are dropped.
pub fn pillar_encode_toy(p: &PointCloud, g: &GridConfig, w_embed: &Tensor) -> Result<Tensor> {
    if w_embed.shape() != [STATS, g.channels] {
        return Err(Error::dim("pillar_encode_toy", &[STATS, g.channels], w_embed.shape()));
    }
    let stats = pillar_statistics(p, g)?;
    let (h, w, c) = (g.height(), g.width(), g.channels);
    let mut out = Tensor::zeros(&[1, h, w, c]);
    for (dst, s) in out.data_mut().chunks_exact_mut(c).zip(stats.data().chunks_exact(STATS)) {
        if s[0] == 0.0 {
            continue;
        }
        for (k, &sv) in s.iter().enumerate() {
            for (o, &wv) in dst.iter_mut().zip(w_embed.outer(k)) {
                *o += sv * wv;
            }
        }
    }
    Ok(out)
}
