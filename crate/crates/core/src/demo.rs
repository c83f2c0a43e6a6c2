//! Seeded synthetic traffic scene run through the whole detection pipeline.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::Result;
use crate::pipeline::{detect, transform_points, DetectorWeights, GridConfig, PointCloud, Pose, Scene, SceneAgent};
use crate::random::seeded;

pub const DEMO_GRID: GridConfig = GridConfig { x_range: (-40.0, 40.0), y_range: (-20.0, 20.0), cell: 0.8, channels: 16 };
pub const DEMO_STATE_SIZE: usize = 8;
const CARS: usize = 5;
const SENSOR_RANGE: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Car {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

fn car_surface_points(car: &Car, n: usize, rng: &mut impl Rng) -> Vec<[f64; 4]> {
    let (s, c) = car.yaw.sin_cos();
    (0..n)
        .map(|_| {
            let (u, v) = (rng.gen_range(-2.25..2.25), rng.gen_range(-0.9..0.9));
            [car.x + c * u - s * v, car.y + s * u + c * v, rng.gen_range(0.2..1.5), rng.gen_range(0.1..0.9)]
        })
        .collect()
}

/// Cars observed by the ego and `cavs` connected vehicles. Each agent sees
/// the cars within sensor range, with fewer returns from farther cars, and
/// reports them in its own frame.
pub fn synthetic_scene(seed: u64, cavs: usize) -> (Scene, Vec<Car>) {
    let mut rng = seeded(seed);
    let cars: Vec<Car> = (0..CARS)
        .map(|_| Car { x: rng.gen_range(-35.0..35.0), y: rng.gen_range(-16.0..16.0), yaw: rng.gen_range(-3.1..3.1) })
        .collect();
    let mut poses = vec![Pose::identity()];
    for _ in 0..cavs {
        poses.push(Pose::from_yaw_translation(
            rng.gen_range(-3.1..3.1),
            [rng.gen_range(-30.0..30.0), rng.gen_range(-15.0..15.0), 0.0],
        ));
    }
    let mut clouds = Vec::with_capacity(poses.len());
    for pose in &poses {
        let origin = pose.apply([0.0; 3]);
        let mut pts = Vec::new();
        for car in &cars {
            let dist = (car.x - origin[0]).hypot(car.y - origin[1]);
            if dist <= SENSOR_RANGE {
                let n = (600.0 / dist.max(1.0)).clamp(8.0, 150.0) as usize;
                pts.extend(car_surface_points(car, n, &mut rng));
            }
        }
        let in_ego = PointCloud::new(pts).expect("finite by construction");
        clouds.push(transform_points(&in_ego, &pose.inverse()));
    }
    let mut clouds = clouds.into_iter();
    let ego = clouds.next().unwrap();
    let cav_agents = clouds
        .zip(&poses[1..])
        .enumerate()
        .map(|(i, (cloud, &pose))| SceneAgent { id: i as u32 + 1, pose, cloud })
        .collect();
    let mut scene = Scene { ego, cavs: cav_agents, ..Default::default() };
    scene.params.insert("seed".into(), seed.to_string());
    (scene, cars)
}

/// Occupancy weights with the CSS2D branch computed but not added: the
/// pooling layer norm would rescale any nonzero branch output on an empty
/// cell to unit size.
pub fn demo_weights(seed: u64) -> Result<DetectorWeights> {
    DetectorWeights::occupancy(DEMO_GRID, DEMO_STATE_SIZE, seed, 0.0)
}

/// Runs detection on a scene and renders a report. `cars`, when known, are
/// listed as ground truth.
pub fn render_scene(scene: &Scene, cars: Option<&[Car]>, weights: &DetectorWeights) -> Result<String> {
    let dets = detect(&scene.ego, &scene.cav_inputs(), weights)?;
    let g = &weights.grid;
    let mut s = String::new();
    writeln!(s, "agents: {} (ego + {} connected)", scene.cavs.len() + 1, scene.cavs.len()).unwrap();
    writeln!(s, "points: ego={}", scene.ego.len()).unwrap();
    for a in &scene.cavs {
        let t = a.pose.apply([0.0; 3]);
        writeln!(s, "points: agent{}={} at ({:.2}, {:.2})", a.id, a.cloud.len(), t[0], t[1]).unwrap();
    }
    writeln!(s, "grid: {}x{} cells of {} m, C={}", g.width(), g.height(), g.cell, g.channels).unwrap();
    if let Some(cars) = cars {
        writeln!(s, "ground truth: {} cars", cars.len()).unwrap();
        for c in cars {
            writeln!(s, "  car x={:.3} y={:.3} yaw={:.3}", c.x, c.y, c.yaw).unwrap();
        }
    }
    writeln!(s, "detections: {}", dets.len()).unwrap();
    for (i, d) in dets.iter().enumerate() {
        let b = &d.bbox;
        writeln!(
            s,
            "  #{i} score={:.4} class={} x={:.3} y={:.3} z={:.3} l={:.3} w={:.3} h={:.3} yaw={:.3}",
            d.score, d.class_id, b[0], b[1], b[2], b[3], b[4], b[5], b[6]
        )
        .unwrap();
    }
    Ok(s)
}

pub fn run_demo(seed: u64, cavs: usize) -> Result<String> {
    let (scene, cars) = synthetic_scene(seed, cavs);
    let mut out = format!("demo seed={seed}\n");
    out.push_str(&render_scene(&scene, Some(&cars), &demo_weights(seed)?)?);
    Ok(out)
}
