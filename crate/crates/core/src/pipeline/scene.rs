//! Plain-text scene description.
//!
//! ```text
//! # comment
//! name = crossing
//! point 1.0 2.0 0.5 0.3          # belongs to the ego (agent 0)
//! pose 2 1 0 0 10  0 1 0 0  0 0 1 0  0 0 0 1
//! point 0.0 0.0 0.0 0.9          # agent 2, in its own frame
//! ```
//!
//! `pose <agent_id> <16 floats, row-major>` opens an agent block; following
//! `point x y z intensity` lines belong to it. Points before the first pose
//! line belong to the ego. Agent 0 is the ego and its pose, if given, must be
//! the identity. Each agent id may appear once.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::geometry::{PointCloud, Pose};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SceneAgent {
    pub id: u32,
    pub pose: Pose,
    pub cloud: PointCloud,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scene {
    pub ego: PointCloud,
    /// Ascending by id.
    pub cavs: Vec<SceneAgent>,
    pub params: BTreeMap<String, String>,
}

impl Scene {
    pub fn cav_inputs(&self) -> Vec<(PointCloud, Pose)> {
        self.cavs.iter().map(|a| (a.cloud.clone(), a.pose)).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.params {
            writeln!(s, "{k} = {v}").unwrap();
        }
        let write_points = |s: &mut String, p: &PointCloud| {
            for q in p.points() {
                writeln!(s, "point {:?} {:?} {:?} {:?}", q[0], q[1], q[2], q[3]).unwrap();
            }
        };
        write_points(&mut s, &self.ego);
        for a in &self.cavs {
            let m: Vec<String> = a.pose.row_major().iter().map(|v| format!("{v:?}")).collect();
            writeln!(s, "pose {} {}", a.id, m.join(" ")).unwrap();
            write_points(&mut s, &a.cloud);
        }
        s
    }
}

fn floats(line: usize, fields: &[&str]) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse { line, reason: format!("expected a finite number, got {f:?}") })
        })
        .collect()
}

pub fn parse_scene(text: &str) -> Result<Scene> {
    let mut params = BTreeMap::new();
    let mut blocks: BTreeMap<u32, (Pose, Vec<[f64; 4]>)> = BTreeMap::new();
    blocks.insert(0, (Pose::identity(), Vec::new()));
    let mut current = 0u32;
    let mut seen_ego_pose = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        match fields[0] {
            "point" => {
                if fields.len() != 5 {
                    return Err(Error::Parse { line, reason: format!("point needs 4 values, got {}", fields.len() - 1) });
                }
                let v = floats(line, &fields[1..])?;
                blocks.get_mut(&current).unwrap().1.push([v[0], v[1], v[2], v[3]]);
            }
            "pose" => {
                if fields.len() != 18 {
                    return Err(Error::Parse { line, reason: format!("pose needs an id and 16 values, got {} fields", fields.len() - 1) });
                }
                let id: u32 = fields[1]
                    .parse()
                    .map_err(|_| Error::Parse { line, reason: format!("bad agent id {:?}", fields[1]) })?;
                let pose = Pose::from_row_major(&floats(line, &fields[2..])?)
                    .map_err(|e| Error::Parse { line, reason: e.to_string() })?;
                if id == 0 {
                    if seen_ego_pose || !pose.is_identity() {
                        return Err(Error::Parse { line, reason: "agent 0 is the ego; its pose must be given once, as the identity".into() });
                    }
                    seen_ego_pose = true;
                } else if let std::collections::btree_map::Entry::Vacant(slot) = blocks.entry(id) {
                    slot.insert((pose, Vec::new()));
                } else {
                    return Err(Error::Parse { line, reason: format!("agent {id} declared twice") });
                }
                current = id;
            }
            _ if content.contains('=') => {
                let (k, v) = content.split_once('=').unwrap();
                let k = k.trim();
                if k.is_empty() {
                    return Err(Error::Parse { line, reason: "empty key".into() });
                }
                params.insert(k.to_string(), v.trim().to_string());
            }
            other => return Err(Error::Parse { line, reason: format!("unknown directive {other:?}") }),
        }
    }
    let (_, ego_points) = blocks.remove(&0).unwrap();
    let cavs = blocks
        .into_iter()
        .map(|(id, (pose, pts))| Ok(SceneAgent { id, pose, cloud: PointCloud::new(pts)? }))
        .collect::<Result<_>>()?;
    Ok(Scene { ego: PointCloud::new(ego_points)?, cavs, params })
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    parse_scene(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# two agents
name = crossing
point 1 2 0.5 0.3
pose 2 1 0 0 10  0 1 0 0  0 0 1 0  0 0 0 1
point 0 0 0 0.9   # in agent 2's frame
point 1 1 1 0.1
pose 1 1 0 0 0 0 1 0 0 0 0 1 0 0 0 0 1
";

    #[test]
    fn parses_sample() {
        let s = parse_scene(SAMPLE).unwrap();
        assert_eq!(s.params["name"], "crossing");
        assert_eq!(s.ego.points(), &[[1.0, 2.0, 0.5, 0.3]]);
        assert_eq!(s.cavs.len(), 2);
        assert_eq!(s.cavs[0].id, 1);
        assert!(s.cavs[0].cloud.is_empty());
        assert_eq!(s.cavs[1].id, 2);
        assert_eq!(s.cavs[1].cloud.len(), 2);
        assert_eq!(s.cavs[1].pose.apply([0.0, 0.0, 0.0]), [10.0, 0.0, 0.0]);
    }

    #[test]
    fn round_trips_through_text() {
        let s = parse_scene(SAMPLE).unwrap();
        assert_eq!(parse_scene(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("point 1 2 3\n", 1),
            ("\npoint 1 2 3 x\n", 2),
            ("pose 1 2 0 0 0 0 1 0 0 0 0 1 0 0 0 0 1\n", 1),
            ("pose 0 1 0 0 5 0 1 0 0 0 0 1 0 0 0 0 1\n", 1),
            ("pose 1 1 0 0 0 0 1 0 0 0 0 1 0 0 0 0 1\npose 1 1 0 0 0 0 1 0 0 0 0 1 0 0 0 0 1\n", 2),
            ("jump 1\n", 1),
        ];
        for (text, want) in cases {
            match parse_scene(text) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, want, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn empty_scene() {
        let s = parse_scene("").unwrap();
        assert!(s.ego.is_empty() && s.cavs.is_empty());
    }
}
