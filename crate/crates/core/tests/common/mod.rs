//! Shared scene builders and independent geometric oracles.
#![allow(dead_code)]

use tabletop::fixtures;
use tabletop::geometry::{Pose, Vec3};
use tabletop::world::shape::{Axis, Composite, Solid};
use tabletop::world::{SceneObject, WorldState};

pub const HOME: [f64; 3] = [0.3, 0.0, 0.4];

pub fn world_of(layout: &[(&str, f64, f64, f64)]) -> WorldState {
    let mut w = WorldState::empty(0.0, Pose::new(HOME, [0.0; 3]));
    for (label, x, y, yaw) in layout {
        let o = fixtures::by_label(label, label, [*x, *y], *yaw).expect("known label");
        for other in &w.objects {
            let (a, b) = (o.world_aabb(), other.world_aabb());
            let apart = a.min.x > b.max.x || b.min.x > a.max.x || a.min.y > b.max.y || b.min.y > a.max.y;
            assert!(apart, "{label} overlaps {}", other.name);
        }
        w.objects.push(o);
    }
    w
}

fn yaw_rotate(o: &SceneObject, p: [f64; 3]) -> Vec3 {
    let (s, c) = o.pose.rpy[2].to_radians().sin_cos();
    let t = o.pose.position;
    Vec3::new(c * p[0] - s * p[1] + t[0], s * p[0] + c * p[1] + t[1], p[2] + t[2])
}

/// Volume-weighted mean of primitive centers. Valid for objects whose
/// primitives do not overlap, which holds for every catalog object built
/// from boxes and cylinders.
pub fn oracle_centroid(o: &SceneObject) -> Vec3 {
    let mut sum = Vec3::zeros();
    let mut vol = 0.0;
    for p in &o.shape {
        let v = match p.solid {
            Solid::Box { size } => size[0] * size[1] * size[2],
            Solid::Cylinder { radius, height, .. } => std::f64::consts::PI * radius * radius * height,
            Solid::Sphere { .. } => panic!("oracle covers boxes and cylinders only"),
        };
        sum += yaw_rotate(o, p.offset) * v;
        vol += v;
    }
    sum / vol
}

/// Surface samples of one primitive in the object frame.
fn samples(solid: &Solid, offset: [f64; 3]) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    match *solid {
        Solid::Box { size } => {
            for i in 0..8 {
                let sx = if i & 1 == 0 { -0.5 } else { 0.5 };
                let sy = if i & 2 == 0 { -0.5 } else { 0.5 };
                let sz = if i & 4 == 0 { -0.5 } else { 0.5 };
                out.push([offset[0] + sx * size[0], offset[1] + sy * size[1], offset[2] + sz * size[2]]);
            }
        }
        Solid::Cylinder { radius, height, axis } => {
            for k in 0..720 {
                let a = k as f64 / 720.0 * std::f64::consts::TAU;
                let (u, v) = (radius * a.cos(), radius * a.sin());
                for h in [-0.5 * height, 0.5 * height] {
                    let local = match axis {
                        Axis::X => [h, u, v],
                        Axis::Y => [u, h, v],
                        Axis::Z => [u, v, h],
                    };
                    out.push([offset[0] + local[0], offset[1] + local[1], offset[2] + local[2]]);
                }
            }
        }
        Solid::Sphere { radius } => {
            for k in 0..720 {
                let a = k as f64 / 720.0 * std::f64::consts::TAU;
                for j in 0..=36 {
                    let b = j as f64 / 36.0 * std::f64::consts::PI;
                    let r = radius * b.sin();
                    out.push([offset[0] + r * a.cos(), offset[1] + r * a.sin(), offset[2] + radius * b.cos()]);
                }
            }
        }
    }
    out
}

/// World-frame axis-aligned extents from dense surface samples.
pub fn oracle_extents(o: &SceneObject) -> [f64; 3] {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in &o.shape {
        for s in samples(&p.solid, p.offset) {
            let w = yaw_rotate(o, s);
            for k in 0..3 {
                lo[k] = lo[k].min(w[k]);
                hi[k] = hi[k].max(w[k]);
            }
        }
    }
    [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]]
}

/// World point in the object frame, for yaw-only poses.
pub fn to_local(o: &SceneObject, p: &Vec3) -> Vec3 {
    let (s, c) = o.pose.rpy[2].to_radians().sin_cos();
    let t = o.pose.position;
    let (x, y) = (p.x - t[0], p.y - t[1]);
    Vec3::new(c * x + s * y, -s * x + c * y, p.z - t[2])
}

/// What the mock endpoint does with one connection.
#[derive(Debug, Clone)]
pub enum Reply {
    Respond(u16, String),
    /// Read the request, then say nothing for this long.
    Stall(std::time::Duration),
}

/// A one-thread HTTP endpoint on localhost that answers connections with
/// `script` in order, repeating the last entry. Request bodies are kept.
pub struct MockServer {
    pub url: String,
    pub bodies: std::sync::Arc<std::sync::Mutex<Vec<String>>>,
}

impl MockServer {
    pub fn start(script: Vec<Reply>) -> Self {
        use std::io::{BufRead, BufReader, Read, Write};
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let bodies = std::sync::Arc::new(std::sync::Mutex::new(Vec::new()));
        let seen = bodies.clone();
        std::thread::spawn(move || {
            for (i, stream) in listener.incoming().enumerate() {
                let Ok(mut stream) = stream else { return };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap_or(0);
                    }
                }
                let mut body = vec![0; len];
                let _ = reader.read_exact(&mut body);
                seen.lock().unwrap().push(String::from_utf8_lossy(&body).into_owned());
                match script[i.min(script.len() - 1)].clone() {
                    Reply::Respond(status, text) => {
                        let head = format!(
                            "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
                            text.len()
                        );
                        let _ = stream.write_all(head.as_bytes());
                        let _ = stream.write_all(text.as_bytes());
                    }
                    Reply::Stall(d) => std::thread::sleep(d),
                }
            }
        });
        MockServer { url, bodies }
    }

    pub fn requests(&self) -> usize {
        self.bodies.lock().unwrap().len()
    }
}

pub fn chat_reply(content: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
}
