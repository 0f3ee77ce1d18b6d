use std::collections::BTreeMap;

use super::Scene;
use crate::error::{Error, Result};

pub const BUILTIN_SCENES: &[&str] = &["paper-demo", "single-plane", "two-plane", "torus"];

enum Shape {
    Rect { u0: f64, v0: f64, u1: f64, v1: f64 },
    Disk { cu: f64, cv: f64, r: f64 },
    Ring { cu: f64, cv: f64, inner: f64, outer: f64 },
    Triangle([(f64, f64); 3]),
}

impl Shape {
    fn contains(&self, u: f64, v: f64) -> bool {
        match *self {
            Shape::Rect { u0, v0, u1, v1 } => u >= u0 && u < u1 && v >= v0 && v < v1,
            Shape::Disk { cu, cv, r } => (u - cu).powi(2) + (v - cv).powi(2) <= r * r,
            Shape::Ring { cu, cv, inner, outer } => {
                let r2 = (u - cu).powi(2) + (v - cv).powi(2);
                r2 <= outer * outer && r2 >= inner * inner
            }
            Shape::Triangle(p) => {
                let edge = |a: (f64, f64), b: (f64, f64)| (b.0 - a.0) * (v - a.1) - (b.1 - a.1) * (u - a.0);
                let (e0, e1, e2) = (edge(p[0], p[1]), edge(p[1], p[2]), edge(p[2], p[0]));
                (e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0) || (e0 <= 0.0 && e1 <= 0.0 && e2 <= 0.0)
            }
        }
    }
}

struct Object {
    name: &'static str,
    shape: Shape,
    depth: f64,
    reflectivity: f64,
}

/// Paints objects in order (later objects occlude earlier ones) by sampling
/// each pixel center in normalized `[0, 1)²` coordinates.
fn rasterize(width: usize, height: usize, objects: &[Object]) -> Result<Scene> {
    if width == 0 || height == 0 {
        return Err(Error::Scene(format!("dimensions must be positive, got {width}x{height}")));
    }
    let mut scene = Scene::empty(width, height);
    let mut labels = vec![0u32; width * height];
    let mut names = BTreeMap::new();
    for (id, obj) in objects.iter().enumerate() {
        let id = id as u32 + 1;
        names.insert(obj.name.to_string(), id);
        for y in 0..height {
            let v = (y as f64 + 0.5) / height as f64;
            for x in 0..width {
                let u = (x as f64 + 0.5) / width as f64;
                if obj.shape.contains(u, v) {
                    let i = y * width + x;
                    scene.depth[i] = obj.depth;
                    scene.reflectivity[i] = obj.reflectivity;
                    labels[i] = id;
                }
            }
        }
    }
    // Drop names of objects fully occluded at this resolution.
    names.retain(|_, id| labels.contains(id));
    scene.labels = Some(labels);
    scene.label_names = names;
    scene.validate()?;
    Ok(scene)
}

/// Five flat Lambertian targets between 4.5 m and 22 m, including a toroid.
pub fn paper_demo(width: usize, height: usize) -> Result<Scene> {
    let objects = [
        Object {
            name: "wall",
            shape: Shape::Rect {
                u0: 0.06,
                v0: 0.06,
                u1: 0.46,
                v1: 0.36,
            },
            depth: 22.0,
            reflectivity: 0.9,
        },
        Object {
            name: "disk",
            shape: Shape::Disk {
                cu: 0.75,
                cv: 0.25,
                r: 0.17,
            },
            depth: 17.0,
            reflectivity: 0.8,
        },
        Object {
            name: "toroid",
            shape: Shape::Ring {
                cu: 0.3,
                cv: 0.7,
                inner: 0.09,
                outer: 0.22,
            },
            depth: 12.0,
            reflectivity: 0.8,
        },
        Object {
            name: "triangle",
            shape: Shape::Triangle([(0.58, 0.93), (0.95, 0.93), (0.765, 0.55)]),
            depth: 8.0,
            reflectivity: 0.6,
        },
        Object {
            name: "block",
            shape: Shape::Rect {
                u0: 0.46,
                v0: 0.42,
                u1: 0.6,
                v1: 0.56,
            },
            depth: 4.5,
            reflectivity: 0.5,
        },
    ];
    rasterize(width, height, &objects)
}

pub fn single_plane(width: usize, height: usize, depth: f64, reflectivity: f64) -> Result<Scene> {
    let obj = Object {
        name: "plane",
        shape: Shape::Rect {
            u0: 0.0,
            v0: 0.0,
            u1: 1.0,
            v1: 1.0,
        },
        depth,
        reflectivity,
    };
    rasterize(width, height, &[obj])
}

pub fn two_plane(width: usize, height: usize, near: f64, far: f64) -> Result<Scene> {
    let objects = [
        Object {
            name: "far",
            shape: Shape::Rect {
                u0: 0.0,
                v0: 0.0,
                u1: 1.0,
                v1: 1.0,
            },
            depth: far,
            reflectivity: 0.8,
        },
        Object {
            name: "near",
            shape: Shape::Rect {
                u0: 0.0,
                v0: 0.0,
                u1: 0.5,
                v1: 1.0,
            },
            depth: near,
            reflectivity: 0.8,
        },
    ];
    rasterize(width, height, &objects)
}

pub fn torus_only(width: usize, height: usize, depth: f64) -> Result<Scene> {
    let obj = Object {
        name: "toroid",
        shape: Shape::Ring {
            cu: 0.5,
            cv: 0.5,
            inner: 0.15,
            outer: 0.35,
        },
        depth,
        reflectivity: 0.8,
    };
    rasterize(width, height, &[obj])
}

/// Built-in scene by name with default parameters.
pub fn builtin(name: &str, width: usize, height: usize) -> Result<Scene> {
    match name {
        "paper-demo" | "demo" => paper_demo(width, height),
        "single-plane" => single_plane(width, height, 10.0, 0.8),
        "two-plane" => two_plane(width, height, 6.0, 15.0),
        "torus" => torus_only(width, height, 12.0),
        other => Err(Error::Scene(format!(
            "unknown built-in scene `{other}` (available: {})",
            BUILTIN_SCENES.join(", ")
        ))),
    }
}
