//! Scene files.
//!
//! Text format (`.scene`, `.txt`, anything not ending in `.json`):
//!
//! ```text
//! fmcw-scene 1            # magic + version, required first line
//! width 4
//! height 4
//! depth-scale 1.0         # multiplies every depth value; optional, default 1
//! label 1 toroid          # zero or more `label <id> <name>` lines
//! depth                   # width*height numbers, row-major, any whitespace
//! 0 0 0 0
//! 0 10 10 0
//! ...
//! reflectivity            # width*height numbers in [0, 1]
//! ...
//! labels                  # optional, width*height integer ids (0 = none)
//! ...
//! ```
//!
//! `#` starts a comment. The JSON form is the serde encoding of
//! [`Scene`] (`width`, `height`, `depth`, `reflectivity`, optional
//! `labels`, `label_names`, plus an optional `depth_scale`).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use super::Scene;
use crate::error::{Error, Result};

const MAGIC: &str = "fmcw-scene";

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        parse_scene_json(&text)
    } else {
        parse_scene_text(&text)
    }
}

pub fn save_scene_text(scene: &Scene, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, scene_to_text(scene)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn save_scene_json(scene: &Scene, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(scene)?;
    std::fs::write(path, json).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    width: usize,
    height: usize,
    #[serde(default = "one")]
    depth_scale: f64,
    depth: Vec<f64>,
    reflectivity: Vec<f64>,
    #[serde(default)]
    labels: Option<Vec<u32>>,
    #[serde(default)]
    label_names: BTreeMap<String, u32>,
}

fn one() -> f64 {
    1.0
}

pub fn parse_scene_json(text: &str) -> Result<Scene> {
    let doc: SceneDoc = serde_json::from_str(text)?;
    finish(
        doc.width,
        doc.height,
        doc.depth_scale,
        doc.depth,
        doc.reflectivity,
        doc.labels,
        doc.label_names,
    )
}

fn finish(
    width: usize,
    height: usize,
    depth_scale: f64,
    mut depth: Vec<f64>,
    reflectivity: Vec<f64>,
    labels: Option<Vec<u32>>,
    label_names: BTreeMap<String, u32>,
) -> Result<Scene> {
    if !(depth_scale > 0.0) || !depth_scale.is_finite() {
        return Err(Error::Scene(format!("depth-scale must be finite and > 0, got {depth_scale}")));
    }
    depth.iter_mut().for_each(|d| *d *= depth_scale);
    let scene = Scene {
        width,
        height,
        depth,
        reflectivity,
        labels,
        label_names,
    };
    scene.validate()?;
    Ok(scene)
}

pub fn parse_scene_text(text: &str) -> Result<Scene> {
    let mut tokens = text
        .lines()
        .enumerate()
        .flat_map(|(ln, line)| {
            let line = line.split('#').next().unwrap_or("");
            line.split_whitespace().map(move |t| (ln + 1, t))
        })
        .peekable();

    let bad = |ln: usize, msg: String| Error::Scene(format!("line {ln}: {msg}"));

    match (tokens.next(), tokens.next()) {
        (Some((_, MAGIC)), Some((_, "1"))) => {}
        (Some((ln, _)), _) => return Err(bad(ln, format!("expected `{MAGIC} 1` header"))),
        (None, _) => return Err(Error::Scene("empty scene file".into())),
    }

    let mut width = None;
    let mut height = None;
    let mut scale = 1.0;
    let mut names = BTreeMap::new();
    let mut depth = None;
    let mut refl = None;
    let mut labels = None;

    while let Some((ln, key)) = tokens.next() {
        let mut value = |what: &str| {
            tokens
                .next()
                .map(|(_, t)| t)
                .ok_or_else(|| bad(ln, format!("missing value for `{what}`")))
        };
        match key {
            "width" | "height" => {
                let v: usize = value(key)?.parse().map_err(|e| bad(ln, format!("{key}: {e}")))?;
                if key == "width" {
                    width = Some(v);
                } else {
                    height = Some(v);
                }
            }
            "depth-scale" => {
                scale = value(key)?.parse().map_err(|e| bad(ln, format!("depth-scale: {e}")))?;
            }
            "label" => {
                let id: u32 = value("label")?.parse().map_err(|e| bad(ln, format!("label id: {e}")))?;
                let name = value("label")?.to_string();
                names.insert(name, id);
            }
            "depth" | "reflectivity" | "labels" => {
                let (w, h) = width
                    .zip(height)
                    .ok_or_else(|| bad(ln, "width and height must precede arrays".into()))?;
                let n = w * h;
                let mut vals = Vec::with_capacity(n);
                for _ in 0..n {
                    let (vl, t) = tokens
                        .next()
                        .ok_or_else(|| bad(ln, format!("`{key}` needs {n} values, found {}", vals.len())))?;
                    let v: f64 = t.parse().map_err(|e| bad(vl, format!("{key} value `{t}`: {e}")))?;
                    vals.push(v);
                }
                match key {
                    "depth" => depth = Some(vals),
                    "reflectivity" => refl = Some(vals),
                    _ => {
                        let ids = vals
                            .into_iter()
                            .map(|v| {
                                if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                                    Ok(v as u32)
                                } else {
                                    Err(bad(ln, format!("label ids must be non-negative integers, got {v}")))
                                }
                            })
                            .collect::<Result<Vec<_>>>()?;
                        labels = Some(ids);
                    }
                }
            }
            other => return Err(bad(ln, format!("unknown key `{other}`"))),
        }
    }

    let width = width.ok_or_else(|| Error::Scene("missing `width`".into()))?;
    let height = height.ok_or_else(|| Error::Scene("missing `height`".into()))?;
    let depth = depth.ok_or_else(|| Error::Scene("missing `depth` array".into()))?;
    let refl = refl.ok_or_else(|| Error::Scene("missing `reflectivity` array".into()))?;
    finish(width, height, scale, depth, refl, labels, names)
}

/// Text encoding; `{}` on f64 is shortest-roundtrip so parsing it back is exact.
pub fn scene_to_text(scene: &Scene) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} 1");
    let _ = writeln!(out, "width {}", scene.width);
    let _ = writeln!(out, "height {}", scene.height);
    let _ = writeln!(out, "depth-scale 1");
    for (name, id) in &scene.label_names {
        let _ = writeln!(out, "label {id} {name}");
    }
    let mut array = |name: &str, vals: &mut dyn Iterator<Item = String>| {
        let _ = writeln!(out, "{name}");
        let vals: Vec<String> = vals.collect();
        for row in vals.chunks(scene.width) {
            let _ = writeln!(out, "{}", row.join(" "));
        }
    };
    array("depth", &mut scene.depth.iter().map(|v| v.to_string()));
    array("reflectivity", &mut scene.reflectivity.iter().map(|v| v.to_string()));
    if let Some(labels) = &scene.labels {
        array("labels", &mut labels.iter().map(|v| v.to_string()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::builtin;

    #[test]
    fn text_roundtrip_is_exact() {
        let s = builtin("paper-demo", 16, 16).unwrap();
        let back = parse_scene_text(&scene_to_text(&s)).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let s = builtin("torus", 8, 8).unwrap();
        let back = parse_scene_json(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn all_zero_file_is_valid_and_empty() {
        let text = "fmcw-scene 1\nwidth 2\nheight 2\ndepth\n0 0\n0 0\nreflectivity\n0 0 0 0\n";
        let s = parse_scene_text(text).unwrap();
        assert!(s.depth.iter().all(|&d| d == 0.0));
        assert!(s.distinct_depths().is_empty());
    }

    #[test]
    fn depth_scale_applies() {
        let text = "fmcw-scene 1 # header\nwidth 1\nheight 1\ndepth-scale 0.001\ndepth 2500\nreflectivity 0.5\n";
        let s = parse_scene_text(text).unwrap();
        assert!((s.depth[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        for text in [
            "",
            "not-a-scene 1\n",
            "fmcw-scene 1\nwidth 2\nheight 2\ndepth\n0 0 0\n",
            "fmcw-scene 1\nwidth 1\nheight 1\ndepth 1\nreflectivity 2\n",
            "fmcw-scene 1\nwidth 1\nheight 1\ndepth -1\nreflectivity 0\n",
            "fmcw-scene 1\nwidth 1\nheight 1\ndepth x\nreflectivity 0\n",
            "fmcw-scene 1\nwidth 1\nheight 1\ndepth 1\n",
            "fmcw-scene 1\nwidth 1\nheight 1\nbogus 3\n",
            "fmcw-scene 1\ndepth 1\n",
        ] {
            assert!(parse_scene_text(text).is_err(), "accepted: {text:?}");
        }
        assert!(parse_scene_json(r#"{"width":2,"height":1,"depth":[1],"reflectivity":[0.1]}"#).is_err());
        assert!(parse_scene_json(r#"{"width":1,"height":1,"depth":[1],"reflectivity":[0.1],"x":1}"#).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_scene("/nonexistent/scene.txt"), Err(Error::Io { .. })));
    }
}
