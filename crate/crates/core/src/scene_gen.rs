//! Synthetic frame sequences with ground-truth change masks.
//!
//! A scene is a flat background plus a list of timed events: rectangular
//! objects that enter, move, or sit still, and global light steps. Truth at
//! frame `t` marks every pixel whose noise-free value differs from the
//! noise-free frame 0.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame_io::{Frame, Mask};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Object appears at `rect` when the range starts and stays until it ends.
    ObjectEnter,
    /// Object slides from `rect` to `to` across the range.
    ObjectMove,
    /// Object held still at `rect` (typically after a move).
    ObjectStop,
    /// Global luminance offset.
    LightStep,
}

impl EventKind {
    pub fn is_object(self) -> bool {
        !matches!(self, EventKind::LightStep)
    }
}

/// `(x, y, w, h)` in pixels; `x` is the column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    fn fits(&self, width: usize, height: usize) -> bool {
        self.w > 0 && self.h > 0 && self.x + self.w <= width && self.y + self.h <= height
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneEvent {
    pub kind: EventKind,
    #[serde(default)]
    pub rect: Option<Rect>,
    /// Final top-left corner `(x, y)` of an `object_move`.
    #[serde(default)]
    pub to: Option<(usize, usize)>,
    /// Luminance added to the lit background (objects) or to every pixel
    /// (light steps).
    pub level_delta: i16,
    /// Half-open `[start, end)` frame range.
    pub frames: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub length: usize,
    pub background_level: u8,
    /// Uniform integer noise in `[-a, a]`, `a <= 2`; 0 disables noise.
    #[serde(default)]
    pub noise_amplitude: u8,
    #[serde(default, rename = "event")]
    pub events: Vec<SceneEvent>,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 {
            return Err(Error::invalid("width", "must be positive"));
        }
        if self.height == 0 {
            return Err(Error::invalid("height", "must be positive"));
        }
        if self.length == 0 {
            return Err(Error::invalid("length", "must be at least 1"));
        }
        if self.noise_amplitude > 2 {
            return Err(Error::invalid(
                "noise_amplitude",
                format!("{} exceeds 2", self.noise_amplitude),
            ));
        }
        for (i, ev) in self.events.iter().enumerate() {
            let (start, end) = ev.frames;
            if start >= end || end > self.length {
                return Err(Error::invalid(
                    format!("event[{i}].frames"),
                    format!("[{start}, {end}) is empty or outside [0, {})", self.length),
                ));
            }
            if ev.kind.is_object() {
                let rect = ev.rect.ok_or_else(|| {
                    Error::invalid(format!("event[{i}].rect"), "required for object events")
                })?;
                if !rect.fits(self.width, self.height) {
                    return Err(Error::invalid(
                        format!("event[{i}].rect"),
                        format!(
                            "{rect:?} is not inside the {}x{} frame",
                            self.width, self.height
                        ),
                    ));
                }
                if ev.kind == EventKind::ObjectMove {
                    let (tx, ty) = ev.to.ok_or_else(|| {
                        Error::invalid(format!("event[{i}].to"), "required for object_move")
                    })?;
                    if !Rect::new(tx, ty, rect.w, rect.h).fits(self.width, self.height) {
                        return Err(Error::invalid(
                            format!("event[{i}].to"),
                            format!("({tx}, {ty}) puts the object outside the frame"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SceneSpec =
            toml::from_str(text).map_err(|e| Error::Config(format!("scene: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

fn object_origin(ev: &SceneEvent, t: usize) -> (usize, usize) {
    let rect = ev.rect.expect("validated object event");
    match (ev.kind, ev.to) {
        (EventKind::ObjectMove, Some((tx, ty))) => {
            let (start, end) = ev.frames;
            let span = (end - 1 - start) as i64;
            if span == 0 {
                return (tx, ty);
            }
            let k = (t - start) as i64;
            let lerp = |a: usize, b: usize| (a as i64 + (b as i64 - a as i64) * k / span) as usize;
            (lerp(rect.x, tx), lerp(rect.y, ty))
        }
        _ => (rect.x, rect.y),
    }
}

fn render_clean(spec: &SceneSpec, t: usize) -> Vec<u8> {
    let active = |ev: &&SceneEvent| ev.frames.0 <= t && t < ev.frames.1;
    let light: i32 = spec
        .events
        .iter()
        .filter(active)
        .filter(|ev| ev.kind == EventKind::LightStep)
        .map(|ev| ev.level_delta as i32)
        .sum();
    let base = spec.background_level as i32 + light;
    let mut level = vec![base; spec.width * spec.height];
    // later events paint over earlier ones
    for ev in spec
        .events
        .iter()
        .filter(active)
        .filter(|e| e.kind.is_object())
    {
        let rect = ev.rect.expect("validated object event");
        let (x0, y0) = object_origin(ev, t);
        let value = base + ev.level_delta as i32;
        for y in y0..y0 + rect.h {
            level[y * spec.width + x0..y * spec.width + x0 + rect.w].fill(value);
        }
    }
    level.into_iter().map(|v| v.clamp(0, 255) as u8).collect()
}

/// Renders a scene. Identical `(spec, seed)` give identical output; the seed
/// only matters when noise is enabled.
pub fn generate(spec: &SceneSpec, seed: u64) -> Result<(Vec<Frame>, Vec<Mask>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = render_clean(spec, 0);
    let mut frames = Vec::with_capacity(spec.length);
    let mut masks = Vec::with_capacity(spec.length);
    for t in 0..spec.length {
        let clean = if t == 0 {
            first.clone()
        } else {
            render_clean(spec, t)
        };
        let truth: Vec<bool> = clean.iter().zip(&first).map(|(a, b)| a != b).collect();
        let a = spec.noise_amplitude as i16;
        let data = if a == 0 {
            clean
        } else {
            clean
                .into_iter()
                .map(|v| (v as i16 + rng.gen_range(-a..=a)).clamp(0, 255) as u8)
                .collect()
        };
        frames.push(Frame::new(spec.width, spec.height, data)?.with_index(t));
        masks.push(Mask::new(spec.width, spec.height, truth)?);
    }
    Ok((frames, masks))
}

/// A scene in the style of the demonstration sequence: a person enters and
/// walks, a chair is moved and left, a mug appears, and the room light later
/// steps up.
pub fn office_scene(width: usize, height: usize, length: usize) -> SceneSpec {
    let s = |v: usize, total: usize| v * total / 100;
    let t = |pct: usize| pct * length / 100;
    SceneSpec {
        width,
        height,
        length,
        background_level: 64,
        noise_amplitude: 0,
        events: vec![
            SceneEvent {
                kind: EventKind::ObjectMove,
                rect: Some(Rect::new(
                    s(5, width),
                    s(30, height),
                    s(12, width).max(1),
                    s(45, height).max(1),
                )),
                to: Some((s(60, width), s(30, height))),
                level_delta: 120,
                frames: (t(10), t(40).max(t(10) + 1)),
            },
            SceneEvent {
                kind: EventKind::ObjectStop,
                rect: Some(Rect::new(
                    s(60, width),
                    s(30, height),
                    s(12, width).max(1),
                    s(45, height).max(1),
                )),
                to: None,
                level_delta: 120,
                frames: (t(40).max(t(10) + 1), length),
            },
            SceneEvent {
                kind: EventKind::ObjectEnter,
                rect: Some(Rect::new(
                    s(20, width),
                    s(80, height),
                    s(6, width).max(1),
                    s(6, height).max(1),
                )),
                to: None,
                level_delta: 90,
                frames: (t(25), length),
            },
            SceneEvent {
                kind: EventKind::LightStep,
                rect: None,
                to: None,
                level_delta: 32,
                frames: (t(70), length),
            },
        ],
    }
}
