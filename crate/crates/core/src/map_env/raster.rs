//! Agent-centric bird's-eye rasterization.
//!
//! The window is 50 m x 50 m on an 84 x 84 grid aligned with the vehicle
//! heading: forward is up (decreasing row), left is left (decreasing column).
//! The vehicle sits at the center of the anchor cell. A cell is set when its
//! center is covered by a polygon, or when a polyline passes through it.
//!
//! Vehicle-frame coordinates are snapped to a micrometre grid before any cell
//! decision so that rounding noise from the world-to-vehicle transform never
//! flips a cell.

use std::collections::VecDeque;
use std::fmt;
use std::io::Write;
use std::path::Path as FsPath;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{Pose, Vec2};

use super::path::Path;
use super::scenario::Scenario;

pub const GRID: usize = 84;
pub const CELLS: usize = GRID * GRID;
pub const WINDOW_M: f64 = 50.0;
pub const CELL_M: f64 = WINDOW_M / GRID as f64;
pub const N_CHANNELS: usize = 4;
pub const N_FRAMES: usize = 4;
pub const N_PLANES: usize = N_CHANNELS * N_FRAMES;
pub const N_SCALARS: usize = 5;

const WORDS: usize = CELLS.div_ceil(64);
const SNAP: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Channel {
    Obstacles = 0,
    Navigable = 1,
    Path = 2,
    StopLine = 3,
}

impl Channel {
    pub const ALL: [Channel; N_CHANNELS] = [
        Channel::Obstacles,
        Channel::Navigable,
        Channel::Path,
        Channel::StopLine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Obstacles => "obstacles",
            Channel::Navigable => "navigable",
            Channel::Path => "path",
            Channel::StopLine => "stop_line",
        }
    }
}

/// One 84x84 binary occupancy plane, row-major, bit `r * 84 + c`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitPlane {
    words: [u64; WORDS],
}

impl Default for BitPlane {
    fn default() -> Self {
        Self { words: [0; WORDS] }
    }
}

impl fmt::Debug for BitPlane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitPlane({} set)", self.count())
    }
}

impl BitPlane {
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        let i = row * GRID + col;
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize) {
        let i = row * GRID + col;
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Flat indices `r * 84 + c` of set cells, ascending.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + b)
            })
        })
    }

    /// Packed little-endian bytes, bit `i` of the plane is bit `i % 8` of byte `i / 8`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(CELLS / 8);
        for w in &self.words {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.truncate(CELLS / 8);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != CELLS / 8 {
            return Err(Error::ShapeMismatch(format!(
                "bit plane needs {} bytes, got {}",
                CELLS / 8,
                bytes.len()
            )));
        }
        let mut plane = BitPlane::default();
        for (wi, chunk) in bytes.chunks(8).enumerate() {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            plane.words[wi] = u64::from_le_bytes(buf);
        }
        Ok(plane)
    }
}

/// All four channels rendered at one instant.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Frame {
    pub planes: [BitPlane; N_CHANNELS],
}

impl Frame {
    pub fn channel(&self, c: Channel) -> &BitPlane {
        &self.planes[c as usize]
    }
}

/// The five scalar inputs. `last_curvature` is tan(steer) / wheelbase of the
/// last steering command.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Scalars {
    pub target_speed: f64,
    pub current_speed: f64,
    pub speed_ratio: f64,
    pub last_curvature: f64,
    pub last_acceleration: f64,
}

impl Scalars {
    pub fn new(target_speed: f64, current_speed: f64, last_curvature: f64, last_acceleration: f64) -> Self {
        let speed_ratio = if target_speed > 0.0 {
            current_speed / target_speed
        } else {
            0.0
        };
        Self {
            target_speed,
            current_speed,
            speed_ratio,
            last_curvature,
            last_acceleration,
        }
    }

    pub fn to_array(&self) -> [f64; N_SCALARS] {
        [
            self.target_speed,
            self.current_speed,
            self.speed_ratio,
            self.last_curvature,
            self.last_acceleration,
        ]
    }

    pub fn from_array(a: [f64; N_SCALARS]) -> Self {
        Self {
            target_speed: a[0],
            current_speed: a[1],
            speed_ratio: a[2],
            last_curvature: a[3],
            last_acceleration: a[4],
        }
    }
}

/// Network input: four stacked frames (oldest first) plus the scalars.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub frames: [Arc<Frame>; N_FRAMES],
    pub scalars: Scalars,
}

impl Observation {
    /// Plane `channel * 4 + frame`, the ordering the network consumes.
    #[inline]
    pub fn plane(&self, index: usize) -> &BitPlane {
        &self.frames[index % N_FRAMES].planes[index / N_FRAMES]
    }

    pub fn channel_frame(&self, c: Channel, frame: usize) -> &BitPlane {
        &self.frames[frame].planes[c as usize]
    }

    /// Dense copy of the 16 planes as 0.0 / 1.0, plane-major.
    pub fn dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; N_PLANES * CELLS];
        for p in 0..N_PLANES {
            for i in self.plane(p).ones() {
                out[p * CELLS + i] = 1.0;
            }
        }
        out
    }

    /// Write one 8-bit PGM per channel-frame plus a `scalars.txt` sidecar.
    pub fn dump_pgm(&self, dir: &FsPath) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for c in Channel::ALL {
            for f in 0..N_FRAMES {
                let path = dir.join(format!("{}_{f}.pgm", c.name()));
                std::fs::write(&path, encode_pgm(self.channel_frame(c, f)))
                    .map_err(|e| Error::io(&path, e))?;
            }
        }
        let path = dir.join("scalars.txt");
        let mut file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let s = self.scalars;
        writeln!(
            file,
            "target_speed={} current_speed={} speed_ratio={} last_curvature={} last_acceleration={}",
            s.target_speed, s.current_speed, s.speed_ratio, s.last_curvature, s.last_acceleration
        )
        .map_err(|e| Error::io(&path, e))?;
        Ok(())
    }
}

/// Binary PGM (P5), 0 for empty and 255 for occupied cells.
pub fn encode_pgm(plane: &BitPlane) -> Vec<u8> {
    let mut out = format!("P5\n{GRID} {GRID}\n255\n").into_bytes();
    for r in 0..GRID {
        for c in 0..GRID {
            out.push(if plane.get(r, c) { 255 } else { 0 });
        }
    }
    out
}

/// Per-worker history of rendered frames.
#[derive(Clone, Debug, Default)]
pub struct FrameStack {
    frames: VecDeque<Arc<Frame>>,
}

impl FrameStack {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of frames currently held.
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn clear(&mut self) {
        self.frames.clear();
    }

    /// Append the newest frame. An empty stack is filled with copies of it.
    pub fn push(&mut self, frame: Arc<Frame>) {
        if self.frames.is_empty() {
            self.frames.extend(std::iter::repeat_n(frame, N_FRAMES));
        } else {
            self.frames.pop_front();
            self.frames.push_back(frame);
        }
    }

    pub fn observation(&self, scalars: Scalars) -> Observation {
        assert_eq!(self.frames.len(), N_FRAMES, "frame stack not initialized");
        Observation {
            frames: std::array::from_fn(|i| Arc::clone(&self.frames[i])),
            scalars,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderConfig {
    pub anchor_col: usize,
    pub anchor_row: usize,
    /// Ego footprint length and width, meters, centered on the vehicle reference point.
    pub footprint: (f64, f64),
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            anchor_col: 42,
            anchor_row: 63,
            footprint: (4.5, 1.8),
        }
    }
}

/// World-to-grid transform for one pose. Grid coordinates are continuous:
/// cell `(r, c)` covers `u in [c, c+1)`, `v in [r, r+1)`.
#[derive(Clone, Copy, Debug)]
pub struct GridTransform {
    origin: Vec2,
    cos: f64,
    sin: f64,
    u0: f64,
    v0: f64,
}

#[inline]
fn snap(x: f64) -> f64 {
    (x * SNAP).round() / SNAP
}

impl GridTransform {
    pub fn new(pose: &Pose, cfg: &RenderConfig) -> Self {
        let (sin, cos) = pose.heading.sin_cos();
        Self {
            origin: pose.pos,
            cos,
            sin,
            u0: cfg.anchor_col as f64 + 0.5,
            v0: cfg.anchor_row as f64 + 0.5,
        }
    }

    /// Vehicle-frame (forward, left) coordinates, snapped.
    #[inline]
    pub fn to_vehicle(&self, p: Vec2) -> (f64, f64) {
        let d = p - self.origin;
        let f = d.x * self.cos + d.y * self.sin;
        let l = -d.x * self.sin + d.y * self.cos;
        (snap(f), snap(l))
    }

    /// Continuous grid coordinates `(u, v)` = (column, row).
    #[inline]
    pub fn to_grid(&self, p: Vec2) -> (f64, f64) {
        let (f, l) = self.to_vehicle(p);
        (self.u0 - l / CELL_M, self.v0 - f / CELL_M)
    }

    /// Grid cell containing a world point, if inside the window.
    pub fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        let (u, v) = self.to_grid(p);
        cell_at(u, v)
    }
}

#[inline]
fn cell_at(u: f64, v: f64) -> Option<(usize, usize)> {
    let (c, r) = (u.floor(), v.floor());
    if c >= 0.0 && r >= 0.0 && c < GRID as f64 && r < GRID as f64 {
        Some((r as usize, c as usize))
    } else {
        None
    }
}

/// Distance from the vehicle beyond which nothing can reach the window.
fn window_reach(cfg: &RenderConfig) -> f64 {
    let far_u = cfg.anchor_col.max(GRID - cfg.anchor_col) as f64 + 1.0;
    let far_v = cfg.anchor_row.max(GRID - cfg.anchor_row) as f64 + 1.0;
    far_u.hypot(far_v) * CELL_M
}

fn fill_polygon(plane: &mut BitPlane, grid_pts: &[(f64, f64)]) {
    let n = grid_pts.len();
    let mut xs: Vec<f64> = Vec::with_capacity(8);
    let vmin = grid_pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let vmax = grid_pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let r_lo = (vmin - 0.5).ceil().max(0.0) as usize;
    let r_hi = ((vmax - 0.5).floor()).min(GRID as f64 - 1.0);
    if r_hi < 0.0 {
        return;
    }
    for r in r_lo..=r_hi as usize {
        let vc = r as f64 + 0.5;
        xs.clear();
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (grid_pts[i], grid_pts[j]);
            if (a.1 > vc) != (b.1 > vc) {
                xs.push(a.0 + (vc - a.1) * (b.0 - a.0) / (b.1 - a.1));
            }
            j = i;
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for pair in xs.chunks_exact(2) {
            // Cells whose center u = c + 0.5 lies in [x0, x1).
            let c_lo = (pair[0] - 0.5).ceil().max(0.0);
            let c_hi = (pair[1] - 0.5).ceil().min(GRID as f64);
            let mut c = c_lo;
            while c < c_hi {
                plane.set(r, c as usize);
                c += 1.0;
            }
        }
    }
}

/// Mark every cell a polyline passes through, sampling at most half a cell apart.
fn draw_polyline(plane: &mut BitPlane, grid_pts: &[(f64, f64)]) {
    if let [only] = grid_pts {
        if let Some((r, c)) = cell_at(only.0, only.1) {
            plane.set(r, c);
        }
        return;
    }
    for w in grid_pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = (b.0 - a.0).hypot(b.1 - a.1);
        let n = (len / 0.5).ceil().max(1.0) as usize;
        for k in 0..=n {
            let t = k as f64 / n as f64;
            if let Some((r, c)) = cell_at(a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t) {
                plane.set(r, c);
            }
        }
    }
}

/// Render one frame of all four channels at `pose`.
pub fn render_frame(scenario: &Scenario, path: &Path, pose: &Pose, cfg: &RenderConfig) -> Frame {
    let tf = GridTransform::new(pose, cfg);
    let reach = window_reach(cfg);
    let mut frame = Frame::default();

    // Ego footprint; constant in the vehicle frame.
    {
        let plane = &mut frame.planes[Channel::Obstacles as usize];
        let (half_len, half_wid) = (0.5 * cfg.footprint.0, 0.5 * cfg.footprint.1);
        for r in 0..GRID {
            let f = (cfg.anchor_row as f64 - r as f64) * CELL_M;
            if f.abs() > half_len {
                continue;
            }
            for c in 0..GRID {
                let l = (cfg.anchor_col as f64 - c as f64) * CELL_M;
                if l.abs() <= half_wid {
                    plane.set(r, c);
                }
            }
        }
    }

    let mut buf: Vec<(f64, f64)> = Vec::new();
    for poly in &scenario.navigable {
        if poly.center.dist(pose.pos) > poly.radius + reach {
            continue;
        }
        buf.clear();
        buf.extend(poly.vertices.iter().map(|&p| tf.to_grid(p)));
        fill_polygon(&mut frame.planes[Channel::Navigable as usize], &buf);
    }

    // Path: consecutive runs of waypoints that can touch the window.
    {
        let plane = &mut frame.planes[Channel::Path as usize];
        let near = |p: Vec2| p.dist(pose.pos) <= reach + 1.0;
        let mut run: Vec<(f64, f64)> = Vec::new();
        for w in path.waypoints.windows(2) {
            if near(w[0].pos) || near(w[1].pos) {
                if run.is_empty() {
                    run.push(tf.to_grid(w[0].pos));
                }
                run.push(tf.to_grid(w[1].pos));
            } else if !run.is_empty() {
                draw_polyline(plane, &run);
                run.clear();
            }
        }
        if path.waypoints.len() == 1 {
            run.push(tf.to_grid(path.waypoints[0].pos));
        }
        if !run.is_empty() {
            draw_polyline(plane, &run);
        }
    }

    for seg in &scenario.stop_lines {
        if seg[0].dist(pose.pos).min(seg[1].dist(pose.pos)) > reach + seg[0].dist(seg[1]) {
            continue;
        }
        let pts = [tf.to_grid(seg[0]), tf.to_grid(seg[1])];
        draw_polyline(&mut frame.planes[Channel::StopLine as usize], &pts);
    }

    frame
}
