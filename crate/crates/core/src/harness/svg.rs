//! Standalone vector-graphic output: obstacle maps with trajectory polylines
//! colored by cost rank (blue low, red high), and cost-vs-step curves.

use std::path::Path;

use super::io::{fmt_g9, write_atomic};
use super::HarnessError;
use crate::barrier::CircularObstacle;

const SCALE: f64 = 100.0; // pixels per meter
const PAD: f64 = 60.0;

/// A polyline in world coordinates with an associated cost for color ranking.
#[derive(Debug, Clone)]
pub struct CostedPath {
    pub points: Vec<(f64, f64)>,
    pub cost: f64,
}

/// Rank-based color: blue for the lowest cost, red for the highest.
fn rank_color(rank: usize, count: usize) -> String {
    let t = if count <= 1 {
        0.0
    } else {
        rank as f64 / (count - 1) as f64
    };
    let r = (255.0 * t).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    format!("rgb({r},40,{b})")
}

struct WorldBox {
    min_x: f64,
    min_y: f64,
    max_x: f64,
    max_y: f64,
}

impl WorldBox {
    fn new() -> Self {
        WorldBox {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        }
    }

    fn add(&mut self, x: f64, y: f64, pad: f64) {
        self.min_x = self.min_x.min(x - pad);
        self.min_y = self.min_y.min(y - pad);
        self.max_x = self.max_x.max(x + pad);
        self.max_y = self.max_y.max(y + pad);
    }

    fn finish(mut self) -> Self {
        if !self.min_x.is_finite() {
            self.add(0.0, 0.0, 1.0);
        }
        self
    }

    // SVG y grows downward; world y grows upward.
    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.min_x) * SCALE + PAD,
            (self.max_y - y) * SCALE + PAD,
        )
    }

    fn width(&self) -> f64 {
        (self.max_x - self.min_x) * SCALE + 2.0 * PAD
    }

    fn height(&self) -> f64 {
        (self.max_y - self.min_y) * SCALE + 2.0 * PAD
    }
}

/// Scene graphic: obstacles as black circles, the target as a blue circle,
/// one polyline per path colored by cost rank.
pub fn scene_svg_string(
    paths: &[CostedPath],
    obstacles: &[CircularObstacle],
    target: (f64, f64),
) -> String {
    let mut world = WorldBox::new();
    for o in obstacles {
        world.add(o.cx, o.cy, o.r + 0.3);
    }
    world.add(target.0, target.1, 0.3);
    for p in paths {
        for &(x, y) in &p.points {
            world.add(x, y, 0.3);
        }
    }
    let world = world.finish();

    // Color by cost rank: sort indices by cost, assign rank order.
    let mut order: Vec<usize> = (0..paths.len()).collect();
    order.sort_by(|&a, &b| {
        paths[a]
            .cost
            .partial_cmp(&paths[b].cost)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut rank_of = vec![0usize; paths.len()];
    for (rank, &idx) in order.iter().enumerate() {
        rank_of[idx] = rank;
    }

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
        fmt_g9(world.width()),
        fmt_g9(world.height()),
        fmt_g9(world.width()),
        fmt_g9(world.height()),
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for o in obstacles {
        let (cx, cy) = world.px(o.cx, o.cy);
        out.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n",
            fmt_g9(cx),
            fmt_g9(cy),
            fmt_g9(o.r * SCALE),
        ));
    }
    {
        let (cx, cy) = world.px(target.0, target.1);
        out.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"8\" fill=\"blue\"/>\n",
            fmt_g9(cx),
            fmt_g9(cy),
        ));
    }
    for (idx, p) in paths.iter().enumerate() {
        let pts: Vec<String> = p
            .points
            .iter()
            .map(|&(x, y)| {
                let (px, py) = world.px(x, y);
                format!("{},{}", fmt_g9(px), fmt_g9(py))
            })
            .collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
            pts.join(" "),
            rank_color(rank_of[idx], paths.len()),
        ));
    }
    out.push_str("</svg>\n");
    out
}

pub fn write_scene_svg(
    paths: &[CostedPath],
    obstacles: &[CircularObstacle],
    target: (f64, f64),
    path: &Path,
) -> Result<(), HarnessError> {
    write_atomic(path, scene_svg_string(paths, obstacles, target).as_bytes())
}

/// Cost-vs-step curves, one polyline per named series.
pub fn cost_curves_svg_string(curves: &[(String, Vec<f64>)]) -> String {
    let width = 720.0;
    let height = 480.0;
    let margin = 60.0;
    let max_len = curves.iter().map(|(_, c)| c.len()).max().unwrap_or(0);
    let max_val = curves
        .iter()
        .flat_map(|(_, c)| c.iter().cloned())
        .fold(1e-12f64, f64::max);

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{y}\" x2=\"{x}\" y2=\"{y}\" stroke=\"black\"/>\n",
        m = margin,
        y = height - margin,
        x = width - margin / 2.0,
    ));
    out.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{y}\" stroke=\"black\"/>\n",
        m = margin,
        t = margin / 2.0,
        y = height - margin,
    ));
    for (i, (name, series)) in curves.iter().enumerate() {
        if series.is_empty() {
            continue;
        }
        let color = rank_color(i, curves.len().max(2));
        let pts: Vec<String> = series
            .iter()
            .enumerate()
            .map(|(s, v)| {
                let x = margin
                    + (width - 1.5 * margin) * s as f64 / (max_len.max(2) - 1) as f64;
                let y = (height - margin) - (height - 1.5 * margin) * (v / max_val);
                format!("{},{}", fmt_g9(x), fmt_g9(y))
            })
            .collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            pts.join(" "),
        ));
        out.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" fill=\"{color}\" font-size=\"14\">{name}</text>\n",
            x = width - margin * 2.5,
            y = margin + 18.0 * i as f64,
        ));
    }
    out.push_str("</svg>\n");
    out
}

pub fn write_cost_curves_svg(
    curves: &[(String, Vec<f64>)],
    path: &Path,
) -> Result<(), HarnessError> {
    write_atomic(path, cost_curves_svg_string(curves).as_bytes())
}
