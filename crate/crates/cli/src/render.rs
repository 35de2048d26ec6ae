//! SVG projection of a trajectory onto two state dimensions.

use std::fmt::Write as _;
use std::path::Path;

use kinorrt::steer::Trajectory;
use kinorrt::world::Environment;

use crate::error::CliError;
use crate::output::{read_trajectory, write_text};

/// Drawing width in pixels; the height follows the aspect ratio.
pub const WIDTH: f64 = 800.0;
pub const MARGIN: f64 = 10.0;

/// Maps state coordinates on dims `(i, j)` to SVG pixels, y pointing up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewport {
    pub lo: (f64, f64),
    pub hi: (f64, f64),
    pub scale: f64,
}

impl Viewport {
    pub fn to_px(&self, x: f64, y: f64) -> (f64, f64) {
        (
            MARGIN + (x - self.lo.0) * self.scale,
            MARGIN + (self.hi.1 - y) * self.scale,
        )
    }

    pub fn size(&self) -> (f64, f64) {
        (
            2.0 * MARGIN + (self.hi.0 - self.lo.0) * self.scale,
            2.0 * MARGIN + (self.hi.1 - self.lo.1) * self.scale,
        )
    }
}

/// State bounds of the two dims; unbounded dims fall back to the extent of
/// the trajectory and obstacles.
pub fn viewport(
    traj: &Trajectory<f64>,
    env: &Environment<f64>,
    (i, j): (usize, usize),
) -> Viewport {
    let extent = |d: usize| {
        let (mut lo, mut hi) = (env.state_lower[d], env.state_upper[d]);
        if !(lo.is_finite() && hi.is_finite()) {
            let mut vals: Vec<f64> = traj.samples.iter().map(|s| s.x[d]).collect();
            if let Some(k) = env.position_dims.iter().position(|&p| p == d) {
                for b in &env.obstacles {
                    vals.extend([b.min[k], b.max[k]]);
                }
            }
            lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(lo.is_finite() && hi.is_finite()) {
                (lo, hi) = (-1.0, 1.0);
            }
        }
        if hi - lo <= 0.0 {
            (lo - 1.0, hi + 1.0)
        } else {
            (lo, hi)
        }
    };
    let (x, y) = (extent(i), extent(j));
    Viewport {
        lo: (x.0, y.0),
        hi: (x.1, y.1),
        scale: (WIDTH - 2.0 * MARGIN) / (x.1 - x.0),
    }
}

/// Obstacles are drawn when both dims are position dims; the trajectory
/// is one polyline.
pub fn render_projection(
    traj: &Trajectory<f64>,
    env: &Environment<f64>,
    (i, j): (usize, usize),
) -> Result<String, CliError> {
    let n = env.state_dim();
    if i >= n || j >= n {
        return Err(CliError::Config(format!(
            "projection dims ({i}, {j}) out of range for {n} states"
        )));
    }
    if let Some(s) = traj.samples.first() {
        if s.x.len() != n {
            return Err(CliError::Config(format!(
                "trajectory has {} states, the scenario {n}",
                s.x.len()
            )));
        }
    }
    let vp = viewport(traj, env, (i, j));
    let (w, h) = vp.size();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.3}" height="{h:.3}" viewBox="0 0 {w:.3} {h:.3}">"#
    );
    let (x0, y0) = vp.to_px(vp.lo.0, vp.hi.1);
    let _ = writeln!(
        svg,
        r#"<rect class="bounds" x="{x0:.3}" y="{y0:.3}" width="{:.3}" height="{:.3}" fill="none" stroke="black"/>"#,
        (vp.hi.0 - vp.lo.0) * vp.scale,
        (vp.hi.1 - vp.lo.1) * vp.scale
    );
    let pi = env.position_dims.iter().position(|&p| p == i);
    let pj = env.position_dims.iter().position(|&p| p == j);
    if let (Some(pi), Some(pj)) = (pi, pj) {
        for b in &env.obstacles {
            let (x, y) = vp.to_px(b.min[pi], b.max[pj]);
            let _ = writeln!(
                svg,
                r#"<rect class="obstacle" x="{x:.3}" y="{y:.3}" width="{:.3}" height="{:.3}" fill="gray"/>"#,
                (b.max[pi] - b.min[pi]) * vp.scale,
                (b.max[pj] - b.min[pj]) * vp.scale
            );
        }
    }
    if !traj.samples.is_empty() {
        let points: Vec<String> = traj
            .samples
            .iter()
            .map(|s| {
                let (x, y) = vp.to_px(s.x[i], s.x[j]);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="trajectory" points="{}" fill="none" stroke="blue"/>"#,
            points.join(" ")
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Reads a trajectory CSV and writes its projection with the scenario's
/// obstacles.
pub fn cmd_render(
    trajectory: &Path,
    env: &Environment<f64>,
    dims: (usize, usize),
    out: &Path,
) -> Result<(), CliError> {
    let file = read_trajectory(trajectory)?;
    write_text(out, &render_projection(&file.trajectory, env, dims)?)
}
