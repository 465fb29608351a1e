//! Two-dimensional background-shift demonstration.
//!
//! Each frame holds a Cauchy sample cloud and one demonstration point. A
//! direction `w` separates them with margin `min_x w · (R_H - x)`. Per-frame
//! margins are unchanged when a frame is translated as a whole, but a
//! direction fitted to several frames whose demonstrations sit differently
//! relative to their clouds is a compromise that is optimal in none.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::Cauchy;
use serde::{Deserialize, Serialize};

use crate::seed;

pub const N_SAMPLES: usize = 100;
/// Half-width of the clipping box around the cloud centre.
pub const CLIP_HALF_WIDTH: f64 = 50.0;
/// Seed used by the command line and the acceptance run.
pub const DEMO_SEED: u64 = 3;
const CAUCHY_SCALE: f64 = 5.0;
const DEMO_DISTANCE: f64 = 70.0;
const SWEEP_STEPS: usize = 3600;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginFrame {
    pub samples: Vec<[f64; 2]>,
    pub demonstration: [f64; 2],
    pub shift: [f64; 2],
    /// Samples moved onto the clipping box.
    pub clipped: usize,
}

impl MarginFrame {
    pub fn translated(&self, d: [f64; 2]) -> Self {
        let mv = |p: [f64; 2]| [p[0] + d[0], p[1] + d[1]];
        Self {
            samples: self.samples.iter().map(|&p| mv(p)).collect(),
            demonstration: mv(self.demonstration),
            shift: mv(self.shift),
            clipped: self.clipped,
        }
    }

    /// `min_x w · (R_H - x)`.
    pub fn margin(&self, w: [f64; 2]) -> f64 {
        let [dx, dy] = self.demonstration;
        self.samples
            .iter()
            .map(|p| w[0] * (dx - p[0]) + w[1] * (dy - p[1]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Frame with the demonstration straight to the right of its cloud.
pub fn generate_frame(seed: u64, shift: [f64; 2]) -> MarginFrame {
    generate_frame_with(seed, shift, 0.0)
}

/// 100 clipped Cauchy points around the origin, the demonstration at
/// distance 70 along `bearing` (radians), everything translated by `shift`.
pub fn generate_frame_with(seed: u64, shift: [f64; 2], bearing: f64) -> MarginFrame {
    let mut rng = seed::stream(seed, "shiftdemo/cloud");
    let cauchy = Cauchy::new(0.0, CAUCHY_SCALE).expect("positive scale");
    let mut clipped = 0;
    let mut clip = |x: f64| {
        if x.abs() > CLIP_HALF_WIDTH {
            clipped += 1;
            x.clamp(-CLIP_HALF_WIDTH, CLIP_HALF_WIDTH)
        } else {
            x
        }
    };
    let samples: Vec<[f64; 2]> = (0..N_SAMPLES)
        .map(|_| {
            let x: f64 = rng.sample(cauchy);
            let y: f64 = rng.sample(cauchy);
            [clip(x), clip(y)]
        })
        .collect();
    let base = MarginFrame {
        samples,
        demonstration: [DEMO_DISTANCE * bearing.cos(), DEMO_DISTANCE * bearing.sin()],
        shift: [0.0, 0.0],
        clipped,
    };
    base.translated(shift)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub direction: [f64; 2],
    /// Angle of `direction` in degrees, in `[0, 360)`.
    pub angle_deg: f64,
    /// Worst-case margin over every frame the direction was fitted to.
    pub margin: f64,
    /// No direction separates every frame with a positive margin.
    pub negative_margin: bool,
}

fn unit(theta: f64) -> [f64; 2] {
    [theta.cos(), theta.sin()]
}

fn joint_margin(frames: &[MarginFrame], theta: f64) -> f64 {
    let w = unit(theta);
    frames.iter().map(|f| f.margin(w)).fold(f64::INFINITY, f64::min)
}

/// The unit vector maximizing the smallest margin across `frames`, each
/// sample measured against its own frame's demonstration.
///
/// # Panics
/// If `frames` is empty.
pub fn optimal_direction(frames: &[MarginFrame]) -> Direction {
    assert!(!frames.is_empty(), "optimal_direction needs at least one frame");
    let step = 2.0 * PI / SWEEP_STEPS as f64;
    let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
    for i in 0..SWEEP_STEPS {
        let m = joint_margin(frames, i as f64 * step);
        if m > best {
            best = m;
            best_i = i;
        }
    }
    // golden-section refinement inside the neighbouring sweep cells
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = ((best_i as f64 - 1.0) * step, (best_i as f64 + 1.0) * step);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (joint_margin(frames, c), joint_margin(frames, d));
    for _ in 0..80 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = joint_margin(frames, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = joint_margin(frames, d);
        }
    }
    let refined = 0.5 * (a + b);
    let mut theta = best_i as f64 * step;
    let mut margin = best;
    let m = joint_margin(frames, refined);
    if m > margin {
        theta = refined;
        margin = m;
    }
    let theta = theta.rem_euclid(2.0 * PI);
    Direction {
        direction: unit(theta),
        angle_deg: theta.to_degrees(),
        margin,
        negative_margin: margin <= 0.0,
    }
}

/// Angle between two unit vectors in degrees.
pub fn angle_between(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] * b[0] + a[1] * b[1]).clamp(-1.0, 1.0).acos().to_degrees()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub seed: u64,
    pub frames: Vec<MarginFrame>,
    pub per_frame: Vec<Direction>,
    pub pooled: Direction,
    /// Angle between the pooled direction and each per-frame direction.
    pub pooled_angle_deg: Vec<f64>,
    /// Margin the pooled direction achieves inside each frame.
    pub pooled_margin_in_frame: Vec<f64>,
}

/// The two-frame setup: a base frame with its demonstration to the right,
/// and a translated frame whose demonstration sits at 60° from its cloud.
pub fn shift_report(seed: u64) -> ShiftReport {
    let frames = vec![
        generate_frame(seed::derive_seed(seed, "shiftdemo/0"), [0.0, 0.0]),
        generate_frame_with(seed::derive_seed(seed, "shiftdemo/1"), [150.0, 90.0], PI / 3.0),
    ];
    let per_frame: Vec<Direction> =
        frames.iter().map(|f| optimal_direction(std::slice::from_ref(f))).collect();
    let pooled = optimal_direction(&frames);
    ShiftReport {
        seed,
        pooled_angle_deg: per_frame
            .iter()
            .map(|d| angle_between(d.direction, pooled.direction))
            .collect(),
        pooled_margin_in_frame: frames.iter().map(|f| f.margin(pooled.direction)).collect(),
        frames,
        per_frame,
        pooled,
    }
}

impl ShiftReport {
    /// `frame_id,x,y,is_demo`
    pub fn points_csv(&self) -> String {
        let mut out = String::from("frame_id,x,y,is_demo\n");
        for (i, f) in self.frames.iter().enumerate() {
            for p in &f.samples {
                out.push_str(&format!("{i},{},{},0\n", p[0], p[1]));
            }
            out.push_str(&format!("{i},{},{},1\n", f.demonstration[0], f.demonstration[1]));
        }
        out
    }

    /// `name,dx,dy,margin`; per-frame rows carry their own frame's margin.
    pub fn directions_csv(&self) -> String {
        let mut out = String::from("name,dx,dy,margin\n");
        for (i, d) in self.per_frame.iter().enumerate() {
            out.push_str(&format!("frame_{i},{},{},{}\n", d.direction[0], d.direction[1], d.margin));
        }
        let p = &self.pooled;
        out.push_str(&format!("pooled,{},{},{}\n", p.direction[0], p.direction[1], p.margin));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_shift_is_the_base_frame() {
        assert_eq!(generate_frame(4, [0.0, 0.0]), generate_frame_with(4, [0.0, 0.0], 0.0));
        let f = generate_frame(4, [0.0, 0.0]);
        assert_eq!(f.samples.len(), N_SAMPLES);
        assert!(f.samples.iter().all(|p| p[0].abs() <= 50.0 && p[1].abs() <= 50.0));
    }

    #[test]
    fn shift_translates_every_point() {
        let base = generate_frame(7, [0.0, 0.0]);
        let moved = generate_frame(7, [5.0, 5.0]);
        for (a, b) in base.samples.iter().zip(&moved.samples) {
            assert_eq!([a[0] + 5.0, a[1] + 5.0], *b);
        }
        assert_eq!(moved.demonstration, [base.demonstration[0] + 5.0, base.demonstration[1] + 5.0]);
        assert_eq!(moved.shift, [5.0, 5.0]);
    }

    #[test]
    fn seeds_give_different_clouds() {
        assert_ne!(generate_frame(1, [0.0; 2]).samples, generate_frame(2, [0.0; 2]).samples);
    }

    #[test]
    fn symmetric_cloud_left_of_the_demo_points_right() {
        let mut samples = Vec::new();
        for i in 0..50 {
            let y = i as f64 * 0.4;
            let x = -10.0 + (i % 7) as f64;
            samples.push([x, y]);
            samples.push([x, -y]);
        }
        let frame = MarginFrame { samples, demonstration: [20.0, 0.0], shift: [0.0; 2], clipped: 0 };
        let d = optimal_direction(std::slice::from_ref(&frame));
        assert!(angle_between(d.direction, [1.0, 0.0]) < 1.0, "{}", d.angle_deg);
        assert!((d.direction[0].hypot(d.direction[1]) - 1.0).abs() < 1e-12);
        assert!(!d.negative_margin);
    }

    #[test]
    fn refinement_is_at_least_as_good_as_the_sweep() {
        let frame = generate_frame(11, [0.0; 2]);
        let d = optimal_direction(std::slice::from_ref(&frame));
        for i in 0..3600 {
            let theta = i as f64 * 2.0 * PI / 3600.0;
            assert!(frame.margin(unit(theta)) <= d.margin + 1e-12);
        }
    }

    #[test]
    fn translation_leaves_the_direction_unchanged() {
        let a = generate_frame(5, [0.0; 2]);
        let b = a.translated([-40.0, 300.0]);
        let da = optimal_direction(std::slice::from_ref(&a));
        let db = optimal_direction(std::slice::from_ref(&b));
        assert!(angle_between(da.direction, db.direction) < 0.1);
    }

    #[test]
    fn unseparable_frames_are_flagged() {
        let f = MarginFrame {
            samples: vec![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
            demonstration: [0.0, 0.0],
            shift: [0.0; 2],
            clipped: 0,
        };
        assert!(optimal_direction(&[f]).negative_margin);
    }

    #[test]
    fn report_shape_and_optimality() {
        let r = shift_report(DEMO_SEED);
        assert_eq!(r.per_frame.len(), 2);
        assert_eq!(r.pooled_angle_deg.len(), 2);
        for (own, pooled) in r.per_frame.iter().zip(&r.pooled_margin_in_frame) {
            assert!(own.margin >= *pooled);
        }
        assert!(r.pooled.margin <= r.per_frame.iter().map(|d| d.margin).fold(f64::INFINITY, f64::min));
        assert_eq!(r.points_csv().lines().count(), 1 + 2 * (N_SAMPLES + 1));
        assert_eq!(r.directions_csv().lines().count(), 4);
    }
}
