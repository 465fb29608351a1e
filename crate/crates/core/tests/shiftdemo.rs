use std::f64::consts::PI;

use rcirl_core::shiftdemo::{generate_frame, optimal_direction, shift_report, MarginFrame, DEMO_SEED};

fn margin(frame: &MarginFrame, theta: f64) -> f64 {
    let (c, s) = (theta.cos(), theta.sin());
    frame
        .samples
        .iter()
        .map(|p| c * (frame.demonstration[0] - p[0]) + s * (frame.demonstration[1] - p[1]))
        .fold(f64::INFINITY, f64::min)
}

fn fine_sweep(frames: &[MarginFrame]) -> (f64, f64) {
    (0..36_000)
        .map(|i| {
            let theta = i as f64 * 2.0 * PI / 36_000.0;
            (theta, frames.iter().map(|f| margin(f, theta)).fold(f64::INFINITY, f64::min))
        })
        .fold((0.0, f64::NEG_INFINITY), |best, x| if x.1 > best.1 { x } else { best })
}

#[test]
fn directions_agree_with_a_fine_sweep() {
    for seed in 0..5 {
        let a = generate_frame(seed, [0.0, 0.0]);
        let b = generate_frame(seed + 100, [20.0, -30.0]);
        for frames in [vec![a.clone()], vec![b.clone()], vec![a.clone(), b.clone()]] {
            let d = optimal_direction(&frames);
            let (_, oracle) = fine_sweep(&frames);
            assert!(d.margin >= oracle - 1e-9, "seed {seed}: {} < {oracle}", d.margin);
            assert!(d.margin - oracle < 1e-2);
            assert!((d.direction[0].hypot(d.direction[1]) - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn fixed_seed_shows_the_pooled_compromise() {
    let r = shift_report(DEMO_SEED);
    for (i, (d, f)) in r.per_frame.iter().zip(&r.frames).enumerate() {
        let own = margin(f, d.angle_deg.to_radians());
        assert!(own > 0.0, "frame {i} not separable");
        assert!((own - d.margin).abs() < 1e-9);
    }
    assert!(r.pooled_angle_deg.iter().all(|&a| a > 10.0), "{:?}", r.pooled_angle_deg);
    let dropped = r
        .per_frame
        .iter()
        .zip(&r.frames)
        .any(|(d, f)| margin(f, r.pooled.angle_deg.to_radians()) < d.margin);
    assert!(dropped);
    let min_own = r.per_frame.iter().map(|d| d.margin).fold(f64::INFINITY, f64::min);
    assert!(r.pooled.margin <= min_own);
}

#[test]
fn csv_rows_carry_every_point() {
    let r = shift_report(DEMO_SEED);
    let points = r.points_csv();
    let demos = points.lines().skip(1).filter(|l| l.ends_with(",1")).count();
    assert_eq!(demos, 2);
    let dirs = r.directions_csv();
    let names: Vec<&str> = dirs.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["frame_0", "frame_1", "pooled"]);
}
