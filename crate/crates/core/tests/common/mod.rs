//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the library's numeric paths; it only uses the
//! library's plain data types.

#![allow(dead_code)]

use pose_scatter::pose_io::{Keypoint, PoseFrame, NUM_KEYPOINTS};
use rand::Rng;

/// Centered second moments computed directly from points.
pub fn moments(points: &[[f64; 2]]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    points.iter().fold((0.0, 0.0, 0.0), |(a, b, c), p| {
        let (dx, dy) = (p[0] - mx, p[1] - my);
        (a + dx * dx, b + dx * dy, c + dy * dy)
    })
}

/// Principal eigenvector of a symmetric PSD 2x2 matrix by repeated squaring:
/// `S^(2^m)` normalized tends to a multiple of the projector onto that eigenvector.
pub fn power_iteration_axis(sxx: f64, sxy: f64, syy: f64) -> [f64; 2] {
    let (mut a, mut b, mut c) = (sxx, sxy, syy);
    for _ in 0..64 {
        let (a2, b2, c2) = (a * a + b * b, b * (a + c), b * b + c * c);
        let scale = a2 + c2;
        if scale == 0.0 {
            break;
        }
        (a, b, c) = (a2 / scale, b2 / scale, c2 / scale);
    }
    let col = if a.hypot(b) >= b.hypot(c) {
        [a, b]
    } else {
        [b, c]
    };
    let norm = col[0].hypot(col[1]);
    [col[0] / norm, col[1] / norm]
}

/// Residual scatter off a unit axis: sum of ||(I - u u^T)(x_i - mean)||^2.
pub fn projection_residual(points: &[[f64; 2]], axis: [f64; 2]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    points
        .iter()
        .map(|p| {
            let (dx, dy) = (p[0] - mx, p[1] - my);
            let along = dx * axis[0] + dy * axis[1];
            let (rx, ry) = (dx - along * axis[0], dy - along * axis[1]);
            rx * rx + ry * ry
        })
        .sum()
}

/// Residual scatter with the principal axis found by power iteration.
pub fn residual_scatter_oracle(points: &[[f64; 2]]) -> f64 {
    let (sxx, sxy, syy) = moments(points);
    projection_residual(points, power_iteration_axis(sxx, sxy, syy))
}

/// Smallest projected residual over `steps` evenly spaced axis angles in [0, pi).
pub fn swept_min_residual(points: &[[f64; 2]], steps: usize) -> f64 {
    let (sxx, sxy, syy) = moments(points);
    (0..steps)
        .map(|i| {
            let phi = std::f64::consts::PI * i as f64 / steps as f64;
            let (s, c) = phi.sin_cos();
            // Variance orthogonal to direction (c, s).
            sxx * s * s - 2.0 * sxy * s * c + syy * c * c
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// A random frame in a 1080x720 image with at least 3 keypoints at or above
/// `threshold`; others are below it or undetected.
pub fn random_frame<R: Rng>(rng: &mut R, threshold: f64) -> PoseFrame {
    loop {
        let mut kps = [Keypoint::MISSING; NUM_KEYPOINTS];
        let mut valid = 0;
        for k in kps.iter_mut() {
            let x = rng.gen_range(0.0..1080.0);
            let y = rng.gen_range(0.0..720.0);
            let roll: f64 = rng.gen();
            let confidence = if roll < 0.15 {
                0.0
            } else if roll < 0.3 {
                rng.gen_range(0.0..threshold)
            } else {
                valid += 1;
                rng.gen_range(threshold..=1.0)
            };
            *k = Keypoint::new(x, y, confidence);
        }
        if valid >= 3 {
            return PoseFrame::new(0, kps);
        }
    }
}

/// Local maxima of `z` restricted to `[lo, hi]`; range edges compare only inward.
pub fn restricted_local_maxima(z: &[f64], lo: usize, hi: usize) -> Vec<usize> {
    (lo..=hi)
        .filter(|&i| (i == lo || z[i] >= z[i - 1]) && (i == hi || z[i] >= z[i + 1]))
        .collect()
}

/// Linear-scan argmax over `[lo, hi]`, smallest index on ties.
pub fn scan_argmax(z: &[f64], lo: usize, hi: usize) -> usize {
    let mut best = lo;
    for i in lo..=hi {
        if z[i] > z[best] {
            best = i;
        }
    }
    best
}

/// Best pair of separated peaks anchored at the range argmax, by exhaustive
/// enumeration of all separation-feasible index pairs of peaks. Returns just
/// the argmax when no feasible partner exists.
pub fn brute_force_two_peaks(z: &[f64], delta: usize) -> Vec<usize> {
    let (lo, hi) = (delta, z.len() - delta - 1);
    let top = scan_argmax(z, lo, hi);
    let peaks = restricted_local_maxima(z, lo, hi);
    let mut best: Option<(usize, usize)> = None;
    for &i in &peaks {
        for &j in &peaks {
            if i.abs_diff(j) < 2 * delta + 1 || i != top {
                continue;
            }
            let better = match best {
                None => true,
                Some((bi, bj)) => {
                    let (s, bs) = (z[i] + z[j], z[bi] + z[bj]);
                    s > bs || (s == bs && j < bj)
                }
            };
            if better {
                best = Some((i, j));
            }
        }
    }
    match best {
        Some((i, j)) => vec![i, j],
        None => vec![top],
    }
}

/// Truncated centered moving average by direct window enumeration.
pub fn windowed_mean(signal: &[f64], window: usize) -> Vec<f64> {
    let half = window as isize / 2;
    (0..signal.len() as isize)
        .map(|i| {
            let members: Vec<f64> = (i - half..=i + half)
                .filter(|&j| j >= 0 && (j as usize) < signal.len())
                .map(|j| signal[j as usize])
                .collect();
            members.iter().sum::<f64>() / members.len() as f64
        })
        .collect()
}

pub fn data_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

pub fn golden_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}
