#![allow(dead_code)]

use manhattan_calib::synth::{generate, SegmentCounts, SynthConfig, SynthScene};
use manhattan_calib::{EulerAngles, LineSegment};
use rand::rngs::StdRng;
use rand::RngExt;

pub type M3 = [[f64; 3]; 3];

fn mul(a: &M3, b: &M3) -> M3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// `Rz(roll)·Rx(tilt)·Ry(pan)`, written out by hand.
pub fn oracle_rotation(pan: f64, roll: f64, tilt: f64) -> M3 {
    let (sp, cp) = pan.to_radians().sin_cos();
    let (sr, cr) = roll.to_radians().sin_cos();
    let (st, ct) = tilt.to_radians().sin_cos();
    let rz = [[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]];
    let rx = [[1.0, 0.0, 0.0], [0.0, ct, -st], [0.0, st, ct]];
    let ry = [[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]];
    mul(&rz, &mul(&rx, &ry))
}

/// Angle in degrees between a segment and the line from its midpoint to the
/// vanishing point `K·r`.
pub fn oracle_measure_b(seg: &LineSegment, r: [f64; 3], f: f64, cx: f64, cy: f64) -> f64 {
    let v = [f * r[0] + cx * r[2], f * r[1] + cy * r[2], r[2]];
    let (p, q) = (seg.p1(), seg.p2());
    let (mx, my) = ((p.x + q.x) / 2.0, (p.y + q.y) / 2.0);
    let (dx, dy) = (q.x - p.x, q.y - p.y);
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let (tx, ty) = if (v[2] / norm).abs() < 1e-12 { (v[0], v[1]) } else { (v[0] / v[2] - mx, v[1] / v[2] - my) };
    let cross = (dx * ty - dy * tx).abs();
    let dot = (dx * tx + dy * ty).abs();
    cross.atan2(dot).to_degrees()
}

/// Length-weighted log mixture likelihood under measure b with the default
/// priors and dispersions, evaluated term by term.
pub fn oracle_objective_b(segments: &[LineSegment], pan: f64, roll: f64, tilt: f64, hfov: f64, w: u32, h: u32) -> f64 {
    let r = oracle_rotation(pan, roll, tilt);
    let f = w as f64 / 2.0 / (hfov.to_radians() / 2.0).tan();
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let col = |j: usize| [r[0][j], r[1][j], r[2][j]];
    let expo = |x: f64, lambda: f64| (-x / lambda).exp() / lambda;
    let mut total = 0.0;
    for s in segments {
        let dv = oracle_measure_b(s, col(1), f, cx, cy);
        let dh1 = oracle_measure_b(s, col(0), f, cx, cy);
        let dh2 = oracle_measure_b(s, col(2), f, cx, cy);
        let p = 0.45 * expo(dv, 0.57) + 0.26 * expo(dh1, 1.46) + 0.26 * expo(dh2, 1.46) + 0.03 / 90.0;
        total += s.length() * p.max(1e-300).ln();
    }
    total
}

/// Scene parameters drawn uniformly within the default search bounds.
pub fn random_truth(rng: &mut StdRng) -> (EulerAngles, f64) {
    let angles = EulerAngles::new(
        rng.random_range(-45.0..=45.0),
        rng.random_range(-15.0..=15.0),
        rng.random_range(-35.0..=35.0),
    );
    (angles, rng.random_range(50.0..=130.0))
}

pub fn scene(angles: EulerAngles, hfov: f64, counts: SegmentCounts, noise: f64, seed: u64) -> SynthScene {
    generate(&SynthConfig { angles, hfov_deg: hfov, counts, noise_px: noise, seed, ..SynthConfig::default() })
        .expect("scene generation")
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for &k in &idx[i..=j] {
                r[k] = (i + j) as f64 / 2.0;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let (ma, mb) = (mean(&ra), mean(&rb));
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
