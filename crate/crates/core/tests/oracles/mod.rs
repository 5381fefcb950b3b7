//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls into the code under test except for
//! plain data types.

#![allow(dead_code)]

use std::collections::BTreeSet;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rand::Rng;

use twoplane::eval::GroundTruthFrame;
use twoplane::geometry::LineSegment;
use twoplane::{BBox, Point2};

// ---------------------------------------------------------------- geometry

/// Random BEV -> image projective map with moderate perspective. Its inverse
/// is what a DLT from the image quad onto the BEV rectangle should recover.
pub fn random_bev_to_image<R: Rng>(rng: &mut R) -> Matrix3<f64> {
    Matrix3::new(
        rng.random_range(0.5..1.5),
        rng.random_range(-0.3..0.3),
        rng.random_range(-200.0..200.0),
        rng.random_range(-0.3..0.3),
        rng.random_range(0.5..1.5),
        rng.random_range(-200.0..200.0),
        rng.random_range(-3e-4..3e-4),
        rng.random_range(-3e-4..3e-4),
        1.0,
    )
}

/// Divides by the entry of largest magnitude, keeping its sign.
pub fn normalize_by_max(m: &Matrix3<f64>) -> Matrix3<f64> {
    let mut best = m[(0, 0)];
    for v in m.iter() {
        if v.abs() > best.abs() {
            best = *v;
        }
    }
    m / best
}

pub fn project(m: &Matrix3<f64>, p: Point2) -> Point2 {
    let q = m * Vector3::new(p.x, p.y, 1.0);
    Point2::new(q.x / q.z, q.y / q.z)
}

/// Least-squares concurrence point of infinite lines, solved through the
/// 2×2 normal equations built from explicit line equations `a x + b y = c`.
pub fn vp_normal_equations(lines: &[LineSegment]) -> Point2 {
    let mut ata = Matrix2::zeros();
    let mut atb = Vector2::zeros();
    for l in lines {
        let (p, q) = (l.a(), l.b());
        let (a, b) = (q.y - p.y, p.x - q.x);
        let len = (a * a + b * b).sqrt();
        let (a, b) = (a / len, b / len);
        let c = a * p.x + b * p.y;
        ata += Matrix2::new(a * a, a * b, a * b, b * b);
        atb += Vector2::new(a * c, b * c);
    }
    let s = ata.try_inverse().expect("non-degenerate line set") * atb;
    Point2::new(s.x, s.y)
}

/// Segment of length `len` through `p` rotated by `angle` about `pivot`.
pub fn rotated_segment(through: Point2, direction: f64, pivot: Point2, angle: f64) -> LineSegment {
    let (c, s) = (angle.cos(), angle.sin());
    let rot = |p: Point2| {
        let (dx, dy) = (p.x - pivot.x, p.y - pivot.y);
        Point2::new(pivot.x + c * dx - s * dy, pivot.y + s * dx + c * dy)
    };
    let far = Point2::new(through.x + 300.0 * direction.cos(), through.y + 300.0 * direction.sin());
    LineSegment::new(rot(through), rot(far)).unwrap()
}

// ------------------------------------------------------------- quadrature

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Reference inverse axis map, computed in pixel units by direct numerical
/// integration of the saliency-weighted Gaussian mean.
///
/// The saliency sample `k` covers the pixel interval centred on
/// `k·(in_len−1)/(n−1)`; values repeat past both ends. The kernel has
/// `σ = sigma_frac · in_len` px and is cut at 3σ.
pub fn brute_axis_map(s: &[f64], in_len: usize, out_len: usize, sigma_frac: f64, rescale: bool) -> Vec<f64> {
    let n = s.len();
    let last = (in_len - 1) as f64;
    let cell = last / (n - 1) as f64;
    let sigma = sigma_frac * in_len as f64;
    let rule = gauss_legendre(24);
    let raw: Vec<f64> = (0..out_len)
        .map(|i| {
            let x = i as f64 * last / (out_len - 1) as f64;
            let (lo, hi) = (x - 3.0 * sigma, x + 3.0 * sigma);
            let k_lo = ((lo / cell) - 0.5).floor() as i64 - 1;
            let k_hi = ((hi / cell) + 0.5).ceil() as i64 + 1;
            let (mut num, mut den) = (0.0, 0.0);
            for k in k_lo..=k_hi {
                let a = ((k as f64 - 0.5) * cell).max(lo);
                let b = ((k as f64 + 0.5) * cell).min(hi);
                if b <= a {
                    continue;
                }
                let sk = s[k.clamp(0, n as i64 - 1) as usize];
                let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
                for &(t, w) in &rule {
                    let xp = mid + half * t;
                    let g = (-0.5 * ((xp - x) / sigma).powi(2)).exp();
                    num += sk * g * xp * w * half;
                    den += sk * g * w * half;
                }
            }
            num / den
        })
        .collect();
    if !rescale {
        return raw.iter().map(|t| t.clamp(0.0, last)).collect();
    }
    let (t0, t1) = (raw[0], raw[out_len - 1]);
    raw.iter().map(|t| ((t - t0) * last / (t1 - t0)).clamp(0.0, last)).collect()
}

// ------------------------------------------------------------------ metrics

fn overlap(a: &BBox, b: &BBox) -> f64 {
    let w = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let h = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let i = w * h;
    if i == 0.0 {
        0.0
    } else {
        i / (a.area() + b.area() - i)
    }
}

/// AP of one class at one threshold with no ignore regions, by enumerating
/// every score cutoff: at each recall level the interpolated precision is
/// the best precision of any cutoff reaching that recall.
pub fn ap_by_cutoffs(dets: &[Vec<BBox>], gts: &[Vec<BBox>], threshold: f64) -> Option<f64> {
    let n_gt: usize = gts.iter().map(Vec::len).sum();
    if n_gt == 0 {
        return None;
    }
    // per-frame greedy matching in score order; ties on IoU go to the later box
    let mut outcomes: Vec<(f64, bool)> = Vec::new();
    for (d, g) in dets.iter().zip(gts) {
        let mut order: Vec<&BBox> = d.iter().collect();
        order.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
        let mut taken = vec![false; g.len()];
        for det in order {
            let mut best: Option<(usize, f64)> = None;
            for (j, gt) in g.iter().enumerate() {
                let o = overlap(det, gt);
                if taken[j] || o < threshold.min(1.0 - 1e-10) {
                    continue;
                }
                if best.is_none_or(|(_, bo)| o >= bo) {
                    best = Some((j, o));
                }
            }
            if let Some((j, _)) = best {
                taken[j] = true;
            }
            outcomes.push((det.score, best.is_some()));
        }
    }
    outcomes.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let curve: Vec<(f64, f64)> = (1..=outcomes.len())
        .map(|k| {
            let tp = outcomes[..k].iter().filter(|o| o.1).count();
            (tp as f64 / n_gt as f64, tp as f64 / k as f64)
        })
        .collect();
    let mut total = 0.0;
    for r in 0..101 {
        let level = r as f64 / 100.0;
        let best = curve
            .iter()
            .filter(|(rec, _)| *rec >= level)
            .map(|(_, p)| *p)
            .fold(None, |acc: Option<f64>, p| Some(acc.map_or(p, |a| a.max(p))));
        total += best.unwrap_or(0.0);
    }
    Some(total / 101.0)
}

/// Mean AP over classes present in the ground truth and the given
/// thresholds, summed class-major.
pub fn mean_ap_by_cutoffs(dets: &[Vec<BBox>], gts: &[GroundTruthFrame], thresholds: &[f64]) -> Option<f64> {
    let classes: BTreeSet<u32> = gts.iter().flat_map(|f| f.boxes.iter().map(|b| b.class_id)).collect();
    let mut sum = 0.0;
    let mut count = 0usize;
    for c in classes {
        let d: Vec<Vec<BBox>> = dets
            .iter()
            .map(|f| f.iter().filter(|b| b.class_id == c).copied().collect())
            .collect();
        let g: Vec<Vec<BBox>> = gts
            .iter()
            .map(|f| f.boxes.iter().filter(|b| b.class_id == c).copied().collect())
            .collect();
        for &t in thresholds {
            if let Some(ap) = ap_by_cutoffs(&d, &g, t) {
                sum += ap;
                count += 1;
            }
        }
    }
    (count > 0).then(|| sum / count as f64)
}

pub fn coco_thresholds() -> Vec<f64> {
    (0..10).map(|i| 0.5 + 0.05 * i as f64).collect()
}

/// Random small scene: a few frames, at most six boxes per frame in up to
/// three classes, detections as jittered copies plus false positives.
pub fn random_scene<R: Rng>(rng: &mut R) -> (Vec<Vec<BBox>>, Vec<GroundTruthFrame>) {
    let frames = rng.random_range(1..=3);
    let mut dets = Vec::new();
    let mut gts = Vec::new();
    for f in 0..frames {
        let n = rng.random_range(0..=6);
        let mut g = Vec::new();
        let mut d = Vec::new();
        for _ in 0..n {
            let x = rng.random_range(0.0..80.0);
            let y = rng.random_range(0.0..80.0);
            let w = rng.random_range(5.0..40.0);
            let h = rng.random_range(5.0..40.0);
            let class = rng.random_range(0..3);
            let b = BBox::new(x, y, x + w, y + h, 1.0, class).unwrap();
            g.push(b);
            if rng.random_bool(0.7) {
                let j = |r: &mut R| r.random_range(-2.4..2.4);
                let (dx1, dy1, dx2, dy2) = (j(rng), j(rng), j(rng), j(rng));
                d.push(BBox::new(x + dx1, y + dy1, x + w + dx2, y + h + dy2, rng.random(), class).unwrap());
            }
        }
        for _ in 0..rng.random_range(0..=3) {
            let x = rng.random_range(0.0..90.0);
            let y = rng.random_range(0.0..90.0);
            let class = rng.random_range(0..3);
            d.push(BBox::new(x, y, x + rng.random_range(3.0..30.0), y + 10.0, rng.random(), class).unwrap());
        }
        gts.push(GroundTruthFrame {
            frame_id: f,
            timestamp_ms: f as f64 * 100.0,
            boxes: g,
            track_ids: None,
        });
        dets.push(d);
    }
    (dets, gts)
}

// ---------------------------------------------------------------- streaming

/// For each arrival, the last emission strictly earlier, by linear scan.
pub fn pair_by_scan(emit_ms: &[f64], arrivals_ms: &[f64]) -> Vec<Option<usize>> {
    arrivals_ms
        .iter()
        .map(|&t| {
            let mut best: Option<usize> = None;
            for (i, &e) in emit_ms.iter().enumerate() {
                if e < t && best.is_none_or(|b| emit_ms[b] <= e) {
                    best = Some(i);
                }
            }
            best
        })
        .collect()
}

/// Hand-rolled ProcessLatest schedule for a constant latency: returns
/// `(frame index, emit time)` pairs.
pub fn constant_latency_schedule(arrivals_ms: &[f64], latency_ms: f64) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let mut t = 0.0;
    let mut done: Option<usize> = None;
    loop {
        let newest = arrivals_ms.iter().rposition(|&a| a <= t);
        match newest {
            Some(k) if done.is_none_or(|d| k > d) => {
                t += latency_ms;
                out.push((k, t));
                done = Some(k);
            }
            _ => {
                let next = done.map_or(0, |d| d + 1);
                if next >= arrivals_ms.len() {
                    return out;
                }
                t = arrivals_ms[next];
            }
        }
    }
}
