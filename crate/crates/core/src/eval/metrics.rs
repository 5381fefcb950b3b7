//! IoU and COCO-style average precision over per-frame box lists.
//!
//! Follows the usual COCO conventions: IoU thresholds 0.50:0.05:0.95,
//! 101-point interpolated precision, greedy score-ordered matching, and
//! small/medium/large buckets split at 32² and 96² px². Ground truth outside
//! a bucket is ignored rather than dropped, so a detection matching it is
//! neither a true nor a false positive.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::GroundTruthFrame;
use crate::bbox::BBox;

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaRange {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

impl AreaRange {
    fn new(name: &str, lo: f64, hi: f64) -> Self {
        Self {
            name: name.to_string(),
            lo,
            hi,
        }
    }

    fn contains(&self, area: f64) -> bool {
        area >= self.lo && area <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApParams {
    pub iou_thresholds: Vec<f64>,
    pub area_ranges: Vec<AreaRange>,
    pub max_dets: usize,
}

pub const RECALL_POINTS: usize = 101;

impl Default for ApParams {
    fn default() -> Self {
        Self {
            iou_thresholds: (0..10).map(|i| 0.5 + 0.05 * i as f64).collect(),
            area_ranges: vec![
                AreaRange::new("all", 0.0, 1e10),
                AreaRange::new("small", 0.0, 32.0 * 32.0),
                AreaRange::new("medium", 32.0 * 32.0, 96.0 * 96.0),
                AreaRange::new("large", 96.0 * 96.0, 1e10),
            ],
            max_dets: 100,
        }
    }
}

impl ApParams {
    /// Single IoU threshold, all areas.
    pub fn at_threshold(t: f64) -> Self {
        Self {
            iou_thresholds: vec![t],
            area_ranges: vec![AreaRange::new("all", 0.0, 1e10)],
            max_dets: 100,
        }
    }
}

/// AP summary. `None` marks an empty bucket (no ground truth to score).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    pub ap: Option<f64>,
    pub ap50: Option<f64>,
    pub ap75: Option<f64>,
    pub ap_s: Option<f64>,
    pub ap_m: Option<f64>,
    pub ap_l: Option<f64>,
    pub per_class: BTreeMap<u32, ClassAp>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAp {
    pub ap: Option<f64>,
    pub ap50: Option<f64>,
    pub ap75: Option<f64>,
}

/// One scored detection after matching at a given threshold and area range.
#[derive(Debug, Clone, Copy)]
pub(crate) struct MatchedDet {
    pub score: f64,
    pub matched: bool,
    pub ignored: bool,
}

/// Greedy matching of one frame's detections (score order) to its ground
/// truth for one class, threshold and area range.
///
/// Returns the per-detection outcome and the number of non-ignored GT boxes.
pub(crate) fn match_frame(
    dets: &[BBox],
    gts: &[BBox],
    threshold: f64,
    range: &AreaRange,
    max_dets: usize,
) -> (Vec<MatchedDet>, usize) {
    let mut gt_order: Vec<(usize, bool)> = gts
        .iter()
        .enumerate()
        .map(|(i, g)| (i, !range.contains(g.area())))
        .collect();
    // non-ignored first, original order otherwise
    gt_order.sort_by_key(|&(_, ignored)| ignored);
    let counted = gt_order.iter().filter(|(_, ign)| !ign).count();

    let mut det_order: Vec<usize> = (0..dets.len()).collect();
    det_order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score));
    det_order.truncate(max_dets);

    let mut gt_taken = vec![false; gt_order.len()];
    let mut out = Vec::with_capacity(det_order.len());
    for &d in &det_order {
        let det = &dets[d];
        let mut best = threshold.min(1.0 - 1e-10);
        let mut found: Option<usize> = None;
        for (slot, &(g, ignored)) in gt_order.iter().enumerate() {
            if gt_taken[slot] {
                continue;
            }
            // once matched to a counted box, never switch to an ignored one
            if let Some(m) = found {
                if !gt_order[m].1 && ignored {
                    break;
                }
            }
            let o = iou(det, &gts[g]);
            if o < best {
                continue;
            }
            best = o;
            found = Some(slot);
        }
        let (matched, ignored) = match found {
            Some(slot) => {
                gt_taken[slot] = true;
                (true, gt_order[slot].1)
            }
            None => (false, !range.contains(det.area())),
        };
        out.push(MatchedDet {
            score: det.score,
            matched,
            ignored,
        });
    }
    (out, counted)
}

/// 101-point interpolated precision of a score-sorted detection list.
pub(crate) fn interpolated_ap(sorted: &[MatchedDet], n_gt: usize) -> f64 {
    let mut recall = Vec::with_capacity(sorted.len());
    let mut precision = Vec::with_capacity(sorted.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for d in sorted.iter().filter(|d| !d.ignored) {
        if d.matched {
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(tp as f64 / n_gt as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    for i in (1..precision.len()).rev() {
        if precision[i] > precision[i - 1] {
            precision[i - 1] = precision[i];
        }
    }
    let mut total = 0.0;
    for k in 0..RECALL_POINTS {
        let r = k as f64 / (RECALL_POINTS - 1) as f64;
        let idx = recall.partition_point(|&x| x < r);
        if idx < precision.len() {
            total += precision[idx];
        }
    }
    total / RECALL_POINTS as f64
}

fn mean(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = xs.flatten().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// AP for `dets[k]` scored against `gts[k]`, averaged over classes present
/// in the ground truth.
pub fn coco_ap(dets: &[Vec<BBox>], gts: &[GroundTruthFrame], params: &ApParams) -> ApReport {
    assert_eq!(dets.len(), gts.len(), "one detection list per ground-truth frame");
    let classes: BTreeSet<u32> = gts
        .iter()
        .flat_map(|f| f.boxes.iter().map(|b| b.class_id))
        .collect();

    // table[class][area][threshold]
    let mut table: BTreeMap<u32, Vec<Vec<Option<f64>>>> = BTreeMap::new();
    for &class in &classes {
        let per_frame: Vec<(Vec<BBox>, Vec<BBox>)> = dets
            .iter()
            .zip(gts)
            .map(|(d, g)| {
                (
                    d.iter().filter(|b| b.class_id == class).copied().collect(),
                    g.boxes.iter().filter(|b| b.class_id == class).copied().collect(),
                )
            })
            .collect();
        let rows = params
            .area_ranges
            .iter()
            .map(|range| {
                params
                    .iou_thresholds
                    .iter()
                    .map(|&t| {
                        let mut all = Vec::new();
                        let mut n_gt = 0;
                        for (d, g) in &per_frame {
                            let (m, n) = match_frame(d, g, t, range, params.max_dets);
                            all.extend(m);
                            n_gt += n;
                        }
                        if n_gt == 0 {
                            return None;
                        }
                        // stable: equal scores keep frame order
                        all.sort_by(|a, b| b.score.total_cmp(&a.score));
                        Some(interpolated_ap(&all, n_gt))
                    })
                    .collect()
            })
            .collect();
        table.insert(class, rows);
    }

    let area_idx = |name: &str| params.area_ranges.iter().position(|r| r.name == name);
    let thr_idx = |t: f64| params.iou_thresholds.iter().position(|x| (x - t).abs() < 1e-9);
    let summarize = |class: Option<u32>, area: Option<usize>, thr: Option<usize>| -> Option<f64> {
        let area = area?;
        let cells = table
            .iter()
            .filter(|(c, _)| class.is_none_or(|k| **c == k))
            .flat_map(|(_, rows)| {
                rows[area]
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| thr.is_none_or(|t| *i == t))
                    .map(|(_, v)| *v)
            });
        mean(cells)
    };
    let (all, t50, t75) = (area_idx("all"), thr_idx(0.5), thr_idx(0.75));
    let per_class = classes
        .iter()
        .map(|&c| {
            (
                c,
                ClassAp {
                    ap: summarize(Some(c), all, None),
                    ap50: t50.and_then(|t| summarize(Some(c), all, Some(t))),
                    ap75: t75.and_then(|t| summarize(Some(c), all, Some(t))),
                },
            )
        })
        .collect();
    ApReport {
        ap: summarize(None, all, None),
        ap50: t50.and_then(|t| summarize(None, all, Some(t))),
        ap75: t75.and_then(|t| summarize(None, all, Some(t))),
        ap_s: summarize(None, area_idx("small"), None),
        ap_m: summarize(None, area_idx("medium"), None),
        ap_l: summarize(None, area_idx("large"), None),
        per_class,
    }
}
