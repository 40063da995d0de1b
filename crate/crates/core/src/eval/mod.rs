//! Point-set comparison of skeletons and regional weight summaries.

mod regions;

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;

pub use regions::{
    coverage, format_region_report, format_region_tsv, read_labels, region_report, write_labels,
    Coverage, Hemisphere, RegionEntry, RegionInfo, RegionLabelVolume, RegionReport, RegionSource,
};

use crate::error::{Error, Result};
use crate::geom::{dist, dist2};
use crate::tree::SkeletonTree;

/// Node positions of the trees plus evenly spaced points on every edge
/// longer than `unit`, so that consecutive points are at most `unit` apart.
pub fn discretize(trees: &[SkeletonTree], unit: f64) -> Result<Vec<[f64; 3]>> {
    if !(unit > 0.0 && unit.is_finite()) {
        return Err(Error::invalid("discretization unit must be positive"));
    }
    let mut out = Vec::new();
    for t in trees {
        out.extend(t.positions());
        for i in 1..t.len() {
            let (a, b) = (t.position(t.parent(i).unwrap()), t.position(i));
            let len = dist(a, b);
            if len > unit {
                let pieces = (len / unit).ceil() as usize;
                for s in 1..pieces {
                    let f = s as f64 / pieces as f64;
                    out.push([0, 1, 2].map(|k| a[k] + f * (b[k] - a[k])));
                }
            }
        }
    }
    Ok(out)
}

/// Bucketed point set answering "is any point within `bound`".
struct PointIndex<'a> {
    points: &'a [[f64; 3]],
    cell: f64,
    buckets: HashMap<[i64; 3], Vec<u32>>,
}

impl<'a> PointIndex<'a> {
    fn new(points: &'a [[f64; 3]], bound: f64) -> Self {
        let cell = if bound > 0.0 { bound } else { 1.0 };
        let mut buckets: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets
                .entry(p.map(|c| (c / cell).floor() as i64))
                .or_default()
                .push(i as u32);
        }
        Self {
            points,
            cell,
            buckets,
        }
    }

    fn any_within(&self, p: [f64; 3], bound: f64) -> bool {
        let k = p.map(|c| (c / self.cell).floor() as i64);
        let b2 = bound * bound;
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if let Some(ids) = self.buckets.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        if ids.iter().any(|&i| dist2(p, self.points[i as usize]) <= b2) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchReport {
    /// Predicted points with a truth point within the bound.
    pub tp: usize,
    /// Predicted points without one.
    pub fp: usize,
    /// Truth points with no predicted point within the bound.
    pub fn_: usize,
    /// Truth points that are matched (`|truth| - fn_`).
    pub truth_matched: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub bound: f64,
}

fn count_within(queries: &[[f64; 3]], index: &PointIndex, bound: f64) -> usize {
    queries
        .par_iter()
        .filter(|&&p| index.any_within(p, bound))
        .count()
}

/// Precision over predicted points and recall over truth points, each
/// counting points with a counterpart within `bound`.
pub fn match_metrics(
    predicted: &[[f64; 3]],
    truth: &[[f64; 3]],
    bound: f64,
) -> Result<MatchReport> {
    if truth.is_empty() {
        return Err(Error::invalid(
            "truth skeleton is empty; recall is undefined",
        ));
    }
    if !(bound >= 0.0) {
        return Err(Error::invalid("distance bound must be non-negative"));
    }
    let truth_index = PointIndex::new(truth, bound);
    let pred_index = PointIndex::new(predicted, bound);
    let tp = count_within(predicted, &truth_index, bound);
    let truth_matched = count_within(truth, &pred_index, bound);
    let fp = predicted.len() - tp;
    let fn_ = truth.len() - truth_matched;
    let precision = if predicted.is_empty() {
        0.0
    } else {
        tp as f64 / predicted.len() as f64
    };
    let recall = truth_matched as f64 / truth.len() as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(MatchReport {
        tp,
        fp,
        fn_,
        truth_matched,
        precision,
        recall,
        f1,
        bound,
    })
}

/// One report per bound; bounds must be ascending.
pub fn f1_vs_bound_sweep(
    predicted: &[[f64; 3]],
    truth: &[[f64; 3]],
    bounds: &[f64],
) -> Result<Vec<MatchReport>> {
    if bounds.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::invalid("bounds must be ascending"));
    }
    bounds
        .iter()
        .map(|&b| match_metrics(predicted, truth, b))
        .collect()
}

/// Aligned text table for one or more reports.
pub fn format_match_reports(reports: &[MatchReport]) -> String {
    let mut s = format!(
        "{:>10} {:>8} {:>8} {:>8} {:>10} {:>10} {:>10}\n",
        "bound", "tp", "fp", "fn", "precision", "recall", "f1"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:>10} {:>8} {:>8} {:>8} {:>10.6} {:>10.6} {:>10.6}",
            r.bound, r.tp, r.fp, r.fn_, r.precision, r.recall, r.f1
        );
    }
    s
}

/// Tab-separated form of the same table.
pub fn format_match_tsv(reports: &[MatchReport]) -> String {
    let mut s = String::from("bound\ttp\tfp\tfn\tprecision\trecall\tf1\n");
    for r in reports {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.bound, r.tp, r.fp, r.fn_, r.precision, r.recall, r.f1
        );
    }
    s
}
