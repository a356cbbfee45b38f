//! Mask scoring and the accuracy/energy sweep table.

use serde::Serialize;

use crate::energy::PowerLookup;
use crate::error::{Error, Result};
use crate::frame_io::Mask;
use crate::sensor_model::BoxGrid;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Score {
    pub true_pos: u64,
    pub false_pos: u64,
    pub true_neg: u64,
    pub false_neg: u64,
    pub precision_score: f64,
    pub recall: f64,
    pub f1: f64,
    pub iou: f64,
    /// At least one ratio was 0/0 and was reported as 0.
    pub degenerate: bool,
}

fn ratio(num: u64, den: u64, degenerate: &mut bool) -> f64 {
    if den == 0 {
        *degenerate = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Score {
    pub fn from_counts(true_pos: u64, false_pos: u64, true_neg: u64, false_neg: u64) -> Self {
        let mut degenerate = false;
        let precision_score = ratio(true_pos, true_pos + false_pos, &mut degenerate);
        let recall = ratio(true_pos, true_pos + false_neg, &mut degenerate);
        let f1 = if precision_score + recall > 0.0 {
            2.0 * precision_score * recall / (precision_score + recall)
        } else {
            degenerate = true;
            0.0
        };
        let iou = ratio(true_pos, true_pos + false_pos + false_neg, &mut degenerate);
        Self {
            true_pos,
            false_pos,
            true_neg,
            false_neg,
            precision_score,
            recall,
            f1,
            iou,
            degenerate,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }

    /// Pools confusion counts (micro-averaging) and recomputes the ratios.
    pub fn merge(&self, other: &Score) -> Score {
        Score::from_counts(
            self.true_pos + other.true_pos,
            self.false_pos + other.false_pos,
            self.true_neg + other.true_neg,
            self.false_neg + other.false_neg,
        )
    }
}

/// How full-resolution truth is reduced to one value per box center.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthRule {
    /// Changed when more than half of the (clipped) box's pixels changed.
    #[default]
    BoxMajority,
    /// The truth value at the center pixel.
    CenterSample,
}

/// Reduces a full-resolution truth mask to center resolution.
pub fn downsample_truth(truth: &Mask, grid: &BoxGrid, rule: TruthRule) -> Result<Mask> {
    if truth.width() != grid.width() || truth.height() != grid.height() {
        return Err(Error::DimensionMismatch(format!(
            "truth is {}x{}, grid is {}x{}",
            truth.width(),
            truth.height(),
            grid.width(),
            grid.height()
        )));
    }
    let data = grid
        .centers()
        .map(|(r, c)| match rule {
            TruthRule::CenterSample => truth.get(r, c),
            TruthRule::BoxMajority => {
                let (rows, cols) = grid.box_bounds(r, c);
                let area = rows.len() * cols.len();
                let changed = rows
                    .flat_map(|y| cols.clone().map(move |x| (y, x)))
                    .filter(|&(y, x)| truth.get(y, x))
                    .count();
                2 * changed > area
            }
        })
        .collect();
    Mask::new(grid.center_cols().len(), grid.center_rows().len(), data)
}

fn confusion(predicted: &Mask, truth: &Mask) -> Result<Score> {
    if !predicted.same_dims(truth) {
        return Err(Error::DimensionMismatch(format!(
            "predicted is {}x{}, truth is {}x{}",
            predicted.width(),
            predicted.height(),
            truth.width(),
            truth.height()
        )));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&p, &t) in predicted.data().iter().zip(truth.data()) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(Score::from_counts(tp, fp, tn, fn_))
}

/// Scores a mask against truth. With a grid, `predicted` is at center
/// resolution and `truth` is reduced by box majority first.
pub fn score_mask(predicted: &Mask, truth: &Mask, grid: Option<&BoxGrid>) -> Result<Score> {
    score_mask_with(predicted, truth, grid, TruthRule::BoxMajority)
}

pub fn score_mask_with(
    predicted: &Mask,
    truth: &Mask,
    grid: Option<&BoxGrid>,
    rule: TruthRule,
) -> Result<Score> {
    match grid {
        None => confusion(predicted, truth),
        Some(g) => confusion(predicted, &downsample_truth(truth, g, rule)?),
    }
}

/// One configuration's results going into a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepInput {
    pub box_size: usize,
    pub precision: u8,
    pub score: Score,
    pub total_joules: f64,
    pub detection_power: PowerLookup,
    pub sense_power_extrapolated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub box_size: usize,
    pub precision: u8,
    pub f1: f64,
    pub iou: f64,
    pub precision_score: f64,
    pub recall: f64,
    pub total_joules: f64,
    pub detection_power_mw: f64,
    pub extrapolated: bool,
    pub degenerate_score: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

/// Builds the sweep table, one row per configuration, sorted by
/// `(box_size, precision)`.
pub fn sweep_report(results: Vec<SweepInput>) -> Result<SweepReport> {
    if results.is_empty() {
        return Err(Error::invalid(
            "sweep",
            "at least one configuration is required",
        ));
    }
    let mut rows: Vec<SweepRow> = results
        .into_iter()
        .map(|r| SweepRow {
            box_size: r.box_size,
            precision: r.precision,
            f1: r.score.f1,
            iou: r.score.iou,
            precision_score: r.score.precision_score,
            recall: r.score.recall,
            total_joules: r.total_joules,
            detection_power_mw: r.detection_power.watts * 1e3,
            extrapolated: r.detection_power.extrapolated || r.sense_power_extrapolated,
            degenerate_score: r.score.degenerate,
        })
        .collect();
    rows.sort_by_key(|r| (r.box_size, r.precision));
    Ok(SweepReport { rows })
}

impl SweepReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)
                .map_err(|e| Error::Config(format!("csv: {e}")))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Config(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(w: usize, h: usize, trues: &[(usize, usize)]) -> Mask {
        let mut m = Mask::empty(w, h);
        for &(r, c) in trues {
            m.set(r, c, true);
        }
        m
    }

    #[test]
    fn perfect_prediction() {
        let t = mask(4, 4, &[(1, 1), (2, 3)]);
        let s = score_mask(&t, &t, None).unwrap();
        assert_eq!(
            (s.precision_score, s.recall, s.f1, s.iou),
            (1.0, 1.0, 1.0, 1.0)
        );
        assert_eq!(s.total(), 16);
        assert!(!s.degenerate);
    }

    #[test]
    fn all_false_prediction() {
        let t = mask(4, 4, &[(0, 0), (3, 3), (2, 2)]);
        let s = score_mask(&Mask::empty(4, 4), &t, None).unwrap();
        assert_eq!(s.recall, 0.0);
        assert_eq!(s.f1, 0.0);
        assert_eq!(s.false_neg, 3);
        assert!(s.degenerate);
    }

    #[test]
    fn disjoint_single_pixels() {
        let s = score_mask(&mask(3, 3, &[(0, 0)]), &mask(3, 3, &[(2, 2)]), None).unwrap();
        assert_eq!(s.iou, 0.0);
        assert_eq!(
            (s.true_pos, s.false_pos, s.false_neg, s.true_neg),
            (0, 1, 1, 7)
        );
    }

    #[test]
    fn empty_scene_is_degenerate_not_nan() {
        let s = score_mask(&Mask::empty(2, 2), &Mask::empty(2, 2), None).unwrap();
        assert_eq!(s.f1, 0.0);
        assert!(s.degenerate);
        assert!(!s.iou.is_nan());
    }

    #[test]
    fn box_majority_downsampling() {
        let g = BoxGrid::new(6, 6, 3).unwrap();
        // box (0,0) fully set, box (0,1) with 4 of 9, box (1,0) with 5 of 9
        let mut t = Mask::empty(6, 6);
        for r in 0..3 {
            for c in 0..3 {
                t.set(r, c, true);
            }
        }
        for &(r, c) in &[(0, 3), (0, 4), (0, 5), (1, 3)] {
            t.set(r, c, true);
        }
        for &(r, c) in &[(3, 0), (3, 1), (3, 2), (4, 0), (4, 2)] {
            t.set(r, c, true);
        }
        let d = downsample_truth(&t, &g, TruthRule::BoxMajority).unwrap();
        assert_eq!(d.data(), &[true, false, true, false]);
        let c = downsample_truth(&t, &g, TruthRule::CenterSample).unwrap();
        assert_eq!(c.data(), &[true, false, false, false]);
    }

    #[test]
    fn sweep_rows_sorted() {
        let input = |b, p| SweepInput {
            box_size: b,
            precision: p,
            score: Score::from_counts(1, 0, 1, 0),
            total_joules: 1.0,
            detection_power: PowerLookup {
                watts: 0.5,
                extrapolated: p % 2 == 1,
            },
            sense_power_extrapolated: false,
        };
        let r = sweep_report(vec![input(7, 2), input(3, 4), input(3, 1)]).unwrap();
        let keys: Vec<_> = r.rows.iter().map(|r| (r.box_size, r.precision)).collect();
        assert_eq!(keys, vec![(3, 1), (3, 4), (7, 2)]);
        assert!(r.rows[0].extrapolated);
        assert_eq!(sweep_report(vec![input(5, 3)]).unwrap().rows.len(), 1);
        assert!(sweep_report(vec![]).is_err());
        let csv = r.to_csv().unwrap();
        assert!(csv.starts_with("box_size,precision,f1,iou"));
        assert_eq!(csv.lines().count(), 4);
    }
}
