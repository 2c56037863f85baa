//! Mask overlap metrics and the paired comparison of two label sources
//! against shared ground truth.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imgcore::BinaryMask;

fn overlap(pred: &BinaryMask, gt: &BinaryMask) -> Result<(usize, usize, usize)> {
    if pred.width() != gt.width() || pred.height() != gt.height() {
        return Err(Error::DimensionMismatch(format!(
            "prediction {}x{} vs ground truth {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    let inter = pred.data().iter().zip(gt.data()).filter(|(a, b)| **a && **b).count();
    Ok((inter, pred.count(), gt.count()))
}

/// Intersection over union; 1.0 when both masks are empty.
pub fn iou(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    let (inter, p, g) = overlap(pred, gt)?;
    let union = p + g - inter;
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Precision (1.0 for an empty prediction) and recall (1.0 for empty ground truth).
pub fn precision_recall(pred: &BinaryMask, gt: &BinaryMask) -> Result<(f64, f64)> {
    let (inter, p, g) = overlap(pred, gt)?;
    let precision = if p == 0 { 1.0 } else { inter as f64 / p as f64 };
    let recall = if g == 0 { 1.0 } else { inter as f64 / g as f64 };
    Ok((precision, recall))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItemScore {
    pub iou: f64,
    pub precision: f64,
    pub recall: f64,
}

pub fn score_item(pred: &BinaryMask, gt: &BinaryMask) -> Result<ItemScore> {
    let (precision, recall) = precision_recall(pred, gt)?;
    Ok(ItemScore {
        iou: iou(pred, gt)?,
        precision,
        recall,
    })
}

/// Macro averages over items plus the per-item scores.
#[derive(Debug, Clone, PartialEq)]
pub struct SegScore {
    pub mean_iou: f64,
    pub precision: f64,
    pub recall: f64,
    pub items: Vec<ItemScore>,
}

impl SegScore {
    pub fn from_items(items: Vec<ItemScore>) -> SegScore {
        let n = items.len().max(1) as f64;
        SegScore {
            mean_iou: items.iter().map(|s| s.iou).sum::<f64>() / n,
            precision: items.iter().map(|s| s.precision).sum::<f64>() / n,
            recall: items.iter().map(|s| s.recall).sum::<f64>() / n,
            items,
        }
    }
}

pub fn score_masks(preds: &[BinaryMask], gts: &[BinaryMask]) -> Result<SegScore> {
    if preds.len() != gts.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions vs {} ground truth masks",
            preds.len(),
            gts.len()
        )));
    }
    let items = preds
        .par_iter()
        .zip(gts)
        .map(|(p, g)| score_item(p, g))
        .collect::<Result<_>>()?;
    Ok(SegScore::from_items(items))
}

/// Scores two label sources against the same ground truth.
pub fn compare_sources(a: &[BinaryMask], b: &[BinaryMask], gt: &[BinaryMask]) -> Result<(SegScore, SegScore)> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} labels", a.len(), b.len())));
    }
    Ok((score_masks(a, gt)?, score_masks(b, gt)?))
}

/// Tab-separated report: a header, one row per item and a final `mean` row,
/// all values with 4 decimals.
pub fn format_score_report(names: &[String], score: &SegScore) -> Result<String> {
    if names.len() != score.items.len() {
        return Err(Error::DimensionMismatch("one name per scored item".into()));
    }
    let mut out = String::from("item\tiou\tprecision\trecall\n");
    for (name, s) in names.iter().zip(&score.items) {
        out.push_str(&format!("{name}\t{:.4}\t{:.4}\t{:.4}\n", s.iou, s.precision, s.recall));
    }
    out.push_str(&format!(
        "mean\t{:.4}\t{:.4}\t{:.4}\n",
        score.mean_iou, score.precision, score.recall
    ));
    Ok(out)
}
