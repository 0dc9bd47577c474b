use serde::{Deserialize, Serialize};

use super::{Prepared, EPS};
use crate::assignment::max_weight_matching;

/// Bonus that makes continuing last frame's correspondence win any tie.
const CONTINUITY_BONUS: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClearCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub idsw: u64,
    pub similarity_sum: f64,
}

impl ClearCounts {
    pub fn add(&mut self, o: &ClearCounts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.idsw += o.idsw;
        self.similarity_sum += o.similarity_sum;
    }

    pub fn gt_count(&self) -> u64 {
        self.tp + self.fn_
    }

    /// `1 − (FN + FP + IDSW) / GT`; 1 when there is nothing to track and
    /// nothing was predicted.
    pub fn mota(&self) -> f64 {
        let gt = self.gt_count();
        if gt == 0 && self.fp == 0 {
            return 1.0;
        }
        (self.tp as f64 - self.fp as f64 - self.idsw as f64) / gt.max(1) as f64
    }

    pub fn motp(&self) -> f64 {
        if self.tp == 0 {
            return 0.0;
        }
        self.similarity_sum / self.tp as f64
    }
}

pub(super) fn compute(data: &Prepared, threshold: f64) -> ClearCounts {
    let mut out = ClearCounts::default();
    let mut last_match: Vec<Option<usize>> = vec![None; data.n_gt_ids];
    let mut prev_frame: Vec<Option<usize>> = vec![None; data.n_gt_ids];
    for fr in &data.frames {
        let (rows, cols) = (fr.gt.len(), fr.tr.len());
        // Frames without gt or without predictions leave the continuity state alone.
        if rows == 0 || cols == 0 {
            out.fn_ += rows as u64;
            out.fp += cols as u64;
            continue;
        }
        let mut weights = Vec::with_capacity(rows * cols);
        let mut admissible = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let s = fr.sim(i, j);
                let bonus = if prev_frame[fr.gt[i]] == Some(fr.tr[j]) { CONTINUITY_BONUS } else { 0.0 };
                weights.push(bonus + s);
                admissible.push(s >= threshold - EPS);
            }
        }
        let pairs = max_weight_matching(rows, cols, &weights, &admissible);
        prev_frame.iter_mut().for_each(|p| *p = None);
        for &(i, j) in &pairs {
            let (g, t) = (fr.gt[i], fr.tr[j]);
            if last_match[g].is_some_and(|p| p != t) {
                out.idsw += 1;
            }
            last_match[g] = Some(t);
            prev_frame[g] = Some(t);
            out.similarity_sum += fr.sim(i, j);
        }
        let n = pairs.len() as u64;
        out.tp += n;
        out.fn_ += rows as u64 - n;
        out.fp += cols as u64 - n;
    }
    out
}
