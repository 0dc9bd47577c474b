use serde::{Deserialize, Serialize};

use super::{Prepared, EPS};
use crate::assignment::max_weight_matching;

pub const N_ALPHAS: usize = 19;

/// Localisation threshold `i`: 0.05, 0.10, …, 0.95.
pub fn alpha(i: usize) -> f64 {
    0.05 + i as f64 * 0.05
}

/// Per-α HOTA counts. `assoc` is `Σ_matches A(c)`, i.e. AssA·TP.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HotaCounts {
    pub tp: Vec<u64>,
    pub fn_: Vec<u64>,
    pub fp: Vec<u64>,
    pub assoc: Vec<f64>,
    pub loc: Vec<f64>,
}

impl HotaCounts {
    fn zeros() -> Self {
        HotaCounts {
            tp: vec![0; N_ALPHAS],
            fn_: vec![0; N_ALPHAS],
            fp: vec![0; N_ALPHAS],
            assoc: vec![0.0; N_ALPHAS],
            loc: vec![0.0; N_ALPHAS],
        }
    }

    pub fn add(&mut self, o: &HotaCounts) {
        if self.tp.is_empty() {
            *self = HotaCounts::zeros();
        }
        if o.tp.is_empty() {
            return;
        }
        for a in 0..N_ALPHAS {
            self.tp[a] += o.tp[a];
            self.fn_[a] += o.fn_[a];
            self.fp[a] += o.fp[a];
            self.assoc[a] += o.assoc[a];
            self.loc[a] += o.loc[a];
        }
    }

    fn per_alpha(&self, f: impl Fn(usize) -> f64) -> f64 {
        if self.tp.is_empty() {
            return 1.0;
        }
        (0..N_ALPHAS).map(f).sum::<f64>() / N_ALPHAS as f64
    }

    fn is_void(&self, a: usize) -> bool {
        self.tp[a] + self.fn_[a] + self.fp[a] == 0
    }

    pub fn deta_at(&self, a: usize) -> f64 {
        if self.tp.is_empty() || self.is_void(a) {
            return 1.0;
        }
        self.tp[a] as f64 / (self.tp[a] + self.fn_[a] + self.fp[a]) as f64
    }

    pub fn assa_at(&self, a: usize) -> f64 {
        if self.tp.is_empty() || self.is_void(a) {
            return 1.0;
        }
        self.assoc[a] / self.tp[a].max(1) as f64
    }

    pub fn hota_at(&self, a: usize) -> f64 {
        (self.deta_at(a) * self.assa_at(a)).sqrt()
    }

    pub fn hota(&self) -> f64 {
        self.per_alpha(|a| self.hota_at(a))
    }

    pub fn deta(&self) -> f64 {
        self.per_alpha(|a| self.deta_at(a))
    }

    pub fn assa(&self) -> f64 {
        self.per_alpha(|a| self.assa_at(a))
    }

    pub fn loca(&self) -> f64 {
        self.per_alpha(|a| {
            if self.tp[a] == 0 {
                1.0
            } else {
                self.loc[a] / self.tp[a] as f64
            }
        })
    }
}

pub(super) fn compute(data: &Prepared) -> HotaCounts {
    let (ng, nt) = (data.n_gt_ids, data.n_tr_ids);
    let mut out = HotaCounts::zeros();

    // Global alignment between identities, from frame-normalised similarity.
    let mut potential = vec![0.0; ng * nt];
    let mut gt_count = vec![0.0; ng];
    let mut tr_count = vec![0.0; nt];
    for fr in &data.frames {
        let (rows, cols) = (fr.gt.len(), fr.tr.len());
        let row_sum: Vec<f64> = (0..rows).map(|i| (0..cols).map(|j| fr.sim(i, j)).sum()).collect();
        let col_sum: Vec<f64> = (0..cols).map(|j| (0..rows).map(|i| fr.sim(i, j)).sum()).collect();
        for i in 0..rows {
            for j in 0..cols {
                let s = fr.sim(i, j);
                let denom = row_sum[i] + col_sum[j] - s;
                if denom > EPS {
                    potential[fr.gt[i] * nt + fr.tr[j]] += s / denom;
                }
            }
        }
        fr.gt.iter().for_each(|&g| gt_count[g] += 1.0);
        fr.tr.iter().for_each(|&t| tr_count[t] += 1.0);
    }
    let alignment: Vec<f64> = (0..ng * nt)
        .map(|k| {
            let d = gt_count[k / nt] + tr_count[k % nt] - potential[k];
            if d > 0.0 {
                potential[k] / d
            } else {
                0.0
            }
        })
        .collect();

    let mut matches = vec![vec![0.0; ng * nt]; N_ALPHAS];
    for fr in &data.frames {
        let (rows, cols) = (fr.gt.len(), fr.tr.len());
        if rows == 0 || cols == 0 {
            for a in 0..N_ALPHAS {
                out.fn_[a] += rows as u64;
                out.fp[a] += cols as u64;
            }
            continue;
        }
        let mut score = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                score.push(alignment[fr.gt[i] * nt + fr.tr[j]] * fr.sim(i, j));
            }
        }
        let pairs = max_weight_matching(rows, cols, &score, &vec![true; rows * cols]);
        for (a, counts) in matches.iter_mut().enumerate() {
            let th = alpha(a) - EPS;
            let mut n = 0u64;
            for &(i, j) in &pairs {
                let s = fr.sim(i, j);
                if s >= th {
                    n += 1;
                    out.loc[a] += s;
                    counts[fr.gt[i] * nt + fr.tr[j]] += 1.0;
                }
            }
            out.tp[a] += n;
            out.fn_[a] += rows as u64 - n;
            out.fp[a] += cols as u64 - n;
        }
    }

    for (a, counts) in matches.iter().enumerate() {
        out.assoc[a] = counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0.0)
            .map(|(k, c)| c * c / (gt_count[k / nt] + tr_count[k % nt] - c).max(1.0))
            .sum();
    }
    out
}
