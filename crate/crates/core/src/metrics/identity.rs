use serde::{Deserialize, Serialize};

use super::{Prepared, EPS};
use crate::assignment::max_weight_matching;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IdentityCounts {
    pub idtp: u64,
    pub idfp: u64,
    pub idfn: u64,
}

impl IdentityCounts {
    pub fn add(&mut self, o: &IdentityCounts) {
        self.idtp += o.idtp;
        self.idfp += o.idfp;
        self.idfn += o.idfn;
    }

    pub fn idf1(&self) -> f64 {
        let denom = 2 * self.idtp + self.idfp + self.idfn;
        if denom == 0 {
            return 1.0;
        }
        2.0 * self.idtp as f64 / denom as f64
    }

    pub fn idp(&self) -> f64 {
        self.idtp as f64 / (self.idtp + self.idfp).max(1) as f64
    }

    pub fn idr(&self) -> f64 {
        self.idtp as f64 / (self.idtp + self.idfn).max(1) as f64
    }
}

/// One-to-one identity mapping maximising the number of frames in which the
/// mapped pair overlaps by at least `threshold`.
pub(super) fn compute(data: &Prepared, threshold: f64) -> IdentityCounts {
    let (ng, nt) = (data.n_gt_ids, data.n_tr_ids);
    let mut overlap = vec![0.0; ng * nt];
    let (mut n_gt, mut n_tr) = (0u64, 0u64);
    for fr in &data.frames {
        n_gt += fr.gt.len() as u64;
        n_tr += fr.tr.len() as u64;
        for (i, &g) in fr.gt.iter().enumerate() {
            for (j, &t) in fr.tr.iter().enumerate() {
                if fr.sim(i, j) >= threshold - EPS {
                    overlap[g * nt + t] += 1.0;
                }
            }
        }
    }
    let admissible: Vec<bool> = overlap.iter().map(|c| *c > 0.0).collect();
    let idtp: f64 = max_weight_matching(ng, nt, &overlap, &admissible)
        .into_iter()
        .map(|(g, t)| overlap[g * nt + t])
        .sum();
    let idtp = idtp as u64;
    IdentityCounts {
        idtp,
        idfp: n_tr - idtp,
        idfn: n_gt - idtp,
    }
}
