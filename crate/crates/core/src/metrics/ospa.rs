//! Track-level OSPA: tracks are compared as whole trajectories, with frames
//! where only one of the pair exists charged the full cutoff.

use serde::{Deserialize, Serialize};

use super::Prepared;
use crate::assignment::{hungarian, CostMatrix};

/// Accumulates `Σ cost` and `Σ n` so sequences can be pooled before the ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OspaAccumulator {
    pub cutoff: f64,
    pub order: f64,
    /// Optimal sub-pattern cost, already raised to the power `order`.
    pub cost: f64,
    /// Size of the larger track set.
    pub n: u64,
}

impl OspaAccumulator {
    pub fn new(cutoff: f64, order: f64) -> Self {
        OspaAccumulator {
            cutoff,
            order,
            cost: 0.0,
            n: 0,
        }
    }

    pub fn add(&mut self, o: &OspaAccumulator) {
        self.cost += o.cost;
        self.n += o.n;
    }

    /// In `[0, cutoff]`; zero when both sets are empty.
    pub fn value(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        (self.cost / self.n as f64).powf(1.0 / self.order).clamp(0.0, self.cutoff)
    }
}

pub(super) fn compute(data: &Prepared, cutoff: f64, order: f64) -> OspaAccumulator {
    let (ng, nt) = (data.n_gt_ids, data.n_tr_ids);
    let penalty = cutoff.powf(order);
    let mut both = vec![0u64; ng * nt];
    let mut both_cost = vec![0.0; ng * nt];
    let mut gt_len = vec![0u64; ng];
    let mut tr_len = vec![0u64; nt];
    for fr in &data.frames {
        fr.gt.iter().for_each(|&g| gt_len[g] += 1);
        fr.tr.iter().for_each(|&t| tr_len[t] += 1);
        for (i, &g) in fr.gt.iter().enumerate() {
            for (j, &t) in fr.tr.iter().enumerate() {
                both[g * nt + t] += 1;
                both_cost[g * nt + t] += (1.0 - fr.sim(i, j)).clamp(0.0, cutoff).powf(order);
            }
        }
    }
    // Mean per-frame cost over the union of the two tracks' lifetimes; this
    // is the pair distance raised to `order`.
    let values: Vec<f64> = (0..ng * nt)
        .map(|k| {
            let (g, t) = (k / nt, k % nt);
            let only_one = gt_len[g] + tr_len[t] - 2 * both[k];
            let union = gt_len[g] + tr_len[t] - both[k];
            (both_cost[k] + penalty * only_one as f64) / union as f64
        })
        .collect();

    let mut acc = OspaAccumulator::new(cutoff, order);
    acc.n = ng.max(nt) as u64;
    if ng > 0 && nt > 0 {
        let c = CostMatrix::new(ng, nt, values).expect("pair costs are finite");
        acc.cost = c.total(&hungarian(&c));
    }
    acc.cost += penalty * ng.abs_diff(nt) as f64;
    acc
}
