//! Gated cost matrices and optimal bipartite assignment.
//!
//! [`hungarian`] solves the rectangular problem with a shortest-augmenting-path
//! solver on a square completion of the matrix. Gated-out cells are priced so
//! high that the solver uses as few of them as possible; they are dropped from
//! the result afterwards. Among optimal matchings the lexicographically smallest
//! `(row, col)` sequence is returned.

use crate::error::{Error, Result};
use crate::geometry::{pano_iou, Canvas, PanoBox, Rect};

/// Default gate on `1 - IoU`: pairs with IoU below 0.3 are not admissible.
pub const DEFAULT_GATE_THRESHOLD: f64 = 0.7;

#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    gate: Vec<bool>,
}

impl CostMatrix {
    /// Matrix with every cell admissible.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        CostMatrix::with_gate(rows, cols, values, vec![true; rows * cols])
    }

    pub fn with_gate(rows: usize, cols: usize, values: Vec<f64>, gate: Vec<bool>) -> Result<Self> {
        if values.len() != rows * cols || gate.len() != rows * cols {
            return Err(Error::argument(format!(
                "cost matrix {rows}x{cols} needs {} cells, got {} values and {} gate flags",
                rows * cols,
                values.len(),
                gate.len()
            )));
        }
        if let Some(k) = (0..values.len()).find(|&k| gate[k] && !values[k].is_finite()) {
            return Err(Error::argument(format!(
                "admissible cell ({}, {}) has non-finite cost",
                k / cols.max(1),
                k % cols.max(1)
            )));
        }
        Ok(CostMatrix {
            rows,
            cols,
            values,
            gate,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::argument("ragged cost matrix"));
        }
        CostMatrix::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn is_admissible(&self, row: usize, col: usize) -> bool {
        self.gate[row * self.cols + col]
    }

    pub fn gate_out(&mut self, row: usize, col: usize) {
        self.gate[row * self.cols + col] = false;
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CostMatrix {
        let mut values = Vec::with_capacity(rows.len() * cols.len());
        let mut gate = Vec::with_capacity(rows.len() * cols.len());
        for &r in rows {
            for &c in cols {
                values.push(self.get(r, c));
                gate.push(self.is_admissible(r, c));
            }
        }
        CostMatrix {
            rows: rows.len(),
            cols: cols.len(),
            values,
            gate,
        }
    }

    /// Sum of costs over `pairs`, accumulated in the given order.
    pub fn total(&self, pairs: &[(usize, usize)]) -> f64 {
        pairs.iter().map(|&(r, c)| self.get(r, c)).sum()
    }
}

/// `1 - IoU` cost between predicted track boxes and detections, gated at
/// `gate_threshold`.
pub fn iou_cost_matrix(canvas: &Canvas, tracks: &[Rect], dets: &[Rect], gate_threshold: f64) -> CostMatrix {
    let mut values = Vec::with_capacity(tracks.len() * dets.len());
    let mut gate = Vec::with_capacity(tracks.len() * dets.len());
    for t in tracks {
        for d in dets {
            let cost = 1.0 - canvas.iou(t, d);
            values.push(cost);
            gate.push(cost <= gate_threshold);
        }
    }
    CostMatrix {
        rows: tracks.len(),
        cols: dets.len(),
        values,
        gate,
    }
}

/// Same as [`iou_cost_matrix`] for validated panorama boxes.
pub fn build_cost_matrix(tracks: &[PanoBox], dets: &[PanoBox], gate_threshold: f64) -> Result<CostMatrix> {
    if let Some(first) = tracks.iter().chain(dets).next() {
        if let Some(odd) = tracks.iter().chain(dets).find(|b| b.image_width() != first.image_width()) {
            return Err(Error::argument(format!(
                "boxes live on panoramas of different width ({} vs {})",
                first.image_width(),
                odd.image_width()
            )));
        }
    }
    let mut values = Vec::with_capacity(tracks.len() * dets.len());
    let mut gate = Vec::with_capacity(tracks.len() * dets.len());
    for t in tracks {
        for d in dets {
            let cost = 1.0 - pano_iou(t, d)?;
            values.push(cost);
            gate.push(cost <= gate_threshold);
        }
    }
    CostMatrix::with_gate(tracks.len(), dets.len(), values, gate)
}

/// Dense square assignment problem solved by shortest augmenting paths.
/// Returns the row→column assignment together with the dual potentials.
struct Solution {
    col_of_row: Vec<usize>,
    u: Vec<f64>,
    v: Vec<f64>,
}

fn solve_square(n: usize, cost: &[f64]) -> Solution {
    const NONE: usize = usize::MAX;
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut col_of_row = vec![NONE; n];
    let mut row_of_col = vec![NONE; n];
    let mut shortest = vec![f64::INFINITY; n];
    let mut path = vec![NONE; n];
    let mut remaining: Vec<usize> = Vec::with_capacity(n);
    let mut visited_rows = vec![false; n];
    let mut visited_cols = vec![false; n];

    for start in 0..n {
        shortest.iter_mut().for_each(|s| *s = f64::INFINITY);
        visited_rows.iter_mut().for_each(|s| *s = false);
        visited_cols.iter_mut().for_each(|s| *s = false);
        remaining.clear();
        remaining.extend((0..n).rev());

        let mut min_val = 0.0;
        let mut i = start;
        let sink;
        loop {
            visited_rows[i] = true;
            let mut best_k = NONE;
            let mut lowest = f64::INFINITY;
            for (k, &j) in remaining.iter().enumerate() {
                let r = min_val + cost[i * n + j] - u[i] - v[j];
                if r < shortest[j] {
                    path[j] = i;
                    shortest[j] = r;
                }
                if shortest[j] < lowest || (shortest[j] == lowest && row_of_col[j] == NONE) {
                    lowest = shortest[j];
                    best_k = k;
                }
            }
            min_val = lowest;
            let j = remaining.swap_remove(best_k);
            visited_cols[j] = true;
            if row_of_col[j] == NONE {
                sink = j;
                break;
            }
            i = row_of_col[j];
        }

        u[start] += min_val;
        for r in 0..n {
            if visited_rows[r] && r != start {
                u[r] += min_val - shortest[col_of_row[r]];
            }
        }
        for c in 0..n {
            if visited_cols[c] {
                v[c] -= min_val - shortest[c];
            }
        }

        let mut j = sink;
        loop {
            let r = path[j];
            row_of_col[j] = r;
            std::mem::swap(&mut col_of_row[r], &mut j);
            if r == start {
                break;
            }
        }
    }
    Solution { col_of_row, u, v }
}

/// Rewrites an optimal perfect matching into the lexicographically smallest
/// one among those using only tight (zero reduced cost) cells.
fn lexicographic_refine(n: usize, tight: &[bool], col_of_row: &mut [usize]) {
    let mut row_of_col = vec![0usize; n];
    for (r, &c) in col_of_row.iter().enumerate() {
        row_of_col[c] = r;
    }
    let mut fixed_col = vec![false; n];
    let mut parent_col = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    let mut queue = Vec::with_capacity(n);

    for i in 0..n {
        for j in 0..n {
            if !tight[i * n + j] || fixed_col[j] {
                continue;
            }
            if col_of_row[i] == j {
                break;
            }
            // Moving row i onto column j frees its old column; the row now
            // displaced from j must reach the freed column through tight cells.
            let freed = col_of_row[i];
            let displaced = row_of_col[j];
            seen.iter_mut().for_each(|s| *s = false);
            queue.clear();
            queue.push(displaced);
            seen[j] = true;
            let mut head = 0;
            let mut reached = false;
            'bfs: while head < queue.len() {
                let r = queue[head];
                head += 1;
                for c in 0..n {
                    if seen[c] || fixed_col[c] || !tight[r * n + c] {
                        continue;
                    }
                    seen[c] = true;
                    parent_col[c] = r;
                    if c == freed {
                        reached = true;
                        break 'bfs;
                    }
                    queue.push(row_of_col[c]);
                }
            }
            if !reached {
                continue;
            }
            // Walk back from the freed column, shifting each row along the path.
            let mut c = freed;
            loop {
                let r = parent_col[c];
                let prev = col_of_row[r];
                col_of_row[r] = c;
                row_of_col[c] = r;
                if r == displaced {
                    break;
                }
                c = prev;
            }
            col_of_row[i] = j;
            row_of_col[j] = i;
            break;
        }
        fixed_col[col_of_row[i]] = true;
    }
}

/// Minimum-cost matching over admissible cells.
///
/// Among all matchings of maximum cardinality that use only admissible cells,
/// returns one of minimum total cost, breaking ties towards the
/// lexicographically smallest pair sequence. Pairs are sorted by row.
pub fn hungarian(c: &CostMatrix) -> Vec<(usize, usize)> {
    let (rows, cols) = (c.rows, c.cols);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let n = rows.max(cols);
    let scale = (0..rows * cols)
        .filter(|&k| c.gate[k])
        .map(|k| c.values[k].abs())
        .fold(0.0_f64, f64::max)
        .max(1.0);
    // One forbidden cell must outweigh any difference in admissible totals.
    let forbidden = 4.0 * scale * (n as f64 + 1.0);
    let mut square = vec![0.0; n * n];
    for r in 0..rows {
        for col in 0..cols {
            let k = r * cols + col;
            square[r * n + col] = if c.gate[k] { c.values[k] } else { forbidden };
        }
    }
    let Solution { mut col_of_row, u, v } = solve_square(n, &square);

    let tol = 1e-10 * forbidden;
    let tight: Vec<bool> = (0..n * n)
        .map(|k| square[k] - u[k / n] - v[k % n] <= tol)
        .collect();
    debug_assert!((0..n).all(|r| tight[r * n + col_of_row[r]]));
    lexicographic_refine(n, &tight, &mut col_of_row);

    (0..rows)
        .filter_map(|r| {
            let col = col_of_row[r];
            (col < cols && c.is_admissible(r, col)).then_some((r, col))
        })
        .collect()
}

/// Maximum-weight matching with unmatched rows/columns allowed for free.
/// Cells that are not admissible or have non-positive weight are never matched.
pub fn max_weight_matching(rows: usize, cols: usize, weights: &[f64], admissible: &[bool]) -> Vec<(usize, usize)> {
    debug_assert_eq!(weights.len(), rows * cols);
    let values: Vec<f64> = (0..rows * cols)
        .map(|k| if admissible[k] && weights[k] > 0.0 { -weights[k] } else { 0.0 })
        .collect();
    let m = CostMatrix {
        rows,
        cols,
        values,
        gate: vec![true; rows * cols],
    };
    hungarian(&m)
        .into_iter()
        .filter(|&(r, c)| admissible[r * cols + c] && weights[r * cols + c] > 0.0)
        .collect()
}

/// Result of a (possibly staged) association.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Matching {
    pub matched: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl Matching {
    fn from_pairs(rows: usize, cols: usize, mut matched: Vec<(usize, usize)>) -> Self {
        matched.sort_unstable();
        let mut row_used = vec![false; rows];
        let mut col_used = vec![false; cols];
        for &(r, c) in &matched {
            row_used[r] = true;
            col_used[c] = true;
        }
        Matching {
            matched,
            unmatched_rows: (0..rows).filter(|&r| !row_used[r]).collect(),
            unmatched_cols: (0..cols).filter(|&c| !col_used[c]).collect(),
        }
    }
}

/// Two-stage association: rows are first matched against columns whose score
/// is at least `conf_split`, then leftover rows against the remaining columns.
pub fn cascade_match(c: &CostMatrix, col_scores: &[f64], conf_split: f64) -> Result<Matching> {
    if col_scores.len() != c.cols {
        return Err(Error::argument(format!(
            "{} scores for {} detections",
            col_scores.len(),
            c.cols
        )));
    }
    let all_rows: Vec<usize> = (0..c.rows).collect();
    let (high, low): (Vec<usize>, Vec<usize>) = (0..c.cols).partition(|&j| col_scores[j] >= conf_split);

    let mut pairs: Vec<(usize, usize)> = hungarian(&c.submatrix(&all_rows, &high))
        .into_iter()
        .map(|(r, k)| (r, high[k]))
        .collect();

    if !low.is_empty() {
        let mut used = vec![false; c.rows];
        for &(r, _) in &pairs {
            used[r] = true;
        }
        let left: Vec<usize> = all_rows.into_iter().filter(|&r| !used[r]).collect();
        pairs.extend(
            hungarian(&c.submatrix(&left, &low))
                .into_iter()
                .map(|(r, k)| (left[r], low[k])),
        );
    }
    Ok(Matching::from_pairs(c.rows, c.cols, pairs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let c = CostMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let a = hungarian(&c);
        assert_eq!(a, vec![(0, 0), (1, 1)]);
        assert_eq!(c.total(&a), 2.0);
    }

    #[test]
    fn zero_diagonal() {
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..5).map(|j| if i == j { 0.0 } else { 1.0 + (i * j) as f64 }).collect())
            .collect();
        let c = CostMatrix::from_rows(&rows).unwrap();
        assert_eq!(hungarian(&c), (0..5).map(|i| (i, i)).collect::<Vec<_>>());
    }

    #[test]
    fn empty_and_rectangular() {
        assert!(hungarian(&CostMatrix::new(0, 3, vec![]).unwrap()).is_empty());
        assert!(hungarian(&CostMatrix::new(3, 0, vec![]).unwrap()).is_empty());
        let wide = CostMatrix::from_rows(&[vec![5.0, 1.0, 3.0]]).unwrap();
        assert_eq!(hungarian(&wide), vec![(0, 1)]);
        let tall = CostMatrix::from_rows(&[vec![5.0], vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(hungarian(&tall), vec![(1, 0)]);
    }

    #[test]
    fn gated_cells_never_matched() {
        let mut c = CostMatrix::from_rows(&[vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap();
        c.gate_out(0, 0);
        c.gate_out(1, 0);
        let a = hungarian(&c);
        assert_eq!(a.len(), 1);
        assert!(a.iter().all(|&(r, col)| c.is_admissible(r, col)));
        assert_eq!(a, vec![(0, 1)]);
    }

    #[test]
    fn ties_resolve_lexicographically() {
        let c = CostMatrix::from_rows(&[vec![1.0; 3], vec![1.0; 3], vec![1.0; 3]]).unwrap();
        assert_eq!(hungarian(&c), vec![(0, 0), (1, 1), (2, 2)]);
        let c = CostMatrix::from_rows(&[vec![2.0, 1.0, 1.0], vec![1.0, 1.0, 2.0]]).unwrap();
        assert_eq!(hungarian(&c), vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn rejects_bad_shapes_and_nan() {
        assert!(CostMatrix::new(2, 2, vec![0.0; 3]).is_err());
        assert!(CostMatrix::new(1, 1, vec![f64::NAN]).is_err());
        assert!(CostMatrix::with_gate(1, 1, vec![f64::INFINITY], vec![false]).is_ok());
        assert!(CostMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn iou_costs_and_gate() {
        let canvas = Canvas::panorama(2048, 480);
        let t = [Rect::new(100.0, 50.0, 40.0, 40.0)];
        let d = [Rect::new(100.0, 50.0, 40.0, 40.0), Rect::new(900.0, 50.0, 40.0, 40.0)];
        let c = iou_cost_matrix(&canvas, &t, &d, DEFAULT_GATE_THRESHOLD);
        assert_eq!(c.get(0, 0), 0.0);
        assert!(c.is_admissible(0, 0));
        assert_eq!(c.get(0, 1), 1.0);
        assert!(!c.is_admissible(0, 1));
    }

    #[test]
    fn seam_pair_cost_below_one() {
        let t = PanoBox::new(2040.0, 50.0, 40.0, 40.0, 2048).unwrap();
        let d = PanoBox::new(5.0, 50.0, 40.0, 40.0, 2048).unwrap();
        let c = build_cost_matrix(&[t], &[d], DEFAULT_GATE_THRESHOLD).unwrap();
        let expected = 1.0 - pano_iou(&t, &d).unwrap();
        assert_eq!(c.get(0, 0), expected);
        assert!(c.get(0, 0) < 1.0);
        let other = PanoBox::new(5.0, 50.0, 40.0, 40.0, 1024).unwrap();
        assert!(build_cost_matrix(&[t], &[other], 0.7).is_err());
    }

    #[test]
    fn cascade_uses_low_confidence_second() {
        let c = CostMatrix::from_rows(&[vec![0.2]]).unwrap();
        let m = cascade_match(&c, &[0.2], 0.5).unwrap();
        assert_eq!(m.matched, vec![(0, 0)]);
        let c = CostMatrix::from_rows(&[vec![0.2, 0.1], vec![0.3, 0.6]]).unwrap();
        let single = hungarian(&c);
        let m = cascade_match(&c, &[0.9, 0.8], 0.5).unwrap();
        assert_eq!(m.matched, single);
        assert!(m.unmatched_rows.is_empty() && m.unmatched_cols.is_empty());
        assert!(cascade_match(&c, &[0.9], 0.5).is_err());
    }

    #[test]
    fn max_weight_skips_nonpositive() {
        let w = [0.9, 0.0, 0.0, 0.6];
        let m = max_weight_matching(2, 2, &w, &[true, true, true, false]);
        assert_eq!(m, vec![(0, 0)]);
    }
}
