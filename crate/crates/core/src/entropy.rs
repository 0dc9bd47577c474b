//! Candidate-distribution entropies with and without the feedback gate.
//!
//! Without feedback, each track's position in frame `t` is uncertain over all
//! candidate detections; the per-frame term is the sum of the Shannon entropies
//! of those distributions. With feedback, each distribution is conditioned on
//! whether the candidate lies inside the track's gate, i.e. the inside and
//! outside parts are renormalised and weighted by their mass. Because gate
//! membership is a function of the candidate, the conditional entropy never
//! exceeds the unconditioned one, and the two coincide when the gate admits
//! everything. All entropies are in nats.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σp = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-9;

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::validation("probabilities must be finite and non-negative"));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::validation(format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

fn entropy_unchecked(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

/// `-Σ p ln p` with `0 ln 0 = 0`.
pub fn shannon_entropy(p: &[f64]) -> Result<f64> {
    check_distribution(p)?;
    Ok(entropy_unchecked(p).max(0.0))
}

/// One track's candidate distribution over a frame's detections, with the
/// detections admitted by its gate marked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatedCandidates {
    pub probs: Vec<f64>,
    pub in_gate: Vec<bool>,
}

impl GatedCandidates {
    pub fn ungated(probs: Vec<f64>) -> Self {
        let in_gate = vec![true; probs.len()];
        GatedCandidates { probs, in_gate }
    }

    /// Entropy of the candidate distribution ignoring the gate.
    pub fn entropy(&self) -> Result<f64> {
        shannon_entropy(&self.probs)
    }

    /// Entropy conditioned on gate membership:
    /// `P(in)·H(p | in) + P(out)·H(p | out)`.
    pub fn conditional_entropy(&self) -> Result<f64> {
        if self.in_gate.len() != self.probs.len() {
            return Err(Error::validation("gate mask and distribution differ in length"));
        }
        check_distribution(&self.probs)?;
        let part = |inside: bool| -> f64 {
            let mass: f64 = self
                .probs
                .iter()
                .zip(&self.in_gate)
                .filter(|(_, g)| **g == inside)
                .map(|(p, _)| *p)
                .sum();
            if mass <= 0.0 {
                return 0.0;
            }
            let renorm: Vec<f64> = self
                .probs
                .iter()
                .zip(&self.in_gate)
                .filter(|(_, g)| **g == inside)
                .map(|(p, _)| p / mass)
                .collect();
            mass * entropy_unchecked(&renorm)
        };
        Ok((part(true) + part(false)).max(0.0))
    }
}

/// Where the association term of the independent entropy came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssociationSource {
    /// Entropy of a caller-supplied joint distribution over trajectory hypotheses.
    Joint,
    /// No joint distribution available. The gating-free optimal matching is a
    /// deterministic function of the costs, so its entropy is zero.
    DeterministicMatching,
}

impl AssociationSource {
    pub fn label(&self) -> &'static str {
        match self {
            AssociationSource::Joint => "joint",
            AssociationSource::DeterministicMatching => "surrogate:deterministic-matching",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependentEntropy {
    /// `H(x_t)` per frame.
    pub per_frame: Vec<f64>,
    pub association: f64,
    pub association_source: AssociationSource,
    /// `Σ_t H(x_t) + H({y_t})`.
    pub total: f64,
}

/// Cumulative entropy with independent per-frame detection.
///
/// `frames[t]` holds one candidate distribution per track in frame `t`.
pub fn entropy_independent(frames: &[Vec<Vec<f64>>], joint: Option<&[f64]>) -> Result<IndependentEntropy> {
    let per_frame = frames
        .iter()
        .map(|dists| dists.iter().map(|p| shannon_entropy(p)).sum::<Result<f64>>().map(|h| h + 0.0))
        .collect::<Result<Vec<f64>>>()?;
    let (association, association_source) = match joint {
        Some(j) => (shannon_entropy(j)?, AssociationSource::Joint),
        None => (0.0, AssociationSource::DeterministicMatching),
    };
    // `+ 0.0` turns the empty sum's -0.0 into 0.0
    let total = per_frame.iter().sum::<f64>() + association + 0.0;
    Ok(IndependentEntropy {
        per_frame,
        association,
        association_source,
        total,
    })
}

/// `Σ_t H(x_t | y_{t-1})` from gated candidate distributions, with the
/// per-frame terms.
pub fn entropy_feedback(frames: &[Vec<GatedCandidates>]) -> Result<(Vec<f64>, f64)> {
    let per_frame = frames
        .iter()
        .map(|dists| dists.iter().map(GatedCandidates::conditional_entropy).sum::<Result<f64>>().map(|h| h + 0.0))
        .collect::<Result<Vec<f64>>>()?;
    let total = per_frame.iter().sum::<f64>() + 0.0;
    Ok((per_frame, total))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub per_frame_h: Vec<f64>,
    pub per_frame_h_feedback: Vec<f64>,
    pub h_independent: f64,
    pub h_feedback: f64,
    pub association: f64,
    pub association_source: AssociationSource,
    pub n_frames: usize,
}

impl EntropyReport {
    pub fn from_frames(frames: &[Vec<GatedCandidates>], joint: Option<&[f64]>) -> Result<Self> {
        let ungated: Vec<Vec<Vec<f64>>> = frames
            .iter()
            .map(|f| f.iter().map(|g| g.probs.clone()).collect())
            .collect();
        let ind = entropy_independent(&ungated, joint)?;
        let (per_frame_h_feedback, h_feedback) = entropy_feedback(frames)?;
        Ok(EntropyReport {
            per_frame_h: ind.per_frame,
            per_frame_h_feedback,
            h_independent: ind.total,
            h_feedback,
            association: ind.association,
            association_source: ind.association_source,
            n_frames: frames.len(),
        })
    }

    pub fn reduction(&self) -> f64 {
        self.h_independent - self.h_feedback
    }

    /// Feedback entropy must not exceed the independent one (up to rounding).
    pub fn is_consistent(&self) -> bool {
        self.h_feedback <= self.h_independent + 1e-12
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n_frames={}", self.n_frames);
        let _ = writeln!(s, "h_independent={:.12}", self.h_independent);
        let _ = writeln!(s, "h_feedback={:.12}", self.h_feedback);
        let _ = writeln!(s, "reduction={:.12}", self.reduction());
        let _ = writeln!(s, "association_term={:.12}", self.association);
        let _ = writeln!(s, "association_source={}", self.association_source.label());
        let _ = writeln!(s, "consistent={}", self.is_consistent());
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("frame_index,h_independent,h_feedback\n");
        for (i, (a, b)) in self.per_frame_h.iter().zip(&self.per_frame_h_feedback).enumerate() {
            let _ = writeln!(s, "{},{:.12},{:.12}", i + 1, a, b);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_and_delta() {
        assert!((shannon_entropy(&[0.25; 4]).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert_eq!(shannon_entropy(&[0.0, 1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn three_point_distribution() {
        // -Σ p ln p evaluated by hand: 0.5 ln 2 + 2 · 0.25 ln 4 = 1.5 ln 2
        let h = shannon_entropy(&[0.5, 0.25, 0.25]).unwrap();
        assert!((h - 1.5 * 2f64.ln()).abs() < 1e-15);
        assert!((h - 1.0397).abs() < 1e-4);
    }

    #[test]
    fn rejects_unnormalised() {
        assert!(shannon_entropy(&[0.5, 0.4]).is_err());
        assert!(shannon_entropy(&[1.2, -0.2]).is_err());
        let g = GatedCandidates {
            probs: vec![1.0],
            in_gate: vec![true, false],
        };
        assert!(g.conditional_entropy().is_err());
    }

    #[test]
    fn conditional_of_deltas_is_zero() {
        let frames = vec![vec![GatedCandidates::ungated(vec![1.0, 0.0])], vec![GatedCandidates {
            probs: vec![0.0, 0.0, 1.0],
            in_gate: vec![true, false, true],
        }]];
        assert_eq!(entropy_feedback(&frames).unwrap().1, 0.0);
    }

    #[test]
    fn open_gate_matches_detection_term() {
        let p = vec![0.1, 0.2, 0.3, 0.4];
        let frames = vec![vec![GatedCandidates::ungated(p.clone())]];
        let report = EntropyReport::from_frames(&frames, None).unwrap();
        assert!((report.h_feedback - shannon_entropy(&p).unwrap()).abs() < 1e-15);
        assert!(report.reduction().abs() < 1e-12);
        assert_eq!(report.association_source, AssociationSource::DeterministicMatching);
    }

    #[test]
    fn gate_reduces_by_membership_entropy() {
        let g = GatedCandidates {
            probs: vec![0.4, 0.4, 0.1, 0.1],
            in_gate: vec![true, true, false, false],
        };
        let h = g.entropy().unwrap();
        let hc = g.conditional_entropy().unwrap();
        let h_gate = shannon_entropy(&[0.8, 0.2]).unwrap();
        assert!((h - hc - h_gate).abs() < 1e-12);
    }

    #[test]
    fn joint_term_added() {
        let ind = entropy_independent(&[vec![vec![0.5, 0.5]]], Some(&[0.5, 0.5])).unwrap();
        assert!((ind.total - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(ind.association_source, AssociationSource::Joint);
    }

    #[test]
    fn empty_sequence() {
        let r = EntropyReport::from_frames(&[], None).unwrap();
        assert_eq!((r.h_independent, r.h_feedback, r.n_frames), (0.0, 0.0, 0));
        assert!(r.to_kv().contains("h_feedback=0.000000000000"));
    }
}
