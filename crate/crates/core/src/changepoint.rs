//! Mean-shift change-point detection inside a single cycle.
//!
//! All routines minimise the within-segment sum of squared errors plus a
//! per-change-point penalty. [`binary_segmentation`] is the production path;
//! [`brute_force_segmentation`] and [`pelt_segmentation`] are exact
//! alternatives used for comparison.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::InControlModel;

/// Hard cap on detected change-points per cycle.
pub const MAX_CHANGEPOINTS: usize = 3;
pub const DEFAULT_MIN_SEGMENT_LENGTH: usize = 2;
/// Longest input the exhaustive oracle accepts.
pub const BRUTE_FORCE_MAX_LEN: usize = 16;
/// AIC penalty in raw squared-error units (two times one extra mean parameter).
pub const AIC_PENALTY: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChangepointError {
    #[error("empty segment [{start}, {end})")]
    EmptySegment { start: usize, end: usize },
    #[error("sequence of length {0} is too long for exhaustive search")]
    TooLong(usize),
}

/// Change-point indices and the resulting unpenalised cost.
///
/// An index `i` splits `readings[..i]` from `readings[i..]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Segmentation {
    pub changepoints: Vec<usize>,
    pub total_cost: f64,
}

impl Segmentation {
    pub fn count(&self) -> usize {
        self.changepoints.len()
    }

    pub fn penalized_cost(&self, penalty: f64) -> f64 {
        self.total_cost + penalty * self.changepoints.len() as f64
    }
}

/// Settings for [`binary_segmentation`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationParams {
    pub penalty: f64,
    pub min_segment_length: usize,
    pub max_changepoints: usize,
}

impl SegmentationParams {
    /// `2 sigma^2 ln 8`: pure in-control noise rarely clears it.
    pub fn for_model(model: &InControlModel) -> Self {
        Self {
            penalty: 2.0 * model.sigma * model.sigma * (8.0f64).ln(),
            min_segment_length: DEFAULT_MIN_SEGMENT_LENGTH,
            max_changepoints: MAX_CHANGEPOINTS,
        }
    }
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self::for_model(&InControlModel::default())
    }
}

/// Sum of squared deviations from the mean over `readings[start..end]`.
pub fn segment_cost(readings: &[f64], start: usize, end: usize) -> Result<f64, ChangepointError> {
    if start >= end || end > readings.len() {
        return Err(ChangepointError::EmptySegment { start, end });
    }
    Ok(sse(&readings[start..end]))
}

fn sse(segment: &[f64]) -> f64 {
    let mean = segment.iter().sum::<f64>() / segment.len() as f64;
    segment.iter().map(|x| (x - mean) * (x - mean)).sum()
}

/// Readings re-expressed relative to the first one, so costs do not depend
/// on the absolute temperature level.
fn centered(readings: &[f64]) -> Vec<f64> {
    let origin = readings.first().copied().unwrap_or(0.0);
    readings.iter().map(|x| x - origin).collect()
}

/// Greedy top-down splitting.
///
/// Each round evaluates every admissible split of every current segment and
/// takes the one with the largest cost reduction (smallest index on ties).
/// The split is kept only if the reduction exceeds `penalty`.
pub fn binary_segmentation(
    readings: &[f64],
    penalty: f64,
    min_segment_length: usize,
    max_changepoints: usize,
) -> Segmentation {
    let data = centered(readings);
    let n = data.len();
    let min_len = min_segment_length.max(1);
    if n == 0 {
        return Segmentation::default();
    }

    // segments as (start, end, cost)
    let mut segments = vec![(0, n, sse(&data))];
    let mut changepoints = Vec::new();

    while changepoints.len() < max_changepoints {
        let mut best: Option<(usize, usize, f64, f64, f64)> = None; // (segment, split, gain, left, right)
        for (s, &(start, end, cost)) in segments.iter().enumerate() {
            if end - start < 2 * min_len {
                continue;
            }
            for split in (start + min_len)..=(end - min_len) {
                let left = sse(&data[start..split]);
                let right = sse(&data[split..end]);
                let gain = cost - left - right;
                let better = match best {
                    None => true,
                    Some((_, best_split, best_gain, _, _)) => {
                        gain > best_gain || (gain == best_gain && split < best_split)
                    }
                };
                if better {
                    best = Some((s, split, gain, left, right));
                }
            }
        }
        match best {
            Some((s, split, gain, left, right)) if gain > penalty => {
                let (start, end, _) = segments[s];
                segments[s] = (start, split, left);
                segments.insert(s + 1, (split, end, right));
                changepoints.push(split);
            }
            _ => break,
        }
    }

    changepoints.sort_unstable();
    let total_cost = segments.iter().map(|s| s.2).sum();
    Segmentation {
        changepoints,
        total_cost,
    }
}

/// Sum of segment costs for a given sorted change-point set.
pub fn segmentation_cost(readings: &[f64], changepoints: &[usize]) -> f64 {
    let data = centered(readings);
    let mut bounds = Vec::with_capacity(changepoints.len() + 2);
    bounds.push(0);
    bounds.extend_from_slice(changepoints);
    bounds.push(data.len());
    bounds.windows(2).map(|w| sse(&data[w[0]..w[1]])).sum()
}

/// Exhaustive minimiser of `cost + penalty * count` over all admissible sets
/// of at most `max_changepoints` change-points.
///
/// Ties prefer fewer change-points, then the lexicographically smaller set.
pub fn brute_force_segmentation(
    readings: &[f64],
    penalty: f64,
    min_segment_length: usize,
    max_changepoints: usize,
) -> Result<Segmentation, ChangepointError> {
    let n = readings.len();
    if n > BRUTE_FORCE_MAX_LEN {
        return Err(ChangepointError::TooLong(n));
    }
    if n == 0 {
        return Ok(Segmentation::default());
    }
    let min_len = min_segment_length.max(1);
    let mut best = Segmentation {
        changepoints: Vec::new(),
        total_cost: segmentation_cost(readings, &[]),
    };
    let mut best_score = best.penalized_cost(penalty);

    // candidate interior indices 1..n, encoded as bits of a mask
    let interior = n.saturating_sub(1);
    let mut masks: Vec<u32> = (0u32..(1 << interior))
        .filter(|m| (m.count_ones() as usize) <= max_changepoints)
        .collect();
    masks.sort_by_key(|m| m.count_ones());
    for mask in masks {
        if mask == 0 {
            continue;
        }
        let cps: Vec<usize> = (0..interior)
            .filter(|b| mask & (1 << b) != 0)
            .map(|b| b + 1)
            .collect();
        let mut prev = 0;
        let admissible = cps
            .iter()
            .chain(std::iter::once(&n))
            .all(|&c| {
                let ok = c - prev >= min_len;
                prev = c;
                ok
            });
        if !admissible {
            continue;
        }
        let cost = segmentation_cost(readings, &cps);
        let score = cost + penalty * cps.len() as f64;
        let better = score < best_score
            || (score == best_score
                && cps.len() == best.changepoints.len()
                && cps < best.changepoints);
        if better {
            best_score = score;
            best = Segmentation {
                changepoints: cps,
                total_cost: cost,
            };
        }
    }
    Ok(best)
}

/// Pruned exact linear time search with unit minimum segment length and no
/// cap on the number of change-points.
pub fn pelt_segmentation(readings: &[f64], penalty: f64) -> Segmentation {
    let data = centered(readings);
    let n = data.len();
    if n == 0 {
        return Segmentation::default();
    }
    // best[t]: optimal penalised cost of data[..t]; last[t]: final change-point
    let mut best = vec![0.0f64; n + 1];
    let mut last = vec![0usize; n + 1];
    best[0] = -penalty;
    let mut candidates = vec![0usize];
    for t in 1..=n {
        let mut best_t = f64::INFINITY;
        let mut arg = 0;
        let costs: Vec<f64> = candidates
            .iter()
            .map(|&s| best[s] + sse(&data[s..t]) + penalty)
            .collect();
        for (&s, &c) in candidates.iter().zip(&costs) {
            if c < best_t {
                best_t = c;
                arg = s;
            }
        }
        best[t] = best_t;
        last[t] = arg;
        // drop candidates that can never be optimal again
        candidates = candidates
            .iter()
            .zip(&costs)
            .filter(|(_, &c)| c - penalty <= best_t)
            .map(|(&s, _)| s)
            .collect();
        candidates.push(t);
    }
    let mut changepoints = Vec::new();
    let mut t = n;
    while t > 0 {
        let s = last[t];
        if s > 0 {
            changepoints.push(s);
        }
        t = s;
    }
    changepoints.reverse();
    let total_cost = segmentation_cost(readings, &changepoints);
    Segmentation {
        changepoints,
        total_cost,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STEP: [f64; 8] = [180., 180., 180., 180., 190., 190., 190., 190.];
    const PLATEAU: [f64; 8] = [178., 179., 186., 187., 186., 178., 179., 178.];

    #[test]
    fn segment_cost_examples() {
        assert_eq!(segment_cost(&[182., 182., 182.], 0, 3).unwrap(), 0.0);
        assert_eq!(segment_cost(&[180., 184.], 0, 2).unwrap(), 8.0);
        assert_eq!(segment_cost(&[180., 180., 190., 190.], 0, 4).unwrap(), 100.0);
        assert_eq!(
            segment_cost(&STEP, 3, 3),
            Err(ChangepointError::EmptySegment { start: 3, end: 3 })
        );
    }

    #[test]
    fn constant_sequence_has_no_changepoints() {
        let s = binary_segmentation(&[180.0; 8], 10.0, 2, 3);
        assert!(s.changepoints.is_empty());
        assert_eq!(s.total_cost, 0.0);
        assert!(pelt_segmentation(&[180.0; 8], AIC_PENALTY)
            .changepoints
            .is_empty());
    }

    #[test]
    fn step_has_one_changepoint() {
        let s = binary_segmentation(&STEP, 10.0, 2, 3);
        assert_eq!(s.changepoints, vec![4]);
        assert_eq!(s.total_cost, 0.0);
        let oracle = brute_force_segmentation(&STEP, 10.0, 2, 3).unwrap();
        assert_eq!(oracle.changepoints, vec![4]);
        assert_eq!(pelt_segmentation(&STEP, 10.0).changepoints, vec![4]);
    }

    #[test]
    fn plateau_has_two_changepoints() {
        let s = binary_segmentation(&PLATEAU, 10.0, 2, 3);
        assert_eq!(s.changepoints, vec![2, 5]);
        let oracle = brute_force_segmentation(&PLATEAU, 10.0, 2, 3).unwrap();
        assert_eq!(oracle.changepoints, vec![2, 5]);
    }

    #[test]
    fn infinite_penalty_blocks_everything() {
        let s = brute_force_segmentation(&PLATEAU, f64::INFINITY, 2, 3).unwrap();
        assert!(s.changepoints.is_empty());
        assert!(binary_segmentation(&PLATEAU, f64::INFINITY, 2, 3)
            .changepoints
            .is_empty());
    }

    #[test]
    fn brute_force_rejects_long_input() {
        assert_eq!(
            brute_force_segmentation(&[1.0; 17], 1.0, 1, 3),
            Err(ChangepointError::TooLong(17))
        );
    }

    #[test]
    fn default_penalty_matches_model() {
        let p = SegmentationParams::default();
        assert!((p.penalty - 66.542).abs() < 1e-3);
        assert_eq!(p.min_segment_length, 2);
        assert_eq!(p.max_changepoints, 3);
    }

    #[test]
    fn min_segment_length_is_respected() {
        // a single outlier cannot be isolated with min length 2
        let r = [180., 180., 180., 200., 180., 180., 180., 180.];
        let s = binary_segmentation(&r, 1.0, 2, 3);
        let mut prev = 0;
        for &c in s.changepoints.iter().chain(std::iter::once(&8)) {
            assert!(c - prev >= 2);
            prev = c;
        }
    }
}
