//! Classification metrics, AUC, threshold tuning, and seeded data splits.
//!
//! Metrics split into two groups: those that only depend on per-class rates
//! (TPR, TNR, balanced and weighted accuracy, G-mean, AUC) are unchanged
//! when one class is replicated, while accuracy, F-measure, and Matthews
//! correlation shift with the class ratio. Scores are compared pairwise for
//! AUC with ties counting one half, and the decision threshold can be tuned
//! to maximize any confusion-matrix metric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Counts of the four prediction outcomes; positives are label +1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub true_pos: usize,
    pub false_neg: usize,
    pub true_neg: usize,
    pub false_pos: usize,
}

/// Scalar summaries of a [`ConfusionMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Metric {
    /// True positive rate TP / (TP + FN).
    Tpr,
    /// True negative rate TN / (TN + FP).
    Tnr,
    /// Plain accuracy (TP + TN) / total.
    Acc,
    /// Balanced accuracy (TPR + TNR) / 2.
    Ba,
    /// Weighted accuracy `weight * TPR + (1 - weight) * TNR`.
    Wa { weight: f64 },
    /// Geometric mean sqrt(TPR * TNR).
    GMean,
    /// F-measure 2 TP / (2 TP + FP + FN).
    FMeasure,
    /// Matthews correlation coefficient; 0 when any marginal is empty.
    Mcc,
}

impl ConfusionMatrix {
    pub fn new(true_pos: usize, false_neg: usize, true_neg: usize, false_pos: usize) -> Self {
        ConfusionMatrix { true_pos, false_neg, true_neg, false_pos }
    }

    pub fn positives(&self) -> usize {
        self.true_pos + self.false_neg
    }

    pub fn negatives(&self) -> usize {
        self.true_neg + self.false_pos
    }

    pub fn total(&self) -> usize {
        self.positives() + self.negatives()
    }

    fn tpr(&self) -> Result<f64> {
        if self.positives() == 0 {
            return Err(Error::EmptyInput("no positive samples for a class rate".into()));
        }
        Ok(self.true_pos as f64 / self.positives() as f64)
    }

    fn tnr(&self) -> Result<f64> {
        if self.negatives() == 0 {
            return Err(Error::EmptyInput("no negative samples for a class rate".into()));
        }
        Ok(self.true_neg as f64 / self.negatives() as f64)
    }

    /// Evaluates one metric on these counts.
    ///
    /// Class-conditional metrics error when the class they condition on is
    /// empty. The Matthews correlation returns 0 whenever a marginal count
    /// is zero (its standard degenerate limit).
    pub fn metric(&self, kind: Metric) -> Result<f64> {
        match kind {
            Metric::Tpr => self.tpr(),
            Metric::Tnr => self.tnr(),
            Metric::Acc => {
                if self.total() == 0 {
                    return Err(Error::EmptyInput("empty confusion matrix".into()));
                }
                Ok((self.true_pos + self.true_neg) as f64 / self.total() as f64)
            }
            Metric::Ba => Ok((self.tpr()? + self.tnr()?) / 2.0),
            Metric::Wa { weight } => {
                if !(0.0..=1.0).contains(&weight) {
                    return Err(Error::InvalidParam(format!(
                        "class weight must lie in [0, 1], got {weight}"
                    )));
                }
                Ok(weight * self.tpr()? + (1.0 - weight) * self.tnr()?)
            }
            Metric::GMean => Ok((self.tpr()? * self.tnr()?).sqrt()),
            Metric::FMeasure => {
                if self.positives() == 0 {
                    return Err(Error::EmptyInput(
                        "no positive samples for the F-measure".into(),
                    ));
                }
                let denom = 2 * self.true_pos + self.false_pos + self.false_neg;
                Ok(2.0 * self.true_pos as f64 / denom as f64)
            }
            Metric::Mcc => {
                let pp = self.true_pos + self.false_pos;
                let pn = self.false_neg + self.true_neg;
                if pp == 0 || pn == 0 || self.positives() == 0 || self.negatives() == 0 {
                    return Ok(0.0);
                }
                let num = (self.true_pos * self.true_neg) as f64
                    - (self.false_pos * self.false_neg) as f64;
                let denom = (pp as f64 * self.positives() as f64)
                    .sqrt()
                    * (pn as f64 * self.negatives() as f64).sqrt();
                Ok(num / denom)
            }
        }
    }
}

/// Tallies predictions against reference labels (both in {-1, +1}).
pub fn confusion(labels: &[i32], predictions: &[i32]) -> Result<ConfusionMatrix> {
    if labels.len() != predictions.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), got: predictions.len() });
    }
    let mut cm = ConfusionMatrix::new(0, 0, 0, 0);
    for (&y, &p) in labels.iter().zip(predictions) {
        if y != 1 && y != -1 || p != 1 && p != -1 {
            return Err(Error::InvalidParam(format!(
                "labels and predictions must be +1 or -1, got ({y}, {p})"
            )));
        }
        match (y, p) {
            (1, 1) => cm.true_pos += 1,
            (1, _) => cm.false_neg += 1,
            (-1, -1) => cm.true_neg += 1,
            _ => cm.false_pos += 1,
        }
    }
    Ok(cm)
}

/// Decision scores paired with reference labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    entries: Vec<(f64, i32)>,
}

impl ScoredSet {
    pub fn new(entries: Vec<(f64, i32)>) -> Result<Self> {
        for (s, y) in &entries {
            if !s.is_finite() {
                return Err(Error::InvalidParam(format!("score {s} is not finite")));
            }
            if *y != 1 && *y != -1 {
                return Err(Error::InvalidParam(format!("label must be +1 or -1, got {y}")));
            }
        }
        Ok(ScoredSet { entries })
    }

    pub fn entries(&self) -> &[(f64, i32)] {
        &self.entries
    }

    fn class_counts(&self) -> (usize, usize) {
        let pos = self.entries.iter().filter(|(_, y)| *y == 1).count();
        (pos, self.entries.len() - pos)
    }

    fn require_both_classes(&self) -> Result<(usize, usize)> {
        let (pos, neg) = self.class_counts();
        if pos == 0 || neg == 0 {
            return Err(Error::EmptyInput(
                "scored set needs at least one sample per class".into(),
            ));
        }
        Ok((pos, neg))
    }
}

/// Probability that a random positive outscores a random negative, counting
/// tied pairs as one half.
///
/// Computed by rank sums: with `R` the summed (average, 1-based) ranks of
/// the positives, the pair count above is `R - P(P+1)/2`, exact in floating
/// point since average ranks are halves.
pub fn auc(scores: &ScoredSet) -> Result<f64> {
    let (pos, neg) = scores.require_both_classes()?;
    let mut order: Vec<usize> = (0..scores.entries.len()).collect();
    order.sort_by(|a, b| {
        scores.entries[*a]
            .0
            .partial_cmp(&scores.entries[*b].0)
            .expect("scores are finite")
    });
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len()
            && scores.entries[order[j + 1]].0 == scores.entries[order[i]].0
        {
            j += 1;
        }
        // Tie group spans 1-based ranks i+1 ..= j+1; all get the average.
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if scores.entries[idx].1 == 1 {
                rank_sum += avg_rank;
            }
        }
        i = j + 1;
    }
    let p = pos as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * neg as f64))
}

/// Best threshold for predicting `sign(score - theta)` under `kind`.
///
/// Every set of predictions reachable by some threshold is scored; the
/// reported theta is the midpoint of the optimal interval between adjacent
/// distinct scores (all-positive and all-negative predictions are
/// represented by the finite endpoints `min - 1` and `max`). Ties prefer
/// the smallest `|theta|`, then the larger theta.
pub fn optimize_threshold(scores: &ScoredSet, kind: Metric) -> Result<(f64, f64)> {
    scores.require_both_classes()?;
    let mut distinct: Vec<f64> = scores.entries.iter().map(|(s, _)| *s).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).expect("scores are finite"));
    distinct.dedup();

    let mut candidates = Vec::with_capacity(distinct.len() + 1);
    candidates.push(distinct[0] - 1.0);
    for pair in distinct.windows(2) {
        candidates.push((pair[0] + pair[1]) / 2.0);
    }
    candidates.push(distinct[distinct.len() - 1]);

    let labels: Vec<i32> = scores.entries.iter().map(|(_, y)| *y).collect();
    let mut best: Option<(f64, f64)> = None;
    for theta in candidates {
        let predictions: Vec<i32> = scores
            .entries
            .iter()
            .map(|(s, _)| if *s > theta { 1 } else { -1 })
            .collect();
        let value = confusion(&labels, &predictions)?.metric(kind)?;
        let better = match best {
            None => true,
            Some((best_theta, best_value)) => {
                value > best_value
                    || (value == best_value
                        && (theta.abs() < best_theta.abs()
                            || (theta.abs() == best_theta.abs() && theta > best_theta)))
            }
        };
        if better {
            best = Some((theta, value));
        }
    }
    Ok(best.expect("candidate list is never empty"))
}

/// Splits `0..n` into `k` disjoint folds of near-equal size.
///
/// A plain split shuffles all indices with the seed and deals them out in
/// contiguous blocks, larger blocks first. A stratified split (requires
/// `labels`, one per index) shuffles within each class and gives every fold
/// the same per-class share; per-class surplus rotates through the folds so
/// totals still differ by at most one. Folds are returned sorted.
pub fn kfold_split(
    n: usize,
    k: usize,
    seed: u64,
    stratified: bool,
    labels: Option<&[i32]>,
) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::InvalidParam(format!(
            "fold count must satisfy 2 <= k <= n, got k = {k} for n = {n}"
        )));
    }
    let mut rng = Stream::new(seed);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    if stratified {
        let labels = labels.ok_or_else(|| {
            Error::InvalidParam("stratified split needs labels".into())
        })?;
        if labels.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
        }
        let mut classes: Vec<i32> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        let mut surplus_fold = 0;
        for class in classes {
            let mut members: Vec<usize> =
                (0..n).filter(|i| labels[*i] == class).collect();
            rng.shuffle(&mut members);
            let base = members.len() / k;
            let surplus = members.len() % k;
            let mut cursor = 0;
            for fold in folds.iter_mut() {
                let take = base;
                fold.extend_from_slice(&members[cursor..cursor + take]);
                cursor += take;
            }
            for _ in 0..surplus {
                folds[surplus_fold].push(members[cursor]);
                cursor += 1;
                surplus_fold = (surplus_fold + 1) % k;
            }
        }
    } else {
        let order = rng.permutation(n);
        let base = n / k;
        let surplus = n % k;
        let mut cursor = 0;
        for (f, fold) in folds.iter_mut().enumerate() {
            let take = base + usize::from(f < surplus);
            fold.extend_from_slice(&order[cursor..cursor + take]);
            cursor += take;
        }
        debug_assert_eq!(cursor, order.len());
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}
