//! Single-pass online learners sharing one linear model container.
//!
//! Every update consumes a sample once: dual weights are born at zero, the
//! closed-form step is applied, and only the weight vector survives. The
//! binary family covers the passive-aggressive rules (hard, slack-capped,
//! quadratic-slack) and their range-capped generalization; the one-class
//! family separates data from the origin with the score band `[2, R + 1]`.
//! A forgetting factor decays the previous weights before a step lands, and
//! [`stream_run`] drives test-then-train evaluation over a sample sequence.

use crate::error::{Error, Result};
use crate::types::{dot, norm_sq, Sample};

/// Update rule selector for [`OnlineLinearModel`].
///
/// `Pa*` are the classic passive-aggressive rules (no score ceiling).
/// `Brmm*` add the upper margin at `R` via a second, opposing step.
/// `Oc*` are the one-class origin-separation rules with band `[2, R + 1]`;
/// the `OcRfda*` forms are their closed `R = 1` reductions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnlineVariant {
    PaHard,
    Pa1,
    Pa2,
    BrmmL1,
    BrmmL2,
    OcL1,
    OcL2,
    OcHard,
    OcRfdaL1,
    OcRfdaL2,
}

impl OnlineVariant {
    fn is_binary(self) -> bool {
        matches!(
            self,
            OnlineVariant::PaHard
                | OnlineVariant::Pa1
                | OnlineVariant::Pa2
                | OnlineVariant::BrmmL1
                | OnlineVariant::BrmmL2
        )
    }

    fn is_one_class(self) -> bool {
        !self.is_binary()
    }
}

/// Magnitudes of the dual step(s) taken by a single update.
///
/// `alpha` pushes the score up toward the lower margin, `beta` pushes it back
/// down from the upper margin. Rules without an upper margin always report
/// `beta = 0`. `skipped` marks a zero-norm sample that was ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateOutcome {
    pub alpha: f64,
    pub beta: f64,
    pub skipped: bool,
}

impl UpdateOutcome {
    fn skipped() -> Self {
        UpdateOutcome { alpha: 0.0, beta: 0.0, skipped: true }
    }
}

/// Linear model updated one sample at a time.
///
/// The dimension is fixed by the first non-skipped update; until then the
/// weight vector is empty and scores fall back to the offset alone. Binary
/// range-capped variants learn an offset through the homogeneous-coordinate
/// trick (the sample is implicitly extended by a constant 1); the flag is on
/// by default and [`OnlineLinearModel::disable_offset`] turns it off to
/// reproduce the textbook offset-free rules. One-class variants carry the
/// fixed implicit offset `b = -1` and never change it.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineLinearModel {
    pub w: Vec<f64>,
    pub b: f64,
    variant: OnlineVariant,
    c: f64,
    c_outer: f64,
    r: f64,
    forgetting: f64,
    use_offset: bool,
    /// Zero-norm samples ignored so far; they carry no direction.
    pub skipped_zero_norm: usize,
}

impl OnlineLinearModel {
    /// Creates a model with the variant's natural range: `R = 1` for the
    /// `OcRfda*` rules and `R = ∞` (no ceiling) otherwise.
    pub fn new(variant: OnlineVariant, c: f64) -> Result<Self> {
        let r = match variant {
            OnlineVariant::OcRfdaL1 | OnlineVariant::OcRfdaL2 => 1.0,
            _ => f64::INFINITY,
        };
        Self::with_range(variant, c, r)
    }

    /// Creates a model with an explicit score ceiling `R`.
    pub fn with_range(variant: OnlineVariant, c: f64, r: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidParam(format!(
                "slack penalty must be positive, got {c}"
            )));
        }
        if r.is_nan() || r < 1.0 {
            return Err(Error::InvalidParam(format!(
                "score ceiling must satisfy R >= 1, got {r}"
            )));
        }
        match variant {
            OnlineVariant::OcHard if r == 1.0 => {
                return Err(Error::InvalidParam(
                    "hard one-class rule has no solution at R = 1 \
                     (score band collapses to a point)"
                        .into(),
                ));
            }
            OnlineVariant::OcRfdaL1 | OnlineVariant::OcRfdaL2 if r != 1.0 => {
                return Err(Error::InvalidParam(format!(
                    "fixed-band one-class rules require R = 1, got {r}"
                )));
            }
            _ => {}
        }
        let b = if variant.is_one_class() { -1.0 } else { 0.0 };
        Ok(OnlineLinearModel {
            w: Vec::new(),
            b,
            variant,
            c,
            c_outer: c,
            r,
            forgetting: 1.0,
            use_offset: matches!(variant, OnlineVariant::BrmmL1 | OnlineVariant::BrmmL2),
            skipped_zero_norm: 0,
        })
    }

    pub fn variant(&self) -> OnlineVariant {
        self.variant
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn range(&self) -> f64 {
        self.r
    }

    pub fn forgetting(&self) -> f64 {
        self.forgetting
    }

    pub fn uses_offset(&self) -> bool {
        self.use_offset
    }

    /// Separate penalty for the upper-margin step of the binary range-capped
    /// rules; defaults to the lower-margin penalty.
    pub fn set_c_outer(&mut self, c_outer: f64) -> Result<()> {
        if !(c_outer > 0.0) {
            return Err(Error::InvalidParam(format!(
                "upper-margin penalty must be positive, got {c_outer}"
            )));
        }
        self.c_outer = c_outer;
        Ok(())
    }

    /// Decay factor applied to the previous weights on every update;
    /// `1` (the default) keeps them untouched.
    pub fn set_forgetting(&mut self, gamma: f64) -> Result<()> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "forgetting factor must lie in (0, 1], got {gamma}"
            )));
        }
        self.forgetting = gamma;
        Ok(())
    }

    /// Pins the offset at zero for the binary range-capped rules, matching
    /// the offset-free textbook updates exactly.
    pub fn disable_offset(&mut self) {
        self.use_offset = false;
    }

    /// Signed decision value: positive means the positive class (binary) or
    /// inlier (one-class). One-class scores sit in `[2, R + 1]` for inliers,
    /// so the signed value is `<w, x> + b - 1` with the fixed `b = -1`.
    pub fn decision_score(&self, x: &[f64]) -> Result<f64> {
        let raw = if self.w.is_empty() {
            0.0
        } else {
            if x.len() != self.w.len() {
                return Err(Error::DimensionMismatch { expected: self.w.len(), got: x.len() });
            }
            dot(&self.w, x)
        };
        if self.variant.is_one_class() {
            Ok(raw + self.b - 1.0)
        } else {
            Ok(raw + self.b)
        }
    }

    pub fn decide(&self, x: &[f64]) -> Result<i32> {
        Ok(crate::types::sign_decision(self.decision_score(x)?))
    }

    /// Applies the model's update rule to one sample, in place.
    ///
    /// The dual step(s) are computed from the current weights, the previous
    /// weights are decayed by the forgetting factor, and the sample's
    /// contribution is added undecayed. Zero-norm samples are counted and
    /// skipped. Presenting the same sample repeatedly is allowed but
    /// off-model: each presentation is treated as new data, so its
    /// accumulated weight can exceed the per-sample cap.
    pub fn update(&mut self, x: &[f64], y: i32) -> Result<UpdateOutcome> {
        if y != 1 && y != -1 {
            return Err(Error::InvalidParam(format!("label must be +1 or -1, got {y}")));
        }
        if self.variant.is_one_class() && y != 1 {
            return Err(Error::InvalidParam(
                "one-class rules accept only positive samples".into(),
            ));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParam("sample contains a non-finite value".into()));
        }
        if self.w.is_empty() {
            if x.is_empty() {
                return Err(Error::EmptyInput("sample has no features".into()));
            }
            self.w = vec![0.0; x.len()];
        } else if x.len() != self.w.len() {
            return Err(Error::DimensionMismatch { expected: self.w.len(), got: x.len() });
        }
        let q = norm_sq(x);
        if q == 0.0 {
            self.skipped_zero_norm += 1;
            return Ok(UpdateOutcome::skipped());
        }
        let outcome = if self.variant.is_binary() {
            self.binary_step(x, y, q)
        } else {
            self.one_class_step(x, q)
        };
        Ok(outcome)
    }

    fn binary_step(&mut self, x: &[f64], y: i32, q: f64) -> UpdateOutcome {
        let yf = f64::from(y) * (dot(&self.w, x) + self.b);
        let (q_eff, off) = if self.use_offset { (q + 1.0, 1.0) } else { (q, 0.0) };
        let (alpha, beta) = match self.variant {
            // Textbook passive-aggressive closed forms; the denominator is
            // never extended by the offset coordinate (b stays 0).
            OnlineVariant::PaHard => {
                let l = 1.0 - yf;
                (if l > 0.0 { l / q } else { 0.0 }, 0.0)
            }
            OnlineVariant::Pa1 => (((1.0 - yf) / q).clamp(0.0, self.c), 0.0),
            OnlineVariant::Pa2 => (((1.0 - yf) / (q + 0.5 / self.c)).max(0.0), 0.0),
            // Single pass of the range-capped dual coordinate step: the lower
            // step first, then the upper step sees the refreshed score.
            OnlineVariant::BrmmL1 => {
                let alpha = ((1.0 - yf) / q_eff).clamp(0.0, self.c);
                let yf_mid = yf + alpha * q_eff;
                let beta = ((yf_mid - self.r) / q_eff).clamp(0.0, self.c_outer);
                (alpha, beta)
            }
            OnlineVariant::BrmmL2 => {
                let alpha = ((1.0 - yf) / (q_eff + 0.5 / self.c)).max(0.0);
                let yf_mid = yf + alpha * q_eff;
                let beta = ((yf_mid - self.r) / (q_eff + 0.5 / self.c_outer)).max(0.0);
                (alpha, beta)
            }
            _ => unreachable!("one-class variants dispatch elsewhere"),
        };
        let coeff = f64::from(y) * (alpha - beta);
        self.apply(x, coeff, off * coeff);
        UpdateOutcome { alpha, beta, skipped: false }
    }

    fn one_class_step(&mut self, x: &[f64], q: f64) -> UpdateOutcome {
        let s = dot(&self.w, x);
        let (alpha, beta) = match self.variant {
            OnlineVariant::OcL1 => (
                ((2.0 - s) / q).clamp(0.0, self.c),
                ((s - (self.r + 1.0)) / q).clamp(0.0, self.c),
            ),
            OnlineVariant::OcL2 => {
                let d = q + 1.0 / self.c;
                (((2.0 - s) / d).max(0.0), ((s - (self.r + 1.0)) / d).max(0.0))
            }
            OnlineVariant::OcHard => {
                (((2.0 - s) / q).max(0.0), ((s - (self.r + 1.0)) / q).max(0.0))
            }
            // Closed R = 1 reductions: the two opposing steps fold into one
            // signed step, clamped symmetrically (or not at all for L2).
            OnlineVariant::OcRfdaL1 => {
                let v = (2.0 - s) / q;
                if v >= 0.0 {
                    (v.min(self.c), 0.0)
                } else {
                    (0.0, (-v).min(self.c))
                }
            }
            OnlineVariant::OcRfdaL2 => {
                let v = (2.0 - s) / (q + 1.0 / self.c);
                if v >= 0.0 { (v, 0.0) } else { (0.0, -v) }
            }
            _ => unreachable!("binary variants dispatch elsewhere"),
        };
        // Both steps are computed from the same pre-update score. They can
        // never both be active: alpha needs a score below 2, beta a score
        // above R + 1 >= 2.
        debug_assert!(!(alpha > 0.0 && beta > 0.0));
        self.apply(x, alpha - beta, 0.0);
        UpdateOutcome { alpha, beta, skipped: false }
    }

    fn apply(&mut self, x: &[f64], coeff: f64, b_delta: f64) {
        if self.forgetting < 1.0 {
            for wi in &mut self.w {
                *wi *= self.forgetting;
            }
            if self.use_offset {
                self.b *= self.forgetting;
            }
        }
        for (wi, xi) in self.w.iter_mut().zip(x) {
            *wi += coeff * xi;
        }
        self.b += b_delta;
    }
}

fn require_variant(
    model: &OnlineLinearModel,
    ok: bool,
    family: &str,
) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!(
            "update rule expects a {family} variant, model uses {:?}",
            model.variant
        )))
    }
}

/// Passive-aggressive step on a copy of `model` (hard, slack-capped, or
/// quadratic-slack per the model's variant).
pub fn pa_update(model: &OnlineLinearModel, x: &[f64], y: i32) -> Result<OnlineLinearModel> {
    require_variant(
        model,
        matches!(model.variant, OnlineVariant::PaHard | OnlineVariant::Pa1 | OnlineVariant::Pa2),
        "passive-aggressive",
    )?;
    let mut next = model.clone();
    next.update(x, y)?;
    Ok(next)
}

/// Single range-capped dual step on a copy of `model`.
pub fn online_brmm_update(
    model: &OnlineLinearModel,
    x: &[f64],
    y: i32,
) -> Result<OnlineLinearModel> {
    require_variant(
        model,
        matches!(model.variant, OnlineVariant::BrmmL1 | OnlineVariant::BrmmL2),
        "range-capped binary",
    )?;
    let mut next = model.clone();
    next.update(x, y)?;
    Ok(next)
}

/// Single one-class origin-separation step on a copy of `model`.
pub fn online_oneclass_update(model: &OnlineLinearModel, x: &[f64]) -> Result<OnlineLinearModel> {
    require_variant(model, model.variant.is_one_class(), "one-class")?;
    let mut next = model.clone();
    next.update(x, 1)?;
    Ok(next)
}

/// One update with the previous weights decayed by `gamma` first; the new
/// sample's contribution is added at full strength.
pub fn forgetting_update(
    model: &OnlineLinearModel,
    x: &[f64],
    y: i32,
    gamma: f64,
) -> Result<OnlineLinearModel> {
    let mut next = model.clone();
    next.set_forgetting(gamma)?;
    next.update(x, y)?;
    next.forgetting = model.forgetting;
    Ok(next)
}

/// Whether [`stream_run`] scores each sample before training on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamProtocol {
    /// Score first, then update; the trace holds one `(score, label)` pair
    /// per sample in input order.
    TestThenTrain,
    /// Update only; the trace stays empty.
    TrainOnly,
}

/// Feeds a sample sequence through the model's update rule.
///
/// Returns the trained model and, for [`StreamProtocol::TestThenTrain`], the
/// pre-update decision score of every sample paired with its label.
pub fn stream_run(
    mut model: OnlineLinearModel,
    samples: &[Sample],
    protocol: StreamProtocol,
) -> Result<(OnlineLinearModel, Vec<(f64, i32)>)> {
    let mut trace = Vec::new();
    for sample in samples {
        if protocol == StreamProtocol::TestThenTrain {
            trace.push((model.decision_score(&sample.features)?, sample.label));
        }
        model.update(&sample.features, sample.label)?;
    }
    Ok((model, trace))
}
