//! Batch dual coordinate descent for margin machines with a bounded score
//! band [1, R] and a regularized offset.
//!
//! The offset is folded into the kernel as a +1/H shift, which removes the
//! usual equality constraint from the dual and lets single-index coordinate
//! descent solve it. R = infinity drops the upper bound (plain soft-margin
//! SVM); R = 1 collapses the band to a single target value (regularized
//! Fisher discriminant / least-squares behaviour with L2 slack).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::sweep::run_sweeps;
use crate::types::{dot, Dataset, HyperParams, LossOrder, Sample};

/// Gram matrices up to this many rows are precomputed; larger problems
/// evaluate kernel rows on demand.
const MAX_CACHED_GRAM: usize = 2048;

/// Outcome bookkeeping for a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// True when the final optimality residual is within tolerance.
    pub converged: bool,
    /// Coordinate sweeps consumed (full and active-set both count).
    pub sweeps: usize,
    /// Largest violated optimality condition over all dual variables.
    pub kkt_residual: f64,
}

/// Weight-space shortcut kept for linear kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearCache {
    pub w: Vec<f64>,
    pub b: f64,
}

/// Fitted dual model. `alphas` are the lower-margin duals, `betas` the
/// upper-margin duals; at most one of the pair is nonzero per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualModel {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub support: Vec<Sample>,
    pub kernel: KernelSpec,
    pub h: f64,
    pub linear_cache: Option<LinearCache>,
    pub hyperparams: HyperParams,
    pub report: FitReport,
}

impl DualModel {
    pub fn dim(&self) -> usize {
        self.support[0].features.len()
    }

    /// Input-space weights of a linear-kernel model; `None` for other kernels.
    pub fn linear_weights(&self) -> Option<&[f64]> {
        self.linear_cache.as_ref().map(|c| c.w.as_slice())
    }

    /// Decision score f(x). Uses the weight-space cache for linear kernels,
    /// otherwise the dual expansion sum_j y_j(alpha_j - beta_j)(k(x_j,x) + 1/H).
    pub fn decision_score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.decision_score_unchecked(x))
    }

    pub(crate) fn decision_score_unchecked(&self, x: &[f64]) -> f64 {
        if let Some(cache) = &self.linear_cache {
            return dot(&cache.w, x) + cache.b;
        }
        self.dual_expansion_score(x)
    }

    /// The dual expansion evaluated directly, bypassing the linear cache.
    pub fn dual_expansion_score(&self, x: &[f64]) -> f64 {
        let inv_h = 1.0 / self.h;
        let mut acc = 0.0;
        for (j, s) in self.support.iter().enumerate() {
            let d = self.alphas[j] - self.betas[j];
            if d != 0.0 {
                acc += s.label as f64 * d * (self.kernel.eval_unchecked(&s.features, x) + inv_h);
            }
        }
        acc
    }
}

struct PerIndex {
    y: f64,
    cap_a: f64,
    cap_b: f64,
    r: f64,
    stab_a: f64,
    stab_b: f64,
    qdiag: f64,
    skip: bool,
}

enum Scores {
    /// Linear kernel: weight vector plus running sum s = sum_j y_j d_j,
    /// so that f_j = <w, x_j> + s/H.
    Linear { w: Vec<f64>, s: f64 },
    /// General kernel: maintained score vector plus optional dense Gram.
    Kernel { f: Vec<f64>, gram: Option<Vec<f64>>, kernel: KernelSpec },
}

struct SolveState<'a> {
    xs: Vec<&'a [f64]>,
    idx: Vec<PerIndex>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    inv_h: f64,
    scores: Scores,
}

impl<'a> SolveState<'a> {
    fn score(&self, j: usize) -> f64 {
        match &self.scores {
            Scores::Linear { w, s } => dot(w, self.xs[j]) + s * self.inv_h,
            Scores::Kernel { f, .. } => f[j],
        }
    }

    /// Applies a change `dd` to the signed dual y_j * d_j of index j.
    fn apply(&mut self, j: usize, dd: f64) {
        match &mut self.scores {
            Scores::Linear { w, s } => {
                for (wi, xi) in w.iter_mut().zip(self.xs[j]) {
                    *wi += dd * xi;
                }
                *s += dd;
            }
            Scores::Kernel { f, gram, kernel } => {
                let n = self.xs.len();
                match gram {
                    Some(g) => {
                        let row = &g[j * n..(j + 1) * n];
                        for (fl, klj) in f.iter_mut().zip(row) {
                            *fl += dd * (klj + self.inv_h);
                        }
                    }
                    None => {
                        let xj = self.xs[j];
                        for l in 0..n {
                            f[l] += dd * (kernel.eval_unchecked(xj, self.xs[l]) + self.inv_h);
                        }
                    }
                }
            }
        }
    }

    /// One coordinate visit: lower-margin dual first, then the paired
    /// upper-margin dual immediately. Returns the largest dual change.
    fn update(&mut self, j: usize) -> f64 {
        let pi = &self.idx[j];
        if pi.skip {
            return 0.0;
        }
        let (y, qdiag, cap_a, cap_b, r, stab_a, stab_b) =
            (pi.y, pi.qdiag, pi.cap_a, pi.cap_b, pi.r, pi.stab_a, pi.stab_b);

        let fj = self.score(j);
        let grad_a = y * fj - 1.0 + stab_a * self.alpha[j];
        let a_new = (self.alpha[j] - grad_a / (qdiag + stab_a)).clamp(0.0, cap_a);
        let da = a_new - self.alpha[j];
        if da != 0.0 {
            self.apply(j, y * da);
            self.alpha[j] = a_new;
        }
        let mut change = da.abs();

        if r.is_finite() {
            let fj = self.score(j);
            let grad_b = r - y * fj + stab_b * self.beta[j];
            let b_new = (self.beta[j] - grad_b / (qdiag + stab_b)).clamp(0.0, cap_b);
            let db = b_new - self.beta[j];
            if db != 0.0 {
                self.apply(j, -y * db);
                self.beta[j] = b_new;
            }
            change = change.max(db.abs());
        }
        change
    }

    fn is_active(&self, j: usize) -> bool {
        self.alpha[j] > 0.0 || self.beta[j] > 0.0
    }

    /// Rebuilds the maintained scores exactly from the current duals, so the
    /// reported residual and returned caches match a from-scratch evaluation.
    fn rebuild(&mut self) {
        let n = self.xs.len();
        match &mut self.scores {
            Scores::Linear { w, s } => {
                for wi in w.iter_mut() {
                    *wi = 0.0;
                }
                *s = 0.0;
                for j in 0..n {
                    let d = self.idx[j].y * (self.alpha[j] - self.beta[j]);
                    if d != 0.0 {
                        for (wi, xi) in w.iter_mut().zip(self.xs[j]) {
                            *wi += d * xi;
                        }
                        *s += d;
                    }
                }
            }
            Scores::Kernel { f, gram, kernel } => {
                for l in 0..n {
                    let mut acc = 0.0;
                    for j in 0..n {
                        let d = self.idx[j].y * (self.alpha[j] - self.beta[j]);
                        if d != 0.0 {
                            let k = match gram {
                                Some(g) => g[j * n + l],
                                None => kernel.eval_unchecked(self.xs[j], self.xs[l]),
                            };
                            acc += d * (k + self.inv_h);
                        }
                    }
                    f[l] = acc;
                }
            }
        }
    }

    fn kkt_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.xs.len() {
            let pi = &self.idx[j];
            if pi.skip {
                continue;
            }
            let fj = self.score(j);
            let grad_a = pi.y * fj - 1.0 + pi.stab_a * self.alpha[j];
            worst = worst.max(bound_violation(self.alpha[j], pi.cap_a, grad_a));
            if pi.r.is_finite() {
                let grad_b = pi.r - pi.y * fj + pi.stab_b * self.beta[j];
                worst = worst.max(bound_violation(self.beta[j], pi.cap_b, grad_b));
            }
        }
        worst
    }
}

/// Optimality violation of a box-constrained dual with gradient `g`.
pub(crate) fn bound_violation(v: f64, cap: f64, g: f64) -> f64 {
    if v <= 0.0 {
        (-g).max(0.0)
    } else if v >= cap {
        g.max(0.0)
    } else {
        g.abs()
    }
}

/// Caps and gradient stabilizers for one dual variable given the slack
/// order: L1 boxes at c, L2 adds 1/(2c) to gradient and curvature, hard
/// margin leaves the variable unbounded.
fn slack_terms(order: LossOrder, c: f64) -> (f64, f64) {
    match order {
        LossOrder::L1 => (c, 0.0),
        LossOrder::L2 => (f64::INFINITY, if c.is_finite() { 1.0 / (2.0 * c) } else { 0.0 }),
        LossOrder::Hard => (f64::INFINITY, 0.0),
    }
}

pub fn fit_brmm(data: &Dataset, hp: &HyperParams, kernel: KernelSpec) -> Result<DualModel> {
    hp.validate()?;
    kernel.validate()?;
    let n = data.len();
    let pos = data.positives();
    if pos == 0 || pos == n {
        return Err(Error::InvalidParam(
            "training data contains a single class; both labels are required".into(),
        ));
    }

    let xs: Vec<&[f64]> = data.iter().map(|s| s.features.as_slice()).collect();
    let inv_h = 1.0 / hp.h;

    let mut idx = Vec::with_capacity(n);
    for s in data.iter() {
        let kdiag = kernel.eval_unchecked(&s.features, &s.features);
        let (cap_a, stab_a) = slack_terms(hp.loss_order, hp.c_for(s.label));
        let (cap_b, stab_b) = slack_terms(hp.loss_order, hp.c_outer_for(s.label));
        idx.push(PerIndex {
            y: s.label as f64,
            cap_a,
            cap_b,
            r: hp.r_for(s.label),
            stab_a,
            stab_b,
            qdiag: kdiag + inv_h,
            skip: kdiag == 0.0,
        });
    }

    let scores = match kernel {
        KernelSpec::Linear => Scores::Linear { w: vec![0.0; data.dim()], s: 0.0 },
        k => {
            let gram = if n <= MAX_CACHED_GRAM {
                let mut g = vec![0.0; n * n];
                for j in 0..n {
                    for l in j..n {
                        let v = k.eval_unchecked(xs[j], xs[l]);
                        g[j * n + l] = v;
                        g[l * n + j] = v;
                    }
                }
                Some(g)
            } else {
                None
            };
            Scores::Kernel { f: vec![0.0; n], gram, kernel: k }
        }
    };

    let mut state = SolveState {
        xs,
        idx,
        alpha: vec![0.0; n],
        beta: vec![0.0; n],
        inv_h,
        scores,
    };

    let mut sweeps_total = 0usize;
    let mut restarts = 0u64;
    let (converged, kkt) = loop {
        let budget = hp.max_iterations.saturating_sub(sweeps_total);
        let seed = hp.seed.wrapping_add(restarts.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let out = run_sweeps(
            &mut state,
            n,
            seed,
            hp.tolerance,
            budget,
            |s, j| s.update(j),
            |s, j| s.is_active(j),
        );
        sweeps_total += out.sweeps;
        state.rebuild();
        let kkt = state.kkt_residual();
        if kkt <= hp.tolerance {
            break (true, kkt);
        }
        if !out.change_converged || sweeps_total >= hp.max_iterations {
            break (false, kkt);
        }
        restarts += 1;
    };

    let linear_cache = match &state.scores {
        Scores::Linear { w, s } => Some(LinearCache { w: w.clone(), b: s * inv_h }),
        _ => None,
    };

    Ok(DualModel {
        alphas: state.alpha,
        betas: state.beta,
        support: data.samples().to_vec(),
        kernel,
        h: hp.h,
        linear_cache,
        hyperparams: hp.clone(),
        report: FitReport { converged, sweeps: sweeps_total, kkt_residual: kkt },
    })
}

/// Largest absolute training score of the unbounded (R = infinity) fit.
/// Any R at or above this value leaves the bounded fit's decisions
/// identical to the unbounded one.
pub fn compute_r_max(data: &Dataset, hp: &HyperParams, kernel: KernelSpec) -> Result<f64> {
    let mut unbounded = hp.clone();
    unbounded.r = f64::INFINITY;
    unbounded.per_class_r = None;
    let model = fit_brmm(data, &unbounded, kernel)?;
    let mut r_max = 0.0f64;
    for s in data.iter() {
        r_max = r_max.max(model.decision_score_unchecked(&s.features).abs());
    }
    Ok(r_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Sample;

    fn two_point() -> Dataset {
        Dataset::new(vec![
            Sample::new(vec![1.0, 0.0], 1),
            Sample::new(vec![-1.0, 0.0], -1),
        ])
        .unwrap()
    }

    #[test]
    fn symmetric_two_point_closed_form() {
        let hp = HyperParams::default();
        let m = fit_brmm(&two_point(), &hp, KernelSpec::Linear).unwrap();
        assert_eq!(m.alphas, vec![0.5, 0.5]);
        assert_eq!(m.betas, vec![0.0, 0.0]);
        let cache = m.linear_cache.as_ref().unwrap();
        assert_eq!(cache.w, vec![1.0, 0.0]);
        assert_eq!(cache.b, 0.0);
        assert!(m.report.converged);
        // f(x) = x1
        assert_eq!(m.decision_score(&[2.0, 0.0]).unwrap(), 2.0);
        assert_eq!(m.decision_score(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn small_cap_projects_duals() {
        let hp = HyperParams { c: 0.1, ..Default::default() };
        let m = fit_brmm(&two_point(), &hp, KernelSpec::Linear).unwrap();
        assert_eq!(m.alphas, vec![0.1, 0.1]);
        assert_eq!(m.linear_cache.as_ref().unwrap().w, vec![0.2, 0.0]);
    }

    #[test]
    fn r_one_inactive_band_matches_unbounded() {
        let hp = HyperParams::default();
        let unbounded = fit_brmm(&two_point(), &hp, KernelSpec::Linear).unwrap();
        let banded = fit_brmm(
            &two_point(),
            &HyperParams { r: 1.0, ..Default::default() },
            KernelSpec::Linear,
        )
        .unwrap();
        assert_eq!(unbounded.alphas, banded.alphas);
        assert_eq!(unbounded.betas, banded.betas);
        assert_eq!(unbounded.linear_cache, banded.linear_cache);
    }

    #[test]
    fn zero_model_scores_zero() {
        let mut m = fit_brmm(&two_point(), &HyperParams::default(), KernelSpec::Linear).unwrap();
        m.alphas = vec![0.0, 0.0];
        m.betas = vec![0.0, 0.0];
        m.linear_cache = None;
        assert_eq!(m.decision_score(&[3.0, -4.0]).unwrap(), 0.0);
    }

    #[test]
    fn l2_two_point_closed_form() {
        // Fixed point of the stabilized update: alpha = 1/(2 + 1/(2C)).
        let hp = HyperParams { c: 0.5, loss_order: LossOrder::L2, ..Default::default() };
        let m = fit_brmm(&two_point(), &hp, KernelSpec::Linear).unwrap();
        for a in &m.alphas {
            assert!((a - 1.0 / 3.0).abs() < 1e-9, "alpha {a}");
        }
        let w = &m.linear_cache.as_ref().unwrap().w;
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn single_class_rejected() {
        let d = Dataset::new(vec![
            Sample::new(vec![1.0], 1),
            Sample::new(vec![2.0], 1),
        ])
        .unwrap();
        assert!(fit_brmm(&d, &HyperParams::default(), KernelSpec::Linear).is_err());
    }

    #[test]
    fn dimension_mismatch_on_score() {
        let m = fit_brmm(&two_point(), &HyperParams::default(), KernelSpec::Linear).unwrap();
        assert!(m.decision_score(&[1.0]).is_err());
    }

    #[test]
    fn degree_one_polynomial_matches_linear_path() {
        // Same mathematics through the kernel path; checks the maintained
        // score vector and Gram bookkeeping against the weight-space path.
        let d = Dataset::new(vec![
            Sample::new(vec![1.5, 0.2], 1),
            Sample::new(vec![0.4, -1.0], 1),
            Sample::new(vec![-1.2, 0.3], -1),
            Sample::new(vec![-0.3, -0.8], -1),
        ])
        .unwrap();
        let hp = HyperParams { c: 2.0, r: 1.5, ..Default::default() };
        let lin = fit_brmm(&d, &hp, KernelSpec::Linear).unwrap();
        let poly = fit_brmm(
            &d,
            &hp,
            KernelSpec::Polynomial { gamma: 1.0, bias: 0.0, degree: 1 },
        )
        .unwrap();
        for (a, b) in lin.alphas.iter().zip(&poly.alphas) {
            assert!((a - b).abs() < 1e-9);
        }
        for x in [[0.7, 0.1], [-0.5, 2.0], [0.0, 0.0]] {
            let sl = lin.decision_score(&x).unwrap();
            let sp = poly.decision_score(&x).unwrap();
            assert!((sl - sp).abs() < 1e-9, "{sl} vs {sp}");
        }
    }

    #[test]
    fn linear_cache_matches_dual_expansion() {
        let d = Dataset::new(vec![
            Sample::new(vec![2.0, 1.0], 1),
            Sample::new(vec![1.0, 2.5], 1),
            Sample::new(vec![-1.0, -0.5], -1),
            Sample::new(vec![-2.0, 0.5], -1),
            Sample::new(vec![0.3, -1.5], -1),
        ])
        .unwrap();
        let hp = HyperParams { c: 1.3, r: 2.0, ..Default::default() };
        let m = fit_brmm(&d, &hp, KernelSpec::Linear).unwrap();
        for s in d.iter() {
            let via_cache = m.decision_score(&s.features).unwrap();
            let via_duals = m.dual_expansion_score(&s.features);
            assert!((via_cache - via_duals).abs() < 1e-9);
        }
    }

    #[test]
    fn cap_laws_and_pairing() {
        let d = Dataset::new(vec![
            Sample::new(vec![0.5, 0.1], 1),
            Sample::new(vec![0.2, 0.7], 1),
            Sample::new(vec![0.9, -0.1], 1),
            Sample::new(vec![-0.5, -0.2], -1),
            Sample::new(vec![-0.1, -0.9], -1),
        ])
        .unwrap();
        let hp = HyperParams { c: 0.7, r: 1.2, ..Default::default() };
        let m = fit_brmm(&d, &hp, KernelSpec::Linear).unwrap();
        for j in 0..d.len() {
            assert!(m.alphas[j] <= 0.7 + 1e-6);
            assert!(m.betas[j] <= 0.7 + 1e-6);
            assert!(m.alphas[j].min(m.betas[j]) <= 1e-6, "both duals active at {j}");
        }
        let unbounded = fit_brmm(
            &d,
            &HyperParams { c: 0.7, ..Default::default() },
            KernelSpec::Linear,
        )
        .unwrap();
        assert!(unbounded.betas.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn same_seed_bitwise_identical() {
        let d = Dataset::new(vec![
            Sample::new(vec![0.5, 0.1], 1),
            Sample::new(vec![0.2, 0.7], 1),
            Sample::new(vec![-0.5, -0.2], -1),
            Sample::new(vec![-0.1, -0.9], -1),
        ])
        .unwrap();
        let hp = HyperParams { c: 3.0, r: 1.5, seed: 11, ..Default::default() };
        let a = fit_brmm(&d, &hp, KernelSpec::Linear).unwrap();
        let b = fit_brmm(&d, &hp, KernelSpec::Linear).unwrap();
        assert_eq!(a.alphas, b.alphas);
        assert_eq!(a.betas, b.betas);
        assert_eq!(a.linear_cache, b.linear_cache);
    }

    #[test]
    fn r_max_of_symmetric_pair_is_one() {
        let hp = HyperParams::default();
        let r = compute_r_max(&two_point(), &hp, KernelSpec::Linear).unwrap();
        assert!((r - 1.0).abs() < 1e-9);
    }

    #[test]
    fn r_max_sees_outlier_score() {
        let d = Dataset::new(vec![
            Sample::new(vec![1.0, 0.0], 1),
            Sample::new(vec![-1.0, 0.0], -1),
            Sample::new(vec![10.0, 0.0], 1),
        ])
        .unwrap();
        let hp = HyperParams { c: 1.0, ..Default::default() };
        let m = fit_brmm(&d, &hp, KernelSpec::Linear).unwrap();
        let expected = m.decision_score(&[10.0, 0.0]).unwrap().abs();
        let r = compute_r_max(&d, &hp, KernelSpec::Linear).unwrap();
        assert!((r - expected).abs() < 1e-12);
        assert!(r >= 1.0 - 1e-9);
    }

    #[test]
    fn zero_vector_is_skipped() {
        // A zero feature vector has zero self-kernel and stays passive.
        let d = Dataset::new(vec![
            Sample::new(vec![0.0, 0.0], 1),
            Sample::new(vec![1.0, 0.0], 1),
            Sample::new(vec![-1.0, 0.0], -1),
        ])
        .unwrap();
        let m = fit_brmm(&d, &HyperParams::default(), KernelSpec::Linear).unwrap();
        assert_eq!(m.alphas[0], 0.0);
        assert_eq!(m.betas[0], 0.0);
    }

    #[test]
    fn rbf_fit_converges_and_separates() {
        let d = Dataset::new(vec![
            Sample::new(vec![0.0, 0.0], 1),
            Sample::new(vec![0.2, 0.1], 1),
            Sample::new(vec![3.0, 3.0], -1),
            Sample::new(vec![3.2, 2.9], -1),
        ])
        .unwrap();
        let hp = HyperParams { c: 10.0, ..Default::default() };
        let m = fit_brmm(&d, &hp, KernelSpec::Rbf { sigma: 1.0 }).unwrap();
        assert!(m.report.converged);
        for s in d.iter() {
            let sc = m.decision_score(&s.features).unwrap();
            assert_eq!(crate::types::sign_decision(sc), s.label);
        }
    }
}
