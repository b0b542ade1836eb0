//! One-class learning by separating the data from the origin.
//!
//! The batch fit places all (positive) samples in the score band
//! [2, R+1] with the origin mapped to score 0, so the decision is
//! sign(score - 2) with no trainable offset. The unary passive-aggressive
//! family instead maintains a center and shrinks the distance of outside
//! samples onto a radius.

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::solver::{bound_violation, FitReport};
use crate::sweep::run_sweeps;
use crate::types::{norm_sq, Dataset, HyperParams, LossOrder, Sample, sign_decision};

/// Weight growth beyond this multiple of the largest sample norm is treated
/// as hard-margin infeasibility.
const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct OneClassModel {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub support: Vec<Sample>,
    pub kernel: KernelSpec,
    pub r: f64,
    pub loss_order: LossOrder,
    pub hyperparams: HyperParams,
    pub report: FitReport,
}

impl OneClassModel {
    pub fn dim(&self) -> usize {
        self.support[0].features.len()
    }

    /// Raw score sum_j (alpha_j - beta_j) k(x_j, x).
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.score_unchecked(x))
    }

    pub(crate) fn score_unchecked(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (j, s) in self.support.iter().enumerate() {
            let d = self.alphas[j] - self.betas[j];
            if d != 0.0 {
                acc += d * self.kernel.eval_unchecked(&s.features, x);
            }
        }
        acc
    }

    /// Class decision with the fixed offset: sign(score - 2).
    pub fn decide(&self, x: &[f64]) -> Result<i32> {
        Ok(sign_decision(self.score(x)? - 2.0))
    }

    /// Explicit weight vector for linear kernels.
    pub fn linear_weights(&self) -> Option<Vec<f64>> {
        if self.kernel != KernelSpec::Linear {
            return None;
        }
        let dim = self.dim();
        let mut w = vec![0.0; dim];
        for (j, s) in self.support.iter().enumerate() {
            let d = self.alphas[j] - self.betas[j];
            for (wi, xi) in w.iter_mut().zip(&s.features) {
                *wi += d * xi;
            }
        }
        Some(w)
    }
}

struct OcState<'a> {
    xs: Vec<&'a [f64]>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// Maintained scores [K(alpha-beta)]_j.
    f: Vec<f64>,
    gram: Vec<f64>,
    kdiag: Vec<f64>,
    r_upper: f64,
    cap: f64,
    stab: f64,
    /// Maintained ||w||^2 = d' K d for the divergence check.
    norm2: f64,
    norm2_limit: f64,
    diverged: bool,
}

impl<'a> OcState<'a> {
    fn apply(&mut self, j: usize, delta: f64) {
        let n = self.xs.len();
        // ||w + delta phi(x_j)||^2 uses the score before the change.
        self.norm2 += 2.0 * delta * self.f[j] + delta * delta * self.kdiag[j];
        let row = &self.gram[j * n..(j + 1) * n];
        for (fl, k) in self.f.iter_mut().zip(row) {
            *fl += delta * k;
        }
        if self.norm2 > self.norm2_limit {
            self.diverged = true;
        }
    }

    fn update(&mut self, j: usize) -> f64 {
        if self.diverged || self.kdiag[j] == 0.0 {
            return 0.0;
        }
        let denom = self.kdiag[j] + self.stab;
        let grad_a = self.f[j] - 2.0 + self.stab * self.alpha[j];
        let a_new = (self.alpha[j] - grad_a / denom).clamp(0.0, self.cap);
        let da = a_new - self.alpha[j];
        if da != 0.0 {
            self.apply(j, da);
            self.alpha[j] = a_new;
        }
        let mut change = da.abs();

        if self.r_upper.is_finite() {
            let grad_b = self.r_upper - self.f[j] + self.stab * self.beta[j];
            let b_new = (self.beta[j] - grad_b / denom).clamp(0.0, self.cap);
            let db = b_new - self.beta[j];
            if db != 0.0 {
                self.apply(j, -db);
                self.beta[j] = b_new;
            }
            change = change.max(db.abs());
        }
        change
    }

    fn rebuild(&mut self) {
        let n = self.xs.len();
        for l in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                let d = self.alpha[j] - self.beta[j];
                if d != 0.0 {
                    acc += d * self.gram[j * n + l];
                }
            }
            self.f[l] = acc;
        }
        let mut norm2 = 0.0;
        for j in 0..n {
            norm2 += (self.alpha[j] - self.beta[j]) * self.f[j];
        }
        self.norm2 = norm2;
    }

    fn kkt_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.xs.len() {
            if self.kdiag[j] == 0.0 {
                continue;
            }
            let grad_a = self.f[j] - 2.0 + self.stab * self.alpha[j];
            worst = worst.max(bound_violation(self.alpha[j], self.cap, grad_a));
            if self.r_upper.is_finite() {
                let grad_b = self.r_upper - self.f[j] + self.stab * self.beta[j];
                worst = worst.max(bound_violation(self.beta[j], self.cap, grad_b));
            }
        }
        worst
    }
}

/// Fits the one-class machine on positives. The score band is [2, R+1]
/// with a shared per-sample slack, so `hp.c` caps both duals and
/// `hp.c_outer` is ignored; `hp.h` is likewise unused because the decision
/// offset is fixed.
pub fn fit_oneclass_brmm(
    data: &Dataset,
    hp: &HyperParams,
    kernel: KernelSpec,
) -> Result<OneClassModel> {
    hp.validate()?;
    kernel.validate()?;
    if data.iter().any(|s| s.label != 1) {
        return Err(Error::InvalidParam(
            "one-class training data must be all-positive (+1 labels)".into(),
        ));
    }
    let hard = hp.loss_order == LossOrder::Hard || hp.c.is_infinite();
    if hp.loss_order == LossOrder::Hard && hp.r == 1.0 {
        return Err(Error::Infeasible(
            "hard margin with a collapsed score band (R=1) pins every score to 2 and has no solution".into(),
        ));
    }

    let n = data.len();
    let xs: Vec<&[f64]> = data.iter().map(|s| s.features.as_slice()).collect();
    let mut gram = vec![0.0; n * n];
    for j in 0..n {
        for l in j..n {
            let v = kernel.eval_unchecked(xs[j], xs[l]);
            gram[j * n + l] = v;
            gram[l * n + j] = v;
        }
    }
    let kdiag: Vec<f64> = (0..n).map(|j| gram[j * n + j]).collect();
    if hard {
        if let Some(j) = kdiag.iter().position(|&k| k == 0.0) {
            return Err(Error::InvalidParam(format!(
                "sample {j} maps to the zero vector and cannot satisfy a hard origin-separation constraint"
            )));
        }
    }
    let max_norm2 = kdiag.iter().cloned().fold(0.0f64, f64::max);

    let (cap, stab) = match hp.loss_order {
        LossOrder::L1 => (hp.c, 0.0),
        LossOrder::L2 => (f64::INFINITY, if hp.c.is_finite() { 1.0 / hp.c } else { 0.0 }),
        LossOrder::Hard => (f64::INFINITY, 0.0),
    };

    let mut state = OcState {
        xs,
        alpha: vec![0.0; n],
        beta: vec![0.0; n],
        f: vec![0.0; n],
        gram,
        kdiag,
        r_upper: if hp.r.is_finite() { hp.r + 1.0 } else { f64::INFINITY },
        cap,
        stab,
        norm2: 0.0,
        norm2_limit: (DIVERGENCE_FACTOR * DIVERGENCE_FACTOR) * max_norm2,
        diverged: false,
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
            |s, j| s.alpha[j] > 0.0 || s.beta[j] > 0.0,
        );
        sweeps_total += out.sweeps;
        if state.diverged {
            return Err(Error::Infeasible(
                "weights grew without bound; data is not separable from the origin".into(),
            ));
        }
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

    Ok(OneClassModel {
        alphas: state.alpha,
        betas: state.beta,
        support: data.samples().to_vec(),
        kernel,
        r: hp.r,
        loss_order: hp.loss_order,
        hyperparams: hp.clone(),
        report: FitReport { converged, sweeps: sweeps_total, kkt_residual: kkt },
    })
}

/// Minimum-norm point of a convex hull by dense search: composition grid
/// over simplex coefficients, then pairwise mass-transfer descent with the
/// step halved until below 1e-9.
pub fn hull_min_norm_oracle(points: &[Vec<f64>]) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::EmptyInput("hull of no points".into()));
    }
    if points.len() > 8 {
        return Err(Error::InvalidParam("oracle supports at most 8 points".into()));
    }
    let dim = points[0].len();
    if dim > 3 {
        return Err(Error::InvalidParam("oracle supports dimension at most 3".into()));
    }
    for p in points {
        if p.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
        }
    }
    let n = points.len();
    let combine = |lambda: &[f64]| -> Vec<f64> {
        let mut x = vec![0.0; dim];
        for (l, p) in lambda.iter().zip(points) {
            for (xi, pi) in x.iter_mut().zip(p) {
                *xi += l * pi;
            }
        }
        x
    };

    // Dense composition grid with 16 subdivisions.
    const GRID: u32 = 16;
    let mut best_lambda = vec![0.0; n];
    best_lambda[0] = 1.0;
    let mut best = f64::INFINITY;
    let mut counts = vec![0u32; n];
    enumerate_compositions(GRID, n, 0, &mut counts, &mut |c| {
        let lambda: Vec<f64> = c.iter().map(|&k| k as f64 / GRID as f64).collect();
        let v = norm_sq(&combine(&lambda));
        if v < best {
            best = v;
            best_lambda = lambda;
        }
    });

    // Pairwise transfers with shrinking step.
    let mut step = 1.0 / GRID as f64;
    while step > 1e-9 {
        let mut improved = true;
        while improved {
            improved = false;
            for i in 0..n {
                if best_lambda[i] <= 0.0 {
                    continue;
                }
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let t = step.min(best_lambda[i]);
                    let mut cand = best_lambda.clone();
                    cand[i] -= t;
                    cand[j] += t;
                    let v = norm_sq(&combine(&cand));
                    if v < best {
                        best = v;
                        best_lambda = cand;
                        improved = true;
                    }
                }
            }
        }
        step *= 0.5;
    }
    Ok(combine(&best_lambda))
}

fn enumerate_compositions(
    total: u32,
    parts: usize,
    from: usize,
    counts: &mut Vec<u32>,
    visit: &mut impl FnMut(&[u32]),
) {
    if from == parts - 1 {
        counts[from] = total;
        visit(counts);
        return;
    }
    for k in 0..=total {
        counts[from] = k;
        enumerate_compositions(total - k, parts, from + 1, counts, visit);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaVariant {
    /// Full-loss step.
    Pa0,
    /// Step capped at C.
    Pa1,
    /// Step damped by 1 + 1/(2C).
    Pa2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusMode {
    Fixed(f64),
    /// Radius grows from 0 toward `r_max` by shrinking the extra center
    /// component (initialized at `r_max`).
    Auto { r_max: f64 },
}

/// Center state of the unary passive-aggressive family with the
/// distance-beyond-radius loss. In auto mode the center carries one extra
/// component and incoming samples are padded with a zero.
#[derive(Debug, Clone, PartialEq)]
pub struct UnaryPaState {
    pub center: Vec<f64>,
    pub radius: RadiusMode,
    pub c: f64,
    pub variant: PaVariant,
}

impl UnaryPaState {
    pub fn new_fixed(dim: usize, r: f64, c: f64, variant: PaVariant) -> Result<Self> {
        if !(r >= 0.0) {
            return Err(Error::InvalidParam(format!("radius must be >= 0, got {r}")));
        }
        if !(c > 0.0) {
            return Err(Error::InvalidParam(format!("c must be positive, got {c}")));
        }
        Ok(UnaryPaState { center: vec![0.0; dim], radius: RadiusMode::Fixed(r), c, variant })
    }

    pub fn new_auto(dim: usize, r_max: f64, c: f64, variant: PaVariant) -> Result<Self> {
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::InvalidParam(format!("r_max must be positive and finite, got {r_max}")));
        }
        if !(c > 0.0) {
            return Err(Error::InvalidParam(format!("c must be positive, got {c}")));
        }
        let mut center = vec![0.0; dim + 1];
        center[dim] = r_max;
        Ok(UnaryPaState { center, radius: RadiusMode::Auto { r_max }, c, variant })
    }

    /// Input dimension (without the auto-mode padding component).
    pub fn dim(&self) -> usize {
        match self.radius {
            RadiusMode::Fixed(_) => self.center.len(),
            RadiusMode::Auto { .. } => self.center.len() - 1,
        }
    }

    /// Radius currently enclosed in the input space.
    pub fn effective_radius(&self) -> f64 {
        match self.radius {
            RadiusMode::Fixed(r) => r,
            RadiusMode::Auto { r_max } => {
                let extra = self.center[self.center.len() - 1];
                (r_max * r_max - extra * extra).max(0.0).sqrt()
            }
        }
    }

    /// Distance-beyond-radius loss of a sample under the current center.
    pub fn loss(&self, x: &[f64]) -> Result<f64> {
        let (dist, radius) = self.distance_and_radius(x)?;
        Ok((dist - radius).max(0.0))
    }

    fn distance_and_radius(&self, x: &[f64]) -> Result<(f64, f64)> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let (dist2, radius) = match self.radius {
            RadiusMode::Fixed(r) => {
                let d2: f64 = self
                    .center
                    .iter()
                    .zip(x)
                    .map(|(c, v)| (c - v) * (c - v))
                    .sum();
                (d2, r)
            }
            RadiusMode::Auto { r_max } => {
                // Padded sample has a zero extra component.
                let m = x.len();
                let mut d2 = 0.0;
                for i in 0..m {
                    let d = self.center[i] - x[i];
                    d2 += d * d;
                }
                let extra = self.center[m];
                (d2 + extra * extra, r_max)
            }
        };
        Ok((dist2.sqrt(), radius))
    }
}

/// One passive-aggressive center move toward an outside sample. Returns the
/// updated state; inside samples (and x exactly at the center) leave the
/// state unchanged.
pub fn unary_pa_update(state: &UnaryPaState, x: &[f64]) -> Result<UnaryPaState> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParam("sample contains a non-finite value".into()));
    }
    let (dist, radius) = state.distance_and_radius(x)?;
    let loss = (dist - radius).max(0.0);
    if loss == 0.0 || dist == 0.0 {
        return Ok(state.clone());
    }
    let step = match state.variant {
        PaVariant::Pa0 => loss,
        PaVariant::Pa1 => loss.min(state.c),
        PaVariant::Pa2 => loss / (1.0 + 1.0 / (2.0 * state.c)),
    };
    let mut next = state.clone();
    let m = x.len();
    for i in 0..next.center.len() {
        let xi = if i < m { x[i] } else { 0.0 };
        next.center[i] += step * (xi - next.center[i]) / dist;
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvddModel {
    pub center: Vec<f64>,
    /// Squared radius; kept squared because the mapping produces it that way.
    pub radius_sq: f64,
    pub c: f64,
}

impl SvddModel {
    pub fn radius(&self) -> f64 {
        self.radius_sq.max(0.0).sqrt()
    }

    /// Decision sign(R^2 - ||c - x||^2): +1 inside the sphere.
    pub fn decide(&self, x: &[f64]) -> Result<i32> {
        if x.len() != self.center.len() {
            return Err(Error::DimensionMismatch { expected: self.center.len(), got: x.len() });
        }
        let d2: f64 = self.center.iter().zip(x).map(|(c, v)| (c - v) * (c - v)).sum();
        Ok(sign_decision(self.radius_sq - d2))
    }
}

/// Sphere description equivalent to a margin-form one-class model on
/// unit-norm data: (c, t', R'^2, C') = (w, 2t, ||w||^2 + 1 - 2 rho, 1/(nu n)).
pub fn svdd_from_nuoc(
    w: &[f64],
    rho: f64,
    slacks: &[f64],
    nu: f64,
    n: usize,
) -> Result<(SvddModel, Vec<f64>)> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::InvalidParam(format!("nu must lie in (0,1], got {nu}")));
    }
    if n == 0 {
        return Err(Error::EmptyInput("sample count must be positive".into()));
    }
    let radius_sq = norm_sq(w) + 1.0 - 2.0 * rho;
    if radius_sq < 0.0 {
        return Err(Error::InvalidParam(format!(
            "negative squared radius {radius_sq}; mapping assumes unit-norm data"
        )));
    }
    let model = SvddModel { center: w.to_vec(), radius_sq, c: 1.0 / (nu * n as f64) };
    let scaled: Vec<f64> = slacks.iter().map(|t| 2.0 * t).collect();
    Ok((model, scaled))
}

/// Inverse of `svdd_from_nuoc`: (w, rho, t, nu) from a sphere description.
pub fn nuoc_from_svdd(
    model: &SvddModel,
    scaled_slacks: &[f64],
    n: usize,
) -> Result<(Vec<f64>, f64, Vec<f64>, f64)> {
    if n == 0 {
        return Err(Error::EmptyInput("sample count must be positive".into()));
    }
    if !(model.c > 0.0) {
        return Err(Error::InvalidParam("sphere penalty must be positive".into()));
    }
    let w = model.center.clone();
    let rho = (norm_sq(&w) + 1.0 - model.radius_sq) / 2.0;
    let slacks: Vec<f64> = scaled_slacks.iter().map(|t| t / 2.0).collect();
    let nu = 1.0 / (model.c * n as f64);
    Ok((w, rho, slacks, nu))
}

/// Rescales a margin-rho one-class solution to the fixed-offset form with
/// margin 2: (w', t', C') = (2w/rho, 2t/rho, 2/(nu n rho)). Decisions
/// sign(<w',x> - 2) and sign(<w,x> - rho) agree.
pub fn scale_nuoc_to_csvm(
    w: &[f64],
    slacks: &[f64],
    nu: f64,
    rho: f64,
    n: usize,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    if !(rho > 0.0) {
        return Err(Error::InvalidParam(format!(
            "margin variable must be positive for the scaling to exist, got {rho}"
        )));
    }
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::InvalidParam(format!("nu must lie in (0,1], got {nu}")));
    }
    if n == 0 {
        return Err(Error::EmptyInput("sample count must be positive".into()));
    }
    let scale = 2.0 / rho;
    let w_bar: Vec<f64> = w.iter().map(|v| scale * v).collect();
    let t_bar: Vec<f64> = slacks.iter().map(|t| scale * t).collect();
    Ok((w_bar, t_bar, 2.0 / (nu * n as f64 * rho)))
}
