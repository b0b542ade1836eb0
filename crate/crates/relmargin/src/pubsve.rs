//! Positive upper boundary estimation: fits a function lying on or above
//! all targets, as close to them as slack permits. One-sided regression
//! with a regularized offset; same coordinate-descent machinery as the
//! classifier, with a single dual per sample.

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::solver::{bound_violation, FitReport};
use crate::sweep::run_sweeps;
use crate::types::LossOrder;

#[derive(Debug, Clone, PartialEq)]
pub struct PubsveConfig {
    pub c: f64,
    pub h: f64,
    pub loss_order: LossOrder,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for PubsveConfig {
    fn default() -> Self {
        PubsveConfig {
            c: f64::INFINITY,
            h: 1.0,
            loss_order: LossOrder::L1,
            max_iterations: 1000,
            tolerance: 1e-6,
            seed: 0,
        }
    }
}

impl PubsveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::InvalidParam(format!("c must be positive, got {}", self.c)));
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::InvalidParam(format!("h must be positive and finite, got {}", self.h)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParam("tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Fitted boundary model: f(x) = sum_i alpha_i k(x_i, x) + b with
/// b = (1/H) sum_i alpha_i.
#[derive(Debug, Clone, PartialEq)]
pub struct PubsveModel {
    pub alphas: Vec<f64>,
    pub support_points: Vec<Vec<f64>>,
    pub support_targets: Vec<f64>,
    pub kernel: KernelSpec,
    pub h: f64,
    pub b: f64,
    pub report: FitReport,
}

impl PubsveModel {
    pub fn dim(&self) -> usize {
        self.support_points[0].len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let mut acc = self.b;
        for (xi, &a) in self.support_points.iter().zip(&self.alphas) {
            if a != 0.0 {
                acc += a * self.kernel.eval_unchecked(xi, x);
            }
        }
        Ok(acc)
    }
}

struct PubsveState<'a> {
    xs: &'a [Vec<f64>],
    ys: &'a [f64],
    alpha: Vec<f64>,
    /// Maintained predictions f_j; includes the offset term.
    f: Vec<f64>,
    gram: Vec<f64>,
    qdiag: Vec<f64>,
    inv_h: f64,
    cap: f64,
    stab: f64,
}

impl<'a> PubsveState<'a> {
    fn update(&mut self, j: usize) -> f64 {
        let grad = self.f[j] - self.ys[j] + self.stab * self.alpha[j];
        let denom = self.qdiag[j] + self.stab;
        let a_new = (self.alpha[j] - grad / denom).clamp(0.0, self.cap);
        let da = a_new - self.alpha[j];
        if da != 0.0 {
            let n = self.xs.len();
            let row = &self.gram[j * n..(j + 1) * n];
            for (fl, klj) in self.f.iter_mut().zip(row) {
                *fl += da * (klj + self.inv_h);
            }
            self.alpha[j] = a_new;
        }
        da.abs()
    }

    fn rebuild(&mut self) {
        let n = self.xs.len();
        for l in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                if self.alpha[j] != 0.0 {
                    acc += self.alpha[j] * (self.gram[j * n + l] + self.inv_h);
                }
            }
            self.f[l] = acc;
        }
    }

    fn kkt_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.xs.len() {
            let grad = self.f[j] - self.ys[j] + self.stab * self.alpha[j];
            worst = worst.max(bound_violation(self.alpha[j], self.cap, grad));
        }
        worst
    }
}

fn fit_with_warm_start(
    xs: &[Vec<f64>],
    ys: &[f64],
    warm_alphas: &[f64],
    cfg: &PubsveConfig,
    kernel: KernelSpec,
) -> Result<PubsveModel> {
    cfg.validate()?;
    kernel.validate()?;
    if xs.is_empty() {
        return Err(Error::EmptyInput("no points to fit a boundary to".into()));
    }
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    let dim = xs[0].len();
    for x in xs {
        if x.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam("non-finite feature value".into()));
        }
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::InvalidParam("non-finite target value".into()));
    }

    let n = xs.len();
    let inv_h = 1.0 / cfg.h;
    let mut gram = vec![0.0; n * n];
    for j in 0..n {
        for l in j..n {
            let v = kernel.eval_unchecked(&xs[j], &xs[l]);
            gram[j * n + l] = v;
            gram[l * n + j] = v;
        }
    }
    let qdiag: Vec<f64> = (0..n).map(|j| gram[j * n + j] + inv_h).collect();
    let (cap, stab) = match cfg.loss_order {
        LossOrder::L1 => (cfg.c, 0.0),
        LossOrder::L2 => {
            (f64::INFINITY, if cfg.c.is_finite() { 1.0 / (2.0 * cfg.c) } else { 0.0 })
        }
        LossOrder::Hard => (f64::INFINITY, 0.0),
    };

    let mut state = PubsveState {
        xs,
        ys,
        alpha: warm_alphas.to_vec(),
        f: vec![0.0; n],
        gram,
        qdiag,
        inv_h,
        cap,
        stab,
    };
    state.rebuild();

    let mut sweeps_total = 0usize;
    let mut restarts = 0u64;
    let (converged, kkt) = loop {
        let budget = cfg.max_iterations.saturating_sub(sweeps_total);
        let seed = cfg.seed.wrapping_add(restarts.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let out = run_sweeps(
            &mut state,
            n,
            seed,
            cfg.tolerance,
            budget,
            |s, j| s.update(j),
            |s, j| s.alpha[j] > 0.0,
        );
        sweeps_total += out.sweeps;
        state.rebuild();
        let kkt = state.kkt_residual();
        if kkt <= cfg.tolerance {
            break (true, kkt);
        }
        if !out.change_converged || sweeps_total >= cfg.max_iterations {
            break (false, kkt);
        }
        restarts += 1;
    };

    if cfg.c.is_infinite()
        && state.alpha.iter().all(|&a| a == 0.0)
        && ys.iter().any(|&y| y < 0.0)
    {
        return Err(Error::DegenerateModel(
            "all duals are zero with negative targets present; normalize targets (subtract min) before fitting".into(),
        ));
    }

    let b = state.alpha.iter().sum::<f64>() * inv_h;
    Ok(PubsveModel {
        alphas: state.alpha,
        support_points: xs.to_vec(),
        support_targets: ys.to_vec(),
        kernel,
        h: cfg.h,
        b,
        report: FitReport { converged, sweeps: sweeps_total, kkt_residual: kkt },
    })
}

pub fn fit_pubsve(
    xs: &[Vec<f64>],
    ys: &[f64],
    cfg: &PubsveConfig,
    kernel: KernelSpec,
) -> Result<PubsveModel> {
    let warm = vec![0.0; xs.len()];
    fit_with_warm_start(xs, ys, &warm, cfg, kernel)
}

/// Refits on the previous support vectors (duals > 0) plus a new batch,
/// warm-starting retained duals. Everything outside the old support set is
/// forgotten.
pub fn fit_pubsve_incremental(
    model: &PubsveModel,
    new_xs: &[Vec<f64>],
    new_ys: &[f64],
    cfg: &PubsveConfig,
) -> Result<PubsveModel> {
    if new_xs.len() != new_ys.len() {
        return Err(Error::DimensionMismatch { expected: new_xs.len(), got: new_ys.len() });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut warm = Vec::new();
    for (i, &a) in model.alphas.iter().enumerate() {
        if a > 0.0 {
            xs.push(model.support_points[i].clone());
            ys.push(model.support_targets[i]);
            warm.push(a);
        }
    }
    xs.extend_from_slice(new_xs);
    ys.extend_from_slice(new_ys);
    warm.resize(xs.len(), 0.0);
    fit_with_warm_start(&xs, &ys, &warm, cfg, model.kernel)
}
