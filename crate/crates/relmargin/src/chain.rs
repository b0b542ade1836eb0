//! Processing chains ending in a scalar decision, and ways to pull that
//! decision back into the input space.
//!
//! A chain is an ordered list of nodes, each mapping a vector to a vector,
//! with a scalar-valued terminal node. Affine nodes carry their matrix and
//! translation explicitly, so the whole chain collapses to a single affine
//! form by multiplying homogeneous matrices right to left. Black-box chains
//! can be recovered the same way by probing with basis vectors, and
//! non-affine chains admit a local linearization through finite differences.
//! The remaining operations reuse those weights: mapping them through the
//! data covariance, re-deriving a classifier after a preprocessing swap, and
//! ranking sensors by accumulated absolute weight.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{dot, Dataset};

/// Default relative step for finite-difference weight estimation.
pub const DEFAULT_FD_STEP: f64 = 1.5e-8;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyInput("matrix must have at least one entry".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParam("matrix contains a non-finite entry".into()));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Matrix { rows: n, cols: n, data }
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut data = vec![0.0; n * n];
        for (i, v) in entries.iter().enumerate() {
            data[i * n + i] = *v;
        }
        Matrix { rows: n, cols: n, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, got: x.len() });
        }
        Ok((0..self.rows).map(|r| dot(self.row(r), x)).collect())
    }

    pub fn multiply(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, got: other.rows });
        }
        let mut data = vec![0.0; self.rows * other.cols];
        for r in 0..self.rows {
            for k in 0..self.cols {
                let v = self.get(r, k);
                if v == 0.0 {
                    continue;
                }
                let row = other.row(k);
                let out = &mut data[r * other.cols..(r + 1) * other.cols];
                for (o, b) in out.iter_mut().zip(row) {
                    *o += v * b;
                }
            }
        }
        Ok(Matrix { rows: self.rows, cols: other.cols, data })
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("matrix must have at least one row".into()));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Parse("matrix rows have unequal lengths".into()));
        }
        Matrix::new(rows.len(), cols, rows.concat())
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        (0..m.rows).map(|r| m.row(r).to_vec()).collect()
    }
}

/// What an affine node represents in the original processing pipeline.
///
/// The tag documents intent and drives nothing except validation of the
/// decision node; all kinds share the same `x -> Ax + T` behavior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AffineNodeKind {
    Standardization,
    TemporalFir,
    Decimation,
    SpatialFilter,
    FeatureScaling,
    LinearDecision,
    GenericAffine,
}

/// One affine stage `x -> Ax + T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineNode {
    pub a: Matrix,
    pub t: Vec<f64>,
    pub kind: AffineNodeKind,
}

impl AffineNode {
    pub fn new(kind: AffineNodeKind, a: Matrix, t: Vec<f64>) -> Result<Self> {
        let node = AffineNode { a, t, kind };
        node.validate()?;
        Ok(node)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t.len() != self.a.rows() {
            return Err(Error::DimensionMismatch { expected: self.a.rows(), got: self.t.len() });
        }
        if !self.t.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParam("translation contains a non-finite entry".into()));
        }
        if self.kind == AffineNodeKind::LinearDecision && self.a.rows() != 1 {
            return Err(Error::InvalidParam(format!(
                "decision node must produce one output, got {}",
                self.a.rows()
            )));
        }
        Ok(())
    }

    /// Per-feature multiplication by `factors`.
    pub fn scaling(factors: &[f64]) -> Self {
        AffineNode {
            a: Matrix::diagonal(factors),
            t: vec![0.0; factors.len()],
            kind: AffineNodeKind::FeatureScaling,
        }
    }

    /// `(x - mean) / std` per feature.
    pub fn standardization(means: &[f64], stds: &[f64]) -> Result<Self> {
        if means.len() != stds.len() {
            return Err(Error::DimensionMismatch { expected: means.len(), got: stds.len() });
        }
        if stds.iter().any(|s| *s <= 0.0 || !s.is_finite()) {
            return Err(Error::InvalidParam("standard deviations must be positive".into()));
        }
        let inv: Vec<f64> = stds.iter().map(|s| 1.0 / s).collect();
        let t: Vec<f64> = means.iter().zip(&inv).map(|(m, i)| -m * i).collect();
        Ok(AffineNode {
            a: Matrix::diagonal(&inv),
            t,
            kind: AffineNodeKind::Standardization,
        })
    }

    /// Pure shift `x -> x + offset`.
    pub fn translation(offset: Vec<f64>) -> Self {
        AffineNode {
            a: Matrix::identity(offset.len()),
            t: offset,
            kind: AffineNodeKind::GenericAffine,
        }
    }

    /// Linear combination of inputs into pseudo sensors (no translation).
    pub fn spatial_filter(a: Matrix) -> Self {
        let t = vec![0.0; a.rows()];
        AffineNode { a, t, kind: AffineNodeKind::SpatialFilter }
    }

    /// Causal same-length FIR filter on a single channel:
    /// `y_n = sum_l taps[l] * x_{n-l}` with `x_{<0} = 0`.
    pub fn temporal_fir(taps: &[f64], len: usize) -> Result<Self> {
        if taps.is_empty() || len == 0 {
            return Err(Error::EmptyInput("FIR filter needs taps and a signal length".into()));
        }
        let mut data = vec![0.0; len * len];
        for n in 0..len {
            for (l, a) in taps.iter().enumerate() {
                if l <= n {
                    data[n * len + (n - l)] = *a;
                }
            }
        }
        Ok(AffineNode {
            a: Matrix::new(len, len, data)?,
            t: vec![0.0; len],
            kind: AffineNodeKind::TemporalFir,
        })
    }

    /// Keeps every `factor`-th sample, starting at index 0. When `taps` are
    /// given, the FIR filter runs first and both collapse into one node.
    pub fn decimation(len: usize, factor: usize, taps: Option<&[f64]>) -> Result<Self> {
        if len == 0 || factor == 0 {
            return Err(Error::InvalidParam("decimation needs a length and a factor".into()));
        }
        let kept: Vec<usize> = (0..len).step_by(factor).collect();
        let mut data = vec![0.0; kept.len() * len];
        for (r, k) in kept.iter().enumerate() {
            data[r * len + k] = 1.0;
        }
        let select = Matrix::new(kept.len(), len, data)?;
        let a = match taps {
            Some(taps) => select.multiply(&Self::temporal_fir(taps, len)?.a)?,
            None => select,
        };
        let t = vec![0.0; a.rows()];
        Ok(AffineNode { a, t, kind: AffineNodeKind::Decimation })
    }

    /// Scalar decision `x -> <w, x> + b`.
    pub fn decision(w: &[f64], b: f64) -> Result<Self> {
        AffineNode::new(
            AffineNodeKind::LinearDecision,
            Matrix::new(1, w.len(), w.to_vec())?,
            vec![b],
        )
    }

    pub fn input_dim(&self) -> usize {
        self.a.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.a.apply(x)?;
        for (o, t) in out.iter_mut().zip(&self.t) {
            *o += t;
        }
        Ok(out)
    }

    /// `(rows+1) x (cols+1)` block matrix `[[A, T], [0, 1]]`, so that chain
    /// composition becomes a plain matrix product.
    pub fn homogeneous(&self) -> Matrix {
        let (rows, cols) = (self.a.rows(), self.a.cols());
        let mut data = vec![0.0; (rows + 1) * (cols + 1)];
        for r in 0..rows {
            data[r * (cols + 1)..r * (cols + 1) + cols].copy_from_slice(self.a.row(r));
            data[r * (cols + 1) + cols] = self.t[r];
        }
        data[rows * (cols + 1) + cols] = 1.0;
        Matrix { rows: rows + 1, cols: cols + 1, data }
    }
}

/// Black-box stage: any deterministic vector-to-vector map.
#[derive(Clone)]
pub struct DifferentiableNode {
    map: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    in_dim: usize,
    out_dim: usize,
    /// Caller-declared smoothness; finite differencing trusts it.
    pub smooth: bool,
}

impl DifferentiableNode {
    pub fn from_fn<F>(in_dim: usize, out_dim: usize, smooth: bool, map: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        DifferentiableNode { map: Arc::new(map), in_dim, out_dim, smooth }
    }

    pub fn input_dim(&self) -> usize {
        self.in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.out_dim
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim {
            return Err(Error::DimensionMismatch { expected: self.in_dim, got: x.len() });
        }
        let out = (self.map)(x);
        if out.len() != self.out_dim {
            return Err(Error::DimensionMismatch { expected: self.out_dim, got: out.len() });
        }
        Ok(out)
    }
}

impl fmt::Debug for DifferentiableNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DifferentiableNode")
            .field("in_dim", &self.in_dim)
            .field("out_dim", &self.out_dim)
            .field("smooth", &self.smooth)
            .finish()
    }
}

/// One stage of a processing chain.
#[derive(Debug, Clone)]
pub enum ChainNode {
    Affine(AffineNode),
    Differentiable(DifferentiableNode),
}

impl ChainNode {
    pub fn input_dim(&self) -> usize {
        match self {
            ChainNode::Affine(n) => n.input_dim(),
            ChainNode::Differentiable(n) => n.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            ChainNode::Affine(n) => n.output_dim(),
            ChainNode::Differentiable(n) => n.output_dim(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            ChainNode::Affine(n) => n.apply(x),
            ChainNode::Differentiable(n) => n.apply(x),
        }
    }
}

/// Ordered nodes with composable dimensions and a scalar terminal output.
///
/// Chains are immutable after construction and all operations are pure, so
/// a chain can be shared or cloned across workers freely. The optional
/// `(times, sensors)` input shape is metadata only: operations run on the
/// flattened vector and the shape is used to reshape weight maps at output.
#[derive(Debug, Clone)]
pub struct ProcessingChain {
    nodes: Vec<ChainNode>,
    input_shape: Option<(usize, usize)>,
}

impl ProcessingChain {
    pub fn new(nodes: Vec<ChainNode>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::EmptyInput("chain needs at least a decision node".into()));
        }
        for pair in nodes.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].output_dim(),
                    got: pair[1].input_dim(),
                });
            }
        }
        let last = nodes.last().expect("checked non-empty");
        if last.output_dim() != 1 {
            return Err(Error::InvalidParam(format!(
                "terminal node must produce a scalar, got dimension {}",
                last.output_dim()
            )));
        }
        Ok(ProcessingChain { nodes, input_shape: None })
    }

    /// Declares that flattened inputs are a `times x sensors` grid stored
    /// row-major (all sensors of time 0, then time 1, ...).
    pub fn with_input_shape(mut self, times: usize, sensors: usize) -> Result<Self> {
        if times * sensors != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: times * sensors,
            });
        }
        self.input_shape = Some((times, sensors));
        Ok(self)
    }

    pub fn nodes(&self) -> &[ChainNode] {
        &self.nodes
    }

    pub fn input_dim(&self) -> usize {
        self.nodes[0].input_dim()
    }

    pub fn input_shape(&self) -> Option<(usize, usize)> {
        self.input_shape
    }

    pub fn is_affine(&self) -> bool {
        self.nodes.iter().all(|n| matches!(n, ChainNode::Affine(_)))
    }

    /// Full pass through the chain down to the scalar decision value.
    pub fn apply(&self, x: &[f64]) -> Result<f64> {
        let out = self.apply_until(x, self.nodes.len())?;
        Ok(out[0])
    }

    /// Applies the first `stage` nodes and returns the intermediate vector;
    /// `stage = 0` echoes the input, `stage = len` yields the scalar output.
    pub fn apply_until(&self, x: &[f64], stage: usize) -> Result<Vec<f64>> {
        if stage > self.nodes.len() {
            return Err(Error::InvalidParam(format!(
                "chain has {} stages, requested {stage}",
                self.nodes.len()
            )));
        }
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        let mut cur = x.to_vec();
        for node in &self.nodes[..stage] {
            cur = node.apply(&cur)?;
        }
        Ok(cur)
    }

    /// Homogeneous matrix of the whole chain (product of all node matrices,
    /// rightmost node first); errors if any node is not affine.
    pub fn homogeneous_product(&self) -> Result<Matrix> {
        let mut product: Option<Matrix> = None;
        for node in &self.nodes {
            let h = match node {
                ChainNode::Affine(n) => n.homogeneous(),
                ChainNode::Differentiable(_) => {
                    return Err(Error::NonAffineChain(
                        "chain contains a non-affine node".into(),
                    ));
                }
            };
            product = Some(match product {
                None => h,
                Some(p) => h.multiply(&p)?,
            });
        }
        Ok(product.expect("chain is never empty"))
    }
}

/// Input-space representation of a chain's decision function.
#[derive(Debug, Clone, PartialEq)]
pub struct BacktransResult {
    /// Weight per original input component.
    pub weights: Vec<f64>,
    /// Constant part of the decision; present for globally affine results.
    pub offset: Option<f64>,
    /// Weights seen by each intermediate representation: entry `l` applies
    /// to the input of node `l`. Entry 0 duplicates `weights`.
    pub stage_weights: Option<Vec<Vec<f64>>>,
    /// Expansion point of a local (finite-difference) result; `None` means
    /// the weights hold globally.
    pub anchor: Option<Vec<f64>>,
    /// `(times, sensors)` grid copied from the chain, when declared.
    pub shape: Option<(usize, usize)>,
}

impl BacktransResult {
    /// Weight map as a time-by-sensor grid (rows = time indices).
    pub fn reshaped(&self) -> Option<Vec<Vec<f64>>> {
        let (times, sensors) = self.shape?;
        Some(
            (0..times)
                .map(|t| self.weights[t * sensors..(t + 1) * sensors].to_vec())
                .collect(),
        )
    }
}

/// Collapses an all-affine chain into `b + <w, x>` exactly, keeping the
/// intermediate weight vectors of every stage.
pub fn backtransform_affine_analytic(chain: &ProcessingChain) -> Result<BacktransResult> {
    let nodes = chain.nodes();
    let mut affine = Vec::with_capacity(nodes.len());
    for node in nodes {
        match node {
            ChainNode::Affine(n) => affine.push(n),
            ChainNode::Differentiable(_) => {
                return Err(Error::NonAffineChain("chain contains a non-affine node".into()));
            }
        }
    }
    // Right-to-left homogeneous products; the partial product after folding
    // node l has first row [w^(l), b^(l)].
    let mut product = affine.last().expect("chain is never empty").homogeneous();
    let mut stage_weights = vec![strip_offset(&product).0];
    for node in affine.iter().rev().skip(1) {
        product = product.multiply(&node.homogeneous())?;
        stage_weights.push(strip_offset(&product).0);
    }
    stage_weights.reverse();
    let (weights, offset) = strip_offset(&product);
    Ok(BacktransResult {
        weights,
        offset: Some(offset),
        stage_weights: Some(stage_weights),
        anchor: None,
        shape: chain.input_shape(),
    })
}

fn strip_offset(product: &Matrix) -> (Vec<f64>, f64) {
    let row = product.row(0);
    (row[..row.len() - 1].to_vec(), row[row.len() - 1])
}

/// Recovers the affine form of a black-box scalar map by probing: the zero
/// vector yields the offset, each basis vector yields one weight.
///
/// Affinity cannot be verified from these probes alone; a single two-point
/// check along the first basis direction (`F(2 e_1) - F(0) = 2 w_1`) guards
/// against the most common misuse and fails with a non-affine chain error.
pub fn backtransform_affine_probe<F>(eval: F, input_dim: usize) -> Result<BacktransResult>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if input_dim == 0 {
        return Err(Error::EmptyInput("probing needs a positive input dimension".into()));
    }
    let mut point = vec![0.0; input_dim];
    let offset = eval(&point)?;
    let mut weights = Vec::with_capacity(input_dim);
    for i in 0..input_dim {
        point[i] = 1.0;
        weights.push(eval(&point)? - offset);
        point[i] = 0.0;
    }
    point[0] = 2.0;
    let stretched = eval(&point)? - offset;
    let expected = 2.0 * weights[0];
    if (stretched - expected).abs() > 1e-6 * (1.0 + expected.abs()) {
        return Err(Error::NonAffineChain(format!(
            "doubling the first basis vector gave {stretched}, expected {expected}"
        )));
    }
    Ok(BacktransResult {
        weights,
        offset: Some(offset),
        stage_weights: None,
        anchor: None,
        shape: None,
    })
}

/// Probe-based recovery of a [`ProcessingChain`], carrying over its shape.
pub fn backtransform_probe_chain(chain: &ProcessingChain) -> Result<BacktransResult> {
    let mut result = backtransform_affine_probe(|x| chain.apply(x), chain.input_dim())?;
    result.shape = chain.input_shape();
    Ok(result)
}

/// Finite-difference stencil for [`backtransform_numeric`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdOrder {
    /// Forward difference `(F(x + h e) - F(x)) / h`.
    TwoPoint,
    /// `(F(x - h e) - 8 F(x - h/2 e) + 8 F(x + h/2 e) - F(x + h e)) / (6 h)`.
    FourPoint,
}

/// Local linearization of the chain around `x0` with the default step rule.
pub fn backtransform_numeric(
    chain: &ProcessingChain,
    x0: &[f64],
    order: FdOrder,
) -> Result<BacktransResult> {
    backtransform_numeric_with_step(chain, x0, order, DEFAULT_FD_STEP)
}

/// Local linearization with an explicit relative step: component `i` uses
/// `h = step_scale * x0[i]` when that coordinate is nonzero, else
/// `h = step_scale`.
pub fn backtransform_numeric_with_step(
    chain: &ProcessingChain,
    x0: &[f64],
    order: FdOrder,
    step_scale: f64,
) -> Result<BacktransResult> {
    if !(step_scale > 0.0 && step_scale.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "finite-difference step must be positive, got {step_scale}"
        )));
    }
    let eval = |x: &[f64]| -> Result<f64> {
        let v = chain.apply(x)?;
        if !v.is_finite() {
            return Err(Error::InvalidParam(
                "chain output is not finite near the expansion point".into(),
            ));
        }
        Ok(v)
    };
    let center = eval(x0)?;
    let mut point = x0.to_vec();
    let mut weights = Vec::with_capacity(x0.len());
    for i in 0..x0.len() {
        let h = if x0[i] != 0.0 { step_scale * x0[i] } else { step_scale };
        let grad = match order {
            FdOrder::TwoPoint => {
                point[i] = x0[i] + h;
                let plus = eval(&point)?;
                (plus - center) / h
            }
            FdOrder::FourPoint => {
                point[i] = x0[i] - h;
                let m2 = eval(&point)?;
                point[i] = x0[i] - 0.5 * h;
                let m1 = eval(&point)?;
                point[i] = x0[i] + 0.5 * h;
                let p1 = eval(&point)?;
                point[i] = x0[i] + h;
                let p2 = eval(&point)?;
                (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (6.0 * h)
            }
        };
        point[i] = x0[i];
        weights.push(grad);
    }
    Ok(BacktransResult {
        weights,
        offset: None,
        stage_weights: None,
        anchor: Some(x0.to_vec()),
        shape: chain.input_shape(),
    })
}

/// Maps extraction weights to an activation pattern by multiplying with the
/// sample covariance of the data (normalized by `n - 1`).
///
/// The covariance centers the data internally, as usual; the interpretation
/// as a forward model still assumes the underlying signals are zero-mean, so
/// callers working with offset data should center it first.
pub fn covariance_forward_model(weights: &[f64], data: &Dataset) -> Result<Vec<f64>> {
    if data.len() < 2 {
        return Err(Error::EmptyInput(
            "covariance needs at least two samples".into(),
        ));
    }
    let dim = data.dim();
    if weights.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: weights.len() });
    }
    let n = data.len() as f64;
    let mut mean = vec![0.0; dim];
    for sample in data.iter() {
        for (m, x) in mean.iter_mut().zip(&sample.features) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    // pattern = Cov * w accumulated as sum of centered samples scaled by
    // their projection onto w; avoids materializing the covariance matrix.
    let mut pattern = vec![0.0; dim];
    for sample in data.iter() {
        let mut proj = 0.0;
        for ((x, m), w) in sample.features.iter().zip(&mean).zip(weights) {
            proj += (x - m) * w;
        }
        for ((p, x), m) in pattern.iter_mut().zip(&sample.features).zip(&mean) {
            *p += proj * (x - m);
        }
    }
    for p in &mut pattern {
        *p /= n - 1.0;
    }
    Ok(pattern)
}

/// How [`reinit_classifier`] combines the mapped weights with the offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReinitMode {
    /// `A w0 + T * b_sum`, mirroring how an affine map acts on the weighted
    /// sample sum that defines the classifier.
    Consistent,
    /// `F(w0) - F(0) * b_sum`, an older convention kept for comparison; it
    /// agrees with [`ReinitMode::Consistent`] only when the translation is
    /// zero or `b_sum = 1/2`.
    Uncorrected,
}

/// Re-derives a linear classifier's weights under a new affine
/// preprocessing, given the tracked sums `w0 = sum_i d_i y_i x_i` and
/// `b_sum = sum_i d_i y_i` of the trained model.
///
/// The preprocessing must be vector-valued: passing a whole decision chain
/// (scalar output) is rejected.
pub fn reinit_classifier(
    preprocessing: &[AffineNode],
    w0: &[f64],
    b_sum: f64,
    mode: ReinitMode,
) -> Result<Vec<f64>> {
    if preprocessing.is_empty() {
        return Err(Error::EmptyInput("preprocessing has no stages".into()));
    }
    for pair in preprocessing.windows(2) {
        if pair[0].output_dim() != pair[1].input_dim() {
            return Err(Error::DimensionMismatch {
                expected: pair[0].output_dim(),
                got: pair[1].input_dim(),
            });
        }
    }
    let last = preprocessing.last().expect("checked non-empty");
    if last.output_dim() == 1 {
        return Err(Error::InvalidParam(
            "preprocessing output is scalar; pass the preprocessing stages, \
             not the whole decision chain"
                .into(),
        ));
    }
    if w0.len() != preprocessing[0].input_dim() {
        return Err(Error::DimensionMismatch {
            expected: preprocessing[0].input_dim(),
            got: w0.len(),
        });
    }
    match mode {
        ReinitMode::Consistent => {
            // Compose (A, T) explicitly so the result is exactly
            // A w0 + T * b_sum, free of probe cancellation.
            let mut product = preprocessing[0].homogeneous();
            for node in &preprocessing[1..] {
                product = node.homogeneous().multiply(&product)?;
            }
            let out_dim = product.rows() - 1;
            let mut result = Vec::with_capacity(out_dim);
            for r in 0..out_dim {
                let row = product.row(r);
                result.push(dot(&row[..w0.len()], w0) + row[w0.len()] * b_sum);
            }
            Ok(result)
        }
        ReinitMode::Uncorrected => {
            let mapped = apply_stages(preprocessing, w0)?;
            let at_zero = apply_stages(preprocessing, &vec![0.0; w0.len()])?;
            Ok(mapped
                .iter()
                .zip(&at_zero)
                .map(|(m, z)| m - z * b_sum)
                .collect())
        }
    }
}

fn apply_stages(stages: &[AffineNode], x: &[f64]) -> Result<Vec<f64>> {
    let mut cur = x.to_vec();
    for node in stages {
        cur = node.apply(&cur)?;
    }
    Ok(cur)
}

/// Per-sensor accumulated absolute weight, in the matrix's column order.
pub fn sensor_scores(weights: &Matrix) -> Vec<f64> {
    (0..weights.cols())
        .map(|c| (0..weights.rows()).map(|r| weights.get(r, c).abs()).sum())
        .collect()
}

/// One sensor with its accumulated absolute weight.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorRank {
    pub sensor: usize,
    pub score: f64,
}

/// Ranks sensors ascending by summed absolute weight, so the first entry is
/// the elimination candidate. Ties keep the lower sensor index first.
///
/// Rows are time indices, columns sensors; the matrix may hold raw
/// classifier weights or any backtransformation stage — the score is the
/// same either way.
pub fn sensor_ranking(weights: &Matrix) -> Vec<SensorRank> {
    let mut ranked: Vec<SensorRank> = sensor_scores(weights)
        .into_iter()
        .enumerate()
        .map(|(sensor, score)| SensorRank { sensor, score })
        .collect();
    ranked.sort_by(|a, b| a.score.partial_cmp(&b.score).expect("scores are finite"));
    ranked
}

/// One round of backward elimination.
#[derive(Debug, Clone, PartialEq)]
pub struct EliminationStep {
    /// Original index of the sensor removed in this round.
    pub eliminated: usize,
    /// Original indices still in play after the removal.
    pub retained: Vec<usize>,
    /// Scores of the candidates before the removal, aligned with the
    /// retained set of the previous round.
    pub scores: Vec<f64>,
}

/// Repeatedly drops the lowest-scored sensor until `target_count` remain.
///
/// `rank_weights` receives the retained original sensor indices and must
/// return the weight matrix (columns in that order) of a model refit on
/// exactly those sensors; fitting errors abort the elimination.
pub fn recursive_backward_elimination<F>(
    sensor_count: usize,
    target_count: usize,
    mut rank_weights: F,
) -> Result<Vec<EliminationStep>>
where
    F: FnMut(&[usize]) -> Result<Matrix>,
{
    if target_count == 0 {
        return Err(Error::InvalidParam("at least one sensor must remain".into()));
    }
    if target_count > sensor_count {
        return Err(Error::InvalidParam(format!(
            "cannot retain {target_count} of {sensor_count} sensors"
        )));
    }
    let mut retained: Vec<usize> = (0..sensor_count).collect();
    let mut steps = Vec::new();
    while retained.len() > target_count {
        let weights = rank_weights(&retained)?;
        if weights.cols() != retained.len() {
            return Err(Error::DimensionMismatch {
                expected: retained.len(),
                got: weights.cols(),
            });
        }
        let scores = sensor_scores(&weights);
        let local = scores
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).expect("scores are finite"))
            .expect("retained set is non-empty")
            .0;
        let eliminated = retained.remove(local);
        steps.push(EliminationStep { eliminated, retained: retained.clone(), scores });
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;
    use crate::solver::fit_brmm;
    use crate::types::{HyperParams, Sample};
    use crate::KernelSpec;

    fn decision_chain(w: &[f64], b: f64) -> ProcessingChain {
        ProcessingChain::new(vec![ChainNode::Affine(AffineNode::decision(w, b).unwrap())])
            .unwrap()
    }

    fn random_affine_chain(rng: &mut Stream, nodes: usize, dim: usize) -> ProcessingChain {
        let mut list = Vec::new();
        let mut cur = dim;
        for _ in 0..nodes {
            let next = 2 + (rng.next_u64() % 6) as usize;
            let data: Vec<f64> = (0..next * cur).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let t: Vec<f64> = (0..next).map(|_| rng.uniform(-1.0, 1.0)).collect();
            list.push(ChainNode::Affine(
                AffineNode::new(
                    AffineNodeKind::GenericAffine,
                    Matrix::new(next, cur, data).unwrap(),
                    t,
                )
                .unwrap(),
            ));
            cur = next;
        }
        let w: Vec<f64> = (0..cur).map(|_| rng.uniform(-2.0, 2.0)).collect();
        list.push(ChainNode::Affine(
            AffineNode::decision(&w, rng.uniform(-1.0, 1.0)).unwrap(),
        ));
        ProcessingChain::new(list).unwrap()
    }

    fn random_unit_scale_chain(rng: &mut Stream, nodes: usize, dim: usize) -> ProcessingChain {
        let mut list = Vec::new();
        let mut cur = dim;
        for _ in 0..nodes {
            let next = 3 + (rng.next_u64() % 3) as usize;
            let data: Vec<f64> = (0..next * cur).map(|_| rng.uniform(-0.7, 0.7)).collect();
            let t: Vec<f64> = (0..next).map(|_| rng.uniform(-0.5, 0.5)).collect();
            list.push(ChainNode::Affine(
                AffineNode::new(
                    AffineNodeKind::GenericAffine,
                    Matrix::new(next, cur, data).unwrap(),
                    t,
                )
                .unwrap(),
            ));
            cur = next;
        }
        let w: Vec<f64> = (0..cur).map(|_| rng.uniform(-1.0, 1.0)).collect();
        list.push(ChainNode::Affine(
            AffineNode::decision(&w, rng.uniform(-0.5, 0.5)).unwrap(),
        ));
        ProcessingChain::new(list).unwrap()
    }

    #[test]
    fn decision_node_alone_is_a_dot_product() {
        let chain = decision_chain(&[1.0, 2.0], 0.0);
        assert_eq!(chain.apply(&[3.0, 4.0]).unwrap(), 11.0);
    }

    #[test]
    fn scaling_before_decision_multiplies_through() {
        let chain = ProcessingChain::new(vec![
            ChainNode::Affine(AffineNode::scaling(&[2.0, 3.0])),
            ChainNode::Affine(AffineNode::decision(&[1.0, 1.0], 1.0).unwrap()),
        ])
        .unwrap();
        assert_eq!(chain.apply(&[1.0, 1.0]).unwrap(), 6.0);
    }

    #[test]
    fn apply_until_exposes_every_stage() {
        let chain = ProcessingChain::new(vec![
            ChainNode::Affine(AffineNode::scaling(&[2.0, 3.0])),
            ChainNode::Affine(AffineNode::decision(&[1.0, 1.0], 0.0).unwrap()),
        ])
        .unwrap();
        assert_eq!(chain.apply_until(&[1.0, 1.0], 0).unwrap(), vec![1.0, 1.0]);
        assert_eq!(chain.apply_until(&[1.0, 1.0], 1).unwrap(), vec![2.0, 3.0]);
        assert_eq!(chain.apply_until(&[1.0, 1.0], 2).unwrap(), vec![5.0]);
        assert!(chain.apply_until(&[1.0, 1.0], 3).is_err());
    }

    #[test]
    fn construction_checks_dimensions_and_terminal() {
        // 2 -> 2 scaling cannot feed a 3-input decision.
        let err = ProcessingChain::new(vec![
            ChainNode::Affine(AffineNode::scaling(&[1.0, 1.0])),
            ChainNode::Affine(AffineNode::decision(&[1.0, 1.0, 1.0], 0.0).unwrap()),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));

        // Vector-valued terminal is rejected.
        assert!(ProcessingChain::new(vec![ChainNode::Affine(AffineNode::scaling(&[1.0, 1.0]))])
            .is_err());
        assert!(ProcessingChain::new(vec![]).is_err());
    }

    #[test]
    fn analytic_backtransform_of_scaling_chain() {
        let chain = ProcessingChain::new(vec![
            ChainNode::Affine(AffineNode::scaling(&[2.0, 3.0])),
            ChainNode::Affine(AffineNode::decision(&[1.0, 1.0], 0.0).unwrap()),
        ])
        .unwrap();
        let result = backtransform_affine_analytic(&chain).unwrap();
        assert_eq!(result.weights, vec![2.0, 3.0]);
        assert_eq!(result.offset, Some(0.0));
        let stages = result.stage_weights.unwrap();
        assert_eq!(stages, vec![vec![2.0, 3.0], vec![1.0, 1.0]]);
    }

    #[test]
    fn analytic_backtransform_through_identity_is_the_classifier() {
        let chain = ProcessingChain::new(vec![
            ChainNode::Affine(AffineNode::translation(vec![0.0, 0.0])),
            ChainNode::Affine(AffineNode::decision(&[0.5, -1.5], 0.25).unwrap()),
        ])
        .unwrap();
        let result = backtransform_affine_analytic(&chain).unwrap();
        assert_eq!(result.weights, vec![0.5, -1.5]);
        assert_eq!(result.offset, Some(0.25));
    }

    #[test]
    fn translation_folds_into_the_offset() {
        let chain = ProcessingChain::new(vec![
            ChainNode::Affine(AffineNode::translation(vec![1.0, 1.0])),
            ChainNode::Affine(AffineNode::decision(&[1.0, 2.0], 0.0).unwrap()),
        ])
        .unwrap();
        let result = backtransform_affine_analytic(&chain).unwrap();
        assert_eq!(result.weights, vec![1.0, 2.0]);
        assert_eq!(result.offset, Some(3.0));
    }

    #[test]
    fn analytic_backtransform_rejects_black_box_nodes() {
        let chain = ProcessingChain::new(vec![ChainNode::Differentiable(
            DifferentiableNode::from_fn(2, 1, true, |x| vec![x[0] + x[1]]),
        )])
        .unwrap();
        assert!(matches!(
            backtransform_affine_analytic(&chain).unwrap_err(),
            Error::NonAffineChain(_)
        ));
    }

    #[test]
    fn probe_matches_analytic_on_hand_examples() {
        for chain in [
            ProcessingChain::new(vec![
                ChainNode::Affine(AffineNode::scaling(&[2.0, 3.0])),
                ChainNode::Affine(AffineNode::decision(&[1.0, 1.0], 0.0).unwrap()),
            ])
            .unwrap(),
            decision_chain(&[0.5, -1.5], 0.25),
            ProcessingChain::new(vec![
                ChainNode::Affine(AffineNode::translation(vec![1.0, 1.0])),
                ChainNode::Affine(AffineNode::decision(&[1.0, 2.0], 0.0).unwrap()),
            ])
            .unwrap(),
        ] {
            let analytic = backtransform_affine_analytic(&chain).unwrap();
            let probed = backtransform_probe_chain(&chain).unwrap();
            assert_eq!(probed.weights, analytic.weights);
            assert_eq!(probed.offset, analytic.offset);
        }
    }

    #[test]
    fn probing_a_constant_chain_yields_pure_offset() {
        let chain = decision_chain(&[0.0, 0.0], 5.0);
        let result = backtransform_probe_chain(&chain).unwrap();
        assert_eq!(result.weights, vec![0.0, 0.0]);
        assert_eq!(result.offset, Some(5.0));
    }

    #[test]
    fn probe_agrees_with_analytic_on_random_chains() {
        let mut rng = Stream::new(21);
        for _ in 0..20 {
            let dim = 3 + (rng.next_u64() % 5) as usize;
            let chain = random_affine_chain(&mut rng, 3, dim);
            let analytic = backtransform_affine_analytic(&chain).unwrap();
            let probed = backtransform_probe_chain(&chain).unwrap();
            for (p, a) in probed.weights.iter().zip(&analytic.weights) {
                assert!((p - a).abs() <= 1e-9, "probe {p} vs analytic {a}");
            }
            assert!((probed.offset.unwrap() - analytic.offset.unwrap()).abs() <= 1e-9);
        }
    }

    #[test]
    fn affine_identity_holds_at_random_points() {
        let mut rng = Stream::new(22);
        let chain = random_affine_chain(&mut rng, 4, 6);
        let analytic = backtransform_affine_analytic(&chain).unwrap();
        let probed = backtransform_probe_chain(&chain).unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = (0..6).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let direct = chain.apply(&x).unwrap();
            for result in [&analytic, &probed] {
                let linear = result.offset.unwrap() + dot(&result.weights, &x);
                assert!(
                    (direct - linear).abs() <= 1e-9 * (1.0 + direct.abs()),
                    "direct {direct} vs linear {linear}"
                );
            }
        }
    }

    #[test]
    fn probe_spot_check_flags_quadratic_chain() {
        let chain = ProcessingChain::new(vec![ChainNode::Differentiable(
            DifferentiableNode::from_fn(1, 1, true, |x| vec![x[0] * x[0]]),
        )])
        .unwrap();
        assert!(matches!(
            backtransform_probe_chain(&chain).unwrap_err(),
            Error::NonAffineChain(_)
        ));
    }

    #[test]
    fn swapping_nodes_changes_weights_exactly_when_product_changes() {
        let diag_a = AffineNode::scaling(&[2.0, 5.0]);
        let diag_b = AffineNode::scaling(&[3.0, 0.5]);
        let mixer = AffineNode::spatial_filter(
            Matrix::new(2, 2, vec![1.0, 1.0, 0.0, 1.0]).unwrap(),
        );
        let decision = AffineNode::decision(&[1.0, 2.0], 0.5).unwrap();

        let build = |first: &AffineNode, second: &AffineNode| {
            ProcessingChain::new(vec![
                ChainNode::Affine(first.clone()),
                ChainNode::Affine(second.clone()),
                ChainNode::Affine(decision.clone()),
            ])
            .unwrap()
        };
        let pairs = [(diag_a.clone(), diag_b.clone()), (diag_a, mixer)];
        for (p, q) in pairs {
            let pq = build(&p, &q);
            let qp = build(&q, &p);
            let product_pq = pq.homogeneous_product().unwrap();
            let product_qp = qp.homogeneous_product().unwrap();
            let w_pq = backtransform_affine_analytic(&pq).unwrap();
            let w_qp = backtransform_affine_analytic(&qp).unwrap();
            let products_equal = product_pq == product_qp;
            let weights_equal =
                w_pq.weights == w_qp.weights && w_pq.offset == w_qp.offset;
            assert_eq!(products_equal, weights_equal);
        }
    }

    #[test]
    fn numeric_backtransform_recovers_affine_weights() {
        // Unit-scale chains and coordinates bounded away from zero: the
        // relative step rule makes h collapse with the coordinate, and the
        // rounding floor of a difference quotient is eps * |F| / h.
        let mut rng = Stream::new(23);
        for _ in 0..20 {
            let dim = 3 + (rng.next_u64() % 3) as usize;
            let chain = random_unit_scale_chain(&mut rng, 3, dim);
            let exact = backtransform_affine_analytic(&chain).unwrap();
            let x0: Vec<f64> = (0..dim)
                .map(|_| {
                    let sign = if rng.unit() < 0.5 { -1.0 } else { 1.0 };
                    sign * rng.uniform(0.5, 2.0)
                })
                .collect();

            let two = backtransform_numeric(&chain, &x0, FdOrder::TwoPoint).unwrap();
            for (n, a) in two.weights.iter().zip(&exact.weights) {
                assert!((n - a).abs() <= 1e-5, "two-point {n} vs {a}");
            }
            assert_eq!(two.anchor.as_deref(), Some(&x0[..]));
            assert_eq!(two.offset, None);

            // The wide stencil trades rounding for truncation accuracy; at
            // the default step rounding dominates, so it runs with a larger
            // one. Affine chains have no truncation error at any step.
            let four =
                backtransform_numeric_with_step(&chain, &x0, FdOrder::FourPoint, 1e-5)
                    .unwrap();
            for (n, a) in four.weights.iter().zip(&exact.weights) {
                assert!((n - a).abs() <= 1e-7, "four-point {n} vs {a}");
            }
        }
    }

    #[test]
    fn numeric_backtransform_of_square_map() {
        let chain = ProcessingChain::new(vec![ChainNode::Differentiable(
            DifferentiableNode::from_fn(1, 1, true, |x| vec![x[0] * x[0]]),
        )])
        .unwrap();
        let result = backtransform_numeric(&chain, &[3.0], FdOrder::TwoPoint).unwrap();
        assert!((result.weights[0] - 6.0).abs() <= 1e-4, "{}", result.weights[0]);
    }

    #[test]
    fn numeric_backtransform_matches_kernel_gradient_oracle() {
        let sigma = 1.3;
        let samples = vec![
            Sample { features: vec![0.0, 0.4], label: 1 },
            Sample { features: vec![1.1, -0.3], label: 1 },
            Sample { features: vec![-0.9, 2.0], label: -1 },
            Sample { features: vec![0.3, 1.6], label: -1 },
        ];
        let data = Dataset::new(samples).unwrap();
        let hp = HyperParams { c: 2.0, ..HyperParams::default() };
        let model = fit_brmm(&data, &hp, KernelSpec::Rbf { sigma }).unwrap();

        let scorer = model.clone();
        let chain = ProcessingChain::new(vec![ChainNode::Differentiable(
            DifferentiableNode::from_fn(2, 1, true, move |x| {
                vec![scorer.decision_score(x).unwrap()]
            }),
        )])
        .unwrap();

        let mut rng = Stream::new(24);
        for _ in 0..5 {
            let x0 = [rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)];
            let numeric = backtransform_numeric(&chain, &x0, FdOrder::TwoPoint).unwrap();
            // Gradient of exp(-|x - x_j|^2 / (2 sigma^2)) in x is
            // k(x_j, x) * (x_j - x) / sigma^2; the kernel shift is constant.
            let mut analytic = vec![0.0, 0.0];
            for (j, sv) in model.support.iter().enumerate() {
                let d = (model.alphas[j] - model.betas[j]) * f64::from(sv.label);
                if d == 0.0 {
                    continue;
                }
                let diff: Vec<f64> =
                    sv.features.iter().zip(&x0).map(|(a, b)| a - b).collect();
                let k = (-(diff.iter().map(|v| v * v).sum::<f64>())
                    / (2.0 * sigma * sigma))
                    .exp();
                for (g, dx) in analytic.iter_mut().zip(&diff) {
                    *g += d * k * dx / (sigma * sigma);
                }
            }
            for (n, a) in numeric.weights.iter().zip(&analytic) {
                assert!((n - a).abs() <= 1e-4, "numeric {n} vs analytic {a}");
            }
        }
    }

    #[test]
    fn forward_model_with_identity_covariance_returns_weights() {
        // Four symmetric points with sample covariance exactly I.
        let c = (1.5f64).sqrt();
        let data = Dataset::new(vec![
            Sample { features: vec![c, 0.0], label: 1 },
            Sample { features: vec![-c, 0.0], label: 1 },
            Sample { features: vec![0.0, c], label: -1 },
            Sample { features: vec![0.0, -c], label: -1 },
        ])
        .unwrap();
        let pattern = covariance_forward_model(&[0.7, -0.2], &data).unwrap();
        assert!((pattern[0] - 0.7).abs() <= 1e-12);
        assert!((pattern[1] + 0.2).abs() <= 1e-12);
    }

    #[test]
    fn forward_model_scales_by_diagonal_covariance() {
        // Sample covariance diag(4, 1): 2 c^2 / 3 = 4 and 2 d^2 / 3 = 1.
        let c = (6.0f64).sqrt();
        let d = (1.5f64).sqrt();
        let data = Dataset::new(vec![
            Sample { features: vec![c, 0.0], label: 1 },
            Sample { features: vec![-c, 0.0], label: 1 },
            Sample { features: vec![0.0, d], label: -1 },
            Sample { features: vec![0.0, -d], label: -1 },
        ])
        .unwrap();
        let pattern = covariance_forward_model(&[1.0, 1.0], &data).unwrap();
        assert!((pattern[0] - 4.0).abs() <= 1e-12, "{}", pattern[0]);
        assert!((pattern[1] - 1.0).abs() <= 1e-12, "{}", pattern[1]);
    }

    #[test]
    fn forward_model_edge_cases() {
        let data = Dataset::new(vec![
            Sample { features: vec![1.0, 2.0], label: 1 },
            Sample { features: vec![-1.0, 0.0], label: -1 },
        ])
        .unwrap();
        assert_eq!(covariance_forward_model(&[0.0, 0.0], &data).unwrap(), vec![0.0, 0.0]);

        let single = Dataset::new(vec![Sample { features: vec![1.0], label: 1 }]).unwrap();
        assert!(covariance_forward_model(&[1.0], &single).is_err());
        assert!(covariance_forward_model(&[1.0], &data).is_err());
    }

    #[test]
    fn reinit_applies_pure_scaling_directly() {
        let stages = [AffineNode::scaling(&[2.0, 2.0])];
        for b_sum in [0.0, 1.0, -3.5] {
            let w = reinit_classifier(&stages, &[1.0, 1.0], b_sum, ReinitMode::Consistent)
                .unwrap();
            assert_eq!(w, vec![2.0, 2.0]);
        }
    }

    #[test]
    fn reinit_scales_translation_by_dual_sum() {
        let stages = [AffineNode::new(
            AffineNodeKind::GenericAffine,
            Matrix::diagonal(&[2.0, 2.0]),
            vec![1.0, 0.0],
        )
        .unwrap()];
        let w = reinit_classifier(&stages, &[1.0, 1.0], 2.0, ReinitMode::Consistent).unwrap();
        assert_eq!(w, vec![4.0, 2.0]);
        // The older convention subtracts the translation instead.
        let old = reinit_classifier(&stages, &[1.0, 1.0], 2.0, ReinitMode::Uncorrected).unwrap();
        assert_eq!(old, vec![1.0, 2.0]);
    }

    #[test]
    fn reinit_of_zero_sums_is_zero() {
        let stages = [AffineNode::translation(vec![0.5, -0.5])];
        let w = reinit_classifier(&stages, &[0.0, 0.0], 0.0, ReinitMode::Consistent).unwrap();
        assert_eq!(w, vec![0.0, 0.0]);
    }

    #[test]
    fn reinit_matches_direct_affine_action_exactly() {
        let mut rng = Stream::new(25);
        for _ in 0..100 {
            let dim = 2 + (rng.next_u64() % 4) as usize;
            let out = 2 + (rng.next_u64() % 4) as usize;
            let a_data: Vec<f64> = (0..out * dim).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let t: Vec<f64> = (0..out).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let a = Matrix::new(out, dim, a_data).unwrap();
            let node =
                AffineNode::new(AffineNodeKind::GenericAffine, a.clone(), t.clone()).unwrap();
            let w0: Vec<f64> = (0..dim).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let b_sum = rng.uniform(-2.0, 2.0);
            let got =
                reinit_classifier(&[node], &w0, b_sum, ReinitMode::Consistent).unwrap();
            let expected: Vec<f64> = (0..out)
                .map(|r| dot(a.row(r), &w0) + t[r] * b_sum)
                .collect();
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn reinit_rejects_scalar_preprocessing() {
        let stages = [AffineNode::decision(&[1.0, 1.0], 0.0).unwrap()];
        let err = reinit_classifier(&stages, &[1.0, 1.0], 0.0, ReinitMode::Consistent)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidParam(_)));
    }

    #[test]
    fn sensor_ranking_sums_absolute_columns() {
        let weights = Matrix::new(2, 2, vec![1.0, -2.0, 0.0, 3.0]).unwrap();
        assert_eq!(sensor_scores(&weights), vec![1.0, 5.0]);
        let ranked = sensor_ranking(&weights);
        assert_eq!(ranked[0], SensorRank { sensor: 0, score: 1.0 });
        assert_eq!(ranked[1], SensorRank { sensor: 1, score: 5.0 });
    }

    #[test]
    fn zero_column_is_first_elimination_candidate() {
        let weights = Matrix::new(2, 3, vec![1.0, 0.0, -2.0, 0.5, 0.0, 1.0]).unwrap();
        assert_eq!(sensor_ranking(&weights)[0].sensor, 1);
    }

    #[test]
    fn single_sensor_is_trivially_retained() {
        let weights = Matrix::new(3, 1, vec![1.0, -1.0, 2.0]).unwrap();
        let ranked = sensor_ranking(&weights);
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].sensor, 0);
        let steps = recursive_backward_elimination(1, 1, |_| {
            panic!("no elimination should run")
        })
        .unwrap();
        assert!(steps.is_empty());
    }

    #[test]
    fn elimination_stops_at_target_and_records_order() {
        // Fixed per-sensor scores 3, 1, 2: sensor 1 goes first, then 2.
        let scores = [3.0, 1.0, 2.0];
        let steps = recursive_backward_elimination(3, 1, |retained| {
            let row: Vec<f64> = retained.iter().map(|s| scores[*s]).collect();
            Matrix::new(1, row.len(), row)
        })
        .unwrap();
        let order: Vec<usize> = steps.iter().map(|s| s.eliminated).collect();
        assert_eq!(order, vec![1, 2]);
        assert_eq!(steps[0].retained, vec![0, 2]);
        assert_eq!(steps[1].retained, vec![0]);
    }

    #[test]
    fn noise_sensor_is_eliminated_first_in_seeded_runs() {
        let mut hits = 0;
        for seed in 0..100 {
            let mut rng = Stream::new(seed);
            let mut samples = Vec::new();
            for i in 0..40 {
                let label = if i % 2 == 0 { 1 } else { -1 };
                samples.push(Sample {
                    features: vec![
                        f64::from(label) + 0.3 * rng.normal(),
                        rng.normal(),
                    ],
                    label,
                });
            }
            let data = Dataset::new(samples).unwrap();
            let steps = recursive_backward_elimination(2, 1, |retained| {
                let restricted = Dataset::new(
                    data.iter()
                        .map(|s| Sample {
                            features: retained.iter().map(|i| s.features[*i]).collect(),
                            label: s.label,
                        })
                        .collect(),
                )
                .unwrap();
                let hp = HyperParams { c: 1.0, ..HyperParams::default() };
                let model = fit_brmm(&restricted, &hp, KernelSpec::Linear)?;
                let w = model.linear_weights().expect("linear model");
                Matrix::new(1, w.len(), w.to_vec())
            })
            .unwrap();
            if steps[0].eliminated == 1 {
                hits += 1;
            }
        }
        assert!(hits >= 95, "noise sensor eliminated first in only {hits}/100 runs");
    }

    #[test]
    fn deterministic_elimination_given_same_inputs() {
        let run = || {
            let mut rng = Stream::new(77);
            let weights: Vec<f64> = (0..4).map(|_| rng.uniform(0.0, 1.0)).collect();
            recursive_backward_elimination(4, 2, |retained| {
                let row: Vec<f64> = retained.iter().map(|s| weights[*s]).collect();
                Matrix::new(1, row.len(), row)
            })
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn fir_and_decimation_build_expected_matrices() {
        let fir = AffineNode::temporal_fir(&[1.0, 1.0], 3).unwrap();
        assert_eq!(fir.apply(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 3.0, 5.0]);

        let plain = AffineNode::decimation(3, 2, None).unwrap();
        assert_eq!(plain.apply(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 3.0]);

        let combined = AffineNode::decimation(3, 2, Some(&[1.0, 1.0])).unwrap();
        assert_eq!(combined.apply(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 5.0]);
        assert_eq!(combined.kind, AffineNodeKind::Decimation);
    }

    #[test]
    fn shape_metadata_reshapes_weight_maps() {
        let chain = ProcessingChain::new(vec![ChainNode::Affine(
            AffineNode::decision(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 0.0).unwrap(),
        )])
        .unwrap()
        .with_input_shape(3, 2)
        .unwrap();
        let result = backtransform_affine_analytic(&chain).unwrap();
        assert_eq!(
            result.reshaped().unwrap(),
            vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]
        );
        assert!(ProcessingChain::new(vec![ChainNode::Affine(
            AffineNode::decision(&[1.0, 2.0], 0.0).unwrap(),
        )])
        .unwrap()
        .with_input_shape(2, 2)
        .is_err());
    }

    #[test]
    fn affine_node_serde_round_trip() {
        let node = AffineNode::new(
            AffineNodeKind::SpatialFilter,
            Matrix::new(2, 3, vec![1.0, 0.0, 0.5, 0.0, 1.0, -0.5]).unwrap(),
            vec![0.1, -0.2],
        )
        .unwrap();
        let text = toml::to_string(&node).unwrap();
        let back: AffineNode = toml::from_str(&text).unwrap();
        assert_eq!(back, node);
    }

    #[test]
    fn matrix_validation_rejects_bad_input() {
        assert!(Matrix::new(2, 2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(Matrix::new(0, 2, vec![]).is_err());
        assert!(Matrix::try_from(vec![vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(Matrix::new(1, 2, vec![f64::NAN, 0.0]).is_err());
        let product = Matrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0])
            .unwrap()
            .multiply(&Matrix::new(2, 1, vec![5.0, 6.0]).unwrap())
            .unwrap();
        assert_eq!(product.row(0), &[17.0]);
        assert_eq!(product.row(1), &[39.0]);
    }
}
