//! Hyperparameter search: exhaustive grids and derivative-free pattern search.
//!
//! Both searches minimize a black-box objective and are deterministic given
//! a deterministic objective. Grid search enumerates the Cartesian product
//! of named axes with the first axis varying slowest and keeps the full
//! evaluation table. Pattern search probes a direction set at a shrinking
//! step size, accepting the first direction that improves on the incumbent;
//! coordinates may be searched on a base-10 log scale, in which case a step
//! multiplies or divides the parameter by `10^step`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One grid coordinate: either a real number or a symbolic choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValue {
    Real(f64),
    Tag(String),
}

impl AxisValue {
    pub fn as_real(&self) -> Option<f64> {
        match self {
            AxisValue::Real(v) => Some(*v),
            AxisValue::Tag(_) => None,
        }
    }
}

impl std::fmt::Display for AxisValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AxisValue::Real(v) => write!(f, "{v}"),
            AxisValue::Tag(s) => write!(f, "{s}"),
        }
    }
}

/// A named, ordered list of candidate values for one parameter.
///
/// `log_scale` is display/preset metadata: grids evaluate the listed values
/// as given either way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<AxisValue>,
    #[serde(default)]
    pub log_scale: bool,
}

impl Axis {
    pub fn real(name: &str, values: &[f64]) -> Self {
        Axis {
            name: name.to_string(),
            values: values.iter().map(|v| AxisValue::Real(*v)).collect(),
            log_scale: false,
        }
    }
}

/// Cartesian product of axes; cells are enumerated first axis slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    axes: Vec<Axis>,
}

impl ParamSpace {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidParam("parameter space needs at least one axis".into()));
        }
        for axis in &axes {
            if axis.values.is_empty() {
                return Err(Error::InvalidParam(format!("axis '{}' has no values", axis.name)));
            }
        }
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::InvalidParam(format!("duplicate axis name '{}'", a.name)));
            }
        }
        Ok(ParamSpace { axes })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    /// Number of grid cells.
    pub fn cell_count(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// Decodes cell `index` (first axis slowest) into one value per axis.
    pub fn cell(&self, index: usize) -> Vec<AxisValue> {
        let mut rest = index;
        let mut out = vec![AxisValue::Real(0.0); self.axes.len()];
        for (slot, axis) in out.iter_mut().zip(&self.axes).rev() {
            let n = axis.values.len();
            *slot = axis.values[rest % n].clone();
            rest /= n;
        }
        debug_assert_eq!(rest, 0);
        out
    }
}

/// One evaluated grid cell; `value` is `None` when the objective failed
/// there (failed cells are excluded from the minimum).
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub params: Vec<AxisValue>,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub best_index: usize,
    pub best_params: Vec<AxisValue>,
    pub best_value: f64,
    pub table: Vec<GridCell>,
}

/// Minimizes `objective` over every cell of `space`.
///
/// Ties keep the earliest cell in enumeration order. Objective errors and
/// non-finite values mark the cell missing; if every cell is missing the
/// search fails.
pub fn grid_search<F>(space: &ParamSpace, mut objective: F) -> Result<GridOutcome>
where
    F: FnMut(&[AxisValue]) -> Result<f64>,
{
    let mut table = Vec::with_capacity(space.cell_count());
    let mut best: Option<(usize, f64)> = None;
    for index in 0..space.cell_count() {
        let params = space.cell(index);
        let value = match objective(&params) {
            Ok(v) if v.is_finite() => Some(v),
            _ => None,
        };
        if let Some(v) = value {
            if best.map_or(true, |(_, bv)| v < bv) {
                best = Some((index, v));
            }
        }
        table.push(GridCell { params, value });
    }
    let (best_index, best_value) = best.ok_or_else(|| {
        Error::Numerical("objective failed on every grid cell".into())
    })?;
    Ok(GridOutcome {
        best_index,
        best_params: table[best_index].params.clone(),
        best_value,
        table,
    })
}

/// Minimal improvement `p(s)` required to accept a move at step size `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Improvement {
    /// Any strict decrease is accepted.
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// `p(s) = factor * s`, shrinking together with the step.
    StepScaled {
        factor: f64,
    },
}

impl Improvement {
    fn at(&self, step: f64) -> f64 {
        match self {
            Improvement::Zero => 0.0,
            Improvement::Constant { value } => *value,
            Improvement::StepScaled { factor } => factor * step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSearchConfig {
    pub initial_step: f64,
    /// Step shrink factor in (0, 1) applied when no direction improves.
    pub contraction: f64,
    /// The search stops once the step falls below this.
    pub step_tolerance: f64,
    #[serde(default = "default_round_budget")]
    pub max_iterations: usize,
    /// Step growth factor on success; `None` keeps the step unchanged.
    #[serde(default)]
    pub expansion: Option<f64>,
    #[serde(default)]
    pub min_improvement: Improvement,
    /// Per-coordinate log-scale flags; empty means all linear.
    #[serde(default)]
    pub log_scale: Vec<bool>,
    /// Probe directions; `None` means plus/minus unit vectors.
    #[serde(default)]
    pub directions: Option<Vec<Vec<f64>>>,
    /// Accept the best improving direction of a round instead of the first.
    #[serde(default)]
    pub best_of_round: bool,
}

fn default_round_budget() -> usize {
    1000
}

impl PatternSearchConfig {
    pub fn new(initial_step: f64, contraction: f64, step_tolerance: f64) -> Self {
        PatternSearchConfig {
            initial_step,
            contraction,
            step_tolerance,
            max_iterations: default_round_budget(),
            expansion: None,
            min_improvement: Improvement::Zero,
            log_scale: Vec::new(),
            directions: None,
            best_of_round: false,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if !(self.step_tolerance > 0.0 && self.initial_step > self.step_tolerance) {
            return Err(Error::InvalidParam(format!(
                "need initial step {} > step tolerance {} > 0",
                self.initial_step, self.step_tolerance
            )));
        }
        if !(self.contraction > 0.0 && self.contraction < 1.0) {
            return Err(Error::InvalidParam(format!(
                "contraction must lie in (0, 1), got {}",
                self.contraction
            )));
        }
        if let Some(e) = self.expansion {
            if !(e >= 1.0 && e.is_finite()) {
                return Err(Error::InvalidParam(format!(
                    "expansion factor must be >= 1, got {e}"
                )));
            }
        }
        if !self.log_scale.is_empty() && self.log_scale.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: self.log_scale.len() });
        }
        if let Some(dirs) = &self.directions {
            if dirs.is_empty() {
                return Err(Error::InvalidParam("direction set is empty".into()));
            }
            for d in dirs {
                if d.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: d.len() });
                }
                if d.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParam("direction has non-finite entry".into()));
                }
            }
        }
        Ok(())
    }
}

/// State after one probe round: the incumbent, the step that will be used
/// next, and the incumbent's objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub point: Vec<f64>,
    pub step: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The step shrank below the tolerance.
    StepTolerance,
    /// The round budget ran out first.
    IterationBudget,
    /// The objective failed or returned a non-finite value mid-search;
    /// the outcome carries the partial trace.
    ObjectiveFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternSearchOutcome {
    pub best: Vec<f64>,
    pub best_value: f64,
    pub trace: Vec<TracePoint>,
    pub stopped: StopReason,
}

/// Derivative-free local minimization from `start`.
///
/// Each round probes `x + s * d` over the direction set in order. A probe
/// that beats the incumbent by more than the minimal improvement moves the
/// incumbent (step unchanged unless an expansion factor is set); a round
/// with no acceptable probe contracts the step, and the search stops when
/// the step drops below the tolerance. Log-scale coordinates are searched
/// in log10 space, so a step of `s` multiplies or divides them by `10^s`;
/// those coordinates must start positive. The trace records the state after
/// every round and is non-increasing in the objective.
pub fn pattern_search<F>(
    cfg: &PatternSearchConfig,
    mut objective: F,
    start: &[f64],
) -> Result<PatternSearchOutcome>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if start.is_empty() {
        return Err(Error::EmptyInput("pattern search needs a starting point".into()));
    }
    cfg.validate(start.len())?;
    let log_scale = |i: usize| cfg.log_scale.get(i).copied().unwrap_or(false);
    for (i, v) in start.iter().enumerate() {
        if !v.is_finite() || (log_scale(i) && *v <= 0.0) {
            return Err(Error::InvalidParam(format!(
                "start coordinate {i} = {v} is invalid for its scale"
            )));
        }
    }

    // Internal state lives in search coordinates (log10 where flagged).
    let encode = |x: &[f64]| -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, v)| if log_scale(i) { v.log10() } else { *v })
            .collect()
    };
    let decode = |z: &[f64]| -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(i, v)| if log_scale(i) { 10f64.powf(*v) } else { *v })
            .collect()
    };

    let default_dirs: Vec<Vec<f64>> = (0..start.len())
        .flat_map(|i| {
            let mut plus = vec![0.0; start.len()];
            plus[i] = 1.0;
            let mut minus = vec![0.0; start.len()];
            minus[i] = -1.0;
            [plus, minus]
        })
        .collect();
    let directions = cfg.directions.as_ref().unwrap_or(&default_dirs);

    let mut z = encode(start);
    let mut f_best = match objective(&decode(&z)) {
        Ok(v) if v.is_finite() => v,
        _ => {
            return Err(Error::Numerical(
                "objective failed at the starting point".into(),
            ))
        }
    };
    let mut step = cfg.initial_step;
    let mut trace = vec![TracePoint { point: decode(&z), step, value: f_best }];

    let mut stopped = StopReason::IterationBudget;
    'rounds: for _ in 0..cfg.max_iterations {
        let mut accepted: Option<(Vec<f64>, f64)> = None;
        for d in directions {
            let cand: Vec<f64> = z.iter().zip(d).map(|(zi, di)| zi + step * di).collect();
            let value = match objective(&decode(&cand)) {
                Ok(v) if v.is_finite() => v,
                _ => {
                    stopped = StopReason::ObjectiveFailure;
                    break 'rounds;
                }
            };
            if value < f_best - cfg.min_improvement.at(step) {
                let better = accepted.as_ref().map_or(true, |(_, av)| value < *av);
                if better {
                    accepted = Some((cand, value));
                }
                if !cfg.best_of_round {
                    break;
                }
            }
        }
        match accepted {
            Some((cand, value)) => {
                z = cand;
                f_best = value;
                if let Some(e) = cfg.expansion {
                    step *= e;
                }
                trace.push(TracePoint { point: decode(&z), step, value: f_best });
            }
            None => {
                step *= cfg.contraction;
                trace.push(TracePoint { point: decode(&z), step, value: f_best });
                if step < cfg.step_tolerance {
                    stopped = StopReason::StepTolerance;
                    break;
                }
            }
        }
    }

    Ok(PatternSearchOutcome { best: decode(&z), best_value: f_best, trace, stopped })
}

/// Regularization-constant grid `10^-4, 10^-3.5, ..., 10^2`.
pub fn preset_c_values() -> Vec<f64> {
    (0..13).map(|i| 10f64.powf(f64::from(i) * 0.5 - 4.0)).collect()
}

/// Range-parameter grid `1 + 10^-1, 1 + 10^-0.8, ..., 1 + 10^1`.
pub fn preset_r_values() -> Vec<f64> {
    (0..11).map(|i| 1.0 + 10f64.powf((f64::from(i) - 5.0) / 5.0)).collect()
}

/// Default two-axis tuning grid over the regularization constant and range.
pub fn preset_tuning_space() -> ParamSpace {
    let mut c = Axis::real("c", &preset_c_values());
    c.log_scale = true;
    let r = Axis::real("r", &preset_r_values());
    ParamSpace::new(vec![c, r]).expect("preset axes are non-empty")
}

/// Recommended pattern-search start `(c, r) = (1, 10)`: high values converge
/// fast and tuning then only ever shrinks them. Callers searching the range
/// parameter on a log scale should optimize over `r - 1`.
pub fn default_tuning_start() -> Vec<f64> {
    vec![1.0, 10.0]
}
