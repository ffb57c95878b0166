//! Hard-margin linear support vector machine.
//!
//! Training solves the dual of `min ||w||^2 s.t. c_l (w.s_l + b) >= 1` with a
//! pairwise (SMO) coordinate solver on a box-constrained surrogate whose box
//! ceiling is large enough that it is never reached on separable data. A
//! multiplier pinned at the ceiling means the data are not separable, which
//! is reported as an error instead of silently returning a soft-margin model.
//!
//! After the dual solve the offset is placed midway between the two classes
//! along the learned normal, and the pair is rescaled to canonical form so
//! that the closest training sample sits at `|w.s + b| = 1`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SvmError {
    #[error("training set is not linearly separable: {0}")]
    NotSeparable(String),
    #[error("degenerate training set: {0}")]
    DegenerateSet(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("normal vector is zero")]
    ZeroNormal,
    #[error("invalid sample: {0}")]
    InvalidSample(String),
}

/// Class of a system state: `-1` is normal, `+1` is an anomaly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Label {
    Normal,
    Anomaly,
}

impl Label {
    pub fn value(self) -> f64 {
        match self {
            Label::Normal => -1.0,
            Label::Anomaly => 1.0,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Normal => Label::Anomaly,
            Label::Anomaly => Label::Normal,
        }
    }
}

impl TryFrom<i64> for Label {
    type Error = String;

    fn try_from(v: i64) -> Result<Self, Self::Error> {
        match v {
            -1 => Ok(Label::Normal),
            1 => Ok(Label::Anomaly),
            other => Err(format!("label must be -1 or +1, got {other}")),
        }
    }
}

impl From<Label> for i64 {
    fn from(l: Label) -> i64 {
        match l {
            Label::Normal => -1,
            Label::Anomaly => 1,
        }
    }
}

/// Output of the classical signum function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn of(x: f64) -> Sign {
        if x > 0.0 {
            Sign::Positive
        } else if x < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }

    pub fn value(self) -> i8 {
        match self {
            Sign::Negative => -1,
            Sign::Zero => 0,
            Sign::Positive => 1,
        }
    }

    /// The label this sign stands for; `None` on the hyperplane itself.
    pub fn label(self) -> Option<Label> {
        match self {
            Sign::Negative => Some(Label::Normal),
            Sign::Zero => None,
            Sign::Positive => Some(Label::Anomaly),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub state: Vec<f64>,
    pub label: Label,
}

impl LabeledSample {
    pub fn new(state: Vec<f64>, label: Label) -> Self {
        Self { state, label }
    }
}

/// Ordered training samples sharing a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    samples: Vec<LabeledSample>,
    dim: usize,
}

impl TrainingSet {
    pub fn new(samples: Vec<LabeledSample>) -> Result<Self, SvmError> {
        let dim = samples
            .first()
            .map(|s| s.state.len())
            .ok_or_else(|| SvmError::DegenerateSet("no samples".into()))?;
        if dim == 0 {
            return Err(SvmError::InvalidSample("zero-dimensional state".into()));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.state.len() != dim {
                return Err(SvmError::DimensionMismatch {
                    expected: dim,
                    got: s.state.len(),
                });
            }
            if s.state.iter().any(|v| !v.is_finite()) {
                return Err(SvmError::InvalidSample(format!("sample {i} has a non-finite coordinate")));
            }
        }
        Ok(Self { samples, dim })
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.samples.iter().filter(|s| s.label == label).count()
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.iter().map(|s| s.state.as_slice())
    }

    pub fn into_samples(self) -> Vec<LabeledSample> {
        self.samples
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Box ceiling of the surrogate dual; reaching it means non-separable.
    pub penalty: f64,
    /// Stop once the maximal KKT violation drops below this.
    pub kkt_tol: f64,
    /// Tolerance on canonicality and constraint satisfaction.
    pub canon_tol: f64,
    /// Budget of `max_passes_factor * L^2` passes, a pass being `L` pair
    /// updates, and never fewer than 100 000 updates: small sets whose
    /// dual optimum is not unique converge only linearly.
    pub max_passes_factor: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            penalty: 1e6,
            kkt_tol: 1e-8,
            canon_tol: 1e-5,
            max_passes_factor: 10,
        }
    }
}

/// A hyperplane `w.s + b = 0` in canonical form for the set it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatingHyperplane {
    pub w: Vec<f64>,
    pub b: f64,
    #[serde(rename = "K")]
    pub dim: usize,
    pub canon_tol: f64,
}

impl SeparatingHyperplane {
    pub fn new(w: Vec<f64>, b: f64) -> Result<Self, SvmError> {
        if w.is_empty() || w.iter().all(|&x| x == 0.0) {
            return Err(SvmError::ZeroNormal);
        }
        if w.iter().any(|x| !x.is_finite()) || !b.is_finite() {
            return Err(SvmError::InvalidSample("non-finite hyperplane parameters".into()));
        }
        let dim = w.len();
        Ok(Self {
            w,
            b,
            dim,
            canon_tol: SolverConfig::default().canon_tol,
        })
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// `w.s + b`.
    pub fn decision_value(&self, s: &[f64]) -> Result<f64, SvmError> {
        if s.len() != self.w.len() {
            return Err(SvmError::DimensionMismatch {
                expected: self.w.len(),
                got: s.len(),
            });
        }
        Ok(dot(&self.w, s) + self.b)
    }

    pub fn classify(&self, s: &[f64]) -> Result<Sign, SvmError> {
        self.decision_value(s).map(Sign::of)
    }

    /// Width `2 / ||w||` of the band between `w.s + b = -1` and `w.s + b = +1`.
    pub fn margin(&self) -> Result<f64, SvmError> {
        let n = norm(&self.w);
        if n == 0.0 {
            return Err(SvmError::ZeroNormal);
        }
        Ok(2.0 / n)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.w, &self.w)
    }

    /// Checks canonicality and every margin constraint against `set`.
    pub fn check_canonical(&self, set: &TrainingSet) -> Result<(), String> {
        let tol = self.canon_tol;
        let mut closest = f64::INFINITY;
        for (i, s) in set.samples().iter().enumerate() {
            let v = self.decision_value(&s.state).map_err(|e| e.to_string())?;
            if s.label.value() * v < 1.0 - tol {
                return Err(format!("sample {i} violates its margin constraint: c*(w.s+b) = {}", s.label.value() * v));
            }
            closest = closest.min(v.abs());
        }
        if (closest - 1.0).abs() > tol {
            return Err(format!("not canonical: min |w.s+b| = {closest}"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("hyperplane serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let h: SeparatingHyperplane = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if h.dim != h.w.len() {
            return Err(format!("K = {} but w has {} entries", h.dim, h.w.len()));
        }
        SeparatingHyperplane::new(h.w.clone(), h.b).map_err(|e| e.to_string())?;
        Ok(h)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Train the maximal-margin canonical hyperplane for `set`.
pub fn train_svm(set: &TrainingSet, cfg: &SolverConfig) -> Result<SeparatingHyperplane, SvmError> {
    let n = set.len();
    let n_pos = set.count(Label::Anomaly);
    if n_pos == 0 || n_pos == n {
        return Err(SvmError::DegenerateSet("both labels must be present".into()));
    }
    let first = &set.samples()[0].state;
    if set.states().all(|s| s == first.as_slice()) {
        return Err(SvmError::DegenerateSet("all samples are identical".into()));
    }

    let alpha = solve_dual(set, cfg)?;

    let mut w = vec![0.0; set.dim()];
    for (a, s) in alpha.iter().zip(set.samples()) {
        if *a > 0.0 {
            let ya = a * s.label.value();
            for (wk, xk) in w.iter_mut().zip(&s.state) {
                *wk += ya * xk;
            }
        }
    }
    if w.iter().all(|&x| x == 0.0) {
        return Err(SvmError::NotSeparable("dual solution yields a zero normal".into()));
    }

    // Offset and scale from the extreme projections of each class.
    let mut max_neg = f64::NEG_INFINITY;
    let mut min_pos = f64::INFINITY;
    for s in set.samples() {
        let p = dot(&w, &s.state);
        match s.label {
            Label::Normal => max_neg = max_neg.max(p),
            Label::Anomaly => min_pos = min_pos.min(p),
        }
    }
    let gap = min_pos - max_neg;
    if gap <= 0.0 || !gap.is_finite() {
        return Err(SvmError::NotSeparable(format!(
            "classes overlap along the learned normal (gap {gap:e})"
        )));
    }
    let scale = 2.0 / gap;
    let w: Vec<f64> = w.iter().map(|x| x * scale).collect();
    let b = -(min_pos + max_neg) / 2.0 * scale;

    let mut h = SeparatingHyperplane::new(w, b)?;
    h.canon_tol = cfg.canon_tol;
    Ok(h)
}

/// SMO on `min 1/2 a'Qa - 1'a, y'a = 0, 0 <= a <= C` with second-order
/// working-set selection. Deterministic: ties resolve to the lowest index.
fn solve_dual(set: &TrainingSet, cfg: &SolverConfig) -> Result<Vec<f64>, SvmError> {
    let n = set.len();
    let y: Vec<f64> = set.samples().iter().map(|s| s.label.value()).collect();
    let c = cfg.penalty;
    const TAU: f64 = 1e-12;

    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = y[i] * y[j] * dot(&set.samples()[i].state, &set.samples()[j].state);
            q[i * n + j] = v;
            q[j * n + i] = v;
        }
    }
    let qd: Vec<f64> = (0..n).map(|i| q[i * n + i]).collect();

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = cfg.max_passes_factor.saturating_mul(n * n).saturating_mul(n).max(100_000);
    let mut converged = false;

    for _ in 0..max_iter {
        // i: maximal violator in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            if in_up && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i_sel = t;
            }
        }
        // j: second-order choice in I_low
        let mut gmin = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            let in_low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            if !in_low {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            if i_sel != usize::MAX && v < gmax {
                let diff = gmax - v;
                let mut a = qd[i_sel] + qd[t] - 2.0 * y[i_sel] * y[t] * q[i_sel * n + t];
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -(diff * diff) / a;
                if obj < best {
                    best = obj;
                    j_sel = t;
                }
            }
        }
        if i_sel == usize::MAX || j_sel == usize::MAX || gmax - gmin < cfg.kkt_tol {
            converged = true;
            break;
        }

        let (i, j) = (i_sel, j_sel);
        let old_ai = alpha[i];
        let old_aj = alpha[j];
        let mut quad = qd[i] + qd[j] - 2.0 * y[i] * y[j] * q[i * n + j];
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let dai = alpha[i] - old_ai;
        let daj = alpha[j] - old_aj;
        let (qi, qj) = (&q[i * n..(i + 1) * n], &q[j * n..(j + 1) * n]);
        for t in 0..n {
            grad[t] += qi[t] * dai + qj[t] * daj;
        }
    }

    if alpha.iter().any(|&a| a >= c * (1.0 - 1e-9)) {
        return Err(SvmError::NotSeparable(
            "a dual multiplier reached the penalty ceiling".into(),
        ));
    }
    if !converged {
        return Err(SvmError::NotSeparable(format!(
            "dual solver did not close the KKT gap within {max_iter} iterations"
        )));
    }
    Ok(alpha)
}
