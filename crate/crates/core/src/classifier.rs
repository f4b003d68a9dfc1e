//! One-vs-one RBF support vector classifier for the finger-count gesture.
//!
//! Every pair of classes gets its own binary machine trained with a
//! sequential-minimal-optimization solver. Prediction is a majority vote
//! over the pairwise decisions.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureVector, FEATURE_DIM};

/// Gesture classes: class `k` commands `k` km/h, class 0 is both fists.
pub const NUM_CLASSES: usize = 6;

const MODEL_MAGIC: &str = "locomotion-svm";
const MODEL_VERSION: u32 = 1;
const TAU: f64 = 1e-12;
/// Typical magnitude of a fingertip feature, metres. The default kernel
/// width treats this as one unit.
pub const FEATURE_SCALE_M: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum ClassifierError {
    #[error("training needs at least two classes, found {0}")]
    TooFewClasses(usize),
    #[error("label {0} outside 0..{NUM_CLASSES}")]
    LabelOutOfRange(usize),
    #[error("sample {index} has a non-finite feature")]
    NonFiniteFeature { index: usize },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("model has no trained machines")]
    Untrained,
    #[error("feature vector is not finite")]
    NonFiniteInput,
}

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("model file is empty")]
    Empty,
    #[error("not a model file (bad header)")]
    BadHeader,
    #[error("unsupported model version {found} (expected {MODEL_VERSION})")]
    Version { found: String },
    #[error("model file truncated after line {line}")]
    Truncated { line: usize },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabeledSample {
    pub features: FeatureVector,
    pub label: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    /// Kernel width, 1/m^2. Defaults to one over the feature dimension
    /// with distances measured in units of [`FEATURE_SCALE_M`].
    pub rbf_gamma: f64,
    pub c_reg: f64,
    /// Stopping tolerance on the maximal KKT violation.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            rbf_gamma: 1.0 / (FEATURE_DIM as f64 * FEATURE_SCALE_M * FEATURE_SCALE_M),
            c_reg: 10.0,
            tolerance: 1e-3,
            max_iterations: 10_000_000,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        if !(self.rbf_gamma > 0.0 && self.rbf_gamma.is_finite()) {
            return Err(ClassifierError::InvalidParams(format!("rbf_gamma = {}", self.rbf_gamma)));
        }
        if !(self.c_reg > 0.0 && self.c_reg.is_finite()) {
            return Err(ClassifierError::InvalidParams(format!("c_reg = {}", self.c_reg)));
        }
        if !(self.tolerance > 0.0) {
            return Err(ClassifierError::InvalidParams(format!("tolerance = {}", self.tolerance)));
        }
        Ok(())
    }
}

pub fn rbf_kernel(gamma: f64, a: &FeatureVector, b: &FeatureVector) -> f64 {
    (-gamma * a.squared_distance(b)).exp()
}

/// Binary machine separating `positive` (label +1) from `negative`.
/// `decision(x) = sum_i coef_i K(sv_i, x) - rho`, where `coef_i = alpha_i y_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryMachine {
    pub positive: usize,
    pub negative: usize,
    pub support_vectors: Vec<FeatureVector>,
    pub coefficients: Vec<f64>,
    pub rho: f64,
}

impl BinaryMachine {
    pub fn decision(&self, gamma: f64, x: &FeatureVector) -> f64 {
        let sum: f64 = self
            .support_vectors
            .iter()
            .zip(&self.coefficients)
            .map(|(sv, c)| c * rbf_kernel(gamma, sv, x))
            .sum();
        sum - self.rho
    }
}

/// Convergence data for one binary subproblem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MachineReport {
    pub positive: usize,
    pub negative: usize,
    pub iterations: usize,
    /// `max_{I_up} -y G - min_{I_low} -y G` at exit.
    pub kkt_gap: f64,
    pub support_vectors: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierModel {
    classes: Vec<usize>,
    rbf_gamma: f64,
    c_reg: f64,
    machines: Vec<BinaryMachine>,
}

struct BinarySolution {
    alpha: Vec<f64>,
    rho: f64,
    iterations: usize,
    kkt_gap: f64,
}

/// SMO on `min 1/2 a'Qa - e'a` s.t. `y'a = 0`, `0 <= a <= C`, using the
/// maximal violating pair as working set.
fn solve_binary(x: &[&FeatureVector], y: &[f64], params: &SvmParams) -> BinarySolution {
    let n = x.len();
    let c = params.c_reg;
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = y[i] * y[j] * rbf_kernel(params.rbf_gamma, x[i], x[j]);
            q[i * n + j] = v;
            q[j * n + i] = v;
        }
    }
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    let mut kkt_gap;
    loop {
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        let mut sel_i = usize::MAX;
        let mut sel_j = usize::MAX;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > gmax {
                gmax = v;
                sel_i = t;
            }
            if in_low(alpha[t], y[t]) && v < gmin {
                gmin = v;
                sel_j = t;
            }
        }
        kkt_gap = gmax - gmin;
        if kkt_gap < params.tolerance || iterations >= params.max_iterations {
            break;
        }
        iterations += 1;
        let (i, j) = (sel_i, sel_j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qii = q[i * n + i];
        let qjj = q[j * n + j];
        let qij = q[i * n + j];
        if y[i] != y[j] {
            let mut quad = qii + qjj + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
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
            let mut quad = qii + qjj - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
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
        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        let (row_i, row_j) = (&q[i * n..(i + 1) * n], &q[j * n..(j + 1) * n]);
        for k in 0..n {
            grad[k] += row_i[k] * di + row_j[k] * dj;
        }
    }

    // bias from free vectors, or the midpoint of the feasible interval
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_count += 1;
            free_sum += yg;
        }
    }
    let rho = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        (ub + lb) / 2.0
    };
    BinarySolution {
        alpha,
        rho,
        iterations,
        kkt_gap,
    }
}

/// Trains the one-vs-one ensemble. Output is a deterministic function of
/// the sample order and parameters.
pub fn train(
    samples: &[LabeledSample],
    params: &SvmParams,
) -> Result<(ClassifierModel, Vec<MachineReport>), ClassifierError> {
    params.validate()?;
    let mut present = [false; NUM_CLASSES];
    for (index, s) in samples.iter().enumerate() {
        if s.label >= NUM_CLASSES {
            return Err(ClassifierError::LabelOutOfRange(s.label));
        }
        if !s.features.is_finite() {
            return Err(ClassifierError::NonFiniteFeature { index });
        }
        present[s.label] = true;
    }
    let classes: Vec<usize> = (0..NUM_CLASSES).filter(|&k| present[k]).collect();
    if classes.len() < 2 {
        return Err(ClassifierError::TooFewClasses(classes.len()));
    }

    let mut pairs = Vec::new();
    for (a_idx, &a) in classes.iter().enumerate() {
        for &b in &classes[a_idx + 1..] {
            pairs.push((a, b));
        }
    }

    let solved: Vec<(BinaryMachine, MachineReport)> = pairs
        .par_iter()
        .map(|&(pos, neg)| {
            let subset: Vec<&LabeledSample> = samples
                .iter()
                .filter(|s| s.label == pos || s.label == neg)
                .collect();
            let x: Vec<&FeatureVector> = subset.iter().map(|s| &s.features).collect();
            let y: Vec<f64> = subset
                .iter()
                .map(|s| if s.label == pos { 1.0 } else { -1.0 })
                .collect();
            let sol = solve_binary(&x, &y, params);
            let mut support_vectors = Vec::new();
            let mut coefficients = Vec::new();
            for t in 0..x.len() {
                if sol.alpha[t] > 0.0 {
                    support_vectors.push(*x[t]);
                    coefficients.push(sol.alpha[t] * y[t]);
                }
            }
            let report = MachineReport {
                positive: pos,
                negative: neg,
                iterations: sol.iterations,
                kkt_gap: sol.kkt_gap,
                support_vectors: support_vectors.len(),
            };
            (
                BinaryMachine {
                    positive: pos,
                    negative: neg,
                    support_vectors,
                    coefficients,
                    rho: sol.rho,
                },
                report,
            )
        })
        .collect();

    let (machines, reports) = solved.into_iter().unzip();
    Ok((
        ClassifierModel {
            classes,
            rbf_gamma: params.rbf_gamma,
            c_reg: params.c_reg,
            machines,
        },
        reports,
    ))
}

impl ClassifierModel {
    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn rbf_gamma(&self) -> f64 {
        self.rbf_gamma
    }

    pub fn c_reg(&self) -> f64 {
        self.c_reg
    }

    pub fn machines(&self) -> &[BinaryMachine] {
        &self.machines
    }

    /// Raw pairwise decision values in machine order.
    pub fn decision_values(&self, features: &FeatureVector) -> Vec<f64> {
        self.machines
            .iter()
            .map(|m| m.decision(self.rbf_gamma, features))
            .collect()
    }

    /// Majority vote over the pairwise machines. A positive decision votes
    /// for the lower class id of the pair; tied vote counts resolve to the
    /// lowest class id.
    pub fn predict(&self, features: &FeatureVector) -> Result<usize, ClassifierError> {
        if self.machines.is_empty() {
            return Err(ClassifierError::Untrained);
        }
        if !features.is_finite() {
            return Err(ClassifierError::NonFiniteInput);
        }
        let mut votes = [0usize; NUM_CLASSES];
        for m in &self.machines {
            if m.decision(self.rbf_gamma, features) > 0.0 {
                votes[m.positive] += 1;
            } else {
                votes[m.negative] += 1;
            }
        }
        let mut best = self.classes[0];
        for &k in &self.classes {
            if votes[k] > votes[best] {
                best = k;
            }
        }
        Ok(best)
    }

    pub fn save<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_text().as_bytes())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MODEL_MAGIC} {MODEL_VERSION}");
        let classes: Vec<String> = self.classes.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(s, "classes {}", classes.join(" "));
        let _ = writeln!(s, "kernel rbf {:.16e}", self.rbf_gamma);
        let _ = writeln!(s, "c_reg {:.16e}", self.c_reg);
        let _ = writeln!(s, "dimension {FEATURE_DIM}");
        let _ = writeln!(s, "machines {}", self.machines.len());
        for m in &self.machines {
            let _ = writeln!(
                s,
                "machine {} {} rho {:.16e} vectors {}",
                m.positive,
                m.negative,
                m.rho,
                m.support_vectors.len()
            );
            for (sv, c) in m.support_vectors.iter().zip(&m.coefficients) {
                let _ = write!(s, "{c:.16e}");
                for v in sv.0 {
                    let _ = write!(s, " {v:.16e}");
                }
                s.push('\n');
            }
        }
        s.push_str("end\n");
        s
    }

    pub fn load<R: BufRead>(reader: R) -> Result<ClassifierModel, ModelIoError> {
        let mut lines = Lines::new(reader);
        let header = match lines.next()? {
            Some(h) => h,
            None => return Err(ModelIoError::Empty),
        };
        let mut parts = header.split_whitespace();
        if parts.next() != Some(MODEL_MAGIC) {
            return Err(ModelIoError::BadHeader);
        }
        match parts.next() {
            Some(v) if v == MODEL_VERSION.to_string() => {}
            other => {
                return Err(ModelIoError::Version {
                    found: other.unwrap_or("").to_string(),
                })
            }
        }

        let classes: Vec<usize> = lines
            .keyed("classes")?
            .iter()
            .map(|t| lines.parse_num(t))
            .collect::<Result<_, _>>()?;
        if classes.len() < 2 || classes.iter().any(|&c| c >= NUM_CLASSES) {
            return Err(lines.malformed("bad class list"));
        }
        let kernel = lines.keyed("kernel")?;
        if kernel.len() != 2 || kernel[0] != "rbf" {
            return Err(lines.malformed("expected `kernel rbf <gamma>`"));
        }
        let rbf_gamma: f64 = lines.parse_num(&kernel[1])?;
        let c_reg: f64 = lines.single("c_reg")?;
        let dim: usize = lines.single("dimension")?;
        if dim != FEATURE_DIM {
            return Err(lines.malformed(&format!("dimension {dim} != {FEATURE_DIM}")));
        }
        let count: usize = lines.single("machines")?;
        let mut machines = Vec::with_capacity(count);
        for _ in 0..count {
            let head = lines.keyed("machine")?;
            if head.len() != 6 || head[2] != "rho" || head[4] != "vectors" {
                return Err(lines.malformed("expected `machine <pos> <neg> rho <r> vectors <n>`"));
            }
            let positive: usize = lines.parse_num(&head[0])?;
            let negative: usize = lines.parse_num(&head[1])?;
            let rho: f64 = lines.parse_num(&head[3])?;
            let nsv: usize = lines.parse_num(&head[5])?;
            if !classes.contains(&positive) || !classes.contains(&negative) {
                return Err(lines.malformed("machine refers to unknown class"));
            }
            let mut support_vectors = Vec::with_capacity(nsv);
            let mut coefficients = Vec::with_capacity(nsv);
            for _ in 0..nsv {
                let row = lines.require()?;
                let nums: Vec<f64> = row
                    .split_whitespace()
                    .map(|t| lines.parse_num(t))
                    .collect::<Result<_, _>>()?;
                if nums.len() != FEATURE_DIM + 1 {
                    return Err(lines.malformed(&format!(
                        "expected {} numbers, found {}",
                        FEATURE_DIM + 1,
                        nums.len()
                    )));
                }
                coefficients.push(nums[0]);
                let mut fv = [0.0; FEATURE_DIM];
                fv.copy_from_slice(&nums[1..]);
                support_vectors.push(FeatureVector(fv));
            }
            machines.push(BinaryMachine {
                positive,
                negative,
                support_vectors,
                coefficients,
                rho,
            });
        }
        let tail = lines.require()?;
        if tail.trim() != "end" {
            return Err(lines.malformed("expected `end`"));
        }
        Ok(ClassifierModel {
            classes,
            rbf_gamma,
            c_reg,
            machines,
        })
    }
}

struct Lines<R> {
    reader: R,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn new(reader: R) -> Self {
        Lines { reader, line: 0 }
    }

    fn next(&mut self) -> Result<Option<String>, ModelIoError> {
        loop {
            let mut buf = Vec::new();
            if self.reader.read_until(b'\n', &mut buf)? == 0 {
                return Ok(None);
            }
            self.line += 1;
            let text = String::from_utf8(buf).map_err(|_| self.malformed("invalid UTF-8"))?;
            if !text.trim().is_empty() {
                return Ok(Some(text.trim_end().to_string()));
            }
        }
    }

    fn require(&mut self) -> Result<String, ModelIoError> {
        self.next()?
            .ok_or(ModelIoError::Truncated { line: self.line })
    }

    fn keyed(&mut self, key: &str) -> Result<Vec<String>, ModelIoError> {
        let l = self.require()?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(key) {
            return Err(self.malformed(&format!("expected `{key}`")));
        }
        Ok(parts.map(str::to_string).collect())
    }

    fn single<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, ModelIoError> {
        let v = self.keyed(key)?;
        if v.len() != 1 {
            return Err(self.malformed(&format!("expected `{key} <value>`")));
        }
        self.parse_num(&v[0])
    }

    fn parse_num<T: std::str::FromStr>(&self, token: &str) -> Result<T, ModelIoError> {
        token
            .parse()
            .map_err(|_| self.malformed(&format!("cannot parse `{token}`")))
    }

    fn malformed(&self, msg: &str) -> ModelIoError {
        ModelIoError::Malformed {
            line: self.line,
            msg: msg.to_string(),
        }
    }
}
