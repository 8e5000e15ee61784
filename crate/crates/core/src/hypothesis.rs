//! Hypothesis space `g ∘ φ`: terminal maps, target registry, loss and training.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control_families::{Activation, ControlLayer, Family};
use crate::error::{Error, Result};
use crate::flow::{integrate, FlowWorkspace, Integrator, Schedule};
use crate::perm_group::{GroupSpec, PermGroup};
use crate::seed;

/// Loss above this aborts training.
pub const DIVERGENCE_LOSS: f64 = 1e8;
/// Samples per parallel work unit; fixed so reductions are bit-reproducible.
const CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Terminal {
    #[default]
    Sum,
    Max,
    Mean,
}

impl Terminal {
    pub fn name(self) -> &'static str {
        match self {
            Terminal::Sum => "sum",
            Terminal::Max => "max",
            Terminal::Mean => "mean",
        }
    }

    pub fn eval(self, y: &[f64]) -> f64 {
        match self {
            Terminal::Sum => y.iter().sum(),
            Terminal::Mean => y.iter().sum::<f64>() / y.len() as f64,
            Terminal::Max => y.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Gradient at `y`; for `max` the first maximiser gets the unit weight.
    pub fn gradient(self, y: &[f64]) -> Vec<f64> {
        match self {
            Terminal::Sum => vec![1.0; y.len()],
            Terminal::Mean => vec![1.0 / y.len() as f64; y.len()],
            Terminal::Max => {
                let mut g = vec![0.0; y.len()];
                let mut best = 0;
                for (i, &v) in y.iter().enumerate() {
                    if v > y[best] {
                        best = i;
                    }
                }
                if !y.is_empty() {
                    g[best] = 1.0;
                }
                g
            }
        }
    }
}

impl fmt::Display for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Terminal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Terminal::Sum),
            "max" => Ok(Terminal::Max),
            "mean" => Ok(Terminal::Mean),
            _ => Err(Error::Unknown {
                kind: "terminal",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub schedule: Schedule,
    pub terminal: Terminal,
    group: GroupSpec,
}

impl Model {
    /// The declared group is taken from the schedule's layers.
    pub fn new(schedule: Schedule, terminal: Terminal) -> Result<Self> {
        let group = schedule
            .segments()
            .first()
            .map(|s| s.layer.declared_group())
            .ok_or_else(|| Error::InvalidArgument("empty schedule needs an explicit group".into()))?;
        Ok(Model {
            schedule,
            terminal,
            group,
        })
    }

    pub fn with_group(schedule: Schedule, terminal: Terminal, group: GroupSpec) -> Result<Self> {
        if let Some(first) = schedule.segments().first() {
            if first.layer.declared_group() != group {
                return Err(Error::InvalidArgument(format!(
                    "schedule group {} differs from {group}",
                    first.layer.declared_group()
                )));
            }
        }
        Ok(Model {
            schedule,
            terminal,
            group,
        })
    }

    /// `layers` segments of unit duration with parameters `U[-init_scale, init_scale]`.
    #[allow(clippy::too_many_arguments)]
    pub fn random(
        family: Family,
        dims: &[usize],
        activation: Activation,
        layers: usize,
        terminal: Terminal,
        init_scale: f64,
        steps_per_unit_time: u32,
        integrator: Integrator,
        seed: u64,
    ) -> Result<Self> {
        if layers == 0 {
            return Err(Error::InvalidArgument("a model needs at least one layer".into()));
        }
        let mut rng = seed::rng_for(seed, "init");
        let mut schedule = Schedule::empty()
            .with_steps_per_unit_time(steps_per_unit_time)?
            .with_integrator(integrator);
        for _ in 0..layers {
            schedule.push(
                ControlLayer::random(family, dims, activation, init_scale, &mut rng)?,
                1.0,
            )?;
        }
        Model::new(schedule, terminal)
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    pub fn degree(&self) -> usize {
        self.group.degree()
    }
}

/// `terminal(integrate(schedule, x))`.
pub fn forward(model: &Model, x: &[f64]) -> Result<f64> {
    if x.len() != model.degree() {
        return Err(Error::DimensionMismatch {
            expected: model.degree(),
            got: x.len(),
        });
    }
    Ok(model.terminal.eval(&integrate(&model.schedule, x)?.y))
}

type TargetFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A scalar target with its declared invariance group.
#[derive(Clone)]
pub struct TargetFunction {
    tag: String,
    f: TargetFn,
    group: GroupSpec,
}

impl fmt::Debug for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetFunction")
            .field("tag", &self.tag)
            .field("group", &self.group)
            .finish()
    }
}

impl TargetFunction {
    /// Registers `f`, rejecting it unless 200 samples on `[-1, 1]^n` confirm
    /// invariance under every element of `group`.
    pub fn new(
        tag: impl Into<String>,
        group: GroupSpec,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let t = TargetFunction {
            tag: tag.into(),
            f: Arc::new(f),
            group,
        };
        let g = t.group.build()?;
        let mut rng = seed::rng_for(0, &t.tag);
        for _ in 0..200 {
            let x: Vec<f64> = (0..g.degree()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let fx = t.eval(&x);
            for p in g.elements() {
                let fgx = t.eval(&p.act_vector(&x)?);
                if (fgx - fx).abs() > 1e-10 * (1.0 + fx.abs()) {
                    return Err(Error::InvalidArgument(format!(
                        "target `{}` is not invariant under {} (x = {x:?}, g = {p})",
                        t.tag, t.group
                    )));
                }
            }
        }
        Ok(t)
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    pub fn degree(&self) -> usize {
        self.group.degree()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// `(x1 − x2)(x2 − x3)(x3 − x1)`.
pub fn t3_antisym(x: &[f64]) -> f64 {
    (x[0] - x[1]) * (x[1] - x[2]) * (x[2] - x[0])
}

pub const TARGET_TAGS: [&str; 7] = ["t3_antisym", "range", "prod", "sum_sq", "row_sum_sq", "min", "sum"];

/// Builds a registered target for the given input shape.
pub fn target(tag: &str, dims: &[usize]) -> Result<TargetFunction> {
    let n: usize = dims.iter().product();
    let flat_only = |dims: &[usize]| -> Result<()> {
        if dims.len() != 1 {
            return Err(Error::InvalidArgument(format!("target `{tag}` takes a flat input, got dims {dims:?}")));
        }
        Ok(())
    };
    match tag {
        "t3_antisym" => {
            if dims != [3] {
                return Err(Error::InvalidArgument(format!("t3_antisym needs dims [3], got {dims:?}")));
            }
            TargetFunction::new(tag, GroupSpec::Translation1d(3), t3_antisym)
        }
        "range" => {
            flat_only(dims)?;
            TargetFunction::new(tag, GroupSpec::Symmetric(n), |x| {
                let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
                hi - lo
            })
        }
        "prod" => {
            flat_only(dims)?;
            TargetFunction::new(tag, GroupSpec::Symmetric(n), |x| x.iter().product())
        }
        "sum_sq" => {
            flat_only(dims)?;
            TargetFunction::new(tag, GroupSpec::Symmetric(n), |x| x.iter().map(|v| v * v).sum())
        }
        "sum" => {
            flat_only(dims)?;
            TargetFunction::new(tag, GroupSpec::Symmetric(n), |x| x.iter().sum())
        }
        "min" => {
            flat_only(dims)?;
            TargetFunction::new(tag, GroupSpec::Symmetric(n), |x| {
                x.iter().copied().fold(f64::INFINITY, f64::min)
            })
        }
        "row_sum_sq" => {
            if dims.len() != 2 {
                return Err(Error::InvalidArgument(format!("row_sum_sq needs two dims, got {dims:?}")));
            }
            let cols = dims[1];
            TargetFunction::new(tag, GroupSpec::Product(dims.to_vec()), move |x| {
                x.chunks(cols).map(|row| row.iter().sum::<f64>().powi(2)).sum()
            })
        }
        _ => Err(Error::Unknown {
            kind: "target",
            name: tag.to_string(),
        }),
    }
}

/// `x ↦ |G|⁻¹ Σ_g F(g x)`, the best `G`-invariant approximation of `F` in L².
pub fn group_average(target: &TargetFunction, group: &PermGroup) -> Result<TargetFunction> {
    if group.degree() != target.degree() {
        return Err(Error::DimensionMismatch {
            expected: target.degree(),
            got: group.degree(),
        });
    }
    let elements = group.elements().to_vec();
    let inner = target.f.clone();
    let spec = GroupSpec::Generators {
        degree: group.degree(),
        generators: group.generators().to_vec(),
    };
    TargetFunction::new(format!("avg({})", target.tag), spec, move |x| {
        let total: f64 = elements
            .iter()
            .map(|g| inner(&g.act_vector(x).expect("degree checked")))
            .sum();
        total / elements.len() as f64
    })
}

/// Inputs and target values.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
}

impl Samples {
    /// `count` points uniform on `[-kappa, kappa]^n`.
    pub fn draw(target: &TargetFunction, kappa: f64, count: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let n = target.degree();
        let xs: Vec<Vec<f64>> = (0..count)
            .map(|_| (0..n).map(|_| rng.gen_range(-kappa..=kappa)).collect())
            .collect();
        let ys = xs.iter().map(|x| target.eval(x)).collect();
        Samples { xs, ys }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn rms(&self) -> f64 {
        (self.ys.iter().map(|y| y * y).sum::<f64>() / self.ys.len() as f64).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Loss {
    pub mse: f64,
    /// `sqrt(mse) / rms(target)`.
    pub rel_err: f64,
}

fn chunk_ranges(len: usize) -> Vec<std::ops::Range<usize>> {
    (0..len).step_by(CHUNK).map(|s| s..(s + CHUNK).min(len)).collect()
}

/// Mean squared error over the samples.
pub fn loss(model: &Model, samples: &Samples) -> Result<Loss> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let partials: Vec<f64> = chunk_ranges(samples.len())
        .into_par_iter()
        .map(|r| {
            let mut acc = 0.0;
            for i in r {
                let e = forward(model, &samples.xs[i])? - samples.ys[i];
                acc += e * e;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mse = partials.iter().sum::<f64>() / samples.len() as f64;
    let rms = samples.rms();
    let rel_err = if rms > 0.0 { mse.sqrt() / rms } else { f64::NAN };
    Ok(Loss { mse, rel_err })
}

/// Loss and its gradient with respect to the flat schedule parameters.
pub fn loss_and_gradient(model: &Model, samples: &Samples) -> Result<(f64, Vec<f64>)> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let p = model.schedule.param_count();
    let partials: Vec<(f64, Vec<f64>)> = chunk_ranges(samples.len())
        .into_par_iter()
        .map(|r| {
            let mut acc = 0.0;
            let mut grad = vec![0.0; p];
            let mut ws = FlowWorkspace::default();
            let mut cot = Vec::new();
            for i in r {
                let y = ws.forward(&model.schedule, &samples.xs[i])?;
                let e = model.terminal.eval(y) - samples.ys[i];
                acc += e * e;
                cot.clear();
                cot.extend(model.terminal.gradient(y).iter().map(|g| 2.0 * e * g));
                ws.backward(&model.schedule, &cot, &mut grad)?;
            }
            Ok((acc, grad))
        })
        .collect::<Result<_>>()?;
    let scale = 1.0 / samples.len() as f64;
    let mut total = 0.0;
    let mut grad = vec![0.0; p];
    for (acc, g) in partials {
        total += acc;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((total * scale, grad))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Samples are uniform on `[-kappa, kappa]^n`.
    pub kappa: f64,
    pub train_samples: usize,
    pub test_samples: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub iterations: usize,
    pub log_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            kappa: 1.0,
            train_samples: 4096,
            test_samples: 10_000,
            learning_rate: 1e-2,
            momentum: 0.9,
            iterations: 5000,
            log_every: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return bad(format!("kappa must be positive, got {}", self.kappa));
        }
        if self.train_samples == 0 || self.test_samples == 0 {
            return bad("sample counts must be positive".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.momentum.is_finite() && (0.0..1.0).contains(&self.momentum)) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if self.log_every == 0 {
            return bad("log_every must be positive".into());
        }
        Ok(())
    }

    pub fn train_set(&self, target: &TargetFunction) -> Samples {
        Samples::draw(target, self.kappa, self.train_samples, seed::derive(self.seed, "train"))
    }

    pub fn test_set(&self, target: &TargetFunction) -> Samples {
        Samples::draw(target, self.kappa, self.test_samples, seed::derive(self.seed, "test"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub rel_err: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub rows: Vec<HistoryRow>,
}

impl History {
    pub fn last(&self) -> Option<&HistoryRow> {
        self.rows.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,train_loss,test_loss,rel_err\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e}\n",
                r.iteration, r.train_loss, r.test_loss, r.rel_err
            ));
        }
        out
    }
}

/// Full-batch gradient descent with heavy-ball momentum:
/// `m ← μ m + ∇L`, `θ ← θ − η m`.
pub fn train(model: &Model, target: &TargetFunction, config: &TrainConfig) -> Result<(Model, History)> {
    train_with_progress(model, target, config, |_| {})
}

/// [`train`] that reports every logged row as it is produced.
pub fn train_with_progress(
    model: &Model,
    target: &TargetFunction,
    config: &TrainConfig,
    mut progress: impl FnMut(&HistoryRow),
) -> Result<(Model, History)> {
    config.validate()?;
    if target.degree() != model.degree() {
        return Err(Error::DimensionMismatch {
            expected: model.degree(),
            got: target.degree(),
        });
    }
    let train_set = config.train_set(target);
    let test_set = config.test_set(target);
    let mut model = model.clone();
    let mut theta = model.schedule.flat_params();
    let mut velocity = vec![0.0; theta.len()];
    let mut history = History::default();
    for it in 0..=config.iterations {
        let (train_loss, grad) = loss_and_gradient(&model, &train_set).map_err(|e| match e {
            Error::BlowUp { .. } => Error::Diverged {
                iteration: it,
                loss: f64::INFINITY,
            },
            other => other,
        })?;
        if !train_loss.is_finite() || train_loss > DIVERGENCE_LOSS {
            return Err(Error::Diverged {
                iteration: it,
                loss: train_loss,
            });
        }
        if it % config.log_every == 0 || it == config.iterations {
            let test = loss(&model, &test_set)?;
            let row = HistoryRow {
                iteration: it,
                train_loss,
                test_loss: test.mse,
                rel_err: test.rel_err,
            };
            progress(&row);
            history.rows.push(row);
        }
        if it == config.iterations {
            break;
        }
        for ((t, v), g) in theta.iter_mut().zip(&mut velocity).zip(&grad) {
            *v = config.momentum * *v + g;
            *t -= config.learning_rate * *v;
        }
        model.schedule = model.schedule.with_flat_params(&theta)?;
    }
    Ok((model, history))
}
