//! Experiment configuration: versioned TOML with one section per command.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control_families::{Activation, Family, LayerShape};
use crate::error::{Error, Result};
use crate::flow::Integrator;
use crate::hypothesis::{Terminal, TrainConfig, TARGET_TAGS};
use crate::perm_group::{GroupSpec, Permutation};
use crate::verify::DEFAULT_SEARCH_BUDGET;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub verify: Option<VerifySection>,
    pub train: Option<TrainSection>,
    pub converge: Option<ConvergeSection>,
    pub partition: Option<PartitionSection>,
}

/// Built-in check lists.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Default,
    Symmetry,
    Groups,
    Gradients,
    Resolvence,
    Counterexamples,
}

impl Suite {
    pub fn checks(self) -> Vec<CheckSpec> {
        match self {
            Suite::Default => [
                Suite::Symmetry,
                Suite::Groups,
                Suite::Gradients,
                Suite::Resolvence,
                Suite::Counterexamples,
            ]
            .into_iter()
            .flat_map(Suite::checks)
            .collect(),
            Suite::Symmetry => symmetry_shapes()
                .into_iter()
                .flat_map(|shape| {
                    [
                        CheckSpec::LayerEquivariance {
                            shape: shape.clone(),
                            group: None,
                            samples: d_samples(),
                            tol: d_layer_tol(),
                            expect: Expect::Pass,
                        },
                        CheckSpec::FlowEquivariance {
                            shape,
                            group: None,
                            samples: d_samples(),
                            tol: d_flow_tol(),
                            expect: Expect::Pass,
                        },
                    ]
                })
                .collect(),
            Suite::Groups => [
                "symmetric 3",
                "symmetric 4",
                "translation_1d 3",
                "translation_1d 4",
                "translation_1d 5",
                "translation_nd 2 3",
                "product 2 3",
            ]
            .into_iter()
            .map(|g| CheckSpec::GroupAlgebra {
                group: g.into(),
                samples: d_points(),
                expect: Expect::Pass,
            })
            .collect(),
            Suite::Gradients => Family::CATALOG
                .into_iter()
                .map(|f| CheckSpec::Gradient {
                    shape: ShapeSpec::new(f, &crate::control_families::default_dims(f, 4)),
                    instances: d_instances(),
                    step: d_fd_step(),
                    tol: d_fd_tol(),
                    expect: Expect::Pass,
                })
                .collect(),
            Suite::Resolvence => {
                let resolves = |f: Family, dims: &[usize], group: &str| CheckSpec::Resolves {
                    shape: ShapeSpec::new(f, dims),
                    group: Some(group.into()),
                    pairs: d_pairs(),
                    budget: d_budget(),
                    expect: Expect::Pass,
                };
                let mut v = Vec::new();
                for f in [Family::Conv1, Family::Conv2] {
                    for n in 3..=5 {
                        v.push(resolves(f, &[n], &format!("translation_1d {n}")));
                    }
                    v.push(resolves(f, &[2, 3], "translation_nd 2 3"));
                }
                for f in [Family::Fs1, Family::Fs2, Family::Janossy1, Family::Janossy2] {
                    for n in 3..=4 {
                        v.push(resolves(f, &[n], &format!("symmetric {n}")));
                    }
                }
                v.push(resolves(Family::Prod2d1, &[2, 3], "product 2 3"));
                v.push(CheckSpec::DirectConnectivity {
                    shape: ShapeSpec::new(Family::Conv1, &[3]),
                    a: "()".into(),
                    b: "(1 2)".into(),
                    budget: d_budget(),
                    expect: Expect::Pass,
                });
                v.push(resolves(Family::Gamma1, &[3], "translation_1d 3").with_expect(Expect::Fail));
                v
            }
            Suite::Counterexamples => vec![CheckSpec::Counterexamples {
                schedules: d_schedules(),
                expect: Expect::Pass,
            }],
        }
    }
}

/// Every catalog family at each size whose flattened degree is at most 6.
fn symmetry_shapes() -> Vec<ShapeSpec> {
    let mut out = Vec::new();
    for f in Family::CATALOG {
        let dims: Vec<Vec<usize>> = match f {
            Family::Prod2d1 | Family::Prod2d2 => vec![vec![2, 2], vec![2, 3], vec![3, 2]],
            Family::ProdKd1 | Family::ProdKd2 => vec![vec![2, 2], vec![2, 3], vec![1, 2, 3]],
            Family::Conv1 | Family::Conv2 => (2..=6).map(|n| vec![n]).chain([vec![2, 2], vec![2, 3]]).collect(),
            _ => (2..=6).map(|n| vec![n]).collect(),
        };
        out.extend(dims.iter().map(|d| ShapeSpec::new(f, d)));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub suite: Option<Suite>,
    #[serde(default, rename = "check")]
    pub checks: Vec<CheckSpec>,
}

/// Verdict a check is expected to reach. Expected failures still appear in
/// the report but do not affect the exit code.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expect {
    #[default]
    Pass,
    Fail,
}

/// Family, dims and activation shared by the layer-level checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSpec {
    pub family: String,
    pub dims: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: String,
}

fn default_activation() -> String {
    "tanh".into()
}

impl ShapeSpec {
    pub fn new(family: Family, dims: &[usize]) -> Self {
        ShapeSpec {
            family: family.name().into(),
            dims: dims.to_vec(),
            activation: default_activation(),
        }
    }

    pub fn shape(&self) -> Result<LayerShape> {
        LayerShape::new(self.family.parse()?, &self.dims, self.activation.parse::<Activation>()?)
    }
}

fn group_or_declared(group: &Option<String>, shape: &LayerShape) -> Result<GroupSpec> {
    match group {
        Some(g) => g.parse(),
        None => Ok(shape.declared_group()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    LayerEquivariance {
        #[serde(flatten)]
        shape: ShapeSpec,
        group: Option<String>,
        #[serde(default = "d_samples")]
        samples: usize,
        #[serde(default = "d_layer_tol")]
        tol: f64,
        #[serde(default)]
        expect: Expect,
    },
    FlowEquivariance {
        #[serde(flatten)]
        shape: ShapeSpec,
        group: Option<String>,
        #[serde(default = "d_samples")]
        samples: usize,
        #[serde(default = "d_flow_tol")]
        tol: f64,
        #[serde(default)]
        expect: Expect,
    },
    Gradient {
        #[serde(flatten)]
        shape: ShapeSpec,
        #[serde(default = "d_instances")]
        instances: usize,
        #[serde(default = "d_fd_step")]
        step: f64,
        #[serde(default = "d_fd_tol")]
        tol: f64,
        #[serde(default)]
        expect: Expect,
    },
    GroupAlgebra {
        group: String,
        #[serde(default = "d_points")]
        samples: usize,
        #[serde(default)]
        expect: Expect,
    },
    Perturbation {
        #[serde(flatten)]
        shape: ShapeSpec,
        group: Option<String>,
        #[serde(default = "d_pairs")]
        pairs: usize,
        #[serde(default = "d_budget")]
        budget: usize,
        #[serde(default)]
        expect: Expect,
    },
    DirectConnectivity {
        #[serde(flatten)]
        shape: ShapeSpec,
        /// Cycle notation, e.g. `"(1 2)"`; `"()"` is the identity.
        a: String,
        b: String,
        #[serde(default = "d_budget")]
        budget: usize,
        #[serde(default)]
        expect: Expect,
    },
    Resolves {
        #[serde(flatten)]
        shape: ShapeSpec,
        group: Option<String>,
        #[serde(default = "d_pairs")]
        pairs: usize,
        #[serde(default = "d_budget")]
        budget: usize,
        #[serde(default)]
        expect: Expect,
    },
    Counterexamples {
        #[serde(default = "d_schedules")]
        schedules: usize,
        #[serde(default)]
        expect: Expect,
    },
}

fn d_samples() -> usize {
    200
}
fn d_layer_tol() -> f64 {
    1e-12
}
fn d_flow_tol() -> f64 {
    1e-10
}
fn d_instances() -> usize {
    100
}
fn d_fd_step() -> f64 {
    1e-5
}
fn d_fd_tol() -> f64 {
    1e-5
}
fn d_points() -> usize {
    10_000
}
fn d_pairs() -> usize {
    100
}
fn d_budget() -> usize {
    DEFAULT_SEARCH_BUDGET
}
fn d_schedules() -> usize {
    50
}

impl CheckSpec {
    pub fn expect(&self) -> Expect {
        match self {
            CheckSpec::LayerEquivariance { expect, .. }
            | CheckSpec::FlowEquivariance { expect, .. }
            | CheckSpec::Gradient { expect, .. }
            | CheckSpec::GroupAlgebra { expect, .. }
            | CheckSpec::Perturbation { expect, .. }
            | CheckSpec::DirectConnectivity { expect, .. }
            | CheckSpec::Resolves { expect, .. }
            | CheckSpec::Counterexamples { expect, .. } => *expect,
        }
    }

    pub fn with_expect(mut self, value: Expect) -> Self {
        match &mut self {
            CheckSpec::LayerEquivariance { expect, .. }
            | CheckSpec::FlowEquivariance { expect, .. }
            | CheckSpec::Gradient { expect, .. }
            | CheckSpec::GroupAlgebra { expect, .. }
            | CheckSpec::Perturbation { expect, .. }
            | CheckSpec::DirectConnectivity { expect, .. }
            | CheckSpec::Resolves { expect, .. }
            | CheckSpec::Counterexamples { expect, .. } => *expect = value,
        }
        self
    }

    fn shape_spec(&self) -> Option<&ShapeSpec> {
        match self {
            CheckSpec::LayerEquivariance { shape, .. }
            | CheckSpec::FlowEquivariance { shape, .. }
            | CheckSpec::Gradient { shape, .. }
            | CheckSpec::Perturbation { shape, .. }
            | CheckSpec::DirectConnectivity { shape, .. }
            | CheckSpec::Resolves { shape, .. } => Some(shape),
            CheckSpec::GroupAlgebra { .. } | CheckSpec::Counterexamples { .. } => None,
        }
    }

    /// Resolves names and checks sizes without running anything.
    pub fn validate(&self) -> Result<()> {
        let shape = self.shape_spec().map(ShapeSpec::shape).transpose()?;
        let degree_of = |g: &GroupSpec, shape: &LayerShape| {
            if g.degree() == shape.degree() {
                Ok(())
            } else {
                Err(Error::DimensionMismatch {
                    expected: shape.degree(),
                    got: g.degree(),
                })
            }
        };
        match self {
            CheckSpec::LayerEquivariance { group, .. }
            | CheckSpec::FlowEquivariance { group, .. }
            | CheckSpec::Perturbation { group, .. }
            | CheckSpec::Resolves { group, .. } => {
                let shape = shape.expect("layer checks carry a shape");
                degree_of(&group_or_declared(group, &shape)?, &shape)
            }
            CheckSpec::GroupAlgebra { group, .. } => group.parse::<GroupSpec>().map(|_| ()),
            CheckSpec::DirectConnectivity { a, b, .. } => {
                let n = shape.expect("layer checks carry a shape").degree();
                Permutation::parse_cycles(n, a)?;
                Permutation::parse_cycles(n, b)?;
                Ok(())
            }
            CheckSpec::Gradient { step, tol, .. } if !(*step > 0.0 && *tol >= 0.0) => Err(Error::InvalidArgument(
                "gradient step must be positive and tol non-negative".into(),
            )),
            CheckSpec::Gradient { .. } | CheckSpec::Counterexamples { .. } => Ok(()),
        }
    }

    /// The group the check runs against, for checks that take one.
    pub fn group(&self) -> Result<Option<GroupSpec>> {
        match self {
            CheckSpec::LayerEquivariance { shape, group, .. }
            | CheckSpec::FlowEquivariance { shape, group, .. }
            | CheckSpec::Perturbation { shape, group, .. }
            | CheckSpec::Resolves { shape, group, .. } => Ok(Some(group_or_declared(group, &shape.shape()?)?)),
            CheckSpec::GroupAlgebra { group, .. } => Ok(Some(group.parse()?)),
            _ => Ok(None),
        }
    }
}

/// What a training run is meant to show.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainExpectation {
    /// Median final relative test error below `threshold`.
    Approximates,
    /// Every seed's final relative test error at least `threshold`.
    Obstruction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(flatten)]
    pub shape: ShapeSpec,
    pub layers: usize,
    #[serde(default)]
    pub terminal: Terminal,
    pub target: Option<String>,
    #[serde(default = "d_init_scale")]
    pub init_scale: f64,
    #[serde(default = "d_spu")]
    pub steps_per_unit_time: u32,
    #[serde(default)]
    pub integrator: Integrator,
    /// One run per seed; the top-level seed when absent.
    pub seeds: Option<Vec<u64>>,
    pub expect: Option<TrainExpectation>,
    pub threshold: Option<f64>,
    #[serde(default)]
    pub optimizer: TrainConfig,
}

fn d_init_scale() -> f64 {
    0.5
}
fn d_spu() -> u32 {
    crate::flow::DEFAULT_STEPS_PER_UNIT_TIME
}

impl TrainSection {
    pub fn target_tag(&self) -> Result<&str> {
        let tag = self
            .target
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("[train] needs a `target` tag".into()))?;
        if TARGET_TAGS.contains(&tag) {
            Ok(tag)
        } else {
            Err(Error::Unknown {
                kind: "target tag",
                name: tag.into(),
            })
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.shape.shape()?;
        self.target_tag()?;
        crate::hypothesis::target(self.target_tag()?, &self.shape.dims)?;
        if self.layers == 0 {
            return Err(Error::InvalidArgument("[train] layers must be positive".into()));
        }
        if self.steps_per_unit_time == 0 {
            return Err(Error::InvalidArgument("[train] steps_per_unit_time must be positive".into()));
        }
        if self.seeds.as_ref().is_some_and(Vec::is_empty) {
            return Err(Error::InvalidArgument("[train] seeds must not be empty".into()));
        }
        if self.expect.is_some() != self.threshold.is_some() {
            return Err(Error::InvalidArgument("[train] expect and threshold go together".into()));
        }
        self.optimizer.validate()
    }
}

/// Vector field for a refinement study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    /// `f(x) = λ x`, with the closed-form solution as reference.
    Linear,
    /// A random schedule of `layers` members of one family.
    Family,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSection {
    pub field: FieldKind,
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    pub family: Option<String>,
    pub dims: Option<Vec<usize>>,
    #[serde(default = "default_activation")]
    pub activation: String,
    #[serde(default = "d_converge_layers")]
    pub layers: usize,
    /// Flow time of the linear field, or of each family layer.
    #[serde(default = "d_duration")]
    pub duration: f64,
    /// Starting point; random in `[-1, 1]^n` when absent.
    pub x: Option<Vec<f64>>,
    #[serde(default = "d_dim")]
    pub n: usize,
    #[serde(default = "d_integrators")]
    pub integrators: Vec<Integrator>,
    #[serde(default = "d_levels")]
    pub levels: usize,
    #[serde(default = "d_base_spu")]
    pub steps_per_unit_time: u32,
    /// Order band each integrator's rows must fall in.
    #[serde(default)]
    pub bands: OrderBands,
    pub round_trip: Option<RoundTrip>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrderBands {
    pub euler: [f64; 2],
    pub rk4: [f64; 2],
}

impl Default for OrderBands {
    fn default() -> Self {
        OrderBands {
            euler: [0.8, 1.2],
            rk4: [3.5, 4.5],
        }
    }
}

impl OrderBands {
    pub fn for_integrator(&self, integrator: Integrator) -> [f64; 2] {
        match integrator {
            Integrator::Euler => self.euler,
            Integrator::Rk4 => self.rk4,
        }
    }
}

/// Forward-then-inverse integration at the given steps per unit time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoundTrip {
    pub euler_steps: u32,
    pub rk4_steps: u32,
    pub euler_tol: f64,
    pub rk4_tol: f64,
}

impl Default for RoundTrip {
    fn default() -> Self {
        RoundTrip {
            euler_steps: 1000,
            rk4_steps: 100,
            euler_tol: 1e-3,
            rk4_tol: 1e-9,
        }
    }
}

impl RoundTrip {
    pub fn for_integrator(&self, integrator: Integrator) -> (u32, f64) {
        match integrator {
            Integrator::Euler => (self.euler_steps, self.euler_tol),
            Integrator::Rk4 => (self.rk4_steps, self.rk4_tol),
        }
    }
}

fn d_lambda() -> f64 {
    -1.0
}
fn d_converge_layers() -> usize {
    3
}
fn d_duration() -> f64 {
    1.0
}
fn d_dim() -> usize {
    3
}
fn d_integrators() -> Vec<Integrator> {
    vec![Integrator::Euler, Integrator::Rk4]
}
fn d_levels() -> usize {
    4
}
fn d_base_spu() -> u32 {
    10
}

impl ConvergeSection {
    pub fn degree(&self) -> usize {
        match (&self.x, &self.dims) {
            (Some(x), _) => x.len(),
            (None, Some(d)) if self.field == FieldKind::Family => d.iter().product(),
            _ => self.n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("[converge] {m}")));
        if self.levels < 2 {
            return bad("levels must be at least 2");
        }
        if self.integrators.is_empty() {
            return bad("integrators must not be empty");
        }
        if !(self.duration.is_finite() && self.duration > 0.0) || !self.lambda.is_finite() {
            return bad("duration must be positive and lambda finite");
        }
        if self.steps_per_unit_time == 0 || self.degree() == 0 {
            return bad("steps_per_unit_time and the dimension must be positive");
        }
        if self.field == FieldKind::Family {
            let (Some(family), Some(dims)) = (&self.family, &self.dims) else {
                return bad("field = \"family\" needs `family` and `dims`");
            };
            LayerShape::new(family.parse()?, dims, self.activation.parse()?)?;
            if self.layers == 0 {
                return bad("layers must be positive");
            }
            if self.x.as_ref().is_some_and(|x| x.len() != self.degree()) {
                return bad("x must match the dims");
            }
        }
        Ok(())
    }
}

/// Which coset representatives to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransversalChoice {
    #[default]
    Smallest,
    Largest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSection {
    pub group: String,
    #[serde(default = "d_points")]
    pub samples: usize,
    #[serde(default)]
    pub transversal: TransversalChoice,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
        Config::parse(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if let Some(v) = &self.verify {
            if v.suite.is_none() && v.checks.is_empty() {
                return Err(Error::InvalidArgument("[verify] needs a suite or at least one [[verify.check]]".into()));
            }
            v.checks.iter().try_for_each(CheckSpec::validate)?;
        }
        if let Some(t) = &self.train {
            t.validate()?;
        }
        if let Some(c) = &self.converge {
            c.validate()?;
        }
        if let Some(p) = &self.partition {
            p.group.parse::<GroupSpec>()?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_section() {
        let c = Config::parse(
            r#"
schema_version = 1
seed = 9

[verify]
suite = "resolvence"

[[verify.check]]
kind = "resolves"
family = "gamma1"
dims = [3]
group = "translation_1d 3"
expect = "fail"

[train]
family = "conv1"
dims = [3]
layers = 2
target = "t3_antisym"
seeds = [1, 2]
expect = "approximates"
threshold = 0.5

[train.optimizer]
iterations = 10

[converge]
field = "linear"
lambda = -2.0

[partition]
group = "translation_1d 3"
"#,
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        let v = c.verify.as_ref().unwrap();
        assert_eq!(v.checks[0].expect(), Expect::Fail);
        assert_eq!(c.train.as_ref().unwrap().optimizer.iterations, 10);
        assert_eq!(c.train.as_ref().unwrap().optimizer.learning_rate, 1e-2);
        assert_eq!(c.converge.as_ref().unwrap().levels, 4);
        assert_eq!(Config::parse(&c.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn suites_validate() {
        let all = Suite::Default.checks();
        assert!(all.iter().all(|c| c.validate().is_ok()));
        let fails: Vec<_> = all.iter().filter(|c| c.expect() == Expect::Fail).collect();
        assert_eq!(fails.len(), 1);
        assert!(symmetry_shapes().iter().all(|s| s.shape().unwrap().degree() <= 6));
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "schema_version = 2",
            "schema_version = 1\nbogus = 1",
            "schema_version = 1\n[train]\nfamily = \"conv1\"\ndims = [3]\nlayers = 2",
            "schema_version = 1\n[train]\nfamily = \"conv1\"\ndims = [3]\nlayers = 2\ntarget = \"nope\"",
            "schema_version = 1\n[verify]\n[[verify.check]]\nkind = \"resolves\"\nfamily = \"fs1\"\ndims = [3]\ngroup = \"symmetric 4\"",
            "schema_version = 1\n[partition]\ngroup = \"wallpaper 3\"",
            "schema_version = 1\n[converge]\nfield = \"family\"",
            "schema_version = 1\n[verify]",
            "schema_version = 1\n[verify]\n[[verify.check]]\nkind = \"resolves\"\nfamily = \"fs1\"\ndims = [3]\nbogus = 1",
            "schema_version = 1\n[train]\nfamily = \"conv1\"\ndims = [3]\nlayers = 2\ntarget = \"sum\"\nbogus = 1",
        ] {
            assert!(Config::parse(text).is_err(), "{text}");
        }
    }
}
