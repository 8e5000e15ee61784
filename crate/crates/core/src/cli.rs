//! Batch front-end behind the `equiflow` binary: verification suites,
//! training runs, refinement studies, partition checks and run reports.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{CheckSpec, Config, ConvergeSection, Expect, FieldKind, TrainExpectation, TrainSection, TransversalChoice};
use crate::control_families::{Activation, ControlLayer, Family, LayerShape};
use crate::error::{Error, Result};
use crate::flow::{integrate, inverse_integrate, refinement_study, refinement_study_exact, Integrator, RefinementStudy, Schedule};
use crate::hypothesis::{self, HistoryRow, Model};
use crate::perm_group::{partition_check, GroupSpec, Permutation};
use crate::report::{Verdict, VerificationReport};
use crate::seed;
use crate::verify;

/// Relative error at or above which a training summary carries the
/// symmetry-obstruction flag.
pub const OBSTRUCTION_LEVEL: f64 = 0.9;
pub const SUMMARY_FILE: &str = "summary.toml";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    Failure = 1,
    Usage = 2,
}

impl Exit {
    pub fn code(self) -> u8 {
        self as u8
    }

    fn from_pass(pass: bool) -> Self {
        if pass {
            Exit::Success
        } else {
            Exit::Failure
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Verify,
    Train,
    Converge,
    Partition,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Train => "train",
            Command::Converge => "converge",
            Command::Partition => "partition",
            Command::Report => "report",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One invocation: which command, where its inputs and outputs live.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub command: Command,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub timestamp: bool,
    /// Inputs to `report`.
    pub run_dirs: Vec<PathBuf>,
}

/// Writes result files into one directory, each optionally headed by a
/// `# generated ...` line.
#[derive(Clone, Debug)]
pub struct Output {
    dir: PathBuf,
    timestamp: bool,
}

impl Output {
    pub fn new(dir: impl Into<PathBuf>, timestamp: bool) -> Self {
        Output {
            dir: dir.into(),
            timestamp,
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).map_err(|e| io_error(&self.dir, e))?;
        let path = self.dir.join(name);
        let mut text = String::new();
        if self.timestamp {
            let secs = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            text.push_str(&format!("# generated at unix time {secs}\n"));
        }
        text.push_str(contents);
        fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        Ok(path)
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidArgument(format!("{}: {e}", path.display()))
}

fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Parse(e.to_string()))
}

/// Strips `#` comment lines (the timestamp header).
fn strip_comments(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub iterations: usize,
    pub final_train_loss: f64,
    pub final_test_loss: f64,
    pub final_rel_err: f64,
    pub history: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub model: String,
    pub layers: usize,
    pub target: String,
    pub expect: Option<TrainExpectation>,
    pub threshold: Option<f64>,
    pub median_rel_err: f64,
    pub runs: Vec<RunSummary>,
}

/// The structured record every command leaves in `summary.toml`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub command: String,
    pub seed: u64,
    pub pass: bool,
    #[serde(default)]
    pub flags: Vec<String>,
    #[serde(default)]
    pub rows: Vec<SummaryRow>,
    pub train: Option<TrainSummary>,
}

impl Summary {
    fn new(command: Command, seed: u64, rows: Vec<SummaryRow>) -> Self {
        Summary {
            command: command.name().into(),
            seed,
            pass: rows.iter().all(|r| r.pass),
            flags: Vec::new(),
            rows,
            train: None,
        }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(SUMMARY_FILE);
        let text = fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
        toml::from_str(&strip_comments(&text)).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

/// Entry point for the binary; maps every outcome to an exit code.
pub fn run(spec: &ExperimentSpec) -> Exit {
    if spec.command == Command::Report {
        let out = (spec.out != Path::new("")).then(|| Output::new(&spec.out, spec.timestamp));
        return cmd_report(&spec.run_dirs, out.as_ref());
    }
    let Some(path) = &spec.config else {
        eprintln!("error: {} needs --config", spec.command);
        return Exit::Usage;
    };
    let mut config = match Config::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return Exit::Usage;
        }
    };
    if let Some(s) = spec.seed {
        config.seed = s;
        if let Some(t) = &mut config.train {
            t.seeds = Some(vec![s]);
        }
    }
    let out = Output::new(&spec.out, spec.timestamp);
    let section_missing = |name: &str| {
        eprintln!("error: {} has no [{name}] section", path.display());
        Exit::Usage
    };
    match spec.command {
        Command::Verify if config.verify.is_none() => section_missing("verify"),
        Command::Train if config.train.is_none() => section_missing("train"),
        Command::Converge if config.converge.is_none() => section_missing("converge"),
        Command::Partition if config.partition.is_none() => section_missing("partition"),
        Command::Verify => cmd_verify(&config, &out),
        Command::Train => cmd_train(&config, &out),
        Command::Converge => cmd_converge(&config, &out),
        Command::Partition => cmd_partition(&config, &out),
        Command::Report => unreachable!("handled above"),
    }
}

fn finish(result: Result<Exit>) -> Exit {
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        match e {
            Error::Parse(_) | Error::Unknown { .. } => Exit::Usage,
            _ => Exit::Failure,
        }
    })
}

/// One verification record as written to `verify_report.toml`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub expect: Expect,
    pub as_expected: bool,
    #[serde(flatten)]
    pub report: VerificationReport,
}

#[derive(Serialize, Deserialize)]
struct VerifyFile {
    seed: u64,
    checker: Vec<CheckRecord>,
}

/// Runs one configured check with its own seed.
pub fn run_check(check: &CheckSpec, seed_value: u64) -> Result<VerificationReport> {
    let group = check.group()?.map(|g| g.build()).transpose()?;
    let group = || group.as_ref().expect("check carries a group");
    match check {
        CheckSpec::LayerEquivariance { shape, samples, tol, .. } => {
            verify::check_layer_equivariance(&shape.shape()?, group(), *samples, *tol, seed_value)
        }
        CheckSpec::FlowEquivariance { shape, samples, tol, .. } => {
            verify::check_flow_equivariance(&shape.shape()?, group(), *samples, *tol, seed_value)
        }
        CheckSpec::Gradient { shape, instances, step, tol, .. } => {
            verify::check_flow_gradient(&shape.shape()?, *instances, *step, *tol, seed_value)
        }
        CheckSpec::GroupAlgebra { samples, .. } => verify::check_group_algebra(group(), *samples, seed_value),
        CheckSpec::Perturbation { shape, pairs, budget, .. } => {
            verify::check_perturbation_property(&shape.shape()?, group(), *pairs, *budget, seed_value)
        }
        CheckSpec::DirectConnectivity { shape, a, b, budget, .. } => {
            let shape = shape.shape()?;
            let n = shape.degree();
            let (a, b) = (Permutation::parse_cycles(n, a)?, Permutation::parse_cycles(n, b)?);
            Ok(verify::check_direct_connectivity(&shape, &a, &b, *budget, seed_value)?.0)
        }
        CheckSpec::Resolves { shape, pairs, budget, .. } => {
            verify::check_resolves(&shape.shape()?, group(), *pairs, *budget, seed_value)
        }
        CheckSpec::Counterexamples { schedules, .. } => verify::check_counterexamples(*schedules, seed_value),
    }
}

fn as_expected(expect: Expect, verdict: Verdict) -> bool {
    match expect {
        Expect::Pass => verdict != Verdict::Fail,
        Expect::Fail => verdict == Verdict::Fail,
    }
}

/// Runs the configured suite and explicit checks (concurrently, each on
/// its own derived seed) and writes `verify_report.toml` plus the summary.
/// Fails iff some check's verdict contradicts its expectation.
pub fn cmd_verify(config: &Config, out: &Output) -> Exit {
    finish((|| {
        let section = config.verify.as_ref().expect("checked by run");
        let mut checks: Vec<CheckSpec> = section.suite.map(|s| s.checks()).unwrap_or_default();
        checks.extend(section.checks.iter().cloned());
        let reports: Vec<VerificationReport> = checks
            .par_iter()
            .enumerate()
            .map(|(k, c)| run_check(c, seed::derive_indexed(config.seed, "check", k as u64)))
            .collect::<Result<_>>()?;
        let mut records = Vec::with_capacity(checks.len());
        let mut rows = Vec::with_capacity(checks.len());
        for (check, report) in checks.iter().zip(reports) {
            let ok = as_expected(check.expect(), report.verdict);
            let tag = match (check.expect(), ok) {
                (Expect::Fail, true) => " (expected fail)",
                (_, false) => " UNEXPECTED",
                _ => "",
            };
            println!("{}{tag}", report.summary_line());
            rows.push(SummaryRow {
                name: report.checker.clone(),
                pass: ok,
                detail: format!("verdict {}, expected {:?}", report.verdict, check.expect()).to_lowercase(),
            });
            records.push(CheckRecord {
                expect: check.expect(),
                as_expected: ok,
                report,
            });
        }
        let unexpected = rows.iter().filter(|r| !r.pass).count();
        println!("verify: {} checks, {unexpected} unexpected", rows.len());
        out.write(
            "verify_report.toml",
            &to_toml(&VerifyFile {
                seed: config.seed,
                checker: records,
            })?,
        )?;
        let summary = Summary::new(Command::Verify, config.seed, rows);
        out.write(SUMMARY_FILE, &to_toml(&summary)?)?;
        Ok(Exit::from_pass(summary.pass))
    })())
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Pass/fail of a training expectation over the per-seed final errors.
pub fn train_verdict(expect: Option<TrainExpectation>, threshold: Option<f64>, rel_errs: &[f64]) -> SummaryRow {
    let med = median(rel_errs);
    let worst_low = rel_errs.iter().copied().fold(f64::INFINITY, f64::min);
    match (expect, threshold) {
        (Some(TrainExpectation::Approximates), Some(t)) => SummaryRow {
            name: "approximates".into(),
            pass: med < t,
            detail: format!("median final rel_err {med:.4} vs < {t}"),
        },
        (Some(TrainExpectation::Obstruction), Some(t)) => SummaryRow {
            name: "obstruction".into(),
            pass: worst_low >= t,
            detail: format!("smallest final rel_err {worst_low:.4} vs >= {t}"),
        },
        _ => SummaryRow {
            name: "completed".into(),
            pass: true,
            detail: format!("median final rel_err {med:.4}"),
        },
    }
}

fn obstruction_flags(rel_errs: &[f64]) -> Vec<String> {
    if rel_errs.iter().all(|&r| r >= OBSTRUCTION_LEVEL) {
        vec![format!("symmetry obstruction: rel_err ≥ {OBSTRUCTION_LEVEL}")]
    } else {
        Vec::new()
    }
}

fn train_one(section: &TrainSection, run_seed: u64, out: &Output) -> Result<RunSummary> {
    let shape = section.shape.shape()?;
    let target = hypothesis::target(section.target_tag()?, &section.shape.dims)?;
    let model = Model::random(
        shape.family,
        &shape.dims,
        shape.activation,
        section.layers,
        section.terminal,
        section.init_scale,
        section.steps_per_unit_time,
        section.integrator,
        run_seed,
    )?;
    let optimizer = hypothesis::TrainConfig {
        seed: run_seed,
        ..section.optimizer.clone()
    };
    let every = optimizer.log_every * 10;
    let (trained, history) = hypothesis::train_with_progress(&model, &target, &optimizer, |r: &HistoryRow| {
        if !r.iteration.is_multiple_of(every) && r.iteration != optimizer.iterations {
            return;
        }
        eprintln!(
            "seed {run_seed} iter {:>6} train {:.6e} test {:.6e} rel_err {:.4}",
            r.iteration, r.train_loss, r.test_loss, r.rel_err
        );
    })?;
    let name = format!("history_seed{run_seed}.csv");
    out.write(&name, &history.to_csv())?;
    out.write(&format!("model_seed{run_seed}.toml"), &trained.schedule.to_toml()?)?;
    let last = history.last().expect("training logs iteration 0");
    Ok(RunSummary {
        seed: run_seed,
        iterations: last.iteration,
        final_train_loss: last.train_loss,
        final_test_loss: last.test_loss,
        final_rel_err: last.rel_err,
        history: name,
    })
}

/// Trains one model per seed; writes histories, trained schedules and the
/// summary. Completes with exit 0 unless training diverges; thresholds are
/// judged by `report`.
pub fn cmd_train(config: &Config, out: &Output) -> Exit {
    finish((|| {
        let section = config.train.as_ref().expect("checked by run");
        let seeds = section.seeds.clone().unwrap_or_else(|| vec![config.seed]);
        let mut runs = Vec::with_capacity(seeds.len());
        for &s in &seeds {
            let run = train_one(section, s, out)?;
            println!(
                "seed {s}: final train {:.6e} test {:.6e} rel_err {:.4}",
                run.final_train_loss, run.final_test_loss, run.final_rel_err
            );
            runs.push(run);
        }
        let rel: Vec<f64> = runs.iter().map(|r| r.final_rel_err).collect();
        let verdict = train_verdict(section.expect, section.threshold, &rel);
        let mut summary = Summary::new(Command::Train, config.seed, vec![verdict]);
        summary.flags = obstruction_flags(&rel);
        for f in &summary.flags {
            println!("{f}");
        }
        summary.train = Some(TrainSummary {
            model: format!("{} dims={:?} act={}", section.shape.family, section.shape.dims, section.shape.activation),
            layers: section.layers,
            target: section.target_tag()?.into(),
            expect: section.expect,
            threshold: section.threshold,
            median_rel_err: median(&rel),
            runs,
        });
        out.write(SUMMARY_FILE, &to_toml(&summary)?)?;
        Ok(Exit::Success)
    })())
}

fn converge_schedule(section: &ConvergeSection, integrator: Integrator, seed_value: u64) -> Result<(Schedule, Vec<f64>)> {
    let n = section.degree();
    let mut rng = seed::rng_for(seed_value, "converge");
    let x = match &section.x {
        Some(x) => x.clone(),
        None => {
            use rand::Rng as _;
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
        }
    };
    let mut s = Schedule::empty()
        .with_steps_per_unit_time(section.steps_per_unit_time)?
        .with_integrator(integrator);
    match section.field {
        FieldKind::Linear => {
            s.push(ControlLayer::new(Family::Linear, &[n], Activation::Tanh, vec![section.lambda])?, section.duration)?;
        }
        FieldKind::Family => {
            let family: Family = section.family.as_deref().expect("validated").parse()?;
            let shape = LayerShape::new(family, section.dims.as_deref().expect("validated"), section.activation.parse()?)?;
            for _ in 0..section.layers {
                s.push(shape.random(1.0, &mut rng)?, section.duration)?;
            }
        }
    }
    Ok((s, x))
}

fn study(section: &ConvergeSection, schedule: &Schedule, x: &[f64]) -> Result<RefinementStudy> {
    match section.field {
        FieldKind::Linear => {
            let growth = (section.lambda * section.duration).exp();
            let exact: Vec<f64> = x.iter().map(|v| v * growth).collect();
            refinement_study_exact(schedule, x, section.levels, &exact)
        }
        FieldKind::Family => refinement_study(schedule, x, section.levels),
    }
}

/// Refinement table per integrator, with order bands and optional
/// round-trip errors recorded in the summary.
pub fn cmd_converge(config: &Config, out: &Output) -> Exit {
    finish((|| {
        let section = config.converge.as_ref().expect("checked by run");
        let mut rows = Vec::new();
        for &integrator in &section.integrators {
            // the same field for every integrator
            let (schedule, x) = converge_schedule(section, integrator, config.seed)?;
            let st = study(section, &schedule, &x)?;
            out.write(&format!("converge_{integrator}.csv"), &st.to_csv())?;
            print!("{}", st.to_csv());
            let [lo, hi] = section.bands.for_integrator(integrator);
            let orders: Vec<f64> = st.rows.iter().filter_map(|r| r.order).collect();
            let (pass, detail) = if st.exact {
                (true, "exact: every level matches the reference".to_string())
            } else {
                let ok = !orders.is_empty() && orders.iter().all(|p| (lo..=hi).contains(p));
                let list: Vec<String> = orders.iter().map(|p| format!("{p:.4}")).collect();
                (ok, format!("orders [{}] vs [{lo}, {hi}] ({})", list.join(", "), st.reference))
            };
            rows.push(SummaryRow {
                name: format!("order_{integrator}"),
                pass,
                detail,
            });
            if let Some(rt) = &section.round_trip {
                let (steps, tol) = rt.for_integrator(integrator);
                let fine = schedule.clone().with_steps_per_unit_time(steps)?;
                let back = inverse_integrate(&fine, &integrate(&fine, &x)?.y)?;
                let err = back.iter().zip(&x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                rows.push(SummaryRow {
                    name: format!("round_trip_{integrator}"),
                    pass: err < tol,
                    detail: format!("error {err:.3e} at {steps} steps per unit time vs < {tol:e}"),
                });
            }
        }
        let summary = Summary::new(Command::Converge, config.seed, rows);
        for r in &summary.rows {
            println!("{:<20} {:<5} {}", r.name, if r.pass { "pass" } else { "FAIL" }, r.detail);
        }
        out.write(SUMMARY_FILE, &to_toml(&summary)?)?;
        Ok(Exit::Success)
    })())
}

/// Cross-section partition check; fails on any point covered other than
/// exactly once.
pub fn cmd_partition(config: &Config, out: &Output) -> Exit {
    finish((|| {
        let section = config.partition.as_ref().expect("checked by run");
        let spec: GroupSpec = section.group.parse()?;
        let group = spec.build()?;
        let transversal = match section.transversal {
            TransversalChoice::Smallest => group.right_transversal()?,
            TransversalChoice::Largest => group.alternate_transversal()?,
        };
        let report = partition_check(&group, &transversal, section.samples, config.seed)?;
        println!("{}", report.summary_line());
        let reps = if transversal.reps.len() <= 6 {
            let r: Vec<String> = transversal.reps.iter().map(|r| r.to_string()).collect();
            format!("reps {}", r.join(" "))
        } else {
            format!("{} reps", transversal.reps.len())
        };
        out.write(
            "partition_report.toml",
            &to_toml(&VerifyFile {
                seed: config.seed,
                checker: vec![CheckRecord {
                    expect: Expect::Pass,
                    as_expected: report.passed(),
                    report: report.clone(),
                }],
            })?,
        )?;
        let summary = Summary::new(
            Command::Partition,
            config.seed,
            vec![SummaryRow {
                name: format!("partition[{spec}]"),
                pass: report.passed(),
                detail: format!("{} violations over {} points; {reps}", report.violations, report.samples),
            }],
        );
        out.write(SUMMARY_FILE, &to_toml(&summary)?)?;
        Ok(Exit::from_pass(summary.pass))
    })())
}

fn history_rel_errs(dir: &Path, train: &TrainSummary) -> Result<Vec<f64>> {
    train
        .runs
        .iter()
        .map(|run| {
            let path = dir.join(&run.history);
            let text = fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
            let last = text
                .lines()
                .filter(|l| !l.starts_with('#'))
                .skip(1)
                .last()
                .ok_or_else(|| Error::Parse(format!("{}: no history rows", path.display())))?;
            last.rsplit(',')
                .next()
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| Error::Parse(format!("{}: bad row `{last}`", path.display())))
        })
        .collect()
}

/// Rows of the pass/fail matrix for one run directory.
pub fn assess_run(dir: &Path) -> Result<(Summary, Vec<SummaryRow>)> {
    if !dir.is_dir() || fs::read_dir(dir).map(|mut d| d.next().is_none()).unwrap_or(true) {
        return Err(Error::InvalidArgument(format!("{} is empty or missing", dir.display())));
    }
    let summary = Summary::load(dir)?;
    let rows = match &summary.train {
        // training thresholds are judged here from the history files
        Some(train) => {
            let rel = history_rel_errs(dir, train)?;
            vec![train_verdict(train.expect, train.threshold, &rel)]
        }
        None => summary.rows.clone(),
    };
    Ok((summary, rows))
}

#[derive(Serialize)]
struct ReportEntry {
    run: String,
    command: String,
    check: String,
    pass: bool,
    detail: String,
}

#[derive(Serialize)]
struct ReportFile {
    pass: bool,
    entry: Vec<ReportEntry>,
}

/// Prints the pass/fail matrix over run directories. Exit 2 if any
/// directory is empty or lacks a summary, 1 if any row fails.
pub fn cmd_report(run_dirs: &[PathBuf], out: Option<&Output>) -> Exit {
    if run_dirs.is_empty() {
        eprintln!("error: report needs at least one run directory");
        return Exit::Usage;
    }
    let mut entries = Vec::new();
    for dir in run_dirs {
        match assess_run(dir) {
            Ok((summary, rows)) => {
                for r in rows {
                    entries.push(ReportEntry {
                        run: dir.display().to_string(),
                        command: summary.command.clone(),
                        check: r.name,
                        pass: r.pass,
                        detail: r.detail,
                    });
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                return Exit::Usage;
            }
        }
    }
    for e in &entries {
        println!(
            "{:<28} {:<10} {:<50} {:<4} {}",
            e.run,
            e.command,
            e.check,
            if e.pass { "pass" } else { "FAIL" },
            e.detail
        );
    }
    let pass = entries.iter().all(|e| e.pass);
    if let Some(out) = out {
        let written = to_toml(&ReportFile { pass, entry: entries }).and_then(|t| out.write("report.toml", &t));
        if let Err(e) = written {
            eprintln!("error: {e}");
            return Exit::Failure;
        }
    }
    Exit::from_pass(pass)
}
