//! Discrete flow maps of piecewise-constant controls.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::control_families::ControlLayer;
use crate::error::{Error, Result};

pub const DEFAULT_STEPS_PER_UNIT_TIME: u32 = 100;
/// States with `‖x‖∞` above this abort integration.
pub const BLOWUP_NORM: f64 = 1e8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Euler,
    Rk4,
}

impl Integrator {
    pub fn name(self) -> &'static str {
        match self {
            Integrator::Euler => "euler",
            Integrator::Rk4 => "rk4",
        }
    }

    pub fn order(self) -> u32 {
        match self {
            Integrator::Euler => 1,
            Integrator::Rk4 => 4,
        }
    }
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Integrator::Euler),
            "rk4" => Ok(Integrator::Rk4),
            _ => Err(Error::Unknown {
                kind: "integrator",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub layer: ControlLayer,
    pub duration: f64,
}

/// An element of the attainable set: run each layer's field for its duration,
/// in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleRecord", into = "ScheduleRecord")]
pub struct Schedule {
    segments: Vec<Segment>,
    steps_per_unit_time: u32,
    integrator: Integrator,
}

#[derive(Serialize, Deserialize)]
struct ScheduleRecord {
    integrator: Integrator,
    steps_per_unit_time: u32,
    #[serde(default)]
    segments: Vec<SegmentRecord>,
}

#[derive(Serialize, Deserialize)]
struct SegmentRecord {
    layer: String,
    duration: f64,
}

impl From<Schedule> for ScheduleRecord {
    fn from(s: Schedule) -> Self {
        ScheduleRecord {
            integrator: s.integrator,
            steps_per_unit_time: s.steps_per_unit_time,
            segments: s
                .segments
                .iter()
                .map(|seg| SegmentRecord {
                    layer: seg.layer.to_string(),
                    duration: seg.duration,
                })
                .collect(),
        }
    }
}

impl TryFrom<ScheduleRecord> for Schedule {
    type Error = Error;

    fn try_from(r: ScheduleRecord) -> Result<Self> {
        let mut s = Schedule::empty()
            .with_steps_per_unit_time(r.steps_per_unit_time)?
            .with_integrator(r.integrator);
        for seg in r.segments {
            s.push(seg.layer.parse()?, seg.duration)?;
        }
        Ok(s)
    }
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::empty()
    }
}

impl Schedule {
    pub fn empty() -> Self {
        Schedule {
            segments: Vec::new(),
            steps_per_unit_time: DEFAULT_STEPS_PER_UNIT_TIME,
            integrator: Integrator::Euler,
        }
    }

    pub fn new(
        segments: Vec<(ControlLayer, f64)>,
        steps_per_unit_time: u32,
        integrator: Integrator,
    ) -> Result<Self> {
        let mut s = Schedule::empty()
            .with_steps_per_unit_time(steps_per_unit_time)?
            .with_integrator(integrator);
        for (layer, duration) in segments {
            s.push(layer, duration)?;
        }
        Ok(s)
    }

    pub fn with_steps_per_unit_time(mut self, spu: u32) -> Result<Self> {
        if spu == 0 {
            return Err(Error::InvalidArgument(
                "steps_per_unit_time must be positive".into(),
            ));
        }
        self.steps_per_unit_time = spu;
        Ok(self)
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn push(&mut self, layer: ControlLayer, duration: f64) -> Result<()> {
        if !duration.is_finite() || duration < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "segment duration must be finite and >= 0, got {duration}"
            )));
        }
        if let Some(first) = self.segments.first() {
            if first.layer.degree() != layer.degree() {
                return Err(Error::DimensionMismatch {
                    expected: first.layer.degree(),
                    got: layer.degree(),
                });
            }
            if first.layer.declared_group() != layer.declared_group() {
                return Err(Error::InvalidArgument(format!(
                    "segment group {} differs from schedule group {}",
                    layer.declared_group(),
                    first.layer.declared_group()
                )));
            }
        }
        self.segments.push(Segment { layer, duration });
        Ok(())
    }

    /// `other` after `self`.
    pub fn then(&self, other: &Schedule) -> Result<Schedule> {
        let mut out = self.clone();
        for seg in &other.segments {
            out.push(seg.layer.clone(), seg.duration)?;
        }
        Ok(out)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.segments.first().map(|s| s.layer.degree())
    }

    pub fn steps_per_unit_time(&self) -> u32 {
        self.steps_per_unit_time
    }

    pub fn integrator(&self) -> Integrator {
        self.integrator
    }

    /// Substeps taken for a segment of this duration.
    pub fn substeps(&self, duration: f64) -> usize {
        (duration * f64::from(self.steps_per_unit_time)).ceil() as usize
    }

    pub fn total_steps(&self) -> usize {
        self.segments.iter().map(|s| self.substeps(s.duration)).sum()
    }

    pub fn param_count(&self) -> usize {
        self.segments.iter().map(|s| s.layer.params().len()).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.segments
            .iter()
            .flat_map(|s| s.layer.params().iter().copied())
            .collect()
    }

    /// Same schedule with the concatenated parameter vector replaced.
    pub fn with_flat_params(&self, flat: &[f64]) -> Result<Schedule> {
        if flat.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let mut out = self.clone();
        let mut offset = 0;
        for seg in &mut out.segments {
            let k = seg.layer.params().len();
            seg.layer = seg.layer.with_params(flat[offset..offset + k].to_vec())?;
            offset += k;
        }
        Ok(out)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if let Some(n) = self.degree() {
            if n != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: x.len(),
                });
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("initial state {x:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowResult {
    pub y: Vec<f64>,
    /// Every state including the initial one, when requested.
    pub trajectory: Option<Vec<Vec<f64>>>,
    pub steps: usize,
}

fn check_step(t: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "step size must be finite and >= 0, got {t}"
        )));
    }
    Ok(())
}

/// `x + t f(x)`.
pub fn euler_step(layer: &ControlLayer, x: &[f64], t: f64) -> Result<Vec<f64>> {
    check_step(t)?;
    let mut y = x.to_vec();
    let fx = layer.eval(x)?;
    for (yi, fi) in y.iter_mut().zip(fx) {
        *yi += t * fi;
    }
    Ok(y)
}

/// Classical four-stage Runge-Kutta step.
pub fn rk4_step(layer: &ControlLayer, x: &[f64], t: f64) -> Result<Vec<f64>> {
    check_step(t)?;
    if x.len() != layer.degree() {
        return Err(Error::DimensionMismatch {
            expected: layer.degree(),
            got: x.len(),
        });
    }
    let mut scratch = Scratch::new(x.len());
    let mut y = x.to_vec();
    step_in_place(Integrator::Rk4, layer, &mut y, t, &mut scratch);
    Ok(y)
}

struct Scratch {
    k: [Vec<f64>; 4],
    u: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            k: std::array::from_fn(|_| vec![0.0; n]),
            u: vec![0.0; n],
        }
    }
}

fn axpy_into(out: &mut [f64], x: &[f64], h: f64, k: &[f64]) {
    for ((o, &xi), &ki) in out.iter_mut().zip(x).zip(k) {
        *o = xi + h * ki;
    }
}

/// One step of signed size `h` (negative for the inverse flow).
fn step_in_place(integrator: Integrator, layer: &ControlLayer, x: &mut [f64], h: f64, s: &mut Scratch) {
    match integrator {
        Integrator::Euler => {
            layer.eval_into(x, &mut s.k[0]);
            for (xi, ki) in x.iter_mut().zip(&s.k[0]) {
                *xi += h * ki;
            }
        }
        Integrator::Rk4 => {
            let [k1, k2, k3, k4] = &mut s.k;
            layer.eval_into(x, k1);
            axpy_into(&mut s.u, x, h / 2.0, k1);
            layer.eval_into(&s.u, k2);
            axpy_into(&mut s.u, x, h / 2.0, k2);
            layer.eval_into(&s.u, k3);
            axpy_into(&mut s.u, x, h, k3);
            layer.eval_into(&s.u, k4);
            for i in 0..x.len() {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }
}

fn guard(x: &[f64], step: usize) -> Result<()> {
    let mut norm: f64 = 0.0;
    for &v in x {
        if !v.is_finite() {
            return Err(Error::BlowUp {
                step,
                norm: f64::INFINITY,
            });
        }
        norm = norm.max(v.abs());
    }
    if norm > BLOWUP_NORM {
        return Err(Error::BlowUp { step, norm });
    }
    Ok(())
}

fn run(schedule: &Schedule, x: &[f64], sign: f64, keep: bool) -> Result<FlowResult> {
    schedule.check_input(x)?;
    let mut state = x.to_vec();
    let mut trajectory = keep.then(|| vec![state.clone()]);
    let mut scratch = Scratch::new(x.len());
    let mut steps = 0;
    let ordered: Box<dyn Iterator<Item = &Segment>> = if sign > 0.0 {
        Box::new(schedule.segments.iter())
    } else {
        Box::new(schedule.segments.iter().rev())
    };
    for seg in ordered {
        let m = schedule.substeps(seg.duration);
        if m == 0 {
            continue;
        }
        let h = sign * seg.duration / m as f64;
        for _ in 0..m {
            step_in_place(schedule.integrator, &seg.layer, &mut state, h, &mut scratch);
            steps += 1;
            guard(&state, steps)?;
            if let Some(t) = trajectory.as_mut() {
                t.push(state.clone());
            }
        }
    }
    Ok(FlowResult {
        y: state,
        trajectory,
        steps,
    })
}

/// The discrete flow map of the schedule applied to `x`.
pub fn integrate(schedule: &Schedule, x: &[f64]) -> Result<FlowResult> {
    run(schedule, x, 1.0, false)
}

pub fn integrate_with_trajectory(schedule: &Schedule, x: &[f64]) -> Result<FlowResult> {
    run(schedule, x, 1.0, true)
}

/// Runs the negated fields over the segments in reverse order.
pub fn inverse_integrate(schedule: &Schedule, y: &[f64]) -> Result<Vec<f64>> {
    Ok(run(schedule, y, -1.0, false)?.y)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub steps_per_unit_time: u32,
    pub total_steps: usize,
    pub error: f64,
    pub order: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementStudy {
    pub integrator: Integrator,
    /// `exact_solution` when a closed form was supplied, `successive_differences` otherwise.
    pub reference: String,
    pub rows: Vec<RefinementRow>,
    /// All errors vanished.
    pub exact: bool,
}

impl RefinementStudy {
    /// Order estimate at the finest pair of levels.
    pub fn observed_order(&self) -> Option<f64> {
        self.rows.iter().rev().find_map(|r| r.order)
    }

    pub fn errors_decrease(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].error < w[0].error)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("integrator,steps_per_unit_time,total_steps,error,order\n");
        for r in &self.rows {
            let order = match (self.exact, r.order) {
                (true, _) => "exact".to_string(),
                (false, Some(p)) => format!("{p:.6}"),
                (false, None) => String::new(),
            };
            out.push_str(&format!(
                "{},{},{},{:.6e},{}\n",
                self.integrator, r.steps_per_unit_time, r.total_steps, r.error, order
            ));
        }
        out
    }
}

fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn solve_levels(schedule: &Schedule, x: &[f64], levels: usize) -> Result<Vec<(u32, FlowResult)>> {
    if levels < 2 {
        return Err(Error::InvalidArgument("refinement needs at least 2 levels".into()));
    }
    let mut out = Vec::with_capacity(levels);
    let mut spu = schedule.steps_per_unit_time;
    for _ in 0..levels {
        let s = schedule.clone().with_steps_per_unit_time(spu)?;
        out.push((spu, integrate(&s, x)?));
        spu = spu
            .checked_mul(2)
            .ok_or_else(|| Error::InvalidArgument("too many refinement levels".into()))?;
    }
    Ok(out)
}

fn finish_study(schedule: &Schedule, reference: &str, solved: &[(u32, FlowResult)], errors: Vec<f64>) -> RefinementStudy {
    let exact = errors.iter().all(|&e| e == 0.0);
    let mut rows: Vec<RefinementRow> = errors
        .iter()
        .zip(solved)
        .map(|(&error, (spu, r))| RefinementRow {
            steps_per_unit_time: *spu,
            total_steps: r.steps,
            error,
            order: None,
        })
        .collect();
    if !exact {
        for i in 1..rows.len() {
            let (prev, cur) = (rows[i - 1].error, rows[i].error);
            if prev > 0.0 && cur > 0.0 {
                rows[i].order = Some((prev / cur).log2());
            }
        }
    }
    RefinementStudy {
        integrator: schedule.integrator,
        reference: reference.to_string(),
        rows,
        exact,
    }
}

/// Integrates at `N, 2N, 4N, …` steps per unit time (`N` from the schedule)
/// and estimates the order from successive differences
/// `‖y_N − y_2N‖ / ‖y_2N − y_4N‖`, so `levels` solves yield `levels − 1` rows.
pub fn refinement_study(schedule: &Schedule, x: &[f64], levels: usize) -> Result<RefinementStudy> {
    let solved = solve_levels(schedule, x, levels)?;
    let errors = solved
        .windows(2)
        .map(|w| inf_dist(&w[0].1.y, &w[1].1.y))
        .collect();
    Ok(finish_study(schedule, "successive_differences", &solved, errors))
}

/// Same levels as [`refinement_study`], measured against a known solution.
pub fn refinement_study_exact(
    schedule: &Schedule,
    x: &[f64],
    levels: usize,
    exact_solution: &[f64],
) -> Result<RefinementStudy> {
    if exact_solution.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: exact_solution.len(),
        });
    }
    let solved = solve_levels(schedule, x, levels)?;
    let errors = solved.iter().map(|(_, r)| inf_dist(&r.y, exact_solution)).collect();
    Ok(finish_study(schedule, "exact_solution", &solved, errors))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowGradient {
    /// One gradient per segment, laid out like that segment's parameters.
    pub params: Vec<Vec<f64>>,
    pub x: Vec<f64>,
}

impl FlowGradient {
    pub fn flat_params(&self) -> Vec<f64> {
        self.params.iter().flatten().copied().collect()
    }
}

/// Reverse-mode gradient of `⟨cotangent, integrate(schedule, x).y⟩` through
/// the discrete scheme.
pub fn flow_vjp(schedule: &Schedule, x: &[f64], cotangent: &[f64]) -> Result<FlowGradient> {
    Ok(flow_vjp_with_output(schedule, x, cotangent)?.0)
}

/// [`flow_vjp`] that also hands back the forward result.
pub fn flow_vjp_with_output(
    schedule: &Schedule,
    x: &[f64],
    cotangent: &[f64],
) -> Result<(FlowGradient, Vec<f64>)> {
    let mut ws = FlowWorkspace::default();
    let y = ws.forward(schedule, x)?.to_vec();
    let mut flat = vec![0.0; schedule.param_count()];
    let gx = ws.backward(schedule, cotangent, &mut flat)?.to_vec();
    let mut params = Vec::with_capacity(schedule.len());
    let mut offset = 0;
    for seg in &schedule.segments {
        let k = seg.layer.params().len();
        params.push(flat[offset..offset + k].to_vec());
        offset += k;
    }
    Ok((FlowGradient { params, x: gx }, y))
}

/// Buffers for repeated forward and backward sweeps, so that training loops
/// do not allocate per sample.
#[derive(Default)]
pub struct FlowWorkspace {
    n: usize,
    /// Every state of the last forward sweep, flattened.
    states: Vec<f64>,
    /// Per-step layer records for the Euler backward sweep.
    tapes: Vec<f64>,
    bar: Vec<f64>,
    next: Vec<f64>,
    g: Vec<f64>,
    k: [Vec<f64>; 4],
    kbar: [Vec<f64>; 4],
    u: [Vec<f64>; 3],
}

impl FlowWorkspace {
    fn resize(&mut self, n: usize) {
        if self.n == n && !self.bar.is_empty() {
            return;
        }
        self.n = n;
        for v in [&mut self.bar, &mut self.next, &mut self.g]
            .into_iter()
            .chain(self.k.iter_mut())
            .chain(self.kbar.iter_mut())
            .chain(self.u.iter_mut())
        {
            v.clear();
            v.resize(n, 0.0);
        }
    }

    /// Integrates with checkpoints and returns the terminal state.
    pub fn forward(&mut self, schedule: &Schedule, x: &[f64]) -> Result<&[f64]> {
        schedule.check_input(x)?;
        let n = x.len();
        self.resize(n);
        self.states.clear();
        self.states.extend_from_slice(x);
        self.tapes.clear();
        let mut scratch = Scratch {
            k: std::mem::take(&mut self.k),
            u: std::mem::take(&mut self.g),
        };
        let mut state = std::mem::take(&mut self.next);
        state.copy_from_slice(x);
        let mut steps = 0;
        let mut outcome = Ok(());
        'outer: for seg in &schedule.segments {
            let m = schedule.substeps(seg.duration);
            let h = seg.duration / m.max(1) as f64;
            let tape_len = seg.layer.tape_len();
            for _ in 0..m {
                if schedule.integrator == Integrator::Euler {
                    let start = self.tapes.len();
                    self.tapes.resize(start + tape_len, 0.0);
                    let k = &mut scratch.k[0];
                    seg.layer.eval_taped(&state, k, &mut self.tapes[start..]);
                    for (xi, ki) in state.iter_mut().zip(k.iter()) {
                        *xi += h * ki;
                    }
                } else {
                    step_in_place(schedule.integrator, &seg.layer, &mut state, h, &mut scratch);
                }
                steps += 1;
                if let Err(e) = guard(&state, steps) {
                    outcome = Err(e);
                    break 'outer;
                }
                self.states.extend_from_slice(&state);
            }
        }
        self.k = scratch.k;
        self.g = scratch.u;
        self.next = state;
        outcome?;
        Ok(&self.states[self.states.len() - n..])
    }

    /// Gradient of `⟨cotangent, y⟩` through the last forward sweep. Parameter
    /// gradients are added to `grad_params` (flat schedule layout); the input
    /// gradient is returned.
    pub fn backward(&mut self, schedule: &Schedule, cotangent: &[f64], grad_params: &mut [f64]) -> Result<&[f64]> {
        let n = self.n;
        if cotangent.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: cotangent.len(),
            });
        }
        if grad_params.len() != schedule.param_count() {
            return Err(Error::DimensionMismatch {
                expected: schedule.param_count(),
                got: grad_params.len(),
            });
        }
        self.bar.copy_from_slice(cotangent);
        let mut cursor = self.states.len() / n - 1;
        let mut offset = grad_params.len();
        let mut tape_end = self.tapes.len();
        for seg in schedule.segments.iter().rev() {
            let np = seg.layer.params().len();
            offset -= np;
            let m = schedule.substeps(seg.duration);
            if m == 0 {
                continue;
            }
            let h = seg.duration / m as f64;
            let gp = &mut grad_params[offset..offset + np];
            for _ in 0..m {
                cursor -= 1;
                let xk = &self.states[cursor * n..(cursor + 1) * n];
                self.next.copy_from_slice(&self.bar);
                match schedule.integrator {
                    Integrator::Euler => {
                        for (c, b) in self.g.iter_mut().zip(&self.bar) {
                            *c = h * b;
                        }
                        let tape_len = seg.layer.tape_len();
                        tape_end -= tape_len;
                        let tape = &self.tapes[tape_end..tape_end + tape_len];
                        seg.layer.vjp_taped(xk, tape, &self.g, gp, &mut self.next);
                    }
                    Integrator::Rk4 => self.rk4_backward(&seg.layer, cursor, h, gp),
                }
                std::mem::swap(&mut self.bar, &mut self.next);
            }
        }
        if self.bar.iter().chain(grad_params.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("flow gradient".into()));
        }
        Ok(&self.bar)
    }

    /// One RK4 step backwards: stages are recomputed from the checkpoint,
    /// then `k̄4, k̄3, k̄2, k̄1` are propagated in turn.
    fn rk4_backward(&mut self, layer: &ControlLayer, cursor: usize, h: f64, gp: &mut [f64]) {
        let n = self.n;
        let x = &self.states[cursor * n..(cursor + 1) * n];
        let [u2, u3, u4] = &mut self.u;
        let [k1, k2, k3, _] = &mut self.k;
        layer.eval_into(x, k1);
        axpy_into(u2, x, h / 2.0, k1);
        layer.eval_into(u2, k2);
        axpy_into(u3, x, h / 2.0, k2);
        layer.eval_into(u3, k3);
        axpy_into(u4, x, h, k3);
        for (i, &b) in self.bar.iter().enumerate() {
            self.kbar[0][i] = h / 6.0 * b;
            self.kbar[1][i] = h / 3.0 * b;
            self.kbar[2][i] = h / 3.0 * b;
            self.kbar[3][i] = h / 6.0 * b;
        }
        let stages: [(&[f64], usize, f64); 4] = [(u4, 3, h), (u3, 2, h / 2.0), (u2, 1, h / 2.0), (x, 0, 0.0)];
        for (u, k, feed) in stages {
            self.g.fill(0.0);
            layer.vjp_accumulate(u, &self.kbar[k], gp, &mut self.g);
            for i in 0..n {
                self.next[i] += self.g[i];
            }
            if k > 0 {
                for i in 0..n {
                    self.kbar[k - 1][i] += feed * self.g[i];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control_families::{default_dims, Activation, Family};
    use crate::seed;
    use rand::Rng as _;

    fn linear(lambda: f64, n: usize) -> ControlLayer {
        ControlLayer::new(Family::Linear, &[n], Activation::Tanh, vec![lambda]).unwrap()
    }

    fn zero_field(n: usize) -> ControlLayer {
        ControlLayer::new(Family::Fs1, &[n], Activation::Tanh, vec![0.0, 0.3, 0.2, 0.1]).unwrap()
    }

    #[test]
    fn euler_step_examples() {
        assert_eq!(euler_step(&linear(1.0, 1), &[1.0], 0.1).unwrap(), vec![1.1]);
        assert_eq!(euler_step(&linear(1.0, 2), &[1.0, 2.0], 0.0).unwrap(), vec![1.0, 2.0]);
        assert_eq!(euler_step(&zero_field(3), &[1.0, 2.0, 3.0], 7.0).unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(euler_step(&linear(1.0, 1), &[1.0], -0.1).is_err());
    }

    #[test]
    fn rk4_step_examples() {
        let e = std::f64::consts::E;
        let one = rk4_step(&linear(1.0, 1), &[1.0], 1.0).unwrap()[0];
        assert!((one - e).abs() < 1e-2);
        let s = Schedule::new(vec![(linear(1.0, 1), 1.0)], 100, Integrator::Rk4).unwrap();
        assert!((integrate(&s, &[1.0]).unwrap().y[0] - e).abs() < 1e-8);
        assert_eq!(rk4_step(&linear(1.0, 1), &[1.0], 0.0).unwrap(), vec![1.0]);
    }

    #[test]
    fn rk4_agrees_with_euler_to_second_order() {
        let mut rng = seed::rng(3);
        let l = ControlLayer::random(Family::Fs2, &[4], Activation::Tanh, 1.0, &mut rng).unwrap();
        let x = [0.2, -0.4, 0.7, 0.1];
        let gap = |t: f64| {
            let a = euler_step(&l, &x, t).unwrap();
            let b = rk4_step(&l, &x, t).unwrap();
            inf_dist(&a, &b)
        };
        let ratio = gap(1e-2) / gap(5e-3);
        assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn empty_and_zero_schedules_are_identity() {
        let x = [1.0, 2.0, 3.0];
        let r = integrate(&Schedule::empty(), &x).unwrap();
        assert_eq!(r.y, x.to_vec());
        assert_eq!(r.steps, 0);
        let s = Schedule::new(vec![(zero_field(3), 2.5)], 100, Integrator::Rk4).unwrap();
        assert_eq!(integrate(&s, &x).unwrap().y, x.to_vec());
        assert_eq!(inverse_integrate(&s, &x).unwrap(), x.to_vec());
    }

    #[test]
    fn substeps_round_up() {
        let s = Schedule::empty().with_steps_per_unit_time(10).unwrap();
        assert_eq!(s.substeps(1.0), 10);
        assert_eq!(s.substeps(0.25), 3);
        assert_eq!(s.substeps(0.0), 0);
    }

    #[test]
    fn schedule_validation() {
        let mut s = Schedule::empty();
        assert!(s.push(linear(1.0, 2), -1.0).is_err());
        assert!(s.push(linear(1.0, 2), f64::NAN).is_err());
        s.push(linear(1.0, 2), 1.0).unwrap();
        assert!(s.push(linear(1.0, 3), 1.0).is_err());
        let conv = ControlLayer::new(Family::Conv1, &[2], Activation::Tanh, vec![0.0; 4]).unwrap();
        assert!(s.push(conv, 1.0).is_err());
        assert!(Schedule::empty().with_steps_per_unit_time(0).is_err());
        assert!(integrate(&s, &[1.0]).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        let s = Schedule::new(vec![(linear(100.0, 1), 1.0)], 10, Integrator::Euler).unwrap();
        match integrate(&s, &[1.0]) {
            Err(Error::BlowUp { step, .. }) => assert!(step > 1 && step <= 10),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn linear_round_trips() {
        let euler = Schedule::new(vec![(linear(1.0, 1), 1.0)], 1000, Integrator::Euler).unwrap();
        let y = integrate(&euler, &[1.0]).unwrap().y;
        let back = inverse_integrate(&euler, &y).unwrap();
        assert!((back[0] - 1.0).abs() < 1e-3);
        let rk4 = euler.clone().with_steps_per_unit_time(100).unwrap().with_integrator(Integrator::Rk4);
        let y = integrate(&rk4, &[1.0]).unwrap().y;
        let back = inverse_integrate(&rk4, &y).unwrap();
        assert!((back[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn refinement_orders_on_linear_benchmark() {
        let e = std::f64::consts::E;
        let s = Schedule::new(vec![(linear(1.0, 1), 1.0)], 10, Integrator::Euler).unwrap();
        let study = refinement_study_exact(&s, &[1.0], 4, &[e]).unwrap();
        let p = study.observed_order().unwrap();
        assert!((0.8..=1.2).contains(&p), "{p}");
        assert!(study.errors_decrease());
        let s = s.with_steps_per_unit_time(4).unwrap().with_integrator(Integrator::Rk4);
        let study = refinement_study_exact(&s, &[1.0], 4, &[e]).unwrap();
        let p = study.observed_order().unwrap();
        assert!((3.5..=4.5).contains(&p), "{p}");
        assert!(study.errors_decrease());
    }

    #[test]
    fn refinement_without_reference_on_tanh_layers() {
        let mut rng = seed::rng(17);
        let mut s = Schedule::empty().with_steps_per_unit_time(8).unwrap();
        for _ in 0..3 {
            s.push(ControlLayer::random(Family::Fs1, &[3], Activation::Tanh, 1.0, &mut rng).unwrap(), 1.0)
                .unwrap();
        }
        let x = [0.3, -0.5, 0.9];
        let p = refinement_study(&s, &x, 5).unwrap().observed_order().unwrap();
        assert!((0.8..=1.2).contains(&p), "{p}");
        let s = s.with_integrator(Integrator::Rk4).with_steps_per_unit_time(2).unwrap();
        let p = refinement_study(&s, &x, 5).unwrap().observed_order().unwrap();
        assert!((3.5..=4.5).contains(&p), "{p}");
    }

    #[test]
    fn zero_field_study_is_exact() {
        let s = Schedule::new(vec![(zero_field(3), 1.0)], 10, Integrator::Euler).unwrap();
        let study = refinement_study(&s, &[1.0, 2.0, 3.0], 4).unwrap();
        assert!(study.exact);
        assert!(study.rows.iter().all(|r| r.error == 0.0));
        assert!(study.to_csv().lines().skip(1).all(|l| l.ends_with("exact")));
    }

    #[test]
    fn composition_is_exact() {
        let mut rng = seed::rng(4);
        for integrator in [Integrator::Euler, Integrator::Rk4] {
            let mk = |rng: &mut seed::Rng| {
                let mut s = Schedule::empty().with_steps_per_unit_time(7).unwrap().with_integrator(integrator);
                for _ in 0..2 {
                    let l = ControlLayer::random(Family::Janossy1, &[4], Activation::Tanh, 1.0, rng).unwrap();
                    s.push(l, rng.gen_range(0.1..1.5)).unwrap();
                }
                s
            };
            let (a, b) = (mk(&mut rng), mk(&mut rng));
            let x = [0.1, 0.5, -0.3, 0.8];
            let two = integrate(&b, &integrate(&a, &x).unwrap().y).unwrap().y;
            let one = integrate(&a.then(&b).unwrap(), &x).unwrap().y;
            assert_eq!(one, two);
        }
    }

    #[test]
    fn single_euler_step_vjp_by_hand() {
        let l = ControlLayer::new(Family::Fs1, &[3], Activation::Tanh, vec![0.7, -0.3, 0.4, 0.1]).unwrap();
        let t = 0.25;
        let s = Schedule::new(vec![(l.clone(), t)], 4, Integrator::Euler).unwrap();
        let x = [0.3, -0.2, 0.5];
        let cot = [1.0, -2.0, 0.5];
        let grad = flow_vjp(&s, &x, &cot).unwrap();
        let (gp, gx) = l.vjp(&x, &cot).unwrap();
        for k in 0..4 {
            assert!((grad.params[0][k] - t * gp[k]).abs() < 1e-15);
        }
        for i in 0..3 {
            assert!((grad.x[i] - (cot[i] + t * gx[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_cotangent_zero_gradient() {
        let mut rng = seed::rng(2);
        let l = ControlLayer::random(Family::Conv1, &[3], Activation::Tanh, 1.0, &mut rng).unwrap();
        let s = Schedule::new(vec![(l, 1.0)], 5, Integrator::Rk4).unwrap();
        let g = flow_vjp(&s, &[0.1, 0.2, 0.3], &[0.0; 3]).unwrap();
        assert!(g.x.iter().chain(g.flat_params().iter()).all(|&v| v == 0.0));
    }

    fn fd_flow(s: &Schedule, x: &[f64], cot: &[f64]) -> f64 {
        let h = 1e-5;
        let f = |s: &Schedule, x: &[f64]| -> f64 {
            integrate(s, x).unwrap().y.iter().zip(cot).map(|(a, b)| a * b).sum()
        };
        let g = flow_vjp(s, x, cot).unwrap();
        let flat = s.flat_params();
        let gflat = g.flat_params();
        let mut worst: f64 = 0.0;
        for k in 0..flat.len() {
            let mut p = flat.clone();
            p[k] += h;
            let plus = f(&s.with_flat_params(&p).unwrap(), x);
            p[k] -= 2.0 * h;
            let minus = f(&s.with_flat_params(&p).unwrap(), x);
            let fd = (plus - minus) / (2.0 * h);
            worst = worst.max((fd - gflat[k]).abs() / fd.abs().max(1e-3));
        }
        worst
    }

    #[test]
    fn flow_vjp_matches_finite_differences() {
        let mut rng = seed::rng(21);
        for integrator in [Integrator::Euler, Integrator::Rk4] {
            for family in Family::CATALOG {
                if family == Family::Gamma1 || family == Family::FsMax {
                    continue;
                }
                let dims = default_dims(family, 3);
                let mut s = Schedule::empty().with_steps_per_unit_time(3).unwrap().with_integrator(integrator);
                for _ in 0..2 {
                    let l = ControlLayer::random(family, &dims, Activation::Tanh, 0.8, &mut rng).unwrap();
                    s.push(l, 1.0).unwrap();
                }
                let n = s.degree().unwrap();
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let cot: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let err = fd_flow(&s, &x, &cot);
                assert!(err < 1e-5, "{family} {integrator}: {err}");
            }
        }
    }

    #[test]
    fn schedule_toml_round_trip() {
        let mut rng = seed::rng(8);
        let mut s = Schedule::empty().with_integrator(Integrator::Rk4).with_steps_per_unit_time(12).unwrap();
        for _ in 0..3 {
            s.push(ControlLayer::random(Family::Conv2, &[2, 2], Activation::Sigmoid, 1.0, &mut rng).unwrap(), 0.5)
                .unwrap();
        }
        let text = s.to_toml().unwrap();
        assert_eq!(Schedule::from_toml(&text).unwrap(), s);
        assert!(Schedule::from_toml("integrator = \"rk4\"\nsteps_per_unit_time = 0\n").is_err());
    }
}
