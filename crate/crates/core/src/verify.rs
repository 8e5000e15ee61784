//! Property checkers: symmetry, perturbation, connectivity, resolvence and
//! the negative-family counterexamples.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::control_families::{Activation, ControlLayer, Family, LayerShape};
use crate::error::{Error, Result};
use crate::flow::{flow_vjp, integrate, Integrator, Schedule};
use crate::hypothesis::{self, Model, Terminal, TrainConfig};
use crate::perm_group::{is_g_distinct, is_general_position, in_cross_section, Permutation, PermGroup};
use crate::report::{VerificationReport, Witness};
use crate::seed::{self, Rng};

/// Random parameter draws per existential search.
pub const DEFAULT_SEARCH_BUDGET: usize = 10_000;
/// Two outputs closer than this count as equal in existential searches.
pub const SEPARATION_TOL: f64 = 1e-9;
/// `E[Var(min x | max x)]` for `x` uniform on `[-1, 1]^3`.
pub const MIN_GIVEN_MAX_VARIANCE: f64 = 2.0 / 15.0;

const ZOOM_SPAN: f64 = 10.0;
const ZOOM_MAX_KNOTS: usize = 8;
const ZOOM_MIN_SLOPE: f64 = 1e-3;

fn uniform_point(rng: &mut Rng, n: usize, kappa: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-kappa..kappa)).collect()
}

fn inf_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |m, (x, y)| if (x - y).is_nan() { f64::INFINITY } else { m.max((x - y).abs()) })
}

/// `max_{x, g} ‖map(g x) − g map(x)‖∞` over `samples` points of `[-1, 1]^n`
/// and every element of `group`.
pub fn check_equivariance(
    name: &str,
    map: impl Fn(&[f64]) -> Result<Vec<f64>>,
    group: &PermGroup,
    samples: usize,
    tol: f64,
    seed_value: u64,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(format!("equivariance[{name}]"), tol);
    let mut rng = seed::rng_for(seed_value, "check_equivariance");
    for _ in 0..samples {
        let x = uniform_point(&mut rng, group.degree(), 1.0);
        let fx = map(&x)?;
        let mut worst: f64 = 0.0;
        let mut worst_g = None;
        for g in group.elements() {
            let v = inf_norm_diff(&map(&g.act_vector(&x)?)?, &g.act_vector(&fx)?);
            if v > worst || worst_g.is_none() {
                worst = worst.max(v);
                worst_g = Some(g);
            }
        }
        report.record(worst, || {
            Witness::new(x.clone(), format!("g = {}", worst_g.map(|g| g.to_string()).unwrap_or_default()))
        });
    }
    Ok(report.finish())
}

/// `max_{x, g} |fn(g x) − fn(x)|` over `samples` points of `[-1, 1]^n`.
pub fn check_invariance(
    name: &str,
    func: impl Fn(&[f64]) -> Result<f64>,
    group: &PermGroup,
    samples: usize,
    tol: f64,
    seed_value: u64,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(format!("invariance[{name}]"), tol);
    let mut rng = seed::rng_for(seed_value, "check_invariance");
    for _ in 0..samples {
        let x = uniform_point(&mut rng, group.degree(), 1.0);
        let fx = func(&x)?;
        let mut worst: f64 = 0.0;
        let mut worst_g = None;
        for g in group.elements() {
            let d = func(&g.act_vector(&x)?)? - fx;
            let v = if d.is_nan() { f64::INFINITY } else { d.abs() };
            if v > worst || worst_g.is_none() {
                worst = worst.max(v);
                worst_g = Some(g);
            }
        }
        report.record(worst, || {
            Witness::new(x.clone(), format!("g = {}", worst_g.map(|g| g.to_string()).unwrap_or_default()))
        });
    }
    Ok(report.finish())
}

/// Layer equivariance over random `(θ, x, g)` triples.
pub fn check_layer_equivariance(
    shape: &LayerShape,
    group: &PermGroup,
    samples: usize,
    tol: f64,
    seed_value: u64,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(format!("layer_equivariance[{shape} | {}]", shape.declared_group()), tol);
    let mut rng = seed::rng_for(seed_value, "layer_equivariance");
    for _ in 0..samples {
        let layer = shape.random(1.0, &mut rng)?;
        let x = uniform_point(&mut rng, shape.degree(), 1.0);
        let g = group.elements().choose(&mut rng).expect("groups are nonempty");
        let v = inf_norm_diff(&layer.eval(&g.act_vector(&x)?)?, &g.act_vector(&layer.eval(&x)?)?);
        report.record(v, || Witness::new(x.clone(), format!("g = {g}, layer = {layer}")));
    }
    Ok(report.finish())
}

/// A random schedule of `layers` members of one family.
pub fn random_schedule(
    shape: &LayerShape,
    layers: usize,
    steps_per_unit_time: u32,
    integrator: Integrator,
    rng: &mut Rng,
) -> Result<Schedule> {
    let mut s = Schedule::empty()
        .with_steps_per_unit_time(steps_per_unit_time)?
        .with_integrator(integrator);
    for _ in 0..layers {
        let duration = rng.gen_range(0.2..1.0);
        s.push(shape.random(1.0, rng)?, duration)?;
    }
    Ok(s)
}

/// Flow-map equivariance over random `(schedule, x, g)` triples, alternating
/// Euler and RK4.
pub fn check_flow_equivariance(
    shape: &LayerShape,
    group: &PermGroup,
    samples: usize,
    tol: f64,
    seed_value: u64,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(format!("flow_equivariance[{shape} | {}]", shape.declared_group()), tol);
    let mut rng = seed::rng_for(seed_value, "flow_equivariance");
    for k in 0..samples {
        let integrator = if k % 2 == 0 { Integrator::Euler } else { Integrator::Rk4 };
        let s = random_schedule(shape, 3, 5, integrator, &mut rng)?;
        let x = uniform_point(&mut rng, shape.degree(), 1.0);
        let g = group.elements().choose(&mut rng).expect("groups are nonempty");
        let lhs = integrate(&s, &g.act_vector(&x)?)?.y;
        let rhs = g.act_vector(&integrate(&s, &x)?.y)?;
        report.record(inf_norm_diff(&lhs, &rhs), || Witness::new(x.clone(), format!("g = {g}, {integrator}")));
    }
    Ok(report.finish())
}

/// `flow_vjp` against central differences of `c · φ(x)` in every parameter
/// and input coordinate. The violation per instance is the normwise relative
/// error `‖g − g_fd‖ / ‖g_fd‖`.
pub fn check_flow_gradient(
    shape: &LayerShape,
    instances: usize,
    step: f64,
    tol: f64,
    seed_value: u64,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(format!("flow_gradient[{shape}]"), tol);
    let mut rng = seed::rng_for(seed_value, "flow_gradient");
    for k in 0..instances {
        let integrator = if k % 2 == 0 { Integrator::Euler } else { Integrator::Rk4 };
        let s = random_schedule(shape, 2, 4, integrator, &mut rng)?;
        let x = uniform_point(&mut rng, shape.degree(), 1.0);
        let c = uniform_point(&mut rng, shape.degree(), 1.0);
        let grad = flow_vjp(&s, &x, &c)?;
        let objective = |s: &Schedule, x: &[f64]| -> Result<f64> {
            Ok(integrate(s, x)?.y.iter().zip(&c).map(|(y, c)| y * c).sum())
        };
        let theta = s.flat_params();
        let mut analytic = grad.flat_params();
        analytic.extend(&grad.x);
        let mut numeric = Vec::with_capacity(analytic.len());
        for p in 0..theta.len() {
            let mut t = theta.clone();
            t[p] = theta[p] + step;
            let up = objective(&s.with_flat_params(&t)?, &x)?;
            t[p] = theta[p] - step;
            let down = objective(&s.with_flat_params(&t)?, &x)?;
            numeric.push((up - down) / (2.0 * step));
        }
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp[i] = x[i] + step;
            let up = objective(&s, &xp)?;
            xp[i] = x[i] - step;
            let down = objective(&s, &xp)?;
            numeric.push((up - down) / (2.0 * step));
        }
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = numeric.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rel = diff / norm.max(f64::MIN_POSITIVE);
        report.record(rel, || Witness::new(x.clone(), format!("{integrator}, relative error {rel:.3e}")));
    }
    Ok(report.finish())
}

/// Orbit-stabilizer at every index, transversal axioms for both coset
/// representative choices, and the cross-section partition on `samples`
/// random points.
pub fn check_group_algebra(group: &PermGroup, samples: usize, seed_value: u64) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(format!("group_algebra[degree {}, order {}]", group.degree(), group.order()), 0.0);
    let mut orbit_stabilizer = VerificationReport::new("orbit_stabilizer", 0.0);
    for i in 1..=group.degree() {
        let lhs = group.orbit(i)?.len() * group.stabilizer(i)?.order();
        orbit_stabilizer.record_bool(lhs == group.order(), || {
            Witness::new(Vec::new(), format!("index {i}: |orbit| |stabilizer| = {lhs}, |G| = {}", group.order()))
        });
    }
    report.absorb(&orbit_stabilizer.finish());
    let right = group.right_transversal()?;
    let mut axioms = VerificationReport::new("transversal_axioms", 0.0);
    for (label, t) in [("lexicographically smallest", &right), ("lexicographically largest", &group.alternate_transversal()?)] {
        let outcome = t.check_axioms(group)?;
        axioms.record_bool(outcome.is_ok(), || Witness::new(Vec::new(), format!("{label}: {}", outcome.unwrap_err())));
    }
    report.absorb(&axioms.finish());
    report.absorb(&crate::perm_group::partition_check(group, &right, samples, seed_value)?);
    Ok(report.finish())
}

/// Increasing piecewise-linear map `u`, applied coordinatewise as `u⊗`.
/// Knots lie in `[-10, 10]`; beyond them the end slopes continue.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateZoom {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl CoordinateZoom {
    pub fn identity() -> Self {
        CoordinateZoom {
            xs: vec![-ZOOM_SPAN, ZOOM_SPAN],
            ys: vec![-ZOOM_SPAN, ZOOM_SPAN],
        }
    }

    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("coordinate zoom: {m}")));
        if xs.len() != ys.len() || xs.len() < 2 || xs.len() > ZOOM_MAX_KNOTS {
            return bad("needs 2 to 8 matching knots");
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) || xs.iter().any(|x| x.abs() > ZOOM_SPAN) {
            return bad("knots must be finite and lie in [-10, 10]");
        }
        for w in 0..xs.len() - 1 {
            let dx = xs[w + 1] - xs[w];
            if dx <= 0.0 || (ys[w + 1] - ys[w]) / dx < ZOOM_MIN_SLOPE {
                return bad("knots must increase with slopes >= 1e-3");
            }
        }
        Ok(CoordinateZoom { xs, ys })
    }

    /// Knots at `±10` plus up to six interior ones; slopes log-uniform in
    /// `[1e-3, 10]`.
    pub fn random(rng: &mut Rng) -> Self {
        let interior = rng.gen_range(0..=ZOOM_MAX_KNOTS - 2);
        let mut xs: Vec<f64> = (0..interior).map(|_| rng.gen_range(-1.5..1.5)).collect();
        xs.push(-ZOOM_SPAN);
        xs.push(ZOOM_SPAN);
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let mut ys = vec![rng.gen_range(-1.0..1.0)];
        for w in 1..xs.len() {
            let slope = 10f64.powf(rng.gen_range(-3.0..1.0)).max(ZOOM_MIN_SLOPE);
            ys.push(ys[w - 1] + slope * (xs[w] - xs[w - 1]));
        }
        CoordinateZoom { xs, ys }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let last = self.xs.len() - 1;
        let w = match self.xs.iter().position(|&k| k > t) {
            Some(0) => 0,
            Some(p) => p - 1,
            None => last - 1,
        };
        let slope = (self.ys[w + 1] - self.ys[w]) / (self.xs[w + 1] - self.xs[w]);
        self.ys[w] + slope * (t - self.xs[w])
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&t| self.eval(t)).collect()
    }
}

impl fmt::Display for CoordinateZoom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let knots: Vec<String> = self
            .xs
            .iter()
            .zip(&self.ys)
            .map(|(x, y)| format!("({x:.4}, {y:.4})"))
            .collect();
        write!(f, "zoom[{}]", knots.join(", "))
    }
}

fn shift_for(a: f64, b: f64) -> f64 {
    // σ(min + shift) = σ(0) and σ(max + shift) > σ(0) for every activation used here
    -a.min(b)
}

fn unit(n: usize, k: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[k] = 1.0;
    e
}

/// Parameters built from the explicit constructions for separating
/// `[f(ux)]_i` from `[f(uy)]_{i'}`.
fn separating_candidates(shape: &LayerShape, ux: &[f64], uy: &[f64], i: usize, ip: usize) -> Result<Vec<Vec<f64>>> {
    let n = shape.degree();
    let mut out = Vec::new();
    let probe = shape.layer(vec![0.0; shape.param_count()])?;
    match shape.family {
        Family::Conv1 | Family::Conv2 => {
            let lattice = crate::control_families::Lattice::new(&shape.dims)?;
            for k in 0..n {
                let (a, b) = (ux[lattice.offset(i, k)], uy[lattice.offset(ip, k)]);
                if a != b {
                    let mut p = unit(n, k);
                    p.extend([1.0, shift_for(a, b)]);
                    out.push(p);
                }
            }
        }
        Family::Fs1 => {
            let (sx, sy) = (ux.iter().sum::<f64>(), uy.iter().sum::<f64>());
            out.push(vec![1.0, 0.0, 1.0, shift_for(sx, sy)]);
        }
        Family::Fs2 => {
            let lo = ux.iter().chain(uy).copied().fold(f64::INFINITY, f64::min);
            out.push(vec![0.0, 1.0, 0.0, 1.0, 0.0, -lo]);
            out.push(vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
        }
        Family::Janossy1 | Family::Janossy2 | Family::FsMax => {
            let (px, py) = (probe.pooled_scalar(ux), probe.pooled_scalar(uy));
            out.push(vec![1.0, 0.0, 1.0, shift_for(px, py)]);
        }
        Family::Prod2d1 | Family::Prod2d2 | Family::ProdKd1 | Family::ProdKd2 => {
            let lattice = crate::control_families::Lattice::new(&shape.dims)?;
            let rank = lattice.rank();
            for s in 0..rank {
                let hx = lattice.axis_sums(ux, s)[lattice.coord(i, s)];
                let hy = lattice.axis_sums(uy, s)[lattice.coord(ip, s)];
                if hx != hy {
                    let mut p = vec![0.0; shape.param_count()];
                    p[0] = 1.0;
                    p[2 + s] = 1.0;
                    *p.last_mut().expect("nonempty") = shift_for(hx, hy);
                    out.push(p);
                }
            }
        }
        Family::Gamma1 | Family::Linear => out.push(vec![1.0]),
    }
    Ok(out)
}

struct PerturbationSearch<'a> {
    shape: &'a LayerShape,
    x: &'a [f64],
    y: &'a [f64],
    shared: Vec<(usize, usize)>,
}

impl PerturbationSearch<'_> {
    fn separation(&self, layer: &ControlLayer, zoom: &CoordinateZoom) -> Result<Option<(usize, usize, f64)>> {
        let fx = layer.eval(&zoom.apply(self.x))?;
        let fy = layer.eval(&zoom.apply(self.y))?;
        Ok(self
            .shared
            .iter()
            .map(|&(i, ip)| (i, ip, (fx[i] - fy[ip]).abs()))
            .find(|&(_, _, d)| d > SEPARATION_TOL))
    }

    /// Explicit constructions over a few zooms first, then random draws.
    fn run(&self, budget: usize, rng: &mut Rng) -> Result<Option<String>> {
        let mut zooms = vec![CoordinateZoom::identity()];
        zooms.extend((0..31).map(|_| CoordinateZoom::random(rng)));
        for zoom in &zooms {
            let (ux, uy) = (zoom.apply(self.x), zoom.apply(self.y));
            for &(i, ip) in &self.shared {
                for params in separating_candidates(self.shape, &ux, &uy, i, ip)? {
                    let layer = self.shape.layer(params)?;
                    if let Some((i, ip, d)) = self.separation(&layer, zoom)? {
                        return Ok(Some(format!(
                            "explicit: pair ({}, {}) gap {d:.3e} with {layer} and {zoom}",
                            i + 1,
                            ip + 1
                        )));
                    }
                }
            }
        }
        for _ in 0..budget {
            let layer = self.shape.random(2.0, rng)?;
            let zoom = CoordinateZoom::random(rng);
            if let Some((i, ip, d)) = self.separation(&layer, &zoom)? {
                return Ok(Some(format!(
                    "random: pair ({}, {}) gap {d:.3e} with {layer} and {zoom}",
                    i + 1,
                    ip + 1
                )));
            }
        }
        Ok(None)
    }
}

/// Searches, for one pair, for `f` and `u⊗` with
/// `[f(u⊗x)]_i ≠ [f(u⊗y)]_{i'}` at some `(i, i')` where `x_i = y_{i'}`.
/// Returns `None` when the pair is out of scope (no shared value, or neither
/// point in general position), otherwise whether a witness was found.
pub fn find_perturbation(
    shape: &LayerShape,
    x: &[f64],
    y: &[f64],
    budget: usize,
    rng: &mut Rng,
) -> Result<Option<Option<String>>> {
    if !(is_general_position(x)? || is_general_position(y)?) {
        return Ok(None);
    }
    let mut shared = Vec::new();
    for (i, &xi) in x.iter().enumerate() {
        for (ip, &yi) in y.iter().enumerate() {
            if xi == yi {
                shared.push((i, ip));
            }
        }
    }
    if shared.is_empty() {
        return Ok(None);
    }
    let search = PerturbationSearch { shape, x, y, shared };
    Ok(Some(search.run(budget, rng)?))
}

/// Samples `pairs` pairs sharing a coordinate value and searches each for a
/// separating `(f, u⊗)`. Pairs that are not `G`-distinct are filtered; every
/// tenth pair is deliberately drawn from one orbit to exercise the filter.
pub fn check_perturbation_property(
    shape: &LayerShape,
    group: &PermGroup,
    pairs: usize,
    budget: usize,
    seed_value: u64,
) -> Result<VerificationReport> {
    let n = shape.degree();
    if group.degree() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: group.degree(),
        });
    }
    let mut report = VerificationReport::new(format!("perturbation[{shape} | {}]", shape.declared_group()), 0.0)
        .existential();
    let mut rng = seed::rng_for(seed_value, "perturbation");
    let (mut explicit, mut random) = (0, 0);
    for k in 0..pairs {
        let x = uniform_point(&mut rng, n, 1.0);
        let y = if k % 10 == 9 && group.order() > 1 {
            let g = group.elements().choose(&mut rng).expect("nonempty");
            g.act_vector(&x)?
        } else {
            let mut y = uniform_point(&mut rng, n, 1.0);
            let (i, ip) = (rng.gen_range(0..n), rng.gen_range(0..n));
            y[ip] = x[i];
            y
        };
        if !is_g_distinct(group, &[x.clone(), y.clone()])? {
            report.skip("pair not G-distinct (filtered)");
            continue;
        }
        match find_perturbation(shape, &x, &y, budget, &mut rng)? {
            None => report.skip("similarity zero"),
            Some(Some(w)) => {
                if w.starts_with("explicit") {
                    explicit += 1;
                } else {
                    random += 1;
                }
                report.record(0.0, || unreachable!());
            }
            Some(None) => {
                let mut input = x.clone();
                input.extend(&y);
                report.record(1.0, || Witness::new(input, "no separating (f, u) within budget (input is x ++ y)"));
            }
        }
    }
    report.note(format!("witnesses: {explicit} explicit, {random} from random search"));
    Ok(report.finish())
}

/// The transposition `(i j)` (0-based) with `a = b∘(i j)`, if any.
fn connecting_transposition(a: &Permutation, b: &Permutation) -> Result<Option<(usize, usize)>> {
    let tau = b.inverse().compose(a)?;
    match tau.cycles().as_slice() {
        [c] if c.len() == 2 => Ok(Some((c[0] - 1, c[1] - 1))),
        _ => Ok(None),
    }
}

/// A point of `∂Q_a ∩ ∂Q_b`: a strict chain ordered by `b` with the block
/// from coordinate `i` to coordinate `j` collapsed to one value.
fn boundary_point(b: &Permutation, i: usize, j: usize, rng: &mut Rng) -> Vec<f64> {
    let n = b.degree();
    let mut values: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    values.sort_by(|p, q| q.total_cmp(p));
    let binv = b.inverse();
    let chain: Vec<usize> = (0..n).map(|k| binv.apply0(k)).collect();
    let pi = chain.iter().position(|&c| c == i).expect("index in chain");
    let pj = chain.iter().position(|&c| c == j).expect("index in chain");
    let (lo, hi) = (pi.min(pj), pi.max(pj));
    let tied = values[lo];
    for v in &mut values[lo + 1..=hi] {
        *v = tied;
    }
    let mut z = vec![0.0; n];
    for (k, &c) in chain.iter().enumerate() {
        z[c] = values[k];
    }
    z
}

/// Witness of direct connectivity: the boundary point and parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectivityWitness {
    pub z: Vec<f64>,
    pub layer: ControlLayer,
}

fn search_connectivity(
    shape: &LayerShape,
    b: &Permutation,
    i: usize,
    j: usize,
    budget: usize,
    rng: &mut Rng,
) -> Result<Option<ConnectivityWitness>> {
    let gap = |layer: &ControlLayer, z: &[f64]| -> Result<f64> {
        let f = layer.eval(z)?;
        Ok((f[i] - f[j]).abs())
    };
    for _ in 0..8 {
        let z = boundary_point(b, i, j, rng);
        // z_i = z_j, so the pair (i, j) of a point with itself is the shared value
        for params in separating_candidates(shape, &z, &z, i, j)? {
            let layer = shape.layer(params)?;
            if gap(&layer, &z)? > SEPARATION_TOL {
                return Ok(Some(ConnectivityWitness { z, layer }));
            }
        }
    }
    let mut z = boundary_point(b, i, j, rng);
    for k in 0..budget {
        if k % 100 == 99 {
            z = boundary_point(b, i, j, rng);
        }
        let layer = shape.random(2.0, rng)?;
        if gap(&layer, &z)? > SEPARATION_TOL {
            return Ok(Some(ConnectivityWitness { z, layer }));
        }
    }
    Ok(None)
}

/// Checks whether `a` and `b` are directly connected by the family: `a` must
/// equal `b∘(i j)`, and some `z ∈ ∂Q_a ∩ ∂Q_b` and `f` must give
/// `[f(z)]_i ≠ [f(z)]_j`.
pub fn check_direct_connectivity(
    shape: &LayerShape,
    a: &Permutation,
    b: &Permutation,
    budget: usize,
    seed_value: u64,
) -> Result<(VerificationReport, Option<ConnectivityWitness>)> {
    if a.degree() != shape.degree() || b.degree() != shape.degree() {
        return Err(Error::DimensionMismatch {
            expected: shape.degree(),
            got: a.degree(),
        });
    }
    let Some((i, j)) = connecting_transposition(a, b)? else {
        return Err(Error::InvalidArgument(format!(
            "{a} and {b} do not differ by a transposition"
        )));
    };
    let mut report = VerificationReport::new(format!("direct_connectivity[{shape}: {a} ~ {b}]"), 0.0).existential();
    let mut rng = seed::rng_for(seed_value, "direct_connectivity");
    let witness = search_connectivity(shape, b, i, j, budget, &mut rng)?;
    match &witness {
        Some(w) => {
            report.record(0.0, || unreachable!());
            report.note(format!("witness z = {:?}, {}", w.z, w.layer));
        }
        None => report.record(1.0, || {
            Witness::new(boundary_point(b, i, j, &mut rng), format!("[f(z)]_{} = [f(z)]_{} for every draw", i + 1, j + 1))
        }),
    }
    Ok((report.finish(), witness))
}

/// Perturbation property plus transversal transitivity: every rep of the
/// transversal must be reachable from the first through chains of directly
/// connected permutations (neighbours `b∘(i j)` with `i, j` adjacent in the
/// order defining `Q_b`).
pub fn check_resolves(
    shape: &LayerShape,
    group: &PermGroup,
    pairs: usize,
    budget: usize,
    seed_value: u64,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(format!("resolves[{shape} | group order {}]", group.order()), 0.0);
    let pert = check_perturbation_property(shape, group, pairs, budget, seed::derive(seed_value, "perturbation"))?;
    report.absorb(&pert);

    let reps = group.right_transversal()?.reps;
    let targets: HashSet<&Permutation> = reps.iter().collect();
    let n = group.degree();
    let mut rng = seed::rng_for(seed_value, "transitivity");
    let mut visited: HashSet<Permutation> = HashSet::new();
    let mut queue = VecDeque::new();
    let mut edges: HashMap<(Permutation, Permutation), bool> = HashMap::new();
    visited.insert(reps[0].clone());
    queue.push_back(reps[0].clone());
    let mut reached = 1;
    let mut tested = 0;
    while let Some(b) = queue.pop_front() {
        if reached == reps.len() {
            break;
        }
        let binv = b.inverse();
        for k in 0..n - 1 {
            let (i, j) = (binv.apply0(k), binv.apply0(k + 1));
            let tau = Permutation::transposition(n, i + 1, j + 1)?;
            let a = b.compose(&tau)?;
            if visited.contains(&a) {
                continue;
            }
            let key = if a < b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
            let connected = match edges.get(&key) {
                Some(&c) => c,
                None => {
                    tested += 1;
                    let c = search_connectivity(shape, &b, i, j, budget, &mut rng)?.is_some();
                    edges.insert(key, c);
                    c
                }
            };
            if connected {
                if targets.contains(&a) {
                    reached += 1;
                }
                visited.insert(a.clone());
                queue.push_back(a);
            }
        }
    }
    report.note(format!(
        "transversal: {} reps, {reached} reached, {tested} direct-connectivity searches",
        reps.len()
    ));
    let mut transitivity = VerificationReport::new("transversal_transitivity", 0.0);
    transitivity.record((reps.len() - reached) as f64, || {
        Witness::new(Vec::new(), format!("{} of {} reps unreachable", reps.len() - reached, reps.len()))
    });
    let transitivity = transitivity.finish();
    report.absorb(&transitivity);
    Ok(report.finish())
}

/// Largest pairwise-difference drift allowed after `steps` roundings with
/// states bounded by `scale`: each addition perturbs a coordinate by at most
/// half an ulp.
fn rounding_bound(steps: usize, scale: f64) -> f64 {
    2.0 * f64::EPSILON * steps.max(1) as f64 * scale.max(1.0)
}

/// Runs a schedule step by step and returns the worst drift of pairwise
/// differences relative to the rounding bound, plus whether every step
/// added one common increment to all coordinates.
fn difference_drift(schedule: &Schedule, x: &[f64]) -> Result<(f64, f64, bool)> {
    let mut state = x.to_vec();
    let mut uniform = true;
    let mut scale: f64 = x.iter().fold(0.0, |m, v| m.max(v.abs()));
    let mut steps = 0;
    for seg in schedule.segments() {
        let m = schedule.substeps(seg.duration);
        if m == 0 {
            continue;
        }
        let h = seg.duration / m as f64;
        for _ in 0..m {
            let f = seg.layer.eval(&state)?;
            uniform &= f.iter().all(|&v| v.to_bits() == f[0].to_bits());
            for (s, v) in state.iter_mut().zip(&f) {
                *s += h * v;
            }
            scale = state.iter().fold(scale, |m, v| m.max(v.abs()));
            steps += 1;
        }
    }
    let mut drift: f64 = 0.0;
    for i in 0..x.len() {
        for j in 0..x.len() {
            drift = drift.max(((state[i] - state[j]) - (x[i] - x[j])).abs());
        }
    }
    Ok((drift, rounding_bound(steps, scale), uniform))
}

/// gamma1 schedules keep `y_i − y_j = x_i − x_j`: every Euler step adds the
/// same increment to all coordinates, and the differences drift by no more
/// than floating-point rounding.
pub fn check_gamma1_differences(schedules: usize, seed_value: u64) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("gamma1_difference_preservation", 1.0);
    let mut rng = seed::rng_for(seed_value, "gamma1_differences");
    for _ in 0..schedules {
        let n = rng.gen_range(2..=6);
        let shape = LayerShape::new(Family::Gamma1, &[n], Activation::Tanh)?;
        let layers = rng.gen_range(1..=5);
        let s = random_schedule(&shape, layers, 20, Integrator::Euler, &mut rng)?;
        let x = uniform_point(&mut rng, n, 2.0);
        let (drift, bound, uniform) = difference_drift(&s, &x)?;
        // ratio above 1 means drift beyond rounding, or a non-uniform increment
        let violation = if uniform { drift / bound } else { f64::INFINITY };
        report.record(violation, || Witness::new(x.clone(), format!("drift {drift:.3e} vs bound {bound:.3e}, uniform = {uniform}")));
    }
    Ok(report.finish())
}

/// fs1 does move pairwise differences, so the gamma1 check is not vacuous.
pub fn check_fs1_moves_differences(schedules: usize, seed_value: u64) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("fs1_differences_move", 0.0);
    let mut rng = seed::rng_for(seed_value, "fs1_differences");
    let shape = LayerShape::new(Family::Fs1, &[3], Activation::Tanh)?;
    for _ in 0..schedules {
        let s = random_schedule(&shape, 3, 20, Integrator::Euler, &mut rng)?;
        let x = uniform_point(&mut rng, 3, 1.0);
        let (drift, bound, _) = difference_drift(&s, &x)?;
        report.record_bool(drift > 1e3 * bound, || Witness::new(x.clone(), format!("drift {drift:.3e} only")));
    }
    Ok(report.finish())
}

fn strictly_ordered(n: usize, rng: &mut Rng) -> Vec<f64> {
    let mut v = uniform_point(rng, n, 1.0);
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// For `x, y ∈ Q` with `x_1 > y_1`, fsmax flows keep both in `Q` and keep
/// `[φ(x)]_1 > [φ(y)]_1`. Coarse-step violations are treated as
/// discretisation artifacts: the step is halved (up to ten times) until the
/// check holds.
pub fn check_fsmax_order(schedules: usize, seed_value: u64) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("fsmax_order_preservation", 0.0);
    let mut rng = seed::rng_for(seed_value, "fsmax_order");
    let mut refined = 0;
    let identity = |n| Permutation::identity(n);
    for _ in 0..schedules {
        let n = rng.gen_range(2..=5);
        let shape = LayerShape::new(Family::FsMax, &[n], Activation::Tanh)?;
        let s = random_schedule(&shape, 3, 10, Integrator::Euler, &mut rng)?;
        let (mut x, mut y) = (strictly_ordered(n, &mut rng), strictly_ordered(n, &mut rng));
        if x[0] < y[0] {
            std::mem::swap(&mut x, &mut y);
        }
        if x[0] == y[0] {
            report.skip("tied first coordinates");
            continue;
        }
        let holds = |s: &Schedule| -> Result<bool> {
            let px = integrate(s, &x)?.y;
            let py = integrate(s, &y)?.y;
            Ok(in_cross_section(&px, &identity(n))? && in_cross_section(&py, &identity(n))? && px[0] > py[0])
        };
        let mut spu = s.steps_per_unit_time();
        let mut ok = holds(&s)?;
        let mut halvings = 0;
        while !ok && halvings < 10 {
            spu *= 2;
            halvings += 1;
            ok = holds(&s.clone().with_steps_per_unit_time(spu)?)?;
        }
        if ok && halvings > 0 {
            refined += 1;
        }
        let mut input = x.clone();
        input.extend(&y);
        report.record_bool(ok, || Witness::new(input, "order lost even at 1024x refinement (input is x ++ y)"));
    }
    report.note(format!("{refined} schedules needed step refinement"));
    Ok(report.finish())
}

/// A trained fsmax model with `max` terminal on `min(x)` over `[-1, 1]^3`
/// cannot beat `E[Var(min | max)] = 2/15`: the flow moves the largest
/// coordinate by an autonomous scalar ODE, so the output is a function of
/// `max x` alone.
pub fn check_fsmax_min_obstruction(seed_value: u64) -> Result<VerificationReport> {
    let floor = 0.9 * MIN_GIVEN_MAX_VARIANCE;
    let mut report = VerificationReport::new("fsmax_max_terminal_vs_min", 0.0);
    let target = hypothesis::target("min", &[3])?;
    let model = Model::random(
        Family::FsMax,
        &[3],
        Activation::Tanh,
        3,
        Terminal::Max,
        0.5,
        4,
        Integrator::Euler,
        seed::derive(seed_value, "fsmax_model"),
    )?;
    let config = TrainConfig {
        train_samples: 512,
        test_samples: 4000,
        iterations: 200,
        log_every: 50,
        seed: seed::derive(seed_value, "fsmax_train"),
        ..TrainConfig::default()
    };
    let (_, history) = hypothesis::train(&model, &target, &config)?;
    let best = history
        .rows
        .iter()
        .map(|r| r.test_loss)
        .fold(f64::INFINITY, f64::min);
    // violation > 0 iff the best test MSE dips below the floor
    report.record((floor - best).max(0.0), || Witness::new(Vec::new(), format!("test MSE {best:.4} below {floor:.4}")));
    report.note(format!("best test MSE {best:.4}, floor 0.9 * 2/15 = {floor:.4}"));
    Ok(report.finish())
}

/// The negative-family suite: gamma1 difference preservation, its fs1
/// control, fsmax order preservation and the fsmax-on-min obstruction.
pub fn check_counterexamples(schedules: usize, seed_value: u64) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("counterexamples", 0.0);
    for sub in [
        check_gamma1_differences(schedules, seed::derive(seed_value, "gamma1"))?,
        check_fs1_moves_differences(schedules.min(10), seed::derive(seed_value, "fs1"))?,
        check_fsmax_order(schedules, seed::derive(seed_value, "fsmax"))?,
        check_fsmax_min_obstruction(seed::derive(seed_value, "obstruction"))?,
    ] {
        report.absorb(&sub);
    }
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::Verdict;

    fn shape(f: Family, dims: &[usize]) -> LayerShape {
        LayerShape::new(f, dims, Activation::Tanh).unwrap()
    }

    #[test]
    fn equivariance_examples() {
        let t3 = PermGroup::translation_1d(3).unwrap();
        let id = check_equivariance("identity", |x| Ok(x.to_vec()), &t3, 20, 0.0, 1).unwrap();
        assert!(id.passed());
        assert_eq!(id.worst_violation, 0.0);
        let rev = check_equivariance(
            "reverse",
            |x| Ok(x.iter().rev().copied().collect()),
            &t3,
            20,
            1e-12,
            1,
        )
        .unwrap();
        assert_eq!(rev.verdict, Verdict::Fail);
        assert!(!rev.witnesses.is_empty());
    }

    #[test]
    fn invariance_examples() {
        let s3 = PermGroup::symmetric(3).unwrap();
        let t3 = PermGroup::translation_1d(3).unwrap();
        assert!(check_invariance("sum", |x| Ok(x.iter().sum()), &s3, 50, 1e-12, 2).unwrap().passed());
        assert!(!check_invariance("first", |x| Ok(x[0]), &s3, 50, 1e-12, 2).unwrap().passed());
        let t = |x: &[f64]| Ok(hypothesis::t3_antisym(x));
        assert!(check_invariance("t3", t, &t3, 50, 1e-12, 2).unwrap().passed());
        assert!(!check_invariance("t3", t, &s3, 50, 1e-12, 2).unwrap().passed());
    }

    #[test]
    fn zoom_is_increasing_and_bounded() {
        let mut rng = seed::rng(1);
        for _ in 0..100 {
            let z = CoordinateZoom::random(&mut rng);
            let mut prev = f64::NEG_INFINITY;
            for k in 0..=400 {
                let t = -20.0 + 0.1 * k as f64;
                let v = z.eval(t);
                assert!(v > prev);
                prev = v;
            }
            assert!(CoordinateZoom::new(z.xs.clone(), z.ys.clone()).is_ok());
        }
        assert_eq!(CoordinateZoom::identity().eval(3.5), 3.5);
        assert!(CoordinateZoom::new(vec![-1.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(CoordinateZoom::new(vec![-11.0, 1.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn conv1_perturbation_example() {
        let mut rng = seed::rng(3);
        let found = find_perturbation(&shape(Family::Conv1, &[3]), &[1.0, 2.0, 3.0], &[1.0, 5.0, 4.0], 100, &mut rng)
            .unwrap()
            .unwrap()
            .unwrap();
        assert!(found.starts_with("explicit"), "{found}");
        // w = e_2 in 1-based terms: the filter picks x_{1+1}
        assert!(found.contains("params=0,1,0,"), "{found}");
    }

    #[test]
    fn same_orbit_pairs_are_filtered() {
        let g = PermGroup::translation_1d(3).unwrap();
        let r = check_perturbation_property(&shape(Family::Conv1, &[3]), &g, 30, 100, 4).unwrap();
        assert!(r.skipped >= 3, "{r:?}");
        assert!(r.notes.iter().any(|n| n.contains("filtered")));
        assert!(r.passed());
    }

    #[test]
    fn fs1_perturbation_via_zoom() {
        let g = PermGroup::symmetric(3).unwrap();
        let r = check_perturbation_property(&shape(Family::Fs1, &[3]), &g, 30, 1000, 5).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn direct_connectivity_examples() {
        let s = shape(Family::Conv1, &[3]);
        let a = Permutation::identity(3);
        let b = Permutation::transposition(3, 1, 2).unwrap();
        let (r, w) = check_direct_connectivity(&s, &a, &b, 100, 1).unwrap();
        assert!(r.passed());
        let w = w.unwrap();
        assert_eq!(w.z[0], w.z[1]);
        assert_ne!(w.z[1], w.z[2]);
        let far = Permutation::shift(3);
        assert!(check_direct_connectivity(&s, &a, &far, 100, 1).is_err());
        let (r, w) = check_direct_connectivity(&shape(Family::Gamma1, &[3]), &a, &b, 500, 1).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert!(w.is_none());
    }

    #[test]
    fn resolves_examples() {
        let t3 = PermGroup::translation_1d(3).unwrap();
        let r = check_resolves(&shape(Family::Conv1, &[3]), &t3, 20, 1000, 1).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(r.notes.iter().any(|n| n.contains("2 reps, 2 reached")));
        let s3 = PermGroup::symmetric(3).unwrap();
        let r = check_resolves(&shape(Family::Fs1, &[3]), &s3, 20, 1000, 1).unwrap();
        assert!(r.passed(), "{r:?}");
        let r = check_resolves(&shape(Family::Gamma1, &[3]), &t3, 5, 200, 1).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
    }

    #[test]
    fn gradients_match_finite_differences() {
        for f in [Family::Conv1, Family::Fs2, Family::Prod2d2] {
            let s = shape(f, &crate::control_families::default_dims(f, 4));
            let r = check_flow_gradient(&s, 5, 1e-5, 1e-5, 3).unwrap();
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn group_algebra_holds() {
        for g in [PermGroup::symmetric(3).unwrap(), PermGroup::translation_nd(&[2, 3]).unwrap()] {
            let r = check_group_algebra(&g, 500, 1).unwrap();
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn gamma1_and_fs1_differences() {
        assert!(check_gamma1_differences(10, 1).unwrap().passed());
        assert!(check_fs1_moves_differences(5, 1).unwrap().passed());
    }

    #[test]
    fn fsmax_order_holds() {
        assert!(check_fsmax_order(10, 2).unwrap().passed());
    }
}
