//! One-dimensional well functions and symmetric invariant well functions,
//! with sampling-based checkers for both definitions.

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::perm_group::Permutation;
use crate::report::{VerificationReport, Witness};
use crate::seed;

/// Values with `|f| <= ZERO_ATOL` count as zero.
pub const ZERO_ATOL: f64 = 1e-12;
/// The escape search gives up once the radius passes this value.
pub const ESCAPE_CAP: f64 = 1e6;

#[derive(Clone)]
pub struct ScalarFunction {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Declared, not estimated.
    pub lipschitz: f64,
}

impl ScalarFunction {
    pub fn new(lipschitz: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ScalarFunction {
            f: Arc::new(f),
            lipschitz,
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

impl fmt::Debug for ScalarFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarFunction(lip={})", self.lipschitz)
    }
}

#[derive(Clone)]
pub struct SymmetricWellCandidate {
    f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub degree: usize,
    /// Interval `I` on whose cube `I^n` the candidate should vanish.
    pub zero_box: (f64, f64),
}

impl SymmetricWellCandidate {
    pub fn new(
        degree: usize,
        zero_box: (f64, f64),
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        SymmetricWellCandidate {
            f: Arc::new(f),
            degree,
            zero_box,
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

impl fmt::Debug for SymmetricWellCandidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymmetricWellCandidate(n={}, I={:?})", self.degree, self.zero_box)
    }
}

#[inline]
fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// `relu(x - 1) + relu(-x - 1)`; vanishes exactly on `[-1, 1]`.
pub fn well_bump(x: f64) -> f64 {
    relu(x - 1.0) + relu(-x - 1.0)
}

pub fn well_bump_fn() -> ScalarFunction {
    ScalarFunction::new(1.0, well_bump)
}

/// `τ(x) = h(x_1 + ... + x_n)`.
///
/// Vanishes on `I^n` for `I = [-1/n, 1/n]` when `h = well_bump`; its zero set
/// is unbounded, so it is not itself a well function.
pub fn sym_well_sum(h: ScalarFunction, n: usize) -> SymmetricWellCandidate {
    let half = 1.0 / n.max(1) as f64;
    SymmetricWellCandidate::new(n, (-half, half), move |x| h.eval(x.iter().sum()))
}

/// `τ(x) = h(x_1) + ... + h(x_n)`.
pub fn sym_well_coordwise(h: ScalarFunction, n: usize) -> SymmetricWellCandidate {
    SymmetricWellCandidate::new(n, (-1.0, 1.0), move |x| x.iter().map(|&v| h.eval(v)).sum())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo || count < 3 {
            return Err(Error::InvalidArgument(format!(
                "degenerate grid [{lo}, {hi}] with {count} points"
            )));
        }
        Ok(Grid { lo, hi, count })
    }

    pub fn point(&self, k: usize) -> f64 {
        self.lo + (self.hi - self.lo) * k as f64 / (self.count - 1) as f64
    }
}

/// Zero set found by [`check_1d_well`], as grid coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZeroInterval {
    pub lo: f64,
    pub hi: f64,
}

/// Samples `f` on `grid` and checks that its numerical zero set is one
/// bounded, nondegenerate, contiguous run of grid points.
pub fn check_1d_well(f: &ScalarFunction, grid: Grid) -> (VerificationReport, Option<ZeroInterval>) {
    let mut report = VerificationReport::new("check_1d_well", 0.0);
    let zero: Vec<bool> = (0..grid.count)
        .map(|k| f.eval(grid.point(k)).abs() <= ZERO_ATOL)
        .collect();
    report.samples = grid.count;
    let first = zero.iter().position(|&z| z);
    let last = zero.iter().rposition(|&z| z);
    let mut fail = |detail: String, at: f64| {
        report.violations += 1;
        report.worst_violation = 1.0;
        report.witnesses.push(Witness::new(vec![at], detail));
    };
    let interval = match (first, last) {
        (Some(a), Some(b)) => {
            let mut ok = true;
            if let Some(gap) = (a..=b).find(|&k| !zero[k]) {
                fail("zero set is not contiguous".into(), grid.point(gap));
                ok = false;
            }
            if a == 0 || b == grid.count - 1 {
                let edge = if a == 0 { grid.lo } else { grid.hi };
                fail("unbounded-at-grid-edge".into(), edge);
                ok = false;
            }
            if a == b {
                fail("zero set is degenerate (a single point)".into(), grid.point(a));
                ok = false;
            }
            ok.then(|| ZeroInterval {
                lo: grid.point(a),
                hi: grid.point(b),
            })
        }
        _ => {
            fail("zero set is empty or degenerate on the grid".into(), grid.lo);
            None
        }
    };
    (report.finish(), interval)
}

/// Outcome of the escape search in [`check_symmetric_invariant_well`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymmetricWellOutcome {
    /// Smallest doubling radius `a` for which escape held on every probe.
    pub escape_radius: Option<f64>,
    pub inner_bound: f64,
}

/// Checks the three conditions of a symmetric invariant well function:
/// permutation invariance, vanishing on `I^n`, and escape from zero once one
/// coordinate leaves `[-a, a]` while the rest stay inside `(-b, b)`.
pub fn check_symmetric_invariant_well(
    tau: &SymmetricWellCandidate,
    samples: usize,
    seed_value: u64,
) -> Result<(VerificationReport, SymmetricWellOutcome)> {
    check_symmetric_invariant_well_with_bound(tau, samples, seed_value, 1.0)
}

pub fn check_symmetric_invariant_well_with_bound(
    tau: &SymmetricWellCandidate,
    samples: usize,
    seed_value: u64,
    inner_bound: f64,
) -> Result<(VerificationReport, SymmetricWellOutcome)> {
    let n = tau.degree;
    if n < 1 || samples == 0 || !(inner_bound > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need n >= 1, samples > 0, b > 0 (got n={n}, samples={samples}, b={inner_bound})"
        )));
    }
    let mut report = VerificationReport::new("check_symmetric_invariant_well", ZERO_ATOL);

    let mut inv = VerificationReport::new("invariance", 1e-12);
    let mut rng = seed::rng_for(seed_value, "sym_well/invariance");
    let mut idx: Vec<usize> = (0..n).collect();
    for _ in 0..samples {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        idx.shuffle(&mut rng);
        let g = Permutation::from_zero_based(&idx)?;
        let gx = g.act_vector(&x)?;
        let d = (tau.eval(&gx) - tau.eval(&x)).abs();
        inv.record(d, || Witness::new(x.clone(), format!("permuted by {g}")));
    }
    report.absorb(&inv.finish());

    let mut zero = VerificationReport::new("vanishes_on_box", ZERO_ATOL);
    let mut rng = seed::rng_for(seed_value, "sym_well/zero_box");
    let (lo, hi) = tau.zero_box;
    for _ in 0..samples {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..=hi)).collect();
        let v = tau.eval(&x).abs();
        zero.record(v, || Witness::new(x.clone(), format!("tau = {v:e}")));
    }
    report.absorb(&zero.finish());

    let mut escape = VerificationReport::new("escape", 0.0);
    let mut rng = seed::rng_for(seed_value, "sym_well/escape");
    let b = inner_bound * (1.0 - 1e-9);
    let mut a = 1.0;
    let mut found = None;
    while a <= ESCAPE_CAP {
        let probes = escape_probes(n, a, b, samples, &mut rng);
        if probes.iter().all(|x| tau.eval(x).abs() > ZERO_ATOL) {
            found = Some(a);
            break;
        }
        a *= 2.0;
    }
    match found {
        Some(a) => {
            escape.record(0.0, || unreachable!());
            escape.note(format!("escape radius a = {a} for b = {inner_bound}"));
        }
        None => escape.record(1.0, || {
            Witness::new(vec![ESCAPE_CAP], "no escape radius below the cap")
        }),
    }
    report.absorb(&escape.finish());

    Ok((
        report.finish(),
        SymmetricWellOutcome {
            escape_radius: found,
            inner_bound,
        },
    ))
}

/// Points with one coordinate just outside `[-a, a]` and the rest in
/// `(-b, b)`, including the corners that pull a sum back toward zero.
fn escape_probes(
    n: usize,
    a: f64,
    b: f64,
    samples: usize,
    rng: &mut seed::Rng,
) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let outer = a * (1.0 + 1e-9);
    for i in 0..n {
        for sign in [1.0, -1.0] {
            for inner in [0.0, -sign * b, sign * b] {
                let mut x = vec![inner; n];
                x[i] = sign * outer;
                out.push(x);
            }
        }
    }
    for _ in 0..samples {
        let i = rng.gen_range(0..n);
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-b..b)).collect();
        x[i] = sign * rng.gen_range(outer..=2.0 * outer);
        out.push(x);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_bump_examples() {
        assert_eq!(well_bump(0.0), 0.0);
        assert_eq!(well_bump(2.0), 1.0);
        assert_eq!(well_bump(-3.0), 2.0);
        assert_eq!(well_bump(1.0), 0.0);
        assert_eq!(well_bump(-1.0), 0.0);
        assert!(well_bump(1.0 + 1e-15) > 0.0);
    }

    #[test]
    fn sym_well_sum_examples() {
        let tau = sym_well_sum(well_bump_fn(), 3);
        assert_eq!(tau.eval(&[0.2, 0.3, -0.4]), 0.0);
        assert_eq!(tau.eval(&[1.0, 1.0, 1.0]), 2.0);
        assert_eq!(tau.eval(&[0.2, -0.4, 0.3]), tau.eval(&[0.2, 0.3, -0.4]));
    }

    #[test]
    fn sym_well_coordwise_examples() {
        let tau = sym_well_coordwise(well_bump_fn(), 3);
        assert_eq!(tau.eval(&[0.0, 0.5, -1.0]), 0.0);
        assert_eq!(tau.eval(&[2.0, 0.0, 0.0]), 1.0);
        assert_eq!(tau.eval(&[0.0, 2.0, 0.0]), 1.0);
    }

    #[test]
    fn sum_construction_has_unbounded_zero_set() {
        let tau = sym_well_sum(well_bump_fn(), 3);
        for r in [1e1, 1e3, 1e6] {
            let x = [r, -r, 0.0];
            assert!(x.iter().map(|v: &f64| v.abs()).fold(0.0, f64::max) >= r);
            assert_eq!(tau.eval(&x), 0.0);
        }
    }

    #[test]
    fn one_dimensional_checker() {
        let grid = Grid::new(-5.0, 5.0, 10_000).unwrap();
        let (r, z) = check_1d_well(&well_bump_fn(), grid);
        assert!(r.passed(), "{r:?}");
        let z = z.unwrap();
        assert!((z.lo + 1.0).abs() < 2e-3 && (z.hi - 1.0).abs() < 2e-3);

        let (r, _) = check_1d_well(&ScalarFunction::new(1.0, relu), grid);
        assert!(!r.passed());
        assert!(r.witnesses.iter().any(|w| w.detail == "unbounded-at-grid-edge"));

        let odd = Grid::new(-5.0, 5.0, 10_001).unwrap();
        for g in [grid, odd] {
            let (r, z) = check_1d_well(&ScalarFunction::new(10.0, |x| x * x), g);
            assert!(!r.passed());
            assert!(z.is_none());
        }

        assert!(Grid::new(1.0, 1.0, 10).is_err());
        assert!(Grid::new(0.0, 1.0, 2).is_err());
    }

    #[test]
    fn symmetric_checker_on_constructions() {
        let (r, out) = check_symmetric_invariant_well(&sym_well_sum(well_bump_fn(), 3), 500, 1).unwrap();
        assert!(r.passed(), "{r:#?}");
        // |sum| > a - (n-1) b must exceed 1: a ≈ 1 + 2b, first doubling past 3 is 4
        assert_eq!(out.escape_radius, Some(4.0));

        let (r, out) =
            check_symmetric_invariant_well(&sym_well_coordwise(well_bump_fn(), 3), 500, 1).unwrap();
        assert!(r.passed(), "{r:#?}");
        assert_eq!(out.escape_radius, Some(1.0));
    }

    #[test]
    fn zero_function_fails_escape() {
        let zero = SymmetricWellCandidate::new(3, (-1.0, 1.0), |_| 0.0);
        let (r, out) = check_symmetric_invariant_well(&zero, 50, 1).unwrap();
        assert!(!r.passed());
        assert_eq!(out.escape_radius, None);
        assert!(r.witnesses.iter().any(|w| w.detail.contains("escape")));
    }

    #[test]
    fn non_invariant_candidate_fails() {
        let first = SymmetricWellCandidate::new(3, (-1.0, 1.0), |x| well_bump(x[0]));
        let (r, _) = check_symmetric_invariant_well(&first, 200, 1).unwrap();
        assert!(!r.passed());
    }
}
