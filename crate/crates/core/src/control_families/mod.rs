//! Catalog of equivariant control families.
//!
//! Each [`ControlLayer`] is one vector field `f_θ: Rⁿ → Rⁿ` with a flat
//! parameter vector. Layouts (`n` = number of grid cells, `k` = grid rank):
//!
//! | family     | field                                                    | params                                   |
//! |------------|----------------------------------------------------------|------------------------------------------|
//! | `conv1`    | `v σ(w ∗ x + b)`                                          | `w[0..n], v, b`                          |
//! | `conv2`    | `w ∗ σ(v x + b)`                                          | `w[0..n], v, b`                          |
//! | `fs1`      | `a σ(w x + v Σx + b)`                                     | `a, w, v, b`                             |
//! | `fs2`      | `a σ(w x + c) + b Σσ(v x + d)`                            | `a, b, w, v, c, d`                       |
//! | `janossy1` | `v σ(a x + b Σ_i φ(x_i) + c)`, `φ = sigmoid`              | `v, a, b, c`                             |
//! | `janossy2` | `v σ(a x + b Σ_{i,j} φ(x_i, x_j) + c)`, `φ(x,y) = sigmoid(x+y)` | `v, a, b, c`                       |
//! | `fsmax`    | `v σ(a x + b max(x) + c)`                                 | `v, a, b, c`                             |
//! | `prod2d_1` | `v σ(w0 x + wr1 Σ_r x + wc1 Σ_c x + c)`                   | `v, w0, wr1, wc1, c`                     |
//! | `prod2d_2` | adds `wr2 Σ_{r,2} x + wc2 Σ_{c,2} x`                      | `v, w0, wr1, wc1, wr2, wc2, c`           |
//! | `prodkd_1` | `v σ(w0 x + Σ_s w_{s,1} Σ_{s,1} x + c)`                   | `v, w0, w_{1,1}..w_{k,1}, c`             |
//! | `prodkd_2` | adds `Σ_s w_{s,2} Σ_{s,2} x`                              | `v, w0, w_{·,1}, w_{·,2}, c`             |
//! | `gamma1`   | `a γ(x) 1`, `γ(x) = well_bump(Σx)`                        | `a`                                      |
//! | `linear`   | `λ x` (integrator benchmarks only)                        | `λ`                                      |
//!
//! Scalars multiplying `1` are broadcast; `Σx` is the coordinate sum.

pub mod activation;
pub mod lattice;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;


pub use activation::{sigmoid, Activation};
pub use lattice::{circular_convolution, Lattice};

use crate::error::{Error, Result};
use crate::perm_group::GroupSpec;
use crate::well_functions::well_bump;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Conv1,
    Conv2,
    Fs1,
    Fs2,
    Janossy1,
    Janossy2,
    FsMax,
    Prod2d1,
    Prod2d2,
    ProdKd1,
    ProdKd2,
    Gamma1,
    Linear,
}

impl Family {
    /// Every family from the catalog (the linear benchmark field excluded).
    pub const CATALOG: [Family; 12] = [
        Family::Conv1,
        Family::Conv2,
        Family::Fs1,
        Family::Fs2,
        Family::Janossy1,
        Family::Janossy2,
        Family::FsMax,
        Family::Prod2d1,
        Family::Prod2d2,
        Family::ProdKd1,
        Family::ProdKd2,
        Family::Gamma1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Conv1 => "conv1",
            Family::Conv2 => "conv2",
            Family::Fs1 => "fs1",
            Family::Fs2 => "fs2",
            Family::Janossy1 => "janossy1",
            Family::Janossy2 => "janossy2",
            Family::FsMax => "fsmax",
            Family::Prod2d1 => "prod2d_1",
            Family::Prod2d2 => "prod2d_2",
            Family::ProdKd1 => "prodkd_1",
            Family::ProdKd2 => "prodkd_2",
            Family::Gamma1 => "gamma1",
            Family::Linear => "linear",
        }
    }

    pub fn is_convolutional(self) -> bool {
        matches!(self, Family::Conv1 | Family::Conv2)
    }

    pub fn is_product(self) -> bool {
        matches!(
            self,
            Family::Prod2d1 | Family::Prod2d2 | Family::ProdKd1 | Family::ProdKd2
        )
    }

    pub fn uses_activation(self) -> bool {
        !matches!(self, Family::Gamma1 | Family::Linear)
    }

    fn product_order(self) -> usize {
        match self {
            Family::Prod2d2 | Family::ProdKd2 => 2,
            _ => 1,
        }
    }

    pub fn validate_dims(self, dims: &[usize]) -> Result<()> {
        let bad = |why: &str| {
            Err(Error::InvalidArgument(format!(
                "{} needs {why}, got dims {dims:?}",
                self.name()
            )))
        };
        if dims.is_empty() || dims.contains(&0) {
            return bad("positive dimensions");
        }
        match self {
            Family::Conv1 | Family::Conv2 => Ok(()),
            Family::Prod2d1 | Family::Prod2d2 if dims.len() != 2 => bad("exactly two dimensions"),
            Family::ProdKd1 | Family::ProdKd2 if dims.len() < 2 => bad("at least two dimensions"),
            Family::Prod2d1 | Family::Prod2d2 | Family::ProdKd1 | Family::ProdKd2 => Ok(()),
            _ if dims.len() != 1 => bad("a single dimension"),
            _ => Ok(()),
        }
    }

    pub fn param_count(self, dims: &[usize]) -> usize {
        let n: usize = dims.iter().product();
        match self {
            Family::Conv1 | Family::Conv2 => n + 2,
            Family::Fs1 | Family::Janossy1 | Family::Janossy2 | Family::FsMax => 4,
            Family::Fs2 => 6,
            Family::Prod2d1 | Family::Prod2d2 | Family::ProdKd1 | Family::ProdKd2 => {
                3 + self.product_order() * dims.len()
            }
            Family::Gamma1 | Family::Linear => 1,
        }
    }

    pub fn param_names(self, dims: &[usize]) -> Vec<String> {
        let own = |names: &[&str]| names.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        match self {
            Family::Conv1 | Family::Conv2 => {
                let n: usize = dims.iter().product();
                let mut v: Vec<String> = (1..=n).map(|k| format!("w{k}")).collect();
                v.extend(own(&["v", "b"]));
                v
            }
            Family::Fs1 => own(&["a", "w", "v", "b"]),
            Family::Fs2 => own(&["a", "b", "w", "v", "c", "d"]),
            Family::Janossy1 | Family::Janossy2 | Family::FsMax => own(&["v", "a", "b", "c"]),
            Family::Prod2d1 => own(&["v", "w0", "wr1", "wc1", "c"]),
            Family::Prod2d2 => own(&["v", "w0", "wr1", "wc1", "wr2", "wc2", "c"]),
            Family::ProdKd1 | Family::ProdKd2 => {
                let mut v = own(&["v", "w0"]);
                for order in 1..=self.product_order() {
                    for s in 1..=dims.len() {
                        v.push(format!("w{s}_{order}"));
                    }
                }
                v.push("c".into());
                v
            }
            Family::Gamma1 => own(&["a"]),
            Family::Linear => own(&["lambda"]),
        }
    }

    /// Symmetry group the family is equivariant under.
    pub fn declared_group(self, dims: &[usize]) -> GroupSpec {
        let n: usize = dims.iter().product();
        match self {
            Family::Conv1 | Family::Conv2 if dims.len() == 1 => GroupSpec::Translation1d(n),
            Family::Conv1 | Family::Conv2 => GroupSpec::TranslationNd(dims.to_vec()),
            f if f.is_product() => GroupSpec::Product(dims.to_vec()),
            _ => GroupSpec::Symmetric(n),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::CATALOG
            .iter()
            .chain(std::iter::once(&Family::Linear))
            .find(|f| f.name() == s)
            .copied()
            .ok_or_else(|| Error::Unknown {
                kind: "control family",
                name: s.to_string(),
            })
    }
}

/// One member `f_θ` of a control family.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlLayer {
    family: Family,
    lattice: Arc<Lattice>,
    activation: Activation,
    params: Vec<f64>,
}

impl ControlLayer {
    pub fn new(
        family: Family,
        dims: &[usize],
        activation: Activation,
        params: Vec<f64>,
    ) -> Result<Self> {
        family.validate_dims(dims)?;
        let lattice = Arc::new(Lattice::new(dims)?);
        Self::with_lattice(family, lattice, activation, params)
    }

    fn with_lattice(
        family: Family,
        lattice: Arc<Lattice>,
        activation: Activation,
        params: Vec<f64>,
    ) -> Result<Self> {
        let expected = family.param_count(lattice.dims());
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: params.len(),
            });
        }
        if let Some(p) = params.iter().find(|p| !p.is_finite()) {
            return Err(Error::NonFinite(format!("{} parameter {p}", family.name())));
        }
        Ok(ControlLayer {
            family,
            lattice,
            activation,
            params,
        })
    }

    /// Parameters drawn uniformly from `[-scale, scale]`.
    pub fn random(
        family: Family,
        dims: &[usize],
        activation: Activation,
        scale: f64,
        rng: &mut impl rand::Rng,
    ) -> Result<Self> {
        let count = family.param_count(dims);
        let params = (0..count).map(|_| rng.gen_range(-scale..=scale)).collect();
        Self::new(family, dims, activation, params)
    }

    /// Same family and shape with new parameters.
    pub fn with_params(&self, params: Vec<f64>) -> Result<Self> {
        Self::with_lattice(self.family, self.lattice.clone(), self.activation, params)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn dims(&self) -> &[usize] {
        self.lattice.dims()
    }

    pub fn degree(&self) -> usize {
        self.lattice.len()
    }

    pub fn declared_group(&self) -> GroupSpec {
        self.family.declared_group(self.dims())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.degree() {
            return Err(Error::DimensionMismatch {
                expected: self.degree(),
                got: len,
            });
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        let mut out = vec![0.0; x.len()];
        self.eval_into(x, &mut out);
        Ok(out)
    }

    /// `out = f_θ(x)`; lengths are the caller's responsibility.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let p = &self.params;
        let act = self.activation;
        let n = self.degree();
        match self.family {
            Family::Conv1 => {
                let (w, rest) = p.split_at(n);
                let (v, b) = (rest[0], rest[1]);
                self.lattice.correlate_into(w, x, out);
                for o in out.iter_mut() {
                    *o = v * act.eval(*o + b);
                }
            }
            Family::Conv2 => {
                let (w, rest) = p.split_at(n);
                let (v, b) = (rest[0], rest[1]);
                with_scratch(n, |s| {
                    for (si, &xi) in s.iter_mut().zip(x) {
                        *si = act.eval(v * xi + b);
                    }
                    self.lattice.correlate_into(w, s, out);
                });
            }
            Family::Fs1 => {
                let (a, w, v, b) = (p[0], p[1], p[2], p[3]);
                let shift = v * x.iter().sum::<f64>() + b;
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = a * act.eval(w * xi + shift);
                }
            }
            Family::Fs2 => {
                let (a, bb, w, v, c, d) = (p[0], p[1], p[2], p[3], p[4], p[5]);
                let pooled: f64 = x.iter().map(|&xi| act.eval(v * xi + d)).sum();
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = a * act.eval(w * xi + c) + bb * pooled;
                }
            }
            Family::Janossy1 | Family::Janossy2 | Family::FsMax => {
                let (v, a, b, c) = (p[0], p[1], p[2], p[3]);
                let shift = b * self.pooled_scalar(x) + c;
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = v * act.eval(a * xi + shift);
                }
            }
            Family::Prod2d1 | Family::Prod2d2 | Family::ProdKd1 | Family::ProdKd2 => {
                let z = self.product_preactivation(x);
                let v = p[0];
                for (o, zi) in out.iter_mut().zip(z) {
                    *o = v * act.eval(zi);
                }
            }
            Family::Gamma1 => {
                let g = p[0] * well_bump(x.iter().sum());
                out.fill(g);
            }
            Family::Linear => {
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = p[0] * xi;
                }
            }
        }
    }

    /// The invariant scalar fed back into every coordinate by the pooled
    /// families: `Σ φ(x_i)`, `Σ_{i,j} φ(x_i + x_j)` or `max x`.
    pub(crate) fn pooled_scalar(&self, x: &[f64]) -> f64 {
        match self.family {
            Family::Janossy1 => x.iter().map(|&xi| sigmoid(xi)).sum(),
            Family::Janossy2 => {
                let mut acc = 0.0;
                for &xi in x {
                    for &xj in x {
                        acc += sigmoid(xi + xj);
                    }
                }
                acc
            }
            Family::FsMax => x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            _ => unreachable!("not a pooled family"),
        }
    }

    /// Gradient of [`Self::pooled_scalar`] scaled by `scale`, added to `grad_x`.
    fn pooled_scalar_adjoint(&self, x: &[f64], scale: f64, grad_x: &mut [f64]) {
        match self.family {
            Family::Janossy1 => {
                for (g, &xi) in grad_x.iter_mut().zip(x) {
                    let s = sigmoid(xi);
                    *g += scale * s * (1.0 - s);
                }
            }
            Family::Janossy2 => {
                for (m, g) in grad_x.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for &xj in x {
                        let s = sigmoid(x[m] + xj);
                        acc += s * (1.0 - s);
                    }
                    *g += scale * 2.0 * acc;
                }
            }
            Family::FsMax => {
                let mut best = 0;
                for (i, &xi) in x.iter().enumerate() {
                    if xi > x[best] {
                        best = i;
                    }
                }
                grad_x[best] += scale;
            }
            _ => unreachable!("not a pooled family"),
        }
    }

    fn product_preactivation(&self, x: &[f64]) -> Vec<f64> {
        let p = &self.params;
        let rank = self.lattice.rank();
        let order = self.family.product_order();
        let w0 = p[1];
        let c = p[p.len() - 1];
        let mut z: Vec<f64> = x.iter().map(|&xi| w0 * xi + c).collect();
        for s in 0..rank {
            let sums = self.lattice.axis_sums(x, s);
            let w1 = p[2 + s];
            let w2 = if order == 2 { p[2 + rank + s] } else { 0.0 };
            for (i, zi) in z.iter_mut().enumerate() {
                let h = sums[self.lattice.coord(i, s)];
                *zi += w1 * h + w2 * h * h;
            }
        }
        z
    }

    /// Length of the per-step record kept by [`Self::eval_taped`]; zero for
    /// families whose backward pass recomputes everything.
    pub(crate) fn tape_len(&self) -> usize {
        match self.family {
            Family::Conv1 | Family::Conv2 | Family::Fs1 => self.degree(),
            _ => 0,
        }
    }

    /// Activation values `s_i` that both passes share.
    fn activations_into(&self, x: &[f64], s: &mut [f64]) {
        let p = &self.params;
        let act = self.activation;
        let n = self.degree();
        match self.family {
            Family::Conv1 => {
                let b = p[n + 1];
                self.lattice.correlate_into(&p[..n], x, s);
                for si in s.iter_mut() {
                    *si = act.eval(*si + b);
                }
            }
            Family::Conv2 => {
                let (v, b) = (p[n], p[n + 1]);
                for (si, &xi) in s.iter_mut().zip(x) {
                    *si = act.eval(v * xi + b);
                }
            }
            Family::Fs1 => {
                let (w, v, b) = (p[1], p[2], p[3]);
                let shift = v * x.iter().sum::<f64>() + b;
                for (si, &xi) in s.iter_mut().zip(x) {
                    *si = act.eval(w * xi + shift);
                }
            }
            _ => unreachable!("family keeps no tape"),
        }
    }

    /// [`Self::eval_into`] that also records what [`Self::vjp_taped`] needs.
    /// `tape` must have length [`Self::tape_len`].
    pub(crate) fn eval_taped(&self, x: &[f64], out: &mut [f64], tape: &mut [f64]) {
        if tape.is_empty() {
            return self.eval_into(x, out);
        }
        self.activations_into(x, tape);
        let p = &self.params;
        let n = self.degree();
        match self.family {
            Family::Conv1 => {
                let v = p[n];
                for (o, &s) in out.iter_mut().zip(tape.iter()) {
                    *o = v * s;
                }
            }
            Family::Conv2 => self.lattice.correlate_into(&p[..n], tape, out),
            Family::Fs1 => {
                let a = p[0];
                for (o, &s) in out.iter_mut().zip(tape.iter()) {
                    *o = a * s;
                }
            }
            _ => unreachable!("family keeps no tape"),
        }
    }

    /// [`Self::vjp_accumulate`] reusing a tape from [`Self::eval_taped`] at the same `x`.
    pub(crate) fn vjp_taped(&self, x: &[f64], tape: &[f64], cot: &[f64], grad_params: &mut [f64], grad_x: &mut [f64]) {
        if tape.is_empty() {
            return self.vjp_accumulate(x, cot, grad_params, grad_x);
        }
        let p = &self.params;
        let act = self.activation;
        let n = self.degree();
        match self.family {
            Family::Conv1 => {
                let (w, rest) = p.split_at(n);
                let v = rest[0];
                with_scratch(n, |delta| {
                    let (mut gv, mut gb) = (0.0, 0.0);
                    for i in 0..n {
                        let s = tape[i];
                        gv += cot[i] * s;
                        delta[i] = cot[i] * v * act.derivative_from_value(s);
                        gb += delta[i];
                    }
                    let (gw, grest) = grad_params.split_at_mut(n);
                    self.lattice.correlate_adjoint(w, x, delta, gw, grad_x);
                    grest[0] += gv;
                    grest[1] += gb;
                });
            }
            Family::Conv2 => {
                let (w, rest) = p.split_at(n);
                let v = rest[0];
                with_scratch(n, |s_bar| {
                    let (gw, grest) = grad_params.split_at_mut(n);
                    self.lattice.correlate_adjoint(w, tape, cot, gw, s_bar);
                    let (mut gv, mut gb) = (0.0, 0.0);
                    for i in 0..n {
                        let d = s_bar[i] * act.derivative_from_value(tape[i]);
                        gv += d * x[i];
                        gb += d;
                        grad_x[i] += v * d;
                    }
                    grest[0] += gv;
                    grest[1] += gb;
                });
            }
            Family::Fs1 => {
                let (a, w, v) = (p[0], p[1], p[2]);
                let sum: f64 = x.iter().sum();
                let (mut ga, mut gw, mut sd) = (0.0, 0.0, 0.0);
                for i in 0..n {
                    let s = tape[i];
                    ga += cot[i] * s;
                    let d = cot[i] * a * act.derivative_from_value(s);
                    gw += d * x[i];
                    sd += d;
                    grad_x[i] += w * d;
                }
                for g in grad_x.iter_mut() {
                    *g += v * sd;
                }
                grad_params[0] += ga;
                grad_params[1] += gw;
                grad_params[2] += sum * sd;
                grad_params[3] += sd;
            }
            _ => unreachable!("family keeps no tape"),
        }
    }

    /// Reverse-mode derivatives of `⟨cotangent, f_θ(x)⟩`, returned as
    /// `(grad_θ, grad_x)`.
    pub fn vjp(&self, x: &[f64], cotangent: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_len(x.len())?;
        self.check_len(cotangent.len())?;
        let mut gp = vec![0.0; self.params.len()];
        let mut gx = vec![0.0; x.len()];
        self.vjp_accumulate(x, cotangent, &mut gp, &mut gx);
        if gp.iter().chain(&gx).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "{} gradient at x = {x:?}",
                self.family.name()
            )));
        }
        Ok((gp, gx))
    }

    /// Adds the vector-Jacobian products into `grad_params` and `grad_x`.
    pub fn vjp_accumulate(
        &self,
        x: &[f64],
        cot: &[f64],
        grad_params: &mut [f64],
        grad_x: &mut [f64],
    ) {
        let p = &self.params;
        let act = self.activation;
        let n = self.degree();
        match self.family {
            Family::Conv1 | Family::Conv2 | Family::Fs1 => with_scratch(n, |s| {
                self.activations_into(x, s);
                self.vjp_taped(x, s, cot, grad_params, grad_x);
            }),
            Family::Fs2 => {
                let (a, bb, w, v, c, d) = (p[0], p[1], p[2], p[3], p[4], p[5]);
                let cot_sum: f64 = cot.iter().sum();
                let (mut ga, mut gw, mut gc) = (0.0, 0.0, 0.0);
                let (mut pooled, mut gv, mut gd) = (0.0, 0.0, 0.0);
                for i in 0..n {
                    let (s, ds) = act.eval_with_derivative(w * x[i] + c);
                    ga += cot[i] * s;
                    let dp = cot[i] * a * ds;
                    gw += dp * x[i];
                    gc += dp;
                    let (q, dq) = act.eval_with_derivative(v * x[i] + d);
                    pooled += q;
                    let dqi = bb * cot_sum * dq;
                    gv += dqi * x[i];
                    gd += dqi;
                    grad_x[i] += w * dp + v * dqi;
                }
                grad_params[0] += ga;
                grad_params[1] += cot_sum * pooled;
                grad_params[2] += gw;
                grad_params[3] += gv;
                grad_params[4] += gc;
                grad_params[5] += gd;
            }
            Family::Janossy1 | Family::Janossy2 | Family::FsMax => {
                let (v, a, b, c) = (p[0], p[1], p[2], p[3]);
                let pooled = self.pooled_scalar(x);
                let shift = b * pooled + c;
                let (mut gv, mut ga, mut sd) = (0.0, 0.0, 0.0);
                for i in 0..n {
                    let (s, ds) = act.eval_with_derivative(a * x[i] + shift);
                    gv += cot[i] * s;
                    let d = cot[i] * v * ds;
                    ga += d * x[i];
                    sd += d;
                    grad_x[i] += a * d;
                }
                self.pooled_scalar_adjoint(x, b * sd, grad_x);
                grad_params[0] += gv;
                grad_params[1] += ga;
                grad_params[2] += pooled * sd;
                grad_params[3] += sd;
            }
            Family::Prod2d1 | Family::Prod2d2 | Family::ProdKd1 | Family::ProdKd2 => {
                let rank = self.lattice.rank();
                let order = self.family.product_order();
                let (v, w0) = (p[0], p[1]);
                let z = self.product_preactivation(x);
                let mut delta = vec![0.0; n];
                let mut gv = 0.0;
                for i in 0..n {
                    let (s, ds) = act.eval_with_derivative(z[i]);
                    gv += cot[i] * s;
                    delta[i] = cot[i] * v * ds;
                }
                grad_params[0] += gv;
                let last = grad_params.len() - 1;
                for i in 0..n {
                    grad_params[1] += delta[i] * x[i];
                    grad_params[last] += delta[i];
                    grad_x[i] += w0 * delta[i];
                }
                for s in 0..rank {
                    let sums = self.lattice.axis_sums(x, s);
                    let dsums = self.lattice.axis_sums(&delta, s);
                    let w1 = p[2 + s];
                    let w2 = if order == 2 { p[2 + rank + s] } else { 0.0 };
                    for (h, dh) in sums.iter().zip(&dsums) {
                        grad_params[2 + s] += dh * h;
                        if order == 2 {
                            grad_params[2 + rank + s] += dh * h * h;
                        }
                    }
                    for (i, g) in grad_x.iter_mut().enumerate() {
                        let slot = self.lattice.coord(i, s);
                        *g += (w1 + 2.0 * w2 * sums[slot]) * dsums[slot];
                    }
                }
            }
            Family::Gamma1 => {
                let sum: f64 = x.iter().sum();
                let cot_sum: f64 = cot.iter().sum();
                grad_params[0] += cot_sum * well_bump(sum);
                let slope = if sum > 1.0 {
                    1.0
                } else if sum < -1.0 {
                    -1.0
                } else {
                    0.0
                };
                let g = p[0] * cot_sum * slope;
                for gx in grad_x.iter_mut() {
                    *gx += g;
                }
            }
            Family::Linear => {
                let mut gl = 0.0;
                for i in 0..n {
                    gl += cot[i] * x[i];
                    grad_x[i] += p[0] * cot[i];
                }
                grad_params[0] += gl;
            }
        }
    }

    /// The first-coordinate scalar representative `x ↦ [f_θ(x)]_1`.
    pub fn coor_representative(&self) -> CoorRepresentative {
        CoorRepresentative {
            layer: self.clone(),
        }
    }
}

/// `x ↦ [f(x)]_1` for an equivariant layer `f`; invariant under the
/// stabilizer of index 1 in the layer's declared group.
#[derive(Clone, Debug)]
pub struct CoorRepresentative {
    layer: ControlLayer,
}

impl CoorRepresentative {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(self.layer.eval(x)?[0])
    }

    pub fn degree(&self) -> usize {
        self.layer.degree()
    }
}

impl fmt::Display for ControlLayer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dims: Vec<String> = self.dims().iter().map(|d| d.to_string()).collect();
        let params: Vec<String> = self.params.iter().map(|p| p.to_string()).collect();
        write!(
            f,
            "{} dims={} act={} params={}",
            self.family,
            dims.join("x"),
            self.activation,
            params.join(",")
        )
    }
}

impl FromStr for ControlLayer {
    type Err = Error;

    /// Parses `family dims=AxB act=tanh params=p1,p2,...`.
    fn from_str(s: &str) -> Result<Self> {
        let mut tokens = s.split_whitespace();
        let family: Family = tokens
            .next()
            .ok_or_else(|| Error::Parse("empty layer record".into()))?
            .parse()?;
        let (mut dims, mut act, mut params) = (None, None, None);
        for tok in tokens {
            let (key, value) = tok
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{tok}`")))?;
            match key {
                "dims" => {
                    dims = Some(
                        value
                            .split('x')
                            .map(|d| {
                                d.parse::<usize>()
                                    .map_err(|e| Error::Parse(format!("bad dim `{d}`: {e}")))
                            })
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                "act" => act = Some(value.parse::<Activation>()?),
                "params" => {
                    params = Some(
                        value
                            .split(',')
                            .filter(|v| !v.is_empty())
                            .map(|v| {
                                v.parse::<f64>()
                                    .map_err(|e| Error::Parse(format!("bad parameter `{v}`: {e}")))
                            })
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                other => return Err(Error::Parse(format!("unknown layer key `{other}`"))),
            }
        }
        let dims = dims.ok_or_else(|| Error::Parse("layer record missing dims".into()))?;
        let act = act.unwrap_or(Activation::Tanh);
        let params = params.ok_or_else(|| Error::Parse("layer record missing params".into()))?;
        ControlLayer::new(family, &dims, act, params)
    }
}

/// A family at a fixed shape and activation, i.e. a layer minus its parameters.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LayerShape {
    pub family: Family,
    pub dims: Vec<usize>,
    pub activation: Activation,
}

impl LayerShape {
    pub fn new(family: Family, dims: &[usize], activation: Activation) -> Result<Self> {
        family.validate_dims(dims)?;
        Ok(LayerShape {
            family,
            dims: dims.to_vec(),
            activation,
        })
    }

    pub fn degree(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn param_count(&self) -> usize {
        self.family.param_count(&self.dims)
    }

    pub fn declared_group(&self) -> GroupSpec {
        self.family.declared_group(&self.dims)
    }

    pub fn layer(&self, params: Vec<f64>) -> Result<ControlLayer> {
        ControlLayer::new(self.family, &self.dims, self.activation, params)
    }

    pub fn random(&self, scale: f64, rng: &mut impl rand::Rng) -> Result<ControlLayer> {
        ControlLayer::random(self.family, &self.dims, self.activation, scale, rng)
    }
}

impl fmt::Display for LayerShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "{} dims={} act={}", self.family, dims.join("x"), self.activation)
    }
}

/// Runs `f` on a zeroed buffer of length `len`, on the stack when small.
fn with_scratch<R>(len: usize, f: impl FnOnce(&mut [f64]) -> R) -> R {
    const STACK: usize = 48;
    if len <= STACK {
        let mut buf = [0.0; STACK];
        f(&mut buf[..len])
    } else {
        f(&mut vec![0.0; len])
    }
}

/// Default dims used when exercising a family at a given size.
pub fn default_dims(family: Family, n: usize) -> Vec<usize> {
    match family {
        Family::Prod2d1 | Family::Prod2d2 | Family::ProdKd1 | Family::ProdKd2 => vec![2, n.div_ceil(2).max(2)],
        _ => vec![n],
    }
}
