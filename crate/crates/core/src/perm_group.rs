//! Permutation groups acting on coordinate indices.
//!
//! Indices are 1-based at every public boundary: `Permutation::apply(1)` asks
//! for the image of the first coordinate. Storage is 0-based.
//!
//! Conventions:
//! - `p.act_vector(x)[i] = x[p(i)]`, so acting twice composes in reverse:
//!   `compose(p, q).act_vector(x) == q.act_vector(&p.act_vector(x))`.
//! - `p.compose(q)` is `p ∘ q` on indices (apply `q` first).
//! - The cross section of `a` is `Q_a = {x : x[a⁻¹(1)] > ... > x[a⁻¹(n)]}`,
//!   and `Q_a = a(Q_e)`. Acting by `g` sends `Q_a` to `Q_{a∘g}`, so the
//!   pieces `g(Q_A)` tile the general-position points exactly when `A` holds
//!   one representative of every coset `a∘G`. Transversals are built that way.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::report::{VerificationReport, Witness};
use crate::seed;

/// Default bound on the number of elements `PermGroup::generate` will produce.
pub const DEFAULT_GROUP_CAP: usize = 1_000_000;
/// Largest degree for which `S_n` is enumerated explicitly.
pub const MAX_ENUMERABLE_DEGREE: usize = 8;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: Vec<u32>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation {
            images: (0..n as u32).collect(),
        }
    }

    /// Builds a permutation from its 1-based image list, `images[i-1] = p(i)`.
    pub fn from_images(images: &[usize]) -> Result<Self> {
        let zero: Vec<usize> = images
            .iter()
            .map(|&v| {
                v.checked_sub(1).ok_or_else(|| {
                    Error::InvalidPermutation(format!("index 0 in image list {images:?}"))
                })
            })
            .collect::<Result<_>>()?;
        Self::from_zero_based(&zero)
    }

    pub(crate) fn from_zero_based(images: &[usize]) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &v in images {
            if v >= n || seen[v] {
                return Err(Error::InvalidPermutation(format!(
                    "{:?} is not a bijection on 1..{n}",
                    images.iter().map(|v| v + 1).collect::<Vec<_>>()
                )));
            }
            seen[v] = true;
        }
        Ok(Permutation {
            images: images.iter().map(|&v| v as u32).collect(),
        })
    }

    /// Builds a permutation of degree `n` from 1-based cycles, e.g. `[[1, 2, 3]]`.
    pub fn from_cycles(n: usize, cycles: &[Vec<usize>]) -> Result<Self> {
        let mut images: Vec<usize> = (0..n).collect();
        let mut touched = vec![false; n];
        for cycle in cycles {
            for (k, &i) in cycle.iter().enumerate() {
                if i == 0 || i > n {
                    return Err(Error::IndexOutOfRange {
                        index: i,
                        degree: n,
                    });
                }
                if touched[i - 1] {
                    return Err(Error::InvalidPermutation(format!(
                        "index {i} appears in more than one cycle"
                    )));
                }
                touched[i - 1] = true;
                images[i - 1] = cycle[(k + 1) % cycle.len()] - 1;
            }
        }
        Self::from_zero_based(&images)
    }

    pub fn transposition(n: usize, i: usize, j: usize) -> Result<Self> {
        if i == j {
            return Err(Error::InvalidArgument(format!(
                "transposition needs distinct indices, got ({i} {j})"
            )));
        }
        Self::from_cycles(n, &[vec![i, j]])
    }

    /// The cyclic shift `t(i) = i + 1`, with `t(n) = 1`.
    pub fn shift(n: usize) -> Self {
        Permutation {
            images: (0..n as u32).map(|i| (i + 1) % n as u32).collect(),
        }
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    /// 1-based image list.
    pub fn images(&self) -> Vec<usize> {
        self.images.iter().map(|&v| v as usize + 1).collect()
    }

    /// `p(i)` for a 1-based index.
    pub fn apply(&self, i: usize) -> Result<usize> {
        if i == 0 || i > self.degree() {
            return Err(Error::IndexOutOfRange {
                index: i,
                degree: self.degree(),
            });
        }
        Ok(self.images[i - 1] as usize + 1)
    }

    #[inline]
    pub(crate) fn apply0(&self, i: usize) -> usize {
        self.images[i] as usize
    }

    /// `y[i] = x[p(i)]`.
    pub fn act_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        Ok(self.images.iter().map(|&j| x[j as usize]).collect())
    }

    pub(crate) fn act_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, &j) in out.iter_mut().zip(&self.images) {
            *o = x[j as usize];
        }
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

    /// `self ∘ other` on indices.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        self.check_len(other.degree())?;
        Ok(Permutation {
            images: other
                .images
                .iter()
                .map(|&j| self.images[j as usize])
                .collect(),
        })
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0u32; self.degree()];
        for (i, &j) in self.images.iter().enumerate() {
            inv[j as usize] = i as u32;
        }
        Permutation { images: inv }
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &j)| i as u32 == j)
    }

    /// Nontrivial cycles, 1-based, each starting at its smallest index.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.degree();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] || self.apply0(start) == start {
                continue;
            }
            let mut cycle = Vec::new();
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                cycle.push(i + 1);
                i = self.apply0(i);
            }
            out.push(cycle);
        }
        out
    }

    /// Parses cycle notation such as `(1 2 3)(4 5)` or `()`.
    pub fn parse_cycles(n: usize, text: &str) -> Result<Self> {
        let mut cycles = Vec::new();
        let mut rest = text.trim();
        while !rest.is_empty() {
            let open = rest
                .strip_prefix('(')
                .ok_or_else(|| Error::Parse(format!("expected `(` in cycle notation `{text}`")))?;
            let close = open
                .find(')')
                .ok_or_else(|| Error::Parse(format!("unclosed cycle in `{text}`")))?;
            let body = &open[..close];
            let cycle: Vec<usize> = body
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|e| Error::Parse(format!("bad index `{s}`: {e}")))
                })
                .collect::<Result<_>>()?;
            if !cycle.is_empty() {
                cycles.push(cycle);
            }
            rest = open[close + 1..].trim_start();
        }
        Self::from_cycles(n, &cycles)
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Permutation{:?}", self.images())
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cycles = self.cycles();
        if cycles.is_empty() {
            return write!(f, "()");
        }
        for c in cycles {
            let body: Vec<String> = c.iter().map(|i| i.to_string()).collect();
            write!(f, "({})", body.join(" "))?;
        }
        Ok(())
    }
}

/// All permutations of degree `n` in lexicographic order of their image lists.
pub fn all_permutations(n: usize) -> Result<Vec<Permutation>> {
    if n > MAX_ENUMERABLE_DEGREE {
        return Err(Error::DegreeTooLarge {
            degree: n,
            max: MAX_ENUMERABLE_DEGREE,
        });
    }
    let mut current: Vec<u32> = (0..n as u32).collect();
    let mut out = vec![Permutation {
        images: current.clone(),
    }];
    while next_lex(&mut current) {
        out.push(Permutation {
            images: current.clone(),
        });
    }
    Ok(out)
}

fn next_lex(v: &mut [u32]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// 1-based row-major flattening of a multi-index over `dims`.
pub fn flatten_index(dims: &[usize], multi: &[usize]) -> Result<usize> {
    if dims.len() != multi.len() {
        return Err(Error::DimensionMismatch {
            expected: dims.len(),
            got: multi.len(),
        });
    }
    let mut flat = 0usize;
    for (&d, &i) in dims.iter().zip(multi) {
        if i == 0 || i > d {
            return Err(Error::IndexOutOfRange {
                index: i,
                degree: d,
            });
        }
        flat = flat * d + (i - 1);
    }
    Ok(flat + 1)
}

/// Inverse of [`flatten_index`].
pub fn unflatten_index(dims: &[usize], flat: usize) -> Result<Vec<usize>> {
    let n: usize = dims.iter().product();
    if flat == 0 || flat > n {
        return Err(Error::IndexOutOfRange {
            index: flat,
            degree: n,
        });
    }
    let mut rem = flat - 1;
    let mut multi = vec![0; dims.len()];
    for (k, &d) in dims.iter().enumerate().rev() {
        multi[k] = rem % d + 1;
        rem /= d;
    }
    Ok(multi)
}

#[derive(Clone, Debug)]
pub struct PermGroup {
    degree: usize,
    elements: Vec<Permutation>,
    members: HashSet<Permutation>,
    generators: Vec<Permutation>,
}

impl PermGroup {
    /// Smallest group containing `generators`, by breadth-first closure.
    pub fn generate(degree: usize, generators: &[Permutation]) -> Result<Self> {
        Self::generate_with_cap(degree, generators, DEFAULT_GROUP_CAP)
    }

    pub fn generate_with_cap(
        degree: usize,
        generators: &[Permutation],
        cap: usize,
    ) -> Result<Self> {
        for g in generators {
            if g.degree() != degree {
                return Err(Error::DimensionMismatch {
                    expected: degree,
                    got: g.degree(),
                });
            }
        }
        let id = Permutation::identity(degree);
        let mut members = HashSet::new();
        members.insert(id.clone());
        let mut queue = VecDeque::from([id]);
        while let Some(p) = queue.pop_front() {
            for g in generators {
                let q = p.compose(g)?;
                if members.insert(q.clone()) {
                    if members.len() > cap {
                        return Err(Error::GroupTooLarge { cap });
                    }
                    queue.push_back(q);
                }
            }
        }
        let mut elements: Vec<Permutation> = members.iter().cloned().collect();
        elements.sort();
        Ok(PermGroup {
            degree,
            elements,
            members,
            generators: generators.to_vec(),
        })
    }

    fn from_elements(degree: usize, elements: Vec<Permutation>) -> Self {
        let members = elements.iter().cloned().collect();
        let generators = elements.iter().filter(|p| !p.is_identity()).cloned().collect();
        PermGroup {
            degree,
            elements,
            members,
            generators,
        }
    }

    pub fn trivial(n: usize) -> Self {
        Self::from_elements(n, vec![Permutation::identity(n)])
    }

    pub fn symmetric(n: usize) -> Result<Self> {
        let mut gens = Vec::new();
        if n >= 2 {
            gens.push(Permutation::transposition(n, 1, 2)?);
        }
        if n >= 3 {
            gens.push(Permutation::from_cycles(n, &[(1..=n).collect()])?);
        }
        Self::generate(n, &gens)
    }

    /// Cyclic shifts `{t, t², ..., tⁿ}` with `t(i) = i + 1`.
    pub fn translation_1d(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("degree must be positive".into()));
        }
        Self::generate(n, &[Permutation::shift(n)])
    }

    /// Periodic translations of a `d1 × ... × dN` grid, flattened row-major.
    pub fn translation_nd(dims: &[usize]) -> Result<Self> {
        let gens = axis_maps(dims, |d| vec![Permutation::shift(d)])?;
        Self::generate(dims.iter().product(), &gens)
    }

    /// `S_{d1} × ... × S_{dk}` acting axis-wise on a flattened row-major grid.
    pub fn product(dims: &[usize]) -> Result<Self> {
        let gens = axis_maps(dims, |d| {
            let mut g = Vec::new();
            if d >= 2 {
                g.push(Permutation::transposition(d, 1, 2).expect("d >= 2"));
            }
            if d >= 3 {
                g.push(Permutation::from_cycles(d, &[(1..=d).collect()]).expect("valid cycle"));
            }
            g
        })?;
        Self::generate(dims.iter().product(), &gens)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    /// Elements in lexicographic order of their image lists.
    pub fn elements(&self) -> &[Permutation] {
        &self.elements
    }

    pub fn generators(&self) -> &[Permutation] {
        &self.generators
    }

    pub fn contains(&self, p: &Permutation) -> bool {
        self.members.contains(p)
    }

    /// Orbit of a 1-based index, sorted.
    pub fn orbit(&self, i: usize) -> Result<Vec<usize>> {
        if i == 0 || i > self.degree {
            return Err(Error::IndexOutOfRange {
                index: i,
                degree: self.degree,
            });
        }
        let mut seen = vec![false; self.degree];
        for g in &self.elements {
            seen[g.apply0(i - 1)] = true;
        }
        Ok((0..self.degree).filter(|&k| seen[k]).map(|k| k + 1).collect())
    }

    pub fn is_transitive(&self) -> bool {
        self.degree > 0
            && self
                .orbit(1)
                .map(|o| o.len() == self.degree)
                .unwrap_or(false)
    }

    /// `{g ∈ G : g(i) = i}` for a 1-based index.
    pub fn stabilizer(&self, i: usize) -> Result<PermGroup> {
        if i == 0 || i > self.degree {
            return Err(Error::IndexOutOfRange {
                index: i,
                degree: self.degree,
            });
        }
        let elements = self
            .elements
            .iter()
            .filter(|g| g.apply0(i - 1) == i - 1)
            .cloned()
            .collect();
        Ok(Self::from_elements(self.degree, elements))
    }

    /// Same element set, regardless of generators.
    pub fn same_elements(&self, other: &PermGroup) -> bool {
        self.degree == other.degree && self.elements == other.elements
    }

    /// Lexicographically smallest representative of every coset `a∘G`.
    pub fn right_transversal(&self) -> Result<Transversal> {
        self.transversal_by(false)
    }

    /// Lexicographically largest representative of every coset; an
    /// alternative choice used to check that results do not depend on it.
    pub fn alternate_transversal(&self) -> Result<Transversal> {
        self.transversal_by(true)
    }

    fn transversal_by(&self, largest: bool) -> Result<Transversal> {
        let mut all = all_permutations(self.degree)?;
        if largest {
            all.reverse();
        }
        let mut covered: HashSet<Permutation> = HashSet::with_capacity(all.len());
        let mut reps = Vec::new();
        for sigma in all {
            if covered.contains(&sigma) {
                continue;
            }
            for g in &self.elements {
                covered.insert(sigma.compose(g)?);
            }
            reps.push(sigma);
        }
        Ok(Transversal { reps })
    }
}

fn axis_maps(
    dims: &[usize],
    per_axis: impl Fn(usize) -> Vec<Permutation>,
) -> Result<Vec<Permutation>> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "grid dimensions must be positive, got {dims:?}"
        )));
    }
    let n: usize = dims.iter().product();
    let mut gens = Vec::new();
    for (axis, &d) in dims.iter().enumerate() {
        for local in per_axis(d) {
            let mut images = Vec::with_capacity(n);
            for flat in 1..=n {
                let mut multi = unflatten_index(dims, flat)?;
                multi[axis] = local.apply(multi[axis])?;
                images.push(flatten_index(dims, &multi)?);
            }
            gens.push(Permutation::from_images(&images)?);
        }
    }
    Ok(gens)
}

/// One representative per coset `a∘G` of `G` in `S_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transversal {
    pub reps: Vec<Permutation>,
}

impl Transversal {
    /// Checks both transversal axioms against `group` by full enumeration.
    ///
    /// Products follow the vector-action order `p·q := compose(q, p)`:
    /// distinct reps satisfy `a_i·a_j⁻¹ ∉ G`, and every `b ∈ S_n` has a rep
    /// with `a_i·b⁻¹ ∈ G`.
    pub fn check_axioms(&self, group: &PermGroup) -> Result<std::result::Result<(), String>> {
        let n = group.degree();
        for (i, a) in self.reps.iter().enumerate() {
            for (j, b) in self.reps.iter().enumerate() {
                if i != j && group.contains(&b.inverse().compose(a)?) {
                    return Ok(Err(format!("reps {a} and {b} share a coset")));
                }
            }
        }
        for b in all_permutations(n)? {
            let binv = b.inverse();
            let mut hits = 0;
            for a in &self.reps {
                if group.contains(&binv.compose(a)?) {
                    hits += 1;
                }
            }
            if hits == 0 {
                return Ok(Err(format!("{b} is not covered")));
            }
        }
        Ok(Ok(()))
    }
}

/// Serializable group description, e.g. `translation_1d 3` or `product 2 3`.
#[derive(Clone, Debug, PartialEq)]
pub enum GroupSpec {
    Trivial(usize),
    Symmetric(usize),
    Translation1d(usize),
    TranslationNd(Vec<usize>),
    Product(Vec<usize>),
    Generators { degree: usize, generators: Vec<Permutation> },
}

impl GroupSpec {
    pub fn degree(&self) -> usize {
        match self {
            GroupSpec::Trivial(n) | GroupSpec::Symmetric(n) | GroupSpec::Translation1d(n) => *n,
            GroupSpec::TranslationNd(d) | GroupSpec::Product(d) => d.iter().product(),
            GroupSpec::Generators { degree, .. } => *degree,
        }
    }

    pub fn build(&self) -> Result<PermGroup> {
        match self {
            GroupSpec::Trivial(n) => Ok(PermGroup::trivial(*n)),
            GroupSpec::Symmetric(n) => PermGroup::symmetric(*n),
            GroupSpec::Translation1d(n) => PermGroup::translation_1d(*n),
            GroupSpec::TranslationNd(d) => PermGroup::translation_nd(d),
            GroupSpec::Product(d) => PermGroup::product(d),
            GroupSpec::Generators { degree, generators } => PermGroup::generate(*degree, generators),
        }
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |d: &[usize]| {
            d.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        match self {
            GroupSpec::Trivial(n) => write!(f, "trivial {n}"),
            GroupSpec::Symmetric(n) => write!(f, "symmetric {n}"),
            GroupSpec::Translation1d(n) => write!(f, "translation_1d {n}"),
            GroupSpec::TranslationNd(d) => write!(f, "translation_nd {}", join(d)),
            GroupSpec::Product(d) => write!(f, "product {}", join(d)),
            GroupSpec::Generators { degree, generators } => {
                let gens: Vec<String> = generators.iter().map(|g| g.to_string()).collect();
                write!(f, "generators {degree} {}", gens.join("; "))
            }
        }
    }
}

impl FromStr for GroupSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, rest) = s.split_once(char::is_whitespace).unwrap_or((s, ""));
        let numbers = |text: &str| -> Result<Vec<usize>> {
            text.split_whitespace()
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|e| Error::Parse(format!("bad number `{t}` in `{s}`: {e}")))
                })
                .collect()
        };
        let single = |text: &str| -> Result<usize> {
            match numbers(text)?.as_slice() {
                [n] => Ok(*n),
                other => Err(Error::Parse(format!(
                    "`{name}` takes one degree, got {other:?}"
                ))),
            }
        };
        match name {
            "trivial" => Ok(GroupSpec::Trivial(single(rest)?)),
            "symmetric" => Ok(GroupSpec::Symmetric(single(rest)?)),
            "translation_1d" => Ok(GroupSpec::Translation1d(single(rest)?)),
            "translation_nd" => Ok(GroupSpec::TranslationNd(numbers(rest)?)),
            "product" => Ok(GroupSpec::Product(numbers(rest)?)),
            "generators" => {
                let rest = rest.trim();
                let (deg, cycles) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
                let degree = single(deg)?;
                let generators = cycles
                    .split(';')
                    .map(str::trim)
                    .filter(|c| !c.is_empty())
                    .map(|c| Permutation::parse_cycles(degree, c))
                    .collect::<Result<_>>()?;
                Ok(GroupSpec::Generators { degree, generators })
            }
            other => Err(Error::Unknown {
                kind: "group builder",
                name: other.to_string(),
            }),
        }
    }
}

/// True iff all coordinates are pairwise distinct (exact comparison).
pub fn is_general_position(x: &[f64]) -> Result<bool> {
    if x.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "general position needs at least 2 coordinates, got {}",
            x.len()
        )));
    }
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("coordinate {v}")));
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted.windows(2).all(|w| w[0] != w[1]))
}

/// Merges coordinates lying within `tol` of each other (chained through the
/// sorted order) onto their smallest member. `tol = 0` only merges exact ties.
pub fn snap_coordinates(x: &[f64], tol: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = x.to_vec();
    let mut anchor = None::<f64>;
    let mut prev = f64::NEG_INFINITY;
    for &i in &order {
        let v = x[i];
        match anchor {
            Some(a) if v - prev <= tol => out[i] = a,
            _ => anchor = Some(v),
        }
        prev = v;
    }
    out
}

/// `x ∈ Q_a`, i.e. `x[a⁻¹(1)] > x[a⁻¹(2)] > ... > x[a⁻¹(n)]`.
pub fn in_cross_section(x: &[f64], a: &Permutation) -> Result<bool> {
    if x.len() != a.degree() {
        return Err(Error::DimensionMismatch {
            expected: a.degree(),
            got: x.len(),
        });
    }
    let inv = a.inverse();
    Ok((1..x.len()).all(|k| x[inv.apply0(k - 1)] > x[inv.apply0(k)]))
}

/// The unique `a` with `x ∈ Q_a`, or `None` when `x` has tied coordinates.
pub fn locate_cross_section(x: &[f64]) -> Result<Option<Permutation>> {
    if !is_general_position(x)? {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    // descending by value: order[k] = a⁻¹(k+1) - 1
    order.sort_by(|&i, &j| x[j].total_cmp(&x[i]));
    let inv = Permutation::from_zero_based(&order)?;
    Ok(Some(inv.inverse()))
}

/// True iff `g(p_i) = p_j` forces `g = e` and `i = j`.
pub fn is_g_distinct(group: &PermGroup, points: &[Vec<f64>]) -> Result<bool> {
    for p in points {
        if p.len() != group.degree() {
            return Err(Error::DimensionMismatch {
                expected: group.degree(),
                got: p.len(),
            });
        }
    }
    let mut moved = vec![0.0; group.degree()];
    for (i, p) in points.iter().enumerate() {
        for g in group.elements() {
            g.act_into(p, &mut moved);
            for (j, q) in points.iter().enumerate() {
                if moved == *q && !(i == j && g.is_identity()) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Number of `g ∈ G` with `x ∈ g(Q_A)`; `None` for boundary points.
pub fn cross_section_cover_count(
    group: &PermGroup,
    transversal: &Transversal,
    x: &[f64],
) -> Result<Option<usize>> {
    let Some(c) = locate_cross_section(x)? else {
        return Ok(None);
    };
    // x ∈ g(Q_a) ⇔ c = a∘g ⇔ c∘g⁻¹ ∈ A
    let reps: HashSet<&Permutation> = transversal.reps.iter().collect();
    let mut count = 0;
    for g in group.elements() {
        if reps.contains(&c.compose(&g.inverse())?) {
            count += 1;
        }
    }
    Ok(Some(count))
}

/// Checks that every point in general position lies in exactly one `g(Q_A)`.
pub fn partition_check_points(
    group: &PermGroup,
    transversal: &Transversal,
    points: &[Vec<f64>],
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("partition_check", 0.0);
    for x in points {
        match cross_section_cover_count(group, transversal, x)? {
            None => report.skip("boundary point (not in general position)"),
            Some(count) => {
                let violation = (count as f64 - 1.0).abs();
                report.record(violation, || Witness::new(x.clone(), format!("covered {count} times")));
            }
        }
    }
    Ok(report.finish())
}

/// [`partition_check_points`] over uniform samples from `[-1, 1]^n`.
pub fn partition_check(
    group: &PermGroup,
    transversal: &Transversal,
    sample_count: usize,
    seed_value: u64,
) -> Result<VerificationReport> {
    let mut rng = seed::rng_for(seed_value, "partition_check");
    let n = group.degree();
    let points: Vec<Vec<f64>> = (0..sample_count)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    partition_check_points(group, transversal, &points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(images: &[usize]) -> Permutation {
        Permutation::from_images(images).unwrap()
    }

    #[test]
    fn act_indices_examples() {
        let swap = Permutation::transposition(3, 1, 2).unwrap();
        assert_eq!(swap.apply(1).unwrap(), 2);
        assert_eq!(Permutation::identity(6).apply(5).unwrap(), 5);
        assert_eq!(Permutation::shift(3).apply(3).unwrap(), 1);
        assert!(matches!(swap.apply(4), Err(Error::IndexOutOfRange { .. })));
        assert!(swap.apply(0).is_err());
    }

    #[test]
    fn act_vector_examples() {
        let swap = Permutation::transposition(3, 1, 2).unwrap();
        assert_eq!(swap.act_vector(&[5.0, 7.0, 9.0]).unwrap(), vec![7.0, 5.0, 9.0]);
        let x = [0.3, -1.0, 4.0];
        assert_eq!(Permutation::identity(3).act_vector(&x).unwrap(), x.to_vec());
        // t = shift: [a, b, c] -> [b, c, a]
        assert_eq!(
            Permutation::shift(3).act_vector(&[1.0, 2.0, 3.0]).unwrap(),
            vec![2.0, 3.0, 1.0]
        );
        assert!(matches!(
            swap.act_vector(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn compose_orientation_matches_two_step_action() {
        let a = p(&[2, 3, 1, 4]);
        let b = p(&[4, 1, 3, 2]);
        let x = [10.0, 20.0, 30.0, 40.0];
        let lhs = a.compose(&b).unwrap().act_vector(&x).unwrap();
        let rhs = b.act_vector(&a.act_vector(&x).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
        // p∘q on indices
        assert_eq!(a.compose(&b).unwrap().apply(1).unwrap(), a.apply(b.apply(1).unwrap()).unwrap());
    }

    #[test]
    fn compose_and_inverse_examples() {
        let a = p(&[3, 1, 4, 2]);
        assert!(a.compose(&a.inverse()).unwrap().is_identity());
        let swap = Permutation::transposition(4, 1, 2).unwrap();
        assert_eq!(swap.inverse(), swap);
        let t = Permutation::shift(3);
        let t2 = t.compose(&t).unwrap();
        assert_eq!(t2.apply(1).unwrap(), 3);
        assert_eq!(t2.to_string(), "(1 3 2)");
    }

    #[test]
    fn cycle_notation_round_trip() {
        let q = Permutation::parse_cycles(5, "(1 3)(2 5 4)").unwrap();
        assert_eq!(q.images(), vec![3, 5, 1, 2, 4]);
        assert_eq!(Permutation::parse_cycles(5, &q.to_string()).unwrap(), q);
        assert!(Permutation::parse_cycles(3, "()").unwrap().is_identity());
        assert!(Permutation::parse_cycles(3, "(1 4)").is_err());
        assert!(Permutation::parse_cycles(3, "(1 2)(2 3)").is_err());
        assert!(Permutation::from_images(&[1, 1, 2]).is_err());
    }

    #[test]
    fn generate_examples() {
        let c3 = PermGroup::generate(3, &[Permutation::shift(3)]).unwrap();
        assert_eq!(c3.order(), 3);
        let s3 = PermGroup::generate(
            3,
            &[
                Permutation::transposition(3, 1, 2).unwrap(),
                Permutation::transposition(3, 2, 3).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(s3.order(), 6);
        assert_eq!(PermGroup::generate(4, &[]).unwrap().order(), 1);
        assert!(matches!(
            PermGroup::generate_with_cap(5, PermGroup::symmetric(5).unwrap().generators(), 100),
            Err(Error::GroupTooLarge { cap: 100 })
        ));
    }

    #[test]
    fn builder_orders() {
        assert_eq!(PermGroup::symmetric(4).unwrap().order(), 24);
        assert_eq!(PermGroup::translation_1d(5).unwrap().order(), 5);
        assert_eq!(PermGroup::translation_nd(&[2, 3]).unwrap().order(), 6);
        assert_eq!(PermGroup::product(&[2, 3]).unwrap().order(), 12);
        assert_eq!(PermGroup::product(&[2, 2, 2]).unwrap().order(), 8);
    }

    #[test]
    fn product_group_acts_axiswise() {
        // (a, b)(i, j) = (a(i), b(j)) on a 2 x 3 grid flattened row-major
        let g = PermGroup::product(&[2, 3]).unwrap();
        for elem in g.elements() {
            let row_of = |flat: usize| unflatten_index(&[2, 3], flat).unwrap()[0];
            let col_of = |flat: usize| unflatten_index(&[2, 3], flat).unwrap()[1];
            // rows map to rows, columns to columns
            for i in 1..=6 {
                for j in 1..=6 {
                    let (gi, gj) = (elem.apply(i).unwrap(), elem.apply(j).unwrap());
                    assert_eq!(row_of(i) == row_of(j), row_of(gi) == row_of(gj));
                    assert_eq!(col_of(i) == col_of(j), col_of(gi) == col_of(gj));
                }
            }
        }
    }

    #[test]
    fn flatten_round_trip() {
        let dims = [2, 3, 4];
        for flat in 1..=24 {
            let m = unflatten_index(&dims, flat).unwrap();
            assert_eq!(flatten_index(&dims, &m).unwrap(), flat);
        }
        assert_eq!(flatten_index(&[2, 3], &[2, 1]).unwrap(), 4);
        assert!(flatten_index(&[2, 3], &[3, 1]).is_err());
    }

    #[test]
    fn transitivity_examples() {
        assert!(PermGroup::translation_1d(3).unwrap().is_transitive());
        assert!(!PermGroup::trivial(3).is_transitive());
        assert!(PermGroup::symmetric(4).unwrap().is_transitive());
        assert!(PermGroup::product(&[2, 3]).unwrap().is_transitive());
    }

    #[test]
    fn stabilizer_examples() {
        let s3 = PermGroup::symmetric(3).unwrap();
        let st = s3.stabilizer(1).unwrap();
        assert_eq!(st.order(), 2);
        assert!(st.contains(&Permutation::transposition(3, 2, 3).unwrap()));
        assert_eq!(PermGroup::translation_1d(3).unwrap().stabilizer(1).unwrap().order(), 1);
        assert_eq!(PermGroup::trivial(4).stabilizer(2).unwrap().order(), 1);
    }

    #[test]
    fn transversal_examples() {
        let c3 = PermGroup::translation_1d(3).unwrap();
        let t = c3.right_transversal().unwrap();
        assert_eq!(t.reps.len(), 2);
        assert!(t.reps[0].is_identity());
        // lexicographically smallest member of the non-identity coset
        assert_eq!(t.reps[1], Permutation::transposition(3, 2, 3).unwrap());
        assert!(t.check_axioms(&c3).unwrap().is_ok());

        let s4 = PermGroup::symmetric(4).unwrap();
        let t = s4.right_transversal().unwrap();
        assert_eq!(t.reps, vec![Permutation::identity(4)]);

        let t = PermGroup::trivial(3).right_transversal().unwrap();
        assert_eq!(t.reps.len(), 6);

        assert!(matches!(
            PermGroup::trivial(9).right_transversal(),
            Err(Error::DegreeTooLarge { .. })
        ));
    }

    #[test]
    fn transversal_axioms_reject_bad_sets() {
        let c3 = PermGroup::translation_1d(3).unwrap();
        let dup = Transversal {
            reps: vec![Permutation::identity(3), Permutation::shift(3)],
        };
        assert!(dup.check_axioms(&c3).unwrap().is_err());
        let short = Transversal {
            reps: vec![Permutation::identity(3)],
        };
        assert!(short.check_axioms(&c3).unwrap().is_err());
    }

    #[test]
    fn general_position_examples() {
        assert!(is_general_position(&[1.0, 2.0, 3.0]).unwrap());
        assert!(!is_general_position(&[1.0, 1.0, 3.0]).unwrap());
        assert!(is_general_position(&[]).is_err());
        assert!(is_general_position(&[1.0]).is_err());
        assert!(is_general_position(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn snapping() {
        assert_eq!(snap_coordinates(&[1.0, 2.0, 1.0], 0.0), vec![1.0, 2.0, 1.0]);
        assert_eq!(
            snap_coordinates(&[1.0, 1.0 + 1e-12, 3.0], 1e-9),
            vec![1.0, 1.0, 3.0]
        );
        let snapped = snap_coordinates(&[0.5, 0.2, 0.5 + 1e-15], 1e-12);
        assert!(!is_general_position(&snapped).unwrap());
    }

    #[test]
    fn cross_section_examples() {
        let e = Permutation::identity(3);
        assert!(in_cross_section(&[3.0, 2.0, 1.0], &e).unwrap());
        assert!(!in_cross_section(&[1.0, 2.0, 3.0], &e).unwrap());
        assert_eq!(locate_cross_section(&[3.0, 2.0, 1.0]).unwrap(), Some(e));
        assert_eq!(locate_cross_section(&[1.0, 1.0, 2.0]).unwrap(), None);
        // argsort oracle: 9 first, 4 second, 2 third ⇒ a⁻¹ = [2, 3, 1]
        let a = locate_cross_section(&[2.0, 9.0, 4.0]).unwrap().unwrap();
        assert_eq!(a.inverse().images(), vec![2, 3, 1]);
        assert!(in_cross_section(&[2.0, 9.0, 4.0], &a).unwrap());
    }

    #[test]
    fn cross_section_is_image_of_q() {
        let q = [5.0, 3.0, 2.0, -1.0];
        for a in all_permutations(4).unwrap() {
            let moved = a.act_vector(&q).unwrap();
            assert!(in_cross_section(&moved, &a).unwrap());
            assert_eq!(locate_cross_section(&moved).unwrap().unwrap(), a);
        }
    }

    #[test]
    fn g_distinct_examples() {
        let s2 = PermGroup::symmetric(2).unwrap();
        assert!(!is_g_distinct(&s2, &[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap());
        assert!(is_g_distinct(&s2, &[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
        let e = PermGroup::trivial(3);
        assert!(is_g_distinct(&e, &[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 4.0]]).unwrap());
        // nontrivial stabilizer
        assert!(!is_g_distinct(&s2, &[vec![1.0, 1.0]]).unwrap());
    }

    #[test]
    fn partition_examples() {
        let c3 = PermGroup::translation_1d(3).unwrap();
        let t = c3.right_transversal().unwrap();
        let r = partition_check(&c3, &t, 10_000, 11).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.passed());

        let s3 = PermGroup::symmetric(3).unwrap();
        let t = Transversal {
            reps: vec![Permutation::identity(3)],
        };
        assert_eq!(partition_check(&s3, &t, 2_000, 3).unwrap().violations, 0);

        let r = partition_check_points(&s3, &t, &[vec![1.0, 1.0, 2.0]]).unwrap();
        assert_eq!(r.skipped, 1);
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn group_spec_round_trip() {
        for text in [
            "symmetric 4",
            "trivial 2",
            "translation_1d 3",
            "translation_nd 2 3",
            "product 2 3",
            "generators 4 (1 2 3 4); (1 2)",
        ] {
            let spec: GroupSpec = text.parse().unwrap();
            assert_eq!(spec.to_string(), text);
        }
        let g = "generators 4 (1 2 3 4); (1 2)".parse::<GroupSpec>().unwrap().build().unwrap();
        assert_eq!(g.order(), 24);
        assert!("dihedral 4".parse::<GroupSpec>().is_err());
        assert!("symmetric".parse::<GroupSpec>().is_err());
    }
}
