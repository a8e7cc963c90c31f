//! Probability vectors, channels, joint distributions over `Y×X`, divergences
//! and method-of-types utilities.
//!
//! Joint arrays are stored y-major: cell `(y, x)` lives at `y * nx + x`.

use serde::Serialize;

use crate::error::{arg, Error, Result};

/// Tolerance of the unit-sum invariant of every validated vector.
pub const SUM_TOL: f64 = 1e-12;
/// Deviations up to this are renormalized; larger ones are rejected.
pub const RENORM_TOL: f64 = 1e-9;
/// Default cap on the number of joint types `enumerate_joint_types` will yield.
pub const DEFAULT_TYPE_CAP: u64 = 10_000_000;

fn validated(mut v: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    if v.is_empty() {
        return arg(format!("{what} is empty"));
    }
    for (i, &p) in v.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return arg(format!("{what}[{i}] = {p} is not a non-negative finite number"));
        }
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > RENORM_TOL {
        return arg(format!("{what} sums to {s}, not 1"));
    }
    if s != 1.0 {
        v.iter_mut().for_each(|p| *p /= s);
    }
    Ok(v)
}

/// `x ln(x / y)` with `0 ln 0 = 0` and `x ln(x/0) = +inf`.
#[inline]
pub fn xlogx_over(x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if y <= 0.0 {
        f64::INFINITY
    } else {
        x * (x / y).ln()
    }
}

/// Stable `ln Σ exp(v)`; returns `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(v: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let m = v.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + v.into_iter().map(|a| (a - m).exp()).sum::<f64>().ln()
}

/// Probability vector over a finite input alphabet.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Ok(Distribution {
            probs: validated(probs, "distribution")?,
        })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return arg("uniform distribution over an empty alphabet");
        }
        Ok(Distribution {
            probs: vec![1.0 / k as f64; k],
        })
    }

    pub fn point_mass(k: usize, i: usize) -> Result<Self> {
        if i >= k {
            return arg(format!("point mass at {i} outside alphabet of size {k}"));
        }
        let mut probs = vec![0.0; k];
        probs[i] = 1.0;
        Ok(Distribution { probs })
    }

    /// Normalized letter counts.
    pub fn from_counts(counts: &[u32]) -> Result<Self> {
        let n: u64 = counts.iter().map(|&c| c as u64).sum();
        if n == 0 {
            return arg("counts are all zero");
        }
        Ok(Distribution {
            probs: counts.iter().map(|&c| c as f64 / n as f64).collect(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.probs.len()).filter(|&i| self.probs[i] > 0.0).collect()
    }

    pub fn entropy(&self) -> f64 {
        -self.probs.iter().map(|&p| xlogx_over(p, 1.0)).sum::<f64>()
    }

    /// `D(self ∥ other)`.
    pub fn kl(&self, other: &Distribution) -> Result<f64> {
        if self.len() != other.len() {
            return arg("distribution lengths differ");
        }
        let d: f64 = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(&a, &b)| xlogx_over(a, b))
            .sum();
        Ok(d.max(0.0))
    }

    pub fn l1(&self, other: &Distribution) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    /// Total-variation distance, half the L1 distance.
    pub fn total_variation(&self, other: &Distribution) -> f64 {
        0.5 * self.l1(other)
    }
}

/// Row-stochastic matrix `P(y|x)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Channel {
    nx: usize,
    ny: usize,
    matrix: Vec<f64>,
}

impl Channel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let nx = rows.len();
        if nx == 0 {
            return arg("channel has no rows");
        }
        let ny = rows[0].len();
        let mut matrix = Vec::with_capacity(nx * ny);
        for (x, row) in rows.into_iter().enumerate() {
            if row.len() != ny {
                return arg(format!("channel row {x} has {} entries, expected {ny}", row.len()));
            }
            matrix.extend(validated(row, &format!("channel row {x}"))?);
        }
        Ok(Channel { nx, ny, matrix })
    }

    pub fn bsc(eps: f64) -> Result<Self> {
        Channel::new(vec![vec![1.0 - eps, eps], vec![eps, 1.0 - eps]])
    }

    pub fn identity(k: usize) -> Result<Self> {
        Channel::new(
            (0..k)
                .map(|x| (0..k).map(|y| if x == y { 1.0 } else { 0.0 }).collect())
                .collect(),
        )
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn p(&self, x: usize, y: usize) -> f64 {
        self.matrix[x * self.ny + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.matrix[x * self.ny..(x + 1) * self.ny]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.nx).map(|x| self.row(x).to_vec()).collect()
    }

    pub(crate) fn check_input(&self, q: &Distribution) -> Result<()> {
        if q.len() != self.nx {
            return arg(format!(
                "input distribution has {} letters but the channel has {} inputs",
                q.len(),
                self.nx
            ));
        }
        Ok(())
    }
}

/// Distribution `T(y)V(x|y)` over `Y×X`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointDistribution {
    ny: usize,
    nx: usize,
    mass: Vec<f64>,
}

impl JointDistribution {
    /// `mass` is y-major with `ny * nx` entries.
    pub fn new(ny: usize, nx: usize, mass: Vec<f64>) -> Result<Self> {
        if ny == 0 || nx == 0 || mass.len() != ny * nx {
            return arg(format!(
                "joint mass has {} entries, expected {ny}x{nx}",
                mass.len()
            ));
        }
        Ok(JointDistribution {
            ny,
            nx,
            mass: validated(mass, "joint mass")?,
        })
    }

    /// `Q∘P`: mass `Q(x)P(y|x)` at `(y, x)`.
    pub fn from_input(q: &Distribution, p: &Channel) -> Result<Self> {
        p.check_input(q)?;
        let (nx, ny) = (p.nx(), p.ny());
        let mut mass = vec![0.0; nx * ny];
        for y in 0..ny {
            for x in 0..nx {
                mass[y * nx + x] = q.probs()[x] * p.p(x, y);
            }
        }
        JointDistribution::new(ny, nx, mass)
    }

    /// `T∘V` from a Y-marginal and per-y conditionals (y-major `ny * nx`).
    pub fn from_parts(t: &[f64], v: &[f64], nx: usize) -> Result<Self> {
        let ny = t.len();
        if v.len() != ny * nx {
            return arg("conditional table has the wrong size");
        }
        let mass = (0..ny * nx).map(|i| t[i / nx] * v[i]).collect();
        JointDistribution::new(ny, nx, mass)
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    #[inline]
    pub fn mass(&self, y: usize, x: usize) -> f64 {
        self.mass[y * self.nx + x]
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    /// `T(y) = Σ_x mass(y, x)`.
    pub fn t(&self) -> Vec<f64> {
        self.mass.chunks(self.nx).map(|r| r.iter().sum()).collect()
    }

    pub fn x_marginal(&self) -> Result<Distribution> {
        let mut q = vec![0.0; self.nx];
        for row in self.mass.chunks(self.nx) {
            for (qx, m) in q.iter_mut().zip(row) {
                *qx += m;
            }
        }
        Distribution::new(q)
    }

    /// `V(·|y)`, or `None` when `T(y) = 0`.
    pub fn conditional(&self, y: usize) -> Option<Vec<f64>> {
        let row = &self.mass[y * self.nx..(y + 1) * self.nx];
        let t: f64 = row.iter().sum();
        (t > 0.0).then(|| row.iter().map(|m| m / t).collect())
    }

    pub fn l1(&self, other: &JointDistribution) -> f64 {
        self.mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

/// `D(a ∥ b)` between joint distributions on the same alphabets.
pub fn kl_joint(a: &JointDistribution, b: &JointDistribution) -> Result<f64> {
    if a.ny != b.ny || a.nx != b.nx {
        return arg(format!(
            "joint dimensions differ: {}x{} vs {}x{}",
            a.ny, a.nx, b.ny, b.nx
        ));
    }
    let d: f64 = a
        .mass
        .iter()
        .zip(&b.mass)
        .map(|(&u, &v)| xlogx_over(u, v))
        .sum();
    Ok(d.max(0.0))
}

/// `T×Q`: mass `T(y)Q(x)`.
pub fn product_joint(t: &[f64], q: &Distribution) -> Result<JointDistribution> {
    let t = validated(t.to_vec(), "output marginal")?;
    let nx = q.len();
    let mass = t
        .iter()
        .flat_map(|&ty| q.probs().iter().map(move |&qx| ty * qx))
        .collect();
    JointDistribution::new(t.len(), nx, mass)
}

/// `I(X;Y)` of a joint, i.e. its divergence from the product of its marginals.
pub fn mutual_information(j: &JointDistribution) -> f64 {
    let qx = j.x_marginal().expect("marginal of a valid joint");
    let prod = product_joint(&j.t(), &qx).expect("marginal of a valid joint");
    kl_joint(j, &prod).expect("same dimensions")
}

/// `D(T∘V ∥ T×Q)` for an arbitrary reference `Q` (the metric average).
pub fn metric_divergence(j: &JointDistribution, q: &Distribution) -> Result<f64> {
    if q.len() != j.nx {
        return arg("input distribution does not match the joint's X alphabet");
    }
    let prod = product_joint(&j.t(), q)?;
    kl_joint(j, &prod)
}

/// Natural metric `(1/n) Σ k(y,x) ln(k(y,x) / (t(y) Q(x)))` of a count matrix,
/// with `ln_q[x] = ln Q(x)`. Counts on letters with `Q(x) = 0` give `+inf`.
pub fn metric_from_counts(counts: &[u32], ny: usize, nx: usize, ln_q: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut n = 0u64;
    for y in 0..ny {
        let row = &counts[y * nx..(y + 1) * nx];
        let t: u32 = row.iter().sum();
        if t == 0 {
            continue;
        }
        n += t as u64;
        let ln_t = (t as f64).ln();
        for (x, &k) in row.iter().enumerate() {
            if k > 0 {
                if ln_q[x] == f64::NEG_INFINITY {
                    return f64::INFINITY;
                }
                total += k as f64 * ((k as f64).ln() - ln_t - ln_q[x]);
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

/// Joint type of a (received, codeword) pair: counts over `Y×X` with denominator `n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct TypeWithDenominator {
    ny: usize,
    nx: usize,
    counts: Vec<u32>,
    n: u32,
}

impl TypeWithDenominator {
    pub fn new(ny: usize, nx: usize, counts: Vec<u32>) -> Result<Self> {
        if counts.len() != ny * nx {
            return arg("count matrix has the wrong size");
        }
        let n: u64 = counts.iter().map(|&c| c as u64).sum();
        if n == 0 || n > u32::MAX as u64 {
            return arg(format!("type denominator {n} out of range"));
        }
        Ok(TypeWithDenominator {
            ny,
            nx,
            counts,
            n: n as u32,
        })
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    #[inline]
    pub fn count(&self, y: usize, x: usize) -> u32 {
        self.counts[y * self.nx + x]
    }

    pub fn y_counts(&self) -> Vec<u32> {
        self.counts.chunks(self.nx).map(|r| r.iter().sum()).collect()
    }

    pub fn x_counts(&self) -> Vec<u32> {
        let mut c = vec![0; self.nx];
        for row in self.counts.chunks(self.nx) {
            for (cx, k) in c.iter_mut().zip(row) {
                *cx += k;
            }
        }
        c
    }

    pub fn to_joint(&self) -> JointDistribution {
        let n = self.n as f64;
        JointDistribution {
            ny: self.ny,
            nx: self.nx,
            mass: self.counts.iter().map(|&c| c as f64 / n).collect(),
        }
    }

    /// Empirical distribution of the codeword, `Σ_y counts / n`.
    pub fn x_type(&self) -> Distribution {
        Distribution::from_counts(&self.x_counts()).expect("n > 0")
    }

    /// Natural metric `D(T∘V ∥ T×Q)` of this type.
    pub fn metric(&self, q: &Distribution) -> f64 {
        let ln_q: Vec<f64> = q.probs().iter().map(|p| p.ln()).collect();
        metric_from_counts(&self.counts, self.ny, self.nx, &ln_q)
    }

    /// Cell-wise sum (the type of a concatenation).
    pub fn add(&self, other: &TypeWithDenominator) -> Result<TypeWithDenominator> {
        if self.ny != other.ny || self.nx != other.nx {
            return arg("type dimensions differ");
        }
        TypeWithDenominator::new(
            self.ny,
            self.nx,
            self.counts
                .iter()
                .zip(&other.counts)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

/// Counts `(y, x)` pairs of two aligned sequences.
pub fn empirical_joint_type<S: Copy + Into<usize>>(
    xseq: &[S],
    yseq: &[S],
    nx: usize,
    ny: usize,
) -> Result<TypeWithDenominator> {
    if xseq.len() != yseq.len() {
        return arg(format!(
            "sequence lengths differ: {} vs {}",
            xseq.len(),
            yseq.len()
        ));
    }
    if xseq.is_empty() {
        return arg("empty sequences");
    }
    let mut counts = vec![0u32; ny * nx];
    for (i, (&x, &y)) in xseq.iter().zip(yseq).enumerate() {
        let (x, y): (usize, usize) = (x.into(), y.into());
        if x >= nx || y >= ny {
            return arg(format!("symbol pair ({x}, {y}) at position {i} outside alphabets"));
        }
        counts[y * nx + x] += 1;
    }
    TypeWithDenominator::new(ny, nx, counts)
}

/// Number of ways to write `n` as an ordered sum of `k` non-negative parts,
/// saturating at `u64::MAX`.
pub fn composition_count(n: u64, k: usize) -> u64 {
    if k == 0 {
        return u64::from(n == 0);
    }
    // C(n + k - 1, k - 1) built incrementally; each partial product is an integer.
    let mut c: u128 = 1;
    for i in 1..k as u128 {
        c = c * (n as u128 + i) / i;
        if c > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    c as u64
}

/// All compositions of `n` into `k` parts, in reverse lexicographic order.
#[derive(Debug, Clone)]
pub struct Compositions {
    cur: Vec<u32>,
    started: bool,
    done: bool,
}

impl Compositions {
    pub fn new(n: u32, k: usize) -> Self {
        let mut cur = vec![0; k];
        if k > 0 {
            cur[0] = n;
        }
        Compositions {
            cur,
            started: false,
            done: k == 0,
        }
    }

    /// Advances in place; returns `false` once exhausted.
    pub fn advance(&mut self) -> bool {
        if self.done {
            return false;
        }
        if !self.started {
            self.started = true;
            return true;
        }
        let k = self.cur.len();
        let Some(j) = (0..k.saturating_sub(1)).rev().find(|&j| self.cur[j] > 0) else {
            self.done = true;
            return false;
        };
        self.cur[j] -= 1;
        let rest: u32 = self.cur[j + 1..].iter().sum::<u32>() + 1;
        self.cur[j + 1..].iter_mut().for_each(|c| *c = 0);
        self.cur[j + 1] = rest;
        true
    }

    pub fn current(&self) -> &[u32] {
        &self.cur
    }
}

impl Iterator for Compositions {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        self.advance().then(|| self.cur.clone())
    }
}

/// Stream of every joint type with denominator `n` over `ny × nx` cells.
#[derive(Debug, Clone)]
pub struct JointTypes {
    inner: Compositions,
    ny: usize,
    nx: usize,
    count: u64,
}

impl JointTypes {
    pub fn count(&self) -> u64 {
        self.count
    }
}

impl Iterator for JointTypes {
    type Item = TypeWithDenominator;

    fn next(&mut self) -> Option<TypeWithDenominator> {
        self.inner.next().map(|counts| TypeWithDenominator {
            ny: self.ny,
            nx: self.nx,
            n: counts.iter().sum(),
            counts,
        })
    }
}

pub fn enumerate_joint_types(n: u32, ny: usize, nx: usize) -> Result<JointTypes> {
    enumerate_joint_types_capped(n, ny, nx, DEFAULT_TYPE_CAP)
}

pub fn enumerate_joint_types_capped(n: u32, ny: usize, nx: usize, cap: u64) -> Result<JointTypes> {
    if n == 0 || ny == 0 || nx == 0 {
        return arg("blocklength and alphabet sizes must be positive");
    }
    let count = composition_count(n as u64, ny * nx);
    if count > cap {
        return Err(Error::Resource(format!(
            "{count} joint types for n={n} over {ny}x{nx} exceeds the cap of {cap}"
        )));
    }
    Ok(JointTypes {
        inner: Compositions::new(n, ny * nx),
        ny,
        nx,
        count,
    })
}

/// Codebook size `⌈e^{nR}⌉`, as a float so that astronomically large
/// ensembles remain representable. A relative guard of 1e-12 keeps
/// `e^{ln 3}` from rounding up to 4.
pub fn codebook_size(n: u32, rate: f64) -> Result<f64> {
    if !rate.is_finite() || rate < 0.0 {
        return arg(format!("rate {rate} must be a non-negative finite number"));
    }
    let e = (n as f64 * rate).exp();
    Ok((e * (1.0 - 1e-12)).ceil().max(1.0))
}
