//! Probability core: distributions, channels, products and the
//! entropy/mutual-information functionals used by every other module.
//!
//! Conventions, fixed crate-wide:
//! - logarithms are base 2 (all information quantities in bits),
//! - `0 * log 0 = 0`; entries below `1e-15` are treated as exact zeros in
//!   log terms,
//! - constructors renormalize inputs whose mass is within `1e-9` of 1 and
//!   reject anything further out,
//! - tiny negative mutual informations (>= -1e-12) are clamped to 0.

use serde::Serialize;

use crate::{Error, Result};

/// Mass tolerance accepted at construction before rejection.
pub const MASS_TOL: f64 = 1e-9;
/// Entries below this threshold are treated as exact zeros in log terms.
pub const ZERO_TOL: f64 = 1e-15;

fn check_and_normalize(probs: &mut [f64], what: &str) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::InvalidDistribution(format!("{what}: empty")));
    }
    for &p in probs.iter() {
        if !p.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "{what}: non-finite entry {p}"
            )));
        }
        if p < -1e-12 {
            return Err(Error::InvalidDistribution(format!(
                "{what}: negative entry {p}"
            )));
        }
    }
    probs.iter_mut().for_each(|p| *p = p.max(0.0));
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > MASS_TOL {
        return Err(Error::InvalidDistribution(format!(
            "{what}: mass {sum} not within {MASS_TOL} of 1"
        )));
    }
    probs.iter_mut().for_each(|p| *p /= sum);
    Ok(())
}

/// Entropy in bits of an unvalidated slice of non-negative weights.
pub(crate) fn entropy_slice(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &x in p {
        if x > ZERO_TOL {
            h -= x * x.log2();
        }
    }
    h
}

/// A finite probability vector on the simplex.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimplexVector {
    probs: Vec<f64>,
}

impl SimplexVector {
    /// Validates non-negativity and mass, renormalizing within tolerance.
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        check_and_normalize(&mut probs, "simplex vector")?;
        Ok(SimplexVector { probs })
    }

    pub fn uniform(n: usize) -> Self {
        SimplexVector {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(i: usize, n: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[i] = 1.0;
        SimplexVector { probs }
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Row-stochastic matrix of conditional probabilities `q(out|in)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StochasticMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Vec<f64>>,
}

impl StochasticMatrix {
    pub fn new(entries: Vec<Vec<f64>>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidDistribution("channel: no rows".into()));
        }
        let cols = entries[0].len();
        let mut rows = Vec::with_capacity(entries.len());
        for mut row in entries {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: row.len(),
                });
            }
            check_and_normalize(&mut row, "channel row")?;
            rows.push(row);
        }
        Ok(StochasticMatrix {
            rows: rows.len(),
            cols,
            entries: rows,
        })
    }

    pub fn identity(n: usize) -> Self {
        StochasticMatrix {
            rows: n,
            cols: n,
            entries: (0..n)
                .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }
}

/// A two-receiver broadcast channel, modeled by its marginal legs
/// `q(y|x)` and `q(z|x)`. Every quantity in this crate depends on the
/// marginals only.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BroadcastChannel {
    x_size: usize,
    y_chan: StochasticMatrix,
    z_chan: StochasticMatrix,
}

impl BroadcastChannel {
    pub fn new(y_chan: StochasticMatrix, z_chan: StochasticMatrix) -> Result<Self> {
        if y_chan.rows() != z_chan.rows() {
            return Err(Error::DimensionMismatch {
                expected: y_chan.rows(),
                got: z_chan.rows(),
            });
        }
        Ok(BroadcastChannel {
            x_size: y_chan.rows(),
            y_chan,
            z_chan,
        })
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn y_chan(&self) -> &StochasticMatrix {
        &self.y_chan
    }

    pub fn z_chan(&self) -> &StochasticMatrix {
        &self.z_chan
    }

    /// Same channel with the roles of the Y and Z receivers swapped.
    pub fn swapped(&self) -> BroadcastChannel {
        BroadcastChannel {
            x_size: self.x_size,
            y_chan: self.z_chan.clone(),
            z_chan: self.y_chan.clone(),
        }
    }

    /// `I(X;Y)` at input law `p`.
    pub fn mi_y(&self, p: &SimplexVector) -> Result<f64> {
        mi_input_channel(p, &self.y_chan)
    }

    /// `I(X;Z)` at input law `p`.
    pub fn mi_z(&self, p: &SimplexVector) -> Result<f64> {
        mi_input_channel(p, &self.z_chan)
    }
}

/// Multi-dimensional non-negative table with total mass 1.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JointTable {
    axes: Vec<usize>,
    entries: Vec<f64>,
}

impl JointTable {
    pub fn new(axes: Vec<usize>, mut entries: Vec<f64>) -> Result<Self> {
        let expected: usize = axes.iter().product();
        if axes.is_empty() || expected == 0 {
            return Err(Error::InvalidDistribution("joint table: empty axes".into()));
        }
        if entries.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: entries.len(),
            });
        }
        check_and_normalize(&mut entries, "joint table")?;
        Ok(JointTable { axes, entries })
    }

    /// 2-axis table from a row-major matrix.
    pub fn from_matrix(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(Error::InvalidDistribution("joint table: no rows".into()));
        }
        let c = rows[0].len();
        let mut entries = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    got: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        JointTable::new(vec![r, c], entries)
    }

    pub fn axes(&self) -> &[usize] {
        &self.axes
    }

    pub fn rank(&self) -> usize {
        self.axes.len()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.axes.len()];
        for i in (0..self.axes.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.axes[i + 1];
        }
        s
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        let strides = self.strides();
        let flat: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
        self.entries[flat]
    }

    /// Marginal over the listed axes, in the listed order.
    pub fn marginal(&self, keep: &[usize]) -> Result<JointTable> {
        for &k in keep {
            if k >= self.axes.len() {
                return Err(Error::BadAxes);
            }
        }
        let out_axes: Vec<usize> = keep.iter().map(|&k| self.axes[k]).collect();
        let out_len: usize = out_axes.iter().product();
        let mut out = vec![0.0; out_len.max(1)];
        let strides = self.strides();
        let mut idx = vec![0usize; self.axes.len()];
        for (flat, &p) in self.entries.iter().enumerate() {
            let mut rem = flat;
            for (d, s) in strides.iter().enumerate() {
                idx[d] = rem / s;
                rem %= s;
            }
            let mut out_flat = 0usize;
            for &k in keep {
                out_flat = out_flat * self.axes[k] + idx[k];
            }
            out[out_flat] += p;
        }
        Ok(JointTable {
            axes: if out_axes.is_empty() {
                vec![1]
            } else {
                out_axes
            },
            entries: out,
        })
    }

    /// Entropy in bits of the whole table.
    pub fn entropy(&self) -> f64 {
        entropy_slice(&self.entries)
    }

    /// 2-axis table as a nested matrix.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        assert_eq!(self.rank(), 2);
        let (r, c) = (self.axes[0], self.axes[1]);
        (0..r)
            .map(|i| self.entries[i * c..(i + 1) * c].to_vec())
            .collect()
    }
}

/// Shannon entropy in bits.
pub fn entropy(p: &SimplexVector) -> f64 {
    entropy_slice(p.probs())
}

/// `I(A;B)` in bits of a 2-axis joint; tiny negatives clamped to 0.
pub fn mutual_information(joint: &JointTable) -> Result<f64> {
    if joint.rank() != 2 {
        return Err(Error::BadAxes);
    }
    let ha = joint.marginal(&[0])?.entropy();
    let hb = joint.marginal(&[1])?.entropy();
    let i = ha + hb - joint.entropy();
    clamp_mi(i)
}

fn clamp_mi(i: f64) -> Result<f64> {
    if i < -1e-9 {
        return Err(Error::Inconsistent(format!(
            "mutual information {i} below clamp threshold"
        )));
    }
    Ok(i.max(0.0))
}

/// `I(A;B|C)` in bits, computed by summation over the conditioning marginal:
/// `sum_c p(c) I(A;B|C=c)`. Empty `c_axes` reduces to plain `I(A;B)`.
pub fn conditional_mutual_information(
    joint: &JointTable,
    a_axes: &[usize],
    b_axes: &[usize],
    c_axes: &[usize],
) -> Result<f64> {
    let mut seen = vec![false; joint.rank()];
    for &k in a_axes.iter().chain(b_axes).chain(c_axes) {
        if k >= joint.rank() || seen[k] {
            return Err(Error::BadAxes);
        }
        seen[k] = true;
    }
    if a_axes.is_empty() || b_axes.is_empty() {
        return Ok(0.0);
    }
    // reorder to (A..., B..., C...) then slice per C assignment
    let order: Vec<usize> = a_axes.iter().chain(b_axes).chain(c_axes).copied().collect();
    let abc = joint.marginal(&order)?;
    let na: usize = a_axes.iter().map(|&k| joint.axes[k]).product();
    let nb: usize = b_axes.iter().map(|&k| joint.axes[k]).product();
    let nc: usize = c_axes
        .iter()
        .map(|&k| joint.axes[k])
        .product::<usize>()
        .max(1);
    let block = na * nb;
    let mut total = 0.0;
    for c in 0..nc {
        // entries for C=c are strided: flat = ((ia*nb)+ib)*nc + c
        let mut slab = vec![0.0; block];
        let mut mass = 0.0;
        for ab in 0..block {
            let p = abc.entries[ab * nc + c];
            slab[ab] = p;
            mass += p;
        }
        if mass <= ZERO_TOL {
            continue;
        }
        slab.iter_mut().for_each(|p| *p /= mass);
        let mut pa = vec![0.0; na];
        let mut pb = vec![0.0; nb];
        for ia in 0..na {
            for ib in 0..nb {
                let p = slab[ia * nb + ib];
                pa[ia] += p;
                pb[ib] += p;
            }
        }
        let i_c = entropy_slice(&pa) + entropy_slice(&pb) - entropy_slice(&slab);
        total += mass * i_c;
    }
    clamp_mi(total)
}

/// Output law `q_j = sum_i p_i chan[i][j]`.
pub fn push_forward(p: &SimplexVector, chan: &StochasticMatrix) -> Result<SimplexVector> {
    if p.dim() != chan.rows() {
        return Err(Error::DimensionMismatch {
            expected: chan.rows(),
            got: p.dim(),
        });
    }
    let mut out = vec![0.0; chan.cols()];
    for (i, &pi) in p.probs().iter().enumerate() {
        if pi == 0.0 {
            continue;
        }
        for (j, &q) in chan.row(i).iter().enumerate() {
            out[j] += pi * q;
        }
    }
    SimplexVector::new(out)
}

/// Joint `p(x, out) = p(x) q(out|x)` as a 2-axis table.
pub fn joint_from_input(p: &SimplexVector, chan: &StochasticMatrix) -> Result<JointTable> {
    if p.dim() != chan.rows() {
        return Err(Error::DimensionMismatch {
            expected: chan.rows(),
            got: p.dim(),
        });
    }
    let mut entries = Vec::with_capacity(p.dim() * chan.cols());
    for (i, &pi) in p.probs().iter().enumerate() {
        for &q in chan.row(i) {
            entries.push(pi * q);
        }
    }
    JointTable::new(vec![p.dim(), chan.cols()], entries)
}

/// `I(X; out)` for an input law and a channel.
pub fn mi_input_channel(p: &SimplexVector, chan: &StochasticMatrix) -> Result<f64> {
    if p.dim() != chan.rows() {
        return Err(Error::DimensionMismatch {
            expected: chan.rows(),
            got: p.dim(),
        });
    }
    let out = push_forward(p, chan)?;
    let mut h_cond = 0.0;
    for (i, &pi) in p.probs().iter().enumerate() {
        if pi > ZERO_TOL {
            h_cond += pi * entropy_slice(chan.row(i));
        }
    }
    clamp_mi(entropy_slice(out.probs()) - h_cond)
}

/// Product (2-letter) broadcast channel on the alphabet `X1 x X2`,
/// row-major index order `(x1, x2)`.
pub fn product_channel(ch1: &BroadcastChannel, ch2: &BroadcastChannel) -> BroadcastChannel {
    let kron = |a: &StochasticMatrix, b: &StochasticMatrix| {
        let mut rows = Vec::with_capacity(a.rows() * b.rows());
        for i1 in 0..a.rows() {
            for i2 in 0..b.rows() {
                let mut row = Vec::with_capacity(a.cols() * b.cols());
                for j1 in 0..a.cols() {
                    for j2 in 0..b.cols() {
                        row.push(a.get(i1, j1) * b.get(i2, j2));
                    }
                }
                rows.push(row);
            }
        }
        StochasticMatrix::new(rows).expect("product of stochastic rows is stochastic")
    };
    BroadcastChannel::new(
        kron(ch1.y_chan(), ch2.y_chan()),
        kron(ch1.z_chan(), ch2.z_chan()),
    )
    .expect("row counts agree by construction")
}

/// Append an erasure symbol hit with probability `eps` regardless of input.
pub fn erasure_wrap(chan: &StochasticMatrix, eps: f64) -> Result<StochasticMatrix> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::Domain(format!(
            "erasure probability {eps} not in [0,1]"
        )));
    }
    let rows = (0..chan.rows())
        .map(|i| {
            let mut row: Vec<f64> = chan.row(i).iter().map(|&q| (1.0 - eps) * q).collect();
            row.push(eps);
            row
        })
        .collect();
    StochasticMatrix::new(rows)
}

/// Built-in channel fixtures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Builtin {
    /// Binary skew-symmetric channel with skew 1/2.
    BsscHalf,
    /// Deterministic ternary-input channel 0->(0,0), 1->(0,1), 2->(1,1).
    Blackwell,
    /// The binary channel pair used by the builtin counterexample.
    AppendixB,
}

impl std::str::FromStr for Builtin {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bssc_half" => Ok(Builtin::BsscHalf),
            "blackwell" => Ok(Builtin::Blackwell),
            "appendix_b" => Ok(Builtin::AppendixB),
            other => Err(Error::UnknownBuiltin(other.to_string())),
        }
    }
}

/// Returns the named channel and, where one is conventional, a default
/// input law.
pub fn builtin_channel(name: Builtin) -> (BroadcastChannel, Option<SimplexVector>) {
    match name {
        Builtin::BsscHalf => (bssc_channel(0.5), None),
        Builtin::Blackwell => {
            let y = StochasticMatrix::new(vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]])
                .unwrap();
            let z = StochasticMatrix::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]])
                .unwrap();
            (BroadcastChannel::new(y, z).unwrap(), None)
        }
        Builtin::AppendixB => {
            let y = StochasticMatrix::new(vec![vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap();
            let z = StochasticMatrix::new(vec![vec![1.0, 0.0], vec![0.1, 0.9]]).unwrap();
            (
                BroadcastChannel::new(y, z).unwrap(),
                Some(SimplexVector::new(vec![0.8, 0.2]).unwrap()),
            )
        }
    }
}

/// Binary skew-symmetric channel with skew `p`: the Y leg flips input 0
/// with probability `p`, the Z leg flips input 1 with probability `p`.
/// The closed forms in [`crate::bssc`] apply only at `p = 1/2`.
pub fn bssc_channel(p: f64) -> BroadcastChannel {
    let y = StochasticMatrix::new(vec![vec![1.0 - p, p], vec![0.0, 1.0]]).unwrap();
    let z = StochasticMatrix::new(vec![vec![1.0, 0.0], vec![p, 1.0 - p]]).unwrap();
    BroadcastChannel::new(y, z).unwrap()
}

/// JSON channel file schema:
/// `{ "x_size": 2, "y_given_x": [[...]], "z_given_x": [[...]], "px": [...] }`
/// with `px` optional; each row must sum to 1 within `1e-9`.
#[derive(Clone, Debug, serde::Deserialize, Serialize)]
pub struct ChannelJson {
    pub x_size: usize,
    pub y_given_x: Vec<Vec<f64>>,
    pub z_given_x: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub px: Option<Vec<f64>>,
}

impl ChannelJson {
    pub fn parse(text: &str) -> Result<(BroadcastChannel, Option<SimplexVector>)> {
        let raw: ChannelJson = serde_json::from_str(text)?;
        raw.build()
    }

    pub fn build(self) -> Result<(BroadcastChannel, Option<SimplexVector>)> {
        let y = StochasticMatrix::new(self.y_given_x)?;
        let z = StochasticMatrix::new(self.z_given_x)?;
        if y.rows() != self.x_size {
            return Err(Error::DimensionMismatch {
                expected: self.x_size,
                got: y.rows(),
            });
        }
        let ch = BroadcastChannel::new(y, z)?;
        let px = self.px.map(SimplexVector::new).transpose()?;
        if let Some(p) = &px {
            if p.dim() != ch.x_size() {
                return Err(Error::DimensionMismatch {
                    expected: ch.x_size(),
                    got: p.dim(),
                });
            }
        }
        Ok((ch, px))
    }

    pub fn from_channel(ch: &BroadcastChannel, px: Option<&SimplexVector>) -> Self {
        ChannelJson {
            x_size: ch.x_size(),
            y_given_x: (0..ch.x_size())
                .map(|i| ch.y_chan().row(i).to_vec())
                .collect(),
            z_given_x: (0..ch.x_size())
                .map(|i| ch.z_chan().row(i).to_vec())
                .collect(),
            px: px.map(|p| p.probs().to_vec()),
        }
    }
}
