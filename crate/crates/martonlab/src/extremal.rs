//! Perturbation machinery for couplings `X = f(U,V)` at `alpha = 1`:
//! stationarity residuals, the first-derivative pair inequality, pattern
//! exclusion with its explicit perturbation, row/column merge reduction,
//! and the second-derivative quadratic form restricted to the
//! marginal-preserving subspace.
//!
//! The quadratic form and its coefficient tensors are only stated for the
//! unweighted objective; the weighted binary closed forms live in
//! [`crate::bssc`].

use serde::Serialize;

use crate::numeric;
use crate::probcore::{mutual_information, BroadcastChannel, JointTable, SimplexVector};
use crate::tmax::{gradient_j, CouplingWithMap, MapF};
use crate::{Error, Result};

/// Joints below this threshold make the curvature coefficients blow up;
/// the certifier reports `inconclusive` instead of dividing by them.
pub const DENSE_TOL: f64 = 1e-9;
/// Mass below which a cell does not participate in stationarity spreads.
const SUPPORT_TOL: f64 = 1e-12;
/// Dependence level above which a detected pattern refutes maximality.
const PATTERN_DEPENDENCE_TOL: f64 = 1e-3;

/// A multiplicative perturbation in the `I_{u,v} = p_{u,v} L_{u,v}`
/// variables; fiber sums vanish so the X marginal is preserved.
#[derive(Clone, Debug, Serialize)]
pub struct Perturbation {
    i_table: Vec<f64>,
    u_size: usize,
    v_size: usize,
}

impl Perturbation {
    /// Validates the fiber-sum-zero constraint against `map` within 1e-12.
    pub fn new(i_table: Vec<f64>, map: &MapF) -> Result<Self> {
        if i_table.len() != map.u_size() * map.v_size() {
            return Err(Error::DimensionMismatch {
                expected: map.u_size() * map.v_size(),
                got: i_table.len(),
            });
        }
        let mut sums = vec![0.0; map.x_size()];
        for (i, &w) in i_table.iter().enumerate() {
            sums[map.cells()[i]] += w;
        }
        if let Some(&bad) = sums.iter().find(|s| s.abs() > 1e-12) {
            return Err(Error::Invalid(format!(
                "perturbation does not preserve the X marginal: fiber sum {bad}"
            )));
        }
        Ok(Perturbation {
            i_table,
            u_size: map.u_size(),
            v_size: map.v_size(),
        })
    }

    pub fn entries(&self) -> &[f64] {
        &self.i_table
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.i_table[u * self.v_size + v]
    }

    pub fn u_size(&self) -> usize {
        self.u_size
    }

    pub fn v_size(&self) -> usize {
        self.v_size
    }
}

fn induced_joints(
    c: &CouplingWithMap,
    ch: &BroadcastChannel,
) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let (nu, nv) = (c.map.u_size(), c.map.v_size());
    let (ny, nz) = (ch.y_chan().cols(), ch.z_chan().cols());
    let p = c.p_uv.entries();
    let mut pu = vec![0.0; nu];
    let mut pv = vec![0.0; nv];
    let mut puy = vec![0.0; nu * ny];
    let mut pvz = vec![0.0; nv * nz];
    for u in 0..nu {
        for v in 0..nv {
            let w = p[u * nv + v];
            if w == 0.0 {
                continue;
            }
            pu[u] += w;
            pv[v] += w;
            let x = c.map.value(u, v);
            for (y, &q) in ch.y_chan().row(x).iter().enumerate() {
                puy[u * ny + y] += w * q;
            }
            for (z, &q) in ch.z_chan().row(x).iter().enumerate() {
                pvz[v * nz + z] += w * q;
            }
        }
    }
    (pu, pv, puy, pvz)
}

/// Max over fibers of the spread (max - min) of the objective partials on
/// the fiber's support; zero within tolerance means stationary.
pub fn stationarity_residuals(
    c: &CouplingWithMap,
    ch: &BroadcastChannel,
    p_x: &SimplexVector,
    alpha: f64,
) -> Result<f64> {
    let g = gradient_j(c, ch, p_x, alpha)?;
    let p = c.p_uv.entries();
    let nv = c.map.v_size();
    let mut residual: f64 = 0.0;
    for fiber in c.map.fibers() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut massive = 0usize;
        for &cell in &fiber {
            if p[cell] > SUPPORT_TOL {
                let val = g[cell / nv][cell % nv];
                lo = lo.min(val);
                hi = hi.max(val);
                massive += 1;
            }
        }
        if massive >= 2 {
            residual = residual.max(hi - lo);
        }
    }
    Ok(residual)
}

/// One evaluated pair inequality.
#[derive(Clone, Debug, Serialize)]
pub struct Lemma2Slack {
    pub holds: bool,
    pub slack: f64,
    /// Equality forces `p(y|x) = p(y|u2) = p(y|u1)`; flagged when the
    /// inequality is tight within 1e-9.
    pub equality_degenerate: bool,
}

/// First-derivative pair inequality for `u1, u2, v` with
/// `f(u1,v) = f(u2,v) = x`:
/// `sum_y q(y|x)^2 / p(u2,y) >= p(u1,v) / (p(u2,v) p(u1))`.
pub fn lemma2_check(
    c: &CouplingWithMap,
    ch: &BroadcastChannel,
    u1: usize,
    u2: usize,
    v: usize,
) -> Result<Lemma2Slack> {
    let (nu, nv) = (c.map.u_size(), c.map.v_size());
    if u1 >= nu || u2 >= nu || v >= nv || u1 == u2 {
        return Err(Error::Invalid("pair indices out of range".into()));
    }
    let x = c.map.value(u1, v);
    if c.map.value(u2, v) != x {
        return Err(Error::Invalid(format!(
            "cells ({u1},{v}) and ({u2},{v}) map to different symbols"
        )));
    }
    let (pu, _, puy, _) = induced_joints(c, ch);
    let ny = ch.y_chan().cols();
    let p = c.p_uv.matrix();
    if pu[u1] <= DENSE_TOL || p[u2][v] <= DENSE_TOL {
        return Err(Error::Degenerate(
            "pair inequality needs positive joints".into(),
        ));
    }
    let mut lhs = 0.0;
    for (y, &q) in ch.y_chan().row(x).iter().enumerate() {
        if q > 0.0 {
            let den = puy[u2 * ny + y];
            if den <= DENSE_TOL * q {
                return Err(Error::Degenerate(format!(
                    "p(u2,y) vanishes at y={y} where q(y|x) > 0"
                )));
            }
            lhs += q * q / den;
        }
    }
    let rhs = p[u1][v] / (p[u2][v] * pu[u1]);
    let slack = lhs - rhs;
    Ok(Lemma2Slack {
        holds: slack >= -1e-9,
        slack,
        equality_degenerate: slack.abs() <= 1e-9,
    })
}

/// Column-side variant: `f(u,v1) = f(u,v2)` checked through the Z leg.
pub fn lemma2_check_cols(
    c: &CouplingWithMap,
    ch: &BroadcastChannel,
    v1: usize,
    v2: usize,
    u: usize,
) -> Result<Lemma2Slack> {
    lemma2_check(&c.transposed(), &ch.swapped(), v1, v2, u)
}

/// All `(x0, u0, v0)` with a constant row and constant column sharing `x0`.
pub fn and_pattern_detect(f: &MapF) -> Vec<(usize, usize, usize)> {
    f.and_patterns()
}

/// The explicit marginal-preserving perturbation attached to a pattern at
/// `(u0, v0)`: zero off the row/column, `I_{u0,v} = p_{u0,v} p_{v0}`,
/// `I_{u,v0} = -p_{u,v0} p_{u0}`, `I_{u0,v0} = p_{u0,v0}(p_{v0} - p_{u0})`.
pub fn theorem2_perturbation(c: &CouplingWithMap, u0: usize, v0: usize) -> Result<Perturbation> {
    let (nu, nv) = (c.map.u_size(), c.map.v_size());
    if u0 >= nu || v0 >= nv {
        return Err(Error::Invalid("pattern indices out of range".into()));
    }
    if !c
        .map
        .and_patterns()
        .iter()
        .any(|&(_, u, v)| u == u0 && v == v0)
    {
        return Err(Error::Invalid(format!(
            "map has no constant row/column pattern at ({u0},{v0})"
        )));
    }
    let p = c.p_uv.matrix();
    for v in 0..nv {
        if p[u0][v] <= 0.0 {
            return Err(Error::Degenerate(format!("row entry p({u0},{v}) is zero")));
        }
    }
    for u in 0..nu {
        if p[u][v0] <= 0.0 {
            return Err(Error::Degenerate(format!(
                "column entry p({u},{v0}) is zero"
            )));
        }
    }
    let pu0: f64 = (0..nv).map(|v| p[u0][v]).sum();
    let pv0: f64 = (0..nu).map(|u| p[u][v0]).sum();
    let mut i_table = vec![0.0; nu * nv];
    for v in 0..nv {
        if v != v0 {
            i_table[u0 * nv + v] = p[u0][v] * pv0;
        }
    }
    for u in 0..nu {
        if u != u0 {
            i_table[u * nv + v0] = -p[u][v0] * pu0;
        }
    }
    i_table[u0 * nv + v0] = p[u0][v0] * (pv0 - pu0);
    Perturbation::new(i_table, &c.map)
}

/// The second-derivative quadratic form of the unweighted objective in the
/// `I` variables, with its coefficient tensors and an orthonormal basis of
/// the marginal-preserving subspace.
#[derive(Clone, Debug, Serialize)]
pub struct HessianForm {
    /// Symmetric matrix over the flattened `(u,v)` index space; the form is
    /// the negative of the second derivative, so local maxima need it
    /// positive semi-definite on the constraint subspace.
    pub q_matrix: Vec<Vec<f64>>,
    /// `t_u[x1][x2][u] = sum_y q(y|x1) q(y|x2) / p(u,y)`.
    pub t_u: Vec<Vec<Vec<f64>>>,
    /// `t_v[x1][x2][v] = sum_z q(z|x1) q(z|x2) / p(v,z)`.
    pub t_v: Vec<Vec<Vec<f64>>>,
    /// Orthonormal zero-fiber-sum vectors spanning the feasible directions.
    pub constraint_basis: Vec<Vec<f64>>,
    u_size: usize,
    v_size: usize,
}

impl HessianForm {
    /// Quadratic form value `Q(I)`.
    pub fn quad(&self, pert: &Perturbation) -> f64 {
        let n = self.u_size * self.v_size;
        let i = pert.entries();
        let mut total = 0.0;
        for a in 0..n {
            for b in 0..n {
                total += i[a] * self.q_matrix[a][b] * i[b];
            }
        }
        total
    }

    /// Minimum eigenvalue of `Q` restricted to the constraint subspace and
    /// the corresponding direction, or `None` when the subspace is trivial.
    pub fn projected_min_eig(&self) -> Option<(f64, Vec<f64>)> {
        let k = self.constraint_basis.len();
        if k == 0 {
            return None;
        }
        let n = self.u_size * self.v_size;
        let mut m = vec![vec![0.0; k]; k];
        for a in 0..k {
            for b in 0..k {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += self.constraint_basis[a][i]
                            * self.q_matrix[i][j]
                            * self.constraint_basis[b][j];
                    }
                }
                m[a][b] = s;
            }
        }
        let (vals, vecs) = numeric::symmetric_eigen(&m);
        let mut dir = vec![0.0; n];
        for (w, basis_vec) in vecs[0].iter().zip(&self.constraint_basis) {
            for i in 0..n {
                dir[i] += w * basis_vec[i];
            }
        }
        Some((vals[0], dir))
    }
}

/// Assemble the quadratic form at a strictly positive coupling
/// (unweighted objective regime).
pub fn hessian_form(
    c: &CouplingWithMap,
    ch: &BroadcastChannel,
    p_x: &SimplexVector,
) -> Result<HessianForm> {
    c.check_marginal(p_x, 1e-9)?;
    let (nu, nv) = (c.map.u_size(), c.map.v_size());
    let nx = c.map.x_size();
    let (_, _, puy, pvz) = induced_joints(c, ch);
    let p = c.p_uv.entries();
    if p.iter().any(|&w| w <= DENSE_TOL) {
        return Err(Error::Degenerate(
            "coupling must be strictly positive for the curvature form".into(),
        ));
    }
    let (ny, nz) = (ch.y_chan().cols(), ch.z_chan().cols());
    // coefficient tensor: terms with a vanishing channel-product numerator
    // drop out; a positive numerator over a vanishing joint is degenerate
    let tensor = |leg: &crate::probcore::StochasticMatrix,
                  joint: &[f64],
                  n_aux: usize,
                  n_out: usize|
     -> Vec<Vec<Vec<f64>>> {
        let mut t = vec![vec![vec![0.0; n_aux]; nx]; nx];
        for (x1, row1) in t.iter_mut().enumerate() {
            for (x2, row2) in row1.iter_mut().enumerate() {
                for (a, slot) in row2.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for o in 0..n_out {
                        let num = leg.get(x1, o) * leg.get(x2, o);
                        if num > 0.0 {
                            let den = joint[a * n_out + o];
                            if den <= DENSE_TOL * num {
                                s = f64::INFINITY;
                                break;
                            }
                            s += num / den;
                        }
                    }
                    *slot = s;
                }
            }
        }
        t
    };
    let t_u = tensor(ch.y_chan(), &puy, nu, ny);
    let t_v = tensor(ch.z_chan(), &pvz, nv, nz);
    let n = nu * nv;
    let mut q = vec![vec![0.0; n]; n];
    for cell in 0..n {
        q[cell][cell] += 1.0 / p[cell];
    }
    for u in 0..nu {
        for v1 in 0..nv {
            for v2 in 0..nv {
                let (x1, x2) = (c.map.value(u, v1), c.map.value(u, v2));
                let t = t_u[x1][x2][u];
                if !t.is_finite() {
                    return Err(Error::Degenerate(format!(
                        "p(u,y) vanishes where the channel pair ({x1},{x2}) needs it"
                    )));
                }
                q[u * nv + v1][u * nv + v2] -= t;
            }
        }
    }
    for v in 0..nv {
        for u1 in 0..nu {
            for u2 in 0..nu {
                let (x1, x2) = (c.map.value(u1, v), c.map.value(u2, v));
                let t = t_v[x1][x2][v];
                if !t.is_finite() {
                    return Err(Error::Degenerate(format!(
                        "p(v,z) vanishes where the channel pair ({x1},{x2}) needs it"
                    )));
                }
                q[u1 * nv + v][u2 * nv + v] -= t;
            }
        }
    }
    // orthonormal zero-sum vectors within each fiber
    let mut basis = Vec::new();
    for fiber in c.map.fibers() {
        for j in 1..fiber.len() {
            let norm = 1.0 / ((j * (j + 1)) as f64).sqrt();
            let mut w = vec![0.0; n];
            for &cell in fiber.iter().take(j) {
                w[cell] = norm;
            }
            w[fiber[j]] = -(j as f64) * norm;
            basis.push(w);
        }
    }
    Ok(HessianForm {
        q_matrix: q,
        t_u,
        t_v,
        constraint_basis: basis,
        u_size: nu,
        v_size: nv,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    CertifiedLocalMax,
    Refuted,
    Inconclusive,
}

/// Concrete evidence behind a `Refuted` verdict.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind")]
pub enum RefutationWitness {
    /// A constant row/column pattern with genuine receiver dependence; the
    /// attached perturbation yields the contradiction.
    AndPatternExcluded {
        pattern: (usize, usize, usize),
        q_value: f64,
        i_uy: f64,
        i_vz: f64,
        i_table: Vec<f64>,
    },
    NonStationary {
        spread: f64,
    },
    Lemma2Violated {
        side: String,
        u1: usize,
        u2: usize,
        v: usize,
        slack: f64,
    },
    NegativeCurvature {
        eigenvalue: f64,
        direction: Vec<f64>,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct Lemma2Entry {
    pub side: String,
    pub u1: usize,
    pub u2: usize,
    pub v: usize,
    pub slack: f64,
    pub holds: bool,
    pub equality_degenerate: bool,
}

/// Aggregated first- and second-order conditions with a verdict.
#[derive(Clone, Debug, Serialize)]
pub struct CertificateReport {
    pub stationarity_residual: f64,
    pub lemma2_slacks: Vec<Lemma2Entry>,
    pub and_patterns: Vec<(usize, usize, usize)>,
    /// `None` when every fiber is a singleton (no feasible directions).
    pub min_eig_projected: Option<f64>,
    pub verdict: Verdict,
    pub refutation: Option<RefutationWitness>,
    pub notes: Vec<String>,
}

/// Run every applicable condition at `alpha = 1` and aggregate a verdict:
/// certified iff the residual is below 1e-5, all pair slacks are above
/// -1e-9 and the projected curvature is above -1e-8; refuted on any
/// concrete violation; inconclusive on near-zero joints.
pub fn certify_local_max(
    c: &CouplingWithMap,
    ch: &BroadcastChannel,
    p_x: &SimplexVector,
) -> Result<CertificateReport> {
    c.check_marginal(p_x, 1e-9)?;
    let (nu, nv) = (c.map.u_size(), c.map.v_size());
    let mut notes = Vec::new();

    let residual = stationarity_residuals(c, ch, p_x, 1.0)?;

    let mut slacks = Vec::new();
    let mut lemma2_violation: Option<RefutationWitness> = None;
    for v in 0..nv {
        for u1 in 0..nu {
            for u2 in 0..nu {
                if u1 == u2 || c.map.value(u1, v) != c.map.value(u2, v) {
                    continue;
                }
                match lemma2_check(c, ch, u1, u2, v) {
                    Ok(s) => {
                        if !s.holds && lemma2_violation.is_none() {
                            lemma2_violation = Some(RefutationWitness::Lemma2Violated {
                                side: "row".into(),
                                u1,
                                u2,
                                v,
                                slack: s.slack,
                            });
                        }
                        slacks.push(Lemma2Entry {
                            side: "row".into(),
                            u1,
                            u2,
                            v,
                            slack: s.slack,
                            holds: s.holds,
                            equality_degenerate: s.equality_degenerate,
                        });
                    }
                    Err(Error::Degenerate(msg)) => {
                        notes.push(format!("row pair ({u1},{u2},{v}): {msg}"))
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    for u in 0..nu {
        for v1 in 0..nv {
            for v2 in 0..nv {
                if v1 == v2 || c.map.value(u, v1) != c.map.value(u, v2) {
                    continue;
                }
                match lemma2_check_cols(c, ch, v1, v2, u) {
                    Ok(s) => {
                        if !s.holds && lemma2_violation.is_none() {
                            lemma2_violation = Some(RefutationWitness::Lemma2Violated {
                                side: "col".into(),
                                u1: v1,
                                u2: v2,
                                v: u,
                                slack: s.slack,
                            });
                        }
                        slacks.push(Lemma2Entry {
                            side: "col".into(),
                            u1: v1,
                            u2: v2,
                            v: u,
                            slack: s.slack,
                            holds: s.holds,
                            equality_degenerate: s.equality_degenerate,
                        });
                    }
                    Err(Error::Degenerate(msg)) => {
                        notes.push(format!("col pair ({v1},{v2},{u}): {msg}"))
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }

    let and_patterns = c.map.and_patterns();

    // dependence levels for the pattern exclusion
    let (ny, nz) = (ch.y_chan().cols(), ch.z_chan().cols());
    let (_, _, puy, pvz) = induced_joints(c, ch);
    let i_uy = mutual_information(
        &JointTable::new(vec![nu, ny], puy)
            .unwrap_or_else(|_| JointTable::new(vec![1, 1], vec![1.0]).unwrap()),
    )
    .unwrap_or(0.0);
    let i_vz = mutual_information(
        &JointTable::new(vec![nv, nz], pvz)
            .unwrap_or_else(|_| JointTable::new(vec![1, 1], vec![1.0]).unwrap()),
    )
    .unwrap_or(0.0);

    let hess = match hessian_form(c, ch, p_x) {
        Ok(h) => Some(h),
        Err(Error::Degenerate(msg)) => {
            notes.push(msg);
            None
        }
        Err(e) => return Err(e),
    };

    let mut pattern_refutation = None;
    for &(x0, u0, v0) in &and_patterns {
        if i_uy < PATTERN_DEPENDENCE_TOL || i_vz < PATTERN_DEPENDENCE_TOL {
            notes.push(format!(
                "pattern ({x0},{u0},{v0}) not excluded: dependence below threshold"
            ));
            continue;
        }
        match theorem2_perturbation(c, u0, v0) {
            Ok(pert) => {
                let q_value = hess.as_ref().map(|h| h.quad(&pert)).unwrap_or(f64::NAN);
                pattern_refutation = Some(RefutationWitness::AndPatternExcluded {
                    pattern: (x0, u0, v0),
                    q_value,
                    i_uy,
                    i_vz,
                    i_table: pert.entries().to_vec(),
                });
                break;
            }
            Err(Error::Degenerate(msg)) => notes.push(msg),
            Err(e) => return Err(e),
        }
    }

    let min_eig = hess.as_ref().and_then(|h| h.projected_min_eig());
    let min_eig_projected = min_eig.as_ref().map(|(v, _)| *v);

    let refutation = if let Some(r) = pattern_refutation {
        Some(r)
    } else if residual >= 1e-5 {
        Some(RefutationWitness::NonStationary { spread: residual })
    } else if let Some(r) = lemma2_violation {
        Some(r)
    } else if let Some((val, dir)) = &min_eig {
        if *val < -1e-8 {
            Some(RefutationWitness::NegativeCurvature {
                eigenvalue: *val,
                direction: dir.clone(),
            })
        } else {
            None
        }
    } else {
        None
    };

    let verdict = if refutation.is_some() {
        Verdict::Refuted
    } else if hess.is_none() && !notes.is_empty() {
        Verdict::Inconclusive
    } else {
        Verdict::CertifiedLocalMax
    };

    Ok(CertificateReport {
        stationarity_residual: residual,
        lemma2_slacks: slacks,
        and_patterns,
        min_eig_projected,
        verdict,
        refutation,
        notes,
    })
}

/// Merge duplicate map rows (then columns) by summing their coupling mass,
/// to a fixed point. The objective never decreases under a merge.
pub fn reduce_map(c: &CouplingWithMap) -> CouplingWithMap {
    let mut cur = c.clone();
    loop {
        if let Some(merged) = merge_one_duplicate_row(&cur) {
            cur = merged;
            continue;
        }
        let t = cur.transposed();
        if let Some(merged) = merge_one_duplicate_row(&t) {
            cur = merged.transposed();
            continue;
        }
        return cur;
    }
}

fn merge_one_duplicate_row(c: &CouplingWithMap) -> Option<CouplingWithMap> {
    let (nu, nv) = (c.map.u_size(), c.map.v_size());
    let p = c.p_uv.matrix();
    for a in 0..nu {
        for b in (a + 1)..nu {
            if (0..nv).all(|v| c.map.value(a, v) == c.map.value(b, v)) {
                let mut rows = Vec::with_capacity(nu - 1);
                let mut map_rows = Vec::with_capacity(nu - 1);
                for u in 0..nu {
                    if u == b {
                        continue;
                    }
                    let mut row = p[u].clone();
                    if u == a {
                        for v in 0..nv {
                            row[v] += p[b][v];
                        }
                    }
                    rows.push(row);
                    map_rows.push((0..nv).map(|v| c.map.value(u, v)).collect::<Vec<_>>());
                }
                let p_uv = JointTable::from_matrix(&rows).unwrap();
                let map = MapF::from_rows(&map_rows, c.map.x_size()).unwrap();
                return Some(CouplingWithMap::new(p_uv, map).unwrap());
            }
        }
    }
    None
}
