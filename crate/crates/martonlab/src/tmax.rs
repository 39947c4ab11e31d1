//! Evaluation of `T(X)` and `T_alpha(X)` at a fixed input law: enumerate
//! reduced deterministic maps `X = f(U,V)`, run multi-start projected
//! gradient ascent over `p(u,v)` under the X-marginal constraint, and
//! provide a brute-force grid oracle for small instances.
//!
//! The search is over the reduced optimizer form: `|U|, |V| <= |X|` and `X`
//! a deterministic function of `(U,V)`. These reductions are stated for the
//! unweighted functional; we adopt them for general `alpha >= 1` as well
//! (the closed-form analysis in [`crate::bssc`] uses the same form).
//! Values are honest lower bounds except in the binary `alpha = 1` case,
//! where the maximum is known to equal `max{I(X;Y), I(X;Z)}`.

use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashSet;

use crate::numeric;
use crate::probcore::{entropy_slice, BroadcastChannel, JointTable, SimplexVector};
use crate::{Error, Result};

const LN2: f64 = std::f64::consts::LN_2;
/// Ascent iterates are floored at this value before log evaluation.
const FLOOR: f64 = 1e-12;
/// Marginal agreement required between a coupling and its target p(x).
const MARGINAL_TOL: f64 = 1e-9;

/// A total deterministic map `f: U x V -> X`, stored row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct MapF {
    u_size: usize,
    v_size: usize,
    x_size: usize,
    cells: Vec<usize>,
}

impl MapF {
    pub fn new(u_size: usize, v_size: usize, x_size: usize, cells: Vec<usize>) -> Result<Self> {
        if u_size == 0 || v_size == 0 || x_size == 0 {
            return Err(Error::Invalid("map sizes must be positive".into()));
        }
        if cells.len() != u_size * v_size {
            return Err(Error::DimensionMismatch {
                expected: u_size * v_size,
                got: cells.len(),
            });
        }
        if cells.iter().any(|&x| x >= x_size) {
            return Err(Error::Invalid("map cell out of alphabet range".into()));
        }
        Ok(MapF {
            u_size,
            v_size,
            x_size,
            cells,
        })
    }

    pub fn from_rows(rows: &[Vec<usize>], x_size: usize) -> Result<Self> {
        let u = rows.len();
        let v = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != v) {
            return Err(Error::Invalid("map rows have unequal lengths".into()));
        }
        MapF::new(u, v, x_size, rows.concat())
    }

    /// The `U = X` degenerate map (identity rows, constant V).
    pub fn u_equals_x(x_size: usize) -> Self {
        MapF::new(x_size, 1, x_size, (0..x_size).collect()).unwrap()
    }

    /// The `V = X` degenerate map.
    pub fn v_equals_x(x_size: usize) -> Self {
        MapF::new(1, x_size, x_size, (0..x_size).collect()).unwrap()
    }

    pub fn u_size(&self) -> usize {
        self.u_size
    }

    pub fn v_size(&self) -> usize {
        self.v_size
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn value(&self, u: usize, v: usize) -> usize {
        self.cells[u * self.v_size + v]
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    /// Stable identifier, e.g. `u2v2:0110`.
    pub fn id(&self) -> String {
        let digits: String = self.cells.iter().map(|x| x.to_string()).collect();
        format!("u{}v{}:{}", self.u_size, self.v_size, digits)
    }

    /// Cell indices grouped by image symbol.
    pub fn fibers(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.x_size];
        for (i, &x) in self.cells.iter().enumerate() {
            out[x].push(i);
        }
        out
    }

    pub fn rows_pairwise_distinct(&self) -> bool {
        for a in 0..self.u_size {
            for b in (a + 1)..self.u_size {
                if (0..self.v_size).all(|v| self.value(a, v) == self.value(b, v)) {
                    return false;
                }
            }
        }
        true
    }

    pub fn cols_pairwise_distinct(&self) -> bool {
        for a in 0..self.v_size {
            for b in (a + 1)..self.v_size {
                if (0..self.u_size).all(|u| self.value(u, a) == self.value(u, b)) {
                    return false;
                }
            }
        }
        true
    }

    /// Triples `(x0, u0, v0)` with `f(u0, v) = f(u, v0) = x0` for all `u, v`:
    /// a constant row and a constant column sharing one symbol.
    pub fn and_patterns(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for u0 in 0..self.u_size {
            let x0 = self.value(u0, 0);
            if (0..self.v_size).any(|v| self.value(u0, v) != x0) {
                continue;
            }
            for v0 in 0..self.v_size {
                if (0..self.u_size).all(|u| self.value(u, v0) == x0) {
                    out.push((x0, u0, v0));
                }
            }
        }
        out
    }

    /// Map with the roles of U and V exchanged.
    pub fn transposed(&self) -> MapF {
        let mut cells = vec![0usize; self.cells.len()];
        for u in 0..self.u_size {
            for v in 0..self.v_size {
                cells[v * self.u_size + u] = self.value(u, v);
            }
        }
        MapF {
            u_size: self.v_size,
            v_size: self.u_size,
            x_size: self.x_size,
            cells,
        }
    }

    /// Canonical representative of the equivalence class under relabeling
    /// of U and of V (never of X, whose labels are pinned by p(x)).
    fn canonical_cells(&self) -> Vec<usize> {
        let row_perms = numeric::permutations(self.u_size);
        let col_perms = numeric::permutations(self.v_size);
        let mut best: Option<Vec<usize>> = None;
        let mut scratch = vec![0usize; self.cells.len()];
        for rp in &row_perms {
            for cp in &col_perms {
                for u in 0..self.u_size {
                    for v in 0..self.v_size {
                        scratch[u * self.v_size + v] = self.value(rp[u], cp[v]);
                    }
                }
                if best.as_ref().map_or(true, |b| scratch < *b) {
                    best = Some(scratch.clone());
                }
            }
        }
        best.unwrap()
    }

    pub fn canonicalized(&self) -> MapF {
        MapF {
            u_size: self.u_size,
            v_size: self.v_size,
            x_size: self.x_size,
            cells: self.canonical_cells(),
        }
    }

    /// True when every symbol carrying mass in `p_x` has a non-empty fiber.
    pub fn admissible_for(&self, p_x: &SimplexVector) -> bool {
        if p_x.dim() != self.x_size {
            return false;
        }
        let fibers = self.fibers();
        p_x.probs()
            .iter()
            .enumerate()
            .all(|(x, &m)| m <= MARGINAL_TOL || !fibers[x].is_empty())
    }
}

/// A joint `p(u,v)` together with the deterministic assignment `X = f(U,V)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CouplingWithMap {
    pub p_uv: JointTable,
    pub map: MapF,
}

impl CouplingWithMap {
    pub fn new(p_uv: JointTable, map: MapF) -> Result<Self> {
        if p_uv.rank() != 2 || p_uv.axes()[0] != map.u_size() || p_uv.axes()[1] != map.v_size() {
            return Err(Error::DimensionMismatch {
                expected: map.u_size() * map.v_size(),
                got: p_uv.entries().len(),
            });
        }
        Ok(CouplingWithMap { p_uv, map })
    }

    /// Fiber sums `p(x) = sum_{(u,v): f(u,v)=x} p(u,v)`.
    pub fn induced_x(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.map.x_size()];
        for (i, &p) in self.p_uv.entries().iter().enumerate() {
            out[self.map.cells()[i]] += p;
        }
        out
    }

    pub fn check_marginal(&self, p_x: &SimplexVector, tol: f64) -> Result<()> {
        if p_x.dim() != self.map.x_size() {
            return Err(Error::DimensionMismatch {
                expected: self.map.x_size(),
                got: p_x.dim(),
            });
        }
        let induced = self.induced_x();
        let max_dev = induced
            .iter()
            .zip(p_x.probs())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if max_dev > tol {
            return Err(Error::MarginalMismatch { max_dev });
        }
        Ok(())
    }

    /// Coupling with the roles of U and V exchanged.
    pub fn transposed(&self) -> CouplingWithMap {
        let m = self.p_uv.matrix();
        let (nu, nv) = (self.map.u_size(), self.map.v_size());
        let mut entries = vec![0.0; nu * nv];
        for u in 0..nu {
            for v in 0..nv {
                entries[v * nu + u] = m[u][v];
            }
        }
        CouplingWithMap {
            p_uv: JointTable::new(vec![nv, nu], entries).unwrap(),
            map: self.map.transposed(),
        }
    }
}

/// Raw objective and gradient evaluation for a fixed map and channel.
/// Treats the coupling entries as free coordinates (no renormalization),
/// which is what both the ascent projection and the finite-difference
/// oracle require.
pub(crate) struct Evaluator<'a> {
    map: &'a MapF,
    ch: &'a BroadcastChannel,
    alpha: f64,
}

impl<'a> Evaluator<'a> {
    pub fn new(map: &'a MapF, ch: &'a BroadcastChannel, alpha: f64) -> Self {
        Evaluator { map, ch, alpha }
    }

    fn shapes(&self) -> (usize, usize, usize, usize) {
        (
            self.map.u_size(),
            self.map.v_size(),
            self.ch.y_chan().cols(),
            self.ch.z_chan().cols(),
        )
    }

    fn induced(&self, p: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let (nu, nv, ny, nz) = self.shapes();
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
                let x = self.map.value(u, v);
                for (y, &q) in self.ch.y_chan().row(x).iter().enumerate() {
                    puy[u * ny + y] += w * q;
                }
                for (z, &q) in self.ch.z_chan().row(x).iter().enumerate() {
                    pvz[v * nz + z] += w * q;
                }
            }
        }
        (pu, pv, puy, pvz)
    }

    /// `alpha I(U;Y) + I(V;Z) - I(U;V)` in bits.
    pub fn j_bits(&self, p: &[f64]) -> f64 {
        let (nu, nv, ny, nz) = self.shapes();
        let (pu, pv, puy, pvz) = self.induced(p);
        let mut py = vec![0.0; ny];
        for u in 0..nu {
            for y in 0..ny {
                py[y] += puy[u * ny + y];
            }
        }
        let mut pz = vec![0.0; nz];
        for v in 0..nv {
            for z in 0..nz {
                pz[z] += pvz[v * nz + z];
            }
        }
        let hu = entropy_slice(&pu);
        let hv = entropy_slice(&pv);
        let iuy = hu + entropy_slice(&py) - entropy_slice(&puy);
        let ivz = hv + entropy_slice(&pz) - entropy_slice(&pvz);
        let iuv = hu + hv - entropy_slice(p);
        self.alpha * iuy + ivz - iuv
    }

    /// Partial derivatives in bits per unit mass, written into `g`.
    pub fn grad_bits(&self, p: &[f64], g: &mut [f64]) {
        let (nu, nv, ny, nz) = self.shapes();
        let (pu, pv, puy, pvz) = self.induced(p);
        let mut py = vec![0.0; ny];
        for u in 0..nu {
            for y in 0..ny {
                py[y] += puy[u * ny + y];
            }
        }
        let mut pz = vec![0.0; nz];
        for v in 0..nv {
            for z in 0..nz {
                pz[z] += pvz[v * nz + z];
            }
        }
        let guard = |x: f64| x.max(1e-300);
        for u in 0..nu {
            for v in 0..nv {
                let x = self.map.value(u, v);
                let mut a = 0.0;
                for (y, &q) in self.ch.y_chan().row(x).iter().enumerate() {
                    if q > 0.0 {
                        a += q * (guard(puy[u * ny + y]) / (guard(pu[u]) * guard(py[y]))).ln();
                    }
                }
                let mut b = 0.0;
                for (z, &q) in self.ch.z_chan().row(x).iter().enumerate() {
                    if q > 0.0 {
                        b += q * (guard(pvz[v * nz + z]) / (guard(pv[v]) * guard(pz[z]))).ln();
                    }
                }
                let c = (guard(p[u * nv + v]) / (guard(pu[u]) * guard(pv[v]))).ln();
                g[u * nv + v] = (self.alpha * a + b - c - self.alpha) / LN2;
            }
        }
    }
}

fn validate_instance(
    c: &CouplingWithMap,
    ch: &BroadcastChannel,
    p_x: &SimplexVector,
) -> Result<()> {
    if ch.x_size() != c.map.x_size() {
        return Err(Error::DimensionMismatch {
            expected: ch.x_size(),
            got: c.map.x_size(),
        });
    }
    c.check_marginal(p_x, MARGINAL_TOL)
}

/// `alpha I(U;Y) + I(V;Z) - I(U;V)` in bits at the given coupling.
pub fn objective_j(
    c: &CouplingWithMap,
    ch: &BroadcastChannel,
    p_x: &SimplexVector,
    alpha: f64,
) -> Result<f64> {
    validate_instance(c, ch, p_x)?;
    Ok(Evaluator::new(&c.map, ch, alpha).j_bits(c.p_uv.entries()))
}

/// Analytic partials of the objective in `p(u,v)`, in bits. Entries off the
/// support (mass below the ascent floor) are reported as zero.
pub fn gradient_j(
    c: &CouplingWithMap,
    ch: &BroadcastChannel,
    p_x: &SimplexVector,
    alpha: f64,
) -> Result<Vec<Vec<f64>>> {
    validate_instance(c, ch, p_x)?;
    let (nu, nv) = (c.map.u_size(), c.map.v_size());
    let mut g = vec![0.0; nu * nv];
    Evaluator::new(&c.map, ch, alpha).grad_bits(c.p_uv.entries(), &mut g);
    let p = c.p_uv.entries();
    let rows = (0..nu)
        .map(|u| {
            (0..nv)
                .map(|v| {
                    if p[u * nv + v] > FLOOR {
                        g[u * nv + v]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    Ok(rows)
}

/// All maps with `u <= u_max`, `v <= v_max` into `x_size` symbols that have
/// pairwise-distinct rows and pairwise-distinct columns, deduplicated up to
/// relabeling of U and of V. `u_max`, `v_max` are upper bounds on the
/// auxiliary cardinalities; the degenerate `U = X` / `V = X` choices appear
/// as the single-column / single-row shapes.
pub fn enumerate_maps(u_max: usize, v_max: usize, x_size: usize) -> Result<Vec<MapF>> {
    if x_size > 4 || u_max > x_size || v_max > x_size || u_max == 0 || v_max == 0 {
        return Err(Error::SizeCap(format!(
            "map enumeration requires 1 <= u,v <= x <= 4, got ({u_max},{v_max},{x_size})"
        )));
    }
    let mut out = Vec::new();
    for u in 1..=u_max {
        for v in 1..=v_max {
            out.extend(enumerate_shape(u, v, x_size)?);
        }
    }
    Ok(out)
}

fn enumerate_shape(u: usize, v: usize, x_size: usize) -> Result<Vec<MapF>> {
    let cells = u * v;
    let total = (x_size as u64)
        .checked_pow(cells as u32)
        .unwrap_or(u64::MAX);
    if total > 1 << 22 {
        return Err(Error::SizeCap(format!(
            "raw map space {x_size}^{cells} too large to enumerate"
        )));
    }
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut out = Vec::new();
    let mut buf = vec![0usize; cells];
    for code in 0..total {
        let mut c = code;
        for slot in buf.iter_mut() {
            *slot = (c % x_size as u64) as usize;
            c /= x_size as u64;
        }
        let map = MapF {
            u_size: u,
            v_size: v,
            x_size,
            cells: buf.clone(),
        };
        if !map.rows_pairwise_distinct() || !map.cols_pairwise_distinct() {
            continue;
        }
        let canon = map.canonical_cells();
        if seen.insert(canon.clone()) {
            out.push(MapF {
                u_size: u,
                v_size: v,
                x_size,
                cells: canon,
            });
        }
    }
    out.sort_by(|a, b| a.cells.cmp(&b.cells));
    Ok(out)
}

/// Deterministic sample of filtered maps for alphabets too large to
/// enumerate. Always includes the `U = X` and `V = X` degenerates.
pub fn sample_maps(x_size: usize, budget: usize, seed: u64) -> Vec<MapF> {
    use rand::Rng;
    let mut rng = numeric::rng_from(numeric::subseed(seed, 0xA11CE));
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut out = Vec::new();
    let push = |map: MapF, seen: &mut HashSet<Vec<usize>>, out: &mut Vec<MapF>| {
        let canon = map.canonicalized();
        let mut key = vec![canon.u_size, canon.v_size];
        key.extend(&canon.cells);
        if seen.insert(key) {
            out.push(canon);
        }
    };
    push(MapF::u_equals_x(x_size), &mut seen, &mut out);
    push(MapF::v_equals_x(x_size), &mut seen, &mut out);
    let mut attempts = 0usize;
    while out.len() < budget && attempts < 60 * budget {
        attempts += 1;
        let u = rng.gen_range(2..=x_size);
        let v = rng.gen_range(2..=x_size);
        let cells: Vec<usize> = (0..u * v).map(|_| rng.gen_range(0..x_size)).collect();
        let map = MapF {
            u_size: u,
            v_size: v,
            x_size,
            cells,
        };
        if map.rows_pairwise_distinct() && map.cols_pairwise_distinct() {
            push(map, &mut seen, &mut out);
        }
    }
    out
}

struct FiberStructure {
    fibers: Vec<Vec<usize>>,
    masses: Vec<f64>,
    // fibers with freedom: mass above floor and at least two cells
    free: Vec<usize>,
}

impl FiberStructure {
    fn build(map: &MapF, p_x: &SimplexVector) -> Result<Self> {
        let fibers = map.fibers();
        let masses: Vec<f64> = p_x.probs().to_vec();
        for (x, fiber) in fibers.iter().enumerate() {
            if fiber.is_empty() && masses[x] > MARGINAL_TOL {
                return Err(Error::InfeasibleMap { symbol: x });
            }
        }
        let free = (0..fibers.len())
            .filter(|&x| masses[x] > FLOOR && fibers[x].len() >= 2)
            .collect();
        Ok(FiberStructure {
            fibers,
            masses,
            free,
        })
    }

    /// Deterministic start: uniform split within each fiber.
    fn start_uniform(&self, n_cells: usize) -> Vec<f64> {
        let mut p = vec![0.0; n_cells];
        for (x, fiber) in self.fibers.iter().enumerate() {
            if fiber.is_empty() {
                continue;
            }
            let share = self.masses[x] / fiber.len() as f64;
            for &c in fiber {
                p[c] = share;
            }
        }
        p
    }

    fn start_random<R: rand::Rng>(&self, n_cells: usize, rng: &mut R) -> Vec<f64> {
        let mut p = vec![0.0; n_cells];
        for (x, fiber) in self.fibers.iter().enumerate() {
            if fiber.is_empty() || self.masses[x] <= FLOOR {
                continue;
            }
            let w = numeric::dirichlet1(rng, fiber.len());
            for (&c, &wi) in fiber.iter().zip(&w) {
                p[c] = wi * self.masses[x];
            }
        }
        p
    }

    /// Clamp cells in free fibers at the floor and restore exact fiber mass.
    fn floor_and_repair(&self, p: &mut [f64]) {
        for &x in &self.free {
            let fiber = &self.fibers[x];
            let mut sum = 0.0;
            for &c in fiber {
                p[c] = p[c].max(FLOOR);
                sum += p[c];
            }
            let scale = self.masses[x] / sum;
            for &c in fiber {
                p[c] *= scale;
            }
        }
    }

    fn project(&self, p: &mut [f64]) {
        for &x in &self.free {
            let fiber = &self.fibers[x];
            let mut vals: Vec<f64> = fiber.iter().map(|&c| p[c]).collect();
            numeric::project_simplex_scaled(&mut vals, self.masses[x]);
            for (&c, &v) in fiber.iter().zip(&vals) {
                p[c] = v;
            }
        }
    }
}

fn ascend(
    eval: &Evaluator,
    fs: &FiberStructure,
    mut p: Vec<f64>,
    iterations: usize,
) -> (f64, Vec<f64>) {
    fs.floor_and_repair(&mut p);
    if fs.free.is_empty() {
        let v = eval.j_bits(&p);
        return (v, p);
    }
    let n = p.len();
    let mut g = vec![0.0; n];
    let mut fval = eval.j_bits(&p);
    let mut step = 0.5;
    let mut stalls = 0usize;
    for _ in 0..iterations {
        eval.grad_bits(&p, &mut g);
        // feasible direction: remove the per-fiber mean, pin fixed cells
        let mut d = vec![0.0; n];
        let mut dnorm: f64 = 0.0;
        for &x in &fs.free {
            let fiber = &fs.fibers[x];
            let mean: f64 = fiber.iter().map(|&c| g[c]).sum::<f64>() / fiber.len() as f64;
            for &c in fiber {
                d[c] = g[c] - mean;
                dnorm = dnorm.max(d[c].abs());
            }
        }
        if dnorm < 1e-13 {
            break;
        }
        let mut t = step;
        let mut accepted = false;
        for _ in 0..24 {
            let mut cand = p.clone();
            for i in 0..n {
                cand[i] += t * d[i];
            }
            fs.project(&mut cand);
            fs.floor_and_repair(&mut cand);
            let v = eval.j_bits(&cand);
            if v > fval + 1e-15 {
                p = cand;
                fval = v;
                step = (t * 1.8).min(4.0);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if accepted {
            stalls = 0;
        } else {
            stalls += 1;
            step = (step * 0.25).max(1e-10);
            if stalls > 6 {
                break;
            }
        }
    }
    (fval, p)
}

/// Multi-start projected gradient ascent on `{p_uv >= 0, fiber sums = p(x)}`.
/// Deterministic given `(f, inputs, restarts, seed)`.
pub fn inner_ascent(
    f: &MapF,
    ch: &BroadcastChannel,
    p_x: &SimplexVector,
    alpha: f64,
    restarts: usize,
    seed: u64,
) -> Result<(f64, JointTable)> {
    inner_ascent_opts(f, ch, p_x, alpha, restarts, 200, seed)
}

pub(crate) fn inner_ascent_opts(
    f: &MapF,
    ch: &BroadcastChannel,
    p_x: &SimplexVector,
    alpha: f64,
    restarts: usize,
    iterations: usize,
    seed: u64,
) -> Result<(f64, JointTable)> {
    if ch.x_size() != f.x_size() || p_x.dim() != f.x_size() {
        return Err(Error::DimensionMismatch {
            expected: f.x_size(),
            got: ch.x_size(),
        });
    }
    let fs = FiberStructure::build(f, p_x)?;
    let eval = Evaluator::new(f, ch, alpha);
    let n = f.u_size() * f.v_size();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for r in 0..restarts.max(1) {
        let start = if r == 0 {
            fs.start_uniform(n)
        } else {
            let mut rng = numeric::rng_from(numeric::subseed(seed, r as u64));
            fs.start_random(n, &mut rng)
        };
        let (v, p) = ascend(&eval, &fs, start, iterations);
        if best.as_ref().map_or(true, |(bv, _)| v > *bv) {
            best = Some((v, p));
        }
        if fs.free.is_empty() {
            break;
        }
    }
    let (v, p) = best.unwrap();
    Ok((v, JointTable::new(vec![f.u_size(), f.v_size()], p)?))
}

/// Single ascent run from a caller-supplied feasible starting coupling.
pub fn inner_ascent_from(
    f: &MapF,
    ch: &BroadcastChannel,
    p_x: &SimplexVector,
    alpha: f64,
    start: &JointTable,
    iterations: usize,
) -> Result<(f64, JointTable)> {
    let c = CouplingWithMap::new(start.clone(), f.clone())?;
    validate_instance(&c, ch, p_x)?;
    let fs = FiberStructure::build(f, p_x)?;
    let eval = Evaluator::new(f, ch, alpha);
    let (v, p) = ascend(&eval, &fs, start.entries().to_vec(), iterations);
    Ok((v, JointTable::new(vec![f.u_size(), f.v_size()], p)?))
}

/// Options steering the `T_alpha` search.
#[derive(Clone, Debug, Serialize)]
pub struct TmaxOptions {
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Number of sampled maps when the alphabet is too large to enumerate.
    pub map_budget: usize,
    /// Hill-climb on single-cell map mutations around the incumbent.
    pub local_map_moves: bool,
}

impl Default for TmaxOptions {
    fn default() -> Self {
        TmaxOptions {
            restarts: 32,
            iterations: 200,
            seed: 0,
            map_budget: 192,
            local_map_moves: true,
        }
    }
}

/// Result of a `T_alpha` search.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TmaxResult {
    pub value: f64,
    pub witness: CouplingWithMap,
    pub alpha: f64,
    pub per_map_values: Vec<(String, f64)>,
    /// True unless the binary `alpha = 1` equality certifies exactness.
    pub is_lower_bound: bool,
}

/// Evaluate `T_alpha(X)` at `p_x` by searching all admissible reduced maps.
///
/// `alpha < 1` is accepted but lies outside the weighted functional's
/// intended regime; results there are still honest search lower bounds.
pub fn tmax_eval(
    ch: &BroadcastChannel,
    p_x: &SimplexVector,
    alpha: f64,
    opts: &TmaxOptions,
) -> Result<TmaxResult> {
    let x = ch.x_size();
    if x > 4 {
        return Err(Error::SizeCap(format!("input alphabet {x} exceeds cap 4")));
    }
    if p_x.dim() != x {
        return Err(Error::DimensionMismatch {
            expected: x,
            got: p_x.dim(),
        });
    }
    let maps = match enumerate_maps(x, x, x) {
        Ok(ms) => ms,
        Err(Error::SizeCap(_)) => sample_maps(x, opts.map_budget, opts.seed),
        Err(e) => return Err(e),
    };
    search_with_maps(ch, p_x, alpha, &maps, &[], opts)
}

/// Search over a caller-supplied map set (plus optional warm starts), used
/// both by [`tmax_eval`] and by the two-letter searches.
pub fn search_with_maps(
    ch: &BroadcastChannel,
    p_x: &SimplexVector,
    alpha: f64,
    maps: &[MapF],
    warm_starts: &[(MapF, JointTable)],
    opts: &TmaxOptions,
) -> Result<TmaxResult> {
    let x = ch.x_size();
    // the pattern exclusion is proven only for the unweighted functional;
    // the counterexample search at alpha > 1 must keep these maps
    let and_filtered =
        |m: &MapF| alpha == 1.0 && m.u_size() * m.v_size() > 1 && !m.and_patterns().is_empty();
    let admissible: Vec<&MapF> = maps
        .iter()
        .filter(|m| !and_filtered(m) && m.admissible_for(p_x))
        .collect();
    if admissible.is_empty() {
        return Err(Error::InfeasibleMap { symbol: 0 });
    }
    let mut results: Vec<(String, f64, MapF, JointTable)> = admissible
        .par_iter()
        .enumerate()
        .map(|(i, m)| {
            let (v, p) = inner_ascent_opts(
                m,
                ch,
                p_x,
                alpha,
                opts.restarts,
                opts.iterations,
                numeric::subseed(opts.seed, i as u64),
            )?;
            Ok((m.id(), v, (*m).clone(), p))
        })
        .collect::<Result<Vec<_>>>()?;

    for (i, (map, start)) in warm_starts.iter().enumerate() {
        if and_filtered(map) || !map.admissible_for(p_x) {
            continue;
        }
        let (v, p) = inner_ascent_from(map, ch, p_x, alpha, start, opts.iterations)?;
        results.push((format!("warm{}:{}", i, map.id()), v, map.clone(), p));
    }

    if opts.local_map_moves {
        local_map_moves(ch, p_x, alpha, opts, &mut results)?;
    }

    let mut best_idx = 0usize;
    for i in 1..results.len() {
        let better = results[i].1 > results[best_idx].1
            || (results[i].1 == results[best_idx].1 && results[i].0 < results[best_idx].0);
        if better {
            best_idx = i;
        }
    }
    let (_, value, map, p_uv) = results[best_idx].clone();
    let mut per_map_values: Vec<(String, f64)> =
        results.into_iter().map(|(id, v, _, _)| (id, v)).collect();
    per_map_values.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(TmaxResult {
        value,
        witness: CouplingWithMap::new(p_uv, map)?,
        alpha,
        is_lower_bound: !(x == 2 && alpha == 1.0),
        per_map_values,
    })
}

/// Hill-climb over single-cell mutations of the incumbent map.
fn local_map_moves(
    ch: &BroadcastChannel,
    p_x: &SimplexVector,
    alpha: f64,
    opts: &TmaxOptions,
    results: &mut Vec<(String, f64, MapF, JointTable)>,
) -> Result<()> {
    let x = ch.x_size();
    let mut seen: HashSet<String> = results.iter().map(|r| r.2.id()).collect();
    for _round in 0..2 {
        let Some(best) = results
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .cloned()
        else {
            break;
        };
        let mut improved = false;
        let base = &best.2;
        let mut candidates = Vec::new();
        for cell in 0..base.cells().len() {
            for sym in 0..x {
                if sym == base.cells()[cell] {
                    continue;
                }
                let mut cells = base.cells().to_vec();
                cells[cell] = sym;
                let m = MapF::new(base.u_size(), base.v_size(), x, cells).unwrap();
                if !m.rows_pairwise_distinct() || !m.cols_pairwise_distinct() {
                    continue;
                }
                if alpha == 1.0 && !m.and_patterns().is_empty() {
                    continue;
                }
                if !m.admissible_for(p_x) || !seen.insert(m.id()) {
                    continue;
                }
                candidates.push(m);
            }
        }
        let restarts = (opts.restarts / 4).max(2);
        let outcomes: Vec<(String, f64, MapF, JointTable)> = candidates
            .par_iter()
            .enumerate()
            .map(|(i, m)| {
                let (v, p) = inner_ascent_opts(
                    m,
                    ch,
                    p_x,
                    alpha,
                    restarts,
                    opts.iterations,
                    numeric::subseed(opts.seed, 0xBEEF + i as u64),
                )?;
                Ok((m.id(), v, m.clone(), p))
            })
            .collect::<Result<Vec<_>>>()?;
        for o in outcomes {
            if o.1 > best.1 + 1e-12 {
                improved = true;
            }
            results.push(o);
        }
        if !improved {
            break;
        }
    }
    Ok(())
}

/// Exhaustive grid search over the constrained coupling polytope, per
/// admissible map with `u_size * v_size <= 4`. A lower bound converging to
/// `T_alpha` as the resolution shrinks; independent of the ascent path.
pub fn brute_oracle(
    ch: &BroadcastChannel,
    p_x: &SimplexVector,
    alpha: f64,
    resolution: f64,
) -> Result<f64> {
    if !(resolution > 0.0 && resolution <= 1.0 / 100.0 + 1e-15) {
        return Err(Error::SizeCap(format!(
            "grid resolution {resolution} must lie in (0, 1/100]"
        )));
    }
    let denom = (1.0 / resolution).round() as usize;
    let x = ch.x_size();
    if x > 4 {
        return Err(Error::SizeCap(format!("input alphabet {x} exceeds cap 4")));
    }
    let all = enumerate_maps(x, x, x)?;
    let maps: Vec<&MapF> = all
        .iter()
        .filter(|m| m.u_size() * m.v_size() <= 4 && m.admissible_for(p_x))
        .collect();
    let mut best = f64::NEG_INFINITY;
    for m in maps {
        let eval = Evaluator::new(m, ch, alpha);
        let fibers = m.fibers();
        let masses = p_x.probs();
        let n = m.u_size() * m.v_size();
        // per-fiber composition lists
        let mut fiber_choices: Vec<Vec<Vec<f64>>> = Vec::new();
        let mut fiber_cells: Vec<&Vec<usize>> = Vec::new();
        for (xsym, fiber) in fibers.iter().enumerate() {
            if fiber.is_empty() {
                continue;
            }
            let mass = masses[xsym];
            if mass <= FLOOR {
                fiber_choices.push(vec![vec![0.0; fiber.len()]]);
            } else if fiber.len() == 1 {
                fiber_choices.push(vec![vec![mass]]);
            } else {
                let comps = compositions(denom, fiber.len());
                fiber_choices.push(
                    comps
                        .into_iter()
                        .map(|c| c.iter().map(|&k| k as f64 * mass / denom as f64).collect())
                        .collect(),
                );
            }
            fiber_cells.push(fiber);
        }
        let mut p = vec![0.0; n];
        let mut stack = vec![0usize; fiber_choices.len()];
        'outer: loop {
            for (fi, &ci) in stack.iter().enumerate() {
                for (slot, &cell) in fiber_cells[fi].iter().enumerate() {
                    p[cell] = fiber_choices[fi][ci][slot];
                }
            }
            let v = eval.j_bits(&p);
            if v > best {
                best = v;
            }
            // odometer increment
            let mut d = 0usize;
            loop {
                if d == stack.len() {
                    break 'outer;
                }
                stack[d] += 1;
                if stack[d] < fiber_choices[d].len() {
                    break;
                }
                stack[d] = 0;
                d += 1;
            }
        }
    }
    Ok(best)
}

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(total: usize, idx: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if idx + 1 == cur.len() {
            cur[idx] = total;
            out.push(cur.clone());
            return;
        }
        for k in 0..=total {
            cur[idx] = k;
            rec(total - k, idx + 1, cur, out);
        }
    }
    let mut out = Vec::new();
    let mut cur = vec![0usize; parts];
    rec(total, 0, &mut cur, &mut out);
    out
}
