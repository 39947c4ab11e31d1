//! Upper concave envelopes over the probability simplex and the sum-rate /
//! weighted-rate formulas built from them.
//!
//! Envelopes are computed grid-then-polish: evaluate the functional on a
//! dense grid, take the upper hull (binary) or solve a small LP over the
//! grid atoms (ternary), then refine atom locations by local continuous
//! search. Values are certified only up to the grid resolution; `min` kinks
//! are handled by evaluating both branches at every grid point.

use rayon::prelude::*;
use serde::Serialize;

use crate::numeric::{self, GridHull};
use crate::probcore::{entropy_slice, BroadcastChannel, JointTable, SimplexVector};
use crate::{Error, Result};

/// Grid and polish controls for envelope evaluation.
#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeOpts {
    /// Grid points on the binary simplex.
    pub grid_points: usize,
    /// Lattice denominator on the 2-simplex.
    pub simplex_step: usize,
    pub polish: bool,
}

impl Default for EnvelopeOpts {
    fn default() -> Self {
        EnvelopeOpts {
            grid_points: 2001,
            simplex_step: 150,
            polish: true,
        }
    }
}

/// Envelope value at a query point with its supporting mixture.
#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeResult {
    pub value: f64,
    /// `(weight, atom)` pairs; at most `x_size` of them, mixing to the query.
    pub atoms: Vec<(f64, SimplexVector)>,
    /// The raw functional at the query point.
    pub base_value: f64,
}

fn binary_point(t: f64) -> SimplexVector {
    SimplexVector::new(vec![t.clamp(0.0, 1.0), (1.0 - t).clamp(0.0, 1.0)])
        .expect("binary point is a distribution")
}

/// Upper concave envelope of `g` evaluated at `p`.
///
/// Supported for `x_size` 2 (1-D grid + hull) and 3 (lattice + LP).
pub fn concave_envelope_eval<G>(
    g: &G,
    p: &SimplexVector,
    opts: &EnvelopeOpts,
) -> Result<EnvelopeResult>
where
    G: Fn(&SimplexVector) -> f64 + Sync,
{
    match p.dim() {
        2 => envelope_binary(g, p, opts),
        3 => envelope_ternary(g, p, opts),
        d => Err(Error::SizeCap(format!(
            "envelope supported for alphabet sizes 2 and 3, got {d}"
        ))),
    }
}

fn envelope_binary<G>(g: &G, p: &SimplexVector, opts: &EnvelopeOpts) -> Result<EnvelopeResult>
where
    G: Fn(&SimplexVector) -> f64 + Sync,
{
    let n = opts.grid_points.max(3);
    let ts: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let vals: Vec<f64> = ts.par_iter().map(|&t| g(&binary_point(t))).collect();
    let hull = GridHull::build(&ts, &vals, true);
    let t_star = p.probs()[0];
    let base_value = g(p);
    let (mut value, (mut tl, _), (mut tr, _)) = hull.eval(t_star);

    if opts.polish && tr > tl {
        let h = 2.0 / (n - 1) as f64;
        let interp = |a: f64, b: f64| -> f64 {
            if b - a < 1e-12 {
                base_value
            } else {
                let lam = ((b - t_star) / (b - a)).clamp(0.0, 1.0);
                lam * g(&binary_point(a)) + (1.0 - lam) * g(&binary_point(b))
            }
        };
        for _ in 0..3 {
            let fixed_r = tr;
            let (best_l, _) = numeric::golden_max(
                &mut |a| interp(a, fixed_r),
                (tl - h).max(0.0),
                (tl + h).min(t_star),
                48,
            );
            tl = best_l;
            let fixed_l = tl;
            let (best_r, _) = numeric::golden_max(
                &mut |b| interp(fixed_l, b),
                (tr - h).max(t_star),
                (tr + h).min(1.0),
                48,
            );
            tr = best_r;
        }
        value = value.max(interp(tl, tr));
    }

    // the raw value always supports the envelope from below
    if base_value + 1e-12 >= value {
        return Ok(EnvelopeResult {
            value: base_value,
            atoms: vec![(1.0, p.clone())],
            base_value,
        });
    }
    let lam = ((tr - t_star) / (tr - tl)).clamp(0.0, 1.0);
    let mut atoms = Vec::new();
    if lam > 1e-12 {
        atoms.push((lam, binary_point(tl)));
    }
    if 1.0 - lam > 1e-12 {
        atoms.push((1.0 - lam, binary_point(tr)));
    }
    Ok(EnvelopeResult {
        value,
        atoms,
        base_value,
    })
}

fn ternary_lattice(step: usize) -> Vec<[f64; 3]> {
    let mut atoms = Vec::new();
    for i in 0..=step {
        for j in 0..=(step - i) {
            let k = step - i - j;
            atoms.push([
                i as f64 / step as f64,
                j as f64 / step as f64,
                k as f64 / step as f64,
            ]);
        }
    }
    atoms
}

/// Best mixture of the given candidate atoms hitting `p`, via the LP
/// `max sum lam_i vals_i  s.t.  sum lam_i q_i = p, lam on the simplex`.
fn mixture_lp(
    cands: &[[f64; 3]],
    vals: &[f64],
    p: &[f64],
    basis_hint: &[usize],
) -> Option<(f64, Vec<(f64, [f64; 3])>)> {
    let a: Vec<Vec<f64>> = vec![
        cands.iter().map(|q| q[0]).collect(),
        cands.iter().map(|q| q[1]).collect(),
        vec![1.0; cands.len()],
    ];
    let b = vec![p[0], p[1], 1.0];
    let (obj, basis, xb) = numeric::lp_max(&a, &b, vals, basis_hint)?;
    let mut atoms = Vec::new();
    for (bi, &ci) in basis.iter().enumerate() {
        if xb[bi] > 1e-12 {
            atoms.push((xb[bi], cands[ci]));
        }
    }
    Some((obj, atoms))
}

fn envelope_ternary<G>(g: &G, p: &SimplexVector, opts: &EnvelopeOpts) -> Result<EnvelopeResult>
where
    G: Fn(&SimplexVector) -> f64 + Sync,
{
    let step = opts.simplex_step.max(2);
    let cands = ternary_lattice(step);
    let vals: Vec<f64> = cands
        .par_iter()
        .map(|q| g(&SimplexVector::new(q.to_vec()).unwrap()))
        .collect();
    // the three corners form a feasible starting basis
    let corner = |c: [f64; 3]| {
        cands
            .iter()
            .position(|q| q == &c)
            .expect("lattice contains the corners")
    };
    let basis = vec![
        corner([1.0, 0.0, 0.0]),
        corner([0.0, 1.0, 0.0]),
        corner([0.0, 0.0, 1.0]),
    ];
    let (mut value, mut atoms) = mixture_lp(&cands, &vals, p.probs(), &basis)
        .ok_or_else(|| Error::Inconsistent("envelope LP did not converge".into()))?;
    let base_value = g(p);

    if opts.polish {
        // exchange polish: offer each atom slightly moved copies and re-solve
        let mut h = 1.0 / step as f64;
        for _ in 0..4 {
            let mut pool: Vec<[f64; 3]> = atoms.iter().map(|a| a.1).collect();
            for (_, q) in atoms.iter() {
                for (i, j) in [(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)] {
                    let mut m = *q;
                    m[i] += h;
                    m[j] -= h;
                    if m.iter().all(|&x| (-1e-15..=1.0 + 1e-15).contains(&x)) {
                        for x in m.iter_mut() {
                            *x = x.clamp(0.0, 1.0);
                        }
                        pool.push(m);
                    }
                }
            }
            let pool_vals: Vec<f64> = pool
                .iter()
                .map(|q| g(&SimplexVector::new(q.to_vec()).unwrap()))
                .collect();
            // feasible basis: current atoms padded with corners
            let mut pool_all = pool.clone();
            let mut vals_all = pool_vals.clone();
            for c in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
                pool_all.push(c);
                // corners re-enter at their true value
                vals_all.push(g(&SimplexVector::new(c.to_vec()).unwrap()));
            }
            let basis_hint = vec![pool_all.len() - 3, pool_all.len() - 2, pool_all.len() - 1];
            if let Some((v2, a2)) = mixture_lp(&pool_all, &vals_all, p.probs(), &basis_hint) {
                if v2 > value + 1e-13 {
                    value = v2;
                    atoms = a2;
                } else {
                    h *= 0.25;
                }
            } else {
                break;
            }
        }
    }

    if base_value + 1e-12 >= value {
        return Ok(EnvelopeResult {
            value: base_value,
            atoms: vec![(1.0, p.clone())],
            base_value,
        });
    }
    let atoms = atoms
        .into_iter()
        .map(|(w, q)| (w, SimplexVector::new(q.to_vec()).unwrap()))
        .collect();
    Ok(EnvelopeResult {
        value,
        atoms,
        base_value,
    })
}

/// `(t, g, envelope)` rows over the binary simplex, for CSV emission.
pub fn binary_grid_trace<G>(g: &G, grid_points: usize) -> Vec<(f64, f64, f64)>
where
    G: Fn(&SimplexVector) -> f64 + Sync,
{
    let n = grid_points.max(3);
    let ts: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let vals: Vec<f64> = ts.par_iter().map(|&t| g(&binary_point(t))).collect();
    let hull = GridHull::build(&ts, &vals, true);
    ts.iter()
        .zip(&vals)
        .map(|(&t, &v)| (t, v, hull.eval(t).0))
        .collect()
}

/// Result of a rate-formula maximization over binary `p(w,x)`.
#[derive(Clone, Debug, Serialize)]
pub struct WeightedRateResult {
    /// Maximum of the weighted formula with the Y receiver carrying weight.
    pub value: f64,
    /// The same formula with the roles of Y and Z interchanged.
    pub swapped_value: f64,
    /// Witness `p(w,x)` for `value`, axes `(W, X)`.
    pub witness_pwx: JointTable,
}

const RATE_GRID_DEFAULT: usize = 100;

struct RateObjective<'a> {
    ch: &'a BroadcastChannel,
    alpha: f64,
}

impl<'a> RateObjective<'a> {
    /// Formula value at `(w, a, b)` = `(P(W=0), P(X=0|W=0), P(X=0|W=1))`.
    fn eval(&self, w: f64, a: f64, b: f64) -> f64 {
        let qy = self.ch.y_chan();
        let qz = self.ch.z_chan();
        let ny = qy.cols();
        let nz = qz.cols();
        let mut py0 = vec![0.0; ny];
        let mut py1 = vec![0.0; ny];
        let mut pz0 = vec![0.0; nz];
        let mut pz1 = vec![0.0; nz];
        for y in 0..ny {
            py0[y] = a * qy.get(0, y) + (1.0 - a) * qy.get(1, y);
            py1[y] = b * qy.get(0, y) + (1.0 - b) * qy.get(1, y);
        }
        for z in 0..nz {
            pz0[z] = a * qz.get(0, z) + (1.0 - a) * qz.get(1, z);
            pz1[z] = b * qz.get(0, z) + (1.0 - b) * qz.get(1, z);
        }
        let mix = |p0: &[f64], p1: &[f64]| -> Vec<f64> {
            p0.iter()
                .zip(p1)
                .map(|(x0, x1)| w * x0 + (1.0 - w) * x1)
                .collect()
        };
        let py = mix(&py0, &py1);
        let pz = mix(&pz0, &pz1);
        // I(W;.) = H(out) - sum_w p(w) H(out|w)
        let iwy = entropy_slice(&py) - w * entropy_slice(&py0) - (1.0 - w) * entropy_slice(&py1);
        let iwz = entropy_slice(&pz) - w * entropy_slice(&pz0) - (1.0 - w) * entropy_slice(&pz1);
        // I(X;Y|W=0): input law (a, 1-a) through the Y leg
        let hy_x = |t: f64, row0: &[f64], row1: &[f64], mixed: &[f64]| {
            entropy_slice(mixed) - t * entropy_slice(row0) - (1.0 - t) * entropy_slice(row1)
        };
        let ixy_w0 = hy_x(a, qy.row(0), qy.row(1), &py0);
        let ixz_w1 = hy_x(b, qz.row(0), qz.row(1), &pz1);
        iwy.min(iwz)
            + (self.alpha - 1.0) * iwy
            + self.alpha * w * ixy_w0.max(0.0)
            + (1.0 - w) * ixz_w1.max(0.0)
    }
}

fn maximize_rate_formula(ch: &BroadcastChannel, alpha: f64, grid: usize) -> (f64, (f64, f64, f64)) {
    let obj = RateObjective { ch, alpha };
    let n = grid.max(10);
    // best point per w-slice, then polish from the strongest slices: the
    // min-kink surface traps single-start axis searches
    let mut slice_bests: Vec<(f64, (f64, f64, f64))> = (0..=n)
        .into_par_iter()
        .map(|wi| {
            let w = wi as f64 / n as f64;
            let mut local = (f64::NEG_INFINITY, (w, 0.0, 0.0));
            for ai in 0..=n {
                let a = ai as f64 / n as f64;
                for bi in 0..=n {
                    let b = bi as f64 / n as f64;
                    let v = obj.eval(w, a, b);
                    if v > local.0 {
                        local = (v, (w, a, b));
                    }
                }
            }
            local
        })
        .collect();
    slice_bests.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    let mut overall = slice_bests[0];
    for start in slice_bests.into_iter().take(4) {
        let polished = polish_rate_point(&obj, start, 1.0 / n as f64);
        if polished.0 > overall.0 {
            overall = polished;
        }
    }
    overall
}

fn polish_rate_point(
    obj: &RateObjective,
    start: (f64, (f64, f64, f64)),
    h0: f64,
) -> (f64, (f64, f64, f64)) {
    let (mut val, (mut w, mut a, mut b)) = start;
    let mut h = h0;
    let deltas = [-1.0, 0.0, 1.0];
    while h > 1e-9 {
        let mut improved = false;
        for &dw in &deltas {
            for &da in &deltas {
                for &db in &deltas {
                    if dw == 0.0 && da == 0.0 && db == 0.0 {
                        continue;
                    }
                    let cand = (
                        (w + dw * h).clamp(0.0, 1.0),
                        (a + da * h).clamp(0.0, 1.0),
                        (b + db * h).clamp(0.0, 1.0),
                    );
                    let v = obj.eval(cand.0, cand.1, cand.2);
                    if v > val + 1e-15 {
                        val = v;
                        (w, a, b) = cand;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (val, (w, a, b))
}

fn rate_result(ch: &BroadcastChannel, alpha: f64, grid: usize) -> Result<WeightedRateResult> {
    if ch.x_size() != 2 {
        return Err(Error::SizeCap(format!(
            "rate formulas require a binary input alphabet, got {}",
            ch.x_size()
        )));
    }
    let (value, (w, a, b)) = maximize_rate_formula(ch, alpha, grid);
    let swapped = ch.swapped();
    let (swapped_value, _) = maximize_rate_formula(&swapped, alpha, grid);
    let witness_pwx = JointTable::from_matrix(&[
        vec![w * a, w * (1.0 - a)],
        vec![(1.0 - w) * b, (1.0 - w) * (1.0 - b)],
    ])?;
    Ok(WeightedRateResult {
        value,
        swapped_value,
        witness_pwx,
    })
}

/// Maximum sum rate of the inner bound for a binary-input channel:
/// `max_{p(w,x)} min{I(W;Y), I(W;Z)} + P(W=0) I(X;Y|W=0) + P(W=1) I(X;Z|W=1)`
/// with binary `W`, by dense grid plus local polish.
pub fn marton_sum_rate_binary(ch: &BroadcastChannel) -> Result<WeightedRateResult> {
    weighted_rate_support_grid(ch, 1.0, RATE_GRID_DEFAULT)
}

/// Support function `max alpha R1 + R2` over the inner bound of a binary
/// input channel, assuming the weighted one-letter inequality holds for it:
/// adds `(alpha-1) I(W;Y)` and the weight `alpha` on the `W=0` branch.
/// The `Y <-> Z` swapped variant is evaluated alongside.
pub fn weighted_rate_support(ch: &BroadcastChannel, alpha: f64) -> Result<WeightedRateResult> {
    weighted_rate_support_grid(ch, alpha, RATE_GRID_DEFAULT)
}

pub fn weighted_rate_support_grid(
    ch: &BroadcastChannel,
    alpha: f64,
    grid: usize,
) -> Result<WeightedRateResult> {
    if alpha < 1.0 {
        return Err(Error::Domain(format!("weight alpha {alpha} must be >= 1")));
    }
    rate_result(ch, alpha, grid)
}

/// Envelope of the composite functional
/// `q -> -(alpha - (1-lambda)) H(Y) - (1-lambda) H(Z) + T_alpha(q)`
/// at `p_x`, with `T_alpha` supplied by the caller. The returned flag is
/// true when `tmax_fn` only lower-bounds the true functional.
pub fn factor_rhs<F>(
    ch: &BroadcastChannel,
    p_x: &SimplexVector,
    lambda: f64,
    alpha: f64,
    tmax_fn: &F,
    opts: &EnvelopeOpts,
) -> Result<(EnvelopeResult, bool)>
where
    F: Fn(&SimplexVector) -> (f64, bool) + Sync,
{
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!("lambda {lambda} outside [0,1]")));
    }
    if alpha < 1.0 {
        return Err(Error::Domain(format!("alpha {alpha} must be >= 1")));
    }
    let lambda_bar = 1.0 - lambda;
    let g = |q: &SimplexVector| -> f64 {
        let hy = entropy_slice(
            crate::probcore::push_forward(q, ch.y_chan())
                .expect("dimensions fixed")
                .probs(),
        );
        let hz = entropy_slice(
            crate::probcore::push_forward(q, ch.z_chan())
                .expect("dimensions fixed")
                .probs(),
        );
        -(alpha - lambda_bar) * hy - lambda_bar * hz + tmax_fn(q).0
    };
    let env = concave_envelope_eval(&g, p_x, opts)?;
    let lower = tmax_fn(p_x).1;
    Ok((env, lower))
}
