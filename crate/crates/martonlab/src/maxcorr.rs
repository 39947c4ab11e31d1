//! Maximal-correlation machinery: the squared maximal correlation of a
//! joint law computed by two independent routes, the envelope-match
//! coefficient for binary inputs, and the XOR-case bounds with the
//! convexity inequality that proves them.

use rand::Rng;
use serde::Serialize;

use crate::numeric::{self, GridHull};
use crate::probcore::{
    entropy_slice, mutual_information, BroadcastChannel, JointTable, SimplexVector,
    StochasticMatrix,
};
use crate::{Error, Result};

const POWER_SWEEPS: usize = 10_000;
const POWER_TOL: f64 = 1e-12;

/// Squared maximal correlation together with optimal witnesses, zero-mean
/// and unit-variance under the respective marginals.
#[derive(Clone, Debug, Serialize)]
pub struct CorrelationResult {
    pub c_prime: f64,
    pub witness_l: Vec<f64>,
    pub witness_t: Vec<f64>,
}

fn marginals_2(joint: &JointTable) -> Result<(Vec<f64>, Vec<f64>)> {
    if joint.rank() != 2 {
        return Err(Error::BadAxes);
    }
    let pu = joint.marginal(&[0])?.entries().to_vec();
    let px = joint.marginal(&[1])?.entries().to_vec();
    if pu.iter().any(|&p| p <= 1e-12) || px.iter().any(|&p| p <= 1e-12) {
        return Err(Error::Degenerate(
            "maximal correlation needs strictly positive marginals".into(),
        ));
    }
    if pu.len() < 2 || px.len() < 2 {
        return Err(Error::Degenerate(
            "maximal correlation needs at least two symbols per side".into(),
        ));
    }
    Ok((pu, px))
}

/// Second singular value of `B[u][x] = p(u,x)/sqrt(p(u) p(x))` via power
/// iteration after deflating the top (all-ones direction) singular pair.
pub fn maximal_correlation_svd(joint: &JointTable) -> Result<f64> {
    let (pu, px) = marginals_2(joint)?;
    let (nu, nx) = (pu.len(), px.len());
    let mut b = vec![0.0; nu * nx];
    for u in 0..nu {
        for x in 0..nx {
            b[u * nx + x] = joint.get(&[u, x]) / (pu[u] * px[x]).sqrt() - (pu[u] * px[x]).sqrt();
        }
    }
    // power iteration on B^T B with a fixed deterministic start
    let mut rng = numeric::rng_from(0x5EED);
    let mut v: Vec<f64> = (0..nx).map(|_| rng.gen::<f64>() - 0.5).collect();
    let norm = |w: &[f64]| w.iter().map(|x| x * x).sum::<f64>().sqrt();
    let n0 = norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    let mut sigma2 = 0.0;
    for _ in 0..POWER_SWEEPS {
        // w = B v ; v' = B^T w
        let mut w = vec![0.0; nu];
        for u in 0..nu {
            w[u] = (0..nx).map(|x| b[u * nx + x] * v[x]).sum();
        }
        let mut v2 = vec![0.0; nx];
        for x in 0..nx {
            v2[x] = (0..nu).map(|u| b[u * nx + x] * w[u]).sum();
        }
        let lam = norm(&v2);
        if lam < 1e-30 {
            return Ok(0.0);
        }
        v2.iter_mut().for_each(|x| *x /= lam);
        let delta: f64 = v2
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = v2;
        sigma2 = lam;
        if delta < POWER_TOL {
            break;
        }
    }
    Ok(sigma2.max(0.0))
}

/// Alternating conditional-expectation maximization over `L(X)`, `T(U)`
/// with renormalization each sweep; returns the squared correlation.
pub fn maximal_correlation_ace(joint: &JointTable) -> Result<f64> {
    let (pu, px) = marginals_2(joint)?;
    let (nu, nx) = (pu.len(), px.len());
    let mut rng = numeric::rng_from(0xACE5);
    let mut l: Vec<f64> = (0..nx).map(|_| rng.gen::<f64>() - 0.5).collect();
    normalize_under(&mut l, &px)?;
    let mut corr_prev = 0.0;
    for _ in 0..POWER_SWEEPS {
        // T(u) = E[L | U=u], then standardize
        let mut t: Vec<f64> = (0..nu)
            .map(|u| (0..nx).map(|x| joint.get(&[u, x]) * l[x]).sum::<f64>() / pu[u])
            .collect();
        if normalize_under(&mut t, &pu).is_err() {
            return Ok(0.0);
        }
        let mut l2: Vec<f64> = (0..nx)
            .map(|x| (0..nu).map(|u| joint.get(&[u, x]) * t[u]).sum::<f64>() / px[x])
            .collect();
        if normalize_under(&mut l2, &px).is_err() {
            return Ok(0.0);
        }
        l = l2;
        let corr: f64 = (0..nu)
            .map(|u| {
                (0..nx)
                    .map(|x| joint.get(&[u, x]) * t[u] * l[x])
                    .sum::<f64>()
            })
            .sum();
        if (corr - corr_prev).abs() < POWER_TOL {
            corr_prev = corr;
            break;
        }
        corr_prev = corr;
    }
    Ok((corr_prev * corr_prev).min(1.0))
}

fn normalize_under(w: &mut [f64], marginal: &[f64]) -> Result<()> {
    let mean: f64 = w.iter().zip(marginal).map(|(x, p)| x * p).sum();
    w.iter_mut().for_each(|x| *x -= mean);
    let var: f64 = w.iter().zip(marginal).map(|(x, p)| x * x * p).sum();
    if var < 1e-26 {
        return Err(Error::Degenerate("zero-variance witness".into()));
    }
    let s = var.sqrt();
    w.iter_mut().for_each(|x| *x /= s);
    Ok(())
}

/// Squared maximal correlation of a 2-axis joint, computed by alternating
/// maximization and by the deflated singular route, cross-checked to 1e-9.
pub fn maximal_correlation_sq(joint: &JointTable) -> Result<CorrelationResult> {
    let (pu, px) = marginals_2(joint)?;
    let (nu, nx) = (pu.len(), px.len());
    let via_svd = maximal_correlation_svd(joint)?;
    let via_ace = maximal_correlation_ace(joint)?;
    if (via_svd - via_ace).abs() > 1e-9 {
        return Err(Error::Inconsistent(format!(
            "maximal-correlation routes disagree: {via_svd} vs {via_ace}"
        )));
    }
    let c_prime = via_svd.clamp(0.0, 1.0);

    // recover witnesses by one more deflated power pass
    let mut b = vec![0.0; nu * nx];
    for u in 0..nu {
        for x in 0..nx {
            b[u * nx + x] = joint.get(&[u, x]) / (pu[u] * px[x]).sqrt() - (pu[u] * px[x]).sqrt();
        }
    }
    let mut rng = numeric::rng_from(0x5EED);
    let mut v: Vec<f64> = (0..nx).map(|_| rng.gen::<f64>() - 0.5).collect();
    let norm = |w: &[f64]| w.iter().map(|x| x * x).sum::<f64>().sqrt();
    let n0 = norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    let mut w = vec![0.0; nu];
    for _ in 0..POWER_SWEEPS {
        for u in 0..nu {
            w[u] = (0..nx).map(|x| b[u * nx + x] * v[x]).sum();
        }
        let mut v2 = vec![0.0; nx];
        for x in 0..nx {
            v2[x] = (0..nu).map(|u| b[u * nx + x] * w[u]).sum();
        }
        let lam = norm(&v2);
        if lam < 1e-30 {
            break;
        }
        v2.iter_mut().for_each(|x| *x /= lam);
        let delta: f64 = v2
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = v2;
        if delta < POWER_TOL {
            break;
        }
    }
    let (witness_l, witness_t) = if c_prime > 1e-12 {
        let sigma = norm(&{
            let mut bw = vec![0.0; nu];
            for u in 0..nu {
                bw[u] = (0..nx).map(|x| b[u * nx + x] * v[x]).sum();
            }
            bw
        });
        let mut l: Vec<f64> = (0..nx).map(|x| v[x] / px[x].sqrt()).collect();
        let mut t: Vec<f64> = (0..nu)
            .map(|u| (0..nx).map(|x| b[u * nx + x] * v[x]).sum::<f64>() / (sigma * pu[u].sqrt()))
            .collect();
        // exact standardization to absorb rounding
        normalize_under(&mut l, &px)?;
        normalize_under(&mut t, &pu)?;
        // orient so that the correlation is non-negative
        let corr: f64 = (0..nu)
            .map(|u| {
                (0..nx)
                    .map(|x| joint.get(&[u, x]) * t[u] * l[x])
                    .sum::<f64>()
            })
            .sum();
        if corr < 0.0 {
            t.iter_mut().for_each(|x| *x = -*x);
        }
        (l, t)
    } else {
        // independent-ish joint: any standardized pair witnesses zero
        let mut l = vec![0.0; nx];
        l[0] = 1.0;
        let mut t = vec![0.0; nu];
        t[0] = 1.0;
        normalize_under(&mut l, &px)?;
        normalize_under(&mut t, &pu)?;
        (l, t)
    };
    Ok(CorrelationResult {
        c_prime,
        witness_l,
        witness_t,
    })
}

/// Minimal `c` in `[0,1]` such that `q(x) -> H(U) - c H(X)` (with `p(u|x)`
/// fixed) matches its lower convex envelope at `p_x`, for binary `X`.
/// Bisection over `c` with a 1-D lower-hull membership test.
pub fn c_envelope_binary(p_u_given_x: &StochasticMatrix, p_x: &SimplexVector) -> Result<f64> {
    if p_u_given_x.rows() != 2 || p_x.dim() != 2 {
        return Err(Error::SizeCap(
            "envelope-match coefficient implemented for binary X".into(),
        ));
    }
    let matches = |c: f64, grid: usize| -> bool {
        let n = grid;
        let ts: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let phi = |t: f64| -> f64 {
            let nu = p_u_given_x.cols();
            let mut pu = vec![0.0; nu];
            for u in 0..nu {
                pu[u] = t * p_u_given_x.get(0, u) + (1.0 - t) * p_u_given_x.get(1, u);
            }
            entropy_slice(&pu) - c * entropy_slice(&[t, 1.0 - t])
        };
        let vals: Vec<f64> = ts.iter().map(|&t| phi(t)).collect();
        let hull = GridHull::build(&ts, &vals, false);
        let t_star = p_x.probs()[0];
        phi(t_star) - hull.eval(t_star).0 <= 1e-9
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    if matches(lo, 2001) {
        return Ok(0.0);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if matches(mid, 2001) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // refinement pass on a finer grid around the located threshold
    let mut lo2 = (hi - 1e-3).max(0.0);
    let mut hi2 = (hi + 1e-3).min(1.0);
    if matches(lo2, 8001) {
        // finer grid moved the threshold down: restart the lower bracket
        hi2 = lo2;
        lo2 = 0.0;
    } else if !matches(hi2, 8001) && hi2 < 1.0 {
        // finer grid moved it up
        lo2 = hi2;
        hi2 = 1.0;
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo2 + hi2);
        if matches(mid, 8001) {
            hi2 = mid;
        } else {
            lo2 = mid;
        }
    }
    Ok(hi2)
}

/// The XOR-case coefficients: with `a = p00/(p00+p11)` and
/// `b = p01/(p01+p10)`, the U-side bound is `|a-b|` and the V-side bound
/// is `|a+b-1|`; their sum never exceeds 1.
pub fn xor_bounds(p_uv: &JointTable) -> Result<(f64, f64)> {
    if p_uv.rank() != 2 || p_uv.axes() != [2, 2] {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: p_uv.entries().len(),
        });
    }
    let m = p_uv.matrix();
    let d0 = m[0][0] + m[1][1];
    let d1 = m[0][1] + m[1][0];
    if d0 <= 0.0 || d1 <= 0.0 {
        return Err(Error::Degenerate(
            "xor bounds need mass on both X symbols".into(),
        ));
    }
    let a = m[0][0] / d0;
    let b = m[0][1] / d1;
    Ok(((a - b).abs(), (a + b - 1.0).abs()))
}

/// Second derivative of `x -> h(a x + b (1-x)) - |a-b| h(x)` in nats:
/// `-(a-b)^2 / (m (1-m)) + |a-b| / (x (1-x))` with `m = a x + b (1-x)`.
/// Non-negative on the open interval, which is the convexity inequality
/// behind the XOR bounds.
pub fn convexity_second_derivative(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
        return Err(Error::Domain(
            "mixture coefficients must lie in [0,1]".into(),
        ));
    }
    if x <= 0.0 || x >= 1.0 {
        return Err(Error::Domain(format!(
            "x {x} must lie strictly inside (0,1)"
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    let m = a * x + b * (1.0 - x);
    Ok(-(a - b) * (a - b) / (m * (1.0 - m)) + (a - b).abs() / (x * (1.0 - x)))
}

/// Both sides of `I(U;Y) + I(V;Z) <= max{I(X;Y), I(X;Z)}` for `X = U xor V`,
/// plus the intermediate bound chain through the XOR coefficients.
#[derive(Clone, Debug, Serialize)]
pub struct XorMiReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// `bound_u * I(X;Y) + bound_v * I(X;Z)`.
    pub chain_mid: f64,
    pub bound_u: f64,
    pub bound_v: f64,
    pub i_uy: f64,
    pub i_vz: f64,
}

pub fn xor_mi_inequality_check(p_uv: &JointTable, ch: &BroadcastChannel) -> Result<XorMiReport> {
    if ch.x_size() != 2 {
        return Err(Error::SizeCap(
            "xor check needs a binary input channel".into(),
        ));
    }
    let (bound_u, bound_v) = xor_bounds(p_uv)?;
    let m = p_uv.matrix();
    // p(u,x) with x = u xor v, likewise p(v,x)
    let pux = JointTable::from_matrix(&[vec![m[0][0], m[0][1]], vec![m[1][1], m[1][0]]])?;
    let pvx = JointTable::from_matrix(&[vec![m[0][0], m[1][0]], vec![m[1][1], m[0][1]]])?;
    let push = |j: &JointTable, leg: &StochasticMatrix| -> Result<JointTable> {
        let n = j.axes()[0];
        let mut entries = vec![0.0; n * leg.cols()];
        for u in 0..n {
            for x in 0..2 {
                let p = j.get(&[u, x]);
                for (y, &q) in leg.row(x).iter().enumerate() {
                    entries[u * leg.cols() + y] += p * q;
                }
            }
        }
        JointTable::new(vec![n, leg.cols()], entries)
    };
    let i_uy = mutual_information(&push(&pux, ch.y_chan())?)?;
    let i_vz = mutual_information(&push(&pvx, ch.z_chan())?)?;
    let px = SimplexVector::new(vec![m[0][0] + m[1][1], m[0][1] + m[1][0]])?;
    let i_xy = ch.mi_y(&px)?;
    let i_xz = ch.mi_z(&px)?;
    let lhs = i_uy + i_vz;
    let rhs = i_xy.max(i_xz);
    Ok(XorMiReport {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-9,
        chain_mid: bound_u * i_xy + bound_v * i_xz,
        bound_u,
        bound_v,
        i_uy,
        i_vz,
    })
}
