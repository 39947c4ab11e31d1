//! Small dense numerical routines shared across the crate: simplex
//! projection, convex hulls on a 1-D grid, a cyclic Jacobi eigensolver,
//! a primal simplex LP solver and seeded sampling helpers.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Euclidean projection of `v` onto `{x >= 0, sum(x) = mass}`.
///
/// Sort-based O(n log n) algorithm; `mass` must be non-negative.
pub(crate) fn project_simplex_scaled(v: &mut [f64], mass: f64) {
    if v.is_empty() {
        return;
    }
    if mass <= 0.0 {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let t = (cumsum - mass) / (k as f64 + 1.0);
        if k + 1 == sorted.len() || sorted[k + 1] <= t {
            theta = t;
            if k + 1 < sorted.len() && sorted[k + 1] > t {
                continue;
            }
            break;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
    // repair rounding drift so the fiber mass is exact
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        let scale = mass / s;
        v.iter_mut().for_each(|x| *x *= scale);
    } else {
        let n = v.len() as f64;
        v.iter_mut().for_each(|x| *x = mass / n);
    }
}

/// Piecewise-linear hull of points `(t_i, val_i)` on an increasing grid.
///
/// `upper = true` builds the concave majorant (upper hull); `false` the
/// convex minorant (lower hull).
pub(crate) struct GridHull {
    ts: Vec<f64>,
    vs: Vec<f64>,
}

impl GridHull {
    pub fn build(ts: &[f64], vals: &[f64], upper: bool) -> Self {
        assert_eq!(ts.len(), vals.len());
        let sign = if upper { 1.0 } else { -1.0 };
        let mut hull: Vec<usize> = Vec::with_capacity(ts.len());
        for i in 0..ts.len() {
            while hull.len() >= 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                // drop b if it lies below (above for lower) the chord a..i
                let cross = (ts[b] - ts[a]) * (sign * vals[i] - sign * vals[a])
                    - (ts[i] - ts[a]) * (sign * vals[b] - sign * vals[a]);
                if cross >= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(i);
        }
        GridHull {
            ts: hull.iter().map(|&i| ts[i]).collect(),
            vs: hull.iter().map(|&i| vals[i]).collect(),
        }
    }

    /// Hull value at `t` plus the bracketing vertices `(t_left, v_left, t_right, v_right)`.
    /// When `t` coincides with a vertex the bracket degenerates to that vertex.
    pub fn eval(&self, t: f64) -> (f64, (f64, f64), (f64, f64)) {
        let n = self.ts.len();
        if t <= self.ts[0] {
            return (
                self.vs[0],
                (self.ts[0], self.vs[0]),
                (self.ts[0], self.vs[0]),
            );
        }
        if t >= self.ts[n - 1] {
            let p = (self.ts[n - 1], self.vs[n - 1]);
            return (self.vs[n - 1], p, p);
        }
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.ts[mid] <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (t0, v0) = (self.ts[lo], self.vs[lo]);
        let (t1, v1) = (self.ts[hi], self.vs[hi]);
        if (t - t0).abs() <= 1e-15 {
            return (v0, (t0, v0), (t0, v0));
        }
        let lam = (t - t0) / (t1 - t0);
        (v0 + lam * (v1 - v0), (t0, v0), (t1, v1))
    }
}

/// Eigen-decomposition of a dense symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order together with the matching
/// eigenvectors (each row of the returned matrix is one eigenvector).
pub(crate) fn symmetric_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    if n == 0 {
        return (vec![], vec![]);
    }
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i][j] * m[i][j];
            }
        }
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i][i].partial_cmp(&m[j][j]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| m[i][i]).collect();
    let vecs: Vec<Vec<f64>> = order
        .iter()
        .map(|&col| (0..n).map(|row| v[row][col]).collect())
        .collect();
    (vals, vecs)
}

/// Primal simplex method for `max c·x  s.t.  A x = b, x >= 0` with a known
/// feasible starting basis. `a` is row-major `m x n` with small `m`.
///
/// Returns the optimal `(objective, x_basis_indices, x_basis_values)`.
pub(crate) fn lp_max(
    a: &[Vec<f64>],
    b: &[f64],
    c: &[f64],
    start_basis: &[usize],
) -> Option<(f64, Vec<usize>, Vec<f64>)> {
    let m = a.len();
    let n = c.len();
    let mut basis: Vec<usize> = start_basis.to_vec();
    assert_eq!(basis.len(), m);
    let max_iters = 40 * n + 1000;
    let mut use_bland = false;
    for iter in 0..max_iters {
        if iter > 10 * n {
            use_bland = true;
        }
        // basis matrix inverse via Gaussian elimination (m <= 4)
        let binv = invert(&collect_cols(a, &basis), m)?;
        let xb: Vec<f64> = matvec(&binv, b);
        let cb: Vec<f64> = basis.iter().map(|&j| c[j]).collect();
        // duals y = cb^T B^-1
        let y: Vec<f64> = (0..m)
            .map(|j| (0..m).map(|i| cb[i] * binv[i][j]).sum())
            .collect();
        // entering column
        let mut enter: Option<usize> = None;
        let mut best_rc = 1e-9;
        for j in 0..n {
            if basis.contains(&j) {
                continue;
            }
            let rc = c[j] - (0..m).map(|i| y[i] * a[i][j]).sum::<f64>();
            if use_bland {
                if rc > 1e-9 {
                    enter = Some(j);
                    break;
                }
            } else if rc > best_rc {
                best_rc = rc;
                enter = Some(j);
            }
        }
        let Some(jin) = enter else {
            let obj: f64 = (0..m).map(|i| cb[i] * xb[i]).sum();
            return Some((obj, basis, xb));
        };
        // direction
        let col: Vec<f64> = (0..m).map(|i| a[i][jin]).collect();
        let d = matvec(&binv, &col);
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            if d[i] > 1e-11 {
                let ratio = xb[i].max(0.0) / d[i];
                if ratio < best_ratio - 1e-14
                    || (ratio < best_ratio + 1e-14 && leave.map_or(true, |l| basis[i] < basis[l]))
                {
                    best_ratio = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(iout) = leave else {
            return None; // unbounded: cannot happen on a bounded polytope
        };
        basis[iout] = jin;
    }
    None
}

fn collect_cols(a: &[Vec<f64>], cols: &[usize]) -> Vec<Vec<f64>> {
    let m = a.len();
    (0..m)
        .map(|i| cols.iter().map(|&j| a[i][j]).collect())
        .collect()
}

fn matvec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn invert(a: &[Vec<f64>], n: usize) -> Option<Vec<Vec<f64>>> {
    let mut aug: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = a[i].clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for col in 0..n {
        let piv =
            (col..n).max_by(|&i, &j| aug[i][col].abs().partial_cmp(&aug[j][col].abs()).unwrap())?;
        if aug[piv][col].abs() < 1e-13 {
            return None;
        }
        aug.swap(col, piv);
        let p = aug[col][col];
        for x in aug[col].iter_mut() {
            *x /= p;
        }
        for row in 0..n {
            if row != col {
                let f = aug[row][col];
                if f != 0.0 {
                    for k in 0..2 * n {
                        aug[row][k] -= f * aug[col][k];
                    }
                }
            }
        }
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Golden-section maximization of a unimodal-enough `f` on `[lo, hi]`.
pub(crate) fn golden_max(
    f: &mut dyn FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    iters: usize,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    (mid, f(mid))
}

/// Derive a stream seed from a master seed and an index (splitmix64 step).
pub(crate) fn subseed(master: u64, idx: u64) -> u64 {
    let mut z = master.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(idx.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform sample from the n-simplex (Dirichlet(1,...,1)).
pub(crate) fn dirichlet1<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// All permutations of 0..n (n <= 4 in practice).
pub(crate) fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    heap_permute(&mut cur, n, &mut out);
    out.sort();
    out
}

fn heap_permute(v: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(v.clone());
        return;
    }
    for i in 0..k {
        heap_permute(v, k - 1, out);
        if k % 2 == 0 {
            v.swap(i, k - 1);
        } else {
            v.swap(0, k - 1);
        }
    }
}
