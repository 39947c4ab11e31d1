//! Closed-form analysis of the binary skew-symmetric channel (skew 1/2)
//! AND case under weight `alpha`: scalar stationarity conditions, the
//! admissible-weight bound, the `g` criterion function and its sign scan,
//! the negative-Hessian coefficients, and the weighted-rate region.
//!
//! Conventions: `p_uv` is indexed `p(U=i, V=j)`; the AND assignment is
//! `X = U AND V` so the fiber of `x = 0` is `{(0,0), (0,1), (1,0)}`. The
//! scalar `x` is the ratio `p(0,1)/p(0,0)`; at a stationary point the first
//! condition forces `p(1,1)/p(1,0) = 2x`. All formulas assume skew 1/2 and
//! do not apply to the general-skew constructor in
//! [`crate::probcore::bssc_channel`].

use serde::Serialize;

use crate::envelope::{self, WeightedRateResult};
use crate::probcore::{builtin_channel, Builtin, JointTable};
use crate::{Error, Result};

/// Scalar state of the AND-case analysis.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AndCaseState {
    /// `p(0,1)/p(0,0)`.
    pub x: f64,
    pub alpha: f64,
}

impl AndCaseState {
    pub fn from_coupling(p_uv: &JointTable, alpha: f64) -> Result<Self> {
        let m = matrix_2x2(p_uv)?;
        if m[0][0] <= 0.0 {
            return Err(Error::Degenerate("p(0,0) must be positive".into()));
        }
        Ok(AndCaseState {
            x: m[0][1] / m[0][0],
            alpha,
        })
    }

    /// Ratio `p(1,1)/p(1,0)` implied by the first stationarity condition.
    pub fn implied_ratio(&self) -> f64 {
        2.0 * self.x
    }
}

fn matrix_2x2(p_uv: &JointTable) -> Result<Vec<Vec<f64>>> {
    if p_uv.rank() != 2 || p_uv.axes() != [2, 2] {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: p_uv.entries().len(),
        });
    }
    Ok(p_uv.matrix())
}

/// Residuals of the two first-derivative stationarity conditions for the
/// AND case: `res1 = p(1,1) p(0,0) / 2 - p(1,0) p(0,1)` and
/// `res2 = (1+4x)^alpha / ((1+x)^2 (1+2x)^(2(alpha-1))) - 1` with
/// `x = p(0,1)/p(0,0)`.
pub fn first_order_conditions(p_uv: &JointTable, alpha: f64) -> Result<(f64, f64)> {
    let m = matrix_2x2(p_uv)?;
    if m.iter().flatten().any(|&w| w <= 0.0) {
        return Err(Error::Degenerate(
            "stationarity conditions need a strictly positive coupling".into(),
        ));
    }
    let res1 = 0.5 * m[1][1] * m[0][0] - m[1][0] * m[0][1];
    let x = m[0][1] / m[0][0];
    let res2 = condition2_value(x, alpha) - 1.0;
    Ok((res1, res2))
}

fn condition2_value(x: f64, alpha: f64) -> f64 {
    (1.0 + 4.0 * x).powf(alpha) / ((1.0 + x).powi(2) * (1.0 + 2.0 * x).powf(2.0 * (alpha - 1.0)))
}

/// Largest weight for which the curvature condition can hold at ratio `x`:
/// `(1 + 4x) / (4x (1 + x))`.
pub fn alpha_bound(x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Err(Error::Domain(format!("ratio x {x} must be positive")));
    }
    Ok((1.0 + 4.0 * x) / (4.0 * x * (1.0 + x)))
}

/// The sign criterion
/// `g(x) = (1+x)^2/(1+2x)^2 - ((1+4x)/(1+2x)^2)^((1+4x)/(4x(1+x)))`,
/// extended by its limit `g(0) = 0`. Negative throughout `(0, 1/2)`, which
/// rules out simultaneous first- and second-order stationarity for any
/// weight above 1. Values outside `[0, 1/2]` are still computed; the
/// criterion is only meaningful inside.
pub fn g(x: f64) -> Result<f64> {
    if x < 0.0 {
        return Err(Error::Domain(format!("x {x} must be non-negative")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let first = (1.0 + x).powi(2) / (1.0 + 2.0 * x).powi(2);
    let base = (1.0 + 4.0 * x) / (1.0 + 2.0 * x).powi(2);
    let expo = (1.0 + 4.0 * x) / (4.0 * x * (1.0 + x));
    Ok(first - base.powf(expo))
}

/// Negative-Hessian coefficients `(G00, G01, G11)` of the quadratic form
/// `G00 I01^2 + 2 G01 I01 I10 + G11 I10^2` for the AND case at weight
/// `alpha`, valid on couplings satisfying the first condition.
pub fn hessian_g(p_uv: &JointTable, alpha: f64) -> Result<(f64, f64, f64)> {
    let m = matrix_2x2(p_uv)?;
    if m.iter().flatten().any(|&w| w <= 0.0) {
        return Err(Error::Degenerate(
            "curvature coefficients need a strictly positive coupling".into(),
        ));
    }
    let (res1, _) = first_order_conditions(p_uv, alpha)?;
    if res1.abs() > 1e-9 {
        return Err(Error::Invalid(format!(
            "first stationarity condition violated (residual {res1:.3e}); \
             the simplified coefficients do not apply"
        )));
    }
    let (p00, p01, p10, p11) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    let g00 = 1.0 / p01 + 1.0 / p00 - 1.0 / (p00 + p10) - 2.0 / (2.0 * p01 + p11);
    let g01 = 1.0 / p00;
    let g11 = (alpha - 1.0) / (p00 + p01) + (alpha - 1.0) / (p10 + p11) + 1.0 / p10 + 1.0 / p00
        - alpha / (p00 + p01)
        - alpha / (2.0 * p10)
        - alpha / (2.0 * (p10 + 2.0 * p11));
    Ok((g00, g01, g11))
}

/// The factored form of `G00` obtained by substituting the first condition;
/// agrees with the raw four-term expression on stationary couplings.
pub fn g00_simplified(p_uv: &JointTable) -> Result<f64> {
    let m = matrix_2x2(p_uv)?;
    let (p00, p01, p10) = (m[0][0], m[0][1], m[1][0]);
    if p00 <= 0.0 || p01 <= 0.0 || p10 <= 0.0 {
        return Err(Error::Degenerate("needs positive p00, p01, p10".into()));
    }
    Ok((p00 + p01) * p10 / ((p00 + p10) * p01 * p00))
}

/// Root of the second stationarity condition for a given weight, found by
/// bisection of the monotone log form
/// `alpha ln((1+4x)/(1+2x)^2) = ln((1+x)^2/(1+2x)^2)` on `[1e-9, 10]`.
pub fn condition2_root(alpha: f64) -> f64 {
    let phi = |x: f64| -> f64 {
        alpha * (1.0 + 4.0 * x).ln()
            - 2.0 * (1.0 + x).ln()
            - 2.0 * (alpha - 1.0) * (1.0 + 2.0 * x).ln()
    };
    let mut lo = 1e-9;
    let mut hi = 10.0;
    // phi > 0 just right of 0 and negative at the far end
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Debug, Serialize)]
pub struct AndCaseRow {
    pub alpha: f64,
    /// Root of the second condition.
    pub x_root: f64,
    /// Weight bound at the root.
    pub bound: f64,
    /// Whether both conditions are simultaneously satisfiable.
    pub admissible: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct AndCaseScanReport {
    pub rows: Vec<AndCaseRow>,
    /// `(x, g(x))` samples for plotting.
    pub g_scan: Vec<(f64, f64)>,
    pub any_admissible: bool,
}

/// For each weight in `alpha_grid`, solve the second condition and test it
/// against the curvature bound; also evaluates `g` on `x_grid`. No
/// admissible pair is expected for any weight above 1.
pub fn and_case_scan(alpha_grid: &[f64], x_grid: &[f64]) -> AndCaseScanReport {
    let rows: Vec<AndCaseRow> = alpha_grid
        .iter()
        .map(|&alpha| {
            let x_root = condition2_root(alpha);
            let bound = alpha_bound(x_root).unwrap_or(f64::INFINITY);
            AndCaseRow {
                alpha,
                x_root,
                bound,
                admissible: alpha <= bound + 1e-12,
            }
        })
        .collect();
    let g_scan: Vec<(f64, f64)> = x_grid
        .iter()
        .map(|&x| (x, g(x).unwrap_or(f64::NAN)))
        .collect();
    let any_admissible = rows.iter().any(|r| r.alpha > 1.0 && r.admissible);
    AndCaseScanReport {
        rows,
        g_scan,
        any_admissible,
    }
}

/// `max(alpha R1 + R2)` over the inner bound of the skew-1/2 channel,
/// through the weighted-rate formula.
pub fn bssc_weighted_region(alpha: f64) -> Result<WeightedRateResult> {
    let (ch, _) = builtin_channel(Builtin::BsscHalf);
    envelope::weighted_rate_support(&ch, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric;
    use crate::probcore::SimplexVector;
    use crate::tmax::{objective_j, CouplingWithMap, MapF};

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    /// Coupling with `p01/p00 = x` and `p11/p10 = 2x`, normalized.
    fn stationary_coupling(x: f64, p10: f64) -> JointTable {
        let p00 = 0.3;
        let entries = [p00, x * p00, p10, 2.0 * x * p10];
        let s: f64 = entries.iter().sum();
        JointTable::from_matrix(&[
            vec![entries[0] / s, entries[1] / s],
            vec![entries[2] / s, entries[3] / s],
        ])
        .unwrap()
    }

    #[test]
    fn first_condition_vanishes_on_constructed_coupling() {
        let p = stationary_coupling(0.3, 0.2);
        let (res1, _) = first_order_conditions(&p, 1.5).unwrap();
        assert_close(res1, 0.0, 1e-15);
        // x near zero: second condition degenerates to the boundary
        let p = stationary_coupling(1e-9, 0.2);
        let (_, res2) = first_order_conditions(&p, 1.3).unwrap();
        assert_close(res2, 0.0, 1e-7);
    }

    #[test]
    fn second_condition_root_at_unit_weight_is_two() {
        // algebraic solve: (1+4x) = (1+x)^2 forces x^2 = 2x
        let root = condition2_root(1.0);
        assert_close(root, 2.0, 1e-9);
        let p = stationary_coupling(2.0, 0.1);
        let (_, res2) = first_order_conditions(&p, 1.0).unwrap();
        assert_close(res2, 0.0, 1e-12);
    }

    #[test]
    fn alpha_bound_values() {
        assert_close(alpha_bound(0.5).unwrap(), 1.0, 1e-15);
        assert_close(alpha_bound(0.25).unwrap(), 1.6, 1e-15);
        assert!(alpha_bound(1e-9).unwrap() > 1e8);
        assert!(alpha_bound(0.0).is_err());
        assert!(alpha_bound(-0.1).is_err());
    }

    #[test]
    fn g_limit_sign_and_value() {
        assert_eq!(g(0.0).unwrap(), 0.0);
        // frozen from direct high-precision evaluation of the display
        assert_close(g(0.25).unwrap(), -0.133795103729279, 1e-12);
        let mut x = 0.01;
        while x < 0.495 {
            assert!(g(x).unwrap() < 0.0, "g({x}) not negative");
            x += 0.01;
        }
        assert!(g(-0.5).is_err());
        // limit behaviour near zero
        assert!(g(1e-6).unwrap().abs() < 1e-5);
    }

    #[test]
    fn hessian_coefficient_identity_and_unit_weight_reduction() {
        let p = stationary_coupling(0.35, 0.18);
        let (g00, g01, g11) = hessian_g(&p, 1.4).unwrap();
        assert_close(g00, g00_simplified(&p).unwrap(), 1e-12);
        let m = p.matrix();
        assert_close(g01, 1.0 / m[0][0], 1e-15);
        // alpha = 1 drops the weighted terms
        let (_, _, g11_unit) = hessian_g(&p, 1.0).unwrap();
        let expect = 1.0 / m[1][0] + 1.0 / m[0][0]
            - 1.0 / (m[0][0] + m[0][1])
            - 0.5 / m[1][0]
            - 0.5 / (m[1][0] + 2.0 * m[1][1]);
        assert_close(g11_unit, expect, 1e-12);
        let _ = g11;

        // non-stationary coupling is rejected
        let bad = JointTable::from_matrix(&[vec![0.4, 0.1], vec![0.1, 0.4]]).unwrap();
        assert!(hessian_g(&bad, 1.2).is_err());
    }

    #[test]
    fn hessian_matches_finite_difference_curvature() {
        // sign convention first: the x=0 fiber of the AND map is
        // {(0,0),(0,1),(1,0)}, so marginal preservation forces
        // I00 = -(I01 + I10) with I11 = 0
        let f = MapF::from_rows(&[vec![0, 0], vec![0, 1]], 2).unwrap();
        let fibers = f.fibers();
        assert_eq!(fibers[0], vec![0, 1, 2]);
        assert_eq!(fibers[1], vec![3]);

        let (ch, _) = builtin_channel(Builtin::BsscHalf);
        for (alpha, x, p10) in [(1.0, 0.3, 0.2), (1.7, 0.25, 0.15), (3.0, 0.4, 0.1)] {
            let p = stationary_coupling(x, p10);
            let (g00, g01, g11) = hessian_g(&p, alpha).unwrap();
            let (i01, i10) = (0.011, -0.006);
            let gform = g00 * i01 * i01 + 2.0 * g01 * i01 * i10 + g11 * i10 * i10;

            let i_table = [-(i01 + i10), i01, i10, 0.0];
            let entries = p.entries();
            let px =
                SimplexVector::new(vec![entries[0] + entries[1] + entries[2], entries[3]]).unwrap();
            let eps = 1e-4;
            let jb = |scale: f64| {
                let perturbed: Vec<f64> = entries
                    .iter()
                    .zip(&i_table)
                    .map(|(w, i)| w * (1.0 + scale * i / w))
                    .collect();
                let pt = JointTable::new(vec![2, 2], perturbed).unwrap();
                let c = CouplingWithMap::new(pt, f.clone()).unwrap();
                objective_j(&c, &ch, &px, alpha).unwrap()
            };
            let d2 = (jb(eps) - 2.0 * jb(0.0) + jb(-eps)) / (eps * eps);
            let fd = -d2 * std::f64::consts::LN_2;
            let rel = (gform - fd).abs() / gform.abs().max(1e-12);
            assert!(
                rel < 1e-3,
                "alpha {alpha}: G-form {gform} vs fd {fd} rel {rel}"
            );

            // third route at unit weight: the general quadratic form
            if alpha == 1.0 {
                let c = CouplingWithMap::new(p.clone(), f.clone()).unwrap();
                let h = crate::extremal::hessian_form(&c, &ch, &px).unwrap();
                let pert = crate::extremal::Perturbation::new(i_table.to_vec(), &f).unwrap();
                let q = h.quad(&pert);
                assert_close(gform, q, 1e-10);
            }
        }
    }

    #[test]
    fn scan_finds_no_admissible_weight_above_one() {
        let alphas: Vec<f64> = (1..=50).map(|k| 1.0 + 7.0 * k as f64 / 50.0).collect();
        let xs: Vec<f64> = (1..500).map(|k| k as f64 * 0.001).collect();
        let report = and_case_scan(&alphas, &xs);
        assert!(!report.any_admissible);
        for row in &report.rows {
            assert!(
                row.alpha > row.bound,
                "alpha {} within bound {} at root {}",
                row.alpha,
                row.bound,
                row.x_root
            );
        }
        for &(x, gx) in &report.g_scan {
            assert!(gx < 0.0, "g({x}) = {gx}");
        }
        // continuity just above the boundary weight
        let near = and_case_scan(&[1.0 + 1e-6], &[]);
        assert!(!near.any_admissible);
        // bisection root for alpha = 1.5 violates the bound
        let row = &and_case_scan(&[1.5], &[]).rows[0];
        assert!(row.x_root > 0.0 && 1.5 > row.bound);
    }

    #[test]
    fn weighted_region_monotone_and_consistent_at_one() {
        let r1 = bssc_weighted_region(1.0).unwrap();
        let sum = envelope::marton_sum_rate_binary(&builtin_channel(Builtin::BsscHalf).0).unwrap();
        assert_eq!(r1.value.to_bits(), sum.value.to_bits());
        let r2 = bssc_weighted_region(1.5).unwrap();
        assert!(r2.value >= r1.value - 1e-9);
    }

    #[test]
    fn weighted_one_letter_inequality_holds_for_skew_half() {
        // search over random couplings and all nontrivial binary maps
        let (ch, _) = builtin_channel(Builtin::BsscHalf);
        let maps: Vec<MapF> = crate::tmax::enumerate_maps(2, 2, 2).unwrap();
        let mut rng = numeric::rng_from(64);
        for &alpha in &[1.0, 2.0, 3.4295] {
            for _ in 0..120 {
                let entries = numeric::dirichlet1(&mut rng, 4);
                let p_uv = JointTable::new(vec![2, 2], entries).unwrap();
                for m in &maps {
                    if m.u_size() * m.v_size() != 4 {
                        continue;
                    }
                    let c = CouplingWithMap::new(p_uv.clone(), m.clone()).unwrap();
                    let induced = c.induced_x();
                    let px = SimplexVector::new(induced).unwrap();
                    let j = objective_j(&c, &ch, &px, alpha).unwrap();
                    let rhs = (alpha * ch.mi_y(&px).unwrap()).max(ch.mi_z(&px).unwrap());
                    assert!(
                        j <= rhs + 1e-6,
                        "alpha {alpha}: {j} > {rhs} at {:?} via {}",
                        p_uv.entries(),
                        m.id()
                    );
                }
            }
        }
    }
}
