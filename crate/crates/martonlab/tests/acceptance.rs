//! Acceptance suite: one test per numbered criterion, each printing a
//! pass/fail line with its measured quantities and runtime. Run with
//! `cargo test --test acceptance -- --nocapture` to see the report lines.

use std::time::Instant;

use martonlab::bssc;
use martonlab::extremal::{self, Verdict};
use martonlab::factorize::{
    self, claim1_instance, fixture_deterministic_y, fixture_more_capable, sample_binary_channel,
    CheckOptions, SearchConfig, VerdictKind,
};
use martonlab::maxcorr;
use martonlab::probcore::{
    builtin_channel, erasure_wrap, mutual_information, BroadcastChannel, Builtin, JointTable,
    SimplexVector, StochasticMatrix,
};
use martonlab::tmax::{self, tmax_eval, CouplingWithMap, MapF, TmaxOptions};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn report(criterion: &str, pass: bool, detail: &str, started: Instant) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!(
        "[acceptance] {criterion}: {status} ({detail}; {:.2}s)",
        started.elapsed().as_secs_f64()
    );
    assert!(pass, "{criterion}: {detail}");
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn dirichlet<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

#[test]
fn criterion_01_counterexample_reproduction() {
    let t0 = Instant::now();
    let (ch, px) = builtin_channel(Builtin::AppendixB);
    let px = px.unwrap();
    let alpha = 3.429517;
    let p_uv = JointTable::from_matrix(&[vec![0.05930, 0.00005], vec![0.14065, 0.80000]]).unwrap();
    let f = MapF::from_rows(&[vec![1, 1], vec![1, 0]], 2).unwrap();
    let c = CouplingWithMap::new(p_uv, f).unwrap();
    let lhs = tmax::objective_j(&c, &ch, &px, alpha).unwrap();
    let rhs = (alpha * ch.mi_y(&px).unwrap()).max(ch.mi_z(&px).unwrap());
    let pass = (lhs - 0.593020).abs() <= 5e-5 && (rhs - 0.586278).abs() <= 5e-5 && lhs > rhs;
    // the CLI half of this criterion (counterexample exits 0 and reports
    // the violation) is exercised in the binary crate's acceptance test
    report(
        "criterion 1 (counterexample reproduction)",
        pass && t0.elapsed().as_secs_f64() < 1.0,
        &format!("lhs {lhs:.6}, rhs {rhs:.6}"),
        t0,
    );
}

#[test]
fn criterion_02_binary_unit_weight_equality() {
    let t0 = Instant::now();
    let opts = TmaxOptions {
        restarts: 12,
        iterations: 150,
        ..TmaxOptions::default()
    };
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let mut rng = rng_for(1000 + seed);
        let ch = sample_binary_channel(&mut rng, 3);
        let px = SimplexVector::new(dirichlet(&mut rng, 2)).unwrap();
        let res = tmax_eval(&ch, &px, 1.0, &opts).unwrap();
        let want = ch.mi_y(&px).unwrap().max(ch.mi_z(&px).unwrap());
        worst = worst.max((res.value - want).abs());
    }
    report(
        "criterion 2 (binary unit-weight equality, 100 channels)",
        worst <= 1e-6 && t0.elapsed().as_secs_f64() < 120.0,
        &format!("max |T - max MI| = {worst:.2e}"),
        t0,
    );
}

#[test]
fn criterion_03_ternary_deterministic_violation() {
    let t0 = Instant::now();
    let (bw, _) = builtin_channel(Builtin::Blackwell);
    let u3 = SimplexVector::uniform(3);
    let opts = TmaxOptions {
        restarts: 8,
        ..TmaxOptions::default()
    };
    let res = tmax_eval(&bw, &u3, 1.0, &opts).unwrap();
    let max_mi = bw.mi_y(&u3).unwrap().max(bw.mi_z(&u3).unwrap());
    let pass = res.value >= 1.584963 - 1e-6
        && (max_mi - 0.918296).abs() <= 1e-6 + 5e-7
        && (max_mi - 0.9182958340544896).abs() <= 1e-9
        && res.value - max_mi >= 0.66;
    report(
        "criterion 3 (ternary deterministic channel breaks the binary equality)",
        pass && t0.elapsed().as_secs_f64() < 10.0,
        &format!(
            "T = {:.6}, max MI = {max_mi:.6}, margin {:.3}",
            res.value,
            res.value - max_mi
        ),
        t0,
    );
}

#[test]
fn criterion_04_skew_symmetric_scan() {
    let t0 = Instant::now();
    let mut pass = bssc::g(0.0).unwrap() == 0.0;
    let mut x = 0.001;
    while x <= 0.499 + 1e-12 {
        if bssc::g(x).unwrap() >= 0.0 {
            pass = false;
            break;
        }
        x += 0.001;
    }
    let alphas: Vec<f64> = (1..=50).map(|k| 1.0 + 7.0 * k as f64 / 50.0).collect();
    let scan = bssc::and_case_scan(&alphas, &[]);
    let roots_ok = scan
        .rows
        .iter()
        .all(|r| r.x_root.is_finite() && r.alpha > r.bound);
    pass = pass && roots_ok && !scan.any_admissible;
    report(
        "criterion 4 (skew-symmetric stationarity scan finds no admissible point)",
        pass && t0.elapsed().as_secs_f64() < 10.0,
        &format!("50 weights scanned, g negative on (0, 1/2)"),
        t0,
    );
}

#[test]
fn criterion_05_hessian_three_way_agreement() {
    let t0 = Instant::now();
    let mut worst_forms: f64 = 0.0;
    let mut worst_fd: f64 = 0.0;
    let mut done = 0usize;
    let mut seed = 0u64;
    while done < 50 {
        seed += 1;
        let mut rng = rng_for(5000 + seed);
        let ch = sample_binary_channel(&mut rng, 2);
        let dense = (0..2).all(|x| {
            ch.y_chan().row(x).iter().all(|&q| q > 0.03)
                && ch.z_chan().row(x).iter().all(|&q| q > 0.03)
        });
        if !dense {
            continue;
        }
        let mut entries = dirichlet(&mut rng, 4);
        entries.iter_mut().for_each(|e| *e = 0.8 * *e + 0.05);
        let p_uv = JointTable::new(vec![2, 2], entries).unwrap();
        let f = MapF::from_rows(&[vec![0, 0], vec![0, 1]], 2).unwrap();
        let c = CouplingWithMap::new(p_uv, f).unwrap();
        let px = SimplexVector::new(c.induced_x()).unwrap();
        let h = extremal::hessian_form(&c, &ch, &px).unwrap();

        // random feasible direction
        let mut i_table: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() - 0.5).collect();
        for fiber in c.map.fibers() {
            let s: f64 = fiber.iter().map(|&cell| i_table[cell]).sum();
            for &cell in &fiber {
                i_table[cell] -= s / fiber.len() as f64;
            }
        }
        let pert = extremal::Perturbation::new(i_table.clone(), &c.map).unwrap();
        let q_closed = h.quad(&pert);

        // expectation-form route
        let p = c.p_uv.entries();
        let mut q_exp: f64 = i_table.iter().zip(p).map(|(i, w)| i * i / w).sum();
        for u in 0..2 {
            for y in 0..2 {
                let (mut num, mut den) = (0.0, 0.0);
                for v in 0..2 {
                    let q = ch.y_chan().get(c.map.value(u, v), y);
                    num += i_table[u * 2 + v] * q;
                    den += p[u * 2 + v] * q;
                }
                q_exp -= num * num / den;
            }
        }
        for v in 0..2 {
            for z in 0..2 {
                let (mut num, mut den) = (0.0, 0.0);
                for u in 0..2 {
                    let q = ch.z_chan().get(c.map.value(u, v), z);
                    num += i_table[u * 2 + v] * q;
                    den += p[u * 2 + v] * q;
                }
                q_exp -= num * num / den;
            }
        }
        worst_forms = worst_forms.max((q_closed - q_exp).abs());

        // central finite differences of the objective
        let eps = 1e-4;
        let jb = |scale: f64| {
            let perturbed: Vec<f64> = p
                .iter()
                .zip(&i_table)
                .map(|(w, i)| w * (1.0 + scale * i / w))
                .collect();
            let pt = JointTable::new(vec![2, 2], perturbed).unwrap();
            let cc = CouplingWithMap::new(pt, c.map.clone()).unwrap();
            tmax::objective_j(&cc, &ch, &px, 1.0).unwrap()
        };
        let d2 = (jb(eps) - 2.0 * jb(0.0) + jb(-eps)) / (eps * eps);
        let q_fd = -d2 * std::f64::consts::LN_2;
        worst_fd = worst_fd.max((q_closed - q_fd).abs() / q_closed.abs().max(1e-9));
        done += 1;
    }
    report(
        "criterion 5 (curvature form three-way agreement, 50 instances)",
        worst_forms <= 1e-10 && worst_fd <= 1e-3 && t0.elapsed().as_secs_f64() < 30.0,
        &format!("analytic-route gap {worst_forms:.2e}, fd rel gap {worst_fd:.2e}"),
        t0,
    );
}

#[test]
fn criterion_06_pattern_exclusion_refutes() {
    let t0 = Instant::now();
    let mut refuted = 0usize;
    let mut tried = 0usize;
    let mut seed = 0u64;
    while tried < 50 && seed < 400 {
        seed += 1;
        let mut rng = rng_for(6000 + seed);
        let ch = sample_binary_channel(&mut rng, 2);
        let dense = (0..2).all(|x| {
            ch.y_chan().row(x).iter().all(|&q| q > 0.03)
                && ch.z_chan().row(x).iter().all(|&q| q > 0.03)
        });
        if !dense {
            continue;
        }
        let mut entries = dirichlet(&mut rng, 4);
        entries.iter_mut().for_each(|e| *e = 0.8 * *e + 0.05);
        let p_uv = JointTable::new(vec![2, 2], entries).unwrap();
        let f = MapF::from_rows(&[vec![0, 0], vec![0, 1]], 2).unwrap();
        let c = CouplingWithMap::new(p_uv, f).unwrap();
        let px = SimplexVector::new(c.induced_x()).unwrap();
        // only couplings with real dependence on both receivers qualify
        let mut puy = vec![0.0; 4];
        let mut pvz = vec![0.0; 4];
        for u in 0..2 {
            for v in 0..2 {
                let w = c.p_uv.get(&[u, v]);
                let x = c.map.value(u, v);
                for k in 0..2 {
                    puy[u * 2 + k] += w * ch.y_chan().get(x, k);
                    pvz[v * 2 + k] += w * ch.z_chan().get(x, k);
                }
            }
        }
        let iuy = mutual_information(&JointTable::new(vec![2, 2], puy).unwrap()).unwrap();
        let ivz = mutual_information(&JointTable::new(vec![2, 2], pvz).unwrap()).unwrap();
        if iuy < 1e-3 || ivz < 1e-3 {
            continue;
        }
        tried += 1;
        let rep = extremal::certify_local_max(&c, &ch, &px).unwrap();
        if rep.verdict == Verdict::Refuted
            && matches!(
                rep.refutation,
                Some(extremal::RefutationWitness::AndPatternExcluded { .. })
            )
        {
            refuted += 1;
        }
    }
    report(
        "criterion 6 (pattern exclusion refutes, 50 dependent couplings)",
        tried == 50 && refuted == 50 && t0.elapsed().as_secs_f64() < 60.0,
        &format!("{refuted}/{tried} refuted via the explicit perturbation"),
        t0,
    );
}

#[test]
fn criterion_07_xor_bound_suite() {
    let t0 = Instant::now();
    let mut rng = rng_for(7000);
    let mut sum_ok = true;
    for _ in 0..10_000 {
        let p_uv = JointTable::new(vec![2, 2], dirichlet(&mut rng, 4)).unwrap();
        let (bu, bv) = maxcorr::xor_bounds(&p_uv).unwrap();
        if bu + bv > 1.0 + 1e-12 {
            sum_ok = false;
            break;
        }
    }
    let mut second_deriv_ok = true;
    for ai in 0..10 {
        for bi in 0..10 {
            for xi in 1..=10 {
                let v = maxcorr::convexity_second_derivative(
                    ai as f64 / 9.0,
                    bi as f64 / 9.0,
                    xi as f64 / 11.0,
                )
                .unwrap();
                if v < -1e-12 {
                    second_deriv_ok = false;
                }
            }
        }
    }
    let mut mi_ok = true;
    for _ in 0..1000 {
        let p_uv = JointTable::new(vec![2, 2], dirichlet(&mut rng, 4)).unwrap();
        let ch = sample_binary_channel(&mut rng, 3);
        match maxcorr::xor_mi_inequality_check(&p_uv, &ch) {
            Ok(rep) => {
                if !rep.holds {
                    mi_ok = false;
                }
            }
            Err(_) => continue, // degenerate draw
        }
    }
    report(
        "criterion 7 (xor-case bound suite)",
        sum_ok && second_deriv_ok && mi_ok && t0.elapsed().as_secs_f64() < 60.0,
        "10^4 bound sums, 10^3 curvature points, 10^3 MI checks",
        t0,
    );
}

#[test]
fn criterion_08_maximal_correlation() {
    let t0 = Instant::now();
    let mut rng = rng_for(8000);
    let mut worst_gap: f64 = 0.0;
    let mut done = 0usize;
    while done < 100 {
        let nu = rng.gen_range(2..=3);
        let nx = rng.gen_range(2..=3);
        let j = JointTable::new(vec![nu, nx], dirichlet(&mut rng, nu * nx)).unwrap();
        let ace = match maxcorr::maximal_correlation_ace(&j) {
            Ok(v) => v,
            Err(_) => continue, // tiny marginal draw
        };
        let svd = maxcorr::maximal_correlation_svd(&j).unwrap();
        worst_gap = worst_gap.max((ace - svd).abs());
        done += 1;
    }
    let indep = JointTable::from_matrix(&[vec![0.12, 0.28], vec![0.18, 0.42]]).unwrap();
    let ident = JointTable::from_matrix(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
    let bsc = JointTable::from_matrix(&[vec![0.45, 0.05], vec![0.05, 0.45]]).unwrap();
    let c_indep = maxcorr::maximal_correlation_sq(&indep).unwrap().c_prime;
    let c_ident = maxcorr::maximal_correlation_sq(&ident).unwrap().c_prime;
    let c_bsc = maxcorr::maximal_correlation_sq(&bsc).unwrap().c_prime;
    let pass = worst_gap <= 1e-9
        && c_indep.abs() <= 1e-12
        && (c_ident - 1.0).abs() <= 1e-9
        && (c_bsc - 0.64).abs() <= 1e-9;
    report(
        "criterion 8 (maximal correlation two-route agreement)",
        pass && t0.elapsed().as_secs_f64() < 10.0,
        &format!("route gap {worst_gap:.2e}, fixtures ({c_indep:.2e}, {c_ident:.9}, {c_bsc:.9})"),
        t0,
    );
}

#[test]
fn criterion_09_two_letter_chain_identity() {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..50u64 {
        let (joint, x2_of_u) = claim1_instance(9000 + seed);
        for &alpha in &[1.0, 2.0, 3.5] {
            let r = factorize::claim1_identity_check(&joint, &x2_of_u, alpha).unwrap();
            worst = worst.max(r);
        }
    }
    report(
        "criterion 9 (two-letter chain identity, 50 instances x 3 weights)",
        worst < 1e-9 && t0.elapsed().as_secs_f64() < 10.0,
        &format!("max residual {worst:.2e}"),
        t0,
    );
}

#[test]
fn criterion_10_factorization_fixtures_and_search() {
    let t0 = Instant::now();
    let opts = CheckOptions {
        restarts: 6,
        iterations: 120,
        map_budget: 64,
        envelope_grid: 1201,
        ..CheckOptions::default()
    };
    let mut all_hold = true;
    let mut worst_slack = f64::INFINITY;
    // family 1: extreme mixing weights
    for i in 0..10u64 {
        let mut rng = rng_for(10_000 + i);
        let ch1 = sample_binary_channel(&mut rng, 3);
        let ch2 = sample_binary_channel(&mut rng, 3);
        let p = JointTable::new(vec![2, 2], dirichlet(&mut rng, 4)).unwrap();
        let lambda = if i % 2 == 0 { 0.0 } else { 1.0 };
        let v = factorize::conj1_check(&ch1, &ch2, &p, lambda, &opts).unwrap();
        all_hold &= v.verdict == VerdictKind::HoldsWithinTolerance;
        worst_slack = worst_slack.min(v.slack);
    }
    // family 2: deterministic first component
    for i in 0..10u64 {
        let mut rng = rng_for(11_000 + i);
        let ch1 = fixture_deterministic_y(&mut rng, 3);
        let ch2 = sample_binary_channel(&mut rng, 3);
        let p = JointTable::new(vec![2, 2], dirichlet(&mut rng, 4)).unwrap();
        let v = factorize::conj1_check(&ch1, &ch2, &p, 0.5, &opts).unwrap();
        all_hold &= v.verdict == VerdictKind::HoldsWithinTolerance;
        worst_slack = worst_slack.min(v.slack);
    }
    // family 3: dominated second receiver in the first component
    for i in 0..10u64 {
        let mut rng = rng_for(12_000 + i);
        let ch1 = fixture_more_capable(&mut rng, 3);
        let ch2 = sample_binary_channel(&mut rng, 3);
        let p = JointTable::new(vec![2, 2], dirichlet(&mut rng, 4)).unwrap();
        let v = factorize::conj1_check(&ch1, &ch2, &p, 0.5, &opts).unwrap();
        all_hold &= v.verdict == VerdictKind::HoldsWithinTolerance;
        worst_slack = worst_slack.min(v.slack);
    }
    // randomized sweep: 20 trials over the five-point mixing grid
    let config = SearchConfig {
        seed: 13_000,
        trials: 20,
        ..SearchConfig::default()
    };
    let search = factorize::random_search(&config).unwrap();
    let pass = all_hold && search.confirmed_violations == 0;
    report(
        "criterion 10 (factorization fixtures and 20-trial search)",
        pass && t0.elapsed().as_secs_f64() < 600.0,
        &format!(
            "fixtures hold (worst slack {worst_slack:.2e}), search min slack {:.2e}, {} confirmed",
            search.min_slack, search.confirmed_violations
        ),
        t0,
    );
}

#[test]
fn criterion_11_erasure_scaling() {
    let t0 = Instant::now();
    let mut rng = rng_for(11_111);
    let mut worst: f64 = 0.0;
    for trial in 0..100usize {
        let nu = rng.gen_range(2..=3);
        let nx = rng.gen_range(2..=3);
        let ny = rng.gen_range(2..=3);
        let pux = JointTable::new(vec![nu, nx], dirichlet(&mut rng, nu * nx)).unwrap();
        let rows: Vec<Vec<f64>> = (0..nx).map(|_| dirichlet(&mut rng, ny)).collect();
        let chan = StochasticMatrix::new(rows).unwrap();
        let eps = trial as f64 / 100.0;
        let wrapped = erasure_wrap(&chan, eps).unwrap();
        let push = |m: &StochasticMatrix| -> JointTable {
            let mut entries = vec![0.0; nu * m.cols()];
            for u in 0..nu {
                for x in 0..nx {
                    let p = pux.get(&[u, x]);
                    for (y, &q) in m.row(x).iter().enumerate() {
                        entries[u * m.cols() + y] += p * q;
                    }
                }
            }
            JointTable::new(vec![nu, m.cols()], entries).unwrap()
        };
        let i = mutual_information(&push(&chan)).unwrap();
        let i_eps = mutual_information(&push(&wrapped)).unwrap();
        worst = worst.max((i_eps - (1.0 - eps) * i).abs());
    }
    report(
        "criterion 11 (erasure scaling identity, 100 instances)",
        worst <= 1e-10 && t0.elapsed().as_secs_f64() < 5.0,
        &format!("max deviation {worst:.2e}"),
        t0,
    );
}

// keeps the unused-import lint honest for items only used in some criteria
#[allow(dead_code)]
fn _typecheck_helpers(ch: &BroadcastChannel) -> usize {
    ch.x_size()
}
