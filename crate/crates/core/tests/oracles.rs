mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wsn_energy::energy::{overall_energy, CoefficientVector, Constituent, ConstituentFlowVector, ConstituentMask};
use wsn_energy::estimate::{error_report, fit_ls, predict, rolling_fit, ObservationSet};
use wsn_energy::flows::{global_flow, individual_flow, local_flow};
use wsn_energy::policy::{check_constraints, select_tasks, task_cost, TaskDescriptor};
use wsn_energy::radio::{one_hop_cost, relay_threshold, two_hop_cost, tx_energy_per_bit, RadioModelParams};
use wsn_energy::ResourcePowerProfile;

fn random_mask<R: Rng>(rng: &mut R) -> ConstituentMask {
    loop {
        let m = ConstituentMask(std::array::from_fn(|_| rng.random_bool(0.6)));
        if m.count() > 0 {
            return m;
        }
    }
}

#[test]
fn overall_energy_matches_dot_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let mask = random_mask(&mut rng);
        let alpha: [f64; 5] = std::array::from_fn(|_| rng.random_range(-1e-3..1e-2));
        let model = CoefficientVector::new(alpha, mask).unwrap();
        let flows: [f64; 5] = std::array::from_fn(|k| if mask.0[k] { rng.random_range(0.0..1e4) } else { 0.0 });
        let mut expected = 0.0;
        for k in 0..5 {
            if mask.0[k] {
                expected += alpha[k] * flows[k];
            }
        }
        let got = overall_energy(&model, &ConstituentFlowVector(flows)).unwrap();
        assert!(
            (got - expected).abs() <= 1e-12 * expected.abs().max(1.0),
            "{got} vs {expected}"
        );
        assert_eq!(predict(&model, &ConstituentFlowVector(flows)).unwrap(), got);
    }
}

#[test]
fn individual_flow_matches_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let cfg = random_probability_config(&mut rng);
        let p = random_individual(&mut rng);
        let got = individual_flow(&p, &cfg).unwrap();
        let ps = oracle_p_sense(&p, &cfg);
        let want = fixed_point(p.b_os + p.b_sec, ps);
        assert!(rel_close(got.b_individual, want, 1e-9), "{got:?} vs {want}");
        assert!(rel_close(got.b_sens, ps * want, 1e-9));
    }
}

#[test]
fn local_flow_matches_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let cfg = random_probability_config(&mut rng);
        let p = random_local(&mut rng);
        let got = local_flow(&p, &cfg).unwrap();
        let want = fixed_point(p.b_sec + p.b_mon + p.b_ohead, oracle_local_p(&p, &cfg));
        assert!(rel_close(got.b_local, want, 1e-9), "{got:?} vs {want}");
        let parts = got.b_local - (p.b_sec + p.b_mon + p.b_ohead);
        assert!((got.b_coll + got.b_ohear + got.b_idle - parts).abs() <= 1e-9 * got.b_local.max(1.0));
    }
}

#[test]
fn global_flow_matches_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let cfg = random_probability_config(&mut rng);
        let p = random_global(&mut rng);
        let r_tx = rng.random_range(1.0..60.0);
        let got = global_flow(&p, r_tx, &cfg).unwrap();
        let loss = oracle_p_pktls(&p, r_tx, &cfg);
        let want = fixed_point(p.b_sec + p.b_topo + p.b_rout + p.b_ohead, loss);
        assert!(rel_close(got.b_global, want, 1e-9), "{got:?} vs {want}");
        assert!(rel_close(got.b_pktls, loss * want, 1e-9));
    }
}

fn noisy_observations(seed: u64, m: usize, noise: f64) -> (Vec<Vec<f64>>, Vec<f64>, ObservationSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = [2e-3, 5e-4, 7e-3];
    let mut b = Vec::new();
    let mut e = Vec::new();
    let mut rows = Vec::new();
    for _ in 0..m {
        let r = [
            rng.random_range(1.0..100.0),
            rng.random_range(1.0..300.0),
            rng.random_range(0.0..80.0),
        ];
        let y: f64 = (0..3).map(|k| alpha[k] * r[k]).sum::<f64>() * (1.0 + noise * rng.random_range(-1.0..1.0));
        rows.push(ConstituentFlowVector([r[0], r[1], r[2], 0.0, 0.0]));
        b.push(r.to_vec());
        e.push(y);
    }
    let obs = ObservationSet::new(rows, e.clone(), ConstituentMask::CORE).unwrap();
    (b, e, obs)
}

#[test]
fn fit_matches_normal_equation_oracle() {
    for seed in 0..20 {
        let (b, e, obs) = noisy_observations(seed, 40, 0.1);
        let fit = fit_ls(&obs).unwrap();
        let want = normal_equations(&b, &e);
        for k in 0..3 {
            assert!(
                rel_close(fit.coefficients.alpha[k], want[k], 1e-6),
                "seed {seed}: {:?} vs {want:?}",
                fit.coefficients.alpha
            );
        }
    }
}

#[test]
fn fit_single_column_collinear() {
    let obs = ObservationSet::new(
        vec![
            ConstituentFlowVector([2.0, 0.0, 0.0, 0.0, 0.0]),
            ConstituentFlowVector([4.0, 0.0, 0.0, 0.0, 0.0]),
        ],
        vec![4.0, 8.0],
        ConstituentMask([true, false, false, false, false]),
    )
    .unwrap();
    let fit = fit_ls(&obs).unwrap();
    assert!((fit.coefficients.alpha[0] - 2.0).abs() < 1e-12);
}

#[test]
fn error_report_matches_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let n = rng.random_range(1..50);
        let obs: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..100.0)).collect();
        let pred: Vec<f64> = obs.iter().map(|o| o * rng.random_range(0.5..1.5)).collect();
        let rep = error_report(&pred, &obs).unwrap();
        let mut sum = 0.0;
        let mut max = 0.0f64;
        for i in 0..n {
            let ape = 100.0 * (pred[i] - obs[i]).abs() / obs[i];
            sum += ape;
            max = max.max(ape);
            assert!(rel_close(rep.per_slice_pct[i], ape, 1e-12));
            assert!(rel_close(rep.per_slice_abs[i], (pred[i] - obs[i]).abs(), 1e-12));
        }
        assert!(rel_close(rep.mape_pct, sum / n as f64, 1e-12));
        assert!(rel_close(rep.max_ape_pct, max, 1e-12));
    }
}

#[test]
fn error_report_single_value() {
    let rep = error_report(&[87.0], &[100.0]).unwrap();
    assert!((rep.mape_pct - 13.0).abs() < 1e-12);
}

#[test]
fn rolling_fit_tracks_doubled_global_coefficient() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let k = 40;
    let mut rows = Vec::new();
    let mut energy = Vec::new();
    for i in 0..80 {
        let r = [
            rng.random_range(1.0..10.0),
            rng.random_range(1.0..10.0),
            rng.random_range(1.0..10.0),
        ];
        let a3 = if i < k { 3e-3 } else { 6e-3 };
        energy.push(1e-3 * r[0] + 2e-3 * r[1] + a3 * r[2]);
        rows.push(ConstituentFlowVector([r[0], r[1], r[2], 0.0, 0.0]));
    }
    let obs = ObservationSet::new(rows, energy, ConstituentMask::CORE).unwrap();
    let window = 10;
    let roll = rolling_fit(&obs, window).unwrap();
    let g = Constituent::Global.index();
    for w in &roll.fits {
        let a3 = w.fit.coefficients.alpha[g];
        if w.start + window <= k {
            assert!(rel_close(a3, 3e-3, 1e-9), "window {}: {a3}", w.start);
        } else if w.start >= k {
            assert!(rel_close(a3, 6e-3, 1e-9), "window {}: {a3}", w.start);
        }
    }
}

#[test]
fn knapsack_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..200 {
        let p = random_budget_problem(&mut rng, 16);
        let s = select_tasks(&p).unwrap();
        match brute_force_best(&p) {
            None => assert!(!s.report.feasible, "case {case}"),
            Some(best) => {
                assert!(s.report.feasible, "case {case}");
                assert!(rel_close(s.report.total_importance, best, 1e-9), "case {case}");
                assert!(s.report.total_cost < p.battery, "case {case}");
                for t in p.tasks.iter().filter(|t| t.mandatory) {
                    assert!(s.order.iter().any(|o| o.task.id == t.id));
                }
            }
        }
    }
}

#[test]
fn check_constraints_matches_direct_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..500 {
        let p = random_budget_problem(&mut rng, 10);
        let sel: Vec<TaskDescriptor> = p.tasks.iter().filter(|_| rng.random_bool(0.5)).copied().collect();
        let mut e = [0.0; 5];
        for t in &sel {
            e[t.constituent.index()] += oracle_cost(t, &p.model);
            assert_eq!(task_cost(t, &p.model).unwrap(), oracle_cost(t, &p.model));
        }
        let c = check_constraints(&sel, &p.model, p.battery);
        assert_eq!(c.local_positive, e[1] > 0.0);
        assert_eq!(c.global_positive, e[2] > 0.0);
        assert_eq!(c.within_budget, e[0] + e[1] + e[2] + e[4] < p.battery);
    }
}

#[test]
fn relay_threshold_matches_bisection() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..100 {
        let p = RadioModelParams {
            e_t_elec: rng.random_range(10e-9..100e-9),
            e_r_elec: rng.random_range(10e-9..100e-9),
            eps_amp: rng.random_range(10e-12..1000e-12),
            alpha_pl: rng.random_range(1.5..4.0),
            ..RadioModelParams::default()
        };
        let gap = |d: f64| {
            let one = p.e_t_elec + p.eps_amp * d.powf(p.alpha_pl) + p.e_r_elec;
            let two = 2.0 * (p.e_t_elec + p.eps_amp * (d / 2.0).powf(p.alpha_pl)) + 2.0 * p.e_r_elec;
            one - two
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        while gap(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if gap(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = relay_threshold(&p).unwrap();
        assert!(rel_close(t, lo, 1e-9), "{t} vs {lo}");
        assert!(one_hop_cost(t * (1.0 - 1e-6), &p) < two_hop_cost(t * (1.0 - 1e-6), &p));
        assert!(one_hop_cost(t * (1.0 + 1e-6), &p) > two_hop_cost(t * (1.0 + 1e-6), &p));
    }
}

#[test]
fn default_transmit_power_is_consistent_with_radio_model() {
    let profile = ResourcePowerProfile::default();
    let radio = tx_energy_per_bit(30.0, &RadioModelParams::default()).unwrap();
    let per_packet = 1000.0 * radio;
    assert!(
        rel_close(profile.p_tx, per_packet, 0.05),
        "{} vs {per_packet}",
        profile.p_tx
    );
}

fn design_strategy() -> impl Strategy<Value = (Vec<[f64; 3]>, Vec<f64>)> {
    (6usize..30).prop_flat_map(|m| {
        (
            prop::collection::vec(prop::array::uniform3(1.0f64..100.0), m),
            prop::collection::vec(0.0f64..10.0, m),
        )
    })
}

fn to_obs(rows: &[[f64; 3]], e: &[f64]) -> ObservationSet {
    ObservationSet::new(
        rows.iter()
            .map(|r| ConstituentFlowVector([r[0], r[1], r[2], 0.0, 0.0]))
            .collect(),
        e.to_vec(),
        ConstituentMask::CORE,
    )
    .unwrap()
}

fn sse(rows: &[[f64; 3]], e: &[f64], a: &[f64; 3]) -> f64 {
    rows.iter()
        .zip(e)
        .map(|(r, y)| (y - (0..3).map(|k| a[k] * r[k]).sum::<f64>()).powi(2))
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ls_is_optimal_and_residual_orthogonal(
        (rows, e) in design_strategy(),
        delta in prop::array::uniform3(-1e-2f64..1e-2),
    ) {
        let Ok(fit) = fit_ls(&to_obs(&rows, &e)) else { return Ok(()); };
        let a = [fit.coefficients.alpha[0], fit.coefficients.alpha[1], fit.coefficients.alpha[2]];
        let best = sse(&rows, &e, &a);
        let moved = [a[0] + delta[0], a[1] + delta[1], a[2] + delta[2]];
        prop_assert!(sse(&rows, &e, &moved) >= best * (1.0 - 1e-12));

        let scale: f64 = e.iter().map(|y| y * y).sum::<f64>().sqrt();
        for k in 0..3 {
            let dot: f64 = rows.iter().zip(&fit.residuals).map(|(r, res)| r[k] * res).sum();
            let col: f64 = rows.iter().map(|r| r[k] * r[k]).sum::<f64>().sqrt();
            prop_assert!(dot.abs() <= 1e-6 * col * scale.max(1e-12));
        }
    }

    #[test]
    fn ls_is_scale_equivariant(
        (rows, e) in design_strategy(),
        c in 0.1f64..10.0,
        j in 0usize..3,
    ) {
        let Ok(base) = fit_ls(&to_obs(&rows, &e)) else { return Ok(()); };
        if base.condition > 1e6 {
            return Ok(());
        }
        let scaled_e: Vec<f64> = e.iter().map(|y| y * c).collect();
        let fit_e = fit_ls(&to_obs(&rows, &scaled_e)).unwrap();
        let mut scaled_rows = rows.clone();
        for r in &mut scaled_rows {
            r[j] *= c;
        }
        let fit_b = fit_ls(&to_obs(&scaled_rows, &e)).unwrap();
        let tol = 1e-8 * base.coefficients.alpha.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        for k in 0..3 {
            let a = base.coefficients.alpha[k];
            prop_assert!((fit_e.coefficients.alpha[k] - c * a).abs() <= c * tol);
            let want = if k == j { a / c } else { a };
            let t = if k == j { tol / c } else { tol };
            prop_assert!((fit_b.coefficients.alpha[k] - want).abs() <= t);
        }
    }

    #[test]
    fn knapsack_optimal_on_small_problems(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_budget_problem(&mut rng, 12);
        let s = select_tasks(&p).unwrap();
        match brute_force_best(&p) {
            None => prop_assert!(!s.report.feasible),
            Some(best) => {
                prop_assert!(s.report.feasible);
                prop_assert!(rel_close(s.report.total_importance, best, 1e-9));
                prop_assert!(s.report.total_cost < p.battery);
            }
        }
    }

    #[test]
    fn more_battery_never_lowers_importance(seed in any::<u64>(), extra in 0.0f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = random_budget_problem(&mut rng, 12);
        let a = select_tasks(&p).unwrap();
        p.battery += extra;
        let b = select_tasks(&p).unwrap();
        if a.report.feasible {
            prop_assert!(b.report.feasible);
            prop_assert!(b.report.total_importance >= a.report.total_importance);
        }
    }
}
