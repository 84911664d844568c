//! Independent reference implementations shared by the integration tests.
//! Nothing here calls into the library's numerical code.

#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

use rand::Rng;
use wsn_energy::energy::{CoefficientVector, Constituent, ConstituentMask};
use wsn_energy::flows::{GlobalParams, IndividualParams, LocalParams, ProbabilityModelConfig};
use wsn_energy::policy::{BudgetProblem, TaskDescriptor};

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

/// Iterates `b <- base + p * b` from zero until it stops moving.
pub fn fixed_point(base: f64, p: f64) -> f64 {
    let mut b = 0.0;
    for _ in 0..100_000 {
        let next = base + p * b;
        if (next - b).abs() <= 1e-15 * next.abs() {
            return next;
        }
        b = next;
    }
    b
}

fn clamp(p: f64, cap: f64) -> f64 {
    p.max(0.0).min(cap)
}

pub fn oracle_p_sense(p: &IndividualParams, cfg: &ProbabilityModelConfig) -> f64 {
    let s = cfg.sigma * p.r_sense.powi(2);
    clamp(s / (s + p.g_sense + 1.0), cfg.p_cap)
}

pub fn oracle_local_p(p: &LocalParams, cfg: &ProbabilityModelConfig) -> f64 {
    let n = p.n as f64;
    let coll = clamp(cfg.kappa_coll * n * p.g_tx * p.net_dens as f64, cfg.p_cap);
    let ohear = clamp(cfg.kappa_ohear * n * p.r_tx.powi(2) / cfg.area_m2, cfg.p_cap);
    let idle = clamp(cfg.kappa_idle / (n + 1.0), cfg.p_cap);
    coll + ohear + idle
}

pub fn oracle_p_pktls(p: &GlobalParams, r_tx: f64, cfg: &ProbabilityModelConfig) -> f64 {
    if p.dist_to_sink == 0.0 {
        return 0.0;
    }
    let hops = (p.dist_to_sink / r_tx).ceil() as i32;
    let per_hop = (cfg.kappa_loss / p.net_dens as f64).min(0.5);
    let mut delivered = 1.0;
    for _ in 0..hops {
        delivered *= 1.0 - per_hop;
    }
    clamp(1.0 - delivered, cfg.p_cap)
}

pub fn random_probability_config<R: Rng>(rng: &mut R) -> ProbabilityModelConfig {
    ProbabilityModelConfig {
        sigma: rng.random_range(0.0..0.05),
        kappa_coll: rng.random_range(0.0..0.2),
        kappa_ohear: rng.random_range(0.0..0.5),
        kappa_idle: rng.random_range(0.0..1.0),
        kappa_loss: rng.random_range(0.0..2.0),
        area_m2: rng.random_range(1_000.0..100_000.0),
        p_cap: rng.random_range(0.0..=0.33),
    }
}

pub fn random_individual<R: Rng>(rng: &mut R) -> IndividualParams {
    IndividualParams {
        r_sense: rng.random_range(0.1..50.0),
        g_sense: rng.random_range(0.0..10.0),
        b_os: rng.random_range(0.0..20.0),
        b_sec: rng.random_range(0.0..5.0),
        b_store: rng.random_range(0.0..5.0),
    }
}

pub fn random_local<R: Rng>(rng: &mut R) -> LocalParams {
    let r_tx = rng.random_range(1.0..60.0);
    LocalParams {
        n: rng.random_range(1..30),
        net_dens: rng.random_range(1..100),
        g_tx: rng.random_range(0.0..0.1),
        r_tx,
        d_ij: rng.random_range(0.01..=r_tx),
        idle_power: rng.random_range(0.0..1e-3),
        b_mon: rng.random_range(0.0..10.0),
        b_sec: rng.random_range(0.0..5.0),
        b_ohead: rng.random_range(0.0..5.0),
        b_retx: rng.random_range(0.0..5.0),
    }
}

pub fn random_global<R: Rng>(rng: &mut R) -> GlobalParams {
    GlobalParams {
        dist_to_sink: if rng.random_bool(0.1) {
            0.0
        } else {
            rng.random_range(0.0..200.0)
        },
        net_dens: rng.random_range(1..100),
        b_sec: rng.random_range(0.0..5.0),
        b_topo: rng.random_range(0.0..10.0),
        b_rout: rng.random_range(0.0..10.0),
        b_ohead: rng.random_range(0.0..5.0),
    }
}

/// Solves `(B^T B) a = B^T e` by Gaussian elimination with partial pivoting.
pub fn normal_equations(b: &[Vec<f64>], e: &[f64]) -> Vec<f64> {
    let n = b[0].len();
    let mut m = vec![vec![0.0; n + 1]; n];
    for (row, &y) in b.iter().zip(e) {
        for i in 0..n {
            for j in 0..n {
                m[i][j] += row[i] * row[j];
            }
            m[i][n] += row[i] * y;
        }
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        let (top, rest) = m.split_at_mut(col + 1);
        let pivot_row = &top[col];
        for row in rest {
            let f = row[col] / pivot_row[col];
            for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = m[i][n];
        for j in i + 1..n {
            s -= m[i][j] * x[j];
        }
        x[i] = s / m[i][i];
    }
    x
}

/// Per-task cost under a budget model, computed without the library.
pub fn oracle_cost(t: &TaskDescriptor, model: &CoefficientVector) -> f64 {
    model.alpha[t.constituent.index()] * t.packets as f64
}

/// Best achievable importance by enumerating every optional subset, or
/// `None` when the mandatory tasks alone violate a constraint.
pub fn brute_force_best(p: &BudgetProblem) -> Option<f64> {
    let mandatory: Vec<&TaskDescriptor> = p.tasks.iter().filter(|t| t.mandatory).collect();
    let optional: Vec<&TaskDescriptor> = p.tasks.iter().filter(|t| !t.mandatory).collect();
    let energy_of = |c: Constituent| -> f64 {
        mandatory
            .iter()
            .filter(|t| t.constituent == c)
            .map(|t| oracle_cost(t, &p.model))
            .sum()
    };
    if p.require_local && !(energy_of(Constituent::Local) > 0.0) {
        return None;
    }
    if p.require_global && !(energy_of(Constituent::Global) > 0.0) {
        return None;
    }
    let base_cost: f64 = mandatory.iter().map(|t| oracle_cost(t, &p.model)).sum();
    if !(base_cost < p.battery) {
        return None;
    }
    let base_importance: f64 = mandatory.iter().map(|t| t.importance).sum();
    let k = optional.len();
    let mut cost = vec![0.0; 1 << k];
    let mut imp = vec![0.0; 1 << k];
    let mut best = base_importance;
    for mask in 1usize..(1 << k) {
        let low = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        cost[mask] = cost[rest] + oracle_cost(optional[low], &p.model);
        imp[mask] = imp[rest] + optional[low].importance;
        if base_cost + cost[mask] < p.battery {
            best = best.max(base_importance + imp[mask]);
        }
    }
    Some(best)
}

/// Random problem over dyadic costs so that subset sums are exact and
/// battery values can sit exactly on a subset's cost.
pub fn random_budget_problem<R: Rng>(rng: &mut R, max_optional: usize) -> BudgetProblem {
    let constituents = [
        Constituent::Individual,
        Constituent::Local,
        Constituent::Global,
        Constituent::Sink,
    ];
    let mut alpha = [0.0; 5];
    for c in constituents {
        alpha[c.index()] = rng.random_range(1..=16) as f64 * 0.25;
    }
    let model = CoefficientVector::new(alpha, ConstituentMask::ALL).unwrap();
    let n_opt = rng.random_range(0..=max_optional);
    let n_mand = rng.random_range(0..=3);
    let mut tasks = Vec::new();
    for i in 0..n_opt + n_mand {
        tasks.push(TaskDescriptor {
            id: i as u32,
            constituent: constituents[rng.random_range(0..4)],
            packets: rng.random_range(1..=8),
            importance: if rng.random_bool(0.5) {
                rng.random_range(1..=20) as f64
            } else {
                rng.random_range(0.1..20.0)
            },
            mandatory: i >= n_opt,
        });
    }
    let total: f64 = tasks.iter().map(|t| oracle_cost(t, &model)).sum();
    let battery = if rng.random_bool(0.4) {
        // Exactly the cost of the mandatory set plus a random optional subset.
        tasks
            .iter()
            .filter(|t| t.mandatory || rng.random_bool(0.5))
            .map(|t| oracle_cost(t, &model))
            .sum()
    } else {
        rng.random_range(0.0..=total.max(1.0) * 1.1)
    };
    BudgetProblem {
        tasks,
        model,
        battery,
        require_local: rng.random_bool(0.3),
        require_global: rng.random_bool(0.3),
    }
}
