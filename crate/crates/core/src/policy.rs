//! Task selection under a residual-energy budget.
//!
//! Every mandatory task is kept; optional tasks are chosen to maximize total
//! importance while the schedule's energy stays strictly below the battery.
//! Up to [`EXACT_LIMIT`] optional tasks the choice is exact (dynamic
//! programming over the Pareto frontier of cost and importance, which needs
//! no discretization of real-valued costs); past that a density-greedy
//! heuristic is used and labeled as such.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::energy::{CoefficientVector, Constituent};
use crate::error::{Error, Result};

pub const EXACT_LIMIT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskDescriptor {
    pub id: u32,
    pub constituent: Constituent,
    /// Packets this task generates.
    pub packets: u32,
    pub importance: f64,
    #[serde(default)]
    pub mandatory: bool,
}

impl TaskDescriptor {
    pub fn validate(&self) -> Result<()> {
        if self.packets < 1 {
            return Err(Error::InvalidTask {
                task: self.id,
                reason: "packet flow must be >= 1".into(),
            });
        }
        if !(self.importance.is_finite() && self.importance > 0.0) {
            return Err(Error::InvalidTask {
                task: self.id,
                reason: format!("importance {} must be finite and > 0", self.importance),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetProblem {
    pub tasks: Vec<TaskDescriptor>,
    pub model: CoefficientVector,
    /// Residual battery, joules.
    pub battery: f64,
    /// Require a positive Local energy in every schedule.
    pub require_local: bool,
    /// Require a positive Global energy in every schedule.
    pub require_global: bool,
}

/// Energy of one task under the fitted model.
pub fn task_cost(task: &TaskDescriptor, model: &CoefficientVector) -> Result<f64> {
    task.validate()?;
    let alpha = model.get(task.constituent).ok_or_else(|| Error::InvalidTask {
        task: task.id,
        reason: format!("constituent {} is not active in the model", task.constituent),
    })?;
    let cost = alpha * f64::from(task.packets);
    if cost < 0.0 {
        return Err(Error::InvalidTask {
            task: task.id,
            reason: format!("negative cost {cost} from coefficient {alpha}"),
        });
    }
    Ok(cost)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub local_positive: bool,
    pub global_positive: bool,
    /// Individual + Local + Global + Sink energy strictly below the battery.
    pub within_budget: bool,
}

/// Energy per constituent of a selection. Inactive constituents cost nothing.
pub fn constituent_energy(selection: &[TaskDescriptor], model: &CoefficientVector) -> [f64; 5] {
    let mut e = [0.0; 5];
    for t in selection {
        let k = t.constituent.index();
        e[k] += model.alpha[k] * f64::from(t.packets);
    }
    e
}

pub fn check_constraints(selection: &[TaskDescriptor], model: &CoefficientVector, battery: f64) -> ConstraintCheck {
    let e = constituent_energy(selection, model);
    let budgeted = e[Constituent::Individual.index()]
        + e[Constituent::Local.index()]
        + e[Constituent::Global.index()]
        + e[Constituent::Sink.index()];
    ConstraintCheck {
        local_positive: e[Constituent::Local.index()] > 0.0,
        global_positive: e[Constituent::Global.index()] > 0.0,
        within_budget: budgeted < battery,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Infeasibility {
    /// No mandatory task gives the Local constituent positive energy.
    LocalNotPositive,
    /// No mandatory task gives the Global constituent positive energy.
    GlobalNotPositive,
    /// Mandatory tasks alone reach the battery.
    Budget { mandatory_cost: f64 },
}

impl Infeasibility {
    pub fn constraint(&self) -> &'static str {
        match self {
            Infeasibility::LocalNotPositive => "e_local > 0",
            Infeasibility::GlobalNotPositive => "e_global > 0",
            Infeasibility::Budget { .. } => "e_individual + e_local + e_global + e_snk < e_battery",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub method: Method,
    pub failures: Vec<Infeasibility>,
    pub total_cost: f64,
    pub total_importance: f64,
    pub slack: f64,
    pub per_constituent: [f64; 5],
    pub constraints: ConstraintCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledTask {
    pub task: TaskDescriptor,
    pub cost: f64,
}

impl ScheduledTask {
    pub fn density(&self) -> f64 {
        if self.cost == 0.0 {
            f64::INFINITY
        } else {
            self.task.importance / self.cost
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// Selected tasks in execution order; empty when infeasible.
    pub order: Vec<ScheduledTask>,
    pub report: FeasibilityReport,
}

pub fn select_tasks(problem: &BudgetProblem) -> Result<Schedule> {
    if !(problem.battery >= 0.0) {
        return Err(Error::arg("battery", problem.battery, "residual battery must be >= 0"));
    }
    let mut priced = Vec::with_capacity(problem.tasks.len());
    for t in &problem.tasks {
        priced.push(ScheduledTask {
            task: *t,
            cost: task_cost(t, &problem.model)?,
        });
    }
    priced.sort_by_key(|s| s.task.id);
    let (mandatory, optional): (Vec<_>, Vec<_>) = priced.into_iter().partition(|s| s.task.mandatory);

    let mandatory_tasks: Vec<TaskDescriptor> = mandatory.iter().map(|s| s.task).collect();
    let base = check_constraints(&mandatory_tasks, &problem.model, problem.battery);
    let mandatory_cost: f64 = mandatory.iter().map(|s| s.cost).sum();
    let mut failures = Vec::new();
    if problem.require_local && !base.local_positive {
        failures.push(Infeasibility::LocalNotPositive);
    }
    if problem.require_global && !base.global_positive {
        failures.push(Infeasibility::GlobalNotPositive);
    }
    if !(mandatory_cost < problem.battery) {
        failures.push(Infeasibility::Budget { mandatory_cost });
    }
    let method = if optional.len() <= EXACT_LIMIT {
        Method::Exact
    } else {
        Method::Heuristic
    };
    if !failures.is_empty() {
        return Ok(Schedule {
            order: Vec::new(),
            report: FeasibilityReport {
                feasible: false,
                method,
                failures,
                total_cost: mandatory_cost,
                total_importance: mandatory.iter().map(|s| s.task.importance).sum(),
                slack: problem.battery - mandatory_cost,
                per_constituent: constituent_energy(&mandatory_tasks, &problem.model),
                constraints: base,
            },
        });
    }

    let fits = |extra: f64| mandatory_cost + extra < problem.battery;
    let chosen = match method {
        Method::Exact => pareto_knapsack(&optional, fits),
        Method::Heuristic => greedy_knapsack(&optional, fits),
    };

    let mut order: Vec<ScheduledTask> = mandatory;
    order.extend(chosen.into_iter().map(|i| optional[i]));
    order.sort_by(by_density);
    let tasks: Vec<TaskDescriptor> = order.iter().map(|s| s.task).collect();
    let total_cost: f64 = order.iter().map(|s| s.cost).sum();
    Ok(Schedule {
        report: FeasibilityReport {
            feasible: true,
            method,
            failures: Vec::new(),
            total_cost,
            total_importance: order.iter().map(|s| s.task.importance).sum(),
            slack: problem.battery - total_cost,
            per_constituent: constituent_energy(&tasks, &problem.model),
            constraints: check_constraints(&tasks, &problem.model, problem.battery),
        },
        order,
    })
}

/// Descending importance per joule, lower id first on ties.
fn by_density(a: &ScheduledTask, b: &ScheduledTask) -> Ordering {
    b.density().total_cmp(&a.density()).then(a.task.id.cmp(&b.task.id))
}

#[derive(Debug, Clone, Copy)]
struct State {
    cost: f64,
    importance: f64,
    picked: u64,
}

/// Exact 0/1 knapsack for at most 64 items. Keeps only states not dominated
/// in (cost, importance); the best feasible state is the last survivor.
fn pareto_knapsack(items: &[ScheduledTask], fits: impl Fn(f64) -> bool) -> Vec<usize> {
    debug_assert!(items.len() <= EXACT_LIMIT);
    let mut frontier = vec![State {
        cost: 0.0,
        importance: 0.0,
        picked: 0,
    }];
    for (i, item) in items.iter().enumerate() {
        let mut next = frontier.clone();
        for s in &frontier {
            let cost = s.cost + item.cost;
            if fits(cost) {
                next.push(State {
                    cost,
                    importance: s.importance + item.task.importance,
                    picked: s.picked | (1u64 << i),
                });
            }
        }
        next.sort_by(|a, b| {
            a.cost
                .total_cmp(&b.cost)
                .then(b.importance.total_cmp(&a.importance))
                .then(a.picked.cmp(&b.picked))
        });
        frontier.clear();
        let mut best = f64::NEG_INFINITY;
        for s in next {
            if s.importance > best {
                best = s.importance;
                frontier.push(s);
            }
        }
    }
    let best = frontier.last().expect("empty selection always survives");
    (0..items.len()).filter(|i| best.picked & (1u64 << i) != 0).collect()
}

fn greedy_knapsack(items: &[ScheduledTask], fits: impl Fn(f64) -> bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.sort_by(|&a, &b| by_density(&items[a], &items[b]));
    let mut spent = 0.0;
    let mut out = Vec::new();
    for i in idx {
        if fits(spent + items[i].cost) {
            spent += items[i].cost;
            out.push(i);
        }
    }
    out.sort_unstable();
    out
}
