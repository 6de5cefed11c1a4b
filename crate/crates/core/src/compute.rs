//! Latency model, the closed-form offloading split and the successive
//! convex approximation (SCA) of the edge CPU allocation.

use serde::Serialize;

use crate::config::{ComputeProfile, UserTask};
use crate::conic::{AffineExpr, ConicError, ConvexProgram, SolveStatus, SolverSettings};

/// Latency of one user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UserLatency {
    /// Local computing latency T_L in seconds.
    pub local: f64,
    /// Offloading plus edge computing latency T_E in seconds.
    pub edge: f64,
    /// max(T_L, T_E).
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyReport {
    pub users: Vec<UserLatency>,
    /// Maximum computational latency over users.
    pub mcl: f64,
    /// Users that offload bits over a zero rate or to zero edge CPU; their
    /// edge latency is `f64::INFINITY`.
    pub infinite: Vec<usize>,
}

impl LatencyReport {
    pub fn local(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.local).collect()
    }

    pub fn edge(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.edge).collect()
    }

    pub fn totals(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.total).collect()
    }

    pub fn max_edge(&self) -> f64 {
        self.users.iter().map(|u| u.edge).fold(0.0, f64::max)
    }
}

pub fn local_latency(task: &UserTask, offload: f64) -> f64 {
    (task.task_bits as f64 - offload) * task.cycles_per_bit / task.local_cpu_hz
}

/// Offloading plus edge latency; `+∞` when `offload > 0` and either the
/// rate or the edge CPU is zero.
pub fn edge_latency(task: &UserTask, offload: f64, rate: f64, edge_cpu: f64) -> f64 {
    if offload <= 0.0 {
        return 0.0;
    }
    if rate <= 0.0 || edge_cpu <= 0.0 {
        return f64::INFINITY;
    }
    offload / rate + offload * task.cycles_per_bit / edge_cpu
}

pub fn user_latency(task: &UserTask, offload: f64, rate: f64, edge_cpu: f64) -> UserLatency {
    let local = local_latency(task, offload);
    let edge = edge_latency(task, offload, rate, edge_cpu);
    UserLatency {
        local,
        edge,
        total: local.max(edge),
    }
}

pub fn latencies(
    offload: &[f64],
    edge_cpu: &[f64],
    rates: &[f64],
    profile: &ComputeProfile,
) -> LatencyReport {
    let users: Vec<UserLatency> = profile
        .users
        .iter()
        .enumerate()
        .map(|(k, task)| user_latency(task, offload[k], rates[k], edge_cpu[k]))
        .collect();
    let infinite = users
        .iter()
        .enumerate()
        .filter(|(_, u)| u.edge.is_infinite())
        .map(|(k, _)| k)
        .collect();
    let mcl = users.iter().map(|u| u.total).fold(0.0, f64::max);
    LatencyReport {
        users,
        mcl,
        infinite,
    }
}

/// Continuous offloading volume at which local and edge latency coincide,
/// the minimizer of `max(T_L, T_E)` over `[0, L]`.
pub fn relaxed_offload(task: &UserTask, rate: f64, edge_cpu: f64) -> f64 {
    if rate <= 0.0 || edge_cpu <= 0.0 {
        return 0.0;
    }
    let (l, c, fl) = (
        task.task_bits as f64,
        task.cycles_per_bit,
        task.local_cpu_hz,
    );
    let value = l * c * rate * edge_cpu / (fl * edge_cpu + c * rate * (fl + edge_cpu));
    value.clamp(0.0, l)
}

/// Relaxed volume and its integer rounding: whichever of floor and ceiling
/// gives the smaller latency, floor on ties.
pub fn optimal_offload_volume(task: &UserTask, rate: f64, edge_cpu: f64) -> (f64, u64) {
    let relaxed = relaxed_offload(task, rate, edge_cpu);
    let lo = (relaxed.floor() as u64).min(task.task_bits);
    let hi = (relaxed.ceil() as u64).min(task.task_bits);
    let t_lo = user_latency(task, lo as f64, rate, edge_cpu).total;
    let t_hi = user_latency(task, hi as f64, rate, edge_cpu).total;
    let chosen = if t_hi < t_lo { hi } else { lo };
    (relaxed, chosen)
}

/// Latency reached when the offloading volume is set to
/// [`relaxed_offload`]: `(L c f + L c² R) / (f_L f + c R (f_L + f))`.
pub fn balanced_latency(task: &UserTask, rate: f64, edge_cpu: f64) -> f64 {
    let (l, c, fl) = (
        task.task_bits as f64,
        task.cycles_per_bit,
        task.local_cpu_hz,
    );
    if rate <= 0.0 || edge_cpu <= 0.0 {
        return l * c / fl;
    }
    (l * c * edge_cpu + l * c * c * rate) / (fl * edge_cpu + c * rate * (fl + edge_cpu))
}

/// Largest [`balanced_latency`] over users.
pub fn balanced_mcl(rates: &[f64], edge_cpu: &[f64], profile: &ComputeProfile) -> f64 {
    profile
        .users
        .iter()
        .enumerate()
        .map(|(k, t)| balanced_latency(t, rates[k], edge_cpu[k]))
        .fold(0.0, f64::max)
}

/// `g(f) = c R f_L / f + f_L + c R`, the convex right-hand side of the
/// hyperbolic constraint on the first auxiliary.
pub fn sca_g(task: &UserTask, rate: f64, edge_cpu: f64) -> f64 {
    let (c, fl) = (task.cycles_per_bit, task.local_cpu_hz);
    c * rate * fl / edge_cpu + fl + c * rate
}

/// First-order expansion of [`sca_g`] around `anchor`.
pub fn sca_h(task: &UserTask, rate: f64, edge_cpu: f64, anchor: f64) -> f64 {
    let (c, fl) = (task.cycles_per_bit, task.local_cpu_hz);
    let crf = c * rate * fl;
    crf / anchor - crf / (anchor * anchor) * (edge_cpu - anchor) + fl + c * rate
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaOutcome {
    pub edge_cpu: Vec<f64>,
    /// Objective at the start point followed by every accepted iterate.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub conic_solves: usize,
    pub max_kkt_residual: f64,
}

impl ScaOutcome {
    pub fn objective(&self) -> f64 {
        *self
            .objective_history
            .last()
            .expect("history is never empty")
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScaError {
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error("SCA subproblem ended with status {status:?} at iteration {iteration}")]
    Subproblem {
        status: SolveStatus,
        iteration: usize,
        program: Box<ConvexProgram>,
    },
    #[error("invalid SCA input: {0}")]
    InvalidInput(String),
}

/// Builds the convex surrogate around `anchor`. Variables: `η'`, then
/// `y_k = f_k / f_tot`, `a'_k`, `b'_k`, with times divided by `time_scale`.
pub fn sca_program(
    rates: &[f64],
    profile: &ComputeProfile,
    anchor: &[f64],
    time_scale: f64,
) -> ConvexProgram {
    let k_users = profile.users.len();
    let f_tot = profile.edge_cpu_total_hz;
    let eta = 0;
    let y = |k: usize| 1 + k;
    let a = |k: usize| 1 + k_users + k;
    let b = |k: usize| 1 + 2 * k_users + k;
    let mut p = ConvexProgram::new(1 + 3 * k_users);
    p.set_objective(eta, 1.0);
    for (k, task) in profile.users.iter().enumerate() {
        let (l, c, fl) = (
            task.task_bits as f64,
            task.cycles_per_bit,
            task.local_cpu_hz,
        );
        let r = rates[k];
        p.add_linear(vec![(a(k), 1.0), (b(k), 1.0), (eta, -1.0)], 0.0);
        p.add_bounds(y(k), Some(0.0), None);
        if r <= 0.0 {
            // nothing is offloaded: the latency is the local one
            p.add_bounds(a(k), Some(l * c / (fl * time_scale)), None);
            p.add_bounds(b(k), Some(0.0), None);
            continue;
        }
        let crf = c * r * fl;
        let fr = anchor[k];
        // a' · h(f | f_r) τ / (L c) ≥ 1
        let unit = time_scale / (l * c);
        let h_const = (2.0 * crf / fr + fl + c * r) * unit;
        let h_slope = -crf / (fr * fr) * f_tot * unit;
        p.add_rotated_cone(
            AffineExpr::var(a(k)),
            AffineExpr::term(y(k), h_slope).plus_constant(h_const),
            vec![AffineExpr::constant(1.0)],
        );
        // b' · ((f_L + c R) f + c R f_L) τ / (L c² R) ≥ 1
        let unit_b = time_scale / (l * c * c * r);
        p.add_rotated_cone(
            AffineExpr::var(b(k)),
            AffineExpr::term(y(k), (fl + c * r) * f_tot * unit_b).plus_constant(crf * unit_b),
            vec![AffineExpr::constant(1.0)],
        );
    }
    p.add_linear((0..k_users).map(|k| (y(k), 1.0)).collect(), 1.0);
    p
}

/// Edge CPU allocation minimizing [`balanced_mcl`] by SCA from `start`.
/// Stops when the relative objective change drops below `tol` or after
/// `max_iter` surrogate solves. An iterate that does not lower the true
/// objective is discarded and ends the loop.
pub fn sca_resource_allocation(
    rates: &[f64],
    profile: &ComputeProfile,
    start: &[f64],
    tol: f64,
    max_iter: usize,
    solver: &SolverSettings,
) -> Result<ScaOutcome, ScaError> {
    let k_users = profile.users.len();
    let f_tot = profile.edge_cpu_total_hz;
    if rates.len() != k_users || start.len() != k_users {
        return Err(ScaError::InvalidInput("dimension mismatch".into()));
    }
    let sum: f64 = start.iter().sum();
    let usable = start.iter().all(|&f| f.is_finite() && f >= 0.0)
        && sum <= f_tot * (1.0 + 1e-12)
        && (0..k_users).all(|k| rates[k] <= 0.0 || start[k] > 0.0);
    let mut f: Vec<f64> = if usable {
        start.to_vec()
    } else {
        vec![f_tot / k_users as f64; k_users]
    };
    let mut current = balanced_mcl(rates, &f, profile);
    let mut out = ScaOutcome {
        edge_cpu: f.clone(),
        objective_history: vec![current],
        iterations: 0,
        converged: false,
        conic_solves: 0,
        max_kkt_residual: 0.0,
    };
    if k_users == 0 || current == 0.0 {
        out.converged = true;
        return Ok(out);
    }
    for iteration in 1..=max_iter {
        for (k, task) in profile.users.iter().enumerate() {
            if rates[k] > 0.0 {
                let g = sca_g(task, rates[k], f[k]);
                let h = sca_h(task, rates[k], f[k], f[k]);
                assert!(
                    (g - h).abs() <= 1e-12 * g.abs(),
                    "surrogate is not tight at its anchor"
                );
            }
        }
        let program = sca_program(rates, profile, &f, current);
        let report = program.solve(solver)?;
        out.conic_solves += 1;
        out.iterations = iteration;
        if report.status != SolveStatus::Optimal {
            return Err(ScaError::Subproblem {
                status: report.status,
                iteration,
                program: Box::new(program),
            });
        }
        out.max_kkt_residual = out.max_kkt_residual.max(report.kkt_residual());
        let mut next: Vec<f64> = (0..k_users)
            .map(|k| report.x[1 + k].max(0.0) * f_tot)
            .collect();
        let total: f64 = next.iter().sum();
        if total > f_tot {
            next.iter_mut().for_each(|v| *v *= f_tot / total);
        }
        let value = balanced_mcl(rates, &next, profile);
        if value > current {
            out.converged = true;
            break;
        }
        let change = (current - value) / current;
        f = next;
        current = value;
        out.edge_cpu = f.clone();
        out.objective_history.push(value);
        if change < tol {
            out.converged = true;
            break;
        }
    }
    Ok(out)
}
