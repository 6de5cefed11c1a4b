//! Block coordinate descent (BCD) over the offloading volume, the edge CPU
//! allocation, the receive beamformers, the reflection coefficients and the
//! transmit powers.
//!
//! One outer iteration runs, in order: the closed-form offloading split,
//! SCA for the edge CPU (followed by a fresh split, since the split depends
//! on the allocation), the MMSE weights and receivers, the θ subproblem and
//! the p subproblem. The MMSE weights `v_k = 1/d_k` are refreshed before
//! each of the last three blocks. The θ and p blocks are convex conic
//! programs in the epigraph variable of the largest edge latency; their
//! result is kept only if the largest edge latency, evaluated with the true
//! rates, does not increase.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelSet;
use crate::compute::{self, LatencyReport, ScaError};
use crate::config::Scenario;
use crate::conic::{
    lift_complex_quadratic, restrict_real_quadratic, AffineExpr, ConvexProgram, SolveReport,
    SolveStatus, SolverSettings,
};
use crate::quadratic::QuadraticForm;
use crate::rates::{self, RateError, SignalParams};
use crate::state::{IterationRecord, IterationTrace, SolutionState, StepOutcome};
use crate::{CVector, Error, Result, C64};

/// Number of θ re-draws tried when the initial point leaves a user with a
/// zero rate.
pub const INIT_ATTEMPTS: u64 = 10;
/// Fraction of the amplification budget used by the initial θ.
pub const INIT_BUDGET_FRACTION: f64 = 0.9;
/// RNG stream of the θ initialization (0 and 1 are used by the channel
/// generator).
const INIT_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RisVariant {
    /// Amplifying RIS with its own noise and power budget.
    Active,
    /// Unit-modulus reflection, no amplification and no RIS noise.
    Passive,
}

impl RisVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            RisVariant::Active => "active",
            RisVariant::Passive => "passive",
        }
    }
}

impl fmt::Display for RisVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RisVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "active" => Ok(RisVariant::Active),
            "passive" => Ok(RisVariant::Passive),
            other => Err(Error::InvalidArgument(format!(
                "unknown RIS variant `{other}`"
            ))),
        }
    }
}

/// A subproblem that could not be solved, with the surrounding iterate
/// history.
#[derive(Debug, Error)]
#[error("{stage} failed at outer iteration {iteration}: {cause}")]
pub struct BcdError {
    pub stage: &'static str,
    pub iteration: usize,
    pub cause: String,
    pub trace: IterationTrace,
    /// The conic program that failed, for offline inspection.
    pub program: Option<Box<ConvexProgram>>,
}

/// Failure inside one block, before the trace is attached.
#[derive(Debug)]
pub enum StepFailure {
    Rate(RateError),
    Sca(ScaError),
    Solver {
        status: SolveStatus,
        program: Box<ConvexProgram>,
    },
}

impl From<RateError> for StepFailure {
    fn from(e: RateError) -> Self {
        StepFailure::Rate(e)
    }
}

impl From<ScaError> for StepFailure {
    fn from(e: ScaError) -> Self {
        StepFailure::Sca(e)
    }
}

impl From<crate::conic::ConicError> for StepFailure {
    fn from(e: crate::conic::ConicError) -> Self {
        StepFailure::Sca(ScaError::Conic(e))
    }
}

impl StepFailure {
    fn into_bcd(self, stage: &'static str, iteration: usize, trace: &IterationTrace) -> BcdError {
        let (cause, program) = match self {
            StepFailure::Rate(e) => (e.to_string(), None),
            StepFailure::Sca(ScaError::Subproblem {
                status, program, ..
            }) => (format!("SCA subproblem status {status:?}"), Some(program)),
            StepFailure::Sca(e) => (e.to_string(), None),
            StepFailure::Solver { status, program } => {
                (format!("conic solver status {status:?}"), Some(program))
            }
        };
        BcdError {
            stage,
            iteration,
            cause,
            trace: trace.clone(),
            program,
        }
    }
}

/// Inputs shared by every block of one run.
#[derive(Debug, Clone)]
pub struct Context<'a> {
    pub scenario: &'a Scenario,
    pub channels: &'a ChannelSet,
    pub variant: RisVariant,
    pub params: SignalParams,
    /// Amplification budget; `None` for a passive RIS.
    pub ris_budget_w: Option<f64>,
    pub solver: SolverSettings,
}

impl<'a> Context<'a> {
    pub fn new(
        scenario: &'a Scenario,
        channels: &'a ChannelSet,
        variant: RisVariant,
    ) -> Result<Self> {
        channels.check_dims(
            scenario.num_antennas(),
            scenario.num_elements(),
            scenario.num_users(),
        )?;
        let cfg = scenario.config();
        let (ris_noise, ris_budget_w) = match variant {
            RisVariant::Active => (cfg.ris_noise_w, Some(scenario.ris_budget_w())),
            RisVariant::Passive => {
                let cap = cfg.passive_element_cap();
                if cfg.num_elements > cap {
                    return Err(Error::PassiveElementCap {
                        elements: cfg.num_elements,
                        max_elements: cap,
                        total_power_w: cfg.total_power_w,
                    });
                }
                (0.0, None)
            }
        };
        Ok(Self {
            scenario,
            channels,
            variant,
            params: SignalParams {
                ris_noise,
                ap_noise: cfg.ap_noise_w,
                bandwidth: cfg.bandwidth_hz,
            },
            ris_budget_w,
            solver: SolverSettings::with_tol(scenario.settings().kkt_tol),
        })
    }

    pub fn rates(&self, state: &SolutionState) -> Result<Vec<f64>, RateError> {
        rates::rates(
            &state.receivers,
            &state.theta,
            &state.power,
            self.channels,
            &self.params,
        )
    }

    pub fn mses(&self, state: &SolutionState) -> Vec<f64> {
        rates::mses(
            &state.receivers,
            &state.theta,
            &state.power,
            self.channels,
            &self.params,
        )
    }

    /// Latencies with the relaxed offloading volume and the given rates.
    pub fn latency(&self, state: &SolutionState, rates: &[f64]) -> LatencyReport {
        compute::latencies(
            &state.relaxed_offload,
            &state.edge_cpu,
            rates,
            self.scenario.compute(),
        )
    }

    /// Latencies with the integer offloading volume.
    pub fn integer_latency(&self, state: &SolutionState, rates: &[f64]) -> LatencyReport {
        compute::latencies(
            &state.offload_as_f64(),
            &state.edge_cpu,
            rates,
            self.scenario.compute(),
        )
    }

    pub fn ris_power(&self, theta: &CVector, power: &[f64]) -> f64 {
        rates::ris_power(theta, power, self.channels, self.params.ris_noise)
    }

    /// Largest edge latency over users offloading a positive volume.
    pub fn max_edge_latency(&self, state: &SolutionState) -> Result<f64, RateError> {
        Ok(self.latency(state, &self.rates(state)?).max_edge())
    }
}

/// Phase-only θ with a deterministic RNG stream per attempt.
fn random_phases(m: usize, seed: u64, attempt: u64) -> CVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM + attempt);
    CVector::from_fn(m, |_, _| {
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        C64::from_polar(1.0, phi)
    })
}

/// Initial point: full transmit power, random phases with a common
/// amplitude using 90% of the amplification budget (unit modulus for a
/// passive RIS), MMSE receivers, an even CPU split and the matching
/// offloading volume.
pub fn init_solution(ctx: &Context, seed: u64) -> Result<SolutionState> {
    let cfg = ctx.scenario.config();
    let k_users = ctx.scenario.num_users();
    let m = ctx.scenario.num_elements();
    let power = vec![cfg.max_user_power_w; k_users];
    for attempt in 0..INIT_ATTEMPTS {
        let mut theta = random_phases(m, seed, attempt);
        if let Some(budget) = ctx.ris_budget_w {
            let unit_power = ctx.ris_power(&theta, &power);
            let scale = if budget > 0.0 && unit_power > 0.0 {
                (INIT_BUDGET_FRACTION * budget / unit_power).sqrt()
            } else {
                0.0
            };
            theta *= C64::new(scale, 0.0);
        }
        let receivers = rates::mmse_receivers(&theta, &power, ctx.channels, &ctx.params)?;
        let mut state = SolutionState {
            receivers,
            theta,
            power: power.clone(),
            offload_bits: vec![0; k_users],
            relaxed_offload: vec![0.0; k_users],
            edge_cpu: vec![cfg.compute.edge_cpu_total_hz / k_users as f64; k_users],
            mmse_weights: vec![1.0; k_users],
        };
        let user_rates = ctx.rates(&state)?;
        if cfg.max_user_power_w > 0.0 && user_rates.iter().any(|&r| !(r > 0.0)) {
            continue;
        }
        update_aux_v(ctx, &mut state);
        update_offload(ctx, &mut state, &user_rates);
        return Ok(state);
    }
    Err(Error::InvalidArgument(format!(
        "a user has zero rate after {INIT_ATTEMPTS} initial reflection draws"
    )))
}

/// `v_k ← 1/d_k`.
pub fn update_aux_v(ctx: &Context, state: &mut SolutionState) {
    state.mmse_weights = ctx.mses(state).into_iter().map(|d| 1.0 / d).collect();
}

/// Rescales every receiver column by the complex factor minimizing its MSE.
/// SINRs, and therefore the objective, are unchanged, while the MSE
/// becomes `1/(1+SINR)`, so the rate surrogate is tight after `v ← 1/d`.
pub fn rescale_receivers(ctx: &Context, state: &mut SolutionState) {
    let cov = rates::received_covariance(&state.theta, &state.power, ctx.channels, &ctx.params);
    for k in 0..state.receivers.ncols() {
        let f = state.receivers.column(k).into_owned();
        let energy = f.dotc(&(&cov * &f)).re;
        if !(energy > 0.0) {
            continue;
        }
        let signal = f.dotc(&rates::effective_channel(k, ctx.channels, &state.theta))
            * state.power[k].sqrt();
        let alpha = signal.conj() / energy;
        state.receivers.set_column(k, &(f * alpha));
    }
}

/// MMSE receive beamformers for the current θ and p.
pub fn update_beamformer(ctx: &Context, state: &mut SolutionState) -> Result<(), RateError> {
    state.receivers = rates::mmse_receivers(&state.theta, &state.power, ctx.channels, &ctx.params)?;
    Ok(())
}

/// Closed-form offloading split for the given rates and current CPU split.
pub fn update_offload(ctx: &Context, state: &mut SolutionState, user_rates: &[f64]) {
    for (k, task) in ctx.scenario.compute().users.iter().enumerate() {
        let (relaxed, bits) =
            compute::optimal_offload_volume(task, user_rates[k], state.edge_cpu[k]);
        state.relaxed_offload[k] = relaxed;
        state.offload_bits[k] = bits;
    }
}

/// SCA for the edge CPU warm-started at the current split.
pub fn update_edge_cpu(
    ctx: &Context,
    state: &mut SolutionState,
    user_rates: &[f64],
) -> Result<compute::ScaOutcome, ScaError> {
    let settings = ctx.scenario.settings();
    let out = compute::sca_resource_allocation(
        user_rates,
        ctx.scenario.compute(),
        &state.edge_cpu,
        settings.sca_tol,
        settings.max_sca_iters,
        &ctx.solver,
    )?;
    state.edge_cpu = out.edge_cpu.clone();
    Ok(out)
}

/// Result of one guarded block update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub outcome: StepOutcome,
    pub conic_solves: usize,
    pub max_kkt_residual: f64,
}

impl StepReport {
    fn skipped() -> Self {
        Self {
            outcome: StepOutcome::Skipped,
            conic_solves: 0,
            max_kkt_residual: 0.0,
        }
    }
}

/// Users offloading a positive volume, with their per-user constants.
struct OffloadingUser {
    k: usize,
    bits: f64,
    cycles: f64,
    edge_cpu: f64,
}

fn offloading_users(ctx: &Context, state: &SolutionState) -> Vec<OffloadingUser> {
    ctx.scenario
        .compute()
        .users
        .iter()
        .enumerate()
        .filter(|(k, _)| state.relaxed_offload[*k] > 0.0 && state.edge_cpu[*k] > 0.0)
        .map(|(k, task)| OffloadingUser {
            k,
            bits: state.relaxed_offload[k],
            cycles: task.cycles_per_bit,
            edge_cpu: state.edge_cpu[k],
        })
        .collect()
}

/// Adds, for each offloading user `j` with rate `R̄_j = offset − cost`:
/// `t_j + cost/B − offset/B ≤ 0` and
/// `t_j · (ε' − l c / (f τ)) ≥ l / (B τ)`, where `ε = τ ε'`.
fn add_rate_epigraph(
    program: &mut ConvexProgram,
    users: &[OffloadingUser],
    costs: Vec<(crate::conic::RealQuadratic, f64)>,
    eps_index: usize,
    t_offset: usize,
    tau: f64,
    bandwidth: f64,
) {
    let mut floor = 0.0f64;
    for (j, (u, (mut cost, offset))) in users.iter().zip(costs).enumerate() {
        let t = t_offset + j;
        cost.scale(1.0 / bandwidth);
        cost.lin[t] += 1.0;
        cost.constant = -offset / bandwidth;
        program.add_quadratic(cost);
        let compute_time = u.bits * u.cycles / (u.edge_cpu * tau);
        floor = floor.max(compute_time);
        program.add_rotated_cone(
            AffineExpr::var(t),
            AffineExpr::var(eps_index).plus_constant(-compute_time),
            vec![AffineExpr::constant((u.bits / (bandwidth * tau)).sqrt())],
        );
    }
    program.add_bounds(eps_index, Some(floor * (1.0 + 1e-12)), None);
}

/// The θ conic program for fixed `(F, p, v, l, f_E)`: variables
/// `[Re θ/s, Im θ/s, ε/τ, t]` with `s² Σ_m P_mm = P_aRIS`.
#[derive(Debug, Clone)]
pub struct ThetaProgram {
    pub program: ConvexProgram,
    pub scale: f64,
    /// Time unit τ of the epigraph variable.
    pub tau: f64,
    pub num_elements: usize,
}

impl ThetaProgram {
    pub fn theta(&self, x: &[f64]) -> CVector {
        let m = self.num_elements;
        CVector::from_fn(m, |i, _| C64::new(x[i], x[m + i]) * self.scale)
    }

    pub fn eps_seconds(&self, x: &[f64]) -> f64 {
        x[2 * self.num_elements] * self.tau
    }
}

/// Builds the θ program; `None` when no user offloads or the budget is 0.
pub fn theta_program(ctx: &Context, state: &SolutionState, tau: f64) -> Option<ThetaProgram> {
    let budget = ctx.ris_budget_w?;
    let users = offloading_users(ctx, state);
    if users.is_empty() || !(budget > 0.0) || !(tau > 0.0) {
        return None;
    }
    let m = ctx.scenario.num_elements();
    let tq = rates::build_theta_quadratics(
        &state.receivers,
        &state.power,
        ctx.channels,
        &state.mmse_weights,
        &ctx.params,
    );
    let total: f64 = (0..m).map(|i| tq.ris_power.quad[(i, i)].re).sum();
    if !(total > 0.0) {
        return None;
    }
    let scale = (budget / total).sqrt();
    let eps = 2 * m;
    let dim = 2 * m + 1 + users.len();
    let mut program = ConvexProgram::new(dim);
    program.set_objective(eps, 1.0);
    let mut power = lift_complex_quadratic(&tq.ris_power, 0, scale, dim);
    power.scale(1.0 / budget);
    power.constant -= 1.0;
    program.add_quadratic(power);
    let costs = users
        .iter()
        .map(|u| {
            let q = &tq.users[u.k];
            (
                lift_complex_quadratic(&q.rate_cost, 0, scale, dim),
                q.rate_offset,
            )
        })
        .collect();
    add_rate_epigraph(
        &mut program,
        &users,
        costs,
        eps,
        eps + 1,
        tau,
        ctx.params.bandwidth,
    );
    Some(ThetaProgram {
        program,
        scale,
        tau,
        num_elements: m,
    })
}

/// The p program: variables `[√p/√p_max, ε/τ, t]`.
#[derive(Debug, Clone)]
pub struct PowerProgram {
    pub program: ConvexProgram,
    pub max_power: f64,
    pub tau: f64,
    pub num_users: usize,
}

impl PowerProgram {
    pub fn power(&self, x: &[f64]) -> Vec<f64> {
        (0..self.num_users)
            .map(|k| (x[k].clamp(0.0, 1.0)).powi(2) * self.max_power)
            .collect()
    }

    pub fn eps_seconds(&self, x: &[f64]) -> f64 {
        x[self.num_users] * self.tau
    }
}

pub fn power_program(ctx: &Context, state: &SolutionState, tau: f64) -> Option<PowerProgram> {
    let p_max = ctx.scenario.config().max_user_power_w;
    let users = offloading_users(ctx, state);
    if users.is_empty() || !(p_max > 0.0) || !(tau > 0.0) {
        return None;
    }
    let k_users = ctx.scenario.num_users();
    let pq = rates::build_power_quadratics(
        &state.receivers,
        &state.theta,
        ctx.channels,
        &state.mmse_weights,
        &ctx.params,
    );
    let scale = p_max.sqrt();
    let eps = k_users;
    let dim = k_users + 1 + users.len();
    let mut program = ConvexProgram::new(dim);
    program.set_objective(eps, 1.0);
    for k in 0..k_users {
        program.add_bounds(k, Some(0.0), Some(1.0));
    }
    if let Some(budget) = ctx.ris_budget_w {
        let mut power = restrict_real_quadratic(&pq.ris_power, 0, scale, dim);
        if budget > 0.0 {
            power.scale(1.0 / budget);
            power.constant -= 1.0;
        } else {
            power.constant -= budget;
        }
        program.add_quadratic(power);
    }
    let costs = users
        .iter()
        .map(|u| {
            let q = &pq.users[u.k];
            (
                restrict_real_quadratic(&q.rate_cost, 0, scale, dim),
                q.rate_offset,
            )
        })
        .collect();
    add_rate_epigraph(
        &mut program,
        &users,
        costs,
        eps,
        eps + 1,
        tau,
        ctx.params.bandwidth,
    );
    Some(PowerProgram {
        program,
        max_power: p_max,
        tau,
        num_users: k_users,
    })
}

fn solve_checked(
    program: &ConvexProgram,
    solver: &SolverSettings,
) -> Result<SolveReport, StepFailure> {
    let report = program.solve(solver)?;
    if report.status != SolveStatus::Optimal {
        return Err(StepFailure::Solver {
            status: report.status,
            program: Box::new(program.clone()),
        });
    }
    Ok(report)
}

/// Keeps `candidate` if the largest edge latency does not increase.
fn guarded(
    ctx: &Context,
    state: &mut SolutionState,
    candidate: SolutionState,
    before: f64,
) -> Result<StepOutcome, RateError> {
    let after = ctx.max_edge_latency(&candidate)?;
    if after <= before {
        *state = candidate;
        Ok(StepOutcome::Accepted)
    } else {
        Ok(StepOutcome::Rejected)
    }
}

/// θ block. Active RIS: conic program with the amplification budget.
/// Passive RIS: unit-modulus coordinate descent.
pub fn update_theta(ctx: &Context, state: &mut SolutionState) -> Result<StepReport, StepFailure> {
    if ctx.variant == RisVariant::Passive {
        return passive_theta_step(ctx, state);
    }
    if ctx.ris_budget_w == Some(0.0) {
        state.theta.fill(C64::new(0.0, 0.0));
        return Ok(StepReport::skipped());
    }
    let before = ctx.max_edge_latency(state)?;
    let Some(tp) = theta_program(ctx, state, before) else {
        return Ok(StepReport::skipped());
    };
    let report = solve_checked(&tp.program, &ctx.solver)?;
    let mut theta = tp.theta(&report.x);
    let budget = ctx.ris_budget_w.expect("active variant has a budget");
    let used = ctx.ris_power(&theta, &state.power);
    if used > budget {
        theta *= C64::new((budget / used).sqrt(), 0.0);
    }
    let mut candidate = state.clone();
    candidate.theta = theta;
    let outcome = guarded(ctx, state, candidate, before)?;
    Ok(StepReport {
        outcome,
        conic_solves: 1,
        max_kkt_residual: report.kkt_residual(),
    })
}

/// p block: conic program over `√p` with boxes and the amplification budget.
pub fn update_power(ctx: &Context, state: &mut SolutionState) -> Result<StepReport, StepFailure> {
    let before = ctx.max_edge_latency(state)?;
    let Some(pp) = power_program(ctx, state, before) else {
        return Ok(StepReport::skipped());
    };
    let report = solve_checked(&pp.program, &ctx.solver)?;
    let mut power = pp.power(&report.x);
    if let Some(budget) = ctx.ris_budget_w {
        let noise_part = ctx.ris_power(&state.theta, &vec![0.0; power.len()]);
        let used = ctx.ris_power(&state.theta, &power);
        if used > budget {
            let signal = used - noise_part;
            let factor = if signal > 0.0 {
                ((budget - noise_part) / signal).max(0.0)
            } else {
                0.0
            };
            power.iter_mut().for_each(|p| *p *= factor);
        }
    }
    let mut candidate = state.clone();
    candidate.power = power;
    let outcome = guarded(ctx, state, candidate, before)?;
    Ok(StepReport {
        outcome,
        conic_solves: 1,
        max_kkt_residual: report.kkt_residual(),
    })
}

/// Weighted sum `Σ ω_k d_k(θ)` as a single form.
fn weighted_mse_form(forms: &[&QuadraticForm], weights: &[f64]) -> QuadraticForm {
    let m = forms[0].dim();
    let mut out = QuadraticForm::zeros(m);
    for (f, &w) in forms.iter().zip(weights) {
        out.quad += f.quad.map(|v| v * w);
        out.lin += f.lin.map(|v| v * w);
        out.constant += f.constant * w;
    }
    out
}

/// Coordinate descent over unit-modulus `θ` for `θᴴQθ + 2Re{linᴴθ} + c`:
/// each element is set to `−b_m/|b_m|`, its exact minimizer with the others
/// fixed. Returns the final point and the objective after every sweep.
pub fn unit_modulus_descent(
    form: &QuadraticForm,
    start: &CVector,
    max_sweeps: usize,
    tol: f64,
) -> (CVector, Vec<f64>) {
    let m = form.dim();
    let mut theta = start.map(|t| {
        if t.norm() > 0.0 {
            t / t.norm()
        } else {
            C64::new(1.0, 0.0)
        }
    });
    let mut history = vec![form.eval(&theta)];
    for _ in 0..max_sweeps {
        for i in 0..m {
            let mut b = form.lin[i];
            for j in 0..m {
                if j != i {
                    b += form.quad[(i, j)] * theta[j];
                }
            }
            let nb = b.norm();
            if nb > 0.0 {
                theta[i] = -b / nb;
            }
        }
        let value = form.eval(&theta);
        let prev = *history.last().expect("history is never empty");
        history.push(value);
        if (prev - value).abs() <= tol * prev.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    (theta, history)
}

/// Unit-modulus θ aligning every reflected path of user `k` with its
/// direct path at receiver `f_k`.
fn aligned_phases(ctx: &Context, state: &SolutionState, k: usize) -> CVector {
    let f = state.receivers.column(k).into_owned();
    let direct = f.dotc(&ctx.channels.user_to_ap[k]);
    let u = ctx.channels.ris_to_ap.adjoint() * &f;
    let h = &ctx.channels.user_to_ris[k];
    CVector::from_fn(ctx.scenario.num_elements(), |m, _| {
        let path = u[m].conj() * h[m];
        let phase = direct.arg() - path.arg();
        C64::from_polar(1.0, phase)
    })
}

fn passive_theta_step(ctx: &Context, state: &mut SolutionState) -> Result<StepReport, StepFailure> {
    let users = offloading_users(ctx, state);
    if users.is_empty() {
        return Ok(StepReport::skipped());
    }
    let user_rates = ctx.rates(state)?;
    let lat = ctx.latency(state, &user_rates);
    let before = lat.max_edge();
    let tq = rates::build_theta_quadratics(
        &state.receivers,
        &state.power,
        ctx.channels,
        &state.mmse_weights,
        &ctx.params,
    );
    // sensitivity of l/R to the MSE, normalized
    let mut weights: Vec<f64> = users
        .iter()
        .map(|u| state.mmse_weights[u.k] * u.bits / user_rates[u.k].powi(2))
        .collect();
    let top = weights.iter().cloned().fold(0.0, f64::max);
    if !(top > 0.0) || !top.is_finite() {
        return Ok(StepReport::skipped());
    }
    weights.iter_mut().for_each(|w| *w /= top);
    let forms: Vec<&QuadraticForm> = users.iter().map(|u| &tq.users[u.k].mse).collect();
    let surrogate = weighted_mse_form(&forms, &weights);
    let bottleneck = users
        .iter()
        .max_by(|a, b| lat.users[a.k].edge.total_cmp(&lat.users[b.k].edge))
        .expect("nonempty")
        .k;
    let aligned = aligned_phases(ctx, state, bottleneck);
    let start = if surrogate.eval(&aligned) < surrogate.eval(&state.theta) {
        aligned
    } else {
        state.theta.clone()
    };
    let (theta, _) = unit_modulus_descent(&surrogate, &start, 200, 1e-10);
    let mut candidate = state.clone();
    candidate.theta = theta;
    let outcome = guarded(ctx, state, candidate, before)?;
    Ok(StepReport {
        outcome,
        conic_solves: 0,
        max_kkt_residual: 0.0,
    })
}

/// Final state of a run.
#[derive(Debug, Clone)]
pub struct BcdOutput {
    pub variant: RisVariant,
    pub state: SolutionState,
    pub trace: IterationTrace,
    pub rates: Vec<f64>,
    /// Latencies with the integer offloading volume.
    pub latency: LatencyReport,
}

impl BcdOutput {
    /// Final maximum computational latency with integer offloading.
    pub fn mcl(&self) -> f64 {
        self.latency.mcl
    }
}

/// Runs BCD from the default initialization for `variant`.
pub fn bcd_solve(
    scenario: &Scenario,
    channels: &ChannelSet,
    variant: RisVariant,
) -> Result<BcdOutput> {
    let ctx = Context::new(scenario, channels, variant)?;
    let init = init_solution(&ctx, scenario.config().rng_seed)?;
    bcd_solve_from(&ctx, init)
}

fn record(
    ctx: &Context,
    state: &SolutionState,
    iter: usize,
    user_rates: &[f64],
    started: Instant,
) -> IterationRecord {
    let lat = ctx.latency(state, user_rates);
    IterationRecord {
        iter,
        mcl: lat.mcl,
        local_latency: lat.local(),
        edge_latency: lat.edge(),
        eps: lat.max_edge(),
        ris_power_w: ctx.ris_power(&state.theta, &state.power),
        sca_iterations: 0,
        theta_step: StepOutcome::Skipped,
        power_step: StepOutcome::Skipped,
        conic_solves: 0,
        max_kkt_residual: 0.0,
        elapsed_s: started.elapsed().as_secs_f64(),
    }
}

fn fail(e: StepFailure, stage: &'static str, iteration: usize, trace: &IterationTrace) -> Error {
    e.into_bcd(stage, iteration, trace).into()
}

/// Runs BCD from `state`.
pub fn bcd_solve_from(ctx: &Context, mut state: SolutionState) -> Result<BcdOutput> {
    let started = Instant::now();
    let settings = ctx.scenario.settings().clone();
    let fixed_power = settings.fixed_power || ctx.scenario.config().max_user_power_w == 0.0;
    let mut trace = IterationTrace::default();

    let user_rates = ctx
        .rates(&state)
        .map_err(|e| StepFailure::from(e).into_bcd("rate evaluation", 0, &trace))?;
    update_offload(ctx, &mut state, &user_rates);
    trace
        .records
        .push(record(ctx, &state, 0, &user_rates, started));
    let mut previous = trace.records[0].mcl;

    for iter in 1..=settings.max_outer_iters {
        let user_rates = ctx
            .rates(&state)
            .map_err(|e| fail(e.into(), "rate evaluation", iter, &trace))?;
        update_offload(ctx, &mut state, &user_rates);
        let sca = update_edge_cpu(ctx, &mut state, &user_rates)
            .map_err(|e| fail(e.into(), "edge CPU allocation", iter, &trace))?;
        update_offload(ctx, &mut state, &user_rates);

        update_aux_v(ctx, &mut state);
        update_beamformer(ctx, &mut state)
            .map_err(|e| fail(e.into(), "receive beamforming", iter, &trace))?;

        update_aux_v(ctx, &mut state);
        let theta_step = update_theta(ctx, &mut state)
            .map_err(|e| fail(e, "reflection design", iter, &trace))?;

        let power_step = if fixed_power {
            StepReport::skipped()
        } else {
            // F is MMSE for the previous θ; rescaling restores R̃ = R at the
            // current point without changing any SINR
            rescale_receivers(ctx, &mut state);
            update_aux_v(ctx, &mut state);
            update_power(ctx, &mut state).map_err(|e| fail(e, "power control", iter, &trace))?
        };

        let user_rates = ctx
            .rates(&state)
            .map_err(|e| fail(e.into(), "rate evaluation", iter, &trace))?;
        // without re-balancing, T_L pins the max at the old split and a better
        // rate does not show up in the stopping test
        update_offload(ctx, &mut state, &user_rates);
        let mut rec = record(ctx, &state, iter, &user_rates, started);
        rec.sca_iterations = sca.iterations;
        rec.theta_step = theta_step.outcome;
        rec.power_step = power_step.outcome;
        rec.conic_solves = sca.conic_solves + theta_step.conic_solves + power_step.conic_solves;
        rec.max_kkt_residual = sca
            .max_kkt_residual
            .max(theta_step.max_kkt_residual)
            .max(power_step.max_kkt_residual);
        let current = rec.mcl;
        trace.records.push(rec);
        let change = if previous > 0.0 {
            (previous - current).abs() / previous
        } else {
            0.0
        };
        previous = current;
        if change < settings.outer_tol {
            trace.converged = true;
            break;
        }
    }

    let user_rates = ctx.rates(&state).map_err(|e| {
        StepFailure::from(e).into_bcd("rate evaluation", trace.iterations(), &trace)
    })?;
    update_offload(ctx, &mut state, &user_rates);
    let latency = ctx.integer_latency(&state, &user_rates);
    Ok(BcdOutput {
        variant: ctx.variant,
        state,
        trace,
        rates: user_rates,
        latency,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel;
    use crate::config::ScenarioConfig;
    use crate::state::check_constraints;

    fn scenario(m: usize) -> Scenario {
        let mut cfg = ScenarioConfig::baseline();
        cfg.num_elements = m;
        cfg.validate().unwrap()
    }

    #[test]
    fn initialization_uses_ninety_percent_of_the_budget() {
        let sc = scenario(8);
        let (_, ch) = channel::draw(sc.config(), 3).unwrap();
        let ctx = Context::new(&sc, &ch, RisVariant::Active).unwrap();
        let a = init_solution(&ctx, 3).unwrap();
        let used = ctx.ris_power(&a.theta, &a.power);
        assert!((used - 0.9 * sc.ris_budget_w()).abs() <= 1e-9 * sc.ris_budget_w());
        let b = init_solution(&ctx, 3).unwrap();
        assert_eq!(a, b);
        let bad = check_constraints(&sc, &ch, &a, ctx.ris_budget_w, ctx.params.ris_noise, 1e-9);
        assert!(bad.is_empty(), "{bad:?}");
    }

    #[test]
    fn weights_are_inverse_mse() {
        let sc = scenario(4);
        let (_, ch) = channel::draw(sc.config(), 5).unwrap();
        let ctx = Context::new(&sc, &ch, RisVariant::Active).unwrap();
        let mut s = init_solution(&ctx, 5).unwrap();
        update_aux_v(&ctx, &mut s);
        let d = ctx.mses(&s);
        for k in 0..3 {
            assert!((s.mmse_weights[k] * d[k] - 1.0).abs() < 1e-12);
            let r = rates::mmse_rate(s.mmse_weights[k], d[k], sc.bandwidth()).unwrap();
            assert!((r + sc.bandwidth() * d[k].log2()).abs() <= 1e-9 * r.abs());
        }
    }

    #[test]
    fn zero_budget_forces_zero_reflection() {
        let sc = scenario(4).with_ris_budget(0.0);
        let (_, ch) = channel::draw(sc.config(), 1).unwrap();
        let out = bcd_solve(&sc, &ch, RisVariant::Active).unwrap();
        assert!(out.state.theta.iter().all(|t| t.norm() == 0.0));
    }

    #[test]
    fn zero_power_cap_keeps_everything_local() {
        let sc = scenario(4).with_max_user_power(0.0);
        let (_, ch) = channel::draw(sc.config(), 1).unwrap();
        let out = bcd_solve(&sc, &ch, RisVariant::Active).unwrap();
        assert!(out.state.power.iter().all(|&p| p == 0.0));
        assert!(out.state.offload_bits.iter().all(|&l| l == 0));
    }

    #[test]
    fn one_pass_with_zero_tolerance() {
        let mut cfg = ScenarioConfig::baseline();
        cfg.num_elements = 8;
        cfg.algorithm.outer_tol = 0.0;
        cfg.algorithm.max_outer_iters = 1;
        let sc = cfg.validate().unwrap();
        let (_, ch) = channel::draw(sc.config(), 2).unwrap();
        let out = bcd_solve(&sc, &ch, RisVariant::Active).unwrap();
        assert_eq!(out.trace.iterations(), 1);
        assert_eq!(out.trace.records.len(), 2);
        let bad = check_constraints(&sc, &ch, &out.state, Some(sc.ris_budget_w()), 1e-10, 1e-8);
        assert!(bad.is_empty(), "{bad:?}");
    }

    #[test]
    fn trace_is_monotone_and_feasible() {
        let sc = scenario(16);
        let (_, ch) = channel::draw(sc.config(), 11).unwrap();
        let out = bcd_solve(&sc, &ch, RisVariant::Active).unwrap();
        assert!(out.trace.is_monotone(1e-9), "{:?}", out.trace.objective());
        assert!(out.trace.converged);
        let bad = check_constraints(&sc, &ch, &out.state, Some(sc.ris_budget_w()), 1e-10, 1e-8);
        assert!(bad.is_empty(), "{bad:?}");
    }

    #[test]
    fn passive_run_keeps_unit_modulus() {
        let sc = scenario(8);
        let (_, ch) = channel::draw(sc.config(), 4).unwrap();
        let out = bcd_solve(&sc, &ch, RisVariant::Passive).unwrap();
        assert!(out
            .state
            .theta
            .iter()
            .all(|t| (t.norm() - 1.0).abs() < 1e-12));
        assert!(out.trace.is_monotone(1e-9));
    }

    #[test]
    fn passive_cap_is_enforced() {
        let mut cfg = ScenarioConfig::baseline();
        cfg.num_elements = 100;
        cfg.ris_budget_override_w = Some(10e-3);
        let sc = cfg.validate().unwrap();
        let (_, ch) = channel::draw(sc.config(), 4).unwrap();
        assert!(matches!(
            Context::new(&sc, &ch, RisVariant::Passive),
            Err(Error::PassiveElementCap {
                max_elements: 99,
                ..
            })
        ));
    }

    #[test]
    fn coordinate_steps_never_increase_the_surrogate() {
        let mut rng = crate::testutil::rng(9);
        for _ in 0..20 {
            let m = 6;
            let a = crate::CMatrix::from_fn(m, m, |_, _| crate::testutil::random_c64(&mut rng));
            let q = &a * a.adjoint();
            let form = QuadraticForm::new(q, crate::testutil::random_cvec(&mut rng, m), 0.0);
            let start = crate::testutil::random_cvec(&mut rng, m);
            let (theta, history) = unit_modulus_descent(&form, &start, 100, 1e-12);
            for w in history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
            }
            assert!(theta.iter().all(|t| (t.norm() - 1.0).abs() < 1e-12));
        }
    }
}
