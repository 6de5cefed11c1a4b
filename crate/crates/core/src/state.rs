//! Decision variables, feasibility re-checks and the per-iteration trace.

use std::io::Write;

use serde::Serialize;

use crate::channel::ChannelSet;
use crate::config::Scenario;
use crate::rates::ris_power;
use crate::{CMatrix, CVector};

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionState {
    /// Receive beamformers, one column per user (N×K).
    pub receivers: CMatrix,
    /// Reflection coefficients θ (M).
    pub theta: CVector,
    /// Transmit powers in watts.
    pub power: Vec<f64>,
    /// Integer offloaded bits.
    pub offload_bits: Vec<u64>,
    /// Continuous offloading volume used inside the BCD loop.
    pub relaxed_offload: Vec<f64>,
    /// Edge CPU allocation in cycles/s.
    pub edge_cpu: Vec<f64>,
    /// MMSE weights v_k.
    pub mmse_weights: Vec<f64>,
}

impl SolutionState {
    pub fn num_users(&self) -> usize {
        self.power.len()
    }

    pub fn offload_as_f64(&self) -> Vec<f64> {
        self.offload_bits.iter().map(|&l| l as f64).collect()
    }
}

/// Constraint that failed a re-check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub constraint: &'static str,
    pub index: Option<usize>,
    pub excess: f64,
}

/// Re-checks the box, integrality, CPU and amplification constraints.
/// `tol` is relative to the magnitude of each bound. `ris_noise` is σ² as
/// seen by the RIS variant being checked and `ris_budget_w` its budget;
/// pass `None` to skip the amplification check (passive RIS).
pub fn check_constraints(
    scenario: &Scenario,
    channels: &ChannelSet,
    state: &SolutionState,
    ris_budget_w: Option<f64>,
    ris_noise: f64,
    tol: f64,
) -> Vec<Violation> {
    let cfg = scenario.config();
    let mut out = Vec::new();
    let p_max = cfg.max_user_power_w;
    for (k, &p) in state.power.iter().enumerate() {
        if !(p >= -tol * p_max.max(f64::MIN_POSITIVE)) || p > p_max * (1.0 + tol) {
            out.push(Violation {
                constraint: "transmit power box",
                index: Some(k),
                excess: if p > p_max { p - p_max } else { -p },
            });
        }
    }
    for (k, (&l, task)) in state
        .offload_bits
        .iter()
        .zip(&cfg.compute.users)
        .enumerate()
    {
        if l > task.task_bits {
            out.push(Violation {
                constraint: "offloading volume",
                index: Some(k),
                excess: (l - task.task_bits) as f64,
            });
        }
    }
    for (k, (&l, task)) in state
        .relaxed_offload
        .iter()
        .zip(&cfg.compute.users)
        .enumerate()
    {
        let cap = task.task_bits as f64;
        if !(l >= -tol * cap) || l > cap * (1.0 + tol) {
            out.push(Violation {
                constraint: "relaxed offloading volume",
                index: Some(k),
                excess: if l > cap { l - cap } else { -l },
            });
        }
    }
    let f_tot = cfg.compute.edge_cpu_total_hz;
    for (k, &f) in state.edge_cpu.iter().enumerate() {
        if !(f >= -tol * f_tot) {
            out.push(Violation {
                constraint: "edge CPU nonnegativity",
                index: Some(k),
                excess: -f,
            });
        }
    }
    let sum: f64 = state.edge_cpu.iter().sum();
    if sum > f_tot * (1.0 + tol) {
        out.push(Violation {
            constraint: "edge CPU budget",
            index: None,
            excess: sum - f_tot,
        });
    }
    if let Some(budget) = ris_budget_w {
        let used = ris_power(&state.theta, &state.power, channels, ris_noise);
        if used > budget * (1.0 + tol) + tol * f64::MIN_POSITIVE {
            out.push(Violation {
                constraint: "RIS amplification power",
                index: None,
                excess: used - budget,
            });
        }
    }
    out
}

/// Outcome of one subproblem solve inside an outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOutcome {
    Accepted,
    /// The solve succeeded but did not improve the block objective.
    Rejected,
    /// The block was not updated (e.g. fixed transmit power).
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Maximum computational latency in seconds.
    pub mcl: f64,
    pub local_latency: Vec<f64>,
    pub edge_latency: Vec<f64>,
    /// Largest edge latency, the transmission-design epigraph variable.
    pub eps: f64,
    pub ris_power_w: f64,
    pub sca_iterations: usize,
    pub theta_step: StepOutcome,
    pub power_step: StepOutcome,
    pub conic_solves: usize,
    /// Worst KKT residual over the Optimal conic solves of this iteration.
    pub max_kkt_residual: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
}

impl IterationTrace {
    pub fn objective(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mcl).collect()
    }

    /// Number of outer iterations run (the initial record is iteration 0).
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iter)
    }

    /// Largest relative increase between consecutive objective values.
    pub fn worst_increase(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| (w[1].mcl - w[0].mcl) / w[0].mcl)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_monotone(&self, rel_tol: f64) -> bool {
        self.records
            .windows(2)
            .all(|w| w[1].mcl <= w[0].mcl * (1.0 + rel_tol))
    }

    /// First iteration whose relative change falls below `tol`.
    pub fn first_converged_iteration(&self, tol: f64) -> Option<usize> {
        self.records
            .windows(2)
            .find_map(|w| ((w[0].mcl - w[1].mcl).abs() / w[0].mcl < tol).then_some(w[1].iter))
    }

    pub fn csv_header(num_users: usize) -> Vec<String> {
        let mut cols = vec!["iter".to_string(), "mcl_s".to_string()];
        cols.extend((1..=num_users).map(|k| format!("T_L_{k}")));
        cols.extend((1..=num_users).map(|k| format!("T_E_{k}")));
        cols.push("eps".into());
        cols.push("ris_power_W".into());
        cols
    }

    pub fn csv_row(record: &IterationRecord) -> Vec<String> {
        let mut row = vec![record.iter.to_string(), fmt_f64(record.mcl)];
        row.extend(record.local_latency.iter().map(|v| fmt_f64(*v)));
        row.extend(record.edge_latency.iter().map(|v| fmt_f64(*v)));
        row.push(fmt_f64(record.eps));
        row.push(fmt_f64(record.ris_power_w));
        row
    }

    /// Writes `iter, mcl_s, T_L_1..K, T_E_1..K, eps, ris_power_W`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let k = self.records.first().map_or(0, |r| r.local_latency.len());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::csv_header(k))?;
        for r in &self.records {
            w.write_record(Self::csv_row(r))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip formatting, stable across runs.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}
