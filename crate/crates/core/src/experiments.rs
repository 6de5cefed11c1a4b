//! Monte-Carlo studies: convergence traces, MCL versus the number of
//! elements and MCL versus the RIS position, plus 2-bit phase quantization.
//!
//! Every CSV starts with a `# aris-mec <kind> v1` line followed by a header
//! row. Runs execute in parallel and rows come out in job order.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::bcd::{self, BcdOutput, Context, RisVariant};
use crate::channel::{self, ChannelSet};
use crate::compute;
use crate::config::{Scenario, ScenarioConfig};
use crate::rates;
use crate::state::{fmt_f64, IterationTrace};
use crate::{CVector, Error, Result, C64};

pub const CSV_SCHEMA_VERSION: u32 = 1;

/// Default element counts of the convergence study.
pub const CONVERGENCE_ELEMENTS: [usize; 3] = [8, 16, 32];
/// Amplification budget used by the convergence study.
pub const CONVERGENCE_BUDGET_W: f64 = 10e-3;
pub const SWEEP_ELEMENTS: [usize; 5] = [4, 8, 12, 16, 20];
pub const SWEEP_TOTAL_POWER_W: [f64; 2] = [10e-3, 20e-3];
pub const SWEEP_RIS_X_M: [f64; 7] = [160.0, 180.0, 200.0, 220.0, 240.0, 260.0, 280.0];
pub const DEFAULT_SEEDS: u64 = 20;

/// Variants compared in the sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Active,
    /// Continuous active design with phases snapped to 2 bits afterwards.
    #[serde(rename = "active-2bit")]
    Active2Bit,
    Passive,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Active, Variant::Active2Bit, Variant::Passive];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Active => "active",
            Variant::Active2Bit => "active-2bit",
            Variant::Passive => "passive",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant `{s}`")))
    }
}

/// Snaps each phase to the nearest of `levels` uniformly spaced phases
/// starting at 0; ties go to the smaller phase. Amplitudes are kept.
pub fn quantize_phases(theta: &CVector, levels: usize) -> Result<CVector> {
    if levels < 2 {
        return Err(Error::InvalidArgument(format!(
            "phase quantization needs at least 2 levels, got {levels}"
        )));
    }
    let step = 2.0 * PI / levels as f64;
    Ok(theta.map(|t| {
        let phase = t.arg().rem_euclid(2.0 * PI);
        let q = phase / step;
        let idx = if q - q.floor() > 0.5 {
            q.ceil()
        } else {
            q.floor()
        } as usize
            % levels;
        C64::from_polar(t.norm(), idx as f64 * step)
    }))
}

/// Quantizes θ to 2 bits and rescales it uniformly if the amplification
/// budget is exceeded.
pub fn quantize_feasible(ctx: &Context, theta: &CVector, power: &[f64]) -> Result<CVector> {
    let mut q = quantize_phases(theta, 4)?;
    if let Some(budget) = ctx.ris_budget_w {
        let used = ctx.ris_power(&q, power);
        if used > budget {
            q *= C64::new((budget / used).sqrt(), 0.0);
        }
    }
    Ok(q)
}

/// Re-evaluates a converged active design with 2-bit phases. The receivers
/// and the offloading split are recomputed; the CPU split and powers stay.
pub fn quantized_output(ctx: &Context, out: &BcdOutput) -> Result<BcdOutput> {
    let mut state = out.state.clone();
    state.theta = quantize_feasible(ctx, &out.state.theta, &out.state.power)?;
    bcd::update_beamformer(ctx, &mut state)?;
    bcd::update_aux_v(ctx, &mut state);
    let user_rates = ctx.rates(&state)?;
    bcd::update_offload(ctx, &mut state, &user_rates);
    let latency = ctx.integer_latency(&state, &user_rates);
    Ok(BcdOutput {
        variant: out.variant,
        state,
        trace: out.trace.clone(),
        rates: user_rates,
        latency,
    })
}

/// Solves one drop with the given variant.
pub fn solve_variant(
    scenario: &Scenario,
    channels: &ChannelSet,
    variant: Variant,
) -> Result<BcdOutput> {
    match variant {
        Variant::Active => bcd::bcd_solve(scenario, channels, RisVariant::Active),
        Variant::Passive => bcd::bcd_solve(scenario, channels, RisVariant::Passive),
        Variant::Active2Bit => {
            let out = bcd::bcd_solve(scenario, channels, RisVariant::Active)?;
            let ctx = Context::new(scenario, channels, RisVariant::Active)?;
            quantized_output(&ctx, &out)
        }
    }
}

/// Config copy for one Monte-Carlo drop.
fn drop_config(base: &ScenarioConfig, seed: u64) -> ScenarioConfig {
    let mut cfg = base.clone();
    cfg.rng_seed = seed;
    cfg
}

fn solve_drop(cfg: ScenarioConfig, variant: Variant) -> Result<BcdOutput> {
    let scenario = cfg.validate()?;
    let (_, channels) = channel::draw(scenario.config(), scenario.config().rng_seed)?;
    solve_variant(&scenario, &channels, variant)
}

#[derive(Debug, Clone)]
pub struct ConvergenceRun {
    pub m: usize,
    pub seed: u64,
    pub trace: IterationTrace,
}

/// Convergence traces with the amplification budget fixed to
/// [`CONVERGENCE_BUDGET_W`].
pub fn run_convergence(
    base: &ScenarioConfig,
    m_list: &[usize],
    seeds: &[u64],
) -> Result<Vec<ConvergenceRun>> {
    let jobs: Vec<(usize, u64)> = m_list
        .iter()
        .flat_map(|&m| seeds.iter().map(move |&s| (m, s)))
        .collect();
    jobs.into_par_iter()
        .map(|(m, seed)| {
            let mut cfg = drop_config(base, seed);
            cfg.num_elements = m;
            cfg.ris_budget_override_w = Some(CONVERGENCE_BUDGET_W);
            let out = solve_drop(cfg, Variant::Active)?;
            Ok(ConvergenceRun {
                m,
                seed,
                trace: out.trace,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepMRow {
    pub variant: Variant,
    pub m: usize,
    pub p_tot_w: f64,
    pub seed: u64,
    pub mcl_s: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Largest KKT residual over every conic solve of the run.
    pub max_kkt_residual: f64,
    /// Largest relative MCL increase between iterations.
    pub worst_increase: f64,
}

/// Final MCL per (variant, M, P_tot, seed); the active budget follows from
/// P_tot and M.
pub fn sweep_m(
    base: &ScenarioConfig,
    m_list: &[usize],
    p_tot_list: &[f64],
    seeds: &[u64],
    variants: &[Variant],
) -> Result<Vec<SweepMRow>> {
    let mut jobs = Vec::new();
    for &variant in variants {
        for &m in m_list {
            for &p_tot in p_tot_list {
                for &seed in seeds {
                    jobs.push((variant, m, p_tot, seed));
                }
            }
        }
    }
    jobs.into_par_iter()
        .map(|(variant, m, p_tot, seed)| {
            let mut cfg = drop_config(base, seed);
            cfg.num_elements = m;
            cfg.total_power_w = p_tot;
            cfg.ris_budget_override_w = None;
            let out = solve_drop(cfg, variant)?;
            Ok(SweepMRow {
                variant,
                m,
                p_tot_w: p_tot,
                seed,
                mcl_s: out.mcl(),
                converged: out.trace.converged,
                iterations: out.trace.iterations(),
                max_kkt_residual: max_kkt(&out.trace),
                worst_increase: out.trace.worst_increase(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepLocRow {
    pub variant: Variant,
    pub x_ris_m: f64,
    pub p_tot_w: f64,
    pub seed: u64,
    pub mcl_s: f64,
    /// Per-user latency `max(T_L, T_E)`.
    pub user_latency_s: Vec<f64>,
    pub converged: bool,
    pub max_kkt_residual: f64,
    pub worst_increase: f64,
}

/// Final MCL and per-user latencies per (variant, x_RIS, seed). User drops
/// depend only on the seed, so every RIS position sees the same users.
pub fn sweep_location(
    base: &ScenarioConfig,
    x_list: &[f64],
    seeds: &[u64],
    variants: &[Variant],
) -> Result<Vec<SweepLocRow>> {
    let mut jobs = Vec::new();
    for &variant in variants {
        for &x in x_list {
            for &seed in seeds {
                jobs.push((variant, x, seed));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(variant, x, seed)| {
            let mut cfg = drop_config(base, seed);
            cfg.positions.ris[0] = x;
            let p_tot = cfg.total_power_w;
            let out = solve_drop(cfg, variant)?;
            Ok(SweepLocRow {
                variant,
                x_ris_m: x,
                p_tot_w: p_tot,
                seed,
                mcl_s: out.mcl(),
                user_latency_s: out.latency.totals(),
                converged: out.trace.converged,
                max_kkt_residual: max_kkt(&out.trace),
                worst_increase: out.trace.worst_increase(),
            })
        })
        .collect()
}

/// Largest KKT residual recorded in a trace.
pub fn max_kkt(trace: &IterationTrace) -> f64 {
    trace
        .records
        .iter()
        .map(|r| r.max_kkt_residual)
        .fold(0.0, f64::max)
}

fn csv_writer<W: Write>(mut out: W, kind: &str) -> Result<csv::Writer<W>> {
    writeln!(out, "# aris-mec {kind} v{CSV_SCHEMA_VERSION}")?;
    Ok(csv::Writer::from_writer(out))
}

/// Columns `m, seed, iter, mcl_s, T_L_1..K, T_E_1..K, eps, ris_power_W`.
pub fn write_convergence_csv<W: Write>(
    out: W,
    runs: &[ConvergenceRun],
    num_users: usize,
) -> Result<()> {
    let mut w = csv_writer(out, "convergence")?;
    let mut header = vec!["m".to_string(), "seed".to_string()];
    header.extend(IterationTrace::csv_header(num_users));
    w.write_record(&header)?;
    for run in runs {
        for rec in &run.trace.records {
            let mut row = vec![run.m.to_string(), run.seed.to_string()];
            row.extend(IterationTrace::csv_row(rec));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Columns `variant, m, p_tot_W, seed, mcl_s, converged, iterations`.
pub fn write_sweep_m_csv<W: Write>(out: W, rows: &[SweepMRow]) -> Result<()> {
    let mut w = csv_writer(out, "sweep-m")?;
    w.write_record([
        "variant",
        "m",
        "p_tot_W",
        "seed",
        "mcl_s",
        "converged",
        "iterations",
    ])?;
    for r in rows {
        w.write_record([
            r.variant.as_str().to_string(),
            r.m.to_string(),
            fmt_f64(r.p_tot_w),
            r.seed.to_string(),
            fmt_f64(r.mcl_s),
            r.converged.to_string(),
            r.iterations.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `variant, x_ris_m, p_tot_W, seed, mcl_s, converged, T_1..K`.
pub fn write_sweep_loc_csv<W: Write>(out: W, rows: &[SweepLocRow], num_users: usize) -> Result<()> {
    let mut w = csv_writer(out, "sweep-loc")?;
    let mut header: Vec<String> = [
        "variant",
        "x_ris_m",
        "p_tot_W",
        "seed",
        "mcl_s",
        "converged",
    ]
    .map(String::from)
    .to_vec();
    header.extend((1..=num_users).map(|k| format!("T_{k}")));
    w.write_record(&header)?;
    for r in rows {
        let mut row = vec![
            r.variant.as_str().to_string(),
            fmt_f64(r.x_ris_m),
            fmt_f64(r.p_tot_w),
            r.seed.to_string(),
            fmt_f64(r.mcl_s),
            r.converged.to_string(),
        ];
        row.extend(r.user_latency_s.iter().map(|v| fmt_f64(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean of `value` over rows grouped by `key`, in first-seen key order.
pub fn group_means<T, K: PartialEq + Clone>(
    rows: &[T],
    key: impl Fn(&T) -> K,
    value: impl Fn(&T) -> f64,
) -> Vec<(K, f64)> {
    let mut groups: Vec<(K, f64, usize)> = Vec::new();
    for r in rows {
        let k = key(r);
        match groups.iter_mut().find(|g| g.0 == k) {
            Some(g) => {
                g.1 += value(r);
                g.2 += 1;
            }
            None => groups.push((k, value(r), 1)),
        }
    }
    groups
        .into_iter()
        .map(|(k, s, n)| (k, s / n as f64))
        .collect()
}

/// Checks a finished state against every constraint of its variant.
pub fn replay_violations(
    scenario: &Scenario,
    channels: &ChannelSet,
    out: &BcdOutput,
    tol: f64,
) -> Result<Vec<crate::state::Violation>> {
    let ctx = Context::new(scenario, channels, out.variant)?;
    let mut bad = crate::state::check_constraints(
        scenario,
        channels,
        &out.state,
        ctx.ris_budget_w,
        ctx.params.ris_noise,
        tol,
    );
    let user_rates = rates::rates(
        &out.state.receivers,
        &out.state.theta,
        &out.state.power,
        channels,
        &ctx.params,
    )?;
    let report = compute::latencies(
        &out.state.offload_as_f64(),
        &out.state.edge_cpu,
        &user_rates,
        scenario.compute(),
    );
    if (report.mcl - out.mcl()).abs() > tol * out.mcl() {
        bad.push(crate::state::Violation {
            constraint: "replayed MCL",
            index: None,
            excess: (report.mcl - out.mcl()).abs(),
        });
    }
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization_levels_and_ties() {
        let theta = CVector::from_vec(vec![
            C64::from_polar(1.0, 0.3),
            C64::from_polar(2.0, PI / 4.0),
            C64::from_polar(1.0, 3.0 * PI / 4.0 + 1e-9),
            C64::from_polar(1.0, -0.1),
            C64::from_polar(1.0, 7.0 * PI / 4.0),
        ]);
        let q = quantize_phases(&theta, 4).unwrap();
        let expect = [0.0, 0.0, PI, 0.0, 1.5 * PI];
        for (m, e) in expect.iter().enumerate() {
            let got = q[m].arg().rem_euclid(2.0 * PI);
            assert!(
                (got - e).abs() < 1e-12 || (got - e).abs() > 2.0 * PI - 1e-12,
                "{m}: {got}"
            );
            assert!((q[m].norm() - theta[m].norm()).abs() < 1e-12);
        }
        assert!(quantize_phases(&theta, 1).is_err());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
    }

    #[test]
    fn empty_sweep_writes_only_the_header() {
        let rows = sweep_m(
            &ScenarioConfig::baseline(),
            &[],
            &[10e-3],
            &[0],
            &Variant::ALL,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_sweep_m_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "# aris-mec sweep-m v1\nvariant,m,p_tot_W,seed,mcl_s,converged,iterations\n"
        );
    }

    #[test]
    fn group_means_keep_first_seen_order() {
        let rows = [(2, 1.0), (1, 3.0), (2, 3.0)];
        let g = group_means(&rows, |r| r.0, |r| r.1);
        assert_eq!(g, vec![(2, 2.0), (1, 3.0)]);
    }
}
