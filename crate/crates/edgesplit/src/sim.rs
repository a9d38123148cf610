//! Round simulation and strategy comparison.
//!
//! The simulator replays one training round as an ordered event timeline per
//! device: for every batch a local forward pass, the activation upload, the
//! server's forward and backward passes, the gradient download and the local
//! backward pass, then one weight sync at the end of the round. Devices do
//! not interact (the server is assumed uncontended), so each device's
//! completion time is an event-ordered refinement of the analytic model and
//! must match it.
//!
//! Four strategies are supported:
//!
//! * `edgesplit` — cuts and shares from the alternating solver;
//! * `splitfed` — one uniform mid-network cut, equal shares;
//! * `fedavg` — full local training, equal shares, weight sync only;
//! * `adaptive-fl` — full local training, but shares from the min-max
//!   bandwidth solver applied to full-model sync traffic.

use crate::cost::{self, DeviceRound, RoundBreakdown};
use crate::profiles::FleetProfile;
use crate::sched::{self, Schedule, SolveError, SolveOptions};
use serde::{Deserialize, Serialize};

/// Relative tolerance for simulator vs analytic agreement.
pub const SIM_ANALYTIC_REL_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Cost(#[from] cost::CostError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// How a round is scheduled and executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "edgesplit")]
    EdgeSplit,
    #[serde(rename = "splitfed")]
    SplitFed,
    #[serde(rename = "fedavg")]
    FedAvg,
    #[serde(rename = "adaptive-fl")]
    AdaptiveFl,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::FedAvg,
        Strategy::AdaptiveFl,
        Strategy::SplitFed,
        Strategy::EdgeSplit,
    ];

    /// Whether devices offload a layer suffix to the server. When false the
    /// full model is trained locally and only weights cross the link.
    pub fn is_split(self) -> bool {
        matches!(self, Strategy::EdgeSplit | Strategy::SplitFed)
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Strategy::EdgeSplit => "edgesplit",
            Strategy::SplitFed => "splitfed",
            Strategy::FedAvg => "fedavg",
            Strategy::AdaptiveFl => "adaptive-fl",
        };
        f.write_str(name)
    }
}

/// Full-local-training coefficients: compute is the whole model on the
/// device, traffic is the weight sync alone.
fn local_coefficients(fleet: &FleetProfile) -> (Vec<f64>, Vec<f64>) {
    let b = fleet.batches_per_round as f64;
    let n = fleet.num_cuts();
    let a = fleet
        .devices
        .iter()
        .map(|dev| b * (dev.fwd_time[n - 1] + dev.bwd_time[n - 1]))
        .collect();
    let c_sync = fleet.model.cum_param_bits[n - 1] as f64 * cost::ROUND_TRIP_FACTOR;
    let c = vec![c_sync; fleet.num_devices()];
    (a, c)
}

fn comm_time(bits: f64, bps: f64) -> f64 {
    if bits == 0.0 {
        0.0
    } else {
        bits / bps
    }
}

/// Turn a strategy into a concrete cut/share assignment for this fleet.
///
/// The objective stored in the schedule is the analytic makespan under the
/// strategy's own execution model: the cost table for split strategies, the
/// full-local coefficients for the others (their cut is pinned to N, the
/// whole model).
pub fn resolve_strategy(
    fleet: &FleetProfile,
    strategy: Strategy,
    options: &SolveOptions,
) -> Result<Schedule, SimError> {
    let m = fleet.num_devices();
    let n = fleet.num_cuts();
    let budget = fleet.total_bandwidth_bps;
    let equal = vec![budget / m as f64; m];
    let schedule = match strategy {
        Strategy::EdgeSplit => {
            let table = cost::build_cost_table(fleet);
            sched::solve(&table, budget, options)?.schedule
        }
        Strategy::SplitFed => {
            let table = cost::build_cost_table(fleet);
            let cuts = vec![(n / 2).max(1); m];
            let objective_s = table.makespan_s(&cuts, &equal);
            Schedule {
                cuts,
                bandwidth_bps: equal,
                objective_s,
            }
        }
        Strategy::FedAvg => {
            let (a, c) = local_coefficients(fleet);
            let objective_s = a
                .iter()
                .zip(&c)
                .zip(&equal)
                .map(|((&ai, &ci), &si)| ai + comm_time(ci, si))
                .fold(0.0, f64::max);
            Schedule {
                cuts: vec![n; m],
                bandwidth_bps: equal,
                objective_s,
            }
        }
        Strategy::AdaptiveFl => {
            let (a, c) = local_coefficients(fleet);
            let (shares, objective_s) = sched::min_max_bandwidth(&a, &c, budget)?;
            Schedule {
                cuts: vec![n; m],
                bandwidth_bps: shares,
                objective_s,
            }
        }
    };
    Ok(schedule)
}

/// Analytic per-device breakdown under a strategy's execution model.
pub fn strategy_breakdown(
    fleet: &FleetProfile,
    schedule: &Schedule,
    strategy: Strategy,
) -> Result<RoundBreakdown, SimError> {
    if strategy.is_split() {
        return Ok(cost::round_time(fleet, schedule)?);
    }
    check_local_feasible(fleet, schedule)?;
    let b = fleet.batches_per_round as f64;
    let n = fleet.num_cuts();
    let sync_bits = fleet.model.cum_param_bits[n - 1] as f64 * cost::ROUND_TRIP_FACTOR;
    let devices: Vec<DeviceRound> = fleet
        .devices
        .iter()
        .zip(&schedule.bandwidth_bps)
        .map(|(dev, &bps)| {
            let forward_s = dev.fwd_time[n - 1];
            let backward_s = dev.bwd_time[n - 1];
            let weight_comm_s = comm_time(sync_bits, bps);
            DeviceRound {
                device_id: dev.device_id.clone(),
                cut: n,
                bandwidth_bps: bps,
                forward_s,
                backward_s,
                activation_comm_s: 0.0,
                weight_comm_s,
                round_s: b * (forward_s + backward_s) + weight_comm_s,
            }
        })
        .collect();
    let makespan_s = devices.iter().map(|d| d.round_s).fold(0.0, f64::max);
    Ok(RoundBreakdown {
        devices,
        makespan_s,
    })
}

fn check_local_feasible(fleet: &FleetProfile, schedule: &Schedule) -> Result<(), SimError> {
    let m = fleet.num_devices();
    if schedule.bandwidth_bps.len() != m {
        return Err(cost::CostError::Infeasible(format!(
            "schedule covers {} shares for {m} devices",
            schedule.bandwidth_bps.len()
        ))
        .into());
    }
    let n = fleet.num_cuts();
    let sync_bits = fleet.model.cum_param_bits[n - 1] as f64 * cost::ROUND_TRIP_FACTOR;
    for (i, &bps) in schedule.bandwidth_bps.iter().enumerate() {
        if !bps.is_finite() || bps < 0.0 || (bps == 0.0 && sync_bits > 0.0) {
            return Err(cost::CostError::Infeasible(format!(
                "device {i} bandwidth {bps} bps cannot carry the weight sync"
            ))
            .into());
        }
    }
    let total: f64 = schedule.bandwidth_bps.iter().sum();
    let budget = fleet.total_bandwidth_bps;
    if total > budget * (1.0 + cost::FEASIBILITY_REL_TOL) {
        return Err(cost::CostError::Infeasible(format!(
            "allocated bandwidth {total} bps exceeds budget {budget} bps"
        ))
        .into());
    }
    Ok(())
}

/// One step in a device's timeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    LocalForward,
    ActivationUpload,
    ServerCompute,
    GradientDownload,
    LocalBackward,
    WeightUpload,
    WeightDownload,
}

impl std::fmt::Display for EventKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            EventKind::LocalForward => "local-forward",
            EventKind::ActivationUpload => "activation-upload",
            EventKind::ServerCompute => "server-compute",
            EventKind::GradientDownload => "gradient-download",
            EventKind::LocalBackward => "local-backward",
            EventKind::WeightUpload => "weight-upload",
            EventKind::WeightDownload => "weight-download",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub kind: EventKind,
    /// Batch number (0-based) for per-batch events; absent for weight sync.
    pub batch: Option<u64>,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceTimeline {
    pub device_id: String,
    pub cut: usize,
    pub events: Vec<SimEvent>,
    pub completion_s: f64,
}

/// Event timelines for every device in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTimeline {
    pub strategy: Strategy,
    pub devices: Vec<DeviceTimeline>,
    pub makespan_s: f64,
    /// Makespan of the analytic model, for the agreement check.
    pub analytic_makespan_s: f64,
}

/// Replay one round event by event.
///
/// Per-device completion agrees with [`strategy_breakdown`] to within
/// [`SIM_ANALYTIC_REL_TOL`] relative; the timeline orders events strictly
/// (forward, upload, server, download, backward per batch, batches in
/// sequence, weight sync last).
pub fn simulate_round(
    fleet: &FleetProfile,
    schedule: &Schedule,
    strategy: Strategy,
) -> Result<SimTimeline, SimError> {
    let analytic = strategy_breakdown(fleet, schedule, strategy)?;
    let b = fleet.batches_per_round;
    let n = fleet.num_cuts();
    let mut devices = Vec::with_capacity(fleet.num_devices());
    for (i, dev) in fleet.devices.iter().enumerate() {
        let bps = schedule.bandwidth_bps[i];
        let (cut, fwd_s, bwd_s, srv_s, act_bits, sync_bits) = if strategy.is_split() {
            let j = schedule.cuts[i] - 1;
            let srv = fleet.server_for(i);
            (
                j + 1,
                dev.fwd_time[j],
                dev.bwd_time[j],
                srv.fwd_time[j] + srv.bwd_time[j],
                fleet.model.activation_bits[j] as f64,
                fleet.model.cum_param_bits[j] as f64,
            )
        } else {
            (
                n,
                dev.fwd_time[n - 1],
                dev.bwd_time[n - 1],
                0.0,
                0.0,
                fleet.model.cum_param_bits[n - 1] as f64,
            )
        };

        let mut events = Vec::new();
        let mut t = 0.0f64;
        let push = |events: &mut Vec<SimEvent>, kind, batch, t: &mut f64, dur: f64| {
            let start = *t;
            *t += dur;
            events.push(SimEvent {
                kind,
                batch,
                start_s: start,
                end_s: *t,
            });
        };
        for batch in 0..b {
            push(&mut events, EventKind::LocalForward, Some(batch), &mut t, fwd_s);
            if strategy.is_split() {
                push(
                    &mut events,
                    EventKind::ActivationUpload,
                    Some(batch),
                    &mut t,
                    comm_time(act_bits, bps),
                );
                push(&mut events, EventKind::ServerCompute, Some(batch), &mut t, srv_s);
                push(
                    &mut events,
                    EventKind::GradientDownload,
                    Some(batch),
                    &mut t,
                    comm_time(act_bits, bps),
                );
            }
            push(&mut events, EventKind::LocalBackward, Some(batch), &mut t, bwd_s);
        }
        push(
            &mut events,
            EventKind::WeightUpload,
            None,
            &mut t,
            comm_time(sync_bits, bps),
        );
        push(
            &mut events,
            EventKind::WeightDownload,
            None,
            &mut t,
            comm_time(sync_bits, bps),
        );

        let expected = analytic.devices[i].round_s;
        debug_assert!(
            (t - expected).abs() <= SIM_ANALYTIC_REL_TOL * expected.max(1e-12),
            "device {i}: simulated {t} vs analytic {expected}"
        );
        devices.push(DeviceTimeline {
            device_id: dev.device_id.clone(),
            cut,
            events,
            completion_s: t,
        });
    }
    let makespan_s = devices.iter().map(|d| d.completion_s).fold(0.0, f64::max);
    Ok(SimTimeline {
        strategy,
        devices,
        makespan_s,
        analytic_makespan_s: analytic.makespan_s,
    })
}

/// One strategy's results across an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRun {
    pub strategy: Strategy,
    pub cuts: Vec<usize>,
    pub bandwidth_bps: Vec<f64>,
    pub round_makespans_s: Vec<f64>,
    pub mean_makespan_s: f64,
    /// FedAvg mean makespan divided by this strategy's mean makespan.
    pub acceleration_vs_fedavg: f64,
}

/// Per-strategy comparison over a number of rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rounds: u64,
    pub runs: Vec<StrategyRun>,
}

impl ComparisonReport {
    pub fn run(&self, strategy: Strategy) -> Option<&StrategyRun> {
        self.runs.iter().find(|r| r.strategy == strategy)
    }

    /// One CSV row per strategy per round. List-valued fields use `;` as the
    /// inner separator so the row stays plain CSV.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("strategy,round,makespan_s,acceleration_vs_fedavg,cuts,bandwidth_bps\n");
        for run in &self.runs {
            for (round, makespan) in run.round_makespans_s.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    run.strategy,
                    round + 1,
                    makespan,
                    run.acceleration_vs_fedavg,
                    join_semicolon(run.cuts.iter()),
                    join_semicolon(run.bandwidth_bps.iter()),
                ));
            }
        }
        out
    }
}

fn join_semicolon<T: std::fmt::Display>(items: impl Iterator<Item = T>) -> String {
    items
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

/// Simulate every requested strategy for `rounds` rounds and report makespans
/// and acceleration ratios against FedAvg.
///
/// Profiles are static, so rounds are deterministic repeats; FedAvg is always
/// simulated internally as the ratio baseline even when it is not in
/// `strategies`.
pub fn run_experiment(
    fleet: &FleetProfile,
    strategies: &[Strategy],
    rounds: u64,
    options: &SolveOptions,
) -> Result<ComparisonReport, SimError> {
    assert!(rounds >= 1, "at least one round");
    let fedavg_schedule = resolve_strategy(fleet, Strategy::FedAvg, options)?;
    let fedavg_mean = simulate_round(fleet, &fedavg_schedule, Strategy::FedAvg)?.makespan_s;

    let mut runs = Vec::with_capacity(strategies.len());
    for &strategy in strategies {
        let schedule = resolve_strategy(fleet, strategy, options)?;
        let mut round_makespans_s = Vec::with_capacity(rounds as usize);
        for _ in 0..rounds {
            let timeline = simulate_round(fleet, &schedule, strategy)?;
            round_makespans_s.push(timeline.makespan_s);
        }
        let mean_makespan_s = round_makespans_s.iter().sum::<f64>() / rounds as f64;
        runs.push(StrategyRun {
            strategy,
            cuts: schedule.cuts.clone(),
            bandwidth_bps: schedule.bandwidth_bps.clone(),
            round_makespans_s,
            mean_makespan_s,
            acceleration_vs_fedavg: fedavg_mean / mean_makespan_s,
        });
    }
    Ok(ComparisonReport { rounds, runs })
}
