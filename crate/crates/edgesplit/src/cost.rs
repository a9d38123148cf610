//! The analytic per-round time model.
//!
//! A training round for a device cut at layer `j` with bandwidth share `B_i`
//! runs `b` batch cycles (local forward, activation upload, server forward
//! and backward, gradient download, local backward) followed by one weight
//! sync (upload the local sub-model, download the aggregate). Both transfer
//! terms carry a factor of two: activations go up and same-sized gradients
//! come down, and weights are both received and sent.
//!
//! Collecting compute and traffic separately gives the round time the closed
//! form `A[i][j] + C[j] / B_i`, with `A[i][j]` the compute seconds of device
//! and server over all batches and `C[j]` the total bits crossing the link.
//! `build_cost_table` precomputes those coefficients; `round_time` evaluates
//! the step-by-step composition and checks the two forms agree.

use crate::profiles::FleetProfile;
use crate::sched::Schedule;
use serde::{Deserialize, Serialize};

/// Both transfer terms move their payload twice (up and down).
pub const ROUND_TRIP_FACTOR: f64 = 2.0;

/// Slack accepted on the bandwidth budget, to absorb solver rounding.
pub const FEASIBILITY_REL_TOL: f64 = 1e-9;

/// Relative tolerance for the internal agreement check between the
/// step-by-step round time and the `A + C/B` form.
pub const FORM_AGREEMENT_REL_TOL: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum CostError {
    #[error("infeasible schedule: {0}")]
    Infeasible(String),
}

/// Precomputed coefficients of the simplified round-time form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    /// `a[i][j-1]`: compute seconds for device `i` cut at layer `j`, all
    /// batches included.
    pub a: Vec<Vec<f64>>,
    /// `c[j-1]`: bits crossing the device's link for a round cut at `j`.
    pub c: Vec<f64>,
}

impl CostTable {
    pub fn num_devices(&self) -> usize {
        self.a.len()
    }

    pub fn num_cuts(&self) -> usize {
        self.c.len()
    }

    /// Round time of device `i` cut at 1-based layer `cut` with bandwidth
    /// `bps`. Zero traffic needs no link, so it is free even at zero
    /// bandwidth.
    pub fn device_round_s(&self, device_idx: usize, cut: usize, bps: f64) -> f64 {
        let c = self.c[cut - 1];
        let comm = if c == 0.0 { 0.0 } else { c / bps };
        self.a[device_idx][cut - 1] + comm
    }

    /// Makespan of a full cut/bandwidth assignment (1-based cuts).
    pub fn makespan_s(&self, cuts: &[usize], bandwidth_bps: &[f64]) -> f64 {
        cuts.iter()
            .zip(bandwidth_bps)
            .enumerate()
            .map(|(i, (&cut, &bps))| self.device_round_s(i, cut, bps))
            .fold(0.0, f64::max)
    }
}

/// Per-device time breakdown of one round. The compute and activation terms
/// are per batch; `round_s` is the full round:
/// `round_s = b * (forward_s + backward_s + activation_comm_s) + weight_comm_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceRound {
    pub device_id: String,
    /// 1-based cut layer.
    pub cut: usize,
    pub bandwidth_bps: f64,
    /// Device + server forward time for one batch.
    pub forward_s: f64,
    /// Server + device backward time for one batch.
    pub backward_s: f64,
    /// Activation upload + gradient download time for one batch.
    pub activation_comm_s: f64,
    /// Weight receive + send time, once per round.
    pub weight_comm_s: f64,
    /// Full round time for this device.
    pub round_s: f64,
}

/// Breakdown for every device plus the fleet makespan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundBreakdown {
    pub devices: Vec<DeviceRound>,
    pub makespan_s: f64,
}

impl RoundBreakdown {
    /// Flat CSV form: one row per device, then one `fleet` row carrying the
    /// makespan.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "scope,cut,bandwidth_bps,forward_s,backward_s,activation_comm_s,weight_comm_s,round_s\n",
        );
        for d in &self.devices {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                d.device_id,
                d.cut,
                d.bandwidth_bps,
                d.forward_s,
                d.backward_s,
                d.activation_comm_s,
                d.weight_comm_s,
                d.round_s
            ));
        }
        out.push_str(&format!("fleet,,,,,,,{}\n", self.makespan_s));
        out
    }
}

/// Compute the `A`/`C` coefficient table for a fleet.
pub fn build_cost_table(fleet: &FleetProfile) -> CostTable {
    let b = fleet.batches_per_round as f64;
    let n = fleet.num_cuts();
    let a = fleet
        .devices
        .iter()
        .enumerate()
        .map(|(i, dev)| {
            let srv = fleet.server_for(i);
            (0..n)
                .map(|j| b * (dev.fwd_time[j] + srv.fwd_time[j] + srv.bwd_time[j] + dev.bwd_time[j]))
                .collect()
        })
        .collect();
    let c = (0..n)
        .map(|j| {
            (b * fleet.model.activation_bits[j] as f64 + fleet.model.cum_param_bits[j] as f64)
                * ROUND_TRIP_FACTOR
        })
        .collect();
    CostTable { a, c }
}

fn comm_time(bits: f64, bps: f64) -> f64 {
    if bits == 0.0 {
        0.0
    } else {
        bits / bps
    }
}

/// Check that a schedule can run on this fleet: one cut in `1..=N` and one
/// bandwidth share per device, shares non-negative (zero only for devices
/// with no traffic at their cut), total within the budget.
pub fn check_feasible(fleet: &FleetProfile, schedule: &Schedule) -> Result<(), CostError> {
    let m = fleet.num_devices();
    let n = fleet.num_cuts();
    if schedule.cuts.len() != m || schedule.bandwidth_bps.len() != m {
        return Err(CostError::Infeasible(format!(
            "schedule covers {} cuts / {} shares for {m} devices",
            schedule.cuts.len(),
            schedule.bandwidth_bps.len()
        )));
    }
    let b = fleet.batches_per_round as f64;
    for (i, (&cut, &bps)) in schedule.cuts.iter().zip(&schedule.bandwidth_bps).enumerate() {
        if cut < 1 || cut > n {
            return Err(CostError::Infeasible(format!(
                "device {i} cut {cut} out of range 1..={n}"
            )));
        }
        if !bps.is_finite() || bps < 0.0 {
            return Err(CostError::Infeasible(format!(
                "device {i} bandwidth {bps} bps is not a finite non-negative value"
            )));
        }
        let traffic_bits = (b * fleet.model.activation_bits[cut - 1] as f64
            + fleet.model.cum_param_bits[cut - 1] as f64)
            * ROUND_TRIP_FACTOR;
        if bps == 0.0 && traffic_bits > 0.0 {
            return Err(CostError::Infeasible(format!(
                "device {i} has {traffic_bits} bits of traffic but zero bandwidth"
            )));
        }
    }
    let total: f64 = schedule.bandwidth_bps.iter().sum();
    let budget = fleet.total_bandwidth_bps;
    if total > budget * (1.0 + FEASIBILITY_REL_TOL) {
        return Err(CostError::Infeasible(format!(
            "allocated bandwidth {total} bps exceeds budget {budget} bps"
        )));
    }
    Ok(())
}

/// Evaluate the analytic round-time model for one schedule.
///
/// Each device's `round_s` is computed step by step and agrees with the
/// `A + C/B` form of the cost table to within [`FORM_AGREEMENT_REL_TOL`].
pub fn round_time(fleet: &FleetProfile, schedule: &Schedule) -> Result<RoundBreakdown, CostError> {
    check_feasible(fleet, schedule)?;
    let b = fleet.batches_per_round as f64;
    let mut devices = Vec::with_capacity(fleet.num_devices());
    for (i, dev) in fleet.devices.iter().enumerate() {
        let cut = schedule.cuts[i];
        let bps = schedule.bandwidth_bps[i];
        let j = cut - 1;
        let srv = fleet.server_for(i);
        let forward_s = dev.fwd_time[j] + srv.fwd_time[j];
        let backward_s = srv.bwd_time[j] + dev.bwd_time[j];
        let activation_comm_s = comm_time(
            fleet.model.activation_bits[j] as f64 * ROUND_TRIP_FACTOR,
            bps,
        );
        let weight_comm_s = comm_time(fleet.model.cum_param_bits[j] as f64 * ROUND_TRIP_FACTOR, bps);
        let round_s = b * (forward_s + backward_s + activation_comm_s) + weight_comm_s;

        let table_form = {
            let a = b * (dev.fwd_time[j] + srv.fwd_time[j] + srv.bwd_time[j] + dev.bwd_time[j]);
            let c = (b * fleet.model.activation_bits[j] as f64
                + fleet.model.cum_param_bits[j] as f64)
                * ROUND_TRIP_FACTOR;
            a + comm_time(c, bps)
        };
        debug_assert!(
            (round_s - table_form).abs() <= FORM_AGREEMENT_REL_TOL * table_form.abs().max(1.0),
            "round-time forms disagree: {round_s} vs {table_form}"
        );

        devices.push(DeviceRound {
            device_id: dev.device_id.clone(),
            cut,
            bandwidth_bps: bps,
            forward_s,
            backward_s,
            activation_comm_s,
            weight_comm_s,
            round_s,
        });
    }
    let makespan_s = devices.iter().map(|d| d.round_s).fold(0.0, f64::max);
    Ok(RoundBreakdown {
        devices,
        makespan_s,
    })
}
