//! Joint cut-point and bandwidth scheduling.
//!
//! The problem: pick one cut layer per device and split the shared bandwidth
//! budget so that the slowest device's round time is as small as possible.
//! With the cost table of [`crate::cost`], device `i` cut at `j` with share
//! `B_i` finishes in `A[i][j] + C[j]/B_i` seconds.
//!
//! Two observations make the joint problem tractable:
//!
//! * with shares fixed, each device's best cut is an independent argmin over
//!   its row ([`best_cuts_given_bandwidth`]);
//! * with cuts fixed, the min-max share split is a one-dimensional root find:
//!   at the optimum every traffic-carrying device finishes at the same time
//!   `T`, and the total demand `Σ C_i/(T − A_i)` is strictly decreasing in
//!   `T`, so the `T` that exactly spends the budget is found by bisection
//!   ([`solve_bandwidth`]).
//!
//! [`solve`] alternates the two steps until the objective stops improving.
//! Alternating minimization can stall in a local optimum, so
//! [`brute_force_oracle`] enumerates every cut assignment on small instances
//! and reports the true optimum for gap measurement.

use crate::cost::CostTable;
use serde::{Deserialize, Serialize};

/// Largest number of cut assignments the oracle will enumerate by default.
pub const DEFAULT_ORACLE_CAP: u64 = 1_000_000;

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("{what} contains a non-finite or negative value")]
    NonFinite { what: String },
    #[error("total bandwidth must be > 0, got {0}")]
    InvalidBandwidth(f64),
    #[error("empty instance: {0}")]
    EmptyInstance(String),
    #[error("cut {cut} out of range 1..={num_cuts}")]
    CutOutOfRange { cut: usize, num_cuts: usize },
    #[error("instance too large for exhaustive search: {combinations} cut assignments exceed cap {cap}")]
    OracleTooLarge { combinations: u128, cap: u64 },
}

/// One cut layer (1-based) and one bandwidth share per device, plus the
/// makespan this assignment achieves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub cuts: Vec<usize>,
    pub bandwidth_bps: Vec<f64>,
    pub objective_s: f64,
}

/// Why the alternating loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    NoImprovement,
    IterationCap,
}

/// Result of [`solve`]: the best schedule plus the objective after each pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub schedule: Schedule,
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
    pub terminated_by: Termination,
}

/// Options for the alternating loop.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub max_iterations: usize,
    /// A pass must beat the incumbent by this relative margin to be accepted.
    pub rel_improvement_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iterations: 50,
            rel_improvement_tol: 1e-9,
        }
    }
}

fn check_finite(values: &[f64], what: &str) -> Result<(), SolveError> {
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(SolveError::NonFinite { what: what.into() });
    }
    Ok(())
}

/// Best cut per device with shares held fixed: `argmin_j A[i][j] + C[j]/B_i`,
/// ties broken toward the smallest `j`. A share of zero makes every cut with
/// traffic infinitely expensive; zero-traffic cuts cost nothing to transfer
/// at any share.
pub fn best_cuts_given_bandwidth(table: &CostTable, bandwidth_bps: &[f64]) -> Vec<usize> {
    assert_eq!(
        bandwidth_bps.len(),
        table.num_devices(),
        "one share per device"
    );
    table
        .a
        .iter()
        .zip(bandwidth_bps)
        .map(|(row, &bps)| {
            let mut best_j = 1;
            let mut best_value = f64::INFINITY;
            for (j, (&a, &c)) in row.iter().zip(&table.c).enumerate() {
                let comm = if c == 0.0 { 0.0 } else { c / bps };
                let value = a + comm;
                if value < best_value {
                    best_value = value;
                    best_j = j + 1;
                }
            }
            best_j
        })
        .collect()
}

/// Min-max bandwidth split for per-device coefficients `(a[i], c[i])`:
/// minimize `max_i a[i] + c[i]/share[i]` subject to `Σ share[i] ≤ total`.
///
/// At the optimum the budget is fully spent and every device with traffic
/// finishes at the same time `T`, the unique root of
/// `Σ_{c[i]>0} c[i]/(T − a[i]) = total`. The root is bracketed and bisected
/// until the bracket is narrower than `max(1e-12, 1e-10·T_upper)` *and* the
/// allocation spends at least `total·(1 − 1e-9)`; the returned `T` is the
/// bracket end whose allocation never exceeds the budget.
///
/// Devices with `c[i] = 0` need no link: they get a zero share and only pin
/// the objective from below at their `a[i]`.
pub fn min_max_bandwidth(
    a: &[f64],
    c: &[f64],
    total_bandwidth_bps: f64,
) -> Result<(Vec<f64>, f64), SolveError> {
    if a.is_empty() || a.len() != c.len() {
        return Err(SolveError::EmptyInstance(format!(
            "{} compute coefficients vs {} traffic coefficients",
            a.len(),
            c.len()
        )));
    }
    check_finite(a, "compute coefficients")?;
    check_finite(c, "traffic coefficients")?;
    if !(total_bandwidth_bps.is_finite() && total_bandwidth_bps > 0.0) {
        return Err(SolveError::InvalidBandwidth(total_bandwidth_bps));
    }

    let m = a.len();
    let max_a_all = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum_c: f64 = c.iter().sum();
    if sum_c == 0.0 {
        // No traffic anywhere: any split works, equal split by convention.
        return Ok((vec![total_bandwidth_bps / m as f64; m], max_a_all));
    }

    let max_a_traffic = a
        .iter()
        .zip(c)
        .filter(|(_, &ci)| ci > 0.0)
        .map(|(&ai, _)| ai)
        .fold(f64::NEG_INFINITY, f64::max);
    let max_a_zero = a
        .iter()
        .zip(c)
        .filter(|(_, &ci)| ci == 0.0)
        .map(|(&ai, _)| ai)
        .fold(f64::NEG_INFINITY, f64::max);

    let demand = |t: f64| -> f64 {
        a.iter()
            .zip(c)
            .filter(|(_, &ci)| ci > 0.0)
            .map(|(&ai, &ci)| ci / (t - ai))
            .sum()
    };

    // demand(T) falls from +inf at max_a_traffic to below the budget at
    // t_upper, so the bracket always contains the root.
    let t_upper = max_a_all + sum_c / total_bandwidth_bps + 1.0;
    let mut lo = max_a_traffic;
    let mut hi = t_upper;
    let width_floor = (1e-10 * t_upper).max(1e-12);
    for _ in 0..256 {
        if hi - lo <= width_floor && demand(hi) >= total_bandwidth_bps * (1.0 - 1e-9) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // bracket at floating-point resolution
        }
        if demand(mid) > total_bandwidth_bps {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let t = hi;
    let shares: Vec<f64> = a
        .iter()
        .zip(c)
        .map(|(&ai, &ci)| if ci > 0.0 { ci / (t - ai) } else { 0.0 })
        .collect();
    // A zero-traffic device slower than the solved T pins the makespan.
    let objective = t.max(max_a_zero);
    Ok((shares, objective))
}

/// Min-max bandwidth split for fixed cuts (1-based), against the cost table.
pub fn solve_bandwidth(
    table: &CostTable,
    cuts: &[usize],
    total_bandwidth_bps: f64,
) -> Result<(Vec<f64>, f64), SolveError> {
    let (a, c) = gather_coefficients(table, cuts)?;
    min_max_bandwidth(&a, &c, total_bandwidth_bps)
}

fn gather_coefficients(table: &CostTable, cuts: &[usize]) -> Result<(Vec<f64>, Vec<f64>), SolveError> {
    if cuts.len() != table.num_devices() {
        return Err(SolveError::EmptyInstance(format!(
            "{} cuts for {} devices",
            cuts.len(),
            table.num_devices()
        )));
    }
    let n = table.num_cuts();
    let mut a = Vec::with_capacity(cuts.len());
    let mut c = Vec::with_capacity(cuts.len());
    for (i, &cut) in cuts.iter().enumerate() {
        if cut < 1 || cut > n {
            return Err(SolveError::CutOutOfRange { cut, num_cuts: n });
        }
        a.push(table.a[i][cut - 1]);
        c.push(table.c[cut - 1]);
    }
    Ok((a, c))
}

/// Alternate cut selection and bandwidth allocation until the makespan stops
/// improving.
///
/// Shares start at an equal split, so the first cut-selection pass already
/// dominates any uniform-cut equal-share baseline, and the first allocation
/// pass can only improve on that. Each later pass is accepted only if it
/// beats the incumbent by the relative tolerance, which makes the objective
/// trace non-increasing and guarantees termination.
pub fn solve(
    table: &CostTable,
    total_bandwidth_bps: f64,
    options: &SolveOptions,
) -> Result<SolveReport, SolveError> {
    let m = table.num_devices();
    if m == 0 {
        return Err(SolveError::EmptyInstance("cost table has no devices".into()));
    }
    if !(total_bandwidth_bps.is_finite() && total_bandwidth_bps > 0.0) {
        return Err(SolveError::InvalidBandwidth(total_bandwidth_bps));
    }

    let mut bandwidth = vec![total_bandwidth_bps / m as f64; m];
    let mut objective = f64::INFINITY;
    let mut best: Option<Schedule> = None;
    let mut trace = Vec::new();
    let mut terminated_by = Termination::IterationCap;

    for _ in 0..options.max_iterations {
        let cuts = best_cuts_given_bandwidth(table, &bandwidth);
        let (shares, t) = solve_bandwidth(table, &cuts, total_bandwidth_bps)?;
        if t < objective * (1.0 - options.rel_improvement_tol) {
            objective = t;
            bandwidth = shares.clone();
            best = Some(Schedule {
                cuts,
                bandwidth_bps: shares,
                objective_s: t,
            });
            trace.push(objective);
        } else {
            trace.push(objective);
            terminated_by = Termination::NoImprovement;
            break;
        }
    }

    Ok(SolveReport {
        schedule: best.expect("at least one pass accepted"),
        iterations: trace.len(),
        objective_trace: trace,
        terminated_by,
    })
}

/// Exhaustive ground truth: try every cut assignment, allocate bandwidth
/// exactly for each, return the global optimum. Ties go to the
/// lexicographically smallest cut vector. Uses [`DEFAULT_ORACLE_CAP`].
pub fn brute_force_oracle(
    table: &CostTable,
    total_bandwidth_bps: f64,
) -> Result<Schedule, SolveError> {
    brute_force_oracle_capped(table, total_bandwidth_bps, DEFAULT_ORACLE_CAP)
}

/// [`brute_force_oracle`] with an explicit enumeration cap.
pub fn brute_force_oracle_capped(
    table: &CostTable,
    total_bandwidth_bps: f64,
    cap: u64,
) -> Result<Schedule, SolveError> {
    let m = table.num_devices();
    let n = table.num_cuts();
    if m == 0 || n == 0 {
        return Err(SolveError::EmptyInstance("cost table has no devices or cuts".into()));
    }
    let combinations = (n as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if combinations > cap as u128 {
        return Err(SolveError::OracleTooLarge { combinations, cap });
    }

    let mut cuts = vec![1usize; m];
    let mut best: Option<Schedule> = None;
    loop {
        let (shares, t) = solve_bandwidth(table, &cuts, total_bandwidth_bps)?;
        if best.as_ref().is_none_or(|b| t < b.objective_s) {
            best = Some(Schedule {
                cuts: cuts.clone(),
                bandwidth_bps: shares,
                objective_s: t,
            });
        }
        // Odometer increment, rightmost digit fastest: lexicographic order,
        // so the strict `<` above keeps the lexicographically first optimum.
        let mut pos = m;
        loop {
            if pos == 0 {
                return Ok(best.expect("at least one assignment evaluated"));
            }
            pos -= 1;
            if cuts[pos] < n {
                cuts[pos] += 1;
                for later in cuts.iter_mut().skip(pos + 1) {
                    *later = 1;
                }
                break;
            }
        }
    }
}
