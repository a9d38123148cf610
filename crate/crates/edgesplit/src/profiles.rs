//! Input data for the scheduler and simulator: model layer statistics,
//! per-device and server timing profiles, and the network budget.
//!
//! All sizes are in bits, all bandwidths in bits per second, all times in
//! seconds. Profiles that record parameter *counts* must be converted to bits
//! (count × 32 for f32 weights) before they are written to a fleet file.
//!
//! Layer indices are 1-based in file documentation and in every public
//! interface; a cut at layer `j` means layers `1..=j` run on the device and
//! layers `j+1..` run on the server.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Current fleet file schema version.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed fleet file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid profile: {field}: {reason}")]
    Validation { field: String, reason: String },
    #[error("invalid synthetic spec: {0}")]
    Synthetic(String),
}

impl ProfileError {
    fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ProfileError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// Per-layer statistics of the model being trained.
///
/// `activation_bits[j-1]` is the size of layer `j`'s output for one full
/// batch; `cum_param_bits[j-1]` is the total size of the parameters in layers
/// `1..=j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProfile {
    pub name: String,
    /// Number of feasible partition layers N.
    pub num_cuts: usize,
    /// O_j for j = 1..=N, bits per batch.
    pub activation_bits: Vec<u64>,
    /// P_j for j = 1..=N, bits; non-decreasing.
    pub cum_param_bits: Vec<u64>,
}

/// Measured compute times of one edge device.
///
/// `fwd_time[j-1]` is the time to run the forward pass of layers `1..=j`
/// locally for one batch; `bwd_time[j-1]` the matching backward pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub device_id: String,
    pub fwd_time: Vec<f64>,
    pub bwd_time: Vec<f64>,
}

/// Server-side complements of the device times: `fwd_time[j-1]` is the time
/// to run layers `j+1..` forward for one batch, `bwd_time[j-1]` the matching
/// backward pass. Both are non-increasing in `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerProfile {
    pub fwd_time: Vec<f64>,
    pub bwd_time: Vec<f64>,
}

/// Server timing section of a fleet file: either one profile shared by every
/// device or one profile per device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ServerSection {
    Shared(ServerProfile),
    PerDevice(Vec<ServerProfile>),
}

/// A complete scheduling instance: model, M devices, server times, total
/// bandwidth budget B and batch count b.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetProfile {
    pub schema: u32,
    pub model: ModelProfile,
    pub devices: Vec<DeviceProfile>,
    pub server: ServerSection,
    pub total_bandwidth_bps: f64,
    pub batches_per_round: u64,
}

impl FleetProfile {
    /// Number of devices M.
    pub fn num_devices(&self) -> usize {
        self.devices.len()
    }

    /// Number of feasible cut layers N.
    pub fn num_cuts(&self) -> usize {
        self.model.num_cuts
    }

    /// Server profile used by device `i` (0-based device position).
    pub fn server_for(&self, device_idx: usize) -> &ServerProfile {
        match &self.server {
            ServerSection::Shared(s) => s,
            ServerSection::PerDevice(v) => &v[device_idx],
        }
    }

    /// Check every profile invariant, returning the first violation.
    pub fn validate(&self) -> Result<(), ProfileError> {
        if self.schema != SCHEMA_VERSION {
            return Err(ProfileError::invalid(
                "schema",
                format!("expected schema {SCHEMA_VERSION}, found {}", self.schema),
            ));
        }
        let n = self.model.num_cuts;
        if n < 1 {
            return Err(ProfileError::invalid("model.num_cuts", "must be >= 1"));
        }
        if self.model.activation_bits.len() != n {
            return Err(ProfileError::invalid(
                "model.activation_bits",
                format!("expected {n} entries, found {}", self.model.activation_bits.len()),
            ));
        }
        if self.model.cum_param_bits.len() != n {
            return Err(ProfileError::invalid(
                "model.cum_param_bits",
                format!("expected {n} entries, found {}", self.model.cum_param_bits.len()),
            ));
        }
        if self.model.cum_param_bits.windows(2).any(|w| w[1] < w[0]) {
            return Err(ProfileError::invalid(
                "model.cum_param_bits",
                "not non-decreasing",
            ));
        }
        if self.devices.is_empty() {
            return Err(ProfileError::invalid("devices", "at least one device required"));
        }
        if !(self.total_bandwidth_bps > 0.0 && self.total_bandwidth_bps.is_finite()) {
            return Err(ProfileError::invalid(
                "total_bandwidth_bps",
                "must be finite and > 0",
            ));
        }
        if self.batches_per_round < 1 {
            return Err(ProfileError::invalid("batches_per_round", "must be >= 1"));
        }
        for dev in &self.devices {
            validate_time_series(
                &dev.fwd_time,
                n,
                NonDecreasing,
                &format!("devices[{}].fwd_time", dev.device_id),
            )?;
            validate_time_series(
                &dev.bwd_time,
                n,
                NonDecreasing,
                &format!("devices[{}].bwd_time", dev.device_id),
            )?;
        }
        let server_profiles: Vec<&ServerProfile> = match &self.server {
            ServerSection::Shared(s) => vec![s],
            ServerSection::PerDevice(v) => {
                if v.len() != self.devices.len() {
                    return Err(ProfileError::invalid(
                        "server",
                        format!(
                            "per-device server section has {} entries for {} devices",
                            v.len(),
                            self.devices.len()
                        ),
                    ));
                }
                v.iter().collect()
            }
        };
        for (i, srv) in server_profiles.iter().enumerate() {
            validate_time_series(&srv.fwd_time, n, NonIncreasing, &format!("server[{i}].fwd_time"))?;
            validate_time_series(&srv.bwd_time, n, NonIncreasing, &format!("server[{i}].bwd_time"))?;
        }
        Ok(())
    }

    /// Canonical on-disk form: pretty JSON with a trailing newline. Writing
    /// the result of `load_fleet` back out reproduces the bytes exactly.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("fleet serializes");
        s.push('\n');
        s
    }

    /// Validate and write this fleet to `path` in the canonical form.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ProfileError> {
        self.validate()?;
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| ProfileError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Monotonicity {
    NonDecreasing,
    NonIncreasing,
}
use Monotonicity::{NonDecreasing, NonIncreasing};

fn validate_time_series(
    series: &[f64],
    n: usize,
    direction: Monotonicity,
    field: &str,
) -> Result<(), ProfileError> {
    if series.len() != n {
        return Err(ProfileError::invalid(
            field,
            format!("expected {n} entries, found {}", series.len()),
        ));
    }
    if series.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(ProfileError::invalid(field, "entries must be finite and >= 0"));
    }
    let ordered = match direction {
        NonDecreasing => series.windows(2).all(|w| w[1] >= w[0]),
        NonIncreasing => series.windows(2).all(|w| w[1] <= w[0]),
    };
    if !ordered {
        let expected = match direction {
            NonDecreasing => "non-decreasing",
            NonIncreasing => "non-increasing",
        };
        return Err(ProfileError::invalid(field, format!("not {expected}")));
    }
    Ok(())
}

/// Load a fleet file and check every invariant.
pub fn load_fleet(path: impl AsRef<Path>) -> Result<FleetProfile, ProfileError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ProfileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let fleet: FleetProfile = serde_json::from_str(&text)?;
    fleet.validate()?;
    Ok(fleet)
}

/// Recipe for a synthetic heterogeneous fleet.
///
/// Device `i` runs at slowdown `slowdowns[i]` relative to a reference device:
/// its forward time at cut `j` is `slowdowns[i]` times the sum of the first
/// `j` per-layer base costs. The server runs the complementary layer suffix
/// `server_speedup` times faster than the reference device. Per-layer costs
/// and sizes are drawn uniformly from the given ranges, deterministically for
/// a fixed seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub name: String,
    /// Number of feasible cut layers N.
    pub num_cuts: usize,
    /// Per-device slowdown factors s_i > 0; length M.
    pub slowdowns: Vec<f64>,
    /// Reference device seconds per layer, forward pass.
    pub base_fwd_unit_s: f64,
    /// Reference device seconds per layer, backward pass.
    pub base_bwd_unit_s: f64,
    /// How many times faster than the reference device the server is.
    pub server_speedup: f64,
    /// Uniform range for per-layer activation sizes O_j, bits per batch.
    pub activation_bits_range: (u64, u64),
    /// Uniform range for per-layer parameter sizes, bits (P_j accumulates these).
    pub layer_param_bits_range: (u64, u64),
    pub total_bandwidth_bps: f64,
    pub batches_per_round: u64,
}

impl SyntheticSpec {
    /// A fleet shaped like a small heterogeneous testbed. `classes` are core
    /// counts; a device with `c` cores is `max_cores / c` times slower than
    /// the fastest class. Devices are assigned to classes in order, slowest
    /// class first.
    pub fn heterogeneous(devices: usize, classes: &[f64], num_cuts: usize) -> Self {
        let max_cores = classes.iter().cloned().fold(f64::MIN, f64::max);
        let slowdowns = (0..devices)
            .map(|d| max_cores / classes[d * classes.len() / devices.max(1)])
            .collect();
        SyntheticSpec {
            name: "synthetic".to_string(),
            num_cuts,
            slowdowns,
            base_fwd_unit_s: 0.05,
            base_bwd_unit_s: 0.10,
            server_speedup: 10.0,
            activation_bits_range: (200_000, 4_000_000),
            layer_param_bits_range: (400_000, 40_000_000),
            total_bandwidth_bps: 30_000_000.0,
            batches_per_round: 20,
        }
    }

    fn validate(&self) -> Result<(), ProfileError> {
        if self.num_cuts < 1 {
            return Err(ProfileError::Synthetic("num_cuts must be >= 1".into()));
        }
        if self.slowdowns.is_empty() {
            return Err(ProfileError::Synthetic("at least one device required".into()));
        }
        if self.slowdowns.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(ProfileError::Synthetic("slowdown factors must be > 0".into()));
        }
        for (name, v) in [
            ("base_fwd_unit_s", self.base_fwd_unit_s),
            ("base_bwd_unit_s", self.base_bwd_unit_s),
            ("server_speedup", self.server_speedup),
            ("total_bandwidth_bps", self.total_bandwidth_bps),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ProfileError::Synthetic(format!("{name} must be > 0")));
            }
        }
        if self.activation_bits_range.0 > self.activation_bits_range.1
            || self.layer_param_bits_range.0 > self.layer_param_bits_range.1
        {
            return Err(ProfileError::Synthetic("size range lower bound exceeds upper".into()));
        }
        if self.batches_per_round < 1 {
            return Err(ProfileError::Synthetic("batches_per_round must be >= 1".into()));
        }
        Ok(())
    }
}

/// Build a fleet from a synthetic recipe. The same spec and seed always
/// produce the same fleet, and monotonicity of every time series holds by
/// construction (prefix sums for devices, suffix sums for the server).
pub fn generate_fleet(spec: &SyntheticSpec, seed: u64) -> Result<FleetProfile, ProfileError> {
    spec.validate()?;
    let n = spec.num_cuts;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Per-layer reference costs, jittered around the base unit.
    let layer_fwd: Vec<f64> = (0..n)
        .map(|_| spec.base_fwd_unit_s * rng.gen_range(0.5..1.5))
        .collect();
    let layer_bwd: Vec<f64> = (0..n)
        .map(|_| spec.base_bwd_unit_s * rng.gen_range(0.5..1.5))
        .collect();
    let activation_bits: Vec<u64> = (0..n)
        .map(|_| rng.gen_range(spec.activation_bits_range.0..=spec.activation_bits_range.1))
        .collect();
    let layer_param_bits: Vec<u64> = (0..n)
        .map(|_| rng.gen_range(spec.layer_param_bits_range.0..=spec.layer_param_bits_range.1))
        .collect();

    let cum_param_bits: Vec<u64> = layer_param_bits
        .iter()
        .scan(0u64, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();

    let prefix = |layers: &[f64]| -> Vec<f64> {
        layers
            .iter()
            .scan(0.0f64, |acc, c| {
                *acc += c;
                Some(*acc)
            })
            .collect()
    };
    let fwd_prefix = prefix(&layer_fwd);
    let bwd_prefix = prefix(&layer_bwd);
    // The server handles the layer suffix j+1.. at `server_speedup` times the
    // reference rate.
    let suffix = |layers: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        let mut acc = 0.0f64;
        for j in (0..n - 1).rev() {
            acc += layers[j + 1];
            out[j] = acc / spec.server_speedup;
        }
        out
    };

    let devices = spec
        .slowdowns
        .iter()
        .enumerate()
        .map(|(i, s)| DeviceProfile {
            device_id: format!("dev{i}"),
            fwd_time: fwd_prefix.iter().map(|t| s * t).collect(),
            bwd_time: bwd_prefix.iter().map(|t| s * t).collect(),
        })
        .collect();

    let fleet = FleetProfile {
        schema: SCHEMA_VERSION,
        model: ModelProfile {
            name: spec.name.clone(),
            num_cuts: n,
            activation_bits,
            cum_param_bits,
        },
        devices,
        server: ServerSection::Shared(ServerProfile {
            fwd_time: suffix(&layer_fwd),
            bwd_time: suffix(&layer_bwd),
        }),
        total_bandwidth_bps: spec.total_bandwidth_bps,
        batches_per_round: spec.batches_per_round,
    };
    fleet.validate()?;
    Ok(fleet)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_fleet() -> FleetProfile {
        FleetProfile {
            schema: SCHEMA_VERSION,
            model: ModelProfile {
                name: "unit".into(),
                num_cuts: 1,
                activation_bits: vec![0],
                cum_param_bits: vec![0],
            },
            devices: vec![DeviceProfile {
                device_id: "dev0".into(),
                fwd_time: vec![0.0],
                bwd_time: vec![0.0],
            }],
            server: ServerSection::Shared(ServerProfile {
                fwd_time: vec![0.0],
                bwd_time: vec![0.0],
            }),
            total_bandwidth_bps: 1.0,
            batches_per_round: 1,
        }
    }

    #[test]
    fn minimal_fleet_loads() {
        let dir = std::env::temp_dir().join("edgesplit-profiles-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("minimal.json");
        minimal_fleet().save(&path).unwrap();
        let loaded = load_fleet(&path).unwrap();
        assert_eq!(loaded, minimal_fleet());
        assert_eq!(loaded.num_devices(), 1);
        assert_eq!(loaded.num_cuts(), 1);
    }

    #[test]
    fn decreasing_cum_params_rejected() {
        let mut fleet = minimal_fleet();
        fleet.model.num_cuts = 2;
        fleet.model.activation_bits = vec![1, 1];
        fleet.model.cum_param_bits = vec![5, 3];
        fleet.devices[0].fwd_time = vec![0.0, 0.0];
        fleet.devices[0].bwd_time = vec![0.0, 0.0];
        fleet.server = ServerSection::Shared(ServerProfile {
            fwd_time: vec![0.0, 0.0],
            bwd_time: vec![0.0, 0.0],
        });
        let err = fleet.validate().unwrap_err();
        match err {
            ProfileError::Validation { field, reason } => {
                assert_eq!(field, "model.cum_param_bits");
                assert_eq!(reason, "not non-decreasing");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let mut fleet = minimal_fleet();
        fleet.schema = 2;
        let err = fleet.validate().unwrap_err();
        assert!(matches!(err, ProfileError::Validation { ref field, .. } if field == "schema"));
    }

    #[test]
    fn missing_schema_field_is_a_parse_error() {
        let mut value: serde_json::Value = serde_json::from_str(&minimal_fleet().to_json()).unwrap();
        value.as_object_mut().unwrap().remove("schema");
        let err = serde_json::from_str::<FleetProfile>(&value.to_string()).unwrap_err();
        assert!(err.to_string().contains("schema"));
    }

    #[test]
    fn cut_count_mismatch_rejected() {
        let mut fleet = minimal_fleet();
        fleet.devices[0].fwd_time = vec![0.0, 0.0];
        let err = fleet.validate().unwrap_err();
        assert!(matches!(err, ProfileError::Validation { ref field, .. } if field.contains("fwd_time")));
    }

    #[test]
    fn decreasing_device_times_rejected() {
        let mut fleet = minimal_fleet();
        fleet.model.num_cuts = 2;
        fleet.model.activation_bits = vec![1, 1];
        fleet.model.cum_param_bits = vec![1, 2];
        fleet.devices[0].fwd_time = vec![2.0, 1.0];
        fleet.devices[0].bwd_time = vec![0.0, 0.0];
        fleet.server = ServerSection::Shared(ServerProfile {
            fwd_time: vec![0.0, 0.0],
            bwd_time: vec![0.0, 0.0],
        });
        let err = fleet.validate().unwrap_err();
        assert!(matches!(err, ProfileError::Validation { ref reason, .. } if reason == "not non-decreasing"));
    }

    #[test]
    fn increasing_server_times_rejected() {
        let mut fleet = minimal_fleet();
        fleet.model.num_cuts = 2;
        fleet.model.activation_bits = vec![1, 1];
        fleet.model.cum_param_bits = vec![1, 2];
        fleet.devices[0].fwd_time = vec![1.0, 2.0];
        fleet.devices[0].bwd_time = vec![1.0, 2.0];
        fleet.server = ServerSection::Shared(ServerProfile {
            fwd_time: vec![1.0, 3.0],
            bwd_time: vec![3.0, 1.0],
        });
        let err = fleet.validate().unwrap_err();
        assert!(matches!(err, ProfileError::Validation { ref reason, .. } if reason == "not non-increasing"));
    }

    #[test]
    fn per_device_server_length_checked() {
        let mut fleet = minimal_fleet();
        fleet.server = ServerSection::PerDevice(vec![
            ServerProfile {
                fwd_time: vec![0.0],
                bwd_time: vec![0.0],
            },
            ServerProfile {
                fwd_time: vec![0.0],
                bwd_time: vec![0.0],
            },
        ]);
        assert!(fleet.validate().is_err());
    }

    fn small_spec() -> SyntheticSpec {
        SyntheticSpec {
            name: "small".into(),
            num_cuts: 4,
            slowdowns: vec![1.0, 5.0],
            base_fwd_unit_s: 0.01,
            base_bwd_unit_s: 0.02,
            server_speedup: 10.0,
            activation_bits_range: (1_000, 10_000),
            layer_param_bits_range: (1_000, 10_000),
            total_bandwidth_bps: 1_000_000.0,
            batches_per_round: 4,
        }
    }

    #[test]
    fn uniform_slowdowns_give_identical_devices() {
        let mut spec = small_spec();
        spec.slowdowns = vec![1.0, 1.0, 1.0];
        let fleet = generate_fleet(&spec, 3).unwrap();
        for dev in &fleet.devices[1..] {
            assert_eq!(dev.fwd_time, fleet.devices[0].fwd_time);
            assert_eq!(dev.bwd_time, fleet.devices[0].bwd_time);
        }
    }

    #[test]
    fn fixed_seed_is_bitwise_deterministic() {
        let spec = small_spec();
        let a = generate_fleet(&spec, 7).unwrap();
        let b = generate_fleet(&spec, 7).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = generate_fleet(&spec, 8).unwrap();
        assert_ne!(a.to_json(), c.to_json());
    }

    #[test]
    fn four_class_fleet_scales_with_core_count() {
        // Two devices per class, classes 1/3/5/12 cores: the 1-core class is
        // 12 times slower per layer than the 12-core class.
        let spec = SyntheticSpec::heterogeneous(8, &[1.0, 3.0, 5.0, 12.0], 6);
        assert_eq!(spec.slowdowns.len(), 8);
        assert_eq!(&spec.slowdowns[0..2], &[12.0, 12.0]);
        assert_eq!(&spec.slowdowns[6..8], &[1.0, 1.0]);
        let fleet = generate_fleet(&spec, 11).unwrap();
        for j in 0..6 {
            let ratio = fleet.devices[0].fwd_time[j] / fleet.devices[7].fwd_time[j];
            assert!((ratio - 12.0).abs() < 1e-12, "ratio {ratio}");
            let ratio_b = fleet.devices[0].bwd_time[j] / fleet.devices[7].bwd_time[j];
            assert!((ratio_b - 12.0).abs() < 1e-12, "ratio {ratio_b}");
        }
    }

    #[test]
    fn generated_fleets_validate_and_round_trip() {
        let fleet = generate_fleet(&small_spec(), 42).unwrap();
        fleet.validate().unwrap();
        let json = fleet.to_json();
        let reloaded: FleetProfile = serde_json::from_str(&json).unwrap();
        assert_eq!(reloaded, fleet);
        assert_eq!(reloaded.to_json(), json);
    }

    #[test]
    fn generated_device_times_strictly_increase() {
        let fleet = generate_fleet(&small_spec(), 9).unwrap();
        for dev in &fleet.devices {
            assert!(dev.fwd_time.windows(2).all(|w| w[1] > w[0]));
            assert!(dev.bwd_time.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = small_spec();
        spec.slowdowns.clear();
        assert!(generate_fleet(&spec, 0).is_err());

        let mut spec = small_spec();
        spec.slowdowns = vec![0.0];
        assert!(generate_fleet(&spec, 0).is_err());

        let mut spec = small_spec();
        spec.num_cuts = 0;
        assert!(generate_fleet(&spec, 0).is_err());

        let mut spec = small_spec();
        spec.server_speedup = -1.0;
        assert!(generate_fleet(&spec, 0).is_err());
    }
}
