//! System constants and the chunk/seek cost kernel shared by every layout.
//!
//! Costs are expressed as a weighted chunk count: transferred chunks weighted
//! by the transfer share of a chunk access plus seeks weighted by the seek
//! share. The weight denominator is format independent, so the dimensionless
//! value ranks formats; [`cost_to_seconds`] undoes the weighting when a
//! wall-clock figure is needed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rounds a fractional count up, treating values within a relative `1e-14`
/// of an integer as that integer so exact multiples do not gain a spurious
/// extra unit from floating-point noise.
pub fn ceil_count(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-14 * nearest.max(1.0) {
        nearest
    } else {
        x.ceil()
    }
}

/// Raw, unvalidated profile parameters as they appear in configuration
/// documents. Defaults are the reference testbed constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileParams {
    pub replication_factor: u32,
    pub locality_probability: f64,
    /// Bytes per DFS chunk.
    pub chunk_size: f64,
    /// Bytes per second.
    pub disk_bandwidth: f64,
    /// Bytes per second.
    pub network_bandwidth: f64,
    /// Seconds.
    pub seek_time: f64,
    /// Seconds. Only charged when `include_rotation` is set.
    pub rotation_time: f64,
    pub include_rotation: bool,
    /// Carried for completeness; no cost term consumes it.
    pub disk_block_size: f64,
    /// Carried for completeness; no cost term consumes it.
    pub buffer_size: f64,
}

impl Default for ProfileParams {
    fn default() -> Self {
        Self {
            replication_factor: 3,
            locality_probability: 0.97,
            chunk_size: 1.28e8,
            disk_bandwidth: 1.3e8,
            network_bandwidth: 1.25e8,
            seek_time: 5.0e-3,
            rotation_time: 4.17e-6,
            include_rotation: false,
            disk_block_size: 8.0e3,
            buffer_size: 6.4e4,
        }
    }
}

/// Validated DFS and hardware constants.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileParams", into = "ProfileParams")]
pub struct SystemProfile {
    params: ProfileParams,
}

impl SystemProfile {
    pub fn new(params: ProfileParams) -> Result<Self> {
        let p = &params;
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidProfile(format!("{name} must be > 0, got {v}")))
            }
        };
        if p.replication_factor < 1 {
            return Err(Error::InvalidProfile(
                "replication_factor must be >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&p.locality_probability) {
            return Err(Error::InvalidProfile(format!(
                "locality_probability must be in [0, 1], got {}",
                p.locality_probability
            )));
        }
        positive("chunk_size", p.chunk_size)?;
        positive("disk_bandwidth", p.disk_bandwidth)?;
        positive("network_bandwidth", p.network_bandwidth)?;
        for (name, v) in [
            ("seek_time", p.seek_time),
            ("rotation_time", p.rotation_time),
            ("disk_block_size", p.disk_block_size),
            ("buffer_size", p.buffer_size),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidProfile(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &ProfileParams {
        &self.params
    }

    pub fn replication_factor(&self) -> u32 {
        self.params.replication_factor
    }

    pub fn locality_probability(&self) -> f64 {
        self.params.locality_probability
    }

    pub fn chunk_size(&self) -> f64 {
        self.params.chunk_size
    }

    pub fn disk_bandwidth(&self) -> f64 {
        self.params.disk_bandwidth
    }

    pub fn network_bandwidth(&self) -> f64 {
        self.params.network_bandwidth
    }

    /// Seconds charged per seek, including rotation when enabled.
    pub fn seek_time(&self) -> f64 {
        if self.params.include_rotation {
            self.params.seek_time + self.params.rotation_time
        } else {
            self.params.seek_time
        }
    }

    /// The same profile with every time constant multiplied by `factor`
    /// and the chunk size unchanged.
    pub fn with_time_scale(&self, factor: f64) -> Result<Self> {
        let mut params = self.params;
        params.seek_time *= factor;
        params.rotation_time *= factor;
        params.disk_bandwidth /= factor;
        params.network_bandwidth /= factor;
        Self::new(params)
    }

    /// The same profile with the chunk size and seek/rotation times divided by
    /// `factor`. Transfer weights are unchanged, so costs measured in chunks
    /// behave exactly as at full scale while files stay small.
    pub fn desk_scaled(&self, factor: f64) -> Result<Self> {
        let mut params = self.params;
        params.chunk_size /= factor;
        params.seek_time /= factor;
        params.rotation_time /= factor;
        Self::new(params)
    }
}

impl TryFrom<ProfileParams> for SystemProfile {
    type Error = Error;

    fn try_from(params: ProfileParams) -> Result<Self> {
        Self::new(params)
    }
}

impl From<SystemProfile> for ProfileParams {
    fn from(profile: SystemProfile) -> Self {
        profile.params
    }
}

/// Seconds needed to move one full chunk over disk and over the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedTimes {
    pub time_disk: f64,
    pub time_net: f64,
}

pub fn derived_times(sys: &SystemProfile) -> DerivedTimes {
    DerivedTimes {
        time_disk: sys.chunk_size() / sys.disk_bandwidth(),
        time_net: sys.chunk_size() / sys.network_bandwidth(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IoMode {
    Read,
    Write,
}

impl IoMode {
    pub fn as_str(self) -> &'static str {
        match self {
            IoMode::Read => "read",
            IoMode::Write => "write",
        }
    }
}

/// Seconds to transfer one chunk in the given mode, seeks excluded.
pub fn chunk_transfer_time(sys: &SystemProfile, mode: IoMode) -> f64 {
    let t = derived_times(sys);
    match mode {
        IoMode::Write => t.time_disk + f64::from(sys.replication_factor() - 1) * t.time_net,
        IoMode::Read => t.time_disk + (1.0 - sys.locality_probability()) * t.time_net,
    }
}

pub fn used_chunks(size: f64, sys: &SystemProfile) -> f64 {
    size.max(0.0) / sys.chunk_size()
}

/// One seek per touched chunk, partial chunks included.
pub fn seeks(size: f64, sys: &SystemProfile) -> u64 {
    ceil_count(used_chunks(size, sys)) as u64
}

fn transfer_weight(sys: &SystemProfile, mode: IoMode) -> f64 {
    let transfer = chunk_transfer_time(sys, mode);
    // time_disk > 0 for any validated profile, so the denominator is never 0.
    transfer / (sys.seek_time() + transfer)
}

pub fn write_transfer_weight(sys: &SystemProfile) -> f64 {
    transfer_weight(sys, IoMode::Write)
}

pub fn read_transfer_weight(sys: &SystemProfile) -> f64 {
    transfer_weight(sys, IoMode::Read)
}

pub fn weighted_cost(chunks: f64, seek_count: u64, weight: f64) -> f64 {
    chunks * weight + seek_count as f64 * (1.0 - weight)
}

/// Output of every write and read cost equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub mode: IoMode,
    pub chunks: f64,
    pub seeks: u64,
    pub weighted_cost: f64,
    pub seconds: f64,
}

impl CostEstimate {
    pub fn new(mode: IoMode, chunks: f64, seeks: u64, sys: &SystemProfile) -> Self {
        let weight = transfer_weight(sys, mode);
        Self {
            mode,
            chunks,
            seeks,
            weighted_cost: weighted_cost(chunks, seeks, weight),
            seconds: chunks * chunk_transfer_time(sys, mode) + seeks as f64 * sys.seek_time(),
        }
    }

    pub fn read(chunks: f64, seeks: u64, sys: &SystemProfile) -> Self {
        Self::new(IoMode::Read, chunks, seeks, sys)
    }

    pub fn zero(mode: IoMode) -> Self {
        Self {
            mode,
            chunks: 0.0,
            seeks: 0,
            weighted_cost: 0.0,
            seconds: 0.0,
        }
    }
}

pub fn write_cost(layout_size: f64, sys: &SystemProfile) -> CostEstimate {
    CostEstimate::new(
        IoMode::Write,
        used_chunks(layout_size, sys),
        seeks(layout_size, sys),
        sys,
    )
}

/// Converts a weighted estimate back to seconds by multiplying with the
/// weight denominator of its mode.
pub fn cost_to_seconds(est: &CostEstimate, sys: &SystemProfile, mode: IoMode) -> Result<f64> {
    if est.mode != mode {
        return Err(Error::ModeMismatch {
            expected: mode.as_str(),
            found: est.mode.as_str(),
        });
    }
    // weighted = chunks*w + seeks*(1-w) with w = transfer / (seek + transfer);
    // scaling by the denominator gives chunks*transfer + seeks*seek.
    Ok(est.chunks * chunk_transfer_time(sys, mode) + est.seeks as f64 * sys.seek_time())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table3() -> SystemProfile {
        SystemProfile::default()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn derived_times_match_hand_arithmetic() {
        let t = derived_times(&table3());
        assert!(close(t.time_disk, 0.984_615_384_615_384_7, 1e-12));
        assert!(close(t.time_net, 1.024, 1e-12));

        let unit = SystemProfile::new(ProfileParams {
            chunk_size: 5.0e7,
            disk_bandwidth: 5.0e7,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(derived_times(&unit).time_disk, 1.0);
    }

    #[test]
    fn invalid_profiles_are_rejected() {
        for params in [
            ProfileParams {
                disk_bandwidth: 0.0,
                ..Default::default()
            },
            ProfileParams {
                chunk_size: -1.0,
                ..Default::default()
            },
            ProfileParams {
                locality_probability: 1.5,
                ..Default::default()
            },
            ProfileParams {
                replication_factor: 0,
                ..Default::default()
            },
            ProfileParams {
                seek_time: f64::NAN,
                ..Default::default()
            },
        ] {
            assert!(matches!(
                SystemProfile::new(params),
                Err(Error::InvalidProfile(_))
            ));
        }
    }

    #[test]
    fn chunks_and_seeks() {
        let sys = table3();
        assert_eq!(used_chunks(1.92e8, &sys), 1.5);
        assert_eq!(used_chunks(0.0, &sys), 0.0);
        assert_eq!(used_chunks(1.28e8, &sys), 1.0);
        assert_eq!(seeks(1.92e8, &sys), 2);
        assert_eq!(seeks(1.0, &sys), 1);
        assert_eq!(seeks(2.56e8, &sys), 2);
        assert_eq!(seeks(0.0, &sys), 0);
    }

    #[test]
    fn transfer_weights() {
        let sys = table3();
        assert!(close(write_transfer_weight(&sys), 0.998_353_971_992_200_4, 1e-12));
        assert!(close(read_transfer_weight(&sys), 0.995_099_650_491_995_2, 1e-12));

        let no_seek = SystemProfile::new(ProfileParams {
            seek_time: 0.0,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(write_transfer_weight(&no_seek), 1.0);

        // R = 1 and a seek as long as a chunk transfer.
        let symmetric = SystemProfile::new(ProfileParams {
            replication_factor: 1,
            chunk_size: 1.0e8,
            disk_bandwidth: 1.0e8,
            seek_time: 1.0,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(write_transfer_weight(&symmetric), 0.5);

        let local = SystemProfile::new(ProfileParams {
            locality_probability: 1.0,
            seek_time: 0.0,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(read_transfer_weight(&local), 1.0);

        let p1 = SystemProfile::new(ProfileParams {
            locality_probability: 1.0,
            ..Default::default()
        })
        .unwrap();
        let p0 = SystemProfile::new(ProfileParams {
            locality_probability: 0.0,
            ..Default::default()
        })
        .unwrap();
        assert!(read_transfer_weight(&p1) < read_transfer_weight(&p0));
    }

    #[test]
    fn weighted_cost_kernel() {
        assert!(close(
            weighted_cost(1.5, 2, 0.998_353_971_992_200_4),
            1.500_823_014_003_899_8,
            1e-12
        ));
        assert_eq!(weighted_cost(0.0, 0, 0.42), 0.0);
        assert_eq!(weighted_cost(3.25, 4, 1.0), 3.25);
    }

    #[test]
    fn write_cost_examples() {
        let sys = table3();
        let one = write_cost(1.28e8, &sys);
        assert_eq!(one.chunks, 1.0);
        assert_eq!(one.seeks, 1);
        assert!(close(one.weighted_cost, 1.0, 1e-12));

        let zero = write_cost(0.0, &sys);
        assert_eq!(zero, CostEstimate::zero(IoMode::Write));

        let est = write_cost(1.92e8, &sys);
        assert!(close(est.seconds, 4.558_923_076_923_077, 1e-12));
        assert!(close(
            cost_to_seconds(&est, &sys, IoMode::Write).unwrap(),
            4.558_923_076_923_077,
            1e-12
        ));
    }

    #[test]
    fn cost_to_seconds_checks_mode() {
        let sys = table3();
        let read = CostEstimate::read(1.0, 1, &sys);
        assert!(close(
            cost_to_seconds(&read, &sys, IoMode::Read).unwrap(),
            1.020_335_384_615_384_6,
            1e-12
        ));
        assert!(matches!(
            cost_to_seconds(&read, &sys, IoMode::Write),
            Err(Error::ModeMismatch { .. })
        ));
        assert_eq!(
            cost_to_seconds(&CostEstimate::zero(IoMode::Read), &sys, IoMode::Read).unwrap(),
            0.0
        );
    }

    #[test]
    fn rotation_is_opt_in() {
        let with = SystemProfile::new(ProfileParams {
            include_rotation: true,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(table3().seek_time(), 5.0e-3);
        assert!(close(with.seek_time(), 5.0e-3 + 4.17e-6, 1e-12));
    }

    #[test]
    fn ceil_count_snaps_near_integers() {
        assert_eq!(ceil_count(3.0 * (1.0 + 1e-15)), 3.0);
        assert_eq!(ceil_count(1.000_002), 2.0);
        assert_eq!(ceil_count(0.0), 0.0);
        assert_eq!(ceil_count(1e-9), 1.0);
    }
}
