//! System dimensioning: OFDM/DAC grid, subcarrier index sets, and the
//! signed-frequency bin mapping used by every other module.

use crate::error::{Error, Result};

/// Raw dimensioning parameters, validated by [`SystemGrid::derive`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    /// Samples per OFDM symbol (= total subcarriers), `N`.
    pub n: usize,
    /// Occupied subcarriers, `S` (even, `< N`).
    pub s: usize,
    /// Subcarrier spacing in Hz.
    pub delta_f_hz: f64,
    /// Cyclic-prefix length in samples.
    pub cp_len: usize,
    /// Base-station antennas, `B`.
    pub antennas: usize,
    /// Single-antenna users, `U`.
    pub users: usize,
    /// Oversampling factor of the analog-domain measurement grid.
    pub meas_factor: usize,
}

impl Default for GridConfig {
    /// LTE-inspired default: 300 of 1024 subcarriers at 15 kHz spacing,
    /// 72-sample cyclic prefix, 64 antennas serving 4 users.
    fn default() -> Self {
        Self {
            n: 1024,
            s: 300,
            delta_f_hz: 15e3,
            cp_len: 72,
            antennas: 64,
            users: 4,
            meas_factor: 10,
        }
    }
}

/// Validated system grid with derived rates and index sets.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemGrid {
    pub n: usize,
    pub s: usize,
    pub delta_f_hz: f64,
    pub fs_hz: f64,
    pub f_bw_hz: f64,
    pub osr: f64,
    pub cp_len: usize,
    pub antennas: usize,
    pub users: usize,
    pub meas_factor: usize,
    occupied: Vec<usize>,
    guard: Vec<usize>,
    occupied_mask: Vec<bool>,
}

impl SystemGrid {
    /// Validates the raw parameters and derives `f_s`, `f_BW`, `OSR` and the
    /// occupied/guard index sets `{1..S/2} u {N-S/2..N-1}` / complement.
    pub fn derive(cfg: GridConfig) -> Result<Self> {
        if cfg.n == 0 || cfg.s == 0 || cfg.cp_len == 0 || cfg.antennas == 0 || cfg.users == 0 {
            return Err(Error::Config(
                "n, s, cp_len, antennas and users must all be positive".into(),
            ));
        }
        if !(cfg.delta_f_hz > 0.0) {
            return Err(Error::Config("subcarrier spacing must be positive".into()));
        }
        if cfg.n % 2 != 0 {
            return Err(Error::Config(
                "n must be even for the signed-frequency bin mapping".into(),
            ));
        }
        if cfg.s % 2 != 0 {
            return Err(Error::Config("s must be even".into()));
        }
        if cfg.s >= cfg.n {
            return Err(Error::Config(format!(
                "occupied subcarriers s={} must be below n={}",
                cfg.s, cfg.n
            )));
        }
        if cfg.users > cfg.antennas {
            return Err(Error::Config(format!(
                "users ({}) may not exceed antennas ({})",
                cfg.users, cfg.antennas
            )));
        }
        if cfg.meas_factor == 0 {
            return Err(Error::Config("meas_factor must be positive".into()));
        }
        let mut occupied: Vec<usize> = (1..=cfg.s / 2).collect();
        occupied.extend(cfg.n - cfg.s / 2..cfg.n);
        let mut occupied_mask = vec![false; cfg.n];
        for &k in &occupied {
            occupied_mask[k] = true;
        }
        let guard = (0..cfg.n).filter(|&k| !occupied_mask[k]).collect();
        Ok(Self {
            fs_hz: cfg.n as f64 * cfg.delta_f_hz,
            f_bw_hz: cfg.s as f64 * cfg.delta_f_hz,
            osr: cfg.n as f64 / cfg.s as f64,
            n: cfg.n,
            s: cfg.s,
            delta_f_hz: cfg.delta_f_hz,
            cp_len: cfg.cp_len,
            antennas: cfg.antennas,
            users: cfg.users,
            meas_factor: cfg.meas_factor,
            occupied,
            guard,
            occupied_mask,
        })
    }

    /// Occupied subcarrier indices in ascending order.
    pub fn occupied(&self) -> &[usize] {
        &self.occupied
    }

    /// Guard (unused) subcarrier indices in ascending order.
    pub fn guard(&self) -> &[usize] {
        &self.guard
    }

    pub fn is_occupied(&self, k: usize) -> bool {
        self.occupied_mask.get(k).copied().unwrap_or(false)
    }

    /// Signed frequency index of bin `k`; the bin frequency is
    /// `signed_bin(k) * delta_f`.
    pub fn signed_bin(&self, k: usize) -> Result<i64> {
        signed_bin(k, self.n)
    }

    /// Frequency in Hz of bin `k`.
    pub fn bin_freq_hz(&self, k: usize) -> Result<f64> {
        Ok(self.signed_bin(k)? as f64 * self.delta_f_hz)
    }

    /// Bin index carrying signed frequency index `p` (inverse of
    /// [`signed_bin`]).
    pub fn bin_of_signed(&self, p: i64) -> usize {
        p.rem_euclid(self.n as i64) as usize
    }

    /// Number of samples of one OFDM symbol on the measurement grid.
    pub fn meas_len(&self) -> usize {
        self.meas_factor * self.n
    }

    /// Per-antenna, per-sample transmit power budget `1/(B * OSR)`.
    pub fn target_power(&self) -> f64 {
        1.0 / (self.antennas as f64 * self.osr)
    }

    /// Bins entering the in-band power sums: the occupied set plus the DC bin.
    pub fn inband_psd_bins(&self) -> Vec<usize> {
        let mut bins = vec![0usize];
        bins.extend_from_slice(&self.occupied);
        bins
    }

    /// Bin index sets covering the two adjacent channels.
    ///
    /// Each adjacent channel has the occupied bandwidth `S * delta_f` and is
    /// centered at `+-(10/9) * f_BW` (the 5 MHz carrier raster of the
    /// 4.5 MHz LTE grid). Edge bins are selected by flooring the band-edge
    /// frequencies onto the grid, which yields `S + 1` bins per channel.
    pub fn adjacent_bin_sets(&self) -> Result<(Vec<usize>, Vec<usize>)> {
        let lo = (11.0 / 18.0 * self.s as f64).floor() as i64;
        let hi = (29.0 / 18.0 * self.s as f64).floor() as i64;
        if hi > self.n as i64 / 2 - 1 {
            return Err(Error::Config(format!(
                "adjacent channels (up to bin {hi}) exceed the Nyquist range of n={}; \
                 an oversampling ratio above 29/9 is required",
                self.n
            )));
        }
        let upper: Vec<usize> = (lo..=hi).map(|p| self.bin_of_signed(p)).collect();
        let lower: Vec<usize> = (-hi..=-lo).map(|p| self.bin_of_signed(p)).collect();
        Ok((lower, upper))
    }
}

/// Signed frequency index `p(k) = ((k + N/2) mod N) - N/2` in `[-N/2, N/2)`.
pub fn signed_bin(k: usize, n: usize) -> Result<i64> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::Config("signed_bin requires an even, positive n".into()));
    }
    if k >= n {
        return Err(Error::Config(format!("bin index {k} outside [0, {n})")));
    }
    let n = n as i64;
    Ok((k as i64 + n / 2).rem_euclid(n) - n / 2)
}

/// Signed index on the measurement grid of length `m`, same convention as
/// [`signed_bin`].
pub fn signed_bin_extended(idx: usize, m: usize) -> Result<i64> {
    signed_bin(idx, m)
}
