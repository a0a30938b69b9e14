//! Frequency-selective plane-wave channel: one fixed line-of-sight tap plus
//! random non-LoS taps with an exponential power delay profile, a
//! half-wavelength uniform linear array at the base station, and free-space
//! path loss.

use crate::cmat::CMat;
use crate::error::{Error, Result};
use crate::grid::SystemGrid;
use crate::C64;
use rand::Rng;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// Time-domain tap matrices `H_l`, each `users x antennas`.
    pub taps: Vec<CMat>,
    /// Per-subcarrier responses `H_k = sum_l H_l e^{-j 2 pi k l / N}`.
    pub freq: Vec<CMat>,
    pub aods_deg: Vec<f64>,
    pub distances_m: Vec<f64>,
}

/// Steering vector of the half-wavelength ULA: entries
/// `e^{-j pi (b - 1) cos(phi)}`.
pub fn steering_vector(phi_deg: f64, antennas: usize) -> Vec<C64> {
    let cos_phi = phi_deg.to_radians().cos();
    (0..antennas)
        .map(|b| C64::cis(-PI * b as f64 * cos_phi))
        .collect()
}

/// Draws one channel realization.
///
/// Tap 0 is the LoS path at the user's angle of departure with power 3/4 of
/// the large-scale gain; taps `l >= 1` share one random angle offset per tap
/// and carry the remaining 1/4 with weights proportional to `e^{-l}`. Non-LoS
/// tap gains get an independent uniform phase per user and tap; the LoS phase
/// is zero.
pub fn draw_channel<R: Rng + ?Sized>(
    grid: &SystemGrid,
    aods_deg: &[f64],
    distances_m: &[f64],
    taps: usize,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let users = grid.users;
    if aods_deg.len() != users || distances_m.len() != users {
        return Err(Error::Dimension(format!(
            "expected {} angles and distances, got {} and {}",
            users,
            aods_deg.len(),
            distances_m.len()
        )));
    }
    if taps == 0 {
        return Err(Error::Config("at least one channel tap is required".into()));
    }
    if taps > grid.n {
        return Err(Error::Config(format!(
            "tap count {taps} exceeds the symbol length {}",
            grid.n
        )));
    }
    if distances_m.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::Config("distances must be positive".into()));
    }
    let gains_large: Vec<f64> = distances_m.iter().map(|&d| 100.0 / d).collect();

    // Exponential power delay profile: gamma_0^2 = 3/4, remaining taps share
    // 1/4 with weights e^{-l}.
    let nlos_norm: f64 = (1..taps).map(|l| (-(l as f64)).exp()).sum();
    let mut tap_mats = Vec::with_capacity(taps);
    let los_gain = (3.0f64 / 4.0).sqrt();
    let mut h0 = CMat::zeros(users, grid.antennas);
    for (u, (&phi, &psi)) in aods_deg.iter().zip(&gains_large).enumerate() {
        let v = steering_vector(phi, grid.antennas);
        for (b, &vb) in v.iter().enumerate() {
            h0[(u, b)] = vb * (psi * los_gain);
        }
    }
    tap_mats.push(h0);
    for l in 1..taps {
        let offset_deg = rng.random::<f64>() * 360.0 - 180.0;
        let gamma = (0.25 * (-(l as f64)).exp() / nlos_norm).sqrt();
        let mut h = CMat::zeros(users, grid.antennas);
        for (u, (&phi, &psi)) in aods_deg.iter().zip(&gains_large).enumerate() {
            let phase = C64::cis(rng.random::<f64>() * 2.0 * PI);
            let v = steering_vector(phi + offset_deg, grid.antennas);
            let amp = phase * (psi * gamma);
            for (b, &vb) in v.iter().enumerate() {
                h[(u, b)] = vb * amp;
            }
        }
        tap_mats.push(h);
    }
    let freq = frequency_response(&tap_mats, grid.n);
    Ok(ChannelRealization {
        taps: tap_mats,
        freq,
        aods_deg: aods_deg.to_vec(),
        distances_m: distances_m.to_vec(),
    })
}

/// Per-subcarrier response `H_k = sum_l H_l e^{-j k (2 pi / N) l}`.
pub fn frequency_response(taps: &[CMat], n: usize) -> Vec<CMat> {
    let (users, antennas) = (taps[0].rows(), taps[0].cols());
    (0..n)
        .map(|k| {
            let mut h = CMat::zeros(users, antennas);
            for (l, tap) in taps.iter().enumerate() {
                let w = C64::cis(-2.0 * PI * (k * l) as f64 / n as f64);
                for u in 0..users {
                    for b in 0..antennas {
                        h[(u, b)] += tap[(u, b)] * w;
                    }
                }
            }
            h
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridConfig;
    use crate::rng::{substream, StreamDomain};

    fn small_grid() -> SystemGrid {
        SystemGrid::derive(GridConfig {
            n: 16,
            s: 8,
            delta_f_hz: 15e3,
            cp_len: 4,
            antennas: 4,
            users: 2,
            meas_factor: 10,
        })
        .unwrap()
    }

    #[test]
    fn steering_vector_closed_forms() {
        let v = steering_vector(90.0, 5);
        for e in &v {
            assert!((e - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
        let v0 = steering_vector(0.0, 4);
        for (b, e) in v0.iter().enumerate() {
            let expect = if b % 2 == 0 { 1.0 } else { -1.0 };
            assert!((e.re - expect).abs() < 1e-12 && e.im.abs() < 1e-9);
        }
        let norm: f64 = steering_vector(37.0, 8).iter().map(|e| e.norm_sqr()).sum();
        assert!((norm - 8.0).abs() < 1e-12);
    }

    #[test]
    fn unit_distance_has_unit_large_scale_gain() {
        let grid = small_grid();
        let mut rng = substream(1, StreamDomain::Channel, 0, 0);
        let ch = draw_channel(&grid, &[30.0, 120.0], &[100.0, 100.0], 1, &mut rng).unwrap();
        // Single LoS tap: |[H_0]_{u,b}|^2 = psi^2 * 3/4 = 3/4.
        for u in 0..2 {
            for b in 0..4 {
                assert!((ch.taps[0][(u, b)].norm_sqr() - 0.75).abs() < 1e-12);
            }
        }
        // Frequency-flat response.
        for k in 0..grid.n {
            assert!(ch.freq[k].sub(&ch.freq[0]).frobenius_norm() < 1e-12);
        }
    }

    #[test]
    fn frequency_response_closed_forms() {
        let h0 = CMat::from_fn(1, 1, |_, _| C64::new(2.0, 0.0));
        let h1 = CMat::from_fn(1, 1, |_, _| C64::new(0.5, 0.0));
        let freq = frequency_response(&[h0.clone(), h1.clone()], 2);
        assert!((freq[0][(0, 0)] - C64::new(2.5, 0.0)).norm() < 1e-12);
        assert!((freq[1][(0, 0)] - C64::new(1.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn frequency_response_matches_fft_oracle() {
        let mut rng = substream(3, StreamDomain::Channel, 1, 0);
        let taps: Vec<CMat> = (0..3)
            .map(|_| CMat::from_fn(2, 2, |_, _| crate::rng::standard_complex(&mut rng)))
            .collect();
        let n = 8;
        let freq = frequency_response(&taps, n);
        let dft = crate::fft::Dft::new(n);
        for u in 0..2 {
            for b in 0..2 {
                let mut buf = vec![C64::new(0.0, 0.0); n];
                for (l, tap) in taps.iter().enumerate() {
                    buf[l] = tap[(u, b)];
                }
                dft.forward_raw(&mut buf);
                for k in 0..n {
                    assert!((freq[k][(u, b)] - buf[k]).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn tap_energy_bookkeeping() {
        let grid = small_grid();
        let trials = 2000;
        let mut energy = [0.0f64; 2];
        for t in 0..trials {
            let mut rng = substream(17, StreamDomain::Channel, t, 0);
            let ch = draw_channel(&grid, &[25.0, 100.0], &[50.0, 200.0], 10, &mut rng).unwrap();
            for u in 0..2 {
                for tap in &ch.taps {
                    for b in 0..grid.antennas {
                        energy[u] += tap[(u, b)].norm_sqr();
                    }
                }
            }
        }
        for (u, &d) in [50.0f64, 200.0].iter().enumerate() {
            let psi2 = (100.0 / d) * (100.0 / d);
            let expect = psi2 * grid.antennas as f64;
            let got = energy[u] / trials as f64;
            assert!(
                (got - expect).abs() < 0.02 * expect,
                "user {u}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn parseval_between_taps_and_frequency() {
        let grid = small_grid();
        let mut rng = substream(8, StreamDomain::Channel, 0, 0);
        let ch = draw_channel(&grid, &[25.0, 100.0], &[90.0, 150.0], 5, &mut rng).unwrap();
        let tap_energy: f64 = ch.taps.iter().map(|t| t.frobenius_norm().powi(2)).sum();
        let freq_energy: f64 = ch.freq.iter().map(|f| f.frobenius_norm().powi(2)).sum();
        assert!((freq_energy - grid.n as f64 * tap_energy).abs() < 1e-8 * freq_energy);
    }

    #[test]
    fn rejects_bad_arguments() {
        let grid = small_grid();
        let mut rng = substream(0, StreamDomain::Channel, 0, 0);
        assert!(draw_channel(&grid, &[10.0], &[100.0, 100.0], 4, &mut rng).is_err());
        assert!(draw_channel(&grid, &[10.0, 20.0], &[100.0, 100.0], 0, &mut rng).is_err());
        assert!(draw_channel(&grid, &[10.0, 20.0], &[100.0, -1.0], 4, &mut rng).is_err());
    }
}
