//! Dual-route checks: the linearized analysis against the time-domain
//! simulator at desk scale.

use oobmimo_core::bussgang::{
    analytical_aclr, analytical_ber, analytical_psd, build_linearized_model, calibrated_dac,
    radiation_pattern, sindr_table, CovarianceMethod,
};
use oobmimo_core::channel::{draw_channel, ChannelRealization};
use oobmimo_core::filters::{FilterChain, ReconFilter};
use oobmimo_core::grid::{GridConfig, SystemGrid};
use oobmimo_core::montecarlo::{BandCovAccumulator, PsdAccumulator, Simulator};
use oobmimo_core::precoder::{zf_precoder, Constellation, PrecoderSet};
use oobmimo_core::quantizer::{DacModel, StepPolicy};
use oobmimo_core::rng::{substream, StreamDomain};

fn desk_grid(antennas: usize, users: usize) -> SystemGrid {
    SystemGrid::derive(GridConfig {
        n: 64,
        s: 16,
        delta_f_hz: 15e3,
        cp_len: 16,
        antennas,
        users,
        meas_factor: 10,
    })
    .unwrap()
}

fn desk_channel(grid: &SystemGrid, realization: u64) -> (ChannelRealization, PrecoderSet) {
    let mut rng = substream(500, StreamDomain::Channel, realization, 0);
    let aods: Vec<f64> = (0..grid.users).map(|u| 25.0 + 75.0 * u as f64).collect();
    let dists: Vec<f64> = (0..grid.users).map(|u| 90.0 + 60.0 * u as f64).collect();
    let ch = draw_channel(grid, &aods, &dists, 4, &mut rng).unwrap();
    let pre = zf_precoder(&ch, grid).unwrap();
    (ch, pre)
}

#[test]
fn one_bit_analytical_psd_matches_simulation() {
    let grid = desk_grid(8, 2);
    let chain = FilterChain::sampled(
        &grid,
        ReconFilter::Chain {
            eta: 2,
            f_cut_hz: 90e3,
            zoh: true,
        },
    )
    .unwrap();
    let sim = Simulator::new(grid.clone(), chain.clone(), 4).unwrap();
    let realizations = 50u64;
    let symbols = 8u64;
    let mut analytic = vec![0.0; grid.meas_len()];
    let mut psd_acc = PsdAccumulator::new(&grid);
    for r in 0..realizations {
        let (ch, pre) = desk_channel(&grid, r);
        let dac = calibrated_dac(Some(1), StepPolicy::MmseGaussian, &grid, &chain, &pre).unwrap();
        let model =
            build_linearized_model(&grid, &chain, &pre, &dac, CovarianceMethod::Auto).unwrap();
        for (a, p) in analytic
            .iter_mut()
            .zip(analytical_psd(&model, &chain, &grid).unwrap())
        {
            *a += p;
        }
        for s in 0..symbols {
            let mut sym_rng = substream(501, StreamDomain::Symbols, r, s);
            let mut noise_rng = substream(501, StreamDomain::Noise, r, s);
            let trial = sim
                .simulate_symbol(
                    &dac,
                    &ch,
                    &pre,
                    Constellation::Gaussian,
                    0.0,
                    &mut sym_rng,
                    &mut noise_rng,
                )
                .unwrap();
            psd_acc.add(&trial);
        }
    }
    for a in analytic.iter_mut() {
        *a /= realizations as f64;
    }
    let empirical = psd_acc.mean_psd();
    let peak = analytic.iter().cloned().fold(0.0f64, f64::max);
    let mut worst: (f64, usize) = (0.0, 0);
    for (idx, (&a, &e)) in analytic.iter().zip(&empirical).enumerate() {
        if a < peak * 1e-4 {
            continue; // below -40 dBc
        }
        let diff = (10.0 * (a / e).log10()).abs();
        if diff > worst.0 {
            worst = (diff, idx);
        }
    }
    assert!(
        worst.0 < 0.5,
        "worst per-bin deviation {:.3} dB at bin {}",
        worst.0,
        worst.1
    );
}

#[test]
fn one_bit_analytical_aclr_matches_simulation() {
    let grid = desk_grid(8, 2);
    let chain = FilterChain::sampled(
        &grid,
        ReconFilter::Chain {
            eta: 2,
            f_cut_hz: 90e3,
            zoh: true,
        },
    )
    .unwrap();
    let sim = Simulator::new(grid.clone(), chain.clone(), 4).unwrap();
    let realizations = 40u64;
    let symbols = 8u64;
    let mut analytic_sum = 0.0;
    let mut psd_acc = PsdAccumulator::new(&grid);
    for r in 0..realizations {
        let (ch, pre) = desk_channel(&grid, r);
        let dac = calibrated_dac(Some(1), StepPolicy::MmseGaussian, &grid, &chain, &pre).unwrap();
        let model =
            build_linearized_model(&grid, &chain, &pre, &dac, CovarianceMethod::Auto).unwrap();
        analytic_sum += analytical_aclr(&model, &grid).unwrap();
        for s in 0..symbols {
            let mut sym_rng = substream(502, StreamDomain::Symbols, r, s);
            let mut noise_rng = substream(502, StreamDomain::Noise, r, s);
            let trial = sim
                .simulate_symbol(
                    &dac,
                    &ch,
                    &pre,
                    Constellation::Gaussian,
                    0.0,
                    &mut sym_rng,
                    &mut noise_rng,
                )
                .unwrap();
            psd_acc.add(&trial);
        }
    }
    let analytic_db = 10.0 * (analytic_sum / realizations as f64).log10();
    let empirical =
        oobmimo_core::montecarlo::empirical_aclr(&psd_acc.per_antenna_psd(), &grid).unwrap();
    let empirical_db = 10.0 * empirical.log10();
    assert!(
        (analytic_db - empirical_db).abs() < 0.2,
        "analytical {analytic_db} dB vs empirical {empirical_db} dB"
    );
}

#[test]
fn analytical_ber_matches_qpsk_simulation() {
    // Gaussian-input analysis against QPSK bit counting; the DAC input is a
    // sum of U*S contributions, so the Gaussian assumption needs some width.
    let grid = SystemGrid::derive(GridConfig {
        n: 256,
        s: 64,
        delta_f_hz: 15e3,
        cp_len: 32,
        antennas: 16,
        users: 4,
        meas_factor: 4,
    })
    .unwrap();
    let chain = FilterChain::sampled(
        &grid,
        ReconFilter::Chain {
            eta: 2,
            f_cut_hz: 0.375 * grid.f_bw_hz,
            zoh: true,
        },
    )
    .unwrap();
    let sim = Simulator::new(grid.clone(), chain.clone(), 6).unwrap();
    let n0 = 0.05; // SNR 13 dB, BER around 1e-2 for 1-bit at this scale
    let realizations = 12u64;
    let symbols = 25u64;
    let mut analytic_acc = 0.0;
    let (mut errors, mut bits) = (0u64, 0u64);
    for r in 0..realizations {
        let mut rng = substream(503, StreamDomain::Channel, r, 0);
        let ch = draw_channel(&grid, &[25.0, 55.0, 75.0, 100.0], &[90.0, 65.0, 115.0, 150.0], 6, &mut rng)
            .unwrap();
        let pre = zf_precoder(&ch, &grid).unwrap();
        let dac = calibrated_dac(Some(1), StepPolicy::MmseGaussian, &grid, &chain, &pre).unwrap();
        let model =
            build_linearized_model(&grid, &chain, &pre, &dac, CovarianceMethod::Auto).unwrap();
        let table = sindr_table(&model, &ch, &pre, &grid, n0).unwrap();
        let values: Vec<f64> = table.iter_values().collect();
        analytic_acc += analytical_ber(&values);
        for s in 0..symbols {
            let mut sym_rng = substream(504, StreamDomain::Symbols, r, s);
            let mut noise_rng = substream(504, StreamDomain::Noise, r, s);
            let trial = sim
                .simulate_symbol(
                    &dac,
                    &ch,
                    &pre,
                    Constellation::Qpsk,
                    n0,
                    &mut sym_rng,
                    &mut noise_rng,
                )
                .unwrap();
            errors += trial.bit_errors;
            bits += trial.bits;
        }
    }
    let analytic = analytic_acc / realizations as f64;
    let empirical = errors as f64 / bits as f64;
    assert!(analytic > 1e-3, "test point drifted out of range: {analytic}");
    let rel = (analytic - empirical).abs() / analytic;
    assert!(
        rel < 0.10,
        "analytical {analytic:.4e} vs empirical {empirical:.4e} ({bits} bits, rel {rel:.3})"
    );
}

#[test]
fn radiation_pattern_matches_band_covariance_estimate() {
    let grid = desk_grid(8, 2);
    let chain = FilterChain::sampled(
        &grid,
        ReconFilter::Chain {
            eta: 2,
            f_cut_hz: 90e3,
            zoh: true,
        },
    )
    .unwrap();
    let sim = Simulator::new(grid.clone(), chain.clone(), 4).unwrap();
    let realizations = 40u64;
    let symbols = 6u64;
    let mut inband_ana = oobmimo_core::cmat::CMat::zeros(grid.antennas, grid.antennas);
    let mut adjacent_ana = oobmimo_core::cmat::CMat::zeros(grid.antennas, grid.antennas);
    let mut band_acc = BandCovAccumulator::new(&grid).unwrap();
    for r in 0..realizations {
        let (ch, pre) = desk_channel(&grid, r);
        let dac = calibrated_dac(Some(1), StepPolicy::MmseGaussian, &grid, &chain, &pre).unwrap();
        let model =
            build_linearized_model(&grid, &chain, &pre, &dac, CovarianceMethod::Auto).unwrap();
        inband_ana.add_assign(&model.inband_cov);
        adjacent_ana.add_assign(model.adjacent_cov.as_ref().unwrap());
        for s in 0..symbols {
            let mut sym_rng = substream(505, StreamDomain::Symbols, r, s);
            let mut noise_rng = substream(505, StreamDomain::Noise, r, s);
            let trial = sim
                .simulate_symbol(
                    &dac,
                    &ch,
                    &pre,
                    Constellation::Gaussian,
                    0.0,
                    &mut sym_rng,
                    &mut noise_rng,
                )
                .unwrap();
            band_acc.add(&trial);
        }
    }
    inband_ana.scale(1.0 / realizations as f64);
    adjacent_ana.scale(1.0 / realizations as f64);
    let (inband_emp, adjacent_emp) = band_acc.band_covariances();
    for phi_deg in (0..=180).step_by(10) {
        let phi = phi_deg as f64;
        let ia = radiation_pattern(&inband_ana, grid.s + 1, phi);
        let ie = radiation_pattern(&inband_emp, grid.s + 1, phi);
        let da = 10.0 * (ia / ie).log10();
        assert!(da.abs() < 0.35, "in-band at {phi} deg: {da} dB");
        let aa = radiation_pattern(&adjacent_ana, 2 * grid.s + 2, phi);
        let ae = radiation_pattern(&adjacent_emp, 2 * grid.s + 2, phi);
        let db = 10.0 * (aa / ae).log10();
        assert!(db.abs() < 0.35, "adjacent at {phi} deg: {db} dB");
    }
}

#[test]
fn sharper_filters_improve_aclr() {
    let grid = desk_grid(8, 2);
    let f_cut = 90e3;
    let mut aclr_by_eta = Vec::new();
    for eta in [1u8, 2] {
        let chain = FilterChain::sampled(
            &grid,
            ReconFilter::Chain {
                eta,
                f_cut_hz: f_cut,
                zoh: true,
            },
        )
        .unwrap();
        let mut acc = 0.0;
        let realizations = 20u64;
        for r in 0..realizations {
            let (_ch, pre) = desk_channel(&grid, r);
            let dac =
                calibrated_dac(Some(1), StepPolicy::MmseGaussian, &grid, &chain, &pre).unwrap();
            let model =
                build_linearized_model(&grid, &chain, &pre, &dac, CovarianceMethod::Auto).unwrap();
            acc += analytical_aclr(&model, &grid).unwrap();
        }
        aclr_by_eta.push(acc / realizations as f64);
    }
    assert!(
        aclr_by_eta[1] < aclr_by_eta[0],
        "order-2 ACLR {} should beat order-1 {}",
        aclr_by_eta[1],
        aclr_by_eta[0]
    );
}

#[test]
fn infinite_resolution_ideal_chain_has_no_out_of_band_content() {
    let grid = desk_grid(4, 2);
    let chain = FilterChain::sampled(&grid, ReconFilter::IdealLowpass).unwrap();
    let sim = Simulator::new(grid.clone(), chain.clone(), 4).unwrap();
    let (ch, pre) = desk_channel(&grid, 0);
    let mut psd_acc = PsdAccumulator::new(&grid);
    for s in 0..10u64 {
        let mut sym_rng = substream(506, StreamDomain::Symbols, 0, s);
        let mut noise_rng = substream(506, StreamDomain::Noise, 0, s);
        let trial = sim
            .simulate_symbol(
                &DacModel::Infinite,
                &ch,
                &pre,
                Constellation::Gaussian,
                0.0,
                &mut sym_rng,
                &mut noise_rng,
            )
            .unwrap();
        psd_acc.add(&trial);
    }
    let aclr = oobmimo_core::montecarlo::empirical_aclr(&psd_acc.per_antenna_psd(), &grid).unwrap();
    assert!(
        10.0 * aclr.log10() < -60.0,
        "ideal chain leaks {aclr:.3e} into the adjacent channels"
    );
}
