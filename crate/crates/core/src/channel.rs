//! Wireless channel model: log-distance pathloss, block Rayleigh fading,
//! per-UE SNR.
//!
//! Fading is redrawn independently on every environment step (block fading).
//! All functions are pure; stochastic draws take the caller's RNG stream, so
//! concurrent use is safe as long as each actor owns its stream.

use rand::Rng;
use rand_distr::Exp1;

use crate::config::ChannelConfig;
use crate::error::{Error, Result};

/// Channel parameters in linear SI units, derived once from config.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_psd_w_per_hz: f64,
    pub pathloss_ref_db: f64,
    pub pathloss_exponent: f64,
    pub pathloss_ref_distance_m: f64,
    pub min_distance_m: f64,
}

impl ChannelParams {
    pub fn from_config(cfg: &ChannelConfig) -> Self {
        ChannelParams {
            carrier_hz: cfg.carrier_hz,
            bandwidth_hz: cfg.bandwidth_hz,
            noise_psd_w_per_hz: cfg.noise_psd_w_per_hz(),
            pathloss_ref_db: cfg.pathloss_ref_db,
            pathloss_exponent: cfg.pathloss_exponent,
            pathloss_ref_distance_m: cfg.pathloss_ref_distance_m,
            min_distance_m: cfg.min_distance_m,
        }
    }
}

/// One realization of a UE's subchannel for a single step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelDraw {
    /// Large-scale (pathloss) linear power gain, > 0.
    pub large_scale_gain: f64,
    /// Squared magnitude of the Rayleigh coefficient, Exp(1)-distributed.
    pub rayleigh_coeff_sq: f64,
    /// Subband bandwidth, Hz.
    pub bandwidth_hz: f64,
    /// Noise power spectral density, W/Hz.
    pub noise_psd_w_per_hz: f64,
}

/// Linear power gain of the log-distance pathloss model.
///
/// `gain = 10^(-(PL0 + 10 n log10(d/d0)) / 10)`, with the distance clamped
/// to the configured floor. Strictly decreasing in distance for a positive
/// exponent.
pub fn pathloss_gain(distance_m: f64, carrier_hz: f64, params: &ChannelParams) -> Result<f64> {
    if carrier_hz <= 0.0 || !carrier_hz.is_finite() {
        return Err(Error::config(format!(
            "carrier frequency must be positive, got {carrier_hz}"
        )));
    }
    if params.pathloss_exponent <= 0.0 || !params.pathloss_exponent.is_finite() {
        return Err(Error::config(format!(
            "pathloss exponent must be positive, got {}",
            params.pathloss_exponent
        )));
    }
    if params.pathloss_ref_distance_m <= 0.0 {
        return Err(Error::config(
            "pathloss reference distance must be positive".to_string(),
        ));
    }
    let d = distance_m.max(params.min_distance_m);
    let pl_db = params.pathloss_ref_db
        + 10.0 * params.pathloss_exponent * (d / params.pathloss_ref_distance_m).log10();
    Ok(10f64.powf(-pl_db / 10.0))
}

/// Draw `|h|^2` for one step: exponential with unit mean, equivalent to the
/// squared magnitude of a circularly symmetric complex normal coefficient.
pub fn draw_fading<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Exp1)
}

/// Instantaneous linear SNR. Zero whenever the UE executes locally.
pub fn snr(offload: bool, power_w: f64, draw: &ChannelDraw) -> Result<f64> {
    if power_w < 0.0 || !power_w.is_finite() {
        return Err(Error::invalid(format!(
            "transmit power must be non-negative, got {power_w}"
        )));
    }
    if !offload {
        return Ok(0.0);
    }
    Ok(power_w * draw.large_scale_gain * draw.rayleigh_coeff_sq
        / (draw.bandwidth_hz * draw.noise_psd_w_per_hz))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::seeds;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> ChannelParams {
        ChannelParams::from_config(&ScenarioConfig::default().channel)
    }

    fn draw(g: f64, h2: f64, w: f64, n0: f64) -> ChannelDraw {
        ChannelDraw {
            large_scale_gain: g,
            rayleigh_coeff_sq: h2,
            bandwidth_hz: w,
            noise_psd_w_per_hz: n0,
        }
    }

    #[test]
    fn gain_at_reference_distance() {
        let p = params();
        let g = pathloss_gain(p.pathloss_ref_distance_m, p.carrier_hz, &p).unwrap();
        assert_eq!(g, 10f64.powf(-p.pathloss_ref_db / 10.0));
    }

    #[test]
    fn gain_hand_evaluated_at_100m() {
        // PL0 = 46 dB, n = 3.0, d0 = 1 m, d = 100 m -> PL = 106 dB
        let p = ChannelParams {
            pathloss_ref_db: 46.0,
            pathloss_exponent: 3.0,
            ..params()
        };
        let g = pathloss_gain(100.0, p.carrier_hz, &p).unwrap();
        let expected = 10f64.powf(-10.6);
        assert!((g - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn inverse_square_doubling() {
        let p = ChannelParams {
            pathloss_exponent: 2.0,
            ..params()
        };
        let g1 = pathloss_gain(50.0, p.carrier_hz, &p).unwrap();
        let g2 = pathloss_gain(100.0, p.carrier_hz, &p).unwrap();
        assert!((g1 / g2 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn distance_clamped_to_floor() {
        let p = params();
        let near = pathloss_gain(0.01, p.carrier_hz, &p).unwrap();
        let floor = pathloss_gain(p.min_distance_m, p.carrier_hz, &p).unwrap();
        assert_eq!(near, floor);
    }

    #[test]
    fn bad_carrier_and_exponent_rejected() {
        let p = params();
        assert!(pathloss_gain(10.0, 0.0, &p).is_err());
        assert!(pathloss_gain(10.0, -1.0, &p).is_err());
        let bad = ChannelParams {
            pathloss_exponent: 0.0,
            ..params()
        };
        assert!(pathloss_gain(10.0, bad.carrier_hz, &bad).is_err());
    }

    #[test]
    fn fading_golden_sequence_seed_42() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let first: Vec<f64> = (0..3).map(|_| draw_fading(&mut rng)).collect();
        // Frozen from a reference run; guards the determinism contract.
        assert_eq!(
            first,
            vec![0.875883378255026, 1.4939367483634283, 0.6516636411528097]
        );
    }

    #[test]
    fn fading_mean_and_tail_match_unit_exponential() {
        let mut rng = seeds::stream_rng(7, seeds::ENV);
        let n = 100_000;
        let mut sum = 0.0;
        let mut tail = 0usize;
        for _ in 0..n {
            let h2 = draw_fading(&mut rng);
            assert!(h2 >= 0.0);
            sum += h2;
            if h2 > 2.0 {
                tail += 1;
            }
        }
        let mean = sum / n as f64;
        assert!((0.98..=1.02).contains(&mean), "mean {mean}");
        let p_tail = tail as f64 / n as f64;
        assert!((p_tail - (-2.0f64).exp()).abs() < 0.01, "tail {p_tail}");
    }

    #[test]
    fn snr_zero_when_local() {
        let d = draw(1e-9, 3.0, 1e5, 1e-20);
        assert_eq!(snr(false, 0.25, &d).unwrap(), 0.0);
    }

    #[test]
    fn snr_hand_evaluated() {
        let d = draw(1.0, 1.0, 1e5, 1e-8);
        let g = snr(true, 0.1, &d).unwrap();
        assert!((g - 100.0).abs() < 1e-9);
    }

    #[test]
    fn snr_rejects_negative_power() {
        let d = draw(1.0, 1.0, 1e5, 1e-8);
        assert!(snr(true, -0.1, &d).is_err());
    }

    proptest! {
        #[test]
        fn snr_scalings(
            p in 1e-4f64..1.0,
            g in 1e-14f64..1e-2,
            h2 in 1e-6f64..10.0,
            w in 1e3f64..1e7,
            n0 in 1e-21f64..1e-15,
            c in 1e-3f64..1e3,
        ) {
            let base = snr(true, p, &draw(g, h2, w, n0)).unwrap();
            // linear in p, g, |h|^2; inverse-linear in W and noise PSD
            let rel = |a: f64, b: f64| ((a - b) / b).abs();
            prop_assert!(rel(snr(true, c * p, &draw(g, h2, w, n0)).unwrap(), c * base) <= 1e-12);
            prop_assert!(rel(snr(true, p, &draw(c * g, h2, w, n0)).unwrap(), c * base) <= 1e-12);
            prop_assert!(rel(snr(true, p, &draw(g, c * h2, w, n0)).unwrap(), c * base) <= 1e-12);
            prop_assert!(rel(snr(true, p, &draw(g, h2, c * w, n0)).unwrap(), base / c) <= 1e-12);
            prop_assert!(rel(snr(true, p, &draw(g, h2, w, c * n0)).unwrap(), base / c) <= 1e-12);
        }

        #[test]
        fn pathloss_monotone_decreasing(
            d1 in 1.0f64..5e3,
            delta in 1e-3f64..5e3,
            n_pl in 0.5f64..6.0,
        ) {
            let p = ChannelParams { pathloss_exponent: n_pl, ..params() };
            let g1 = pathloss_gain(d1, p.carrier_hz, &p).unwrap();
            let g2 = pathloss_gain(d1 + delta, p.carrier_hz, &p).unwrap();
            prop_assert!(g2 < g1);
        }
    }
}
