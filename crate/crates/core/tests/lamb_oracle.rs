//! A0 dispersion checked against a dense scan of the real sub-sonic form
//! `(k² + b²)²·tanh(a·h) − 4k²·a·b·tanh(b·h) = 0`, with `α = i·a`, `β = i·b`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rtcdrift::lamb::{self, MediumDb, MediumSpec, DEFAULT_ATTENUATION, ROOT_TOLERANCE};
use rtcdrift::signals::Sinusoid;

const F: f64 = 32768.0;

fn subsonic_residual(c_l: f64, c_t: f64, h: f64, c: f64) -> f64 {
    let w = TAU * F;
    let k = w / c;
    let a = (k * k - (w / c_l).powi(2)).sqrt();
    let b = (k * k - (w / c_t).powi(2)).sqrt();
    (k * k + b * b).powi(2) * (a * h).tanh() - 4.0 * k * k * a * b * (b * h).tanh()
}

/// 1 m/s scan over (10, c_T) followed by bisection to 1e-12 relative.
fn scan_oracle(c_l: f64, c_t: f64, thickness: f64) -> f64 {
    let h = 0.5 * thickness;
    let g = |c| subsonic_residual(c_l, c_t, h, c);
    let mut c = 10.0;
    while c + 1.0 < c_t {
        if g(c).signum() != g(c + 1.0).signum() {
            let (mut lo, mut hi) = (c, c + 1.0);
            while hi - lo > 1e-12 * lo {
                let mid = 0.5 * (lo + hi);
                if g(mid).signum() == g(lo).signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return 0.5 * (lo + hi);
        }
        c += 1.0;
    }
    panic!("oracle found no root");
}

fn plate(name: &str, thickness: f64) -> MediumSpec {
    MediumDb::builtin().get(name).unwrap().plate(thickness, DEFAULT_ATTENUATION).unwrap()
}

#[test]
fn acrylic_matches_scan_oracle() {
    let m = plate("Acrylic glass", 0.005);
    let mode = lamb::solve_dispersion(&m, F).unwrap();
    let oracle = scan_oracle(m.c_l, m.c_t, m.thickness);
    assert!((mode.c_s - oracle).abs() < 1e-9 * oracle, "{} vs {}", mode.c_s, oracle);
    // frozen from a 40-digit evaluation of the same oracle
    assert!((mode.c_s - 720.853_451_094_295_4).abs() < 1e-8);
    assert!((mode.k_a - 285.616_189_855_389_06).abs() < 1e-8);
    assert!(mode.c_s < m.c_t);
}

#[test]
fn quartz_root_below_acrylic_longitudinal_speed() {
    let m = plate("Quartz glass", 0.005);
    let mode = lamb::solve_dispersion(&m, F).unwrap();
    assert!((mode.c_s - 1211.525_376_400_154_8).abs() < 1e-8);
    assert!(mode.c_s < 2700.0);
}

#[test]
fn every_material_and_thickness_agrees_with_oracle() {
    for rec in MediumDb::builtin().records() {
        for d_mm in [5.0, 10.0, 15.0, 20.0] {
            let m = rec.plate(d_mm * 1e-3, DEFAULT_ATTENUATION).unwrap();
            let mode = lamb::solve_dispersion(&m, F).unwrap();
            let oracle = scan_oracle(m.c_l, m.c_t, m.thickness);
            assert!((mode.c_s - oracle).abs() < 1e-9 * oracle, "{} {d_mm} mm", rec.name);
            assert!(lamb::normalized_residual(&m, mode.omega, mode.c_s, mode.half_thickness) < ROOT_TOLERANCE);
            assert!(mode.c_s < m.c_t);
        }
    }
}

#[test]
fn phase_velocity_grows_with_thickness() {
    for rec in MediumDb::builtin().records() {
        let speeds: Vec<f64> = (5..=20)
            .map(|d_mm| {
                let m = rec.plate(d_mm as f64 * 1e-3, DEFAULT_ATTENUATION).unwrap();
                lamb::solve_dispersion(&m, F).unwrap().c_s
            })
            .collect();
        assert!(speeds.windows(2).all(|w| w[1] > w[0]), "{}: {speeds:?}", rec.name);
        let oracle: Vec<f64> = [5.0, 20.0].iter().map(|d| scan_oracle(rec.c_l, rec.c_t, d * 1e-3)).collect();
        assert!(oracle[1] > oracle[0]);
    }
}

#[test]
fn acrylic_coefficients_match_svd() {
    let m = plate("Acrylic glass", 0.005);
    let mode = lamb::solve_dispersion(&m, F).unwrap();
    // null vector from a numpy SVD of the same matrix, larger entry scaled to 1
    assert!((mode.coeff_a - Complex64::new(0.832_727_73, 0.0)).norm() < 1e-7);
    assert!((mode.coeff_b - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    let (a, b) = lamb::mode_coefficients(&mode, &m).unwrap();
    assert_eq!((a, b), (mode.coeff_a, mode.coeff_b));
}

#[test]
fn surface_wave_matches_sampled_real_part() {
    let m = plate("Acrylic glass", 0.005);
    let mode = lamb::solve_dispersion(&m, F).unwrap();
    let drive = Sinusoid::new(20.0, F, 0.0).unwrap();
    let z = 0.055;
    let wave = lamb::surface_wave(&mode, &m, &drive, z).unwrap();
    assert!((wave.amplitude() - 1121.660_677_372_099_4).abs() < 1e-6);
    assert!((wave.phase() - 6.281_330_958_984_725).abs() < 1e-9);

    // Re{(αA − i·k·B)·V′·e^{i(ω(t − t_T) + φ − k·z)}} over one period after arrival
    let t_t = z / mode.c_s;
    let v = 20.0 * DEFAULT_ATTENUATION.powf(z);
    let c = mode.alpha * mode.coeff_a - Complex64::i() * mode.k_a * mode.coeff_b;
    for i in 0..64 {
        let t = t_t + 1e-4 + i as f64 / (64.0 * F);
        let theta = mode.omega * (t - t_t) - mode.k_a * z;
        let re = (c * v * Complex64::from_polar(1.0, theta)).re;
        let xi = lamb::surface_displacement(&mode, &m, &drive, z, t, 0.0).unwrap();
        assert!((xi - re).abs() < 1e-9 * wave.amplitude(), "sample {i}: {xi} vs {re}");
    }
}

#[test]
fn displacement_scales_with_drive() {
    let m = plate("Oak wood", 0.01);
    let mode = lamb::solve_dispersion(&m, F).unwrap();
    let one = lamb::surface_wave(&mode, &m, &Sinusoid::new(1.0, F, 0.3).unwrap(), 0.1).unwrap();
    let seven = lamb::surface_wave(&mode, &m, &Sinusoid::new(7.0, F, 0.3).unwrap(), 0.1).unwrap();
    assert!((seven.amplitude() - 7.0 * one.amplitude()).abs() < 1e-12 * seven.amplitude());
    assert_eq!(one.phase(), seven.phase());
}

#[test]
fn acrylic_delay_at_twenty_centimetres() {
    let m = plate("Acrylic glass", 0.005);
    let d = lamb::propagation_delay(&m, F, 0.2).unwrap();
    assert!((d - 2.774_489_040_683_497e-4).abs() < 1e-15);
}
