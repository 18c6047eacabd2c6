//! Simulated two-loop relative phases against the closed-form Berry phase.

use catforge::analysis::{delta_berry, extract_relative_phase, wrap_phase};
use catforge::evolver::{propagate, EvolveConfig};
use catforge::fockspace::default_dim;
use catforge::protocol::{rotation_loop, DriveSchedule, Setting};
use catforge::states::{cat, coherent, Parity};
use catforge::C64;

fn simulated_phase(mag: f64, period: f64) -> f64 {
    let a = C64::new(mag, 0.0);
    let d = default_dim(mag);
    let s = Setting::prepared(&[1.0], &[a], &[]).unwrap();
    let sched = DriveSchedule::new(s, vec![rotation_loop(0, 2, period, false, false).unwrap()]).unwrap();
    let psi0 = coherent(a, d).unwrap();
    let tr = propagate(&sched, &psi0, &EvolveConfig::default()).unwrap();
    let even = cat(a, Parity::Even, d).unwrap();
    let odd = cat(a, Parity::Odd, d).unwrap();
    extract_relative_phase(&tr.final_state, &even, &odd, &psi0).unwrap()
}

fn deviation(mag: f64, period: f64) -> f64 {
    let expected = -delta_berry(mag, 2).unwrap();
    wrap_phase(simulated_phase(mag, period) - expected)
}

#[test]
fn relative_phase_converges_to_the_closed_form() {
    for mag in [0.9, 1.04, 1.3] {
        let d100 = deviation(mag, 100.0);
        let d200 = deviation(mag, 200.0);
        eprintln!("|alpha| = {mag}: deviation {d100:.4} at T=100, {d200:.4} at T=200");
        assert!(d200.abs() < 0.05, "|alpha| = {mag}: {d200}");
        // the finite-rate correction is second order in the rotation rate
        // integrated over a time ∝ T, so it halves when T doubles
        let ratio = d100 / d200;
        assert!((ratio - 2.0).abs() < 0.3, "|alpha| = {mag}: ratio {ratio}");
    }
}

#[test]
fn large_amplitude_rotation_leaves_the_state_unchanged() {
    let d = deviation(2.0, 50.0);
    let phase = simulated_phase(2.0, 50.0);
    assert!(phase.abs() < 0.05, "{phase}");
    assert!(d.abs() < 0.05);
}
