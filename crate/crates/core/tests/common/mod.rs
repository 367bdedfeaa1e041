#![allow(dead_code)]

pub mod mms;
pub mod selftest;

use djwave::height::{continue_in_amplitude, start_branch, HeightField, NewtonOptions, WaveSetup};
use djwave::vorticity::VorticitySpec;

pub const G: f64 = 9.81;

/// Flux giving unit laminar depth for irrotational flow at the bifurcation.
pub fn unit_p0() -> f64 {
    -(G * 1f64.tanh()).sqrt()
}

pub fn setup(vorticity: VorticitySpec, nq: usize, np: usize) -> WaveSetup {
    WaveSetup {
        vorticity,
        g: G,
        p0: unit_p0(),
        p_atm: 0.0,
        nq,
        np,
    }
}

/// Converged wave with half crest-to-trough height `fraction * depth`.
pub fn wave(vorticity: VorticitySpec, nq: usize, np: usize, fraction: f64, steps: usize) -> HeightField {
    let s = setup(vorticity, nq, np);
    let depth = start_branch(&s).unwrap().depth();
    let trace = continue_in_amplitude(&s, fraction * depth, steps, &NewtonOptions::default()).unwrap();
    assert!(trace.is_complete(), "{:?}", trace.failure);
    trace.members.last().unwrap().field.clone()
}

pub fn laminar(vorticity: VorticitySpec, nq: usize, np: usize) -> HeightField {
    start_branch(&setup(vorticity, nq, np)).unwrap().base
}

/// The standard vorticity list of the battery.
pub fn standard_vorticities() -> Vec<VorticitySpec> {
    vec![
        VorticitySpec::zero(),
        VorticitySpec::constant(0.3),
        VorticitySpec::constant(-0.3),
        VorticitySpec::affine(0.5, 0.0),
        VorticitySpec::affine(-0.5, 0.0),
    ]
}

pub fn max_abs<'a>(it: impl IntoIterator<Item = &'a f64>) -> f64 {
    it.into_iter().fold(0.0f64, |m, v| m.max(v.abs()))
}
