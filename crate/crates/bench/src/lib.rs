//! Shared fixtures for the benchmarks.

use heatcontent::geometry::{make_chain_config, make_lattice_config, BallUnion, RadiusProfile};
use heatcontent::kernel::Time;

pub fn time(t: f64) -> Time {
    Time::new(t).expect("benchmark times are positive")
}

pub fn chain(n: usize) -> BallUnion {
    make_chain_config(2, 0.25, 0.42, n).expect("valid chain")
}

pub fn lattice(n: usize) -> BallUnion {
    make_lattice_config(2, 0.25, 0.75, n).expect("valid lattice")
}

pub fn profile(alpha: f64) -> RadiusProfile {
    RadiusProfile::new(0.25, alpha).expect("valid profile")
}
