//! Shared fixtures for the criterion benches.

use fevt::families::{frechet_family, gumbel_family, weibull_family, WorkedFamily};

pub fn fixtures() -> Vec<(&'static str, f64, WorkedFamily)> {
    vec![
        ("gumbel", 0.0, gumbel_family(100).unwrap()),
        ("frechet", 2.0, frechet_family(2.0, 100).unwrap()),
        ("weibull", -2.0, weibull_family(-2.0, 100).unwrap()),
    ]
}
