//! Unit conversions at the reporting boundary.
//!
//! Internally every frequency is angular (rad/s), lengths are metres,
//! powers watts and times seconds.

use std::f64::consts::PI;

pub fn mhz(nu: f64) -> f64 {
    2.0 * PI * nu * 1e6
}

pub fn khz(nu: f64) -> f64 {
    2.0 * PI * nu * 1e3
}

pub fn ghz(nu: f64) -> f64 {
    2.0 * PI * nu * 1e9
}

/// Angular frequency to ν in MHz.
pub fn to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e6)
}

pub fn to_ghz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e9)
}

pub fn microwatt(p: f64) -> f64 {
    p * 1e-6
}

pub fn milliwatt(p: f64) -> f64 {
    p * 1e-3
}

pub fn micron(x: f64) -> f64 {
    x * 1e-6
}

pub fn microsecond(t: f64) -> f64 {
    t * 1e-6
}

pub fn nanosecond(t: f64) -> f64 {
    t * 1e-9
}

pub fn nanometre(x: f64) -> f64 {
    x * 1e-9
}

pub fn millitesla(b: f64) -> f64 {
    b * 1e-3
}

/// Polarizability in units of 10^-24 cm^3 to SI (C m^2 / V).
pub fn polarizability_si(alpha_1e24_cm3: f64) -> f64 {
    4.0 * PI * crate::atomdata::constants::EPSILON_0 * alpha_1e24_cm3 * 1e-30
}

/// SI polarizability to units of 10^-24 cm^3.
pub fn polarizability_cm3(alpha_si: f64) -> f64 {
    alpha_si / (4.0 * PI * crate::atomdata::constants::EPSILON_0 * 1e-30)
}
