//! Taylor coefficients of the tilted top eigenvalue and the combinatorics
//! that bound them.

pub mod combinatorics;
pub mod series;

pub use combinatorics::{
    beta, beta_alternate, beta_n, binomial, census, enumerate_classes, motzkin,
    motzkin_binomial, phi, CombinatoricsError, CompositionClass,
};
pub use series::{lambda0_coefficients, lambda0_phi_bound, SeriesCoefficients, SeriesError, MAX_ORDER};
