//! Concentration inequalities for time averages of finite-state Markov jump
//! processes: spectral data, Feynman–Kac tilts, rate functions, tail bounds,
//! perturbation series and Monte Carlo estimates.

pub mod bounds;
pub mod extended;
pub mod fixtures;
pub mod io;
pub mod linalg;
pub mod markov;
pub mod perturbation;
pub mod simulate;
pub mod spectral;
pub mod tilted;

pub use bounds::{Analysis, BoundCurve, BoundFamily, BoundPoint, BoundsError, Verdict};
pub use io::{load_model, run_compare, save_model, IoError, RunConfig};
pub use markov::{MJPModel, MarkovError, Observable, ProbDist, QMatrix};
pub use perturbation::{CompositionClass, SeriesCoefficients};
pub use simulate::{TailEstimate, Trajectory};
pub use spectral::{SpectralData, SpectralError};
pub use tilted::{BernsteinParams, ConjugateResult};
