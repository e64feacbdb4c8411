pub mod atoms;
pub mod config;
pub mod constants;
pub mod integrate;
pub mod io;
pub mod kinetics;
pub mod krylov;
pub mod modes;
pub mod pipeline;
pub mod roots;
pub mod scalar;
pub mod spectra;
pub mod steady;

pub use config::{PhysicalParams, Scale};
pub use pipeline::{run_pipeline, RunManifest, Stage};
pub use scalar::Scalar;

pub type Real = f64;
pub type Mode = modes::Mode<Real>;
pub type Cavity = modes::Cavity<Real>;
pub type BandStructure = modes::BandStructure<Real>;
pub type AtomGrid = atoms::AtomGrid<Real>;
pub type KineticModel = kinetics::KineticModel<Real>;
pub type KineticState = kinetics::KineticState<Real>;
pub type Trajectory = integrate::Trajectory<Real>;
pub type SteadyResult = steady::SteadyResult<Real>;
pub type Spectrum = spectra::Spectrum<Real>;
