//! Numerical machinery for the Bessel-setting Hardy space toolkit: exact
//! computations with the measure x^(2 lambda) dx, piecewise-constant function
//! algebra, Riesz transform kernels via their theta-integral forms, p-atom
//! decompositions, and the iterative weak factorization with its residual
//! ledger.

pub mod atoms;
pub mod battery;
pub mod config;
pub mod error;
pub mod factorization;
pub mod kernels;
pub mod measure;
pub mod operators;
pub mod quad;
pub mod step;

pub use atoms::{Atom, AtomCertificate, AtomicDecomposition, TwoBumpFunction};
pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use factorization::{ConstantSchedule, FactorizationResult, FactorPair, ShapeCache};
pub use kernels::{KernelRegimeConstants, RieszKernelCache};
pub use measure::{BesselParam, Interval, PRange};
pub use operators::LipschitzSymbol;
pub use quad::QuadratureSpec;
pub use step::StepFunction;
