pub mod error;
pub mod harness;
pub mod lattice;
pub mod manufactured;
pub mod metrics;
pub mod operator;
pub mod spectral;
pub mod stepper;

pub use error::{Error, Result};
pub use lattice::{FrequencyIndex, Lattice, ProjectionMatrix, VectorIndex};
pub use manufactured::{
    decay_box, exact_coefficients, exact_convolution_lu, Carrier, ExactSolution, ManufacturedSource,
};
pub use metrics::{final_error, l2qp_norm, order_kappa, ErrorMeasure, ErrorReport};
pub use operator::{Convolution, QOperator, SparseCoefficient};
pub use spectral::{
    evaluate_at, evaluate_parent_at, forward_dft, inverse_dft, truncate, GridField, Mode, SpectralField,
};
pub use stepper::{
    run, solve_hpd, step_bdf2, step_first, FirstStep, RunOptions, RunOutput, SolveConfig, SolverMethod, SourceProvider,
    StepStats, TimeGrid,
};
