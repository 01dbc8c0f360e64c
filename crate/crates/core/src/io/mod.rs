//! Problem files, synthetic data and the command-line interface.

mod cli;
mod format;
mod simulate;

pub use cli::{run_cli, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_OK};
pub use format::{
    estimation_json, feasibility_json, hermitian_to_literal, literal_to_hermitian, matrix_to_literal,
    relaxation_json, round_significant, MatrixLiteral, NamedMatrix, PriorSpec, ProblemFile,
};
pub use simulate::{
    clip_probabilities, pauli_observables, random_density, reliability_from_variances, simulate_measurements,
    simulated_problem, Measurement, SimulationOutcome, SimulationSpec, PROBABILITY_TOL,
};
