pub mod cli;
pub mod expr;
pub mod hyperbolicity;
pub mod linalg;
pub mod propagator;
pub mod rap;
pub mod solvers;

/// Any error raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] expr::ParseError),
    #[error(transparent)]
    Eval(#[from] expr::EvalError),
    #[error(transparent)]
    Coefficient(#[from] propagator::CoefficientError),
    #[error(transparent)]
    Propagator(#[from] propagator::PropagatorError),
    #[error(transparent)]
    Hyperbolicity(#[from] hyperbolicity::HyperbolicityError),
    #[error(transparent)]
    Solver(#[from] solvers::SolverError),
    #[error(transparent)]
    Rap(#[from] rap::RapError),
    #[error(transparent)]
    Cli(#[from] cli::CliError),
}
