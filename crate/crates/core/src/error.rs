use std::fmt;

/// Crate-wide error type.
///
/// Variants correspond to the distinct failure classes surfaced by the
/// validation pipeline; the CLI maps them to exit codes and, where the
/// toolbox defines one, the exact diagnostic text.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Bad configuration: dimension mismatches, schema violations,
    /// inadmissible weights.
    Config(String),
    /// (A, B) fails the controllability rank test.
    NotControllable,
    /// (C, A) fails the observability rank test (prediction-based
    /// terminal set requested).
    NotObservable,
    /// The reference has no steady-state configuration.
    NotSteadyStateAdmissible,
    /// A steady-state configuration exists but sits on or outside the
    /// interior margin of the constraint sets.
    TargetOnBoundary,
    /// The requested equilibrium point does not satisfy the steady-state
    /// equation.
    NotEquilibrium,
    /// The initial condition admits no feasible control sequence.
    RegionOfAttraction,
    /// Lyapunov-based terminal set unreachable within the horizon.
    HorizonInsufficient,
    /// The admissible-set index search hit its hard cap.
    OmegaStarCap,
    /// A barrier evaluation left its domain.
    BarrierDomain,
    /// Numerical failure (non-convergence, singular system, pivot cap).
    Numerical(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::NotControllable => write!(
                f,
                "The pair (A,B) is not controllable. REAP-T cannot proceed with the specified system."
            ),
            Error::NotObservable => write!(
                f,
                "The pair (C, A) is not observable. Please use the Lyapunov-based method to implement the terminal constraint set."
            ),
            Error::NotSteadyStateAdmissible => {
                write!(f, "reference not steady-state admissible")
            }
            Error::TargetOnBoundary => {
                write!(f, "target too close to constraint boundary")
            }
            Error::NotEquilibrium => {
                write!(f, "x\u{304}_r is not an equilibrium of the model")
            }
            Error::RegionOfAttraction => write!(
                f,
                "The specified initial condition does not belong to the region of attraction. REAP-T cannot proceed."
            ),
            Error::HorizonInsufficient => write!(
                f,
                "The specified prediction horizon length is insufficient for implementing the Lyapunov-based method. Please increase the prediction horizon length."
            ),
            Error::OmegaStarCap => write!(
                f,
                "prediction-based method may not be suitable; use Lyapunov-based"
            ),
            Error::BarrierDomain => write!(f, "barrier domain violated"),
            Error::Numerical(msg) => write!(f, "numerical error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}
