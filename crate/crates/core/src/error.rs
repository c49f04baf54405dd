use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Which of the two interconnection rank conditions failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WellPosedCondition {
    /// `rank [E B; Ec Bc] == rank [E B A; Ec Bc Ac]`: some continuation exists.
    Existence,
    /// The stacked step matrix has full column rank: the continuation is unique.
    Uniqueness,
}

impl fmt::Display for WellPosedCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WellPosedCondition::Existence => write!(f, "existence (rank equality)"),
            WellPosedCondition::Uniqueness => write!(f, "uniqueness (full column rank)"),
        }
    }
}

/// Stage of the refinement pipeline an error originated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Abstract DV to concrete DV: relation check and interface synthesis.
    Interface,
    /// Abstract descriptor system to its DV form: closed loop and driving schedule.
    AbstractSchedule,
    /// Concrete DV back to the descriptor system: lifting constraint and certificate.
    Lift,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Interface => write!(f, "stage (i) interface"),
            Stage::AbstractSchedule => write!(f, "stage (ii) abstract schedule"),
            Stage::Lift => write!(f, "stage (iii) lift"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is rank deficient: rank {rank} < {rows} rows")]
    RankDeficient { rows: usize, rank: usize },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("[E -B] does not have full row rank (rank {rank}, n = {n})")]
    Assumption1Violated { n: usize, rank: usize },

    #[error("(x, u, x+) is not a transition of the descriptor system (residual {residual:e})")]
    NotATransition { residual: f64 },

    #[error("unsupported initial-set combination: {0}")]
    UnsupportedCombination(String),

    #[error("interface equations are infeasible (residual {residual:e})")]
    Infeasible { residual: f64 },

    #[error("controller is not well posed: {condition} fails")]
    NotWellPosed { condition: WellPosedCondition },

    #[error("relation rejected: {0}")]
    RelationRejected(String),

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("no solution to the step equations{} (residual {residual:e})", at_step(*step))]
    NoSolution { step: Option<usize>, residual: f64 },

    #[error("step equations have a non-unique solution{} (rank {rank} < {unknowns})", at_step(*step))]
    NonUnique {
        step: Option<usize>,
        rank: usize,
        unknowns: usize,
    },

    #[error("initial state lies outside the initial set")]
    InitialStateOutsideSet,

    #[error("horizon {0} exceeds the cap of {max}", max = crate::simulate::MAX_HORIZON)]
    HorizonTooLong(usize),

    #[error("{stage}: {source}")]
    Refinement {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

fn at_step(step: Option<usize>) -> String {
    step.map(|t| format!(" at step {t}")).unwrap_or_default()
}

impl Error {
    pub(crate) fn at_stage(self, stage: Stage) -> Error {
        match self {
            e @ Error::Refinement { .. } => e,
            e => Error::Refinement {
                stage,
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn with_step(self, t: usize) -> Error {
        match self {
            Error::NoSolution { residual, .. } => Error::NoSolution {
                step: Some(t),
                residual,
            },
            Error::NonUnique { rank, unknowns, .. } => Error::NonUnique {
                step: Some(t),
                rank,
                unknowns,
            },
            e => e,
        }
    }

    /// The innermost error, looking through refinement stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Refinement { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for failures of the numerical solve (as opposed to bad input or a
    /// negative verdict).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::NoSolution { .. }
                | Error::NonUnique { .. }
                | Error::Infeasible { .. }
                | Error::RankDeficient { .. }
        )
    }
}
