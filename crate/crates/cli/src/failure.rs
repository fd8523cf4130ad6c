use std::fmt;

use mfirank::data::DataError;
use mfirank::eval::EvalError;
use mfirank::features::FeatureError;
use mfirank::rank::RankError;

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Usage = 1,
    Data = 2,
    Internal = 3,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Failure { kind: Kind::Usage, error: anyhow::anyhow!("{msg}") }
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        Failure { kind: Kind::Data, error: anyhow::anyhow!("{msg}") }
    }

    pub fn context(self, ctx: impl fmt::Display + Send + Sync + 'static) -> Self {
        Failure { kind: self.kind, error: self.error.context(ctx) }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        Failure { kind: Kind::Data, error: e.into() }
    }
}

impl From<FeatureError> for Failure {
    fn from(e: FeatureError) -> Self {
        let kind = match e {
            FeatureError::UnknownFeature(_) | FeatureError::EmptyFeatureSet => Kind::Usage,
            _ => Kind::Data,
        };
        Failure { kind, error: e.into() }
    }
}

impl From<RankError> for Failure {
    fn from(e: RankError) -> Self {
        let kind = match e {
            // The feature file lacks a column the configured subset needs.
            RankError::MissingFeature { .. }
            | RankError::InvalidDamping(_)
            | RankError::UnknownField(_)
            | RankError::BadConstraint(_) => Kind::Usage,
            RankError::SolverDisagreement(_) | RankError::Inconsistent(_) | RankError::NotStochastic(_) => {
                Kind::Internal
            }
            RankError::TooFewLenders(_) | RankError::DuplicateLender(_) | RankError::NotUnique => Kind::Data,
        };
        Failure { kind, error: e.into() }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Feature(f) => f.into(),
            EvalError::Rank(r) => r.into(),
            EvalError::InvalidLevel(_) | EvalError::SuccessesExceedTrials { .. } | EvalError::EmptyGroup => {
                Failure { kind: Kind::Usage, error: e.into() }
            }
            _ => Failure { kind: Kind::Data, error: e.into() },
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { kind: Kind::Data, error: e.into() }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure { kind: Kind::Internal, error: e.into() }
    }
}
