use thiserror::Error;

use crate::formats::ParseError;
use crate::graph::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("graph is not well-formed: {}", join_violations(.0))]
    WellFormedness(Vec<Violation>),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("unresolved reference: {0}")]
    UnresolvedReference(String),

    #[error("principal `{0}` is already used by the base policy")]
    NameCollision(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("{path}: {source}")]
    InFile { path: String, source: Box<Error> },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// The underlying error, looking through file context.
    pub fn root(&self) -> &Error {
        match self {
            Error::InFile { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit status for a failure: 2 for unreadable or malformed
    /// input and unknown names given on the command line, 3 for documents
    /// that parse but do not validate.
    pub fn exit_status(&self) -> i32 {
        match self.root() {
            Error::Parse(_) | Error::Io { .. } | Error::UnknownNode(_) => 2,
            _ => 3,
        }
    }

    pub(crate) fn well_formedness(violation: Violation) -> Self {
        Error::WellFormedness(vec![violation])
    }
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
