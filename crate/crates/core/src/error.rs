use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("position ({:.6}, {:.6}, {:.6}) lies outside the guarded subdomain extent", .0[0], .0[1], .0[2])]
    OutOfDomain([f64; 3]),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("communication protocol error: {0}")]
    Protocol(String),

    #[error("DDM iteration diverged at iteration {iteration}: max relative error {e_rel:.3e}")]
    Divergence { iteration: usize, e_rel: f64 },

    #[error(
        "particle at ({:.4}, {:.4}, {:.4}) left rank {rank} for a non-neighboring subdomain; reduce dt",
        .position[0], .position[1], .position[2]
    )]
    MigrationTooFar { rank: usize, position: [f64; 3] },

    #[error("I/O error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("rank {rank}, step {step}: {source}")]
    Context {
        rank: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn with_context(self, rank: usize, step: usize) -> Self {
        match self {
            e @ Error::Context { .. } => e,
            e => Error::Context {
                rank,
                step,
                source: Box::new(e),
            },
        }
    }

    /// Stable short name of the failure class; the CLI maps it to an exit code.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Geometry(_) | Error::Mesh(_) | Error::OutOfDomain(_) => "geometry",
            Error::Numerical(_) | Error::Divergence { .. } => "numerical",
            Error::Protocol(_) | Error::MigrationTooFar { .. } => "protocol",
            Error::Io { .. } => "io",
            Error::Context { source, .. } => source.category(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "io" => 3,
            "geometry" => 4,
            "numerical" => 5,
            "protocol" => 6,
            _ => 1,
        }
    }
}
