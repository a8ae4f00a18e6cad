use thiserror::Error;

/// Errors raised anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error{}: {msg}", axis.map(|a| format!(" on axis {a}")).unwrap_or_default())]
    Config { axis: Option<usize>, msg: String },

    #[error("non-finite value for particle {id}: {what}")]
    Numeric { id: u64, what: String },

    #[error("particle {id}: stencil leaves the guard region ({detail})")]
    Ownership { id: u64, detail: String },

    #[error("particle {id} moved more than one cell in a step")]
    MigrationEnvelope { id: u64 },

    #[error("layout contract violated: {0}")]
    Layout(String),

    #[error("tile cursor collision: ordered {ptr_ord} > disordered {ptr_dis}")]
    Overflow { ptr_ord: usize, ptr_dis: usize },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("deadlock on rank {receiver}: counter {have}/{expected}, missing senders {missing:?}")]
    Deadlock {
        receiver: usize,
        have: u64,
        expected: u64,
        missing: Vec<usize>,
    },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("state comparison failed: {0}")]
    Comparison(String),

    #[error("step {step}, rank {rank}, tile {tile:?}, phase {phase}: {source}")]
    Step {
        step: u64,
        rank: usize,
        tile: Option<usize>,
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(axis: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Config {
            axis,
            msg: msg.into(),
        }
    }

    pub(crate) fn at(
        self,
        step: u64,
        rank: usize,
        tile: Option<usize>,
        phase: &'static str,
    ) -> Self {
        match self {
            e @ Error::Step { .. } => e,
            e => Error::Step {
                step,
                rank,
                tile,
                phase,
                source: Box::new(e),
            },
        }
    }
}
