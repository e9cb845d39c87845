use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {{{0}, {1}}}")]
    DuplicateEdge(usize, usize),
    #[error("graph is disconnected ({0} components)")]
    Disconnected(usize),
    #[error("vertex {vertex} has degree {degree}, outside [{min}, {max}]")]
    Degree {
        vertex: usize,
        degree: usize,
        min: usize,
        max: usize,
    },
    #[error("empty graph")]
    Empty,
    #[error("graph file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("lift: no connected sample after {0} attempts")]
    LiftRetries(usize),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("Wronskian defect {defect:e} above tolerance after refinement")]
    Integration { defect: f64 },
    #[error("Dirichlet margin violated: |S(L)| = {value:e} on edge {edge}")]
    DirichletMargin { edge: usize, value: f64 },
    #[error("eigenvalue scan failed: {0}")]
    Scan(String),
    #[error("zero-norm eigenvector")]
    ZeroNorm,
    #[error("singular or ill-conditioned solve: {0}")]
    Singular(String),
    #[error("cover fixed point did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("Herglotz positivity violated: {0}")]
    Herglotz(String),
    #[error("Im gamma = {0:e} below floor {1:e}")]
    EtaFloor(f64, f64),
    #[error("path enumeration of {0} paths exceeds cap {1}")]
    PathCap(usize, usize),
    #[error("empty eigenvalue window")]
    EmptyWindow,
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
