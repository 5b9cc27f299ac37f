use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sites must be strictly ascending, got {0:?}")]
    UnorderedSites(Vec<usize>),
    #[error("site {site} is not among {available:?}")]
    UnknownSite { site: usize, available: Vec<usize> },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("local dimension mismatch: {0} vs {1}")]
    LocalDimMismatch(usize, usize),
    #[error("local dimension must be at least 2, got {0}")]
    InvalidLocalDim(usize),
    #[error("site sets overlap on {0:?}")]
    Overlap(Vec<usize>),
    #[error("site sets differ: {0:?} vs {1:?}")]
    SiteMismatch(Vec<usize>, Vec<usize>),
    #[error("not a density matrix: {0}")]
    InvalidState(String),
    #[error("minimum eigenvalue {min:e} is below the floor {floor:e}")]
    NonPositiveSpectrum { min: f64, floor: f64 },
    #[error("eigendecomposition did not converge")]
    Eigen,
    #[error("invalid lattice: {0}")]
    Lattice(String),
    #[error("invalid hamiltonian: {0}")]
    Hamiltonian(String),
    #[error("shield radius {radius} is smaller than the interaction range {range}")]
    ShieldTooSmall { radius: usize, range: usize },
    #[error("invalid ordering: {0}")]
    Ordering(String),
    #[error("no ball of radius {radius} contains the target set {target:?}")]
    TargetTooLarge { target: Vec<usize>, radius: usize },
    #[error("{sites} sites of dimension {local_dim} exceed the exact-diagonalization cap of {cap} sites")]
    SizeCap {
        sites: usize,
        local_dim: usize,
        cap: usize,
    },
    #[error("misaligned marginal family: {0}")]
    Family(String),
    #[error("quadrature did not converge: last change {change:e} at {nodes} nodes")]
    Quadrature { change: f64, nodes: usize },
    #[error("invalid channel: {0}")]
    Channel(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
