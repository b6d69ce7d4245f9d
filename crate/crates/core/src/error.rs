use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row} sums to {sum}, not 1")]
    NotStochastic { row: usize, sum: f64 },
    #[error("entry ({row}, {col}) = {value} is outside [0, 1]")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("chain is not irreducible")]
    NotIrreducible,
    #[error("state space has {0} states; at least 2 are required")]
    DimensionTooSmall(usize),
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("supplied stationary vector fails the stationarity check (residual {0:e})")]
    StationarityMismatch(f64),
    #[error("subset is empty")]
    EmptySubset,
    #[error("subset is the whole state space")]
    FullSubset,
    #[error("state {state} out of range for a chain on {n} states")]
    StateOutOfRange { state: usize, n: usize },
    #[error("exhaustive enumeration over {n} states exceeds the cap of {cap}")]
    EnumerationTooLarge { n: usize, cap: usize },
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("operation requires a reversible chain")]
    NotReversible,
    #[error("restriction to the subset is reducible; decompose it into components first")]
    ReducibleRestriction,
    #[error("family needs at least {min} states, got {n}")]
    TooSmall { n: usize, min: usize },
    #[error("rates at state {state} sum to {sum}, not 1")]
    NotAPartition { state: usize, sum: f64 },
    #[error("zero transition rate at state {0} breaks irreducibility")]
    ZeroRate(usize),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("construction failed after {0} rejection rounds")]
    ConstructionFailed(usize),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("linear system is singular")]
    SingularSystem,
    #[error("second eigenfunction has no strictly positive part")]
    DegenerateEigenfunction,
    #[error("no convergence after {iterations} iterations (last change {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("no feasible upper bracket below t = {0}")]
    NoUpperBracket(f64),
    #[error("operator norm increased along the bracket: f({t_lo}) = {f_lo} < f({t_hi}) = {f_hi}")]
    NotMonotone { t_lo: f64, f_lo: f64, t_hi: f64, f_hi: f64 },
    #[error("no level L with U_L = 2: {0}")]
    NoRoot(String),
    #[error("level set {{f >= {0}}} is empty")]
    EmptyLevelSet(f64),
    #[error("chain is not a birth-death chain: P({row}, {col}) > 0")]
    NotBirthDeath { row: usize, col: usize },
    #[error("{capped} of {trials} trajectories hit the step cap")]
    CapSaturated { capped: u64, trials: u64 },
    #[error("only {survivors} trajectories survived to step {k}")]
    InsufficientSurvival { survivors: u64, k: usize },
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
