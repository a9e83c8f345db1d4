use crate::mobility::TowerId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("row {row}: {message}")]
    Malformed { row: u64, message: String },

    #[error("row {row}: unknown tower id {id}")]
    UnknownTowerAt { row: u64, id: TowerId },

    #[error("unknown tower id {0}")]
    UnknownTower(TowerId),

    #[error("zero trajectories")]
    ZeroTrajectories,

    #[error("user {user_id}: expected {expected} slots, found {found}")]
    LengthMismatch {
        user_id: u64,
        expected: usize,
        found: usize,
    },

    #[error("user {user_id} has no record in any slot")]
    AllSentinel { user_id: u64 },

    #[error("user {user_id} has no record at slot {slot}; interpolate before aggregating")]
    SentinelEncountered { user_id: u64, slot: usize },

    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("empty cost matrix")]
    EmptyMatrix,

    #[error("cost matrix entry ({row}, {col}) is {value}; entries must be finite and non-negative")]
    InvalidCost { row: usize, col: usize, value: f64 },

    #[error("brute force refuses n = {0} (limit 10)")]
    TooLarge(usize),

    #[error("empty histogram")]
    EmptyHistogram,

    #[error("unknown coarsening level {0:?}")]
    UnknownLevel(String),

    #[error("temporal factor {factor} does not divide {slots_per_day} slots per day")]
    InvalidFactor { factor: usize, slots_per_day: usize },

    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),

    #[error("slot {slot} out of range (T = {total})")]
    SlotOutOfRange { slot: usize, total: usize },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
