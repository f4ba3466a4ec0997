use thiserror::Error;

use crate::model::{ClientId, FacilityId};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("distance matrix is asymmetric at ({a}, {b})")]
    Asymmetric { a: usize, b: usize },
    #[error("facility {0} has nonzero self-distance")]
    NonzeroDiagonal(usize),
    #[error("line {line}: distance is not a nonnegative integer")]
    NonIntegerDistance { line: usize },
    #[error("distance vector has length {got}, expected {expected}")]
    DistanceLength { expected: usize, got: usize },
    #[error("facility {facility} has invalid cost {cost}")]
    InvalidCost { facility: usize, cost: f64 },
    #[error("facility ids must be dense; expected {expected}, found {found}")]
    FacilityId { expected: usize, found: usize },
    #[error("unknown facility {0}")]
    UnknownFacility(FacilityId),
    #[error("departure of unknown client {0:?}")]
    UnknownClient(String),
    #[error("departure of client {0:?} in an arrival-only run")]
    UnsupportedDeparture(String),
    #[error("client {0:?} arrived while already active")]
    DuplicateClient(String),
    #[error("client {client} is assigned to closed facility {facility}")]
    ClosedFacility { client: ClientId, facility: FacilityId },
    #[error("no candidate facility")]
    EmptyCandidates,
    #[error("triangle inequality violated: {0}")]
    TriangleViolation(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("facility {0} is not open")]
    NotOpen(FacilityId),
    #[error("facility {0} is already open")]
    AlreadyOpen(FacilityId),
    #[error("closing facility {0} would leave its clients unserved")]
    NoAlternative(FacilityId),
    #[error("no open facility to swap out")]
    NothingOpen,
    #[error("fewer than two facilities are open")]
    TooFewOpen,
    #[error("no open facility can be closed")]
    NothingToClose,
    #[error("operation no longer matches the solution it was built for")]
    StaleOperation,
}

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("tree has no nodes")]
    Empty,
    #[error("node {0} is referenced more than once or is unreachable")]
    NotATree(usize),
    #[error("leaf {node} sits at depth {depth}, expected {expected}")]
    UnevenDepth { node: usize, depth: usize, expected: usize },
    #[error("node {0} is not a leaf")]
    NotALeaf(usize),
    #[error("no client at leaf {0}")]
    EmptyLeaf(usize),
    #[error("unknown client handle {0}")]
    UnknownHandle(usize),
    #[error("leaf {node} has invalid cost {cost}")]
    InvalidCost { node: usize, cost: f64 },
    #[error("unknown node {0}")]
    UnknownNode(usize),
}
