use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("duplicate edge id `{0}`")]
    DuplicateEdge(String),
    #[error("more than one edge from `{0}` to `{1}`")]
    ParallelEdge(String, String),
    #[error("cycle through vertices {0:?}")]
    Cycle(Vec<String>),
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("unknown edge `{0}`")]
    UnknownEdge(String),
    #[error("path count exceeds guard of {0}")]
    PathGuard(usize),
    #[error("complex block between `{src}` and `{sink}`")]
    ComplexBlock { src: String, sink: String },
    #[error("no chain or block between `{src}` and `{sink}`")]
    NoStructure { src: String, sink: String },
    #[error("expected a single root and a single terminal, found {roots} roots and {terminals} terminals")]
    NotSingleRootTerminal { roots: usize, terminals: usize },
    #[error("unresolved reference `{0}`")]
    UnresolvedRef(String),
    #[error("cyclic reference through `{0}`")]
    RefCycle(String),
    #[error("reference `{0}` defined twice")]
    DuplicateRef(String),
    #[error("conflicting definitions for `{0}`")]
    ConflictingRef(String),
    #[error("matrices {0} and {1} are not conformable")]
    NonConformable(usize, usize),
    #[error("chain length {0} exceeds bound {1}")]
    ChainTooLong(usize, usize),
    #[error("empty matrix chain")]
    EmptyChain,
    #[error("face ({0}, {1}) not present")]
    FaceMissing(String, String),
    #[error("face ({0}, {1}) touches a meta vertex")]
    MetaFace(String, String),
    #[error("rule condition violated: {0}")]
    RuleViolated(String),
    #[error("{0} intermediate faces remain")]
    FacesRemain(usize),
    #[error("circular elimination dependencies: {0:?}")]
    DependencyCycle(Vec<Vec<String>>),
    #[error("support mismatch: {0}")]
    SupportMismatch(String),
    #[error("no progress while planning pages")]
    NoProgress,
}

pub type Result<T> = core::result::Result<T, Error>;
