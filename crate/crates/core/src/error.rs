use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid array geometry: {0}")]
    InvalidGeometry(String),
    #[error("bound undefined: {0} denominator vanishes")]
    UndefinedBound(&'static str),
    #[error("invalid channel config: {0}")]
    InvalidConfig(String),
    #[error("index {index} out of range for {what} of size {len}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unsupported baseband codebook size: {n_sa} subarrays x {n_layers} layers")]
    UnsupportedSize { n_sa: usize, n_layers: usize },
    #[error("invalid codebook: {0}")]
    InvalidCodebook(String),
    #[error("search space of {combinations} combinations exceeds the cap of {cap}")]
    ResourceCap { combinations: u128, cap: u64 },
    #[error("candidate subset for {0} side is empty")]
    EmptySubset(&'static str),
    #[error("p = {p} out of range 1..={len}")]
    POutOfRange { p: usize, len: usize },
    #[error("codebook has no beam at the {0} of ray {1}")]
    CodebookMissingAoa(&'static str, usize),
    #[error("subarray layout does not match triple: {0}")]
    LayoutMismatch(String),
    #[error("every AoA estimate was discarded")]
    AllEstimatesDiscarded,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
}
