use crate::lie::SeibergReport;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid algebra: {0}")]
    Algebra(String),
    #[error("invalid coupling parameters: {0}")]
    Params(String),
    #[error("invalid insertions: {0}")]
    Insertions(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("green kernel is singular on the diagonal at {0}")]
    Diagonal(String),
    #[error("point {0} is a pole of the Möbius map")]
    Pole(String),
    #[error("invalid Möbius map: {0}")]
    Mobius(String),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid regularization: {0}")]
    Epsilon(String),
    #[error("insertion too close to grid nodes: {}", format_pairs(.0))]
    Proximity(Vec<ProximityViolation>),
    #[error("log-mass {value:.3} exceeds 700 at direction {direction}, cell {cell}")]
    MassOverflow {
        direction: usize,
        cell: usize,
        value: f64,
    },
    #[error("Seiberg bounds violated: {}", .0.failures().join("; "))]
    Seiberg(Box<SeibergReport>),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid Gaussian model: {0}")]
    Model(String),
    #[error("mixed-partial certificate violated: {0}")]
    Certificate(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A grid node lying inside the exclusion radius of an insertion.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ProximityViolation {
    pub node: usize,
    pub insertion: usize,
    pub distance: f64,
}

fn format_pairs(v: &[ProximityViolation]) -> String {
    let shown: Vec<String> = v
        .iter()
        .take(8)
        .map(|p| format!("(node {}, insertion {}, d={:.3e})", p.node, p.insertion, p.distance))
        .collect();
    if v.len() > 8 {
        format!("{} and {} more", shown.join(", "), v.len() - 8)
    } else {
        shown.join(", ")
    }
}

pub type Result<T> = std::result::Result<T, Error>;
