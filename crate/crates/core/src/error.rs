use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("hamiltonian error: {0}")]
    Spec(String),

    /// No radius below `cap` makes `H >= level` on the sampled set.
    #[error("hamiltonian is not coercive: H(x, p) < {level} at |p| = {cap} for x = {x:?}, direction {direction:?}")]
    NotCoercive {
        level: f64,
        cap: f64,
        x: Vec<f64>,
        direction: Vec<f64>,
        value: f64,
    },

    #[error("time step {dt} exceeds the CFL bound {max_dt}")]
    Cfl { dt: f64, max_dt: f64 },

    #[error("non-finite value at node {node}, t = {time}")]
    Divergence { node: usize, time: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("missing data: {0}")]
    Missing(String),
}
