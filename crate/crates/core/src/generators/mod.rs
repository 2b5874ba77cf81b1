//! Seeded instance builders for the projection, portfolio and quantile
//! regression benchmark families. Outputs are pure functions of the config.

mod portfolio;
mod projection;
mod quantile;
pub mod rng;

pub use portfolio::{equal_weight_kappa, gen_portfolio, sample_returns, PortfolioConfig};
pub use projection::{gen_projection, ProjectionConfig};
pub use quantile::{gen_quantile, pinball, QuantileConfig, QuantileData};
