//! Online monitoring of large factor models for structural breaks.

pub mod eigen;
pub mod monitor;
pub mod error;
pub mod panel;
pub mod randomize;
pub mod rng;
pub mod simulate;

pub use eigen::{eigen_symmetric, estimate_num_factors, CovarianceMatrix, EigenSpectrum, RollingCovariance, RollingWindow};
pub use error::{Error, Result};
pub use panel::{Orientation, Panel, PanelMeta};
pub use randomize::{GammaStat, RandomizerConfig, Randomizer, StepStatistics, ThetaStat};
