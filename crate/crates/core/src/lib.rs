//! Numerical laboratory for random walks, Riesz-transform quantities and
//! Calderón–Zygmund machinery on Vicsek fractal graphs.

pub mod cache;
pub mod calculus;
pub mod counterexample;
pub mod cz;
pub mod error;
pub mod estimates;
pub mod fit;
pub mod graph;
pub mod markov;
pub mod report;
pub mod spectral;
pub mod vicsek;
pub mod walks;

pub use cache::KernelCache;
pub use calculus::{gradient_length, laplacian, lp_norm, Backend, Calculus, RatioReport};
pub use counterexample::{build_gn, GnFamily, NashReport};
pub use cz::{cz_decompose, CzDecomposition};
pub use error::{LabError, Result};
pub use estimates::{CheckRow, HardySteinSnapshot};
pub use fit::{fit_power_law, volume_growth_fit, ScalingFit};
pub use graph::{load_edge_list, Ball, BallKind, VolumeProfile, WeightedGraph};
pub use markov::{make_walk, KernelColumn, MarkovOperator};
pub use spectral::{spectral_decompose, SpectralDecomposition};
pub use vicsek::{build_vicsek, VicsekGraph};
pub use walks::{simulate_exit, ExitTimeStats};
