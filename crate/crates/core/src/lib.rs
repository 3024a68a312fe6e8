//! Globalized distributionally robust chance-constrained SVMs.
//!
//! Per-class moment profiles and core sets feed a conic program that is
//! solved through [`gdrc_conic`]; [`bench`] runs repeated-trial experiments.

mod error;

pub mod ambiguity;
pub mod bench;
pub mod data;
pub mod models;
pub mod stats;

pub use ambiguity::{build_core_sets, support_function, AmbiguityConfig, CoreSet, NormOrder};
pub use data::{Dataset, SplitSpec};
pub use error::{Error, Result};
pub use models::{conservative_gap_bound, fit, gap_bound, predict, ModelKind, ModelParams, TrainedClassifier};
pub use stats::MomentProfile;

/// Pins the BLAS used by the conic backend to a single thread. Trials
/// already run in parallel, and threaded BLAS on tiny blocks is slower
/// and not bitwise reproducible.
pub fn single_threaded_blas() {
    static ONCE: std::sync::Once = std::sync::Once::new();
    extern "C" {
        fn openblas_set_num_threads(n: std::os::raw::c_int);
    }
    ONCE.call_once(|| unsafe { openblas_set_num_threads(1) });
}
