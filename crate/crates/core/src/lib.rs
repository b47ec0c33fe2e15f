//! Mixed-sample augmentation for point clouds.
//!
//! Two equal-size clouds are put in one-to-one correspondence by the optimal
//! (Earth Mover's) assignment; a replacement mask then keeps some points of
//! the first cloud and swaps the rest for their assigned partners in the
//! second. Labels are blended by the kept fraction.
//!
//! ```
//! use pointcutmix::{
//!     mixer::{pointcutmix, Source},
//!     one_hot, AugmentPolicy, MixMode, PointCloud, RngStream, SolverConfig,
//! };
//!
//! let a = PointCloud::new((0..32).map(|i| [i as f32, 0.0, 0.0]).collect()).unwrap();
//! let b = PointCloud::new((0..32).map(|i| [0.0, i as f32, 1.0]).collect()).unwrap();
//! let (ya, yb) = (one_hot(0, 2).unwrap(), one_hot(1, 2).unwrap());
//! let policy = AugmentPolicy::new(1.0, 1.0, MixMode::Knn, 7).unwrap();
//! let mut rng = RngStream::seed_from(policy.seed);
//! let mixed = pointcutmix(
//!     Source::new(&a, &ya),
//!     Source::new(&b, &yb),
//!     &policy,
//!     &mut rng,
//!     None,
//!     &SolverConfig::default(),
//! )
//! .unwrap();
//! assert_eq!(mixed.label.weights()[0], mixed.mask.n_kept() as f64 / 32.0);
//! ```

pub mod assignment;
pub mod batch;
mod error;
pub mod exec;
pub mod ingest;
pub mod mixer;
pub mod neighbors;
pub mod rng;
mod types;

pub use assignment::{emd, optimal_assignment, SolverConfig};
pub use error::{Error, Result};
pub use exec::Execution;
pub use rng::RngStream;
pub use types::*;
