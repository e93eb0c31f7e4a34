//! Numerical Finsler geometry on coordinate charts.
//!
//! Every tensor is obtained from truncated Taylor jets of `F^2` at a tangent
//! point, with a finite-difference engine alongside as an independent check.
//!
//! ```
//! use finsler_core::{curvature::{curvature_sample, CurvatureOptions}, metric::lookup, TangentPoint};
//!
//! let funk = lookup("FUNK_2").unwrap();
//! let at = TangentPoint::new(vec![0.1, 0.2], vec![1.0, 0.0]).unwrap();
//! let s = curvature_sample(&funk, &at, &CurvatureOptions::default()).unwrap();
//! let k = s.flag_curvature(&[0.0, 1.0]).unwrap();
//! assert!((k + 0.25).abs() < 1e-6);
//! ```

pub mod alphabeta;
pub mod curvature;
pub mod error;
pub mod expr;
pub mod field;
pub mod flow;
pub mod homogeneous;
pub mod jet;
pub mod metric;
pub mod quadrature;
pub mod sampling;
pub mod surface;

pub use error::{Error, Result};
pub use jet::{Jet, JetShape, JetSpace, MultiIndex, Scalar};
pub use metric::{MetricModel, TangentPoint};
