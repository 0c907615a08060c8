//! Harmonic analysis on data-defined spaces.
//!
//! A finite [`system::AdmissibleSystem`] carries points, a metric, quadrature
//! weights and a truncated eigensystem. Everything else is built on top:
//! localized filtered operators, directed-graph frames from the SVD of a
//! kernel, Besov-type smoothness classification, lifting of functions from
//! one space to another through a connection matrix, and Tauberian
//! diagnostics for the kernels involved. The [`jacobi`] module supplies
//! reference systems where every quantity is known in closed form.
//!
//! ```
//! use diffharm::approx::{classify_smoothness, pyramid_norms, single_pyramid, ClassifyOptions};
//! use diffharm::filters::make_filter;
//! use diffharm::jacobi::build_circle_system;
//! use diffharm::system::FunctionSamples;
//! use diffharm::Complex64;
//!
//! let sys = build_circle_system(1024, 128)?;
//! let h = make_filter(4)?;
//! let f = FunctionSamples::from_iterator(
//!     sys.len(),
//!     sys.points().iter().map(|p| Complex64::new(p[0].sin().abs(), 0.0)),
//! );
//! let taus = single_pyramid(&sys, &h, 8, &f)?;
//! let report = classify_smoothness(&pyramid_norms(&sys, &taus, 2.0)?, 2.0, &ClassifyOptions { skip_first: true })?;
//! // |sin| has coefficients ~ k^{-2}, so the tails decay like 2^{-3j/2}
//! assert!((report.gamma_hat - 1.5).abs() < 0.3);
//! # Ok::<(), diffharm::Error>(())
//! ```

// `!(x > 0.0)` is how argument checks here reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod cli;
pub mod digraph;
pub mod error;
pub mod filters;
pub mod io;
pub mod jacobi;
pub mod regress;
pub mod system;
pub mod tauber;
pub mod twosys;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
