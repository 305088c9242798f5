//! Generalized sliced probability metrics (GSPMs) and their MMD kernels.
//!
//! A GSPM compares two distributions on `R^d` by pushing both through a family
//! of scalar defining functions `f_theta` (linear projections, odd-degree
//! homogeneous polynomials, or distances to a point), comparing the resulting
//! one-dimensional slices with a base metric, and averaging over `theta`.
//! When the base metric is an L2 distance after a linear operator `A`, the
//! squared GSPM is exactly a squared MMD with the kernel
//!
//! ```text
//! k(x, y) = E_theta < A phi(. - f_theta(x)), A phi(. - f_theta(y)) >
//! ```
//!
//! which makes particle gradient flows on the GSPM tractable.
//!
//! ## Modules
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`slicing`] | defining functions, gradients, sphere sampling, multi-indices |
//! | [`kernels`] | smoothing profiles, operators, slice kernels, Gram matrices |
//! | [`metrics`] | 1D base metrics, GSPM, max-GSPM, MMD² |
//! | [`flow`] | drift field, noisy Euler–Maruyama particle flow, convergence constants |
//! | [`evaluation`] | exact 2-Wasserstein via linear assignment |
//! | [`datasets`] | synthetic 2D targets and CSV sample I/O |
//! | [`cli`] | the `gspm` command-line tool |
//!
//! ## Quick start
//!
//! ```
//! use gspm::kernels::{KernelSpec, Operator, SmoothingProfile};
//! use gspm::metrics::{mmd2, EmpiricalDistribution};
//! use gspm::slicing::SliceFamily;
//!
//! let p = EmpiricalDistribution::uniform(vec![0.0, 0.0, 1.0, 0.5], 2).unwrap();
//! let q = EmpiricalDistribution::uniform(vec![2.0, 1.0, 3.0, 0.0], 2).unwrap();
//! let spec = KernelSpec::new(
//!     SmoothingProfile::Gaussian { sigma: 0.5 },
//!     Operator::Identity,
//!     SliceFamily::Linear,
//!     64,
//!     7,
//! );
//! let slices = spec.sample_slices(2).unwrap();
//! let kernel = spec.bind(&slices, &[&p, &q]).unwrap();
//! let d2 = mmd2(&p, &q, &kernel).unwrap();
//! assert!(d2 > 0.0);
//! ```

pub mod cli;
pub mod datasets;
pub mod error;
pub mod evaluation;
pub mod flow;
pub mod kernels;
pub mod metrics;
pub mod slicing;

pub use error::{Error, Result};
