//! Space-time finite elements for the linear wave equation.
//!
//! The wave equation `d_tt u - Laplace u = f` on the unit square is written as a
//! first-order system in `(u0, u1) = (u, d_t u)`, discretized by continuous
//! `Q_r` elements in space and the continuous Galerkin-Petrov method cGP(k) in
//! time. A cheap post-processing step ([`lifting`]) turns the continuous
//! piecewise degree-`k` discrete solution into a `C^1` piecewise degree-`k+1`
//! function that converges with one extra order in time.
//!
//! ```no_run
//! use std::sync::Arc;
//! use stwave::{fem, lifting, problems, stepper};
//!
//! let space = Arc::new(fem::build_space(fem::unit_square_mesh(0), 2)?);
//! let problem = problems::problem_poly();
//! let system = stepper::make_system(space.clone(), &problem, stepper::InitialMode::Ritz)?;
//! let partition = stepper::TimePartition::uniform(1.0, 10, 2)?;
//! let traj = stepper::integrate(&system, &partition)?;
//! let lifted = lifting::lift(traj, &system)?;
//! let [u0, u1] = lifted.evaluate(0.55)?;
//! # Ok::<(), stwave::Error>(())
//! ```

pub mod analysis;
pub mod error;
pub mod fem;
pub mod lifting;
pub mod linalg;
pub mod problems;
pub mod quadrature;
pub mod stepper;
pub mod study;

pub use error::{Error, Result};
