//! Back-propagation, feedback alignment (FA), direct feedback alignment (DFA)
//! and direct random target projection (DRTP) for fully connected networks,
//! together with the analytical tools used to study them:
//!
//! - [`network`] and [`trainers`]: forward passes and the four update rules.
//! - [`alignment`]: weight/gradient alignment observables and the alignment
//!   matrices of deep linear networks.
//! - [`teacher_student`] and [`ode`]: online learning of a two-layer teacher
//!   and the order-parameter equations of motion that describe it.
//! - [`datasets`]: MNIST/CIFAR-10 readers and synthetic generators.

pub mod alignment;
pub mod datasets;
pub mod error;
pub mod linalg;
pub mod network;
pub mod ode;
pub mod rng;
pub mod teacher_student;
pub mod trainers;

pub use error::{Error, Result};
pub use rng::Rng;
