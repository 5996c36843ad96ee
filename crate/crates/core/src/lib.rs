//! Neural-network layers whose weights live in an arbitrary finite-dimensional
//! real algebra.
//!
//! An algebra is given by its structure constants ([`algebra`]). Hypercomplex
//! dense and convolutional layers ([`layers`]) multiply inputs by
//! algebra-valued weights, realized as block-structured real matrices over a
//! small reverse-mode autodiff core ([`tensor`]). [`model`] stacks layers and
//! handles persistence; [`training`] provides the loss, optimizers and the
//! epoch loop.

pub mod algebra;
pub mod error;
pub mod fsutil;
pub mod layers;
pub mod model;
pub mod tensor;
pub mod training;

pub use algebra::{predefined, AlgebraElement, AlgebraEntryMap, StructureConstants};
pub use error::{Error, Result};
pub use model::Sequential;
pub use tensor::{no_grad, Padding, Tensor};
