//! Lie algebras by structure constants, group models, and the symplectic
//! cocycle of an action.

pub mod algebra;
pub mod cocycle;
pub mod group;

pub use algebra::{BracketEntry, LieAlgebra};
pub use cocycle::{sigma_cocycle, sigma_cocycle_leafwise, SigmaReport};
pub use group::{momentum_with_cocycle, GroupElement, GroupModel, GroupRepr};
