//! Charts, fields, flows and flow words.

pub mod field;
pub mod flow;
pub mod space;
pub mod table;

pub use field::{PlateauProfile, ScalarField, VectorField};
pub use flow::{flow, flow_with_tangent, FlowWord, DEFAULT_STEP};
pub use space::{BoxRegion, PhaseSpace};
pub use table::{CoeffKey, Poly, Table, TableKind, TrigPoly};
