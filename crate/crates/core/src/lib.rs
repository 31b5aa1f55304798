pub mod basis;
pub mod diagnostics;
pub mod error;
pub mod gcl;
pub mod harness;
pub mod mesh;
pub mod physics;
pub mod scalar;
pub mod solver;
pub mod tensor;
pub mod timeint;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision wave-equation discretisation used by the harness.
pub type WaveDiscretization = solver::Discretization<f64, physics::WaveSystem<f64>>;
pub type Field = solver::SolutionField<f64>;
pub type Mesh = mesh::Mesh<f64>;
pub type Geometry = mesh::GeometryAtTime<f64>;
pub type Rule = basis::QuadratureRule<f64>;
pub type Wave = physics::WaveSystem<f64>;
pub type State = physics::InitialCondition<f64>;
