//! Copolymer near a selective interface.

pub mod annealed;
pub mod bounds;
pub mod disorder;
pub mod error;
pub mod excursions;
pub mod exec;
pub mod numerics;
pub mod partition;
pub mod paths;
pub mod slope;

pub use disorder::{DisorderModel, TailBound};
pub use error::{Error, Result};
pub use excursions::{ExcursionLaw, LawSpec, TiltedLaw};
pub use exec::Exec;
