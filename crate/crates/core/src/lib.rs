//! Leafwise-conformal extrinsic geometric flows of codimension-one foliations.
//!
//! The crate covers the algebra of principal-curvature invariants
//! ([`symfun`], [`companion`]), the scalar parabolic problems the flows reduce
//! to ([`parabolic`], [`flows`]), the Reeb foliation example ([`reeb`]) and
//! Weingarten data from adapted metrics ([`chartgeom`]).

pub mod chartgeom;
pub mod error;
pub mod companion;
pub mod flows;
pub mod parabolic;
pub mod reeb;
pub mod scenario;
pub mod symfun;
pub mod verify;

pub use error::{Error, Result};
