//! Mutually unbiased bases in prime-power dimension and a simulator for a
//! two-way deterministic d-ary key distribution protocol.
//!
//! ```
//! use dqkd::{FieldSpec, MubTable};
//!
//! let field = FieldSpec::with_order(9).unwrap();
//! let tab = MubTable::build(&field);
//! assert_eq!(tab.len(), 10);
//! assert!(tab.verify(1e-9).passed);
//! ```

pub mod cli;
pub mod error;
pub mod galois;
pub mod montecarlo;
pub mod mub;
pub mod pauli;
pub mod protocol;
pub mod qstate;

pub use error::{Error, Result};
pub use galois::{FieldError, FieldSpec, GfElement};
pub use montecarlo::{run_session, SessionStats};
pub use mub::{MubTable, SignConvention};
pub use pauli::{verify_appendix, Operator};
pub use protocol::{EveStrategy, ProtocolConfig};
pub use qstate::{JointState, QuditState};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/fields.md")]
    mod fields {}
    #[doc = include_str!("../../../book/src/mub.md")]
    mod mub {}
    #[doc = include_str!("../../../book/src/operators.md")]
    mod operators {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    mod statistics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
