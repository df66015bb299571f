//! Business logic of the service. Nothing in here may name an adapter or
//! a concrete technology; see the architecture test.

pub mod ports;
pub mod service;

pub use ports::*;
pub use service::{label_id, paginate, summarize, Cursor, InvestigatorService, PortSet};
