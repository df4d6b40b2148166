//! Authentication gateway for SMS/USSD transaction channels.
//!
//! Dialog scripts are compiled into workflows ([`mapper`]), executed as step
//! machines ([`workflow`]) whose events are sealed into a hash-chained log
//! ([`ledger`]). Each inbound transaction is scored against the sender's
//! profile ([`risk`]); risky ones must pass knowledge-based challenges built
//! from the sender's own past transactions ([`authenticator`]). The
//! [`gateway`] ties the pieces together behind a line-based frame protocol.

pub mod authenticator;
pub mod gateway;
pub mod ledger;
pub mod mapper;
pub mod registry;
pub mod risk;
pub mod workflow;

pub use authenticator::{AuthPolicy, Challenge, Decision};
pub use gateway::{Gateway, GatewayConfig, SmsFrame};
pub use ledger::{Ledger, LedgerEvent};
pub use risk::{RiskReport, UserProfile};
pub use workflow::{WorkflowDefinition, WorkflowInstance};
