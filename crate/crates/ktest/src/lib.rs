//! Live and offline checking of message-passing components against
//! regular-language specifications.
//!
//! [`runtime`] hosts components with typed ports and FIFO channels,
//! [`harness`] runs a component under test behind an intercepting proxy, and
//! [`trace`]/[`cli`] check recorded traces offline.

pub mod bindings;
pub mod cli;
pub mod harness;
pub mod runtime;
pub mod trace;

pub use harness::{Failure, HarnessError, TestContext};
pub use ktest_core as core;
pub use runtime::{
    Channel, Component, Ctx, Definition, HandlerFault, QuiescenceTimeout, Runtime, RuntimeError, Scheduler,
};
