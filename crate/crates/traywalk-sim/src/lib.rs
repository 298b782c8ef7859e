//! Scenario runner, post-hoc validator, and log tooling for the
//! tray-walking control stack. The numerical core lives in
//! `traywalk-core`; this crate adds file formats, the closed-loop harness,
//! and the `traywalk` CLI.

pub mod harness;
pub mod logio;
pub mod scenario;
pub mod validate;
