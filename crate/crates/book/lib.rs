//! The guide's chapters, compiled as doc comments so that every code block
//! in the book runs under `cargo test`.

#[doc = include_str!("../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../book/src/device.md")]
pub mod device {}
#[doc = include_str!("../../book/src/actions.md")]
pub mod actions {}
#[doc = include_str!("../../book/src/overlay.md")]
pub mod overlay {}
#[doc = include_str!("../../book/src/genui.md")]
pub mod genui {}
#[doc = include_str!("../../book/src/agent.md")]
pub mod agent {}
#[doc = include_str!("../../book/src/scenarios.md")]
pub mod scenarios {}
#[doc = include_str!("../../book/src/metrics.md")]
pub mod metrics {}
