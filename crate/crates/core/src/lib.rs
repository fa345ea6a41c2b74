//! Workbench for background GUI agents.
//!
//! An app runs on an off-screen [`device::Device`]; the agent drives it
//! through the [`action`] grammar and talks to the user with `speak` and
//! `ask`, each of which can show the screen in full, show cropped elements,
//! or show a generated interface via the [`overlay`] engine.

pub mod a11y;
pub mod action;
pub mod agent;
pub mod device;
pub mod metrics;
pub mod overlay;
pub mod scenario;
