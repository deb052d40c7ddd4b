//! File formats, batch commands and the live session service built on
//! `onwheel-core`.
//!
//! - [`logfile`]: the line-oriented run log.
//! - [`docs`]: scenario, layout, parameter and key-map documents.
//! - [`table`]: metric and paired-score CSV tables.
//! - [`manifest`]: the `manifest.json` of run and session directories.
//! - [`study`]: simulated studies and report recomputation.
//! - [`report`]: text, JSON and CSV report rendering.
//! - [`protocol`], [`session`] and [`serve`]: the websocket session service.

pub mod docs;
pub mod logfile;
pub mod manifest;
pub mod protocol;
pub mod report;
pub mod serve;
pub mod session;
pub mod study;
pub mod table;
