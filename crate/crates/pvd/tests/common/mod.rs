//! Shared support for the integration-test targets.
//!
//! Each test target compiles this module independently and may use only part
//! of it, so unused-item lints are silenced here.
#![allow(dead_code)]

pub mod goldens;
