//! Acceptance suite; see tests/acceptance.rs.
