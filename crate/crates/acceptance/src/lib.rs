//! Holds the acceptance suite in `tests/acceptance.rs`. It lives in its own
//! package so that `cargo test --workspace` finishes every `noma-power` suite
//! before it reports the acceptance verdicts.
