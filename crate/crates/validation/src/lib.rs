//! Holds the `acceptance` test target, which checks the toolkit end to end
//! against fixed numeric criteria. It lives in its own package so that
//! `cargo test --workspace` runs it after every other test binary.
