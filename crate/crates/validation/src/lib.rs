//! Home of the `acceptance` test target, which checks the toolkit against
//! its pinned numerical criteria. Run it with
//! `cargo test -p ddc-validation --test acceptance`.
