//! Library surface of the CLI (commands are implemented here so the
//! integration tests can drive them directly).
