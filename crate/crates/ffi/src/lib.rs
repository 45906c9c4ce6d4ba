//! C ABI surface. Populated once the core crate is complete.
