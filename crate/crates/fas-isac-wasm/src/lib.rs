//! Browser bindings: thin JSON-string wrappers over the core crate.

// Placeholder until the core API lands.
