//! Data generation, IDX parsing, and CSV persistence.
