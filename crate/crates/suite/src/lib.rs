//! Holds the `acceptance` test target. Kept apart from the library crate so
//! that the property and CLI suites run before it.
