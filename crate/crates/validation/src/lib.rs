//! Holds the `acceptance` test target, which checks the fano-ep library
//! against its reference results. It has no library API.
