//! Library side of the `televiz` command: the live snapshot server.

pub mod serve;
