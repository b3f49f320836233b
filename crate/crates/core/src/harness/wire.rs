//! Messages exchanged with a live viewer. Each message is one object with a
//! `type` field; the encoding (JSON text frames) is up to the transport.

use serde::{Deserialize, Serialize};

use super::engine::{Command, Snapshot};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WireMessage {
    Snapshot(Snapshot),
    Command {
        /// Echoed in the matching ack.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        command: Command,
    },
    Ack {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        /// Tick at which the command takes effect.
        tick: u64,
    },
    Error {
        message: String,
    },
}
