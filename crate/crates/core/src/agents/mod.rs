//! Per-host injection agents and the controller command protocol.

pub mod wire;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::fabric::Packet;
use crate::faultengine::{apply_fault, FaultSpec, ItemInjectionState, PacketOutcome};
use crate::ids::{HostId, ItemId};
use crate::mapper::ItemMap;
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum AgentCommand {
    Inject { item_id: ItemId, spec: FaultSpec },
    Clear { item_id: ItemId },
    ClearAll,
    Status,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentErrorCode {
    WrongHost,
    AlreadyInjected,
    NotInjected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryPhase {
    Pending,
    Injecting,
    Expired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveEntry {
    pub item_id: ItemId,
    pub spec: FaultSpec,
    pub phase: EntryPhase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reply", rename_all = "snake_case")]
pub enum AgentReply {
    Ack { command_seq: u64 },
    Error { code: AgentErrorCode, message: String },
    StatusReport { active: Vec<ActiveEntry> },
}

impl AgentReply {
    pub fn is_ack(&self) -> bool {
        matches!(self, AgentReply::Ack { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandLogEntry {
    pub seq: u64,
    pub at: SimTime,
    pub command: AgentCommand,
    pub reply: AgentReply,
}

#[derive(Debug, Clone)]
pub struct Agent {
    host_id: HostId,
    /// Copy delay for duplicated packets: one hop on this host.
    hop_latency_ms: f64,
    global_seed: u64,
    active: BTreeMap<ItemId, ItemInjectionState>,
    log: Vec<CommandLogEntry>,
}

impl Agent {
    pub fn new(host_id: HostId, hop_latency_ms: f64, global_seed: u64) -> Self {
        Agent {
            host_id,
            hop_latency_ms,
            global_seed,
            active: BTreeMap::new(),
            log: Vec::new(),
        }
    }

    pub fn host_id(&self) -> &HostId {
        &self.host_id
    }

    pub fn command_log(&self) -> &[CommandLogEntry] {
        &self.log
    }

    pub fn active_count(&self) -> usize {
        self.active.len()
    }

    pub fn is_injected(&self, item: &ItemId) -> bool {
        self.active.contains_key(item)
    }

    pub fn state(&self, item: &ItemId) -> Option<&ItemInjectionState> {
        self.active.get(item)
    }

    pub fn active_items(&self) -> impl Iterator<Item = &ItemId> + '_ {
        self.active.keys()
    }

    /// Processes one command. An `Inject` opens its window at `now`.
    pub fn handle(&mut self, command: AgentCommand, now: SimTime, items: &ItemMap) -> AgentReply {
        let seq = self.log.len() as u64;
        let reply = self.apply(&command, seq, now, items);
        self.log.push(CommandLogEntry {
            seq,
            at: now,
            command,
            reply: reply.clone(),
        });
        reply
    }

    fn apply(&mut self, command: &AgentCommand, seq: u64, now: SimTime, items: &ItemMap) -> AgentReply {
        let error = |code, message: String| AgentReply::Error { code, message };
        match command {
            AgentCommand::Inject { item_id, spec } => {
                if !self.is_local(item_id, items) {
                    return error(
                        AgentErrorCode::WrongHost,
                        format!("item `{item_id}` is not on host `{}`", self.host_id),
                    );
                }
                if self.active.contains_key(item_id) {
                    return error(
                        AgentErrorCode::AlreadyInjected,
                        format!("item `{item_id}` already injected"),
                    );
                }
                let seed = ItemInjectionState::seed_for(self.global_seed, spec.seed, item_id.as_str());
                let mut state = ItemInjectionState::starting_at(spec.clone(), now, seed);
                state.duplicate_delay_ms = self.hop_latency_ms;
                self.active.insert(item_id.clone(), state);
                AgentReply::Ack { command_seq: seq }
            }
            AgentCommand::Clear { item_id } => {
                // Items of a deleted resource are gone from the map but may
                // still hold state; clearing them must work.
                if !self.active.contains_key(item_id) && !self.is_local(item_id, items) {
                    return error(
                        AgentErrorCode::WrongHost,
                        format!("item `{item_id}` is not on host `{}`", self.host_id),
                    );
                }
                match self.active.remove(item_id) {
                    Some(_) => AgentReply::Ack { command_seq: seq },
                    None => error(AgentErrorCode::NotInjected, format!("item `{item_id}` is not injected")),
                }
            }
            AgentCommand::ClearAll => {
                self.active.clear();
                AgentReply::Ack { command_seq: seq }
            }
            AgentCommand::Status => AgentReply::StatusReport {
                active: self
                    .active
                    .iter()
                    .map(|(id, st)| ActiveEntry {
                        item_id: id.clone(),
                        spec: st.spec.clone(),
                        phase: if now < st.started_at {
                            EntryPhase::Pending
                        } else if st.in_window(now) {
                            EntryPhase::Injecting
                        } else {
                            EntryPhase::Expired
                        },
                    })
                    .collect(),
            },
        }
    }

    fn is_local(&self, item: &ItemId, items: &ItemMap) -> bool {
        items.item(item).is_some_and(|i| i.location == self.host_id)
    }

    /// Consults only the state of `item`; idle items pass packets through.
    pub fn intercept(&mut self, item: &ItemId, packet: &Packet, t: SimTime) -> PacketOutcome {
        match self.active.get_mut(item) {
            Some(state) => apply_fault(state, packet, t),
            None => PacketOutcome::Deliver,
        }
    }
}
