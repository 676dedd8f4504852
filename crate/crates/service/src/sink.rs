use std::sync::{Arc, Mutex};

use mrl_core::store::{EventEnvelope, EventSink};

/// An in-memory sink whose clones share one buffer.
#[derive(Debug, Clone, Default)]
pub struct MemorySink(Arc<Mutex<Vec<EventEnvelope>>>);

impl MemorySink {
    pub fn events(&self) -> Vec<EventEnvelope> {
        self.0.lock().expect("sink lock").clone()
    }
}

impl EventSink for MemorySink {
    fn write_event(&mut self, envelope: &EventEnvelope) -> mrl_core::Result<()> {
        self.0.lock().expect("sink lock").push(envelope.clone());
        Ok(())
    }
}
