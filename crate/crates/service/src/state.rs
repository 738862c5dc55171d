use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use marginalia_core::review::Store;

use crate::config::Config;
use crate::runner::{GatewayFactory, RunQueue};

/// Shared by every request. All durable state lives in the store.
pub struct AppState {
    store: RwLock<Store>,
    pub config: Config,
    factory: Arc<dyn GatewayFactory>,
    queue: RunQueue,
}

impl AppState {
    pub fn new(store: Store, config: Config, factory: Arc<dyn GatewayFactory>) -> Arc<Self> {
        Arc::new(Self {
            store: RwLock::new(store),
            config,
            factory,
            queue: RunQueue::default(),
        })
    }

    // Store methods validate before committing, so a panic cannot leave it
    // half-updated; a poisoned lock is still safe to use.
    pub fn read(&self) -> RwLockReadGuard<'_, Store> {
        self.store.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn write(&self) -> RwLockWriteGuard<'_, Store> {
        self.store.write().unwrap_or_else(|e| e.into_inner())
    }

    pub fn factory(&self) -> &dyn GatewayFactory {
        self.factory.as_ref()
    }

    pub(crate) fn queue(&self) -> &RunQueue {
        &self.queue
    }
}
