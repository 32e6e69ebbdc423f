//! Round-robin replica selection.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicaSet<T> {
    endpoints: Vec<T>,
    next_index: usize,
}

impl<T: Clone> ReplicaSet<T> {
    pub fn new(endpoints: Vec<T>) -> Result<Self> {
        if endpoints.is_empty() {
            return Err(Error::EmptyInput("replica set"));
        }
        Ok(ReplicaSet {
            endpoints,
            next_index: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.endpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.endpoints.is_empty()
    }

    pub fn endpoints(&self) -> &[T] {
        &self.endpoints
    }

    /// Next endpoint in strict cyclic order, with its position.
    pub fn pick(&mut self) -> (usize, T) {
        let i = self.next_index;
        self.next_index = (i + 1) % self.endpoints.len();
        (i, self.endpoints[i].clone())
    }
}
