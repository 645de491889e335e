use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::estimators::EvaluationRecord;

/// Bounded FIFO history of evaluation records.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    records: VecDeque<EvaluationRecord>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("buffer capacity must be positive"));
        }
        Ok(ReplayBuffer {
            records: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Appends, evicting the oldest record when full. Records must arrive in
    /// non-decreasing iteration order.
    pub fn push(&mut self, record: EvaluationRecord) -> Result<()> {
        if let Some(last) = self.records.back() {
            if record.iteration < last.iteration {
                return Err(Error::invalid(format!(
                    "record from iteration {} after iteration {}",
                    record.iteration, last.iteration
                )));
            }
        }
        if !(record.delta > 0.0) {
            return Err(Error::invalid("record with non-positive smoothing radius"));
        }
        if self.records.len() == self.capacity {
            self.records.pop_front();
        }
        self.records.push_back(record);
        Ok(())
    }

    pub fn extend(&mut self, records: impl IntoIterator<Item = EvaluationRecord>) -> Result<()> {
        records.into_iter().try_for_each(|r| self.push(r))
    }

    pub fn get(&self, i: usize) -> Option<&EvaluationRecord> {
        self.records.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &EvaluationRecord> {
        self.records.iter()
    }
}
