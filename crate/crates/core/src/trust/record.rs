use crate::watchdog::{Polarity, Rule, RuleEvent};

use super::TrustConfig;

/// Trust from evidence counters: `(p + 1) / (p + n + 1)`. Starts at 1 with no
/// evidence and tends to `p / (p + n)` as evidence accumulates.
pub fn trust_value(p: f64, n: f64) -> f64 {
    (p + 1.0) / (p + n + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrustStatus {
    Active,
    Suspected,
    Isolated,
}

impl TrustStatus {
    pub fn label(self) -> &'static str {
        match self {
            TrustStatus::Active => "active",
            TrustStatus::Suspected => "suspected",
            TrustStatus::Isolated => "isolated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsolationCause {
    Vote,
    DirectZero(Rule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Applied {
    /// Counters changed.
    Updated,
    /// The event was a direct-zero and isolated the subject.
    Isolated,
    /// The record ignored the event (isolated, or a positive while suspected).
    Ignored,
}

/// One observer's view of one neighbor. The counters are private: evidence
/// enters only through [`ReputationRecord::apply`], which takes a
/// [`RuleEvent`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReputationRecord {
    p: f64,
    n: f64,
    status: TrustStatus,
    cause: Option<IsolationCause>,
    alerted: bool,
}

impl Default for ReputationRecord {
    fn default() -> Self {
        Self::new()
    }
}

impl ReputationRecord {
    pub fn new() -> Self {
        ReputationRecord {
            p: 0.0,
            n: 0.0,
            status: TrustStatus::Active,
            cause: None,
            alerted: false,
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn status(&self) -> TrustStatus {
        self.status
    }

    pub fn cause(&self) -> Option<IsolationCause> {
        self.cause
    }

    pub fn is_isolated(&self) -> bool {
        self.status == TrustStatus::Isolated
    }

    /// Current trust; an isolated neighbor is pinned at 0.
    pub fn trust(&self) -> f64 {
        if self.is_isolated() {
            0.0
        } else {
            trust_value(self.p, self.n)
        }
    }

    /// Epoch aging. Only active records fade; once suspected, past evidence
    /// is frozen.
    pub fn age(&mut self, lambda: f64) {
        if self.status == TrustStatus::Active {
            self.p *= lambda;
            self.n *= lambda;
        }
    }

    pub fn apply(&mut self, event: &RuleEvent, cfg: &TrustConfig) -> Applied {
        if self.is_isolated() {
            return Applied::Ignored;
        }
        match event.polarity() {
            Polarity::DirectZero => {
                self.status = TrustStatus::Isolated;
                self.cause = Some(IsolationCause::DirectZero(event.rule()));
                Applied::Isolated
            }
            Polarity::Positive if self.status == TrustStatus::Suspected => Applied::Ignored,
            Polarity::Positive => {
                self.p += event.weight() * cfg.activity_weights.for_rule(event.rule());
                Applied::Updated
            }
            Polarity::Negative => {
                self.n += event.weight();
                Applied::Updated
            }
        }
    }

    /// Moves an active record below `theta` to suspected. Returns true on the
    /// transition.
    pub fn evaluate(&mut self, theta: f64) -> bool {
        if self.status == TrustStatus::Active && self.trust() < theta {
            self.status = TrustStatus::Suspected;
            true
        } else {
            false
        }
    }

    /// True while suspected and this observer has not yet raised its one
    /// alert for the current suspicion.
    pub fn alert_pending(&self) -> bool {
        self.status == TrustStatus::Suspected && !self.alerted
    }

    pub fn mark_alerted(&mut self) {
        self.alerted = true;
    }

    /// Applies an isolate verdict. Counters are left untouched.
    pub fn isolate_by_vote(&mut self) -> bool {
        if self.is_isolated() {
            return false;
        }
        self.status = TrustStatus::Isolated;
        self.cause = Some(IsolationCause::Vote);
        true
    }
}
