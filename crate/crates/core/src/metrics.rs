//! Per-run logs and the summary metrics derived from them.

use std::collections::{BTreeMap, BTreeSet};

use crate::topology::NodeId;
use crate::trust::{IsolationCause, ProbeOutcome, TrustStatus};
use crate::watchdog::{Polarity, Rule};

/// Raw counters accumulated while a world runs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counters {
    pub readings_originated: u64,
    pub readings_delivered: u64,
    pub bytes_total: u64,
    pub bytes_control: u64,
    pub frames: u64,
    pub noise_frames: u64,
    pub alerts: u64,
    pub votes: u64,
    pub isolations: u64,
    pub routing_voids: u64,
    pub auth_failures: u64,
    pub e2e_failures: u64,
    pub jamming_alarms: u64,
    pub jamming_alarms_at_sink: u64,
    pub attack_drops: u64,
    pub replays_detected: u64,
    pub frames_from_isolated: u64,
    /// Times a received ALERT/VOTE/NOTICE/probe changed the receiver's
    /// counters. Must stay zero.
    pub remote_counter_updates: u64,
    pub events: u64,
}

/// Why a node is counted as bad.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BadKind {
    Compromised,
    Faulty,
    Colluder,
}

impl BadKind {
    pub fn label(self) -> &'static str {
        match self {
            BadKind::Compromised => "compromised",
            BadKind::Faulty => "faulty",
            BadKind::Colluder => "colluder",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BadNode {
    pub id: NodeId,
    pub kind: BadKind,
    /// Tick misbehavior may start.
    pub activation: u64,
    /// Honest topology neighbors when the run was built.
    pub honest_neighbors: Vec<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub epoch: u64,
    pub observer: NodeId,
    pub subject: NodeId,
    pub p: f64,
    pub n: f64,
    pub trust: f64,
    pub status: TrustStatus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleLogRow {
    pub tick: u64,
    pub observer: NodeId,
    /// `None` for self-evaluation events.
    pub subject: Option<NodeId>,
    pub rule: Rule,
    pub polarity: Polarity,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsolationRow {
    pub tick: u64,
    pub observer: NodeId,
    pub subject: NodeId,
    pub cause: IsolationCause,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlertRow {
    pub tick: u64,
    pub issuer: NodeId,
    pub suspect: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryRow {
    pub tick: u64,
    pub querier: NodeId,
    pub remote: NodeId,
    pub distance: f64,
    pub hop_estimate: u32,
    pub budget: u8,
    pub attempts: u8,
    pub outcome: ProbeOutcome,
    /// Hops the deciding probe travelled before it was confirmed or rejected.
    pub hops: u8,
}

/// Headline metrics of one run. `None` marks a metric that is undefined for
/// the run (for example a detection rate with no bad nodes).
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub detection_rate: Option<f64>,
    pub false_positive_rate: f64,
    pub mean_time_to_isolation: Option<f64>,
    pub delivery_ratio: Option<f64>,
    pub control_overhead: Option<f64>,
    pub disagreement: Option<f64>,
    pub steady_trust: Option<f64>,
    pub counters: Counters,
}

/// Everything one world hands back after running.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub seed: u64,
    pub node_count: usize,
    pub epochs: u64,
    pub summary: Summary,
    pub bad_nodes: Vec<BadNode>,
    /// Resolved target of each collusion entry, in scenario order.
    pub collusion_targets: Vec<NodeId>,
    /// Resolved `monitor` selectors, in scenario order.
    pub monitored: Vec<NodeId>,
    pub trajectories: Vec<TrajectoryRow>,
    pub rule_events: Vec<RuleLogRow>,
    pub isolations: Vec<IsolationRow>,
    pub alerts: Vec<AlertRow>,
    pub queries: Vec<QueryRow>,
    pub trace_digest: String,
    pub trace_text: Option<String>,
}

impl RunReport {
    /// First tick at which `observer` isolated `subject`.
    pub fn isolation_of(&self, observer: NodeId, subject: NodeId) -> Option<&IsolationRow> {
        self.isolations
            .iter()
            .find(|r| r.observer == observer && r.subject == subject)
    }

    /// Trajectory of one (observer, subject) pair in epoch order.
    pub fn trajectory(&self, observer: NodeId, subject: NodeId) -> Vec<TrajectoryRow> {
        self.trajectories
            .iter()
            .filter(|r| r.observer == observer && r.subject == subject)
            .copied()
            .collect()
    }
}

/// Inputs to [`summarize`] that the world gathers at the end of a run.
#[derive(Debug)]
pub struct SummaryInputs<'a> {
    pub node_count: usize,
    pub bad: &'a [BadNode],
    pub isolations: &'a [IsolationRow],
    pub trajectories: &'a [TrajectoryRow],
    /// Final status of every (observer, subject) record held by an honest
    /// observer.
    pub final_status: &'a BTreeMap<(NodeId, NodeId), TrustStatus>,
    pub steady_window: [u64; 2],
    pub counters: Counters,
}

pub fn summarize(inp: SummaryInputs<'_>) -> Summary {
    let bad: BTreeSet<NodeId> = inp.bad.iter().map(|b| b.id).collect();
    let honest_observer = |id: NodeId| !bad.contains(&id);
    let mut first_isolation: BTreeMap<NodeId, u64> = BTreeMap::new();
    for row in inp
        .isolations
        .iter()
        .filter(|r| honest_observer(r.observer))
    {
        let t = first_isolation.entry(row.subject).or_insert(row.tick);
        *t = (*t).min(row.tick);
    }

    let detection_rate = (!bad.is_empty()).then(|| {
        let hit = bad
            .iter()
            .filter(|b| first_isolation.contains_key(b))
            .count();
        hit as f64 / bad.len() as f64
    });
    let honest_count = inp.node_count - bad.len();
    let false_positive_rate = if honest_count == 0 {
        0.0
    } else {
        let hit = first_isolation.keys().filter(|s| !bad.contains(s)).count();
        hit as f64 / honest_count as f64
    };

    let ttis: Vec<f64> = inp
        .bad
        .iter()
        .filter(|b| b.kind != BadKind::Colluder)
        .filter_map(|b| {
            first_isolation
                .get(&b.id)
                .map(|&t| t.saturating_sub(b.activation) as f64)
        })
        .collect();
    let mean_time_to_isolation = mean(&ttis);

    let c = &inp.counters;
    let delivery_ratio = (c.readings_originated > 0)
        .then(|| c.readings_delivered as f64 / c.readings_originated as f64);
    let control_overhead =
        (c.bytes_total > 0).then(|| c.bytes_control as f64 / c.bytes_total as f64);

    // Pairs of honest observers that both hold a record for a subject some
    // honest observer isolated; a pair disagrees when exactly one isolated it.
    let mut by_subject: BTreeMap<NodeId, Vec<bool>> = BTreeMap::new();
    for (&(obs, subj), &status) in inp.final_status {
        if honest_observer(obs) {
            by_subject
                .entry(subj)
                .or_default()
                .push(status == TrustStatus::Isolated);
        }
    }
    let (mut pairs, mut conflicts) = (0u64, 0u64);
    for views in by_subject.values() {
        if !views.iter().any(|&iso| iso) {
            continue;
        }
        let k = views.len() as u64;
        let iso = views.iter().filter(|&&x| x).count() as u64;
        pairs += k * (k - 1) / 2;
        conflicts += iso * (k - iso);
    }
    let disagreement = (pairs > 0).then(|| conflicts as f64 / pairs as f64);

    // A bad node that honest nodes isolated has no steady state: its trust is
    // frozen at whatever value crossed the threshold. Only attackers that
    // were never isolated contribute.
    let [lo, hi] = inp.steady_window;
    let steady: Vec<f64> = inp
        .trajectories
        .iter()
        .filter(|r| r.epoch >= lo && r.epoch <= hi)
        .filter(|r| bad.contains(&r.subject) && honest_observer(r.observer))
        .filter(|r| !first_isolation.contains_key(&r.subject))
        .filter(|r| r.status != TrustStatus::Isolated)
        .map(|r| r.trust)
        .collect();
    let steady_trust = mean(&steady);

    Summary {
        detection_rate,
        false_positive_rate,
        mean_time_to_isolation,
        delivery_ratio,
        control_overhead,
        disagreement,
        steady_trust,
        counters: inp.counters,
    }
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    Some((xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt())
}
