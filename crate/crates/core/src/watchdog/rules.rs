use std::collections::VecDeque;

use crate::sim::SimTime;
use crate::topology::{Location, NodeId};

use super::{Rule, RuleEvent, WatchdogConfig};

const ACK_WEIGHT: f64 = 1.0;
const AUTH_WEIGHT: f64 = 1.0;
const TRAFFIC_WEIGHT: f64 = 1.0;

/// How a pending hop-wise acknowledgment ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AckOutcome {
    /// The ACK arrived before the deadline.
    Acked,
    /// Timed out, but the forward was overheard: the ACK itself went missing.
    TimedOutOverheard,
    /// Timed out with no evidence of forwarding.
    TimedOutSilent,
}

/// Message-acknowledgment rule for a packet this node handed to `next_hop`.
pub fn resolve_ack(next_hop: NodeId, outcome: AckOutcome, at: SimTime) -> Option<RuleEvent> {
    match outcome {
        AckOutcome::Acked => Some(RuleEvent::positive(Rule::Ack, next_hop, ACK_WEIGHT, at)),
        AckOutcome::TimedOutOverheard => None,
        AckOutcome::TimedOutSilent => {
            Some(RuleEvent::negative(Rule::Ack, next_hop, ACK_WEIGHT, at))
        }
    }
}

/// Outcome of watching a neighbor that was handed a packet by someone else.
pub fn watch_resolved(forwarder: NodeId, forwarded: bool, at: SimTime) -> RuleEvent {
    if forwarded {
        RuleEvent::positive(Rule::Ack, forwarder, ACK_WEIGHT, at)
    } else {
        RuleEvent::negative(Rule::Ack, forwarder, ACK_WEIGHT, at)
    }
}

/// Hop-wise authentication rule: only a failed check yields evidence.
pub fn check_auth(transmitter: NodeId, valid: bool, at: SimTime) -> Option<RuleEvent> {
    (!valid).then(|| RuleEvent::negative(Rule::Auth, transmitter, AUTH_WEIGHT, at))
}

/// A duplicate (src, seq) handed to this node counts as unexpected traffic
/// from the neighbor that transmitted it.
pub fn replay_detected(transmitter: NodeId, at: SimTime) -> RuleEvent {
    RuleEvent::negative(Rule::Traffic, transmitter, TRAFFIC_WEIGHT, at)
}

/// Frames a node is expected to originate per epoch: its readings plus its
/// beacons.
pub fn expected_traffic(epoch_len: u64, sensing_period: Option<u64>, beacon_period: u64) -> f64 {
    let e = epoch_len as f64;
    sensing_period.map_or(0.0, |s| e / s as f64) + e / beacon_period as f64
}

/// Traffic-awareness rule: more than `expected·(1+δ)` self-originated frames
/// in an epoch is negative evidence, anything within the band is a small
/// positive.
pub fn audit_traffic(
    subject: NodeId,
    observed: u32,
    expected: f64,
    cfg: &WatchdogConfig,
    at: SimTime,
) -> RuleEvent {
    if observed as f64 > expected * (1.0 + cfg.delta) {
        RuleEvent::negative(Rule::Traffic, subject, TRAFFIC_WEIGHT, at)
    } else {
        RuleEvent::positive(Rule::Traffic, subject, cfg.small_positive, at)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DataVerdict {
    Insufficient,
    Consistent,
    Outlier { z: f64 },
}

/// Data-validation rule. `others` holds the recent readings of every other
/// neighbor (one slice per neighbor, the subject excluded). Returns the
/// verdict and, for outliers, the negative event; consistent readings are
/// credited once per epoch through [`NeighborObservation::close_epoch`].
pub fn validate_reading<'a, I>(
    subject: NodeId,
    value: f64,
    others: I,
    cfg: &WatchdogConfig,
    sigma_floor: f64,
    at: SimTime,
) -> (DataVerdict, Option<RuleEvent>)
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut contributors = 0usize;
    let mut count = 0usize;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for readings in others {
        if readings.is_empty() {
            continue;
        }
        contributors += 1;
        for &v in readings {
            count += 1;
            sum += v;
            sum_sq += v * v;
        }
    }
    if contributors < cfg.m || count < cfg.m {
        return (DataVerdict::Insufficient, None);
    }
    let mean = sum / count as f64;
    let var = (sum_sq / count as f64 - mean * mean).max(0.0);
    let sigma = var.sqrt().max(sigma_floor);
    let dev = (value - mean).abs();
    if dev > cfg.k * sigma {
        let z = if sigma > 0.0 {
            dev / sigma
        } else {
            f64::INFINITY
        };
        (
            DataVerdict::Outlier { z },
            Some(RuleEvent::negative(
                Rule::DataValid,
                subject,
                cfg.w_data,
                at,
            )),
        )
    } else {
        (DataVerdict::Consistent, None)
    }
}

/// Self-evaluation of the packet delivery ratio. The returned event is
/// about the node itself and is logged, never fed into a reputation record.
pub fn self_delivery_check(
    originated: usize,
    acked: usize,
    cfg: &WatchdogConfig,
    at: SimTime,
) -> Option<RuleEvent> {
    if originated < cfg.min_pdr_packets || originated == 0 {
        return None;
    }
    let pdr = acked as f64 / originated as f64;
    (pdr < cfg.theta_pdr).then(|| RuleEvent::about_self(Rule::PdrSelf, at))
}

/// The parts of a status beacon the memory and in-situ rules compare.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeaconView {
    pub location: Location,
    pub code_digest: u32,
}

/// Memory-consistency and in-situ rules on consecutive beacons.
pub fn check_beacon(
    subject: NodeId,
    previous: Option<BeaconView>,
    current: BeaconView,
    cfg: &WatchdogConfig,
    at: SimTime,
) -> Option<RuleEvent> {
    let prev = previous?;
    if prev.code_digest != current.code_digest {
        Some(RuleEvent::direct_zero(Rule::Memory, subject, at))
    } else if prev.location.distance(&current.location) > cfg.eps_loc {
        Some(RuleEvent::direct_zero(Rule::InSitu, subject, at))
    } else {
        Some(RuleEvent::positive(
            Rule::Traffic,
            subject,
            cfg.small_positive,
            at,
        ))
    }
}

/// Rolling per-neighbor observations held by one monitor.
#[derive(Debug, Clone)]
pub struct NeighborObservation {
    window: usize,
    readings: VecDeque<f64>,
    readings_flat: Vec<f64>,
    tx_this_epoch: u32,
    tx_history: VecDeque<u32>,
    consistent_this_epoch: bool,
    pub last_beacon: Option<BeaconView>,
}

impl NeighborObservation {
    pub fn new(window: usize) -> Self {
        NeighborObservation {
            window,
            readings: VecDeque::with_capacity(window),
            readings_flat: Vec::with_capacity(window),
            tx_this_epoch: 0,
            tx_history: VecDeque::with_capacity(window),
            consistent_this_epoch: false,
            last_beacon: None,
        }
    }

    pub fn readings(&self) -> &[f64] {
        &self.readings_flat
    }

    pub fn push_reading(&mut self, value: f64, verdict: DataVerdict) {
        if self.window == 0 {
            return;
        }
        if self.readings.len() == self.window {
            self.readings.pop_front();
        }
        self.readings.push_back(value);
        self.readings_flat.clear();
        self.readings_flat.extend(self.readings.iter().copied());
        if verdict == DataVerdict::Consistent {
            self.consistent_this_epoch = true;
        }
    }

    pub fn count_tx(&mut self) {
        self.tx_this_epoch += 1;
    }

    pub fn tx_this_epoch(&self) -> u32 {
        self.tx_this_epoch
    }

    pub fn tx_history(&self) -> impl Iterator<Item = u32> + '_ {
        self.tx_history.iter().copied()
    }

    /// Epoch-boundary evidence: the deferred data-validation positive (if any
    /// reading was judged consistent this epoch) followed by the traffic
    /// audit. Resets the per-epoch counters.
    pub fn close_epoch(
        &mut self,
        subject: NodeId,
        expected: f64,
        cfg: &WatchdogConfig,
        at: SimTime,
    ) -> Vec<RuleEvent> {
        let mut out = Vec::with_capacity(2);
        if self.consistent_this_epoch {
            out.push(RuleEvent::positive(
                Rule::DataValid,
                subject,
                cfg.small_positive,
                at,
            ));
        }
        out.push(audit_traffic(
            subject,
            self.tx_this_epoch,
            expected,
            cfg,
            at,
        ));
        if self.window > 0 {
            if self.tx_history.len() == self.window {
                self.tx_history.pop_front();
            }
            self.tx_history.push_back(self.tx_this_epoch);
        }
        self.tx_this_epoch = 0;
        self.consistent_this_epoch = false;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::watchdog::Polarity;

    const T: SimTime = SimTime(1000);
    const B: NodeId = NodeId(5);

    fn cfg() -> WatchdogConfig {
        WatchdogConfig::default()
    }

    #[test]
    fn ack_cases() {
        assert_eq!(
            resolve_ack(B, AckOutcome::Acked, T).unwrap().polarity(),
            Polarity::Positive
        );
        assert_eq!(resolve_ack(B, AckOutcome::TimedOutOverheard, T), None);
        let neg = resolve_ack(B, AckOutcome::TimedOutSilent, T).unwrap();
        assert_eq!(
            (neg.rule(), neg.polarity(), neg.neighbor()),
            (Rule::Ack, Polarity::Negative, Some(B))
        );
    }

    #[test]
    fn auth_only_blames_failures() {
        assert_eq!(check_auth(B, true, T), None);
        assert_eq!(check_auth(B, false, T).unwrap().rule(), Rule::Auth);
    }

    #[test]
    fn identical_readings_are_consistent() {
        let w = [20.0; 3];
        let others: Vec<&[f64]> = vec![&w, &w, &w, &w];
        let (v, ev) = validate_reading(B, 20.0, others, &cfg(), 0.0, T);
        assert_eq!(v, DataVerdict::Consistent);
        assert!(ev.is_none());
    }

    #[test]
    fn far_outlier_is_negative() {
        // Neighbors around 20 with unit spread.
        let a = [19.0, 21.0];
        let b = [20.0, 20.0];
        let c = [21.0, 19.0];
        let d = [18.5, 21.5];
        let others: Vec<&[f64]> = vec![&a, &b, &c, &d];
        let (v, ev) = validate_reading(B, 40.0, others, &cfg(), 0.1, T);
        assert!(matches!(v, DataVerdict::Outlier { z } if z > 3.0));
        assert_eq!(ev.unwrap().polarity(), Polarity::Negative);
    }

    #[test]
    fn too_few_neighbors_means_no_judgment() {
        let a = [20.0; 5];
        let others: Vec<&[f64]> = vec![&a, &a];
        assert_eq!(
            validate_reading(B, 99.0, others, &cfg(), 0.1, T),
            (DataVerdict::Insufficient, None)
        );
    }

    #[test]
    fn sigma_floor_limits_sensitivity() {
        let w = [20.0];
        let others: Vec<&[f64]> = vec![&w, &w, &w, &w];
        // Zero spread, floor 1.0: 22.9 is within 3 sigma, 23.1 is not.
        assert_eq!(
            validate_reading(B, 22.9, others.clone(), &cfg(), 1.0, T).0,
            DataVerdict::Consistent
        );
        assert!(matches!(
            validate_reading(B, 23.1, others, &cfg(), 1.0, T).0,
            DataVerdict::Outlier { .. }
        ));
    }

    #[test]
    fn traffic_band_boundaries() {
        let c = cfg();
        assert_eq!(
            audit_traffic(B, 10, 10.0, &c, T).polarity(),
            Polarity::Positive
        );
        assert_eq!(
            audit_traffic(B, 14, 10.0, &c, T).polarity(),
            Polarity::Positive
        );
        assert_eq!(
            audit_traffic(B, 15, 10.0, &c, T).polarity(),
            Polarity::Positive
        );
        assert_eq!(
            audit_traffic(B, 16, 10.0, &c, T).polarity(),
            Polarity::Negative
        );
        assert_eq!(
            audit_traffic(B, 30, 10.0, &c, T).polarity(),
            Polarity::Negative
        );
    }

    #[test]
    fn expected_traffic_counts_readings_and_beacons() {
        assert_eq!(expected_traffic(10_000, Some(5_000), 10_000), 3.0);
        assert_eq!(expected_traffic(10_000, None, 5_000), 2.0);
    }

    #[test]
    fn pdr_alarm_is_strict_and_needs_samples() {
        let c = cfg();
        assert_eq!(self_delivery_check(10, 10, &c, T), None);
        assert_eq!(self_delivery_check(10, 8, &c, T), None);
        assert_eq!(self_delivery_check(4, 0, &c, T), None);
        let alarm = self_delivery_check(10, 3, &c, T).unwrap();
        assert_eq!(alarm.subject(), crate::watchdog::Subject::SelfNode);
        assert_eq!(alarm.rule(), Rule::PdrSelf);
    }

    #[test]
    fn beacon_rules() {
        let c = cfg();
        let base = BeaconView {
            location: Location::new(10.0, 10.0),
            code_digest: 7,
        };
        assert_eq!(check_beacon(B, None, base, &c, T), None);
        assert_eq!(
            check_beacon(B, Some(base), base, &c, T).unwrap().polarity(),
            Polarity::Positive
        );
        let code = BeaconView {
            code_digest: 8,
            ..base
        };
        let ev = check_beacon(B, Some(base), code, &c, T).unwrap();
        assert_eq!(
            (ev.rule(), ev.polarity()),
            (Rule::Memory, Polarity::DirectZero)
        );
        let moved = BeaconView {
            location: Location::new(20.0, 10.0),
            ..base
        };
        let ev = check_beacon(B, Some(base), moved, &c, T).unwrap();
        assert_eq!(
            (ev.rule(), ev.polarity()),
            (Rule::InSitu, Polarity::DirectZero)
        );
        let nudged = BeaconView {
            location: Location::new(15.0, 10.0),
            ..base
        };
        assert_eq!(
            check_beacon(B, Some(base), nudged, &c, T)
                .unwrap()
                .polarity(),
            Polarity::Positive
        );
    }

    #[test]
    fn epoch_close_defers_data_positive() {
        let c = cfg();
        let mut obs = NeighborObservation::new(3);
        obs.push_reading(20.0, DataVerdict::Consistent);
        obs.push_reading(20.0, DataVerdict::Consistent);
        obs.count_tx();
        let evs = obs.close_epoch(B, 3.0, &c, T);
        assert_eq!(evs.len(), 2);
        assert_eq!(evs[0].rule(), Rule::DataValid);
        assert_eq!(evs[1].rule(), Rule::Traffic);
        assert_eq!(obs.close_epoch(B, 3.0, &c, T).len(), 1);
        assert_eq!(obs.tx_history().collect::<Vec<_>>(), vec![1, 0]);
    }
}
