use thiserror::Error;

use crate::topology::{Location, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no eligible neighbor is closer to the destination")]
pub struct RoutingVoid;

/// Greedy geographic forwarding: among eligible neighbors strictly closer to
/// `dest` than `here`, pick the one closest to `dest`; ties go to the lowest
/// id. `neighbors` pairs each neighbor with its believed location.
pub fn greedy_next_hop<I, F>(
    here: Location,
    dest: Location,
    neighbors: I,
    mut eligible: F,
) -> Result<NodeId, RoutingVoid>
where
    I: IntoIterator<Item = (NodeId, Location)>,
    F: FnMut(NodeId) -> bool,
{
    let own = here.distance(&dest);
    let mut best: Option<(f64, NodeId)> = None;
    for (id, loc) in neighbors {
        let d = loc.distance(&dest);
        if d >= own || !eligible(id) {
            continue;
        }
        let better = match best {
            None => true,
            Some((bd, bid)) => d < bd || (d == bd && id < bid),
        };
        if better {
            best = Some((d, id));
        }
    }
    best.map(|(_, id)| id).ok_or(RoutingVoid)
}
