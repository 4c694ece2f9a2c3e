//! Built-in scenarios for the standard experiments. Each preset is plain
//! scenario TOML, so `sentinel preset <name>` output can be edited and run.

use crate::scenario::{ConfigError, Scenario};

/// Dense lossless deployment shared by every preset: 80 nodes on 200 m x 200 m
/// with a 50 m radio range and the sink in a corner, so traffic converges from
/// one side. Placements with a node that has fewer than two forwarding
/// candidates are redrawn, and the routing floor sits well below the
/// suspicion threshold so senders keep feeding evidence to their watchers.
const BASE: &str = r#"seed = 1
nodes = 80
field = [200.0, 200.0]
radio_range = 50.0
sink = [0.0, 0.0]
min_progress = 2

[channel]
loss_prob = 0.0
ack_loss_prob = 0.0
collision_window = 0

[sensing]
field_mean = 20.0
field_sigma = 0.0

[trust]
theta_route = 0.05
"#;

const HONEST_BASELINE: &str = r#"run_ticks = 5000000
nodes = 50
monitor = ["busiest-relay"]
"#;

const BLACKHOLE: &str = r#"run_ticks = 1000000

[watchdog]
p_watch = 1.0

[[compromise]]
node = "busiest-relay"
at = 500000
profile = { drop_rate = 1.0 }
"#;

const GRADUATED_DROP: &str = r#"run_ticks = 5000000

[watchdog]
p_watch = 1.0

[metrics]
steady_window = [400, 500]
rule_log = false

[[compromise]]
node = "busiest-relay"
at = 500000
profile = { drop_rate = 1.0 }

[sweep]
param = "compromise.0.profile.drop_rate"
values = [0.25, 0.5, 0.75, 1.0]
replicas = 10
"#;

const BAD_MOUTH: &str = r#"run_ticks = 1000000

[trust]
plain_majority = true

[[collusion]]
target = "max-degree"
direction = "bad-mouth"
members = "minority"
at = 500000
"#;

const FALSE_PRAISE: &str = r#"run_ticks = 1000000

[watchdog]
p_watch = 1.0

[[compromise]]
node = "busiest-relay"
at = 500000
profile = { drop_rate = 1.0 }

[[collusion]]
target = "busiest-relay"
direction = "false-praise"
members = 2
at = 500000
"#;

const JAMMER: &str = r#"run_ticks = 1000000

[channel]
collision_window = 24

[toggles]
end_to_end_ack = true

[[compromise]]
node = "busiest-relay"
at = 500000
profile = { jam_rate = 0.02 }
"#;

const BYZANTINE: &str = r#"run_ticks = 1000000

[[compromise]]
node = "busiest-relay"
at = 500000
profile = { code_delta = true, byzantine_duty = 0.5, drop_rate = 0.5 }
"#;

const RELOCATION: &str = r#"run_ticks = 1000000

[[compromise]]
node = "max-degree"
at = 500000
profile = { relocate = [10.0, 0.0] }
"#;

pub const PRESET_NAMES: [&str; 8] = [
    "honest-baseline",
    "blackhole",
    "graduated-drop",
    "bad-mouth",
    "false-praise",
    "jammer",
    "byzantine",
    "relocation",
];

/// TOML text of a preset.
pub fn preset_toml(name: &str) -> Result<String, ConfigError> {
    let body = match name {
        "honest-baseline" => HONEST_BASELINE,
        "blackhole" => BLACKHOLE,
        "graduated-drop" => GRADUATED_DROP,
        "bad-mouth" => BAD_MOUTH,
        "false-praise" => FALSE_PRAISE,
        "jammer" => JAMMER,
        "byzantine" => BYZANTINE,
        "relocation" => RELOCATION,
        other => return Err(ConfigError::UnknownPreset(other.to_string())),
    };
    Ok(merge(BASE, body))
}

pub fn preset(name: &str) -> Result<Scenario, ConfigError> {
    Scenario::from_toml_str(&preset_toml(name)?)
}

/// Joins the shared base with a preset body. A table the body repeats is
/// merged key by key, with the body winning.
fn merge(base: &str, body: &str) -> String {
    let mut root: toml::Table = base.parse().expect("base preset parses");
    let extra: toml::Table = body.parse().expect("preset body parses");
    for (k, v) in extra {
        match (root.get_mut(&k), v) {
            (Some(toml::Value::Table(dst)), toml::Value::Table(src)) => dst.extend(src),
            (_, v) => {
                root.insert(k, v);
            }
        }
    }
    toml::to_string(&root).expect("table serializes")
}
