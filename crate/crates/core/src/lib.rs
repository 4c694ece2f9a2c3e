pub mod adversary;
pub mod crypto;
pub mod harness;
pub mod metrics;
pub mod presets;
pub mod protocol;
pub mod radio;
pub mod scenario;
pub mod sim;
pub mod topology;
pub mod trust;
pub mod watchdog;
pub mod world;
