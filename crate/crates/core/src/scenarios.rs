//! Scenario files shipped with the crate.

pub const FIG2: &str = include_str!("../scenarios/fig2.toml");
pub const DEADLINE_DROP: &str = include_str!("../scenarios/deadline_drop.toml");
pub const DEADLINE_COMPENSATION: &str = include_str!("../scenarios/deadline_compensation.toml");

/// `(name, toml)` for every shipped scenario.
pub fn all() -> [(&'static str, &'static str); 3] {
    [
        ("fig2", FIG2),
        ("deadline_drop", DEADLINE_DROP),
        ("deadline_compensation", DEADLINE_COMPENSATION),
    ]
}
