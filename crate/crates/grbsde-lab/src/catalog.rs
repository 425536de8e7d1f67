//! Bundled scenarios, embedded at compile time so `run <name>` works without
//! any files on disk.

use grbsde::{Error, Result};

use crate::scenario::Scenario;

pub const BUNDLED: &[(&str, &str)] = &[
    (
        "colehopf_gauss",
        include_str!("../scenarios/colehopf_gauss.json"),
    ),
    (
        "bounded_linear",
        include_str!("../scenarios/bounded_linear.json"),
    ),
    (
        "bounded_loglog",
        include_str!("../scenarios/bounded_loglog.json"),
    ),
    ("bounded_exp", include_str!("../scenarios/bounded_exp.json")),
    (
        "unbounded_linear_psi1",
        include_str!("../scenarios/unbounded_linear_psi1.json"),
    ),
    (
        "reflected_drift",
        include_str!("../scenarios/reflected_drift.json"),
    ),
    (
        "reflected_brownian_drift",
        include_str!("../scenarios/reflected_brownian_drift.json"),
    ),
    (
        "reflected_abs_tree",
        include_str!("../scenarios/reflected_abs_tree.json"),
    ),
    (
        "two_barrier_box",
        include_str!("../scenarios/two_barrier_box.json"),
    ),
    (
        "two_barrier_band",
        include_str!("../scenarios/two_barrier_band.json"),
    ),
    (
        "penalized_drift",
        include_str!("../scenarios/penalized_drift.json"),
    ),
    (
        "gamma_holder",
        include_str!("../scenarios/gamma_holder.json"),
    ),
];

pub fn bundled_scenario(name: &str) -> Result<Scenario> {
    let text = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::Config(format!("no bundled scenario named '{name}'")))?;
    Scenario::from_json(text)
}

pub fn all_bundled() -> Result<Vec<Scenario>> {
    BUNDLED
        .iter()
        .map(|(_, text)| Scenario::from_json(text))
        .collect()
}
