//! Scenarios shipped with the tool, also available as JSON under `scenarios/`.

use serde_json::Value;

use crate::config::{parse_scenario, Scenario};
use crate::error::CliResult;

const SHIPPED: &[(&str, &str)] = &[
    ("mp_square", include_str!("../../../scenarios/mp_square.json")),
    ("mp_wide", include_str!("../../../scenarios/mp_wide.json")),
    ("fig2_ula", include_str!("../../../scenarios/fig2_ula.json")),
    ("mixed_dims", include_str!("../../../scenarios/mixed_dims.json")),
    ("three_users", include_str!("../../../scenarios/three_users.json")),
    ("los_single", include_str!("../../../scenarios/los_single.json")),
    ("los_multi", include_str!("../../../scenarios/los_multi.json")),
    ("explicit_los", include_str!("../../../scenarios/explicit_los.json")),
];

pub fn shipped_names() -> Vec<&'static str> {
    SHIPPED.iter().map(|(name, _)| *name).collect()
}

pub fn shipped() -> CliResult<Vec<(String, Scenario)>> {
    SHIPPED
        .iter()
        .map(|(name, text)| {
            let value: Value = serde_json::from_str(text).expect("shipped scenario is valid JSON");
            Ok((name.to_string(), parse_scenario(&value)?))
        })
        .collect()
}

pub fn shipped_by_name(name: &str) -> Option<Scenario> {
    shipped().ok()?.into_iter().find(|(n, _)| n == name).map(|(_, s)| s)
}
