//! Scenarios shipped with the binary, addressable by name.

use std::path::Path;

use adapterd_core::Scenario;

pub const BUNDLED: [(&str, &str); 6] = [
    ("table8", include_str!("../scenarios/table8.json")),
    ("table8-base", include_str!("../scenarios/table8-base.json")),
    ("table9", include_str!("../scenarios/table9.json")),
    ("table10", include_str!("../scenarios/table10.json")),
    ("table11", include_str!("../scenarios/table11.json")),
    ("table11-2x", include_str!("../scenarios/table11-2x.json")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn bundled(name: &str) -> Option<Scenario> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| Scenario::from_json(text).expect("bundled scenario parses"))
}

/// A bundled scenario name, or else a path to a scenario file.
pub fn resolve(name_or_path: &str) -> adapterd_core::Result<Scenario> {
    match bundled(name_or_path) {
        Some(s) => Ok(s),
        None => Scenario::load(Path::new(name_or_path)),
    }
}
