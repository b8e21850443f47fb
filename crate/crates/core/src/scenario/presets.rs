//! Built-in scenario documents.

use serde_json::Value;

use crate::error::{Error, Result};

pub const PRESETS: [(&str, &str); 8] = [
    ("fig2", include_str!("../../presets/fig2.json")),
    ("fig3a", include_str!("../../presets/fig3a.json")),
    ("fig3b", include_str!("../../presets/fig3b.json")),
    ("fig4", include_str!("../../presets/fig4.json")),
    ("fig5", include_str!("../../presets/fig5.json")),
    ("noise300k", include_str!("../../presets/noise300k.json")),
    ("bandwidth", include_str!("../../presets/bandwidth.json")),
    ("room-epr", include_str!("../../presets/room-epr.json")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn preset_value(name: &str) -> Result<Value> {
    let text = preset_text(name).ok_or_else(|| Error::Config {
        path: "preset".into(),
        message: format!(
            "unknown preset `{name}` (available: {})",
            preset_names().collect::<Vec<_>>().join(", ")
        ),
    })?;
    serde_json::from_str(text).map_err(|e| Error::Config {
        path: format!("preset {name}"),
        message: e.to_string(),
    })
}
