//! Scenario files shipped with the binary, addressable as `preset:NAME`.

pub const NAMES: [&str; 6] = [
    "unitary",
    "damped",
    "damped-mixture",
    "one-photon",
    "jc-full",
    "jc-number-pump",
];

pub fn text(name: &str) -> Option<&'static str> {
    Some(match name {
        "unitary" => include_str!("../presets/unitary.toml"),
        "damped" => include_str!("../presets/damped.toml"),
        "damped-mixture" => include_str!("../presets/damped-mixture.toml"),
        "one-photon" => include_str!("../presets/one-photon.toml"),
        "jc-full" => include_str!("../presets/jc-full.toml"),
        "jc-number-pump" => include_str!("../presets/jc-number-pump.toml"),
        _ => return None,
    })
}

/// Parse a preset with the given sampler seed.
pub fn load(name: &str, seed: u64) -> Result<crate::config::Scenario, crate::config::ConfigError> {
    let text =
        text(name).ok_or_else(|| crate::config::ConfigError::UnknownPreset(name.to_string()))?;
    crate::config::Scenario::from_toml(text, seed)
}
