//! Shipped maps and run configurations.

pub const MAPS: [&str; 4] = ["mixed", "peaks", "spread", "broad_mixed"];
pub const CONFIGS: [&str; 3] = ["drone", "smoke", "surface"];

/// Gaussian-mixture map document by name.
pub fn map(name: &str) -> Option<&'static str> {
    Some(match name {
        "mixed" => include_str!("../../../presets/maps/mixed.json"),
        "peaks" => include_str!("../../../presets/maps/peaks.json"),
        "spread" => include_str!("../../../presets/maps/spread.json"),
        "broad_mixed" => include_str!("../../../presets/maps/broad_mixed.json"),
        _ => return None,
    })
}

/// Run configuration by name.
pub fn config(name: &str) -> Option<&'static str> {
    Some(match name {
        "drone" => include_str!("../../../presets/drone.json"),
        "smoke" => include_str!("../../../presets/smoke.json"),
        "surface" => include_str!("../../../presets/surface.json"),
        _ => return None,
    })
}
