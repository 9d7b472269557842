//! Flat `key = value` pipeline configuration.
//!
//! Blank lines and `#` comments are ignored. Every field of
//! [`PipelineConfig`] has a key; see [`KEYS`]. When the grid size changes
//! and `radius_max` is not given, the circle radius cap is recomputed for
//! the new size.

use ogm_core::alignment::default_radius_max;
use ogm_core::freespace::Connectivity;
use ogm_core::geom::Pose2D;
use ogm_core::pipeline::PipelineConfig;

use crate::error::FormatError;

pub const KEYS: &[&str] = &[
    "width",
    "height",
    "resolution",
    "p_free",
    "p_unknown",
    "p_occ",
    "max_range",
    "clamp_min",
    "clamp_max",
    "dbscan_enabled",
    "dbscan_eps",
    "dbscan_min_pts",
    "dbscan_min_cluster_size",
    "virtual_fallback_range",
    "speed_filter",
    "k_radius",
    "radius_max",
    "edge_margin",
    "hysteresis_low",
    "hysteresis_high",
    "connectivity",
    "opening_radius",
    "epsilon",
    "max_vertices",
    "mount_x",
    "mount_y",
    "mount_yaw",
    "odom_tolerance_us",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("invalid value `{value}` for `{key}`"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(format!("invalid value `{value}` for `{key}` (expected true/false)")),
    }
}

/// Sets one field; `Ok(true)` when `radius_max` was set explicitly.
pub fn apply(cfg: &mut PipelineConfig, key: &str, value: &str) -> Result<bool, String> {
    let value = value.trim();
    match key.trim() {
        "width" => cfg.width = parse(key, value)?,
        "height" => cfg.height = parse(key, value)?,
        "resolution" => cfg.resolution = parse(key, value)?,
        "p_free" => cfg.ism.p_free = parse(key, value)?,
        "p_unknown" => cfg.ism.p_unknown = parse(key, value)?,
        "p_occ" => cfg.ism.p_occ = parse(key, value)?,
        "max_range" => cfg.ism.max_range = parse(key, value)?,
        "clamp_min" => cfg.clamp.0 = parse(key, value)?,
        "clamp_max" => cfg.clamp.1 = parse(key, value)?,
        "dbscan_enabled" => cfg.dbscan_enabled = parse_bool(key, value)?,
        "dbscan_eps" => cfg.dbscan.eps = parse(key, value)?,
        "dbscan_min_pts" => cfg.dbscan.min_pts = parse(key, value)?,
        "dbscan_min_cluster_size" => cfg.dbscan.min_cluster_size = parse(key, value)?,
        "virtual_fallback_range" => cfg.virtual_fallback_range = parse(key, value)?,
        "speed_filter" => {
            // Either a window length `n` (moving average) or explicit
            // comma-separated coefficients, newest first.
            cfg.speed_filter = if value.contains(',') {
                value
                    .split(',')
                    .map(|v| parse::<f64>(key, v.trim()))
                    .collect::<Result<_, _>>()?
            } else {
                let n: usize = parse(key, value)?;
                if n == 0 {
                    return Err("speed_filter window must be at least 1".into());
                }
                vec![1.0 / n as f64; n]
            };
        }
        "k_radius" => cfg.k_radius = parse(key, value)?,
        "radius_max" => {
            cfg.radius_max = parse(key, value)?;
            return Ok(true);
        }
        "edge_margin" => cfg.edge_margin = parse(key, value)?,
        "hysteresis_low" => cfg.hysteresis_low = parse(key, value)?,
        "hysteresis_high" => cfg.hysteresis_high = parse(key, value)?,
        "connectivity" => {
            cfg.connectivity = match value {
                "4" => Connectivity::Four,
                "8" => Connectivity::Eight,
                _ => return Err(format!("connectivity must be 4 or 8, found `{value}`")),
            }
        }
        "opening_radius" => cfg.opening_radius = parse(key, value)?,
        "epsilon" => cfg.epsilon = parse(key, value)?,
        "max_vertices" => cfg.max_vertices = parse(key, value)?,
        "mount_x" => cfg.mount.x = parse(key, value)?,
        "mount_y" => cfg.mount.y = parse(key, value)?,
        "mount_yaw" => cfg.mount = Pose2D::new(cfg.mount.x, cfg.mount.y, parse(key, value)?),
        "odom_tolerance_us" => cfg.odom_tolerance_us = parse(key, value)?,
        other => return Err(format!("unknown key `{other}`")),
    }
    Ok(false)
}

/// Incrementally builds a configuration from files and overrides.
#[derive(Debug, Clone, Default)]
pub struct ConfigBuilder {
    cfg: PipelineConfig,
    radius_set: bool,
}

impl ConfigBuilder {
    pub fn new(base: PipelineConfig) -> Self {
        Self {
            cfg: base,
            radius_set: true,
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<&mut Self, String> {
        self.radius_set |= apply(&mut self.cfg, key, value)?;
        Ok(self)
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<&mut Self, String> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, found `{pair}`"))?;
        self.set(k, v)
    }

    pub fn read_str(&mut self, text: &str) -> Result<&mut Self, FormatError> {
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| FormatError::at(k as u64 + 1, "expected `key = value`"))?;
            self.set(key, value).map_err(|e| FormatError::at(k as u64 + 1, e))?;
        }
        Ok(self)
    }

    pub fn build(&self) -> Result<PipelineConfig, FormatError> {
        let mut cfg = self.cfg.clone();
        if !self.radius_set {
            cfg.radius_max = default_radius_max(cfg.width, cfg.height, cfg.edge_margin);
        }
        cfg.validate().map_err(FormatError::invalid)?;
        Ok(cfg)
    }
}

/// Parses a whole configuration file on top of the defaults.
pub fn parse_config(text: &str) -> Result<PipelineConfig, FormatError> {
    ConfigBuilder::default().read_str(text)?.build()
}

/// Writes every key with its current value.
pub fn render(cfg: &PipelineConfig) -> String {
    let filter: Vec<String> = cfg.speed_filter.iter().map(|a| a.to_string()).collect();
    let values = [
        cfg.width.to_string(),
        cfg.height.to_string(),
        cfg.resolution.to_string(),
        cfg.ism.p_free.to_string(),
        cfg.ism.p_unknown.to_string(),
        cfg.ism.p_occ.to_string(),
        cfg.ism.max_range.to_string(),
        cfg.clamp.0.to_string(),
        cfg.clamp.1.to_string(),
        cfg.dbscan_enabled.to_string(),
        cfg.dbscan.eps.to_string(),
        cfg.dbscan.min_pts.to_string(),
        cfg.dbscan.min_cluster_size.to_string(),
        cfg.virtual_fallback_range.to_string(),
        // A one-element list still needs the comma to read back as a list.
        if filter.len() == 1 { format!("{},", filter[0]) } else { filter.join(",") },
        cfg.k_radius.to_string(),
        cfg.radius_max.to_string(),
        cfg.edge_margin.to_string(),
        cfg.hysteresis_low.to_string(),
        cfg.hysteresis_high.to_string(),
        match cfg.connectivity {
            Connectivity::Four => "4".into(),
            Connectivity::Eight => "8".into(),
        },
        cfg.opening_radius.to_string(),
        cfg.epsilon.to_string(),
        cfg.max_vertices.to_string(),
        cfg.mount.x.to_string(),
        cfg.mount.y.to_string(),
        cfg.mount.yaw.to_string(),
        cfg.odom_tolerance_us.to_string(),
    ];
    KEYS.iter()
        .zip(values)
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_roundtrips_every_key() {
        let mut cfg = PipelineConfig::with_grid(200, 160, 0.25);
        cfg.connectivity = Connectivity::Four;
        cfg.mount = Pose2D::new(3.5, -0.25, 0.1);
        cfg.speed_filter = vec![0.5, 0.3, 0.2];
        cfg.dbscan_enabled = false;
        let text = render(&cfg);
        assert_eq!(text.lines().count(), KEYS.len());
        assert_eq!(parse_config(&text).unwrap(), cfg);
    }

    #[test]
    fn comments_and_overrides() {
        let mut b = ConfigBuilder::default();
        b.read_str("# grid\nwidth = 120 # cells\nheight=100\n\nspeed_filter = 4\n").unwrap();
        b.set_pair("epsilon=0.3").unwrap();
        let cfg = b.build().unwrap();
        assert_eq!((cfg.width, cfg.height), (120, 100));
        assert_eq!(cfg.speed_filter, vec![0.25; 4]);
        assert_eq!(cfg.epsilon, 0.3);
        assert_eq!(cfg.radius_max, 35.0);
    }

    #[test]
    fn bad_lines_are_reported() {
        let err = parse_config("width = 10\nbogus = 1\n").unwrap_err();
        assert_eq!(err.line(), Some(2));
        assert!(parse_config("p_free = 0.7\n").is_err());
    }
}
