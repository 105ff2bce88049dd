use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub const PRECISION_ENV: &str = "QUADTHERM_PRECISION_BITS";

/// Everything a run depends on. Resolved from defaults, then the
/// environment, then `--config`, then flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub precision_bits: u32,
    /// Preimage-tree depth `m`.
    pub tree_depth: usize,
    /// Largest return time `M_max` for branch enumeration.
    pub m_max: usize,
    /// Number of epochs or levels `K`.
    pub big_k: usize,
    pub tol: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            precision_bits: quadtherm_core::DEFAULT_PRECISION,
            tree_depth: 18,
            m_max: 20,
            big_k: 6,
            tol: 1e-10,
            seed: 0,
            out: None,
        }
    }
}

/// Values given on the command line; `None` leaves lower layers in place.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub precision_bits: Option<u32>,
    pub tree_depth: Option<usize>,
    pub m_max: Option<usize>,
    pub big_k: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn resolve(env: Option<&str>, file: Option<&Path>, flags: &Overrides) -> Result<Self, String> {
        let mut cfg = RunConfig::default();
        if let Some(v) = env {
            cfg.precision_bits = v.trim().parse().map_err(|_| format!("{PRECISION_ENV}={v:?} is not an integer"))?;
        }
        if let Some(path) = file {
            let err = |e: &dyn std::fmt::Display| format!("{}: {e}", path.display());
            let text = std::fs::read_to_string(path).map_err(|e| err(&e))?;
            let keys: serde_json::Value = serde_json::from_str(&text).map_err(|e| err(&e))?;
            let env_precision = cfg.precision_bits;
            cfg = serde_json::from_value(keys.clone()).map_err(|e| err(&e))?;
            // The file only overrides the environment if it sets the key.
            if keys.get("precision_bits").is_none() {
                cfg.precision_bits = env_precision;
            }
        }
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = flags.$f.clone() { cfg.$f = v.into(); } )* };
        }
        set!(precision_bits, tree_depth, m_max, big_k, tol, seed);
        if let Some(out) = &flags.out {
            cfg.out = Some(out.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        quadtherm_core::precision::check_precision(self.precision_bits).map_err(|e| e.to_string())?;
        if self.tree_depth == 0 || self.m_max == 0 || self.big_k == 0 {
            return Err("depth limits must be positive".into());
        }
        if !(self.tol > 0.0) {
            return Err("tol must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let dir = std::env::temp_dir().join(format!("quadtherm-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cfg.json");
        std::fs::write(&path, r#"{"precision_bits": 200, "m_max": 12}"#).unwrap();
        let none = Overrides::default();
        assert_eq!(RunConfig::resolve(Some("150"), None, &none).unwrap().precision_bits, 150);
        let cfg = RunConfig::resolve(Some("150"), Some(&path), &none).unwrap();
        assert_eq!((cfg.precision_bits, cfg.m_max, cfg.tree_depth), (200, 12, 18));
        let flags = Overrides { precision_bits: Some(300), ..Default::default() };
        assert_eq!(RunConfig::resolve(Some("150"), Some(&path), &flags).unwrap().precision_bits, 300);
        std::fs::write(&path, r#"{"m_max": 12}"#).unwrap();
        assert_eq!(RunConfig::resolve(Some("150"), Some(&path), &none).unwrap().precision_bits, 150);
        std::fs::write(&path, r#"{"bogus": 1}"#).unwrap();
        assert!(RunConfig::resolve(None, Some(&path), &none).is_err());
        assert!(RunConfig::resolve(Some("12"), None, &none).is_err());
        let cfg = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        std::fs::remove_dir_all(&dir).ok();
    }
}
