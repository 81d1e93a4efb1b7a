//! Flat TOML scenario files.
//!
//! ```toml
//! preset = "ee"                 # optional: "se" (default) or "ee"
//! elements = 500
//! p_max_d = "24 dBm"            # powers always carry a unit: dBm, W or mW
//! noise_power = "-114 dBm"
//! r_min_c = 0.55                # bps/Hz; or gamma_min_c (linear SINR)
//! rician_k = 10                 # all four factors; or rician_k1..rician_k4
//! cus = [[38, 54], [87, 92], [112, 136], [155, 89]]
//!
//! [sweep]
//! axis = "p_max"
//! values = [10, 15, 20, 25, 30]
//! ```
//!
//! Unknown keys are rejected so typos surface immediately.

use std::path::Path;

use toml::{Table, Value};

use super::{dbm_to_watt, default_ee_topology, default_topology, rate_to_sinr, Point, SystemConfig};
use crate::error::{Error, Result};

/// A parsed scenario file: the system constants plus any sweep keys, kept
/// as raw values for the harness to interpret.
#[derive(Debug, Clone)]
pub struct ConfigFile {
    pub system: SystemConfig,
    pub sweep: Table,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        text.parse()
    }
}

impl std::str::FromStr for ConfigFile {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        let sweep = match table.remove("sweep") {
            Some(Value::Table(t)) => t,
            Some(_) => return Err(Error::Config("`sweep` must be a table".into())),
            None => Table::new(),
        };
        let mut cfg = match table.remove("preset") {
            None => default_topology(),
            Some(Value::String(s)) if s == "se" => default_topology(),
            Some(Value::String(s)) if s == "ee" => default_ee_topology(),
            Some(other) => return Err(Error::Config(format!("unknown preset {other}"))),
        };
        for (key, value) in &table {
            apply(&mut cfg, key, value)?;
        }
        if !table.contains_key("cu_count") && table.contains_key("cus") {
            cfg.cu_count = cfg.cus.len();
        }
        if !table.contains_key("d2d_count") && table.contains_key("d2d_tx") {
            cfg.d2d_count = cfg.d2d_tx.len();
        }
        if table.contains_key("cu_count") && !table.contains_key("cus") {
            cfg = cfg.clone().with_cu_count(cfg.cu_count)?;
        }
        cfg.validate()?;
        Ok(Self { system: cfg, sweep })
    }
}

/// Parse `"<number> dBm"`, `"<number> W"` or `"<number> mW"` into watts.
pub fn parse_power(text: &str) -> Result<f64> {
    let text = text.trim();
    let split = text
        .find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
        .ok_or_else(|| Error::Parse(format!("power `{text}` needs a unit (dBm, W or mW)")))?;
    let (num, unit) = text.split_at(split);
    let x: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad number in power `{text}`")))?;
    let w = match unit.trim() {
        "dBm" | "dbm" => dbm_to_watt(x),
        "W" | "w" => x,
        "mW" | "mw" => x * 1e-3,
        other => return Err(Error::Parse(format!("unknown power unit `{other}`"))),
    };
    if !w.is_finite() {
        return Err(Error::Parse(format!("power `{text}` is not finite")));
    }
    Ok(w)
}

fn number(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Integer(i) => Ok(*i as f64),
        Value::Float(f) => Ok(*f),
        Value::String(s) if s.eq_ignore_ascii_case("inf") => Ok(f64::INFINITY),
        _ => Err(Error::Config(format!("`{key}` must be a number"))),
    }
}

fn count(key: &str, v: &Value) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(Error::Config(format!("`{key}` must be a non-negative integer"))),
    }
}

fn power(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::String(s) => parse_power(s),
        _ => Err(Error::Config(format!(
            "`{key}` must be a string with a unit, e.g. \"24 dBm\""
        ))),
    }
}

fn point(key: &str, v: &Value) -> Result<Point> {
    match v.as_array().map(|a| a.as_slice()) {
        Some([x, y]) => Ok(Point::new(number(key, x)?, number(key, y)?)),
        _ => Err(Error::Config(format!("`{key}` must be an [x, y] pair"))),
    }
}

fn points(key: &str, v: &Value) -> Result<Vec<Point>> {
    v.as_array()
        .ok_or_else(|| Error::Config(format!("`{key}` must be an array of [x, y] pairs")))?
        .iter()
        .map(|p| point(key, p))
        .collect()
}

fn apply(cfg: &mut SystemConfig, key: &str, v: &Value) -> Result<()> {
    match key {
        "cu_count" => cfg.cu_count = count(key, v)?,
        "d2d_count" => cfg.d2d_count = count(key, v)?,
        "elements" => cfg.elements = count(key, v)?,
        "bits" => cfg.bits = count(key, v)? as u32,
        "cell_radius" => cfg.cell_radius = number(key, v)?,
        "cluster_radius" => cfg.cluster_radius = number(key, v)?,
        "p_max" => {
            cfg.p_max_d = power(key, v)?;
            cfg.p_max_c = cfg.p_max_d;
        }
        "p_max_d" => cfg.p_max_d = power(key, v)?,
        "p_max_c" => cfg.p_max_c = power(key, v)?,
        "r_min" => {
            cfg.gamma_min_d = rate_to_sinr(number(key, v)?);
            cfg.gamma_min_c = cfg.gamma_min_d;
        }
        "r_min_d" => cfg.gamma_min_d = rate_to_sinr(number(key, v)?),
        "r_min_c" => cfg.gamma_min_c = rate_to_sinr(number(key, v)?),
        "gamma_min_d" => cfg.gamma_min_d = number(key, v)?,
        "gamma_min_c" => cfg.gamma_min_c = number(key, v)?,
        "noise_power" => cfg.noise_power = power(key, v)?,
        "circuit_power" => cfg.circuit_power = power(key, v)?,
        "path_loss_reference" => cfg.path_loss.reference = number(key, v)?,
        "ple_direct" => cfg.path_loss.ple_direct = number(key, v)?,
        "ple_ris_bs" => cfg.path_loss.ple_ris_bs = number(key, v)?,
        "ple_ris_other" => cfg.path_loss.ple_ris_other = number(key, v)?,
        "rician_k" => {
            let k = number(key, v)?;
            cfg.rician = super::RicianFactors::uniform(k);
        }
        "rician_k1" => cfg.rician.k1 = number(key, v)?,
        "rician_k2" => cfg.rician.k2 = number(key, v)?,
        "rician_k3" => cfg.rician.k3 = number(key, v)?,
        "rician_k4" => cfg.rician.k4 = number(key, v)?,
        "ris_gain_db" => cfg.ris_gain_db = number(key, v)?,
        "ris_array_axis_deg" => cfg.ris_array_axis = number(key, v)?.to_radians(),
        "p_fpga" => cfg.ris_power.p_fpga = power(key, v)?,
        "sampling_hz" => cfg.ris_power.sampling_hz = number(key, v)?,
        "p_v" => {
            cfg.ris_power.p_v = v
                .as_array()
                .ok_or_else(|| Error::Config("`p_v` must be an array of powers".into()))?
                .iter()
                .map(|p| power(key, p))
                .collect::<Result<_>>()?;
        }
        "bs" => cfg.bs = point(key, v)?,
        "ris" => cfg.ris = point(key, v)?,
        "cus" => cfg.cus = points(key, v)?,
        "d2d_tx" => cfg.d2d_tx = points(key, v)?,
        "d2d_rx" => cfg.d2d_rx = points(key, v)?,
        "seed" => cfg.seed = count(key, v)? as u64,
        "epsilon" => cfg.solver.epsilon = number(key, v)?,
        "delta" => cfg.solver.delta = number(key, v)?,
        "max_outer_iterations" => cfg.solver.max_outer_iterations = count(key, v)?,
        "extrapolate" => {
            cfg.solver.extrapolate = v
                .as_bool()
                .ok_or_else(|| Error::Config("`extrapolate` must be a boolean".into()))?
        }
        _ => return Err(Error::Config(format!("unknown key `{key}`"))),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn power_units() {
        assert_relative_eq!(parse_power("30 dBm").unwrap(), 1.0);
        assert_relative_eq!(parse_power("0.251 W").unwrap(), 0.251);
        assert_relative_eq!(parse_power("5mW").unwrap(), 5e-3);
        assert_relative_eq!(parse_power("-114 dBm").unwrap(), 3.981e-15, max_relative = 1e-3);
        assert_relative_eq!(parse_power("1e-3 W").unwrap(), 1e-3);
        assert!(parse_power("24").is_err());
        assert!(parse_power("24 dB").is_err());
    }

    #[test]
    fn empty_file_is_reference_layout() {
        let c: ConfigFile = "".parse().unwrap();
        assert_eq!(c.system, default_topology());
        let c: ConfigFile = "preset = \"ee\"".parse().unwrap();
        assert_eq!(c.system.elements, 500);
    }

    #[test]
    fn overrides_apply() {
        let c: ConfigFile = r#"
            elements = 64
            p_max = "20 dBm"
            r_min_c = 1.0
            rician_k = "inf"
            cus = [[10, 10], [20, 20], [30, 35]]
            [sweep]
            axis = "m"
        "#
        .parse()
        .unwrap();
        assert_eq!(c.system.elements, 64);
        assert_eq!(c.system.cu_count, 3);
        assert_relative_eq!(c.system.p_max_c, 0.1, max_relative = 1e-12);
        assert_relative_eq!(c.system.gamma_min_c, 1.0);
        assert!(c.system.rician.k3.is_infinite());
        assert_eq!(c.sweep["axis"].as_str(), Some("m"));
    }

    #[test]
    fn rejects_unknown_and_unitless() {
        assert!("elementz = 3".parse::<ConfigFile>().is_err());
        assert!("p_max_d = 24".parse::<ConfigFile>().is_err());
        assert!("d2d_count = 9".parse::<ConfigFile>().is_err());
    }

    #[test]
    fn cu_count_pulls_reference_positions() {
        let c: ConfigFile = "cu_count = 6".parse().unwrap();
        assert_eq!(c.system.cus.len(), 6);
    }
}
