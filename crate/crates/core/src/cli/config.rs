//! Parameter resolution: command-line flags override the config file, which overrides defaults.

use std::collections::BTreeMap;
use std::path::Path;

use crate::classify::Thresholds;
use crate::cli::format::fmt_g;
use crate::ensemble::EnsembleConfig;
use crate::error::{Error, Result};
use crate::model::{ChainSpec, MAX_SPINS, MIN_SPINS};

/// Every recognised key with its default, in echo order.
pub const KEYS: [(&str, &str); 14] = [
    ("n", "8"),
    ("sigma", "0"),
    ("realizations", "1000"),
    ("seed", "0"),
    ("index", "0"),
    ("rabi_mhz", "15"),
    ("lattice_constant_nm", "0.3567"),
    ("spacing_multiple", "28"),
    ("coupling_ref_khz", "70"),
    ("coupling_ref_distance_nm", "10"),
    ("min_separation_nm", "2"),
    ("entropy_threshold", "0.01"),
    ("concurrence_threshold", "0.005"),
    ("strict_path", "false"),
];

/// Fully resolved run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sizes: Vec<usize>,
    pub sigmas_nm: Vec<f64>,
    pub realizations: u64,
    pub master_seed: u64,
    /// Realization index used by the single-chain commands.
    pub index: u64,
    /// Template chain; `n_spins` and `disorder_nm` are set per cell.
    pub base: ChainSpec,
    pub thresholds: Thresholds,
}

/// Canonical key: lower case with `-` folded to `_`.
fn canonical_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

/// Reads a flat `key = value` file. Blank lines and lines starting with `#` are skipped.
pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_text(&text, &path.display().to_string())
}

pub fn parse_config_text(text: &str, origin: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                path: origin.to_string(),
                reason: format!("line {}: expected `key = value`", i + 1),
            });
        };
        let key = canonical_key(key);
        if !known(&key) {
            return Err(Error::usage(key, format!("unknown key in {origin}")));
        }
        if out.iter().any(|(k, _)| *k == key) {
            return Err(Error::usage(key, format!("given twice in {origin}")));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

/// Merges defaults, file entries and flag entries (later layers win) and validates the result.
pub fn parse_config(flags: &[(String, String)], file: Option<&Path>) -> Result<RunConfig> {
    let file_entries = match file {
        Some(p) => read_config_file(p)?,
        None => Vec::new(),
    };
    resolve(&[file_entries.as_slice(), flags])
}

/// Applies `layers` over the defaults in order.
pub fn resolve(layers: &[&[(String, String)]]) -> Result<RunConfig> {
    let mut raw: BTreeMap<&str, String> = KEYS.iter().map(|(k, v)| (*k, v.to_string())).collect();
    for layer in layers {
        for (key, value) in layer.iter() {
            let key = canonical_key(key);
            let slot = KEYS
                .iter()
                .find(|(k, _)| *k == key)
                .ok_or_else(|| Error::usage(key.clone(), "unknown key"))?;
            raw.insert(slot.0, value.clone());
        }
    }
    RunConfig::from_raw(&raw)
}

fn parse_scalar<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse::<T>()
        .map_err(|e| Error::usage(key, format!("cannot parse `{value}`: {e}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<T> = value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_scalar(key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::usage(key, "needs at least one value"));
    }
    Ok(items)
}

fn finite_at_least(key: &str, x: f64, min: f64, strict: bool) -> Result<f64> {
    let ok = x.is_finite() && if strict { x > min } else { x >= min };
    if ok {
        Ok(x)
    } else {
        let op = if strict { ">" } else { ">=" };
        Err(Error::usage(
            key,
            format!("must be finite and {op} {min}, got {x}"),
        ))
    }
}

impl RunConfig {
    fn from_raw(raw: &BTreeMap<&str, String>) -> Result<Self> {
        let get = |k: &str| raw[k].as_str();
        let f = |k: &str| parse_scalar::<f64>(k, get(k));

        let sizes: Vec<usize> = parse_list("n", get("n"))?;
        for &n in &sizes {
            if !(MIN_SPINS..=MAX_SPINS).contains(&n) {
                return Err(Error::usage(
                    "n",
                    format!("{n} is outside {MIN_SPINS}..={MAX_SPINS}"),
                ));
            }
        }
        let sigmas_nm: Vec<f64> = parse_list::<f64>("sigma", get("sigma"))?
            .into_iter()
            .map(|s| finite_at_least("sigma", s, 0.0, false).map(|s| s + 0.0))
            .collect::<Result<_>>()?;
        let realizations: u64 = parse_scalar("realizations", get("realizations"))?;
        if realizations == 0 {
            return Err(Error::usage("realizations", "must be >= 1"));
        }
        let base = ChainSpec {
            n_spins: sizes[0],
            lattice_constant_nm: f("lattice_constant_nm")?,
            spacing_multiple: parse_scalar("spacing_multiple", get("spacing_multiple"))?,
            rabi_mhz: f("rabi_mhz")?,
            coupling_ref_khz: f("coupling_ref_khz")?,
            coupling_ref_distance_nm: f("coupling_ref_distance_nm")?,
            disorder_nm: 0.0,
            min_separation_nm: f("min_separation_nm")?,
        };
        base.validate().map_err(|e| match e {
            Error::InvalidParameter { key, reason } => Error::usage(key, reason),
            other => other,
        })?;
        let thresholds = Thresholds {
            entropy: finite_at_least("entropy_threshold", f("entropy_threshold")?, 0.0, false)?,
            concurrence: finite_at_least(
                "concurrence_threshold",
                f("concurrence_threshold")?,
                0.0,
                false,
            )?,
            strict_path: parse_scalar("strict_path", get("strict_path"))?,
        };
        Ok(RunConfig {
            sizes,
            sigmas_nm,
            realizations,
            master_seed: parse_scalar("seed", get("seed"))?,
            index: parse_scalar("index", get("index"))?,
            base,
            thresholds,
        })
    }

    /// Resolved values rendered back to `key = value` form, in [`KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let list = |xs: Vec<String>| xs.join(",");
        let b = &self.base;
        vec![
            (
                "n",
                list(self.sizes.iter().map(|n| n.to_string()).collect()),
            ),
            (
                "sigma",
                list(self.sigmas_nm.iter().map(|&s| fmt_g(s)).collect()),
            ),
            ("realizations", self.realizations.to_string()),
            ("seed", self.master_seed.to_string()),
            ("index", self.index.to_string()),
            ("rabi_mhz", fmt_g(b.rabi_mhz)),
            ("lattice_constant_nm", fmt_g(b.lattice_constant_nm)),
            ("spacing_multiple", b.spacing_multiple.to_string()),
            ("coupling_ref_khz", fmt_g(b.coupling_ref_khz)),
            (
                "coupling_ref_distance_nm",
                fmt_g(b.coupling_ref_distance_nm),
            ),
            ("min_separation_nm", fmt_g(b.min_separation_nm)),
            ("entropy_threshold", fmt_g(self.thresholds.entropy)),
            ("concurrence_threshold", fmt_g(self.thresholds.concurrence)),
            ("strict_path", self.thresholds.strict_path.to_string()),
        ]
    }

    /// `key = value` lines for output headers.
    pub fn provenance_lines(&self) -> Vec<String> {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}"))
            .collect()
    }

    pub fn chain_spec(&self, n: usize, sigma_nm: f64) -> ChainSpec {
        ChainSpec {
            n_spins: n,
            disorder_nm: sigma_nm,
            ..self.base.clone()
        }
    }

    /// The single `(N, σ_p)` of a one-chain command.
    pub fn single_chain(&self) -> Result<(usize, f64)> {
        if self.sizes.len() != 1 {
            return Err(Error::usage(
                "n",
                "this command takes a single chain length",
            ));
        }
        if self.sigmas_nm.len() != 1 {
            return Err(Error::usage(
                "sigma",
                "this command takes a single disorder width",
            ));
        }
        Ok((self.sizes[0], self.sigmas_nm[0]))
    }

    pub fn ensemble_config(&self) -> EnsembleConfig {
        EnsembleConfig {
            base: self.base.clone(),
            sizes: self.sizes.clone(),
            disorder_widths: self.sigmas_nm.clone(),
            realizations: self.realizations,
            master_seed: self.master_seed,
            thresholds: self.thresholds,
        }
    }
}
