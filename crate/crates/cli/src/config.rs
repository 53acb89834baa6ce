//! Flat key-value settings assembled from a TOML file and command-line
//! flags (which clap also fills from `DDXY_*` environment variables).

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use ddxy::ModelParams;

use crate::error::CliError;

/// Effective settings of one run, keyed by dotted names such as `mu` or
/// `sweep.mu_steps`.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    map: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut s = Settings::default();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            s.merge_toml(&text)?;
        }
        Ok(s)
    }

    /// Nested tables are flattened: `[sweep] mu_steps = 40` and
    /// `"sweep.mu_steps" = 40` are equivalent.
    pub fn merge_toml(&mut self, text: &str) -> Result<(), CliError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e| CliError::Config(format!("config file: {e}")))?;
        flatten("", &table, &mut self.map)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.map.insert(key.to_string(), value.to_string());
    }

    /// Applies a command-line value if one was given.
    pub fn set_opt<T: ToString>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.set(key, v);
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.map
            .get(key)
            .map(|s| {
                s.trim()
                    .parse::<T>()
                    .map_err(|_| CliError::Config(format!("cannot parse {key} = {s:?}")))
            })
            .transpose()
    }

    /// Value of `key`, falling back to `default`; the resolved value is
    /// recorded so the manifest lists every setting actually used.
    pub fn resolve<T: FromStr + ToString>(&mut self, key: &str, default: T) -> Result<T, CliError> {
        match self.get(key)? {
            Some(v) => Ok(v),
            None => {
                self.set(key, default.to_string());
                Ok(default)
            }
        }
    }

    pub fn model(&mut self, defaults: &ModelParams) -> Result<ModelParams, CliError> {
        let p = ModelParams::from_flat_map(&self.map, defaults)?;
        self.set("j", p.j);
        self.set("mu", p.mu);
        self.set("omega", p.omega);
        self.set("gamma", p.gamma);
        match p.coupling {
            ddxy::CouplingSpec::NearestNeighbor1D { n, periodic } => {
                self.set("coupling.kind", "nn");
                self.set("coupling.n", n);
                self.set("coupling.periodic", periodic);
            }
            ddxy::CouplingSpec::InfiniteRange { n } => {
                self.set("coupling.kind", "infinite");
                self.set("coupling.n", n);
            }
            ddxy::CouplingSpec::MeanFieldZ { z } => {
                self.set("coupling.kind", "mfz");
                self.set("coupling.z", z);
            }
        }
        Ok(p)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.map
    }
}

fn flatten(
    prefix: &str,
    table: &toml::Table,
    out: &mut BTreeMap<String, String>,
) -> Result<(), CliError> {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out)?,
            toml::Value::String(s) => {
                out.insert(key, s.clone());
            }
            toml::Value::Integer(i) => {
                out.insert(key, i.to_string());
            }
            toml::Value::Float(f) => {
                out.insert(key, f.to_string());
            }
            toml::Value::Boolean(b) => {
                out.insert(key, b.to_string());
            }
            other => {
                return Err(CliError::Config(format!(
                    "unsupported value for {key}: {other}"
                )))
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_and_dotted_keys_agree() {
        let mut a = Settings::default();
        a.merge_toml("mu = -2.5\n[coupling]\nkind = \"nn\"\nn = 4\n")
            .unwrap();
        let mut b = Settings::default();
        b.merge_toml("mu = -2.5\n\"coupling.kind\" = \"nn\"\n\"coupling.n\" = 4\n")
            .unwrap();
        assert_eq!(a.entries(), b.entries());
        let p = a.model(&ModelParams::default()).unwrap();
        assert_eq!(
            p.coupling,
            ddxy::CouplingSpec::NearestNeighbor1D {
                n: 4,
                periodic: true
            }
        );
        assert_eq!(p.mu, -2.5);
    }

    #[test]
    fn flags_override_file() {
        let mut s = Settings::default();
        s.merge_toml("omega = 1.0").unwrap();
        s.set_opt("omega", Some(3.0));
        s.set_opt::<f64>("mu", None);
        assert_eq!(s.get::<f64>("omega").unwrap(), Some(3.0));
        assert_eq!(s.get::<f64>("mu").unwrap(), None);
    }

    #[test]
    fn bad_values_are_config_errors() {
        let mut s = Settings::default();
        assert!(matches!(s.merge_toml("mu = ["), Err(CliError::Config(_))));
        s.set("sweep.mu_steps", "many");
        assert!(matches!(
            s.resolve("sweep.mu_steps", 3usize),
            Err(CliError::Config(_))
        ));
    }
}
