//! Flat `key = value` configuration with dotted section names.
//!
//! Every key has a default in [`KEYS`]; a run's configuration is the
//! defaults, then the preset, then the config file, then `--set` flags.
//! Anything not listed in [`KEYS`] is rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::presets;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{origin}:{line}: {reason}")]
    Syntax {
        origin: String,
        line: usize,
        reason: String,
    },
    #[error("{origin}:{line}: unknown key `{key}`")]
    UnknownKey {
        origin: String,
        line: usize,
        key: String,
    },
    #[error("unknown preset `{0}` (see `presets` directory)")]
    UnknownPreset(String),
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("invalid value `{value}` for {key}: {reason}")]
    Invalid {
        key: &'static str,
        value: String,
        reason: String,
    },
}

pub struct KeySpec {
    pub key: &'static str,
    pub default: &'static str,
    pub doc: &'static str,
}

const fn key(key: &'static str, default: &'static str, doc: &'static str) -> KeySpec {
    KeySpec { key, default, doc }
}

/// All recognised keys, in sidecar order.
pub const KEYS: &[KeySpec] = &[
    key("threads", "0", "worker threads; 0 picks the core count"),
    key("seed", "1", "seed for noise initial conditions"),
    key("output.name", "", "basename of output files; empty uses the command name"),
    key("grid.a", "0.5", "Euclidean radius of the simulated ball"),
    key("grid.n", "40", "radial intervals N"),
    key("grid.m", "40", "angular intervals M"),
    key("grid.angular_rule", "verbatim", "verbatim | periodic"),
    key("grid.matrix_cap", "120000000", "largest allowed kernel-matrix entry count"),
    key("kernel.family", "exponential", "exponential | gabor | gabor_b2 | dog | mexican_hat_3d | zero"),
    key("kernel.b", "0.2", "width of exponential and Gabor kernels"),
    key("kernel.sigma1", "0.1", "excitatory width of Gaussian-difference kernels"),
    key("kernel.sigma2", "0.2", "inhibitory width of Gaussian-difference kernels"),
    key("kernel.A", "1", "inhibitory weight of Gaussian-difference kernels"),
    key("model.alpha", "0.1", "decay rate"),
    key("rate.kind", "sigmoid", "sigmoid | shifted_sigmoid | heaviside"),
    key("rate.mu", "10", "sigmoid slope"),
    key("rate.kappa", "0.04", "Heaviside threshold"),
    key("input.kind", "zero", "zero | constant | gaussian | rotating"),
    key("input.i0", "0.1", "input amplitude"),
    key("input.sigma", "0.05", "input width"),
    key("input.convention", "sigma_sq", "sigma_sq (d²/σ²) | two_sigma_sq (d²/2σ²)"),
    key("input.r0", "0.4", "Euclidean radius of the rotating centre"),
    key("input.omega0", "0.01", "angular velocity of the rotating centre"),
    key("init.kind", "zero", "zero | constant | noise"),
    key("init.value", "0", "value of a constant initial condition"),
    key("init.amplitude", "0.01", "half-width of uniform noise"),
    key("time.t_end", "2500", "final time"),
    key("time.snapshots", "", "comma-separated output times; empty gives 0, T/4, T/2, 3T/4, T"),
    key("ode.rtol", "1e-6", "relative tolerance"),
    key("ode.atol", "1e-8", "absolute tolerance"),
    key("ode.h_max", "inf", "largest step"),
    key("ode.fixed_step", "0", "fixed step size; 0 selects adaptive stepping"),
    key("ode.max_steps", "10000000", "step budget"),
    key("ode.check_bounds", "true", "fail when a snapshot leaves the a-priori norm envelope"),
    key("stationary.tol", "1e-10", "residual tolerance of the fixed-point iteration"),
    key("stationary.max_iter", "100000", "iteration budget"),
    key("homogeneous.wbar", "auto", "kernel mass; auto integrates the kernel over the disk"),
    key("homogeneous.v0", "0", "initial value"),
    key("homogeneous.samples", "101", "output times on [0, T] when time.snapshots is empty"),
    key("bump.amplitudes", "", "comma-separated input amplitudes for bump-curve; empty uses input.i0"),
    key("bump.omega_min", "0.001", "lower end of the pulse-width scan"),
    key("bump.omega_max", "3", "upper end of the pulse-width scan"),
    key("bump.scan_samples", "600", "scan samples before bisection"),
    key("bump.curve_points", "300", "pulse widths sampled by bump-curve"),
    key("bump.omega", "auto", "root to use: auto takes the smallest, a number takes the nearest"),
    key("bump.n_max", "16", "highest stability mode"),
    key("bump.lambda_max", "200", "spectral cut-off"),
    key("bump.lambda_nodes", "2000", "spectral quadrature nodes"),
];

pub fn spec_for(name: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.key == name)
}

/// One assignment with its source position.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_text(text: &str, origin: &str) -> Result<Vec<Assignment>, ConfigError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        out.push(parse_assignment(body, origin, line)?);
    }
    Ok(out)
}

fn parse_assignment(body: &str, origin: &str, line: usize) -> Result<Assignment, ConfigError> {
    let Some((k, v)) = body.split_once('=') else {
        return Err(ConfigError::Syntax {
            origin: origin.to_string(),
            line,
            reason: format!("expected `key = value`, found `{body}`"),
        });
    };
    let k = k.trim();
    if k.is_empty() {
        return Err(ConfigError::Syntax {
            origin: origin.to_string(),
            line,
            reason: "empty key".into(),
        });
    }
    if spec_for(k).is_none() {
        return Err(ConfigError::UnknownKey {
            origin: origin.to_string(),
            line,
            key: k.to_string(),
        });
    }
    Ok(Assignment {
        key: k.to_string(),
        value: v.trim().to_string(),
        line,
    })
}

/// The fully materialised key table of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<&'static str, String>,
    explicit: Vec<&'static str>,
    preset: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            values: KEYS.iter().map(|k| (k.key, k.default.to_string())).collect(),
            explicit: Vec::new(),
            preset: None,
        }
    }
}

/// Sources of a run configuration, applied in field order.
#[derive(Debug, Clone, Default)]
pub struct Sources<'a> {
    pub preset: Option<&'a str>,
    pub config: Option<&'a Path>,
    pub overrides: &'a [String],
    /// Fallback for `threads` when no source sets it.
    pub threads_env: Option<String>,
}

impl RunConfig {
    pub fn load(src: &Sources<'_>) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        if let Some(name) = src.preset {
            let text =
                presets::lookup(name).ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))?;
            cfg.apply(parse_text(text, &format!("preset {name}"))?);
            cfg.preset = Some(name.to_string());
        }
        if let Some(path) = src.config {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?;
            cfg.apply(parse_text(&text, &path.display().to_string())?);
        }
        for (n, s) in src.overrides.iter().enumerate() {
            let a = parse_assignment(s.trim(), "--set", n + 1)?;
            cfg.apply(vec![a]);
        }
        if !cfg.explicit.contains(&"threads") {
            if let Some(env) = &src.threads_env {
                cfg.values.insert("threads", env.trim().to_string());
            }
        }
        cfg.check_types()?;
        Ok(cfg)
    }

    fn apply(&mut self, assignments: Vec<Assignment>) {
        for a in assignments {
            let spec = spec_for(&a.key).expect("keys are checked while parsing");
            self.values.insert(spec.key, a.value);
            if !self.explicit.contains(&spec.key) {
                self.explicit.push(spec.key);
            }
        }
    }

    pub fn preset(&self) -> Option<&str> {
        self.preset.as_deref()
    }

    pub fn raw(&self, key: &'static str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("unregistered key {key}"))
    }

    /// `(key, value)` for every key, in table order.
    pub fn entries(&self) -> Vec<(String, String)> {
        KEYS.iter()
            .map(|k| (k.key.to_string(), self.raw(k.key).to_string()))
            .collect()
    }

    /// Renders the table in the config grammar so it can be fed back with
    /// `--config`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            s.push_str(&k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        }
        s
    }

    /// Rejects values of the wrong type up front, whichever command runs.
    fn check_types(&self) -> Result<(), ConfigError> {
        for k in KEYS {
            match k.key {
                "output.name" => {
                    let v = self.raw(k.key);
                    if v.contains(['/', '\\']) {
                        return Err(invalid(k.key, v, "must be a plain file name"));
                    }
                }
                "grid.angular_rule" => {
                    self.choice(k.key, &["verbatim", "periodic"])?;
                }
                "kernel.family" => {
                    self.choice(
                        k.key,
                        &["exponential", "gabor", "gabor_b2", "dog", "diff_gaussians", "mexican_hat_3d", "zero"],
                    )?;
                }
                "rate.kind" => {
                    self.choice(k.key, &["sigmoid", "shifted_sigmoid", "heaviside"])?;
                }
                "input.kind" => {
                    self.choice(k.key, &["zero", "constant", "gaussian", "rotating"])?;
                }
                "input.convention" => {
                    self.choice(k.key, &["sigma_sq", "two_sigma_sq"])?;
                }
                "init.kind" => {
                    self.choice(k.key, &["zero", "constant", "noise"])?;
                }
                "threads" | "grid.n" | "grid.m" | "grid.matrix_cap" | "ode.max_steps"
                | "stationary.max_iter" | "homogeneous.samples" | "bump.scan_samples"
                | "bump.curve_points" | "bump.n_max" | "bump.lambda_nodes" => {
                    self.get::<usize>(k.key)?;
                }
                "seed" => {
                    self.get::<u64>(k.key)?;
                }
                "ode.check_bounds" => {
                    self.get::<bool>(k.key)?;
                }
                "time.snapshots" | "bump.amplitudes" => {
                    self.list(k.key)?;
                }
                "homogeneous.wbar" | "bump.omega" => {
                    self.auto_f64(k.key)?;
                }
                _ => {
                    self.f64(k.key)?;
                }
            }
        }
        Ok(())
    }

    pub fn get<T: FromStr>(&self, key: &'static str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let v = self.raw(key);
        v.parse::<T>().map_err(|e| invalid(key, v, &e.to_string()))
    }

    /// A float, rejecting NaN. `inf` is accepted.
    pub fn f64(&self, key: &'static str) -> Result<f64, ConfigError> {
        let x: f64 = self.get(key)?;
        if x.is_nan() {
            return Err(invalid(key, self.raw(key), "not a number"));
        }
        Ok(x)
    }

    pub fn positive(&self, key: &'static str) -> Result<f64, ConfigError> {
        let x = self.f64(key)?;
        if x > 0.0 && x.is_finite() {
            Ok(x)
        } else {
            Err(invalid(key, self.raw(key), "must be finite and > 0"))
        }
    }

    /// `None` for `auto`.
    pub fn auto_f64(&self, key: &'static str) -> Result<Option<f64>, ConfigError> {
        if self.raw(key) == "auto" {
            Ok(None)
        } else {
            self.f64(key).map(Some)
        }
    }

    /// Comma-separated floats; empty means an empty list.
    pub fn list(&self, key: &'static str) -> Result<Vec<f64>, ConfigError> {
        let v = self.raw(key);
        if v.trim().is_empty() {
            return Ok(Vec::new());
        }
        v.split(',')
            .map(|p| {
                let p = p.trim();
                match p.parse::<f64>() {
                    Ok(x) if x.is_finite() => Ok(x),
                    _ => Err(invalid(key, v, &format!("`{p}` is not a finite number"))),
                }
            })
            .collect()
    }

    pub fn choice(&self, key: &'static str, options: &[&str]) -> Result<&str, ConfigError> {
        let v = self.raw(key);
        if options.contains(&v) {
            Ok(v)
        } else {
            Err(invalid(key, v, &format!("expected one of {}", options.join(", "))))
        }
    }
}

pub fn invalid(key: &'static str, value: &str, reason: &str) -> ConfigError {
    ConfigError::Invalid {
        key,
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar() {
        let a = parse_text("# c\n\nkernel.b = 0.3  # note\nseed=4\n", "f").unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!((a[0].key.as_str(), a[0].value.as_str(), a[0].line), ("kernel.b", "0.3", 3));
        assert_eq!(a[1].value, "4");
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse_text("seed = 1\nnot an assignment\n", "f") {
            Err(ConfigError::Syntax { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_text("\n\nkernel.width = 3\n", "f") {
            Err(ConfigError::UnknownKey { line: 3, key, .. }) => assert_eq!(key, "kernel.width"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn keys_are_unique_and_defaults_typecheck() {
        for (i, a) in KEYS.iter().enumerate() {
            assert!(KEYS[i + 1..].iter().all(|b| b.key != a.key), "{}", a.key);
            assert!(!a.doc.is_empty());
        }
        RunConfig::default().check_types().unwrap();
    }

    #[test]
    fn overrides_and_threads_fallback() {
        let sets = vec!["kernel.b=0.3".to_string()];
        let cfg = RunConfig::load(&Sources {
            preset: Some("fig3c"),
            overrides: &sets,
            threads_env: Some("3".into()),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(cfg.raw("kernel.b"), "0.3");
        assert_eq!(cfg.raw("threads"), "3");
        let sets = vec!["threads=2".to_string()];
        let cfg = RunConfig::load(&Sources {
            overrides: &sets,
            threads_env: Some("3".into()),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(cfg.raw("threads"), "2");
    }

    #[test]
    fn type_errors_name_the_key() {
        let sets = vec!["grid.n=forty".to_string()];
        let err = RunConfig::load(&Sources {
            overrides: &sets,
            ..Default::default()
        })
        .unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { key: "grid.n", .. }), "{err}");
        let sets = vec!["time.snapshots=1,x".to_string()];
        assert!(RunConfig::load(&Sources {
            overrides: &sets,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn text_round_trips() {
        let cfg = RunConfig::load(&Sources {
            preset: Some("fig4"),
            ..Default::default()
        })
        .unwrap();
        let mut again = RunConfig::default();
        again.apply(parse_text(&cfg.to_text(), "meta").unwrap());
        assert_eq!(again.entries(), cfg.entries());
    }
}
