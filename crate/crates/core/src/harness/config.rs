//! Flat `key = value` configuration with typed parameters.

use std::collections::BTreeMap;

use ini::Ini;

use crate::dimension::log_grid;
use crate::error::{Error, Result};
use crate::geometry::ShapeSpec;
use crate::kernel::RadialKernel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Float,
    Int,
    /// Comma list, `a:b:logK` or `a:b:linK`.
    Grid,
    /// Like [`Kind::Grid`], rounded to strictly increasing integers.
    IntGrid,
    Shape,
    Shapes,
    Kernel,
}

#[derive(Debug, Clone, Copy)]
pub struct Param {
    pub key: &'static str,
    pub kind: Kind,
    pub default: &'static str,
    pub help: &'static str,
}

pub const fn param(key: &'static str, kind: Kind, default: &'static str, help: &'static str) -> Param {
    Param {
        key,
        kind,
        default,
        help,
    }
}

/// Parses a flat INI document. Section headers are rejected so that every
/// key lives in one namespace.
pub fn parse_ini(text: &str) -> Result<BTreeMap<String, String>> {
    let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = BTreeMap::new();
    for (section, props) in ini.iter() {
        if let Some(name) = section {
            return Err(Error::Config(format!("unexpected section [{name}]; the file is flat")));
        }
        for (k, v) in props.iter() {
            if out.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("duplicate key `{k}`")));
            }
        }
    }
    Ok(out)
}

fn bad(key: &str, value: &str, what: &str) -> Error {
    Error::Config(format!("`{key} = {value}`: expected {what}"))
}

pub fn float(key: &str, value: &str) -> Result<f64> {
    let v: f64 = value.trim().parse().map_err(|_| bad(key, value, "a number"))?;
    if !v.is_finite() {
        return Err(bad(key, value, "a finite number"));
    }
    Ok(v)
}

/// Integers may be written in float notation (`2e6`).
pub fn int(key: &str, value: &str) -> Result<u64> {
    if let Ok(v) = value.trim().parse::<u64>() {
        return Ok(v);
    }
    let f = float(key, value)?;
    if f < 0.0 || f.fract() != 0.0 || f > u64::MAX as f64 {
        return Err(bad(key, value, "a nonnegative integer"));
    }
    Ok(f as u64)
}

pub fn grid(key: &str, value: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = value.split(':').map(str::trim).collect();
    let g = if let [a, b, spec] = parts.as_slice() {
        let (a, b) = (float(key, a)?, float(key, b)?);
        let (log, k) = if let Some(k) = spec.strip_prefix("log") {
            (true, k)
        } else if let Some(k) = spec.strip_prefix("lin") {
            (false, k)
        } else {
            return Err(bad(key, value, "`a:b:logK` or `a:b:linK`"));
        };
        let k = int(key, k)? as usize;
        if k == 0 || (log && (a <= 0.0 || b <= 0.0)) {
            return Err(bad(key, value, "a nonempty grid"));
        }
        if log {
            log_grid(a, b, k)
        } else if k == 1 {
            vec![a]
        } else {
            (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()
        }
    } else {
        value
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| float(key, s))
            .collect::<Result<Vec<_>>>()?
    };
    if g.is_empty() {
        return Err(bad(key, value, "a nonempty grid"));
    }
    Ok(g)
}

pub fn int_grid(key: &str, value: &str) -> Result<Vec<usize>> {
    let g: Vec<usize> = grid(key, value)?.iter().map(|v| v.round() as usize).collect();
    if g[0] == 0 || g.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad(key, value, "strictly increasing positive integers"));
    }
    Ok(g)
}

pub fn shape(key: &str, value: &str) -> Result<ShapeSpec> {
    value.parse().map_err(|e: Error| bad(key, value, &e.to_string()))
}

pub fn shapes(key: &str, value: &str) -> Result<Vec<ShapeSpec>> {
    let v = value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| shape(key, s))
        .collect::<Result<Vec<_>>>()?;
    if v.is_empty() {
        return Err(bad(key, value, "at least one shape"));
    }
    Ok(v)
}

pub fn kernel(key: &str, value: &str) -> Result<RadialKernel> {
    value.parse().map_err(|e: Error| bad(key, value, &e.to_string()))
}

pub fn check(p: &Param, value: &str) -> Result<()> {
    match p.kind {
        Kind::Float => float(p.key, value).map(drop),
        Kind::Int => int(p.key, value).map(drop),
        Kind::Grid => grid(p.key, value).map(drop),
        Kind::IntGrid => int_grid(p.key, value).map(drop),
        Kind::Shape => shape(p.key, value).map(drop),
        Kind::Shapes => shapes(p.key, value).map(drop),
        Kind::Kernel => kernel(p.key, value).map(drop),
    }
}

/// Effective parameter values, validated against their declarations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Params(BTreeMap<String, String>);

impl Params {
    pub fn resolve(decl: &[Param], given: &BTreeMap<String, String>) -> Result<Self> {
        for k in given.keys() {
            if !decl.iter().any(|p| p.key == k) {
                let valid: Vec<&str> = decl.iter().map(|p| p.key).collect();
                return Err(Error::Config(format!(
                    "unknown key `{k}`; valid keys: {}",
                    valid.join(", ")
                )));
            }
        }
        let mut out = BTreeMap::new();
        for p in decl {
            let v = given.get(p.key).map(String::as_str).unwrap_or(p.default);
            check(p, v)?;
            out.insert(p.key.to_string(), v.to_string());
        }
        Ok(Params(out))
    }

    pub fn map(&self) -> &BTreeMap<String, String> {
        &self.0
    }

    fn raw(&self, key: &str) -> &str {
        self.0
            .get(key)
            .unwrap_or_else(|| panic!("parameter `{key}` is not declared"))
    }

    pub fn float(&self, key: &str) -> f64 {
        float(key, self.raw(key)).expect("validated")
    }

    pub fn int(&self, key: &str) -> u64 {
        int(key, self.raw(key)).expect("validated")
    }

    pub fn usize(&self, key: &str) -> usize {
        self.int(key) as usize
    }

    pub fn grid(&self, key: &str) -> Vec<f64> {
        grid(key, self.raw(key)).expect("validated")
    }

    pub fn int_grid(&self, key: &str) -> Vec<usize> {
        int_grid(key, self.raw(key)).expect("validated")
    }

    pub fn shape(&self, key: &str) -> ShapeSpec {
        shape(key, self.raw(key)).expect("validated")
    }

    pub fn shapes(&self, key: &str) -> Vec<ShapeSpec> {
        shapes(key, self.raw(key)).expect("validated")
    }

    pub fn kernel(&self, key: &str) -> RadialKernel {
        kernel(key, self.raw(key)).expect("validated")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_parse() {
        assert_eq!(grid("t", "1,2, 3").unwrap(), vec![1.0, 2.0, 3.0]);
        let g = grid("t", "0.2:0.0125:log5").unwrap();
        assert_eq!(g.len(), 5);
        assert!((g[2] - 0.05).abs() < 1e-15);
        assert_eq!(grid("t", "0:1:lin3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(int_grid("n", "1e2:1e4:log3").unwrap(), vec![100, 1000, 10000]);
        assert!(int_grid("n", "3,2").is_err());
        assert!(grid("t", "").is_err());
        assert!(grid("t", "0:1:log3").is_err());
        assert_eq!(int("s", "2e6").unwrap(), 2_000_000);
        assert!(int("s", "1.5").is_err());
    }

    #[test]
    fn flat_ini_only() {
        let m = parse_ini("experiment = remainder\n; note\nseed=3\n").unwrap();
        assert_eq!(m["seed"], "3");
        assert!(parse_ini("[x]\na=1\n").is_err());
    }

    #[test]
    fn resolve_applies_defaults_and_rejects_unknown_keys() {
        let decl = [
            param("n", Kind::Int, "5", ""),
            param("shape", Kind::Shape, "disk:0.5", ""),
        ];
        let mut given = BTreeMap::new();
        given.insert("n".to_string(), "7".to_string());
        let p = Params::resolve(&decl, &given).unwrap();
        assert_eq!(p.int("n"), 7);
        assert_eq!(p.shape("shape").to_string(), "disk:0.5");
        given.insert("m".to_string(), "1".to_string());
        let e = Params::resolve(&decl, &given).unwrap_err().to_string();
        assert!(e.contains("valid keys: n, shape"), "{e}");
        given.remove("m");
        given.insert("n".to_string(), "x".to_string());
        assert!(Params::resolve(&decl, &given).is_err());
    }
}
