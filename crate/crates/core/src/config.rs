//! Run configuration: a JSON document naming a command, the graph and the
//! numeric knobs.
//!
//! Potentials may be given in the canonical on-disk form or in one of three
//! shorthand forms:
//!
//! ```json
//! {"constant": 1.0}
//! {"sine": [0.5, 0.0, -0.2]}        // Σ b_n sin n(π - t)
//! {"cosine": [1.0, 0.3]}            // Σ c_n cos n t, n from 0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::fd::{MAX_COUNT, MIN_N};
use crate::inverse::InverseConfig;
use crate::potential::{Alpha, EdgeSpec, GraphSpec, PotentialFn};

pub const DEFAULT_M: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Forward,
    Charfn,
    Kernels,
    Invert,
    Roundtrip,
    Oracle,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: Command,
    graph: Option<Value>,
    known_edges: Option<Value>,
    frozen_args: Option<Vec<f64>>,
    eigenvalues: Option<PathBuf>,
    #[serde(rename = "M")]
    m: Option<usize>,
    k_max: Option<usize>,
    rho_max: Option<f64>,
    rho_min: Option<f64>,
    samples: Option<usize>,
    step: Option<f64>,
    #[serde(rename = "fd_N")]
    fd_n: Option<usize>,
    fd_count: Option<usize>,
    fd_tol: Option<f64>,
    inverse: Option<InverseConfig>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub graph: Option<GraphSpec>,
    /// Known edges and `F_p` for `invert`; taken from `graph` when present.
    pub known_edges: Vec<EdgeSpec>,
    pub frozen_args: Vec<f64>,
    /// CSV with columns `k, j, mu`.
    pub eigenvalues: Option<PathBuf>,
    /// Grid size used for shorthand potentials.
    pub m: usize,
    pub k_max: Option<usize>,
    pub rho_max: Option<f64>,
    pub rho_min: f64,
    pub samples: usize,
    pub step: Option<f64>,
    pub fd_n: usize,
    pub fd_count: usize,
    pub fd_tol: f64,
    pub inverse: InverseConfig,
}

fn range_err(key: &str, msg: impl Into<String>) -> Error {
    Error::input(key, msg)
}

/// Parses a config; relative paths are left as given.
pub fn parse_config(document: &str) -> Result<RunConfig> {
    parse_config_in(document, None)
}

/// Reads a config file; relative paths inside it resolve against its directory.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_in(&text, path.parent())
}

fn resolve(base: Option<&Path>, p: &Path) -> PathBuf {
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p.to_path_buf(),
    }
}

fn parse_config_in(document: &str, base: Option<&Path>) -> Result<RunConfig> {
    let raw: RawConfig = serde_json::from_str(document).map_err(json_error)?;
    let m = raw.m.unwrap_or(DEFAULT_M);
    if m < 64 {
        return Err(range_err("M", format!("M must be >= 64, got {m}")));
    }

    let graph = match &raw.graph {
        None => None,
        Some(Value::String(p)) => {
            let path = resolve(base, Path::new(p));
            let text = std::fs::read_to_string(&path)?;
            let v: Value = serde_json::from_str(&text).map_err(json_error)?;
            Some(parse_graph(&v, m)?)
        }
        Some(v) => Some(parse_graph(v, m)?),
    };

    let (known_edges, frozen_args) = match (&graph, &raw.known_edges) {
        (Some(_), Some(_)) => {
            return Err(range_err("known_edges", "give either `graph` or `known_edges`, not both"));
        }
        (Some(g), None) => {
            if raw.frozen_args.is_some() {
                return Err(range_err("frozen_args", "with `graph`, F_p comes from the last edge"));
            }
            (g.known_edges().to_vec(), g.unknown_edge().frozen_args.clone())
        }
        (None, Some(v)) => {
            let arr = v
                .as_array()
                .ok_or_else(|| range_err("known_edges", "expected an array of edges"))?;
            let edges = arr
                .iter()
                .enumerate()
                .map(|(i, e)| parse_edge(e, m, &format!("known_edges[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            (edges, raw.frozen_args.clone().unwrap_or_default())
        }
        (None, None) => (Vec::new(), raw.frozen_args.clone().unwrap_or_default()),
    };

    let cfg = RunConfig {
        command: raw.command,
        graph,
        known_edges,
        frozen_args,
        eigenvalues: raw.eigenvalues.map(|p| resolve(base, &p)),
        m,
        k_max: raw.k_max,
        rho_max: raw.rho_max,
        rho_min: raw.rho_min.unwrap_or(crate::spectrum::SCAN_START),
        samples: raw.samples.unwrap_or(1000),
        step: raw.step,
        fd_n: raw.fd_n.unwrap_or(2000),
        fd_count: raw.fd_count.unwrap_or(8),
        fd_tol: raw.fd_tol.unwrap_or(2e-3),
        inverse: raw.inverse.unwrap_or_default(),
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn json_error(e: serde_json::Error) -> Error {
    // serde reports unknown keys and type mismatches with the key name
    Error::input("config", e.to_string())
}

fn validate(cfg: &RunConfig) -> Result<()> {
    if let Some(step) = cfg.step {
        if !(step > 0.0 && step <= 0.01) {
            return Err(range_err("step", format!("step must lie in (0, 0.01], got {step}")));
        }
    }
    if let Some(r) = cfg.rho_max {
        if !(r.is_finite() && r > cfg.rho_min) {
            return Err(range_err("rho_max", format!("rho_max must exceed rho_min = {}, got {r}", cfg.rho_min)));
        }
    }
    if !(cfg.rho_min > 0.0) {
        return Err(range_err("rho_min", "rho_min must be positive"));
    }
    if cfg.k_max == Some(0) {
        return Err(range_err("k_max", "k_max must be >= 1"));
    }
    let inv = &cfg.inverse;
    if inv.m < 64 {
        return Err(range_err("inverse.M", format!("M must be >= 64, got {}", inv.m)));
    }
    for (key, v) in [("inverse.tau_i", inv.tau_i), ("inverse.tau_g", inv.tau_g)] {
        if !(v >= 0.0) {
            return Err(range_err(key, format!("must be >= 0, got {v}")));
        }
    }
    if let Some(t) = inv.tau_sin {
        if !(t >= 0.0) {
            return Err(range_err("inverse.tau_sin", format!("must be >= 0, got {t}")));
        }
    }
    let need_graph = |what: &str| -> Result<()> {
        if cfg.graph.is_none() {
            return Err(range_err("graph", format!("`{what}` needs a graph")));
        }
        Ok(())
    };
    match cfg.command {
        Command::Forward => {
            need_graph("forward")?;
            if cfg.k_max.is_none() && cfg.rho_max.is_none() {
                return Err(range_err("rho_max", "`forward` needs rho_max or k_max"));
            }
        }
        Command::Charfn => {
            need_graph("charfn")?;
            if cfg.rho_max.is_none() {
                return Err(range_err("rho_max", "`charfn` needs rho_max"));
            }
            if cfg.samples < 2 {
                return Err(range_err("samples", format!("samples must be >= 2, got {}", cfg.samples)));
            }
        }
        Command::Kernels => {
            need_graph("kernels")?;
            if cfg.frozen_args.is_empty() {
                return Err(range_err("graph", "the last edge needs frozen arguments for `kernels`"));
            }
        }
        Command::Invert => {
            if cfg.known_edges.is_empty() {
                return Err(range_err("known_edges", "`invert` needs known edges (or a graph)"));
            }
            if cfg.frozen_args.is_empty() {
                return Err(range_err("frozen_args", "`invert` needs a nonempty F_p"));
            }
            if cfg.eigenvalues.is_none() {
                return Err(range_err("eigenvalues", "`invert` needs an eigenvalue CSV"));
            }
        }
        Command::Roundtrip => {
            need_graph("roundtrip")?;
            if cfg.frozen_args.is_empty() {
                return Err(range_err("graph", "the last edge needs frozen arguments for `roundtrip`"));
            }
        }
        Command::Oracle => {
            need_graph("oracle")?;
            if cfg.fd_n < MIN_N {
                return Err(range_err("fd_N", format!("fd_N must be >= {MIN_N}, got {}", cfg.fd_n)));
            }
            if cfg.fd_count == 0 || cfg.fd_count > MAX_COUNT {
                return Err(range_err("fd_count", format!("fd_count must lie in 1..={MAX_COUNT}")));
            }
            if !(cfg.fd_tol > 0.0) {
                return Err(range_err("fd_tol", "fd_tol must be positive"));
            }
        }
    }
    Ok(())
}

fn object<'a>(v: &'a Value, key: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| range_err(key, "expected a JSON object"))
}

fn reject_unknown(obj: &Map<String, Value>, allowed: &[&str], key: &str) -> Result<()> {
    for k in obj.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(range_err(
                &format!("{key}.{k}"),
                format!("unknown key; expected one of {allowed:?}"),
            ));
        }
    }
    Ok(())
}

fn number_list(v: &Value, key: &str) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| range_err(key, "expected an array of numbers"))?
        .iter()
        .enumerate()
        .map(|(i, x)| {
            x.as_f64()
                .ok_or_else(|| range_err(&format!("{key}[{i}]"), "expected a number"))
        })
        .collect()
}

/// Parses `{"edges": [...]}`.
pub fn parse_graph(v: &Value, m: usize) -> Result<GraphSpec> {
    let obj = object(v, "graph")?;
    reject_unknown(obj, &["edges"], "graph")?;
    let edges = obj
        .get("edges")
        .and_then(Value::as_array)
        .ok_or_else(|| range_err("graph.edges", "expected an array of edges"))?
        .iter()
        .enumerate()
        .map(|(i, e)| parse_edge(e, m, &format!("graph.edges[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    GraphSpec::new(edges).map_err(|e| match e {
        Error::Input { key, message } => Error::input(format!("graph.{key}"), message),
        other => other,
    })
}

fn parse_edge(v: &Value, m: usize, key: &str) -> Result<EdgeSpec> {
    let obj = object(v, key)?;
    reject_unknown(obj, &["q", "frozen_args", "alpha"], key)?;
    let q = parse_potential(
        obj.get("q").ok_or_else(|| range_err(&format!("{key}.q"), "missing potential"))?,
        m,
        &format!("{key}.q"),
    )?;
    let args = match obj.get("frozen_args") {
        Some(a) => number_list(a, &format!("{key}.frozen_args"))?,
        None => Vec::new(),
    };
    let alpha = match obj.get("alpha").map(Value::as_u64) {
        None | Some(Some(0)) => Alpha::Dirichlet,
        Some(Some(1)) => Alpha::Neumann,
        Some(_) => return Err(range_err(&format!("{key}.alpha"), "alpha must be 0 or 1")),
    };
    EdgeSpec::new(q, args, alpha).map_err(|e| match e {
        Error::Input { key: k, message } => Error::input(format!("{key}.{k}"), message),
        other => other,
    })
}

/// Canonical record or one of the shorthand forms.
pub fn parse_potential(v: &Value, m: usize, key: &str) -> Result<PotentialFn> {
    let obj = object(v, key)?;
    if obj.contains_key("grid") {
        return serde_json::from_value(v.clone())
            .map_err(|e| range_err(key, e.to_string()));
    }
    reject_unknown(obj, &["constant", "sine", "cosine", "M"], key)?;
    let m = match obj.get("M") {
        Some(x) => x
            .as_u64()
            .ok_or_else(|| range_err(&format!("{key}.M"), "expected an integer >= 64"))? as usize,
        None => m,
    };
    let forms = ["constant", "sine", "cosine"]
        .iter()
        .filter(|k| obj.contains_key(**k))
        .count();
    if forms != 1 {
        return Err(range_err(key, "give exactly one of `grid`, `constant`, `sine`, `cosine`"));
    }
    let q = if let Some(c) = obj.get("constant") {
        let c = c
            .as_f64()
            .ok_or_else(|| range_err(&format!("{key}.constant"), "expected a number"))?;
        PotentialFn::constant(m, c)
    } else if let Some(s) = obj.get("sine") {
        PotentialFn::from_sine_amplitudes(number_list(s, &format!("{key}.sine"))?, m)
    } else {
        let c = number_list(&obj["cosine"], &format!("{key}.cosine"))?;
        PotentialFn::from_fn(m, |t| {
            c.iter()
                .enumerate()
                .map(|(n, cn)| cn * (n as f64 * t).cos())
                .sum()
        })
    };
    q.map_err(|e| match e {
        Error::Input { key: k, message } => Error::input(format!("{key}.{k}"), message),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const ZERO2: &str = r#"{"edges": [{"q": {"constant": 0}}, {"q": {"constant": 0}}]}"#;

    #[test]
    fn minimal_forward_config_gets_defaults() {
        let cfg = parse_config(&format!(r#"{{"command": "forward", "graph": {ZERO2}, "rho_max": 3.2}}"#)).unwrap();
        assert_eq!(cfg.command, Command::Forward);
        assert_eq!(cfg.m, DEFAULT_M);
        assert_eq!(cfg.graph.as_ref().unwrap().p(), 2);
        assert_eq!(cfg.step, None);
        assert_eq!(cfg.fd_n, 2000);
        assert_eq!(cfg.inverse, InverseConfig::default());
    }

    #[test]
    fn frozen_argument_at_pi_is_rejected() {
        let doc = format!(
            r#"{{"command": "forward", "rho_max": 3, "graph": {{"edges": [{{"q": {{"constant": 1}}, "frozen_args": [{PI}]}}, {{"q": {{"constant": 0}}}}]}}}}"#
        );
        let err = parse_config(&doc).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("frozen argument must lie in open (0,π)"), "{msg}");
        assert!(msg.contains("graph.edges[0].frozen_args[0]"), "{msg}");
    }

    #[test]
    fn single_edge_graph_is_rejected() {
        let doc = r#"{"command": "forward", "rho_max": 3, "graph": {"edges": [{"q": {"constant": 0}}]}}"#;
        let msg = parse_config(doc).unwrap_err().to_string();
        assert!(msg.contains("p >= 2"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_named() {
        let doc = format!(r#"{{"command": "forward", "graph": {ZERO2}, "rho_max": 3, "rhomax": 4}}"#);
        assert!(parse_config(&doc).unwrap_err().to_string().contains("rhomax"));
        let doc = r#"{"command": "forward", "rho_max": 3, "graph": {"edges": [{"q": {"constant": 0, "foo": 1}}, {"q": {"constant": 0}}]}}"#;
        assert!(parse_config(doc).unwrap_err().to_string().contains("graph.edges[0].q.foo"));
        let doc = format!(r#"{{"command": "roundtrip", "graph": {ZERO2}, "inverse": {{"k": 3}}}}"#);
        assert!(parse_config(&doc).is_err());
    }

    #[test]
    fn ranges_are_enforced() {
        let doc = format!(r#"{{"command": "forward", "graph": {ZERO2}, "rho_max": 3, "step": 0.02}}"#);
        assert!(parse_config(&doc).unwrap_err().to_string().contains("step"));
        let doc = format!(r#"{{"command": "oracle", "graph": {ZERO2}, "fd_N": 50}}"#);
        assert!(parse_config(&doc).unwrap_err().to_string().contains("fd_N"));
        let doc = format!(r#"{{"command": "forward", "graph": {ZERO2}}}"#);
        assert!(parse_config(&doc).is_err());
        let doc = format!(r#"{{"command": "forward", "graph": {ZERO2}, "rho_max": 3, "M": 10}}"#);
        assert!(parse_config(&doc).unwrap_err().to_string().contains("M"));
    }

    #[test]
    fn shorthand_potentials() {
        let q = parse_potential(&serde_json::json!({"sine": [1.0], "M": 128}), 64, "q").unwrap();
        assert_eq!(q.m(), 128);
        assert!((q.value_at(PI / 2.0) - 1.0).abs() < 1e-12);
        let q = parse_potential(&serde_json::json!({"cosine": [1.0, 0.5]}), 64, "q").unwrap();
        assert!((q.grid()[0] - 1.5).abs() < 1e-15);
        let canonical = serde_json::to_value(&q).unwrap();
        assert_eq!(parse_potential(&canonical, 64, "q").unwrap(), q);
        assert!(parse_potential(&serde_json::json!({"constant": 1, "sine": [1]}), 64, "q").is_err());
    }

    #[test]
    fn invert_takes_known_edges_and_args() {
        let doc = r#"{"command": "invert", "known_edges": [{"q": {"constant": 0.5}}],
                      "frozen_args": [1.0], "eigenvalues": "mu.csv"}"#;
        let cfg = parse_config(doc).unwrap();
        assert_eq!(cfg.known_edges.len(), 1);
        assert_eq!(cfg.frozen_args, vec![1.0]);
        let doc = r#"{"command": "invert", "known_edges": [{"q": {"constant": 0.5}}], "eigenvalues": "mu.csv"}"#;
        assert!(parse_config(doc).unwrap_err().to_string().contains("frozen_args"));
    }
}
