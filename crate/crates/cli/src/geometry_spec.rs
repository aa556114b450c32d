//! Generator spec strings: `flat:d=1,n=3,extent=10,h=0.01`,
//! `graph:amplitude=0.1,frequency=1,lip=0.1,extent=10,h=0.01,n=3`,
//! `cantor:level=6,n=3`, or a path to an atom CSV (`file.csv:d=1,n=3`).

use crate::{CliError, CliResult};
use codimlab_core::geometry::{
    make_cantor_garnett, make_flat, make_lipschitz_graph, BoundarySet, ProfileSpec,
};
use std::collections::HashMap;

fn parse_kv(body: &str) -> CliResult<HashMap<String, f64>> {
    let mut out = HashMap::new();
    for field in body.split(',') {
        let field = field.trim();
        if field.is_empty() {
            continue;
        }
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("expected key=value, got '{field}'")))?;
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|e| CliError::Config(format!("bad value for '{k}': {e}")))?;
        out.insert(k.trim().to_string(), value);
    }
    Ok(out)
}

fn get(kv: &HashMap<String, f64>, key: &str, default: Option<f64>) -> CliResult<f64> {
    kv.get(key)
        .copied()
        .or(default)
        .ok_or_else(|| CliError::Config(format!("missing required parameter '{key}'")))
}

pub fn parse_geometry(spec: &str) -> CliResult<BoundarySet> {
    if let Some((head, body)) = spec.split_once(':') {
        if head.ends_with(".csv") {
            return load_csv(head, body);
        }
        let kv = parse_kv(body)?;
        let wrap = |e: codimlab_core::geometry::GeometryError| CliError::Config(e.to_string());
        return match head {
            "flat" => make_flat(
                get(&kv, "d", Some(1.0))? as usize,
                get(&kv, "n", Some(3.0))? as usize,
                get(&kv, "extent", None)?,
                get(&kv, "h", None)?,
            )
            .map_err(wrap),
            "graph" | "sine" => {
                let amplitude = get(&kv, "amplitude", Some(0.1))?;
                let frequency = get(&kv, "frequency", Some(1.0))?;
                let lip = get(&kv, "lip", Some((amplitude * frequency).abs()))?;
                make_lipschitz_graph(
                    get(&kv, "n", Some(3.0))? as usize,
                    if amplitude == 0.0 {
                        ProfileSpec::Zero
                    } else {
                        ProfileSpec::Sine { amplitude, frequency }
                    },
                    lip,
                    get(&kv, "extent", None)?,
                    get(&kv, "h", None)?,
                )
                .map_err(wrap)
            }
            "cantor" => make_cantor_garnett(
                get(&kv, "level", None)? as u32,
                get(&kv, "n", Some(3.0))? as usize,
                get(&kv, "scale", Some(0.25))?,
            )
            .map_err(wrap),
            other => Err(CliError::Config(format!(
                "unknown generator '{other}' (expected flat, graph, cantor, or a .csv path)"
            ))),
        };
    }
    if spec.ends_with(".csv") {
        return load_csv(spec, "");
    }
    Err(CliError::Config(format!(
        "cannot parse geometry spec '{spec}'; try e.g. flat:d=1,n=3,extent=10,h=0.01"
    )))
}

fn load_csv(path: &str, body: &str) -> CliResult<BoundarySet> {
    let kv = parse_kv(body)?;
    let d = get(&kv, "d", Some(1.0))? as usize;
    let n = get(&kv, "n", Some(3.0))? as usize;
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Config(format!("cannot open '{path}': {e}")))?;
    BoundarySet::read_csv(std::io::BufReader::new(file), d, n, path)
        .map_err(|e| CliError::Config(e.to_string()))
}

/// Parses "x,y,z" (n comma-separated coordinates).
pub fn parse_point(s: &str, n: usize) -> CliResult<Vec<f64>> {
    let coords: Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    let coords = coords.map_err(|e| CliError::Config(format!("bad point '{s}': {e}")))?;
    if coords.len() != n {
        return Err(CliError::Config(format!(
            "point '{s}' has {} coordinates, expected {n}",
            coords.len()
        )));
    }
    Ok(coords)
}

/// Parses "x,y,z,r" into a center and radius.
pub fn parse_ball(s: &str, n: usize) -> CliResult<(Vec<f64>, f64)> {
    let mut coords = parse_point(s, n + 1)?;
    let r = coords.pop().unwrap();
    if !(r > 0.0) {
        return Err(CliError::Config(format!("ball '{s}' has nonpositive radius")));
    }
    Ok((coords, r))
}
