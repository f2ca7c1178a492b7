//! Reading an artifact directory back: manifest, summary table, graph
//! listing and scan table.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use attractor_lab::io::format_csv;
use serde_json::Value;

use crate::run::{RunError, Summary};

pub const MANIFEST: &str = "manifest.txt";
pub const MANIFEST_HEADER: &str = "# attractor-lab run manifest";

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub fields: Vec<(String, String)>,
    pub resolved: String,
    pub config: String,
}

impl Manifest {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut out = format!("{MANIFEST_HEADER}\n");
        for (k, v) in &self.fields {
            let _ = writeln!(out, "{k} = {v}");
        }
        out.push_str("[resolved]\n");
        out.push_str(&self.resolved);
        out.push_str("[config]\n");
        out.push_str(&self.config);
        if !self.config.is_empty() && !self.config.ends_with('\n') {
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        if lines.next() != Some(MANIFEST_HEADER) {
            return Err("not an attractor-lab manifest".into());
        }
        let mut fields = Vec::new();
        let mut resolved = String::new();
        let mut config = String::new();
        let mut part = 0;
        for line in lines {
            match (part, line) {
                (0, "[resolved]") => part = 1,
                (1, "[config]") => part = 2,
                (0, l) => {
                    let (k, v) = l.split_once(" = ").ok_or_else(|| format!("malformed manifest line `{l}`"))?;
                    fields.push((k.to_string(), v.to_string()));
                }
                (1, l) => {
                    resolved.push_str(l);
                    resolved.push('\n');
                }
                (_, l) => {
                    config.push_str(l);
                    config.push('\n');
                }
            }
        }
        if part < 2 {
            return Err("manifest is truncated".into());
        }
        let m = Manifest { fields, resolved, config };
        if m.get("command").is_none() || m.get("status").is_none() {
            return Err("manifest lacks command or status".into());
        }
        Ok(m)
    }
}

fn read_json(dir: &Path, name: &str) -> Result<Option<Value>, RunError> {
    let path = dir.join(name);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path)?;
    serde_json::from_str(&text).map(Some).map_err(|e| RunError::Usage(format!("{name} is corrupt: {e}")))
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn sci(x: f64) -> String {
    if x.is_nan() {
        "-".into()
    } else if x == 0.0 {
        "0".into()
    } else {
        format!("{x:.6e}")
    }
}

/// Human-readable summary plus `certificates.csv` (and `adjacency.csv`
/// for graph runs) written next to the manifest.
pub fn report(dir: &Path) -> Result<String, RunError> {
    let text = fs::read_to_string(dir.join(MANIFEST))
        .map_err(|e| RunError::Usage(format!("cannot read {}: {e}", dir.join(MANIFEST).display())))?;
    let manifest = Manifest::parse(&text).map_err(|e| RunError::Usage(format!("corrupt manifest: {e}")))?;
    let command = manifest.get("command").unwrap_or("?").to_string();
    let mut out = String::new();
    let _ = writeln!(out, "run: {command}, status {}", manifest.get("status").unwrap_or("?"));
    if let Some(w) = manifest.get("wall_time_s") {
        let _ = writeln!(out, "wall time: {w} s");
    }

    let summary: Option<Summary> = match read_json(dir, "summary.json")? {
        Some(v) => Some(serde_json::from_value(v).map_err(|e| RunError::Usage(format!("summary.json is corrupt: {e}")))?),
        None => None,
    };
    let Some(summary) = summary else {
        if let Ok(d) = fs::read_to_string(dir.join("diagnostics.txt")) {
            out.push_str("no summary; diagnostics follow\n");
            out.push_str(&d);
        } else {
            out.push_str("no summary written\n");
        }
        return Ok(out);
    };

    out.push_str("\ncertificates\n");
    let _ = writeln!(out, "  {:<22} {:<20} {:>14} {:>14}  status", "name", "constant", "value", "slack");
    let mut cert_rows = Vec::new();
    for c in &summary.certificates {
        let slack = c.slack.unwrap_or(f64::NAN);
        let _ = writeln!(
            out,
            "  {:<22} {:<20} {:>14} {:>14}  {}",
            c.name,
            c.constant,
            sci(c.value),
            sci(slack),
            if c.passed { "pass" } else { "FAIL" }
        );
        cert_rows.push(format!(
            "{},{},{},{},{}",
            c.name,
            c.constant,
            attractor_lab::io::fmt_f64(c.value),
            c.slack.map(attractor_lab::io::fmt_f64).unwrap_or_default(),
            c.passed
        ));
    }
    let failed = summary.certificates.iter().filter(|c| !c.passed).count();
    let verdict = if failed == 0 { "all certificates pass".to_string() } else { format!("{failed} certificate(s) failed") };
    let mut csv = String::from("name,constant,value,slack,passed\n");
    for r in cert_rows {
        csv.push_str(&r);
        csv.push('\n');
    }
    fs::write(dir.join("certificates.csv"), csv)?;

    if let Some(graph) = read_json(dir, "graph.json")? {
        out.push('\n');
        out.push_str(&graph_listing(dir, &graph, &summary, &verdict)?);
    } else if let Some(eq) = read_json(dir, "equilibria.json")? {
        out.push('\n');
        out.push_str(&node_listing(eq["nodes"].as_array().map(Vec::as_slice).unwrap_or(&[])));
    }
    if let Some(scan) = read_json(dir, "scan.json")? {
        out.push_str("\n  k          n_k\n");
        for r in scan["rows"].as_array().into_iter().flatten() {
            let _ = writeln!(out, "  {:<10} {}", r["k"].to_string(), r["n_k"]);
        }
    }
    if !summary.notes.is_empty() {
        out.push_str("\nnotes\n");
        for n in &summary.notes {
            let _ = writeln!(out, "  {n}");
        }
    }
    let _ = writeln!(out, "\n{verdict}");
    Ok(out)
}

fn by_energy(nodes: &[Value]) -> Vec<&Value> {
    let mut sorted: Vec<&Value> = nodes.iter().collect();
    sorted.sort_by(|a, b| num(&b["energy"]).total_cmp(&num(&a["energy"])).then(a["id"].as_u64().cmp(&b["id"].as_u64())));
    sorted
}

fn node_listing(nodes: &[Value]) -> String {
    let mut out = format!("equilibria by energy ({})\n", nodes.len());
    let _ = writeln!(out, "  {:<5} {:>14} {:>6} {:>14}", "node", "energy", "dim", "sup");
    for n in by_energy(nodes) {
        let _ = writeln!(
            out,
            "  {:<5} {:>14} {:>6} {:>14}",
            n["id"].to_string(),
            sci(num(&n["energy"])),
            n["unstable_dim"].to_string(),
            sci(num(&n["sup"]))
        );
    }
    out
}

fn graph_listing(dir: &Path, graph: &Value, summary: &Summary, verdict: &str) -> Result<String, RunError> {
    let nodes = graph["nodes"].as_array().map(Vec::as_slice).unwrap_or(&[]);
    let pairs: Vec<(u64, u64)> = graph["adjacency"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(|p| Some((p[0].as_u64()?, p[1].as_u64()?)))
        .collect();
    let mut out = node_listing(nodes);
    out.push_str("\nadjacency (source -> sinks)\n");
    for n in by_energy(nodes) {
        let id = n["id"].as_u64().unwrap_or(u64::MAX);
        let sinks: Vec<String> = pairs.iter().filter(|(s, _)| *s == id).map(|(_, t)| t.to_string()).collect();
        let _ = writeln!(out, "  {id} -> {}", if sinks.is_empty() { "-".to_string() } else { sinks.join(", ") });
    }
    let rows: Vec<Vec<f64>> = pairs
        .iter()
        .map(|(s, t)| vec![*s as f64, *t as f64, num(&nodes[*s as usize]["energy"]), num(&nodes[*t as usize]["energy"])])
        .collect();
    fs::write(dir.join("adjacency.csv"), format_csv(&["source", "sink", "source_energy", "sink_energy"], &rows))?;

    let m = summary.certificates.iter().find(|c| c.name == "linf").map(|c| c.value);
    let trivial = nodes.len() == 1
        && nodes[0]["coeffs"].as_array().is_some_and(|c| c.iter().all(|x| num(x) == 0.0));
    let set = if trivial { "{0}".to_string() } else { format!("{} equilibria joined by {} connections", nodes.len(), pairs.len()) };
    let m_text = match m {
        Some(0.0) => "0".to_string(),
        Some(v) => format!("{v:.6}"),
        None => "-".to_string(),
    };
    let _ = writeln!(out, "\nattractor = {set}; M = {m_text}; {verdict}");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let m = Manifest {
            fields: vec![("command".into(), "certify".into()), ("status".into(), "pass".into())],
            resolved: "discretization.m = 8\n".into(),
            config: "[discretization]\nm = 8".into(),
        };
        let text = m.render();
        let back = Manifest::parse(&text).unwrap();
        assert_eq!(back.get("command"), Some("certify"));
        assert_eq!(back.config, "[discretization]\nm = 8\n");
        assert!(Manifest::parse("garbage").is_err());
        assert!(Manifest::parse(&text.replace("[config]\n", "")).is_err());
    }
}
