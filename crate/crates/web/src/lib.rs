//! Browser bindings. Every export takes protocol source text and returns a
//! string (SVG or JSON); errors surface as JS exceptions.

use wasm_bindgen::prelude::*;

use cpverif::check::check_spec;
use cpverif::corpus;
use cpverif::explore::{explore, ExploreConfig};
use cpverif::export::{facts_report, to_svg};
use cpverif::tg::analyze;
use cpverif::{parse, ProtocolSpec};

fn load(src: &str) -> Result<ProtocolSpec, String> {
    parse(src).map_err(|e| format!("line {e}"))
}

pub fn graph(src: &str, reduced: bool) -> Result<String, String> {
    let spec = load(src)?;
    if spec.has_replicable() {
        return Err(format!("{} has replicable processes; use exploration instead", spec.name));
    }
    let (dp, _) = spec.single_dp();
    let a = analyze(&dp).map_err(|e| e.to_string())?;
    Ok(to_svg(if reduced { &a.reduced } else { &a.full }))
}

pub fn facts(src: &str) -> Result<String, String> {
    let spec = load(src)?;
    let (report, a) = check_spec(&spec).map_err(|e| e.to_string())?;
    let out = serde_json::json!({ "facts": facts_report(&a, &spec.name), "check": report });
    Ok(serde_json::to_string_pretty(&out).expect("serializable"))
}

pub fn run_explore(src: &str, sessions: usize, max_states: usize) -> Result<String, String> {
    let spec = load(src)?;
    let cfg = ExploreConfig {
        sessions: sessions.max(1),
        max_states,
        ..Default::default()
    };
    let (v, _) = explore(&spec, &cfg).map_err(|e| e.to_string())?;
    Ok(serde_json::to_string_pretty(&v).expect("serializable"))
}

#[wasm_bindgen]
pub fn corpus_names() -> String {
    corpus::list().join(",")
}

#[wasm_bindgen]
pub fn corpus_source(name: &str) -> Result<String, JsError> {
    corpus::source_text(name).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn transition_graph_svg(src: &str, reduced: bool) -> Result<String, JsError> {
    graph(src, reduced).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn node_facts(src: &str) -> Result<String, JsError> {
    facts(src).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn explore_protocol(src: &str, sessions: usize, max_states: usize) -> Result<String, JsError> {
    run_explore(src, sessions, max_states).map_err(|e| JsError::new(&e))
}
