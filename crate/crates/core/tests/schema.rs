//! `summary.json` of every subcommand validates against the bundled schema.

use cartan_lab::reports::{run, Context, Subcommand};
use std::path::Path;

fn schema() -> jsonschema::JSONSchema {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas/summary.schema.json");
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::JSONSchema::compile(&doc).expect("schema compiles")
}

fn check(config: &str, cmd: Subcommand) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{config}.json"));
    let ctx = Context::load(&path, &[]).unwrap();
    let out = run(cmd, &ctx).unwrap();
    let summary: serde_json::Value = serde_json::from_slice(out.file("summary.json").unwrap()).unwrap();
    let schema = schema();
    if let Err(errors) = schema.validate(&summary) {
        let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("{config} {}: {msgs:?}", cmd.name());
    }
    assert_eq!(summary["subcommand"], cmd.name());
}

#[test]
fn full_run_summaries_validate() {
    check("cat_map", Subcommand::All);
    check("cubic_rank2", Subcommand::All);
}

#[test]
fn single_section_summaries_validate() {
    for cmd in Subcommand::SECTIONS {
        check("cat_map", cmd);
    }
}

#[test]
fn schema_rejects_malformed_summaries() {
    let schema = schema();
    let bad = serde_json::json!({"run_id": "xyz", "subcommand": "all"});
    assert!(!schema.is_valid(&bad));
}
