use std::fs;
use std::path::Path;

use mfg_crowd::scenarios::{builtin_scenario, parse_config};

#[test]
fn shipped_files_match_builtins() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    for i in 1..=5 {
        let name = format!("test{i}");
        let text = fs::read_to_string(dir.join(format!("{name}.toml"))).unwrap();
        let parsed = parse_config(&text).unwrap();
        assert_eq!(parsed, builtin_scenario(&name).unwrap(), "{name}");
        parsed.build().unwrap();
    }
}
