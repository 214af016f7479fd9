//! Regenerates `fixtures/` from the reference platform:
//! `cargo run --example make_fixtures`.

use std::fs;
use std::path::Path;

use ptx_twin::aas::{serialize_shell, AdministrationShell};
use ptx_twin::demo;
use ptx_twin::ingest::AasxPackage;

fn write(path: &Path, contents: &[u8]) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, contents).unwrap();
    println!("{}", path.display());
}

fn write_shells(dir: &Path, shells: &[AdministrationShell], aasx: &str) {
    for shell in shells {
        write(
            &dir.join("shells").join(format!("{}.json", shell.id)),
            serialize_shell(shell).as_bytes(),
        );
    }
    let package = AasxPackage::from_shells(shells).unwrap();
    write(&dir.join(aasx), &package.to_bytes());
}

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    write_shells(&root, &demo::platform_shells(), "platform.aasx");
    write_shells(
        &root.join("alt"),
        &demo::platform_shells_with_alternative(),
        "platform_alt.aasx",
    );
    let sequence = serde_json::to_string_pretty(&demo::sequence()).unwrap() + "\n";
    write(&root.join("sequence.json"), sequence.as_bytes());
    write(&root.join("units.json"), demo::UNIT_EXTENSIONS.as_bytes());
    for (name, scenario) in [
        ("drift", demo::drift_scenario()),
        ("small_drift", demo::small_drift_scenario()),
        ("jump", demo::jump_scenario()),
    ] {
        write(
            &root.join("scenarios").join(format!("{name}.json")),
            scenario.to_json().as_bytes(),
        );
    }
}
