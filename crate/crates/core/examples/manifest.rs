//! Run the bundled nine-panel manifest at a reduced trial count.

use elastic_fidelity::config::Manifest;

fn main() {
    let trials = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let m = Manifest::fig2_ci().with_trials(trials);
    let out = std::env::temp_dir().join("efid-manifest-example");
    let written = m.execute(&out, None, |stem| eprintln!("ran {stem}")).unwrap();
    println!("{} CSV, {} SVG in {}", written.csv.len(), written.svg.len(), out.display());
}
