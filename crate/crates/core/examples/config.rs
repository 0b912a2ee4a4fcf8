//! Layering a partial TOML file over a preset, and what a bad file reports.

use dpcp::config::{parse_config, Preset};

const GOOD: &str = r#"
[geometry]
nx = 48
ny = 48

[microstructure]
d_ferrite = 7.5
"#;

const BAD: &str = r#"
[microstructure]
martensite_fraction = 1.5
grain = 3

[loading]
time_step = "fast"
"#;

fn main() {
    let config = parse_config(GOOD, Some(Preset::Desk)).expect("valid config");
    println!("{}", config.dump());
    println!("hash {}", config.hash());
    match parse_config(BAD, None) {
        Ok(_) => unreachable!(),
        Err(e) => println!("rejected: {e}"),
    }
}
