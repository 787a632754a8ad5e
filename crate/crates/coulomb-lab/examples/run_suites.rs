//! Run a few named suites from an inline configuration, as the CLI does.

use coulomb_lab::config::RunConfig;
use coulomb_lab::suites::{run_suites, Mode};

fn main() -> coulomb_lab::Result<()> {
    let cfg = RunConfig::from_toml(
        r#"
seed = 11
resolutions = [[8, 17], [8, 33]]
suites = ["lemma-stokes", "lemma-bct", "prop-spprop"]

[metric]
family = "warped"
phi = [0.0, 1.0]
"#,
    )?;
    let (reports, _) = run_suites(&cfg, Mode::Verify);
    for r in &reports {
        println!("{} {}", if r.passed { "PASS" } else { "FAIL" }, r.name);
        for c in &r.checks {
            println!("  {:<40} {:.3e}", c.id, c.value);
        }
    }
    Ok(())
}
