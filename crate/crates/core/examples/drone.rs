//! Plans the drone preset and prints the altitude profile.
//!
//! cargo run --release -p ergodic-footprint --example drone

use std::path::Path;

use ergodic_footprint::config::RunConfig;
use ergodic_footprint::optimize::solve;
use ergodic_footprint::presets;

fn main() -> ergodic_footprint::Result<()> {
    let cfg = RunConfig::from_json(presets::config("drone").expect("preset exists"))?;
    let spec = cfg.build(Path::new("."))?.spec;
    let parked = spec.objective(&vec![0.0; spec.decision_len()])?;
    let r = solve(&spec)?;
    println!("ergodicity {:.3e} (zero controls {:.3e})", r.ergodicity, parked);
    println!("violation {:.1e}, converged {}", r.violation, r.converged);
    for rec in &r.log {
        println!(
            "outer {:>2}: ergodicity {:.4e}  violation {:.1e}  mu {:.0e}  inner {}",
            rec.iteration, rec.ergodicity, rec.max_constraint_violation, rec.mu, rec.inner_iterations
        );
    }
    let heights: Vec<String> = r.trajectories[0]
        .states
        .chunks(3)
        .step_by(10)
        .map(|x| format!("{:.2}", x[2]))
        .collect();
    println!("altitude every second: {}", heights.join(" "));
    Ok(())
}
