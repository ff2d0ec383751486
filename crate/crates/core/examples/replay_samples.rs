//! Writes the benchmark samples to CSV, reads them back and checks that an
//! estimator replays the identical trajectory.

use sift_rls::harness::{
    generate_scenario, read_samples_csv, simulate, write_samples_csv, ScenarioConfig,
};
use sift_rls::{EstimatorState, SiftConfig, SiftRls};

fn main() -> sift_rls::Result<()> {
    let samples = generate_scenario(&ScenarioConfig::with_seed(5).with_horizon(301))?;
    let mut buf = Vec::new();
    write_samples_csv(&samples, &mut buf)?;
    let text = String::from_utf8_lossy(&buf);
    for line in text.lines().take(3) {
        println!("{line}");
    }
    let back = read_samples_csv(buf.as_slice())?;

    let run = |s: &[_]| {
        let mut est = SiftRls::new(EstimatorState::zeroed(4), SiftConfig::default());
        simulate(&mut est, s, None)
    };
    let a = run(&samples)?;
    let b = run(&back)?;
    println!(
        "{} samples, {} bytes, trajectories identical: {}",
        back.len(),
        buf.len(),
        a.trajectory == b.trajectory
    );
    Ok(())
}
