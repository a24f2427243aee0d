//! Solver-vs-grid comparison harness for the power module.

use anyhow::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fdsb_core::power::{
    grid_oracle, optimize_powers, random_four_link_instance, SolverOptions,
};

pub struct OracleReport {
    pub instances: usize,
    pub worst_ratio: f64,
    pub mean_ratio: f64,
    pub below_threshold: usize,
}

/// Compares `optimize_powers` against the brute-force grid on random
/// four-link instances, printing one CSV line per instance to stdout.
pub fn run_oracle(
    instances: usize,
    grid_points: usize,
    seed: u64,
    threshold: f64,
) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = SolverOptions::default();
    let mut worst = f64::INFINITY;
    let mut sum = 0.0;
    let mut below = 0;
    println!("instance,solver_nats,grid_nats,ratio");
    for i in 0..instances {
        let problem = random_four_link_instance(&mut rng);
        let sol = optimize_powers(&problem, &opts);
        let (_, grid_val) = grid_oracle(&problem, grid_points)?;
        let ratio = sol.objective_nats / grid_val;
        println!("{i},{},{grid_val},{ratio}", sol.objective_nats);
        worst = worst.min(ratio);
        sum += ratio;
        if ratio < threshold {
            below += 1;
        }
    }
    let report = OracleReport {
        instances,
        worst_ratio: worst,
        mean_ratio: sum / instances.max(1) as f64,
        below_threshold: below,
    };
    eprintln!(
        "{} instances, worst ratio {:.4}, mean {:.4}, {} below {threshold}",
        report.instances, report.worst_ratio, report.mean_ratio, report.below_threshold
    );
    Ok(report)
}
