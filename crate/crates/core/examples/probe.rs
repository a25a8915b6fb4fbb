//! Scratch probe: NLOS experiment RMSE vs robust-estimator iteration budget.

use twtoa_core::bench::{run_experiment, ExperimentSpec, Method};
use twtoa_core::sim::NlosConfig;

const C_MPS: f64 = 3.0e8;

fn main() {
    for max_outer in [3usize, 6, 10, 20] {
        let mut spec = ExperimentSpec::new(
            5,
            vec![1.0, 5.0],
            500,
            vec![Method::Mle, Method::Cccp],
            707,
        );
        spec.nlos = Some(NlosConfig::new(0.2, 5.0 / C_MPS).unwrap());
        spec.cccp_max_outer = max_outer;
        let table = run_experiment(&spec).unwrap();
        println!("max_outer = {max_outer}");
        for row in &table.rows {
            println!(
                "  {:>5} c_sigma={:>4} rmse={:8.3} m failures={}",
                row.method.name(),
                row.c_sigma_m,
                row.rmse_m,
                row.failures
            );
        }
    }
}
