//! Fast sweep over a small synthetic epidemic panel, printing the best
//! method per model and horizon.
//!
//! cargo run --release --example desk_sweep -- [countries] [days] [workers]

use std::time::Instant;

use epiforecast::harness::{run_sweep, SweepConfig};
use epiforecast::samples::{build_samples, DEFAULT_WINDOW};
use epiforecast::synthetic::epidemic_panel;

fn main() -> epiforecast::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let countries = args.first().copied().unwrap_or(3);
    let days = args.get(1).copied().unwrap_or(50);
    let workers = args.get(2).copied().unwrap_or(3);
    let panel = epidemic_panel(countries, days, 7)?;
    let config = SweepConfig::fast();
    let samples = build_samples(&panel, config.k_max(), DEFAULT_WINDOW)?;
    println!("{} rows x {} features", samples.len(), samples.n_features());
    let start = Instant::now();
    let result = run_sweep(&samples, &config, None, workers)?;
    println!("{} cells in {:.1?}", result.cells.len(), start.elapsed());
    for b in &result.best {
        let method = b.method.map(|m| m.label()).unwrap_or("-");
        println!("{:<5} K={:<2} {:<6} test r2 {:?}", b.model.label(), b.k, method, b.mean_test);
    }
    Ok(())
}
