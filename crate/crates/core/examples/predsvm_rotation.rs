//! Predictive domain adaptation on rotating two-class Gaussians: train on six
//! observed steps, test on the seventh.
//!
//! cargo run --release --example predsvm_rotation -- [repeats] [degrees per step]

use edd::experiments::{run_pda_synthetic, PdaOptions};

fn main() -> edd::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut args = std::env::args().skip(1);
    let repeats = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let degrees: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(15.0);
    let opts = PdaOptions {
        repeats,
        rotation: degrees.to_radians(),
        ..PdaOptions::default()
    };
    let runs = run_pda_synthetic(&opts)?;
    for row in runs.table(opts.n).rows {
        println!("{:18} {:.4} ± {:.4}", row.method, row.mean, row.std);
    }
    if runs.degenerate > 0 {
        println!("{} degenerate repeats skipped", runs.degenerate);
    }
    Ok(())
}
