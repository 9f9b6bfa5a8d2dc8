//! Runs the three 1-D drift settings and prints both tables.
//!
//! cargo run --release --example reproduce_tables -- [repeats] [n,n,...]

use std::time::Instant;

use edd::experiments::{run_tables, SettingKind, TableOptions};

fn main() -> edd::Result<()> {
    let mut args = std::env::args().skip(1);
    let repeats = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let ns: Vec<usize> = args
        .next()
        .map(|s| s.split(',').filter_map(|v| v.parse().ok()).collect())
        .unwrap_or_else(|| vec![10, 100, 1000]);
    let opts = TableOptions {
        repeats,
        ..TableOptions::default()
    };
    let start = Instant::now();
    let runs = run_tables(&SettingKind::TABLES, &ns, &opts)?;
    println!("RKHS distance");
    for r in runs.table1().rows {
        println!(
            "{:14} n={:<5} {:12} {:.4} ± {:.4}",
            r.setting, r.n, r.method, r.mean, r.std
        );
    }
    println!("\nKL divergence");
    for r in runs.table2().rows {
        println!(
            "{:14} n={:<5} {:12} {:.4} ± {:.4}",
            r.setting, r.n, r.method, r.mean, r.std
        );
    }
    println!("\n{repeats} repeats in {:.1?}", start.elapsed());
    Ok(())
}
