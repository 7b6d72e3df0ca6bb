//! End-to-end run of a TOML configuration into a scratch directory.
//!
//! ```text
//! cargo run --example pipeline -- configs/annex.toml /tmp/frontier-out
//! ```

use std::error::Error;
use std::path::{Path, PathBuf};

use frontier_lab::report::{run_pipeline, HeadlineStatus};

fn main() -> Result<(), Box<dyn Error>> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let mut args = std::env::args().skip(1);
    let config = args.next().map(PathBuf::from).unwrap_or_else(|| root.join("configs/annex.toml"));
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("frontier-lab-pipeline"));
    std::fs::create_dir_all(&out)?;

    let report = run_pipeline(&config, &out, None)?;
    println!("status {:?} (exit {}), seed {}", report.status, report.status.exit_code(), report.seed);
    for check in &report.headline {
        let mark = match check.status {
            HeadlineStatus::Pass => "ok",
            HeadlineStatus::Fail => "FLAG",
            HeadlineStatus::Unverifiable => "n/a",
        };
        println!("  {mark:>4} {} {}", check.claim.id, check.reason);
    }
    for note in &report.notes {
        println!("  note: {note}");
    }
    println!("outputs in {}", out.display());
    Ok(())
}
