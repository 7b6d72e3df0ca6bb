//! Load the two annex panels and print cross-sectional summaries.
//!
//! ```text
//! cargo run --example ingest_annex
//! ```

use std::error::Error;
use std::path::Path;

use frontier_lab::panel::parse_panel;

fn main() -> Result<(), Box<dyn Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let rd = parse_panel(&std::fs::read_to_string(data.join("annex1_rd_index.csv"))?, "rd_index")?;
    let tech = parse_panel(&std::fs::read_to_string(data.join("annex3_technology.csv"))?, "technology")?;

    for panel in [&rd, &tech] {
        println!("{}: {} series, years {:?}, {} present cells", panel.indicator_name(), panel.series().len(), panel.years(), panel.present_count());
        for &year in panel.years() {
            let Ok(ext) = panel.extrema(year) else { continue };
            println!(
                "  {year}: max {} {:.2}, min {} {:.2}, spread {:.2}, mean {:.3}",
                ext.max.code,
                ext.max.value,
                ext.min.code,
                ext.min.value,
                panel.range_spread(year)?,
                panel.cross_section_mean(year)?,
            );
        }
    }

    // Every cell survives a write/read cycle with its printed precision.
    let again = parse_panel(&rd.to_csv(), "rd_index")?;
    assert_eq!(again, rd);
    println!("round trip ok");
    Ok(())
}
