//! `report`: turn run logs into a summary table, CDF data, and
//! score-vs-error correlation data.

use std::path::{Path, PathBuf};

use crate::report::{build_table, read_logs, write_cdf_csv, write_correlation_csv, write_table_csv};
use crate::CliResult;

pub fn run(logs: &[PathBuf], out_dir: &Path) -> CliResult<()> {
    let records = read_logs(logs)?;
    std::fs::create_dir_all(out_dir)?;
    let rows = build_table(&records);
    write_table_csv(&rows, &out_dir.join("table.csv"))?;
    write_cdf_csv(&records, &out_dir.join("cdf.csv"))?;
    write_correlation_csv(&records, out_dir)?;
    println!(
        "report over {} records ({} table rows) written to {}",
        records.len(),
        rows.len(),
        out_dir.display()
    );
    Ok(())
}
