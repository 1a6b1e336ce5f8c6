//! The reference Gaussian experiment end to end: four `(p, n)`
//! combinations, 300 iterations each, written as CSV, a JSON summary and
//! two scatter figures with the limit `z = 2` drawn in.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::io::{emit_scatter_panels_svg, write_pair_csv, write_summary_json, ScatterPanel};
use crate::montecarlo::{run_simulation, SimulationConfig, SimulationResult};

/// The almost-sure limit of the normalized statistic.
pub const LIMIT: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct FigureFiles {
    pub csv: Vec<PathBuf>,
    pub summary: PathBuf,
    pub svg: Vec<PathBuf>,
    pub result: SimulationResult,
}

pub fn reproduce_figures(master_seed: u64, out_dir: &Path) -> Result<FigureFiles> {
    fs::create_dir_all(out_dir)?;
    let result = run_simulation(&SimulationConfig::gaussian_protocol(master_seed))?;

    let mut csv = Vec::new();
    for pair in &result.pairs {
        let path = out_dir.join(format!("z_p{}_n{}.csv", pair.p, pair.n));
        write_pair_csv(pair, &result.provenance, &path)?;
        csv.push(path);
    }
    let summary = out_dir.join("summary.json");
    write_summary_json(&result, &summary)?;

    let mut svg = Vec::new();
    for (fig, chunk) in result.pairs.chunks(2).enumerate() {
        let panels: Vec<ScatterPanel<'_>> = chunk
            .iter()
            .map(|pr| ScatterPanel {
                title: format!("(p,n)=({},{})", pr.p, pr.n),
                values: &pr.z,
            })
            .collect();
        let path = out_dir.join(format!("figure{}.svg", fig + 1));
        emit_scatter_panels_svg(&panels, LIMIT, &path)?;
        svg.push(path);
    }
    Ok(FigureFiles {
        csv,
        summary,
        svg,
        result,
    })
}
