//! File formats: matrix CSV input, per-iteration results CSV, JSON
//! summaries and SVG scatter plots. Every file is written whole to a
//! temporary sibling and renamed into place.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;
use crate::montecarlo::{PairResult, Provenance, SimulationResult};

pub const SCHEMA_VERSION: u32 = 1;
pub const RESULTS_HEADER: &str = "pair_index,p,n,iteration,z";

/// First 16 hex digits of the SHA-256 of `bytes`.
pub fn short_hash(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes)[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Reads a matrix with one sample point per line. A first line containing
/// any non-numeric field is taken as a header. Lines starting with `#` are
/// skipped. Errors name 1-based file line numbers.
pub fn read_matrix_csv(path: &Path) -> Result<DataMatrix> {
    parse_matrix_csv(fs::File::open(path)?)
}

pub fn parse_matrix_csv<R: Read>(input: R) -> Result<DataMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut cols = None;
    let mut rows = 0;
    let mut values = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(k as u64 + 1, |p| p.line()) as usize;
        let parsed: Vec<Option<f64>> = record.iter().map(|f| f.parse::<f64>().ok()).collect();
        if k == 0 && parsed.iter().any(Option::is_none) {
            continue;
        }
        let width = *cols.get_or_insert(parsed.len());
        if parsed.len() != width {
            return Err(Error::Format {
                row: line,
                message: format!("expected {width} fields, found {}", parsed.len()),
            });
        }
        for (c, v) in parsed.into_iter().enumerate() {
            match v {
                Some(v) if v.is_finite() => values.push(v),
                Some(_) => return Err(Error::NonFinite { row: line, col: c + 1 }),
                None => {
                    return Err(Error::Format {
                        row: line,
                        message: format!("field {} is not a number", c + 1),
                    })
                }
            }
        }
        rows += 1;
    }
    let Some(cols) = cols else {
        return Err(Error::Format {
            row: 1,
            message: "no numeric rows".into(),
        });
    };
    DataMatrix::new(rows, cols, values)
}

/// One line of a results CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub pair_index: usize,
    pub p: usize,
    pub n: usize,
    pub iteration: usize,
    pub z: f64,
}

/// 17 significant digits, enough to recover any `f64` exactly.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn provenance_comment(prov: &Provenance) -> String {
    format!(
        "# maxdist {} seed={} config={} dist={} q={} profile={:?} rng={} kernel={:?}\n",
        prov.version,
        prov.master_seed,
        prov.config_hash,
        prov.distribution,
        prov.q,
        prov.profile_source,
        prov.rng_id,
        prov.kernel
    )
}

pub fn results_csv(pairs: &[&PairResult], prov: &Provenance) -> String {
    let mut out = provenance_comment(prov);
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for pair in pairs {
        for (it, z) in pair.z.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                pair.pair_index,
                pair.p,
                pair.n,
                it,
                format_f64(*z)
            )
            .unwrap();
        }
    }
    out
}

/// All pairs of a simulation in one CSV.
pub fn write_results_csv(result: &SimulationResult, path: &Path) -> Result<()> {
    let pairs: Vec<&PairResult> = result.pairs.iter().collect();
    write_atomic(path, results_csv(&pairs, &result.provenance).as_bytes())
}

/// One pair of a simulation in its own CSV.
pub fn write_pair_csv(pair: &PairResult, prov: &Provenance, path: &Path) -> Result<()> {
    write_atomic(path, results_csv(&[pair], prov).as_bytes())
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != RESULTS_HEADER {
        return Err(Error::Format {
            row: 1,
            message: format!("expected header {RESULTS_HEADER:?}"),
        });
    }
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummaryRecord {
    pub p: usize,
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub frac_in_band: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub schema_version: u32,
    pub pairs: Vec<PairSummaryRecord>,
    pub provenance: Provenance,
}

impl SummaryFile {
    pub fn from_result(result: &SimulationResult) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            pairs: result
                .pairs
                .iter()
                .map(|pr| PairSummaryRecord {
                    p: pr.p,
                    n: pr.n,
                    k: pr.summary.k,
                    mean: pr.summary.mean,
                    sd: pr.summary.sd,
                    min: pr.summary.min,
                    max: pr.summary.max,
                    frac_in_band: pr.summary.frac_in_band,
                })
                .collect(),
            provenance: result.provenance.clone(),
        }
    }
}

pub fn write_summary_json(result: &SimulationResult, path: &Path) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(&SummaryFile::from_result(result))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_summary_json(path: &Path) -> Result<SummaryFile> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

pub const PANEL_WIDTH: f64 = 700.0;
pub const PANEL_HEIGHT: f64 = 600.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPanel<'a> {
    pub title: String,
    pub values: &'a [f64],
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let mult = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    mult * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn panel_svg(out: &mut String, panel: &ScatterPanel<'_>, reference: f64) {
    let k = panel.values.len();
    let (mut lo, mut hi) = panel
        .values
        .iter()
        .fold((reference, reference), |(a, b), &v| (a.min(v), b.max(v)));
    let pad = if hi > lo { 0.08 * (hi - lo) } else { 1.0 };
    lo -= pad;
    hi += pad;
    let plot_w = PANEL_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = PANEL_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x_max = (k + 1) as f64;
    let sx = |x: f64| MARGIN_LEFT + x / x_max * plot_w;
    let sy = |y: f64| MARGIN_TOP + (hi - y) / (hi - lo) * plot_h;
    let bottom = MARGIN_TOP + plot_h;
    let right = MARGIN_LEFT + plot_w;

    writeln!(out, r#"<rect class="frame" x="{MARGIN_LEFT:.2}" y="{MARGIN_TOP:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#).unwrap();
    let mut d = String::new();
    let mut labels = String::new();
    for t in ticks(lo, hi) {
        let y = sy(t);
        write!(d, "M{MARGIN_LEFT:.2},{y:.2}h-5").unwrap();
        writeln!(
            labels,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="12">{}</text>"#,
            MARGIN_LEFT - 8.0,
            y + 4.0,
            fmt_tick(t)
        )
        .unwrap();
    }
    for t in ticks(0.0, x_max) {
        let x = sx(t);
        write!(d, "M{x:.2},{bottom:.2}v5").unwrap();
        writeln!(
            labels,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#,
            bottom + 20.0,
            fmt_tick(t)
        )
        .unwrap();
    }
    writeln!(out, r#"<path class="ticks" d="{d}" stroke="black"/>"#).unwrap();
    out.push_str(&labels);
    writeln!(
        out,
        r#"<text class="title" x="{:.2}" y="{:.2}" text-anchor="middle" font-size="15">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        MARGIN_TOP - 14.0,
        panel.title
    )
    .unwrap();
    writeln!(
        out,
        r#"<text class="xlabel" x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">iteration</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        PANEL_HEIGHT - 15.0
    )
    .unwrap();
    writeln!(out, r#"<text class="ylabel" x="20" y="{:.2}" text-anchor="middle" font-size="13" transform="rotate(-90 20 {:.2})">z</text>"#, MARGIN_TOP + plot_h / 2.0, MARGIN_TOP + plot_h / 2.0).unwrap();
    let yr = sy(reference);
    writeln!(out, r#"<line class="reference" x1="{MARGIN_LEFT:.2}" y1="{yr:.2}" x2="{right:.2}" y2="{yr:.2}" stroke="red" stroke-width="1.5" data-z="{}"/>"#, fmt_tick(reference)).unwrap();
    out.push_str("<g class=\"points\" fill=\"steelblue\">\n");
    for (it, &v) in panel.values.iter().enumerate() {
        writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5"/>"#,
            sx((it + 1) as f64),
            sy(v)
        )
        .unwrap();
    }
    out.push_str("</g>\n");
}

/// Side-by-side scatter panels, each `700 × 600`, with a horizontal
/// reference line at `reference` in every panel.
pub fn scatter_panels_svg(panels: &[ScatterPanel<'_>], reference: f64) -> Result<String> {
    if panels.is_empty() || panels.iter().any(|p| p.values.is_empty()) {
        return Err(Error::param("scatter plot needs at least one value per panel"));
    }
    if !reference.is_finite() || panels.iter().any(|p| p.values.iter().any(|v| !v.is_finite())) {
        return Err(Error::param("scatter plot values must be finite"));
    }
    let width = PANEL_WIDTH * panels.len() as f64;
    let mut out = String::new();
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_HEIGHT}" viewBox="0 0 {width} {PANEL_HEIGHT}">"#).unwrap();
    writeln!(out, r#"<rect width="{width}" height="{PANEL_HEIGHT}" fill="white"/>"#).unwrap();
    for (k, panel) in panels.iter().enumerate() {
        writeln!(
            out,
            r#"<g class="panel" transform="translate({},0)">"#,
            PANEL_WIDTH * k as f64
        )
        .unwrap();
        panel_svg(&mut out, panel, reference);
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// One point per iteration (`x` = iteration, `y` = value) and a reference
/// line, in a fixed `700 × 600` viewport.
pub fn scatter_svg(values: &[f64], reference: f64) -> Result<String> {
    scatter_panels_svg(
        &[ScatterPanel {
            title: format!("{} iterations", values.len()),
            values,
        }],
        reference,
    )
}

pub fn emit_scatter_svg(values: &[f64], reference: f64, path: &Path) -> Result<()> {
    write_atomic(path, scatter_svg(values, reference)?.as_bytes())
}

pub fn emit_scatter_panels_svg(panels: &[ScatterPanel<'_>], reference: f64, path: &Path) -> Result<()> {
    write_atomic(path, scatter_panels_svg(panels, reference)?.as_bytes())
}
