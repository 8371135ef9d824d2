//! Ingestion and statistical analysis of coincidence data.
//!
//! Datasets arrive either as full 16-cell tables or as 4-row per-basis
//! summaries listing the selected outcome cell, the basis total, and the
//! accidental counts for both. The analysis computes raw (`selected/total`)
//! and net (`(selected - accidentals)/(total - accidental_total)`)
//! conditional probabilities, the critical MDL parameter with a parametric
//! Poisson bootstrap error bar, and the detection-efficiency floor.
//!
//! Bootstrap resamples are sub-seeded per resample index, so the estimates
//! are reproducible for a fixed seed no matter how the work is scheduled.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::exec;
use crate::inequality::{
    chsh_mdl_threshold, critical_ell_from_cells, min_detection_efficiency, CriticalEll,
    MDL_PARAMETER_MAX,
};
use crate::sampling::{poisson, stream_rng};
use crate::sim::{parse_inline_metadata, DatasetFormat, DatasetMetadata, ExperimentDataset};

/// Default number of bootstrap resamples.
pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 10_000;

/// Smallest accepted number of bootstrap resamples.
pub const MIN_BOOTSTRAP_RESAMPLES: usize = 1000;

/// Default bootstrap seed used by the convenience wrappers.
pub const DEFAULT_BOOTSTRAP_SEED: u64 = 0x4D44_4C2D_4245_4C4C;

const SUMMARY_HEADER: &str =
    "x,y,a,b,selected_counts,basis_total,selected_accidentals,accidental_total";
const FULL_HEADER: &str = "x,y,a,b,counts,accidentals";

/// Which outcome cell a basis keeps in summary form: the signal cell
/// `(0,0)` for bases `(0,0)` and `(1,1)`, the matching mixed outcome for
/// the two mixed bases.
pub fn selected_outcome(x: u8, y: u8) -> (u8, u8) {
    if (x, y) == (1, 1) {
        (0, 0)
    } else {
        (x, y)
    }
}

/// One basis row of a summary dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisSummary {
    pub x: u8,
    pub y: u8,
    pub a: u8,
    pub b: u8,
    pub selected_counts: u64,
    pub basis_total: u64,
    pub selected_accidentals: u64,
    pub accidental_total: u64,
}

impl BasisSummary {
    fn validate(&self) -> Result<()> {
        if self.x > 1 || self.y > 1 {
            return Err(Error::InvalidData("basis indices must be binary".into()));
        }
        if (self.a, self.b) != selected_outcome(self.x, self.y) {
            return Err(Error::InvalidData(format!(
                "basis ({}, {}) must select outcome {:?}, got ({}, {})",
                self.x,
                self.y,
                selected_outcome(self.x, self.y),
                self.a,
                self.b
            )));
        }
        if self.selected_counts > self.basis_total {
            return Err(Error::InvalidData(format!(
                "basis ({}, {}): selected_counts {} exceeds basis_total {}",
                self.x, self.y, self.selected_counts, self.basis_total
            )));
        }
        if self.selected_accidentals > self.accidental_total {
            return Err(Error::InvalidData(format!(
                "basis ({}, {}): selected_accidentals {} exceeds accidental_total {}",
                self.x, self.y, self.selected_accidentals, self.accidental_total
            )));
        }
        Ok(())
    }
}

/// Per-basis coincidence summary: one row per analyzer basis, each keeping
/// its selected outcome cell plus totals and accidentals.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryDataset {
    bases: [BasisSummary; 4],
    integration_time: f64,
}

impl SummaryDataset {
    /// Builds a summary from four rows (any order; stored canonically as
    /// `(0,0), (0,1), (1,0), (1,1)`).
    pub fn new(rows: Vec<BasisSummary>, integration_time: f64) -> Result<Self> {
        if rows.len() != 4 {
            return Err(Error::InvalidData(format!(
                "a summary has 4 basis rows, got {}",
                rows.len()
            )));
        }
        let mut ordered: [Option<BasisSummary>; 4] = [None; 4];
        for r in rows {
            r.validate()?;
            let idx = (r.x * 2 + r.y) as usize;
            if ordered[idx].is_some() {
                return Err(Error::InvalidData(format!(
                    "duplicate row for basis ({}, {})",
                    r.x, r.y
                )));
            }
            ordered[idx] = Some(r);
        }
        if !integration_time.is_finite() || integration_time < 0.0 {
            return Err(Error::InvalidData(
                "integration time must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            bases: ordered.map(|r| r.expect("all four bases present")),
            integration_time,
        })
    }

    /// Rows in canonical basis order.
    pub fn bases(&self) -> &[BasisSummary; 4] {
        &self.bases
    }

    pub fn basis(&self, x: u8, y: u8) -> &BasisSummary {
        &self.bases[(x * 2 + y) as usize]
    }

    pub fn integration_time(&self) -> f64 {
        self.integration_time
    }

    /// Reduces a full 16-cell dataset: keep each basis's selected cell,
    /// sum the four cells into the basis total, likewise for accidentals.
    pub fn from_full(data: &ExperimentDataset) -> Self {
        let rows = [(0u8, 0u8), (0, 1), (1, 0), (1, 1)]
            .into_iter()
            .map(|(x, y)| {
                let (a, b) = selected_outcome(x, y);
                let mut row = BasisSummary {
                    x,
                    y,
                    a,
                    b,
                    selected_counts: 0,
                    basis_total: 0,
                    selected_accidentals: 0,
                    accidental_total: 0,
                };
                for r in data.records().iter().filter(|r| r.x == x && r.y == y) {
                    row.basis_total += r.counts;
                    row.accidental_total += r.accidentals;
                    if (r.a, r.b) == (a, b) {
                        row.selected_counts = r.counts;
                        row.selected_accidentals = r.accidentals;
                    }
                }
                row
            })
            .collect();
        Self::new(rows, data.integration_time()).expect("reduction preserves invariants")
    }

    pub fn metadata(&self) -> DatasetMetadata {
        DatasetMetadata {
            integration_time_s: self.integration_time,
            seed: None,
            format: DatasetFormat::Summary,
        }
    }

    /// CSV body in the summary format, rows in canonical order.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(SUMMARY_HEADER);
        out.push('\n');
        for r in &self.bases {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.x,
                r.y,
                r.a,
                r.b,
                r.selected_counts,
                r.basis_total,
                r.selected_accidentals,
                r.accidental_total
            ));
        }
        out
    }

    /// Parses a summary-format CSV body.
    pub fn from_csv_str(body: &str, integration_time: f64) -> Result<Self> {
        let mut lines = body
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (header_row, header) = lines
            .next()
            .ok_or_else(|| Error::parse(0, "header", "empty input"))?;
        if header.trim() != SUMMARY_HEADER {
            return Err(Error::parse(
                header_row + 1,
                "header",
                format!("expected summary header, got `{}`", header.trim()),
            ));
        }
        let mut rows = Vec::with_capacity(4);
        for (i, line) in lines {
            let row = i + 1;
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != 8 {
                return Err(Error::parse(
                    row,
                    "row",
                    format!("expected 8 fields, got {}", fields.len()),
                ));
            }
            let field = |idx: usize, name: &str| -> Result<u64> {
                fields[idx]
                    .trim()
                    .parse()
                    .map_err(|e| Error::parse(row, name, format!("{e}")))
            };
            let r = BasisSummary {
                x: field(0, "x")? as u8,
                y: field(1, "y")? as u8,
                a: field(2, "a")? as u8,
                b: field(3, "b")? as u8,
                selected_counts: field(4, "selected_counts")?,
                basis_total: field(5, "basis_total")?,
                selected_accidentals: field(6, "selected_accidentals")?,
                accidental_total: field(7, "accidental_total")?,
            };
            if r.selected_counts > r.basis_total {
                return Err(Error::parse(
                    row,
                    "selected_counts",
                    format!("{} exceeds basis_total {}", r.selected_counts, r.basis_total),
                ));
            }
            if r.selected_accidentals > r.accidental_total {
                return Err(Error::parse(
                    row,
                    "selected_accidentals",
                    format!(
                        "{} exceeds accidental_total {}",
                        r.selected_accidentals, r.accidental_total
                    ),
                ));
            }
            rows.push(r);
        }
        Self::new(rows, integration_time)
    }

    /// Writes the CSV to `path` and a metadata sidecar to `path` with a
    /// `.json` extension.
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        std::fs::write(
            path.with_extension("json"),
            serde_json::to_string_pretty(&self.metadata())?,
        )?;
        Ok(())
    }

    /// Writes the dataset to a stream with inline `# {...}` metadata.
    pub fn write_stream(&self, w: &mut impl std::io::Write) -> Result<()> {
        writeln!(w, "# {}", serde_json::to_string(&self.metadata())?)?;
        w.write_all(self.to_csv_string().as_bytes())?;
        Ok(())
    }
}

/// The published reference run: four bases integrated 30 s each.
pub fn reference_dataset() -> SummaryDataset {
    let rows = vec![
        BasisSummary {
            x: 0,
            y: 0,
            a: 0,
            b: 0,
            selected_counts: 2939,
            basis_total: 35183,
            selected_accidentals: 14,
            accidental_total: 269,
        },
        BasisSummary {
            x: 0,
            y: 1,
            a: 0,
            b: 1,
            selected_counts: 129,
            basis_total: 36658,
            selected_accidentals: 26,
            accidental_total: 270,
        },
        BasisSummary {
            x: 1,
            y: 0,
            a: 1,
            b: 0,
            selected_counts: 114,
            basis_total: 34693,
            selected_accidentals: 32,
            accidental_total: 280,
        },
        BasisSummary {
            x: 1,
            y: 1,
            a: 0,
            b: 0,
            selected_counts: 130,
            basis_total: 36962,
            selected_accidentals: 23,
            accidental_total: 276,
        },
    ];
    SummaryDataset::new(rows, 30.0).expect("reference rows are consistent")
}

/// Loads a dataset from a string in either format, reducing full datasets
/// to summary form. Metadata comes from an inline `# {...}` line or the
/// supplied fallback (typically a sidecar file).
pub fn ingest_str(body: &str, fallback_meta: Option<&DatasetMetadata>) -> Result<SummaryDataset> {
    let meta = parse_inline_metadata(body)?.or_else(|| fallback_meta.copied());
    let Some(meta) = meta else {
        return Err(Error::InvalidData(
            "no metadata found: provide a JSON sidecar or a leading `# {...}` line".into(),
        ));
    };
    let header = body
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .ok_or_else(|| Error::parse(0, "header", "empty input"))?;
    match header {
        FULL_HEADER => {
            let full = ExperimentDataset::from_csv_str(body, &meta)?;
            Ok(SummaryDataset::from_full(&full))
        }
        SUMMARY_HEADER => SummaryDataset::from_csv_str(body, meta.integration_time_s),
        other => Err(Error::parse(
            1,
            "header",
            format!("unrecognized header `{other}`"),
        )),
    }
}

/// Loads a dataset from a CSV file in either format, taking metadata from
/// an inline `# {...}` line or the `.json` sidecar next to the file.
pub fn ingest_path(path: &Path) -> Result<SummaryDataset> {
    let body = std::fs::read_to_string(path)?;
    let sidecar = path.with_extension("json");
    let fallback = if sidecar.exists() {
        Some(serde_json::from_str::<DatasetMetadata>(
            &std::fs::read_to_string(&sidecar)?,
        )?)
    } else {
        None
    };
    ingest_str(&body, fallback.as_ref())
}

/// Reads a dataset from a stream with inline metadata (pipe mode).
pub fn ingest_reader(r: &mut impl std::io::BufRead) -> Result<SummaryDataset> {
    let mut body = String::new();
    r.read_to_string(&mut body)?;
    ingest_str(&body, None)
}

/// Probability normalization convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbabilityKind {
    /// `selected / basis_total`.
    Raw,
    /// `(selected - accidentals) / (basis_total - accidental_total)`.
    Net,
}

/// A conditional probability with its bootstrap standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate {
    pub value: f64,
    pub std_error: f64,
    pub kind: ProbabilityKind,
    /// Set when a negative net numerator was clamped to zero.
    pub clamped: bool,
}

/// A critical-parameter estimate with its bootstrap standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Whether the point estimate lies inside the violable range.
    pub violable: bool,
    /// Set when the root exceeds 1/4 (algebraically possible up to 1/3).
    pub above_quarter: bool,
    pub discarded_resamples: usize,
    /// Set when more than 1% of resamples were degenerate.
    pub discard_warning: bool,
}

/// Point value of one basis probability; the flag marks a clamped negative
/// net numerator.
fn point_probability(r: &BasisSummary, kind: ProbabilityKind) -> Result<(f64, bool)> {
    match kind {
        ProbabilityKind::Raw => {
            if r.basis_total == 0 {
                return Err(Error::DegenerateData(format!(
                    "basis ({}, {}) has no counts",
                    r.x, r.y
                )));
            }
            Ok((r.selected_counts as f64 / r.basis_total as f64, false))
        }
        ProbabilityKind::Net => {
            let denom = r.basis_total as f64 - r.accidental_total as f64;
            if denom <= 0.0 {
                return Err(Error::DegenerateData(format!(
                    "basis ({}, {}): accidental total {} consumes the basis total {}",
                    r.x, r.y, r.accidental_total, r.basis_total
                )));
            }
            let num = r.selected_counts as f64 - r.selected_accidentals as f64;
            if num < 0.0 {
                Ok((0.0, true))
            } else {
                Ok((num / denom, false))
            }
        }
    }
}

/// The four point probabilities in canonical basis order.
fn point_probabilities(d: &SummaryDataset, kind: ProbabilityKind) -> Result<[(f64, bool); 4]> {
    let mut out = [(0.0, false); 4];
    for (i, r) in d.bases().iter().enumerate() {
        out[i] = point_probability(r, kind)?;
    }
    Ok(out)
}

/// One parametric resample of a basis: the selected cell, its complement,
/// and both accidental components are redrawn as Poisson at their observed
/// values, keeping the hierarchy `selected <= total` intact by construction.
/// Draw order (selected, rest, selected accidentals, rest accidentals) is
/// part of the determinism contract.
fn resample_probability(
    r: &BasisSummary,
    kind: ProbabilityKind,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Option<f64> {
    let sel = poisson(rng, r.selected_counts as f64) as f64;
    let rest = poisson(rng, (r.basis_total - r.selected_counts) as f64) as f64;
    let acc_sel = poisson(rng, r.selected_accidentals as f64) as f64;
    let acc_rest = poisson(rng, (r.accidental_total - r.selected_accidentals) as f64) as f64;
    let total = sel + rest;
    match kind {
        ProbabilityKind::Raw => (total > 0.0).then(|| sel / total),
        ProbabilityKind::Net => {
            let denom = total - acc_sel - acc_rest;
            (denom > 0.0).then(|| ((sel - acc_sel) / denom).max(0.0))
        }
    }
}

struct BootstrapStats {
    prob_std_error: [f64; 4],
    ell_std_error: f64,
    discarded: usize,
    n_boot: usize,
}

impl BootstrapStats {
    fn discard_warning(&self) -> bool {
        self.discarded * 100 > self.n_boot
    }
}

/// Shared bootstrap pass: every resample redraws all four bases and yields
/// the four probabilities plus the critical-parameter root; degenerate
/// resamples (zero denominators or an undefined root) are discarded.
fn bootstrap_pass(
    d: &SummaryDataset,
    kind: ProbabilityKind,
    n_boot: usize,
    seed: u64,
) -> Result<BootstrapStats> {
    if n_boot < MIN_BOOTSTRAP_RESAMPLES {
        return Err(Error::InvalidArgument(format!(
            "bootstrap needs at least {MIN_BOOTSTRAP_RESAMPLES} resamples, got {n_boot}"
        )));
    }
    let resamples: Vec<Option<([f64; 4], f64)>> = exec::map_indexed(n_boot, |i| {
        let mut rng = stream_rng(seed, i as u64);
        let mut probs = [0.0; 4];
        for (j, r) in d.bases().iter().enumerate() {
            probs[j] = resample_probability(r, kind, &mut rng)?;
        }
        let root =
            critical_ell_from_cells(probs[0], [probs[1], probs[2], probs[3]]).root()?;
        Some((probs, root))
    });
    let kept: Vec<&([f64; 4], f64)> = resamples.iter().flatten().collect();
    let discarded = n_boot - kept.len();
    if kept.len() < 2 {
        return Err(Error::DegenerateData(
            "bootstrap discarded nearly all resamples".into(),
        ));
    }
    let n = kept.len() as f64;
    let std_dev = |values: &mut dyn Iterator<Item = f64>| -> f64 {
        let vals: Vec<f64> = values.collect();
        let mean = vals.iter().sum::<f64>() / n;
        (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    let prob_std_error =
        std::array::from_fn(|j| std_dev(&mut kept.iter().map(|(p, _)| p[j])));
    let ell_std_error = std_dev(&mut kept.iter().map(|(_, root)| *root));
    Ok(BootstrapStats {
        prob_std_error,
        ell_std_error,
        discarded,
        n_boot,
    })
}

/// The four conditional probabilities with bootstrap errors, at the default
/// resample count and seed.
pub fn probabilities(
    d: &SummaryDataset,
    kind: ProbabilityKind,
) -> Result<[ProbabilityEstimate; 4]> {
    probabilities_with(d, kind, DEFAULT_BOOTSTRAP_RESAMPLES, DEFAULT_BOOTSTRAP_SEED)
}

/// The four conditional probabilities with bootstrap errors.
pub fn probabilities_with(
    d: &SummaryDataset,
    kind: ProbabilityKind,
    n_boot: usize,
    seed: u64,
) -> Result<[ProbabilityEstimate; 4]> {
    let points = point_probabilities(d, kind)?;
    let stats = bootstrap_pass(d, kind, n_boot, seed)?;
    Ok(std::array::from_fn(|i| ProbabilityEstimate {
        value: points[i].0,
        std_error: stats.prob_std_error[i],
        kind,
        clamped: points[i].1,
    }))
}

/// Critical MDL parameter of the dataset with a parametric bootstrap
/// standard error; deterministic for a fixed seed.
pub fn critical_ell_with_error(
    d: &SummaryDataset,
    kind: ProbabilityKind,
    n_boot: usize,
    seed: u64,
) -> Result<EllEstimate> {
    let points = point_probabilities(d, kind)?;
    let stats = bootstrap_pass(d, kind, n_boot, seed)?;
    build_ell_estimate(&points, &stats)
}

fn build_ell_estimate(points: &[(f64, bool); 4], stats: &BootstrapStats) -> Result<EllEstimate> {
    let crit = critical_ell_from_cells(points[0].0, [points[1].0, points[2].0, points[3].0]);
    let Some(value) = crit.root() else {
        return Err(Error::DegenerateData(
            "all inequality cells vanish; the critical parameter is undefined".into(),
        ));
    };
    Ok(EllEstimate {
        value,
        std_error: stats.ell_std_error,
        violable: matches!(crit, CriticalEll::Violable(_)),
        above_quarter: value > MDL_PARAMETER_MAX,
        discarded_resamples: stats.discarded,
        discard_warning: stats.discard_warning(),
    })
}

/// The complete analysis of one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    /// Schema identifier, currently `mdl-report/1`.
    pub schema: String,
    pub integration_time_s: f64,
    /// Raw probabilities in canonical basis order
    /// `(0,0), (0,1), (1,0), (1,1)`.
    pub raw: [ProbabilityEstimate; 4],
    /// Net probabilities in the same order.
    pub net: [ProbabilityEstimate; 4],
    pub ell_raw: EllEstimate,
    pub ell_net: EllEstimate,
    /// Detection-efficiency floors `sqrt(ell)` for each kind.
    pub eta_min_raw: f64,
    pub eta_min_net: f64,
    /// The CHSH-based critical parameter `(2 - sqrt2)/4`, for comparison.
    pub chsh_comparison: f64,
    pub n_boot: usize,
    pub seed: u64,
}

impl AnalysisReport {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Runs the full analysis: both probability kinds, both critical-parameter
/// estimates, efficiency floors, and the CHSH comparison value. One
/// bootstrap pass per kind serves both the probability and parameter
/// errors.
pub fn report(d: &SummaryDataset, n_boot: usize, seed: u64) -> Result<AnalysisReport> {
    let mut kinds = [ProbabilityKind::Raw, ProbabilityKind::Net].into_iter().map(|kind| {
        let points = point_probabilities(d, kind)?;
        let stats = bootstrap_pass(d, kind, n_boot, seed)?;
        let probs: [ProbabilityEstimate; 4] = std::array::from_fn(|i| ProbabilityEstimate {
            value: points[i].0,
            std_error: stats.prob_std_error[i],
            kind,
            clamped: points[i].1,
        });
        let ell = build_ell_estimate(&points, &stats)?;
        Ok::<_, Error>((probs, ell))
    });
    let (raw, ell_raw) = kinds.next().expect("raw pass")?;
    let (net, ell_net) = kinds.next().expect("net pass")?;
    Ok(AnalysisReport {
        schema: "mdl-report/1".into(),
        integration_time_s: d.integration_time(),
        raw,
        net,
        ell_raw,
        ell_net,
        eta_min_raw: min_detection_efficiency(ell_raw.value),
        eta_min_net: min_detection_efficiency(ell_net.value),
        chsh_comparison: chsh_mdl_threshold(),
        n_boot,
        seed,
    })
}
