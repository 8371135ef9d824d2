//! Monte Carlo generation of coincidence-count datasets.
//!
//! The model mirrors a two-photon counting run: a source emits pairs in a
//! Schmidt-form state degraded by white noise, each of the four analyzer
//! bases is integrated for a fixed time, and every outcome cell accumulates
//! Poisson counts. Accidental coincidences (dark-count background) are drawn
//! independently per cell and added on top, with the draw recorded so the
//! analysis side can subtract it the way an out-of-peak measurement would.
//!
//! Each of the 16 cells consumes its own sub-seeded generator (cell index
//! for the signal stream, cell index + 16 for the accidental stream), so
//! datasets are reproducible bit-for-bit regardless of execution order.

use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::exec;
use crate::quantum::{born_table, mix_white_noise, DensityMatrix2Q, PureState2Q, SettingsSet};
use crate::sampling::{poisson, stream_rng};

/// Offset separating accidental-stream sub-seeds from signal-stream ones.
const ACCIDENTAL_STREAM_OFFSET: u64 = 16;

/// Photon-pair source: Schmidt-form state, white-noise visibility, and a
/// detected-pair rate per analyzer basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceModel {
    schmidt_angle: f64,
    phase: f64,
    visibility: f64,
    pair_rate: f64,
}

impl SourceModel {
    pub fn new(schmidt_angle: f64, phase: f64, visibility: f64, pair_rate: f64) -> Result<Self> {
        if !schmidt_angle.is_finite() || !phase.is_finite() {
            return Err(Error::InvalidArgument("source angles must be finite".into()));
        }
        if !(0.0..=1.0).contains(&visibility) {
            return Err(Error::InvalidArgument(format!(
                "visibility must lie in [0, 1], got {visibility}"
            )));
        }
        if !pair_rate.is_finite() || pair_rate < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "pair rate must be finite and nonnegative, got {pair_rate}"
            )));
        }
        Ok(Self {
            schmidt_angle,
            phase,
            visibility,
            pair_rate,
        })
    }

    /// The golden Schmidt state at full visibility.
    pub fn ideal_golden(pair_rate: f64) -> Result<Self> {
        Self::new(crate::quantum::golden_schmidt_angle(), 0.0, 1.0, pair_rate)
    }

    pub fn schmidt_angle(&self) -> f64 {
        self.schmidt_angle
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn visibility(&self) -> f64 {
        self.visibility
    }

    pub fn pair_rate(&self) -> f64 {
        self.pair_rate
    }

    /// The emitted density matrix: the Schmidt state mixed with white noise.
    pub fn state(&self) -> DensityMatrix2Q {
        let pure = PureState2Q::schmidt(self.schmidt_angle, self.phase)
            .expect("finite Schmidt parameters define a unit state");
        mix_white_noise(&pure.density(), self.visibility)
            .expect("visibility validated on construction")
    }
}

/// Detection-side parameters: uniform accidental rate per outcome cell and
/// the integration time each basis is measured for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionModel {
    accidental_rate: f64,
    integration_time: f64,
}

impl DetectionModel {
    pub fn new(accidental_rate: f64, integration_time: f64) -> Result<Self> {
        if !accidental_rate.is_finite() || accidental_rate < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "accidental rate must be finite and nonnegative, got {accidental_rate}"
            )));
        }
        if !integration_time.is_finite() || integration_time < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "integration time must be finite and nonnegative, got {integration_time}"
            )));
        }
        Ok(Self {
            accidental_rate,
            integration_time,
        })
    }

    /// Noise-free detection over the given integration time.
    pub fn noiseless(integration_time: f64) -> Result<Self> {
        Self::new(0.0, integration_time)
    }

    pub fn accidental_rate(&self) -> f64 {
        self.accidental_rate
    }

    pub fn integration_time(&self) -> f64 {
        self.integration_time
    }
}

/// One outcome cell of a counting run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoincidenceRecord {
    pub x: u8,
    pub y: u8,
    pub a: u8,
    pub b: u8,
    /// Total coincidences registered in the cell (signal plus accidentals).
    pub counts: u64,
    /// The accidental component, measured separately so it can be
    /// subtracted downstream.
    pub accidentals: u64,
}

impl CoincidenceRecord {
    fn validate(&self) -> Result<()> {
        if self.x > 1 || self.y > 1 || self.a > 1 || self.b > 1 {
            return Err(Error::InvalidData(
                "record indices must be binary".into(),
            ));
        }
        Ok(())
    }

    /// Position of the cell in canonical order: `((2x + y)·2 + a)·2 + b`.
    pub fn cell_index(&self) -> usize {
        (((self.x as usize * 2 + self.y as usize) * 2 + self.a as usize) * 2) + self.b as usize
    }
}

/// Serialization tag distinguishing full 16-cell datasets from 4-row
/// per-basis summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Full,
    Summary,
}

/// Metadata carried next to a counts table, either as a JSON sidecar file
/// or inline as a leading `# {...}` comment line on a stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub integration_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub format: DatasetFormat,
}

/// A complete 16-cell counting run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentDataset {
    records: Vec<CoincidenceRecord>,
    integration_time: f64,
    seed: u64,
}

impl ExperimentDataset {
    /// Builds a dataset from records, requiring exactly one record per
    /// `(x, y, a, b)` cell (any order accepted; stored canonically).
    pub fn new(records: Vec<CoincidenceRecord>, integration_time: f64, seed: u64) -> Result<Self> {
        if records.len() != 16 {
            return Err(Error::InvalidData(format!(
                "a full dataset has 16 records, got {}",
                records.len()
            )));
        }
        let mut ordered: Vec<Option<CoincidenceRecord>> = vec![None; 16];
        for r in records {
            r.validate()?;
            let idx = r.cell_index();
            if ordered[idx].is_some() {
                return Err(Error::InvalidData(format!(
                    "duplicate record for cell (x={}, y={}, a={}, b={})",
                    r.x, r.y, r.a, r.b
                )));
            }
            ordered[idx] = Some(r);
        }
        let records = ordered.into_iter().map(|r| r.expect("all 16 present")).collect();
        if !integration_time.is_finite() || integration_time < 0.0 {
            return Err(Error::InvalidData(
                "integration time must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            records,
            integration_time,
            seed,
        })
    }

    /// Records in canonical cell order.
    pub fn records(&self) -> &[CoincidenceRecord] {
        &self.records
    }

    pub fn integration_time(&self) -> f64 {
        self.integration_time
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn metadata(&self) -> DatasetMetadata {
        DatasetMetadata {
            integration_time_s: self.integration_time,
            seed: Some(self.seed),
            format: DatasetFormat::Full,
        }
    }

    /// Sum of the four outcome cells of basis `(x, y)`.
    pub fn basis_total(&self, x: u8, y: u8) -> u64 {
        self.records
            .iter()
            .filter(|r| r.x == x && r.y == y)
            .map(|r| r.counts)
            .sum()
    }

    /// CSV body in the full format: header `x,y,a,b,counts,accidentals`
    /// and 16 rows in canonical cell order.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("x,y,a,b,counts,accidentals\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.x, r.y, r.a, r.b, r.counts, r.accidentals
            ));
        }
        out
    }

    /// Parses a full-format CSV body (metadata supplied separately).
    pub fn from_csv_str(body: &str, meta: &DatasetMetadata) -> Result<Self> {
        let mut lines = body
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (header_row, header) = lines
            .next()
            .ok_or_else(|| Error::parse(0, "header", "empty input"))?;
        if header.trim() != "x,y,a,b,counts,accidentals" {
            return Err(Error::parse(
                header_row + 1,
                "header",
                format!("expected full-format header, got `{}`", header.trim()),
            ));
        }
        let mut records = Vec::with_capacity(16);
        for (i, line) in lines {
            let row = i + 1;
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != 6 {
                return Err(Error::parse(
                    row,
                    "row",
                    format!("expected 6 fields, got {}", fields.len()),
                ));
            }
            let bit = |idx: usize, name: &str| -> Result<u8> {
                let v: u8 = fields[idx]
                    .trim()
                    .parse()
                    .map_err(|e| Error::parse(row, name, format!("{e}")))?;
                if v > 1 {
                    return Err(Error::parse(row, name, format!("must be 0 or 1, got {v}")));
                }
                Ok(v)
            };
            let count = |idx: usize, name: &str| -> Result<u64> {
                fields[idx]
                    .trim()
                    .parse()
                    .map_err(|e| Error::parse(row, name, format!("{e}")))
            };
            records.push(CoincidenceRecord {
                x: bit(0, "x")?,
                y: bit(1, "y")?,
                a: bit(2, "a")?,
                b: bit(3, "b")?,
                counts: count(4, "counts")?,
                accidentals: count(5, "accidentals")?,
            });
        }
        Self::new(records, meta.integration_time_s, meta.seed.unwrap_or(0))
    }

    /// Writes the CSV to `path` and the metadata sidecar to `path` with a
    /// `.json` extension.
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        let sidecar = path.with_extension("json");
        std::fs::write(&sidecar, serde_json::to_string_pretty(&self.metadata())?)?;
        Ok(())
    }

    /// Loads a dataset written by [`ExperimentDataset::save`].
    pub fn load(path: &Path) -> Result<Self> {
        let body = std::fs::read_to_string(path)?;
        let sidecar = path.with_extension("json");
        let meta: DatasetMetadata = serde_json::from_str(&std::fs::read_to_string(&sidecar)?)?;
        Self::from_csv_str(&body, &meta)
    }

    /// Writes the dataset to a stream with its metadata inlined as a
    /// leading `# {...}` comment, suitable for piping.
    pub fn write_stream(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "# {}", serde_json::to_string(&self.metadata())?)?;
        w.write_all(self.to_csv_string().as_bytes())?;
        Ok(())
    }

    /// Reads a dataset from a stream produced by
    /// [`ExperimentDataset::write_stream`].
    pub fn read_stream(r: &mut impl BufRead) -> Result<Self> {
        let mut body = String::new();
        r.read_to_string(&mut body)?;
        let meta = parse_inline_metadata(&body)?.ok_or_else(|| {
            Error::InvalidData("stream is missing its leading `# {...}` metadata line".into())
        })?;
        Self::from_csv_str(&body, &meta)
    }
}

/// Extracts the leading `# {...}` metadata comment from a stream body, if
/// present.
pub fn parse_inline_metadata(body: &str) -> Result<Option<DatasetMetadata>> {
    for line in body.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(json) = trimmed.strip_prefix('#') {
            let meta = serde_json::from_str(json.trim())?;
            return Ok(Some(meta));
        }
        break;
    }
    Ok(None)
}

/// Expected counts per cell: `pair_rate·T·P(ab|xy) + accidental_rate·T`,
/// with the conditional probabilities from the Born rule on the source
/// state.
pub fn expected_counts(
    src: &SourceModel,
    det: &DetectionModel,
    settings: &SettingsSet,
) -> [[[[f64; 2]; 2]; 2]; 2] {
    let table = born_table(&src.state(), settings);
    let t = det.integration_time();
    let mut mu = [[[[0.0; 2]; 2]; 2]; 2];
    for x in 0..2 {
        for y in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    mu[x][y][a][b] =
                        src.pair_rate() * t * table.p(x, y, a, b) + det.accidental_rate() * t;
                }
            }
        }
    }
    mu
}

/// Simulates one counting run. Every cell's signal and accidental counts
/// come from their own sub-seeded streams, so the result is independent of
/// evaluation order and identical across thread counts.
pub fn simulate(
    src: &SourceModel,
    det: &DetectionModel,
    settings: &SettingsSet,
    seed: u64,
) -> ExperimentDataset {
    let table = born_table(&src.state(), settings);
    let t = det.integration_time();
    let acc_mean = det.accidental_rate() * t;
    let records = exec::map_indexed(16, |idx| {
        let b = (idx & 1) as u8;
        let a = ((idx >> 1) & 1) as u8;
        let y = ((idx >> 2) & 1) as u8;
        let x = ((idx >> 3) & 1) as u8;
        let signal_mean =
            src.pair_rate() * t * table.p(x as usize, y as usize, a as usize, b as usize);
        let signal = poisson(&mut stream_rng(seed, idx as u64), signal_mean);
        let acc = poisson(
            &mut stream_rng(seed, ACCIDENTAL_STREAM_OFFSET + idx as u64),
            acc_mean,
        );
        CoincidenceRecord {
            x,
            y,
            a,
            b,
            counts: signal + acc,
            accidentals: acc,
        }
    });
    ExperimentDataset::new(records, t, seed).expect("simulated cells cover all 16 indices")
}
