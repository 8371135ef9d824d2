//! Two-qubit state reconstruction from product-projector counts.
//!
//! The workflow is linear inversion over an informationally complete set of
//! 16 product projectors, followed by a deterministic physicality projection
//! (iterative eigenvalue redistribution) and an optional fidelity report
//! against a target state. Counts normalization comes from the four
//! computational-basis configurations, whose projectors sum to the identity,
//! unless an explicit total flux is provided.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, SymmetricEigen, Vector2};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::exec;
use crate::quantum::{fidelity, DensityMatrix2Q, PHYSICALITY_TOL};
use crate::sampling::{poisson, stream_rng};

/// Number of measurement configurations in the standard protocol.
pub const CONFIGURATION_COUNT: usize = 16;

/// Rank tolerance for the informational-completeness check.
const DESIGN_RANK_TOL: f64 = 1e-9;

/// The 16 Hermitian basis matrices `sigma_mu (x) sigma_nu` (Pauli products,
/// identity included), orthogonal under the trace inner product.
fn hermitian_basis() -> [Matrix4<Complex>; 16] {
    let i = Complex::new(0.0, 1.0);
    let o = Complex::new(1.0, 0.0);
    let z = Complex::ZERO;
    let sigma = [
        Matrix2::new(o, z, z, o),
        Matrix2::new(z, o, o, z),
        Matrix2::new(z, -i, i, z),
        Matrix2::new(o, z, z, -o),
    ];
    std::array::from_fn(|k| sigma[k / 4].kronecker(&sigma[k % 4]))
}

type Complex = num_complex::Complex64;

/// A set of 16 product-projector measurement configurations, one pair of
/// normalized single-qubit kets per configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TomographyProtocol {
    pairs: Vec<(Vector2<Complex>, Vector2<Complex>)>,
}

impl TomographyProtocol {
    /// Validates normalization of every ket and informational completeness
    /// (design-matrix rank 16).
    pub fn new(pairs: Vec<(Vector2<Complex>, Vector2<Complex>)>) -> Result<Self> {
        if pairs.len() != CONFIGURATION_COUNT {
            return Err(Error::InvalidProtocol(format!(
                "expected {CONFIGURATION_COUNT} configurations, got {}",
                pairs.len()
            )));
        }
        for (k, (sa, sb)) in pairs.iter().enumerate() {
            for (side, s) in [("first", sa), ("second", sb)] {
                if (s.norm() - 1.0).abs() > PHYSICALITY_TOL {
                    return Err(Error::InvalidProtocol(format!(
                        "{side} ket of configuration {k} is not normalized"
                    )));
                }
            }
        }
        let protocol = Self { pairs };
        let rank = protocol.design_matrix().rank(DESIGN_RANK_TOL);
        if rank < CONFIGURATION_COUNT {
            return Err(Error::InvalidProtocol(format!(
                "projector set is informationally incomplete (design rank {rank})"
            )));
        }
        Ok(protocol)
    }

    /// The standard 16-configuration scheme: both sides cycle through
    /// `{|0>, |1>, |+>, |+i>}`, configuration `k = 4i + j` pairing state
    /// `i` on the first qubit with state `j` on the second.
    pub fn james16() -> Self {
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let kets = [
            Vector2::new(Complex::new(1.0, 0.0), Complex::ZERO),
            Vector2::new(Complex::ZERO, Complex::new(1.0, 0.0)),
            Vector2::new(Complex::new(inv_sqrt2, 0.0), Complex::new(inv_sqrt2, 0.0)),
            Vector2::new(Complex::new(inv_sqrt2, 0.0), Complex::new(0.0, inv_sqrt2)),
        ];
        let mut pairs = Vec::with_capacity(CONFIGURATION_COUNT);
        for i in 0..4 {
            for j in 0..4 {
                pairs.push((kets[i], kets[j]));
            }
        }
        Self::new(pairs).expect("the standard scheme is complete")
    }

    pub fn pairs(&self) -> &[(Vector2<Complex>, Vector2<Complex>)] {
        &self.pairs
    }

    /// The product projector of configuration `k`.
    pub fn projector(&self, k: usize) -> Matrix4<Complex> {
        let (sa, sb) = &self.pairs[k];
        let pa = sa * sa.adjoint();
        let pb = sb * sb.adjoint();
        pa.kronecker(&pb)
    }

    /// Design matrix `M[k][i] = tr(Pi_k B_i)` over the Hermitian basis;
    /// real because both factors are Hermitian.
    fn design_matrix(&self) -> DMatrix<f64> {
        let basis = hermitian_basis();
        DMatrix::from_fn(CONFIGURATION_COUNT, 16, |k, i| {
            (self.projector(k) * basis[i]).trace().re
        })
    }

    /// Born probabilities `tr(rho Pi_k)` for all configurations.
    pub fn probabilities(&self, rho: &DensityMatrix2Q) -> [f64; 16] {
        std::array::from_fn(|k| {
            (rho.matrix() * self.projector(k)).trace().re.clamp(0.0, 1.0)
        })
    }

    /// Indices of the four configurations whose kets are computational on
    /// both sides, covering all four `(i, j)` combinations (their
    /// projectors then sum to the identity).
    fn computational_subset(&self) -> Option<[usize; 4]> {
        let mut found = [None; 4];
        for (k, (sa, sb)) in self.pairs.iter().enumerate() {
            let classify = |s: &Vector2<Complex>| -> Option<usize> {
                if s[0].norm() > 1.0 - PHYSICALITY_TOL {
                    Some(0)
                } else if s[1].norm() > 1.0 - PHYSICALITY_TOL {
                    Some(1)
                } else {
                    None
                }
            };
            if let (Some(i), Some(j)) = (classify(sa), classify(sb)) {
                found[2 * i + j].get_or_insert(k);
            }
        }
        Some([found[0]?, found[1]?, found[2]?, found[3]?])
    }
}

/// Counts for the 16 configurations, plus an optional externally known
/// total flux that overrides the internal estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct TomographyData {
    counts: [f64; 16],
    total_flux: Option<f64>,
}

impl TomographyData {
    pub fn new(counts: [f64; 16], total_flux: Option<f64>) -> Result<Self> {
        if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidData(
                "tomography counts must be finite and nonnegative".into(),
            ));
        }
        if let Some(f) = total_flux {
            if !f.is_finite() || f <= 0.0 {
                return Err(Error::InvalidData(format!(
                    "total flux must be finite and positive, got {f}"
                )));
            }
        }
        Ok(Self { counts, total_flux })
    }

    pub fn counts(&self) -> &[f64; 16] {
        &self.counts
    }

    pub fn total_flux(&self) -> Option<f64> {
        self.total_flux
    }

    /// CSV body: header `proj_index,counts`, 16 rows.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("proj_index,counts\n");
        for (k, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{k},{c}\n"));
        }
        out
    }

    /// Parses a CSV body produced by [`TomographyData::to_csv_string`].
    pub fn from_csv_str(body: &str) -> Result<Self> {
        let mut lines = body
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(0, "header", "empty input"))?;
        if header.trim() != "proj_index,counts" {
            return Err(Error::parse(
                1,
                "header",
                format!("expected tomography header, got `{}`", header.trim()),
            ));
        }
        let mut counts = [f64::NAN; 16];
        let mut seen = [false; 16];
        for (i, line) in lines {
            let row = i + 1;
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != 2 {
                return Err(Error::parse(row, "row", "expected 2 fields"));
            }
            let k: usize = fields[0]
                .trim()
                .parse()
                .map_err(|e| Error::parse(row, "proj_index", format!("{e}")))?;
            if k >= 16 || seen[k] {
                return Err(Error::parse(
                    row,
                    "proj_index",
                    format!("index {k} out of range or repeated"),
                ));
            }
            counts[k] = fields[1]
                .trim()
                .parse()
                .map_err(|e| Error::parse(row, "counts", format!("{e}")))?;
            seen[k] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidData("missing configuration rows".into()));
        }
        Self::new(counts, None)
    }

    /// Writes the CSV and a sidecar naming the protocol.
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        let meta = TomographyMetadata {
            protocol: "james16".into(),
        };
        std::fs::write(
            path.with_extension("json"),
            serde_json::to_string_pretty(&meta)?,
        )?;
        Ok(())
    }

    /// Loads data saved by [`TomographyData::save`], returning the protocol
    /// named in the sidecar alongside the counts.
    pub fn load(path: &Path) -> Result<(TomographyProtocol, Self)> {
        let body = std::fs::read_to_string(path)?;
        let meta: TomographyMetadata =
            serde_json::from_str(&std::fs::read_to_string(path.with_extension("json"))?)?;
        if meta.protocol != "james16" {
            return Err(Error::InvalidProtocol(format!(
                "unknown tomography protocol `{}`",
                meta.protocol
            )));
        }
        Ok((TomographyProtocol::james16(), Self::from_csv_str(&body)?))
    }
}

/// Sidecar metadata for tomography count files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyMetadata {
    pub protocol: String,
}

/// Outcome of a reconstruction.
#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub rho: DensityMatrix2Q,
    /// Smallest eigenvalue of the linear-inversion estimate before the
    /// physicality projection; negative values measure statistical strain.
    pub pre_projection_min_eigenvalue: f64,
    pub fidelity_to_target: Option<f64>,
}

/// Total-flux normalization: the provided flux if present, otherwise the
/// summed counts of the computational-basis subset.
pub fn flux_estimate(protocol: &TomographyProtocol, data: &TomographyData) -> Result<f64> {
    if let Some(f) = data.total_flux() {
        return Ok(f);
    }
    if data.counts().iter().all(|c| *c == 0.0) {
        return Err(Error::InvalidData(
            "cannot estimate flux from all-zero counts".into(),
        ));
    }
    let subset = protocol.computational_subset().ok_or_else(|| {
        Error::InvalidProtocol(
            "protocol has no computational-basis subset; provide total_flux".into(),
        )
    })?;
    Ok(subset.iter().map(|k| data.counts()[*k]).sum())
}

/// The trace-one Hermitian matrix whose Born values match the normalized
/// counts; it may carry negative eigenvalues (fix with
/// [`project_to_physical`]).
pub fn linear_inversion(
    protocol: &TomographyProtocol,
    data: &TomographyData,
) -> Result<Matrix4<Complex>> {
    let flux = flux_estimate(protocol, data)?;
    let probs = DVector::from_iterator(16, data.counts().iter().map(|c| c / flux));
    let design = protocol.design_matrix();
    let coeffs = design
        .lu()
        .solve(&probs)
        .ok_or_else(|| Error::InvalidProtocol("design matrix is singular".into()))?;
    let basis = hermitian_basis();
    let mut h = Matrix4::zeros();
    for (i, b) in basis.iter().enumerate() {
        h += b.map(|x| x * Complex::new(coeffs[i], 0.0));
    }
    let tr = h.trace().re;
    if tr.abs() < 1e-9 {
        return Err(Error::InvalidData(
            "inverted matrix has near-zero trace".into(),
        ));
    }
    Ok(h.map(|x| x / Complex::new(tr, 0.0)))
}

/// Nearest-physical repair by eigenvalue redistribution: repeatedly zero
/// the most negative eigenvalue, spreading its value uniformly over the
/// strictly positive ones, then renormalize the trace.
pub fn project_to_physical(h: &Matrix4<Complex>) -> Result<DensityMatrix2Q> {
    let herm = (h + h.adjoint()).map(|x| x / Complex::new(2.0, 0.0));
    let eig = SymmetricEigen::new(herm);
    let mut lambda: [f64; 4] = std::array::from_fn(|k| eig.eigenvalues[k]);
    loop {
        let (worst, &min) = lambda
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("four eigenvalues");
        if min >= 0.0 {
            break;
        }
        let positive: Vec<usize> = (0..4).filter(|i| lambda[*i] > 0.0).collect();
        if positive.is_empty() {
            return Err(Error::InvalidData(
                "spectrum is nonpositive; cannot repair".into(),
            ));
        }
        let share = min / positive.len() as f64;
        lambda[worst] = 0.0;
        for i in positive {
            lambda[i] += share;
        }
        // A share may have driven a small positive eigenvalue negative;
        // the loop repeats until the spectrum is clean.
        for l in lambda.iter_mut() {
            if *l < 0.0 && *l > -1e-15 {
                *l = 0.0;
            }
        }
    }
    let total: f64 = lambda.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidData(
            "repaired spectrum has nonpositive trace".into(),
        ));
    }
    let mut rho: Matrix4<Complex> = Matrix4::zeros();
    for k in 0..4 {
        let l = lambda[k] / total;
        if l == 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        for i in 0..4 {
            for j in 0..4 {
                rho[(i, j)] += v[i] * v[j].conj() * Complex::new(l, 0.0);
            }
        }
    }
    // Exact Hermitian symmetrization against accumulation roundoff.
    let rho = (rho + rho.adjoint()).map(|x| x / Complex::new(2.0, 0.0));
    DensityMatrix2Q::new(rho)
}

/// Full pipeline: inversion, physicality projection, and (when a target is
/// given) fidelity to it.
pub fn reconstruct(
    protocol: &TomographyProtocol,
    data: &TomographyData,
    target: Option<&DensityMatrix2Q>,
) -> Result<ReconstructionResult> {
    let h = linear_inversion(protocol, data)?;
    let herm = (h + h.adjoint()).map(|x| x / Complex::new(2.0, 0.0));
    let min_eig = SymmetricEigen::new(herm)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let rho = project_to_physical(&h)?;
    let fidelity_to_target = target.map(|t| fidelity(&rho, t));
    Ok(ReconstructionResult {
        rho,
        pre_projection_min_eigenvalue: min_eig,
        fidelity_to_target,
    })
}

/// Exact (noise-free) counts `flux * p_k`, for round-trip checks.
pub fn exact_counts(
    protocol: &TomographyProtocol,
    rho: &DensityMatrix2Q,
    flux: f64,
) -> Result<TomographyData> {
    if !flux.is_finite() || flux <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "flux must be finite and positive, got {flux}"
        )));
    }
    let probs = protocol.probabilities(rho);
    TomographyData::new(std::array::from_fn(|k| flux * probs[k]), None)
}

/// Poisson-simulated counts at mean `flux * p_k`, one sub-seeded stream per
/// configuration (deterministic, order-independent).
pub fn simulate_counts(
    protocol: &TomographyProtocol,
    rho: &DensityMatrix2Q,
    flux: f64,
    seed: u64,
) -> Result<TomographyData> {
    if !flux.is_finite() || flux <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "flux must be finite and positive, got {flux}"
        )));
    }
    let probs = protocol.probabilities(rho);
    let counts = exec::map_indexed(16, |k| {
        poisson(&mut stream_rng(seed, k as u64), flux * probs[k]) as f64
    });
    TomographyData::new(std::array::from_fn(|k| counts[k]), None)
}
