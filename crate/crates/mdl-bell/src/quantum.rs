//! Two-qubit states, polarization-analyzer settings, and Born-rule
//! correlation tables.
//!
//! Measurements are linear-polarization analyzers: the outcome-0 effect for
//! an analyzer at ket angle `theta` projects onto `(cos theta, sin theta)`,
//! outcome 1 onto its orthogonal complement. Ket angles differ from the
//! polarizer dial values used on optical mounts, which by lab convention
//! read the complement `90 deg - theta`; this crate works in ket-angle space
//! throughout.

use nalgebra::{Matrix2, Matrix4, SymmetricEigen};
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_4, TAU};

use crate::error::{Error, Result};

/// Tolerance for unit norm, unit trace, and Hermiticity checks.
pub const PHYSICALITY_TOL: f64 = 1e-9;

/// Schmidt coefficients of the golden state: `((sqrt5+1)/(2 sqrt3),
/// (sqrt5-1)/(2 sqrt3))`. Their squares sum to exactly 1 because
/// `((sqrt5+1)/2)^2 + ((sqrt5-1)/2)^2 = 3`.
fn golden_coefficients() -> (f64, f64) {
    let s5 = 5.0_f64.sqrt();
    let s3 = 3.0_f64.sqrt();
    ((s5 + 1.0) / (2.0 * s3), (s5 - 1.0) / (2.0 * s3))
}

/// Schmidt angle of the golden state, `acos((sqrt5+1)/(2 sqrt3))`, about
/// 20.905 degrees.
pub fn golden_schmidt_angle() -> f64 {
    golden_coefficients().0.acos()
}

/// Analyzer angle `acos(sqrt(1/2 - 1/sqrt5))`, about 76.717 degrees, that
/// places the golden state on the Hardy point.
pub fn hardy_analyzer_angle() -> f64 {
    (0.5 - 1.0 / 5.0_f64.sqrt()).sqrt().acos()
}

/// Real two-component ket `(cos theta, sin theta)` for an analyzer at ket
/// angle `theta`.
pub fn ket_from_angle(theta: f64) -> Result<[f64; 2]> {
    if !theta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "analyzer angle must be finite, got {theta}"
        )));
    }
    Ok([theta.cos(), theta.sin()])
}

/// A pure two-qubit state as amplitudes over the computational basis
/// `|00>, |01>, |10>, |11>`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState2Q {
    amps: [Complex64; 4],
}

impl PureState2Q {
    /// Validates unit norm (within [`PHYSICALITY_TOL`]) and finiteness.
    pub fn new(amps: [Complex64; 4]) -> Result<Self> {
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidState("state amplitudes must be finite".into()));
        }
        let norm2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > PHYSICALITY_TOL {
            return Err(Error::InvalidState(format!(
                "state norm^2 = {norm2}, expected 1 within {PHYSICALITY_TOL}"
            )));
        }
        Ok(Self { amps })
    }

    /// The partially entangled state with golden-ratio Schmidt coefficients:
    /// `((sqrt5+1)|00> + (sqrt5-1)|11>) / (2 sqrt3)`.
    pub fn golden() -> Self {
        let (c0, c1) = golden_coefficients();
        Self {
            amps: [
                Complex64::new(c0, 0.0),
                Complex64::ZERO,
                Complex64::ZERO,
                Complex64::new(c1, 0.0),
            ],
        }
    }

    /// Schmidt-form state `cos(chi)|00> + e^{i phase} sin(chi)|11>`.
    pub fn schmidt(chi: f64, phase: f64) -> Result<Self> {
        if !chi.is_finite() || !phase.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "schmidt parameters must be finite, got chi={chi}, phase={phase}"
            )));
        }
        Ok(Self {
            amps: [
                Complex64::new(chi.cos(), 0.0),
                Complex64::ZERO,
                Complex64::ZERO,
                Complex64::from_polar(chi.sin(), phase),
            ],
        })
    }

    pub fn amplitudes(&self) -> &[Complex64; 4] {
        &self.amps
    }

    /// The rank-1 density matrix `|psi><psi|`.
    pub fn density(&self) -> DensityMatrix2Q {
        let mut m = Matrix4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                m[(i, j)] = self.amps[i] * self.amps[j].conj();
            }
        }
        DensityMatrix2Q { m }
    }
}

/// A two-qubit density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix2Q {
    m: Matrix4<Complex64>,
}

impl DensityMatrix2Q {
    /// Validates Hermiticity, unit trace, and eigenvalues above
    /// `-PHYSICALITY_TOL`.
    pub fn new(m: Matrix4<Complex64>) -> Result<Self> {
        if m.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidState("density matrix entries must be finite".into()));
        }
        let mut herm_dev = 0.0_f64;
        for i in 0..4 {
            for j in 0..4 {
                herm_dev = herm_dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        if herm_dev > PHYSICALITY_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix is not Hermitian (max deviation {herm_dev:.3e})"
            )));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > PHYSICALITY_TOL || tr.im.abs() > PHYSICALITY_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix trace = {tr}, expected 1 within {PHYSICALITY_TOL}"
            )));
        }
        let eigs = SymmetricEigen::new(m).eigenvalues;
        if eigs.iter().any(|l| *l < -PHYSICALITY_TOL) {
            let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
            return Err(Error::InvalidState(format!(
                "density matrix has a negative eigenvalue ({min:.3e})"
            )));
        }
        Ok(Self { m })
    }

    /// The maximally mixed state I/4.
    pub fn maximally_mixed() -> Self {
        Self {
            m: Matrix4::identity().map(|x: Complex64| x / Complex64::new(4.0, 0.0)),
        }
    }

    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.m
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 4] {
        let mut eigs: Vec<f64> = SymmetricEigen::new(self.m).eigenvalues.iter().cloned().collect();
        eigs.sort_by(f64::total_cmp);
        [eigs[0], eigs[1], eigs[2], eigs[3]]
    }
}

/// Which side of the experiment a setting belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Party {
    A,
    B,
}

/// One analyzer orientation: ket angle canonicalized to `[0, 2pi)`, party,
/// and input index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementSetting {
    angle: f64,
    party: Party,
    input_index: u8,
}

impl MeasurementSetting {
    pub fn new(angle: f64, party: Party, input_index: u8) -> Result<Self> {
        if !angle.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "setting angle must be finite, got {angle}"
            )));
        }
        if input_index > 1 {
            return Err(Error::InvalidArgument(format!(
                "input index must be 0 or 1, got {input_index}"
            )));
        }
        Ok(Self {
            angle: angle.rem_euclid(TAU),
            party,
            input_index,
        })
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn party(&self) -> Party {
        self.party
    }

    pub fn input_index(&self) -> u8 {
        self.input_index
    }
}

/// The four analyzer orientations of a two-input, two-party experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettingsSet {
    pub a0: MeasurementSetting,
    pub a1: MeasurementSetting,
    pub b0: MeasurementSetting,
    pub b1: MeasurementSetting,
}

impl SettingsSet {
    /// Validates that parties and input indices are consistent with the
    /// field positions.
    pub fn new(
        a0: MeasurementSetting,
        a1: MeasurementSetting,
        b0: MeasurementSetting,
        b1: MeasurementSetting,
    ) -> Result<Self> {
        let expect = [
            (&a0, Party::A, 0, "a0"),
            (&a1, Party::A, 1, "a1"),
            (&b0, Party::B, 0, "b0"),
            (&b1, Party::B, 1, "b1"),
        ];
        for (s, party, idx, name) in expect {
            if s.party != party || s.input_index != idx {
                return Err(Error::InvalidArgument(format!(
                    "setting {name} must carry party {party:?} and input index {idx}"
                )));
            }
        }
        Ok(Self { a0, a1, b0, b1 })
    }

    /// Builds a set from four ket angles.
    pub fn from_angles(a0: f64, a1: f64, b0: f64, b1: f64) -> Result<Self> {
        Ok(Self {
            a0: MeasurementSetting::new(a0, Party::A, 0)?,
            a1: MeasurementSetting::new(a1, Party::A, 1)?,
            b0: MeasurementSetting::new(b0, Party::B, 0)?,
            b1: MeasurementSetting::new(b1, Party::B, 1)?,
        })
    }

    /// The single-angle family: A0 at `theta`, A1 at `theta + 45 deg`, and
    /// each B setting the mirror image of its A counterpart
    /// (`b_i = -a_i`).
    pub fn tied(theta: f64) -> Result<Self> {
        Self::from_angles(theta, theta + FRAC_PI_4, -theta, -(theta + FRAC_PI_4))
    }

    /// The tied set at [`hardy_analyzer_angle`], which together with the
    /// golden state realizes the Hardy point.
    pub fn hardy() -> Self {
        Self::tied(hardy_analyzer_angle()).expect("finite analyzer angle")
    }

    fn angle_for(&self, party: Party, input: usize) -> f64 {
        match (party, input) {
            (Party::A, 0) => self.a0.angle,
            (Party::A, _) => self.a1.angle,
            (Party::B, 0) => self.b0.angle,
            (Party::B, _) => self.b1.angle,
        }
    }
}

/// Conditional outcome probabilities `P(ab|xy)`, indexed `[x][y][a][b]`.
///
/// Every `(x, y)` slice sums to 1 and every entry lies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    p: [[[[f64; 2]; 2]; 2]; 2],
}

impl CorrelationTable {
    pub fn new(p: [[[[f64; 2]; 2]; 2]; 2]) -> Result<Self> {
        for x in 0..2 {
            for y in 0..2 {
                let mut sum = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        let v = p[x][y][a][b];
                        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                            return Err(Error::InvalidState(format!(
                                "P({a}{b}|{x}{y}) = {v} is outside [0, 1]"
                            )));
                        }
                        sum += v;
                    }
                }
                if (sum - 1.0).abs() > PHYSICALITY_TOL {
                    return Err(Error::InvalidState(format!(
                        "outcome probabilities for inputs ({x},{y}) sum to {sum}"
                    )));
                }
            }
        }
        Ok(Self { p })
    }

    /// `P(ab|xy)`.
    pub fn p(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        self.p[x][y][a][b]
    }

    pub fn as_array(&self) -> &[[[[f64; 2]; 2]; 2]; 2] {
        &self.p
    }
}

/// Rank-1 projector onto the analyzer ket at `angle` for outcome 0, or its
/// orthogonal complement for outcome 1.
fn analyzer_projector(angle: f64, outcome: usize) -> Matrix2<Complex64> {
    let [c, s] = [angle.cos(), angle.sin()];
    let proj0 = Matrix2::new(
        Complex64::new(c * c, 0.0),
        Complex64::new(c * s, 0.0),
        Complex64::new(c * s, 0.0),
        Complex64::new(s * s, 0.0),
    );
    if outcome == 0 {
        proj0
    } else {
        Matrix2::identity() - proj0
    }
}

/// Born-rule table `P(ab|xy) = Tr[rho (Pi_a^x (x) Pi_b^y)]`.
pub fn born_table(rho: &DensityMatrix2Q, settings: &SettingsSet) -> CorrelationTable {
    let mut p = [[[[0.0; 2]; 2]; 2]; 2];
    for x in 0..2 {
        for y in 0..2 {
            let alpha = settings.angle_for(Party::A, x);
            let beta = settings.angle_for(Party::B, y);
            for a in 0..2 {
                for b in 0..2 {
                    let pi = analyzer_projector(alpha, a).kronecker(&analyzer_projector(beta, b));
                    let mut val = (rho.m * pi).trace().re;
                    // Roundoff from exact zeros or ones, not physics.
                    if (-PHYSICALITY_TOL..0.0).contains(&val) {
                        val = 0.0;
                    } else if (1.0..=1.0 + PHYSICALITY_TOL).contains(&val) {
                        val = 1.0;
                    }
                    p[x][y][a][b] = val;
                }
            }
        }
    }
    CorrelationTable::new(p).expect("Born table of a physical state is normalized")
}

/// Mixes `rho` with white noise: `v rho + (1-v) I/4`.
pub fn mix_white_noise(rho: &DensityMatrix2Q, visibility: f64) -> Result<DensityMatrix2Q> {
    if !(0.0..=1.0).contains(&visibility) || !visibility.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "visibility must lie in [0, 1], got {visibility}"
        )));
    }
    let v = Complex64::new(visibility, 0.0);
    let w = Complex64::new((1.0 - visibility) / 4.0, 0.0);
    let m = rho.m.map(|x| x * v) + Matrix4::identity().map(|x: Complex64| x * w);
    Ok(DensityMatrix2Q { m })
}

/// Relative floor below which an eigenvalue of a PSD matrix is treated as
/// an exact zero. Square roots amplify eigendecomposition roundoff
/// (sqrt(1e-16) = 1e-8), so rank-deficient inputs need the clamp to keep
/// fidelities accurate.
const EIGENVALUE_FLOOR: f64 = 1e-12;

/// Square root of a positive-semidefinite Hermitian matrix; eigenvalues
/// below `EIGENVALUE_FLOOR` times the largest are clamped to zero.
fn psd_sqrt(m: &Matrix4<Complex64>) -> Matrix4<Complex64> {
    let eig = SymmetricEigen::new(*m);
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let mut out = Matrix4::zeros();
    for k in 0..4 {
        let lk = eig.eigenvalues[k];
        if lk <= lmax * EIGENVALUE_FLOOR {
            continue;
        }
        let l = lk.sqrt();
        let v = eig.eigenvectors.column(k);
        for i in 0..4 {
            for j in 0..4 {
                out[(i, j)] += v[i] * v[j].conj() * Complex64::new(l, 0.0);
            }
        }
    }
    out
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`, symmetric in
/// its arguments and equal to `<psi|rho|psi>` when one input is pure.
pub fn fidelity(rho: &DensityMatrix2Q, sigma: &DensityMatrix2Q) -> f64 {
    let s = psd_sqrt(&rho.m);
    let inner = s * sigma.m * s;
    // Hermitianize against roundoff before the eigendecomposition.
    let herm = (inner + inner.adjoint()).map(|x| x / Complex64::new(2.0, 0.0));
    let eig = SymmetricEigen::new(herm);
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let tr: f64 = eig
        .eigenvalues
        .iter()
        .filter(|l| **l > lmax * EIGENVALUE_FLOOR)
        .map(|l| l.sqrt())
        .sum();
    (tr * tr).min(1.0)
}

/// Fidelity of `rho` to the pure target `psi`: `<psi|rho|psi>`.
pub fn fidelity_to_pure(rho: &DensityMatrix2Q, psi: &PureState2Q) -> f64 {
    let mut val = Complex64::ZERO;
    for i in 0..4 {
        for j in 0..4 {
            val += psi.amps[i].conj() * rho.m[(i, j)] * psi.amps[j];
        }
    }
    val.re.clamp(0.0, 1.0)
}
