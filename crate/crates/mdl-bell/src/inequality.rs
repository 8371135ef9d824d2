//! The measurement-dependent-locality (MDL) inequality family and CHSH
//! utilities.
//!
//! An MDL model with parameter `l` allows the hidden variable to bias the
//! input choices as long as every conditional input probability satisfies
//! `P(xy|lambda) >= l`; `l = 1/4` forces uniform inputs (full measurement
//! independence with two binary inputs), `l = 0` allows arbitrary bias.
//!
//! The joint-form inequality bounds `l*P(0000) - (1-3l)*(P(0101) + P(1010)
//! + P(0011)) <= 0` for every MDL model, where `P(abxy)` includes the input
//! distribution. With uniform inputs it is equivalent to the conditional
//! form `l*P(00|00) - (1-3l)*(P(01|01) + P(10|10) + P(00|11)) <= 0`, whose
//! left-hand side is exposed here along with the critical `l` above which a
//! given correlation table violates it.

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::quantum::CorrelationTable;

/// Largest meaningful MDL parameter: with two binary inputs, the four input
/// probabilities cannot all exceed 1/4.
pub const MDL_PARAMETER_MAX: f64 = 0.25;

/// An MDL lower bound `l` on conditional input probabilities, in
/// `[0, 1/4]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdlParameter(f64);

impl MdlParameter {
    pub fn new(ell: f64) -> Result<Self> {
        if !ell.is_finite() || !(0.0..=MDL_PARAMETER_MAX).contains(&ell) {
            return Err(Error::InvalidArgument(format!(
                "MDL parameter must lie in [0, {MDL_PARAMETER_MAX}], got {ell}"
            )));
        }
        Ok(Self(ell))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// A joint input-output distribution `P(abxy)`, indexed `[a][b][x][y]`.
///
/// Entries are nonnegative and sum to 1 over all sixteen cells.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    p: [[[[f64; 2]; 2]; 2]; 2],
}

impl JointDistribution {
    pub fn new(p: [[[[f64; 2]; 2]; 2]; 2]) -> Result<Self> {
        let mut sum = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                for x in 0..2 {
                    for y in 0..2 {
                        let v = p[a][b][x][y];
                        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                            return Err(Error::InvalidState(format!(
                                "P(a={a} b={b} x={x} y={y}) = {v} is outside [0, 1]"
                            )));
                        }
                        sum += v;
                    }
                }
            }
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidState(format!(
                "joint distribution sums to {sum}, expected 1"
            )));
        }
        Ok(Self { p })
    }

    /// Combines conditional probabilities with an input distribution:
    /// `P(abxy) = P(ab|xy) * q(xy)`.
    pub fn from_conditional(table: &CorrelationTable, inputs: [[f64; 2]; 2]) -> Result<Self> {
        let mut qsum = 0.0;
        for row in &inputs {
            for q in row {
                if !q.is_finite() || *q < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "input probability {q} is negative or non-finite"
                    )));
                }
                qsum += q;
            }
        }
        if (qsum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "input distribution sums to {qsum}, expected 1"
            )));
        }
        let mut p = [[[[0.0; 2]; 2]; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                for x in 0..2 {
                    for y in 0..2 {
                        p[a][b][x][y] = table.p(x, y, a, b) * inputs[x][y];
                    }
                }
            }
        }
        Self::new(p)
    }

    /// Conditional probabilities under exactly uniform inputs,
    /// `P(abxy) = P(ab|xy)/4`.
    pub fn uniform_inputs(table: &CorrelationTable) -> Self {
        Self::from_conditional(table, [[0.25; 2]; 2]).expect("uniform inputs are normalized")
    }

    /// `P(abxy)`.
    pub fn p(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.p[a][b][x][y]
    }

    /// The input marginal `q(xy) = sum_ab P(abxy)`.
    pub fn input_marginal(&self) -> [[f64; 2]; 2] {
        let mut q = [[0.0; 2]; 2];
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        q[x][y] += self.p[a][b][x][y];
                    }
                }
            }
        }
        q
    }

    /// Recovers `P(ab|xy)`; fails if any input has zero probability.
    pub fn conditional(&self) -> Result<CorrelationTable> {
        let q = self.input_marginal();
        let mut t = [[[[0.0; 2]; 2]; 2]; 2];
        for x in 0..2 {
            for y in 0..2 {
                if q[x][y] <= 0.0 {
                    return Err(Error::DegenerateData(format!(
                        "inputs ({x},{y}) have zero probability; conditionals undefined"
                    )));
                }
                for a in 0..2 {
                    for b in 0..2 {
                        t[x][y][a][b] = (self.p[a][b][x][y] / q[x][y]).clamp(0.0, 1.0);
                    }
                }
            }
        }
        CorrelationTable::new(t)
    }
}

/// A linear functional over joint distributions, `sum c(abxy) P(abxy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BellFunctional {
    c: [[[[f64; 2]; 2]; 2]; 2],
}

impl BellFunctional {
    pub fn new(c: [[[[f64; 2]; 2]; 2]; 2]) -> Result<Self> {
        for plane in &c {
            for row in plane {
                for pair in row {
                    for v in pair {
                        if !v.is_finite() {
                            return Err(Error::InvalidArgument(
                                "functional coefficients must be finite".into(),
                            ));
                        }
                    }
                }
            }
        }
        Ok(Self { c })
    }

    pub fn coefficient(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.c[a][b][x][y]
    }
}

/// The joint-form MDL functional: coefficient `+l` on `(a,b,x,y) =
/// (0,0,0,0)` and `-(1-3l)` on `(0,1,0,1)`, `(1,0,1,0)`, `(0,0,1,1)`.
/// Every MDL model satisfies `evaluate <= 0`.
pub fn mdl_joint_functional(ell: MdlParameter) -> BellFunctional {
    let l = ell.value();
    let mut c = [[[[0.0; 2]; 2]; 2]; 2];
    c[0][0][0][0] = l;
    c[0][1][0][1] = -(1.0 - 3.0 * l);
    c[1][0][1][0] = -(1.0 - 3.0 * l);
    c[0][0][1][1] = -(1.0 - 3.0 * l);
    BellFunctional { c }
}

/// CHSH in joint form: coefficients `(-1)^(xy + a + b)`. Under uniform
/// inputs its value is the usual correlator combination divided by 4; over
/// MDL models its maximum is `1 - 2l`.
pub fn chsh_joint_functional() -> BellFunctional {
    let mut c = [[[[0.0; 2]; 2]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for x in 0..2 {
                for y in 0..2 {
                    c[a][b][x][y] = if (x * y + a + b) % 2 == 0 { 1.0 } else { -1.0 };
                }
            }
        }
    }
    BellFunctional { c }
}

/// `sum c(abxy) P(abxy)`.
pub fn evaluate(f: &BellFunctional, j: &JointDistribution) -> f64 {
    let mut acc = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            for x in 0..2 {
                for y in 0..2 {
                    acc += f.c[a][b][x][y] * j.p[a][b][x][y];
                }
            }
        }
    }
    acc
}

/// The four conditional cells the MDL inequality reads: the signal
/// `P(00|00)` and the three cells `P(01|01)`, `P(10|10)`, `P(00|11)` that
/// vanish on the Hardy point.
pub fn inequality_cells(table: &CorrelationTable) -> (f64, [f64; 3]) {
    (
        table.p(0, 0, 0, 0),
        [table.p(0, 1, 0, 1), table.p(1, 0, 1, 0), table.p(1, 1, 0, 0)],
    )
}

/// Conditional-form left-hand side
/// `l*P(00|00) - (1-3l)*(P(01|01) + P(10|10) + P(00|11))`; positive values
/// witness a violation at that `l`.
pub fn mdl_conditional_lhs(table: &CorrelationTable, ell: MdlParameter) -> f64 {
    let (p0, zeros) = inequality_cells(table);
    mdl_conditional_lhs_cells(p0, zeros, ell)
}

/// Conditional-form left-hand side from the four cells directly.
pub fn mdl_conditional_lhs_cells(signal: f64, zeros: [f64; 3], ell: MdlParameter) -> f64 {
    let l = ell.value();
    let s: f64 = zeros.iter().sum();
    l * signal - (1.0 - 3.0 * l) * s
}

/// The critical MDL parameter of a correlation table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalEll {
    /// Root in `[0, 1/4)`: the table violates the inequality for every
    /// `l` above this value (up to 1/4).
    Violable(f64),
    /// Root in `[1/4, 1/3]`: no `l` in the valid range yields a violation.
    NotViolable { root: f64 },
    /// Signal and zero cells all vanish; the data carry no information.
    Undefined,
}

impl CriticalEll {
    /// The root `S/(P0+3S)` when defined, regardless of violability.
    pub fn root(&self) -> Option<f64> {
        match self {
            CriticalEll::Violable(r) => Some(*r),
            CriticalEll::NotViolable { root } => Some(*root),
            CriticalEll::Undefined => None,
        }
    }

    pub fn is_violable(&self) -> bool {
        matches!(self, CriticalEll::Violable(_))
    }
}

/// Critical `l` of a correlation table: the root of the conditional-form
/// left-hand side in `l`.
pub fn critical_ell(table: &CorrelationTable) -> CriticalEll {
    let (p0, zeros) = inequality_cells(table);
    critical_ell_from_cells(p0, zeros)
}

/// Critical `l` from the signal cell and the three zero cells.
///
/// The left-hand side is `l*(P0 + 3S) - S`, strictly increasing in `l`
/// whenever `P0 + 3S > 0`, so its root `S/(P0 + 3S)` separates satisfaction
/// from violation. A root at or above 1/4 means no valid `l` violates; the
/// algebraic ceiling is 1/3 (reached when `P0 = 0`).
pub fn critical_ell_from_cells(signal: f64, zeros: [f64; 3]) -> CriticalEll {
    let s: f64 = zeros.iter().sum();
    if signal <= 0.0 && s <= 0.0 {
        return CriticalEll::Undefined;
    }
    let root = s / (signal + 3.0 * s);
    if root < MDL_PARAMETER_MAX {
        CriticalEll::Violable(root)
    } else {
        CriticalEll::NotViolable { root }
    }
}

/// Correlator `E(xy) = sum_ab (-1)^(a+b) P(ab|xy)`.
pub fn correlator(table: &CorrelationTable, x: usize, y: usize) -> f64 {
    let mut e = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
            e += sign * table.p(x, y, a, b);
        }
    }
    e
}

/// CHSH value `E(00) + E(01) + E(10) - E(11)`.
pub fn chsh_value(table: &CorrelationTable) -> f64 {
    correlator(table, 0, 0) + correlator(table, 0, 1) + correlator(table, 1, 0)
        - correlator(table, 1, 1)
}

/// The MDL parameter below which even the Tsirelson-bound CHSH value stops
/// certifying nonlocality: `(2 - sqrt2)/4`, about 0.1464.
pub fn chsh_mdl_threshold() -> f64 {
    (2.0 - SQRT_2) / 4.0
}

/// Minimum detection efficiency for an MDL violation at parameter `ell`:
/// `sqrt(ell)`. Requires `ell >= 0`.
pub fn min_detection_efficiency(ell: f64) -> f64 {
    debug_assert!(ell >= 0.0, "efficiency floor needs a nonnegative parameter");
    ell.sqrt()
}
