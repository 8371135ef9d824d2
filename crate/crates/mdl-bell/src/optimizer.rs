//! Derivative-free search over state and analyzer parameters.
//!
//! The search verifies that the golden Schmidt state with the tied analyzer
//! family is the optimum of the measurement-dependence figure of merit, and
//! explores how the optimum moves under white noise. Parameters live in
//! canonical ranges (Schmidt angle in `[0, pi/4]`, analyzer angles in
//! `[-pi/2, pi/2]`, exploiting the pi periodicity of projectors); a smooth
//! sine reparameterization keeps the simplex search unconstrained while
//! every reported point stays inside the box.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use crate::error::{Error, Result};
use crate::exec;
use crate::inequality::{critical_ell_from_cells, inequality_cells, CriticalEll};
use crate::quantum::{
    born_table, golden_schmidt_angle, hardy_analyzer_angle, mix_white_noise, DensityMatrix2Q,
    PureState2Q, SettingsSet,
};
use crate::sampling::stream_rng;
use rand::Rng;

/// Objective value reported when the critical parameter is undefined.
pub const DEGENERATE_OBJECTIVE: f64 = 1e9;

/// Hard cap on objective evaluations per local search.
pub const MAX_EVALUATIONS: u64 = 10_000;

/// Simplex-diameter convergence threshold (in transformed coordinates).
pub const SIMPLEX_DIAMETER_TOL: f64 = 1e-8;

/// A candidate configuration: Schmidt angle plus the four analyzer angles.
/// Tied points restrict the angles to the single-angle family
/// (`a1 = a0 + 45 deg`, `b_i = -a_i`), leaving two free parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterPoint {
    pub chi: f64,
    pub theta_a0: f64,
    pub theta_a1: f64,
    pub theta_b0: f64,
    pub theta_b1: f64,
    pub tied: bool,
}

impl ParameterPoint {
    /// A free point with all five parameters independent.
    pub fn new(chi: f64, a0: f64, a1: f64, b0: f64, b1: f64) -> Result<Self> {
        for v in [chi, a0, a1, b0, b1] {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(
                    "parameter point entries must be finite".into(),
                ));
            }
        }
        Ok(Self {
            chi,
            theta_a0: a0,
            theta_a1: a1,
            theta_b0: b0,
            theta_b1: b1,
            tied: false,
        })
    }

    /// A point in the tied single-angle family.
    pub fn tied(chi: f64, theta: f64) -> Result<Self> {
        let mut p = Self::new(chi, theta, theta + FRAC_PI_4, -theta, -(theta + FRAC_PI_4))?;
        p.tied = true;
        Ok(p)
    }

    /// The golden state with the tied analyzers realizing the Hardy point.
    pub fn hardy_point() -> Self {
        Self::tied(golden_schmidt_angle(), hardy_analyzer_angle())
            .expect("golden parameters are finite")
    }

    /// The tied family angle (`a0`).
    pub fn theta(&self) -> f64 {
        self.theta_a0
    }

    pub fn settings(&self) -> Result<SettingsSet> {
        SettingsSet::from_angles(self.theta_a0, self.theta_a1, self.theta_b0, self.theta_b1)
    }

    /// The Schmidt state at `chi` degraded to the given visibility.
    pub fn state(&self, visibility: f64) -> Result<DensityMatrix2Q> {
        let pure = PureState2Q::schmidt(self.chi, 0.0)?;
        mix_white_noise(&pure.density(), visibility)
    }

    /// Free coordinates: `(chi, theta)` for tied points, all five values
    /// otherwise.
    fn coordinates(&self) -> Vec<f64> {
        if self.tied {
            vec![self.chi, self.theta_a0]
        } else {
            vec![
                self.chi,
                self.theta_a0,
                self.theta_a1,
                self.theta_b0,
                self.theta_b1,
            ]
        }
    }

    fn from_coordinates(coords: &[f64], tied: bool) -> Self {
        if tied {
            Self::tied(coords[0], coords[1]).expect("bounded coordinates are finite")
        } else {
            Self::new(coords[0], coords[1], coords[2], coords[3], coords[4])
                .expect("bounded coordinates are finite")
        }
    }
}

/// Which figure of merit the search minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// The critical MDL parameter (smaller excludes more models).
    CriticalEll,
    /// `-(P0 - kappa*S)`: maximizes the signal cell while penalizing the
    /// zero cells, a smooth surrogate that stays discriminating at full
    /// visibility where the critical parameter degenerates to zero on a
    /// whole manifold.
    Penalized { kappa: f64 },
}

/// Objective configuration: the state visibility and the figure of merit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub visibility: f64,
    pub objective: Objective,
}

impl ObjectiveSpec {
    pub fn new(visibility: f64, objective: Objective) -> Result<Self> {
        if !visibility.is_finite() || visibility <= 0.0 || visibility > 1.0 {
            return Err(Error::InvalidArgument(format!(
                "visibility must lie in (0, 1], got {visibility}"
            )));
        }
        if let Objective::Penalized { kappa } = objective {
            if !kappa.is_finite() || kappa <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "penalty strength must be finite and positive, got {kappa}"
                )));
            }
        }
        Ok(Self {
            visibility,
            objective,
        })
    }
}

/// An objective evaluation; `degenerate` marks points where no violation
/// is possible (or the critical parameter is undefined entirely).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub value: f64,
    pub degenerate: bool,
}

/// Evaluates the figure of merit at a point (lower is better).
pub fn objective(p: &ParameterPoint, spec: &ObjectiveSpec) -> Result<ObjectiveValue> {
    let table = born_table(&p.state(spec.visibility)?, &p.settings()?);
    let (p0, zeros) = inequality_cells(&table);
    Ok(match spec.objective {
        Objective::CriticalEll => match critical_ell_from_cells(p0, zeros) {
            CriticalEll::Violable(root) => ObjectiveValue {
                value: root,
                degenerate: false,
            },
            CriticalEll::NotViolable { root } => ObjectiveValue {
                value: root,
                degenerate: true,
            },
            CriticalEll::Undefined => ObjectiveValue {
                value: DEGENERATE_OBJECTIVE,
                degenerate: true,
            },
        },
        Objective::Penalized { kappa } => ObjectiveValue {
            value: -(p0 - kappa * zeros.iter().sum::<f64>()),
            degenerate: false,
        },
    })
}

/// Canonical box for the free coordinates of a point.
fn bounds(tied: bool) -> (Vec<f64>, Vec<f64>) {
    if tied {
        (vec![0.0, -FRAC_PI_2], vec![FRAC_PI_4, FRAC_PI_2])
    } else {
        (
            vec![0.0, -FRAC_PI_2, -FRAC_PI_2, -FRAC_PI_2, -FRAC_PI_2],
            vec![FRAC_PI_4, FRAC_PI_2, FRAC_PI_2, FRAC_PI_2, FRAC_PI_2],
        )
    }
}

/// Maps unconstrained simplex coordinates into the box through a sine warp.
fn warp(x: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(x, (l, h))| l + (h - l) * 0.5 * (x.sin() + 1.0))
        .collect()
}

/// Inverse of [`warp`] for interior points (clamped at the box edge).
fn unwarp(p: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    p.iter()
        .zip(lo.iter().zip(hi))
        .map(|(p, (l, h))| (2.0 * (p - l) / (h - l) - 1.0).clamp(-1.0, 1.0).asin())
        .collect()
}

/// One simplex descent (reflection 1, expansion 2, contraction 0.5,
/// shrink 0.5) from `x0` in warped coordinates. Returns the best vertex,
/// its value, and the number of objective evaluations.
fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: Vec<f64>,
    max_evals: u64,
) -> (Vec<f64>, f64, u64) {
    const REFLECT: f64 = 1.0;
    const EXPAND: f64 = 2.0;
    const CONTRACT: f64 = 0.5;
    const SHRINK: f64 = 0.5;
    const INITIAL_STEP: f64 = 0.25;

    let n = x0.len();
    let mut evals = 0u64;
    let mut eval = |x: &[f64], evals: &mut u64| -> f64 {
        *evals += 1;
        f(x)
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(&x0, &mut evals);
    simplex.push((x0.clone(), v0));
    for i in 0..n {
        let mut xi = x0.clone();
        xi[i] += INITIAL_STEP;
        let vi = eval(&xi, &mut evals);
        simplex.push((xi, vi));
    }

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        if diameter < SIMPLEX_DIAMETER_TOL || evals >= max_evals {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|i| simplex[..n].iter().map(|(x, _)| x[i]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let lerp = |t: f64| -> Vec<f64> {
            (0..n)
                .map(|i| centroid[i] + t * (centroid[i] - worst.0[i]))
                .collect()
        };

        let xr = lerp(REFLECT);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = lerp(REFLECT * EXPAND);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let xc = lerp(REFLECT * CONTRACT);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = lerp(-CONTRACT);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < worst.1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    for (xi, bi) in entry.0.iter_mut().zip(&best) {
                        *xi = bi + SHRINK * (*xi - bi);
                    }
                    entry.1 = eval(&entry.0, &mut evals);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, v) = simplex.swap_remove(0);
    (x, v, evals)
}

/// The best point of one local search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub point: ParameterPoint,
    pub value: f64,
}

/// Result of a (multi-start) search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: ParameterPoint,
    /// Fresh re-evaluation of the objective at `best`.
    pub objective_value: f64,
    pub degenerate: bool,
    pub evaluations: u64,
    /// Per-start local optima in start order.
    pub trace: Vec<TraceEntry>,
}

fn local_search(spec: &ObjectiveSpec, start: &ParameterPoint, max_evals: u64) -> TraceEntry {
    let tied = start.tied;
    let (lo, hi) = bounds(tied);
    let mut f = |x: &[f64]| -> f64 {
        let point = ParameterPoint::from_coordinates(&warp(x, &lo, &hi), tied);
        objective(&point, spec)
            .expect("points inside the canonical box are valid")
            .value
    };
    let x0 = unwarp(&start.coordinates(), &lo, &hi);
    let (x, value, _) = nelder_mead(&mut f, x0, max_evals);
    TraceEntry {
        point: ParameterPoint::from_coordinates(&warp(&x, &lo, &hi), tied),
        value,
    }
}

fn finish(spec: &ObjectiveSpec, trace: Vec<TraceEntry>, evaluations: u64) -> Result<SearchResult> {
    let mut best_idx = 0;
    for (i, entry) in trace.iter().enumerate() {
        if entry.value < trace[best_idx].value {
            best_idx = i;
        }
    }
    let best = trace[best_idx].point;
    let check = objective(&best, spec)?;
    Ok(SearchResult {
        best,
        objective_value: check.value,
        degenerate: check.degenerate,
        evaluations,
        trace,
    })
}

/// A single local search from an explicit starting point.
pub fn optimize_from(spec: &ObjectiveSpec, start: &ParameterPoint) -> Result<SearchResult> {
    let entry = local_search(spec, start, MAX_EVALUATIONS);
    finish(spec, vec![entry], MAX_EVALUATIONS.min(u64::MAX))
}

/// Multi-start search: starts are sampled uniformly over the canonical box
/// under per-start sub-seeds (draw order: Schmidt angle, then analyzer
/// angles), local searches run independently, and the argmin is taken with
/// ties broken by the lowest start index. Deterministic for a fixed seed.
pub fn optimize(
    spec: &ObjectiveSpec,
    tied: bool,
    n_starts: usize,
    seed: u64,
) -> Result<SearchResult> {
    if n_starts == 0 {
        return Err(Error::InvalidArgument(
            "the search needs at least one start".into(),
        ));
    }
    let spec_copy = *spec;
    let trace = exec::map_indexed(n_starts, move |i| {
        let mut rng = stream_rng(seed, i as u64);
        let chi = rng.random::<f64>() * FRAC_PI_4;
        let mut angle = || (rng.random::<f64>() - 0.5) * std::f64::consts::PI;
        let start = if tied {
            ParameterPoint::tied(chi, angle()).expect("sampled parameters are finite")
        } else {
            ParameterPoint::new(chi, angle(), angle(), angle(), angle())
                .expect("sampled parameters are finite")
        };
        local_search(&spec_copy, &start, MAX_EVALUATIONS)
    });
    finish(spec, trace, MAX_EVALUATIONS * n_starts as u64)
}
