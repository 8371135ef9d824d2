//! Exact oracle for the MDL polytope.
//!
//! An MDL model with parameter `l` mixes deterministic local strategies with
//! input distributions bounded below by `l`. The extreme points factor into
//! one of the 16 deterministic strategies and one of the 4 extremal input
//! distributions (probability `1 - 3l` on one input pair, `l` on the other
//! three), giving 64 vertices. The maximum of any linear functional over the
//! polytope is attained at a vertex, so an exhaustive scan is exact.

use crate::error::{Error, Result};
use crate::exec;
use crate::inequality::{evaluate, BellFunctional, JointDistribution, MdlParameter};
use crate::sampling::{stream_rng, uniform_simplex};
use rand::Rng;

/// Number of deterministic strategies for two parties with two binary
/// inputs each.
pub const STRATEGY_COUNT: usize = 16;

/// Number of extremal input distributions at a fixed MDL parameter.
pub const EXTREMAL_INPUT_COUNT: usize = 4;

/// A deterministic local strategy: fixed outputs `a(x)` and `b(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeterministicStrategy {
    a: [u8; 2],
    b: [u8; 2],
}

impl DeterministicStrategy {
    pub fn new(a: [u8; 2], b: [u8; 2]) -> Result<Self> {
        if a.iter().chain(b.iter()).any(|v| *v > 1) {
            return Err(Error::InvalidArgument(
                "strategy outputs must be 0 or 1".into(),
            ));
        }
        Ok(Self { a, b })
    }

    /// Strategy for `index` in `0..16`, reading the bits of
    /// `(a(0), a(1), b(0), b(1))` with `a(0)` most significant.
    pub fn from_index(index: usize) -> Result<Self> {
        if index >= STRATEGY_COUNT {
            return Err(Error::InvalidArgument(format!(
                "strategy index must be below {STRATEGY_COUNT}, got {index}"
            )));
        }
        Ok(Self {
            a: [(index >> 3 & 1) as u8, (index >> 2 & 1) as u8],
            b: [(index >> 1 & 1) as u8, (index & 1) as u8],
        })
    }

    /// Position in the canonical enumeration order.
    pub fn index(&self) -> usize {
        ((self.a[0] as usize) << 3)
            | ((self.a[1] as usize) << 2)
            | ((self.b[0] as usize) << 1)
            | self.b[1] as usize
    }

    pub fn output_a(&self, x: usize) -> u8 {
        self.a[x]
    }

    pub fn output_b(&self, y: usize) -> u8 {
        self.b[y]
    }
}

/// A distribution over the four input pairs `(x, y)`, indexed `2x + y`,
/// with every entry at least the MDL parameter it was built for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputDistribution {
    q: [f64; 4],
}

impl InputDistribution {
    pub fn new(q: [f64; 4], ell: MdlParameter) -> Result<Self> {
        let l = ell.value();
        for (i, v) in q.iter().enumerate() {
            if !v.is_finite() || *v < l - 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "input probability q[{i}] = {v} falls below the MDL bound {l}"
                )));
            }
        }
        let sum: f64 = q.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "input distribution sums to {sum}, expected 1"
            )));
        }
        Ok(Self { q })
    }

    /// The extremal distribution peaked at input pair `peak` (`2x + y`):
    /// `1 - 3l` there, `l` elsewhere.
    pub fn extremal(peak: usize, ell: MdlParameter) -> Result<Self> {
        if peak >= EXTREMAL_INPUT_COUNT {
            return Err(Error::InvalidArgument(format!(
                "peak index must be below {EXTREMAL_INPUT_COUNT}, got {peak}"
            )));
        }
        let l = ell.value();
        let mut q = [l; 4];
        q[peak] = 1.0 - 3.0 * l;
        Ok(Self { q })
    }

    pub fn probability(&self, x: usize, y: usize) -> f64 {
        self.q[2 * x + y]
    }

    pub fn as_array(&self) -> &[f64; 4] {
        &self.q
    }
}

/// A vertex of the MDL polytope: a deterministic strategy paired with an
/// extremal input distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdlVertex {
    pub strategy: DeterministicStrategy,
    pub inputs: InputDistribution,
}

impl MdlVertex {
    /// The joint distribution `P(abxy) = q(xy) [a = a(x)] [b = b(y)]`.
    pub fn joint(&self) -> JointDistribution {
        let mut p = [[[[0.0; 2]; 2]; 2]; 2];
        for x in 0..2 {
            for y in 0..2 {
                let a = self.strategy.output_a(x) as usize;
                let b = self.strategy.output_b(y) as usize;
                p[a][b][x][y] = self.inputs.probability(x, y);
            }
        }
        JointDistribution::new(p).expect("vertex joint is normalized")
    }
}

/// All 64 vertices in canonical order: strategy-major (by strategy index),
/// input peak minor.
pub fn enumerate_vertices(ell: MdlParameter) -> Vec<MdlVertex> {
    let mut vertices = Vec::with_capacity(STRATEGY_COUNT * EXTREMAL_INPUT_COUNT);
    for s in 0..STRATEGY_COUNT {
        let strategy = DeterministicStrategy::from_index(s).expect("index below 16");
        for peak in 0..EXTREMAL_INPUT_COUNT {
            let inputs = InputDistribution::extremal(peak, ell).expect("peak below 4");
            vertices.push(MdlVertex { strategy, inputs });
        }
    }
    vertices
}

/// Maximum of `f` over the MDL polytope, with the first maximizing vertex
/// in enumeration order. Exact up to floating-point evaluation.
pub fn maximize(f: &BellFunctional, ell: MdlParameter) -> (f64, MdlVertex) {
    let vertices = enumerate_vertices(ell);
    let mut best_value = f64::NEG_INFINITY;
    let mut best = vertices[0];
    for v in vertices {
        let value = evaluate(f, &v.joint());
        if value > best_value {
            best_value = value;
            best = v;
        }
    }
    (best_value, best)
}

/// A finite mixture of strategy/input pairs: a general (non-extremal) MDL
/// model.
#[derive(Debug, Clone, PartialEq)]
pub struct MdlModel {
    components: Vec<(f64, DeterministicStrategy, InputDistribution)>,
}

impl MdlModel {
    pub fn components(&self) -> &[(f64, DeterministicStrategy, InputDistribution)] {
        &self.components
    }

    /// Mixture joint distribution.
    pub fn joint(&self) -> JointDistribution {
        let mut p = [[[[0.0; 2]; 2]; 2]; 2];
        for (w, strategy, inputs) in &self.components {
            for x in 0..2 {
                for y in 0..2 {
                    let a = strategy.output_a(x) as usize;
                    let b = strategy.output_b(y) as usize;
                    p[a][b][x][y] += w * inputs.probability(x, y);
                }
            }
        }
        JointDistribution::new(p).expect("mixture of normalized joints is normalized")
    }
}

/// A random MDL model: mixture weights uniform on the simplex, uniformly
/// random strategies, and input distributions `l + (1-4l) u` with `u`
/// uniform on the simplex. Deterministic for a fixed seed.
pub fn random_model(ell: MdlParameter, n_components: usize, seed: u64) -> Result<MdlModel> {
    if n_components == 0 {
        return Err(Error::InvalidArgument(
            "a model needs at least one component".into(),
        ));
    }
    let l = ell.value();
    let mut rng = stream_rng(seed, 0);
    let weights = uniform_simplex(&mut rng, n_components);
    let mut components = Vec::with_capacity(n_components);
    for w in weights {
        let strategy = DeterministicStrategy::from_index(rng.random_range(0..STRATEGY_COUNT))?;
        let u = uniform_simplex(&mut rng, 4);
        let mut q = [0.0; 4];
        for i in 0..4 {
            q[i] = l + (1.0 - 4.0 * l) * u[i];
        }
        let inputs = InputDistribution::new(q, ell)?;
        components.push((w, strategy, inputs));
    }
    Ok(MdlModel { components })
}

/// Convergence tolerance of [`threshold`] in the MDL parameter.
pub const THRESHOLD_TOL: f64 = 1e-9;

/// The MDL parameter at which a quantum value starts to beat the polytope
/// maximum: bisects `quantum_value(l) - maximize(functional(l))` over
/// `[0, 1/4]`. Fails if the difference has the same sign at both ends.
pub fn threshold(
    functional: impl Fn(MdlParameter) -> BellFunctional,
    quantum_value: impl Fn(MdlParameter) -> f64,
) -> Result<f64> {
    let gap = |l: f64| -> f64 {
        let ell = MdlParameter::new(l).expect("bisection stays in range");
        quantum_value(ell) - maximize(&functional(ell), ell).0
    };
    let (mut lo, mut hi) = (0.0, crate::inequality::MDL_PARAMETER_MAX);
    let g_lo = gap(lo);
    let g_hi = gap(hi);
    if g_lo == 0.0 {
        return Ok(lo);
    }
    if g_hi == 0.0 {
        return Ok(hi);
    }
    if g_lo.signum() == g_hi.signum() {
        return Err(Error::NoThreshold(format!(
            "no sign change over [0, 1/4]: gap({lo}) = {g_lo:.3e}, gap({hi}) = {g_hi:.3e}"
        )));
    }
    while hi - lo > THRESHOLD_TOL {
        let mid = 0.5 * (lo + hi);
        let g_mid = gap(mid);
        if g_mid == 0.0 {
            return Ok(mid);
        }
        if g_mid.signum() == g_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Evaluates `f` on `count` seeded random models (sub-seeded per index, so
/// the sweep parallelizes deterministically) and returns the largest value.
pub fn random_model_sweep(
    f: &BellFunctional,
    ell: MdlParameter,
    count: usize,
    max_components: usize,
    seed: u64,
) -> f64 {
    let values = exec::map_indexed(count, |i| {
        let n = 1 + i % max_components.max(1);
        let model = random_model(ell, n, crate::sampling::mix_seed(seed, i as u64))
            .expect("valid parameters");
        evaluate(f, &model.joint())
    });
    values.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inequality::{
        chsh_joint_functional, chsh_mdl_threshold, mdl_joint_functional, JointDistribution,
    };
    use crate::quantum::{born_table, PureState2Q, SettingsSet};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::SQRT_2;

    fn ell(l: f64) -> MdlParameter {
        MdlParameter::new(l).unwrap()
    }

    #[test]
    fn strategy_index_round_trip() {
        for i in 0..STRATEGY_COUNT {
            let s = DeterministicStrategy::from_index(i).unwrap();
            assert_eq!(s.index(), i);
        }
        // Bit layout: a(0) is the most significant bit.
        let s = DeterministicStrategy::from_index(0b1010).unwrap();
        assert_eq!((s.output_a(0), s.output_a(1)), (1, 0));
        assert_eq!((s.output_b(0), s.output_b(1)), (1, 0));
        assert!(DeterministicStrategy::from_index(16).is_err());
        assert!(DeterministicStrategy::new([0, 2], [0, 0]).is_err());
    }

    #[test]
    fn enumeration_order_and_count() {
        let vs = enumerate_vertices(ell(0.1));
        assert_eq!(vs.len(), 64);
        // Strategy-major, peak-minor.
        for (i, v) in vs.iter().enumerate() {
            assert_eq!(v.strategy.index(), i / 4);
            let peak = i % 4;
            assert_abs_diff_eq!(v.inputs.as_array()[peak], 0.7, epsilon = 1e-15);
        }
    }

    #[test]
    fn extremal_inputs_at_quarter_are_uniform() {
        let vs = enumerate_vertices(ell(0.25));
        for v in &vs {
            for q in v.inputs.as_array() {
                assert_abs_diff_eq!(*q, 0.25, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn vertex_joints_are_valid_and_match_marginal() {
        for l in [0.0, 0.05, 0.25] {
            for v in enumerate_vertices(ell(l)) {
                let j = v.joint();
                let m = j.input_marginal();
                for x in 0..2 {
                    for y in 0..2 {
                        assert_abs_diff_eq!(m[x][y], v.inputs.probability(x, y), epsilon = 1e-15);
                        assert!(m[x][y] >= l - 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn mdl_functional_bound_is_tight_at_zero() {
        // Soundness and tightness: max over vertices is exactly 0 for all l.
        for i in 0..=24 {
            let l = 0.25 * i as f64 / 24.0;
            let (max, _) = maximize(&mdl_joint_functional(ell(l)), ell(l));
            assert!(max.abs() <= 1e-12, "l = {l}: max = {max}");
        }
    }

    #[test]
    fn chsh_bound_is_one_minus_two_ell() {
        for i in 0..=24 {
            let l = 0.25 * i as f64 / 24.0;
            let (max, _) = maximize(&chsh_joint_functional(), ell(l));
            assert_abs_diff_eq!(max, 1.0 - 2.0 * l, epsilon = 1e-12);
        }
    }

    #[test]
    fn maximize_tie_break_is_first_in_order() {
        // At l = 0.25 many vertices tie; the scan must keep the first.
        let (_, v) = maximize(&mdl_joint_functional(ell(0.25)), ell(0.25));
        let all = enumerate_vertices(ell(0.25));
        let first_val = evaluate(&mdl_joint_functional(ell(0.25)), &all[0].joint());
        let best_val = evaluate(&mdl_joint_functional(ell(0.25)), &v.joint());
        assert_abs_diff_eq!(first_val, best_val, epsilon = 1e-15);
        assert_eq!(v.strategy.index(), all[0].strategy.index());
        assert_eq!(v.inputs, all[0].inputs);
    }

    #[test]
    fn random_models_are_deterministic_and_sound() {
        let a = random_model(ell(0.08), 5, 42).unwrap();
        let b = random_model(ell(0.08), 5, 42).unwrap();
        assert_eq!(a, b);
        let c = random_model(ell(0.08), 5, 43).unwrap();
        assert_ne!(a, c);

        for i in 0..200 {
            let l = 0.25 * (i % 17) as f64 / 16.0;
            let model = random_model(ell(l), 1 + i % 7, 1000 + i as u64).unwrap();
            let v = evaluate(&mdl_joint_functional(ell(l)), &model.joint());
            assert!(v <= 1e-12, "model {i} at l = {l} scored {v}");
            let m = model.joint().input_marginal();
            for x in 0..2 {
                for y in 0..2 {
                    assert!(m[x][y] >= l - 1e-12);
                }
            }
        }
    }

    #[test]
    fn sweep_never_violates() {
        let l = ell(0.1);
        let max = random_model_sweep(&mdl_joint_functional(l), l, 500, 8, 7);
        assert!(max <= 1e-12, "sweep max {max}");
        // Deterministic for a fixed seed.
        assert_eq!(max, random_model_sweep(&mdl_joint_functional(l), l, 500, 8, 7));
    }

    #[test]
    fn chsh_threshold_matches_closed_form() {
        let t = threshold(|_| chsh_joint_functional(), |_| SQRT_2 / 2.0).unwrap();
        assert_abs_diff_eq!(t, chsh_mdl_threshold(), epsilon = 1e-9);
    }

    #[test]
    fn ideal_state_threshold_is_zero() {
        let table = born_table(&PureState2Q::golden().density(), &SettingsSet::hardy());
        let joint = JointDistribution::uniform_inputs(&table);
        let t = threshold(
            |l| mdl_joint_functional(l),
            |l| evaluate(&mdl_joint_functional(l), &joint),
        )
        .unwrap();
        assert!(t.abs() <= 1e-9, "threshold {t}");
    }

    #[test]
    fn published_raw_threshold_matches_critical_ell() {
        // The conditional cells, expressed through the joint functional with
        // uniform inputs, cross the polytope bound at the critical value.
        let p0 = 2939.0 / 35183.0;
        let zeros = [129.0 / 36658.0, 114.0 / 34693.0, 130.0 / 36962.0];
        let quantum = move |l: MdlParameter| {
            crate::inequality::mdl_conditional_lhs_cells(p0, zeros, l) / 4.0
        };
        let t = threshold(|l| mdl_joint_functional(l), quantum).unwrap();
        assert_abs_diff_eq!(t, 0.090_148_6, epsilon = 1e-6);
    }

    #[test]
    fn no_threshold_reported() {
        let err = threshold(|_| chsh_joint_functional(), |_| -1.0);
        assert!(matches!(err, Err(crate::Error::NoThreshold(_))));
    }
}
