//! Randomized invariants: Born tables are distributions, the critical
//! parameter is the exact sign change of the conditional form, polytope
//! vertices are admissible joints that respect the bound, and the
//! physicality projection emits valid states and fixes valid inputs.

use nalgebra::Matrix4;
use num_complex::Complex64;
use proptest::prelude::*;

use mdl_bell::inequality::{
    critical_ell_from_cells, evaluate, mdl_conditional_lhs_cells, mdl_joint_functional,
    JointDistribution, MdlParameter, MDL_PARAMETER_MAX,
};
use mdl_bell::oracle::enumerate_vertices;
use mdl_bell::quantum::{
    born_table, fidelity_to_pure, mix_white_noise, MeasurementSetting, Party, PureState2Q,
    SettingsSet,
};
use mdl_bell::tomography::project_to_physical;

/// Slack for identities that hold up to floating-point evaluation.
const NUMERIC_TOL: f64 = 1e-9;

/// Slack for quantities that are exact by construction.
const EXACT_TOL: f64 = 1e-12;

/// A normalized-probability slack generous enough for 4x4 eigensolves.
const SPECTRUM_TOL: f64 = 1e-8;

fn settings(a0: f64, a1: f64, b0: f64, b1: f64) -> SettingsSet {
    SettingsSet::from_angles(a0, a1, b0, b1).expect("finite angles")
}

fn schmidt_state(chi: f64, phase: f64) -> PureState2Q {
    PureState2Q::schmidt(chi, phase).expect("valid Schmidt parameters")
}

proptest! {
    #[test]
    fn born_tables_are_normalized_distributions(
        chi in 0.01f64..1.55,
        phase in -3.1f64..3.1,
        visibility in 0.05f64..1.0,
        angles in prop::array::uniform4(-6.0f64..6.0),
    ) {
        let rho = mix_white_noise(&schmidt_state(chi, phase).density(), visibility)
            .expect("valid visibility");
        let table = born_table(&rho, &settings(angles[0], angles[1], angles[2], angles[3]));
        for x in 0..2 {
            for y in 0..2 {
                let mut total = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        let p = table.p(x, y, a, b);
                        prop_assert!(
                            (-EXACT_TOL..=1.0 + EXACT_TOL).contains(&p),
                            "P({a}{b}|{x}{y}) = {p} out of range"
                        );
                        total += p;
                    }
                }
                prop_assert!(
                    (total - 1.0).abs() <= NUMERIC_TOL,
                    "basis ({x}, {y}) sums to {total}"
                );
            }
        }
    }

    /// Analyzer kets are rays: a half-turn flips the ket's sign but leaves
    /// both projectors, hence every probability, unchanged.
    #[test]
    fn born_tables_are_half_turn_periodic(
        chi in 0.01f64..1.55,
        angles in prop::array::uniform4(-6.0f64..6.0),
        axis in 0usize..4,
    ) {
        let rho = schmidt_state(chi, 0.0).density();
        let base = born_table(&rho, &settings(angles[0], angles[1], angles[2], angles[3]));
        let mut shifted = angles;
        shifted[axis] += std::f64::consts::PI;
        let turned = born_table(&rho, &settings(shifted[0], shifted[1], shifted[2], shifted[3]));
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        prop_assert!(
                            (base.p(x, y, a, b) - turned.p(x, y, a, b)).abs() <= NUMERIC_TOL,
                            "cell ({x},{y},{a},{b}) moved under a half turn"
                        );
                    }
                }
            }
        }
    }

    /// The critical parameter is the exact root of the conditional form:
    /// below it the form is nonpositive, above it positive.
    #[test]
    fn critical_root_is_the_sign_change_of_the_conditional_form(
        signal in 1e-6f64..1.0,
        zeros in prop::array::uniform3(1e-9f64..0.5),
        below in 0.0f64..1.0,
        above in 0.0f64..1.0,
    ) {
        let crit = critical_ell_from_cells(signal, zeros);
        let root = crit.root().expect("positive cells define the root");
        prop_assert!(root > 0.0 && root < 1.0 / 3.0);
        prop_assert_eq!(crit.is_violable(), root < MDL_PARAMETER_MAX);

        if root < MDL_PARAMETER_MAX {
            let at_root = mdl_conditional_lhs_cells(
                signal,
                zeros,
                MdlParameter::new(root).expect("root in range"),
            );
            prop_assert!(at_root.abs() <= EXACT_TOL, "form at the root is {at_root}");
        }

        let lo = MdlParameter::new(below * root.min(MDL_PARAMETER_MAX))
            .expect("scaled root stays in range");
        prop_assert!(mdl_conditional_lhs_cells(signal, zeros, lo) <= EXACT_TOL);

        if root < MDL_PARAMETER_MAX {
            let hi = MdlParameter::new(root + above * (MDL_PARAMETER_MAX - root))
                .expect("interpolant stays in range");
            prop_assert!(mdl_conditional_lhs_cells(signal, zeros, hi) >= -EXACT_TOL);
        }
    }

    /// Every vertex is a joint distribution whose input marginal honors the
    /// measurement-dependence floor, and none violates the inequality.
    #[test]
    fn vertices_are_admissible_and_respect_the_bound(ell_value in 0.0f64..=0.25) {
        let ell = MdlParameter::new(ell_value).expect("in-range parameter");
        let vertices = enumerate_vertices(ell);
        prop_assert_eq!(vertices.len(), 64);
        let functional = mdl_joint_functional(ell);
        for vertex in &vertices {
            let joint = vertex.joint();
            let mut total = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    for x in 0..2 {
                        for y in 0..2 {
                            let p = joint.p(a, b, x, y);
                            prop_assert!(p >= -EXACT_TOL, "negative joint mass {p}");
                            total += p;
                        }
                    }
                }
            }
            prop_assert!((total - 1.0).abs() <= NUMERIC_TOL);
            let marginal = joint.input_marginal();
            for x in 0..2 {
                for y in 0..2 {
                    prop_assert!(
                        marginal[x][y] >= ell.value() - EXACT_TOL,
                        "input ({x}, {y}) mass {} under the floor {}",
                        marginal[x][y],
                        ell.value()
                    );
                }
            }
            prop_assert!(evaluate(&functional, &joint) <= EXACT_TOL);
        }
    }

    /// Folding a conditional table with positive input weights and
    /// unfolding it again is lossless.
    #[test]
    fn conditional_roundtrip_recovers_the_table(
        chi in 0.01f64..1.55,
        angles in prop::array::uniform4(-6.0f64..6.0),
        weights in prop::array::uniform4(0.01f64..1.0),
    ) {
        let table = born_table(
            &schmidt_state(chi, 0.0).density(),
            &settings(angles[0], angles[1], angles[2], angles[3]),
        );
        let total: f64 = weights.iter().sum();
        let inputs = [
            [weights[0] / total, weights[1] / total],
            [weights[2] / total, weights[3] / total],
        ];
        let joint = JointDistribution::from_conditional(&table, inputs)
            .expect("normalized positive inputs");
        let back = joint.conditional().expect("positive marginals");
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        prop_assert!(
                            (back.p(x, y, a, b) - table.p(x, y, a, b)).abs() <= NUMERIC_TOL
                        );
                    }
                }
            }
        }
    }

    /// The projection maps noisy Hermitian estimates (a physical state
    /// plus a Hermitian perturbation, the shape linear inversion
    /// produces) to valid states, repairing negative eigenvalues.
    #[test]
    fn projection_emits_physical_states(
        chi in 0.01f64..1.55,
        visibility in 0.9f64..1.0,
        epsilon in 0.0f64..0.2,
        re in prop::array::uniform16(-1.0f64..1.0),
        im in prop::array::uniform16(-1.0f64..1.0),
    ) {
        let clean = mix_white_noise(&schmidt_state(chi, 0.0).density(), visibility)
            .expect("valid visibility");
        let m = Matrix4::from_fn(|i, j| Complex64::new(re[4 * i + j], im[4 * i + j]));
        let noise = (m + m.adjoint()).scale(0.5 * epsilon);
        let estimate = clean.matrix() + noise;
        let rho = project_to_physical(&estimate).expect("projection succeeds");
        let eigenvalues = rho.eigenvalues();
        let trace: f64 = eigenvalues.iter().sum();
        prop_assert!((trace - 1.0).abs() <= SPECTRUM_TOL, "trace {trace}");
        for ev in eigenvalues {
            prop_assert!(ev >= -SPECTRUM_TOL, "negative eigenvalue {ev}");
        }
    }

    /// States that are already physical pass through the projection
    /// unchanged.
    #[test]
    fn projection_fixes_physical_inputs(
        chi in 0.01f64..1.55,
        phase in -3.1f64..3.1,
        visibility in 0.05f64..0.999,
    ) {
        let rho = mix_white_noise(&schmidt_state(chi, phase).density(), visibility)
            .expect("valid visibility");
        let projected = project_to_physical(rho.matrix()).expect("projection succeeds");
        let diff = projected.matrix() - rho.matrix();
        prop_assert!(diff.norm() <= SPECTRUM_TOL, "moved by {}", diff.norm());
    }

    /// White-noise mixing moves the fidelity to the pure target linearly:
    /// `v + (1 - v)/4`.
    #[test]
    fn white_noise_fidelity_is_linear_in_visibility(
        chi in 0.01f64..1.55,
        phase in -3.1f64..3.1,
        visibility in 0.05f64..1.0,
    ) {
        let psi = schmidt_state(chi, phase);
        let mixed = mix_white_noise(&psi.density(), visibility).expect("valid visibility");
        let expected = visibility + (1.0 - visibility) / 4.0;
        prop_assert!(
            (fidelity_to_pure(&mixed, &psi) - expected).abs() <= NUMERIC_TOL
        );
    }

    /// Setting angles are canonicalized into one full turn without moving
    /// the underlying ray.
    #[test]
    fn setting_angles_canonicalize_into_one_turn(angle in -20.0f64..20.0) {
        let setting = MeasurementSetting::new(angle, Party::A, 0).expect("finite angle");
        let turn = std::f64::consts::TAU;
        prop_assert!((0.0..turn).contains(&setting.angle()));
        let shifted = MeasurementSetting::new(angle + turn, Party::B, 1).expect("finite angle");
        let gap = (setting.angle() - shifted.angle()).abs();
        prop_assert!(gap <= NUMERIC_TOL || (gap - turn).abs() <= NUMERIC_TOL);
    }
}
