//! Randomized invariants: Kraus completeness, probability bookkeeping,
//! estimator laws, entanglement-monotone symmetries, and eigensolver
//! self-consistency, each over generated parameters and states.

use proptest::prelude::*;
use seqmeas::entanglement::{concurrence, negativity, spin_flip};
use seqmeas::measurement::{
    apply_kit, knowledge_of_kit, kraus_pair, singlet_state, waveplate_to_strength, KitStrength,
    MeasurementKit, MeterBasisAngle, PbsImperfection,
};
use seqmeas::qcore::{
    hermitian_eigensystem, Complex, DensityMatrix, Qubit, SquareMatrix, DEFAULT_EIGEN_TOL,
};
use seqmeas::strategies::{
    adaptive_coherent_pair, incoherent_sequence, independent_coherent_pair, optimize_adaptive_pair,
};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

/// Full-rank random state: G G^dagger blended with a little identity so the
/// normalization stays well conditioned for near-singular draws.
fn density_from(values: &[f64; 32]) -> DensityMatrix {
    let mut g = SquareMatrix::zeros(4).unwrap();
    for r in 0..4 {
        for c in 0..4 {
            let k = 2 * (4 * r + c);
            g.set(r, c, Complex::new(values[k], values[k + 1]));
        }
    }
    let h = g
        .mul(&g.adjoint())
        .add(&SquareMatrix::identity(4).unwrap().scale_re(0.05));
    let trace = h.trace().re;
    DensityMatrix::new(h.scale_re(1.0 / trace)).unwrap()
}

/// Random state with entanglement coverage: the full-rank draw mixed toward
/// the singlet by `weight`.
fn blended_density(values: &[f64; 32], weight: f64) -> DensityMatrix {
    let noise = density_from(values);
    let mixed = noise
        .matrix()
        .scale_re(1.0 - weight)
        .add(&singlet_state().matrix().scale_re(weight));
    DensityMatrix::new(mixed).unwrap()
}

/// General single-qubit unitary (up to global phase).
fn unitary2(theta: f64, phi: f64, chi: f64) -> SquareMatrix {
    let (st, ct) = theta.sin_cos();
    let mut u = SquareMatrix::zeros(2).unwrap();
    u.set(0, 0, Complex::from_polar(ct, phi));
    u.set(0, 1, Complex::from_polar(st, chi));
    u.set(1, 0, -Complex::from_polar(st, -chi));
    u.set(1, 1, Complex::from_polar(ct, -phi));
    u
}

proptest! {
    #[test]
    fn kraus_pairs_resolve_the_identity(
        psi in 0.0..FRAC_PI_4,
        lambda in 0.0..FRAC_PI_2,
    ) {
        let kit = MeasurementKit::ideal(KitStrength::new(psi).unwrap())
            .with_meter_basis(MeterBasisAngle::new(lambda).unwrap());
        prop_assert!(kraus_pair(&kit).completeness_defect() < 1e-12);
    }

    #[test]
    fn kit_knowledge_is_the_strength_sine(psi in 0.0..FRAC_PI_4) {
        let kit = MeasurementKit::ideal(KitStrength::new(psi).unwrap());
        let k = knowledge_of_kit(&kit).value;
        prop_assert!((k - (2.0 * psi).sin()).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&k));
    }

    #[test]
    fn strength_from_knowledge_round_trips(k in 0.0..1.0f64) {
        let psi = KitStrength::from_knowledge(k).unwrap();
        prop_assert!(((2.0 * psi.angle()).sin() - k).abs() < 1e-12);
    }

    #[test]
    fn waveplate_knowledge_follows_the_quadrupled_angle(theta_b in 0.0..std::f64::consts::FRAC_PI_8) {
        let (_, k) = waveplate_to_strength(theta_b).unwrap();
        prop_assert!((k - (4.0 * theta_b).cos().abs()).abs() < 1e-12);
    }

    #[test]
    fn readout_imperfection_rescales_knowledge(
        psi in 0.0..FRAC_PI_4,
        t_h in 0.5..1.0f64,
        r_v in 0.5..1.0f64,
    ) {
        let strength = KitStrength::new(psi).unwrap();
        let ideal = knowledge_of_kit(&MeasurementKit::ideal(strength)).value;
        let noisy = knowledge_of_kit(
            &MeasurementKit::ideal(strength)
                .with_imperfection(PbsImperfection::from_transmissions(t_h, r_v).unwrap()),
        )
        .value;
        prop_assert!((noisy - (t_h + r_v - 1.0) * ideal).abs() < 1e-12);
    }

    #[test]
    fn kit_branches_carry_unit_probability(
        values in prop::array::uniform32(-1.0..1.0f64),
        psi in 0.0..FRAC_PI_4,
        lambda in 0.0..FRAC_PI_2,
    ) {
        let rho = density_from(&values);
        let kit = MeasurementKit::ideal(KitStrength::new(psi).unwrap())
            .with_meter_basis(MeterBasisAngle::new(lambda).unwrap());
        let set = apply_kit(&rho, &kit, Qubit::B).unwrap();
        let total: f64 = set.branches.iter().map(|b| b.probability).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!((set.non_selective.matrix().trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adaptation_does_not_change_the_disturbance(
        // psi bounded away from 0: near-pure concurrences carry operator
        // square-root noise of order sqrt(machine epsilon), so a 1e-10
        // comparison needs C bounded away from 1.
        psi in 0.02..FRAC_PI_4,
        lambda0 in 0.0..FRAC_PI_2,
        lambda1 in 0.0..FRAC_PI_2,
    ) {
        // The non-selective state after the adaptive pair on the singlet is
        // independent of both meter angles: adaptation buys knowledge only.
        let strength = KitStrength::new(psi).unwrap();
        let singlet = singlet_state();
        let chosen = adaptive_coherent_pair(
            strength,
            MeterBasisAngle::new(lambda0).unwrap(),
            MeterBasisAngle::new(lambda1).unwrap(),
            &singlet,
        )
        .unwrap();
        let diagonal = adaptive_coherent_pair(
            strength,
            MeterBasisAngle::diagonal(),
            MeterBasisAngle::diagonal(),
            &singlet,
        )
        .unwrap();
        prop_assert!((chosen.c - diagonal.c).abs() < 1e-10);
        prop_assert!((chosen.c - (2.0 * psi).cos().powi(2)).abs() < 1e-10);
    }

    #[test]
    fn spin_flip_is_an_involution(values in prop::array::uniform32(-1.0..1.0f64)) {
        let rho = density_from(&values);
        let once = spin_flip(&rho).unwrap();
        let twice = spin_flip(&DensityMatrix::new(once.conjugate().conjugate()).unwrap()).unwrap();
        // spin_flip(spin_flip(rho)) = rho because (sigma_y x sigma_y)^2 = 1.
        let back = spin_flip(&DensityMatrix::new(once).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(rho.matrix()) < 1e-12);
        let _ = twice;
    }

    #[test]
    fn entanglement_monotones_are_local_unitary_invariant(
        values in prop::array::uniform32(-1.0..1.0f64),
        weight in 0.0..0.9f64,
        ta in 0.0..FRAC_PI_2, pa in 0.0..std::f64::consts::TAU, ca in 0.0..std::f64::consts::TAU,
        tb in 0.0..FRAC_PI_2, pb in 0.0..std::f64::consts::TAU, cb in 0.0..std::f64::consts::TAU,
    ) {
        let rho = blended_density(&values, weight);
        let u = unitary2(ta, pa, ca).tensor(&unitary2(tb, pb, cb)).unwrap();
        let rotated = DensityMatrix::new(u.mul(rho.matrix()).mul(&u.adjoint())).unwrap();
        prop_assert!(
            (concurrence(&rotated).unwrap() - concurrence(&rho).unwrap()).abs() < 1e-10
        );
        prop_assert!(
            (negativity(&rotated).unwrap() - negativity(&rho).unwrap()).abs() < 1e-10
        );
    }

    #[test]
    fn eigensolver_reconstructs_random_hermitian_matrices(
        values in prop::array::uniform32(-1.0..1.0f64),
    ) {
        let mut g = SquareMatrix::zeros(4).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let k = 2 * (4 * r + c);
                g.set(r, c, Complex::new(values[k], values[k + 1]));
            }
        }
        let h = g.add(&g.adjoint()).scale_re(0.5);
        let eigen = hermitian_eigensystem(&h, DEFAULT_EIGEN_TOL).unwrap();
        prop_assert!(eigen.values.windows(2).all(|w| w[0] <= w[1]));

        let scale = h.frobenius_norm().max(1.0);
        let mut rebuilt = SquareMatrix::zeros(4).unwrap();
        let mut gram = SquareMatrix::zeros(4).unwrap();
        for k in 0..4 {
            let v = eigen.vector(k);
            for r in 0..4 {
                for c in 0..4 {
                    let outer = v[r] * v[c].conj();
                    rebuilt.set(r, c, rebuilt.get(r, c) + outer.scale(eigen.values[k]));
                }
            }
            for l in 0..4 {
                let w = eigen.vector(l);
                let dot: Complex = (0..4).map(|i| v[i].conj() * w[i]).sum();
                gram.set(k, l, dot);
            }
        }
        prop_assert!(rebuilt.max_abs_diff(&h) < 1e-10 * scale);
        prop_assert!(gram.max_abs_diff(&SquareMatrix::identity(4).unwrap()) < 1e-10);
    }

    #[test]
    fn concurrence_and_negativity_agree_on_entanglement(
        values in prop::array::uniform32(-1.0..1.0f64),
        weight in 0.0..0.95f64,
    ) {
        let rho = blended_density(&values, weight);
        let c = concurrence(&rho).unwrap();
        let n = negativity(&rho).unwrap();
        prop_assert!((c > 1e-9) == (n > 1e-9), "c = {c}, n = {n}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn strategies_order_as_adaptive_independent_incoherent(k_tot in 0.05..0.95f64) {
        let singlet = singlet_state();

        // Strengths chosen so every strategy accumulates the same total
        // knowledge k_tot.
        let psi_adaptive =
            KitStrength::new(0.5 * (1.0 - k_tot * k_tot).powf(0.25).acos()).unwrap();
        let solution = optimize_adaptive_pair(psi_adaptive, 1e-6).unwrap();
        let adaptive =
            adaptive_coherent_pair(psi_adaptive, solution.lambda0, solution.lambda1, &singlet)
                .unwrap();
        prop_assert!((adaptive.k_tot - k_tot).abs() < 1e-6);

        let independent =
            independent_coherent_pair(KitStrength::from_knowledge(k_tot).unwrap(), &singlet)
                .unwrap();
        prop_assert!((independent.k_tot - k_tot).abs() < 1e-9);

        let incoherent =
            incoherent_sequence(1.0 - (1.0 - k_tot).sqrt(), 2, &singlet).unwrap();
        prop_assert!((incoherent.k_tot - k_tot).abs() < 1e-12);

        // Each law, then the strict ordering between them.
        prop_assert!((adaptive.c - (1.0 - k_tot * k_tot).sqrt()).abs() < 1e-6);
        prop_assert!((independent.c - (1.0 - k_tot * k_tot)).abs() < 1e-9);
        prop_assert!((incoherent.c - (1.0 - k_tot)).abs() < 1e-12);
        prop_assert!(adaptive.c > independent.c + 1e-9);
        prop_assert!(independent.c > incoherent.c + 1e-9);
    }
}
