//! The measurement-kit model: a variable-strength coupling of qubit B to a
//! meter qubit, meter readout in a rotated basis, the induced Kraus pair on
//! the measured qubit, the knowledge functional, waveplate-angle conversion,
//! initial-state preparation, and a classical readout-imperfection model.
//!
//! The meter starts in |0> and is coupled so that B's basis states imprint
//! the meter states alpha_0 = (cos psi, sin psi) and alpha_1 =
//! (cos psi, -sin psi). Reading the meter out in the basis
//! {(cos lambda, sin lambda), (-sin lambda, cos lambda)} contracts the
//! coupling into the diagonal Kraus pair
//! m0 = diag(cos(lambda-psi), cos(lambda+psi)),
//! m1 = diag(sin(psi-lambda), -sin(psi+lambda)),
//! which is complete by the trigonometric identity
//! cos^2 x + sin^2 x = 1. The meter qubit itself is never materialized.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8};

use crate::error::{Error, Result};
use crate::qcore::{conjugate_map, Complex, DensityMatrix, PureState, Qubit, SquareMatrix};

/// Probability below which a measurement branch is reported unreachable and
/// its post-measurement state is omitted.
pub const UNREACHABLE_BRANCH_PROB: f64 = 1e-14;

/// Coupling strength psi in radians, restricted to [0, pi/4]. psi = 0 is no
/// coupling, psi = pi/4 a full projective measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KitStrength {
    psi: f64,
}

impl KitStrength {
    pub fn new(psi: f64) -> Result<Self> {
        if !psi.is_finite() || !(0.0..=FRAC_PI_4).contains(&psi) {
            return Err(Error::InvalidParameter {
                name: "psi",
                value: psi,
                expected: "a finite angle in [0, pi/4] radians",
            });
        }
        Ok(Self { psi })
    }

    /// Strength whose single-kit knowledge |sin 2 psi| equals `k_bar`, i.e.
    /// psi = arcsin(k_bar)/2 on the principal branch.
    pub fn from_knowledge(k_bar: f64) -> Result<Self> {
        if !k_bar.is_finite() || !(0.0..=1.0).contains(&k_bar) {
            return Err(Error::InvalidParameter {
                name: "k_bar",
                value: k_bar,
                expected: "a single-kit knowledge in [0, 1]",
            });
        }
        // Clamp against asin rounding at the projective endpoint.
        Self::new((k_bar.asin() / 2.0).min(FRAC_PI_4))
    }

    pub fn angle(self) -> f64 {
        self.psi
    }
}

/// Meter readout angle lambda in radians, restricted to [0, pi/2]. The
/// readout basis is {(cos lambda, sin lambda), (-sin lambda, cos lambda)};
/// lambda = pi/4 is the diagonal basis of the ideal kit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeterBasisAngle {
    lambda: f64,
}

impl MeterBasisAngle {
    pub fn new(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || !(0.0..=FRAC_PI_2).contains(&lambda) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                value: lambda,
                expected: "a finite angle in [0, pi/2] radians",
            });
        }
        Ok(Self { lambda })
    }

    /// The diagonal readout basis, lambda = pi/4.
    pub fn diagonal() -> Self {
        Self { lambda: FRAC_PI_4 }
    }

    pub fn angle(self) -> f64 {
        self.lambda
    }
}

/// Classical readout mislabeling at the analyzer's polarizing beam splitter:
/// an ideal outcome 0 is registered as 0 with probability t_h (else 1), an
/// ideal outcome 1 is registered as 1 with probability r_v (else 0). Leaked
/// amplitude exits a distinguishable port, so the error is incoherent: it
/// changes outcome statistics and mis-routes adaptation, never the quantum
/// back-action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PbsImperfection {
    t_h: f64,
    r_h: f64,
    t_v: f64,
    r_v: f64,
}

impl PbsImperfection {
    pub fn new(t_h: f64, r_h: f64, t_v: f64, r_v: f64) -> Result<Self> {
        for (name, value) in [("t_h", t_h), ("r_h", r_h), ("t_v", t_v), ("r_v", r_v)] {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    expected: "a probability in [0, 1]",
                });
            }
        }
        if (t_h + r_h - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter {
                name: "t_h + r_h",
                value: t_h + r_h,
                expected: "port probabilities summing to 1 within 1e-12",
            });
        }
        if (t_v + r_v - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter {
                name: "t_v + r_v",
                value: t_v + r_v,
                expected: "port probabilities summing to 1 within 1e-12",
            });
        }
        Ok(Self { t_h, r_h, t_v, r_v })
    }

    /// Imperfection from the two correct-port probabilities, with the leak
    /// probabilities set to their complements.
    pub fn from_transmissions(t_h: f64, r_v: f64) -> Result<Self> {
        Self::new(t_h, 1.0 - t_h, 1.0 - r_v, r_v)
    }

    pub fn t_h(self) -> f64 {
        self.t_h
    }

    pub fn r_h(self) -> f64 {
        self.r_h
    }

    pub fn t_v(self) -> f64 {
        self.t_v
    }

    pub fn r_v(self) -> f64 {
        self.r_v
    }

    /// P(registered outcome `observed` | ideal outcome `ideal`).
    pub fn flip_probability(self, ideal: u8, observed: u8) -> f64 {
        match (ideal, observed) {
            (0, 0) => self.t_h,
            (0, _) => self.r_h,
            (_, 0) => self.t_v,
            (_, _) => self.r_v,
        }
    }
}

/// One measurement kit: a coupling strength, a meter readout angle
/// (diagonal by default), and an optional readout imperfection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementKit {
    pub strength: KitStrength,
    pub meter_basis: MeterBasisAngle,
    pub imperfection: Option<PbsImperfection>,
}

impl MeasurementKit {
    /// Ideal kit: diagonal readout basis, no imperfection.
    pub fn ideal(strength: KitStrength) -> Self {
        Self {
            strength,
            meter_basis: MeterBasisAngle::diagonal(),
            imperfection: None,
        }
    }

    pub fn with_meter_basis(mut self, meter_basis: MeterBasisAngle) -> Self {
        self.meter_basis = meter_basis;
        self
    }

    pub fn with_imperfection(mut self, imperfection: PbsImperfection) -> Self {
        self.imperfection = Some(imperfection);
        self
    }
}

/// The two diagonal, real Kraus operators of a kit, labeled by meter outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausPair {
    pub m0: SquareMatrix,
    pub m1: SquareMatrix,
}

impl KrausPair {
    pub fn operator(&self, outcome: u8) -> &SquareMatrix {
        if outcome == 0 {
            &self.m0
        } else {
            &self.m1
        }
    }

    /// Diagonal entry of the outcome operator, as a real number.
    pub fn diagonal_entry(&self, outcome: u8, basis: usize) -> f64 {
        self.operator(outcome).get(basis, basis).re
    }

    /// Max-abs deviation of m0^dag m0 + m1^dag m1 from the identity.
    pub fn completeness_defect(&self) -> f64 {
        let sum = self
            .m0
            .adjoint()
            .mul(&self.m0)
            .add(&self.m1.adjoint().mul(&self.m1));
        sum.max_abs_diff(&SquareMatrix::identity(2).expect("dim 2 is supported"))
    }
}

/// Half-wave plate pair realizing a kit of strength psi = pi/4 - 2 theta_b;
/// the two plates sit at theta_a = theta_b + pi/4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveplateAngles {
    pub theta_a: f64,
    pub theta_b: f64,
}

impl WaveplateAngles {
    pub fn from_theta_b(theta_b: f64) -> Result<Self> {
        if !theta_b.is_finite() || !(0.0..=FRAC_PI_8).contains(&theta_b) {
            return Err(Error::InvalidParameter {
                name: "theta_b",
                value: theta_b,
                expected: "a finite angle in [0, pi/8] radians",
            });
        }
        Ok(Self {
            theta_a: theta_b + FRAC_PI_4,
            theta_b,
        })
    }
}

/// Knowledge of a kit: the discrimination estimator
/// K = |p(0|0) + p(1|1) - p(1|0) - p(0|1)| / 2
/// on equal-prior basis inputs, plus the conditional outcome probabilities
/// it was computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnowledgeEstimate {
    /// Estimator value in [0, 1].
    pub value: f64,
    /// conditionals[j][i] = p(outcome i | input basis state j); rows sum to 1.
    pub conditionals: [[f64; 2]; 2],
}

impl KnowledgeEstimate {
    /// Apply the discrimination estimator to a conditional outcome table.
    pub fn from_conditionals(conditionals: [[f64; 2]; 2]) -> Result<Self> {
        for row in &conditionals {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 || row.iter().any(|p| !(0.0..=1.0 + 1e-12).contains(p)) {
                return Err(Error::InvalidState {
                    reason: format!("conditional outcome row {row:?} is not a distribution"),
                });
            }
        }
        let value = knowledge_from_conditionals(&conditionals);
        Ok(Self {
            value,
            conditionals,
        })
    }
}

/// The bare estimator arithmetic, shared by analytic and empirical paths.
pub(crate) fn knowledge_from_conditionals(conditionals: &[[f64; 2]; 2]) -> f64 {
    ((conditionals[0][0] + conditionals[1][1] - conditionals[0][1] - conditionals[1][0]) / 2.0)
        .abs()
}

/// One outcome branch of a kit application.
#[derive(Debug, Clone, PartialEq)]
pub struct KitBranch {
    pub outcome: u8,
    pub probability: f64,
    /// Normalized post-measurement state; `None` when the branch is
    /// unreachable (probability below [`UNREACHABLE_BRANCH_PROB`]).
    pub state: Option<DensityMatrix>,
}

/// Full result of applying one kit: both outcome branches and the
/// non-selective (outcome-averaged) state.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyBranchSet {
    pub branches: [KitBranch; 2],
    pub non_selective: DensityMatrix,
}

/// Meter states imprinted by the coupling: alpha_0 = (cos psi, sin psi),
/// alpha_1 = (cos psi, -sin psi). At psi = 0 they coincide (no information),
/// at psi = pi/4 they are the orthogonal diagonal states.
pub fn meter_states(psi: KitStrength) -> (PureState, PureState) {
    let (sin, cos) = psi.angle().sin_cos();
    let alpha0 = PureState::qubit(cos, sin).expect("trig amplitudes are normalized");
    let alpha1 = PureState::qubit(cos, -sin).expect("trig amplitudes are normalized");
    (alpha0, alpha1)
}

/// Diagonal entry [basis, basis] of the outcome operator for a kit with the
/// given strength and readout angle. Single source of truth for the sign
/// conventions; [`kraus_pair`] and the allocation-free optimizer objectives
/// both evaluate exactly this.
#[inline]
pub fn kraus_entry(psi: f64, lambda: f64, outcome: u8, basis: usize) -> f64 {
    match (outcome, basis) {
        (0, 0) => (lambda - psi).cos(),
        (0, _) => (lambda + psi).cos(),
        (_, 0) => (psi - lambda).sin(),
        (_, _) => -(psi + lambda).sin(),
    }
}

/// The kit's Kraus pair on the measured qubit,
/// m0 = diag(cos(lambda-psi), cos(lambda+psi)),
/// m1 = diag(sin(psi-lambda), -sin(psi+lambda)).
/// Entries are the overlaps of the meter states with the readout basis;
/// any readout imperfection is classical and does not enter here.
pub fn kraus_pair(kit: &MeasurementKit) -> KrausPair {
    let psi = kit.strength.angle();
    let lambda = kit.meter_basis.angle();
    let m0 = SquareMatrix::from_real_diagonal(&[
        kraus_entry(psi, lambda, 0, 0),
        kraus_entry(psi, lambda, 0, 1),
    ])
    .expect("dim 2 is supported");
    let m1 = SquareMatrix::from_real_diagonal(&[
        kraus_entry(psi, lambda, 1, 0),
        kraus_entry(psi, lambda, 1, 1),
    ])
    .expect("dim 2 is supported");
    KrausPair { m0, m1 }
}

/// Apply one kit to the given qubit of a two-qubit state. Returns both
/// selective branches (probability and normalized post-measurement state)
/// and the non-selective state. Branch probabilities sum to 1 by Kraus
/// completeness.
pub fn apply_kit(
    rho: &DensityMatrix,
    kit: &MeasurementKit,
    target: Qubit,
) -> Result<StrategyBranchSet> {
    if rho.dim() != 4 {
        return Err(Error::UnsupportedDimension { dim: rho.dim() });
    }
    let pair = kraus_pair(kit);
    let id = SquareMatrix::identity(2)?;
    let mut branches = Vec::with_capacity(2);
    let mut non_selective = SquareMatrix::zeros(4)?;
    for outcome in 0..2u8 {
        let m = pair.operator(outcome);
        let lifted = match target {
            Qubit::A => m.tensor(&id)?,
            Qubit::B => id.tensor(m)?,
        };
        let (unnormalized, probability) = conjugate_map(rho, &lifted)?;
        non_selective = non_selective.add(&unnormalized);
        let state = if probability < UNREACHABLE_BRANCH_PROB {
            None
        } else {
            Some(DensityMatrix::new(unnormalized.scale_re(1.0 / probability))?)
        };
        branches.push(KitBranch {
            outcome,
            probability,
            state,
        });
    }
    Ok(StrategyBranchSet {
        branches: branches.try_into().expect("exactly two outcomes"),
        non_selective: DensityMatrix::new(non_selective)?,
    })
}

/// Conditional outcome probabilities of a kit on equal-prior basis inputs,
/// p(i|j) = |m_i[j,j]|^2, with the readout confusion applied when the kit
/// carries an imperfection, and the resulting knowledge estimate. For the
/// ideal diagonal-basis kit the value is |sin 2 psi| exactly.
pub fn knowledge_of_kit(kit: &MeasurementKit) -> KnowledgeEstimate {
    let pair = kraus_pair(kit);
    let mut conditionals = [[0.0f64; 2]; 2];
    for (j, row) in conditionals.iter_mut().enumerate() {
        for ideal in 0..2u8 {
            let entry = pair.diagonal_entry(ideal, j);
            let p_ideal = entry * entry;
            match kit.imperfection {
                None => row[usize::from(ideal)] += p_ideal,
                Some(pbs) => {
                    for observed in 0..2u8 {
                        row[usize::from(observed)] +=
                            p_ideal * pbs.flip_probability(ideal, observed);
                    }
                }
            }
        }
    }
    KnowledgeEstimate {
        value: knowledge_from_conditionals(&conditionals),
        conditionals,
    }
}

/// Convert a half-wave-plate angle theta_b in [0, pi/8] into the kit
/// strength psi = pi/4 - 2 theta_b, and evaluate the ideal-kit knowledge at
/// that strength. The returned knowledge equals |cos 4 theta_b|.
pub fn waveplate_to_strength(theta_b: f64) -> Result<(KitStrength, f64)> {
    let plates = WaveplateAngles::from_theta_b(theta_b)?;
    let psi = KitStrength::new(FRAC_PI_4 - 2.0 * plates.theta_b)?;
    let k = knowledge_of_kit(&MeasurementKit::ideal(psi)).value;
    Ok((psi, k))
}

/// The singlet (|01> - |10>)/sqrt(2) as a density matrix.
pub fn singlet_state() -> DensityMatrix {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let zero = Complex::new(0.0, 0.0);
    PureState::new(vec![
        zero,
        Complex::new(r, 0.0),
        Complex::new(-r, 0.0),
        zero,
    ])
    .expect("singlet amplitudes are normalized")
    .density()
}

/// Werner state p |singlet><singlet| + (1-p) I/4, the isotropically
/// depolarized singlet. Its concurrence is max(0, (3p-1)/2).
pub fn werner_state(p: f64) -> Result<DensityMatrix> {
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter {
            name: "p",
            value: p,
            expected: "a mixing weight in [0, 1]",
        });
    }
    let pure = singlet_state();
    let mixed = SquareMatrix::identity(4)?.scale_re((1.0 - p) / 4.0);
    DensityMatrix::new(pure.matrix().scale_re(p).add(&mixed))
}
