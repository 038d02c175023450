//! Finite-shot emulation: seeded outcome sampling through measurement
//! chains, knowledge estimation with binomial error bars, and two-qubit
//! state tomography (9 local Pauli settings, linear inversion, physicality
//! projection).
//!
//! Every sampler is deterministic in its seed; sweep points derive
//! per-point seeds with [`RngSeed::derive`] so concurrent evaluation cannot
//! change results.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::qcore::{
    hermitian_eigensystem, DensityMatrix, PauliAxis, SquareMatrix, DEFAULT_EIGEN_TOL,
};
use crate::strategies::{estimate_from_distributions, KitChain, KnowledgeEstimator};

/// Number of local Pauli-pair tomography settings.
pub const TOMOGRAPHY_SETTING_COUNT: u8 = 9;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the deterministic sampling generator. Identical seed and
/// identical request sequence give bitwise-identical outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// Statistically independent per-point seed: the base seed XOR a
    /// bijective hash of the point index. Derivation commutes with
    /// evaluation order, so parallel sweeps reproduce sequential ones.
    pub fn derive(self, index: u64) -> Self {
        Self(self.0 ^ splitmix64(index))
    }

    fn rng(self) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(self.0)
    }
}

/// Detected-event counts keyed by (input group, outcome-label sequence).
/// For kit chains the group is the prepared basis label (0 or 1); for
/// tomography it is the setting index (0..=8) and the sequence holds the
/// two local outcomes. Counts are reals so the infinite-shot limit can be
/// represented by analytic probabilities (group totals of 1).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ShotCounts {
    counts: BTreeMap<(u8, Vec<u8>), f64>,
    totals: BTreeMap<u8, f64>,
}

impl ShotCounts {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add `weight` detections of `sequence` under `group`.
    pub fn record(&mut self, group: u8, sequence: Vec<u8>, weight: f64) -> Result<()> {
        if !weight.is_finite() || weight <= 0.0 {
            return Err(Error::MalformedCounts {
                reason: format!("weight {weight} for group {group} sequence {sequence:?}"),
            });
        }
        if sequence.is_empty() {
            return Err(Error::MalformedCounts {
                reason: format!("empty outcome sequence in group {group}"),
            });
        }
        *self.counts.entry((group, sequence)).or_insert(0.0) += weight;
        *self.totals.entry(group).or_insert(0.0) += weight;
        Ok(())
    }

    /// Total weight recorded under `group` (0 when absent).
    pub fn total(&self, group: u8) -> f64 {
        self.totals.get(&group).copied().unwrap_or(0.0)
    }

    /// Empirical frequency of `sequence` within `group` (0 when absent).
    pub fn frequency(&self, group: u8, sequence: &[u8]) -> f64 {
        let total = self.total(group);
        if total <= 0.0 {
            return 0.0;
        }
        self.counts
            .get(&(group, sequence.to_vec()))
            .copied()
            .unwrap_or(0.0)
            / total
    }

    /// The outcome-weight distribution recorded under `group`.
    pub fn group(&self, group: u8) -> BTreeMap<Vec<u8>, f64> {
        self.counts
            .iter()
            .filter(|((g, _), _)| *g == group)
            .map(|((_, seq), &w)| (seq.clone(), w))
            .collect()
    }

    pub fn groups(&self) -> Vec<u8> {
        self.totals.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(u8, Vec<u8>), &f64)> {
        self.counts.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Draw `shots` samples from a categorical distribution given as
/// (label, weight) pairs, returning per-label counts. Inverse-CDF on one
/// uniform draw per shot.
fn sample_categorical<T: Clone>(
    entries: &[(T, f64)],
    shots: u64,
    rng: &mut ChaCha12Rng,
) -> Vec<(T, u64)> {
    let mut cumulative = Vec::with_capacity(entries.len());
    let mut acc = 0.0;
    for (_, w) in entries {
        acc += w;
        cumulative.push(acc);
    }
    let total = acc;
    let mut tallies = vec![0u64; entries.len()];
    for _ in 0..shots {
        let u = rng.gen::<f64>() * total;
        let pick = cumulative
            .partition_point(|&c| c <= u)
            .min(entries.len() - 1);
        tallies[pick] += 1;
    }
    entries
        .iter()
        .zip(tallies)
        .filter(|(_, n)| *n > 0)
        .map(|((label, _), n)| (label.clone(), n))
        .collect()
}

/// Sample `shots` runs of the chain on the given basis input. Each shot is
/// one sequential Born-rule pass through the kits, with readout
/// imperfections flipping the observed labels and mis-routing the
/// adaptation; the draw is taken from the exact joint law of the observed
/// sequence (the product of the stagewise conditionals, as computed by
/// [`KitChain::outcome_distribution`]), which is distributionally identical
/// to drawing stage by stage.
pub fn sample_kit_chain(
    input: u8,
    chain: &KitChain,
    shots: u64,
    seed: RngSeed,
) -> Result<ShotCounts> {
    if shots == 0 {
        return Err(Error::InvalidParameter {
            name: "shots",
            value: 0.0,
            expected: "at least one shot",
        });
    }
    let distribution = chain.outcome_distribution(input)?;
    let entries: Vec<(Vec<u8>, f64)> = distribution.into_iter().collect();
    let mut rng = seed.rng();
    let mut counts = ShotCounts::new();
    for (sequence, tally) in sample_categorical(&entries, shots, &mut rng) {
        counts.record(input, sequence, tally as f64)?;
    }
    Ok(counts)
}

/// The infinite-shot limit of [`sample_kit_chain`] for both basis inputs:
/// analytic sequence probabilities recorded as weights (group totals 1).
pub fn exact_kit_chain_counts(chain: &KitChain) -> Result<ShotCounts> {
    let mut counts = ShotCounts::new();
    for input in 0..2u8 {
        for (sequence, p) in chain.outcome_distribution(input)? {
            if p > 0.0 {
                counts.record(input, sequence, p)?;
            }
        }
    }
    Ok(counts)
}

/// Plug-in knowledge estimate from counts for both basis inputs, with the
/// binomial standard error
/// sigma = (1/2) sqrt(sum_{i,j} f(i|j) (1 - f(i|j)) / n_j),
/// each conditional frequency entering the estimator with coefficient 1/2.
/// On analytic weights (group totals 1) `k_hat` is the exact knowledge and
/// sigma is not meaningful.
pub fn estimate_knowledge(
    counts: &ShotCounts,
    estimator: KnowledgeEstimator,
) -> Result<(f64, f64)> {
    let dist0 = counts.group(0);
    let dist1 = counts.group(1);
    let estimate = estimate_from_distributions(&dist0, &dist1, estimator)?;
    let mut variance = 0.0;
    for (j, row) in estimate.conditionals.iter().enumerate() {
        let n = counts.total(j as u8);
        for &f in row {
            variance += f * (1.0 - f) / n;
        }
    }
    Ok((estimate.value, 0.5 * variance.sqrt()))
}

/// Tomography protocol: the 9 local Pauli-pair settings {X,Y,Z} x {X,Y,Z},
/// 4 outcomes each, a fixed number of shots per setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TomographySettings {
    shots_per_setting: u64,
}

impl TomographySettings {
    pub fn new(shots_per_setting: u64) -> Result<Self> {
        if shots_per_setting == 0 {
            return Err(Error::InvalidParameter {
                name: "shots_per_setting",
                value: 0.0,
                expected: "at least one shot per setting",
            });
        }
        Ok(Self { shots_per_setting })
    }

    pub fn shots_per_setting(self) -> u64 {
        self.shots_per_setting
    }
}

/// The measured Pauli axes (qubit A, qubit B) of a setting index in 0..=8;
/// settings enumerate {X,Y,Z} x {X,Y,Z} row-major.
pub fn setting_axes(setting: u8) -> Result<(PauliAxis, PauliAxis)> {
    if setting >= TOMOGRAPHY_SETTING_COUNT {
        return Err(Error::MissingSetting { setting });
    }
    Ok((
        PauliAxis::ALL[usize::from(setting / 3)],
        PauliAxis::ALL[usize::from(setting % 3)],
    ))
}

/// Eigenprojector of a Pauli axis: outcome 0 is the +1 eigenspace.
fn pauli_projector(axis: PauliAxis, outcome: u8) -> SquareMatrix {
    let sign = if outcome == 0 { 1.0 } else { -1.0 };
    let identity = SquareMatrix::identity(2).expect("dim 2 is valid");
    identity
        .add(&axis.matrix().scale_re(sign))
        .scale_re(0.5)
}

/// Born probabilities of the four outcome pairs (a, b) of one setting,
/// indexed 2a + b.
fn setting_probabilities(rho: &DensityMatrix, setting: u8) -> Result<[f64; 4]> {
    let (axis_a, axis_b) = setting_axes(setting)?;
    let mut probs = [0.0f64; 4];
    for a in 0..2u8 {
        for b in 0..2u8 {
            let projector = pauli_projector(axis_a, a).tensor(&pauli_projector(axis_b, b))?;
            probs[usize::from(2 * a + b)] = rho.matrix().mul(&projector).trace().re.max(0.0);
        }
    }
    Ok(probs)
}

/// Sample all 9 tomography settings on the state. Each setting draws
/// `shots_per_setting` outcomes from its 4-outcome Born distribution with
/// the per-setting derived seed `seed.derive(setting)`; counts are keyed by
/// setting index with outcome sequence [a, b].
pub fn simulate_tomography(
    rho: &DensityMatrix,
    settings: TomographySettings,
    seed: RngSeed,
) -> Result<ShotCounts> {
    if rho.dim() != 4 {
        return Err(Error::UnsupportedDimension { dim: rho.dim() });
    }
    let mut counts = ShotCounts::new();
    for setting in 0..TOMOGRAPHY_SETTING_COUNT {
        let probs = setting_probabilities(rho, setting)?;
        let entries: Vec<(Vec<u8>, f64)> = (0..4u8)
            .map(|k| (vec![k / 2, k % 2], probs[usize::from(k)]))
            .collect();
        let mut rng = seed.derive(u64::from(setting)).rng();
        for (sequence, tally) in
            sample_categorical(&entries, settings.shots_per_setting(), &mut rng)
        {
            counts.record(setting, sequence, tally as f64)?;
        }
    }
    Ok(counts)
}

/// The infinite-shot limit of [`simulate_tomography`]: analytic outcome
/// probabilities recorded as weights (setting totals 1).
pub fn exact_tomography_counts(rho: &DensityMatrix) -> Result<ShotCounts> {
    if rho.dim() != 4 {
        return Err(Error::UnsupportedDimension { dim: rho.dim() });
    }
    let mut counts = ShotCounts::new();
    for setting in 0..TOMOGRAPHY_SETTING_COUNT {
        let probs = setting_probabilities(rho, setting)?;
        for (k, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                counts.record(setting, vec![k as u8 / 2, k as u8 % 2], p)?;
            }
        }
    }
    Ok(counts)
}

/// A tomographic estimate: the linear-inversion matrix (Hermitian, unit
/// trace, possibly indefinite), its physicality projection, and the
/// Frobenius distance between them (0 exactly when the inversion was
/// already positive semidefinite).
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedState {
    pub raw: SquareMatrix,
    pub physical: DensityMatrix,
    pub distance: f64,
}

/// Project a Hermitian unit-trace matrix onto density matrices: clamp
/// negative eigenvalues to zero and renormalize the trace. Already-positive
/// input is returned unchanged with distance exactly 0, so the projection
/// is idempotent.
pub fn project_to_physical(raw: &SquareMatrix) -> Result<(DensityMatrix, f64)> {
    let eigen = hermitian_eigensystem(raw, DEFAULT_EIGEN_TOL)?;
    if eigen.values[0] >= 0.0 {
        return Ok((DensityMatrix::new(raw.clone())?, 0.0));
    }
    let clamped: Vec<f64> = eigen.values.iter().map(|&v| v.max(0.0)).collect();
    let norm: f64 = clamped.iter().sum();
    if norm <= 0.0 {
        return Err(Error::InvalidState {
            reason: "no positive eigenvalue to keep after the physicality clamp".into(),
        });
    }
    let dim = raw.dim();
    let mut rebuilt = SquareMatrix::zeros(dim)?;
    for (k, &w) in clamped.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let v = eigen.vector(k);
        for r in 0..dim {
            for c in 0..dim {
                let add = (v[r] * v[c].conj()).scale(w / norm);
                rebuilt.set(r, c, rebuilt.get(r, c) + add);
            }
        }
    }
    let physical = DensityMatrix::new(rebuilt)?;
    let distance = raw.sub(physical.matrix()).frobenius_norm();
    Ok((physical, distance))
}

/// Linear-inversion tomography from counts of all 9 settings: correlators
/// estimate the two-qubit Pauli coefficients S_ij (singles averaged over
/// the 3 settings that measure each local axis, S_00 = 1), the state is
/// rebuilt as (1/4) sum S_ij sigma_i x sigma_j, and the result is projected
/// to physicality.
pub fn reconstruct(counts: &ShotCounts) -> Result<ReconstructedState> {
    for ((group, sequence), _) in counts.iter() {
        if *group >= TOMOGRAPHY_SETTING_COUNT {
            return Err(Error::MalformedCounts {
                reason: format!("group {group} is not a tomography setting"),
            });
        }
        if sequence.len() != 2 || sequence.iter().any(|&o| o > 1) {
            return Err(Error::MalformedCounts {
                reason: format!("sequence {sequence:?} is not a local outcome pair"),
            });
        }
    }

    // s[i][j]: Pauli coefficients with index 0 = identity, 1..=3 = X, Y, Z.
    let mut s = [[0.0f64; 4]; 4];
    s[0][0] = 1.0;
    for setting in 0..TOMOGRAPHY_SETTING_COUNT {
        if counts.total(setting) <= 0.0 {
            return Err(Error::MissingSetting { setting });
        }
        let i = usize::from(setting / 3) + 1;
        let j = usize::from(setting % 3) + 1;
        for a in 0..2u8 {
            for b in 0..2u8 {
                let f = counts.frequency(setting, &[a, b]);
                let sign_a = 1.0 - 2.0 * f64::from(a);
                let sign_b = 1.0 - 2.0 * f64::from(b);
                s[i][j] += sign_a * sign_b * f;
                // Each local axis is measured in 3 settings; average them.
                s[i][0] += sign_a * f / 3.0;
                s[0][j] += sign_b * f / 3.0;
            }
        }
    }

    let identity = SquareMatrix::identity(2)?;
    let basis = |i: usize| -> SquareMatrix {
        if i == 0 {
            identity.clone()
        } else {
            PauliAxis::ALL[i - 1].matrix()
        }
    };
    let mut raw = SquareMatrix::zeros(4)?;
    for (i, row) in s.iter().enumerate() {
        for (j, &coefficient) in row.iter().enumerate() {
            let term = basis(i).tensor(&basis(j))?.scale_re(coefficient / 4.0);
            raw = raw.add(&term);
        }
    }

    let (physical, distance) = project_to_physical(&raw)?;
    Ok(ReconstructedState {
        raw,
        physical,
        distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entanglement::concurrence;
    use crate::measurement::{singlet_state, werner_state, KitStrength, MeasurementKit};
    use crate::qcore::Complex;
    use crate::strategies::{adaptive_coherent_pair, optimize_adaptive_pair};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};

    fn single_kit_chain(psi: f64) -> KitChain {
        KitChain::uniform(
            MeasurementKit::ideal(KitStrength::new(psi).unwrap()),
            1,
        )
    }

    fn random_density(rng: &mut ChaCha12Rng) -> DensityMatrix {
        // G G^dagger / tr for a uniform random complex G: full-rank almost
        // surely, valid by construction.
        let mut g = SquareMatrix::zeros(4).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                g.set(
                    r,
                    c,
                    Complex::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0),
                );
            }
        }
        let h = g.mul(&g.adjoint());
        let trace = h.trace().re;
        DensityMatrix::new(h.scale_re(1.0 / trace)).unwrap()
    }

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        let base = RngSeed::new(42);
        assert_eq!(base.derive(7), base.derive(7));
        assert_ne!(base.derive(0), base.derive(1));
        assert_ne!(base.derive(0).value(), base.value());
        assert_ne!(RngSeed::new(1).derive(5), RngSeed::new(2).derive(5));
    }

    #[test]
    fn sampling_is_bitwise_reproducible() {
        let chain = single_kit_chain(FRAC_PI_8);
        let a = sample_kit_chain(0, &chain, 10_000, RngSeed::new(9)).unwrap();
        let b = sample_kit_chain(0, &chain, 10_000, RngSeed::new(9)).unwrap();
        assert_eq!(a, b);
        let c = sample_kit_chain(0, &chain, 10_000, RngSeed::new(10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sampling_rejects_zero_shots() {
        let chain = single_kit_chain(FRAC_PI_8);
        assert!(sample_kit_chain(0, &chain, 0, RngSeed::new(1)).is_err());
    }

    #[test]
    fn projective_kit_sampling_is_deterministic() {
        let chain = single_kit_chain(FRAC_PI_4);
        let counts = sample_kit_chain(0, &chain, 1000, RngSeed::new(3)).unwrap();
        assert_eq!(counts.total(0), 1000.0);
        assert_eq!(counts.frequency(0, &[0]), 1.0);
    }

    #[test]
    fn single_kit_frequencies_match_born_probabilities() {
        let chain = single_kit_chain(FRAC_PI_8);
        let shots = 1_000_000u64;
        let counts = sample_kit_chain(0, &chain, shots, RngSeed::new(42)).unwrap();
        let p = (FRAC_PI_4 - FRAC_PI_8).cos().powi(2);
        let sigma = (p * (1.0 - p) / shots as f64).sqrt();
        assert!((counts.frequency(0, &[0]) - p).abs() <= 5.0 * sigma);
    }

    #[test]
    fn adaptive_pair_sampling_matches_analytic_marginal() {
        let psi = KitStrength::new(FRAC_PI_8).unwrap();
        let solution = optimize_adaptive_pair(psi, 1e-6).unwrap();
        let first = MeasurementKit::ideal(psi);
        let chain = KitChain::pair(
            first,
            first.with_meter_basis(solution.lambda0),
            first.with_meter_basis(solution.lambda1),
        );
        let analytic: f64 = chain
            .outcome_distribution(1)
            .unwrap()
            .iter()
            .filter(|(seq, _)| seq[1] == 1)
            .map(|(_, &p)| p)
            .sum();
        let shots = 1_000_000u64;
        let counts = sample_kit_chain(1, &chain, shots, RngSeed::new(7)).unwrap();
        let sampled =
            counts.frequency(1, &[0, 1]) + counts.frequency(1, &[1, 1]);
        let sigma = (analytic * (1.0 - analytic) / shots as f64).sqrt();
        assert!((sampled - analytic).abs() <= 5.0 * sigma);
    }

    #[test]
    fn exact_counts_reproduce_analytic_knowledge() {
        for i in 0..=10 {
            let psi = FRAC_PI_4 * f64::from(i) / 10.0;
            let counts = exact_kit_chain_counts(&single_kit_chain(psi)).unwrap();
            let (k_hat, _) =
                estimate_knowledge(&counts, KnowledgeEstimator::FirstOutcome).unwrap();
            assert!((k_hat - (2.0 * psi).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn knowledge_estimate_within_five_sigma_at_finite_shots() {
        let chain = single_kit_chain(FRAC_PI_8);
        let mut counts = sample_kit_chain(0, &chain, 10_000, RngSeed::new(11)).unwrap();
        let more = sample_kit_chain(1, &chain, 10_000, RngSeed::new(12)).unwrap();
        for ((group, seq), &w) in more.iter() {
            counts.record(*group, seq.clone(), w).unwrap();
        }
        let (k_hat, sigma) =
            estimate_knowledge(&counts, KnowledgeEstimator::FirstOutcome).unwrap();
        assert!(sigma > 0.0);
        assert!((k_hat - (2.0 * FRAC_PI_8).sin()).abs() <= 5.0 * sigma);

        let flat = single_kit_chain(0.0);
        let mut counts = sample_kit_chain(0, &flat, 10_000, RngSeed::new(13)).unwrap();
        let more = sample_kit_chain(1, &flat, 10_000, RngSeed::new(14)).unwrap();
        for ((group, seq), &w) in more.iter() {
            counts.record(*group, seq.clone(), w).unwrap();
        }
        let (k_hat, sigma) =
            estimate_knowledge(&counts, KnowledgeEstimator::FirstOutcome).unwrap();
        assert!(k_hat <= 5.0 * sigma);
    }

    #[test]
    fn estimate_rejects_single_group_counts() {
        let chain = single_kit_chain(FRAC_PI_8);
        let counts = sample_kit_chain(0, &chain, 100, RngSeed::new(1)).unwrap();
        assert!(matches!(
            estimate_knowledge(&counts, KnowledgeEstimator::FirstOutcome),
            Err(Error::EmptyCounts { group: 1 })
        ));
    }

    #[test]
    fn frequencies_converge_at_ten_million_shots() {
        // 100 seeded trials at 10^7 shots each; a 5-sigma band admits a
        // per-trial failure probability under 1e-6, so 99 of 100 passing is
        // a conservative gate.
        let chain = single_kit_chain(FRAC_PI_8);
        let p = (FRAC_PI_4 - FRAC_PI_8).cos().powi(2);
        let shots = 10_000_000u64;
        let sigma = (p * (1.0 - p) / shots as f64).sqrt();
        let base = RngSeed::new(20_260_817);
        let mut passes = 0;
        for trial in 0..100 {
            let counts = sample_kit_chain(0, &chain, shots, base.derive(trial)).unwrap();
            if (counts.frequency(0, &[0]) - p).abs() <= 5.0 * sigma {
                passes += 1;
            }
        }
        assert!(passes >= 99, "only {passes}/100 trials within 5 sigma");
    }

    #[test]
    fn tomography_setting_distributions_for_singlet_and_mixed() {
        let singlet = singlet_state();
        let counts = exact_tomography_counts(&singlet).unwrap();
        // Settings are row-major over {X,Y,Z}^2: XX = 0, ZZ = 8.
        for setting in [0u8, 8] {
            assert_relative_eq!(counts.frequency(setting, &[0, 1]), 0.5, epsilon = 1e-12);
            assert_relative_eq!(counts.frequency(setting, &[1, 0]), 0.5, epsilon = 1e-12);
            assert!(counts.frequency(setting, &[0, 0]) < 1e-12);
            assert!(counts.frequency(setting, &[1, 1]) < 1e-12);
        }

        let mixed = DensityMatrix::maximally_mixed(4).unwrap();
        let counts = exact_tomography_counts(&mixed).unwrap();
        for setting in 0..TOMOGRAPHY_SETTING_COUNT {
            for a in 0..2u8 {
                for b in 0..2u8 {
                    assert_relative_eq!(
                        counts.frequency(setting, &[a, b]),
                        0.25,
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn tomography_sampling_is_reproducible_with_full_totals() {
        let singlet = singlet_state();
        let settings = TomographySettings::new(2000).unwrap();
        let a = simulate_tomography(&singlet, settings, RngSeed::new(5)).unwrap();
        let b = simulate_tomography(&singlet, settings, RngSeed::new(5)).unwrap();
        assert_eq!(a, b);
        for setting in 0..TOMOGRAPHY_SETTING_COUNT {
            assert_eq!(a.total(setting), 2000.0);
        }
        assert!(TomographySettings::new(0).is_err());
    }

    #[test]
    fn exact_tomography_round_trip_on_random_states() {
        let mut rng = ChaCha12Rng::seed_from_u64(271_828);
        for _ in 0..100 {
            let rho = random_density(&mut rng);
            let counts = exact_tomography_counts(&rho).unwrap();
            let rebuilt = reconstruct(&counts).unwrap();
            assert!(rebuilt.raw.max_abs_diff(rho.matrix()) < 1e-10);
            assert!(rebuilt.physical.matrix().max_abs_diff(rho.matrix()) < 1e-10);
        }
    }

    #[test]
    fn reconstruct_exact_singlet_is_exact_with_zero_distance() {
        let singlet = singlet_state();
        let counts = exact_tomography_counts(&singlet).unwrap();
        let rebuilt = reconstruct(&counts).unwrap();
        assert_eq!(rebuilt.distance, 0.0);
        assert!(rebuilt.physical.matrix().max_abs_diff(singlet.matrix()) < 1e-12);
        assert_relative_eq!(concurrence(&rebuilt.physical).unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn reconstruct_exact_werner_concurrence() {
        let werner = werner_state(0.8).unwrap();
        let counts = exact_tomography_counts(&werner).unwrap();
        let rebuilt = reconstruct(&counts).unwrap();
        assert!((concurrence(&rebuilt.physical).unwrap() - 0.7).abs() < 1e-10);
    }

    #[test]
    fn projection_clamps_negative_eigenvalues_and_is_idempotent() {
        let singlet = singlet_state();
        // Hermitian, unit trace, one eigenvalue forced negative.
        let mut raw = singlet.matrix().scale_re(1.2);
        raw.set(0, 0, raw.get(0, 0) + Complex::new(-0.2, 0.0));
        let (physical, distance) = project_to_physical(&raw).unwrap();
        assert!(distance > 0.0);
        let eigen = hermitian_eigensystem(physical.matrix(), DEFAULT_EIGEN_TOL).unwrap();
        assert!(eigen.values[0] >= 0.0);
        assert_relative_eq!(physical.matrix().trace().re, 1.0, epsilon = 1e-12);

        let (again, second_distance) = project_to_physical(physical.matrix()).unwrap();
        assert_eq!(second_distance, 0.0);
        assert_eq!(again.matrix().max_abs_diff(physical.matrix()), 0.0);
    }

    #[test]
    fn reconstruct_rejects_missing_or_malformed_settings() {
        let singlet = singlet_state();
        let full = exact_tomography_counts(&singlet).unwrap();
        let mut partial = ShotCounts::new();
        for ((group, seq), &w) in full.iter() {
            if *group != 4 {
                partial.record(*group, seq.clone(), w).unwrap();
            }
        }
        assert!(matches!(
            reconstruct(&partial),
            Err(Error::MissingSetting { setting: 4 })
        ));

        let mut garbled = ShotCounts::new();
        garbled.record(11, vec![0, 0], 1.0).unwrap();
        assert!(matches!(
            reconstruct(&garbled),
            Err(Error::MalformedCounts { .. })
        ));

        let mut bad_sequence = ShotCounts::new();
        bad_sequence.record(0, vec![0, 1, 1], 1.0).unwrap();
        assert!(matches!(
            reconstruct(&bad_sequence),
            Err(Error::MalformedCounts { .. })
        ));
    }

    #[test]
    fn finite_shot_tomography_estimates_singlet_concurrence() {
        let singlet = singlet_state();
        let settings = TomographySettings::new(10_000).unwrap();
        let counts = simulate_tomography(&singlet, settings, RngSeed::new(42)).unwrap();
        let rebuilt = reconstruct(&counts).unwrap();
        let c_hat = concurrence(&rebuilt.physical).unwrap();
        assert!(
            (c_hat - 1.0).abs() <= 0.03,
            "c_hat = {c_hat} strayed from 1 beyond the calibrated band"
        );
    }

    #[test]
    fn end_to_end_adaptive_pair_reproduces_the_tradeoff() {
        // Sample the two-kit adaptive protocol, estimate K_tot from the
        // counts and C from finite-shot tomography of the exact final
        // state; both must sit on the optimal trade-off within statistical
        // tolerance (5 sigma for K, a calibrated 0.015 band for C).
        let singlet = singlet_state();
        let shots = 100_000u64;
        for (index, &psi_angle) in [FRAC_PI_8 / 1.5, FRAC_PI_8, FRAC_PI_8 * 1.5]
            .iter()
            .enumerate()
        {
            let psi = KitStrength::new(psi_angle).unwrap();
            let solution = optimize_adaptive_pair(psi, 1e-6).unwrap();
            let point =
                adaptive_coherent_pair(psi, solution.lambda0, solution.lambda1, &singlet)
                    .unwrap();

            let first = MeasurementKit::ideal(psi);
            let chain = KitChain::pair(
                first,
                first.with_meter_basis(solution.lambda0),
                first.with_meter_basis(solution.lambda1),
            );
            let base = RngSeed::new(1833).derive(index as u64);
            let mut counts = sample_kit_chain(0, &chain, shots, base.derive(100)).unwrap();
            let more = sample_kit_chain(1, &chain, shots, base.derive(200)).unwrap();
            for ((group, seq), &w) in more.iter() {
                counts.record(*group, seq.clone(), w).unwrap();
            }
            let (k_hat, sigma) =
                estimate_knowledge(&counts, KnowledgeEstimator::LastOutcome).unwrap();
            assert!(
                (k_hat - point.k_tot).abs() <= 5.0 * sigma,
                "k_hat = {k_hat} vs {} (sigma {sigma})",
                point.k_tot
            );

            let state = {
                let set = crate::measurement::apply_kit(&singlet, &first, crate::qcore::Qubit::B)
                    .unwrap();
                let mut total = SquareMatrix::zeros(4).unwrap();
                for branch in &set.branches {
                    let Some(branch_state) = &branch.state else { continue };
                    let second = if branch.outcome == 0 {
                        first.with_meter_basis(solution.lambda0)
                    } else {
                        first.with_meter_basis(solution.lambda1)
                    };
                    let ns = crate::measurement::apply_kit(branch_state, &second, crate::qcore::Qubit::B)
                        .unwrap()
                        .non_selective;
                    total = total.add(&ns.matrix().scale_re(branch.probability));
                }
                DensityMatrix::new(total).unwrap()
            };
            let settings = TomographySettings::new(shots).unwrap();
            let tomography = simulate_tomography(&state, settings, base.derive(300)).unwrap();
            let c_hat = concurrence(&reconstruct(&tomography).unwrap().physical).unwrap();
            let analytic = (1.0 - point.k_tot * point.k_tot).max(0.0).sqrt();
            assert!(
                (c_hat - analytic).abs() <= 0.015,
                "c_hat = {c_hat} vs analytic {analytic}"
            );
            assert!((point.c - analytic).abs() <= 1e-6);
        }
    }

    #[test]
    fn shot_counts_reject_bad_records() {
        let mut counts = ShotCounts::new();
        assert!(counts.record(0, vec![0], 0.0).is_err());
        assert!(counts.record(0, vec![0], -1.0).is_err());
        assert!(counts.record(0, vec![0], f64::NAN).is_err());
        assert!(counts.record(0, vec![], 1.0).is_err());
        assert!(counts.record(0, vec![0], 2.0).is_ok());
        assert_eq!(counts.total(0), 2.0);
        assert_eq!(counts.frequency(0, &[0]), 1.0);
        assert_eq!(counts.frequency(0, &[1]), 0.0);
        assert_eq!(counts.frequency(3, &[0]), 0.0);
    }
}
