//! Measurement strategies over sequential kits and their
//! knowledge-disturbance trade-offs: single partial measurement, incoherent
//! sub-ensemble sequence, independent coherent pair, outcome-adaptive
//! coherent pair with meter-basis optimization, the N-step generalization
//! over a branch tree, and weak-measurement scaling checks.
//!
//! Knowledge is always the basis-discrimination estimator of
//! [`crate::measurement::KnowledgeEstimate`] applied to the outcome
//! statistics a strategy produces on equal-prior basis inputs of the
//! measured qubit; disturbance is the concurrence of the fully
//! non-selective final two-qubit state.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::str::FromStr;

use crate::entanglement::concurrence;
use crate::error::{Error, Result};
use crate::measurement::{
    apply_kit, knowledge_from_conditionals, knowledge_of_kit, kraus_entry, kraus_pair,
    singlet_state, KitStrength, KnowledgeEstimate, MeasurementKit, MeterBasisAngle,
    UNREACHABLE_BRANCH_PROB,
};
use crate::qcore::{conjugate_map, DensityMatrix, PureState, Qubit, SquareMatrix};

/// Coarse-grid resolution of the pair optimizer (points per axis).
const PAIR_GRID_POINTS: usize = 181;
/// Refinement step budget of the pair optimizer.
const PAIR_REFINEMENT_CAP: usize = 10_000;
/// Sweep budget of the branch-tree optimizer. Coordinate ascent over the
/// node angles converges geometrically; the gap to the maximum reaches
/// rounding noise well within this many sweeps, and sweeps stop early once
/// one accepts no improvement.
const TREE_SWEEPS: usize = 40;

/// The four measurement strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    Single,
    Incoherent,
    Independent,
    Adaptive,
}

impl StrategyKind {
    pub fn label(self) -> &'static str {
        match self {
            StrategyKind::Single => "single",
            StrategyKind::Incoherent => "incoherent",
            StrategyKind::Independent => "independent",
            StrategyKind::Adaptive => "adaptive",
        }
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(StrategyKind::Single),
            "incoherent" => Ok(StrategyKind::Incoherent),
            "independent" => Ok(StrategyKind::Independent),
            "adaptive" => Ok(StrategyKind::Adaptive),
            other => Err(Error::InvalidState {
                reason: format!(
                    "unknown strategy {other:?}; expected single, incoherent, independent, or adaptive"
                ),
            }),
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// One point of a knowledge-disturbance trade-off curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffPoint {
    /// Single-kit knowledge of the strategy's constituent measurement.
    pub k_bar: f64,
    /// Accumulated knowledge of the whole strategy.
    pub k_tot: f64,
    /// Concurrence of the non-selective final state.
    pub c: f64,
    pub strategy: StrategyKind,
}

/// Result of optimizing the adaptive pair's meter angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveSolution {
    /// Second-kit meter angle on the first-outcome-0 branch.
    pub lambda0: MeterBasisAngle,
    /// Second-kit meter angle on the first-outcome-1 branch.
    pub lambda1: MeterBasisAngle,
    /// Maximized knowledge; always the objective re-evaluated at
    /// (lambda0, lambda1).
    pub k_tot: f64,
    /// False when the refinement budget ran out before both angle brackets
    /// shrank below the requested tolerance.
    pub converged: bool,
    /// Golden-section refinement steps spent.
    pub iterations: usize,
}

/// One stage of a measurement chain: either a fixed kit or a kit selected by
/// the observed outcome of the immediately preceding stage.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainStage {
    Fixed(MeasurementKit),
    Adapted {
        on_zero: MeasurementKit,
        on_one: MeasurementKit,
    },
}

/// A sequence of measurement kits applied to one qubit, with optional
/// outcome adaptation. The first stage must be `Fixed`.
#[derive(Debug, Clone, PartialEq)]
pub struct KitChain {
    pub stages: Vec<ChainStage>,
}

impl KitChain {
    /// Chain of `n` copies of the same kit.
    pub fn uniform(kit: MeasurementKit, n: usize) -> Self {
        Self {
            stages: vec![ChainStage::Fixed(kit); n],
        }
    }

    /// Two-kit chain with classical feed-forward on the first outcome.
    pub fn pair(first: MeasurementKit, on_zero: MeasurementKit, on_one: MeasurementKit) -> Self {
        Self {
            stages: vec![ChainStage::Fixed(first), ChainStage::Adapted { on_zero, on_one }],
        }
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        match self.stages.first() {
            None => Err(Error::InvalidState {
                reason: "measurement chain has no stages".into(),
            }),
            Some(ChainStage::Adapted { .. }) => Err(Error::InvalidState {
                reason: "the first chain stage has no outcome to adapt to".into(),
            }),
            Some(ChainStage::Fixed(_)) => Ok(()),
        }
    }

    /// Kit applied at `stage` given the previously observed outcome.
    pub fn kit_for(&self, stage: usize, previous_observed: Option<u8>) -> &MeasurementKit {
        match &self.stages[stage] {
            ChainStage::Fixed(kit) => kit,
            ChainStage::Adapted { on_zero, on_one } => match previous_observed {
                Some(1) => on_one,
                _ => on_zero,
            },
        }
    }

    /// P(observed outcome sequence | measured qubit prepared in basis state
    /// `input`), by exact density-matrix evolution through the chain.
    /// Readout imperfections branch the observed label classically and
    /// mis-route the adaptation; paths of probability below
    /// [`UNREACHABLE_BRANCH_PROB`] are dropped.
    pub fn outcome_distribution(&self, input: u8) -> Result<BTreeMap<Vec<u8>, f64>> {
        if input > 1 {
            return Err(Error::InvalidParameter {
                name: "input",
                value: f64::from(input),
                expected: "a basis label 0 or 1",
            });
        }
        self.validate()?;
        let state = PureState::basis(2, usize::from(input))?.density();
        let mut out = BTreeMap::new();
        let mut seq = Vec::with_capacity(self.len());
        self.walk_distribution(0, None, &state, 1.0, &mut seq, &mut out)?;
        Ok(out)
    }

    fn walk_distribution(
        &self,
        stage: usize,
        previous: Option<u8>,
        state: &DensityMatrix,
        weight: f64,
        seq: &mut Vec<u8>,
        out: &mut BTreeMap<Vec<u8>, f64>,
    ) -> Result<()> {
        if stage == self.len() {
            *out.entry(seq.clone()).or_insert(0.0) += weight;
            return Ok(());
        }
        let kit = self.kit_for(stage, previous);
        let pair = kraus_pair(kit);
        for ideal in 0..2u8 {
            let (unnormalized, p) = conjugate_map(state, pair.operator(ideal))?;
            if p < UNREACHABLE_BRANCH_PROB {
                continue;
            }
            let branch = DensityMatrix::new(unnormalized.scale_re(1.0 / p))?;
            match kit.imperfection {
                None => {
                    seq.push(ideal);
                    self.walk_distribution(stage + 1, Some(ideal), &branch, weight * p, seq, out)?;
                    seq.pop();
                }
                Some(pbs) => {
                    for observed in 0..2u8 {
                        let flip = pbs.flip_probability(ideal, observed);
                        if flip <= 0.0 {
                            continue;
                        }
                        seq.push(observed);
                        self.walk_distribution(
                            stage + 1,
                            Some(observed),
                            &branch,
                            weight * p * flip,
                            seq,
                            out,
                        )?;
                        seq.pop();
                    }
                }
            }
        }
        Ok(())
    }
}

/// How an outcome sequence is turned into a guess of the prepared basis
/// state when estimating knowledge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnowledgeEstimator {
    /// Guess the first kit's outcome (groups sequences by leading index).
    FirstOutcome,
    /// Guess the final kit's outcome.
    LastOutcome,
    /// Maximize over all outcome-to-guess assignments; equals the total
    /// variation distance between the two conditional sequence
    /// distributions.
    BestAssignment,
}

/// Apply a knowledge estimator to conditional outcome-sequence
/// distributions (weights may be probabilities or raw counts; each input's
/// weights are normalized by their own total).
pub fn estimate_from_distributions(
    dist0: &BTreeMap<Vec<u8>, f64>,
    dist1: &BTreeMap<Vec<u8>, f64>,
    estimator: KnowledgeEstimator,
) -> Result<KnowledgeEstimate> {
    let mut totals = [0.0f64; 2];
    for (group, dist) in [(0u8, dist0), (1u8, dist1)] {
        for (seq, &w) in dist {
            if seq.is_empty() || !w.is_finite() || w < 0.0 {
                return Err(Error::MalformedCounts {
                    reason: format!("group {group}: sequence {seq:?} with weight {w}"),
                });
            }
            totals[usize::from(group)] += w;
        }
        if totals[usize::from(group)] <= 0.0 {
            return Err(Error::EmptyCounts { group });
        }
    }
    let mut conditionals = [[0.0f64; 2]; 2];
    match estimator {
        KnowledgeEstimator::FirstOutcome | KnowledgeEstimator::LastOutcome => {
            for (j, dist) in [(0usize, dist0), (1usize, dist1)] {
                for (seq, &w) in dist {
                    let guess = match estimator {
                        KnowledgeEstimator::FirstOutcome => seq[0],
                        _ => *seq.last().expect("sequences are non-empty"),
                    };
                    conditionals[j][usize::from(guess.min(1))] += w / totals[j];
                }
            }
        }
        KnowledgeEstimator::BestAssignment => {
            let keys: std::collections::BTreeSet<&Vec<u8>> =
                dist0.keys().chain(dist1.keys()).collect();
            for seq in keys {
                let f0 = dist0.get(seq).copied().unwrap_or(0.0) / totals[0];
                let f1 = dist1.get(seq).copied().unwrap_or(0.0) / totals[1];
                let guess = usize::from(f0 < f1);
                conditionals[0][guess] += f0;
                conditionals[1][guess] += f1;
            }
        }
    }
    KnowledgeEstimate::from_conditionals(conditionals)
}

/// Knowledge extracted by a chain on equal-prior basis inputs.
pub fn knowledge_from_chain(
    chain: &KitChain,
    estimator: KnowledgeEstimator,
) -> Result<KnowledgeEstimate> {
    let dist0 = chain.outcome_distribution(0)?;
    let dist1 = chain.outcome_distribution(1)?;
    estimate_from_distributions(&dist0, &dist1, estimator)
}

/// Best-assignment knowledge of a chain: the total variation distance
/// between the outcome-sequence distributions of the two basis inputs.
pub fn best_assignment_knowledge(chain: &KitChain) -> Result<f64> {
    Ok(knowledge_from_chain(chain, KnowledgeEstimator::BestAssignment)?.value)
}

/// One partial measurement at the diagonal meter basis: k_bar = k_tot =
/// |sin 2 psi|, and on the singlet the concurrence is sqrt(1 - k^2).
pub fn single_coherent(psi: KitStrength, initial: &DensityMatrix) -> Result<TradeoffPoint> {
    let kit = MeasurementKit::ideal(psi);
    let k = knowledge_of_kit(&kit).value;
    let set = apply_kit(initial, &kit, Qubit::B)?;
    Ok(TradeoffPoint {
        k_bar: k,
        k_tot: k,
        c: concurrence(&set.non_selective)?,
        strategy: StrategyKind::Single,
    })
}

/// Incoherent sequence: each of the `n` steps projectively dephases the
/// measured qubit of a sub-ensemble of weight `k_bar` and leaves the rest
/// untouched, so the unmeasured fraction after n steps is (1-k_bar)^n and
/// k_tot = 1 - (1-k_bar)^n. Entries of the state that are off-diagonal in
/// the measured qubit decay by exactly the unmeasured fraction; on the
/// singlet the concurrence is 1 - k_tot.
pub fn incoherent_sequence(k_bar: f64, n: usize, initial: &DensityMatrix) -> Result<TradeoffPoint> {
    if !k_bar.is_finite() || !(0.0..=1.0).contains(&k_bar) {
        return Err(Error::InvalidParameter {
            name: "k_bar",
            value: k_bar,
            expected: "a single-step knowledge in [0, 1]",
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: 0.0,
            expected: "at least one step",
        });
    }
    if initial.dim() != 4 {
        return Err(Error::UnsupportedDimension { dim: initial.dim() });
    }
    let survive = (1.0 - k_bar).powi(n as i32);
    let mut mat = initial.matrix().clone();
    for r in 0..4 {
        for c in 0..4 {
            // Composite index 2a + b: low bit is the measured qubit B.
            if (r & 1) != (c & 1) {
                mat.set(r, c, mat.get(r, c).scale(survive));
            }
        }
    }
    let state = DensityMatrix::new(mat)?;
    Ok(TradeoffPoint {
        k_bar,
        k_tot: 1.0 - survive,
        c: concurrence(&state)?,
        strategy: StrategyKind::Incoherent,
    })
}

/// Two equal-strength kits at the diagonal meter basis applied in sequence,
/// the second ignorant of the first's outcome. k_tot applies the
/// single-measurement estimator after grouping the joint outcomes by the
/// first index; c is the concurrence after both non-selective steps. On the
/// singlet, k_tot = sin 2 psi and c = 1 - k_tot^2.
pub fn independent_coherent_pair(
    psi: KitStrength,
    initial: &DensityMatrix,
) -> Result<TradeoffPoint> {
    let kit = MeasurementKit::ideal(psi);
    let chain = KitChain::uniform(kit, 2);
    let estimate = knowledge_from_chain(&chain, KnowledgeEstimator::FirstOutcome)?;
    let first = apply_kit(initial, &kit, Qubit::B)?.non_selective;
    let second = apply_kit(&first, &kit, Qubit::B)?.non_selective;
    Ok(TradeoffPoint {
        k_bar: knowledge_of_kit(&kit).value,
        k_tot: estimate.value,
        c: concurrence(&second)?,
        strategy: StrategyKind::Independent,
    })
}

/// Two equal-strength kits with classical feed-forward: the first at the
/// diagonal basis, the second at meter angle `lambda0` or `lambda1`
/// depending on the first outcome. The guess is the second outcome,
/// marginalized over the first. On the singlet the concurrence is
/// cos^2(2 psi) for every angle pair: adaptation buys knowledge, not
/// reduced disturbance.
pub fn adaptive_coherent_pair(
    psi: KitStrength,
    lambda0: MeterBasisAngle,
    lambda1: MeterBasisAngle,
    initial: &DensityMatrix,
) -> Result<TradeoffPoint> {
    let first = MeasurementKit::ideal(psi);
    let on_zero = MeasurementKit::ideal(psi).with_meter_basis(lambda0);
    let on_one = MeasurementKit::ideal(psi).with_meter_basis(lambda1);
    let chain = KitChain::pair(first, on_zero, on_one);
    let estimate = knowledge_from_chain(&chain, KnowledgeEstimator::LastOutcome)?;

    let set = apply_kit(initial, &first, Qubit::B)?;
    let mut total = SquareMatrix::zeros(4)?;
    for branch in &set.branches {
        let Some(state) = &branch.state else { continue };
        let second = if branch.outcome == 0 { &on_zero } else { &on_one };
        let non_selective = apply_kit(state, second, Qubit::B)?.non_selective;
        total = total.add(&non_selective.matrix().scale_re(branch.probability));
    }
    let final_state = DensityMatrix::new(total)?;
    Ok(TradeoffPoint {
        k_bar: knowledge_of_kit(&first).value,
        k_tot: estimate.value,
        c: concurrence(&final_state)?,
        strategy: StrategyKind::Adaptive,
    })
}

/// The adaptive-pair knowledge as a closed function of the two second-kit
/// angles, via products of squared Kraus entries on basis inputs. This is
/// the optimizer objective; it agrees with the density-matrix evolution of
/// [`adaptive_coherent_pair`] to machine precision.
pub fn adaptive_pair_objective(psi: KitStrength, lambda0: f64, lambda1: f64) -> f64 {
    let p = psi.angle();
    let mut conditionals = [[0.0f64; 2]; 2];
    for (j, row) in conditionals.iter_mut().enumerate() {
        for o1 in 0..2u8 {
            let e1 = kraus_entry(p, FRAC_PI_4, o1, j);
            let w1 = e1 * e1;
            let lambda = if o1 == 0 { lambda0 } else { lambda1 };
            for o2 in 0..2u8 {
                let e2 = kraus_entry(p, lambda, o2, j);
                row[usize::from(o2)] += w1 * (e2 * e2);
            }
        }
    }
    knowledge_from_conditionals(&conditionals)
}

fn validate_tolerance(tol: f64) -> Result<()> {
    if !tol.is_finite() || tol <= 0.0 || tol > 1e-3 {
        return Err(Error::InvalidParameter {
            name: "tol",
            value: tol,
            expected: "a refinement tolerance in (0, 1e-3]",
        });
    }
    Ok(())
}

struct GoldenOutcome {
    x: f64,
    value: f64,
    bracket: f64,
}

/// Golden-section maximization on [lo, hi]. Ties shrink toward the left
/// (smaller angle). Each bracket shrink costs one step from the budget.
fn golden_max(
    f: &mut dyn FnMut(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    steps: &mut usize,
    cap: usize,
) -> GoldenOutcome {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    while hi - lo > tol && *steps < cap {
        let span = INV_PHI * (hi - lo);
        let x1 = hi - span;
        let x2 = lo + span;
        if f(x1) >= f(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
        *steps += 1;
    }
    let x = 0.5 * (lo + hi);
    GoldenOutcome {
        x,
        value: f(x),
        bracket: hi - lo,
    }
}

/// Maximize the adaptive-pair knowledge over (lambda0, lambda1) in
/// [0, pi/2]^2: a 181 x 181 coarse grid (ties broken toward the smallest
/// lambda0, then lambda1) followed by alternating per-axis golden-section
/// refinement down to an angle bracket below `tol`. Refinement moves are
/// accepted only on strict improvement, so flat directions (e.g. psi = 0)
/// keep the grid solution. Runs out of budget after 10,000 refinement
/// steps, in which case the best point so far is returned with
/// `converged: false`.
pub fn optimize_adaptive_pair(psi: KitStrength, tol: f64) -> Result<AdaptiveSolution> {
    validate_tolerance(tol)?;
    let objective = |l0: f64, l1: f64| adaptive_pair_objective(psi, l0, l1);

    let last = PAIR_GRID_POINTS - 1;
    let step = FRAC_PI_2 / last as f64;
    let mut best = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    for i in 0..PAIR_GRID_POINTS {
        let l0 = FRAC_PI_2 * i as f64 / last as f64;
        for j in 0..PAIR_GRID_POINTS {
            let l1 = FRAC_PI_2 * j as f64 / last as f64;
            let value = objective(l0, l1);
            if value > best.2 {
                best = (l0, l1, value);
            }
        }
    }
    let (mut l0, mut l1, mut value) = best;

    let mut steps = 0usize;
    let mut brackets = [f64::INFINITY; 2];
    for pass in 0..4 {
        let mut improved = false;
        for axis in 0..2 {
            let center = if axis == 0 { l0 } else { l1 };
            let lo = (center - step).max(0.0);
            let hi = (center + step).min(FRAC_PI_2);
            let outcome = golden_max(
                &mut |x| {
                    if axis == 0 {
                        objective(x, l1)
                    } else {
                        objective(l0, x)
                    }
                },
                lo,
                hi,
                tol,
                &mut steps,
                PAIR_REFINEMENT_CAP,
            );
            brackets[axis] = outcome.bracket;
            if outcome.value > value {
                if axis == 0 {
                    l0 = outcome.x;
                } else {
                    l1 = outcome.x;
                }
                value = outcome.value;
                improved = true;
            }
        }
        if !improved && pass > 0 {
            break;
        }
    }

    Ok(AdaptiveSolution {
        lambda0: MeterBasisAngle::new(l0)?,
        lambda1: MeterBasisAngle::new(l1)?,
        k_tot: objective(l0, l1),
        converged: brackets[0] <= tol && brackets[1] <= tol,
        iterations: steps,
    })
}

/// One leaf of a branch tree: the probability of its outcome path and the
/// normalized post-measurement state, omitted when the path is unreachable.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchLeaf {
    pub probability: f64,
    pub state: Option<DensityMatrix>,
}

/// A depth-N adaptive measurement tree on the singlet: one equal-strength
/// kit per node, the meter angle of each node conditioned on the full
/// outcome history. Nodes are heap-indexed (children of node i are 2i+1 on
/// outcome 0 and 2i+2 on outcome 1); leaves are indexed by the outcome
/// bits, first outcome most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchTree {
    pub depth: usize,
    pub strength: KitStrength,
    pub nodes: Vec<MeterBasisAngle>,
    pub leaves: Vec<BranchLeaf>,
}

impl BranchTree {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

/// Tree knowledge objective: conditional probability of each final outcome
/// on basis inputs, guessing the final kit's outcome, all through products
/// of squared Kraus entries.
fn tree_knowledge(psi: f64, angles: &[f64]) -> f64 {
    let mut conditionals = [[0.0f64; 2]; 2];
    for (j, row) in conditionals.iter_mut().enumerate() {
        tree_walk(psi, angles, 0, j, 1.0, row);
    }
    knowledge_from_conditionals(&conditionals)
}

fn tree_walk(psi: f64, angles: &[f64], node: usize, j: usize, weight: f64, row: &mut [f64; 2]) {
    let lambda = angles[node];
    for outcome in 0..2u8 {
        let entry = kraus_entry(psi, lambda, outcome, j);
        let w = weight * (entry * entry);
        let child = 2 * node + 1 + usize::from(outcome);
        if child >= angles.len() {
            row[usize::from(outcome)] += w;
        } else {
            tree_walk(psi, angles, child, j, w, row);
        }
    }
}

/// Depth-N adaptive strategy on the singlet: greedy coordinate ascent over
/// all 2^N - 1 node angles (golden-section refinement per node,
/// strict-improvement acceptance, sweeps until one improves nothing), then
/// exact evolution of the singlet through the optimized tree. The non-selective concurrence is
/// cos^N(2 psi) regardless of the angles; the returned k_tot is the
/// maximized final-outcome knowledge.
pub fn adaptive_sequence(
    psi: KitStrength,
    n: usize,
    tol: f64,
) -> Result<(BranchTree, TradeoffPoint)> {
    if !(1..=8).contains(&n) {
        return Err(Error::InvalidParameter {
            name: "n",
            value: n as f64,
            expected: "a measurement count in [1, 8]",
        });
    }
    validate_tolerance(tol)?;
    let p = psi.angle();
    let node_count = (1usize << n) - 1;
    let mut angles = vec![FRAC_PI_4; node_count];
    let mut value = tree_knowledge(p, &angles);
    let mut steps = 0usize;
    // Generous cap: the sweep count, not the budget, bounds the work.
    let cap = 100_000 * node_count;
    for _ in 0..TREE_SWEEPS {
        let mut improved = false;
        for node in 0..node_count {
            let kept = angles[node];
            let outcome = golden_max(
                &mut |x| {
                    angles[node] = x;
                    tree_knowledge(p, &angles)
                },
                0.0,
                FRAC_PI_2,
                tol,
                &mut steps,
                cap,
            );
            if outcome.value > value {
                angles[node] = outcome.x;
                value = outcome.value;
                improved = true;
            } else {
                angles[node] = kept;
            }
        }
        if !improved {
            break;
        }
    }

    // Exact selective evolution of the singlet through the optimized tree.
    let initial = singlet_state();
    let mut leaves = vec![
        BranchLeaf {
            probability: 0.0,
            state: None
        };
        1 << n
    ];
    let mut non_selective = SquareMatrix::zeros(4)?;
    let identity = SquareMatrix::identity(2)?;
    let mut stack = vec![(0usize, 0usize, initial.matrix().clone())];
    while let Some((node, path, mat)) = stack.pop() {
        let kit = MeasurementKit::ideal(psi).with_meter_basis(MeterBasisAngle::new(angles[node])?);
        let pair = kraus_pair(&kit);
        for outcome in 0..2u8 {
            let lifted = identity.tensor(pair.operator(outcome))?;
            let evolved = lifted.mul(&mat).mul(&lifted.adjoint());
            let child = 2 * node + 1 + usize::from(outcome);
            let child_path = (path << 1) | usize::from(outcome);
            if child >= node_count {
                let probability = evolved.trace().re;
                non_selective = non_selective.add(&evolved);
                leaves[child_path] = BranchLeaf {
                    probability,
                    state: if probability < UNREACHABLE_BRANCH_PROB {
                        None
                    } else {
                        Some(DensityMatrix::new(evolved.scale_re(1.0 / probability))?)
                    },
                };
            } else {
                stack.push((child, child_path, evolved));
            }
        }
    }

    let tree = BranchTree {
        depth: n,
        strength: psi,
        nodes: angles
            .iter()
            .map(|&a| MeterBasisAngle::new(a))
            .collect::<Result<Vec<_>>>()?,
        leaves,
    };
    let point = TradeoffPoint {
        k_bar: knowledge_of_kit(&MeasurementKit::ideal(psi)).value,
        k_tot: tree_knowledge(p, &angles),
        c: concurrence(&DensityMatrix::new(non_selective)?)?,
        strategy: StrategyKind::Adaptive,
    };
    Ok((tree, point))
}

/// Trade-off points of one strategy on the singlet across a grid of
/// single-step knowledge values, inverting k_bar = sin 2 psi for the
/// coherent strategies. `n` must match the strategy's step count (1 for
/// single, 2 for independent; incoherent takes any n >= 1, adaptive
/// n in [1, 8]).
pub fn accumulation_curve(
    strategy: StrategyKind,
    k_bar_grid: &[f64],
    n: usize,
) -> Result<Vec<TradeoffPoint>> {
    match strategy {
        StrategyKind::Single if n != 1 => {
            return Err(Error::InvalidParameter {
                name: "n",
                value: n as f64,
                expected: "1 for the single strategy",
            })
        }
        StrategyKind::Independent if n != 2 => {
            return Err(Error::InvalidParameter {
                name: "n",
                value: n as f64,
                expected: "2 for the independent pair",
            })
        }
        StrategyKind::Incoherent if n == 0 => {
            return Err(Error::InvalidParameter {
                name: "n",
                value: 0.0,
                expected: "at least one step",
            })
        }
        StrategyKind::Adaptive if !(1..=8).contains(&n) => {
            return Err(Error::InvalidParameter {
                name: "n",
                value: n as f64,
                expected: "a measurement count in [1, 8]",
            })
        }
        _ => {}
    }
    let singlet = singlet_state();
    let mut points = Vec::with_capacity(k_bar_grid.len());
    for &k_bar in k_bar_grid {
        let point = match strategy {
            StrategyKind::Single => single_coherent(KitStrength::from_knowledge(k_bar)?, &singlet)?,
            StrategyKind::Incoherent => incoherent_sequence(k_bar, n, &singlet)?,
            StrategyKind::Independent => {
                independent_coherent_pair(KitStrength::from_knowledge(k_bar)?, &singlet)?
            }
            StrategyKind::Adaptive => {
                let psi = KitStrength::from_knowledge(k_bar)?;
                match n {
                    1 => {
                        let mut point = single_coherent(psi, &singlet)?;
                        point.strategy = StrategyKind::Adaptive;
                        point
                    }
                    2 => {
                        let solution = optimize_adaptive_pair(psi, 1e-6)?;
                        adaptive_coherent_pair(psi, solution.lambda0, solution.lambda1, &singlet)?
                    }
                    _ => adaptive_sequence(psi, n, 1e-6)?.1,
                }
            }
        };
        points.push(point);
    }
    Ok(points)
}

/// Residuals of the weak-measurement expansions of the concurrence after n
/// steps, per grid point: |C - (1 - n k_bar^2 / 2)| for the coherent
/// adaptive strategy (whose non-selective disturbance is
/// adaptation-independent) and |C - (1 - n k_bar)| for the incoherent one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZenoResidualRow {
    pub k_bar: f64,
    pub adaptive: f64,
    pub incoherent: f64,
}

/// Evaluate both expansion residuals over a weak-measurement grid; grid
/// values must lie in (0, 0.3].
pub fn zeno_residuals(n: usize, k_bar_grid: &[f64]) -> Result<Vec<ZenoResidualRow>> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: 0.0,
            expected: "at least one step",
        });
    }
    let singlet = singlet_state();
    let mut rows = Vec::with_capacity(k_bar_grid.len());
    for &k_bar in k_bar_grid {
        if !k_bar.is_finite() || k_bar <= 0.0 || k_bar > 0.3 {
            return Err(Error::InvalidParameter {
                name: "k_bar",
                value: k_bar,
                expected: "a weak-measurement knowledge in (0, 0.3]",
            });
        }
        let psi = KitStrength::from_knowledge(k_bar)?;
        let kit = MeasurementKit::ideal(psi);
        let mut state = singlet.clone();
        for _ in 0..n {
            state = apply_kit(&state, &kit, Qubit::B)?.non_selective;
        }
        let c_coherent = concurrence(&state)?;
        let c_incoherent = incoherent_sequence(k_bar, n, &singlet)?.c;
        let steps = n as f64;
        rows.push(ZenoResidualRow {
            k_bar,
            adaptive: (c_coherent - (1.0 - steps * k_bar * k_bar / 2.0)).abs(),
            incoherent: (c_incoherent - (1.0 - steps * k_bar)).abs(),
        });
    }
    Ok(rows)
}
