//! Checks of the capacity chain, the bidirectional bound for causally
//! separable processes and the multiparty bound.

use serde::{Deserialize, Serialize};

use super::optimizer::{holevo_joint_with_warm, one_shot_with_solution, outcome_rows};
use super::{mutual_information_rows, one_shot_capacity, CapacityReport, OptimizerConfig};
use crate::error::{Error, Result};
use crate::link::{identity_choi, link_product, CPMap, DEFAULT_DIM_GUARD};
use crate::process::multipartite::{party_input, party_output, MultipartiteSeparableProcess};
use crate::process::{Direction, ProcessMatrix, SeparableProcess, A_I, A_O, B_I, B_O};
use crate::sampling::{random_isometry, seeded};
use crate::tensor::{LabeledOperator, Subsystem};

/// Optimiser slack for the pairwise ordering of estimates in the chain.
pub const CHAIN_SLACK: f64 = 1e-3;
pub const BIDIRECTIONAL_TOL: f64 = 1e-4;
pub const MULTIPARTY_TOL: f64 = 1e-3;
/// Slack on the hard `log2 d` bound.
const BOUND_SLACK: f64 = 1e-9;

/// Estimates along `I ≤ C^(1) ≤ C = χ ≤ C^E ≤ log2 d_{B_I}` for one process
/// and direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityChain {
    pub direction: Direction,
    /// Mutual information for uniform messages at the one-shot optimum.
    pub mutual_information_bits: f64,
    pub one_shot: CapacityReport,
    pub holevo: CapacityReport,
    /// Two-copy joint-encoding estimate, per copy.
    pub joint: CapacityReport,
    pub bound_bits: f64,
    pub holds: bool,
}

/// Estimates the whole chain. Each stage starts one restart from the
/// previous stage's optimum, so the estimates are ordered up to the inner
/// Blahut–Arimoto tolerance.
pub fn capacity_chain(w: &ProcessMatrix, direction: Direction, opt: &OptimizerConfig) -> Result<CapacityChain> {
    let (c1, s1) = one_shot_with_solution(w, direction, opt)?;
    let db = w.oriented(direction).dims().b_in;
    let rows = outcome_rows(&s1.gammas, s1.povm.as_ref().expect("one-shot solution has a POVM"), db);
    let uniform = vec![1.0 / rows.len() as f64; rows.len()];
    let i_bits = mutual_information_rows(&rows, &uniform);
    let (chi, s_chi) = holevo_joint_with_warm(w, direction, 1, opt, Some(&s1))?;
    let (joint, _) = holevo_joint_with_warm(w, direction, 2, opt, Some(&s_chi))?;
    let holds = check_capacity_chain(i_bits, &c1, &chi, &joint, db);
    Ok(CapacityChain {
        direction,
        mutual_information_bits: i_bits,
        bound_bits: (db as f64).log2(),
        one_shot: c1,
        holevo: chi,
        joint,
        holds,
    })
}

/// Every estimate is at most `log2 d_bi`, and consecutive estimates are
/// ordered within [`CHAIN_SLACK`].
pub fn check_capacity_chain(
    i_bits: f64,
    c1: &CapacityReport,
    c: &CapacityReport,
    ce: &CapacityReport,
    d_bi: usize,
) -> bool {
    let bound = (d_bi as f64).log2();
    let values = [i_bits, c1.value_bits, c.value_bits, ce.value_bits];
    let bounded = values.iter().all(|&v| v <= bound + BOUND_SLACK);
    let ordered = values.windows(2).all(|w| w[0] <= w[1] + CHAIN_SLACK);
    bounded && ordered
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BidirectionalCheck {
    pub lambda: f64,
    pub a_to_b_bits: f64,
    pub b_to_a_bits: f64,
    pub lhs_bits: f64,
    pub rhs_bits: f64,
    pub satisfied: bool,
}

/// `C^(1)_{A→B} + C^(1)_{B→A} ≤ λ log2 d_{A_I} + (1 − λ) log2 d_{B_I}` for
/// `W = λ W^{B≺A} + (1 − λ) W^{A≺B}`.
pub fn check_bidirectional_bound(sep: &SeparableProcess, opt: &OptimizerConfig) -> Result<BidirectionalCheck> {
    let w = &sep.mixture;
    let dims = w.dims();
    let ab = one_shot_capacity(w, Direction::AToB, opt)?.value_bits;
    let ba = one_shot_capacity(w, Direction::BToA, opt)?.value_bits;
    let lhs = ab + ba;
    let rhs = sep.lambda * (dims.a_in as f64).log2() + (1.0 - sep.lambda) * (dims.b_in as f64).log2();
    Ok(BidirectionalCheck {
        lambda: sep.lambda,
        a_to_b_bits: ab,
        b_to_a_bits: ba,
        lhs_bits: lhs,
        rhs_bits: rhs,
        satisfied: lhs <= rhs + BIDIRECTIONAL_TOL,
    })
}

/// Best one-shot estimate for the ordered pair `from → to`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCapacity {
    pub from: usize,
    pub to: usize,
    pub value_bits: f64,
    /// The completion of the remaining parties that achieved `value_bits`.
    pub completion: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultipartyCheck {
    pub parties: usize,
    pub pairs: Vec<PairCapacity>,
    pub lhs_bits: f64,
    pub rhs_bits: f64,
    pub satisfied: bool,
}

/// Reduces an `N`-party process to the bipartite process seen by `from`
/// (as Alice) and `to` (as Bob) once every other party `k` applies
/// `completions[k]` (a Choi matrix on `A{k}_I, A{k}_O`).
pub fn pairwise_process(
    w: &LabeledOperator,
    from: usize,
    to: usize,
    completions: &[(usize, LabeledOperator)],
) -> Result<ProcessMatrix> {
    if from == to {
        return Err(Error::InvalidArgument("a pair needs two distinct parties".into()));
    }
    let mut op = w.clone();
    for (_, choi) in completions {
        op = link_product(&op, choi)?;
    }
    let (fi, fo, ti, to_) = (party_input(from), party_output(from), party_input(to), party_output(to));
    let op = op.relabeled(&[(&fi, A_I), (&fo, A_O), (&ti, B_I), (&to_, B_O)])?;
    ProcessMatrix::new_unchecked(op)
}

#[derive(Clone, Copy, Debug)]
enum Completion {
    Discard,
    Relay,
    Random(usize),
}

impl Completion {
    fn describe(self) -> String {
        match self {
            Completion::Discard => "discard-and-reprepare".into(),
            Completion::Relay => "relay".into(),
            Completion::Random(s) => format!("random-{s}"),
        }
    }

    fn choi(self, k: usize, d_in: usize, d_out: usize, opt: &OptimizerConfig, parties: usize) -> Result<LabeledOperator> {
        let (i, o) = (party_input(k), party_output(k));
        match self {
            Completion::Discard => LabeledOperator::identity(vec![Subsystem::new(&i, d_in)])?
                .tensor(&LabeledOperator::maximally_mixed(vec![Subsystem::new(&o, d_out)])?),
            Completion::Relay => Ok(identity_choi(&i, &o, d_in)),
            Completion::Random(s) => {
                let seed = opt.seed.wrapping_add(0x9e37_79b9).wrapping_add((s * parties + k) as u64);
                let v = random_isometry(&mut seeded(seed), d_out * d_in * d_out, d_in);
                let map = CPMap::from_isometry(&v, &[Subsystem::new(&i, d_in)], &[Subsystem::new(&o, d_out)])?;
                Ok(map.choi().clone())
            }
        }
    }
}

/// `Σ_{i≠j} C^(1)_{i→j} ≤ N(N−1)/2 log2 d`.
///
/// Every other party applies the same kind of completion: discard and
/// reprepare `1/d`, an identity relay (when input and output dimensions
/// agree), or one of `opt.completion_samples` seeded random channels. The
/// pairwise value is the best over these completions.
pub fn check_multiparty_bound(msep: &MultipartiteSeparableProcess, opt: &OptimizerConfig) -> Result<MultipartyCheck> {
    let n = msep.parties;
    let d_in = msep.input_dims();
    let d_out = msep.output_dims();
    let d = d_in[0];
    if d_in.iter().any(|&x| x != d) {
        return Err(Error::DimMismatch(format!("party input dimensions {d_in:?} differ")));
    }
    let mixture = msep.mixture();
    if mixture.side() > DEFAULT_DIM_GUARD {
        return Err(Error::TooLarge { side: mixture.side(), limit: DEFAULT_DIM_GUARD });
    }
    let mut kinds = vec![Completion::Discard];
    if d_in.iter().zip(&d_out).all(|(a, b)| a == b) {
        kinds.push(Completion::Relay);
    }
    kinds.extend((0..opt.completion_samples).map(Completion::Random));

    let mut pairs = Vec::new();
    for from in 1..=n {
        for to in 1..=n {
            if from == to {
                continue;
            }
            let mut best: Option<PairCapacity> = None;
            for &kind in &kinds {
                let completions = (1..=n)
                    .filter(|&k| k != from && k != to)
                    .map(|k| Ok((k, kind.choi(k, d_in[k - 1], d_out[k - 1], opt, n)?)))
                    .collect::<Result<Vec<_>>>()?;
                let w = pairwise_process(&mixture, from, to, &completions)?;
                let value = one_shot_capacity(&w, Direction::AToB, opt)?.value_bits;
                if best.as_ref().is_none_or(|b| value > b.value_bits) {
                    best = Some(PairCapacity { from, to, value_bits: value, completion: kind.describe() });
                }
                if n == 2 {
                    break;
                }
            }
            pairs.push(best.expect("at least one completion"));
        }
    }
    let lhs: f64 = pairs.iter().map(|p| p.value_bits).sum();
    let rhs = (n * (n - 1)) as f64 / 2.0 * (d as f64).log2();
    Ok(MultipartyCheck {
        parties: n,
        pairs,
        lhs_bits: lhs,
        rhs_bits: rhs,
        satisfied: lhs <= rhs + MULTIPARTY_TOL,
    })
}
