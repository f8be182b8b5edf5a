//! Randomised search for violations of the entropic causal inequality
//! `I(m':m) + I(k':k) ≤ log2 d` and of the bidirectional capacity bound.
//!
//! Alice receives a message `m`, applies an instrument whose outcome `k'` is
//! her guess of Bob's message; Bob receives `k` and guesses `m'`. Linking
//! both instruments with the process gives a single joint law
//! `P(m', k' | m, k)`.
//!
//! Trial `i` uses seed `base_seed + i`, so a run with `trials = a + b` is the
//! union of a run of `a` trials and a run of `b` trials seeded at
//! `base_seed + a`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::{check_bidirectional_bound, mutual_information_rows, OptimizerConfig};
use crate::error::{Error, Result};
use crate::link::{choi_from_isometry, Instrument};
use crate::process::{
    mix_processes, random_ordered_process, Direction, ProcessDims, ProcessMatrix, A_I, A_O, B_I, B_O,
};
use crate::sampling::{complex_gaussian, isometry_from_generator, random_isometry, random_unitary, seeded, SeededRng};
use crate::tensor::{CMatrix, C64};

/// Gap above the right-hand side before a value is reported as a violation.
pub const VIOLATION_TOL: f64 = 1e-6;
const HISTOGRAM_BINS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstrumentMode {
    /// Measure-and-reprepare instruments only (computational and random bases).
    Fixed,
    /// Additionally hill-climbs fully parameterised instruments for both parties.
    PerDirection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub trials: usize,
    pub dims: ProcessDims,
    pub seed: u64,
    pub instrument_mode: InstrumentMode,
    /// Budget for the instrument hill climb and the bidirectional check.
    pub optimizer: OptimizerConfig,
    /// Minimum weight of the uniform process in each sampled ordered term.
    pub noise_floor: f64,
    /// Random measure-and-reprepare bases tried per trial.
    pub random_bases: usize,
    /// Also estimate both one-shot capacities and check the bidirectional bound.
    pub check_bidirectional: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            dims: ProcessDims::uniform(2),
            seed: 0,
            instrument_mode: InstrumentMode::PerDirection,
            optimizer: OptimizerConfig { restarts: 2, steps: 60, ..OptimizerConfig::default() },
            noise_floor: 0.05,
            random_bases: 4,
            check_bidirectional: true,
        }
    }
}

impl SearchConfig {
    pub fn check(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        self.optimizer.check()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BidirectionalRecord {
    pub lambda: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

/// One line of the JSON-lines stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bidirectional: Option<BidirectionalRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    Entropic,
    Bidirectional,
}

/// Everything needed to reproduce a flagged trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub seed: u64,
    pub kind: ViolationKind,
    pub lhs: f64,
    pub rhs: f64,
    pub process: ProcessMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    /// `None` for the overflow bin.
    pub upper: Option<f64>,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub trials: usize,
    pub best_lhs_bits: f64,
    pub best_rhs_bits: f64,
    pub best_seed: u64,
    pub histogram: Vec<HistogramBin>,
    pub violations: Vec<Violation>,
}

impl SearchResult {
    /// `lower,upper,count` rows.
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("lower,upper,count\n");
        for b in &self.histogram {
            let upper = b.upper.map_or_else(|| "inf".to_string(), |u| u.to_string());
            out.push_str(&format!("{},{},{}\n", b.lower, upper, b.count));
        }
        out
    }
}

/// Raw Choi matrices of an instrument family: `elements[input][outcome]`.
type RawInstrument = Vec<Vec<CMatrix>>;

fn instrument_to_raw(inst: &[Instrument], input: &str, output: &str) -> Result<RawInstrument> {
    inst.iter()
        .map(|i| {
            i.elements()
                .iter()
                .map(|e| {
                    if e.inputs() != [input] || e.outputs() != [output] {
                        return Err(Error::NotAnInstrument(format!(
                            "element maps {:?} -> {:?}, expected [{input}] -> [{output}]",
                            e.inputs(),
                            e.outputs()
                        )));
                    }
                    Ok(e.choi().matrix().clone())
                })
                .collect()
        })
        .collect()
}

/// `P[m][k][m'][k']` from a process and both parties' instruments.
struct JointLaw {
    p: Vec<Vec<Vec<Vec<f64>>>>,
}

fn joint_law(w: &CMatrix, na: usize, nb: usize, a: &RawInstrument, b: &RawInstrument) -> JointLaw {
    // T^{k,m'}[x, x2] = Σ_{y, y2} W[(x, y), (x2, y2)] B^k_{m'}[y, y2]
    let t: Vec<Vec<CMatrix>> = b
        .iter()
        .map(|per_input| {
            per_input
                .iter()
                .map(|bel| {
                    CMatrix::from_fn(na, na, |x, x2| {
                        let mut acc = C64::new(0.0, 0.0);
                        for y in 0..nb {
                            for y2 in 0..nb {
                                acc += w[(x * nb + y, x2 * nb + y2)] * bel[(y, y2)];
                            }
                        }
                        acc
                    })
                })
                .collect()
        })
        .collect();
    let p = a
        .iter()
        .map(|a_m| {
            t.iter()
                .map(|t_k| {
                    t_k.iter()
                        .map(|t_km| a_m.iter().map(|ael| ael.component_mul(t_km).sum().re.max(0.0)).collect())
                        .collect()
                })
                .collect()
        })
        .collect();
    JointLaw { p }
}

impl JointLaw {
    /// `(I(m':m), I(k':k))`.
    fn informations(&self, pm: &[f64], pk: &[f64]) -> (f64, f64) {
        let n_mp = self.p[0][0].len();
        let n_kp = self.p[0][0][0].len();
        let bob: Vec<Vec<f64>> = self
            .p
            .iter()
            .map(|p_m| {
                let mut row = vec![0.0; n_mp];
                for (k, p_mk) in p_m.iter().enumerate() {
                    for (mp, r) in p_mk.iter().enumerate() {
                        row[mp] += pk[k] * r.iter().sum::<f64>();
                    }
                }
                normalize(row)
            })
            .collect();
        let alice: Vec<Vec<f64>> = (0..pk.len())
            .map(|k| {
                let mut row = vec![0.0; n_kp];
                for (m, p_m) in self.p.iter().enumerate() {
                    for r in &p_m[k] {
                        for (kp, x) in r.iter().enumerate() {
                            row[kp] += pm[m] * x;
                        }
                    }
                }
                normalize(row)
            })
            .collect();
        (mutual_information_rows(&bob, pm), mutual_information_rows(&alice, pk))
    }
}

fn normalize(mut row: Vec<f64>) -> Vec<f64> {
    let s: f64 = row.iter().sum();
    if s > 0.0 {
        row.iter_mut().for_each(|x| *x /= s);
    }
    row
}

fn check_dist(p: &[f64], n: usize, what: &str) -> Result<()> {
    if p.len() != n {
        return Err(Error::DimMismatch(format!("{what}: {} probabilities for {n} messages", p.len())));
    }
    let s: f64 = p.iter().sum();
    if p.iter().any(|&x| x < 0.0) || (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("{what} is not a distribution")));
    }
    Ok(())
}

/// `I(m':m) + I(k':k)` for the joint law produced by `w` and the given
/// instruments. `a_inst[m]` is Alice's instrument on message `m` (outcomes
/// `k'`), `b_inst[k]` Bob's on message `k` (outcomes `m'`).
pub fn entropic_causal_inequality_value(
    w: &ProcessMatrix,
    a_inst: &[Instrument],
    b_inst: &[Instrument],
    input_dists: (&[f64], &[f64]),
) -> Result<f64> {
    if a_inst.is_empty() || b_inst.is_empty() {
        return Err(Error::NotAnInstrument("each party needs at least one instrument".into()));
    }
    let a = instrument_to_raw(a_inst, A_I, A_O)?;
    let b = instrument_to_raw(b_inst, B_I, B_O)?;
    let (n_kp, n_mp) = (a[0].len(), b[0].len());
    if a.iter().any(|x| x.len() != n_kp) || b.iter().any(|x| x.len() != n_mp) {
        return Err(Error::NotAnInstrument("instruments of one party must share their outcome set".into()));
    }
    check_dist(input_dists.0, a.len(), "Alice's message law")?;
    check_dist(input_dists.1, b.len(), "Bob's message law")?;
    let dims = w.dims();
    let law = joint_law(w.op().matrix(), dims.a_in * dims.a_out, dims.b_in * dims.b_out, &a, &b);
    let (i_m, i_k) = law.informations(input_dists.0, input_dists.1);
    Ok(i_m + i_k)
}

/// Geometry of one party's instrument family.
#[derive(Clone, Copy)]
struct Side {
    d_in: usize,
    d_out: usize,
    inputs: usize,
    outcomes: usize,
}

fn measure_and_reprepare(side: Side, measure: &CMatrix, prepare: &CMatrix) -> RawInstrument {
    (0..side.inputs)
        .map(|m| {
            let prep = prepare.column(m % side.d_out);
            let sigma = prep * prep.adjoint();
            (0..side.outcomes)
                .map(|k| {
                    if k < side.d_in {
                        let v = measure.column(k);
                        let e = (v * v.adjoint()).transpose();
                        e.kronecker(&sigma)
                    } else {
                        CMatrix::zeros(side.d_in * side.d_out, side.d_in * side.d_out)
                    }
                })
                .collect()
        })
        .collect()
}

/// Each input's instrument is an isometry `C^{d_in} -> C^{K} ⊗ C^{d_out} ⊗ C^{d_in}`;
/// outcome `k` keeps the `k`-th row block.
fn parameterised(side: Side, isometries: &[CMatrix]) -> RawInstrument {
    let block = side.d_out * side.d_in;
    isometries
        .iter()
        .map(|v| {
            (0..side.outcomes)
                .map(|k| choi_from_isometry(&v.rows(k * block, block).into_owned(), side.d_in, side.d_out))
                .collect()
        })
        .collect()
}

fn perturb(v: &CMatrix, step: f64, rng: &mut SeededRng) -> CMatrix {
    let scale = step / (v.nrows() as f64).sqrt();
    isometry_from_generator(&(v + complex_gaussian(rng, v.nrows(), v.ncols()) * C64::new(scale, 0.0)))
}

struct Evaluator<'a> {
    w: &'a CMatrix,
    na: usize,
    nb: usize,
    pm: Vec<f64>,
    pk: Vec<f64>,
}

impl Evaluator<'_> {
    fn value(&self, a: &RawInstrument, b: &RawInstrument) -> f64 {
        let (x, y) = joint_law(self.w, self.na, self.nb, a, b).informations(&self.pm, &self.pk);
        x + y
    }
}

/// Best inequality value over the instrument families in `cfg`, drawing
/// random bases and starting points from `rng`.
fn best_inequality_value(w: &ProcessMatrix, cfg: &SearchConfig, rng: &mut SeededRng) -> f64 {
    let dims = w.dims();
    // Messages: Alice's m is guessed by Bob on his input space, and vice versa.
    let alice = Side { d_in: dims.a_in, d_out: dims.a_out, inputs: dims.b_in, outcomes: dims.a_in };
    let bob = Side { d_in: dims.b_in, d_out: dims.b_out, inputs: dims.a_in, outcomes: dims.b_in };
    let ev = Evaluator {
        w: w.op().matrix(),
        na: dims.a_in * dims.a_out,
        nb: dims.b_in * dims.b_out,
        pm: vec![1.0 / alice.inputs as f64; alice.inputs],
        pk: vec![1.0 / bob.inputs as f64; bob.inputs],
    };
    let eye = |d: usize| CMatrix::identity(d, d);
    let mut best = ev.value(
        &measure_and_reprepare(alice, &eye(alice.d_in), &eye(alice.d_out)),
        &measure_and_reprepare(bob, &eye(bob.d_in), &eye(bob.d_out)),
    );
    for _ in 0..cfg.random_bases {
        let a = measure_and_reprepare(alice, &random_unitary(rng, alice.d_in), &random_unitary(rng, alice.d_out));
        let b = measure_and_reprepare(bob, &random_unitary(rng, bob.d_in), &random_unitary(rng, bob.d_out));
        best = best.max(ev.value(&a, &b));
    }
    if cfg.instrument_mode == InstrumentMode::PerDirection {
        let rows = |s: Side| s.outcomes * s.d_out * s.d_in;
        for _ in 0..cfg.optimizer.restarts {
            let mut va: Vec<CMatrix> = (0..alice.inputs).map(|_| random_isometry(rng, rows(alice), alice.d_in)).collect();
            let mut vb: Vec<CMatrix> = (0..bob.inputs).map(|_| random_isometry(rng, rows(bob), bob.d_in)).collect();
            let mut current = ev.value(&parameterised(alice, &va), &parameterised(bob, &vb));
            let mut step = cfg.optimizer.step_init;
            for _ in 0..cfg.optimizer.steps {
                let na: Vec<CMatrix> = va.iter().map(|v| perturb(v, step, rng)).collect();
                let nb: Vec<CMatrix> = vb.iter().map(|v| perturb(v, step, rng)).collect();
                let value = ev.value(&parameterised(alice, &na), &parameterised(bob, &nb));
                if value > current {
                    (va, vb, current) = (na, nb, value);
                } else {
                    step *= 0.9;
                }
            }
            best = best.max(current);
        }
    }
    best
}

fn inequality_rhs(dims: ProcessDims) -> f64 {
    (dims.a_in.max(dims.b_in) as f64).log2()
}

struct TrialOutcome {
    record: TrialRecord,
    violations: Vec<Violation>,
}

fn entropic_record(seed: u64, w: &ProcessMatrix, cfg: &SearchConfig, rng: &mut SeededRng) -> (TrialRecord, Option<Violation>) {
    let lhs = best_inequality_value(w, cfg, rng);
    let rhs = inequality_rhs(w.dims());
    let satisfied = lhs <= rhs + VIOLATION_TOL;
    let violation = (!satisfied).then(|| Violation {
        seed,
        kind: ViolationKind::Entropic,
        lhs,
        rhs,
        process: w.clone(),
    });
    (TrialRecord { seed, lhs, rhs, satisfied, bidirectional: None }, violation)
}

fn separable_trial(seed: u64, cfg: &SearchConfig) -> Result<TrialOutcome> {
    let mut rng = seeded(seed);
    let lambda: f64 = rng.random();
    let b_first = random_ordered_process(Direction::BToA, cfg.dims, cfg.noise_floor, rng.random())?;
    let a_first = random_ordered_process(Direction::AToB, cfg.dims, cfg.noise_floor, rng.random())?;
    let sep = mix_processes(lambda, &b_first, &a_first)?;
    let (mut record, violation) = entropic_record(seed, &sep.mixture, cfg, &mut rng);
    let mut violations: Vec<Violation> = violation.into_iter().collect();
    if cfg.check_bidirectional {
        let opt = OptimizerConfig { seed, ..cfg.optimizer.clone() };
        let check = check_bidirectional_bound(&sep, &opt)?;
        if !check.satisfied {
            violations.push(Violation {
                seed,
                kind: ViolationKind::Bidirectional,
                lhs: check.lhs_bits,
                rhs: check.rhs_bits,
                process: sep.mixture.clone(),
            });
        }
        record.bidirectional = Some(BidirectionalRecord {
            lambda,
            lhs: check.lhs_bits,
            rhs: check.rhs_bits,
            satisfied: check.satisfied,
        });
    }
    Ok(TrialOutcome { record, violations })
}

fn summarize(outcomes: Vec<TrialOutcome>, on_trial: &mut dyn FnMut(&TrialRecord)) -> SearchResult {
    let trials = outcomes.len();
    let rhs_top = outcomes.iter().map(|o| o.record.rhs).fold(0.0, f64::max);
    let width = if rhs_top > 0.0 { rhs_top / HISTOGRAM_BINS as f64 } else { 1.0 / HISTOGRAM_BINS as f64 };
    let mut histogram: Vec<HistogramBin> = (0..HISTOGRAM_BINS)
        .map(|i| HistogramBin { lower: i as f64 * width, upper: Some((i + 1) as f64 * width), count: 0 })
        .collect();
    histogram.push(HistogramBin { lower: HISTOGRAM_BINS as f64 * width, upper: None, count: 0 });
    let mut best: Option<&TrialRecord> = None;
    for o in &outcomes {
        let r = &o.record;
        on_trial(r);
        let bin = ((r.lhs.max(0.0) / width) as usize).min(HISTOGRAM_BINS);
        // Values exactly at the right-hand side belong to the last finite bin.
        let bin = if bin == HISTOGRAM_BINS && r.lhs <= rhs_top + VIOLATION_TOL { bin - 1 } else { bin };
        histogram[bin].count += 1;
        if best.is_none_or(|b| r.lhs > b.lhs) {
            best = Some(r);
        }
    }
    let best = best.expect("at least one trial");
    let (best_lhs_bits, best_rhs_bits, best_seed) = (best.lhs, best.rhs, best.seed);
    SearchResult {
        trials,
        best_lhs_bits,
        best_rhs_bits,
        best_seed,
        histogram,
        violations: outcomes.into_iter().flat_map(|o| o.violations).collect(),
    }
}

/// Samples causally separable processes `λ W^{B≺A} + (1 − λ) W^{A≺B}` and
/// records the best inequality value per trial. `on_trial` sees every
/// record in seed order.
pub fn run_search_with(cfg: &SearchConfig, on_trial: &mut dyn FnMut(&TrialRecord)) -> Result<SearchResult> {
    cfg.check()?;
    let outcomes = (0..cfg.trials)
        .into_par_iter()
        .map(|i| separable_trial(cfg.seed.wrapping_add(i as u64), cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(outcomes, on_trial))
}

pub fn run_search(cfg: &SearchConfig) -> Result<SearchResult> {
    run_search_with(cfg, &mut |_| {})
}

/// Searches instruments for a fixed, user-supplied operator, which need not
/// be a valid process. Only the entropic inequality is evaluated.
pub fn run_search_on_process_with(
    w: &ProcessMatrix,
    cfg: &SearchConfig,
    on_trial: &mut dyn FnMut(&TrialRecord),
) -> Result<SearchResult> {
    cfg.check()?;
    let outcomes: Vec<TrialOutcome> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.seed.wrapping_add(i as u64);
            let (record, violation) = entropic_record(seed, w, cfg, &mut seeded(seed));
            TrialOutcome { record, violations: violation.into_iter().collect() }
        })
        .collect();
    Ok(summarize(outcomes, on_trial))
}

pub fn run_search_on_process(w: &ProcessMatrix, cfg: &SearchConfig) -> Result<SearchResult> {
    run_search_on_process_with(w, cfg, &mut |_| {})
}

/// Two identity channels in a loop, `A_O → B_I` and `B_O → A_I`. Positive
/// with the right trace, but not a valid process: it lets both parties
/// signal to each other.
pub fn causal_loop(d: usize) -> Result<ProcessMatrix> {
    let op = crate::link::identity_choi(A_O, B_I, d).tensor(&crate::link::identity_choi(B_O, A_I, d))?;
    ProcessMatrix::new_unchecked(op)
}
