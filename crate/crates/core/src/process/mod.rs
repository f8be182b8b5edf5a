//! Process matrices: construction, validity, causal order and sampling.
//!
//! A bipartite process lives on `A_I ⊗ A_O ⊗ B_I ⊗ B_O` and is stored in that
//! canonical order. It is valid when it is positive semidefinite, has trace
//! `d_{A_O} d_{B_O}`, and satisfies the three trace-and-replace equalities
//!
//! ```text
//! _{B_I B_O}W      = _{A_O B_I B_O}W
//! _{A_I A_O}W      = _{B_O A_I A_O}W
//! W = _{A_O}W + _{B_O}W − _{A_O B_O}W
//! ```
//!
//! which rule out signalling loops.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{complex_gaussian, seeded};
use crate::tensor::{systems, LabeledOperator, Subsystem, C64};

pub mod multipartite;

pub use multipartite::{MultipartiteSeparableProcess, SeparableTerm};

pub const A_I: &str = "A_I";
pub const A_O: &str = "A_O";
pub const B_I: &str = "B_I";
pub const B_O: &str = "B_O";

/// Canonical label order of a bipartite process.
pub const PROCESS_LABELS: [&str; 4] = [A_I, A_O, B_I, B_O];

/// Default tolerance on validity residuals.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProcessDims {
    pub a_in: usize,
    pub a_out: usize,
    pub b_in: usize,
    pub b_out: usize,
}

impl ProcessDims {
    pub fn new(a_in: usize, a_out: usize, b_in: usize, b_out: usize) -> Self {
        Self {
            a_in,
            a_out,
            b_in,
            b_out,
        }
    }

    /// All four systems of dimension `d`.
    pub fn uniform(d: usize) -> Self {
        Self::new(d, d, d, d)
    }

    pub fn systems(&self) -> Vec<Subsystem> {
        systems(&[
            (A_I, self.a_in),
            (A_O, self.a_out),
            (B_I, self.b_in),
            (B_O, self.b_out),
        ])
    }

    pub fn side(&self) -> usize {
        self.a_in * self.a_out * self.b_in * self.b_out
    }

    fn check(&self) -> Result<()> {
        if [self.a_in, self.a_out, self.b_in, self.b_out].contains(&0) {
            return Err(Error::InvalidArgument("process dimensions must be positive".into()));
        }
        Ok(())
    }
}

/// Direction of one-way signalling (`AToB` is the order A≺B).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    AToB,
    BToA,
}

impl Direction {
    pub fn reversed(self) -> Self {
        match self {
            Direction::AToB => Direction::BToA,
            Direction::BToA => Direction::AToB,
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::AToB => "a-to-b",
            Direction::BToA => "b-to-a",
        })
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a-to-b" => Ok(Direction::AToB),
            "b-to-a" => Ok(Direction::BToA),
            other => Err(Error::InvalidArgument(format!("unknown direction `{other}`"))),
        }
    }
}

/// A bipartite process matrix in canonical label order.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ProcessMatrix {
    op: LabeledOperator,
}

impl ProcessMatrix {
    /// Wraps `op` after checking every validity constraint at `tol`.
    pub fn new(op: LabeledOperator, tol: f64) -> Result<Self> {
        let report = validate_process(&op, tol)?;
        if !report.valid {
            return Err(Error::InvalidProcess(report.summary()));
        }
        Self::new_unchecked(op)
    }

    /// Only checks the label set; use for matrices valid by construction or
    /// for deliberately invalid test inputs.
    pub fn new_unchecked(op: LabeledOperator) -> Result<Self> {
        let op = canonical(&op)?;
        Ok(Self { op })
    }

    /// The maximally mixed process `1/(d_{A_I} d_{B_I})`.
    pub fn uniform(dims: ProcessDims) -> Result<Self> {
        dims.check()?;
        let op = LabeledOperator::identity(dims.systems())?.scaled(1.0 / (dims.a_in * dims.b_in) as f64);
        Ok(Self { op })
    }

    pub fn op(&self) -> &LabeledOperator {
        &self.op
    }

    pub fn into_op(self) -> LabeledOperator {
        self.op
    }

    pub fn dims(&self) -> ProcessDims {
        let d = self.op.dims();
        ProcessDims::new(d[0], d[1], d[2], d[3])
    }

    /// The same process with the roles of Alice and Bob exchanged.
    pub fn swap_parties(&self) -> Self {
        let op = self
            .op
            .relabeled(&[(A_I, B_I), (A_O, B_O), (B_I, A_I), (B_O, A_O)])
            .and_then(|o| o.permute(&PROCESS_LABELS))
            .expect("relabelling a canonical process is infallible");
        Self { op }
    }

    /// View in which `direction` becomes A→B.
    pub fn oriented(&self, direction: Direction) -> Self {
        match direction {
            Direction::AToB => self.clone(),
            Direction::BToA => self.swap_parties(),
        }
    }
}

impl<'de> Deserialize<'de> for ProcessMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let op = LabeledOperator::deserialize(deserializer)?;
        ProcessMatrix::new_unchecked(op).map_err(serde::de::Error::custom)
    }
}

fn canonical(op: &LabeledOperator) -> Result<LabeledOperator> {
    let names = op.names();
    if names.len() != 4 || PROCESS_LABELS.iter().any(|l| !names.contains(l)) {
        return Err(Error::WrongLabels(names.iter().map(|s| s.to_string()).collect()));
    }
    op.permute(&PROCESS_LABELS)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// Negativity of the smallest eigenvalue, or the anti-Hermitian norm if larger.
    pub psd: f64,
    pub trace: f64,
    /// Alice's marginal (Bob traced out) must not depend on `A_O`.
    pub alice_marginal: f64,
    /// Bob's marginal (Alice traced out) must not depend on `B_O`.
    pub bob_marginal: f64,
    /// No term may carry both outputs.
    pub joint_outputs: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub residuals: Residuals,
}

impl ValidationReport {
    pub fn summary(&self) -> String {
        let r = &self.residuals;
        format!(
            "psd {:.3e}, trace {:.3e}, alice marginal {:.3e}, bob marginal {:.3e}, joint outputs {:.3e}",
            r.psd, r.trace, r.alice_marginal, r.bob_marginal, r.joint_outputs
        )
    }
}

/// Residuals of every validity constraint; `valid` iff all are `<= tol`.
pub fn validate_process(w: &LabeledOperator, tol: f64) -> Result<ValidationReport> {
    let w = canonical(w)?;
    let dims = w.dims();
    let negativity = (-w.min_eigenvalue()).max(0.0);
    let psd = negativity.max(w.hermiticity_defect());
    let tr = w.trace();
    let trace = (tr - C64::new((dims[1] * dims[3]) as f64, 0.0)).norm();

    let tr_rep = |over: &[&str]| w.trace_and_replace(over);
    let alice_marginal = tr_rep(&[B_I, B_O])?.distance(&tr_rep(&[A_O, B_I, B_O])?)?;
    let bob_marginal = tr_rep(&[A_I, A_O])?.distance(&tr_rep(&[B_O, A_I, A_O])?)?;
    let split = tr_rep(&[A_O])?.add(&tr_rep(&[B_O])?)?.sub(&tr_rep(&[A_O, B_O])?)?;
    let joint_outputs = w.distance(&split)?;

    let residuals = Residuals {
        psd,
        trace,
        alice_marginal,
        bob_marginal,
        joint_outputs,
    };
    let valid = [psd, trace, alice_marginal, bob_marginal, joint_outputs].iter().all(|&r| r <= tol);
    Ok(ValidationReport { valid, residuals })
}

fn check_choi_channel(choi: &LabeledOperator, input: &str, output: &str) -> Result<()> {
    if !choi.is_psd(DEFAULT_TOL) {
        return Err(Error::NotAChannel(format!(
            "Choi matrix has eigenvalue {:.3e}",
            choi.min_eigenvalue()
        )));
    }
    let marginal = choi.partial_trace(&[output])?;
    let id = LabeledOperator::identity(marginal.systems().to_vec())?;
    let defect = marginal.distance(&id)?;
    if defect > DEFAULT_TOL {
        return Err(Error::NotAChannel(format!(
            "tr_{output} of the Choi matrix differs from 1^{input} by {defect:.3e}"
        )));
    }
    Ok(())
}

/// `ρ^{A_I} ⊗ C^{A_O B_I} ⊗ 1^{B_O}`: Alice receives `ρ`, her output reaches
/// Bob through the channel with Choi matrix `C`, Bob's output is discarded.
pub fn process_from_channel(input_state: &LabeledOperator, channel_choi: &LabeledOperator) -> Result<ProcessMatrix> {
    process_from_channel_with_bob_output(input_state, channel_choi, 0)
}

fn process_from_channel_with_bob_output(
    input_state: &LabeledOperator,
    channel_choi: &LabeledOperator,
    b_out: usize,
) -> Result<ProcessMatrix> {
    if input_state.names() != [A_I] {
        return Err(Error::LabelMismatch(format!(
            "input state must live on {A_I}, found {:?}",
            input_state.names()
        )));
    }
    input_state.check_state()?;
    let names = channel_choi.names();
    if names.len() != 2 || !names.contains(&A_O) || !names.contains(&B_I) {
        return Err(Error::LabelMismatch(format!(
            "channel must act {A_O} -> {B_I}, found {names:?}"
        )));
    }
    let choi = channel_choi.permute(&[A_O, B_I])?;
    check_choi_channel(&choi, A_O, B_I)?;
    let b_out = if b_out == 0 { choi.dim_of(B_I)? } else { b_out };
    let bob_out = LabeledOperator::identity(systems(&[(B_O, b_out)]))?;
    let op = input_state.tensor(&choi)?.tensor(&bob_out)?;
    ProcessMatrix::new_unchecked(op)
}

/// Same as [`process_from_channel`] with an explicit `d_{B_O}`.
pub fn process_from_channel_dims(
    input_state: &LabeledOperator,
    channel_choi: &LabeledOperator,
    b_out: usize,
) -> Result<ProcessMatrix> {
    if b_out == 0 {
        return Err(Error::InvalidArgument("d_B_O must be positive".into()));
    }
    process_from_channel_with_bob_output(input_state, channel_choi, b_out)
}

/// `ρ^{A_I B_I} ⊗ 1^{A_O} ⊗ 1^{B_O}` with output dimensions equal to the inputs.
pub fn process_from_shared_state(state: &LabeledOperator) -> Result<ProcessMatrix> {
    let names = state.names();
    if names.len() != 2 || !names.contains(&A_I) || !names.contains(&B_I) {
        return Err(Error::LabelMismatch(format!(
            "shared state must live on {{{A_I}, {B_I}}}, found {names:?}"
        )));
    }
    state.check_state()?;
    let outs = LabeledOperator::identity(systems(&[
        (A_O, state.dim_of(A_I)?),
        (B_O, state.dim_of(B_I)?),
    ]))?;
    ProcessMatrix::new_unchecked(state.tensor(&outs)?)
}

/// Frobenius distance between `W` and `_{X_O}W` for the later party `X`.
pub fn order_residual(w: &ProcessMatrix, direction: Direction) -> f64 {
    let later_out = match direction {
        Direction::AToB => B_O,
        Direction::BToA => A_O,
    };
    let replaced = w
        .op
        .trace_and_replace(&[later_out])
        .expect("canonical labels are present");
    w.op.distance(&replaced).expect("same label set")
}

/// True iff the later party's output can be traced-and-replaced without
/// changing `W`, i.e. no signalling against `direction`.
pub fn is_ordered(w: &ProcessMatrix, direction: Direction, tol: f64) -> bool {
    order_residual(w, direction) <= tol
}

/// `λ W^{B≺A} + (1 − λ) W^{A≺B}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparableProcess {
    pub lambda: f64,
    pub w_b_first: ProcessMatrix,
    pub w_a_first: ProcessMatrix,
    pub mixture: ProcessMatrix,
}

impl SeparableProcess {
    /// Recomputes `mixture` and re-checks the ordering of both terms.
    pub fn from_parts(lambda: f64, w_b_first: ProcessMatrix, w_a_first: ProcessMatrix) -> Result<Self> {
        mix_processes(lambda, &w_b_first, &w_a_first)
    }
}

pub fn mix_processes(lambda: f64, w_b_first: &ProcessMatrix, w_a_first: &ProcessMatrix) -> Result<SeparableProcess> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} outside [0, 1]")));
    }
    if w_b_first.dims() != w_a_first.dims() {
        return Err(Error::DimMismatch("separable terms have different dimensions".into()));
    }
    let tol = DEFAULT_TOL * w_a_first.dims().side() as f64;
    if !is_ordered(w_b_first, Direction::BToA, tol) {
        return Err(Error::OrderMismatch("B≺A".into()));
    }
    if !is_ordered(w_a_first, Direction::AToB, tol) {
        return Err(Error::OrderMismatch("A≺B".into()));
    }
    let mixture = w_b_first.op.scaled(lambda).add(&w_a_first.op.scaled(1.0 - lambda))?;
    Ok(SeparableProcess {
        lambda,
        w_b_first: w_b_first.clone(),
        w_a_first: w_a_first.clone(),
        mixture: ProcessMatrix { op: mixture },
    })
}

/// Orthogonal projector onto the linear span of the trace-and-replace
/// constraints. Preserves the trace and fixes every valid process.
pub fn project_onto_valid_subspace(w: &LabeledOperator) -> Result<LabeledOperator> {
    let w = canonical(w)?;
    let t = |over: &[&str]| w.trace_and_replace(over);
    t(&[B_O])?
        .add(&t(&[A_O])?)?
        .sub(&t(&[A_O, B_O])?)?
        .sub(&t(&[B_I, B_O])?)?
        .add(&t(&[A_O, B_I, B_O])?)?
        .sub(&t(&[A_I, A_O])?)?
        .add(&t(&[A_I, A_O, B_O])?)
}

/// Mixing weight with the uniform process that makes `op` positive
/// semidefinite, never below `noise_floor`.
fn restore_positivity(op: &LabeledOperator, dims: ProcessDims, noise_floor: f64) -> Result<LabeledOperator> {
    let uniform = ProcessMatrix::uniform(dims)?.op;
    let u = 1.0 / (dims.a_in * dims.b_in) as f64;
    let min = op.min_eigenvalue();
    let needed = if min < 0.0 { -min / (u - min) } else { 0.0 };
    // Small margin so the mixture is PSD after rounding.
    let p = noise_floor.max(needed * (1.0 + 1e-9) + 1e-14).min(1.0);
    if needed > 1.0 {
        return Err(Error::ProjectionFailed);
    }
    op.scaled(1.0 - p).add(&uniform.scaled(p))
}

fn sample_projected(dims: ProcessDims, noise_floor: f64, rng_seed: u64, order: Option<Direction>) -> Result<ProcessMatrix> {
    dims.check()?;
    if !(noise_floor > 0.0 && noise_floor <= 1.0) {
        return Err(Error::InvalidArgument(format!("noise_floor {noise_floor} outside (0, 1]")));
    }
    let mut rng = seeded(rng_seed);
    let n = dims.side();
    let g = complex_gaussian(&mut rng, n, n);
    let h = LabeledOperator::new(dims.systems(), &g * g.adjoint())?;
    let mut projected = project_onto_valid_subspace(&h)?;
    match order {
        Some(Direction::AToB) => projected = projected.trace_and_replace(&[B_O])?,
        Some(Direction::BToA) => projected = projected.trace_and_replace(&[A_O])?,
        None => {}
    }
    let target = (dims.a_out * dims.b_out) as f64;
    let scaled = projected.scaled(target / projected.trace().re);
    // Hermitise to remove rounding asymmetry before the spectral step.
    let herm = scaled.add(&scaled.adjoint())?.scaled(0.5);
    let op = restore_positivity(&herm, dims, noise_floor)?;
    Ok(ProcessMatrix { op })
}

/// Random valid process: Gaussian PSD seed, projected onto the validity
/// subspace, rescaled to the right trace and mixed with the uniform process
/// (weight at least `noise_floor`) until positive.
pub fn random_process(dims: ProcessDims, noise_floor: f64, rng_seed: u64) -> Result<ProcessMatrix> {
    sample_projected(dims, noise_floor, rng_seed, None)
}

/// As [`random_process`], additionally ordered along `direction`.
pub fn random_ordered_process(
    direction: Direction,
    dims: ProcessDims,
    noise_floor: f64,
    rng_seed: u64,
) -> Result<ProcessMatrix> {
    sample_projected(dims, noise_floor, rng_seed, Some(direction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::CMatrix;

    fn identity_choi(a: &str, b: &str, d: usize) -> LabeledOperator {
        let m = CMatrix::from_fn(d * d, d * d, |r, c| {
            let (i, o) = (r / d, r % d);
            let (j, o2) = (c / d, c % d);
            if i == o && j == o2 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }
        });
        LabeledOperator::new(systems(&[(a, d), (b, d)]), m).unwrap()
    }

    fn half_identity(name: &str) -> LabeledOperator {
        LabeledOperator::maximally_mixed(systems(&[(name, 2)])).unwrap()
    }

    fn max_residual(r: &ValidationReport) -> f64 {
        let x = r.residuals;
        [x.psd, x.trace, x.alice_marginal, x.bob_marginal, x.joint_outputs].into_iter().fold(0.0, f64::max)
    }

    #[test]
    fn uniform_process_is_exactly_valid() {
        let w = ProcessMatrix::uniform(ProcessDims::uniform(2)).unwrap();
        let r = validate_process(w.op(), DEFAULT_TOL).unwrap();
        assert!(r.valid);
        assert_eq!(max_residual(&r), 0.0);
    }

    #[test]
    fn trace_violation_is_reported() {
        let id = LabeledOperator::identity(ProcessDims::uniform(2).systems()).unwrap();
        let r = validate_process(&id, DEFAULT_TOL).unwrap();
        assert!(!r.valid);
        assert!((r.residuals.trace - 12.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_labels_are_rejected() {
        let op = LabeledOperator::identity(systems(&[("A", 2), ("B", 2)])).unwrap();
        assert!(matches!(validate_process(&op, 1e-9), Err(Error::WrongLabels(_))));
    }

    #[test]
    fn channel_process_is_valid_and_ordered() {
        let w = process_from_channel(&half_identity(A_I), &identity_choi(A_O, B_I, 2)).unwrap();
        let r = validate_process(w.op(), DEFAULT_TOL).unwrap();
        assert!(r.valid, "{}", r.summary());
        assert!(max_residual(&r) < 1e-12);
        assert!((w.op().trace().re - 4.0).abs() < 1e-12);
        assert!(is_ordered(&w, Direction::AToB, 1e-12));
        assert!(!is_ordered(&w, Direction::BToA, 1e-3));
    }

    #[test]
    fn depolarizing_channel_gives_uniform_process() {
        let depol = LabeledOperator::identity(systems(&[(A_O, 2), (B_I, 2)])).unwrap().scaled(0.5);
        let w = process_from_channel(&half_identity(A_I), &depol).unwrap();
        let u = ProcessMatrix::uniform(ProcessDims::uniform(2)).unwrap();
        assert!(w.op().distance(u.op()).unwrap() < 1e-15);
    }

    #[test]
    fn pure_input_channel_process_signals() {
        let zero = LabeledOperator::basis_projector(A_I, 2, 0);
        let w = process_from_channel(&zero, &identity_choi(A_O, B_I, 2)).unwrap();
        assert!(validate_process(w.op(), DEFAULT_TOL).unwrap().valid);
        assert!(order_residual(&w, Direction::BToA) > 0.1);
    }

    #[test]
    fn channel_constructor_rejects_non_channels() {
        let not_tp = LabeledOperator::identity(systems(&[(A_O, 2), (B_I, 2)])).unwrap();
        assert!(matches!(
            process_from_channel(&half_identity(A_I), &not_tp),
            Err(Error::NotAChannel(_))
        ));
        let not_state = LabeledOperator::identity(systems(&[(A_I, 2)])).unwrap();
        assert!(matches!(
            process_from_channel(&not_state, &identity_choi(A_O, B_I, 2)),
            Err(Error::NotAState(_))
        ));
    }

    #[test]
    fn shared_state_processes_do_not_signal() {
        let phi = identity_choi(A_I, B_I, 2).scaled(0.5);
        let w = process_from_shared_state(&phi).unwrap();
        assert!(validate_process(w.op(), DEFAULT_TOL).unwrap().valid);
        assert!(order_residual(&w, Direction::AToB) < 1e-12);
        assert!(order_residual(&w, Direction::BToA) < 1e-12);

        let prod = half_identity(A_I).tensor(&half_identity(B_I)).unwrap();
        let w = process_from_shared_state(&prod).unwrap();
        let u = ProcessMatrix::uniform(ProcessDims::uniform(2)).unwrap();
        assert!(w.op().distance(u.op()).unwrap() < 1e-15);

        let pure = LabeledOperator::basis_projector(B_I, 2, 1)
            .tensor(&LabeledOperator::basis_projector(A_I, 2, 0))
            .unwrap();
        let w = process_from_shared_state(&pure).unwrap();
        assert!(max_residual(&validate_process(w.op(), DEFAULT_TOL).unwrap()) < 1e-12);
    }

    fn perfect_both_ways() -> (ProcessMatrix, ProcessMatrix) {
        let a_first = process_from_channel(&half_identity(A_I), &identity_choi(A_O, B_I, 2)).unwrap();
        (a_first.swap_parties(), a_first)
    }

    #[test]
    fn mixing_endpoints_and_midpoint() {
        let (b_first, a_first) = perfect_both_ways();
        assert!(is_ordered(&b_first, Direction::BToA, 1e-12));
        let s0 = mix_processes(0.0, &b_first, &a_first).unwrap();
        assert!(s0.mixture.op().distance(a_first.op()).unwrap() < 1e-15);
        let s1 = mix_processes(1.0, &b_first, &a_first).unwrap();
        assert!(s1.mixture.op().distance(b_first.op()).unwrap() < 1e-15);
        let half = mix_processes(0.5, &b_first, &a_first).unwrap();
        assert!(validate_process(half.mixture.op(), DEFAULT_TOL).unwrap().valid);
        assert!(!is_ordered(&half.mixture, Direction::AToB, 1e-6));
        assert!(!is_ordered(&half.mixture, Direction::BToA, 1e-6));
        assert!(matches!(
            mix_processes(0.5, &a_first, &a_first),
            Err(Error::OrderMismatch(_))
        ));
    }

    #[test]
    fn full_noise_gives_uniform_process() {
        let u = ProcessMatrix::uniform(ProcessDims::uniform(2)).unwrap();
        for seed in [0, 9] {
            let w = random_process(ProcessDims::uniform(2), 1.0, seed).unwrap();
            assert!(w.op().distance(u.op()).unwrap() < 1e-12);
            let w = random_ordered_process(Direction::AToB, ProcessDims::uniform(2), 1.0, seed).unwrap();
            assert!(w.op().distance(u.op()).unwrap() < 1e-12);
        }
    }

    #[test]
    fn random_process_seed_42_is_valid() {
        let w = random_process(ProcessDims::uniform(2), 0.3, 42).unwrap();
        let r = validate_process(w.op(), DEFAULT_TOL).unwrap();
        assert!(r.valid, "{}", r.summary());
        assert!(max_residual(&r) < 1e-9);
        let again = random_process(ProcessDims::uniform(2), 0.3, 42).unwrap();
        assert_eq!(w, again);
    }

    #[test]
    fn random_ordered_processes_respect_order() {
        for seed in 0..10 {
            let w = random_ordered_process(Direction::AToB, ProcessDims::uniform(2), 0.05, seed).unwrap();
            assert!(validate_process(w.op(), DEFAULT_TOL).unwrap().valid);
            assert!(order_residual(&w, Direction::AToB) < 1e-9);
            let w = random_ordered_process(Direction::BToA, ProcessDims::new(2, 3, 2, 2), 0.05, seed).unwrap();
            assert!(validate_process(w.op(), DEFAULT_TOL).unwrap().valid);
            assert!(order_residual(&w, Direction::BToA) < 1e-9);
        }
    }

    #[test]
    fn projection_fixes_valid_processes() {
        let w = random_process(ProcessDims::new(2, 2, 3, 2), 0.1, 7).unwrap();
        let p = project_onto_valid_subspace(w.op()).unwrap();
        assert!(p.distance(w.op()).unwrap() < 1e-12);
    }

    #[test]
    fn direction_parses_cli_spelling() {
        assert_eq!("a-to-b".parse::<Direction>().unwrap(), Direction::AToB);
        assert_eq!("b-to-a".parse::<Direction>().unwrap(), Direction::BToA);
        assert!("sideways".parse::<Direction>().is_err());
        assert_eq!(serde_json::to_string(&Direction::BToA).unwrap(), "\"b-to-a\"");
    }
}
