//! Born-rule channels, classical mutual information, Holevo quantities and
//! capacity estimates for processes.
//!
//! Every capacity routine returns a *lower-bound* estimate: the optimisation
//! over encodings and measurements is non-convex and is carried out by
//! seeded random-restart hill climbing. Only the analytic right-hand sides
//! (`log2 d`, the bidirectional and multiparty bounds) are hard limits.

mod bounds;
mod optimizer;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::CPMap;
use crate::tensor::{entropy_of_spectrum, hermitian_eigenvalues, CMatrix, LabeledOperator, C64};

pub use bounds::{
    capacity_chain, check_bidirectional_bound, check_capacity_chain, check_multiparty_bound, pairwise_process,
    BidirectionalCheck, CapacityChain, MultipartyCheck, PairCapacity, MULTIPARTY_TOL, BIDIRECTIONAL_TOL,
};
pub use optimizer::{holevo_of_process, holevo_of_process_joint, one_shot_capacity, MAX_BUDGET};

/// Tolerance on `Σ p = 1` for ensembles.
pub const PROB_TOL: f64 = 1e-12;
/// Tolerance on `Σ E = 1` for POVMs.
pub const POVM_TOL: f64 = 1e-9;

fn check_distribution(p: &[f64], tol: f64) -> Result<()> {
    if p.iter().any(|&x| !(x >= -tol) || !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("negative or non-finite probability in {p:?}")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > tol {
        return Err(Error::InvalidArgument(format!("probabilities sum to {total}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleItem {
    pub p: f64,
    pub state: LabeledOperator,
}

/// `{p(m), ρ_m}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<EnsembleItem>", into = "Vec<EnsembleItem>")]
pub struct Ensemble {
    items: Vec<EnsembleItem>,
}

impl TryFrom<Vec<EnsembleItem>> for Ensemble {
    type Error = Error;

    fn try_from(items: Vec<EnsembleItem>) -> Result<Self> {
        Ensemble::new(items.into_iter().map(|i| (i.p, i.state)).collect())
    }
}

impl From<Ensemble> for Vec<EnsembleItem> {
    fn from(e: Ensemble) -> Self {
        e.items
    }
}

impl Ensemble {
    pub fn new(items: Vec<(f64, LabeledOperator)>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::InvalidArgument("empty ensemble".into()));
        }
        let p: Vec<f64> = items.iter().map(|(p, _)| *p).collect();
        check_distribution(&p, PROB_TOL)?;
        let first = &items[0].1;
        for (_, s) in &items {
            s.check_state()?;
            first.align(s).map_err(|_| Error::LabelMismatch("ensemble states act on different systems".into()))?;
        }
        Ok(Self {
            items: items.into_iter().map(|(p, state)| EnsembleItem { p, state }).collect(),
        })
    }

    /// Skips validation; used for optimiser output, which may come from a
    /// deliberately invalid process.
    pub(crate) fn from_items_unchecked(items: Vec<EnsembleItem>) -> Self {
        Self { items }
    }

    /// Uniform weights over `states`.
    pub fn uniform(states: Vec<LabeledOperator>) -> Result<Self> {
        let n = states.len() as f64;
        Self::new(states.into_iter().map(|s| (1.0 / n, s)).collect())
    }

    pub fn items(&self) -> &[EnsembleItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.items.iter().map(|i| i.p).collect()
    }

    /// `Σ p_m ρ_m`.
    pub fn average(&self) -> LabeledOperator {
        let mut acc = self.items[0].state.scaled(self.items[0].p);
        for it in &self.items[1..] {
            acc = acc.add(&it.state.scaled(it.p)).expect("aligned at construction");
        }
        acc
    }
}

/// Measurement `{E_k}`, `E_k ≥ 0`, `Σ E_k = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<LabeledOperator>", into = "Vec<LabeledOperator>")]
pub struct Povm {
    elements: Vec<LabeledOperator>,
}

impl TryFrom<Vec<LabeledOperator>> for Povm {
    type Error = Error;

    fn try_from(elements: Vec<LabeledOperator>) -> Result<Self> {
        Povm::new(elements)
    }
}

impl From<Povm> for Vec<LabeledOperator> {
    fn from(p: Povm) -> Self {
        p.elements
    }
}

impl Povm {
    pub fn new(elements: Vec<LabeledOperator>) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty POVM".into()))?;
        let mut sum = first.scaled(0.0);
        for (k, e) in elements.iter().enumerate() {
            if !e.is_psd(POVM_TOL) || e.hermiticity_defect() > POVM_TOL {
                return Err(Error::InvalidArgument(format!("POVM element {k} is not positive")));
            }
            sum = sum.add(e)?;
        }
        let n = sum.side();
        let defect = (sum.matrix() - CMatrix::identity(n, n)).norm();
        if defect > POVM_TOL {
            return Err(Error::InvalidArgument(format!("POVM elements sum to identity only within {defect:.3e}")));
        }
        Ok(Self { elements })
    }

    /// Projective measurement in the computational basis of `name`.
    pub fn computational(name: &str, dim: usize) -> Self {
        Self {
            elements: (0..dim).map(|k| LabeledOperator::basis_projector(name, dim, k)).collect(),
        }
    }

    pub fn elements(&self) -> &[LabeledOperator] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// `p(out | in)`; rows are inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelJson", into = "ChannelJson")]
pub struct ClassicalChannel {
    rows: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ChannelJson {
    matrix: Vec<Vec<f64>>,
}

impl TryFrom<ChannelJson> for ClassicalChannel {
    type Error = Error;

    fn try_from(raw: ChannelJson) -> Result<Self> {
        ClassicalChannel::new(raw.matrix)
    }
}

impl From<ClassicalChannel> for ChannelJson {
    fn from(c: ClassicalChannel) -> Self {
        ChannelJson { matrix: c.rows }
    }
}

impl ClassicalChannel {
    /// Rows must be probability vectors of equal length within `1e-12`.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || cols == 0 {
            return Err(Error::InvalidArgument("empty channel".into()));
        }
        for (m, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::DimMismatch(format!("row {m} has {} entries, expected {cols}", r.len())));
            }
            check_distribution(r, PROB_TOL).map_err(|e| Error::InvalidArgument(format!("row {m}: {e}")))?;
        }
        Ok(Self { rows })
    }

    /// Clamps round-off negatives and renormalises each row.
    pub(crate) fn from_rows_normalized(mut rows: Vec<Vec<f64>>) -> Self {
        for r in &mut rows {
            for x in r.iter_mut() {
                *x = x.max(0.0);
            }
            let s: f64 = r.iter().sum();
            if s > 0.0 {
                r.iter_mut().for_each(|x| *x /= s);
            } else {
                let n = r.len() as f64;
                r.iter_mut().for_each(|x| *x = 1.0 / n);
            }
        }
        Self { rows }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn inputs(&self) -> usize {
        self.rows.len()
    }

    pub fn outputs(&self) -> usize {
        self.rows[0].len()
    }

    /// Row-wise convex combination `λ self + (1 − λ) other`.
    pub fn mix(&self, lambda: f64, other: &Self) -> Result<Self> {
        if self.inputs() != other.inputs() || self.outputs() != other.outputs() {
            return Err(Error::DimMismatch("channels have different shapes".into()));
        }
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect())
            .collect();
        Ok(Self { rows })
    }
}

fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    // tr(a b) without forming the product.
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc.re
}

/// `p(m'|m) = tr[E_{m'} 𝓝(ρ_m)]`.
pub fn born_channel(ensemble: &Ensemble, channel: &CPMap, povm: &Povm) -> Result<ClassicalChannel> {
    let mut rows = Vec::with_capacity(ensemble.len());
    for item in ensemble.items() {
        let out = channel.apply(&item.state).map_err(|e| Error::DimMismatch(e.to_string()))?;
        let mut row = Vec::with_capacity(povm.len());
        for e in povm.elements() {
            let e = out.align(e).map_err(|err| Error::DimMismatch(err.to_string()))?;
            row.push(trace_product(e.matrix(), out.matrix()));
        }
        rows.push(row);
    }
    Ok(ClassicalChannel::from_rows_normalized(rows))
}

/// Per-message error `p_e(m) = 1 − p(m|m)` and the worst case.
pub fn error_probabilities(ch: &ClassicalChannel) -> Result<(Vec<f64>, f64)> {
    if ch.inputs() != ch.outputs() {
        return Err(Error::NotSquare { rows: ch.inputs(), cols: ch.outputs() });
    }
    let pe: Vec<f64> = ch.rows.iter().enumerate().map(|(m, r)| 1.0 - r[m]).collect();
    let worst = pe.iter().copied().fold(0.0, f64::max);
    Ok((pe, worst))
}

/// Relative entropies `D(row_m ‖ q)` in bits, where `q` is the output law.
fn row_divergences(rows: &[Vec<f64>], p: &[f64]) -> Vec<f64> {
    let cols = rows[0].len();
    let mut q = vec![0.0; cols];
    for (row, &pm) in rows.iter().zip(p) {
        for (qk, &x) in q.iter_mut().zip(row) {
            *qk += pm * x;
        }
    }
    rows.iter()
        .map(|row| {
            row.iter()
                .zip(&q)
                .filter(|(&x, &qk)| x > 0.0 && qk > 0.0)
                .map(|(&x, &qk)| x * (x / qk).log2())
                .sum::<f64>()
        })
        .collect()
}

pub(crate) fn mutual_information_rows(rows: &[Vec<f64>], p: &[f64]) -> f64 {
    let d = row_divergences(rows, p);
    p.iter().zip(&d).map(|(pm, dm)| pm * dm).sum::<f64>().max(0.0)
}

/// `I(Y:X)` in bits for input law `input_dist`.
pub fn mutual_information(ch: &ClassicalChannel, input_dist: &[f64]) -> Result<f64> {
    if input_dist.len() != ch.inputs() {
        return Err(Error::DimMismatch(format!(
            "{} input probabilities for {} channel inputs",
            input_dist.len(),
            ch.inputs()
        )));
    }
    check_distribution(input_dist, 1e-9)?;
    Ok(mutual_information_rows(&ch.rows, input_dist))
}

/// Classical Blahut–Arimoto from `p`; stops when the standard upper bound
/// `max_m D(row_m‖q)` is within `tol` of the current rate. Returns
/// `(rate, p, converged)`.
pub(crate) fn blahut_arimoto_from(rows: &[Vec<f64>], mut p: Vec<f64>, tol: f64, max_iter: usize) -> (f64, Vec<f64>, bool) {
    for _ in 0..max_iter {
        let d = row_divergences(rows, &p);
        let lower: f64 = p.iter().zip(&d).map(|(pm, dm)| pm * dm).sum();
        let upper = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if upper - lower <= tol {
            return (lower.max(0.0), p, true);
        }
        let mut z = 0.0;
        for (pm, dm) in p.iter_mut().zip(&d) {
            *pm *= (dm - upper).exp2();
            z += *pm;
        }
        p.iter_mut().for_each(|x| *x /= z);
    }
    let rate = mutual_information_rows(rows, &p);
    (rate, p, false)
}

/// Capacity of a discrete memoryless channel and an optimal input law.
pub fn blahut_arimoto(ch: &ClassicalChannel, tol: f64, max_iter: usize) -> Result<(f64, Vec<f64>)> {
    let n = ch.inputs();
    let (_, p, converged) = blahut_arimoto_from(&ch.rows, vec![1.0 / n as f64; n], tol, max_iter);
    if !converged {
        return Err(Error::NoConvergence(max_iter));
    }
    Ok((mutual_information_rows(&ch.rows, &p), p))
}

/// `S(Σ p ρ) − Σ p S(ρ)` in bits.
pub fn holevo_of_ensemble(e: &Ensemble) -> f64 {
    let avg = entropy_of_spectrum(&e.average().eigenvalues());
    let parts: f64 = e
        .items()
        .iter()
        .map(|i| i.p * entropy_of_spectrum(&i.state.eigenvalues()))
        .sum();
    (avg - parts).max(0.0)
}

pub(crate) fn holevo_raw(states: &[CMatrix], entropies: &[f64], p: &[f64]) -> f64 {
    let n = states[0].nrows();
    let mut avg = CMatrix::zeros(n, n);
    for (s, &pm) in states.iter().zip(p) {
        avg += s * C64::new(pm, 0.0);
    }
    let parts: f64 = entropies.iter().zip(p).map(|(s, pm)| s * pm).sum();
    (entropy_of_spectrum(&hermitian_eigenvalues(&avg)) - parts).max(0.0)
}

/// Quantum Blahut–Arimoto for the Holevo quantity of fixed states:
/// `p_m ← p_m 2^{D(ρ_m‖ρ̄)}`. Stops when `max_m D − Σ p D ≤ tol`.
pub(crate) fn holevo_blahut_arimoto(states: &[CMatrix], entropies: &[f64], mut p: Vec<f64>, tol: f64, max_iter: usize) -> (f64, Vec<f64>) {
    let n = states[0].nrows();
    let mut d = vec![0.0; states.len()];
    for _ in 0..max_iter {
        let mut avg = CMatrix::zeros(n, n);
        for (s, &pm) in states.iter().zip(&p) {
            avg += s * C64::new(pm, 0.0);
        }
        let h = (&avg + avg.adjoint()) * C64::new(0.5, 0.0);
        let eig = nalgebra::SymmetricEigen::new(h);
        let logs = eig.eigenvalues.map(|l| l.max(1e-300).log2());
        let u = &eig.eigenvectors;
        let log_avg = u * CMatrix::from_diagonal(&logs.map(|l| C64::new(l, 0.0))) * u.adjoint();
        for (dm, (s, sm)) in d.iter_mut().zip(states.iter().zip(entropies)) {
            *dm = -sm - trace_product(s, &log_avg);
        }
        let lower: f64 = p.iter().zip(&d).map(|(pm, dm)| pm * dm).sum();
        let upper = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if upper - lower <= tol {
            break;
        }
        let mut z = 0.0;
        for (pm, dm) in p.iter_mut().zip(&d) {
            *pm *= (dm - upper).exp2();
            z += *pm;
        }
        p.iter_mut().for_each(|x| *x /= z);
    }
    (holevo_raw(states, entropies, &p), p)
}

/// Optimiser settings shared by all capacity estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub steps: usize,
    pub step_init: f64,
    pub seed: u64,
    /// Messages per copy; `None` means `d_{B_I}^2`.
    pub ensemble_size: Option<usize>,
    /// Stopping tolerance of the inner Blahut–Arimoto iterations (bits).
    pub tol: f64,
    /// Outcomes of Bob's POVM; `None` means `d_{B_I}^2`.
    pub povm_size: Option<usize>,
    /// Random completion maps tried per pair in the multiparty check.
    pub completion_samples: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 20,
            steps: 200,
            step_init: 0.3,
            seed: 0,
            ensemble_size: None,
            tol: 1e-10,
            povm_size: None,
            completion_samples: 2,
        }
    }
}

impl OptimizerConfig {
    pub fn check(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::OptimizerBudgetExceeded("at least one restart is required".into()));
        }
        let work = (self.restarts as u128) * (self.steps.max(1) as u128);
        if work > MAX_BUDGET as u128 {
            return Err(Error::OptimizerBudgetExceeded(format!(
                "{} restarts x {} steps exceeds {MAX_BUDGET}",
                self.restarts, self.steps
            )));
        }
        if !(self.step_init > 0.0 && self.step_init.is_finite()) {
            return Err(Error::InvalidArgument(format!("step_init {} must be positive", self.step_init)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol {} must be positive", self.tol)));
        }
        if self.ensemble_size == Some(0) || self.povm_size == Some(0) {
            return Err(Error::InvalidArgument("ensemble and POVM sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Result of a capacity estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub value_bits: f64,
    pub bound_bits: f64,
    /// `(restart_seed, value)` per restart, in restart order.
    pub optimizer_trace: Vec<(u64, f64)>,
    /// The states `Γ_m` reaching Bob, with the optimal message law.
    pub ensemble_used: Ensemble,
    pub satisfied: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::{choi_of_kraus, identity_choi};
    use crate::sampling::{random_density_matrix, seeded};
    use crate::tensor::systems;
    use proptest::prelude::*;
    use rand::Rng;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn ket_state(name: &str, amps: &[f64]) -> LabeledOperator {
        let v: Vec<C64> = amps.iter().map(|&a| c(a)).collect();
        LabeledOperator::projector(systems(&[(name, amps.len())]), &v).unwrap()
    }

    fn bsc(e: f64) -> ClassicalChannel {
        ClassicalChannel::new(vec![vec![1.0 - e, e], vec![e, 1.0 - e]]).unwrap()
    }

    fn grid_capacity(ch: &ClassicalChannel) -> f64 {
        (0..=1000)
            .map(|i| {
                let p = i as f64 / 1000.0;
                mutual_information(ch, &[p, 1.0 - p]).unwrap()
            })
            .fold(0.0, f64::max)
    }

    fn random_rows(rng: &mut impl Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
        (0..rows)
            .map(|_| {
                let r: Vec<f64> = (0..cols).map(|_| rng.random::<f64>() + 1e-3).collect();
                let s: f64 = r.iter().sum();
                r.into_iter().map(|x| x / s).collect()
            })
            .collect()
    }

    #[test]
    fn born_channel_examples() {
        let id = CPMap::identity("X", "Y", 2);
        let povm = Povm::computational("Y", 2);
        let e = Ensemble::uniform(vec![ket_state("X", &[1.0, 0.0]), ket_state("X", &[0.0, 1.0])]).unwrap();
        let ch = born_channel(&e, &id, &povm).unwrap();
        assert_eq!(ch.rows(), &[vec![1.0, 0.0], vec![0.0, 1.0]]);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let e = Ensemble::uniform(vec![ket_state("X", &[1.0, 0.0]), ket_state("X", &[h, h])]).unwrap();
        let ch = born_channel(&e, &id, &povm).unwrap();
        assert!((ch.rows()[1][0] - 0.5).abs() < 1e-12 && (ch.rows()[1][1] - 0.5).abs() < 1e-12);
        assert!((ch.rows()[0][0] - 1.0).abs() < 1e-12);

        let depol = CPMap::new(
            LabeledOperator::identity(systems(&[("X", 2), ("Y", 2)])).unwrap().scaled(0.5),
            vec!["X".into()],
            vec!["Y".into()],
        )
        .unwrap();
        let ch = born_channel(&e, &depol, &povm).unwrap();
        for r in ch.rows() {
            assert!((r[0] - 0.5).abs() < 1e-12);
        }
        let wrong = Povm::computational("Z", 2);
        assert!(matches!(born_channel(&e, &depol, &wrong), Err(Error::DimMismatch(_))));
    }

    #[test]
    fn error_probability_examples() {
        let id = ClassicalChannel::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(error_probabilities(&id).unwrap(), (vec![0.0, 0.0], 0.0));
        let u = ClassicalChannel::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_eq!(error_probabilities(&u).unwrap(), (vec![0.5, 0.5], 0.5));
        let ch = ClassicalChannel::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let (pe, worst) = error_probabilities(&ch).unwrap();
        assert!((pe[0] - 0.1).abs() < 1e-15 && (pe[1] - 0.2).abs() < 1e-15);
        assert!((worst - 0.2).abs() < 1e-15);
        let rect = ClassicalChannel::new(vec![vec![0.5, 0.5, 0.0]]).unwrap();
        assert!(matches!(error_probabilities(&rect), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn channel_must_be_stochastic() {
        assert!(ClassicalChannel::new(vec![vec![0.5, 0.6]]).is_err());
        assert!(ClassicalChannel::new(vec![vec![0.5, 0.5], vec![1.0]]).is_err());
    }

    #[test]
    fn mutual_information_examples() {
        let id = ClassicalChannel::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((mutual_information(&id, &[0.5, 0.5]).unwrap() - 1.0).abs() < 1e-15);
        let u = ClassicalChannel::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!(mutual_information(&u, &[0.5, 0.5]).unwrap().abs() < 1e-15);
        let closed = 1.0 + 0.9 * 0.9f64.log2() + 0.1 * 0.1f64.log2();
        assert!((mutual_information(&bsc(0.1), &[0.5, 0.5]).unwrap() - closed).abs() < 1e-12);
        assert!((closed - 0.531004).abs() < 1e-6);
        assert!(matches!(mutual_information(&id, &[1.0]), Err(Error::DimMismatch(_))));
    }

    #[test]
    fn blahut_arimoto_examples() {
        let closed = 1.0 + 0.9 * 0.9f64.log2() + 0.1 * 0.1f64.log2();
        let (cap, p) = blahut_arimoto(&bsc(0.1), 1e-12, 10_000).unwrap();
        assert!((cap - closed).abs() < 1e-6);
        assert!((p[0] - 0.5).abs() < 1e-6);

        for d in 2..6 {
            let rows = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
            let (cap, _) = blahut_arimoto(&ClassicalChannel::new(rows).unwrap(), 1e-12, 10_000).unwrap();
            assert!((cap - (d as f64).log2()).abs() < 1e-9);
        }

        let base = vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.3, 0.6]];
        let mut dup = base.clone();
        dup.push(base[1].clone());
        let (c_base, _) = blahut_arimoto(&ClassicalChannel::new(base).unwrap(), 1e-12, 100_000).unwrap();
        let (c_dup, _) = blahut_arimoto(&ClassicalChannel::new(dup).unwrap(), 1e-12, 100_000).unwrap();
        assert!((c_base - c_dup).abs() < 1e-6);
    }

    #[test]
    fn blahut_arimoto_matches_grid_search() {
        let mut rng = seeded(3);
        for k in 2..7 {
            for _ in 0..4 {
                let ch = ClassicalChannel::new(random_rows(&mut rng, 2, k)).unwrap();
                let (cap, _) = blahut_arimoto(&ch, 1e-10, 100_000).unwrap();
                let grid = grid_capacity(&ch);
                assert!(cap >= grid - 1e-9);
                assert!(cap - grid < 2e-3);
            }
        }
    }

    #[test]
    fn blahut_arimoto_reports_non_convergence() {
        let skewed = ClassicalChannel::new(vec![vec![0.9, 0.1], vec![0.4, 0.6]]).unwrap();
        assert!(matches!(blahut_arimoto(&skewed, 1e-15, 1), Err(Error::NoConvergence(1))));
    }

    #[test]
    fn holevo_examples() {
        let zero = ket_state("X", &[1.0, 0.0]);
        let one = ket_state("X", &[0.0, 1.0]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = ket_state("X", &[h, h]);
        let e = Ensemble::uniform(vec![zero.clone(), one]).unwrap();
        assert!((holevo_of_ensemble(&e) - 1.0).abs() < 1e-12);
        let e = Ensemble::new(vec![(1.0, plus.clone())]).unwrap();
        assert!(holevo_of_ensemble(&e).abs() < 1e-12);
        let e = Ensemble::uniform(vec![zero, plus]).unwrap();
        let lp = (1.0 + h) / 2.0;
        let lm = (1.0 - h) / 2.0;
        let oracle = -lp * lp.log2() - lm * lm.log2();
        assert!((holevo_of_ensemble(&e) - oracle).abs() < 1e-9);
        assert!((oracle - 0.600876).abs() < 1e-6);
    }

    #[test]
    fn ensemble_and_povm_invariants() {
        let zero = ket_state("X", &[1.0, 0.0]);
        assert!(Ensemble::new(vec![(0.4, zero.clone()), (0.5, zero.clone())]).is_err());
        assert!(Ensemble::new(vec![(1.0, zero.scaled(2.0))]).is_err());
        let p0 = LabeledOperator::basis_projector("X", 2, 0);
        assert!(Povm::new(vec![p0.clone()]).is_err());
        assert!(Povm::new(vec![p0.clone(), LabeledOperator::basis_projector("X", 2, 1)]).is_ok());
        let json = serde_json::to_string(&Ensemble::uniform(vec![zero]).unwrap()).unwrap();
        let back: Ensemble = serde_json::from_str(&json).unwrap();
        assert_eq!(back.len(), 1);
    }

    #[test]
    fn holevo_blahut_arimoto_finds_optimal_weights() {
        // Three states where uniform weights are suboptimal.
        let mut rng = seeded(5);
        let states: Vec<CMatrix> = (0..3).map(|_| random_density_matrix(&mut rng, 2)).collect();
        let ent: Vec<f64> = states.iter().map(crate::tensor::entropy_unchecked).collect();
        let (chi, p) = holevo_blahut_arimoto(&states, &ent, vec![1.0 / 3.0; 3], 1e-12, 10_000);
        let mut best: f64 = 0.0;
        for i in 0..=100 {
            for j in 0..=(100 - i) {
                let q = [i as f64 / 100.0, j as f64 / 100.0, (100 - i - j) as f64 / 100.0];
                best = best.max(holevo_raw(&states, &ent, &q));
            }
        }
        assert!(chi >= best - 1e-9);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn holevo_is_convex_in_the_channel() {
        let mut rng = seeded(9);
        for trial in 0..20 {
            let states: Vec<LabeledOperator> = (0..2)
                .map(|_| LabeledOperator::new(systems(&[("X", 2)]), random_density_matrix(&mut rng, 2)).unwrap())
                .collect();
            let e = Ensemble::new(vec![(0.3, states[0].clone()), (0.7, states[1].clone())]).unwrap();
            let k1 = crate::sampling::random_isometry(&mut rng, 4, 2);
            let k2 = crate::sampling::random_isometry(&mut rng, 4, 2);
            let split = |v: &CMatrix| vec![v.rows(0, 2).into_owned(), v.rows(2, 2).into_owned()];
            let m1 = choi_of_kraus(&split(&k1), "X", "Y").unwrap();
            let m2 = choi_of_kraus(&split(&k2), "X", "Y").unwrap();
            let lambda = trial as f64 / 19.0;
            let mix = CPMap::new(
                m1.choi().scaled(lambda).add(&m2.choi().scaled(1.0 - lambda)).unwrap(),
                vec!["X".into()],
                vec!["Y".into()],
            )
            .unwrap();
            let out = |m: &CPMap| {
                Ensemble::new(e.items().iter().map(|i| (i.p, m.apply(&i.state).unwrap())).collect()).unwrap()
            };
            let lhs = holevo_of_ensemble(&out(&mix));
            let rhs = lambda * holevo_of_ensemble(&out(&m1)) + (1.0 - lambda) * holevo_of_ensemble(&out(&m2));
            assert!(lhs <= rhs + 1e-9, "trial {trial}: {lhs} > {rhs}");
        }
        let _ = identity_choi("X", "Y", 2);
    }

    proptest! {
        #[test]
        fn mutual_information_is_convex_in_the_channel(seed in 0u64..10_000, lambda in 0.0f64..=1.0, k in 2usize..5) {
            let mut rng = seeded(seed);
            let p = ClassicalChannel::new(random_rows(&mut rng, 3, k)).unwrap();
            let q = ClassicalChannel::new(random_rows(&mut rng, 3, k)).unwrap();
            let input: Vec<f64> = { let r = random_rows(&mut rng, 1, 3); r[0].clone() };
            let mixed = p.mix(lambda, &q).unwrap();
            let lhs = mutual_information(&mixed, &input).unwrap();
            let rhs = lambda * mutual_information(&p, &input).unwrap() + (1.0 - lambda) * mutual_information(&q, &input).unwrap();
            prop_assert!(lhs <= rhs + 1e-12);
        }

        #[test]
        fn mutual_information_is_bounded(seed in 0u64..10_000, rows in 1usize..5, cols in 1usize..5) {
            let mut rng = seeded(seed);
            let ch = ClassicalChannel::new(random_rows(&mut rng, rows, cols)).unwrap();
            let input = random_rows(&mut rng, 1, rows)[0].clone();
            let i = mutual_information(&ch, &input).unwrap();
            prop_assert!(i >= 0.0);
            prop_assert!(i <= (rows.min(cols) as f64).log2() + 1e-12);
        }
    }
}
