//! Choi matrices of local operations and their composition with processes.
//!
//! Choi convention: `M = Σ_{ij} |i⟩⟨j| ⊗ 𝓜(|i⟩⟨j|)` (unnormalised), with the
//! input labels first. Composition uses the link product
//!
//! ```text
//! P * Q = tr_{P∩Q}[(1 ⊗ P^{T_{P∩Q}})(Q ⊗ 1)]
//! ```
//!
//! which is commutative up to label order and reduces to `P ⊗ Q` when the
//! label sets are disjoint.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{ProcessMatrix, A_I, A_O, B_I, B_O, DEFAULT_TOL};
use crate::tensor::{systems, CMatrix, LabeledOperator, Subsystem, C64};

/// Largest operator side the composition routines will build.
pub const DEFAULT_DIM_GUARD: usize = 4096;

/// Label of the control register added by [`controlled_map`].
pub const CONTROL: &str = "C";

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// A completely positive map in Choi form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CPMapJson", into = "CPMapJson")]
pub struct CPMap {
    choi: LabeledOperator,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct CPMapJson {
    #[serde(flatten)]
    choi: LabeledOperator,
    #[serde(rename = "in")]
    inputs: Vec<String>,
    #[serde(rename = "out")]
    outputs: Vec<String>,
}

impl TryFrom<CPMapJson> for CPMap {
    type Error = Error;

    fn try_from(raw: CPMapJson) -> Result<Self> {
        CPMap::new(raw.choi, raw.inputs, raw.outputs)
    }
}

impl From<CPMap> for CPMapJson {
    fn from(m: CPMap) -> Self {
        CPMapJson {
            choi: m.choi,
            inputs: m.inputs,
            outputs: m.outputs,
        }
    }
}

impl CPMap {
    /// `inputs` and `outputs` must partition the Choi labels. The Choi
    /// matrix is reordered to inputs-then-outputs.
    pub fn new(choi: LabeledOperator, inputs: Vec<String>, outputs: Vec<String>) -> Result<Self> {
        let mut order: Vec<&str> = inputs.iter().map(String::as_str).collect();
        order.extend(outputs.iter().map(String::as_str));
        if order.len() != choi.systems().len() {
            return Err(Error::LabelMismatch(format!(
                "in {inputs:?} / out {outputs:?} do not partition {:?}",
                choi.names()
            )));
        }
        let choi = choi.permute(&order).map_err(|_| {
            Error::LabelMismatch(format!(
                "in {inputs:?} / out {outputs:?} do not partition {:?}",
                choi.names()
            ))
        })?;
        Ok(Self { choi, inputs, outputs })
    }

    /// Map with isometry `v: C^{d_in} -> C^{d_out} ⊗ C^{env}` (output most significant).
    pub fn from_isometry(v: &CMatrix, input: &[Subsystem], output: &[Subsystem]) -> Result<Self> {
        let d_in: usize = input.iter().map(|s| s.dim).product();
        let d_out: usize = output.iter().map(|s| s.dim).product();
        if v.ncols() != d_in || !v.nrows().is_multiple_of(d_out) {
            return Err(Error::DimMismatch(format!(
                "isometry {}x{} vs d_in {d_in}, d_out {d_out}",
                v.nrows(),
                v.ncols()
            )));
        }
        let mut labels = input.to_vec();
        labels.extend_from_slice(output);
        let choi = LabeledOperator::new(labels, choi_from_isometry(v, d_in, d_out))?;
        Self::new(
            choi,
            input.iter().map(|s| s.name.clone()).collect(),
            output.iter().map(|s| s.name.clone()).collect(),
        )
    }

    pub fn identity(input: &str, output: &str, d: usize) -> Self {
        Self {
            choi: identity_choi(input, output, d),
            inputs: vec![input.to_string()],
            outputs: vec![output.to_string()],
        }
    }

    /// Discards the input and prepares `state`.
    pub fn replacement(input: &[Subsystem], state: &LabeledOperator) -> Result<Self> {
        let choi = LabeledOperator::identity(input.to_vec())?.tensor(state)?;
        Self::new(
            choi,
            input.iter().map(|s| s.name.clone()).collect(),
            state.names().iter().map(|s| s.to_string()).collect(),
        )
    }

    pub fn choi(&self) -> &LabeledOperator {
        &self.choi
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    fn input_refs(&self) -> Vec<&str> {
        self.inputs.iter().map(String::as_str).collect()
    }

    fn output_refs(&self) -> Vec<&str> {
        self.outputs.iter().map(String::as_str).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.choi.systems()[..self.inputs.len()].iter().map(|s| s.dim).product()
    }

    pub fn output_dim(&self) -> usize {
        self.choi.systems()[self.inputs.len()..].iter().map(|s| s.dim).product()
    }

    pub fn input_systems(&self) -> &[Subsystem] {
        &self.choi.systems()[..self.inputs.len()]
    }

    pub fn output_systems(&self) -> &[Subsystem] {
        &self.choi.systems()[self.inputs.len()..]
    }

    /// `‖tr_out M − 1_in‖_F`.
    pub fn trace_preservation_defect(&self) -> f64 {
        let marginal = self
            .choi
            .partial_trace(&self.output_refs())
            .expect("outputs are Choi labels");
        let n = marginal.side();
        (marginal.matrix() - CMatrix::identity(n, n)).norm()
    }

    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        self.trace_preservation_defect() <= tol
    }

    pub fn is_cp(&self, tol: f64) -> bool {
        self.choi.is_psd(tol) && self.choi.hermiticity_defect() <= tol
    }

    pub fn check_cptp(&self, tol: f64) -> Result<()> {
        if !self.is_cp(tol) {
            return Err(Error::NotCPTP(format!(
                "Choi matrix has eigenvalue {:.3e}",
                self.choi.min_eigenvalue()
            )));
        }
        let defect = self.trace_preservation_defect();
        if defect > tol {
            return Err(Error::NotCPTP(format!("trace-preservation defect {defect:.3e}")));
        }
        Ok(())
    }

    /// `𝓜(ρ) = ρ * M`.
    pub fn apply(&self, rho: &LabeledOperator) -> Result<LabeledOperator> {
        let mut names = rho.names();
        names.sort_unstable();
        let mut ins = self.input_refs();
        ins.sort_unstable();
        if names != ins {
            return Err(Error::LabelMismatch(format!(
                "state on {:?}, map input {:?}",
                rho.names(),
                self.inputs
            )));
        }
        let out = link_product(rho, &self.choi)?;
        out.permute(&self.output_refs())
    }

    /// Parallel composition `𝓜 ⊗ 𝓝`.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let choi = self.choi.tensor(&other.choi)?;
        let mut inputs = self.inputs.clone();
        inputs.extend(other.inputs.iter().cloned());
        let mut outputs = self.outputs.clone();
        outputs.extend(other.outputs.iter().cloned());
        Self::new(choi, inputs, outputs)
    }

    pub fn relabeled(&self, renames: &[(&str, &str)]) -> Result<Self> {
        let rename = |n: &String| {
            renames
                .iter()
                .find(|(from, _)| from == n)
                .map(|(_, to)| to.to_string())
                .unwrap_or_else(|| n.clone())
        };
        Self::new(
            self.choi.relabeled(renames)?,
            self.inputs.iter().map(rename).collect(),
            self.outputs.iter().map(rename).collect(),
        )
    }

    /// Scales the Choi matrix (used for instrument elements).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            choi: self.choi.scaled(factor),
            ..self.clone()
        }
    }
}

/// An instrument: CP maps on common labels summing to a channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<CPMap>", into = "Vec<CPMap>")]
pub struct Instrument {
    elements: Vec<CPMap>,
}

impl TryFrom<Vec<CPMap>> for Instrument {
    type Error = Error;

    fn try_from(elements: Vec<CPMap>) -> Result<Self> {
        Instrument::new(elements, DEFAULT_TOL)
    }
}

impl From<Instrument> for Vec<CPMap> {
    fn from(i: Instrument) -> Self {
        i.elements
    }
}

impl Instrument {
    pub fn new(elements: Vec<CPMap>, tol: f64) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| Error::NotAnInstrument("no elements".into()))?;
        let mut sum = first.choi.clone();
        for e in &elements[1..] {
            if e.inputs != first.inputs || e.outputs != first.outputs {
                return Err(Error::NotAnInstrument("elements act on different labels".into()));
            }
            sum = sum.add(&e.choi).map_err(|err| Error::NotAnInstrument(err.to_string()))?;
        }
        for (k, e) in elements.iter().enumerate() {
            if !e.is_cp(tol) {
                return Err(Error::NotAnInstrument(format!("element {k} is not CP")));
            }
        }
        let total = CPMap::new(sum, first.inputs.clone(), first.outputs.clone())?;
        let defect = total.trace_preservation_defect();
        if defect > tol {
            return Err(Error::NotAnInstrument(format!("elements sum to a map with TP defect {defect:.3e}")));
        }
        Ok(Self { elements })
    }

    pub fn elements(&self) -> &[CPMap] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Choi matrix of the isometry `v: C^{d_in} -> C^{d_out} ⊗ C^{env}`,
/// tracing out the environment; indices are `(in, out)`.
pub fn choi_from_isometry(v: &CMatrix, d_in: usize, d_out: usize) -> CMatrix {
    let env = v.nrows() / d_out;
    let n = d_in * d_out;
    CMatrix::from_fn(n, n, |r, c| {
        let (i, o) = (r / d_out, r % d_out);
        let (j, o2) = (c / d_out, c % d_out);
        (0..env)
            .map(|e| v[(o * env + e, i)] * v[(o2 * env + e, j)].conj())
            .sum()
    })
}

/// `Σ_{ij} |i⟩⟨j| ⊗ |i⟩⟨j|` on `(input, output)`.
pub fn identity_choi(input: &str, output: &str, d: usize) -> LabeledOperator {
    let m = CMatrix::from_fn(d * d, d * d, |r, c| {
        if r / d == r % d && c / d == c % d {
            C64::new(1.0, 0.0)
        } else {
            zero()
        }
    });
    LabeledOperator::new(systems(&[(input, d), (output, d)]), m).expect("square by construction")
}

/// Choi matrix of the map with Kraus operators `kraus` (`d_out x d_in` each).
pub fn choi_of_kraus(kraus: &[CMatrix], input: &str, output: &str) -> Result<CPMap> {
    let first = kraus
        .first()
        .ok_or(Error::ShapeMismatch { rows: 0, cols: 0, expected: 0 })?;
    let (d_out, d_in) = first.shape();
    for k in kraus {
        if k.shape() != (d_out, d_in) {
            return Err(Error::ShapeMismatch {
                rows: k.nrows(),
                cols: k.ncols(),
                expected: d_out,
            });
        }
    }
    let n = d_in * d_out;
    let m = CMatrix::from_fn(n, n, |r, c| {
        let (i, o) = (r / d_out, r % d_out);
        let (j, o2) = (c / d_out, c % d_out);
        kraus.iter().map(|k| k[(o, i)] * k[(o2, j)].conj()).sum()
    });
    let choi = LabeledOperator::new(systems(&[(input, d_in), (output, d_out)]), m)?;
    CPMap::new(choi, vec![input.into()], vec![output.into()])
}

/// The link product `p * q`; the result carries `p`'s private labels
/// followed by `q`'s.
pub fn link_product(p: &LabeledOperator, q: &LabeledOperator) -> Result<LabeledOperator> {
    let shared: Vec<&str> = p.names().into_iter().filter(|n| q.has_label(n)).collect();
    for s in &shared {
        let (dp, dq) = (p.dim_of(s)?, q.dim_of(s)?);
        if dp != dq {
            return Err(Error::DimMismatch(format!("shared label `{s}`: {dp} vs {dq}")));
        }
    }
    if shared.is_empty() {
        return p.tensor(q);
    }
    let p_only: Vec<&str> = p.names().into_iter().filter(|n| !shared.contains(n)).collect();
    let q_only: Vec<&str> = q.names().into_iter().filter(|n| !shared.contains(n)).collect();

    let mut p_order = p_only.clone();
    p_order.extend(&shared);
    let mut q_order = shared.clone();
    q_order.extend(&q_only);
    let pm = p.permute(&p_order)?.into_matrix();
    let qm = q.permute(&q_order)?.into_matrix();

    let ds: usize = shared.iter().map(|s| p.dim_of(s).unwrap()).product();
    let dp = pm.nrows() / ds;
    let dq = qm.nrows() / ds;

    // R[(a,b),(a2,b2)] = Σ_{s,s2} P[(a,s2),(a2,s)] Q[(s2,b),(s,b2)]
    let n = dp * dq;
    let mut r = CMatrix::zeros(n, n);
    for a in 0..dp {
        for a2 in 0..dp {
            for b in 0..dq {
                for b2 in 0..dq {
                    let mut acc = zero();
                    for s2 in 0..ds {
                        let prow = a * ds + s2;
                        let qrow = s2 * dq + b;
                        for s in 0..ds {
                            acc += pm[(prow, a2 * ds + s)] * qm[(qrow, s * dq + b2)];
                        }
                    }
                    r[(a * dq + b, a2 * dq + b2)] = acc;
                }
            }
        }
    }
    let mut labels: Vec<Subsystem> = p_only
        .iter()
        .map(|n| Subsystem::new(*n, p.dim_of(n).unwrap()))
        .collect();
    labels.extend(q_only.iter().map(|n| Subsystem::new(*n, q.dim_of(n).unwrap())));
    LabeledOperator::new(labels, r)
}

fn require_labels(map: &CPMap, ins: &[&str], outs: &[&str], what: &str) -> Result<()> {
    let has_in = ins.iter().all(|l| map.inputs.iter().any(|x| x == l));
    let has_out = outs.iter().all(|l| map.outputs.iter().any(|x| x == l));
    if !has_in || !has_out {
        return Err(Error::LabelMismatch(format!(
            "{what} must map {ins:?} -> {outs:?}, found {:?} -> {:?}",
            map.inputs, map.outputs
        )));
    }
    Ok(())
}

fn compose_with(a: &CPMap, b: &CPMap, w: &LabeledOperator) -> Result<CPMap> {
    require_labels(a, &[A_I], &[A_O], "Alice's map")?;
    require_labels(b, &[B_I], &[B_O], "Bob's map")?;
    a.check_cptp(DEFAULT_TOL)?;
    b.check_cptp(DEFAULT_TOL)?;
    let local = a.tensor(b)?;
    let n = link_product(w, &local.choi)?;
    let keep = |v: &[String], drop: &str| v.iter().filter(|x| *x != drop).cloned().collect::<Vec<_>>();
    let mut inputs = keep(&a.inputs, A_I);
    inputs.extend(keep(&b.inputs, B_I));
    let mut outputs = keep(&a.outputs, A_O);
    outputs.extend(keep(&b.outputs, B_O));
    CPMap::new(n, inputs, outputs)
}

/// `N(𝒜, ℬ, W) = W * (A ⊗ B)`: the channel from Alice's ancillary input to
/// Bob's ancillary output.
pub fn induced_channel(a: &CPMap, b: &CPMap, w: &ProcessMatrix) -> Result<CPMap> {
    compose_with(a, b, w.op())
}

/// Fixed stationary operation for Bob: `1/d^{B_O} ⊗ id^{B_I -> out}`.
pub fn stationary_bob(d_b_in: usize, d_b_out: usize, out_label: &str) -> Result<CPMap> {
    let choi = identity_choi(B_I, out_label, d_b_in).tensor(&LabeledOperator::maximally_mixed(systems(&[(B_O, d_b_out)]))?)?;
    CPMap::new(choi, vec![B_I.into()], vec![B_O.into(), out_label.into()])
}

/// `tr_{B_O} W / d_{B_O}` on `(A_I, A_O, B_I)`.
pub fn reduced_for_alice(w: &ProcessMatrix) -> LabeledOperator {
    let d_bo = w.dims().b_out as f64;
    w.op()
        .partial_trace(&[B_O])
        .expect("canonical process labels")
        .scaled(1.0 / d_bo)
}

/// `Γ(A_m, W) = A_m * tr_{B_O}W / d_{B_O}`: the state on `B_I` produced by
/// Alice's channel `A_m: A_I -> A_O`.
pub fn gamma(a_m: &CPMap, w: &ProcessMatrix) -> Result<LabeledOperator> {
    if a_m.inputs != [A_I] || a_m.outputs != [A_O] {
        return Err(Error::LabelMismatch(format!(
            "encoding must map [{A_I}] -> [{A_O}], found {:?} -> {:?}",
            a_m.inputs, a_m.outputs
        )));
    }
    a_m.check_cptp(DEFAULT_TOL)?;
    link_product(a_m.choi(), &reduced_for_alice(w))
}

/// Name of label `base` on copy `j` (1-based) of an `n`-fold product;
/// plain `base` when `n == 1`.
pub fn copy_label(base: &str, j: usize, n: usize) -> String {
    if n == 1 {
        base.to_string()
    } else {
        format!("{base}^{j}")
    }
}

/// `tr_{B_O} W / d_{B_O}` for `n` copies, on labels ordered as all `A_I`
/// copies, all `A_O` copies, then all `B_I` copies.
pub fn reduced_for_alice_n(w: &ProcessMatrix, n: usize, guard: usize) -> Result<LabeledOperator> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let dims = w.dims();
    let side = (dims.a_in * dims.a_out * dims.b_in).checked_pow(n as u32).unwrap_or(usize::MAX);
    if side > guard {
        return Err(Error::TooLarge { side, limit: guard });
    }
    let single = reduced_for_alice(w);
    let mut acc: Option<LabeledOperator> = None;
    for j in 1..=n {
        let names = [A_I, A_O, B_I].map(|b| copy_label(b, j, n));
        let copy = single.relabeled(&[(A_I, &names[0]), (A_O, &names[1]), (B_I, &names[2])])?;
        acc = Some(match acc {
            None => copy,
            Some(a) => a.tensor(&copy)?,
        });
    }
    let order: Vec<String> = [A_I, A_O, B_I]
        .iter()
        .flat_map(|b| (1..=n).map(move |j| copy_label(b, j, n)))
        .collect();
    acc.unwrap().permute(&order.iter().map(String::as_str).collect::<Vec<_>>())
}

/// Joint encoding over `n` copies: `A^{(n)} * tr_{⊗B_O} W^{⊗n} / Π d_{B_O}`,
/// a state on `B_I^1 … B_I^n`.
pub fn gamma_joint(a_joint: &CPMap, w: &ProcessMatrix, n: usize) -> Result<LabeledOperator> {
    gamma_joint_with_guard(a_joint, w, n, DEFAULT_DIM_GUARD)
}

pub fn gamma_joint_with_guard(a_joint: &CPMap, w: &ProcessMatrix, n: usize, guard: usize) -> Result<LabeledOperator> {
    let ins: Vec<String> = (1..=n).map(|j| copy_label(A_I, j, n)).collect();
    let outs: Vec<String> = (1..=n).map(|j| copy_label(A_O, j, n)).collect();
    let mut got_in = a_joint.inputs.clone();
    got_in.sort();
    let mut got_out = a_joint.outputs.clone();
    got_out.sort();
    let (mut want_in, mut want_out) = (ins.clone(), outs.clone());
    want_in.sort();
    want_out.sort();
    if got_in != want_in || got_out != want_out {
        return Err(Error::LabelMismatch(format!(
            "joint encoding must map {ins:?} -> {outs:?}, found {:?} -> {:?}",
            a_joint.inputs, a_joint.outputs
        )));
    }
    if a_joint.choi.side() > guard {
        return Err(Error::TooLarge { side: a_joint.choi.side(), limit: guard });
    }
    a_joint.check_cptp(DEFAULT_TOL)?;
    let reduced = reduced_for_alice_n(w, n, guard)?;
    let g = link_product(a_joint.choi(), &reduced)?;
    let order: Vec<String> = (1..=n).map(|j| copy_label(B_I, j, n)).collect();
    g.permute(&order.iter().map(String::as_str).collect::<Vec<_>>())
}

/// `Ā(|j⟩⟨j| ⊗ ρ) = A_j(ρ)`: a single channel with a classical control `C`
/// of dimension `maps.len()` selecting which map acts.
pub fn controlled_map(maps: &[CPMap]) -> Result<CPMap> {
    let first = maps
        .first()
        .ok_or_else(|| Error::LabelMismatch("no maps to control".into()))?;
    for m in maps {
        if m.inputs != first.inputs || m.outputs != first.outputs || m.choi.dims() != first.choi.dims() {
            return Err(Error::LabelMismatch("controlled maps must share labels and dimensions".into()));
        }
        if m.inputs.iter().any(|l| l == CONTROL) {
            return Err(Error::LabelMismatch(format!("label `{CONTROL}` is reserved for the control")));
        }
        m.check_cptp(DEFAULT_TOL)?;
    }
    let n = maps.len();
    let inner = first.choi.side();
    let mut block = CMatrix::zeros(n * inner, n * inner);
    for (j, m) in maps.iter().enumerate() {
        block
            .view_mut((j * inner, j * inner), (inner, inner))
            .copy_from(m.choi.matrix());
    }
    let mut labels = vec![Subsystem::new(CONTROL, n)];
    labels.extend(first.choi.systems().iter().cloned());
    let mut inputs = vec![CONTROL.to_string()];
    inputs.extend(first.inputs.iter().cloned());
    CPMap::new(LabeledOperator::new(labels, block)?, inputs, first.outputs.clone())
}

/// `‖N(a, b, W) − N(a, b, _{B_O}W)‖_F`; zero whenever Alice has no
/// ancillary output.
pub fn bob_output_replacement_residual(a: &CPMap, b: &CPMap, w: &ProcessMatrix) -> Result<f64> {
    let n = compose_with(a, b, w.op())?;
    let replaced = w.op().trace_and_replace(&[B_O])?;
    let n_rep = compose_with(a, b, &replaced)?;
    n.choi.distance(&n_rep.choi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{process_from_channel, process_from_shared_state, ProcessDims};
    use crate::sampling::{random_density_matrix, random_isometry, seeded};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn pauli(k: usize) -> CMatrix {
        let (o, l, i) = (c(0.0), c(1.0), C64::new(0.0, 1.0));
        match k {
            0 => CMatrix::from_row_slice(2, 2, &[l, o, o, l]),
            1 => CMatrix::from_row_slice(2, 2, &[o, l, l, o]),
            2 => CMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
            _ => CMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
        }
    }

    fn state(name: &str, m: CMatrix) -> LabeledOperator {
        let d = m.nrows();
        LabeledOperator::new(systems(&[(name, d)]), m).unwrap()
    }

    fn random_channel(seed: u64, input: &[Subsystem], output: &[Subsystem]) -> CPMap {
        let din: usize = input.iter().map(|s| s.dim).product();
        let dout: usize = output.iter().map(|s| s.dim).product();
        let v = random_isometry(&mut seeded(seed), dout * din * dout, din);
        CPMap::from_isometry(&v, input, output).unwrap()
    }

    fn id_process() -> ProcessMatrix {
        let half = LabeledOperator::maximally_mixed(systems(&[(A_I, 2)])).unwrap();
        process_from_channel(&half, &identity_choi(A_O, B_I, 2)).unwrap()
    }

    #[test]
    fn kraus_choi_examples() {
        let id = choi_of_kraus(&[pauli(0)], "X", "Y").unwrap();
        assert_eq!(id.choi(), &identity_choi("X", "Y", 2));
        assert!((id.choi().trace().re - 2.0).abs() < 1e-15);
        assert!(id.is_trace_preserving(1e-12));

        let depol: Vec<CMatrix> = (0..4).map(|k| pauli(k) * c(0.5)).collect();
        let m = choi_of_kraus(&depol, "X", "Y").unwrap();
        let expect = CMatrix::identity(4, 4) * c(0.5);
        assert!((m.choi().matrix() - expect).norm() < 1e-15);
        assert!(m.is_trace_preserving(1e-12));

        let p0 = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]);
        let m = choi_of_kraus(&[p0], "X", "Y").unwrap();
        assert!(m.is_cp(1e-12));
        assert!(!m.is_trace_preserving(1e-9));

        let bad = [pauli(0), CMatrix::identity(3, 2)];
        assert!(matches!(choi_of_kraus(&bad, "X", "Y"), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn link_through_identity_choi_transports_state() {
        let rho = state("A", random_density_matrix(&mut seeded(1), 2));
        let out = link_product(&rho, &identity_choi("A", "B", 2)).unwrap();
        assert_eq!(out.names(), vec!["B"]);
        // Brute-force index sum: out[q,q'] = Σ_{s,s2} ρ[s2,s] C[(s2,q),(s,q')].
        let choi = identity_choi("A", "B", 2);
        for q in 0..2 {
            for q2 in 0..2 {
                let mut acc = c(0.0);
                for s in 0..2 {
                    for s2 in 0..2 {
                        acc += rho.matrix()[(s2, s)] * choi.matrix()[(s2 * 2 + q, s * 2 + q2)];
                    }
                }
                assert!((out.matrix()[(q, q2)] - acc).norm() < 1e-15);
                assert!((out.matrix()[(q, q2)] - rho.matrix()[(q, q2)]).norm() < 1e-15);
            }
        }
        let depol = LabeledOperator::identity(systems(&[("A", 2), ("B", 2)])).unwrap().scaled(0.5);
        let out = link_product(&rho, &depol).unwrap();
        assert!((out.matrix() - CMatrix::identity(2, 2) * c(0.5)).norm() < 1e-15);
    }

    #[test]
    fn disjoint_link_is_tensor_and_mismatch_is_error() {
        let a = state("A", random_density_matrix(&mut seeded(2), 2));
        let b = state("B", random_density_matrix(&mut seeded(3), 3));
        assert_eq!(link_product(&a, &b).unwrap(), a.tensor(&b).unwrap());
        let a3 = state("B", random_density_matrix(&mut seeded(2), 2));
        assert!(matches!(link_product(&a3, &b), Err(Error::DimMismatch(_))));
    }

    #[test]
    fn link_is_commutative_and_full_overlap_is_trace() {
        let mut rng = seeded(4);
        let p = LabeledOperator::new(systems(&[("A", 2), ("S", 3)]), random_density_matrix(&mut rng, 6)).unwrap();
        let q = LabeledOperator::new(systems(&[("S", 3), ("B", 2)]), random_density_matrix(&mut rng, 6)).unwrap();
        let pq = link_product(&p, &q).unwrap();
        let qp = link_product(&q, &p).unwrap();
        assert!(pq.distance(&qp).unwrap() < 1e-12);

        let q_full = LabeledOperator::new(systems(&[("S", 3), ("A", 2)]), random_density_matrix(&mut rng, 6)).unwrap();
        let s = link_product(&p, &q_full).unwrap();
        assert_eq!(s.side(), 1);
        let q_al = p.align(&q_full).unwrap();
        let direct = (p.matrix().transpose() * q_al.matrix()).trace();
        assert!((s.matrix()[(0, 0)] - direct).norm() < 1e-12);
    }

    #[test]
    fn apply_matches_kraus_action() {
        let mut rng = seeded(8);
        let v = random_isometry(&mut rng, 2 * 6, 3);
        let map = CPMap::from_isometry(&v, &systems(&[("X", 3)]), &systems(&[("Y", 2)])).unwrap();
        assert!(map.is_trace_preserving(1e-12));
        let rho = random_density_matrix(&mut rng, 3);
        let out = map.apply(&state("X", rho.clone())).unwrap();
        let mut expect = CMatrix::zeros(2, 2);
        for e in 0..6 {
            let k = CMatrix::from_fn(2, 3, |o, i| v[(o * 6 + e, i)]);
            expect += &k * &rho * k.adjoint();
        }
        assert!((out.matrix() - expect).norm() < 1e-12);
    }

    #[test]
    fn cpmap_json_round_trip() {
        let m = CPMap::identity("X", "Y", 2);
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains(r#""in":["X"]"#) && s.contains(r#""out":["Y"]"#));
        let back: CPMap = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }

    /// Alice swaps her ancilla into A_O and ignores A_I.
    fn alice_swap() -> CPMap {
        let choi = LabeledOperator::identity(systems(&[(A_I, 2)]))
            .unwrap()
            .tensor(&identity_choi("A'_I", A_O, 2))
            .unwrap();
        CPMap::new(choi, vec!["A'_I".into(), A_I.into()], vec![A_O.into()]).unwrap()
    }

    #[test]
    fn induced_channel_of_identity_process_is_identity() {
        let bob = stationary_bob(2, 2, "B'_O").unwrap();
        let n = induced_channel(&alice_swap(), &bob, &id_process()).unwrap();
        assert_eq!(n.inputs(), ["A'_I"]);
        assert_eq!(n.outputs(), ["B'_O"]);
        assert!(n.choi().distance(&identity_choi("A'_I", "B'_O", 2)).unwrap() < 1e-9);
    }

    #[test]
    fn shared_state_process_induces_constant_channel() {
        let phi = identity_choi(A_I, B_I, 2).scaled(0.5);
        let w = process_from_shared_state(&phi).unwrap();
        let a = random_channel(5, &systems(&[("A'_I", 2), (A_I, 2)]), &systems(&[(A_O, 2)]));
        let b = random_channel(6, &systems(&[(B_I, 2)]), &systems(&[(B_O, 2), ("B'_O", 2)]));
        let n = induced_channel(&a, &b, &w).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let inputs = [
            LabeledOperator::basis_projector("A'_I", 2, 0),
            LabeledOperator::basis_projector("A'_I", 2, 1),
            LabeledOperator::projector(systems(&[("A'_I", 2)]), &[c(h), c(h)]).unwrap(),
        ];
        let outs: Vec<_> = inputs.iter().map(|r| n.apply(r).unwrap()).collect();
        assert!(outs[0].distance(&outs[1]).unwrap() < 1e-12);
        assert!(outs[0].distance(&outs[2]).unwrap() < 1e-12);
    }

    #[test]
    fn discarding_bob_gives_constant_channel() {
        let sigma = state("B'_O", random_density_matrix(&mut seeded(9), 2));
        let prep = LabeledOperator::maximally_mixed(systems(&[(B_O, 2)])).unwrap().tensor(&sigma).unwrap();
        let bob = CPMap::replacement(&systems(&[(B_I, 2)]), &prep).unwrap();
        let n = induced_channel(&alice_swap(), &bob, &id_process()).unwrap();
        for k in 0..2 {
            let out = n.apply(&LabeledOperator::basis_projector("A'_I", 2, k)).unwrap();
            assert!(out.distance(&sigma).unwrap() < 1e-12);
        }
    }

    #[test]
    fn induced_channels_are_cptp() {
        for seed in 0..20 {
            let w = crate::process::random_process(ProcessDims::uniform(2), 0.2, seed).unwrap();
            let a = random_channel(seed + 100, &systems(&[("A'_I", 2), (A_I, 2)]), &systems(&[(A_O, 2)]));
            let b = random_channel(seed + 200, &systems(&[(B_I, 2)]), &systems(&[(B_O, 2), ("B'_O", 2)]));
            let n = induced_channel(&a, &b, &w).unwrap();
            assert!(n.choi().min_eigenvalue() >= -1e-9);
            assert!(n.trace_preservation_defect() <= 1e-9);
        }
    }

    #[test]
    fn induced_channel_rejects_non_cptp_maps() {
        let choi = LabeledOperator::identity(systems(&[(A_I, 2), (A_O, 2)])).unwrap();
        let a = CPMap::new(choi, vec![A_I.into()], vec![A_O.into()]).unwrap();
        let bob = stationary_bob(2, 2, "B'_O").unwrap();
        assert!(matches!(induced_channel(&a, &bob, &id_process()), Err(Error::NotCPTP(_))));
        assert!(matches!(
            induced_channel(&bob, &bob, &id_process()),
            Err(Error::LabelMismatch(_))
        ));
    }

    fn preparation(sigma: &LabeledOperator) -> CPMap {
        CPMap::replacement(&systems(&[(A_I, 2)]), sigma).unwrap()
    }

    #[test]
    fn gamma_examples() {
        let sigma = state(A_O, random_density_matrix(&mut seeded(10), 2));
        let g = gamma(&preparation(&sigma), &id_process()).unwrap();
        assert_eq!(g.names(), vec![B_I]);
        assert!((g.matrix() - sigma.matrix()).norm() < 1e-12);

        let rho = LabeledOperator::new(systems(&[(A_I, 2), (B_I, 2)]), random_density_matrix(&mut seeded(11), 4)).unwrap();
        let w = process_from_shared_state(&rho).unwrap();
        let marginal = rho.partial_trace(&[A_I]).unwrap();
        let a1 = random_channel(12, &systems(&[(A_I, 2)]), &systems(&[(A_O, 2)]));
        let a2 = random_channel(13, &systems(&[(A_I, 2)]), &systems(&[(A_O, 2)]));
        assert!(gamma(&a1, &w).unwrap().distance(&marginal).unwrap() < 1e-12);
        assert!(gamma(&a2, &w).unwrap().distance(&marginal).unwrap() < 1e-12);

        let u = ProcessMatrix::uniform(ProcessDims::uniform(2)).unwrap();
        let g = gamma(&a1, &u).unwrap();
        assert!((g.matrix() - CMatrix::identity(2, 2) * c(0.5)).norm() < 1e-12);
    }

    #[test]
    fn gamma_is_a_state_for_random_inputs() {
        for seed in 0..20 {
            let w = crate::process::random_process(ProcessDims::new(2, 3, 2, 2), 0.1, seed).unwrap();
            let a = random_channel(seed + 50, &systems(&[(A_I, 2)]), &systems(&[(A_O, 3)]));
            let g = gamma(&a, &w).unwrap();
            assert!((g.trace().re - 1.0).abs() < 1e-9);
            assert!(g.is_psd(1e-9));
        }
    }

    #[test]
    fn gamma_joint_reductions() {
        let a = random_channel(20, &systems(&[(A_I, 2)]), &systems(&[(A_O, 2)]));
        let w = crate::process::random_process(ProcessDims::uniform(2), 0.2, 3).unwrap();
        let g1 = gamma_joint(&a, &w, 1).unwrap();
        assert!(g1.distance(&gamma(&a, &w).unwrap()).unwrap() < 1e-15);

        let sigma = state(A_O, random_density_matrix(&mut seeded(21), 2));
        let prep = preparation(&sigma);
        let p1 = prep.relabeled(&[(A_I, "A_I^1"), (A_O, "A_O^1")]).unwrap();
        let p2 = prep.relabeled(&[(A_I, "A_I^2"), (A_O, "A_O^2")]).unwrap();
        let g = gamma_joint(&p1.tensor(&p2).unwrap(), &id_process(), 2).unwrap();
        assert_eq!(g.names(), vec!["B_I^1", "B_I^2"]);
        let expect = sigma.matrix().kronecker(sigma.matrix());
        assert!((g.matrix() - expect).norm() < 1e-12);
    }

    #[test]
    fn entangling_joint_encoding_gives_entangled_gamma() {
        // Discard both inputs and prepare |Φ+⟩ across the two outputs.
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = LabeledOperator::projector(
            systems(&[("A_O^1", 2), ("A_O^2", 2)]),
            &[c(h), c(0.0), c(0.0), c(h)],
        )
        .unwrap();
        let enc = CPMap::replacement(&systems(&[("A_I^1", 2), ("A_I^2", 2)]), &bell).unwrap();
        let g = gamma_joint(&enc, &id_process(), 2).unwrap();
        let marginal = g.partial_trace(&["B_I^2"]).unwrap();
        assert!(marginal.von_neumann_entropy().unwrap() > 0.99);
    }

    #[test]
    fn gamma_joint_respects_guard() {
        let a = random_channel(22, &systems(&[(A_I, 2)]), &systems(&[(A_O, 2)]));
        let ins = systems(&[("A_I^1", 2), ("A_I^2", 2)]);
        let outs = systems(&[("A_O^1", 2), ("A_O^2", 2)]);
        let joint = random_channel(23, &ins, &outs);
        assert!(matches!(
            gamma_joint_with_guard(&joint, &id_process(), 2, 32),
            Err(Error::TooLarge { .. })
        ));
        assert!(matches!(gamma_joint(&a, &id_process(), 2), Err(Error::LabelMismatch(_))));
    }

    #[test]
    fn controlled_map_selects_branches() {
        let ins = systems(&[(A_I, 2)]);
        let outs = systems(&[(A_O, 2)]);
        let maps: Vec<CPMap> = (0..2).map(|k| random_channel(30 + k, &ins, &outs)).collect();
        let ctrl = controlled_map(&maps).unwrap();
        assert!(ctrl.is_trace_preserving(1e-12));
        let rho = state(A_I, random_density_matrix(&mut seeded(33), 2));
        for (j, m) in maps.iter().enumerate() {
            let input = LabeledOperator::basis_projector(CONTROL, 2, j).tensor(&rho).unwrap();
            let out = ctrl.apply(&input).unwrap();
            assert!(out.distance(&m.apply(&rho).unwrap()).unwrap() < 1e-12);
        }
        let mixed = LabeledOperator::maximally_mixed(systems(&[(CONTROL, 2)])).unwrap().tensor(&rho).unwrap();
        let out = ctrl.apply(&mixed).unwrap();
        let expect = maps[0].apply(&rho).unwrap().scaled(0.5).add(&maps[1].apply(&rho).unwrap().scaled(0.5)).unwrap();
        assert!(out.distance(&expect).unwrap() < 1e-12);

        let single = controlled_map(&maps[..1]).unwrap();
        let input = LabeledOperator::basis_projector(CONTROL, 1, 0).tensor(&rho).unwrap();
        assert!(single.apply(&input).unwrap().distance(&maps[0].apply(&rho).unwrap()).unwrap() < 1e-12);

        let other = random_channel(40, &ins, &systems(&[("Z", 2)]));
        assert!(matches!(controlled_map(&[maps[0].clone(), other]), Err(Error::LabelMismatch(_))));
    }

    #[test]
    fn bob_output_replacement_is_invisible() {
        let bob_outs = systems(&[(B_O, 2), ("B'_O", 2)]);
        for seed in 0..20 {
            let a = random_channel(seed, &systems(&[("A'_I", 2), (A_I, 2)]), &systems(&[(A_O, 2)]));
            let b = random_channel(seed + 1000, &systems(&[(B_I, 2)]), &bob_outs);
            assert!(bob_output_replacement_residual(&a, &b, &id_process()).unwrap() < 1e-9);
        }
        let u = ProcessMatrix::uniform(ProcessDims::uniform(2)).unwrap();
        let a = random_channel(1, &systems(&[("A'_I", 2), (A_I, 2)]), &systems(&[(A_O, 2)]));
        let b = random_channel(2, &systems(&[(B_I, 2)]), &bob_outs);
        assert_eq!(bob_output_replacement_residual(&a, &b, &u).unwrap(), 0.0);
    }

    #[test]
    fn instruments_must_sum_to_a_channel() {
        let p0 = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]);
        let p1 = CMatrix::from_row_slice(2, 2, &[c(0.0), c(0.0), c(0.0), c(1.0)]);
        let e0 = choi_of_kraus(&[p0], "X", "Y").unwrap();
        let e1 = choi_of_kraus(&[p1], "X", "Y").unwrap();
        assert!(Instrument::new(vec![e0.clone(), e1], 1e-9).is_ok());
        assert!(matches!(Instrument::new(vec![e0], 1e-9), Err(Error::NotAnInstrument(_))));
    }
}
