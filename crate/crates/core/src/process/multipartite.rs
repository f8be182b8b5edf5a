//! N-party processes that are probabilistic mixtures of fixed causal orders.
//!
//! Party `k` (1-based) owns the labels `A{k}_I` and `A{k}_O`. The canonical
//! label order is `A1_I, A1_O, A2_I, A2_O, ...`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::{choi_from_isometry, identity_choi};
use crate::sampling::{random_density_matrix, random_isometry, seeded};
use crate::tensor::{systems, LabeledOperator, Subsystem};

use rand::seq::SliceRandom;
use rand::Rng;

pub fn party_input(k: usize) -> String {
    format!("A{k}_I")
}

pub fn party_output(k: usize) -> String {
    format!("A{k}_O")
}

pub fn party_systems(parties: usize, d_in: usize, d_out: usize) -> Vec<Subsystem> {
    (1..=parties)
        .flat_map(|k| [Subsystem::new(party_input(k), d_in), Subsystem::new(party_output(k), d_out)])
        .collect()
}

fn canonical_names(parties: usize) -> Vec<String> {
    (1..=parties).flat_map(|k| [party_input(k), party_output(k)]).collect()
}

fn as_refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn check_order(order: &[usize], parties: usize) -> Result<()> {
    let mut seen = vec![false; parties + 1];
    if order.len() != parties {
        return Err(Error::InvalidArgument(format!("order {order:?} must list all {parties} parties")));
    }
    for &k in order {
        if k == 0 || k > parties || seen[k] {
            return Err(Error::InvalidArgument(format!("order {order:?} is not a permutation of 1..={parties}")));
        }
        seen[k] = true;
    }
    Ok(())
}

/// Largest residual of the recursive order test: the last party's output
/// can be traced-and-replaced, then that party is removed and the test
/// repeats on the rest.
pub fn chain_order_residual(op: &LabeledOperator, order: &[usize]) -> Result<f64> {
    let mut current = op.clone();
    let mut worst: f64 = 0.0;
    for &k in order.iter().rev() {
        let out = party_output(k);
        let inp = party_input(k);
        let replaced = current.trace_and_replace(&[&out])?;
        worst = worst.max(current.distance(&replaced)?);
        let d_out = current.dim_of(&out)? as f64;
        current = current.partial_trace(&[&inp, &out])?.scaled(1.0 / d_out);
    }
    Ok(worst)
}

/// Identity channels along `order`: the first party receives `1/d`, each
/// party's output becomes the next party's input, the last output is
/// discarded.
pub fn perfect_chain_process(order: &[usize], d: usize) -> Result<LabeledOperator> {
    let parties = order.len();
    check_order(order, parties)?;
    let first = order[0];
    let mut op = LabeledOperator::maximally_mixed(vec![Subsystem::new(party_input(first), d)])?;
    for pair in order.windows(2) {
        op = op.tensor(&identity_choi(&party_output(pair[0]), &party_input(pair[1]), d))?;
    }
    op = op.tensor(&LabeledOperator::identity(vec![Subsystem::new(party_output(order[parties - 1]), d)])?)?;
    op.permute(&as_refs(&canonical_names(parties)))
}

/// Random comb ordered along `order`, with a `mem_dim`-dimensional memory
/// carried between consecutive parties.
pub fn random_comb_process(order: &[usize], d_in: usize, d_out: usize, mem_dim: usize, seed: u64) -> Result<LabeledOperator> {
    let parties = order.len();
    check_order(order, parties)?;
    if d_in == 0 || d_out == 0 || mem_dim == 0 {
        return Err(Error::InvalidArgument("dimensions must be positive".into()));
    }
    let mut rng = seeded(seed);
    let mem = |k: usize| format!("M{k}");

    let first_dim = d_in * mem_dim;
    let mut op = LabeledOperator::new(
        systems(&[(&party_input(order[0]), d_in), (&mem(1), mem_dim)]),
        random_density_matrix(&mut rng, first_dim),
    )?;
    for (step, pair) in order.windows(2).enumerate() {
        let last = step + 2 == parties;
        let in_sys = systems(&[(&party_output(pair[0]), d_out), (&mem(step + 1), mem_dim)]);
        let mut out_sys = systems(&[(&party_input(pair[1]), d_in)]);
        if !last {
            out_sys.push(Subsystem::new(mem(step + 2), mem_dim));
        }
        let din: usize = in_sys.iter().map(|s| s.dim).product();
        let dout: usize = out_sys.iter().map(|s| s.dim).product();
        let v = random_isometry(&mut rng, dout * din * dout, din);
        let mut labels = in_sys;
        labels.extend(out_sys);
        let channel = LabeledOperator::new(labels, choi_from_isometry(&v, din, dout))?;
        op = crate::link::link_product(&op, &channel)?;
    }
    if parties == 1 {
        op = op.partial_trace(&[&mem(1)])?;
    }
    op = op.tensor(&LabeledOperator::identity(vec![Subsystem::new(party_output(order[parties - 1]), d_out)])?)?;
    op.permute(&as_refs(&canonical_names(parties)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparableTerm {
    pub weight: f64,
    /// Causal order as 1-based party indices, earliest first.
    pub order: Vec<usize>,
    pub process: LabeledOperator,
}

/// `Σ_σ q_σ W^σ` with each `W^σ` ordered along `σ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultipartiteSeparableProcess {
    pub parties: usize,
    pub terms: Vec<SeparableTerm>,
}

impl MultipartiteSeparableProcess {
    pub fn new(parties: usize, terms: Vec<SeparableTerm>, tol: f64) -> Result<Self> {
        if parties < 2 {
            return Err(Error::InvalidArgument("need at least two parties".into()));
        }
        if terms.is_empty() {
            return Err(Error::InvalidArgument("no terms".into()));
        }
        let names = canonical_names(parties);
        let total: f64 = terms.iter().map(|t| t.weight).sum();
        if (total - 1.0).abs() > 1e-12 || terms.iter().any(|t| t.weight < 0.0) {
            return Err(Error::InvalidArgument(format!("weights must be a distribution, sum {total}")));
        }
        let mut canon = Vec::with_capacity(terms.len());
        for t in terms {
            check_order(&t.order, parties)?;
            let process = t.process.permute(&as_refs(&names)).map_err(|_| {
                Error::WrongLabels(t.process.names().iter().map(|s| s.to_string()).collect())
            })?;
            if !process.is_psd(tol) {
                return Err(Error::InvalidProcess("term is not positive semidefinite".into()));
            }
            let residual = chain_order_residual(&process, &t.order)?;
            if residual > tol * process.side() as f64 {
                return Err(Error::OrderMismatch(format!("{:?} (residual {residual:.3e})", t.order)));
            }
            canon.push(SeparableTerm { process, ..t });
        }
        let dims = canon[0].process.dims();
        if canon.iter().any(|t| t.process.dims() != dims) {
            return Err(Error::DimMismatch("terms have different dimensions".into()));
        }
        Ok(Self { parties, terms: canon })
    }

    /// Random mixture of `n_terms` combs over uniformly drawn orders.
    pub fn random(parties: usize, d: usize, n_terms: usize, seed: u64) -> Result<Self> {
        let mut rng = seeded(seed);
        let raw: Vec<f64> = (0..n_terms).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
        let total: f64 = raw.iter().sum();
        let mut terms = Vec::with_capacity(n_terms);
        let mut remaining = 1.0;
        for (i, w) in raw.iter().enumerate() {
            let weight = if i + 1 == n_terms { remaining } else { w / total };
            remaining -= weight;
            let mut order: Vec<usize> = (1..=parties).collect();
            order.shuffle(&mut rng);
            let comb_seed: u64 = rng.random();
            let process = random_comb_process(&order, d, d, 2, comb_seed)?;
            terms.push(SeparableTerm { weight, order, process });
        }
        Self::new(parties, terms, 1e-9)
    }

    pub fn mixture(&self) -> LabeledOperator {
        let mut acc = self.terms[0].process.scaled(self.terms[0].weight);
        for t in &self.terms[1..] {
            acc = acc.add(&t.process.scaled(t.weight)).expect("terms share labels");
        }
        acc
    }

    pub fn input_dims(&self) -> Vec<usize> {
        let p = &self.terms[0].process;
        (1..=self.parties)
            .map(|k| p.dim_of(&party_input(k)).expect("canonical labels"))
            .collect()
    }

    pub fn output_dims(&self) -> Vec<usize> {
        let p = &self.terms[0].process;
        (1..=self.parties)
            .map(|k| p.dim_of(&party_output(k)).expect("canonical labels"))
            .collect()
    }
}
