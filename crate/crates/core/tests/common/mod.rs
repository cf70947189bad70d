#![allow(dead_code)]

use std::collections::BTreeMap;

use mmsa_core::compile::{
    compile_bn, compile_staged_tree, BayesNetSpec, ClassifierSpec, ClassifierStructure, Compiled,
    StagedTreeSpec, TreeVertex, Variable,
};
use mmsa_core::model::{MonomialModel, ParameterVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A point of the open simplex, bounded away from the faces.
pub fn simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1) + 0.05).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}

/// Random DAG in topological order; each variable picks parents among the
/// earlier ones.
pub fn random_bn_spec<R: Rng>(rng: &mut R, max_vars: usize, max_states: usize) -> BayesNetSpec {
    let n = rng.random_range(2..=max_vars);
    let variables: Vec<Variable> =
        (0..n).map(|i| Variable::numbered(format!("X{}", i + 1), rng.random_range(2..=max_states))).collect();
    let mut parents = Vec::with_capacity(n);
    let mut cpts = Vec::with_capacity(n);
    for i in 0..n {
        let ps: Vec<usize> = (0..i).filter(|_| rng.random_bool(0.5)).collect();
        let configs: usize = ps.iter().map(|&p| variables[p].n_states()).product();
        cpts.push((0..configs).map(|_| simplex(rng, variables[i].n_states())).collect());
        parents.push(ps);
    }
    BayesNetSpec::new(variables, parents, cpts).unwrap()
}

/// Random Bayesian network with at most `max_blocks` simplex blocks.
pub fn random_small_bn<R: Rng>(rng: &mut R, max_blocks: usize) -> (BayesNetSpec, Compiled) {
    loop {
        let spec = random_bn_spec(rng, 3, 3);
        let compiled = compile_bn(&spec).unwrap();
        if compiled.model.partition().n_blocks() <= max_blocks {
            return (spec, compiled);
        }
    }
}

/// Joint distribution by brute-force enumeration of assignments, last
/// variable fastest.
pub fn joint(spec: &BayesNetSpec) -> Vec<f64> {
    let vars = spec.variables();
    let sizes: Vec<usize> = vars.iter().map(Variable::n_states).collect();
    let total: usize = sizes.iter().product();
    let mut out = Vec::with_capacity(total);
    for mut code in 0..total {
        let mut states = vec![0; sizes.len()];
        for i in (0..sizes.len()).rev() {
            states[i] = code % sizes[i];
            code /= sizes[i];
        }
        let mut p = 1.0;
        for i in 0..sizes.len() {
            let mut config = 0;
            for &q in spec.parents(i) {
                config = config * sizes[q] + states[q];
            }
            p *= spec.cpt(i)[config][states[i]];
        }
        out.push(p);
    }
    out
}

/// Random staged tree of depth at most two with at most `max_blocks` stages.
pub fn random_tree<R: Rng>(rng: &mut R, max_blocks: usize) -> Compiled {
    random_tree_with_depths(rng, max_blocks).0
}

/// [`random_tree`] together with the depth of every leaf.
pub fn random_tree_with_depths<R: Rng>(rng: &mut R, max_blocks: usize) -> (Compiled, Vec<usize>) {
    loop {
        let fan = rng.random_range(2..=3);
        let mut vertices = vec![TreeVertex::new("r", (1..=fan).collect(), &[])];
        let mut inner = Vec::new();
        let mut next = 1 + fan;
        let mut pending = Vec::new();
        for i in 0..fan {
            if rng.random_bool(0.75) {
                let k = rng.random_range(2..=3);
                pending.push((i + 1, (next..next + k).collect::<Vec<_>>()));
                inner.push((i + 1, k));
                next += k;
            } else {
                pending.push((i + 1, Vec::new()));
            }
        }
        for (id, children) in &pending {
            vertices.push(if children.is_empty() {
                TreeVertex::leaf(format!("v{id}"))
            } else {
                TreeVertex::new(format!("v{id}"), children.clone(), &[])
            });
        }
        for k in 1 + fan..next {
            vertices.push(TreeVertex::leaf(format!("v{k}")));
        }
        // Group inner vertices of equal fan-out into stages at random.
        let mut stages: Vec<Vec<usize>> = Vec::new();
        for &(v, k) in &inner {
            let joinable = stages.iter().position(|s| inner.iter().any(|&(w, kw)| w == s[0] && kw == k));
            match joinable {
                Some(s) if rng.random_bool(0.5) => stages[s].push(v),
                _ => stages.push(vec![v]),
            }
        }
        if 1 + stages.len() > max_blocks {
            continue;
        }
        let mut probabilities = BTreeMap::from([(0, simplex(rng, fan))]);
        for s in &stages {
            let k = inner.iter().find(|&&(w, _)| w == s[0]).unwrap().1;
            probabilities.insert(s[0], simplex(rng, k));
        }
        let stages: Vec<Vec<usize>> = stages.into_iter().filter(|s| s.len() > 1).collect();
        let depths = pending.iter().flat_map(|(_, c)| if c.is_empty() { vec![1] } else { vec![2; c.len()] }).collect();
        let spec = StagedTreeSpec::new(vertices, stages, probabilities).unwrap();
        return (compile_staged_tree(&spec).unwrap(), depths);
    }
}

/// Naive Bayes classifier with random CPTs.
pub fn random_naive_bayes<R: Rng>(rng: &mut R, features: usize, states: usize, classes: usize) -> ClassifierSpec {
    let class = Variable::numbered("C", classes);
    let features: Vec<Variable> = (0..features).map(|i| Variable::numbered(format!("F{}", i + 1), states)).collect();
    let mut cpts = BTreeMap::from([("C".to_string(), vec![simplex(rng, classes)])]);
    for f in &features {
        cpts.insert(f.name.clone(), (0..classes).map(|_| simplex(rng, states)).collect());
    }
    ClassifierSpec { class, features, structure: ClassifierStructure::NaiveBayes, cpts }
}

/// Varies `per_block` parameters (fewer than the block size) in each of the
/// given blocks; targets come from a fresh simplex point so every block
/// keeps positive remaining mass.
pub fn targets_in_blocks<R: Rng>(
    rng: &mut R,
    model: &MonomialModel,
    blocks: &[usize],
    per_block: usize,
) -> BTreeMap<usize, f64> {
    let mut out = BTreeMap::new();
    for &b in blocks {
        let members = model.partition().block(b);
        let fresh = simplex(rng, members.len());
        let k = per_block.min(members.len() - 1).max(1);
        let mut picks: Vec<usize> = (0..members.len()).collect();
        for i in 0..k {
            let j = rng.random_range(i..picks.len());
            picks.swap(i, j);
        }
        for &local in &picks[..k] {
            out.insert(members[local], fresh[local]);
        }
    }
    out
}

/// Random distinct blocks, between one and `max` of them.
pub fn some_blocks<R: Rng>(rng: &mut R, model: &MonomialModel, max: usize) -> Vec<usize> {
    let n = model.partition().n_blocks();
    let mut all: Vec<usize> = (0..n).collect();
    let k = rng.random_range(1..=max.min(n));
    for i in 0..k {
        let j = rng.random_range(i..n);
        all.swap(i, j);
    }
    let mut chosen = all[..k].to_vec();
    chosen.sort_unstable();
    chosen
}

pub fn kl_direct(q: &[f64], p: &[f64]) -> f64 {
    q.iter().zip(p).map(|(a, b)| a * (a / b).ln()).sum()
}

pub fn cd_direct(p: &[f64], q: &[f64]) -> f64 {
    let ratios: Vec<f64> = q.iter().zip(p).map(|(a, b)| (a / b).ln()).collect();
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

pub fn phi_direct(q: &[f64], p: &[f64], phi: impl Fn(f64) -> f64) -> f64 {
    q.iter().zip(p).map(|(a, b)| b * phi(a / b)).sum()
}

/// Atom probabilities straight from the exponent matrix.
pub fn distribution(model: &MonomialModel, theta: &[f64]) -> Vec<f64> {
    (0..model.n_atoms())
        .map(|y| model.matrix().row(y).iter().map(|&(j, e)| theta[j].powi(e as i32)).product())
        .collect()
}

pub fn vector(values: Vec<f64>) -> ParameterVector {
    ParameterVector::unlabeled(values)
}
