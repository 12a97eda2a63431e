//! Allocation decisions: the space of feasible way vectors, exhaustive
//! search over it, the classifier policy and the three baselines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{self, Head, MlpModel};
use crate::platform::{true_compute, OracleParams};
use crate::types::{encode_classifier_features, GlobalContext, LlcAllocation, PlatformSpec, VbsContext};

/// Per-vBS compute model used to score allocations.
pub trait CpuEvaluator: Sync {
    /// Usage of vBS `vbs` for every way count `1..=n_llc`.
    fn usage_table(&self, vbs: usize, ctx: &VbsContext, cores: u32, n_llc: u32) -> Result<Vec<f64>>;
}

/// The noiseless ground-truth oracle as an evaluator.
#[derive(Debug, Clone, Copy)]
pub struct OracleEvaluator {
    params: OracleParams,
}

impl OracleEvaluator {
    pub fn new(params: &OracleParams) -> Self {
        OracleEvaluator {
            params: params.noiseless(),
        }
    }
}

impl CpuEvaluator for OracleEvaluator {
    fn usage_table(&self, _vbs: usize, ctx: &VbsContext, cores: u32, n_llc: u32) -> Result<Vec<f64>> {
        (1..=n_llc)
            .map(|w| true_compute(ctx, cores, w, &self.params, None))
            .collect()
    }
}

/// All compositions of `n_llc` into `n_vbs` positive parts, in ascending
/// lexicographic order. A composition's position is its class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationSpace {
    n_llc: u32,
    n_vbs: u32,
    allocations: Vec<LlcAllocation>,
}

/// `C(n, k)` in exact integer arithmetic.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

fn compositions(total: u32, parts: u32, prefix: &mut Vec<u32>, out: &mut Vec<LlcAllocation>) {
    if parts == 1 {
        prefix.push(total);
        out.push(LlcAllocation::from_parts_unchecked(prefix.clone()));
        prefix.pop();
        return;
    }
    for first in 1..=total - (parts - 1) {
        prefix.push(first);
        compositions(total - first, parts - 1, prefix, out);
        prefix.pop();
    }
}

pub fn enumerate_allocations(n_llc: u32, n_vbs: u32) -> Result<AllocationSpace> {
    if n_vbs < 1 {
        return Err(Error::Infeasible("need at least one vBS".into()));
    }
    if n_llc < n_vbs {
        return Err(Error::Infeasible(format!(
            "{n_llc} ways cannot give {n_vbs} vBS one way each"
        )));
    }
    let expected = binomial(u64::from(n_llc - 1), u64::from(n_vbs - 1)) as usize;
    let mut allocations = Vec::with_capacity(expected);
    compositions(n_llc, n_vbs, &mut Vec::with_capacity(n_vbs as usize), &mut allocations);
    debug_assert_eq!(allocations.len(), expected);
    Ok(AllocationSpace {
        n_llc,
        n_vbs,
        allocations,
    })
}

impl AllocationSpace {
    pub fn n_llc(&self) -> u32 {
        self.n_llc
    }

    pub fn n_vbs(&self) -> u32 {
        self.n_vbs
    }

    pub fn allocations(&self) -> &[LlcAllocation] {
        &self.allocations
    }

    pub fn len(&self) -> usize {
        self.allocations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.allocations.is_empty()
    }

    pub fn get(&self, class: usize) -> Option<&LlcAllocation> {
        self.allocations.get(class)
    }

    /// Class label of a way vector.
    pub fn index_of(&self, ways: &[u32]) -> Option<usize> {
        self.allocations
            .binary_search_by(|a| a.ways().cmp(ways))
            .ok()
    }

    pub fn signature(&self) -> (u32, u32) {
        (self.n_llc, self.n_vbs)
    }

    fn check(&self, spec: &PlatformSpec) -> Result<()> {
        if (spec.n_llc, spec.n_vbs) != self.signature() {
            return Err(Error::ModelSpaceMismatch(format!(
                "space is ({}, {}), platform is ({}, {})",
                self.n_llc, self.n_vbs, spec.n_llc, spec.n_vbs
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub allocation: LlcAllocation,
    pub class: usize,
    pub total_cpu: f64,
}

/// Per-vBS usage tables, `tables[i][n - 1]`.
pub fn usage_tables(
    gc: &GlobalContext,
    spec: &PlatformSpec,
    evaluator: &dyn CpuEvaluator,
) -> Result<Vec<Vec<f64>>> {
    gc.check(spec)?;
    gc.contexts()
        .iter()
        .zip(&spec.core_sets)
        .enumerate()
        .map(|(i, (ctx, &cores))| evaluator.usage_table(i, ctx, cores, spec.n_llc))
        .collect()
}

/// Minimize `sum_i table_i[n_i]` over the space; the first (lexicographically
/// smallest) minimizer wins ties.
pub fn best_from_tables(space: &AllocationSpace, tables: &[Vec<f64>]) -> SearchResult {
    let mut best_class = 0;
    let mut best_total = f64::INFINITY;
    for (class, alloc) in space.allocations.iter().enumerate() {
        let mut total = 0.0;
        for (table, &n) in tables.iter().zip(alloc.ways()) {
            total += table[n as usize - 1];
        }
        if total < best_total {
            best_total = total;
            best_class = class;
        }
    }
    SearchResult {
        allocation: space.allocations[best_class].clone(),
        class: best_class,
        total_cpu: best_total,
    }
}

/// Exhaustive search exploiting per-vBS separability: `N_vBS * N_LLC`
/// evaluator calls, then a sum over each allocation.
pub fn exhaustive_best(
    gc: &GlobalContext,
    spec: &PlatformSpec,
    space: &AllocationSpace,
    evaluator: &dyn CpuEvaluator,
) -> Result<SearchResult> {
    space.check(spec)?;
    let tables = usage_tables(gc, spec, evaluator)?;
    Ok(best_from_tables(space, &tables))
}

/// Classifier policy: predict the class of the optimal allocation.
pub fn memorai_decide(
    gc: &GlobalContext,
    spec: &PlatformSpec,
    clf: &MlpModel,
    space: &AllocationSpace,
) -> Result<LlcAllocation> {
    space.check(spec)?;
    match clf.head() {
        Head::Classification { classes } if classes == space.len() => {}
        other => {
            return Err(Error::ModelSpaceMismatch(format!(
                "classifier head {other:?} does not match a space of {} allocations",
                space.len()
            )))
        }
    }
    let x = encode_classifier_features(gc, spec)?;
    let (class, _) = nn::predict_class(clf, &x)?;
    space
        .get(class)
        .cloned()
        .ok_or_else(|| Error::ModelSpaceMismatch(format!("class {class} out of range")))
}

/// Uniform draw from the feasible allocations.
pub fn baseline_random(space: &AllocationSpace, seed: u64) -> LlcAllocation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    space.allocations[rng.random_range(0..space.len())].clone()
}

/// `floor(N_LLC / N_vBS)` ways each; the remainder stays unallocated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EqualPartition {
    pub ways: Vec<u32>,
    pub unallocated: u32,
}

pub fn baseline_equal(spec: &PlatformSpec) -> Result<EqualPartition> {
    if spec.n_vbs == 0 {
        return Err(Error::Infeasible("no vBS deployed".into()));
    }
    let each = spec.n_llc / spec.n_vbs;
    if each == 0 {
        return Err(Error::Infeasible(format!(
            "{} ways cannot be split equally over {} vBS",
            spec.n_llc, spec.n_vbs
        )));
    }
    Ok(EqualPartition {
        ways: vec![each; spec.n_vbs as usize],
        unallocated: spec.n_llc - each * spec.n_vbs,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedOutcome {
    pub ways: Vec<u32>,
    /// All demands were zero and the equal partition was used instead.
    pub fell_back: bool,
}

/// Ways proportional to total demand `d_ul + d_dl`.
///
/// Shares are floored, leftover ways go one at a time to the largest
/// fractional remainders (lower index first on ties), then any vBS left
/// with zero ways takes one from the currently largest allocation.
pub fn baseline_weighted(gc: &GlobalContext, spec: &PlatformSpec) -> Result<WeightedOutcome> {
    gc.check(spec)?;
    let demands: Vec<f64> = gc.contexts().iter().map(VbsContext::demand).collect();
    let total: f64 = demands.iter().sum();
    if !(total > 0.0) {
        return Ok(WeightedOutcome {
            ways: baseline_equal(spec)?.ways,
            fell_back: true,
        });
    }
    let n_llc = f64::from(spec.n_llc);
    let raw: Vec<f64> = demands.iter().map(|d| d / total * n_llc).collect();
    let mut ways: Vec<u32> = raw.iter().map(|r| r.floor() as u32).collect();
    let assigned: u32 = ways.iter().sum();
    let mut order: Vec<usize> = (0..ways.len()).collect();
    // stable sort keeps lower indices first among equal remainders
    order.sort_by(|&a, &b| {
        let ra = raw[a] - raw[a].floor();
        let rb = raw[b] - raw[b].floor();
        rb.partial_cmp(&ra).expect("finite shares")
    });
    for &i in order.iter().take(spec.n_llc.saturating_sub(assigned) as usize) {
        ways[i] += 1;
    }
    for i in 0..ways.len() {
        if ways[i] == 0 {
            let donor = largest(&ways);
            ways[donor] -= 1;
            ways[i] = 1;
        }
    }
    Ok(WeightedOutcome {
        ways,
        fell_back: false,
    })
}

fn largest(ways: &[u32]) -> usize {
    let mut best = 0;
    for (i, &w) in ways.iter().enumerate().skip(1) {
        if w > ways[best] {
            best = i;
        }
    }
    best
}
