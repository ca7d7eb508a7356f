//! Joint-loss statistics and permutation tests over grouped diagrams.
//!
//! The test statistic is the joint loss: for each group, the double sum of
//! squared diagram distances over ordered within-group pairs, scaled by
//! 1/(2 n (n-1)), summed across groups. Permuting group labels only relabels
//! diagrams, so all distances are computed once into a [`DistanceCache`] and
//! every assignment is evaluated by table lookup.
//!
//! When the number of distinct ordered assignments (the multinomial
//! coefficient) is at most `max_exact`, the permutation distribution is
//! enumerated exactly; otherwise the observed assignment plus `n_samples`
//! seeded random assignments are used. The observed assignment is always
//! counted, so p >= 1/replicates. Ties count toward the numerator.

use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metric::cost_matrix;
use crate::metric::optimal_assignment;
use crate::persistence::PersistenceDiagram;
use crate::seeds;

/// s >= 2 named groups of diagrams of one homological dimension, each group
/// holding at least two diagrams.
#[derive(Debug, Clone)]
pub struct GroupedDiagrams {
    groups: Vec<(String, Vec<PersistenceDiagram>)>,
    dim: usize,
}

impl GroupedDiagrams {
    pub fn new(groups: Vec<(String, Vec<PersistenceDiagram>)>) -> Result<Self> {
        if groups.len() < 2 {
            return Err(Error::input(format!(
                "need at least 2 groups, got {}",
                groups.len()
            )));
        }
        let mut names: Vec<&str> = groups.iter().map(|(n, _)| n.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::input("group names must be distinct"));
        }
        let dim = groups[0]
            .1
            .first()
            .ok_or_else(|| Error::input("empty group"))?
            .dim();
        for (name, diagrams) in &groups {
            if diagrams.len() < 2 {
                return Err(Error::input(format!(
                    "group {name:?} has {} diagrams; the joint loss needs at least 2 per group",
                    diagrams.len()
                )));
            }
            if let Some(d) = diagrams.iter().find(|d| d.dim() != dim) {
                return Err(Error::input(format!(
                    "group {name:?} mixes homological dimensions {} and {dim}",
                    d.dim()
                )));
            }
        }
        Ok(GroupedDiagrams { groups, dim })
    }

    pub fn groups(&self) -> &[(String, Vec<PersistenceDiagram>)] {
        &self.groups
    }

    pub fn names(&self) -> Vec<&str> {
        self.groups.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(|(_, d)| d.len()).collect()
    }

    pub fn total(&self) -> usize {
        self.groups.iter().map(|(_, d)| d.len()).sum()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Diagrams pooled in group order, with "group/index" identifiers.
    pub fn pooled(&self) -> (Vec<String>, Vec<&PersistenceDiagram>) {
        let mut ids = Vec::with_capacity(self.total());
        let mut diagrams = Vec::with_capacity(self.total());
        for (name, group) in &self.groups {
            for (i, d) in group.iter().enumerate() {
                ids.push(format!("{name}/{i}"));
                diagrams.push(d);
            }
        }
        (ids, diagrams)
    }
}

/// Symmetric cache of squared diagram distances in pooled order.
#[derive(Debug, Clone)]
pub struct DistanceCache {
    ids: Vec<String>,
    d2: Vec<Vec<f64>>,
}

impl DistanceCache {
    /// Fills the cache from grouped diagrams, in parallel over pairs with a
    /// deterministic merge order. The squared distance is the assignment
    /// cost raised to 2/q, so that with q = 2 no root is taken at all.
    pub fn from_grouped(gd: &GroupedDiagrams, q: f64) -> Result<Self> {
        let (ids, diagrams) = gd.pooled();
        let n = diagrams.len();
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .collect();
        let computed: Result<Vec<f64>> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let cm = cost_matrix(diagrams[i], diagrams[j], q)?;
                let (_, total) = optimal_assignment(&cm)?;
                Ok(total.max(0.0).powf(2.0 / q))
            })
            .collect();
        let computed = computed?;
        let mut d2 = vec![vec![0.0; n]; n];
        for (&(i, j), v) in pairs.iter().zip(computed) {
            d2[i][j] = v;
            d2[j][i] = v;
        }
        Ok(DistanceCache { ids, d2 })
    }

    /// Wraps a precomputed squared-distance matrix.
    pub fn from_matrix(ids: Vec<String>, d2: Vec<Vec<f64>>) -> Result<Self> {
        let n = ids.len();
        if d2.len() != n || d2.iter().any(|row| row.len() != n) {
            return Err(Error::input("squared-distance matrix shape mismatch"));
        }
        for i in 0..n {
            if d2[i][i] != 0.0 {
                return Err(Error::input(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                if !d2[i][j].is_finite() || d2[i][j] < 0.0 {
                    return Err(Error::input(format!("bad entry at ({i},{j})")));
                }
                if d2[i][j] != d2[j][i] {
                    return Err(Error::input(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(DistanceCache { ids, d2 })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn d2(&self, i: usize, j: usize) -> f64 {
        self.d2[i][j]
    }

    /// Sub-cache over a subset of pooled indices, in the given order.
    pub fn restrict(&self, indices: &[usize]) -> DistanceCache {
        let ids = indices.iter().map(|&i| self.ids[i].clone()).collect();
        let d2 = indices
            .iter()
            .map(|&i| indices.iter().map(|&j| self.d2[i][j]).collect())
            .collect();
        DistanceCache { ids, d2 }
    }
}

/// Joint loss of an assignment given as per-group member index lists.
fn joint_loss_of_members(cache: &DistanceCache, members: &[&[usize]]) -> f64 {
    let mut total = 0.0;
    for group in members {
        let n = group.len();
        let mut unordered = 0.0;
        for (a, &i) in group.iter().enumerate() {
            for &j in &group[(a + 1)..] {
                unordered += cache.d2(i, j);
            }
        }
        // double sum over ordered pairs = 2 * unordered; scale 1/(2 n (n-1))
        total += unordered / (n * (n - 1)) as f64;
    }
    total
}

fn observed_members(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut start = 0;
    sizes
        .iter()
        .map(|&n| {
            let v: Vec<usize> = (start..start + n).collect();
            start += n;
            v
        })
        .collect()
}

/// Joint loss of the observed grouping.
pub fn joint_loss(gd: &GroupedDiagrams, cache: &DistanceCache) -> Result<f64> {
    check_cache(gd, cache)?;
    let members = observed_members(&gd.sizes());
    let refs: Vec<&[usize]> = members.iter().map(|m| m.as_slice()).collect();
    Ok(joint_loss_of_members(cache, &refs))
}

fn check_cache(gd: &GroupedDiagrams, cache: &DistanceCache) -> Result<()> {
    if cache.len() != gd.total() {
        return Err(Error::input(format!(
            "cache covers {} diagrams but the groups hold {}",
            cache.len(),
            gd.total()
        )));
    }
    Ok(())
}

/// Number of distinct ordered assignments of the pooled diagrams to groups
/// of the given sizes: the multinomial coefficient, exactly.
pub fn assignment_count(sizes: &[usize]) -> Result<BigUint> {
    if sizes.is_empty() {
        return Err(Error::input("no group sizes given"));
    }
    if sizes.iter().any(|&n| n == 0) {
        return Err(Error::input("group sizes must be at least 1"));
    }
    let total: usize = sizes.iter().sum();
    let mut count = BigUint::from(1u32);
    for k in 1..=total {
        count *= BigUint::from(k);
    }
    for &n in sizes {
        for k in 1..=n {
            count /= BigUint::from(k);
        }
    }
    Ok(count)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TestMode {
    Exact,
    Sampled,
}

/// Outcome of a permutation test. `replicates` counts every evaluated
/// assignment, observed included; in exact mode the p-value is a rational
/// with the multinomial count as denominator.
#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    pub observed_stat: f64,
    pub p_value: f64,
    pub replicates: u64,
    pub mode: TestMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub null_stats: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct TestParams {
    /// Enumerate exactly when the assignment count is at most this.
    pub max_exact: u64,
    /// Random assignments to draw in sampled mode (observed is extra).
    pub n_samples: u64,
    pub seed: u64,
    /// Retain the permutation distribution in the result.
    pub retain_null: bool,
}

impl Default for TestParams {
    fn default() -> Self {
        TestParams {
            max_exact: 200_000,
            n_samples: 100_000,
            seed: 0,
            retain_null: false,
        }
    }
}

/// Recursively enumerates every distinct ordered assignment of `pool` into
/// groups of the given sizes, lexicographically.
fn for_each_assignment(
    pool: &[usize],
    sizes: &[usize],
    chosen: &mut Vec<Vec<usize>>,
    visit: &mut impl FnMut(&[Vec<usize>]),
) {
    if sizes.len() == 1 {
        chosen.push(pool.to_vec());
        visit(chosen);
        chosen.pop();
        return;
    }
    let k = sizes[0];
    let mut selector = vec![false; pool.len()];
    fn choose(
        pool: &[usize],
        selector: &mut Vec<bool>,
        start: usize,
        left: usize,
        sizes: &[usize],
        chosen: &mut Vec<Vec<usize>>,
        visit: &mut impl FnMut(&[Vec<usize>]),
    ) {
        if left == 0 {
            let group: Vec<usize> = pool
                .iter()
                .zip(selector.iter())
                .filter(|(_, &s)| s)
                .map(|(&v, _)| v)
                .collect();
            let rest: Vec<usize> = pool
                .iter()
                .zip(selector.iter())
                .filter(|(_, &s)| !s)
                .map(|(&v, _)| v)
                .collect();
            chosen.push(group);
            for_each_assignment(&rest, &sizes[1..], chosen, visit);
            chosen.pop();
            return;
        }
        if pool.len() - start < left {
            return;
        }
        for i in start..pool.len() {
            if pool.len() - i < left {
                break;
            }
            selector[i] = true;
            choose(pool, selector, i + 1, left - 1, sizes, chosen, visit);
            selector[i] = false;
        }
    }
    choose(pool, &mut selector, 0, k, sizes, chosen, visit);
}

/// Omnibus permutation test across all groups.
pub fn omnibus_test(
    gd: &GroupedDiagrams,
    cache: &DistanceCache,
    params: &TestParams,
) -> Result<TestResult> {
    check_cache(gd, cache)?;
    let sizes = gd.sizes();
    let observed = observed_members(&sizes);
    let observed_refs: Vec<&[usize]> = observed.iter().map(|m| m.as_slice()).collect();
    let observed_stat = joint_loss_of_members(cache, &observed_refs);

    let count = assignment_count(&sizes)?;
    if count <= BigUint::from(params.max_exact) {
        let replicates: u64 = count
            .try_into()
            .map_err(|_| Error::internal("exact count exceeds u64".to_string()))?;
        let pool: Vec<usize> = (0..gd.total()).collect();
        let mut hits: u64 = 0;
        let mut null_stats = params.retain_null.then(Vec::new);
        let mut visited: u64 = 0;
        for_each_assignment(&pool, &sizes, &mut Vec::new(), &mut |members| {
            let refs: Vec<&[usize]> = members.iter().map(|m| m.as_slice()).collect();
            let stat = joint_loss_of_members(cache, &refs);
            if stat <= observed_stat {
                hits += 1;
            }
            if let Some(ns) = null_stats.as_mut() {
                ns.push(stat);
            }
            visited += 1;
        });
        if visited != replicates {
            return Err(Error::internal(format!(
                "enumerated {visited} assignments, expected {replicates}"
            )));
        }
        Ok(TestResult {
            observed_stat,
            p_value: hits as f64 / replicates as f64,
            replicates,
            mode: TestMode::Exact,
            seed: None,
            null_stats,
        })
    } else {
        if params.n_samples == 0 {
            return Err(Error::input(
                "sampled mode requires at least one random assignment",
            ));
        }
        let total = gd.total();
        // each replicate draws from its own substream, so evaluation order
        // (and rayon scheduling) cannot affect the result
        let stats: Vec<f64> = (0..params.n_samples)
            .into_par_iter()
            .map(|rep| {
                let mut rng = seeds::rng(params.seed, &[seeds::DOMAIN_PERM, rep]);
                let mut pool: Vec<usize> = (0..total).collect();
                pool.shuffle(&mut rng);
                // canonical member order, so a redrawn grouping reproduces
                // the exact same float sum and ties compare exactly
                let mut start = 0;
                let mut members: Vec<&[usize]> = Vec::with_capacity(sizes.len());
                for &n in &sizes {
                    pool[start..start + n].sort_unstable();
                    start += n;
                }
                start = 0;
                for &n in &sizes {
                    members.push(&pool[start..start + n]);
                    start += n;
                }
                joint_loss_of_members(cache, &members)
            })
            .collect();
        let hits = 1 + stats.iter().filter(|&&s| s <= observed_stat).count() as u64;
        let replicates = params.n_samples + 1;
        Ok(TestResult {
            observed_stat,
            p_value: hits as f64 / replicates as f64,
            replicates,
            mode: TestMode::Sampled,
            seed: Some(params.seed),
            null_stats: params.retain_null.then(|| {
                let mut all = vec![observed_stat];
                all.extend(stats);
                all
            }),
        })
    }
}

/// Two-group restriction of the omnibus test.
pub fn two_group_test(
    gd: &GroupedDiagrams,
    cache: &DistanceCache,
    params: &TestParams,
) -> Result<TestResult> {
    if gd.groups().len() != 2 {
        return Err(Error::input(format!(
            "two-group test needs exactly 2 groups, got {}",
            gd.groups().len()
        )));
    }
    omnibus_test(gd, cache, params)
}

#[derive(Debug, Clone, Serialize)]
pub struct PairResult {
    pub group_a: String,
    pub group_b: String,
    #[serde(flatten)]
    pub result: TestResult,
}

/// Raw pairwise post-hoc results, lexicographic by group name. No
/// multiplicity correction is applied; `alpha` is carried for display only.
#[derive(Debug, Clone, Serialize)]
pub struct PostHocReport {
    pub alpha: f64,
    pub pairs: Vec<PairResult>,
}

/// Runs a two-group test for every unordered pair of groups, each with the
/// same seed policy (the pair's test is bit-identical to an independent
/// [`two_group_test`] with the same params on those two groups alone).
pub fn post_hoc(
    gd: &GroupedDiagrams,
    cache: &DistanceCache,
    alpha: f64,
    params: &TestParams,
) -> Result<PostHocReport> {
    check_cache(gd, cache)?;
    if gd.groups().len() < 3 {
        return Err(Error::input(
            "post-hoc tests need at least 3 groups; use the two-group test instead",
        ));
    }
    let sizes = gd.sizes();
    let offsets: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, &n| {
            let o = *acc;
            *acc += n;
            Some(o)
        })
        .collect();
    let mut order: Vec<usize> = (0..gd.groups().len()).collect();
    order.sort_by(|&a, &b| gd.groups()[a].0.cmp(&gd.groups()[b].0));
    let mut pairs = Vec::new();
    for (ai, &a) in order.iter().enumerate() {
        for &b in &order[(ai + 1)..] {
            let sub = GroupedDiagrams::new(vec![
                gd.groups()[a].clone(),
                gd.groups()[b].clone(),
            ])?;
            let indices: Vec<usize> = (offsets[a]..offsets[a] + sizes[a])
                .chain(offsets[b]..offsets[b] + sizes[b])
                .collect();
            let sub_cache = cache.restrict(&indices);
            let result = two_group_test(&sub, &sub_cache, params)?;
            pairs.push(PairResult {
                group_a: gd.groups()[a].0.clone(),
                group_b: gd.groups()[b].0.clone(),
                result,
            });
        }
    }
    Ok(PostHocReport { alpha, pairs })
}

/// JSON report schema for a full test run.
#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub statistic: f64,
    pub p_value: f64,
    pub replicates: u64,
    pub mode: TestMode,
    pub seed: Option<u64>,
    pub groups: Vec<GroupSummary>,
    pub pairwise: Vec<PairSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupSummary {
    pub name: String,
    pub size: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairSummary {
    pub group_a: String,
    pub group_b: String,
    pub statistic: f64,
    pub p_value: f64,
    pub replicates: u64,
    pub mode: TestMode,
    pub seed: Option<u64>,
}

impl TestReport {
    pub fn new(gd: &GroupedDiagrams, omnibus: &TestResult, posthoc: Option<&PostHocReport>) -> Self {
        TestReport {
            statistic: omnibus.observed_stat,
            p_value: omnibus.p_value,
            replicates: omnibus.replicates,
            mode: omnibus.mode,
            seed: omnibus.seed,
            groups: gd
                .groups()
                .iter()
                .map(|(name, d)| GroupSummary {
                    name: name.clone(),
                    size: d.len(),
                })
                .collect(),
            pairwise: posthoc
                .map(|ph| {
                    ph.pairs
                        .iter()
                        .map(|p| PairSummary {
                            group_a: p.group_a.clone(),
                            group_b: p.group_b.clone(),
                            statistic: p.result.observed_stat,
                            p_value: p.result.p_value,
                            replicates: p.result.replicates,
                            mode: p.result.mode,
                            seed: p.result.seed,
                        })
                        .collect()
                })
                .unwrap_or_default(),
        }
    }
}
