//! Core-region overlap math: Jaccard similarity, threshold grouping via
//! connected components, stage ordering, and frozen-set accumulation.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param_core::{CoreRegion, TaskId};

/// Jaccard index |A ∩ B| / |A ∪ B| between two core regions over the same
/// parameter space.
pub fn jaccard(ci: &CoreRegion, cj: &CoreRegion) -> Result<f64> {
    if ci.dim() != cj.dim() {
        return Err(Error::DimensionMismatch {
            expected: ci.dim(),
            got: cj.dim(),
        });
    }
    if ci.is_empty() || cj.is_empty() {
        return Err(Error::config(
            "regions",
            "jaccard is undefined for empty regions",
        ));
    }
    // Sorted-merge intersection count.
    let (a, b) = (ci.indices(), cj.indices());
    let (mut i, mut j, mut inter) = (0usize, 0usize, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    Ok(inter as f64 / union as f64)
}

/// Symmetric pairwise similarity over an ordered list of tasks; diagonal 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub task_ids: Vec<TaskId>,
    pub values: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    pub fn n(&self) -> usize {
        self.task_ids.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }
}

/// Computes all pairwise Jaccard similarities. Regions must share one
/// parameter dimension.
pub fn similarity_matrix(regions: &[CoreRegion]) -> Result<SimilarityMatrix> {
    if regions.is_empty() {
        return Err(Error::config("regions", "no regions given"));
    }
    let dim = regions[0].dim();
    for r in regions {
        if r.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: r.dim(),
            });
        }
    }
    let n = regions.len();
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        values[i][i] = 1.0;
        for j in (i + 1)..n {
            let s = jaccard(&regions[i], &regions[j])?;
            values[i][j] = s;
            values[j][i] = s;
        }
    }
    Ok(SimilarityMatrix {
        task_ids: regions.iter().map(|r| r.task_id().clone()).collect(),
        values,
    })
}

/// Union-find with path compression and union by size.
struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Groups tasks by thresholding the similarity graph at `tau` and taking
/// connected components. Components are ordered by their smallest member
/// index; members are sorted.
pub fn build_grouping(matrix: &SimilarityMatrix, tau: f64) -> Result<Vec<Vec<usize>>> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::config(
            "tau",
            format!("similarity threshold must lie in [0, 1], got {tau}"),
        ));
    }
    let n = matrix.n();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if matrix.get(i, j) >= tau {
                uf.union(i, j);
            }
        }
    }
    let mut components: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let root = uf.find(i);
        components[root].push(i);
    }
    let mut groups: Vec<Vec<usize>> = components.into_iter().filter(|c| !c.is_empty()).collect();
    for g in &mut groups {
        g.sort_unstable();
    }
    groups.sort_by_key(|g| g[0]);
    Ok(groups)
}

/// Ordered training stages plus everything needed to build frozen sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingPlan {
    /// Stage task sets as suite indices, in training order.
    pub stages: Vec<Vec<usize>>,
    pub tau: f64,
    pub p: f64,
    pub task_ids: Vec<TaskId>,
    pub regions: Vec<CoreRegion>,
    pub similarity: SimilarityMatrix,
}

impl GroupingPlan {
    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }

    /// 1-based stage index a task trains in.
    pub fn stage_of(&self, task_index: usize) -> Option<usize> {
        self.stages
            .iter()
            .position(|s| s.contains(&task_index))
            .map(|k| k + 1)
    }

    /// Stage task sets as id lists, for display and the plan file.
    pub fn stage_ids(&self) -> Vec<Vec<TaskId>> {
        self.stages
            .iter()
            .map(|s| s.iter().map(|&i| self.task_ids[i].clone()).collect())
            .collect()
    }
}

fn region_union_size(group: &[usize], regions: &[CoreRegion]) -> usize {
    let mut set = BTreeSet::new();
    for &i in group {
        set.extend(regions[i].indices().iter().copied());
    }
    set.len()
}

/// Orders groups into stages: descending total core-region union size, ties
/// by smallest member index. Deterministic.
pub fn order_stages(
    groups: Vec<Vec<usize>>,
    regions: &[CoreRegion],
    similarity: SimilarityMatrix,
    tau: f64,
    p: f64,
) -> GroupingPlan {
    let mut keyed: Vec<(usize, Vec<usize>)> = groups
        .into_iter()
        .map(|g| (region_union_size(&g, regions), g))
        .collect();
    keyed.sort_by(|(sa, ga), (sb, gb)| sb.cmp(sa).then(ga[0].cmp(&gb[0])));
    GroupingPlan {
        stages: keyed.into_iter().map(|(_, g)| g).collect(),
        tau,
        p,
        task_ids: similarity.task_ids.clone(),
        regions: regions.to_vec(),
        similarity,
    }
}

/// Union of core-region indices of all tasks trained before stage `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenSet {
    pub indices: Vec<usize>,
    pub stage_index: usize,
}

/// The frozen set entering stage `k` (1-based): everything from stages
/// `1..k-1`. `k = 1` freezes nothing.
pub fn frozen_set(plan: &GroupingPlan, k: usize) -> Result<FrozenSet> {
    if k == 0 || k > plan.n_stages() {
        return Err(Error::config(
            "stage",
            format!("stage index {k} out of range 1..={}", plan.n_stages()),
        ));
    }
    let mut set = BTreeSet::new();
    for stage in &plan.stages[..k - 1] {
        for &task in stage {
            set.extend(plan.regions[task].indices().iter().copied());
        }
    }
    Ok(FrozenSet {
        indices: set.into_iter().collect(),
        stage_index: k,
    })
}

/// Re-verifies the plan invariants: stages partition the tasks, each stage's
/// similarity subgraph is connected at tau, and no cross-stage edge reaches
/// tau.
pub fn verify_plan(plan: &GroupingPlan) -> Result<()> {
    let n = plan.task_ids.len();
    let mut seen = vec![false; n];
    for stage in &plan.stages {
        for &t in stage {
            if t >= n || seen[t] {
                return Err(Error::config(
                    "plan",
                    format!("task index {t} missing or duplicated across stages"),
                ));
            }
            seen[t] = true;
        }
    }
    if !seen.iter().all(|&s| s) {
        return Err(Error::config("plan", "stages do not cover all tasks"));
    }

    for stage in &plan.stages {
        // Connectivity within the stage under edges >= tau.
        let mut reached = vec![false; stage.len()];
        let mut queue = vec![0usize];
        reached[0] = true;
        while let Some(a) = queue.pop() {
            for b in 0..stage.len() {
                if !reached[b] && plan.similarity.get(stage[a], stage[b]) >= plan.tau {
                    reached[b] = true;
                    queue.push(b);
                }
            }
        }
        if !reached.iter().all(|&r| r) {
            return Err(Error::config(
                "plan",
                "a stage's similarity subgraph is not connected",
            ));
        }
    }

    for (ka, sa) in plan.stages.iter().enumerate() {
        for sb in plan.stages.iter().skip(ka + 1) {
            for &a in sa {
                for &b in sb {
                    if plan.similarity.get(a, b) >= plan.tau {
                        return Err(Error::config(
                            "plan",
                            format!(
                                "cross-stage edge {} ~ {} at similarity {}",
                                plan.task_ids[a],
                                plan.task_ids[b],
                                plan.similarity.get(a, b)
                            ),
                        ));
                    }
                }
            }
        }
    }
    Ok(())
}

/// On-disk plan file: stages by id, threshold, core percentage, similarity
/// matrix, and per-task region file references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub schema_version: u32,
    pub tau: f64,
    pub p: f64,
    pub task_ids: Vec<TaskId>,
    pub stages: Vec<Vec<TaskId>>,
    pub similarity: Vec<Vec<f64>>,
    pub region_files: Vec<String>,
}

pub const PLAN_SCHEMA_VERSION: u32 = 1;

impl PlanFile {
    pub fn from_plan(plan: &GroupingPlan, region_files: Vec<String>) -> Self {
        PlanFile {
            schema_version: PLAN_SCHEMA_VERSION,
            tau: plan.tau,
            p: plan.p,
            task_ids: plan.task_ids.clone(),
            stages: plan.stage_ids(),
            similarity: plan.similarity.values.clone(),
            region_files,
        }
    }
}

pub fn save_plan(plan_file: &PlanFile, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(plan_file)?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_plan(path: &Path) -> Result<PlanFile> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
