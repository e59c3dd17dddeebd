//! Random k-uniform hypergraphs and their classical structure: connected
//! components, hypercore (leaf stripping), cycle census and the k=2
//! satisfiability classification.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// A k-uniform hypergraph on `n_qubits` labeled qubits.
///
/// Edges are strictly increasing k-tuples, stored sorted and deduplicated so
/// equal graphs serialize identically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypergraph {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub edges: Vec<Vec<usize>>,
}

/// Edge-count convention for sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    /// M ~ Binomial(C(n,k), p) with p = alpha * n / C(n,k); expected M = alpha * n.
    Poisson,
    /// Exactly M = round(alpha * n) edges.
    FixedM,
}

impl Hypergraph {
    /// Build from raw edges, canonicalizing (sorting tuples and the edge
    /// list) and validating the invariants.
    pub fn new(n: usize, k: usize, seed: u64, mut edges: Vec<Vec<usize>>) -> Result<Self> {
        if k < 2 {
            return Err(Error::Arity(format!("edge arity k = {k} must be >= 2")));
        }
        for e in edges.iter_mut() {
            if e.len() != k {
                return Err(Error::Validation {
                    context: "edges".into(),
                    message: format!("tuple {e:?} has {} entries, expected k = {k}", e.len()),
                });
            }
            e.sort_unstable();
            if e.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Validation {
                    context: "edges".into(),
                    message: format!("tuple {e:?} has repeated qubits"),
                });
            }
            if let Some(&q) = e.last() {
                if q >= n {
                    return Err(Error::Validation {
                        context: "edges".into(),
                        message: format!("tuple {e:?} references qubit {q} >= n = {n}"),
                    });
                }
            }
        }
        edges.sort_unstable();
        if edges.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation {
                context: "edges".into(),
                message: "duplicate edge tuple".into(),
            });
        }
        Ok(Hypergraph { n, k, seed, edges })
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    /// Clause density alpha = M / N.
    pub fn alpha(&self) -> f64 {
        self.edges.len() as f64 / self.n as f64
    }

    /// Per-qubit degree (number of incident edges).
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for e in &self.edges {
            for &q in e {
                deg[q] += 1;
            }
        }
        deg
    }

    /// Qubit -> incident edge indices.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.n];
        for (i, e) in self.edges.iter().enumerate() {
            for &q in e {
                inc[q].push(i);
            }
        }
        inc
    }

    /// Write the canonical JSON graph file (newline-terminated).
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        let text = serde_json::to_string(self).map_err(json_to_parse_error)?;
        f.write_all(text.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        let mut text = String::new();
        std::io::BufReader::new(f).read_to_string(&mut text)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Hypergraph = serde_json::from_str(text).map_err(json_to_parse_error)?;
        // re-validate via the canonicalizing constructor
        let g = Hypergraph::new(raw.n, raw.k, raw.seed, raw.edges.clone())?;
        if g.edges != raw.edges {
            return Err(Error::Validation {
                context: "graph file".into(),
                message: "edges are not in canonical sorted order".into(),
            });
        }
        Ok(g)
    }
}

use std::io::Read;

pub(crate) fn json_to_parse_error(e: serde_json::Error) -> Error {
    let loc = if e.line() > 0 {
        Some((e.line(), e.column()))
    } else {
        None
    };
    Error::Parse {
        message: e.to_string(),
        location: loc,
    }
}

/// C(n, k) saturating at u64::MAX.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Sample a random k-uniform Erdős hypergraph.
///
/// In `Poisson` mode the edge count is Binomial(C(n,k), p) with
/// p = alpha*n/C(n,k), i.e. alpha*N expected edges; the tuples themselves are
/// then drawn uniformly without replacement, which is equivalent in
/// distribution to C(n,k) independent Bernoulli trials but costs O(M).
pub fn sample_hypergraph(
    n: usize,
    k: usize,
    alpha: f64,
    mode: SampleMode,
    seed: u64,
) -> Result<Hypergraph> {
    if k < 2 {
        return Err(Error::Arity(format!("edge arity k = {k} must be >= 2")));
    }
    if n < k {
        return Err(Error::InvalidArgument(format!("n = {n} < k = {k}")));
    }
    if alpha < 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must be finite and >= 0")));
    }
    let capacity = binomial(n, k);
    let target = alpha * n as f64;
    if target > capacity as f64 {
        return Err(Error::Capacity {
            requested: target.round() as u64,
            available: capacity,
            n,
            k,
        });
    }
    let mut rng = rng_from_seed(seed);
    let m = match mode {
        SampleMode::FixedM => target.round() as u64,
        SampleMode::Poisson => {
            let p = target / capacity as f64;
            sample_binomial(&mut rng, capacity, p)
        }
    };
    if m > capacity {
        return Err(Error::Capacity {
            requested: m,
            available: capacity,
            n,
            k,
        });
    }

    let mut set: HashSet<Vec<usize>> = HashSet::with_capacity(m as usize);
    // Dense regime: enumerate all tuples and sample without replacement.
    // Sparse regime: rejection sampling of uniform tuples.
    if capacity <= 4 * m.max(1024) && capacity <= 1 << 22 {
        let mut all = Vec::with_capacity(capacity as usize);
        enumerate_tuples(n, k, &mut all);
        // partial Fisher-Yates for the first m entries
        for i in 0..m as usize {
            let j = rng.random_range(i..all.len());
            all.swap(i, j);
        }
        for t in all.into_iter().take(m as usize) {
            set.insert(t);
        }
    } else {
        while (set.len() as u64) < m {
            let mut tuple = Vec::with_capacity(k);
            while tuple.len() < k {
                let q = rng.random_range(0..n);
                if !tuple.contains(&q) {
                    tuple.push(q);
                }
            }
            tuple.sort_unstable();
            set.insert(tuple);
        }
    }
    Hypergraph::new(n, k, seed, set.into_iter().collect())
}

/// Binomial sampler adequate for huge counts with tiny p: for small expected
/// value uses inversion on the Poisson-like tail; otherwise a normal
/// approximation clamped to [0, count] (count*p >= ~1e3 in that regime, where
/// the approximation error is far below ensemble noise).
fn sample_binomial<R: Rng>(rng: &mut R, count: u64, p: f64) -> u64 {
    if p <= 0.0 || count == 0 {
        return 0;
    }
    if p >= 1.0 {
        return count;
    }
    let mean = count as f64 * p;
    if mean < 1000.0 && count > 100_000 {
        // Poisson-regime inversion (p tiny): exact enough for p < 1e-2.
        let mut acc = (-mean).exp();
        let mut cdf = acc;
        let u: f64 = rng.random();
        let mut x = 0u64;
        while cdf < u && x < count {
            x += 1;
            acc *= mean / x as f64;
            cdf += acc;
        }
        return x;
    }
    if count <= 100_000 {
        let mut x = 0u64;
        for _ in 0..count {
            if rng.random::<f64>() < p {
                x += 1;
            }
        }
        return x;
    }
    let sd = (count as f64 * p * (1.0 - p)).sqrt();
    // Box-Muller on two uniforms from the stream.
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
    let x = (mean + sd * z).round();
    x.clamp(0.0, count as f64) as u64
}

fn enumerate_tuples(n: usize, k: usize, out: &mut Vec<Vec<usize>>) {
    let mut tuple: Vec<usize> = (0..k).collect();
    loop {
        out.push(tuple.clone());
        // next combination in lexicographic order
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if tuple[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        tuple[i] += 1;
        for j in i + 1..k {
            tuple[j] = tuple[j - 1] + 1;
        }
    }
}

/// One connected component: member qubits and member edge indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Component {
    pub qubits: Vec<usize>,
    pub edges: Vec<usize>,
}

impl Component {
    /// Cyclomatic excess edges - nodes + 1; meaningful for k = 2 only.
    pub fn excess(&self) -> i64 {
        self.edges.len() as i64 - self.qubits.len() as i64 + 1
    }
}

/// Partition qubits and edges into connected components. Isolated qubits are
/// singleton components. Components are ordered by their smallest qubit.
pub fn connected_components(g: &Hypergraph) -> Vec<Component> {
    let mut parent: Vec<usize> = (0..g.n).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for e in &g.edges {
        let r0 = find(&mut parent, e[0]);
        for &q in &e[1..] {
            let rq = find(&mut parent, q);
            if rq != r0 {
                parent[rq] = r0;
            }
        }
    }
    let mut comp_of_root = vec![usize::MAX; g.n];
    let mut comps: Vec<Component> = Vec::new();
    for q in 0..g.n {
        let r = find(&mut parent, q);
        if comp_of_root[r] == usize::MAX {
            comp_of_root[r] = comps.len();
            comps.push(Component {
                qubits: Vec::new(),
                edges: Vec::new(),
            });
        }
        comps[comp_of_root[r]].qubits.push(q);
    }
    for (i, e) in g.edges.iter().enumerate() {
        let r = find(&mut parent, e[0]);
        comps[comp_of_root[r]].edges.push(i);
    }
    comps
}

/// Result of leaf stripping: the hypercore plus the removal sequence needed
/// to lift product states back up.
#[derive(Debug, Clone)]
pub struct CoreDecomposition {
    /// Edge indices remaining in the hypercore.
    pub core_edges: Vec<usize>,
    /// Qubits covered by the hypercore.
    pub core_qubits: Vec<usize>,
    /// Removed edges in removal order; each entry is (edge index, dangling
    /// qubits at removal time, i.e. qubits of that edge in no other
    /// then-remaining edge).
    pub removal_sequence: Vec<(usize, Vec<usize>)>,
}

impl CoreDecomposition {
    pub fn is_empty(&self) -> bool {
        self.core_edges.is_empty()
    }
}

/// Strip leaf edges until a fixed point: repeatedly remove an edge containing
/// a qubit of degree 1. The surviving edge set (the hypercore) is independent
/// of removal order; the default order removes the lowest-index eligible edge
/// first.
pub fn hypercore(g: &Hypergraph) -> CoreDecomposition {
    let order: Vec<usize> = (0..g.m()).collect();
    hypercore_with_order(g, &order)
}

/// Leaf stripping with an explicit tie-break: `priority[i]` ranks edge `i`;
/// among currently eligible edges the one with the smallest priority is
/// removed first. The resulting core is the same for every priority (the
/// stripping operator is confluent); only `removal_sequence` differs.
pub fn hypercore_with_order(g: &Hypergraph, priority: &[usize]) -> CoreDecomposition {
    assert_eq!(priority.len(), g.m(), "priority must rank every edge");
    let mut deg = g.degrees();
    let mut alive = vec![true; g.m()];
    let inc = g.incidence();

    let eligible = |deg: &[usize], e: &[usize]| e.iter().any(|&q| deg[q] == 1);

    // Min-heap on priority of eligible edges.
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = BinaryHeap::new();
    for (i, e) in g.edges.iter().enumerate() {
        if eligible(&deg, e) {
            heap.push(Reverse((priority[i], i)));
        }
    }
    let mut removal_sequence = Vec::new();
    while let Some(Reverse((_, i))) = heap.pop() {
        if !alive[i] || !eligible(&deg, &g.edges[i]) {
            continue;
        }
        alive[i] = false;
        let dangling: Vec<usize> = g.edges[i].iter().copied().filter(|&q| deg[q] == 1).collect();
        for &q in &g.edges[i] {
            deg[q] -= 1;
            if deg[q] > 0 {
                for &j in &inc[q] {
                    if alive[j] && eligible(&deg, &g.edges[j]) {
                        heap.push(Reverse((priority[j], j)));
                    }
                }
            }
        }
        removal_sequence.push((i, dangling));
    }
    let core_edges: Vec<usize> = (0..g.m()).filter(|&i| alive[i]).collect();
    let mut core_qubits: Vec<usize> = core_edges
        .iter()
        .flat_map(|&i| g.edges[i].iter().copied())
        .collect();
    core_qubits.sort_unstable();
    core_qubits.dedup();
    CoreDecomposition {
        core_edges,
        core_qubits,
        removal_sequence,
    }
}

/// Satisfiability verdict carried by graph structure alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Sat,
    Unsat,
}

/// Generic k=2 quantum satisfiability from graph shape: SAT iff every
/// connected component has cyclomatic excess <= 1.
pub fn classify_satisfiability_k2(g: &Hypergraph) -> Result<Verdict> {
    if g.k != 2 {
        return Err(Error::Arity(format!(
            "k = {} but the loop classification is defined for k = 2 only",
            g.k
        )));
    }
    let sat = connected_components(g)
        .iter()
        .all(|c| c.excess() <= 1);
    Ok(if sat { Verdict::Sat } else { Verdict::Unsat })
}

/// Largest loop length accepted by the exact figure-eight counter.
pub const FIGURE_EIGHT_LENGTH_CAP: usize = 12;

/// Exact number of figure-eight subgraphs: an L-cycle plus one chord joining
/// cycle nodes at cycle distance d. Each subgraph (vertex set + edge set) is
/// counted once. Exponential-cost enumeration, hence the length cap.
pub fn count_figure_eights(g: &Hypergraph, loop_len: usize, chord_dist: usize) -> Result<u64> {
    if g.k != 2 {
        return Err(Error::Arity("figure-eight census requires k = 2".into()));
    }
    if loop_len % 2 != 0 || loop_len < 4 {
        return Err(Error::InvalidArgument(format!(
            "loop length L = {loop_len} must be even and >= 4"
        )));
    }
    if loop_len > FIGURE_EIGHT_LENGTH_CAP {
        return Err(Error::CapExceeded(format!(
            "L = {loop_len} exceeds the exact counting cap {FIGURE_EIGHT_LENGTH_CAP}; use the expected-count formula instead"
        )));
    }
    if chord_dist < 2 || chord_dist > loop_len / 2 {
        return Err(Error::InvalidArgument(format!(
            "chord distance d = {chord_dist} outside [2, L/2]"
        )));
    }
    let adj = adjacency_k2(g);
    let mut count = 0u64;
    for cycle in enumerate_cycles(&adj, loop_len) {
        // chords at cycle distance exactly d, each unordered pair once
        let l = cycle.len();
        for i in 0..l {
            for j in i + 1..l {
                let dist = (j - i).min(l - (j - i));
                if dist != chord_dist {
                    continue;
                }
                let (a, b) = (cycle[i], cycle[j]);
                if adj[a].contains(&b) {
                    count += 1;
                }
            }
        }
    }
    Ok(count)
}

pub(crate) fn adjacency_k2(g: &Hypergraph) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); g.n];
    for e in &g.edges {
        adj[e[0]].push(e[1]);
        adj[e[1]].push(e[0]);
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
    }
    adj
}

/// Enumerate simple cycles of exactly `len` vertices, each once: the start
/// vertex is the cycle minimum and the orientation is fixed by requiring the
/// second vertex to be smaller than the last.
pub(crate) fn enumerate_cycles(adj: &[Vec<usize>], len: usize) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut cycles = Vec::new();
    let mut path: Vec<usize> = Vec::with_capacity(len);
    let mut on_path = vec![false; n];

    fn dfs(
        adj: &[Vec<usize>],
        start: usize,
        len: usize,
        path: &mut Vec<usize>,
        on_path: &mut Vec<bool>,
        cycles: &mut Vec<Vec<usize>>,
    ) {
        let last = *path.last().unwrap();
        if path.len() == len {
            if adj[last].contains(&start) && path[1] < path[len - 1] {
                cycles.push(path.clone());
            }
            return;
        }
        for &next in &adj[last] {
            if next <= start || on_path[next] {
                continue;
            }
            path.push(next);
            on_path[next] = true;
            dfs(adj, start, len, path, on_path, cycles);
            on_path[next] = false;
            path.pop();
        }
    }

    for s in 0..n {
        path.clear();
        path.push(s);
        on_path[s] = true;
        dfs(adj, s, len, &mut path, &mut on_path, &mut cycles);
        on_path[s] = false;
    }
    cycles
}

/// Structural ensemble thresholds for arity k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    /// Giant component emergence, 1/(k(k-1)).
    pub alpha_gc: f64,
    /// Hypercore emergence; known constants for k = 2, 3 only.
    pub alpha_hc: Option<f64>,
}

pub fn thresholds(k: usize) -> Result<Thresholds> {
    if k < 2 {
        return Err(Error::Arity(format!("k = {k} must be >= 2")));
    }
    let alpha_hc = match k {
        2 => Some(0.5),
        3 => Some(0.81),
        _ => None,
    };
    Ok(Thresholds {
        alpha_gc: 1.0 / (k * (k - 1)) as f64,
        alpha_hc,
    })
}

/// Aggregate structural statistics of a hypergraph.
#[derive(Debug, Clone, Serialize)]
pub struct GraphStats {
    pub component_count: usize,
    pub component_sizes: Vec<usize>,
    pub hypercore_qubits: usize,
    pub hypercore_edges: usize,
    /// Per-component cyclomatic excess; populated for k = 2 only.
    pub excesses: Option<Vec<i64>>,
    pub giant_fraction: f64,
}

pub fn graph_stats(g: &Hypergraph) -> GraphStats {
    let comps = connected_components(g);
    let core = hypercore(g);
    let sizes: Vec<usize> = comps.iter().map(|c| c.qubits.len()).collect();
    let giant = sizes.iter().copied().max().unwrap_or(0);
    GraphStats {
        component_count: comps.len(),
        giant_fraction: if g.n == 0 { 0.0 } else { giant as f64 / g.n as f64 },
        component_sizes: sizes,
        hypercore_qubits: core.core_qubits.len(),
        hypercore_edges: core.core_edges.len(),
        excesses: if g.k == 2 {
            Some(comps.iter().map(|c| c.excess()).collect())
        } else {
            None
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, k: usize, edges: &[&[usize]]) -> Hypergraph {
        Hypergraph::new(n, k, 0, edges.iter().map(|e| e.to_vec()).collect()).unwrap()
    }

    #[test]
    fn zero_density_gives_zero_edges() {
        let g = sample_hypergraph(10, 2, 0.0, SampleMode::Poisson, 1).unwrap();
        assert_eq!(g.m(), 0);
        let g = sample_hypergraph(10, 2, 0.0, SampleMode::FixedM, 1).unwrap();
        assert_eq!(g.m(), 0);
    }

    #[test]
    fn fixed_m_gives_exact_count() {
        let g = sample_hypergraph(4, 3, 1.0, SampleMode::FixedM, 7).unwrap();
        assert_eq!(g.m(), 4);
        let set: HashSet<_> = g.edges.iter().collect();
        assert_eq!(set.len(), 4);
        for e in &g.edges {
            assert_eq!(e.len(), 3);
            assert!(e[0] < e[1] && e[1] < e[2]);
        }
    }

    #[test]
    fn poisson_mode_mean_edge_density() {
        let n = 400;
        let trials = 200;
        let mut total = 0usize;
        for s in 0..trials {
            total += sample_hypergraph(n, 2, 0.5, SampleMode::Poisson, s).unwrap().m();
        }
        let mean_density = total as f64 / trials as f64 / n as f64;
        assert!(
            (mean_density - 0.5).abs() < 0.02,
            "mean M/N = {mean_density}, want ~0.5"
        );
    }

    #[test]
    fn capacity_error_when_alpha_too_large() {
        let err = sample_hypergraph(4, 3, 2.0, SampleMode::FixedM, 0).unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
    }

    #[test]
    fn components_path_pairs() {
        let g = graph(4, 2, &[&[0, 1], &[2, 3]]);
        let comps = connected_components(&g);
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].qubits, vec![0, 1]);
        assert_eq!(comps[1].qubits, vec![2, 3]);
    }

    #[test]
    fn components_empty_graph_singletons() {
        let g = graph(5, 2, &[]);
        let comps = connected_components(&g);
        assert_eq!(comps.len(), 5);
        assert!(comps.iter().all(|c| c.qubits.len() == 1 && c.edges.is_empty()));
    }

    #[test]
    fn components_triple_plus_isolated() {
        let g = graph(4, 3, &[&[0, 1, 2]]);
        let comps = connected_components(&g);
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].qubits, vec![0, 1, 2]);
        assert_eq!(comps[1].qubits, vec![3]);
    }

    #[test]
    fn component_sums_match_totals() {
        let g = sample_hypergraph(60, 3, 0.8, SampleMode::Poisson, 5).unwrap();
        let comps = connected_components(&g);
        let nq: usize = comps.iter().map(|c| c.qubits.len()).sum();
        let ne: usize = comps.iter().map(|c| c.edges.len()).sum();
        assert_eq!(nq, g.n);
        assert_eq!(ne, g.m());
    }

    #[test]
    fn tree_strips_to_empty_core() {
        let g = graph(5, 2, &[&[0, 1], &[1, 2], &[1, 3], &[3, 4]]);
        let core = hypercore(&g);
        assert!(core.is_empty());
        assert_eq!(core.removal_sequence.len(), 4);
    }

    #[test]
    fn cycle_is_its_own_core() {
        let g = graph(5, 2, &[&[0, 1], &[1, 2], &[2, 3], &[3, 4], &[0, 4]]);
        let core = hypercore(&g);
        assert_eq!(core.core_edges.len(), 5);
        assert_eq!(core.core_qubits.len(), 5);
        assert!(core.removal_sequence.is_empty());
    }

    #[test]
    fn two_triples_sharing_a_qubit_strip_away() {
        let g = graph(5, 3, &[&[0, 1, 2], &[2, 3, 4]]);
        let core = hypercore(&g);
        assert!(core.is_empty());
    }

    #[test]
    fn stripping_is_confluent() {
        let g = sample_hypergraph(40, 2, 0.9, SampleMode::Poisson, 11).unwrap();
        let reference = hypercore(&g).core_edges;
        let mut rng = rng_from_seed(99);
        for _ in 0..20 {
            let mut priority: Vec<usize> = (0..g.m()).collect();
            for i in (1..priority.len()).rev() {
                let j = rng.random_range(0..=i);
                priority.swap(i, j);
            }
            assert_eq!(hypercore_with_order(&g, &priority).core_edges, reference);
        }
    }

    #[test]
    fn classify_k2_tree_loop_figure_eight() {
        let tree = graph(4, 2, &[&[0, 1], &[1, 2], &[1, 3]]);
        assert_eq!(classify_satisfiability_k2(&tree).unwrap(), Verdict::Sat);
        let loop4 = graph(4, 2, &[&[0, 1], &[1, 2], &[2, 3], &[0, 3]]);
        assert_eq!(classify_satisfiability_k2(&loop4).unwrap(), Verdict::Sat);
        let fig8 = graph(4, 2, &[&[0, 1], &[1, 2], &[2, 3], &[0, 3], &[0, 2]]);
        assert_eq!(classify_satisfiability_k2(&fig8).unwrap(), Verdict::Unsat);
        let g3 = graph(4, 3, &[&[0, 1, 2]]);
        assert!(matches!(classify_satisfiability_k2(&g3), Err(Error::Arity(_))));
    }

    /// Independent brute-force oracle: enumerate all (L+1)-edge subsets and
    /// check figure-eight shape directly.
    fn brute_force_figure_eights(g: &Hypergraph, loop_len: usize, chord_dist: usize) -> u64 {
        let m = g.m();
        let mut count = 0u64;
        let mut pick = vec![false; m];
        fn rec(
            g: &Hypergraph,
            loop_len: usize,
            chord_dist: usize,
            start: usize,
            chosen: usize,
            pick: &mut Vec<bool>,
            count: &mut u64,
        ) {
            if chosen == loop_len + 1 {
                if is_figure_eight(g, pick, loop_len, chord_dist) {
                    *count += 1;
                }
                return;
            }
            if start >= g.m() || g.m() - start < loop_len + 1 - chosen {
                return;
            }
            pick[start] = true;
            rec(g, loop_len, chord_dist, start + 1, chosen + 1, pick, count);
            pick[start] = false;
            rec(g, loop_len, chord_dist, start + 1, chosen, pick, count);
        }
        rec(g, loop_len, chord_dist, 0, 0, &mut pick, &mut count);
        count
    }

    fn is_figure_eight(g: &Hypergraph, pick: &[bool], loop_len: usize, chord_dist: usize) -> bool {
        // degree sequence: exactly two vertices of degree 3, loop_len - 2 of degree 2
        let mut deg = std::collections::HashMap::new();
        let mut edges = Vec::new();
        for (i, e) in g.edges.iter().enumerate() {
            if pick[i] {
                edges.push((e[0], e[1]));
                *deg.entry(e[0]).or_insert(0usize) += 1;
                *deg.entry(e[1]).or_insert(0usize) += 1;
            }
        }
        if deg.len() != loop_len {
            return false;
        }
        let deg3: Vec<usize> = deg.iter().filter(|(_, &d)| d == 3).map(|(&v, _)| v).collect();
        if deg3.len() != 2 || deg.values().filter(|&&d| d == 2).count() != loop_len - 2 {
            return false;
        }
        // the chord is the unique edge joining the two degree-3 vertices
        let chord = (deg3[0].min(deg3[1]), deg3[0].max(deg3[1]));
        if !edges.contains(&chord) {
            return false;
        }
        // removing the chord must leave a single L-cycle with the two branch
        // vertices at cycle distance chord_dist
        let rest: Vec<(usize, usize)> = edges.iter().copied().filter(|&e| e != chord).collect();
        if rest.len() != loop_len {
            return false;
        }
        let mut adj: std::collections::HashMap<usize, Vec<usize>> = std::collections::HashMap::new();
        for &(a, b) in &rest {
            adj.entry(a).or_default().push(b);
            adj.entry(b).or_default().push(a);
        }
        if adj.values().any(|v| v.len() != 2) {
            return false;
        }
        // walk the cycle
        let start = chord.0;
        let mut order = vec![start];
        let mut prev = start;
        let mut cur = adj[&start][0];
        while cur != start {
            order.push(cur);
            let nbrs = &adj[&cur];
            let next = if nbrs[0] == prev { nbrs[1] } else { nbrs[0] };
            prev = cur;
            cur = next;
        }
        if order.len() != loop_len {
            return false;
        }
        let pos = order.iter().position(|&v| v == chord.1).unwrap();
        let dist = pos.min(loop_len - pos);
        dist == chord_dist
    }

    #[test]
    fn figure_eight_count_on_k4_matches_brute_force() {
        // K4: every 5-edge subset is a 4-cycle plus a distance-2 chord,
        // so the exact count is 6 (one per omitted edge).
        let g = graph(4, 2, &[&[0, 1], &[0, 2], &[0, 3], &[1, 2], &[1, 3], &[2, 3]]);
        let brute = brute_force_figure_eights(&g, 4, 2);
        assert_eq!(brute, 6);
        assert_eq!(count_figure_eights(&g, 4, 2).unwrap(), brute);
    }

    #[test]
    fn figure_eight_count_random_graphs_match_brute_force() {
        for seed in 0..6 {
            let g = sample_hypergraph(10, 2, 1.1, SampleMode::Poisson, seed).unwrap();
            for (l, d) in [(4, 2), (6, 2), (6, 3)] {
                assert_eq!(
                    count_figure_eights(&g, l, d).unwrap(),
                    brute_force_figure_eights(&g, l, d),
                    "seed {seed} L={l} d={d}"
                );
            }
        }
    }

    #[test]
    fn figure_eight_count_tree_is_zero() {
        let g = graph(6, 2, &[&[0, 1], &[1, 2], &[2, 3], &[3, 4], &[4, 5]]);
        assert_eq!(count_figure_eights(&g, 4, 2).unwrap(), 0);
    }

    #[test]
    fn figure_eight_disjoint_union_counts_both() {
        // two disjoint 4-cycles each with a chord
        let g = graph(
            8,
            2,
            &[
                &[0, 1], &[1, 2], &[2, 3], &[0, 3], &[0, 2],
                &[4, 5], &[5, 6], &[6, 7], &[4, 7], &[4, 6],
            ],
        );
        assert_eq!(count_figure_eights(&g, 4, 2).unwrap(), 2);
    }

    #[test]
    fn figure_eight_length_cap_refused() {
        let g = graph(4, 2, &[&[0, 1]]);
        assert!(matches!(
            count_figure_eights(&g, 14, 2),
            Err(Error::CapExceeded(_))
        ));
    }

    #[test]
    fn threshold_values() {
        let t2 = thresholds(2).unwrap();
        assert_eq!(t2.alpha_gc, 0.5);
        assert_eq!(t2.alpha_hc, Some(0.5));
        let t3 = thresholds(3).unwrap();
        assert!((t3.alpha_gc - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(t3.alpha_hc, Some(0.81));
        let t4 = thresholds(4).unwrap();
        assert!((t4.alpha_gc - 1.0 / 12.0).abs() < 1e-15);
        assert_eq!(t4.alpha_hc, None);
    }

    #[test]
    fn graph_json_round_trip() {
        let g = sample_hypergraph(12, 3, 0.7, SampleMode::Poisson, 3).unwrap();
        let text = serde_json::to_string(&g).unwrap();
        let back = Hypergraph::from_json(&text).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn graph_json_rejects_duplicate_edges() {
        let text = r#"{"n":4,"k":2,"seed":0,"edges":[[0,1],[0,1]]}"#;
        assert!(matches!(
            Hypergraph::from_json(text),
            Err(Error::Validation { .. })
        ));
    }

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(10, 3), 120);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(1000, 2), 499_500);
    }
}
