//! Closed-form thresholds and counting formulas, plus exhaustive
//! classical-frustration search and the k=2 classical UNSAT certificate.

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::hypergraph::{connected_components, hypercore, Hypergraph};
use crate::instance::parse_clause_bits;

/// Weak UNSAT threshold: alpha above -1/log2(1 - r/2^k) is almost always
/// UNSAT. Returns 0 for r = 2^k (identity projectors).
pub fn alpha_weak_bound(k: usize, r: usize) -> Result<f64> {
    let dim = 1usize << k;
    if r == 0 || r > dim {
        return Err(Error::Rank { r, k, dim });
    }
    if r == dim {
        return Ok(0.0);
    }
    let factor = 1.0 - r as f64 / dim as f64;
    Ok(-1.0 / factor.log2())
}

/// log2 upper bound on the kernel dimension: n + M log2(1 - r/2^k).
/// NEG_INFINITY (certain UNSAT) when r = 2^k with M > 0.
pub fn weak_dim_bound(n: usize, m: usize, k: usize, r: usize) -> f64 {
    let dim = 1usize << k;
    if r == dim {
        return if m > 0 { f64::NEG_INFINITY } else { n as f64 };
    }
    let factor = 1.0 - r as f64 / dim as f64;
    n as f64 + m as f64 * factor.log2()
}

/// What to count in the random graph.
#[derive(Debug, Clone, PartialEq)]
pub enum SubgraphDescriptor {
    /// Arbitrary subgraph A: vertex count, edge count, automorphism count.
    Explicit {
        vertices: usize,
        edges: usize,
        automorphisms: f64,
    },
    /// K disjoint figure eights of size L with the crossbar at cycle
    /// distance d (each copy contributes |Aut| = 2, or 4 when d = L/2).
    FigureEights {
        copies: usize,
        loop_len: usize,
        chord_dist: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountingQuery {
    pub n: usize,
    pub p: f64,
    pub descriptor: SubgraphDescriptor,
}

impl SubgraphDescriptor {
    pub fn vertices(&self) -> usize {
        match *self {
            SubgraphDescriptor::Explicit { vertices, .. } => vertices,
            SubgraphDescriptor::FigureEights { copies, loop_len, .. } => copies * loop_len,
        }
    }

    pub fn edges(&self) -> usize {
        match *self {
            SubgraphDescriptor::Explicit { edges, .. } => edges,
            SubgraphDescriptor::FigureEights { copies, loop_len, .. } => copies * (loop_len + 1),
        }
    }

    pub fn ln_automorphisms(&self) -> f64 {
        match *self {
            SubgraphDescriptor::Explicit { automorphisms, .. } => automorphisms.ln(),
            SubgraphDescriptor::FigureEights {
                copies,
                loop_len,
                chord_dist,
            } => {
                // K! permutations of the copies; each copy has the branch
                // swap (x2), plus the arc swap (x2 more) when d = L/2
                let per_copy: f64 = if 2 * chord_dist == loop_len { 4.0 } else { 2.0 };
                ln_gamma(copies as f64 + 1.0) + copies as f64 * per_copy.ln()
            }
        }
    }
}

/// ln of the expected number of copies of A in G(n, p):
/// ln [ n! / (n - |A|)! / |Aut(A)| * p^{e(A)} ], evaluated in log-gamma
/// space so n ~ 1e6 stays finite.
pub fn expected_subgraph_count_ln(q: &CountingQuery) -> Result<f64> {
    let a = q.descriptor.vertices();
    if a > q.n {
        return Err(Error::InvalidArgument(format!(
            "subgraph has {a} vertices, graph only {}",
            q.n
        )));
    }
    if q.p <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let n = q.n as f64;
    Ok(ln_gamma(n + 1.0) - ln_gamma(n - a as f64 + 1.0) - q.descriptor.ln_automorphisms()
        + q.descriptor.edges() as f64 * q.p.ln())
}

/// Expected count in linear space (may overflow to +inf for huge counts).
pub fn expected_subgraph_count(q: &CountingQuery) -> Result<f64> {
    Ok(expected_subgraph_count_ln(q)?.exp())
}

/// Asymptotic entropy of K-fold disjoint figure eights of size L:
/// S = KL (ln 2α − KL/n) + K (ln α + 1 − ln K − ln n).
pub fn figure_eight_entropy(n: usize, alpha: f64, copies: usize, loop_len: usize) -> Result<f64> {
    if alpha <= 0.0 {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must be > 0")));
    }
    if copies == 0 || loop_len == 0 {
        return Err(Error::InvalidArgument("K and L must be positive".into()));
    }
    let kl = copies as f64 * loop_len as f64;
    if kl > n as f64 / 10.0 {
        return Err(Error::InvalidArgument(format!(
            "KL = {kl} exceeds n/10 = {}; the asymptotic form needs KL << n",
            n as f64 / 10.0
        )));
    }
    let n = n as f64;
    let k = copies as f64;
    Ok(kl * ((2.0 * alpha).ln() - kl / n) + k * (alpha.ln() + 1.0 - k.ln() - n.ln()))
}

/// Result of the exhaustive frustration search.
#[derive(Debug, Clone, Serialize)]
pub struct FrustrationReport {
    /// Minimum number of satisfying assignments over all classical clause
    /// choices.
    pub min_satisfying: u64,
    /// One minimizing clause assignment, as k-bit strings per edge.
    pub argmin_clauses: Vec<String>,
    /// Clause assignments examined ((2^k)^M).
    pub assignments_examined: u64,
}

/// Exhaustively minimize the satisfying-assignment count over every
/// classical clause choice (one forbidden k-string per edge). Work is
/// (2^k)^M * 2^N, capped.
pub fn most_frustrated_classical(g: &Hypergraph, cap: u64) -> Result<FrustrationReport> {
    let k = g.k;
    let m = g.m();
    let n = g.n;
    let clause_space = (1u64 << k).checked_pow(m as u32).ok_or_else(|| {
        Error::CapExceeded("clause space exceeds u64".into())
    })?;
    let config_space = 1u64 << n;
    let work = clause_space.checked_mul(config_space);
    match work {
        Some(w) if w <= cap => {}
        _ => {
            return Err(Error::CapExceeded(format!(
                "(2^k)^M * 2^N = {clause_space} * {config_space} exceeds cap {cap}; \
                 use the certificate construction instead"
            )))
        }
    }
    // pattern of configuration x on edge e, tuple position 0 as leftmost bit
    let patterns: Vec<Vec<u16>> = g
        .edges
        .iter()
        .map(|edge| {
            (0..config_space)
                .map(|x| {
                    edge.iter().fold(0u16, |acc, &q| {
                        (acc << 1) | (((x >> q) & 1) as u16)
                    })
                })
                .collect()
        })
        .collect();

    let per_edge = 1u64 << k;
    let best = (0..clause_space)
        .into_par_iter()
        .map(|assignment| {
            let mut clauses = Vec::with_capacity(m);
            let mut rem = assignment;
            for _ in 0..m {
                clauses.push((rem % per_edge) as u16);
                rem /= per_edge;
            }
            let mut count = 0u64;
            for x in 0..config_space {
                let ok = (0..m).all(|e| patterns[e][x as usize] != clauses[e]);
                if ok {
                    count += 1;
                }
            }
            (count, assignment)
        })
        .min()
        .unwrap_or((config_space, 0));

    let mut clauses = Vec::with_capacity(m);
    let mut rem = best.1;
    for _ in 0..m {
        let c = (rem % per_edge) as u16;
        rem /= per_edge;
        clauses.push(
            (0..k)
                .map(|t| if (c >> (k - 1 - t)) & 1 == 1 { '1' } else { '0' })
                .collect::<String>(),
        );
    }
    Ok(FrustrationReport {
        min_satisfying: best.0,
        argmin_clauses: clauses,
        assignments_examined: clause_space,
    })
}

/// How the k=2 UNSAT certificate was assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CertificateKind {
    /// Two edge-disjoint forcing cycles joined by a path (possibly trivial).
    Dumbbell,
    /// One cycle pinned to all-0/all-1 plus two ears killing each.
    CycleTwoEars,
}

/// A classical clause assignment with zero satisfying assignments.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateK2 {
    /// Forbidden 2-bit string per edge (sorted-tuple order), for all edges.
    pub clauses: Vec<String>,
    /// Qubits of the unsatisfiable component.
    pub component_qubits: Vec<usize>,
    pub kind: CertificateKind,
    /// Some(true) when exhaustively verified (component size <= 20);
    /// None when too large to verify.
    pub verified: Option<bool>,
}

/// Construct a classical UNSAT certificate on a k=2 graph.
///
/// A component must have cyclomatic excess >= 2 to be a candidate at all.
/// Theta-type components (two branch vertices joined by three paths; this
/// includes the plain "cycle + one chord" figure eight) admit no certificate:
/// each of the three paths constrains the endpoint pair by at most one
/// forbidden pattern, and three forbidden patterns cannot empty the four
/// possible endpoint assignments. Certificates exist for dumbbell-type
/// excess-2 components and for anything containing a cycle with two ears.
pub fn unsat_certificate_k2(g: &Hypergraph) -> Result<CertificateK2> {
    if g.k != 2 {
        return Err(Error::Arity("certificates are defined for k = 2".into()));
    }
    let comps = connected_components(g);
    let mut best_excess = i64::MIN;
    let mut last_err: Option<Error> = None;
    for comp in &comps {
        let excess = comp.excess();
        best_excess = best_excess.max(excess);
        if excess < 2 {
            continue;
        }
        match certificate_for_component(g, &comp.edges) {
            Ok(mut cert) => {
                cert.component_qubits = comp.qubits.clone();
                if comp.qubits.len() <= 20 {
                    let ok = verify_unsat(g, &cert.clauses, comp);
                    if !ok {
                        return Err(Error::Validation {
                            context: "certificate".into(),
                            message: "constructed certificate failed exhaustive verification"
                                .into(),
                        });
                    }
                    cert.verified = Some(true);
                }
                return Ok(cert);
            }
            Err(e) => last_err = Some(e),
        }
    }
    if best_excess < 2 {
        return Err(Error::InvalidArgument(format!(
            "no component has cyclomatic excess >= 2 (max {best_excess})"
        )));
    }
    Err(last_err.unwrap_or_else(|| {
        Error::CertificateNotFound("no qualifying component".into())
    }))
}

/// Exhaustive check that no assignment of the component qubits satisfies
/// every component clause.
fn verify_unsat(g: &Hypergraph, clauses: &[String], comp: &crate::hypergraph::Component) -> bool {
    let vars = &comp.qubits;
    let pos = |q: usize| vars.iter().position(|&v| v == q).unwrap();
    let edge_data: Vec<(usize, usize, usize)> = comp
        .edges
        .iter()
        .map(|&e| {
            let t = &g.edges[e];
            (pos(t[0]), pos(t[1]), parse_clause_bits(&clauses[e], 2).unwrap())
        })
        .collect();
    for x in 0u64..(1u64 << vars.len()) {
        let sat = edge_data.iter().all(|&(p0, p1, forbidden)| {
            let pattern = (((x >> p0) & 1) << 1 | ((x >> p1) & 1)) as usize;
            pattern != forbidden
        });
        if sat {
            return false;
        }
    }
    true
}

struct ClauseMap {
    clauses: Vec<Option<String>>,
}

impl ClauseMap {
    fn new(m: usize) -> Self {
        ClauseMap {
            clauses: vec![None; m],
        }
    }

    /// Forbid (value_at_u, value_at_v) on the edge joining u and v.
    fn forbid(&mut self, g: &Hypergraph, edge: usize, u: usize, bits: (u8, u8)) {
        let t = &g.edges[edge];
        let s = if t[0] == u {
            format!("{}{}", bits.0, bits.1)
        } else {
            format!("{}{}", bits.1, bits.0)
        };
        assert!(self.clauses[edge].is_none(), "edge {edge} assigned twice");
        self.clauses[edge] = Some(s);
    }

    fn finish(self) -> Vec<String> {
        self.clauses
            .into_iter()
            .map(|c| c.unwrap_or_else(|| "00".into()))
            .collect()
    }
}

/// Clause chain realizing exactly the relation ¬(path_start = a ∧ path_end = b)
/// along a path given as (edge, from_vertex) steps.
fn realize_forbidden_path(
    map: &mut ClauseMap,
    g: &Hypergraph,
    steps: &[(usize, usize)],
    a: u8,
    b: u8,
) {
    let t = steps.len();
    if t == 1 {
        map.forbid(g, steps[0].0, steps[0].1, (a, b));
        return;
    }
    map.forbid(g, steps[0].0, steps[0].1, (a, 0));
    for &(e, from) in &steps[1..t - 1] {
        map.forbid(g, e, from, (1, 0));
    }
    map.forbid(g, steps[t - 1].0, steps[t - 1].1, (1, b));
}

/// Pin `base` to `value` using the clauses of a cycle through it: the closed
/// chain realizes ¬(base = ¬value ∧ base = ¬value).
fn force_cycle_value(
    map: &mut ClauseMap,
    g: &Hypergraph,
    cycle_steps: &[(usize, usize)],
    value: u8,
) {
    let other = 1 - value;
    realize_forbidden_path(map, g, cycle_steps, other, other);
}

/// A walk is a list of (edge index, traversal source vertex).
type Walk = Vec<(usize, usize)>;

fn adjacency_restricted(g: &Hypergraph, edges: &[usize]) -> Vec<Vec<(usize, usize)>> {
    // vertex -> (neighbor, edge)
    let mut adj = vec![Vec::new(); g.n];
    for &e in edges {
        let t = &g.edges[e];
        adj[t[0]].push((t[1], e));
        adj[t[1]].push((t[0], e));
    }
    adj
}

/// Any simple cycle in the restricted edge set, as (vertices, edges).
fn find_cycle(g: &Hypergraph, edges: &[usize]) -> Option<(Vec<usize>, Vec<usize>)> {
    let adj = adjacency_restricted(g, edges);
    let mut color = vec![0u8; g.n];
    let mut parent_edge = vec![usize::MAX; g.n];
    let mut parent = vec![usize::MAX; g.n];
    for start in 0..g.n {
        if color[start] != 0 || adj[start].is_empty() {
            continue;
        }
        let mut stack = vec![(start, usize::MAX)];
        while let Some((v, via)) = stack.pop() {
            if color[v] != 0 {
                continue;
            }
            color[v] = 1;
            parent_edge[v] = via;
            for &(w, e) in &adj[v] {
                if e == via {
                    continue;
                }
                if color[w] == 0 {
                    parent[w] = v;
                    stack.push((w, e));
                } else {
                    // found a cycle closing edge (w already visited)
                    // walk v up to the root collecting the path, likewise w
                    let path_to_root = |mut x: usize, parent: &[usize]| {
                        let mut path = vec![x];
                        while parent[x] != usize::MAX {
                            x = parent[x];
                            path.push(x);
                        }
                        path
                    };
                    let pv = path_to_root(v, &parent);
                    let pw = path_to_root(w, &parent);
                    // common suffix: find deepest common vertex
                    let sv: std::collections::HashSet<_> = pv.iter().copied().collect();
                    let meet = *pw.iter().find(|x| sv.contains(x)).unwrap();
                    let mut cyc: Vec<usize> =
                        pv.iter().take_while(|&&x| x != meet).copied().collect();
                    cyc.push(meet);
                    let tail: Vec<usize> =
                        pw.iter().take_while(|&&x| x != meet).copied().collect();
                    cyc.extend(tail.iter().rev());
                    // collect edges around the cycle
                    let mut cyc_edges = Vec::new();
                    for i in 0..cyc.len() {
                        let (x, y) = (cyc[i], cyc[(i + 1) % cyc.len()]);
                        if i + 1 == cyc.len() {
                            cyc_edges.push(e);
                            debug_assert!(
                                (x, y) == (v, w) || (x, y) == (w, v),
                                "closing edge endpoints"
                            );
                        } else {
                            let eid = adj[x]
                                .iter()
                                .find(|&&(nbr, ed)| {
                                    nbr == y && ed != via && cycle_edge_ok(&cyc_edges, ed)
                                })
                                .map(|&(_, ed)| ed)
                                .or_else(|| {
                                    adj[x].iter().find(|&&(nbr, _)| nbr == y).map(|&(_, ed)| ed)
                                })
                                .unwrap();
                            cyc_edges.push(eid);
                        }
                    }
                    return Some((cyc, cyc_edges));
                }
            }
        }
    }
    None
}

fn cycle_edge_ok(used: &[usize], e: usize) -> bool {
    !used.contains(&e)
}

/// Shortest path (BFS) from any vertex in `from` to any vertex in `to`,
/// using only `allowed` edges. Returns a walk.
fn bfs_connector(
    g: &Hypergraph,
    allowed: &[usize],
    from: &[usize],
    to: &[usize],
) -> Option<(usize, usize, Walk)> {
    let to_set: std::collections::HashSet<usize> = to.iter().copied().collect();
    for &s in from {
        if to_set.contains(&s) {
            return Some((s, s, Vec::new()));
        }
    }
    let adj = adjacency_restricted(g, allowed);
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; g.n]; // (vertex, edge)
    let mut seen = vec![false; g.n];
    let mut queue = std::collections::VecDeque::new();
    for &s in from {
        seen[s] = true;
        queue.push_back(s);
    }
    while let Some(v) = queue.pop_front() {
        for &(w, e) in &adj[v] {
            if seen[w] {
                continue;
            }
            seen[w] = true;
            prev[w] = Some((v, e));
            if to_set.contains(&w) {
                // reconstruct
                let mut walk = Vec::new();
                let mut cur = w;
                while let Some((p, e)) = prev[cur] {
                    walk.push((e, p));
                    cur = p;
                }
                walk.reverse();
                let start = cur;
                return Some((start, w, walk));
            }
            queue.push_back(w);
        }
    }
    None
}

fn certificate_for_component(g: &Hypergraph, comp_edges: &[usize]) -> Result<CertificateK2> {
    // operate on the 2-core of the component
    let core = hypercore(g);
    let core_set: std::collections::HashSet<usize> = core.core_edges.iter().copied().collect();
    let edges: Vec<usize> = comp_edges
        .iter()
        .copied()
        .filter(|e| core_set.contains(e))
        .collect();
    if edges.is_empty() {
        return Err(Error::InvalidArgument("component has an empty 2-core".into()));
    }

    let (c1_vertices, c1_edges) =
        find_cycle(g, &edges).ok_or_else(|| Error::CertificateNotFound("no cycle found".into()))?;

    // Dumbbell: a second cycle edge-disjoint from the first.
    let rest: Vec<usize> = edges
        .iter()
        .copied()
        .filter(|e| !c1_edges.contains(e))
        .collect();
    if let Some((c2_vertices, c2_edges)) = find_cycle(g, &rest) {
        let connector_allowed: Vec<usize> = edges
            .iter()
            .copied()
            .filter(|e| !c1_edges.contains(e) && !c2_edges.contains(e))
            .collect();
        if let Some((u, w, walk)) = bfs_connector(g, &connector_allowed, &c1_vertices, &c2_vertices)
        {
            let mut map = ClauseMap::new(g.m());
            force_cycle_value(&mut map, g, &cycle_walk_from(&c1_vertices, &c1_edges, u), 1);
            force_cycle_value(&mut map, g, &cycle_walk_from(&c2_vertices, &c2_edges, w), 0);
            if !walk.is_empty() {
                realize_forbidden_path(&mut map, g, &walk, 1, 0);
            }
            return Ok(CertificateK2 {
                clauses: map.finish(),
                component_qubits: Vec::new(),
                kind: CertificateKind::Dumbbell,
                verified: None,
            });
        }
    }

    // Cycle with two ears: search over enumerated cycles of growing length.
    let adj = crate::hypergraph::adjacency_k2(g);
    let mut candidates: Vec<(Vec<usize>, Vec<usize>)> = vec![(c1_vertices, c1_edges)];
    for len in 3..=12.min(g.n) {
        for cyc in crate::hypergraph::enumerate_cycles(&adj, len) {
            if candidates.len() >= 200 {
                break;
            }
            if !cyc.iter().all(|v| edges.iter().any(|&e| g.edges[e].contains(v))) {
                continue;
            }
            let mut cyc_edges = Vec::new();
            let mut ok = true;
            for i in 0..cyc.len() {
                let (x, y) = (cyc[i], cyc[(i + 1) % cyc.len()]);
                match edge_between(g, &edges, x, y) {
                    Some(e) => cyc_edges.push(e),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                candidates.push((cyc, cyc_edges));
            }
        }
    }
    for (cyc, cyc_edges) in &candidates {
        if let Some(cert) = try_two_ears(g, &edges, cyc, cyc_edges) {
            return Ok(cert);
        }
    }

    // Theta components provably admit no certificate.
    let comp_vertices: std::collections::HashSet<usize> = edges
        .iter()
        .flat_map(|&e| g.edges[e].iter().copied())
        .collect();
    let excess = edges.len() as i64 - comp_vertices.len() as i64 + 1;
    if excess == 2 {
        return Err(Error::NoCertificate(
            "theta-type component (includes the cycle-plus-chord figure eight): \
             every path between the two branch vertices forbids at most one \
             endpoint pattern, and three patterns cannot exclude all four \
             assignments"
                .into(),
        ));
    }
    Err(Error::CertificateNotFound(
        "no two edge-disjoint cycles and no cycle with two disjoint ears found".into(),
    ))
}

fn edge_between(g: &Hypergraph, allowed: &[usize], x: usize, y: usize) -> Option<usize> {
    allowed
        .iter()
        .copied()
        .find(|&e| g.edges[e].contains(&x) && g.edges[e].contains(&y))
}

/// Rotate a cycle (vertices + edges) so it starts and ends at `base`,
/// returning traversal steps.
fn cycle_walk_from(vertices: &[usize], edges: &[usize], base: usize) -> Walk {
    let l = vertices.len();
    let start = vertices.iter().position(|&v| v == base).expect("base on cycle");
    (0..l)
        .map(|i| {
            let idx = (start + i) % l;
            (edges[idx], vertices[idx])
        })
        .collect()
}

fn try_two_ears(
    g: &Hypergraph,
    comp_edges: &[usize],
    cyc: &[usize],
    cyc_edges: &[usize],
) -> Option<CertificateK2> {
    let non_cycle: Vec<usize> = comp_edges
        .iter()
        .copied()
        .filter(|e| !cyc_edges.contains(e))
        .collect();
    let on_cycle: std::collections::HashSet<usize> = cyc.iter().copied().collect();
    // enumerate ears: BFS from each cycle vertex through non-cycle edges,
    // stopping on return to the cycle; internal vertices must avoid the cycle
    let mut ears: Vec<(usize, usize, Walk)> = Vec::new();
    for &a in cyc {
        let others: Vec<usize> = cyc.iter().copied().filter(|&v| v != a).collect();
        // temporarily ban paths through other cycle vertices by BFS layering
        if let Some((s, t, walk)) = bfs_connector_avoiding(g, &non_cycle, a, &others, &on_cycle) {
            ears.push((s, t, walk));
        }
    }
    // pick two ears that are edge-disjoint and internally vertex-disjoint
    for i in 0..ears.len() {
        for j in i + 1..ears.len() {
            let (a1, b1, w1) = &ears[i];
            let (a2, b2, w2) = &ears[j];
            let e1: std::collections::HashSet<usize> = w1.iter().map(|&(e, _)| e).collect();
            if w2.iter().any(|&(e, _)| e1.contains(&e)) {
                continue;
            }
            let internals = |w: &Walk, s: usize, t: usize| -> std::collections::HashSet<usize> {
                let mut vs = std::collections::HashSet::new();
                for &(e, from) in w {
                    vs.insert(from);
                    let tup = &g.edges[e];
                    vs.insert(if tup[0] == from { tup[1] } else { tup[0] });
                }
                vs.remove(&s);
                vs.remove(&t);
                vs
            };
            let i1 = internals(w1, *a1, *b1);
            let i2 = internals(w2, *a2, *b2);
            if !i1.is_disjoint(&i2) {
                continue;
            }
            // pin the cycle to all-0/all-1 with directed "01" clauses
            let mut map = ClauseMap::new(g.m());
            let l = cyc.len();
            for idx in 0..l {
                map.forbid(g, cyc_edges[idx], cyc[idx], (0, 1));
            }
            realize_forbidden_path(&mut map, g, w1, 0, 0);
            realize_forbidden_path(&mut map, g, w2, 1, 1);
            return Some(CertificateK2 {
                clauses: map.finish(),
                component_qubits: Vec::new(),
                kind: CertificateKind::CycleTwoEars,
                verified: None,
            });
        }
    }
    None
}

/// BFS from `start` to any vertex in `targets` over `allowed` edges, never
/// passing through `banned` vertices internally.
fn bfs_connector_avoiding(
    g: &Hypergraph,
    allowed: &[usize],
    start: usize,
    targets: &[usize],
    banned: &std::collections::HashSet<usize>,
) -> Option<(usize, usize, Walk)> {
    let target_set: std::collections::HashSet<usize> = targets.iter().copied().collect();
    let adj = adjacency_restricted(g, allowed);
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; g.n];
    let mut seen = vec![false; g.n];
    let mut queue = std::collections::VecDeque::new();
    seen[start] = true;
    queue.push_back(start);
    while let Some(v) = queue.pop_front() {
        for &(w, e) in &adj[v] {
            if seen[w] {
                continue;
            }
            if target_set.contains(&w) {
                seen[w] = true;
                prev[w] = Some((v, e));
                let mut walk = Vec::new();
                let mut cur = w;
                while let Some((p, pe)) = prev[cur] {
                    walk.push((pe, p));
                    cur = p;
                }
                walk.reverse();
                return Some((start, w, walk));
            }
            if banned.contains(&w) {
                continue;
            }
            seen[w] = true;
            prev[w] = Some((v, e));
            queue.push_back(w);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::{sample_hypergraph, SampleMode};

    fn graph(n: usize, edges: &[&[usize]]) -> Hypergraph {
        Hypergraph::new(n, 2, 0, edges.iter().map(|e| e.to_vec()).collect()).unwrap()
    }

    #[test]
    fn weak_bound_thresholds() {
        // independent route: -1/log2(1 - r/2^k) = 1/log2(2^k/(2^k - r))
        let a21 = alpha_weak_bound(2, 1).unwrap();
        assert!((a21 - 2.409420839653209).abs() < 1e-12, "{a21}");
        assert!((a21 - 1.0 / (4f64 / 3.0).log2()).abs() < 1e-12);
        let a31 = alpha_weak_bound(3, 1).unwrap();
        assert!((a31 - 5.1908930696844315).abs() < 1e-12, "{a31}");
        assert!((a31 - 1.0 / (8f64 / 7.0).log2()).abs() < 1e-12);
        assert_eq!(alpha_weak_bound(2, 4).unwrap(), 0.0);
        assert_eq!(alpha_weak_bound(3, 8).unwrap(), 0.0);
    }

    #[test]
    fn weak_dim_bound_values() {
        assert!((weak_dim_bound(2, 1, 2, 1) - 3f64.log2() - 0.0).abs() < 1e-12);
        assert_eq!(weak_dim_bound(10, 0, 2, 1), 10.0);
        assert_eq!(weak_dim_bound(4, 3, 2, 4), f64::NEG_INFINITY);
    }

    #[test]
    fn single_edge_expectation_is_alpha_n() {
        for (n, alpha) in [(50usize, 0.5f64), (100, 1.0), (1000, 2.3)] {
            let p = alpha * n as f64 / crate::hypergraph::binomial(n, 2) as f64;
            let q = CountingQuery {
                n,
                p,
                descriptor: SubgraphDescriptor::Explicit {
                    vertices: 2,
                    edges: 1,
                    automorphisms: 2.0,
                },
            };
            let expect = expected_subgraph_count(&q).unwrap();
            // ln_gamma carries ~1e-12 relative error in the log at n ~ 1e3
            assert!(
                (expect - alpha * n as f64).abs() / (alpha * n as f64) < 1e-9,
                "n={n} alpha={alpha}: {expect}"
            );
        }
    }

    #[test]
    fn triangle_expectation_brute_force() {
        // all 2^10 graphs on 5 nodes at p = 0.5: expected triangles = C(5,3) p^3
        let q = CountingQuery {
            n: 5,
            p: 0.5,
            descriptor: SubgraphDescriptor::Explicit {
                vertices: 3,
                edges: 3,
                automorphisms: 6.0,
            },
        };
        let expect = expected_subgraph_count(&q).unwrap();
        assert!((expect - 1.25).abs() < 1e-12, "{expect}");
        // independent check by enumeration over all graphs on 5 vertices
        let pairs: Vec<(usize, usize)> = (0..5)
            .flat_map(|i| ((i + 1)..5).map(move |j| (i, j)))
            .collect();
        let mut total = 0u64;
        for mask in 0u32..(1 << 10) {
            let has = |i: usize, j: usize| {
                let idx = pairs.iter().position(|&p| p == (i.min(j), i.max(j))).unwrap();
                (mask >> idx) & 1 == 1
            };
            for a in 0..5 {
                for b in (a + 1)..5 {
                    for c in (b + 1)..5 {
                        if has(a, b) && has(b, c) && has(a, c) {
                            total += 1;
                        }
                    }
                }
            }
        }
        let brute = total as f64 / (1 << 10) as f64;
        assert!((brute - expect).abs() < 1e-12, "brute {brute} vs {expect}");
    }

    #[test]
    fn kfold_descriptor_matches_closed_form() {
        // Eq. for K disjoint eights: N! p^{K(L+1)} / ((N-KL)! K! 2^K)
        for (n, p, copies, loop_len) in [
            (100usize, 0.02f64, 2usize, 6usize),
            (1000, 0.001, 3, 8),
            (50, 0.1, 1, 6),
        ] {
            let q = CountingQuery {
                n,
                p,
                descriptor: SubgraphDescriptor::FigureEights {
                    copies,
                    loop_len,
                    chord_dist: loop_len / 2 - 1,
                },
            };
            let via_eq9 = expected_subgraph_count_ln(&q).unwrap();
            let direct = ln_gamma(n as f64 + 1.0)
                - ln_gamma((n - copies * loop_len) as f64 + 1.0)
                - ln_gamma(copies as f64 + 1.0)
                - copies as f64 * 2f64.ln()
                + (copies * (loop_len + 1)) as f64 * p.ln();
            assert!(
                (via_eq9 - direct).abs() < 1e-12,
                "{via_eq9} vs {direct}"
            );
        }
    }

    #[test]
    fn entropy_example_values() {
        // leading term vanishes at alpha = 1/2 (log 2α = 0)
        let s = figure_eight_entropy(1_000_000, 0.5, 10, 100).unwrap();
        assert!(s < 0.0, "K-term should dominate negatively: {s}");
        // positive regime
        let s = figure_eight_entropy(1_000_000, 0.75, 1000, 100).unwrap();
        assert!((s - 1.05e4).abs() < 0.1e4, "S = {s}");
        // growth with n at fixed alpha > 1/2, K ~ n^(1-eps) with KL inside
        // the n/10 guard at representable sizes
        let mut prev = f64::NEG_INFINITY;
        for n in [10_000_000usize, 100_000_000, 1_000_000_000] {
            let copies = (n as f64).powf(0.8) as usize;
            let loop_len = (n as f64).powf(0.05).round() as usize;
            let s = figure_eight_entropy(n, 0.75, copies, loop_len).unwrap();
            assert!(s > prev, "entropy should grow with n (n={n}: {s} <= {prev})");
            prev = s;
        }
        assert!(figure_eight_entropy(100, 0.0, 1, 6).is_err());
        assert!(figure_eight_entropy(100, 0.5, 10, 6).is_err(), "KL > n/10");
    }

    #[test]
    fn most_frustrated_single_edge() {
        let g = graph(2, &[&[0, 1]]);
        let rep = most_frustrated_classical(&g, 100_000_000).unwrap();
        assert_eq!(rep.min_satisfying, 3);
    }

    #[test]
    fn most_frustrated_figure_eight_positive() {
        // cycle + chord is theta-type: classically satisfiable under every
        // clause choice, so the minimum stays positive
        let g = graph(4, &[&[0, 1], &[0, 2], &[0, 3], &[1, 2], &[2, 3]]);
        let rep = most_frustrated_classical(&g, 100_000_000).unwrap();
        assert!(rep.min_satisfying > 0, "theta graphs stay satisfiable");
    }

    #[test]
    fn most_frustrated_cap() {
        let g = sample_hypergraph(30, 2, 1.0, SampleMode::FixedM, 3).unwrap();
        assert!(matches!(
            most_frustrated_classical(&g, 100_000_000),
            Err(Error::CapExceeded(_))
        ));
    }

    #[test]
    fn certificate_bowtie() {
        // two triangles sharing vertex 2: excess 2, dumbbell type
        let g = graph(5, &[&[0, 1], &[0, 2], &[1, 2], &[2, 3], &[2, 4], &[3, 4]]);
        let cert = unsat_certificate_k2(&g).unwrap();
        assert_eq!(cert.kind, CertificateKind::Dumbbell);
        assert_eq!(cert.verified, Some(true));
        // cross-check against the exhaustive minimum
        let rep = most_frustrated_classical(&g, 100_000_000).unwrap();
        assert_eq!(rep.min_satisfying, 0);
    }

    #[test]
    fn certificate_dumbbell_with_bridge() {
        let g = graph(
            7,
            &[
                &[0, 1], &[0, 2], &[1, 2], // triangle
                &[2, 3], // bridge
                &[3, 4], &[4, 5], &[3, 5], // second triangle
            ],
        );
        let cert = unsat_certificate_k2(&g).unwrap();
        assert_eq!(cert.verified, Some(true));
    }

    #[test]
    fn certificate_k4_two_ears() {
        let g = graph(4, &[&[0, 1], &[0, 2], &[0, 3], &[1, 2], &[1, 3], &[2, 3]]);
        let cert = unsat_certificate_k2(&g).unwrap();
        assert_eq!(cert.verified, Some(true));
    }

    #[test]
    fn certificate_figure_eight_provably_none() {
        let g = graph(4, &[&[0, 1], &[0, 2], &[0, 3], &[1, 2], &[2, 3]]);
        assert!(matches!(
            unsat_certificate_k2(&g),
            Err(Error::NoCertificate(_))
        ));
        // exhaustive confirmation: every clause assignment on the figure
        // eight leaves at least one satisfying assignment
        let rep = most_frustrated_classical(&g, 100_000_000).unwrap();
        assert!(rep.min_satisfying > 0);
    }

    #[test]
    fn certificate_theta_provably_none() {
        // vertices 0,1 joined by paths (0-1), (0-2-1), (0-3-1)
        let g = graph(4, &[&[0, 1], &[0, 2], &[1, 2], &[0, 3], &[1, 3]]);
        assert!(matches!(
            unsat_certificate_k2(&g),
            Err(Error::NoCertificate(_))
        ));
        let rep = most_frustrated_classical(&g, 100_000_000).unwrap();
        assert!(rep.min_satisfying > 0);
    }

    #[test]
    fn certificate_single_loop_insufficient() {
        let g = graph(4, &[&[0, 1], &[1, 2], &[2, 3], &[0, 3]]);
        assert!(matches!(
            unsat_certificate_k2(&g),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn certificate_theta4_two_ears() {
        // 4 internally disjoint paths joining 0 and 1: excess 3, no two
        // edge-disjoint cycles, but a cycle with two ears exists
        let g = graph(
            5,
            &[&[0, 1], &[0, 2], &[1, 2], &[0, 3], &[1, 3], &[0, 4], &[1, 4]],
        );
        let cert = unsat_certificate_k2(&g).unwrap();
        assert_eq!(cert.verified, Some(true));
    }
}
