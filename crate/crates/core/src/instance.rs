//! QSAT instances: projector frames attached to hyperedges, matrix-free
//! application of H = Σ_m Π_m, and instance (de)serialization.
//!
//! Bit conventions used everywhere:
//! - a full state index `x` assigns qubit `q` the bit `(x >> q) & 1`;
//! - a frame vector over edge tuple (q_0 < ... < q_{k-1}) is indexed by
//!   `b` with tuple position `t` carrying bit `(b >> (k-1-t)) & 1`, so the
//!   first qubit of the tuple is the leftmost ket symbol.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::{json_to_parse_error, Hypergraph};
use crate::rng::{rng_from_seed, sub_seed};

/// Orthonormality tolerance for projector frames.
pub const FRAME_ORTHO_TOL: f64 = 1e-12;
/// Gaussian draws with norm below this are re-drawn.
pub const DEGENERATE_DRAW_TOL: f64 = 1e-8;

/// An orthonormal r-frame of complex 2^k-vectors spanning the penalized
/// subspace of one hyperedge.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorFrame {
    pub edge_index: usize,
    pub vectors: Vec<Vec<C64>>,
}

impl ProjectorFrame {
    pub fn rank(&self) -> usize {
        self.vectors.len()
    }

    /// Max |<phi_a|phi_b> - delta_ab| over all pairs.
    pub fn orthonormality_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, va) in self.vectors.iter().enumerate() {
            for (b, vb) in self.vectors.iter().enumerate().skip(a) {
                let ip: C64 = va.iter().zip(vb).map(|(x, y)| x.conj() * y).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).norm());
            }
        }
        worst
    }
}

/// A hypergraph plus one rank-r projector frame per edge; defines
/// H = Σ_m Π_m with Π_m = Σ_α |φ_m^α><φ_m^α|.
#[derive(Debug, Clone, PartialEq)]
pub struct QsatInstance {
    pub graph: Hypergraph,
    pub r: usize,
    pub seed: u64,
    pub frames: Vec<ProjectorFrame>,
}

/// Dense 2^n amplitude vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub n: usize,
    pub amps: Vec<C64>,
}

impl QuantumState {
    pub fn zero(n: usize) -> Self {
        QuantumState {
            n,
            amps: vec![C64::new(0.0, 0.0); 1usize << n],
        }
    }

    pub fn basis(n: usize, index: usize) -> Self {
        let mut s = Self::zero(n);
        s.amps[index] = C64::new(1.0, 0.0);
        s
    }

    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Self {
        let mut s = Self::zero(n);
        for a in s.amps.iter_mut() {
            *a = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
        let nrm = s.norm();
        for a in s.amps.iter_mut() {
            *a /= nrm;
        }
        s
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &QuantumState) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// Per-qubit 2-vectors |ψ_j>, kept unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductState {
    pub factors: Vec<[C64; 2]>,
}

impl ProductState {
    /// All qubits in |0>.
    pub fn all_zero(n: usize) -> Self {
        ProductState {
            factors: vec![[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]; n],
        }
    }

    pub fn n(&self) -> usize {
        self.factors.len()
    }

    /// Expand to the full 2^n amplitude vector (test/desk scale only).
    pub fn to_dense(&self) -> QuantumState {
        let n = self.factors.len();
        let mut s = QuantumState::zero(n);
        for x in 0..(1usize << n) {
            let mut amp = C64::new(1.0, 0.0);
            for (q, f) in self.factors.iter().enumerate() {
                amp *= f[(x >> q) & 1];
            }
            s.amps[x] = amp;
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let pairs: Vec<Vec<[f64; 2]>> = self
            .factors
            .iter()
            .map(|f| f.iter().map(|c| [c.re, c.im]).collect())
            .collect();
        let mut file = std::fs::File::create(path)?;
        let text = serde_json::to_string(&pairs).map_err(json_to_parse_error)?;
        file.write_all(text.as_bytes())?;
        file.write_all(b"\n")?;
        Ok(())
    }
}

/// Draw one Haar-distributed orthonormal r-frame in C^(2^k): complex
/// Gaussian vectors, Gram-Schmidt, re-draw on numerical rank deficiency.
pub fn sample_frame<R: Rng>(k: usize, r: usize, rng: &mut R) -> Result<Vec<Vec<C64>>> {
    let dim = 1usize << k;
    if r == 0 || r > dim {
        return Err(Error::Rank { r, k, dim });
    }
    let mut vectors: Vec<Vec<C64>> = Vec::with_capacity(r);
    while vectors.len() < r {
        let mut v: Vec<C64> = (0..dim)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let raw_norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if raw_norm < DEGENERATE_DRAW_TOL {
            log::warn!("degenerate Gaussian draw (norm {raw_norm:.3e}); re-drawing");
            continue;
        }
        // twice-iterated Gram-Schmidt against accepted vectors
        for _ in 0..2 {
            for u in &vectors {
                let ip: C64 = u.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= ip * ui;
                }
            }
        }
        let res_norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if res_norm < DEGENERATE_DRAW_TOL * raw_norm {
            log::warn!("rank-deficient Gaussian draw (residual {res_norm:.3e}); re-drawing");
            continue;
        }
        for a in v.iter_mut() {
            *a /= res_norm;
        }
        vectors.push(v);
    }
    Ok(vectors)
}

/// Attach one independent Haar frame per edge. Deterministic in (g, r, seed):
/// edge m draws from the ChaCha stream keyed by `sub_seed(seed, m)`.
pub fn build_instance(g: &Hypergraph, r: usize, seed: u64) -> Result<QsatInstance> {
    let dim = 1usize << g.k;
    if r == 0 || r > dim {
        return Err(Error::Rank { r, k: g.k, dim });
    }
    let frames: Vec<ProjectorFrame> = (0..g.m())
        .map(|m| {
            let mut rng = rng_from_seed(sub_seed(seed, m as u64));
            Ok(ProjectorFrame {
                edge_index: m,
                vectors: sample_frame(g.k, r, &mut rng)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(QsatInstance {
        graph: g.clone(),
        r,
        seed,
        frames,
    })
}

/// Classical k-SAT instance as diagonal QSAT: each edge penalizes exactly one
/// computational basis string ("01" on edge (i,j) forbids i=0, j=1).
pub fn classical_diagonal_instance(g: &Hypergraph, clauses: &[String]) -> Result<QsatInstance> {
    if clauses.len() != g.m() {
        return Err(Error::Validation {
            context: "clauses".into(),
            message: format!("{} clauses for {} edges", clauses.len(), g.m()),
        });
    }
    let dim = 1usize << g.k;
    let mut frames = Vec::with_capacity(g.m());
    for (m, clause) in clauses.iter().enumerate() {
        let index = parse_clause_bits(clause, g.k)?;
        let mut v = vec![C64::new(0.0, 0.0); dim];
        v[index] = C64::new(1.0, 0.0);
        frames.push(ProjectorFrame {
            edge_index: m,
            vectors: vec![v],
        });
    }
    Ok(QsatInstance {
        graph: g.clone(),
        r: 1,
        seed: g.seed,
        frames,
    })
}

/// "01" -> frame index with tuple position 0 as the leftmost bit.
pub fn parse_clause_bits(clause: &str, k: usize) -> Result<usize> {
    if clause.len() != k || !clause.bytes().all(|b| b == b'0' || b == b'1') {
        return Err(Error::Validation {
            context: "clause".into(),
            message: format!("clause '{clause}' is not a {k}-bit string"),
        });
    }
    Ok(clause
        .bytes()
        .fold(0usize, |acc, b| (acc << 1) | usize::from(b == b'1')))
}

impl QsatInstance {
    pub fn n(&self) -> usize {
        self.graph.n
    }

    pub fn m(&self) -> usize {
        self.graph.m()
    }

    pub fn k(&self) -> usize {
        self.graph.k
    }

    /// Per-edge scatter offsets: for frame index b, the contribution to the
    /// full state index from the edge qubits.
    pub(crate) fn edge_offsets(&self, edge_index: usize) -> Vec<usize> {
        let edge = &self.graph.edges[edge_index];
        let k = self.k();
        (0..(1usize << k))
            .map(|b| {
                let mut x = 0usize;
                for (t, &q) in edge.iter().enumerate() {
                    x |= ((b >> (k - 1 - t)) & 1) << q;
                }
                x
            })
            .collect()
    }

    /// Qubits not on this edge, ascending.
    pub(crate) fn edge_complement(&self, edge_index: usize) -> Vec<usize> {
        let edge = &self.graph.edges[edge_index];
        (0..self.n()).filter(|q| !edge.contains(q)).collect()
    }

    /// Matrix-free H|ψ>.
    pub fn apply_h(&self, state: &QuantumState) -> Result<QuantumState> {
        if state.n != self.n() {
            return Err(Error::Dimension(format!(
                "state on {} qubits applied to instance on {}",
                state.n,
                self.n()
            )));
        }
        let n = self.n();
        let k = self.k();
        let dim_k = 1usize << k;
        let mut out = QuantumState::zero(n);
        let mut sub = vec![C64::new(0.0, 0.0); dim_k];
        for frame in &self.frames {
            let offsets = self.edge_offsets(frame.edge_index);
            let comp = self.edge_complement(frame.edge_index);
            for c in 0..(1usize << (n - k)) {
                let mut base = 0usize;
                for (i, &q) in comp.iter().enumerate() {
                    base |= ((c >> i) & 1) << q;
                }
                for (b, off) in offsets.iter().enumerate() {
                    sub[b] = state.amps[base | off];
                }
                for phi in &frame.vectors {
                    let amp: C64 = phi.iter().zip(&sub).map(|(p, s)| p.conj() * s).sum();
                    if amp != C64::new(0.0, 0.0) {
                        for (b, off) in offsets.iter().enumerate() {
                            out.amps[base | off] += amp * phi[b];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Dense H as a 2^n x 2^n matrix; desk scale (n <= ~12) only. Built by
    /// direct accumulation of projector blocks, independent of `apply_h`.
    pub fn dense_hamiltonian(&self) -> Result<nalgebra::DMatrix<C64>> {
        let n = self.n();
        if n > 14 {
            return Err(Error::CapExceeded(format!(
                "dense Hamiltonian on {n} qubits (> 14) refused"
            )));
        }
        let dim = 1usize << n;
        let k = self.k();
        let dim_k = 1usize << k;
        let mut h = nalgebra::DMatrix::<C64>::zeros(dim, dim);
        for frame in &self.frames {
            let offsets = self.edge_offsets(frame.edge_index);
            let comp = self.edge_complement(frame.edge_index);
            for phi in &frame.vectors {
                for c in 0..(1usize << (n - k)) {
                    let mut base = 0usize;
                    for (i, &q) in comp.iter().enumerate() {
                        base |= ((c >> i) & 1) << q;
                    }
                    for b1 in 0..dim_k {
                        for b2 in 0..dim_k {
                            h[(base | offsets[b1], base | offsets[b2])] +=
                                phi[b1] * phi[b2].conj();
                        }
                    }
                }
            }
        }
        Ok(h)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        let text = self.to_json()?;
        file.write_all(text.as_bytes())?;
        file.write_all(b"\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut text = String::new();
        std::io::BufReader::new(file).read_to_string(&mut text)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = InstanceFile {
            n: self.graph.n,
            k: self.graph.k,
            r: self.r,
            seed: self.seed,
            edges: self.graph.edges.clone(),
            frames: self
                .frames
                .iter()
                .map(|f| {
                    f.vectors
                        .iter()
                        .map(|v| v.iter().map(|c| [c.re, c.im]).collect())
                        .collect()
                })
                .collect(),
        };
        serde_json::to_string(&file).map_err(json_to_parse_error)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text).map_err(json_to_parse_error)?;
        let graph = Hypergraph::new(file.n, file.k, file.seed, file.edges.clone())?;
        if graph.edges != file.edges {
            return Err(Error::Validation {
                context: "instance file".into(),
                message: "edges are not in canonical sorted order".into(),
            });
        }
        if file.frames.len() != graph.m() {
            return Err(Error::Validation {
                context: "instance file".into(),
                message: format!("{} frames for {} edges", file.frames.len(), graph.m()),
            });
        }
        let dim = 1usize << file.k;
        if file.r == 0 || file.r > dim {
            return Err(Error::Rank {
                r: file.r,
                k: file.k,
                dim,
            });
        }
        let mut frames = Vec::with_capacity(file.frames.len());
        for (m, fvecs) in file.frames.iter().enumerate() {
            if fvecs.len() != file.r {
                return Err(Error::Validation {
                    context: format!("frame {m}"),
                    message: format!("{} vectors, expected r = {}", fvecs.len(), file.r),
                });
            }
            let mut vectors = Vec::with_capacity(file.r);
            for v in fvecs {
                if v.len() != dim {
                    return Err(Error::Validation {
                        context: format!("frame {m}"),
                        message: format!("vector length {} != 2^k = {dim}", v.len()),
                    });
                }
                vectors.push(v.iter().map(|p| C64::new(p[0], p[1])).collect());
            }
            let frame = ProjectorFrame {
                edge_index: m,
                vectors,
            };
            let res = frame.orthonormality_residual();
            if res > FRAME_ORTHO_TOL {
                return Err(Error::Validation {
                    context: format!("frame {m}"),
                    message: format!("orthonormality residual {res:.3e} exceeds {FRAME_ORTHO_TOL:.0e}"),
                });
            }
            frames.push(frame);
        }
        Ok(QsatInstance {
            graph,
            r: file.r,
            seed: file.seed,
            frames,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    n: usize,
    k: usize,
    r: usize,
    seed: u64,
    edges: Vec<Vec<usize>>,
    frames: Vec<Vec<Vec<[f64; 2]>>>,
}
