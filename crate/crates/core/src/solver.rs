//! Exact kernel dimensions, ground-state energies and state verification.
//!
//! The kernel solver adds projectors one at a time and intersects an
//! orthonormal kernel basis with each projector's null condition: the
//! constraint matrix of partial inner products of frame vectors against
//! basis vectors is formed and its numerical null space extracted by SVD.
//! The basis is held in tensor-factored form (one dense orthonormal block
//! per connected group of already-constrained qubits, untouched qubits
//! implicit), which is exactly equivalent to one global 2^N x D basis but
//! keeps memory proportional to the entangled blocks actually present.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::instance::{ProductState, QsatInstance, QuantumState};
use crate::rng::{rng_from_seed, sub_seed};

/// Options for the kernel solver.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Largest instance size accepted.
    pub qubit_cap: usize,
    /// Relative zero threshold: singular values below
    /// tol_factor * sigma_max * eps * max(rows, cols) count as zero.
    pub tol_factor: f64,
    /// Memory guard: largest number of complex entries permitted in any
    /// intermediate basis or constraint matrix.
    pub max_entries: usize,
    /// Materialize the global orthonormal kernel basis in the report.
    pub with_basis: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            qubit_cap: 16,
            tol_factor: 100.0,
            max_entries: 1 << 26,
            with_basis: false,
        }
    }
}

/// Steps whose kept/dropped singular-value gap falls below this ratio are
/// flagged as ill-conditioned.
pub const MARGIN_FLAG: f64 = 10.0;

/// Result of a kernel-dimension solve.
#[derive(Debug, Clone, Serialize)]
pub struct KernelReport {
    /// Final kernel dimension D = dim ker(H).
    pub dim: u64,
    /// D_0..D_M as projectors were added; D_0 = 2^N.
    pub trajectory: Vec<u64>,
    /// Relative threshold factor used.
    pub tol_factor: f64,
    /// min over steps of (smallest kept sigma / largest dropped sigma);
    /// None when no step had both kept and dropped values.
    pub margin: Option<f64>,
    /// Steps with margin below [`MARGIN_FLAG`].
    pub flagged_steps: Vec<usize>,
    /// Orthonormal kernel basis, if requested and affordable.
    #[serde(serialize_with = "serialize_basis")]
    pub basis: Option<Vec<QuantumState>>,
}

fn serialize_basis<S: Serializer>(
    basis: &Option<Vec<QuantumState>>,
    ser: S,
) -> std::result::Result<S::Ok, S::Error> {
    match basis {
        None => ser.serialize_none(),
        Some(states) => {
            let mut seq = ser.serialize_seq(Some(states.len()))?;
            for s in states {
                let pairs: Vec<[f64; 2]> = s.amps.iter().map(|c| [c.re, c.im]).collect();
                seq.serialize_element(&pairs)?;
            }
            seq.end()
        }
    }
}

impl KernelReport {
    pub fn is_sat(&self) -> bool {
        self.dim > 0
    }
}

/// One tensor factor of the kernel basis: an orthonormal `2^q x d` block
/// over a set of qubits. Row bit `t` is qubit `qubits[t]`.
struct Group {
    qubits: Vec<usize>,
    basis: DMatrix<C64>,
}

impl Group {
    fn fresh(qubit: usize) -> Self {
        Group {
            qubits: vec![qubit],
            basis: DMatrix::identity(2, 2),
        }
    }

    fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

fn merge2(a: Group, b: Group, max_entries: usize) -> Result<Group> {
    let mut qubits: Vec<usize> = a.qubits.iter().chain(b.qubits.iter()).copied().collect();
    qubits.sort_unstable();
    let nq = qubits.len();
    let rows = 1usize << nq;
    let cols = a.dim() * b.dim();
    if rows.saturating_mul(cols) > max_entries {
        return Err(Error::CapExceeded(format!(
            "kernel basis block of {rows} x {cols} complex entries exceeds the working-set cap"
        )));
    }
    // local position of each merged bit inside a resp. b
    let pos_a: Vec<Option<usize>> = qubits
        .iter()
        .map(|q| a.qubits.iter().position(|x| x == q))
        .collect();
    let pos_b: Vec<Option<usize>> = qubits
        .iter()
        .map(|q| b.qubits.iter().position(|x| x == q))
        .collect();
    let mut basis = DMatrix::<C64>::zeros(rows, cols);
    for x in 0..rows {
        let mut xa = 0usize;
        let mut xb = 0usize;
        for p in 0..nq {
            let bit = (x >> p) & 1;
            if let Some(la) = pos_a[p] {
                xa |= bit << la;
            } else if let Some(lb) = pos_b[p] {
                xb |= bit << lb;
            }
        }
        for ia in 0..a.dim() {
            let va = a.basis[(xa, ia)];
            if va == C64::new(0.0, 0.0) {
                continue;
            }
            for ib in 0..b.dim() {
                basis[(x, ia * b.dim() + ib)] = va * b.basis[(xb, ib)];
            }
        }
    }
    Ok(Group { qubits, basis })
}

struct NullSpaceResult {
    null_basis: DMatrix<C64>,
    /// (smallest kept, largest dropped) when both sides exist.
    margin: Option<f64>,
}

/// Numerical null space of `c` by SVD with the relative threshold
/// tol_factor * sigma_max * eps * max(rows, cols). Matrices with fewer rows
/// than columns are zero-padded to square so the full right singular basis
/// is available.
fn null_space(c: &DMatrix<C64>, tol_factor: f64) -> NullSpaceResult {
    let (rows, cols) = c.shape();
    let work = if rows < cols {
        let mut padded = DMatrix::<C64>::zeros(cols, cols);
        padded.view_mut((0, 0), (rows, cols)).copy_from(c);
        padded
    } else {
        c.clone()
    };
    let svd = work.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let sigma = svd.singular_values;
    let sigma_max = sigma.iter().cloned().fold(0.0f64, f64::max);
    let threshold = tol_factor * sigma_max * f64::EPSILON * rows.max(cols) as f64;
    let mut null_rows: Vec<usize> = Vec::new();
    let mut min_kept = f64::INFINITY;
    let mut max_dropped = 0.0f64;
    for (i, &s) in sigma.iter().enumerate() {
        if s <= threshold {
            null_rows.push(i);
            max_dropped = max_dropped.max(s);
        } else {
            min_kept = min_kept.min(s);
        }
    }
    // rows of v_t beyond the singular value list (cols > list length cannot
    // happen after padding, but guard anyway)
    for i in sigma.len()..v_t.nrows() {
        null_rows.push(i);
    }
    let mut null_basis = DMatrix::<C64>::zeros(cols, null_rows.len());
    for (j, &i) in null_rows.iter().enumerate() {
        for cidx in 0..cols {
            null_basis[(cidx, j)] = v_t[(i, cidx)].conj();
        }
    }
    let margin = if min_kept.is_finite() && max_dropped > 0.0 {
        Some(min_kept / max_dropped)
    } else {
        None
    };
    NullSpaceResult { null_basis, margin }
}

/// Exact kernel dimension with projectors added in edge order.
pub fn kernel_dimension(inst: &QsatInstance, opts: &SolverOptions) -> Result<KernelReport> {
    let order: Vec<usize> = (0..inst.m()).collect();
    kernel_dimension_with_order(inst, &order, opts)
}

/// Exact kernel dimension with an explicit projector insertion order. The
/// order affects the trajectory (and solve cost) but not D.
pub fn kernel_dimension_with_order(
    inst: &QsatInstance,
    order: &[usize],
    opts: &SolverOptions,
) -> Result<KernelReport> {
    let n = inst.n();
    if n > opts.qubit_cap {
        return Err(Error::CapExceeded(format!(
            "instance has {n} qubits, kernel cap is {}",
            opts.qubit_cap
        )));
    }
    if order.len() != inst.m() {
        return Err(Error::InvalidArgument(format!(
            "order lists {} projectors, instance has {}",
            order.len(),
            inst.m()
        )));
    }
    let k = inst.k();
    let mut groups: Vec<Option<Group>> = Vec::new();
    let mut group_of: Vec<Option<usize>> = vec![None; n];
    let mut trajectory: Vec<u64> = Vec::with_capacity(inst.m() + 1);
    trajectory.push(1u64 << n);
    let mut margin: Option<f64> = None;
    let mut flagged_steps = Vec::new();
    let mut dead = false;

    for (step, &m) in order.iter().enumerate() {
        if dead {
            trajectory.push(0);
            continue;
        }
        let edge = &inst.graph.edges[m];
        let frame = &inst.frames[m];

        // gather groups touching this edge, plus fresh singletons
        let mut parts: Vec<Group> = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for &q in edge {
            match group_of[q] {
                Some(gid) => {
                    if seen.insert(gid) {
                        parts.push(groups[gid].take().expect("live group"));
                    }
                }
                None => parts.push(Group::fresh(q)),
            }
        }
        let mut iter = parts.into_iter();
        let mut merged = iter.next().expect("edge has qubits");
        for part in iter {
            merged = merge2(merged, part, opts.max_entries)?;
        }

        // constraint matrix: rows (alpha, complement index), cols basis dim
        let ng = merged.qubits.len();
        let d = merged.dim();
        let edge_pos: Vec<usize> = edge
            .iter()
            .map(|q| merged.qubits.iter().position(|x| x == q).unwrap())
            .collect();
        let comp_pos: Vec<usize> = (0..ng).filter(|p| !edge_pos.contains(p)).collect();
        let rows = frame.rank() << (ng - k);
        if rows.saturating_mul(d) > opts.max_entries {
            return Err(Error::CapExceeded(format!(
                "constraint matrix of {rows} x {d} complex entries exceeds the working-set cap"
            )));
        }
        let mut c = DMatrix::<C64>::zeros(rows, d);
        let comp_count = 1usize << (ng - k);
        // precompute local row index for (b, cidx)
        let mut local_of_b = vec![0usize; 1 << k];
        for (b, item) in local_of_b.iter_mut().enumerate() {
            let mut x = 0usize;
            for (t, &p) in edge_pos.iter().enumerate() {
                x |= ((b >> (k - 1 - t)) & 1) << p;
            }
            *item = x;
        }
        for (alpha, phi) in frame.vectors.iter().enumerate() {
            for cidx in 0..comp_count {
                let mut base = 0usize;
                for (i, &p) in comp_pos.iter().enumerate() {
                    base |= ((cidx >> i) & 1) << p;
                }
                let row = alpha * comp_count + cidx;
                for dcol in 0..d {
                    let mut acc = C64::new(0.0, 0.0);
                    for (b, &loc) in local_of_b.iter().enumerate() {
                        acc += phi[b].conj() * merged.basis[(base | loc, dcol)];
                    }
                    c[(row, dcol)] = acc;
                }
            }
        }

        let ns = null_space(&c, opts.tol_factor);
        if let Some(mg) = ns.margin {
            margin = Some(margin.map_or(mg, |cur| cur.min(mg)));
            if mg < MARGIN_FLAG {
                flagged_steps.push(step);
            }
        }
        merged.basis = &merged.basis * &ns.null_basis;

        // register merged group
        let gid = groups.len();
        for &q in &merged.qubits {
            group_of[q] = Some(gid);
        }
        let d_new = merged.dim();
        groups.push(Some(merged));

        if d_new == 0 {
            dead = true;
            trajectory.push(0);
            continue;
        }
        let free = group_of.iter().filter(|g| g.is_none()).count();
        let mut total: u128 = 1u128 << free;
        for g in groups.iter().flatten() {
            total *= g.dim() as u128;
        }
        trajectory.push(total as u64);
    }

    let dim = *trajectory.last().unwrap();
    let basis = if opts.with_basis && !dead {
        Some(materialize_basis(n, groups, &group_of, opts.max_entries)?)
    } else if opts.with_basis {
        Some(Vec::new())
    } else {
        None
    };

    Ok(KernelReport {
        dim,
        trajectory,
        tol_factor: opts.tol_factor,
        margin,
        flagged_steps,
        basis,
    })
}

fn materialize_basis(
    n: usize,
    groups: Vec<Option<Group>>,
    group_of: &[Option<usize>],
    max_entries: usize,
) -> Result<Vec<QuantumState>> {
    let mut all: Vec<Group> = groups.into_iter().flatten().collect();
    for (q, g) in group_of.iter().enumerate() {
        if g.is_none() {
            all.push(Group::fresh(q));
        }
    }
    let full = all
        .into_iter()
        .try_fold(None::<Group>, |acc, g| -> Result<Option<Group>> {
            Ok(Some(match acc {
                None => g,
                Some(a) => merge2(a, g, max_entries)?,
            }))
        })?;
    let full = match full {
        Some(g) => g,
        None => {
            // zero-qubit instance cannot occur (n >= k >= 2)
            return Ok(Vec::new());
        }
    };
    debug_assert_eq!(full.qubits, (0..n).collect::<Vec<_>>());
    let mut out = Vec::with_capacity(full.dim());
    for j in 0..full.dim() {
        let mut s = QuantumState::zero(n);
        for x in 0..(1usize << n) {
            s.amps[x] = full.basis[(x, j)];
        }
        out.push(s);
    }
    Ok(out)
}

/// Per-step verdicts of the weak UNSAT bound on a solve trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct WeakBoundCheck {
    /// Steps where D_{m+1} > D_m (1 - r/2^k) + 0.5.
    pub step_violations: Vec<usize>,
    /// Whether log2 D_M <= N + M log2(1 - r/2^k) failed.
    pub final_violation: bool,
    pub final_log2_dim: f64,
    pub final_log2_bound: f64,
}

impl WeakBoundCheck {
    pub fn pass(&self) -> bool {
        self.step_violations.is_empty() && !self.final_violation
    }
}

/// Check the trajectory against the stepwise factor and the final bound
/// D_M <= 2^N (1 - r/2^k)^M. Violations are returned, not asserted: they are
/// expected to be absent for Haar projectors but possible for non-generic
/// (e.g. classical diagonal) ones.
pub fn check_weak_bound(report: &KernelReport, n: usize, k: usize, r: usize) -> WeakBoundCheck {
    let factor = 1.0 - r as f64 / (1usize << k) as f64;
    let mut step_violations = Vec::new();
    for m in 0..report.trajectory.len() - 1 {
        let bound = report.trajectory[m] as f64 * factor + 0.5;
        if report.trajectory[m + 1] as f64 > bound {
            step_violations.push(m);
        }
    }
    let m_total = report.trajectory.len() - 1;
    let dim = *report.trajectory.last().unwrap();
    let final_log2_dim = if dim == 0 { f64::NEG_INFINITY } else { (dim as f64).log2() };
    let final_log2_bound = if factor == 0.0 && m_total > 0 {
        f64::NEG_INFINITY
    } else {
        n as f64 + m_total as f64 * factor.log2()
    };
    let final_violation = if dim == 0 {
        false
    } else {
        final_log2_dim > final_log2_bound + 1e-9
    };
    WeakBoundCheck {
        step_violations,
        final_violation,
        final_log2_dim,
        final_log2_bound,
    }
}

/// Result of an iterative ground-state-energy solve.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    /// Smallest eigenvalue estimate of H.
    pub e0: f64,
    /// ||H x - e0 x|| for the returned Ritz vector.
    pub residual: f64,
    /// Matrix-vector products consumed.
    pub iterations: usize,
    pub converged: bool,
}

/// Default qubit cap for the energy-only path (matrix-free, so looser than
/// the kernel cap).
pub const ENERGY_QUBIT_CAP: usize = 20;

/// Smallest eigenvalue of H by restarted Lanczos with full
/// reorthogonalization on the spectrally
/// flipped operator A = M*I - H (H is PSD with ||H|| <= M).
pub fn ground_state_energy(inst: &QsatInstance, tol: f64, max_iter: usize) -> Result<EnergyReport> {
    ground_state_energy_capped(inst, tol, max_iter, ENERGY_QUBIT_CAP)
}

pub fn ground_state_energy_capped(
    inst: &QsatInstance,
    tol: f64,
    max_iter: usize,
    qubit_cap: usize,
) -> Result<EnergyReport> {
    let n = inst.n();
    if n > qubit_cap {
        return Err(Error::CapExceeded(format!(
            "instance has {n} qubits, energy cap is {qubit_cap}"
        )));
    }
    if inst.m() == 0 {
        return Ok(EnergyReport {
            e0: 0.0,
            residual: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    let dim = 1usize << n;
    let shift = inst.m() as f64;
    let mut rng = rng_from_seed(sub_seed(inst.seed, 0x454e_4552));
    let mut v = QuantumState::random(n, &mut rng);
    let max_subspace = 64.min(dim);
    let mut iterations = 0usize;
    let mut best_theta = 0.0f64;
    let mut best_vec = v.clone();

    'restart: loop {
        let mut basis: Vec<DVector<C64>> = Vec::with_capacity(max_subspace);
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let nrm = v.norm();
        if nrm < 1e-300 {
            v = QuantumState::random(n, &mut rng);
        }
        let mut cur = DVector::from_vec(v.amps.clone());
        cur /= C64::new(cur.norm(), 0.0);
        basis.push(cur.clone());

        for j in 0..max_subspace {
            // w = A v_j = shift v_j - H v_j
            let state = QuantumState {
                n,
                amps: basis[j].iter().copied().collect(),
            };
            let h_state = inst.apply_h(&state)?;
            iterations += 1;
            let mut w = DVector::from_vec(h_state.amps);
            w = basis[j].map(|x| x * C64::new(shift, 0.0)) - w;
            let alpha = basis[j].dotc(&w).re;
            alphas.push(alpha);
            w -= basis[j].map(|x| x * C64::new(alpha, 0.0));
            if j > 0 {
                let beta_prev = betas[j - 1];
                w -= basis[j - 1].map(|x| x * C64::new(beta_prev, 0.0));
            }
            // full reorthogonalization, twice
            for _ in 0..2 {
                for b in &basis {
                    let ip = b.dotc(&w);
                    w -= b.map(|x| x * ip);
                }
            }
            let beta = w.norm();

            // Ritz extraction from the tridiagonal
            let t_dim = alphas.len();
            let mut t = DMatrix::<f64>::zeros(t_dim, t_dim);
            for i in 0..t_dim {
                t[(i, i)] = alphas[i];
                if i + 1 < t_dim {
                    t[(i, i + 1)] = betas[i];
                    t[(i + 1, i)] = betas[i];
                }
            }
            let eig = t.symmetric_eigen();
            let (top_idx, &theta) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap();
            let s_last = eig.eigenvectors[(t_dim - 1, top_idx)];
            let resid_est = beta * s_last.abs();

            let exhausted = beta < 1e-13 || t_dim == dim;
            if resid_est <= tol * 0.5 || exhausted || iterations >= max_iter {
                // assemble the Ritz vector
                let mut x = DVector::<C64>::zeros(dim);
                for (i, b) in basis.iter().enumerate() {
                    let coeff = eig.eigenvectors[(i, top_idx)];
                    x += b.map(|y| y * C64::new(coeff, 0.0));
                }
                x /= C64::new(x.norm(), 0.0);
                let xs = QuantumState {
                    n,
                    amps: x.iter().copied().collect(),
                };
                let hx = inst.apply_h(&xs)?;
                iterations += 1;
                let e0 = shift - theta;
                let mut resid_vec = DVector::from_vec(hx.amps);
                resid_vec -= x.map(|y| y * C64::new(e0, 0.0));
                let residual = resid_vec.norm();
                best_theta = theta;
                best_vec = xs;
                if residual <= tol || exhausted {
                    return Ok(EnergyReport {
                        e0,
                        residual,
                        iterations,
                        converged: residual <= tol,
                    });
                }
                if iterations >= max_iter {
                    return Ok(EnergyReport {
                        e0,
                        residual,
                        iterations,
                        converged: false,
                    });
                }
                // restart from the Ritz vector
                v = best_vec.clone();
                continue 'restart;
            }
            betas.push(beta);
            basis.push(w / C64::new(beta, 0.0));
        }
        // subspace exhausted without triggering the convergence branch:
        // restart from the best Ritz vector of the last tridiagonal
        let _ = best_theta;
        v = best_vec.clone();
    }
}

/// Residual energy <ψ|H|ψ> / <ψ|ψ> of a dense state.
pub fn verify_state(inst: &QsatInstance, state: &QuantumState) -> Result<f64> {
    let norm2 = state.amps.iter().map(|a| a.norm_sqr()).sum::<f64>();
    if norm2 < 1e-300 {
        return Err(Error::ZeroNorm);
    }
    let h_psi = inst.apply_h(state)?;
    Ok(state.inner(&h_psi).re / norm2)
}

/// Residual energy of a product state, evaluated edge by edge without
/// materializing 2^N amplitudes.
pub fn verify_product_state(inst: &QsatInstance, state: &ProductState) -> Result<f64> {
    if state.n() != inst.n() {
        return Err(Error::Dimension(format!(
            "product state on {} qubits, instance on {}",
            state.n(),
            inst.n()
        )));
    }
    let k = inst.k();
    let dim_k = 1usize << k;
    let norms2: Vec<f64> = state
        .factors
        .iter()
        .map(|f| f[0].norm_sqr() + f[1].norm_sqr())
        .collect();
    if norms2.iter().any(|&x| x < 1e-300) {
        return Err(Error::ZeroNorm);
    }
    let mut energy = 0.0f64;
    let mut sub = vec![C64::new(0.0, 0.0); dim_k];
    for frame in &inst.frames {
        let edge = &inst.graph.edges[frame.edge_index];
        for (b, s) in sub.iter_mut().enumerate() {
            let mut amp = C64::new(1.0, 0.0);
            for (t, &q) in edge.iter().enumerate() {
                amp *= state.factors[q][(b >> (k - 1 - t)) & 1];
            }
            *s = amp;
        }
        let edge_norm2: f64 = edge.iter().map(|&q| norms2[q]).product();
        for phi in &frame.vectors {
            let ip: C64 = phi.iter().zip(&sub).map(|(p, s)| p.conj() * s).sum();
            energy += ip.norm_sqr() / edge_norm2;
        }
    }
    Ok(energy)
}
