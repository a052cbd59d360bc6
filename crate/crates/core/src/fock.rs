//! Occupation-number bases and second-quantized operator assembly.
//!
//! Bases are enumerated lexicographically with the largest occupation of
//! mode 0 first, so indices are deterministic across runs. All builders are
//! pure; returned values are immutable.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::{C64, Error, Result, CAPACITY_CAP};

pub const HERMITICITY_TOL: f64 = 1e-12;

/// Self-adjoint operator on the d-dimensional one-particle space.
#[derive(Debug, Clone)]
pub struct OneBodyOperator {
    pub dim: usize,
    pub entries: DMatrix<C64>,
}

impl OneBodyOperator {
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        let dim = entries.nrows();
        if entries.ncols() != dim || dim == 0 {
            return Err(Error::DimensionMismatch(format!(
                "one-body operator must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let deviation = hermiticity_deviation(&entries);
        if deviation > HERMITICITY_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self { dim, entries })
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, entries: DMatrix::identity(dim, dim) }
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, entries: DMatrix::zeros(dim, dim) }
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        spectral_norm(&self.entries)
    }
}

pub fn hermiticity_deviation(m: &DMatrix<C64>) -> f64 {
    let mut dev = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with `m ≈ V diag(λ) V†`. Slower than
/// a tridiagonal solver but delivers eigenvectors accurate to roundoff even
/// for clustered spectra, so it doubles as a reference solver and as a
/// fallback when the fast path fails its reconstruction check.
pub fn hermitian_eigen_jacobi(m: &DMatrix<C64>) -> Result<(Vec<f64>, DMatrix<C64>)> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch("hermitian_eigen_jacobi needs a square matrix".into()));
    }
    let dev = hermiticity_deviation(m);
    let scale = m.norm().max(1.0);
    if dev > 1e-12 * scale {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let mut a = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut v = DMatrix::<C64>::identity(n, n);
    let off = |a: &DMatrix<C64>| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += a[(p, q)].norm_sqr();
            }
        }
        s.sqrt()
    };
    let tol = 1e-15 * scale;
    for _sweep in 0..100 {
        if off(&a) <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.norm() <= tol / (n as f64) {
                    continue;
                }
                // phase that makes the 2x2 block real, then a real rotation
                let phase = apq / apq.norm();
                let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * apq.norm());
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = phase * C64::new(t * c, 0.0);
                // columns: [p q] <- [p q] * [[c, s], [-conj(s), c]]
                for r in 0..n {
                    let arp = a[(r, p)];
                    let arq = a[(r, q)];
                    a[(r, p)] = arp * c - arq * s.conj();
                    a[(r, q)] = arp * s + arq * c;
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = vrp * c - vrq * s.conj();
                    v[(r, q)] = vrp * s + vrq * c;
                }
                for r in 0..n {
                    let apr = a[(p, r)];
                    let aqr = a[(q, r)];
                    a[(p, r)] = apr * c - aqr * s;
                    a[(q, r)] = apr * s.conj() + aqr * c;
                }
            }
        }
    }
    if off(&a) > 1e-12 * scale {
        return Err(Error::Contract("Jacobi eigensolver did not converge".into()));
    }
    let eigenvalues = (0..n).map(|i| a[(i, i)].re).collect();
    Ok((eigenvalues, v))
}

/// Two-body interaction coefficients w_{mnpq}, stored flat with index
/// ((m*d + n)*d + p)*d + q.
#[derive(Debug, Clone)]
pub struct TwoBodyTensor {
    pub dim: usize,
    entries: Vec<C64>,
    op_norm: f64,
}

impl TwoBodyTensor {
    /// Two-sided bosonic symmetrization followed by Hermitian averaging.
    ///
    /// The result satisfies all four exchange equalities and the Hermiticity
    /// relation w_{mnpq} = conj(w_{pqmn}); its operator norm never exceeds
    /// the norm of the input (both averages are contractions).
    pub fn symmetrize(dim: usize, raw: &[C64]) -> Result<Self> {
        if raw.len() != dim * dim * dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "two-body tensor for d={dim} needs {} entries, got {}",
                dim * dim * dim * dim,
                raw.len()
            )));
        }
        let idx = |m: usize, n: usize, p: usize, q: usize| ((m * dim + n) * dim + p) * dim + q;
        let mut sym = vec![C64::new(0.0, 0.0); raw.len()];
        for m in 0..dim {
            for n in 0..dim {
                for p in 0..dim {
                    for q in 0..dim {
                        sym[idx(m, n, p, q)] = 0.25
                            * (raw[idx(m, n, p, q)]
                                + raw[idx(n, m, p, q)]
                                + raw[idx(m, n, q, p)]
                                + raw[idx(n, m, q, p)]);
                    }
                }
            }
        }
        let mut herm = vec![C64::new(0.0, 0.0); raw.len()];
        for m in 0..dim {
            for n in 0..dim {
                for p in 0..dim {
                    for q in 0..dim {
                        herm[idx(m, n, p, q)] =
                            0.5 * (sym[idx(m, n, p, q)] + sym[idx(p, q, m, n)].conj());
                    }
                }
            }
        }
        let mut tensor = Self { dim, entries: herm, op_norm: 0.0 };
        tensor.op_norm = spectral_norm(&tensor.reshaped());
        Ok(tensor)
    }

    /// Wraps entries that are already exchange-symmetric and Hermitian.
    pub fn from_symmetric(dim: usize, entries: Vec<C64>) -> Result<Self> {
        let t = Self::symmetrize(dim, &entries)?;
        let max_dev = t
            .entries
            .iter()
            .zip(entries.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        if max_dev > HERMITICITY_TOL {
            return Err(Error::Contract(format!(
                "tensor entries violate exchange/Hermitian symmetry by {max_dev:.3e}"
            )));
        }
        Ok(t)
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, entries: vec![C64::new(0.0, 0.0); dim * dim * dim * dim], op_norm: 0.0 }
    }

    /// w_{mnpq} = c δ_{mp} δ_{nq}: the reshaped d²×d² identity scaled by c.
    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        let mut entries = vec![C64::new(0.0, 0.0); dim * dim * dim * dim];
        for m in 0..dim {
            for n in 0..dim {
                entries[((m * dim + n) * dim + m) * dim + n] = C64::new(c, 0.0);
            }
        }
        Self { dim, entries, op_norm: c.abs() }
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize, p: usize, q: usize) -> C64 {
        self.entries[((m * self.dim + n) * self.dim + p) * self.dim + q]
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    /// Operator norm of the d²×d² reshaping (cached).
    pub fn op_norm(&self) -> f64 {
        self.op_norm
    }

    /// d²×d² matrix with row index (m,n) and column index (p,q).
    pub fn reshaped(&self) -> DMatrix<C64> {
        let d = self.dim;
        DMatrix::from_fn(d * d, d * d, |r, c| self.get(r / d, r % d, c / d, c % d))
    }

    /// Frame change: w'_{mnpq} = Σ conj(V_{am} V_{bn}) w_{abcd} V_{cp} V_{dq}.
    pub fn rotate(&self, v: &DMatrix<C64>) -> Result<Self> {
        if v.nrows() != self.dim || v.ncols() != self.dim {
            return Err(Error::DimensionMismatch("tensor rotation matrix size".into()));
        }
        let d = self.dim;
        let kron = kronecker(v, v);
        let rotated = kron.adjoint() * self.reshaped() * &kron;
        let mut entries = vec![C64::new(0.0, 0.0); d * d * d * d];
        for m in 0..d {
            for n in 0..d {
                for p in 0..d {
                    for q in 0..d {
                        entries[((m * d + n) * d + p) * d + q] = rotated[(m * d + n, p * d + q)];
                    }
                }
            }
        }
        let op_norm = spectral_norm(&rotated);
        Ok(Self { dim: d, entries, op_norm })
    }

    pub fn max_exchange_deviation(&self) -> f64 {
        let d = self.dim;
        let mut dev = 0.0f64;
        for m in 0..d {
            for n in 0..d {
                for p in 0..d {
                    for q in 0..d {
                        let w = self.get(m, n, p, q);
                        dev = dev.max((w - self.get(n, m, q, p)).norm());
                        dev = dev.max((w - self.get(m, n, q, p)).norm());
                        dev = dev.max((w - self.get(n, m, p, q)).norm());
                        dev = dev.max((w - self.get(p, q, m, n).conj()).norm());
                    }
                }
            }
        }
        dev
    }
}

pub fn kronecker(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    DMatrix::from_fn(ar * br, ac * bc, |r, c| a[(r / br, c / bc)] * b[(r % br, c % bc)])
}

/// Number of occupation vectors of n particles in d modes: C(n+d-1, d-1).
pub fn sector_dimension(d: usize, n: usize) -> u128 {
    let mut result: u128 = 1;
    for k in 1..d {
        result = result * (n as u128 + k as u128) / k as u128;
    }
    result
}

/// Ordered occupation basis of the n-particle sector over d modes.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    pub modes: usize,
    pub particles: usize,
    pub states: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
}

impl SectorBasis {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, occ: &[u32]) -> Option<usize> {
        self.index.get(occ).copied()
    }
}

/// Enumerates the complete occupation basis, mode-0 occupation descending.
pub fn enumerate_sector(d: usize, n: usize) -> Result<SectorBasis> {
    if d == 0 {
        return Err(Error::DimensionMismatch("d must be >= 1".into()));
    }
    let expected = sector_dimension(d, n);
    if expected > CAPACITY_CAP as u128 {
        return Err(Error::Capacity { requested: expected, cap: CAPACITY_CAP });
    }
    let mut states = Vec::with_capacity(expected as usize);
    let mut current = vec![0u32; d];
    fill_sector(&mut states, &mut current, 0, n as u32, d);
    let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    debug_assert_eq!(states.len() as u128, expected);
    Ok(SectorBasis { modes: d, particles: n, states, index })
}

fn fill_sector(states: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, mode: usize, left: u32, d: usize) {
    if mode == d - 1 {
        current[mode] = left;
        states.push(current.clone());
        return;
    }
    for occ in (0..=left).rev() {
        current[mode] = occ;
        fill_sector(states, current, mode + 1, left - occ, d);
    }
    current[mode] = 0;
}

/// Direct sum of the sectors n = 0..=N over d modes.
#[derive(Debug, Clone)]
pub struct TruncatedFockBasis {
    pub modes: usize,
    pub max_particles: usize,
    pub sectors: Vec<SectorBasis>,
    pub offsets: Vec<usize>,
    dim: usize,
}

impl TruncatedFockBasis {
    pub fn new(d: usize, max_particles: usize) -> Result<Self> {
        let total: u128 = (0..=max_particles).map(|n| sector_dimension(d, n)).sum();
        if total > CAPACITY_CAP as u128 {
            return Err(Error::Capacity { requested: total, cap: CAPACITY_CAP });
        }
        let mut sectors = Vec::with_capacity(max_particles + 1);
        let mut offsets = Vec::with_capacity(max_particles + 1);
        let mut dim = 0usize;
        for n in 0..=max_particles {
            offsets.push(dim);
            let sector = enumerate_sector(d, n)?;
            dim += sector.dim();
            sectors.push(sector);
        }
        Ok(Self { modes: d, max_particles, sectors, offsets, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Particle count of the sector containing flat index `i`.
    pub fn sector_of(&self, i: usize) -> usize {
        match self.offsets.binary_search(&i) {
            Ok(n) => n,
            Err(n) => n - 1,
        }
    }
}

/// Coordinate-triplet sparse matrix; duplicates merged, rows/cols fixed.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pub rows: usize,
    pub cols: usize,
    pub triplets: Vec<(usize, usize, C64)>,
}

impl SparseOperator {
    pub fn from_triplets(rows: usize, cols: usize, raw: Vec<(usize, usize, C64)>) -> Self {
        let mut map: HashMap<(usize, usize), C64> = HashMap::with_capacity(raw.len());
        for (r, c, v) in raw {
            debug_assert!(r < rows && c < cols, "triplet out of range");
            *map.entry((r, c)).or_insert_with(|| C64::new(0.0, 0.0)) += v;
        }
        let mut triplets: Vec<_> = map
            .into_iter()
            .filter(|(_, v)| v.norm() > 0.0)
            .map(|((r, c), v)| (r, c, v))
            .collect();
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        Self { rows, cols, triplets }
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        Self { rows, cols, triplets: Vec::new() }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            rows: dim,
            cols: dim,
            triplets: (0..dim).map(|i| (i, i, C64::new(1.0, 0.0))).collect(),
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut y = vec![C64::new(0.0, 0.0); self.rows];
        for &(r, c, v) in &self.triplets {
            y[r] += v * x[c];
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for &(r, c, v) in &self.triplets {
            m[(r, c)] += v;
        }
        m
    }

    pub fn dagger(&self) -> Self {
        let triplets = self.triplets.iter().map(|&(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.cols, self.rows, triplets)
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            triplets: self.triplets.iter().map(|&(r, c, v)| (r, c, factor * v)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch("sparse add shape".into()));
        }
        let mut triplets = self.triplets.clone();
        triplets.extend_from_slice(&other.triplets);
        Ok(Self::from_triplets(self.rows, self.cols, triplets))
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        hermiticity_deviation(&self.to_dense())
    }
}

/// Complex amplitude vector over an occupation basis.
#[derive(Debug, Clone)]
pub struct ManyBodyState {
    pub amplitudes: DVector<C64>,
    pub normalized: bool,
}

impl ManyBodyState {
    /// Wraps a vector that must be a unit vector (tolerance 1e-10).
    pub fn unit(amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Contract(format!(
                "state must be normalized, got norm {norm}"
            )));
        }
        Ok(Self { amplitudes, normalized: true })
    }

    pub fn raw(amplitudes: DVector<C64>) -> Self {
        let normalized = (amplitudes.norm() - 1.0).abs() <= 1e-10;
        Self { amplitudes, normalized }
    }
}

/// Common view of sector and truncated bases as blocks of fixed particle number.
pub trait FockBasis {
    fn total_dim(&self) -> usize;
    fn modes(&self) -> usize;
    /// (offset into the flat basis, sector) pairs.
    fn blocks(&self) -> Vec<(usize, &SectorBasis)>;
}

impl FockBasis for SectorBasis {
    fn total_dim(&self) -> usize {
        self.dim()
    }
    fn modes(&self) -> usize {
        self.modes
    }
    fn blocks(&self) -> Vec<(usize, &SectorBasis)> {
        vec![(0, self)]
    }
}

impl FockBasis for TruncatedFockBasis {
    fn total_dim(&self) -> usize {
        self.dim()
    }
    fn modes(&self) -> usize {
        self.modes
    }
    fn blocks(&self) -> Vec<(usize, &SectorBasis)> {
        self.offsets.iter().copied().zip(self.sectors.iter()).collect()
    }
}

/// Matrix of a_mode from the n-particle sector to the (n-1)-particle sector.
pub fn annihilation_matrix(
    basis_n: &SectorBasis,
    basis_nm1: &SectorBasis,
    mode: usize,
) -> Result<SparseOperator> {
    if basis_n.modes != basis_nm1.modes {
        return Err(Error::Contract("sector bases have different mode counts".into()));
    }
    if basis_n.particles == 0 || basis_nm1.particles != basis_n.particles - 1 {
        return Err(Error::Contract(format!(
            "annihilation needs target sector with n-1 = {} particles, got {}",
            basis_n.particles.saturating_sub(1),
            basis_nm1.particles
        )));
    }
    if mode >= basis_n.modes {
        return Err(Error::DimensionMismatch(format!("mode {mode} out of range")));
    }
    let mut triplets = Vec::new();
    for (col, occ) in basis_n.states.iter().enumerate() {
        if occ[mode] == 0 {
            continue;
        }
        let mut lowered = occ.clone();
        lowered[mode] -= 1;
        let row = basis_nm1
            .index_of(&lowered)
            .expect("lowered occupation must exist in the (n-1)-sector");
        triplets.push((row, col, C64::new((occ[mode] as f64).sqrt(), 0.0)));
    }
    Ok(SparseOperator::from_triplets(basis_nm1.dim(), basis_n.dim(), triplets))
}

/// Matrix of a_mode on the truncated Fock basis (block sub-diagonal).
pub fn annihilation_trunc(basis: &TruncatedFockBasis, mode: usize) -> Result<SparseOperator> {
    let mut triplets = Vec::new();
    for n in 1..=basis.max_particles {
        let block = annihilation_matrix(&basis.sectors[n], &basis.sectors[n - 1], mode)?;
        let (row_off, col_off) = (basis.offsets[n - 1], basis.offsets[n]);
        triplets.extend(block.triplets.iter().map(|&(r, c, v)| (r + row_off, c + col_off, v)));
    }
    Ok(SparseOperator::from_triplets(basis.dim(), basis.dim(), triplets))
}

/// Second quantization dΓ(A) = Σ_{m,p} A_{mp} a_m† a_p, block-diagonal.
pub fn dgamma_one_body<B: FockBasis>(a: &OneBodyOperator, basis: &B) -> Result<SparseOperator> {
    if a.dim != basis.modes() {
        return Err(Error::DimensionMismatch(format!(
            "one-body operator dim {} vs basis modes {}",
            a.dim,
            basis.modes()
        )));
    }
    let d = a.dim;
    let dim = basis.total_dim();
    let mut triplets = Vec::new();
    for (offset, sector) in basis.blocks() {
        for (col, occ) in sector.states.iter().enumerate() {
            for p in 0..d {
                if occ[p] == 0 {
                    continue;
                }
                for m in 0..d {
                    let coeff = a.entries[(m, p)];
                    if coeff.norm() == 0.0 {
                        continue;
                    }
                    let mut moved = occ.clone();
                    moved[p] -= 1;
                    // single sqrt of the integer product keeps a†_p a_p exact
                    let amp = ((occ[p] as u64 * (moved[m] + 1) as u64) as f64).sqrt();
                    moved[m] += 1;
                    let row = sector.index_of(&moved).expect("moved occupation in sector");
                    triplets.push((row + offset, col + offset, coeff * amp));
                }
            }
        }
    }
    Ok(SparseOperator::from_triplets(dim, dim, triplets))
}

/// Second quantization dΓ(w) = ½ Σ w_{mnpq} a_m† a_n† a_q a_p, block-diagonal.
pub fn dgamma_two_body<B: FockBasis>(w: &TwoBodyTensor, basis: &B) -> Result<SparseOperator> {
    if w.dim != basis.modes() {
        return Err(Error::DimensionMismatch(format!(
            "two-body tensor dim {} vs basis modes {}",
            w.dim,
            basis.modes()
        )));
    }
    let d = w.dim;
    let dim = basis.total_dim();
    let mut triplets = Vec::new();
    for (offset, sector) in basis.blocks() {
        if sector.particles < 2 {
            continue;
        }
        for (col, occ) in sector.states.iter().enumerate() {
            for p in 0..d {
                if occ[p] == 0 {
                    continue;
                }
                let mut occ1 = occ.clone();
                occ1[p] -= 1;
                for q in 0..d {
                    if occ1[q] == 0 {
                        continue;
                    }
                    let mut occ2 = occ1.clone();
                    occ2[q] -= 1;
                    for n in 0..d {
                        let mut occ3 = occ2.clone();
                        occ3[n] += 1;
                        for m in 0..d {
                            let coeff = w.get(m, n, p, q);
                            if coeff.norm() == 0.0 {
                                continue;
                            }
                            let mut occ4 = occ3.clone();
                            occ4[m] += 1;
                            let amp = ((occ[p] as u64
                                * occ1[q] as u64
                                * occ3[n] as u64
                                * occ4[m] as u64) as f64)
                                .sqrt();
                            let row = sector.index_of(&occ4).expect("raised occupation in sector");
                            triplets.push((row + offset, col + offset, coeff * (0.5 * amp)));
                        }
                    }
                }
            }
        }
    }
    Ok(SparseOperator::from_triplets(dim, dim, triplets))
}

/// Mean-field effective one-particle operator (w^φ)_{mp} = Σ w_{mnpq} conj(φ_n) φ_q.
pub fn effective_potential(w: &TwoBodyTensor, phi: &DVector<C64>) -> Result<OneBodyOperator> {
    if phi.len() != w.dim {
        return Err(Error::DimensionMismatch("phi length vs tensor dim".into()));
    }
    if (phi.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Contract(format!("phi must be normalized, got norm {}", phi.norm())));
    }
    let d = w.dim;
    let mut entries = DMatrix::zeros(d, d);
    for m in 0..d {
        for p in 0..d {
            let mut acc = C64::new(0.0, 0.0);
            for n in 0..d {
                for q in 0..d {
                    acc += w.get(m, n, p, q) * phi[n].conj() * phi[q];
                }
            }
            entries[(m, p)] = acc;
        }
    }
    OneBodyOperator::new(entries)
}

/// Amplitudes of φ^{⊗N} in the occupation basis:
/// ⟨occ|φ^{⊗N}⟩ = √(N!/Π occ_k!) Π φ_k^{occ_k}.
pub fn condensate_state(phi: &DVector<C64>, basis: &SectorBasis) -> Result<DVector<C64>> {
    if phi.len() != basis.modes {
        return Err(Error::DimensionMismatch("phi length vs basis modes".into()));
    }
    let n = basis.particles;
    let mut amps = DVector::zeros(basis.dim());
    for (i, occ) in basis.states.iter().enumerate() {
        let mut coeff = C64::new(factorial(n).sqrt(), 0.0);
        for (k, &o) in occ.iter().enumerate() {
            coeff /= factorial(o as usize).sqrt();
            coeff *= phi[k].powu(o);
        }
        amps[i] = coeff;
    }
    Ok(amps)
}

/// Matrix of Γ(V) = V^{⊗n} restricted to the symmetric sector, built by
/// applying creation operators a†(V e_k) to the vacuum column by column.
pub fn sector_lift(v: &DMatrix<C64>, basis: &SectorBasis) -> Result<DMatrix<C64>> {
    let d = basis.modes;
    if v.nrows() != d || v.ncols() != d {
        return Err(Error::DimensionMismatch("lift matrix size vs basis modes".into()));
    }
    let n = basis.particles;
    let ladder: Vec<SectorBasis> = (0..=n).map(|k| enumerate_sector(d, k)).collect::<Result<_>>()?;
    let mut result = DMatrix::zeros(basis.dim(), basis.dim());
    for (col, occ) in basis.states.iter().enumerate() {
        // state on the k-particle sector, grown one particle at a time
        let mut state: Vec<(Vec<u32>, C64)> = vec![(vec![0u32; d], C64::new(1.0, 0.0))];
        let mut level = 0usize;
        let mut norm_factor = 1.0f64;
        for (mode, &count) in occ.iter().enumerate() {
            for _ in 0..count {
                let mut next: HashMap<Vec<u32>, C64> = HashMap::new();
                for (s, amp) in &state {
                    for k in 0..d {
                        let coeff = v[(k, mode)];
                        if coeff.norm() == 0.0 {
                            continue;
                        }
                        let mut raised = s.clone();
                        let c = ((raised[k] + 1) as f64).sqrt();
                        raised[k] += 1;
                        *next.entry(raised).or_insert_with(|| C64::new(0.0, 0.0)) +=
                            amp * coeff * c;
                    }
                }
                state = next.into_iter().collect();
                level += 1;
            }
            norm_factor *= factorial(count as usize).sqrt();
        }
        debug_assert_eq!(level, n);
        for (s, amp) in state {
            let row = ladder[n].index_of(&s).expect("raised state in sector");
            let target = basis.index_of(&s).expect("bases agree");
            debug_assert_eq!(row, target);
            result[(target, col)] += amp / norm_factor;
        }
    }
    Ok(result)
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}
