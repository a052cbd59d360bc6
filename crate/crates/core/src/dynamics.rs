//! Mean-field Hamiltonian assembly, exact Schrödinger propagation, and the
//! Hartree flow for the condensate vector. ħ = 1 throughout.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::fock::{
    dgamma_one_body, dgamma_two_body, effective_potential, OneBodyOperator, SectorBasis,
    SparseOperator, TwoBodyTensor,
};
use crate::{C64, Error, Result, DENSE_LIMIT};

pub const HARTREE_DRIFT_LIMIT: f64 = 1e-6;

/// H_N = dΓ(T) + dΓ(w)/(N-1) with coupling scale K = ‖w‖.
#[derive(Debug, Clone)]
pub struct MeanFieldModel {
    pub t_op: OneBodyOperator,
    pub w: TwoBodyTensor,
    pub n_particles: usize,
    pub coupling: f64,
}

impl MeanFieldModel {
    pub fn new(t_op: OneBodyOperator, w: TwoBodyTensor, n_particles: usize) -> Result<Self> {
        if n_particles < 2 {
            return Err(Error::Contract("mean-field model needs N >= 2".into()));
        }
        if t_op.dim != w.dim {
            return Err(Error::DimensionMismatch(format!(
                "T has dim {}, w has dim {}",
                t_op.dim, w.dim
            )));
        }
        let coupling = w.op_norm();
        Ok(Self { t_op, w, n_particles, coupling })
    }

    pub fn modes(&self) -> usize {
        self.t_op.dim
    }
}

/// H_N on the N-particle sector.
pub fn assemble_hamiltonian(model: &MeanFieldModel, basis: &SectorBasis) -> Result<SparseOperator> {
    if basis.particles != model.n_particles {
        return Err(Error::Contract(format!(
            "basis has {} particles, model expects {}",
            basis.particles, model.n_particles
        )));
    }
    let kinetic = dgamma_one_body(&model.t_op, basis)?;
    let interaction = dgamma_two_body(&model.w, basis)?;
    kinetic.add(&interaction.scaled(C64::new(1.0 / (model.n_particles as f64 - 1.0), 0.0)))
}

/// Reusable factorization of a time-independent Hermitian generator.
#[derive(Debug, Clone)]
pub enum PropagatorPlan {
    Dense { eigenvalues: DVector<f64>, eigenvectors: DMatrix<C64> },
    Krylov { subspace: usize, step: f64 },
}

/// Spectral decomposition with Hermiticity and reconstruction checks.
pub fn plan_propagation(h: &SparseOperator) -> Result<PropagatorPlan> {
    if h.rows != h.cols {
        return Err(Error::DimensionMismatch("propagator needs a square operator".into()));
    }
    let dense = h.to_dense();
    let scale = dense.iter().map(|v| v.norm()).fold(0.0f64, f64::max).max(1.0);
    let deviation = crate::fock::hermiticity_deviation(&dense);
    if deviation > 1e-12 * scale {
        return Err(Error::NotHermitian { deviation });
    }
    if h.rows > DENSE_LIMIT {
        // one Lanczos step per unit of ||H||*t keeps the subspace residual small
        return Ok(PropagatorPlan::Krylov { subspace: 30, step: 1.0 / scale });
    }
    let eig = SymmetricEigen::new(dense.clone());
    let residual = |values: &DVector<f64>, vectors: &DMatrix<C64>| -> f64 {
        let reconstructed = vectors
            * DMatrix::from_diagonal(&values.map(|v| C64::new(v, 0.0)))
            * vectors.adjoint();
        (reconstructed - &dense).norm() / dense.norm().max(1e-300)
    };
    let (mut eigenvalues, mut eigenvectors) = (eig.eigenvalues, eig.eigenvectors);
    let mut rel = residual(&eigenvalues, &eigenvectors);
    if dense.norm() > 0.0 && rel > 1e-9 {
        // the tridiagonal solver occasionally mixes eigenvectors across
        // distinct eigenvalues; Jacobi is slower but roundoff-accurate
        let (values, vectors) = crate::fock::hermitian_eigen_jacobi(&dense)?;
        eigenvalues = DVector::from_vec(values);
        eigenvectors = vectors;
        rel = residual(&eigenvalues, &eigenvectors);
        if rel > 1e-9 {
            return Err(Error::Contract(format!(
                "eigendecomposition reconstruction error {rel:.3e} exceeds 1e-9"
            )));
        }
    }
    Ok(PropagatorPlan::Dense { eigenvalues, eigenvectors })
}

impl PropagatorPlan {
    /// e^{-iHt} psi.
    pub fn apply(&self, h: &SparseOperator, psi: &DVector<C64>, t: f64) -> DVector<C64> {
        match self {
            PropagatorPlan::Dense { eigenvalues, eigenvectors } => {
                let coeffs = eigenvectors.adjoint() * psi;
                let evolved = DVector::from_fn(coeffs.len(), |i, _| {
                    coeffs[i] * C64::new(0.0, -eigenvalues[i] * t).exp()
                });
                eigenvectors * evolved
            }
            PropagatorPlan::Krylov { subspace, step } => {
                lanczos_expm(h, psi, t, *subspace, *step)
            }
        }
    }
}

/// e^{-iHt} psi0 for Hermitian H; exact (dense) up to dimension 4096.
pub fn propagate(h: &SparseOperator, psi0: &DVector<C64>, t: f64) -> Result<DVector<C64>> {
    if t < 0.0 {
        return Err(Error::Contract("propagation time must be non-negative".into()));
    }
    if (psi0.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Contract(format!(
            "initial state must be normalized, got norm {}",
            psi0.norm()
        )));
    }
    let plan = plan_propagation(h)?;
    let out = plan.apply(h, psi0, t);
    debug_assert!((out.norm() - 1.0).abs() <= 1e-10);
    Ok(out)
}

/// Lanczos short-step evolution with full reorthogonalization.
pub fn lanczos_expm(
    h: &SparseOperator,
    psi: &DVector<C64>,
    t: f64,
    subspace: usize,
    step: f64,
) -> DVector<C64> {
    let mut state = psi.clone();
    let mut remaining = t;
    while remaining > 0.0 {
        let dt = remaining.min(step);
        state = lanczos_step(h, &state, dt, subspace);
        remaining -= dt;
    }
    state
}

fn lanczos_step(h: &SparseOperator, psi: &DVector<C64>, dt: f64, m: usize) -> DVector<C64> {
    let n = psi.len();
    let beta0 = psi.norm();
    if beta0 == 0.0 {
        return psi.clone();
    }
    let mut basis: Vec<DVector<C64>> = vec![psi / C64::new(beta0, 0.0)];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut k = 0;
    while k < m.min(n) {
        let v = &basis[k];
        let mut w = DVector::from_vec(h.apply(v.as_slice()));
        let alpha = v.dotc(&w).re;
        alphas.push(alpha);
        w -= v * C64::new(alpha, 0.0);
        if k > 0 {
            w -= &basis[k - 1] * C64::new(betas[k - 1], 0.0);
        }
        // full reorthogonalization
        for b in &basis {
            let overlap = b.dotc(&w);
            w -= b * overlap;
        }
        let beta = w.norm();
        k += 1;
        if beta < 1e-14 || k == m.min(n) {
            break;
        }
        betas.push(beta);
        basis.push(w / C64::new(beta, 0.0));
    }
    let dim = alphas.len();
    let mut tri = DMatrix::<C64>::zeros(dim, dim);
    for i in 0..dim {
        tri[(i, i)] = C64::new(alphas[i], 0.0);
        if i + 1 < dim {
            tri[(i, i + 1)] = C64::new(betas[i], 0.0);
            tri[(i + 1, i)] = C64::new(betas[i], 0.0);
        }
    }
    let eig = SymmetricEigen::new(tri);
    let mut e1 = DVector::<C64>::zeros(dim);
    e1[0] = C64::new(1.0, 0.0);
    let coeffs = eig.eigenvectors.adjoint() * e1;
    let evolved = DVector::from_fn(dim, |i, _| {
        coeffs[i] * C64::new(0.0, -eig.eigenvalues[i] * dt).exp()
    });
    let small = eig.eigenvectors * evolved;
    let mut out = DVector::<C64>::zeros(n);
    for (i, b) in basis.iter().enumerate() {
        out += b * (small[i] * C64::new(beta0, 0.0));
    }
    out
}

/// Time-sampled unit condensate vectors φ(t_k).
#[derive(Debug, Clone)]
pub struct HartreeTrajectory {
    pub times: Vec<f64>,
    pub vectors: Vec<DVector<C64>>,
    pub drift: f64,
}

impl HartreeTrajectory {
    pub fn vector_at(&self, t: f64) -> Option<&DVector<C64>> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
            .map(|i| &self.vectors[i])
    }
}

fn hartree_rhs(model: &MeanFieldModel, phi: &DVector<C64>) -> DVector<C64> {
    let d = model.modes();
    // unchecked effective potential: RK4 stage vectors are not exactly unit
    let mut v = DMatrix::<C64>::zeros(d, d);
    for m in 0..d {
        for p in 0..d {
            let mut acc = C64::new(0.0, 0.0);
            for n in 0..d {
                for q in 0..d {
                    acc += model.w.get(m, n, p, q) * phi[n].conj() * phi[q];
                }
            }
            v[(m, p)] = acc;
        }
    }
    -(&model.t_op.entries + v) * phi * C64::new(0.0, 1.0)
}

/// Integrates i∂_t φ = (T + w^φ)φ with a fixed-step classical 4th-order
/// scheme; errors out if the recorded norm drift exceeds 1e-6.
pub fn solve_hartree(
    model: &MeanFieldModel,
    phi0: &DVector<C64>,
    times: &[f64],
) -> Result<HartreeTrajectory> {
    solve_hartree_with_step(model, phi0, times, f64::INFINITY)
}

pub fn solve_hartree_with_step(
    model: &MeanFieldModel,
    phi0: &DVector<C64>,
    times: &[f64],
    dt_config: f64,
) -> Result<HartreeTrajectory> {
    if phi0.len() != model.modes() {
        return Err(Error::DimensionMismatch("phi0 length vs model dim".into()));
    }
    if (phi0.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Contract(format!("phi0 must be normalized, got {}", phi0.norm())));
    }
    if times.is_empty() || times[0] != 0.0 {
        return Err(Error::Contract("time grid must start at 0".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Contract("time grid must be strictly increasing".into()));
    }
    let scale = model.t_op.norm() + model.coupling;
    // dt_config, when finite, overrides the default accuracy policy
    let substep = if dt_config.is_finite() {
        dt_config
    } else {
        (1e-3 / scale.max(1e-12)).min(1e-3)
    };

    let mut vectors = Vec::with_capacity(times.len());
    let mut phi = phi0.clone();
    let mut drift = (phi.norm() - 1.0).abs();
    vectors.push(phi.clone());
    for pair in times.windows(2) {
        let span = pair[1] - pair[0];
        let steps = (span / substep).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for _ in 0..steps {
            let k1 = hartree_rhs(model, &phi);
            let k2 = hartree_rhs(model, &(&phi + &k1 * C64::new(h / 2.0, 0.0)));
            let k3 = hartree_rhs(model, &(&phi + &k2 * C64::new(h / 2.0, 0.0)));
            let k4 = hartree_rhs(model, &(&phi + &k3 * C64::new(h, 0.0)));
            phi += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4)
                * C64::new(h / 6.0, 0.0);
        }
        drift = drift.max((phi.norm() - 1.0).abs());
        vectors.push(phi.clone());
    }
    if drift > HARTREE_DRIFT_LIMIT {
        return Err(Error::IntegrationAccuracy { drift, limit: HARTREE_DRIFT_LIMIT });
    }
    Ok(HartreeTrajectory { times: times.to_vec(), vectors, drift })
}

/// Condensate vector at a single time (grid of one interval).
pub fn hartree_phi_at(model: &MeanFieldModel, phi0: &DVector<C64>, t: f64) -> Result<DVector<C64>> {
    if t == 0.0 {
        return Ok(phi0.clone());
    }
    let traj = solve_hartree(model, phi0, &[0.0, t])?;
    Ok(traj.vectors[1].clone())
}

/// Hartree energy operator T + w^φ at a given condensate vector.
pub fn hartree_hamiltonian(model: &MeanFieldModel, phi: &DVector<C64>) -> Result<OneBodyOperator> {
    let v = effective_potential(&model.w, phi)?;
    OneBodyOperator::new(&model.t_op.entries + v.entries)
}
