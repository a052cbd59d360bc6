//! The generator of the fluctuation dynamics around the condensate, its
//! decomposition into particle-number-shifting blocks A_δ, and the
//! time-derivative identity for the excitation moment generating function.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{hartree_phi_at, propagate, MeanFieldModel};
use crate::excitation::frame::CondensateFrame;
use crate::excitation::map::{
    build_excitation_map, condensate_free_projector, ensure_explicit_regime, number_diagonal,
    sqrt_remaining_diagonal, to_frame_coordinates,
};
use crate::fock::{
    annihilation_trunc, dgamma_one_body, dgamma_two_body, effective_potential, ManyBodyState,
    OneBodyOperator, TruncatedFockBasis,
};
use crate::{C64, Error, Result};

#[derive(Debug, Clone)]
pub struct FluctuationGenerator {
    pub n_particles: usize,
    /// Truncated Fock basis in frame coordinates (condensate = mode 0).
    pub trunc: TruncatedFockBasis,
    /// Generator matrix on the truncated basis, compressed to the
    /// condensate-free subspace (where the fluctuation state lives).
    pub l: DMatrix<C64>,
    /// δ → A_δ, the part of L that destroys exactly δ particles.
    pub blocks: Vec<(i32, DMatrix<C64>)>,
    /// ‖extracted A₁† − closed-form A₁†‖ and same for A₂†.
    pub formula_residuals: [f64; 2],
}

impl FluctuationGenerator {
    pub fn block(&self, delta: i32) -> &DMatrix<C64> {
        &self.blocks.iter().find(|(d, _)| *d == delta).expect("delta in -2..=2").1
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (self.l.adjoint() - &self.l).norm()
    }

    /// max over δ of ‖A_{−δ} − A_δ†‖ plus the largest entry of L outside the
    /// |δ| ≤ 2 shift pattern.
    pub fn block_defect(&self) -> f64 {
        let mut defect = 0.0f64;
        for delta in 1..=2i32 {
            defect = defect.max((self.block(-delta) - self.block(delta).adjoint()).norm());
        }
        let num = number_diagonal(&self.trunc);
        for i in 0..self.trunc.dim() {
            for j in 0..self.trunc.dim() {
                if (num[j] - num[i]).abs() > 2.5 {
                    defect = defect.max(self.l[(i, j)].norm());
                }
            }
        }
        defect
    }
}

/// Keeps only the entries of `m` that move a column-sector state down by
/// exactly `delta` particles (row sector = column sector − δ).
fn sector_shift_block(m: &DMatrix<C64>, num: &DVector<f64>, delta: i32) -> DMatrix<C64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        if (num[j] - num[i] - delta as f64).abs() < 0.5 {
            m[(i, j)]
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

pub fn build_fluctuation_generator(
    model: &MeanFieldModel,
    frame: &CondensateFrame,
) -> Result<FluctuationGenerator> {
    let d = model.t_op.dim;
    let n_particles = model.n_particles;
    if frame.phi.len() != d {
        return Err(Error::DimensionMismatch("frame dimension vs model".into()));
    }
    ensure_explicit_regime(d, n_particles)?;
    // move everything to frame coordinates, where the condensate is e0
    let t_frame =
        OneBodyOperator::new(frame.completion.adjoint() * &model.t_op.entries * &frame.completion)?;
    let w_frame = model.w.rotate(&frame.completion)?;
    let trunc = TruncatedFockBasis::new(d, n_particles)?;
    let mut e0 = DVector::<C64>::zeros(d);
    e0[0] = C64::new(1.0, 0.0);
    let hartree_h = OneBodyOperator::new(
        &t_frame.entries + effective_potential(&w_frame, &e0)?.entries,
    )?;
    let dgamma_hartree = dgamma_one_body(&hartree_h, &trunc)?.to_dense();
    let q = condensate_free_projector(&trunc, n_particles);
    let full_minus_hartree = dgamma_one_body(&t_frame, &trunc)?.to_dense()
        + dgamma_two_body(&w_frame, &trunc)?.to_dense()
            * C64::new(1.0 / (n_particles as f64 - 1.0), 0.0)
        - &dgamma_hartree;
    let map = build_excitation_map(frame, d, n_particles)?;
    let u_full = map.u_full();
    let l = &q * dgamma_hartree * &q + &u_full * full_minus_hartree * u_full.adjoint();

    let num = DVector::from_fn(trunc.dim(), |i, _| number_diagonal(&trunc)[i]);
    let blocks: Vec<(i32, DMatrix<C64>)> =
        (-2..=2).map(|delta| (delta, sector_shift_block(&l, &num, delta))).collect();

    let formulas = closed_form_raising_blocks(&w_frame, &trunc, n_particles, &q)?;
    let extract = |delta: i32| -> &DMatrix<C64> {
        &blocks.iter().find(|(d, _)| *d == delta).unwrap().1
    };
    let formula_residuals =
        [(extract(-1) - &formulas[0]).norm(), (extract(-2) - &formulas[1]).norm()];
    if formula_residuals.iter().any(|&r| r > 1e-9) {
        return Err(Error::Contract(format!(
            "generator blocks disagree with closed formulas: {:?}",
            formula_residuals
        )));
    }

    let gen = FluctuationGenerator { n_particles, trunc, l, blocks, formula_residuals };
    let herm = gen.hermiticity_defect();
    if herm > 1e-9 {
        return Err(Error::NotHermitian { deviation: herm });
    }
    Ok(gen)
}

/// Closed-form A₁†, A₂† (the blocks that create one / two excitations),
/// compressed to the condensate-free subspace. Primed sums run over modes
/// ≥ 1 in frame coordinates.
fn closed_form_raising_blocks(
    w: &crate::fock::TwoBodyTensor,
    trunc: &TruncatedFockBasis,
    n_particles: usize,
    q: &DMatrix<C64>,
) -> Result<[DMatrix<C64>; 2]> {
    let d = trunc.modes;
    let dim = trunc.dim();
    let lowering: Vec<DMatrix<C64>> =
        (0..d).map(|m| annihilation_trunc(trunc, m).map(|s| s.to_dense())).collect::<Result<_>>()?;
    let sqrt_rem = sqrt_remaining_diagonal(trunc, n_particles, 0.0);
    let sqrt_rem1 = sqrt_remaining_diagonal(trunc, n_particles, 1.0);
    let num_mat =
        DMatrix::from_diagonal(&number_diagonal(trunc).map(|x| C64::new(x, 0.0)));
    let scale = 1.0 / (n_particles as f64 - 1.0);

    let mut a1 = DMatrix::<C64>::zeros(dim, dim);
    for m in 1..d {
        for n in 1..d {
            for qq in 1..d {
                let coeff = w.get(m, n, 0, qq) * C64::new(scale, 0.0);
                if coeff.norm() == 0.0 {
                    continue;
                }
                a1 += lowering[m].adjoint()
                    * lowering[n].adjoint()
                    * &lowering[qq]
                    * &sqrt_rem
                    * coeff;
            }
        }
        let coeff = w.get(m, 0, 0, 0) * C64::new(scale, 0.0);
        if coeff.norm() != 0.0 {
            a1 -= lowering[m].adjoint() * &num_mat * &sqrt_rem * coeff;
        }
    }

    let mut a2 = DMatrix::<C64>::zeros(dim, dim);
    for m in 1..d {
        for n in 1..d {
            let coeff = w.get(m, n, 0, 0) * C64::new(0.5 * scale, 0.0);
            if coeff.norm() == 0.0 {
                continue;
            }
            a2 += lowering[m].adjoint() * lowering[n].adjoint() * &sqrt_rem1 * &sqrt_rem * coeff;
        }
    }
    Ok([q * a1 * q, q * a2 * q])
}

#[derive(Debug, Clone, Copy)]
pub struct DerivativeReport {
    /// Central finite difference of g_N in t.
    pub fd_value: f64,
    /// −i ⟨[exp(β𝒩), L]⟩ in the fluctuation state.
    pub commutator_value: f64,
    /// Block expansion: Σ_{δ=1,2} 4 sinh(δβ/2) Im⟨E^{1/2} A_δ† E^{1/2}⟩.
    pub explicit_value: f64,
    /// |fd − commutator| / max(|fd|, |commutator|, 1e−12).
    pub rel_error: f64,
    /// |commutator − explicit|.
    pub form_agreement: f64,
}

const FD_STEP: f64 = 1e-4;

fn mgf_at(
    model: &MeanFieldModel,
    psi0: &ManyBodyState,
    phi0: &DVector<C64>,
    basis: &crate::fock::SectorBasis,
    h: &crate::fock::SparseOperator,
    t: f64,
    beta: f64,
) -> Result<f64> {
    let psi_t = propagate(h, &psi0.amplitudes, t)?;
    let phi_t = hartree_phi_at(model, phi0, t)?;
    let frame = CondensateFrame::new(phi_t)?;
    let state = ManyBodyState::unit(psi_t)?;
    let dist = crate::excitation::stats::excitation_distribution(&state, &frame, basis)?;
    Ok(dist.mgf_value(beta))
}

/// Compares three computations of ∂_t g_N(t, β): a finite difference of the
/// full pipeline, the commutator with the fluctuation generator, and the
/// explicit block expansion.
pub fn verify_derivative_identity(
    model: &MeanFieldModel,
    psi0: &ManyBodyState,
    phi0: &DVector<C64>,
    t: f64,
    beta: f64,
) -> Result<DerivativeReport> {
    let d = model.t_op.dim;
    let n_particles = model.n_particles;
    ensure_explicit_regime(d, n_particles)?;
    if t < FD_STEP {
        return Err(Error::Contract(format!(
            "derivative check needs t >= {FD_STEP} for the central difference"
        )));
    }
    let basis = crate::fock::enumerate_sector(d, n_particles)?;
    if psi0.amplitudes.len() != basis.dim() {
        return Err(Error::DimensionMismatch("psi0 length vs N-sector".into()));
    }
    let h = crate::dynamics::assemble_hamiltonian(model, &basis)?;

    let g_plus = mgf_at(model, psi0, phi0, &basis, &h, t + FD_STEP, beta)?;
    let g_minus = mgf_at(model, psi0, phi0, &basis, &h, t - FD_STEP, beta)?;
    let fd_value = (g_plus - g_minus) / (2.0 * FD_STEP);

    let psi_t = propagate(&h, &psi0.amplitudes, t)?;
    let phi_t = hartree_phi_at(model, phi0, t)?;
    let frame = CondensateFrame::new(phi_t)?;
    let generator = build_fluctuation_generator(model, &frame)?;
    let map = build_excitation_map(&frame, d, n_particles)?;
    let psi_frame = to_frame_coordinates(&frame, &basis, &psi_t)?;
    let fluct = &map.u * psi_frame;

    let num = number_diagonal(&generator.trunc);
    let e_full = DMatrix::from_diagonal(&DVector::from_fn(generator.trunc.dim(), |i, _| {
        C64::new((beta * num[i]).exp(), 0.0)
    }));
    let commutator = &e_full * &generator.l - &generator.l * &e_full;
    let commutator_value = (fluct.dotc(&(commutator * &fluct)) * C64::new(0.0, -1.0)).re;

    let e_half = DMatrix::from_diagonal(&DVector::from_fn(generator.trunc.dim(), |i, _| {
        C64::new((0.5 * beta * num[i]).exp(), 0.0)
    }));
    let weighted = &e_half * &fluct;
    let mut explicit_value = 0.0;
    for delta in 1..=2i32 {
        let raising = generator.block(delta).adjoint();
        let term = weighted.dotc(&(raising * &weighted)).im;
        explicit_value += 4.0 * ((delta as f64) * beta / 2.0).sinh() * term;
    }

    let rel_error = (fd_value - commutator_value).abs()
        / fd_value.abs().max(commutator_value.abs()).max(1e-12);
    let form_agreement = (commutator_value - explicit_value).abs();
    Ok(DerivativeReport { fd_value, commutator_value, explicit_value, rel_error, form_agreement })
}
