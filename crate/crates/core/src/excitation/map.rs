//! The excitation map U_N: the partial isometry that strips all condensate
//! content from an N-particle state and lands in the condensate-orthogonal
//! truncated Fock space. All matrices here live in the frame coordinates of a
//! [`CondensateFrame`], where the condensate is mode 0; states from the mode
//! basis are moved in and out with [`to_frame_coordinates`] /
//! [`from_frame_coordinates`].

use nalgebra::{DMatrix, DVector};

use crate::excitation::frame::CondensateFrame;
use crate::fock::{
    annihilation_trunc, dgamma_one_body, factorial, sector_dimension, sector_lift, FockBasis,
    ManyBodyState, OneBodyOperator, SectorBasis, TruncatedFockBasis,
};
use crate::{C64, Error, Result};

/// Explicit-matrix regime for the map and generator machinery.
pub const MAP_MODE_LIMIT: usize = 3;
pub const MAP_PARTICLE_LIMIT: usize = 5;

pub fn ensure_explicit_regime(d: usize, n_particles: usize) -> Result<()> {
    if d > MAP_MODE_LIMIT || n_particles > MAP_PARTICLE_LIMIT {
        let requested: u128 =
            (0..=n_particles).map(|n| sector_dimension(d, n)).sum();
        let cap: u128 =
            (0..=MAP_PARTICLE_LIMIT).map(|n| sector_dimension(MAP_MODE_LIMIT, n)).sum();
        return Err(Error::Capacity { requested, cap: cap as usize });
    }
    Ok(())
}

/// Explicit matrices of the excitation map in frame coordinates.
#[derive(Debug, Clone)]
pub struct ExcitationMapMatrices {
    pub n_particles: usize,
    /// Truncated Fock basis ℱ^{≤N} in frame coordinates.
    pub trunc: TruncatedFockBasis,
    /// N-particle sector basis in frame coordinates.
    pub sector: SectorBasis,
    /// U: N-sector → truncated basis; `trunc.dim() × sector.dim()`.
    pub u: DMatrix<C64>,
    /// Projector onto condensate-free states of ≤ N particles.
    pub q_nt: DMatrix<C64>,
    /// Embedding of the N-sector into the truncated basis.
    pub w_embed: DMatrix<C64>,
}

impl ExcitationMapMatrices {
    /// U W†: the map extended to the whole truncated basis (zero off the
    /// N-sector); convenient square form for operator sandwiches.
    pub fn u_full(&self) -> DMatrix<C64> {
        &self.u * self.w_embed.adjoint()
    }

    /// max(‖U†U − Id‖, ‖U U† − Q‖).
    pub fn isometry_defect(&self) -> f64 {
        let dim_sector = self.sector.dim();
        let utu = self.u.adjoint() * &self.u;
        let a = (utu - DMatrix::<C64>::identity(dim_sector, dim_sector)).norm();
        let uut = &self.u * self.u.adjoint();
        let b = (uut - &self.q_nt).norm();
        a.max(b)
    }
}

/// Diagonal projector onto occupation vectors with no particles in mode 0
/// and at most `max_n` particles in total.
pub fn condensate_free_projector(trunc: &TruncatedFockBasis, max_n: usize) -> DMatrix<C64> {
    let dim = trunc.dim();
    let mut q = DMatrix::<C64>::zeros(dim, dim);
    for (offset, sector) in trunc.blocks() {
        if sector.particles > max_n {
            continue;
        }
        for (i, occ) in sector.states.iter().enumerate() {
            if occ[0] == 0 {
                q[(offset + i, offset + i)] = C64::new(1.0, 0.0);
            }
        }
    }
    q
}

/// Embedding of the n-particle sector into the truncated basis.
pub fn sector_embedding(trunc: &TruncatedFockBasis, n: usize) -> DMatrix<C64> {
    let offset = trunc.offsets[n];
    let sdim = trunc.sectors[n].dim();
    let mut w = DMatrix::<C64>::zeros(trunc.dim(), sdim);
    for i in 0..sdim {
        w[(offset + i, i)] = C64::new(1.0, 0.0);
    }
    w
}

/// Diagonal total-number operator on the truncated basis.
pub fn number_diagonal(trunc: &TruncatedFockBasis) -> DVector<f64> {
    let mut diag = DVector::<f64>::zeros(trunc.dim());
    for (offset, sector) in trunc.blocks() {
        for i in 0..sector.dim() {
            diag[offset + i] = sector.particles as f64;
        }
    }
    diag
}

/// Diagonal √(max(N − 𝒩 − shift, 0)) on the truncated basis.
pub fn sqrt_remaining_diagonal(
    trunc: &TruncatedFockBasis,
    n_particles: usize,
    shift: f64,
) -> DMatrix<C64> {
    let num = number_diagonal(trunc);
    DMatrix::from_diagonal(&DVector::from_fn(trunc.dim(), |i, _| {
        C64::new((n_particles as f64 - num[i] - shift).max(0.0).sqrt(), 0.0)
    }))
}

/// Σ_{k=0}^{N} a_0^k / √(k!) on the truncated basis.
fn condensate_lowering_series(trunc: &TruncatedFockBasis) -> Result<DMatrix<C64>> {
    let dim = trunc.dim();
    let a0 = annihilation_trunc(trunc, 0)?.to_dense();
    let mut series = DMatrix::<C64>::zeros(dim, dim);
    let mut power = DMatrix::<C64>::identity(dim, dim);
    for k in 0..=trunc.max_particles {
        series += &power * C64::new(1.0 / factorial(k).sqrt(), 0.0);
        if k < trunc.max_particles {
            power = &a0 * power;
        }
    }
    Ok(series)
}

/// Excitation map for `n_particles` on the given truncated basis: the
/// composition (project onto condensate-free states) ∘ (annihilate all
/// condensate particles with unit weight) ∘ (embed the sector).
fn excitation_map_on(
    trunc: &TruncatedFockBasis,
    n_particles: usize,
) -> Result<(DMatrix<C64>, DMatrix<C64>, DMatrix<C64>)> {
    let q = condensate_free_projector(trunc, n_particles);
    let series = condensate_lowering_series(trunc)?;
    let w = sector_embedding(trunc, n_particles);
    let u = &q * series * &w;
    Ok((u, q, w))
}

pub fn build_excitation_map(
    frame: &CondensateFrame,
    d: usize,
    n_particles: usize,
) -> Result<ExcitationMapMatrices> {
    if frame.phi.len() != d {
        return Err(Error::DimensionMismatch("frame dimension vs d".into()));
    }
    ensure_explicit_regime(d, n_particles)?;
    let trunc = TruncatedFockBasis::new(d, n_particles)?;
    let sector = trunc.sectors[n_particles].clone();
    let (u, q_nt, w_embed) = excitation_map_on(&trunc, n_particles)?;
    let map = ExcitationMapMatrices { n_particles, trunc, sector, u, q_nt, w_embed };
    let defect = map.isometry_defect();
    if defect > 1e-10 {
        return Err(Error::Contract(format!(
            "excitation map isometry defect {defect:.3e} exceeds 1e-10"
        )));
    }
    Ok(map)
}

/// Mode-basis sector state → frame coordinates (condensate = mode 0).
pub fn to_frame_coordinates(
    frame: &CondensateFrame,
    basis: &SectorBasis,
    psi: &DVector<C64>,
) -> Result<DVector<C64>> {
    let lift = sector_lift(&frame.completion, basis)?;
    Ok(lift.adjoint() * psi)
}

/// Frame-coordinate sector state → mode basis.
pub fn from_frame_coordinates(
    frame: &CondensateFrame,
    basis: &SectorBasis,
    psi: &DVector<C64>,
) -> Result<DVector<C64>> {
    let lift = sector_lift(&frame.completion, basis)?;
    Ok(lift * psi)
}

/// Builds the N-particle state whose excitation content is the given
/// sequence ξ_0..ξ_N: returns U† (⊕_n ξ_n) in the mode basis. Each ξ_n is an
/// n-particle sector state in the mode basis, orthogonal to φ in every slot,
/// with Σ ‖ξ_n‖² = 1.
pub fn initial_state_from_excitations(
    xi: &[DVector<C64>],
    frame: &CondensateFrame,
) -> Result<ManyBodyState> {
    if xi.is_empty() {
        return Err(Error::Contract("need at least xi_0".into()));
    }
    let d = frame.phi.len();
    let n_particles = xi.len() - 1;
    let map = build_excitation_map(frame, d, n_particles)?;
    let total: f64 = xi.iter().map(|x| x.norm_squared()).sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::Contract(format!(
            "excitation weights must sum to one, got {total}"
        )));
    }
    let mut big = DVector::<C64>::zeros(map.trunc.dim());
    for (n, xin) in xi.iter().enumerate() {
        let sector = &map.trunc.sectors[n];
        if xin.len() != sector.dim() {
            return Err(Error::DimensionMismatch(format!(
                "xi_{n} length {} vs sector dimension {}",
                xin.len(),
                sector.dim()
            )));
        }
        let in_frame = to_frame_coordinates(frame, sector, xin)?;
        // orthogonality to φ in every slot = no condensate occupation
        let mut leak = 0.0f64;
        for (i, occ) in sector.states.iter().enumerate() {
            if occ[0] > 0 {
                leak = leak.max(in_frame[i].norm());
            }
        }
        if leak > 1e-10 {
            return Err(Error::Contract(format!(
                "xi_{n} has a condensate component of size {leak:.3e} (must be orthogonal to phi)"
            )));
        }
        let offset = map.trunc.offsets[n];
        for i in 0..sector.dim() {
            big[offset + i] = in_frame[i];
        }
    }
    let in_sector = map.u.adjoint() * big;
    let psi_mode = from_frame_coordinates(frame, &map.sector, &in_sector)?;
    ManyBodyState::unit(psi_mode)
}

#[derive(Debug, Clone, Copy)]
pub struct ConjugationReport {
    /// max over modes n ≥ 1 of ‖U_N W_N† a_n† W_{N-1} U_{N-1}† − Q_N a_n† Q_{N-1}‖.
    pub creation_residual: f64,
    /// ‖U_N W_N† a_0† W_{N-1} U_{N-1}† − Q_N √(N−𝒩) Q_{N-1}‖.
    pub condensate_residual: f64,
}

/// Checks how conjugation by the excitation map transforms creation
/// operators: excited modes pass through, while the condensate mode turns
/// into the c-number-like factor √(N−𝒩).
pub fn verify_conjugation(
    frame: &CondensateFrame,
    d: usize,
    n_particles: usize,
) -> Result<ConjugationReport> {
    if frame.phi.len() != d {
        return Err(Error::DimensionMismatch("frame dimension vs d".into()));
    }
    ensure_explicit_regime(d, n_particles)?;
    if n_particles < 1 {
        return Err(Error::Contract("conjugation check needs N >= 1".into()));
    }
    let trunc = TruncatedFockBasis::new(d, n_particles)?;
    let (u_n, q_n, w_n) = excitation_map_on(&trunc, n_particles)?;
    let (u_nm1, _, w_nm1) = excitation_map_on(&trunc, n_particles - 1)?;
    let q_nm1 = condensate_free_projector(&trunc, n_particles - 1);
    let mut creation_residual = 0.0f64;
    let mut condensate_residual = 0.0f64;
    for mode in 0..d {
        let adag = annihilation_trunc(&trunc, mode)?.to_dense().adjoint();
        let lhs = &u_n * w_n.adjoint() * &adag * &w_nm1 * u_nm1.adjoint();
        if mode == 0 {
            let sqrt_rem = sqrt_remaining_diagonal(&trunc, n_particles, 0.0);
            let rhs = &q_n * sqrt_rem * &q_nm1;
            condensate_residual = (lhs - rhs).norm();
        } else {
            let rhs = &q_n * adag * &q_nm1;
            creation_residual = creation_residual.max((lhs - rhs).norm());
        }
    }
    Ok(ConjugationReport { creation_residual, condensate_residual })
}

#[derive(Debug, Clone, Copy)]
pub struct NumberIdentityReport {
    /// ‖U N₊ U† − 𝒩 Q_N‖: excitations of the N-sector become plain particle
    /// number after the map.
    pub excitation_residual: f64,
    /// ‖U W† 𝒩 W U† − N Q_N‖: total particle number is pinned to N.
    pub total_residual: f64,
}

pub fn verify_number_identities(
    frame: &CondensateFrame,
    d: usize,
    n_particles: usize,
) -> Result<NumberIdentityReport> {
    let map = build_excitation_map(frame, d, n_particles)?;
    // In frame coordinates Q = Id − |e0⟩⟨e0|.
    let mut q_entries = DMatrix::<C64>::identity(d, d);
    q_entries[(0, 0)] = C64::new(0.0, 0.0);
    let q_one_body = OneBodyOperator::new(q_entries)?;
    let nplus = dgamma_one_body(&q_one_body, &map.sector)?.to_dense();
    let num = DMatrix::from_diagonal(&number_diagonal(&map.trunc).map(|x| C64::new(x, 0.0)));
    let excitation_residual =
        (&map.u * nplus * map.u.adjoint() - &num * &map.q_nt).norm();
    let u_full = map.u_full();
    let total_residual = (&u_full * &num * u_full.adjoint()
        - &map.q_nt * C64::new(n_particles as f64, 0.0))
        .norm();
    Ok(NumberIdentityReport { excitation_residual, total_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{condensate_state, enumerate_sector};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> DVector<C64> {
        let mut v = DVector::from_fn(dim, |_, _| {
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        v /= C64::new(v.norm(), 0.0);
        v
    }

    #[test]
    fn map_is_a_partial_isometry_across_the_regime() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [2usize, 3] {
            for n in [2usize, 3, 5] {
                let phi = random_unit(d, &mut rng);
                let frame = CondensateFrame::new(phi).unwrap();
                let map = build_excitation_map(&frame, d, n).unwrap();
                assert!(map.isometry_defect() <= 1e-10, "d={d} n={n}");
            }
        }
    }

    #[test]
    fn regime_guard_rejects_large_requests() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let phi = random_unit(4, &mut rng);
        let frame = CondensateFrame::new(phi).unwrap();
        assert!(matches!(
            build_excitation_map(&frame, 4, 3),
            Err(Error::Capacity { .. })
        ));
        let phi = random_unit(2, &mut rng);
        let frame = CondensateFrame::new(phi).unwrap();
        assert!(matches!(
            build_excitation_map(&frame, 2, 6),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn condensate_maps_to_the_vacuum() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (d, n) = (3usize, 4usize);
        let phi = random_unit(d, &mut rng);
        let frame = CondensateFrame::new(phi.clone()).unwrap();
        let map = build_excitation_map(&frame, d, n).unwrap();
        let basis = enumerate_sector(d, n).unwrap();
        let cond_mode = condensate_state(&phi, &basis).unwrap();
        let cond_frame = to_frame_coordinates(&frame, &basis, &cond_mode).unwrap();
        let image = &map.u * cond_frame;
        assert!((image[0].norm() - 1.0).abs() <= 1e-10, "vacuum amplitude");
        assert!(image.rows(1, image.len() - 1).norm() <= 1e-10);
    }

    #[test]
    fn pure_condensate_round_trips_through_xi0() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let (d, n) = (2usize, 3usize);
        let phi = random_unit(d, &mut rng);
        let frame = CondensateFrame::new(phi.clone()).unwrap();
        let mut xi: Vec<DVector<C64>> = Vec::new();
        xi.push(DVector::from_vec(vec![C64::new(1.0, 0.0)]));
        for k in 1..=n {
            let dim = sector_dimension(d, k) as usize;
            xi.push(DVector::zeros(dim));
        }
        let psi = initial_state_from_excitations(&xi, &frame).unwrap();
        let basis = enumerate_sector(d, n).unwrap();
        let cond = condensate_state(&phi, &basis).unwrap();
        let overlap = cond.dotc(&psi.amplitudes).norm();
        assert!((overlap - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn single_excitation_matches_tensor_symmetrization() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let (d, n) = (2usize, 3usize);
        let phi = random_unit(d, &mut rng);
        let frame = CondensateFrame::new(phi.clone()).unwrap();
        let chi = frame.completion.column(1).clone_owned();
        let mut xi: Vec<DVector<C64>> = Vec::new();
        xi.push(DVector::zeros(1));
        xi.push(chi.clone());
        for k in 2..=n {
            xi.push(DVector::zeros(sector_dimension(d, k) as usize));
        }
        let psi = initial_state_from_excitations(&xi, &frame).unwrap();

        // oracle: normalized a†(χ) a(φ) φ^{⊗N}
        let basis = enumerate_sector(d, n).unwrap();
        let lower = enumerate_sector(d, n - 1).unwrap();
        let cond = condensate_state(&phi, &basis).unwrap();
        let mut after = DVector::<C64>::zeros(lower.dim());
        for m in 0..d {
            let a = crate::fock::annihilation_matrix(&basis, &lower, m).unwrap();
            after += DVector::from_vec(a.apply(cond.as_slice())) * phi[m].conj();
        }
        let mut raised = DVector::<C64>::zeros(basis.dim());
        for m in 0..d {
            let a = crate::fock::annihilation_matrix(&basis, &lower, m).unwrap();
            raised += DVector::from_vec(a.dagger().apply(after.as_slice())) * chi[m];
        }
        raised /= C64::new(raised.norm(), 0.0);
        let overlap = raised.dotc(&psi.amplitudes).norm();
        assert!((overlap - 1.0).abs() <= 1e-10, "overlap {overlap}");
    }

    #[test]
    fn excitation_data_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let (d, n) = (3usize, 3usize);
        let phi = random_unit(d, &mut rng);
        let frame = CondensateFrame::new(phi).unwrap();
        let map = build_excitation_map(&frame, d, n).unwrap();
        // random condensate-free frame data, pushed to the mode basis
        let mut xi_mode: Vec<DVector<C64>> = Vec::new();
        let mut total = 0.0;
        let mut frame_data: Vec<DVector<C64>> = Vec::new();
        for k in 0..=n {
            let sector = &map.trunc.sectors[k];
            let mut v = DVector::from_fn(sector.dim(), |_, _| {
                C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            for (i, occ) in sector.states.iter().enumerate() {
                if occ[0] > 0 {
                    v[i] = C64::new(0.0, 0.0);
                }
            }
            total += v.norm_squared();
            frame_data.push(v);
        }
        for v in frame_data.iter_mut() {
            *v /= C64::new(total.sqrt(), 0.0);
        }
        for (k, v) in frame_data.iter().enumerate() {
            let sector = &map.trunc.sectors[k];
            xi_mode.push(from_frame_coordinates(&frame, sector, v).unwrap());
        }
        let psi = initial_state_from_excitations(&xi_mode, &frame).unwrap();
        // push back through U and compare sector by sector
        let in_frame =
            to_frame_coordinates(&frame, &map.sector, &psi.amplitudes).unwrap();
        let image = &map.u * in_frame;
        for (k, v) in frame_data.iter().enumerate() {
            let offset = map.trunc.offsets[k];
            let got = image.rows(offset, v.len()).clone_owned();
            assert!((got - v).norm() <= 1e-10, "sector {k}");
        }
    }

    #[test]
    fn non_orthogonal_excitations_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (d, _n) = (2usize, 2usize);
        let phi = random_unit(d, &mut rng);
        let frame = CondensateFrame::new(phi.clone()).unwrap();
        let mut xi: Vec<DVector<C64>> = Vec::new();
        xi.push(DVector::zeros(1));
        xi.push(phi.clone()); // along the condensate: must be rejected
        xi.push(DVector::zeros(sector_dimension(d, 2) as usize));
        assert!(matches!(
            initial_state_from_excitations(&xi, &frame),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn conjugation_identities_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for (d, n) in [(2usize, 2usize), (2, 3), (3, 3)] {
            let phi = random_unit(d, &mut rng);
            let frame = CondensateFrame::new(phi).unwrap();
            let report = verify_conjugation(&frame, d, n).unwrap();
            assert!(report.creation_residual <= 1e-10, "(d={d},N={n}) creation");
            assert!(report.condensate_residual <= 1e-10, "(d={d},N={n}) condensate");
        }
    }

    #[test]
    fn number_identities_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for (d, n) in [(2usize, 3usize), (3, 3)] {
            let phi = random_unit(d, &mut rng);
            let frame = CondensateFrame::new(phi).unwrap();
            let report = verify_number_identities(&frame, d, n).unwrap();
            assert!(report.excitation_residual <= 1e-10, "(d={d},N={n})");
            assert!(report.total_residual <= 1e-10, "(d={d},N={n})");
        }
    }

    #[test]
    fn mapped_condensate_and_one_excitation_have_expected_number() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let (d, n) = (2usize, 3usize);
        let phi = random_unit(d, &mut rng);
        let frame = CondensateFrame::new(phi.clone()).unwrap();
        let map = build_excitation_map(&frame, d, n).unwrap();
        let num = DMatrix::from_diagonal(&number_diagonal(&map.trunc).map(|x| C64::new(x, 0.0)));
        let basis = enumerate_sector(d, n).unwrap();

        let cond = condensate_state(&phi, &basis).unwrap();
        let cond_frame = to_frame_coordinates(&frame, &basis, &cond).unwrap();
        let image = &map.u * cond_frame;
        let expect0 = image.dotc(&(&num * &image)).re;
        assert!(expect0.abs() <= 1e-10);

        let chi = frame.completion.column(1).clone_owned();
        let mut xi: Vec<DVector<C64>> = vec![DVector::zeros(1), chi];
        for k in 2..=n {
            xi.push(DVector::zeros(sector_dimension(d, k) as usize));
        }
        let psi = initial_state_from_excitations(&xi, &frame).unwrap();
        let psi_frame = to_frame_coordinates(&frame, &basis, &psi.amplitudes).unwrap();
        let image = &map.u * psi_frame;
        let expect1 = image.dotc(&(&num * &image)).re;
        assert!((expect1 - 1.0).abs() <= 1e-10);
    }
}
