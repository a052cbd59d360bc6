//! Condensate frame: the projector onto the space orthogonal to φ and a
//! deterministic unitary completion of φ to an orthonormal basis.

use nalgebra::{DMatrix, DVector};

use crate::fock::OneBodyOperator;
use crate::{C64, Error, Result};

#[derive(Debug, Clone)]
pub struct CondensateFrame {
    pub phi: DVector<C64>,
    /// Q = Id - |φ⟩⟨φ|.
    pub q_proj: OneBodyOperator,
    /// Unitary whose column 0 is φ; columns 1..d-1 span the φ-orthogonal space.
    pub completion: DMatrix<C64>,
}

impl CondensateFrame {
    pub fn new(phi: DVector<C64>) -> Result<Self> {
        let d = phi.len();
        if d == 0 {
            return Err(Error::DimensionMismatch("phi must be non-empty".into()));
        }
        if (phi.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::Contract(format!(
                "phi must be a unit vector, got norm {}",
                phi.norm()
            )));
        }
        let q_entries = DMatrix::identity(d, d) - &phi * phi.adjoint();
        let q_proj = OneBodyOperator::new(q_entries)?;
        let completion = householder_completion(&phi);
        let frame = Self { phi, q_proj, completion };
        debug_assert!(frame.max_defect() <= 1e-12);
        Ok(frame)
    }

    /// Largest residual among Q² = Q, Qφ = 0, and unitarity of the completion.
    pub fn max_defect(&self) -> f64 {
        let q = &self.q_proj.entries;
        let d = self.phi.len();
        let idem = (q * q - q).norm();
        let kills_phi = (q * &self.phi).norm();
        let unitary =
            (self.completion.adjoint() * &self.completion - DMatrix::<C64>::identity(d, d)).norm();
        let col0 = (self.completion.column(0) - &self.phi).norm();
        idem.max(kills_phi).max(unitary).max(col0)
    }
}

/// Householder reflection mapping e0 to φ up to a phase, with the phase fixed
/// on column 0 afterwards so the construction is reproducible.
fn householder_completion(phi: &DVector<C64>) -> DMatrix<C64> {
    let d = phi.len();
    let mu = if phi[0].norm() > 1e-14 { phi[0] / phi[0].norm() } else { C64::new(1.0, 0.0) };
    let mut e0 = DVector::<C64>::zeros(d);
    e0[0] = C64::new(1.0, 0.0);
    let v = phi - &e0 * mu;
    let vnorm2 = v.norm_squared();
    let mut h = DMatrix::<C64>::identity(d, d);
    if vnorm2 > 1e-28 {
        h -= (&v * v.adjoint()) * C64::new(2.0 / vnorm2, 0.0);
    }
    // H e0 = conj(mu)·φ when phi[0] != 0; rescale column 0 so it equals φ
    let mut completion = h;
    let col0 = completion.column(0).clone_owned();
    let overlap = col0.dotc(phi);
    let phase = if overlap.norm() > 1e-14 { overlap / overlap.norm() } else { C64::new(1.0, 0.0) };
    completion.column_mut(0).copy_from(&(col0 * phase));
    completion
}
