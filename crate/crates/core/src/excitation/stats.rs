//! Excitation-number statistics: the operator N₊ = dΓ(Q), the distribution
//! of the number of particles outside the condensate, and its moment
//! generating function.


use crate::excitation::frame::CondensateFrame;
use crate::fock::{dgamma_one_body, FockBasis, ManyBodyState, SectorBasis, SparseOperator};
use crate::{C64, Error, Result};

/// N₊ = dΓ(Id - |φ⟩⟨φ|) on the given basis.
pub fn build_nplus<B: FockBasis>(frame: &CondensateFrame, basis: &B) -> Result<SparseOperator> {
    dgamma_one_body(&frame.q_proj, basis)
}

/// Probabilities p_0..p_N of finding n particles outside the condensate.
#[derive(Debug, Clone)]
pub struct ExcitationDistribution {
    pub probabilities: Vec<f64>,
}

impl ExcitationDistribution {
    pub fn max_particles(&self) -> usize {
        self.probabilities.len() - 1
    }

    /// P[N₊ > n] = Σ_{m>n} p_m.
    pub fn tail(&self, n: usize) -> f64 {
        self.probabilities.iter().skip(n + 1).sum()
    }

    /// g(β) = Σ_n p_n e^{βn}.
    pub fn mgf_value(&self, beta: f64) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(n, &p)| p * (beta * n as f64).exp())
            .sum()
    }

    fn validate(&self) -> Result<()> {
        if self.probabilities.iter().any(|&p| p < -1e-10) {
            return Err(Error::Contract(format!(
                "negative probability in excitation distribution: {:?}",
                self.probabilities
            )));
        }
        let total: f64 = self.probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Contract(format!(
                "excitation distribution sums to {total}, expected 1"
            )));
        }
        Ok(())
    }
}

/// Spectral projections of ψ onto the integer eigenspaces of N₊, evaluated
/// as Lagrange interpolation polynomials Π_{m≠n} (N₊ - m)/(n - m) over the
/// nodes 0..N by repeated sparse application.
pub fn excitation_distribution(
    psi: &ManyBodyState,
    frame: &CondensateFrame,
    basis: &SectorBasis,
) -> Result<ExcitationDistribution> {
    if !psi.normalized {
        return Err(Error::Contract("excitation_distribution needs a normalized state".into()));
    }
    if psi.amplitudes.len() != basis.dim() {
        return Err(Error::DimensionMismatch("state length vs basis dimension".into()));
    }
    let nplus = build_nplus(frame, basis)?;
    let n_max = basis.particles;
    let mut probabilities = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let mut v: Vec<C64> = psi.amplitudes.iter().copied().collect();
        for m in 0..=n_max {
            if m == n {
                continue;
            }
            let applied = nplus.apply(&v);
            let scale = 1.0 / (n as f64 - m as f64);
            for (slot, a) in v.iter_mut().zip(applied.iter()) {
                *slot = (*a - C64::new(m as f64, 0.0) * *slot) * C64::new(scale, 0.0);
            }
        }
        let p = psi
            .amplitudes
            .iter()
            .zip(v.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum::<f64>();
        probabilities.push(p);
    }
    let dist = ExcitationDistribution { probabilities };
    dist.validate()?;
    Ok(dist)
}

/// g_N(·, β) sampled on a β grid.
#[derive(Debug, Clone)]
pub struct MgfCurve {
    pub betas: Vec<f64>,
    pub values: Vec<f64>,
}

impl MgfCurve {
    /// Checks g(0) = 1, monotonicity, and log-convexity on a uniform grid.
    pub fn max_shape_defect(&self) -> f64 {
        let mut defect = 0.0f64;
        for (i, (&b, &v)) in self.betas.iter().zip(self.values.iter()).enumerate() {
            if b == 0.0 {
                defect = defect.max((v - 1.0).abs());
            }
            if i > 0 && self.betas[i] > self.betas[i - 1] {
                defect = defect.max(self.values[i - 1] - v);
            }
        }
        // discrete log-convexity on uniformly spaced grids
        let uniform = self.betas.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>();
        if uniform.len() >= 2
            && uniform.iter().all(|&h| (h - uniform[0]).abs() <= 1e-12 * uniform[0].abs().max(1.0))
        {
            for w in self.values.windows(3) {
                let second = w[0].ln() - 2.0 * w[1].ln() + w[2].ln();
                defect = defect.max(-second - 1e-8);
            }
        }
        defect
    }
}

/// g_N(t, β) = ⟨ψ, exp(β N₊) ψ⟩ over a β grid, via the excitation
/// distribution.
pub fn mgf(
    psi: &ManyBodyState,
    frame: &CondensateFrame,
    basis: &SectorBasis,
    betas: &[f64],
) -> Result<MgfCurve> {
    if betas.iter().any(|&b| b < 0.0) {
        return Err(Error::Contract("mgf betas must be non-negative".into()));
    }
    let dist = excitation_distribution(psi, frame, basis)?;
    let values = betas.iter().map(|&b| dist.mgf_value(b)).collect();
    Ok(MgfCurve { betas: betas.to_vec(), values })
}

/// C_β = g_N(0, β), the initial-condensation constant; finite (≤ e^{βN}).
pub fn initial_mgf_constant(
    psi0: &ManyBodyState,
    frame0: &CondensateFrame,
    basis: &SectorBasis,
    beta: f64,
) -> Result<f64> {
    Ok(excitation_distribution(psi0, frame0, basis)?.mgf_value(beta))
}
