//! Scenario configuration (strict TOML schema), deterministic experiment
//! execution for the CLI subcommands, and CSV serialization of result rows.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::bounds::{
    beta_c, bound_f, vv_estimate, vv_estimate_refined, GridSpec, VvEstimate,
};
use crate::dynamics::{assemble_hamiltonian, hartree_phi_at, plan_propagation, MeanFieldModel};
use crate::excitation::frame::CondensateFrame;
use crate::excitation::generator::{build_fluctuation_generator, verify_derivative_identity};
use crate::excitation::map::{
    build_excitation_map, initial_state_from_excitations, verify_conjugation,
    verify_number_identities,
};
use crate::excitation::stats::excitation_distribution;
use crate::fock::{
    annihilation_matrix, condensate_state, enumerate_sector, sector_dimension, ManyBodyState,
    OneBodyOperator, TwoBodyTensor,
};
use crate::{C64, Error, Result};

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    pub d: usize,
    #[serde(rename = "N")]
    pub n_particles: usize,
    /// Root seed for all random presets (ChaCha8, seeded per field).
    pub seed: Option<u64>,
    pub kinetic: KineticSpec,
    pub interaction: InteractionSpec,
    pub phi0: PhiSpec,
    #[serde(default)]
    pub excitation: ExcitationSpec,
    pub t_max: f64,
    pub t_samples: usize,
    pub beta: BetaSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KineticSpec {
    Zero,
    /// diag(0, 1, …, d−1).
    Harmonic,
    Explicit {
        real: Vec<Vec<f64>>,
        #[serde(default)]
        imag: Option<Vec<Vec<f64>>>,
    },
    RandomHermitian { norm: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InteractionSpec {
    Zero,
    /// w_{mnpq} = c δ_{mp} δ_{nq}.
    ScaledIdentity { c: f64 },
    /// Random entries, bosonic-symmetrized, rescaled to the requested norm.
    RandomHermitian { norm: f64 },
    Explicit {
        real: Vec<f64>,
        #[serde(default)]
        imag: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PhiSpec {
    Mode { mode: usize },
    Uniform,
    Explicit {
        real: Vec<f64>,
        #[serde(default)]
        imag: Option<Vec<f64>>,
    },
    Random,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExcitationSpec {
    #[default]
    PureCondensate,
    /// One particle moved from the condensate into the completion-frame
    /// column `mode` (mode ≥ 1).
    SingleExcitation { mode: usize },
    /// Explicit excitation content per sector; omitted sectors are zero.
    Custom { xi: Vec<XiSpec> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XiSpec {
    pub n: usize,
    pub real: Vec<f64>,
    #[serde(default)]
    pub imag: Option<Vec<f64>>,
}

fn default_fractions() -> Vec<f64> {
    vec![0.25, 0.5, 0.75]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BetaSpec {
    /// β = fraction · β_c(t) per time sample (β_c of the first positive
    /// sample is used at t = 0, where β_c is infinite).
    Fractions {
        #[serde(default = "default_fractions")]
        fractions: Vec<f64>,
    },
    Explicit { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToleranceProfile {
    Default,
    Strict,
}

impl ToleranceProfile {
    /// Slack for bound margins: rows below −slack fail check-bound.
    pub fn margin_slack(self) -> f64 {
        match self {
            ToleranceProfile::Default => 1e-8,
            ToleranceProfile::Strict => 1e-10,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() || self.id.contains(',') || self.id.contains('\n') {
            return Err(config_err("id must be non-empty and CSV-safe"));
        }
        if self.d == 0 {
            return Err(config_err("d must be >= 1"));
        }
        if self.n_particles < 2 {
            return Err(config_err("N >= 2 is required (the model couples pairs)"));
        }
        if !(self.t_max >= 0.0) || self.t_samples == 0 {
            return Err(config_err("need t_max >= 0 and t_samples >= 1"));
        }
        let needs_seed = matches!(self.kinetic, KineticSpec::RandomHermitian { .. })
            || matches!(self.interaction, InteractionSpec::RandomHermitian { .. })
            || matches!(self.phi0, PhiSpec::Random);
        if needs_seed && self.seed.is_none() {
            return Err(config_err("seed is required when any random preset is used"));
        }
        match &self.beta {
            BetaSpec::Fractions { fractions } => {
                if fractions.is_empty()
                    || fractions.iter().any(|&f| !(f > 0.0) || f >= 1.0)
                {
                    return Err(config_err("beta fractions must lie strictly in (0, 1)"));
                }
            }
            BetaSpec::Explicit { values } => {
                if values.is_empty() || values.iter().any(|&b| !(b >= 0.0)) {
                    return Err(config_err("explicit beta values must be >= 0"));
                }
            }
        }
        Ok(())
    }
}

pub fn load_scenario(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig =
        toml::from_str(text).map_err(|e| config_err(format!("config parse error: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub scenario: Vec<ScenarioConfig>,
}

pub fn load_sweep(text: &str) -> Result<SweepConfig> {
    let cfg: SweepConfig =
        toml::from_str(text).map_err(|e| config_err(format!("config parse error: {e}")))?;
    if cfg.scenario.is_empty() {
        return Err(config_err("sweep needs at least one [[scenario]]"));
    }
    for s in &cfg.scenario {
        s.validate()?;
    }
    Ok(cfg)
}

fn complex_matrix(
    d: usize,
    real: &[Vec<f64>],
    imag: Option<&Vec<Vec<f64>>>,
) -> Result<DMatrix<C64>> {
    if real.len() != d || real.iter().any(|r| r.len() != d) {
        return Err(config_err(format!("explicit matrix must be {d}x{d}")));
    }
    if let Some(im) = imag {
        if im.len() != d || im.iter().any(|r| r.len() != d) {
            return Err(config_err(format!("imag part must be {d}x{d}")));
        }
    }
    Ok(DMatrix::from_fn(d, d, |i, j| {
        C64::new(real[i][j], imag.map_or(0.0, |im| im[i][j]))
    }))
}

fn complex_vector(len: usize, real: &[f64], imag: Option<&Vec<f64>>, what: &str) -> Result<Vec<C64>> {
    if real.len() != len || imag.is_some_and(|im| im.len() != len) {
        return Err(config_err(format!("{what} needs {len} entries")));
    }
    Ok((0..len)
        .map(|i| C64::new(real[i], imag.map_or(0.0, |im| im[i])))
        .collect())
}

fn random_complex(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
}

/// Sub-seed offsets so each random field draws from its own stream,
/// independent of evaluation order.
const SEED_KINETIC: u64 = 0;
const SEED_INTERACTION: u64 = 1;
const SEED_PHI: u64 = 2;

fn build_kinetic(cfg: &ScenarioConfig) -> Result<OneBodyOperator> {
    let d = cfg.d;
    match &cfg.kinetic {
        KineticSpec::Zero => Ok(OneBodyOperator::zero(d)),
        KineticSpec::Harmonic => Ok(OneBodyOperator::new(DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                C64::new(i as f64, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))?),
        KineticSpec::Explicit { real, imag } => {
            OneBodyOperator::new(complex_matrix(d, real, imag.as_ref())?)
        }
        KineticSpec::RandomHermitian { norm } => {
            let mut rng =
                ChaCha8Rng::seed_from_u64(cfg.seed.unwrap().wrapping_add(SEED_KINETIC));
            let raw = DMatrix::from_fn(d, d, |_, _| random_complex(&mut rng));
            let herm = (&raw + raw.adjoint()) * C64::new(0.5, 0.0);
            let current = crate::fock::spectral_norm(&herm);
            if current == 0.0 {
                return Err(config_err("degenerate random kinetic draw"));
            }
            OneBodyOperator::new(herm * C64::new(norm / current, 0.0))
        }
    }
}

fn build_interaction(cfg: &ScenarioConfig) -> Result<TwoBodyTensor> {
    let d = cfg.d;
    match &cfg.interaction {
        InteractionSpec::Zero => Ok(TwoBodyTensor::zero(d)),
        InteractionSpec::ScaledIdentity { c } => Ok(TwoBodyTensor::scaled_identity(d, *c)),
        InteractionSpec::RandomHermitian { norm } => {
            let mut rng =
                ChaCha8Rng::seed_from_u64(cfg.seed.unwrap().wrapping_add(SEED_INTERACTION));
            let raw: Vec<C64> = (0..d * d * d * d).map(|_| random_complex(&mut rng)).collect();
            let sym = TwoBodyTensor::symmetrize(d, &raw)?;
            if sym.op_norm() == 0.0 {
                return Err(config_err("degenerate random interaction draw"));
            }
            let scale = C64::new(norm / sym.op_norm(), 0.0);
            let rescaled: Vec<C64> = sym.entries().iter().map(|&v| v * scale).collect();
            TwoBodyTensor::symmetrize(d, &rescaled)
        }
        InteractionSpec::Explicit { real, imag } => {
            let entries = complex_vector(d * d * d * d, real, imag.as_ref(), "interaction tensor")?;
            TwoBodyTensor::symmetrize(d, &entries)
        }
    }
}

fn build_phi0(cfg: &ScenarioConfig) -> Result<DVector<C64>> {
    let d = cfg.d;
    let mut phi = match &cfg.phi0 {
        PhiSpec::Mode { mode } => {
            if *mode >= d {
                return Err(config_err(format!("phi0 mode {mode} out of range for d={d}")));
            }
            let mut v = DVector::<C64>::zeros(d);
            v[*mode] = C64::new(1.0, 0.0);
            v
        }
        PhiSpec::Uniform => DVector::from_element(d, C64::new(1.0 / (d as f64).sqrt(), 0.0)),
        PhiSpec::Explicit { real, imag } => {
            DVector::from_vec(complex_vector(d, real, imag.as_ref(), "phi0")?)
        }
        PhiSpec::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.unwrap().wrapping_add(SEED_PHI));
            DVector::from_fn(d, |_, _| random_complex(&mut rng))
        }
    };
    let norm = phi.norm();
    if norm < 1e-12 {
        return Err(config_err("phi0 must be a non-zero vector"));
    }
    phi /= C64::new(norm, 0.0);
    Ok(phi)
}

fn build_initial_state(
    cfg: &ScenarioConfig,
    frame: &CondensateFrame,
) -> Result<ManyBodyState> {
    let d = cfg.d;
    let n = cfg.n_particles;
    let basis = enumerate_sector(d, n)?;
    match &cfg.excitation {
        ExcitationSpec::PureCondensate => {
            ManyBodyState::unit(condensate_state(&frame.phi, &basis)?)
        }
        ExcitationSpec::SingleExcitation { mode } => {
            if *mode == 0 || *mode >= d {
                return Err(config_err(
                    "single-excitation mode must be a completion column in 1..d",
                ));
            }
            // a†(χ) a(φ) φ^{⊗N} / ‖·‖, built with ladder matrices so large N
            // stays available (no truncated-basis machinery needed)
            let chi = frame.completion.column(*mode).clone_owned();
            let lower = enumerate_sector(d, n - 1)?;
            let cond = condensate_state(&frame.phi, &basis)?;
            let mut after = DVector::<C64>::zeros(lower.dim());
            for m in 0..d {
                let a = annihilation_matrix(&basis, &lower, m)?;
                after += DVector::from_vec(a.apply(cond.as_slice())) * frame.phi[m].conj();
            }
            let mut raised = DVector::<C64>::zeros(basis.dim());
            for m in 0..d {
                let a = annihilation_matrix(&basis, &lower, m)?;
                raised += DVector::from_vec(a.dagger().apply(after.as_slice())) * chi[m];
            }
            let norm = raised.norm();
            if norm < 1e-12 {
                return Err(config_err("single-excitation construction degenerated"));
            }
            ManyBodyState::unit(raised / C64::new(norm, 0.0))
        }
        ExcitationSpec::Custom { xi } => {
            let mut data: Vec<DVector<C64>> = (0..=n)
                .map(|k| DVector::zeros(sector_dimension(d, k) as usize))
                .collect();
            for spec in xi {
                if spec.n > n {
                    return Err(config_err(format!("xi sector {} exceeds N={n}", spec.n)));
                }
                let len = data[spec.n].len();
                data[spec.n] = DVector::from_vec(complex_vector(
                    len,
                    &spec.real,
                    spec.imag.as_ref(),
                    "xi sector",
                )?);
            }
            initial_state_from_excitations(&data, frame)
        }
    }
}

/// Everything needed to run a scenario, resolved from its config.
pub struct BuiltScenario {
    pub model: MeanFieldModel,
    pub phi0: DVector<C64>,
    pub psi0: ManyBodyState,
}

pub fn build_scenario(cfg: &ScenarioConfig) -> Result<BuiltScenario> {
    cfg.validate()?;
    let t_op = build_kinetic(cfg)?;
    let w = build_interaction(cfg)?;
    let model = MeanFieldModel::new(t_op, w, cfg.n_particles)?;
    let phi0 = build_phi0(cfg)?;
    let frame0 = CondensateFrame::new(phi0.clone())?;
    let psi0 = build_initial_state(cfg, &frame0)?;
    Ok(BuiltScenario { model, phi0, psi0 })
}

#[derive(Debug, Clone)]
pub struct ResultRow {
    pub scenario_id: String,
    pub t: f64,
    pub beta: f64,
    pub beta_c: f64,
    pub g: f64,
    pub c_beta: f64,
    pub f: f64,
    pub margin: f64,
    pub flags: String,
}

pub const CSV_HEADER: &str = "scenario_id,t,beta,beta_c,g_N,C_beta,f,margin,flags";

fn fmt_float(x: f64) -> String {
    if x.is_infinite() {
        (if x > 0.0 { "inf" } else { "-inf" }).to_string()
    } else if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

impl ResultRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.scenario_id,
            fmt_float(self.t),
            fmt_float(self.beta),
            fmt_float(self.beta_c),
            fmt_float(self.g),
            fmt_float(self.c_beta),
            fmt_float(self.f),
            fmt_float(self.margin),
            self.flags
        )
    }
}

pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    out
}

fn time_grid(cfg: &ScenarioConfig) -> Vec<f64> {
    if cfg.t_samples == 1 {
        vec![0.0]
    } else {
        (0..cfg.t_samples)
            .map(|i| cfg.t_max * i as f64 / (cfg.t_samples - 1) as f64)
            .collect()
    }
}

fn betas_for(cfg: &ScenarioConfig, t: f64, times: &[f64], k: f64) -> Result<Vec<f64>> {
    match &cfg.beta {
        BetaSpec::Explicit { values } => Ok(values.clone()),
        BetaSpec::Fractions { fractions } => {
            // at t = 0 the critical exponent is infinite; anchor the
            // fractions at the first positive time sample instead
            let anchor = if t > 0.0 {
                t
            } else {
                *times
                    .iter()
                    .find(|&&s| s > 0.0)
                    .ok_or_else(|| config_err("beta fractions need a positive time sample"))?
            };
            let bc = beta_c(anchor, k);
            if bc.is_infinite() {
                // free model: beta_c is infinite at all times; use the
                // fractions directly as absolute exponents
                return Ok(fractions.clone());
            }
            Ok(fractions.iter().map(|f| f * bc).collect())
        }
    }
}

pub fn run_simulate(cfg: &ScenarioConfig) -> Result<Vec<ResultRow>> {
    let built = build_scenario(cfg)?;
    let k = built.model.coupling;
    let basis = enumerate_sector(cfg.d, cfg.n_particles)?;
    let h = assemble_hamiltonian(&built.model, &basis)?;
    let plan = plan_propagation(&h)?;
    let frame0 = CondensateFrame::new(built.phi0.clone())?;
    let dist0 = excitation_distribution(&built.psi0, &frame0, &basis)?;
    let times = time_grid(cfg);
    let mut rows = Vec::new();
    for &t in &times {
        let psi_t = ManyBodyState::unit(plan.apply(&h, &built.psi0.amplitudes, t))?;
        let phi_t = hartree_phi_at(&built.model, &built.phi0, t)?;
        let frame = CondensateFrame::new(phi_t)?;
        let dist = excitation_distribution(&psi_t, &frame, &basis)?;
        let bc = beta_c(t, k);
        for beta in betas_for(cfg, t, &times, k)? {
            let g = dist.mgf_value(beta);
            let c_beta = dist0.mgf_value(beta);
            let (f, margin, flags) = match bound_f(t, beta, k) {
                Ok(f) => (f, c_beta * f - g, String::new()),
                Err(Error::BetaDomain { .. }) => {
                    (f64::NAN, f64::NAN, "beta_domain".to_string())
                }
                Err(e) => return Err(e),
            };
            rows.push(ResultRow {
                scenario_id: cfg.id.clone(),
                t,
                beta,
                beta_c: bc,
                g,
                c_beta,
                f,
                margin,
                flags,
            });
        }
    }
    Ok(rows)
}

/// Scales f by `f_scale` before forming margins — a self-test hook for the
/// exit-status contract (a corrupted bound must be caught). Production use is
/// `f_scale = 1`.
pub fn run_check_bound_scaled(
    cfg: &ScenarioConfig,
    profile: ToleranceProfile,
    f_scale: f64,
) -> Result<(Vec<ResultRow>, bool)> {
    let mut rows = run_simulate(cfg)?;
    for row in rows.iter_mut() {
        if !row.flags.is_empty() {
            return Err(Error::BetaDomain { beta: row.beta, beta_c: row.beta_c });
        }
        row.f *= f_scale;
        row.margin = row.c_beta * row.f - row.g;
        if row.margin < -profile.margin_slack() {
            row.flags = "bound_violation".to_string();
        }
    }
    let ok = rows.iter().all(|r| r.flags.is_empty());
    Ok((rows, ok))
}

pub fn run_check_bound(
    cfg: &ScenarioConfig,
    profile: ToleranceProfile,
) -> Result<(Vec<ResultRow>, bool)> {
    run_check_bound_scaled(cfg, profile, 1.0)
}

#[derive(Debug, Clone)]
pub struct CheckRow {
    pub check: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRow {
    fn new(check: &str, residual: f64, tolerance: f64) -> Self {
        Self {
            check: check.to_string(),
            residual,
            tolerance,
            pass: residual.abs() <= tolerance,
        }
    }

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{}",
            self.check,
            fmt_float(self.residual),
            fmt_float(self.tolerance),
            if self.pass { "pass" } else { "FAIL" }
        )
    }
}

pub const CHECK_CSV_HEADER: &str = "check,residual,tolerance,status";

pub fn checks_to_csv(rows: &[CheckRow]) -> String {
    let mut out = String::from(CHECK_CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    out
}

/// Runs the full algebra suite at the scenario's initial frame: partial
/// isometry, conjugation, number identities, generator decomposition, and the
/// time-derivative identity at (t, β) = (0.1, 0.1).
pub fn run_verify_algebra(cfg: &ScenarioConfig) -> Result<(Vec<CheckRow>, bool)> {
    let built = build_scenario(cfg)?;
    let frame = CondensateFrame::new(built.phi0.clone())?;
    let (d, n) = (cfg.d, cfg.n_particles);
    let mut rows = Vec::new();

    let map = build_excitation_map(&frame, d, n)?;
    let utu = (map.u.adjoint() * &map.u
        - DMatrix::<C64>::identity(map.sector.dim(), map.sector.dim()))
    .norm();
    let uut = (&map.u * map.u.adjoint() - &map.q_nt).norm();
    rows.push(CheckRow::new("isometry_utu", utu, 1e-10));
    rows.push(CheckRow::new("isometry_uut", uut, 1e-10));

    let conj = verify_conjugation(&frame, d, n)?;
    rows.push(CheckRow::new("conjugation_creation", conj.creation_residual, 1e-10));
    rows.push(CheckRow::new("conjugation_condensate", conj.condensate_residual, 1e-10));

    let nums = verify_number_identities(&frame, d, n)?;
    rows.push(CheckRow::new("number_excitations", nums.excitation_residual, 1e-10));
    rows.push(CheckRow::new("number_total", nums.total_residual, 1e-10));

    let generator = build_fluctuation_generator(&built.model, &frame)?;
    rows.push(CheckRow::new("generator_block_a1", generator.formula_residuals[0], 1e-9));
    rows.push(CheckRow::new("generator_block_a2", generator.formula_residuals[1], 1e-9));
    rows.push(CheckRow::new("generator_hermiticity", generator.hermiticity_defect(), 1e-9));
    rows.push(CheckRow::new("generator_block_pattern", generator.block_defect(), 1e-10));

    let report =
        verify_derivative_identity(&built.model, &built.psi0, &built.phi0, 0.1, 0.1)?;
    rows.push(CheckRow::new("derivative_identity", report.rel_error, 1e-4));
    rows.push(CheckRow::new("derivative_forms", report.form_agreement, 1e-6));

    let ok = rows.iter().all(|r| r.pass);
    Ok((rows, ok))
}

/// Runs every scenario in isolation and merges the rows deterministically.
/// Per-scenario failures are collected, not fatal.
pub fn run_sweep(
    configs: &[ScenarioConfig],
    threads: usize,
) -> (Vec<ResultRow>, Vec<(String, String)>) {
    let threads = threads.max(1).min(configs.len().max(1));
    let mut outcomes: Vec<Option<Result<Vec<ResultRow>>>> =
        (0..configs.len()).map(|_| None).collect();
    if threads <= 1 {
        for (i, cfg) in configs.iter().enumerate() {
            outcomes[i] = Some(run_simulate(cfg));
        }
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let slots: Vec<std::sync::Mutex<Option<Result<Vec<ResultRow>>>>> =
            (0..configs.len()).map(|_| std::sync::Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..threads {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if i >= configs.len() {
                        break;
                    }
                    let result = run_simulate(&configs[i]);
                    *slots[i].lock().unwrap() = Some(result);
                });
            }
        });
        for (slot, outcome) in slots.into_iter().zip(outcomes.iter_mut()) {
            *outcome = slot.into_inner().unwrap();
        }
    }
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (cfg, outcome) in configs.iter().zip(outcomes.into_iter()) {
        match outcome.expect("every scenario was scheduled") {
            Ok(mut r) => rows.append(&mut r),
            Err(e) => failures.push((cfg.id.clone(), e.to_string())),
        }
    }
    rows.sort_by(|a, b| {
        (&a.scenario_id, a.t, a.beta)
            .partial_cmp(&(&b.scenario_id, b.t, b.beta))
            .expect("grid values are finite")
    });
    (rows, failures)
}

// ---- estimate-vv configuration ----

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VvConfig {
    pub grid: GridConfig,
    pub v: CurveSpec,
    pub phi: CurveSpec,
    #[serde(default = "default_vv_tolerance")]
    pub tolerance: f64,
}

fn default_vv_tolerance() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CurveSpec {
    Constant { value: f64 },
    /// amplitude · e^{−x²/(2 width²)}; as a φ the amplitude is replaced by
    /// the continuum L² normalization (π width²)^{−1/4}.
    Gaussian {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        width: f64,
    },
    Samples { values: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

pub fn load_vv(text: &str) -> Result<VvConfig> {
    toml::from_str(text).map_err(|e| config_err(format!("config parse error: {e}")))
}

fn curve_closure(spec: &CurveSpec, as_phi: bool) -> Option<Box<dyn Fn(f64) -> f64 + Sync>> {
    match spec {
        CurveSpec::Constant { value } => {
            let v = *value;
            Some(Box::new(move |_| v))
        }
        CurveSpec::Gaussian { amplitude, width } => {
            let w = *width;
            let a = if as_phi {
                1.0 / (std::f64::consts::PI * w * w).powf(0.25)
            } else {
                *amplitude
            };
            Some(Box::new(move |x| a * (-x * x / (2.0 * w * w)).exp()))
        }
        CurveSpec::Samples { .. } => None,
    }
}

fn curve_samples(spec: &CurveSpec, grid: GridSpec, as_phi: bool) -> Result<Vec<f64>> {
    match spec {
        CurveSpec::Samples { values } => {
            if values.len() != grid.len {
                return Err(config_err("sample length must match the grid"));
            }
            Ok(values.clone())
        }
        other => {
            let f = curve_closure(other, as_phi).unwrap();
            Ok((0..grid.len).map(|i| f(grid.point(i))).collect())
        }
    }
}

pub fn run_estimate_vv(cfg: &VvConfig) -> Result<VvEstimate> {
    let grid =
        GridSpec { start: cfg.grid.start, step: cfg.grid.step, len: cfg.grid.len };
    let v_fn = curve_closure(&cfg.v, false);
    let phi_fn = curve_closure(&cfg.phi, true);
    match (v_fn, phi_fn) {
        (Some(v), Some(phi)) => {
            vv_estimate_refined(|x| v(x), |x| C64::new(phi(x), 0.0), grid, cfg.tolerance)
        }
        _ => {
            let vs = curve_samples(&cfg.v, grid, false)?;
            let ps: Vec<C64> = curve_samples(&cfg.phi, grid, true)?
                .into_iter()
                .map(|x| C64::new(x, 0.0))
                .collect();
            vv_estimate(&vs, &ps, grid)
        }
    }
}
