//! End-to-end acceptance suite. Each test covers one release criterion and
//! prints a single pass/fail line (visible with `--nocapture`).

use condensate::bounds::{
    beta_c, bound_f, change_of_variables, gronwall_check, inverse_change, tail_bound,
    vv_estimate, vv_estimate_refined, GridSpec,
};
use condensate::dynamics::{assemble_hamiltonian, hartree_phi_at, plan_propagation};
use condensate::excitation::frame::CondensateFrame;
use condensate::excitation::generator::{
    build_fluctuation_generator, verify_derivative_identity,
};
use condensate::excitation::map::{build_excitation_map, verify_conjugation, verify_number_identities};
use condensate::excitation::stats::{build_nplus, excitation_distribution};
use condensate::fock::{enumerate_sector, hermitian_eigen_jacobi, ManyBodyState};
use condensate::scenario::{build_scenario, load_scenario, rows_to_csv, run_simulate};
use condensate::C64;

use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn report(criterion: &str, max_defect: f64, tolerance: f64) {
    let pass = max_defect <= tolerance;
    println!(
        "criterion {criterion}: {} (worst {max_defect:.3e}, tolerance {tolerance:.3e})",
        if pass { "pass" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {max_defect:.3e} > {tolerance:.3e}");
}

fn scenario_toml(id: &str, n: usize, seed: u64, interacting: bool) -> String {
    let interaction = if interacting {
        r#"{ kind = "random-hermitian", norm = 1.0 }"#
    } else {
        r#"{ kind = "zero" }"#
    };
    format!(
        r#"
            id = "{id}"
            d = 2
            N = {n}
            seed = {seed}
            t_max = 0.2
            t_samples = 5
            kinetic = {{ kind = "random-hermitian", norm = 1.0 }}
            interaction = {interaction}
            phi0 = {{ kind = "random" }}
            beta = {{ kind = "fractions" }}
        "#
    )
}

const GRID_TIMES: [f64; 3] = [0.05, 0.1, 0.2];
const GRID_FRACTIONS: [f64; 3] = [0.25, 0.5, 0.75];

/// (t, beta, g, c_beta, f, distribution tails) over the envelope grid.
struct SurfacePoint {
    t: f64,
    beta: f64,
    g: f64,
    c_beta: f64,
    f: f64,
    tails: Vec<f64>,
}

fn envelope_surface(n: usize, seed: u64) -> Vec<SurfacePoint> {
    let cfg = load_scenario(&scenario_toml("env", n, seed, true)).unwrap();
    let built = build_scenario(&cfg).unwrap();
    let k = built.model.coupling;
    assert!((k - 1.0).abs() <= 1e-12, "interaction is rescaled to norm 1");
    let basis = enumerate_sector(2, n).unwrap();
    let h = assemble_hamiltonian(&built.model, &basis).unwrap();
    let plan = plan_propagation(&h).unwrap();
    let frame0 = CondensateFrame::new(built.phi0.clone()).unwrap();
    let dist0 = excitation_distribution(&built.psi0, &frame0, &basis).unwrap();
    let mut points = Vec::new();
    for &t in &GRID_TIMES {
        let psi_t = ManyBodyState::unit(plan.apply(&h, &built.psi0.amplitudes, t)).unwrap();
        let phi_t = hartree_phi_at(&built.model, &built.phi0, t).unwrap();
        let frame = CondensateFrame::new(phi_t).unwrap();
        let dist = excitation_distribution(&psi_t, &frame, &basis).unwrap();
        let bc = beta_c(t, k);
        for &frac in &GRID_FRACTIONS {
            let beta = frac * bc;
            points.push(SurfacePoint {
                t,
                beta,
                g: dist.mgf_value(beta),
                c_beta: dist0.mgf_value(beta),
                f: bound_f(t, beta, k).unwrap(),
                tails: (0..=n).map(|m| dist.tail(m)).collect(),
            });
        }
    }
    points
}

#[test]
fn criterion_01_envelope_bound() {
    let mut worst = f64::NEG_INFINITY;
    for (n, seed) in [(4usize, 101u64), (8, 102)] {
        for p in envelope_surface(n, seed) {
            assert!((p.c_beta - 1.0).abs() <= 1e-9, "pure condensate has C_beta = 1");
            worst = worst.max(p.g - p.f);
        }
    }
    report("01 envelope bound g <= f", worst, 1e-8);
}

#[test]
fn criterion_02_free_case() {
    let mut worst = 0.0f64;
    for (n, seed) in [(4usize, 101u64), (8, 102)] {
        let cfg = load_scenario(&scenario_toml("free", n, seed, false)).unwrap();
        let built = build_scenario(&cfg).unwrap();
        let basis = enumerate_sector(2, n).unwrap();
        let h = assemble_hamiltonian(&built.model, &basis).unwrap();
        let plan = plan_propagation(&h).unwrap();
        for &t in &GRID_TIMES {
            let psi_t =
                ManyBodyState::unit(plan.apply(&h, &built.psi0.amplitudes, t)).unwrap();
            let phi_t = hartree_phi_at(&built.model, &built.phi0, t).unwrap();
            let frame = CondensateFrame::new(phi_t).unwrap();
            let dist = excitation_distribution(&psi_t, &frame, &basis).unwrap();
            for beta in [0.1, 0.5, 1.0] {
                worst = worst.max((dist.mgf_value(beta) - 1.0).abs());
            }
        }
    }
    report("02 free case g = 1", worst, 1e-9);
}

fn random_state(dim: usize, rng: &mut ChaCha8Rng) -> ManyBodyState {
    let v = DVector::from_fn(dim, |_, _| {
        C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    let norm = v.norm();
    ManyBodyState::unit(v / C64::new(norm, 0.0)).unwrap()
}

fn random_frame(d: usize, rng: &mut ChaCha8Rng) -> CondensateFrame {
    let v = DVector::from_fn(d, |_, _| {
        C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    let norm = v.norm();
    CondensateFrame::new(v / C64::new(norm, 0.0)).unwrap()
}

#[test]
fn criterion_03_distribution_oracle() {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(301);
    for d in 2..=3usize {
        for n in 1..=6usize {
            let basis = enumerate_sector(d, n).unwrap();
            for _ in 0..20 {
                let frame = random_frame(d, &mut rng);
                let psi = random_state(basis.dim(), &mut rng);
                let dist = excitation_distribution(&psi, &frame, &basis).unwrap();
                // dense oracle: diagonalize N+, sum |<v_k, psi>|^2 per
                // integer eigenvalue
                let nplus = build_nplus(&frame, &basis).unwrap().to_dense();
                let (values, vectors) = hermitian_eigen_jacobi(&nplus).unwrap();
                let mut oracle = vec![0.0f64; n + 1];
                for (k, &lambda) in values.iter().enumerate() {
                    let m = lambda.round() as usize;
                    assert!((lambda - m as f64).abs() <= 1e-9);
                    oracle[m] += vectors.column(k).dotc(&psi.amplitudes).norm_sqr();
                }
                for m in 0..=n {
                    worst = worst.max((dist.probabilities[m] - oracle[m]).abs());
                }
            }
        }
    }
    report("03 distribution oracle", worst, 1e-8);
}

#[test]
fn criterion_04_excitation_map_algebra() {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(401);
    for (d, n) in [(2usize, 2usize), (2, 3), (3, 3)] {
        let frame = random_frame(d, &mut rng);
        let map = build_excitation_map(&frame, d, n).unwrap();
        worst = worst.max(map.isometry_defect());
        let conj = verify_conjugation(&frame, d, n).unwrap();
        worst = worst.max(conj.creation_residual).max(conj.condensate_residual);
        let nums = verify_number_identities(&frame, d, n).unwrap();
        worst = worst.max(nums.excitation_residual).max(nums.total_residual);
    }
    report("04 excitation-map algebra", worst, 1e-10);
}

#[test]
fn criterion_05_generator_blocks() {
    let toml = r#"
        id = "gen"
        d = 3
        N = 3
        seed = 501
        t_max = 0.1
        t_samples = 2
        kinetic = { kind = "random-hermitian", norm = 1.0 }
        interaction = { kind = "random-hermitian", norm = 1.0 }
        phi0 = { kind = "random" }
        beta = { kind = "fractions" }
    "#;
    let cfg = load_scenario(toml).unwrap();
    let built = build_scenario(&cfg).unwrap();
    let frame = CondensateFrame::new(built.phi0.clone()).unwrap();
    let generator = build_fluctuation_generator(&built.model, &frame).unwrap();
    let worst = generator.formula_residuals[0].max(generator.formula_residuals[1]);
    report("05 generator block closed forms", worst, 1e-9);
}

#[test]
fn criterion_06_derivative_identity() {
    let cfg = load_scenario(&scenario_toml("deriv", 4, 601, true)).unwrap();
    let built = build_scenario(&cfg).unwrap();
    let rep =
        verify_derivative_identity(&built.model, &built.psi0, &built.phi0, 0.1, 0.1).unwrap();
    report("06 derivative identity (relative)", rep.rel_error, 1e-4);
}

#[test]
fn criterion_07_gronwall_inequality() {
    let cfg = load_scenario(&scenario_toml("gron", 8, 102, true)).unwrap();
    let built = build_scenario(&cfg).unwrap();
    let k = built.model.coupling;
    let basis = enumerate_sector(2, 8).unwrap();
    let h = assemble_hamiltonian(&built.model, &basis).unwrap();
    let plan = plan_propagation(&h).unwrap();
    let t_grid: Vec<f64> = (0..21).map(|i| 0.2 * i as f64 / 20.0).collect();
    let beta_grid: Vec<f64> = (0..16).map(|j| 0.3 * j as f64 / 15.0).collect();
    let mut surface = Vec::with_capacity(t_grid.len());
    for &t in &t_grid {
        let psi_t = ManyBodyState::unit(plan.apply(&h, &built.psi0.amplitudes, t)).unwrap();
        let phi_t = hartree_phi_at(&built.model, &built.phi0, t).unwrap();
        let frame = CondensateFrame::new(phi_t).unwrap();
        let dist = excitation_distribution(&psi_t, &frame, &basis).unwrap();
        surface.push(beta_grid.iter().map(|&b| dist.mgf_value(b)).collect::<Vec<_>>());
    }
    let rep = gronwall_check(&t_grid, &beta_grid, &surface, k, 1e-3).unwrap();
    println!(
        "criterion 07 gronwall: {} ({} interior points, {} warnings, max residual {:.3e})",
        if rep.flagged() == 0 { "pass" } else { "FAIL" },
        rep.points.len(),
        rep.warnings(),
        rep.max_residual()
    );
    assert_eq!(rep.flagged(), 0, "flagged interior points: {}", rep.flagged());
}

#[test]
fn criterion_08_change_of_variables_round_trip() {
    let k = 1.0;
    let mut worst = 0.0f64;
    for i in 0..10 {
        let t = 0.02 + 0.18 * i as f64 / 9.0;
        let bc = beta_c(t, k);
        for j in 0..10 {
            let beta = bc * (0.05 + 0.90 * j as f64 / 9.0);
            let cv = change_of_variables(t, beta, k).unwrap();
            let (t_back, beta_back) = inverse_change(cv.x, cv.y, k).unwrap();
            worst = worst.max((t_back - t).abs()).max((beta_back - beta).abs());
            let (t_at_y0, _) = inverse_change(cv.x, cv.y0, k).unwrap();
            assert!(t_at_y0.abs() <= 1e-10, "characteristic start time {t_at_y0:.3e}");
            let f = bound_f(t, beta, k).unwrap();
            let defect = ((cv.y - cv.y0).exp() / f - 1.0).abs();
            assert!(defect <= 1e-12, "e^(Y-y0) vs f defect {defect:.3e}");
        }
    }
    report("08 change-of-variables round trip", worst, 1e-12);
}

#[test]
fn criterion_09_beta_c_asymptotics() {
    let k = 1.0;
    let large = beta_c(3.0, k);
    let large_defect = (large / (2.0 * (-18.0f64).exp()) - 1.0).abs();
    let t_small = 1e-6 / 3.0;
    let small = beta_c(t_small, k);
    let small_defect = (small / (1.0 / 1e-6f64).ln() - 1.0).abs();
    let pass = large_defect <= 1e-6 && small_defect <= 1e-4;
    println!(
        "criterion 09 beta_c asymptotics: {} (large-time {large_defect:.3e} <= 1e-6, \
         small-time {small_defect:.3e} <= 1e-4)",
        if pass { "pass" } else { "FAIL" }
    );
    assert!(pass);
}

#[test]
fn criterion_10_tail_domination() {
    let mut worst = f64::NEG_INFINITY;
    for (n, seed) in [(4usize, 101u64), (8, 102)] {
        for p in envelope_surface(n, seed) {
            for (m, &tail) in p.tails.iter().enumerate() {
                let bound = tail_bound(m, p.beta, p.c_beta, p.t, 1.0).unwrap();
                worst = worst.max(tail - bound);
            }
        }
    }
    report("10 tail domination", worst, 1e-10);
}

#[test]
fn criterion_11_interaction_scale_estimator() {
    // constant potential: the estimate is |c| for any normalized phi
    let grid = GridSpec { start: -6.0, step: 0.01, len: 1201 };
    let phi: Vec<C64> = (0..grid.len)
        .map(|i| {
            let x = grid.point(i);
            C64::new(
                (-x * x / 2.0).exp() / std::f64::consts::PI.powf(0.25),
                0.0,
            )
        })
        .collect();
    let v = vec![-2.5; grid.len];
    let constant = vv_estimate(&v, &phi, grid).unwrap();
    let constant_defect = (constant.value - 2.5).abs();
    assert!(constant_defect <= 1e-12, "constant case defect {constant_defect:.3e}");

    // Gaussian pair: V = e^{-x^2/2}, phi the normalized Gaussian, where the
    // supremum evaluates to 2^{-1/4}
    let est = vv_estimate_refined(
        |x| (-x * x / 2.0).exp(),
        |x| C64::new((-x * x / 2.0).exp() / std::f64::consts::PI.powf(0.25), 0.0),
        GridSpec { start: -8.0, step: 0.02, len: 801 },
        1e-6,
    )
    .unwrap();
    let gaussian_defect = (est.value - 0.5f64.powf(0.25)).abs();
    let refinement = est.refinement_delta.unwrap();
    assert!(refinement < 1e-6, "refinement moved by {refinement:.3e}");
    report("11 interaction-scale estimator", gaussian_defect, 1e-6);
}

#[test]
fn criterion_12_deterministic_csv() {
    // in-process: two full runs of the seeded reference scenario
    let cfg = load_scenario(&scenario_toml("ref", 4, 1201, true)).unwrap();
    let csv_a = rows_to_csv(&run_simulate(&cfg).unwrap());
    let csv_b = rows_to_csv(&run_simulate(&cfg).unwrap());
    assert_eq!(csv_a, csv_b);

    // end to end: the compiled binary, twice, byte-compared
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("ref.toml");
    std::fs::write(&config_path, scenario_toml("ref", 4, 1201, true)).unwrap();
    let run = |out: &str| {
        let out_path = dir.path().join(out);
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_condensate"))
            .args(["simulate", "--config"])
            .arg(&config_path)
            .arg("--out")
            .arg(&out_path)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out_path).unwrap()
    };
    let bytes_a = run("a.csv");
    let bytes_b = run("b.csv");
    let identical = bytes_a == bytes_b && bytes_a == csv_a.as_bytes();
    println!(
        "criterion 12 deterministic csv: {}",
        if identical { "pass" } else { "FAIL" }
    );
    assert!(identical);
}
