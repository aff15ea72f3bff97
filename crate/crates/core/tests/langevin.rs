use fdilab::environments::{build_kernels, Cutoff, EnvironmentState, SpectralModel};
use fdilab::kernels::FrequencyGrid;
use fdilab::langevin::{generate_noise, simulate, SimulationConfig, SimulationMode};
use fdilab::qbm::OscillatorBank;

#[test]
fn local_and_memory_modes_agree_for_a_broad_bath() {
    let bank = OscillatorBank::single(1.0, 1.0).unwrap();
    let grid = FrequencyGrid::with_spacing(0.02, 1000.0).unwrap();
    let k = build_kernels(
        &SpectralModel::ohmic(0.01, Cutoff::Drude(100.0)),
        &EnvironmentState::Thermal { temperature: 1.0 },
        &grid,
    )
    .unwrap();
    let local = SimulationConfig::default();
    let memory = SimulationConfig::default().with_mode(SimulationMode::Memory);
    // both modes share one plan and therefore one noise ensemble
    let plan = local.plan(&bank, &k).unwrap();
    let noise = generate_noise(&k.nu, plan.dt, plan.n_steps(), 400, 21).unwrap();
    let a = simulate(&bank, &k, &noise, &local).unwrap();
    let b = simulate(&bank, &k, &noise, &memory).unwrap();
    let (pa, pb) = (a.covariance.sigma_pp[(0, 0)], b.covariance.sigma_pp[(0, 0)]);
    assert!(((pa - pb) / pa).abs() < 0.02, "local {pa}, memory {pb}");
}

#[test]
fn only_an_inequality_violating_bath_breaks_the_uncertainty_bound() {
    let bank = OscillatorBank::single(1.0, 1.0).unwrap();
    let grid = FrequencyGrid::with_spacing(0.02, 200.0).unwrap();
    let model = SpectralModel::ohmic(0.05, Cutoff::Drude(50.0));
    let run = |state: EnvironmentState| {
        let k = build_kernels(&model, &state, &grid).unwrap();
        let config = SimulationConfig::default();
        let plan = config.plan(&bank, &k).unwrap();
        let noise = generate_noise(&k.nu, plan.dt, plan.n_steps(), 300, 5).unwrap();
        let stats = simulate(&bank, &k, &noise, &config).unwrap();
        (stats.dets[0], stats.det_se[0])
    };
    let (zero, zero_se) = run(EnvironmentState::ZeroTemperature);
    assert!(zero + 3.0 * zero_se >= 0.25, "{zero} ± {zero_se}");
    let (vacuum, _) = run(EnvironmentState::Classical { temperature: 0.05 });
    assert!(vacuum < 0.25 * 0.5, "{vacuum}");
}
