use fdilab::fdr::coupling_independence_test;
use fdilab::kernels::FrequencyGrid;

fn normalised(weights: Vec<f64>) -> Vec<f64> {
    let z: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / z).collect()
}

#[test]
fn non_exponential_population_on_unequal_levels_depends_on_couplings() {
    // 0→1, 1→2 and 3.5→4.5 share the frequency 1 with different population ratios
    let levels = [0.0f64, 1.0, 2.0, 3.5, 4.5];
    let probs = normalised(levels.iter().map(|e| (1.0 + e).powi(-2)).collect());
    let grid = FrequencyGrid::new(20_001, 5.0).unwrap();
    let spread = coupling_independence_test(&levels, &probs, 2e-3, 10, 3, &grid).unwrap();
    assert!(spread.max_spread() > 1e-2, "{}", spread.max_spread());
}

#[test]
fn thermal_kernel_at_line_centres_is_the_boltzmann_ratio() {
    let levels = [0.0f64, 1.0, 2.0, 3.0, 4.0];
    let beta = 1.0f64;
    let probs = normalised(levels.iter().map(|e| (-beta * e).exp()).collect());
    let grid = FrequencyGrid::new(250_001, 5.0).unwrap();
    let spread = coupling_independence_test(&levels, &probs, 1e-4, 3, 17, &grid).unwrap();
    for line in [1.0, 2.0, 3.0, 4.0] {
        let j = spread.omegas.iter().position(|w| (w - line).abs() < 1e-9).unwrap();
        // [p(ε−ω) + p(ε)] / [p(ε−ω) − p(ε)] for p ∝ e^{−βε}
        let ratio = (1.0 + (-beta * line).exp()) / (1.0 - (-beta * line).exp());
        let got = spread.kappa_mean[j] / line;
        assert!(((got - ratio) / ratio).abs() < 1e-6, "{line}: {got} vs {ratio}");
        assert!(spread.spread[j] < 1e-6);
    }
}
