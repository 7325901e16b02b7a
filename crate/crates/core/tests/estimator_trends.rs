//! Statistical trends of the estimators on the synthetic ensemble.

use entropic_logdet::logdet::{
    logdet_maxent, logdet_taylor, maxent_from_moments, relative_error, EstimatorConfig,
};
use entropic_logdet::probe::{estimate_power_traces, power_traces, MomentEstimate, ProbeKind, Sampling};
use entropic_logdet::sparse::{exact_logdet, synth_wishart_identity, Affine};

/// Exact moments, 2048 nodes, tol 1e-10.
#[test]
fn exact_moment_error_decreases_with_k() {
    let n = 200;
    let ladder = [4, 6, 8, 10];
    let mut monotone = 0;
    for seed in 0..20 {
        let a = synth_wishart_identity(n, seed).unwrap();
        let exact = exact_logdet(&a).unwrap();
        let c = a.gershgorin_upper();
        let moments = power_traces(&Affine::new(&a, 1.0 / c, 0.0), 10, &Sampling::BasisSweep).unwrap();
        let errors: Vec<f64> = ladder
            .iter()
            .map(|&k| {
                let supplied = MomentEstimate::supplied(n, moments.moments[..=k].to_vec()).unwrap();
                let cfg = EstimatorConfig { moments: k, tol: 1e-10, quad_nodes: 2048, ..Default::default() };
                relative_error(&maxent_from_moments(&supplied, c, &cfg).unwrap(), exact).unwrap()
            })
            .collect();
        if errors.windows(2).all(|w| w[1] <= w[0]) {
            monotone += 1;
        }
    }
    assert!(monotone >= 18, "monotone on {monotone}/20 seeds");
}

#[test]
fn taylor_trails_maxent_at_two_thousand() {
    let a = synth_wishart_identity(2000, 0).unwrap();
    let exact = exact_logdet(&a).unwrap();
    let cfg = EstimatorConfig::new(10, 30, ProbeKind::Rademacher, 0);
    let maxent = relative_error(&logdet_maxent(&a, &cfg).unwrap(), exact).unwrap();
    let taylor = relative_error(&logdet_taylor(&a, &cfg).unwrap(), exact).unwrap();
    assert!(taylor > maxent, "taylor {taylor} vs maxent {maxent}");
}

#[test]
fn estimated_moments_are_nearly_monotone() {
    let a = synth_wishart_identity(300, 4).unwrap();
    let b = Affine::new(&a, 1.0 / a.gershgorin_upper(), 0.0);
    for kind in ProbeKind::IMPLEMENTED {
        let est = estimate_power_traces(&b, 10, 30, kind, 8).unwrap();
        let se = est.standard_errors();
        for k in 1..10 {
            let pooled = (se[k].powi(2) + se[k + 1].powi(2)).sqrt();
            assert!(
                est.moments[k + 1] <= est.moments[k] + 5.0 * pooled,
                "{kind} k={k}: {} > {}",
                est.moments[k + 1],
                est.moments[k]
            );
        }
    }
}
