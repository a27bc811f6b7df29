use cvmem::fock::{CMatrix, DensityMatrix, FockDim};
use cvmem::homodyne::{
    extract_temporal_mode, marginal_pdf, phases_from_degrees, project_quadrature, sample_quadratures, simulate_traces,
    TemporalMode, TimeGrid,
};
use cvmem::preparation::ideal_superposition;
use cvmem::{Complex64, Error};
use proptest::prelude::*;

fn random_state(max_dim: usize) -> impl Strategy<Value = DensityMatrix> {
    (2usize..=max_dim).prop_flat_map(|d| {
        prop::collection::vec(-1.0f64..1.0, 2 * d * d).prop_map(move |v| {
            let g = CMatrix::from_fn(d, d, |m, n| Complex64::new(v[2 * (m * d + n)], v[2 * (m * d + n) + 1]));
            let m = &g * g.adjoint();
            let tr = m.trace();
            DensityMatrix::new(m / tr).unwrap()
        })
    })
}

fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for k in 1..n {
        s += f(lo + h * k as f64) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn plus() -> DensityMatrix {
    let h = 0.5f64.sqrt();
    ideal_superposition(h, h, 0.0, FockDim::new(10).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    // ψ_n leaks past |x| = 6 from n ≈ 10 on, so the bound is checked up to dim 10
    #[test]
    fn marginal_is_normalized(rho in random_state(10), theta in 0.0f64..6.3) {
        let total = simpson(|x| marginal_pdf(&rho, theta, x), -6.0, 6.0, 4000);
        prop_assert!((total - 1.0).abs() < 1e-6, "{}", total);
        for k in 0..50 {
            prop_assert!(marginal_pdf(&rho, theta, -6.0 + 0.24 * k as f64) >= -1e-12);
        }
    }

    #[test]
    fn fock_mixtures_are_phase_insensitive(weights in prop::collection::vec(0.0f64..1.0, 2..21),
                                           theta in 0.0f64..6.3, x in -4.0f64..4.0) {
        let total: f64 = weights.iter().sum::<f64>().max(1e-9);
        let d = weights.len();
        let m = CMatrix::from_fn(d, d, |i, j| if i == j { Complex64::new(weights[i] / total, 0.0) } else { Complex64::new(0.0, 0.0) });
        prop_assume!(total > 1e-6);
        let rho = DensityMatrix::new(m).unwrap();
        prop_assert!((marginal_pdf(&rho, theta, x) - marginal_pdf(&rho, 0.0, x)).abs() < 1e-13);
    }
}

#[test]
fn empirical_cdf_matches_analytic_cdf() {
    let rho = plus().rotated(0.4);
    let n = 20_000;
    for (k, theta) in [0.0, 1.2, 2.9].into_iter().enumerate() {
        let mut xs: Vec<f64> = sample_quadratures(&rho, &[theta], n, 100 + k as u64)
            .unwrap()
            .into_iter()
            .map(|s| s.x)
            .collect();
        xs.sort_by(f64::total_cmp);
        // analytic CDF by fine Simpson integration, independent of the sampler's table
        let (lo, hi, steps) = (-6.0, 6.0, 24_000);
        let h = (hi - lo) / steps as f64;
        let mut cdf = vec![0.0; steps + 1];
        for i in 0..steps / 2 {
            let a = lo + 2.0 * h * i as f64;
            let inc = h / 3.0
                * (marginal_pdf(&rho, theta, a)
                    + 4.0 * marginal_pdf(&rho, theta, a + h)
                    + marginal_pdf(&rho, theta, a + 2.0 * h));
            cdf[2 * i + 2] = cdf[2 * i] + inc;
            cdf[2 * i + 1] = cdf[2 * i] + 0.5 * inc;
        }
        let analytic = |x: f64| {
            let pos = ((x - lo) / h).clamp(0.0, steps as f64);
            let i = (pos.floor() as usize).min(steps - 1);
            cdf[i] + (pos - i as f64) * (cdf[i + 1] - cdf[i])
        };
        let mut d_stat: f64 = 0.0;
        for (i, x) in xs.iter().enumerate() {
            let f = analytic(*x);
            d_stat = d_stat
                .max((f - i as f64 / n as f64).abs())
                .max(((i + 1) as f64 / n as f64 - f).abs());
        }
        let bound = 1.63 / (n as f64).sqrt();
        assert!(d_stat < bound, "theta {theta}: KS {d_stat} >= {bound}");
    }
}

#[test]
fn phase_means_trace_the_coherence() {
    let phases = phases_from_degrees(&[0.0, 30.0, 60.0, 90.0, 120.0, 150.0]);
    let n = 20_000;
    let samples = sample_quadratures(&plus(), &phases, n, 7).unwrap();
    for (k, chunk) in samples.chunks(n).enumerate() {
        let mean = chunk.iter().map(|s| s.x).sum::<f64>() / n as f64;
        let var = chunk.iter().map(|s| (s.x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let expected = phases[k].cos() / 2f64.sqrt();
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - expected).abs() < 3.0 * se,
            "phase {k}: {mean} vs {expected} (se {se})"
        );
    }
}

fn window() -> TimeGrid {
    TimeGrid::new(-100.0, 10.0, 80).unwrap()
}

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

#[test]
fn projected_variances() {
    let d = FockDim::new(6).unwrap();
    let psi = TemporalMode::exponential(window(), 0.0, 40.0).unwrap();
    // supported before the release, hence orthogonal to psi
    let early: Vec<f64> = window()
        .times()
        .map(|t| {
            if t < 0.0 {
                (-(t + 50.0).powi(2) / 400.0).exp()
            } else {
                0.0
            }
        })
        .collect();
    let other = TemporalMode::from_weights(window(), early).unwrap();
    assert!(psi.overlap(&other).unwrap().abs() < 1e-12);
    let n = 10_000;

    let vac: Vec<f64> = sample_quadratures(&DensityMatrix::vacuum(d), &[0.0], n, 1)
        .unwrap()
        .iter()
        .map(|s| s.x)
        .collect();
    let traces = simulate_traces(&vac, &psi, 2).unwrap();
    let proj: Vec<f64> = traces.iter().map(|t| project_quadrature(t, &psi).unwrap()).collect();
    assert!((variance(&proj) - 0.5).abs() < 0.01, "vacuum {}", variance(&proj));

    let one: Vec<f64> = sample_quadratures(&DensityMatrix::fock(1, d).unwrap(), &[0.0], n, 3)
        .unwrap()
        .iter()
        .map(|s| s.x)
        .collect();
    let traces = simulate_traces(&one, &psi, 4).unwrap();
    let proj: Vec<f64> = traces.iter().map(|t| project_quadrature(t, &psi).unwrap()).collect();
    assert!(
        (variance(&proj) - 1.5).abs() < 0.03,
        "single photon {}",
        variance(&proj)
    );
    for (p, x) in proj.iter().zip(&one) {
        assert!((p - x).abs() < 1e-10);
    }
    let orth: Vec<f64> = traces.iter().map(|t| project_quadrature(t, &other).unwrap()).collect();
    assert!(
        (variance(&orth) - 0.5).abs() < 0.02,
        "orthogonal mode {}",
        variance(&orth)
    );
}

#[test]
fn vacuum_traces_have_no_mode() {
    let psi = TemporalMode::exponential(window(), 0.0, 40.0).unwrap();
    let vac: Vec<f64> = sample_quadratures(&DensityMatrix::vacuum(FockDim::new(4).unwrap()), &[0.0], 5000, 5)
        .unwrap()
        .iter()
        .map(|s| s.x)
        .collect();
    let traces = simulate_traces(&vac, &psi, 6).unwrap();
    assert!(matches!(extract_temporal_mode(&traces), Err(Error::AmbiguousMode(_))));
}

fn single_photon_traces(envelope: &TemporalMode, n: usize, seed: u64) -> Vec<cvmem::homodyne::RawTrace> {
    let one = DensityMatrix::fock(1, FockDim::new(6).unwrap()).unwrap();
    let xs: Vec<f64> = sample_quadratures(&one, &[0.0], n, seed)
        .unwrap()
        .iter()
        .map(|s| s.x)
        .collect();
    simulate_traces(&xs, envelope, seed + 1).unwrap()
}

#[test]
fn pca_recovers_gaussian_and_exponential_envelopes() {
    for truth in [
        TemporalMode::gaussian(window(), 200.0, 50.0).unwrap(),
        TemporalMode::exponential(window(), 0.0, 60.0).unwrap(),
    ] {
        let est = extract_temporal_mode(&single_photon_traces(&truth, 5000, 11)).unwrap();
        let overlap = est.overlap(&truth).unwrap();
        assert!(overlap >= 0.99, "overlap {overlap}");
    }
}

#[test]
fn extracted_mode_follows_release_time() {
    let early = TemporalMode::exponential(window(), 0.0, 60.0).unwrap();
    let late = TemporalMode::exponential(window(), 200.0, 60.0).unwrap();
    let a = extract_temporal_mode(&single_photon_traces(&early, 5000, 21)).unwrap();
    let b = extract_temporal_mode(&single_photon_traces(&late, 5000, 31)).unwrap();
    let shift = b.peak_time() - a.peak_time();
    assert!((shift - 200.0).abs() <= window().step_ns, "shift {shift}");
}
