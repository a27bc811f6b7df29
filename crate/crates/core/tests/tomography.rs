use cvmem::fock::{fidelity, DensityMatrix, FockDim};
use cvmem::homodyne::{marginal_pdf, phases_from_degrees, sample_quadratures, QuadratureSample};
use cvmem::memory::amplitude_damping;
use cvmem::preparation::ideal_superposition;
use cvmem::tomography::{log_likelihood, mle_reconstruct, Binning, MleOptions};

fn dim(d: usize) -> FockDim {
    FockDim::new(d).unwrap()
}

fn plus(d: usize) -> DensityMatrix {
    let h = 0.5f64.sqrt();
    ideal_superposition(h, h, 0.0, dim(d)).unwrap()
}

fn six_phases() -> Vec<f64> {
    phases_from_degrees(&[0.0, 30.0, 60.0, 90.0, 120.0, 150.0])
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn log_likelihood_definition_and_ordering() {
    let rho = plus(10);
    let samples = sample_quadratures(&rho, &six_phases(), 500, 1).unwrap();
    let ll = log_likelihood(&rho, &samples).unwrap();
    let direct: f64 = samples.iter().map(|s| marginal_pdf(&rho, s.theta, s.x).ln()).sum();
    assert!((ll - direct).abs() < 1e-9 * direct.abs());

    let mut reversed = samples.clone();
    reversed.reverse();
    let mut interleaved: Vec<QuadratureSample> = samples.iter().step_by(2).copied().collect();
    interleaved.extend(samples.iter().skip(1).step_by(2));
    for other in [reversed, interleaved] {
        let l = log_likelihood(&rho, &other).unwrap();
        assert!((l - ll).abs() < 1e-12 * ll.abs());
    }

    let h = 0.5f64.sqrt();
    let minus = ideal_superposition(h, h, std::f64::consts::PI, dim(10)).unwrap();
    assert!(log_likelihood(&minus, &samples).unwrap() < ll);
}

#[test]
fn zero_probability_gives_negative_infinity() {
    let one = DensityMatrix::fock(1, dim(4)).unwrap();
    let samples = vec![QuadratureSample::new(0.0, 0.0), QuadratureSample::new(1.0, 0.3)];
    assert_eq!(log_likelihood(&one, &samples).unwrap(), f64::NEG_INFINITY);
}

#[test]
fn vacuum_fidelity_across_seeds() {
    // one run fluctuates by about 1/sqrt(2N) in the |1> weight, so the
    // median over seeds is compared with the target
    let v = DensityMatrix::vacuum(dim(10));
    let phases = [0.0, 0.785, 1.571, 2.356];
    let fids: Vec<f64> = (0..9)
        .map(|seed| {
            let s = sample_quadratures(&v, &phases, 2500, 1000 + seed).unwrap();
            let r = mle_reconstruct(&s, &MleOptions::default()).unwrap();
            fidelity(&r.state, &v).unwrap()
        })
        .collect();
    let m = median(fids.clone());
    assert!(m >= 0.995, "median fidelity {m} ({fids:?})");
}

#[test]
fn stored_superposition_closed_loop() {
    let truth = amplitude_damping(&plus(20), 0.35).unwrap();
    let samples = sample_quadratures(&truth, &six_phases(), 20_000, 3).unwrap();
    let res = mle_reconstruct(&samples, &MleOptions::default()).unwrap();
    assert!(res.diagnostics.converged);
    let f = fidelity(&res.state, &truth.truncate(dim(10)).unwrap()).unwrap();
    assert!(f >= 0.99, "fidelity {f}");
    let h = &res.diagnostics.history;
    assert!(h.windows(2).all(|w| w[1] >= w[0] - 1e-10));
    assert_eq!(h.len(), res.diagnostics.iterations + 1);
}

#[test]
fn phase_blind_data_gives_phase_blind_estimate() {
    let d = dim(10);
    let mixed = DensityMatrix::fock(1, d)
        .unwrap()
        .mix(0.4, &DensityMatrix::vacuum(d))
        .unwrap();
    let samples = sample_quadratures(&mixed, &six_phases(), 20_000, 9).unwrap();
    let res = mle_reconstruct(&samples, &MleOptions::default()).unwrap();
    assert!(
        res.state.get(0, 1).norm() <= 0.02,
        "|rho01| = {}",
        res.state.get(0, 1).norm()
    );
}

#[test]
fn fidelity_improves_with_sample_count() {
    let truth = amplitude_damping(&plus(20), 0.3).unwrap();
    let opts = MleOptions {
        dim: dim(6),
        ..MleOptions::default()
    };
    let target = truth.truncate(dim(6)).unwrap();
    let mut medians = Vec::new();
    for per_phase in [1_000 / 6 + 1, 10_000 / 6 + 1, 100_000 / 6 + 1] {
        let fids: Vec<f64> = (0..20)
            .map(|rep| {
                let s = sample_quadratures(&truth, &six_phases(), per_phase, 50_000 + rep).unwrap();
                let r = mle_reconstruct(&s, &opts).unwrap();
                fidelity(&r.state, &target).unwrap()
            })
            .collect();
        medians.push(median(fids));
    }
    assert!(medians[0] < medians[1] && medians[1] < medians[2], "{medians:?}");
}

#[test]
fn binned_mode_agrees_with_per_sample() {
    let truth = amplitude_damping(&plus(20), 0.2).unwrap();
    let samples = sample_quadratures(&truth, &six_phases(), 10_000, 17).unwrap();
    let per = mle_reconstruct(&samples, &MleOptions::default()).unwrap();
    let binned = mle_reconstruct(
        &samples,
        &MleOptions {
            binning: Binning::Binned {
                n_bins: 400,
                x_min: -6.0,
                x_max: 6.0,
            },
            ..MleOptions::default()
        },
    )
    .unwrap();
    let f = fidelity(&per.state, &binned.state).unwrap();
    assert!(f > 0.999, "per-sample vs binned fidelity {f}");
}

#[test]
fn result_is_independent_of_thread_count() {
    let truth = amplitude_damping(&plus(20), 0.2).unwrap();
    let samples = sample_quadratures(&truth, &six_phases(), 5_000, 23).unwrap();
    let opts = MleOptions {
        max_iters: 50,
        ..MleOptions::default()
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| mle_reconstruct(&samples, &opts).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.state, b.state);
    assert_eq!(a.diagnostics, b.diagnostics);
}
