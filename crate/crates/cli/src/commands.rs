use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use cvmem::analysis::{
    corrected_delta_curve, estimate_loss_dephasing, find_wigner_minimum, nongaussianity_delta, qubit_subspace,
    wigner_grid, WitnessOptions,
};
use cvmem::fock::{fidelity, DensityMatrix, FockDim};
use cvmem::homodyne::{extract_temporal_mode, sample_quadratures, QuadratureSample, RawTrace};
use cvmem::io;
use cvmem::memory::store;
use cvmem::preparation::{admix_fake_clicks, herald_superposition, ideal_superposition};
use cvmem::rng::derive_seed;
use cvmem::tomography::{mle_reconstruct, MleOptions};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{time_label, ExperimentConfig, PreparationKind};
use crate::error::{CliError, CliResult, Context};

/// Stage tag for the quadrature-sampling streams; branch `k` (the k-th
/// storage time) samples with `derive_seed(seed, SAMPLING_TAG, k)`.
pub const SAMPLING_TAG: &str = "homodyne";

pub fn create_dir(out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io("output_dir", out, e))
}

fn create(out: &Path, name: &str) -> CliResult<BufWriter<File>> {
    let path = out.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io("output_dir", &path, e))
}

fn write_with(out: &Path, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> cvmem::Result<()>) -> CliResult<()> {
    let mut w = create(out, name)?;
    let path = out.join(name);
    f(&mut w)
        .and_then(|_| w.flush().map_err(cvmem::Error::from))
        .map_err(|e| CliError::io("output_dir", &path, e))
}

fn write_json(out: &Path, name: &str, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("plain data serializes");
    write_with(out, name, |w| Ok(writeln!(w, "{text}")?))
}

fn open(key: &str, path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(key, path, e))
}

pub fn read_state(key: &str, path: &Path, dim: Option<usize>) -> CliResult<DensityMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(key, path, e))?;
    let rho = io::density_matrix_from_json(&text).map_err(|e| CliError::io(key, path, e))?;
    match dim {
        Some(d) => rho.truncate(FockDim::new(d).at("--dim")?).at("--dim"),
        None => Ok(rho),
    }
}

/// Prepared state and the reference amplitudes `(α, β)` used by the
/// loss/dephasing estimate.
fn prepare(config: &ExperimentConfig) -> CliResult<(DensityMatrix, (f64, f64))> {
    let dim = config.fock_dim()?;
    let p = &config.preparation;
    let (state, reference) = match p.kind {
        PreparationKind::Ideal => {
            let ideal = ideal_superposition(p.alpha, p.beta, p.theta, dim).at("preparation")?;
            (
                admix_fake_clicks(&ideal, p.eta).at("preparation.eta")?,
                (p.alpha, p.beta),
            )
        }
        PreparationKind::Heralded => {
            let params = config.preparation_params();
            let heralded = herald_superposition(&params, dim).at("preparation")?;
            let pure = herald_superposition(&cvmem::preparation::PreparationParams { eta: 1.0, ..params }, dim)
                .at("preparation")?
                .state;
            let (p00, p11) = (pure.get(0, 0).re, pure.get(1, 1).re);
            let norm = p00 + p11;
            (heralded.state, ((p00 / norm).sqrt(), (p11 / norm).sqrt()))
        }
    };
    let reference = match (config.analysis.alpha, config.analysis.beta) {
        (Some(a), Some(b)) => (a, b),
        _ => reference,
    };
    Ok((state, reference))
}

struct Branch {
    t_ns: f64,
    label: String,
    seed: u64,
    truth: DensityMatrix,
    samples: Vec<QuadratureSample>,
}

fn branch_key(k: usize) -> String {
    format!("storage_times_ns[{k}]")
}

fn simulate_branches(config: &ExperimentConfig, prepared: &DensityMatrix) -> CliResult<Vec<Branch>> {
    let params = config.memory_params();
    let phases = config.phases();
    config
        .storage_times_ns
        .par_iter()
        .enumerate()
        .map(|(k, &t_ns)| {
            let key = branch_key(k);
            let truth = store(prepared, &params, t_ns).at(&key)?;
            let seed = derive_seed(config.seed, SAMPLING_TAG, k as u64);
            let samples = sample_quadratures(&truth, &phases, config.n_per_phase, seed).at(&key)?;
            Ok(Branch {
                t_ns,
                label: time_label(t_ns),
                seed,
                truth,
                samples,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct FileEntry {
    path: String,
    records: usize,
}

#[derive(Serialize)]
struct BranchEntry {
    storage_time_ns: f64,
    sampling_seed: u64,
    samples_file: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed_derivation: String,
    config: &'a ExperimentConfig,
    phases_rad: Vec<f64>,
    branches: Vec<BranchEntry>,
    files: Vec<FileEntry>,
}

fn write_samples(out: &Path, b: &Branch) -> CliResult<FileEntry> {
    let name = format!("samples_{}.csv", b.label);
    write_with(out, &name, |w| io::write_samples(w, &b.samples))?;
    Ok(FileEntry {
        path: name,
        records: b.samples.len(),
    })
}

fn manifest<'a>(
    command: &'static str,
    config: &'a ExperimentConfig,
    branches: &[Branch],
    files: Vec<FileEntry>,
) -> Manifest<'a> {
    Manifest {
        tool: "cvmem",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed_derivation: format!("sampling seed of storage_times_ns[k] = derive_seed(seed, \"{SAMPLING_TAG}\", k)"),
        config,
        phases_rad: config.phases(),
        branches: branches
            .iter()
            .map(|b| BranchEntry {
                storage_time_ns: b.t_ns,
                sampling_seed: b.seed,
                samples_file: format!("samples_{}.csv", b.label),
            })
            .collect(),
        files,
    }
}

pub fn simulate(config: &ExperimentConfig, out: &Path) -> CliResult<()> {
    config.validate()?;
    create_dir(out)?;
    let (prepared, _) = prepare(config)?;
    let branches = simulate_branches(config, &prepared)?;
    let files = branches
        .iter()
        .map(|b| write_samples(out, b))
        .collect::<CliResult<Vec<_>>>()?;
    for f in &files {
        println!("{}: {} records", out.join(&f.path).display(), f.records);
    }
    write_json(out, "manifest.json", &manifest("simulate", config, &branches, files))
}

#[derive(Serialize)]
struct Row {
    t_ns: f64,
    rho11: f64,
    abs_rho01: f64,
    arg_rho01: f64,
    w_min: f64,
    w_min_x: f64,
    w_min_p: f64,
    delta: f64,
    corrected_delta_min: f64,
    gamma_star: f64,
    loss: f64,
    sigma_deg: f64,
    discarded_weight: f64,
    fidelity: f64,
    iterations: usize,
    converged: bool,
}

const SUMMARY_HEADER: &str = "t_ns,rho11,abs_rho01,arg_rho01,w_min,w_min_x,w_min_p,delta,corrected_delta_min,gamma_star,loss,sigma_deg,discarded_weight,fidelity,iterations,converged";

impl Row {
    fn csv(&self) -> String {
        let f = [
            self.rho11,
            self.abs_rho01,
            self.arg_rho01,
            self.w_min,
            self.w_min_x,
            self.w_min_p,
            self.delta,
            self.corrected_delta_min,
            self.gamma_star,
            self.loss,
            self.sigma_deg,
            self.discarded_weight,
            self.fidelity,
        ]
        .iter()
        .map(|v| format!("{v:.8}"))
        .collect::<Vec<_>>()
        .join(",");
        format!("{},{f},{},{}", self.t_ns, self.iterations, self.converged)
    }
}

fn analyse_branch(
    config: &ExperimentConfig,
    opts: &MleOptions,
    reference: (f64, f64),
    k: usize,
    b: &Branch,
    out: &Path,
) -> CliResult<(Row, Vec<FileEntry>)> {
    let key = branch_key(k);
    let ctx = |stage: &str| format!("{key}: {stage}");
    let mle = mle_reconstruct(&b.samples, opts).at(&ctx("tomography"))?;
    if !mle.diagnostics.converged {
        log::warn!(
            "{key}: reconstruction stopped after {} iterations without converging",
            mle.diagnostics.iterations
        );
    }
    let rho = &mle.state;
    let a = &config.analysis;
    let w = a.wigner_half_width;
    let grid = wigner_grid(rho, (-w, w), (-w, w), a.wigner_step).at(&ctx("analysis.wigner_half_width"))?;
    let min = find_wigner_minimum(&grid).at(&ctx("analysis"))?;
    let curve = corrected_delta_curve(rho, &a.gammas, &WitnessOptions::default()).at(&ctx("analysis.gammas"))?;
    let best = curve.minimum().expect("gammas validated non-empty");
    let block = qubit_subspace(rho).at(&ctx("analysis"))?;
    let dec = estimate_loss_dephasing(rho, reference.0, reference.1).at(&ctx("analysis.alpha"))?;
    let truth = b.truth.truncate(opts.dim).at(&ctx("tomography.dim"))?;

    let state_file = format!("state_{}.json", b.label);
    let text = io::density_matrix_to_json(rho);
    write_with(out, &state_file, |w| Ok(writeln!(w, "{text}")?))?;
    let wigner_file = format!("wigner_{}.txt", b.label);
    write_with(out, &wigner_file, |w| io::write_wigner_grid(w, &grid))?;
    let witness_file = format!("witness_{}.csv", b.label);
    write_with(out, &witness_file, |w| io::write_witness_curve(w, &curve))?;

    let row = Row {
        t_ns: b.t_ns,
        rho11: rho.get(1, 1).re,
        abs_rho01: rho.get(0, 1).norm(),
        arg_rho01: rho.get(0, 1).arg(),
        w_min: min.value,
        w_min_x: min.point.x,
        w_min_p: min.point.p,
        delta: nongaussianity_delta(rho),
        corrected_delta_min: best.delta,
        gamma_star: best.gamma,
        loss: dec.loss,
        sigma_deg: dec.sigma.to_degrees(),
        discarded_weight: block.discarded_weight,
        fidelity: fidelity(rho, &truth).at(&ctx("tomography"))?,
        iterations: mle.diagnostics.iterations,
        converged: mle.diagnostics.converged,
    };
    let files = vec![
        FileEntry {
            path: state_file,
            records: 1,
        },
        FileEntry {
            path: wigner_file,
            records: grid.np,
        },
        FileEntry {
            path: witness_file,
            records: curve.points.len(),
        },
    ];
    Ok((row, files))
}

pub fn pipeline(config: &ExperimentConfig, out: &Path) -> CliResult<()> {
    config.validate()?;
    create_dir(out)?;
    let (prepared, reference) = prepare(config)?;
    let opts = config.mle_options()?;
    let branches = simulate_branches(config, &prepared)?;
    let analysed = branches
        .par_iter()
        .enumerate()
        .map(|(k, b)| {
            let samples = write_samples(out, b)?;
            let (row, mut files) = analyse_branch(config, &opts, reference, k, b, out)?;
            files.insert(0, samples);
            Ok((row, files))
        })
        .collect::<CliResult<Vec<_>>>()?;

    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    let mut files = Vec::new();
    for (row, f) in analysed {
        summary.push_str(&row.csv());
        summary.push('\n');
        println!(
            "t = {} ns: rho11 {:.4}, |rho01| {:.4}, W_min {:.4} at ({:.3}, {:.3}), L {:.3}, sigma {:.1} deg",
            row.t_ns, row.rho11, row.abs_rho01, row.w_min, row.w_min_x, row.w_min_p, row.loss, row.sigma_deg
        );
        files.extend(f);
    }
    write_with(out, "summary.csv", |w| Ok(w.write_all(summary.as_bytes())?))?;
    files.push(FileEntry {
        path: "summary.csv".into(),
        records: config.storage_times_ns.len(),
    });
    write_json(out, "manifest.json", &manifest("pipeline", config, &branches, files))
}

#[derive(Serialize)]
struct TomoReport<'a> {
    samples: usize,
    dim: usize,
    diagnostics: &'a cvmem::tomography::MleDiagnostics,
}

pub fn tomo(samples_path: &Path, opts: &MleOptions, out: &Path) -> CliResult<()> {
    let samples =
        io::read_samples(open("--samples", samples_path)?).map_err(|e| CliError::io("--samples", samples_path, e))?;
    create_dir(out)?;
    let res = mle_reconstruct(&samples, opts).at("--samples")?;
    let text = io::density_matrix_to_json(&res.state);
    write_with(out, "state.json", |w| Ok(writeln!(w, "{text}")?))?;
    write_json(
        out,
        "mle.json",
        &TomoReport {
            samples: samples.len(),
            dim: opts.dim.get(),
            diagnostics: &res.diagnostics,
        },
    )?;
    println!(
        "{} samples, {} iterations, converged {}, log-likelihood {:.6}",
        samples.len(),
        res.diagnostics.iterations,
        res.diagnostics.converged,
        res.diagnostics.log_likelihood
    );
    Ok(())
}

pub fn wigner(rho: &DensityMatrix, config: &ExperimentConfig, out: &Path) -> CliResult<()> {
    create_dir(out)?;
    let a = &config.analysis;
    let w = a.wigner_half_width;
    let grid = wigner_grid(rho, (-w, w), (-w, w), a.wigner_step).at("analysis.wigner_half_width")?;
    let min = find_wigner_minimum(&grid).at("analysis")?;
    write_with(out, "wigner.txt", |f| io::write_wigner_grid(f, &grid))?;
    write_json(out, "wigner_min.json", &min)?;
    println!(
        "W_min {:.6} at ({:.4}, {:.4}){}; grid integral {:.6}",
        min.value,
        min.point.x,
        min.point.p,
        if min.on_boundary { " on the grid boundary" } else { "" },
        grid.integral()
    );
    Ok(())
}

pub fn witness(rho: &DensityMatrix, config: &ExperimentConfig, out: &Path) -> CliResult<()> {
    create_dir(out)?;
    let curve =
        corrected_delta_curve(rho, &config.analysis.gammas, &WitnessOptions::default()).at("analysis.gammas")?;
    write_with(out, "witness.csv", |f| io::write_witness_curve(f, &curve))?;
    let best = curve.minimum().expect("non-empty gamma list");
    println!(
        "delta {:.6}; corrected minimum {:.6} at gamma {:.2} (phi {:.4} rad{})",
        nongaussianity_delta(rho),
        best.delta,
        best.gamma,
        curve.phi,
        if curve.phi_undefined { ", undefined" } else { "" }
    );
    Ok(())
}

#[derive(Serialize)]
struct DecompositionReport {
    alpha: f64,
    beta: f64,
    discarded_weight: f64,
    sigma_deg: f64,
    #[serde(flatten)]
    result: cvmem::analysis::DecompositionResult,
}

pub fn decompose(rho: &DensityMatrix, alpha: f64, beta: f64, out: &Path) -> CliResult<()> {
    create_dir(out)?;
    let block = qubit_subspace(rho).at("--state")?;
    let result = estimate_loss_dephasing(rho, alpha, beta).at("--alpha")?;
    write_json(
        out,
        "decomposition.json",
        &DecompositionReport {
            alpha,
            beta,
            discarded_weight: block.discarded_weight,
            sigma_deg: result.sigma.to_degrees(),
            result,
        },
    )?;
    println!(
        "L {:.6}, sigma {:.4} deg, discarded weight {:.4}",
        result.loss,
        result.sigma.to_degrees(),
        block.discarded_weight
    );
    Ok(())
}

pub fn temporal_mode(traces_path: &Path, out: &Path) -> CliResult<()> {
    let traces =
        io::read_traces_binary(open("--traces", traces_path)?).map_err(|e| CliError::io("--traces", traces_path, e))?;
    create_dir(out)?;
    let mode = extract_temporal_mode(&traces).at("--traces")?;
    let trace = RawTrace {
        grid: *mode.grid(),
        values: mode.weights().to_vec(),
    };
    write_with(out, "temporal_mode.csv", |f| io::write_trace_text(f, &trace))?;
    println!("{} traces; envelope peaks at {} ns", traces.len(), mode.peak_time());
    Ok(())
}

pub fn default_out(config: &ExperimentConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("cvmem-out"))
}
