//! Text and binary file formats.
//!
//! Floats are written with `{:.16e}` (17 significant digits), which
//! round-trips every `f64` exactly.
//!
//! Binary trace block layout, little-endian:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "CVTR"
//!      4     4  version (u32, currently 1)
//!      8     4  n_traces (u32)
//!     12     4  n_bins (u32)
//!     16     8  start time, ns (f64)
//!     24     8  bin width, ns (f64)
//!     32   8·n  samples (f64), trace-major
//! ```

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::analysis::{WignerGrid, WitnessCurve, WitnessPoint};
use crate::error::{Error, Result};
use crate::fock::{CMatrix, DensityMatrix};
use crate::homodyne::{QuadratureSample, RawTrace, TimeGrid};
use crate::Complex64;

pub const SAMPLES_HEADER: &str = "# theta_rad,x";
pub const TRACE_HEADER: &str = "# t_ns,value";
pub const WITNESS_HEADER: &str = "# gamma,zeta_opt,delta";
pub const TRACE_MAGIC: [u8; 4] = *b"CVTR";
pub const TRACE_VERSION: u32 = 1;

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("line {line}: `{}`: {e}", field.trim())))
}

/// Non-empty, non-comment lines with their 1-based numbers.
fn data_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader.lines().enumerate().filter_map(|(i, l)| match l {
        Err(e) => Some(Err(Error::Io(e))),
        Ok(s) if s.trim().is_empty() || s.trim_start().starts_with('#') => None,
        Ok(s) => Some(Ok((i + 1, s))),
    })
}

#[derive(Serialize, Deserialize)]
struct DensityMatrixRecord {
    dim: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

/// `{"dim": d, "re": [...], "im": [...]}`, both arrays row-major.
pub fn density_matrix_to_json(rho: &DensityMatrix) -> String {
    let d = rho.dim().get();
    let fmt = |part: fn(Complex64) -> f64| {
        let mut out = String::new();
        for m in 0..d {
            for n in 0..d {
                if !out.is_empty() {
                    out.push_str(", ");
                }
                out.push_str(&format!("{:.16e}", part(rho.get(m, n))));
            }
        }
        out
    };
    format!(
        "{{\n  \"dim\": {d},\n  \"re\": [{}],\n  \"im\": [{}]\n}}\n",
        fmt(|c| c.re),
        fmt(|c| c.im)
    )
}

pub fn density_matrix_from_json(text: &str) -> Result<DensityMatrix> {
    let rec: DensityMatrixRecord = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let d = rec.dim;
    if rec.re.len() != d * d || rec.im.len() != d * d {
        return Err(Error::Parse(format!(
            "dim {d} needs {} entries, got {} real and {} imaginary",
            d * d,
            rec.re.len(),
            rec.im.len()
        )));
    }
    DensityMatrix::new(CMatrix::from_fn(d, d, |m, n| {
        Complex64::new(rec.re[m * d + n], rec.im[m * d + n])
    }))
}

pub fn write_samples<W: Write>(mut w: W, samples: &[QuadratureSample]) -> Result<()> {
    writeln!(w, "{SAMPLES_HEADER}")?;
    for s in samples {
        writeln!(w, "{:.16e},{:.16e}", s.theta, s.x)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples<R: BufRead>(reader: R) -> Result<Vec<QuadratureSample>> {
    let mut out = Vec::new();
    for item in data_lines(reader) {
        let (n, line) = item?;
        let mut fields = line.split(',');
        let (Some(t), Some(x), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Parse(format!("line {n}: expected `theta_rad,x`")));
        };
        out.push(QuadratureSample::new(parse_f64(t, n)?, parse_f64(x, n)?));
    }
    Ok(out)
}

pub fn write_trace_text<W: Write>(mut w: W, trace: &RawTrace) -> Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for (i, v) in trace.values.iter().enumerate() {
        writeln!(w, "{:.16e},{:.16e}", trace.grid.time(i), v)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `t_ns,value` lines; the times must form a uniform grid.
pub fn read_trace_text<R: BufRead>(reader: R) -> Result<RawTrace> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    for item in data_lines(reader) {
        let (n, line) = item?;
        let Some((t, v)) = line.split_once(',') else {
            return Err(Error::Parse(format!("line {n}: expected `t_ns,value`")));
        };
        times.push(parse_f64(t, n)?);
        values.push(parse_f64(v, n)?);
    }
    if times.len() < 2 {
        return Err(Error::EmptyInput("trace"));
    }
    let step = times[1] - times[0];
    let grid = TimeGrid::new(times[0], step, times.len())?;
    for (i, t) in times.iter().enumerate() {
        if (t - grid.time(i)).abs() > 1e-9 * step.abs().max(1.0) {
            return Err(Error::GridMismatch(format!(
                "trace time {t} breaks the uniform {step} ns grid"
            )));
        }
    }
    Ok(RawTrace { grid, values })
}

pub fn write_traces_binary<W: Write>(mut w: W, traces: &[RawTrace]) -> Result<()> {
    let Some(first) = traces.first() else {
        return Err(Error::EmptyInput("traces"));
    };
    let grid = first.grid;
    let count = |n: usize, what: &str| {
        u32::try_from(n).map_err(|_| Error::Parse(format!("{what} {n} does not fit the header")))
    };
    w.write_all(&TRACE_MAGIC)?;
    w.write_all(&TRACE_VERSION.to_le_bytes())?;
    w.write_all(&count(traces.len(), "trace count")?.to_le_bytes())?;
    w.write_all(&count(grid.len, "bin count")?.to_le_bytes())?;
    w.write_all(&grid.start_ns.to_le_bytes())?;
    w.write_all(&grid.step_ns.to_le_bytes())?;
    for t in traces {
        if t.grid != grid || t.values.len() != grid.len {
            return Err(Error::GridMismatch("traces in one block must share a grid".into()));
        }
        for v in &t.values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_traces_binary<R: Read>(mut r: R) -> Result<Vec<RawTrace>> {
    let mut header = [0u8; 32];
    r.read_exact(&mut header)?;
    if header[..4] != TRACE_MAGIC {
        return Err(Error::Parse("not a trace block (bad magic)".into()));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().expect("4 bytes"));
    let float = |i: usize| f64::from_le_bytes(header[i..i + 8].try_into().expect("8 bytes"));
    let version = word(4);
    if version != TRACE_VERSION {
        return Err(Error::Parse(format!("unsupported trace block version {version}")));
    }
    let (n_traces, n_bins) = (word(8) as usize, word(12) as usize);
    let grid = TimeGrid::new(float(16), float(24), n_bins)?;
    let mut buf = vec![0u8; n_bins * 8];
    let mut out = Vec::with_capacity(n_traces);
    for _ in 0..n_traces {
        r.read_exact(&mut buf)?;
        let values = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        out.push(RawTrace { grid, values });
    }
    Ok(out)
}

/// Header `# x_min x_max p_min p_max step`, then one line per `p` value.
pub fn write_wigner_grid<W: Write>(mut w: W, grid: &WignerGrid) -> Result<()> {
    writeln!(w, "# x_min x_max p_min p_max step")?;
    writeln!(
        w,
        "# {:.16e} {:.16e} {:.16e} {:.16e} {:.16e}",
        grid.x_min, grid.x_max, grid.p_min, grid.p_max, grid.step
    )?;
    for j in 0..grid.np {
        let row: Vec<String> = (0..grid.nx).map(|i| format!("{:.16e}", grid.value(i, j))).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_wigner_grid<R: BufRead>(reader: R) -> Result<WignerGrid> {
    let mut meta: Option<[f64; 5]> = None;
    let mut values = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        let body = line.trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('#') {
            let fields: Vec<&str> = rest.split_whitespace().collect();
            if meta.is_none() && fields.len() == 5 && fields[0] != "x_min" {
                let mut m = [0.0; 5];
                for (slot, f) in m.iter_mut().zip(&fields) {
                    *slot = parse_f64(f, n)?;
                }
                meta = Some(m);
            }
            continue;
        }
        for f in body.split_whitespace() {
            values.push(parse_f64(f, n)?);
        }
    }
    let Some([x_min, x_max, p_min, p_max, step]) = meta else {
        return Err(Error::Parse("missing grid header values".into()));
    };
    WignerGrid::new((x_min, x_max), (p_min, p_max), step, values)
}

/// Header lines, then `gamma,zeta_opt,delta` per point. The dip direction
/// goes in a `# phi_rad` comment.
pub fn write_witness_curve<W: Write>(mut w: W, curve: &WitnessCurve) -> Result<()> {
    writeln!(w, "{WITNESS_HEADER}")?;
    writeln!(
        w,
        "# phi_rad {:.16e}{}",
        curve.phi,
        if curve.phi_undefined { " undefined" } else { "" }
    )?;
    for p in &curve.points {
        writeln!(w, "{:.16e},{:.16e},{:.16e}", p.gamma, p.zeta_opt, p.delta)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_witness_curve<R: BufRead>(reader: R) -> Result<WitnessCurve> {
    let mut phi = 0.0;
    let mut phi_undefined = false;
    let mut points = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        let body = line.trim();
        if let Some(rest) = body.strip_prefix("# phi_rad") {
            let mut f = rest.split_whitespace();
            phi = parse_f64(f.next().unwrap_or(""), n)?;
            phi_undefined = f.next() == Some("undefined");
            continue;
        }
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = body.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!("line {n}: expected `gamma,zeta_opt,delta`")));
        }
        points.push(WitnessPoint {
            gamma: parse_f64(fields[0], n)?,
            zeta_opt: parse_f64(fields[1], n)?,
            phi,
            delta: parse_f64(fields[2], n)?,
        });
    }
    Ok(WitnessCurve {
        phi,
        phi_undefined,
        points,
    })
}
