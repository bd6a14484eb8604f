//! On-disk artifacts: ledger CSV, operator checkpoints, plot-ready
//! two-column files, and the run summary JSON.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use hartree_dm_core::{DiagnosticLedger, Grid, HermitianOperator, MatrixOperator};
use num_complex::Complex64 as C64;

use crate::error::{RunnerError, RunnerResult};

/// Serializes a float losslessly (17 significant digits).
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Fixed CSV column order: time, then the scalar ledger entries.
pub fn ledger_csv_header() -> String {
    let names: Vec<&str> = DiagnosticLedger::default()
        .entries()
        .iter()
        .map(|(name, _)| *name)
        .collect();
    format!("time,{}\n", names.join(","))
}

pub fn ledger_csv_row(time: f64, ledger: &DiagnosticLedger) -> String {
    let mut fields = vec![format_float(time)];
    for (_, value) in ledger.entries() {
        fields.push(value.map(format_float).unwrap_or_default());
    }
    format!("{}\n", fields.join(","))
}

pub fn write_ledger_csv(
    path: &Path,
    times: &[f64],
    ledgers: &[DiagnosticLedger],
) -> RunnerResult<()> {
    let mut out = String::from(ledger_csv_header());
    for (t, ledger) in times.iter().zip(ledgers) {
        out.push_str(&ledger_csv_row(*t, ledger));
    }
    fs::write(path, out)?;
    Ok(())
}

/// One two-column (time, value) file per diagnostic that has data.
pub fn write_plot_files(
    dir: &Path,
    times: &[f64],
    ledgers: &[DiagnosticLedger],
) -> RunnerResult<()> {
    fs::create_dir_all(dir)?;
    let names: Vec<&'static str> = DiagnosticLedger::default()
        .entries()
        .iter()
        .map(|(name, _)| *name)
        .collect();
    for (column, name) in names.iter().enumerate() {
        let mut body = String::new();
        for (t, ledger) in times.iter().zip(ledgers) {
            if let Some(v) = ledger.entries()[column].1 {
                body.push_str(&format!("{} {}\n", format_float(*t), format_float(v)));
            }
        }
        if !body.is_empty() {
            fs::write(dir.join(format!("{name}.dat")), body)?;
        }
    }
    Ok(())
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"HDM1";

/// Binary operator checkpoint: magic "HDM1", then little-endian
/// `u32` dimension, `f64` box side, `u32` modes per dimension, `u64` mode
/// count, and the matrix entries as interleaved (re, im) `f64` pairs in
/// row-major flat-index order.
pub fn write_checkpoint(path: &Path, op: &HermitianOperator) -> RunnerResult<()> {
    let grid = op.as_matrix().grid();
    let n = grid.mode_count();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&(grid.dim() as u32).to_le_bytes())?;
    w.write_all(&grid.box_len().to_le_bytes())?;
    w.write_all(&(grid.modes_per_dim() as u32).to_le_bytes())?;
    w.write_all(&(n as u64).to_le_bytes())?;
    for i in 0..n {
        for j in 0..n {
            let z = op.as_matrix().entry(i, j);
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path, grid: &Grid) -> RunnerResult<HermitianOperator> {
    let mut bytes = Vec::new();
    File::open(path)
        .map_err(|e| RunnerError::Config(format!("cannot open checkpoint {}: {e}", path.display())))?
        .read_to_end(&mut bytes)?;
    let bad = |msg: &str| RunnerError::Config(format!("checkpoint {}: {msg}", path.display()));
    if bytes.len() < 24 || &bytes[0..4] != CHECKPOINT_MAGIC {
        return Err(bad("missing HDM1 header"));
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let box_len = f64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let modes = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[20..28].try_into().unwrap()) as usize;
    if dim != grid.dim()
        || modes != grid.modes_per_dim()
        || (box_len - grid.box_len()).abs() > 1e-12 * (1.0 + grid.box_len())
    {
        return Err(bad("grid header does not match the configured grid"));
    }
    if count != grid.mode_count() {
        return Err(bad("mode count does not match the configured grid"));
    }
    let expected = 28 + 16 * count * count;
    if bytes.len() != expected {
        return Err(bad("truncated or oversized payload"));
    }
    let mut op = MatrixOperator::zeros(grid.clone());
    let mut offset = 28;
    for i in 0..count {
        for j in 0..count {
            let re = f64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap());
            let im = f64::from_le_bytes(bytes[offset + 8..offset + 16].try_into().unwrap());
            op.data_mut()[(i, j)] = C64::new(re, im);
            offset += 16;
        }
    }
    let defect = op.hermiticity_defect();
    if defect > 1e-10 * (1.0 + op.max_entry()) {
        return Err(bad("stored operator is not Hermitian"));
    }
    Ok(HermitianOperator::symmetrize(op))
}

pub fn write_summary(path: &Path, summary: &serde_json::Value) -> RunnerResult<()> {
    let mut text = serde_json::to_string_pretty(summary)
        .map_err(|e| RunnerError::Numerical(format!("summary serialization failed: {e}")))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
