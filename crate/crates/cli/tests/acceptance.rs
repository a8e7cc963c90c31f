//! Acceptance check for the command-line driver: identical manifests give
//! byte-identical curves, and both exponent columns change sign around the
//! mutual information.

mod common;

use std::process::ExitCode;

use common::*;

fn check() -> Result<String, String> {
    let d = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = write_config(d.path(), "c.json", BSC_CURVES);
    let a = run_ok("curves", &cfg, &d.path().join("a"), Some(1));
    let b = run_ok("curves", &cfg, &d.path().join("b"), Some(4));
    let manifest = a.join("curves.manifest.json");
    let r = d.path().join("r");
    let o = nts(
        &["replay", "--manifest", manifest.to_str().unwrap(), "--out", r.to_str().unwrap()],
        None,
    );
    if o.code != 0 {
        return Err(format!("replay exited {}: {}", o.code, o.stderr));
    }
    let bytes = |p: std::path::PathBuf| std::fs::read(p).map_err(|e| e.to_string());
    let base = bytes(a.join("curves.csv"))?;
    if base != bytes(b.join("curves.csv"))? || base != bytes(r.join("curves.csv"))? {
        return Err("curves.csv differs between runs".into());
    }

    let (_, rows) = read_csv(&a.join("curves.csv"));
    let parse = |s: &str| s.parse::<f64>().map_err(|e| format!("{s}: {e}"));
    let mut pts = Vec::new();
    for row in &rows {
        pts.push((parse(&row[0])?, parse(&row[1])?, parse(&row[2])?));
    }
    let info = bsc_capacity();
    // Last rate with a positive error exponent, first with a positive
    // correct-decoding exponent.
    let err_hi = pts.iter().filter(|p| p.1 > 0.0).map(|p| p.0).fold(f64::NAN, f64::max);
    let err_zero = pts.iter().filter(|p| p.1 <= 0.0).map(|p| p.0).fold(f64::NAN, f64::min);
    let corr_zero = pts.iter().filter(|p| p.2 <= 0.0).map(|p| p.0).fold(f64::NAN, f64::max);
    let corr_lo = pts.iter().filter(|p| p.2 > 0.0).map(|p| p.0).fold(f64::NAN, f64::min);
    let ok = err_hi < info && info <= err_zero && corr_zero <= info && info < corr_lo;
    let detail = format!(
        "I={info:.6}; error exponent vanishes in ({err_hi}, {err_zero}], correct-decoding exponent rises in [{corr_zero}, {corr_lo}); {} bytes identical x3",
        base.len()
    );
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() -> ExitCode {
    match std::panic::catch_unwind(check) {
        Ok(Ok(detail)) => {
            println!("criterion 10: PASS [cli determinism and sign changes] {detail}");
            ExitCode::SUCCESS
        }
        Ok(Err(detail)) => {
            println!("criterion 10: FAIL [cli determinism and sign changes] {detail}");
            ExitCode::FAILURE
        }
        Err(_) => {
            println!("criterion 10: FAIL [cli determinism and sign changes] panicked");
            ExitCode::FAILURE
        }
    }
}
