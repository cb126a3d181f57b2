//! CSV tables and JSON documents. Floats in CSV are written with 17
//! significant digits so every table re-parses to the same values.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::KernelPair;
use crate::spectrum::{EigenSubsequences, Spectrum};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_path(path)?)
}

fn parse_f64(s: &str, row: usize, col: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::input(format!("row {row}, column {col}"), format!("not a number: {s:?}")))
}

fn parse_usize(s: &str, row: usize, col: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::input(format!("row {row}, column {col}"), format!("not an index: {s:?}")))
}

fn check_header(rdr: &mut csv::Reader<File>, expected: &[&str]) -> Result<()> {
    let h = rdr.headers()?;
    let got: Vec<&str> = h.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::input("header", format!("expected columns {expected:?}, found {got:?}")));
    }
    Ok(())
}

/// Columns `k, j, rho, lambda, cluster_flag`.
pub fn write_spectrum_csv(path: &Path, spec: &Spectrum) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["k", "j", "rho", "lambda", "cluster_flag"])?;
    for (k, j, rho, cluster) in spec.entries() {
        w.write_record([
            k.to_string(),
            j.to_string(),
            fmt_f64(rho),
            fmt_f64(rho * rho),
            u8::from(cluster).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_spectrum_csv`]. The table does not carry `A_l`.
pub fn read_spectrum_csv(path: &Path, a_l: f64) -> Result<Spectrum> {
    let mut rdr = csv::Reader::from_path(path)?;
    check_header(&mut rdr, &["k", "j", "rho", "lambda", "cluster_flag"])?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        rows.push((
            parse_usize(&rec[0], row, "k")?,
            parse_usize(&rec[1], row, "j")?,
            parse_f64(&rec[2], row, "rho")?,
            parse_usize(&rec[4], row, "cluster_flag")? != 0,
        ));
    }
    let p = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
    let k_max = rows.iter().map(|r| r.0).max().unwrap_or(0);
    if rows.len() != p * k_max {
        return Err(Error::input("spectrum", format!("expected {} rows for p = {p}, k_max = {k_max}", p * k_max)));
    }
    let mut branches = vec![vec![f64::NAN; k_max]; p];
    let mut flags = vec![vec![false; k_max]; p];
    for (k, j, rho, c) in rows {
        if k == 0 {
            return Err(Error::input("k", "indices start at 1"));
        }
        branches[j][k - 1] = rho;
        flags[j][k - 1] = c;
    }
    if branches.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::input("spectrum", "missing (k, j) entries"));
    }
    Ok(Spectrum {
        branches,
        cluster_flags: flags,
        a_l,
        k_max,
    })
}

/// Columns `k, j, mu`; `j = 0` is the near-integer sequence.
pub fn write_eigen_csv(path: &Path, mu: &EigenSubsequences) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["k", "j", "mu"])?;
    for k in 0..mu.k_max() {
        w.write_record([(k + 1).to_string(), "0".into(), fmt_f64(mu.mu0[k])])?;
        w.write_record([(k + 1).to_string(), "1".into(), fmt_f64(mu.mu1[k])])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_eigen_csv(path: &Path) -> Result<EigenSubsequences> {
    let mut rdr = csv::Reader::from_path(path)?;
    check_header(&mut rdr, &["k", "j", "mu"])?;
    let mut seqs: [Vec<Option<f64>>; 2] = [Vec::new(), Vec::new()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let k = parse_usize(&rec[0], row, "k")?;
        let j = parse_usize(&rec[1], row, "j")?;
        let mu = parse_f64(&rec[2], row, "mu")?;
        if k == 0 || j > 1 {
            return Err(Error::input(format!("row {row}"), "need k >= 1 and j in {0, 1}"));
        }
        let seq = &mut seqs[j];
        if seq.len() < k {
            seq.resize(k, None);
        }
        if seq[k - 1].replace(mu).is_some() {
            return Err(Error::input(format!("row {row}"), format!("duplicate entry for k = {k}, j = {j}")));
        }
    }
    let complete = |j: usize| -> Result<Vec<f64>> {
        seqs[j]
            .iter()
            .enumerate()
            .map(|(k, v)| v.ok_or_else(|| Error::input("eigenvalues", format!("missing k = {}, j = {j}", k + 1))))
            .collect()
    };
    let mu0 = complete(0)?;
    let mu1 = complete(1)?;
    if mu0.len() != mu1.len() {
        return Err(Error::input("eigenvalues", "both subsequences must have the same length"));
    }
    Ok(EigenSubsequences {
        mu0,
        mu1,
        provenance: (1, 0),
    })
}

/// Columns `rho, lambda, delta`.
pub fn write_charfn_csv(path: &Path, rows: &[(f64, f64)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["rho", "lambda", "delta"])?;
    for &(rho, d) in rows {
        w.write_record([fmt_f64(rho), fmt_f64(rho * rho), fmt_f64(d)])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `t, N, W`, one row per grid node.
pub fn write_kernels_csv(path: &Path, pair: &KernelPair) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "N", "W"])?;
    for ((t, n), wv) in pair.nodes().zip(&pair.n).zip(&pair.w) {
        w.write_record([fmt_f64(t), fmt_f64(*n), fmt_f64(*wv)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_kernels_csv(path: &Path) -> Result<KernelPair> {
    let mut rdr = csv::Reader::from_path(path)?;
    check_header(&mut rdr, &["t", "N", "W"])?;
    let (mut n, mut w) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        n.push(parse_f64(&rec[1], i + 1, "N")?);
        w.push(parse_f64(&rec[2], i + 1, "W")?);
    }
    KernelPair::from_samples(n, w)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialFn;

    #[test]
    fn spectrum_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let spec = Spectrum {
            branches: vec![vec![0.5, 1.5 + 1e-13], vec![1.0, 2.0 / 3.0 + 1.0]],
            cluster_flags: vec![vec![false, false], vec![true, false]],
            a_l: 0.25,
            k_max: 2,
        };
        write_spectrum_csv(&path, &spec).unwrap();
        assert_eq!(read_spectrum_csv(&path, 0.25).unwrap(), spec);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("k,j,rho,lambda,cluster_flag\n1,0,5.0000000000000000e-1,"));
    }

    #[test]
    fn empty_spectrum_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let spec = Spectrum {
            branches: vec![vec![], vec![]],
            cluster_flags: vec![vec![], vec![]],
            a_l: 0.0,
            k_max: 0,
        };
        write_spectrum_csv(&path, &spec).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "k,j,rho,lambda,cluster_flag\n");
    }

    #[test]
    fn eigen_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mu.csv");
        let mu = EigenSubsequences {
            mu0: vec![1.0 + 1.0 / 3.0, 2.1],
            mu1: vec![0.5, std::f64::consts::PI],
            provenance: (1, 0),
        };
        write_eigen_csv(&path, &mu).unwrap();
        assert_eq!(read_eigen_csv(&path).unwrap(), mu);
        std::fs::write(&path, "k,j,mu\n1,0,1.0\n2,0,2.0\n1,1,0.5\n").unwrap();
        assert!(read_eigen_csv(&path).is_err());
        std::fs::write(&path, "k,j,lambda\n1,0,1.0\n").unwrap();
        assert!(read_eigen_csv(&path).unwrap_err().to_string().contains("header"));
    }

    #[test]
    fn kernels_have_m_plus_one_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.csv");
        let q = PotentialFn::from_fn(128, |t| t.sin()).unwrap();
        let pair = crate::kernel::kernel_pair(&q, &[1.0]).unwrap();
        write_kernels_csv(&path, &pair).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + 129);
        let back = read_kernels_csv(&path).unwrap();
        assert_eq!(back.n, pair.n);
        assert_eq!(back.w, pair.w);
    }
}
