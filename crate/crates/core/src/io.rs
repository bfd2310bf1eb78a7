//! Flat CSV tables and JSON documents for every pipeline output.
//!
//! A JSON document is `{"metadata", "data", "diagnostics"}`; its row arrays
//! carry the same columns as the CSV tables (see `docs/schema.md`).

use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::eigen::{AsymptoticReport, EigenvalueTable, Parity};
use crate::quasimomentum::QProfile;
use crate::spectrum::{BranchReality, SheetVerdict, SpectralScan};
use crate::verify::VerifyReport;
use crate::{Diagnostic, Error, Potential};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metadata {
    pub command: String,
    pub version: &'static str,
    /// SHA-256 of the canonical JSON form of the potential.
    pub potential_hash: String,
    pub resolution: usize,
    pub tolerances: BTreeMap<String, f64>,
}

impl Metadata {
    pub fn new(command: &str, p: &Potential, tolerances: &[(&str, f64)]) -> Self {
        Metadata {
            command: command.to_string(),
            version: VERSION,
            potential_hash: potential_hash(p),
            resolution: p.resolution,
            tolerances: tolerances.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

pub fn potential_hash(p: &Potential) -> String {
    Sha256::digest(p.to_json().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    metadata: &'a Metadata,
    data: &'a T,
    diagnostics: &'a [Diagnostic],
}

pub fn json_document<T: Serialize>(meta: &Metadata, data: &T, diagnostics: &[Diagnostic]) -> Result<String, Error> {
    let doc = Document { metadata: meta, data, diagnostics };
    let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn csv_table<T: Serialize>(rows: &[T]) -> Result<String, Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn finite(what: &'static str, xs: &[f64]) -> Result<(), Error> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub lambda: f64,
    pub disc: f64,
    pub disc_im: f64,
    pub phi: f64,
    pub t_abs: f64,
    pub multiplicity: u8,
    pub unimodular: usize,
    pub boundary: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapRow {
    pub lower: f64,
    pub upper: f64,
    pub width: f64,
    pub truncated_lower: bool,
    pub truncated_upper: bool,
    pub branch: BranchReality,
}

pub fn scan_rows(scan: &SpectralScan) -> Result<Vec<ScanRow>, Error> {
    scan.points
        .iter()
        .map(|s| {
            finite("scan row", &[s.lambda, s.disc, s.disc_im, s.phi, s.t_abs])?;
            Ok(ScanRow {
                lambda: s.lambda,
                disc: s.disc,
                disc_im: s.disc_im,
                phi: s.phi,
                t_abs: s.t_abs,
                multiplicity: s.multiplicity,
                unimodular: s.unimodular,
                boundary: s.boundary,
            })
        })
        .collect()
}

pub fn gap_rows(scan: &SpectralScan) -> Result<Vec<GapRow>, Error> {
    scan.gaps
        .iter()
        .map(|g| {
            finite("gap row", &[g.lower, g.upper])?;
            Ok(GapRow {
                lower: g.lower,
                upper: g.upper,
                width: g.width(),
                truncated_lower: g.truncated_lower,
                truncated_upper: g.truncated_upper,
                branch: g.branch,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EigenRow {
    pub n: i64,
    pub j: usize,
    pub re: f64,
    pub im: f64,
    pub parity: Parity,
    pub residual: f64,
    /// `|v_hat(-pi n)|`; empty when no asymptotic report was attached.
    pub v_hat: Option<f64>,
    /// `|z - pi n - zeta_j |v_hat||`.
    pub deviation: Option<f64>,
}

pub fn eigen_rows(table: &EigenvalueTable, asym: Option<&AsymptoticReport>) -> Result<Vec<EigenRow>, Error> {
    let mut out = Vec::with_capacity(table.entries.len());
    for e in &table.entries {
        let row = asym.and_then(|a| a.rows.iter().find(|r| r.n == e.n));
        // deviations are listed by increasing Re z within the cluster
        let rank = table
            .entries
            .iter()
            .filter(|f| f.n == e.n && (f.z.re, f.j) < (e.z.re, e.j))
            .count();
        let deviation = row.and_then(|r| r.deviations.get(rank).copied());
        finite("eigen row", &[e.z.re, e.z.im, e.residual])?;
        finite("eigen row", &[row.map_or(0.0, |r| r.v_hat), deviation.unwrap_or(0.0)])?;
        out.push(EigenRow {
            n: e.n,
            j: e.j,
            re: e.z.re,
            im: e.z.im,
            parity: e.parity,
            residual: e.residual,
            v_hat: row.map(|r| r.v_hat),
            deviation,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QRow {
    pub lambda: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub q_avg: f64,
    /// Index into the gap list, empty in bands.
    pub gap: Option<usize>,
}

pub fn q_rows(profile: &QProfile) -> Result<Vec<QRow>, Error> {
    profile
        .grid
        .iter()
        .zip(&profile.q_branches)
        .zip(&profile.q_avg)
        .zip(&profile.gap_attribution)
        .map(|(((&lambda, q), &q_avg), &gap)| {
            finite("q row", &[lambda, q[0], q[1], q[2], q_avg])?;
            Ok(QRow { lambda, q1: q[0], q2: q[1], q3: q[2], q_avg, gap })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CheckRow {
    pub name: &'static str,
    pub passed: bool,
    pub worst: f64,
    pub tol: f64,
    pub samples: usize,
    pub at_re: Option<f64>,
    pub at_im: Option<f64>,
}

pub fn check_rows(report: &VerifyReport) -> Vec<CheckRow> {
    report
        .checks
        .iter()
        .map(|c| CheckRow {
            name: c.name,
            passed: c.passed,
            // a non-finite residual already failed its check; keep the field finite
            worst: if c.worst.is_finite() { c.worst } else { f64::MAX },
            tol: c.tol,
            samples: c.samples,
            at_re: c.at.map(|a| a[0]),
            at_im: c.at.map(|a| a[1]),
        })
        .collect()
}

/// Fixed-width pass/fail matrix for terminals.
pub fn check_matrix(report: &VerifyReport) -> String {
    let mut s = format!("{:<22} {:<6} {:>12} {:>10} {:>8}\n", "check", "result", "worst", "tol", "samples");
    for c in &report.checks {
        s.push_str(&format!(
            "{:<22} {:<6} {:>12.3e} {:>10.1e} {:>8}\n",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.worst,
            c.tol,
            c.samples
        ));
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SheetRow {
    pub sheets: u8,
    pub sup_phi: f64,
    pub sup_t: f64,
    pub beta1: f64,
    pub rank_one: bool,
}

pub fn sheet_row(v: &SheetVerdict) -> Result<SheetRow, Error> {
    let e = &v.evidence;
    finite("sheet row", &[e.sup_phi, e.sup_t, e.beta1])?;
    Ok(SheetRow { sheets: v.sheets, sup_phi: e.sup_phi, sup_t: e.sup_t, beta1: e.beta1, rank_one: e.rank_one })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_distinguishes() {
        let a = Potential::zero();
        let b = Potential::zero().with_resolution(64).unwrap();
        assert_eq!(potential_hash(&a), potential_hash(&a.clone()));
        assert_ne!(potential_hash(&a), potential_hash(&b));
        assert_eq!(potential_hash(&a).len(), 64);
    }

    #[test]
    fn csv_header_and_empty_options() {
        let rows = [QRow { lambda: 0.5, q1: 0.0, q2: 1.0, q3: 2.0, q_avg: 1.0, gap: None }];
        let s = csv_table(&rows).unwrap();
        assert_eq!(s, "lambda,q1,q2,q3,q_avg,gap\n0.5,0.0,1.0,2.0,1.0,\n");
    }

    #[test]
    fn non_finite_rows_are_rejected() {
        assert!(finite("x", &[1.0, f64::NAN]).is_err());
        assert!(finite("x", &[1.0, 2.0]).is_ok());
    }
}
