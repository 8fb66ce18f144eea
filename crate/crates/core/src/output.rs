//! Tables for CSV output with fixed 17-significant-digit formatting, and
//! the JSON metadata written next to every table.

use serde::Serialize;
use serde_json::{json, Value};

use crate::dispersion::Curve;
use crate::error::{Error, Result};
use crate::neutral_modes::NeutralMode;
use crate::singular_limits::SpectralCoefficientLambda;
use crate::vortex_sheet::{GluedSolution, SheetScan, SheetSetup};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(x) if x.is_nan() => "NaN".into(),
            Cell::Float(x) => format!("{x:.16e}"),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<i64> for Cell {
    fn from(i: i64) -> Self {
        Cell::Int(i)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.into())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::ShapeMismatch { expected: self.header.len(), got: row.len() });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(|e| Error::Output(e.to_string()))?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(|e| Error::Output(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Output(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Output(e.to_string()))
    }
}

/// `{"version", "config", "results"}`.
pub fn metadata<C: Serialize>(config: &C, results: Value) -> Result<Value> {
    let config = serde_json::to_value(config).map_err(|e| Error::Output(e.to_string()))?;
    Ok(json!({ "version": VERSION, "config": config, "results": results }))
}

pub fn neutral_table(mode: &NeutralMode) -> Result<Table> {
    let mut t = Table::new(&["y", "phi"]);
    for (y, p) in mode.grid.nodes.iter().zip(&mode.phi) {
        t.push(vec![(*y).into(), (*p).into()])?;
    }
    Ok(t)
}

pub fn neutral_summary(mode: &NeutralMode) -> Value {
    json!({ "alpha_sq": mode.alpha_sq, "residual": mode.residual, "normalization": mode.normalization, "n": mode.grid.n })
}

pub fn lambda_table(lambda: &SpectralCoefficientLambda) -> Result<Table> {
    let mut t = Table::new(&["tau", "re_gamma", "im_gamma"]);
    for (tau, g) in &lambda.table {
        t.push(vec![(*tau).into(), g.re.into(), g.im.into()])?;
    }
    Ok(t)
}

pub fn lambda_summary(lambda: &SpectralCoefficientLambda) -> Value {
    json!({
        "C": lambda.c,
        "imag": lambda.imag,
        "order": lambda.order,
        "extrapolation_error": lambda.extrapolation_error,
        "imag_closed_form": lambda.imag_cf,
        "C_closed_form": lambda.c_cf,
        "imag_discrepancy": lambda.imag_discrepancy,
        "C_discrepancy": lambda.c_discrepancy,
    })
}

pub fn dispersion_table(curve: &Curve) -> Result<Table> {
    let mut t = Table::new(&[
        "eps", "re_c", "im_c", "g_residual", "winding", "pencil_re_c", "pencil_im_c", "growth_rate", "iterations", "status",
    ]);
    for p in &curve.points {
        let pencil = p.pencil_c.unwrap_or(num_complex::Complex64::new(f64::NAN, f64::NAN));
        let status = match &p.failure {
            None => "ok".to_string(),
            Some(f) => format!("failed: {f}"),
        };
        t.push(vec![
            p.eps.into(),
            p.c.re.into(),
            p.c.im.into(),
            p.g_residual.into(),
            p.winding.into(),
            pencil.re.into(),
            pencil.im.into(),
            p.growth_rate.into(),
            (p.iterations as i64).into(),
            Cell::Text(status),
        ])?;
    }
    Ok(t)
}

pub fn sheet_table(scan: &SheetScan) -> Result<Table> {
    let mut t = Table::new(&[
        "k", "alpha_tilde", "alpha_ratio", "eps", "im_c_channel", "im_c_glued", "growth_rate", "psi_h1", "phiout_z", "residual", "status",
    ]);
    for r in &scan.rows {
        t.push(vec![
            r.k.into(),
            r.alpha_tilde.into(),
            r.alpha_ratio.into(),
            r.eps.into(),
            r.im_c_channel.into(),
            r.im_c_glued.into(),
            r.growth_rate.into(),
            r.psi_h1.into(),
            r.phiout_z.into(),
            r.residual.into(),
            Cell::Text(r.failure.as_ref().map_or("ok".into(), |f| format!("failed: {f}"))),
        ])?;
    }
    Ok(t)
}

pub fn glue_table(setup: &SheetSetup, glued: &GluedSolution) -> Result<Table> {
    let mut t = Table::new(&["y", "re_phi", "im_phi", "re_phi_out", "im_phi_out", "chi_in", "chi_out"]);
    for (i, y) in setup.channel.grid.nodes.iter().enumerate() {
        let (p, o) = (glued.assembled[i], glued.phi_out[i]);
        t.push(vec![
            (*y).into(),
            p.re.into(),
            p.im.into(),
            o.re.into(),
            o.im.into(),
            setup.cutoffs.chi_in(*y, 0).into(),
            setup.cutoffs.chi_out(*y, 0).into(),
        ])?;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_formatting_is_fixed() {
        let mut t = Table::new(&["a", "b", "c"]);
        t.push(vec![0.1.into(), 3i64.into(), f64::NAN.into()]).unwrap();
        assert_eq!(t.to_csv().unwrap(), "a,b,c\n1.0000000000000001e-1,3,NaN\n");
        assert!(t.push(vec![1.0.into()]).is_err());
    }

    #[test]
    fn metadata_carries_version() {
        let m = metadata(&json!({"n": 3}), json!({"x": 1.0})).unwrap();
        assert_eq!(m["version"], VERSION);
        assert_eq!(m["config"]["n"], 3);
    }
}
