use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

/// One row of a result table: `model_id,params,quantity,value,bound,pass`.
///
/// `params` is a `;`-separated list of `key=value` pairs. `bound` and `pass` are
/// empty when the quantity has no bound attached.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub model_id: String,
    pub params: String,
    pub quantity: &'static str,
    pub value: f64,
    pub bound: Option<f64>,
    pub pass: Option<bool>,
}

pub const HEADER: &str = "model_id,params,quantity,value,bound,pass";

impl Row {
    pub fn value(model_id: &str, params: &str, quantity: &'static str, value: f64) -> Self {
        Self {
            model_id: model_id.to_string(),
            params: params.to_string(),
            quantity,
            value,
            bound: None,
            pass: None,
        }
    }

    /// A row checking `value ≤ bound + slack`.
    pub fn upper(
        model_id: &str,
        params: &str,
        quantity: &'static str,
        value: f64,
        bound: f64,
        slack: f64,
    ) -> Self {
        Self {
            bound: Some(bound),
            pass: Some(value <= bound + slack),
            ..Self::value(model_id, params, quantity, value)
        }
    }

    pub fn with_pass(mut self, pass: bool) -> Self {
        self.pass = Some(pass);
        self
    }

    pub fn failed(&self) -> bool {
        self.pass == Some(false)
    }
}

pub fn format_f64(x: f64) -> String {
    format!("{x:.12e}")
}

pub fn to_csv(rows: &[Row]) -> String {
    let mut s = String::from(HEADER);
    s.push('\n');
    for r in rows {
        let bound = r.bound.map(format_f64).unwrap_or_default();
        let pass = r.pass.map(|p| p.to_string()).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.model_id,
            r.params,
            r.quantity,
            format_f64(r.value),
            bound,
            pass
        );
    }
    s
}

pub fn write_csv(path: &Path, rows: &[Row]) -> Result<()> {
    std::fs::write(path, to_csv(rows))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let rows = [
            Row::value("m", "n=3", "free_energy", -1.5),
            Row::upper("m", "n=3;l=1", "fmed", -2.0, -1.5, 1e-8),
        ];
        assert_eq!(
            to_csv(&rows),
            "model_id,params,quantity,value,bound,pass\n\
             m,n=3,free_energy,-1.500000000000e0,,\n\
             m,n=3;l=1,fmed,-2.000000000000e0,-1.500000000000e0,true\n"
        );
    }
}
