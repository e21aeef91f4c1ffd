//! Per-iteration inversion records shared by both inversion methods.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::survey::parse_floats;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub epoch: usize,
    pub beta: f64,
    pub phi_d: f64,
    pub phi_m: f64,
    pub chi: f64,
    /// Objective value that was minimised at this step.
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InversionTrace {
    pub records: Vec<TraceRecord>,
    /// Model evaluated at each record, kept only when requested.
    pub models: Vec<Vec<f64>>,
    pub final_model: Vec<f64>,
    pub final_phi_d: f64,
    pub final_chi: f64,
    pub converged: bool,
}

impl InversionTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Text table, one record per line: `epoch beta phi_d phi_m chi`.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# dipinv-trace v1\n");
        for r in &self.records {
            let _ = writeln!(s, "{} {} {} {} {}", r.epoch, r.beta, r.phi_d, r.phi_m, r.chi);
        }
        s
    }
}

/// Reads the table written by [`InversionTrace::to_text`]. The loss column
/// is not stored and comes back as NaN.
pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "# dipinv-trace v1" => {}
        _ => return Err(Error::parse(1, "missing '# dipinv-trace v1' header")),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v = parse_floats(t, i + 1)?;
        if v.len() != 5 {
            return Err(Error::parse(i + 1, format!("expected 5 columns, found {}", v.len())));
        }
        out.push(TraceRecord {
            epoch: v[0] as usize,
            beta: v[1],
            phi_d: v[2],
            phi_m: v[3],
            chi: v[4],
            loss: f64::NAN,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let trace = InversionTrace {
            records: vec![
                TraceRecord { epoch: 0, beta: 1.0, phi_d: 12.5, phi_m: 0.1, chi: 3.0, loss: 0.1 },
                TraceRecord { epoch: 1, beta: 0.1f64.exp(), phi_d: 1e-7, phi_m: 3.25, chi: 0.3, loss: 0.0 },
            ],
            ..Default::default()
        };
        let back = parse_trace(&trace.to_text()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].beta.to_bits(), trace.records[1].beta.to_bits());
        assert_eq!(back[1].phi_d, 1e-7);
        assert!(parse_trace("0 1 2 3 4\n").is_err());
        assert!(matches!(
            parse_trace("# dipinv-trace v1\n0 1 2\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
