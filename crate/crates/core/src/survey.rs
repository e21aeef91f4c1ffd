//! Surface dipole-dipole survey geometry.
//!
//! Transmitter and receiver dipoles both span adjacent stations. For a
//! transmitter on stations (t, t+1) the receivers are the dipoles
//! (t+1+n, t+2+n) for separations n = 1, 2, ... up to the receiver cap or the
//! end of the line.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Survey {
    /// Electrode x positions on the surface (m).
    pub electrodes: Vec<f64>,
    /// Transmitter (A, B) electrode indices.
    pub sources: Vec<(usize, usize)>,
    /// Receiver (M, N) electrode indices, one list per source.
    pub receivers: Vec<Vec<(usize, usize)>>,
}

/// One row of the survey table, electrode positions in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatumGeometry {
    pub a: f64,
    pub b: f64,
    pub m: f64,
    pub n: f64,
}

impl Survey {
    pub fn new(
        electrodes: Vec<f64>,
        sources: Vec<(usize, usize)>,
        receivers: Vec<Vec<(usize, usize)>>,
    ) -> Result<Self> {
        if sources.len() != receivers.len() {
            return Err(Error::invalid(format!(
                "{} sources but {} receiver lists",
                sources.len(),
                receivers.len()
            )));
        }
        let ne = electrodes.len();
        let check = |(p, q): (usize, usize)| -> Result<()> {
            if p >= ne || q >= ne {
                return Err(Error::invalid(format!(
                    "electrode index out of range in pair ({p}, {q}), {ne} electrodes"
                )));
            }
            if p == q {
                return Err(Error::invalid(format!("degenerate dipole ({p}, {q})")));
            }
            Ok(())
        };
        for (src, rx) in sources.iter().zip(&receivers) {
            check(*src)?;
            for r in rx {
                check(*r)?;
            }
        }
        Ok(Self {
            electrodes,
            sources,
            receivers,
        })
    }

    pub fn n_data(&self) -> usize {
        self.receivers.iter().map(Vec::len).sum()
    }

    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    /// Moves every electrode by `dx`.
    pub fn shifted(mut self, dx: f64) -> Self {
        for e in &mut self.electrodes {
            *e += dx;
        }
        self
    }

    /// Recentres the line on x = 0.
    pub fn centered(self) -> Self {
        let (lo, hi) = self
            .electrodes
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        self.shifted(-0.5 * (lo + hi))
    }

    /// Data geometry in survey order.
    pub fn datum_geometry(&self) -> Vec<DatumGeometry> {
        let e = &self.electrodes;
        self.sources
            .iter()
            .zip(&self.receivers)
            .flat_map(|(&(a, b), rx)| {
                rx.iter().map(move |&(m, n)| DatumGeometry {
                    a: e[a],
                    b: e[b],
                    m: e[m],
                    n: e[n],
                })
            })
            .collect()
    }

    /// Plain-text table `Ax Bx Mx Nx`, one datum per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("# dipole-dipole n_data={}\n", self.n_data());
        for g in self.datum_geometry() {
            let _ = writeln!(s, "{} {} {} {}", g.a, g.b, g.m, g.n);
        }
        s
    }

    /// Rebuilds a survey from a list of datum geometries, grouping
    /// consecutive rows with the same transmitter into one source.
    pub fn from_geometry(rows: &[DatumGeometry]) -> Result<Self> {
        let mut electrodes: Vec<f64> = Vec::new();
        let index_of = |x: f64, electrodes: &mut Vec<f64>| -> usize {
            match electrodes.iter().position(|&e| e == x) {
                Some(i) => i,
                None => {
                    electrodes.push(x);
                    electrodes.len() - 1
                }
            }
        };
        let mut sources = Vec::new();
        let mut receivers: Vec<Vec<(usize, usize)>> = Vec::new();
        for g in rows {
            let a = index_of(g.a, &mut electrodes);
            let b = index_of(g.b, &mut electrodes);
            let m = index_of(g.m, &mut electrodes);
            let n = index_of(g.n, &mut electrodes);
            if sources.last() != Some(&(a, b)) {
                sources.push((a, b));
                receivers.push(Vec::new());
            }
            receivers.last_mut().unwrap().push((m, n));
        }
        Survey::new(electrodes, sources, receivers)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut declared = None;
        for (lineno, line) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(header) = t.strip_prefix('#') {
                if let Some(n) = header.split_whitespace().find_map(|w| w.strip_prefix("n_data=")) {
                    declared = Some(
                        n.parse::<usize>()
                            .map_err(|e| Error::parse(line_no, format!("bad n_data: {e}")))?,
                    );
                }
                continue;
            }
            let v = parse_floats(t, line_no)?;
            if v.len() != 4 {
                return Err(Error::parse(
                    line_no,
                    format!("expected 4 columns, found {}", v.len()),
                ));
            }
            rows.push(DatumGeometry {
                a: v[0],
                b: v[1],
                m: v[2],
                n: v[3],
            });
        }
        if let Some(n) = declared {
            if n != rows.len() {
                return Err(Error::parse(
                    0,
                    format!("header declares {n} data, found {}", rows.len()),
                ));
            }
        }
        Survey::from_geometry(&rows)
    }
}

pub(crate) fn parse_floats(line: &str, line_no: usize) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|w| {
            w.parse::<f64>()
                .map_err(|e| Error::parse(line_no, format!("bad number {w:?}: {e}")))
        })
        .collect()
}

/// Dipole-dipole line with electrodes at every station from x = 0 to
/// `line_length`.
pub fn build_dipole_dipole_survey(
    line_length: f64,
    station_spacing: f64,
    max_receivers: usize,
) -> Result<Survey> {
    if !(station_spacing > 0.0) || !(line_length > 0.0) {
        return Err(Error::invalid(format!(
            "line length and station spacing must be positive, got {line_length} and {station_spacing}"
        )));
    }
    if max_receivers == 0 {
        return Err(Error::invalid("max_receivers must be at least 1"));
    }
    let ratio = line_length / station_spacing;
    let n_intervals = ratio.round();
    if (ratio - n_intervals).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::invalid(format!(
            "line length {line_length} is not a multiple of station spacing {station_spacing}"
        )));
    }
    let n_intervals = n_intervals as usize;
    let electrodes: Vec<f64> = (0..=n_intervals)
        .map(|i| i as f64 * station_spacing)
        .collect();

    let n_dipoles = n_intervals;
    let mut sources = Vec::new();
    let mut receivers = Vec::new();
    for t in 0..n_dipoles {
        let first = t + 2;
        if first >= n_dipoles {
            break;
        }
        let last = (first + max_receivers).min(n_dipoles);
        sources.push((t, t + 1));
        receivers.push((first..last).map(|r| (r, r + 1)).collect());
    }
    if sources.is_empty() {
        return Err(Error::invalid(format!(
            "a {line_length} m line with {station_spacing} m stations is too short for any dipole-dipole datum"
        )));
    }
    Survey::new(electrodes, sources, receivers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn full_line_has_348_data() {
        let s = build_dipole_dipole_survey(700.0, 25.0, 24).unwrap();
        assert_eq!(s.n_data(), 348);
        assert_eq!(s.n_data(), 3 * 24 + (23 + 1) * 23 / 2);
        assert_eq!(s.electrodes.len(), 29);
    }

    #[test]
    fn short_line_enumeration() {
        let s = build_dipole_dipole_survey(100.0, 25.0, 24).unwrap();
        assert_eq!(s.electrodes, vec![0.0, 25.0, 50.0, 75.0, 100.0]);
        assert_eq!(s.sources, vec![(0, 1), (1, 2)]);
        assert_eq!(s.receivers, vec![vec![(2, 3), (3, 4)], vec![(3, 4)]]);
        assert_eq!(s.n_data(), 3);
    }

    #[test]
    fn smallest_line() {
        let s = build_dipole_dipole_survey(75.0, 25.0, 1).unwrap();
        assert_eq!(s.n_data(), 1);
        assert!(build_dipole_dipole_survey(50.0, 25.0, 1).is_err());
    }

    #[test]
    fn rejects_non_multiple() {
        assert!(build_dipole_dipole_survey(110.0, 25.0, 4).is_err());
        assert!(build_dipole_dipole_survey(100.0, 25.0, 0).is_err());
    }

    #[test]
    fn invalid_pairs_are_rejected() {
        assert!(Survey::new(vec![0.0, 1.0], vec![(0, 0)], vec![vec![]]).is_err());
        assert!(Survey::new(vec![0.0, 1.0], vec![(0, 1)], vec![vec![(1, 2)]]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let s = build_dipole_dipole_survey(200.0, 10.0, 24).unwrap().centered();
        let text = s.to_text();
        assert!(text.starts_with("# dipole-dipole n_data=171\n"));
        let back = Survey::parse(&text).unwrap();
        assert_eq!(back.datum_geometry(), s.datum_geometry());
    }

    #[test]
    fn centered_is_symmetric() {
        let s = build_dipole_dipole_survey(700.0, 25.0, 24).unwrap().centered();
        assert_eq!(s.electrodes[0], -350.0);
        assert_eq!(*s.electrodes.last().unwrap(), 350.0);
    }

    fn brute_force_count(n_stations: usize, max_rx: usize) -> usize {
        let mut count = 0;
        for a in 0..n_stations {
            for m in 0..n_stations {
                let (b, n) = (a + 1, m + 1);
                if n >= n_stations || b >= n_stations || m <= b {
                    continue;
                }
                let sep = m - b;
                if (1..=max_rx).contains(&sep) {
                    count += 1;
                }
            }
        }
        count
    }

    proptest! {
        #[test]
        fn count_matches_enumeration(n_int in 3usize..60, spacing in 1u32..50, max_rx in 1usize..30) {
            let spacing = spacing as f64;
            let s = build_dipole_dipole_survey(n_int as f64 * spacing, spacing, max_rx).unwrap();
            prop_assert_eq!(s.n_data(), brute_force_count(n_int + 1, max_rx));
            let closed: usize = (0..n_int).map(|t| max_rx.min(n_int.saturating_sub(t + 2))).sum();
            prop_assert_eq!(s.n_data(), closed);
        }
    }
}
