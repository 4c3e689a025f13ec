//! CSV artifact formats.
//!
//! Floats are written with 17 significant digits so that a round trip
//! through text reproduces every value bit for bit.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::extrema::HExtremaDecomposition;
use crate::pathkit::{PenaltySpec, PiecewiseLinearPath};
use crate::renewal::RenewalSample;
use crate::tautstring::{Knot, TautStringResult};

/// Full-precision rendering of a float.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(e: std::io::Error) -> Error {
    Error::Parse(format!("i/o error: {e}"))
}

pub fn write_path_csv<W: Write>(mut out: W, path: &PiecewiseLinearPath) -> Result<()> {
    writeln!(out, "t,w").map_err(io_err)?;
    for (t, w) in path.times().iter().zip(path.values()) {
        writeln!(out, "{},{}", fmt_f64(*t), fmt_f64(*w)).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Reads a `t,w` CSV; the grid is validated like any constructed path.
pub fn read_path_csv<R: Read>(input: R) -> Result<PiecewiseLinearPath> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("missing column `{name}` in path CSV")))
    };
    let (ti, wi) = (column("t")?, column("w")?);
    let (mut times, mut values) = (Vec::new(), Vec::new());
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let field = |i: usize| -> Result<f64> {
            let s = record.get(i).unwrap_or("");
            s.parse()
                .map_err(|_| Error::Parse(format!("row {}: cannot parse `{s}` as a number", line + 1)))
        };
        times.push(field(ti)?);
        values.push(field(wi)?);
    }
    PiecewiseLinearPath::new(times, values)
}

/// `t,w,string,lower,upper,knot_side` with `knot_side` in `{U, L, -}`.
pub fn write_string_csv<W: Write>(mut out: W, result: &TautStringResult, knots: &[Knot]) -> Result<()> {
    writeln!(out, "t,w,string,lower,upper,knot_side").map_err(io_err)?;
    let half = 0.5 * result.width;
    let mut next = knots.iter().peekable();
    let rows = result
        .path
        .times()
        .iter()
        .zip(result.path.values())
        .zip(result.string.values());
    for (i, ((t, w), s)) in rows.enumerate() {
        let mut side = '-';
        while let Some(k) = next.peek() {
            if k.index < i {
                next.next();
            } else {
                if k.index == i {
                    side = k.side.tag();
                }
                break;
            }
        }
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(*t),
            fmt_f64(*w),
            fmt_f64(*s),
            fmt_f64(w - half),
            fmt_f64(w + half),
            side
        )
        .map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// `n,t_n,tbar_n`.
pub fn write_decomposition_csv<W: Write>(mut out: W, d: &HExtremaDecomposition) -> Result<()> {
    writeln!(out, "n,t_n,tbar_n").map_err(io_err)?;
    for (n, (t, tb)) in d.t.iter().zip(&d.t_bar).enumerate() {
        writeln!(out, "{n},{},{}", fmt_f64(*t), fmt_f64(*tb)).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// `i,tau,energy_quadratic[,energy_<penalty>...]`; the quadratic column is
/// always first and is required in the samples.
pub fn write_samples_csv<W: Write>(mut out: W, samples: &[RenewalSample], penalties: &[PenaltySpec]) -> Result<()> {
    let mut columns = vec![PenaltySpec::Quadratic];
    columns.extend(penalties.iter().filter(|p| **p != PenaltySpec::Quadratic));
    let mut header = String::from("i,tau");
    for p in &columns {
        header.push_str(&format!(",energy_{}", p.name()));
    }
    writeln!(out, "{header}").map_err(io_err)?;
    for (i, s) in samples.iter().enumerate() {
        let mut row = format!("{i},{}", fmt_f64(s.tau));
        for p in &columns {
            let e = s
                .energy(p)
                .ok_or_else(|| Error::InvalidArgument(format!("sample {i} carries no {p} energy")))?;
            row.push(',');
            row.push_str(&fmt_f64(e));
        }
        writeln!(out, "{row}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// `replicate,statistic`.
pub fn write_statistics_csv<W: Write>(mut out: W, statistics: &[f64]) -> Result<()> {
    writeln!(out, "replicate,statistic").map_err(io_err)?;
    for (r, s) in statistics.iter().enumerate() {
        writeln!(out, "{r},{}", fmt_f64(*s)).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extrema::decompose;
    use crate::pathkit::generate_brownian;
    use crate::tautstring::{knot_points, solve, TubeProblem};

    #[test]
    fn path_round_trip_is_exact() {
        let w = generate_brownian(1.0, 0.01, 3).unwrap();
        let mut buf = Vec::new();
        write_path_csv(&mut buf, &w).unwrap();
        let back = read_path_csv(buf.as_slice()).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn gen_example_has_three_rows() {
        let w = generate_brownian(1.0, 0.5, 42).unwrap();
        let mut buf = Vec::new();
        write_path_csv(&mut buf, &w).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "t,w");
        assert!(lines[1].ends_with(",0.0000000000000000e0"));
    }

    #[test]
    fn malformed_input_is_rejected() {
        assert!(read_path_csv("t,w\n0,0\n1,x\n".as_bytes()).is_err());
        assert!(read_path_csv("a,b\n0,0\n".as_bytes()).is_err());
        assert!(read_path_csv("t,w\n1,0\n0,0\n".as_bytes()).is_err());
    }

    #[test]
    fn string_and_decomposition_csv() {
        let w = PiecewiseLinearPath::new(vec![0.0, 1.5, 3.0], vec![0.0, 1.5, 0.0]).unwrap();
        let r = solve(&TubeProblem::pinned(w.clone(), 1.0).unwrap());
        let knots = knot_points(&r, 1e-9).unwrap();
        let mut buf = Vec::new();
        write_string_csv(&mut buf, &r, &knots).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().next().unwrap() == "t,w,string,lower,upper,knot_side");

        let d = decompose(&w, 1.0).unwrap();
        let mut buf = Vec::new();
        write_decomposition_csv(&mut buf, &d).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + d.t.len());
    }

    #[test]
    fn samples_need_their_columns() {
        let s = vec![RenewalSample {
            tau: 1.0,
            energies: vec![(PenaltySpec::Quadratic, 2.0)],
        }];
        let mut buf = Vec::new();
        write_samples_csv(&mut buf, &s, &[PenaltySpec::Quadratic]).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("i,tau,energy_quadratic\n0,"));
        assert!(write_samples_csv(Vec::new(), &s, &[PenaltySpec::Sqrt1p]).is_err());
    }
}
