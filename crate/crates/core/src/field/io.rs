//! CSV and metadata writers for field snapshots.

use std::io::{self, Write};

use super::FieldGrid;

/// Formats a float with 17 significant digits; infinities as `inf`/`-inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.16e}")
    }
}

/// Writes `t,i,j,r,theta,V` rows (1-based `i`, `j`; Euclidean `r`).
pub fn write_trajectory_csv<W: Write>(
    mut out: W,
    grid: &FieldGrid,
    times: &[f64],
    states: &[Vec<f64>],
) -> io::Result<()> {
    writeln!(out, "t,i,j,r,theta,V")?;
    for (&t, s) in times.iter().zip(states) {
        let ts = fmt_f64(t);
        for i in 0..=grid.n() {
            let r = fmt_f64(grid.radii()[i]);
            for j in 0..=grid.m() {
                writeln!(
                    out,
                    "{ts},{},{},{r},{},{}",
                    i + 1,
                    j + 1,
                    fmt_f64(grid.angles()[j]),
                    fmt_f64(s[grid.index(i, j)])
                )?;
            }
        }
    }
    Ok(())
}

/// Reads back the state vectors written by [`write_trajectory_csv`].
pub fn read_trajectory_csv(
    text: &str,
    grid: &FieldGrid,
) -> Result<(Vec<f64>, Vec<Vec<f64>>), String> {
    let mut lines = text.lines();
    if lines.next() != Some("t,i,j,r,theta,V") {
        return Err("missing trajectory header".into());
    }
    let mut times: Vec<f64> = Vec::new();
    let mut states: Vec<Vec<f64>> = Vec::new();
    for (n, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(format!("line {}: expected 6 fields", n + 2));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|e| format!("line {}: {e}", n + 2));
        let t = parse(f[0])?;
        let i: usize = f[1].parse().map_err(|e| format!("line {}: {e}", n + 2))?;
        let j: usize = f[2].parse().map_err(|e| format!("line {}: {e}", n + 2))?;
        if i == 0 || j == 0 || i > grid.n() + 1 || j > grid.m() + 1 {
            return Err(format!("line {}: node ({i}, {j}) outside grid", n + 2));
        }
        if times.last().map_or(true, |&l| l != t) {
            times.push(t);
            states.push(vec![f64::NAN; grid.len()]);
        }
        states.last_mut().unwrap()[grid.index(i - 1, j - 1)] = parse(f[5])?;
    }
    Ok((times, states))
}

/// Writes `key = value` lines.
pub fn write_meta<W: Write>(mut out: W, entries: &[(String, String)]) -> io::Result<()> {
    for (k, v) in entries {
        writeln!(out, "{k} = {v}")?;
    }
    Ok(())
}
