//! Plain-text coefficient files for terminal states.
//!
//! ```text
//! nsf-coefficients 1
//! cutoff 4
//! resolution 16
//! variables psi
//! time 4e-3
//! u0 1 -1 1 0e0 -1.25e-1
//! ...
//! ```
//!
//! Each data line is `field k1 k2 k3 re im` with `field` one of `u0 u1 u2 s`.
//! Coefficients that are exactly `+0` are omitted. Numbers are printed in the
//! shortest form that reads back to the same bits.

use std::fmt::Write as _;

use nsf_core::dynamics::{SystemState, Variables};
use nsf_core::spectral::{ScalarField, TorusGrid, VectorField};
use num_complex::Complex64;

use crate::error::{CliError, Result};

const MAGIC: &str = "nsf-coefficients 1";
const FIELDS: [&str; 4] = ["u0", "u1", "u2", "s"];

pub fn write_coefficients(state: &SystemState) -> String {
    let grid = state.grid();
    let vars = match state.vars {
        Variables::Psi => "psi",
        Variables::Theta => "theta",
    };
    let mut out = format!(
        "{MAGIC}\ncutoff {}\nresolution {}\nvariables {vars}\ntime {:e}\n",
        grid.cutoff(),
        grid.resolution(),
        state.t
    );
    let fields = [state.u.component(0), state.u.component(1), state.u.component(2), &state.scalar];
    for (name, f) in FIELDS.iter().zip(fields) {
        for (idx, z) in f.coeffs().iter().enumerate() {
            if z.re.to_bits() == 0 && z.im.to_bits() == 0 {
                continue;
            }
            let k = grid.wavevector(idx);
            let _ = writeln!(out, "{name} {} {} {} {:e} {:e}", k[0], k[1], k[2], z.re, z.im);
        }
    }
    out
}

pub fn read_coefficients(text: &str) -> Result<SystemState> {
    let err = |line: usize, message: String| CliError::Coefficients { line, message };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut header = |key: &str| -> Result<(usize, String)> {
        let (n, l) = lines.next().ok_or_else(|| err(0, format!("missing `{key}` header")))?;
        let value = l
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| err(n, format!("expected `{key} ...`")))?;
        Ok((n, value.trim().to_string()))
    };
    let (n, version) = header("nsf-coefficients")?;
    if version != "1" {
        return Err(err(n, format!("unsupported version {version}")));
    }
    let parse_usize = |(n, v): (usize, String)| v.parse::<usize>().map_err(|e| err(n, e.to_string()));
    let cutoff = parse_usize(header("cutoff")?)?;
    let resolution = parse_usize(header("resolution")?)?;
    let (n, vars) = header("variables")?;
    let vars = match vars.as_str() {
        "psi" => Variables::Psi,
        "theta" => Variables::Theta,
        other => return Err(err(n, format!("unknown variables `{other}`"))),
    };
    let (n, t) = header("time")?;
    let t: f64 = t.parse().map_err(|e: std::num::ParseFloatError| err(n, e.to_string()))?;
    let grid = TorusGrid::new(cutoff, resolution)?;
    let mut coeffs = vec![vec![Complex64::new(0.0, 0.0); grid.num_modes()]; 4];
    for (n, l) in lines {
        if l.is_empty() {
            continue;
        }
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != 6 {
            return Err(err(n, format!("expected 6 columns, found {}", parts.len())));
        }
        let f = FIELDS
            .iter()
            .position(|&f| f == parts[0])
            .ok_or_else(|| err(n, format!("unknown field `{}`", parts[0])))?;
        let mut k = [0i64; 3];
        for (d, p) in parts[1..4].iter().enumerate() {
            k[d] = p.parse().map_err(|e: std::num::ParseIntError| err(n, e.to_string()))?;
        }
        if !grid.contains(k) {
            return Err(err(n, format!("wavevector {k:?} outside cutoff {cutoff}")));
        }
        let re: f64 = parts[4].parse().map_err(|e: std::num::ParseFloatError| err(n, e.to_string()))?;
        let im: f64 = parts[5].parse().map_err(|e: std::num::ParseFloatError| err(n, e.to_string()))?;
        coeffs[f][grid.index(k)] = Complex64::new(re, im);
    }
    let mut fields = coeffs.into_iter().map(|c| ScalarField::from_coefficients(grid, c));
    let mut next = || fields.next().expect("four fields");
    let u = VectorField::from_components([next()?, next()?, next()?])?;
    let s = next()?;
    Ok(SystemState::new(u, s, vars)?.with_time(t))
}
