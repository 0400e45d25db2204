//! Pruned 3-D FFTs between truncated coefficient cubes and collocation grids.
//!
//! Coefficients are stored on the cube `[-m, m]^3`; physical values live on an
//! `n^3` grid with points `x_j = j / n`. The inverse transform evaluates
//! `f(x) = Σ_k c_k exp(2πi k·x)`, the forward transform returns
//! `c_k = n^-3 Σ_j f(x_j) exp(-2πi k·x_j)` restricted to the cube.
//!
//! Only lines touching retained wavenumbers are transformed along the first
//! two passes, and two real fields are packed into one complex transform.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

thread_local! {
    static PLANS: RefCell<HashMap<usize, Rc<Plans>>> = RefCell::new(HashMap::new());
}

fn plans(n: usize) -> Rc<Plans> {
    PLANS.with(|cache| {
        cache
            .borrow_mut()
            .entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                Rc::new(Plans {
                    forward: planner.plan_fft_forward(n),
                    inverse: planner.plan_fft_inverse(n),
                })
            })
            .clone()
    })
}

/// Grid positions (mod n) of wavenumbers -m..=m, in storage order.
fn positions(m: usize, n: usize) -> Vec<usize> {
    let m = m as i64;
    (-m..=m).map(|k| k.rem_euclid(n as i64) as usize).collect()
}

fn scratch_for(fft: &Arc<dyn Fft<f64>>) -> Vec<Complex64> {
    vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()]
}

/// Transform every line along axis 1 for the given axis-0 slabs.
fn pass_axis1(buf: &mut [Complex64], n: usize, slabs: &[usize], fft: &Arc<dyn Fft<f64>>) {
    let mut tmp = vec![Complex64::new(0.0, 0.0); n * n];
    let mut scratch = scratch_for(fft);
    for &i0 in slabs {
        let slab = &mut buf[i0 * n * n..(i0 + 1) * n * n];
        for i1 in 0..n {
            for i2 in 0..n {
                tmp[i2 * n + i1] = slab[i1 * n + i2];
            }
        }
        fft.process_with_scratch(&mut tmp, &mut scratch);
        for i1 in 0..n {
            for i2 in 0..n {
                slab[i1 * n + i2] = tmp[i2 * n + i1];
            }
        }
    }
}

/// Transform every line along axis 0.
fn pass_axis0(buf: &mut [Complex64], n: usize, fft: &Arc<dyn Fft<f64>>) {
    let mut tmp = vec![Complex64::new(0.0, 0.0); n * n];
    let mut scratch = scratch_for(fft);
    for i1 in 0..n {
        for i0 in 0..n {
            let row = (i0 * n + i1) * n;
            for i2 in 0..n {
                tmp[i2 * n + i0] = buf[row + i2];
            }
        }
        fft.process_with_scratch(&mut tmp, &mut scratch);
        for i0 in 0..n {
            let row = (i0 * n + i1) * n;
            for i2 in 0..n {
                buf[row + i2] = tmp[i2 * n + i0];
            }
        }
    }
}

/// Transform the contiguous axis-2 rows indexed by (i0, i1) in `pos × pos`.
fn pass_axis2(buf: &mut [Complex64], n: usize, pos: &[usize], fft: &Arc<dyn Fft<f64>>) {
    let mut scratch = scratch_for(fft);
    for &i0 in pos {
        for &i1 in pos {
            let row = (i0 * n + i1) * n;
            fft.process_with_scratch(&mut buf[row..row + n], &mut scratch);
        }
    }
}

thread_local! {
    static WORK: RefCell<Vec<Complex64>> = const { RefCell::new(Vec::new()) };
}

/// Run `f` on a zeroed thread-local buffer of `len` complex values.
fn with_work<R>(len: usize, f: impl FnOnce(&mut [Complex64]) -> R) -> R {
    WORK.with(|w| {
        let mut w = w.borrow_mut();
        w.clear();
        w.resize(len, Complex64::new(0.0, 0.0));
        f(&mut w)
    })
}

fn inverse_into(coeffs: &[Complex64], m: usize, n: usize, buf: &mut [Complex64]) {
    let side = 2 * m + 1;
    debug_assert_eq!(coeffs.len(), side * side * side);
    debug_assert!(n > 2 * m);
    let pos = positions(m, n);
    for (a, &pa) in pos.iter().enumerate() {
        for (b, &pb) in pos.iter().enumerate() {
            let src = (a * side + b) * side;
            let dst = (pa * n + pb) * n;
            for (c, &pc) in pos.iter().enumerate() {
                buf[dst + pc] = coeffs[src + c];
            }
        }
    }
    let p = plans(n);
    pass_axis2(buf, n, &pos, &p.inverse);
    pass_axis1(buf, n, &pos, &p.inverse);
    pass_axis0(buf, n, &p.inverse);
}

/// Evaluate a coefficient cube of cutoff `m` on the `n^3` grid.
#[cfg(test)]
pub(crate) fn inverse_complex(coeffs: &[Complex64], m: usize, n: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); n * n * n];
    inverse_into(coeffs, m, n, &mut buf);
    buf
}

/// Forward transform of `n^3` values in `buf`, truncated to cutoff `m` and
/// normalized.
fn forward_in_place(buf: &mut [Complex64], m: usize, n: usize) -> Vec<Complex64> {
    debug_assert_eq!(buf.len(), n * n * n);
    debug_assert!(n > 2 * m);
    let side = 2 * m + 1;
    let pos = positions(m, n);
    let p = plans(n);
    pass_axis0(buf, n, &p.forward);
    pass_axis1(buf, n, &pos, &p.forward);
    pass_axis2(buf, n, &pos, &p.forward);
    let scale = 1.0 / (n * n * n) as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); side * side * side];
    for (a, &pa) in pos.iter().enumerate() {
        for (b, &pb) in pos.iter().enumerate() {
            let dst = (a * side + b) * side;
            let src = (pa * n + pb) * n;
            for (c, &pc) in pos.iter().enumerate() {
                out[dst + c] = buf[src + pc] * scale;
            }
        }
    }
    out
}

#[cfg(test)]
pub(crate) fn forward_complex(mut buf: Vec<Complex64>, m: usize, n: usize) -> Vec<Complex64> {
    forward_in_place(&mut buf, m, n)
}

/// Physical values of one or two real fields packed as `a + i b`.
pub(crate) fn to_physical_pair(
    a: &[Complex64],
    b: Option<&[Complex64]>,
    m: usize,
    n: usize,
) -> (Vec<f64>, Option<Vec<f64>>) {
    let packed: Vec<Complex64>;
    let input = match b {
        Some(b) => {
            packed = a.iter().zip(b).map(|(x, y)| x + Complex64::new(-y.im, y.re)).collect();
            &packed[..]
        }
        None => a,
    };
    with_work(n * n * n, |buf| {
        inverse_into(input, m, n, buf);
        let re = buf.iter().map(|z| z.re).collect();
        let im = b.map(|_| buf.iter().map(|z| z.im).collect());
        (re, im)
    })
}

/// Coefficients of one or two real fields given their physical values.
pub(crate) fn from_physical_pair(
    x: &[f64],
    y: Option<&[f64]>,
    m: usize,
    n: usize,
) -> (Vec<Complex64>, Option<Vec<Complex64>>) {
    let z = with_work(n * n * n, |buf| {
        match y {
            Some(y) => {
                for ((slot, &a), &b) in buf.iter_mut().zip(x).zip(y) {
                    *slot = Complex64::new(a, b);
                }
            }
            None => {
                for (slot, &a) in buf.iter_mut().zip(x) {
                    *slot = Complex64::new(a, 0.0);
                }
            }
        }
        forward_in_place(buf, m, n)
    });
    if y.is_none() {
        return (z, None);
    }
    // Separate Z = A + iB using Hermitian symmetry of A and B.
    let len = z.len();
    let mut a = Vec::with_capacity(len);
    let mut b = Vec::with_capacity(len);
    for i in 0..len {
        let zk = z[i];
        let zm = z[len - 1 - i].conj();
        a.push((zk + zm) * 0.5);
        let d = (zk - zm) * 0.5;
        b.push(Complex64::new(d.im, -d.re));
    }
    (a, Some(b))
}

/// Physical values of many real fields, two per complex transform.
pub(crate) fn to_physical_many(coeffs: &[&[Complex64]], m: usize, n: usize) -> Vec<Vec<f64>> {
    // Zero fields skip the packed transform so they stay exactly zero.
    let live: Vec<usize> = (0..coeffs.len())
        .filter(|&i| coeffs[i].iter().any(|z| *z != Complex64::new(0.0, 0.0)))
        .collect();
    let mut out = vec![Vec::new(); coeffs.len()];
    for pair in live.chunks(2) {
        let (a, b) = to_physical_pair(coeffs[pair[0]], pair.get(1).map(|&j| coeffs[j]), m, n);
        out[pair[0]] = a;
        if let (Some(b), Some(&j)) = (b, pair.get(1)) {
            out[j] = b;
        }
    }
    for v in &mut out {
        if v.is_empty() {
            *v = vec![0.0; n * n * n];
        }
    }
    out
}

/// Coefficients of many real fields, two per complex transform.
pub(crate) fn from_physical_many(values: &[&[f64]], m: usize, n: usize) -> Vec<Vec<Complex64>> {
    let live: Vec<usize> = (0..values.len()).filter(|&i| values[i].iter().any(|&x| x != 0.0)).collect();
    let side = 2 * m + 1;
    let mut out = vec![Vec::new(); values.len()];
    for pair in live.chunks(2) {
        let (a, b) = from_physical_pair(values[pair[0]], pair.get(1).map(|&j| values[j]), m, n);
        out[pair[0]] = a;
        if let (Some(b), Some(&j)) = (b, pair.get(1)) {
            out[j] = b;
        }
    }
    for c in &mut out {
        if c.is_empty() {
            *c = vec![Complex64::new(0.0, 0.0); side * side * side];
        }
    }
    out
}

/// Coordinates of grid point `idx` on the `n^3` grid.
#[inline]
pub fn grid_point(idx: usize, n: usize) -> [f64; 3] {
    let i2 = idx % n;
    let i1 = (idx / n) % n;
    let i0 = idx / (n * n);
    let h = 1.0 / n as f64;
    [i0 as f64 * h, i1 as f64 * h, i2 as f64 * h]
}
