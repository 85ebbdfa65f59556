use crate::error::{Error, Result};
use crate::grid::Grid2D;

/// Boundary extension used by [`conv2d_same`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PadMode {
    Zero,
    /// Mirror about the edge sample without repeating it (`d c b | a b c d`).
    #[default]
    Reflect,
}

impl std::str::FromStr for PadMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(PadMode::Zero),
            "reflect" => Ok(PadMode::Reflect),
            other => Err(Error::Config(format!("unknown pad mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for PadMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PadMode::Zero => "zero",
            PadMode::Reflect => "reflect",
        })
    }
}

/// Linear 2-D convolution, output `(ar + br - 1) x (ac + bc - 1)`.
pub fn conv2d_full(a: &Grid2D, b: &Grid2D) -> Result<Grid2D> {
    let rows = a
        .rows()
        .checked_add(b.rows())
        .and_then(|v| v.checked_sub(1))
        .ok_or_else(|| Error::Size("full convolution rows".into()))?;
    let cols = a
        .cols()
        .checked_add(b.cols())
        .and_then(|v| v.checked_sub(1))
        .ok_or_else(|| Error::Size("full convolution cols".into()))?;
    rows.checked_mul(cols)
        .ok_or_else(|| Error::Size(format!("{rows}x{cols}")))?;

    let mut out = Grid2D::zeros(rows, cols);
    let bc = b.cols();
    let bd = b.data();
    let od = out.data_mut();
    for m in 0..a.rows() {
        for n in 0..a.cols() {
            let av = a[(m, n)];
            if av == 0.0 {
                continue;
            }
            for u in 0..b.rows() {
                let orow = &mut od[(m + u) * cols + n..(m + u) * cols + n + bc];
                let brow = &bd[u * bc..(u + 1) * bc];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
    }
    Ok(out)
}

#[inline]
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// Extends `g` by `pr` rows and `pc` columns on every side.
pub fn pad(g: &Grid2D, pr: usize, pc: usize, mode: PadMode) -> Grid2D {
    let (rows, cols) = g.dims();
    match mode {
        PadMode::Zero => {
            let mut out = Grid2D::zeros(rows + 2 * pr, cols + 2 * pc);
            let oc = cols + 2 * pc;
            let od = out.data_mut();
            for r in 0..rows {
                let start = (r + pr) * oc + pc;
                od[start..start + cols].copy_from_slice(&g.data()[r * cols..(r + 1) * cols]);
            }
            out
        }
        PadMode::Reflect => Grid2D::from_fn(rows + 2 * pr, cols + 2 * pc, |r, c| {
            let sr = reflect_index(r as isize - pr as isize, rows);
            let sc = reflect_index(c as isize - pc as isize, cols);
            g[(sr, sc)]
        }),
    }
}

/// "Valid" convolution: only positions where the flipped kernel fits inside `input`.
pub(crate) fn conv2d_valid(input: &Grid2D, kernel: &Grid2D) -> Grid2D {
    let (kr, kc) = kernel.dims();
    let rows = input.rows() + 1 - kr;
    let cols = input.cols() + 1 - kc;
    let ic = input.cols();
    let mut out = Grid2D::zeros(rows, cols);
    let id = input.data();
    let od = out.data_mut();
    for i in 0..rows {
        let orow = &mut od[i * cols..(i + 1) * cols];
        for m in 0..kr {
            for n in 0..kc {
                let w = kernel[(kr - 1 - m, kc - 1 - n)];
                if w == 0.0 {
                    continue;
                }
                let irow = &id[(i + m) * ic + n..(i + m) * ic + n + cols];
                for (o, &x) in orow.iter_mut().zip(irow) {
                    *o += w * x;
                }
            }
        }
    }
    out
}

/// Same-size convolution with an odd kernel; the kernel center aligns with each
/// output sample.
pub fn conv2d_same(input: &Grid2D, kernel: &Grid2D, pad_mode: PadMode) -> Result<Grid2D> {
    let (kr, kc) = kernel.dims();
    if kr % 2 == 0 || kc % 2 == 0 {
        return Err(Error::contract(format!(
            "same convolution needs an odd kernel, got {kr}x{kc}"
        )));
    }
    let padded = pad(input, kr / 2, kc / 2, pad_mode);
    Ok(conv2d_valid(&padded, kernel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Grid2D {
        Grid2D::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    // Straight from the definition, indices checked one by one.
    fn full_oracle(a: &Grid2D, b: &Grid2D) -> Grid2D {
        let rows = a.rows() + b.rows() - 1;
        let cols = a.cols() + b.cols() - 1;
        Grid2D::from_fn(rows, cols, |i, j| {
            let mut s = 0.0;
            for m in 0..a.rows() {
                for n in 0..a.cols() {
                    let (u, v) = (i as isize - m as isize, j as isize - n as isize);
                    if u >= 0 && v >= 0 && (u as usize) < b.rows() && (v as usize) < b.cols() {
                        s += a[(m, n)] * b[(u as usize, v as usize)];
                    }
                }
            }
            s
        })
    }

    #[test]
    fn full_small_case_matches_hand_values() {
        let a = Grid2D::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = Grid2D::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        // out[1,1] = 2*1 + 3*1, out[1,2] = 4*1, out[2,1] = 4*1.
        let want = Grid2D::from_rows(&[[0.0, 1.0, 2.0], [1.0, 5.0, 4.0], [3.0, 4.0, 0.0]]).unwrap();
        assert_eq!(full_oracle(&a, &b), want);
        assert_eq!(conv2d_full(&a, &b).unwrap(), want);
    }

    #[test]
    fn full_identity_and_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_grid(&mut rng, 11, 11);
        let one = Grid2D::filled(1, 1, 1.0);
        assert_eq!(conv2d_full(&a, &one).unwrap(), a);
        let b = random_grid(&mut rng, 11, 11);
        assert_eq!(conv2d_full(&a, &b).unwrap().dims(), (21, 21));
    }

    #[test]
    fn full_matches_oracle_and_commutes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let a = random_grid(&mut rng, 4, 7);
            let b = random_grid(&mut rng, 5, 3);
            let ab = conv2d_full(&a, &b).unwrap();
            assert!(ab.max_abs_diff(&full_oracle(&a, &b)).unwrap() < 1e-12);
            assert!(ab.max_abs_diff(&conv2d_full(&b, &a).unwrap()).unwrap() < 1e-12);
        }
    }

    #[test]
    fn same_with_delta_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_grid(&mut rng, 6, 9);
        let delta = Grid2D::from_fn(3, 3, |r, c| if r == 1 && c == 1 { 1.0 } else { 0.0 });
        for mode in [PadMode::Zero, PadMode::Reflect] {
            assert_eq!(conv2d_same(&x, &delta, mode).unwrap(), x);
        }
    }

    #[test]
    fn same_counts_overlap() {
        let x = Grid2D::filled(5, 5, 1.0);
        let k = Grid2D::filled(3, 3, 1.0);
        let y = conv2d_same(&x, &k, PadMode::Zero).unwrap();
        assert_eq!(y[(0, 0)], 4.0);
        assert_eq!(y[(0, 2)], 6.0);
        assert_eq!(y[(2, 2)], 9.0);
        let y = conv2d_same(&x, &k, PadMode::Reflect).unwrap();
        assert_eq!(y[(0, 0)], 9.0);
    }

    #[test]
    fn same_is_crop_of_full() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_grid(&mut rng, 7, 7);
        let k = random_grid(&mut rng, 3, 3);
        let full = full_oracle(&x, &k);
        let crop = full.crop(1, 1, 7, 7).unwrap();
        let same = conv2d_same(&x, &k, PadMode::Zero).unwrap();
        assert!(same.max_abs_diff(&crop).unwrap() < 1e-12);

        // Reflect: crop of the full convolution of the reflect-extended input.
        let ext = pad(&x, 1, 1, PadMode::Reflect);
        let crop = full_oracle(&ext, &k).crop(2, 2, 7, 7).unwrap();
        let same = conv2d_same(&x, &k, PadMode::Reflect).unwrap();
        assert!(same.max_abs_diff(&crop).unwrap() < 1e-12);
    }

    #[test]
    fn same_rejects_even_kernel() {
        let x = Grid2D::filled(4, 4, 1.0);
        let k = Grid2D::filled(2, 3, 1.0);
        assert!(matches!(
            conv2d_same(&x, &k, PadMode::Zero),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn reflect_index_bounces() {
        let got: Vec<usize> = (-4..8).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(got, vec![2, 3, 2, 1, 0, 1, 2, 3, 2, 1, 0, 1]);
        assert_eq!(reflect_index(-3, 1), 0);
    }
}
