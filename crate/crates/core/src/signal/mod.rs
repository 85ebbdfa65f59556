//! Deterministic 2-D signal primitives shared by every other module.

mod conv;
mod dft;
mod resample;

pub use conv::{conv2d_full, conv2d_same, pad, PadMode};
pub use dft::{
    center_shift_to_origin, dft2d, fft2_in_place, magnitude, origin_shift_to_center, phase,
    principal_angle, zero_phase_spectrum,
};
pub(crate) use dft::twiddles;
pub use resample::{bicubic_resize, cubic_weight, BICUBIC_A};

use crate::error::{Error, Result};
use crate::grid::Grid2D;

/// Where the unit sample of an impulse sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// Geometric center; requires odd dims.
    Center,
    Origin,
}

pub fn make_impulse(rows: usize, cols: usize, placement: Placement) -> Result<Grid2D> {
    if rows == 0 || cols == 0 {
        return Err(Error::contract("impulse dims must be positive"));
    }
    let mut g = Grid2D::zeros(rows, cols);
    match placement {
        Placement::Origin => g[(0, 0)] = 1.0,
        Placement::Center => {
            if rows % 2 == 0 || cols % 2 == 0 {
                return Err(Error::contract(format!(
                    "centered impulse needs odd dims, got {rows}x{cols}"
                )));
            }
            g[((rows - 1) / 2, (cols - 1) / 2)] = 1.0;
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impulse_placements() {
        let c = make_impulse(3, 3, Placement::Center).unwrap();
        assert_eq!(c[(1, 1)], 1.0);
        assert_eq!(c.sum(), 1.0);
        let o = make_impulse(21, 21, Placement::Origin).unwrap();
        assert_eq!(o[(0, 0)], 1.0);
        assert_eq!(o.sum(), 1.0);
        assert!(matches!(
            make_impulse(4, 3, Placement::Center),
            Err(Error::Contract(_))
        ));
        assert!(make_impulse(4, 4, Placement::Origin).is_ok());
    }
}
