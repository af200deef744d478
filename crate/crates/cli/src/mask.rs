//! Domain masks from grayscale images. One pixel per element; the top
//! image row is the top of the domain (highest y). Bright pixels are
//! design space, dark pixels are carved out, the middle band is frozen
//! solid:
//!
//! - luma >= 2/3 of full scale: design
//! - luma <= 1/3 of full scale: passive void
//! - in between: passive solid

use std::path::Path;

use anyhow::{bail, Context, Result};

use vorotop::grid::{CellState, DomainMask};

const DESIGN_MIN: u8 = 170; // ceil(2/3 * 255)
const VOID_MAX: u8 = 85; // floor(1/3 * 255)

pub fn load_mask(path: &Path, nx: usize, ny: usize) -> Result<DomainMask> {
    let img = image::open(path)
        .with_context(|| format!("reading mask image {}", path.display()))?
        .to_luma8();
    let (w, h) = img.dimensions();
    if (w as usize, h as usize) != (nx, ny) {
        bail!(
            "mask is {w}x{h} but the domain needs one pixel per element ({nx}x{ny})"
        );
    }
    let mut states = vec![CellState::Design; nx * ny];
    for ey in 0..ny {
        for ex in 0..nx {
            // Image rows run top-down; element rows bottom-up.
            let luma = img.get_pixel(ex as u32, (ny - 1 - ey) as u32).0[0];
            states[ey * nx + ex] = if luma >= DESIGN_MIN {
                CellState::Design
            } else if luma <= VOID_MAX {
                CellState::PassiveVoid
            } else {
                CellState::PassiveSolid
            };
        }
    }
    Ok(DomainMask::from_states(nx, ny, states)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{GrayImage, Luma};

    #[test]
    fn thresholds_classify_and_orientation_flips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mask.png");
        // 3 wide, 2 tall: top row white/gray/black, bottom row all white.
        let mut img = GrayImage::new(3, 2);
        img.put_pixel(0, 0, Luma([255]));
        img.put_pixel(1, 0, Luma([128]));
        img.put_pixel(2, 0, Luma([0]));
        for x in 0..3 {
            img.put_pixel(x, 1, Luma([200]));
        }
        img.save(&path).unwrap();

        let mask = load_mask(&path, 3, 2).unwrap();
        // Element row 0 is the bottom = image row 1.
        for ex in 0..3 {
            assert_eq!(mask.state(ex), CellState::Design);
        }
        // Element row 1 is the top = image row 0.
        assert_eq!(mask.state(3), CellState::Design);
        assert_eq!(mask.state(4), CellState::PassiveSolid);
        assert_eq!(mask.state(5), CellState::PassiveVoid);
    }

    #[test]
    fn wrong_resolution_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mask.png");
        GrayImage::new(4, 4).save(&path).unwrap();
        assert!(load_mask(&path, 8, 8).is_err());
    }
}
