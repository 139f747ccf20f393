use crate::error::{Error, Result};

pub const SIDE: usize = 28;
pub const PIXELS: usize = SIDE * SIDE;
const CENTER: f64 = (SIDE as f64 - 1.0) / 2.0;

fn sample(img: &[f64], r: f64, c: f64) -> f64 {
    let r0 = r.floor();
    let c0 = c.floor();
    let (fr, fc) = (r - r0, c - c0);
    let at = |ri: f64, ci: f64| -> f64 {
        if ri < 0.0 || ci < 0.0 || ri > (SIDE - 1) as f64 || ci > (SIDE - 1) as f64 {
            0.0
        } else {
            img[ri as usize * SIDE + ci as usize]
        }
    };
    let mut v = 0.0;
    for (dr, wr) in [(0.0, 1.0 - fr), (1.0, fr)] {
        for (dc, wc) in [(0.0, 1.0 - fc), (1.0, fc)] {
            let w = wr * wc;
            if w != 0.0 {
                v += w * at(r0 + dr, c0 + dc);
            }
        }
    }
    v
}

/// Rotates a 28×28 row-major image by `theta` degrees about its center.
///
/// A point at offset `(u, v)` (row, column) from the center moves to
/// `(u cos θ − v sin θ, u sin θ + v cos θ)`. Each output pixel is read from
/// the inverse-mapped source position by bilinear interpolation; samples
/// outside the frame read as 0.
pub fn rotate_image(img: &[f64], theta: f64) -> Result<Vec<f64>> {
    if img.len() != PIXELS {
        return Err(Error::DimensionMismatch {
            what: "image",
            expected: PIXELS,
            found: img.len(),
        });
    }
    if !(-180.0..=180.0).contains(&theta) {
        return Err(Error::InvalidArgument(format!("angle {theta} outside [-180, 180]")));
    }
    if theta == 0.0 {
        return Ok(img.to_vec());
    }
    let (s, c) = theta.to_radians().sin_cos();
    let mut out = vec![0.0; PIXELS];
    for row in 0..SIDE {
        for col in 0..SIDE {
            let u = row as f64 - CENTER;
            let v = col as f64 - CENTER;
            let su = u * c + v * s;
            let sv = -u * s + v * c;
            out[row * SIDE + col] = sample(img, su + CENTER, sv + CENTER);
        }
    }
    Ok(out)
}
