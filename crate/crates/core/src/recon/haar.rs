//! Orthonormal multi-level 2D Haar transform on square power-of-two images,
//! coefficients in the usual Mallat layout (coarsest approximation at 0).

use crate::error::{Error, Result};

const R: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Side length of a square image with `n` pixels whose side is a power of
/// two.
pub fn square_side(n: usize) -> Result<usize> {
    let side = (n as f64).sqrt().round() as usize;
    if side == 0 || side * side != n || !side.is_power_of_two() {
        return Err(Error::param(
            "image",
            format!("expected a square image with power-of-two side, got {n} pixels"),
        ));
    }
    Ok(side)
}

fn step_forward(buf: &mut [f64], tmp: &mut [f64], len: usize, stride: usize) {
    let half = len / 2;
    for i in 0..half {
        let a = buf[2 * i * stride];
        let b = buf[(2 * i + 1) * stride];
        tmp[i] = (a + b) * R;
        tmp[half + i] = (a - b) * R;
    }
    for i in 0..len {
        buf[i * stride] = tmp[i];
    }
}

fn step_inverse(buf: &mut [f64], tmp: &mut [f64], len: usize, stride: usize) {
    let half = len / 2;
    for i in 0..half {
        let s = buf[i * stride];
        let d = buf[(half + i) * stride];
        tmp[2 * i] = (s + d) * R;
        tmp[2 * i + 1] = (s - d) * R;
    }
    for i in 0..len {
        buf[i * stride] = tmp[i];
    }
}

/// Full-depth forward transform of a row-major `side × side` image.
pub fn forward(x: &[f64]) -> Result<Vec<f64>> {
    let side = square_side(x.len())?;
    let mut c = x.to_vec();
    let mut tmp = vec![0.0; side];
    let mut len = side;
    while len > 1 {
        for row in 0..len {
            step_forward(&mut c[row * side..], &mut tmp, len, 1);
        }
        for col in 0..len {
            step_forward(&mut c[col..], &mut tmp, len, side);
        }
        len /= 2;
    }
    Ok(c)
}

pub fn inverse(c: &[f64]) -> Result<Vec<f64>> {
    let side = square_side(c.len())?;
    let mut x = c.to_vec();
    let mut tmp = vec![0.0; side];
    let mut len = 2;
    while len <= side {
        for col in 0..len {
            step_inverse(&mut x[col..], &mut tmp, len, side);
        }
        for row in 0..len {
            step_inverse(&mut x[row * side..], &mut tmp, len, 1);
        }
        len *= 2;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probe(n: usize) -> Vec<f64> {
        (0..n).map(|i| ((i * 7919) % 101) as f64 / 10.0 - 3.0).collect()
    }

    #[test]
    fn roundtrip_and_energy() {
        for side in [1usize, 2, 4, 16, 64] {
            let x = probe(side * side);
            let c = forward(&x).unwrap();
            let e0: f64 = x.iter().map(|v| v * v).sum();
            let e1: f64 = c.iter().map(|v| v * v).sum();
            assert!((e0 - e1).abs() <= 1e-10 * e0.max(1.0));
            let back = inverse(&c).unwrap();
            for (a, b) in back.iter().zip(&x) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_image_is_pure_dc() {
        let c = forward(&[1.0; 64]).unwrap();
        assert!((c[0] - 8.0).abs() < 1e-12);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn two_by_two_by_hand() {
        // [a b; c d] -> [(a+b+c+d)/2, (a-b+c-d)/2; (a+b-c-d)/2, (a-b-c+d)/2]
        let c = forward(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let want = [5.0, -1.0, -2.0, 0.0];
        for (a, b) in c.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{c:?}");
        }
    }

    #[test]
    fn rejects_non_square() {
        assert!(forward(&[0.0; 8]).is_err());
        assert!(forward(&[0.0; 36]).is_err());
        assert!(square_side(0).is_err());
    }
}
