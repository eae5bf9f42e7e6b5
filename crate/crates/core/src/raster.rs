//! Dense real-valued planes and the image operations the flow solver and the
//! quality metrics share.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width {
            return Err(Error::shape(format!(
                "{} values for a {height}x{width} plane",
                data.len()
            )));
        }
        Ok(Plane { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Plane {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Plane { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Value at a clamped integer position.
    #[inline]
    fn at_clamped(&self, y: isize, x: isize) -> f64 {
        let y = y.clamp(0, self.height as isize - 1) as usize;
        let x = x.clamp(0, self.width as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    /// Bilinear interpolation at a real-valued position, replicating edge values
    /// outside the plane.
    #[inline]
    pub fn sample(&self, y: f64, x: f64) -> f64 {
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let (y0, x0) = (y.floor(), x.floor());
        let (fy, fx) = (y - y0, x - x0);
        let (y0, x0) = (y0 as isize, x0 as isize);
        let a = self.at_clamped(y0, x0);
        let b = self.at_clamped(y0, x0 + 1);
        let c = self.at_clamped(y0 + 1, x0);
        let d = self.at_clamped(y0 + 1, x0 + 1);
        (1.0 - fy) * ((1.0 - fx) * a + fx * b) + fy * ((1.0 - fx) * c + fx * d)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_constant(&self) -> bool {
        let first = self.data[0];
        self.data.iter().all(|&v| v == first)
    }

    /// Central differences (one-sided halves at the edges): (d/dx, d/dy).
    pub fn centered_gradient(&self) -> (Plane, Plane) {
        let (h, w) = self.dims();
        let mut gx = Plane::zeros(h, w);
        let mut gy = Plane::zeros(h, w);
        for y in 0..h {
            for x in 0..w {
                let (yi, xi) = (y as isize, x as isize);
                gx.data[y * w + x] = 0.5 * (self.at_clamped(yi, xi + 1) - self.at_clamped(yi, xi - 1));
                gy.data[y * w + x] = 0.5 * (self.at_clamped(yi + 1, xi) - self.at_clamped(yi - 1, xi));
            }
        }
        (gx, gy)
    }

    /// Separable Gaussian blur with edge replication. `sigma <= 0` is a no-op.
    pub fn gaussian_blur(&self, sigma: f64) -> Plane {
        if sigma <= 0.0 {
            return self.clone();
        }
        let radius = (3.0 * sigma).ceil() as isize;
        let kernel = gaussian_kernel(radius as usize, sigma);
        let (h, w) = self.dims();
        let mut tmp = Plane::zeros(h, w);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, &g) in kernel.iter().enumerate() {
                    acc += g * self.at_clamped(y as isize, x as isize + k as isize - radius);
                }
                tmp.data[y * w + x] = acc;
            }
        }
        let mut out = Plane::zeros(h, w);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, &g) in kernel.iter().enumerate() {
                    acc += g * tmp.at_clamped(y as isize + k as isize - radius, x as isize);
                }
                out.data[y * w + x] = acc;
            }
        }
        out
    }

    /// Bilinear resize to `out_h` x `out_w` with pixel-center alignment.
    pub fn resize(&self, out_h: usize, out_w: usize) -> Plane {
        let sy = self.height as f64 / out_h as f64;
        let sx = self.width as f64 / out_w as f64;
        Plane::from_fn(out_h, out_w, |y, x| {
            self.sample((y as f64 + 0.5) * sy - 0.5, (x as f64 + 0.5) * sx - 0.5)
        })
    }

    /// Median over a (2r+1)^2 window with edge replication.
    pub fn median_filter(&self, radius: usize) -> Plane {
        if radius == 0 {
            return self.clone();
        }
        let r = radius as isize;
        let side = 2 * radius + 1;
        let mut window = Vec::with_capacity(side * side);
        let mut out = Plane::zeros(self.height, self.width);
        for y in 0..self.height {
            for x in 0..self.width {
                window.clear();
                for dy in -r..=r {
                    for dx in -r..=r {
                        window.push(self.at_clamped(y as isize + dy, x as isize + dx));
                    }
                }
                let mid = window.len() / 2;
                let (_, m, _) = window.select_nth_unstable_by(mid, f64::total_cmp);
                out.data[y * self.width + x] = *m;
            }
        }
        out
    }
}

/// Normalised 1-D Gaussian taps over [-radius, radius].
pub fn gaussian_kernel(radius: usize, sigma: f64) -> Vec<f64> {
    let r = radius as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_sample_interpolates_and_clamps() {
        let p = Plane::new(2, 2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(p.sample(0.0, 0.5), 0.5);
        assert_eq!(p.sample(0.5, 0.5), 1.5);
        assert_eq!(p.sample(-4.0, 9.0), 1.0);
        assert_eq!(p.sample(1.0, 1.0), 3.0);
    }

    #[test]
    fn blur_preserves_constants() {
        let p = Plane::from_fn(8, 9, |_, _| 2.5);
        let b = p.gaussian_blur(1.3);
        assert!(b.data().iter().all(|&v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn median_removes_impulse() {
        let mut p = Plane::zeros(5, 5);
        p.data_mut()[12] = 100.0;
        assert!(p.median_filter(1).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_of_ramp() {
        let p = Plane::from_fn(4, 6, |y, x| 2.0 * x as f64 + 3.0 * y as f64);
        let (gx, gy) = p.centered_gradient();
        assert_eq!(gx.at(2, 2), 2.0);
        assert_eq!(gy.at(2, 2), 3.0);
        assert_eq!(gx.at(2, 0), 1.0);
    }
}
