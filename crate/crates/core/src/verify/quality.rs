use crate::error::{Error, Result};
use crate::grids::LabelGrid;
use crate::raster::{gaussian_kernel, Plane};

/// Side of the Gaussian SSIM window (shrunk for smaller frames).
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
/// Intensities live in [0, 1].
const DYNAMIC_RANGE: f64 = 1.0;

/// PSNR reported for (near-)identical frames.
pub const PSNR_CAP_DB: f64 = 100.0;
const MSE_FLOOR: f64 = 1e-10;

/// Class codes scaled to [0, 1] by the largest code of the taxonomy.
pub fn frame_intensity(grid: &LabelGrid) -> Plane {
    let top = (grid.taxonomy().cardinality() - 1) as f64;
    Plane::new(
        grid.height(),
        grid.width(),
        grid.labels().iter().map(|&l| l as f64 / top).collect(),
    )
    .expect("grid dims are valid")
}

fn same_dims(a: &Plane, b: &Plane) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::shape(format!("{:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

/// Gaussian-weighted sums over every fully contained window ("valid" filtering).
fn valid_filter(p: &Plane, taps: &[f64]) -> Plane {
    let win = taps.len();
    let (h, w) = p.dims();
    let (oh, ow) = (h + 1 - win, w + 1 - win);
    let horizontal = Plane::from_fn(h, ow, |y, x| taps.iter().enumerate().map(|(k, &g)| g * p.at(y, x + k)).sum());
    Plane::from_fn(oh, ow, |y, x| taps.iter().enumerate().map(|(k, &g)| g * horizontal.at(y + k, x)).sum())
}

/// Mean structural similarity over all window positions.
pub fn ssim(pred: &Plane, truth: &Plane) -> Result<f64> {
    same_dims(pred, truth)?;
    let (h, w) = pred.dims();
    let win = SSIM_WINDOW.min(h).min(w);
    let taps = {
        // Centre between taps for even windows keeps the kernel symmetric.
        let c = (win as f64 - 1.0) / 2.0;
        let mut k: Vec<f64> = (0..win)
            .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
            .collect();
        let s: f64 = k.iter().sum();
        k.iter_mut().for_each(|v| *v /= s);
        k
    };
    debug_assert!(win != SSIM_WINDOW || (taps[5] - gaussian_kernel(5, SSIM_SIGMA)[5]).abs() < 1e-15);

    let xx = Plane::new(h, w, pred.data().iter().map(|v| v * v).collect())?;
    let yy = Plane::new(h, w, truth.data().iter().map(|v| v * v).collect())?;
    let xy = Plane::new(h, w, pred.data().iter().zip(truth.data()).map(|(a, b)| a * b).collect())?;
    let mu_x = valid_filter(pred, &taps);
    let mu_y = valid_filter(truth, &taps);
    let e_xx = valid_filter(&xx, &taps);
    let e_yy = valid_filter(&yy, &taps);
    let e_xy = valid_filter(&xy, &taps);

    let c1 = (K1 * DYNAMIC_RANGE).powi(2);
    let c2 = (K2 * DYNAMIC_RANGE).powi(2);
    let n = mu_x.data().len();
    let mut total = 0.0;
    for i in 0..n {
        let (mx, my) = (mu_x.data()[i], mu_y.data()[i]);
        let var_x = e_xx.data()[i] - mx * mx;
        let var_y = e_yy.data()[i] - my * my;
        let cov = e_xy.data()[i] - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (var_x + var_y + c2));
    }
    Ok(total / n as f64)
}

/// Peak signal-to-noise ratio in dB for unit peak, capped at [`PSNR_CAP_DB`].
pub fn psnr(pred: &Plane, truth: &Plane) -> Result<f64> {
    same_dims(pred, truth)?;
    let n = pred.data().len() as f64;
    let mse = pred.data().iter().zip(truth.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
    if mse < MSE_FLOOR {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (DYNAMIC_RANGE * DYNAMIC_RANGE / mse).log10()).min(PSNR_CAP_DB))
}

pub fn ssim_frames(pred: &LabelGrid, truth: &LabelGrid) -> Result<f64> {
    ssim(&frame_intensity(pred), &frame_intensity(truth))
}

pub fn psnr_frames(pred: &LabelGrid, truth: &LabelGrid) -> Result<f64> {
    psnr(&frame_intensity(pred), &frame_intensity(truth))
}
