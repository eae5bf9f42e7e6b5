//! TV-L1 optical flow.
//!
//! Minimises `lambda * |rho(u)|_1 + TV(u)` where `rho` is the brightness
//! constancy residual linearised around the current warp. The problem is split
//! with an auxiliary field `v` coupled to `u` by `1 / (2 theta) |u - v|^2`: the
//! `v` step is a closed-form three-case shrinkage, the `u` step a projected
//! dual (Chambolle) iteration. It runs coarse to fine over an image pyramid
//! with several re-linearisations (warps) per level.

use serde::{Deserialize, Serialize};

use super::FlowField;
use crate::error::{Error, Result};
use crate::raster::Plane;

/// Levels whose shorter side would drop below this are skipped.
pub const MIN_PYRAMID_SIDE: usize = 16;

/// Intensities in [0, 1] are stretched to this range before solving; the
/// default `lambda` is calibrated for 8-bit image scales.
const INTENSITY_SCALE: f64 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TvL1Params {
    /// Dual step size.
    pub tau: f64,
    /// Weight of the data term.
    pub lambda: f64,
    /// Coupling between `u` and the auxiliary `v`.
    pub theta: f64,
    /// Pyramid levels.
    pub nscales: usize,
    /// Size ratio between consecutive levels.
    pub scale_step: f64,
    /// Re-linearisations per level.
    pub warps: usize,
    /// Stop once the RMS flow update per iteration falls below this (px).
    pub epsilon: f64,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    /// Weight of the illumination-change variable; 0 disables it.
    pub gamma: f64,
    /// Median filter radius applied to the flow after each warp; 0 disables it.
    pub median_filter_radius: usize,
}

impl Default for TvL1Params {
    fn default() -> Self {
        TvL1Params {
            tau: 0.25,
            lambda: 0.15,
            theta: 0.3,
            nscales: 5,
            scale_step: 0.5,
            warps: 5,
            epsilon: 0.01,
            inner_iterations: 30,
            outer_iterations: 10,
            gamma: 0.0,
            median_filter_radius: 2,
        }
    }
}

impl TvL1Params {
    pub fn validate(&self) -> Result<()> {
        let positive = [("tau", self.tau), ("lambda", self.lambda), ("theta", self.theta), ("epsilon", self.epsilon)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.scale_step > 0.0 && self.scale_step < 1.0) {
            return Err(Error::invalid(format!("scale_step must lie in (0, 1), got {}", self.scale_step)));
        }
        let counts = [
            ("nscales", self.nscales),
            ("warps", self.warps),
            ("inner_iterations", self.inner_iterations),
            ("outer_iterations", self.outer_iterations),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be at least 1")));
            }
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("gamma must be non-negative"));
        }
        Ok(())
    }

    /// Level sizes from finest to coarsest, dropping levels below [`MIN_PYRAMID_SIDE`].
    pub fn pyramid_sizes(&self, height: usize, width: usize) -> Vec<(usize, usize)> {
        let mut sizes = vec![(height, width)];
        let mut factor = 1.0;
        for _ in 1..self.nscales {
            factor *= self.scale_step;
            let h = (height as f64 * factor).round() as usize;
            let w = (width as f64 * factor).round() as usize;
            if h.min(w) < MIN_PYRAMID_SIDE {
                break;
            }
            sizes.push((h, w));
        }
        sizes
    }
}

/// Dense flow such that `to(x + flow(x)) ~ from(x)`.
pub fn estimate_flow(from: &Plane, to: &Plane, params: &TvL1Params) -> Result<FlowField> {
    params.validate()?;
    if from.dims() != to.dims() {
        return Err(Error::shape(format!(
            "flow frames differ: {:?} vs {:?}",
            from.dims(),
            to.dims()
        )));
    }
    let (h, w) = from.dims();
    if from.is_constant() || to.is_constant() {
        return Ok(FlowField::zeros(h, w));
    }

    let sizes = params.pyramid_sizes(h, w);
    let sigma = 0.6 * (1.0 / (params.scale_step * params.scale_step) - 1.0).sqrt();
    let mut i0s = vec![from.map(|v| v * INTENSITY_SCALE)];
    let mut i1s = vec![to.map(|v| v * INTENSITY_SCALE)];
    for &(lh, lw) in &sizes[1..] {
        let next0 = i0s.last().unwrap().gaussian_blur(sigma).resize(lh, lw);
        let next1 = i1s.last().unwrap().gaussian_blur(sigma).resize(lh, lw);
        i0s.push(next0);
        i1s.push(next1);
    }

    let (ch, cw) = *sizes.last().unwrap();
    let mut state = FlowState::zeros(ch, cw);
    for level in (0..sizes.len()).rev() {
        if level + 1 < sizes.len() {
            let (lh, lw) = sizes[level];
            let (ph, pw) = sizes[level + 1];
            state = state.upsample(lh, lw, lw as f64 / pw as f64, lh as f64 / ph as f64);
        }
        solve_level(&i0s[level], &i1s[level], &mut state, params);
    }
    FlowField::new(h, w, state.u1.into_data(), state.u2.into_data())
}

/// Primal flow components plus the illumination term.
struct FlowState {
    u1: Plane,
    u2: Plane,
    u3: Plane,
}

impl FlowState {
    fn zeros(h: usize, w: usize) -> Self {
        FlowState {
            u1: Plane::zeros(h, w),
            u2: Plane::zeros(h, w),
            u3: Plane::zeros(h, w),
        }
    }

    fn upsample(&self, h: usize, w: usize, sx: f64, sy: f64) -> Self {
        FlowState {
            u1: self.u1.resize(h, w).map(|v| v * sx),
            u2: self.u2.resize(h, w).map(|v| v * sy),
            u3: self.u3.resize(h, w),
        }
    }
}

/// Forward differences, zero on the last column/row.
fn forward_gradient(u: &[f64], h: usize, w: usize, ux: &mut [f64], uy: &mut [f64]) {
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            ux[i] = if x + 1 < w { u[i + 1] - u[i] } else { 0.0 };
            uy[i] = if y + 1 < h { u[i + w] - u[i] } else { 0.0 };
        }
    }
}

/// Negative adjoint of [`forward_gradient`].
fn divergence(p1: &[f64], p2: &[f64], h: usize, w: usize, div: &mut [f64]) {
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let dx = if w == 1 {
                0.0
            } else if x == 0 {
                p1[i]
            } else if x + 1 == w {
                -p1[i - 1]
            } else {
                p1[i] - p1[i - 1]
            };
            let dy = if h == 1 {
                0.0
            } else if y == 0 {
                p2[i]
            } else if y + 1 == h {
                -p2[i - w]
            } else {
                p2[i] - p2[i - w]
            };
            div[i] = dx + dy;
        }
    }
}

fn solve_level(i0: &Plane, i1: &Plane, state: &mut FlowState, params: &TvL1Params) {
    let (h, w) = i0.dims();
    let n = h * w;
    let (i1x, i1y) = i1.centered_gradient();
    let gamma = params.gamma;
    let use_gamma = gamma > 0.0;
    let l_t = params.lambda * params.theta;
    let taut = params.tau / params.theta;
    let stop = params.epsilon * params.epsilon * n as f64;

    let zeros = || vec![0.0; n];
    let (mut p11, mut p12, mut p21, mut p22, mut p31, mut p32) = (zeros(), zeros(), zeros(), zeros(), zeros(), zeros());
    let (mut i1w, mut i1wx, mut i1wy, mut grad, mut rho_c) = (zeros(), zeros(), zeros(), zeros(), zeros());
    let (mut v1, mut v2, mut v3) = (zeros(), zeros(), zeros());
    let (mut div1, mut div2, mut div3) = (zeros(), zeros(), zeros());
    let (mut ux, mut uy) = (zeros(), zeros());

    for _warp in 0..params.warps {
        {
            let (u1, u2) = (state.u1.data(), state.u2.data());
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    let (sy, sx) = (y as f64 + u2[i], x as f64 + u1[i]);
                    i1w[i] = i1.sample(sy, sx);
                    i1wx[i] = i1x.sample(sy, sx);
                    i1wy[i] = i1y.sample(sy, sx);
                    grad[i] = i1wx[i] * i1wx[i] + i1wy[i] * i1wy[i] + gamma * gamma;
                    rho_c[i] = i1w[i] - i1wx[i] * u1[i] - i1wy[i] * u2[i] - i0.data()[i];
                }
            }
        }

        let mut error = f64::INFINITY;
        let mut n_outer = 0;
        while error > stop && n_outer < params.outer_iterations {
            n_outer += 1;
            let mut n_inner = 0;
            while error > stop && n_inner < params.inner_iterations {
                n_inner += 1;

                // Thresholding step on v.
                {
                    let (u1, u2, u3) = (state.u1.data(), state.u2.data(), state.u3.data());
                    for i in 0..n {
                        let rho = rho_c[i] + i1wx[i] * u1[i] + i1wy[i] * u2[i] + gamma * u3[i];
                        let g = grad[i];
                        let (d1, d2, d3) = if rho < -l_t * g {
                            (l_t * i1wx[i], l_t * i1wy[i], l_t * gamma)
                        } else if rho > l_t * g {
                            (-l_t * i1wx[i], -l_t * i1wy[i], -l_t * gamma)
                        } else if g > f64::EPSILON {
                            let fi = -rho / g;
                            (fi * i1wx[i], fi * i1wy[i], fi * gamma)
                        } else {
                            (0.0, 0.0, 0.0)
                        };
                        v1[i] = u1[i] + d1;
                        v2[i] = u2[i] + d2;
                        v3[i] = u3[i] + d3;
                    }
                }

                // Primal update.
                divergence(&p11, &p12, h, w, &mut div1);
                divergence(&p21, &p22, h, w, &mut div2);
                if use_gamma {
                    divergence(&p31, &p32, h, w, &mut div3);
                }
                error = 0.0;
                {
                    let u1 = state.u1.data_mut();
                    for i in 0..n {
                        let new = v1[i] + params.theta * div1[i];
                        error += (new - u1[i]) * (new - u1[i]);
                        u1[i] = new;
                    }
                }
                {
                    let u2 = state.u2.data_mut();
                    for i in 0..n {
                        let new = v2[i] + params.theta * div2[i];
                        error += (new - u2[i]) * (new - u2[i]);
                        u2[i] = new;
                    }
                }
                if use_gamma {
                    let u3 = state.u3.data_mut();
                    for i in 0..n {
                        u3[i] = v3[i] + params.theta * div3[i];
                    }
                }

                // Dual update: p <- (p + taut grad u) / (1 + taut |grad u|).
                forward_gradient(state.u1.data(), h, w, &mut ux, &mut uy);
                dual_step(&mut p11, &mut p12, &ux, &uy, taut);
                forward_gradient(state.u2.data(), h, w, &mut ux, &mut uy);
                dual_step(&mut p21, &mut p22, &ux, &uy, taut);
                if use_gamma {
                    forward_gradient(state.u3.data(), h, w, &mut ux, &mut uy);
                    dual_step(&mut p31, &mut p32, &ux, &uy, taut);
                }
            }
        }

        if params.median_filter_radius > 0 {
            state.u1 = state.u1.median_filter(params.median_filter_radius);
            state.u2 = state.u2.median_filter(params.median_filter_radius);
        }
    }
}

#[inline]
fn dual_step(pa: &mut [f64], pb: &mut [f64], ux: &[f64], uy: &[f64], taut: f64) {
    for i in 0..pa.len() {
        let ng = 1.0 + taut * (ux[i] * ux[i] + uy[i] * uy[i]).sqrt();
        pa[i] = (pa[i] + taut * ux[i]) / ng;
        pb[i] = (pb[i] + taut * uy[i]) / ng;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_params_are_valid_and_serialize_eleven_fields() {
        let p = TvL1Params::default();
        p.validate().unwrap();
        let v = serde_json::to_value(p).unwrap();
        assert_eq!(v.as_object().unwrap().len(), 11);
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = TvL1Params::default();
        p.scale_step = 1.0;
        assert!(p.validate().is_err());
        let mut p = TvL1Params::default();
        p.warps = 0;
        assert!(p.validate().is_err());
        let mut p = TvL1Params::default();
        p.theta = -1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn pyramid_drops_small_levels() {
        let p = TvL1Params::default();
        assert_eq!(p.pyramid_sizes(128, 128), vec![(128, 128), (64, 64), (32, 32), (16, 16)]);
        assert_eq!(p.pyramid_sizes(10, 10), vec![(10, 10)]);
    }

    #[test]
    fn divergence_is_negative_adjoint_of_gradient() {
        // <grad u, p> = -<u, div p> on an irregular field.
        let (h, w) = (5, 7);
        let u: Vec<f64> = (0..h * w).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let p1: Vec<f64> = (0..h * w).map(|i| ((i * 13) % 7) as f64 * 0.5).collect();
        let p2: Vec<f64> = (0..h * w).map(|i| ((i * 29) % 5) as f64 - 2.0).collect();
        let (mut ux, mut uy, mut div) = (vec![0.0; h * w], vec![0.0; h * w], vec![0.0; h * w]);
        forward_gradient(&u, h, w, &mut ux, &mut uy);
        divergence(&p1, &p2, h, w, &mut div);
        let lhs: f64 = (0..h * w).map(|i| ux[i] * p1[i] + uy[i] * p2[i]).sum();
        let rhs: f64 = -(0..h * w).map(|i| u[i] * div[i]).sum::<f64>();
        assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
    }

    #[test]
    fn identical_frames_give_zero_flow() {
        let img = Plane::from_fn(32, 32, |y, x| ((x as f64 * 0.3).sin() + (y as f64 * 0.2).cos()) * 0.25 + 0.5);
        let f = estimate_flow(&img, &img, &TvL1Params::default()).unwrap();
        assert!(f.max_magnitude() <= 0.01);
    }

    #[test]
    fn constant_image_gives_exact_zero() {
        let c = Plane::from_fn(20, 20, |_, _| 0.4);
        let other = Plane::from_fn(20, 20, |y, x| (x + y) as f64 / 40.0);
        let f = estimate_flow(&c, &other, &TvL1Params::default()).unwrap();
        assert!(f.u().iter().chain(f.v()).all(|&v| v == 0.0));
    }

    #[test]
    fn mismatched_dims_rejected() {
        let a = Plane::zeros(4, 4);
        let b = Plane::zeros(4, 5);
        assert!(estimate_flow(&a, &b, &TvL1Params::default()).is_err());
    }

    #[test]
    fn gamma_term_runs() {
        let a = Plane::from_fn(24, 24, |y, x| ((x as f64 * 0.4).sin() * (y as f64 * 0.3).cos()) * 0.4 + 0.5);
        let b = Plane::from_fn(24, 24, |y, x| ((x as f64 * 0.4 - 0.4).sin() * (y as f64 * 0.3).cos()) * 0.4 + 0.5);
        let p = TvL1Params {
            gamma: 0.5,
            ..TvL1Params::default()
        };
        let f = estimate_flow(&a, &b, &p).unwrap();
        assert!(f.u().iter().all(|v| v.is_finite()));
    }
}
