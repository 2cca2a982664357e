//! Gaussian-process surrogate of a sampled map `x -> f(x)`.
//!
//! Each output coordinate gets its own scalar GP with a squared-exponential
//! kernel. All coordinates share the training inputs and the per-axis length
//! scales; signal variance, noise and prior mean are per coordinate.
//! Hyperparameters are fixed from the data, never optimized:
//!
//! * length scale on axis `i`: median pairwise distance of the inputs along `i`
//! * signal variance `s²`: variance of that coordinate's training outputs
//! * noise `σ_n²`: `jitter * s²`, multiplied by 10 on each Cholesky failure
//! * prior mean: mean of that coordinate's training outputs

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::grid::Rect;
use crate::linalg::Cholesky;

/// One observed transition `input -> output`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair {
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

impl SamplePair {
    pub fn new(input: Vec<f64>, output: Vec<f64>) -> Self {
        SamplePair { input, output }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig {
    /// Noise variance relative to the signal variance.
    pub jitter: f64,
    /// How many times the noise may be multiplied by 10 after a failed factorization.
    pub max_escalations: u32,
    /// Explicit per-axis length scales; `None` uses the median-distance rule.
    pub length_scales: Option<Vec<f64>>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            jitter: 1e-6,
            max_escalations: 6,
            length_scales: None,
        }
    }
}

/// Controls how a cell's image box is widened by the model's uncertainty.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceConfig {
    /// Standard-deviation multiplier.
    pub z: f64,
    /// Number of points sampled in each cell.
    pub samples_per_cell: usize,
    /// Relative inflation applied to the final box.
    pub epsilon: f64,
}

impl VarianceConfig {
    /// `z = 2`, `epsilon = 1e-9`, and `min(2^d + 3^d, 64)` samples per cell.
    pub fn for_dim(dim: usize) -> Self {
        let d = dim.min(16) as u32;
        let samples = (2usize.pow(d) + 3usize.pow(d)).min(64);
        VarianceConfig {
            z: 2.0,
            samples_per_cell: samples,
            epsilon: 1e-9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.z >= 0.0) || !self.z.is_finite() {
            return Err(invalid!("z must be a finite non-negative number, got {}", self.z));
        }
        if self.samples_per_cell == 0 {
            return Err(invalid!("samples_per_cell must be at least 1"));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(invalid!("epsilon must be a finite non-negative number, got {}", self.epsilon));
        }
        Ok(())
    }
}

/// Fitted parameters of the GP for one output coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateFit {
    pub prior_mean: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
    /// `K^{-1} (y - prior_mean)`.
    pub dual_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel {
    dim: usize,
    inputs: Vec<Vec<f64>>,
    length_scales: Vec<f64>,
    coords: Vec<CoordinateFit>,
    factors: Vec<Option<Cholesky>>,
}

impl SurrogateModel {
    /// Fits one GP per output coordinate.
    pub fn fit(pairs: &[SamplePair], config: &KernelConfig) -> Result<Self> {
        if pairs.len() < 2 {
            return Err(invalid!("need at least 2 sample pairs, got {}", pairs.len()));
        }
        let dim = pairs[0].input.len();
        if dim == 0 {
            return Err(invalid!("sample pairs have dimension 0"));
        }
        for (i, p) in pairs.iter().enumerate() {
            if p.input.len() != dim || p.output.len() != dim {
                return Err(invalid!(
                    "pair {i} has input/output dimensions {}/{}, expected {dim}",
                    p.input.len(),
                    p.output.len()
                ));
            }
            if !p.input.iter().chain(&p.output).all(|v| v.is_finite()) {
                return Err(invalid!("pair {i} contains a non-finite value"));
            }
        }
        if pairs.iter().all(|p| p.input == pairs[0].input) {
            return Err(invalid!("all training inputs are identical"));
        }
        if !(config.jitter > 0.0) || !config.jitter.is_finite() {
            return Err(invalid!("jitter must be positive, got {}", config.jitter));
        }

        let inputs: Vec<Vec<f64>> = pairs.iter().map(|p| p.input.clone()).collect();
        let length_scales = match &config.length_scales {
            Some(ls) => {
                if ls.len() != dim || !ls.iter().all(|&l| l > 0.0 && l.is_finite()) {
                    return Err(invalid!("length scales must be {dim} positive numbers"));
                }
                ls.clone()
            }
            None => (0..dim).map(|axis| median_distance(&inputs, axis)).collect(),
        };

        let n = inputs.len();
        let mut corr = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let r = correlation(&inputs[i], &inputs[j], &length_scales);
                corr[i * n + j] = r;
                corr[j * n + i] = r;
            }
        }

        let mut coords = Vec::with_capacity(dim);
        let mut factors = Vec::with_capacity(dim);
        for j in 0..dim {
            let y: Vec<f64> = pairs.iter().map(|p| p.output[j]).collect();
            let mean = y.iter().sum::<f64>() / n as f64;
            let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            if var == 0.0 {
                // Constant coordinate: the posterior is the prior mean with zero spread.
                coords.push(CoordinateFit {
                    prior_mean: mean,
                    signal_variance: 0.0,
                    noise_variance: 0.0,
                    dual_weights: vec![0.0; n],
                });
                factors.push(None);
                continue;
            }
            let mut noise = config.jitter * var;
            let mut attempt = 0;
            let chol = loop {
                let k: Vec<f64> = (0..n * n)
                    .map(|idx| var * corr[idx] + if idx % (n + 1) == 0 { noise } else { 0.0 })
                    .collect();
                if let Some(ch) = Cholesky::factor(n, &k) {
                    break ch;
                }
                if attempt >= config.max_escalations {
                    return Err(Error::Numerical(alloc::format!(
                        "kernel matrix for output {j} is not positive definite (noise {noise:e})"
                    )));
                }
                attempt += 1;
                noise *= 10.0;
            };
            let centered: Vec<f64> = y.iter().map(|v| v - mean).collect();
            coords.push(CoordinateFit {
                prior_mean: mean,
                signal_variance: var,
                noise_variance: noise,
                dual_weights: chol.solve(&centered),
            });
            factors.push(Some(chol));
        }

        Ok(SurrogateModel {
            dim,
            inputs,
            length_scales,
            coords,
            factors,
        })
    }

    /// Reassembles a model from stored parameters, refactoring the kernel
    /// matrices so predictive variances are available again.
    pub fn from_parts(
        inputs: Vec<Vec<f64>>,
        length_scales: Vec<f64>,
        coords: Vec<CoordinateFit>,
    ) -> Result<Self> {
        let dim = length_scales.len();
        let n = inputs.len();
        if dim == 0 || n == 0 {
            return Err(invalid!("model has no inputs"));
        }
        if inputs.iter().any(|x| x.len() != dim) || coords.len() != dim {
            return Err(invalid!("model parts have inconsistent dimensions"));
        }
        if coords.iter().any(|c| c.dual_weights.len() != n) {
            return Err(invalid!("dual weights do not match the number of inputs"));
        }
        let mut factors = Vec::with_capacity(dim);
        for (j, c) in coords.iter().enumerate() {
            if c.signal_variance == 0.0 {
                factors.push(None);
                continue;
            }
            let mut k = vec![0.0; n * n];
            for a in 0..n {
                for b in 0..n {
                    k[a * n + b] = c.signal_variance * correlation(&inputs[a], &inputs[b], &length_scales);
                }
                k[a * n + a] += c.noise_variance;
            }
            let ch = Cholesky::factor(n, &k).ok_or_else(|| {
                Error::Numerical(alloc::format!("stored kernel for output {j} is not positive definite"))
            })?;
            factors.push(Some(ch));
        }
        Ok(SurrogateModel {
            dim,
            inputs,
            length_scales,
            coords,
            factors,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn length_scales(&self) -> &[f64] {
        &self.length_scales
    }

    pub fn coordinates(&self) -> &[CoordinateFit] {
        &self.coords
    }

    /// Posterior mean and standard deviation of every output coordinate at `x`.
    pub fn predict(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != self.dim {
            return Err(invalid!("query has dimension {}, model has {}", x.len(), self.dim));
        }
        let r: Vec<f64> = self
            .inputs
            .iter()
            .map(|xi| correlation(x, xi, &self.length_scales))
            .collect();
        let mut mean = Vec::with_capacity(self.dim);
        let mut std = Vec::with_capacity(self.dim);
        for (c, f) in self.coords.iter().zip(&self.factors) {
            let Some(chol) = f else {
                mean.push(c.prior_mean);
                std.push(0.0);
                continue;
            };
            let k: Vec<f64> = r.iter().map(|v| c.signal_variance * v).collect();
            let m = c.prior_mean + k.iter().zip(&c.dual_weights).map(|(a, b)| a * b).sum::<f64>();
            let v = chol.forward(&k);
            let var = c.signal_variance + c.noise_variance - v.iter().map(|t| t * t).sum::<f64>();
            mean.push(m);
            std.push(libm::sqrt(var.max(0.0)));
        }
        Ok((mean, std))
    }

    /// Box containing the model's `z`-sigma intervals at every sample point of `cell`,
    /// inflated by `epsilon` times its extent.
    pub fn image_box(&self, cell: &Rect, cfg: &VarianceConfig) -> Result<Rect> {
        cfg.validate()?;
        if cell.dim() != self.dim {
            return Err(invalid!("cell has dimension {}, model has {}", cell.dim(), self.dim));
        }
        let mut lower = vec![f64::INFINITY; self.dim];
        let mut upper = vec![f64::NEG_INFINITY; self.dim];
        for p in cell_samples(cell, cfg.samples_per_cell) {
            let (m, s) = self.predict(&p)?;
            for j in 0..self.dim {
                lower[j] = lower[j].min(m[j] - cfg.z * s[j]);
                upper[j] = upper[j].max(m[j] + cfg.z * s[j]);
            }
        }
        Ok(Rect::new(lower, upper)?.inflate(cfg.epsilon))
    }
}

fn correlation(a: &[f64], b: &[f64], length_scales: &[f64]) -> f64 {
    let q: f64 = a
        .iter()
        .zip(b)
        .zip(length_scales)
        .map(|((x, y), l)| {
            let t = (x - y) / l;
            t * t
        })
        .sum();
    libm::exp(-0.5 * q)
}

/// Median of `|x_a[axis] - x_b[axis]|` over all pairs `a < b`. Falls back to
/// the mean non-zero distance when more than half the pairs coincide, and to
/// 1 when every input shares the same coordinate.
fn median_distance(inputs: &[Vec<f64>], axis: usize) -> f64 {
    let mut d = Vec::with_capacity(inputs.len() * (inputs.len() - 1) / 2);
    for a in 0..inputs.len() {
        for b in a + 1..inputs.len() {
            d.push(libm::fabs(inputs[a][axis] - inputs[b][axis]));
        }
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let median = if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    };
    if median > 0.0 {
        return median;
    }
    let nonzero: Vec<f64> = d.into_iter().filter(|&v| v > 0.0).collect();
    if nonzero.is_empty() {
        1.0
    } else {
        nonzero.iter().sum::<f64>() / nonzero.len() as f64
    }
}

/// Deterministic sample points of a box: the `2^d` corners (when the budget
/// allows) plus a regular interior lattice of `m^d` points, `m` as large as
/// the budget permits. With a budget below `2^d` only the interior lattice is
/// used, down to the single center point.
pub fn cell_samples(cell: &Rect, budget: usize) -> Vec<Vec<f64>> {
    let d = cell.dim();
    let corners = if d < usize::BITS as usize { 1usize << d } else { usize::MAX };
    let mut out = Vec::new();
    let remaining = if budget >= corners {
        for k in 0..corners {
            out.push(
                (0..d)
                    .map(|i| {
                        if (k >> (d - 1 - i)) & 1 == 1 {
                            cell.upper()[i]
                        } else {
                            cell.lower()[i]
                        }
                    })
                    .collect(),
            );
        }
        budget - corners
    } else {
        budget.max(1)
    };
    let mut m = 0usize;
    while pow_le(m + 1, d, remaining) {
        m += 1;
    }
    if m == 0 {
        if out.is_empty() {
            out.push(cell.center());
        }
        return out;
    }
    let total = m.pow(d as u32);
    for k in 0..total {
        let mut rest = k;
        let mut p = vec![0.0; d];
        for i in (0..d).rev() {
            let t = (rest % m) as f64;
            rest /= m;
            let frac = (t + 1.0) / (m as f64 + 1.0);
            p[i] = cell.lower()[i] + cell.extent(i) * frac;
        }
        out.push(p);
    }
    out
}

fn pow_le(base: usize, exp: usize, limit: usize) -> bool {
    let mut acc: usize = 1;
    for _ in 0..exp {
        acc = match acc.checked_mul(base) {
            Some(v) => v,
            None => return false,
        };
        if acc > limit {
            return false;
        }
    }
    acc <= limit
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pairs_1d(points: &[(f64, f64)]) -> Vec<SamplePair> {
        points
            .iter()
            .map(|&(x, y)| SamplePair::new(vec![x], vec![y]))
            .collect()
    }

    fn tight() -> KernelConfig {
        KernelConfig {
            jitter: 1e-8,
            ..KernelConfig::default()
        }
    }

    #[test]
    fn interpolates_two_points() {
        let m = SurrogateModel::fit(&pairs_1d(&[(0.0, 0.5), (1.0, 0.7)]), &tight()).unwrap();
        let (mean, std) = m.predict(&[0.0]).unwrap();
        assert!((mean[0] - 0.5).abs() < 1e-3);
        assert!(std[0] < 1e-3);
    }

    #[test]
    fn symmetric_data_gives_zero_at_origin() {
        let m = SurrogateModel::fit(&pairs_1d(&[(-1.0, -0.3), (1.0, 0.3)]), &tight()).unwrap();
        let (mean, _) = m.predict(&[0.0]).unwrap();
        assert!(mean[0].abs() < 1e-12);
    }

    #[test]
    fn two_point_posterior_matches_closed_form() {
        // Hand-evaluated 2x2 posterior: ℓ = 1 (the only pairwise distance),
        // s² = population variance, noise = jitter * s².
        let (x0, y0, x1, y1) = (0.0, 0.5, 1.0, 0.7);
        let m = SurrogateModel::fit(&pairs_1d(&[(x0, y0), (x1, y1)]), &KernelConfig::default()).unwrap();
        let mu = 0.5 * (y0 + y1);
        let s2 = 0.25 * (y1 - y0) * (y1 - y0);
        let sn = 1e-6 * s2;
        let r = libm::exp(-0.5);
        let (a, b) = (s2 + sn, s2 * r);
        let det = a * a - b * b;
        let (c0, c1) = (y0 - mu, y1 - mu);
        let alpha0 = (a * c0 - b * c1) / det;
        let alpha1 = (-b * c0 + a * c1) / det;
        let k = s2 * libm::exp(-0.5 * 0.25);
        let expect_mean = mu + k * (alpha0 + alpha1);
        let quad = (k * k * a - 2.0 * k * k * b + k * k * a) / det;
        let expect_std = libm::sqrt(s2 + sn - quad);
        let (mean, std) = m.predict(&[0.5]).unwrap();
        assert!((mean[0] - expect_mean).abs() < 1e-12);
        assert!((std[0] - expect_std).abs() < 1e-9);
    }

    #[test]
    fn reverts_to_prior_far_away() {
        let data: Vec<(f64, f64)> = (0..10).map(|i| (i as f64 * 0.1, libm::sin(i as f64))).collect();
        let m = SurrogateModel::fit(&pairs_1d(&data), &KernelConfig::default()).unwrap();
        let c = &m.coordinates()[0];
        let (mean, std) = m.predict(&[1e3]).unwrap();
        assert!((mean[0] - c.prior_mean).abs() < 1e-12);
        assert!((std[0] - libm::sqrt(c.signal_variance + c.noise_variance)).abs() < 1e-6);
    }

    #[test]
    fn fits_half_map() {
        let data: Vec<(f64, f64)> = (0..20)
            .map(|i| {
                let x = -1.0 + 2.0 * i as f64 / 19.0;
                (x, x / 2.0)
            })
            .collect();
        let m = SurrogateModel::fit(&pairs_1d(&data), &KernelConfig::default()).unwrap();
        let worst = (0..=1000)
            .map(|i| {
                let x = -1.0 + 2.0 * i as f64 / 1000.0;
                libm::fabs(m.predict(&[x]).unwrap().0[0] - x / 2.0)
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-2, "max error {worst}");
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(SurrogateModel::fit(&pairs_1d(&[(0.0, 1.0)]), &KernelConfig::default()).is_err());
        let same = pairs_1d(&[(0.3, 1.0), (0.3, 2.0)]);
        assert!(matches!(
            SurrogateModel::fit(&same, &KernelConfig::default()),
            Err(Error::Validation(_))
        ));
        let mixed = vec![
            SamplePair::new(vec![0.0], vec![1.0]),
            SamplePair::new(vec![0.0, 1.0], vec![1.0, 2.0]),
        ];
        assert!(SurrogateModel::fit(&mixed, &KernelConfig::default()).is_err());
        let m = SurrogateModel::fit(&pairs_1d(&[(0.0, 0.0), (1.0, 1.0)]), &KernelConfig::default()).unwrap();
        assert!(m.predict(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn constant_model_gives_point_image() {
        let m = SurrogateModel::fit(&pairs_1d(&[(0.0, 0.4), (0.5, 0.4), (1.0, 0.4)]), &KernelConfig::default())
            .unwrap();
        let cfg = VarianceConfig {
            z: 0.0,
            samples_per_cell: 5,
            epsilon: 0.0,
        };
        let b = m.image_box(&Rect::new(vec![0.0], vec![1.0]).unwrap(), &cfg).unwrap();
        assert_eq!(b, Rect::point(&[0.4]).unwrap());
    }

    #[test]
    fn image_of_half_map_matches_analytic_interval() {
        let data: Vec<(f64, f64)> = (0..20)
            .map(|i| {
                let x = -1.0 + 2.0 * i as f64 / 19.0;
                (x, x / 2.0)
            })
            .collect();
        let m = SurrogateModel::fit(&pairs_1d(&data), &KernelConfig::default()).unwrap();
        let cfg = VarianceConfig {
            z: 0.0,
            samples_per_cell: 200,
            epsilon: 0.0,
        };
        let b = m.image_box(&Rect::new(vec![0.0], vec![1.0]).unwrap(), &cfg).unwrap();
        assert!((b.lower()[0] - 0.0).abs() < 1e-2);
        assert!((b.upper()[0] - 0.5).abs() < 1e-2);
    }

    #[test]
    fn image_box_monotone_in_z_and_cell() {
        let data: Vec<(f64, f64)> = (0..12).map(|i| (i as f64 / 11.0, 0.5 * i as f64 / 11.0)).collect();
        let m = SurrogateModel::fit(&pairs_1d(&data), &KernelConfig::default()).unwrap();
        let cell = Rect::new(vec![0.2], vec![0.4]).unwrap();
        let mut cfg = VarianceConfig::for_dim(1);
        let small = m.image_box(&cell, &cfg).unwrap();
        cfg.z *= 2.0;
        let big = m.image_box(&cell, &cfg).unwrap();
        assert!(big.contains_rect(&small));
        let wide = m
            .image_box(&Rect::new(vec![0.1], vec![0.5]).unwrap(), &VarianceConfig::for_dim(1))
            .unwrap();
        assert!(wide.contains_rect(&small));
    }

    #[test]
    fn default_variance_config() {
        assert_eq!(VarianceConfig::for_dim(1).samples_per_cell, 5);
        assert_eq!(VarianceConfig::for_dim(2).samples_per_cell, 13);
        assert_eq!(VarianceConfig::for_dim(4).samples_per_cell, 64);
        let bad = VarianceConfig {
            z: -1.0,
            ..VarianceConfig::for_dim(1)
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn sample_scheme_counts() {
        let cell = Rect::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(cell_samples(&cell, 13).len(), 13);
        assert_eq!(cell_samples(&cell, 1), vec![vec![0.5, 0.5]]);
        assert_eq!(cell_samples(&cell, 4).len(), 4);
        let pts = cell_samples(&Rect::new(vec![0.0], vec![1.0]).unwrap(), 5);
        assert_eq!(pts, vec![vec![0.0], vec![1.0], vec![0.25], vec![0.5], vec![0.75]]);
    }

    #[test]
    fn round_trips_through_parts() {
        let data: Vec<(f64, f64)> = (0..8).map(|i| (i as f64, libm::cos(i as f64))).collect();
        let m = SurrogateModel::fit(&pairs_1d(&data), &KernelConfig::default()).unwrap();
        let back = SurrogateModel::from_parts(
            m.inputs().to_vec(),
            m.length_scales().to_vec(),
            m.coordinates().to_vec(),
        )
        .unwrap();
        assert_eq!(back.predict(&[2.5]).unwrap(), m.predict(&[2.5]).unwrap());
    }
}
