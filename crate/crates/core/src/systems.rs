//! Analytic test systems with exact interval images.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::grid::Rect;

/// Step size of the gradient map `x - h V'(x)`, `V(x) = (x^2 - 1)^2`.
pub const DOUBLE_WELL_STEP: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyticSystem {
    /// `x -> x / 2` on `[-1, 1]`.
    Contraction,
    /// `x -> x - 0.2 V'(x)` with `V(x) = (x^2 - 1)^2`, on `[-1.6, 1.6]`.
    DoubleWell,
    /// Product of the contraction (axis 0) and the double well (axis 1).
    Saddle,
}

impl AnalyticSystem {
    pub const ALL: [AnalyticSystem; 3] = [
        AnalyticSystem::Contraction,
        AnalyticSystem::DoubleWell,
        AnalyticSystem::Saddle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AnalyticSystem::Contraction => "contraction",
            AnalyticSystem::DoubleWell => "double-well",
            AnalyticSystem::Saddle => "saddle",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        AnalyticSystem::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn dim(self) -> usize {
        match self {
            AnalyticSystem::Saddle => 2,
            _ => 1,
        }
    }

    pub fn domain(self) -> Rect {
        let (lo, hi) = match self {
            AnalyticSystem::Contraction => (vec![-1.0], vec![1.0]),
            AnalyticSystem::DoubleWell => (vec![-1.6], vec![1.6]),
            AnalyticSystem::Saddle => (vec![-1.0, -1.6], vec![1.0, 1.6]),
        };
        Rect::new(lo, hi).expect("static domain")
    }

    pub fn apply(self, x: &[f64]) -> Vec<f64> {
        match self {
            AnalyticSystem::Contraction => vec![half(x[0])],
            AnalyticSystem::DoubleWell => vec![double_well(x[0])],
            AnalyticSystem::Saddle => vec![half(x[0]), double_well(x[1])],
        }
    }

    /// Enclosure of the image of `cell`.
    pub fn image(self, cell: &Rect) -> Result<Rect> {
        let (lo, hi) = (cell.lower(), cell.upper());
        match self {
            AnalyticSystem::Contraction => Rect::new(vec![half(lo[0])], vec![half(hi[0])]),
            AnalyticSystem::DoubleWell => {
                let (a, b) = double_well_range(lo[0], hi[0]);
                Rect::new(vec![a], vec![b])
            }
            AnalyticSystem::Saddle => {
                let (a, b) = double_well_range(lo[1], hi[1]);
                Rect::new(vec![half(lo[0]), a], vec![half(hi[0]), b])
            }
        }
    }
}

fn half(x: f64) -> f64 {
    0.5 * x
}

pub fn double_well(x: f64) -> f64 {
    x - DOUBLE_WELL_STEP * 4.0 * x * (x * x - 1.0)
}

/// Range of the double-well map on `[a, b]`: endpoint values plus any interior
/// critical point, widened by a few ulps to absorb rounding in the evaluation.
fn double_well_range(a: f64, b: f64) -> (f64, f64) {
    let h = DOUBLE_WELL_STEP;
    let crit = libm::sqrt((1.0 + 4.0 * h) / (12.0 * h));
    let mut lo = double_well(a).min(double_well(b));
    let mut hi = double_well(a).max(double_well(b));
    for c in [-crit, crit] {
        if a < c && c < b {
            let v = double_well(c);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let pad = |v: f64| 4.0 * f64::EPSILON * libm::fabs(v).max(1.0);
    (lo - pad(lo), hi + pad(hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in AnalyticSystem::ALL {
            assert_eq!(AnalyticSystem::from_name(s.name()), Some(s));
        }
        assert_eq!(AnalyticSystem::from_name("lorenz"), None);
    }

    #[test]
    fn double_well_fixed_points() {
        for x in [-1.0, 0.0, 1.0] {
            assert!((double_well(x) - x).abs() < 1e-15);
        }
        assert!((double_well(1.5)).abs() < 1e-12);
    }

    #[test]
    fn double_well_image_encloses_dense_samples() {
        let s = AnalyticSystem::DoubleWell;
        for k in 0..64 {
            let a = -1.6 + 0.05 * k as f64;
            let cell = Rect::new(vec![a], vec![a + 0.05]).unwrap();
            let img = s.image(&cell).unwrap();
            for t in 0..=200 {
                let x = a + 0.05 * t as f64 / 200.0;
                assert!(img.contains(&s.apply(&[x])));
            }
        }
    }
}
