//! Fine-grid exponential mechanism over split values of one numerical
//! feature: the brute-force reference the grid-less sampler is checked
//! against. Utilities are recomputed from scratch at every grid point.

use rand::Rng;

/// MSE split gain computed directly from (value, gradient) pairs at split s:
/// rows with value <= s go left.
pub fn brute_force_gain(points: &[(f64, f64)], split: f64, lambda: f64) -> f64 {
    let (mut sum_l, mut n_l, mut sum_r, mut n_r) = (0.0, 0usize, 0.0, 0usize);
    for &(v, g) in points {
        if v <= split {
            sum_l += g;
            n_l += 1;
        } else {
            sum_r += g;
            n_r += 1;
        }
    }
    sum_l * sum_l / (n_l as f64 + lambda) + sum_r * sum_r / (n_r as f64 + lambda)
}

/// Fine-grid exponential mechanism with utilities precomputed once: sample
/// from `grid_points` evenly spaced values in [border.0, border.1] with
/// probability proportional to exp(eps * u / (2 delta_u)).
pub struct FineGridExpMech {
    lo: f64,
    step: f64,
    cumulative: Vec<f64>,
}

impl FineGridExpMech {
    pub fn new(
        points: &[(f64, f64)],
        border: (f64, f64),
        lambda: f64,
        eps: f64,
        delta_u: f64,
        grid_points: usize,
    ) -> Self {
        let step = (border.1 - border.0) / (grid_points - 1) as f64;
        let utilities: Vec<f64> = (0..grid_points)
            .map(|i| brute_force_gain(points, border.0 + step * i as f64, lambda))
            .collect();
        let max_u = utilities.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut cumulative = Vec::with_capacity(grid_points);
        let mut acc = 0.0;
        for u in &utilities {
            acc += (eps * (u - max_u) / (2.0 * delta_u)).exp();
            cumulative.push(acc);
        }
        Self {
            lo: border.0,
            step,
            cumulative,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let total = *self.cumulative.last().expect("nonempty grid");
        let draw = rng.random::<f64>() * total;
        let idx = self
            .cumulative
            .partition_point(|&c| c < draw)
            .min(self.cumulative.len() - 1);
        self.lo + self.step * idx as f64
    }
}

/// One-shot convenience wrapper around [`FineGridExpMech`].
pub fn fine_grid_exp_mech<R: Rng>(
    points: &[(f64, f64)],
    border: (f64, f64),
    lambda: f64,
    eps: f64,
    delta_u: f64,
    grid_points: usize,
    rng: &mut R,
) -> f64 {
    FineGridExpMech::new(points, border, lambda, eps, delta_u, grid_points).sample(rng)
}
