//! Renyi-DP accounting: mechanism bounds, Poisson-subsampling amplification,
//! sequential composition, ADP conversion, and the plan search that picks
//! (alpha^, sigma^2_leaf) for a requested (eps_trees, delta_trees).
//!
//! Orders are integers alpha >= 2 throughout; the subsampling bound's
//! binomial sum requires it.

use serde::{Deserialize, Serialize};

use crate::error::AccountantError;
use crate::params::{Hyperparameters, InitNoiseVariant};

/// Renyi bound per integer order alpha in [2, alpha_max].
#[derive(Debug, Clone, PartialEq)]
pub struct RdpCurve {
    rho: Vec<f64>, // rho[i] is the bound at order i + 2
}

impl RdpCurve {
    pub fn from_fn(alpha_max: u32, f: impl Fn(u32) -> f64) -> Self {
        assert!(alpha_max >= 2);
        let rho: Vec<f64> = (2..=alpha_max).map(f).collect();
        assert!(rho.iter().all(|&r| r >= 0.0), "rho(alpha) must be >= 0");
        RdpCurve { rho }
    }

    pub fn alpha_max(&self) -> u32 {
        self.rho.len() as u32 + 1
    }

    pub fn get(&self, alpha: u32) -> Result<f64, AccountantError> {
        if alpha < 2 || alpha > self.alpha_max() {
            return Err(AccountantError::MissingOrder(alpha));
        }
        Ok(self.rho[(alpha - 2) as usize])
    }
}

/// Accountant output: the order and leaf variance training will use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccountantPlan {
    pub alpha_hat: u32,
    pub sigma2_leaf: f64,
    /// Global and per-point individual budget rho(alpha^).
    pub rho_budget: f64,
    /// Converted epsilon'_trees actually achieved by the plan.
    pub epsilon_reported: f64,
}

/// RDP of the Gaussian mechanism with non-spherical noise.
///
/// For a D-dimensional statistic with per-dimension sensitivities s_d, noise
/// covariance D^-1 diag(sigma^2 / r_d), the bound at order alpha is
/// alpha * D * sum_d(r_d s_d^2) / (2 sigma^2).
pub fn rdp_gauss_nonspherical(
    alpha: u32,
    sensitivities: &[f64],
    weights: &[f64],
    sigma2: f64,
) -> Result<f64, AccountantError> {
    if alpha < 2 {
        return Err(AccountantError::BadOrder(alpha));
    }
    if sigma2 <= 0.0 {
        return Err(AccountantError::NonPositiveVariance(sigma2));
    }
    if weights.len() != sensitivities.len() || weights.iter().any(|&w| w <= 0.0) {
        return Err(AccountantError::BadWeights(weights.iter().sum()));
    }
    let sum_w: f64 = weights.iter().sum();
    if (sum_w - 1.0).abs() > 1e-12 {
        return Err(AccountantError::BadWeights(sum_w));
    }
    let d = sensitivities.len() as f64;
    let weighted: f64 = sensitivities
        .iter()
        .zip(weights)
        .map(|(s, r)| r * s * s)
        .sum();
    Ok(alpha as f64 * d * weighted / (2.0 * sigma2))
}

/// Laplace scale the init-score mechanism samples for a given variant.
pub fn init_score_noise_scale(
    variant: InitNoiseVariant,
    m_star: f64,
    n: usize,
    eps_init: f64,
) -> f64 {
    match variant {
        InitNoiseVariant::SampledScale => 2.0 * m_star / (n as f64 * eps_init),
        InitNoiseVariant::TheoremScale => m_star / (n as f64 * eps_init),
    }
}

/// Pure-DP epsilon of the init-score release: sensitivity / scale.
///
/// The clipped mean has sensitivity 2 m* / n under add/remove, so this is
/// eps_init for the sampled-scale variant and 2 eps_init for the
/// theorem-scale variant.
pub fn init_score_pure_epsilon(variant: InitNoiseVariant, eps_init: f64) -> f64 {
    match variant {
        InitNoiseVariant::SampledScale => eps_init,
        InitNoiseVariant::TheoremScale => 2.0 * eps_init,
    }
}

/// RDP of the Laplace-noised clipped-mean init score.
///
/// Closed form for two Laplace distributions at distance Delta with scale
/// lambda, with t = Delta / lambda:
/// rho(alpha) = 1/(alpha-1) * ln( a/(2a-1) e^{(a-1)t} + (a-1)/(2a-1) e^{-a t} ).
pub fn rdp_laplace_init(
    alpha: u32,
    m_star: f64,
    n: usize,
    eps_init: f64,
    variant: InitNoiseVariant,
) -> Result<f64, AccountantError> {
    if alpha < 2 {
        return Err(AccountantError::BadOrder(alpha));
    }
    if n == 0 {
        return Err(AccountantError::EmptyDataset);
    }
    let sensitivity = 2.0 * m_star / n as f64;
    let scale = init_score_noise_scale(variant, m_star, n, eps_init);
    Ok(rdp_laplace_shifted(alpha, sensitivity / scale))
}

/// Order-alpha Renyi divergence between Laplace(0, 1) and Laplace(t, 1).
pub fn rdp_laplace_shifted(alpha: u32, t: f64) -> f64 {
    let a = alpha as f64;
    let inner = a / (2.0 * a - 1.0) * ((a - 1.0) * t).exp()
        + (a - 1.0) / (2.0 * a - 1.0) * (-a * t).exp();
    inner.ln() / (a - 1.0)
}

/// k * ln_x with the 0 * (-inf) = 0 convention for k = 0.
#[inline]
fn ln_pow(ln_x: f64, k: u32) -> f64 {
    if k == 0 {
        0.0
    } else {
        k as f64 * ln_x
    }
}

/// Evaluate the amplification bound from the binomial-coefficient logs
/// (`ln_coef[l-2]` = ln[C(alpha,l) gamma^l (1-gamma)^(alpha-l)]) and the
/// curve exponents (`x[l-2]` = (l-1) rho'(l)).
///
/// The head factor (1-g)^(a-1)(ag - g + 1) is exactly the l = 0 and l = 1
/// binomial terms of sum_l C(a,l) g^l (1-g)^(a-l) = 1, so the whole bracket
/// is 1 + sum_{l>=2} C(a,l) g^l (1-g)^(a-l) (E_l - 1) with E_2 = e^{x_2} and
/// E_l = 3 e^{x_l}: every excess term is nonnegative, which keeps full
/// relative precision down to vanishing bounds. Falls back to log-sum-exp
/// over the raw terms only where e^{x} would overflow.
fn combine_amplification_terms(alpha: u32, ln_t0: f64, ln_coef: &[f64], x: &[f64]) -> f64 {
    debug_assert_eq!(ln_coef.len(), x.len());
    debug_assert_eq!(ln_coef.len() as u32, alpha - 1);
    let denom = alpha as f64 - 1.0;
    let max_t = ln_coef
        .iter()
        .zip(x)
        .map(|(c, e)| c + e)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_t < 630.0 {
        // excess form: D = C_2 expm1(x_2) + sum_{l>=3} C_l e^{x_l} (3 - e^{-x_l})
        let mut d = ln_coef[0].exp() * x[0].exp_m1();
        for (c, e) in ln_coef.iter().zip(x).skip(1) {
            d += (c + e).exp() * (3.0 - (-e).exp());
        }
        d.ln_1p() / denom
    } else {
        let terms: Vec<f64> = std::iter::once(ln_t0)
            .chain(std::iter::once(ln_coef[0] + x[0]))
            .chain(
                ln_coef
                    .iter()
                    .zip(x)
                    .skip(1)
                    .map(|(c, e)| 3f64.ln() + c + e),
            )
            .collect();
        let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
        (max + sum.ln()) / denom
    }
}

/// Privacy amplification by Poisson subsampling at ratio gamma.
///
/// Evaluates, in log-space,
/// rho(alpha) = 1/(alpha-1) * ln( (1-g)^(a-1) (a g - g + 1)
///   + C(a,2) g^2 (1-g)^(a-2) e^{rho'(2)}
///   + 3 sum_{l=3}^{a} C(a,l) (1-g)^(a-l) g^l e^{(l-1) rho'(l)} ).
pub fn rdp_subsampled(alpha: u32, curve: &RdpCurve, gamma: f64) -> Result<f64, AccountantError> {
    if alpha < 2 {
        return Err(AccountantError::BadOrder(alpha));
    }
    curve.get(alpha)?; // all orders 2..=alpha must exist
    let a = alpha as f64;
    let ln_g = gamma.ln();
    let ln_1mg = (-gamma).ln_1p();

    let ln_t0 = ln_pow(ln_1mg, alpha - 1) + ((a - 1.0) * gamma).ln_1p();
    let mut ln_coef = Vec::with_capacity(alpha as usize - 1);
    let mut x = Vec::with_capacity(alpha as usize - 1);
    // ln C(alpha, l) built incrementally from l = 2 upward.
    let mut ln_binom = (a * (a - 1.0) / 2.0).ln();
    ln_coef.push(ln_binom + ln_pow(ln_g, 2) + ln_pow(ln_1mg, alpha - 2));
    x.push(curve.get(2)?);
    for l in 3..=alpha {
        ln_binom += ((a - l as f64 + 1.0) / l as f64).ln();
        ln_coef.push(ln_binom + ln_pow(ln_1mg, alpha - l) + ln_pow(ln_g, l));
        x.push((l - 1) as f64 * curve.get(l)?);
    }
    Ok(combine_amplification_terms(alpha, ln_t0, &ln_coef, &x))
}

/// Precomputed per-(alpha, gamma) constants for curves linear in the order,
/// rho'(l) = l * c. This is the hot path of per-point accounting: one table
/// serves a whole training run.
#[derive(Debug, Clone)]
pub struct SubsampledLossTable {
    alpha: u32,
    ln_t0: f64,            // ln[(1-g)^(a-1)(ag - g + 1)] via ln_1p pieces
    // per l >= 2: (ln[C(a,l) g^l (1-g)^(a-l)], (l-1)*l); the curve exponent
    // for rho'(l) = l * c is (l-1)*l*c
    coefs: Vec<(f64, f64)>,
}

impl SubsampledLossTable {
    pub fn new(alpha: u32, gamma: f64) -> Result<Self, AccountantError> {
        if alpha < 2 {
            return Err(AccountantError::BadOrder(alpha));
        }
        let a = alpha as f64;
        let ln_g = gamma.ln();
        let ln_1mg = (-gamma).ln_1p();
        let ln_t0 = ln_pow(ln_1mg, alpha - 1) + ((a - 1.0) * gamma).ln_1p();
        let mut ln_binom = (a * (a - 1.0) / 2.0).ln();
        let mut coefs = Vec::with_capacity(alpha as usize - 1);
        coefs.push((
            ln_binom + ln_pow(ln_g, 2) + ln_pow(ln_1mg, alpha - 2),
            2.0,
        ));
        for l in 3..=alpha {
            ln_binom += ((a - l as f64 + 1.0) / l as f64).ln();
            coefs.push((
                ln_binom + ln_pow(ln_1mg, alpha - l) + ln_pow(ln_g, l),
                ((l - 1) * l) as f64,
            ));
        }
        Ok(Self {
            alpha,
            ln_t0,
            coefs,
        })
    }

    pub fn alpha(&self) -> u32 {
        self.alpha
    }

    /// Amplified bound for the linear curve rho'(l) = l * c. Same arithmetic
    /// as the generic path, allocation-free for the per-point hot loop.
    pub fn loss(&self, c: f64) -> f64 {
        debug_assert!(c >= 0.0);
        let denom = self.alpha as f64 - 1.0;
        let mut max_t = f64::NEG_INFINITY;
        for &(k, m) in &self.coefs {
            let t = k + m * c;
            if t > max_t {
                max_t = t;
            }
        }
        if max_t < 630.0 {
            let (k2, m2) = self.coefs[0];
            let mut d = k2.exp() * (m2 * c).exp_m1();
            for &(k, m) in &self.coefs[1..] {
                let e = m * c;
                d += (k + e).exp() * (3.0 - (-e).exp());
            }
            d.ln_1p() / denom
        } else {
            let (k2, m2) = self.coefs[0];
            let mut max = self.ln_t0.max(k2 + m2 * c);
            for &(k, m) in &self.coefs[1..] {
                max = max.max(3f64.ln() + k + m * c);
            }
            let mut sum = (self.ln_t0 - max).exp() + (k2 + m2 * c - max).exp();
            for &(k, m) in &self.coefs[1..] {
                sum += (3f64.ln() + k + m * c - max).exp();
            }
            (max + sum.ln()) / denom
        }
    }
}

/// Piecewise-linear upper bound of the amplified loss over a slope range.
///
/// The bound c -> loss(c) is a log-sum-exp of functions affine in c, hence
/// convex; chords between exactly-evaluated nodes therefore never
/// under-estimate, so ledger charges made through this table stay sound.
/// Endpoints (c = 0-gradient and c = worst-case) are grid nodes and exact.
#[derive(Debug, Clone)]
pub struct ChordLossTable {
    c_lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl ChordLossTable {
    pub const NODES: usize = 2048;

    pub fn new(table: &SubsampledLossTable, c_lo: f64, c_hi: f64) -> Self {
        assert!(c_hi >= c_lo && c_lo >= 0.0);
        let step = if c_hi > c_lo {
            (c_hi - c_lo) / (Self::NODES - 1) as f64
        } else {
            1.0
        };
        let values = (0..Self::NODES)
            .map(|i| table.loss(c_lo + step * i as f64))
            .collect();
        Self { c_lo, step, values }
    }

    /// Chord-interpolated charge; clamps to the endpoint values outside the
    /// built range.
    pub fn charge(&self, c: f64) -> f64 {
        let x = (c - self.c_lo) / self.step;
        if x <= 0.0 {
            return self.values[0];
        }
        let i = x as usize;
        if i + 1 >= self.values.len() {
            return *self.values.last().unwrap();
        }
        let frac = x - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    pub fn worst(&self) -> f64 {
        *self.values.last().unwrap()
    }
}

/// Adaptive sequential composition: bounds add at a common order.
pub fn rdp_compose(parts: &[f64]) -> f64 {
    debug_assert!(parts.iter().all(|&p| p >= 0.0));
    parts.iter().sum()
}

/// Convert an RDP bound to approximate DP: solve exp(rho - alpha eps) = delta,
/// i.e. eps = (rho - ln delta) / alpha.
pub fn rdp_to_adp(alpha: u32, rho: f64, delta: f64) -> Result<f64, AccountantError> {
    if alpha < 2 {
        return Err(AccountantError::BadOrder(alpha));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(AccountantError::BadDelta(delta));
    }
    Ok((rho - delta.ln()) / alpha as f64)
}

/// The sigma^2 candidate grid: geometric points in (1e-3, 1000].
pub fn sigma2_grid() -> Vec<f64> {
    const POINTS: usize = 200;
    const LG_MIN: f64 = -3.0;
    const LG_MAX: f64 = 3.0;
    (1..=POINTS)
        .map(|i| 10f64.powf(LG_MIN + (LG_MAX - LG_MIN) * i as f64 / POINTS as f64))
        .collect()
}

/// Admissibility window: accept eps' in [LOW * eps_trees, eps_trees].
pub const ADMISSIBLE_LOW: f64 = 0.95;

/// Curve slope for the worst-case single tree: rho'(l) = l * (r1 + r2 g*^2) / sigma^2.
pub fn tree_curve_slope(r1: f64, r2: f64, g: f64, sigma2: f64) -> f64 {
    (r1 + r2 * g * g) / sigma2
}

/// Grid-search (alpha, sigma^2_leaf) and pick the admissible pair with the
/// smallest sigma^2 (ties broken by smaller alpha).
///
/// Per candidate: the worst-case subsampled single-tree bound at order alpha,
/// composed over t_regular rounds, converted to eps' at delta_trees.
pub fn initialize(h: &Hyperparameters) -> Result<AccountantPlan, AccountantError> {
    h.validate()?;
    let grid = sigma2_grid();
    let mut best: Option<AccountantPlan> = None;
    let mut closest = f64::INFINITY;
    for alpha in 2..=h.alpha_max {
        let table = SubsampledLossTable::new(alpha, h.gamma)?;
        for &sigma2 in &grid {
            let c = tree_curve_slope(h.r1, h.r2, h.g_star, sigma2);
            let rho_tree = table.loss(c);
            let rho = h.t_regular as f64 * rho_tree;
            let eps = rdp_to_adp(alpha, rho, h.delta_trees)?;
            if (eps - h.eps_trees).abs() < (closest - h.eps_trees).abs() {
                closest = eps;
            }
            if eps >= ADMISSIBLE_LOW * h.eps_trees && eps <= h.eps_trees {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        sigma2 < b.sigma2_leaf
                            || (sigma2 == b.sigma2_leaf && alpha < b.alpha_hat)
                    }
                };
                if better {
                    best = Some(AccountantPlan {
                        alpha_hat: alpha,
                        sigma2_leaf: sigma2,
                        rho_budget: rho,
                        epsilon_reported: eps,
                    });
                }
            }
        }
    }
    best.ok_or(AccountantError::Infeasible {
        target: h.eps_trees,
        closest,
    })
}
