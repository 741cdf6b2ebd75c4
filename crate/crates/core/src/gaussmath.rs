//! One-dimensional Gaussian kernel: the standard normal CDF and quantile,
//! the truncation corrections `v`/`w`, and moment-matched conditioning of a
//! Gaussian on one-sided and two-sided events.
//!
//! Beliefs are always `(mean, variance)` pairs. Every moment-matched update in
//! [`crate::models`] reduces to one of the conditioning functions here plus a
//! linear back-distribution onto the team members.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::ops::{Add, Neg, Sub};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this `t` the greater-than corrections are evaluated through the
/// continued fraction of the Mills ratio instead of `pdf / cdf`.
const TAIL_SWITCH: f64 = -5.0;

/// Depth of the backward continued-fraction evaluation.
const CF_TERMS: usize = 200;

/// Standardized interval widths below this use Gauss-Legendre moments
/// about the interval midpoint; the closed form cancels catastrophically.
const NARROW_WIDTH: f64 = 0.05;

/// Smallest probability mass an observation may have before it is treated
/// as impossible under the current beliefs.
pub const MIN_EVIDENCE: f64 = 1e-300;

/// A univariate normal belief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian1D {
    pub mean: f64,
    pub variance: f64,
}

impl Gaussian1D {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() {
            return Err(Error::NonFinite("Gaussian1D::new"));
        }
        if variance < 0.0 {
            return Err(Error::Domain { op: "Gaussian1D::new (variance)", value: variance });
        }
        Ok(Self { mean, variance })
    }

    /// A known quantity: zero variance.
    pub const fn fixed(value: f64) -> Self {
        Self { mean: value, variance: 0.0 }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// The same belief with `extra` added to its variance.
    pub fn widened(self, extra: f64) -> Self {
        Self { mean: self.mean, variance: self.variance + extra }
    }

    fn check_finite(&self, op: &'static str) -> Result<()> {
        if self.mean.is_finite() && self.variance.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(op))
        }
    }

    /// Moment-matched belief of `X | X > threshold`.
    pub fn greater_than(self, threshold: f64) -> Result<Self> {
        self.check_finite("greater_than")?;
        if !threshold.is_finite() {
            return Err(Error::NonFinite("greater_than"));
        }
        if self.variance <= 0.0 {
            return Err(Error::Domain { op: "greater_than (variance)", value: self.variance });
        }
        let sd = self.std_dev();
        let t = (self.mean - threshold) / sd;
        let (v, w) = greater_corrections(t);
        let shrink = (1.0 - w).max(f64::MIN_POSITIVE);
        Ok(Self { mean: self.mean + sd * v, variance: self.variance * shrink })
    }

    /// Moment-matched belief of `X | X < threshold`.
    pub fn less_than(self, threshold: f64) -> Result<Self> {
        Ok(-((-self).greater_than(-threshold)?))
    }
}

/// Sum of independent Gaussians.
impl Add for Gaussian1D {
    type Output = Gaussian1D;

    fn add(self, rhs: Self) -> Self {
        Self { mean: self.mean + rhs.mean, variance: self.variance + rhs.variance }
    }
}

/// Difference of independent Gaussians.
impl Sub for Gaussian1D {
    type Output = Gaussian1D;

    fn sub(self, rhs: Self) -> Self {
        Self { mean: self.mean - rhs.mean, variance: self.variance + rhs.variance }
    }
}

impl Neg for Gaussian1D {
    type Output = Gaussian1D;

    fn neg(self) -> Self {
        Self { mean: -self.mean, variance: self.variance }
    }
}

impl std::iter::Sum for Gaussian1D {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Gaussian1D::fixed(0.0), |acc, g| acc + g)
    }
}

/// Standard normal density.
#[inline]
pub fn std_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF, accurate in both tails.
#[inline]
pub fn std_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Φ(t)` without cancellation.
#[inline]
pub fn std_sf(t: f64) -> f64 {
    0.5 * libm::erfc(t * FRAC_1_SQRT_2)
}

/// Inverse of [`std_cdf`] on the open unit interval.
///
/// Acklam's rational approximation seeds a Newton refinement against the
/// CDF (against the upper tail for `p > 0.5`, to keep relative accuracy).
pub fn std_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain { op: "std_quantile", value: p });
    }
    let mut t = acklam(p);
    let upper = p > 0.5;
    let target = if upper { 1.0 - p } else { p };
    for _ in 0..8 {
        let (f, slope) = if upper { (std_sf(t) - target, -std_pdf(t)) } else { (std_cdf(t) - target, std_pdf(t)) };
        if slope == 0.0 {
            break;
        }
        let step = f / slope;
        t -= step;
        if step.abs() <= 1e-15 * t.abs().max(1.0) {
            break;
        }
    }
    Ok(t)
}

fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] =
        [7.784_695_709_041_462e-3, 3.224_671_290_700_398e-1, 2.445_134_137_142_996, 3.754_408_661_907_416];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    }
}

/// `c(x) = v(-x) - x` for `x > 0`, from the continued fraction
/// `1 / (x + 2 / (x + 3 / (x + ...)))`.
fn mills_excess(x: f64) -> f64 {
    let mut f = x;
    for k in (2..=CF_TERMS).rev() {
        f = x + k as f64 / f;
    }
    1.0 / f
}

/// `(v(t), w(t))` for the event "difference > 0" at standardized mean `t`.
pub fn greater_corrections(t: f64) -> (f64, f64) {
    if t < TAIL_SWITCH {
        let x = -t;
        let c = mills_excess(x);
        let v = x + c;
        (v, v * c)
    } else {
        let v = std_pdf(t) / std_cdf(t);
        (v, v * (v + t))
    }
}

/// `v(t) = φ(t) / Φ(t)`.
pub fn v_greater(t: f64) -> f64 {
    greater_corrections(t).0
}

/// `w(t) = v(t) · (v(t) + t)`.
pub fn w_greater(t: f64) -> f64 {
    greater_corrections(t).1
}

/// Posterior of the difference `D = prior + N(0, performance_noise_sq)`
/// conditioned on `D > 0`.
pub fn truncate_above(prior: Gaussian1D, performance_noise_sq: f64) -> Result<Gaussian1D> {
    if !performance_noise_sq.is_finite() {
        return Err(Error::NonFinite("truncate_above"));
    }
    prior.widened(performance_noise_sq).greater_than(0.0)
}

/// Posterior of `D ~ prior` conditioned on `|D| <= margin`.
pub fn truncate_within(prior: Gaussian1D, margin: f64) -> Result<Gaussian1D> {
    prior.check_finite("truncate_within")?;
    if margin.is_nan() || margin <= 0.0 {
        return Err(Error::Domain { op: "truncate_within (margin)", value: margin });
    }
    if prior.variance <= 0.0 {
        return Err(Error::Domain { op: "truncate_within (variance)", value: prior.variance });
    }
    if margin.is_infinite() {
        return Ok(prior);
    }

    // Work with the interval centre on the non-negative side; reflect back.
    let flip = prior.mean > 0.0;
    let mean = if flip { -prior.mean } else { prior.mean };
    let sd = prior.std_dev();
    let a = (-margin - mean) / sd;
    let b = (margin - mean) / sd;

    let (z_mean, z_var) = if b - a < NARROW_WIDTH { narrow_interval_moments(a, b)? } else { interval_moments(a, b)? };

    let post_mean = mean + sd * z_mean;
    Ok(Gaussian1D {
        mean: if flip { -post_mean } else { post_mean },
        variance: prior.variance * z_var.max(f64::MIN_POSITIVE),
    })
}

/// Mass of the standard normal on `[a, b]`, taking differences of tails on
/// whichever side avoids cancellation.
pub fn interval_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        std_sf(a) - std_sf(b)
    } else if b <= 0.0 {
        std_cdf(b) - std_cdf(a)
    } else {
        1.0 - std_sf(b) - std_cdf(a)
    }
}

fn interval_moments(a: f64, b: f64) -> Result<(f64, f64)> {
    let mass = interval_mass(a, b);
    if mass.is_nan() || mass < MIN_EVIDENCE {
        return Err(Error::DegenerateEvidence { mass });
    }
    let (pa, pb) = (std_pdf(a), std_pdf(b));
    let m = (pa - pb) / mass;
    let apa = if a.is_finite() { a * pa } else { 0.0 };
    let bpb = if b.is_finite() { b * pb } else { 0.0 };
    let var = 1.0 + (apa - bpb) / mass - m * m;
    Ok((m, var))
}

/// Moments of the standard normal restricted to a narrow `[a, b]`, by
/// Gauss-Legendre quadrature in the offset from the midpoint.
fn narrow_interval_moments(a: f64, b: f64) -> Result<(f64, f64)> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let log_mass = -0.5 * centre * centre - 0.5 * (2.0 * PI).ln() + (b - a).ln();
    if log_mass < MIN_EVIDENCE.ln() {
        return Err(Error::DegenerateEvidence { mass: log_mass.exp() });
    }
    let (nodes, weights) = gauss_legendre();
    let mut total = 0.0;
    let mut first = 0.0;
    for (&x, &wt) in nodes.iter().zip(weights) {
        let u = half * x;
        let dens = wt * (-(centre * u + 0.5 * u * u)).exp();
        total += dens;
        first += dens * u;
    }
    let mean_u = first / total;
    let mut second = 0.0;
    for (&x, &wt) in nodes.iter().zip(weights) {
        let u = half * x;
        let dens = wt * (-(centre * u + 0.5 * u * u)).exp();
        second += dens * (u - mean_u) * (u - mean_u);
    }
    Ok((centre + mean_u, second / total))
}

const GL_ORDER: usize = 16;

/// Nodes and weights of the 16-point Gauss-Legendre rule on `[-1, 1]`.
fn gauss_legendre() -> &'static ([f64; GL_ORDER], [f64; GL_ORDER]) {
    static RULE: OnceLock<([f64; GL_ORDER], [f64; GL_ORDER])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut nodes = [0.0; GL_ORDER];
        let mut weights = [0.0; GL_ORDER];
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut deriv = 0.0;
            for _ in 0..100 {
                // Legendre recurrence for P_n(x) and P_n'(x).
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                deriv = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / deriv;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * deriv * deriv);
        }
        (nodes, weights)
    })
}
