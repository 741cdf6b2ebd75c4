#![allow(dead_code, clippy::excessive_precision)]

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const GK_NODES: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const GK_WK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const G_W: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WK[7] * fc;
    let mut g = G_W[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        k += GK_WK[i] * s;
        if i % 2 == 1 {
            g += G_W[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod quadrature to absolute tolerance `tol`, or to a
/// few ulps of the panel value when that is coarser.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol.max(8.0 * f64::EPSILON * v.abs()) || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, tol / 2.0, depth - 1) + rec(f, m, b, tol / 2.0, depth - 1)
    }
    rec(f, a, b, tol, 40)
}

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Φ(t) by quadrature of the density from far in the lower tail.
pub fn cdf(t: f64) -> f64 {
    if t <= 0.0 {
        integrate(&pdf, t - 40.0, t, 1e-18)
    } else {
        1.0 - integrate(&pdf, -t - 40.0, -t, 1e-18)
    }
}

/// Mean and variance of `N(mean, var)` restricted to `[a, b]`, by quadrature.
/// The density is rescaled to its peak on the interval so tiny masses keep
/// full relative precision.
pub fn truncated_moments(mean: f64, var: f64, a: f64, b: f64) -> (f64, f64) {
    let sd = var.sqrt();
    let (za, zb) = ((a - mean) / sd, (b - mean) / sd);
    let peak = if za > 0.0 {
        za
    } else if zb < 0.0 {
        zb
    } else {
        0.0
    };
    let g = |z: f64| (-0.5 * (z * z - peak * peak)).exp();
    // shift the abscissa to the peak so first and second moments are small
    let m0 = integrate(&g, za, zb, 1e-16);
    let m1 = integrate(&|z| (z - peak) * g(z), za, zb, 1e-16) / m0;
    let m2 = integrate(&|z| (z - peak) * (z - peak) * g(z), za, zb, 1e-16) / m0;
    let zm = peak + m1;
    (mean + sd * zm, var * (m2 - m1 * m1))
}

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Running mean and variance.
#[derive(Default, Clone, Copy)]
pub struct Welford {
    pub n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }
    pub fn mean(&self) -> f64 {
        self.mean
    }
    pub fn variance(&self) -> f64 {
        self.m2 / self.n as f64
    }
}

/// Outcome region of the performance difference.
#[derive(Clone, Copy, Debug)]
pub enum Region {
    Above(f64),
    Below(f64),
    Within(f64),
}

impl Region {
    pub fn contains(self, d: f64) -> bool {
        match self {
            Region::Above(t) => d > t,
            Region::Below(t) => d < t,
            Region::Within(e) => d.abs() <= e,
        }
    }
}

/// Posterior moments of each learner skill by rejection sampling: draws
/// skills, latent depths and performance noise, keeps draws whose
/// difference falls in `region`, until `accepted` are kept.
pub fn rejection_posterior<R: Rng>(
    rng: &mut R,
    learners: &[(f64, f64)],
    depths: &[(f64, f64)],
    beta: f64,
    region: Region,
    accepted: u64,
) -> Vec<Welford> {
    let n = learners.len();
    let noise_sd = (2.0 * n as f64).sqrt() * beta;
    let l_sd: Vec<f64> = learners.iter().map(|g| g.1.sqrt()).collect();
    let d_sd: Vec<f64> = depths.iter().map(|g| g.1.sqrt()).collect();
    let mut stats = vec![Welford::default(); n];
    let mut theta = vec![0.0; n];
    while stats[0].n < accepted {
        let mut diff = noise_sd * normal(rng);
        for i in 0..n {
            theta[i] = learners[i].0 + l_sd[i] * normal(rng);
            diff += theta[i];
        }
        for (j, d) in depths.iter().enumerate() {
            diff -= d.0 + d_sd[j] * normal(rng);
        }
        if region.contains(diff) {
            for i in 0..n {
                stats[i].push(theta[i]);
            }
        }
    }
    stats
}

/// Marginal posterior masteries by explicit enumeration of the joint
/// states, accumulating per-state likelihood under the noisy-AND.
pub fn kt_brute_force(pis: &[f64], engaged: bool, noise: f64) -> Vec<f64> {
    let k = pis.len();
    let mut states: Vec<(Vec<bool>, f64)> = vec![(Vec::new(), 1.0)];
    for &p in pis {
        states = states
            .into_iter()
            .flat_map(|(s, w)| {
                let mut a = s.clone();
                a.push(true);
                let mut b = s;
                b.push(false);
                [(a, w * p), (b, w * (1.0 - p))]
            })
            .collect();
    }
    let mut evidence = 0.0;
    let mut marg = vec![0.0; k];
    for (s, prior) in &states {
        let all = s.iter().all(|&x| x);
        let p_engaged = if all { 1.0 - noise } else { noise };
        let like = if engaged { p_engaged } else { 1.0 - p_engaged };
        evidence += prior * like;
        for i in 0..k {
            if s[i] {
                marg[i] += prior * like;
            }
        }
    }
    marg.iter().map(|m| m / evidence).collect()
}

/// Posterior mastery of skill `h` in closed form: only the all-mastered
/// state differs in likelihood.
pub fn kt_closed_form(pis: &[f64], engaged: bool, noise: f64, h: usize) -> f64 {
    let (hit, miss) = if engaged { (1.0 - noise, noise) } else { (noise, 1.0 - noise) };
    let all: f64 = pis.iter().product();
    let others: f64 = pis.iter().enumerate().filter(|(i, _)| *i != h).map(|(_, p)| p).product();
    let evidence = hit * all + miss * (1.0 - all);
    pis[h] * (hit * others + miss * (1.0 - others)) / evidence
}

/// Spearman rank correlation (no tie correction; inputs are continuous).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(x: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
        let mut r = vec![0.0; x.len()];
        for (k, &i) in idx.iter().enumerate() {
            r[i] = k as f64;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|x| (x - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
