//! Monte Carlo estimators over random unimodular tori and over local
//! period-coordinate patches of a stratum.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exactplane::{euler_phi, from_f64, FloatMatrix, Rational};
use crate::oracle::torus_vectors_f;
use crate::surface::{RawSurface, Slot, Triangle, TranslationSurface};
use crate::sv::{transform_scaled, Membership, TestFunction};

pub const ALGORITHM: &str = "ChaCha20";

/// Minimum acceptance rate of the local stratum sampler.
pub const MIN_ACCEPTANCE: f64 = 0.1;

/// Noise denominator of the local sampler.
const NOISE_BITS: u32 = 12;

/// Summation over a fixed binary tree, independent of scheduling.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

/// Anything a transform can be evaluated on.
pub trait Evaluate: Sync {
    fn transform(&self, f: &TestFunction, budget: usize) -> Result<f64>;

    /// `N(·, r)`.
    fn count(&self, r: f64, budget: usize) -> Result<f64>;
}

/// A point of the modular surface with its lattice `g ℤ²`.
#[derive(Clone, Copy, PartialEq, Debug, Serialize)]
pub struct TorusSample {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub g: FloatMatrix,
}

fn float_transform(vectors: &[[f64; 2]], f: &TestFunction) -> f64 {
    if let TestFunction::Product { f, g } = f {
        return float_transform(vectors, f) * float_transform(vectors, g);
    }
    vectors.iter().filter(|&&w| f.contains_f(w, 0.0) != Membership::Out).count() as f64
}

impl Evaluate for TorusSample {
    fn transform(&self, f: &TestFunction, _budget: usize) -> Result<f64> {
        let r = crate::exactplane::to_f64(&f.support_radius());
        Ok(float_transform(&torus_vectors_f(&self.g, r), f))
    }

    fn count(&self, r: f64, _budget: usize) -> Result<f64> {
        Ok(crate::oracle::torus_count_f(&self.g, r) as f64)
    }
}

/// A perturbed surface and its exact area; transforms are taken on the
/// area-one rescaling.
#[derive(Clone, PartialEq, Debug)]
pub struct LocalSample {
    pub surface: TranslationSurface,
    pub area: Rational,
}

impl Evaluate for LocalSample {
    fn transform(&self, f: &TestFunction, budget: usize) -> Result<f64> {
        Ok(transform_scaled(&self.surface, f, &self.area, budget)?.count as f64)
    }

    fn count(&self, r: f64, budget: usize) -> Result<f64> {
        self.transform(&TestFunction::disc(from_f64(r)?), budget)
    }
}

/// Samples together with the seed and parameters that produced them.
#[derive(Clone, PartialEq, Debug)]
pub struct Corpus<S> {
    pub samples: Vec<S>,
    pub seed: u64,
    pub parameters: Value,
}

impl<S: Evaluate> Corpus<S> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Evaluates `h` on every sample in parallel, keeping sample order.
    pub fn map<F>(&self, h: F) -> Result<Vec<f64>>
    where
        F: Fn(&S) -> Result<f64> + Sync,
    {
        let out: Vec<Result<f64>> = self.samples.par_iter().map(&h).collect();
        out.into_iter()
            .enumerate()
            .map(|(index, r)| r.map_err(|e| Error::Sample { index, source: Box::new(e) }))
            .collect()
    }
}

/// Haar mass of `{y > y_max}` in the standard fundamental domain, relative
/// to its total mass `π/3`.
pub fn cusp_mass(y_max: f64) -> f64 {
    3.0 / (PI * y_max)
}

/// `n` tori drawn from Haar measure on the fundamental domain cut at `y_max`.
pub fn sample_torus_haar(n: usize, seed: u64, y_max: f64) -> Result<Corpus<TorusSample>> {
    if !(y_max >= 2.0) {
        return Err(Error::InvalidArgument("y_max must be at least 2".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let y_min = 3f64.sqrt() / 2.0;
    let (inv_lo, inv_hi) = (1.0 / y_min, 1.0 / y_max);
    let mut samples = Vec::with_capacity(n);
    while samples.len() < n {
        let x: f64 = rng.gen::<f64>() - 0.5;
        let u: f64 = rng.gen();
        // inverse CDF of dy/y² on [y_min, y_max]
        let y = 1.0 / (inv_lo - u * (inv_lo - inv_hi));
        let theta = rng.gen::<f64>() * 2.0 * PI;
        if x * x + y * y < 1.0 {
            continue;
        }
        let s = y.sqrt();
        let g = FloatMatrix::rotation(theta).mul(&FloatMatrix { a: 1.0 / s, b: x / s, c: 0.0, d: s });
        samples.push(TorusSample { x, y, theta, g });
    }
    Ok(Corpus {
        samples,
        seed,
        parameters: json!({"kind": "torus", "n": n, "y_max": y_max, "truncated_mass": cusp_mass(y_max)}),
    })
}

/// Expected `N(·, r)` over the cusp `{y > y_max}` under Haar measure.
///
/// Row `q` of the lattice sits at height `q √y` and, averaged over `x`, holds
/// `φ(q)/q` primitive points per unit length of its chord.
pub fn cusp_mean_count(r: f64, y_max: f64) -> f64 {
    let r_sq = r * r;
    // antiderivative of √(r² - q² y) / y^{3/2}
    let big_f = |q: f64, y: f64| -2.0 * (r_sq - q * q * y).max(0.0).sqrt() / y.sqrt() - 2.0 * q * (q * y.sqrt() / r).min(1.0).asin();
    let mut total = if r_sq * y_max >= 1.0 { 2.0 } else { 0.0 };
    let mut q = 1u64;
    while (q * q) as f64 * y_max < r_sq {
        let qf = q as f64;
        let phi = euler_phi(q) as f64 / qf;
        total += 4.0 * y_max * phi * (-qf * PI - big_f(qf, y_max));
        q += 1;
    }
    total
}

/// Cusp mean of `f̂`. Rotations are uniform and independent of the shape,
/// so a sector sees the disc mean times its angular share. Products have no
/// closed form here.
pub fn cusp_mean_transform(f: &TestFunction, y_max: f64) -> Option<f64> {
    use crate::exactplane::to_f64;
    match f {
        TestFunction::Disc { r } => Some(cusp_mean_count(to_f64(r), y_max)),
        TestFunction::Annulus { r1, r2 } => Some(cusp_mean_count(to_f64(r2), y_max) - cusp_mean_count(to_f64(r1), y_max)),
        TestFunction::Sector { r, half_angle, .. } => Some((half_angle / PI).min(1.0) * cusp_mean_count(to_f64(r), y_max)),
        TestFunction::Product { .. } => None,
    }
}

#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct SampleReport {
    pub n_samples: usize,
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
    /// Half-width of the 95% normal interval for the mean.
    pub ci_radius: f64,
    pub seed: u64,
    pub algorithm: String,
    pub parameters: Value,
    /// Haar mass cut off at the cusp, for torus corpora.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncated_mass: Option<f64>,
    /// Mean with the analytic cusp contribution restored.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corrected_mean: Option<f64>,
}

impl SampleReport {
    pub fn from_values(values: &[f64], seed: u64, parameters: Value) -> Self {
        let n = values.len();
        let (mean, second_moment) = if n == 0 {
            (0.0, 0.0)
        } else {
            let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
            (pairwise_sum(values) / n as f64, pairwise_sum(&sq) / n as f64)
        };
        let variance = second_moment - mean * mean;
        let ci_radius = if n == 0 { 0.0 } else { 1.96 * (variance.max(0.0) / n as f64).sqrt() };
        SampleReport {
            n_samples: n,
            mean,
            second_moment,
            variance,
            ci_radius,
            seed,
            algorithm: ALGORITHM.into(),
            parameters,
            truncated_mass: None,
            corrected_mean: None,
        }
    }

    /// Restores the cusp above `y_max` on a torus corpus, when `f` has a
    /// closed-form cusp mean.
    pub fn with_cusp_correction(mut self, f: &TestFunction, y_max: f64) -> Self {
        if let Some(cusp) = cusp_mean_transform(f, y_max) {
            let m = cusp_mass(y_max);
            self.truncated_mass = Some(m);
            self.corrected_mean = Some((1.0 - m) * self.mean + m * cusp);
        }
        self
    }

    pub fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "n_samples,mean,second_moment,variance,ci_radius,seed,algorithm,truncated_mass,corrected_mean\n{},{},{},{},{},{},{},{},{}\n",
            self.n_samples,
            self.mean,
            self.second_moment,
            self.variance,
            self.ci_radius,
            self.seed,
            self.algorithm,
            opt(self.truncated_mass),
            opt(self.corrected_mean)
        )
    }
}

pub fn estimate_mean_transform<S: Evaluate>(corpus: &Corpus<S>, f: &TestFunction, budget: usize) -> Result<SampleReport> {
    let values = corpus.map(|s| s.transform(f, budget))?;
    let mut params = corpus.parameters.clone();
    params["function"] = serde_json::from_str(&f.to_json())?;
    Ok(SampleReport::from_values(&values, corpus.seed, params))
}

#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct L2Estimate {
    pub r: f64,
    /// Sample second moment of `N(·, r)`.
    pub l_hat: f64,
    /// `l_hat - (c π r²)²`.
    pub v_hat: f64,
    /// `√l_hat / (π r²)`.
    pub normalized: f64,
    /// `|√l_hat - c π r²| / r²`.
    pub deviation: f64,
}

pub fn estimate_l2_and_variance<S: Evaluate>(corpus: &Corpus<S>, r: f64, c_sv: f64, budget: usize) -> Result<L2Estimate> {
    let counts = corpus.map(|s| s.count(r, budget))?;
    let l2_estimate = |counts: &[f64]| {
        let sq: Vec<f64> = counts.iter().map(|v| v * v).collect();
        pairwise_sum(&sq) / counts.len().max(1) as f64
    };
    let l_hat = l2_estimate(&counts);
    let main = c_sv * PI * r * r;
    Ok(L2Estimate {
        r,
        l_hat,
        v_hat: l_hat - main * main,
        normalized: l_hat.sqrt() / (PI * r * r),
        deviation: (l_hat.sqrt() - main).abs() / (r * r),
    })
}

#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct TailHistogram {
    /// `√k` for `k = 1..=K`.
    pub thresholds: Vec<f64>,
    /// Fraction of samples with transform above each threshold.
    pub fractions: Vec<f64>,
    /// Minus the least-squares slope of log-fraction against log-threshold.
    pub q_hat: Option<f64>,
    /// Standard error of the slope.
    pub fit_error: Option<f64>,
    /// Root mean square residual of the fit.
    pub residual: Option<f64>,
    /// Set when fewer than two thresholds have a fraction strictly in (0, 1).
    pub degenerate: bool,
}

impl TailHistogram {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,threshold,fraction\n");
        for (k, (t, p)) in self.thresholds.iter().zip(&self.fractions).enumerate() {
            out.push_str(&format!("{},{},{}\n", k + 1, t, p));
        }
        out
    }
}

pub fn tail_histogram<S: Evaluate>(corpus: &Corpus<S>, f: &TestFunction, k_max: usize, budget: usize) -> Result<TailHistogram> {
    let values = corpus.map(|s| s.transform(f, budget))?;
    Ok(tail_from_values(&values, k_max))
}

pub fn tail_from_values(values: &[f64], k_max: usize) -> TailHistogram {
    let n = values.len().max(1) as f64;
    let thresholds: Vec<f64> = (1..=k_max).map(|k| (k as f64).sqrt()).collect();
    let fractions: Vec<f64> = thresholds.iter().map(|&t| values.iter().filter(|&&v| v > t).count() as f64 / n).collect();
    let pts: Vec<(f64, f64)> =
        thresholds.iter().zip(&fractions).filter(|(_, &p)| p > 0.0 && p < 1.0).map(|(&t, &p)| (t.ln(), p.ln())).collect();
    let mut h = TailHistogram { thresholds, fractions, q_hat: None, fit_error: None, residual: None, degenerate: true };
    if pts.len() < 2 {
        return h;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return h;
    }
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    let sse: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    h.q_hat = Some(-slope);
    h.residual = Some((sse / m).sqrt());
    h.fit_error = Some(if pts.len() > 2 { (sse / (m - 2.0) / sxx).sqrt() } else { 0.0 });
    h.degenerate = false;
    h
}

#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct BcRow {
    pub r: f64,
    pub e: f64,
    pub v_hat: f64,
    /// `v_hat / e²`, which is also the Chebyshev bound on the exceedance.
    pub ratio: f64,
    pub partial_sum: f64,
    /// Fraction of samples with `|N - c π r²| > e`.
    pub exceedance: f64,
    pub binomial_ci: f64,
    /// Exceedance above the Chebyshev bound by more than three binomial
    /// half-widths.
    pub violation: bool,
}

pub fn borel_cantelli_table<S: Evaluate>(
    corpus: &Corpus<S>,
    radii: &[f64],
    errors: &[f64],
    c_sv: f64,
    budget: usize,
) -> Result<Vec<BcRow>> {
    if radii.len() != errors.len() {
        return Err(Error::InvalidArgument("radii and errors differ in length".into()));
    }
    if radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("radii must be increasing".into()));
    }
    if errors.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidArgument("errors must be positive".into()));
    }
    let n = corpus.len().max(1) as f64;
    let mut rows = Vec::new();
    let mut partial = 0.0;
    for (&r, &e) in radii.iter().zip(errors) {
        let counts = corpus.map(|s| s.count(r, budget))?;
        let main = c_sv * PI * r * r;
        let sq: Vec<f64> = counts.iter().map(|v| v * v).collect();
        let v_hat = pairwise_sum(&sq) / n - main * main;
        let ratio = v_hat / (e * e);
        partial += ratio;
        let p = counts.iter().filter(|&&c| (c - main).abs() > e).count() as f64 / n;
        let ci = 1.96 * (p * (1.0 - p) / n).sqrt();
        rows.push(BcRow { r, e, v_hat, ratio, partial_sum: partial, exceedance: p, binomial_ci: ci, violation: p > ratio + 3.0 * ci });
    }
    Ok(rows)
}

pub fn bc_csv(rows: &[BcRow]) -> String {
    let mut out = String::from("r,e,v_hat,ratio,partial_sum,exceedance,binomial_ci,violation\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.r, r.e, r.v_hat, r.ratio, r.partial_sum, r.exceedance, r.binomial_ci, r.violation
        ));
    }
    out
}

/// Reduced row echelon form over ℚ; returns the pivot column of each row.
fn rref(m: &mut [Vec<Rational>]) -> Vec<usize> {
    let cols = m.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        let Some(p) = (row..m.len()).find(|&i| !m[i][col].is_zero()) else { continue };
        m.swap(row, p);
        let inv = Rational::one() / &m[row][col];
        for x in m[row].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..m.len() {
            if i != row && !m[i][col].is_zero() {
                let k = m[i][col].clone();
                for j in 0..cols {
                    let d = &k * &m[row][j];
                    m[i][j] = &m[i][j] - d;
                }
            }
        }
        pivots.push(col);
        row += 1;
        if row == m.len() {
            break;
        }
    }
    pivots
}

/// Edge classes of `s` as free and dependent coordinates of the cocycle
/// space cut out by the triangle relations.
struct CocycleChart {
    basis: Vec<[Rational; 2]>,
    free: Vec<usize>,
    /// `(pivot column, coefficients on free columns)`.
    dependent: Vec<(usize, Vec<Rational>)>,
}

impl CocycleChart {
    fn new(s: &TranslationSurface) -> Self {
        let e = s.num_edges();
        let mut basis = vec![[Rational::zero(), Rational::zero()]; e];
        let mut m = Vec::new();
        for t in 0..s.num_triangles() {
            let mut row = vec![Rational::zero(); e];
            for k in 0..3 {
                let slot = Slot::new(t, k);
                let (idx, sign) = s.edge_index(slot);
                row[idx] += Rational::from_integer(sign.into());
                let v = s.edge(slot);
                let sg = Rational::from_integer(sign.into());
                basis[idx] = [&v.x * &sg, &v.y * &sg];
            }
            m.push(row);
        }
        let pivots = rref(&mut m);
        let free: Vec<usize> = (0..e).filter(|c| !pivots.contains(c)).collect();
        let dependent = pivots.iter().enumerate().map(|(i, &p)| (p, free.iter().map(|&f| m[i][f].clone()).collect())).collect();
        CocycleChart { basis, free, dependent }
    }

    /// Edge-class vectors after moving the free coordinates by `noise`.
    fn perturb(&self, noise: &[[Rational; 2]]) -> Vec<[Rational; 2]> {
        let mut delta = vec![[Rational::zero(), Rational::zero()]; self.basis.len()];
        for (j, &f) in self.free.iter().enumerate() {
            delta[f] = noise[j].clone();
        }
        for (p, coeffs) in &self.dependent {
            for (j, c) in coeffs.iter().enumerate() {
                for a in 0..2 {
                    let d = c * &noise[j][a];
                    delta[*p][a] = &delta[*p][a] - d;
                }
            }
        }
        self.basis.iter().zip(delta).map(|(b, d)| [&b[0] + &d[0], &b[1] + &d[1]]).collect()
    }
}

/// `n` surfaces near `base`: each free edge vector moves by independent
/// uniform noise in `[-spread, spread]²` (dyadic grid of step 2⁻¹²), the
/// others follow from the triangle relations, and surfaces with a
/// degenerate triangle are rejected.
pub fn sample_stratum_local(base: &TranslationSurface, spread: f64, n: usize, seed: u64) -> Result<Corpus<LocalSample>> {
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::InvalidArgument("spread must be a nonnegative number".into()));
    }
    let chart = CocycleChart::new(base);
    let raw = base.to_raw();
    let steps = (spread * f64::from(1u32 << NOISE_BITS)).floor() as i64;
    let den = BigInt::one() << NOISE_BITS as usize;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while samples.len() < n {
        attempts += 1;
        if attempts >= 100 && (samples.len() as f64) < MIN_ACCEPTANCE * attempts as f64 {
            return Err(Error::AcceptanceRate { rate: samples.len() as f64 / attempts as f64, threshold: MIN_ACCEPTANCE });
        }
        let noise: Vec<[Rational; 2]> = chart
            .free
            .iter()
            .map(|_| {
                let mut d = || Rational::new(BigInt::from(rng.gen_range(-steps..=steps)), den.clone());
                [d(), d()]
            })
            .collect();
        let edges = chart.perturb(&noise);
        let triangles = (0..base.num_triangles())
            .map(|t| {
                let e = |k: usize| {
                    let (idx, sign) = base.edge_index(Slot::new(t, k));
                    let sg = Rational::from_integer(sign.into());
                    crate::exactplane::ExactVector::new(&edges[idx][0] * &sg, &edges[idx][1] * &sg)
                };
                Triangle::new(e(0), e(1), e(2))
            })
            .collect();
        let candidate = RawSurface { triangles, gluings: raw.gluings.clone() };
        if let Ok(surface) = TranslationSurface::from_raw(&candidate) {
            let area = surface.area();
            if area.is_positive() {
                samples.push(LocalSample { surface, area });
            }
        }
    }
    Ok(Corpus {
        samples,
        seed,
        parameters: json!({"kind": "stratum-local", "n": n, "spread": spread, "attempts": attempts}),
    })
}
