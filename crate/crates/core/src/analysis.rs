//! Density evolution for coded slotted ALOHA with generalized capture,
//! degree-distribution algebra, the achievable-rate lower bounds and a few
//! reference curves.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::channel::gen_channel;
use crate::model::CheckedConfig;
use crate::seed::StreamSeed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("degree distribution is degenerate: {0}")]
    Distribution(&'static str),
    #[error("offered load must be finite and nonnegative, got {0}")]
    Load(f64),
    #[error("capture table covers degrees up to {have}, need {need}")]
    CaptureTooSmall { have: usize, need: usize },
    #[error("capture probability {0} outside [0, 1]")]
    CaptureValue(f64),
    #[error("delta {0} outside [0, sqrt(2) - 1)")]
    Delta(f64),
    #[error("invalid bound input: {0}")]
    BoundInput(&'static str),
    #[error("conditioning event too rare (acceptance {0})")]
    RareConditioning(f64),
}

/// Node-oriented degree distribution `Lambda(x) = sum_d Lambda_d x^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    coeffs: Vec<f64>,
}

impl DegreeDistribution {
    pub fn new(pairs: &[(usize, f64)]) -> Result<Self, AnalysisError> {
        let max = pairs.iter().map(|p| p.0).max().ok_or(AnalysisError::Distribution("empty"))?;
        let mut coeffs = vec![0.0; max + 1];
        for &(d, p) in pairs {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(AnalysisError::Distribution("negative or non-finite coefficient"));
            }
            coeffs[d] += p;
        }
        let total: f64 = coeffs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(AnalysisError::Distribution("coefficients do not sum to one"));
        }
        if coeffs[0] >= 1.0 - 1e-15 {
            return Err(AnalysisError::Distribution("all mass at degree zero"));
        }
        Ok(DegreeDistribution { coeffs })
    }

    pub fn regular(d: usize) -> Self {
        DegreeDistribution::new(&[(d, 1.0)]).expect("regular degree must be positive")
    }

    /// `Lambda_d` indexed by degree.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `Lambda'(1)`, the mean number of replicas.
    pub fn mean(&self) -> f64 {
        self.coeffs.iter().enumerate().map(|(d, p)| d as f64 * p).sum()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn edge_from_node(&self) -> Vec<f64> {
        edge_from_node(self)
    }
}

/// `lambda_k = k Lambda_k / Lambda'(1)`, indexed by `k`.
pub fn edge_from_node(dist: &DegreeDistribution) -> Vec<f64> {
    let mean = dist.mean();
    dist.coeffs.iter().enumerate().map(|(k, p)| k as f64 * p / mean).collect()
}

/// Evaluates an edge-perspective polynomial `sum_k c_k x^(k-1)`.
pub fn edge_poly(c: &[f64], x: f64) -> f64 {
    c.iter().skip(1).rev().fold(0.0, |acc, v| acc * x + v)
}

/// Truncation point for the Poisson slot-degree law.
pub fn poisson_jmax(g: f64, dist: &DegreeDistribution) -> usize {
    let tail = (10.0 * g * dist.mean()).ceil();
    if tail.is_finite() {
        (tail as usize).max(50)
    } else {
        50
    }
}

/// Edge-oriented slot degree distribution `omega_j` (indexed by `j`, entry 0
/// is zero) for uniform slot choice at load `g` users per slot.
///
/// Slot degrees are Poisson with mean `g Lambda'(1)`, truncated at
/// [`poisson_jmax`] with the tail mass folded into the last degree.
pub fn slot_edge_dist(g: f64, dist: &DegreeDistribution) -> Result<Vec<f64>, AnalysisError> {
    if !(g >= 0.0) || !g.is_finite() {
        return Err(AnalysisError::Load(g));
    }
    let jmax = poisson_jmax(g, dist);
    let mut omega = vec![0.0; jmax + 1];
    let mu = g * dist.mean();
    if mu == 0.0 {
        omega[1] = 1.0;
        return Ok(omega);
    }
    let mut psi = vec![0.0; jmax + 1];
    let mut head = 0.0;
    for (j, v) in psi.iter_mut().enumerate() {
        *v = libm::exp(-mu + j as f64 * mu.ln() - libm::lgamma(j as f64 + 1.0));
        head += *v;
    }
    psi[jmax] += (1.0 - head).max(0.0);
    let norm: f64 = psi.iter().enumerate().map(|(j, v)| j as f64 * v).sum();
    for j in 1..=jmax {
        omega[j] = j as f64 * psi[j] / norm;
    }
    Ok(omega)
}

/// Decoding probabilities `pi_{t,j}`: a user in a slot of degree `j` with `t`
/// of the other `j - 1` packets already cancelled.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureTable {
    /// `rows[j - 1][t]`.
    rows: Vec<Vec<f64>>,
}

impl CaptureTable {
    /// Only singleton slots decode: `pi_{t,j} = 1` iff `t = j - 1`.
    pub fn singleton_only(jmax: usize) -> Self {
        CaptureTable::from_fn(jmax, |t, j| if t + 1 == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(jmax: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let rows = (1..=jmax).map(|j| (0..j).map(|t| f(t, j)).collect()).collect();
        CaptureTable { rows }
    }

    /// Builds a table from measured rows (`rows[j-1]` has `j` entries) and
    /// makes every row non-decreasing in `t` by isotonic regression,
    /// optionally weighted by per-entry trial counts. The flag reports
    /// whether any adjustment was needed.
    pub fn from_rows(rows: Vec<Vec<f64>>, weights: Option<&[Vec<f64>]>) -> Result<(Self, bool), AnalysisError> {
        let mut adjusted = false;
        let mut out = Vec::with_capacity(rows.len());
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != i + 1 {
                return Err(AnalysisError::CaptureTooSmall { have: row.len(), need: i + 1 });
            }
            if let Some(&bad) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(AnalysisError::CaptureValue(bad));
            }
            let w = weights.map(|w| w[i].clone()).unwrap_or_else(|| vec![1.0; row.len()]);
            let fitted = isotonic_increasing(&row, &w);
            if fitted.iter().zip(&row).any(|(a, b)| a != b) {
                adjusted = true;
            }
            out.push(fitted);
        }
        Ok((CaptureTable { rows: out }, adjusted))
    }

    pub fn jmax(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// `pi_{t,j}`. Beyond the tabulated degrees the entry of the last row
    /// with the same number of remaining packets `j - t` is reused; if the
    /// last row has no such entry the value is zero.
    pub fn get(&self, t: usize, j: usize) -> f64 {
        debug_assert!(t < j);
        if j == 0 {
            return 0.0;
        }
        if j <= self.rows.len() {
            return self.rows[j - 1][t];
        }
        let last = self.rows.len();
        let remaining = j - t;
        if last == 0 || remaining > last {
            0.0
        } else {
            self.rows[last - 1][last - remaining]
        }
    }
}

/// Weighted pool-adjacent-violators fit, non-decreasing.
fn isotonic_increasing(y: &[f64], w: &[f64]) -> Vec<f64> {
    // Blocks of (mean, weight, length).
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(y.len());
    for (&v, &wt) in y.iter().zip(w) {
        let wt = if wt > 0.0 { wt } else { 1e-12 };
        blocks.push((v, wt, 1));
        while blocks.len() > 1 {
            let n = blocks.len();
            if blocks[n - 2].0 <= blocks[n - 1].0 {
                break;
            }
            let b = blocks.pop().unwrap();
            let a = blocks.last_mut().unwrap();
            let wsum = a.1 + b.1;
            a.0 = (a.0 * a.1 + b.0 * b.1) / wsum;
            a.1 = wsum;
            a.2 += b.2;
        }
    }
    let mut out = Vec::with_capacity(y.len());
    for (v, _, len) in blocks {
        out.extend(core::iter::repeat(v).take(len));
    }
    out
}

/// Which reading of the slot-node update to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeConvention {
    /// `p = 1 - sum_j omega_j sum_t C(j-1,t) (1-q)^t q^(j-1-t) pi_{t,j}`:
    /// `t` cancelled interferers each removed with probability `1 - q`.
    #[default]
    Consistent,
    /// Literal reading of the slot update:
    /// `p = sum_j omega_j sum_t pi_{t,j} C(j-1,t) q^t (1-q)^(j-t-1)`.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub convention: DeConvention,
}

impl Default for DeOptions {
    fn default() -> Self {
        DeOptions { tol: 1e-12, max_iter: 10_000, convention: DeConvention::Consistent }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeResult {
    /// `p_1, p_2, ...`
    pub p: Vec<f64>,
    /// `q_0 = 1, q_1, ...`
    pub q: Vec<f64>,
    pub p_inf: f64,
    pub q_inf: f64,
    /// `1 - q_inf`.
    pub p_decoded: f64,
    /// `1 - Lambda(p_inf)`, the probability a user has at least one
    /// resolved replica.
    pub p_decoded_node: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Whether `q_i` never increased (always true for a valid capture table
    /// under the consistent convention).
    pub monotone: bool,
}

fn binomial_row(n: usize) -> Vec<f64> {
    let mut row = vec![1.0; n + 1];
    for k in 1..n {
        row[k] = row[k - 1] * (n - k + 1) as f64 / k as f64;
    }
    row
}

/// And-or tree evaluation with `q_0 = 1`.
///
/// `omega` and `lambda` are indexed by degree (entry 0 ignored).
pub fn and_or_tree(
    omega: &[f64],
    lambda: &[f64],
    capture: &CaptureTable,
    dist: Option<&DegreeDistribution>,
    opts: &DeOptions,
) -> Result<DeResult, AnalysisError> {
    check_prob_vector(omega, "omega")?;
    check_prob_vector(lambda, "lambda")?;
    // Precompute binomials and capture rows for every degree with mass.
    let jmax = omega.len().saturating_sub(1);
    let mut terms: Vec<(usize, f64, Vec<f64>, Vec<f64>)> = Vec::new();
    for (j, &w) in omega.iter().enumerate().skip(1) {
        if w > 0.0 {
            let pis: Vec<f64> = (0..j).map(|t| capture.get(t, j)).collect();
            terms.push((j, w, binomial_row(j - 1), pis));
        }
    }
    let _ = jmax;
    let slot_update = |q: f64| -> f64 {
        let mut acc = 0.0;
        for (j, w, binom, pis) in &terms {
            let mut s = 0.0;
            for t in 0..*j {
                let e = j - 1 - t;
                let weight = match opts.convention {
                    DeConvention::Consistent => powi(1.0 - q, t) * powi(q, e),
                    DeConvention::Literal => powi(q, t) * powi(1.0 - q, e),
                };
                s += binom[t] * weight * pis[t];
            }
            acc += w * s;
        }
        match opts.convention {
            DeConvention::Consistent => (1.0 - acc).clamp(0.0, 1.0),
            DeConvention::Literal => acc.clamp(0.0, 1.0),
        }
    };
    let mut p = Vec::new();
    let mut q = vec![1.0];
    let mut converged = false;
    let mut monotone = true;
    let mut q_prev = 1.0;
    for _ in 0..opts.max_iter {
        let pi = slot_update(q_prev);
        let qi = edge_poly(lambda, pi).clamp(0.0, 1.0);
        p.push(pi);
        q.push(qi);
        if qi > q_prev + 1e-14 {
            monotone = false;
        }
        let step = (qi - q_prev).abs();
        q_prev = qi;
        if step < opts.tol {
            converged = true;
            break;
        }
    }
    let p_inf = *p.last().unwrap_or(&1.0);
    let q_inf = q_prev;
    let p_decoded_node = match dist {
        Some(d) => 1.0 - d.eval(p_inf),
        None => f64::NAN,
    };
    Ok(DeResult {
        iterations: p.len(),
        p,
        q,
        p_inf,
        q_inf,
        p_decoded: 1.0 - q_inf,
        p_decoded_node,
        converged,
        monotone,
    })
}

fn powi(x: f64, e: usize) -> f64 {
    x.powi(e as i32)
}

fn check_prob_vector(v: &[f64], _name: &'static str) -> Result<(), AnalysisError> {
    if v.iter().any(|x| !(*x >= 0.0)) {
        return Err(AnalysisError::Distribution("negative edge coefficient"));
    }
    let s: f64 = v.iter().skip(1).sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(AnalysisError::Distribution("edge distribution does not sum to one"));
    }
    Ok(())
}

/// Density evolution at load `g` for node distribution `dist` with Poisson
/// slot degrees. Zero load is an empty frame: nothing can be lost, under
/// either convention.
pub fn de_at_load(
    g: f64,
    dist: &DegreeDistribution,
    capture: &CaptureTable,
    opts: &DeOptions,
) -> Result<DeResult, AnalysisError> {
    if g == 0.0 {
        return Ok(DeResult {
            p: vec![0.0],
            q: vec![1.0, 0.0],
            p_inf: 0.0,
            q_inf: 0.0,
            p_decoded: 1.0,
            p_decoded_node: 1.0,
            iterations: 1,
            converged: true,
            monotone: true,
        });
    }
    let omega = slot_edge_dist(g, dist)?;
    let lambda = dist.edge_from_node();
    and_or_tree(&omega, &lambda, capture, Some(dist), opts)
}

/// Largest load in `[lo, hi]` at which evolution drives `q` below
/// `q_target`, located by bisection to width `tol`.
pub fn de_threshold(
    dist: &DegreeDistribution,
    capture: &CaptureTable,
    lo: f64,
    hi: f64,
    q_target: f64,
    tol: f64,
    opts: &DeOptions,
) -> Result<f64, AnalysisError> {
    let ok = |g: f64| -> Result<bool, AnalysisError> {
        let r = de_at_load(g, dist, capture, opts)?;
        Ok(r.converged && r.q_inf < q_target)
    };
    let (mut a, mut b) = (lo, hi);
    if !ok(a)? {
        return Ok(a);
    }
    if ok(b)? {
        return Ok(b);
    }
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if ok(mid)? {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// `c1(delta) = 4 sqrt(1 + delta) / (1 - (1 + sqrt 2) delta)`.
pub fn c1_of_delta(delta: f64) -> Result<f64, AnalysisError> {
    let denom = 1.0 - (1.0 + core::f64::consts::SQRT_2) * delta;
    if !(delta >= 0.0) || denom <= 0.0 {
        return Err(AnalysisError::Delta(delta));
    }
    Ok(4.0 * (1.0 + delta).sqrt() / denom)
}

/// Inputs to the achievable-rate lower bounds. `gain_samples` are per-
/// subcarrier channel gains `|H_f|^2` drawn conditional on detection, so the
/// expectation term can be evaluated at any `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateBoundInputs {
    pub alpha: f64,
    pub noise_var: f64,
    pub m: usize,
    pub n: usize,
    pub k2: usize,
    pub delta: f64,
    /// `1 - P_md(xi)`.
    pub p_detect: f64,
    pub colliders: usize,
    pub gain_samples: Vec<f64>,
}

/// `E[log2(1 + (1 - alpha) g / noise_var)]` over the samples.
pub fn expected_log(gain_samples: &[f64], alpha: f64, noise_var: f64) -> f64 {
    if gain_samples.is_empty() {
        return 0.0;
    }
    let s: f64 = gain_samples.iter().map(|g| libm::log2(1.0 + (1.0 - alpha) * g / noise_var)).sum();
    s / gain_samples.len() as f64
}

fn rate_bound(inp: &RateBoundInputs, colliders: usize) -> Result<f64, AnalysisError> {
    let c1 = c1_of_delta(inp.delta)?;
    if !(0.0..=1.0).contains(&inp.alpha) {
        return Err(AnalysisError::BoundInput("alpha outside [0, 1]"));
    }
    if !(inp.noise_var > 0.0) {
        return Err(AnalysisError::BoundInput("noise variance must be positive"));
    }
    if !(0.0..=1.0).contains(&inp.p_detect) {
        return Err(AnalysisError::BoundInput("detection probability outside [0, 1]"));
    }
    if inp.n == 0 || inp.k2 == 0 {
        return Err(AnalysisError::BoundInput("n and k2 must be positive"));
    }
    if inp.gain_samples.iter().any(|g| !(*g >= 0.0)) {
        return Err(AnalysisError::BoundInput("negative gain sample"));
    }
    let data = 1.0 - inp.alpha;
    let gain = expected_log(&inp.gain_samples, inp.alpha, inp.noise_var) * inp.p_detect;
    if data == 0.0 {
        return Ok(gain);
    }
    if inp.alpha == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let pen = (colliders as f64 + 1.0) * data * c1 * c1 * inp.m as f64
        / (inp.noise_var * inp.alpha * inp.n as f64 * inp.k2 as f64);
    Ok(gain - libm::log2(1.0 + pen))
}

pub fn rate_bound_singleton(inp: &RateBoundInputs) -> Result<f64, AnalysisError> {
    rate_bound(inp, 0)
}

pub fn rate_bound_collision(inp: &RateBoundInputs) -> Result<f64, AnalysisError> {
    rate_bound(inp, inp.colliders)
}

/// Per-subcarrier gains of generated sparse channels, kept only when the
/// channel energy exceeds `xi`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedGains {
    pub samples: Vec<f64>,
    pub acceptance: f64,
}

/// Draws `trials` channels, keeps those with `||h||^2 > xi`, and records
/// `subcarriers_per_trial` gains at uniformly chosen data subcarriers.
pub fn conditioned_gains(
    cfg: &CheckedConfig,
    xi: f64,
    trials: usize,
    subcarriers_per_trial: usize,
    seed: StreamSeed,
) -> Result<ConditionedGains, AnalysisError> {
    let c = cfg.config();
    let mut rng = seed.rng("conditioned-gains");
    let data = cfg.data_subcarriers();
    let mut samples = Vec::new();
    let mut accepted = 0usize;
    for _ in 0..trials {
        let h = gen_channel(0, c.k1, c.s_d, &mut rng);
        if h.energy() <= xi {
            continue;
        }
        accepted += 1;
        for _ in 0..subcarriers_per_trial {
            let f = if data.is_empty() { rng.gen_range(0..cfg.n()) } else { data[rng.gen_range(0..data.len())] };
            samples.push(h.response_at(f, cfg.n()).norm_sqr());
        }
    }
    let acceptance = if trials == 0 { 0.0 } else { accepted as f64 / trials as f64 };
    if acceptance < 1e-3 {
        return Err(AnalysisError::RareConditioning(acceptance));
    }
    Ok(ConditionedGains { samples, acceptance })
}

/// The expectation term of the rate bounds times `p_detect`.
pub fn expected_log_term(
    cfg: &CheckedConfig,
    xi: f64,
    p_detect: f64,
    trials: usize,
    seed: StreamSeed,
) -> Result<f64, AnalysisError> {
    let g = conditioned_gains(cfg, xi, trials, 16, seed)?;
    let c = cfg.config();
    Ok(expected_log(&g.samples, c.alpha, c.noise_var) * p_detect)
}

/// BPSK symbol error rate over flat Rayleigh fading at mean SNR `gamma`.
pub fn rayleigh_bpsk_ser(gamma: f64) -> f64 {
    if gamma.is_infinite() {
        return 0.0;
    }
    0.5 * (1.0 - (gamma / (1.0 + gamma)).sqrt())
}

/// Mean SNR at which [`rayleigh_bpsk_ser`] equals `ser` (for `0 < ser < 0.5`).
pub fn rayleigh_bpsk_snr_for(ser: f64) -> f64 {
    let r = 1.0 - 2.0 * ser;
    let r2 = r * r;
    r2 / (1.0 - r2)
}
