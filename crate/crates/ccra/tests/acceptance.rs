//! Acceptance criteria. Each criterion prints one PASS/FAIL line with the
//! measured values; every tolerance and runtime limit is a constant below.
//!
//! Failures are reported but only change the exit status when
//! `CCRA_ACCEPTANCE_STRICT=1` is set.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use ccra::config::RunConfig;
use ccra::experiments::{phy_frames, point_seed, IDEAL_PREAMBLES};
use ccra::fft::Dft;
use ccra::frame::PhyFrame;
use ccra::recovery::{calibrate_threshold, estimate_pmd_pfa, FftOperator, Receiver, ReceiverConfig};
use ccra::signal::circ_apply;
use ccra_core::analysis::{
    and_or_tree, c1_of_delta, conditioned_gains, de_at_load, de_threshold, rate_bound_collision, rate_bound_singleton,
    CaptureTable, DeOptions, DegreeDistribution, RateBoundInputs,
};
use ccra_core::channel::{gen_channel, ChannelRealization, Tap};
use ccra_core::mac::{run_abstract_frame, AbstractFrame};
use ccra_core::math::complex_normal;
use ccra_core::model::ControlBand;
use ccra_core::preamble::{PatternMap, PreambleSet};
use ccra_core::solver::{bpdn_solve, hicosamp_solve, BpdnOptions, DirectOperator, GreedyOptions, SensingOperator};
use ccra_core::stats::{Moments, Proportion};
use ccra_core::{CheckedConfig, StreamSeed, SystemConfig};
use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;

const SEED: u64 = 20_240_601;

// AC1
const CONV_TRIALS: usize = 100;
const CONV_N: usize = 1024;
const CONV_REL_TOL: f64 = 1e-9;
const CONV_LIMIT: Duration = Duration::from_secs(1);
// AC2
const ADJ_DRAWS: usize = 100;
const ADJ_TOL: f64 = 1e-10;
const ADJ_LIMIT: Duration = Duration::from_secs(5);
// AC3
const CS_N: usize = 1024;
const CS_M: usize = 256;
const CS_U: usize = 20;
const CS_K2: usize = 3;
const CS_K1: usize = 4;
const CS_SD: usize = 32;
const CS_TRIALS: usize = 100;
const CS_REQUIRED: usize = 99;
const CS_BPDN_EPS: f64 = 1e-8;
/// Entries below this fraction of the largest magnitude count as zero.
const CS_SUPPORT_REL: f64 = 1e-6;
const CS_LIMIT: Duration = Duration::from_secs(60);
// AC4
const DE_DISTS: usize = 100;
const DE_TOL: f64 = 1e-12;
const DE_LIMIT: Duration = Duration::from_secs(10);
// AC5
const MAC_SLOTS: usize = 2000;
const MAC_FRAMES: usize = 200;
const MAC_LOADS: [f64; 3] = [0.5, 0.7, 0.95];
const MAC_SIGMAS: f64 = 3.0;
const THRESHOLD_RANGE: (f64, f64) = (0.75, 0.90);
const THRESHOLD_TOL: f64 = 1e-3;
const MAC_LIMIT: Duration = Duration::from_secs(300);
// AC6
const ENDPOINT_USERS: [usize; 4] = [3, 5, 10, 20];
const ENDPOINT_FRAMES: usize = 40;
const ENDPOINT_TOL: f64 = 0.02;
const ENDPOINT_LIMIT: Duration = Duration::from_secs(300);
// AC7
const SHAPE_USERS: usize = 10;
const SHAPE_ALPHAS: [f64; 3] = [0.01, 0.21, 0.91];
const SHAPE_FRAMES: usize = 300;
const SHAPE_RATIO: f64 = 10.0;
const SHAPE_LIMIT: Duration = Duration::from_secs(600);
// AC8
const ORDER_ALPHAS: [f64; 3] = [0.21, 0.51, 0.81];
const ORDER_USERS: [usize; 4] = [3, 5, 10, 20];
const ORDER_FRAMES: usize = 150;
/// A decrease counts only when it exceeds this many combined binomial
/// standard errors.
const ORDER_SIGMAS: f64 = 3.0;
const ORDER_LIMIT: Duration = Duration::from_secs(900);
// AC9
const BOUND_ALPHAS: [f64; 6] = [0.05, 0.2, 0.4, 0.6, 0.8, 0.95];
const BOUND_COLLIDERS: [usize; 3] = [1, 2, 4];
const BOUND_LIMIT: Duration = Duration::from_secs(1);
// AC10
const CAL_TRIALS: usize = 2000;
const CAL_PFA: f64 = 1e-3;
const CAL_PMD_MAX: f64 = 0.05;
const CAL_LIMIT: Duration = Duration::from_secs(600);

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 10] = [
        ("AC1 convolution identity", CONV_LIMIT, ac1_convolution),
        ("AC2 operator adjoint", ADJ_LIMIT, ac2_adjoint),
        ("AC3 noiseless structured recovery", CS_LIMIT, ac3_noiseless_recovery),
        ("AC4 DE reduction oracle", DE_LIMIT, ac4_de_reduction),
        ("AC5 DE vs simulator", MAC_LIMIT, ac5_de_vs_simulator),
        ("AC6 SER endpoint at alpha=1", ENDPOINT_LIMIT, ac6_endpoint),
        ("AC7 SER interior minimum", SHAPE_LIMIT, ac7_shape),
        ("AC8 SER ordering in users", ORDER_LIMIT, ac8_ordering),
        ("AC9 rate-bound sanity", BOUND_LIMIT, ac9_bounds),
        ("AC10 detection operating point", CAL_LIMIT, ac10_detection),
    ];
    let mut failed = Vec::new();
    for (name, limit, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = start.elapsed();
        let timing = format!("{:.2}s of {}s", took.as_secs_f64(), limit.as_secs());
        let outcome = match outcome {
            Ok(d) if took > limit => Err(format!("{d}; over time limit")),
            o => o,
        };
        match outcome {
            Ok(d) => println!("PASS {name}: {d} [{timing}]"),
            Err(d) => {
                println!("FAIL {name}: {d} [{timing}]");
                failed.push(name);
            }
        }
    }
    println!("acceptance: {} of 10 passed", 10 - failed.len());
    if !failed.is_empty() && std::env::var("CCRA_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}

/// Circular convolution straight from the definition.
fn circ_conv_oracle(h: &ChannelRealization, v: &[Complex64]) -> Vec<Complex64> {
    let n = v.len();
    (0..n)
        .map(|t| h.taps.iter().map(|tap| tap.gain * v[(t + n - tap.delay) % n]).sum())
        .collect()
}

fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
    num / den
}

fn ac1_convolution() -> Outcome {
    let dft = Dft::new(CONV_N);
    let (s_cp, s_d) = (300, 300);
    let mut worst: f64 = 0.0;
    for t in 0..CONV_TRIALS {
        let seed = StreamSeed::new(SEED).derive(t as u64);
        let mut rng = seed.rng("ac1");
        let k1 = rng.gen_range(1..=8);
        let h = gen_channel(0, k1, s_d, &mut rng);
        let v: Vec<Complex64> = (0..CONV_N).map(|_| complex_normal(&mut rng, 1.0)).collect();
        let fast = circ_apply(&dft, &h, &v, s_cp).map_err(|e| e.to_string())?;
        worst = worst.max(rel_err(&fast, &circ_conv_oracle(&h, &v)));
    }
    check(worst <= CONV_REL_TOL, format!("worst relative error {worst:.3e} (tol {CONV_REL_TOL:e})"))
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn adjoint_gap(op: &dyn SensingOperator, rng: &mut impl Rng) -> f64 {
    let h: Vec<Complex64> = (0..op.cols()).map(|_| complex_normal(rng, 1.0)).collect();
    let r: Vec<Complex64> = (0..op.rows()).map(|_| complex_normal(rng, 1.0)).collect();
    let mut ah = vec![Complex64::new(0.0, 0.0); op.rows()];
    let mut atr = vec![Complex64::new(0.0, 0.0); op.cols()];
    op.forward(&h, &mut ah);
    op.adjoint(&r, &mut atr);
    (inner(&ah, &r) - inner(&h, &atr)).norm() / (norm(&h) * norm(&r))
}

fn ac2_adjoint() -> Outcome {
    let cfg = CheckedConfig::new(SystemConfig::scaled()).map_err(|e| e.to_string())?;
    let pre = PreambleSet::generate(&cfg, StreamSeed::new(SEED));
    let s_d = cfg.config().s_d;
    let fft = FftOperator::new(&pre, s_d, Dft::new(cfg.n()));
    let direct = DirectOperator::new(&pre, s_d);
    let mut rng = StreamSeed::new(SEED).rng("ac2");
    let (mut wf, mut wd): (f64, f64) = (0.0, 0.0);
    for _ in 0..ADJ_DRAWS {
        wf = wf.max(adjoint_gap(&fft, &mut rng));
        wd = wd.max(adjoint_gap(&direct, &mut rng));
    }
    check(wf <= ADJ_TOL && wd <= ADJ_TOL, format!("worst gap fft {wf:.3e}, direct {wd:.3e} (tol {ADJ_TOL:e})"))
}

fn support(x: &[Complex64]) -> Vec<usize> {
    let max = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
    (0..x.len()).filter(|&j| max > 0.0 && x[j].norm() > CS_SUPPORT_REL * max).collect()
}

fn ac3_noiseless_recovery() -> Outcome {
    let mut c = SystemConfig::scaled();
    c.n = CS_N;
    c.control_band = ControlBand::Random(CS_M);
    c.num_users = CS_U;
    c.k2 = CS_K2;
    c.k1 = CS_K1;
    c.s_d = CS_SD;
    c.s_cp = CS_SD;
    c.noise_var = 0.0;
    let cfg = CheckedConfig::new(c).map_err(|e| e.to_string())?;
    let receiver = Receiver::new(cfg.clone(), ReceiverConfig::default());
    let op = DirectOperator::new(&receiver.preambles, CS_SD);
    let (mut greedy_ok, mut bpdn_ok) = (0, 0);
    for t in 0..CS_TRIALS {
        let seed = StreamSeed::new(SEED).derive(t as u64);
        let mut active = index::sample(&mut seed.rng("active-set"), CS_U, CS_K2).into_vec();
        active.sort_unstable();
        let channels: Vec<ChannelRealization> =
            active.iter().map(|&u| gen_channel(u, CS_K1, CS_SD, &mut seed.derive(u as u64).rng("channel"))).collect();
        let mut truth: Vec<usize> = active
            .iter()
            .zip(&channels)
            .flat_map(|(&u, h)| h.taps.iter().map(move |tap: &Tap| u * CS_SD + tap.delay))
            .collect();
        truth.sort_unstable();
        let y = receiver.control_observation(&active, &channels, seed);
        let g = hicosamp_solve(&op, &y, CS_K2, CS_K1, &GreedyOptions::default()).map_err(|e| e.to_string())?;
        greedy_ok += usize::from(support(&g.estimate) == truth);
        let b = bpdn_solve(&op, &y, CS_BPDN_EPS, &BpdnOptions::default()).map_err(|e| e.to_string())?;
        bpdn_ok += usize::from(support(&b.estimate) == truth);
    }
    check(
        greedy_ok >= CS_REQUIRED && bpdn_ok >= CS_REQUIRED,
        format!("exact support hicosamp {greedy_ok}/{CS_TRIALS}, bpdn {bpdn_ok}/{CS_TRIALS} (need {CS_REQUIRED})"),
    )
}

/// Random probability vector indexed by degree, entry 0 unused.
fn random_dist(rng: &mut impl Rng, max_degree: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..=max_degree).map(|d| if d == 0 { 0.0 } else { rng.gen::<f64>() }).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().enumerate().skip(1).map(|(k, ck)| ck * x.powi(k as i32 - 1)).sum()
}

fn ac4_de_reduction() -> Outcome {
    let mut rng = StreamSeed::new(SEED).rng("ac4");
    let mut worst: f64 = 0.0;
    for _ in 0..DE_DISTS {
        let dw = rng.gen_range(1..=12);
        let omega = random_dist(&mut rng, dw);
        let dl = rng.gen_range(1..=8);
        let lambda = random_dist(&mut rng, dl);
        let table = CaptureTable::singleton_only(omega.len());
        let r = and_or_tree(&omega, &lambda, &table, None, &DeOptions::default()).map_err(|e| e.to_string())?;
        let mut q = 1.0;
        for (i, &p_i) in r.p.iter().enumerate() {
            let p = 1.0 - poly(&omega, 1.0 - q);
            q = poly(&lambda, p);
            worst = worst.max((p - p_i).abs()).max((q - r.q[i + 1]).abs());
        }
    }
    check(worst <= DE_TOL, format!("worst deviation {worst:.3e} over {DE_DISTS} distributions (tol {DE_TOL:e})"))
}

fn ac5_de_vs_simulator() -> Outcome {
    let dist = DegreeDistribution::regular(3);
    let table = CaptureTable::singleton_only(64);
    let patterns = PatternMap::new(StreamSeed::new(SEED), MAC_SLOTS, &[(3, 1.0)]);
    let mut details = Vec::new();
    let mut ok = true;
    for (i, &g) in MAC_LOADS.iter().enumerate() {
        let active = (g * MAC_SLOTS as f64).round() as usize;
        let frame = AbstractFrame { patterns: &patterns, num_preambles: IDEAL_PREAMBLES, active, capture: &table };
        let seed = point_seed(SEED, i);
        let mut loss = Moments::default();
        for t in 0..MAC_FRAMES {
            let f = run_abstract_frame(&frame, seed.derive(t as u64));
            loss.push(f.lost() as f64 / f.active() as f64);
        }
        let de = 1.0 - de_at_load(g, &dist, &table, &DeOptions::default()).map_err(|e| e.to_string())?.p_decoded_node;
        let sigma = loss.std_error();
        let close = (loss.mean() - de).abs() <= MAC_SIGMAS * sigma;
        ok &= close;
        details.push(format!("G={g}: sim {:.4e} +- {:.1e}, DE {de:.4e}", loss.mean(), sigma));
    }
    let g_star = de_threshold(&dist, &table, 0.5, 1.2, 1e-6, THRESHOLD_TOL, &DeOptions::default()).map_err(|e| e.to_string())?;
    let in_range = g_star > THRESHOLD_RANGE.0 && g_star < THRESHOLD_RANGE.1;
    details.push(format!("threshold {g_star:.4}"));
    check(ok && in_range, details.join("; "))
}

fn scaled_frames(k2: usize, alpha: f64, frames: usize, point: usize) -> Result<Vec<PhyFrame>, String> {
    let cfg = RunConfig::scaled().with(|f| {
        f.k2 = k2;
        f.alpha = alpha;
        f.master_seed = SEED;
    });
    let cfg = cfg.map_err(|e| e.to_string())?;
    phy_frames(&cfg, point_seed(SEED, point), frames).map_err(|e| e.to_string())
}

fn ser_of(frames: &[PhyFrame]) -> Proportion {
    frames.iter().fold(Proportion::new(0, 0), |a, f| a.merge(f.symbols))
}

fn ac6_endpoint() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for (i, &k2) in ENDPOINT_USERS.iter().enumerate() {
        let ser = ser_of(&scaled_frames(k2, 1.0, ENDPOINT_FRAMES, 600 + i)?).rate();
        ok &= (ser - 0.5).abs() <= ENDPOINT_TOL;
        details.push(format!("k2={k2}: {ser:.4}"));
    }
    check(ok, details.join(", "))
}

fn ac7_shape() -> Outcome {
    let sers = SHAPE_ALPHAS
        .iter()
        .enumerate()
        .map(|(i, &a)| scaled_frames(SHAPE_USERS, a, SHAPE_FRAMES, 700 + i).map(|f| ser_of(&f)))
        .collect::<Result<Vec<_>, _>>()?;
    let (low, mid, high) = (sers[0].rate(), sers[1].rate(), sers[2].rate());
    let detail = format!(
        "SER(0.01)={low:.3e}, SER(0.21)={mid:.3e}, SER(0.91)={high:.3e}; need SER(0.21) < SER(0.01)/{SHAPE_RATIO} and < SER(0.91)"
    );
    check(mid < low / SHAPE_RATIO && mid < high, detail)
}

fn ac8_ordering() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for (ai, &alpha) in ORDER_ALPHAS.iter().enumerate() {
        let sers = ORDER_USERS
            .iter()
            .enumerate()
            .map(|(ui, &k2)| scaled_frames(k2, alpha, ORDER_FRAMES, 800 + 10 * ai + ui).map(|f| ser_of(&f)))
            .collect::<Result<Vec<_>, _>>()?;
        for w in sers.windows(2) {
            let se = |p: &Proportion| (p.rate() * (1.0 - p.rate()) / p.trials.max(1) as f64).sqrt();
            let slack = ORDER_SIGMAS * (se(&w[0]).powi(2) + se(&w[1]).powi(2)).sqrt();
            ok &= w[1].rate() >= w[0].rate() - slack;
        }
        let list: Vec<String> = sers.iter().map(|p| format!("{:.2e}", p.rate())).collect();
        details.push(format!("alpha={alpha}: [{}]", list.join(", ")));
    }
    check(ok, format!("users {ORDER_USERS:?}; {}", details.join("; ")))
}

fn ac9_bounds() -> Outcome {
    let cfg = CheckedConfig::new(SystemConfig::scaled()).map_err(|e| e.to_string())?;
    let c = cfg.config();
    let gains = conditioned_gains(&cfg, 0.05, 200, 16, StreamSeed::new(SEED)).map_err(|e| e.to_string())?;
    let base = |alpha: f64, colliders: usize| RateBoundInputs {
        alpha,
        noise_var: c.noise_var,
        m: cfg.m(),
        n: c.n,
        k2: c.k2,
        delta: 0.1,
        p_detect: 0.95,
        colliders,
        gain_samples: gains.samples.clone(),
    };
    let e = |r: Result<f64, _>| r.map_err(|e: ccra_core::analysis::AnalysisError| e.to_string());
    let s1 = e(rate_bound_singleton(&base(1.0, 0)))?;
    let c1s = BOUND_COLLIDERS.iter().map(|&k| e(rate_bound_collision(&base(1.0, k)))).collect::<Result<Vec<_>, _>>()?;
    let zero = s1 == 0.0 && c1s.iter().all(|&v| v == 0.0);
    let mut ordered = true;
    for &a in &BOUND_ALPHAS {
        let s = e(rate_bound_singleton(&base(a, 0)))?;
        for &k in &BOUND_COLLIDERS {
            ordered &= e(rate_bound_collision(&base(a, k)))? <= s;
        }
    }
    let c1 = c1_of_delta(0.0).map_err(|e| e.to_string())?;
    check(
        zero && ordered && c1 == 4.0,
        format!("alpha=1 bounds zero: {zero}; collision <= singleton: {ordered}; c1(0) = {c1}"),
    )
}

fn ac10_detection() -> Outcome {
    let cfg = CheckedConfig::new(SystemConfig::scaled()).map_err(|e| e.to_string())?;
    let receiver = Receiver::new(cfg, ReceiverConfig::default());
    let seed = StreamSeed::new(SEED);
    let cal = calibrate_threshold(&receiver, CAL_PFA, CAL_TRIALS, seed).map_err(|e| e.to_string())?;
    let rates = estimate_pmd_pfa(&receiver, cal.xi, CAL_TRIALS, seed).map_err(|e| e.to_string())?;
    let pmd = rates.missed.rate();
    check(
        pmd <= CAL_PMD_MAX,
        format!(
            "xi={:.4e}, P_md={pmd:.4} (max {CAL_PMD_MAX}), P_fa={:.2e} on fresh trials",
            cal.xi,
            rates.false_alarm.rate()
        ),
    )
}
