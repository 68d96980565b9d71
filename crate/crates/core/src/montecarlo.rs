//! Session statistics, closed-form security figures, dimension scans and the
//! direct-communication survival curve.
//!
//! Sessions are cut into fixed-size shards. Shard `i` draws from a ChaCha8
//! stream seeded with the session seed and stream number `i`, so results are
//! bit-identical for a given seed no matter how many worker threads run.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::galois::{factor_prime_power, FieldSpec};
use crate::mub::MubTable;
use crate::protocol::{run_once, EveStrategy, Mode, ProtocolConfig, RunRecord};

/// Runs per shard.
pub const SHARD_SIZE: u64 = 16_384;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

fn check_dimension(d: u64) -> Result<f64> {
    factor_prime_power(d)?;
    Ok(d as f64)
}

/// `(d−1)²/d³`: probability per control run that the controlled-shift
/// attack is caught.
pub fn analytic_pe(d: u64) -> Result<f64> {
    let d = check_dimension(d)?;
    Ok((d - 1.0).powi(2) / d.powi(3))
}

/// `(d−1)²/d²`: the same, conditioned on coincident bases.
pub fn analytic_pe_coincident(d: u64) -> Result<f64> {
    let d = check_dimension(d)?;
    Ok((d - 1.0).powi(2) / d.powi(2))
}

/// `(d²−1)(d−1)/d⁴`: per-control-run detection of intercept-resend.
pub fn analytic_ir_detect(d: u64) -> Result<f64> {
    let d = check_dimension(d)?;
    Ok((d * d - 1.0) * (d - 1.0) / d.powi(4))
}

/// `log₂ d` bits per message run.
pub fn eve_info(d: u64) -> Result<f64> {
    let d = check_dimension(d)?;
    Ok(d.log2())
}

/// Wilson score interval for `successes / n`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // the bounds are exactly 0 and 1 at the extremes; avoid rounding residue
    let lo = if successes == 0 {
        0.0
    } else {
        (centre - half).max(0.0)
    };
    let hi = if successes as f64 == n {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    (lo, hi)
}

/// Raw counters; merging is addition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SessionCounters {
    pub n_runs: u64,
    pub n_control: u64,
    pub n_message: u64,
    pub n_coincident: u64,
    pub n_detected: u64,
    pub n_coincident_dual: u64,
    pub n_detected_dual: u64,
    pub n_coincident_other: u64,
    pub n_alice_mismatch_other: u64,
    pub n_bob_correct: u64,
    pub n_eve_correct: u64,
}

impl SessionCounters {
    pub fn record(&mut self, r: &RunRecord) {
        self.n_runs += 1;
        match r.mode {
            Mode::Message => {
                self.n_message += 1;
                if r.decoded_a == r.encoded_a {
                    self.n_bob_correct += 1;
                }
                if r.eve_decoded.is_some() && r.eve_decoded == r.encoded_a {
                    self.n_eve_correct += 1;
                }
            }
            Mode::Control => {
                self.n_control += 1;
                if r.coincident {
                    self.n_coincident += 1;
                    if r.bob_k == 1 {
                        self.n_coincident_dual += 1;
                        self.n_detected_dual += r.detected as u64;
                    } else {
                        self.n_coincident_other += 1;
                        self.n_alice_mismatch_other += (r.alice_outcome != Some(r.bob_t)) as u64;
                    }
                }
                self.n_detected += r.detected as u64;
            }
        }
    }

    pub fn merge(mut self, other: SessionCounters) -> SessionCounters {
        self.n_runs += other.n_runs;
        self.n_control += other.n_control;
        self.n_message += other.n_message;
        self.n_coincident += other.n_coincident;
        self.n_detected += other.n_detected;
        self.n_coincident_dual += other.n_coincident_dual;
        self.n_detected_dual += other.n_detected_dual;
        self.n_coincident_other += other.n_coincident_other;
        self.n_alice_mismatch_other += other.n_alice_mismatch_other;
        self.n_bob_correct += other.n_bob_correct;
        self.n_eve_correct += other.n_eve_correct;
        self
    }
}

/// Aggregated session result. `pe_hat` is per control run (coincident or
/// not); `pe_coincident_hat` conditions on coincident bases.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SessionStats {
    pub d: u32,
    pub attack: EveStrategy,
    pub c: f64,
    pub seed: u64,
    #[serde(flatten)]
    pub counters: SessionCounters,
    pub pe_hat: f64,
    pub pe_ci_lo: f64,
    pub pe_ci_hi: f64,
    pub pe_coincident_hat: f64,
    pub eve_message_accuracy: Option<f64>,
    pub bob_message_accuracy: Option<f64>,
    pub pe_analytic: f64,
    pub pe_coincident_analytic: f64,
    pub ir_analytic: f64,
    pub i_e: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl SessionStats {
    pub fn from_counters(config: &ProtocolConfig, counters: SessionCounters) -> Result<Self> {
        let d = config.field.order() as u64;
        let (pe_ci_lo, pe_ci_hi) = wilson_interval(counters.n_detected, counters.n_control, Z_95);
        let message_ratio = |n| (counters.n_message > 0).then(|| ratio(n, counters.n_message));
        Ok(SessionStats {
            d: config.field.order(),
            attack: config.eve,
            c: config.control_probability,
            seed: config.seed,
            counters,
            pe_hat: ratio(counters.n_detected, counters.n_control),
            pe_ci_lo,
            pe_ci_hi,
            pe_coincident_hat: ratio(counters.n_detected, counters.n_coincident),
            eve_message_accuracy: match config.eve {
                EveStrategy::None => None,
                _ => message_ratio(counters.n_eve_correct),
            },
            bob_message_accuracy: message_ratio(counters.n_bob_correct),
            pe_analytic: analytic_pe(d)?,
            pe_coincident_analytic: analytic_pe_coincident(d)?,
            ir_analytic: analytic_ir_detect(d)?,
            i_e: eve_info(d)?,
        })
    }

    /// Expected per-control-run detection rate for this session's attack.
    pub fn expected_detection_rate(&self) -> f64 {
        match self.attack {
            EveStrategy::None => 0.0,
            EveStrategy::InterceptResend => self.ir_analytic,
            EveStrategy::ControlledShift => self.pe_analytic,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

fn shard_rng(seed: u64, shard: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    rng
}

fn shard_bounds(n: u64) -> impl IndexedParallelIterator<Item = (u64, u64, u64)> {
    let shards = n.div_ceil(SHARD_SIZE) as usize;
    (0..shards).into_par_iter().map(move |i| {
        let i = i as u64;
        let start = i * SHARD_SIZE;
        (i, start, (start + SHARD_SIZE).min(n))
    })
}

fn with_workers<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            Ok(pool.install(job))
        }
    }
}

/// Runs `n` protocol rounds and aggregates them.
pub fn run_session(config: &ProtocolConfig, n: u64) -> Result<SessionStats> {
    let tab = MubTable::build(&config.field);
    run_session_with(config, &tab, n, None)
}

pub fn run_session_with(
    config: &ProtocolConfig,
    tab: &MubTable,
    n: u64,
    workers: Option<usize>,
) -> Result<SessionStats> {
    config.validate()?;
    if n == 0 {
        return Err(Error::InvalidConfig("at least one run is required".into()));
    }
    let counters = with_workers(workers, || {
        shard_bounds(n)
            .map(|(shard, start, end)| {
                let mut rng = shard_rng(config.seed, shard);
                let mut counters = SessionCounters::default();
                for i in start..end {
                    counters.record(&run_once(config, tab, i, &mut rng)?);
                }
                Ok::<_, Error>(counters)
            })
            .try_reduce(SessionCounters::default, |a, b| Ok(a.merge(b)))
    })??;
    SessionStats::from_counters(config, counters)
}

/// Full per-run transcript, drawn from the same shard streams as [`run_session_with`].
pub fn run_transcript(
    config: &ProtocolConfig,
    tab: &MubTable,
    n: u64,
    workers: Option<usize>,
) -> Result<Vec<RunRecord>> {
    config.validate()?;
    with_workers(workers, || {
        let shards: Result<Vec<Vec<RunRecord>>> = shard_bounds(n)
            .map(|(shard, start, end)| {
                let mut rng = shard_rng(config.seed, shard);
                (start..end)
                    .map(|i| run_once(config, tab, i, &mut rng))
                    .collect()
            })
            .collect();
        shards.map(|s| s.into_iter().flatten().collect())
    })?
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub d: u32,
    pub pe_analytic: f64,
    pub pe_hat: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub n_control: u64,
}

/// Closed-form `P_E` for each dimension.
pub fn analytic_scan(dims: &[u64]) -> Result<Vec<ScanRow>> {
    dims.iter()
        .map(|&d| {
            Ok(ScanRow {
                d: d as u32,
                pe_analytic: analytic_pe(d)?,
                pe_hat: None,
                ci_lo: None,
                ci_hi: None,
                n_control: 0,
            })
        })
        .collect()
}

/// Settings shared by every dimension of a scan.
#[derive(Clone, Debug)]
pub struct ScanSettings {
    pub runs: u64,
    pub c: f64,
    pub attack: EveStrategy,
    pub seed: u64,
    pub workers: Option<usize>,
}

/// Session seed used for dimension `d` in a scan.
pub fn scan_seed(seed: u64, d: u64) -> u64 {
    seed ^ (d << 32)
}

/// Simulates every dimension in turn. Dimensions are validated up front
/// (prime powers up to 32).
pub fn scan_dimensions(dims: &[u64], settings: &ScanSettings) -> Result<Vec<ScanRow>> {
    for &d in dims {
        factor_prime_power(d)?;
        if d > 32 {
            return Err(Error::InvalidConfig(format!(
                "scan dimensions are limited to 32, got {d}"
            )));
        }
    }
    dims.iter()
        .map(|&d| {
            let field = FieldSpec::with_order(d)?;
            let tab = MubTable::build(&field);
            let config = ProtocolConfig::new(
                field,
                settings.c,
                settings.attack,
                scan_seed(settings.seed, d),
            );
            let stats = run_session_with(&config, &tab, settings.runs, settings.workers)?;
            Ok(ScanRow {
                d: d as u32,
                pe_analytic: stats.pe_analytic,
                pe_hat: Some(stats.pe_hat),
                ci_lo: Some(stats.pe_ci_lo),
                ci_hi: Some(stats.pe_ci_hi),
                n_control: stats.counters.n_control,
            })
        })
        .collect()
}

/// CSV with header `d,pe_analytic,pe_hat,ci_lo,ci_hi,n_control`.
pub fn write_scan_csv<W: Write>(rows: &[ScanRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// `(1−c) / (1 − c(1−P_E))`: probability that Eve gets through a message
/// run without being caught by any preceding control run.
pub fn qdc_undetected(c: f64, pe: f64) -> Result<f64> {
    if !(c > 0.0 && c <= 1.0) || !(0.0..=1.0).contains(&pe) {
        return Err(Error::InvalidConfig(format!(
            "need c in (0, 1] and pe in [0, 1], got c={c}, pe={pe}"
        )));
    }
    if c == 1.0 && pe == 0.0 {
        return Err(Error::DegenerateSeries);
    }
    Ok((1.0 - c) / (1.0 - c * (1.0 - pe)))
}

/// Probability that Eve eavesdrops `bits` of information undetected when
/// each message run yields `eve_bits`.
pub fn qdc_success(c: f64, pe: f64, bits: f64, eve_bits: f64) -> Result<f64> {
    if bits < 0.0 || eve_bits <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "need I >= 0 and I_E > 0, got I={bits}, I_E={eve_bits}"
        )));
    }
    Ok(qdc_undetected(c, pe)?.powf(bits / eve_bits))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QdcPoint {
    pub bits: f64,
    pub p_success: f64,
    pub p_detected: f64,
}

/// The success curve over `I = 0, step, 2·step, …, max_bits` (the last
/// point is always `max_bits`) for the controlled-shift attack in dimension `d`.
pub fn qdc_curve(c: f64, d: u64, max_bits: f64, step: f64) -> Result<Vec<QdcPoint>> {
    if step <= 0.0 || max_bits < 0.0 {
        return Err(Error::InvalidConfig("need step > 0 and bits >= 0".into()));
    }
    let pe = analytic_pe(d)?;
    let ie = eve_info(d)?;
    let count = (max_bits / step).floor() as u64;
    let mut grid: Vec<f64> = (0..=count).map(|i| i as f64 * step).collect();
    if grid.last().is_some_and(|&last| last < max_bits) {
        grid.push(max_bits);
    }
    grid.into_iter()
        .map(|bits| {
            let p = qdc_success(c, pe, bits, ie)?;
            Ok(QdcPoint {
                bits,
                p_success: p,
                p_detected: 1.0 - p,
            })
        })
        .collect()
}

pub fn write_qdc_csv<W: Write>(points: &[QdcPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for point in points {
        w.serialize(point)?;
    }
    w.flush()?;
    Ok(())
}
