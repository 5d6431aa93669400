//! Latency and batching measurements.
//!
//! Wall-clock mode runs the source router, the producing relay node and the
//! destination router on separate threads connected only by channels that
//! carry encoded frames. Contracts execute inline at the routers, so the
//! latency shape comes from relay batching alone. Virtual mode runs the same
//! workload through the discrete-event testbed.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use ccrelay_core::ccip::{encode, tx_hash, ChainId, ForwardEnvelope};
use ccrelay_core::crypto::Hash32;
use ccrelay_core::router::{Inbound, Router};
use ccrelay_core::testbed::{Deployment, KvContract, Scenario, SimError, Simulation, WorkloadSection};
use ccrelay_core::Millis;
use crossbeam::channel::{unbounded, RecvTimeoutError, Sender};
use serde::Serialize;
use tracing::{debug, warn};

use crate::report::Percentiles;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("benchmark needs two chains and one workload entry")]
    Shape,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{0}")]
    Run(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Wallclock,
    Virtual,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockTiming {
    pub size: usize,
    pub processing_us: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sawtooth {
    /// Configured batch interval divided by the emission gap, in transactions.
    pub expected_period: f64,
    pub peak_lag: usize,
    pub peak_acf: f64,
    pub acf: Vec<f64>,
    pub detected: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub batch_size: usize,
    pub processing_us: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub mode: Mode,
    pub txs: usize,
    pub gap_ms: u64,
    pub batch_interval_ms: u64,
    pub completed: usize,
    /// End-to-end latency per transaction in emission order; `NaN` if unanswered.
    #[serde(serialize_with = "nan_as_null")]
    pub latency_ms: Vec<f64>,
    pub latency: Percentiles,
    pub blocks: Vec<BlockTiming>,
    pub mean_block_processing_us: f64,
    pub sawtooth: Sawtooth,
}

fn nan_as_null<S: serde::Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| if x.is_nan() { None } else { Some(*x) }))
}

/// Sample autocorrelation for lags `0..=max_lag`.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let var: f64 = d.iter().map(|v| v * v).sum();
    (0..=max_lag.min(n.saturating_sub(1)))
        .map(|k| if var == 0.0 { 0.0 } else { d.iter().zip(&d[k..]).map(|(a, b)| a * b).sum::<f64>() / var })
        .collect()
}

/// Residuals of a least-squares line through `(i, x[i])`.
pub fn detrend(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return x.to_vec();
    }
    let mean_i = (n - 1.0) / 2.0;
    let mean_x = x.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in x.iter().enumerate() {
        let di = i as f64 - mean_i;
        sxy += di * (v - mean_x);
        sxx += di * di;
    }
    let slope = sxy / sxx;
    x.iter().enumerate().map(|(i, v)| v - mean_x - slope * (i as f64 - mean_i)).collect()
}

/// Looks for the autocorrelation peak of the detrended series between half
/// and one and a half expected periods. The peak must sit within a tenth of
/// a period (at least one lag) of the expectation and exceed 0.5.
pub fn detect_sawtooth(latency: &[f64], expected_period: f64) -> Sawtooth {
    let lo = (expected_period / 2.0).ceil().max(1.0) as usize;
    let hi = (expected_period * 1.5).floor() as usize;
    let acf = autocorrelation(&detrend(latency), hi);
    let (peak_lag, peak_acf) = (lo..acf.len())
        .map(|k| (k, acf[k]))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0, f64::NAN));
    let tolerance = (expected_period / 10.0).max(1.0);
    let detected = hi < acf.len() && (peak_lag as f64 - expected_period).abs() <= tolerance && peak_acf > 0.5;
    Sawtooth { expected_period, peak_lag, peak_acf, acf, detected }
}

fn template(s: &Scenario) -> Result<(ChainId, ChainId, WorkloadSection), BenchError> {
    if s.chains.len() < 2 || s.workload.is_empty() {
        return Err(BenchError::Shape);
    }
    let mut w = s.workload[0].clone();
    w.chain = s.chains[0].id;
    w.dst_chain = s.chains[1].id;
    Ok((w.chain, w.dst_chain, w))
}

/// The emission gap: the workload's `every_ms`, or 2 ms when unset.
pub fn gap_of(s: &Scenario) -> u64 {
    s.workload.first().map(|w| w.every_ms).filter(|g| *g > 0).unwrap_or(2)
}

fn finish(
    mode: Mode,
    s: &Scenario,
    gap_ms: u64,
    latency_ms: Vec<f64>,
    blocks: Vec<BlockTiming>,
) -> BenchReport {
    let answered: Vec<f64> = latency_ms.iter().copied().filter(|v| !v.is_nan()).collect();
    let mean_block_processing_us = if blocks.is_empty() {
        0.0
    } else {
        blocks.iter().map(|b| b.processing_us).sum::<f64>() / blocks.len() as f64
    };
    let expected_period = s.relay.batch_interval_ms as f64 / gap_ms as f64;
    let sawtooth = detect_sawtooth(&answered, expected_period);
    BenchReport {
        mode,
        txs: latency_ms.len(),
        gap_ms,
        batch_interval_ms: s.relay.batch_interval_ms,
        completed: answered.len(),
        latency: Percentiles::of(&answered),
        latency_ms,
        blocks,
        mean_block_processing_us,
        sawtooth,
    }
}

/// Runs `txs` requests of the scenario's first workload entry through the
/// discrete-event testbed, `gap_ms` apart.
pub fn run_virtual(base: &Scenario, txs: usize, gap_ms: u64) -> Result<BenchReport, BenchError> {
    let (_, _, mut w) = template(base)?;
    let mut s = base.clone();
    w.count = u32::try_from(txs).map_err(|_| BenchError::Run("too many transactions".into()))?;
    w.every_ms = gap_ms;
    s.workload = vec![w];
    s.adversary.clear();
    let r = Simulation::new(s.clone())?.run()?;
    let latency = r.workload().map(|t| t.latency().map_or(f64::NAN, |l| l as f64)).collect();
    let blocks = r.blocks.iter().skip(1).map(|b| BlockTiming { size: b.entries.len(), processing_us: 0.0 }).collect();
    Ok(finish(Mode::Virtual, &s, gap_ms, latency, blocks))
}

struct Source<'a> {
    router: &'a mut Router,
    app: Option<&'a mut KvContract>,
    sent: BTreeMap<Hash32, (usize, Instant)>,
    latency: Vec<f64>,
}

impl Source<'_> {
    fn on_forward(&mut self, bytes: &[u8]) {
        let Ok(env) = ForwardEnvelope::decode(bytes) else { return };
        if let Ok(Inbound::Response(r)) = self.router.receive(&env) {
            if let Some((i, at)) = self.sent.remove(&r.session) {
                self.latency[i] = at.elapsed().as_secs_f64() * 1e3;
                if let Some(app) = self.app.as_deref_mut() {
                    let _ = app.execute(&r.payload.input);
                }
            }
        }
    }
}

struct Clock(Instant);

impl Clock {
    fn now(&self) -> Millis {
        self.0.elapsed().as_millis() as Millis
    }
}

const POLL: Duration = Duration::from_millis(1);

/// Runs `txs` requests through threaded components in real time.
pub fn run_wallclock(base: &Scenario, txs: usize, gap_ms: u64) -> Result<BenchReport, BenchError> {
    let (src, dst, w) = template(base)?;
    let mut s = base.clone();
    s.relay.rotation = false;
    s.relay.offline.clear();
    let clock = Clock(Instant::now());
    let Deployment { mut nodes, mut routers, mut contracts, .. } = Deployment::new(&s, clock.now())?;
    let mut relay = nodes.swap_remove(0);
    let mut src_router = routers.remove(&src).ok_or(BenchError::Shape)?;
    let mut dst_router = routers.remove(&dst).ok_or(BenchError::Shape)?;
    let mut app = contracts.remove(&src).and_then(|c| c.into_iter().find(|k| k.id == w.src_contract));
    let mut target = contracts
        .remove(&dst)
        .and_then(|c| c.into_iter().find(|k| k.id == w.dst_contract))
        .unwrap_or_else(|| KvContract::new(w.dst_contract.clone()));

    let (to_relay, relay_in) = unbounded::<Vec<u8>>();
    let (to_src, src_in) = unbounded::<Vec<u8>>();
    let (to_dst, dst_in) = unbounded::<Vec<u8>>();
    let stop = AtomicBool::new(false);
    let deadline = Duration::from_millis(gap_ms * txs as u64 + 30_000 + 20 * w.timeout_ms);

    let (latency, blocks) = std::thread::scope(|scope| {
        let stop = &stop;
        let clock = &clock;

        let relay_thread = {
            let routes: BTreeMap<ChainId, Sender<Vec<u8>>> = [(src, to_src.clone()), (dst, to_dst.clone())].into();
            scope.spawn(move || {
                let mut blocks = Vec::new();
                while !stop.load(Ordering::Relaxed) {
                    match relay_in.recv_timeout(POLL) {
                        Ok(bytes) => {
                            if let Err(e) = relay.submit(&bytes, clock.now()) {
                                warn!(reason = e.code(), "relay refused a submission");
                            }
                        }
                        Err(RecvTimeoutError::Timeout) => {}
                        Err(RecvTimeoutError::Disconnected) => break,
                    }
                    let now = clock.now();
                    if !relay.block_due(now) {
                        continue;
                    }
                    let started = Instant::now();
                    let block = match relay.produce_block(now) {
                        Ok(b) => b,
                        Err(e) => {
                            warn!(error = %e, "block production failed");
                            continue;
                        }
                    };
                    let deliveries = relay.take_deliveries();
                    let processing_us = started.elapsed().as_secs_f64() * 1e6;
                    blocks.push(BlockTiming { size: block.entries.len(), processing_us });
                    for d in deliveries {
                        if let Some(tx) = routes.get(&d.envelope.dst_chain) {
                            let _ = tx.send(d.envelope.encode());
                        }
                    }
                }
                blocks
            })
        };

        let dst_thread = {
            let to_relay = to_relay.clone();
            let target = &mut target;
            scope.spawn(move || {
                while !stop.load(Ordering::Relaxed) {
                    let bytes = match dst_in.recv_timeout(POLL) {
                        Ok(b) => b,
                        Err(RecvTimeoutError::Timeout) => continue,
                        Err(RecvTimeoutError::Disconnected) => break,
                    };
                    let Ok(env) = ForwardEnvelope::decode(&bytes) else { continue };
                    let request = match dst_router.receive(&env) {
                        Ok(Inbound::Request(r)) => r,
                        Ok(Inbound::Response(_)) => continue,
                        Err(e) => {
                            debug!(error = %e, "destination dropped a forward");
                            continue;
                        }
                    };
                    let result = target.execute(&request.payload.input);
                    if request.payload.callback.is_none() {
                        continue;
                    }
                    match dst_router.pack_response(&request, &result, clock.now()) {
                        Ok(tx) => {
                            let _ = to_relay.send(encode(&tx));
                        }
                        Err(e) => warn!(error = %e, "response packing failed"),
                    }
                }
            })
        };

        // Source router on this thread: emit on schedule, collect callbacks.
        let started = Instant::now();
        let mut source = Source { router: &mut src_router, app: app.as_mut(), sent: BTreeMap::new(), latency: vec![f64::NAN; txs] };
        let mut emit_error = None;
        for i in 0..txs {
            let due = started + Duration::from_millis(gap_ms * i as u64);
            loop {
                let wait = due.saturating_duration_since(Instant::now());
                if wait.is_zero() {
                    break;
                }
                match src_in.recv_timeout(wait) {
                    Ok(bytes) => source.on_forward(&bytes),
                    Err(_) => break,
                }
            }
            let now = clock.now();
            match source.router.pack(dst, &w.payload(i as u32, now), now) {
                Ok(tx) => {
                    source.sent.insert(tx_hash(&tx), (i, Instant::now()));
                    let _ = to_relay.send(encode(&tx));
                }
                Err(e) => {
                    emit_error = Some(e.to_string());
                    break;
                }
            }
        }
        while !source.sent.is_empty() && started.elapsed() < deadline {
            match src_in.recv_timeout(Duration::from_millis(50)) {
                Ok(bytes) => source.on_forward(&bytes),
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => break,
            }
        }
        let latency = source.latency;
        stop.store(true, Ordering::Relaxed);
        let _ = dst_thread.join();
        let blocks = relay_thread.join().unwrap_or_default();
        match emit_error {
            Some(e) => Err(BenchError::Run(e)),
            None => Ok((latency, blocks)),
        }
    })?;
    Ok(finish(Mode::Wallclock, &s, gap_ms, latency, blocks))
}

/// Times `produce_block` over a mempool pre-filled with `size` valid
/// requests, `reps` times per size; reports the median.
pub fn batch_sweep(base: &Scenario, sizes: &[usize], reps: usize) -> Result<Vec<SweepPoint>, BenchError> {
    let (src, dst, w) = template(base)?;
    let mut points = Vec::new();
    for &size in sizes {
        let mut s = base.clone();
        s.relay.rotation = false;
        s.relay.offline.clear();
        s.relay.batch_size = size;
        s.relay.batch_interval_ms = Millis::MAX / 4;
        let mut times = Vec::new();
        for _ in 0..reps.max(1) {
            let now: Millis = 1_000;
            let Deployment { mut nodes, mut routers, .. } = Deployment::new(&s, now)?;
            let relay = &mut nodes[0];
            let router = routers.get_mut(&src).ok_or(BenchError::Shape)?;
            for i in 0..size {
                let tx = router.pack(dst, &w.payload(i as u32, now), now).map_err(|e| BenchError::Run(e.to_string()))?;
                let raw = encode(&tx);
                relay.submit(&raw, now).map_err(|e| BenchError::Run(e.code().into()))?;
            }
            let started = Instant::now();
            let block = relay.produce_block(now).map_err(|e| BenchError::Run(e.to_string()))?;
            relay.take_deliveries();
            times.push(started.elapsed().as_secs_f64() * 1e6);
            if block.entries.len() != size || !block.entries.iter().all(|e| e.verdict.is_verified()) {
                return Err(BenchError::Run(format!("sweep block of {size} did not verify every request")));
            }
        }
        times.sort_by(f64::total_cmp);
        points.push(SweepPoint { batch_size: size, processing_us: times[times.len() / 2] });
    }
    Ok(points)
}

pub fn is_nondecreasing(points: &[SweepPoint]) -> bool {
    points.windows(2).all(|p| p[0].processing_us <= p[1].processing_us)
}

pub fn run(base: &Scenario, mode: Mode, txs: usize, gap_ms: u64) -> Result<BenchReport, BenchError> {
    match mode {
        Mode::Wallclock => run_wallclock(base, txs, gap_ms),
        Mode::Virtual => run_virtual(base, txs, gap_ms),
    }
}
