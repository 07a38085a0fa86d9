use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, warn};

use super::{Adapter, AdapterError, HarnessError, Measurement, Mode, ResourceSample, ResourceSampler, RunConfig, Session, WorkloadPlan};
use crate::model::{ResultSet, TimeInstant};
use crate::queryspec::QueryInstance;

pub const ABORTED: &str = "aborted: connection lost earlier in this repetition";

#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub plan_digest: String,
    pub measurements: Vec<Measurement>,
    pub resources: Vec<ResourceSample>,
    /// Normalized result per instance key, from the first repetition.
    pub results: Option<BTreeMap<String, ResultSet>>,
    pub aborted_repetitions: Vec<u32>,
}

/// Executes one instance and measures the whole request/response wall-clock time.
pub fn timed_execute(session: &mut dyn Session, qi: &QueryInstance) -> (Result<ResultSet, AdapterError>, Duration) {
    let start = Instant::now();
    let res = session.execute(qi);
    (res, start.elapsed())
}

struct Outcome {
    m: Measurement,
    result: Option<ResultSet>,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    repetition: u32,
    capture: bool,
    abort: &'a AtomicBool,
}

impl Ctx<'_> {
    fn measurement(&self, qi: &QueryInstance, client: u32, issue_ts: TimeInstant) -> Measurement {
        Measurement {
            run_id: self.cfg.run_id.clone(),
            repetition: self.repetition,
            query: qi.template.clone(),
            param_set: qi.param_set,
            client,
            issue_ts,
            latency_us: 0,
            rows: 0,
            success: false,
            error: None,
        }
    }

    fn failed(&self, qi: &QueryInstance, client: u32, error: String) -> Outcome {
        let mut m = self.measurement(qi, client, TimeInstant::now());
        m.error = Some(error);
        Outcome { m, result: None }
    }

    /// Issues `instances` in order on a fresh session, closed loop.
    fn client_loop<'q>(
        &self,
        adapter: &dyn Adapter,
        client: u32,
        instances: impl Iterator<Item = &'q QueryInstance>,
    ) -> Vec<Outcome> {
        let mut out = Vec::new();
        let mut first_error = None;
        let mut session = match adapter.session() {
            Ok(s) => Some(s),
            Err(e) => {
                self.abort.store(true, Ordering::SeqCst);
                first_error = Some(e.to_string());
                None
            }
        };
        for qi in instances {
            let Some(s) = session.as_mut().filter(|_| !self.abort.load(Ordering::SeqCst)) else {
                let error = first_error.take().unwrap_or_else(|| ABORTED.into());
                out.push(self.failed(qi, client, error));
                continue;
            };
            let issue_ts = TimeInstant::now();
            let (res, elapsed) = timed_execute(s.as_mut(), qi);
            let mut m = self.measurement(qi, client, issue_ts);
            m.latency_us = elapsed.as_micros() as u64;
            match res {
                Ok(rs) => {
                    m.success = true;
                    m.rows = rs.row_count() as u64;
                    out.push(Outcome { m, result: self.capture.then(|| rs.normalize()) });
                }
                Err(e) => {
                    if matches!(e, AdapterError::Connection(_)) {
                        warn!("repetition {} client {client}: {e}", self.repetition);
                        self.abort.store(true, Ordering::SeqCst);
                        session = None;
                    }
                    m.error = Some(e.to_string());
                    out.push(Outcome { m, result: None });
                }
            }
        }
        out
    }
}

fn warm_up(adapter: &dyn Adapter, plan: &WorkloadPlan) -> Result<(), AdapterError> {
    let mut session = adapter.session()?;
    for qi in plan.warmup_instances() {
        match session.execute(qi) {
            Err(e @ AdapterError::Connection(_)) => return Err(e),
            Err(e) => debug!("warm-up {}: {e}", qi.key()),
            Ok(_) => {}
        }
    }
    Ok(())
}

/// Runs `cfg.repetitions` measured passes of `plan` against `adapter`.
///
/// A query error yields a failed measurement and the run continues. A lost
/// connection aborts the rest of that repetition: its unissued instances are
/// recorded as failed, and the repetition is listed in `aborted_repetitions`.
/// Only a failure before the very first measurement is returned as an error.
pub fn run_experiment(cfg: &RunConfig, plan: &WorkloadPlan, adapter: &dyn Adapter) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    if plan.clients() != cfg.plan_clients() {
        return Err(HarnessError::Config(format!(
            "plan has {} client lists, {} mode with {} clients needs {}",
            plan.clients(),
            cfg.mode,
            cfg.clients,
            cfg.plan_clients()
        )));
    }
    if cfg.capture_results && !adapter.captures_results() {
        return Err(HarnessError::OpaqueResults(adapter.id().into()));
    }
    // connection check, so a dead SUT fails the run instead of producing rows
    drop(adapter.session()?);

    let sampler = ResourceSampler::start();
    let mut out = RunOutput { plan_digest: plan.digest(), ..Default::default() };
    let mut results = BTreeMap::new();
    for repetition in 0..cfg.repetitions {
        if cfg.warmup {
            if let Err(e) = warm_up(adapter, plan) {
                if out.measurements.is_empty() {
                    sampler.stop();
                    return Err(e.into());
                }
                warn!("repetition {repetition}: warm-up failed: {e}");
            }
        }
        let abort = AtomicBool::new(false);
        let ctx = Ctx { cfg, repetition, capture: cfg.capture_results && repetition == 0, abort: &abort };
        let outcomes: Vec<Outcome> = match cfg.mode {
            Mode::Sequential => ctx.client_loop(adapter, 0, plan.client_instances(0)),
            Mode::Parallel => thread::scope(|s| {
                let workers: Vec<_> = (0..plan.clients())
                    .map(|c| {
                        let ctx = &ctx;
                        s.spawn(move || ctx.client_loop(adapter, c as u32, plan.client_instances(c)))
                    })
                    .collect();
                let mut all: Vec<Outcome> = workers.into_iter().flat_map(|w| w.join().expect("client thread")).collect();
                all.sort_by_key(|o| (o.m.issue_ts, o.m.client));
                all
            }),
        };
        if abort.load(Ordering::SeqCst) {
            out.aborted_repetitions.push(repetition);
        }
        for o in outcomes {
            if let Some(rs) = o.result {
                results.insert(format!("{}#{}", o.m.query, o.m.param_set), rs);
            }
            out.measurements.push(o.m);
        }
    }
    out.resources = sampler.stop();
    if cfg.capture_results {
        out.results = Some(results);
    }
    Ok(out)
}
