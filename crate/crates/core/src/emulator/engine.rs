use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashMap, VecDeque};

use sha2::{Digest, Sha256};

use super::link::{Link, Transit};
use crate::bench::behavior::{Behavior, BehaviorRegistry, BuildError, Completion};
use crate::mapping::Mapping;
use crate::monitor::{Metric, MetricSample, MonitorState};
use crate::rational::{ceil_nanos, Rational};
use crate::rng::SplitMix64;
use crate::spec::{ExperimentSpec, NetworkRule};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimClock {
    pub now_ns: u64,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hop {
    pub instance: String,
    pub enter_ns: u64,
    pub exit_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub id: u64,
    pub src_instance: Option<String>,
    pub dst_instance: String,
    pub size_bits: u64,
    pub created_at_ns: u64,
    pub trace: Vec<Hop>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    MessageArrival,
    ProcessingDone,
    InjectionTick,
    MonitorTick,
    PhaseBoundary,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::MessageArrival => "message_arrival",
            EventKind::ProcessingDone => "processing_done",
            EventKind::InjectionTick => "injection_tick",
            EventKind::MonitorTick => "monitor_tick",
            EventKind::PhaseBoundary => "phase_boundary",
        }
    }
}

#[derive(Debug)]
enum Event {
    MessageArrival { instance: usize, msg: Message },
    ProcessingDone { instance: usize },
    InjectionTick { injector: usize },
    MonitorTick,
    PhaseBoundary,
}

impl Event {
    fn kind(&self) -> EventKind {
        match self {
            Event::MessageArrival { .. } => EventKind::MessageArrival,
            Event::ProcessingDone { .. } => EventKind::ProcessingDone,
            Event::InjectionTick { .. } => EventKind::InjectionTick,
            Event::MonitorTick => EventKind::MonitorTick,
            Event::PhaseBoundary => EventKind::PhaseBoundary,
        }
    }
}

#[derive(Debug)]
struct Scheduled {
    fire_at_ns: u64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.fire_at_ns, self.seq).cmp(&(other.fire_at_ns, other.seq))
    }
}

#[derive(Debug)]
struct InService {
    msg: Message,
    enter_ns: u64,
    start_ns: u64,
    service_ns: u64,
}

/// A service instance: a single-server FIFO queue in front of a behavior.
#[derive(Debug)]
pub struct InstanceRuntime {
    pub instance_id: String,
    pub service_id: String,
    pub layer: String,
    pub cpu_capacity: Rational,
    behavior: Box<dyn Behavior>,
    rng: SplitMix64,
    queue: VecDeque<(Message, u64)>,
    in_service: Option<InService>,
    busy_ns: u64,
    processed_count: u64,
    forward_cursor: usize,
}

impl InstanceRuntime {
    pub fn behavior(&self) -> &dyn Behavior {
        self.behavior.as_ref()
    }

    /// Accumulated service time of completed messages.
    pub fn busy_ns(&self) -> u64 {
        self.busy_ns
    }

    /// Busy time up to `now`, counting the elapsed part of the message in service.
    pub fn busy_ns_at(&self, now_ns: u64) -> u64 {
        let partial = self
            .in_service
            .as_ref()
            .map_or(0, |s| now_ns.min(s.start_ns + s.service_ns).saturating_sub(s.start_ns));
        self.busy_ns + partial
    }

    pub fn processed_count(&self) -> u64 {
        self.processed_count
    }

    pub fn is_busy(&self) -> bool {
        self.in_service.is_some()
    }

    /// Messages waiting plus the one in service.
    pub fn queue_length(&self) -> usize {
        self.queue.len() + usize::from(self.in_service.is_some())
    }

    pub fn service_ns(&self, size_bits: u64) -> u64 {
        ceil_nanos(&self.behavior.work_units(size_bits), &self.cpu_capacity)
    }
}

#[derive(Debug, Clone)]
struct Injector {
    instance: usize,
    remaining: u64,
    next_k: u64,
    start_ns: u64,
    period_ns: u64,
    size_bits: u64,
    jitter_ns: u64,
    rng: SplitMix64,
}

/// Message accounting; `sent == delivered + dropped + in_flight` at all times.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub injected: u64,
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_flight: u64,
    pub completed_records: u64,
}

#[derive(Debug, Default)]
struct EventLog {
    hasher: Sha256,
    header: String,
    dump: Option<Vec<u8>>,
    events: u64,
}

impl EventLog {
    /// The log opens with `#\tseed\trepetition` so that every stream key
    /// shows up in the digest, even for runs that never draw.
    fn new(master_seed: u64, repetition: u64) -> Self {
        let mut log = Self {
            header: format!("#\t{master_seed}\t{repetition}\n"),
            ..Self::default()
        };
        log.hasher.update(log.header.as_bytes());
        log
    }

    fn record(&mut self, fire_at_ns: u64, kind: EventKind, instance: Option<&str>, msg: Option<u64>) {
        let msg = msg.map_or_else(|| "-".to_string(), |m| m.to_string());
        let line = format!("{fire_at_ns}\t{}\t{}\t{msg}\n", kind.as_str(), instance.unwrap_or("-"));
        self.hasher.update(line.as_bytes());
        if let Some(dump) = &mut self.dump {
            dump.extend_from_slice(line.as_bytes());
        }
        self.events += 1;
    }

    fn digest(&self) -> String {
        hex::encode(self.hasher.clone().finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProvisionError {
    #[error("UnknownBehavior({0})")]
    UnknownBehavior(String),
    #[error("service `{service}`: {message}")]
    InvalidParams { service: String, message: String },
    #[error("mapping references undeclared service `{0}`")]
    UnknownService(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EmulatorError {
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("unknown service `{0}`")]
    UnknownService(String),
    #[error("service `{0}` is not a producer; period and size are required")]
    NotAProducer(String),
    #[error("period must be positive")]
    ZeroPeriod,
}

/// Parameters of one injection phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Injection {
    pub phase: String,
    pub target: String,
    pub count: u64,
    pub period_ns: Option<u64>,
    pub size_bits: Option<u64>,
    pub jitter_ns: u64,
}

/// A provisioned experiment repetition: instances, links, a clock and an
/// event queue. Single-threaded; independent deployments share nothing.
#[derive(Debug)]
pub struct Deployment {
    clock: SimClock,
    events: BinaryHeap<Reverse<Scheduled>>,
    runtimes: Vec<InstanceRuntime>,
    by_instance: HashMap<String, usize>,
    by_service: HashMap<String, Vec<usize>>,
    links: BTreeMap<(String, String), Link>,
    log: EventLog,
    counters: Counters,
    monitor: Option<MonitorState>,
    samples: Vec<MetricSample>,
    injectors: Vec<Injector>,
    pending_work: usize,
    next_msg_id: u64,
    master_seed: u64,
    repetition: u64,
}

pub fn provision(spec: &ExperimentSpec, mapping: &Mapping, repetition: u64) -> Result<Deployment, ProvisionError> {
    provision_with(spec, mapping, repetition, &BehaviorRegistry::builtin())
}

pub fn provision_with(
    spec: &ExperimentSpec,
    mapping: &Mapping,
    repetition: u64,
    registry: &BehaviorRegistry,
) -> Result<Deployment, ProvisionError> {
    let master_seed = spec.master_seed;
    let mut runtimes = Vec::with_capacity(mapping.assignments.len());
    let mut by_instance = HashMap::new();
    let mut by_service: HashMap<String, Vec<usize>> = HashMap::new();
    for a in &mapping.assignments {
        let svc = spec
            .service(&a.service_id)
            .ok_or_else(|| ProvisionError::UnknownService(a.service_id.clone()))?;
        let behavior = registry.build(&svc.kind, &svc.params).map_err(|e| match e {
            BuildError::UnknownKind(k) => ProvisionError::UnknownBehavior(k),
            BuildError::Param(p) => ProvisionError::InvalidParams {
                service: svc.id.clone(),
                message: p.to_string(),
            },
        })?;
        let cpu_capacity = match a.host_cpu_capacity {
            Some(host) => host.min(svc.cpu_capacity),
            None => svc.cpu_capacity,
        };
        let idx = runtimes.len();
        by_instance.insert(a.instance_id.clone(), idx);
        by_service.entry(a.service_id.clone()).or_default().push(idx);
        runtimes.push(InstanceRuntime {
            instance_id: a.instance_id.clone(),
            service_id: a.service_id.clone(),
            layer: a.layer.clone(),
            cpu_capacity,
            behavior,
            rng: SplitMix64::for_role(master_seed, "behavior", &[&a.instance_id], repetition),
            queue: VecDeque::new(),
            in_service: None,
            busy_ns: 0,
            processed_count: 0,
            forward_cursor: 0,
        });
    }
    let mut links = BTreeMap::new();
    for rule in &spec.network_rules {
        for (src, dst) in rule.directed_pairs() {
            let directed = NetworkRule {
                src_layer: src.clone(),
                dst_layer: dst.clone(),
                ..rule.clone()
            };
            links
                .entry((src.clone(), dst.clone()))
                .or_insert_with(|| Link::new(&src, &dst, directed, master_seed, repetition));
        }
    }
    Ok(Deployment {
        clock: SimClock::default(),
        events: BinaryHeap::new(),
        runtimes,
        by_instance,
        by_service,
        links,
        log: EventLog::new(master_seed, repetition),
        counters: Counters::default(),
        monitor: None,
        samples: Vec::new(),
        injectors: Vec::new(),
        pending_work: 0,
        next_msg_id: 0,
        master_seed,
        repetition,
    })
}

impl Deployment {
    pub fn clock(&self) -> SimClock {
        self.clock
    }

    pub fn now_ns(&self) -> u64 {
        self.clock.now_ns
    }

    pub fn runtimes(&self) -> &[InstanceRuntime] {
        &self.runtimes
    }

    pub fn runtime(&self, instance_id: &str) -> Option<&InstanceRuntime> {
        self.by_instance.get(instance_id).map(|i| &self.runtimes[*i])
    }

    pub fn links(&self) -> &BTreeMap<(String, String), Link> {
        &self.links
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn samples(&self) -> &[MetricSample] {
        &self.samples
    }

    pub fn take_samples(&mut self) -> Vec<MetricSample> {
        std::mem::take(&mut self.samples)
    }

    /// Events still queued, including monitor ticks.
    pub fn pending_events(&self) -> usize {
        self.events.len()
    }

    /// Events other than monitor ticks still queued.
    pub fn pending_work(&self) -> usize {
        self.pending_work
    }

    pub fn events_processed(&self) -> u64 {
        self.log.events
    }

    /// Running SHA-256 over the event log.
    pub fn trace_digest(&self) -> String {
        self.log.digest()
    }

    /// Starts keeping the raw event log. Call before advancing the clock;
    /// the dump then hashes to [`Deployment::trace_digest`].
    pub fn enable_trace_dump(&mut self) {
        let header = self.log.header.as_bytes().to_vec();
        self.log.dump.get_or_insert(header);
    }

    pub fn trace_dump(&self) -> Option<&[u8]> {
        self.log.dump.as_deref()
    }

    pub(crate) fn enable_monitor(&mut self, interval_ns: u64) {
        assert!(interval_ns > 0, "sample interval must be positive");
        let last_busy = self.runtimes.iter().map(|r| r.busy_ns_at(self.clock.now_ns)).collect();
        self.monitor = Some(MonitorState { interval_ns, last_busy });
        self.schedule(self.clock.now_ns + interval_ns, Event::MonitorTick);
    }

    fn schedule(&mut self, fire_at_ns: u64, event: Event) {
        debug_assert!(fire_at_ns >= self.clock.now_ns);
        if !matches!(event, Event::MonitorTick) {
            self.pending_work += 1;
        }
        self.clock.seq += 1;
        self.events.push(Reverse(Scheduled {
            fire_at_ns,
            seq: self.clock.seq,
            event,
        }));
    }

    fn pop(&mut self) -> Option<Scheduled> {
        let Reverse(next) = self.events.pop()?;
        if !matches!(next.event, Event::MonitorTick) {
            self.pending_work -= 1;
        }
        Some(next)
    }

    fn peek_time(&self) -> Option<u64> {
        self.events.peek().map(|Reverse(s)| s.fire_at_ns)
    }

    /// Processes every event due at or before `until_ns`, then sets the clock
    /// to `until_ns`. Returns the running trace digest.
    pub fn advance(&mut self, until_ns: u64) -> String {
        while self.peek_time().is_some_and(|t| t <= until_ns) {
            let next = self.pop().expect("peeked");
            self.dispatch(next);
        }
        self.clock.now_ns = self.clock.now_ns.max(until_ns);
        self.trace_digest()
    }

    /// Processes events until no work (anything but monitor ticks) remains or
    /// the next event lies beyond `limit_ns`. The clock stops at the last
    /// processed event, or at `limit_ns` when the limit cut the run short.
    pub fn drain(&mut self, limit_ns: Option<u64>) -> String {
        while self.pending_work > 0 {
            let Some(t) = self.peek_time() else { break };
            if limit_ns.is_some_and(|limit| t > limit) {
                self.clock.now_ns = self.clock.now_ns.max(limit_ns.unwrap_or(0));
                break;
            }
            let next = self.pop().expect("peeked");
            self.dispatch(next);
        }
        self.trace_digest()
    }

    /// Records a phase boundary at the current time.
    pub fn mark_phase(&mut self) {
        self.schedule(self.clock.now_ns, Event::PhaseBoundary);
        self.advance(self.clock.now_ns);
    }

    fn dispatch(&mut self, scheduled: Scheduled) {
        let Scheduled { fire_at_ns, event, .. } = scheduled;
        debug_assert!(fire_at_ns >= self.clock.now_ns);
        self.clock.now_ns = fire_at_ns;
        let kind = event.kind();
        let (instance, msg_id) = match event {
            Event::MessageArrival { instance, msg } => {
                self.counters.delivered += 1;
                self.counters.in_flight -= 1;
                let id = msg.id;
                self.arrive(instance, msg);
                (Some(instance), Some(id))
            }
            Event::ProcessingDone { instance } => {
                let id = self.complete(instance);
                (Some(instance), Some(id))
            }
            Event::InjectionTick { injector } => {
                let (instance, id) = self.inject_tick(injector);
                (Some(instance), Some(id))
            }
            Event::MonitorTick => {
                self.monitor_tick();
                (None, None)
            }
            Event::PhaseBoundary => (None, None),
        };
        let name = instance.map(|i| self.runtimes[i].instance_id.as_str());
        self.log.record(fire_at_ns, kind, name, msg_id);
    }

    fn new_message_id(&mut self) -> u64 {
        let id = self.next_msg_id;
        self.next_msg_id += 1;
        id
    }

    fn arrive(&mut self, idx: usize, msg: Message) {
        let now = self.clock.now_ns;
        self.runtimes[idx].queue.push_back((msg, now));
        if !self.runtimes[idx].is_busy() {
            self.start_next(idx);
        }
    }

    fn start_next(&mut self, idx: usize) {
        let now = self.clock.now_ns;
        let rt = &mut self.runtimes[idx];
        let Some((msg, enter_ns)) = rt.queue.pop_front() else {
            return;
        };
        let service_ns = rt.service_ns(msg.size_bits);
        rt.in_service = Some(InService {
            msg,
            enter_ns,
            start_ns: now,
            service_ns,
        });
        self.schedule(now + service_ns, Event::ProcessingDone { instance: idx });
    }

    fn complete(&mut self, idx: usize) -> u64 {
        let now = self.clock.now_ns;
        let rt = &mut self.runtimes[idx];
        let done = rt.in_service.take().expect("completion without a message in service");
        rt.busy_ns += done.service_ns;
        rt.processed_count += 1;
        let mut msg = done.msg;
        msg.trace.push(Hop {
            instance: rt.instance_id.clone(),
            enter_ns: done.enter_ns,
            exit_ns: now,
        });
        let outcome = rt.behavior.complete(msg.size_bits, &mut rt.rng);
        let id = msg.id;
        match outcome {
            Completion::Sink => {
                self.counters.completed_records += 1;
                let latency = now - msg.created_at_ns;
                self.samples.push(MetricSample {
                    t_ns: now,
                    source: rt.instance_id.clone(),
                    metric: Metric::E2eLatencyNs,
                    value: Rational::from_integer(i128::from(latency)),
                });
            }
            Completion::Forward(sizes) => {
                let target = rt.behavior.target().map(str::to_string);
                if let Some(targets) = target.and_then(|t| self.by_service.get(&t)).cloned() {
                    for size_bits in sizes {
                        let rt = &mut self.runtimes[idx];
                        let dst = targets[rt.forward_cursor % targets.len()];
                        rt.forward_cursor += 1;
                        self.send(idx, dst, size_bits, msg.created_at_ns, msg.trace.clone());
                    }
                }
            }
        }
        self.start_next(idx);
        id
    }

    fn send(&mut self, src: usize, dst: usize, size_bits: u64, created_at_ns: u64, trace: Vec<Hop>) -> Transit {
        let now = self.clock.now_ns;
        let id = self.new_message_id();
        self.counters.sent += 1;
        let key = (self.runtimes[src].layer.clone(), self.runtimes[dst].layer.clone());
        let transit = match self.links.get_mut(&key) {
            Some(link) => link.transit(size_bits, now),
            None => Transit::Delivered(now),
        };
        match transit {
            Transit::Dropped => self.counters.dropped += 1,
            Transit::Delivered(at) => {
                self.counters.in_flight += 1;
                let msg = Message {
                    id,
                    src_instance: Some(self.runtimes[src].instance_id.clone()),
                    dst_instance: self.runtimes[dst].instance_id.clone(),
                    size_bits,
                    created_at_ns,
                    trace,
                };
                self.schedule(at, Event::MessageArrival { instance: dst, msg });
            }
        }
        transit
    }

    /// Sends a fresh message between two instances at the current time, as
    /// if `src` had just emitted it.
    pub fn send_raw(&mut self, src: &str, dst: &str, size_bits: u64) -> Result<Transit, EmulatorError> {
        let s = *self
            .by_instance
            .get(src)
            .ok_or_else(|| EmulatorError::UnknownInstance(src.to_string()))?;
        let d = *self
            .by_instance
            .get(dst)
            .ok_or_else(|| EmulatorError::UnknownInstance(dst.to_string()))?;
        let now = self.clock.now_ns;
        Ok(self.send(s, d, size_bits, now, Vec::new()))
    }

    /// Schedules `count` records for every instance of the target service,
    /// the first at the current time and then one per period.
    pub fn inject(&mut self, injection: &Injection) -> Result<(), EmulatorError> {
        let instances = self
            .by_service
            .get(&injection.target)
            .cloned()
            .ok_or_else(|| EmulatorError::UnknownService(injection.target.clone()))?;
        for idx in instances {
            let emission = self.runtimes[idx].behavior.emission();
            let period_ns = injection
                .period_ns
                .or(emission.map(|e| e.period_ns))
                .ok_or_else(|| EmulatorError::NotAProducer(injection.target.clone()))?;
            let size_bits = injection
                .size_bits
                .or(emission.map(|e| e.record_bits))
                .ok_or_else(|| EmulatorError::NotAProducer(injection.target.clone()))?;
            if period_ns == 0 {
                return Err(EmulatorError::ZeroPeriod);
            }
            if injection.count == 0 {
                continue;
            }
            let rng = SplitMix64::for_role(
                self.master_seed,
                "injector",
                &[&injection.phase, &self.runtimes[idx].instance_id],
                self.repetition,
            );
            self.injectors.push(Injector {
                instance: idx,
                remaining: injection.count,
                next_k: 0,
                start_ns: self.clock.now_ns,
                period_ns,
                size_bits,
                jitter_ns: injection.jitter_ns,
                rng,
            });
            let injector = self.injectors.len() - 1;
            self.schedule_tick(injector);
        }
        Ok(())
    }

    fn schedule_tick(&mut self, injector: usize) {
        let inj = &mut self.injectors[injector];
        let jitter = if inj.jitter_ns > 0 {
            inj.rng.up_to(inj.jitter_ns)
        } else {
            0
        };
        let at = (inj.start_ns + inj.next_k * inj.period_ns + jitter).max(self.clock.now_ns);
        self.schedule(at, Event::InjectionTick { injector });
    }

    fn inject_tick(&mut self, injector: usize) -> (usize, u64) {
        let now = self.clock.now_ns;
        let id = self.new_message_id();
        let inj = &mut self.injectors[injector];
        inj.remaining -= 1;
        inj.next_k += 1;
        let (idx, size_bits, more) = (inj.instance, inj.size_bits, inj.remaining > 0);
        self.counters.injected += 1;
        let msg = Message {
            id,
            src_instance: None,
            dst_instance: self.runtimes[idx].instance_id.clone(),
            size_bits,
            created_at_ns: now,
            trace: Vec::new(),
        };
        self.arrive(idx, msg);
        if more {
            self.schedule_tick(injector);
        }
        (idx, id)
    }

    fn monitor_tick(&mut self) {
        let now = self.clock.now_ns;
        let Some(monitor) = self.monitor.as_mut() else { return };
        let interval = monitor.interval_ns;
        let samples = monitor.tick(now, &self.runtimes);
        self.samples.extend(samples);
        self.schedule(now + interval, Event::MonitorTick);
    }

    /// Emits end-of-run metrics: `throughput_rps` over the elapsed horizon
    /// (when positive) and the global `messages_dropped` count.
    pub fn finish(&mut self) {
        let now = self.clock.now_ns;
        if now > 0 {
            let rps = Rational::new(
                i128::from(self.counters.completed_records) * i128::from(crate::rational::NANOS_PER_SEC),
                i128::from(now),
            );
            self.samples.push(MetricSample {
                t_ns: now,
                source: "global".into(),
                metric: Metric::ThroughputRps,
                value: rps,
            });
        }
        self.samples.push(MetricSample {
            t_ns: now,
            source: "global".into(),
            metric: Metric::MessagesDropped,
            value: Rational::from_integer(i128::from(self.counters.dropped)),
        });
    }
}
