//! Discrete-event simulation of the collaborative packing task.
//!
//! A session is a sequence of orders. In each order the human packs items
//! strictly in the order's sequence. Bin items are packed directly; robot
//! items can only be picked up once the robot has brought them to the
//! meeting point, and the robot leaves for its next delivery only after the
//! human has picked up the item it is carrying.
//!
//! Every sampled duration is rounded to whole milliseconds, which is the
//! resolution of the telemetry wire format, so traces survive ingest and
//! export without loss.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::dispatch::DispatchPlan;
use crate::distributions::{seeded_rng, DurationModel, SeededRng};
use crate::error::{Error, Result};
use crate::par::Execution;

pub use crate::dataset::{empirical_summary, Summary};

/// Converts a millisecond count to seconds. Every duration export goes
/// through this one function.
pub fn ms_to_seconds(ms: u64) -> f64 {
    ms as f64 / 1000.0
}

fn seconds_to_ms(s: f64) -> u64 {
    (s * 1000.0).round().max(0.0) as u64
}

/// A duration distribution for simulation input. Constants are allowed
/// here (e.g. for deterministic tests) but are not fittable families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepDuration {
    Constant { constant: f64 },
    Model(DurationModel),
}

impl StepDuration {
    pub fn constant(seconds: f64) -> Self {
        StepDuration::Constant { constant: seconds }
    }

    fn validate(&self, what: &str) -> Result<()> {
        match self {
            StepDuration::Constant { constant } if !(constant.is_finite() && *constant >= 0.0) => Err(
                Error::Config(format!("{what}: constant duration {constant} must be finite and >= 0")),
            ),
            _ => Ok(()),
        }
    }

    /// Draws seconds, floored at zero.
    fn draw(&self, rng: &mut SeededRng) -> f64 {
        match self {
            StepDuration::Constant { constant } => *constant,
            StepDuration::Model(m) => m.draw(rng).max(0.0),
        }
    }
}

impl From<DurationModel> for StepDuration {
    fn from(m: DurationModel) -> Self {
        StepDuration::Model(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemSource {
    Bin,
    Robot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub source: ItemSource,
    /// Robot items only: departure offset from the order start, seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub departure_s: Option<f64>,
    /// Robot items only: travel time to the meeting point, seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub travel_s: Option<f64>,
}

impl Item {
    pub fn bin(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            source: ItemSource::Bin,
            departure_s: None,
            travel_s: None,
        }
    }

    pub fn robot(id: impl Into<String>, departure_s: f64, travel_s: f64) -> Self {
        Self {
            id: id.into(),
            source: ItemSource::Robot,
            departure_s: Some(departure_s),
            travel_s: Some(travel_s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderSpec {
    pub items: Vec<Item>,
}

impl OrderSpec {
    pub fn new(items: Vec<Item>) -> Self {
        Self { items }
    }

    fn validate(&self, k: usize) -> Result<()> {
        if self.items.is_empty() {
            return Err(Error::Config(format!("order {k} has no items")));
        }
        for item in &self.items {
            let ok = |v: Option<f64>| v.is_some_and(|v| v.is_finite() && v >= 0.0);
            match item.source {
                ItemSource::Robot if !(ok(item.departure_s) && ok(item.travel_s)) => {
                    return Err(Error::Config(format!(
                        "order {k} robot item `{}` needs finite, nonnegative departure_s and travel_s",
                        item.id
                    )))
                }
                ItemSource::Bin if item.departure_s.is_some() || item.travel_s.is_some() => {
                    return Err(Error::Config(format!(
                        "order {k} bin item `{}` cannot carry a robot delivery",
                        item.id
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanModel {
    /// Duration of one pack action, before learning scaling.
    pub step: StepDuration,
    /// Delay between the robot's arrival (or the human turning to it) and the pickup.
    pub pickup: StepDuration,
    /// Probability that a pack is preceded by a rejected attempt.
    pub p_err: f64,
    /// Time lost to a rejected attempt.
    pub error_penalty: StepDuration,
    /// Per-order multipliers on step durations. One value applies to every order.
    pub learning: Vec<f64>,
}

impl HumanModel {
    fn validate(&self, orders: usize) -> Result<()> {
        self.step.validate("step")?;
        self.pickup.validate("pickup")?;
        self.error_penalty.validate("error_penalty")?;
        if !(0.0..=1.0).contains(&self.p_err) {
            return Err(Error::Config(format!("p_err {} is not in [0, 1]", self.p_err)));
        }
        if self.learning.len() != 1 && self.learning.len() != orders {
            return Err(Error::Config(format!(
                "{} learning multipliers for {orders} orders (expected 1 or {orders})",
                self.learning.len()
            )));
        }
        if let Some(bad) = self.learning.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::Config(format!("learning multiplier {bad} must be > 0")));
        }
        Ok(())
    }

    fn multiplier(&self, order: usize) -> f64 {
        if self.learning.len() == 1 {
            self.learning[0]
        } else {
            self.learning[order]
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub orders: Vec<OrderSpec>,
    pub human: HumanModel,
    pub n_sessions: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("simulation config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        validate_orders(&self.orders)?;
        self.human.validate(self.orders.len())?;
        if self.n_sessions == 0 {
            return Err(Error::Config("n_sessions must be at least 1".into()));
        }
        Ok(())
    }

    /// Three orders with increasing robot wait; the third waits longest.
    /// The offsets are illustrative, not measured.
    pub fn illustrative() -> Self {
        let ln = |median: f64, sigma: f64| StepDuration::Model(DurationModel::lognormal(median.ln(), sigma).unwrap());
        Self {
            orders: vec![
                OrderSpec::new(vec![Item::bin("shirt"), Item::bin("mug"), Item::robot("book", 0.0, 15.0)]),
                OrderSpec::new(vec![Item::bin("cap"), Item::robot("lamp", 5.0, 20.0), Item::bin("socks")]),
                OrderSpec::new(vec![
                    Item::bin("pen"),
                    Item::bin("tape"),
                    Item::robot("clock", 10.0, 25.0),
                    Item::bin("card"),
                ]),
            ],
            human: HumanModel {
                step: ln(4.0, 0.5),
                pickup: ln(1.5, 0.4),
                p_err: 0.1,
                error_penalty: ln(3.0, 0.5),
                learning: vec![2.0, 1.0, 1.0],
            },
            n_sessions: 100,
            seed: 1,
        }
    }

    /// Points the first robot delivery of each order at the plan's target:
    /// departure at `departure_s`, arrival at `target_s`.
    pub fn apply_dispatch_plan(&mut self, plan: &DispatchPlan) -> Result<()> {
        if plan.orders.len() != self.orders.len() {
            return Err(Error::Config(format!(
                "dispatch plan has {} orders, simulation has {}",
                plan.orders.len(),
                self.orders.len()
            )));
        }
        for (k, (order, d)) in self.orders.iter_mut().zip(&plan.orders).enumerate() {
            let item = order
                .items
                .iter_mut()
                .find(|i| i.source == ItemSource::Robot)
                .ok_or_else(|| Error::Config(format!("order {} has no robot item to dispatch", k + 1)))?;
            item.departure_s = Some(d.departure_s);
            item.travel_s = Some(d.target_s - d.departure_s);
        }
        Ok(())
    }
}

fn validate_orders(orders: &[OrderSpec]) -> Result<()> {
    if orders.is_empty() {
        return Err(Error::Config("a session needs at least one order".into()));
    }
    for (k, o) in orders.iter().enumerate() {
        o.validate(k + 1)?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    OrderStart,
    ItemPacked,
    PackRejected,
    RobotArrived,
    RobotPickedUp,
    OrderSent,
    SessionEnd,
}

impl EventKind {
    pub const ALL: [EventKind; 7] = [
        EventKind::OrderStart,
        EventKind::ItemPacked,
        EventKind::PackRejected,
        EventKind::RobotArrived,
        EventKind::RobotPickedUp,
        EventKind::OrderSent,
        EventKind::SessionEnd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::OrderStart => "OrderStart",
            EventKind::ItemPacked => "ItemPacked",
            EventKind::PackRejected => "PackRejected",
            EventKind::RobotArrived => "RobotArrived",
            EventKind::RobotPickedUp => "RobotPickedUp",
            EventKind::OrderSent => "OrderSent",
            EventKind::SessionEnd => "SessionEnd",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventPayload {
    /// One-based order number.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    /// Milliseconds since session start.
    pub t_ms: u64,
    pub kind: EventKind,
    pub payload: EventPayload,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionTrace {
    pub seed: u64,
    pub events: Vec<Event>,
    pub order_durations_ms: Vec<u64>,
    pub overall_ms: u64,
}

impl SessionTrace {
    pub fn order_durations(&self) -> Vec<f64> {
        self.order_durations_ms.iter().map(|&ms| ms_to_seconds(ms)).collect()
    }

    pub fn overall(&self) -> f64 {
        ms_to_seconds(self.overall_ms)
    }

    /// Checks the trace invariants: nondecreasing times, durations that match
    /// the OrderStart/OrderSent pairs, and the overall span.
    pub fn validate(&self) -> Result<()> {
        if self.events.windows(2).any(|w| w[1].t_ms < w[0].t_ms) {
            return Err(Error::Domain("event times decrease".into()));
        }
        let times = |kind| self.events.iter().filter(move |e| e.kind == kind).map(|e| e.t_ms);
        let starts: Vec<u64> = times(EventKind::OrderStart).collect();
        let sent: Vec<u64> = times(EventKind::OrderSent).collect();
        if starts.len() != sent.len() || starts.len() != self.order_durations_ms.len() {
            return Err(Error::Domain("OrderStart/OrderSent/duration counts differ".into()));
        }
        for (k, (s, e)) in starts.iter().zip(&sent).enumerate() {
            if e - s != self.order_durations_ms[k] {
                return Err(Error::Domain(format!("order {} duration mismatch", k + 1)));
            }
        }
        let end: Vec<u64> = times(EventKind::SessionEnd).collect();
        match (end.as_slice(), starts.first()) {
            ([end], Some(first)) if end - first == self.overall_ms => Ok(()),
            _ => Err(Error::Domain("SessionEnd missing or overall duration mismatch".into())),
        }
    }
}

/// Derives the seed of session `index` from a batch seed (splitmix64 of
/// `seed + (index + 1)·φ`, φ = 0x9E3779B97F4A7C15).
pub fn child_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Action {
    StartOrder(usize),
    BeginItem,
    RobotDepart(usize),
    RobotArrive(usize),
    PickupDone(usize),
    Rejected,
    Packed,
}

/// Random quantities of one item, all drawn when the human turns to it so
/// that the draw sequence never depends on robot timing.
struct PendingItem {
    pickup_ms: u64,
    penalty_ms: Option<u64>,
    step_ms: u64,
}

struct Session<'a> {
    orders: &'a [OrderSpec],
    human: &'a HumanModel,
    rng: SeededRng,
    queue: BinaryHeap<Reverse<(u64, u64, Action)>>,
    seq: u64,
    events: Vec<Event>,
    // robot items in session order: (order, item index)
    robot_items: Vec<(usize, usize)>,
    requested_ms: Vec<Option<u64>>,
    next_delivery: usize,
    robot_free: bool,
    at_meeting_point: Option<usize>,
    // human cursor
    order: usize,
    item: usize,
    order_start_ms: u64,
    waiting_for: Option<usize>,
    pending: Option<PendingItem>,
    durations: Vec<u64>,
    done: bool,
}

impl<'a> Session<'a> {
    fn schedule(&mut self, t: u64, a: Action) {
        self.seq += 1;
        self.queue.push(Reverse((t, self.seq, a)));
    }

    fn log(&mut self, t: u64, kind: EventKind, order: usize, item: Option<String>) {
        self.events.push(Event {
            t_ms: t,
            kind,
            payload: EventPayload {
                order: Some(order + 1),
                item,
            },
        });
    }

    fn item_id(&self, order: usize, item: usize) -> Option<String> {
        Some(self.orders[order].items[item].id.clone())
    }

    fn robot_index(&self, order: usize, item: usize) -> Option<usize> {
        self.robot_items.iter().position(|&p| p == (order, item))
    }

    fn try_dispatch(&mut self, now: u64) {
        if !self.robot_free || self.next_delivery >= self.robot_items.len() {
            return;
        }
        if let Some(req) = self.requested_ms[self.next_delivery] {
            self.robot_free = false;
            let r = self.next_delivery;
            self.next_delivery += 1;
            self.schedule(req.max(now), Action::RobotDepart(r));
        }
    }

    fn draw_ms(&mut self, d: StepDuration, scale: f64) -> u64 {
        seconds_to_ms(d.draw(&mut self.rng) * scale)
    }

    fn start_attempt(&mut self, t: u64) {
        let p = self.pending.as_ref().expect("attempt without a pending item");
        match p.penalty_ms {
            Some(pen) => self.schedule(t + pen, Action::Rejected),
            None => self.schedule(t + p.step_ms, Action::Packed),
        }
    }

    fn run(mut self) -> (Vec<Event>, Vec<u64>) {
        self.schedule(0, Action::StartOrder(0));
        while let Some(Reverse((t, _, action))) = self.queue.pop() {
            self.handle(t, action);
            if self.done {
                break;
            }
        }
        (self.events, self.durations)
    }

    fn handle(&mut self, t: u64, action: Action) {
        match action {
            Action::StartOrder(k) => {
                self.order = k;
                self.item = 0;
                self.order_start_ms = t;
                self.log(t, EventKind::OrderStart, k, None);
                for r in 0..self.robot_items.len() {
                    let (o, i) = self.robot_items[r];
                    if o == k {
                        let dep = self.orders[o].items[i].departure_s.unwrap_or(0.0);
                        self.requested_ms[r] = Some(t + seconds_to_ms(dep));
                    }
                }
                self.try_dispatch(t);
                self.schedule(t, Action::BeginItem);
            }
            Action::BeginItem => {
                let (k, j) = (self.order, self.item);
                let lambda = self.human.multiplier(k);
                let robot = self.robot_index(k, j);
                let pickup_ms = if robot.is_some() { self.draw_ms(self.human.pickup, 1.0) } else { 0 };
                let err = self.human.p_err > 0.0 && self.rng.random::<f64>() < self.human.p_err;
                let penalty_ms = if err {
                    Some(self.draw_ms(self.human.error_penalty, 1.0))
                } else {
                    None
                };
                let step_ms = self.draw_ms(self.human.step, lambda);
                self.pending = Some(PendingItem {
                    pickup_ms,
                    penalty_ms,
                    step_ms,
                });
                match robot {
                    Some(r) if self.at_meeting_point == Some(r) => self.schedule(t + pickup_ms, Action::PickupDone(r)),
                    Some(r) => self.waiting_for = Some(r),
                    None => self.start_attempt(t),
                }
            }
            Action::RobotDepart(r) => {
                let (o, i) = self.robot_items[r];
                let travel = self.orders[o].items[i].travel_s.unwrap_or(0.0);
                self.schedule(t + seconds_to_ms(travel), Action::RobotArrive(r));
            }
            Action::RobotArrive(r) => {
                let (o, i) = self.robot_items[r];
                self.log(t, EventKind::RobotArrived, o, self.item_id(o, i));
                self.at_meeting_point = Some(r);
                if self.waiting_for == Some(r) {
                    self.waiting_for = None;
                    let d = self.pending.as_ref().map_or(0, |p| p.pickup_ms);
                    self.schedule(t + d, Action::PickupDone(r));
                }
            }
            Action::PickupDone(r) => {
                let (o, i) = self.robot_items[r];
                self.log(t, EventKind::RobotPickedUp, o, self.item_id(o, i));
                self.at_meeting_point = None;
                self.robot_free = true;
                self.try_dispatch(t);
                self.start_attempt(t);
            }
            Action::Rejected => {
                let (k, j) = (self.order, self.item);
                self.log(t, EventKind::PackRejected, k, self.item_id(k, j));
                let step = self.pending.as_ref().map_or(0, |p| p.step_ms);
                self.schedule(t + step, Action::Packed);
            }
            Action::Packed => {
                let (k, j) = (self.order, self.item);
                self.log(t, EventKind::ItemPacked, k, self.item_id(k, j));
                self.pending = None;
                if j + 1 < self.orders[k].items.len() {
                    self.item += 1;
                    self.schedule(t, Action::BeginItem);
                    return;
                }
                self.log(t, EventKind::OrderSent, k, None);
                self.durations.push(t - self.order_start_ms);
                if k + 1 < self.orders.len() {
                    self.schedule(t, Action::StartOrder(k + 1));
                } else {
                    self.events.push(Event {
                        t_ms: t,
                        kind: EventKind::SessionEnd,
                        payload: EventPayload { order: None, item: None },
                    });
                    self.done = true;
                }
            }
        }
    }
}

/// Runs one session. Deterministic given `seed`.
pub fn run_session(orders: &[OrderSpec], human: &HumanModel, seed: u64) -> Result<SessionTrace> {
    validate_orders(orders)?;
    human.validate(orders.len())?;
    Ok(simulate(orders, human, seed))
}

fn simulate(orders: &[OrderSpec], human: &HumanModel, seed: u64) -> SessionTrace {
    let robot_items: Vec<(usize, usize)> = orders
        .iter()
        .enumerate()
        .flat_map(|(k, o)| {
            o.items
                .iter()
                .enumerate()
                .filter(|(_, it)| it.source == ItemSource::Robot)
                .map(move |(j, _)| (k, j))
        })
        .collect();
    let session = Session {
        orders,
        human,
        rng: seeded_rng(seed),
        queue: BinaryHeap::new(),
        seq: 0,
        events: Vec::new(),
        requested_ms: vec![None; robot_items.len()],
        robot_items,
        next_delivery: 0,
        robot_free: true,
        at_meeting_point: None,
        order: 0,
        item: 0,
        order_start_ms: 0,
        waiting_for: None,
        pending: None,
        durations: Vec::new(),
        done: false,
    };
    let (events, durations) = session.run();
    let first = events.first().map_or(0, |e| e.t_ms);
    let end = events.last().map_or(0, |e| e.t_ms);
    SessionTrace {
        seed,
        events,
        order_durations_ms: durations,
        overall_ms: end - first,
    }
}

/// Independent sessions from one batch seed.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub seed: u64,
    pub sessions: Vec<SessionTrace>,
}

impl Batch {
    pub fn session_id(&self, index: usize) -> String {
        format!("sim-{}-{index:06}", self.seed)
    }

    pub fn order_count(&self) -> usize {
        self.sessions.first().map_or(0, |s| s.order_durations_ms.len())
    }

    /// Durations of order `k` (zero-based) across sessions.
    pub fn order_dataset(&self, k: usize) -> Dataset {
        let samples = self.sessions.iter().map(|s| ms_to_seconds(s.order_durations_ms[k])).collect();
        Dataset::new(format!("order{}_s", k + 1), samples).expect("durations are finite")
    }

    pub fn overall_dataset(&self) -> Dataset {
        let samples = self.sessions.iter().map(SessionTrace::overall).collect();
        Dataset::new("overall_s", samples).expect("durations are finite")
    }

    /// One dataset per order followed by the overall dataset.
    pub fn datasets(&self) -> Vec<Dataset> {
        let mut out: Vec<Dataset> = (0..self.order_count()).map(|k| self.order_dataset(k)).collect();
        out.push(self.overall_dataset());
        out
    }

    /// `session_id,order1_s,…,orderK_s,overall_s`, matching the telemetry export.
    pub fn write_durations_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["session_id".to_string()];
        header.extend((1..=self.order_count()).map(|k| format!("order{k}_s")));
        header.push("overall_s".into());
        w.write_record(&header)?;
        for (i, s) in self.sessions.iter().enumerate() {
            let mut row = vec![self.session_id(i)];
            row.extend(s.order_durations().iter().map(f64::to_string));
            row.push(s.overall().to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// JSON lines, one event per line, tagged with its session id.
    pub fn write_traces_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            session_id: &'a str,
            #[serde(flatten)]
            event: &'a Event,
        }
        for (i, s) in self.sessions.iter().enumerate() {
            let id = self.session_id(i);
            for e in &s.events {
                serde_json::to_writer(&mut out, &Line { session_id: &id, event: e })?;
                out.write_all(b"\n")?;
            }
        }
        Ok(())
    }
}

pub fn run_batch(orders: &[OrderSpec], human: &HumanModel, n_sessions: usize, seed: u64) -> Result<Batch> {
    run_batch_with(orders, human, n_sessions, seed, Execution::default())
}

/// Runs `n_sessions` sessions with seeds from [`child_seed`]. Output is
/// identical for every execution mode.
pub fn run_batch_with(
    orders: &[OrderSpec],
    human: &HumanModel,
    n_sessions: usize,
    seed: u64,
    exec: Execution,
) -> Result<Batch> {
    validate_orders(orders)?;
    human.validate(orders.len())?;
    if n_sessions == 0 {
        return Err(Error::Config("n_sessions must be at least 1".into()));
    }
    let sessions = exec.map_range(n_sessions, |i| simulate(orders, human, child_seed(seed, i as u64)));
    Ok(Batch { seed, sessions })
}

pub fn run_config(cfg: &SimConfig, exec: Execution) -> Result<Batch> {
    cfg.validate()?;
    run_batch_with(&cfg.orders, &cfg.human, cfg.n_sessions, cfg.seed, exec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_human(step: f64, pickup: f64) -> HumanModel {
        HumanModel {
            step: StepDuration::constant(step),
            pickup: StepDuration::constant(pickup),
            p_err: 0.0,
            error_penalty: StepDuration::constant(0.0),
            learning: vec![1.0],
        }
    }

    #[test]
    fn two_bin_items_take_two_steps() {
        let orders = [OrderSpec::new(vec![Item::bin("a"), Item::bin("b")])];
        let t = run_session(&orders, &constant_human(5.0, 1.0), 0).unwrap();
        assert_eq!(t.order_durations(), vec![10.0]);
        assert_eq!(t.overall(), 10.0);
        t.validate().unwrap();
    }

    #[test]
    fn robot_item_waits_for_arrival() {
        // max(5, 30) + 1 + 5
        let orders = [OrderSpec::new(vec![Item::bin("a"), Item::robot("b", 0.0, 30.0)])];
        let t = run_session(&orders, &constant_human(5.0, 1.0), 0).unwrap();
        assert_eq!(t.order_durations(), vec![36.0]);
        let kinds: Vec<EventKind> = t.events.iter().map(|e| e.kind).collect();
        assert_eq!(
            kinds,
            vec![
                EventKind::OrderStart,
                EventKind::ItemPacked,
                EventKind::RobotArrived,
                EventKind::RobotPickedUp,
                EventKind::ItemPacked,
                EventKind::OrderSent,
                EventKind::SessionEnd
            ]
        );
        t.validate().unwrap();
    }

    #[test]
    fn robot_already_waiting_is_picked_up_immediately() {
        // robot arrives at 2 s; the human reaches it at 5 s
        let orders = [OrderSpec::new(vec![Item::bin("a"), Item::robot("b", 0.0, 2.0)])];
        let t = run_session(&orders, &constant_human(5.0, 1.0), 0).unwrap();
        assert_eq!(t.order_durations(), vec![11.0]);
    }

    #[test]
    fn robot_waits_for_pickup_before_next_delivery() {
        // second delivery is due at 1 s but cannot leave before the first pickup at 11 s
        let orders = [OrderSpec::new(vec![
            Item::robot("a", 0.0, 10.0),
            Item::robot("b", 1.0, 10.0),
        ])];
        let t = run_session(&orders, &constant_human(2.0, 1.0), 0).unwrap();
        let arrivals: Vec<u64> = t
            .events
            .iter()
            .filter(|e| e.kind == EventKind::RobotArrived)
            .map(|e| e.t_ms)
            .collect();
        assert_eq!(arrivals, vec![10_000, 21_000]);
        // 21 + 1 + 2
        assert_eq!(t.order_durations(), vec![24.0]);
    }

    #[test]
    fn orders_run_back_to_back() {
        let orders = [
            OrderSpec::new(vec![Item::bin("a")]),
            OrderSpec::new(vec![Item::bin("b"), Item::robot("c", 3.0, 4.0)]),
        ];
        let mut h = constant_human(2.0, 0.5);
        h.learning = vec![2.0, 1.0];
        let t = run_session(&orders, &h, 0).unwrap();
        // order 1: 4 s; order 2: robot at 7 s, pickup 0.5, pack 2
        assert_eq!(t.order_durations(), vec![4.0, 9.5]);
        assert_eq!(t.overall(), 13.5);
        t.validate().unwrap();
    }

    #[test]
    fn errors_add_penalty_and_log_rejection() {
        let orders = [OrderSpec::new(vec![Item::bin("a")])];
        let mut h = constant_human(5.0, 0.0);
        h.p_err = 1.0;
        h.error_penalty = StepDuration::constant(3.0);
        let t = run_session(&orders, &h, 0).unwrap();
        assert_eq!(t.order_durations(), vec![8.0]);
        assert!(t.events.iter().any(|e| e.kind == EventKind::PackRejected && e.t_ms == 3000));
    }

    #[test]
    fn malformed_orders_rejected() {
        let h = constant_human(1.0, 1.0);
        assert!(matches!(run_session(&[], &h, 0), Err(Error::Config(_))));
        assert!(run_session(&[OrderSpec::new(vec![])], &h, 0).is_err());
        let mut robot_without_schedule = Item::robot("r", 0.0, 1.0);
        robot_without_schedule.travel_s = None;
        assert!(run_session(&[OrderSpec::new(vec![robot_without_schedule])], &h, 0).is_err());
        let mut bin_with_schedule = Item::bin("b");
        bin_with_schedule.departure_s = Some(1.0);
        assert!(run_session(&[OrderSpec::new(vec![bin_with_schedule])], &h, 0).is_err());
        let mut bad = h.clone();
        bad.p_err = 1.5;
        assert!(run_session(&[OrderSpec::new(vec![Item::bin("b")])], &bad, 0).is_err());
        let mut bad = h.clone();
        bad.learning = vec![1.0, 0.0];
        let two = [OrderSpec::new(vec![Item::bin("a")]), OrderSpec::new(vec![Item::bin("b")])];
        assert!(run_session(&two, &bad, 0).is_err());
    }

    #[test]
    fn same_seed_same_trace() {
        let cfg = SimConfig::illustrative();
        let a = run_session(&cfg.orders, &cfg.human, 42).unwrap();
        let b = run_session(&cfg.orders, &cfg.human, 42).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
        assert_ne!(a, run_session(&cfg.orders, &cfg.human, 43).unwrap());
    }

    #[test]
    fn batch_modes_agree() {
        let cfg = SimConfig::illustrative();
        let p = run_batch_with(&cfg.orders, &cfg.human, 64, 9, Execution::Parallel).unwrap();
        let s = run_batch_with(&cfg.orders, &cfg.human, 64, 9, Execution::Sequential).unwrap();
        assert_eq!(p, s);
        assert_eq!(p.datasets().len(), 4);
    }

    #[test]
    fn overall_is_sum_of_orders() {
        let cfg = SimConfig::illustrative();
        let b = run_batch(&cfg.orders, &cfg.human, 200, 5).unwrap();
        for s in &b.sessions {
            assert_eq!(s.order_durations_ms.iter().sum::<u64>(), s.overall_ms);
        }
    }

    #[test]
    fn child_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..10_000).map(|i| child_seed(7, i)).collect();
        assert_eq!(seeds.len(), 10_000);
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = SimConfig::illustrative();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(SimConfig::from_json(&text).unwrap(), cfg);
        let text = r#"{"orders":[{"items":[{"id":"a","source":"bin"}]}],
            "human":{"step":{"constant":2.5},"pickup":{"family":"lognormal","mu":0.4,"sigma":0.3},
                     "p_err":0,"error_penalty":{"constant":0},"learning":[1]},
            "n_sessions":3,"seed":1}"#;
        let cfg = SimConfig::from_json(text).unwrap();
        assert_eq!(cfg.human.step, StepDuration::constant(2.5));
        assert!(SimConfig::from_json(&text.replace("\"n_sessions\":3", "\"n_sessions\":0")).is_err());
    }

    #[test]
    fn csv_and_traces_layout() {
        let cfg = SimConfig::illustrative();
        let b = run_batch(&cfg.orders, &cfg.human, 3, 2).unwrap();
        let mut buf = Vec::new();
        b.write_durations_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("session_id,order1_s,order2_s,order3_s,overall_s\nsim-2-000000,"));
        let mut buf = Vec::new();
        b.write_traces_jsonl(&mut buf).unwrap();
        let first: serde_json::Value = serde_json::from_str(String::from_utf8(buf).unwrap().lines().next().unwrap()).unwrap();
        assert_eq!(first["kind"], "OrderStart");
        assert_eq!(first["t_ms"], 0);
        assert_eq!(first["session_id"], "sim-2-000000");
        assert_eq!(first["payload"]["order"], 1);
    }

    #[test]
    fn dispatch_plan_sets_robot_arrival() {
        use crate::dispatch::{schedule_session, CostSpec};
        let mut cfg = SimConfig::illustrative();
        let models = vec![DurationModel::lognormal(2.0, 0.3).unwrap(); 3];
        let plan = schedule_session(&models, &CostSpec::new(1.0, 1.0).unwrap(), &[3.0]).unwrap();
        cfg.apply_dispatch_plan(&plan).unwrap();
        let it = cfg.orders[1].items.iter().find(|i| i.source == ItemSource::Robot).unwrap();
        assert!((it.departure_s.unwrap() + it.travel_s.unwrap() - 2.0f64.exp()).abs() < 1e-12);
        assert!(cfg.apply_dispatch_plan(&schedule_session(&models[..1], &CostSpec::new(1.0, 1.0).unwrap(), &[3.0]).unwrap()).is_err());
    }
}
