use serde_json::{json, Value};

use super::position::Position;
use crate::instance::ClairvoyanceMode;
use crate::metric_hst::EdgeId;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseRecord<T> {
    pub time: T,
    pub server: Option<usize>,
    pub major: Option<EdgeId>,
    pub key_edges: Vec<EdgeId>,
    /// Edges moved along, fully or partly, with repetition.
    pub edges: Vec<EdgeId>,
    pub served: Vec<usize>,
    /// Movement cost of the phase in the instance's units.
    pub cost: T,
}

/// Costs of one run, in the instance's original units.
#[derive(Clone, Debug, PartialEq)]
pub struct CostReport<T> {
    pub algorithm: String,
    pub mode: ClairvoyanceMode,
    pub service_cost: T,
    pub delay_penalty: T,
    pub deadline_misses: usize,
    pub served: usize,
    pub unserved: Vec<usize>,
    pub phases: Vec<PhaseRecord<T>>,
    /// Movement between the metric points the servers physically occupy, for
    /// instances embedded from a metric.
    pub physical_service_cost: Option<T>,
    pub violations: Vec<String>,
    pub notes: Vec<String>,
    pub end_time: T,
    pub scale: T,
}

fn q<T: Scalar>(v: &T) -> Value {
    Value::String(v.to_decimal_string())
}

pub(crate) fn mode_name(mode: ClairvoyanceMode) -> &'static str {
    match mode {
        ClairvoyanceMode::Clairvoyant => "clairvoyant",
        ClairvoyanceMode::Nonclairvoyant => "nonclairvoyant",
    }
}

impl<T: Scalar> CostReport<T> {
    pub fn total(&self) -> T {
        self.service_cost.clone() + self.delay_penalty.clone()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "algorithm": self.algorithm,
            "mode": mode_name(self.mode),
            "service_cost": q(&self.service_cost),
            "delay_penalty": q(&self.delay_penalty),
            "total": q(&self.total()),
            "deadline_misses": self.deadline_misses,
            "served": self.served,
            "unserved": self.unserved,
            "physical_service_cost": self.physical_service_cost.as_ref().map(q),
            "end_time": q(&self.end_time),
            "scale": q(&self.scale),
            "phases": self.phases.iter().map(|p| json!({
                "time": q(&p.time),
                "server": p.server,
                "major": p.major,
                "key_edges": p.key_edges,
                "edges": p.edges,
                "served": p.served,
                "cost": q(&p.cost),
            })).collect::<Vec<_>>(),
            "checks": {
                "violations": self.violations,
                "notes": self.notes,
            },
        })
    }

    pub fn csv_header() -> &'static str {
        "algorithm,mode,service_cost,delay_penalty,total,phases,served,unserved,deadline_misses,violations"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.algorithm,
            mode_name(self.mode),
            self.service_cost.to_decimal_string(),
            self.delay_penalty.to_decimal_string(),
            self.total().to_decimal_string(),
            self.phases.len(),
            self.served,
            self.unserved.len(),
            self.deadline_misses,
            self.violations.len()
        )
    }

    pub fn to_table(&self) -> String {
        let mut rows = vec![
            ("algorithm", self.algorithm.clone()),
            ("mode", mode_name(self.mode).to_string()),
            ("service cost", self.service_cost.to_decimal_string()),
            ("delay penalty", self.delay_penalty.to_decimal_string()),
            ("total", self.total().to_decimal_string()),
            ("phases", self.phases.len().to_string()),
            ("served", self.served.to_string()),
            ("unserved", self.unserved.len().to_string()),
            ("deadline misses", self.deadline_misses.to_string()),
            ("end time", self.end_time.to_decimal_string()),
        ];
        if let Some(p) = &self.physical_service_cost {
            rows.push(("physical service", p.to_decimal_string()));
        }
        rows.push(("violations", self.violations.len().to_string()));
        rows.push(("notes", self.notes.len().to_string()));
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            out.push_str(&format!("{k:<width$}  {v}\n"));
        }
        for v in &self.violations {
            out.push_str(&format!("violation: {v}\n"));
        }
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TraceEvent<T> {
    Arrival { time: T, request: usize },
    Phase { time: T, index: usize, server: Option<usize>, major: Option<EdgeId> },
    Move { time: T, server: usize, from: Position<T>, to: Position<T>, distance: T },
    Serve { time: T, request: usize, delay: T, penalty: T },
    Reset { time: T, edge: EdgeId },
}

impl<T: Scalar> TraceEvent<T> {
    pub fn time(&self) -> &T {
        match self {
            TraceEvent::Arrival { time, .. }
            | TraceEvent::Phase { time, .. }
            | TraceEvent::Move { time, .. }
            | TraceEvent::Serve { time, .. }
            | TraceEvent::Reset { time, .. } => time,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            TraceEvent::Arrival { time, request } => json!({"event": "arrival", "time": q(time), "request": request}),
            TraceEvent::Phase { time, index, server, major } => {
                json!({"event": "phase", "time": q(time), "index": index, "server": server, "major": major})
            }
            TraceEvent::Move { time, server, from, to, distance } => json!({
                "event": "move", "time": q(time), "server": server,
                "from": from.describe(), "to": to.describe(), "distance": q(distance),
            }),
            TraceEvent::Serve { time, request, delay, penalty } => json!({
                "event": "serve", "time": q(time), "request": request, "delay": q(delay), "penalty": q(penalty),
            }),
            TraceEvent::Reset { time, edge } => json!({"event": "reset", "time": q(time), "edge": edge}),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace<T> {
    pub events: Vec<TraceEvent<T>>,
}

impl<T: Scalar> Trace<T> {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_json().to_string());
            out.push('\n');
        }
        out
    }
}
