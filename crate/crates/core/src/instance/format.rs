//! JSON instance files.
//!
//! ```json
//! {"space": {"hst": {"nodes": [0, 1, 2],
//!                    "edges": [{"child": 1, "parent": 0, "len_exp": 1},
//!                              {"child": 2, "parent": 0, "len_exp": 1}],
//!                    "leaves": {}}},
//!  "k": 1, "start": [1],
//!  "requests": [{"id": 0, "leaf": 2, "arrival": "0",
//!                "segments": [["0", "1"]], "deadline": "5"}]}
//! ```
//!
//! Metric spaces are `{"metric": {"points": [...], "dist": [[...]]}}` and refer
//! to locations by point name; page sets are `{"pages": n}`. Quantities are
//! strings (`"3"`, `"0.25"`, `"1/3"`) so that values round-trip exactly.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use super::model::{Instance, Request, Space};
use super::penalty::PenaltyFn;
use crate::error::{OsdError, Result};
use crate::metric_hst::{Hst, Metric};
use crate::scalar::Scalar;

fn schema(msg: impl Into<String>) -> OsdError {
    OsdError::Schema(msg.into())
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, ctx: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| schema(format!("{ctx}: missing field `{key}`")))
}

fn object<'a>(v: &'a Value, ctx: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| schema(format!("{ctx}: expected an object")))
}

fn array<'a>(v: &'a Value, ctx: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| schema(format!("{ctx}: expected an array")))
}

fn uint(v: &Value, ctx: &str) -> Result<usize> {
    v.as_u64().map(|x| x as usize).ok_or_else(|| schema(format!("{ctx}: expected a nonnegative integer")))
}

fn text_of(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

pub fn parse_quantity<T: Scalar>(v: &Value, ctx: &str) -> Result<T> {
    let text = text_of(v).ok_or_else(|| schema(format!("{ctx}: expected a decimal string")))?;
    T::parse_decimal(&text).ok_or_else(|| schema(format!("{ctx}: cannot parse `{text}` as a number")))
}

fn quantity<T: Scalar>(x: &T) -> Value {
    Value::String(x.to_decimal_string())
}

fn parse_space<T: Scalar>(v: &Value) -> Result<Space<T>> {
    let obj = object(v, "space")?;
    if let Some(m) = obj.get("metric") {
        let m = object(m, "space.metric")?;
        let points: Vec<String> = array(field(m, "points", "space.metric")?, "space.metric.points")?
            .iter()
            .map(|p| text_of(p).ok_or_else(|| schema("space.metric.points: expected strings")))
            .collect::<Result<_>>()?;
        let rows = array(field(m, "dist", "space.metric")?, "space.metric.dist")?;
        let dist = rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                array(row, &format!("space.metric.dist[{i}]"))?
                    .iter()
                    .enumerate()
                    .map(|(j, x)| parse_quantity(x, &format!("space.metric.dist[{i}][{j}]")))
                    .collect::<Result<Vec<T>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let metric = Metric::new(points, dist).map_err(|e| OsdError::InvariantViolation(format!("space.metric: {e}")))?;
        return Ok(Space::Metric(metric));
    }
    if let Some(h) = obj.get("hst") {
        let h = object(h, "space.hst")?;
        let nodes = array(field(h, "nodes", "space.hst")?, "space.hst.nodes")?;
        for (i, n) in nodes.iter().enumerate() {
            if uint(n, "space.hst.nodes")? != i {
                return Err(schema("space.hst.nodes: node ids must be 0..n-1 in order"));
            }
        }
        let n = nodes.len();
        let mut parent = vec![None; n];
        let mut len_exp = vec![0u32; n];
        for (i, e) in array(field(h, "edges", "space.hst")?, "space.hst.edges")?.iter().enumerate() {
            let ctx = format!("space.hst.edges[{i}]");
            let e = object(e, &ctx)?;
            let child = uint(field(e, "child", &ctx)?, &ctx)?;
            let par = uint(field(e, "parent", &ctx)?, &ctx)?;
            let exp = uint(field(e, "len_exp", &ctx)?, &ctx)?;
            if child >= n || par >= n {
                return Err(OsdError::InvariantViolation(format!("{ctx}: unknown node")));
            }
            if parent[child].is_some() {
                return Err(OsdError::InvariantViolation(format!("{ctx}: node {child} has two parents")));
            }
            parent[child] = Some(par);
            len_exp[child] = u32::try_from(exp).map_err(|_| schema(format!("{ctx}: len_exp too large")))?;
        }
        let mut leaves = BTreeMap::new();
        if let Some(l) = h.get("leaves") {
            for (point, node) in object(l, "space.hst.leaves")? {
                leaves.insert(point.clone(), uint(node, "space.hst.leaves")?);
            }
        }
        let hst = Hst::new(parent, len_exp, leaves).map_err(|e| OsdError::InvariantViolation(format!("space.hst: {e}")))?;
        return Ok(Space::Hst(hst));
    }
    if let Some(p) = obj.get("pages") {
        return Ok(Space::Pages(uint(p, "space.pages")?));
    }
    Err(schema("space: expected one of `metric`, `hst`, `pages`"))
}

fn parse_location<T: Scalar>(space: &Space<T>, v: &Value, ctx: &str) -> Result<usize> {
    match space {
        Space::Metric(m) => {
            let name = text_of(v).ok_or_else(|| schema(format!("{ctx}: expected a point name")))?;
            m.index_of(&name).ok_or_else(|| OsdError::InvariantViolation(format!("{ctx}: unknown point `{name}`")))
        }
        _ => uint(v, ctx),
    }
}

fn location_value<T: Scalar>(space: &Space<T>, loc: usize) -> Value {
    match space {
        Space::Metric(m) => Value::String(m.names()[loc].clone()),
        _ => json!(loc),
    }
}

pub fn parse_instance<T: Scalar>(text: &str) -> Result<Instance<T>> {
    let root: Value = serde_json::from_str(text).map_err(|e| OsdError::Syntax(e.to_string()))?;
    let obj = object(&root, "instance")?;
    let space = parse_space(field(obj, "space", "instance")?)?;
    let k = uint(field(obj, "k", "instance")?, "k")?;
    let start = array(field(obj, "start", "instance")?, "start")?
        .iter()
        .enumerate()
        .map(|(i, v)| parse_location(&space, v, &format!("start[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    let mut requests = Vec::new();
    for (i, r) in array(field(obj, "requests", "instance")?, "requests")?.iter().enumerate() {
        let ctx = format!("requests[{i}]");
        let r = object(r, &ctx)?;
        let id = uint(field(r, "id", &ctx)?, &format!("{ctx}.id"))?;
        let loc = parse_location(&space, field(r, "leaf", &ctx)?, &format!("{ctx}.leaf"))?;
        let arrival = parse_quantity(field(r, "arrival", &ctx)?, &format!("{ctx}.arrival"))?;
        let segments = array(field(r, "segments", &ctx)?, &format!("{ctx}.segments"))?
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let sctx = format!("{ctx}.segments[{j}]");
                let pair = array(s, &sctx)?;
                if pair.len() != 2 {
                    return Err(schema(format!("{sctx}: expected [offset, slope]")));
                }
                Ok((parse_quantity(&pair[0], &sctx)?, parse_quantity(&pair[1], &sctx)?))
            })
            .collect::<Result<Vec<(T, T)>>>()?;
        let deadline = match r.get("deadline") {
            None | Some(Value::Null) => None,
            Some(d) => Some(parse_quantity(d, &format!("{ctx}.deadline"))?),
        };
        let penalty = PenaltyFn::new(segments, deadline).map_err(|e| OsdError::Schema(format!("{ctx}: {e}")))?;
        requests.push(Request { id, loc, arrival, penalty });
    }
    Instance::new(space, k, start, requests)
}

pub fn instance_to_json<T: Scalar>(inst: &Instance<T>) -> Value {
    let space = match &inst.space {
        Space::Metric(m) => json!({"metric": {
            "points": m.names(),
            "dist": m.matrix().iter().map(|row| row.iter().map(quantity).collect::<Vec<_>>()).collect::<Vec<_>>(),
        }}),
        Space::Hst(h) => json!({"hst": {
            "nodes": (0..h.node_count()).collect::<Vec<_>>(),
            "edges": h.edges().map(|e| json!({
                "child": e, "parent": h.parent(e), "len_exp": h.len_exp(e)
            })).collect::<Vec<_>>(),
            "leaves": h.leaf_map(),
        }}),
        Space::Pages(n) => json!({"pages": n}),
    };
    let requests: Vec<Value> = inst
        .requests
        .iter()
        .map(|r| {
            let mut obj = json!({
                "id": r.id,
                "leaf": location_value(&inst.space, r.loc),
                "arrival": quantity(&r.arrival),
                "segments": r.penalty.segments().iter().map(|(o, s)| json!([quantity(o), quantity(s)])).collect::<Vec<_>>(),
            });
            if let Some(d) = r.penalty.deadline() {
                obj["deadline"] = quantity(d);
            }
            obj
        })
        .collect();
    json!({
        "space": space,
        "k": inst.k,
        "start": inst.start.iter().map(|&s| location_value(&inst.space, s)).collect::<Vec<_>>(),
        "requests": requests,
    })
}

pub fn serialize_instance<T: Scalar>(inst: &Instance<T>) -> String {
    serde_json::to_string_pretty(&instance_to_json(inst)).expect("json values serialize")
}
