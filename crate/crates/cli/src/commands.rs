use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use osd::adversary::{
    gen_metric, gen_pages, gen_random, gen_spatial, gen_star_deadlines, gen_star_rates, nonclairvoyant_adversary, RandomParams,
};
use osd::instance::{parse_instance, serialize_instance, ClairvoyanceMode, Instance, Space};
use osd::kosd::Kosd;
use osd::metric_hst::frt_embed;
use osd::oracle::{offline_opt, Ball, OracleConfig, Threshold};
use osd::paging::{paging_with_delay, Policy};
use osd::ps::Ps;
use osd::sim::{compare, run, CostReport, Horizon, OnlineAlgorithm};
use osd::Scalar;
use serde_json::json;

use crate::{
    AdversaryArgs, Algorithm, Command, CompareArgs, EmbedArgs, Failure, Family, Format, GenerateArgs, Mode, Output, PolicyArg, RunArgs,
    ValidateArgs,
};

pub fn execute<T: Scalar>(cmd: Command) -> Result<Output, Failure> {
    match cmd {
        Command::Generate(a) => generate::<T>(&a),
        Command::Run(a) => run_one::<T>(&a),
        Command::Compare(a) => compare_all::<T>(&a),
        Command::Embed(a) => embed::<T>(&a),
        Command::Validate(a) => validate::<T>(&a),
        Command::Adversary(a) => adversary::<T>(&a),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn load<T: Scalar>(path: &Path) -> Result<Instance<T>, Failure> {
    parse_instance(&read(path)?).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn mode(m: Mode) -> ClairvoyanceMode {
    match m {
        Mode::Clairvoyant => ClairvoyanceMode::Clairvoyant,
        Mode::Nonclairvoyant => ClairvoyanceMode::Nonclairvoyant,
    }
}

fn horizon<T: Scalar>(h: &Option<String>) -> Result<Horizon<T>, Failure> {
    match h {
        None => Ok(Horizon::Completion),
        Some(text) => {
            T::parse_decimal(text).map(Horizon::At).ok_or_else(|| Failure::Usage(format!("--horizon: cannot parse `{text}` as a number")))
        }
    }
}

fn online<T: Scalar>(a: Algorithm) -> Result<Box<dyn OnlineAlgorithm<T>>, Failure> {
    Ok(match a {
        Algorithm::Ps => Box::new(Ps::new()),
        Algorithm::Kosd => Box::new(Kosd::new()),
        Algorithm::Ball => Box::new(Ball::default()),
        Algorithm::BallLeaf => Box::new(Ball::new(Threshold::LeafWeight)),
        Algorithm::Paging => return Err(Failure::Usage("`paging` runs only through `run` on page instances".into())),
    })
}

fn generate<T: Scalar>(a: &GenerateArgs) -> Result<Output, Failure> {
    let inst: Instance<T> = match a.family {
        Family::StarRates => gen_star_rates(a.n, a.w)?,
        Family::StarDeadlines => gen_star_deadlines(a.n, a.w)?,
        Family::Spatial => gen_spatial(a.m)?,
        Family::Random => {
            let params = RandomParams {
                leaves: a.leaves,
                depth: a.depth,
                requests: a.requests,
                servers: a.k,
                deadline_probability: a.deadline_probability,
                ..RandomParams::default()
            };
            if !(0.0..=1.0).contains(&a.deadline_probability) {
                return Err(Failure::Usage("--deadline-probability must lie in [0, 1]".into()));
            }
            gen_random(a.seed, &params)?
        }
        Family::Pages => gen_pages(a.seed, a.n, a.k, a.requests)?,
        Family::Metric => Instance::new(Space::Metric(gen_metric(a.seed, a.n, a.max_weight)?), 1, vec![0], vec![])?,
    };
    let mut text = serialize_instance(&inst);
    text.push('\n');
    match &a.output {
        Some(path) => {
            write(path, &text)?;
            Ok(Output { text: String::new(), ok: true })
        }
        None => Ok(Output { text, ok: true }),
    }
}

fn with_k<T: Scalar>(inst: Instance<T>, k: Option<usize>) -> Result<Instance<T>, Failure> {
    let Some(k) = k else { return Ok(inst) };
    let first = *inst.start.first().ok_or(osd::OsdError::NoServers)?;
    let start = (0..k).map(|i| inst.start.get(i).copied().unwrap_or(first)).collect();
    Ok(Instance::new(inst.space, k, start, inst.requests)?)
}

fn report_text<T: Scalar>(r: &CostReport<T>, f: Format) -> String {
    match f {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&r.to_json()).expect("json values serialize")),
        Format::Csv => format!("{}\n{}\n", CostReport::<T>::csv_header(), r.csv_row()),
        Format::Table => r.to_table(),
    }
}

fn run_one<T: Scalar>(a: &RunArgs) -> Result<Output, Failure> {
    let inst = with_k(load::<T>(&a.instance)?, a.k)?;
    if a.algorithm == Algorithm::Paging {
        if a.trace.is_some() || a.horizon.is_some() {
            return Err(Failure::Usage("--trace and --horizon do not apply to `paging`".into()));
        }
        return paging::<T>(&inst, a);
    }
    let tree = inst.to_tree(a.seed)?;
    let (report, trace) = run(&tree, online::<T>(a.algorithm)?, mode(a.mode), horizon(&a.horizon)?)?;
    if let Some(path) = &a.trace {
        write(path, &trace.to_jsonl())?;
    }
    Ok(Output { text: report_text(&report, a.format), ok: report.violations.is_empty() })
}

fn paging<T: Scalar>(inst: &Instance<T>, a: &RunArgs) -> Result<Output, Failure> {
    let policy = match a.policy {
        PolicyArg::Marking => Policy::MarkingDet,
        PolicyArg::Lru => Policy::Lru,
        PolicyArg::MarkingRand => Policy::MarkingRand(a.seed),
        PolicyArg::Belady => Policy::Belady,
    };
    let r = paging_with_delay(inst, policy)?;
    let ok = r.alg_i <= r.alg_i_prime.clone() + r.alg_i_prime.clone();
    let rows = [
        ("policy", r.policy.clone()),
        ("classical requests", r.stream.requests.len().to_string()),
        ("faults", r.faults.to_string()),
        ("delay penalty", r.delay.to_decimal_string()),
        ("cost with delay", r.alg_i.to_decimal_string()),
        ("cost on reduced stream", r.alg_i_prime.to_decimal_string()),
    ];
    let text = match a.format {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&r.to_json()).expect("json values serialize")),
        Format::Csv => format!(
            "policy,classical_requests,faults,delay,alg_I,alg_I_prime\n{}\n",
            rows.iter().map(|(_, v)| v.as_str()).collect::<Vec<_>>().join(",")
        ),
        Format::Table => table(&rows),
    };
    Ok(Output { text, ok })
}

fn table(rows: &[(&str, String)]) -> String {
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    rows.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
}

fn compare_all<T: Scalar>(a: &CompareArgs) -> Result<Output, Failure> {
    let inst = load::<T>(&a.instance)?;
    let mut algs = Vec::new();
    let mut want_opt = false;
    for name in &a.algorithms {
        if name == "opt" {
            want_opt = true;
            continue;
        }
        let alg = Algorithm::from_str_ci(name).ok_or_else(|| Failure::Usage(format!("--algorithms: unknown algorithm `{name}`")))?;
        algs.push(online::<T>(alg)?);
    }
    if algs.is_empty() {
        return Err(Failure::Usage("--algorithms needs at least one online algorithm".into()));
    }
    let opt = if want_opt { Some(offline_opt(&inst, &OracleConfig::default())?.opt_cost) } else { None };
    let tree = inst.to_tree(a.seed)?;
    let cmp = compare(&tree, algs, mode(a.mode), horizon(&a.horizon)?, opt)?;
    let ok = cmp.reports.iter().all(|r| r.violations.is_empty());
    let text = match a.format {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&cmp.to_json()).expect("json values serialize")),
        Format::Csv => {
            let mut s = format!("{},ratio,relative\n", CostReport::<T>::csv_header());
            for (i, r) in cmp.reports.iter().enumerate() {
                let dec = |x: Option<T>| x.map(|v| v.to_decimal_string()).unwrap_or_default();
                let _ = writeln!(s, "{},{},{}", r.csv_row(), dec(cmp.ratio(i)), dec(cmp.relative(i)));
            }
            s
        }
        Format::Table => cmp.to_table(),
    };
    Ok(Output { text, ok })
}

impl Algorithm {
    fn from_str_ci(name: &str) -> Option<Self> {
        <Self as clap::ValueEnum>::from_str(name.trim(), true).ok()
    }
}

fn f64_of<T: Scalar>(x: &T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn embed<T: Scalar>(a: &EmbedArgs) -> Result<Output, Failure> {
    let inst = load::<T>(&a.metric)?;
    let Space::Metric(metric) = &inst.space else {
        return Err(Failure::Invalid(format!("{}: the space is not a metric", a.metric.display())));
    };
    if a.samples == 0 {
        return Err(Failure::Usage("--samples must be positive".into()));
    }
    let n = metric.len();
    let pairs = n * (n - 1) / 2;
    let mut sums = vec![T::zero(); pairs];
    let mut samples = Vec::new();
    let mut dominating = 0;
    for i in 0..a.samples {
        let seed = a.seed.wrapping_add(i);
        let e = frt_embed(metric, seed)?;
        let dom = e.dominates();
        dominating += usize::from(dom);
        let mut max = T::zero();
        for (acc, p) in sums.iter_mut().zip(&e.distortion) {
            *acc = acc.clone() + p.ratio.clone();
            max = T::max_of(max, p.ratio.clone());
        }
        samples.push((seed, dom, e.hst.height(), max));
    }
    let count = T::of_usize(a.samples as usize);
    let means: Vec<T> = sums.into_iter().map(|s| s / count.clone()).collect();
    let (worst_pair, worst) =
        means.iter().enumerate().fold((0, T::zero()), |(bi, b), (i, m)| if *m > b { (i, m.clone()) } else { (bi, b) });
    let overall = if pairs == 0 { T::zero() } else { means.iter().cloned().fold(T::zero(), |x, y| x + y) / T::of_usize(pairs) };
    let (u, v) = pair_of(n, worst_pair);
    let names = metric.names();
    let ok = dominating as u64 == a.samples;
    let text = match a.format {
        Format::Json => {
            let doc = json!({
                "points": n,
                "samples": a.samples,
                "dominating": dominating,
                "worst_pair": if pairs == 0 { json!(null) } else { json!([names[u], names[v]]) },
                "worst_pair_mean_distortion": worst.to_decimal_string(),
                "mean_distortion": overall.to_decimal_string(),
                "per_sample": samples.iter().map(|(seed, dom, h, max)| json!({
                    "seed": seed, "dominates": dom, "height": h, "max_distortion": max.to_decimal_string(),
                })).collect::<Vec<_>>(),
            });
            format!("{}\n", serde_json::to_string_pretty(&doc).expect("json values serialize"))
        }
        Format::Csv => {
            let mut s = "seed,dominates,height,max_distortion\n".to_string();
            for (seed, dom, h, max) in &samples {
                let _ = writeln!(s, "{seed},{dom},{h},{}", max.to_decimal_string());
            }
            s
        }
        Format::Table => {
            let mut rows = vec![
                ("points", n.to_string()),
                ("samples", a.samples.to_string()),
                ("dominating", format!("{dominating}/{}", a.samples)),
                ("mean distortion", format!("{:.4}", f64_of(&overall))),
                ("worst pair mean", format!("{:.4}", f64_of(&worst))),
            ];
            if pairs > 0 {
                rows.push(("worst pair", format!("{} {}", names[u], names[v])));
            }
            rows.push(("8 ln n", format!("{:.4}", 8.0 * (n as f64).ln())));
            table(&rows)
        }
    };
    Ok(Output { text, ok })
}

/// The `i`-th pair `(u, v)`, `u < v`, in row order.
fn pair_of(n: usize, mut i: usize) -> (usize, usize) {
    for u in 0..n {
        let row = n - u - 1;
        if i < row {
            return (u, u + 1 + i);
        }
        i -= row;
    }
    (0, 0)
}

fn validate<T: Scalar>(a: &ValidateArgs) -> Result<Output, Failure> {
    let inst = load::<T>(&a.instance)?;
    inst.validate()?;
    let tree = inst.to_tree(0)?;
    let space = match &inst.space {
        Space::Metric(m) => format!("metric with {} points", m.len()),
        Space::Hst(h) => format!("hst with {} nodes", h.node_count()),
        Space::Pages(n) => format!("{n} pages"),
    };
    Ok(Output { text: format!("valid: {space}, height {}, k = {}, {} requests\n", tree.height(), inst.k, inst.requests.len()), ok: true })
}

fn adversary<T: Scalar>(a: &AdversaryArgs) -> Result<Output, Failure> {
    let alg = online::<T>(a.algorithm)?;
    let r = nonclairvoyant_adversary::<T, _>(a.w, a.phases, alg, ClairvoyanceMode::Nonclairvoyant)?;
    let ratio = r.ratio();
    let text = match a.format {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&r.to_json()).expect("json values serialize")),
        Format::Csv => {
            let mut s = "phase,start,critical,lights_served,heavy_serves,algorithm_cost,witness_cost\n".to_string();
            for (i, p) in r.phases.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{i},{},{},{},{},{},{}",
                    p.start.to_decimal_string(),
                    p.critical.len(),
                    p.lights_served,
                    p.heavy_serves,
                    p.algorithm_cost.to_decimal_string(),
                    p.witness_cost.to_decimal_string()
                );
            }
            s
        }
        Format::Table => {
            let mut out = table(&[
                ("algorithm", r.report.algorithm.clone()),
                ("W", r.w.to_string()),
                ("light pages", r.lights.to_string()),
                ("phases", r.phases.len().to_string()),
                ("algorithm cost", r.algorithm_cost().to_decimal_string()),
                ("witness cost", r.witness.opt_cost.to_decimal_string()),
                ("ratio", ratio.as_ref().map(|x| format!("{:.4}", f64_of(x))).unwrap_or_else(|| "-".into())),
                ("W/2", r.target().to_decimal_string()),
                ("violations", r.violations.len().to_string()),
            ]);
            for v in &r.violations {
                let _ = writeln!(out, "violation: {v}");
            }
            out
        }
    };
    Ok(Output { text, ok: r.violations.is_empty() })
}
