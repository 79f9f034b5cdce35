use std::fmt::Write as _;
use std::time::Instant;

use orlicz_carleson::carleson::{
    atomic_cloud, embedding_constant, embedding_family, verify_equivalence, weak_type_constant, CarlesonError, Classification,
};
use orlicz_carleson::growth::{classify, GrowthFunction};
use orlicz_carleson::maximal::run_maximal_suite;
use orlicz_carleson::measure::{carleson_box_constant, Measure, Verdict};
use orlicz_carleson::multipliers::{classify_multipliers, embed_check, special_measure, EmbedVerdict, MultiplierSpace};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{CommandName, RunConfig, SpaceName, SpecialSpec};

/// Seed used when neither the config nor the command line gives one.
pub const DEFAULT_SEED: u64 = 0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub command: String,
    pub name: String,
    /// Statement the record checks.
    pub anchor: String,
    pub inputs: Value,
    pub values: Value,
    pub verdict: String,
    pub tolerances: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<String>,
    /// Whether the configured expectation held.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub met: Option<bool>,
    pub incoherent: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub command: String,
    pub config_hash: String,
    /// Canonical config, including the effective seed.
    pub config: RunConfig,
    pub records: Vec<Record>,
    pub suite_verdict: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub command: String,
    pub seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    AssertionFailed,
    RuntimeError,
}

impl VerificationReport {
    pub fn status(&self, assert: bool) -> Status {
        if self.records.iter().any(|r| r.error.is_some()) {
            Status::RuntimeError
        } else if self.records.iter().any(|r| r.incoherent) || (assert && self.records.iter().any(|r| r.met == Some(false))) {
            Status::AssertionFailed
        } else {
            Status::Pass
        }
    }

    pub fn to_text(&self, timings: &[Timing]) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.command);
        let _ = writeln!(s, "├─ config hash: {}", self.config_hash);
        let _ = writeln!(s, "├─ suite verdict: {}", self.suite_verdict);
        let _ = writeln!(s, "└─ records ({})", self.records.len());
        for (i, r) in self.records.iter().enumerate() {
            let last = i + 1 == self.records.len();
            let (head, pad) = if last { ("   └─", "      ") } else { ("   ├─", "   │  ") };
            let _ = writeln!(s, "{head} [{}] {}", r.command, r.name);
            let _ = writeln!(s, "{pad}anchor: {}", r.anchor);
            let _ = writeln!(s, "{pad}verdict: {}", r.verdict);
            if let Some(e) = &r.expected {
                let _ = writeln!(s, "{pad}expected: {e} ({})", if r.met == Some(true) { "met" } else { "not met" });
            }
            if let Some(e) = &r.error {
                let _ = writeln!(s, "{pad}error: {e}");
            }
            let _ = writeln!(s, "{pad}inputs: {}", r.inputs);
            let _ = writeln!(s, "{pad}tolerances: {}", r.tolerances);
            let _ = writeln!(s, "{pad}values: {}", summary(&r.values));
        }
        let _ = writeln!(s, "timings");
        for t in timings {
            let _ = writeln!(s, "  {}: {:.3}s", t.command, t.seconds);
        }
        s
    }
}

/// Scalars and short arrays of the top level; nested objects are left to the JSON output.
fn summary(v: &Value) -> String {
    match v {
        Value::Object(m) => {
            let parts: Vec<String> = m
                .iter()
                .filter_map(|(k, x)| match x {
                    Value::Number(_) | Value::Bool(_) | Value::String(_) | Value::Null => Some(format!("{k}={x}")),
                    Value::Array(a) if a.len() <= 4 && a.iter().all(|e| !e.is_object() && !e.is_array()) => Some(format!("{k}={x}")),
                    _ => None,
                })
                .collect();
            parts.join(", ")
        }
        other => other.to_string(),
    }
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).unwrap_or_else(|e| Value::String(format!("unserializable: {e}")))
}

fn record(command: CommandName, name: String, anchor: &str, inputs: Value) -> Record {
    Record {
        command: command.as_str().into(),
        name,
        anchor: anchor.into(),
        inputs,
        values: Value::Null,
        verdict: String::new(),
        tolerances: Value::Null,
        expected: None,
        met: None,
        incoherent: false,
        error: None,
    }
}

fn fail(mut r: Record, e: impl std::fmt::Display) -> Record {
    r.verdict = "error".into();
    r.error = Some(e.to_string());
    r
}

fn resolve_measure(
    measure: &Option<Measure>,
    special: &Option<SpecialSpec>,
    cloud: bool,
    seed: u64,
) -> Result<(Measure, Option<(GrowthFunction, f64)>), CarlesonError> {
    if let Some(m) = measure {
        return Ok((m.clone(), None));
    }
    if let Some(s) = special {
        let m = special_measure(&s.phi1, &s.phi2, &s.mode)?;
        return Ok((m.measure, Some((m.composed, m.s))));
    }
    debug_assert!(cloud);
    Ok((atomic_cloud(seed), None))
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Finite => "finite",
        Verdict::Divergent => "divergent",
        Verdict::Unbounded => "unbounded",
    }
}

fn class_name(c: Classification) -> &'static str {
    match c {
        Classification::Carleson => "Carleson",
        Classification::NotCarleson => "not Carleson",
        Classification::Incoherent => "incoherent",
    }
}

fn space_name(s: &MultiplierSpace) -> SpaceName {
    match s {
        MultiplierSpace::HInfinity => SpaceName::HInfinity,
        MultiplierSpace::ZeroSpace => SpaceName::ZeroSpace,
        MultiplierSpace::HInfinityOmega => SpaceName::HInfinityOmega,
        MultiplierSpace::OutOfTheorem { .. } => SpaceName::OutOfTheorem,
    }
}

fn snake<T: Serialize>(t: &T) -> String {
    match to_value(t) {
        Value::String(s) => s,
        v => v.to_string(),
    }
}

fn run_command(cfg: &RunConfig, c: CommandName, seed: u64) -> Vec<Record> {
    match c {
        CommandName::ClassifyGrowth => {
            let s = cfg.classify_growth.as_ref().expect("validated");
            s.functions
                .iter()
                .map(|e| {
                    let mut r = record(c, format!("classify {}", e.phi), "doubling, nabla_2 and class membership of a growth function", json!({"phi": e.phi}));
                    let g = classify(&e.phi, &s.options);
                    r.verdict = format!(
                        "delta2 {} (K = {:.6}), nabla2 {}",
                        if g.delta2.bounded { "bounded" } else { "unbounded" },
                        g.delta2.constant,
                        if g.nabla2.passes() { "pass" } else { "fail" }
                    );
                    r.tolerances = json!({"slope_tol": s.options.slope_tol, "delta2_rel_tol": s.rel_tol});
                    let mut expected = Vec::new();
                    let mut met = true;
                    if let Some(n) = e.expect_nabla2 {
                        expected.push(format!("nabla2 {}", if n { "pass" } else { "fail" }));
                        met &= g.nabla2.passes() == n;
                    }
                    if let Some(k) = e.expect_delta2 {
                        expected.push(format!("delta2 = {k}"));
                        met &= ((g.delta2.constant - k) / k).abs() <= s.rel_tol;
                    }
                    if !expected.is_empty() {
                        r.expected = Some(expected.join(", "));
                        r.met = Some(met);
                    }
                    r.values = to_value(&g);
                    r
                })
                .collect()
        }
        CommandName::CarlesonTest => {
            let s = cfg.carleson_test.as_ref().expect("validated");
            let mut r = record(c, "box test".into(), "box condition mu(Q_I) <= C / Phi(1/|I|^s) over dyadic boxes", Value::Null);
            let (mu, derived) = match resolve_measure(&s.measure, &s.special, s.cloud, seed) {
                Ok(m) => m,
                Err(e) => return vec![fail(r, e)],
            };
            let phi = s.phi.clone().or_else(|| derived.as_ref().map(|d| d.0.clone())).expect("validated");
            let sv = s.s.or(derived.as_ref().map(|d| d.1)).expect("validated");
            r.inputs = json!({"measure": mu, "phi": phi, "s": sv});
            r.tolerances = json!({"divergence": s.divergence, "octave_slope_tol": orlicz_carleson::measure::OCTAVE_SLOPE_TOL});
            match carleson_box_constant(&mu, &phi, sv, &s.family, &s.quadrature, &s.divergence) {
                Ok(b) => {
                    let carleson = b.verdict.is_finite();
                    r.verdict = format!("{} ({})", if carleson { "Carleson" } else { "not Carleson" }, verdict_name(b.verdict));
                    if let Some(e) = s.expect {
                        r.expected = Some(snake(&e));
                        r.met = Some(e.holds(carleson));
                    }
                    r.values = to_value(&b);
                    vec![r]
                }
                Err(e) => vec![fail(r, e)],
            }
        }
        CommandName::Equivalence => {
            let s = cfg.equivalence.as_ref().expect("validated");
            let mut r = record(
                c,
                format!("equivalence {} / {}", s.phi1, s.phi2),
                "agreement of box, kernel and embedding conditions for s-Phi-Carleson measures",
                Value::Null,
            );
            let (mu, _) = match resolve_measure(&s.measure, &s.special, s.cloud, seed) {
                Ok(m) => m,
                Err(e) => return vec![fail(r, e)],
            };
            r.inputs = json!({"measure": mu, "phi1": s.phi1, "phi2": s.phi2, "mode": s.mode});
            r.tolerances = json!({"divergence": s.settings.divergence, "trend_tol": s.settings.embedding.trend_tol});
            match verify_equivalence(&mu, &s.phi1, &s.phi2, &s.mode, &s.settings) {
                Ok(rep) => {
                    r.incoherent = !rep.coherent;
                    r.verdict = if rep.coherent { format!("coherent: {}", class_name(rep.classification)) } else { "incoherent".into() };
                    if let Some(e) = s.expect {
                        r.expected = Some(class_name(e).into());
                        r.met = Some(rep.classification == e);
                    }
                    r.values = to_value(&rep);
                    vec![r]
                }
                Err(e) => vec![fail(r, e)],
            }
        }
        CommandName::EmbedCheck => {
            let s = cfg.embed_check.as_ref().expect("validated");
            let mut r = record(
                c,
                format!("embedding {} -> {}", s.phi1, s.phi2),
                "Phi1^-1(t^a) <= Phi2^-1(C t^b) on the grid",
                json!({"phi1": s.phi1, "phi2": s.phi2, "variant": s.variant, "grid": s.grid}),
            );
            r.tolerances = json!({"flat_slope_tol": orlicz_carleson::multipliers::FLAT_SLOPE_TOL});
            match embed_check(&s.phi1, &s.phi2, &s.variant, &s.grid) {
                Ok(e) => {
                    let holds = matches!(e.verdict, EmbedVerdict::Holds { .. });
                    r.verdict = match e.verdict {
                        EmbedVerdict::Holds { constant } => format!("holds (C = {constant:.6})"),
                        EmbedVerdict::Fails { witness } => format!("fails (growth toward t = {witness:e})"),
                    };
                    if let Some(h) = s.expect_holds {
                        r.expected = Some(if h { "holds" } else { "fails" }.into());
                        r.met = Some(h == holds);
                    }
                    r.values = to_value(&e);
                    vec![r]
                }
                Err(e) => vec![fail(r, e)],
            }
        }
        CommandName::MultiplierClassify => {
            let s = cfg.multiplier_classify.as_ref().expect("validated");
            let mut r = record(
                c,
                format!("multipliers {} -> {}", s.phi1, s.phi2),
                "multiplier space from the profile omega(t) = Phi2^-1(t^-b) / Phi1^-1(t^-a)",
                json!({"phi1": s.phi1, "phi2": s.phi2, "variant": s.variant}),
            );
            r.tolerances = json!({"omega": s.omega, "slope_tol": s.classify.slope_tol});
            match classify_multipliers(&s.phi1, &s.phi2, &s.variant, &s.classify, &s.omega) {
                Ok((profile, verdict)) => {
                    let name = space_name(&verdict.space);
                    r.verdict = snake(&name);
                    if let Some(e) = s.expect {
                        r.expected = Some(snake(&e));
                        r.met = Some(e == name);
                    }
                    r.values = json!({"space": verdict.space, "hypotheses": verdict.table, "omega": profile});
                    vec![r]
                }
                Err(e) => vec![fail(r, e)],
            }
        }
        CommandName::WeakTest => {
            let s = cfg.weak_test.as_ref().expect("validated");
            let mut r = record(
                c,
                format!("weak type {} / {}", s.phi1, s.phi2),
                "weak-type embedding sup_lambda Phi2(lambda) mu(|f| > C lambda ||f||) <= 1 next to the strong embedding",
                Value::Null,
            );
            let (mu, _) = match resolve_measure(&s.measure, &s.special, s.cloud, seed) {
                Ok(m) => m,
                Err(e) => return vec![fail(r, e)],
            };
            r.inputs = json!({"measure": mu, "phi1": s.phi1, "phi2": s.phi2, "mode": s.mode});
            r.tolerances = json!({"weak_over_strong_slack": 1e-6, "trend_tol": s.settings.embedding.trend_tol});
            let out = embedding_family(&s.mode, &s.phi1, &s.settings.embedding).and_then(|fam| {
                let e = embedding_constant(&mu, &s.phi1, &s.phi2, &s.mode, &fam, &s.settings)?;
                let w = weak_type_constant(&mu, &s.phi1, &s.phi2, &s.mode, &fam, &s.settings)?;
                Ok((e, w))
            });
            match out {
                Ok((e, w)) => {
                    let worst = e
                        .members
                        .iter()
                        .zip(&w.members)
                        .filter(|(a, _)| a.k_exact > 0.0 && a.k_exact.is_finite())
                        .map(|(a, b)| b.c_exact / a.k_exact)
                        .fold(0.0, f64::max);
                    let below = e.members.iter().zip(&w.members).all(|(a, b)| b.c_exact <= a.k_exact * (1.0 + 1e-6));
                    r.incoherent = !below;
                    r.verdict = format!("weak {}, strong {}", verdict_name(w.verdict), verdict_name(e.verdict));
                    if let Some(x) = s.expect {
                        r.expected = Some(verdict_name(x).into());
                        r.met = Some(x == w.verdict);
                    }
                    r.values = json!({"weak": w, "strong": e, "max_weak_over_strong": worst, "weak_below_strong": below});
                    vec![r]
                }
                Err(e) => vec![fail(r, e)],
            }
        }
        CommandName::MaximalSuite => {
            let mut s = cfg.maximal_suite.clone().expect("validated");
            s.seed = seed;
            let mut r = record(
                c,
                "maximal suite".into(),
                "one-third trick, dyadic weak type and weighted dyadic comparison on random step functions",
                json!({"seed": seed, "functions": s.functions, "probes": s.probes, "alphas": s.alphas}),
            );
            let rep = run_maximal_suite(&s);
            r.tolerances = json!({"one_third": 6.0, "weak_type": 2.0, "weighted": 68.0});
            r.verdict = format!("{} violations", rep.violations());
            r.expected = Some("0 violations".into());
            r.met = Some(rep.violations() == 0);
            r.values = to_value(&rep);
            vec![r]
        }
        CommandName::Suite => Vec::new(),
    }
}

/// Runs every command of the config; the seed is written back into the returned config.
pub fn run(cfg: &RunConfig, seed_override: Option<u64>) -> (VerificationReport, Vec<Timing>) {
    let mut cfg = cfg.clone();
    if seed_override.is_some() {
        cfg.seed = seed_override;
    }
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    cfg.seed = Some(seed);
    let mut records = Vec::new();
    let mut timings = Vec::new();
    for c in cfg.commands() {
        let t = Instant::now();
        records.extend(run_command(&cfg, c, seed));
        timings.push(Timing { command: c.as_str().into(), seconds: t.elapsed().as_secs_f64() });
    }
    let suite_verdict = if records.iter().any(|r| r.error.is_some()) {
        "runtime error".to_string()
    } else if records.iter().any(|r| r.incoherent) {
        "incoherent".to_string()
    } else if records.iter().any(|r| r.met == Some(false)) {
        "expectation not met".to_string()
    } else if records.len() == 1 {
        records[0].verdict.clone()
    } else {
        format!("pass ({} records)", records.len())
    };
    let report = VerificationReport {
        command: cfg.command.as_str().into(),
        config_hash: cfg.hash(),
        config: cfg,
        records,
        suite_verdict,
    };
    (report, timings)
}
