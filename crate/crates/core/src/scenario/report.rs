use serde::Serialize;
use serde_json::Value;

use super::trace::Trace;
use crate::meadow::{detect_mvl_creep, parse_expr, CreepStatus, DEFAULT_BOUND};
use crate::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerdictEntry {
    pub promise: String,
    pub observer: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrustEntry {
    pub observer: String,
    pub promiser: String,
    pub trust: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ObligationEntry {
    pub obligor: String,
    pub source: Value,
    pub content: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ErosionStats {
    pub instances: usize,
    pub dropped: usize,
    pub forgotten: usize,
    /// Mean final confidence over all instances, exact.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_confidence: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CreepSummary {
    pub promise: String,
    pub expression: String,
    pub status: CreepStatus,
    pub findings: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Summary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,
    pub verdicts: Vec<VerdictEntry>,
    pub trust: Vec<TrustEntry>,
    pub obligations: Vec<ObligationEntry>,
    pub erosion: ErosionStats,
    pub creep: Vec<CreepSummary>,
    pub errors: Vec<String>,
}

impl Summary {
    pub fn verdict(&self, promise: &str, observer: &str) -> Option<&str> {
        self.verdicts
            .iter()
            .find(|v| v.promise == promise && v.observer == observer)
            .map(|v| v.status.as_str())
    }

    pub fn trust(&self, observer: &str, promiser: &str) -> Option<&Rational> {
        self.trust
            .iter()
            .find(|t| t.observer == observer && t.promiser == promiser)
            .map(|t| &t.trust)
    }
}

fn text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn rational(v: &Value) -> Option<Rational> {
    v.as_str().and_then(|s| s.parse().ok())
}

/// Summarizes whatever partitions the trace holds.
pub fn report(trace: &Trace) -> Summary {
    let mut s = Summary::default();
    let mut confidences = Vec::new();
    for r in trace.records() {
        let p = &r.payload;
        match r.kind {
            "run" => s.run_id = p.get("run_id").map(text),
            "instance_state" => {
                s.verdicts.push(VerdictEntry {
                    promise: text(&p["promise"]),
                    observer: text(&p["holder"]),
                    status: text(&p["status"]),
                    degree: p.get("degree").filter(|d| !d.is_null()).map(text),
                });
                s.erosion.instances += 1;
                s.erosion.dropped += usize::from(p["dropped"] == Value::Bool(true));
                s.erosion.forgotten += usize::from(p["forgotten"] == Value::Bool(true));
                confidences.extend(rational(&p["confidence"]));
            }
            "ledger" => {
                if let Some(entries) = p["trust"].as_array() {
                    s.trust = entries
                        .iter()
                        .filter_map(|e| {
                            Some(TrustEntry {
                                observer: text(&e["observer"]),
                                promiser: text(&e["promiser"]),
                                trust: rational(&e["trust"])?,
                            })
                        })
                        .collect();
                }
            }
            "obligation" => s.obligations.push(ObligationEntry {
                obligor: text(&p["obligor"]),
                source: p["source"].clone(),
                content: p["content"].clone(),
            }),
            "promise" => {
                let quality = &p["body"]["quality"];
                if quality["type"] != "meadow" {
                    continue;
                }
                let Some(src) = quality["value"].as_str() else { continue };
                let Ok(expr) = parse_expr(src) else { continue };
                if let Ok(rep) = detect_mvl_creep(&expr, DEFAULT_BOUND) {
                    s.creep.push(CreepSummary {
                        promise: text(&p["id"]),
                        expression: rep.expression,
                        status: rep.status,
                        findings: rep.findings.into_iter().map(|f| f.binding).collect(),
                    });
                }
            }
            "error" => s.errors.push(text(&p["message"])),
            _ => {}
        }
    }
    if !confidences.is_empty() {
        let n = Rational::from(confidences.len() as i64);
        let total: Rational = confidences.iter().sum();
        s.erosion.mean_confidence = Some(total.div(&n));
    }
    s
}
