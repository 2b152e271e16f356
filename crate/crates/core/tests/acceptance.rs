//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Set `UPDATE_GOLDEN=1` to rewrite the simplification report.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::process::ExitCode;

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, RngAlgorithm, TestRng, TestRunner};
use serde_json::Value;

use promissory::corpus;
use promissory::meadow::{
    detect_mvl_creep, grid, parse_expr, solution_set, CreepStatus, Expr, Semantics, DEFAULT_BOUND,
};
use promissory::scenario::{parse_scenario, report, run, Partition, Scenario, Trace};
use promissory::tuplix::{conforms, instantiate, is_instance_of, Tuplix, DEFAULT_INSTANCE_BOUND};
use promissory::Rational;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn load(name: &str) -> Scenario {
    corpus::load(name).expect("bundled").expect("parses")
}

fn expr(src: &str) -> Expr {
    parse_expr(src).unwrap_or_else(|e| panic!("{src}: {e}"))
}

fn rational() -> impl Strategy<Value = Rational> {
    (-10_000i64..=10_000, 1i64..=500).prop_map(|(p, q)| Rational::new(p, q))
}

fn runner(cases: u32) -> TestRunner {
    let rng = TestRng::deterministic_rng(RngAlgorithm::ChaCha);
    TestRunner::new_with_rng(
        PropConfig {
            cases,
            failure_persistence: None,
            ..PropConfig::default()
        },
        rng,
    )
}

fn meadow_axioms() -> Outcome {
    const CASES: u32 = 600;
    let zero = Rational::zero();
    let one = Rational::one();
    ensure(zero.inv() == zero, || "Inv(0) != 0".into())?;
    let mut r = runner(CASES);
    r.run(&(rational(), rational(), rational()), |(x, y, z)| {
        prop_assert_eq!(x.inv().inv(), x.clone());
        prop_assert_eq!(&x * &(&x * &x.inv()), x.clone());
        prop_assert_eq!(&(&x + &y) + &z, &x + &(&y + &z));
        prop_assert_eq!(&x + &y, &y + &x);
        prop_assert_eq!(&x + &Rational::zero(), x.clone());
        prop_assert_eq!(&x + &(-&x), Rational::zero());
        prop_assert_eq!(&(&x * &y) * &z, &x * &(&y * &z));
        prop_assert_eq!(&x * &y, &y * &x);
        prop_assert_eq!(&x * &Rational::one(), x.clone());
        prop_assert_eq!(&x * &(&y + &z), &(&x * &y) + &(&x * &z));
        prop_assert_eq!((&x * &y).inv(), &x.inv() * &y.inv());
        prop_assert_eq!((-&x).inv(), -&x.inv());
        prop_assert!(x.is_zero() || &x * &x.inv() == Rational::one());
        // total order compatible with + and with multiplication by positives
        prop_assert!((x < y) as u8 + (x == y) as u8 + (x > y) as u8 == 1);
        if x <= y {
            prop_assert!(&x + &z <= &y + &z);
            if z > Rational::zero() {
                prop_assert!(&x * &z <= &y * &z);
            }
        }
        if x <= y && y <= z {
            prop_assert!(x <= z);
        }
        prop_assert!(&x * &x >= Rational::zero());
        Ok(())
    })
    .map_err(|e| e.to_string())?;
    ensure(one.inv() == one, || "Inv(1) != 1".into())?;
    Ok(format!("{CASES} random triples, exact"))
}

struct Simplification {
    label: &'static str,
    body: &'static str,
    simplified: &'static str,
    expected: BTreeSet<Rational>,
}

fn simplifications() -> Outcome {
    let all = grid(DEFAULT_BOUND);
    let ints = |v: &[i64]| v.iter().map(|&n| Rational::from(n)).collect::<BTreeSet<_>>();
    let cases = [
        Simplification {
            label: "body 1",
            body: "0 <= X <= 2 and 0 <= X/(X-1) <= 2",
            simplified: "X = 0 or X = 1 or X = 2",
            expected: ints(&[0, 1, 2]),
        },
        Simplification {
            label: "body 2",
            body: "0 <= X <= 2 and 0 < X/(X-1) < 2",
            simplified: "X = 1",
            expected: ints(&[1]),
        },
        Simplification {
            label: "body 3",
            body: "X/X = 1",
            simplified: "X != 0",
            expected: all.iter().filter(|r| !r.is_zero()).cloned().collect(),
        },
        Simplification {
            label: "body 4",
            body: "X/X != 1",
            simplified: "X = 0",
            expected: ints(&[0]),
        },
    ];

    let mut golden = String::new();
    let mut failures = Vec::new();
    for c in &cases {
        let found = solution_set(&expr(c.body), "X", DEFAULT_BOUND).map_err(|e| e.to_string())?;
        let agrees = found == c.expected;
        let shown = if found.len() > 8 {
            format!("{} of {} grid points", found.len(), all.len())
        } else {
            let v: Vec<String> = found.iter().map(Rational::to_string).collect();
            format!("{{{}}}", v.join(", "))
        };
        golden.push_str(&format!(
            "{}: {}\n  claimed: {}\n  computed at bound {}: {}\n  {}\n",
            c.label,
            c.body,
            c.simplified,
            DEFAULT_BOUND,
            shown,
            if agrees { "agreement" } else { "discrepancy" }
        ));
        // body 2's claimed form is known not to survive 1/0 = 0
        if c.label == "body 2" {
            if agrees || !found.is_empty() {
                failures.push("body 2 expected an empty set (discrepancy with X = 1)".to_string());
            }
        } else if !agrees {
            failures.push(format!("{} gave {shown}", c.label));
        }
    }

    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/simplifications.txt");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).map_err(|e| e.to_string())?;
        std::fs::write(&path, &golden).map_err(|e| e.to_string())?;
    }
    let stored = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if stored != golden {
        failures.push("golden report differs".into());
    }
    ensure(failures.is_empty(), || failures.join("; "))?;
    Ok("bodies 1, 3, 4 agree; body 2 is empty, a recorded discrepancy".into())
}

fn creep_detection() -> Outcome {
    let body1 = detect_mvl_creep(&expr("0 <= X <= 2 and 0 <= X/(X-1) <= 2"), DEFAULT_BOUND)
        .map_err(|e| e.to_string())?;
    let at_one = body1.findings.iter().find(|f| f.binding == Rational::one());
    ensure(body1.status == CreepStatus::Creep, || "body 1 not flagged".into())?;
    ensure(
        at_one.is_some_and(|f| {
            f.meadow_total == promissory::meadow::TruthValue::True
                && f.short_circuit == promissory::meadow::TruthValue::Undefined
        }),
        || format!("body 1 at X = 1: {at_one:?}"),
    )?;

    let guarded = [
        "0 <= X <= 2 and X != 1 sand 0 <= X/(X-1) <= 2",
        "0 <= X <= 2 and X != 1 sand 0 < X/(X-1) < 2",
        "X != 0 sand X/X = 1",
        "X != 0 sand X/X != 1",
    ];
    for g in guarded {
        let rep = detect_mvl_creep(&expr(g), DEFAULT_BOUND).map_err(|e| e.to_string())?;
        ensure(rep.creep_free_under_short_circuit(), || format!("`{g}` still creeps"))?;
        ensure(!rep.findings.iter().any(|f| f.short_circuit == promissory::meadow::TruthValue::Undefined), || {
            format!("`{g}` undefined under short-circuit")
        })?;
    }

    let division_free = ["0 <= X <= 2", "X*X = 2", "X + 1 > 3 or X < -1", "not (X = 1/2) and X*(X-1) != 0"];
    for d in division_free {
        let rep = detect_mvl_creep(&expr(d), DEFAULT_BOUND).map_err(|e| e.to_string())?;
        ensure(rep.is_empty() && rep.status == CreepStatus::Clean, || format!("`{d}` reported {rep:?}"))?;
        for x in grid(DEFAULT_BOUND) {
            let env = BTreeMap::from([("X".to_string(), x)]);
            let vals: Vec<_> = Semantics::ALL
                .iter()
                .map(|s| promissory::meadow::eval_bool(&expr(d), &env, *s).unwrap())
                .collect();
            ensure(vals.windows(2).all(|w| w[0] == w[1]), || format!("`{d}` semantics disagree"))?;
        }
    }
    Ok("body 1 flagged at X = 1; 4 guarded rewrites clean; division-free empty".into())
}

fn payloads<'a>(trace: &'a Trace, kind: &'a str) -> impl Iterator<Item = &'a Value> + 'a {
    trace.of_kind(kind).map(|r| &r.payload)
}

fn scope_distribution() -> Outcome {
    let mut total = 0;
    for (name, src) in corpus::ALL {
        let trace = run(&parse_scenario(src).unwrap());
        // oracle: an instance per distinct scope member of each issued promise
        let expected: usize = trace
            .of_kind("promise")
            .filter(|r| r.partition == Partition::Public)
            .map(|r| &r.payload)
            .map(|p| {
                let scope: BTreeSet<&str> =
                    p["scope"].as_array().unwrap().iter().map(|a| a.as_str().unwrap()).collect();
                scope.len()
            })
            .sum();
        let instances: Vec<_> = trace.of_kind("instance").collect();
        ensure(instances.len() == expected, || format!("{name}: {} instances, oracle {expected}", instances.len()))?;
        let mut per_instance: BTreeMap<String, usize> = BTreeMap::new();
        for r in trace.of_kind("reasoning") {
            let cause = r.cause.ok_or_else(|| format!("{name}: reasoning record without cause"))?;
            let parent = trace.get(cause).ok_or_else(|| format!("{name}: dangling cause {cause}"))?;
            ensure(parent.kind == "instance", || format!("{name}: reasoning caused by {}", parent.kind))?;
            *per_instance.entry(cause.to_string()).or_default() += 1;
        }
        ensure(per_instance.len() == instances.len() && per_instance.values().all(|&n| n == 5), || {
            format!("{name}: reasoning counts {per_instance:?}")
        })?;
        total += instances.len();
    }
    Ok(format!("{total} instances across {} scenarios, 5 processes each", corpus::ALL.len()))
}

fn trust_dynamics() -> Outcome {
    let initial = Rational::new(1, 2);
    let alpha = Rational::new(1, 10);
    let beta = Rational::new(1, 2);
    let one = Rational::one();
    let kept_oracle = &initial + &(&alpha * &(&one - &initial));
    let broken_oracle = &initial - &(&(&one - &beta) * &initial);

    let kept = report(&run(&load("money_transfer")));
    ensure(kept.verdict("P9", "B") == Some("kept"), || format!("P9: {:?}", kept.verdict("P9", "B")))?;
    let t = kept.trust("B", "A").cloned().ok_or("no trust of B in A")?;
    ensure(t >= initial, || format!("kept trust {t} below initial"))?;
    ensure(t == kept_oracle && t == Rational::new(11, 20), || format!("kept trust {t}"))?;

    let broken = report(&run(&load("money_transfer_double_spend")));
    ensure(broken.verdict("P11", "B") == Some("broken"), || format!("P11: {:?}", broken.verdict("P11", "B")))?;
    let t2 = broken.trust("B", "A").cloned().ok_or("no trust of B in A")?;
    ensure(t2 < initial, || format!("broken trust {t2} not below initial"))?;
    ensure(t2 == broken_oracle && t2 == Rational::new(1, 4), || format!("broken trust {t2}"))?;
    Ok(format!("kept {t}, broken {t2}"))
}

fn obligation_provenance() -> Outcome {
    let mut count = 0;
    for (name, src) in corpus::ALL {
        let trace = run(&parse_scenario(src).unwrap());
        let promise_ids: BTreeSet<String> =
            payloads(&trace, "promise").map(|p| p["id"].as_str().unwrap().to_string()).collect();
        let mut from_promises = 0;
        for p in payloads(&trace, "obligation") {
            let kind = p["source"]["type"].as_str().unwrap_or("");
            let id = p["source"]["id"].as_str().unwrap_or("");
            ensure(
                kind == "promissory_decision" || kind == "internalized_promissory_decision",
                || format!("{name}: obligation sourced by {kind}"),
            )?;
            from_promises += usize::from(promise_ids.contains(id));
            count += 1;
        }
        ensure(from_promises == 0, || format!("{name}: {from_promises} promise-sourced obligations"))?;
    }
    ensure(count > 0, || "no obligations in the corpus".into())?;
    Ok(format!("{count} obligations, all from promissory decisions, 0 from promises"))
}

fn effectuation(trace: &Trace) -> Vec<(u64, &'static str, Option<String>, Value)> {
    trace
        .records()
        .iter()
        .filter(|r| matches!(r.kind, "idocc_effectuated" | "perform" | "event"))
        .filter(|r| r.cause.is_some())
        .map(|r| (r.time, r.kind, r.cause.map(|c| c.to_string()), r.payload.clone()))
        .collect()
}

fn idocc_semantics() -> Outcome {
    let mut checked = 0;
    for (name, src) in corpus::ALL {
        let agent = parse_scenario(src).unwrap().agents.into_iter().next().unwrap();
        let last = parse_scenario(src).unwrap().actions.last().map_or(1, |a| a.time);
        let armed = format!(
            "{src}\nat {last} decide {agent} as I900 internal promissory trigger never_happens {{tag=x}} body \"dormant control code\"\n"
        );
        let plain = run(&parse_scenario(src).unwrap());
        let with_idocc = run(&parse_scenario(&armed).map_err(|e| format!("{name}: {e}"))?);
        ensure(with_idocc.of_kind("idocc_loaded").count() > plain.of_kind("idocc_loaded").count(), || {
            format!("{name}: dormant idocc not loaded")
        })?;
        ensure(plain.export_public() == with_idocc.export_public(), || {
            format!("{name}: un-triggered idocc changed the public trace")
        })?;
        checked += 1;
    }

    let src = corpus::INSEQ_USAGE;
    let sc = parse_scenario(src).unwrap();
    let trigger_time = sc
        .actions
        .iter()
        .find(|a| matches!(&a.action, promissory::scenario::ScriptAction::Event(e) if e.kind == "deploy"))
        .map(|a| a.time)
        .ok_or("no deploy event")?;
    let forgetful = src.replace(
        &format!("at {trigger_time} event deploy"),
        &format!("at {} forget A\nat {trigger_time} event deploy", trigger_time - 1),
    );
    let reference = run(&sc);
    let erased = run(&parse_scenario(&forgetful).map_err(|e| e.to_string())?);
    ensure(erased.of_kind("forget").count() >= 1, || "forget not applied".into())?;
    let a = effectuation(&reference);
    let b = effectuation(&erased);
    ensure(reference.of_kind("idocc_effectuated").count() == 1, || "idocc did not fire".into())?;
    ensure(a == b, || format!("effectuation differs after forgetting:\n{a:?}\n{b:?}"))?;
    Ok(format!("{checked} public traces unchanged; effectuation identical after memory erasure"))
}

fn budget(sc: &Scenario, name: &str) -> Result<Tuplix, String> {
    sc.budgets.get(name).cloned().ok_or_else(|| format!("missing budget {name}"))
}

fn tuplix_chain() -> Outcome {
    let sc = load("budget");
    let t_q = budget(&sc, "tQ")?;
    let s_b = sc.substitutions.get("sB").ok_or("missing sB")?;
    let s_r = sc.substitutions.get("sr").ok_or("missing sr")?;
    let b_q = instantiate(&t_q, s_b).map_err(|e| e.to_string())?;
    let r_q = instantiate(&b_q, s_r).map_err(|e| e.to_string())?;
    let inst = |a: &Tuplix, b: &Tuplix| is_instance_of(a, b, DEFAULT_INSTANCE_BOUND).map_err(|e| e.to_string());
    ensure(inst(&r_q, &b_q)?, || "sr(sB(tQ)) is not an instance of sB(tQ)".into())?;
    ensure(inst(&b_q, &t_q)?, || "sB(tQ) is not an instance of tQ".into())?;
    ensure(inst(&r_q, &t_q)?, || "sr(sB(tQ)) is not an instance of tQ".into())?;
    ensure(!inst(&t_q, &b_q)?, || "tQ wrongly an instance of sB(tQ)".into())?;

    let shortfall = Rational::from(40);
    let exact = sc.accounts.get("final").ok_or("missing account final")?;
    let over = sc.accounts.get("overrun").ok_or("missing account overrun")?;
    let predicted = promissory::tuplix::net_result(&r_q).map_err(|e| e.to_string())?;
    ensure(&predicted - &exact.net_result() == shortfall, || "final is not exactly S_r short".into())?;
    ensure(&predicted - &over.net_result() == &shortfall + &Rational::one(), || "overrun is not S_r + 1 short".into())?;
    ensure(conforms(exact, &r_q, &shortfall).map_err(|e| e.to_string())?, || "exact shortfall rejected".into())?;
    ensure(!conforms(over, &r_q, &shortfall).map_err(|e| e.to_string())?, || "S_r + 1 accepted".into())?;
    Ok(format!("chain holds; net {predicted}, {} accepted, {} rejected", exact.net_result(), over.net_result()))
}

fn determinism() -> Outcome {
    for (name, src) in corpus::ALL {
        let a = run(&parse_scenario(src).unwrap()).export_public();
        let b = run(&parse_scenario(src).unwrap()).export_public();
        ensure(a == b, || format!("{name}: public exports differ"))?;
        ensure(!a.is_empty(), || format!("{name}: empty export"))?;
    }
    Ok(format!("{} scenarios replayed bytewise", corpus::ALL.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("meadow axioms", meadow_axioms),
        ("simplification solution sets", simplifications),
        ("MVL creep detection", creep_detection),
        ("scope distribution", scope_distribution),
        ("trust dynamics", trust_dynamics),
        ("obligation provenance", obligation_provenance),
        ("idocc semantics", idocc_semantics),
        ("tuplix chain and conformance", tuplix_chain),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (label, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {}: PASS  {label}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {label}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
