use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{Config, DecideSpec, Observation, OfferSpec, PromiseSpec, Scenario, ScriptAction, Scripted};
use crate::assessment::{Condition, PlannedAction, PlanningRule, TrustCmp, TrustParams, VerdictStatus};
use crate::decision::{DecisionId, IdoccId};
use crate::event::{Event, EventPattern};
use crate::meadow::{eval_arith, parse_expr, Env, Expr};
use crate::promise::{
    AgentId, BudgetClaim, BudgetRef, ImplicationRule, PromiseBody, PromiseDraft, PromiseId, Quality, Time,
    TransferClaim,
};
use crate::tuplix::{parse_substitution, Account, Tuplix};
use crate::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioErrorKind {
    Syntax(String),
    UndeclaredAgent(String),
    TimeRegression { time: Time, previous: Time },
}

impl fmt::Display for ScenarioErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioErrorKind::Syntax(m) => f.write_str(m),
            ScenarioErrorKind::UndeclaredAgent(a) => write!(f, "agent `{a}` is not declared"),
            ScenarioErrorKind::TimeRegression { time, previous } => {
                write!(f, "time {time} comes after time {previous}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ScenarioError {
    pub line: usize,
    pub column: usize,
    pub kind: ScenarioErrorKind,
}

type PResult<T> = Result<T, ScenarioError>;

const PROMISER_PLACEHOLDER: &str = "$promiser";

/// Strips a `#` comment that is not inside a string literal.
fn strip_comment(line: &str) -> &str {
    let mut in_str = false;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' if in_str => escaped = true,
            '"' => in_str = !in_str,
            '#' if !in_str => return &line[..i],
            _ => {}
        }
    }
    line
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '.' | '/' | '$' | '\'' | '-')
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn col_at(&self, pos: usize) -> usize {
        self.src[..pos].chars().count() + 1
    }

    fn col(&self) -> usize {
        self.col_at(self.pos)
    }

    fn err_at(&self, column: usize, kind: ScenarioErrorKind) -> ScenarioError {
        ScenarioError {
            line: self.line,
            column,
            kind,
        }
    }

    fn syntax<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(self.err_at(self.col(), ScenarioErrorKind::Syntax(msg.into())))
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos == self.src.len()
    }

    fn peek_char(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    fn eat(&mut self, sym: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(sym) {
            self.pos += sym.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, sym: &str) -> PResult<()> {
        if self.eat(sym) {
            Ok(())
        } else {
            self.syntax(format!("expected `{sym}`"))
        }
    }

    fn word_len(&self) -> usize {
        let rest = self.rest();
        let mut len = 0;
        for (i, c) in rest.char_indices() {
            if !is_word_char(c) || (c == '-' && rest[i..].starts_with("->")) {
                break;
            }
            len = i + c.len_utf8();
        }
        len
    }

    fn peek_word(&mut self) -> Option<&'a str> {
        self.skip_ws();
        let n = self.word_len();
        (n > 0).then(|| &self.rest()[..n])
    }

    fn word(&mut self, what: &str) -> PResult<(&'a str, usize)> {
        self.skip_ws();
        let col = self.col();
        match self.peek_word() {
            Some(w) => {
                self.pos += w.len();
                Ok((w, col))
            }
            None => self.syntax(format!("expected {what}")),
        }
    }

    fn keyword(&mut self, kw: &str) -> bool {
        if self.peek_word() == Some(kw) {
            self.pos += kw.len();
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.keyword(kw) {
            Ok(())
        } else {
            self.syntax(format!("expected `{kw}`"))
        }
    }

    fn string(&mut self) -> PResult<(String, usize)> {
        self.skip_ws();
        let col = self.col();
        if !self.rest().starts_with('"') {
            return self.syntax("expected a quoted string");
        }
        let mut out = String::new();
        let mut escaped = false;
        for (i, c) in self.rest().char_indices().skip(1) {
            if escaped {
                out.push(c);
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                self.pos += i + 1;
                return Ok((out, col + 1));
            } else {
                out.push(c);
            }
        }
        self.syntax("unterminated string")
    }

    fn value(&mut self) -> PResult<String> {
        if self.peek_char() == Some('"') {
            Ok(self.string()?.0)
        } else {
            Ok(self.word("a value")?.0.to_string())
        }
    }

    /// Contents of a `{ ... }` group and the column where they start.
    fn braced_raw(&mut self) -> PResult<(&'a str, usize)> {
        self.expect("{")?;
        let start = self.pos;
        let mut depth = 1;
        let mut in_str = false;
        for (i, c) in self.rest().char_indices() {
            match c {
                '"' => in_str = !in_str,
                '{' if !in_str => depth += 1,
                '}' if !in_str => {
                    depth -= 1;
                    if depth == 0 {
                        self.pos += i + 1;
                        return Ok((&self.src[start..start + i], self.col_at(start)));
                    }
                }
                _ => {}
            }
        }
        self.syntax("unclosed `{`")
    }

    fn rational(&mut self) -> PResult<Rational> {
        let (w, col) = self.word("a rational")?;
        w.parse()
            .map_err(|e| self.err_at(col, ScenarioErrorKind::Syntax(format!("bad rational `{w}`: {e}"))))
    }

    fn time(&mut self) -> PResult<Time> {
        let (w, col) = self.word("a time")?;
        w.parse()
            .map_err(|_| self.err_at(col, ScenarioErrorKind::Syntax(format!("bad time `{w}`"))))
    }

    fn finish(&mut self) -> PResult<()> {
        if self.at_end() {
            Ok(())
        } else {
            self.syntax(format!("unexpected `{}`", self.rest()))
        }
    }

    /// `{k=v, k=v}`; the braces are optional when empty.
    fn fields(&mut self) -> PResult<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        if self.peek_char() != Some('{') {
            return Ok(out);
        }
        self.expect("{")?;
        if self.eat("}") {
            return Ok(out);
        }
        loop {
            let (k, _) = self.word("a field name")?;
            self.expect("=")?;
            let v = self.value()?;
            out.insert(k.to_string(), v);
            if self.eat("}") {
                return Ok(out);
            }
            self.expect(",")?;
        }
    }
}

struct Parser {
    scenario: Scenario,
    last_time: Option<Time>,
    alpha: Option<Rational>,
    beta: Option<Rational>,
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    parse_scenario_with(text, Config::default())
}

/// Parses with `base` as the configuration that `config` lines override.
pub fn parse_scenario_with(text: &str, base: Config) -> Result<Scenario, ScenarioError> {
    let mut p = Parser {
        scenario: Scenario {
            config: base,
            ..Scenario::default()
        },
        last_time: None,
        alpha: None,
        beta: None,
    };
    for (i, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.trim().is_empty() {
            continue;
        }
        let mut c = Cursor {
            src: line,
            pos: 0,
            line: i + 1,
        };
        p.line(&mut c)?;
    }
    let cfg = &mut p.scenario.config;
    let alpha = p.alpha.unwrap_or_else(|| cfg.trust.alpha().clone());
    let beta = p.beta.unwrap_or_else(|| cfg.trust.beta().clone());
    cfg.trust = TrustParams::new(alpha, beta).map_err(|e| ScenarioError {
        line: 1,
        column: 1,
        kind: ScenarioErrorKind::Syntax(e.to_string()),
    })?;
    Ok(p.scenario)
}

impl Parser {
    fn line(&mut self, c: &mut Cursor<'_>) -> PResult<()> {
        let (head, col) = c.word("a statement")?;
        match head {
            "agents" => self.agents(c),
            "config" => self.config(c),
            "budget" => self.budget(c),
            "subst" => self.subst(c),
            "account" => self.account(c),
            "rule" => self.rule(c),
            "at" => self.at(c),
            other => Err(c.err_at(col, ScenarioErrorKind::Syntax(format!("unknown statement `{other}`")))),
        }
    }

    fn agents(&mut self, c: &mut Cursor<'_>) -> PResult<()> {
        loop {
            let (name, col) = c.word("an agent name")?;
            let id = AgentId::new(name).map_err(|e| c.err_at(col, ScenarioErrorKind::Syntax(e.to_string())))?;
            self.scenario.agents.insert(id);
            if !c.eat(",") {
                return c.finish();
            }
        }
    }

    fn agent(&self, c: &mut Cursor<'_>) -> PResult<AgentId> {
        let (name, col) = c.word("an agent")?;
        self.declared(c, name, col)
    }

    fn declared(&self, c: &Cursor<'_>, name: &str, col: usize) -> PResult<AgentId> {
        AgentId::new(name)
            .ok()
            .filter(|a| self.scenario.agents.contains(a))
            .ok_or_else(|| c.err_at(col, ScenarioErrorKind::UndeclaredAgent(name.to_string())))
    }

    fn agent_set(&self, c: &mut Cursor<'_>) -> PResult<BTreeSet<AgentId>> {
        c.expect("{")?;
        let mut out = BTreeSet::new();
        if c.eat("}") {
            return Ok(out);
        }
        loop {
            out.insert(self.agent(c)?);
            if c.eat("}") {
                return Ok(out);
            }
            c.expect(",")?;
        }
    }

    fn reserve(&mut self, c: &mut Cursor<'_>) -> PResult<String> {
        let (id, col) = c.word("an identifier")?;
        if !self.scenario.reserved_ids.insert(id.to_string()) {
            return Err(c.err_at(col, ScenarioErrorKind::Syntax(format!("identifier `{id}` used twice"))));
        }
        Ok(id.to_string())
    }

    fn config(&mut self, c: &mut Cursor<'_>) -> PResult<()> {
        let (key, col) = c.word("a configuration key")?;
        let cfg = &mut self.scenario.config;
        match key {
            "alpha" => self.alpha = Some(c.rational()?),
            "beta" => self.beta = Some(c.rational()?),
            "initial_trust" => {
                let v = c.rational()?;
                if !v.is_unit_interval() {
                    return c.syntax("initial trust must lie in [0,1]");
                }
                cfg.initial_trust = v;
            }
            "half_life" => {
                let first = c.peek_word().unwrap_or_default();
                let agent = if first.parse::<Rational>().is_err() {
                    Some(self.agent(c)?)
                } else {
                    None
                };
                let h = c.rational()?;
                if h <= Rational::zero() {
                    return c.syntax("half-life must be positive");
                }
                let cfg = &mut self.scenario.config;
                match agent {
                    Some(a) => {
                        cfg.erosion.per_holder.insert(a, h);
                    }
                    None => cfg.erosion.default_half_life = h,
                }
            }
            "drop_threshold" => {
                let v = c.rational()?;
                if !v.is_unit_interval() {
                    return c.syntax("drop threshold must lie in [0,1]");
                }
                cfg.erosion.drop_threshold = v;
            }
            "seed" => {
                let (w, col) = c.word("a seed")?;
                cfg.seed = w
                    .parse()
                    .map_err(|_| c.err_at(col, ScenarioErrorKind::Syntax(format!("bad seed `{w}`"))))?;
            }
            "end" => cfg.end = Some(c.time()?),
            other => {
                return Err(c.err_at(col, ScenarioErrorKind::Syntax(format!("unknown configuration key `{other}`"))))
            }
        }
        c.finish()
    }

    fn budget(&mut self, c: &mut Cursor<'_>) -> PResult<()> {
        let (name, _) = c.word("a budget name")?;
        let mut vars = Vec::new();
        if c.keyword("vars") {
            let (raw, _) = c.braced_raw()?;
            vars = raw.split(',').map(str::trim).filter(|v| !v.is_empty()).map(String::from).collect();
        }
        c.expect_keyword("entries")?;
        let entries = entry_list(c)?;
        let col = c.col();
        let t = Tuplix::new(vars, entries).map_err(|e| c.err_at(col, ScenarioErrorKind::Syntax(e.to_string())))?;
        self.scenario.budgets.insert(name.to_string(), t);
        c.finish()
    }

    fn subst(&mut self, c: &mut Cursor<'_>) -> PResult<()> {
        let (name, _) = c.word("a substitution name")?;
        let (raw, col) = c.braced_raw()?;
        let s = parse_substitution(raw).map_err(|e| c.err_at(col, ScenarioErrorKind::Syntax(e.to_string())))?;
        self.scenario.substitutions.insert(name.to_string(), s);
        c.finish()
    }

    fn account(&mut self, c: &mut Cursor<'_>) -> PResult<()> {
        let (name, _) = c.word("an account name")?;
        let mut values = Vec::new();
        for (label, e) in entry_list(c)? {
            let v = eval_arith(&e, &Env::new()).map_err(|err| {
                c.err_at(c.col(), ScenarioErrorKind::Syntax(format!("account entry `{label}`: {err}")))
            })?;
            values.push((label, v));
        }
        let col = c.col();
        let acc = Account::new(values).map_err(|e| c.err_at(col, ScenarioErrorKind::Syntax(e.to_string())))?;
        self.scenario.accounts.insert(name.to_string(), acc);
        c.finish()
    }

    fn rule(&mut self, c: &mut Cursor<'_>) -> PResult<()> {
        let (kind, col) = c.word("`imply` or `plan`")?;
        match kind {
            "imply" => self.imply_rule(c),
            "plan" => self.plan_rule(c),
            other => Err(c.err_at(col, ScenarioErrorKind::Syntax(format!("unknown rule kind `{other}`")))),
        }
    }

    fn imply_rule(&mut self, c: &mut Cursor<'_>) -> PResult<()> {
        let (pattern, _) = c.string()?;
        c.expect("=>")?;
        c.expect_keyword("promise")?;
        let (who, col) = c.word("a promiser")?;
        let promiser = if who == PROMISER_PLACEHOLDER {
            None
        } else {
            Some(self.declared(c, who, col)?)
        };
        c.expect("->")?;
        let promisee = self.agent(c)?;
        c.expect_keyword("scope")?;
        let scope = self.agent_set(c)?;
        c.expect_keyword("body")?;
        let (body, _) = c.string()?;
        let silent = c.keyword("silent");
        let col = c.col();
        let rule = ImplicationRule::new(pattern, promiser, promisee, scope, body, silent)
            .map_err(|e| c.err_at(col, ScenarioErrorKind::Syntax(e.to_string())))?;
        self.scenario.implication_rules.push(rule);
        c.finish()
    }

    fn plan_rule(&mut self, c: &mut Cursor<'_>) -> PResult<()> {
        let agent = self.agent(c)?;
        c.expect_keyword("when")?;
        let mut conditions = vec![self.condition(c)?];
        while c.keyword("and") {
            conditions.push(self.condition(c)?);
        }
        c.expect_keyword("then")?;
        let action = self.planned_action(c)?;
        self.scenario.planning_rules.push(PlanningRule {
            agent,
            conditions,
            action,
        });
        c.finish()
    }

    fn condition(&self, c: &mut Cursor<'_>) -> PResult<Condition> {
        let (kind, col) = c.word("a condition")?;
        Ok(match kind {
            "trust" => {
                c.expect("(")?;
                let promiser = self.agent(c)?;
                c.expect(")")?;
                let op = trust_cmp(c)?;
                Condition::Trust {
                    promiser,
                    op,
                    value: c.rational()?,
                }
            }
            "observed" => Condition::Observed { pattern: pattern(c)? },
            "verdict" => Condition::Verdict {
                promise: PromiseId(c.word("a promise id")?.0.to_string()),
                status: verdict_status(c, true)?,
            },
            "holds" => Condition::Holds {
                promise: PromiseId(c.word("a promise id")?.0.to_string()),
            },
            "issued" => Condition::Issued {
                promise: PromiseId(c.word("a promise id")?.0.to_string()),
            },
            "decided" => Condition::Decided {
                decision: DecisionId(c.word("a decision id")?.0.to_string()),
            },
            "expects" => Condition::Expects { text: c.string()?.0 },
            other => return Err(c.err_at(col, ScenarioErrorKind::Syntax(format!("unknown condition `{other}`")))),
        })
    }

    fn planned_action(&self, c: &mut Cursor<'_>) -> PResult<PlannedAction> {
        let (kind, col) = c.word("an action")?;
        Ok(match kind {
            "perform" => PlannedAction::Perform { content: c.string()?.0 },
            "emit" => {
                let (k, _) = c.word("an event kind")?;
                let mut event = Event::new(k);
                event.fields = c.fields()?;
                PlannedAction::Emit { event }
            }
            "refuse" => {
                c.expect_keyword("offers")?;
                c.expect_keyword("from")?;
                PlannedAction::RefuseOffersFrom { agent: self.agent(c)? }
            }
            other => return Err(c.err_at(col, ScenarioErrorKind::Syntax(format!("unknown action `{other}`")))),
        })
    }

    fn at(&mut self, c: &mut Cursor<'_>) -> PResult<()> {
        c.skip_ws();
        let col = c.col();
        let time = c.time()?;
        if let Some(previous) = self.last_time.filter(|&p| p > time) {
            return Err(c.err_at(col, ScenarioErrorKind::TimeRegression { time, previous }));
        }
        self.last_time = Some(time);
        let (verb, vcol) = c.word("an action")?;
        let action = match verb {
            "promise" => ScriptAction::Promise(Box::new(self.promise(c)?)),
            "decide" => ScriptAction::Decide(Box::new(self.decide(c)?)),
            "offer" => ScriptAction::Offer(Box::new(self.offer(c)?)),
            "accept" => {
                let offer = c.word("an offer id")?.0.to_string();
                c.expect_keyword("by")?;
                ScriptAction::Accept {
                    offer,
                    by: self.agent(c)?,
                }
            }
            "event" => {
                let (k, _) = c.word("an event kind")?;
                let mut event = Event::new(k);
                event.fields = c.fields()?;
                ScriptAction::Event(event)
            }
            "observe" => {
                if c.keyword("account") {
                    let (name, col) = c.word("an account name")?;
                    if !self.scenario.accounts.contains_key(name) {
                        return Err(c.err_at(col, ScenarioErrorKind::Syntax(format!("unknown account `{name}`"))));
                    }
                    ScriptAction::Observe(Observation::Account(name.to_string()))
                } else {
                    let (var, _) = c.word("a variable")?;
                    c.expect("=")?;
                    ScriptAction::Observe(Observation::Binding {
                        var: var.to_string(),
                        value: c.rational()?,
                    })
                }
            }
            "verdict" => {
                let promise = PromiseId(c.word("a promise id")?.0.to_string());
                let status = verdict_status(c, false)?;
                let mut degree = Rational::one();
                let mut by = None;
                loop {
                    if c.keyword("degree") {
                        degree = c.rational()?;
                        if !degree.is_unit_interval() {
                            return c.syntax("degree must lie in [0,1]");
                        }
                    } else if c.keyword("by") {
                        by = Some(self.agent(c)?);
                    } else {
                        break;
                    }
                }
                ScriptAction::Verdict {
                    promise,
                    status,
                    degree,
                    by,
                }
            }
            "forget" => ScriptAction::Forget(self.agent(c)?),
            "tick" => ScriptAction::Tick,
            other => return Err(c.err_at(vcol, ScenarioErrorKind::Syntax(format!("unknown action `{other}`")))),
        };
        c.finish()?;
        self.scenario.actions.push(Scripted {
            time,
            line: c.line,
            action,
        });
        Ok(())
    }

    fn promise(&mut self, c: &mut Cursor<'_>) -> PResult<PromiseSpec> {
        let promiser = self.agent(c)?;
        c.expect("->")?;
        let pcol = c.col();
        let promisee = self.agent(c)?;
        let mut id = None;
        let mut scope = None;
        let mut body: Option<PromiseBody> = None;
        let mut deadline = None;
        let mut quantity = Vec::new();
        let (mut silent, mut implied_by, mut promissory, mut internal) = (false, None, false, false);
        let mut apparent = None;
        let mut underlying: Option<Option<String>> = None;
        let (mut committed, mut manifest) = (true, false);
        while let Some(kw) = c.peek_word() {
            let col = c.col();
            c.word("a clause")?;
            match kw {
                "as" => id = Some(PromiseId(self.reserve(c)?)),
                "scope" => scope = Some(self.agent_set(c)?),
                "body" => body = Some(self.payload(c)?),
                "deadline" => deadline = Some(c.time()?),
                "quantity" => quantity = quantities(c)?,
                "silent" => silent = true,
                "implied" => implied_by = Some(PromiseId(c.word("a promise id")?.0.to_string())),
                "promissory" => promissory = true,
                "internal" => internal = true,
                "apparent" => apparent = Some(c.string()?.0),
                "underlying" => {
                    underlying = Some(if c.keyword("none") { None } else { Some(c.string()?.0) });
                }
                "incidental" => committed = false,
                "manifest" => manifest = true,
                other => {
                    return Err(c.err_at(col, ScenarioErrorKind::Syntax(format!("unknown promise clause `{other}`"))))
                }
            }
        }
        let Some(mut body) = body else {
            return c.syntax("promise needs a `body`");
        };
        body.deadline = deadline;
        for (name, value, unit) in quantity {
            body = body.with_quantity(name, value, unit);
        }
        let scope = match (scope, internal) {
            (Some(s), _) => s,
            (None, true) => BTreeSet::from([promiser.clone()]),
            (None, false) => return c.syntax("promise needs a `scope`"),
        };
        if internal && (promisee != promiser || scope.len() != 1) {
            return Err(c.err_at(
                pcol,
                ScenarioErrorKind::Syntax("an internal promise is made to the promiser alone".into()),
            ));
        }
        let mut draft = PromiseDraft::new(promiser, promisee, scope, body);
        if let Some(a) = apparent {
            draft.underlying_intention = Some(a.clone());
            draft.apparent_intention = a;
        }
        if let Some(u) = underlying {
            draft.underlying_intention = u;
        }
        draft.committed = committed;
        draft.discrepancy_public = manifest;
        draft
            .validate()
            .map_err(|e| c.err_at(pcol, ScenarioErrorKind::Syntax(e.to_string())))?;
        Ok(PromiseSpec {
            id,
            draft,
            silent,
            implied_by,
            promissory,
            internal,
        })
    }

    fn decide(&mut self, c: &mut Cursor<'_>) -> PResult<DecideSpec> {
        let decider = self.agent(c)?;
        let mut spec = DecideSpec {
            id: None,
            decider,
            role: "decider".into(),
            actor: None,
            internal: false,
            trigger: None,
            promissory: false,
            deactivates: None,
            content: PromiseBody::opaque(""),
            jurisdiction: BTreeSet::new(),
        };
        let mut has_body = false;
        let mut has_jurisdiction = false;
        let mut deadline = None;
        let mut quantity = Vec::new();
        while let Some(kw) = c.peek_word() {
            let col = c.col();
            c.word("a clause")?;
            match kw {
                "as" => spec.id = Some(self.reserve(c)?),
                "role" => spec.role = c.value()?,
                "actor" => spec.actor = Some(self.agent(c)?),
                "internal" => spec.internal = true,
                "trigger" => spec.trigger = Some(pattern(c)?),
                "promissory" => spec.promissory = true,
                "deactivates" => spec.deactivates = Some(IdoccId(c.word("an idocc id")?.0.to_string())),
                "body" => {
                    spec.content = self.payload(c)?;
                    has_body = true;
                }
                "deadline" => deadline = Some(c.time()?),
                "quantity" => quantity = quantities(c)?,
                "jurisdiction" => {
                    spec.jurisdiction = self.agent_set(c)?;
                    has_jurisdiction = true;
                }
                other => {
                    return Err(c.err_at(col, ScenarioErrorKind::Syntax(format!("unknown decision clause `{other}`"))))
                }
            }
        }
        if !has_body {
            return c.syntax("decision needs a `body`");
        }
        if !spec.internal && !has_jurisdiction {
            return c.syntax("external decision needs a `jurisdiction`");
        }
        if spec.internal && has_jurisdiction {
            return c.syntax("an internal decision has no jurisdiction");
        }
        if !spec.internal && spec.trigger.is_some() {
            return c.syntax("only internal decisions carry a trigger");
        }
        spec.content.deadline = deadline;
        for (name, value, unit) in quantity {
            spec.content = spec.content.with_quantity(name, value, unit);
        }
        Ok(spec)
    }

    fn offer(&mut self, c: &mut Cursor<'_>) -> PResult<OfferSpec> {
        let promiser = self.agent(c)?;
        c.expect("->")?;
        let pcol = c.col();
        let promisee = self.agent(c)?;
        let (mut id, mut scope, mut body, mut condition, mut deadline) = (None, None, None, None, None);
        while let Some(kw) = c.peek_word() {
            let col = c.col();
            c.word("a clause")?;
            match kw {
                "as" => id = Some(self.reserve(c)?),
                "scope" => scope = Some(self.agent_set(c)?),
                "body" => body = Some(self.payload(c)?),
                "condition" => condition = Some(c.string()?.0),
                "deadline" => deadline = Some(c.time()?),
                other => {
                    return Err(c.err_at(col, ScenarioErrorKind::Syntax(format!("unknown offer clause `{other}`"))))
                }
            }
        }
        let (Some(scope), Some(mut body)) = (scope, body) else {
            return c.syntax("offer needs a `scope` and a `body`");
        };
        body.deadline = deadline;
        let draft = PromiseDraft::new(promiser, promisee, scope, body);
        draft
            .validate()
            .map_err(|e| c.err_at(pcol, ScenarioErrorKind::Syntax(e.to_string())))?;
        Ok(OfferSpec {
            id,
            draft,
            condition: condition.unwrap_or_else(|| "acceptance by the promisee".into()),
        })
    }

    fn payload(&self, c: &mut Cursor<'_>) -> PResult<PromiseBody> {
        if c.peek_char() == Some('"') {
            return Ok(PromiseBody::opaque(c.string()?.0));
        }
        let (kind, col) = c.word("a body")?;
        let quality = match kind {
            "meadow" => {
                let (src, scol) = c.string()?;
                let e = parse_expr(&src).map_err(|e| {
                    c.err_at(scol + e.column.saturating_sub(1), ScenarioErrorKind::Syntax(e.message.clone()))
                })?;
                Quality::Meadow(e)
            }
            "transfer" => {
                let amount = c.rational()?;
                c.expect_keyword("from")?;
                let from = c.word("an account")?.0.to_string();
                c.expect_keyword("to")?;
                let to = c.word("an account")?.0.to_string();
                let mut confirmations = 1;
                if c.keyword("confirmations") {
                    let (w, col) = c.word("a count")?;
                    confirmations = w
                        .parse()
                        .ok()
                        .filter(|&n| n > 0)
                        .ok_or_else(|| c.err_at(col, ScenarioErrorKind::Syntax("bad confirmation count".into())))?;
                }
                Quality::Transfer(TransferClaim {
                    amount,
                    from,
                    to,
                    confirmations,
                })
            }
            "budget" => {
                let budget = self.budget_ref(c)?;
                let shortfall = if c.keyword("shortfall") {
                    let s = c.rational()?;
                    if s.is_negative() {
                        return c.syntax("shortfall must be nonnegative");
                    }
                    s
                } else {
                    Rational::zero()
                };
                Quality::Budget(BudgetClaim { budget, shortfall })
            }
            other => return Err(c.err_at(col, ScenarioErrorKind::Syntax(format!("unknown body kind `{other}`")))),
        };
        Ok(PromiseBody::new(quality))
    }

    fn budget_ref(&self, c: &mut Cursor<'_>) -> PResult<BudgetRef> {
        let (name, col) = c.word("a budget reference")?;
        if c.eat("(") {
            if !self.scenario.substitutions.contains_key(name) {
                return Err(c.err_at(col, ScenarioErrorKind::Syntax(format!("unknown substitution `{name}`"))));
            }
            let inner = self.budget_ref(c)?;
            c.expect(")")?;
            Ok(BudgetRef::Apply {
                subst: name.to_string(),
                inner: Box::new(inner),
            })
        } else if self.scenario.budgets.contains_key(name) {
            Ok(BudgetRef::Named(name.to_string()))
        } else {
            Err(c.err_at(col, ScenarioErrorKind::Syntax(format!("unknown budget `{name}`"))))
        }
    }
}

fn entry_list(c: &mut Cursor<'_>) -> PResult<Vec<(String, Expr)>> {
    let (raw, col) = c.braced_raw()?;
    let mut out = Vec::new();
    let mut offset = 0;
    for part in raw.split(';') {
        let here = col + raw[..offset].chars().count();
        offset += part.len() + 1;
        if part.trim().is_empty() {
            continue;
        }
        let Some((label, term)) = part.split_once(':') else {
            return Err(c.err_at(here, ScenarioErrorKind::Syntax(format!("expected `label: term` in `{}`", part.trim()))));
        };
        let e = parse_expr(term).map_err(|e| {
            c.err_at(
                here + label.chars().count() + e.column,
                ScenarioErrorKind::Syntax(e.message.clone()),
            )
        })?;
        out.push((label.trim().to_string(), e));
    }
    Ok(out)
}

fn quantities(c: &mut Cursor<'_>) -> PResult<Vec<(String, Rational, String)>> {
    let (raw, col) = c.braced_raw()?;
    let mut out = Vec::new();
    for part in raw.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || ScenarioError {
            line: c.line,
            column: col,
            kind: ScenarioErrorKind::Syntax(format!("expected `name = value [unit]` in `{part}`")),
        };
        let (name, rhs) = part.split_once('=').ok_or_else(bad)?;
        let mut words = rhs.split_whitespace();
        let value: Rational = words.next().and_then(|w| w.parse().ok()).ok_or_else(bad)?;
        let unit = words.collect::<Vec<_>>().join(" ");
        out.push((name.trim().to_string(), value, unit));
    }
    Ok(out)
}

fn pattern(c: &mut Cursor<'_>) -> PResult<EventPattern> {
    let (kind, _) = c.word("an event kind")?;
    let mut p = EventPattern::new(kind);
    p.fields = c.fields()?;
    Ok(p)
}

fn verdict_status(c: &mut Cursor<'_>, allow_pending: bool) -> PResult<VerdictStatus> {
    let (w, col) = c.word("`kept` or `broken`")?;
    match w {
        "kept" => Ok(VerdictStatus::Kept),
        "broken" => Ok(VerdictStatus::Broken),
        "pending" if allow_pending => Ok(VerdictStatus::Pending),
        other => Err(c.err_at(col, ScenarioErrorKind::Syntax(format!("unknown verdict `{other}`")))),
    }
}

fn trust_cmp(c: &mut Cursor<'_>) -> PResult<TrustCmp> {
    for (sym, op) in [
        ("<=", TrustCmp::Le),
        (">=", TrustCmp::Ge),
        ("!=", TrustCmp::Ne),
        ("==", TrustCmp::Eq),
        ("<", TrustCmp::Lt),
        (">", TrustCmp::Gt),
        ("=", TrustCmp::Eq),
    ] {
        if c.eat(sym) {
            return Ok(op);
        }
    }
    c.syntax("expected a comparison")
}
