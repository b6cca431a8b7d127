//! `<think>reasoning</think><answer><step n="1">Title: narrative Targets: a; b</step>…</answer>`
//!
//! Step bodies and reasoning are XML-escaped (`&`, `<`, `>`, `"`). A step
//! without targets renders `Targets: none`.

use crate::text::extract_entities;

use super::{plan_hash, tidy, PlanError, PlanStep, StepAction, TroubleshootingPlan};

const TARGETS: &str = "Targets:";

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> String {
    s.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&amp;", "&")
}

pub fn render_step_text(step: &PlanStep) -> String {
    let mut parts = vec![format!("{}:", step.action.title())];
    if !step.narrative.is_empty() {
        parts.push(step.narrative.clone());
    }
    let targets = if step.targets.is_empty() {
        "none".to_string()
    } else {
        step.targets.join("; ")
    };
    parts.push(format!("{TARGETS} {targets}"));
    parts.join(" ")
}

pub fn render_plan_text(reasoning: &str, steps: &[PlanStep]) -> String {
    let mut out = format!("<think>{}</think><answer>", escape(reasoning));
    for s in steps {
        out.push_str(&format!(
            "<step n=\"{}\">{}</step>",
            s.ordinal,
            escape(&render_step_text(s))
        ));
    }
    out.push_str("</answer>");
    out
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.text[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn error(&self, expected: &str) -> PlanError {
        PlanError::MalformedTags {
            offset: self.pos,
            expected: expected.to_string(),
        }
    }

    fn eat(&mut self, lit: &str) -> bool {
        if self.rest().starts_with(lit) {
            self.pos += lit.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, lit: &str) -> Result<(), PlanError> {
        if self.eat(lit) {
            Ok(())
        } else {
            Err(self.error(lit))
        }
    }

    /// Text up to `close`, which is consumed. Nested `<` is rejected.
    fn until(&mut self, close: &str) -> Result<&'a str, PlanError> {
        let rest = self.rest();
        let end = rest.find(close).ok_or_else(|| self.error(close))?;
        if let Some(lt) = rest[..end].find('<') {
            self.pos += lt;
            return Err(self.error(close));
        }
        self.pos += end + close.len();
        Ok(&rest[..end])
    }
}

fn split_step(body: &str) -> (Option<StepAction>, String, Option<Vec<String>>) {
    let (head, targets) = match body.rfind(&format!(" {TARGETS}")) {
        Some(i) => (&body[..i], Some(body[i + 1 + TARGETS.len()..].trim())),
        None => match body.strip_prefix(TARGETS) {
            Some(t) => ("", Some(t.trim())),
            None => (body, None),
        },
    };
    let targets = targets.map(|t| {
        if t == "none" || t.is_empty() {
            Vec::new()
        } else {
            t.split(';').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect()
        }
    });
    let (title, narrative) = match head.split_once(':') {
        Some((t, n)) if t.split_whitespace().count() <= 10 => (Some(t.trim()), n.trim()),
        _ => (None, head.trim()),
    };
    let canonical = title.and_then(StepAction::from_title);
    let action = canonical.or_else(|| title.and_then(StepAction::classify));
    let narrative = match (canonical, title) {
        (None, Some(t)) => format!("{t}: {narrative}"),
        _ => narrative.to_string(),
    };
    (action, tidy(&narrative), targets)
}

/// Parses tagged plan text. Steps without a `Targets:` clause get their
/// targets from entity extraction; steps whose title is not a canonical
/// one are classified by keyword, falling back to `escalate`.
pub fn parse_plan_text(raw: &str) -> Result<TroubleshootingPlan, PlanError> {
    let mut c = Cursor { text: raw, pos: 0 };
    c.skip_ws();
    let mut reasoning = String::new();
    if c.eat("<think>") {
        reasoning = tidy(&unescape(c.until("</think>")?));
        c.skip_ws();
    }
    c.expect("<answer>")?;
    let mut steps = Vec::new();
    loop {
        c.skip_ws();
        if c.eat("</answer>") {
            break;
        }
        if !c.eat("<step n=\"") {
            return Err(c.error("<step n=\" or </answer>"));
        }
        let n_start = c.pos;
        let digits = c.rest().bytes().take_while(u8::is_ascii_digit).count();
        let ordinal: u32 = c.rest()[..digits].parse().map_err(|_| PlanError::MalformedTags {
            offset: n_start,
            expected: "step ordinal".into(),
        })?;
        c.pos += digits;
        c.expect("\">")?;
        let body = unescape(c.until("</step>")?);
        let (action, narrative, targets) = split_step(&tidy(&body));
        let action = action
            .or_else(|| StepAction::classify(&narrative))
            .unwrap_or(StepAction::Escalate);
        let targets = targets.unwrap_or_else(|| {
            extract_entities(&narrative).into_iter().map(|e| e.name).collect()
        });
        steps.push(PlanStep {
            ordinal,
            action,
            targets,
            narrative,
        });
    }
    c.skip_ws();
    if c.pos != raw.len() {
        return Err(c.error("end of text"));
    }
    if steps.is_empty() {
        return Err(PlanError::EmptyPlanBody);
    }
    Ok(TroubleshootingPlan {
        plan_id: format!("parsed-{}", plan_hash(&[raw])),
        intent_ref: String::new(),
        reasoning,
        steps,
        source_chunks: Vec::new(),
        raw_text: raw.to_string(),
    })
}
