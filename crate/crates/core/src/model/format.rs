//! Reader and writer for the multi-agent `.dpomdp` text format.
//!
//! Supported: `agents`, `discount`, `values`, `states`, `start` (plain,
//! `include`, `exclude`), per-agent `actions` and `observations` lines, and
//! `T:`/`O:`/`R:` entries in single-value, row and matrix forms. Identifiers
//! may be names, integer indices or `*`. A joint action or observation is
//! either one token per agent or a single flat index. Later entries override
//! earlier ones.

use super::{Agent, DecPomdp, ModelParts};
use crate::error::{Error, Result};

const DEFAULT_HORIZON: usize = 10;

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Word(String),
    Colon,
    Newline,
}

#[derive(Debug, Clone)]
struct Token {
    kind: Kind,
    line: usize,
    col: usize,
}

fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = line.split('#').next().unwrap_or("");
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() {
                i += 1;
            } else if c == ':' {
                out.push(Token {
                    kind: Kind::Colon,
                    line: line_no,
                    col: i + 1,
                });
                i += 1;
            } else {
                let start = i;
                while i < chars.len() && !chars[i].is_whitespace() && chars[i] != ':' {
                    i += 1;
                }
                out.push(Token {
                    kind: Kind::Word(chars[start..i].iter().collect()),
                    line: line_no,
                    col: start + 1,
                });
            }
        }
        out.push(Token {
            kind: Kind::Newline,
            line: line_no,
            col: chars.len() + 1,
        });
    }
    out
}

fn syntax(tok: &Token, message: impl Into<String>) -> Error {
    Error::Syntax {
        line: tok.line,
        column: tok.col,
        message: message.into(),
    }
}

fn word(tok: &Token) -> &str {
    match &tok.kind {
        Kind::Word(w) => w,
        _ => "",
    }
}

fn number(tok: &Token) -> Result<f64> {
    let w = word(tok);
    match w.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(syntax(tok, format!("expected a number, found `{w}`"))),
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Field {
    JointAction,
    State,
    JointObservation,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    T,
    O,
    R,
}

struct RewardEntry {
    actions: Vec<usize>,
    states: Vec<usize>,
    next: Vec<usize>,
    obs: Vec<usize>,
    values: Vec<f64>,
    specified: usize,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    agent_names: Option<Vec<String>>,
    states: Option<Vec<String>>,
    actions: Vec<Vec<String>>,
    observations: Vec<Vec<String>>,
    start: Option<Vec<f64>>,
    discount: f64,
    cost: bool,
    transition: Vec<f64>,
    observation: Vec<f64>,
    rewards: Vec<RewardEntry>,
    joint_sizes: Option<(usize, usize)>,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn last(&self) -> Token {
        self.toks.last().cloned().unwrap_or(Token {
            kind: Kind::Newline,
            line: 1,
            col: 1,
        })
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn skip_newlines(&mut self) {
        while matches!(self.peek(), Some(t) if t.kind == Kind::Newline) {
            self.pos += 1;
        }
    }

    fn expect_colon(&mut self) -> Result<()> {
        match self.next() {
            Some(t) if t.kind == Kind::Colon => Ok(()),
            Some(t) => Err(syntax(&t, "expected `:`")),
            None => Err(syntax(&self.last(), "expected `:`, found end of input")),
        }
    }

    /// Tokens up to the end of the current line, consuming the newline.
    fn rest_of_line(&mut self) -> Vec<Token> {
        let mut out = Vec::new();
        while let Some(t) = self.next() {
            if t.kind == Kind::Newline {
                break;
            }
            out.push(t);
        }
        out
    }

    fn line_words(&mut self) -> Result<Vec<Token>> {
        let toks = self.rest_of_line();
        if let Some(t) = toks.iter().find(|t| t.kind == Kind::Colon) {
            return Err(syntax(t, "unexpected `:`"));
        }
        Ok(toks)
    }

    /// Reads `count` numbers starting with `inline`, continuing onto following lines.
    fn numbers(&mut self, inline: Vec<Token>, count: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(count);
        for t in &inline {
            if out.len() == count {
                return Err(syntax(t, "too many values"));
            }
            out.push(number(t)?);
        }
        while out.len() < count {
            match self.peek().cloned() {
                Some(t) if t.kind == Kind::Newline => self.pos += 1,
                Some(t) if t.kind == Kind::Colon => {
                    return Err(syntax(&t, format!("expected {count} values")))
                }
                Some(t) => {
                    out.push(number(&t)?);
                    self.pos += 1;
                }
                None => {
                    return Err(syntax(
                        &self.last(),
                        format!("expected {count} values, found end of input"),
                    ))
                }
            }
        }
        Ok(out)
    }

    /// Looks at the first data token: returns it if it is a keyword like `uniform`.
    fn data_keyword(&mut self, inline: &[Token]) -> Option<(String, Token)> {
        let tok = if let Some(t) = inline.first() {
            t.clone()
        } else {
            let mut p = self.pos;
            while matches!(self.toks.get(p), Some(t) if t.kind == Kind::Newline) {
                p += 1;
            }
            self.toks.get(p)?.clone()
        };
        let w = word(&tok).to_string();
        if w == "uniform" || w == "identity" {
            if inline.is_empty() {
                self.skip_newlines();
                self.pos += 1;
            }
            Some((w, tok))
        } else {
            None
        }
    }

    fn names_from(words: &[Token]) -> Result<Vec<String>> {
        if words.len() == 1 {
            if let Ok(k) = word(&words[0]).parse::<usize>() {
                if k == 0 {
                    return Err(syntax(&words[0], "count must be positive"));
                }
                return Ok((0..k).map(|i| i.to_string()).collect());
            }
        }
        Ok(words.iter().map(|t| word(t).to_string()).collect())
    }

    fn n_agents(&self, tok: &Token) -> Result<usize> {
        self.agent_names
            .as_ref()
            .map(|a| a.len())
            .ok_or_else(|| syntax(tok, "`agents` must be declared first"))
    }

    fn state_names(&self, tok: &Token) -> Result<&[String]> {
        self.states
            .as_deref()
            .ok_or_else(|| syntax(tok, "`states` must be declared first"))
    }

    fn resolve(names: &[String], tok: &Token, what: &str) -> Result<Vec<usize>> {
        let w = word(tok);
        if w == "*" {
            return Ok((0..names.len()).collect());
        }
        if let Some(i) = names.iter().position(|n| n == w) {
            return Ok(vec![i]);
        }
        match w.parse::<usize>() {
            Ok(i) if i < names.len() => Ok(vec![i]),
            _ => Err(syntax(tok, format!("unknown {what} `{w}`"))),
        }
    }

    fn resolve_joint(&self, toks: &[Token], observations: bool) -> Result<Vec<usize>> {
        let lists = if observations {
            &self.observations
        } else {
            &self.actions
        };
        let what = if observations {
            "observation"
        } else {
            "action"
        };
        let n = lists.len();
        let size: usize = lists.iter().map(|l| l.len()).product();
        if toks.len() == 1 && n > 1 {
            let w = word(&toks[0]);
            if w == "*" {
                return Ok((0..size).collect());
            }
            return match w.parse::<usize>() {
                Ok(i) if i < size => Ok(vec![i]),
                _ => Err(syntax(&toks[0], format!("unknown joint {what} `{w}`"))),
            };
        }
        if toks.len() != n {
            return Err(syntax(
                &toks[0],
                format!("expected {n} components for a joint {what}"),
            ));
        }
        let mut flat = vec![0usize];
        for (i, t) in toks.iter().enumerate() {
            let comps = Self::resolve(&lists[i], t, what)?;
            let radix = lists[i].len();
            flat = flat
                .iter()
                .flat_map(|&f| comps.iter().map(move |&c| f * radix + c))
                .collect();
        }
        Ok(flat)
    }

    fn ensure_tensors(&mut self, tok: &Token) -> Result<(usize, usize, usize)> {
        let ns = self.state_names(tok)?.len();
        let n = self.n_agents(tok)?;
        if self.actions.len() != n || self.observations.len() != n {
            return Err(syntax(
                tok,
                "`actions` and `observations` must be declared for every agent first",
            ));
        }
        let na: usize = self.actions.iter().map(|l| l.len()).product();
        let no: usize = self.observations.iter().map(|l| l.len()).product();
        if self.joint_sizes.is_none() {
            self.transition = vec![0.0; na * ns * ns];
            self.observation = vec![0.0; na * ns * no];
            self.joint_sizes = Some((na, no));
        }
        Ok((ns, na, no))
    }

    fn per_agent_lists(&mut self, kw: &Token) -> Result<Vec<Vec<String>>> {
        let n = self.n_agents(kw)?;
        self.expect_colon()?;
        let mut lists = Vec::with_capacity(n);
        let first = self.line_words()?;
        if !first.is_empty() {
            lists.push(Self::names_from(&first)?);
        }
        while lists.len() < n {
            self.skip_newlines();
            let words = self.line_words()?;
            if words.is_empty() {
                return Err(syntax(&self.last(), "missing per-agent list"));
            }
            lists.push(Self::names_from(&words)?);
        }
        Ok(lists)
    }

    fn parse_start(&mut self, kw: &Token) -> Result<()> {
        let ns = self.state_names(kw)?.len();
        let mode = match self.peek() {
            Some(t) if matches!(word(t), "include" | "exclude") => {
                let m = word(t).to_string();
                self.pos += 1;
                Some(m)
            }
            _ => None,
        };
        self.expect_colon()?;
        let mut words = self.line_words()?;
        if words.is_empty() && mode.is_none() {
            self.skip_newlines();
            if matches!(self.peek(), Some(t) if word(t) == "uniform") {
                words = self.line_words()?;
            }
        }
        let names = self.states.clone().unwrap_or_default();
        let belief = if let Some(mode) = mode {
            let mut member = vec![false; ns];
            for t in &words {
                for s in Self::resolve(&names, t, "state")? {
                    member[s] = true;
                }
            }
            if mode == "exclude" {
                member.iter_mut().for_each(|m| *m = !*m);
            }
            let k = member.iter().filter(|&&m| m).count();
            if k == 0 {
                return Err(syntax(kw, "start distribution has empty support"));
            }
            member
                .iter()
                .map(|&m| if m { 1.0 / k as f64 } else { 0.0 })
                .collect()
        } else if words.len() == 1 && word(&words[0]) == "uniform" {
            vec![1.0 / ns as f64; ns]
        } else if words.len() == 1 && ns > 1 {
            let s = Self::resolve(&names, &words[0], "state")?;
            if s.len() != 1 {
                return Err(syntax(&words[0], "start state must be a single state"));
            }
            let mut b = vec![0.0; ns];
            b[s[0]] = 1.0;
            b
        } else {
            self.numbers(words, ns)?
        };
        self.start = Some(belief);
        Ok(())
    }

    fn parse_entry(&mut self, section: Section, kw: &Token) -> Result<()> {
        self.expect_colon()?;
        let (ns, _, no) = self.ensure_tensors(kw)?;
        let n = self.actions.len();
        let layout: &[Field] = match section {
            Section::T => &[Field::JointAction, Field::State, Field::State],
            Section::O => &[Field::JointAction, Field::State, Field::JointObservation],
            Section::R => &[
                Field::JointAction,
                Field::State,
                Field::State,
                Field::JointObservation,
            ],
        };
        let line = self.rest_of_line();
        let mut groups: Vec<Vec<Token>> = vec![Vec::new()];
        for t in line {
            if t.kind == Kind::Colon {
                groups.push(Vec::new());
            } else {
                groups.last_mut().unwrap().push(t);
            }
        }
        if groups.len() > 1 && groups.last().unwrap().is_empty() {
            groups.pop();
        }
        let mut fields: Vec<Vec<Token>> = Vec::new();
        let mut inline: Vec<Token> = Vec::new();
        let keyword_data = groups.len() > 1
            && matches!(groups.last().map(|g| g.as_slice()), Some([t]) if matches!(word(t), "uniform" | "identity"));
        if keyword_data {
            inline = groups.pop().unwrap();
        }
        let keyword_inline = std::mem::take(&mut inline);
        for group in groups {
            if !inline.is_empty() {
                return Err(syntax(&inline[0], "unexpected `:` after values"));
            }
            if fields.len() == layout.len() {
                inline = group;
                continue;
            }
            let Some(first) = group.first().cloned() else {
                return Err(syntax(kw, "empty field in entry"));
            };
            match layout[fields.len()] {
                Field::JointAction => fields.push(group),
                Field::State => {
                    inline = group[1..].to_vec();
                    fields.push(vec![first]);
                }
                Field::JointObservation => {
                    let take = if group.len() == 1 {
                        1
                    } else {
                        n.min(group.len())
                    };
                    inline = group[take..].to_vec();
                    fields.push(group[..take].to_vec());
                }
            }
        }
        if !keyword_inline.is_empty() {
            inline = keyword_inline;
        }
        let k = fields.len();
        if fields[0].is_empty() {
            return Err(syntax(kw, "missing joint action"));
        }
        let actions = self.resolve_joint(&fields[0], false)?;
        let names = self.states.clone().unwrap_or_default();
        let states_at = |i: usize| -> Result<Vec<usize>> {
            match fields.get(i) {
                Some(f) => Self::resolve(&names, &f[0], "state"),
                None => Ok((0..ns).collect()),
            }
        };

        match section {
            Section::T => {
                let from = states_at(1)?;
                let to = states_at(2)?;
                let block: Vec<f64> = match k {
                    3 => self.numbers(inline, 1)?,
                    2 => match self.data_keyword(&inline) {
                        Some((w, _)) if w == "uniform" => vec![1.0 / ns as f64; ns],
                        Some((_, t)) => return Err(syntax(&t, "`identity` needs a matrix entry")),
                        None => self.numbers(inline, ns)?,
                    },
                    _ => match self.data_keyword(&inline) {
                        Some((w, _)) if w == "uniform" => vec![1.0 / ns as f64; ns * ns],
                        Some(_) => (0..ns * ns)
                            .map(|i| if i / ns == i % ns { 1.0 } else { 0.0 })
                            .collect(),
                        None => self.numbers(inline, ns * ns)?,
                    },
                };
                for &a in &actions {
                    for &s in &from {
                        for &s2 in &to {
                            let v = match k {
                                3 => block[0],
                                2 => block[s2],
                                _ => block[s * ns + s2],
                            };
                            self.transition[(a * ns + s) * ns + s2] = v;
                        }
                    }
                }
            }
            Section::O => {
                let to = states_at(1)?;
                let obs = match fields.get(2) {
                    Some(f) => self.resolve_joint(f, true)?,
                    None => (0..no).collect(),
                };
                let block: Vec<f64> = match k {
                    3 => self.numbers(inline, 1)?,
                    2 => match self.data_keyword(&inline) {
                        Some((w, _)) if w == "uniform" => vec![1.0 / no as f64; no],
                        Some((_, t)) => return Err(syntax(&t, "`identity` is not valid here")),
                        None => self.numbers(inline, no)?,
                    },
                    _ => match self.data_keyword(&inline) {
                        Some((w, _)) if w == "uniform" => vec![1.0 / no as f64; ns * no],
                        Some((_, t)) => return Err(syntax(&t, "`identity` is not valid here")),
                        None => self.numbers(inline, ns * no)?,
                    },
                };
                for &a in &actions {
                    for &s2 in &to {
                        for &o in &obs {
                            let v = match k {
                                3 => block[0],
                                2 => block[o],
                                _ => block[s2 * no + o],
                            };
                            self.observation[(a * ns + s2) * no + o] = v;
                        }
                    }
                }
            }
            Section::R => {
                if k < 2 {
                    return Err(syntax(kw, "reward entries need at least a start state"));
                }
                let states = states_at(1)?;
                let next = states_at(2)?;
                let obs = match fields.get(3) {
                    Some(f) => self.resolve_joint(f, true)?,
                    None => (0..no).collect(),
                };
                let count = match k {
                    4 => 1,
                    3 => no,
                    _ => ns * no,
                };
                let values = self.numbers(inline, count)?;
                self.rewards.push(RewardEntry {
                    actions,
                    states,
                    next,
                    obs,
                    values,
                    specified: k,
                });
            }
        }
        Ok(())
    }

    fn run(&mut self) -> Result<()> {
        loop {
            self.skip_newlines();
            let Some(kw) = self.next() else { break };
            match word(&kw) {
                "agents" => {
                    self.expect_colon()?;
                    let words = self.line_words()?;
                    if words.is_empty() {
                        return Err(syntax(&kw, "missing agent count"));
                    }
                    self.agent_names = Some(Self::names_from(&words)?);
                }
                "discount" => {
                    self.expect_colon()?;
                    let words = self.line_words()?;
                    self.discount = self.numbers(words, 1)?[0];
                }
                "values" => {
                    self.expect_colon()?;
                    let words = self.line_words()?;
                    match words.first().map(word) {
                        Some("reward") => self.cost = false,
                        Some("cost") => self.cost = true,
                        _ => return Err(syntax(&kw, "expected `reward` or `cost`")),
                    }
                }
                "states" => {
                    self.expect_colon()?;
                    let words = self.line_words()?;
                    if words.is_empty() {
                        return Err(syntax(&kw, "missing states"));
                    }
                    self.states = Some(Self::names_from(&words)?);
                }
                "start" => self.parse_start(&kw)?,
                "actions" => self.actions = self.per_agent_lists(&kw)?,
                "observations" => self.observations = self.per_agent_lists(&kw)?,
                "T" => self.parse_entry(Section::T, &kw)?,
                "O" => self.parse_entry(Section::O, &kw)?,
                "R" => self.parse_entry(Section::R, &kw)?,
                "" => return Err(syntax(&kw, "expected a keyword")),
                other => return Err(syntax(&kw, format!("unknown keyword `{other}`"))),
            }
        }
        Ok(())
    }

    /// Reduces reward entries to R(s,a) by expectation over s' and o.
    fn reward_table(&self, ns: usize, na: usize, no: usize) -> Vec<f64> {
        let mut reward = vec![0.0; na * ns];
        let simple = self
            .rewards
            .iter()
            .all(|e| e.specified == 4 && e.next.len() == ns && e.obs.len() == no);
        if simple {
            for e in &self.rewards {
                for &a in &e.actions {
                    for &s in &e.states {
                        reward[a * ns + s] = e.values[0];
                    }
                }
            }
        } else {
            let mut covers = vec![Vec::new(); na * ns];
            for (idx, e) in self.rewards.iter().enumerate() {
                for &a in &e.actions {
                    for &s in &e.states {
                        covers[a * ns + s].push(idx);
                    }
                }
            }
            let mut table = vec![0.0; ns * no];
            for a in 0..na {
                for s in 0..ns {
                    let entries = &covers[a * ns + s];
                    if entries.is_empty() {
                        continue;
                    }
                    table.iter_mut().for_each(|v| *v = 0.0);
                    for &idx in entries {
                        let e = &self.rewards[idx];
                        for &s2 in &e.next {
                            for &o in &e.obs {
                                table[s2 * no + o] = match e.specified {
                                    4 => e.values[0],
                                    3 => e.values[o],
                                    _ => e.values[s2 * no + o],
                                };
                            }
                        }
                    }
                    let mut r = 0.0;
                    for s2 in 0..ns {
                        let t = self.transition[(a * ns + s) * ns + s2];
                        if t == 0.0 {
                            continue;
                        }
                        let row = &self.observation[(a * ns + s2) * no..(a * ns + s2 + 1) * no];
                        let inner: f64 = row
                            .iter()
                            .zip(&table[s2 * no..(s2 + 1) * no])
                            .map(|(p, v)| p * v)
                            .sum();
                        r += t * inner;
                    }
                    reward[a * ns + s] = r;
                }
            }
        }
        if self.cost {
            reward.iter_mut().for_each(|r| *r = -*r);
        }
        reward
    }
}

/// Parses a model document and validates it.
pub fn parse_model(text: &str) -> Result<DecPomdp> {
    let mut p = Parser {
        toks: tokenize(text),
        pos: 0,
        agent_names: None,
        states: None,
        actions: Vec::new(),
        observations: Vec::new(),
        start: None,
        discount: 1.0,
        cost: false,
        transition: Vec::new(),
        observation: Vec::new(),
        rewards: Vec::new(),
        joint_sizes: None,
    };
    p.run()?;
    let end = p.last();
    let agent_names = p
        .agent_names
        .clone()
        .ok_or_else(|| Error::Semantic("missing `agents` section".into()))?;
    let states = p
        .states
        .clone()
        .ok_or_else(|| Error::Semantic("missing `states` section".into()))?;
    let (ns, na, no) = p
        .ensure_tensors(&end)
        .map_err(|_| Error::Semantic("missing `actions` or `observations` section".into()))?;
    let reward = p.reward_table(ns, na, no);
    let initial_belief = p.start.clone().unwrap_or_else(|| vec![1.0 / ns as f64; ns]);
    if p.discount != 1.0 {
        log::warn!("ignoring discount {}; planning is undiscounted", p.discount);
    }
    let agents = agent_names
        .into_iter()
        .zip(p.actions.clone())
        .zip(p.observations.clone())
        .map(|((name, actions), observations)| Agent {
            name,
            actions,
            observations,
        })
        .collect();
    DecPomdp::new(ModelParts {
        agents,
        states,
        transition: std::mem::take(&mut p.transition),
        observation: std::mem::take(&mut p.observation),
        reward,
        initial_belief,
        default_horizon: DEFAULT_HORIZON,
        discount: p.discount,
    })
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Canonical text form. Probabilities and rewards use 17 significant digits,
/// so `parse_model(serialize_model(m))` reproduces every tensor bit for bit.
pub fn serialize_model(model: &DecPomdp) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let agents = model.agents();
    // A lone integer reads back as a count, so default names collapse to one.
    let names = |v: &[String]| {
        if v.iter().enumerate().all(|(i, n)| *n == i.to_string()) {
            v.len().to_string()
        } else {
            v.join(" ")
        }
    };
    let agent_names: Vec<String> = agents.iter().map(|a| a.name.clone()).collect();
    let _ = writeln!(out, "agents: {}", names(&agent_names));
    let _ = writeln!(out, "discount: {}", model.discount());
    let _ = writeln!(out, "values: reward");
    let _ = writeln!(out, "states: {}", names(model.states()));
    let _ = writeln!(out, "start:");
    let b0: Vec<String> = model
        .initial_belief()
        .probs()
        .iter()
        .map(|&p| num(p))
        .collect();
    let _ = writeln!(out, "{}", b0.join(" "));
    let _ = writeln!(out, "actions:");
    for a in agents {
        let _ = writeln!(out, "{}", names(&a.actions));
    }
    let _ = writeln!(out, "observations:");
    for a in agents {
        let _ = writeln!(out, "{}", names(&a.observations));
    }

    let ns = model.num_states();
    let na = model.num_joint_actions();
    let no = model.num_joint_observations();
    let action_name = |a: usize| -> String {
        model
            .actions()
            .decode(a)
            .iter()
            .enumerate()
            .map(|(i, &c)| agents[i].actions[c].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let obs_name = |o: usize| -> String {
        model
            .observations()
            .decode(o)
            .iter()
            .enumerate()
            .map(|(i, &c)| agents[i].observations[c].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let state = |s: usize| model.states()[s].as_str();
    let t = model.raw_transition();
    for a in 0..na {
        let an = action_name(a);
        for s in 0..ns {
            for s2 in 0..ns {
                let p = t[(a * ns + s) * ns + s2];
                if p.to_bits() != 0 {
                    let _ = writeln!(out, "T: {an} : {} : {} : {}", state(s), state(s2), num(p));
                }
            }
        }
    }
    let o = model.raw_observation();
    for a in 0..na {
        let an = action_name(a);
        for s2 in 0..ns {
            for z in 0..no {
                let p = o[(a * ns + s2) * no + z];
                if p.to_bits() != 0 {
                    let _ = writeln!(
                        out,
                        "O: {an} : {} : {} : {}",
                        state(s2),
                        obs_name(z),
                        num(p)
                    );
                }
            }
        }
    }
    let r = model.raw_reward();
    for a in 0..na {
        let an = action_name(a);
        for s in 0..ns {
            let v = r[a * ns + s];
            if v.to_bits() != 0 {
                let _ = writeln!(out, "R: {an} : {} : * : * : {}", state(s), num(v));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_STATE: &str = "\
agents: 2
discount: 0.9
values: reward
states: left right
start:
uniform
actions:
go stay
2
observations:
1
ping pong
T: * :
identity
T: go * : left : uniform
O: * : * : * * : 0.5   # overwritten below
O: * :
uniform
R: go * : * : * : * : 1.5
R: stay 1 : right : * : * : -2
";

    #[test]
    fn minimal_document() {
        let m = parse_model(
            "agents: 1\nstates: 1\nactions:\n1\nobservations:\n1\nT: * : * : * : 1\nO: * : * : * : 1\n",
        )
        .unwrap();
        assert_eq!(m.num_states(), 1);
        assert_eq!(m.transition(0, 0, 0), 1.0);
        assert_eq!(m.observation(0, 0, 0), 1.0);
        assert_eq!(m.reward(0, 0), 0.0);
        assert_eq!(m.initial_belief().probs(), &[1.0]);
    }

    #[test]
    fn wildcards_and_overrides() {
        let m = parse_model(TWO_STATE).unwrap();
        assert_eq!(m.num_joint_actions(), 4);
        assert_eq!(m.num_joint_observations(), 2);
        assert_eq!(m.transition(0, 0, 1), 0.5);
        assert_eq!(m.transition(1, 0, 1), 1.0);
        assert_eq!(m.transition(0, 3, 0), 1.0);
        assert_eq!(m.reward(0, 1), 1.5);
        assert_eq!(m.reward(1, 3), -2.0);
        assert_eq!(m.reward(0, 3), 0.0);
        assert_eq!(m.observation(2, 1, 1), 0.5);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = parse_model(TWO_STATE).unwrap();
        let text = serialize_model(&m);
        let again = parse_model(&text).unwrap();
        assert_eq!(serialize_model(&again), text);
        assert_eq!(m.raw_transition(), again.raw_transition());
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_model("agents: 1\nstates 2\n").unwrap_err();
        match err {
            Error::Syntax { line, column, .. } => assert_eq!((line, column), (2, 8)),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn unknown_identifier_is_rejected() {
        let doc = TWO_STATE.replace("T: go * : left", "T: jump * : left");
        assert!(matches!(parse_model(&doc), Err(Error::Syntax { .. })));
    }

    #[test]
    fn full_reward_is_reduced_by_expectation() {
        let doc = "\
agents: 1
states: a b
start: a
actions:
x
observations:
p q
T: x : a : uniform
T: x : b : b : 1
O: x : a : p : 1
O: x : b : uniform
R: x : a : b : q : 4
R: x : a : a : * : 2
";
        let m = parse_model(doc).unwrap();
        assert!((m.reward(0, 0) - (0.5 * 2.0 + 0.5 * 0.5 * 4.0)).abs() < 1e-15);
    }
}
