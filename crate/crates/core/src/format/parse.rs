//! Line lexer and recursive block parser.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;
use std::sync::Arc;

use super::{Architecture, ParseError, ParseErrors};
use crate::behaviors::{adapt, chaos, compose, rename, unplug, IntervalTransducer, TableMachine};
use crate::case_study::{library_machine, Codec, Params};
use crate::rules::{Invariant, RefinementStep, Script, ScriptStep};
use crate::streams::{
    Alphabet, Assignment, ChannelId, ChannelSet, EnumerationBounds, Interval, Message,
    NamedStreamTuple, TimedStream,
};
use crate::system::{black_box, validate_system, Component, System};

const DEFAULT_MODULUS: u32 = 3;

#[derive(Clone, Debug)]
struct Word {
    text: String,
    col: usize,
}

#[derive(Clone, Debug)]
struct Line {
    no: usize,
    words: Vec<Word>,
}

impl Line {
    fn keyword(&self) -> &str {
        &self.words[0].text
    }

    fn args(&self) -> &[Word] {
        &self.words[1..]
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        self.error_at(&self.words[0], message)
    }

    fn error_at(&self, word: &Word, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.no,
            col: word.col,
            message: message.into(),
        }
    }

    /// Column just past the last word, for "missing argument" errors.
    fn error_after(&self, message: impl Into<String>) -> ParseError {
        let last = self.words.last().expect("lines are nonempty");
        ParseError {
            line: self.no,
            col: last.col + last.text.chars().count(),
            message: message.into(),
        }
    }
}

/// Nonempty lines with comments stripped. Columns are one-based in chars.
fn lex(text: &str) -> Vec<Line> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("");
        let mut words = Vec::new();
        let mut current: Option<Word> = None;
        for (j, ch) in body.chars().enumerate() {
            if ch.is_whitespace() {
                if let Some(w) = current.take() {
                    words.push(w);
                }
            } else {
                current
                    .get_or_insert_with(|| Word {
                        text: String::new(),
                        col: j + 1,
                    })
                    .text
                    .push(ch);
            }
        }
        words.extend(current);
        if !words.is_empty() {
            lines.push(Line { no: i + 1, words });
        }
    }
    lines
}

type PResult<T> = std::result::Result<T, ParseError>;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// Every channel must be declared before use.
    Architecture,
    /// Channels may come from the architecture the script is applied to.
    Script,
}

struct Parser {
    lines: Vec<Line>,
    pos: usize,
    mode: Mode,
    errors: Vec<ParseError>,
    bounds: Option<(usize, usize)>,
    alphabets: BTreeMap<String, Arc<Alphabet>>,
    channels: BTreeMap<ChannelId, Arc<Alphabet>>,
    channel_order: Vec<ChannelId>,
    machines: BTreeMap<String, TableMachine>,
}

struct PendingState {
    line: Line,
    emits: Vec<Assignment>,
    advances: Vec<(Line, Assignment, Assignment, Vec<Word>)>,
}

impl Parser {
    fn new(text: &str, mode: Mode) -> Self {
        Self {
            lines: lex(text),
            pos: 0,
            mode,
            errors: Vec::new(),
            bounds: None,
            alphabets: BTreeMap::new(),
            channels: BTreeMap::new(),
            channel_order: Vec::new(),
            machines: BTreeMap::new(),
        }
    }

    fn next_line(&mut self) -> Option<Line> {
        let line = self.lines.get(self.pos).cloned();
        if line.is_some() {
            self.pos += 1;
        }
        line
    }

    /// The next line inside a block opened by `opener`.
    fn inner_line(&mut self, opener: &Line) -> PResult<Line> {
        self.next_line().ok_or_else(|| {
            opener.error(format!(
                "unterminated {} block opened at line {}",
                opener.keyword(),
                opener.no
            ))
        })
    }

    fn expect_end(&mut self, opener: &Line) -> PResult<()> {
        let line = self.inner_line(opener)?;
        if line.keyword() == "end" && line.words.len() == 1 {
            Ok(())
        } else {
            Err(line.error(format!(
                "expected end of {} block opened at line {}",
                opener.keyword(),
                opener.no
            )))
        }
    }

    fn no_args(&self, line: &Line) -> PResult<()> {
        match line.args().first() {
            Some(w) => Err(line.error_at(w, format!("unexpected {:?}", w.text))),
            None => Ok(()),
        }
    }

    fn one_arg<'a>(&self, line: &'a Line, what: &str) -> PResult<&'a Word> {
        match line.args() {
            [w] => Ok(w),
            [] => Err(line.error_after(format!("expected {what}"))),
            [_, extra, ..] => Err(line.error_at(extra, format!("unexpected {:?}", extra.text))),
        }
    }

    fn name(&self, line: &Line, what: &str) -> PResult<String> {
        let w = self.one_arg(line, what)?;
        if ChannelId::new(&w.text).is_err() {
            return Err(line.error_at(w, format!("invalid {what} {:?}", w.text)));
        }
        Ok(w.text.clone())
    }

    fn channel(&mut self, line: &Line, w: &Word) -> Option<ChannelId> {
        match ChannelId::new(&w.text) {
            Err(_) => {
                self.errors
                    .push(line.error_at(w, format!("invalid channel name {:?}", w.text)));
                None
            }
            Ok(c) => {
                if self.mode == Mode::Architecture && !self.channels.contains_key(&c) {
                    self.errors
                        .push(line.error_at(w, format!("unknown channel {c}")));
                }
                Some(c)
            }
        }
    }

    fn channel_set(&mut self, line: &Line, words: &[Word]) -> ChannelSet {
        let mut set = ChannelSet::new();
        for w in words {
            if let Some(c) = self.channel(line, w) {
                if !set.insert(c.clone()) {
                    self.errors
                        .push(line.error_at(w, format!("channel {c} listed twice")));
                }
            }
        }
        set
    }

    /// `I… -> O…`
    fn interface(&mut self, line: &Line, words: &[Word]) -> PResult<(ChannelSet, ChannelSet)> {
        let Some(arrow) = words.iter().position(|w| w.text == "->") else {
            return Err(line.error_after("expected INPUTS -> OUTPUTS"));
        };
        let inputs = self.channel_set(line, &words[..arrow]);
        let outputs = self.channel_set(line, &words[arrow + 1..]);
        Ok((inputs, outputs))
    }

    fn interval(
        &mut self,
        line: &Line,
        w: &Word,
        text: &str,
        channel: &ChannelId,
    ) -> Option<Interval> {
        let iv = match Interval::from_str(text) {
            Ok(iv) => iv,
            Err(_) => {
                self.errors
                    .push(line.error_at(w, format!("invalid interval {text:?}")));
                return None;
            }
        };
        if let Some(alpha) = self.channels.get(channel) {
            if let Some(m) = iv.messages().iter().find(|m| !alpha.contains(m)) {
                self.errors.push(line.error_at(
                    w,
                    format!(
                        "message {m} is not in alphabet {} of channel {channel}",
                        alpha.name()
                    ),
                ));
                return None;
            }
        }
        Some(iv)
    }

    /// `CHANNEL=<m,…>` words, each channel drawn from `allowed`.
    fn bindings(
        &mut self,
        line: &Line,
        words: &[Word],
        allowed: &ChannelSet,
        role: &str,
    ) -> Option<Assignment> {
        let mut bound = Vec::new();
        let mut seen = BTreeSet::new();
        let mut ok = true;
        for w in words {
            let Some((c, iv)) = w.text.split_once('=') else {
                self.errors
                    .push(line.error_at(w, format!("expected CHANNEL=<...>, got {:?}", w.text)));
                ok = false;
                continue;
            };
            let cw = Word {
                text: c.to_string(),
                col: w.col,
            };
            let Some(c) = self.channel(line, &cw) else {
                ok = false;
                continue;
            };
            if !allowed.contains(&c) {
                self.errors
                    .push(line.error_at(w, format!("{c} is not an {role} channel")));
                ok = false;
                continue;
            }
            if !seen.insert(c.clone()) {
                self.errors
                    .push(line.error_at(w, format!("channel {c} bound twice")));
                ok = false;
                continue;
            }
            match self.interval(line, w, iv, &c) {
                Some(iv) => bound.push((c, iv)),
                None => ok = false,
            }
        }
        ok.then(|| Assignment::new(bound))
    }

    fn bounds_line(&mut self, line: &Line) -> PResult<()> {
        let args: Vec<&str> = line.args().iter().map(|w| w.text.as_str()).collect();
        let parsed = match args.as_slice() {
            ["horizon", h, "burst", b] => h.parse::<usize>().ok().zip(b.parse::<usize>().ok()),
            _ => None,
        };
        let Some((h, b)) = parsed else {
            return Err(line.error("expected: bounds horizon N burst N"));
        };
        if h == 0 || b == 0 {
            return Err(line.error("horizon and burst must be at least 1"));
        }
        if self.bounds.replace((h, b)).is_some() {
            self.errors.push(line.error("bounds declared twice"));
        }
        Ok(())
    }

    fn alphabet_line(&mut self, line: &Line) -> PResult<()> {
        let args = line.args();
        if args.len() < 3 || args[1].text != "=" {
            return Err(line.error("expected: alphabet NAME = MESSAGE..."));
        }
        let name = &args[0].text;
        let mut messages = Vec::new();
        for w in &args[2..] {
            match Message::new(&w.text) {
                Ok(m) => messages.push(m),
                Err(_) => self
                    .errors
                    .push(line.error_at(w, format!("invalid message {:?}", w.text))),
            }
        }
        let alpha = Arc::new(Alphabet::new(name.clone(), messages));
        if self.alphabets.insert(name.clone(), alpha).is_some() {
            self.errors
                .push(line.error_at(&args[0], format!("alphabet {name} declared twice")));
        }
        Ok(())
    }

    fn channel_line(&mut self, line: &Line) -> PResult<()> {
        let args = line.args();
        let Some(colon) = args.iter().position(|w| w.text == ":") else {
            return Err(line.error("expected: channel NAME... : ALPHABET"));
        };
        if colon == 0 || colon + 2 != args.len() {
            return Err(line.error("expected: channel NAME... : ALPHABET"));
        }
        let aw = &args[colon + 1];
        let Some(alpha) = self.alphabets.get(&aw.text).cloned() else {
            self.errors
                .push(line.error_at(aw, format!("unknown alphabet {}", aw.text)));
            return Ok(());
        };
        for w in &args[..colon] {
            match ChannelId::new(&w.text) {
                Err(_) => self
                    .errors
                    .push(line.error_at(w, format!("invalid channel name {:?}", w.text))),
                Ok(c) => {
                    if self.channels.insert(c.clone(), alpha.clone()).is_some() {
                        self.errors
                            .push(line.error_at(w, format!("channel {c} declared twice")));
                    } else {
                        self.channel_order.push(c);
                    }
                }
            }
        }
        Ok(())
    }

    fn machine_block(&mut self, head: &Line) -> PResult<()> {
        let name = self.name(head, "machine name")?;
        let mut inputs = ChannelSet::new();
        let mut outputs = ChannelSet::new();
        let mut initial: Option<(Line, String)> = None;
        let mut states: Vec<PendingState> = Vec::new();
        loop {
            let line = self.inner_line(head)?;
            match line.keyword() {
                "end" => {
                    self.no_args(&line)?;
                    break;
                }
                "in" => inputs = self.channel_set(&line, line.args()),
                "out" => outputs = self.channel_set(&line, line.args()),
                "initial" => initial = Some((line.clone(), self.name(&line, "state name")?)),
                "state" => {
                    self.name(&line, "state name")?;
                    let state = self.state_block(&line, &inputs, &outputs)?;
                    states.push(state);
                }
                other => return Err(line.error(format!("unexpected {other:?} in machine block"))),
            }
        }
        let names: BTreeSet<&str> = states
            .iter()
            .map(|s| s.line.words[1].text.as_str())
            .collect();
        let mut errors = Vec::new();
        let mut builder = TableMachine::builder(name.clone(), inputs, outputs);
        for s in &states {
            builder = builder.state(&s.line.words[1].text);
        }
        if let Some((line, n)) = &initial {
            if !names.contains(n.as_str()) {
                errors.push(line.error_at(&line.words[1], format!("unknown state {n}")));
            }
            builder = builder.initial(n);
        }
        for s in &states {
            let from = &s.line.words[1].text;
            for e in &s.emits {
                builder = builder.emit(from, e.clone());
            }
            for (line, out, input, targets) in &s.advances {
                for t in targets {
                    if !names.contains(t.text.as_str()) {
                        errors.push(line.error_at(t, format!("unknown state {}", t.text)));
                    }
                }
                let targets: Vec<&str> = targets.iter().map(|w| w.text.as_str()).collect();
                builder = builder.transition(from, out.clone(), input.clone(), &targets);
            }
        }
        if !errors.is_empty() {
            self.errors.extend(errors);
            return Ok(());
        }
        match builder.build() {
            Ok(m) => {
                if self.machines.insert(name.clone(), m).is_some() {
                    self.errors.push(
                        head.error_at(&head.words[1], format!("machine {name} defined twice")),
                    );
                }
            }
            Err(e) => self.errors.push(head.error(e.to_string())),
        }
        Ok(())
    }

    fn state_block(
        &mut self,
        head: &Line,
        inputs: &ChannelSet,
        outputs: &ChannelSet,
    ) -> PResult<PendingState> {
        let mut state = PendingState {
            line: head.clone(),
            emits: Vec::new(),
            advances: Vec::new(),
        };
        loop {
            let line = self.inner_line(head)?;
            match line.keyword() {
                "end" => {
                    self.no_args(&line)?;
                    return Ok(state);
                }
                "emit" => {
                    if let Some(a) = self.bindings(&line, line.args(), outputs, "output") {
                        state.emits.push(a);
                    }
                }
                "advance" => {
                    let args = line.args();
                    let slash = args.iter().position(|w| w.text == "/");
                    let arrow = args.iter().position(|w| w.text == "->");
                    let (Some(slash), Some(arrow)) = (slash, arrow) else {
                        return Err(line
                            .error("expected: advance OUTPUT-GUARDS / INPUT-GUARDS -> STATE..."));
                    };
                    if slash > arrow || arrow + 1 == args.len() {
                        return Err(line
                            .error("expected: advance OUTPUT-GUARDS / INPUT-GUARDS -> STATE..."));
                    }
                    let out = self.bindings(&line, &args[..slash], outputs, "output");
                    let input = self.bindings(&line, &args[slash + 1..arrow], inputs, "input");
                    if let (Some(out), Some(input)) = (out, input) {
                        let targets = args[arrow + 1..].to_vec();
                        state.advances.push((line.clone(), out, input, targets));
                    }
                }
                other => return Err(line.error(format!("unexpected {other:?} in state block"))),
            }
        }
    }

    fn current_bounds(&self, line: &Line) -> PResult<EnumerationBounds> {
        let (h, b) = match (self.bounds, self.mode) {
            (Some(hb), _) => hb,
            (None, Mode::Script) => (1, 1),
            (None, Mode::Architecture) => {
                return Err(line.error("bounds must be declared before the system"))
            }
        };
        let alphabets = self
            .channels
            .iter()
            .map(|(c, a)| (c.clone(), a.clone()))
            .collect();
        EnumerationBounds::new(h, b, alphabets).map_err(|e| line.error(e.to_string()))
    }

    /// A behavior expression whose keyword is `line.words[at]`. Block forms
    /// read their operands from the following lines. `None` means an error
    /// was recorded and parsing can continue past the expression.
    fn expr(&mut self, line: &Line, at: usize) -> PResult<Option<IntervalTransducer>> {
        let kw = &line.words[at];
        let args = &line.words[at + 1..];
        let lift = |r: crate::Result<IntervalTransducer>, errors: &mut Vec<ParseError>| match r {
            Ok(m) => Some(m),
            Err(e) => {
                errors.push(line.error_at(kw, e.to_string()));
                None
            }
        };
        match kw.text.as_str() {
            "machine" => {
                let [w] = args else {
                    return Err(line.error_at(kw, "expected: machine NAME"));
                };
                match self.machines.get(&w.text) {
                    Some(m) => Ok(Some(IntervalTransducer::table(m.clone()))),
                    None => {
                        self.errors
                            .push(line.error_at(w, format!("unknown machine {}", w.text)));
                        Ok(None)
                    }
                }
            }
            "chaos" => {
                let (i, o) = self.interface(line, args)?;
                Ok(Some(chaos(i, o)))
            }
            "library" => {
                let Some((kind, params)) = args.split_first() else {
                    return Err(line.error_at(kw, "expected: library KIND KEY=VALUE..."));
                };
                let mut map = Params::new();
                for w in params {
                    match w.text.split_once('=') {
                        Some((k, v)) => {
                            map.insert(k.to_string(), v.to_string());
                        }
                        None => {
                            return Err(
                                line.error_at(w, format!("expected KEY=VALUE, got {:?}", w.text))
                            )
                        }
                    }
                }
                Ok(lift(library_machine(&kind.text, &map), &mut self.errors))
            }
            "adapt" => {
                let (i, o) = self.interface(line, args)?;
                let inner = self.child(line)?;
                self.expect_end(line)?;
                Ok(inner.and_then(|m| lift(adapt(&m, &i, &o), &mut self.errors)))
            }
            "compose" => {
                self.no_args(line)?;
                let mut parts = Vec::new();
                let mut ok = true;
                loop {
                    let next = self.inner_line(line)?;
                    if next.keyword() == "end" {
                        self.no_args(&next)?;
                        break;
                    }
                    match self.expr(&next, 0)? {
                        Some(m) => parts.push(m),
                        None => ok = false,
                    }
                }
                Ok(if ok {
                    lift(compose(parts), &mut self.errors)
                } else {
                    None
                })
            }
            "rename" => {
                let mut map = BTreeMap::new();
                for w in args {
                    let pair = w.text.split_once("->").map(|(a, b)| {
                        let a = Word {
                            text: a.into(),
                            col: w.col,
                        };
                        let b = Word {
                            text: b.into(),
                            col: w.col,
                        };
                        (a, b)
                    });
                    let Some((a, b)) = pair else {
                        return Err(
                            line.error_at(w, format!("expected OLD->NEW, got {:?}", w.text))
                        );
                    };
                    if let (Some(a), Some(b)) = (self.channel(line, &a), self.channel(line, &b)) {
                        map.insert(a, b);
                    }
                }
                let inner = self.child(line)?;
                self.expect_end(line)?;
                Ok(inner.and_then(|m| lift(rename(&m, &map), &mut self.errors)))
            }
            "unplug" => {
                let [w] = args else {
                    return Err(line.error_at(kw, "expected: unplug CHANNEL"));
                };
                let c = self.channel(line, w);
                let inner = self.child(line)?;
                self.expect_end(line)?;
                Ok(match (inner, c) {
                    (Some(m), Some(c)) => lift(unplug(&m, &c), &mut self.errors),
                    _ => None,
                })
            }
            "system" => {
                if !args.is_empty() {
                    return Err(line.error_at(&args[0], "unexpected argument"));
                }
                let s = self.system_block(line)?;
                Ok(s.and_then(|s| lift(black_box(&s), &mut self.errors)))
            }
            other => Err(line.error_at(kw, format!("unknown behavior form {other:?}"))),
        }
    }

    fn child(&mut self, opener: &Line) -> PResult<Option<IntervalTransducer>> {
        let line = self.inner_line(opener)?;
        if line.keyword() == "end" {
            return Err(line.error(format!(
                "{} block at line {} needs an operand",
                opener.keyword(),
                opener.no
            )));
        }
        self.expr(&line, 0)
    }

    /// A `system` block, from after the opening line through its `end`.
    fn system_block(&mut self, head: &Line) -> PResult<Option<System>> {
        let bounds = self.current_bounds(head)?;
        let mut inputs = ChannelSet::new();
        let mut outputs = ChannelSet::new();
        let mut components = Vec::new();
        let mut ok = true;
        loop {
            let line = self.inner_line(head)?;
            match line.keyword() {
                "end" => {
                    self.no_args(&line)?;
                    break;
                }
                "in" => inputs = self.channel_set(&line, line.args()),
                "out" => outputs = self.channel_set(&line, line.args()),
                "component" => match self.component_block(&line)? {
                    Some(c) => components.push(c),
                    None => ok = false,
                },
                other => return Err(line.error(format!("unexpected {other:?} in system block"))),
            }
        }
        Ok(ok.then(|| System::new(inputs, outputs, components, bounds)))
    }

    fn component_block(&mut self, head: &Line) -> PResult<Option<Component>> {
        let name = self.name(head, "component name")?;
        let mut inputs = ChannelSet::new();
        let mut outputs = ChannelSet::new();
        let mut behavior: Option<Option<IntervalTransducer>> = None;
        loop {
            let line = self.inner_line(head)?;
            match line.keyword() {
                "end" => {
                    self.no_args(&line)?;
                    break;
                }
                "in" => inputs = self.channel_set(&line, line.args()),
                "out" => outputs = self.channel_set(&line, line.args()),
                "behavior" => {
                    if line.words.len() < 2 {
                        return Err(line.error_after("expected a behavior expression"));
                    }
                    if behavior.is_some() {
                        return Err(line.error("component has more than one behavior"));
                    }
                    behavior = Some(self.expr(&line, 1)?);
                }
                other => return Err(line.error(format!("unexpected {other:?} in component block"))),
            }
        }
        let Some(behavior) = behavior else {
            return Err(head.error(format!("component {name} has no behavior")));
        };
        let Some(behavior) = behavior else {
            return Ok(None);
        };
        match Component::new(name, inputs, outputs, behavior) {
            Ok(c) => Ok(Some(c)),
            Err(e) => {
                self.errors.push(head.error(e.to_string()));
                Ok(None)
            }
        }
    }

    fn invariant(&mut self, line: &Line) -> PResult<Option<Invariant>> {
        let mut clauses = Vec::new();
        for group in line.args().split(|w| w.text == "and") {
            let Some(first) = group.first() else {
                return Err(line.error("empty invariant clause"));
            };
            let rest = &group[1..];
            let clause = match (first.text.as_str(), rest) {
                ("true", []) => Some(Invariant::True),
                ("empty", [c]) => self.channel(line, c).map(Invariant::Empty),
                ("prefix", [f, l]) => match (self.channel(line, f), self.channel(line, l)) {
                    (Some(follower), Some(leader)) => Some(Invariant::Prefix { follower, leader }),
                    _ => None,
                },
                ("codec-prefix", [r, i, opt @ ..]) if opt.len() <= 1 => {
                    let modulus = match opt.first() {
                        None => Some(DEFAULT_MODULUS),
                        Some(w) => w.text.strip_prefix("mod=").and_then(|n| n.parse().ok()),
                    };
                    let codec = modulus.and_then(|n| Codec::new(n).ok());
                    let Some(codec) = codec else {
                        return Err(line.error_at(&opt[0], "expected mod=N with N >= 1"));
                    };
                    match (self.channel(line, r), self.channel(line, i)) {
                        (Some(follower), Some(source)) => Some(Invariant::CodecPrefix {
                            follower,
                            source,
                            codec,
                        }),
                        _ => None,
                    }
                }
                _ => {
                    return Err(line.error_at(
                        first,
                        "expected: true | empty C | prefix F L | codec-prefix R I [mod=N]",
                    ))
                }
            };
            match clause {
                Some(c) => clauses.push(c),
                None => return Ok(None),
            }
        }
        Ok(Some(if clauses.len() == 1 {
            clauses.pop().expect("one clause")
        } else {
            Invariant::and(clauses)
        }))
    }

    fn component_channel(&mut self, line: &Line) -> PResult<Option<(String, ChannelId)>> {
        let [c, p] = line.args() else {
            return Err(line.error_after(format!("expected: {} COMPONENT CHANNEL", line.keyword())));
        };
        if ChannelId::new(&c.text).is_err() {
            return Err(line.error_at(c, format!("invalid component name {:?}", c.text)));
        }
        Ok(self.channel(line, p).map(|p| (c.text.clone(), p)))
    }

    /// One rule application inside a step. `None` means an error was recorded.
    fn application(&mut self, line: &Line) -> PResult<Option<RefinementStep>> {
        let rule = line.keyword();
        Ok(match rule {
            "add-component" => Some(RefinementStep::AddComponent {
                name: self.name(line, "component name")?,
            }),
            "remove-component" => Some(RefinementStep::RemoveComponent {
                name: self.name(line, "component name")?,
            }),
            "add-output" | "remove-output" | "add-input" | "remove-input" => self
                .component_channel(line)?
                .map(|(component, channel)| match rule {
                    "add-output" => RefinementStep::AddOutput { component, channel },
                    "remove-output" => RefinementStep::RemoveOutput { component, channel },
                    "add-input" => RefinementStep::AddInput { component, channel },
                    _ => RefinementStep::RemoveInput { component, channel },
                }),
            "refine-behavior" => {
                let component = self.name(line, "component name")?;
                let behavior = self.child(line)?;
                self.expect_end(line)?;
                behavior.map(|behavior| RefinementStep::RefineBehavior {
                    component,
                    behavior,
                })
            }
            "refine-with-invariant" => {
                let component = self.name(line, "component name")?;
                let inv_line = self.inner_line(line)?;
                if inv_line.keyword() != "invariant" {
                    return Err(inv_line.error("expected an invariant line"));
                }
                let invariant = self.invariant(&inv_line)?;
                let behavior = self.child(line)?;
                self.expect_end(line)?;
                match (invariant, behavior) {
                    (Some(invariant), Some(behavior)) => {
                        Some(RefinementStep::RefineWithInvariant {
                            component,
                            behavior,
                            invariant,
                        })
                    }
                    _ => None,
                }
            }
            "expand" => {
                let component = self.name(line, "component name")?;
                let sys = self.inner_line(line)?;
                if sys.keyword() != "system" {
                    return Err(sys.error("expected a system block"));
                }
                self.no_args(&sys)?;
                let subsystem = self.system_block(&sys)?;
                self.expect_end(line)?;
                subsystem.map(|subsystem| RefinementStep::Expand {
                    component,
                    subsystem,
                })
            }
            "fold" => self.fold(line)?,
            "rename" => {
                let [a, b] = line.args() else {
                    return Err(line.error_after("expected: rename OLD NEW"));
                };
                match (self.channel(line, a), self.channel(line, b)) {
                    (Some(old), Some(new)) => Some(RefinementStep::Rename { old, new }),
                    _ => None,
                }
            }
            other => return Err(line.error(format!("unknown rule {other:?}"))),
        })
    }

    /// `fold NAME components C… in I… out O…`
    fn fold(&mut self, line: &Line) -> PResult<Option<RefinementStep>> {
        let args = line.args();
        let usage = "expected: fold NAME components C... in I... out O...";
        let pos = |kw: &str| args.iter().position(|w| w.text == kw);
        let (Some(c), Some(i), Some(o)) = (pos("components"), pos("in"), pos("out")) else {
            return Err(line.error(usage));
        };
        if c != 1 || i < c || o < i {
            return Err(line.error(usage));
        }
        let name = &args[0];
        if ChannelId::new(&name.text).is_err() {
            return Err(line.error_at(name, format!("invalid component name {:?}", name.text)));
        }
        let components: Vec<String> = args[c + 1..i].iter().map(|w| w.text.clone()).collect();
        let inputs = self.channel_set(line, &args[i + 1..o]);
        let outputs = self.channel_set(line, &args[o + 1..]);
        Ok(Some(RefinementStep::Fold {
            name: name.text.clone(),
            components,
            inputs,
            outputs,
        }))
    }

    fn step_block(&mut self, head: &Line) -> PResult<Option<ScriptStep>> {
        let label = self.one_arg(head, "step label")?.text.clone();
        let mut applications = Vec::new();
        let mut ok = true;
        loop {
            let line = self.inner_line(head)?;
            if line.keyword() == "end" {
                self.no_args(&line)?;
                break;
            }
            match self.application(&line)? {
                Some(a) => applications.push(a),
                None => ok = false,
            }
        }
        Ok(ok.then_some(ScriptStep {
            label,
            applications,
        }))
    }

    /// Declarations shared by both document kinds. Returns whether `line` was one.
    fn declaration(&mut self, line: &Line) -> PResult<bool> {
        match line.keyword() {
            "bounds" => self.bounds_line(line)?,
            "alphabet" => self.alphabet_line(line)?,
            "channel" => self.channel_line(line)?,
            "machine" => self.machine_block(line)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn finish<T>(mut self, value: Option<T>) -> Result<T, ParseErrors> {
        match value {
            Some(v) if self.errors.is_empty() => Ok(v),
            _ => {
                self.errors.sort_by_key(|e| (e.line, e.col));
                Err(ParseErrors(self.errors))
            }
        }
    }
}

fn architecture(text: &str) -> Result<(Architecture, usize), ParseErrors> {
    let mut p = Parser::new(text, Mode::Architecture);
    let mut system: Option<(Option<System>, usize)> = None;
    while let Some(line) = p.next_line() {
        let handled = match p.declaration(&line) {
            Ok(h) => h,
            Err(e) => {
                p.errors.push(e);
                break;
            }
        };
        if handled {
            continue;
        }
        if line.keyword() != "system" {
            p.errors
                .push(line.error(format!("unexpected {:?} at top level", line.keyword())));
            break;
        }
        if system.is_some() {
            p.errors.push(line.error("more than one system defined"));
            break;
        }
        if let Err(e) = p.no_args(&line) {
            p.errors.push(e);
            break;
        }
        match p.system_block(&line) {
            Ok(s) => system = Some((s, line.no)),
            Err(e) => {
                p.errors.push(e);
                break;
            }
        }
    }
    let value = match system {
        None if !p.errors.is_empty() => None,
        None => {
            p.errors.push(ParseError {
                line: 0,
                col: 0,
                message: "no system defined".into(),
            });
            None
        }
        Some((s, no)) => s.map(|system| {
            let machines = std::mem::take(&mut p.machines);
            (Architecture { system, machines }, no)
        }),
    };
    p.finish(value)
}

/// Parses an architecture without checking the consistency conditions.
pub fn parse_architecture_unchecked(text: &str) -> Result<Architecture, ParseErrors> {
    architecture(text).map(|(a, _)| a)
}

/// Parses an architecture; consistency violations are reported as errors on
/// the `system` line, citing the violated condition.
pub fn parse_architecture(text: &str) -> Result<Architecture, ParseErrors> {
    let (arch, line) = architecture(text)?;
    let report = validate_system(&arch.system);
    if report.holds() {
        return Ok(arch);
    }
    let errors = report
        .failures()
        .map(|v| {
            let tag = if v.tag.starts_with('(') {
                format!("condition {}", v.tag)
            } else {
                v.tag.clone()
            };
            ParseError {
                line,
                col: 1,
                message: format!(
                    "inconsistent system, {tag} ({}): {}",
                    v.premise,
                    v.detail.as_deref().unwrap_or("")
                ),
            }
        })
        .collect();
    Err(ParseErrors(errors))
}

/// Parses a refinement script. Component references are resolved against a
/// system with [`Script::resolve`].
pub fn parse_script(text: &str) -> Result<Script, ParseErrors> {
    let mut p = Parser::new(text, Mode::Script);
    let mut steps = Vec::new();
    let mut ok = true;
    while let Some(line) = p.next_line() {
        let result = match p.declaration(&line) {
            Ok(true) => continue,
            Ok(false) if line.keyword() == "step" => p.step_block(&line),
            Ok(false) => Err(line.error(format!("unexpected {:?} at top level", line.keyword()))),
            Err(e) => Err(e),
        };
        match result {
            Ok(Some(s)) => steps.push(s),
            Ok(None) => ok = false,
            Err(e) => {
                p.errors.push(e);
                break;
            }
        }
    }
    let channels = p
        .channel_order
        .iter()
        .map(|c| (c.clone(), p.channels[c].clone()))
        .collect();
    p.finish(ok.then_some(Script { channels, steps }))
}

/// Parses an environment: lines `CHANNEL = <…> <…> …`, all of the same length.
pub fn parse_env(text: &str) -> Result<NamedStreamTuple, ParseErrors> {
    let mut p = Parser::new(text, Mode::Script);
    let mut bindings = BTreeMap::new();
    let mut horizon: Option<usize> = None;
    for line in std::mem::take(&mut p.lines) {
        let (name, rest) = match line.words.as_slice() {
            [n, eq, rest @ ..] if eq.text == "=" => (n, rest),
            _ => {
                p.errors.push(line.error("expected: CHANNEL = <...> ..."));
                continue;
            }
        };
        let Some(c) = p.channel(&line, name) else {
            continue;
        };
        let mut intervals = Vec::new();
        for w in rest {
            match Interval::from_str(&w.text) {
                Ok(iv) => intervals.push(iv),
                Err(_) => p
                    .errors
                    .push(line.error_at(w, format!("invalid interval {:?}", w.text))),
            }
        }
        match horizon {
            None => horizon = Some(intervals.len()),
            Some(h) if h != intervals.len() => p.errors.push(line.error(format!(
                "{c} has {} intervals, earlier channels have {h}",
                intervals.len()
            ))),
            Some(_) => {}
        }
        if bindings
            .insert(c.clone(), TimedStream::new(intervals))
            .is_some()
        {
            p.errors
                .push(line.error(format!("channel {c} given twice")));
        }
    }
    if !p.errors.is_empty() {
        return p.finish(None);
    }
    match NamedStreamTuple::new(horizon.unwrap_or(0), bindings) {
        Ok(t) => p.finish(Some(t)),
        Err(e) => {
            p.errors.push(ParseError {
                line: 0,
                col: 0,
                message: e.to_string(),
            });
            p.finish(None)
        }
    }
}
