//! The specification machines of the data acquisition system.
//!
//! Every machine here is stutter-closed: it buffers what it has read and may
//! hold back any suffix of the buffer at each step, emitting at most `B`
//! messages per step. Buffers are capped at `H·B` messages, and emission is
//! forced only when the cap would otherwise be exceeded, which never happens
//! within the horizon.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::codec::{Codec, Database, Entry};
use crate::behaviors::{IntervalTransducer, Primitive, State};
use crate::error::{Error, Result};
use crate::streams::{Assignment, ChannelId, ChannelSet, EnumerationBounds, Interval, Message};

/// The kinds accepted by [`library_machine`].
pub const LIBRARY_KINDS: [&str; 4] = ["pre", "enc", "dec", "rdb"];

fn cap(bounds: &EnumerationBounds) -> usize {
    bounds.horizon() * bounds.burst()
}

fn seq(state: &State) -> &[Message] {
    match state {
        State::Seq(ms) => ms,
        _ => &[],
    }
}

fn parts(state: &State) -> &[State] {
    match state {
        State::Tuple(ps) => ps,
        _ => &[],
    }
}

fn db_state(db: &Database) -> State {
    State::seq(db.entries().map(|e| e.to_message()).collect())
}

fn db_of(state: &State) -> Option<Database> {
    seq(state)
        .iter()
        .map(Entry::parse)
        .collect::<Result<Vec<_>>>()
        .ok()
        .map(Database::from_entries)
}

fn entries(a: &Assignment, c: &ChannelId) -> Option<Vec<Entry>> {
    a.get(c)
        .map_or(&[][..], |iv| iv.messages())
        .iter()
        .map(|m| Entry::parse(m).ok())
        .collect()
}

fn emitted<'a>(out: &'a Assignment, c: &ChannelId) -> &'a [Message] {
    out.get(c).map_or(&[], |iv| iv.messages())
}

/// Lengths `k` the machine may emit from a buffer of length `len`.
fn emit_range(len: usize, bounds: &EnumerationBounds) -> std::ops::RangeInclusive<usize> {
    let forced = len.saturating_sub(cap(bounds).saturating_sub(bounds.burst()));
    forced..=len.min(bounds.burst())
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Transform {
    /// Entry-wise `(k, d) ↦ (k, f(d))`; values absent from the map are kept.
    Map(BTreeMap<u32, u32>),
    Encode(Codec),
    Decode(Codec),
    Forward,
}

/// A buffered single-channel relay applying a per-entry transform on arrival.
/// State: `(transform database, buffer)`.
#[derive(Debug)]
struct Relay {
    kind: &'static str,
    input: ChannelId,
    output: ChannelId,
    transform: Transform,
    params: Vec<(String, String)>,
}

impl Primitive for Relay {
    fn kind(&self) -> &str {
        self.kind
    }

    fn params(&self) -> Vec<(String, String)> {
        self.params.clone()
    }

    fn inputs(&self) -> ChannelSet {
        [self.input.clone()].into_iter().collect()
    }

    fn outputs(&self) -> ChannelSet {
        [self.output.clone()].into_iter().collect()
    }

    fn initial(&self) -> State {
        State::tuple(vec![State::seq(Vec::new()), State::seq(Vec::new())])
    }

    fn emit(&self, state: &State, bounds: &EnumerationBounds) -> Vec<Assignment> {
        let buffer = seq(&parts(state)[1]);
        emit_range(buffer.len(), bounds)
            .map(|k| {
                Assignment::new([(
                    self.output.clone(),
                    Interval::from_messages(buffer[..k].to_vec()),
                )])
            })
            .collect()
    }

    fn advance(
        &self,
        state: &State,
        out: &Assignment,
        input: &Assignment,
        bounds: &EnumerationBounds,
    ) -> Vec<State> {
        self.next(state, out, input, bounds).into_iter().collect()
    }
}

impl Relay {
    fn next(
        &self,
        state: &State,
        out: &Assignment,
        input: &Assignment,
        bounds: &EnumerationBounds,
    ) -> Option<State> {
        let [db, buffer] = parts(state) else {
            return None;
        };
        let buffer = seq(buffer);
        let sent = emitted(out, &self.output);
        if !emit_range(buffer.len(), bounds).contains(&sent.len()) || buffer[..sent.len()] != *sent
        {
            return None;
        }
        let mut db = db_of(db)?;
        let mut rest = buffer[sent.len()..].to_vec();
        for e in entries(input, &self.input)? {
            let e = match &self.transform {
                Transform::Map(f) => Entry::new(e.key, f.get(&e.value).copied().unwrap_or(e.value)),
                Transform::Encode(codec) => codec.encode(&mut db, &e).ok()?,
                Transform::Decode(codec) => codec.decode(&mut db, &e).ok()?,
                Transform::Forward => e,
            };
            rest.push(e.to_message());
        }
        Some(State::tuple(vec![db_state(&db), State::seq(rest)]))
    }
}

/// The database component. State: `(database, uncommitted stores, pending
/// queries)`. At each step it answers a prefix of the pending queries from
/// the current database, then queues the step's queries and stores, then
/// commits any prefix of the uncommitted stores, in order.
#[derive(Debug)]
struct Rdb {
    store: ChannelId,
    query: ChannelId,
    answer: ChannelId,
    decode: Option<Codec>,
    params: Vec<(String, String)>,
}

impl Primitive for Rdb {
    fn kind(&self) -> &str {
        "rdb"
    }

    fn params(&self) -> Vec<(String, String)> {
        self.params.clone()
    }

    fn inputs(&self) -> ChannelSet {
        [self.store.clone(), self.query.clone()]
            .into_iter()
            .collect()
    }

    fn outputs(&self) -> ChannelSet {
        [self.answer.clone()].into_iter().collect()
    }

    fn initial(&self) -> State {
        State::tuple(vec![
            State::seq(Vec::new()),
            State::seq(Vec::new()),
            State::seq(Vec::new()),
        ])
    }

    fn emit(&self, state: &State, bounds: &EnumerationBounds) -> Vec<Assignment> {
        let [db, _, pending] = parts(state) else {
            return Vec::new();
        };
        let Some(db) = db_of(db) else {
            return Vec::new();
        };
        let pending = seq(pending);
        emit_range(pending.len(), bounds)
            .map(|j| {
                let answers = pending[..j]
                    .iter()
                    .map(|k| db.get(k.as_str()).to_message())
                    .collect();
                Assignment::new([(self.answer.clone(), Interval::from_messages(answers))])
            })
            .collect()
    }

    fn advance(
        &self,
        state: &State,
        out: &Assignment,
        input: &Assignment,
        bounds: &EnumerationBounds,
    ) -> Vec<State> {
        self.next(state, out, input, bounds).unwrap_or_default()
    }
}

impl Rdb {
    fn next(
        &self,
        state: &State,
        out: &Assignment,
        input: &Assignment,
        bounds: &EnumerationBounds,
    ) -> Option<Vec<State>> {
        let [db, inbox, pending] = parts(state) else {
            return None;
        };
        let db = db_of(db)?;
        let pending = seq(pending);
        let answers = emitted(out, &self.answer);
        if !emit_range(pending.len(), bounds).contains(&answers.len()) {
            return None;
        }
        for (k, a) in pending.iter().zip(answers) {
            if db.get(k.as_str()).to_message() != *a {
                return None;
            }
        }
        let mut queue = pending[answers.len()..].to_vec();
        queue.extend(emitted(input, &self.query).iter().cloned());
        let mut inbox: Vec<Entry> = seq(inbox)
            .iter()
            .map(|m| Entry::parse(m).ok())
            .collect::<Option<_>>()?;
        inbox.extend(entries(input, &self.store)?);

        let forced = inbox.len().saturating_sub(cap(bounds));
        let queue = State::seq(queue);
        let mut next = Vec::new();
        let mut db = db;
        for c in 0..=inbox.len() {
            if c > 0 {
                let e = &inbox[c - 1];
                match &self.decode {
                    Some(codec) => {
                        codec.decode(&mut db, e).ok()?;
                    }
                    None => db.set(&e.key, e.value),
                }
            }
            if c >= forced {
                next.push(State::tuple(vec![
                    db_state(&db),
                    State::seq(inbox[c..].iter().map(Entry::to_message).collect()),
                    queue.clone(),
                ]));
            }
        }
        Some(next)
    }
}

/// Parameters of a library machine, `key=value`.
pub type Params = BTreeMap<String, String>;

struct ParamReader<'a> {
    kind: &'a str,
    params: &'a Params,
    used: Vec<&'a str>,
}

impl<'a> ParamReader<'a> {
    fn channel(&mut self, key: &'a str) -> Result<ChannelId> {
        self.used.push(key);
        let v = self.params.get(key).ok_or_else(|| {
            Error::Library(format!(
                "library {} needs parameter {key}=CHANNEL",
                self.kind
            ))
        })?;
        ChannelId::new(v)
    }

    fn string(&mut self, key: &'a str, default: &str) -> String {
        self.used.push(key);
        self.params
            .get(key)
            .cloned()
            .unwrap_or_else(|| default.to_string())
    }

    fn flag(&mut self, key: &'a str) -> Result<bool> {
        match self.string(key, "false").as_str() {
            "true" => Ok(true),
            "false" => Ok(false),
            v => Err(Error::Library(format!("{key}={v}: expected true or false"))),
        }
    }

    fn codec(&mut self) -> Result<Codec> {
        let m = self.string("mod", "3");
        let n = m
            .parse::<u32>()
            .map_err(|_| Error::Library(format!("mod={m}: expected a positive integer")))?;
        Codec::new(n)
    }

    fn finish(self) -> Result<()> {
        if let Some(k) = self
            .params
            .keys()
            .find(|k| !self.used.contains(&k.as_str()))
        {
            return Err(Error::Library(format!(
                "library {} has no parameter {k}",
                self.kind
            )));
        }
        Ok(())
    }
}

fn parse_map(s: &str) -> Result<BTreeMap<u32, u32>> {
    if s == "id" {
        return Ok(BTreeMap::new());
    }
    let bad = || Error::Library(format!("f={s}: expected id or pairs like 0:1,1:2"));
    let mut map = BTreeMap::new();
    for pair in s.split(',') {
        let (a, b) = pair.split_once(':').ok_or_else(bad)?;
        let a: u32 = a.parse().map_err(|_| bad())?;
        let b: u32 = b.parse().map_err(|_| bad())?;
        if a != b {
            map.insert(a, b);
        }
    }
    Ok(map)
}

fn render_map(map: &BTreeMap<u32, u32>) -> String {
    if map.is_empty() {
        return "id".to_string();
    }
    map.iter()
        .map(|(a, b)| format!("{a}:{b}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn normalized(pairs: &[(&str, String)]) -> Vec<(String, String)> {
    let mut v: Vec<(String, String)> = pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect();
    v.sort();
    v
}

/// Builds the library machine `kind` from its parameters:
///
/// * `pre in=C out=C f=id|d:e,...` applies `f` to every entry's value
/// * `enc in=C out=C mod=N` difference-encodes entries
/// * `dec in=C out=C mod=N raw=false|true` decodes entries; `raw=true` forwards them unchanged
/// * `rdb store=C query=C answer=C decode=false|true mod=N` is the database
pub fn library_machine(kind: &str, params: &Params) -> Result<IntervalTransducer> {
    let mut r = ParamReader {
        kind,
        params,
        used: Vec::new(),
    };
    let machine: Arc<dyn Primitive> = match kind {
        "pre" | "enc" | "dec" => {
            let input = r.channel("in")?;
            let output = r.channel("out")?;
            if input == output {
                return Err(Error::Library(format!(
                    "library {kind} reads and writes {input}"
                )));
            }
            let (kind, transform, extra) = match kind {
                "pre" => {
                    let f = parse_map(&r.string("f", "id"))?;
                    let shown = render_map(&f);
                    ("pre", Transform::Map(f), vec![("f", shown)])
                }
                "enc" => {
                    let c = r.codec()?;
                    (
                        "enc",
                        Transform::Encode(c),
                        vec![("mod", c.modulus().to_string())],
                    )
                }
                _ => {
                    let c = r.codec()?;
                    let raw = r.flag("raw")?;
                    let t = if raw {
                        Transform::Forward
                    } else {
                        Transform::Decode(c)
                    };
                    (
                        "dec",
                        t,
                        vec![("mod", c.modulus().to_string()), ("raw", raw.to_string())],
                    )
                }
            };
            let mut shown = vec![("in", input.to_string()), ("out", output.to_string())];
            shown.extend(extra);
            Arc::new(Relay {
                kind,
                input,
                output,
                transform,
                params: normalized(&shown),
            })
        }
        "rdb" => {
            let store = r.channel("store")?;
            let query = r.channel("query")?;
            let answer = r.channel("answer")?;
            if store == query || store == answer || query == answer {
                return Err(Error::Library(
                    "library rdb needs three distinct channels".into(),
                ));
            }
            let decode = r.flag("decode")?;
            let codec = r.codec()?;
            let shown = [
                ("answer", answer.to_string()),
                ("decode", decode.to_string()),
                ("mod", codec.modulus().to_string()),
                ("query", query.to_string()),
                ("store", store.to_string()),
            ];
            Arc::new(Rdb {
                store,
                query,
                answer,
                decode: decode.then_some(codec),
                params: normalized(&shown),
            })
        }
        other => {
            return Err(Error::Library(format!(
                "unknown library machine {other:?}; known: {}",
                LIBRARY_KINDS.join(" ")
            )))
        }
    };
    r.finish()?;
    Ok(IntervalTransducer::primitive(machine))
}

/// Convenience for building library machines in code.
pub fn library(kind: &str, params: &[(&str, &str)]) -> Result<IntervalTransducer> {
    let map: Params = params
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    library_machine(kind, &map)
}
