//! Invariants over system histories, evaluated by deterministic monitors.
//!
//! A monitor reads a history one time slice at a time. Every invariant here
//! is prefix-closed: once a prefix violates it, every extension does, and the
//! monitor enters a dead state. A history satisfies the invariant iff the
//! monitor is not dead after its last slice.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use rustc_hash::FxHashSet;

use crate::behaviors::State;
use crate::case_study::{Codec, Database, Entry};
use crate::error::Result;
use crate::streams::{
    Assignment, ChannelId, ChannelSet, EnumerationBounds, Message, NamedStreamTuple,
};

const DEAD: State = State::Index(u32::MAX);

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Invariant {
    True,
    /// The channel never carries a message.
    Empty(ChannelId),
    /// At every time boundary, the messages so far on `follower` are a
    /// prefix of the messages so far on `leader`.
    Prefix {
        follower: ChannelId,
        leader: ChannelId,
    },
    /// At every time boundary, the entries so far on `follower` are a prefix
    /// of the entries so far on `source`, and equal the difference-encoded
    /// then decoded image (from the empty database) of that prefix.
    CodecPrefix {
        follower: ChannelId,
        source: ChannelId,
        codec: Codec,
    },
    And(Vec<Invariant>),
}

fn messages<'a>(slice: &'a Assignment, c: &ChannelId) -> &'a [Message] {
    slice.get(c).map_or(&[], |iv| iv.messages())
}

fn db_state(db: &Database) -> State {
    State::seq(db.entries().map(|e| e.to_message()).collect())
}

fn db_of(state: &State) -> Database {
    match state {
        State::Seq(ms) => Database::from_entries(ms.iter().filter_map(|m| Entry::parse(m).ok())),
        _ => Database::new(),
    }
}

fn seq_of(state: &State) -> VecDeque<Message> {
    match state {
        State::Seq(ms) => ms.iter().cloned().collect(),
        _ => VecDeque::new(),
    }
}

impl Invariant {
    /// The conjunction, flattening nested conjunctions and dropping `True`.
    pub fn and(parts: Vec<Invariant>) -> Invariant {
        let mut flat = Vec::new();
        for p in parts {
            match p {
                Invariant::True => {}
                Invariant::And(inner) => flat.extend(inner),
                p => flat.push(p),
            }
        }
        match flat.len() {
            0 => Invariant::True,
            1 => flat.pop().expect("one element"),
            _ => Invariant::And(flat),
        }
    }

    /// The channels the invariant reads.
    pub fn support(&self) -> ChannelSet {
        match self {
            Invariant::True => ChannelSet::new(),
            Invariant::Empty(c) => [c.clone()].into_iter().collect(),
            Invariant::Prefix { follower, leader } => {
                [follower.clone(), leader.clone()].into_iter().collect()
            }
            Invariant::CodecPrefix {
                follower, source, ..
            } => [follower.clone(), source.clone()].into_iter().collect(),
            Invariant::And(parts) => parts.iter().flat_map(|p| p.support()).collect(),
        }
    }

    /// The conjuncts, one per line of the textual form.
    pub fn clauses(&self) -> Vec<&Invariant> {
        match self {
            Invariant::And(parts) => parts.iter().flat_map(|p| p.clauses()).collect(),
            p => vec![p],
        }
    }

    pub fn start(&self) -> State {
        match self {
            Invariant::True | Invariant::Empty(_) => State::Unit,
            Invariant::Prefix { .. } => State::seq(Vec::new()),
            Invariant::CodecPrefix { .. } => State::tuple(vec![
                db_state(&Database::new()),
                db_state(&Database::new()),
                State::seq(Vec::new()),
                State::seq(Vec::new()),
            ]),
            Invariant::And(parts) => State::tuple(parts.iter().map(|p| p.start()).collect()),
        }
    }

    /// The monitor state after reading one more time slice.
    pub fn observe(&self, state: &State, slice: &Assignment) -> State {
        if *state == DEAD {
            return DEAD;
        }
        match self {
            Invariant::True => State::Unit,
            Invariant::Empty(c) => {
                if messages(slice, c).is_empty() {
                    State::Unit
                } else {
                    DEAD
                }
            }
            Invariant::Prefix { follower, leader } => {
                let mut pending = seq_of(state);
                pending.extend(messages(slice, leader).iter().cloned());
                for m in messages(slice, follower) {
                    if pending.pop_front().as_ref() != Some(m) {
                        return DEAD;
                    }
                }
                State::seq(pending.into())
            }
            Invariant::CodecPrefix {
                follower,
                source,
                codec,
            } => observe_codec(
                codec,
                state,
                messages(slice, source),
                messages(slice, follower),
            )
            .unwrap_or(DEAD),
            Invariant::And(parts) => {
                let State::Tuple(states) = state else {
                    return DEAD;
                };
                let mut next = Vec::with_capacity(parts.len());
                for (p, s) in parts.iter().zip(states.iter()) {
                    let n = p.observe(s, slice);
                    if n == DEAD {
                        return DEAD;
                    }
                    next.push(n);
                }
                State::tuple(next)
            }
        }
    }

    pub fn is_dead(&self, state: &State) -> bool {
        *state == DEAD
    }

    pub fn accepts(&self, state: &State) -> bool {
        !self.is_dead(state)
    }

    /// Evaluates the invariant on a complete history.
    pub fn holds(&self, l: &NamedStreamTuple) -> bool {
        let mut s = self.start();
        for t in 0..l.horizon() {
            s = self.observe(&s, &l.slice(t));
            if self.is_dead(&s) {
                return false;
            }
        }
        self.accepts(&s)
    }
}

/// State layout: encoder database, decoder database, and the raw and
/// round-tripped source entries not yet matched by the follower.
fn observe_codec(
    codec: &Codec,
    state: &State,
    source: &[Message],
    follower: &[Message],
) -> Option<State> {
    let State::Tuple(parts) = state else {
        return None;
    };
    let mut enc_db = db_of(&parts[0]);
    let mut dec_db = db_of(&parts[1]);
    let mut raw = seq_of(&parts[2]);
    let mut decoded = seq_of(&parts[3]);
    for m in source {
        let e = Entry::parse(m).ok()?;
        let d = codec.encode(&mut enc_db, &e).ok()?;
        let r = codec.decode(&mut dec_db, &d).ok()?;
        raw.push_back(m.clone());
        decoded.push_back(r.to_message());
    }
    for m in follower {
        let (a, b) = (raw.pop_front()?, decoded.pop_front()?);
        if *m != a || *m != b {
            return None;
        }
    }
    Some(State::tuple(vec![
        db_state(&enc_db),
        db_state(&dec_db),
        State::seq(raw.into()),
        State::seq(decoded.into()),
    ]))
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Invariant::True => f.write_str("true"),
            Invariant::Empty(c) => write!(f, "empty {c}"),
            Invariant::Prefix { follower, leader } => write!(f, "prefix {follower} {leader}"),
            Invariant::CodecPrefix {
                follower,
                source,
                codec,
            } => write!(
                f,
                "codec-prefix {follower} {source} mod={}",
                codec.modulus()
            ),
            Invariant::And(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" and ")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
        }
    }
}

/// Searches for an environment input over `env` that no assignment of the
/// remaining support channels extends to a history satisfying `inv`.
pub(crate) fn find_constrained_env(
    inv: &Invariant,
    env: &ChannelSet,
    bounds: &EnumerationBounds,
) -> Result<Option<NamedStreamTuple>> {
    let support = inv.support();
    let env_part: ChannelSet = support.intersection(env).cloned().collect();
    let rest: ChannelSet = support.difference(env).cloned().collect();
    let mut search = EnvSearch {
        inv,
        bounds,
        env_slices: bounds.assignments(&env_part)?,
        rest_slices: bounds.assignments(&rest)?,
        visited: FxHashSet::default(),
        prefix: Vec::new(),
    };
    let start: BTreeSet<State> = [inv.start()].into_iter().collect();
    if search.dfs(0, start) {
        Ok(Some(NamedStreamTuple::from_slices(
            &env_part,
            &search.prefix,
        )))
    } else {
        Ok(None)
    }
}

struct EnvSearch<'a> {
    inv: &'a Invariant,
    bounds: &'a EnumerationBounds,
    env_slices: Vec<Assignment>,
    rest_slices: Vec<Assignment>,
    visited: FxHashSet<(usize, BTreeSet<State>)>,
    prefix: Vec<Assignment>,
}

impl EnvSearch<'_> {
    fn dfs(&mut self, t: usize, states: BTreeSet<State>) -> bool {
        if t == self.bounds.horizon() {
            return !states.iter().any(|s| self.inv.accepts(s));
        }
        if !self.visited.insert((t, states.clone())) {
            return false;
        }
        for e in self.env_slices.clone() {
            let mut next = BTreeSet::new();
            for s in &states {
                for r in &self.rest_slices {
                    let n = self.inv.observe(s, &e.union(r));
                    if !self.inv.is_dead(&n) {
                        next.insert(n);
                    }
                }
            }
            self.prefix.push(e);
            if next.is_empty() {
                while self.prefix.len() < self.bounds.horizon() {
                    self.prefix.push(self.env_slices[0].clone());
                }
                return true;
            }
            if self.dfs(t + 1, next) {
                return true;
            }
            self.prefix.pop();
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behaviors::binding;
    use crate::streams::{channels, Alphabet};
    use std::collections::BTreeMap;
    use std::sync::Arc;

    fn ch(s: &'static str) -> ChannelId {
        ChannelId::from_static(s)
    }

    fn tuple(slices: &[&[(&'static str, &str)]]) -> NamedStreamTuple {
        let slices: Vec<Assignment> = slices.iter().map(|s| binding(s)).collect();
        NamedStreamTuple::from_slices(&channels(&["I", "R"]), &slices)
    }

    fn codec_inv() -> Invariant {
        Invariant::CodecPrefix {
            follower: ch("R"),
            source: ch("I"),
            codec: Codec::new(3).unwrap(),
        }
    }

    #[test]
    fn codec_prefix_accepts_lagging_copy() {
        let l = tuple(&[
            &[("I", "<a:1>")],
            &[("I", "<a:2>"), ("R", "<a:1>")],
            &[("R", "<a:2>")],
        ]);
        assert!(codec_inv().holds(&l));
    }

    #[test]
    fn codec_prefix_rejects_foreign_entry() {
        let l = tuple(&[&[("I", "<a:1>")], &[("R", "<a:2>")]]);
        assert!(!codec_inv().holds(&l));
        let early = tuple(&[&[("R", "<a:1>")], &[("I", "<a:1>")]]);
        assert!(!codec_inv().holds(&early));
    }

    #[test]
    fn prefix_and_empty() {
        let p = Invariant::Prefix {
            follower: ch("R"),
            leader: ch("I"),
        };
        let l = tuple(&[&[("I", "<a:1>"), ("R", "<a:1>")], &[]]);
        assert!(p.holds(&l));
        assert!(!Invariant::Empty(ch("R")).holds(&l));
        assert!(Invariant::and(vec![Invariant::True, p.clone()]) == p);
        assert!(!Invariant::and(vec![p, Invariant::Empty(ch("I"))]).holds(&l));
    }

    #[test]
    fn env_constraint_is_detected() {
        let alph = Arc::new(Alphabet::new("E", [Message::from_static("a:1")]));
        let map: BTreeMap<_, _> = [(ch("I"), alph.clone()), (ch("R"), alph)].into();
        let bounds = EnumerationBounds::new(2, 1, map).unwrap();
        let env = channels(&["I"]);
        assert!(find_constrained_env(&codec_inv(), &env, &bounds)
            .unwrap()
            .is_none());
        let bad = find_constrained_env(&Invariant::Empty(ch("I")), &env, &bounds)
            .unwrap()
            .unwrap();
        assert!(!Invariant::Empty(ch("I")).holds(&bad));
        assert!(bad.slice(0).get(&ch("I")).unwrap().is_empty());
    }
}
