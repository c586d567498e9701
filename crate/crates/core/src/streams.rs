//! Finite-horizon timed streams and named stream tuples.
//!
//! A timed stream is a sequence of intervals, each interval a finite sequence
//! of messages. Streams are carried up to a horizon `H`: every semantic
//! statement made by this crate is a statement about the first `H` intervals.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

fn valid_token(s: &str) -> bool {
    !s.is_empty()
        && !s
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, '<' | '>' | ',' | '=' | '#'))
}

macro_rules! token_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(Arc<str>);

        impl $name {
            pub fn new(token: &str) -> Result<Self> {
                if valid_token(token) {
                    Ok(Self(Arc::from(token)))
                } else {
                    Err(Error::InvalidToken(token.to_string()))
                }
            }

            /// Builds a token from a literal known to be valid.
            ///
            /// Panics on an invalid literal.
            pub fn from_static(token: &'static str) -> Self {
                Self::new(token).expect("invalid literal token")
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                Self::new(s)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(&self.0)
            }
        }
    };
}

token_type!(
    /// Name of a channel. Equality is exact token equality.
    ChannelId
);
token_type!(
    /// A message value drawn from a channel's alphabet.
    Message
);

pub type ChannelSet = BTreeSet<ChannelId>;

/// Builds a channel set from literal names.
pub fn channels(names: &[&'static str]) -> ChannelSet {
    names.iter().map(|n| ChannelId::from_static(n)).collect()
}

/// The messages transmitted on one channel during one time interval.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Interval(Vec<Message>);

impl Interval {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn from_messages(messages: Vec<Message>) -> Self {
        Self(messages)
    }

    pub fn messages(&self) -> &[Message] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Canonical ordering key: shorter intervals first, then lexicographic.
    fn canonical_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<")?;
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{m}")?;
        }
        f.write_str(">")
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Interval {
    type Err = Error;

    /// Parses `<>` or `<m1,m2,...>`.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s
            .strip_prefix('<')
            .and_then(|r| r.strip_suffix('>'))
            .ok_or_else(|| Error::InvalidToken(s.to_string()))?;
        if inner.is_empty() {
            return Ok(Self::empty());
        }
        inner
            .split(',')
            .map(Message::new)
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

/// A timed stream truncated to a finite horizon.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimedStream {
    intervals: Vec<Interval>,
}

impl TimedStream {
    pub fn new(intervals: Vec<Interval>) -> Self {
        Self { intervals }
    }

    /// A stream of `horizon` empty intervals.
    pub fn silent(horizon: usize) -> Self {
        Self::new(vec![Interval::empty(); horizon])
    }

    pub fn horizon(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn interval(&self, t: usize) -> Option<&Interval> {
        self.intervals.get(t)
    }

    /// The first `i` intervals.
    pub fn prefix(&self, i: usize) -> Result<TimedStream> {
        if i > self.horizon() {
            return Err(Error::Range {
                index: i,
                horizon: self.horizon(),
            });
        }
        Ok(Self::new(self.intervals[..i].to_vec()))
    }

    /// Concatenation of all intervals, forgetting interval boundaries.
    pub fn flatten(&self) -> Vec<Message> {
        self.intervals
            .iter()
            .flat_map(|iv| iv.messages().iter().cloned())
            .collect()
    }
}

impl fmt::Display for TimedStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, iv) in self.intervals.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{iv}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for TimedStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{self}]")
    }
}

impl Serialize for TimedStream {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.intervals.serialize(s)
    }
}

/// Splits a nonempty message sequence into its first element and the rest.
pub fn head_rest(seq: &[Message]) -> Result<(Message, Vec<Message>)> {
    match seq.split_first() {
        Some((head, rest)) => Ok((head.clone(), rest.to_vec())),
        None => Err(Error::EmptySequence),
    }
}

/// One time slice of a named stream tuple: an interval per channel.
///
/// Bindings are kept sorted by channel, so two assignments over the same
/// domain compare in the canonical channel order.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Assignment(Vec<(ChannelId, Interval)>);

impl Assignment {
    /// Builds an assignment from arbitrary bindings. Later duplicates win.
    pub fn new(bindings: impl IntoIterator<Item = (ChannelId, Interval)>) -> Self {
        let map: BTreeMap<_, _> = bindings.into_iter().collect();
        Self(map.into_iter().collect())
    }

    /// The all-empty assignment over `domain`.
    pub fn silent(domain: &ChannelSet) -> Self {
        Self(
            domain
                .iter()
                .map(|c| (c.clone(), Interval::empty()))
                .collect(),
        )
    }

    pub fn bindings(&self) -> &[(ChannelId, Interval)] {
        &self.0
    }

    pub fn domain(&self) -> ChannelSet {
        self.0.iter().map(|(c, _)| c.clone()).collect()
    }

    pub fn has_domain(&self, domain: &ChannelSet) -> bool {
        self.0.len() == domain.len() && self.0.iter().zip(domain).all(|((c, _), d)| c == d)
    }

    pub fn get(&self, channel: &ChannelId) -> Option<&Interval> {
        self.0
            .binary_search_by(|(c, _)| c.cmp(channel))
            .ok()
            .map(|i| &self.0[i].1)
    }

    pub fn restrict(&self, domain: &ChannelSet) -> Assignment {
        Self(
            self.0
                .iter()
                .filter(|(c, _)| domain.contains(c))
                .cloned()
                .collect(),
        )
    }

    /// Union of two assignments. On a shared channel `self` wins.
    pub fn union(&self, other: &Assignment) -> Assignment {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(self.0[i].clone());
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(other.0[j].clone());
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(self.0[i].clone());
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Self(out)
    }

    /// Renames channels through `map`; unmapped channels keep their name.
    pub fn rename(&self, map: &BTreeMap<ChannelId, ChannelId>) -> Assignment {
        Self::new(
            self.0
                .iter()
                .map(|(c, iv)| (map.get(c).cloned().unwrap_or_else(|| c.clone()), iv.clone())),
        )
    }

    pub fn total_messages(&self) -> usize {
        self.0.iter().map(|(_, iv)| iv.len()).sum()
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (c, iv)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{c}={iv}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{self}}}")
    }
}

/// A finite-horizon assignment of timed streams to a set of channels.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NamedStreamTuple {
    horizon: usize,
    bindings: BTreeMap<ChannelId, TimedStream>,
}

impl NamedStreamTuple {
    pub fn new(horizon: usize, bindings: BTreeMap<ChannelId, TimedStream>) -> Result<Self> {
        if let Some((c, s)) = bindings.iter().find(|(_, s)| s.horizon() != horizon) {
            return Err(Error::Merge(format!(
                "stream on {c} has horizon {}, expected {horizon}",
                s.horizon()
            )));
        }
        Ok(Self { horizon, bindings })
    }

    /// The tuple with no channels.
    pub fn empty(horizon: usize) -> Self {
        Self {
            horizon,
            bindings: BTreeMap::new(),
        }
    }

    /// The all-silent tuple over `domain`.
    pub fn silent(domain: &ChannelSet, horizon: usize) -> Self {
        Self {
            horizon,
            bindings: domain
                .iter()
                .map(|c| (c.clone(), TimedStream::silent(horizon)))
                .collect(),
        }
    }

    /// Assembles a tuple over `domain` from per-step slices.
    pub fn from_slices(domain: &ChannelSet, slices: &[Assignment]) -> Self {
        let horizon = slices.len();
        let bindings = domain
            .iter()
            .map(|c| {
                let intervals = slices
                    .iter()
                    .map(|a| a.get(c).cloned().unwrap_or_default())
                    .collect();
                (c.clone(), TimedStream::new(intervals))
            })
            .collect();
        Self { horizon, bindings }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn domain(&self) -> ChannelSet {
        self.bindings.keys().cloned().collect()
    }

    pub fn get(&self, channel: &ChannelId) -> Option<&TimedStream> {
        self.bindings.get(channel)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ChannelId, &TimedStream)> {
        self.bindings.iter()
    }

    /// The slice of all channels at step `t`.
    pub fn slice(&self, t: usize) -> Assignment {
        Assignment(
            self.bindings
                .iter()
                .map(|(c, s)| (c.clone(), s.intervals()[t].clone()))
                .collect(),
        )
    }

    pub fn slices(&self) -> Vec<Assignment> {
        (0..self.horizon).map(|t| self.slice(t)).collect()
    }

    /// Restriction to `domain`, which must be a subset of this tuple's domain.
    pub fn restrict(&self, domain: &ChannelSet) -> Result<NamedStreamTuple> {
        let missing: Vec<String> = domain
            .iter()
            .filter(|c| !self.bindings.contains_key(*c))
            .map(|c| c.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Domain { missing });
        }
        Ok(Self {
            horizon: self.horizon,
            bindings: self
                .bindings
                .iter()
                .filter(|(c, _)| domain.contains(*c))
                .map(|(c, s)| (c.clone(), s.clone()))
                .collect(),
        })
    }

    /// Union of two tuples with disjoint domains and equal horizons.
    pub fn merge(&self, other: &NamedStreamTuple) -> Result<NamedStreamTuple> {
        if self.horizon != other.horizon {
            return Err(Error::Merge(format!(
                "horizons differ: {} vs {}",
                self.horizon, other.horizon
            )));
        }
        if let Some(c) = other
            .bindings
            .keys()
            .find(|c| self.bindings.contains_key(*c))
        {
            return Err(Error::Merge(format!("channel {c} bound in both tuples")));
        }
        let mut bindings = self.bindings.clone();
        bindings.extend(other.bindings.iter().map(|(c, s)| (c.clone(), s.clone())));
        Ok(Self {
            horizon: self.horizon,
            bindings,
        })
    }

    /// Every stream truncated to its first `i` intervals.
    pub fn prefix(&self, i: usize) -> Result<NamedStreamTuple> {
        if i > self.horizon {
            return Err(Error::Range {
                index: i,
                horizon: self.horizon,
            });
        }
        Ok(Self {
            horizon: i,
            bindings: self
                .bindings
                .iter()
                .map(|(c, s)| (c.clone(), TimedStream::new(s.intervals()[..i].to_vec())))
                .collect(),
        })
    }

    /// Renames channels; the map must be injective on this domain.
    pub fn rename(&self, map: &BTreeMap<ChannelId, ChannelId>) -> NamedStreamTuple {
        Self {
            horizon: self.horizon,
            bindings: self
                .bindings
                .iter()
                .map(|(c, s)| (map.get(c).cloned().unwrap_or_else(|| c.clone()), s.clone()))
                .collect(),
        }
    }
}

impl fmt::Display for NamedStreamTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (c, s)) in self.bindings.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{c} = {s}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for NamedStreamTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{self}}}")
    }
}

impl Serialize for NamedStreamTuple {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.bindings.serialize(s)
    }
}

/// A named finite message set.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Alphabet {
    name: String,
    messages: Vec<Message>,
}

impl Alphabet {
    /// Messages are sorted and deduplicated.
    pub fn new(name: impl Into<String>, messages: impl IntoIterator<Item = Message>) -> Self {
        let set: BTreeSet<Message> = messages.into_iter().collect();
        Self {
            name: name.into(),
            messages: set.into_iter().collect(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn contains(&self, m: &Message) -> bool {
        self.messages.binary_search(m).is_ok()
    }
}

/// Horizon, burst bound and per-channel alphabets governing every bounded check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnumerationBounds {
    horizon: usize,
    burst: usize,
    alphabets: BTreeMap<ChannelId, Arc<Alphabet>>,
}

impl EnumerationBounds {
    pub fn new(
        horizon: usize,
        burst: usize,
        alphabets: BTreeMap<ChannelId, Arc<Alphabet>>,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Bounds("horizon must be at least 1".into()));
        }
        if burst == 0 {
            return Err(Error::Bounds("burst bound must be at least 1".into()));
        }
        if let Some((c, _)) = alphabets.iter().find(|(_, a)| a.messages().is_empty()) {
            return Err(Error::Bounds(format!("alphabet of channel {c} is empty")));
        }
        Ok(Self {
            horizon,
            burst,
            alphabets,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn burst(&self) -> usize {
        self.burst
    }

    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        Self::new(horizon, self.burst, self.alphabets.clone())
    }

    pub fn with_burst(&self, burst: usize) -> Result<Self> {
        Self::new(self.horizon, burst, self.alphabets.clone())
    }

    pub fn alphabets(&self) -> &BTreeMap<ChannelId, Arc<Alphabet>> {
        &self.alphabets
    }

    pub fn alphabet(&self, channel: &ChannelId) -> Option<&Arc<Alphabet>> {
        self.alphabets.get(channel)
    }

    /// Declares (or redeclares) the alphabet of a channel.
    pub fn declare(&mut self, channel: ChannelId, alphabet: Arc<Alphabet>) {
        self.alphabets.insert(channel, alphabet);
    }

    pub fn remove(&mut self, channel: &ChannelId) {
        self.alphabets.remove(channel);
    }

    /// Checks burst and alphabet conformance of one interval on `channel`.
    pub fn check_interval(&self, channel: &ChannelId, interval: &Interval) -> Result<()> {
        if interval.len() > self.burst {
            return Err(Error::Bounds(format!(
                "interval {interval} on {channel} exceeds burst bound {}",
                self.burst
            )));
        }
        let alphabet = self
            .alphabets
            .get(channel)
            .ok_or_else(|| Error::Bounds(format!("channel {channel} has no declared alphabet")))?;
        if let Some(m) = interval.messages().iter().find(|m| !alphabet.contains(m)) {
            return Err(Error::Bounds(format!(
                "message {m} is not in the alphabet {} of channel {channel}",
                alphabet.name()
            )));
        }
        Ok(())
    }

    pub fn check_assignment(&self, a: &Assignment) -> Result<()> {
        a.bindings()
            .iter()
            .try_for_each(|(c, iv)| self.check_interval(c, iv))
    }

    pub fn check_tuple(&self, x: &NamedStreamTuple) -> Result<()> {
        for (c, s) in x.iter() {
            for iv in s.intervals() {
                self.check_interval(c, iv)?;
            }
        }
        Ok(())
    }

    /// All in-bounds intervals on `channel`, shortest first, then lexicographic.
    pub fn intervals(&self, channel: &ChannelId) -> Result<Vec<Interval>> {
        let alphabet = self
            .alphabets
            .get(channel)
            .ok_or_else(|| Error::Bounds(format!("channel {channel} has no declared alphabet")))?;
        let mut out = vec![Interval::empty()];
        let mut layer = vec![Interval::empty()];
        for _ in 0..self.burst {
            let next: Vec<Interval> = layer
                .iter()
                .flat_map(|iv| {
                    alphabet.messages().iter().map(move |m| {
                        let mut v = iv.0.clone();
                        v.push(m.clone());
                        Interval(v)
                    })
                })
                .collect();
            out.extend(next.iter().cloned());
            layer = next;
        }
        out.sort_by(|a, b| a.canonical_cmp(b));
        Ok(out)
    }

    /// All in-bounds assignments over `domain`, in canonical order.
    pub fn assignments(&self, domain: &ChannelSet) -> Result<Vec<Assignment>> {
        let mut out = vec![Assignment::default()];
        for c in domain {
            let options = self.intervals(c)?;
            out = out
                .iter()
                .flat_map(|a| {
                    options.iter().map(move |iv| {
                        let mut v = a.0.clone();
                        v.push((c.clone(), iv.clone()));
                        Assignment(v)
                    })
                })
                .collect();
        }
        Ok(out)
    }

    /// All in-bounds tuples over `domain` at this horizon. Exponential; test scale only.
    pub fn tuples(&self, domain: &ChannelSet) -> Result<Vec<NamedStreamTuple>> {
        let per_step = self.assignments(domain)?;
        let mut prefixes: Vec<Vec<Assignment>> = vec![Vec::new()];
        for _ in 0..self.horizon {
            prefixes = prefixes
                .into_iter()
                .flat_map(|p| {
                    per_step.iter().map(move |a| {
                        let mut q = p.clone();
                        q.push(a.clone());
                        q
                    })
                })
                .collect();
        }
        Ok(prefixes
            .iter()
            .map(|slices| NamedStreamTuple::from_slices(domain, slices))
            .collect())
    }
}
