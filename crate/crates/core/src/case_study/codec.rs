//! Keys, data values, entries and the modular difference codec.
//!
//! On the wire an entry is the message `key:value` and a data value is its
//! decimal numeral; `bot` stands for the undefined value.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::streams::Message;

pub const BOT: &str = "bot";

/// A data value, or `⊥` for "never written".
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Data {
    Bot,
    Value(u32),
}

impl Data {
    pub fn to_message(self) -> Message {
        Message::new(&self.to_string()).expect("numerals are valid tokens")
    }

    pub fn parse(m: &Message) -> Result<Data> {
        parse_data(m.as_str())
    }
}

fn parse_data(s: &str) -> Result<Data> {
    if s == BOT {
        return Ok(Data::Bot);
    }
    s.parse::<u32>()
        .map(Data::Value)
        .map_err(|_| Error::Codec(format!("{s:?} is not a data value")))
}

impl fmt::Display for Data {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Data::Bot => f.write_str(BOT),
            Data::Value(v) => write!(f, "{v}"),
        }
    }
}

/// A key/value pair whose value is never `⊥`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Entry {
    pub key: String,
    pub value: u32,
}

impl Entry {
    pub fn new(key: impl Into<String>, value: u32) -> Self {
        Self {
            key: key.into(),
            value,
        }
    }

    pub fn parse(m: &Message) -> Result<Entry> {
        let s = m.as_str();
        let (key, value) = s
            .rsplit_once(':')
            .ok_or_else(|| Error::Codec(format!("{s:?} is not an entry key:value")))?;
        if key.is_empty() {
            return Err(Error::Codec(format!("{s:?} has an empty key")));
        }
        match parse_data(value)? {
            Data::Value(v) => Ok(Entry::new(key, v)),
            Data::Bot => Err(Error::Codec(format!("{s:?} carries the undefined value"))),
        }
    }

    pub fn to_message(&self) -> Message {
        Message::new(&self.to_string()).expect("entry keys are valid tokens")
    }
}

impl fmt::Display for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.key, self.value)
    }
}

/// A total map from keys to data; unwritten keys read as `⊥`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Database(BTreeMap<String, u32>);

impl Database {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &str) -> Data {
        self.0.get(key).map_or(Data::Bot, |&v| Data::Value(v))
    }

    /// `M[k ↦ d]`.
    pub fn updated(&self, key: &str, value: u32) -> Database {
        let mut m = self.0.clone();
        m.insert(key.to_string(), value);
        Database(m)
    }

    pub fn set(&mut self, key: &str, value: u32) {
        self.0.insert(key.to_string(), value);
    }

    pub fn entries(&self) -> impl Iterator<Item = Entry> + '_ {
        self.0.iter().map(|(k, &v)| Entry::new(k.clone(), v))
    }

    pub fn from_entries(entries: impl IntoIterator<Item = Entry>) -> Database {
        Database(entries.into_iter().map(|e| (e.key, e.value)).collect())
    }
}

/// The difference codec over values `0..modulus`:
/// `Δ(x, y) = (y − x) mod n` and `ρ(x, δ) = (x + δ) mod n`, with
/// `Δ(⊥, d) = d` and `ρ(⊥, δ) = δ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Codec {
    modulus: u32,
}

impl Codec {
    pub fn new(modulus: u32) -> Result<Self> {
        if modulus == 0 {
            return Err(Error::Codec("modulus must be positive".into()));
        }
        Ok(Self { modulus })
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    /// The data values `0..modulus` followed by `⊥`.
    pub fn data(&self) -> Vec<Data> {
        (0..self.modulus)
            .map(Data::Value)
            .chain([Data::Bot])
            .collect()
    }

    fn value(&self, d: Data, role: &str) -> Result<u32> {
        match d {
            Data::Value(v) if v < self.modulus => Ok(v),
            Data::Value(v) => Err(Error::Codec(format!(
                "{role} {v} is outside 0..{}",
                self.modulus
            ))),
            Data::Bot => Err(Error::Codec(format!("{role} must not be undefined"))),
        }
    }

    pub fn delta(&self, old: Data, new: Data) -> Result<Data> {
        let new = self.value(new, "new value")?;
        Ok(Data::Value(match old {
            Data::Bot => new,
            old => (new + self.modulus - self.value(old, "old value")?) % self.modulus,
        }))
    }

    pub fn rho(&self, old: Data, diff: Data) -> Result<Data> {
        let diff = self.value(diff, "difference")?;
        Ok(Data::Value(match old {
            Data::Bot => diff,
            old => (self.value(old, "old value")? + diff) % self.modulus,
        }))
    }

    /// Encodes one entry against `db`, recording the new value in `db`.
    pub fn encode(&self, db: &mut Database, e: &Entry) -> Result<Entry> {
        let Data::Value(d) = self.delta(db.get(&e.key), Data::Value(e.value))? else {
            unreachable!("delta of a value is a value")
        };
        db.set(&e.key, e.value);
        Ok(Entry::new(e.key.clone(), d))
    }

    /// Decodes one entry against `db`, recording the restored value in `db`.
    pub fn decode(&self, db: &mut Database, e: &Entry) -> Result<Entry> {
        let Data::Value(v) = self.rho(db.get(&e.key), Data::Value(e.value))? else {
            unreachable!("rho of a value is a value")
        };
        db.set(&e.key, v);
        Ok(Entry::new(e.key.clone(), v))
    }

    /// `Δ*_M`.
    pub fn delta_star(&self, db: &Database, xs: &[Entry]) -> Result<Vec<Entry>> {
        let mut db = db.clone();
        xs.iter().map(|e| self.encode(&mut db, e)).collect()
    }

    /// `ρ*_M`.
    pub fn rho_star(&self, db: &Database, xs: &[Entry]) -> Result<Vec<Entry>> {
        let mut db = db.clone();
        xs.iter().map(|e| self.decode(&mut db, e)).collect()
    }
}
