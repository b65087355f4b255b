//! Recording conditions and their compact notation (`S4cM1`,
//! `S4cM1S2cM2`, `M1M3`).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const MAX_SESSION: u8 = 4;
pub const MAX_MICROPHONE: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Language {
    Catalan,
    Spanish,
}

impl Language {
    pub const ALL: [Language; 2] = [Language::Catalan, Language::Spanish];

    pub fn code(self) -> char {
        match self {
            Language::Catalan => 'c',
            Language::Spanish => 's',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c.to_ascii_lowercase() {
            'c' => Some(Language::Catalan),
            's' => Some(Language::Spanish),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    Normal,
    /// Anechoic room.
    Anechoic,
    Isdn,
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Channel::Normal => "normal",
            Channel::Anechoic => "AR",
            Channel::Isdn => "ISDN",
        }
    }

    fn notation(self) -> &'static str {
        match self {
            Channel::Normal => "",
            other => other.name(),
        }
    }
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "normal" | "" => Ok(Channel::Normal),
            "ar" => Ok(Channel::Anechoic),
            "isdn" => Ok(Channel::Isdn),
            _ => Err(format!("unknown channel {s:?} (expected normal, AR or ISDN)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Condition {
    pub session: u8,
    pub channel: Channel,
    pub language: Language,
    pub microphone: u8,
}

impl Condition {
    pub fn new(session: u8, language: Language, microphone: u8) -> Self {
        Self {
            session,
            channel: Channel::Normal,
            language,
            microphone,
        }
    }

    fn check(self, text: &str) -> Result<Self> {
        if !(1..=MAX_SESSION).contains(&self.session) {
            return Err(cond_err(text, &format!("session S{} out of range S1..S{MAX_SESSION}", self.session)));
        }
        if !(1..=MAX_MICROPHONE).contains(&self.microphone) {
            return Err(cond_err(
                text,
                &format!("microphone M{} out of range M1..M{MAX_MICROPHONE}", self.microphone),
            ));
        }
        Ok(self)
    }
}

fn cond_err(text: &str, reason: &str) -> Error {
    Error::Condition {
        text: text.to_string(),
        reason: reason.to_string(),
    }
}

struct Cursor<'a> {
    text: &'a str,
    rest: &'a str,
}

impl<'a> Cursor<'a> {
    fn eat_char(&mut self, c: char) -> bool {
        match self.rest.chars().next() {
            Some(x) if x.eq_ignore_ascii_case(&c) => {
                self.rest = &self.rest[x.len_utf8()..];
                true
            }
            _ => false,
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.rest.len() >= w.len()
            && self.rest.is_char_boundary(w.len())
            && self.rest[..w.len()].eq_ignore_ascii_case(w)
        {
            self.rest = &self.rest[w.len()..];
            true
        } else {
            false
        }
    }

    fn number(&mut self, what: &str) -> Result<u8> {
        let end = self
            .rest
            .find(|c: char| !c.is_ascii_digit())
            .unwrap_or(self.rest.len());
        if end == 0 {
            return Err(cond_err(self.text, &format!("expected {what} number")));
        }
        let n = self.rest[..end]
            .parse()
            .map_err(|_| cond_err(self.text, &format!("{what} number too large")))?;
        self.rest = &self.rest[end..];
        Ok(n)
    }

    fn microphone(&mut self) -> Result<u8> {
        if !self.eat_char('M') {
            return Err(cond_err(self.text, "expected microphone M<n>"));
        }
        self.number("microphone")
    }

    fn condition(&mut self) -> Result<Condition> {
        if !self.eat_char('S') {
            return Err(cond_err(self.text, "expected session S<n>"));
        }
        let session = self.number("session")?;
        let channel = if self.eat_word("ISDN") {
            Channel::Isdn
        } else if self.eat_word("AR") {
            Channel::Anechoic
        } else {
            Channel::Normal
        };
        let language = self
            .rest
            .chars()
            .next()
            .and_then(Language::from_code)
            .ok_or_else(|| cond_err(self.text, "expected language c or s"))?;
        self.rest = &self.rest[1..];
        let microphone = self.microphone()?;
        Condition {
            session,
            channel,
            language,
            microphone,
        }
        .check(self.text)
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let trimmed = text.trim();
        let mut cur = Cursor {
            text,
            rest: trimmed,
        };
        let c = cur.condition()?;
        if !cur.rest.is_empty() {
            return Err(cond_err(text, &format!("trailing {:?}", cur.rest)));
        }
        Ok(c)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "S{}{}{}M{}",
            self.session,
            self.channel.notation(),
            self.language.code(),
            self.microphone
        )
    }
}

/// Training and testing conditions of one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConditionPair {
    pub train: Condition,
    pub test: Condition,
}

impl ConditionPair {
    pub fn matched(c: Condition) -> Self {
        Self { train: c, test: c }
    }

    /// Parses `S4cM1S2cM2`, `S4cM1M3`, or (given `base`) `M1M3`.
    ///
    /// `base` supplies session, channel and language for the microphone-only
    /// form; it is written like a condition without microphone, e.g. `S4c`.
    pub fn parse(text: &str, base: Option<&str>) -> Result<Self> {
        let trimmed = text.trim();
        let mut cur = Cursor {
            text,
            rest: trimmed,
        };
        let train = if trimmed.starts_with(['M', 'm']) {
            let base = base.ok_or_else(|| {
                cond_err(text, "microphone-pair notation needs a session/language base such as S4c")
            })?;
            let mic = cur.microphone()?;
            let proto: Condition = format!("{base}M{mic}").parse().map_err(|_| {
                cond_err(text, &format!("invalid session/language base {base:?}"))
            })?;
            proto
        } else {
            cur.condition()?
        };
        let test = if cur.rest.starts_with(['M', 'm']) {
            let mic = cur.microphone()?;
            Condition {
                microphone: mic,
                ..train
            }
            .check(text)?
        } else {
            cur.condition()?
        };
        if !cur.rest.is_empty() {
            return Err(cond_err(text, &format!("trailing {:?}", cur.rest)));
        }
        Ok(Self { train, test })
    }

    pub fn parse_list(text: &str, base: Option<&str>) -> Result<Vec<Self>> {
        text.split([',', ';'])
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| Self::parse(s, base))
            .collect()
    }
}

impl fmt::Display for ConditionPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let same_but_mic = Condition {
            microphone: self.train.microphone,
            ..self.test
        } == self.train;
        if same_but_mic {
            write!(f, "{}M{}", self.train, self.test.microphone)
        } else {
            write!(f, "{}{}", self.train, self.test)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Train,
    Dev,
    Test,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Dev => "dev",
            Role::Test => "test",
        }
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Role::Train),
            "dev" => Ok(Role::Dev),
            "test" => Ok(Role::Test),
            _ => Err(format!("unknown role {s:?} (expected train, dev or test)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_condition_notation() {
        let c: Condition = "S4cM1".parse().unwrap();
        assert_eq!(c, Condition::new(4, Language::Catalan, 1));
        let c: Condition = "s3ISDNsm2".parse().unwrap();
        assert_eq!(c.channel, Channel::Isdn);
        assert_eq!(c.language, Language::Spanish);
        assert_eq!(c.to_string(), "S3ISDNsM2");

        let p = ConditionPair::parse("S4cM1S2cM2", None).unwrap();
        assert_eq!(p.train, Condition::new(4, Language::Catalan, 1));
        assert_eq!(p.test, Condition::new(2, Language::Catalan, 2));
        assert_eq!(p.to_string(), "S4cM1S2cM2");

        let p = ConditionPair::parse("S4cM1M1", None).unwrap();
        assert_eq!(p, ConditionPair::matched("S4cM1".parse().unwrap()));
        assert_eq!(p.to_string(), "S4cM1M1");

        let p = ConditionPair::parse("M1M3", Some("S4c")).unwrap();
        assert_eq!(p.to_string(), "S4cM1M3");
        assert!(ConditionPair::parse("M1M3", None).is_err());

        let list = ConditionPair::parse_list("M1M1,M1M3, M3M3,M3M1", Some("S4c")).unwrap();
        assert_eq!(list.len(), 4);
        assert_eq!(list[3].train.microphone, 3);
    }

    #[test]
    fn rejects_bad_notation() {
        for bad in ["", "S5cM1", "S4xM1", "S4cM9", "S4c", "S4cM1X", "4cM1", "S4cM", "S99999cM1", "SécM1"] {
            assert!(bad.parse::<Condition>().is_err(), "{bad:?}");
        }
        let err = "S4cM9".parse::<Condition>().unwrap_err();
        assert!(err.to_string().contains("M9"));
        assert!(ConditionPair::parse("S4cM1S2", None).is_err());
        assert!(ConditionPair::parse("M1M3", Some("S9c")).is_err());
    }

    fn arb_condition() -> impl Strategy<Value = Condition> {
        (
            1u8..=4,
            prop_oneof![Just(Channel::Normal), Just(Channel::Anechoic), Just(Channel::Isdn)],
            prop_oneof![Just(Language::Catalan), Just(Language::Spanish)],
            1u8..=3,
        )
            .prop_map(|(session, channel, language, microphone)| Condition {
                session,
                channel,
                language,
                microphone,
            })
    }

    proptest! {
        #[test]
        fn notation_round_trips(train in arb_condition(), test in arb_condition()) {
            prop_assert_eq!(train.to_string().parse::<Condition>().unwrap(), train);
            let pair = ConditionPair { train, test };
            prop_assert_eq!(ConditionPair::parse(&pair.to_string(), None).unwrap(), pair);
        }
    }
}
