//! Declarative parameterization chains and their text syntax.
//!
//! Grammar: atoms joined by `+` (or `-`, as in `CMS-LW` and `SIGMA-LPCC`),
//! case-insensitive. Atoms:
//!
//! | atom | meaning |
//! |------|---------|
//! | `LPCC`, `LPCC[k..P]` | LPC cepstrum base, optionally dropping coefficients 1..k-1 |
//! | `ACW`, `ACW[k..P]` | adaptive component weighted base |
//! | `CMS` | cepstral mean subtraction |
//! | `SIGMA`, `σ`, `STD` | per-coefficient standard deviation scaling |
//! | `LW` | linear lifter `w(n) = n` |
//! | `BPL`, `BPL(h)` | bandpass lifter `w(n) = 1 + h sin(n pi / L)`, h defaults to 0.5 |
//! | `PF`, `PF(alpha,beta)` | postfilter lifter `w(n) = alpha^n - beta^n`, defaults (1, 0.9) |
//!
//! Normalizations run in the order they are written; base, drop and lifter
//! may appear anywhere.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const BPL_HALF_GAIN: f64 = 0.5;
pub const PF_ALPHA: f64 = 1.0;
pub const PF_BETA: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Base {
    Lpcc,
    Acw,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lifter {
    Linear,
    Bandpass { half_gain: f64 },
    Postfilter { alpha: f64, beta: f64 },
}

impl Lifter {
    /// Weight for cepstral index `n` (1-based) with lifter length `len`.
    pub fn weight(&self, n: usize, len: usize) -> f64 {
        if n == 0 || n > len {
            return 0.0;
        }
        let nf = n as f64;
        match *self {
            Lifter::Linear => nf,
            Lifter::Bandpass { half_gain } => {
                1.0 + half_gain * (nf * std::f64::consts::PI / len as f64).sin()
            }
            Lifter::Postfilter { alpha, beta } => alpha.powi(n as i32) - beta.powi(n as i32),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Normalization {
    Cms,
    Sigma,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamChain {
    pub base: Base,
    /// Number of leading coefficients (1..=k) removed.
    pub drop_first: usize,
    pub lifter: Option<Lifter>,
    pub normalizations: Vec<Normalization>,
}

impl Default for ParamChain {
    fn default() -> Self {
        Self {
            base: Base::Lpcc,
            drop_first: 0,
            lifter: None,
            normalizations: Vec::new(),
        }
    }
}

/// The thirteen standard chains, from plain LPCC to combined CMS, PF and
/// sigma scaling.
pub const STANDARD_CHAINS: [&str; 13] = [
    "LPCC",
    "LPCC[3..P]",
    "SIGMA-LPCC",
    "ACW",
    "CMS",
    "CMS+ACW",
    "CMS+ACW+SIGMA",
    "CMS+SIGMA",
    "CMS-LW",
    "ACW+SIGMA",
    "PF",
    "CMS+PF",
    "CMS+PF+SIGMA",
];

impl ParamChain {
    pub fn standard_chains() -> Vec<ParamChain> {
        STANDARD_CHAINS
            .iter()
            .map(|s| s.parse().expect("table chain labels parse"))
            .collect()
    }

    /// Feature dimension produced from `order` cepstral coefficients.
    pub fn output_dim(&self, order: usize) -> usize {
        order.saturating_sub(self.drop_first)
    }

    /// Canonical name with characters unsafe in file names replaced.
    pub fn file_stem(&self) -> String {
        self.to_string()
            .chars()
            .map(|c| match c {
                '[' | ']' | '(' | ')' | ',' | '/' | '\\' | ' ' => '_',
                c => c,
            })
            .collect()
    }

    pub fn parse_list(text: &str) -> Result<Vec<ParamChain>> {
        text.split(';')
            .flat_map(|part| split_top_level(part, &[',']))
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect()
    }
}

fn split_top_level<'a>(text: &'a str, seps: &[char]) -> Vec<&'a str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            c if depth == 0 && seps.contains(&c) => {
                out.push(&text[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    out.push(&text[start..]);
    out
}

fn parse_args(text: &str, inner: &str, expected: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = inner
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| syntax(text, &format!("bad numeric argument list ({inner})")))?;
    if vals.len() != expected || vals.iter().any(|v| !v.is_finite()) {
        return Err(syntax(text, &format!("expected {expected} finite argument(s)")));
    }
    Ok(vals)
}

fn syntax(text: &str, reason: &str) -> Error {
    Error::ChainSyntax {
        text: text.to_string(),
        reason: reason.to_string(),
    }
}

/// Parses `k..P` or `k..N` and returns the number of dropped coefficients.
fn parse_range(text: &str, inner: &str) -> Result<usize> {
    let (lo, _hi) = inner
        .split_once("..")
        .ok_or_else(|| syntax(text, "coefficient range must look like [3..P]"))?;
    let lo: usize = lo
        .trim()
        .parse()
        .map_err(|_| syntax(text, "coefficient range start must be an integer"))?;
    if lo == 0 {
        return Err(syntax(text, "coefficient indices start at 1"));
    }
    Ok(lo - 1)
}

impl FromStr for ParamChain {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut base: Option<Base> = None;
        let mut saw_lpcc = false;
        let mut drop_first: Option<usize> = None;
        let mut lifter: Option<Lifter> = None;
        let mut norms: Vec<Normalization> = Vec::new();

        let atoms: Vec<&str> = split_top_level(text, &['+', '-'])
            .into_iter()
            .map(str::trim)
            .collect();
        if atoms.iter().all(|a| a.is_empty()) {
            return Err(syntax(text, "empty chain"));
        }
        for atom in atoms {
            if atom.is_empty() {
                return Err(syntax(text, "empty atom"));
            }
            let upper = atom.to_uppercase();
            let (head, arg) = match upper.find(['[', '(']) {
                Some(i) => {
                    let close = if upper.as_bytes()[i] == b'[' { ']' } else { ')' };
                    if !upper.ends_with(close) {
                        return Err(syntax(text, &format!("unbalanced brackets in {atom:?}")));
                    }
                    (upper[..i].trim(), Some((upper.as_bytes()[i], &upper[i + 1..upper.len() - 1])))
                }
                None => (upper.as_str(), None),
            };
            let set_lifter = |lifter: &mut Option<Lifter>, l: Lifter| {
                if lifter.replace(l).is_some() {
                    Err(syntax(text, "at most one lifter (LW, BPL, PF) per chain"))
                } else {
                    Ok(())
                }
            };
            match (head, arg) {
                ("LPCC" | "ACW", range) => {
                    if head == "ACW" {
                        if base.replace(Base::Acw).is_some() {
                            return Err(syntax(text, "ACW given twice"));
                        }
                    } else {
                        if saw_lpcc {
                            return Err(syntax(text, "LPCC given twice"));
                        }
                        saw_lpcc = true;
                    }
                    match range {
                        None => {}
                        Some((b'[', inner)) => {
                            let k = parse_range(text, inner)?;
                            if drop_first.replace(k).is_some() {
                                return Err(syntax(text, "coefficient range given twice"));
                            }
                        }
                        Some(_) => return Err(syntax(text, "base takes a [k..P] range")),
                    }
                }
                ("CMS" | "SIGMA" | "Σ" | "STD", None) => {
                    let n = if head == "CMS" {
                        Normalization::Cms
                    } else {
                        Normalization::Sigma
                    };
                    if norms.contains(&n) {
                        return Err(syntax(text, &format!("{atom} given twice")));
                    }
                    norms.push(n);
                }
                ("LW", None) => set_lifter(&mut lifter, Lifter::Linear)?,
                ("BPL", None) => set_lifter(
                    &mut lifter,
                    Lifter::Bandpass {
                        half_gain: BPL_HALF_GAIN,
                    },
                )?,
                ("BPL", Some((b'(', inner))) => {
                    let v = parse_args(text, inner, 1)?;
                    set_lifter(&mut lifter, Lifter::Bandpass { half_gain: v[0] })?
                }
                ("PF", None) => set_lifter(
                    &mut lifter,
                    Lifter::Postfilter {
                        alpha: PF_ALPHA,
                        beta: PF_BETA,
                    },
                )?,
                ("PF", Some((b'(', inner))) => {
                    let v = parse_args(text, inner, 2)?;
                    set_lifter(
                        &mut lifter,
                        Lifter::Postfilter {
                            alpha: v[0],
                            beta: v[1],
                        },
                    )?
                }
                _ => {
                    return Err(syntax(
                        text,
                        &format!("unknown parameterization token {atom:?}"),
                    ))
                }
            }
        }
        Ok(ParamChain {
            base: base.unwrap_or(Base::Lpcc),
            drop_first: drop_first.unwrap_or(0),
            lifter,
            normalizations: norms,
        })
    }
}

impl fmt::Display for ParamChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        let mut rest = self.normalizations.as_slice();
        if rest.first() == Some(&Normalization::Cms) {
            parts.push("CMS".into());
            rest = &rest[1..];
        }
        let base = match self.base {
            Base::Lpcc => "LPCC",
            Base::Acw => "ACW",
        };
        if self.drop_first > 0 {
            parts.push(format!("{base}[{}..P]", self.drop_first + 1));
        } else if self.base == Base::Acw
            || (self.lifter.is_none() && self.normalizations.is_empty())
        {
            parts.push(base.into());
        }
        match self.lifter {
            None => {}
            Some(Lifter::Linear) => parts.push("LW".into()),
            Some(Lifter::Bandpass { half_gain }) if half_gain == BPL_HALF_GAIN => {
                parts.push("BPL".into())
            }
            Some(Lifter::Bandpass { half_gain }) => parts.push(format!("BPL({half_gain})")),
            Some(Lifter::Postfilter { alpha, beta }) if alpha == PF_ALPHA && beta == PF_BETA => {
                parts.push("PF".into())
            }
            Some(Lifter::Postfilter { alpha, beta }) => parts.push(format!("PF({alpha},{beta})")),
        }
        for n in rest {
            parts.push(
                match n {
                    Normalization::Cms => "CMS",
                    Normalization::Sigma => "SIGMA",
                }
                .into(),
            );
        }
        f.write_str(&parts.join("+"))
    }
}
