//! Random string sampling from a restricted regular-expression subset.
//!
//! Supported: anchors, literal characters (plus escaped metacharacters),
//! character classes with ranges, bounded quantifiers `{m}`/`{m,n}`, `+`,
//! `*`, `?`, alternation, and grouping. Everything else fails loudly naming
//! the construct, since a silently mis-generated value would poison the
//! validity labels downstream.

use rand::Rng;

use super::GenError;

/// Extra repetitions sampled on top of the minimum for `+` and `*`.
const OPEN_REPEAT_EXTRA: u32 = 8;

#[derive(Debug, Clone)]
enum Node {
    Literal(char),
    Class(Vec<(char, char)>),
    Group(Alternation),
    Repeat { inner: Box<Node>, min: u32, max: u32 },
    Anchor,
}

#[derive(Debug, Clone)]
struct Alternation {
    branches: Vec<Vec<Node>>,
}

/// A compiled generator for one pattern.
#[derive(Debug, Clone)]
pub struct PatternSampler {
    pattern: String,
    root: Alternation,
}

impl PatternSampler {
    pub fn compile(pattern: &str) -> Result<Self, GenError> {
        let mut parser = Parser { pattern, chars: pattern.char_indices().peekable() };
        let root = parser.parse_alternation(true)?;
        if parser.chars.next().is_some() {
            return Err(parser.unsupported("unbalanced ')'"));
        }
        Ok(PatternSampler { pattern: pattern.to_string(), root })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> String {
        let mut out = String::new();
        sample_alternation(&self.root, rng, &mut out);
        out
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }
}

fn sample_alternation<R: Rng>(alt: &Alternation, rng: &mut R, out: &mut String) {
    let branch = &alt.branches[rng.gen_range(0..alt.branches.len())];
    for node in branch {
        sample_node(node, rng, out);
    }
}

fn sample_node<R: Rng>(node: &Node, rng: &mut R, out: &mut String) {
    match node {
        Node::Literal(c) => out.push(*c),
        Node::Class(ranges) => {
            let total: u32 = ranges.iter().map(|(lo, hi)| *hi as u32 - *lo as u32 + 1).sum();
            let mut index = rng.gen_range(0..total);
            for (lo, hi) in ranges {
                let size = *hi as u32 - *lo as u32 + 1;
                if index < size {
                    out.push(char::from_u32(*lo as u32 + index).expect("range stays in scalar space"));
                    return;
                }
                index -= size;
            }
        }
        Node::Group(alt) => sample_alternation(alt, rng, out),
        Node::Repeat { inner, min, max } => {
            let count = rng.gen_range(*min..=*max);
            for _ in 0..count {
                sample_node(inner, rng, out);
            }
        }
        Node::Anchor => {}
    }
}

struct Parser<'a> {
    pattern: &'a str,
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
}

impl<'a> Parser<'a> {
    fn unsupported(&self, construct: &str) -> GenError {
        GenError::UnsupportedPattern {
            pattern: self.pattern.to_string(),
            construct: construct.to_string(),
        }
    }

    fn parse_alternation(&mut self, top_level: bool) -> Result<Alternation, GenError> {
        let mut branches = vec![Vec::new()];
        loop {
            match self.chars.peek().copied() {
                None => break,
                Some((_, ')')) if !top_level => break,
                Some((_, ')')) => return Err(self.unsupported("unbalanced ')'")),
                Some((_, '|')) => {
                    self.chars.next();
                    branches.push(Vec::new());
                }
                Some(_) => {
                    let node = self.parse_item()?;
                    branches.last_mut().expect("branch list is non-empty").push(node);
                }
            }
        }
        Ok(Alternation { branches })
    }

    fn parse_item(&mut self) -> Result<Node, GenError> {
        let atom = self.parse_atom()?;
        match self.chars.peek().copied() {
            Some((_, '?')) => {
                self.chars.next();
                self.reject_stacked_quantifier()?;
                Ok(Node::Repeat { inner: Box::new(atom), min: 0, max: 1 })
            }
            Some((_, '+')) => {
                self.chars.next();
                self.reject_stacked_quantifier()?;
                Ok(Node::Repeat { inner: Box::new(atom), min: 1, max: 1 + OPEN_REPEAT_EXTRA })
            }
            Some((_, '*')) => {
                self.chars.next();
                self.reject_stacked_quantifier()?;
                Ok(Node::Repeat { inner: Box::new(atom), min: 0, max: OPEN_REPEAT_EXTRA })
            }
            Some((_, '{')) => {
                self.chars.next();
                let (min, max) = self.parse_bounds()?;
                self.reject_stacked_quantifier()?;
                Ok(Node::Repeat { inner: Box::new(atom), min, max })
            }
            _ => Ok(atom),
        }
    }

    fn reject_stacked_quantifier(&mut self) -> Result<(), GenError> {
        if let Some((_, c)) = self.chars.peek() {
            if matches!(c, '?' | '+' | '*') {
                return Err(self.unsupported("stacked quantifier"));
            }
        }
        Ok(())
    }

    fn parse_atom(&mut self) -> Result<Node, GenError> {
        let (_, c) = self.chars.next().expect("caller peeked");
        match c {
            '^' | '$' => Ok(Node::Anchor),
            '.' => Err(self.unsupported("dot (any character)")),
            '(' => {
                if matches!(self.chars.peek(), Some((_, '?'))) {
                    return Err(self.unsupported("(?...) group"));
                }
                let inner = self.parse_alternation(false)?;
                match self.chars.next() {
                    Some((_, ')')) => Ok(Node::Group(inner)),
                    _ => Err(self.unsupported("unterminated group")),
                }
            }
            '[' => self.parse_class(),
            '\\' => self.parse_escape(),
            '?' | '+' | '*' => Err(self.unsupported("quantifier without target")),
            '{' => Err(self.unsupported("repetition without target")),
            other => Ok(Node::Literal(other)),
        }
    }

    fn parse_escape(&mut self) -> Result<Node, GenError> {
        match self.chars.next() {
            None => Err(self.unsupported("trailing backslash")),
            Some((_, c)) => match c {
                '\\' | '^' | '$' | '.' | '|' | '?' | '*' | '+' | '(' | ')' | '[' | ']' | '{'
                | '}' | '-' | '/' => Ok(Node::Literal(c)),
                other => Err(self.unsupported(&format!("escape \\{other}"))),
            },
        }
    }

    fn parse_class(&mut self) -> Result<Node, GenError> {
        if matches!(self.chars.peek(), Some((_, '^'))) {
            return Err(self.unsupported("negated character class"));
        }
        let mut members: Vec<char> = Vec::new();
        let mut ranges: Vec<(char, char)> = Vec::new();
        loop {
            let Some((_, c)) = self.chars.next() else {
                return Err(self.unsupported("unterminated character class"));
            };
            match c {
                ']' => break,
                '\\' => match self.parse_escape()? {
                    Node::Literal(l) => members.push(l),
                    _ => unreachable!("escape parses to a literal"),
                },
                '-' if !members.is_empty() && !matches!(self.chars.peek(), Some((_, ']'))) => {
                    let lo = members.pop().expect("checked non-empty");
                    let Some((_, hi)) = self.chars.next() else {
                        return Err(self.unsupported("unterminated character class"));
                    };
                    let hi = if hi == '\\' {
                        match self.parse_escape()? {
                            Node::Literal(l) => l,
                            _ => unreachable!("escape parses to a literal"),
                        }
                    } else {
                        hi
                    };
                    if (lo as u32) > (hi as u32) {
                        return Err(self.unsupported(&format!("inverted range {lo}-{hi}")));
                    }
                    ranges.push((lo, hi));
                }
                other => members.push(other),
            }
        }
        for member in members {
            ranges.push((member, member));
        }
        if ranges.is_empty() {
            return Err(self.unsupported("empty character class"));
        }
        Ok(Node::Class(ranges))
    }

    fn parse_bounds(&mut self) -> Result<(u32, u32), GenError> {
        let mut min_digits = String::new();
        let mut max_digits: Option<String> = None;
        loop {
            let Some((_, c)) = self.chars.next() else {
                return Err(self.unsupported("unterminated repetition bounds"));
            };
            match c {
                '}' => break,
                ',' if max_digits.is_none() => max_digits = Some(String::new()),
                d if d.is_ascii_digit() => match &mut max_digits {
                    Some(digits) => digits.push(d),
                    None => min_digits.push(d),
                },
                other => return Err(self.unsupported(&format!("repetition bound char {other:?}"))),
            }
        }
        if min_digits.is_empty() {
            return Err(self.unsupported("repetition without lower bound"));
        }
        let min: u32 = min_digits.parse().map_err(|_| self.unsupported("repetition bound overflow"))?;
        match max_digits {
            None => Ok((min, min)),
            Some(digits) if digits.is_empty() => Err(self.unsupported("open-ended repetition {m,}")),
            Some(digits) => {
                let max: u32 =
                    digits.parse().map_err(|_| self.unsupported("repetition bound overflow"))?;
                if max < min {
                    return Err(self.unsupported("repetition bounds out of order"));
                }
                Ok((min, max))
            }
        }
    }
}
