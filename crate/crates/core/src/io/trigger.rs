//! Infix trigger grammar.
//!
//! ```text
//! trigger := atom ( "&&" atom )*
//! atom    := "time" "==" HH:MM
//!          | ident "==" ident          state atom
//!          | ident op number           environment atom
//! op      := "<" | ">" | "<=" | ">=" | "==" | "!="   (also ≤ ≥ ≠)
//! number  := "-"? digits ( "." digits )? ( "/" digits )?
//! ```
//!
//! Errors carry a 1-based character column.

use crate::model::{format_clock, parse_clock, Comparator, RuleAction, TriggerAtom, CLOCK};
use crate::quantity::Quantity;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("column {column}: {message}")]
pub struct SyntaxError {
    pub column: usize,
    pub message: String,
}

impl SyntaxError {
    fn new(column: usize, message: impl Into<String>) -> Self {
        SyntaxError { column, message: message.into() }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Clock(String),
    Op(Comparator),
    And,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(s) => format!("number `{s}`"),
            Tok::Clock(s) => format!("time `{s}`"),
            Tok::Op(c) => format!("operator `{c}`"),
            Tok::And => "`&&`".into(),
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, SyntaxError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let next = chars.get(i + 1).copied();
        let (tok, len) = match (c, next) {
            ('&', Some('&')) => (Tok::And, 2),
            ('=', Some('=')) => (Tok::Op(Comparator::Eq), 2),
            ('!', Some('=')) => (Tok::Op(Comparator::Ne), 2),
            ('<', Some('=')) => (Tok::Op(Comparator::Le), 2),
            ('>', Some('=')) => (Tok::Op(Comparator::Ge), 2),
            ('<', _) => (Tok::Op(Comparator::Lt), 1),
            ('>', _) => (Tok::Op(Comparator::Gt), 1),
            ('≤', _) => (Tok::Op(Comparator::Le), 1),
            ('≥', _) => (Tok::Op(Comparator::Ge), 1),
            ('≠', _) => (Tok::Op(Comparator::Ne), 1),
            _ if is_ident_start(c) => {
                let len = chars[i..].iter().take_while(|c| is_ident_char(**c)).count();
                (Tok::Ident(chars[i..i + len].iter().collect()), len)
            }
            _ if c.is_ascii_digit() || (c == '-' && next.is_some_and(|n| n.is_ascii_digit() || n == '.')) || c == '.' => {
                let len = 1 + chars[i + 1..]
                    .iter()
                    .take_while(|c| c.is_ascii_digit() || matches!(c, '.' | '/' | ':'))
                    .count();
                let lexeme: String = chars[i..i + len].iter().collect();
                if lexeme.contains(':') {
                    (Tok::Clock(lexeme), len)
                } else {
                    (Tok::Number(lexeme), len)
                }
            }
            _ => return Err(SyntaxError::new(col, format!("unexpected character `{c}`"))),
        };
        out.push((col, tok));
        i += len;
    }
    Ok(out)
}

/// Parses a trigger expression into its conjunction of atoms.
pub fn parse_trigger(text: &str) -> Result<Vec<TriggerAtom>, SyntaxError> {
    let tokens = tokenize(text)?;
    let end = text.chars().count() + 1;
    if tokens.is_empty() {
        return Err(SyntaxError::new(1, "empty trigger"));
    }
    let mut atoms = Vec::new();
    let mut pos = 0;
    loop {
        let (atom, used) = parse_atom(&tokens[pos..], end)?;
        atoms.push(atom);
        pos += used;
        match tokens.get(pos) {
            None => break,
            Some((_, Tok::And)) => {
                pos += 1;
                if pos == tokens.len() {
                    return Err(SyntaxError::new(end, "expected an atom after `&&`"));
                }
            }
            Some((col, tok)) => {
                return Err(SyntaxError::new(*col, format!("expected `&&`, found {}", tok.describe())))
            }
        }
    }
    Ok(atoms)
}

fn parse_atom(tokens: &[(usize, Tok)], end: usize) -> Result<(TriggerAtom, usize), SyntaxError> {
    let at = |i: usize| tokens.get(i).map(|(c, _)| *c).unwrap_or(end);
    let lhs = match tokens.first() {
        Some((_, Tok::Ident(name))) => name.clone(),
        Some((col, tok)) => {
            return Err(SyntaxError::new(*col, format!("expected identifier, found {}", tok.describe())))
        }
        None => return Err(SyntaxError::new(end, "expected identifier")),
    };
    let cmp = match tokens.get(1) {
        Some((_, Tok::Op(c))) => *c,
        Some((col, tok)) => {
            return Err(SyntaxError::new(*col, format!("expected comparison operator, found {}", tok.describe())))
        }
        None => return Err(SyntaxError::new(end, format!("expected comparison operator after `{lhs}`"))),
    };
    let rhs = tokens.get(2).map(|(_, t)| t);
    let atom = match rhs {
        Some(Tok::Clock(lexeme)) => {
            if lhs != "time" || cmp != Comparator::Eq {
                return Err(SyntaxError::new(at(2), "times are only allowed in `time == HH:MM`"));
            }
            let minutes = parse_clock(lexeme)
                .ok_or_else(|| SyntaxError::new(at(2), format!("invalid time `{lexeme}`")))?;
            TriggerAtom::Time { minutes }
        }
        Some(Tok::Number(lexeme)) => {
            if lhs == "time" {
                return Err(SyntaxError::new(at(2), "`time` expects HH:MM"));
            }
            let value: Quantity = lexeme
                .parse()
                .map_err(|_| SyntaxError::new(at(2), format!("invalid number `{lexeme}`")))?;
            TriggerAtom::Env { variable: lhs, cmp, value }
        }
        Some(Tok::Ident(state)) => {
            if cmp != Comparator::Eq {
                return Err(SyntaxError::new(at(1), "state atoms only support `==`"));
            }
            if lhs == "time" || lhs == CLOCK {
                return Err(SyntaxError::new(at(0), format!("`{lhs}` is reserved")));
            }
            TriggerAtom::State { device: lhs, state: state.clone() }
        }
        Some(tok) => {
            return Err(SyntaxError::new(at(2), format!("expected value, found {}", tok.describe())))
        }
        None => return Err(SyntaxError::new(end, "expected value")),
    };
    Ok((atom, 3))
}

pub fn format_atom(atom: &TriggerAtom) -> String {
    match atom {
        TriggerAtom::State { device, state } => format!("{device} == {state}"),
        TriggerAtom::Env { variable, cmp, value } => format!("{variable} {cmp} {value}"),
        TriggerAtom::Time { minutes } => format!("time == {}", format_clock(*minutes)),
    }
}

pub fn format_trigger(atoms: &[TriggerAtom]) -> String {
    atoms.iter().map(format_atom).collect::<Vec<_>>().join(" && ")
}

/// Parses one `device.action` reference.
pub fn parse_action(text: &str) -> Result<RuleAction, SyntaxError> {
    let trimmed = text.trim();
    let offset = text.len() - text.trim_start().len();
    let (device, action) = trimmed
        .split_once('.')
        .ok_or_else(|| SyntaxError::new(offset + 1, format!("expected `device.action`, found `{trimmed}`")))?;
    let valid = |s: &str| {
        let mut chars = s.chars();
        chars.next().is_some_and(is_ident_start) && chars.all(is_ident_char)
    };
    if !valid(device) {
        return Err(SyntaxError::new(offset + 1, format!("invalid device name `{device}`")));
    }
    if !valid(action) {
        return Err(SyntaxError::new(
            offset + device.chars().count() + 2,
            format!("invalid action name `{action}`"),
        ));
    }
    Ok(RuleAction { device: device.into(), action: action.into() })
}

/// Parses a comma- or `&&`-separated list of `device.action` references.
pub fn parse_action_list(text: &str) -> Result<Vec<RuleAction>, SyntaxError> {
    if text.trim().is_empty() {
        return Err(SyntaxError::new(1, "empty action"));
    }
    let normalized = text.replace("&&", ",,");
    let mut out = Vec::new();
    let mut col = 0;
    for piece in normalized.split(',') {
        if !piece.trim().is_empty() {
            out.push(parse_action(piece).map_err(|e| SyntaxError::new(e.column + col, e.message))?);
        }
        col += piece.chars().count() + 1;
    }
    Ok(out)
}

pub fn format_action(action: &RuleAction) -> String {
    format!("{}.{}", action.device, action.action)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_lamp_trigger() {
        let atoms = parse_trigger("time == 22:00 && desk_lamp == on").unwrap();
        assert_eq!(atoms, vec![TriggerAtom::Time { minutes: 1320 }, TriggerAtom::state("desk_lamp", "on")]);
    }

    #[test]
    fn env_atoms_with_every_operator() {
        for (text, cmp) in [
            ("t < 1", Comparator::Lt),
            ("t > 1", Comparator::Gt),
            ("t <= 1", Comparator::Le),
            ("t >= 1", Comparator::Ge),
            ("t == 1", Comparator::Eq),
            ("t != 1", Comparator::Ne),
            ("t ≤ 1", Comparator::Le),
            ("t≥1", Comparator::Ge),
        ] {
            assert_eq!(parse_trigger(text).unwrap(), vec![TriggerAtom::env("t", cmp, 1)], "{text}");
        }
        assert_eq!(
            parse_trigger("humidity > -0.5").unwrap(),
            vec![TriggerAtom::env("humidity", Comparator::Gt, Quantity::new(-1, 2))]
        );
    }

    #[test]
    fn errors_carry_columns() {
        assert_eq!(parse_trigger("").unwrap_err().message, "empty trigger");
        let e = parse_trigger("lamp == on &&").unwrap_err();
        assert_eq!(e.column, 14);
        let e = parse_trigger("lamp == on lamp").unwrap_err();
        assert_eq!(e.column, 12);
        let e = parse_trigger("lamp != on").unwrap_err();
        assert_eq!(e.column, 6);
        let e = parse_trigger("time == 25:00").unwrap_err();
        assert_eq!(e.column, 9);
        let e = parse_trigger("lamp $ on").unwrap_err();
        assert_eq!(e.column, 6);
    }

    #[test]
    fn format_round_trips() {
        let text = "time == 07:30 && lamp == on && temperature >= 1/3";
        assert_eq!(format_trigger(&parse_trigger(text).unwrap()), text);
    }

    #[test]
    fn action_lists() {
        assert_eq!(parse_action_list("ac1.turn_on").unwrap(), vec![RuleAction::new("ac1", "turn_on")]);
        assert_eq!(
            parse_action_list("a.x, b.y && c.z").unwrap(),
            vec![RuleAction::new("a", "x"), RuleAction::new("b", "y"), RuleAction::new("c", "z")]
        );
        assert_eq!(parse_action_list("").unwrap_err().message, "empty action");
        assert_eq!(parse_action_list("a.x, nodot").unwrap_err().column, 6);
    }
}
