//! A declaration-before-use check over emitted Maude text.
//!
//! Statements are expected one per line, as [`render_maude`](super::render_maude)
//! writes them. Every sort must be declared (or imported) before it appears in
//! a declaration, and every token of an equation, rule or search must be a
//! declared operator piece, variable, literal or piece of syntax.

use std::collections::HashSet;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScanIssue {
    pub line: usize,
    pub token: String,
    pub message: String,
}

const SYNTAX: [&str; 11] = ["(", ")", ",", "=", "=>", "=>*", "/\\", ":", "if", "such", "that"];

fn imported(module: &str) -> (&'static [&'static str], &'static [&'static str]) {
    const BOOL_OPS: [&str; 12] = ["true", "false", "not", "and", "or", "xor", "implies", "if", "then", "else", "fi", "=/="];
    match module {
        "STRING" => (&["String", "Char", "FindResult", "Bool", "Nat", "NzNat", "Zero"], &BOOL_OPS),
        "INT" => (
            &["Int", "NzInt", "Nat", "NzNat", "Zero", "Bool"],
            &["+", "-", "*", "rem", "quo", "<", "<=", ">", ">=", "==", "=/=", "abs"],
        ),
        "BOOL" => (&["Bool"], &BOOL_OPS),
        _ => (&[], &[]),
    }
}

fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                let mut s = String::from('"');
                while let Some(n) = chars.next() {
                    s.push(n);
                    if n == '\\' {
                        if let Some(e) = chars.next() {
                            s.push(e);
                        }
                    } else if n == '"' {
                        break;
                    }
                }
                out.push(s);
            }
            '(' | ')' | '[' | ']' | '{' | '}' | ',' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn is_literal(tok: &str) -> bool {
    tok.starts_with('"') || tok.parse::<i64>().is_ok()
}

struct Scope {
    sorts: HashSet<String>,
    pieces: HashSet<String>,
    vars: HashSet<String>,
    modules: HashSet<String>,
}

/// Returns every use that precedes (or lacks) its declaration.
pub fn check_declarations(text: &str) -> Vec<ScanIssue> {
    let mut scope = Scope { sorts: HashSet::new(), pieces: HashSet::new(), vars: HashSet::new(), modules: HashSet::new() };
    let mut issues = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let stmt = raw.trim();
        if stmt.is_empty() || stmt.starts_with("***") || stmt == "endm" {
            continue;
        }
        if let Some(name) = stmt.strip_prefix("mod ").and_then(|s| s.strip_suffix(" is")) {
            scope.modules.insert(name.trim().to_string());
            continue;
        }
        let mut report = |token: &str, message: &str| {
            issues.push(ScanIssue { line, token: token.to_string(), message: message.to_string() })
        };
        let Some(body) = stmt.strip_suffix(" .") else {
            report(stmt, "statement does not end with ` .`");
            continue;
        };
        let tokens = tokenize(body);
        let head = tokens.first().map(String::as_str).unwrap_or("");
        let rest = &tokens[1..];
        match head {
            "protecting" | "including" | "extending" => {
                let (sorts, pieces) = imported(rest.first().map(String::as_str).unwrap_or(""));
                if sorts.is_empty() {
                    report(rest.first().map(String::as_str).unwrap_or(""), "unknown module");
                }
                scope.sorts.extend(sorts.iter().map(|s| s.to_string()));
                scope.pieces.extend(pieces.iter().map(|s| s.to_string()));
            }
            "sort" | "sorts" => scope.sorts.extend(rest.iter().cloned()),
            "subsort" | "subsorts" => {
                for s in rest.iter().filter(|t| *t != "<") {
                    if !scope.sorts.contains(s) {
                        report(s, "undeclared sort");
                    }
                }
            }
            "op" | "ops" => {
                let Some(colon) = rest.iter().position(|t| t == ":") else {
                    report(head, "operator declaration without `:`");
                    continue;
                };
                let attrs_at = rest.iter().position(|t| t == "[").unwrap_or(rest.len());
                for s in rest[colon + 1..attrs_at].iter().filter(|t| *t != "->") {
                    if !scope.sorts.contains(s) {
                        report(s, "undeclared sort");
                    }
                }
                for name in &rest[..colon] {
                    scope.pieces.extend(name.split('_').filter(|p| !p.is_empty()).map(String::from));
                }
                // `id: none` and the like refer to operators.
                for t in rest.get(attrs_at + 1..).unwrap_or(&[]) {
                    if !(t == "id:" || t == "]" || is_attribute(t) || scope.pieces.contains(t)) {
                        report(t, "unknown operator attribute");
                    }
                }
            }
            "var" | "vars" => {
                let Some(colon) = rest.iter().position(|t| t == ":") else {
                    report(head, "variable declaration without `:`");
                    continue;
                };
                for s in &rest[colon + 1..] {
                    if !scope.sorts.contains(s) {
                        report(s, "undeclared sort");
                    }
                }
                scope.vars.extend(rest[..colon].iter().cloned());
            }
            "eq" | "ceq" | "rl" | "crl" | "search" => {
                let mut toks: &[String] = rest;
                if head == "rl" || head == "crl" || head == "search" {
                    // Skip the label or the bounds.
                    if toks.first().map(String::as_str) == Some("[") {
                        let close = toks.iter().position(|t| t == "]").unwrap_or(toks.len() - 1);
                        toks = &toks[close + 1..];
                    }
                }
                if head == "search" {
                    match toks {
                        [kw, m, colon, tail @ ..] if kw == "in" && colon == ":" => {
                            if !scope.modules.contains(m) {
                                report(m, "unknown module");
                            }
                            toks = tail;
                        }
                        _ => {
                            report(head, "search without `in MODULE :`");
                            continue;
                        }
                    }
                } else if toks.first().map(String::as_str) == Some(":") {
                    toks = &toks[1..];
                }
                let end = match toks {
                    [.., a, b, c] if a == "[" && b == "owise" && c == "]" => toks.len() - 3,
                    _ => toks.len(),
                };
                for t in &toks[..end] {
                    let known = is_literal(t)
                        || SYNTAX.contains(&t.as_str())
                        || scope.vars.contains(t)
                        || scope.pieces.contains(t);
                    if !known {
                        report(t, "undeclared identifier");
                    }
                }
            }
            _ => report(head, "unknown statement"),
        }
    }
    issues
}

fn is_attribute(t: &str) -> bool {
    matches!(t, "ctor" | "assoc" | "comm" | "idem" | "memo" | "owise")
}

#[cfg(test)]
mod tests {
    use super::*;

    const OK: &str = "mod M is\n  protecting INT .\n  sorts A B .\n  subsort A < B .\n  op none : -> B [ctor] .\n  op __ : B B -> B [ctor assoc comm id: none] .\n  op f : Int -> A .\n  var K : Int .\n  eq f(K) = f(K + 1) [owise] .\nendm\nsearch [1] in M : f(1) =>* f(K) such that K > 2 .\n";

    #[test]
    fn clean_module_passes() {
        assert_eq!(check_declarations(OK), vec![]);
    }

    #[test]
    fn missing_declarations_are_found() {
        let no_sort = OK.replace("  sorts A B .\n", "");
        let issues = check_declarations(&no_sort);
        assert!(issues.iter().any(|i| i.token == "B" && i.message == "undeclared sort"), "{issues:?}");

        let no_var = OK.replace("  var K : Int .\n", "");
        assert!(check_declarations(&no_var).iter().any(|i| i.token == "K"));

        let late_op = OK.replace("  op f : Int -> A .\n", "").replace("endm", "  op f : Int -> A .\nendm");
        assert!(check_declarations(&late_op).iter().any(|i| i.token == "f" && i.line == 8));

        assert!(check_declarations(&OK.replace(" in M ", " in N ")).iter().any(|i| i.token == "N"));
    }
}
