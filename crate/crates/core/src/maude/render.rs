use super::lower::{Equation, MaudeModule, RewriteRule, SearchCommand};

fn equation_line(e: &Equation) -> String {
    let owise = if e.owise { " [owise]" } else { "" };
    match &e.condition {
        Some(c) => format!("  ceq {} = {} if {c}{owise} .\n", e.lhs, e.rhs),
        None => format!("  eq {} = {}{owise} .\n", e.lhs, e.rhs),
    }
}

fn rule_line(r: &RewriteRule) -> String {
    match &r.condition {
        Some(c) => format!("  crl [{}] : {} => {} if {c} .\n", r.label, r.lhs, r.rhs),
        None => format!("  rl [{}] : {} => {} .\n", r.label, r.lhs, r.rhs),
    }
}

fn search_line(module: &str, s: &SearchCommand) -> String {
    let bounds = match s.depth {
        Some(d) => format!("[1, {d}]"),
        None => "[1]".to_string(),
    };
    format!("search {bounds} in {module} : {} =>* {} such that {} .\n", s.start, s.pattern, s.condition)
}

/// Deterministic Maude source: header, declarations, equations, rules, then
/// the search commands after `endm`.
pub fn render_maude(m: &MaudeModule) -> String {
    let mut out = format!("mod {} is\n", m.name);
    for i in &m.imports {
        out.push_str(&format!("  protecting {i} .\n"));
    }
    out.push('\n');
    if !m.sorts.is_empty() {
        out.push_str(&format!("  sorts {} .\n", m.sorts.join(" ")));
    }
    for (subs, sup) in &m.subsorts {
        let kw = if subs.len() > 1 { "subsorts" } else { "subsort" };
        out.push_str(&format!("  {kw} {} < {sup} .\n", subs.join(" ")));
    }
    out.push('\n');
    for op in &m.ops {
        let arity = if op.arity.is_empty() { String::new() } else { format!("{} ", op.arity.join(" ")) };
        let attrs = if op.attrs.is_empty() { String::new() } else { format!(" [{}]", op.attrs.join(" ")) };
        out.push_str(&format!("  op {} : {arity}-> {}{attrs} .\n", op.name, op.coarity));
    }
    out.push('\n');
    for (names, sort) in &m.vars {
        let kw = if names.len() > 1 { "vars" } else { "var" };
        out.push_str(&format!("  {kw} {} : {sort} .\n", names.join(" ")));
    }
    for b in &m.equations {
        out.push_str(&format!("\n  *** {}\n", b.title));
        for e in &b.equations {
            out.push_str(&equation_line(e));
        }
    }
    out.push_str("\n  *** transitions\n");
    for r in &m.rules {
        out.push_str(&rule_line(r));
    }
    out.push_str(&rule_line(&m.tick));
    out.push_str("endm\n");
    if !m.searches.is_empty() {
        out.push('\n');
    }
    for s in &m.searches {
        out.push_str(&search_line(&m.name, s));
    }
    out
}
