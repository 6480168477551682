use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::{
    ActionDescription, ActionLangError, Domain, DynamicLaw, FluentAtom, FluentDecl, FluentId,
    PartialState, Result, StaticLaw, Value,
};
use crate::ids::ActionId;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Dot,
    DotDot,
    Colon,
    Comma,
    Eq,
    Plus,
    Minus,
    Tilde,
    LBrace,
    RBrace,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Dot => "`.`".into(),
            Tok::DotDot => "`..`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Tilde => "`~`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    col: usize,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: Pos,
}

fn syntax(pos: Pos, message: impl Into<String>) -> ActionLangError {
    ActionLangError::Syntax {
        line: pos.line,
        col: pos.col,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let pos = Pos {
                line: line_no + 1,
                col: i + 1,
            };
            if c == '%' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let simple = match c {
                ':' => Some(Tok::Colon),
                ',' => Some(Tok::Comma),
                '=' => Some(Tok::Eq),
                '+' => Some(Tok::Plus),
                '-' => Some(Tok::Minus),
                '~' => Some(Tok::Tilde),
                '{' => Some(Tok::LBrace),
                '}' => Some(Tok::RBrace),
                _ => None,
            };
            if let Some(tok) = simple {
                tokens.push(Token { tok, pos });
                i += 1;
            } else if c == '.' {
                if chars.get(i + 1) == Some(&'.') {
                    tokens.push(Token {
                        tok: Tok::DotDot,
                        pos,
                    });
                    i += 2;
                } else {
                    tokens.push(Token { tok: Tok::Dot, pos });
                    i += 1;
                }
            } else if c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let digits: String = chars[start..i].iter().collect();
                let value = digits
                    .parse::<i64>()
                    .map_err(|_| syntax(pos, format!("integer `{digits}` out of range")))?;
                tokens.push(Token {
                    tok: Tok::Int(value),
                    pos,
                });
            } else if c.is_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                tokens.push(Token {
                    tok: Tok::Ident(chars[start..i].iter().collect()),
                    pos,
                });
            } else {
                return Err(syntax(pos, format!("unexpected character `{c}`")));
            }
        }
    }
    Ok(tokens)
}

/// Right-hand side of an atom before grounding.
#[derive(Debug, Clone, PartialEq)]
enum Rhs {
    Int(i64),
    Name(String),
    Offset(String, i64),
    Bool(bool),
}

#[derive(Debug, Clone)]
struct RawAtom {
    fluent: String,
    rhs: Rhs,
    pos: Pos,
}

#[derive(Debug)]
enum Clause {
    Fluent {
        name: String,
        domain: Domain,
        pos: Pos,
    },
    Action {
        names: Vec<(String, Pos)>,
    },
    Static {
        head: RawAtom,
        body: Vec<RawAtom>,
    },
    Dynamic {
        action: String,
        action_pos: Pos,
        effect: RawAtom,
        preconditions: Vec<RawAtom>,
    },
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
    end: Pos,
}

const KEYWORDS: &[&str] = &["fluent", "action", "causes", "if", "bool", "true", "false"];

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.at).map(|t| &t.tok)
    }

    fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.tokens.get(self.at + offset).map(|t| &t.tok)
    }

    fn pos(&self) -> Pos {
        self.tokens.get(self.at).map(|t| t.pos).unwrap_or(self.end)
    }

    fn next(&mut self) -> Result<Token> {
        let tok = self
            .tokens
            .get(self.at)
            .cloned()
            .ok_or_else(|| syntax(self.end, "unexpected end of input"))?;
        self.at += 1;
        Ok(tok)
    }

    fn expect(&mut self, want: Tok) -> Result<Pos> {
        let tok = self.next()?;
        if tok.tok == want {
            Ok(tok.pos)
        } else {
            Err(syntax(
                tok.pos,
                format!("expected {}, found {}", want.describe(), tok.tok.describe()),
            ))
        }
    }

    fn eat(&mut self, want: &Tok) -> bool {
        if self.peek() == Some(want) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<(String, Pos)> {
        let tok = self.next()?;
        match tok.tok {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => Ok((s, tok.pos)),
            other => Err(syntax(
                tok.pos,
                format!("expected identifier, found {}", other.describe()),
            )),
        }
    }

    fn int(&mut self) -> Result<i64> {
        let negative = self.eat(&Tok::Minus);
        let tok = self.next()?;
        match tok.tok {
            Tok::Int(i) => Ok(if negative { -i } else { i }),
            other => Err(syntax(
                tok.pos,
                format!("expected integer, found {}", other.describe()),
            )),
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn clause(&mut self) -> Result<Clause> {
        if self.is_keyword("fluent") {
            self.at += 1;
            let (name, pos) = self.ident()?;
            self.expect(Tok::Colon)?;
            let domain = self.domain()?;
            self.expect(Tok::Dot)?;
            return Ok(Clause::Fluent { name, domain, pos });
        }
        if self.is_keyword("action") {
            self.at += 1;
            let mut names = vec![self.ident()?];
            while self.eat(&Tok::Comma) {
                names.push(self.ident()?);
            }
            self.expect(Tok::Dot)?;
            return Ok(Clause::Action { names });
        }
        if matches!(self.peek_at(1), Some(Tok::Ident(s)) if s == "causes") {
            let (action, action_pos) = self.ident()?;
            self.at += 1;
            let effect = self.atom()?;
            let preconditions = self.optional_body()?;
            self.expect(Tok::Dot)?;
            return Ok(Clause::Dynamic {
                action,
                action_pos,
                effect,
                preconditions,
            });
        }
        let head = self.atom()?;
        let body = self.optional_body()?;
        self.expect(Tok::Dot)?;
        Ok(Clause::Static { head, body })
    }

    fn optional_body(&mut self) -> Result<Vec<RawAtom>> {
        let mut body = Vec::new();
        if self.is_keyword("if") {
            self.at += 1;
            body.push(self.atom()?);
            while self.eat(&Tok::Comma) {
                body.push(self.atom()?);
            }
        }
        Ok(body)
    }

    fn domain(&mut self) -> Result<Domain> {
        if self.is_keyword("bool") {
            self.at += 1;
            return Ok(Domain::Bool);
        }
        let pos = self.pos();
        if self.eat(&Tok::LBrace) {
            let mut values = vec![self.enum_value()?];
            while self.eat(&Tok::Comma) {
                values.push(self.enum_value()?);
            }
            self.expect(Tok::RBrace)?;
            let unique: HashSet<&Value> = values.iter().collect();
            if unique.len() != values.len() {
                return Err(ActionLangError::DomainViolation {
                    line: pos.line,
                    col: pos.col,
                    message: "repeated value in domain".into(),
                });
            }
            return Ok(Domain::Enum(values));
        }
        let lo = self.int()?;
        self.expect(Tok::DotDot)?;
        let hi = self.int()?;
        if lo > hi {
            return Err(ActionLangError::DomainViolation {
                line: pos.line,
                col: pos.col,
                message: format!("empty range {lo}..{hi}"),
            });
        }
        if hi.checked_sub(lo).is_none_or(|span| span >= 1 << 20) {
            return Err(ActionLangError::DomainViolation {
                line: pos.line,
                col: pos.col,
                message: format!("range {lo}..{hi} is too large"),
            });
        }
        Ok(Domain::Range { lo, hi })
    }

    fn enum_value(&mut self) -> Result<Value> {
        match self.peek() {
            Some(Tok::Int(_)) | Some(Tok::Minus) => Ok(Value::Int(self.int()?)),
            _ => Ok(Value::Sym(self.ident()?.0)),
        }
    }

    fn atom(&mut self) -> Result<RawAtom> {
        let pos = self.pos();
        if self.eat(&Tok::Tilde) {
            let (fluent, _) = self.ident()?;
            return Ok(RawAtom {
                fluent,
                rhs: Rhs::Bool(false),
                pos,
            });
        }
        let (fluent, _) = self.ident()?;
        if !self.eat(&Tok::Eq) {
            return Ok(RawAtom {
                fluent,
                rhs: Rhs::Bool(true),
                pos,
            });
        }
        let rhs = match self.peek() {
            Some(Tok::Int(_)) | Some(Tok::Minus) => Rhs::Int(self.int()?),
            Some(Tok::Ident(s)) if s == "true" || s == "false" => {
                let b = s == "true";
                self.at += 1;
                Rhs::Bool(b)
            }
            _ => {
                let (name, _) = self.ident()?;
                if self.eat(&Tok::Plus) {
                    Rhs::Offset(name, self.int()?)
                } else if self.peek() == Some(&Tok::Minus) {
                    self.at += 1;
                    let c = self.int()?;
                    Rhs::Offset(name, -c)
                } else {
                    Rhs::Name(name)
                }
            }
        };
        Ok(RawAtom { fluent, rhs, pos })
    }
}

struct Signature {
    fluents: Vec<FluentDecl>,
    actions: Vec<String>,
}

impl Signature {
    fn fluent(&self, atom: &RawAtom) -> Result<FluentId> {
        self.fluents
            .iter()
            .position(|f| f.name == atom.fluent)
            .map(FluentId)
            .ok_or_else(|| ActionLangError::Undeclared {
                line: atom.pos.line,
                col: atom.pos.col,
                name: atom.fluent.clone(),
            })
    }
}

fn is_variable(name: &str) -> bool {
    name.chars().next().is_some_and(|c| c.is_uppercase())
}

fn violation(pos: Pos, message: String) -> ActionLangError {
    ActionLangError::DomainViolation {
        line: pos.line,
        col: pos.col,
        message,
    }
}

/// Schema variables of an atom, together with the values they may take so
/// that the atom lands inside its fluent's domain.
fn candidates(
    sig: &Signature,
    atom: &RawAtom,
    out: &mut BTreeMap<String, BTreeSet<ValueKey>>,
) -> Result<()> {
    let id = sig.fluent(atom)?;
    let domain = &sig.fluents[id.0].domain;
    match &atom.rhs {
        Rhs::Bool(_) => {
            if *domain != Domain::Bool {
                return Err(violation(
                    atom.pos,
                    format!("`{}` is not a Boolean fluent", atom.fluent),
                ));
            }
        }
        Rhs::Int(i) => {
            if domain.index_of(&Value::Int(*i)).is_none() {
                return Err(violation(
                    atom.pos,
                    format!("{i} is not in the domain of `{}`", atom.fluent),
                ));
            }
        }
        Rhs::Name(name) => {
            if domain.index_of(&Value::Sym(name.clone())).is_some() {
                return Ok(());
            }
            if !is_variable(name) {
                return Err(violation(
                    atom.pos,
                    format!("`{name}` is not in the domain of `{}`", atom.fluent),
                ));
            }
            let slot = out.entry(name.clone()).or_default();
            slot.extend(domain.values().map(ValueKey::from));
        }
        Rhs::Offset(name, offset) => {
            if !is_variable(name) {
                return Err(violation(
                    atom.pos,
                    format!("`{name}` is not a schema variable"),
                ));
            }
            if matches!(domain, Domain::Bool) {
                return Err(violation(
                    atom.pos,
                    format!("arithmetic on non-integer fluent `{}`", atom.fluent),
                ));
            }
            let slot = out.entry(name.clone()).or_default();
            for v in domain.values() {
                match v {
                    Value::Int(i) => {
                        if let Some(shifted) = i.checked_sub(*offset) {
                            slot.insert(ValueKey::Int(shifted));
                        }
                    }
                    _ => {
                        return Err(violation(
                            atom.pos,
                            format!("arithmetic on non-integer fluent `{}`", atom.fluent),
                        ))
                    }
                }
            }
        }
    }
    Ok(())
}

/// Ordered stand-in for [`Value`] so candidate sets are deterministic.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum ValueKey {
    Bool(bool),
    Int(i64),
    Sym(String),
}

impl From<Value> for ValueKey {
    fn from(v: Value) -> Self {
        match v {
            Value::Int(i) => ValueKey::Int(i),
            Value::Sym(s) => ValueKey::Sym(s),
            Value::Bool(b) => ValueKey::Bool(b),
        }
    }
}

fn instantiate(
    sig: &Signature,
    atom: &RawAtom,
    binding: &BTreeMap<String, ValueKey>,
) -> Result<Option<FluentAtom>> {
    let id = sig.fluent(atom)?;
    let domain = &sig.fluents[id.0].domain;
    let value = match &atom.rhs {
        Rhs::Bool(b) => Value::Bool(*b),
        Rhs::Int(i) => Value::Int(*i),
        Rhs::Name(name) => match binding.get(name) {
            Some(ValueKey::Bool(b)) => Value::Bool(*b),
            Some(ValueKey::Int(i)) => Value::Int(*i),
            Some(ValueKey::Sym(s)) => Value::Sym(s.clone()),
            None => Value::Sym(name.clone()),
        },
        Rhs::Offset(name, offset) => match binding.get(name) {
            Some(ValueKey::Int(i)) => match i.checked_add(*offset) {
                Some(v) => Value::Int(v),
                None => return Ok(None),
            },
            _ => return Ok(None),
        },
    };
    Ok(domain
        .index_of(&value)
        .map(|value| FluentAtom { fluent: id, value }))
}

/// Every assignment of the schema variables, in lexicographic order.
fn bindings(vars: &BTreeMap<String, BTreeSet<ValueKey>>) -> Vec<BTreeMap<String, ValueKey>> {
    let mut out = vec![BTreeMap::new()];
    for (name, values) in vars {
        let mut next = Vec::with_capacity(out.len() * values.len());
        for partial in &out {
            for v in values {
                let mut b = partial.clone();
                b.insert(name.clone(), v.clone());
                next.push(b);
            }
        }
        out = next;
    }
    out
}

const MAX_GROUND_LAWS: usize = 1 << 20;

fn ground(sig: &Signature, atoms: &[&RawAtom], pos: Pos) -> Result<Vec<Vec<FluentAtom>>> {
    let mut vars = BTreeMap::new();
    for atom in atoms {
        candidates(sig, atom, &mut vars)?;
    }
    let count = vars
        .values()
        .try_fold(1usize, |acc, s| acc.checked_mul(s.len().max(1)));
    if count.is_none_or(|c| c > MAX_GROUND_LAWS) {
        return Err(violation(pos, "schema grounds to too many laws".into()));
    }
    let mut out = Vec::new();
    'binding: for binding in bindings(&vars) {
        let mut ground = Vec::with_capacity(atoms.len());
        for atom in atoms {
            match instantiate(sig, atom, &binding)? {
                Some(a) => ground.push(a),
                None => continue 'binding,
            }
        }
        out.push(ground);
    }
    Ok(out)
}

/// Parses an action description.
///
/// Declarations may appear in any order relative to the laws that use them.
/// Laws with schema variables (capitalised names that are not domain values)
/// are grounded over the declared domains; instances that would leave a
/// domain are dropped.
pub fn parse_action_description(text: &str) -> Result<ActionDescription> {
    let tokens = lex(text)?;
    let end = Pos {
        line: text.lines().count().max(1),
        col: text.lines().last().map_or(1, |l| l.chars().count() + 1),
    };
    let mut parser = Parser { tokens, at: 0, end };
    let mut clauses = Vec::new();
    while parser.peek().is_some() {
        clauses.push(parser.clause()?);
    }

    let mut sig = Signature {
        fluents: Vec::new(),
        actions: Vec::new(),
    };
    let mut seen: HashSet<String> = HashSet::new();
    for clause in &clauses {
        match clause {
            Clause::Fluent { name, domain, pos } => {
                if !seen.insert(name.clone()) {
                    return Err(ActionLangError::Duplicate {
                        line: pos.line,
                        col: pos.col,
                        name: name.clone(),
                    });
                }
                sig.fluents.push(FluentDecl {
                    name: name.clone(),
                    domain: domain.clone(),
                });
            }
            Clause::Action { names } => {
                for (name, pos) in names {
                    if !seen.insert(name.clone()) {
                        return Err(ActionLangError::Duplicate {
                            line: pos.line,
                            col: pos.col,
                            name: name.clone(),
                        });
                    }
                    sig.actions.push(name.clone());
                }
            }
            _ => {}
        }
    }

    let mut statics = Vec::new();
    let mut dynamics = Vec::new();
    let mut seen_static = HashSet::new();
    let mut seen_dynamic = HashSet::new();
    for clause in &clauses {
        match clause {
            Clause::Static { head, body } => {
                let atoms: Vec<&RawAtom> = std::iter::once(head).chain(body.iter()).collect();
                for ground in ground(&sig, &atoms, head.pos)? {
                    let law = StaticLaw {
                        head: ground[0],
                        body: ground[1..].to_vec(),
                    };
                    if seen_static.insert(law.clone()) {
                        statics.push(law);
                    }
                }
            }
            Clause::Dynamic {
                action,
                action_pos,
                effect,
                preconditions,
            } => {
                let id = sig
                    .actions
                    .iter()
                    .position(|a| a == action)
                    .map(ActionId)
                    .ok_or_else(|| ActionLangError::Undeclared {
                        line: action_pos.line,
                        col: action_pos.col,
                        name: action.clone(),
                    })?;
                let atoms: Vec<&RawAtom> = std::iter::once(effect)
                    .chain(preconditions.iter())
                    .collect();
                for ground in ground(&sig, &atoms, *action_pos)? {
                    let law = DynamicLaw {
                        action: id,
                        effect: ground[0],
                        preconditions: ground[1..].to_vec(),
                    };
                    if seen_dynamic.insert(law.clone()) {
                        dynamics.push(law);
                    }
                }
            }
            _ => {}
        }
    }

    Ok(ActionDescription::new(
        sig.fluents,
        sig.actions,
        statics,
        dynamics,
    ))
}

/// Parses a ground condition `A1, ..., An` against a description's signature.
pub(super) fn parse_condition(desc: &ActionDescription, text: &str) -> Result<PartialState> {
    let tokens = lex(text)?;
    let mut parser = Parser {
        tokens,
        at: 0,
        end: Pos {
            line: 1,
            col: text.chars().count() + 1,
        },
    };
    let sig = Signature {
        fluents: desc.fluents.clone(),
        actions: desc.actions.clone(),
    };
    let mut condition = PartialState::new();
    if parser.peek().is_none() {
        return Ok(condition);
    }
    loop {
        let raw = parser.atom()?;
        let mut vars = BTreeMap::new();
        candidates(&sig, &raw, &mut vars)?;
        if let Some(var) = vars.keys().next() {
            return Err(violation(raw.pos, format!("unbound variable `{var}`")));
        }
        let atom = instantiate(&sig, &raw, &BTreeMap::new())?
            .ok_or_else(|| violation(raw.pos, "value outside domain".into()))?;
        if let Some(previous) = condition.insert(atom.fluent, atom.value) {
            if previous != atom.value {
                return Err(ActionLangError::Inconsistent {
                    fluent: raw.fluent.clone(),
                });
            }
        }
        if !parser.eat(&Tok::Comma) {
            break;
        }
    }
    parser.eat(&Tok::Dot);
    if parser.peek().is_some() {
        return Err(syntax(parser.pos(), "trailing input after condition"));
    }
    Ok(condition)
}
