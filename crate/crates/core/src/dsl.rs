//! The `.cp` protocol description language.
//!
//! ```text
//! protocol p2;
//! agents A B;
//! sharedkey k[A,B];
//! process A(A) { init x:M; 0: send open k[A,B](x) -> 1; }
//! process B(B) { var y:M; 0: recv open k[A,B](?y) -> 1; }
//! goal integrity at B.1 : A.x == B.y;
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::Serialize;
use thiserror::Error;

use crate::process::{Action, Dp, Edge, SeqProc};
use crate::term::{sym, Binding, FunSym, Node, Renaming, Sym, Term, TermError, Ty, OPEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ErrorKind {
    SyntaxError,
    KindError,
    UndeclaredVariable,
}

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize)]
#[error("{line}:{col}: {kind:?}: {message}{}", expected_suffix(.expected))]
pub struct ParseError {
    pub kind: ErrorKind,
    pub line: usize,
    pub col: usize,
    pub message: String,
    pub expected: Vec<String>,
}

fn expected_suffix(e: &[String]) -> String {
    if e.is_empty() {
        String::new()
    } else {
        format!(" (expected one of: {})", e.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(usize),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Num(n) => write!(f, "`{n}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

const PUNCT: [&str; 17] = [
    "->", ":=", "==", ";", ",", ":", "(", ")", "[", "]", "{", "}", "?", "#", "~", "*", ".",
];

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (l0, c0) = (line, col);
        if c.is_ascii_digit() {
            let mut n = 0usize;
            while i < chars.len() && chars[i].is_ascii_digit() {
                n = n * 10 + chars[i].to_digit(10).unwrap() as usize;
                i += 1;
                col += 1;
            }
            out.push(Spanned { tok: Tok::Num(n), line: l0, col: c0 });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                i += 1;
                col += 1;
            }
            out.push(Spanned { tok: Tok::Ident(s), line: l0, col: c0 });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match PUNCT.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                i += p.len();
                col += p.len();
                out.push(Spanned { tok: Tok::Sym(p), line: l0, col: c0 });
            }
            None => {
                return Err(ParseError {
                    kind: ErrorKind::SyntaxError,
                    line,
                    col,
                    message: format!("unexpected character `{c}`"),
                    expected: vec![],
                })
            }
        }
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

const KEYWORDS: [&str; 21] = [
    "protocol", "agents", "intermediary", "sharedkey", "sharedchannel", "replicable", "process",
    "init", "hidden", "var", "send", "recv", "let", "open", "goal", "integrity", "secrecy",
    "correspondence", "exists", "with", "at",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub from: usize,
    pub action: Action,
    pub to: usize,
    /// Variables written `?v` in this step.
    pub binders: BTreeSet<Sym>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcDecl {
    pub name: Sym,
    pub replicable: bool,
    pub param: Sym,
    pub init: Vec<(Sym, Ty)>,
    pub hidden: Vec<(Sym, Ty)>,
    pub vars: Vec<(Sym, Ty)>,
    pub steps: Vec<Step>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Goal {
    Integrity {
        proc: Sym,
        node: usize,
        eqs: Vec<(Term, Term)>,
    },
    Secrecy {
        items: Vec<Term>,
    },
    Correspondence {
        proc: Sym,
        node: usize,
        witness: Sym,
        witness_node: usize,
        eqs: Vec<(Term, Term)>,
    },
}

impl Goal {
    pub fn kind(&self) -> &'static str {
        match self {
            Goal::Integrity { .. } => "integrity",
            Goal::Secrecy { .. } => "secrecy",
            Goal::Correspondence { .. } => "correspondence",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolSpec {
    pub name: String,
    pub agents: Vec<Sym>,
    pub intermediaries: Vec<Sym>,
    pub shared_keys: Vec<Term>,
    pub shared_channels: Vec<Term>,
    pub processes: Vec<ProcDecl>,
    pub goals: Vec<Goal>,
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    agents: BTreeSet<String>,
    /// Variables in scope with their kinds.
    scope: BTreeMap<String, Ty>,
    /// Variables that may be bound with `?`.
    bindable: BTreeSet<String>,
    binders: BTreeSet<Sym>,
    /// Qualified names available in goals.
    goal_scope: BTreeMap<String, BTreeMap<String, Ty>>,
    in_goal: bool,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn err<T>(&self, kind: ErrorKind, message: String, expected: &[&str]) -> PResult<T> {
        let (line, col) = self.here();
        Err(ParseError {
            kind,
            line,
            col,
            message,
            expected: expected.iter().map(|s| s.to_string()).collect(),
        })
    }

    fn err_at<T>(&self, at: (usize, usize), kind: ErrorKind, message: String) -> PResult<T> {
        Err(ParseError {
            kind,
            line: at.0,
            col: at.1,
            message,
            expected: vec![],
        })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == s)
    }

    fn expect_sym(&mut self, s: &'static str) -> PResult<()> {
        if self.is_sym(s) {
            self.bump();
            Ok(())
        } else {
            self.err(ErrorKind::SyntaxError, format!("found {}", self.peek()), &[s])
        }
    }

    fn expect_kw(&mut self, s: &'static str) -> PResult<()> {
        if self.is_kw(s) {
            self.bump();
            Ok(())
        } else {
            self.err(ErrorKind::SyntaxError, format!("found {}", self.peek()), &[s])
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            t => self.err(ErrorKind::SyntaxError, format!("found {t}"), &["identifier"]),
        }
    }

    fn number(&mut self) -> PResult<usize> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(n)
            }
            t => self.err(ErrorKind::SyntaxError, format!("found {t}"), &["node number"]),
        }
    }

    fn ty(&mut self) -> PResult<Ty> {
        let at = self.here();
        let s = match self.peek().clone() {
            Tok::Ident(s) => s,
            t => return self.err(ErrorKind::SyntaxError, format!("found {t}"), &["A", "C", "K", "M", "N"]),
        };
        let ty = match s.as_str() {
            "A" => Ty::A,
            "C" => Ty::C,
            "K" => Ty::K,
            "M" => Ty::M,
            "N" => Ty::N,
            _ => {
                return self.err_at(at, ErrorKind::SyntaxError, format!("unknown type `{s}`"));
            }
        };
        self.bump();
        Ok(ty)
    }

    fn protocol(&mut self) -> PResult<ProtocolSpec> {
        self.expect_kw("protocol")?;
        let name = self.ident()?;
        self.expect_sym(";")?;
        let mut spec = ProtocolSpec {
            name,
            agents: vec![],
            intermediaries: vec![],
            shared_keys: vec![],
            shared_channels: vec![],
            processes: vec![],
            goals: vec![],
        };
        loop {
            if self.is_kw("agents") || self.is_kw("intermediary") {
                let inter = self.is_kw("intermediary");
                self.bump();
                while !self.is_sym(";") {
                    let a = self.ident()?;
                    self.agents.insert(a.clone());
                    if inter {
                        spec.intermediaries.push(sym(&a));
                    } else {
                        spec.agents.push(sym(&a));
                    }
                }
                self.bump();
            } else if self.is_kw("sharedkey") || self.is_kw("sharedchannel") {
                let key = self.is_kw("sharedkey");
                self.bump();
                loop {
                    let at = self.here();
                    let t = self.term()?;
                    let ok = if key {
                        matches!(t.fsym(), Some(FunSym::SharedKey(_)))
                    } else {
                        matches!(t.fsym(), Some(FunSym::SharedChannel(_)))
                    };
                    if !ok {
                        return self.err_at(at, ErrorKind::KindError, format!("{t} is not a shared {}", if key { "key" } else { "channel" }));
                    }
                    if key {
                        spec.shared_keys.push(t);
                    } else {
                        spec.shared_channels.push(t);
                    }
                    if self.is_sym(",") {
                        self.bump();
                    } else {
                        break;
                    }
                }
                self.expect_sym(";")?;
            } else {
                break;
            }
        }
        while self.is_kw("process") || self.is_kw("replicable") {
            let p = self.process()?;
            if spec.processes.iter().any(|q| q.name == p.name) {
                return self.err(ErrorKind::SyntaxError, format!("process {} declared twice", p.name), &[]);
            }
            spec.processes.push(p);
        }
        for p in &spec.processes {
            let mut m = BTreeMap::new();
            let param_ty = if self.agents.contains(&*p.param) { None } else { Some(Ty::A) };
            if let Some(t) = param_ty {
                m.insert(p.param.to_string(), t);
            }
            for (v, t) in p.init.iter().chain(&p.hidden).chain(&p.vars) {
                m.insert(v.to_string(), t.clone());
            }
            self.goal_scope.insert(p.name.to_string(), m);
        }
        while self.is_kw("goal") {
            spec.goals.push(self.goal(&spec)?);
        }
        match self.peek() {
            Tok::Eof => Ok(spec),
            t => self.err(ErrorKind::SyntaxError, format!("found {t}"), &["process", "goal", "end of input"]),
        }
    }

    fn decls(&mut self, out: &mut Vec<(Sym, Ty)>, hidden: &mut Vec<(Sym, Ty)>, allow_tilde: bool) -> PResult<()> {
        loop {
            let tilde = allow_tilde && self.is_sym("~");
            if tilde {
                self.bump();
            }
            let at = self.here();
            let name = self.ident()?;
            if self.agents.contains(&name) || self.scope.contains_key(&name) {
                return self.err_at(at, ErrorKind::SyntaxError, format!("`{name}` is already declared"));
            }
            self.expect_sym(":")?;
            let ty = self.ty()?;
            self.scope.insert(name.clone(), ty.clone());
            if tilde {
                hidden.push((sym(&name), ty));
            } else {
                out.push((sym(&name), ty));
            }
            if self.is_sym(",") {
                self.bump();
            } else {
                break;
            }
        }
        self.expect_sym(";")
    }

    fn process(&mut self) -> PResult<ProcDecl> {
        let replicable = self.is_kw("replicable");
        if replicable {
            self.bump();
        }
        self.expect_kw("process")?;
        let name = self.ident()?;
        self.expect_sym("(")?;
        let param = self.ident()?;
        self.expect_sym(")")?;
        self.expect_sym("{")?;
        self.scope.clear();
        self.bindable.clear();
        if !self.agents.contains(&param) {
            self.scope.insert(param.clone(), Ty::A);
        }
        let mut p = ProcDecl {
            name: sym(&name),
            replicable,
            param: sym(&param),
            init: vec![],
            hidden: vec![],
            vars: vec![],
            steps: vec![],
        };
        loop {
            if self.is_kw("init") {
                self.bump();
                let mut h = vec![];
                self.decls(&mut p.init, &mut h, false)?;
            } else if self.is_kw("hidden") {
                self.bump();
                let mut h = vec![];
                self.decls(&mut p.hidden, &mut h, false)?;
            } else if self.is_kw("var") {
                self.bump();
                let mut vs = vec![];
                self.decls(&mut vs, &mut p.hidden, true)?;
                for (v, _) in &vs {
                    self.bindable.insert(v.to_string());
                }
                p.vars.extend(vs);
            } else {
                break;
            }
        }
        while !self.is_sym("}") {
            p.steps.push(self.step()?);
        }
        self.bump();
        Ok(p)
    }

    fn chan(&mut self) -> PResult<Term> {
        if self.is_kw("open") {
            self.bump();
            return Ok(Term::open());
        }
        let at = self.here();
        let t = self.term()?;
        if *t.ty() != Ty::C {
            return self.err_at(at, ErrorKind::KindError, format!("{t} is not a channel"));
        }
        Ok(t)
    }

    fn step(&mut self) -> PResult<Step> {
        let from = self.number()?;
        self.expect_sym(":")?;
        self.binders.clear();
        let action = if self.is_kw("send") {
            self.bump();
            let chan = self.chan()?;
            let at = self.here();
            let msg = self.term()?;
            if !self.binders.is_empty() {
                return self.err_at(at, ErrorKind::SyntaxError, "`?` is only allowed in receive patterns".into());
            }
            Action::Send { chan, msg }
        } else if self.is_kw("recv") {
            self.bump();
            let chan = self.chan()?;
            let pat = self.term()?;
            Action::Recv { chan, pat }
        } else if self.is_kw("let") {
            self.bump();
            let lhs = self.term()?;
            self.expect_sym(":=")?;
            let at = self.here();
            let n = self.binders.len();
            let rhs = self.term()?;
            if self.binders.len() != n {
                return self.err_at(at, ErrorKind::SyntaxError, "`?` is only allowed on the left of `:=`".into());
            }
            Action::Assign { lhs, rhs }
        } else {
            return self.err(ErrorKind::SyntaxError, format!("found {}", self.peek()), &["send", "recv", "let"]);
        };
        self.expect_sym("->")?;
        let to = self.number()?;
        self.expect_sym(";")?;
        Ok(Step {
            from,
            action,
            to,
            binders: std::mem::take(&mut self.binders),
        })
    }

    fn app(&self, at: (usize, usize), f: FunSym, args: Vec<Term>) -> PResult<Term> {
        Term::app(f, args).or_else(|e: TermError| self.err_at(at, ErrorKind::KindError, e.to_string()))
    }

    fn term_list(&mut self, close: &'static str) -> PResult<Vec<Term>> {
        let mut v = vec![self.term()?];
        while self.is_sym(",") {
            self.bump();
            v.push(self.term()?);
        }
        self.expect_sym(close)?;
        Ok(v)
    }

    fn term(&mut self) -> PResult<Term> {
        let at = self.here();
        match self.peek().clone() {
            Tok::Sym("?") => {
                self.bump();
                let vat = self.here();
                let name = self.ident()?;
                if self.in_goal {
                    return self.err_at(at, ErrorKind::SyntaxError, "`?` is not allowed in goals".into());
                }
                let Some(ty) = self.scope.get(&name).cloned() else {
                    return self.err_at(vat, ErrorKind::UndeclaredVariable, format!("`{name}` is not declared"));
                };
                if !self.bindable.contains(&name) {
                    return self.err_at(vat, ErrorKind::SyntaxError, format!("`{name}` is initialized and cannot be bound"));
                }
                self.binders.insert(sym(&name));
                Ok(Term::var(&name, ty))
            }
            Tok::Sym("#") => {
                self.bump();
                let name = self.ident()?;
                let ty = if self.agents.contains(&name) { Ty::A } else { Ty::M };
                Ok(Term::con(&name, ty))
            }
            Tok::Sym("*") if self.in_goal => {
                self.bump();
                Ok(Term::var("*", Ty::A))
            }
            Tok::Sym("(") => {
                self.bump();
                let items = self.term_list(")")?;
                Ok(if items.len() == 1 {
                    items.into_iter().next().unwrap()
                } else {
                    let n = items.len();
                    self.app(at, FunSym::Tuple(n), items)?
                })
            }
            Tok::Ident(s) if s == "enc" && matches!(self.peek_at(1), Tok::Sym("(")) => {
                self.bump();
                self.bump();
                let mut items = self.term_list(")")?;
                if items.len() < 2 {
                    return self.err_at(at, ErrorKind::SyntaxError, "enc needs a key and a payload".into());
                }
                let key = items.remove(0);
                self.app(at, FunSym::Encrypt, vec![key, Term::tuple(items)])
            }
            Tok::Ident(s) if s == "dec" && matches!(self.peek_at(1), Tok::Sym("(")) => {
                self.bump();
                self.bump();
                let items = self.term_list(")")?;
                if items.len() != 2 {
                    return self.err_at(at, ErrorKind::SyntaxError, "dec takes a key and a term".into());
                }
                let mut it = items.into_iter();
                let (k, e) = (it.next().unwrap(), it.next().unwrap());
                self.app(at, FunSym::Decrypt, vec![k, e])
            }
            Tok::Ident(s) if (s == "k" || s == "c") && matches!(self.peek_at(1), Tok::Sym("[")) => {
                self.bump();
                self.bump();
                let agents = self.term_list("]")?;
                let n = agents.len();
                if s == "c" {
                    return self.app(at, FunSym::SharedChannel(n), agents);
                }
                let key = self.app(at, FunSym::SharedKey(n), agents)?;
                if self.is_sym("(") {
                    let pat = self.here();
                    self.bump();
                    let items = self.term_list(")")?;
                    self.app(pat, FunSym::Encrypt, vec![key, Term::tuple(items)])
                } else {
                    Ok(key)
                }
            }
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                self.bump();
                if self.in_goal && self.is_sym(".") {
                    self.bump();
                    let vat = self.here();
                    let var = self.ident()?;
                    let Some(vars) = self.goal_scope.get(&name) else {
                        return self.err_at(at, ErrorKind::UndeclaredVariable, format!("no process `{name}`"));
                    };
                    let Some(ty) = vars.get(&var) else {
                        return self.err_at(vat, ErrorKind::UndeclaredVariable, format!("`{name}.{var}` is not declared"));
                    };
                    return Ok(Term::var(&format!("{name}.{var}"), ty.clone()));
                }
                if self.agents.contains(&name) {
                    return Ok(Term::agent(&name));
                }
                if self.in_goal {
                    let owners: Vec<&Ty> = self.goal_scope.values().filter_map(|m| m.get(&name)).collect();
                    return match owners.as_slice() {
                        [ty] => Ok(Term::var(&name, (*ty).clone())),
                        [] => self.err_at(at, ErrorKind::UndeclaredVariable, format!("`{name}` is not declared")),
                        _ => self.err_at(at, ErrorKind::UndeclaredVariable, format!("`{name}` is ambiguous; qualify it")),
                    };
                }
                match self.scope.get(&name) {
                    Some(ty) => Ok(Term::var(&name, ty.clone())),
                    None => self.err_at(at, ErrorKind::UndeclaredVariable, format!("`{name}` is not declared")),
                }
            }
            t => self.err(
                ErrorKind::SyntaxError,
                format!("found {t}"),
                &["term", "?var", "#const", "(", "enc", "k[", "c["],
            ),
        }
    }

    fn at_ref(&mut self) -> PResult<(Sym, usize)> {
        let at = self.here();
        let p = self.ident()?;
        if !self.goal_scope.contains_key(&p) {
            return self.err_at(at, ErrorKind::UndeclaredVariable, format!("no process `{p}`"));
        }
        self.expect_sym(".")?;
        let n = self.number()?;
        Ok((sym(&p), n))
    }

    fn eq_list(&mut self) -> PResult<Vec<(Term, Term)>> {
        let mut v = Vec::new();
        loop {
            let a = self.term()?;
            self.expect_sym("==")?;
            let b = self.term()?;
            v.push((a, b));
            if self.is_sym(",") {
                self.bump();
            } else {
                break;
            }
        }
        Ok(v)
    }

    fn goal(&mut self, spec: &ProtocolSpec) -> PResult<Goal> {
        self.expect_kw("goal")?;
        self.in_goal = true;
        let g = if self.is_kw("integrity") {
            self.bump();
            self.expect_kw("at")?;
            let (proc, node) = self.at_ref()?;
            self.expect_sym(":")?;
            Goal::Integrity {
                proc,
                node,
                eqs: self.eq_list()?,
            }
        } else if self.is_kw("secrecy") {
            self.bump();
            self.expect_sym(":")?;
            let mut items = vec![self.term()?];
            while self.is_sym(",") {
                self.bump();
                items.push(self.term()?);
            }
            Goal::Secrecy { items }
        } else if self.is_kw("correspondence") {
            self.bump();
            self.expect_kw("at")?;
            let (proc, node) = self.at_ref()?;
            self.expect_sym(":")?;
            self.expect_kw("exists")?;
            let wat = self.here();
            let witness = self.ident()?;
            if !spec.processes.iter().any(|p| *p.name == *witness) {
                return self.err_at(wat, ErrorKind::UndeclaredVariable, format!("no process `{witness}`"));
            }
            self.expect_kw("at")?;
            let witness_node = self.number()?;
            self.expect_kw("with")?;
            Goal::Correspondence {
                proc,
                node,
                witness: sym(&witness),
                witness_node,
                eqs: self.eq_list()?,
            }
        } else {
            return self.err(
                ErrorKind::SyntaxError,
                format!("found {}", self.peek()),
                &["integrity", "secrecy", "correspondence"],
            );
        };
        self.expect_sym(";")?;
        self.in_goal = false;
        Ok(g)
    }
}

pub fn parse(src: &str) -> Result<ProtocolSpec, ParseError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        agents: BTreeSet::new(),
        scope: BTreeMap::new(),
        bindable: BTreeSet::new(),
        binders: BTreeSet::new(),
        goal_scope: BTreeMap::new(),
        in_goal: false,
    };
    p.protocol()
}

struct TermPrinter<'a> {
    agents: &'a BTreeSet<Sym>,
    pending: BTreeSet<Sym>,
}

impl TermPrinter<'_> {
    fn list(&mut self, out: &mut String, items: &[Term]) {
        for (i, t) in items.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            self.term(out, t);
        }
    }

    fn payload(&mut self, out: &mut String, p: &Term) {
        match p.node() {
            Node::App(FunSym::Tuple(_), items) => self.list(out, items),
            _ => self.term(out, p),
        }
    }

    fn term(&mut self, out: &mut String, t: &Term) {
        match t.node() {
            Node::Var(s) => {
                if self.pending.remove(s) {
                    out.push('?');
                }
                out.push_str(s);
            }
            Node::Con(s) => {
                if !(self.agents.contains(s) && *t.ty() == Ty::A) {
                    out.push('#');
                }
                out.push_str(s);
            }
            Node::App(FunSym::Encrypt, a) => {
                if matches!(a[0].fsym(), Some(FunSym::SharedKey(_))) {
                    self.term(out, &a[0]);
                } else {
                    out.push_str("enc(");
                    self.term(out, &a[0]);
                    out.push_str(", ");
                }
                if matches!(a[0].fsym(), Some(FunSym::SharedKey(_))) {
                    out.push('(');
                }
                self.payload(out, &a[1]);
                out.push(')');
            }
            Node::App(FunSym::Decrypt, a) => {
                out.push_str("dec(");
                self.list(out, a);
                out.push(')');
            }
            Node::App(FunSym::SharedKey(_), a) | Node::App(FunSym::SharedChannel(_), a) => {
                out.push(if t.fsym() == Some(FunSym::SharedKey(a.len())) { 'k' } else { 'c' });
                out.push('[');
                let mut inner = String::new();
                for (i, x) in a.iter().enumerate() {
                    if i > 0 {
                        inner.push(',');
                    }
                    self.term(&mut inner, x);
                }
                out.push_str(&inner);
                out.push(']');
            }
            Node::App(FunSym::Tuple(_), a) => {
                out.push('(');
                self.list(out, a);
                out.push(')');
            }
        }
    }
}

fn decl_list(v: &[(Sym, Ty)]) -> String {
    v.iter().map(|(n, t)| format!("{n}:{t}")).collect::<Vec<_>>().join(", ")
}

/// Canonical source text of a protocol.
pub fn print(spec: &ProtocolSpec) -> String {
    let agents: BTreeSet<Sym> = spec.agents.iter().chain(&spec.intermediaries).cloned().collect();
    let tp = |t: &Term, binders: &BTreeSet<Sym>| {
        let mut p = TermPrinter {
            agents: &agents,
            pending: binders.clone(),
        };
        let mut s = String::new();
        p.term(&mut s, t);
        s
    };
    let none = BTreeSet::new();
    let mut out = String::new();
    let _ = writeln!(out, "protocol {};", spec.name);
    if !spec.agents.is_empty() {
        let _ = writeln!(out, "agents {};", spec.agents.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" "));
    }
    if !spec.intermediaries.is_empty() {
        let _ = writeln!(
            out,
            "intermediary {};",
            spec.intermediaries.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" ")
        );
    }
    for (kw, list) in [("sharedkey", &spec.shared_keys), ("sharedchannel", &spec.shared_channels)] {
        if !list.is_empty() {
            let items: Vec<String> = list.iter().map(|t| tp(t, &none)).collect();
            let _ = writeln!(out, "{kw} {};", items.join(", "));
        }
    }
    for p in &spec.processes {
        out.push('\n');
        if p.replicable {
            out.push_str("replicable ");
        }
        let _ = writeln!(out, "process {}({}) {{", p.name, p.param);
        for (kw, v) in [("init", &p.init), ("hidden", &p.hidden), ("var", &p.vars)] {
            if !v.is_empty() {
                let _ = writeln!(out, "  {kw} {};", decl_list(v));
            }
        }
        for s in &p.steps {
            let chan = |c: &Term| if c.is_open() { "open".to_string() } else { tp(c, &none) };
            let body = match &s.action {
                Action::Send { chan: c, msg } => format!("send {} {}", chan(c), tp(msg, &none)),
                Action::Recv { chan: c, pat } => format!("recv {} {}", chan(c), tp(pat, &s.binders)),
                Action::Assign { lhs, rhs } => format!("let {} := {}", tp(lhs, &s.binders), tp(rhs, &none)),
            };
            let _ = writeln!(out, "  {}: {} -> {};", s.from, body, s.to);
        }
        out.push_str("}\n");
    }
    if !spec.goals.is_empty() {
        out.push('\n');
    }
    let eqs = |v: &[(Term, Term)]| {
        v.iter()
            .map(|(a, b)| format!("{} == {}", tp(a, &none), tp(b, &none)))
            .collect::<Vec<_>>()
            .join(", ")
    };
    for g in &spec.goals {
        let line = match g {
            Goal::Integrity { proc, node, eqs: e } => format!("goal integrity at {proc}.{node} : {};", eqs(e)),
            Goal::Secrecy { items } => format!(
                "goal secrecy : {};",
                items.iter().map(|t| tp(t, &none).replace("?", "")).collect::<Vec<_>>().join(", ")
            ),
            Goal::Correspondence {
                proc,
                node,
                witness,
                witness_node,
                eqs: e,
            } => format!(
                "goal correspondence at {proc}.{node} : exists {witness} at {witness_node} with {};",
                eqs(e)
            ),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

impl fmt::Display for ProtocolSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print(self))
    }
}

/// One copy of a process template in a run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceSpec {
    pub template: Sym,
    pub name: Sym,
    /// Values of initialized agent variables, the parameter included.
    pub agents: BTreeMap<Sym, Term>,
}

impl ProtocolSpec {
    pub fn process(&self, name: &str) -> Option<&ProcDecl> {
        self.processes.iter().find(|p| &*p.name == name)
    }

    pub fn agent_terms(&self) -> Vec<Term> {
        self.agents.iter().map(|a| Term::agent(a)).collect()
    }

    pub fn is_agent(&self, s: &str) -> bool {
        self.agents.iter().chain(&self.intermediaries).any(|a| &**a == s)
    }

    pub fn has_replicable(&self) -> bool {
        self.processes.iter().any(|p| p.replicable)
    }

    /// A process decl as a sequential process over its own variable names.
    pub fn template(&self, p: &ProcDecl) -> SeqProc {
        let mut var_types = BTreeMap::new();
        let mut init_vars = BTreeSet::new();
        let agent = if self.is_agent(&p.param) {
            Term::agent(&p.param)
        } else {
            var_types.insert(p.param.clone(), Ty::A);
            init_vars.insert(p.param.clone());
            Term::var(&p.param, Ty::A)
        };
        for (v, t) in &p.init {
            var_types.insert(v.clone(), t.clone());
            init_vars.insert(v.clone());
        }
        for (v, t) in &p.hidden {
            var_types.insert(v.clone(), t.clone());
            init_vars.insert(v.clone());
        }
        for (v, t) in &p.vars {
            var_types.insert(v.clone(), t.clone());
        }
        let nodes = p.steps.iter().map(|s| s.from.max(s.to) + 1).max().unwrap_or(1);
        SeqProc {
            name: p.name.clone(),
            role: p.name.clone(),
            agent,
            nodes,
            init: 0,
            edges: p
                .steps
                .iter()
                .map(|s| Edge {
                    from: s.from,
                    action: s.action.clone(),
                    to: s.to,
                })
                .collect(),
            init_vars,
            hidden: p.hidden.iter().map(|(v, _)| v.clone()).collect(),
            var_types,
        }
    }

    /// One copy of every process, variables renamed `v@Proc` only where two
    /// processes use the same name. Free parameters stay symbolic.
    pub fn single_dp(&self) -> (Dp, VarMap) {
        let mut count: BTreeMap<Sym, usize> = BTreeMap::new();
        for p in &self.processes {
            for v in self.template(p).var_types.keys() {
                *count.entry(v.clone()).or_default() += 1;
            }
        }
        let mut procs = Vec::new();
        let mut map = VarMap::default();
        for p in &self.processes {
            let t = self.template(p);
            let eta = Renaming::new(
                t.var_types
                    .keys()
                    .filter(|v| count[*v] > 1)
                    .map(|v| (v.clone(), sym(&format!("{v}@{}", p.name)))),
            )
            .expect("suffixes keep names distinct");
            let r = t.renamed(&eta);
            for (v, ty) in &t.var_types {
                map.insert(&p.name, &p.name, v, Term::var(&eta.rename_sym(v), ty.clone()));
            }
            procs.push(r);
        }
        let dp = Dp {
            procs,
            agents: self.agent_terms(),
            intermediaries: self.intermediaries.iter().map(|a| Term::agent(a)).collect(),
            shared_keys: self.shared_keys.clone(),
            shared_channels: self.shared_channels.clone(),
            params: Binding::id(),
        };
        (dp, map)
    }

    /// The listed instances with variables renamed `v@Instance` and agent
    /// variables bound as given.
    pub fn instantiate(&self, insts: &[InstanceSpec]) -> (Dp, VarMap) {
        let mut procs = Vec::new();
        let mut params = Binding::id();
        let mut map = VarMap::default();
        for inst in insts {
            let decl = self.process(&inst.template).expect("instance of a declared process");
            let t = self.template(decl);
            let eta = Renaming::new(
                t.var_types
                    .keys()
                    .map(|v| (v.clone(), sym(&format!("{v}@{}", inst.name)))),
            )
            .expect("suffixes keep names distinct");
            let mut r = t.renamed(&eta);
            r.name = inst.name.clone();
            r.role = decl.name.clone();
            for (v, val) in &inst.agents {
                params.insert_unchecked(eta.rename_sym(v), val.clone());
            }
            for (v, ty) in &t.var_types {
                map.insert(&decl.name, &inst.name, v, Term::var(&eta.rename_sym(v), ty.clone()));
            }
            procs.push(r);
        }
        let dp = Dp {
            procs,
            agents: self.agent_terms(),
            intermediaries: self.intermediaries.iter().map(|a| Term::agent(a)).collect(),
            shared_keys: self.shared_keys.clone(),
            shared_channels: self.shared_channels.clone(),
            params,
        };
        (dp, map)
    }
}

/// Where each declared variable of each instance ended up.
#[derive(Clone, Debug, Default)]
pub struct VarMap {
    /// (role, instance, declared name) → variable term.
    entries: BTreeMap<(Sym, Sym, Sym), Term>,
}

impl VarMap {
    fn insert(&mut self, role: &Sym, inst: &Sym, var: &Sym, t: Term) {
        self.entries.insert((role.clone(), inst.clone(), var.clone()), t);
    }

    pub fn instances_of(&self, role: &str) -> Vec<Sym> {
        let mut v: Vec<Sym> = self
            .entries
            .keys()
            .filter(|(r, _, _)| &**r == role)
            .map(|(_, i, _)| i.clone())
            .collect();
        v.dedup();
        v
    }

    pub fn get(&self, role: &str, inst: &str, var: &str) -> Option<&Term> {
        self.entries.get(&(sym(role), sym(inst), sym(var)))
    }

    /// Replaces goal references `Role.var` with the variable of the chosen
    /// instance of each role; unqualified names resolve through any role.
    pub fn resolve(&self, t: &Term, choice: &BTreeMap<Sym, Sym>) -> Option<Term> {
        match t.node() {
            Node::Var(s) if &**s == "*" || &**s == OPEN => Some(t.clone()),
            Node::Var(s) => {
                if let Some((role, var)) = s.split_once('.') {
                    let inst = choice.get(role)?;
                    self.get(role, inst, var).cloned()
                } else {
                    self.entries
                        .iter()
                        .find(|((r, i, v), _)| **v == **s && choice.get(r) == Some(i))
                        .map(|(_, t)| t.clone())
                }
            }
            Node::Con(_) => Some(t.clone()),
            Node::App(f, args) => {
                let a: Option<Vec<Term>> = args.iter().map(|x| self.resolve(x, choice)).collect();
                Term::app(*f, a?).ok()
            }
        }
    }
}

/// Expands `*` in shared keys and channels over the given agents.
pub fn expand_star(t: &Term, agents: &[Term]) -> Vec<Term> {
    let star = Term::var("*", Ty::A);
    if !t.contains(&star) {
        return vec![t.clone()];
    }
    agents
        .iter()
        .map(|a| {
            let mut b = Binding::id();
            b.insert_unchecked(sym("*"), a.clone());
            crate::term::apply(t, &b)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const P2: &str = "protocol p2;\nagents A B;\nsharedkey k[A,B];\nprocess A(A) { init x:M; 0: send open k[A,B](x) -> 1; }\nprocess B(B) { var y:M; 0: recv open k[A,B](?y) -> 1; }\ngoal integrity at B.1 : A.x == B.y;\n";

    #[test]
    fn parses_and_round_trips() {
        let spec = parse(P2).unwrap();
        assert_eq!(spec.processes.len(), 2);
        let printed = print(&spec);
        assert_eq!(parse(&printed).unwrap(), spec);
    }

    #[test]
    fn undeclared_channel_location() {
        let src = "protocol x;\nagents A B;\nprocess A(A) {\n  init x:M;\n  0: send cAB x -> 1;\n}\n";
        let e = parse(src).unwrap_err();
        assert_eq!(e.kind, ErrorKind::UndeclaredVariable);
        assert_eq!((e.line, e.col), (5, 11));
    }

    #[test]
    fn kind_errors_are_reported() {
        let src = "protocol x;\nagents A;\nprocess A(A) { init n:N; 0: send open enc(n, n) -> 1; }\n";
        assert_eq!(parse(src).unwrap_err().kind, ErrorKind::KindError);
    }

    #[test]
    fn expected_tokens_listed() {
        let e = parse("protocol x").unwrap_err();
        assert_eq!(e.kind, ErrorKind::SyntaxError);
        assert_eq!(e.expected, vec![";".to_string()]);
    }

    #[test]
    fn tilde_marks_hidden() {
        let a = parse("protocol x;\nagents A;\nprocess A(A) { var ~n:N, y:M; 0: send open n -> 1; }\n").unwrap();
        let b = parse("protocol x;\nagents A;\nprocess A(A) { hidden n:N; var y:M; 0: send open n -> 1; }\n").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn assignment_round_trips() {
        let src = "protocol x;\nagents A;\nprocess A(A) { init k:K, m:M; var y:M; 0: let ?y := dec(k, enc(k, m)) -> 1; }\n";
        let spec = parse(src).unwrap();
        match &spec.processes[0].steps[0].action {
            Action::Assign { rhs, .. } => assert_eq!(*rhs, Term::var("m", Ty::M)),
            a => panic!("{a:?}"),
        }
        assert_eq!(parse(&print(&spec)).unwrap(), spec);
    }
}
