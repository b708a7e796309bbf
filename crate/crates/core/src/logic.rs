//! Expressions, formulas and their values in states.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::cc::Cc;
use crate::term::{apply, subterm, Binding, Sym, Term, Ty};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Lit(BTreeSet<Term>),
    /// `[P]`: values of the variables initialized in `P`.
    ProcKnown(Sym),
    /// `⟨P⟩`: every term built from `[P]`.
    ProcTerms(Sym),
    /// `[c]`.
    ChanContent(Term),
    /// `k⁻¹(E)`.
    KeyInv(Term, Box<Expr>),
    Inter(Box<Expr>, Box<Expr>),
    Union(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn lit(items: impl IntoIterator<Item = Term>) -> Expr {
        Expr::Lit(items.into_iter().collect())
    }

    pub fn key_inv(k: Term, e: Expr) -> Expr {
        Expr::KeyInv(k, Box::new(e))
    }

    fn has_intensional(&self) -> bool {
        match self {
            Expr::ProcTerms(_) => true,
            Expr::Lit(_) | Expr::ProcKnown(_) | Expr::ChanContent(_) => false,
            Expr::KeyInv(_, e) => e.has_intensional(),
            Expr::Inter(a, b) | Expr::Union(a, b) => a.has_intensional() || b.has_intensional(),
        }
    }

    fn map_terms(&self, f: &dyn Fn(&Term) -> Term) -> Expr {
        match self {
            Expr::Lit(s) => Expr::Lit(s.iter().map(f).collect()),
            Expr::ProcKnown(p) => Expr::ProcKnown(p.clone()),
            Expr::ProcTerms(p) => Expr::ProcTerms(p.clone()),
            Expr::ChanContent(c) => Expr::ChanContent(f(c)),
            Expr::KeyInv(k, e) => Expr::KeyInv(f(k), Box::new(e.map_terms(f))),
            Expr::Inter(a, b) => Expr::Inter(Box::new(a.map_terms(f)), Box::new(b.map_terms(f))),
            Expr::Union(a, b) => Expr::Union(Box::new(a.map_terms(f)), Box::new(b.map_terms(f))),
        }
    }
}

impl std::fmt::Display for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Expr::Lit(s) => {
                write!(f, "{{")?;
                for (i, t) in s.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, "}}")
            }
            Expr::ProcKnown(p) => write!(f, "[{p}]"),
            Expr::ProcTerms(p) => write!(f, "<{p}>"),
            Expr::ChanContent(c) => write!(f, "[{c}]"),
            Expr::KeyInv(k, e) => write!(f, "{k}^-1{e}"),
            Expr::Inter(a, b) => write!(f, "({a} ∩ {b})"),
            Expr::Union(a, b) => write!(f, "({a} ∪ {b})"),
        }
    }
}

/// Elementary formula.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EF {
    In(Term, Expr),
    Eq(Expr, Expr),
    Sub(Expr, Expr),
    Sup(Expr, Expr),
    SecureC(BTreeSet<Term>, Sym),
    SecureK(BTreeSet<Term>, Sym),
    At(Sym, usize),
}

impl EF {
    /// `a = b` on terms, written as `{a} = {b}`.
    pub fn term_eq(a: Term, b: Term) -> EF {
        EF::Eq(Expr::lit([a]), Expr::lit([b]))
    }

    pub fn as_term_eq(&self) -> Option<(&Term, &Term)> {
        match self {
            EF::Eq(Expr::Lit(a), Expr::Lit(b)) if a.len() == 1 && b.len() == 1 => {
                Some((a.iter().next().unwrap(), b.iter().next().unwrap()))
            }
            _ => None,
        }
    }

    fn map_terms(&self, f: &dyn Fn(&Term) -> Term) -> EF {
        match self {
            EF::In(t, e) => EF::In(f(t), e.map_terms(f)),
            EF::Eq(a, b) => EF::Eq(a.map_terms(f), b.map_terms(f)),
            EF::Sub(a, b) => EF::Sub(a.map_terms(f), b.map_terms(f)),
            EF::Sup(a, b) => EF::Sup(a.map_terms(f), b.map_terms(f)),
            EF::SecureC(s, p) => EF::SecureC(s.iter().map(f).collect(), p.clone()),
            EF::SecureK(s, p) => EF::SecureK(s.iter().map(f).collect(), p.clone()),
            EF::At(p, i) => EF::At(p.clone(), *i),
        }
    }
}

impl std::fmt::Display for EF {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if let Some((a, b)) = self.as_term_eq() {
            return write!(f, "{a} = {b}");
        }
        let set = |s: &BTreeSet<Term>| Expr::Lit(s.clone()).to_string();
        match self {
            EF::In(t, e) => write!(f, "{t} ∈ {e}"),
            EF::Eq(a, b) => write!(f, "{a} = {b}"),
            EF::Sub(a, b) => write!(f, "{a} ⊆ {b}"),
            EF::Sup(a, b) => write!(f, "{a} ⊇ {b}"),
            EF::SecureC(s, p) => write!(f, "{} ⊥C {p}", set(s)),
            EF::SecureK(s, p) => write!(f, "{} ⊥K {p}", set(s)),
            EF::At(p, i) => write!(f, "at_{p} = {i}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Formula {
    pub efs: BTreeSet<EF>,
}

impl Formula {
    pub fn new(efs: impl IntoIterator<Item = EF>) -> Formula {
        Formula {
            efs: efs.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, ef: EF) {
        self.efs.insert(ef);
    }
}

impl std::fmt::Display for Formula {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (i, e) in self.efs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LogicError {
    #[error("unknown process {0}")]
    UnknownProcess(Sym),
    #[error("formula shape outside the decidable fragment: {0}")]
    UnsupportedEFShape(String),
}

/// What a formula needs to know about a state.
pub trait StateView {
    fn theta(&self) -> &Binding;
    fn channel(&self, c: &Term) -> Option<&BTreeSet<Term>>;
    fn channels(&self) -> Vec<(&Term, &BTreeSet<Term>)>;
    /// `[P]^s`.
    fn known_values(&self, p: &str) -> Option<Vec<Term>>;
    /// Membership in `⟨P⟩_s`.
    fn can_build(&self, p: &str, t: &Term) -> Option<bool>;
    fn agent_of(&self, p: &str) -> Option<Term>;
    fn at(&self, p: &str) -> Option<usize>;
}

/// Value of an expression: finite, or a membership oracle.
#[derive(Clone, Debug)]
pub enum TermSetView {
    Finite(BTreeSet<Term>),
    Buildable(Sym),
    Inter(Box<TermSetView>, Box<TermSetView>),
    Union(Box<TermSetView>, Box<TermSetView>),
}

impl TermSetView {
    pub fn contains(&self, t: &Term, s: &dyn StateView) -> Result<bool, LogicError> {
        Ok(match self {
            TermSetView::Finite(set) => set.contains(t),
            TermSetView::Buildable(p) => s
                .can_build(p, t)
                .ok_or_else(|| LogicError::UnknownProcess(p.clone()))?,
            TermSetView::Inter(a, b) => a.contains(t, s)? && b.contains(t, s)?,
            TermSetView::Union(a, b) => a.contains(t, s)? || b.contains(t, s)?,
        })
    }

    pub fn finite(&self) -> Option<&BTreeSet<Term>> {
        match self {
            TermSetView::Finite(s) => Some(s),
            _ => None,
        }
    }
}

/// `k⁻¹(E)` for a finite `E`.
pub fn key_inverse<'a>(k: &Term, terms: impl IntoIterator<Item = &'a Term>) -> BTreeSet<Term> {
    let mut out = BTreeSet::new();
    for e in terms {
        e.visit(&mut |t| {
            if let Some((kk, p)) = t.as_enc() {
                if kk == k {
                    out.insert(p.clone());
                }
            }
        });
    }
    out
}

pub fn eval_expr(e: &Expr, s: &dyn StateView) -> Result<TermSetView, LogicError> {
    let th = s.theta();
    Ok(match e {
        Expr::Lit(set) => TermSetView::Finite(set.iter().map(|t| apply(t, th)).collect()),
        Expr::ProcKnown(p) => TermSetView::Finite(
            s.known_values(p)
                .ok_or_else(|| LogicError::UnknownProcess(p.clone()))?
                .into_iter()
                .collect(),
        ),
        Expr::ProcTerms(p) => {
            s.agent_of(p)
                .ok_or_else(|| LogicError::UnknownProcess(p.clone()))?;
            TermSetView::Buildable(p.clone())
        }
        Expr::ChanContent(c) => {
            TermSetView::Finite(s.channel(&apply(c, th)).cloned().unwrap_or_default())
        }
        Expr::KeyInv(k, inner) => {
            let k = apply(k, th);
            match eval_expr(inner, s)? {
                TermSetView::Finite(set) => TermSetView::Finite(key_inverse(&k, &set)),
                _ => {
                    return Err(LogicError::UnsupportedEFShape(format!(
                        "{k}^-1 of an infinite set"
                    )))
                }
            }
        }
        Expr::Inter(a, b) => match (eval_expr(a, s)?, eval_expr(b, s)?) {
            (TermSetView::Finite(x), TermSetView::Finite(y)) => {
                TermSetView::Finite(x.intersection(&y).cloned().collect())
            }
            (TermSetView::Finite(x), other) | (other, TermSetView::Finite(x)) => {
                let mut keep = BTreeSet::new();
                for t in x {
                    if other.contains(&t, s)? {
                        keep.insert(t);
                    }
                }
                TermSetView::Finite(keep)
            }
            (x, y) => TermSetView::Inter(Box::new(x), Box::new(y)),
        },
        Expr::Union(a, b) => match (eval_expr(a, s)?, eval_expr(b, s)?) {
            (TermSetView::Finite(x), TermSetView::Finite(y)) => {
                TermSetView::Finite(x.union(&y).cloned().collect())
            }
            (x, y) => TermSetView::Union(Box::new(x), Box::new(y)),
        },
    })
}

/// `x ⊥_{K,E} e`: every occurrence of `x` in `e` sits inside some `k(…)`
/// with `k ∈ keys`.
pub fn secure_occurrence(x: &Term, e: &Term, keys: &BTreeSet<Term>) -> bool {
    if e == x {
        return false;
    }
    if e.size() < x.size() {
        return true;
    }
    if let Some((k, _)) = e.as_enc() {
        if keys.contains(k) {
            return true;
        }
    }
    e.args().iter().all(|a| secure_occurrence(x, a, keys))
}

/// Elements of a set that act as secret atoms: variables and fresh values.
pub fn secret_atoms(set: &BTreeSet<Term>) -> BTreeSet<Term> {
    set.iter()
        .filter(|t| t.is_var() || t.is_fresh())
        .cloned()
        .collect()
}

pub fn key_part(set: &BTreeSet<Term>) -> BTreeSet<Term> {
    set.iter().filter(|t| *t.ty() == Ty::K).cloned().collect()
}

fn agent_free(set: &BTreeSet<Term>, p: &str, s: &dyn StateView) -> Result<bool, LogicError> {
    let agent = s
        .agent_of(p)
        .ok_or_else(|| LogicError::UnknownProcess(p.into()))?;
    Ok(set.iter().all(|e| !subterm(&agent, e)))
}

pub fn holds_secure_c(set: &BTreeSet<Term>, p: &str, s: &dyn StateView) -> Result<bool, LogicError> {
    let th = s.theta();
    let es: BTreeSet<Term> = set.iter().map(|t| apply(t, th)).collect();
    if !agent_free(&es, p, s)? {
        return Ok(false);
    }
    let xs = secret_atoms(&es);
    if xs.is_empty() {
        return Ok(true);
    }
    let known = s
        .known_values(p)
        .ok_or_else(|| LogicError::UnknownProcess(p.into()))?;
    for x in &xs {
        if known.iter().any(|y| subterm(x, y)) {
            return Ok(false);
        }
        for (c, content) in s.channels() {
            if !es.contains(c) && content.iter().any(|e| subterm(x, e)) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

pub fn holds_secure_k(set: &BTreeSet<Term>, p: &str, s: &dyn StateView) -> Result<bool, LogicError> {
    let th = s.theta();
    let es: BTreeSet<Term> = set.iter().map(|t| apply(t, th)).collect();
    if !agent_free(&es, p, s)? {
        return Ok(false);
    }
    let xs = secret_atoms(&es);
    if xs.is_empty() {
        return Ok(true);
    }
    let keys = key_part(&es);
    let known = s
        .known_values(p)
        .ok_or_else(|| LogicError::UnknownProcess(p.into()))?;
    for x in &xs {
        if !known.iter().all(|y| secure_occurrence(x, y, &keys)) {
            return Ok(false);
        }
        for (_, content) in s.channels() {
            if !content.iter().all(|e| secure_occurrence(x, e, &keys)) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn set_of(v: TermSetView, what: &str) -> Result<BTreeSet<Term>, LogicError> {
    match v {
        TermSetView::Finite(s) => Ok(s),
        _ => Err(LogicError::UnsupportedEFShape(format!(
            "comparison with infinite set {what}"
        ))),
    }
}

pub fn holds_ef(ef: &EF, s: &dyn StateView) -> Result<bool, LogicError> {
    match ef {
        EF::In(t, e) => eval_expr(e, s)?.contains(&apply(t, s.theta()), s),
        EF::Eq(a, b) => Ok(set_of(eval_expr(a, s)?, "lhs")? == set_of(eval_expr(b, s)?, "rhs")?),
        EF::Sub(a, b) => {
            let x = set_of(eval_expr(a, s)?, "lhs")?;
            let y = eval_expr(b, s)?;
            for t in &x {
                if !y.contains(t, s)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        EF::Sup(a, b) => holds_ef(&EF::Sub(b.clone(), a.clone()), s),
        EF::SecureC(set, p) => holds_secure_c(set, p, s),
        EF::SecureK(set, p) => holds_secure_k(set, p, s),
        EF::At(p, i) => Ok(s.at(p).ok_or_else(|| LogicError::UnknownProcess(p.clone()))? == *i),
    }
}

pub fn holds(phi: &Formula, s: &dyn StateView) -> Result<bool, LogicError> {
    for ef in &phi.efs {
        if !holds_ef(ef, s)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Closure of the equalities stated or implied by `phi`.
pub fn closure(phi: &Formula, rigid: &BTreeSet<Sym>) -> Cc {
    let mut cc = Cc::with_rigid(rigid.clone());
    for ef in &phi.efs {
        if let Some((a, b)) = ef.as_term_eq() {
            cc.union(a, b);
        }
        for t in ef_terms(ef) {
            cc.add(&t);
        }
    }
    // [c] = {e} and e' ∈ [c'] with c = c' give e = e'.
    loop {
        let before = cc.pairs().len();
        let singletons: Vec<(Term, Term)> = phi
            .efs
            .iter()
            .filter_map(|ef| match ef {
                EF::Eq(Expr::ChanContent(c), Expr::Lit(s)) | EF::Eq(Expr::Lit(s), Expr::ChanContent(c))
                    if s.len() == 1 =>
                {
                    Some((c.clone(), s.iter().next().unwrap().clone()))
                }
                _ => None,
            })
            .collect();
        for ef in &phi.efs {
            if let EF::In(e2, Expr::ChanContent(c2)) = ef {
                for (c, e) in &singletons {
                    if cc.equiv(c, c2) {
                        cc.union(e, e2);
                    }
                }
            }
        }
        if cc.pairs().len() == before {
            break;
        }
    }
    cc
}

fn ef_terms(ef: &EF) -> Vec<Term> {
    fn expr_terms(e: &Expr, out: &mut Vec<Term>) {
        match e {
            Expr::Lit(s) => out.extend(s.iter().cloned()),
            Expr::ChanContent(c) => out.push(c.clone()),
            Expr::KeyInv(k, e) => {
                out.push(k.clone());
                expr_terms(e, out)
            }
            Expr::Inter(a, b) | Expr::Union(a, b) => {
                expr_terms(a, out);
                expr_terms(b, out)
            }
            Expr::ProcKnown(_) | Expr::ProcTerms(_) => {}
        }
    }
    let mut out = Vec::new();
    match ef {
        EF::In(t, e) => {
            out.push(t.clone());
            expr_terms(e, &mut out)
        }
        EF::Eq(a, b) | EF::Sub(a, b) | EF::Sup(a, b) => {
            expr_terms(a, &mut out);
            expr_terms(b, &mut out)
        }
        EF::SecureC(s, _) | EF::SecureK(s, _) => out.extend(s.iter().cloned()),
        EF::At(..) => {}
    }
    out
}

fn expr_eq_mod(a: &Expr, b: &Expr, cc: &Cc) -> bool {
    match (a, b) {
        (Expr::Lit(x), Expr::Lit(y)) => set_eq_mod(x, y, cc),
        (Expr::ProcKnown(p), Expr::ProcKnown(q)) | (Expr::ProcTerms(p), Expr::ProcTerms(q)) => p == q,
        (Expr::ChanContent(c), Expr::ChanContent(d)) => cc.equiv(c, d),
        (Expr::KeyInv(k, e), Expr::KeyInv(l, f)) => cc.equiv(k, l) && expr_eq_mod(e, f, cc),
        (Expr::Inter(a1, b1), Expr::Inter(a2, b2)) | (Expr::Union(a1, b1), Expr::Union(a2, b2)) => {
            expr_eq_mod(a1, a2, cc) && expr_eq_mod(b1, b2, cc)
        }
        _ => false,
    }
}

fn set_eq_mod(x: &BTreeSet<Term>, y: &BTreeSet<Term>, cc: &Cc) -> bool {
    let sub = |a: &BTreeSet<Term>, b: &BTreeSet<Term>| a.iter().all(|t| b.iter().any(|u| cc.equiv(t, u)));
    sub(x, y) && sub(y, x)
}

fn set_sub_mod(x: &BTreeSet<Term>, y: &BTreeSet<Term>, cc: &Cc) -> bool {
    x.iter().all(|t| y.iter().any(|u| cc.equiv(t, u)))
}

fn ef_eq_mod(a: &EF, b: &EF, cc: &Cc) -> bool {
    match (a, b) {
        (EF::In(t, e), EF::In(u, f)) => cc.equiv(t, u) && expr_eq_mod(e, f, cc),
        (EF::Eq(a1, b1), EF::Eq(a2, b2)) => {
            (expr_eq_mod(a1, a2, cc) && expr_eq_mod(b1, b2, cc))
                || (expr_eq_mod(a1, b2, cc) && expr_eq_mod(b1, a2, cc))
        }
        (EF::Sub(a1, b1), EF::Sub(a2, b2)) | (EF::Sup(a1, b1), EF::Sup(a2, b2)) => {
            expr_eq_mod(a1, a2, cc) && expr_eq_mod(b1, b2, cc)
        }
        (EF::Sub(a1, b1), EF::Sup(b2, a2)) | (EF::Sup(b1, a1), EF::Sub(a2, b2)) => {
            expr_eq_mod(a1, a2, cc) && expr_eq_mod(b1, b2, cc)
        }
        (EF::SecureC(x, p), EF::SecureC(y, q)) | (EF::SecureK(x, p), EF::SecureK(y, q)) => {
            p == q && set_eq_mod(x, y, cc)
        }
        (EF::At(p, i), EF::At(q, j)) => p == q && i == j,
        _ => false,
    }
}

fn in_fragment(ef: &EF) -> bool {
    let simple = |e: &Expr| matches!(e, Expr::Lit(_) | Expr::ChanContent(_))
        || matches!(e, Expr::KeyInv(_, inner) if matches!(**inner, Expr::ChanContent(_) | Expr::ProcKnown(_)));
    match ef {
        EF::At(..) | EF::SecureC(..) | EF::SecureK(..) => true,
        EF::In(_, e) => simple(e),
        EF::Eq(a, b) | EF::Sub(a, b) | EF::Sup(a, b) => {
            !a.has_intensional() && !b.has_intensional() && simple(a) && simple(b)
        }
    }
}

/// Sound, incomplete check of `phi ≤ psi`.
pub fn entails(phi: &Formula, psi: &Formula) -> Result<bool, LogicError> {
    entails_with(phi, psi, &BTreeSet::new())
}

pub fn entails_with(phi: &Formula, psi: &Formula, rigid: &BTreeSet<Sym>) -> Result<bool, LogicError> {
    for ef in &psi.efs {
        if !in_fragment(ef) {
            return Err(LogicError::UnsupportedEFShape(ef.to_string()));
        }
    }
    let cc = closure(phi, rigid);
    if cc.is_inconsistent() {
        return Ok(true);
    }
    for ef in &psi.efs {
        if !entails_ef(phi, &cc, ef) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Channel contents fixed by `phi` as `[c] = S`.
fn content_of<'a>(phi: &'a Formula, c: &Term, cc: &Cc) -> Option<&'a BTreeSet<Term>> {
    phi.efs.iter().find_map(|ef| match ef {
        EF::Eq(Expr::ChanContent(d), Expr::Lit(s)) | EF::Eq(Expr::Lit(s), Expr::ChanContent(d))
            if cc.equiv(c, d) =>
        {
            Some(s)
        }
        _ => None,
    })
}

fn entails_ef(phi: &Formula, cc: &Cc, ef: &EF) -> bool {
    if let Some((a, b)) = ef.as_term_eq() {
        return cc.equiv(a, b);
    }
    if phi.efs.iter().any(|f| ef_eq_mod(f, ef, cc)) {
        return true;
    }
    match ef {
        EF::In(t, Expr::Lit(s)) => s.iter().any(|u| cc.equiv(t, u)),
        EF::In(t, Expr::ChanContent(c)) => {
            content_of(phi, c, cc).is_some_and(|s| s.iter().any(|u| cc.equiv(t, u)))
                || phi.efs.iter().any(|f| match f {
                    EF::Sub(Expr::Lit(s), Expr::ChanContent(d)) => {
                        cc.equiv(c, d) && s.iter().any(|u| cc.equiv(t, u))
                    }
                    _ => false,
                })
        }
        EF::Eq(Expr::Lit(x), Expr::Lit(y)) => set_eq_mod(x, y, cc),
        EF::Eq(a, b) => {
            entails_ef(phi, cc, &EF::Sub(a.clone(), b.clone()))
                && entails_ef(phi, cc, &EF::Sub(b.clone(), a.clone()))
        }
        EF::Sup(a, b) => entails_ef(phi, cc, &EF::Sub(b.clone(), a.clone())),
        EF::Sub(Expr::Lit(x), Expr::Lit(y)) => set_sub_mod(x, y, cc),
        EF::Sub(Expr::Lit(x), rhs) => phi.efs.iter().any(|f| match f {
            EF::Sub(Expr::Lit(y), r) | EF::Eq(Expr::Lit(y), r) | EF::Eq(r, Expr::Lit(y)) => {
                expr_eq_mod(r, rhs, cc) && set_sub_mod(x, y, cc)
            }
            _ => false,
        }),
        EF::Sub(lhs, Expr::Lit(y)) => phi.efs.iter().any(|f| match f {
            EF::Sub(l, Expr::Lit(x)) | EF::Eq(l, Expr::Lit(x)) | EF::Eq(Expr::Lit(x), l) => {
                expr_eq_mod(l, lhs, cc) && set_sub_mod(x, y, cc)
            }
            _ => false,
        }),
        _ => false,
    }
}

/// Canonical form: every term rewritten to its class representative,
/// equalities listed as `member = representative`, and memberships in
/// singleton channels turned into equalities.
pub fn normalize(phi: &Formula) -> Formula {
    normalize_with(phi, &BTreeSet::new())
}

pub fn normalize_with(phi: &Formula, rigid: &BTreeSet<Sym>) -> Formula {
    let cc = closure(phi, rigid);
    let mut out = BTreeSet::new();
    for (m, r) in cc.pairs() {
        out.insert(EF::term_eq(m, r));
    }
    let rep = |t: &Term| cc.rep(t);
    for ef in &phi.efs {
        if ef.as_term_eq().is_some() {
            continue;
        }
        if let EF::In(_, Expr::ChanContent(c)) = ef {
            if content_of(phi, c, &cc).is_some_and(|s| s.len() == 1) {
                continue;
            }
        }
        out.insert(ef.map_terms(&rep));
    }
    Formula { efs: out }
}

/// Report view of a formula, per node or per state.
#[derive(Clone, Debug, Default, Serialize, PartialEq, Eq)]
pub struct FormulaReport {
    #[serde(rename = "secureC")]
    pub secure_c: Vec<String>,
    #[serde(rename = "secureK")]
    pub secure_k: Vec<String>,
    pub bounds: BTreeMap<String, BoundReport>,
    #[serde(rename = "keyBounds")]
    pub key_bounds: BTreeMap<String, BoundReport>,
    pub eqs: Vec<[String; 2]>,
    pub at: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, Default, Serialize, PartialEq, Eq)]
pub struct BoundReport {
    pub lo: Vec<String>,
    /// `None` is the unbounded upper limit.
    pub hi: Option<Vec<String>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::Ty;

    fn v(n: &str) -> Term {
        Term::var(n, Ty::M)
    }

    #[test]
    fn secure_occurrence_cases() {
        let k = Term::var("k", Ty::K);
        let n = Term::var("n", Ty::N);
        let keys = BTreeSet::from([k.clone()]);
        assert!(secure_occurrence(&n, &Term::enc(k.clone(), n.clone()), &keys));
        let t = Term::tuple(vec![n.clone(), Term::enc(k.clone(), n.clone())]);
        assert!(!secure_occurrence(&n, &t, &keys));
        assert!(!secure_occurrence(&k, &k, &keys));
    }

    #[test]
    fn entails_decomposition() {
        let (k, k2) = (Term::var("k", Ty::K), Term::var("k2", Ty::K));
        let phi = Formula::new([EF::term_eq(Term::enc(k.clone(), v("a")), Term::enc(k2.clone(), v("a2")))]);
        let psi = Formula::new([EF::term_eq(k, k2), EF::term_eq(v("a"), v("a2"))]);
        assert_eq!(entails(&phi, &psi), Ok(true));
        assert_eq!(entails(&Formula::default(), &Formula::new([EF::term_eq(v("x"), v("y"))])), Ok(false));
    }

    #[test]
    fn singleton_channel_membership() {
        let c = Term::var("c", Ty::C);
        let phi = Formula::new([
            EF::Eq(Expr::ChanContent(c.clone()), Expr::lit([v("e")])),
            EF::In(v("e2"), Expr::ChanContent(c.clone())),
        ]);
        let n = normalize(&phi);
        assert!(n.efs.iter().any(|ef| ef.as_term_eq().is_some()));
        assert!(!n.efs.iter().any(|ef| matches!(ef, EF::In(..))));
        assert_eq!(normalize(&n), n);
        assert_eq!(entails(&phi, &n), Ok(true));
        assert_eq!(entails(&n, &phi), Ok(true));
    }

    #[test]
    fn unsupported_shape() {
        let psi = Formula::new([EF::In(v("x"), Expr::ProcTerms("P".into()))]);
        assert!(matches!(entails(&Formula::default(), &psi), Err(LogicError::UnsupportedEFShape(_))));
    }
}
