//! Typed symbolic terms.
//!
//! A term is a variable, a constant, or a function symbol applied to
//! arguments. Terms are immutable and shared; every node caches its hash,
//! type and size so equality checks usually stop at the first word.

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use thiserror::Error;

pub type Sym = Arc<str>;

pub fn sym(s: &str) -> Sym {
    Arc::from(s)
}

/// Name of the open channel variable.
pub const OPEN: &str = "∘";
/// Reserved agent name of the adversary.
pub const DAGGER: &str = "Dagger";
/// Prefix of every constant produced by [`FreshGen`].
pub const FRESH_PREFIX: char = 'ν';

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ty {
    A,
    C,
    K,
    M,
    N,
    P,
    Tuple(usize, Box<Ty>),
}

impl Ty {
    /// `self` may stand where `other` is expected. M admits everything.
    pub fn le(&self, other: &Ty) -> bool {
        match (self, other) {
            (_, Ty::M) => true,
            (Ty::Tuple(n, a), Ty::Tuple(m, b)) => n == m && a.le(b),
            (a, b) => a == b,
        }
    }

    fn lub(&self, other: &Ty) -> Ty {
        if self == other {
            self.clone()
        } else {
            Ty::M
        }
    }
}

pub fn kind_le(a: &Ty, b: &Ty) -> bool {
    a.le(b)
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::A => write!(f, "A"),
            Ty::C => write!(f, "C"),
            Ty::K => write!(f, "K"),
            Ty::M => write!(f, "M"),
            Ty::N => write!(f, "N"),
            Ty::P => write!(f, "P"),
            Ty::Tuple(n, t) => write!(f, "{t}*{n}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FunSym {
    Encrypt,
    Decrypt,
    SharedKey(usize),
    SharedChannel(usize),
    Tuple(usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TermError {
    #[error("argument {index} of {fsym:?} has type {found}, expected {expected}")]
    TypeMismatch {
        fsym: FunSym,
        index: usize,
        expected: Ty,
        found: Ty,
    },
    #[error("{fsym:?} applied to {found} arguments")]
    Arity { fsym: FunSym, found: usize },
    #[error("binding {var} : {expected} to a term of type {found}")]
    BindingKind { var: Sym, expected: Ty, found: Ty },
    #[error("renaming is not injective: {0} has two preimages")]
    NonInjective(Sym),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Var(Sym),
    Con(Sym),
    App(FunSym, Vec<Term>),
}

#[derive(Debug)]
struct Inner {
    node: Node,
    ty: Ty,
    hash: u64,
    size: u32,
}

#[derive(Clone)]
pub struct Term(Arc<Inner>);

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.hash == other.0.hash
                && self.0.size == other.0.size
                && self.0.ty == other.0.ty
                && self.0.node == other.0.node)
    }
}
impl Eq for Term {}

impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        fn tag(n: &Node) -> u8 {
            match n {
                Node::Var(_) => 0,
                Node::Con(_) => 1,
                Node::App(..) => 2,
            }
        }
        let (a, b) = (&self.0.node, &other.0.node);
        tag(a).cmp(&tag(b)).then_with(|| match (a, b) {
            (Node::Var(x), Node::Var(y)) | (Node::Con(x), Node::Con(y)) => {
                x.cmp(y).then_with(|| self.0.ty.cmp(&other.0.ty))
            }
            (Node::App(f, xs), Node::App(g, ys)) => f.cmp(g).then_with(|| xs.cmp(ys)),
            _ => Ordering::Equal,
        })
    }
}
impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn mk(node: Node, ty: Ty) -> Term {
    let mut h = DefaultHasher::new();
    let size = match &node {
        Node::Var(s) => {
            0u8.hash(&mut h);
            s.hash(&mut h);
            ty.hash(&mut h);
            1
        }
        Node::Con(s) => {
            1u8.hash(&mut h);
            s.hash(&mut h);
            ty.hash(&mut h);
            1
        }
        Node::App(f, args) => {
            2u8.hash(&mut h);
            f.hash(&mut h);
            for a in args {
                h.write_u64(a.0.hash);
            }
            1 + args.iter().map(|a| a.0.size).sum::<u32>()
        }
    };
    Term(Arc::new(Inner {
        node,
        ty,
        hash: h.finish(),
        size,
    }))
}

impl Term {
    pub fn var(name: &str, ty: Ty) -> Term {
        mk(Node::Var(sym(name)), ty)
    }

    pub fn var_sym(name: Sym, ty: Ty) -> Term {
        mk(Node::Var(name), ty)
    }

    pub fn con(name: &str, ty: Ty) -> Term {
        mk(Node::Con(sym(name)), ty)
    }

    pub fn agent(name: &str) -> Term {
        Term::con(name, Ty::A)
    }

    pub fn dagger() -> Term {
        Term::agent(DAGGER)
    }

    pub fn open() -> Term {
        Term::var(OPEN, Ty::C)
    }

    /// Builds `f(args)`, checking the signature. `decrypt(k, encrypt(k, e))`
    /// is rewritten to `e`.
    pub fn app(f: FunSym, args: Vec<Term>) -> Result<Term, TermError> {
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(TermError::Arity {
                    fsym: f,
                    found: args.len(),
                })
            }
        };
        let expect = |i: usize, t: &Term, ty: Ty| {
            if t.ty().le(&ty) {
                Ok(())
            } else {
                Err(TermError::TypeMismatch {
                    fsym: f,
                    index: i,
                    expected: ty,
                    found: t.ty().clone(),
                })
            }
        };
        let ty = match f {
            FunSym::Encrypt | FunSym::Decrypt => {
                arity(2)?;
                expect(0, &args[0], Ty::K)?;
                if f == FunSym::Decrypt {
                    if let Node::App(FunSym::Encrypt, inner) = args[1].node() {
                        if inner[0] == args[0] {
                            return Ok(inner[1].clone());
                        }
                    }
                }
                Ty::M
            }
            FunSym::SharedKey(n) | FunSym::SharedChannel(n) => {
                if n < 2 {
                    return Err(TermError::Arity { fsym: f, found: n });
                }
                arity(n)?;
                for (i, a) in args.iter().enumerate() {
                    expect(i, a, Ty::A)?;
                }
                if matches!(f, FunSym::SharedKey(_)) {
                    Ty::K
                } else {
                    Ty::C
                }
            }
            FunSym::Tuple(n) => {
                if n < 2 {
                    return Err(TermError::Arity { fsym: f, found: n });
                }
                arity(n)?;
                let mut t = args[0].ty().clone();
                for a in &args[1..] {
                    t = t.lub(a.ty());
                }
                Ty::Tuple(n, Box::new(t))
            }
        };
        Ok(mk(Node::App(f, args), ty))
    }

    /// `k(e)`. Panics if `k` is not a key.
    pub fn enc(k: Term, e: Term) -> Term {
        Term::app(FunSym::Encrypt, vec![k, e]).expect("encrypt needs a key")
    }

    pub fn dec(k: Term, e: Term) -> Term {
        Term::app(FunSym::Decrypt, vec![k, e]).expect("decrypt needs a key")
    }

    /// `(e1, …, en)`; a single element is returned unchanged.
    pub fn tuple(mut items: Vec<Term>) -> Term {
        if items.len() == 1 {
            return items.pop().unwrap();
        }
        Term::app(FunSym::Tuple(items.len()), items).expect("tuple arity")
    }

    pub fn shared_key(agents: Vec<Term>) -> Term {
        Term::app(FunSym::SharedKey(agents.len()), agents).expect("shared key over agents")
    }

    pub fn shared_channel(agents: Vec<Term>) -> Term {
        Term::app(FunSym::SharedChannel(agents.len()), agents).expect("shared channel over agents")
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    pub fn ty(&self) -> &Ty {
        &self.0.ty
    }

    pub fn size(&self) -> usize {
        self.0.size as usize
    }

    pub fn args(&self) -> &[Term] {
        match self.node() {
            Node::App(_, a) => a,
            _ => &[],
        }
    }

    pub fn fsym(&self) -> Option<FunSym> {
        match self.node() {
            Node::App(f, _) => Some(*f),
            _ => None,
        }
    }

    pub fn var_name(&self) -> Option<&Sym> {
        match self.node() {
            Node::Var(s) => Some(s),
            _ => None,
        }
    }

    pub fn con_name(&self) -> Option<&Sym> {
        match self.node() {
            Node::Con(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self.node(), Node::Var(_))
    }

    pub fn is_atom(&self) -> bool {
        !matches!(self.node(), Node::App(..))
    }

    pub fn is_open(&self) -> bool {
        matches!(self.node(), Node::Var(s) if &**s == OPEN)
    }

    /// Constants minted by a [`FreshGen`].
    pub fn is_fresh(&self) -> bool {
        matches!(self.node(), Node::Con(s) if s.starts_with(FRESH_PREFIX))
    }

    /// The key and payload of an encryption.
    pub fn as_enc(&self) -> Option<(&Term, &Term)> {
        match self.node() {
            Node::App(FunSym::Encrypt, a) => Some((&a[0], &a[1])),
            _ => None,
        }
    }

    pub fn is_shared(&self) -> bool {
        matches!(
            self.fsym(),
            Some(FunSym::SharedKey(_)) | Some(FunSym::SharedChannel(_))
        )
    }

    /// Variables occurring in the term, by name.
    pub fn vars(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Sym>) {
        match self.node() {
            Node::Var(s) if &**s != OPEN => {
                out.insert(s.clone());
            }
            Node::Var(_) | Node::Con(_) => {}
            Node::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    /// Variable terms (name and type) occurring in the term.
    pub fn var_terms(&self) -> BTreeSet<Term> {
        let mut out = BTreeSet::new();
        self.visit(&mut |t| {
            if t.is_var() && !t.is_open() {
                out.insert(t.clone());
            }
        });
        out
    }

    pub fn is_ground(&self) -> bool {
        match self.node() {
            Node::Var(s) => &**s == OPEN,
            Node::Con(_) => true,
            Node::App(_, a) => a.iter().all(Term::is_ground),
        }
    }

    /// Pre-order walk over every subterm occurrence.
    pub fn visit(&self, f: &mut impl FnMut(&Term)) {
        f(self);
        for a in self.args() {
            a.visit(f);
        }
    }

    /// Every subterm occurrence in pre-order.
    pub fn subterms(&self) -> Vec<Term> {
        let mut v = Vec::new();
        self.visit(&mut |t| v.push(t.clone()));
        v
    }

    /// Occurrences paired with their argument-index paths.
    pub fn occurrences(&self) -> Vec<(Vec<usize>, Term)> {
        fn go(t: &Term, path: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, Term)>) {
            out.push((path.clone(), t.clone()));
            for (i, a) in t.args().iter().enumerate() {
                path.push(i);
                go(a, path, out);
                path.pop();
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn contains(&self, needle: &Term) -> bool {
        subterm(needle, self)
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, items: &[Term]) -> fmt::Result {
    for (i, t) in items.iter().enumerate() {
        if i > 0 {
            write!(f, ",")?;
        }
        write!(f, "{t}")?;
    }
    Ok(())
}

fn write_payload(f: &mut fmt::Formatter<'_>, p: &Term) -> fmt::Result {
    match p.node() {
        Node::App(FunSym::Tuple(_), items) => write_list(f, items),
        _ => write!(f, "{p}"),
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Var(s) => write!(f, "{s}"),
            Node::Con(s) => write!(f, "#{s}"),
            Node::App(FunSym::Encrypt, a) => {
                if matches!(a[0].fsym(), Some(FunSym::SharedKey(_))) {
                    write!(f, "{}(", a[0])?;
                } else {
                    write!(f, "enc({},", a[0])?;
                }
                write_payload(f, &a[1])?;
                write!(f, ")")
            }
            Node::App(FunSym::Decrypt, a) => write!(f, "dec({},{})", a[0], a[1]),
            Node::App(FunSym::SharedKey(_), a) => {
                write!(f, "k[")?;
                write_list(f, a)?;
                write!(f, "]")
            }
            Node::App(FunSym::SharedChannel(_), a) => {
                write!(f, "c[")?;
                write_list(f, a)?;
                write!(f, "]")
            }
            Node::App(FunSym::Tuple(_), a) => {
                write!(f, "(")?;
                write_list(f, a)?;
                write!(f, ")")
            }
        }
    }
}

impl serde::Serialize for Term {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// `e ⊆ e2`.
pub fn subterm(e: &Term, e2: &Term) -> bool {
    if e.size() > e2.size() {
        return false;
    }
    e == e2 || e2.args().iter().any(|a| subterm(e, a))
}

/// Key variables `k` with `k(…)` somewhere in `e`.
pub fn keys_of(e: &Term) -> BTreeSet<Term> {
    let mut out = BTreeSet::new();
    e.visit(&mut |t| {
        if let Some((k, _)) = t.as_enc() {
            if k.is_var() && *k.ty() == Ty::K {
                out.insert(k.clone());
            }
        }
    });
    out
}

/// A finite substitution; identity outside its domain.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Binding {
    map: BTreeMap<Sym, Term>,
}

impl fmt::Debug for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (k, v)) in self.map.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}↦{v}")?;
        }
        write!(f, "}}")
    }
}

impl Binding {
    pub fn id() -> Binding {
        Binding::default()
    }

    /// Binds `var` (a variable term) to `value`, checking kinds.
    pub fn bind(&mut self, var: &Term, value: Term) -> Result<(), TermError> {
        let name = var.var_name().expect("bind expects a variable").clone();
        if !value.ty().le(var.ty()) {
            return Err(TermError::BindingKind {
                var: name,
                expected: var.ty().clone(),
                found: value.ty().clone(),
            });
        }
        if value == *var {
            self.map.remove(&name);
        } else {
            self.map.insert(name, value);
        }
        Ok(())
    }

    /// Inserts without a kind check; used where kinds are already known to agree.
    pub fn insert_unchecked(&mut self, name: Sym, value: Term) {
        self.map.insert(name, value);
    }

    pub fn get(&self, name: &str) -> Option<&Term> {
        self.map.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }

    pub fn remove(&mut self, name: &str) -> Option<Term> {
        self.map.remove(name)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Sym, &Term)> {
        self.map.iter()
    }

    pub fn domain(&self) -> impl Iterator<Item = &Sym> {
        self.map.keys()
    }

    /// Restriction to the given variables.
    pub fn restrict(&self, keep: &BTreeSet<Sym>) -> Binding {
        Binding {
            map: self
                .map
                .iter()
                .filter(|(k, _)| keep.contains(*k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }
}

/// `e^θ`.
pub fn apply(e: &Term, theta: &Binding) -> Term {
    if theta.is_empty() {
        return e.clone();
    }
    match e.node() {
        Node::Var(s) => theta.map.get(s).cloned().unwrap_or_else(|| e.clone()),
        Node::Con(_) => e.clone(),
        Node::App(f, args) => {
            let new: Vec<Term> = args.iter().map(|a| apply(a, theta)).collect();
            if new.iter().zip(args).all(|(a, b)| Arc::ptr_eq(&a.0, &b.0)) {
                e.clone()
            } else {
                Term::app(*f, new).expect("substitution preserves kinds")
            }
        }
    }
}

/// `θθ'` : x ↦ (x^θ)^θ'.
pub fn compose(t1: &Binding, t2: &Binding) -> Binding {
    let mut map = BTreeMap::new();
    for (k, v) in &t1.map {
        let v2 = apply(v, t2);
        let is_self = matches!(v2.node(), Node::Var(s) if s == k);
        if !is_self {
            map.insert(k.clone(), v2);
        }
    }
    for (k, v) in &t2.map {
        if !t1.map.contains_key(k) {
            map.insert(k.clone(), v.clone());
        }
    }
    Binding { map }
}

/// Matches `pattern` against `target`. Variables for which `bindable`
/// returns false are rigid and must appear literally in `target`.
pub fn match_with(
    pattern: &Term,
    target: &Term,
    bindable: &dyn Fn(&Sym) -> bool,
    acc: &mut Binding,
) -> bool {
    match pattern.node() {
        Node::Var(s) if bindable(s) && &**s != OPEN => match acc.map.get(s) {
            Some(v) => v == target,
            None => {
                if target.ty().le(pattern.ty()) {
                    acc.map.insert(s.clone(), target.clone());
                    true
                } else {
                    false
                }
            }
        },
        Node::Var(_) | Node::Con(_) => pattern == target,
        Node::App(f, pargs) => match target.node() {
            Node::App(g, targs) if f == g && pargs.len() == targs.len() => pargs
                .iter()
                .zip(targs)
                .all(|(p, t)| match_with(p, t, bindable, acc)),
            _ => false,
        },
    }
}

/// θ ∈ Θ(Var(pattern) ∖ bound) with pattern^θ = target, if one exists.
pub fn match_template(pattern: &Term, target: &Term, bound: &BTreeSet<Sym>) -> Option<Binding> {
    let mut acc = Binding::id();
    if match_with(pattern, target, &|s| !bound.contains(s), &mut acc) {
        acc.map.retain(|k, v| !matches!(v.node(), Node::Var(s) if s == k));
        Some(acc)
    } else {
        None
    }
}

/// An injective renaming of variables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Renaming {
    map: BTreeMap<Sym, Sym>,
}

impl Renaming {
    pub fn new(pairs: impl IntoIterator<Item = (Sym, Sym)>) -> Result<Renaming, TermError> {
        let map: BTreeMap<Sym, Sym> = pairs.into_iter().collect();
        let mut seen = BTreeSet::new();
        for v in map.values() {
            if !seen.insert(v.clone()) {
                return Err(TermError::NonInjective(v.clone()));
            }
        }
        Ok(Renaming { map })
    }

    pub fn get(&self, s: &str) -> Option<&Sym> {
        self.map.get(s)
    }

    pub fn rename_sym(&self, s: &Sym) -> Sym {
        self.map.get(s).cloned().unwrap_or_else(|| s.clone())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Sym, &Sym)> {
        self.map.iter()
    }
}

/// `e^η`.
pub fn rename(e: &Term, eta: &Renaming) -> Term {
    match e.node() {
        Node::Var(s) => match eta.map.get(s) {
            Some(n) => Term::var_sym(n.clone(), e.ty().clone()),
            None => e.clone(),
        },
        Node::Con(_) => e.clone(),
        Node::App(f, args) => {
            Term::app(*f, args.iter().map(|a| rename(a, eta)).collect()).expect("renaming keeps kinds")
        }
    }
}

/// Source of unique constants `ν<hint>#<n>`.
#[derive(Clone, Debug)]
pub struct FreshGen {
    pool: &'static str,
    next: u64,
}

impl FreshGen {
    /// Generator for values created by honest processes.
    pub fn honest(seed: u64) -> FreshGen {
        FreshGen { pool: "", next: seed }
    }

    /// Generator for adversary values; names never meet the honest pool.
    pub fn adversary(seed: u64) -> FreshGen {
        FreshGen {
            pool: "†",
            next: seed,
        }
    }

    pub fn fresh(&mut self, ty: Ty, hint: &str) -> Term {
        let hint = hint.trim_start_matches('†');
        let name = format!("{FRESH_PREFIX}{}{hint}#{}", self.pool, self.next);
        self.next += 1;
        Term::con(&name, ty)
    }

    pub fn counter(&self) -> u64 {
        self.next
    }
}

/// Name of the `i`-th adversary constant of a run.
pub fn adversary_constant(ty: Ty, i: usize) -> Term {
    let tag = match ty {
        Ty::N => "n",
        Ty::K => "k",
        _ => "m",
    };
    Term::con(&format!("{FRESH_PREFIX}†{tag}#{i}"), ty)
}

pub fn is_adversary_constant(t: &Term) -> bool {
    matches!(t.node(), Node::Con(s) if s.starts_with("ν†"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(n: &str) -> Term {
        Term::agent(n)
    }

    #[test]
    fn subterm_basics() {
        let x = Term::var("x", Ty::M);
        assert!(subterm(&x, &x));
        let na = Term::var("n_A", Ty::N);
        let kbj = Term::shared_key(vec![a("B"), a("J")]);
        let m2 = Term::enc(kbj, Term::tuple(vec![a("A"), na.clone(), Term::var("n_B", Ty::N)]));
        assert!(subterm(&na, &m2));
        let k = Term::var("k", Ty::K);
        let e = Term::con("e", Ty::M);
        let ke = Term::enc(k.clone(), e.clone());
        assert!(subterm(&k, &ke));
        assert!(!subterm(&ke, &e));
    }

    #[test]
    fn keys_only_counts_key_variables() {
        assert!(keys_of(&Term::tuple(vec![a("A"), Term::var("n", Ty::N)])).is_empty());
        let ki = Term::var("ki_B", Ty::K);
        let got = keys_of(&Term::enc(ki.clone(), Term::var("xi_B", Ty::M)));
        assert_eq!(got, BTreeSet::from([ki]));
        let sk = Term::shared_key(vec![a("B"), a("J")]);
        assert!(keys_of(&Term::enc(sk, Term::var("n", Ty::N))).is_empty());
    }

    #[test]
    fn decrypt_of_encrypt_normalizes() {
        let k = Term::var("k", Ty::K);
        let e = Term::var("e", Ty::M);
        assert_eq!(Term::dec(k.clone(), Term::enc(k.clone(), e.clone())), e);
        let k2 = Term::var("k2", Ty::K);
        assert!(Term::dec(k2, Term::enc(k, e)).fsym() == Some(FunSym::Decrypt));
    }

    #[test]
    fn tuples_do_not_flatten() {
        let (x, y, z) = (
            Term::var("a", Ty::M),
            Term::var("b", Ty::M),
            Term::var("c", Ty::M),
        );
        let nested = Term::tuple(vec![x.clone(), Term::tuple(vec![y.clone(), z.clone()])]);
        let flat = Term::tuple(vec![x, y, z]);
        assert_ne!(nested, flat);
    }

    #[test]
    fn ill_kinded_application_is_rejected() {
        let n = Term::var("n", Ty::N);
        assert!(matches!(
            Term::app(FunSym::Encrypt, vec![n.clone(), n.clone()]),
            Err(TermError::TypeMismatch { .. })
        ));
        assert!(Term::app(FunSym::SharedKey(2), vec![n.clone(), a("B")]).is_err());
        assert!(Term::app(FunSym::Tuple(1), vec![n]).is_err());
    }

    #[test]
    fn apply_substitutes_homomorphically() {
        let kaj = Term::shared_key(vec![a("A"), a("J")]);
        let ar = Term::var("a_r", Ty::A);
        let nj = Term::var("n_j", Ty::N);
        let e = Term::enc(kaj.clone(), Term::tuple(vec![ar.clone(), nj.clone()]));
        let mut th = Binding::id();
        th.bind(&ar, a("B")).unwrap();
        assert_eq!(apply(&e, &th), Term::enc(kaj, Term::tuple(vec![a("B"), nj])));
        assert_eq!(apply(&e, &Binding::id()), e);
    }

    #[test]
    fn binding_rejects_wrong_kind() {
        let n = Term::var("n", Ty::N);
        let mut th = Binding::id();
        assert!(th.bind(&n, Term::var("k", Ty::K)).is_err());
        assert!(th.bind(&Term::var("m", Ty::M), Term::var("k", Ty::K)).is_ok());
    }

    #[test]
    fn match_with_rigid_variable() {
        let kbj = Term::shared_key(vec![a("B"), a("J")]);
        let ai = Term::var("ai", Ty::A);
        let nr = Term::var("nr_B", Ty::N);
        let ki = Term::var("ki", Ty::K);
        let pat = Term::enc(kbj.clone(), Term::tuple(vec![ai.clone(), nr.clone(), ki.clone()]));
        let k0 = Term::con("k0", Ty::K);
        let target = Term::enc(kbj.clone(), Term::tuple(vec![a("A"), nr.clone(), k0.clone()]));
        let bound = BTreeSet::from([sym("nr_B")]);
        let th = match_template(&pat, &target, &bound).unwrap();
        assert_eq!(th.get("ai"), Some(&a("A")));
        assert_eq!(th.get("ki"), Some(&k0));
        assert_eq!(th.len(), 2);
        let other = Term::enc(kbj, Term::tuple(vec![a("A"), Term::var("n2", Ty::N), k0]));
        assert!(match_template(&pat, &other, &bound).is_none());
    }

    #[test]
    fn repeated_variable_must_match_consistently() {
        let x = Term::var("x", Ty::M);
        let pat = Term::tuple(vec![x.clone(), x.clone()]);
        let t1 = Term::tuple(vec![a("A"), a("A")]);
        let t2 = Term::tuple(vec![a("A"), a("B")]);
        assert!(match_template(&pat, &t1, &BTreeSet::new()).is_some());
        assert!(match_template(&pat, &t2, &BTreeSet::new()).is_none());
    }

    #[test]
    fn renaming_must_be_injective() {
        let r = Renaming::new([(sym("x"), sym("z")), (sym("y"), sym("z"))]);
        assert!(matches!(r, Err(TermError::NonInjective(_))));
        let r = Renaming::new([(sym("x"), sym("y"))]).unwrap();
        assert_eq!(rename(&Term::var("x", Ty::M), &r), Term::var("y", Ty::M));
    }

    #[test]
    fn fresh_values_are_distinct_and_replayable() {
        let mut g = FreshGen::honest(0);
        let a1 = g.fresh(Ty::N, "n_A");
        let a2 = g.fresh(Ty::N, "n_A");
        assert_ne!(a1, a2);
        let mut h = FreshGen::honest(0);
        assert_eq!(h.fresh(Ty::N, "n_A"), a1);
        let mut adv = FreshGen::adversary(0);
        let d = adv.fresh(Ty::N, "n_A");
        assert_ne!(d, a1);
        assert!(is_adversary_constant(&d));
        assert!(!is_adversary_constant(&a1));
    }

    #[test]
    fn canonical_text() {
        let kaj = Term::shared_key(vec![a("A"), a("J")]);
        let n = Term::var("n", Ty::N);
        assert_eq!(
            Term::enc(kaj.clone(), Term::tuple(vec![a("A"), n.clone()])).to_string(),
            "k[#A,#J](#A,n)"
        );
        let k = Term::var("kbar", Ty::K);
        assert_eq!(Term::enc(k, n.clone()).to_string(), "enc(kbar,n)");
        assert_eq!(Term::shared_channel(vec![a("A"), a("B")]).to_string(), "c[#A,#B]");
    }
}
