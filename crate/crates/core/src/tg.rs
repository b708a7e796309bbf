//! Transition graphs of finite distributed processes, symbolic node facts
//! and graph reduction.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::cc::Cc;
use crate::intruder::{IntruderConfig, Knowledge};
use crate::logic::{holds, BoundReport, Expr, Formula, FormulaReport, EF};
use crate::process::{initial_state, Action, Dp, SeqProc, StateCtx, ADVERSARY};
use crate::term::{FreshGen, Sym, Term, Ty};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TgError {
    #[error("process {0} has a cycle")]
    CyclicSP(Sym),
    #[error("initial fact does not hold in the initial state")]
    BadSeed,
    #[error(transparent)]
    Process(#[from] crate::process::ProcessError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Tri {
    Yes,
    No,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Cause {
    /// The channel or key content is provably empty.
    EmptyContent,
    /// The source node is unreachable.
    UnreachableSource,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TgNode {
    pub at: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct TgEdge {
    pub from: usize,
    pub to: usize,
    pub actor: usize,
    pub edge: usize,
    pub action: Action,
    pub realizable: Tri,
    pub cause: Option<Cause>,
}

#[derive(Clone, Debug)]
pub struct Tg {
    pub names: Vec<Sym>,
    pub nodes: Vec<TgNode>,
    pub edges: Vec<TgEdge>,
    pub init: usize,
    pub reachable: Vec<Tri>,
}

impl Tg {
    pub fn label(&self, n: usize) -> String {
        self.names
            .iter()
            .zip(&self.nodes[n].at)
            .map(|(p, i)| format!("{p}{i}"))
            .collect()
    }

    pub fn node_by_label(&self, label: &str) -> Option<usize> {
        (0..self.nodes.len()).find(|&n| self.label(n) == label)
    }

    pub fn incoming(&self, n: usize) -> impl Iterator<Item = (usize, &TgEdge)> {
        self.edges.iter().enumerate().filter(move |(_, e)| e.to == n)
    }

    pub fn outgoing(&self, n: usize) -> impl Iterator<Item = (usize, &TgEdge)> {
        self.edges.iter().enumerate().filter(move |(_, e)| e.from == n)
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.nodes.len()).map(|n| self.label(n)).collect()
    }

    /// Edges removed by a theorem rather than by an unreachable source.
    pub fn marked_edges(&self) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&i| self.edges[i].cause == Some(Cause::EmptyContent))
            .collect()
    }

    /// The graph without unreachable nodes and unrealizable edges.
    pub fn reduced(&self) -> Tg {
        let keep: Vec<usize> = (0..self.nodes.len())
            .filter(|&n| self.reachable[n] != Tri::No)
            .collect();
        let remap: BTreeMap<usize, usize> = keep.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        Tg {
            names: self.names.clone(),
            nodes: keep.iter().map(|&n| self.nodes[n].clone()).collect(),
            edges: self
                .edges
                .iter()
                .filter(|e| e.realizable != Tri::No && remap.contains_key(&e.from) && remap.contains_key(&e.to))
                .map(|e| TgEdge {
                    from: remap[&e.from],
                    to: remap[&e.to],
                    ..e.clone()
                })
                .collect(),
            init: remap[&self.init],
            reachable: keep.iter().map(|&n| self.reachable[n]).collect(),
        }
    }
}

/// The full product graph.
pub fn build_tg(procs: &[SeqProc]) -> Result<Tg, TgError> {
    for p in procs {
        if !p.is_acyclic() {
            return Err(TgError::CyclicSP(p.name.clone()));
        }
    }
    let sizes: Vec<usize> = procs.iter().map(|p| p.nodes).collect();
    let total: usize = sizes.iter().product();
    let mut nodes = Vec::with_capacity(total);
    let mut at = vec![0usize; procs.len()];
    for _ in 0..total {
        nodes.push(TgNode { at: at.clone() });
        for i in (0..at.len()).rev() {
            at[i] += 1;
            if at[i] < sizes[i] {
                break;
            }
            at[i] = 0;
        }
    }
    let index = |v: &[usize]| v.iter().zip(&sizes).fold(0, |acc, (x, s)| acc * s + x);
    let mut edges = Vec::new();
    for (n, node) in nodes.iter().enumerate() {
        for (pi, p) in procs.iter().enumerate() {
            for (ei, e) in p.out_edges(node.at[pi]) {
                let mut to = node.at.clone();
                to[pi] = e.to;
                edges.push(TgEdge {
                    from: n,
                    to: index(&to),
                    actor: pi,
                    edge: ei,
                    action: e.action.clone(),
                    realizable: Tri::Unknown,
                    cause: None,
                });
            }
        }
    }
    let init_at: Vec<usize> = procs.iter().map(|p| p.init).collect();
    let init = index(&init_at);
    let mut reachable = vec![Tri::Unknown; total];
    reachable[init] = Tri::Yes;
    Ok(Tg {
        names: procs.iter().map(|p| p.name.clone()).collect(),
        nodes,
        edges,
        init,
        reachable,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Bound {
    pub lo: BTreeSet<Term>,
    /// `None` is unbounded.
    pub hi: Option<BTreeSet<Term>>,
}

impl Bound {
    pub fn empty() -> Bound {
        Bound {
            lo: BTreeSet::new(),
            hi: Some(BTreeSet::new()),
        }
    }

    fn add(&mut self, t: Term) {
        self.lo.insert(t.clone());
        if let Some(h) = &mut self.hi {
            h.insert(t);
        }
    }

    /// The single value the content can hold, if any.
    pub fn singleton(&self, cc: &Cc) -> Option<Term> {
        let h = self.hi.as_ref()?;
        let first = h.iter().next()?;
        h.iter().all(|t| cc.equiv(t, first)).then(|| first.clone())
    }

    pub fn is_empty_hi(&self) -> bool {
        self.hi.as_ref().is_some_and(|h| h.is_empty())
    }

    fn report(&self) -> BoundReport {
        BoundReport {
            lo: self.lo.iter().map(|t| t.to_string()).collect(),
            hi: self.hi.as_ref().map(|h| h.iter().map(|t| t.to_string()).collect()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct NodeFact {
    pub secure_c: BTreeSet<Term>,
    pub secure_k: BTreeSet<Term>,
    pub chan_bounds: BTreeMap<Term, Bound>,
    pub key_bounds: BTreeMap<Term, Bound>,
    pub eqs: Cc,
    pub at: Vec<(Sym, usize)>,
}

fn member_mod(set: &BTreeSet<Term>, t: &Term, cc: &Cc) -> bool {
    set.iter().any(|u| cc.equiv(u, t))
}

fn inter_mod(a: &BTreeSet<Term>, b: &BTreeSet<Term>, cc: &Cc) -> BTreeSet<Term> {
    a.iter().filter(|t| member_mod(b, t, cc)).cloned().collect()
}

fn union_mod(a: &BTreeSet<Term>, b: &BTreeSet<Term>, cc: &Cc) -> BTreeSet<Term> {
    let mut out = a.clone();
    for t in b {
        if !member_mod(&out, t, cc) {
            out.insert(t.clone());
        }
    }
    out
}

impl NodeFact {
    /// The equalities as a formula.
    pub fn eq_formula(&self) -> Formula {
        Formula::new(self.eqs.pairs().into_iter().map(|(a, b)| EF::term_eq(a, b)))
    }

    /// Whether `a = b` follows from the node's equalities.
    pub fn entails_eq(&self, a: &Term, b: &Term) -> bool {
        self.eqs.equiv(a, b)
    }

    pub fn to_formula(&self) -> Formula {
        let adv: Sym = ADVERSARY.into();
        let open = Term::open();
        let mut f = self.eq_formula();
        if !self.secure_c.is_empty() {
            f.insert(EF::SecureC(self.secure_c.clone(), adv.clone()));
        }
        if !self.secure_k.is_empty() {
            f.insert(EF::SecureK(self.secure_k.clone(), adv.clone()));
            for k in &self.secure_k {
                f.insert(EF::Sub(
                    Expr::key_inv(k.clone(), Expr::ProcKnown(adv.clone())),
                    Expr::key_inv(k.clone(), Expr::ChanContent(open.clone())),
                ));
            }
        }
        for (c, b) in &self.chan_bounds {
            f.insert(EF::Sub(Expr::Lit(b.lo.clone()), Expr::ChanContent(c.clone())));
            if let Some(h) = &b.hi {
                f.insert(EF::Sub(Expr::ChanContent(c.clone()), Expr::Lit(h.clone())));
            }
        }
        for (k, b) in &self.key_bounds {
            let inv = Expr::key_inv(k.clone(), Expr::ChanContent(open.clone()));
            f.insert(EF::Sub(Expr::Lit(b.lo.clone()), inv.clone()));
            if let Some(h) = &b.hi {
                f.insert(EF::Sub(inv, Expr::Lit(h.clone())));
            }
        }
        for (p, i) in &self.at {
            f.insert(EF::At(p.clone(), *i));
        }
        f
    }

    pub fn report(&self) -> FormulaReport {
        FormulaReport {
            secure_c: self.secure_c.iter().map(|t| t.to_string()).collect(),
            secure_k: self.secure_k.iter().map(|t| t.to_string()).collect(),
            bounds: self.chan_bounds.iter().map(|(c, b)| (c.to_string(), b.report())).collect(),
            key_bounds: self.key_bounds.iter().map(|(k, b)| (k.to_string(), b.report())).collect(),
            eqs: self
                .eqs
                .pairs()
                .into_iter()
                .map(|(a, b)| [a.to_string(), b.to_string()])
                .collect(),
            at: self.at.iter().map(|(p, i)| (p.to_string(), *i)).collect(),
        }
    }

    /// Least upper bound of the facts of two incoming branches.
    pub fn join(&self, other: &NodeFact) -> NodeFact {
        let eqs = self.eqs.meet(&other.eqs);
        let bounds = |a: &BTreeMap<Term, Bound>, b: &BTreeMap<Term, Bound>| {
            a.iter()
                .filter_map(|(c, x)| {
                    let y = b.get(c)?;
                    Some((
                        c.clone(),
                        Bound {
                            lo: inter_mod(&x.lo, &y.lo, &eqs),
                            hi: match (&x.hi, &y.hi) {
                                (Some(p), Some(q)) => Some(union_mod(p, q, &eqs)),
                                _ => None,
                            },
                        },
                    ))
                })
                .collect()
        };
        NodeFact {
            secure_c: self.secure_c.intersection(&other.secure_c).cloned().collect(),
            secure_k: self.secure_k.intersection(&other.secure_k).cloned().collect(),
            chan_bounds: bounds(&self.chan_bounds, &other.chan_bounds),
            key_bounds: bounds(&self.key_bounds, &other.key_bounds),
            eqs,
            at: self.at.clone(),
        }
    }
}

/// A secrecy side condition that could not be established for a send.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub kind: &'static str,
    pub from: String,
    pub to: String,
    pub actor: String,
    pub action: String,
    pub detail: String,
}

/// Static information shared by all facts of one process family.
pub struct FactCtx<'a> {
    pub dp: &'a Dp,
    pub rigid: BTreeSet<Sym>,
    pub key_mode: bool,
}

impl<'a> FactCtx<'a> {
    pub fn new(dp: &'a Dp) -> FactCtx<'a> {
        FactCtx {
            dp,
            rigid: dp.init_vars(),
            key_mode: dp.open_only(),
        }
    }

    fn hidden_of(&self, ty: Ty) -> BTreeSet<Term> {
        self.dp
            .procs
            .iter()
            .flat_map(|p| p.hidden.iter().map(move |h| (h, &p.var_types[h])))
            .filter(|(_, t)| **t == ty)
            .map(|(h, t)| Term::var(h, t.clone()))
            .collect()
    }

    /// Secure sets and empty bounds at the initial node, checked against the
    /// initial state.
    pub fn seed(&self) -> Result<NodeFact, TgError> {
        let mut secure_c: BTreeSet<Term> = self.dp.shared_channels.iter().cloned().collect();
        secure_c.extend(self.hidden_of(Ty::C));
        let mut secure_k = BTreeSet::new();
        if self.key_mode {
            secure_k.extend(self.dp.shared_keys.iter().cloned());
            secure_k.extend(self.hidden_of(Ty::K));
        }
        let fact = NodeFact {
            chan_bounds: secure_c.iter().map(|c| (c.clone(), Bound::empty())).collect(),
            key_bounds: secure_k
                .iter()
                .filter(|k| *k.ty() == Ty::K)
                .map(|k| (k.clone(), Bound::empty()))
                .collect(),
            secure_c,
            secure_k,
            eqs: Cc::with_rigid(self.rigid.clone()),
            at: self.dp.procs.iter().map(|p| (p.name.clone(), p.init)).collect(),
        };
        if !self.seed_holds(&fact)? {
            return Err(TgError::BadSeed);
        }
        Ok(fact)
    }

    pub fn seed_holds(&self, fact: &NodeFact) -> Result<bool, TgError> {
        let s0 = initial_state(self.dp, &mut FreshGen::honest(0))?;
        let adv = Knowledge::of_state(&IntruderConfig::default(), &s0);
        let ctx = StateCtx {
            dp: self.dp,
            s: &s0,
            adv: &adv,
        };
        Ok(holds(&fact.to_formula(), &ctx).unwrap_or(false))
    }

    fn secret_vars(set: &BTreeSet<Term>) -> Vec<&Term> {
        set.iter().filter(|t| t.is_var()).collect()
    }

    /// Symbolic `x ⊥_{K,E} e`; anything not provably distinct from `x` counts
    /// as an occurrence.
    fn sym_secure(&self, x: &Term, e: &Term, keys: &BTreeSet<Term>, cc: &Cc) -> bool {
        if let Some((k, _)) = e.as_enc() {
            if keys.iter().any(|kk| cc.equiv(kk, k)) {
                return true;
            }
        }
        if !cc.distinct(e, x) {
            return false;
        }
        e.args().iter().all(|a| self.sym_secure(x, a, keys, cc))
    }

    fn send_leak(&self, fact: &NodeFact, chan: &Term, msg: &Term) -> Option<String> {
        let cc = &fact.eqs;
        if !member_mod(&fact.secure_c, chan, cc) {
            for x in Self::secret_vars(&fact.secure_c) {
                for v in msg.var_terms() {
                    if !cc.distinct(&v, x) {
                        return Some(format!("{v} may carry secret {x} on {chan}"));
                    }
                }
            }
        }
        if self.key_mode {
            let keys: BTreeSet<Term> = fact.secure_k.iter().filter(|t| *t.ty() == Ty::K).cloned().collect();
            for x in Self::secret_vars(&fact.secure_k) {
                if !self.sym_secure(x, msg, &keys, cc) {
                    return Some(format!("{x} is not protected in {msg}"));
                }
            }
        }
        None
    }

    /// Fact after taking `edge` from a node with fact `fact`.
    pub fn step(&self, fact: &NodeFact, edge: &TgEdge, tg: &Tg) -> (NodeFact, Option<Finding>) {
        let mut f = fact.clone();
        f.at[edge.actor].1 = tg.nodes[edge.to].at[edge.actor];
        let mut finding = None;
        match &edge.action {
            Action::Send { chan, msg } => {
                if let Some(detail) = self.send_leak(fact, chan, msg) {
                    finding = Some(Finding {
                        kind: "SecrecyLeak",
                        from: tg.label(edge.from),
                        to: tg.label(edge.to),
                        actor: tg.names[edge.actor].to_string(),
                        action: edge.action.to_string(),
                        detail,
                    });
                    f.secure_c.clear();
                    f.secure_k.clear();
                    for b in f.chan_bounds.values_mut().chain(f.key_bounds.values_mut()) {
                        b.hi = None;
                    }
                }
                let cc = &fact.eqs;
                for (c, b) in f.chan_bounds.iter_mut() {
                    if cc.equiv(c, chan) {
                        b.add(msg.clone());
                    } else if !cc.distinct(c, chan) {
                        b.hi = None;
                    }
                }
                if self.key_mode && chan.is_open() {
                    let encs: Vec<(Term, Term)> = msg
                        .subterms()
                        .into_iter()
                        .filter_map(|t| t.as_enc().map(|(k, p)| (k.clone(), p.clone())))
                        .collect();
                    for (k, b) in f.key_bounds.iter_mut() {
                        for (kk, p) in &encs {
                            if cc.equiv(k, kk) {
                                b.add(p.clone());
                            } else if !cc.distinct(k, kk) {
                                b.hi = None;
                            }
                        }
                    }
                }
            }
            Action::Recv { chan, pat } => {
                let mut new_eqs = Vec::new();
                for (c, b) in &fact.chan_bounds {
                    if fact.eqs.equiv(c, chan) {
                        if let Some(t) = b.singleton(&fact.eqs) {
                            new_eqs.push((pat.clone(), t));
                        }
                    }
                }
                if self.key_mode && chan.is_open() {
                    for t in pat.subterms() {
                        let Some((kk, p)) = t.as_enc() else { continue };
                        for (k, b) in &fact.key_bounds {
                            if fact.eqs.equiv(k, kk) {
                                if let Some(v) = b.singleton(&fact.eqs) {
                                    new_eqs.push((p.clone(), v));
                                }
                            }
                        }
                    }
                }
                for (a, b) in new_eqs {
                    f.eqs.union(&a, &b);
                }
            }
            Action::Assign { lhs, rhs } => f.eqs.union(lhs, rhs),
        }
        (f, finding)
    }

    /// Whether a theorem shows the edge can never fire from a state
    /// satisfying `fact`.
    pub fn unrealizable(&self, fact: &NodeFact, edge: &TgEdge) -> bool {
        let Action::Recv { chan, pat } = &edge.action else { return false };
        let cc = &fact.eqs;
        if fact
            .chan_bounds
            .iter()
            .any(|(c, b)| b.is_empty_hi() && cc.equiv(c, chan))
        {
            return true;
        }
        if self.key_mode && chan.is_open() {
            for t in pat.subterms() {
                let Some((kk, _)) = t.as_enc() else { continue };
                if fact
                    .key_bounds
                    .iter()
                    .any(|(k, b)| b.is_empty_hi() && cc.equiv(k, kk))
                {
                    return true;
                }
            }
        }
        false
    }
}

/// Result of reducing a transition graph.
#[derive(Clone, Debug)]
pub struct Analysis {
    /// Full graph with realizability marks.
    pub full: Tg,
    pub reduced: Tg,
    /// Facts of the reduced graph's nodes.
    pub facts: Vec<NodeFact>,
    /// Labels of nodes found unreachable in each round.
    pub rounds: Vec<Vec<String>>,
    pub findings: Vec<Finding>,
}

impl Analysis {
    pub fn fact(&self, label: &str) -> Option<&NodeFact> {
        self.reduced.node_by_label(label).map(|n| &self.facts[n])
    }
}

fn topo(tg: &Tg) -> Vec<usize> {
    let mut indeg = vec![0usize; tg.nodes.len()];
    for e in &tg.edges {
        indeg[e.to] += 1;
    }
    let mut ready: BTreeSet<usize> = (0..tg.nodes.len()).filter(|&n| indeg[n] == 0).collect();
    let mut out = Vec::new();
    while let Some(n) = ready.pop_first() {
        out.push(n);
        for (_, e) in tg.outgoing(n) {
            indeg[e.to] -= 1;
            if indeg[e.to] == 0 {
                ready.insert(e.to);
            }
        }
    }
    out
}

/// Facts for every node of `tg` reachable from its initial node, joining
/// over the edges not marked unrealizable.
pub fn propagate(ctx: &FactCtx, tg: &Tg) -> Result<(Vec<Option<NodeFact>>, Vec<Finding>), TgError> {
    let mut facts: Vec<Option<NodeFact>> = vec![None; tg.nodes.len()];
    let mut findings = Vec::new();
    for n in topo(tg) {
        if n == tg.init {
            facts[n] = Some(ctx.seed()?);
            continue;
        }
        let mut acc: Option<NodeFact> = None;
        for (_, e) in tg.incoming(n) {
            if e.realizable == Tri::No {
                continue;
            }
            let Some(src) = &facts[e.from] else { continue };
            let (f, finding) = ctx.step(src, e, tg);
            if let Some(x) = finding {
                if !findings.contains(&x) {
                    findings.push(x);
                }
            }
            acc = Some(match acc {
                None => f,
                Some(a) => a.join(&f),
            });
        }
        facts[n] = acc;
    }
    Ok((facts, findings))
}

/// Marks unrealizable edges and unreachable nodes layer by layer, then
/// recomputes facts on the reduced graph.
pub fn analyze(dp: &Dp) -> Result<Analysis, TgError> {
    let ctx = FactCtx::new(dp);
    let mut tg = build_tg(&dp.procs)?;
    let n = tg.nodes.len();
    let mut facts: Vec<Option<NodeFact>> = vec![None; n];
    let mut processed = vec![false; n];
    let mut rounds = Vec::new();
    let mut findings: Vec<Finding> = Vec::new();
    let mut layer = vec![tg.init];
    while !layer.is_empty() {
        let mut removed = Vec::new();
        for &v in &layer {
            processed[v] = true;
            if tg.reachable[v] == Tri::No {
                continue;
            }
            let fact = if v == tg.init {
                Some(ctx.seed()?)
            } else {
                let mut acc: Option<NodeFact> = None;
                let inc: Vec<TgEdge> = tg.incoming(v).map(|(_, e)| e.clone()).collect();
                for e in inc {
                    if e.realizable == Tri::No {
                        continue;
                    }
                    let Some(src) = &facts[e.from] else { continue };
                    let (f, finding) = ctx.step(src, &e, &tg);
                    if let Some(x) = finding {
                        if !findings.contains(&x) {
                            findings.push(x);
                        }
                    }
                    acc = Some(match acc {
                        None => f,
                        Some(a) => a.join(&f),
                    });
                }
                acc
            };
            let Some(fact) = fact else {
                tg.reachable[v] = Tri::No;
                removed.push(v);
                continue;
            };
            let outs: Vec<usize> = tg.outgoing(v).map(|(i, _)| i).collect();
            for i in outs {
                if tg.edges[i].realizable != Tri::No && ctx.unrealizable(&fact, &tg.edges[i]) {
                    tg.edges[i].realizable = Tri::No;
                    tg.edges[i].cause = Some(Cause::EmptyContent);
                }
            }
            facts[v] = Some(fact);
        }
        loop {
            let mut changed = false;
            for v in 0..n {
                if v == tg.init || tg.reachable[v] == Tri::No {
                    continue;
                }
                if tg.incoming(v).all(|(_, e)| e.realizable == Tri::No) {
                    tg.reachable[v] = Tri::No;
                    processed[v] = true;
                    removed.push(v);
                    changed = true;
                    let outs: Vec<usize> = tg.outgoing(v).map(|(i, _)| i).collect();
                    for i in outs {
                        if tg.edges[i].realizable != Tri::No {
                            tg.edges[i].realizable = Tri::No;
                            tg.edges[i].cause = Some(Cause::UnreachableSource);
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        removed.sort();
        removed.dedup();
        rounds.push(removed.iter().map(|&v| tg.label(v)).collect());
        layer = (0..n)
            .filter(|&v| !processed[v] && tg.incoming(v).all(|(_, e)| processed[e.from]))
            .collect();
    }
    let reduced = tg.reduced();
    let (rfacts, more) = propagate(&ctx, &reduced)?;
    for x in more {
        if !findings.contains(&x) {
            findings.push(x);
        }
    }
    let facts = rfacts
        .into_iter()
        .map(|f| f.expect("every node of the reduced graph is reached"))
        .collect();
    Ok(Analysis {
        full: tg,
        reduced,
        facts,
        rounds,
        findings,
    })
}

/// Per-node outcome of a goal.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct NodeResult {
    pub node: String,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct TgVerdict {
    pub goal: String,
    pub status: &'static str,
    pub nodes: Vec<NodeResult>,
    pub findings: Vec<Finding>,
}

/// Integrity: wherever process `proc` is at `node`, the equalities follow.
pub fn check_integrity(a: &Analysis, goal: &str, proc: usize, node: usize, eqs: &[(Term, Term)]) -> TgVerdict {
    let mut nodes = Vec::new();
    for (i, f) in a.facts.iter().enumerate() {
        if a.reduced.nodes[i].at[proc] != node {
            continue;
        }
        let ok = eqs.iter().all(|(x, y)| f.entails_eq(x, y));
        nodes.push(NodeResult {
            node: a.reduced.label(i),
            holds: ok,
        });
    }
    let ok = nodes.iter().all(|r| r.holds) && a.findings.is_empty();
    TgVerdict {
        goal: goal.to_string(),
        status: if ok { "holds" } else { "violated" },
        nodes,
        findings: a.findings.clone(),
    }
}

/// Secrecy: every listed term stays in the secure sets at every node.
pub fn check_secrecy(a: &Analysis, goal: &str, items: &BTreeSet<Term>) -> TgVerdict {
    let mut nodes = Vec::new();
    for (i, f) in a.facts.iter().enumerate() {
        let ok = items.iter().all(|t| {
            member_mod(&f.secure_k, t, &f.eqs) || member_mod(&f.secure_c, t, &f.eqs)
        });
        nodes.push(NodeResult {
            node: a.reduced.label(i),
            holds: ok,
        });
    }
    let ok = nodes.iter().all(|r| r.holds) && a.findings.is_empty();
    TgVerdict {
        goal: goal.to_string(),
        status: if ok { "holds" } else { "violated" },
        nodes,
        findings: a.findings.clone(),
    }
}
