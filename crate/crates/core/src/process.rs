//! Sequential and distributed processes and their execution.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};

use thiserror::Error;

use crate::intruder::Knowledge;
use crate::logic::StateView;
use crate::term::{
    apply, compose, match_template, rename, Binding, FreshGen, FunSym, Node, Renaming, Sym,
    Term, Ty, DAGGER,
};

/// Name of the adversary process.
pub const ADVERSARY: &str = "†";

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Send { chan: Term, msg: Term },
    Recv { chan: Term, pat: Term },
    Assign { lhs: Term, rhs: Term },
}

impl Action {
    pub fn terms(&self) -> [&Term; 2] {
        match self {
            Action::Send { chan, msg } => [chan, msg],
            Action::Recv { chan, pat } => [chan, pat],
            Action::Assign { lhs, rhs } => [lhs, rhs],
        }
    }

    pub fn vars(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        for t in self.terms() {
            t.collect_vars(&mut out);
        }
        out
    }

    pub fn map(&self, f: impl Fn(&Term) -> Term) -> Action {
        match self {
            Action::Send { chan, msg } => Action::Send { chan: f(chan), msg: f(msg) },
            Action::Recv { chan, pat } => Action::Recv { chan: f(chan), pat: f(pat) },
            Action::Assign { lhs, rhs } => Action::Assign { lhs: f(lhs), rhs: f(rhs) },
        }
    }

    pub fn chan(&self) -> Option<&Term> {
        match self {
            Action::Send { chan, .. } | Action::Recv { chan, .. } => Some(chan),
            Action::Assign { .. } => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let chan = |c: &Term| if c.is_open() { String::new() } else { c.to_string() };
        match self {
            Action::Send { chan: c, msg } => write!(f, "{}!{msg}", chan(c)),
            Action::Recv { chan: c, pat } => write!(f, "{}?{pat}", chan(c)),
            Action::Assign { lhs, rhs } => write!(f, "{lhs} := {rhs}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub action: Action,
    pub to: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeqProc {
    pub name: Sym,
    /// Template the process was instantiated from.
    pub role: Sym,
    pub agent: Term,
    pub nodes: usize,
    pub init: usize,
    pub edges: Vec<Edge>,
    /// Variables initialized before the first step.
    pub init_vars: BTreeSet<Sym>,
    /// Subset of `init_vars` given fresh values.
    pub hidden: BTreeSet<Sym>,
    pub var_types: BTreeMap<Sym, Ty>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProcessError {
    #[error("variable {0} is shared by several processes")]
    VariableClash(Sym),
    #[error("process {0} has a cycle")]
    CyclicSP(Sym),
    #[error("transition is not enabled")]
    NotEnabled,
    #[error("unknown process {0}")]
    UnknownProcess(Sym),
}

impl SeqProc {
    pub fn out_edges(&self, node: usize) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges.iter().enumerate().filter(move |(_, e)| e.from == node)
    }

    pub fn var(&self, name: &str) -> Option<Term> {
        self.var_types.get(name).map(|t| Term::var(name, t.clone()))
    }

    pub fn is_acyclic(&self) -> bool {
        let mut indeg = vec![0usize; self.nodes];
        for e in &self.edges {
            indeg[e.to] += 1;
        }
        let mut queue: Vec<usize> = (0..self.nodes).filter(|&n| indeg[n] == 0).collect();
        let mut seen = 0;
        while let Some(n) = queue.pop() {
            seen += 1;
            for (_, e) in self.out_edges(n) {
                indeg[e.to] -= 1;
                if indeg[e.to] == 0 {
                    queue.push(e.to);
                }
            }
        }
        seen == self.nodes
    }

    /// Variables initialized on every path from the initial node to `node`.
    pub fn must_known(&self) -> Vec<Option<BTreeSet<Sym>>> {
        let mut known: Vec<Option<BTreeSet<Sym>>> = vec![None; self.nodes];
        known[self.init] = Some(self.init_vars.clone());
        for _ in 0..=self.nodes {
            let mut changed = false;
            for e in &self.edges {
                let Some(src) = known[e.from].clone() else { continue };
                let mut out = src;
                if !matches!(e.action, Action::Send { .. }) {
                    out.extend(e.action.vars());
                }
                let new = match &known[e.to] {
                    None => out,
                    Some(old) if e.to != self.init => old.intersection(&out).cloned().collect(),
                    Some(old) => old.clone(),
                };
                if known[e.to].as_ref() != Some(&new) {
                    known[e.to] = Some(new);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        known
    }

    pub fn vars(&self) -> BTreeSet<Sym> {
        self.var_types.keys().cloned().collect()
    }

    /// Applies a variable renaming to every action and declaration.
    pub fn renamed(&self, eta: &Renaming) -> SeqProc {
        let r = |s: &Sym| eta.rename_sym(s);
        SeqProc {
            name: self.name.clone(),
            role: self.role.clone(),
            agent: rename(&self.agent, eta),
            nodes: self.nodes,
            init: self.init,
            edges: self
                .edges
                .iter()
                .map(|e| Edge {
                    from: e.from,
                    to: e.to,
                    action: e.action.map(|t| rename(t, eta)),
                })
                .collect(),
            init_vars: self.init_vars.iter().map(r).collect(),
            hidden: self.hidden.iter().map(r).collect(),
            var_types: self.var_types.iter().map(|(k, v)| (r(k), v.clone())).collect(),
        }
    }

    /// Equality up to renaming of the non-initialized and hidden variables.
    pub fn equal_up_to_renaming(&self, other: &SeqProc) -> bool {
        let canon = |p: &SeqProc| {
            let mut order: Vec<Sym> = Vec::new();
            let renamable: BTreeSet<Sym> = p
                .var_types
                .keys()
                .filter(|v| !p.init_vars.contains(*v) || p.hidden.contains(*v))
                .cloned()
                .collect();
            for h in &p.hidden {
                order.push(h.clone());
            }
            for e in &p.edges {
                for v in e.action.terms().iter().flat_map(|t| t.subterms()) {
                    if let Some(s) = v.var_name() {
                        if renamable.contains(s) && !order.contains(s) {
                            order.push(s.clone());
                        }
                    }
                }
            }
            for v in &renamable {
                if !order.contains(v) {
                    order.push(v.clone());
                }
            }
            let eta = Renaming::new(
                order
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (s.clone(), Sym::from(format!("_v{i}")))),
            )
            .expect("positional names are distinct");
            let mut r = p.renamed(&eta);
            r.name = Sym::from("");
            r.role = Sym::from("");
            r
        };
        canon(self) == canon(other)
    }
}

/// A family of sequential processes with disjoint variables.
#[derive(Clone, Debug)]
pub struct Dp {
    pub procs: Vec<SeqProc>,
    pub agents: Vec<Term>,
    pub intermediaries: Vec<Term>,
    pub shared_keys: Vec<Term>,
    pub shared_channels: Vec<Term>,
    /// Values supplied for initialized, non-hidden variables.
    pub params: Binding,
}

impl Dp {
    pub fn proc_index(&self, name: &str) -> Option<usize> {
        self.procs.iter().position(|p| &*p.name == name)
    }

    pub fn check_disjoint(&self) -> Result<(), ProcessError> {
        let mut seen = BTreeSet::new();
        for p in &self.procs {
            for v in p.var_types.keys() {
                if &**v == crate::term::OPEN {
                    continue;
                }
                if !seen.insert(v.clone()) {
                    return Err(ProcessError::VariableClash(v.clone()));
                }
            }
        }
        Ok(())
    }

    /// Whether every channel in the process family is the open channel.
    pub fn open_only(&self) -> bool {
        self.procs
            .iter()
            .flat_map(|p| p.edges.iter())
            .filter_map(|e| e.action.chan())
            .all(|c| c.is_open())
    }

    pub fn var_type(&self, name: &str) -> Option<Ty> {
        self.procs.iter().find_map(|p| p.var_types.get(name).cloned())
    }

    pub fn hidden_vars(&self) -> BTreeSet<Sym> {
        self.procs.iter().flat_map(|p| p.hidden.iter().cloned()).collect()
    }

    pub fn init_vars(&self) -> BTreeSet<Sym> {
        self.procs.iter().flat_map(|p| p.init_vars.iter().cloned()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct ProcState {
    pub at: usize,
    /// Index of the last edge taken; not part of state identity.
    pub last: Option<usize>,
    pub known: BTreeSet<Sym>,
}

impl PartialEq for ProcState {
    fn eq(&self, o: &Self) -> bool {
        self.at == o.at && self.known == o.known
    }
}
impl Eq for ProcState {}
impl Hash for ProcState {
    fn hash<H: Hasher>(&self, h: &mut H) {
        self.at.hash(h);
        self.known.hash(h);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DistState {
    pub procs: Vec<ProcState>,
    pub theta: Binding,
    pub chans: BTreeMap<Term, BTreeSet<Term>>,
    /// Number of adversary values created so far.
    pub adv_fresh: u32,
}

impl DistState {
    pub fn control(&self) -> Vec<usize> {
        self.procs.iter().map(|p| p.at).collect()
    }

    pub fn content(&self, c: &Term) -> impl Iterator<Item = &Term> {
        self.chans.get(c).into_iter().flat_map(|s| s.iter())
    }
}

pub fn initial_state(dp: &Dp, fresh: &mut FreshGen) -> Result<DistState, ProcessError> {
    dp.check_disjoint()?;
    let mut theta = Binding::id();
    for (k, v) in dp.params.iter() {
        theta.insert_unchecked(k.clone(), v.clone());
    }
    let mut procs = Vec::new();
    for p in &dp.procs {
        for h in &p.hidden {
            let ty = p.var_types[h].clone();
            theta.insert_unchecked(h.clone(), fresh.fresh(ty, h));
        }
        procs.push(ProcState {
            at: p.init,
            last: None,
            known: p.init_vars.clone(),
        });
    }
    Ok(DistState {
        procs,
        theta,
        chans: BTreeMap::new(),
        adv_fresh: 0,
    })
}

/// Every shared key or shared channel in `t` mentions `agent`.
pub fn guard_ok(t: &Term, agent: &Term) -> bool {
    let mut ok = true;
    t.visit(&mut |u| {
        if u.is_shared() && !u.args().contains(agent) {
            ok = false;
        }
    });
    ok
}

/// Keys of variable-keyed encryptions in a receive pattern must be known,
/// or bound by the same pattern outside that encryption.
pub fn keys_available(pat: &Term, known: &BTreeSet<Sym>) -> bool {
    let occ = pat.occurrences();
    for (path, t) in &occ {
        let Some((k, _)) = t.as_enc() else { continue };
        if matches!(k.fsym(), Some(FunSym::SharedKey(_))) {
            continue;
        }
        for v in k.vars() {
            if known.contains(&v) {
                continue;
            }
            let elsewhere = occ.iter().any(|(p2, u)| {
                u.var_name() == Some(&v) && !(p2.len() >= path.len() && p2[..path.len()] == path[..])
            });
            if !elsewhere {
                return false;
            }
        }
    }
    true
}

/// Bindings under which the given edge of process `pi` can fire from its
/// current control point, using only honest channel content.
pub fn enabled_edge(dp: &Dp, s: &DistState, pi: usize, ei: usize) -> Vec<Binding> {
    let p = &dp.procs[pi];
    let ps = &s.procs[pi];
    let edge = &p.edges[ei];
    if edge.from != ps.at {
        return Vec::new();
    }
    let known = &ps.known;
    let th = &s.theta;
    let agent = apply(&p.agent, th);
    let inst = edge.action.map(|t| apply(t, th));
    if !inst.terms().iter().all(|t| guard_ok(t, &agent)) {
        return Vec::new();
    }
    match &edge.action {
        Action::Send { chan, msg } => {
            if chan.vars().is_subset(known) && msg.vars().is_subset(known) {
                vec![Binding::id()]
            } else {
                Vec::new()
            }
        }
        Action::Recv { chan, pat } => {
            if !chan.vars().is_subset(known) || !keys_available(pat, known) {
                return Vec::new();
            }
            let c = apply(chan, th);
            let pat_s = apply(pat, th);
            let mut out: Vec<Binding> = s
                .content(&c)
                .filter_map(|t| match_template(&pat_s, t, known))
                .collect();
            out.sort();
            out.dedup();
            out
        }
        Action::Assign { lhs, rhs } => {
            if !rhs.vars().is_subset(known) {
                return Vec::new();
            }
            match_template(&apply(lhs, th), &apply(rhs, th), known)
                .into_iter()
                .collect()
        }
    }
}

pub fn enabled(dp: &Dp, s: &DistState, pi: usize) -> Vec<(usize, Binding)> {
    let at = s.procs[pi].at;
    dp.procs[pi]
        .out_edges(at)
        .flat_map(|(ei, _)| enabled_edge(dp, s, pi, ei).into_iter().map(move |b| (ei, b)))
        .collect()
}

/// Fires edge `ei` of process `pi` with extension `ext` (unchecked).
pub fn fire_unchecked(dp: &Dp, s: &DistState, pi: usize, ei: usize, ext: &Binding) -> DistState {
    let p = &dp.procs[pi];
    let edge = &p.edges[ei];
    let mut n = s.clone();
    match &edge.action {
        Action::Send { chan, msg } => {
            let c = apply(chan, &s.theta);
            let m = apply(msg, &s.theta);
            n.chans.entry(c).or_default().insert(m);
        }
        Action::Recv { chan, pat } => {
            n.theta = compose(ext, &s.theta);
            let ps = &mut n.procs[pi];
            chan.collect_vars(&mut ps.known);
            pat.collect_vars(&mut ps.known);
        }
        Action::Assign { lhs, rhs } => {
            n.theta = compose(ext, &s.theta);
            let ps = &mut n.procs[pi];
            lhs.collect_vars(&mut ps.known);
            rhs.collect_vars(&mut ps.known);
        }
    }
    let ps = &mut n.procs[pi];
    ps.at = edge.to;
    ps.last = Some(ei);
    n
}

pub fn fire(dp: &Dp, s: &DistState, pi: usize, ei: usize, ext: &Binding) -> Result<DistState, ProcessError> {
    if !enabled_edge(dp, s, pi, ei).contains(ext) {
        return Err(ProcessError::NotEnabled);
    }
    Ok(fire_unchecked(dp, s, pi, ei, ext))
}

/// A state paired with its process family and the adversary's knowledge.
pub struct StateCtx<'a> {
    pub dp: &'a Dp,
    pub s: &'a DistState,
    pub adv: &'a Knowledge,
}

impl StateView for StateCtx<'_> {
    fn theta(&self) -> &Binding {
        &self.s.theta
    }

    fn channel(&self, c: &Term) -> Option<&BTreeSet<Term>> {
        self.s.chans.get(c)
    }

    fn channels(&self) -> Vec<(&Term, &BTreeSet<Term>)> {
        self.s.chans.iter().collect()
    }

    fn known_values(&self, p: &str) -> Option<Vec<Term>> {
        if p == ADVERSARY {
            return Some(self.adv.base.iter().cloned().collect());
        }
        let i = self.dp.proc_index(p)?;
        let proc = &self.dp.procs[i];
        Some(
            self.s.procs[i]
                .known
                .iter()
                .map(|v| apply(&proc.var(v).unwrap_or_else(|| Term::var(v, Ty::M)), &self.s.theta))
                .collect(),
        )
    }

    fn can_build(&self, p: &str, t: &Term) -> Option<bool> {
        if p == ADVERSARY {
            return Some(self.adv.derivable(t));
        }
        let vals: BTreeSet<Term> = self.known_values(p)?.into_iter().collect();
        fn build(t: &Term, vals: &BTreeSet<Term>) -> bool {
            vals.contains(t)
                || match t.node() {
                    Node::App(_, args) => args.iter().all(|a| build(a, vals)),
                    _ => false,
                }
        }
        Some(build(t, &vals))
    }

    fn agent_of(&self, p: &str) -> Option<Term> {
        if p == ADVERSARY {
            return Some(Term::agent(DAGGER));
        }
        let i = self.dp.proc_index(p)?;
        Some(apply(&self.dp.procs[i].agent, &self.s.theta))
    }

    fn at(&self, p: &str) -> Option<usize> {
        if p == ADVERSARY {
            return Some(0);
        }
        Some(self.s.procs[self.dp.proc_index(p)?].at)
    }
}

/// Ground terms of the state never mention uninitialized variables.
pub fn channels_ground(s: &DistState) -> bool {
    let known: BTreeSet<Sym> = s.procs.iter().flat_map(|p| p.known.iter().cloned()).collect();
    let free_ok = |t: &Term| t.vars().iter().all(|v| known.contains(v) || &**v == crate::term::OPEN);
    s.chans.iter().all(|(c, ts)| free_ok(c) && ts.iter().all(free_ok))
}
