//! Bounded explicit-state exploration of a protocol together with the
//! adversary, and the property checks run on every reached state.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::dsl::{expand_star, Goal, InstanceSpec, ProtocolSpec, VarMap};
use crate::intruder::{injections, IntruderConfig, Knowledge};
use crate::logic::{holds_secure_c, holds_secure_k, key_inverse, secret_atoms};
use crate::process::{
    enabled_edge, fire, fire_unchecked, guard_ok, initial_state, keys_available, Action, DistState,
    Dp, StateCtx, ADVERSARY,
};
use crate::term::{
    apply, is_adversary_constant, adversary_constant, match_template, sym, Binding, FreshGen, Node,
    Sym, Term, Ty,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExploreConfig {
    pub sessions: usize,
    #[serde(rename = "selfSessions")]
    pub self_sessions: bool,
    #[serde(rename = "maxDepth")]
    pub max_depth: usize,
    #[serde(rename = "maxStates")]
    pub max_states: usize,
    #[serde(flatten)]
    pub intruder: IntruderConfig,
    #[serde(skip)]
    pub workers: usize,
    pub seed: u64,
    /// Check the preservation theorems on every adversary step.
    #[serde(skip)]
    pub check_theorems: bool,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig {
            sessions: 1,
            self_sessions: true,
            max_depth: 24,
            max_states: 3_000_000,
            intruder: IntruderConfig::default(),
            workers: 1,
            seed: 0,
            check_theorems: false,
        }
    }
}

/// A goal resolved against the instances of one scenario.
#[derive(Clone, Debug)]
pub enum Property {
    Secrecy {
        goal: String,
        items: BTreeSet<Term>,
    },
    Integrity {
        goal: String,
        proc: usize,
        node: usize,
        eqs: Vec<(Term, Term)>,
    },
    Correspondence {
        goal: String,
        triggers: Vec<Trigger>,
    },
}

impl Property {
    pub fn goal(&self) -> &str {
        match self {
            Property::Secrecy { goal, .. }
            | Property::Integrity { goal, .. }
            | Property::Correspondence { goal, .. } => goal,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trigger {
    pub proc: usize,
    pub node: usize,
    /// Candidate witnesses: process, required node, equalities.
    pub witnesses: Vec<(usize, usize, Vec<(Term, Term)>)>,
}

pub fn goal_name(g: &Goal) -> String {
    match g {
        Goal::Integrity { proc, node, .. } => format!("integrity at {proc}.{node}"),
        Goal::Secrecy { .. } => "secrecy".to_string(),
        Goal::Correspondence {
            proc,
            node,
            witness,
            witness_node,
            ..
        } => format!("correspondence at {proc}.{node} from {witness}.{witness_node}"),
    }
}

/// A finite instantiation of a protocol.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub dp: Dp,
    pub vars: VarMap,
    pub props: Vec<Property>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExploreError {
    #[error("goal {0} refers to a variable with no instance")]
    Unresolved(String),
    #[error(transparent)]
    Process(#[from] crate::process::ProcessError),
}

fn roles_in(t: &Term, out: &mut BTreeSet<Sym>) {
    for v in t.vars() {
        if let Some((r, _)) = v.split_once('.') {
            out.insert(sym(r));
        }
    }
}

fn choices(vars: &VarMap, roles: &BTreeSet<Sym>) -> Vec<BTreeMap<Sym, Sym>> {
    let mut out = vec![BTreeMap::new()];
    for r in roles {
        let mut next = Vec::new();
        for c in &out {
            for i in vars.instances_of(r) {
                let mut c2 = c.clone();
                c2.insert(r.clone(), i);
                next.push(c2);
            }
        }
        out = next;
    }
    out
}

fn resolve_eqs(
    vars: &VarMap,
    eqs: &[(Term, Term)],
    choice: &BTreeMap<Sym, Sym>,
    goal: &str,
) -> Result<Vec<(Term, Term)>, ExploreError> {
    eqs.iter()
        .map(|(a, b)| {
            let r = |t: &Term| vars.resolve(t, choice).ok_or_else(|| ExploreError::Unresolved(goal.to_string()));
            Ok((r(a)?, r(b)?))
        })
        .collect()
}

/// Resolves the goals of `spec` against the instances of `dp`.
pub fn resolve_goals(spec: &ProtocolSpec, dp: &Dp, vars: &VarMap) -> Result<Vec<Property>, ExploreError> {
    let first = |role: &Sym| -> Option<Sym> { vars.instances_of(role).into_iter().next() };
    let mut props = Vec::new();
    for g in &spec.goals {
        let name = goal_name(g);
        match g {
            Goal::Secrecy { items } => {
                let mut out = BTreeSet::new();
                for it in items {
                    for t in expand_star(it, &dp.agents) {
                        let mut roles = BTreeSet::new();
                        roles_in(&t, &mut roles);
                        for c in choices(vars, &roles) {
                            out.insert(vars.resolve(&t, &c).ok_or_else(|| ExploreError::Unresolved(name.clone()))?);
                        }
                    }
                }
                props.push(Property::Secrecy { goal: name, items: out });
            }
            Goal::Integrity { proc, node, eqs } => {
                let mut roles = BTreeSet::new();
                for (a, b) in eqs {
                    roles_in(a, &mut roles);
                    roles_in(b, &mut roles);
                }
                roles.insert(proc.clone());
                let choice: BTreeMap<Sym, Sym> = roles
                    .iter()
                    .filter_map(|r| Some((r.clone(), first(r)?)))
                    .collect();
                let pi = dp
                    .proc_index(choice.get(proc).ok_or_else(|| ExploreError::Unresolved(name.clone()))?)
                    .ok_or_else(|| ExploreError::Unresolved(name.clone()))?;
                let eqs = resolve_eqs(vars, eqs, &choice, &name)?;
                props.push(Property::Integrity {
                    goal: name,
                    proc: pi,
                    node: *node,
                    eqs,
                });
            }
            Goal::Correspondence {
                proc,
                node,
                witness,
                witness_node,
                eqs,
            } => {
                let mut triggers = Vec::new();
                for r in vars.instances_of(proc) {
                    let pi = dp.proc_index(&r).ok_or_else(|| ExploreError::Unresolved(name.clone()))?;
                    let mut witnesses = Vec::new();
                    for w in vars.instances_of(witness) {
                        if w == r {
                            continue;
                        }
                        let wi = dp.proc_index(&w).ok_or_else(|| ExploreError::Unresolved(name.clone()))?;
                        let choice = BTreeMap::from([(proc.clone(), r.clone()), (witness.clone(), w.clone())]);
                        witnesses.push((wi, *witness_node, resolve_eqs(vars, eqs, &choice, &name)?));
                    }
                    triggers.push(Trigger {
                        proc: pi,
                        node: *node,
                        witnesses,
                    });
                }
                props.push(Property::Correspondence { goal: name, triggers });
            }
        }
    }
    Ok(props)
}

/// Role classes of a replicable protocol.
fn role_kind(spec: &ProtocolSpec, p: &crate::dsl::ProcDecl) -> u8 {
    if spec.is_agent(&p.param) {
        2
    } else if p.init.iter().any(|(_, t)| *t == Ty::A) {
        0
    } else {
        1
    }
}

/// The instantiations explored for `spec`: one copy of each process for
/// ordinary protocols; for replicable ones, `sessions` copies per role, once
/// with distinct partners and once (optionally) with an A=A session.
pub fn scenarios(spec: &ProtocolSpec, cfg: &ExploreConfig) -> Result<Vec<Scenario>, ExploreError> {
    if !spec.has_replicable() {
        let (dp, vars) = spec.single_dp();
        let props = resolve_goals(spec, &dp, &vars)?;
        return Ok(vec![Scenario {
            name: "single".into(),
            dp,
            vars,
            props,
        }]);
    }
    let agents: Vec<Term> = spec.agent_terms();
    let mut pairs = Vec::new();
    for a in &agents {
        for b in &agents {
            if a != b {
                pairs.push((a.clone(), b.clone()));
            }
        }
    }
    for a in &agents {
        pairs.push((a.clone(), a.clone()));
    }
    let n = cfg.sessions.max(1);
    let normal: Vec<(Term, Term)> = pairs.iter().cycle().take(n).cloned().collect();
    let mut variants = vec![("distinct", normal.clone())];
    if cfg.self_sessions && !agents.is_empty() {
        let mut s: Vec<(Term, Term)> = normal[..n - 1].to_vec();
        s.push((agents[0].clone(), agents[0].clone()));
        variants.push(("self", s));
    }
    let mut out = Vec::new();
    for (vname, init_pairs) in variants {
        let mut resp: Vec<Term> = Vec::new();
        for (_, b) in &init_pairs {
            if !resp.contains(b) {
                resp.push(b.clone());
            }
        }
        for a in &agents {
            if resp.len() >= n {
                break;
            }
            if !resp.contains(a) {
                resp.push(a.clone());
            }
        }
        resp.truncate(n);
        resp.sort();
        let mut insts = Vec::new();
        for p in &spec.processes {
            let count = if p.replicable { n } else { 1 };
            for i in 0..count {
                let mut agents_map = BTreeMap::new();
                match role_kind(spec, p) {
                    0 => {
                        let (a, b) = &init_pairs[i];
                        agents_map.insert(p.param.clone(), a.clone());
                        for (v, t) in &p.init {
                            if *t == Ty::A {
                                agents_map.insert(v.clone(), b.clone());
                            }
                        }
                    }
                    1 => {
                        agents_map.insert(p.param.clone(), resp[i % resp.len()].clone());
                    }
                    _ => {}
                }
                insts.push(InstanceSpec {
                    template: p.name.clone(),
                    name: sym(&format!("{}{}", p.name, i + 1)),
                    agents: agents_map,
                });
            }
        }
        let (dp, vars) = spec.instantiate(&insts);
        let props = resolve_goals(spec, &dp, &vars)?;
        let desc: Vec<String> = insts
            .iter()
            .map(|i| {
                let ag: Vec<String> = i.agents.values().map(|t| t.to_string()).collect();
                if ag.is_empty() {
                    i.name.to_string()
                } else {
                    format!("{}({})", i.name, ag.join("→"))
                }
            })
            .collect();
        out.push(Scenario {
            name: format!("{vname}: {}", desc.join(" ")),
            dp,
            vars,
            props,
        });
    }
    Ok(out)
}

/// Binds initialized, non-hidden variables that have no value yet to fresh
/// honest constants.
pub fn bind_params(dp: &mut Dp, fresh: &mut FreshGen) {
    for p in &dp.procs {
        for v in &p.init_vars {
            if p.hidden.contains(v) || dp.params.contains(v) {
                continue;
            }
            let ty = p.var_types[v].clone();
            if ty == Ty::A {
                continue;
            }
            dp.params.insert_unchecked(v.clone(), fresh.fresh(ty, v));
        }
    }
}

/// How a state was reached from its parent.
#[derive(Clone, Debug)]
pub enum Move {
    Honest {
        proc: usize,
        edge: usize,
        ext: Binding,
    },
    /// The adversary writes `msg` to `chan`; process `proc` then receives it.
    Inject {
        proc: usize,
        edge: usize,
        chan: Term,
        msg: Term,
        ext: Binding,
    },
}

#[derive(Clone, Debug)]
pub struct SNode {
    pub state: DistState,
    pub parent: Option<usize>,
    pub mv: Option<Move>,
    pub depth: usize,
}

/// One step of a counterexample.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct TraceStep {
    pub proc: String,
    pub action: String,
    #[serde(rename = "bindingDelta")]
    pub binding_delta: BTreeMap<String, String>,
    #[serde(rename = "chanDelta")]
    pub chan_delta: BTreeMap<String, Vec<String>>,
}

/// A path of states with the step taken between consecutive states.
#[derive(Clone, Debug)]
pub struct Run {
    pub states: Vec<DistState>,
    /// `steps[i]` leads from `states[i]` to `states[i + 1]`; `None` is the adversary.
    pub actors: Vec<Option<usize>>,
    /// Instantiated actions.
    pub actions: Vec<Action>,
}

#[derive(Clone, Debug, Default, Serialize, PartialEq, Eq)]
pub struct TheoremStats {
    #[serde(rename = "adversaryEdges")]
    pub adversary_edges: u64,
    #[serde(rename = "honestEdges")]
    pub honest_edges: u64,
    pub violations: Vec<String>,
}

impl TheoremStats {
    fn merge(&mut self, o: TheoremStats) {
        self.adversary_edges += o.adversary_edges;
        self.honest_edges += o.honest_edges;
        for v in o.violations {
            if self.violations.len() < 20 {
                self.violations.push(v);
            }
        }
    }
}

/// Result of exploring one scenario.
#[derive(Clone, Debug)]
pub struct Search {
    pub scenario: Scenario,
    pub nodes: Vec<SNode>,
    pub edges: u64,
    /// Control-vector pairs of every explored transition.
    pub transitions: BTreeSet<(Vec<usize>, Vec<usize>)>,
    pub status: Status,
    pub violation: Option<(usize, String, String)>,
    pub discrepancies: Vec<String>,
    pub theorems: TheoremStats,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Status {
    #[serde(rename = "holds-at-bounds")]
    Holds,
    #[serde(rename = "violated")]
    Violated,
    #[serde(rename = "resource-limit")]
    ResourceLimit,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Holds => "holds-at-bounds",
            Status::Violated => "violated",
            Status::ResourceLimit => "resource-limit",
        }
    }
}

fn rename_consts(t: &Term, map: &BTreeMap<Term, Term>) -> Term {
    match t.node() {
        Node::Con(_) => map.get(t).cloned().unwrap_or_else(|| t.clone()),
        Node::Var(_) => t.clone(),
        Node::App(f, args) => {
            if args.iter().all(|a| a.is_ground() && !mentions_adv(a)) {
                return t.clone();
            }
            Term::app(*f, args.iter().map(|a| rename_consts(a, map)).collect()).expect("renaming keeps kinds")
        }
    }
}

fn mentions_adv(t: &Term) -> bool {
    let mut found = false;
    t.visit(&mut |u| found |= is_adversary_constant(u));
    found
}

/// The state with adversary constants renumbered by first occurrence.
pub fn canonical(s: &DistState) -> DistState {
    if s.adv_fresh == 0 {
        return s.clone();
    }
    let mut order: Vec<Term> = Vec::new();
    let mut note = |t: &Term| {
        t.visit(&mut |u| {
            if is_adversary_constant(u) && !order.contains(u) {
                order.push(u.clone());
            }
        })
    };
    for (_, v) in s.theta.iter() {
        note(v);
    }
    for (c, ts) in &s.chans {
        note(c);
        for t in ts {
            note(t);
        }
    }
    let map: BTreeMap<Term, Term> = order
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), adversary_constant(t.ty().clone(), i)))
        .filter(|(a, b)| a != b)
        .collect();
    if map.is_empty() {
        return s.clone();
    }
    let mut out = s.clone();
    let mut theta = Binding::id();
    for (k, v) in s.theta.iter() {
        theta.insert_unchecked(k.clone(), rename_consts(v, &map));
    }
    out.theta = theta;
    out.chans = s
        .chans
        .iter()
        .map(|(c, ts)| (rename_consts(c, &map), ts.iter().map(|t| rename_consts(t, &map)).collect()))
        .collect();
    out
}

/// Honest moves followed by adversary injections, in process, edge and
/// candidate order.
pub fn successors(
    dp: &Dp,
    s: &DistState,
    cfg: &IntruderConfig,
) -> Vec<(Move, DistState)> {
    let mut out = Vec::new();
    let adv = Knowledge::of_state(cfg, s);
    for pi in 0..dp.procs.len() {
        let at = s.procs[pi].at;
        for (ei, e) in dp.procs[pi].out_edges(at) {
            for ext in enabled_edge(dp, s, pi, ei) {
                let n = fire_unchecked(dp, s, pi, ei, &ext);
                out.push((Move::Honest { proc: pi, edge: ei, ext }, n));
            }
            let Action::Recv { chan, pat } = &e.action else { continue };
            let known = &s.procs[pi].known;
            if !chan.vars().is_subset(known) || !keys_available(pat, known) {
                continue;
            }
            let c = apply(chan, &s.theta);
            if !adv.readable(&c) {
                continue;
            }
            let agent = apply(&dp.procs[pi].agent, &s.theta);
            let p = apply(pat, &s.theta);
            if !guard_ok(&c, &agent) || !guard_ok(&p, &agent) {
                continue;
            }
            for inj in injections(&adv, &p, known, s.adv_fresh, cfg) {
                let msg = apply(&p, &inj.binding);
                if s.content(&c).any(|t| *t == msg) {
                    continue;
                }
                let mut mid = s.clone();
                mid.chans.entry(c.clone()).or_default().insert(msg.clone());
                mid.adv_fresh = inj.fresh_after;
                let Some(ext) = match_template(&p, &msg, known) else { continue };
                let Ok(n) = fire(dp, &mid, pi, ei, &ext) else { continue };
                out.push((
                    Move::Inject {
                        proc: pi,
                        edge: ei,
                        chan: c.clone(),
                        msg,
                        ext,
                    },
                    n,
                ));
            }
        }
    }
    out
}

/// The state between the adversary's write and the honest receive.
pub fn mid_state(parent: &DistState, mv: &Move, child: &DistState) -> Option<DistState> {
    let Move::Inject { chan, msg, .. } = mv else { return None };
    let mut mid = parent.clone();
    mid.chans.entry(chan.clone()).or_default().insert(msg.clone());
    mid.adv_fresh = child.adv_fresh;
    Some(mid)
}

/// Secrets for the preservation theorems: the declared secrecy set together
/// with shared keys and channels, or, without a secrecy goal, the shared
/// terms and hidden variables.
pub fn theorem_secrets(sc: &Scenario) -> BTreeSet<Term> {
    let mut e: BTreeSet<Term> = sc.dp.shared_keys.iter().chain(&sc.dp.shared_channels).cloned().collect();
    let mut declared = false;
    for pr in &sc.props {
        if let Property::Secrecy { items, .. } = pr {
            e.extend(items.iter().cloned());
            declared = true;
        }
    }
    if !declared {
        for p in &sc.dp.procs {
            for h in &p.hidden {
                e.insert(Term::var(h, p.var_types[h].clone()));
            }
        }
    }
    e
}

/// Checks the adversary preservation theorems on `s → mid` for `secrets`.
pub fn check_adversary_step(
    dp: &Dp,
    cfg: &IntruderConfig,
    secrets: &BTreeSet<Term>,
    s: &DistState,
    mid: &DistState,
) -> Vec<String> {
    let mut v = Vec::new();
    let k0 = Knowledge::of_state(cfg, s);
    let k1 = Knowledge::of_state(cfg, mid);
    let c0 = StateCtx { dp, s, adv: &k0 };
    let c1 = StateCtx { dp, s: mid, adv: &k1 };
    let adv = ADVERSARY;
    let th = &s.theta;
    let open = Term::open();
    let sec_k = holds_secure_k(secrets, adv, &c0).unwrap_or(false);
    if sec_k && !holds_secure_k(secrets, adv, &c1).unwrap_or(false) {
        v.push("secure-key property lost on an adversary step".to_string());
    }
    let sec_c = holds_secure_c(secrets, adv, &c0).unwrap_or(false);
    if sec_c && !holds_secure_c(secrets, adv, &c1).unwrap_or(false) {
        v.push("secure-channel property lost on an adversary step".to_string());
    }
    for e in secrets {
        let g = apply(e, th);
        let single = BTreeSet::from([e.clone()]);
        if *g.ty() == Ty::C && holds_secure_c(&single, adv, &c0).unwrap_or(false) && s.chans.get(&g) != mid.chans.get(&g) {
            v.push(format!("content of secure channel {g} changed on an adversary step"));
        }
        if *g.ty() == Ty::K && sec_k {
            let before = key_inverse(&g, s.content(&open));
            let after = key_inverse(&g, mid.content(&open));
            if before != after {
                v.push(format!("{g}^-1[∘] changed on an adversary step"));
            }
        }
    }
    v
}

fn check_honest_step(dp: &Dp, s: &DistState, n: &DistState, mv: &Move) -> Vec<String> {
    let mut v = Vec::new();
    if !s.theta.domain().all(|x| n.theta.contains(x)) {
        v.push("binding domain shrank".into());
    }
    if !crate::process::channels_ground(n) {
        v.push("channel content mentions an unbound variable".into());
    }
    let (Move::Honest { proc, edge, .. } | Move::Inject { proc, edge, .. }) = mv;
    let agent = apply(&dp.procs[*proc].agent, &s.theta);
    let act = dp.procs[*proc].edges[*edge].action.map(|t| apply(t, &s.theta));
    if !act.terms().iter().all(|t| guard_ok(t, &agent)) {
        v.push(format!("shared term without the actor's agent in {act}"));
    }
    v
}

/// Outcome of checking the properties of a scenario at a state.
#[derive(Clone, Debug, Default)]
pub struct PropCheck {
    pub violation: Option<(String, String)>,
    pub discrepancies: Vec<String>,
}

/// Evaluates every property at `s`.
pub fn check_props(sc: &Scenario, cfg: &IntruderConfig, s: &DistState) -> PropCheck {
    let adv = Knowledge::of_state(cfg, s);
    let ctx = StateCtx { dp: &sc.dp, s, adv: &adv };
    let mut out = PropCheck::default();
    let th = &s.theta;
    for p in &sc.props {
        let bad = match p {
            Property::Secrecy { items, .. } => {
                let h = holds_secure_k(items, ADVERSARY, &ctx).unwrap_or(false);
                let ground: BTreeSet<Term> = items.iter().map(|t| apply(t, th)).collect();
                let mut leaked: Vec<Term> = secret_atoms(&ground).into_iter().filter(|x| adv.derivable(x)).collect();
                leaked.extend(ground.iter().filter(|t| t.is_shared() && adv.derivable(t)).cloned());
                if h && !leaked.is_empty() {
                    out.discrepancies.push(format!(
                        "{}: formula holds but adversary derives {}",
                        p.goal(),
                        leaked.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ")
                    ));
                }
                if !h {
                    let what = if leaked.is_empty() {
                        "a secret occurs outside protecting encryption".to_string()
                    } else {
                        format!(
                            "adversary derives {}",
                            leaked.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ")
                        )
                    };
                    Some(what)
                } else {
                    None
                }
            }
            Property::Integrity { proc, node, eqs, .. } => {
                if s.procs[*proc].at != *node {
                    None
                } else {
                    eqs.iter()
                        .find(|(a, b)| apply(a, th) != apply(b, th))
                        .map(|(a, b)| format!("{} ≠ {}", apply(a, th), apply(b, th)))
                }
            }
            Property::Correspondence { triggers, .. } => triggers.iter().find_map(|t| {
                if s.procs[t.proc].at != t.node {
                    return None;
                }
                let ok = t.witnesses.iter().any(|(w, wn, eqs)| {
                    s.procs[*w].at == *wn && eqs.iter().all(|(a, b)| apply(a, th) == apply(b, th))
                });
                (!ok).then(|| format!("{} reached node {} with no matching partner", sc.dp.procs[t.proc].name, t.node))
            }),
        };
        if let Some(detail) = bad {
            if out.violation.is_none() {
                out.violation = Some((p.goal().to_string(), detail));
            }
        }
    }
    out
}

fn par_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if workers <= 1 || items.len() < 2 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|sc| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| {
                let f = &f;
                sc.spawn(move || c.iter().map(f).collect::<Vec<R>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// Breadth-first exploration of one scenario.
pub fn explore_scenario(sc: Scenario, cfg: &ExploreConfig) -> Result<Search, ExploreError> {
    let mut dp = sc.dp.clone();
    let mut fresh = FreshGen::honest(cfg.seed);
    bind_params(&mut dp, &mut fresh);
    let sc = Scenario { dp, ..sc };
    let s0 = initial_state(&sc.dp, &mut fresh)?;
    let secrets = theorem_secrets(&sc);
    let icfg = &cfg.intruder;
    let mut visited: HashMap<DistState, usize> = HashMap::new();
    visited.insert(canonical(&s0), 0);
    let mut search = Search {
        scenario: sc.clone(),
        nodes: vec![SNode {
            state: s0.clone(),
            parent: None,
            mv: None,
            depth: 0,
        }],
        edges: 0,
        transitions: BTreeSet::new(),
        status: Status::Holds,
        violation: None,
        discrepancies: Vec::new(),
        theorems: TheoremStats::default(),
    };
    let c0 = check_props(&sc, icfg, &s0);
    search.discrepancies.extend(c0.discrepancies);
    if let Some((g, d)) = c0.violation {
        search.status = Status::Violated;
        search.violation = Some((0, g, d));
        return Ok(search);
    }
    let mut frontier = vec![0usize];
    let mut depth = 0;
    while !frontier.is_empty() {
        let expanded: Vec<(Vec<(Move, DistState)>, TheoremStats)> = par_map(&frontier, cfg.workers, |&i| {
            let s = &search.nodes[i].state;
            let succ = successors(&sc.dp, s, icfg);
            let mut st = TheoremStats::default();
            if cfg.check_theorems {
                for (mv, n) in &succ {
                    if let Some(mid) = mid_state(s, mv, n) {
                        st.adversary_edges += 1;
                        for v in check_adversary_step(&sc.dp, icfg, &secrets, s, &mid) {
                            st.violations.push(format!("{}: {v}", sc.name));
                        }
                    } else {
                        st.honest_edges += 1;
                    }
                    for v in check_honest_step(&sc.dp, s, n, mv) {
                        st.violations.push(format!("{}: {v}", sc.name));
                    }
                }
            }
            (succ, st)
        });
        if depth == cfg.max_depth {
            if expanded.iter().any(|(s, _)| !s.is_empty()) {
                search.status = Status::ResourceLimit;
            }
            break;
        }
        let mut next = Vec::new();
        for ((succ, st), &parent) in expanded.into_iter().zip(&frontier) {
            search.theorems.merge(st);
            let pc = search.nodes[parent].state.control();
            for (mv, n) in succ {
                search.edges += 1;
                search.transitions.insert((pc.clone(), n.control()));
                let key = canonical(&n);
                if visited.contains_key(&key) {
                    continue;
                }
                let idx = search.nodes.len();
                visited.insert(key, idx);
                search.nodes.push(SNode {
                    state: n,
                    parent: Some(parent),
                    mv: Some(mv),
                    depth: depth + 1,
                });
                next.push(idx);
            }
        }
        let checks = par_map(&next, cfg.workers, |&i| check_props(&sc, icfg, &search.nodes[i].state));
        for (c, &i) in checks.into_iter().zip(&next) {
            for d in c.discrepancies {
                if search.discrepancies.len() < 20 {
                    search.discrepancies.push(d);
                }
            }
            if let Some((g, d)) = c.violation {
                search.status = Status::Violated;
                search.violation = Some((i, g, d));
                return Ok(search);
            }
        }
        if search.nodes.len() > cfg.max_states {
            search.status = Status::ResourceLimit;
            break;
        }
        frontier = next;
        depth += 1;
    }
    Ok(search)
}

impl Search {
    /// Node indices from the initial state to `idx`.
    pub fn path(&self, idx: usize) -> Vec<usize> {
        let mut p = vec![idx];
        let mut cur = idx;
        while let Some(q) = self.nodes[cur].parent {
            p.push(q);
            cur = q;
        }
        p.reverse();
        p
    }

    /// The run ending in node `idx`, adversary writes included.
    pub fn run_to(&self, idx: usize) -> Run {
        let path = self.path(idx);
        let dp = &self.scenario.dp;
        let mut run = Run {
            states: vec![self.nodes[path[0]].state.clone()],
            actors: vec![],
            actions: vec![],
        };
        for w in path.windows(2) {
            let (a, b) = (&self.nodes[w[0]].state, &self.nodes[w[1]]);
            let mv = b.mv.as_ref().expect("non-root node has a move");
            let (proc, edge) = match mv {
                Move::Honest { proc, edge, .. } | Move::Inject { proc, edge, .. } => (*proc, *edge),
            };
            if let (Some(mid), Move::Inject { chan, msg, .. }) = (mid_state(a, mv, &b.state), mv) {
                run.actors.push(None);
                run.actions.push(Action::Send {
                    chan: chan.clone(),
                    msg: msg.clone(),
                });
                run.states.push(mid);
            }
            run.actors.push(Some(proc));
            run.actions
                .push(dp.procs[proc].edges[edge].action.map(|t| apply(t, &b.state.theta)));
            run.states.push(b.state.clone());
        }
        run
    }

    pub fn trace(&self, idx: usize) -> Vec<TraceStep> {
        let run = self.run_to(idx);
        let dp = &self.scenario.dp;
        let mut out = Vec::new();
        for i in 0..run.actions.len() {
            let (a, b) = (&run.states[i], &run.states[i + 1]);
            let binding_delta = b
                .theta
                .iter()
                .filter(|(k, _)| !a.theta.contains(k))
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect();
            let mut chan_delta = BTreeMap::new();
            for (c, ts) in &b.chans {
                let old = a.chans.get(c);
                let added: Vec<String> = ts
                    .iter()
                    .filter(|t| !old.is_some_and(|o| o.contains(*t)))
                    .map(|t| t.to_string())
                    .collect();
                if !added.is_empty() {
                    chan_delta.insert(c.to_string(), added);
                }
            }
            out.push(TraceStep {
                proc: match run.actors[i] {
                    Some(p) => dp.procs[p].name.to_string(),
                    None => ADVERSARY.to_string(),
                },
                action: run.actions[i].to_string(),
                binding_delta,
                chan_delta,
            });
        }
        out
    }

    pub fn control_vectors(&self) -> BTreeSet<Vec<usize>> {
        self.nodes.iter().map(|n| n.state.control()).collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EmitterError {
    #[error("precondition unmet: {0}")]
    PreconditionUnmet(String),
}

/// The earliest honest send in `run` before state `at` whose emitted term
/// contains `enc(k, e)`, given that this term is on the open channel at
/// `at`, `k` is a secret key of `secrets` and the secrets are protected
/// from the adversary there.
pub fn find_emitter(
    dp: &Dp,
    cfg: &IntruderConfig,
    run: &Run,
    at: usize,
    k: &Term,
    e: &Term,
    secrets: &BTreeSet<Term>,
) -> Result<Option<usize>, EmitterError> {
    let s = run
        .states
        .get(at)
        .ok_or_else(|| EmitterError::PreconditionUnmet("index out of range".into()))?;
    let target = Term::enc(k.clone(), e.clone());
    let open = Term::open();
    if !s.content(&open).any(|t| t.contains(&target)) {
        return Err(EmitterError::PreconditionUnmet(format!("{target} is not on the open channel")));
    }
    let keys: BTreeSet<Term> = secrets.iter().map(|t| apply(t, &s.theta)).filter(|t| *t.ty() == Ty::K).collect();
    if !keys.contains(k) {
        return Err(EmitterError::PreconditionUnmet(format!("{k} is not a secret key")));
    }
    let adv = Knowledge::of_state(cfg, s);
    let ctx = StateCtx { dp, s, adv: &adv };
    if !holds_secure_k(secrets, ADVERSARY, &ctx).unwrap_or(false) {
        return Err(EmitterError::PreconditionUnmet("secrets are not protected".into()));
    }
    for j in 0..at.min(run.actions.len()) {
        if run.actors[j].is_none() {
            continue;
        }
        if let Action::Send { msg, .. } = &run.actions[j] {
            if msg.contains(&target) {
                return Ok(Some(j));
            }
        }
    }
    Ok(None)
}

/// Qualifying points of a run: state index, key and payload of every
/// encryption under a secret key on the open channel while the secrets are
/// protected.
pub fn emitter_points(
    dp: &Dp,
    cfg: &IntruderConfig,
    run: &Run,
    secrets: &BTreeSet<Term>,
) -> Vec<(usize, Term, Term)> {
    let mut out = Vec::new();
    let open = Term::open();
    for (i, s) in run.states.iter().enumerate() {
        let keys: BTreeSet<Term> = secrets.iter().map(|t| apply(t, &s.theta)).filter(|t| *t.ty() == Ty::K).collect();
        let mut encs = BTreeSet::new();
        for t in s.content(&open) {
            t.visit(&mut |u| {
                if let Some((k, e)) = u.as_enc() {
                    if keys.contains(k) {
                        encs.insert((k.clone(), e.clone()));
                    }
                }
            });
        }
        if encs.is_empty() {
            continue;
        }
        let adv = Knowledge::of_state(cfg, s);
        let ctx = StateCtx { dp, s, adv: &adv };
        if !holds_secure_k(secrets, ADVERSARY, &ctx).unwrap_or(false) {
            continue;
        }
        for (k, e) in encs {
            out.push((i, k, e));
        }
    }
    out
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct ScenarioReport {
    pub name: String,
    pub status: Status,
    pub states: usize,
    pub edges: u64,
}

/// Verdict of a bounded exploration.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct Verdict {
    pub status: Status,
    pub states: usize,
    pub edges: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub property: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Vec<TraceStep>>,
    pub bounds: ExploreConfig,
    pub scenarios: Vec<ScenarioReport>,
    pub discrepancies: Vec<String>,
}

/// Explores every scenario of `spec`, stopping at the first violation.
pub fn explore(spec: &ProtocolSpec, cfg: &ExploreConfig) -> Result<(Verdict, Vec<Search>), ExploreError> {
    let mut searches = Vec::new();
    let mut verdict = Verdict {
        status: Status::Holds,
        states: 0,
        edges: 0,
        property: None,
        detail: None,
        scenario: None,
        counterexample: None,
        bounds: cfg.clone(),
        scenarios: Vec::new(),
        discrepancies: Vec::new(),
    };
    for sc in scenarios(spec, cfg)? {
        let s = explore_scenario(sc, cfg)?;
        verdict.states += s.nodes.len();
        verdict.edges += s.edges;
        verdict.discrepancies.extend(s.discrepancies.iter().cloned());
        verdict.scenarios.push(ScenarioReport {
            name: s.scenario.name.clone(),
            status: s.status,
            states: s.nodes.len(),
            edges: s.edges,
        });
        match s.status {
            Status::Violated => {
                let (i, g, d) = s.violation.clone().expect("violation recorded");
                verdict.status = Status::Violated;
                verdict.property = Some(g);
                verdict.detail = Some(d);
                verdict.scenario = Some(s.scenario.name.clone());
                verdict.counterexample = Some(s.trace(i));
                searches.push(s);
                return Ok((verdict, searches));
            }
            Status::ResourceLimit => verdict.status = Status::ResourceLimit,
            Status::Holds => {}
        }
        searches.push(s);
    }
    Ok((verdict, searches))
}
