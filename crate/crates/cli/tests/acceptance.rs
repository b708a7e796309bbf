//! Acceptance run: one PASS/FAIL line per criterion.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cpverif::check::check_spec;
use cpverif::corpus;
use cpverif::explore::{emitter_points, explore, find_emitter, theorem_secrets, ExploreConfig, Search, Status};
use cpverif::intruder::{IntruderConfig, Knowledge};
use cpverif::logic::holds;
use cpverif::process::StateCtx;
use cpverif::term::{apply, kind_le, match_template, subterm, Binding, Term, Ty};
use cpverif::tg::{analyze, Analysis, NodeFact};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($c:expr, $($m:tt)*) => {
        if !$c {
            return Err(format!($($m)*));
        }
    };
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cpverif"))
}

fn analysis(name: &str) -> Analysis {
    let (dp, _) = corpus::load(name).unwrap().single_dp();
    analyze(&dp).unwrap()
}

fn agent(n: &str) -> Term {
    Term::agent(n)
}

fn v(n: &str, ty: Ty) -> Term {
    Term::var(n, ty)
}

fn is_chain(a: &Analysis, labels: &[&str]) -> bool {
    a.reduced.labels() == labels
        && a.reduced.edges.len() == labels.len() - 1
        && a.reduced.edges.iter().all(|e| e.to == e.from + 1)
}

fn within(t: Instant, limit: Duration) -> Outcome {
    let el = t.elapsed();
    if el < limit {
        Ok(format!("{el:.2?}"))
    } else {
        Err(format!("took {el:.2?}"))
    }
}

fn c1() -> Outcome {
    let t = Instant::now();
    let a = analysis("p1");
    ensure!(a.full.nodes.len() == 4, "full graph has {} nodes", a.full.nodes.len());
    let marked = a.full.marked_edges();
    ensure!(marked.len() == 1, "{} marked edges", marked.len());
    let e = &a.full.edges[marked[0]];
    let c = Term::shared_channel(vec![agent("A"), agent("B")]);
    ensure!(
        a.full.label(e.from) == "A0B0"
            && a.full.label(e.to) == "A0B1"
            && matches!(&e.action, cpverif::process::Action::Recv { chan, pat } if *chan == c && *pat == v("y", Ty::M)),
        "wrong marked edge"
    );
    ensure!(is_chain(&a, &["A0B0", "A1B0", "A1B1"]), "reduced graph {:?}", a.reduced.labels());
    ensure!(a.fact("A1B1").unwrap().entails_eq(&v("x", Ty::M), &v("y", Ty::M)), "x=y not entailed");
    within(t, Duration::from_secs(1))
}

fn key_bound(f: &NodeFact, k: &Term) -> Option<(BTreeSet<Term>, Option<BTreeSet<Term>>)> {
    f.key_bounds.get(k).map(|b| (b.lo.clone(), b.hi.clone()))
}

fn exactly(f: &NodeFact, k: &Term, items: &[Term]) -> bool {
    let want: BTreeSet<Term> = items.iter().cloned().collect();
    key_bound(f, k) == Some((want.clone(), Some(want)))
}

fn c2() -> Outcome {
    let t = Instant::now();
    let a = analysis("p2");
    ensure!(is_chain(&a, &["A0B0", "A1B0", "A1B1"]), "reduced graph {:?}", a.reduced.labels());
    let kab = Term::shared_key(vec![agent("A"), agent("B")]);
    ensure!(exactly(a.fact("A1B0").unwrap(), &kab, &[v("x", Ty::M)]), "k_AB^-1[∘] at A1B0 is not {{x}}");
    ensure!(a.fact("A1B1").unwrap().entails_eq(&v("x", Ty::M), &v("y", Ty::M)), "x=y not entailed");
    within(t, Duration::from_secs(1))
}

/// Control vectors reachable by honest steps alone, by depth-first search.
fn brute_force_controls(name: &str) -> BTreeSet<Vec<usize>> {
    use cpverif::process::{enabled, fire_unchecked, initial_state};
    let (mut dp, _) = corpus::load(name).unwrap().single_dp();
    let mut f = cpverif::term::FreshGen::honest(0);
    cpverif::explore::bind_params(&mut dp, &mut f);
    let s0 = initial_state(&dp, &mut f).unwrap();
    let mut out = BTreeSet::new();
    let mut stack = vec![s0];
    while let Some(s) = stack.pop() {
        if !out.insert(s.control()) {
            continue;
        }
        for pi in 0..dp.procs.len() {
            for (ei, th) in enabled(&dp, &s, pi) {
                stack.push(fire_unchecked(&dp, &s, pi, ei, &th));
            }
        }
    }
    out
}

const P3_REDUCED: [&str; 10] = [
    "A0J0B0", "A1J0B0", "A1J1B0", "A1J2B0", "A1J2B1", "A2J0B0", "A2J1B0", "A2J2B0", "A2J2B1", "A2J2B2",
];

fn c3() -> Outcome {
    let t = Instant::now();
    let a = analysis("p3");
    ensure!(a.full.nodes.len() == 27, "full graph has {} nodes", a.full.nodes.len());
    let first: BTreeSet<String> = a.rounds[0].iter().cloned().collect();
    let upper: BTreeSet<String> = a.full.labels().into_iter().filter(|l| l.starts_with("A0") && l != "A0J0B0").collect();
    ensure!(first == upper && first.len() == 8, "first round removed {first:?}");
    ensure!(a.reduced.labels() == P3_REDUCED, "reduced graph {:?}", a.reduced.labels());
    let oracle: BTreeSet<Vec<usize>> = brute_force_controls("p3");
    let tg: BTreeSet<Vec<usize>> = a.reduced.nodes.iter().map(|n| n.at.clone()).collect();
    ensure!(oracle == tg, "brute-force reachability gives {} nodes", oracle.len());
    ensure!(
        a.fact("A1J1B0").unwrap().entails_eq(&v("u", Ty::C), &v("cbar", Ty::C)),
        "A1J1B0 lacks u = cbar"
    );
    ensure!(a.fact("A2J2B2").unwrap().entails_eq(&v("x", Ty::M), &v("y", Ty::M)), "x=y not entailed");
    within(t, Duration::from_secs(2))
}

fn c4() -> Outcome {
    let t = Instant::now();
    let a = analysis("p4");
    ensure!(a.reduced.labels() == P3_REDUCED, "reduced graph {:?}", a.reduced.labels());
    let kaj = Term::shared_key(vec![agent("A"), agent("J")]);
    let kbj = Term::shared_key(vec![agent("B"), agent("J")]);
    let (kbar, u, vv, x, y) = (v("kbar", Ty::K), v("u", Ty::K), v("v", Ty::K), v("x", Ty::M), v("y", Ty::M));
    let f = |l: &str| a.fact(l).unwrap();
    let mut checks: Vec<(&str, bool)> = Vec::new();
    let base = |n: &NodeFact, kbar_val: &[Term]| {
        exactly(n, &kaj, std::slice::from_ref(&kbar)) && exactly(n, &kbj, &[]) && exactly(n, &kbar, kbar_val)
    };
    checks.push(("A1J0B0", base(f("A1J0B0"), &[])));
    checks.push(("A2J0B0", base(f("A2J0B0"), std::slice::from_ref(&x))));
    checks.push(("A1J1B0", base(f("A1J1B0"), &[]) && f("A1J1B0").entails_eq(&u, &kbar)));
    checks.push(("A2J1B0", exactly(f("A2J1B0"), &kbar, std::slice::from_ref(&x)) && f("A2J1B0").entails_eq(&u, &kbar)));
    checks.push(("A1J2B0", exactly(f("A1J2B0"), &kbj, std::slice::from_ref(&u)) && f("A1J2B0").entails_eq(&u, &kbar)));
    checks.push((
        "A1J2B1",
        exactly(f("A1J2B1"), &kbj, std::slice::from_ref(&u)) && f("A1J2B1").entails_eq(&u, &kbar) && f("A1J2B1").entails_eq(&vv, &u),
    ));
    checks.push((
        "A2J2B0",
        exactly(f("A2J2B0"), &kbj, std::slice::from_ref(&u))
            && exactly(f("A2J2B0"), &kbar, std::slice::from_ref(&x))
            && f("A2J2B0").entails_eq(&u, &kbar),
    ));
    checks.push((
        "A2J2B1",
        exactly(f("A2J2B1"), &kbj, std::slice::from_ref(&u))
            && exactly(f("A2J2B1"), &kbar, std::slice::from_ref(&x))
            && f("A2J2B1").entails_eq(&u, &kbar)
            && f("A2J2B1").entails_eq(&vv, &u),
    ));
    checks.push(("A2J2B2", f("A2J2B2").entails_eq(&x, &y)));
    let bad: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(l, _)| *l).collect();
    ensure!(bad.is_empty(), "statements fail at {bad:?}");
    let (r, _) = check_spec(&corpus::load("p4").unwrap()).unwrap();
    ensure!(r.status == "holds", "goals of p4 do not hold");
    within(t, Duration::from_secs(2)).map(|d| format!("9/9 statements, {d}"))
}

fn workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

struct Bounded {
    yahalom: Vec<(usize, Vec<Search>, Status, Duration)>,
    unlimited: (Vec<Search>, Status, Duration),
}

fn bounded() -> Bounded {
    let y = corpus::load("yahalom").unwrap();
    let mut yahalom = Vec::new();
    for sessions in [1, 2] {
        let cfg = ExploreConfig {
            sessions,
            workers: workers(),
            check_theorems: true,
            ..Default::default()
        };
        let t = Instant::now();
        let (v, ss) = explore(&y, &cfg).unwrap();
        yahalom.push((sessions, ss, v.status, t.elapsed()));
    }
    let cfg = ExploreConfig {
        check_theorems: true,
        ..Default::default()
    };
    let t = Instant::now();
    let (v, ss) = explore(&corpus::load("unlimited").unwrap(), &cfg).unwrap();
    Bounded {
        yahalom,
        unlimited: (ss, v.status, t.elapsed()),
    }
}

fn c5(b: &Bounded) -> Outcome {
    let mut total = Duration::ZERO;
    let mut desc = Vec::new();
    for (sessions, ss, status, d) in &b.yahalom {
        total += *d;
        ensure!(*status == Status::Holds, "{sessions} session(s): {status:?}");
        ensure!(
            ss.iter().any(|s| s.scenario.name.starts_with("self") && s.scenario.name.contains("(#A→#A)")),
            "no self-session scenario at {sessions}"
        );
        let goals: BTreeSet<String> = ss[0].scenario.props.iter().map(|p| p.goal().to_string()).collect();
        ensure!(goals.len() == 3, "goals {goals:?}");
        let states: usize = ss.iter().map(|s| s.nodes.len()).sum();
        desc.push(format!("{sessions}s: {states} states"));
    }
    ensure!(total <= Duration::from_secs(300), "took {total:.2?}");
    Ok(format!("{}, {total:.2?}", desc.join(", ")))
}

fn c6(b: &Bounded) -> Outcome {
    let (ss, status, d) = &b.unlimited;
    ensure!(*status == Status::Holds, "{status:?}");
    let goals: Vec<String> = ss[0].scenario.props.iter().map(|p| p.goal().to_string()).collect();
    ensure!(goals.len() == 2, "goals {goals:?}");
    ensure!(*d <= Duration::from_secs(300), "took {d:.2?}");
    Ok(format!("{} states, {d:.2?}", ss.iter().map(|s| s.nodes.len()).sum::<usize>()))
}

fn c7a(b: &Bounded) -> Outcome {
    let mut edges = 0;
    let mut violations = Vec::new();
    let all = b.yahalom.iter().flat_map(|(_, ss, _, _)| ss).chain(&b.unlimited.0);
    for s in all {
        edges += s.theorems.adversary_edges;
        violations.extend(s.theorems.violations.iter().cloned());
    }
    ensure!(violations.is_empty(), "{} violations, first: {}", violations.len(), violations[0]);
    ensure!(edges >= 10_000, "only {edges} adversary transitions");
    Ok(format!("{edges} adversary transitions"))
}

fn c7b(b: &Bounded) -> Outcome {
    let cfg = IntruderConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut points, mut found) = (0usize, 0usize);
    let all = b.yahalom.iter().flat_map(|(_, ss, _, _)| ss).chain(&b.unlimited.0);
    for s in all {
        let e = theorem_secrets(&s.scenario);
        let picks: Vec<usize> = if s.nodes.len() <= 200 {
            (0..s.nodes.len()).collect()
        } else {
            (0..200).map(|_| rng.gen_range(0..s.nodes.len())).collect()
        };
        for i in picks {
            let run = s.run_to(i);
            let last = run.states.len() - 1;
            for (at, k, m) in emitter_points(&s.scenario.dp, &cfg, &run, &e) {
                if at != last {
                    continue;
                }
                points += 1;
                if let Ok(Some(_)) = find_emitter(&s.scenario.dp, &cfg, &run, at, &k, &m, &e) {
                    found += 1;
                }
            }
        }
    }
    ensure!(points > 0, "no qualifying points");
    ensure!(found == points, "{found}/{points} emitters found");
    Ok(format!("{found}/{points} points"))
}

fn random_term(rng: &mut ChaCha8Rng, depth: u32, vars: bool) -> Term {
    let leaves: Vec<Term> = {
        let mut l = vec![
            agent("A"),
            agent("B"),
            Term::con("n1", Ty::N),
            Term::con("n2", Ty::N),
            Term::con("k1", Ty::K),
            Term::con("m1", Ty::M),
        ];
        if vars {
            l.extend([v("x", Ty::N), v("y", Ty::K), v("z", Ty::M), v("w", Ty::A)]);
        }
        l
    };
    if depth == 0 || rng.gen_bool(0.3) {
        return leaves[rng.gen_range(0..leaves.len())].clone();
    }
    match rng.gen_range(0..3) {
        0 => {
            let n = rng.gen_range(2..4);
            Term::tuple((0..n).map(|_| random_term(rng, depth - 1, vars)).collect())
        }
        1 => {
            let k = match rng.gen_range(0..3) {
                0 => Term::con("k1", Ty::K),
                1 if vars => v("y", Ty::K),
                _ => Term::shared_key(vec![if vars && rng.gen_bool(0.5) { v("w", Ty::A) } else { agent("A") }, agent("J")]),
            };
            Term::enc(k, random_term(rng, depth - 1, vars))
        }
        _ => Term::shared_key(vec![agent("B"), agent("J")]),
    }
}

/// Every binding of the pattern's free variables to subterms of the target
/// that reproduces the target.
fn brute_force_match(p: &Term, t: &Term, rigid: &BTreeSet<cpverif::Sym>) -> Vec<Binding> {
    let vars: Vec<Term> = p.var_terms().into_iter().filter(|x| !rigid.contains(x.var_name().unwrap())).collect();
    let universe: Vec<Term> = t.subterms();
    assert!(universe.len() <= 200);
    let mut out = Vec::new();
    let mut idx = vec![0usize; vars.len()];
    loop {
        let mut b = Binding::id();
        let mut ok = true;
        for (x, &i) in vars.iter().zip(&idx) {
            if !kind_le(universe[i].ty(), x.ty()) {
                ok = false;
                break;
            }
            b.insert_unchecked(x.var_name().unwrap().clone(), universe[i].clone());
        }
        if ok && apply(p, &b) == *t {
            out.push(b);
        }
        let mut j = 0;
        loop {
            if j == idx.len() {
                return out;
            }
            idx[j] += 1;
            if idx[j] < universe.len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

fn c7c() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut n, mut positive) = (0, 0);
    while n < 1500 {
        let p = random_term(&mut rng, 3, true);
        let target = if rng.gen_bool(0.6) {
            let mut th = Binding::id();
            for x in p.var_terms() {
                let val = loop {
                    let c = random_term(&mut rng, 1, false);
                    if kind_le(c.ty(), x.ty()) {
                        break c;
                    }
                };
                th.insert_unchecked(x.var_name().unwrap().clone(), val);
            }
            apply(&p, &th)
        } else {
            random_term(&mut rng, 3, false)
        };
        if target.subterms().len() > 200 {
            continue;
        }
        let rigid: BTreeSet<cpverif::Sym> = if rng.gen_bool(0.2) {
            p.vars().into_iter().take(1).collect()
        } else {
            BTreeSet::new()
        };
        let fast = match_template(&p, &target, &rigid);
        let slow = brute_force_match(&p, &target, &rigid);
        ensure!(fast.is_some() == !slow.is_empty(), "disagreement on {p} vs {target}");
        if let Some(th) = fast {
            positive += 1;
            let free: BTreeSet<cpverif::Sym> = p.vars().difference(&rigid).cloned().collect();
            ensure!(slow.contains(&th.restrict(&free)), "binding for {p} vs {target} not among brute-force solutions");
        }
        n += 1;
    }
    Ok(format!("{n} instances, {positive} matches"))
}

fn c7d() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut pairs = 0usize;
    for _ in 0..1500 {
        let e = random_term(&mut rng, 4, true);
        let occ = e.occurrences();
        for (p1, t1) in &occ {
            for (p2, t2) in &occ {
                if p1 == p2 {
                    continue;
                }
                pairs += 1;
                let nested = (p2.starts_with(p1) && subterm(t2, t1)) || (p1.starts_with(p2) && subterm(t1, t2));
                let disjoint = !p1.starts_with(p2)
                    && !p2.starts_with(p1)
                    && occ.iter().all(|(q, _)| !(q.starts_with(p1) && q.starts_with(p2)));
                ensure!(nested != disjoint, "trichotomy fails in {e} at {p1:?}, {p2:?}");
            }
        }
    }
    Ok(format!("1500 terms, {pairs} occurrence pairs"))
}

fn c8() -> Outcome {
    let cfg = IntruderConfig::default();
    let mut states = 0;
    for name in ["p1", "p2", "p3", "p4"] {
        let a = analysis(name);
        let (v, ss) = explore(&corpus::load(name).unwrap(), &ExploreConfig::default()).unwrap();
        ensure!(v.status == Status::Holds, "{name}: {:?}", v.status);
        let visited: BTreeSet<Vec<usize>> = ss.iter().flat_map(|s| s.control_vectors()).collect();
        let tg: BTreeSet<Vec<usize>> = a.reduced.nodes.iter().map(|n| n.at.clone()).collect();
        ensure!(visited == tg, "{name}: visited {} control vectors, graph has {}", visited.len(), tg.len());
        for s in &ss {
            for n in &s.nodes {
                let i = a.reduced.nodes.iter().position(|x| x.at == n.state.control()).unwrap();
                let adv = Knowledge::of_state(&cfg, &n.state);
                let ctx = StateCtx { dp: &s.scenario.dp, s: &n.state, adv: &adv };
                ensure!(
                    holds(&a.facts[i].to_formula(), &ctx) == Ok(true),
                    "{name}: fact of {} fails in a visited state",
                    a.reduced.label(i)
                );
                states += 1;
            }
            ensure!(s.discrepancies.is_empty(), "{name}: {:?}", s.discrepancies);
        }
    }
    Ok(format!("{states} states checked"))
}

fn c9() -> Outcome {
    let (v, _) = explore(&corpus::load("wmf-broken").unwrap(), &ExploreConfig::default()).unwrap();
    ensure!(v.status == Status::Violated, "status {:?}", v.status);
    ensure!(v.property.as_deref() == Some("secrecy"), "property {:?}", v.property);
    let trace = v.counterexample.unwrap();
    ensure!(trace.len() <= 4, "trace has {} steps", trace.len());
    let (r, a) = check_spec(&corpus::load("wmf-broken").unwrap()).unwrap();
    let leak = a.findings.iter().find(|f| f.kind == "SecrecyLeak");
    ensure!(leak.is_some(), "no SecrecyLeak finding");
    let leak = leak.unwrap();
    ensure!(
        leak.from == "A0J0B0" && leak.to == "A1J0B0" && leak.actor == trace[0].proc,
        "finding at {} -> {} by {}",
        leak.from,
        leak.to,
        leak.actor
    );
    ensure!(r.status == "violated", "graph check status {}", r.status);
    let out = bin().args(["explore", "--corpus", "wmf-broken", "--sessions", "1"]).output().unwrap();
    ensure!(out.status.code() == Some(1), "exit code {:?}", out.status.code());
    ensure!(String::from_utf8_lossy(&out.stdout).contains("\"chanDelta\""), "no trace printed");
    Ok(format!("trace of {} step(s), exit 1", trace.len()))
}

fn c10() -> Outcome {
    let runs: [&[&str]; 4] = [
        &["explore", "--corpus", "yahalom", "--json", "--seed", "5"],
        &["explore", "--corpus", "wmf-broken", "--json", "--seed", "3"],
        &["tg", "--corpus", "p4", "--facts"],
        &["check", "--corpus", "p4", "--json"],
    ];
    for args in runs {
        let a = bin().args(args).output().unwrap().stdout;
        let b = bin().args(args).output().unwrap().stdout;
        ensure!(!a.is_empty() && a == b, "{} differs between runs", args.join(" "));
    }
    let one = bin().args(["explore", "--corpus", "yahalom", "--json", "--seed", "5", "--workers", "1"]).output().unwrap();
    let four = bin().args(["explore", "--corpus", "yahalom", "--json", "--seed", "5", "--workers", "4"]).output().unwrap();
    ensure!(one.stdout == four.stdout, "worker count changes output");
    Ok(format!("{} commands byte-identical", runs.len() + 1))
}

fn main() {
    let mut failed = 0;
    let mut report = |id: &str, what: &str, f: &dyn Fn() -> Outcome| {
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        match r {
            Ok(d) => println!("PASS {id:>3} {what} ({d})"),
            Err(d) => {
                failed += 1;
                println!("FAIL {id:>3} {what}: {d}");
            }
        }
    };
    report("1", "p1 graph, marked edge, reduction, x=y", &c1);
    report("2", "p2 reduction and key content", &c2);
    report("3", "p3 reduction rounds, node set, facts", &c3);
    report("4", "p4 node facts", &c4);
    let b = bounded();
    report("5", "yahalom secrecy and both correspondences at 1 and 2 sessions", &|| c5(&b));
    report("6", "unlimited protocol secrecy and integrity at 1 session", &|| c6(&b));
    report("7a", "preservation under adversary steps", &|| c7a(&b));
    report("7b", "emitter existence", &|| c7b(&b));
    report("7c", "matching agrees with brute force", &c7c);
    report("7d", "subterm trichotomy", &c7d);
    report("8", "explorer agrees with reduced graphs and their facts", &c8);
    report("9", "broken variant leaks", &c9);
    report("10", "deterministic output", &c10);
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
