use std::collections::{BTreeSet, HashSet};

use cpverif::corpus;
use cpverif::explore::{
    canonical, check_props, explore, find_emitter, successors, theorem_secrets, EmitterError, ExploreConfig, Search,
};
use cpverif::intruder::{IntruderConfig, Knowledge};
use cpverif::logic::{
    entails, eval_expr, holds, holds_secure_k, key_part, normalize, secret_atoms, secure_occurrence, Expr, Formula,
};
use cpverif::process::{DistState, StateCtx, ADVERSARY};
use cpverif::term::{apply, Term, Ty};
use cpverif::tg::analyze;

fn searches(name: &str) -> Vec<Search> {
    explore(&corpus::load(name).unwrap(), &ExploreConfig::default()).unwrap().1
}

#[test]
fn secure_key_formula_implies_nonderivability() {
    let cfg = IntruderConfig::default();
    let mut checked = 0;
    for name in ["p4", "yahalom", "unlimited"] {
        for s in searches(name) {
            let e = theorem_secrets(&s.scenario);
            for n in &s.nodes {
                let st = &n.state;
                let adv = Knowledge::of_state(&cfg, st);
                let ctx = StateCtx { dp: &s.scenario.dp, s: st, adv: &adv };
                if !holds_secure_k(&e, ADVERSARY, &ctx).unwrap() {
                    continue;
                }
                checked += 1;
                let ground: BTreeSet<Term> = e.iter().map(|t| apply(t, &st.theta)).collect();
                let keys = key_part(&ground);
                for x in secret_atoms(&ground) {
                    assert!(!adv.derivable(&x), "{name}: {x} derivable");
                    for ts in st.chans.values() {
                        for t in ts {
                            assert!(secure_occurrence(&x, t, &keys), "{name}: {x} exposed in {t}");
                        }
                    }
                }
            }
        }
    }
    assert!(checked > 50);
}

#[test]
fn channel_expressions_are_monotone() {
    let cfg = IntruderConfig::default();
    let open = Term::open();
    let extra = Term::enc(
        Term::shared_key(vec![Term::agent("A"), Term::agent("J")]),
        Term::con("extra", Ty::N),
    );
    for s in searches("yahalom") {
        for n in s.nodes.iter().step_by(3) {
            let mut bigger: DistState = n.state.clone();
            bigger.chans.entry(open.clone()).or_default().insert(extra.clone());
            let ka = Knowledge::of_state(&cfg, &n.state);
            let kb = Knowledge::of_state(&cfg, &bigger);
            let a = StateCtx { dp: &s.scenario.dp, s: &n.state, adv: &ka };
            let b = StateCtx { dp: &s.scenario.dp, s: &bigger, adv: &kb };
            let key = Term::shared_key(vec![Term::agent("A"), Term::agent("J")]);
            for e in [Expr::ChanContent(open.clone()), Expr::key_inv(key, Expr::ChanContent(open.clone()))] {
                let x = eval_expr(&e, &a).unwrap().finite().unwrap().clone();
                let y = eval_expr(&e, &b).unwrap().finite().unwrap().clone();
                assert!(x.is_subset(&y));
            }
        }
    }
}

fn tg_cases() -> Vec<(&'static str, cpverif::tg::Analysis, Vec<Search>)> {
    ["p1", "p2", "p3", "p4"]
        .into_iter()
        .map(|n| {
            let (dp, _) = corpus::load(n).unwrap().single_dp();
            (n, analyze(&dp).unwrap(), searches(n))
        })
        .collect()
}

#[test]
fn entailment_and_normalization_are_sound_on_explored_states() {
    let cfg = IntruderConfig::default();
    for (name, a, ss) in tg_cases() {
        for s in &ss {
            for n in &s.nodes {
                let ni = a.reduced.nodes.iter().position(|x| x.at == n.state.control()).unwrap();
                let phi = a.facts[ni].to_formula();
                let adv = Knowledge::of_state(&cfg, &n.state);
                let ctx = StateCtx { dp: &s.scenario.dp, s: &n.state, adv: &adv };
                assert!(holds(&phi, &ctx).unwrap(), "{name} {}", a.reduced.label(ni));
                let norm = normalize(&phi);
                assert_eq!(holds(&norm, &ctx).unwrap(), holds(&phi, &ctx).unwrap());
                for ef in &phi.efs {
                    let psi = Formula::new([ef.clone()]);
                    assert!(entails(&phi, &psi).unwrap());
                    assert!(holds(&psi, &ctx).unwrap());
                }
                for (x, y) in a.facts[ni].eqs.pairs() {
                    let psi = Formula::new([cpverif::logic::EF::term_eq(x, y)]);
                    if entails(&phi, &psi).unwrap() {
                        assert!(holds(&psi, &ctx).unwrap());
                    }
                }
            }
        }
    }
}

#[test]
fn reduced_edges_are_observed_and_facts_grow() {
    for (name, a, ss) in tg_cases() {
        let mut seen = BTreeSet::new();
        for s in &ss {
            seen.extend(s.transitions.iter().cloned());
        }
        for e in &a.reduced.edges {
            let from = &a.facts[e.from];
            let to = &a.facts[e.to];
            assert!(
                seen.contains(&(a.reduced.nodes[e.from].at.clone(), a.reduced.nodes[e.to].at.clone())),
                "{name}: edge not observed"
            );
            for (c, b) in &from.chan_bounds {
                assert!(b.lo.is_subset(&to.chan_bounds[c].lo), "{name}");
            }
            for (k, b) in &from.key_bounds {
                assert!(b.lo.is_subset(&to.key_bounds[k].lo), "{name}");
            }
            for (x, y) in from.eqs.pairs() {
                assert!(to.entails_eq(&x, &y), "{name}");
            }
        }
    }
}

#[test]
fn canonical_representatives_behave_alike() {
    let cfg = IntruderConfig::default();
    for s in searches("yahalom") {
        for n in s.nodes.iter().filter(|n| n.state.adv_fresh > 0) {
            let c = canonical(&n.state);
            let a = check_props(&s.scenario, &cfg, &n.state);
            let b = check_props(&s.scenario, &cfg, &c);
            assert_eq!(a.violation.is_some(), b.violation.is_some());
            assert_eq!(a.discrepancies.len(), b.discrepancies.len());
            let sa: HashSet<DistState> = successors(&s.scenario.dp, &n.state, &cfg)
                .into_iter()
                .map(|(_, x)| canonical(&x))
                .collect();
            let sb: HashSet<DistState> =
                successors(&s.scenario.dp, &c, &cfg).into_iter().map(|(_, x)| canonical(&x)).collect();
            assert_eq!(sa, sb);
        }
    }
}

#[test]
fn emitters_of_server_and_initiator_messages() {
    let cfg = IntruderConfig::default();
    let ss = searches("yahalom");
    let s = &ss[0];
    let dp = &s.scenario.dp;
    let r = dp.proc_index("R1").unwrap();
    let idx = s.nodes.iter().position(|n| n.state.procs[r].at == 3).expect("responder finishes");
    let run = s.run_to(idx);
    let last = run.states.len() - 1;
    let th = &run.states[last].theta;
    let e = theorem_secrets(&s.scenario);
    let b = Term::agent("B");
    let kbj = Term::shared_key(vec![b, Term::agent("J")]);
    let server_msg = Term::tuple(vec![
        th.get("ai@R1").unwrap().clone(),
        th.get("kr@R1").unwrap().clone(),
    ]);
    let j = find_emitter(dp, &cfg, &run, last, &kbj, &server_msg, &e).unwrap().unwrap();
    assert_eq!(&*dp.procs[run.actors[j].unwrap()].name, "J1");
    let k = th.get("kr@R1").unwrap().clone();
    let nr = th.get("nr@R1").unwrap().clone();
    let i = find_emitter(dp, &cfg, &run, last, &k, &nr, &e).unwrap().unwrap();
    let ip = run.actors[i].unwrap();
    assert_eq!(&*dp.procs[ip].name, "I1");
    assert!(matches!(run.actions[i], cpverif::process::Action::Send { .. }));
    assert!(matches!(
        find_emitter(dp, &cfg, &run, 0, &kbj, &server_msg, &e),
        Err(EmitterError::PreconditionUnmet(_))
    ));
}

#[test]
fn same_seed_same_states() {
    let spec = corpus::load("yahalom").unwrap();
    let cfg = ExploreConfig { seed: 11, ..Default::default() };
    let a = explore(&spec, &cfg).unwrap().0;
    let b = explore(&spec, &cfg).unwrap().0;
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
