//! The adversary: knowledge, derivability and lazy injection.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::process::DistState;
use crate::term::{adversary_constant, apply, match_template, Binding, FunSym, Node, Term, Ty, DAGGER};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IntruderConfig {
    #[serde(rename = "derivDepth")]
    pub deriv_depth: usize,
    #[serde(rename = "freshBudget")]
    pub fresh_budget: u32,
    /// Whether the adversary holds its own agent name (and so its own
    /// shared keys with the intermediaries).
    pub identity: bool,
}

impl Default for IntruderConfig {
    fn default() -> Self {
        IntruderConfig {
            deriv_depth: 2,
            fresh_budget: 2,
            identity: false,
        }
    }
}

/// What the adversary has read, closed under decomposition.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Knowledge {
    pub base: BTreeSet<Term>,
    pub deriv_depth: usize,
}

impl Knowledge {
    pub fn new(cfg: &IntruderConfig) -> Knowledge {
        let mut base = BTreeSet::new();
        if cfg.identity {
            base.insert(Term::dagger());
        }
        Knowledge {
            base,
            deriv_depth: cfg.deriv_depth,
        }
    }

    /// Knowledge at `s` starting from the initial knowledge of `cfg`.
    pub fn of_state(cfg: &IntruderConfig, s: &DistState) -> Knowledge {
        let mut k = Knowledge::new(cfg);
        k.absorb(s);
        k
    }

    pub fn knows_dagger(&self) -> bool {
        self.base.contains(&Term::dagger())
    }

    /// Channels the adversary can read and write.
    pub fn readable(&self, c: &Term) -> bool {
        c.is_open() || self.derivable(c)
    }

    pub fn add(&mut self, t: Term) {
        if self.base.insert(t) {
            self.close();
        }
    }

    /// Adds the content of every readable channel and closes.
    pub fn absorb(&mut self, s: &DistState) {
        let mut done: BTreeSet<&Term> = BTreeSet::new();
        loop {
            let mut grew = false;
            for (c, content) in &s.chans {
                if done.contains(c) || !self.readable(c) {
                    continue;
                }
                done.insert(c);
                for t in content {
                    grew |= self.base.insert(t.clone());
                }
            }
            if !grew {
                break;
            }
            self.close();
        }
    }

    fn close(&mut self) {
        loop {
            let mut new = Vec::new();
            for t in &self.base {
                match t.node() {
                    Node::App(FunSym::Tuple(_), args) => {
                        new.extend(args.iter().filter(|a| !self.base.contains(*a)).cloned())
                    }
                    Node::App(FunSym::Encrypt, args)
                        if !self.base.contains(&args[1]) && self.derivable(&args[0]) => {
                            new.push(args[1].clone());
                        }
                    _ => {}
                }
            }
            if new.is_empty() {
                break;
            }
            self.base.extend(new);
        }
    }

    pub fn derivable(&self, t: &Term) -> bool {
        self.derivable_at(t, self.deriv_depth)
    }

    pub fn derivable_at(&self, t: &Term, d: usize) -> bool {
        if self.base.contains(t) {
            return true;
        }
        if d == 0 {
            return false;
        }
        match t.node() {
            Node::App(FunSym::Tuple(_), args) | Node::App(FunSym::Encrypt, args) => {
                args.iter().all(|a| self.derivable_at(a, d - 1))
            }
            Node::App(FunSym::SharedKey(_), args) | Node::App(FunSym::SharedChannel(_), args) => {
                args.contains(&Term::dagger()) && args.iter().all(|a| self.derivable_at(a, d - 1))
            }
            _ => false,
        }
    }

    pub fn sorted_terms(&self) -> Vec<String> {
        self.base.iter().map(|t| t.to_string()).collect()
    }
}

/// A way for the adversary to satisfy a receive pattern.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Injection {
    pub binding: Binding,
    /// Adversary value counter after the injection.
    pub fresh_after: u32,
}

/// Bindings of the free variables of `pattern` (already instantiated by the
/// current state) that make it derivable, within the depth and fresh-value
/// bounds. Variables in `rigid` are initialized and must not be bound.
pub fn injections(
    k: &Knowledge,
    pattern: &Term,
    rigid: &BTreeSet<crate::term::Sym>,
    fresh_used: u32,
    cfg: &IntruderConfig,
) -> Vec<Injection> {
    let mut out: BTreeSet<Injection> = BTreeSet::new();
    let start = Injection {
        binding: Binding::id(),
        fresh_after: fresh_used,
    };
    for r in inject(k, pattern, rigid, cfg.deriv_depth, start, cfg) {
        out.insert(r);
    }
    out.into_iter().collect()
}

fn inject(
    k: &Knowledge,
    p: &Term,
    rigid: &BTreeSet<crate::term::Sym>,
    depth: usize,
    acc: Injection,
    cfg: &IntruderConfig,
) -> Vec<Injection> {
    let p = apply(p, &acc.binding);
    let mut out = Vec::new();
    let binder = |t: &Term| matches!(t.var_name(), Some(s) if !rigid.contains(s));
    for t in &k.base {
        if let Some(th) = match_template(&p, t, rigid) {
            let mut b = acc.binding.clone();
            for (x, v) in th.iter() {
                b.insert_unchecked(x.clone(), v.clone());
            }
            out.push(Injection {
                binding: b,
                fresh_after: acc.fresh_after,
            });
        }
    }
    if binder(&p) {
        if matches!(p.ty(), Ty::N | Ty::K | Ty::M) && acc.fresh_after < cfg.fresh_budget {
            let v = adversary_constant(p.ty().clone(), acc.fresh_after as usize);
            let mut b = acc.binding.clone();
            b.insert_unchecked(p.var_name().unwrap().clone(), v);
            out.push(Injection {
                binding: b,
                fresh_after: acc.fresh_after + 1,
            });
        }
        return out;
    }
    if depth == 0 {
        return out;
    }
    match p.node() {
        Node::App(FunSym::Tuple(_), args) | Node::App(FunSym::Encrypt, args) => {
            let mut partial = vec![acc];
            for a in args {
                let mut next = Vec::new();
                for pa in partial {
                    next.extend(inject(k, a, rigid, depth - 1, pa, cfg));
                }
                next.sort();
                next.dedup();
                partial = next;
            }
            out.extend(partial);
        }
        Node::App(FunSym::SharedKey(_), args) | Node::App(FunSym::SharedChannel(_), args) => {
            if !k.knows_dagger() {
                return out;
            }
            let mut partial = vec![acc];
            for a in args {
                let mut next = Vec::new();
                for pa in partial {
                    next.extend(inject(k, a, rigid, depth - 1, pa, cfg));
                }
                next.sort();
                next.dedup();
                partial = next;
            }
            let dagger = Term::agent(DAGGER);
            out.extend(
                partial
                    .into_iter()
                    .filter(|r| apply(&p, &r.binding).args().contains(&dagger)),
            );
        }
        _ => {}
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::Sym;

    fn kn(items: Vec<Term>) -> Knowledge {
        let mut k = Knowledge {
            base: BTreeSet::new(),
            deriv_depth: 2,
        };
        for t in items {
            k.add(t);
        }
        k
    }

    #[test]
    fn tuples_decompose() {
        let a = Term::agent("A");
        let n = Term::con("n_A", Ty::N);
        let k = kn(vec![Term::tuple(vec![a.clone(), n.clone()])]);
        assert!(k.base.contains(&a) && k.base.contains(&n));
    }

    #[test]
    fn shared_key_payload_stays_hidden() {
        let kaj = Term::shared_key(vec![Term::agent("A"), Term::agent("J")]);
        let kbar = Term::con("νkbar#0", Ty::K);
        let k = kn(vec![Term::enc(kaj, kbar.clone())]);
        assert!(!k.base.contains(&kbar));
        assert!(!k.derivable(&Term::enc(kbar, Term::con("n", Ty::N))));
    }

    #[test]
    fn no_injection_under_honest_shared_key() {
        let kab = Term::shared_key(vec![Term::agent("A"), Term::agent("B")]);
        let pat = Term::enc(kab, Term::var("y", Ty::M));
        let k = kn(vec![Term::agent("A"), Term::con("m", Ty::M)]);
        assert!(injections(&k, &pat, &BTreeSet::new(), 0, &IntruderConfig::default()).is_empty());
    }

    #[test]
    fn injections_are_derivable() {
        let k = kn(vec![
            Term::agent("A"),
            Term::con("n0", Ty::N),
            Term::dagger(),
        ]);
        let pat = Term::tuple(vec![Term::var("ai", Ty::A), Term::var("ni", Ty::N)]);
        let inj = injections(&k, &pat, &BTreeSet::<Sym>::new(), 0, &IntruderConfig::default());
        assert!(inj.iter().any(|i| i.binding.get("ai") == Some(&Term::dagger())
            && i.binding.get("ni") == Some(&Term::con("n0", Ty::N))));
        for i in &inj {
            let t = apply(&pat, &i.binding);
            let mut k2 = k.clone();
            for f in 0..i.fresh_after {
                for ty in [Ty::N, Ty::K, Ty::M] {
                    k2.base.insert(adversary_constant(ty, f as usize));
                }
            }
            assert!(k2.derivable(&t), "{t}");
        }
    }
}
