//! Congruence closure over a finite term universe.
//!
//! Function symbols other than `decrypt` are free constructors, so equal
//! applications of the same constructor have equal arguments and
//! applications of different constructors are never equal. Constants and
//! rigid variables (values fixed at initialization) are pairwise distinct.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::term::{FunSym, Node, Sym, Term};

#[derive(Clone, Debug, Default)]
pub struct Cc {
    terms: Vec<Term>,
    index: HashMap<Term, usize>,
    parent: Vec<usize>,
    best: Vec<usize>,
    rigid: BTreeSet<Sym>,
    inconsistent: bool,
}

fn constructor(f: FunSym) -> bool {
    f != FunSym::Decrypt
}

impl Cc {
    pub fn new() -> Cc {
        Cc::default()
    }

    /// A store in which the named variables are treated like constants.
    pub fn with_rigid(rigid: BTreeSet<Sym>) -> Cc {
        Cc {
            rigid,
            ..Cc::default()
        }
    }

    pub fn rigid(&self) -> &BTreeSet<Sym> {
        &self.rigid
    }

    pub fn is_inconsistent(&self) -> bool {
        self.inconsistent
    }

    pub fn set_inconsistent(&mut self) {
        self.inconsistent = true;
    }

    fn find(&self, mut i: usize) -> usize {
        while self.parent[i] != i {
            i = self.parent[i];
        }
        i
    }

    fn find_mut(&mut self, i: usize) -> usize {
        let r = self.find(i);
        let mut j = i;
        while self.parent[j] != r {
            let n = self.parent[j];
            self.parent[j] = r;
            j = n;
        }
        r
    }

    fn better(&self, a: usize, b: usize) -> usize {
        let (ta, tb) = (&self.terms[a], &self.terms[b]);
        if (ta.size(), ta) <= (tb.size(), tb) {
            a
        } else {
            b
        }
    }

    fn add_raw(&mut self, t: &Term) -> usize {
        if let Some(&i) = self.index.get(t) {
            return i;
        }
        for a in t.args() {
            self.add_raw(a);
        }
        let i = self.terms.len();
        self.terms.push(t.clone());
        self.index.insert(t.clone(), i);
        self.parent.push(i);
        self.best.push(i);
        i
    }

    /// Registers `t` and its subterms.
    pub fn add(&mut self, t: &Term) -> usize {
        let known = self.index.contains_key(t);
        let i = self.add_raw(t);
        if !known {
            self.close();
        }
        i
    }

    fn union_ids(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find_mut(a), self.find_mut(b));
        if ra == rb {
            return false;
        }
        let best = self.better(self.best[ra], self.best[rb]);
        let (root, child) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[child] = root;
        self.best[root] = best;
        true
    }

    /// Asserts `a = b`.
    pub fn union(&mut self, a: &Term, b: &Term) {
        let ia = self.add_raw(a);
        let ib = self.add_raw(b);
        self.union_ids(ia, ib);
        self.close();
    }

    fn is_rigid_atom(&self, t: &Term) -> bool {
        match t.node() {
            Node::Con(_) => true,
            Node::Var(s) => self.rigid.contains(s),
            Node::App(..) => false,
        }
    }

    fn close(&mut self) {
        loop {
            let mut changed = false;
            let mut sigs: HashMap<(FunSym, Vec<usize>), usize> = HashMap::new();
            for i in 0..self.terms.len() {
                if let Node::App(f, args) = self.terms[i].node() {
                    let f = *f;
                    let key: Vec<usize> = args.iter().map(|a| self.find(self.index[a])).collect();
                    match sigs.get(&(f, key.clone())) {
                        Some(&j) => changed |= self.union_ids(i, j),
                        None => {
                            sigs.insert((f, key), i);
                        }
                    }
                }
            }
            let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for i in 0..self.terms.len() {
                by_class.entry(self.find(i)).or_default().push(i);
            }
            let mut pending = Vec::new();
            for members in by_class.values() {
                let mut rigid_atom: Option<&Term> = None;
                let mut ctor: Option<&Term> = None;
                for &m in members {
                    let t = &self.terms[m];
                    if self.is_rigid_atom(t) {
                        if rigid_atom.is_some_and(|r| r != t) {
                            self.inconsistent = true;
                        }
                        rigid_atom = Some(t);
                    } else if let Node::App(f, args) = t.node() {
                        if !constructor(*f) {
                            continue;
                        }
                        if let Some(c) = ctor {
                            let (g, cargs) = match c.node() {
                                Node::App(g, a) => (*g, a),
                                _ => unreachable!(),
                            };
                            if g != *f || cargs.len() != args.len() {
                                self.inconsistent = true;
                            } else {
                                for (x, y) in cargs.iter().zip(args) {
                                    pending.push((self.index[x], self.index[y]));
                                }
                            }
                        } else {
                            ctor = Some(t);
                        }
                    }
                }
                if rigid_atom.is_some() && ctor.is_some() {
                    self.inconsistent = true;
                }
            }
            for (x, y) in pending {
                changed |= self.union_ids(x, y);
            }
            if !changed {
                break;
            }
        }
    }

    pub fn contains(&self, t: &Term) -> bool {
        self.index.contains_key(t)
    }

    /// Whether `a = b` follows. An inconsistent store proves everything.
    pub fn equiv(&self, a: &Term, b: &Term) -> bool {
        if self.inconsistent || a == b {
            return true;
        }
        match (self.index.get(a), self.index.get(b)) {
            (Some(&i), Some(&j)) => self.find(i) == self.find(j),
            _ => {
                let mut c = self.clone();
                let i = c.add(a);
                let j = c.add(b);
                c.inconsistent || c.find(i) == c.find(j)
            }
        }
    }

    /// Representative of `t`'s class; unregistered terms are normalized
    /// argument-wise.
    pub fn rep(&self, t: &Term) -> Term {
        if let Some(&i) = self.index.get(t) {
            return self.terms[self.best[self.find(i)]].clone();
        }
        match t.node() {
            Node::App(f, args) => {
                let new = Term::app(*f, args.iter().map(|a| self.rep(a)).collect())
                    .expect("representatives keep kinds");
                match self.index.get(&new) {
                    Some(&i) => self.terms[self.best[self.find(i)]].clone(),
                    None => new,
                }
            }
            _ => t.clone(),
        }
    }

    /// Non-trivial classes, each sorted, representative first.
    pub fn classes(&self) -> Vec<Vec<Term>> {
        let mut by: BTreeMap<usize, Vec<Term>> = BTreeMap::new();
        for i in 0..self.terms.len() {
            by.entry(self.find(i)).or_default().push(self.terms[i].clone());
        }
        let mut out: Vec<Vec<Term>> = by
            .into_iter()
            .filter(|(_, v)| v.len() > 1)
            .map(|(r, mut v)| {
                let rep = self.terms[self.best[r]].clone();
                v.retain(|t| *t != rep);
                v.sort_by(|a, b| (a.size(), a).cmp(&(b.size(), b)));
                v.insert(0, rep);
                v
            })
            .collect();
        out.sort();
        out
    }

    /// `member = representative` for every non-representative member, omitting
    /// equalities that already follow by congruence from smaller ones.
    pub fn pairs(&self) -> Vec<(Term, Term)> {
        let mut base = Cc::with_rigid(self.rigid.clone());
        let mut out = Vec::new();
        let mut all: Vec<(Term, Term)> = Vec::new();
        for class in self.classes() {
            let rep = class[0].clone();
            for m in &class[1..] {
                all.push((m.clone(), rep.clone()));
            }
        }
        all.sort_by(|a, b| (a.0.size(), &a.0).cmp(&(b.0.size(), &b.0)));
        for (m, r) in all {
            if !base.equiv(&m, &r) {
                base.union(&m, &r);
                out.push((m, r));
            }
        }
        out
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Whether `a` and `b` denote different values in every model.
    pub fn distinct(&self, a: &Term, b: &Term) -> bool {
        if self.inconsistent {
            return true;
        }
        let mut c = self.clone();
        c.add(a);
        c.add(b);
        c.distinct_rec(a, b, 8)
    }

    fn class_of(&self, t: &Term) -> Vec<Term> {
        match self.index.get(t) {
            Some(&i) => {
                let r = self.find(i);
                (0..self.terms.len())
                    .filter(|&j| self.find(j) == r)
                    .map(|j| self.terms[j].clone())
                    .collect()
            }
            None => vec![t.clone()],
        }
    }

    fn distinct_rec(&self, a: &Term, b: &Term, depth: usize) -> bool {
        if self.equiv(a, b) {
            return false;
        }
        if depth == 0 {
            return false;
        }
        let ca = self.class_of(a);
        let cb = self.class_of(b);
        let atom = |c: &[Term]| c.iter().find(|t| self.is_rigid_atom(t)).cloned();
        let app = |c: &[Term]| {
            c.iter()
                .find(|t| matches!(t.fsym(), Some(f) if constructor(f)))
                .cloned()
        };
        match (atom(&ca), atom(&cb), app(&ca), app(&cb)) {
            (Some(_), Some(_), _, _) => true,
            (Some(_), _, _, Some(_)) | (_, Some(_), Some(_), _) => true,
            (_, _, Some(x), Some(y)) => {
                if x.fsym() != y.fsym() || x.args().len() != y.args().len() {
                    true
                } else {
                    x.args()
                        .iter()
                        .zip(y.args())
                        .any(|(p, q)| self.distinct_rec(p, q, depth - 1))
                }
            }
            _ => false,
        }
    }

    /// Equalities true in both stores.
    pub fn meet(&self, other: &Cc) -> Cc {
        if self.inconsistent {
            return other.clone();
        }
        if other.inconsistent {
            return self.clone();
        }
        let mut a = self.clone();
        let mut b = other.clone();
        let universe: Vec<Term> = {
            let mut s: BTreeSet<Term> = self.terms.iter().cloned().collect();
            s.extend(other.terms.iter().cloned());
            s.into_iter().collect()
        };
        for t in &universe {
            a.add_raw(t);
            b.add_raw(t);
        }
        a.close();
        b.close();
        let mut out = Cc::with_rigid(self.rigid.clone());
        let mut groups: BTreeMap<(usize, usize), Vec<&Term>> = BTreeMap::new();
        for t in &universe {
            let ka = a.find(a.index[t]);
            let kb = b.find(b.index[t]);
            groups.entry((ka, kb)).or_default().push(t);
        }
        for t in &universe {
            out.add_raw(t);
        }
        for g in groups.values() {
            for w in g.windows(2) {
                let (i, j) = (out.index[w[0]], out.index[w[1]]);
                out.union_ids(i, j);
            }
        }
        out.close();
        out
    }
}
