use super::ast::{Atom, CmpOp, Expr, Interval, StlFormula};
use super::signal::{BoolSignal, Span};
use crate::error::{Error, Result};
use crate::pctmc::Trajectory;

#[derive(Debug, Clone)]
enum BoundExpr {
    Num(f64),
    Var(usize),
    Delta(usize),
    Neg(Box<BoundExpr>),
    Add(Box<BoundExpr>, Box<BoundExpr>),
    Sub(Box<BoundExpr>, Box<BoundExpr>),
    Mul(Box<BoundExpr>, Box<BoundExpr>),
}

impl BoundExpr {
    fn bind(e: &Expr, species: &[String]) -> Result<Self> {
        let idx = |name: &str| {
            species
                .iter()
                .position(|s| s == name)
                .ok_or_else(|| Error::UnboundIdentifier(name.to_string()))
        };
        let pair = |a: &Expr, b: &Expr| -> Result<(Box<Self>, Box<Self>)> {
            Ok((Box::new(Self::bind(a, species)?), Box::new(Self::bind(b, species)?)))
        };
        Ok(match e {
            Expr::Num(x) => BoundExpr::Num(*x),
            Expr::Var(v) => BoundExpr::Var(idx(v)?),
            Expr::Delta(v) => BoundExpr::Delta(idx(v)?),
            Expr::Neg(a) => BoundExpr::Neg(Box::new(Self::bind(a, species)?)),
            Expr::Add(a, b) => {
                let (a, b) = pair(a, b)?;
                BoundExpr::Add(a, b)
            }
            Expr::Sub(a, b) => {
                let (a, b) = pair(a, b)?;
                BoundExpr::Sub(a, b)
            }
            Expr::Mul(a, b) => {
                let (a, b) = pair(a, b)?;
                BoundExpr::Mul(a, b)
            }
        })
    }

    fn eval(&self, cur: &[u64], prev: Option<&[u64]>) -> f64 {
        match self {
            BoundExpr::Num(x) => *x,
            BoundExpr::Var(j) => cur[*j] as f64,
            BoundExpr::Delta(j) => prev.map_or(0.0, |p| cur[*j] as f64 - p[*j] as f64),
            BoundExpr::Neg(a) => -a.eval(cur, prev),
            BoundExpr::Add(a, b) => a.eval(cur, prev) + b.eval(cur, prev),
            BoundExpr::Sub(a, b) => a.eval(cur, prev) - b.eval(cur, prev),
            BoundExpr::Mul(a, b) => a.eval(cur, prev) * b.eval(cur, prev),
        }
    }
}

#[derive(Debug, Clone)]
struct BoundAtom {
    lhs: BoundExpr,
    op: CmpOp,
    rhs: BoundExpr,
}

impl BoundAtom {
    fn bind(a: &Atom, species: &[String]) -> Result<Self> {
        Ok(Self { lhs: BoundExpr::bind(&a.lhs, species)?, op: a.op, rhs: BoundExpr::bind(&a.rhs, species)? })
    }

    fn holds(&self, cur: &[u64], prev: Option<&[u64]>) -> bool {
        self.op.apply(self.lhs.eval(cur, prev), self.rhs.eval(cur, prev))
    }

    fn signal(&self, tr: &Trajectory) -> BoolSignal {
        let n = tr.len();
        let mut spans = Vec::new();
        let mut open: Option<f64> = None;
        for k in 0..n {
            let prev = (k > 0).then(|| tr.state(k - 1));
            let v = self.holds(tr.state(k), prev);
            match (v, open) {
                (true, None) => open = Some(tr.times[k]),
                (false, Some(lo)) => {
                    spans.push(Span::half_open(lo, tr.times[k]));
                    open = None;
                }
                _ => {}
            }
        }
        if let Some(lo) = open {
            spans.push(Span::closed(lo, tr.horizon));
        }
        BoolSignal::from_spans(spans, tr.horizon)
    }
}

#[derive(Debug, Clone)]
enum Node {
    True,
    Atom(BoundAtom),
    Not(Box<Node>),
    And(Box<Node>, Box<Node>),
    Until(Box<Node>, Box<Node>, Interval),
}

impl Node {
    fn bind(f: &StlFormula, species: &[String]) -> Result<Self> {
        Ok(match f {
            StlFormula::True => Node::True,
            StlFormula::Atom(a) => Node::Atom(BoundAtom::bind(a, species)?),
            StlFormula::Not(a) => Node::Not(Box::new(Self::bind(a, species)?)),
            StlFormula::And(a, b) => Node::And(Box::new(Self::bind(a, species)?), Box::new(Self::bind(b, species)?)),
            StlFormula::Until(a, b, i) => {
                Node::Until(Box::new(Self::bind(a, species)?), Box::new(Self::bind(b, species)?), *i)
            }
        })
    }

    fn signal(&self, tr: &Trajectory) -> BoolSignal {
        match self {
            Node::True => BoolSignal::always(tr.horizon),
            Node::Atom(a) => a.signal(tr),
            Node::Not(a) => a.signal(tr).not(),
            Node::And(a, b) => a.signal(tr).and(&b.signal(tr)),
            Node::Until(a, b, i) => a.signal(tr).until(&b.signal(tr), i.lo, i.hi),
        }
    }
}

/// A formula with identifiers resolved against a species list, ready to
/// be checked on many trajectories.
#[derive(Debug, Clone)]
pub struct CompiledFormula {
    root: Node,
    horizon: f64,
}

impl CompiledFormula {
    pub fn new(formula: &StlFormula, species: &[String]) -> Result<Self> {
        Ok(Self { root: Node::bind(formula, species)?, horizon: formula.horizon() })
    }

    /// Time span the formula needs to be decided at time 0.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Satisfaction signal over the whole trajectory domain.
    pub fn signal(&self, tr: &Trajectory) -> Result<BoolSignal> {
        if self.horizon > tr.horizon {
            return Err(Error::HorizonTooShort { required: self.horizon, available: tr.horizon });
        }
        Ok(self.root.signal(tr))
    }

    /// Boolean satisfaction at time 0.
    pub fn check(&self, tr: &Trajectory) -> Result<bool> {
        Ok(self.signal(tr)?.at(0.0))
    }
}

/// Truth signal of one atomic proposition along a trajectory.
pub fn atom_signal(atom: &Atom, species: &[String], tr: &Trajectory) -> Result<BoolSignal> {
    Ok(BoundAtom::bind(atom, species)?.signal(tr))
}

/// Whether `tr` satisfies `formula` at time 0.
pub fn monitor(formula: &StlFormula, species: &[String], tr: &Trajectory) -> Result<bool> {
    CompiledFormula::new(formula, species)?.check(tr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::parse_stl;
    use proptest::prelude::*;

    fn traj(times: &[f64], xs: &[u64], horizon: f64) -> Trajectory {
        Trajectory { times: times.to_vec(), states: xs.to_vec(), n_species: 1, horizon }
    }

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn atom_of(text: &str) -> Atom {
        match parse_stl(text).unwrap() {
            StlFormula::Atom(a) => a,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_atom() {
        let s = atom_signal(&atom_of("S > 3"), &names(&["S"]), &traj(&[0.0], &[5], 10.0)).unwrap();
        assert_eq!(s.spans(), &[Span::closed(0.0, 10.0)]);
    }

    #[test]
    fn single_jump_atom() {
        let s = atom_signal(&atom_of("S > 3"), &names(&["S"]), &traj(&[0.0, 2.0], &[5, 1], 10.0)).unwrap();
        assert_eq!(s.spans(), &[Span::half_open(0.0, 2.0)]);
    }

    #[test]
    fn unbound_identifier() {
        let e = atom_signal(&atom_of("Q > 0"), &names(&["S"]), &traj(&[0.0], &[5], 10.0)).unwrap_err();
        assert!(matches!(e, Error::UnboundIdentifier(ref q) if q == "Q"));
    }

    #[test]
    fn tautology() {
        assert!(monitor(&StlFormula::True, &names(&["S"]), &traj(&[0.0, 1.0], &[1, 2], 3.0)).unwrap());
    }

    #[test]
    fn until_with_two_segments() {
        let f = parse_stl("(I>0) U[1,2] (I==0)").unwrap();
        assert!(monitor(&f, &names(&["I"]), &traj(&[0.0, 1.5], &[3, 0], 5.0)).unwrap());
    }

    #[test]
    fn always_violated_after_drop() {
        let f = parse_stl("G[0,4](S>=1)").unwrap();
        assert!(!monitor(&f, &names(&["S"]), &traj(&[0.0, 3.0], &[1, 0], 5.0)).unwrap());
    }

    #[test]
    fn delta_uses_previous_jump() {
        let a = atom_of("D(S) > 0");
        let s = atom_signal(&a, &names(&["S"]), &traj(&[0.0, 1.0, 2.0, 3.0], &[4, 5, 3, 4], 6.0)).unwrap();
        assert_eq!(s.spans(), &[Span::half_open(1.0, 2.0), Span::closed(3.0, 6.0)]);
    }

    #[test]
    fn horizon_precondition() {
        let f = parse_stl("F[0,10](S > 0)").unwrap();
        let e = monitor(&f, &names(&["S"]), &traj(&[0.0], &[1], 5.0)).unwrap_err();
        assert!(matches!(e, Error::HorizonTooShort { .. }));
    }

    // ---- brute-force oracle -------------------------------------------------
    //
    // Random signals jump on a grid of quarter time units and formulas use
    // integer interval bounds, so every subformula signal is constant
    // between consecutive quarter-unit points.

    const GRID: f64 = 0.25;
    const STEP: f64 = 0.125;

    fn value_at(tr: &Trajectory, j: usize, t: f64, delta: bool) -> f64 {
        let k = tr.times.partition_point(|&s| s <= t) - 1;
        let cur = tr.state(k)[j] as f64;
        if delta {
            if k == 0 {
                0.0
            } else {
                cur - tr.state(k - 1)[j] as f64
            }
        } else {
            cur
        }
    }

    fn eval_expr(e: &Expr, sp: &[String], tr: &Trajectory, t: f64) -> f64 {
        let idx = |v: &str| sp.iter().position(|s| s == v).unwrap();
        match e {
            Expr::Num(x) => *x,
            Expr::Var(v) => value_at(tr, idx(v), t, false),
            Expr::Delta(v) => value_at(tr, idx(v), t, true),
            Expr::Neg(a) => -eval_expr(a, sp, tr, t),
            Expr::Add(a, b) => eval_expr(a, sp, tr, t) + eval_expr(b, sp, tr, t),
            Expr::Sub(a, b) => eval_expr(a, sp, tr, t) - eval_expr(b, sp, tr, t),
            Expr::Mul(a, b) => eval_expr(a, sp, tr, t) * eval_expr(b, sp, tr, t),
        }
    }

    fn sat(f: &StlFormula, sp: &[String], tr: &Trajectory, t: f64) -> bool {
        if t > tr.horizon {
            return false;
        }
        match f {
            StlFormula::True => true,
            StlFormula::Atom(a) => a.op.apply(eval_expr(&a.lhs, sp, tr, t), eval_expr(&a.rhs, sp, tr, t)),
            StlFormula::Not(a) => !sat(a, sp, tr, t),
            StlFormula::And(a, b) => sat(a, sp, tr, t) && sat(b, sp, tr, t),
            StlFormula::Until(a, b, i) => {
                let last = i.hi.map_or(tr.horizon, |h| (t + h).min(tr.horizon));
                if t + i.lo > last {
                    return false;
                }
                pieces(t + i.lo, last).into_iter().any(|tp| {
                    sat(b, sp, tr, tp) && pieces(t, tp).into_iter().filter(|&s| s < tp).all(|s| sat(a, sp, tr, s))
                })
            }
        }
    }

    /// `lo`, `hi`, every breakpoint strictly between them and the midpoints
    /// of the resulting pieces: one representative of every constant piece
    /// of any subformula signal on `[lo, hi]`.
    fn pieces(lo: f64, hi: f64) -> Vec<f64> {
        let mut pts = vec![lo];
        let mut g = (lo / GRID).floor() * GRID + GRID;
        while g < hi {
            if g > lo {
                pts.push(g);
            }
            g += GRID;
        }
        if hi > lo {
            pts.push(hi);
        }
        let mids: Vec<f64> = pts.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        pts.extend(mids);
        pts
    }

    fn signal_strategy() -> impl Strategy<Value = Trajectory> {
        (prop::collection::vec((1u32..=8, 0u64..4, 0u64..4), 0..8), 0u64..4, 0u64..4).prop_map(|(jumps, x0, y0)| {
            let mut times = vec![0.0];
            let mut states = vec![x0, y0];
            let mut t = 0.0;
            for (dt, x, y) in jumps {
                t += f64::from(dt) * 0.25;
                if t > 8.0 {
                    break;
                }
                times.push(t);
                states.extend([x, y]);
            }
            Trajectory { times, states, n_species: 2, horizon: 10.0 }
        })
    }

    fn interval_strategy() -> impl Strategy<Value = Interval> {
        (0u32..3, 1u32..3).prop_map(|(a, w)| Interval::bounded(f64::from(a), f64::from(a + w)))
    }

    fn formula_strategy() -> impl Strategy<Value = StlFormula> {
        let leaf = prop_oneof![
            Just(StlFormula::True),
            (0usize..2, 0u64..4, prop_oneof![Just(CmpOp::Ge), Just(CmpOp::Lt), Just(CmpOp::Eq)]).prop_map(
                |(j, c, op)| {
                    let v = ["x", "y"][j].to_string();
                    StlFormula::Atom(Atom { lhs: Expr::Var(v), op, rhs: Expr::Num(c as f64) })
                }
            ),
            (0usize..2).prop_map(|j| {
                let v = ["x", "y"][j].to_string();
                StlFormula::Atom(Atom { lhs: Expr::Delta(v), op: CmpOp::Gt, rhs: Expr::Num(0.0) })
            }),
        ];
        leaf.prop_recursive(3, 12, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(StlFormula::not),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| StlFormula::and(a, b)),
                (inner.clone(), inner, interval_strategy()).prop_map(|(a, b, i)| StlFormula::until(a, b, i)),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn agrees_with_point_semantics(tr in signal_strategy(), f in formula_strategy()) {
            prop_assume!(f.horizon() <= tr.horizon);
            let sp = names(&["x", "y"]);
            let c = CompiledFormula::new(&f, &sp).unwrap();
            let sig = c.signal(&tr).unwrap();
            prop_assert_eq!(sig.at(0.0), sat(&f, &sp, &tr, 0.0), "{}", f);
            // the whole signal, not just time 0, on the part of the domain the formula can see
            let mut t = 0.0;
            while t + f.horizon() <= tr.horizon {
                prop_assert_eq!(sig.at(t), sat(&f, &sp, &tr, t), "{} at {}", f, t);
                t += STEP;
            }
        }

        #[test]
        fn desugaring_is_extensional(tr in signal_strategy(), f in formula_strategy(), i in interval_strategy()) {
            let sp = names(&["x", "y"]);
            let ev = StlFormula::eventually(i, f.clone());
            prop_assume!(ev.horizon() <= tr.horizon);
            let ev_text = format!("F{i} {f}");
            let al_text = format!("G{i} {f}");
            let m = |g: &StlFormula| monitor(g, &sp, &tr).unwrap();
            prop_assert_eq!(m(&parse_stl(&ev_text).unwrap()), m(&StlFormula::until(StlFormula::True, f.clone(), i)));
            let not_f = StlFormula::not(f.clone());
            prop_assert_eq!(
                m(&parse_stl(&al_text).unwrap()),
                m(&StlFormula::not(StlFormula::until(StlFormula::True, not_f, i)))
            );
        }

        #[test]
        fn de_morgan(tr in signal_strategy(), f in formula_strategy(), g in formula_strategy()) {
            prop_assume!(f.horizon().max(g.horizon()) <= tr.horizon);
            let sp = names(&["x", "y"]);
            let lhs = parse_stl(&format!("!({f} & {g})")).unwrap();
            let rhs = parse_stl(&format!("!{f} | !{g}")).unwrap();
            prop_assert_eq!(monitor(&lhs, &sp, &tr).unwrap(), monitor(&rhs, &sp, &tr).unwrap());
        }

        #[test]
        fn print_parse_is_a_fixed_point(f in formula_strategy()) {
            let once = parse_stl(&f.to_string()).unwrap();
            prop_assert_eq!(&once, &f);
            prop_assert_eq!(parse_stl(&once.to_string()).unwrap(), once);
        }
    }
}
