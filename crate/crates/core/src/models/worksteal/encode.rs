use super::ideal::DirectIdeal;
use super::{makespan_var, WorkStealConfig};
use crate::error::Result;
use crate::framework::{Cx, Decisions, Field, IdealSchedule, StateSchema, StateStep, TransitionSpec, Unrolled};
use crate::rational;
use crate::smt::{build_argmin_lex, term, Problem, Sort, Term};

/// Solver-chosen workload constants.
#[derive(Clone, Debug)]
pub struct WsWorkload {
    pub len: Vec<Term>,
    pub sc: Vec<Term>,
    pub th: Vec<Term>,
    /// `dag[i][j]`: edge from parent `i` to child `j`.
    pub dag: Vec<Vec<Term>>,
}

impl WsWorkload {
    pub fn is_root(&self, i: usize) -> Term {
        term::and((0..self.len.len()).map(|j| self.dag[j][i].not()))
    }
}

pub struct WorkSteal {
    pub cfg: WorkStealConfig,
    pub schema: StateSchema,
}

impl WorkSteal {
    pub fn new(cfg: WorkStealConfig) -> Self {
        let mut schema = StateSchema::new(cfg.n_tasks, cfg.n_resources);
        schema.task_fields = vec![
            Field::trace("b", Sort::Real),
            Field::trace("cost", Sort::Real),
            Field::trace("e", Sort::Real),
            Field::trace("pos", Sort::Real),
        ];
        for r in 0..cfg.n_resources {
            schema.task_fields.push(Field::trace(&format!("on{r}"), Sort::Bool));
            schema.task_fields.push(Field::trace(&format!("inq{r}"), Sort::Bool));
        }
        for f in ["assigned", "running", "finished", "enqueued"] {
            schema.task_fields.push(Field::step(f, Sort::Bool));
        }
        schema.queue_fields = vec![
            Field::step("free", Sort::Bool),
            Field::step("hasprev", Sort::Bool),
            Field::step("lth", Sort::Int),
        ];
        WorkSteal { cfg, schema }
    }

    fn nt(&self) -> usize {
        self.cfg.n_tasks
    }

    fn nr(&self) -> usize {
        self.cfg.n_resources
    }

    fn end(&self, w: &WsWorkload, s: &StateStep, i: usize) -> Result<Term> {
        Ok(term::sum([s.task(i, "b")?.clone(), s.task(i, "cost")?.clone(), w.len[i].clone()], Sort::Real))
    }

    /// Derived status of a `Pre` state from `assigned` and the clock.
    fn define_status(&self, cx: &mut Cx<WsWorkload>, s: &StateStep) -> Result<()> {
        let w = cx.w;
        for i in 0..self.nt() {
            let asg = s.task(i, "assigned")?.clone();
            let end = self.end(w, s, i)?;
            cx.assert(s.task(i, "running")?.iff(&term::and2(&asg, &end.gt(&s.time))));
            cx.assert(s.task(i, "finished")?.iff(&term::and2(&asg, &end.le(&s.time))));
            cx.assert(s.task(i, "enqueued")?.iff(&term::and2(&asg.not(), &s.task(i, "e")?.le(&s.time))));
        }
        self.define_free(cx, s)
    }

    fn define_free(&self, cx: &mut Cx<WsWorkload>, s: &StateStep) -> Result<()> {
        for r in 0..self.nr() {
            let busy = term::or(
                (0..self.nt())
                    .map(|i| Ok(term::and2(s.task(i, &format!("on{r}"))?, s.task(i, "running")?)))
                    .collect::<Result<Vec<_>>>()?,
            );
            cx.assert(s.queue(r, "free")?.iff(&busy.not()));
        }
        Ok(())
    }

    fn switch(&self, w: &WsWorkload, s: &StateStep, r: usize, i: usize) -> Result<Term> {
        let hasprev = s.queue(r, "hasprev")?;
        let other = s.queue(r, "lth")?.ne(&w.th[i]);
        Ok(if self.cfg.charge_first_switch {
            term::or2(&hasprev.not(), &other)
        } else {
            term::and2(hasprev, &other)
        })
    }

    /// Post-state updates shared by heuristic and free decisions.
    fn apply(&self, cx: &mut Cx<WsWorkload>, pre: &StateStep, post: &StateStep, picks: &[Vec<Term>]) -> Result<()> {
        let w = cx.w;
        for i in 0..self.nt() {
            let picked = term::or((0..self.nr()).map(|r| picks[r][i].clone()));
            cx.assert(post.task(i, "assigned")?.iff(&term::or2(pre.task(i, "assigned")?, &picked)));
            cx.assert(post.task(i, "running")?.iff(&term::or2(pre.task(i, "running")?, &picked)));
            cx.assert(post.task(i, "finished")?.iff(pre.task(i, "finished")?));
            cx.assert(post.task(i, "enqueued")?.iff(&term::and2(pre.task(i, "enqueued")?, &picked.not())));
            for r in 0..self.nr() {
                let cost = term::ite(&self.switch(w, pre, r, i)?, &w.sc[i], &Term::real_i(0));
                cx.assert(picks[r][i].implies(&term::and([
                    pre.task(i, &format!("on{r}"))?.clone(),
                    pre.task(i, "b")?.eq_t(&pre.time),
                    pre.task(i, "cost")?.eq_t(&cost),
                ])));
            }
        }
        for r in 0..self.nr() {
            let any = term::or(picks[r].iter().cloned());
            cx.assert(post.queue(r, "hasprev")?.iff(&term::or2(pre.queue(r, "hasprev")?, &any)));
            let mut th = pre.queue(r, "lth")?.clone();
            for i in 0..self.nt() {
                th = term::ite(&picks[r][i], &w.th[i], &th);
            }
            cx.assert(post.queue(r, "lth")?.eq_t(&th));
        }
        self.define_free(cx, post)
    }
}

impl TransitionSpec for WorkSteal {
    type Workload = WsWorkload;

    fn name(&self) -> &str {
        "worksteal"
    }

    fn schema(&self) -> &StateSchema {
        &self.schema
    }

    fn horizon(&self) -> usize {
        self.cfg.horizon()
    }

    fn declare_workload(&self, p: &mut Problem) -> Result<WsWorkload> {
        let n = self.nt();
        let len: Vec<Term> = (0..n).map(|i| p.real_var(&format!("w.len.{i}"))).collect();
        let sc: Vec<Term> = (0..n).map(|i| p.real_var(&format!("w.sc.{i}"))).collect();
        let th: Vec<Term> = (0..n).map(|i| p.int_var(&format!("w.th.{i}"))).collect();
        let sym = self.cfg.symmetric();
        let dag: Vec<Vec<Term>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j || (sym && j < i) {
                            Term::bool(false)
                        } else {
                            p.bool_var(&format!("w.dag.{i}.{j}"))
                        }
                    })
                    .collect()
            })
            .collect();
        let (k, c) = (&self.cfg.k, &self.cfg.c);
        for i in 0..n {
            p.assert(len[i].gt(&Term::real_i(0)));
            p.assert(len[i].le(&Term::real_i(1)));
            p.assert(sc[i].ge(&Term::real_i(0)));
            p.assert(th[i].ge(&Term::int(0)));
            p.assert(th[i].lt(&Term::int(n as i64)));
            for j in 0..n {
                p.assert(sc[i].le(&len[j].scale(k)));
                if i != j {
                    p.assert(sc[i].le(&sc[j].scale(c)));
                }
            }
        }
        if !sym {
            let rank: Vec<Term> = (0..n).map(|i| p.real_var(&format!("w.rank.{i}"))).collect();
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        p.assert(dag[i][j].implies(&rank[i].lt(&rank[j])));
                    }
                }
            }
        }
        if let Some(cw) = &self.cfg.workload {
            for i in 0..n {
                p.assert(len[i].eq_t(&Term::real(cw.lengths[i].clone())));
                p.assert(sc[i].eq_t(&Term::real(cw.switch_costs[i].clone())));
                p.assert(th[i].eq_t(&Term::int(cw.threads[i])));
                for j in 0..n {
                    if i != j {
                        let d = &dag[i][j];
                        p.assert(if cw.has_edge(i, j) { d.clone() } else { d.not() });
                    }
                }
            }
        }
        Ok(WsWorkload { len, sc, th, dag })
    }

    fn initial(&self, cx: &mut Cx<WsWorkload>, s0: &StateStep) -> Result<()> {
        cx.assert(s0.time.eq_t(&Term::real_i(0)));
        for i in 0..self.nt() {
            cx.assert(s0.task(i, "assigned")?.not());
        }
        for r in 0..self.nr() {
            cx.assert(s0.queue(r, "hasprev")?.not());
            cx.assert(s0.queue(r, "lth")?.eq_t(&Term::int(-1)));
        }
        self.define_status(cx, s0)
    }

    fn algorithm(&self, cx: &mut Cx<WsWorkload>, pre: &StateStep, post: &StateStep) -> Result<()> {
        let (nt, nr) = (self.nt(), self.nr());
        let done = term::and(pre.task_col("finished")?);
        let mut avail = pre.task_col("enqueued")?;
        let qidx: Vec<Term> = (0..nt)
            .map(|i| {
                Ok(term::sum(
                    (0..nr)
                        .map(|q| Ok(term::ite(pre.task(i, &format!("inq{q}"))?, &Term::real_i(q as i64), &Term::real_i(0))))
                        .collect::<Result<Vec<_>>>()?,
                    Sort::Real,
                ))
            })
            .collect::<Result<_>>()?;
        let mut picks = Vec::with_capacity(nr);
        for r in 0..nr {
            let inq = pre.task_col(&format!("inq{r}"))?;
            let local: Vec<Term> = (0..nt).map(|i| term::and2(&avail[i], &inq[i])).collect();
            let steal: Vec<Term> = (0..nt).map(|i| term::and2(&avail[i], &inq[i].not())).collect();
            let pos = pre.task_col("pos")?;
            let back: Vec<Vec<Term>> = pos.iter().map(|p| vec![p.scale(&rational::int(-1))]).collect();
            let prefix = cx.name(&format!("s{}.lsel{r}", pre.index));
            let (lsel, c1) = build_argmin_lex(cx.p, &prefix, &back, &local)?;
            let oldest: Vec<Vec<Term>> = (0..nt)
                .map(|i| Ok(vec![pre.task(i, "e")?.clone(), qidx[i].clone(), pos[i].clone()]))
                .collect::<Result<_>>()?;
            let prefix = cx.name(&format!("s{}.ssel{r}", pre.index));
            let (ssel, c2) = build_argmin_lex(cx.p, &prefix, &oldest, &steal)?;
            cx.assert_all(c1.into_iter().chain(c2));
            let any_local = term::or(local.iter().cloned());
            let gate = term::and2(pre.queue(r, "free")?, &done.not());
            let pk: Vec<Term> = (0..nt)
                .map(|i| {
                    let choice = term::and2(&gate, &term::ite(&any_local, &lsel[i], &ssel[i]));
                    cx.define(&format!("s{}.pk{r}.{i}", pre.index), &choice)
                })
                .collect();
            avail = (0..nt).map(|i| term::and2(&avail[i], &pk[i].not())).collect();
            picks.push(pk);
        }
        self.apply(cx, pre, post, &picks)
    }

    fn free_algorithm(&self, cx: &mut Cx<WsWorkload>, pre: &StateStep, post: &StateStep) -> Result<()> {
        let (nt, nr) = (self.nt(), self.nr());
        let mut picks: Vec<Vec<Term>> = Vec::with_capacity(nr);
        for r in 0..nr {
            let pk: Vec<Term> = (0..nt).map(|i| cx.bool_var(&format!("s{}.pk{r}.{i}", pre.index))).collect();
            for i in 0..nt {
                cx.assert(pk[i].implies(&term::and2(pre.queue(r, "free")?, pre.task(i, "enqueued")?)));
            }
            cx.assert(term::at_most_one(&pk));
            picks.push(pk);
        }
        for i in 0..nt {
            let col: Vec<Term> = (0..nr).map(|r| picks[r][i].clone()).collect();
            cx.assert(term::at_most_one(&col));
        }
        self.apply(cx, pre, post, &picks)
    }

    fn system(&self, cx: &mut Cx<WsWorkload>, post: &StateStep, next: &StateStep) -> Result<()> {
        let w = cx.w;
        let nt = self.nt();
        let run = post.task_col("running")?;
        let ends: Vec<Term> = (0..nt).map(|i| self.end(w, post, i)).collect::<Result<_>>()?;
        let any = term::or(run.iter().cloned());
        let earliest = term::and2(
            &term::and((0..nt).map(|i| run[i].implies(&next.time.le(&ends[i])))),
            &term::or((0..nt).map(|i| term::and2(&run[i], &next.time.eq_t(&ends[i])))),
        );
        cx.assert(term::ite(&any, &earliest, &next.time.eq_t(&post.time)));
        for i in 0..nt {
            cx.assert(next.task(i, "assigned")?.iff(post.task(i, "assigned")?));
        }
        for r in 0..self.nr() {
            cx.assert(next.queue(r, "hasprev")?.iff(post.queue(r, "hasprev")?));
            cx.assert(next.queue(r, "lth")?.eq_t(post.queue(r, "lth")?));
        }
        self.define_status(cx, next)
    }

    fn done(&self, s: &StateStep) -> Result<Term> {
        Ok(term::and(s.task_col("finished")?))
    }

    fn trace_constraints(&self, cx: &mut Cx<WsWorkload>, tr: &Unrolled) -> Result<()> {
        let w = cx.w;
        let (nt, nr) = (self.nt(), self.nr());
        let s = tr.pre(0);
        let ends: Vec<Term> = (0..nt).map(|i| self.end(w, s, i)).collect::<Result<_>>()?;
        let last = tr.final_state();
        for i in 0..nt {
            let e = s.task(i, "e")?;
            let inq: Vec<Term> = (0..nr).map(|r| s.task(i, &format!("inq{r}")).cloned()).collect::<Result<_>>()?;
            let on: Vec<Term> = (0..nr).map(|r| s.task(i, &format!("on{r}")).cloned()).collect::<Result<_>>()?;
            cx.assert(term::exactly_one(&inq));
            cx.assert(term::exactly_one(&on));
            let root = w.is_root(i);
            cx.assert(root.implies(&e.eq_t(&Term::real_i(0))));
            cx.assert(e.ge(&Term::real_i(0)));
            for j in 0..nt {
                if j != i {
                    cx.assert(w.dag[j][i].implies(&e.ge(&ends[j])));
                }
            }
            // Enqueued where the last-finishing parent ran.
            for r in 0..nr {
                let sources = (0..nt).filter(|&j| j != i).map(|j| {
                    Ok(term::and([w.dag[j][i].clone(), ends[j].eq_t(e), s.task(j, &format!("on{r}"))?.clone()]))
                });
                let src = term::or(sources.collect::<Result<Vec<_>>>()?);
                cx.assert(term::and2(&root.not(), &inq[r]).implies(&src));
            }
            for j in 0..nt {
                if j == i {
                    continue;
                }
                let (pi, pj) = (s.task(i, "pos")?, s.task(j, "pos")?);
                if j > i {
                    cx.assert(pi.ne(pj));
                }
                for r in 0..nr {
                    let same = term::and([inq[r].clone(), s.task(j, &format!("inq{r}"))?.clone(), e.lt(s.task(j, "e")?)]);
                    cx.assert(same.implies(&pi.lt(pj)));
                }
            }
            cx.assert(last.task(i, "assigned")?.clone());
        }
        if tr.decisions == Decisions::Heuristic && self.cfg.symmetric() {
            for i in 0..nt.saturating_sub(1) {
                cx.assert(s.task(i, "b")?.le(s.task(i + 1, "b")?));
            }
        }
        let m = cx.real_var("makespan");
        for end in &ends {
            cx.assert(m.ge(end));
        }
        cx.assert(term::or(ends.iter().map(|end| m.eq_t(end))));
        Ok(())
    }

    fn metric(&self, tr: &Unrolled) -> Result<Term> {
        Ok(makespan_var(&tr.tag))
    }

    fn freeze_when_done(&self) -> bool {
        false
    }

    fn direct_ideal(&self, p: &mut Problem, w: &WsWorkload, tag: &str) -> Result<Option<Box<dyn IdealSchedule>>> {
        Ok(Some(Box::new(DirectIdeal::build(&self.cfg, p, w, tag)?)))
    }
}
