use std::cell::{Cell, RefCell};
use std::sync::Arc;

use super::kernels;
use super::tape::{DetachGroup, NodeRecord, Op, Tape, Var};
use crate::error::{Error, Result};

/// Work counters of a program, accumulated across calls.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub forward_evals: usize,
    pub forward_visits: usize,
    pub reverse_passes: usize,
    pub reverse_visits: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Target {
    Inputs,
    Params,
}

#[derive(Clone, Debug)]
struct Schedule {
    target: Target,
    cuts: (bool, bool),
    /// Node ids in descending order.
    order: Vec<usize>,
    active: Vec<bool>,
}

/// A recorded program together with its cached forward values.
///
/// Nodes are stored in recording order, so every parent precedes its
/// consumers. Stop-gradient markers never change forward values; they only
/// change which paths the reverse pass follows.
#[derive(Debug)]
pub struct AdjointProgram {
    nodes: Vec<NodeRecord>,
    inputs: Vec<Var>,
    input_width: usize,
    params: Vec<Var>,
    outputs: Vec<Var>,
    output_width: usize,
    values: Vec<Vec<f64>>,
    evaluated: bool,
    cut_always: bool,
    cut_conditioner: bool,
    counters: Cell<Counters>,
    schedules: RefCell<Vec<Arc<Schedule>>>,
    adjoints: RefCell<Vec<Vec<f64>>>,
}

impl AdjointProgram {
    pub(crate) fn new(tape: Tape, outputs: Vec<Var>) -> Self {
        let output_width = outputs.iter().map(|v| tape.nodes[v.0].len()).sum();
        let values = tape
            .nodes
            .iter()
            .map(|n| n.stored.clone().unwrap_or_default())
            .collect();
        let count = tape.nodes.len();
        AdjointProgram {
            nodes: tape.nodes,
            inputs: tape.inputs,
            input_width: tape.input_width,
            params: tape.params,
            outputs,
            output_width,
            values,
            evaluated: false,
            cut_always: true,
            cut_conditioner: true,
            counters: Cell::new(Counters::default()),
            schedules: RefCell::new(Vec::new()),
            adjoints: RefCell::new(vec![Vec::new(); count]),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn output_width(&self) -> usize {
        self.output_width
    }

    /// Total number of trainable parameter values, in recording order.
    pub fn param_width(&self) -> usize {
        self.params
            .iter()
            .filter(|p| matches!(self.nodes[p.0].op, Op::Param { trainable: true, .. }))
            .map(|p| self.nodes[p.0].len())
            .sum()
    }

    /// Parameter leaves in recording order.
    pub fn param_vars(&self) -> &[Var] {
        &self.params
    }

    pub fn is_evaluated(&self) -> bool {
        self.evaluated
    }

    pub fn counters(&self) -> Counters {
        self.counters.get()
    }

    pub fn reset_counters(&self) {
        self.counters.set(Counters::default());
    }

    /// Enables or disables every stop-gradient marker of `group`.
    pub fn set_detach(&mut self, group: DetachGroup, enabled: bool) {
        match group {
            DetachGroup::Always => self.cut_always = enabled,
            DetachGroup::Conditioner => self.cut_conditioner = enabled,
        }
    }

    pub fn detach_enabled(&self, group: DetachGroup) -> bool {
        match group {
            DetachGroup::Always => self.cut_always,
            DetachGroup::Conditioner => self.cut_conditioner,
        }
    }

    /// Cached forward value of a node. Empty before the first evaluation for
    /// non-leaf nodes.
    pub fn value(&self, v: Var) -> &[f64] {
        &self.values[v.0]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    /// Evaluates the program at `inputs` (all input leaves concatenated in
    /// creation order) and returns the concatenated outputs.
    pub fn forward_eval(&mut self, inputs: &[f64]) -> Result<Vec<f64>> {
        if inputs.len() != self.input_width {
            return Err(Error::ArityMismatch {
                expected: self.input_width,
                got: inputs.len(),
            });
        }
        self.evaluated = false;
        for id in 0..self.nodes.len() {
            let (done, rest) = self.values.split_at_mut(id);
            let out = &mut rest[0];
            let node = &self.nodes[id];
            match &node.op {
                Op::Input { offset } => {
                    out.clear();
                    out.extend_from_slice(&inputs[*offset..*offset + node.len()]);
                }
                Op::Param { .. } | Op::Const => {}
                op => {
                    out.clear();
                    out.resize(node.len(), 0.0);
                    kernels::forward(op, node, &self.nodes, done, out);
                    if out.iter().any(|x| !x.is_finite()) {
                        return Err(Error::NonFinite(format!(
                            "node {id} ({})",
                            kernels::op_name(op)
                        )));
                    }
                }
            }
        }
        let mut c = self.counters.get();
        c.forward_evals += 1;
        c.forward_visits += self.nodes.len();
        self.counters.set(c);
        self.evaluated = true;
        Ok(self.outputs())
    }

    /// Concatenated output values of the last evaluation.
    pub fn outputs(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.output_width);
        for v in &self.outputs {
            out.extend_from_slice(&self.values[v.0]);
        }
        out
    }

    /// Replaces the value of a parameter leaf in place.
    pub fn set_param(&mut self, v: Var, values: &[f64]) -> Result<()> {
        if !matches!(self.nodes[v.0].op, Op::Param { .. }) {
            return Err(Error::invalid("set_param on a non-parameter node"));
        }
        if values.len() != self.nodes[v.0].len() {
            return Err(Error::ArityMismatch {
                expected: self.nodes[v.0].len(),
                got: values.len(),
            });
        }
        self.values[v.0].copy_from_slice(values);
        self.evaluated = false;
        Ok(())
    }

    /// Vector-Jacobian product `uᵀJ` with respect to the inputs.
    pub fn vjp(&self, cotangent: &[f64]) -> Result<Vec<f64>> {
        let seeds = self.output_seeds(cotangent)?;
        let sched = self.output_schedule(Target::Inputs);
        self.run_reverse(&sched, &seeds);
        Ok(self.collect_inputs(&sched))
    }

    /// Vector-Jacobian product with respect to the trainable parameters,
    /// concatenated in recording order.
    pub fn param_vjp(&self, cotangent: &[f64]) -> Result<Vec<f64>> {
        let seeds = self.output_seeds(cotangent)?;
        let sched = self.output_schedule(Target::Params);
        self.run_reverse(&sched, &seeds);
        let adj = self.adjoints.borrow();
        let mut out = Vec::with_capacity(self.param_width());
        for p in &self.params {
            let node = &self.nodes[p.0];
            if let Op::Param { trainable: true, .. } = node.op {
                if sched.active[p.0] {
                    out.extend_from_slice(&adj[p.0]);
                } else {
                    out.extend(std::iter::repeat_n(0.0, node.len()));
                }
            }
        }
        Ok(out)
    }

    /// Input gradient of `Σ_s ⟨seed_s, node_s⟩` for arbitrary interior nodes.
    pub fn vjp_from(&self, seeds: &[(Var, &[f64])]) -> Result<Vec<f64>> {
        if !self.evaluated {
            return Err(Error::NotEvaluated);
        }
        for (v, s) in seeds {
            if s.len() != self.nodes[v.0].len() {
                return Err(Error::ArityMismatch {
                    expected: self.nodes[v.0].len(),
                    got: s.len(),
                });
            }
        }
        let roots: Vec<usize> = seeds.iter().map(|(v, _)| v.0).collect();
        let sched = self.schedule(Target::Inputs, &roots);
        let owned: Vec<(usize, Vec<f64>)> = seeds.iter().map(|(v, s)| (v.0, s.to_vec())).collect();
        self.run_reverse(&sched, &owned);
        Ok(self.collect_inputs(&sched))
    }

    fn output_seeds(&self, cotangent: &[f64]) -> Result<Vec<(usize, Vec<f64>)>> {
        if !self.evaluated {
            return Err(Error::NotEvaluated);
        }
        if cotangent.len() != self.output_width {
            return Err(Error::ArityMismatch {
                expected: self.output_width,
                got: cotangent.len(),
            });
        }
        let mut seeds = Vec::with_capacity(self.outputs.len());
        let mut offset = 0;
        for v in &self.outputs {
            let len = self.nodes[v.0].len();
            seeds.push((v.0, cotangent[offset..offset + len].to_vec()));
            offset += len;
        }
        Ok(seeds)
    }

    fn collect_inputs(&self, sched: &Schedule) -> Vec<f64> {
        let adj = self.adjoints.borrow();
        let mut out = vec![0.0; self.input_width];
        for v in &self.inputs {
            if let Op::Input { offset } = self.nodes[v.0].op {
                if sched.active[v.0] {
                    let len = self.nodes[v.0].len();
                    out[offset..offset + len].copy_from_slice(&adj[v.0]);
                }
            }
        }
        out
    }

    fn output_schedule(&self, target: Target) -> Arc<Schedule> {
        let cuts = (self.cut_always, self.cut_conditioner);
        if let Some(s) = self
            .schedules
            .borrow()
            .iter()
            .find(|s| s.target == target && s.cuts == cuts)
        {
            return Arc::clone(s);
        }
        let roots: Vec<usize> = self.outputs.iter().map(|v| v.0).collect();
        let sched = self.schedule(target, &roots);
        self.schedules.borrow_mut().push(Arc::clone(&sched));
        sched
    }

    fn is_cut(&self, group: DetachGroup) -> bool {
        self.detach_enabled(group)
    }

    /// Nodes that both depend differentiably on the target leaves and feed
    /// one of the roots.
    fn schedule(&self, target: Target, roots: &[usize]) -> Arc<Schedule> {
        let n = self.nodes.len();
        let mut differentiable = vec![false; n];
        for (id, node) in self.nodes.iter().enumerate() {
            differentiable[id] = match &node.op {
                Op::Input { .. } => target == Target::Inputs,
                Op::Param { trainable, .. } => target == Target::Params && *trainable,
                Op::Const => false,
                Op::Detach { x, group } => !self.is_cut(*group) && differentiable[x.0],
                op => op.parents().iter().any(|p| differentiable[p.0]),
            };
        }
        let mut needed = vec![false; n];
        for &r in roots {
            needed[r] = differentiable[r];
        }
        let mut order = Vec::new();
        for id in (0..n).rev() {
            if !needed[id] {
                continue;
            }
            order.push(id);
            if let Op::Detach { group, .. } = self.nodes[id].op {
                if self.is_cut(group) {
                    continue;
                }
            }
            for p in self.nodes[id].op.parents() {
                if differentiable[p.0] {
                    needed[p.0] = true;
                }
            }
        }
        Arc::new(Schedule {
            target,
            cuts: (self.cut_always, self.cut_conditioner),
            order,
            active: needed,
        })
    }

    fn run_reverse(&self, sched: &Schedule, seeds: &[(usize, Vec<f64>)]) {
        let mut adj = self.adjoints.borrow_mut();
        for &id in &sched.order {
            let buf = &mut adj[id];
            buf.clear();
            buf.resize(self.nodes[id].len(), 0.0);
        }
        for (id, s) in seeds {
            if sched.active[*id] {
                for (a, b) in adj[*id].iter_mut().zip(s) {
                    *a += b;
                }
            }
        }
        for &id in &sched.order {
            let node = &self.nodes[id];
            match node.op {
                Op::Input { .. } | Op::Param { .. } | Op::Const => continue,
                _ => {}
            }
            let grad = std::mem::take(&mut adj[id]);
            kernels::backward(
                &node.op,
                node,
                &self.nodes,
                &self.values,
                &self.values[id],
                &grad,
                &sched.active,
                &mut adj[..],
            );
            adj[id] = grad;
        }
        let mut c = self.counters.get();
        c.reverse_passes += 1;
        c.reverse_visits += sched.order.len();
        self.counters.set(c);
    }
}
