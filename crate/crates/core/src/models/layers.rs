//! Parameter storage and the layers the neural models are assembled from.
//!
//! Layers hold [`ParamId`]s into a [`ParamStore`]. For each forward pass the
//! store registers every tensor on the tape once and the layers look their
//! variables up by id.

use rand::Rng;

use crate::error::Result;
use crate::seed;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn add(&mut self, name: impl Into<String>, t: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(t.with_grad());
        ParamId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    /// Registers every parameter; the returned vector is indexed by
    /// `ParamId`.
    pub fn register<'a>(&'a self, tape: &mut Tape<'a>) -> Vec<Var> {
        self.tensors.iter().map(|t| tape.leaf(t)).collect()
    }
}

/// Glorot-uniform matrix `[fan_in × fan_out]`.
pub fn glorot<R: Rng + ?Sized>(rng: &mut R, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-limit..limit)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches")
}

/// Affine layer `x·W + b`.
#[derive(Clone, Copy, Debug)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
}

impl Dense {
    pub fn new(store: &mut ParamStore, rng: &mut seed::Rng, name: &str, input: usize, units: usize) -> Self {
        let w = store.add(format!("{name}.w"), glorot(rng, &[input, units], input, units));
        let b = store.add(format!("{name}.b"), Tensor::zeros(&[units]));
        Self { w, b }
    }

    pub fn forward(&self, tape: &mut Tape<'_>, vars: &[Var], x: Var) -> Result<Var> {
        let xw = tape.matmul(x, vars[self.w.0])?;
        tape.add_bias(xw, vars[self.b.0])
    }
}

/// Width-3 same-length convolution over time.
#[derive(Clone, Copy, Debug)]
pub struct Conv {
    pub filters: ParamId,
    pub bias: ParamId,
}

impl Conv {
    pub const WIDTH: usize = 3;

    pub fn new(store: &mut ParamStore, rng: &mut seed::Rng, name: &str, input: usize, channels: usize) -> Self {
        let filters = store.add(
            format!("{name}.filters"),
            glorot(
                rng,
                &[Self::WIDTH, input, channels],
                Self::WIDTH * input,
                Self::WIDTH * channels,
            ),
        );
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[channels]));
        Self { filters, bias }
    }

    pub fn forward(&self, tape: &mut Tape<'_>, vars: &[Var], seq: Var) -> Result<Var> {
        tape.conv1d_same(seq, vars[self.filters.0], vars[self.bias.0])
    }
}

/// One gate: input kernel, recurrent kernel, bias.
#[derive(Clone, Copy, Debug)]
struct Gate {
    w: ParamId,
    u: ParamId,
    b: ParamId,
}

impl Gate {
    fn new(store: &mut ParamStore, rng: &mut seed::Rng, name: &str, input: usize, hidden: usize) -> Self {
        Self {
            w: store.add(format!("{name}.w"), glorot(rng, &[input, hidden], input, hidden)),
            u: store.add(format!("{name}.u"), glorot(rng, &[hidden, hidden], hidden, hidden)),
            b: store.add(format!("{name}.b"), Tensor::zeros(&[hidden])),
        }
    }

    /// `seq·W + b` for all frames at once.
    fn project(&self, tape: &mut Tape<'_>, vars: &[Var], seq: Var) -> Result<Var> {
        let xw = tape.matmul(seq, vars[self.w.0])?;
        tape.add_bias(xw, vars[self.b.0])
    }

    /// Pre-activation for frame `t` given its projected input.
    fn pre(&self, tape: &mut Tape<'_>, vars: &[Var], proj: Var, t: usize, h: Var) -> Result<Var> {
        let x = tape.row(proj, t)?;
        let hu = tape.matmul(h, vars[self.u.0])?;
        tape.add(x, hu)
    }
}

/// Gated recurrent unit:
///
/// ```text
/// z  = σ(x·Wz + h·Uz + bz)
/// r  = σ(x·Wr + h·Ur + br)
/// n  = tanh(x·Wn + (r ⊙ h)·Un + bn)
/// h' = z ⊙ h + (1 − z) ⊙ n
/// ```
#[derive(Clone, Copy, Debug)]
pub struct GruCell {
    update: Gate,
    reset: Gate,
    candidate: Gate,
    pub hidden: usize,
}

impl GruCell {
    pub fn new(store: &mut ParamStore, rng: &mut seed::Rng, name: &str, input: usize, hidden: usize) -> Self {
        Self {
            update: Gate::new(store, rng, &format!("{name}.update"), input, hidden),
            reset: Gate::new(store, rng, &format!("{name}.reset"), input, hidden),
            candidate: Gate::new(store, rng, &format!("{name}.candidate"), input, hidden),
            hidden,
        }
    }

    fn step_projected(
        &self,
        tape: &mut Tape<'_>,
        vars: &[Var],
        proj: [Var; 3],
        t: usize,
        h: Var,
    ) -> Result<Var> {
        let z_pre = self.update.pre(tape, vars, proj[0], t, h)?;
        let z = tape.sigmoid(z_pre);
        let r_pre = self.reset.pre(tape, vars, proj[1], t, h)?;
        let r = tape.sigmoid(r_pre);
        let rh = tape.mul(r, h)?;
        let n_pre = self.candidate.pre(tape, vars, proj[2], t, rh)?;
        let n = tape.tanh(n_pre);
        // z⊙h + (1−z)⊙n = n + z⊙(h − n)
        let h_minus_n = tape.sub(h, n)?;
        let gated = tape.mul(z, h_minus_n)?;
        tape.add(n, gated)
    }

    /// One cell application to `x[1×D]` from state `h[1×H]`.
    pub fn step(&self, tape: &mut Tape<'_>, vars: &[Var], x: Var, h: Var) -> Result<Var> {
        let proj = [
            self.update.project(tape, vars, x)?,
            self.reset.project(tape, vars, x)?,
            self.candidate.project(tape, vars, x)?,
        ];
        self.step_projected(tape, vars, proj, 0, h)
    }

    /// Runs over every frame of `seq[T×D]` from the zero state and returns
    /// the final state `[1×H]`.
    pub fn run(&self, tape: &mut Tape<'_>, vars: &[Var], seq: Var) -> Result<Var> {
        let steps = tape.value(seq).dims2().map_or(0, |d| d.0);
        let proj = [
            self.update.project(tape, vars, seq)?,
            self.reset.project(tape, vars, seq)?,
            self.candidate.project(tape, vars, seq)?,
        ];
        let mut h = tape.constant(Tensor::zeros(&[1, self.hidden]));
        for t in 0..steps {
            h = self.step_projected(tape, vars, proj, t, h)?;
        }
        Ok(h)
    }
}

/// Long short-term memory cell:
///
/// ```text
/// i = σ(x·Wi + h·Ui + bi)    f = σ(x·Wf + h·Uf + bf)
/// o = σ(x·Wo + h·Uo + bo)    g = tanh(x·Wg + h·Ug + bg)
/// c' = f ⊙ c + i ⊙ g         h' = o ⊙ tanh(c')
/// ```
#[derive(Clone, Copy, Debug)]
pub struct LstmCell {
    input_gate: Gate,
    forget: Gate,
    output: Gate,
    cell: Gate,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new(store: &mut ParamStore, rng: &mut seed::Rng, name: &str, input: usize, hidden: usize) -> Self {
        Self {
            input_gate: Gate::new(store, rng, &format!("{name}.input"), input, hidden),
            forget: Gate::new(store, rng, &format!("{name}.forget"), input, hidden),
            output: Gate::new(store, rng, &format!("{name}.output"), input, hidden),
            cell: Gate::new(store, rng, &format!("{name}.cell"), input, hidden),
            hidden,
        }
    }

    fn step_projected(
        &self,
        tape: &mut Tape<'_>,
        vars: &[Var],
        proj: [Var; 4],
        t: usize,
        (h, c): (Var, Var),
    ) -> Result<(Var, Var)> {
        let i_pre = self.input_gate.pre(tape, vars, proj[0], t, h)?;
        let i = tape.sigmoid(i_pre);
        let f_pre = self.forget.pre(tape, vars, proj[1], t, h)?;
        let f = tape.sigmoid(f_pre);
        let o_pre = self.output.pre(tape, vars, proj[2], t, h)?;
        let o = tape.sigmoid(o_pre);
        let g_pre = self.cell.pre(tape, vars, proj[3], t, h)?;
        let g = tape.tanh(g_pre);
        let fc = tape.mul(f, c)?;
        let ig = tape.mul(i, g)?;
        let c_next = tape.add(fc, ig)?;
        let c_act = tape.tanh(c_next);
        let h_next = tape.mul(o, c_act)?;
        Ok((h_next, c_next))
    }

    fn projections(&self, tape: &mut Tape<'_>, vars: &[Var], x: Var) -> Result<[Var; 4]> {
        Ok([
            self.input_gate.project(tape, vars, x)?,
            self.forget.project(tape, vars, x)?,
            self.output.project(tape, vars, x)?,
            self.cell.project(tape, vars, x)?,
        ])
    }

    /// One cell application; returns `(h', c')`.
    pub fn step(&self, tape: &mut Tape<'_>, vars: &[Var], x: Var, state: (Var, Var)) -> Result<(Var, Var)> {
        let proj = self.projections(tape, vars, x)?;
        self.step_projected(tape, vars, proj, 0, state)
    }

    /// Runs over `seq[T×D]` from zero hidden and cell states; returns the
    /// final hidden state `[1×H]`.
    pub fn run(&self, tape: &mut Tape<'_>, vars: &[Var], seq: Var) -> Result<Var> {
        let steps = tape.value(seq).dims2().map_or(0, |d| d.0);
        let proj = self.projections(tape, vars, seq)?;
        let mut h = tape.constant(Tensor::zeros(&[1, self.hidden]));
        let mut c = tape.constant(Tensor::zeros(&[1, self.hidden]));
        for t in 0..steps {
            (h, c) = self.step_projected(tape, vars, proj, t, (h, c))?;
        }
        Ok(h)
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Recurrent {
    Gru(GruCell),
    Lstm(LstmCell),
}

impl Recurrent {
    pub fn run(&self, tape: &mut Tape<'_>, vars: &[Var], seq: Var) -> Result<Var> {
        match self {
            Recurrent::Gru(c) => c.run(tape, vars, seq),
            Recurrent::Lstm(c) => c.run(tape, vars, seq),
        }
    }

    pub fn hidden(&self) -> usize {
        match self {
            Recurrent::Gru(c) => c.hidden,
            Recurrent::Lstm(c) => c.hidden,
        }
    }
}
