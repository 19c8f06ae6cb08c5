//! The six networks of the model and their forward passes.
//!
//! | net   | input        | hidden   | output       | sigmoid |
//! |-------|--------------|----------|--------------|---------|
//! | `f_a` | `input_dim`  | (10, 20) | 20           | no      |
//! | `f_z` | `input_dim`  | (10, 20) | 20           | no      |
//! | `m_a` | 20           | (10, 20) | 1            | yes     |
//! | `m_y` | 20           | (10, 20) | 1            | yes     |
//! | `d`   | 20           | (10, 20) | 1            | yes     |
//! | `g`   | 40           | (20, 10) | `input_dim`  | no      |
//!
//! Every hidden layer is followed by a leaky ReLU and dropout.

use alloc::vec::Vec;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamState, Graph, Var};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const EMBED_DIM: usize = 20;
pub const ENCODER_HIDDEN: [usize; 2] = [10, 20];
pub const DECODER_HIDDEN: [usize; 2] = [20, 10];
pub const LEAKY_SLOPE: f64 = 0.2;
pub const DROPOUT_P: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub leaky_slope: f64,
    pub dropout_p: f64,
    pub final_sigmoid: bool,
}

impl MlpSpec {
    pub fn encoder(input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dims: ENCODER_HIDDEN.to_vec(),
            output_dim: EMBED_DIM,
            leaky_slope: LEAKY_SLOPE,
            dropout_p: DROPOUT_P,
            final_sigmoid: false,
        }
    }

    /// Binary head on an embedding, ending in a sigmoid.
    pub fn head() -> Self {
        Self {
            input_dim: EMBED_DIM,
            hidden_dims: ENCODER_HIDDEN.to_vec(),
            output_dim: 1,
            leaky_slope: LEAKY_SLOPE,
            dropout_p: DROPOUT_P,
            final_sigmoid: true,
        }
    }

    /// Decoder from the concatenated embeddings back to input space.
    pub fn decoder(output_dim: usize) -> Self {
        Self {
            input_dim: 2 * EMBED_DIM,
            hidden_dims: DECODER_HIDDEN.to_vec(),
            output_dim,
            leaky_slope: LEAKY_SLOPE,
            dropout_p: DROPOUT_P,
            final_sigmoid: false,
        }
    }

    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut prev = self.input_dim;
        for &h in self.hidden_dims.iter().chain(core::iter::once(&self.output_dim)) {
            dims.push((prev, h));
            prev = h;
        }
        dims
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::Config("MLP dimensions must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config("dropout_p must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Forward-pass mode. Dropout is active only in `Train`.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn RngCore),
}

impl Mode<'_> {
    pub fn rng(&mut self) -> Option<&mut dyn RngCore> {
        match self {
            Mode::Eval => None,
            Mode::Train(r) => Some(&mut **r),
        }
    }
}

/// An MLP. Parameters are stored as `[w0, b0, w1, b1, ...]`, weights
/// shaped `(fan_in, fan_out)` and biases `(1, fan_out)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub params: Vec<Matrix>,
}

/// Graph leaves holding one MLP's parameters for a single forward pass.
#[derive(Debug, Clone)]
pub struct Bound<'m> {
    mlp: &'m Mlp,
    vars: Vec<Var>,
}

impl Bound<'_> {
    pub fn mlp(&self) -> &Mlp {
        self.mlp
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn grads(&self, g: &Graph) -> Vec<Option<Matrix>> {
        self.vars.iter().map(|v| g.grad(*v).cloned()).collect()
    }

    /// True if a backward pass reached at least one parameter.
    pub fn has_grads(&self, g: &Graph) -> bool {
        self.vars.iter().any(|v| g.grad(*v).is_some())
    }

    /// Gradients with unreached parameters filled by zeros.
    pub fn grads_or_zero(&self, g: &Graph) -> Vec<Option<Matrix>> {
        self.vars
            .iter()
            .zip(&self.mlp.params)
            .map(|(v, p)| Some(g.grad(*v).cloned().unwrap_or_else(|| Matrix::zeros(p.rows(), p.cols()))))
            .collect()
    }

    pub fn forward(&self, g: &mut Graph, x: Var, mode: &mut Mode<'_>) -> Result<Var> {
        let spec = &self.mlp.spec;
        let (_, cols) = g.shape(x);
        if cols != spec.input_dim {
            return Err(Error::Shape {
                op: "forward_mlp",
                lhs: g.shape(x),
                rhs: (
                    spec.input_dim,
                    spec.hidden_dims.first().copied().unwrap_or(spec.output_dim),
                ),
            });
        }
        let layers = self.vars.len() / 2;
        let mut h = x;
        for l in 0..layers {
            h = g.matmul(h, self.vars[2 * l])?;
            h = g.add_bias(h, self.vars[2 * l + 1])?;
            if l + 1 < layers {
                h = g.leaky_relu(h, spec.leaky_slope);
                h = g.dropout(h, spec.dropout_p, mode.rng())?;
            }
        }
        if spec.final_sigmoid {
            h = g.sigmoid(h);
        }
        Ok(h)
    }
}

impl Mlp {
    /// Weights ~ U(-1/√fan_in, 1/√fan_in), biases zero.
    pub fn init(spec: MlpSpec, rng: &mut dyn RngCore) -> Result<Self> {
        spec.validate()?;
        let mut params = Vec::new();
        for (fan_in, fan_out) in spec.layer_dims() {
            let bound = 1.0 / libm::sqrt(fan_in as f64);
            let data = (0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect();
            params.push(Matrix::from_vec(fan_in, fan_out, data)?);
            params.push(Matrix::zeros(1, fan_out));
        }
        Ok(Self { spec, params })
    }

    /// Same architecture with every parameter zeroed.
    pub fn zeroed(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let params = spec
            .layer_dims()
            .into_iter()
            .flat_map(|(i, o)| [Matrix::zeros(i, o), Matrix::zeros(1, o)])
            .collect();
        Ok(Self { spec, params })
    }

    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Bound<'_> {
        Bound {
            mlp: self,
            vars: self.params.iter().map(|p| g.leaf(p.clone(), trainable)).collect(),
        }
    }

    /// Eval-mode forward pass outside any training graph.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let mut g = Graph::new();
        let b = self.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let out = b.forward(&mut g, xv, &mut Mode::Eval)?;
        Ok(g.value(out).clone())
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Matrix::len).sum()
    }
}

/// An MLP together with its optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub mlp: Mlp,
    pub adam: AdamState,
}

impl Network {
    pub fn new(mlp: Mlp) -> Self {
        let adam = AdamState::new(&mlp.params);
        Self { mlp, adam }
    }

    pub fn init(spec: MlpSpec, rng: &mut dyn RngCore) -> Result<Self> {
        Ok(Self::new(Mlp::init(spec, rng)?))
    }

    pub fn step(&mut self, grads: &[Option<Matrix>], lr: f64) -> Result<()> {
        self.adam.step(&mut self.mlp.params, grads, lr)
    }

    pub fn reset_optimizer(&mut self) {
        self.adam = AdamState::new(&self.mlp.params);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetId {
    Fa,
    Ma,
    Fz,
    G,
    D,
    My,
}

impl NetId {
    pub const ALL: [NetId; 6] = [NetId::Fa, NetId::Ma, NetId::Fz, NetId::G, NetId::D, NetId::My];

    pub fn name(self) -> &'static str {
        match self {
            NetId::Fa => "f_a",
            NetId::Ma => "m_a",
            NetId::Fz => "f_z",
            NetId::G => "g",
            NetId::D => "d",
            NetId::My => "m_y",
        }
    }
}

/// Parameters and optimizer state for all six networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub input_dim: usize,
    pub f_a: Network,
    pub m_a: Network,
    pub f_z: Network,
    pub g: Network,
    pub d: Network,
    pub m_y: Network,
}

impl ModelBundle {
    pub fn init(input_dim: usize, rng: &mut dyn RngCore) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Config("input_dim must be >= 1".into()));
        }
        Ok(Self {
            input_dim,
            f_a: Network::init(MlpSpec::encoder(input_dim), rng)?,
            m_a: Network::init(MlpSpec::head(), rng)?,
            f_z: Network::init(MlpSpec::encoder(input_dim), rng)?,
            g: Network::init(MlpSpec::decoder(input_dim), rng)?,
            d: Network::init(MlpSpec::head(), rng)?,
            m_y: Network::init(MlpSpec::head(), rng)?,
        })
    }

    pub fn net(&self, id: NetId) -> &Network {
        match id {
            NetId::Fa => &self.f_a,
            NetId::Ma => &self.m_a,
            NetId::Fz => &self.f_z,
            NetId::G => &self.g,
            NetId::D => &self.d,
            NetId::My => &self.m_y,
        }
    }

    pub fn net_mut(&mut self, id: NetId) -> &mut Network {
        match id {
            NetId::Fa => &mut self.f_a,
            NetId::Ma => &mut self.m_a,
            NetId::Fz => &mut self.f_z,
            NetId::G => &mut self.g,
            NetId::D => &mut self.d,
            NetId::My => &mut self.m_y,
        }
    }

    /// Checks that every network's shapes agree with `input_dim`.
    pub fn validate(&self) -> Result<()> {
        let expect = [
            (NetId::Fa, MlpSpec::encoder(self.input_dim)),
            (NetId::Ma, MlpSpec::head()),
            (NetId::Fz, MlpSpec::encoder(self.input_dim)),
            (NetId::G, MlpSpec::decoder(self.input_dim)),
            (NetId::D, MlpSpec::head()),
            (NetId::My, MlpSpec::head()),
        ];
        for (id, spec) in expect {
            let net = self.net(id);
            let shapes: Vec<(usize, usize)> = net.mlp.params.iter().map(Matrix::shape).collect();
            let want: Vec<(usize, usize)> = spec
                .layer_dims()
                .into_iter()
                .flat_map(|(i, o)| [(i, o), (1, o)])
                .collect();
            if net.mlp.spec != spec || shapes != want {
                return Err(Error::Config(alloc::format!(
                    "network {} does not match input_dim {}",
                    id.name(),
                    self.input_dim
                )));
            }
            if net.adam.m.iter().map(Matrix::shape).collect::<Vec<_>>() != want
                || net.adam.v.iter().map(Matrix::shape).collect::<Vec<_>>() != want
            {
                return Err(Error::Config(alloc::format!(
                    "optimizer state of {} has wrong shapes",
                    id.name()
                )));
            }
        }
        Ok(())
    }
}

/// FNV-1a over the bit patterns of a parameter list; used for freeze checks.
pub fn param_fingerprint(params: &[Matrix]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in params {
        for v in p.as_slice() {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
    }
    h
}
