//! The trainable cells and their feedforward networks.
//!
//! Four networks drive the recursion: the encoder net (two embeddings plus a
//! patch in, three gating vectors out), the decoder net (one embedding in,
//! four half-embedding gating vectors plus two logit patches out) and the two
//! border nets that supply the half-embeddings missing at the top row and
//! leftmost column of the decode triangle. Hidden layers use ELU, output
//! layers are linear. An optional variational head maps an embedding to
//! per-coordinate log standard deviations.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::optim::{ParamId, ParamStore};
use crate::tensor::{Tape, Var};

/// Architecture of the cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    /// Embedding dimension; must be even because the decoder splits
    /// embeddings into halves.
    pub m: usize,
    /// Patch side; cells consume/produce `l*l` matrix patches.
    pub l: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub vae: bool,
}

impl CellConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.m == 0 || !self.m.is_multiple_of(2) {
            return Err(format!(
                "embedding size m = {} must be positive and even",
                self.m
            ));
        }
        if self.l == 0 {
            return Err("patch side l must be positive".into());
        }
        if self
            .encoder_hidden
            .iter()
            .chain(&self.decoder_hidden)
            .any(|&w| w == 0)
        {
            return Err("hidden layer widths must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MlpLayer {
    pub w: ParamId,
    pub b: ParamId,
}

/// Feedforward network with ELU hidden layers and a linear output layer.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<MlpLayer>,
}

impl Mlp {
    /// Registers layers `dims[0] -> dims[1] -> ... -> dims.last()`. Weights
    /// are uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
    fn build(store: &mut ParamStore, rng: &mut ChaCha8Rng, prefix: &str, dims: &[usize]) -> Self {
        let mut layers = Vec::new();
        for i in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[i], dims[i + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f32).sqrt();
            let values: Vec<f32> = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            let w = store.add(format!("{prefix}.w{i}"), vec![fan_out, fan_in], values);
            let b = store.add(format!("{prefix}.b{i}"), vec![fan_out], vec![0.0; fan_out]);
            layers.push(MlpLayer { w, b });
        }
        Mlp { layers }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Var {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            let w = tape.param(store, layer.w);
            let b = tape.param(store, layer.b);
            let wx = tape.matvec(w, h);
            h = tape.add(wx, b);
            if i + 1 < self.layers.len() {
                h = tape.elu(h);
            }
        }
        h
    }
}

/// All trainable weights of the autoencoder.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub config: CellConfig,
    pub store: ParamStore,
    pub f_enc: Mlp,
    pub f_dec: Mlp,
    pub f_border_left: Mlp,
    pub f_border_right: Mlp,
    pub f_var: Option<Mlp>,
}

fn mlp_dims(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut dims = vec![input];
    dims.extend_from_slice(hidden);
    dims.push(output);
    dims
}

impl ModelParams {
    /// Initializes all networks from `seed`. Registration order is fixed so
    /// checkpoints and runs reproduce bit-exactly.
    pub fn init(config: CellConfig, seed: u64) -> Self {
        config.validate().expect("invalid cell config");
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let (m, l2) = (config.m, config.l * config.l);
        let h = m / 2;
        // border nets reuse the decoder widths scaled to half-embedding I/O
        let half_hidden: Vec<usize> = config
            .decoder_hidden
            .iter()
            .map(|&w| (w / 2).max(1))
            .collect();

        let f_enc = Mlp::build(
            &mut store,
            &mut rng,
            "f_e",
            &mlp_dims(2 * m + l2, &config.encoder_hidden, 3 * m),
        );
        let f_dec = Mlp::build(
            &mut store,
            &mut rng,
            "f_d",
            &mlp_dims(m, &config.decoder_hidden, 2 * m + 2 * l2),
        );
        let f_border_left = Mlp::build(&mut store, &mut rng, "f_d1", &mlp_dims(h, &half_hidden, m));
        let f_border_right =
            Mlp::build(&mut store, &mut rng, "f_d2", &mlp_dims(h, &half_hidden, m));
        let f_var = config.vae.then(|| {
            Mlp::build(
                &mut store,
                &mut rng,
                "f_rho",
                &mlp_dims(m, &config.encoder_hidden, m),
            )
        });
        ModelParams {
            config,
            store,
            f_enc,
            f_dec,
            f_border_left,
            f_border_right,
            f_var,
        }
    }
}

/// `base o sigmoid(z) + elu(hat) o (1 - sigmoid(z))`
fn gate(tape: &mut Tape, base: Var, z: Var, hat: Var) -> Var {
    let g = tape.sigmoid(z);
    let neg = tape.scale(g, -1.0);
    let one_minus = tape.add_scalar(neg, 1.0);
    let keep = tape.mul(base, g);
    let act = tape.elu(hat);
    let adjust = tape.mul(act, one_minus);
    tape.add(keep, adjust)
}

/// Encoder cell: combines the embeddings of two overlapping subgraphs and an
/// adjacency patch into the embedding of their union. Absent inputs (the
/// first recursion layer) are the zero vector, both for the network input and
/// for the gated average.
pub fn encoder_cell(
    tape: &mut Tape,
    model: &ModelParams,
    x0: Option<Var>,
    x1: Option<Var>,
    patch: &[f32],
) -> Var {
    let m = model.config.m;
    let l2 = model.config.l * model.config.l;
    assert_eq!(
        patch.len(),
        l2,
        "patch has {} entries, expected {}",
        patch.len(),
        l2
    );
    let x0 = x0.unwrap_or_else(|| tape.zeros(m));
    let x1 = x1.unwrap_or_else(|| tape.zeros(m));
    assert_eq!(tape.shape(x0), &[m], "encoder_cell: x0 dimension mismatch");
    assert_eq!(tape.shape(x1), &[m], "encoder_cell: x1 dimension mismatch");
    let a = tape.vector(patch);
    let input = tape.concat(&[x0, x1, a]);
    let u = model.f_enc.forward(tape, &model.store, input);

    let z0 = tape.slice(u, 0, m);
    let z1 = tape.slice(u, m, m);
    let x_hat = tape.slice(u, 2 * m, m);

    // weighted average of the two inputs, gated by z0
    let g0 = tape.sigmoid(z0);
    let neg = tape.scale(g0, -1.0);
    let one_minus_g0 = tape.add_scalar(neg, 1.0);
    let left = tape.mul(x0, g0);
    let right = tape.mul(x1, one_minus_g0);
    let avg = tape.add(left, right);
    gate(tape, avg, z1, x_hat)
}

/// Outputs of one decoder cell application.
#[derive(Debug, Clone, Copy)]
pub struct DecoderCellOut {
    /// Left half of the embedding one row down.
    pub left: Var,
    /// Right half of the embedding one column right.
    pub right: Var,
    /// `l*l` adjacency logits (sigmoid applied only at loss/threshold sites).
    pub b_patch: Var,
    /// `l*l` size-indicator logits.
    pub c_patch: Var,
}

/// Decoder cell: splits an embedding into two gated half-embeddings and
/// emits the adjacency and size-indicator logit patches.
pub fn decoder_cell(tape: &mut Tape, model: &ModelParams, y: Var) -> DecoderCellOut {
    let m = model.config.m;
    let l2 = model.config.l * model.config.l;
    assert_eq!(
        tape.shape(y),
        &[m],
        "decoder_cell: embedding dimension mismatch"
    );
    let h = m / 2;
    let u = model.f_dec.forward(tape, &model.store, y);

    let z_left = tape.slice(u, 0, h);
    let z_right = tape.slice(u, h, h);
    let hat_left = tape.slice(u, 2 * h, h);
    let hat_right = tape.slice(u, 3 * h, h);
    let b_patch = tape.slice(u, 4 * h, l2);
    let c_patch = tape.slice(u, 4 * h + l2, l2);

    let y_left = tape.slice(y, 0, h);
    let y_right = tape.slice(y, h, h);
    let left = gate(tape, y_left, z_left, hat_left);
    let right = gate(tape, y_right, z_right, hat_right);
    DecoderCellOut {
        left,
        right,
        b_patch,
        c_patch,
    }
}

/// Border cell for the top row: produces the left half-embedding that no
/// upper neighbor supplies.
pub fn border_cell_left(tape: &mut Tape, model: &ModelParams, y_prime: Var) -> Var {
    let h = model.config.m / 2;
    assert_eq!(
        tape.shape(y_prime),
        &[h],
        "border_cell_left: half-embedding dimension mismatch"
    );
    let u = model.f_border_left.forward(tape, &model.store, y_prime);
    let z = tape.slice(u, 0, h);
    let hat = tape.slice(u, h, h);
    gate(tape, y_prime, z, hat)
}

/// Border cell for the leftmost column, symmetric to [`border_cell_left`].
pub fn border_cell_right(tape: &mut Tape, model: &ModelParams, y_dprime: Var) -> Var {
    let h = model.config.m / 2;
    assert_eq!(
        tape.shape(y_dprime),
        &[h],
        "border_cell_right: half-embedding dimension mismatch"
    );
    let u = model.f_border_right.forward(tape, &model.store, y_dprime);
    let z = tape.slice(u, 0, h);
    let hat = tape.slice(u, h, h);
    gate(tape, y_dprime, z, hat)
}

/// Reparameterized sample plus the closed-form KL divergence to the standard
/// normal: `x + xi o exp(rho)` with `xi ~ N(0, I)` and
/// `kl = 0.5 * sum(exp(2 rho) + x^2 - 1 - 2 rho)`.
pub fn variational_head(
    tape: &mut Tape,
    model: &ModelParams,
    x: Var,
    rng: &mut ChaCha8Rng,
) -> (Var, Var) {
    let m = model.config.m;
    let f_var = model
        .f_var
        .as_ref()
        .expect("variational head requires vae mode");
    let rho = f_var.forward(tape, &model.store, x);

    let xi: Vec<f32> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
    let xi = tape.vector(&xi);
    let sigma = tape.exp(rho);
    let noise = tape.mul(xi, sigma);
    let x_sampled = tape.add(x, noise);

    let two_rho = tape.scale(rho, 2.0);
    let var_term = tape.exp(two_rho);
    let var_sum = tape.sum(var_term);
    let norm = tape.sq_norm(x);
    let rho_sum = tape.sum(rho);
    let t = tape.add(var_sum, norm);
    let t = tape.add_scalar(t, -(m as f32));
    let neg2rho = tape.scale(rho_sum, -2.0);
    let t = tape.add(t, neg2rho);
    let kl = tape.scale(t, 0.5);
    (x_sampled, kl)
}
