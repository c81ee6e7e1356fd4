//! Graph convolution operators and the per-molecule embedding network.
//!
//! Node features are rows of an `n x d` matrix and every weight matrix maps
//! `d_in -> d_out` by right multiplication. Neighborhood aggregation uses
//! small dense operator matrices built from the graph, which is plenty for
//! molecules of a few dozen heavy atoms.
//!
//! | operator  | update for node i                                         |
//! |-----------|-----------------------------------------------------------|
//! | GraphConv | `x_i W1 + (sum_j e_ij x_j) W2`                            |
//! | SAGEConv  | `x_i W1 + (mean_j x_j) W2`, empty mean is 0               |
//! | GCNConv   | `(sum_{j in N(i)+i} e_ij / sqrt(d_i d_j) x_j) W`, e_ii=1  |
//! | GATConv   | `a_ii x_i W1 + sum_j a_ij x_j W2`, softmax over N(i)+i    |
//! | DMPNN     | directed edge states, see [`DmpnnParams`]                 |

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dense::{Activation, DenseLayer};
use super::params::{ParamId, ParamStore};
use crate::chem::MolecularGraph;
use crate::tensor::{Reduction, Tape, Tensor, TensorError, Var};

/// LeakyReLU slope inside GAT attention logits.
pub const GAT_NEGATIVE_SLOPE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvKind {
    GraphConv,
    SageConv,
    GcnConv,
    GatConv,
    Dmpnn,
}

impl ConvKind {
    pub const ALL: [ConvKind; 5] = [
        ConvKind::GraphConv,
        ConvKind::SageConv,
        ConvKind::GcnConv,
        ConvKind::GatConv,
        ConvKind::Dmpnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConvKind::GraphConv => "graphconv",
            ConvKind::SageConv => "sageconv",
            ConvKind::GcnConv => "gcnconv",
            ConvKind::GatConv => "gatconv",
            ConvKind::Dmpnn => "dmpnn",
        }
    }
}

impl std::str::FromStr for ConvKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ConvKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown convolution {s:?}"))
    }
}

/// Architecture of one embedding network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnnConfig {
    pub kind: ConvKind,
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub representation_dim: usize,
}

impl GnnConfig {
    /// Tuned depth and widths for each operator; also returns the matching
    /// attention dimension.
    pub fn tuned(kind: ConvKind) -> (Self, usize) {
        let (num_layers, hidden_dim, representation_dim, attention) = match kind {
            ConvKind::SageConv => (3, 32, 16, 8),
            ConvKind::GraphConv => (3, 16, 32, 16),
            ConvKind::GcnConv => (3, 16, 16, 8),
            ConvKind::GatConv => (2, 16, 32, 8),
            ConvKind::Dmpnn => (3, 32, 16, 16),
        };
        (
            Self {
                kind,
                num_layers,
                hidden_dim,
                representation_dim,
            },
            attention,
        )
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.num_layers == 0 || self.hidden_dim == 0 || self.representation_dim == 0 {
            return Err(format!("GNN layers and dimensions must be >= 1: {self:?}"));
        }
        Ok(())
    }
}

/// One message-passing layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams {
    pub kind: ConvKind,
    pub input_dim: usize,
    pub output_dim: usize,
    /// Self weight (`W` for GCNConv).
    pub w1: ParamId,
    /// Neighbor weight; absent for GCNConv.
    pub w2: Option<ParamId>,
    /// GAT attention vector, `2*output_dim x 1`.
    pub attention: Option<ParamId>,
}

impl ConvParams {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        kind: ConvKind,
        input_dim: usize,
        output_dim: usize,
        rng: &mut R,
    ) -> Self {
        assert!(kind != ConvKind::Dmpnn, "DMPNN uses DmpnnParams");
        let w1 = store.add_uniform(format!("{prefix}.w1"), input_dim, output_dim, rng);
        let w2 = (kind != ConvKind::GcnConv)
            .then(|| store.add_uniform(format!("{prefix}.w2"), input_dim, output_dim, rng));
        let attention = (kind == ConvKind::GatConv)
            .then(|| store.add_uniform(format!("{prefix}.att"), 2 * output_dim, 1, rng));
        Self {
            kind,
            input_dim,
            output_dim,
            w1,
            w2,
            attention,
        }
    }
}

fn check_input(op: &'static str, x: &Tensor, n: usize, dim: usize) -> Result<(), TensorError> {
    if x.shape() != [n, dim] {
        return Err(TensorError::Shape {
            op,
            lhs: x.shape().to_vec(),
            rhs: vec![n, dim],
        });
    }
    Ok(())
}

/// Edge-weighted adjacency `A[i][j] = e_ij`.
pub fn weighted_adjacency(g: &MolecularGraph) -> Tensor {
    let n = g.num_nodes();
    let mut a = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for &(j, e) in g.neighbors(i) {
            a.data_mut()[i * n + j] = e;
        }
    }
    a
}

/// Row-normalized neighbor indicator; rows of isolated nodes are zero.
pub fn mean_adjacency(g: &MolecularGraph) -> Tensor {
    let n = g.num_nodes();
    let mut a = Tensor::zeros(&[n, n]);
    for i in 0..n {
        let deg = g.neighbors(i).len();
        for &(j, _) in g.neighbors(i) {
            a.data_mut()[i * n + j] = 1.0 / deg as f64;
        }
    }
    a
}

/// Symmetric GCN propagation matrix with unit self loops.
pub fn gcn_propagation(g: &MolecularGraph) -> Tensor {
    let n = g.num_nodes();
    let degree: Vec<f64> = (0..n)
        .map(|i| 1.0 + g.neighbors(i).iter().map(|&(_, e)| e).sum::<f64>())
        .collect();
    let mut a = Tensor::zeros(&[n, n]);
    for i in 0..n {
        a.data_mut()[i * n + i] = 1.0 / degree[i];
        for &(j, e) in g.neighbors(i) {
            a.data_mut()[i * n + j] = e / (degree[i] * degree[j]).sqrt();
        }
    }
    a
}

/// Attention mask over `N(i) + {i}`.
pub fn self_inclusive_mask(g: &MolecularGraph) -> Tensor {
    let n = g.num_nodes();
    let mut m = Tensor::identity(n);
    for i in 0..n {
        for &(j, _) in g.neighbors(i) {
            m.data_mut()[i * n + j] = 1.0;
        }
    }
    m
}

/// Applies one convolution to node features `x` (`n x input_dim`).
pub fn conv_forward(
    tape: &mut Tape,
    layer: &ConvParams,
    params: &[Var],
    graph: &MolecularGraph,
    x: Var,
) -> Result<Var, TensorError> {
    let n = graph.num_nodes();
    check_input("conv_forward", tape.value(x), n, layer.input_dim)?;
    let w1 = params[layer.w1.0];
    match layer.kind {
        ConvKind::GraphConv | ConvKind::SageConv => {
            let w2 = params[layer.w2.expect("neighbor weight").0];
            let op = if layer.kind == ConvKind::GraphConv {
                weighted_adjacency(graph)
            } else {
                mean_adjacency(graph)
            };
            let op = tape.constant(op);
            let self_term = tape.matmul(x, w1)?;
            let agg = tape.matmul(op, x)?;
            let nb_term = tape.matmul(agg, w2)?;
            tape.add(self_term, nb_term)
        }
        ConvKind::GcnConv => {
            let op = tape.constant(gcn_propagation(graph));
            let agg = tape.matmul(op, x)?;
            tape.matmul(agg, w1)
        }
        ConvKind::GatConv => {
            let (alpha, h_self, h_nb) = gat_attention(tape, layer, params, graph, x)?;
            let eye = tape.constant(Tensor::identity(n));
            let mut off = self_inclusive_mask(graph);
            for i in 0..n {
                off.data_mut()[i * n + i] = 0.0;
            }
            let off = tape.constant(off);
            let a_self = tape.mul(alpha, eye)?;
            let a_nb = tape.mul(alpha, off)?;
            let s = tape.matmul(a_self, h_self)?;
            let nb = tape.matmul(a_nb, h_nb)?;
            tape.add(s, nb)
        }
        ConvKind::Dmpnn => Err(TensorError::Contract("DMPNN layers run through dmpnn_forward")),
    }
}

/// GAT coefficients `alpha` (`n x n`, zero outside `N(i)+i`) together with
/// the projected features `x W1` and `x W2`.
pub fn gat_attention(
    tape: &mut Tape,
    layer: &ConvParams,
    params: &[Var],
    graph: &MolecularGraph,
    x: Var,
) -> Result<(Var, Var, Var), TensorError> {
    let n = graph.num_nodes();
    let out = layer.output_dim;
    let w1 = params[layer.w1.0];
    let w2 = params[layer.w2.expect("neighbor weight").0];
    let att = params[layer.attention.expect("attention vector").0];
    let h_self = tape.matmul(x, w1)?;
    let h_nb = tape.matmul(x, w2)?;
    let a_src = tape.slice_rows(att, 0, out)?;
    let a_dst = tape.slice_rows(att, out, out)?;
    let s_src = tape.matmul(h_self, a_src)?; // n x 1
    let s_dst = tape.matmul(h_nb, a_dst)?; // n x 1
    let ones_row = tape.constant(Tensor::filled(&[1, n], 1.0));
    let ones_col = tape.constant(Tensor::filled(&[n, 1], 1.0));
    let s_dst_t = tape.transpose(s_dst)?;
    let rows = tape.matmul(s_src, ones_row)?;
    let cols = tape.matmul(ones_col, s_dst_t)?;
    let logits = tape.add(rows, cols)?;
    let logits = tape.leaky_relu(logits, GAT_NEGATIVE_SLOPE)?;
    let alpha = tape.masked_softmax_rows(logits, &self_inclusive_mask(graph))?;
    Ok((alpha, h_self, h_nb))
}

/// Directed message passing on bond states.
///
/// `h0_ij = relu([x_i, e_ij] W_in)`, then `iterations` updates
/// `h_ij <- relu(h0_ij + (sum_{k in N(i), k != j} h_ki) W_h)`, and the node
/// readout `v_i = relu([x_i, sum_j h_ji] W_out)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DmpnnParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub iterations: usize,
    pub w_in: ParamId,
    pub w_h: ParamId,
    pub w_out: ParamId,
}

impl DmpnnParams {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        iterations: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            input_dim,
            hidden_dim,
            iterations,
            w_in: store.add_uniform(format!("{prefix}.w_in"), input_dim + 1, hidden_dim, rng),
            w_h: store.add_uniform(format!("{prefix}.w_h"), hidden_dim, hidden_dim, rng),
            w_out: store.add_uniform(
                format!("{prefix}.w_out"),
                input_dim + hidden_dim,
                hidden_dim,
                rng,
            ),
        }
    }
}

/// Directed edges `(source, target, e)` in bond order, both directions.
fn directed_edges(g: &MolecularGraph) -> Vec<(usize, usize, f64)> {
    g.edges()
        .iter()
        .flat_map(|b| {
            let (i, j) = b.endpoints;
            let e = b.order_code();
            [(i, j, e), (j, i, e)]
        })
        .collect()
}

pub fn dmpnn_forward(
    tape: &mut Tape,
    p: &DmpnnParams,
    params: &[Var],
    graph: &MolecularGraph,
    x: Var,
    iterations: usize,
) -> Result<Var, TensorError> {
    let n = graph.num_nodes();
    check_input("dmpnn_forward", tape.value(x), n, p.input_dim)?;
    if iterations == 0 {
        return Err(TensorError::Contract("DMPNN needs at least one iteration"));
    }
    let edges = directed_edges(graph);
    let m = edges.len();
    let incoming = if m == 0 {
        tape.constant(Tensor::zeros(&[n, p.hidden_dim]))
    } else {
        let mut select = Tensor::zeros(&[m, n]);
        let mut bond = Tensor::zeros(&[m, 1]);
        let mut gather_in = Tensor::zeros(&[n, m]);
        let mut pass = Tensor::zeros(&[m, m]);
        for (a, &(i, j, e)) in edges.iter().enumerate() {
            select.data_mut()[a * n + i] = 1.0;
            bond.data_mut()[a] = e;
            gather_in.data_mut()[j * m + a] = 1.0;
            // messages into edge i->j come from every k->i except j->i
            for (b, &(k, t, _)) in edges.iter().enumerate() {
                if t == i && k != j {
                    pass.data_mut()[a * m + b] = 1.0;
                }
            }
        }
        let select = tape.constant(select);
        let bond = tape.constant(bond);
        let pass = tape.constant(pass);
        let gather_in = tape.constant(gather_in);

        let x_src = tape.matmul(select, x)?;
        let edge_in = tape.concat(&[x_src, bond], 1)?;
        let pre = tape.matmul(edge_in, params[p.w_in.0])?;
        let h0 = tape.relu(pre)?;
        let mut h = h0;
        for _ in 0..iterations {
            let msg = tape.matmul(pass, h)?;
            let msg = tape.matmul(msg, params[p.w_h.0])?;
            let s = tape.add(h0, msg)?;
            h = tape.relu(s)?;
        }
        tape.matmul(gather_in, h)?
    };
    let readout_in = tape.concat(&[x, incoming], 1)?;
    let v = tape.matmul(readout_in, params[p.w_out.0])?;
    tape.relu(v)
}

pub fn global_mean_pool(tape: &mut Tape, node_feats: Var) -> Result<Var, TensorError> {
    if tape.value(node_feats).shape().first() == Some(&0) {
        return Err(TensorError::Contract("mean pool over zero nodes"));
    }
    tape.reduce(node_feats, Reduction::Mean, Some(0))
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConvStack {
    Layers(Vec<ConvParams>),
    Dmpnn(DmpnnParams),
}

/// Embedding network: convolutions, mean pooling, `log M`, dense readout.
#[derive(Clone, Debug, PartialEq)]
pub struct GnnEncoder {
    pub config: GnnConfig,
    pub input_dim: usize,
    pub stack: ConvStack,
    pub readout: DenseLayer,
}

impl GnnEncoder {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        config: &GnnConfig,
        input_dim: usize,
        rng: &mut R,
    ) -> Self {
        let h = config.hidden_dim;
        let stack = match config.kind {
            ConvKind::Dmpnn => ConvStack::Dmpnn(DmpnnParams::new(
                store,
                &format!("{prefix}.dmpnn"),
                input_dim,
                h,
                config.num_layers,
                rng,
            )),
            kind => ConvStack::Layers(
                (0..config.num_layers)
                    .map(|l| {
                        let d_in = if l == 0 { input_dim } else { h };
                        ConvParams::new(store, &format!("{prefix}.conv.{l}"), kind, d_in, h, rng)
                    })
                    .collect(),
            ),
        };
        let readout = DenseLayer::new(
            store,
            &format!("{prefix}.readout"),
            h + 1,
            config.representation_dim,
            Activation::None,
            rng,
        );
        Self {
            config: config.clone(),
            input_dim,
            stack,
            readout,
        }
    }

    /// Node states after all message passing (`n x hidden_dim`).
    pub fn node_states(
        &self,
        tape: &mut Tape,
        params: &[Var],
        graph: &MolecularGraph,
    ) -> Result<Var, TensorError> {
        let x = tape.constant(graph.node_features().clone());
        match &self.stack {
            ConvStack::Dmpnn(p) => dmpnn_forward(tape, p, params, graph, x, p.iterations),
            ConvStack::Layers(layers) => {
                let mut h = x;
                for (l, layer) in layers.iter().enumerate() {
                    h = conv_forward(tape, layer, params, graph, h)?;
                    if l + 1 < layers.len() {
                        h = tape.relu(h)?;
                    }
                }
                Ok(h)
            }
        }
    }

    /// Molecule representation `z` as a `1 x representation_dim` row.
    pub fn embed(
        &self,
        tape: &mut Tape,
        params: &[Var],
        graph: &MolecularGraph,
    ) -> Result<Var, TensorError> {
        let h = self.node_states(tape, params, graph)?;
        let pooled = global_mean_pool(tape, h)?;
        let log_m = tape.constant(Tensor::scalar(graph.log_mol_weight()));
        let feat = tape.concat(&[pooled, log_m], 0)?;
        let row = tape.reshape(feat, &[1, self.config.hidden_dim + 1])?;
        self.readout.forward(tape, params, row)
    }
}
