use super::{
    edge_param_name, edge_type_aggregator, neighbor_aggregator, AggregateCache, EdgeType, EdgeTypeAggregator,
    HeteroGraph, Mlp, MlpTrace, ModelConfig, NeighborAggregator, NodeKind, CLASSIFIER, FLOW_ENCODER, IP_ENCODER,
};
use crate::error::{Error, Result};
use crate::tensor::{cross_entropy, ParameterSet, Rng, Tensor};

/// Hidden states of every IP and flow node.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeState {
    pub ip: Tensor,
    pub flow: Tensor,
}

impl NodeState {
    pub fn get(&self, kind: NodeKind) -> &Tensor {
        match kind {
            NodeKind::Ip => &self.ip,
            NodeKind::Flow => &self.flow,
        }
    }

    pub fn get_mut(&mut self, kind: NodeKind) -> &mut Tensor {
        match kind {
            NodeKind::Ip => &mut self.ip,
            NodeKind::Flow => &mut self.flow,
        }
    }

    fn zeros_like(&self) -> NodeState {
        NodeState {
            ip: Tensor::zeros(self.ip.rows(), self.ip.cols()),
            flow: Tensor::zeros(self.flow.rows(), self.flow.cols()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepKind {
    Temporal,
    Spatial,
}

impl StepKind {
    pub fn edge_types(self) -> [EdgeType; 4] {
        match self {
            StepKind::Temporal => EdgeType::TEMPORAL,
            StepKind::Spatial => EdgeType::SPATIAL,
        }
    }
}

const NO_ROW: usize = usize::MAX;

/// Nodes of one kind updated by a step.
#[derive(Clone, Debug)]
struct Touched {
    /// Updated node rows, ascending.
    nodes: Vec<usize>,
    /// Number of edge types reaching each updated node.
    type_counts: Vec<usize>,
    /// Pre-activation after the edge-type combination, one row per updated node.
    pre: Tensor,
}

#[derive(Clone, Debug)]
struct EdgeTrace {
    edge: EdgeType,
    /// Position in `Touched::nodes` of every adjacency destination.
    rows: Vec<usize>,
    aggregated: Tensor,
    cache: AggregateCache,
}

/// Everything one temporal or spatial step needs for its backward pass.
#[derive(Clone, Debug)]
pub struct StepTrace {
    pub kind: StepKind,
    pub layer: usize,
    pub input: NodeState,
    pub output: NodeState,
    touched: [Touched; 2],
    edges: Vec<EdgeTrace>,
}

impl StepTrace {
    /// Rows of `kind` this step rewrote; all others passed through unchanged.
    pub fn updated(&self, kind: NodeKind) -> &[usize] {
        &self.touched[kind_slot(kind)].nodes
    }
}

fn kind_slot(kind: NodeKind) -> usize {
    match kind {
        NodeKind::Ip => 0,
        NodeKind::Flow => 1,
    }
}

const KINDS: [NodeKind; 2] = [NodeKind::Ip, NodeKind::Flow];

/// Encoders plus all message-passing steps.
#[derive(Clone, Debug)]
pub struct TrunkTrace {
    flow_pre: Tensor,
    ip_pre: Tensor,
    pub initial: NodeState,
    pub steps: Vec<StepTrace>,
}

impl TrunkTrace {
    pub fn final_state(&self) -> &NodeState {
        self.steps.last().map_or(&self.initial, |s| &s.output)
    }

    /// Smallest |pre-activation| anywhere in the trunk; finite differences
    /// are only trustworthy when this is comfortably above the step size.
    pub fn min_abs_preactivation(&self) -> f64 {
        let mut m = f64::INFINITY;
        let mut scan = |t: &Tensor| {
            for v in t.data() {
                m = m.min(v.abs());
            }
        };
        scan(&self.flow_pre);
        scan(&self.ip_pre);
        for s in &self.steps {
            for t in &s.touched {
                scan(&t.pre);
            }
        }
        m
    }
}

#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub trunk: TrunkTrace,
    pub head: MlpTrace,
    /// Classifier output, one row per target flow.
    pub logits: Tensor,
}

impl ForwardTrace {
    pub fn min_abs_preactivation(&self) -> f64 {
        self.head
            .hidden_pre
            .iter()
            .flat_map(|t| t.data())
            .fold(self.trunk.min_abs_preactivation(), |m, v| m.min(v.abs()))
    }
}

/// The spatio-temporal GNN. Holds the architecture only; parameters live in
/// a separate [`ParameterSet`] so training can clone and update them freely.
#[derive(Clone)]
pub struct StGnn {
    pub config: ModelConfig,
    agg1: &'static dyn NeighborAggregator,
    agg2: &'static dyn EdgeTypeAggregator,
    classifier: Mlp,
}

impl std::fmt::Debug for StGnn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StGnn")
            .field("config", &self.config)
            .field("agg1", &self.agg1.name())
            .field("agg2", &self.agg2.name())
            .finish()
    }
}

impl StGnn {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let agg1 = neighbor_aggregator(&config.neighbor_aggregator)?;
        let agg2 = edge_type_aggregator(&config.edge_type_aggregator)?;
        let classifier = Mlp::new(CLASSIFIER, config.classifier_dims(), config.activation);
        Ok(StGnn {
            config,
            agg1,
            agg2,
            classifier,
        })
    }

    pub fn classifier(&self) -> &Mlp {
        &self.classifier
    }

    /// Names and shapes of every trunk parameter (encoders and layers).
    pub fn trunk_shapes(&self) -> Vec<(String, usize, usize)> {
        let c = &self.config;
        let h = c.hidden_size;
        let mut out = vec![
            (format!("{FLOW_ENCODER}.W"), c.flow_input_dim(), h),
            (format!("{FLOW_ENCODER}.b"), 1, h),
            (format!("{IP_ENCODER}.W"), c.ip_input_dim(), h),
            (format!("{IP_ENCODER}.b"), 1, h),
        ];
        for l in 0..c.num_layers {
            for e in EdgeType::ALL {
                out.push((edge_param_name(l, e, "W1"), h, h));
                out.push((edge_param_name(l, e, "W2"), h, h));
            }
        }
        out
    }

    /// Names and shapes of every parameter, trunk then classifier.
    pub fn param_shapes(&self) -> Vec<(String, usize, usize)> {
        let mut out = self.trunk_shapes();
        let d = &self.classifier.dims;
        for l in 0..self.classifier.num_layers() {
            out.push((self.classifier.weight_name(l), d[l], d[l + 1]));
            out.push((self.classifier.bias_name(l), 1, d[l + 1]));
        }
        out
    }

    pub fn is_trunk_param(name: &str) -> bool {
        name.starts_with("encoder.") || name.starts_with("layer")
    }

    /// Glorot-uniform weights and zero biases, drawn in [`Self::param_shapes`] order.
    pub fn init_params(&self, rng: &mut Rng) -> ParameterSet {
        let mut p = self.init_trunk(rng);
        self.init_classifier(rng, &mut p);
        p
    }

    pub fn init_trunk(&self, rng: &mut Rng) -> ParameterSet {
        self.trunk_shapes()
            .into_iter()
            .map(|(name, r, c)| {
                let t = if name.ends_with(".b") {
                    Tensor::zeros(r, c)
                } else {
                    rng.glorot(r, c)
                };
                (name, t)
            })
            .collect()
    }

    pub fn init_classifier(&self, rng: &mut Rng, params: &mut ParameterSet) {
        self.classifier.init(rng, params);
    }

    /// Checks that `params` holds exactly the expected tensors.
    pub fn check_params(&self, params: &ParameterSet) -> Result<()> {
        let shapes = self.param_shapes();
        for (name, r, c) in &shapes {
            match params.get(name) {
                None => return Err(Error::Incompatible(format!("missing tensor {name}"))),
                Some(t) if t.shape() != (*r, *c) => {
                    return Err(Error::Incompatible(format!(
                        "tensor {name} has shape {}x{}, expected {r}x{c}",
                        t.rows(),
                        t.cols()
                    )))
                }
                _ => {}
            }
        }
        if let Some(extra) = params.names().find(|n| !shapes.iter().any(|(s, _, _)| s == n)) {
            return Err(Error::Incompatible(format!("unexpected tensor {extra}")));
        }
        Ok(())
    }

    fn encode(&self, params: &ParameterSet, prefix: &str, x: &Tensor) -> Result<(Tensor, Tensor)> {
        let w = params.require(&format!("{prefix}.W"))?;
        let b = params.require(&format!("{prefix}.b"))?;
        if x.cols() != w.rows() {
            if x.rows() == 0 {
                return Ok((Tensor::zeros(0, w.cols()), Tensor::zeros(0, w.cols())));
            }
            return Err(Error::Shape(format!(
                "{prefix} expects {} input columns, graph has {}",
                w.rows(),
                x.cols()
            )));
        }
        let mut pre = x.matmul(w);
        pre.add_row_vector(b.data());
        let h = self.config.activation.apply(&pre);
        Ok((pre, h))
    }

    /// One temporal or spatial step of layer `layer`.
    pub fn step(
        &self,
        kind: StepKind,
        layer: usize,
        graph: &HeteroGraph,
        params: &ParameterSet,
        input: NodeState,
    ) -> Result<StepTrace> {
        let d = self.config.hidden_size;
        let mut output = input.clone();
        let mut edges = Vec::new();
        let mut touched: [Touched; 2] = std::array::from_fn(|_| Touched {
            nodes: Vec::new(),
            type_counts: Vec::new(),
            pre: Tensor::zeros(0, d),
        });
        for dst_kind in KINDS {
            let types: Vec<EdgeType> = kind
                .edge_types()
                .into_iter()
                .filter(|e| e.dst_kind() == dst_kind && !graph.adjacency(*e).is_empty())
                .collect();
            let n = input.get(dst_kind).rows();
            let mut counts = vec![0usize; n];
            for e in &types {
                for &v in &graph.adjacency(*e).dsts {
                    counts[v] += 1;
                }
            }
            let nodes: Vec<usize> = (0..n).filter(|&v| counts[v] > 0).collect();
            let mut row_of = vec![NO_ROW; n];
            for (i, &v) in nodes.iter().enumerate() {
                row_of[v] = i;
            }
            let mut pre = Tensor::zeros(nodes.len(), d);
            for e in types {
                let adj = graph.adjacency(e);
                let w1 = params.require(&edge_param_name(layer, e, "W1"))?;
                let w2 = params.require(&edge_param_name(layer, e, "W2"))?;
                let self_term = input.get(dst_kind).gather_rows(&adj.dsts).matmul(w1);
                let (aggregated, cache) = self.agg1.forward(input.get(e.src_kind()), adj);
                let neigh = aggregated.matmul(w2);
                let rows: Vec<usize> = adj.dsts.iter().map(|&v| row_of[v]).collect();
                for (i, &r) in rows.iter().enumerate() {
                    for ((p, a), b) in pre.row_mut(r).iter_mut().zip(self_term.row(i)).zip(neigh.row(i)) {
                        *p += a + b;
                    }
                }
                edges.push(EdgeTrace {
                    edge: e,
                    rows,
                    aggregated,
                    cache,
                });
            }
            let type_counts: Vec<usize> = nodes.iter().map(|&v| counts[v]).collect();
            for (i, &c) in type_counts.iter().enumerate() {
                let s = self.agg2.scale(c);
                if s != 1.0 {
                    pre.row_mut(i).iter_mut().for_each(|x| *x *= s);
                }
            }
            let act = self.config.activation.apply(&pre);
            let out = output.get_mut(dst_kind);
            for (i, &v) in nodes.iter().enumerate() {
                out.row_mut(v).copy_from_slice(act.row(i));
            }
            touched[kind_slot(dst_kind)] = Touched {
                nodes,
                type_counts,
                pre,
            };
        }
        Ok(StepTrace {
            kind,
            layer,
            input,
            output,
            touched,
            edges,
        })
    }

    fn step_backward(
        &self,
        trace: &StepTrace,
        graph: &HeteroGraph,
        params: &ParameterSet,
        grad_out: &NodeState,
        grads: &mut ParameterSet,
    ) -> Result<NodeState> {
        let d = self.config.hidden_size;
        let mut grad_in = grad_out.clone();
        let mut dpre: [Tensor; 2] = std::array::from_fn(|_| Tensor::zeros(0, d));
        for kind in KINDS {
            let t = &trace.touched[kind_slot(kind)];
            let upstream = grad_out.get(kind).gather_rows(&t.nodes);
            let mut g = self.config.activation.backward(&t.pre, &upstream);
            for (i, &c) in t.type_counts.iter().enumerate() {
                let s = self.agg2.scale(c);
                if s != 1.0 {
                    g.row_mut(i).iter_mut().for_each(|x| *x *= s);
                }
            }
            let gin = grad_in.get_mut(kind);
            for &v in &t.nodes {
                gin.row_mut(v).iter_mut().for_each(|x| *x = 0.0);
            }
            dpre[kind_slot(kind)] = g;
        }
        for et in &trace.edges {
            let e = et.edge;
            let adj = graph.adjacency(e);
            let (n1, n2) = (
                edge_param_name(trace.layer, e, "W1"),
                edge_param_name(trace.layer, e, "W2"),
            );
            let w1 = params.require(&n1)?;
            let w2 = params.require(&n2)?;
            let g = dpre[kind_slot(e.dst_kind())].gather_rows(&et.rows);

            let hv = trace.input.get(e.dst_kind()).gather_rows(&adj.dsts);
            hv.t_matmul_acc(&g, grads.entry_zeros(&n1, d, d));
            let dhv = g.matmul_t(w1);
            let gdst = grad_in.get_mut(e.dst_kind());
            for (i, &v) in adj.dsts.iter().enumerate() {
                for (o, x) in gdst.row_mut(v).iter_mut().zip(dhv.row(i)) {
                    *o += x;
                }
            }

            et.aggregated.t_matmul_acc(&g, grads.entry_zeros(&n2, d, d));
            let dagg = g.matmul_t(w2);
            self.agg1.backward(adj, &et.cache, &dagg, grad_in.get_mut(e.src_kind()));
        }
        Ok(grad_in)
    }

    pub fn trunk_forward(&self, graph: &HeteroGraph, params: &ParameterSet) -> Result<TrunkTrace> {
        let (flow_pre, flow) = self.encode(params, FLOW_ENCODER, &graph.flow_inputs)?;
        let (ip_pre, ip) = self.encode(params, IP_ENCODER, &graph.ip_inputs)?;
        let initial = NodeState { ip, flow };
        let mut steps = Vec::with_capacity(2 * self.config.num_layers);
        let mut state = initial.clone();
        for layer in 0..self.config.num_layers {
            for kind in [StepKind::Temporal, StepKind::Spatial] {
                let t = self.step(kind, layer, graph, params, state)?;
                state = t.output.clone();
                steps.push(t);
            }
        }
        Ok(TrunkTrace {
            flow_pre,
            ip_pre,
            initial,
            steps,
        })
    }

    /// Backpropagates a gradient on the final node states into trunk parameters.
    pub fn trunk_backward(
        &self,
        graph: &HeteroGraph,
        params: &ParameterSet,
        trace: &TrunkTrace,
        grad_final: NodeState,
        grads: &mut ParameterSet,
    ) -> Result<()> {
        let mut g = grad_final;
        for step in trace.steps.iter().rev() {
            g = self.step_backward(step, graph, params, &g, grads)?;
        }
        let act = self.config.activation;
        for (prefix, x, pre, gh) in [
            (FLOW_ENCODER, &graph.flow_inputs, &trace.flow_pre, &g.flow),
            (IP_ENCODER, &graph.ip_inputs, &trace.ip_pre, &g.ip),
        ] {
            if x.rows() == 0 {
                continue;
            }
            let dpre = act.backward(pre, gh);
            x.t_matmul_acc(&dpre, grads.entry_zeros(&format!("{prefix}.W"), x.cols(), dpre.cols()));
            let b = grads.entry_zeros(&format!("{prefix}.b"), 1, dpre.cols());
            for (o, s) in b.data_mut().iter_mut().zip(dpre.sum_rows()) {
                *o += s;
            }
        }
        Ok(())
    }

    /// Logits for every target flow, in `graph.target_flows` order.
    pub fn forward(&self, graph: &HeteroGraph, params: &ParameterSet) -> Result<ForwardTrace> {
        let trunk = self.trunk_forward(graph, params)?;
        let emb = trunk.final_state().flow.gather_rows(&graph.target_flows);
        let (logits, head) = self.classifier.forward(params, &emb)?;
        Ok(ForwardTrace { trunk, head, logits })
    }

    pub fn predict(&self, graph: &HeteroGraph, params: &ParameterSet) -> Result<Vec<(u64, usize, Vec<f64>)>> {
        let t = self.forward(graph, params)?;
        Ok(graph
            .target_flows
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let row = t.logits.row(i);
                (graph.flow_ids[r], argmax(row), row.to_vec())
            })
            .collect())
    }

    /// Backpropagates a gradient on the logits.
    pub fn backward(
        &self,
        graph: &HeteroGraph,
        params: &ParameterSet,
        trace: &ForwardTrace,
        grad_logits: &Tensor,
        grads: &mut ParameterSet,
    ) -> Result<()> {
        let demb = self.classifier.backward(params, &trace.head, grad_logits, grads)?;
        let fin = trace.trunk.final_state();
        let mut g = fin.zeros_like();
        for (i, &r) in graph.target_flows.iter().enumerate() {
            for (o, x) in g.flow.row_mut(r).iter_mut().zip(demb.row(i)) {
                *o += x;
            }
        }
        self.trunk_backward(graph, params, &trace.trunk, g, grads)
    }

    /// Summed (not averaged) weighted cross-entropy over the labelled target
    /// flows, with its gradient. Callers divide by the total labelled count
    /// so batches of graphs reduce to one mean.
    pub fn loss_and_grad(
        &self,
        graph: &HeteroGraph,
        params: &ParameterSet,
        class_weights: Option<&[f64]>,
    ) -> Result<(f64, usize, ParameterSet)> {
        let mut grads = ParameterSet::new();
        let labelled: Vec<(usize, usize)> = graph
            .target_labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.map(|l| (i, l)))
            .collect();
        if labelled.is_empty() {
            return Ok((0.0, 0, grads));
        }
        let trace = self.forward(graph, params)?;
        let rows: Vec<usize> = labelled.iter().map(|&(i, _)| i).collect();
        let targets: Vec<usize> = labelled.iter().map(|&(_, l)| l).collect();
        let logits = trace.logits.gather_rows(&rows);
        let (mean, mut dlogits) = cross_entropy(&logits, &targets, class_weights)?;
        let n = targets.len();
        dlogits.scale(n as f64);
        let mut full = Tensor::zeros(trace.logits.rows(), trace.logits.cols());
        for (k, &i) in rows.iter().enumerate() {
            full.row_mut(i).copy_from_slice(dlogits.row(k));
        }
        self.backward(graph, params, &trace, &full, &mut grads)?;
        Ok((mean * n as f64, n, grads))
    }
}

/// Index of the first maximum.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{check_gradients, Activation};

    fn tiny_graph() -> HeteroGraph {
        // 3 flows, 3 IPs; flows 0,1 share a source, flow 2 recurs flow 0.
        let flow_inputs = Tensor::from_vec(3, 3, vec![0.5, -0.2, 1.0, 0.1, 0.9, -0.4, -0.7, 0.3, 0.2]).unwrap();
        let ip_inputs = Tensor::from_vec(3, 2, vec![1.0, 0.3, 1.0, -0.6, 1.0, 0.8]).unwrap();
        let mut edges: [Vec<(usize, usize)>; 8] = Default::default();
        edges[EdgeType::SameSrc.index()] = vec![(0, 1)];
        edges[EdgeType::FlowRecurrence.index()] = vec![(0, 2)];
        edges[EdgeType::IpRecurrence.index()] = vec![(0, 2)];
        edges[EdgeType::FlowToSrc.index()] = vec![(0, 0), (1, 0), (2, 2)];
        edges[EdgeType::SrcToFlow.index()] = vec![(0, 0), (0, 1), (2, 2)];
        edges[EdgeType::FlowToDst.index()] = vec![(0, 1), (1, 1), (2, 1)];
        edges[EdgeType::DstToFlow.index()] = vec![(1, 0), (1, 1), (1, 2)];
        HeteroGraph::from_parts(
            flow_inputs,
            ip_inputs,
            edges,
            vec![10, 11, 12],
            vec![1, 2],
            vec![Some(0), Some(1)],
            0,
        )
    }

    fn config(agg1: &str, agg2: &str) -> ModelConfig {
        ModelConfig {
            num_layers: 2,
            hidden_size: 4,
            classifier_layers: 2,
            classifier_hidden: 3,
            neighbor_aggregator: agg1.into(),
            edge_type_aggregator: agg2.into(),
            num_classes: 2,
            feature_dim: 1,
            flow_encoding_dim: 2,
            window_encoding_dim: 1,
            ..Default::default()
        }
    }

    #[test]
    fn gradients_match_finite_differences_for_every_aggregator() {
        let g = tiny_graph();
        for (a1, a2) in [("mean", "sum"), ("sum", "mean"), ("max", "sum")] {
            let model = StGnn::new(config(a1, a2)).unwrap();
            let mut rng = Rng::new(3);
            let params = model.init_params(&mut rng);
            model.check_params(&params).unwrap();
            let report = check_gradients(
                |p| {
                    let (l, _, g) = model.loss_and_grad(&g, p, Some(&[0.7, 1.3])).unwrap();
                    (l, g)
                },
                &params,
                1e-5,
            );
            assert!(report.max_rel_error < 1e-4, "{a1}/{a2}: {report:?}");
        }
    }

    #[test]
    fn untouched_nodes_pass_through() {
        let g = tiny_graph();
        let model = StGnn::new(config("mean", "sum")).unwrap();
        let params = model.init_params(&mut Rng::new(1));
        let trunk = model.trunk_forward(&g, &params).unwrap();
        let temporal = &trunk.steps[0];
        assert_eq!(temporal.kind, StepKind::Temporal);
        assert_eq!(temporal.updated(NodeKind::Flow), &[1, 2]);
        assert_eq!(temporal.updated(NodeKind::Ip), &[2]);
        assert_eq!(temporal.output.flow.row(0), temporal.input.flow.row(0));
        assert_eq!(temporal.output.ip.row(1), temporal.input.ip.row(1));
        let spatial = &trunk.steps[1];
        assert_eq!(spatial.input, temporal.output);
        assert_eq!(spatial.updated(NodeKind::Ip), &[0, 1, 2]);
    }

    #[test]
    fn identity_activation_single_layer_by_hand() {
        // One flow, one IP, one src_to_flow edge; sum everywhere.
        let mut cfg = config("sum", "sum");
        cfg.num_layers = 1;
        cfg.hidden_size = 1;
        cfg.activation = Activation::Identity;
        cfg.feature_dim = 0;
        cfg.flow_encoding_dim = 1;
        cfg.window_encoding_dim = 0;
        let model = StGnn::new(cfg).unwrap();
        let mut params = model.init_params(&mut Rng::new(0));
        let set = |p: &mut ParameterSet, n: &str, v: f64| p.get_mut(n).unwrap().data_mut()[0] = v;
        set(&mut params, "encoder.flow.W", 2.0);
        set(&mut params, "encoder.ip.W", 3.0);
        set(&mut params, &edge_param_name(0, EdgeType::SrcToFlow, "W1"), 0.5);
        set(&mut params, &edge_param_name(0, EdgeType::SrcToFlow, "W2"), 4.0);
        let mut edges: [Vec<(usize, usize)>; 8] = Default::default();
        edges[EdgeType::SrcToFlow.index()] = vec![(0, 0)];
        let g = HeteroGraph::from_parts(
            Tensor::from_vec(1, 1, vec![1.5]).unwrap(),
            Tensor::from_vec(1, 1, vec![1.0]).unwrap(),
            edges,
            vec![7],
            vec![0],
            vec![None],
            0,
        );
        let trunk = model.trunk_forward(&g, &params).unwrap();
        // flow: 2·1.5 = 3; ip: 3·1 = 3; updated flow = 0.5·3 + 4·3 = 13.5
        assert_eq!(trunk.final_state().flow.data(), &[13.5]);
        assert_eq!(trunk.final_state().ip.data(), &[3.0]);
    }

    #[test]
    fn unlabelled_targets_give_no_loss() {
        let mut g = tiny_graph();
        g.target_labels = vec![None, None];
        let model = StGnn::new(config("mean", "sum")).unwrap();
        let params = model.init_params(&mut Rng::new(1));
        let (l, n, grads) = model.loss_and_grad(&g, &params, None).unwrap();
        assert_eq!((l, n, grads.len()), (0.0, 0, 0));
    }

    #[test]
    fn check_params_names_the_offender() {
        let model = StGnn::new(config("mean", "sum")).unwrap();
        let mut params = model.init_params(&mut Rng::new(1));
        params.insert("encoder.flow.W", Tensor::zeros(2, 4));
        let err = model.check_params(&params).unwrap_err().to_string();
        assert!(err.contains("encoder.flow.W"), "{err}");
    }
}
