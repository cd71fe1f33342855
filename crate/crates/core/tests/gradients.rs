use textadain::autograd::checks::TIGHT;
use textadain::autograd::{check_gradient, gradcheck_op, GradOp, Graph, StepSize};
use textadain::statswap::{adain_backward, SwapPair};
use textadain::{AxisSet, Rng, Tensor};

fn random_dims(rng: &mut Rng, op: GradOp) -> [usize; 4] {
    let b = 1 + rng.below(2);
    let c = 1 + rng.below(4);
    let h = 2 + rng.below(7);
    let w = 2 + rng.below(15);
    match op {
        GradOp::LinearFrames => [b, c, 1, w],
        GradOp::Ctc => [b, 1, h, 2 + rng.below(3)],
        _ => [b, c, h, w],
    }
}

#[test]
fn every_op_matches_finite_differences_on_twenty_seeds() {
    for op in GradOp::ALL {
        let mut shapes = Rng::new(0x5eed);
        for seed in 0..20 {
            let dims = random_dims(&mut shapes, op);
            let r = gradcheck_op(op, dims, seed, TIGHT).unwrap();
            assert!(r.passes(1e-6), "{op} seed {seed} dims {dims:?}\n{r}");
        }
    }
}

#[test]
fn largest_shape_passes() {
    for op in [GradOp::Adain, GradOp::TextAdain, GradOp::InstanceNorm] {
        let r = gradcheck_op(op, [2, 4, 8, 16], 99, TIGHT).unwrap();
        assert!(r.passes(1e-6), "{op}\n{r}");
    }
}

#[test]
fn adain_backward_donor_gradient_is_exactly_zero() {
    let mut rng = Rng::new(4);
    for kept in AxisSet::VARIANTS {
        let a: Tensor<f64> = Tensor::randn([2, 3, 4, 5], &mut rng, 1.0, 0.0);
        let b: Tensor<f64> = Tensor::randn([2, 3, 4, 5], &mut rng, 2.0, 1.0);
        let up: Tensor<f64> = Tensor::randn([2, 3, 4, 5], &mut rng, 1.0, 0.0);
        let g = adain_backward(SwapPair::new(&a, &b).unwrap(), kept, 1e-4, &up).unwrap();
        assert!(g.d_donor.data().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn donor_leaf_on_tape_gets_exact_zero() {
    let mut rng = Rng::new(8);
    let mut g = Graph::<f64>::new();
    let a = g.leaf(Tensor::randn([2, 2, 3, 4], &mut rng, 1.0, 0.0));
    let b = g.leaf(Tensor::randn([2, 2, 3, 4], &mut rng, 1.0, 0.0));
    let y = g.adain(a, b, AxisSet::CH, 1e-4).unwrap();
    let root = g.dot(y, Tensor::randn([2, 2, 3, 4], &mut rng, 1.0, 0.0)).unwrap();
    let grads = g.backward(root).unwrap();
    let db = grads.get(b).cloned().unwrap_or_else(|| Tensor::zeros([2, 2, 3, 4]));
    assert!(db.data().iter().all(|&v| v == 0.0));
    assert!(grads.get(a).unwrap().max_abs() > 0.0);
}

/// conv3x3 -> instance norm -> ReLU -> 4x1 pool -> per-frame linear ->
/// log-softmax -> CTC, in 64-bit.
struct ToyNet {
    x: Tensor<f64>,
    params: Vec<Tensor<f64>>,
    labels: Vec<Vec<usize>>,
}

impl ToyNet {
    fn new(seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        ToyNet {
            x: Tensor::randn([2, 1, 4, 8], &mut rng, 1.0, 0.0),
            params: vec![
                Tensor::randn([3, 1, 3, 3], &mut rng, 0.6, 0.0),
                Tensor::randn([1, 3, 1, 1], &mut rng, 0.1, 0.0),
                Tensor::randn([1, 3, 1, 1], &mut rng, 0.3, 1.0),
                Tensor::randn([1, 3, 1, 1], &mut rng, 0.3, 0.0),
                Tensor::randn([1, 1, 4, 3], &mut rng, 0.8, 0.0),
                Tensor::randn([1, 1, 1, 4], &mut rng, 0.1, 0.0),
            ],
            labels: vec![vec![1, 2], vec![3]],
        }
    }

    fn loss(&self, g: &mut Graph<f64>, params: &[textadain::autograd::Var]) -> textadain::autograd::Var {
        let x = g.constant(self.x.clone());
        let h = g.conv2d(x, params[0], params[1], 1).unwrap();
        let h = g.instance_norm(h, params[2], params[3], 1e-4).unwrap();
        let h = g.relu(h);
        let h = g.max_pool(h, 4, 1).unwrap();
        let h = g.linear_frames(h, params[4], params[5]).unwrap();
        let lp = g.log_softmax(h);
        g.ctc_loss(lp, &self.labels).unwrap().0
    }

    fn value_with(&self, which: usize, t: &Tensor<f64>) -> f64 {
        let mut g = Graph::new();
        let vars: Vec<_> = self
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| g.constant(if i == which { t.clone() } else { p.clone() }))
            .collect();
        let root = self.loss(&mut g, &vars);
        g.value(root).data()[0]
    }
}

#[test]
fn three_layer_toy_net_matches_finite_differences() {
    for seed in 0..5 {
        let net = ToyNet::new(seed);
        let mut g = Graph::new();
        let vars: Vec<_> = net.params.iter().map(|p| g.leaf(p.clone())).collect();
        let root = net.loss(&mut g, &vars);
        let grads = g.backward(root).unwrap();
        // Instance norm removes any per-channel shift, so the conv bias has a
        // zero gradient and no relative comparison is meaningful for it.
        assert!(grads.get(vars[1]).unwrap().max_abs() < 1e-12);
        for (i, v) in vars.iter().enumerate().filter(|(i, _)| *i != 1) {
            let r = check_gradient(
                |t| net.value_with(i, t),
                &net.params[i],
                grads.get(*v).unwrap(),
                StepSize::default(),
            )
            .unwrap();
            assert!(r.passes(1e-4), "seed {seed} param {i}\n{r}");
        }
    }
}
