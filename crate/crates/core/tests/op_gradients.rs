//! Finite-difference verification of every differentiable tape operation.
//!
//! Each check registers the op's operands as f64 parameters, projects the
//! op's output to a scalar with a fixed random weighting (so every output
//! coordinate influences the loss), and compares the tape's gradients with
//! central differences. Inputs are sampled away from kinks (relu/abs at 0,
//! clamp edges, pooling ties) where the derivative is not defined.

use visage_core::gradcheck::{check_param_grads, CheckOpts};
use visage_core::nn::{param_grads, ParamId, ParamStore};
use visage_core::rng::SeedRng;
use visage_core::tape::{Tape, Var};
use visage_core::tensor::Tensor;

fn rand_in(rng: &mut SeedRng, rows: usize, cols: usize, lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(rows, cols, |_, _| rng.uniform_in(lo, hi))
}

/// Values with |v| in [min_abs, max_abs] and random sign: clear of the
/// origin kink for relu / leaky relu / abs.
fn rand_signed(rng: &mut SeedRng, rows: usize, cols: usize, min_abs: f64, max_abs: f64) -> Tensor<f64> {
    Tensor::from_fn(rows, cols, |_, _| {
        let mag = rng.uniform_in(min_abs, max_abs);
        if rng.below(2) == 0 {
            mag
        } else {
            -mag
        }
    })
}

/// Run a full finite-difference check of `build` over all operand
/// coordinates and assert every one agrees.
fn check_op<F>(name: &str, operands: &[Tensor<f64>], build: F)
where
    F: Fn(&ParamStore<f64>, &mut Tape<f64>, &[Var]) -> Var,
{
    let mut store: ParamStore<f64> = ParamStore::new();
    let ids: Vec<ParamId> = operands
        .iter()
        .enumerate()
        .map(|(i, t)| store.register(&format!("{name}.x{i}"), t.clone()))
        .collect();
    let run = |ps: &ParamStore<f64>, tape: &mut Tape<f64>| -> Var {
        let vars: Vec<Var> = ids.iter().map(|&id| ps.lease(tape, id)).collect();
        build(ps, tape, &vars)
    };

    // fixed projection to a scalar, learned from the output shape
    let proj = {
        let mut tape = Tape::new();
        let y = run(&store, &mut tape);
        let (r, c) = tape.value(y).shape();
        let mut rng = SeedRng::new(0x5EED);
        rand_in(&mut rng, r, c, -1.0, 1.0)
    };
    let scalar_loss = |ps: &ParamStore<f64>| -> (Tape<f64>, Var) {
        let mut tape = Tape::new();
        let y = run(ps, &mut tape);
        let w = tape.constant(proj.clone());
        let p = tape.mul_elem(y, w);
        let s = tape.sum_all(p);
        (tape, s)
    };

    let (tape, loss) = scalar_loss(&store);
    let grads = tape.backward(loss);
    let pairs = param_grads(&grads);
    let total: usize = operands.iter().map(|t| t.len()).sum();
    let with_grads: usize = pairs.iter().map(|(_, g)| g.len()).sum();
    assert_eq!(
        total, with_grads,
        "{name}: every operand coordinate should receive a gradient"
    );

    let report = check_param_grads(
        &mut store,
        &pairs,
        |ps| {
            let (tape, loss) = scalar_loss(ps);
            tape.value(loss).item()
        },
        &CheckOpts::default(),
    );
    assert!(
        report.all_passed(),
        "{name}: {}/{} coordinates passed, worst rel {:.3e}, first failures {:?}",
        report.passed,
        report.checked,
        report.worst_rel,
        report.failures
    );
}

#[test]
fn elementwise_arithmetic() {
    let mut rng = SeedRng::new(1);
    let a = rand_in(&mut rng, 3, 4, -2.0, 2.0);
    let b = rand_in(&mut rng, 3, 4, -2.0, 2.0);
    check_op("add", &[a.clone(), b.clone()], |_, t, v| t.add(v[0], v[1]));
    check_op("sub", &[a.clone(), b.clone()], |_, t, v| t.sub(v[0], v[1]));
    check_op("mul_elem", &[a.clone(), b], |_, t, v| t.mul_elem(v[0], v[1]));
    let denom = rand_in(&mut rng, 3, 4, 0.5, 2.0);
    check_op("div_elem", &[a.clone(), denom], |_, t, v| {
        t.div_elem(v[0], v[1])
    });
    check_op("affine", &[a], |_, t, v| t.affine(v[0], 1.7, -0.3));
}

#[test]
fn matmul_family() {
    let mut rng = SeedRng::new(2);
    let a = rand_in(&mut rng, 2, 3, -1.5, 1.5);
    let b = rand_in(&mut rng, 3, 4, -1.5, 1.5);
    check_op("matmul", &[a.clone(), b.clone()], |_, t, v| {
        t.matmul(v[0], v[1])
    });
    let bt = b.transpose();
    check_op("matmul_nt", &[a.clone(), bt], |_, t, v| {
        t.matmul_nt(v[0], v[1])
    });
    let at = a.transpose();
    check_op("matmul_tn", &[at, b], |_, t, v| t.matmul_tn(v[0], v[1]));
}

#[test]
fn row_broadcast_and_selection() {
    let mut rng = SeedRng::new(3);
    let a = rand_in(&mut rng, 4, 3, -1.0, 1.0);
    let row = rand_in(&mut rng, 1, 3, -1.0, 1.0);
    check_op("add_row", &[a.clone(), row], |_, t, v| t.add_row(v[0], v[1]));
    check_op("select_row", &[a.clone()], |_, t, v| t.select_row(v[0], 1));
    let single = rand_in(&mut rng, 1, 4, -1.0, 1.0);
    check_op("repeat_row", &[single], |_, t, v| t.repeat_row(v[0], 3));
}

#[test]
fn activations() {
    let mut rng = SeedRng::new(4);
    let a = rand_signed(&mut rng, 3, 5, 0.1, 2.0);
    check_op("relu", &[a.clone()], |_, t, v| t.relu(v[0]));
    check_op("leaky_relu", &[a.clone()], |_, t, v| t.leaky_relu(v[0], 0.2));
    check_op("abs", &[a], &|_: &ParamStore<f64>, t: &mut Tape<f64>, v: &[Var]| t.abs(v[0]));
}

#[test]
fn softmax_rows() {
    let mut rng = SeedRng::new(5);
    let a = rand_in(&mut rng, 3, 5, -3.0, 3.0);
    check_op("softmax_rows", &[a], |_, t, v| t.softmax_rows(v[0]));
}

#[test]
fn layer_norm() {
    let mut rng = SeedRng::new(6);
    let x = rand_in(&mut rng, 3, 6, -2.0, 2.0);
    let gamma = rand_in(&mut rng, 1, 6, 0.5, 1.5);
    let beta = rand_in(&mut rng, 1, 6, -0.5, 0.5);
    check_op("layer_norm", &[x, gamma, beta], |_, t, v| {
        t.layer_norm(v[0], v[1], v[2], 1e-5)
    });
}

#[test]
fn embedding_with_repeated_indices() {
    let mut rng = SeedRng::new(7);
    let table = rand_in(&mut rng, 5, 4, -1.0, 1.0);
    check_op("embed", &[table], |_, t, v| {
        t.embed(v[0], &[0, 2, 2, 4, 1, 2])
    });
}

#[test]
fn concatenation_and_layout() {
    let mut rng = SeedRng::new(8);
    let a = rand_in(&mut rng, 2, 2, -1.0, 1.0);
    let b = rand_in(&mut rng, 2, 3, -1.0, 1.0);
    check_op("concat_cols", &[a.clone(), b.clone()], |_, t, v| {
        t.concat_cols(&[v[0], v[1]])
    });
    let c = rand_in(&mut rng, 1, 2, -1.0, 1.0);
    check_op("concat_rows", &[a.clone(), c], |_, t, v| {
        t.concat_rows(&[v[0], v[1]])
    });
    let wide = rand_in(&mut rng, 2, 6, -1.0, 1.0);
    check_op("reshape", &[wide.clone()], |_, t, v| t.reshape(v[0], 3, 4));
    check_op("transpose", &[wide], |_, t, v| t.transpose(v[0]));
    let left = rand_in(&mut rng, 3, 2, -1.0, 1.0);
    let right = rand_in(&mut rng, 3, 3, -1.0, 1.0);
    check_op("scatter_cols", &[left, right], |_, t, v| {
        t.scatter_cols(v[0], v[1], &[0, 3], &[1, 2, 4])
    });
}

#[test]
fn reductions() {
    let mut rng = SeedRng::new(9);
    let a = rand_in(&mut rng, 3, 3, -2.0, 2.0);
    check_op("sum_all", &[a.clone()], |_, t, v| t.sum_all(v[0]));
    check_op("mean_all", &[a], |_, t, v| t.mean_all(v[0]));
}

#[test]
fn scalar_maps() {
    let mut rng = SeedRng::new(10);
    let pos = rand_in(&mut rng, 3, 4, 0.3, 3.0);
    check_op("ln", &[pos.clone()], |_, t, v| t.ln(v[0]));
    check_op("sqrt", &[pos], |_, t, v| t.sqrt(v[0]));
    // clamp: interior and exterior points, all at least 0.01 from the edges
    let mixed = Tensor::from_fn(2, 4, |r, c| match (r, c) {
        (0, 0) => -0.9,
        (0, 1) => -0.3,
        (0, 2) => 0.2,
        (0, 3) => 0.8,
        (1, 0) => 0.45,
        (1, 1) => -0.45,
        (1, 2) => 1.4,
        _ => 0.05,
    });
    check_op("clamp", &[mixed], |_, t, v| t.clamp(v[0], -0.5, 0.5));
}

#[test]
fn max_pooling_away_from_ties() {
    // per-column gaps of at least 0.05 keep the argmax stable under +-h
    let a = Tensor::from_fn(5, 3, |r, c| (r as f64) * 0.11 + (c as f64) * 0.03 - 0.2);
    check_op("max_pool_rows", &[a], |_, t, v| t.max_pool_rows(v[0]));
}

#[test]
fn convolution() {
    let mut rng = SeedRng::new(11);
    let x = rand_in(&mut rng, 6, 2, -1.0, 1.0);
    let w = rand_in(&mut rng, 3, 4 * 2, -0.7, 0.7);
    let b = rand_in(&mut rng, 1, 3, -0.3, 0.3);
    check_op("conv1d", &[x, w, b], |_, t, v| {
        t.conv1d(v[0], v[1], v[2], 4, 2, 1)
    });
}

#[test]
fn box_filter() {
    let mut rng = SeedRng::new(12);
    let a = rand_in(&mut rng, 5, 6, -1.0, 1.0);
    check_op("box_filter", &[a], |_, t, v| t.box_filter(v[0], 3));
}

#[test]
fn cosine_similarity() {
    let mut rng = SeedRng::new(13);
    let a = rand_in(&mut rng, 1, 5, 0.2, 1.0);
    let b = rand_in(&mut rng, 1, 5, -1.0, -0.2);
    check_op("cosine_sim", &[a, b], |_, t, v| {
        t.cosine_sim(v[0], v[1], 1e-8)
    });
}

#[test]
fn kernel_blending() {
    let mut rng = SeedRng::new(14);
    let weights = rand_in(&mut rng, 1, 3, 0.1, 1.0);
    let m0 = rand_in(&mut rng, 2, 4, -1.0, 1.0);
    let m1 = rand_in(&mut rng, 2, 4, -1.0, 1.0);
    let m2 = rand_in(&mut rng, 2, 4, -1.0, 1.0);
    check_op("blend_stack", &[weights, m0, m1, m2], |_, t, v| {
        t.blend_stack(v[0], &v[1..])
    });
}

#[test]
fn composite_chain() {
    // several ops stacked: matmul -> add_row -> softmax -> box filter ->
    // ln -> mean, exercising gradient flow across op boundaries
    let mut rng = SeedRng::new(15);
    let x = rand_in(&mut rng, 4, 3, -1.0, 1.0);
    let w = rand_in(&mut rng, 3, 4, -1.0, 1.0);
    let r = rand_in(&mut rng, 1, 4, -0.5, 0.5);
    check_op("composite", &[x, w, r], |_, t, v| {
        let h = t.matmul(v[0], v[1]);
        let h = t.add_row(h, v[2]);
        let s = t.softmax_rows(h);
        let f = t.box_filter(s, 2);
        let l = t.ln(f);
        t.mean_all(l)
    });
}
