use super::*;

fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let up = f(&xp);
        xp[i] = x[i] - h;
        let down = f(&xp);
        xp[i] = x[i];
        grad[i] = (up - down) / (2.0 * h);
    }
    grad
}

fn assert_close(got: &[f64], want: &[f64], rel: f64, abs: f64) {
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(want) {
        let diff = (g - w).abs();
        assert!(
            diff <= abs || diff <= rel * w.abs().max(g.abs()),
            "got {g}, want {w}"
        );
    }
}

#[test]
fn matmul_hand_case() {
    let tape = Tape::new();
    let a = tape.constant(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]);
    let b = tape.constant(&[2, 1], vec![1.0, 1.0]);
    let c = a.matmul(&b).unwrap();
    assert_eq!(c.values(), vec![3.0, 7.0]);
    assert_eq!(c.shape(), vec![2, 1]);
}

#[test]
fn relu_definition() {
    let tape = Tape::new();
    let x = tape.constant(&[3], vec![-1.0, 0.0, 2.0]);
    assert_eq!(x.relu().values(), vec![0.0, 0.0, 2.0]);
}

#[test]
fn sin_zero_has_unit_derivative() {
    let tape = Tape::new();
    let x = tape.leaf(&[1], vec![0.0]);
    let y = x.sin().sum();
    assert_eq!(y.scalar_value(), 0.0);
    tape.backward(&y).unwrap();
    assert_eq!(x.grad().unwrap(), vec![1.0]);
}

#[test]
fn square_sum_gradient() {
    // loss = sum(x * x), x = [1,2,3] -> grad 2x
    let tape = Tape::new();
    let x = tape.leaf(&[3], vec![1.0, 2.0, 3.0]);
    let loss = x.mul(&x).unwrap().sum();
    tape.backward(&loss).unwrap();
    assert_eq!(x.grad().unwrap(), vec![2.0, 4.0, 6.0]);
}

#[test]
fn tensor_used_twice_sums_both_paths() {
    // f = x*x + sin(x) -> f' = 2x + cos(x)
    let tape = Tape::new();
    let x = tape.leaf(&[1], vec![0.7]);
    let f = x.mul(&x).unwrap().add(&x.sin()).unwrap().sum();
    tape.backward(&f).unwrap();
    let want = 2.0 * 0.7 + 0.7f64.cos();
    assert!((x.grad().unwrap()[0] - want).abs() < 1e-12);
}

#[test]
fn backward_twice_is_an_error() {
    let tape = Tape::new();
    let x = tape.leaf(&[1], vec![1.0]);
    let y = x.mul(&x).unwrap().sum();
    tape.backward(&y).unwrap();
    assert!(matches!(
        tape.backward(&y),
        Err(Error::BackwardAlreadyRun)
    ));
    tape.reset_backward();
    tape.backward(&y).unwrap();
    assert_eq!(x.grad().unwrap(), vec![2.0]);
}

#[test]
fn backward_rejects_non_scalar_loss() {
    let tape = Tape::new();
    let x = tape.leaf(&[2], vec![1.0, 2.0]);
    let y = x.mul(&x).unwrap();
    assert!(matches!(
        tape.backward(&y),
        Err(Error::NonScalarLoss { .. })
    ));
}

#[test]
fn shape_mismatch_is_structured() {
    let tape = Tape::new();
    let a = tape.constant(&[2], vec![1.0, 2.0]);
    let b = tape.constant(&[3], vec![1.0, 2.0, 3.0]);
    match a.add(&b) {
        Err(Error::ShapeMismatch { op, lhs, rhs }) => {
            assert_eq!(op, "add");
            assert_eq!(lhs, vec![2]);
            assert_eq!(rhs, vec![3]);
        }
        other => panic!("expected shape mismatch, got {other:?}", other = other.map(|_| ())),
    }
}

#[test]
fn scalar_broadcast_both_sides() {
    let tape = Tape::new();
    let x = tape.leaf(&[3], vec![1.0, 2.0, 3.0]);
    let c = tape.scalar(2.0);
    let y = c.mul(&x).unwrap(); // scalar on the left
    assert_eq!(y.values(), vec![2.0, 4.0, 6.0]);
    let z = x.add(&c).unwrap();
    assert_eq!(z.values(), vec![3.0, 4.0, 5.0]);
    let loss = y.add(&z).unwrap().sum();
    tape.backward(&loss).unwrap();
    assert_eq!(x.grad().unwrap(), vec![3.0, 3.0, 3.0]);
}

#[test]
fn concat_slice_round_trip_gradients() {
    let tape = Tape::new();
    let a = tape.leaf(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]);
    let b = tape.leaf(&[2, 1], vec![5.0, 6.0]);
    let c = Tensor::concat(&[&a, &b], 1).unwrap();
    assert_eq!(c.values(), vec![1.0, 2.0, 5.0, 3.0, 4.0, 6.0]);
    let right = c.slice(1, 2, 3).unwrap();
    assert_eq!(right.values(), vec![5.0, 6.0]);
    let loss = right.mul(&right).unwrap().sum();
    tape.backward(&loss).unwrap();
    assert_eq!(b.grad().unwrap(), vec![10.0, 12.0]);
    assert!(a.grad().is_none() || a.grad().unwrap() == vec![0.0; 4]);
}

#[test]
fn outer_flattens_row_major() {
    let tape = Tape::new();
    let u = tape.constant(&[2], vec![1.0, 2.0]);
    let v = tape.constant(&[2], vec![0.5, 0.5]);
    let o = u.outer(&v).unwrap();
    assert_eq!(o.shape(), vec![2, 2]);
    assert_eq!(o.values(), vec![0.5, 0.5, 1.0, 1.0]);
}

#[test]
fn batched_outer_matches_per_row() {
    let tape = Tape::new();
    let u = tape.leaf(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]);
    let v = tape.leaf(&[2, 3], vec![1.0, 0.0, -1.0, 0.5, 0.5, 0.5]);
    let o = u.outer(&v).unwrap();
    assert_eq!(o.shape(), vec![2, 6]);
    assert_eq!(
        o.values(),
        vec![1.0, 0.0, -1.0, 2.0, 0.0, -2.0, 1.5, 1.5, 1.5, 2.0, 2.0, 2.0]
    );
    let loss = o.sum();
    tape.backward(&loss).unwrap();
    // d/du_i = sum_j v_j per row
    assert_eq!(u.grad().unwrap(), vec![0.0, 0.0, 1.5, 1.5]);
    assert_eq!(v.grad().unwrap(), vec![3.0, 3.0, 3.0, 7.0, 7.0, 7.0]);
}

#[test]
fn transpose_and_reshape_gradients() {
    let tape = Tape::new();
    let a = tape.leaf(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    let t = a.transpose().unwrap();
    assert_eq!(t.shape(), vec![3, 2]);
    assert_eq!(t.values(), vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    let r = t.reshape(&[6]).unwrap();
    let w = tape.constant(&[6], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    let loss = r.mul(&w).unwrap().sum();
    tape.backward(&loss).unwrap();
    // grad wrt a[i][j] is w at transposed position
    assert_eq!(a.grad().unwrap(), vec![1.0, 3.0, 5.0, 2.0, 4.0, 6.0]);
}

#[test]
fn gradients_match_finite_differences_on_a_small_composite() {
    // f(x, w) = mean(tanh(x @ w) + sigmoid(x @ w))
    let x0 = vec![0.3, -0.2, 0.8, 0.5, -0.7, 0.1];
    let w0 = vec![0.4, -0.6, 0.2, 0.9, -0.3, 0.7];
    let eval = |xs: &[f64]| {
        let tape = Tape::new();
        let x = tape.constant(&[2, 3], xs[..6].to_vec());
        let w = tape.constant(&[3, 2], xs[6..].to_vec());
        let z = x.matmul(&w).unwrap();
        z.tanh().add(&z.sigmoid()).unwrap().mean().scalar_value()
    };
    let mut all = x0.clone();
    all.extend_from_slice(&w0);

    let tape = Tape::new();
    let x = tape.leaf(&[2, 3], x0.clone());
    let w = tape.leaf(&[3, 2], w0.clone());
    let z = x.matmul(&w).unwrap();
    let loss = z.tanh().add(&z.sigmoid()).unwrap().mean();
    tape.backward(&loss).unwrap();

    let fd = fd_grad(eval, &all, 1e-5);
    assert_close(&x.grad().unwrap(), &fd[..6], 1e-6, 1e-9);
    assert_close(&w.grad().unwrap(), &fd[6..], 1e-6, 1e-9);
}

#[test]
fn forward_is_bit_deterministic() {
    let run = || {
        let tape = Tape::new();
        let x = tape.leaf(&[4], vec![0.11, -0.53, 1.7, 2.9]);
        let y = x.sin().mul(&x.exp()).unwrap().add(&x.tanh()).unwrap().sum();
        tape.backward(&y).unwrap();
        (y.scalar_value(), x.grad().unwrap())
    };
    let (v1, g1) = run();
    let (v2, g2) = run();
    assert_eq!(v1.to_bits(), v2.to_bits());
    for (a, b) in g1.iter().zip(&g2) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn param_store_round_trip_through_tape() {
    let mut store = ParamStore::new();
    store.insert("w", vec![2], vec![1.0, -2.0]);
    let tape = Tape::new();
    let w = tape.param(&store, "w").unwrap();
    let loss = w.mul(&w).unwrap().sum();
    tape.backward(&loss).unwrap();
    tape.accumulate_grads(&mut store).unwrap();
    assert_eq!(store.get("w").unwrap().grad, vec![2.0, -4.0]);
}

#[test]
fn first_nonfinite_names_the_node() {
    let tape = Tape::new();
    let x = tape.constant(&[1], vec![-1.0]);
    let bad = x.log(); // ln(-1) = NaN
    let _later = bad.exp();
    let found = tape.first_nonfinite().unwrap();
    assert!(found.contains("log"), "got {found}");
}
