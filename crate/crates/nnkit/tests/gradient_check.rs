//! Reverse-mode gradients checked against the central finite-difference
//! oracle, layer by layer and through the full actor/critic stacks.

use nnkit::gradcheck::{central_diff, max_rel_error};
use nnkit::{softmax, softmax_backward, ActorCritic, ArchSpec, Conv1d, Conv2d, Dense};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FD_STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn conv1d_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let conv = Conv1d::new(&mut rng, 2, 3, 3);
    let len = 7;
    let x = rand_vec(&mut rng, len * 2);
    let cost_w = rand_vec(&mut rng, len * 3);

    let loss = |c: &Conv1d| -> f64 {
        c.forward(&x, len)
            .iter()
            .zip(&cost_w)
            .map(|(y, w)| y * w)
            .sum()
    };
    let (dw, db, dx) = conv.backward(&x, len, &cost_w);

    let n = conv.w.len();
    let packed: Vec<f64> = conv.w.iter().chain(&conv.b).cloned().collect();
    let fd = central_diff(
        |p| {
            let mut c = conv.clone();
            c.w.copy_from_slice(&p[..n]);
            c.b.copy_from_slice(&p[n..]);
            loss(&c)
        },
        &packed,
        FD_STEP,
    );
    let analytic: Vec<f64> = dw.iter().chain(&db).cloned().collect();
    assert!(max_rel_error(&analytic, &fd) < TOL);

    let fd_x = central_diff(
        |xs| {
            conv.forward(xs, len)
                .iter()
                .zip(&cost_w)
                .map(|(y, w)| y * w)
                .sum()
        },
        &x,
        FD_STEP,
    );
    assert!(max_rel_error(&dx, &fd_x) < TOL);
}

#[test]
fn conv2d_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let conv = Conv2d::new(&mut rng, 2, 2, 3, 3);
    let (h, w) = (5, 4);
    let x = rand_vec(&mut rng, h * w * 2);
    let cost_w = rand_vec(&mut rng, h * w * 2);

    let (dw, db, dx) = conv.backward(&x, h, w, &cost_w);
    let n = conv.w.len();
    let packed: Vec<f64> = conv.w.iter().chain(&conv.b).cloned().collect();
    let fd = central_diff(
        |p| {
            let mut c = conv.clone();
            c.w.copy_from_slice(&p[..n]);
            c.b.copy_from_slice(&p[n..]);
            c.forward(&x, h, w)
                .iter()
                .zip(&cost_w)
                .map(|(y, cw)| y * cw)
                .sum()
        },
        &packed,
        FD_STEP,
    );
    let analytic: Vec<f64> = dw.iter().chain(&db).cloned().collect();
    assert!(max_rel_error(&analytic, &fd) < TOL);

    let fd_x = central_diff(
        |xs| {
            conv.forward(xs, h, w)
                .iter()
                .zip(&cost_w)
                .map(|(y, cw)| y * cw)
                .sum()
        },
        &x,
        FD_STEP,
    );
    assert!(max_rel_error(&dx, &fd_x) < TOL);
}

#[test]
fn dense_quadratic_loss_matches_closed_form() {
    // L = 0.5 * ||Wx + b - t||^2  =>  dW = (y - t) x^T, db = y - t
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let d = Dense::new(&mut rng, 4, 3);
    let x = rand_vec(&mut rng, 4);
    let t = rand_vec(&mut rng, 3);
    let y = d.forward(&x);
    let gout: Vec<f64> = y.iter().zip(&t).map(|(yi, ti)| yi - ti).collect();
    let (dw, db, _) = d.backward(&x, &gout);
    for o in 0..3 {
        assert!((db[o] - (y[o] - t[o])).abs() < 1e-12);
        for i in 0..4 {
            assert!((dw[o * 4 + i] - (y[o] - t[o]) * x[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn softmax_backward_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let logits = rand_vec(&mut rng, 6);
    let cost_w = rand_vec(&mut rng, 6);
    let probs = softmax(&logits);
    let analytic = softmax_backward(&probs, &cost_w);
    let fd = central_diff(
        |z| softmax(z).iter().zip(&cost_w).map(|(p, w)| p * w).sum(),
        &logits,
        FD_STEP,
    );
    assert!(max_rel_error(&analytic, &fd) < TOL);
}

#[test]
fn zero_output_gradient_gives_zero_parameter_gradients() {
    let spec = ArchSpec {
        n_rows: 4,
        n_cols: 4,
        conv1_filters: 2,
        conv1_kernel: 3,
        conv2_filters: 2,
        conv2_kh: 3,
        conv2_kw: 3,
        n_actions: 4,
    };
    let ac = ActorCritic::new(&spec, 5).unwrap();
    let state = vec![0.3; 16];
    let (_, cache) = ac.actor.forward(&state).unwrap();
    let grads = ac.actor.backward(&cache, &vec![0.0; 4]);
    assert!(grads.iter().all(|g| *g == 0.0));
}

fn policy_loss(net: &nnkit::PolicyNet, state: &[f64], action: usize, adv: f64, beta: f64) -> f64 {
    let (p, _) = net.forward(state).unwrap();
    let entropy: f64 = -p.iter().map(|pi| pi * pi.max(1e-300).ln()).sum::<f64>();
    -p[action].max(1e-300).ln() * adv - beta * entropy
}

/// d(loss)/d(probs) for the actor loss above.
fn policy_dprobs(p: &[f64], action: usize, adv: f64, beta: f64) -> Vec<f64> {
    p.iter()
        .enumerate()
        .map(|(i, pi)| {
            let mut g = beta * (pi.max(1e-300).ln() + 1.0);
            if i == action {
                g -= adv / pi.max(1e-300);
            }
            g
        })
        .collect()
}

#[test]
fn full_actor_critic_gradient_check() {
    let spec = ArchSpec {
        n_rows: 6,
        n_cols: 4,
        conv1_filters: 4,
        conv1_kernel: 3,
        conv2_filters: 3,
        conv2_kh: 3,
        conv2_kw: 3,
        n_actions: 6,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0_f64;
    for trial in 0..10 {
        let ac = ActorCritic::new(&spec, 100 + trial).unwrap();
        let state: Vec<f64> = (0..spec.input_dim())
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        let action = rng.random_range(0..spec.n_actions);
        let adv = rng.random_range(-2.0..2.0);
        let beta = 0.01;

        // actor: policy-gradient loss with entropy bonus
        let (p, cache) = ac.actor.forward(&state).unwrap();
        let analytic = ac.actor.backward(&cache, &policy_dprobs(&p, action, adv, beta));
        let params = ac.actor.params();
        let fd = central_diff(
            |q| {
                let mut net = ac.actor.clone();
                net.set_params(q).unwrap();
                policy_loss(&net, &state, action, adv, beta)
            },
            &params,
            FD_STEP,
        );
        worst = worst.max(max_rel_error(&analytic, &fd));

        // critic: squared error against a fixed target
        let target = rng.random_range(-5.0..5.0);
        let (v, vcache) = ac.critic.forward(&state).unwrap();
        let analytic_v = ac.critic.backward(&vcache, 2.0 * (v - target));
        let vparams = ac.critic.params();
        let fd_v = central_diff(
            |q| {
                let mut net = ac.critic.clone();
                net.set_params(q).unwrap();
                let (val, _) = net.forward(&state).unwrap();
                (val - target) * (val - target)
            },
            &vparams,
            FD_STEP,
        );
        worst = worst.max(max_rel_error(&analytic_v, &fd_v));
    }
    assert!(worst < TOL, "max relative error {worst} >= {TOL}");
}
