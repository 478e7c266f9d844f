use alloc::vec;
use alloc::vec::Vec;

use super::*;
use crate::kb::parse_kb;

fn ids(kb: &KnowledgeBase, names: &[&str]) -> Vec<SymbolId> {
    names.iter().map(|n| kb.vocab().get(n).unwrap()).collect()
}

fn no_hook() -> impl FnMut(usize, &EmbeddingMatrix) -> Result<Option<f64>> {
    |_, _| Ok(None)
}

fn ctx<'a>(kb: &'a KnowledgeBase, emb: &'a EmbeddingMatrix) -> LossContext<'a> {
    LossContext {
        kb,
        emb,
        table: None,
        prove: ProveOptions::new(2),
        mu: math::DEFAULT_MU,
    }
}

fn loss_value(
    f: fn(&mut Graph, &[TrainingExample], &LossContext<'_>) -> Result<NodeId>,
    kb: &KnowledgeBase,
    emb: &EmbeddingMatrix,
    batch: &[TrainingExample],
) -> f64 {
    let mut g = Graph::new();
    let root = f(&mut g, batch, &ctx(kb, emb)).unwrap();
    g.forward(emb).unwrap();
    g.value(root)
}

#[test]
fn ntp_loss_closed_forms() {
    let mut kb = parse_kb("r(a, b).").unwrap();
    let c = kb.vocab_mut().intern("c");
    let half = core::f64::consts::LN_2;
    // Rows: r, a, b, c. rbf(b, c) = 1/2.
    let emb = EmbeddingMatrix::from_rows(
        &[vec![0.0, 0.0], vec![5.0, 0.0], vec![0.0, 0.0], vec![half, 0.0]],
        true,
    )
    .unwrap();
    let goal = |last| vec![kb.vocab().get("r").unwrap(), kb.vocab().get("a").unwrap(), last];
    let b = kb.vocab().get("b").unwrap();

    // Unmasked proof of a stored fact is exactly 1.
    let mut g = Graph::new();
    let ctx0 = ctx(&kb, &emb);
    let root = ntp_loss(&mut g, &[TrainingExample { atom: goal(b), target: true }], &LossContext { prove: ProveOptions::new(2), ..ctx0 }).unwrap();
    g.forward(&emb).unwrap();
    // The positive is masked against itself, so only the floor remains.
    assert!((g.value(root) - (-math::ln(math::FLOOR))).abs() < 1e-6);

    let pos_half = [TrainingExample { atom: goal(c), target: true }];
    assert!((loss_value(ntp_loss, &kb, &emb, &pos_half) - half).abs() < 1e-12);
    assert!((loss_value(ntp_lambda_loss, &kb, &emb, &pos_half) - 2.0 * half).abs() < 1e-12);

    let far = kb.vocab().get("a").unwrap();
    let neg = [TrainingExample { atom: vec![far, far, far], target: false }];
    let emb_far = EmbeddingMatrix::from_rows(
        &[vec![0.0, 0.0], vec![50.0, 0.0], vec![0.0, 0.0], vec![half, 0.0]],
        true,
    )
    .unwrap();
    assert!(loss_value(ntp_loss, &kb, &emb_far, &neg) < 1e-9);
}

#[test]
fn zero_epochs_keep_initialisation() {
    let kb = parse_kb("r(a, b).\nr(b, c).").unwrap();
    let hp = Hyperparams { k: 4, epochs: 0, ..Default::default() };
    let init = initial_embeddings(&kb, &hp);
    let out = train(&kb, &hp, &mut no_hook()).unwrap();
    assert_eq!(out.emb, init);
    assert!(out.history.is_empty());
}

#[test]
fn complex_only_loss_decreases_on_one_fact() {
    // With two constants, the first- and second-argument corruptions of
    // r(a, b) are r(b, b) and r(a, a), so every epoch sees the same batch.
    let kb = parse_kb("r(a, b).").unwrap();
    let hp = Hyperparams {
        k: 10,
        epochs: 10,
        negatives: 2,
        mode: Mode::ComplexOnly,
        ..Default::default()
    };
    let out = train(&kb, &hp, &mut no_hook()).unwrap();
    let losses: Vec<f64> = out.history.iter().map(|r| r.loss).collect();
    assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
}

#[test]
fn training_is_deterministic() {
    let kb = parse_kb("r(a, b).\nr(b, c).\ns(c, a).\ns(a, d).\nr(X, Y) :- s(Y, X).").unwrap();
    let hp = Hyperparams { k: 5, epochs: 3, seed: 7, ..Default::default() };
    let a = train(&kb, &hp, &mut no_hook()).unwrap();
    let b = train(&kb, &hp, &mut no_hook()).unwrap();
    assert_eq!(a.emb, b.emb);
    assert_eq!(a.history, b.history);
}

#[test]
fn asymmetric_relation_is_learned() {
    let kb = parse_kb("r(a, b).\ns(c, d).\ns(d, e).").unwrap();
    let hp = Hyperparams {
        k: 8,
        epochs: 300,
        mode: Mode::ComplexOnly,
        learning_rate: 0.01,
        seed: 3,
        ..Default::default()
    };
    let out = train(&kb, &hp, &mut no_hook()).unwrap();
    let [r, a, b] = ids(&kb, &["r", "a", "b"])[..] else { unreachable!() };
    let forward = linkpred::score_value(FactQuery::new(r, a, b), &out.emb).unwrap();
    let backward = linkpred::score_value(FactQuery::new(r, b, a), &out.emb).unwrap();
    assert!(forward > backward, "{forward} vs {backward}");
}

#[test]
fn isolated_fact_cannot_prove_itself() {
    let kb = parse_kb("p(a, b).").unwrap();
    let hp = Hyperparams { k: 4, epochs: 30, mode: Mode::Ntp, learning_rate: 0.05, ..Default::default() };
    let out = train(&kb, &hp, &mut no_hook()).unwrap();
    let goal = ids(&kb, &["p", "a", "b"]);
    let opts = ProveOptions::new(2).mask(kb.fact_id(&goal));
    let masked = crate::prover::ntp_prove(&kb, &goal, &out.emb, &opts).unwrap();
    assert!(masked.success.value <= 1e-9);
}

#[test]
fn ntp_gradients_touch_only_witness_rows() {
    let kb = parse_kb("p(a, b).\nq(b, c).\nq(c, d).\np(X, Y) :- q(X, Y).").unwrap();
    let hp = Hyperparams { k: 3, mode: Mode::Ntp, ..Default::default() };
    let emb = initial_embeddings(&kb, &hp);
    let batch: Vec<TrainingExample> = [["p", "a", "c"], ["q", "b", "d"]]
        .iter()
        .map(|n| TrainingExample { atom: ids(&kb, n), target: false })
        .collect();
    let context = ctx(&kb, &emb);
    let ws = witnesses(&context, &batch).unwrap();
    let mut allowed = alloc::collections::BTreeSet::new();
    for w in &ws {
        if let Leaf::Kernel(a, b) = w.leaf {
            allowed.insert(a);
            allowed.insert(b);
        }
    }
    let mut g = Graph::new();
    let root = ntp_loss(&mut g, &batch, &context).unwrap();
    g.forward(&emb).unwrap();
    let grads = g.backward(root, &emb).unwrap();
    for (s, row) in grads.iter() {
        if row.iter().any(|x| *x != 0.0) {
            assert!(allowed.contains(&s));
        }
    }
    assert!(!grads.is_zero());
}

#[test]
fn clipping_bounds_entries() {
    let mut g = [3.0, -0.5, -7.0, 1.0];
    clip(&mut g, 1.0);
    assert_eq!(g, [1.0, -0.5, -1.0, 1.0]);
}

#[test]
fn nan_parameters_abort_with_position() {
    let kb = parse_kb("r(a, b).\nr(b, c).").unwrap();
    let hp = Hyperparams { k: 2, epochs: 2, mode: Mode::Ntp, ..Default::default() };
    let mut emb = initial_embeddings(&kb, &hp);
    emb.as_mut_slice()[0] = f64::NAN;
    let err = train_from(&kb, &hp, emb, &mut no_hook()).unwrap_err();
    assert_eq!(err, Error::Diverged { epoch: 1, batch: 1 });
}

#[test]
fn hook_sees_every_epoch() {
    let kb = parse_kb("r(a, b).\nr(b, c).").unwrap();
    let hp = Hyperparams { k: 2, epochs: 3, ..Default::default() };
    let out = train(&kb, &hp, &mut |epoch, _| Ok(Some(epoch as f64))).unwrap();
    let dev: Vec<_> = out.history.iter().map(|r| r.dev_metric).collect();
    assert_eq!(dev, [Some(1.0), Some(2.0), Some(3.0)]);
}

#[test]
fn modes_parse() {
    assert_eq!("ntp-lambda".parse::<Mode>().unwrap(), Mode::NtpLambda);
    assert_eq!("complex".parse::<Mode>().unwrap(), Mode::ComplexOnly);
    assert!("transe".parse::<Mode>().is_err());
}

#[test]
fn mean_loss_divides_the_likelihood() {
    let kb = parse_kb("r(a, b).\nr(b, c).").unwrap();
    let sum = Hyperparams { k: 2, l2: 0.0, mode: Mode::ComplexOnly, ..Default::default() };
    let mean = Hyperparams { mean_loss: true, ..sum.clone() };
    let emb = initial_embeddings(&kb, &sum);
    let batch: Vec<TrainingExample> = kb.facts().map(|f| TrainingExample::positive(f.head.symbols().unwrap())).collect();
    let run = |hp: &Hyperparams| {
        let mut e = emb.clone();
        let mut adam = Adam::new(e.as_slice().len(), hp.learning_rate);
        step(&kb, hp, &mut e, &mut adam, &batch).unwrap()
    };
    let (s, m) = (run(&sum), run(&mean));
    assert!((s - 2.0 * m).abs() < 1e-12, "{s} vs {m}");
}
