use textguard::features::{SequenceBatch, SparseVector};
use textguard::models::{
    bilstm_forward, deep_forward, hybrid_forward, lstm_forward, predict, train_logistic_baseline, Classifier,
    DeepModel, DenseHead, EncoderConfig, HybridModel, LogisticModel, Recurrent, RecurrentKind, TokenInput,
    TrainConfig, CLS_ID, ID_OFFSET,
};
use textguard::numeric::{Prng, Tensor};

fn random_sequences(n: usize, dim: usize, rng: &mut Prng) -> Vec<Tensor> {
    (0..n)
        .map(|_| {
            let len = 1 + rng.below(6);
            Tensor::new(vec![len, dim], (0..len * dim).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
        })
        .collect()
}

/// The head written out by hand: ReLU(W·h + b), then a single output unit
/// and the logistic function.
fn head_oracle(head: &DenseHead, h: &[f64]) -> f64 {
    let (dense, input) = (head.dense_dim(), head.input_dim());
    let w = head.dense_w.data();
    let mut z = head.out_b.data()[0];
    for j in 0..dense {
        let pre: f64 = head.dense_b.data()[j] + (0..input).map(|i| w[j * input + i] * h[i]).sum::<f64>();
        z += head.out_w.data()[j] * pre.max(0.0);
    }
    1.0 / (1.0 + (-z).exp())
}

#[test]
fn deep_forward_is_recurrent_then_head() {
    let mut rng = Prng::new(11);
    for kind in [RecurrentKind::Lstm, RecurrentKind::Bilstm] {
        let model = DeepModel::init(kind, 3, 4, 5, &mut rng).unwrap();
        let batch = SequenceBatch::from_sequences(&random_sequences(6, 3, &mut rng), 7, 3).unwrap();
        let features = match &model.recurrent {
            Recurrent::Lstm(p) => lstm_forward(p, &batch).unwrap().0,
            Recurrent::BiLstm(p) => bilstm_forward(p, &batch).unwrap(),
        };
        let probs = deep_forward(&model, &batch).unwrap();
        for (b, p) in probs.iter().enumerate() {
            let expected = head_oracle(&model.head, features.row(b));
            assert!((p - expected).abs() < 1e-12, "{kind:?} row {b}: {p} vs {expected}");
        }
    }
}

#[test]
fn zero_output_layer_gives_one_half() {
    let mut rng = Prng::new(5);
    let mut model = DeepModel::init(RecurrentKind::Bilstm, 3, 4, 5, &mut rng).unwrap();
    model.head.out_w = Tensor::zeros(model.head.out_w.shape());
    model.head.out_b = Tensor::zeros(&[1]);
    let batch = SequenceBatch::from_sequences(&random_sequences(4, 3, &mut rng), 6, 3).unwrap();
    assert!(deep_forward(&model, &batch).unwrap().iter().all(|&p| p == 0.5));

    let cfg = EncoderConfig {
        n_layers: 1,
        n_heads: 2,
        hidden_dim: 4,
        ff_dim: 4,
        max_positions: 8,
        vocab_size: 10,
        cls_index: CLS_ID,
    };
    let mut hybrid = HybridModel::init(cfg, RecurrentKind::Lstm, 3, 3, &mut rng).unwrap();
    hybrid.head.out_w = Tensor::zeros(hybrid.head.out_w.shape());
    hybrid.head.out_b = Tensor::zeros(&[1]);
    let input = TokenInput::new(vec![ID_OFFSET, ID_OFFSET + 2, 0], vec![true, true, false]).unwrap();
    assert_eq!(hybrid_forward(&hybrid, &input).unwrap(), 0.5);
}

#[test]
fn logistic_bias_on_empty_features_learns_the_log_odds() {
    let n = 100;
    let positives = 30;
    let data: Vec<(SparseVector, u8)> = (0..n).map(|i| (SparseVector::empty(4), u8::from(i < positives))).collect();
    let config = TrainConfig {
        epochs: 600,
        batch_size: n,
        lr: 0.05,
        early_stop_patience: 0,
        val_fraction: 0.0,
        ..TrainConfig::default()
    };
    let (model, _) = train_logistic_baseline(&data, &config).unwrap();
    let rate = positives as f64 / n as f64;
    let log_odds = (rate / (1.0 - rate)).ln();
    assert!((model.bias.data()[0] - log_odds).abs() < 1e-2, "{} vs {log_odds}", model.bias.data()[0]);
    assert!(model.weights.data().iter().all(|&w| w == 0.0));
}

#[test]
fn probability_at_threshold_is_positive() {
    let model = LogisticModel::zeros(3);
    let x = SparseVector::new(3, vec![(1, 2.0)]).unwrap();
    let preds = predict(&model, std::slice::from_ref(&x), 0.5).unwrap();
    assert_eq!(preds[0].probability, 0.5);
    assert_eq!(preds[0].label, 1);
    let preds = predict(&model, &[x], 0.5 + 1e-12).unwrap();
    assert_eq!(preds[0].label, 0);
}

#[test]
fn identical_rows_get_identical_probabilities() {
    let mut rng = Prng::new(23);
    let model = DeepModel::init(RecurrentKind::Bilstm, 2, 3, 3, &mut rng).unwrap();
    let seq = random_sequences(1, 2, &mut rng).remove(0);
    let batch = SequenceBatch::from_sequences(&vec![seq.clone(); 5], 9, 2).unwrap();
    let probs = deep_forward(&model, &batch).unwrap();
    let single = model.probability(&seq).unwrap();
    assert!(probs.iter().all(|&p| p == single));
}
