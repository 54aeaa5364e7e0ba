use super::params::{self, Grads};
use super::*;
use crate::corpus::{Corpus, Mention, Sentence};
use crate::transitions::{oracle, Action, ParserState};

fn small_config() -> ScorerConfig {
    ScorerConfig {
        word_dim: 5,
        char_dim: 3,
        char_filters: 4,
        hidden_dim: 4,
        stack_dim: 5,
        action_dim: 3,
        ..ScorerConfig::default()
    }
}

fn figure_two() -> Sentence {
    Sentence::from_text(
        "muscle pain and fatigue",
        vec![
            Mention::from_spans("ADR", &[(0, 2)]).unwrap(),
            Mention::from_spans("ADR", &[(0, 1), (3, 4)]).unwrap(),
        ],
    )
    .unwrap()
}

fn model_with(config: ScorerConfig) -> Model {
    let corpus = Corpus::new(vec![figure_two()]);
    Model::new(config, Vocab::from_corpus(&corpus), vec!["ADR".to_string()]).unwrap()
}

fn model() -> Model {
    model_with(small_config())
}

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

#[test]
fn init_is_seeded_and_bounded() {
    let a = model();
    let b = model();
    assert_eq!(a.params, b.params);
    let c = model_with(ScorerConfig {
        seed: 2,
        ..small_config()
    });
    assert_ne!(a.params, c.params);
    for t in &a.params.tensors {
        let r = (6.0 / (t.rows + t.cols) as f64).sqrt();
        assert!(
            t.data.iter().all(|v| v.is_finite() && v.abs() <= r),
            "{}",
            t.name
        );
    }
    assert_eq!(a.params.tensors.len(), PARAM_COUNT);
}

#[test]
fn config_validation() {
    assert!(ScorerConfig {
        char_cnn_window: 2,
        ..small_config()
    }
    .validate()
    .is_err());
    assert!(ScorerConfig {
        hidden_dim: 0,
        ..small_config()
    }
    .validate()
    .is_err());
    let mut c = small_config();
    assert!(c.set("attention", "false").unwrap());
    assert!(!c.attention);
    assert!(!c.set("bogus", "1").unwrap());
    assert!(c.set("epochs", "x").is_err());
    assert_eq!(c.to_text().lines().count(), ScorerConfig::KEYS.len());
}

#[test]
fn single_token_rep_shape() {
    let m = model();
    let mut tape = Tape::new();
    let reps = token_reps(&mut tape, &m, &toks("pain"), None).unwrap();
    assert_eq!(reps.len(), 1);
    assert_eq!(tape.value(reps[0]).len(), 2 * m.config.hidden_dim);
}

#[test]
fn reversal_swaps_directions_with_tied_weights() {
    let mut m = model();
    m.params.tensors[params::BWD_W] = Tensor {
        name: "bilstm_bwd_w".into(),
        ..m.params.tensors[params::FWD_W].clone()
    };
    m.params.tensors[params::BWD_B] = Tensor {
        name: "bilstm_bwd_b".into(),
        ..m.params.tensors[params::FWD_B].clone()
    };
    let fwd = toks("muscle pain and fatigue");
    let rev: Vec<String> = fwd.iter().rev().cloned().collect();
    let mut t1 = Tape::new();
    let a = token_reps(&mut t1, &m, &fwd, None).unwrap();
    let mut t2 = Tape::new();
    let b = token_reps(&mut t2, &m, &rev, None).unwrap();
    let h = m.config.hidden_dim;
    for i in 0..fwd.len() {
        let x = t1.value(a[i]);
        let y = t2.value(b[fwd.len() - 1 - i]);
        assert_eq!(&x[..h], &y[h..]);
        assert_eq!(&x[h..], &y[..h]);
    }
}

#[test]
fn external_vectors_are_appended() {
    let m = model_with(ScorerConfig {
        external_vec_dim: 2,
        ..small_config()
    });
    let mut tape = Tape::new();
    let ext = vec![vec![0.5, -1.0], vec![2.0, 3.0]];
    let reps = token_reps(&mut tape, &m, &toks("muscle pain"), Some(&ext)).unwrap();
    let v = tape.value(reps[1]);
    assert_eq!(v.len(), 2 * m.config.hidden_dim + 2);
    assert_eq!(&v[v.len() - 2..], &[2.0, 3.0]);
    assert!(matches!(
        token_reps(&mut tape, &m, &toks("muscle pain"), None),
        Err(NeuralError::MissingExternal)
    ));
    let short = vec![vec![0.5]; 2];
    assert!(matches!(
        token_reps(&mut tape, &m, &toks("muscle pain"), Some(&short)),
        Err(NeuralError::ExternalShape { .. })
    ));
}

#[test]
fn stack_pop_restores_and_order_matters() {
    let m = model();
    let mut tape = Tape::new();
    let a = tape.input(vec![0.3; m.rep_dim()]);
    let b = tape.input((0..m.rep_dim()).map(|i| i as f64 / 10.0).collect());
    let mut st = StackLstm::default();
    st.push(&mut tape, &m, a);
    let before = st.clone();
    st.push(&mut tape, &m, b);
    st.pop().unwrap();
    assert_eq!(st, before);
    let ab = st.summary(0).unwrap();
    let mut other = StackLstm::default();
    other.push(&mut tape, &m, b);
    other.push(&mut tape, &m, a);
    let mut first = StackLstm::default();
    first.push(&mut tape, &m, a);
    first.push(&mut tape, &m, b);
    assert_ne!(
        tape.value(first.summary(0).unwrap()),
        tape.value(other.summary(0).unwrap())
    );
    assert!(tape.value(ab).iter().all(|v| v.is_finite()));
    assert!(StackLstm::default().pop().is_err());
    assert_eq!(StackLstm::default().summary(0), None);
}

#[test]
fn compose_is_affine() {
    let m = model();
    let mut tape = Tape::new();
    let d = m.config.stack_dim;
    let zero = tape.input(vec![0.0; d]);
    let out = compose(&mut tape, &m, zero, zero);
    assert_eq!(
        tape.value(out),
        &m.params.tensors[params::COMPOSE_B].data[..]
    );
    assert_eq!(tape.value(out).len(), m.rep_dim());
    let x = tape.input((0..d).map(|i| i as f64 * 0.1).collect());
    let y = tape.input((0..d).map(|i| 1.0 - i as f64 * 0.2).collect());
    let x2 = tape.input(tape.value(x).iter().map(|v| 2.0 * v).collect());
    let y2 = tape.input(tape.value(y).iter().map(|v| 2.0 * v).collect());
    let one = compose(&mut tape, &m, x, y);
    let two = compose(&mut tape, &m, x2, y2);
    for ((a, b), bias) in tape
        .value(two)
        .iter()
        .zip(tape.value(one))
        .zip(&m.params.tensors[params::COMPOSE_B].data)
    {
        assert!((a - 2.0 * b + bias).abs() < 1e-12);
    }
}

#[test]
fn attention_cases() {
    let m = model();
    let w = params::ATTN_W[0];
    let r = m.rep_dim();
    let mut tape = Tape::new();
    let s = tape.input(vec![0.7; m.config.stack_dim]);
    let row = tape.input((0..r).map(|i| i as f64).collect());
    let single = tape.attend(&m.params, w, s, vec![row], r);
    assert_eq!(tape.value(single), tape.value(row));
    let empty = tape.attend(&m.params, w, s, vec![], r);
    assert!(tape.value(empty).iter().all(|v| *v == 0.0));
    let mut zeroed = m.clone();
    zeroed.params.tensors[w]
        .data
        .iter_mut()
        .for_each(|v| *v = 0.0);
    let other = tape.input(vec![1.0; r]);
    let mean = tape.attend(&zeroed.params, w, s, vec![row, other], r);
    for (k, v) in tape.value(mean).iter().enumerate() {
        assert!((v - (k as f64 + 1.0) / 2.0).abs() < 1e-12);
    }
}

#[test]
fn distribution_is_masked() {
    let p = action_distribution(&[1.0, 5.0, -2.0, 0.5], &[0, 2, 3]);
    assert_eq!(p[1], 0.0);
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(action_distribution(&[1.0, 5.0], &[1]), vec![0.0, 1.0]);
    let shifted = action_distribution(&[11.0, 15.0, 8.0, 10.5], &[0, 2, 3]);
    for (a, b) in p.iter().zip(&shifted) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn initial_features() {
    let m = model();
    let tokens = toks("muscle pain");
    let mut enc = Encoder::new(&m, &tokens, None).unwrap();
    let f = enc.features(&ParserState::initial(2));
    let v = enc.tape.value(f).to_vec();
    assert_eq!(v.len(), feature_dim(&m.config));
    let sd = m.config.stack_dim;
    let s_empty = &m.params.tensors[params::S_EMPTY].data;
    for k in 0..3 {
        assert_eq!(&v[k * sd..(k + 1) * sd], &s_empty[..]);
    }
    let att = &v[3 * sd..3 * sd + 3 * m.rep_dim()];
    assert!(att.iter().all(|x| *x == 0.0));
    let a0 = 3 * sd + 3 * m.rep_dim();
    assert_eq!(
        &v[a0..a0 + m.config.action_dim],
        &m.params.tensors[params::A_EMPTY].data[..]
    );
}

#[test]
fn shift_pushes_token_rep() {
    let m = model();
    let tokens = toks("muscle pain");
    let mut enc = Encoder::new(&m, &tokens, None).unwrap();
    let state = ParserState::initial(2);
    enc.advance(&state, &Action::Shift, 0).unwrap();
    let s0 = enc.stack.summary(0).unwrap();
    let mut tape = Tape::new();
    let reps = token_reps(&mut tape, &m, &tokens, None).unwrap();
    let st = tape.lstm(&m.params, params::STACK_W, params::STACK_B, reps[0], None);
    assert_eq!(enc.tape.value(s0), &tape.value(st)[..m.config.stack_dim]);
}

#[test]
fn loss_properties() {
    let m = model();
    let s = figure_two();
    let gold = oracle(&s).unwrap().actions;
    let (loss, tape, root) = sentence_loss(&m, &s.tokens, None, &gold).unwrap();
    assert!(loss > 0.0);
    let (zero, _, _) = sentence_loss(&m, &[], None, &[]).unwrap();
    assert_eq!(zero, 0.0);
    let mut g1 = Grads::zeros(&m.params);
    let mut g2 = Grads::zeros(&m.params);
    tape.backward(root, &m.params, &mut g1);
    tape.backward(root, &m.params, &mut g2);
    assert_eq!(g1, g2);
    assert!(matches!(
        sentence_loss(&m, &s.tokens, None, &[Action::Reduce]),
        Err(NeuralError::InvalidGold { step: 1, .. })
    ));
}

#[test]
fn all_out_loss_near_uniform() {
    let m = model();
    let tokens = toks("and and and");
    let (loss, _, _) =
        sentence_loss(&m, &tokens, None, &[Action::Out, Action::Out, Action::Out]).unwrap();
    let uniform = 3.0 * 2f64.ln();
    assert!((loss - uniform).abs() < 1.5, "{loss} vs {uniform}");
}

#[test]
fn attention_ablation_ignores_attention_weights() {
    let m = model_with(ScorerConfig {
        attention: false,
        ..small_config()
    });
    let s = figure_two();
    let gold = oracle(&s).unwrap().actions;
    let (base, grads) = loss_and_grads(&m, &s.tokens, None, &gold).unwrap();
    for w in ATTN_W {
        assert!(grads.tensors[w].iter().all(|g| *g == 0.0));
    }
    let mut perturbed = m.clone();
    for w in ATTN_W {
        perturbed.params.tensors[w]
            .data
            .iter_mut()
            .for_each(|v| *v += 0.37);
    }
    assert_eq!(
        sentence_loss(&perturbed, &s.tokens, None, &gold).unwrap().0,
        base
    );
    assert_eq!(
        predict(&perturbed, &s.tokens, None).unwrap(),
        predict(&m, &s.tokens, None).unwrap()
    );
}

#[test]
fn gradients_match_finite_differences() {
    let m = model();
    let check = finite_diff_check(&m, &figure_two(), None, 1e-5, 200, 7).unwrap();
    assert!(check.max_rel_error < 1e-4, "{}", check.max_rel_error);
    assert_eq!(check.groups().len(), PARAM_COUNT);
    let empty = Sentence::from_text("", vec![]).unwrap();
    assert_eq!(
        finite_diff_check(&m, &empty, None, 1e-5, 200, 7)
            .unwrap()
            .max_rel_error,
        0.0
    );
}

#[test]
fn predict_terminates() {
    let m = model();
    assert!(predict(&m, &[], None).unwrap().is_empty());
    let tokens = toks("muscle pain and fatigue and more pain");
    let actions = predict_actions(&m, &tokens, None).unwrap();
    assert!(actions.len() <= m.config.budget_multiplier * tokens.len() + 2 * tokens.len());
}

#[test]
fn checkpoint_round_trip() {
    let m = model();
    let bytes = save_checkpoint(&m);
    assert_eq!(&bytes[..4], b"DNER");
    let back = load_checkpoint(&bytes).unwrap();
    assert_eq!(back, m);
    assert_eq!(save_checkpoint(&back), bytes);
    let mut wrong = bytes.clone();
    wrong[4] = 9;
    assert!(matches!(
        load_checkpoint(&wrong),
        Err(NeuralError::Checkpoint(_))
    ));
    assert!(load_checkpoint(&bytes[..bytes.len() - 1]).is_err());
}

#[test]
fn external_vector_files() {
    let text = "0.5 1\n2 3\n\n-1 0\n\n";
    let v = parse_external_vectors(text).unwrap();
    assert_eq!(
        v,
        vec![vec![vec![0.5, 1.0], vec![2.0, 3.0]], vec![vec![-1.0, 0.0]]]
    );
    assert_eq!(
        parse_external_vectors(&write_external_vectors(&v)).unwrap(),
        v
    );
    assert!(matches!(
        parse_external_vectors("1 2\n3\n"),
        Err(NeuralError::ExternalParse { line: 2, .. })
    ));
    assert!(parse_external_vectors("1 x\n").is_err());
}

#[test]
fn training_is_deterministic() {
    let corpus = Corpus::new(vec![figure_two()]);
    let cfg = ScorerConfig {
        epochs: 3,
        ..small_config()
    };
    let a = train(&corpus, &cfg).unwrap();
    let b = train(&corpus, &cfg).unwrap();
    assert_eq!(save_checkpoint(&a), save_checkpoint(&b));
    assert!(matches!(
        train(&Corpus::new(vec![]), &cfg),
        Err(NeuralError::EmptyCorpus)
    ));
}
