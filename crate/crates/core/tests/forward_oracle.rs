//! Network forward passes against a plain nested-loop reimplementation.

use citepurpose::embeddings::{EncodedTokens, WordVectorTable};
use citepurpose::model::{
    attention, attention_weights, bilstm, ModelParameters, ModelShape, Net, PurposeItem,
    ScaffoldItem, Task,
};
use citepurpose::tensor::Tensor;
use citepurpose::tfidf::SparseVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Mat = Vec<Vec<f64>>;

fn mat(t: &Tensor) -> Mat {
    (0..t.rows)
        .map(|r| t.data[r * t.cols..(r + 1) * t.cols].to_vec())
        .collect()
}

fn mv(m: &Mat, x: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn oracle_lstm(xs: &[Vec<f64>], w: &Tensor, u: &Tensor, b: &Tensor) -> Vec<Vec<f64>> {
    let h = u.cols;
    let (w, u) = (mat(w), mat(u));
    let mut hp = vec![0.0; h];
    let mut cp = vec![0.0; h];
    let mut out = Vec::new();
    for x in xs {
        let z = add(&add(&mv(&w, x), &mv(&u, &hp)), &b.data);
        let mut hn = vec![0.0; h];
        let mut cn = vec![0.0; h];
        for k in 0..h {
            let i = sig(z[k]);
            let f = sig(z[h + k]);
            let o = sig(z[2 * h + k]);
            let g = z[3 * h + k].tanh();
            cn[k] = f * cp[k] + i * g;
            hn[k] = o * cn[k].tanh();
        }
        out.push(hn.clone());
        hp = hn;
        cp = cn;
    }
    out
}

fn oracle_bilstm(xs: &[Vec<f64>], p: &ModelParameters) -> Vec<Vec<f64>> {
    let f = oracle_lstm(xs, &p.fwd.w, &p.fwd.u, &p.fwd.b);
    let rev: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
    let mut b = oracle_lstm(&rev, &p.bwd.w, &p.bwd.u, &p.bwd.b);
    b.reverse();
    f.into_iter()
        .zip(b)
        .map(|(mut a, b)| {
            a.extend(b);
            a
        })
        .collect()
}

fn oracle_attention(hs: &[Vec<f64>], w: &Tensor, b: &Tensor, u: &Tensor) -> (Vec<f64>, Vec<f64>) {
    let w = mat(w);
    let e: Vec<f64> = hs
        .iter()
        .map(|h| {
            add(&mv(&w, h), &b.data)
                .iter()
                .zip(&u.data)
                .map(|(k, u)| k.tanh() * u)
                .sum()
        })
        .collect();
    let m = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = e.iter().map(|v| (v - m).exp()).sum();
    let alpha: Vec<f64> = e.iter().map(|v| (v - m).exp() / z).collect();
    let mut s = vec![0.0; hs[0].len()];
    for (a, h) in alpha.iter().zip(hs) {
        for (si, hi) in s.iter_mut().zip(h) {
            *si += a * hi;
        }
    }
    (alpha, s)
}

fn oracle_mlp(x: &[f64], w1: &Tensor, b1: &Tensor, w2: &Tensor, b2: &Tensor) -> Vec<f64> {
    let a: Vec<f64> = add(&mv(&mat(w1), x), &b1.data)
        .into_iter()
        .map(|v| v.max(0.0))
        .collect();
    add(&mv(&mat(w2), &a), &b2.data)
}

fn random_tensor(t: &Tensor, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_vec(
        t.rows,
        t.cols,
        (0..t.len()).map(|_| rng.gen_range(-0.8..0.8)).collect(),
    )
}

struct Instance {
    shape: ModelShape,
    params: ModelParameters,
    pairs: Vec<(String, Vec<f64>)>,
    table: WordVectorTable,
}

fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d_static = 3;
    let pairs: Vec<(String, Vec<f64>)> = (0..5)
        .map(|i| {
            (
                format!("w{i}"),
                (0..d_static).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
        })
        .collect();
    let table = WordVectorTable::from_pairs(pairs.clone()).unwrap();
    let shape = ModelShape {
        d_static,
        d_trainable: 2,
        vocab_rows: 4,
        h_lstm: 3,
        hidden: 5,
        n_hand: 9,
        n_tfidf: 6,
        use_lstm: true,
    };
    let mut params = ModelParameters::zeros(&shape);
    for (_, t) in params.tensors_mut() {
        *t = random_tensor(t, &mut rng);
    }
    Instance {
        shape,
        params,
        pairs,
        table,
    }
}

impl Instance {
    /// Input vectors built from the oracle's own copy of the tables; the
    /// static row one past the last token is the mean vector.
    fn inputs(&self, tokens: &EncodedTokens) -> Vec<Vec<f64>> {
        let dim = self.shape.d_static;
        let mean: Vec<f64> = (0..dim)
            .map(|k| self.pairs.iter().map(|(_, v)| v[k]).sum::<f64>() / self.pairs.len() as f64)
            .collect();
        tokens
            .static_rows
            .iter()
            .zip(&tokens.trainable_rows)
            .map(|(&s, &t)| {
                let mut v = if s < self.pairs.len() {
                    self.pairs[s].1.clone()
                } else {
                    mean.clone()
                };
                v.extend(mat(&self.params.embedding)[t].iter());
                v
            })
            .collect()
    }

    fn sentence(&self, tokens: &EncodedTokens) -> Vec<f64> {
        let p = &self.params;
        let hs = oracle_bilstm(&self.inputs(tokens), p);
        oracle_attention(&hs, &p.att_w, &p.att_b, &p.att_u).1
    }
}

fn tokens(
    rng: &mut ChaCha8Rng,
    len: usize,
    static_rows: usize,
    vocab_rows: usize,
) -> EncodedTokens {
    EncodedTokens {
        static_rows: (0..len).map(|_| rng.gen_range(0..static_rows)).collect(),
        trainable_rows: (0..len).map(|_| rng.gen_range(0..vocab_rows)).collect(),
    }
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn attention_matches_dense_evaluation_on_three_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let d = 4;
    let hs: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let w = Tensor::from_vec(d, d, (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let b = Tensor::from_vec(d, 1, (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let u = Tensor::from_vec(d, 1, (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let (alpha, s) = oracle_attention(&hs, &w, &b, &u);
    assert!(close(&attention(&hs, &w, &b, &u), &s, 1e-10));
    assert!(close(&attention_weights(&hs, &w, &b, &u), &alpha, 1e-10));
}

#[test]
fn bilstm_matches_dense_evaluation() {
    let inst = instance(3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let toks = tokens(&mut rng, 4, inst.table.len() + 1, inst.shape.vocab_rows);
    let xs = inst.inputs(&toks);
    let got = bilstm(&xs, &inst.params.fwd, &inst.params.bwd).unwrap();
    let want = oracle_bilstm(&xs, &inst.params);
    for (g, w) in got.iter().zip(&want) {
        assert!(close(g, w, 1e-12), "{g:?} vs {w:?}");
    }
}

#[test]
fn purpose_and_scaffold_logits_match_dense_evaluation() {
    for seed in 0..10 {
        let inst = instance(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let toks = tokens(
            &mut rng,
            1 + seed as usize % 4,
            inst.table.len() + 1,
            inst.shape.vocab_rows,
        );
        let hand: [f64; 9] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
        let tfidf = SparseVector {
            dim: 6,
            entries: vec![(1, 0.6), (4, 0.8)],
        };
        let item = PurposeItem {
            tokens: toks.clone(),
            hand: Some(hand),
            tfidf: Some(tfidf.clone()),
            label: None,
        };
        let net = Net::new(&inst.shape, &inst.params, &inst.table);

        let mut x = inst.sentence(&toks);
        x.extend(hand);
        x.extend(tfidf.to_dense());
        let p = &inst.params.purpose;
        let want = oracle_mlp(&x, &p.w1, &p.b1, &p.w2, &p.b2);
        let got = net.purpose_logits(&item, None).unwrap();
        assert_eq!(got.len(), 6);
        assert!(
            close(&got, &want, 1e-10),
            "seed {seed}: {got:?} vs {want:?}"
        );

        let s = inst.sentence(&toks);
        let scaffold = ScaffoldItem {
            tokens: toks,
            label: 0,
        };
        for (task, head, classes) in [
            (Task::Worthiness, &inst.params.worthiness, 2),
            (Task::Section, &inst.params.section, 7),
        ] {
            let want = oracle_mlp(&s, &head.w1, &head.b1, &head.w2, &head.b2);
            let got = net.scaffold_logits(task, &scaffold, None).unwrap();
            assert_eq!(got.len(), classes);
            assert!(close(&got, &want, 1e-10), "{task:?}");
        }
    }
}

#[test]
fn probabilities_sum_to_one() {
    let inst = instance(9);
    let net = Net::new(&inst.shape, &inst.params, &inst.table);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..20 {
        let item = PurposeItem {
            tokens: tokens(&mut rng, 3, inst.table.len() + 1, inst.shape.vocab_rows),
            hand: Some(std::array::from_fn(|_| rng.gen_range(-3.0..3.0))),
            tfidf: Some(SparseVector::zeros(6)),
            label: None,
        };
        let (_, probs) = net.predict(&item).unwrap();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(probs.iter().all(|p| *p >= 0.0));
    }
}

proptest! {
    #[test]
    fn attention_weights_are_a_distribution(
        seed in any::<u64>(),
        len in 1usize..12,
        scale in 0.1f64..20.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 3;
        let hs: Vec<Vec<f64>> = (0..len).map(|_| (0..d).map(|_| rng.gen_range(-scale..scale)).collect()).collect();
        let w = Tensor::from_vec(d, d, (0..d * d).map(|_| rng.gen_range(-scale..scale)).collect());
        let b = Tensor::from_vec(d, 1, (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let u = Tensor::from_vec(d, 1, (0..d).map(|_| rng.gen_range(-scale..scale)).collect());
        let alpha = attention_weights(&hs, &w, &b, &u);
        prop_assert_eq!(alpha.len(), len);
        prop_assert!(alpha.iter().all(|a| *a >= 0.0));
        prop_assert!((alpha.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
}
