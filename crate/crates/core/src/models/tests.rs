use super::*;
use crate::encode::{encode_graph, encode_set, preprocess, BinnedVector, PeakGraph, PeakSet};
use crate::rng;
use crate::spectrum::{generate_synthetic, SyntheticConfig};
use crate::tensor::Tensor;

fn spectra(n: usize, seed: u64, peaks_max: usize) -> Vec<crate::Spectrum> {
    generate_synthetic(&SyntheticConfig {
        seed,
        n_spectra: n,
        peaks_min: 2,
        peaks_max,
        ..Default::default()
    })
    .unwrap()
}

fn sets(n: usize, seed: u64) -> Vec<PeakSet> {
    spectra(n, seed, 6).iter().map(|s| encode_set(&preprocess(s).unwrap())).collect()
}

fn graphs(n: usize, seed: u64) -> Vec<PeakGraph> {
    spectra(n, seed, 6).iter().map(|s| encode_graph(&preprocess(s).unwrap())).collect()
}

fn targets(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.2 + 0.15 * i as f64).collect()
}

#[test]
fn mlp_param_counts() {
    let default = ModelConfig::Mlp(MlpConfig::default());
    assert_eq!(default.param_count(), 10_766_337);
    let toy = MlpConfig { input_dim: 2, hidden_dims: vec![2], dropout_p: 0.0 };
    assert_eq!(toy.param_count(), 9);
}

#[test]
fn gat_default_param_count() {
    // 2*1024 + 8*(1024^2 + 4*1024) + 1025
    assert_eq!(GatConfig::default().param_count(), 8_424_449);
}

#[test]
fn set_transformer_default_param_count() {
    assert_eq!(SetTransformerConfig::default().param_count(), 7_553);
}

#[test]
fn closed_form_matches_tensor_shapes() {
    let mut r = rng::seeded(21);
    for _ in 0..50 {
        let d = |r: &mut rng::SpecRng| rng::uniform_int(r, 1, 6);
        let heads = rng::uniform_int(&mut r, 1, 3);
        let configs = [
            ModelConfig::Mlp(MlpConfig {
                input_dim: d(&mut r) * 3,
                hidden_dims: (0..rng::uniform_int(&mut r, 0, 3)).map(|_| d(&mut r)).collect(),
                dropout_p: 0.5,
            }),
            ModelConfig::SetTransformer(SetTransformerConfig {
                block_dims: (0..rng::uniform_int(&mut r, 1, 3)).map(|_| d(&mut r) * heads).collect(),
                num_heads: heads,
                num_seeds: rng::uniform_int(&mut r, 1, 3),
                mz_scale: 1000.0,
                layer_norm: rng::unit(&mut r) < 0.5,
            }),
            ModelConfig::Gat(GatConfig {
                num_layers: d(&mut r),
                hidden_channels: d(&mut r) * heads,
                num_heads: heads,
                ..Default::default()
            }),
        ];
        for cfg in configs {
            cfg.validate().unwrap();
            let from_specs: usize = cfg.param_specs().iter().map(|s| s.numel()).sum();
            assert_eq!(cfg.param_count(), from_specs, "{cfg:?}");
            let p: ModelParams<f32> = cfg.init_params(3).unwrap();
            assert_eq!(p.num_scalars(), from_specs);
        }
    }
}

#[test]
fn invalid_configs() {
    assert!(MlpConfig { dropout_p: 1.0, ..Default::default() }.validate().is_err());
    assert!(MlpConfig { hidden_dims: vec![0], ..Default::default() }.validate().is_err());
    assert!(SetTransformerConfig { num_heads: 3, ..Default::default() }.validate().is_err());
    assert!(SetTransformerConfig { num_seeds: 0, ..Default::default() }.validate().is_err());
    assert!(GatConfig { hidden_channels: 10, num_heads: 4, ..Default::default() }.validate().is_err());
    assert!(GatConfig { num_layers: 0, ..Default::default() }.validate().is_err());
}

#[test]
fn model_config_json_tagging() {
    let cfg: ModelConfig = serde_json::from_str(r#"{"kind":"gat","num_layers":2,"hidden_channels":8}"#).unwrap();
    assert_eq!(
        cfg,
        ModelConfig::Gat(GatConfig { num_layers: 2, hidden_channels: 8, ..Default::default() })
    );
    let back: ModelConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(back, cfg);
}

fn toy_mlp() -> ModelConfig {
    ModelConfig::Mlp(MlpConfig { input_dim: 16, hidden_dims: vec![4], dropout_p: 0.5 })
}

fn binned_batch(b: usize, width: usize, seed: u64) -> Batch<f64> {
    let mut r = rng::seeded(seed);
    let vecs: Vec<BinnedVector> = (0..b)
        .map(|_| BinnedVector {
            values: (0..width)
                .map(|_| if rng::unit(&mut r) < 0.5 { 0.0 } else { rng::unit(&mut r) as f32 })
                .collect(),
        })
        .collect();
    Batch::binned(&vecs.iter().collect::<Vec<_>>()).unwrap()
}

#[test]
fn mlp_zero_weights_predict_zero() {
    let cfg = toy_mlp();
    let mut p: ModelParams<f64> = cfg.init_params(1).unwrap();
    for e in p.entries_mut() {
        e.tensor.data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
    let out = cfg.predict(&p, &binned_batch(5, 16, 2)).unwrap();
    assert_eq!(out, vec![0.0; 5]);
}

#[test]
fn mlp_rejects_wrong_width() {
    let cfg = toy_mlp();
    let p: ModelParams<f64> = cfg.init_params(1).unwrap();
    assert!(cfg.predict(&p, &binned_batch(2, 15, 2)).is_err());
    assert!(cfg.predict(&p, &Batch::sets(&[&sets(1, 1)[0]])).is_err());
}

#[test]
fn eval_is_deterministic_and_train_is_seeded() {
    let cfg = toy_mlp();
    let p: ModelParams<f32> = cfg.init_params(4).unwrap();
    let batch: Batch<f32> = {
        let vecs: Vec<BinnedVector> = (0..4).map(|i| BinnedVector { values: vec![0.1 * i as f32; 16] }).collect();
        Batch::binned(&vecs.iter().collect::<Vec<_>>()).unwrap()
    };
    let a = cfg.predict(&p, &batch).unwrap();
    let b = cfg.predict(&p, &batch).unwrap();
    assert_eq!(a, b);

    let run = |seed: u64| {
        let mut t = Tape::new();
        let bound = p.bind(&mut t);
        let mut r = rng::seeded(seed);
        let out = cfg.forward(&mut t, &bound, &batch, true, &mut r).unwrap();
        t.value(out).data().to_vec()
    };
    assert_eq!(run(9), run(9));
}

#[test]
fn mlp_gradient_check() {
    let cfg = toy_mlp();
    let p = cfg.init_params::<f64>(5).unwrap();
    let batch = binned_batch(4, 16, 6);
    for train in [false, true] {
        let rep = gradient_check(&cfg, &p, &batch, &targets(4), train, 7, 1e-6, false).unwrap();
        assert!(rep.passes(1e-6), "train={train}: {rep:?}");
    }
    let rep = gradient_check(&cfg, &p, &batch, &targets(4), false, 7, 1e-6, true).unwrap();
    assert!(!rep.passes(1e-6), "corrupted gradient must fail: {rep:?}");
}

fn toy_set(heads: usize) -> ModelConfig {
    ModelConfig::SetTransformer(SetTransformerConfig {
        block_dims: vec![4, 4],
        num_heads: heads,
        num_seeds: 1,
        ..Default::default()
    })
}

#[test]
fn set_transformer_gradient_check() {
    let s = sets(3, 8);
    let batch: Batch<f64> = Batch::sets(&s.iter().collect::<Vec<_>>());
    for heads in [1, 2] {
        let cfg = toy_set(heads);
        let p = cfg.init_params::<f64>(9).unwrap();
        let rep = gradient_check(&cfg, &p, &batch, &targets(3), true, 0, 1e-6, false).unwrap();
        assert!(rep.passes(1e-6), "heads={heads}: {rep:?}");
    }
}

fn permuted_set(s: &PeakSet, perm: &[usize]) -> PeakSet {
    PeakSet {
        mz: perm.iter().map(|&i| s.mz[i]).collect(),
        intensity: perm.iter().map(|&i| s.intensity[i]).collect(),
    }
}

#[test]
fn set_transformer_permutation_invariance() {
    let cfg = ModelConfig::SetTransformer(SetTransformerConfig::default());
    let p: ModelParams<f32> = cfg.init_params(10).unwrap();
    let s = sets(8, 11);
    let mut r = rng::seeded(12);
    let base = cfg.predict(&p, &Batch::sets(&s.iter().collect::<Vec<_>>())).unwrap();
    for _ in 0..5 {
        let shuffled: Vec<PeakSet> = s
            .iter()
            .map(|x| {
                let mut perm: Vec<usize> = (0..x.len()).collect();
                rng::shuffle(&mut perm, &mut r);
                permuted_set(x, &perm)
            })
            .collect();
        let out = cfg.predict(&p, &Batch::sets(&shuffled.iter().collect::<Vec<_>>())).unwrap();
        for (a, b) in base.iter().zip(&out) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }
}

#[test]
fn set_transformer_extra_padding_is_bit_identical() {
    let cfg = ModelConfig::SetTransformer(SetTransformerConfig::default());
    let p: ModelParams<f32> = cfg.init_params(13).unwrap();
    let s = sets(4, 14);
    let refs: Vec<&PeakSet> = s.iter().collect();
    let n = s.iter().map(|x| x.len()).max().unwrap();
    let a = cfg.predict(&p, &Batch::sets_padded(&refs, n)).unwrap();
    let b = cfg.predict(&p, &Batch::sets_padded(&refs, n + 5)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn set_transformer_rejects_empty_row() {
    let cfg = toy_set(1);
    let p: ModelParams<f64> = cfg.init_params(1).unwrap();
    let batch = Batch::Set { pairs: Tensor::zeros(&[1, 3, 2]), mask: vec![false; 3] };
    assert!(cfg.predict(&p, &batch).is_err());
}

fn toy_gat(heads: usize) -> ModelConfig {
    ModelConfig::Gat(GatConfig { num_layers: 2, hidden_channels: 8, num_heads: heads, ..Default::default() })
}

#[test]
fn gat_gradient_check() {
    let g = graphs(3, 15);
    let batch: Batch<f64> = Batch::graphs(&g.iter().collect::<Vec<_>>());
    for heads in [1, 2] {
        let cfg = toy_gat(heads);
        let p = cfg.init_params::<f64>(16).unwrap();
        let rep = gradient_check(&cfg, &p, &batch, &targets(3), true, 0, 1e-6, false).unwrap();
        assert!(rep.passes(1e-6), "heads={heads}: {rep:?}");
    }
}

#[test]
fn gat_single_vertex_graph_reduces_to_head() {
    let cfg = toy_gat(1);
    let p: ModelParams<f64> = cfg.init_params(17).unwrap();
    let g = PeakGraph { vertex_attr: vec![0.7], edge_index: vec![], edge_attr: vec![] };
    let got = cfg.predict(&p, &Batch::graphs(&[&g])).unwrap()[0];

    let w_in = p.get("input.weight").unwrap().data();
    let b_in = p.get("input.bias").unwrap().data();
    let w_out = p.get("head.weight").unwrap().data();
    let b_out = p.get("head.bias").unwrap().data()[0];
    let expected: f64 = (0..8).map(|c| (0.7 * w_in[c] + b_in[c]) * w_out[c]).sum::<f64>() + b_out;
    assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
}

#[test]
fn gat_relabeling_invariance() {
    let cfg = ModelConfig::Gat(GatConfig { num_layers: 3, hidden_channels: 16, ..Default::default() });
    let p: ModelParams<f32> = cfg.init_params(18).unwrap();
    let mut r = rng::seeded(19);
    for g in graphs(10, 20) {
        let base = cfg.predict(&p, &Batch::graphs(&[&g])).unwrap()[0];
        let n = g.num_vertices();
        let mut perm: Vec<usize> = (0..n).collect();
        rng::shuffle(&mut perm, &mut r);
        // perm[old] = new
        let mut vertex_attr = vec![0.0; n];
        for (old, &new) in perm.iter().enumerate() {
            vertex_attr[new] = g.vertex_attr[old];
        }
        let mut arcs: Vec<usize> = (0..g.num_arcs()).collect();
        rng::shuffle(&mut arcs, &mut r);
        let relabeled = PeakGraph {
            vertex_attr,
            edge_index: arcs.iter().map(|&e| (perm[g.edge_index[e].0], perm[g.edge_index[e].1])).collect(),
            edge_attr: arcs.iter().map(|&e| g.edge_attr[e]).collect(),
        };
        let out = cfg.predict(&p, &Batch::graphs(&[&relabeled])).unwrap()[0];
        assert!((base - out).abs() < 1e-5, "{base} vs {out}");
    }
}

#[test]
fn gat_batch_equals_singles() {
    let cfg = ModelConfig::Gat(GatConfig { num_layers: 3, hidden_channels: 16, ..Default::default() });
    let p: ModelParams<f32> = cfg.init_params(21).unwrap();
    let g = graphs(6, 22);
    let batched = cfg.predict(&p, &Batch::graphs(&g.iter().collect::<Vec<_>>())).unwrap();
    for (i, gi) in g.iter().enumerate() {
        let single = cfg.predict(&p, &Batch::graphs(&[gi])).unwrap()[0];
        assert!((batched[i] - single).abs() < 1e-5);
    }
}

#[test]
fn gat_rejects_dangling_arc() {
    let cfg = toy_gat(1);
    let p: ModelParams<f64> = cfg.init_params(1).unwrap();
    let g = PeakGraph { vertex_attr: vec![0.0, 1.0], edge_index: vec![(0, 2)], edge_attr: vec![1.0] };
    let err = cfg.predict(&p, &Batch::graphs(&[&g])).unwrap_err();
    assert!(err.to_string().contains("dangling"), "{err}");
}

#[test]
fn graph_batch_offsets() {
    let mk = |v: usize| PeakGraph {
        vertex_attr: vec![0.5; v],
        edge_index: (0..v - 1).flat_map(|k| [(k, k + 1), (k + 1, k)]).collect(),
        edge_attr: vec![1.0; 2 * (v - 1)],
    };
    let (a, b) = (mk(3), mk(4));
    let Batch::Graph(gb) = Batch::<f32>::graphs(&[&a, &b]) else { unreachable!() };
    assert_eq!(gb.vertex_attr.len(), 7);
    assert_eq!(gb.graph_ids, vec![0, 0, 0, 1, 1, 1, 1]);
    assert_eq!(gb.edge_index[4], (3, 4));
    assert_eq!(gb.edge_index.last(), Some(&(6, 5)));
}

#[test]
fn toy_suite_passes_for_every_kind() {
    for kind in [ModelKind::Mlp, ModelKind::SetTransformer, ModelKind::Gat] {
        let dims = default_toy_dims(kind);
        let a = toy_gradient_check(kind, &dims, 3, false).unwrap();
        assert!(a.passes(1e-6), "{kind}: {a:?}");
        assert_eq!(a, toy_gradient_check(kind, &dims, 3, false).unwrap());
        let bad = toy_gradient_check(kind, &dims, 3, true).unwrap();
        assert!(!bad.passes(1e-6), "{kind}: corrupted check passed {bad:?}");
    }
    assert!(toy_config(ModelKind::Gat, &[2]).is_err());
    assert!(toy_config(ModelKind::Mlp, &[]).is_err());
}
