//! Whole-model checks: parameter counts and a layer-by-layer composition.

use coat_core::layers::{coat_block, AttentionConfig, CoAtBlockParams, PosEncConfig};
use coat_core::model::{build_model, HeadMode, Model, ModelConfig};
use coat_core::ops::{conv2d_same, relu};
use coat_core::{encode_pair, parse_instance, DomainTag, Tensor};

/// Shape walk for the large Sokoban configuration: 10 input channels,
/// 7 pre-conv layers of 64, two branches of 4 blocks of 180 filters with
/// 2 heads and a 24-deep encoding, FC1 of 256 and 8 actions.
#[test]
fn full_sokoban_parameter_count() {
    let cfg = ModelConfig::full(DomainTag::Sokoban);
    let d0 = 10;
    let preconv = (9 * d0 * 64 + 64) + 6 * (9 * 64 * 64 + 64);
    let block_out = 180 / 3 + 24;
    let branch = (9 * 64 * 180 + 180) + 3 * (9 * block_out * 180 + 180);
    let fc1 = 2 * block_out * 256 + 256;
    let heads = (256 + 1) + (256 * 8 + 8);
    let want = preconv + 2 * branch + fc1 + heads;
    assert_eq!(want, 1_298_249);
    assert_eq!(cfg.parameter_count(), want);
    let model: Model = build_model(&cfg, 0).unwrap();
    assert_eq!(model.params.scalar_count(), want);
}

#[test]
fn single_head_has_no_policy_parameters() {
    let cfg = ModelConfig::full(DomainTag::FloorTile);
    assert_eq!(cfg.head_mode, HeadMode::Single);
    let model: Model = build_model(&cfg, 0).unwrap();
    assert!(model.params.names().all(|n| !n.starts_with("fc2_a") && !n.starts_with("branch.p")));
}

fn matvec(x: &[f64], w: &Tensor<f64>, b: &Tensor<f64>) -> Vec<f64> {
    let (n, m) = (w.shape()[0], w.shape()[1]);
    assert_eq!(x.len(), n);
    (0..m)
        .map(|j| b.data()[j] + (0..n).map(|i| x[i] * w.data()[i * m + j]).sum::<f64>())
        .collect()
}

/// Tiny dual-head maze model recomposed from the individual layers.
#[test]
fn tiny_model_matches_manual_composition() {
    let cfg = ModelConfig {
        preconv_layers: 1,
        preconv_filters: 4,
        blocks_per_branch: 1,
        block_filters: 6,
        attention_heads: 2,
        d_e: 4,
        fc1_width: 5,
        head_mode: HeadMode::Dual,
        ..ModelConfig::desk(DomainTag::Maze)
    };
    let model: Model<f64> = build_model(&cfg, 5).unwrap();
    let inst = parse_instance("domain=maze h=3 w=3\n.1.\n#S1\n..G\n").unwrap();
    let enc = encode_pair::<f64>(&inst.initial, &inst.goal()).unwrap();
    let p = |name: &str| model.params.get(name).unwrap().clone();

    let z = relu(&conv2d_same(&enc.tensor, &p("preconv.0.kernel"), &p("preconv.0.bias")).unwrap());
    let mut flat = Vec::new();
    for branch in ["h", "p"] {
        let block = CoAtBlockParams {
            kernel: p(&format!("branch.{branch}.block.0.kernel")),
            bias: p(&format!("branch.{branch}.block.0.bias")),
            attention: AttentionConfig::new(2, 6).unwrap(),
            pos_enc: PosEncConfig::new(4).unwrap(),
        };
        let y = coat_block(&z, &block).unwrap();
        assert_eq!(y.shape(), &[3, 3, 6]);
        flat.extend_from_slice(y.hidden(1, 1));
    }
    let hidden: Vec<f64> = matvec(&flat, &p("fc1.weight"), &p("fc1.bias")).into_iter().map(|x| x.max(0.0)).collect();
    let h = matvec(&hidden, &p("fc2_h.weight"), &p("fc2_h.bias"))[0];
    let logits = matvec(&hidden, &p("fc2_a.weight"), &p("fc2_a.bias"));
    let norm: f64 = logits.iter().map(|l| l.exp()).sum();
    let policy: Vec<f64> = logits.iter().map(|l| l.exp() / norm).collect();

    let out = model.forward(&enc.tensor, &[(1, 1)]).unwrap();
    assert!((out.h - h).abs() < 1e-12);
    for (a, b) in out.policy.unwrap().data().iter().zip(&policy) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn ten_and_thirty_square_both_evaluate() {
    let model: Model = build_model(&ModelConfig::desk(DomainTag::Maze), 1).unwrap();
    for n in [10, 30] {
        let mut rows = vec![".".repeat(n); n];
        rows[0].replace_range(0..1, "S");
        rows[n - 1].replace_range(n - 1..n, "G");
        let inst = parse_instance(&format!("domain=maze h={n} w={n}\n{}\n", rows.join("\n"))).unwrap();
        let v = model.heuristic_value(&inst.initial).unwrap();
        assert!(v.is_finite() && v >= 0.0);
    }
}
