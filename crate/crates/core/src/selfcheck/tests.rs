use super::*;
use crate::autodiff::{fault, OpKind};

#[test]
fn pristine_build_passes_everything() {
    let r = run_selfcheck();
    assert!(r.passed(), "{r}");
    assert!(r.checks.len() >= 30);
    let text = r.to_string();
    assert!(text.contains("model:stl_tiny") && text.contains("max err"));
}

#[test]
fn injected_backward_fault_is_named_by_op() {
    for (kind, name) in [(OpKind::Silu, "op:silu"), (OpKind::Softmax, "op:softmax"), (OpKind::MatMul, "op:matmul")] {
        let _g = fault::inject(kind, 1.01);
        let checks = op_checks();
        let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        assert!(failed.contains(&name), "{kind:?}: {failed:?}");
    }
    let _g = fault::inject(OpKind::Softmax, 1.01);
    let layers = layer_checks();
    assert!(layers.iter().any(|c| c.name == "layer:spatial_attention" && !c.passed));
    assert!(layers.iter().any(|c| c.name == "layer:linear" && c.passed));
}

#[test]
fn oracles_detect_a_wrong_reference() {
    let x = vec![vec![1.0, 2.0], vec![-0.5, 0.3]];
    let y = attention_reference(&x);
    assert_eq!((y.len(), y[0].len()), (2, 2));
    assert_eq!(moving_average_reference(&[1.0, 2.0, 3.0], 3), vec![4.0 / 3.0, 2.0, 8.0 / 3.0]);
}
