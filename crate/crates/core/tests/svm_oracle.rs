//! Dual solutions checked against an interior-point QP solve of the same
//! problems (values frozen below).

use imbalab_core::dataset::Dataset;
use imbalab_core::models::{train_svm, Kernel, KernelSpec, SvmConfig, SvmModel};
use imbalab_core::ndarray::{array, Array2};
use imbalab_core::AugmentedDataset;

const POINTS: [[f64; 2]; 40] = [
    [1.029, 1.642],
    [1.147, -0.973],
    [-1.393, 0.067],
    [0.861, 0.509],
    [1.81, 0.751],
    [0.64, -0.731],
    [-1.108, 1.484],
    [0.049, 0.812],
    [-1.376, -0.436],
    [-1.291, -0.776],
    [0.903, -1.481],
    [-0.534, 0.164],
    [-0.668, -0.252],
    [-0.222, 0.418],
    [-0.431, 0.272],
    [0.057, 0.425],
    [0.225, 1.658],
    [-0.664, 1.199],
    [-0.403, -0.958],
    [1.211, -0.44],
    [-0.388, -1.389],
    [-2.098, 0.634],
    [-1.165, 0.778],
    [1.848, -0.115],
    [-1.127, 0.394],
    [0.762, -0.262],
    [0.017, 1.335],
    [1.265, 0.71],
    [0.334, 0.746],
    [1.803, 0.588],
    [0.59, 0.035],
    [0.568, 0.128],
    [0.749, 1.946],
    [0.399, 1.687],
    [1.618, 0.94],
    [0.373, 0.343],
    [3.174, 0.899],
    [1.738, 1.463],
    [2.256, 0.562],
    [0.59, 0.74],
];

const QUERIES: [[f64; 2]; 6] = [
    [0.0, 0.0],
    [1.0, 1.0],
    [-1.0, 0.5],
    [2.0, -0.5],
    [0.6, 0.4],
    [1.5, 1.5],
];

const LINEAR_DECISION: [f64; 6] = [-1.3807054737446045, 0.10522298448761336, -1.7656983683612408, -0.24374116330613949, -0.6359398072873504, 0.8481872136037227];
const LINEAR_OBJECTIVE: f64 = -19.581064675457508;

const RBF_DECISION: [f64; 6] = [-0.643166890130008, 0.4359563678002127, -1.5645258256212287, -0.9988693859710045, -0.05620932479762336, 0.8384530708909175];
const RBF_OBJECTIVE: f64 = -37.491279600838055;

fn data() -> AugmentedDataset {
    let x = Array2::from_shape_fn((40, 2), |(i, j)| POINTS[i][j]);
    let labels = (0..40).map(|i| usize::from(i >= 28)).collect();
    AugmentedDataset::natural(Dataset::new(x, labels, (0..40).collect(), 2).unwrap())
}

fn queries() -> Array2<f64> {
    Array2::from_shape_fn((6, 2), |(i, j)| QUERIES[i][j])
}

/// `1/2 sum_ij c_i c_j K_ij - sum_i |c_i|` over the support vectors.
fn dual_objective(m: &SvmModel) -> f64 {
    let sv = &m.support_vectors;
    let mut quad = 0.0;
    for i in 0..sv.nrows() {
        for j in 0..sv.nrows() {
            quad += m.dual_coefs[i] * m.dual_coefs[j] * m.kernel.eval(sv.row(i), sv.row(j));
        }
    }
    0.5 * quad - m.dual_coefs.iter().map(|c| c.abs()).sum::<f64>()
}

fn check(cfg: SvmConfig, expected_dec: &[f64; 6], expected_obj: f64) {
    let m = train_svm(&data(), &cfg, None).unwrap();
    assert!(m.converged);
    let obj = dual_objective(&m);
    assert!(
        (obj - expected_obj).abs() <= 1e-6 * expected_obj.abs(),
        "objective {obj} vs {expected_obj}"
    );
    let dec = m.decision_function(queries().view()).unwrap();
    for (got, want) in dec.iter().zip(expected_dec) {
        assert!((got - want).abs() < 1e-4, "decision {got} vs {want}");
    }
}

#[test]
fn linear_kernel_matches_qp_solution() {
    let cfg = SvmConfig {
        c: 1.0,
        kernel: KernelSpec::Linear,
        tolerance: 1e-8,
        ..SvmConfig::default()
    };
    check(cfg, &LINEAR_DECISION, LINEAR_OBJECTIVE);
}

#[test]
fn rbf_kernel_matches_qp_solution() {
    let cfg = SvmConfig {
        c: 2.0,
        kernel: KernelSpec::Rbf { gamma: Some(0.5) },
        tolerance: 1e-8,
        ..SvmConfig::default()
    };
    check(cfg, &RBF_DECISION, RBF_OBJECTIVE);
}

#[test]
fn rbf_kernel_value() {
    let k = Kernel::Rbf { gamma: 0.5 };
    let a = array![1.0, 2.0];
    let b = array![0.0, 0.0];
    assert!((k.eval(a.view(), b.view()) - (-2.5f64).exp()).abs() < 1e-15);
}
