use gridcast::mlp::{elm_solve, ElmConfig, TrainedForecaster};
use gridcast::pipeline::{run, PipelineConfig, PipelineRun};
use gridcast::sensitivity::{aggregate, raw_derivatives};
use gridcast::synth::{generate, SyntheticSpec};
use gridcast::Target;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn trained(seed: u64) -> PipelineRun {
    let data = generate(&SyntheticSpec::with_seed(seed)).unwrap();
    let cfg = PipelineConfig { elm: ElmConfig { restarts: 6, ..ElmConfig::default() }, ..PipelineConfig::default() };
    run(&data.dataset, &cfg).unwrap()
}

#[test]
fn ridge_solution_is_a_local_minimum_of_the_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let h = DMatrix::from_fn(40, 7, |_, _| rng.random_range(-1.0..1.0));
    let y = DMatrix::from_fn(40, 2, |_, _| rng.random_range(-3.0..3.0));
    let lambda = 0.7;
    let objective = |v: &DMatrix<f64>| (&y - &h * v).norm_squared() + lambda * v.norm_squared();
    let v = elm_solve(&h, &y, lambda).unwrap();
    let best = objective(&v);
    for _ in 0..100 {
        let d = DMatrix::from_fn(7, 2, |_, _| rng.random_range(-1.0..1.0));
        assert!(best <= objective(&(&v + d * 1e-4)));
    }
}

#[test]
fn forward_agrees_with_the_hidden_matrix() {
    let r = trained(31);
    let net = &r.forecaster.network;
    let inputs: Vec<Vec<f64>> =
        r.split.test.records().iter().map(|rec| r.forecaster.feature_spec.build(rec).unwrap()).collect();
    let h = net.hidden_matrix(&inputs).unwrap();
    for (k, x) in inputs.iter().enumerate() {
        let out = net.forward(x).unwrap();
        for o in 0..net.output_count() {
            let direct = net.b_out[o] + (0..net.hidden_count()).map(|j| h[(k, j)] * net.v[j][o]).sum::<f64>();
            assert!((out[o] - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
        }
    }
}

#[test]
fn chosen_restart_has_the_lowest_validation_error() {
    let r = trained(32);
    let sum = |v: &[f64]| v.iter().sum::<f64>();
    let best = r.forecaster.restart_trace.iter().map(|t| sum(&t.validate_mse)).fold(f64::INFINITY, f64::min);
    assert_eq!(sum(&r.forecaster.validate_mse), best);
    assert_eq!(r.forecaster.restart_trace.len(), 6);
}

#[test]
fn scaling_output_weights_scales_derivatives_but_not_scores() {
    let r = trained(33);
    let mut scaled: TrainedForecaster = r.forecaster.clone();
    for row in &mut scaled.network.v {
        for v in row.iter_mut() {
            *v *= 3.0;
        }
    }
    let rec = &r.split.test.records()[5];
    let (a, b) = (raw_derivatives(&r.forecaster, rec).unwrap(), raw_derivatives(&scaled, rec).unwrap());
    for (ra, rb) in a.iter().zip(&b) {
        for (x, y) in ra.iter().zip(rb) {
            assert!((3.0 * x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }
    let (ra, rb) = (aggregate(&r.forecaster, &r.split.test).unwrap(), aggregate(&scaled, &r.split.test).unwrap());
    for t in Target::BOTH {
        let (oa, ob) = (ra.for_output(t).unwrap(), rb.for_output(t).unwrap());
        assert_eq!(oa.ranked, ob.ranked);
        for (sa, sb) in oa.scores.iter().zip(&ob.scores) {
            assert!((sa.score - sb.score).abs() < 1e-12);
        }
    }
}

#[test]
fn scores_do_not_depend_on_raw_feature_order() {
    let r = trained(34);
    let original = &r.forecaster;
    let raw = original.feature_spec.raw_features.len();
    let perm: Vec<usize> = (0..raw).rev().collect();
    let mut permuted = original.clone();
    let spec = &mut permuted.feature_spec;
    spec.raw_features = perm.iter().map(|&i| original.feature_spec.raw_features[i]).collect();
    for (slot, &i) in perm.iter().enumerate() {
        spec.shift[slot] = original.feature_spec.shift[i];
        spec.scale[slot] = original.feature_spec.scale[i];
        for (row, src) in permuted.network.w.iter_mut().zip(&original.network.w) {
            row[slot] = src[i];
        }
    }
    let (a, b) = (aggregate(original, &r.split.test).unwrap(), aggregate(&permuted, &r.split.test).unwrap());
    for t in Target::BOTH {
        let (oa, ob) = (a.for_output(t).unwrap(), b.for_output(t).unwrap());
        assert_eq!(oa.ranked, ob.ranked);
        for s in &oa.scores {
            assert!((s.score - ob.score(s.parameter)).abs() < 1e-12, "{:?}", s.parameter);
        }
    }
}
