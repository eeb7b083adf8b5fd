use proptest::prelude::*;

use expr_ensemble::io::{
    format_dataset, format_fold_plan, format_predictions, parse_dataset, parse_fold_plan,
    parse_predictions,
};
use expr_ensemble::metrics::{precision_per_class, recall_per_class};
use expr_ensemble::{
    argmax_scores, confusion, f1_per_class, focal_loss, fold_view, fuse_within_fold, macro_f1,
    split_five_fold, validate_prediction_matrix, ExpressionClass, FocalLossParams, FramePrediction,
    FusionWeights, LabeledSample, PredictionMatrix, ProbabilityVector,
};

fn class() -> impl Strategy<Value = ExpressionClass> {
    (0usize..8).prop_map(|i| ExpressionClass::from_index(i).unwrap())
}

fn probs() -> impl Strategy<Value = [f64; 8]> {
    prop::array::uniform8(1e-6f64..1.0).prop_map(|raw| {
        let total: f64 = raw.iter().sum();
        raw.map(|r| r / total)
    })
}

fn matrix(id: &str, rows: &[[f64; 8]]) -> PredictionMatrix {
    PredictionMatrix::new(
        id,
        rows.iter()
            .enumerate()
            .map(|(i, p)| FramePrediction {
                frame_id: format!("f{i:03}"),
                video_id: format!("v{}", i / 3),
                probs: *p,
            })
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn argmax_is_scale_invariant(p in probs(), c in 1e-3f64..1e3) {
        prop_assert_eq!(argmax_scores(&p), argmax_scores(&p.map(|x| x * c)));
    }

    #[test]
    fn validation_is_idempotent(rows in prop::collection::vec(probs(), 1..6)) {
        let once = validate_prediction_matrix(matrix("m", &rows)).unwrap();
        let twice = validate_prediction_matrix(once.clone()).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn focal_loss_is_non_negative_and_decreasing(
        p in probs(),
        k in class(),
        alpha in 0.05f64..1.0,
        gamma in 0.0f64..5.0,
    ) {
        let params = FocalLossParams::shared(alpha, gamma).unwrap();
        let pv = ProbabilityVector::new(p).unwrap();
        let loss = focal_loss(&pv, k, &params);
        prop_assert!(loss >= 0.0 && loss.is_finite());

        // Moving mass onto the true class never raises the loss.
        let mut sharper = p;
        let i = k.index();
        let moved = sharper[(i + 1) % 8] / 2.0;
        sharper[(i + 1) % 8] -= moved;
        sharper[i] += moved;
        let sharper = ProbabilityVector::new(sharper).unwrap();
        prop_assert!(focal_loss(&sharper, k, &params) <= loss + 1e-12);

        // Larger gamma down-weights more.
        let flatter = FocalLossParams::shared(alpha, gamma + 1.0).unwrap();
        prop_assert!(focal_loss(&pv, k, &flatter) <= loss + 1e-12);
    }

    #[test]
    fn metrics_are_bounded_and_order_free(
        pairs in prop::collection::vec((class(), class()), 1..60),
        rotate in 0usize..60,
    ) {
        let (preds, truth): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
        let cm = confusion(&preds, &truth).unwrap();
        let m = macro_f1(&cm);
        prop_assert!((0.0..=1.0).contains(&m));
        for v in f1_per_class(&cm).iter().chain(&precision_per_class(&cm)).chain(&recall_per_class(&cm)) {
            prop_assert!((0.0..=1.0).contains(v));
        }
        let mut shuffled = pairs.clone();
        shuffled.rotate_left(rotate % pairs.len());
        let (p2, t2): (Vec<_>, Vec<_>) = shuffled.into_iter().unzip();
        prop_assert_eq!(confusion(&p2, &t2).unwrap(), cm);
    }

    #[test]
    fn single_source_fusion_is_identity(rows in prop::collection::vec(probs(), 1..6), w in 0.01f64..10.0) {
        let m = matrix("only", &rows);
        let fused = fuse_within_fold(std::slice::from_ref(&m), &FusionWeights::new(vec![w]).unwrap()).unwrap();
        for (a, b) in fused.frames.iter().zip(&m.frames) {
            for (x, y) in a.probs.iter().zip(&b.probs) {
                prop_assert!((x - y).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn prediction_text_round_trips(rows in prop::collection::vec(probs(), 0..6)) {
        let m = matrix("src", &rows);
        let back = parse_predictions(&format_predictions(&m), "mem", "src").unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn dataset_and_plan_round_trip(
        rows in prop::collection::vec((class(), prop::collection::vec(-1e3f64..1e3, 3)), 5..40),
        seed in 0u64..1000,
    ) {
        let samples: Vec<LabeledSample> = rows
            .into_iter()
            .enumerate()
            .map(|(i, (label, features))| LabeledSample {
                frame_id: format!("f{i:03}"),
                video_id: format!("v{}", i / 2),
                features,
                label,
            })
            .collect();
        prop_assert_eq!(&parse_dataset(&format_dataset(&samples), "mem").unwrap(), &samples);

        let plan = split_five_fold(&samples, 3, seed).unwrap();
        prop_assert_eq!(&parse_fold_plan(&format_fold_plan(&plan), "mem").unwrap(), &plan);

        let mut tested = 0;
        for f in 0..3 {
            let (train, test) = fold_view(&samples, &plan, f).unwrap();
            prop_assert_eq!(train.len() + test.len(), samples.len());
            prop_assert!(test.iter().all(|s| plan.fold_of(&s.video_id) == Some(f)));
            tested += test.len();
        }
        prop_assert_eq!(tested, samples.len());
    }
}
