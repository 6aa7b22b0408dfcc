mod common;

use misinfo_core::classifiers::ModelParams;
use misinfo_core::eval::{expand_grid, grid_search, roc_auc, ParamGrid};
use misinfo_core::{FeatureMatrix, ModelKind, ModelSpec};
use rand::Rng;
use serde_json::json;

fn data() -> FeatureMatrix {
    let mut r = common::rng(20);
    let rows: Vec<Vec<f64>> = (0..200).map(|_| (0..5).map(|_| r.gen_range(0.0..1.0)).collect()).collect();
    let labels = rows.iter().map(|x| u8::from(x[0] * x[1] + r.gen_range(-0.1..0.1) > 0.3)).collect();
    FeatureMatrix::dense(rows, labels).unwrap()
}

fn depth_grid() -> ParamGrid {
    let mut g = ParamGrid::new();
    g.insert("max_depth".into(), vec![json!(1), json!(3)]);
    g.insert("n_rounds".into(), vec![json!(5), json!(20)]);
    g
}

#[test]
fn table_has_one_row_per_configuration_in_order() {
    let x = data();
    let res = grid_search(&x, &ModelSpec::reference(ModelKind::Gbt), &depth_grid(), 3, 1).unwrap();
    let configs = expand_grid(&depth_grid()).unwrap();
    assert_eq!(res.rows.len(), 4);
    for (row, cfg) in res.rows.iter().zip(&configs) {
        assert_eq!(&row.params, cfg);
        assert_eq!(row.fold_aucs.len(), 3);
        let mean = row.fold_aucs.iter().sum::<f64>() / 3.0;
        assert!((row.mean_auc - mean).abs() < 1e-12);
    }
    // last name varies fastest
    assert_eq!(configs[1]["n_rounds"], json!(20));
    assert_eq!(configs[1]["max_depth"], json!(1));
    let csv = res.to_csv();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn best_row_has_the_highest_mean() {
    let x = data();
    let res = grid_search(&x, &ModelSpec::reference(ModelKind::Gbt), &depth_grid(), 3, 1).unwrap();
    let top = res.rows.iter().map(|r| r.mean_auc).fold(f64::MIN, f64::max);
    assert_eq!(res.rows[res.best_index].mean_auc, top);
    assert!(res.rows[..res.best_index].iter().all(|r| r.mean_auc < top));
    match &res.best_spec.params {
        ModelParams::Gbt(p) => assert_eq!(json!(p.max_depth), res.rows[res.best_index].params["max_depth"]),
        other => panic!("unexpected {other:?}"),
    }
    // refit on all data with the winning configuration
    let auc = roc_auc(x.labels(), &res.model.predict_scores(&x).unwrap()).unwrap().1;
    assert!(auc > 0.8);
}

#[test]
fn unknown_or_ill_typed_parameters_fail() {
    let x = data();
    let mut g = ParamGrid::new();
    g.insert("depth".into(), vec![json!(2)]);
    assert!(grid_search(&x, &ModelSpec::reference(ModelKind::Gbt), &g, 3, 1).is_err());
    let mut g = ParamGrid::new();
    g.insert("max_depth".into(), vec![json!("deep")]);
    assert!(grid_search(&x, &ModelSpec::reference(ModelKind::Gbt), &g, 3, 1).is_err());
    let mut g = ParamGrid::new();
    g.insert("max_depth".into(), vec![]);
    assert!(expand_grid(&g).is_err());
}
