//! Simulate, fit, represent and classify through the public API.

use dcmd::classifiers::KSelection;
use dcmd::evaluation::{accuracy, split};
use dcmd::pipeline::{fit_table_with, FitConfig, FittedModel};
use dcmd::simgen::{generate_scenario, scenario, ScenarioConfig, SimulatedDataset};
use dcmd::{KMeansModel, KnnModel, Metric, ResolutionVector};

fn dataset(seed: u64) -> SimulatedDataset {
    generate_scenario(&ScenarioConfig {
        class_size: 50,
        n_otus: 12,
        seed,
        ..scenario(4).unwrap()
    })
    .unwrap()
}

fn fit(data: &SimulatedDataset, rows: &[usize], bootstrap: usize) -> FittedModel {
    let t = ResolutionVector::from_values(data.truth.resolutions.clone())
        .unwrap()
        .select(rows);
    let config = FitConfig {
        bootstrap,
        seed: 11,
        ..FitConfig::default()
    };
    fit_table_with(&data.table.select_samples(rows), &t, &config).unwrap()
}

#[test]
fn distribution_classifiers_beat_chance() {
    let data = dataset(21);
    let labels = data.table.labels().unwrap();
    let (train_idx, test_idx) = split(data.table.n_samples(), Some(labels), 0.6, 3).unwrap();
    let model = fit(&data, &train_idx, 10);
    let t = ResolutionVector::from_values(data.truth.resolutions.clone()).unwrap();
    let train = data.table.select_samples(&train_idx);
    let test = data.table.select_samples(&test_idx);
    let tr = model.represent_with(&train, &t.select(&train_idx)).unwrap();
    let te = model.represent_with(&test, &t.select(&test_idx)).unwrap();
    for metric in [Metric::L2Pdf, Metric::L2Cdf] {
        let km = KMeansModel::train(
            model.feature_space(metric).unwrap(),
            &tr,
            train.labels().unwrap(),
        )
        .unwrap();
        let preds = km
            .predict_many(&te, test.sample_ids(), test.labels())
            .unwrap();
        let predicted: Vec<&str> = preds.iter().map(|p| p.predicted.as_str()).collect();
        let truth: Vec<&str> = test.labels().unwrap().iter().map(String::as_str).collect();
        let acc = accuracy(&predicted, &truth).unwrap();
        assert!(acc > 0.5, "{metric}: {acc}");

        // class means classify themselves
        let own = km
            .predict_many(&km.means, &km.classes, Some(&km.classes))
            .unwrap();
        assert!(own.iter().all(|p| Some(&p.predicted) == p.truth.as_ref()));

        let knn = KnnModel::train(
            model.feature_space(metric).unwrap(),
            tr.clone(),
            train.labels().unwrap(),
            &KSelection::Fixed(5),
        )
        .unwrap();
        assert_eq!(
            knn.predict_many(&te, test.sample_ids(), None)
                .unwrap()
                .len(),
            test.n_samples()
        );
    }
}

#[test]
fn model_survives_json_round_trip() {
    let data = dataset(22);
    let rows: Vec<usize> = (0..data.table.n_samples()).collect();
    let model = fit(&data, &rows, 3);
    let json = serde_json::to_string(&model).unwrap();
    let back: FittedModel = serde_json::from_str(&json).unwrap();
    assert_eq!(back, model);
}

#[test]
fn fits_do_not_depend_on_worker_count() {
    let data = dataset(23);
    let rows: Vec<usize> = (0..data.table.n_samples()).collect();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| fit(&data, &rows, 6))
    };
    assert_eq!(run(1), run(3));
}
