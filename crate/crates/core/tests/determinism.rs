use planar_dpp::harness::{run_study, StudyConfig};
use planar_dpp::sampler::{linear_statistic, DppSampler, GridSpec, Window};
use planar_dpp::stats::mean_with_stderr;
use planar_dpp::{Kernel, TestFunction};

fn report_json(threads: usize, config: &StudyConfig) -> String {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| serde_json::to_string(&run_study(config).unwrap()).unwrap())
}

#[test]
fn reports_are_identical_across_worker_counts() {
    let config = StudyConfig {
        replicas: 300,
        grid_n: 48,
        half_width: 1.5,
        seed: 42,
        ..StudyConfig::new(Kernel::ginibre(), TestFunction::tilted(1.0).unwrap(), vec![4.0, 16.0])
    };
    let one = report_json(1, &config);
    assert_eq!(one, report_json(2, &config));
    assert_eq!(one, report_json(8, &config));
}

#[test]
fn grid_refinement_keeps_the_mean() {
    let k = Kernel::ginibre().dilate(16.0).unwrap();
    let f = TestFunction::radial(1.0).unwrap();
    let w = Window::centered(2.0).unwrap();
    let mean = |n: usize| {
        let s = DppSampler::on_disk(&k, &w, &GridSpec::new(n).unwrap(), 1.0).unwrap();
        let tr: Vec<f64> = (0..2000).map(|r| linear_statistic(&s.sample(1, r).unwrap(), &f)).collect();
        mean_with_stderr(&tr)
    };
    let (a, b) = (mean(48), mean(96));
    assert!(
        (a.value - b.value).abs() < 2.0 * a.stderr.hypot(b.stderr),
        "{a:?} vs {b:?}"
    );
}
